use cascade_cli::config::{
    parse_config, serialize_config, BoundCfg, CertificateCfg, CertifyCfg, ChainrecCfg,
    EquilibriaCfg, InlineCascade, InlineSystem, RunConfig, SimulateCfg, SpaceCfg, SystemSelector,
};
use cascade_cli::systems::{resolve_system, Resolved};
use cascade_core::dynamics::eval_field;
use cascade_core::geometry::{Factor, PointCoords};

#[test]
fn builtin_defaults_parse() {
    let cfg = parse_config(r#"{"version": 1, "system": {"builtin": "paper-example"}}"#).unwrap();
    assert_eq!(cfg.seed, 42);
    assert!(matches!(resolve_system(&cfg).unwrap(), Resolved::Cascade(_)));
}

#[test]
fn unknown_key_is_reported_with_its_path() {
    let err = parse_config(
        r#"{"version": 1, "system": {"builtin": "pendulum"}, "chainrec": {"epsilonn": 0.1}}"#,
    )
    .unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("$.chainrec.epsilonn"), "{msg}");
}

#[test]
fn wrong_version_is_rejected() {
    let err = parse_config(r#"{"version": 2, "system": {"builtin": "pendulum"}}"#).unwrap_err();
    assert!(format!("{err}").contains("version"));
}

#[test]
fn unknown_builtin_is_rejected() {
    let err = parse_config(r#"{"version": 1, "system": {"builtin": "nonesuch"}}"#).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("nonesuch") && msg.contains("paper-example"), "{msg}");
}

#[test]
fn inline_pendulum_matches_the_builtin_field() {
    let text = r#"{
        "version": 1,
        "system": {"inline": {
            "space": {"factors": ["circle", "line"]},
            "state": ["phi", "phidot"],
            "field": ["phidot", "-(sin(phi)+phidot)"],
            "target": [0, 0],
            "lyapunov": "1-cos(phi)+phidot^2/2",
            "region": ["full", [-4, 4]]
        }}
    }"#;
    let cfg = parse_config(text).unwrap();
    let resolved = resolve_system(&cfg).unwrap();
    let Resolved::System(inline) = resolved else {
        panic!("expected a standalone system");
    };
    let reference = cascade_core::builtins::pendulum();
    for (phi, phidot) in [(0.0, 0.0), (1.2, -0.4), (-2.5, 3.0)] {
        let p = PointCoords(vec![phi, phidot]);
        let a = eval_field(&inline.system, &p).unwrap();
        let b = eval_field(&reference, &p).unwrap();
        assert!((a.0[0] - b.0[0]).abs() < 1e-15);
        assert!((a.0[1] - b.0[1]).abs() < 1e-15);
    }
    let v = inline.lyapunov.unwrap();
    let w = v.value(&PointCoords(vec![-std::f64::consts::PI, 1.0])).unwrap();
    assert!((w - 2.5).abs() < 1e-15);
}

#[test]
fn inline_cascade_resolves_with_certificate() {
    let text = r#"{
        "version": 1,
        "system": {"inline_cascade": {
            "outer_space": {"factors": ["circle", "line"]},
            "inner_space": {"factors": ["circle", "line"]},
            "outer_state": ["theta", "thetadot"],
            "inner_state": ["phi", "phidot"],
            "f": ["thetadot", "-(sin(theta)+thetadot)*cos(2*phi)"],
            "g": ["phidot", "-(sin(phi)+phidot)"],
            "inner_equilibrium": [0, 0],
            "v_outer": "1-cos(theta)+thetadot^2/2",
            "region_x": ["full", [-4, 4]],
            "region_y": ["full", [-4, 4]]
        }},
        "certify": {"certificate": {
            "w": "1-cos(theta)+thetadot^2/2",
            "alpha": "4*(1-cos(2*phi))",
            "beta": "0",
            "c": 4
        }}
    }"#;
    let cfg = parse_config(text).unwrap();
    let Resolved::Cascade(rc) = resolve_system(&cfg).unwrap() else {
        panic!("expected a cascade");
    };
    assert!(rc.certificate.is_some());
    // The inline outer field matches the built-in torus cascade.
    let builtin = match cascade_core::builtins::builtin("paper-example").unwrap() {
        cascade_core::builtins::Builtin::Cascade(b) => b,
        _ => unreachable!(),
    };
    let x = PointCoords(vec![1.0, 2.0]);
    let y = PointCoords(vec![0.5, -1.0]);
    let a = rc.cascade.eval_outer(&x, &y).unwrap();
    let b = builtin.cascade.eval_outer(&x, &y).unwrap();
    assert!((a.0[1] - b.0[1]).abs() < 1e-15);
    // Target defaults to the lifted inner rest point.
    assert_eq!(rc.target.0, vec![0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn inline_cascade_rejects_a_moving_inner_equilibrium() {
    let text = r#"{
        "version": 1,
        "system": {"inline_cascade": {
            "outer_space": {"factors": ["line"]},
            "inner_space": {"factors": ["line"]},
            "outer_state": ["x"],
            "inner_state": ["y"],
            "f": ["-x"],
            "g": ["-y+1"],
            "inner_equilibrium": [0]
        }}
    }"#;
    assert!(parse_config(text).is_err());
}

#[test]
fn bad_expression_is_reported() {
    let text = r#"{
        "version": 1,
        "system": {"inline": {
            "space": {"factors": ["line"]},
            "state": ["x"],
            "field": ["-x + oops"]
        }}
    }"#;
    let err = parse_config(text).unwrap_err();
    assert!(format!("{err:#}").contains("oops"));
}

#[test]
fn metric_must_be_positive_definite() {
    let text = r#"{
        "version": 1,
        "system": {"inline": {
            "space": {"factors": ["line", "line"], "metric": [[1, 0], [0, -1]]},
            "state": ["x", "y"],
            "field": ["-x", "-y"]
        }}
    }"#;
    assert!(parse_config(text).is_err());
}

fn maximal_config() -> RunConfig {
    RunConfig {
        version: 1,
        seed: 7,
        out_dir: Some("artifacts".into()),
        system: SystemSelector::InlineCascade(InlineCascade {
            outer_space: SpaceCfg {
                factors: vec![Factor::Circle, Factor::Line],
                metric: Some(vec![vec![1.0, 0.0], vec![0.0, 2.0]]),
            },
            inner_space: SpaceCfg {
                factors: vec![Factor::Circle, Factor::Line],
                metric: None,
            },
            outer_state: vec!["theta".into(), "thetadot".into()],
            inner_state: vec!["phi".into(), "phidot".into()],
            f: vec!["thetadot".into(), "-(sin(theta)+thetadot)*cos(2*phi)".into()],
            g: vec!["phidot".into(), "-(sin(phi)+phidot)".into()],
            inner_equilibrium: vec![0.0, 0.0],
            v_outer: Some("1-cos(theta)+thetadot^2/2".into()),
            target: Some(vec![0.0, 0.0, 0.0, 0.0]),
            region_x: Some(vec![BoundCfg::Full("full".into()), BoundCfg::Interval([-4.0, 4.0])]),
            region_y: Some(vec![BoundCfg::Full("full".into()), BoundCfg::Interval([-4.0, 4.0])]),
        }),
        simulate: Some(SimulateCfg {
            from: Some(vec![1.0, 2.0, 3.0, 4.0]),
            t_end: Some(10.0),
            tol: Some(1e-8),
            samples: Some(100),
            axes: Some([0, 2]),
        }),
        equilibria: Some(EquilibriaCfg {
            grid_per_dim: Some(8),
            newton_tol: Some(1e-9),
            hyp_tol: Some(1e-5),
            region: None,
        }),
        chainrec: Some(ChainrecCfg {
            depth: Some(5),
            eps: Some(0.25),
            t_flow: Some(5.0),
            lattice_points: Some(8),
            tol: Some(1e-6),
            refine_rounds: Some(2),
            margin: None,
            region: None,
        }),
        basin: Some(Default::default()),
        certify: Some(CertifyCfg {
            basin_threshold: Some(0.999),
            n_basin: Some(1000),
            certificate: Some(CertificateCfg {
                w: "1-cos(theta)+thetadot^2/2".into(),
                alpha: "4*(1-cos(2*phi))".into(),
                beta: "0".into(),
                c: 4.0,
            }),
            ..Default::default()
        }),
    }
}

#[test]
fn round_trip_preserves_configs() {
    for cfg in [RunConfig::builtin("pendulum"), maximal_config()] {
        let text = serialize_config(&cfg);
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
        // A second pass is textually stable too.
        assert_eq!(serialize_config(&back), text);
    }
}
