//! Evaluator cross-check: random expression trees, rendered to text and fed
//! through the parser, must evaluate identically to a direct reference
//! interpreter of the same tree.

use cascade_cli::expr::{eval_expression, parse_expression, Expr};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VARS: [&str; 3] = ["x", "y", "z"];

fn gen_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 || rng.random_range(0..10) < 2 {
        return if rng.random_range(0..2) == 0 {
            Expr::Const((rng.random_range(-30..=30) as f64) / 10.0)
        } else {
            Expr::Var(rng.random_range(0..VARS.len()))
        };
    }
    let a = Box::new(gen_expr(rng, depth - 1));
    let b = Box::new(gen_expr(rng, depth - 1));
    match rng.random_range(0..8) {
        0 => Expr::Add(a, b),
        1 => Expr::Sub(a, b),
        2 => Expr::Mul(a, b),
        3 => Expr::Div(a, b),
        // Small integer exponents keep the values in range.
        4 => Expr::Pow(a, Box::new(Expr::Const(rng.random_range(0..4) as f64))),
        5 => Expr::Neg(a),
        6 => Expr::Sin(a),
        _ => Expr::Cos(a),
    }
}

fn render(e: &Expr) -> String {
    match e {
        Expr::Const(v) => {
            if *v < 0.0 {
                format!("({v:?})")
            } else {
                format!("{v:?}")
            }
        }
        Expr::Var(i) => VARS[*i].to_string(),
        Expr::Neg(a) => format!("(-{})", render(a)),
        Expr::Add(a, b) => format!("({}+{})", render(a), render(b)),
        Expr::Sub(a, b) => format!("({}-{})", render(a), render(b)),
        Expr::Mul(a, b) => format!("({}*{})", render(a), render(b)),
        Expr::Div(a, b) => format!("({}/{})", render(a), render(b)),
        Expr::Pow(a, b) => format!("({}^{})", render(a), render(b)),
        Expr::Sin(a) => format!("sin({})", render(a)),
        Expr::Cos(a) => format!("cos({})", render(a)),
    }
}

/// Direct interpreter over the tree; IEEE semantics, no error channel.
fn reference_eval(e: &Expr, b: &[f64]) -> f64 {
    match e {
        Expr::Const(v) => *v,
        Expr::Var(i) => b[*i],
        Expr::Neg(a) => -reference_eval(a, b),
        Expr::Add(x, y) => reference_eval(x, b) + reference_eval(y, b),
        Expr::Sub(x, y) => reference_eval(x, b) - reference_eval(y, b),
        Expr::Mul(x, y) => reference_eval(x, b) * reference_eval(y, b),
        Expr::Div(x, y) => reference_eval(x, b) / reference_eval(y, b),
        Expr::Pow(x, y) => reference_eval(x, b).powf(reference_eval(y, b)),
        Expr::Sin(a) => reference_eval(a, b).sin(),
        Expr::Cos(a) => reference_eval(a, b).cos(),
    }
}

#[test]
fn parser_and_evaluator_match_the_reference_interpreter() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let var_names: Vec<String> = VARS.iter().map(|s| s.to_string()).collect();
    let mut checked = 0usize;
    let mut skipped = 0usize;
    while checked < 10_000 {
        let tree = gen_expr(&mut rng, 5);
        let bindings: Vec<f64> = (0..VARS.len())
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        let expected = reference_eval(&tree, &bindings);
        if !expected.is_finite() {
            // Division blowups and overflows are rejected by the evaluator;
            // nothing to compare against.
            skipped += 1;
            assert!(skipped < 2000, "reference interpreter degenerated");
            continue;
        }
        let text = render(&tree);
        let parsed = parse_expression(&text, &var_names)
            .unwrap_or_else(|e| panic!("rendering `{text}` failed to parse: {e}"));
        match eval_expression(&parsed, &bindings) {
            Ok(got) => {
                let scale = expected.abs().max(1.0);
                assert!(
                    (got - expected).abs() <= 1e-15 * scale,
                    "`{text}` at {bindings:?}: {got} vs {expected}"
                );
            }
            // The checked evaluator may reject an exact-zero denominator
            // that IEEE division tolerated en route to a finite result.
            Err(_) => {
                skipped += 1;
                continue;
            }
        }
        checked += 1;
    }
}
