//! Chain-recurrence approximation through box covers and transition graphs.
//!
//! A compact region is tiled by a dyadic grid of boxes. For a chosen hop
//! time `T` and slack `eps`, a directed edge `i -> j` is recorded whenever
//! some sample of box `i` flows, over time `T`, to within `eps` of box `j`.
//! Directed cycles of this graph (strongly connected components of size
//! greater than one, plus self-loops) outer-approximate the points that
//! admit closed chains with hop slack `eps` and hop time `T`. Trajectories
//! that leave the covered region feed a distinguished EXIT node and are
//! treated as non-recurrent.
//!
//! Verdicts computed here are evidence at the stated `(eps, T)` resolution,
//! not proofs: the chain-recurrent set proper quantifies over every positive
//! slack and hop time.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::dynamics::{flow_endpoint, flow_sampled, ScalarField, SystemDef};
use crate::equilibria::{EquilibriumRecord, RegionSpec};
use crate::error::{CoreError, Result};
use crate::geometry::{dist, metric_norm, wrap_angle, Factor, PointCoords, SpaceSpec};
use crate::rng::{counter_stream, stream, Stream};

const MAX_BOXES: u64 = 10_000_000;

/// Kronecker sequence steps for the per-box lattice samples (inverse of the
/// generalized golden ratios for dimensions one through four, cycled).
const LATTICE_STEPS: [f64; 4] = [
    0.618_033_988_749_894_9,
    0.754_877_666_246_692_7,
    0.819_172_513_396_164_5,
    0.856_674_883_854_502_9,
];

/// Dyadic box cover of a compact region. All boxes share the same per-axis
/// width; after refinement only a subset of the grid cells is present.
#[derive(Debug, Clone)]
pub struct BoxCover {
    space: SpaceSpec,
    region: RegionSpec,
    depth: u32,
    cells: Vec<u64>,
    widths: Vec<f64>,
    origins: Vec<f64>,
    boxes: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl BoxCover {
    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn region(&self) -> &RegionSpec {
        &self.region
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Metric length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        metric_norm(&self.space, &self.widths)
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.widths.iter().map(|w| 0.5 * w).collect()
    }

    fn cell_coords(&self, linear: u64) -> Vec<u64> {
        let mut rest = linear;
        self.cells
            .iter()
            .map(|&c| {
                let i = rest % c;
                rest /= c;
                i
            })
            .collect()
    }

    fn linear_index(&self, cell: &[u64]) -> u64 {
        let mut acc = 0u64;
        let mut stride = 1u64;
        for (i, &c) in cell.iter().enumerate() {
            acc += c * stride;
            stride *= self.cells[i];
        }
        acc
    }

    pub fn center(&self, id: usize) -> PointCoords {
        let cell = self.cell_coords(self.boxes[id]);
        PointCoords(
            cell.iter()
                .enumerate()
                .map(|(d, &c)| self.origins[d] + (c as f64 + 0.5) * self.widths[d])
                .collect(),
        )
    }

    fn corner(&self, id: usize, mask: usize) -> PointCoords {
        let cell = self.cell_coords(self.boxes[id]);
        PointCoords(
            cell.iter()
                .enumerate()
                .map(|(d, &c)| {
                    let hi = (mask >> d) & 1 == 1;
                    self.origins[d] + (c as f64 + if hi { 1.0 } else { 0.0 }) * self.widths[d]
                })
                .collect(),
        )
    }

    /// Metric distance from a point to the closed extent of a box
    /// (axis-wise clamp; exact for diagonal metrics).
    pub fn gap(&self, p: &PointCoords, id: usize) -> f64 {
        let center = self.center(id);
        let gaps: Vec<f64> = (0..self.dim())
            .map(|d| {
                let delta = match self.space.factors()[d] {
                    Factor::Circle => wrap_angle(p.0[d] - center.0[d]),
                    Factor::Line => p.0[d] - center.0[d],
                };
                (delta.abs() - 0.5 * self.widths[d]).max(0.0)
            })
            .collect();
        metric_norm(&self.space, &gaps)
    }

    fn dim(&self) -> usize {
        self.cells.len()
    }

    /// Cell index along one axis for a chart coordinate, or `None` when the
    /// coordinate leaves a line axis.
    fn axis_cell(&self, d: usize, x: f64) -> Option<u64> {
        let cells = self.cells[d];
        match self.space.factors()[d] {
            Factor::Circle => {
                let w = wrap_angle(x);
                let i = ((w - self.origins[d]) / self.widths[d]).floor() as i64;
                Some(i.rem_euclid(cells as i64) as u64)
            }
            Factor::Line => {
                let (lo, width) = self.region.axis_extent(d);
                if x < lo || x > lo + width {
                    return None;
                }
                let i = ((x - lo) / self.widths[d]).floor() as u64;
                Some(i.min(cells - 1))
            }
        }
    }

    /// Id of the present box containing the point, if any.
    pub fn locate(&self, p: &PointCoords) -> Option<usize> {
        let cell: Option<Vec<u64>> = (0..self.dim()).map(|d| self.axis_cell(d, p.0[d])).collect();
        let linear = self.linear_index(&cell?);
        self.index.get(&linear).copied()
    }

    /// Ids of all present boxes whose `eps`-inflation contains the point,
    /// in increasing id order.
    pub fn boxes_within(&self, p: &PointCoords, eps: f64) -> Vec<usize> {
        let n = self.dim();
        // Per-axis candidate cells covering the chart interval reachable
        // within metric distance eps.
        let mut candidates: Vec<Vec<u64>> = Vec::with_capacity(n);
        for d in 0..n {
            let r = self.space.axis_radius(d, eps);
            let cells = self.cells[d];
            let span = (r / self.widths[d]).ceil() as i64 + 1;
            let mut axis = Vec::new();
            match self.space.factors()[d] {
                Factor::Circle => {
                    let base = ((wrap_angle(p.0[d]) - self.origins[d]) / self.widths[d]).floor()
                        as i64;
                    if 2 * span + 1 >= cells as i64 {
                        axis.extend(0..cells);
                    } else {
                        for off in -span..=span {
                            axis.push((base + off).rem_euclid(cells as i64) as u64);
                        }
                        axis.sort_unstable();
                        axis.dedup();
                    }
                }
                Factor::Line => {
                    let (lo, _) = self.region.axis_extent(d);
                    let base = ((p.0[d] - lo) / self.widths[d]).floor() as i64;
                    for off in -span..=span {
                        let i = base + off;
                        if i >= 0 && (i as u64) < cells {
                            axis.push(i as u64);
                        }
                    }
                }
            }
            if axis.is_empty() {
                return Vec::new();
            }
            candidates.push(axis);
        }

        let mut out = Vec::new();
        let mut cell = vec![0u64; n];
        self.collect_candidates(&candidates, 0, &mut cell, p, eps, &mut out);
        out.sort_unstable();
        out
    }

    fn collect_candidates(
        &self,
        candidates: &[Vec<u64>],
        d: usize,
        cell: &mut Vec<u64>,
        p: &PointCoords,
        eps: f64,
        out: &mut Vec<usize>,
    ) {
        if d == candidates.len() {
            if let Some(&id) = self.index.get(&self.linear_index(cell)) {
                if self.gap(p, id) <= eps {
                    out.push(id);
                }
            }
            return;
        }
        for &c in &candidates[d] {
            cell[d] = c;
            self.collect_candidates(candidates, d + 1, cell, p, eps, out);
        }
    }

    /// All sample points of one box: corners, center, and `lattice` scrambled
    /// lattice points (deterministic for a fixed seed).
    fn samples(&self, id: usize, lattice: usize, seed: u64) -> Vec<PointCoords> {
        let n = self.dim();
        let mut samples = Vec::with_capacity((1 << n) + 1 + lattice);
        for mask in 0..(1usize << n) {
            samples.push(self.corner(id, mask));
        }
        samples.push(self.center(id));
        if lattice > 0 {
            let mut rng = counter_stream(seed, Stream::BoxLattice, self.boxes[id]);
            let shifts: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let cell = self.cell_coords(self.boxes[id]);
            for i in 0..lattice {
                let coords = (0..n)
                    .map(|d| {
                        let u = (i as f64 * LATTICE_STEPS[d % LATTICE_STEPS.len()] + shifts[d])
                            .fract();
                        self.origins[d] + (cell[d] as f64 + u) * self.widths[d]
                    })
                    .collect();
                samples.push(PointCoords(coords));
            }
        }
        samples
    }
}

/// Uniform dyadic cover: `2^depth` boxes per dimension.
pub fn build_cover(space: &SpaceSpec, region: &RegionSpec, depth: u32) -> Result<BoxCover> {
    region.validate(space)?;
    let n = region.dim();
    let per_axis: u64 = 1u64 << depth;
    let total = per_axis.checked_pow(n as u32).filter(|&t| t <= MAX_BOXES);
    let Some(total) = total else {
        return Err(CoreError::ResourceLimit(format!(
            "box cover would hold {per_axis}^{n} boxes"
        )));
    };
    let mut origins = Vec::with_capacity(n);
    let mut widths = Vec::with_capacity(n);
    for d in 0..n {
        let (lo, width) = region.axis_extent(d);
        origins.push(lo);
        widths.push(width / per_axis as f64);
    }
    let boxes: Vec<u64> = (0..total).collect();
    let index = boxes.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    Ok(BoxCover {
        space: space.clone(),
        region: region.clone(),
        depth,
        cells: vec![per_axis; n],
        widths,
        origins,
        boxes,
        index,
    })
}

/// Bisects the kept boxes along every axis and discards the rest.
pub fn refine(cover: &BoxCover, keep: &BTreeSet<usize>) -> Result<BoxCover> {
    if keep.is_empty() {
        return Err(CoreError::Precondition(
            "refine requires a nonempty set of boxes to keep".into(),
        ));
    }
    let n = cover.dim();
    let child_count = keep.len() as u64 * (1u64 << n);
    if child_count > MAX_BOXES {
        return Err(CoreError::ResourceLimit(format!(
            "refinement would hold {child_count} boxes"
        )));
    }
    let cells: Vec<u64> = cover.cells.iter().map(|c| c * 2).collect();
    let widths: Vec<f64> = cover.widths.iter().map(|w| 0.5 * w).collect();
    let mut child = BoxCover {
        space: cover.space.clone(),
        region: cover.region.clone(),
        depth: cover.depth + 1,
        cells,
        widths,
        origins: cover.origins.clone(),
        boxes: Vec::new(),
        index: HashMap::new(),
    };
    let mut boxes = Vec::with_capacity(child_count as usize);
    for &id in keep {
        if id >= cover.len() {
            return Err(CoreError::InvalidInput(format!("box id {id} out of range")));
        }
        let cell = cover.cell_coords(cover.boxes[id]);
        for mask in 0..(1u64 << n) {
            let child_cell: Vec<u64> = cell
                .iter()
                .enumerate()
                .map(|(d, &c)| 2 * c + ((mask >> d) & 1))
                .collect();
            boxes.push(child.linear_index(&child_cell));
        }
    }
    boxes.sort_unstable();
    boxes.dedup();
    child.index = boxes.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    child.boxes = boxes;
    Ok(child)
}

/// Time-`T` transition relation between boxes. Node `len()` is the EXIT
/// node collecting trajectories that leave the covered region or diverge.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    pub edges: Vec<Vec<usize>>,
    pub n_boxes: usize,
    pub eps: f64,
    pub t_flow: f64,
    pub samples_per_box: usize,
    pub seed: u64,
    pub n_exit_trajectories: usize,
    pub n_diverged: usize,
}

impl TransitionGraph {
    pub fn exit_node(&self) -> usize {
        self.n_boxes
    }
}

/// Builds the transition graph by flowing every box's sample set for time
/// `t_flow` and recording an edge to every box whose `eps`-inflation contains
/// an endpoint. Samples whose flow diverges or lands outside the cover feed
/// the EXIT node.
pub fn build_transition_graph(
    cover: &BoxCover,
    sys: &SystemDef,
    t_flow: f64,
    eps: f64,
    lattice_points: usize,
    tol: f64,
    seed: u64,
) -> Result<TransitionGraph> {
    if !(t_flow > 0.0) || !(eps > 0.0) {
        return Err(CoreError::InvalidInput(
            "t_flow and eps must be positive".into(),
        ));
    }
    if sys.space() != cover.space() {
        return Err(CoreError::InvalidInput(
            "system space does not match the cover".into(),
        ));
    }
    let n = cover.len();
    let exit = n;
    let mut edges: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];
    let mut n_exit = 0usize;
    let mut n_diverged = 0usize;
    let mut samples_per_box = 0usize;

    for id in 0..n {
        let samples = cover.samples(id, lattice_points, seed);
        samples_per_box = samples.len();
        for sample in samples {
            match flow_endpoint(sys, &sample, t_flow, tol) {
                Ok(end) => {
                    let targets = cover.boxes_within(&end, eps);
                    if targets.is_empty() {
                        edges[id].insert(exit);
                        n_exit += 1;
                    } else {
                        edges[id].extend(targets);
                    }
                }
                Err(e) if e.is_divergence() => {
                    log::debug!("box {id} sample diverged: {e}");
                    edges[id].insert(exit);
                    n_diverged += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    Ok(TransitionGraph {
        edges: edges.into_iter().map(|s| s.into_iter().collect()).collect(),
        n_boxes: n,
        eps,
        t_flow,
        samples_per_box,
        seed,
        n_exit_trajectories: n_exit,
        n_diverged,
    })
}

/// Iterative Tarjan strongly-connected-components over an adjacency list.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut next_index = 0usize;
    let mut next_comp = 0usize;
    // Explicit DFS frames: (node, position in its adjacency list).
    let mut frames: Vec<(usize, usize)> = Vec::new();

    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        frames.push((start, 0));
        index[start] = next_index;
        low[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&mut (parent, _)) = frames.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack nonempty");
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

/// Boxes lying on directed cycles of the transition graph.
#[derive(Debug, Clone, Serialize)]
pub struct ChainRecurrentApprox {
    pub recurrent_boxes: Vec<usize>,
    pub scc_id: Vec<usize>,
    pub eps: f64,
    pub t_flow: f64,
}

/// Recurrent boxes: members of a strongly connected component of size
/// greater than one, or bearers of a self-edge. The EXIT node is excluded.
pub fn chain_recurrent_approx(graph: &TransitionGraph) -> ChainRecurrentApprox {
    let comp = tarjan_scc(&graph.edges);
    let n = graph.n_boxes;
    let mut comp_size: HashMap<usize, usize> = HashMap::new();
    for &c in comp.iter().take(n) {
        *comp_size.entry(c).or_insert(0) += 1;
    }
    let recurrent_boxes: Vec<usize> = (0..n)
        .filter(|&v| comp_size[&comp[v]] > 1 || graph.edges[v].binary_search(&v).is_ok())
        .collect();
    ChainRecurrentApprox {
        recurrent_boxes,
        scc_id: comp[..n].to_vec(),
        eps: graph.eps,
        t_flow: graph.t_flow,
    }
}

/// Verdict of the gradient-like check.
#[derive(Debug, Clone, Serialize)]
pub struct GradientLikeReport {
    pub pass: bool,
    pub n_trajectories: usize,
    /// Initial condition, sample time, and the offending increase.
    pub increase_witnesses: Vec<(Vec<f64>, f64, f64)>,
    /// Initial conditions whose trajectories neither decreased the function
    /// measurably nor reached an equilibrium ball.
    pub stagnant_witnesses: Vec<Vec<f64>>,
    pub diverged_witnesses: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct GradientLikeParams {
    pub n_trajectories: usize,
    pub horizon: f64,
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
}

impl Default for GradientLikeParams {
    fn default() -> Self {
        Self {
            n_trajectories: 100,
            horizon: 50.0,
            tol: 1e-9,
            seed: 42,
            samples: 400,
        }
    }
}

/// Checks that the candidate function decreases along sampled trajectories
/// until they enter a `1e-3` ball of a listed equilibrium.
///
/// A trajectory fails if the function increases beyond `10 * tol` between
/// consecutive samples, or if it reaches the horizon without either entering
/// an equilibrium ball or decreasing the function measurably.
pub fn verify_gradient_like(
    sys: &SystemDef,
    v: &ScalarField,
    eqs: &[EquilibriumRecord],
    region: &RegionSpec,
    params: &GradientLikeParams,
) -> Result<GradientLikeReport> {
    if params.n_trajectories < 1 {
        return Err(CoreError::InvalidInput(
            "n_trajectories must be at least 1".into(),
        ));
    }
    region.validate(sys.space())?;
    let space = sys.space();
    let slack = 10.0 * params.tol;
    let mut rng = stream(params.seed, Stream::GradientLike);
    let ts: Vec<f64> = (0..=params.samples)
        .map(|i| params.horizon * i as f64 / params.samples as f64)
        .collect();

    let mut report = GradientLikeReport {
        pass: true,
        n_trajectories: params.n_trajectories,
        increase_witnesses: Vec::new(),
        stagnant_witnesses: Vec::new(),
        diverged_witnesses: Vec::new(),
    };

    for _ in 0..params.n_trajectories {
        let mut attempts = 0;
        let p0 = loop {
            attempts += 1;
            if attempts > 100_000 {
                return Err(CoreError::InvalidInput(
                    "could not sample initial conditions away from the equilibria".into(),
                ));
            }
            let candidate = region.sample(&mut rng);
            let clear = eqs
                .iter()
                .map(|e| dist(space, &candidate, &e.point))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .all(|d| d > 1e-2);
            if clear {
                break candidate;
            }
        };

        let traj = match flow_sampled(sys, &p0, &ts, params.tol) {
            Ok(t) => t,
            Err(e) if e.is_divergence() => {
                report.pass = false;
                report.diverged_witnesses.push(p0.0.clone());
                continue;
            }
            Err(e) => return Err(e),
        };

        let mut reached_ball = false;
        let mut increased = false;
        let mut prev_value = v.value(&traj.points[0])?;
        let first_value = prev_value;
        for (t, p) in traj.times.iter().zip(&traj.points).skip(1) {
            let near_eq = eqs
                .iter()
                .map(|e| dist(space, p, &e.point))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .any(|d| d < 1e-3);
            if near_eq {
                reached_ball = true;
                break;
            }
            let value = v.value(p)?;
            if value > prev_value + slack {
                report.pass = false;
                increased = true;
                report
                    .increase_witnesses
                    .push((p0.0.clone(), *t, value - prev_value));
                break;
            }
            prev_value = value;
        }
        if !reached_ball && !increased && first_value - prev_value <= 10.0 * slack {
            // Neither converged nor measurably decreasing: the candidate
            // function has no power on this trajectory.
            report.pass = false;
            report.stagnant_witnesses.push(p0.0.clone());
        }
    }
    Ok(report)
}

/// Verdict of the "recurrence equals equilibria" check.
#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceVerdict {
    pub pass: bool,
    pub margin: f64,
    /// Recurrent boxes farther than the margin from every equilibrium.
    pub stray_boxes: Vec<usize>,
    /// Indices into the equilibrium list not covered by any recurrent box.
    pub uncovered_equilibria: Vec<usize>,
}

/// Passes when every recurrent box lies within the margin of some
/// equilibrium and every equilibrium is covered by a recurrent box.
/// The default margin is `2 * (box diameter + eps)`.
pub fn check_recurrence_equals_equilibria(
    approx: &ChainRecurrentApprox,
    cover: &BoxCover,
    eqs: &[EquilibriumRecord],
    margin: Option<f64>,
) -> Result<RecurrenceVerdict> {
    let margin = margin.unwrap_or(2.0 * (cover.diameter() + approx.eps));
    let space = cover.space();
    let mut stray_boxes = Vec::new();
    for &id in &approx.recurrent_boxes {
        let center = cover.center(id);
        let mut near = false;
        for eq in eqs {
            if dist(space, &center, &eq.point)? <= margin {
                near = true;
                break;
            }
        }
        if !near {
            stray_boxes.push(id);
        }
    }
    let mut uncovered = Vec::new();
    for (i, eq) in eqs.iter().enumerate() {
        let covered = approx
            .recurrent_boxes
            .iter()
            .any(|&id| cover.gap(&eq.point, id) <= 1e-9);
        if !covered {
            uncovered.push(i);
        }
    }
    Ok(RecurrenceVerdict {
        pass: stray_boxes.is_empty() && uncovered.is_empty(),
        margin,
        stray_boxes,
        uncovered_equilibria: uncovered,
    })
}

/// Box-granularity localization check: no recurrent box may have a value
/// range separated from every equilibrium value by more than the box's own
/// value oscillation.
pub fn localization_consistent(
    cover: &BoxCover,
    approx: &ChainRecurrentApprox,
    v: &ScalarField,
    eqs: &[EquilibriumRecord],
) -> Result<bool> {
    let eq_values: Vec<f64> = eqs
        .iter()
        .map(|e| v.value(&e.point))
        .collect::<Result<Vec<_>>>()?;
    if eq_values.is_empty() {
        return Ok(approx.recurrent_boxes.is_empty());
    }
    let n = cover.dim();
    for &id in &approx.recurrent_boxes {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for mask in 0..(1usize << n) {
            let val = v.value(&cover.corner(id, mask))?;
            lo = lo.min(val);
            hi = hi.max(val);
        }
        let val = v.value(&cover.center(id))?;
        lo = lo.min(val);
        hi = hi.max(val);
        let osc = hi - lo;
        let near = eq_values.iter().any(|&ev| {
            let gap = if ev < lo {
                lo - ev
            } else if ev > hi {
                ev - hi
            } else {
                0.0
            };
            gap <= osc + 1e-12
        });
        if !near {
            return Ok(false);
        }
    }
    Ok(true)
}
