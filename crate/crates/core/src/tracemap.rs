//! The trace map `K(p, q) = (q², pq − 2p + 2)` of Thue-Morse driving.
//!
//! With `x_n = tr M_n`, the traces obey `x_{n+1} = x_{n−1}²(x_n − 2) + 2`, and
//! `(p_n, q_n) = (x_n², x_{n+1})` evolves under `K`. `(4, 2)` is the fixed point;
//! points that land on it are non-heating.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub p: f64,
    pub q: f64,
}

impl TracePoint {
    pub const FIXED: TracePoint = TracePoint { p: 4.0, q: 2.0 };

    pub const fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }

    pub fn is_escaped(&self) -> bool {
        !(self.p.is_finite() && self.q.is_finite())
    }

    pub fn dist_inf(&self, o: &TracePoint) -> f64 {
        (self.p - o.p).abs().max((self.q - o.q).abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    I,
    II,
    III,
    None,
}

/// `x_{n+1} = x_{n−1}²(x_n − 2) + 2`; non-finite output marks escape.
pub fn tm_trace_step<T>(x_prev: T, x_curr: T) -> T
where
    T: Copy + std::ops::Mul<Output = T> + std::ops::Sub<Output = T> + std::ops::Add<Output = T> + From<f64>,
{
    x_prev * x_prev * (x_curr - T::from(2.0)) + T::from(2.0)
}

pub fn k_map(pt: TracePoint) -> TracePoint {
    TracePoint { p: pt.q * pt.q, q: pt.p * pt.q - 2.0 * pt.p + 2.0 }
}

/// Boundary points go to the lowest-numbered matching region.
pub fn region_classify(pt: TracePoint) -> Region {
    let TracePoint { p, q } = pt;
    if !(p >= 0.0) {
        Region::None
    } else if p - 2.0 <= q && q <= 2.0 {
        Region::I
    } else if q >= 2.0 {
        Region::II
    } else {
        Region::III
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preimages {
    pub points: Vec<TracePoint>,
    /// The whole ray `{(p, 2) : p ≥ 0}` also maps onto the target.
    pub ray: bool,
}

const RAY_TOL: f64 = 1e-12;

/// All `x` with `K(x) = pt`: `q' = ±√p`, `p' = (q − 2)/(q' − 2)`, kept when `p' ≥ 0`.
pub fn k_inverse(pt: TracePoint) -> Result<Preimages> {
    if !(pt.p >= 0.0) || pt.is_escaped() {
        return Err(Error::Domain(format!("preimage needs finite p ≥ 0, got {pt:?}")));
    }
    let s = pt.p.sqrt();
    let cands: &[f64] = if s == 0.0 { &[0.0] } else { &[s, -s] };
    let mut out = Preimages { points: Vec::with_capacity(2), ray: false };
    for &qp in cands {
        if (qp - 2.0).abs() <= RAY_TOL {
            if (pt.q - 2.0).abs() <= RAY_TOL {
                out.ray = true;
            }
            continue;
        }
        let pp = (pt.q - 2.0) / (qp - 2.0);
        if pp >= 0.0 && pp.is_finite() {
            out.points.push(TracePoint::new(pp, qp));
        }
    }
    Ok(out)
}

/// One branch of `K⁻¹` (`sign` picks `q' = ±√p`); `None` if outside `p ≥ 0`.
fn inverse_branch(pt: TracePoint, sign: f64) -> Option<TracePoint> {
    if !(pt.p >= 0.0) || pt.is_escaped() {
        return None;
    }
    let qp = sign * pt.p.sqrt();
    if (qp - 2.0).abs() <= RAY_TOL {
        return None;
    }
    let pp = (pt.q - 2.0) / (qp - 2.0);
    (pp >= 0.0 && pp.is_finite()).then_some(TracePoint::new(pp, qp))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudOptions {
    /// Ray samples on `[0, p_max]`.
    pub samples: usize,
    pub p_max: f64,
    /// Points with `p > window_p` or `|q| > window_q` are dropped.
    pub window_p: f64,
    pub window_q: f64,
    /// Bisection refinement when consecutive points are farther apart than this.
    pub eps: f64,
    pub max_depth: u32,
}

impl CloudOptions {
    pub fn new(p_max: f64, samples: usize) -> Self {
        Self { samples, p_max, window_p: p_max, window_q: 50.0, eps: f64::INFINITY, max_depth: 10 }
    }
}

/// Pulls the ray parameter `p0` (point `(p0, 2)`) back along `signs`.
fn pull_back(p0: f64, signs: &[f64]) -> Option<TracePoint> {
    signs.iter().try_fold(TracePoint::new(p0, 2.0), |pt, &s| inverse_branch(pt, s))
}

fn in_window(pt: &TracePoint, o: &CloudOptions) -> bool {
    pt.p <= o.window_p && pt.q.abs() <= o.window_q
}

/// Sampled points of the order-`xi` preimage set of `(4, 2)`.
///
/// Order 1 is the ray `q = 2` together with the isolated point `(0, −2)`.
/// Higher orders pull every ray sample back along each branch sequence; a
/// segment whose endpoints separate by more than `eps` is bisected in the
/// ray parameter, so every emitted point lies exactly on the set.
pub fn preimage_cloud(xi: u32, opts: &CloudOptions) -> Result<Vec<TracePoint>> {
    if xi < 1 {
        return Err(Error::InvalidParameter("preimage order must be ≥ 1".into()));
    }
    if opts.samples < 2 || !(opts.p_max > 0.0) {
        return Err(Error::InvalidParameter("need ≥ 2 samples on a positive ray".into()));
    }
    let depth = (xi - 1) as usize;
    let params: Vec<f64> = (0..opts.samples).map(|i| opts.p_max * i as f64 / (opts.samples - 1) as f64).collect();
    let branches: Vec<Vec<f64>> = (0..1u64 << depth)
        .map(|bits| (0..depth).map(|k| if bits >> k & 1 == 1 { -1.0 } else { 1.0 }).collect())
        .collect();
    let mut cloud: Vec<TracePoint> =
        branches.par_iter().flat_map_iter(|signs| trace_branch(&params, signs, opts)).collect();
    // The isolated order-1 point (0, −2) and its pullbacks.
    let mut isolated = vec![TracePoint::new(0.0, -2.0)];
    for _ in 0..depth {
        isolated =
            isolated.iter().flat_map(|&pt| [inverse_branch(pt, 1.0), inverse_branch(pt, -1.0)]).flatten().collect();
    }
    cloud.extend(isolated.into_iter().filter(|pt| in_window(pt, opts)));
    Ok(cloud)
}

fn trace_branch(params: &[f64], signs: &[f64], opts: &CloudOptions) -> Vec<TracePoint> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, TracePoint)> = None;
    for &p0 in params {
        let cur = pull_back(p0, signs).filter(|pt| in_window(pt, opts));
        if let (Some((a, pa)), Some(pb)) = (prev, cur) {
            refine(a, pa, p0, pb, signs, opts, 0, &mut out);
        }
        if let Some(pt) = cur {
            out.push(pt);
        }
        prev = cur.map(|pt| (p0, pt));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn refine(
    a: f64,
    pa: TracePoint,
    b: f64,
    pb: TracePoint,
    signs: &[f64],
    opts: &CloudOptions,
    depth: u32,
    out: &mut Vec<TracePoint>,
) {
    if depth >= opts.max_depth || pa.dist_inf(&pb) <= opts.eps {
        return;
    }
    let m = 0.5 * (a + b);
    if let Some(pm) = pull_back(m, signs).filter(|pt| in_window(pt, opts)) {
        refine(a, pa, m, pm, signs, opts, depth + 1, out);
        out.push(pm);
        refine(m, pm, b, pb, signs, opts, depth + 1, out);
    }
}

/// Smallest `ξ ≤ xi_max` with `‖K^ξ(pt) − (4, 2)‖_∞ < tol`.
pub fn is_preimage(pt: TracePoint, xi_max: u32, tol: f64) -> Option<u32> {
    let mut x = pt;
    for xi in 0..=xi_max {
        if x.dist_inf(&TracePoint::FIXED) < tol {
            return Some(xi);
        }
        if x.is_escaped() {
            return None;
        }
        x = k_map(x);
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeBox {
    pub q_bound: f64,
    pub p_bound: f64,
    pub maxiter: u32,
}

impl Default for EscapeBox {
    fn default() -> Self {
        Self { q_bound: 50.0, p_bound: 2500.0, maxiter: 64 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeResult {
    /// `None` = never escaped within `maxiter`.
    pub n_star: Option<u32>,
    pub trajectory: Vec<TracePoint>,
}

fn outside(pt: &TracePoint, b: &EscapeBox) -> bool {
    pt.is_escaped() || pt.q.abs() >= b.q_bound || pt.p.abs() >= b.p_bound
}

/// `𝒦` in the coordinates `e = 2 − q`, `d = p − q − 2`.
///
/// Both update multiplicatively (`e' = e·p`, `d' = e·d`), so their signs —
/// and with them the region an orbit lives in — survive rounding exactly.
/// Iterating `(p, q)` directly lets Region I orbits, which crowd the grey
/// line `d = 0`, drift across it and escape.
#[derive(Clone, Copy, Debug)]
struct SignedCoords {
    e: f64,
    d: f64,
}

impl SignedCoords {
    fn from_point(pt: TracePoint) -> Self {
        Self { e: 2.0 - pt.q, d: grey_line_distance(pt) }
    }

    fn point(&self) -> TracePoint {
        TracePoint::new(4.0 - self.e + self.d, 2.0 - self.e)
    }

    fn step(&self) -> Self {
        let p = 4.0 - self.e + self.d;
        Self { e: self.e * p, d: self.e * self.d }
    }
}

/// First `n` with `𝒦ⁿ(start)` outside the box (iterated in [`SignedCoords`]).
pub fn escape_time(start: TracePoint, b: &EscapeBox, keep_trajectory: bool) -> EscapeResult {
    let mut x = SignedCoords::from_point(start);
    let mut traj = Vec::new();
    for n in 0..=b.maxiter {
        let pt = if n == 0 { start } else { x.point() };
        if keep_trajectory {
            traj.push(pt);
        }
        if outside(&pt, b) {
            return EscapeResult { n_star: Some(n), trajectory: traj };
        }
        x = x.step();
    }
    EscapeResult { n_star: None, trajectory: traj }
}

/// `(p₁, q₁) = ((tr M₁)², tr M₂)` for the `U₀(T₀)`/`U₁(T₁)` drive, `r = 1`.
pub fn initial_condition_from_params(t0_over_l: f64, t1_over_l: f64) -> TracePoint {
    let (s, c) = (PI * t0_over_l).sin_cos();
    let (s2, c2) = (2.0 * PI * t0_over_l).sin_cos();
    let x1 = 2.0 * (c - PI * t1_over_l * s);
    TracePoint::new(x1 * x1, 2.0 * (c2 - 2.0 * PI * t1_over_l * s2))
}

/// `d₁ = p₁ − q₁ − 2`.
pub fn grey_line_distance(pt: TracePoint) -> f64 {
    pt.p - pt.q - 2.0
}

/// All `(T₀/L, T₁/L) ∈ (0,1)²` mapping onto `pt`, sorted by `T₀/L`.
///
/// With `x = ±√p` and `c = cos(πT₀/L)`, the pair of equations reduces to
/// `(x − 2c)² = p − q − 2`; each root fixes `T₁/L = (c − x/2)/(π sin(πT₀/L))`.
pub fn params_candidates(pt: TracePoint) -> Vec<(f64, f64)> {
    let d = grey_line_distance(pt);
    if !(pt.p >= 0.0) || d < 0.0 || pt.is_escaped() {
        return Vec::new();
    }
    let sd = d.sqrt();
    let sp = pt.p.sqrt();
    let mut out = Vec::new();
    for x in [sp, -sp] {
        for sg in [1.0, -1.0] {
            let c = 0.5 * (x + sg * sd);
            if !(c.abs() < 1.0) {
                continue;
            }
            let th0 = c.acos();
            let t1 = (c - 0.5 * x) / th0.sin() / PI;
            let t0 = th0 / PI;
            if t0 > 0.0 && t0 < 1.0 && t1 > 0.0 && t1 < 1.0 {
                out.push((t0, t1));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out.dedup();
    out
}

/// Drive parameters reaching `pt`; the branch with the smallest `T₀/L` wins.
pub fn params_from_trace_point(pt: TracePoint) -> Result<(f64, f64)> {
    params_candidates(pt)
        .first()
        .copied()
        .ok_or_else(|| Error::NoRoot(format!("({}, {}) is not reachable by the U0/U1 drive", pt.p, pt.q)))
}

/// `T₁/L = (2cos(πT₀/L) − K) / (2π sin(πT₀/L))`, which puts `tr M₁ = K`.
pub fn first_preimage_params(t0_over_l: f64, k: f64) -> Result<(f64, f64)> {
    let (s, c) = (PI * t0_over_l).sin_cos();
    if s.abs() < 1e-14 {
        return Err(Error::Domain("sin(πT₀/L) vanishes".into()));
    }
    Ok((t0_over_l, (2.0 * c - k) / (2.0 * PI * s)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatmapCell {
    pub t0_over_l: f64,
    pub t1_over_l: f64,
    pub start: TracePoint,
    pub n_star: Option<u32>,
}

/// Escape times on a grid of drive parameters (`t0s × t1s`, row-major in `t1`).
pub fn heatmap_params(t0s: &[f64], t1s: &[f64], b: &EscapeBox) -> Vec<HeatmapCell> {
    let cells: Vec<(f64, f64)> = t1s.iter().flat_map(|&t1| t0s.iter().map(move |&t0| (t0, t1))).collect();
    cells
        .par_iter()
        .map(|&(t0, t1)| {
            let start = initial_condition_from_params(t0, t1);
            HeatmapCell { t0_over_l: t0, t1_over_l: t1, start, n_star: escape_time(start, b, false).n_star }
        })
        .collect()
}

/// Escape times on a grid of trace points; parameters are recovered where reachable.
pub fn heatmap_trace(qs: &[f64], ps: &[f64], b: &EscapeBox) -> Vec<HeatmapCell> {
    let cells: Vec<TracePoint> = ps.iter().flat_map(|&p| qs.iter().map(move |&q| TracePoint::new(p, q))).collect();
    cells
        .par_iter()
        .map(|&start| {
            let (t0, t1) = params_from_trace_point(start).unwrap_or((f64::NAN, f64::NAN));
            HeatmapCell { t0_over_l: t0, t1_over_l: t1, start, n_star: escape_time(start, b, false).n_star }
        })
        .collect()
}
