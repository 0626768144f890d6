//! Combined SU(2)/SL(2,ℝ) protocol: the non-Hermitian SU(2)-deformed step
//! sandwiched with uniform and hyperbolic steps on an r-fold cover.
//!
//! `M₀ = U₂(λl) U₀(T₀) U₃(T₀)`, `N₀ = U₂(λl) U₀(T₁) U₃(T₁)` with
//! `T₀/l = 1/2 + Δ`, `T₁/l = 1/2 − Δ`; the antiholomorphic blocks use `Ũ₃`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::drive::{tm_blocks_scaled, Ordering, Protocol, StepSpec};
use crate::entropy::{
    evolve_product, pseudo_entropy_delta, EntropyConvention, EntropySeries, EvolutionState, ScaledProduct,
};
use crate::error::{Error, Result};
use crate::mobius::{build_u0, build_u2, build_u3, Chirality, MobiusMatrix};
use crate::registry::Rmd;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedParams {
    pub delta: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// `l = L / r`.
    pub l: f64,
    pub c: f64,
}

impl CombinedParams {
    /// `Γ = π/2`, `l = 1` (`L = 2`, `r = 2`), `c = 1`.
    pub fn new(delta: f64, lambda: f64) -> Self {
        Self { delta, lambda, gamma: PI / 2.0, l: 1.0, c: 1.0 }
    }

    pub fn t0(&self) -> f64 {
        (0.5 + self.delta) * self.l
    }

    pub fn t1(&self) -> f64 {
        (0.5 - self.delta) * self.l
    }

    fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) || !(self.lambda >= 0.0) || !self.delta.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid combined parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedBlocks {
    pub m0: MobiusMatrix,
    pub n0: MobiusMatrix,
    pub m0_anti: MobiusMatrix,
    pub n0_anti: MobiusMatrix,
}

pub fn build_combined_blocks(cp: &CombinedParams) -> Result<CombinedBlocks> {
    cp.validate()?;
    let u2 = build_u2(cp.lambda * cp.l, cp.l)?;
    let one = |t: f64, ch: Chirality| -> Result<MobiusMatrix> {
        Ok(u2 * build_u0(t, cp.l)? * build_u3(t, cp.l, cp.gamma, ch)?)
    };
    Ok(CombinedBlocks {
        m0: one(cp.t0(), Chirality::Holo)?,
        n0: one(cp.t1(), Chirality::Holo)?,
        m0_anti: one(cp.t0(), Chirality::Antiholo)?,
        n0_anti: one(cp.t1(), Chirality::Antiholo)?,
    })
}

impl CombinedBlocks {
    /// Letters `0 → (M₀, M̃₀)`, `1 → (N₀, Ñ₀)`; each counts as one step of duration `T/l`.
    pub fn steps(&self, cp: &CombinedParams) -> Result<(StepSpec, StepSpec)> {
        Ok((
            StepSpec::from_matrices(self.m0, self.m0_anti, cp.t0() / cp.l)?,
            StepSpec::from_matrices(self.n0, self.n0_anti, cp.t1() / cp.l)?,
        ))
    }
}

/// `Re tr(M₀²N₀²) − 2`; positive on the heating side.
pub fn phase_boundary_residual(cp: &CombinedParams) -> Result<f64> {
    let b = build_combined_blocks(cp)?;
    Ok((b.m0 * b.m0 * b.n0 * b.n0).trace().re - 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhaseLabel {
    Heating,
    Nonheating,
    Boundary,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::Heating => "heating",
            PhaseLabel::Nonheating => "nonheating",
            PhaseLabel::Boundary => "boundary",
        }
    }
}

pub const DEFAULT_LYAP_THRESHOLD: f64 = 1e-3;

/// Lyapunov exponent per elementary step of the Thue-Morse drive of the blocks.
pub fn tm_lyapunov(cp: &CombinedParams, steps: u64) -> Result<f64> {
    let b = build_combined_blocks(cp)?;
    let n = 64 - steps.max(2).saturating_sub(1).leading_zeros();
    let pair = tm_blocks_scaled(
        &ScaledProduct::from_matrix(b.m0)?,
        &ScaledProduct::from_matrix(b.n0)?,
        n,
        Ordering::FirstLeftmost,
    )?;
    Ok(pair.m.log_norm() / (1u64 << n) as f64)
}

/// Heating if `λ_L > threshold`, non-heating if `λ_L < threshold/10`.
pub fn phase_classify(cp: &CombinedParams, steps: u64, threshold: f64) -> Result<(PhaseLabel, f64)> {
    if steps < 1000 {
        return Err(Error::InvalidParameter("phase classification needs ≥ 10³ steps".into()));
    }
    let lyap = tm_lyapunov(cp, steps)?;
    let label = if lyap > threshold {
        PhaseLabel::Heating
    } else if lyap < threshold / 10.0 {
        PhaseLabel::Nonheating
    } else {
        PhaseLabel::Boundary
    };
    Ok((label, lyap))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseCell {
    pub delta: f64,
    pub lambda: f64,
    pub label: PhaseLabel,
    pub lyapunov: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDiagram {
    /// Row-major: all `λ` for the first `Δ`, then the next `Δ`.
    pub cells: Vec<PhaseCell>,
    /// `(Δ, λ_c)` zero crossings of the residual, per column.
    pub boundary: Vec<(f64, f64)>,
}

/// Residual values within this of zero count as the non-heating side.
pub const RESIDUAL_TOL: f64 = 1e-12;

/// Grid classification plus the analytic boundary traced along each `Δ` column.
pub fn phase_diagram(
    deltas: &[f64],
    lambdas: &[f64],
    template: &CombinedParams,
    steps: u64,
    threshold: f64,
) -> Result<PhaseDiagram> {
    if deltas.is_empty() || lambdas.is_empty() {
        return Err(Error::InvalidParameter("empty phase grid".into()));
    }
    let grid: Vec<(f64, f64)> = deltas.iter().flat_map(|&d| lambdas.iter().map(move |&l| (d, l))).collect();
    let cells = grid
        .par_iter()
        .map(|&(delta, lambda)| {
            let cp = CombinedParams { delta, lambda, ..*template };
            let (label, lyapunov) = phase_classify(&cp, steps, threshold)?;
            Ok(PhaseCell { delta, lambda, label, lyapunov, residual: phase_boundary_residual(&cp)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut boundary = Vec::new();
    for (col, &delta) in deltas.iter().enumerate() {
        let row = &cells[col * lambdas.len()..(col + 1) * lambdas.len()];
        for w in row.windows(2) {
            let (a, b) = (w[0].residual > RESIDUAL_TOL, w[1].residual > RESIDUAL_TOL);
            if a != b {
                boundary.push((delta, bisect_boundary(delta, w[0].lambda, w[1].lambda, template, 1e-6)?));
            }
        }
    }
    Ok(PhaseDiagram { cells, boundary })
}

/// Bisection in `λ` for the sign change of the residual.
pub fn bisect_boundary(delta: f64, mut lo: f64, mut hi: f64, template: &CombinedParams, tol: f64) -> Result<f64> {
    let side = |l: f64| -> Result<bool> {
        Ok(phase_boundary_residual(&CombinedParams { delta, lambda: l, ..*template })? > RESIDUAL_TOL)
    };
    let s_lo = side(lo)?;
    if s_lo == side(hi)? {
        return Err(Error::NoRoot("no residual sign change in bracket".into()));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if side(mid)? == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// How the trace conditions are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum TraceRule {
    /// `Re tr ∈ [−2, 2]` (after checking the imaginary part is negligible).
    #[default]
    RealPart,
    /// `|tr| ≤ 2`.
    Modulus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NotReducibleReason {
    Conjugation(f64),
    Triangular,
    ComplexTrace(f64),
    TraceM1(f64),
    TraceM1N1(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reducibility {
    Reducible {
        /// Eigenvectors of `M₁`, `det P = 1`.
        p: MobiusMatrix,
        w: MobiusMatrix,
        /// `S = P W⁻¹`; `S⁻¹ M₁ S` and `S⁻¹ N₁ S` are SU(2).
        similarity: MobiusMatrix,
        m1: MobiusMatrix,
        n1: MobiusMatrix,
        /// `tr(M₁N₁) − 2 − 4 v² (b*d + bd*)(a*c + ac*)`, `v = Im` eigenvalue of `M₁`.
        identity_residual: f64,
        /// Same without the `v²` factor.
        unweighted_identity_residual: f64,
        /// Condition 3 held while condition 2 failed (recorded, not assumed away).
        condition2_violated: bool,
    },
    NotReducible(NotReducibleReason),
}

impl Reducibility {
    pub fn is_reducible(&self) -> bool {
        matches!(self, Reducibility::Reducible { .. })
    }
}

fn eigvec(m: &MobiusMatrix, lam: C64) -> C64x2 {
    let v1 = (m.b, lam - m.a);
    let v2 = (lam - m.d, m.c);
    let n1 = v1.0.norm_sqr() + v1.1.norm_sqr();
    let n2 = v2.0.norm_sqr() + v2.1.norm_sqr();
    let (x, y, n) = if n1 >= n2 { (v1.0, v1.1, n1) } else { (v2.0, v2.1, n2) };
    let n = n.sqrt();
    (x / n, y / n)
}

type C64x2 = (C64, C64);

fn is_su2(m: &MobiusMatrix, tol: f64) -> bool {
    let u = *m * m.adjoint();
    u.max_abs_diff(&MobiusMatrix::IDENTITY) <= tol && (m.det() - 1.0).norm() <= tol
}

/// Constructive test for a simultaneous similarity into SU(2).
pub fn su2_reducibility_test(m1: &MobiusMatrix, n1: &MobiusMatrix, tol: f64, rule: TraceRule) -> Result<Reducibility> {
    let tr = m1.trace();
    let disc = (tr * tr - m1.det() * 4.0).sqrt();
    let scale = m1.max_abs().max(1.0);
    if disc.norm() <= tol.sqrt() * scale {
        return Err(Error::Degenerate("M₁ has a repeated eigenvalue".into()));
    }
    let conj = m1.max_abs_diff(&(MobiusMatrix::SIGMA_Z * n1.conj() * MobiusMatrix::SIGMA_Z));
    if conj > tol * scale {
        return Ok(Reducibility::NotReducible(NotReducibleReason::Conjugation(conj)));
    }
    if m1.b.norm() <= tol * scale || m1.c.norm() <= tol * scale {
        return Ok(Reducibility::NotReducible(NotReducibleReason::Triangular));
    }
    let tr_mn = (*m1 * *n1).trace();
    let im = tr.im.abs().max(tr_mn.im.abs());
    if rule == TraceRule::RealPart && im > 1e-8 * scale {
        return Ok(Reducibility::NotReducible(NotReducibleReason::ComplexTrace(im)));
    }
    let (t1, t2) = match rule {
        TraceRule::RealPart => (tr.re.abs(), tr_mn.re),
        TraceRule::Modulus => (tr.norm(), tr_mn.norm()),
    };
    let cond2 = t1 <= 2.0 + tol;
    let cond3 = t2 <= 2.0 + tol;
    if !cond3 {
        return Ok(Reducibility::NotReducible(NotReducibleReason::TraceM1N1(t2)));
    }
    if !cond2 {
        return Ok(Reducibility::NotReducible(NotReducibleReason::TraceM1(t1)));
    }
    let lam1 = (tr + disc) / 2.0;
    let lam2 = (tr - disc) / 2.0;
    let (e1, e2) = (eigvec(m1, lam1), eigvec(m1, lam2));
    let mut p = MobiusMatrix::new(e1.0, e2.0, e1.1, e2.1);
    let det = p.det();
    if det.norm() <= tol {
        return Err(Error::Degenerate("eigenvectors of M₁ are parallel".into()));
    }
    p = p.scale(det.sqrt().inv());
    let (a, b, c, d) = (p.a, p.b, p.c, p.d);
    let x = b.conj() * d + b * d.conj();
    let y = a.conj() * c + a * c.conj();
    let w = if x.norm() <= tol || y.norm() <= tol {
        MobiusMatrix::IDENTITY
    } else {
        MobiusMatrix::new(1.0.into(), 0.0.into(), 0.0.into(), (x / y).sqrt())
    };
    let similarity = p * w.inverse()?;
    let s_inv = similarity.inverse()?;
    let m1t = s_inv * *m1 * similarity;
    let n1t = s_inv * *n1 * similarity;
    let v = lam1.im;
    let xy = (x * y).re;
    Ok(Reducibility::Reducible {
        p,
        w,
        similarity,
        m1: m1t,
        n1: n1t,
        identity_residual: tr_mn.re - 2.0 - 4.0 * v * v * xy,
        unweighted_identity_residual: tr_mn.re - 2.0 - 4.0 * xy,
        condition2_violated: !cond2,
    })
}

/// Whether both transformed matrices are SU(2) within `tol`.
pub fn transformed_are_su2(r: &Reducibility, tol: f64) -> bool {
    match r {
        Reducibility::Reducible { m1, n1, .. } => is_su2(m1, tol) && is_su2(n1, tol),
        Reducibility::NotReducible(_) => false,
    }
}

/// Pseudo-entropy under η-RMD of the combined blocks, sampled after every block.
pub fn rmd_nonhermitian_run(cp: &CombinedParams, eta: u32, blocks: u64, seed: u64) -> Result<EntropySeries> {
    let cb = build_combined_blocks(cp)?;
    let (s0, s1) = cb.steps(cp)?;
    let proto = Protocol::new(s0, s1, Arc::new(Rmd { eta, blocks, seed }));
    let units = proto.unit_blocks()?;
    let mut state = EvolutionState::default();
    let mut series = EntropySeries::new(EntropyConvention::periodic(cp.c));
    for i in 0..blocks {
        state = evolve_product(&state, &units[proto.law.unit(i) as usize], proto.ordering)?;
        series.push(&state, pseudo_entropy_delta(&state, cp.c)?);
    }
    Ok(series)
}
