//! Random multipolar driving: lifetimes, scaling fits, averaged blocks and the
//! effective Hamiltonian of the prethermal regime.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::drive::{u0_u1_steps, Protocol, StepSpec};
use crate::entropy::{Block, EntropyConvention, EntropySeries, ScaledProduct};
use crate::error::{Error, Result};
use crate::mobius::{classify_group, expm_traceless, GroupClass, MobiusMatrix};
use crate::registry::Rmd;
use crate::rng;
use crate::tracemap::first_preimage_params;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// `T₀/L = ℓ₁ + K`, `T₁/L = K`.
    FixedPoint { ell1: u32 },
    /// `T₀/L` fixed, `T₁/L` from the first-preimage parametrization.
    Preimage { t0_over_l: f64, xi: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmdParams {
    pub eta: u32,
    pub k: f64,
    pub family: Family,
}

impl RmdParams {
    pub fn fixed_point(eta: u32, k: f64) -> Self {
        Self { eta, k, family: Family::FixedPoint { ell1: 0 } }
    }

    pub fn preimage(eta: u32, k: f64, t0_over_l: f64) -> Self {
        Self { eta, k, family: Family::Preimage { t0_over_l, xi: 1 } }
    }

    pub fn xi(&self) -> u32 {
        match self.family {
            Family::FixedPoint { .. } => 0,
            Family::Preimage { xi, .. } => xi,
        }
    }

    /// `(T₀/L, T₁/L)`.
    pub fn drive_params(&self) -> Result<(f64, f64)> {
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidParameter("K must be positive".into()));
        }
        match self.family {
            Family::FixedPoint { ell1 } => {
                // odd ℓ₁ is a global π phase away from even ℓ₁
                if ell1 % 2 == 1 {
                    return Err(Error::InvalidParameter("odd ℓ₁: use ℓ₁ − 1 (global π phase)".into()));
                }
                Ok((ell1 as f64 + self.k, self.k))
            }
            Family::Preimage { t0_over_l, .. } => first_preimage_params(t0_over_l, self.k),
        }
    }

    /// `U₀(T₀)` and `U₁(T₁)` at unit length.
    pub fn letters(&self) -> Result<(StepSpec, StepSpec)> {
        let (t0, t1) = self.drive_params()?;
        u0_u1_steps(t0, t1)
    }

    pub fn protocol(&self, blocks: u64, seed: u64) -> Result<Protocol> {
        let (s0, s1) = self.letters()?;
        Ok(Protocol::new(s0, s1, Arc::new(Rmd { eta: self.eta, blocks, seed })))
    }

    /// `(M_η, N_η)` as plain matrices.
    pub fn blocks(&self) -> Result<(MobiusMatrix, MobiusMatrix)> {
        let [m, n] = self.protocol(1, 0)?.unit_blocks()?;
        let m = m.holo.represented().ok_or_else(|| Error::Numeric("M_η overflows".into()))?;
        let n = n.holo.represented().ok_or_else(|| Error::Numeric("N_η overflows".into()))?;
        Ok((m, n))
    }
}

/// First sampled time with `ΔS > S*`.
pub fn lifetime(series: &EntropySeries, s_star: f64) -> Option<u64> {
    series.samples.iter().find(|s| s.ds > s_star).map(|s| s.step)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifetimeOptions {
    pub s_star: f64,
    /// Runs still below threshold after this many elementary steps are censored.
    pub max_steps: u64,
    pub convention: EntropyConvention,
}

impl Default for LifetimeOptions {
    fn default() -> Self {
        Self { s_star: 10.0, max_steps: 1 << 34, convention: EntropyConvention::periodic(1.0) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LifetimeStats {
    /// Mean of per-run lifetimes, in elementary steps.
    pub t_star: f64,
    pub dispersion: f64,
    pub stderr: f64,
    pub realizations: usize,
    pub censored: usize,
    pub s_star: f64,
    pub per_run: Vec<f64>,
}

/// `ΔS` from the unit matrices only (real part, no branch bookkeeping).
#[inline]
fn ds_real(p: &ScaledProduct, pref: f64) -> f64 {
    let u = &p.unit;
    pref * (0.5 * ((u.a - u.b).norm_sqr().ln() + (u.c - u.d).norm_sqr().ln()) + 2.0 * p.log_scale)
}

/// Lifetime of one realization, in elementary steps; `(t, censored)`.
pub fn single_lifetime(
    blocks: &[Block; 2],
    seed: u64,
    opts: &LifetimeOptions,
    ordering: crate::drive::Ordering,
) -> (u64, bool) {
    let pref = opts.convention.prefactor();
    let per = blocks[0].steps;
    let mirrored = blocks.iter().all(|b| b.holo == b.anti);
    let max_units = opts.max_steps / per.max(1);
    let (mut h, mut a) = (ScaledProduct::IDENTITY, ScaledProduct::IDENTITY);
    let step = |p: &ScaledProduct, b: &ScaledProduct| match ordering {
        crate::drive::Ordering::FirstLeftmost => p.mul(b),
        crate::drive::Ordering::Reversed => b.mul(p),
    };
    for i in 0..max_units {
        let b = &blocks[rng::coin(seed, i) as usize];
        h = match step(&h, &b.holo) {
            Ok(x) => x,
            Err(_) => return ((i + 1) * per, false),
        };
        let ds = if mirrored {
            2.0 * ds_real(&h, pref)
        } else {
            a = match step(&a, &b.anti) {
                Ok(x) => x,
                Err(_) => return ((i + 1) * per, false),
            };
            ds_real(&h, pref) + ds_real(&a, pref)
        };
        if ds > opts.s_star || !ds.is_finite() {
            return ((i + 1) * per, false);
        }
    }
    (max_units * per, true)
}

/// Mean lifetime over `realizations` runs with seeds `mix(seed, r)`.
pub fn ensemble_lifetime(
    rp: &RmdParams,
    realizations: usize,
    seed: u64,
    opts: &LifetimeOptions,
) -> Result<LifetimeStats> {
    if realizations == 0 {
        return Err(Error::InvalidParameter("need ≥ 1 realization".into()));
    }
    let proto = rp.protocol(1, seed)?;
    let blocks = proto.unit_blocks()?;
    let runs: Vec<(u64, bool)> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| single_lifetime(&blocks, rng::mix(seed, r), opts, proto.ordering))
        .collect();
    let per_run: Vec<f64> = runs.iter().map(|&(t, _)| t as f64).collect();
    let n = per_run.len() as f64;
    let mean = per_run.iter().sum::<f64>() / n;
    let var =
        if per_run.len() > 1 { per_run.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(LifetimeStats {
        t_star: mean,
        dispersion: var.sqrt(),
        stderr: (var / n).sqrt(),
        realizations,
        censored: runs.iter().filter(|r| r.1).count(),
        s_star: opts.s_star,
        per_run,
    })
}

/// Ordinary least squares `y = slope·x + intercept`; returns `(slope, intercept, stderr)`.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = if pts.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, intercept, stderr)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Fit of `log t*` against `log(1/K)`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Domain("scaling fit needs ≥ 3 points".into()));
    }
    if points.iter().any(|&(k, t)| !(k > 0.0 && t > 0.0)) {
        return Err(Error::Domain("scaling fit needs positive K and t*".into()));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(k, t)| ((1.0 / k).ln(), t.ln())).collect();
    let (slope, intercept, stderr) = least_squares(&xy);
    Ok(ScalingFit { slope, intercept, stderr })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragedPair {
    pub mbar: MobiusMatrix,
    pub d: MobiusMatrix,
    /// `M̄ / √det M̄`.
    pub mbar_norm: MobiusMatrix,
    pub theta: f64,
    /// `det(M̄) − 1`, evaluated as `−det(D)` to avoid cancellation.
    pub det_excess: C64,
}

/// `M̄ = (M + N)/2`, `D = (M − N)/2` for unimodular same-order blocks.
pub fn averaged_matrices(m: &MobiusMatrix, n: &MobiusMatrix) -> Result<AveragedPair> {
    let mbar = (*m + *n).scale_re(0.5);
    let d = (*m - *n).scale_re(0.5);
    let det = mbar.det();
    if !(det.re > 0.0) {
        return Err(Error::Numeric(format!("det(M̄) = {det} cannot be normalized")));
    }
    let mbar_norm = mbar.scale(det.sqrt().inv());
    let theta = (mbar_norm.trace().re / 2.0).clamp(-1.0, 1.0).acos();
    Ok(AveragedPair { mbar, d, mbar_norm, theta, det_excess: -d.det() })
}

/// Largest eigenvalue modulus of a 2×2 matrix.
pub fn leading_eigen_modulus(m: &MobiusMatrix) -> f64 {
    let tr = m.trace();
    let s = (tr * tr - m.det() * 4.0).sqrt();
    ((tr + s) / 2.0).norm().max(((tr - s) / 2.0).norm())
}

/// `(cos 2iθ, cos 2(i+1)θ)`, `i = 0..i_max`.
///
/// With `θ_V = arccos(tr V / 2)` the half-traces of `V^i` are `cos(iθ_V)`, so
/// half-trace trajectories are compared against `closed_orbit(θ_V / 2, …)`.
pub fn closed_orbit(theta: f64, i_max: usize) -> Vec<(f64, f64)> {
    (0..i_max).map(|i| ((2.0 * i as f64 * theta).cos(), (2.0 * (i + 1) as f64 * theta).cos())).collect()
}

/// `(x_i, x_{i+1})` with `x_i = tr Π_i` over the running block product (`Π_0 = 1`).
///
/// Pairs become `None` once the trace no longer fits in double range.
pub fn trace_trajectory(rp: &RmdParams, blocks: u64, seed: u64) -> Result<Vec<Option<(f64, f64)>>> {
    if blocks < 2 {
        return Err(Error::InvalidParameter("need ≥ 2 blocks".into()));
    }
    let proto = rp.protocol(blocks, seed)?;
    let units = proto.unit_blocks()?;
    let mut p = ScaledProduct::IDENTITY;
    let mut xs = vec![Some(2.0)];
    for i in 0..blocks {
        let b = &units[proto.law.unit(i) as usize];
        p = p.mul(&b.holo)?;
        let x = p.trace().re;
        xs.push(x.is_finite().then_some(x));
    }
    Ok(xs.windows(2).map(|w| w[0].zip(w[1])).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveParams {
    pub sigma0: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    /// `T/L` per application of `V`.
    pub duration: f64,
}

/// Reads an elliptic (or parabolic, `tr = 2`) SU(1,1) matrix as `exp(π·duration·G)` in the deformation basis.
///
/// The `σ⁺` and `σ⁻` generators are both proportional to `σ_y`, so the `σ_y`
/// weight is reported as `σ⁺` and `σ⁻ = 0`; a `σ_x` weight has no deformation
/// counterpart and is a class error.
pub fn effective_su11_params(v: &MobiusMatrix, duration: f64) -> Result<EffectiveParams> {
    const TOL: f64 = 1e-9;
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter("duration must be positive".into()));
    }
    if classify_group(v, TOL) != GroupClass::SU11 {
        return Err(Error::Class("matrix is not SU(1,1)".into()));
    }
    let half = v.trace().re / 2.0;
    let log_v = if (half - 1.0).abs() <= 1e-12 {
        // parabolic: V − 1 is nilpotent and is its own logarithm
        *v - MobiusMatrix::IDENTITY
    } else if half.abs() < 1.0 {
        let phi = half.acos();
        let s = phi.sin();
        MobiusMatrix::new((v.a - half) / s, v.b / s, v.c / s, (v.d - half) / s).scale_re(phi)
    } else {
        return Err(Error::Class(format!("|tr V| = {} is not elliptic", 2.0 * half.abs())));
    };
    let g = log_v.scale_re(1.0 / (PI * duration));
    // g = i σ⁰ σ_z + y σ_y + x σ_x
    let sigma0 = g.a.im;
    let y = (C64::i() * (g.b - g.c) / 2.0).re;
    let x = ((g.b + g.c) / 2.0).norm();
    let scale = sigma0.abs().max(y.abs()).max(1.0);
    if x > 1e-6 * scale || g.a.re.abs() > 1e-6 * scale {
        return Err(Error::Class("generator leaves the (σ⁰, σ±) plane".into()));
    }
    let back = expm_traceless(&g.scale_re(PI * duration))?;
    if back.max_abs_diff(v) > 1e-9 * v.max_abs().max(1.0) {
        return Err(Error::Numeric("re-exponentiation does not reproduce V".into()));
    }
    Ok(EffectiveParams { sigma0, sigma_plus: y, sigma_minus: 0.0, duration })
}
