//! Overflow-safe products and the entropy / Lyapunov observables.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64 as C64;

use crate::drive::{Ordering, Protocol};
use crate::error::{Error, Result};
use crate::mobius::MobiusMatrix;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// `e^{log_scale} · unit` with `‖unit‖_F = √2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledProduct {
    pub unit: MobiusMatrix,
    pub log_scale: f64,
}

impl ScaledProduct {
    pub const IDENTITY: ScaledProduct = ScaledProduct { unit: MobiusMatrix::IDENTITY, log_scale: 0.0 };

    pub fn from_matrix(m: MobiusMatrix) -> Result<Self> {
        Self { unit: m, log_scale: 0.0 }.renormalized()
    }

    fn renormalized(self) -> Result<Self> {
        let f = self.unit.frobenius();
        if !(f.is_finite() && f > 0.0) || !self.log_scale.is_finite() {
            return Err(Error::Numeric("non-finite or vanishing product".into()));
        }
        let s = f / SQRT2;
        Ok(Self { unit: self.unit.scale_re(1.0 / s), log_scale: self.log_scale + s.ln() })
    }

    /// `self · rhs`, renormalized.
    pub fn mul(&self, rhs: &ScaledProduct) -> Result<Self> {
        Self { unit: self.unit * rhs.unit, log_scale: self.log_scale + rhs.log_scale }.renormalized()
    }

    /// The represented matrix, if it fits in double range.
    pub fn represented(&self) -> Option<MobiusMatrix> {
        let m = self.unit.scale_re(self.log_scale.exp());
        m.is_finite().then_some(m)
    }

    /// `log ‖Π‖_F`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + (self.unit.frobenius() / SQRT2).ln() + 0.5 * LN_2
    }

    /// Trace with the scale reinstated (may be infinite).
    pub fn trace(&self) -> C64 {
        self.unit.trace() * self.log_scale.exp()
    }

    /// `|det(unit)·e^{2 log_scale} − 1|`.
    pub fn det_residual(&self) -> f64 {
        let ld = self.unit.det().ln() + C64::from(2.0 * self.log_scale);
        (ld.exp() - 1.0).norm()
    }
}

/// A product of elementary steps acting on both chiral sectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Block {
    pub holo: ScaledProduct,
    pub anti: ScaledProduct,
    pub steps: u64,
    pub phys_time: f64,
}

impl Block {
    pub fn elementary(holo: MobiusMatrix, anti: MobiusMatrix, duration: f64) -> Result<Self> {
        Ok(Self {
            holo: ScaledProduct::from_matrix(holo)?,
            anti: ScaledProduct::from_matrix(anti)?,
            steps: 1,
            phys_time: duration,
        })
    }

    /// The block obtained by executing `self` and then `next`.
    pub fn then(&self, next: &Block, ordering: Ordering) -> Result<Block> {
        let (l, r) = match ordering {
            Ordering::FirstLeftmost => (self, next),
            Ordering::Reversed => (next, self),
        };
        Ok(Block {
            holo: l.holo.mul(&r.holo)?,
            anti: l.anti.mul(&r.anti)?,
            steps: self.steps + next.steps,
            phys_time: self.phys_time + next.phys_time,
        })
    }
}

/// Running products `Π_j` (chiral) and `Π̃_j` (antichiral).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionState {
    pub chiral: ScaledProduct,
    pub antichiral: ScaledProduct,
    pub steps: u64,
    pub phys_time: f64,
}

impl Default for EvolutionState {
    fn default() -> Self {
        Self { chiral: ScaledProduct::IDENTITY, antichiral: ScaledProduct::IDENTITY, steps: 0, phys_time: 0.0 }
    }
}

impl EvolutionState {
    pub fn from_block(b: &Block) -> Self {
        Self { chiral: b.holo, antichiral: b.anti, steps: b.steps, phys_time: b.phys_time }
    }
}

/// Appends one step (or block) to the running products.
pub fn evolve_product(state: &EvolutionState, step: &Block, ordering: Ordering) -> Result<EvolutionState> {
    let (chiral, antichiral) = match ordering {
        Ordering::FirstLeftmost => (state.chiral.mul(&step.holo)?, state.antichiral.mul(&step.anti)?),
        Ordering::Reversed => (step.holo.mul(&state.chiral)?, step.anti.mul(&state.antichiral)?),
    };
    Ok(EvolutionState {
        chiral,
        antichiral,
        steps: state.steps + step.steps,
        phys_time: state.phys_time + step.phys_time,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EntropyBoundary {
    /// Interval of the periodic system, both endpoints contribute.
    Periodic,
    /// Half of an open chain: one entangling endpoint.
    OpenHalfChain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyConvention {
    pub c: f64,
    pub boundary: EntropyBoundary,
    /// Renyi index; `1` is the von Neumann limit.
    pub renyi_m: f64,
}

impl EntropyConvention {
    pub fn periodic(c: f64) -> Self {
        Self { c, boundary: EntropyBoundary::Periodic, renyi_m: 1.0 }
    }

    pub fn open_half_chain(c: f64) -> Self {
        Self { c, boundary: EntropyBoundary::OpenHalfChain, renyi_m: 1.0 }
    }

    /// `c(1+m)/(12m)`, halved for a single endpoint.
    pub fn prefactor(&self) -> f64 {
        let p = self.c * (1.0 + self.renyi_m) / (12.0 * self.renyi_m);
        match self.boundary {
            EntropyBoundary::Periodic => p,
            EntropyBoundary::OpenHalfChain => p / 2.0,
        }
    }
}

impl Default for EntropyConvention {
    fn default() -> Self {
        Self::periodic(1.0)
    }
}

/// Entropy change with the imaginary part of the log argument kept.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyValue {
    pub real: f64,
    pub imag_residual: f64,
}

/// `log(αγ − αδ − γβ + βδ) = log(α − β) + log(γ − δ)` on the unit matrix.
fn log_factor(u: &MobiusMatrix) -> Result<C64> {
    let x = u.a - u.b;
    let y = u.c - u.d;
    if x.norm() == 0.0 || y.norm() == 0.0 {
        return Err(Error::Singular("αγ−αδ−γβ+βδ vanishes".into()));
    }
    Ok(x.ln() + y.ln())
}

fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

fn delta_with_prefactor(state: &EvolutionState, pref: f64) -> Result<EntropyValue> {
    let lf = log_factor(&state.chiral.unit)? + log_factor(&state.antichiral.unit)?;
    let scale = state.chiral.log_scale + state.antichiral.log_scale;
    Ok(EntropyValue { real: pref * lf.re + 2.0 * pref * scale, imag_residual: wrap_phase(lf.im) })
}

/// Entanglement entropy change `S_A(j) − S_A(0)` of the evolved ground state.
pub fn entanglement_delta(state: &EvolutionState, conv: &EntropyConvention) -> Result<EntropyValue> {
    delta_with_prefactor(state, conv.prefactor())
}

/// Pseudo-entropy change for a possibly non-unitary protocol (von Neumann limit).
pub fn pseudo_entropy_delta(state: &EvolutionState, c: f64) -> Result<EntropyValue> {
    delta_with_prefactor(state, c / 6.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropySample {
    /// Elementary steps (or stroboscopic time `2ⁿ` for TM series).
    pub step: u64,
    /// `Σ T / L`.
    pub phys_time: f64,
    pub ds: f64,
    pub imag_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropySeries {
    pub samples: Vec<EntropySample>,
    pub convention: EntropyConvention,
}

impl EntropySeries {
    pub fn new(convention: EntropyConvention) -> Self {
        Self { samples: Vec::new(), convention }
    }

    pub fn push(&mut self, state: &EvolutionState, v: EntropyValue) {
        self.samples.push(EntropySample {
            step: state.steps,
            phys_time: state.phys_time,
            ds: v.real,
            imag_residual: v.imag_residual,
        });
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.ds.abs()).fold(0.0, f64::max)
    }

    pub fn max_imag_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.imag_residual.abs()).fold(0.0, f64::max)
    }

    /// Least-squares slope of `ds` against step count over the samples from `from` on.
    pub fn slope_from(&self, from: usize) -> f64 {
        let pts: Vec<(f64, f64)> = self.samples[from..].iter().map(|s| (s.step as f64, s.ds)).collect();
        crate::rmd::least_squares(&pts).0
    }
}

/// Evolves `protocol` unit by unit and records ΔS after every unit.
pub fn run_protocol(protocol: &Protocol, conv: &EntropyConvention, stride: u64) -> Result<EntropySeries> {
    let blocks = protocol.unit_blocks()?;
    let mut state = EvolutionState::default();
    let mut series = EntropySeries::new(*conv);
    let stride = stride.max(1);
    for i in 0..protocol.law.units() {
        let b = &blocks[protocol.law.unit(i) as usize];
        state = evolve_product(&state, b, protocol.ordering)?;
        if (i + 1) % stride == 0 {
            series.push(&state, entanglement_delta(&state, conv)?);
        }
    }
    Ok(series)
}

/// `log ‖Π_j‖_F / j` per elementary matrix, over at least `steps` elementary steps.
///
/// Thue-Morse laws are evaluated by block doubling, everything else unit by unit.
pub fn lyapunov_estimate(protocol: &Protocol, steps: u64) -> Result<f64> {
    if let Some(n) = protocol.law.stroboscopic_order() {
        let need = 64 - steps.max(1).saturating_sub(1).leading_zeros();
        let n = n.max(need);
        let b = crate::drive::tm_blocks_scaled(
            &protocol.step0.holo_scaled()?,
            &protocol.step1.holo_scaled()?,
            n,
            protocol.ordering,
        )?;
        return Ok(b.m.log_norm() / (1u64 << n) as f64);
    }
    let blocks = protocol.unit_blocks()?;
    let mut p = ScaledProduct::IDENTITY;
    let mut done = 0u64;
    let mut i = 0u64;
    let units = protocol.law.units();
    while done < steps && i < units {
        let b = &blocks[protocol.law.unit(i) as usize];
        p = match protocol.ordering {
            Ordering::FirstLeftmost => p.mul(&b.holo)?,
            Ordering::Reversed => b.holo.mul(&p)?,
        };
        done += b.steps;
        i += 1;
    }
    if done == 0 {
        return Err(Error::InvalidParameter("protocol has no steps".into()));
    }
    Ok(p.log_norm() / done as f64)
}

/// ΔS at stroboscopic times `2ⁿ`, `n = 0..=n_max`, from block doubling.
pub fn tm_entropy_series(
    m0: &Block,
    n0: &Block,
    n_max: u32,
    conv: &EntropyConvention,
    ordering: Ordering,
) -> Result<EntropySeries> {
    if n_max > crate::drive::TM_BLOCK_CAP {
        return Err(Error::Capacity(format!("n_max {n_max} exceeds {}", crate::drive::TM_BLOCK_CAP)));
    }
    let (mut m, mut n) = (*m0, *n0);
    let mut series = EntropySeries::new(*conv);
    for k in 0..=n_max {
        if k > 0 {
            let next_m = m.then(&n, ordering)?;
            let next_n = n.then(&m, ordering)?;
            m = next_m;
            n = next_n;
        }
        let st = EvolutionState::from_block(&m);
        series.push(&st, entanglement_delta(&st, conv)?);
    }
    Ok(series)
}
