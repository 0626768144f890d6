//! Free-fermion lattice oracle for the CFT entropy predictions.
//!
//! Open chain `H = Σ_j f(j)/2 (c†_j c_{j+1} + h.c.)` at half filling. A Slater
//! determinant stays Gaussian under quadratic evolution, so the state is the
//! `L × N` matrix of occupied orbitals and entropies follow from the
//! restricted correlation matrix.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::drive::Protocol;
use crate::entropy::{EntropyConvention, EntropySample, EntropySeries};
use crate::error::{Error, Result};
use crate::mobius::DeformationParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeSpec {
    pub sites: usize,
    pub filling: f64,
}

impl LatticeSpec {
    pub fn new(sites: usize) -> Result<Self> {
        let s = Self { sites, filling: 0.5 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 4 || self.sites % 2 == 1 {
            return Err(Error::InvalidParameter(format!("need an even chain of ≥ 4 sites, got {}", self.sites)));
        }
        if !(self.filling > 0.0 && self.filling <= 1.0) {
            return Err(Error::InvalidParameter("filling must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn particles(&self) -> usize {
        (self.filling * self.sites as f64).round() as usize
    }

    pub fn left_half(&self) -> Range<usize> {
        0..self.sites / 2
    }
}

/// CFT coordinates put the origin at the chain centre, `x = j − L/2`, which
/// flips the sign of the `cos` and `sin` envelopes in site coordinates.
pub fn lattice_frame(dp: &DeformationParams) -> DeformationParams {
    DeformationParams { sigma_plus: -dp.sigma_plus, sigma_minus: -dp.sigma_minus, ..*dp }
}

/// Tridiagonal `h_{j,j+1} = f(j)/2` for bonds `j = 1..L−1` (1-based sites).
pub fn hopping_matrix(spec: &LatticeSpec, dp: &DeformationParams) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if !dp.is_real() {
        return Err(Error::InvalidParameter("lattice deformation must be real".into()));
    }
    let l = spec.sites;
    let mut h = DMatrix::zeros(l, l);
    for j in 1..l {
        let x = 2.0 * PI * dp.r as f64 * j as f64 / l as f64;
        let f = dp.sigma0.re + dp.sigma_plus.re * x.cos() + dp.sigma_minus.re * x.sin();
        h[(j - 1, j)] = 0.5 * f;
        h[(j, j - 1)] = 0.5 * f;
    }
    Ok(h)
}

fn sorted_eigen(h: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !h.iter().all(|x| x.is_finite()) {
        return Err(Error::Numeric("non-finite hopping matrix".into()));
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    // stable: degenerate levels keep eigenvector index order
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(idx.len(), idx.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = DMatrix::from_fn(h.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    Ok((vals, vecs))
}

/// Occupied orbitals as columns, real and imaginary parts stored separately.
#[derive(Clone, Debug, PartialEq)]
pub struct SlaterState {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

/// Hermitian `C_{mn} = ⟨c†_n c_m⟩ = Σ_k φ_k(m) φ_k(n)*`.
///
/// This is the transpose of `⟨c†_m c_n⟩`; the spectrum is the same and the
/// orbital update `φ → uφ` becomes `C → u C u†`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub c: DMatrix<C64>,
}

impl SlaterState {
    pub fn sites(&self) -> usize {
        self.re.nrows()
    }

    pub fn particles(&self) -> usize {
        self.re.ncols()
    }

    pub fn correlation(&self) -> CorrelationMatrix {
        let phi = self.complex();
        CorrelationMatrix { c: &phi * phi.adjoint() }
    }

    pub fn complex(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.sites(), self.particles(), |r, c| C64::new(self.re[(r, c)], self.im[(r, c)]))
    }

    /// Entanglement entropy of `sites` (0-based, half-open).
    pub fn entropy(&self, sites: Range<usize>) -> f64 {
        if sites.is_empty() {
            return 0.0;
        }
        let n = sites.len();
        let ar = self.re.rows(sites.start, n);
        let ai = self.im.rows(sites.start, n);
        let cr = &ar * ar.transpose() + &ai * ai.transpose();
        let ci = &ai * ar.transpose() - &ar * ai.transpose();
        let c = DMatrix::from_fn(n, n, |r, k| C64::new(cr[(r, k)], ci[(r, k)]));
        entropy_of_spectrum(c.symmetric_eigenvalues().iter().copied())
    }
}

const NU_EPS: f64 = 1e-12;

fn entropy_of_spectrum(nu: impl Iterator<Item = f64>) -> f64 {
    nu.map(|x| {
        let x = x.clamp(NU_EPS, 1.0 - NU_EPS);
        -(x * x.ln() + (1.0 - x) * (1.0 - x).ln())
    })
    .sum()
}

/// Fills the lowest `filling·L` levels of `h`.
pub fn ground_state(h: &DMatrix<f64>, filling: f64) -> Result<SlaterState> {
    let (_, vecs) = sorted_eigen(h)?;
    let n = (filling * h.nrows() as f64).round() as usize;
    let re = vecs.columns(0, n).into_owned();
    Ok(SlaterState { im: DMatrix::zeros(re.nrows(), n), re })
}

pub fn ground_state_correlation(h: &DMatrix<f64>, filling: f64) -> Result<CorrelationMatrix> {
    Ok(ground_state(h, filling)?.correlation())
}

/// `u = exp(−i h T)` split into real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagator {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl Propagator {
    pub fn new(h: &DMatrix<f64>, t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::Numeric("non-finite evolution time".into()));
        }
        let (vals, v) = sorted_eigen(h)?;
        let n = vals.len();
        let mut vc = v.clone();
        let mut vs = v.clone();
        for k in 0..n {
            let (s, c) = (vals[k] * t).sin_cos();
            vc.column_mut(k).scale_mut(c);
            vs.column_mut(k).scale_mut(-s);
        }
        let vt = v.transpose();
        Ok(Self { re: &vc * &vt, im: &vs * &vt })
    }

    pub fn complex(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.re.nrows(), self.re.ncols(), |r, c| C64::new(self.re[(r, c)], self.im[(r, c)]))
    }

    pub fn apply(&self, s: &SlaterState) -> SlaterState {
        SlaterState { re: &self.re * &s.re - &self.im * &s.im, im: &self.re * &s.im + &self.im * &s.re }
    }
}

/// `C → u C u†` with `u = exp(−i h T)`.
pub fn evolve_correlation(c: &CorrelationMatrix, h: &DMatrix<f64>, t: f64) -> Result<CorrelationMatrix> {
    let u = Propagator::new(h, t)?.complex();
    Ok(CorrelationMatrix { c: &u * &c.c * u.adjoint() })
}

/// Entropy of the sites `range` (0-based, half-open) from a full correlation matrix.
pub fn subsystem_entropy(c: &CorrelationMatrix, range: Range<usize>) -> f64 {
    if range.is_empty() {
        return 0.0;
    }
    let n = range.len();
    let block = c.c.view((range.start, range.start), (n, n)).into_owned();
    entropy_of_spectrum(block.symmetric_eigenvalues().iter().copied())
}

/// `ΔS(t) = S(t) − S(0)` after every elementary step of `protocol`.
///
/// Each step's deformation is read in CFT coordinates and mapped with
/// [`lattice_frame`]; its duration `T/L` becomes lattice time `T/L · sites`.
/// The initial state is the ground state of the uniform chain.
pub fn run_protocol_lattice(spec: &LatticeSpec, protocol: &Protocol, subsystem: Range<usize>) -> Result<EntropySeries> {
    spec.validate()?;
    if subsystem.end > spec.sites {
        return Err(Error::InvalidParameter("subsystem exceeds the chain".into()));
    }
    let prop = |s: &crate::drive::StepSpec| -> Result<Propagator> {
        let dp = s.deformation.ok_or_else(|| {
            Error::InvalidParameter("lattice runs need steps built from deformation parameters".into())
        })?;
        let h = hopping_matrix(spec, &lattice_frame(&dp))?;
        Propagator::new(&h, s.duration * spec.sites as f64)
    };
    let props = [prop(&protocol.step0)?, prop(&protocol.step1)?];
    let durations = [protocol.step0.duration, protocol.step1.duration];
    let h0 = hopping_matrix(spec, &DeformationParams::uniform())?;
    let mut state = ground_state(&h0, spec.filling)?;
    let s0 = state.entropy(subsystem.clone());
    let mut series = EntropySeries::new(EntropyConvention::open_half_chain(1.0));
    let mut time = 0.0;
    for (i, letter) in protocol.letters().into_iter().enumerate() {
        state = props[letter as usize].apply(&state);
        time += durations[letter as usize];
        series.samples.push(EntropySample {
            step: i as u64 + 1,
            phys_time: time,
            ds: state.entropy(subsystem.clone()) - s0,
            imag_residual: 0.0,
        });
    }
    Ok(series)
}
