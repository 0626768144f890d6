//! 2×2 complex Möbius matrices for single-step evolution of deformed CFTs.
//!
//! Every step `e^{-iHT}` of a Hamiltonian built from `L_0, L_{±1}` (and their
//! r-fold versions) acts on the light-cone coordinate as a Möbius map, so the
//! whole evolution is a product of unimodular 2×2 matrices.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Row-major `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobiusMatrix {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl MobiusMatrix {
    pub const IDENTITY: MobiusMatrix = MobiusMatrix { a: ONE, b: ZERO, c: ZERO, d: ONE };
    pub const SIGMA_Z: MobiusMatrix = MobiusMatrix { a: ONE, b: ZERO, c: ZERO, d: C64 { re: -1.0, im: 0.0 } };

    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self { a, b, c, d }
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    pub fn frobenius(&self) -> f64 {
        (self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()).sqrt()
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::new(self.a * k, self.b * k, self.c * k, self.d * k)
    }

    pub fn scale_re(&self, k: f64) -> Self {
        Self::new(self.a * k, self.b * k, self.c * k, self.d * k)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.a.conj(), self.b.conj(), self.c.conj(), self.d.conj())
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.a.conj(), self.c.conj(), self.b.conj(), self.d.conj())
    }

    /// Inverse of a general invertible matrix.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det.norm() == 0.0 || !det.is_finite() {
            return Err(Error::Singular("matrix is not invertible".into()));
        }
        Ok(Self::new(self.d, -self.b, -self.c, self.a).scale(det.inv()))
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let e = *self - *other;
        e.a.norm().max(e.b.norm()).max(e.c.norm()).max(e.d.norm())
    }

    pub fn max_abs(&self) -> f64 {
        self.a.norm().max(self.b.norm()).max(self.c.norm()).max(self.d.norm())
    }

    /// Checks the unimodularity invariant `|det − 1| ≤ tol·max(1, |entries|²)`.
    pub fn ensure_unimodular(&self, tol: f64) -> Result<Self> {
        if !self.is_finite() {
            return Err(Error::Numeric("non-finite matrix entry".into()));
        }
        let size = self.max_abs().max(1.0);
        let r = (self.det() - ONE).norm();
        if r > tol * size * size {
            return Err(Error::Numeric(format!("determinant deviates from 1 by {r:e}")));
        }
        Ok(*self)
    }

    /// `σ_z X σ_z`: flips the sign of the off-diagonal entries.
    pub fn sigma_z_conjugate(&self) -> Self {
        Self::new(self.a, -self.b, -self.c, self.d)
    }
}

impl Mul for MobiusMatrix {
    type Output = MobiusMatrix;
    fn mul(self, r: MobiusMatrix) -> MobiusMatrix {
        MobiusMatrix::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

impl Add for MobiusMatrix {
    type Output = MobiusMatrix;
    fn add(self, r: MobiusMatrix) -> MobiusMatrix {
        MobiusMatrix::new(self.a + r.a, self.b + r.b, self.c + r.c, self.d + r.d)
    }
}

impl Sub for MobiusMatrix {
    type Output = MobiusMatrix;
    fn sub(self, r: MobiusMatrix) -> MobiusMatrix {
        MobiusMatrix::new(self.a - r.a, self.b - r.b, self.c - r.c, self.d - r.d)
    }
}

impl Neg for MobiusMatrix {
    type Output = MobiusMatrix;
    fn neg(self) -> MobiusMatrix {
        MobiusMatrix::new(-self.a, -self.b, -self.c, -self.d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
}

/// Coefficients of `f_r(x) = σ⁰ + σ⁺ cos(2πrx/L) + σ⁻ sin(2πrx/L)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeformationParams {
    pub sigma0: C64,
    pub sigma_plus: C64,
    pub sigma_minus: C64,
    pub r: u32,
    pub length: f64,
    pub boundary: Boundary,
}

impl DeformationParams {
    pub fn new(sigma0: C64, sigma_plus: C64, sigma_minus: C64, r: u32, length: f64) -> Result<Self> {
        let p = Self { sigma0, sigma_plus, sigma_minus, r, length, boundary: Boundary::Periodic };
        p.validate()?;
        Ok(p)
    }

    pub fn real(sigma0: f64, sigma_plus: f64, sigma_minus: f64) -> Self {
        Self {
            sigma0: sigma0.into(),
            sigma_plus: sigma_plus.into(),
            sigma_minus: sigma_minus.into(),
            r: 1,
            length: 1.0,
            boundary: Boundary::Periodic,
        }
    }

    pub fn uniform() -> Self {
        Self::real(1.0, 0.0, 0.0)
    }

    /// The SU(2) deformation `σ⁰ = cos Γ, σ⁺ = i sin Γ`.
    pub fn su2(gamma: f64) -> Self {
        let mut p = Self::real(gamma.cos(), 0.0, 0.0);
        p.sigma_plus = C64::new(0.0, gamma.sin());
        p
    }

    pub fn with_cover(mut self, r: u32, length: f64) -> Self {
        self.r = r;
        self.length = length;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::InvalidParameter("winding r must be ≥ 1".into()));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::InvalidParameter("length must be positive".into()));
        }
        if !(self.sigma0.is_finite() && self.sigma_plus.is_finite() && self.sigma_minus.is_finite()) {
            return Err(Error::InvalidParameter("non-finite deformation coefficient".into()));
        }
        Ok(())
    }

    /// `l = L / r`.
    pub fn cover_length(&self) -> f64 {
        self.length / self.r as f64
    }

    pub fn is_real(&self) -> bool {
        self.sigma0.im == 0.0 && self.sigma_plus.im == 0.0 && self.sigma_minus.im == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Chirality {
    Holo,
    Antiholo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupClass {
    SU11,
    SU2,
    SL2R,
    SL2C,
}

fn phase(t: f64, len: f64) -> Result<f64> {
    if !t.is_finite() || !len.is_finite() || len <= 0.0 {
        return Err(Error::InvalidParameter(format!("need finite T and positive length, got T={t}, l={len}")));
    }
    Ok(PI * t / len)
}

/// Uniform evolution `diag(e^{iπT/L}, e^{−iπT/L})`.
pub fn build_u0(t: f64, len: f64) -> Result<MobiusMatrix> {
    let th = phase(t, len)?;
    Ok(MobiusMatrix::new(C64::from_polar(1.0, th), ZERO, ZERO, C64::from_polar(1.0, -th)))
}

/// SSD evolution (σ⁰ = σ⁺ = 1): parabolic, additive in `T`.
pub fn build_u1(t: f64, l: f64) -> Result<MobiusMatrix> {
    let th = phase(t, l)?;
    Ok(MobiusMatrix::new(C64::new(1.0, th), C64::new(0.0, -th), C64::new(0.0, th), C64::new(1.0, -th)))
}

/// Hyperbolic evolution (σ⁻ = 1).
pub fn build_u2(t: f64, l: f64) -> Result<MobiusMatrix> {
    let th = phase(t, l)?;
    let (ch, sh) = (th.cosh(), th.sinh());
    Ok(MobiusMatrix::new(ch.into(), C64::new(0.0, sh), C64::new(0.0, -sh), ch.into()))
}

/// SU(2) evolution for `σ⁰ = cos Γ, σ⁺ = i sin Γ`.
pub fn build_u3(t: f64, l: f64, gamma: f64, chirality: Chirality) -> Result<MobiusMatrix> {
    let th = phase(t, l)?;
    if !gamma.is_finite() {
        return Err(Error::InvalidParameter("non-finite Γ".into()));
    }
    let (s, c) = th.sin_cos();
    let off = s * gamma.sin();
    let sign = match chirality {
        Chirality::Holo => 1.0,
        Chirality::Antiholo => -1.0,
    };
    Ok(MobiusMatrix::new(
        C64::new(c, gamma.cos() * s),
        (-sign * off).into(),
        (sign * off).into(),
        C64::new(c, -gamma.cos() * s),
    ))
}

/// Traceless generator `G` with `U(T) = exp(πT/l · G)`.
///
/// Basis: `σ⁰ ↦ iσ_z`, `σ⁺ ↦ σ_y`, `σ⁻ ↦ −σ_y`. The holomorphic sector takes
/// the complex-conjugated coefficients, the antiholomorphic one the bare
/// coefficients; for real deformations both coincide.
pub fn generator(p: &DeformationParams, chirality: Chirality) -> MobiusMatrix {
    let (s0, sp, sm) = match chirality {
        Chirality::Holo => (p.sigma0.conj(), p.sigma_plus.conj(), p.sigma_minus.conj()),
        Chirality::Antiholo => (p.sigma0, p.sigma_plus, p.sigma_minus),
    };
    let y = sp - sm;
    // iσ_z s0 + σ_y y, σ_y = [[0, −i], [i, 0]]
    MobiusMatrix::new(I * s0, -I * y, I * y, -I * s0)
}

/// `exp(G)` for traceless `G`, using `G² = −det(G)·1`.
pub fn expm_traceless(g: &MobiusMatrix) -> Result<MobiusMatrix> {
    let z = (-g.det()).sqrt();
    let ch = z.cosh();
    let shc = if z.norm() < 1e-4 {
        let z2 = z * z;
        ONE + z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sinh() / z
    };
    let m = MobiusMatrix::new(ch + shc * g.a, shc * g.b, shc * g.c, ch + shc * g.d);
    if !m.is_finite() {
        return Err(Error::Numeric("generator exponential overflowed".into()));
    }
    Ok(m)
}

/// Evolution for a time `T` under the deformed Hamiltonian `p`.
///
/// All phases use the r-fold length `l = L/r`.
pub fn build_from_deformation(p: &DeformationParams, t: f64, chirality: Chirality) -> Result<MobiusMatrix> {
    p.validate()?;
    let th = phase(t, p.cover_length())?;
    expm_traceless(&generator(p, chirality).scale_re(th))
}

/// Decides the group structure from the conjugation pattern of the entries.
pub fn classify_group(m: &MobiusMatrix, tol: f64) -> GroupClass {
    let diag = (m.d - m.a.conj()).norm() <= tol;
    if diag && (m.c - m.b.conj()).norm() <= tol {
        GroupClass::SU11
    } else if diag && (m.c + m.b.conj()).norm() <= tol {
        GroupClass::SU2
    } else if [m.a, m.b, m.c, m.d].iter().all(|z| z.im.abs() <= tol) {
        GroupClass::SL2R
    } else {
        GroupClass::SL2C
    }
}

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MobiusPoint {
    Finite(C64),
    Infinity,
}

/// `z ↦ (az + b)/(cz + d)`.
pub fn mobius_apply(m: &MobiusMatrix, z: C64) -> MobiusPoint {
    let den = m.c * z + m.d;
    if den.norm() == 0.0 {
        MobiusPoint::Infinity
    } else {
        MobiusPoint::Finite((m.a * z + m.b) / den)
    }
}
