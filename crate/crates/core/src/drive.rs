//! Driving sequences: Thue-Morse letters and blocks, η-RMD words, and the
//! binding of letters to Hamiltonian steps.

use std::sync::Arc;

use crate::entropy::{Block, ScaledProduct};
use crate::error::{Error, Result};
use crate::mobius::{build_from_deformation, build_u0, build_u1, Chirality, DeformationParams, MobiusMatrix};
use crate::registry::DriveLaw;
use crate::rng;

pub const TM_LETTER_CAP: u32 = 30;
pub const TM_BLOCK_CAP: u32 = 60;

/// Where the next step enters the running product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Ordering {
    /// `Π_j = G_1 G_2 ⋯ G_j`: first step leftmost.
    #[default]
    FirstLeftmost,
    /// `Π_j = G_j ⋯ G_1`.
    Reversed,
}

impl std::str::FromStr for Ordering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "first-leftmost" => Ok(Ordering::FirstLeftmost),
            "reversed" => Ok(Ordering::Reversed),
            o => Err(Error::Config(format!("unknown ordering '{o}' (first-leftmost|reversed)"))),
        }
    }
}

/// Letter `i` of the Thue-Morse word: parity of the binary digit sum.
#[inline]
pub fn thue_morse_letter(i: u64) -> bool {
    i.count_ones() & 1 == 1
}

/// The first `2ⁿ` letters (`0 → 01, 1 → 10`).
pub fn thue_morse_letters(n: u32) -> Result<Vec<bool>> {
    if n > TM_LETTER_CAP {
        return Err(Error::Capacity(format!("Thue-Morse order {n} exceeds {TM_LETTER_CAP}")));
    }
    Ok((0..1u64 << n).map(thue_morse_letter).collect())
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// `M_n`, `N_n` of the Thue-Morse recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockPair {
    pub m: ScaledProduct,
    pub n: ScaledProduct,
    pub order: u32,
}

/// `M_n = M_{n−1} N_{n−1}`, `N_n = N_{n−1} M_{n−1}` by `n` doublings.
pub fn tm_blocks(m0: &MobiusMatrix, n0: &MobiusMatrix, n: u32) -> Result<BlockPair> {
    tm_blocks_scaled(&ScaledProduct::from_matrix(*m0)?, &ScaledProduct::from_matrix(*n0)?, n, Ordering::FirstLeftmost)
}

pub fn tm_blocks_scaled(m0: &ScaledProduct, n0: &ScaledProduct, n: u32, ordering: Ordering) -> Result<BlockPair> {
    if n > TM_BLOCK_CAP {
        return Err(Error::Capacity(format!("block order {n} exceeds {TM_BLOCK_CAP}")));
    }
    let (mut m, mut nn) = (*m0, *n0);
    for _ in 0..n {
        let (a, b) = match ordering {
            Ordering::FirstLeftmost => (m.mul(&nn)?, nn.mul(&m)?),
            Ordering::Reversed => (nn.mul(&m)?, m.mul(&nn)?),
        };
        m = a;
        nn = b;
    }
    Ok(BlockPair { m, n: nn, order: n })
}

/// Block choices of an η-RMD word: `false` selects `M_η`, `true` selects `N_η`.
pub fn rmd_sequence(eta: u32, blocks: u64, seed: u64) -> Result<Vec<bool>> {
    if eta > TM_BLOCK_CAP {
        return Err(Error::Capacity(format!("multipolar order {eta} exceeds {TM_BLOCK_CAP}")));
    }
    Ok((0..blocks).map(|i| rng::coin(seed, i)).collect())
}

/// Expands block choices into elementary letters (`M_η` is the first `2^η` TM letters).
pub fn expand_blocks(choices: &[bool], eta: u32) -> Vec<bool> {
    let len = 1u64 << eta;
    choices.iter().flat_map(|&c| (0..len).map(move |i| thue_morse_letter(i) ^ c)).collect()
}

/// One Hamiltonian step of a protocol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSpec {
    pub holo: MobiusMatrix,
    pub anti: MobiusMatrix,
    /// `T / L`.
    pub duration: f64,
    /// Kept so that the lattice oracle can rebuild the Hamiltonian.
    pub deformation: Option<DeformationParams>,
}

impl StepSpec {
    /// Step of absolute duration `t` under `p` (length `p.length`).
    pub fn from_deformation(p: &DeformationParams, t: f64) -> Result<Self> {
        let holo = build_from_deformation(p, t, Chirality::Holo)?;
        let anti = build_from_deformation(p, t, Chirality::Antiholo)?;
        Ok(Self { holo, anti, duration: t / p.length, deformation: Some(*p) })
    }

    pub fn from_matrices(holo: MobiusMatrix, anti: MobiusMatrix, duration: f64) -> Result<Self> {
        holo.ensure_unimodular(1e-10)?;
        anti.ensure_unimodular(1e-10)?;
        if !duration.is_finite() {
            return Err(Error::InvalidParameter("non-finite duration".into()));
        }
        Ok(Self { holo, anti, duration, deformation: None })
    }

    /// Same matrix in both sectors (real deformations).
    pub fn symmetric(m: MobiusMatrix, duration: f64) -> Result<Self> {
        Self::from_matrices(m, m, duration)
    }

    pub fn block(&self) -> Result<Block> {
        Block::elementary(self.holo, self.anti, self.duration)
    }

    pub fn holo_scaled(&self) -> Result<ScaledProduct> {
        ScaledProduct::from_matrix(self.holo)
    }
}

/// The letters `0 → U₀(T₀)`, `1 → U₁(T₁)` at unit length (`r = 1`).
///
/// The closed forms are used for the matrices; the deformations ride along
/// for the lattice oracle.
pub fn u0_u1_steps(t0_over_l: f64, t1_over_l: f64) -> Result<(StepSpec, StepSpec)> {
    let m0 = build_u0(t0_over_l, 1.0)?;
    let m1 = build_u1(t1_over_l, 1.0)?;
    let s0 = StepSpec { deformation: Some(DeformationParams::uniform()), ..StepSpec::symmetric(m0, t0_over_l)? };
    let s1 =
        StepSpec { deformation: Some(DeformationParams::real(1.0, 1.0, 0.0)), ..StepSpec::symmetric(m1, t1_over_l)? };
    Ok((s0, s1))
}

/// Two steps bound to a sequence law.
#[derive(Clone, Debug)]
pub struct Protocol {
    pub step0: StepSpec,
    pub step1: StepSpec,
    pub law: Arc<dyn DriveLaw>,
    pub ordering: Ordering,
}

impl Protocol {
    pub fn new(step0: StepSpec, step1: StepSpec, law: Arc<dyn DriveLaw>) -> Self {
        Self { step0, step1, law, ordering: Ordering::FirstLeftmost }
    }

    /// The two units the law chooses between: `[M_η, N_η]` with `η = law.block_order()`.
    pub fn unit_blocks(&self) -> Result<[Block; 2]> {
        let (mut m, mut n) = (self.step0.block()?, self.step1.block()?);
        for _ in 0..self.law.block_order() {
            let a = m.then(&n, self.ordering)?;
            let b = n.then(&m, self.ordering)?;
            m = a;
            n = b;
        }
        Ok([m, n])
    }

    /// Elementary letters in time order (`units · 2^η` of them).
    pub fn letters(&self) -> Vec<bool> {
        let choices: Vec<bool> = (0..self.law.units()).map(|i| self.law.unit(i)).collect();
        expand_blocks(&choices, self.law.block_order())
    }

    pub fn elementary_steps(&self) -> u64 {
        self.law.units() << self.law.block_order()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letters_examples() {
        assert_eq!(bits_to_string(&thue_morse_letters(0).unwrap()), "0");
        assert_eq!(bits_to_string(&thue_morse_letters(3).unwrap()), "01101001");
        assert_eq!(thue_morse_letters(5).unwrap().iter().filter(|&&b| b).count(), 16);
        assert!(thue_morse_letters(31).is_err());
    }

    #[test]
    fn first_doubling() {
        let m0 = build_u0(0.3, 1.0).unwrap();
        let n0 = build_u1(0.2, 1.0).unwrap();
        let b = tm_blocks(&m0, &n0, 1).unwrap();
        assert!(b.m.represented().unwrap().max_abs_diff(&(m0 * n0)) < 1e-14);
        assert!(b.n.represented().unwrap().max_abs_diff(&(n0 * m0)) < 1e-14);
    }

    #[test]
    fn identity_blocks() {
        let b = tm_blocks(&MobiusMatrix::IDENTITY, &MobiusMatrix::IDENTITY, 40).unwrap();
        assert_eq!(b.m.unit, MobiusMatrix::IDENTITY);
        assert_eq!(b.m.log_scale, 0.0);
    }

    #[test]
    fn rmd_is_deterministic_and_fair() {
        assert_eq!(rmd_sequence(2, 1000, 9).unwrap(), rmd_sequence(2, 1000, 9).unwrap());
        let s = rmd_sequence(0, 100_000, 42).unwrap();
        let zeros = s.iter().filter(|&&b| !b).count() as f64 / 1e5;
        assert!((0.49..=0.51).contains(&zeros));
    }

    #[test]
    fn expansion_uses_tm_blocks() {
        assert_eq!(bits_to_string(&expand_blocks(&[false, true], 2)), "01101001");
    }
}
