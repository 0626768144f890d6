//! Drive laws as interchangeable strategies, registered by name.
//!
//! A law decides which of two units is applied at each position. Units are
//! elementary letters (`block_order() == 0`) or order-η Thue-Morse blocks.
//! Specs are written `name:arg` or `name:key=value,key=value`, e.g. `tm:12`,
//! `rmd:eta=2,blocks=100000,seed=42`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::drive::{thue_morse_letter, TM_BLOCK_CAP};
use crate::error::{Error, Result};
use crate::rng;

pub trait DriveLaw: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    /// Canonical spec string; parses back to an equal law.
    fn spec(&self) -> String;
    /// Units are products of `2^block_order` elementary letters.
    fn block_order(&self) -> u32;
    fn units(&self) -> u64;
    /// `false` → letter/block 0, `true` → letter/block 1. Random access.
    fn unit(&self, index: u64) -> bool;
    /// Order `n` when the word is exactly `M_n` (enables block doubling).
    fn stroboscopic_order(&self) -> Option<u32> {
        None
    }
    /// The same law on an independent stream (deterministic laws ignore it).
    fn reseeded(&self, seed: u64) -> Arc<dyn DriveLaw>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ThueMorse {
    pub order: u32,
}

impl DriveLaw for ThueMorse {
    fn name(&self) -> &'static str {
        "tm"
    }
    fn spec(&self) -> String {
        format!("tm:{}", self.order)
    }
    fn block_order(&self) -> u32 {
        0
    }
    fn units(&self) -> u64 {
        1u64 << self.order
    }
    fn unit(&self, index: u64) -> bool {
        thue_morse_letter(index)
    }
    fn stroboscopic_order(&self) -> Option<u32> {
        Some(self.order)
    }
    fn reseeded(&self, _: u64) -> Arc<dyn DriveLaw> {
        Arc::new(*self)
    }
}

/// i.i.d. fair choice between `M_η` and `N_η`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rmd {
    pub eta: u32,
    pub blocks: u64,
    pub seed: u64,
}

impl DriveLaw for Rmd {
    fn name(&self) -> &'static str {
        "rmd"
    }
    fn spec(&self) -> String {
        format!("rmd:eta={},blocks={},seed={}", self.eta, self.blocks, self.seed)
    }
    fn block_order(&self) -> u32 {
        self.eta
    }
    fn units(&self) -> u64 {
        self.blocks
    }
    fn unit(&self, index: u64) -> bool {
        rng::coin(self.seed, index)
    }
    fn reseeded(&self, seed: u64) -> Arc<dyn DriveLaw> {
        Arc::new(Rmd { seed, ..*self })
    }
}

/// i.i.d. fair letters (the η = 0 case of RMD).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Random {
    pub length: u64,
    pub seed: u64,
}

impl DriveLaw for Random {
    fn name(&self) -> &'static str {
        "random"
    }
    fn spec(&self) -> String {
        format!("random:length={},seed={}", self.length, self.seed)
    }
    fn block_order(&self) -> u32 {
        0
    }
    fn units(&self) -> u64 {
        self.length
    }
    fn unit(&self, index: u64) -> bool {
        rng::coin(self.seed, index)
    }
    fn reseeded(&self, seed: u64) -> Arc<dyn DriveLaw> {
        Arc::new(Random { seed, ..*self })
    }
}

/// Floquet drive `0101…`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Periodic {
    pub length: u64,
}

impl DriveLaw for Periodic {
    fn name(&self) -> &'static str {
        "periodic"
    }
    fn spec(&self) -> String {
        format!("periodic:{}", self.length)
    }
    fn block_order(&self) -> u32 {
        0
    }
    fn units(&self) -> u64 {
        self.length
    }
    fn unit(&self, index: u64) -> bool {
        index & 1 == 1
    }
    fn reseeded(&self, _: u64) -> Arc<dyn DriveLaw> {
        Arc::new(*self)
    }
}

/// Parsed `name:…` arguments.
#[derive(Clone, Debug, Default)]
pub struct LawArgs {
    pub positional: Vec<String>,
    pub named: BTreeMap<String, String>,
    pub default_seed: u64,
}

impl LawArgs {
    fn get<T: std::str::FromStr>(&self, key: &str, pos: usize) -> Result<Option<T>> {
        let raw = self.named.get(key).or_else(|| self.positional.get(pos));
        raw.map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("bad value '{v}' for '{key}'")))).transpose()
    }

    fn require<T: std::str::FromStr>(&self, key: &str, pos: usize) -> Result<T> {
        self.get(key, pos)?.ok_or_else(|| Error::Config(format!("missing '{key}'")))
    }

    fn seed(&self, pos: usize) -> Result<u64> {
        Ok(self.get("seed", pos)?.unwrap_or(self.default_seed))
    }
}

pub type LawFactory = fn(&LawArgs) -> Result<Arc<dyn DriveLaw>>;

fn make_tm(a: &LawArgs) -> Result<Arc<dyn DriveLaw>> {
    let order: u32 = a.require("n", 0)?;
    if order > TM_BLOCK_CAP {
        return Err(Error::Capacity(format!("tm order {order} exceeds {TM_BLOCK_CAP}")));
    }
    Ok(Arc::new(ThueMorse { order }))
}

fn make_rmd(a: &LawArgs) -> Result<Arc<dyn DriveLaw>> {
    let eta: u32 = a.require("eta", 0)?;
    let blocks: u64 = a.require("blocks", 1)?;
    if blocks < 1 {
        return Err(Error::Config("rmd needs blocks ≥ 1".into()));
    }
    if eta > TM_BLOCK_CAP {
        return Err(Error::Capacity(format!("eta {eta} exceeds {TM_BLOCK_CAP}")));
    }
    Ok(Arc::new(Rmd { eta, blocks, seed: a.seed(2)? }))
}

fn make_random(a: &LawArgs) -> Result<Arc<dyn DriveLaw>> {
    Ok(Arc::new(Random { length: a.require("length", 0)?, seed: a.seed(1)? }))
}

fn make_periodic(a: &LawArgs) -> Result<Arc<dyn DriveLaw>> {
    Ok(Arc::new(Periodic { length: a.require("length", 0)? }))
}

#[derive(Clone)]
pub struct LawRegistry {
    factories: BTreeMap<&'static str, LawFactory>,
}

impl Default for LawRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl LawRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("tm", make_tm);
        r.register("rmd", make_rmd);
        r.register("random", make_random);
        r.register("periodic", make_periodic);
        r
    }

    pub fn register(&mut self, name: &'static str, factory: LawFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    /// Parses `name[:args]`; `seed` falls back to `default_seed`.
    pub fn parse(&self, spec: &str, default_seed: u64) -> Result<Arc<dyn DriveLaw>> {
        let spec = spec.trim();
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let factory = self
            .factories
            .get(name.trim())
            .ok_or_else(|| Error::Config(format!("unknown drive law '{name}' (known: {})", self.names().join(", "))))?;
        let mut args = LawArgs { default_seed, ..Default::default() };
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once('=') {
                Some((k, v)) => {
                    args.named.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => args.positional.push(item.to_string()),
            }
        }
        factory(&args)
    }
}
