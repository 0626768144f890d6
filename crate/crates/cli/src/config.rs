//! Ini-style configuration: one `[run]` section plus one section per command.
//!
//! Every key has a documented default; unknown sections or keys are errors.
//! Numbers accept `pi`, products and one quotient (`2/3`, `pi/2`, `2*pi`);
//! grids are `start:stop:count` (inclusive, append `:log` for geometric
//! spacing) or comma lists.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::CliError;

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const RUN_KEYS: &[Key] = &[
    key("seed", "0", "global seed; cell i uses mix(seed, i)"),
    key("threads", "0", "worker threads, 0 = all cores"),
    key("out", "", "output path (default <command>.<format>)"),
    key("format", "csv", "csv | json"),
];

pub const HEATMAP_KEYS: &[Key] = &[
    key("axes", "params", "params: grid in (T0/L, T1/L); trace: grid in (q1, p1)"),
    key("t0", "0.005:0.995:100", "T0/L grid (axes = params)"),
    key("t1", "0.005:0.995:100", "T1/L grid (axes = params)"),
    key("q", "-4:4:161", "q1 grid (axes = trace)"),
    key("p", "0:10:201", "p1 grid (axes = trace)"),
    key("maxiter", "64", "trace-map iterations before a point counts as never escaping"),
    key("q_bound", "50", "escape when |q| reaches this"),
    key("p_bound", "2500", "escape when |p| reaches this"),
];

pub const PREIMAGE_KEYS: &[Key] = &[
    key("order", "8", "emit preimage orders 1..=order"),
    key("samples", "2000", "samples along the q = 2 ray"),
    key("p_max", "100", "ray extent in p"),
    key("window_p", "10", "drop points with p > window_p"),
    key("window_q", "4", "drop points with |q| > window_q"),
    key("eps", "inf", "bisect ray segments whose images are farther apart than this"),
    key("max_depth", "10", "bisection depth limit"),
];

pub const ENTROPY_KEYS: &[Key] = &[
    key("drive", "u0u1", "u0u1 | combined | deformation"),
    key("params", "point", "u0u1 parameters: times | point | fixed | preimage"),
    key("t0", "0.1", "T0/L (params = times; preimage-family T0/L)"),
    key("t1", "0.1", "T1/L (params = times)"),
    key("point", "4,1.5", "initial trace point p,q (params = point)"),
    key("k", "0.05", "K (params = fixed | preimage)"),
    key("ell1", "0", "even offset l1 (params = fixed)"),
    key("delta", "0.1", "combined drive Δ"),
    key("lambda", "0.1", "combined drive λ"),
    key("gamma", "pi/2", "combined drive Γ"),
    key("sigma0", "1", "deformation σ0"),
    key("sigma_plus", "0", "deformation σ+"),
    key("sigma_minus", "0", "deformation σ-"),
    key("t", "0.1", "deformation step T/L"),
    key("law", "tm:10", "drive law spec, e.g. tm:10, rmd:eta=2,blocks=100, periodic:50, random:100"),
    key("ordering", "first-leftmost", "first-leftmost | reversed"),
    key("sampling", "steps", "steps: after every law unit; stroboscopic: at 2^n (tm law, cft only)"),
    key("stride", "1", "keep every stride-th sample (sampling = steps)"),
    key("source", "cft", "cft | lattice | both"),
    key("sites", "600", "lattice sites (even)"),
    key("boundary", "periodic", "CFT convention: periodic (two endpoints) | open (half chain)"),
    key("c", "1", "central charge"),
];

pub const SCALING_KEYS: &[Key] = &[
    key("family", "fixed", "fixed | preimage"),
    key("etas", "0,1,2", "multipolar orders"),
    key("k", "0.03:0.1:6:log", "K grid"),
    key("t0", "2/3", "T0/L of the preimage family"),
    key("ell1", "0", "even offset l1 of the fixed-point family"),
    key("realizations", "50", "random sequences per cell"),
    key("s_star", "10", "entropy threshold defining the lifetime"),
    key("max_steps", "17179869184", "censor runs still below threshold after this many steps"),
    key("boundary", "periodic", "periodic | open"),
    key("c", "1", "central charge"),
];

pub const PHASE_KEYS: &[Key] = &[
    key("delta", "-0.5:0.5:41", "Δ grid"),
    key("lambda", "0:0.5:101", "λ grid"),
    key("gamma", "pi/2", "SU(2) deformation angle Γ"),
    key("l", "1", "l = L/r"),
    key("steps", "16384", "Thue-Morse steps for the Lyapunov estimate"),
    key("threshold", "1e-3", "heating when λ_L exceeds this"),
];

pub const TRAJECTORY_KEYS: &[Key] = &[
    key("family", "fixed", "fixed | preimage"),
    key("eta", "3", "multipolar order"),
    key("k", "0.04", "K"),
    key("t0", "2/3", "T0/L of the preimage family"),
    key("ell1", "0", "even offset l1 of the fixed-point family"),
    key("blocks", "1000", "η-blocks to apply"),
];

pub const COMMANDS: &[(&str, &[Key])] = &[
    ("heatmap", HEATMAP_KEYS),
    ("preimages", PREIMAGE_KEYS),
    ("entropy", ENTROPY_KEYS),
    ("scaling", SCALING_KEYS),
    ("phase", PHASE_KEYS),
    ("trajectory", TRAJECTORY_KEYS),
];

pub fn keys_for(command: &str) -> Option<&'static [Key]> {
    COMMANDS.iter().find(|(c, _)| *c == command).map(|(_, k)| *k)
}

/// Help text listing every key of `keys` with its default.
pub fn describe(section: &str, keys: &[Key]) -> String {
    let mut s = format!("[{section}] keys (defaults in brackets):\n");
    for k in keys {
        s.push_str(&format!("  {:<12} [{}]  {}\n", k.name, k.default, k.help));
    }
    s
}

pub type Section = BTreeMap<String, String>;

/// Raw sections from an ini file; keys before any header belong to `[run]`.
pub fn load_file(path: &Path) -> Result<BTreeMap<String, Section>, CliError> {
    let ini = ini::Ini::load_from_file(path).map_err(|e| match e {
        ini::Error::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
        ini::Error::Parse(e) => CliError::Config(format!("{}: {e}", path.display())),
    })?;
    let mut out: BTreeMap<String, Section> = BTreeMap::new();
    for (name, props) in ini.iter() {
        let sec = out.entry(name.unwrap_or("run").to_string()).or_default();
        for (k, v) in props.iter() {
            if sec.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("duplicate key '{k}'")));
            }
        }
    }
    out.retain(|name, sec| name != "run" || !sec.is_empty());
    Ok(out)
}

/// Defaults overlaid with `given`; unknown keys are rejected.
pub fn resolve(section: &str, keys: &[Key], given: &Section) -> Result<Section, CliError> {
    for k in given.keys() {
        if !keys.iter().any(|x| x.name == k) {
            let known: Vec<&str> = keys.iter().map(|x| x.name).collect();
            return Err(CliError::Config(format!("unknown key '{k}' in [{section}] (known: {})", known.join(", "))));
        }
    }
    Ok(keys
        .iter()
        .map(|k| (k.name.to_string(), given.get(k.name).cloned().unwrap_or_else(|| k.default.to_string())))
        .collect())
}

/// Typed access to a resolved section.
pub struct Values<'a> {
    pub section: &'a str,
    pub map: &'a Section,
}

impl<'a> Values<'a> {
    pub fn raw(&self, k: &str) -> &'a str {
        self.map.get(k).map(String::as_str).unwrap_or("")
    }

    fn bad(&self, k: &str, why: impl std::fmt::Display) -> CliError {
        CliError::Config(format!("[{}] {k} = '{}': {why}", self.section, self.raw(k)))
    }

    pub fn f64(&self, k: &str) -> Result<f64, CliError> {
        parse_number(self.raw(k)).map_err(|e| self.bad(k, e))
    }

    pub fn parse<T: std::str::FromStr>(&self, k: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(k).trim().parse::<T>().map_err(|e| self.bad(k, e))
    }

    pub fn grid(&self, k: &str) -> Result<Vec<f64>, CliError> {
        parse_grid(self.raw(k)).map_err(|e| self.bad(k, e))
    }

    pub fn list<T: std::str::FromStr>(&self, k: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let v: Result<Vec<T>, _> = self.raw(k).split(',').map(|s| s.trim().parse::<T>()).collect();
        v.map_err(|e| self.bad(k, e))
    }

    pub fn choice(&self, k: &str, allowed: &[&'static str]) -> Result<&'static str, CliError> {
        let v = self.raw(k).trim();
        allowed
            .iter()
            .copied()
            .find(|a| *a == v)
            .ok_or_else(|| self.bad(k, format!("expected one of {}", allowed.join(" | "))))
    }
}

fn parse_factor(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix('-') {
        return parse_factor(rest).map(|x| -x);
    }
    if s.eq_ignore_ascii_case("pi") {
        return Ok(PI);
    }
    s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

fn parse_product(s: &str) -> Result<f64, String> {
    s.split('*').map(parse_factor).try_fold(1.0, |acc, x| Ok(acc * x?))
}

/// `a`, `a*b`, `a/b`, with `pi` allowed as a factor.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty value".into());
    }
    match s.split_once('/') {
        Some((a, b)) => Ok(parse_product(a)? / parse_product(b)?),
        None => parse_product(s),
    }
}

/// `start:stop:count[:log]` or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if !s.contains(':') {
        return s.split(',').map(parse_number).collect();
    }
    let parts: Vec<&str> = s.split(':').collect();
    let log = match parts.len() {
        3 => false,
        4 if parts[3].trim() == "log" => true,
        _ => return Err("expected start:stop:count or start:stop:count:log".into()),
    };
    let (a, b) = (parse_number(parts[0])?, parse_number(parts[1])?);
    let n: usize = parts[2].trim().parse().map_err(|_| format!("bad count '{}'", parts[2]))?;
    if n == 0 {
        return Err("count must be ≥ 1".into());
    }
    if log && !(a > 0.0 && b > 0.0) {
        return Err("log grids need positive endpoints".into());
    }
    let at = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
    // endpoints are returned exactly
    Ok((0..n)
        .map(|i| match i {
            0 => a,
            _ if i == n - 1 => b,
            _ if log => (a.ln() + (b.ln() - a.ln()) * at(i)).exp(),
            _ => a + (b - a) * at(i),
        })
        .collect())
}
