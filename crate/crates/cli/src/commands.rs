//! One function per subcommand: resolved config section in, [`Report`] out.

use cftdrive::drive::{u0_u1_steps, Ordering, Protocol, StepSpec};
use cftdrive::entropy::{run_protocol, tm_entropy_series, EntropyConvention, EntropySeries};
use cftdrive::fermion::{run_protocol_lattice, LatticeSpec};
use cftdrive::mobius::DeformationParams;
use cftdrive::nonhermitian::{build_combined_blocks, phase_diagram, CombinedParams};
use cftdrive::registry::LawRegistry;
use cftdrive::rmd::{
    averaged_matrices, closed_orbit, ensemble_lifetime, scaling_fit, trace_trajectory, Family, LifetimeOptions,
    RmdParams,
};
use cftdrive::rng::mix;
use cftdrive::tracemap::{
    heatmap_params, heatmap_trace, params_from_trace_point, preimage_cloud, CloudOptions, EscapeBox, TracePoint,
};
use rayon::prelude::*;
use serde_json::Value;

use crate::config::Values;
use crate::output::{summary_object, Cell, Report, Table};
use crate::CliError;

pub fn run(command: &str, v: &Values, seed: u64) -> Result<Report, CliError> {
    match command {
        "heatmap" => heatmap(v),
        "preimages" => preimages(v),
        "entropy" => entropy(v, seed),
        "scaling" => scaling(v, seed),
        "phase" => phase(v),
        "trajectory" => trajectory(v, seed),
        other => Err(CliError::Config(format!("unknown command '{other}'"))),
    }
}

pub fn heatmap(v: &Values) -> Result<Report, CliError> {
    let b = EscapeBox { q_bound: v.f64("q_bound")?, p_bound: v.f64("p_bound")?, maxiter: v.parse("maxiter")? };
    let cells = match v.choice("axes", &["params", "trace"])? {
        "params" => heatmap_params(&v.grid("t0")?, &v.grid("t1")?, &b),
        _ => heatmap_trace(&v.grid("q")?, &v.grid("p")?, &b),
    };
    let mut t = Table::new(&["t0_over_L", "t1_over_L", "p1", "q1", "n_star"]);
    for c in &cells {
        let n = c.n_star.map_or(Cell::from("never"), Cell::from);
        t.push(vec![c.t0_over_l.into(), c.t1_over_l.into(), c.start.p.into(), c.start.q.into(), n]);
    }
    let never = cells.iter().filter(|c| c.n_star.is_none()).count() as u64;
    Ok(Report {
        cell_count: cells.len() as u64,
        summary: summary_object(&[("never_escaping", never.into())]),
        main: t,
        extra: vec![],
    })
}

pub fn preimages(v: &Values) -> Result<Report, CliError> {
    let order: u32 = v.parse("order")?;
    if order < 1 {
        return Err(CliError::Config("[preimages] order must be ≥ 1".into()));
    }
    let opts = CloudOptions {
        samples: v.parse("samples")?,
        p_max: v.f64("p_max")?,
        window_p: v.f64("window_p")?,
        window_q: v.f64("window_q")?,
        eps: v.f64("eps")?,
        max_depth: v.parse("max_depth")?,
    };
    let clouds: Vec<Vec<TracePoint>> =
        (1..=order).into_par_iter().map(|xi| preimage_cloud(xi, &opts)).collect::<Result<_, _>>()?;
    let mut t = Table::new(&["order", "p", "q"]);
    for (xi, cloud) in (1..=order).zip(&clouds) {
        for pt in cloud {
            t.push(vec![xi.into(), pt.p.into(), pt.q.into()]);
        }
    }
    let counts: Vec<Value> = clouds.iter().map(|c| Value::from(c.len())).collect();
    Ok(Report {
        cell_count: order as u64,
        summary: serde_json::json!({ "points_per_order": counts }),
        main: t,
        extra: vec![],
    })
}

fn rmd_family(v: &Values, eta: u32, k: f64) -> Result<RmdParams, CliError> {
    Ok(match v.choice("family", &["fixed", "preimage"])? {
        "fixed" => RmdParams { eta, k, family: Family::FixedPoint { ell1: v.parse("ell1")? } },
        _ => RmdParams::preimage(eta, k, v.f64("t0")?),
    })
}

fn convention(v: &Values) -> Result<EntropyConvention, CliError> {
    let c = v.f64("c")?;
    Ok(match v.choice("boundary", &["periodic", "open"])? {
        "periodic" => EntropyConvention::periodic(c),
        _ => EntropyConvention::open_half_chain(c),
    })
}

/// The two letters of the entropy drive.
fn entropy_steps(v: &Values) -> Result<(StepSpec, StepSpec), CliError> {
    Ok(match v.choice("drive", &["u0u1", "combined", "deformation"])? {
        "u0u1" => {
            let (t0, t1) = match v.choice("params", &["times", "point", "fixed", "preimage"])? {
                "times" => (v.f64("t0")?, v.f64("t1")?),
                "point" => {
                    let pq: Vec<f64> = v
                        .raw("point")
                        .split(',')
                        .map(crate::config::parse_number)
                        .collect::<Result<_, _>>()
                        .map_err(CliError::Config)?;
                    if pq.len() != 2 {
                        return Err(CliError::Config("[entropy] point must be p,q".into()));
                    }
                    params_from_trace_point(TracePoint::new(pq[0], pq[1]))?
                }
                "fixed" => RmdParams { eta: 0, k: v.f64("k")?, family: Family::FixedPoint { ell1: v.parse("ell1")? } }
                    .drive_params()?,
                _ => RmdParams::preimage(0, v.f64("k")?, v.f64("t0")?).drive_params()?,
            };
            u0_u1_steps(t0, t1)?
        }
        "combined" => {
            let cp = CombinedParams {
                delta: v.f64("delta")?,
                lambda: v.f64("lambda")?,
                gamma: v.f64("gamma")?,
                l: 1.0,
                c: v.f64("c")?,
            };
            build_combined_blocks(&cp)?.steps(&cp)?
        }
        _ => {
            let dp = DeformationParams::real(v.f64("sigma0")?, v.f64("sigma_plus")?, v.f64("sigma_minus")?);
            let s = StepSpec::from_deformation(&dp, v.f64("t")?)?;
            (s, s)
        }
    })
}

fn push_series(t: &mut Table, source: &str, s: &EntropySeries, index: impl Fn(usize, u64) -> u64) {
    for (i, x) in s.samples.iter().enumerate() {
        t.push(vec![source.into(), index(i, x.step).into(), x.phys_time.into(), x.ds.into(), x.imag_residual.into()]);
    }
}

pub fn entropy(v: &Values, seed: u64) -> Result<Report, CliError> {
    let (s0, s1) = entropy_steps(v)?;
    let law = LawRegistry::builtin().parse(v.raw("law"), mix(seed, 0))?;
    let mut proto = Protocol::new(s0, s1, law);
    proto.ordering = v.raw("ordering").trim().parse::<Ordering>()?;
    let conv = convention(v)?;
    let source = v.choice("source", &["cft", "lattice", "both"])?;
    let stride: u64 = v.parse("stride")?;
    if stride == 0 {
        return Err(CliError::Config("[entropy] stride must be ≥ 1".into()));
    }
    let stroboscopic = v.choice("sampling", &["steps", "stroboscopic"])? == "stroboscopic";
    let want_cft = source != "lattice";
    let want_lattice = source != "cft";

    let cft = || -> Result<Option<EntropySeries>, CliError> {
        if !want_cft {
            return Ok(None);
        }
        Ok(Some(if stroboscopic {
            let n = proto.law.stroboscopic_order().ok_or_else(|| {
                CliError::Config("[entropy] stroboscopic sampling needs a Thue-Morse law (tm:N)".into())
            })?;
            tm_entropy_series(&proto.step0.block()?, &proto.step1.block()?, n, &conv, proto.ordering)?
        } else {
            run_protocol(&proto, &conv, stride)?
        }))
    };
    let lattice = || -> Result<Option<EntropySeries>, CliError> {
        if !want_lattice {
            return Ok(None);
        }
        if stroboscopic {
            return Err(CliError::Config("[entropy] stroboscopic sampling is CFT-only".into()));
        }
        let spec = LatticeSpec::new(v.parse("sites")?)?;
        let mut s = run_protocol_lattice(&spec, &proto, spec.left_half())?;
        // same sample positions as run_protocol with this stride
        s.samples =
            s.samples.into_iter().enumerate().filter(|(i, _)| (*i as u64 + 1) % stride == 0).map(|x| x.1).collect();
        Ok(Some(s))
    };
    let (a, b) = rayon::join(cft, lattice);
    let (a, b) = (a?, b?);

    let mut t = Table::new(&["source", "n_or_step", "phys_time", "dS_real", "dS_imag_residual"]);
    let mut summary = serde_json::Map::new();
    if let Some(s) = &a {
        push_series(&mut t, "cft", s, |i, step| if stroboscopic { i as u64 } else { step });
        summary.insert("cft_max_abs".into(), summary_value(s.max_abs()));
        summary.insert("cft_max_imag_residual".into(), summary_value(s.max_imag_residual()));
    }
    if let Some(s) = &b {
        push_series(&mut t, "lattice", s, |_, step| step);
        summary.insert("lattice_max_abs".into(), summary_value(s.max_abs()));
    }
    summary.insert("law".into(), Value::from(proto.law.spec()));
    Ok(Report { cell_count: 1, summary: Value::Object(summary), main: t, extra: vec![] })
}

fn summary_value(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn scaling(v: &Values, seed: u64) -> Result<Report, CliError> {
    let family = v.choice("family", &["fixed", "preimage"])?;
    let etas: Vec<u32> = v.list("etas")?;
    let ks = v.grid("k")?;
    let realizations: usize = v.parse("realizations")?;
    let opts =
        LifetimeOptions { s_star: v.f64("s_star")?, max_steps: v.parse("max_steps")?, convention: convention(v)? };
    let cells: Vec<(u64, RmdParams)> = etas
        .iter()
        .flat_map(|&eta| ks.iter().map(move |&k| (eta, k)))
        .enumerate()
        .map(|(i, (eta, k))| Ok((mix(seed, i as u64), rmd_family(v, eta, k)?)))
        .collect::<Result<_, CliError>>()?;
    let stats = cells
        .par_iter()
        .map(|(s, rp)| ensemble_lifetime(rp, realizations, *s, &opts))
        .collect::<Result<Vec<_>, _>>()?;

    let mut t = Table::new(&["family", "eta", "xi", "K", "t_star_mean", "t_star_stderr", "realizations", "seed"]);
    for ((s, rp), st) in cells.iter().zip(&stats) {
        t.push(vec![
            family.into(),
            rp.eta.into(),
            rp.xi().into(),
            rp.k.into(),
            st.t_star.into(),
            st.stderr.into(),
            (st.realizations as u64).into(),
            (*s).into(),
        ]);
    }
    let mut fit = Table::new(&["family", "eta", "slope", "intercept", "slope_stderr", "points", "censored"]);
    for (j, &eta) in etas.iter().enumerate() {
        let range = j * ks.len()..(j + 1) * ks.len();
        let pts: Vec<(f64, f64)> = range.clone().map(|i| (cells[i].1.k, stats[i].t_star)).collect();
        let censored: usize = stats[range].iter().map(|s| s.censored).sum();
        let (slope, intercept, se) = match scaling_fit(&pts) {
            Ok(f) => (f.slope, f.intercept, f.stderr),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        fit.push(vec![
            family.into(),
            eta.into(),
            slope.into(),
            intercept.into(),
            se.into(),
            (pts.len() as u64).into(),
            (censored as u64).into(),
        ]);
    }
    let summary = Value::Array(
        fit.rows
            .iter()
            .map(|r| {
                let pairs: Vec<(&str, Cell)> = fit.columns.iter().copied().zip(r.iter().cloned()).collect();
                summary_object(&pairs)
            })
            .collect(),
    );
    Ok(Report { cell_count: cells.len() as u64, summary, main: t, extra: vec![("fit", fit)] })
}

pub fn phase(v: &Values) -> Result<Report, CliError> {
    let template = CombinedParams { delta: 0.0, lambda: 0.0, gamma: v.f64("gamma")?, l: v.f64("l")?, c: 1.0 };
    let (deltas, lambdas) = (v.grid("delta")?, v.grid("lambda")?);
    let d = phase_diagram(&deltas, &lambdas, &template, v.parse("steps")?, v.f64("threshold")?)?;
    let mut t = Table::new(&["delta", "lambda", "label", "lyapunov", "residual"]);
    for c in &d.cells {
        t.push(vec![c.delta.into(), c.lambda.into(), c.label.as_str().into(), c.lyapunov.into(), c.residual.into()]);
    }
    let mut b = Table::new(&["delta", "lambda_c"]);
    for &(delta, lc) in &d.boundary {
        b.push(vec![delta.into(), lc.into()]);
    }
    let count = |l: &str| d.cells.iter().filter(|c| c.label.as_str() == l).count() as u64;
    let summary = summary_object(&[
        ("heating", count("heating").into()),
        ("nonheating", count("nonheating").into()),
        ("boundary", count("boundary").into()),
        ("boundary_points", (d.boundary.len() as u64).into()),
    ]);
    Ok(Report { cell_count: d.cells.len() as u64, summary, main: t, extra: vec![("boundary", b)] })
}

pub fn trajectory(v: &Values, seed: u64) -> Result<Report, CliError> {
    let rp = rmd_family(v, v.parse("eta")?, v.f64("k")?)?;
    let blocks: u64 = v.parse("blocks")?;
    let traj = trace_trajectory(&rp, blocks, mix(seed, 0))?;
    // analytic orbit of the averaged block; undefined where det M̄ ≤ 0
    let (m, n) = rp.blocks()?;
    let theta = averaged_matrices(&m, &n).map(|a| a.theta).unwrap_or(f64::NAN);
    let orbit = closed_orbit(theta / 2.0, traj.len());
    let mut t = Table::new(&["i", "x", "x_next", "orbit_x", "orbit_y"]);
    let mut dev: f64 = 0.0;
    for (i, (pt, o)) in traj.iter().zip(&orbit).enumerate() {
        let (x, y) = pt.map_or((f64::NAN, f64::NAN), |(x, y)| (x / 2.0, y / 2.0));
        dev = if x.is_finite() && o.0.is_finite() {
            dev.max((x - o.0).abs()).max((y - o.1).abs())
        } else {
            f64::INFINITY
        };
        t.push(vec![(i as u64).into(), x.into(), y.into(), o.0.into(), o.1.into()]);
    }
    let summary = summary_object(&[("theta", theta.into()), ("max_deviation", dev.into())]);
    Ok(Report { cell_count: 1, summary, main: t, extra: vec![] })
}
