use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cftdrive::tracemap::{escape_time, initial_condition_from_params, EscapeBox};

struct Scratch(PathBuf);

impl Scratch {
    fn new(name: &str) -> Self {
        let p = std::env::temp_dir().join(format!("cftdrive-cli-{}-{name}", std::process::id()));
        let _ = std::fs::remove_dir_all(&p);
        std::fs::create_dir_all(&p).unwrap();
        Scratch(p)
    }

    fn path(&self, f: &str) -> PathBuf {
        self.0.join(f)
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cftdrive"))
        .args(args)
        .current_dir(dir)
        .env_remove("CFTDRIVE_SEED")
        .env_remove("CFTDRIVE_THREADS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let o = run(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn exit_codes_by_error_class() {
    let s = Scratch::new("exit");
    assert_eq!(run(&s.0, &["preimages", "--set", "order=1", "--set", "samples=10"]).status.code(), Some(0));
    assert_eq!(run(&s.0, &["heatmap", "--set", "colour=red"]).status.code(), Some(2));
    assert_eq!(run(&s.0, &["heatmap", "--set", "maxiter=lots"]).status.code(), Some(2));
    assert_eq!(run(&s.0, &["phase", "--set", "lambda=-1"]).status.code(), Some(2));
    assert_eq!(run(&s.0, &["run", "--config", "missing.ini"]).status.code(), Some(1));
    // sin(πT₀/L) = 0 has no first preimage
    let o = run(&s.0, &["entropy", "--set", "params=preimage", "--set", "t0=0", "--set", "law=tm:2"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&s.0, &["preimages", "--out", "/proc/nope/x.csv", "--set", "order=1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_section_and_stray_sections_are_rejected() {
    let s = Scratch::new("sections");
    std::fs::write(s.path("two.ini"), "[heatmap]\nmaxiter = 5\n[phase]\nsteps = 1024\n").unwrap();
    assert_eq!(run(&s.0, &["run", "--config", "two.ini"]).status.code(), Some(2));
    std::fs::write(s.path("odd.ini"), "[bogus]\nx = 1\n").unwrap();
    assert_eq!(run(&s.0, &["run", "--config", "odd.ini"]).status.code(), Some(2));
    std::fs::write(s.path("dup.ini"), "[heatmap]\nmaxiter = 5\nmaxiter = 6\n").unwrap();
    assert_eq!(run(&s.0, &["run", "--config", "dup.ini"]).status.code(), Some(2));
}

#[test]
fn single_cell_heatmap_matches_escape_time() {
    let s = Scratch::new("cell");
    for (t0, t1) in [(0.3, 0.2), (0.7, 0.15), (0.5, 0.5)] {
        ok(&s.0, &["heatmap", "--set", &format!("t0={t0}"), "--set", &format!("t1={t1}"), "--out", "h.csv"]);
        let (header, rows) = read_csv(&s.path("h.csv"));
        assert_eq!(header, ["t0_over_L", "t1_over_L", "p1", "q1", "n_star"]);
        assert_eq!(rows.len(), 1);
        let start = initial_condition_from_params(t0, t1);
        let want = escape_time(start, &EscapeBox::default(), false).n_star;
        let got = &rows[0][4];
        assert_eq!(got, &want.map_or("never".to_string(), |n| n.to_string()));
        assert_eq!(rows[0][2].parse::<f64>().unwrap(), start.p);
        assert_eq!(rows[0][3].parse::<f64>().unwrap(), start.q);
    }
}

#[test]
fn first_order_preimages_solve_the_fixed_point_equation() {
    let s = Scratch::new("pre1");
    ok(&s.0, &["preimages", "--set", "order=1", "--set", "samples=50", "--out", "p.csv"]);
    let (header, rows) = read_csv(&s.path("p.csv"));
    assert_eq!(header, ["order", "p", "q"]);
    assert!(!rows.is_empty());
    for r in rows {
        let (p, q): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        // 𝒦(p, q) = (4, 2) ⇔ q = 2, or (p, q) = (0, −2)
        assert!((q - 2.0).abs() < 1e-12 || (p.abs() < 1e-12 && (q + 2.0).abs() < 1e-12), "({p}, {q})");
    }
}

#[test]
fn empty_window_gives_header_only_file() {
    let s = Scratch::new("empty");
    // no first-order preimage lies near the origin ((0, 0) itself has order 2)
    ok(&s.0, &["preimages", "--set", "order=1", "--set", "window_p=1e-9", "--set", "window_q=1e-9", "--out", "e.csv"]);
    assert_eq!(std::fs::read_to_string(s.path("e.csv")).unwrap(), "order,p,q\n");
}

#[test]
fn json_output_carries_rows_side_tables_and_summary() {
    let s = Scratch::new("json");
    ok(
        &s.0,
        &[
            "phase",
            "--set",
            "delta=0.5",
            "--set",
            "lambda=0:0.1:3",
            "--set",
            "steps=1024",
            "--format",
            "json",
            "--out",
            "ph.json",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(s.path("ph.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["rows"][0]["delta"], 0.5);
    assert!(v["boundary"].is_array());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(s.path("ph.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "phase");
    assert_eq!(m["format"], "json");
    assert_eq!(m["config"]["steps"], "1024");
    assert_eq!(m["cell_count"], 3);
}

#[test]
fn csv_side_tables_and_manifest() {
    let s = Scratch::new("side");
    ok(
        &s.0,
        &[
            "scaling",
            "--seed",
            "3",
            "--set",
            "etas=0",
            "--set",
            "k=0.05,0.07,0.1",
            "--set",
            "realizations=4",
            "--out",
            "sub/sc.csv",
        ],
    );
    let (h, rows) = read_csv(&s.path("sub/sc.csv"));
    assert_eq!(h, ["family", "eta", "xi", "K", "t_star_mean", "t_star_stderr", "realizations", "seed"]);
    assert_eq!(rows.len(), 3);
    let (hf, fit) = read_csv(&s.path("sub/sc.fit.csv"));
    assert_eq!(hf[..3], ["family", "eta", "slope"]);
    assert_eq!(fit.len(), 1);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(s.path("sub/sc.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn run_uses_the_single_config_section() {
    let s = Scratch::new("runcfg");
    let cfg = workspace_root().join("configs/fig1.ini");
    ok(&s.0, &["run", "--config", cfg.to_str().unwrap(), "--out", "f1.csv"]);
    let (_, rows) = read_csv(&s.path("f1.csv"));
    let orders: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(orders.into_iter().collect::<Vec<_>>(), ["1", "2", "3"]);
}

#[test]
fn cli_flags_override_run_section() {
    let s = Scratch::new("precedence");
    std::fs::write(s.path("c.ini"), "[run]\nseed = 5\nout = from_ini.csv\n[trajectory]\nblocks = 20\n").unwrap();
    ok(&s.0, &["run", "--config", "c.ini"]);
    assert!(s.path("from_ini.csv").exists());
    ok(&s.0, &["run", "--config", "c.ini", "--seed", "6", "--out", "flag.csv"]);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(s.path("flag.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 6);
    let (_, rows) = read_csv(&s.path("flag.csv"));
    assert_eq!(rows.len(), 20);
}

#[test]
fn undeformed_drive_has_zero_entropy() {
    let s = Scratch::new("identity");
    ok(
        &s.0,
        &[
            "entropy",
            "--set",
            "drive=deformation",
            "--set",
            "sigma0=1",
            "--set",
            "law=periodic:20",
            "--set",
            "source=both",
            "--set",
            "sites=40",
            "--out",
            "z.csv",
        ],
    );
    let (h, rows) = read_csv(&s.path("z.csv"));
    assert_eq!(h, ["source", "n_or_step", "phys_time", "dS_real", "dS_imag_residual"]);
    assert_eq!(rows.len(), 40);
    for r in rows {
        assert!(r[3].parse::<f64>().unwrap().abs() < 1e-8, "{r:?}");
    }
}

#[test]
fn stroboscopic_sampling_needs_a_tm_law() {
    let s = Scratch::new("strobe");
    let o = run(&s.0, &["entropy", "--set", "sampling=stroboscopic", "--set", "law=periodic:8"]);
    assert_eq!(o.status.code(), Some(2));
    ok(&s.0, &["entropy", "--set", "sampling=stroboscopic", "--set", "law=tm:6", "--out", "t.csv"]);
    let (_, rows) = read_csv(&s.path("t.csv"));
    let ns: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(ns.first(), Some(&"0"));
    assert_eq!(ns.last(), Some(&"6"));
}

#[test]
fn rerun_reproduces_and_refuses_conflicts() {
    let s = Scratch::new("rerun");
    ok(&s.0, &["entropy", "--seed", "9", "--set", "law=random:30", "--out", "a.csv"]);
    ok(&s.0, &["rerun", "a.csv.manifest.json", "--out", "b.csv"]);
    assert_eq!(std::fs::read(s.path("a.csv")).unwrap(), std::fs::read(s.path("b.csv")).unwrap());
    assert_eq!(run(&s.0, &["rerun", "a.csv.manifest.json"]).status.code(), Some(2));
    assert_eq!(run(&s.0, &["rerun", "a.csv.manifest.json", "--seed", "1", "--out", "c.csv"]).status.code(), Some(2));
    assert_eq!(run(&s.0, &["rerun", "a.csv", "--out", "c.csv"]).status.code(), Some(2));
}

#[test]
fn seed_env_var_and_help() {
    let s = Scratch::new("env");
    let o = Command::new(env!("CARGO_BIN_EXE_cftdrive"))
        .args(["trajectory", "--set", "blocks=10", "--out", "t.csv"])
        .current_dir(&s.0)
        .env("CFTDRIVE_SEED", "42")
        .env("CFTDRIVE_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(s.path("t.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!((m["seed"].as_u64(), m["threads"].as_u64()), (Some(42), Some(2)));
    let help = run(&s.0, &["scaling", "--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("realizations") && text.contains("17179869184"), "{text}");
}
