use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ecdf-bands"));
    c.env_remove("ECDF_BANDS_CACHE");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn diagonal(n: usize) -> String {
    let mut t = String::from("u\n");
    for i in 0..n {
        t.push_str(&format!("{}\n", (i as f64 + 0.5) / n as f64));
    }
    t
}

/// `l` columns of well-mixed values; with `shift`, column 1 is moved up.
fn chains_csv(n: usize, l: usize, shift: f64) -> String {
    let mut t = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..l)
            .map(|c| {
                let v = ((i * l + c) as f64 * 0.618_033_988_7).fract();
                let v = if c == 1 { v + shift } else { v };
                v.to_string()
            })
            .collect();
        t.push_str(&row.join(","));
        t.push('\n');
    }
    t
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn diagonal_sample_passes() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "diag.csv", &diagonal(100));
    let o = run(&["test", s(&input)]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["schema"], "report/1");
    assert_eq!(r["inside"], true);
    assert_eq!(r["grid"].as_array().unwrap().len(), 100);
}

#[test]
fn constant_column_is_rejected() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "const.csv", &"0.99\n".repeat(40));
    let o = run(&["test", s(&input)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["inside"], false);
}

#[test]
fn operational_errors_exit_two() {
    let o = run(&["test", "/definitely/missing.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    let dir = TempDir::new().unwrap();
    let ragged = write(&dir, "ragged.csv", "0.1,0.2\n0.3\n");
    let o = run(&["test", s(&ragged)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ragged"));

    let input = write(&dir, "diag.csv", &diagonal(10));
    assert_eq!(
        run(&["test", s(&input), "--alpha", "0.6"]).status.code(),
        Some(2)
    );
    let bad = write(&dir, "bad.csv", "1.5\n0.2\n");
    assert_eq!(run(&["test", s(&bad)]).status.code(), Some(2));
}

#[test]
fn shifted_chain_is_flagged_and_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "chains.csv", &chains_csv(200, 4, 0.3));
    let svg = dir.path().join("plot.svg");
    let args = [
        "test",
        s(&input),
        "--seed",
        "5",
        "--m-reps",
        "2000",
        "--svg",
        s(&svg),
        "--diff",
    ];
    let a = run(&args);
    let first_svg = std::fs::read_to_string(&svg).unwrap();
    let b = run(&args);
    assert_eq!(a.status.code(), Some(1));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(first_svg, std::fs::read_to_string(&svg).unwrap());
    let r = json(&a);
    assert_eq!(r["kind"], "multi");
    assert_eq!(r["gamma"]["method"], "simulation");
    assert_eq!(r["results"][1]["inside"], false);
    assert_eq!(first_svg.matches("class=\"trajectory\"").count(), 4);
}

#[test]
fn ndjson_two_chains_use_the_exact_method() {
    let dir = TempDir::new().unwrap();
    let mut text = String::new();
    for i in 0..50 {
        for c in 0..2 {
            let v = ((i * 2 + c) as f64 * 0.618_033_988_7).fract();
            text.push_str(&format!("{{\"chain\": {c}, \"value\": {v}}}\n"));
        }
    }
    let input = write(&dir, "draws.ndjson", &text);
    let o = run(&["test", s(&input)]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["chains"], 2);
    assert_eq!(r["gamma"]["method"], "optimization");
}

#[test]
fn discrete_resolution_comment_is_honoured() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("# resolution: 9\n");
    for i in 0..40 {
        text.push_str(&format!("{}\n", (i % 10) as f64 / 9.0));
    }
    let input = write(&dir, "pit.csv", &text);
    let o = run(&["test", s(&input)]);
    assert_eq!(o.status.code(), Some(0));
    let grid = json(&o)["grid"].as_array().unwrap().len();
    assert_eq!(10 % grid, 0);
}

#[test]
fn pit_then_test() {
    let dir = TempDir::new().unwrap();
    let draws = write(&dir, "y.csv", "y\n1.0\n2.0\n");
    let comp = write(&dir, "x.csv", "0.5,1.5,2.5\n1,2,3\n");
    let out = dir.path().join("u.csv");
    let o = run(&[
        "pit",
        "--draws",
        s(&draws),
        "--comparison",
        s(&comp),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# resolution: 3\nu\n"));
    let values: Vec<f64> = text.lines().skip(2).map(|l| l.parse().unwrap()).collect();
    assert_eq!(values, vec![1.0 / 3.0, 2.0 / 3.0]);

    let short = write(&dir, "short.csv", "0.5,1.5\n");
    let o = run(&["pit", "--draws", s(&draws), "--comparison", s(&short)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn power_csv() {
    let o = run(&[
        "power", "--family", "B", "--ks", "0.5,1,3", "--n", "40", "--tests", "bands,w2",
        "--m-reps", "1000", "--seed", "9",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "family,n,chains,k,test,rate,std_error");
    assert_eq!(lines.len(), 7);
    let rate = |line: &str| line.split(',').nth(5).unwrap().parse::<f64>().unwrap();
    assert!(rate(lines[2]) < 0.1 && rate(lines[3]) > 0.3);
    let again = run(&[
        "power", "--family", "B", "--ks", "0.5,1,3", "--n", "40", "--tests", "bands,w2",
        "--m-reps", "1000", "--seed", "9",
    ]);
    assert_eq!(o.stdout, again.stdout);
    assert_eq!(run(&["power", "--family", "Q"]).status.code(), Some(2));
}

#[test]
fn thin_writes_chains_and_report() {
    let dir = TempDir::new().unwrap();
    // a slowly drifting sawtooth is strongly autocorrelated
    let mut text = String::from("a,b\n");
    for i in 0..400 {
        text.push_str(&format!(
            "{},{}\n",
            ((i as f64) / 40.0).sin(),
            ((i as f64) / 40.0 + 1.0).sin()
        ));
    }
    let input = write(&dir, "ac.csv", &text);
    let out = dir.path().join("thin.csv");
    let report = dir.path().join("ess.json");
    let o = run(&[
        "thin",
        s(&input),
        "--strategy",
        "mean_ess",
        "--out",
        s(&out),
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["schema"], "thin/1");
    let factor = r["plan"]["factor"].as_u64().unwrap();
    assert!(factor > 1);
    let rows = std::fs::read_to_string(&out).unwrap().lines().count() - 1;
    assert_eq!(rows as u64, 400u64.div_ceil(factor));
    assert_eq!(
        run(&["thin", s(&input), "--strategy", "nope"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gamma_cache_round_trip() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("grid.json");
    let o = run(&[
        "gamma",
        "build",
        "--n",
        "50,100,200",
        "--chains",
        "1",
        "--out",
        s(&cache),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let get = |n: &str, method: &str| {
        bin()
            .args(["gamma", "get", "--n", n, "--method", method])
            .env("ECDF_BANDS_CACHE", &cache)
            .output()
            .unwrap()
    };
    let exact = json(&get("100", "cache"));
    assert_eq!(exact["method"], "optimization");
    let interp = json(&get("140", "auto"));
    assert_eq!(interp["method"], "interpolated");
    assert!((interp["attained_coverage"].as_f64().unwrap() - 0.95).abs() < 0.015);
    assert_eq!(get("400", "cache").status.code(), Some(2));
    assert_eq!(json(&get("400", "auto"))["method"], "optimization");
}

#[test]
fn plot_kinds() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "diag.csv", &diagonal(60));
    let svg = dir.path().join("h.svg");
    let data = dir.path().join("h.json");
    let o = run(&[
        "plot",
        s(&input),
        "--kind",
        "hist",
        "--bins",
        "6",
        "--out",
        s(&svg),
        "--data",
        s(&data),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(&svg)
            .unwrap()
            .matches("class=\"bar\"")
            .count(),
        6
    );
    let d: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&data).unwrap()).unwrap();
    assert_eq!(d["schema"], "plot-data/1");

    let o = run(&["plot", s(&input), "--kind", "ecdf", "--title", "a < b"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("a &lt; b") && text.contains("class=\"band\""));

    let chains = write(&dir, "c.csv", &chains_csv(30, 2, 0.0));
    assert_eq!(
        run(&["plot", s(&chains), "--kind", "hist"]).status.code(),
        Some(2)
    );
}
