use std::path::Path;
use std::process::{Command, Output};

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liouvscar")).args(args).env("RUST_LOG", "warn").env_remove("LIOUVSCAR_WORKERS").output().unwrap()
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut a = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    a.extend_from_slice(extra);
    run(&a)
}

/// Data rows of a headered CSV, split naively (no quoted cells expected).
fn data_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

const SCL4: &str = r#"
commands = ["spectrum"]
gamma_grid = [0.0, 0.0005, 0.02]
[model]
L = 4
couplings = { family = "SCL", j_h = 0.66, j_x = 0.1 }
"#;

#[test]
fn spectrum_files_carry_headers_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCL4);
    let out = dir.path().join("out");
    let o = run_config(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..3 {
        let p = out.join(format!("spectrum_{i:03}.csv"));
        let text = std::fs::read_to_string(&p).unwrap();
        let head: Vec<&str> = text.lines().take(4).collect();
        assert!(head[0].starts_with("# liouvscar "));
        assert_eq!(head[1], "# schema: spectrum v1");
        assert!(head[2].starts_with("# config_sha256: ") && head[2].len() == 17 + 64);
        assert!(head[3].starts_with("# columns: sector:str"));
        assert!(text.contains(",scar,"), "no scar modes in {}", p.display());
        assert!(text.contains(",thermal,"));
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(format!("spectrum_{i:03}.json"))).unwrap()).unwrap();
        assert_eq!(json["header"]["schema"], "spectrum-record");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["data"]["gaps"].as_array().unwrap().len(), 0);
}

#[test]
fn reruns_are_byte_identical() {
    let body = r#"
commands = ["spectrum", "dynamics", "perturb"]
gamma_grid = [0.001, 0.01]
[model]
L = 4
couplings = { family = "SCL", j_h = 0.66, j_x = { lo = 0.05, hi = 0.15 } }
[dynamics]
initial = "pi"
t_max = 2.0
dt = 0.05
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), body);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(run_config(&cfg, &a, &["--seed", "11", "--workers", "1"]).status.success());
    assert!(run_config(&cfg, &b, &["--seed", "11", "--workers", "3"]).status.success());
    assert!(run_config(&cfg, &c, &["--seed", "12"]).status.success());
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 5);
    for n in &names {
        assert_eq!(std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap(), "{n:?} differs");
    }
    assert_ne!(std::fs::read(a.join("spectrum_000.csv")).unwrap(), std::fs::read(c.join("spectrum_000.csv")).unwrap());
}

#[test]
fn invalid_config_exits_with_field_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        (SCL4.replace("[0.0, 0.0005, 0.02]", "[0.02, 0.0005]"), "gamma_grid"),
        (format!("{SCL4}[tolerances]\ncluster = -1.0\n"), "tolerances.cluster"),
        (SCL4.replace("j_h = 0.66", "j_hh = 0.66"), "j_h"),
        (SCL4.replace("\"spectrum\"", "\"dynamics\""), "dynamics"),
    ];
    for (body, field) in cases {
        let cfg = write_config(dir.path(), &body);
        let o = run_config(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{field}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "{field}: {err}");
    }
    assert!(!out.exists());
}

#[test]
fn budget_is_checked_before_any_compute() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("memory_budget_gib = 1e-9\n{SCL4}"));
    let out = dir.path().join("out");
    let o = run_config(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--override-budget"));
    assert_eq!(std::fs::read_dir(&out).map(|d| d.count()).unwrap_or(0), 0);
    assert!(run_config(&cfg, &out, &["--override-budget"]).status.success());
}

#[test]
fn full_half_filling_block_at_ten_sites_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let body = SCL4.replace("L = 4", "L = 10") + "[sectors]\nsymmetries = []\n";
    let cfg = write_config(dir.path(), &body);
    let o = run_config(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("63504"));
}

#[test]
fn perturb_writes_layer_spectra_and_predictions() {
    let body = r#"
commands = ["perturb"]
gamma_grid = { start = 1e-4, stop = 1e-1, count = 4, spacing = "log" }
[model]
L = 10
couplings = { family = "SCL", j_h = 0.66, j_x = 0.0 }
[perturb]
sigma = "given"
values = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("out");
    let o = run_config(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = data_rows(&out.join("layers.csv"));
    assert_eq!(h, ["l", "gamma", "gamma_eff", "index", "re", "im"]);
    let col = |n: &str| h.iter().position(|c| c == n).unwrap();
    let mut l3: Vec<f64> = rows.iter().filter(|r| r[col("l")] == "3" && r[col("gamma")] == "1e-4").map(|r| r[col("re")].parse::<f64>().unwrap() / 2e-4).collect();
    l3.sort_by(f64::total_cmp);
    let want = [-4.0 * 5f64.sqrt() / 5.0, 0.0, 4.0 * 5f64.sqrt() / 5.0];
    assert_eq!(l3.len(), 3);
    for (a, b) in l3.iter().zip(want) {
        assert!((a - b).abs() < 1e-9, "{l3:?}");
    }
    let (_, pred) = data_rows(&out.join("predicted.csv"));
    assert!(!pred.is_empty() && pred.iter().all(|r| r[2] == "true"));
}

#[test]
fn sweep_records_velocity_and_breaking_files() {
    let body = r#"
commands = ["sweep", "symmetry-check"]
gamma_grid = { start = 1e-4, stop = 1e-1, count = 12, spacing = "log" }
[model]
L = 6
couplings = { family = "SCL", j_h = 0.66, j_x = 0.1 }
[sectors]
blocks = ["m3,3|p+|x+"]
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("out");
    let o = run_config(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = data_rows(&out.join("velocity_m3_3_p+_x+.csv"));
    assert_eq!(h[0], "gamma");
    assert_eq!(rows.len(), 12);
    assert!(out.join("breaking_m3_3_p+_x+.csv").exists());
    let sym: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("symmetry.json")).unwrap()).unwrap();
    for t in sym["data"]["t_minus"].as_array().unwrap() {
        assert!(t["residual"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn positional_commands_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCL4);
    let out = dir.path().join("out");
    let o = run(&["symmetry-check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("symmetry.json").exists());
    assert!(!out.join("spectrum_000.csv").exists());
}

#[test]
fn worker_env_var_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCL4);
    let o = Command::new(env!("CARGO_BIN_EXE_liouvscar"))
        .args(["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .env("LIOUVSCAR_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
