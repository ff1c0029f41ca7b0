use std::path::Path;
use std::process::{Command, Output};

use sparse_doa::patterns::load_tabulated;
use sparse_doa::{ElementPattern, PatternKind};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparse-doa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn geometry_reports_coarray() {
    let out = bin(&["geometry", "--name", "mra4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("positions: [0, 1, 4, 6]"), "{text}");
    assert!(text.contains("aperture: 6"), "{text}");
    assert!(text.contains("0:4"), "{text}");
    assert!(text.contains("perfect: true"), "{text}");

    let text = String::from_utf8(bin(&["geometry", "--name", "0,2,5"]).stdout).unwrap();
    assert!(text.contains("holes: [1, 4]"), "{text}");
    assert!(text.contains("perfect: false"), "{text}");
}

#[test]
fn pattern_export_reloads() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["isotropic", "dipole_ref", "patch", "vivaldi"] {
        let file = dir.path().join(format!("{kind}.csv"));
        let out = bin(&["pattern", "--kind", kind, "--export", path(&file)]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let original = ElementPattern::builtin(PatternKind::parse(kind).unwrap()).unwrap();
        let loaded = load_tabulated(&file).unwrap();
        for i in 0..=360 {
            let az = -90.0 + 0.5 * i as f64;
            let d = original.evaluate(az).unwrap() - loaded.evaluate(az).unwrap();
            assert!(
                d.norm() <= 1e-9 * original.evaluate(az).unwrap().norm().max(1.0),
                "{kind} at {az}"
            );
        }
    }
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const SWEEP: &str = r#"
manifold.geometry = "mra8"
manifold.pattern = "patch"
scenario.family = "snr-sweep"
scenario.sweep = [-10.0, 0.0]
run.trials = 8
run.grid_step_deg = 0.05
run.fov_deg = 45.0
"#;

#[test]
fn repeated_sweeps_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = bin(&[
        "sweep",
        "--config",
        path(&cfg),
        "--out",
        path(&a),
        "--seed",
        "5",
        "--threads",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = bin(&[
        "sweep",
        "--config",
        path(&cfg),
        "--out",
        path(&b),
        "--seed",
        "5",
        "--threads",
        "3",
    ]);
    assert!(out.status.success());
    let ra = std::fs::read_to_string(a.join("results.csv")).unwrap();
    let rb = std::fs::read_to_string(b.join("results.csv")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(ra.lines().count(), 4);
    assert!(ra.lines().nth(1).unwrap().ends_with("seed=5"), "{ra}");
    let svg = std::fs::read_to_string(a.join("rmse.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn demo_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
manifold.geometry = "mra8"
manifold.pattern = "vivaldi"
scenario.family = "overloaded-demo"
scenario.snr_db = 10.0
scenario.angles_deg = [-40.0, -31.0, -22.0, -13.0, -4.0, 5.0, 14.0, 23.0, 32.0, 41.0]
run.estimator = "coarray-music"
run.snapshots = 1024
run.fov_deg = 45.0
run.grid_step_deg = 0.05
"#,
    );
    let out_dir = dir.path().join("demo");
    let out = bin(&["demo", "--config", path(&cfg), "--out", path(&out_dir)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let est = std::fs::read_to_string(out_dir.join("estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 12);
    assert!(out_dir.join("pseudospectrum.svg").exists());
    assert!(out_dir.join("pseudospectrum.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SWEEP}scenario.snrr_db = 1.0\n"));
    let out = bin(&["sweep", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snrr_db"));

    let missing = dir.path().join("missing.toml");
    let out = bin(&[
        "sweep",
        "--config",
        path(&missing),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = bin(&["geometry", "--name", "mra9"]);
    assert_eq!(out.status.code(), Some(2));

    // Output directory blocked by a regular file.
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = write_config(dir.path(), SWEEP);
    let out = bin(&[
        "sweep",
        "--config",
        path(&cfg),
        "--out",
        path(&blocker.join("sub")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            sparse_doa::config::ExperimentConfig::load(&p)
                .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}
