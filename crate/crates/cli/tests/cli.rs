//! Binary-level and sweep-level behaviour of the command-line runner.

use std::path::Path;
use std::process::{Command, Output};

use bsde_cfft::analytics::delta_from_z;
use bsde_cfft::boundary_control::ShiftScheme;
use bsde_cfft_cli::emit::emit_profile;
use bsde_cfft_cli::{run_single, run_sweep, run_with_solution, RunConfig, SweepAxes};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsde-cfft"))
        .args(args)
        .output()
        .unwrap()
}

fn small() -> RunConfig {
    RunConfig {
        steps: 50,
        grid_exp: 10,
        ..RunConfig::default()
    }
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn sweep_isolates_a_failing_cell() {
    let axes = SweepAxes::parse("steps=20,40,60;trunc_width=0,10,12;grid_exp=8,9,10").unwrap();
    let rows = run_sweep(&RunConfig::default(), &axes, 4, |_, _| {}).unwrap();
    assert_eq!(rows.len(), 27);
    let errors: Vec<_> = rows.iter().filter(|r| r.is_error()).collect();
    // every cell with L = 0 fails; the rest succeed
    assert_eq!(errors.len(), 9);
    assert!(errors
        .iter()
        .all(|r| r.trunc_width == 0.0 && r.error.contains("trunc_width")));
    assert!(rows.iter().filter(|r| !r.is_error()).all(|r| r.price.is_some()));

    let axes = SweepAxes::parse("steps=20,40,60;trunc_width=10,12,14;grid_exp=8,9,10").unwrap();
    let mut cells = axes.cells(&RunConfig::default());
    cells[13].trunc_width = 0.0;
    let rows: Vec<_> = cells
        .iter()
        .map(|c| run_single(c).unwrap_or_else(|e| bsde_cfft_cli::RunReport::failed(c, &e)))
        .collect();
    assert_eq!(rows.iter().filter(|r| !r.is_error()).count(), 26);
    assert_eq!(rows.iter().filter(|r| r.is_error()).count(), 1);
}

#[test]
fn single_point_sweep_equals_single_run() {
    let base = small();
    let axes = SweepAxes::parse("steps=50").unwrap();
    let rows = run_sweep(&base, &axes, 2, |_, _| {}).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].csv_line(), run_single(&base).unwrap().csv_line());
}

#[test]
fn sweep_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = bin(&[
            "--sweep",
            "steps=30,60;grid_exp=9,10;scheme=exponential,none",
            "--out",
            out.to_str().unwrap(),
            "--workers",
            "3",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("sweep.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(data_lines(&a), data_lines(&b));
    assert_eq!(data_lines(&a).len(), 1 + 8);
    assert!(a.starts_with("# bsde-cfft report schema=1"));
    assert!(a.lines().any(|l| l.starts_with("# wall_time_s")));
}

#[test]
fn zero_steps_fails_with_field_name() {
    let o = bin(&["--steps", "0"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("steps"), "{err}");
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "steps = 40\ngrid_exp = 9\nscheme = linear\n").unwrap();
    let o = bin(&["--config", conf.to_str().unwrap(), "--scheme", "none"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines = data_lines(&text);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    let get = |k: &str| row[header.iter().position(|h| *h == k).unwrap()];
    assert_eq!(get("steps"), "40");
    assert_eq!(get("grid_points"), "512");
    assert_eq!(get("scheme"), "none");
}

#[test]
fn unshifted_scheme_has_larger_boundary_error() {
    let run = |scheme| {
        run_single(&RunConfig {
            scheme,
            steps: 200,
            ..RunConfig::default()
        })
        .unwrap()
    };
    let exp = run(ShiftScheme::Exponential);
    let none = run(ShiftScheme::None);
    assert!(none.price_boundary_max.unwrap() > exp.price_boundary_max.unwrap());
}

fn count_rows(path: &Path) -> usize {
    data_lines(&std::fs::read_to_string(path).unwrap()).len() - 1
}

#[test]
fn profile_files_without_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "--steps",
        "40",
        "--grid-exp",
        "9",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta_surface.csv skipped"));
    assert_eq!(count_rows(&dir.path().join("report.csv")), 1);
    assert_eq!(count_rows(&dir.path().join("profile.csv")), 512);
    assert_eq!(count_rows(&dir.path().join("bounds.csv")), 512);
    assert!(!dir.path().join("delta_surface.csv").exists());
}

#[test]
fn delta_surface_has_one_row_per_step_and_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        steps: 30,
        grid_exp: 8,
        retain_surfaces: true,
        ..RunConfig::default()
    };
    let run = run_with_solution(&cfg).unwrap();
    let files = emit_profile(dir.path(), &cfg, &run).unwrap();
    let surface = files.delta_surface.expect("surfaces retained");
    assert_eq!(count_rows(&surface), 30 * 256);
    let text = std::fs::read_to_string(&files.profile).unwrap();
    let header = data_lines(&text)[0];
    assert_eq!(header, "spot,price,price_error,delta_z,delta_fd,delta_error");
}

#[test]
fn emit_reports_unwritable_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = small();
    let run = run_with_solution(&cfg).unwrap();
    let err = emit_profile(&blocker.join("sub"), &cfg, &run).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}

fn canonical_delta_surfaces() -> (Vec<Vec<f64>>, usize) {
    let cfg = RunConfig {
        retain_surfaces: true,
        ..RunConfig::default()
    };
    let run = run_with_solution(&cfg).unwrap();
    let grids = cfg.grids().unwrap();
    let deltas = run
        .solution
        .surfaces
        .iter()
        .map(|s| delta_from_z(&s.z, &cfg.model(), &grids.space).unwrap())
        .collect();
    (deltas, grids.space.len())
}

#[test]
fn canonical_delta_surface_in_call_range_away_from_edges() {
    // Deep out of the money the exact delta underflows to zero and the
    // solver's deltas scatter around it at the 1e-8 level.
    let (deltas, n) = canonical_delta_surfaces();
    assert_eq!(deltas.len(), 1000);
    let cut = n / 10;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in &deltas {
        for &v in &d[cut..n - cut] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    assert!(lo >= -1e-6 && hi <= 1.0 + 1e-3, "delta range [{lo:e}, {hi}]");
}

/// The outermost nodes carry the seam error of the periodic extension and
/// leave the call range; see the notes on boundary behaviour.
#[test]
#[ignore]
fn canonical_delta_surface_in_call_range_everywhere() {
    let (deltas, _) = canonical_delta_surfaces();
    for (step, d) in deltas.iter().enumerate() {
        for (i, &v) in d.iter().enumerate() {
            assert!((0.0..=1.0 + 1e-3).contains(&v), "step {step} node {i}: {v}");
        }
    }
}
