use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use bsde_cfft_cli::emit::emit_profile;
use bsde_cfft_cli::report::write_report;
use bsde_cfft_cli::{run_sweep, run_with_solution, Args, RunConfig, RunReport};
use clap::Parser;

fn write_rows(path: Option<&Path>, rows: &[RunReport]) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut out = BufWriter::new(file);
            write_report(&mut out, rows).with_context(|| format!("writing {}", path.display()))?;
            out.flush().with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let mut out = io::stdout().lock();
            write_report(&mut out, rows).context("writing to stdout")?;
        }
    }
    Ok(())
}

fn run(args: &Args) -> anyhow::Result<()> {
    let cfg = RunConfig::from_args(args)?;
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    if let Some(axes) = cfg.sweep.as_ref().filter(|a| !a.is_empty()) {
        let workers = cfg
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let rows = run_sweep(&cfg, axes, workers, |i, row| {
            let status = if row.is_error() { "error" } else { "ok" };
            eprintln!(
                "cell {i}: steps={} L={} N={} scheme={} {status} ({:.2}s)",
                row.steps,
                row.trunc_width,
                row.grid_points,
                row.scheme,
                row.wall_time.as_secs_f64()
            );
        })?;
        let path = cfg.out.as_ref().map(|d| d.join("sweep.csv"));
        write_rows(path.as_deref(), &rows)?;
        let failed = rows.iter().filter(|r| r.is_error()).count();
        if failed > 0 {
            eprintln!("{failed} of {} cells failed; see the error column", rows.len());
        }
        return Ok(());
    }

    let run = run_with_solution(&cfg)?;
    let rows = [run.report.clone()];
    match &cfg.out {
        Some(dir) => {
            write_rows(Some(&dir.join("report.csv")), &rows)?;
            let files = emit_profile(dir, &cfg, &run)?;
            if files.delta_surface.is_none() {
                eprintln!("note: surfaces not retained; delta_surface.csv skipped (use --retain-surfaces)");
            }
        }
        None => write_rows(None, &rows)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
