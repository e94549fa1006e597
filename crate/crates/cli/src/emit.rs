//! Plot data files written next to a report.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bsde_cfft::analytics::{bound_curve, delta_from_fd, delta_from_z, BoundInputs};
use bsde_cfft::solver::init_terminal;

use crate::config::RunConfig;
use crate::error::{config_err, CliError, Result};
use crate::report::{metadata_line, RunOutput};

/// Files produced by [`emit_profile`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emitted {
    pub profile: PathBuf,
    pub bounds: PathBuf,
    /// `None` unless surfaces were retained.
    pub delta_surface: Option<PathBuf>,
}

struct Sink {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Sink {
    fn create(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let mut sink = Self {
            path,
            out: BufWriter::new(file),
        };
        sink.line(&metadata_line())?;
        Ok(sink)
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}").map_err(|source| CliError::Io {
            path: self.path.clone(),
            source,
        })
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.out.flush().map_err(|source| CliError::Io {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.path)
    }
}

fn opt(v: Option<&f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `profile.csv`, `bounds.csv` and, with retained surfaces,
/// `delta_surface.csv` into `dir`.
pub fn emit_profile(dir: &Path, cfg: &RunConfig, run: &RunOutput) -> Result<Emitted> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let model = cfg.model();
    let grids = cfg.grids()?;
    let solver_err = |context: &str| {
        let context = context.to_string();
        move |source| CliError::Solver { context, source }
    };

    let p = &run.profile;
    let s = run.solution.initial();
    let fd = delta_from_fd(&s.y, &grids.space).map_err(solver_err("finite-difference delta"))?;
    let mut sink = Sink::create(dir.join("profile.csv"))?;
    sink.line("spot,price,price_error,delta_z,delta_fd,delta_error")?;
    for (i, fd) in fd.iter().enumerate() {
        sink.line(&format!(
            "{},{},{},{},{},{}",
            p.grid_x[i],
            p.price[i],
            opt(p.price_error.get(i)),
            p.delta[i],
            fd,
            opt(p.delta_error.get(i)),
        ))?;
    }
    let profile = sink.finish()?;

    let terminal = init_terminal(&cfg.problem(), &model, &grids).map_err(solver_err("terminal values"))?;
    let first = run
        .solution
        .shift_history
        .last()
        .ok_or_else(|| config_err("steps", "no step was taken"))?;
    let boundary = cfg.boundary()?;
    let inputs = BoundInputs::measure(
        &terminal.y,
        &first.params,
        &boundary,
        &grids.space,
        BoundInputs::DEFAULT_EPS,
        BoundInputs::DEFAULT_M,
    )
    .map_err(solver_err("bound inputs"))?;
    let curves = bound_curve(&inputs, &boundary, &model, &grids);
    let mut sink = Sink::create(dir.join("bounds.csv"))?;
    sink.line(&format!(
        "# f_bar={} f_hat={} eps={} m={}",
        inputs.f_bar, inputs.f_hat, inputs.eps, inputs.m
    ))?;
    sink.line("x,y_bound,z_bound,plain")?;
    for i in 0..curves.x.len() {
        sink.line(&format!(
            "{},{},{},{}",
            curves.x[i], curves.y_bound[i], curves.z_bound[i], curves.plain
        ))?;
    }
    let bounds = sink.finish()?;

    let delta_surface = if cfg.retain_surfaces {
        let mut sink = Sink::create(dir.join("delta_surface.csv"))?;
        sink.line("t,spot,delta")?;
        for surf in &run.solution.surfaces {
            let d = delta_from_z(&surf.z, &model, &grids.space).map_err(solver_err("delta surface"))?;
            for (x, d) in grids.space.points().iter().zip(&d) {
                sink.line(&format!("{},{},{}", surf.t, x.exp(), d))?;
            }
        }
        Some(sink.finish()?)
    } else {
        None
    };

    Ok(Emitted {
        profile,
        bounds,
        delta_surface,
    })
}
