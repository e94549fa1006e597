//! Cartesian parameter sweeps with ordered, incremental row emission.

use std::collections::BTreeMap;
use std::sync::mpsc;

use bsde_cfft::boundary_control::ShiftScheme;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::report::{run_single, RunReport};

/// Axis values; an empty axis keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepAxes {
    pub steps: Vec<usize>,
    pub trunc_width: Vec<f64>,
    pub grid_exp: Vec<u32>,
    pub scheme: Vec<ShiftScheme>,
}

fn parse_list<T: std::str::FromStr>(axis: &str, values: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse()
                .map_err(|e: T::Err| CliError::Sweep(format!("{axis}: cannot parse {v:?}: {e}")))
        })
        .collect()
}

impl SweepAxes {
    /// Parses `axis=v1,v2;axis=...`. Axis names: `steps` (or `n`),
    /// `trunc_width` (or `width`, `L`), `grid_exp`, `scheme`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut axes = Self::default();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, values) = part
                .split_once('=')
                .ok_or_else(|| CliError::Sweep(format!("expected axis=values, got {part:?}")))?;
            let name = name.trim();
            match name.to_ascii_lowercase().replace('-', "_").as_str() {
                "steps" | "n" | "n_steps" => axes.steps = parse_list(name, values)?,
                "trunc_width" | "width" | "l" => axes.trunc_width = parse_list(name, values)?,
                "grid_exp" => axes.grid_exp = parse_list(name, values)?,
                "scheme" => axes.scheme = parse_list(name, values)?,
                _ => return Err(CliError::Sweep(format!("unknown axis {name:?}"))),
            }
        }
        if axes.is_empty() {
            return Err(CliError::Sweep("no axes given".into()));
        }
        Ok(axes)
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty() && self.trunc_width.is_empty() && self.grid_exp.is_empty() && self.scheme.is_empty()
    }

    /// Cells in axis order: steps, then width, then grid size, then scheme.
    pub fn cells(&self, base: &RunConfig) -> Vec<RunConfig> {
        fn or_base<T: Clone>(axis: &[T], base: T) -> Vec<T> {
            if axis.is_empty() {
                vec![base]
            } else {
                axis.to_vec()
            }
        }
        let mut out = Vec::new();
        for &steps in &or_base(&self.steps, base.steps) {
            for &width in &or_base(&self.trunc_width, base.trunc_width) {
                for &exp in &or_base(&self.grid_exp, base.grid_exp) {
                    for &scheme in &or_base(&self.scheme, base.scheme) {
                        out.push(RunConfig {
                            steps,
                            trunc_width: width,
                            grid_exp: exp,
                            scheme,
                            sweep: None,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Runs every cell, at most `workers` at a time, and hands rows to `emit` in
/// cell order as soon as each prefix is complete. A failing cell yields an
/// error row and the sweep carries on.
pub fn run_sweep(
    base: &RunConfig,
    axes: &SweepAxes,
    workers: usize,
    mut emit: impl FnMut(usize, &RunReport),
) -> Result<Vec<RunReport>> {
    if axes.is_empty() {
        return Err(CliError::Sweep("no axes given".into()));
    }
    let cells = axes.cells(base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Sweep(format!("cannot start worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel();
    for (i, cell) in cells.iter().cloned().enumerate() {
        let tx = tx.clone();
        pool.spawn(move || {
            let row = match run_single(&cell) {
                Ok(r) => r,
                Err(e) => RunReport::failed(&cell, &e),
            };
            // the receiver outlives every task
            let _ = tx.send((i, row));
        });
    }
    drop(tx);

    let mut pending = BTreeMap::new();
    let mut rows = Vec::with_capacity(cells.len());
    for (i, row) in rx {
        pending.insert(i, row);
        while let Some(row) = pending.remove(&rows.len()) {
            emit(rows.len(), &row);
            rows.push(row);
        }
    }
    Ok(rows)
}
