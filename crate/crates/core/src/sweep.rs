//! Parameter sweeps over `k_on × dr × dt`.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::Config;
use crate::driver::{run_simulation, OutputMode};
use crate::output::{self, OutputError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Output(#[from] OutputError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepStatus {
    Steady,
    /// Reached `t_max` without meeting the steady-state criterion.
    NotSteady,
    /// Not run, e.g. `dr` does not divide the annulus width.
    Skipped(String),
    Failed(String),
}

impl SweepStatus {
    /// Single-token label for CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            SweepStatus::Steady => "steady",
            SweepStatus::NotSteady => "not_steady",
            SweepStatus::Skipped(_) => "skipped",
            SweepStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub k_on: f64,
    pub dr: f64,
    pub dt: f64,
    pub n_r: Option<usize>,
    pub t_steady: Option<f64>,
    /// `|v|` at the steady time, or at `t_max` if not steady.
    pub pol_steady: f64,
    pub mass_drift: f64,
    pub wall_time_s: f64,
    pub status: SweepStatus,
}

/// Number of rings for spacing `dr`, if it divides the annulus width.
pub fn rings_for_spacing(r_min: f64, r_max: f64, dr: f64) -> Option<usize> {
    let ratio = (r_max - r_min) / dr;
    let n = ratio.round();
    if n >= 1.0 && (ratio - n).abs() <= 1e-9 * ratio.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

/// Runs a single sweep point; never fails, errors land in the status.
pub fn run_point(base: &Config, k_on: f64, dr: f64, dt: f64, output_root: Option<&Path>) -> SweepRecord {
    let mut rec = SweepRecord {
        k_on,
        dr,
        dt,
        n_r: None,
        t_steady: None,
        pol_steady: f64::NAN,
        mass_drift: f64::NAN,
        wall_time_s: 0.0,
        status: SweepStatus::Skipped(String::new()),
    };
    let Some(n_r) = rings_for_spacing(base.r_min, base.r_max, dr) else {
        rec.status = SweepStatus::Skipped(format!("dr = {dr} does not divide r_max - r_min"));
        return rec;
    };
    rec.n_r = Some(n_r);
    let mut cfg = base.clone();
    cfg.n_r = n_r;
    cfg.dt = dt;
    cfg.params.k_on = k_on;
    let mode = match output_root {
        Some(root) => {
            cfg.output_dir = root.join(format!("kon{k_on:e}_dr{dr:e}_dt{dt:e}"));
            OutputMode::Timeseries
        }
        None => OutputMode::None,
    };
    let start = Instant::now();
    let result = run_simulation(&cfg, mode);
    rec.wall_time_s = start.elapsed().as_secs_f64();
    match result {
        Ok(out) => {
            rec.t_steady = out.report.t_steady;
            rec.pol_steady = out.report.polarization;
            rec.mass_drift = out.report.max_mass_drift;
            rec.status = if rec.t_steady.is_some() {
                SweepStatus::Steady
            } else {
                SweepStatus::NotSteady
            };
        }
        Err(e) => rec.status = SweepStatus::Failed(e.to_string()),
    }
    rec
}

/// Runs every combination of the three lists in parallel. Records come back
/// sorted by `(k_on, dr, dt)` regardless of completion order.
pub fn run_sweep(
    base: &Config,
    dr_list: &[f64],
    dt_list: &[f64],
    kon_list: &[f64],
    output_root: Option<&Path>,
) -> Result<Vec<SweepRecord>, SweepError> {
    let mut points = Vec::with_capacity(dr_list.len() * dt_list.len() * kon_list.len());
    for &k_on in kon_list {
        for &dr in dr_list {
            for &dt in dt_list {
                points.push((k_on, dr, dt));
            }
        }
    }
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(base.sweep_workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let mut records: Vec<SweepRecord> = pool.install(|| {
        points
            .par_iter()
            .map(|&(k_on, dr, dt)| run_point(base, k_on, dr, dt, output_root))
            .collect()
    });
    records.sort_by(|a, b| {
        a.k_on
            .total_cmp(&b.k_on)
            .then(a.dr.total_cmp(&b.dr))
            .then(a.dt.total_cmp(&b.dt))
    });
    Ok(records)
}

/// Sweep driven entirely by the config lists; writes `sweep.csv` into `output_dir`.
pub fn run_configured_sweep(config: &Config) -> Result<Vec<SweepRecord>, SweepError> {
    let root = config.output_dir.clone();
    let per_run = config.sweep_run_outputs.then_some(root.as_path());
    let records = run_sweep(config, &config.dr_list, &config.dt_list, &config.kon_list, per_run)?;
    output::write_sweep(&records, &root)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_count() {
        assert_eq!(rings_for_spacing(0.5, 1.5, 0.025), Some(40));
        assert_eq!(rings_for_spacing(0.5, 1.5, 0.02), Some(50));
        assert_eq!(rings_for_spacing(0.5, 1.5, 0.3), None);
    }

    #[test]
    fn empty_lists_give_no_records() {
        let base = Config::default();
        assert!(run_sweep(&base, &[], &[0.01], &[0.3], None).unwrap().is_empty());
        assert!(run_sweep(&base, &[0.1], &[0.01], &[], None).unwrap().is_empty());
    }

    #[test]
    fn records_sorted_and_skips_reported() {
        let base = Config {
            n_theta: 8,
            t_max: 0.05,
            sweep_workers: 2,
            ..Config::default()
        };
        let recs = run_sweep(&base, &[0.5, 0.3, 0.25], &[0.01, 0.005], &[0.3], None).unwrap();
        assert_eq!(recs.len(), 6);
        let keys: Vec<(f64, f64)> = recs.iter().map(|r| (r.dr, r.dt)).collect();
        assert_eq!(
            keys,
            vec![(0.25, 0.005), (0.25, 0.01), (0.3, 0.005), (0.3, 0.01), (0.5, 0.005), (0.5, 0.01)]
        );
        assert!(recs.iter().filter(|r| r.dr == 0.3).all(|r| r.status.label() == "skipped"));
        assert!(recs
            .iter()
            .filter(|r| r.dr != 0.3)
            .all(|r| r.status == SweepStatus::NotSteady && r.pol_steady.is_finite()));
    }
}
