//! CSV and text output. Floats are written with `{:e}`, which round-trips exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::Config;
use crate::driver::Diagnostics;
use crate::grid::{flatten_index, PolarGrid};
use crate::state::{BoundaryField, ScalarField, SimState};
use crate::sweep::SweepRecord;

pub const TIMESERIES_HEADER: &str = "step,t,mass,v_x,v_y,polarization,cfl,residual_pressure,residual_transport";
pub const FIELD_HEADER: &str = "j,k,r,theta,c_tilde,c";
pub const MU_HEADER: &str = "k,theta,mu_tilde,mu";
pub const SWEEP_HEADER: &str = "k_on,dr,dt,n_r,t_steady,pol_steady,mass_drift,wall_time_s,status";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), OutputError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn meta_path(dir: &Path) -> PathBuf {
    dir.join("meta.txt")
}

pub fn timeseries_path(dir: &Path) -> PathBuf {
    dir.join("timeseries.csv")
}

pub fn field_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("field_{step:08}.csv"))
}

pub fn mu_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("mu_{step:08}.csv"))
}

pub fn sweep_path(dir: &Path) -> PathBuf {
    dir.join("sweep.csv")
}

/// Writes the config echo plus the crate version.
pub fn write_meta(config: &Config, dir: &Path) -> Result<(), OutputError> {
    let text = config.to_text();
    write_file(&meta_path(dir), |w| {
        writeln!(w, "# crawlfv {}", env!("CARGO_PKG_VERSION"))?;
        w.write_all(text.as_bytes())
    })
}

pub fn write_timeseries(diag: &Diagnostics, dir: &Path) -> Result<(), OutputError> {
    write_file(&timeseries_path(dir), |w| {
        writeln!(w, "{TIMESERIES_HEADER}")?;
        for r in &diag.rows {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.step, r.t, r.mass, r.v_x, r.v_y, r.polarization, r.cfl, r.residual_pressure, r.residual_transport
            )?;
        }
        Ok(())
    })
}

/// Writes `field_<step>.csv` and `mu_<step>.csv`.
pub fn write_snapshot(state: &SimState, grid: &PolarGrid, step: usize, dir: &Path) -> Result<(), OutputError> {
    write_file(&field_path(dir, step), |w| {
        writeln!(w, "{FIELD_HEADER}")?;
        for j in 0..grid.n_r() {
            let r = grid.r_center(j);
            for k in 0..grid.n_theta() {
                let ct = state.c_tilde.get(j, k);
                writeln!(w, "{j},{k},{:e},{:e},{:e},{:e}", r, grid.theta_center(k), ct, ct / r)?;
            }
        }
        Ok(())
    })?;
    write_file(&mu_path(dir, step), |w| {
        writeln!(w, "{MU_HEADER}")?;
        let r = grid.r_max();
        for (k, &m) in state.mu_tilde.values().iter().enumerate() {
            writeln!(w, "{k},{:e},{:e},{:e}", grid.theta_center(k), m, m / r)?;
        }
        Ok(())
    })
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    let first = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    if first != header {
        return Err(OutputError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{header}`"),
        });
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if cols.len() != width {
            return Err(OutputError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected {width} columns, got {}", cols.len()),
            });
        }
        rows.push((i + 1, cols));
    }
    Ok(rows)
}

fn parse_col<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T, OutputError>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| OutputError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("`{s}`: {e}"),
    })
}

/// Reads `c̃` from a field snapshot written for `grid`.
pub fn read_field_snapshot(path: &Path, grid: &PolarGrid) -> Result<ScalarField, OutputError> {
    let rows = read_rows(path, FIELD_HEADER)?;
    let mut values = vec![f64::NAN; grid.n_cells()];
    let mut seen = vec![false; grid.n_cells()];
    for (line, cols) in rows {
        let j: usize = parse_col(path, line, &cols[0])?;
        let k: usize = parse_col(path, line, &cols[1])?;
        if j >= grid.n_r() {
            return Err(OutputError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("j = {j} out of range 0..{}", grid.n_r()),
            });
        }
        let idx = flatten_index(j, k, grid.n_theta()).map_err(|e| OutputError::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        values[idx] = parse_col(path, line, &cols[4])?;
        seen[idx] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(OutputError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("no value for cell {missing}"),
        });
    }
    Ok(ScalarField::from_values(grid, values).expect("sized to the grid"))
}

/// Reads `μ̃` from a boundary snapshot written for `grid`.
pub fn read_mu_snapshot(path: &Path, grid: &PolarGrid) -> Result<BoundaryField, OutputError> {
    let rows = read_rows(path, MU_HEADER)?;
    let n = grid.n_theta();
    let mut values = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (line, cols) in rows {
        let k: usize = parse_col(path, line, &cols[0])?;
        if k >= n {
            return Err(OutputError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("k = {k} out of range 0..{n}"),
            });
        }
        values[k] = parse_col(path, line, &cols[2])?;
        seen[k] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(OutputError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("no value for k = {missing}"),
        });
    }
    Ok(BoundaryField::new(values))
}

pub fn write_sweep(records: &[SweepRecord], dir: &Path) -> Result<(), OutputError> {
    write_file(&sweep_path(dir), |w| {
        writeln!(w, "{SWEEP_HEADER}")?;
        for r in records {
            let n_r = r.n_r.map_or_else(|| "none".to_string(), |n| n.to_string());
            let ts = r.t_steady.map_or_else(|| "none".to_string(), |t| format!("{t:e}"));
            writeln!(
                w,
                "{:e},{:e},{:e},{},{},{:e},{:e},{:e},{}",
                r.k_on,
                r.dr,
                r.dt,
                n_r,
                ts,
                r.pol_steady,
                r.mass_drift,
                r.wall_time_s,
                r.status.label()
            )?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::polarised_state;

    #[test]
    fn snapshot_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let grid = PolarGrid::new(0.5, 1.5, 4, 7).unwrap();
        let mut s = polarised_state(&grid);
        s.c_tilde.values_mut()[3] = 1.0 / 3.0;
        s.mu_tilde.values_mut()[2] = std::f64::consts::PI * 1e-17;
        write_snapshot(&s, &grid, 12, dir.path()).unwrap();
        let c = read_field_snapshot(&field_path(dir.path(), 12), &grid).unwrap();
        let m = read_mu_snapshot(&mu_path(dir.path(), 12), &grid).unwrap();
        assert_eq!(c.values(), s.c_tilde.values());
        assert_eq!(m.values(), s.mu_tilde.values());
    }

    #[test]
    fn header_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "a,b\n1,2\n").unwrap();
        let grid = PolarGrid::new(0.5, 1.5, 2, 3).unwrap();
        assert!(matches!(read_mu_snapshot(&p, &grid), Err(OutputError::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_entries_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mu.csv");
        fs::write(&p, format!("{MU_HEADER}\n0,1,1,1\n")).unwrap();
        let grid = PolarGrid::new(0.5, 1.5, 2, 3).unwrap();
        assert!(read_mu_snapshot(&p, &grid).is_err());
    }

    #[test]
    fn timeseries_header_exact() {
        let dir = tempfile::tempdir().unwrap();
        write_timeseries(&Diagnostics::default(), dir.path()).unwrap();
        let text = fs::read_to_string(timeseries_path(dir.path())).unwrap();
        assert_eq!(text.lines().next(), Some(TIMESERIES_HEADER));
    }
}
