//! CSV writers. Every number is written as `{:.16e}` (17 significant digits),
//! so reruns are byte-identical and values round-trip exactly.

use std::fs;
use std::path::{Path, PathBuf};

use pulsecal_core::analysis::{PhaseComparison, SweepGrid};
use pulsecal_core::{AwgSignal, CalibrationResult, FineTrajectory};

use crate::error::{CliError, Result};

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Output directory, created on first use.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_rows<I>(&self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// `t,value`
    pub fn trajectory(&self, name: &str, traj: &FineTrajectory) -> Result<PathBuf> {
        self.series(name, traj, traj.values())
    }

    /// `t,value` for any per-grid-point series on the trajectory's grid.
    pub fn series(&self, name: &str, grid: &FineTrajectory, values: &[f64]) -> Result<PathBuf> {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![num(grid.time(i)), num(*v)]);
        self.write_rows(name, &["t", "value"], rows)
    }

    /// `k,t_start,value`
    pub fn awg(&self, name: &str, r: &AwgSignal) -> Result<PathBuf> {
        let rows = r
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| vec![k.to_string(), num(r.start_time(k)), num(*v)]);
        self.write_rows(name, &["k", "t_start", "value"], rows)
    }

    /// `iteration,sampled_error,continuous_error`
    pub fn history(&self, name: &str, res: &CalibrationResult) -> Result<PathBuf> {
        let rows = res.history.iter().map(|h| {
            vec![
                h.index.to_string(),
                num(h.sampled_error),
                num(h.continuous_error),
            ]
        });
        self.write_rows(
            name,
            &["iteration", "sampled_error", "continuous_error"],
            rows,
        )
    }

    /// Stored AWG snapshots in long form: `iteration,k,t_start,value`.
    pub fn snapshots(&self, name: &str, res: &CalibrationResult) -> Result<PathBuf> {
        let rows = res.history.iter().flat_map(|h| {
            h.awg_snapshot.iter().flat_map(move |r| {
                r.values().iter().enumerate().map(move |(k, v)| {
                    vec![
                        h.index.to_string(),
                        k.to_string(),
                        num(r.start_time(k)),
                        num(*v),
                    ]
                })
            })
        });
        self.write_rows(name, &["iteration", "k", "t_start", "value"], rows)
    }

    /// `omega,phase_true,phase_model,difference`
    pub fn phase(&self, name: &str, pc: &PhaseComparison) -> Result<PathBuf> {
        let rows = (0..pc.frequencies.len()).map(|i| {
            vec![
                num(pc.frequencies[i]),
                num(pc.phase_true[i]),
                num(pc.phase_model[i]),
                num(pc.difference[i]),
            ]
        });
        self.write_rows(
            name,
            &["omega", "phase_true", "phase_model", "difference"],
            rows,
        )
    }

    /// Header row holds the T2 axis, first column the T1 axis.
    pub fn grid(&self, name: &str, grid: &SweepGrid, values: &[Vec<f64>]) -> Result<PathBuf> {
        let mut header = vec!["T1\\T2".to_string()];
        header.extend(grid.t2_values.iter().map(|t| num(*t)));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = grid.t1_values.iter().zip(values).map(|(t1, row)| {
            let mut out = vec![num(*t1)];
            out.extend(row.iter().map(|v| num(*v)));
            out
        });
        self.write_rows(name, &header_refs, rows)
    }
}
