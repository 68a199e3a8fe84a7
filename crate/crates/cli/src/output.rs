//! Artifact emission: atomic file writes and CSV formatting.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use cascade_core::dynamics::Trajectory;

/// Writes via a temporary file in the same directory plus rename, so a
/// crash never leaves a half-written artifact behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let mut tmp: PathBuf = path.to_path_buf();
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    tmp.set_file_name(name);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Trajectory CSV: header `t,coord_0,...,coord_{n-1}`, 17 significant
/// digits per value.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.points.first().map(|p| p.len()).unwrap_or(0);
    let mut out = String::from("t");
    for i in 0..dim {
        out.push_str(&format!(",coord_{i}"));
    }
    out.push('\n');
    for (t, p) in traj.times.iter().zip(&traj.points) {
        out.push_str(&format!("{t:.16e}"));
        for c in &p.0 {
            out.push_str(&format!(",{c:.16e}"));
        }
        out.push('\n');
    }
    out
}

/// Points CSV with a plain coordinate header.
pub fn points_csv(points: &[Vec<f64>]) -> String {
    let dim = points.first().map(|p| p.len()).unwrap_or(0);
    let mut out = String::new();
    for i in 0..dim {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("coord_{i}"));
    }
    out.push('\n');
    for p in points {
        for (i, c) in p.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{c:.16e}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use cascade_core::dynamics::IntegratorStats;
    use cascade_core::geometry::PointCoords;

    #[test]
    fn csv_has_header_and_17_significant_digits() {
        let traj = Trajectory {
            times: vec![0.0, 0.5],
            points: vec![
                PointCoords(vec![1.0 / 3.0, -2.0]),
                PointCoords(vec![0.25, 3.0]),
            ],
            stats: IntegratorStats::default(),
        };
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,coord_0,coord_1");
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.0000000000000000e0,3.3333333333333331e-1"), "{row}");
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artifact.json");
        write_atomic(&path, "{}\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "{}\n");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(leftovers, vec![std::ffi::OsString::from("artifact.json")]);
    }
}
