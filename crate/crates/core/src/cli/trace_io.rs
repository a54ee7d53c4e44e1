//! JSON-lines traces: a header line, one line per iteration, a result line.
//! P-VDAMP snapshots go to a sibling `<trace>.snapshots/` directory as
//! float64 arrays so state-evolution checks can run offline.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::aliasing::TauMap;
use crate::array::C64;
use crate::error::{Error, Result};
use crate::io::{load_real, save_real};
use crate::solver::{ReconResult, Snapshot, StopReason};
use crate::wavelet::{SubbandMap, WaveletCoeffs};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header { algo: String, shape: (usize, usize), levels: usize, snapshots: Option<String> },
    Iteration { record: serde_json::Value, snapshot: Option<SnapshotFiles> },
    Result { iterations_run: usize, stop_reason: StopReason },
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFiles {
    r: String,
    tau: String,
}

fn snapshot_dir(trace: &Path) -> PathBuf {
    let mut s = trace.with_extension("").into_os_string();
    s.push(".snapshots");
    s.into()
}

/// Complex vector as an `(n, 2)` float64 array.
pub(crate) fn pack_complex(v: &[C64]) -> Array2<f64> {
    Array2::from_shape_fn((v.len(), 2), |(i, k)| if k == 0 { v[i].re } else { v[i].im })
}

pub(crate) fn unpack_complex(a: &Array2<f64>) -> Result<Vec<C64>> {
    if a.ncols() != 2 {
        return Err(Error::shape("packed complex array needs a trailing axis of 2"));
    }
    Ok(a.axis_iter(Axis(0)).map(|row| C64::new(row[0], row[1])).collect())
}

/// Writes the trace and returns every file it created.
pub fn write_trace(path: &Path, algo: &str, levels: usize, result: &ReconResult) -> Result<Vec<PathBuf>> {
    let mut written = vec![path.to_path_buf()];
    let dir = snapshot_dir(path);
    let snaps = &result.trace.snapshots;
    if !snaps.is_empty() {
        fs::create_dir_all(&dir)?;
    }
    let rel_dir = dir.file_name().map(|d| d.to_string_lossy().into_owned());
    let mut out = BufWriter::new(fs::File::create(path)?);
    let header = Line::Header {
        algo: algo.to_string(),
        shape: result.x_hat.shape(),
        levels,
        snapshots: if snaps.is_empty() { None } else { rel_dir.clone() },
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for (k, rec) in result.trace.records.iter().enumerate() {
        let snapshot = match snaps.get(k) {
            Some(s) => {
                let (r, tau) = (format!("r_{k:03}"), format!("tau_{k:03}"));
                save_real(dir.join(&r), &pack_complex(&s.r.data))?;
                save_real(dir.join(&tau), &Array1::from_vec(s.tau.tau.clone()))?;
                for name in [&r, &tau] {
                    written.push(dir.join(format!("{name}.json")));
                    written.push(dir.join(format!("{name}.bin")));
                }
                let d = rel_dir.as_deref().unwrap_or_default();
                Some(SnapshotFiles { r: format!("{d}/{r}"), tau: format!("{d}/{tau}") })
            }
            None => None,
        };
        let line = Line::Iteration { record: serde_json::to_value(rec)?, snapshot };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    let tail = Line::Result { iterations_run: result.iterations_run, stop_reason: result.stop_reason };
    writeln!(out, "{}", serde_json::to_string(&tail)?)?;
    out.flush()?;
    Ok(written)
}

pub struct LoadedTrace {
    pub algo: String,
    pub map: Arc<SubbandMap>,
    pub records: Vec<serde_json::Value>,
    pub snapshots: Vec<Snapshot>,
}

pub fn read_trace(path: &Path) -> Result<LoadedTrace> {
    let base = path.parent().unwrap_or(Path::new("."));
    let bad = |reason: String| Error::Format { path: path.to_path_buf(), reason };
    let mut lines = BufReader::new(fs::File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| bad("empty trace".into()))??;
    let (algo, map) = match serde_json::from_str(&first)? {
        Line::Header { algo, shape, levels, .. } => (algo, Arc::new(SubbandMap::new(shape, levels)?)),
        _ => return Err(bad("first line is not a header".into())),
    };
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Line::Iteration { record, snapshot } = serde_json::from_str(&line)? {
            records.push(record);
            if let Some(files) = snapshot {
                let r = unpack_complex(&load_real(base.join(&files.r))?.into_dimensionality().map_err(|e| bad(e.to_string()))?)?;
                let tau = load_real(base.join(&files.tau))?.into_raw_vec_and_offset().0;
                if r.len() != map.len() || tau.len() != map.len() {
                    return Err(bad(format!("snapshot length does not match a {:?} map", map.shape())));
                }
                snapshots.push(Snapshot {
                    r: WaveletCoeffs { data: r, map: map.clone() },
                    tau: TauMap { tau, map: map.clone(), clamped: 0 },
                });
            }
        }
    }
    Ok(LoadedTrace { algo, map, records, snapshots })
}
