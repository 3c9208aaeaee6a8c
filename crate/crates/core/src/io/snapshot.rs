//! Snapshots: `<name>.csv` holding one particle per row (x, y, z, vx, vy,
//! vz, w) after a `# config_hash=…` line, and `<name>.json` with the time,
//! the charge and the run constants.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChargeState, EnergyReference, ParticleEnsemble, SimState, Softening, Vec3};

pub const SNAPSHOT_HEADER: &str = "x,y,z,vx,vy,vz,w";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub config_hash: String,
    pub t: f64,
    pub step: usize,
    pub n_particles: usize,
    pub charge: ChargeState,
    pub softening: Softening,
    pub reference: EnergyReference,
    pub particles_file: String,
}

/// Writes the pair of files and returns the path of the sidecar.
pub fn write_snapshot(dir: &Path, name: &str, state: &SimState, step: usize, config_hash: &str) -> Result<PathBuf> {
    let csv_path = dir.join(format!("{name}.csv"));
    let meta_path = dir.join(format!("{name}.json"));
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e: std::io::Error| Error::io(&csv_path, e);
    writeln!(w, "# config_hash={config_hash}").map_err(io)?;
    writeln!(w, "{SNAPSHOT_HEADER}").map_err(io)?;
    let e = &state.ensemble;
    for ((x, v), m) in e.positions.iter().zip(&e.velocities).zip(&e.weights) {
        writeln!(w, "{},{},{},{},{},{},{}", x.x, x.y, x.z, v.x, v.y, v.z, m).map_err(io)?;
    }
    w.flush().map_err(io)?;
    let meta = SnapshotMeta {
        config_hash: config_hash.to_string(),
        t: state.t,
        step,
        n_particles: e.len(),
        charge: state.charge,
        softening: state.softening,
        reference: state.reference,
        particles_file: format!("{name}.csv"),
    };
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(meta_path)
}

/// Loads a snapshot from its sidecar path; the state equals the one written.
pub fn load_snapshot(meta_path: &Path) -> Result<(SimState, SnapshotMeta)> {
    let text = std::fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let meta: SnapshotMeta = serde_json::from_str(&text)?;
    let dir = meta_path.parent().unwrap_or_else(|| Path::new("."));
    let csv_path = dir.join(&meta.particles_file);
    let file = std::fs::File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut positions = Vec::with_capacity(meta.n_particles);
    let mut velocities = Vec::with_capacity(meta.n_particles);
    let mut weights = Vec::with_capacity(meta.n_particles);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&csv_path, e))?;
        if i == 0 {
            if line.strip_prefix("# config_hash=") != Some(meta.config_hash.as_str()) {
                return Err(Error::Series(format!("{} does not match its sidecar hash", csv_path.display())));
            }
            continue;
        }
        if i == 1 {
            if line != SNAPSHOT_HEADER {
                return Err(Error::Series(format!("unexpected snapshot header `{line}`")));
            }
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|_| Error::Series(format!("bad number `{s}` on line {}", i + 1))))
            .collect::<Result<_>>()?;
        if vals.len() != 7 {
            return Err(Error::Series(format!("line {} has {} fields, expected 7", i + 1, vals.len())));
        }
        positions.push(Vec3::new(vals[0], vals[1], vals[2]));
        velocities.push(Vec3::new(vals[3], vals[4], vals[5]));
        weights.push(vals[6]);
    }
    if positions.len() != meta.n_particles {
        return Err(Error::Series(format!(
            "{} holds {} particles, sidecar says {}",
            csv_path.display(),
            positions.len(),
            meta.n_particles
        )));
    }
    let ens = ParticleEnsemble::new(positions, velocities, weights)?;
    let state = SimState::from_parts(meta.t, ens, meta.charge, meta.softening, meta.reference)?;
    Ok((state, meta))
}

/// Sidecars in `dir` named `snapshot_*.json`, sorted by stored time.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("snapshot_") && name.ends_with(".json") {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let meta: SnapshotMeta = serde_json::from_str(&text)?;
            out.push((meta.t, p));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}
