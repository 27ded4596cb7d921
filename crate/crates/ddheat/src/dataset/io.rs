//! CSV dataset format with a provenance sidecar.
//!
//! Header `gx,gy,qx,qy` (4D) or `T,gx,gy,qx,qy` (5D); one point per row.
//! A sidecar file `<path>.prov` records the generator, tweaks and seed.

use super::{DatasetDim, MaterialDataset, MaterialPoint, Provenance, Scaling};
use crate::error::{DdError, Result};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

pub fn write_dataset_csv(ds: &MaterialDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    match ds.dim {
        DatasetDim::Four => writeln!(out, "gx,gy,qx,qy")?,
        DatasetDim::Five => writeln!(out, "T,gx,gy,qx,qy")?,
    }
    for p in ds.points() {
        if let Some(t) = p.temperature {
            write!(out, "{t},")?;
        }
        writeln!(out, "{},{},{},{}", p.gradient[0], p.gradient[1], p.flux[0], p.flux[1])?;
    }
    out.flush()?;

    let prov_path = sidecar_path(path);
    let mut prov = BufWriter::new(std::fs::File::create(prov_path)?);
    writeln!(
        prov,
        "generator: {}",
        if ds.provenance.generator.is_empty() { "unknown" } else { &ds.provenance.generator }
    )?;
    for t in &ds.provenance.tweaks {
        writeln!(prov, "tweak: {t}")?;
    }
    if let Some(seed) = ds.provenance.seed {
        writeln!(prov, "seed: {seed}")?;
    }
    writeln!(prov, "scaling: s_t={} s_g={} s_q={}", ds.scaling.s_t, ds.scaling.s_g, ds.scaling.s_q)?;
    prov.flush()?;
    Ok(())
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".prov");
    std::path::PathBuf::from(p)
}

/// Reads a dataset CSV. Scaling comes from the sidecar when present,
/// otherwise it is recomputed as inverse pooled variance.
pub fn read_dataset_csv(path: &Path) -> Result<MaterialDataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| DdError::Dataset(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| DdError::Dataset("empty dataset file".into()))??;
    let dim = match header.trim() {
        "gx,gy,qx,qy" => DatasetDim::Four,
        "T,gx,gy,qx,qy" => DatasetDim::Five,
        other => return Err(DdError::Dataset(format!("unknown dataset header {other:?}"))),
    };
    let mut points = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| DdError::Dataset(format!("bad number {s:?} on data row {}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != dim.coords() {
            return Err(DdError::Dataset(format!(
                "row {} has {} fields, expected {}",
                lineno + 1,
                vals.len(),
                dim.coords()
            )));
        }
        let (t, rest) = match dim {
            DatasetDim::Five => (Some(vals[0]), &vals[1..]),
            DatasetDim::Four => (None, &vals[..]),
        };
        points.push(MaterialPoint {
            temperature: t,
            gradient: [rest[0], rest[1]],
            flux: [rest[2], rest[3]],
        });
    }

    let mut provenance = Provenance {
        generator: format!("file {}", path.display()),
        tweaks: vec![],
        seed: None,
    };
    let mut scaling = None;
    let prov_path = sidecar_path(path);
    if let Ok(text) = std::fs::read_to_string(&prov_path) {
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("generator: ") {
                provenance.generator = rest.to_string();
            } else if let Some(rest) = line.strip_prefix("tweak: ") {
                provenance.tweaks.push(rest.to_string());
            } else if let Some(rest) = line.strip_prefix("seed: ") {
                provenance.seed = rest.trim().parse().ok();
            } else if let Some(rest) = line.strip_prefix("scaling: ") {
                let mut s = Scaling::UNIT;
                for part in rest.split_whitespace() {
                    if let Some((key, val)) = part.split_once('=') {
                        if let Ok(v) = val.parse::<f64>() {
                            match key {
                                "s_t" => s.s_t = v,
                                "s_g" => s.s_g = v,
                                "s_q" => s.s_q = v,
                                _ => {}
                            }
                        }
                    }
                }
                scaling = Some(s);
            }
        }
    }
    let scaling = match scaling {
        Some(s) => s,
        None => super::compute_scaling(&points, dim)?,
    };
    MaterialDataset::from_points(points, scaling, dim, provenance)
}
