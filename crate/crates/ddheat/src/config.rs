//! Run configuration: a sectioned plain-text (TOML) document with strict
//! key checking and a resolved snapshot written next to every run's outputs,
//! so any artifact directory reproduces its run byte for byte.

use crate::error::{DdError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: MeshCfg,
    pub problem: ProblemCfg,
    pub dataset: DatasetCfg,
    pub scaling: ScalingCfg,
    pub dd: DdCfg,
    pub thresholds: ThresholdsCfg,
    pub mcmc: McmcCfg,
    pub study: StudyCfg,
    pub output: OutputCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshCfg {
    /// exphat | quarter_annulus | quarter_brick | file
    pub kind: String,
    /// Subdivisions per side (exphat).
    pub n: usize,
    /// Uniform base approximation order.
    pub order: u8,
    pub r_in: f64,
    pub r_out: f64,
    pub r_bore: f64,
    pub outer_half_width: f64,
    /// Holes as [x, y, radius] triples (quarter_brick).
    pub holes: Vec<[f64; 3]>,
    /// Target element size for the curved geometries.
    pub resolution: f64,
    /// Mesh file path (kind = "file").
    pub path: String,
}

impl Default for MeshCfg {
    fn default() -> Self {
        MeshCfg {
            kind: "exphat".into(),
            n: 20,
            order: 1,
            r_in: 0.05,
            r_out: 0.15,
            r_bore: 0.13,
            outer_half_width: 0.23,
            holes: vec![],
            resolution: 0.015,
            path: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemCfg {
    /// dd_weaker | dd_stronger | reference_linear | reference_nonlinear
    pub formulation: String,
    pub t_in: f64,
    pub t_out: f64,
    /// Constant conductivity (reference_linear).
    pub k: f64,
    /// k(T) = c0 + c1 T + c2 T^2 (reference_nonlinear, artexp).
    pub k_coeffs: [f64; 3],
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for ProblemCfg {
    fn default() -> Self {
        ProblemCfg {
            formulation: "dd_weaker".into(),
            t_in: 1000.0,
            t_out: 500.0,
            k: 1.0,
            k_coeffs: [134.0, -0.1074, 3.719e-5],
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetCfg {
    /// Search source for DD solves: oracle | csv.
    pub source: String,
    /// Dataset file (source = "csv", or input of tweak commands).
    pub path: String,
    /// Conductivity of the saturated-line oracle.
    pub oracle_k: f64,
    /// Generator kind: regular | artexp (gen-dataset).
    pub kind: String,
    pub a: f64,
    pub count_g: usize,
    pub k: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub n_levels: usize,
    /// Output path of gen-dataset / tweak-dataset.
    pub out: String,
    /// Tweak parameters.
    pub dimension: String,
    pub interval: [f64; 2],
    pub sigma: f64,
    pub threshold: f64,
}

impl Default for DatasetCfg {
    fn default() -> Self {
        DatasetCfg {
            source: "oracle".into(),
            path: String::new(),
            oracle_k: 1.0,
            kind: "regular".into(),
            a: 9.0,
            count_g: 41,
            k: 1.0,
            t_min: 400.0,
            t_max: 1100.0,
            n_levels: 10,
            out: "dataset.csv".into(),
            dimension: "gx".into(),
            interval: [-6.0, -5.0],
            sigma: 1e6,
            threshold: 2e3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingCfg {
    /// Overrides for the inverse-variance defaults; 0 keeps the default.
    pub s_t: f64,
    pub s_g: f64,
    pub s_q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdCfg {
    /// Master seed; every stochastic step derives from it.
    pub seed: Option<u64>,
    /// zero | random
    pub init: String,
    pub tol_eps_rel: f64,
    pub max_iter: usize,
    pub same_assignment: bool,
}

impl Default for DdCfg {
    fn default() -> Self {
        DdCfg {
            seed: None,
            init: "random".into(),
            tol_eps_rel: 1e-8,
            max_iter: 100,
            same_assignment: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdsCfg {
    pub c_p: f64,
    pub c_d: f64,
    pub c_s: f64,
    pub c_sa: f64,
    pub c_h: f64,
    pub n_rounds: usize,
}

impl Default for ThresholdsCfg {
    fn default() -> Self {
        ThresholdsCfg { c_p: 1.5, c_d: 4.0, c_s: 0.5, c_sa: 0.5, c_h: 4.0, n_rounds: 6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcCfg {
    pub kappa: f64,
    pub n_iter: usize,
    pub n_eval: usize,
    /// Early stop on the relative change of the mean pointwise std; 0
    /// disables it.
    pub early_stop_tol: f64,
}

impl Default for McmcCfg {
    fn default() -> Self {
        McmcCfg { kappa: 1e4, n_iter: 100, n_eval: 2, early_stop_tol: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyCfg {
    pub orders: Vec<u8>,
    pub ns: Vec<usize>,
}

impl Default for StudyCfg {
    fn default() -> Self {
        StudyCfg { orders: vec![0, 1, 2], ns: vec![5, 10, 20] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputCfg {
    pub dir: String,
    pub vtk_subdivision: usize,
}

impl Default for OutputCfg {
    fn default() -> Self {
        OutputCfg { dir: "out".into(), vtk_subdivision: 2 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DdError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| DdError::Config(format!("{}: {e}", path.display())))
    }

    /// Master seed; stochastic commands refuse to run without one.
    pub fn require_seed(&self) -> Result<u64> {
        self.dd
            .seed
            .ok_or_else(|| DdError::Config("dd.seed is required for stochastic runs".into()))
    }

    /// Creates the output directory and writes the resolved snapshot.
    pub fn prepare_output(&self) -> Result<PathBuf> {
        let dir = PathBuf::from(&self.output.dir);
        std::fs::create_dir_all(&dir)?;
        let resolved = toml::to_string_pretty(self)
            .map_err(|e| DdError::Config(format!("serialize config: {e}")))?;
        std::fs::write(dir.join("resolved-config.toml"), resolved)?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let cfg = RunConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.thresholds.c_p, 1.5);
        assert_eq!(back.mesh.kind, "exphat");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<RunConfig>("[dd]\nbogus_key = 1\n");
        assert!(err.is_err());
        let err2 = toml::from_str::<RunConfig>("[nonexistent_section]\nx = 1\n");
        assert!(err2.is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = toml::from_str("[mesh]\nn = 7\n[dd]\nseed = 3\n").unwrap();
        assert_eq!(cfg.mesh.n, 7);
        assert_eq!(cfg.mesh.order, 1);
        assert_eq!(cfg.require_seed().unwrap(), 3);
        assert!(RunConfig::default().require_seed().is_err());
    }
}
