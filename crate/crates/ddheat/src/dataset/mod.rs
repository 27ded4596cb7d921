//! Material datasets: generation, controlled corruption, scaling, exact
//! nearest-neighbor search and the saturated-dataset line oracle.

pub mod artexp;
mod io;
mod kdtree;
mod line;

pub use io::{read_dataset_csv, write_dataset_csv};
pub use line::{line_projection, scaled_line_projection, LineProjection};

use crate::error::{DdError, Result};
use kdtree::KdTree;
use rand::SeedableRng;
use rand_distr::Distribution;

/// One observed material state. `temperature` is present only in 5D
/// datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialPoint {
    pub temperature: Option<f64>,
    pub gradient: [f64; 2],
    pub flux: [f64; 2],
}

/// Positive weights making the phase-space distance unitless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub s_t: f64,
    pub s_g: f64,
    pub s_q: f64,
}

impl Scaling {
    pub const UNIT: Scaling = Scaling { s_t: 1.0, s_g: 1.0, s_q: 1.0 };

    pub fn validate(&self) -> Result<()> {
        if self.s_t > 0.0 && self.s_g > 0.0 && self.s_q > 0.0 {
            Ok(())
        } else {
            Err(DdError::Dataset(format!("scaling weights must be positive: {self:?}")))
        }
    }
}

/// Dataset dimensionality: with or without the temperature coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetDim {
    Four,
    Five,
}

impl DatasetDim {
    pub fn coords(self) -> usize {
        match self {
            DatasetDim::Four => 4,
            DatasetDim::Five => 5,
        }
    }
}

/// Coordinate of a dataset dimension, used by range removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    T,
    Gx,
    Gy,
    Qx,
    Qy,
}

impl Dimension {
    pub fn parse(name: &str) -> Result<Dimension> {
        Ok(match name {
            "T" | "t" => Dimension::T,
            "gx" => Dimension::Gx,
            "gy" => Dimension::Gy,
            "qx" => Dimension::Qx,
            "qy" => Dimension::Qy,
            other => {
                return Err(DdError::Dataset(format!(
                    "unknown dimension {other:?} (expected T, gx, gy, qx, qy)"
                )))
            }
        })
    }

    fn value(self, p: &MaterialPoint) -> f64 {
        match self {
            Dimension::T => p.temperature.unwrap_or(f64::NAN),
            Dimension::Gx => p.gradient[0],
            Dimension::Gy => p.gradient[1],
            Dimension::Qx => p.flux[0],
            Dimension::Qy => p.flux[1],
        }
    }
}

/// Generation history carried next to the data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub generator: String,
    pub tweaks: Vec<String>,
    pub seed: Option<u64>,
}

/// Field values searched against the dataset.
#[derive(Debug, Clone, Copy)]
pub struct Query {
    pub temperature: Option<f64>,
    pub gradient: [f64; 2],
    pub flux: [f64; 2],
}

/// An immutable dataset with a spatial index over scaled coordinates.
#[derive(Debug, Clone)]
pub struct MaterialDataset {
    points: Vec<MaterialPoint>,
    pub scaling: Scaling,
    pub dim: DatasetDim,
    pub provenance: Provenance,
    index: KdTree,
}

impl MaterialDataset {
    /// Builds a dataset with the given scaling; points must share one
    /// dimensionality and be finite.
    pub fn from_points(
        points: Vec<MaterialPoint>,
        scaling: Scaling,
        dim: DatasetDim,
        provenance: Provenance,
    ) -> Result<MaterialDataset> {
        if points.is_empty() {
            return Err(DdError::Dataset("dataset is empty".into()));
        }
        scaling.validate()?;
        for (i, p) in points.iter().enumerate() {
            let has_t = p.temperature.is_some();
            if has_t != (dim == DatasetDim::Five) {
                return Err(DdError::Dataset(format!(
                    "point {i} dimensionality does not match dataset ({dim:?})"
                )));
            }
            let finite = p.gradient.iter().chain(&p.flux).all(|v| v.is_finite())
                && p.temperature.is_none_or(|t| t.is_finite());
            if !finite {
                return Err(DdError::Dataset(format!("point {i} has non-finite components")));
            }
        }
        let index = KdTree::build(dim.coords(), scaled_coords(&points, scaling, dim));
        Ok(MaterialDataset {
            points,
            scaling,
            dim,
            provenance,
            index,
        })
    }

    /// Same points re-indexed under a different scaling.
    pub fn with_scaling(&self, scaling: Scaling) -> Result<MaterialDataset> {
        MaterialDataset::from_points(self.points.clone(), scaling, self.dim, self.provenance.clone())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[MaterialPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &MaterialPoint {
        &self.points[i]
    }

    fn query_coords(&self, q: &Query) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.dim.coords());
        if self.dim == DatasetDim::Five {
            c.push(self.scaling.s_t.sqrt() * q.temperature.unwrap_or(0.0));
        }
        let sg = self.scaling.s_g.sqrt();
        let sq = self.scaling.s_q.sqrt();
        c.push(sg * q.gradient[0]);
        c.push(sg * q.gradient[1]);
        c.push(sq * q.flux[0]);
        c.push(sq * q.flux[1]);
        c
    }

    /// Exact nearest point under the scaled metric; ties break to the lowest
    /// point index.
    pub fn nearest(&self, q: &Query) -> (usize, &MaterialPoint, f64) {
        let coords = self.query_coords(q);
        let (idx, dist) = self.index.nearest(&coords).expect("dataset is never empty");
        (idx, &self.points[idx], dist)
    }

    /// Brute-force reference search; used by tests and the acceptance suite.
    pub fn nearest_linear(&self, q: &Query) -> (usize, f64) {
        let coords = self.query_coords(q);
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, _) in self.points.iter().enumerate() {
            let mut d2 = 0.0;
            let pc = scaled_coords(&self.points[i..=i], self.scaling, self.dim);
            for (a, b) in pc.iter().zip(&coords) {
                d2 += (a - b) * (a - b);
            }
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    /// Deletes every point whose `dim_id` coordinate lies in the closed
    /// interval; the index is rebuilt and provenance extended.
    pub fn remove_range(&self, dim_id: Dimension, interval: [f64; 2]) -> Result<MaterialDataset> {
        if dim_id == Dimension::T && self.dim == DatasetDim::Four {
            return Err(DdError::Dataset("4D dataset has no temperature dimension".into()));
        }
        let kept: Vec<MaterialPoint> = self
            .points
            .iter()
            .filter(|p| {
                let v = dim_id.value(p);
                !(v >= interval[0] && v <= interval[1])
            })
            .copied()
            .collect();
        if kept.is_empty() {
            return Err(DdError::Dataset(format!(
                "removing {dim_id:?} in [{}, {}] empties the dataset",
                interval[0], interval[1]
            )));
        }
        let mut provenance = self.provenance.clone();
        provenance.tweaks.push(format!(
            "remove-range {dim_id:?} [{}, {}]",
            interval[0], interval[1]
        ));
        MaterialDataset::from_points(kept, self.scaling, self.dim, provenance)
    }

    /// Adds N(0, sigma) noise to `q_y` of every point whose gradient
    /// magnitude is below the threshold. Deterministic under a fixed seed.
    pub fn add_conditional_noise(
        &self,
        sigma: f64,
        g_mag_threshold: f64,
        seed: u64,
    ) -> Result<MaterialDataset> {
        if sigma < 0.0 {
            return Err(DdError::Dataset("noise sigma must be >= 0".into()));
        }
        let mut points = self.points.clone();
        if sigma > 0.0 {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
            for p in points.iter_mut() {
                let g_mag = (p.gradient[0] * p.gradient[0] + p.gradient[1] * p.gradient[1]).sqrt();
                if g_mag < g_mag_threshold {
                    p.flux[1] += normal.sample(&mut rng);
                }
            }
        }
        let mut provenance = self.provenance.clone();
        provenance.tweaks.push(format!(
            "add-noise sigma={sigma} threshold={g_mag_threshold} seed={seed}"
        ));
        provenance.seed = Some(seed);
        MaterialDataset::from_points(points, self.scaling, self.dim, provenance)
    }
}

fn scaled_coords(points: &[MaterialPoint], scaling: Scaling, dim: DatasetDim) -> Vec<f64> {
    let st = scaling.s_t.sqrt();
    let sg = scaling.s_g.sqrt();
    let sq = scaling.s_q.sqrt();
    let mut coords = Vec::with_capacity(points.len() * dim.coords());
    for p in points {
        if dim == DatasetDim::Five {
            coords.push(st * p.temperature.unwrap_or(0.0));
        }
        coords.push(sg * p.gradient[0]);
        coords.push(sg * p.gradient[1]);
        coords.push(sq * p.flux[0]);
        coords.push(sq * p.flux[1]);
    }
    coords
}

/// Regular 4D dataset: a grid of gradients in [-A, A]^2 with flux from the
/// linear law q = -k g.
pub fn generate_regular(a: f64, count_g: usize, k: f64) -> Result<MaterialDataset> {
    if count_g < 2 || a <= 0.0 || k <= 0.0 {
        return Err(DdError::Dataset(format!(
            "regular dataset needs count_G >= 2, A > 0, k > 0 (got {count_g}, {a}, {k})"
        )));
    }
    let mut points = Vec::with_capacity(count_g * count_g);
    for ix in 0..count_g {
        let gx = -a + 2.0 * a * ix as f64 / (count_g - 1) as f64;
        for iy in 0..count_g {
            let gy = -a + 2.0 * a * iy as f64 / (count_g - 1) as f64;
            points.push(MaterialPoint {
                temperature: None,
                gradient: [gx, gy],
                flux: [-k * gx, -k * gy],
            });
        }
    }
    let scaling = compute_scaling(&points, DatasetDim::Four)?;
    MaterialDataset::from_points(
        points,
        scaling,
        DatasetDim::Four,
        Provenance {
            generator: format!("regular A={a} count_G={count_g} k={k}"),
            tweaks: vec![],
            seed: None,
        },
    )
}

/// Default inverse-variance scaling: pooled over components per block.
pub fn compute_scaling(points: &[MaterialPoint], dim: DatasetDim) -> Result<Scaling> {
    if points.is_empty() {
        return Err(DdError::Dataset("cannot scale an empty dataset".into()));
    }
    let var = |values: &mut dyn Iterator<Item = f64>| -> (f64, usize) {
        let vals: Vec<f64> = values.collect();
        let n = vals.len();
        let mean = vals.iter().sum::<f64>() / n as f64;
        (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64, n)
    };
    let (vg, _) = var(&mut points.iter().flat_map(|p| p.gradient.into_iter()));
    let (vq, _) = var(&mut points.iter().flat_map(|p| p.flux.into_iter()));
    let s_t = if dim == DatasetDim::Five {
        let (vt, _) = var(&mut points.iter().map(|p| p.temperature.unwrap_or(0.0)));
        if vt <= 0.0 {
            return Err(DdError::Dataset(
                "zero variance in T; supply an explicit scaling override".into(),
            ));
        }
        1.0 / vt
    } else {
        1.0
    };
    if vg <= 0.0 || vq <= 0.0 {
        return Err(DdError::Dataset(
            "zero variance in g or q; supply an explicit scaling override".into(),
        ));
    }
    Ok(Scaling { s_t, s_g: 1.0 / vg, s_q: 1.0 / vq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn regular_corners_and_law() {
        let ds = generate_regular(9.0, 41, 1.0).unwrap();
        assert_eq!(ds.len(), 41 * 41);
        // corner gradient (-9, -9) has flux (9, 9)
        let corner = ds
            .points()
            .iter()
            .find(|p| p.gradient == [-9.0, -9.0])
            .expect("corner point present");
        assert_eq!(corner.flux, [9.0, 9.0]);
        for p in ds.points() {
            assert_relative_eq!(p.flux[0] + p.gradient[0], 0.0, epsilon = 1e-12);
            assert_relative_eq!(p.flux[1] + p.gradient[1], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn regular_small_case() {
        let ds = generate_regular(1.0, 2, 2.0).unwrap();
        assert_eq!(ds.len(), 4);
        let p = ds
            .points()
            .iter()
            .find(|p| p.gradient == [1.0, 1.0])
            .unwrap();
        assert_eq!(p.flux, [-2.0, -2.0]);
    }

    #[test]
    fn scaling_from_known_variance() {
        // gradients with pooled variance 4
        let points = vec![
            MaterialPoint { temperature: None, gradient: [2.0, -2.0], flux: [1.0, 0.0] },
            MaterialPoint { temperature: None, gradient: [-2.0, 2.0], flux: [-1.0, 2.0] },
        ];
        let s = compute_scaling(&points, DatasetDim::Four).unwrap();
        assert_relative_eq!(s.s_g, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn scaling_zero_variance_errors() {
        let points = vec![
            MaterialPoint { temperature: None, gradient: [1.0, 1.0], flux: [3.0, 3.0] },
            MaterialPoint { temperature: None, gradient: [2.0, 0.0], flux: [3.0, 3.0] },
        ];
        assert!(compute_scaling(&points, DatasetDim::Four).is_err());
    }

    #[test]
    fn scaled_coordinates_have_unit_variance() {
        let ds = generate_regular(5.0, 11, 2.0).unwrap();
        let coords = scaled_coords(ds.points(), ds.scaling, ds.dim);
        // pooled variance of the two gradient columns must be 1
        let n = ds.len();
        for block in [0usize, 2] {
            let vals: Vec<f64> = (0..n)
                .flat_map(|i| [coords[i * 4 + block], coords[i * 4 + block + 1]])
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            assert_relative_eq!(var, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn nearest_two_point_example() {
        let points = vec![
            MaterialPoint { temperature: None, gradient: [0.0, 0.0], flux: [0.0, 0.0] },
            MaterialPoint { temperature: None, gradient: [1.0, 1.0], flux: [-1.0, -1.0] },
        ];
        let ds = MaterialDataset::from_points(
            points,
            Scaling::UNIT,
            DatasetDim::Four,
            Provenance::default(),
        )
        .unwrap();
        let (idx, _, dist) = ds.nearest(&Query {
            temperature: None,
            gradient: [0.9, 0.9],
            flux: [-0.9, -0.9],
        });
        assert_eq!(idx, 1);
        assert_relative_eq!(dist, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn nearest_exact_point_is_zero_distance() {
        let ds = generate_regular(3.0, 7, 1.5).unwrap();
        let p = ds.point(17);
        let (idx, _, dist) = ds.nearest(&Query {
            temperature: None,
            gradient: p.gradient,
            flux: p.flux,
        });
        assert_eq!(idx, 17);
        assert!(dist < 1e-14);
    }

    #[test]
    fn remove_range_behaviour() {
        let ds = generate_regular(9.0, 41, 1.0).unwrap();
        let tweaked = ds.remove_range(Dimension::Gx, [-6.0, -5.0]).unwrap();
        assert!(tweaked.len() < ds.len());
        for p in tweaked.points() {
            assert!(!(p.gradient[0] >= -6.0 && p.gradient[0] <= -5.0));
        }
        // interval outside the data range leaves the dataset intact
        let same = ds.remove_range(Dimension::Gx, [100.0, 200.0]).unwrap();
        assert_eq!(same.len(), ds.len());
        // removing everything errors
        assert!(ds.remove_range(Dimension::Gx, [-9.0, 9.0]).is_err());
    }

    #[test]
    fn disjoint_removals_commute() {
        let ds = generate_regular(9.0, 21, 1.0).unwrap();
        let ab = ds
            .remove_range(Dimension::Gx, [-6.0, -5.0])
            .unwrap()
            .remove_range(Dimension::Gy, [2.0, 3.0])
            .unwrap();
        let ba = ds
            .remove_range(Dimension::Gy, [2.0, 3.0])
            .unwrap()
            .remove_range(Dimension::Gx, [-6.0, -5.0])
            .unwrap();
        assert_eq!(ab.points(), ba.points());
    }

    #[test]
    fn conditional_noise_respects_threshold() {
        let ds = generate_regular(9.0, 21, 1.0).unwrap();
        let noisy = ds.add_conditional_noise(0.5, 2.0e0, 77).unwrap();
        for (p, q) in ds.points().iter().zip(noisy.points()) {
            let g_mag = (p.gradient[0].powi(2) + p.gradient[1].powi(2)).sqrt();
            assert_eq!(p.flux[0], q.flux[0]);
            if g_mag >= 2.0 {
                assert_eq!(p.flux[1], q.flux[1], "point above threshold changed");
            }
        }
        // below threshold at least one point moved
        assert!(ds
            .points()
            .iter()
            .zip(noisy.points())
            .any(|(p, q)| p.flux[1] != q.flux[1]));
        // determinism
        let again = ds.add_conditional_noise(0.5, 2.0, 77).unwrap();
        assert_eq!(noisy.points(), again.points());
        // sigma = 0 identity
        let zero = ds.add_conditional_noise(0.0, 2.0, 77).unwrap();
        assert_eq!(zero.points(), ds.points());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn nearest_matches_linear_scan(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let n = rng.gen_range(5..400);
            let five = rng.gen_bool(0.5);
            let dim = if five { DatasetDim::Five } else { DatasetDim::Four };
            let points: Vec<MaterialPoint> = (0..n)
                .map(|_| MaterialPoint {
                    temperature: five.then(|| rng.gen_range(-3.0..1000.0)),
                    gradient: [rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0)],
                    flux: [rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0)],
                })
                .collect();
            let scaling = Scaling { s_t: 0.37, s_g: 1.4, s_q: 0.8 };
            let ds = MaterialDataset::from_points(points, scaling, dim, Provenance::default()).unwrap();
            for _ in 0..50 {
                let q = Query {
                    temperature: five.then(|| rng.gen_range(-3.0..1000.0)),
                    gradient: [rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0)],
                    flux: [rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0)],
                };
                let (ti, _, td) = ds.nearest(&q);
                let (li, ld) = ds.nearest_linear(&q);
                prop_assert_eq!(ti, li);
                prop_assert!((td - ld).abs() <= 1e-10 * (1.0 + ld));
            }
        }
    }
}
