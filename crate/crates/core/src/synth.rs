//! Synthetic scene and echo generation.
//!
//! Training and test scenes place a handful of point scatterers at
//! *continuous* cross-track positions; the echo is synthesized from those
//! positions while the ground truth quantizes each scatterer onto the nearest
//! grid bin. Noise is circular complex Gaussian calibrated against the mean
//! per-sample signal power.

use crate::container::TensorContainer;
use crate::error::{Error, Result};
use crate::geometry::{real_embed_vec, SteeringModel};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One point scatterer at a continuous cross-track position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    /// Cross-track position (m), inside `[-delta_s/2, delta_s/2)`.
    pub s: f64,
    pub gamma: Complex64,
}

/// A (noisy echo, gridded truth) pair in embedded real coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// Embedded noisy echo, length 2N.
    pub g_embed: DVector<f64>,
    /// Embedded gridded truth, length 2M.
    pub gamma_embed: DVector<f64>,
    pub snr_db: f64,
    /// Generating scene, kept for diagnostics; empty after reload from disk.
    pub scene: Vec<Scatterer>,
}

/// Per-sample SNR law for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    Fixed(f64),
    /// Each sample draws uniformly from the list.
    List(Vec<f64>),
}

fn default_counts() -> Vec<usize> {
    vec![1, 2, 3, 4]
}

fn default_p() -> usize {
    200_000
}

/// Generative law of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Sample count.
    #[serde(default = "default_p")]
    pub p: usize,
    pub snr_db: SnrSpec,
    #[serde(default)]
    pub seed: u64,
    /// Support of the per-scene scatterer count, drawn uniformly.
    #[serde(default = "default_counts")]
    pub scatterer_counts: Vec<usize>,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::InvalidSpec("sample count must be >= 1".into()));
        }
        if self.scatterer_counts.is_empty() {
            return Err(Error::InvalidSpec("scatterer count support is empty".into()));
        }
        if let SnrSpec::List(l) = &self.snr_db {
            if l.is_empty() {
                return Err(Error::InvalidSpec("snr list is empty".into()));
            }
        }
        Ok(())
    }
}

/// Draws a scene: count uniform over the support, positions i.i.d. uniform
/// over the extent, reflectivities standard circular complex Gaussian.
pub fn sample_scene(rng: &mut impl Rng, spec: &DatasetSpec, delta_s: f64) -> Result<Vec<Scatterer>> {
    spec.validate()?;
    let count = spec.scatterer_counts[rng.gen_range(0..spec.scatterer_counts.len())];
    let half = delta_s / 2.0;
    Ok((0..count)
        .map(|_| Scatterer {
            s: rng.gen_range(-half..half),
            gamma: Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
        })
        .collect())
}

/// Synthesizes the echo `g_n = sum_i gamma_i * exp(2j*k_c*b_n*s_i/r)` from
/// the continuous scatterer positions (no grid snapping).
pub fn synthesize_echo(model: &SteeringModel, scene: &[Scatterer]) -> DVector<Complex64> {
    let k_c = model.config.k_c();
    let r = model.config.r;
    DVector::from_fn(model.n(), |n, _| {
        scene
            .iter()
            .map(|sc| {
                let phase = 2.0 * k_c * model.b[n] * sc.s / r;
                sc.gamma * Complex64::new(phase.cos(), phase.sin())
            })
            .sum()
    })
}

/// Quantizes a scene onto the grid: each reflectivity is added into the bin
/// of the nearest grid point, exact midpoints resolving to the lower index.
pub fn grid_truth(model: &SteeringModel, scene: &[Scatterer]) -> DVector<Complex64> {
    let m = model.m();
    let s0 = model.s[0];
    let d = model.config.grid_spacing();
    let mut gamma = DVector::from_element(m, Complex64::new(0.0, 0.0));
    for sc in scene {
        let t = (sc.s - s0) / d;
        let mut k = (t + 0.5).floor();
        // exact midpoint ties break to the lower index
        if t + 0.5 == k {
            k -= 1.0;
        }
        let idx = (k.max(0.0) as usize).min(m - 1);
        gamma[idx] += sc.gamma;
    }
    gamma
}

/// Adds circular complex Gaussian noise at the requested SNR, defined as the
/// mean per-sample signal power `||g||^2/N` over the per-sample noise
/// variance. `snr_db = +inf` returns the echo unchanged.
pub fn add_noise(rng: &mut impl Rng, g: &DVector<Complex64>, snr_db: f64) -> Result<DVector<Complex64>> {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(g.clone());
    }
    let power = g.norm_squared() / g.len() as f64;
    if power == 0.0 {
        return Err(Error::DegenerateSignal(
            "cannot add finite-SNR noise to an all-zero echo".into(),
        ));
    }
    let sigma2 = power * 10f64.powf(-snr_db / 10.0);
    let scale = (sigma2 / 2.0).sqrt();
    Ok(DVector::from_fn(g.len(), |i, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        g[i] + Complex64::new(scale * re, scale * im)
    }))
}

/// Per-element complex noise variance implied by an SNR against an echo.
pub fn noise_variance(g: &DVector<Complex64>, snr_db: f64) -> f64 {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return 0.0;
    }
    (g.norm_squared() / g.len() as f64) * 10f64.powf(-snr_db / 10.0)
}

/// A materialized dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub samples: Vec<TrainingSample>,
}

/// Generates sample `index` of the dataset described by `spec`.
///
/// Every sample owns an independent RNG substream keyed by `(seed, index)`,
/// so any partition of indices across workers produces identical data.
pub fn generate_sample(model: &SteeringModel, spec: &DatasetSpec, index: u64) -> Result<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index.wrapping_add(1));
    let snr_db = match &spec.snr_db {
        SnrSpec::Fixed(v) => *v,
        SnrSpec::List(l) => l[rng.gen_range(0..l.len())],
    };
    let scene = sample_scene(&mut rng, spec, model.config.delta_s)?;
    let echo = synthesize_echo(model, &scene);
    let noisy = add_noise(&mut rng, &echo, snr_db)?;
    let truth = grid_truth(model, &scene);
    Ok(TrainingSample {
        g_embed: real_embed_vec(&noisy),
        gamma_embed: real_embed_vec(&truth),
        snr_db,
        scene,
    })
}

/// Materializes the full dataset, deterministic in `spec.seed` regardless of
/// worker count.
pub fn make_dataset(model: &SteeringModel, spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let samples: Result<Vec<TrainingSample>> = (0..spec.p as u64)
        .into_par_iter()
        .map(|i| generate_sample(model, spec, i))
        .collect();
    Ok(Dataset { spec: spec.clone(), samples: samples? })
}

/// Sidecar metadata written next to a dataset container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub spec: DatasetSpec,
    pub geometry_fingerprint: String,
    pub n: usize,
    pub m: usize,
}

impl Dataset {
    /// Writes the samples to a tensor container at `path` plus a JSON sidecar
    /// at `path` + ".json".
    pub fn save(&self, model: &SteeringModel, path: &Path) -> Result<()> {
        let p = self.samples.len();
        let n2 = 2 * model.n();
        let m2 = 2 * model.m();
        let mut g = Vec::with_capacity(p * n2);
        let mut t = Vec::with_capacity(p * m2);
        let mut snr = Vec::with_capacity(p);
        for s in &self.samples {
            g.extend_from_slice(s.g_embed.as_slice());
            t.extend_from_slice(s.gamma_embed.as_slice());
            snr.push(s.snr_db);
        }
        let mut c = TensorContainer::new();
        c.insert_f64("g_embed", vec![p, n2], g)?;
        c.insert_f64("gamma_embed", vec![p, m2], t)?;
        c.insert_f64("snr_db", vec![p], snr)?;
        c.save(path)?;
        let sidecar = DatasetSidecar {
            spec: self.spec.clone(),
            geometry_fingerprint: model.config.fingerprint(),
            n: model.n(),
            m: model.m(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    /// Loads a dataset, verifying the geometry fingerprint. Scenes are not
    /// persisted; reloaded samples carry empty scene lists.
    pub fn load(model: &SteeringModel, path: &Path) -> Result<Dataset> {
        let c = TensorContainer::load(path)?;
        let sidecar: DatasetSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        if sidecar.geometry_fingerprint != model.config.fingerprint() {
            return Err(Error::IncompatibleCheckpoint(format!(
                "dataset was generated for geometry {}, current geometry is {}",
                sidecar.geometry_fingerprint,
                model.config.fingerprint()
            )));
        }
        let (gd, g) = c.require_f64("g_embed")?;
        let (td, t) = c.require_f64("gamma_embed")?;
        let (sd, snr) = c.require_f64("snr_db")?;
        let p = sd.first().copied().unwrap_or(0);
        let n2 = 2 * model.n();
        let m2 = 2 * model.m();
        if gd != [p, n2] || td != [p, m2] {
            return Err(Error::InvalidShape(format!(
                "dataset arrays {gd:?}/{td:?} do not match geometry ({n2}, {m2})"
            )));
        }
        let samples = (0..p)
            .map(|i| TrainingSample {
                g_embed: DVector::from_column_slice(&g[i * n2..(i + 1) * n2]),
                gamma_embed: DVector::from_column_slice(&t[i * m2..(i + 1) * m2]),
                snr_db: snr[i],
                scene: Vec::new(),
            })
            .collect();
        Ok(Dataset { spec: sidecar.spec, samples })
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".json");
    std::path::PathBuf::from(os)
}
