//! Imaging geometry: aperture and grid construction, the steering matrix and
//! its real embedding, and design feasibility checks.
//!
//! The cross-track measurement at aperture position `b` for a pixel at slant
//! range `r` is a sum of `exp(2j*k_c*b*s/r)` terms over the scatterers at
//! cross-track coordinates `s`. Discretizing `s` onto a grid turns that into
//! the complex steering matrix `H` with unit-modulus entries; doubling it into
//! a real block matrix lets real-valued estimators run on complex data.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Cross-track aperture layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApertureKind {
    /// Equispaced positions spanning the aperture length.
    Uniform,
    /// Uniform layout with seeded random perturbation of the interior
    /// positions; endpoints stay fixed so the span is preserved.
    Jittered { seed: u64, jitter_fraction: f64 },
}

/// Geometry of one cross-track focusing problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Carrier frequency (Hz).
    pub f_c: f64,
    /// Transmit bandwidth (Hz), sets the slant-range resolution.
    pub bandwidth: f64,
    /// Slant range from radar to scene center (m).
    pub r: f64,
    /// Cross-track aperture length (m).
    pub delta_b: f64,
    /// Number of cross-track acquisitions.
    pub n: usize,
    /// Cross-track image extent (m).
    pub delta_s: f64,
    /// Number of cross-track grid pixels.
    pub m: usize,
    pub aperture_kind: ApertureKind,
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        fn pos(v: f64, name: &str) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be finite and > 0, got {v}")))
            }
        }
        pos(self.f_c, "f_c")?;
        pos(self.bandwidth, "bandwidth")?;
        pos(self.r, "r")?;
        pos(self.delta_b, "delta_b")?;
        pos(self.delta_s, "delta_s")?;
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("n must be >= 2, got {}", self.n)));
        }
        if self.m < 2 {
            return Err(Error::InvalidConfig(format!("m must be >= 2, got {}", self.m)));
        }
        if let ApertureKind::Jittered { jitter_fraction, .. } = self.aperture_kind {
            if !(0.0..1.0).contains(&jitter_fraction) {
                return Err(Error::InvalidConfig(format!(
                    "jitter_fraction must lie in [0, 1), got {jitter_fraction}"
                )));
            }
        }
        Ok(())
    }

    /// Carrier wavelength (m).
    pub fn lambda_c(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    /// Center spatial wavenumber `2*pi*f_c/c` (rad/m).
    pub fn k_c(&self) -> f64 {
        2.0 * PI * self.f_c / SPEED_OF_LIGHT
    }

    /// Cross-track grid spacing (m).
    pub fn grid_spacing(&self) -> f64 {
        self.delta_s / self.m as f64
    }

    /// Stable fingerprint over the canonical JSON form, used to verify that
    /// checkpoints and datasets belong to this geometry.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("geometry serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Geometry plus the derived steering operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringModel {
    pub config: GeometryConfig,
    /// Aperture positions (m), length N.
    pub b: DVector<f64>,
    /// Cross-track grid positions (m), length M.
    pub s: DVector<f64>,
    /// Complex steering matrix, N x M, unit-modulus entries.
    pub h: DMatrix<Complex64>,
    /// Real block embedding of `h`, 2N x 2M.
    pub h_embed: DMatrix<f64>,
}

impl SteeringModel {
    /// Builds aperture, grid and steering operators in one step.
    pub fn from_config(config: &GeometryConfig) -> Result<Self> {
        let b = build_aperture(config)?;
        let s = build_grid(config)?;
        build_steering(config, b, s)
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.s.len()
    }
}

/// Returns the N aperture positions (m), centered on 0 for the uniform kind.
pub fn build_aperture(cfg: &GeometryConfig) -> Result<DVector<f64>> {
    cfg.validate()?;
    let n = cfg.n;
    let d = cfg.delta_b / (n - 1) as f64;
    let mut b: Vec<f64> = (0..n).map(|i| -cfg.delta_b / 2.0 + i as f64 * d).collect();
    if let ApertureKind::Jittered { seed, jitter_fraction } = cfg.aperture_kind {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = jitter_fraction * d / 2.0;
        for pos in b.iter_mut().take(n - 1).skip(1) {
            *pos += rng.gen_range(-half..=half);
        }
    }
    Ok(DVector::from_vec(b))
}

/// Returns the M grid positions, uniform over `[-delta_s/2, delta_s/2)` with
/// spacing `delta_s / M`.
pub fn build_grid(cfg: &GeometryConfig) -> Result<DVector<f64>> {
    cfg.validate()?;
    let d = cfg.grid_spacing();
    Ok(DVector::from_iterator(
        cfg.m,
        (0..cfg.m).map(|i| -cfg.delta_s / 2.0 + i as f64 * d),
    ))
}

/// Assembles the steering matrix `H[n, m] = exp(2j*k_c*b_n*s_m/r)` and its
/// real embedding.
pub fn build_steering(cfg: &GeometryConfig, b: DVector<f64>, s: DVector<f64>) -> Result<SteeringModel> {
    cfg.validate()?;
    if b.len() != cfg.n || s.len() != cfg.m {
        return Err(Error::InvalidShape(format!(
            "aperture/grid lengths ({}, {}) do not match config ({}, {})",
            b.len(),
            s.len(),
            cfg.n,
            cfg.m
        )));
    }
    let k_c = cfg.k_c();
    let h = DMatrix::from_fn(cfg.n, cfg.m, |i, j| {
        let phase = 2.0 * k_c * b[i] * s[j] / cfg.r;
        Complex64::new(phase.cos(), phase.sin())
    });
    let h_embed = real_embed_mat(&h);
    Ok(SteeringModel { config: cfg.clone(), b, s, h, h_embed })
}

/// Stacks `Re(z)` above `Im(z)`.
pub fn real_embed_vec(z: &DVector<Complex64>) -> DVector<f64> {
    let k = z.len();
    DVector::from_fn(2 * k, |i, _| if i < k { z[i].re } else { z[i - k].im })
}

/// Inverse of [`real_embed_vec`]; fails on odd-length input.
pub fn real_extract_vec(x: &DVector<f64>) -> Result<DVector<Complex64>> {
    if x.len() % 2 != 0 {
        return Err(Error::InvalidShape(format!(
            "embedded vector must have even length, got {}",
            x.len()
        )));
    }
    let k = x.len() / 2;
    Ok(DVector::from_fn(k, |i, _| Complex64::new(x[i], x[i + k])))
}

/// Block embedding `[[Re, -Im], [Im, Re]]` of a complex matrix.
pub fn real_embed_mat(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (n, m) = h.shape();
    DMatrix::from_fn(2 * n, 2 * m, |i, j| {
        let e = h[(i % n, j % m)];
        match (i < n, j < m) {
            (true, true) | (false, false) => e.re,
            (true, false) => -e.im,
            (false, true) => e.im,
        }
    })
}

/// Expected cross-track resolution `lambda_c * r / (2 * delta_b)` (m) of the
/// nonparametric estimator.
pub fn resolution(cfg: &GeometryConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(cfg.lambda_c() * cfg.r / (2.0 * cfg.delta_b))
}

/// Margin factor applied to the extent bound: the scene extent must stay well
/// below `rho_r * r / delta_b`, operationalized as `delta_s <= 0.25 * bound`.
pub const EXTENT_MARGIN: f64 = 0.25;

/// Outcome of the scene-extent feasibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtentReport {
    /// Slant-range resolution `c / (2 * bandwidth)` (m).
    pub rho_r: f64,
    /// Upper bound `rho_r * r / delta_b` (m).
    pub bound: f64,
    pub delta_s: f64,
    /// `delta_s / bound`.
    pub ratio: f64,
    pub pass: bool,
}

/// Checks the image-extent constraint against the range-resolution bound.
pub fn extent_check(cfg: &GeometryConfig) -> Result<ExtentReport> {
    cfg.validate()?;
    let rho_r = SPEED_OF_LIGHT / (2.0 * cfg.bandwidth);
    let bound = rho_r * cfg.r / cfg.delta_b;
    let ratio = cfg.delta_s / bound;
    Ok(ExtentReport {
        rho_r,
        bound,
        delta_s: cfg.delta_s,
        ratio,
        pass: cfg.delta_s <= EXTENT_MARGIN * bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{chamber_config, spaceborne_config};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn uniform_aperture_spans_and_centers() {
        let cfg = spaceborne_config(ApertureKind::Uniform);
        let b = build_aperture(&cfg).unwrap();
        assert_eq!(b.len(), 31);
        assert!((b[0] + 150.0).abs() < 1e-12);
        assert!((b[30] - 150.0).abs() < 1e-12);
        for i in 1..31 {
            assert!((b[i] - b[i - 1] - 10.0).abs() < 1e-12);
        }
        assert!(b.sum().abs() < 1e-9);
    }

    #[test]
    fn two_point_aperture_is_endpoints_only() {
        let mut cfg = spaceborne_config(ApertureKind::Uniform);
        cfg.n = 2;
        let b = build_aperture(&cfg).unwrap();
        assert_eq!(b.as_slice(), &[-150.0, 150.0]);
    }

    #[test]
    fn single_point_aperture_rejected() {
        let mut cfg = spaceborne_config(ApertureKind::Uniform);
        cfg.n = 1;
        assert!(matches!(build_aperture(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn jittered_aperture_keeps_span_and_monotonicity() {
        let cfg = spaceborne_config(ApertureKind::Jittered { seed: 7, jitter_fraction: 0.9 });
        let b = build_aperture(&cfg).unwrap();
        assert!((b[30] - b[0] - 300.0).abs() < 1e-12);
        for i in 1..31 {
            assert!(b[i] > b[i - 1], "positions must be strictly increasing");
        }
        // same seed, same positions
        let b2 = build_aperture(&cfg).unwrap();
        assert_eq!(b.as_slice(), b2.as_slice());
        // different seed differs somewhere in the interior
        let other = spaceborne_config(ApertureKind::Jittered { seed: 8, jitter_fraction: 0.9 });
        let b3 = build_aperture(&other).unwrap();
        assert!(b.iter().zip(b3.iter()).any(|(x, y)| x != y));
    }

    #[test]
    fn grid_spacing_matches_extent_over_pixels() {
        let cfg = spaceborne_config(ApertureKind::Uniform);
        let s = build_grid(&cfg).unwrap();
        assert_eq!(s.len(), 78);
        let d = s[1] - s[0];
        assert!((d - 300.0 / 78.0).abs() < 1e-12);
        assert!((d - 3.846).abs() < 0.001);
        assert!((s[0] + 150.0).abs() < 1e-12);
        assert!(s[77] < 150.0);
    }

    #[test]
    fn two_point_grid() {
        let mut cfg = spaceborne_config(ApertureKind::Uniform);
        cfg.m = 2;
        let s = build_grid(&cfg).unwrap();
        assert_eq!(s.as_slice(), &[-150.0, 0.0]);
    }

    #[test]
    fn chamber_grid_spacing() {
        let cfg = chamber_config();
        let s = build_grid(&cfg).unwrap();
        assert_eq!(s.len(), 35);
        assert!(((s[1] - s[0]) - 0.01714).abs() < 1e-4);
    }

    #[test]
    fn steering_dimensions_and_unit_modulus() {
        let cfg = spaceborne_config(ApertureKind::Uniform);
        let model = SteeringModel::from_config(&cfg).unwrap();
        assert_eq!(model.h.shape(), (31, 78));
        assert_eq!(model.h_embed.shape(), (62, 156));
        for e in model.h.iter() {
            assert!((e.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_aperture_row_is_all_ones() {
        let cfg = spaceborne_config(ApertureKind::Uniform);
        let model = SteeringModel::from_config(&cfg).unwrap();
        // uniform N=31 aperture has b=0 at index 15
        assert!(model.b[15].abs() < 1e-12);
        for j in 0..model.m() {
            assert!((model.h[(15, j)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugate_symmetry_in_aperture_sign() {
        let cfg = spaceborne_config(ApertureKind::Uniform);
        let model = SteeringModel::from_config(&cfg).unwrap();
        // b[15 - k] = -b[15 + k] for the centered uniform aperture
        for k in 1..=15 {
            for j in 0..model.m() {
                let plus = model.h[(15 + k, j)];
                let minus = model.h[(15 - k, j)];
                assert!((minus - plus.conj()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn embed_block_structure() {
        let cfg = spaceborne_config(ApertureKind::Uniform);
        let model = SteeringModel::from_config(&cfg).unwrap();
        let (n, m) = (model.n(), model.m());
        for i in 0..n {
            for j in 0..m {
                let e = model.h[(i, j)];
                assert_eq!(model.h_embed[(i, j)], e.re);
                assert_eq!(model.h_embed[(n + i, m + j)], e.re);
                assert_eq!(model.h_embed[(i, m + j)], -e.im);
                assert_eq!(model.h_embed[(n + i, j)], e.im);
            }
        }
    }

    #[test]
    fn embed_extract_round_trip() {
        let z = DVector::from_vec(vec![
            Complex64::new(1.0, -2.0),
            Complex64::new(0.0, 3.5),
            Complex64::new(-4.0, 0.0),
        ]);
        let e = real_embed_vec(&z);
        assert_eq!(e.len(), 6);
        assert_eq!(e.as_slice(), &[1.0, 0.0, -4.0, -2.0, 3.5, 0.0]);
        let back = real_extract_vec(&e).unwrap();
        assert_eq!(back, z);
    }

    #[test]
    fn purely_real_vector_has_zero_lower_half() {
        let z = DVector::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(-1.5, 0.0)]);
        let e = real_embed_vec(&z);
        assert_eq!(&e.as_slice()[2..], &[0.0, 0.0]);
    }

    #[test]
    fn extract_rejects_odd_length() {
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(real_extract_vec(&x), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn embedding_commutes_with_matrix_product() {
        let mut rng = crate::test_support::rng(41);
        for _ in 0..20 {
            let h = DMatrix::from_fn(4, 6, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let gamma = DVector::from_fn(6, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let lhs = real_embed_vec(&(&h * &gamma));
            let rhs = real_embed_mat(&h) * real_embed_vec(&gamma);
            for i in 0..lhs.len() {
                assert!((lhs[i] - rhs[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resolution_spaceborne_about_40m() {
        let cfg = spaceborne_config(ApertureKind::Uniform);
        let rho = resolution(&cfg).unwrap();
        assert!((rho - 40.0).abs() / 40.0 < 0.01, "rho_s = {rho}");
    }

    #[test]
    fn resolution_halves_when_aperture_doubles() {
        let cfg = spaceborne_config(ApertureKind::Uniform);
        let mut wide = cfg.clone();
        wide.delta_b *= 2.0;
        let r1 = resolution(&cfg).unwrap();
        let r2 = resolution(&wide).unwrap();
        assert!((r1 / r2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resolution_chamber() {
        let rho = resolution(&chamber_config()).unwrap();
        assert!((rho - 0.2356).abs() < 5e-4, "rho_s = {rho}");
    }

    #[test]
    fn extent_check_spaceborne_passes() {
        let cfg = spaceborne_config(ApertureKind::Uniform);
        let rep = extent_check(&cfg).unwrap();
        assert!((rep.rho_r - 0.75).abs() < 1e-3);
        assert!((rep.bound - 2000.0).abs() < 2.0);
        assert!((rep.ratio - 0.15).abs() < 0.001);
        assert!(rep.pass);
    }

    #[test]
    fn extent_check_fails_at_equality() {
        let mut cfg = spaceborne_config(ApertureKind::Uniform);
        let rep = extent_check(&cfg).unwrap();
        cfg.delta_s = rep.bound;
        let rep2 = extent_check(&cfg).unwrap();
        assert!(!rep2.pass);
    }

    #[test]
    fn extent_check_tiny_extent_passes() {
        let mut cfg = spaceborne_config(ApertureKind::Uniform);
        cfg.delta_s = 1e-9;
        assert!(extent_check(&cfg).unwrap().pass);
    }

    #[test]
    fn fingerprint_tracks_config_changes() {
        let a = spaceborne_config(ApertureKind::Uniform);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.m = 79;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    proptest! {
        #[test]
        fn embedding_commutes_prop(seed in 0u64..1000) {
            let mut rng = crate::test_support::rng(seed);
            let h = DMatrix::from_fn(3, 5, |_, _| {
                Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
            });
            let gamma = DVector::from_fn(5, |_, _| {
                Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
            });
            let lhs = real_embed_vec(&(&h * &gamma));
            let rhs = real_embed_mat(&h) * real_embed_vec(&gamma);
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - rhs[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn resolution_scale_invariance(k in 0.1f64..10.0) {
            let mut cfg = spaceborne_config(ApertureKind::Uniform);
            let base = resolution(&cfg).unwrap();
            cfg.r *= k;
            cfg.delta_b *= k;
            let scaled = resolution(&cfg).unwrap();
            prop_assert!((scaled - base).abs() < 1e-9 * base.abs());
        }
    }
}
