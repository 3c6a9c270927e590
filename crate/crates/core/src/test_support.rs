//! Shared fixtures for unit tests.

use crate::geometry::{ApertureKind, GeometryConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Spaceborne X-band scenario used throughout the tests: 10 GHz carrier,
/// 200 MHz bandwidth, 800 km slant range, 300 m aperture with 31
/// acquisitions, 300 m extent on 78 pixels.
pub fn spaceborne_config(aperture_kind: ApertureKind) -> GeometryConfig {
    GeometryConfig {
        f_c: 10.0e9,
        bandwidth: 200.0e6,
        r: 800.0e3,
        delta_b: 300.0,
        n: 31,
        delta_s: 300.0,
        m: 78,
        aperture_kind,
    }
}

/// Anechoic-chamber Ka-band scenario: 35 GHz, 6 GHz bandwidth, 3.3 m range,
/// 6 cm aperture, 60 cm extent on 35 pixels.
pub fn chamber_config() -> GeometryConfig {
    GeometryConfig {
        f_c: 35.0e9,
        bandwidth: 6.0e9,
        r: 3.3,
        delta_b: 0.06,
        n: 31,
        delta_s: 0.60,
        m: 35,
        aperture_kind: ApertureKind::Uniform,
    }
}

/// Small geometry for fast tests: N=8 acquisitions, M=16 pixels.
pub fn tiny_config() -> GeometryConfig {
    GeometryConfig {
        f_c: 10.0e9,
        bandwidth: 200.0e6,
        r: 800.0e3,
        delta_b: 300.0,
        n: 8,
        delta_s: 300.0,
        m: 16,
        aperture_kind: ApertureKind::Uniform,
    }
}

/// Minimal geometry for gradient checks: N=4, M=6.
pub fn grad_check_config() -> GeometryConfig {
    GeometryConfig {
        f_c: 10.0e9,
        bandwidth: 200.0e6,
        r: 800.0e3,
        delta_b: 300.0,
        n: 4,
        delta_s: 300.0,
        m: 6,
        aperture_kind: ApertureKind::Uniform,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
