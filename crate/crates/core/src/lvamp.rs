//! The unfolded network: a fixed number of VAMP-style layers whose linear
//! estimator matrices, precision scalings and denoiser shapes are trainable.
//!
//! One layer alternates an affine estimator `eta1(v) = G*v + R*g` with an
//! element-wise piecewise-linear denoiser `eta2`, connected through the
//! extrinsic updates
//!
//! ```text
//! 1: v1 = (gamma_hat - a2*v2) / (1 - a2)        5: v2 = (gamma_tilde - a1*v1) / (1 - a1)
//! 2: chi1 = a2*chi2 / (1 - a2)                  6: chi2 = a1/(1 - a1) * chi1 .* beta
//! 3: gamma_tilde, 4: a1 = tr(G)/2M              7: gamma_hat, 8: a2 = <eta2'>
//! ```
//!
//! where the divergences `a1`, `a2` are clamped into `(0, 1)` so the
//! extrinsic divisions stay well-posed. Everything runs on the real
//! embedding of the complex problem, so vectors have length 2M and the echo
//! length 2N.

use crate::error::{Error, Result};
use crate::geometry::SteeringModel;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Divergence clamp bound: alphas live in `[ALPHA_MIN, 1 - ALPHA_MIN]`.
pub const ALPHA_MIN: f64 = 1e-4;

/// Columns of the denoiser parameter matrix: two knot multipliers and three
/// segment slopes.
pub const THETA_COLS: usize = 5;

/// Positivity floor for the per-element precisions.
const CHI_FLOOR: f64 = 1e-300;

/// Trainable parameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Estimator matrix applied to the extrinsic mean, 2M x 2M.
    pub g: DMatrix<f64>,
    /// Estimator matrix applied to the embedded echo, 2M x 2N.
    pub r: DMatrix<f64>,
    /// Per-element precision scaling, length 2M.
    pub beta: DVector<f64>,
    /// Denoiser shape, 2M x 5: columns are knot multipliers (theta1, theta2)
    /// and slopes (theta3, theta4, theta5), with 0 < theta1 < theta2.
    pub theta: DMatrix<f64>,
}

/// Parameters of the initialization line that seeds the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct InitParams {
    pub r0: DMatrix<f64>,
    pub beta0: DVector<f64>,
    pub theta0: DMatrix<f64>,
}

/// How the estimator matrices are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// `G = I`. The literal starting point; its divergence tr(G)/2M = 1
    /// sits on the clamp boundary, so the first extrinsic update runs with
    /// the clamped value.
    Identity,
    /// `G = I - H_embed^T H_embed / ||H_embed||_2^2`, a gradient-step
    /// estimator whose divergence lies strictly inside (0, 1). Default.
    Lmmse,
}

/// Full parameter set of a T-layer network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
    pub init: InitParams,
    pub init_mode: InitMode,
}

impl NetworkParams {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// 2M, taken from the init parameter shapes.
    pub fn embedded_len(&self) -> usize {
        self.init.r0.nrows()
    }

    /// 2N.
    pub fn echo_len(&self) -> usize {
        self.init.r0.ncols()
    }
}

/// Clamps a divergence into `[ALPHA_MIN, 1 - ALPHA_MIN]`; the flag records
/// whether the bound was hit (gradient is zero there).
pub fn clamp_alpha(raw: f64) -> (f64, bool) {
    if raw < ALPHA_MIN {
        (ALPHA_MIN, true)
    } else if raw > 1.0 - ALPHA_MIN {
        (1.0 - ALPHA_MIN, true)
    } else {
        (raw, false)
    }
}

#[inline]
fn theta_row(theta: &DMatrix<f64>, i: usize) -> [f64; THETA_COLS] {
    [theta[(i, 0)], theta[(i, 1)], theta[(i, 2)], theta[(i, 3)], theta[(i, 4)]]
}

/// Element-wise denoiser: odd-symmetric 5-segment piecewise-linear shrinkage
/// with knots at `theta1*sqrt(chi)` and `theta2*sqrt(chi)` and slopes
/// `(theta3, theta4, theta5)`. Returns (output, active slope, segment id).
#[inline]
pub(crate) fn eta2_element(v: f64, chi: f64, th: &[f64; THETA_COLS]) -> (f64, f64, u8) {
    let sigma = chi.sqrt();
    let t1 = th[0] * sigma;
    let t2 = th[1] * sigma;
    let u = v.abs();
    if u <= t1 {
        (th[2] * v, th[2], 0)
    } else {
        let s = if v < 0.0 { -1.0 } else { 1.0 };
        if u <= t2 {
            (s * (th[2] * t1 + th[3] * (u - t1)), th[3], 1)
        } else {
            (s * (th[2] * t1 + th[3] * (t2 - t1) + th[4] * (u - t2)), th[4], 2)
        }
    }
}

/// Piecewise-linear denoiser over a whole vector.
///
/// Returns the shrunk vector and the element-wise derivative (the active
/// slope, taking the left segment at knots).
pub fn eta2(v: &DVector<f64>, chi: &DVector<f64>, theta: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if chi.iter().any(|&c| c <= 0.0) {
        return Err(Error::InvalidPrecision("eta2 requires chi > 0 elementwise".into()));
    }
    let k = v.len();
    let mut out = DVector::zeros(k);
    let mut deriv = DVector::zeros(k);
    for i in 0..k {
        let (o, d, _) = eta2_element(v[i], chi[i], &theta_row(theta, i));
        out[i] = o;
        deriv[i] = d;
    }
    Ok((out, deriv))
}

fn eta2_into(
    v: &DVector<f64>,
    chi: &DVector<f64>,
    theta: &DMatrix<f64>,
    out: &mut DVector<f64>,
    deriv: &mut DVector<f64>,
    mut segments: Option<&mut Vec<u8>>,
) {
    for i in 0..v.len() {
        let (o, d, seg) = eta2_element(v[i], chi[i], &theta_row(theta, i));
        out[i] = o;
        deriv[i] = d;
        if let Some(segs) = segments.as_deref_mut() {
            segs.push(seg);
        }
    }
}

/// Affine estimator `gamma_tilde = G*v1 + R*g_embed` with its mean
/// divergence `tr(G)/2M`, clamped.
pub fn eta1(
    v1: &DVector<f64>,
    g_mat: &DMatrix<f64>,
    r_mat: &DMatrix<f64>,
    g_embed: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let mut gamma_tilde = r_mat * g_embed;
    gamma_tilde.gemv(1.0, g_mat, v1, 1.0);
    let (alpha1, _) = clamp_alpha(g_mat.trace() / g_mat.nrows() as f64);
    (gamma_tilde, alpha1)
}

/// Denoiser shape used at initialization: a soft threshold at one sigma
/// (knots at sigma and 2*sigma, slopes 0/1/1).
pub fn default_theta_row() -> [f64; THETA_COLS] {
    [1.0, 2.0, 0.0, 1.0, 1.0]
}

fn default_theta(m2: usize) -> DMatrix<f64> {
    let row = default_theta_row();
    DMatrix::from_fn(m2, THETA_COLS, |_, j| row[j])
}

/// Builds the initial parameter set for a T-layer network on this geometry.
pub fn init_network(model: &SteeringModel, depth: usize, mode: InitMode) -> Result<NetworkParams> {
    if depth < 1 {
        return Err(Error::InvalidConfig("network needs at least one layer".into()));
    }
    let m2 = 2 * model.m();
    let r_init = model.h_embed.transpose();
    let g_init = match mode {
        InitMode::Identity => DMatrix::identity(m2, m2),
        InitMode::Lmmse => {
            let sv = model.h_embed.clone().singular_values();
            let smax2 = sv.iter().fold(0.0f64, |a, &b| a.max(b)).powi(2);
            let mut g = DMatrix::identity(m2, m2);
            g.gemm_tr(-1.0 / smax2, &model.h_embed, &model.h_embed, 1.0);
            g
        }
    };
    let layer = LayerParams {
        g: g_init,
        r: r_init.clone(),
        beta: DVector::from_element(m2, 1.0),
        theta: default_theta(m2),
    };
    Ok(NetworkParams {
        layers: vec![layer; depth],
        init: InitParams {
            r0: r_init,
            beta0: DVector::from_element(m2, 1.0),
            theta0: default_theta(m2),
        },
        init_mode: mode,
    })
}

/// State produced by the initialization line.
#[derive(Debug, Clone, PartialEq)]
pub struct InitState {
    pub v2: DVector<f64>,
    pub chi2: DVector<f64>,
    pub gamma_hat: DVector<f64>,
    pub deriv: DVector<f64>,
    pub segments: Vec<u8>,
    pub alpha2: f64,
    pub alpha2_raw: f64,
    pub alpha2_clamped: bool,
    /// Gradient mask of the chi positivity floor.
    pub chi2_passthrough: Vec<bool>,
    /// `||g_embed||^2 / N`.
    pub echo_energy_per_acq: f64,
}

/// All intermediates of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub v1: DVector<f64>,
    pub chi1: DVector<f64>,
    pub gamma_tilde: DVector<f64>,
    pub v2: DVector<f64>,
    pub chi2: DVector<f64>,
    pub gamma_hat: DVector<f64>,
    pub deriv: DVector<f64>,
    pub segments: Vec<u8>,
    pub alpha1: f64,
    pub alpha1_clamped: bool,
    pub alpha2: f64,
    pub alpha2_raw: f64,
    pub alpha2_clamped: bool,
    pub chi1_passthrough: Vec<bool>,
    pub chi2_passthrough: Vec<bool>,
}

/// Layer-by-layer record of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub init: InitState,
    pub layers: Vec<LayerState>,
}

fn check_shapes(params: &NetworkParams, model: &SteeringModel, g_embed: &DVector<f64>) -> Result<()> {
    let m2 = 2 * model.m();
    let n2 = 2 * model.n();
    if g_embed.len() != n2 {
        return Err(Error::InvalidShape(format!(
            "echo length {} does not match 2N = {n2}",
            g_embed.len()
        )));
    }
    if params.embedded_len() != m2 || params.echo_len() != n2 {
        return Err(Error::InvalidShape(format!(
            "network built for (2M, 2N) = ({}, {}), geometry has ({m2}, {n2})",
            params.embedded_len(),
            params.echo_len()
        )));
    }
    Ok(())
}

fn ensure_finite(v: &DVector<f64>, layer: usize, step: &str) -> Result<()> {
    if v.sum().is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalDivergence {
            location: format!("layer {layer}, step {step}"),
            detail: "non-finite intermediate".into(),
        })
    }
}

/// Runs the network, returning the final embedded estimate of length 2M.
///
/// Deterministic and pure; the complex image is recovered with
/// [`crate::geometry::real_extract_vec`].
pub fn forward(params: &NetworkParams, model: &SteeringModel, g_embed: &DVector<f64>) -> Result<DVector<f64>> {
    run_forward(params, model, g_embed, false).map(|(out, _)| out)
}

/// Like [`forward`] but records every layer's intermediates.
pub fn forward_with_trace(
    params: &NetworkParams,
    model: &SteeringModel,
    g_embed: &DVector<f64>,
) -> Result<(DVector<f64>, ForwardTrace)> {
    let (out, trace) = run_forward(params, model, g_embed, true)?;
    Ok((out, trace.expect("trace recorded")))
}

fn run_forward(
    params: &NetworkParams,
    model: &SteeringModel,
    g_embed: &DVector<f64>,
    record: bool,
) -> Result<(DVector<f64>, Option<ForwardTrace>)> {
    check_shapes(params, model, g_embed)?;
    let m2 = params.embedded_len();
    let energy = g_embed.norm_squared() / model.n() as f64;

    // initialization line
    let mut v2 = &params.init.r0 * g_embed;
    ensure_finite(&v2, 0, "init v2")?;
    let mut chi2 = DVector::zeros(m2);
    let mut chi2_pass = vec![true; m2];
    for i in 0..m2 {
        let raw = params.init.beta0[i] * energy;
        chi2[i] = raw.max(CHI_FLOOR);
        chi2_pass[i] = raw > CHI_FLOOR;
    }
    let mut gamma_hat = DVector::zeros(m2);
    let mut deriv = DVector::zeros(m2);
    let mut segs = record.then(Vec::new);
    eta2_into(&v2, &chi2, &params.init.theta0, &mut gamma_hat, &mut deriv, segs.as_mut());
    ensure_finite(&gamma_hat, 0, "init eta2")?;
    let alpha2_raw = deriv.mean();
    let (mut alpha2, alpha2_clamped) = clamp_alpha(alpha2_raw);

    let mut trace = record.then(|| ForwardTrace {
        init: InitState {
            v2: v2.clone(),
            chi2: chi2.clone(),
            gamma_hat: gamma_hat.clone(),
            deriv: deriv.clone(),
            segments: segs.take().unwrap_or_default(),
            alpha2,
            alpha2_raw,
            alpha2_clamped,
            chi2_passthrough: chi2_pass.clone(),
            echo_energy_per_acq: energy,
        },
        layers: Vec::with_capacity(params.layers.len()),
    });

    let mut v1 = DVector::zeros(m2);
    let mut chi1 = DVector::zeros(m2);
    let mut gamma_tilde = DVector::zeros(m2);
    let mut chi1_pass = vec![true; m2];

    for (t, layer) in params.layers.iter().enumerate() {
        let t1b = t + 1;
        // 1: extrinsic mean into the estimator
        for i in 0..m2 {
            v1[i] = (gamma_hat[i] - alpha2 * v2[i]) / (1.0 - alpha2);
        }
        ensure_finite(&v1, t1b, "1 (v1)")?;
        // 2: extrinsic precision
        let a = alpha2 / (1.0 - alpha2);
        for i in 0..m2 {
            let raw = a * chi2[i];
            chi1[i] = raw.max(CHI_FLOOR);
            chi1_pass[i] = raw > CHI_FLOOR;
        }
        // 3-4: affine estimator and its divergence
        gamma_tilde.copy_from(&v1);
        gamma_tilde.gemv(1.0, &layer.g, &v1, 0.0);
        gamma_tilde.gemv(1.0, &layer.r, g_embed, 1.0);
        ensure_finite(&gamma_tilde, t1b, "3 (eta1)")?;
        let (alpha1, alpha1_clamped) = clamp_alpha(layer.g.trace() / m2 as f64);
        // 5: extrinsic mean into the denoiser
        for i in 0..m2 {
            v2[i] = (gamma_tilde[i] - alpha1 * v1[i]) / (1.0 - alpha1);
        }
        ensure_finite(&v2, t1b, "5 (v2)")?;
        // 6: extrinsic precision, scaled by beta
        let c = alpha1 / (1.0 - alpha1);
        for i in 0..m2 {
            let raw = c * chi1[i] * layer.beta[i];
            chi2[i] = raw.max(CHI_FLOOR);
            chi2_pass[i] = raw > CHI_FLOOR;
        }
        // 7-8: denoise and measure the divergence
        let mut segs = record.then(Vec::new);
        eta2_into(&v2, &chi2, &layer.theta, &mut gamma_hat, &mut deriv, segs.as_mut());
        ensure_finite(&gamma_hat, t1b, "7 (eta2)")?;
        let alpha2_raw = deriv.mean();
        let clamped;
        (alpha2, clamped) = clamp_alpha(alpha2_raw);

        if let Some(tr) = trace.as_mut() {
            tr.layers.push(LayerState {
                v1: v1.clone(),
                chi1: chi1.clone(),
                gamma_tilde: gamma_tilde.clone(),
                v2: v2.clone(),
                chi2: chi2.clone(),
                gamma_hat: gamma_hat.clone(),
                deriv: deriv.clone(),
                segments: segs.take().unwrap_or_default(),
                alpha1,
                alpha1_clamped,
                alpha2,
                alpha2_raw,
                alpha2_clamped: clamped,
                chi1_passthrough: chi1_pass.clone(),
                chi2_passthrough: chi2_pass.clone(),
            });
        }
    }

    Ok((gamma_hat, trace))
}
