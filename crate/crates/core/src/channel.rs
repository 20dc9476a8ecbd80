//! Power normalization, the AWGN channel, and SNR/PNR conversions.
//!
//! Signal power is fixed at 1.0: every latent block is rescaled to unit mean
//! square before transmission, so the noise variance alone sets the SNR.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Transmit power per channel use after normalization.
pub const SIGNAL_POWER: f64 = 1.0;

/// Rows with mean square below this cannot be meaningfully normalized.
const DEGENERATE_POWER: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelConfig {
    /// Signal-to-noise ratio in dB.
    pub snr_db: f64,
    /// Number of real channel uses per image (the latent width).
    pub n_uses: usize,
}

impl ChannelConfig {
    /// Noise variance per channel use: `10^(-snr_db/10) * SIGNAL_POWER`.
    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0) * SIGNAL_POWER
    }
}

/// Perturbation power corresponding to a perturbation-to-noise ratio:
/// `p = 10^(pnr_db/10) * noise_variance(snr_db)`.
///
/// At `pnr_db = 0` a perturbation is exactly as strong as the channel noise.
pub fn pnr_to_power(pnr_db: f64, snr_db: f64) -> f64 {
    let noise = ChannelConfig { snr_db, n_uses: 0 }.noise_variance();
    10f64.powf(pnr_db / 10.0) * noise
}

/// Scales each row of `z` to mean square exactly [`SIGNAL_POWER`]:
/// `z_row * sqrt(n) / ||z_row||_2` for rows of width `n`.
///
/// Fails on a row whose power underflows to (near) zero, since there is no
/// direction to preserve.
pub fn power_normalize(z: &Matrix) -> Result<Matrix> {
    let mut out = z.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let mean_sq: f64 = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
        if !mean_sq.is_finite() || mean_sq < DEGENERATE_POWER {
            return Err(Error::DegenerateSignal(format!(
                "row {} has mean square {:e}; cannot normalize",
                r, mean_sq
            )));
        }
        let scale = (SIGNAL_POWER / mean_sq).sqrt();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(out)
}

/// Gradient of a scalar loss through [`power_normalize`].
///
/// For one row with `s = sqrt(mean(z^2))` and `n` entries, the normalized
/// output is `u = z / s`, and for upstream gradient `g`:
/// `dL/dz_i = g_i / s - (sum_j g_j z_j) * z_i / (n * s^3)`.
/// The second term projects out the component of `g` along `z`, reflecting
/// that rescaling `z` cannot change the transmitted signal.
pub fn power_normalize_backward(z: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    if !z.same_shape(upstream) {
        return Err(Error::dimension(
            "power_normalize_backward",
            format!(
                "{}x{} signal vs {}x{} gradient",
                z.rows(),
                z.cols(),
                upstream.rows(),
                upstream.cols()
            ),
        ));
    }
    let n = z.cols() as f64;
    let mut out = Matrix::zeros(z.rows(), z.cols());
    for r in 0..z.rows() {
        let zr = z.row(r);
        let gr = upstream.row(r);
        let mean_sq: f64 = zr.iter().map(|v| v * v).sum::<f64>() / n;
        if !mean_sq.is_finite() || mean_sq < DEGENERATE_POWER {
            return Err(Error::DegenerateSignal(format!(
                "row {} has mean square {:e}; cannot normalize",
                r, mean_sq
            )));
        }
        let s = mean_sq.sqrt();
        let inner: f64 = gr.iter().zip(zr).map(|(g, z)| g * z).sum();
        let coef = inner / (n * s * s * s);
        for (o, (&g, &zv)) in out.row_mut(r).iter_mut().zip(gr.iter().zip(zr)) {
            *o = g / s - coef * zv;
        }
    }
    Ok(out)
}

/// A matrix of i.i.d. `N(0, variance)` draws, consuming exactly
/// `rows * cols` samples from `rng` in row-major order.
pub fn noise_matrix(rows: usize, cols: usize, variance: f64, rng: &mut impl Rng) -> Matrix {
    let sd = variance.sqrt();
    let mut out = Matrix::zeros(rows, cols);
    for v in out.data_mut() {
        let n: f64 = StandardNormal.sample(rng);
        *v = sd * n;
    }
    out
}

/// Passes `x` through the AWGN channel at the given SNR: adds fresh
/// i.i.d. `N(0, noise_variance)` to every entry.
///
/// The channel is an identity map plus noise, so gradients pass through
/// unchanged; callers backpropagate through it by simply reusing the
/// downstream gradient.
pub fn awgn(x: &Matrix, snr_db: f64, rng: &mut impl Rng) -> Matrix {
    let cfg = ChannelConfig { snr_db, n_uses: x.cols() };
    let mut out = x.clone();
    let noise = noise_matrix(x.rows(), x.cols(), cfg.noise_variance(), rng);
    out.add_assign(&noise).expect("same shape by construction");
    out
}
