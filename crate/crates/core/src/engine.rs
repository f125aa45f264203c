//! The three-step inner-product protocol: weight encoding at the server,
//! unitary + amplify-and-split at the client, and the verification state that
//! goes back. Provided both as an analytic noise channel and as a quadrature
//! level Monte Carlo simulator used to cross-check the analytics.

use ndarray::ArrayView2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{build_unitary, ComplexVec, Gain, UnitaryMatrix};
use crate::rng;

/// Hardware configuration shared by server and client.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Mean photon number per weight symbol. `+inf` is the noiseless limit.
    pub mu: f64,
    pub gain: Gain,
    /// Server-to-client amplitude transmittance (power).
    pub forward_transmittance: f64,
    /// Server-to-client-to-server transmittance (power).
    pub roundtrip_transmittance: f64,
    pub modes: usize,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            mu: 4.0,
            gain: Gain::Finite(3.0),
            forward_transmittance: 1.0,
            roundtrip_transmittance: 1.0,
            modes: 392,
        }
    }
}

impl ProtocolParams {
    pub fn new(mu: f64, gain: Gain) -> Self {
        ProtocolParams {
            mu,
            gain,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_nan() || self.mu < 0.0 {
            return Err(Error::param("mu", format!("must be >= 0, got {}", self.mu)));
        }
        if let Gain::Finite(g) = self.gain {
            if g.is_nan() || g < 1.0 {
                return Err(Error::param("gain", format!("must be >= 1, got {g}")));
            }
        }
        let tf = self.forward_transmittance;
        let t = self.roundtrip_transmittance;
        if !(tf > 0.0 && tf <= 1.0) {
            return Err(Error::param(
                "forward_transmittance",
                format!("{tf} not in (0, 1]"),
            ));
        }
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::param(
                "roundtrip_transmittance",
                format!("{t} not in (0, 1]"),
            ));
        }
        if t > tf {
            return Err(Error::param(
                "roundtrip_transmittance",
                "round trip cannot transmit more than the forward path",
            ));
        }
        if self.modes == 0 {
            return Err(Error::param("modes", "must be positive"));
        }
        Ok(())
    }

    /// `F = sqrt(G(G-1)/(2G^2-3G+2) * T_f * mu)`. Forward loss enters as a
    /// reduced received photon number.
    pub fn physical_scaling(&self) -> f64 {
        physical_scaling(self.forward_transmittance * self.mu, self.gain)
    }

    fn return_transmittance(&self) -> f64 {
        self.roundtrip_transmittance / self.forward_transmittance
    }
}

/// `F = sqrt(G(G-1)/(2G^2-3G+2) * mu)`.
pub fn physical_scaling(mu: f64, gain: Gain) -> f64 {
    (gain.snr_factor() * mu).sqrt()
}

/// Root mean square of all entries of a matrix.
pub fn matrix_rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Physical amplitudes for one weight row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedWeights {
    pub amplitudes: ComplexVec,
    pub rms: f64,
    pub mu: f64,
}

/// `w_j = sqrt(mu) W_j / ||W||_RMS`, so the mean photon number over the whole
/// matrix is `mu`.
pub fn encode_weights(row: &ComplexVec, w_rms: f64, mu: f64) -> Result<EncodedWeights> {
    if w_rms.is_nan() || w_rms <= 0.0 {
        return Err(Error::Degenerate(format!(
            "weight matrix RMS must be positive, got {w_rms}"
        )));
    }
    if mu.is_nan() || mu < 0.0 {
        return Err(Error::param("mu", format!("must be >= 0, got {mu}")));
    }
    let scale = mu.sqrt() / w_rms;
    let amplitudes = ComplexVec::new(row.as_slice().iter().map(|w| w * scale).collect());
    Ok(EncodedWeights {
        amplitudes,
        rms: w_rms,
        mu,
    })
}

/// SNR of the client's detector for a transmitted inner-product amplitude
/// `w . x_hat` (forward loss applied).
pub fn snr(params: &ProtocolParams, inner_amplitude: Complex64) -> Result<f64> {
    params.validate()?;
    Ok(params.gain.snr_factor() * params.forward_transmittance * inner_amplitude.norm_sqr())
}

/// Digital factor that turns the detector reading into an unbiased estimate
/// of `W_i . x`: `(||x|| / sqrt(G-1)) (||W||_RMS / sqrt(mu))`.
pub fn rescale_factor(params: &ProtocolParams, x_norm: f64, w_rms: f64) -> Result<f64> {
    params.validate()?;
    if params.gain.is_unity() || params.mu == 0.0 {
        return Err(Error::NoSignal);
    }
    let received_mu = params.forward_transmittance * params.mu;
    Ok(x_norm / params.gain.detector_amplitude_gain() * w_rms / received_mu.sqrt())
}

/// Standard deviation of the rescaled inner product, `||x|| ||W||_RMS / F`.
pub fn channel_noise_std(x_norm: f64, w_rms: f64, scaling: f64) -> Result<f64> {
    if scaling.is_nan() || scaling <= 0.0 {
        return Err(Error::NoSignal);
    }
    Ok(x_norm * w_rms / scaling)
}

/// One noisy inner product as seen by the client after rescaling:
/// `W_row . x + N(0, s^2)` with `s = ||x|| ||W||_RMS / F`.
pub fn inner_product_channel(
    w_row: &[f64],
    w_rms: f64,
    x: &[f64],
    params: &ProtocolParams,
    seed: u64,
) -> Result<f64> {
    inner_product_channel_with(w_row, w_rms, x, params, &mut rng::seeded(seed))
}

pub fn inner_product_channel_with<R: Rng + ?Sized>(
    w_row: &[f64],
    w_rms: f64,
    x: &[f64],
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<f64> {
    params.validate()?;
    if w_row.len() != x.len() {
        return Err(Error::param("x", "length differs from the weight row"));
    }
    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if x_norm == 0.0 {
        return Err(Error::Degenerate("data vector is zero".into()));
    }
    let std = channel_noise_std(x_norm, w_rms, params.physical_scaling())?;
    let exact: f64 = w_row.iter().zip(x).map(|(w, v)| w * v).sum();
    let noise: f64 = rng.sample(StandardNormal);
    Ok(exact + std * noise)
}

/// Row-by-row channel over a whole matrix; one seed for the batch.
pub fn matvec_channel(
    w: ArrayView2<'_, f64>,
    w_rms: f64,
    x: &[f64],
    params: &ProtocolParams,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = rng::seeded(seed);
    w.rows()
        .into_iter()
        .map(|row| {
            let row = row.to_vec();
            inner_product_channel_with(&row, w_rms, x, params, &mut rng)
        })
        .collect()
}

/// Empirical moments of the verification state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationStats {
    pub mean: ComplexVec,
    /// Per-mode variance, averaged over the two quadratures.
    pub variance: Vec<f64>,
    /// Per-mode `[Var X, Var P]`.
    pub quadrature_variance: Vec<[f64; 2]>,
    pub sample_count: usize,
}

/// Quadrature-level sampler of one protocol round.
#[derive(Clone, Debug)]
pub struct RoundtripSampler {
    unitary: UnitaryMatrix,
    weights: Vec<Complex64>,
    gain: Gain,
    forward_t: f64,
    return_t: f64,
}

/// One sampled round: verification-state amplitudes and the raw detector port.
#[derive(Clone, Debug)]
pub struct RoundtripSample {
    pub verification: Vec<Complex64>,
    pub detector: Complex64,
}

fn vacuum<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

impl RoundtripSampler {
    pub fn new(x_hat: &ComplexVec, weights: &ComplexVec, params: &ProtocolParams) -> Result<Self> {
        params.validate()?;
        if x_hat.len() != weights.len() {
            return Err(Error::param(
                "weights",
                "length differs from the data vector",
            ));
        }
        Ok(RoundtripSampler {
            unitary: build_unitary(x_hat)?,
            weights: weights.as_slice().to_vec(),
            gain: params.gain,
            forward_t: params.forward_transmittance,
            return_t: params.return_transmittance(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RoundtripSample {
        // coherent states: unit variance per quadrature about the weight amplitude
        let received: Vec<Complex64> = self
            .weights
            .iter()
            .map(|w| {
                let state = w + vacuum(rng);
                if self.forward_t < 1.0 {
                    state * self.forward_t.sqrt() + vacuum(rng) * (1.0 - self.forward_t).sqrt()
                } else {
                    state
                }
            })
            .collect();
        let mut modes = self.unitary.apply(&received);
        let result = modes[0];

        let (detector, reinjected) = match self.gain {
            Gain::Finite(g) => {
                let amp_noise = vacuum(rng);
                // P picks up the conjugate of the idler noise.
                let amplified = result * g.sqrt()
                    + Complex64::new(amp_noise.re, -amp_noise.im) * (g - 1.0).sqrt();
                let dark = vacuum(rng);
                let t_det = (1.0 - 1.0 / g).sqrt();
                let t_back = (1.0 / g).sqrt();
                (
                    amplified * t_det - dark * t_back,
                    amplified * t_back + dark * t_det,
                )
            }
            Gain::FeedForward => {
                // both quadratures measured, then a coherent state is reinjected
                let reading = result + vacuum(rng);
                (reading, reading + vacuum(rng))
            }
        };
        modes[0] = reinjected;

        let mut verification = self.unitary.apply_adjoint(&modes);
        if self.return_t < 1.0 {
            for v in verification.iter_mut() {
                *v = *v * self.return_t.sqrt() + vacuum(rng) * (1.0 - self.return_t).sqrt();
            }
        }
        RoundtripSample {
            verification,
            detector,
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn variance(&self) -> f64 {
        self.m2 / (self.n - 1.0)
    }
}

pub const MIN_MC_SAMPLES: usize = 1000;

/// Monte Carlo round trip: sample coherent inputs, apply `U`, amplify and split
/// the result mode, apply `U†`, and collect the verification-state moments.
pub fn simulate_roundtrip_mc(
    x_hat: &ComplexVec,
    weights: &ComplexVec,
    params: &ProtocolParams,
    n_samples: usize,
    seed: u64,
) -> Result<VerificationStats> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::param(
            "n_samples",
            format!("need at least {MIN_MC_SAMPLES}, got {n_samples}"),
        ));
    }
    let sampler = RoundtripSampler::new(x_hat, weights, params)?;
    let n = x_hat.len();
    let mut acc = vec![[Welford::default(); 2]; n];
    let mut rng = rng::seeded(seed);
    for _ in 0..n_samples {
        let s = sampler.sample(&mut rng);
        for (a, v) in acc.iter_mut().zip(&s.verification) {
            a[0].push(v.re);
            a[1].push(v.im);
        }
    }
    let mean = acc
        .iter()
        .map(|a| Complex64::new(a[0].mean, a[1].mean))
        .collect();
    let quadrature_variance: Vec<[f64; 2]> = acc
        .iter()
        .map(|a| [a[0].variance(), a[1].variance()])
        .collect();
    Ok(VerificationStats {
        mean: ComplexVec::new(mean),
        variance: quadrature_variance
            .iter()
            .map(|q| 0.5 * (q[0] + q[1]))
            .collect(),
        quadrature_variance,
        sample_count: n_samples,
    })
}

/// Raw detector-port amplitudes from `n_samples` Monte Carlo rounds.
pub fn sample_detector_readings(
    x_hat: &ComplexVec,
    weights: &ComplexVec,
    params: &ProtocolParams,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let sampler = RoundtripSampler::new(x_hat, weights, params)?;
    let mut rng = rng::seeded(seed);
    Ok((0..n_samples)
        .map(|_| sampler.sample(&mut rng).detector)
        .collect())
}

/// Mean signal power at the detector and in the reinjected mode for a result
/// amplitude with `|w . x_hat|^2 = inner_sq`.
pub fn split_signal_powers(gain: Gain, inner_sq: f64) -> (f64, f64) {
    match gain {
        Gain::Finite(g) => (g * (1.0 - 1.0 / g) * inner_sq, (1.0 / g) * g * inner_sq),
        Gain::FeedForward => (inner_sq, inner_sq),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(mu: f64, g: f64) -> ProtocolParams {
        ProtocolParams::new(mu, Gain::new(g).unwrap())
    }

    #[test]
    fn encode_examples() {
        let zero = encode_weights(&ComplexVec::zeros(3), 1.0, 4.0).unwrap();
        assert!(zero.amplitudes.as_slice().iter().all(|c| c.norm() == 0.0));
        let enc = encode_weights(&ComplexVec::from_real(&[1.0, -1.0]), 1.0, 4.0).unwrap();
        assert_eq!(enc.amplitudes.as_slice()[0], Complex64::new(2.0, 0.0));
        assert_eq!(enc.amplitudes.as_slice()[1], Complex64::new(-2.0, 0.0));
        assert!(matches!(
            encode_weights(&ComplexVec::zeros(2), 0.0, 4.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn encoded_matrix_has_mean_photon_number_mu() {
        let entries: Vec<f64> = (0..64)
            .map(|i| if i % 3 == 0 { 1.0 } else { -1.0 })
            .collect();
        let rms = matrix_rms(&entries);
        let mut total = 0.0;
        for row in entries.chunks(8) {
            let enc = encode_weights(&ComplexVec::from_real(row), rms, 4.0).unwrap();
            total += enc
                .amplitudes
                .as_slice()
                .iter()
                .map(|c| c.norm_sqr())
                .sum::<f64>();
        }
        assert_abs_diff_eq!(total / 64.0, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn snr_examples() {
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(snr(&params(4.0, 1.0), one).unwrap(), 0.0);
        assert_abs_diff_eq!(
            snr(&params(4.0, 3.0), one).unwrap(),
            6.0 / 11.0,
            epsilon = 1e-15
        );
        let ff = ProtocolParams::new(4.0, Gain::FeedForward);
        assert_eq!(snr(&ff, one).unwrap(), 0.5);
    }

    #[test]
    fn rescale_examples() {
        assert_abs_diff_eq!(rescale_factor(&params(1.0, 2.0), 1.0, 1.0).unwrap(), 1.0);
        let expected = (2.0 / 2f64.sqrt()) * (0.5 / 2.0);
        assert_abs_diff_eq!(
            rescale_factor(&params(4.0, 3.0), 2.0, 0.5).unwrap(),
            expected,
            epsilon = 1e-15
        );
        assert!(matches!(
            rescale_factor(&params(4.0, 1.0), 1.0, 1.0),
            Err(Error::NoSignal)
        ));
        assert!(matches!(
            rescale_factor(&params(0.0, 3.0), 1.0, 1.0),
            Err(Error::NoSignal)
        ));
    }

    #[test]
    fn physical_scaling_at_operating_point() {
        assert_abs_diff_eq!(
            params(4.0, 3.0).physical_scaling(),
            (24.0f64 / 11.0).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!((24.0f64 / 11.0).sqrt(), 1.4771, epsilon = 1e-4);
    }

    #[test]
    fn channel_noiseless_limit_and_errors() {
        let p = params(f64::INFINITY, 3.0);
        let y = inner_product_channel(&[1.0, 2.0], 1.0, &[3.0, -1.0], &p, 1).unwrap();
        assert_eq!(y, 1.0);
        let p = params(4.0, 1.0);
        assert!(matches!(
            inner_product_channel(&[1.0], 1.0, &[1.0], &p, 1),
            Err(Error::NoSignal)
        ));
        let p = params(4.0, 3.0);
        assert!(inner_product_channel(&[1.0], 1.0, &[0.0], &p, 1).is_err());
        assert_eq!(
            inner_product_channel(&[1.0, 0.5], 1.0, &[0.3, 0.1], &p, 9).unwrap(),
            inner_product_channel(&[1.0, 0.5], 1.0, &[0.3, 0.1], &p, 9).unwrap()
        );
    }

    #[test]
    fn params_validation() {
        let mut p = ProtocolParams::default();
        assert!(p.validate().is_ok());
        p.roundtrip_transmittance = 0.5;
        p.forward_transmittance = 0.4;
        assert!(p.validate().is_err());
        p.forward_transmittance = 0.0;
        assert!(p.validate().is_err());
        let p = ProtocolParams {
            mu: -1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn beamsplitter_conserves_signal_power() {
        for &g in &[1.0, 1.5, 3.0, 100.0] {
            let (det, back) = split_signal_powers(Gain::new(g).unwrap(), 2.5);
            assert_abs_diff_eq!(det + back, g * 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn mc_requires_enough_samples() {
        let x = ComplexVec::from_real(&[1.0, 0.0]);
        let w = ComplexVec::zeros(2);
        assert!(simulate_roundtrip_mc(&x, &w, &params(4.0, 3.0), 10, 0).is_err());
    }
}
