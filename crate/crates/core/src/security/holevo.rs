//! Holevo bound on the information an individual attacker gains about one
//! Gaussian-modulated weight symbol, in the entanglement-based picture: a
//! two-mode squeezed vacuum of variance `V = 2 mu + 1` whose second mode
//! passes a channel of transmittance `T` and excess noise `xi`.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{entropy_g, symplectic_eigenvalues, QuadratureCovariance};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// Lossy-channel constants: `c = sqrt(T(V^2-1))`, `nu3 = b - c^2/(a+1)`.
    #[default]
    Methods,
    /// Constants as printed for the lossless case: `c = sqrt(4mu^2+2mu+1)`,
    /// `nu3 = a - c^2/(b+1)`.
    MainText,
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Formulation::Methods => "methods",
            Formulation::MainText => "main-text",
        })
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "methods" => Ok(Formulation::Methods),
            "main-text" | "main_text" | "maintext" => Ok(Formulation::MainText),
            other => Err(Error::param("formulation", format!("unknown `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolevoInputs {
    pub mu: f64,
    /// Excess noise added by the client, SNU.
    pub eta: f64,
    pub transmittance: f64,
    /// Channel excess noise on top of `eta`.
    pub extra_excess: f64,
    pub formulation: Formulation,
}

impl HolevoInputs {
    pub fn new(mu: f64, eta: f64) -> Self {
        HolevoInputs {
            mu,
            eta,
            transmittance: 1.0,
            extra_excess: 0.0,
            formulation: Formulation::Methods,
        }
    }

    pub fn with_transmittance(self, transmittance: f64) -> Self {
        HolevoInputs {
            transmittance,
            ..self
        }
    }

    pub fn with_formulation(self, formulation: Formulation) -> Self {
        HolevoInputs {
            formulation,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::param(
                "mu",
                format!("must be finite and >= 0, got {}", self.mu),
            ));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::param(
                "eta",
                format!("must be finite and >= 0, got {}", self.eta),
            ));
        }
        if !(self.extra_excess >= 0.0) || !self.extra_excess.is_finite() {
            return Err(Error::param("extra_excess", "must be finite and >= 0"));
        }
        let t = self.transmittance;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::param("transmittance", format!("{t} not in (0, 1]")));
        }
        Ok(())
    }
}

/// Intermediate quantities of the closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolevoTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    /// Unclamped `g(nu1) + g(nu2) - g(nu3)`.
    pub chi_raw: f64,
}

impl HolevoTerms {
    pub fn chi(&self) -> f64 {
        self.chi_raw.max(0.0)
    }
}

fn abc(inputs: &HolevoInputs) -> (f64, f64, f64) {
    let v = 2.0 * inputs.mu + 1.0;
    let t = inputs.transmittance;
    let xi = inputs.eta + inputs.extra_excess;
    let a = v;
    let b = t * (v - 1.0) + 1.0 + xi;
    let c = match inputs.formulation {
        Formulation::Methods => (t * (v * v - 1.0)).sqrt(),
        Formulation::MainText => {
            let mu = inputs.mu;
            (4.0 * mu * mu + 2.0 * mu + 1.0).sqrt()
        }
    };
    (a, b, c)
}

/// Entropy arguments below 1 by less than this are rounded up to 1.
const NU_SLACK: f64 = 1e-9;

fn g_clamped(nu: f64) -> Result<f64> {
    if (1.0 - NU_SLACK..1.0).contains(&nu) {
        return Ok(0.0);
    }
    entropy_g(nu).map_err(|_| Error::Domain {
        function: "holevo_weight_leakage",
        value: nu,
    })
}

pub fn holevo_terms(inputs: &HolevoInputs) -> Result<HolevoTerms> {
    inputs.validate()?;
    let (a, b, c) = abc(inputs);
    let disc = (a + b).powi(2) - 4.0 * c * c;
    if disc < 0.0 {
        return Err(Error::Domain {
            function: "holevo_weight_leakage",
            value: disc,
        });
    }
    let z = disc.sqrt();
    let nu1 = 0.5 * (z + (b - a));
    let nu2 = 0.5 * (z - (b - a));
    let nu3 = match inputs.formulation {
        Formulation::Methods => b - c * c / (a + 1.0),
        Formulation::MainText => a - c * c / (b + 1.0),
    };
    let chi_raw = g_clamped(nu1)? + g_clamped(nu2)? - g_clamped(nu3)?;
    Ok(HolevoTerms {
        a,
        b,
        c,
        z,
        nu1,
        nu2,
        nu3,
        chi_raw,
    })
}

/// Weight leakage in bits per symbol, clamped at zero.
pub fn holevo_weight_leakage(inputs: &HolevoInputs) -> Result<f64> {
    Ok(holevo_terms(inputs)?.chi())
}

/// Same quantity from the covariance matrices: the joint spectrum of the
/// two-mode state and the conditional state left after a heterodyne
/// measurement on the conditioning mode, both through the general symplectic
/// eigen-solver.
pub fn holevo_weight_leakage_matrix(inputs: &HolevoInputs) -> Result<f64> {
    inputs.validate()?;
    let (a, b, c) = abc(inputs);
    let joint = QuadratureCovariance::two_mode_block(a, b, c)?;
    let joint_entropy = symplectic_eigenvalues(&joint)?.entropy()?;

    // Methods conditions the channel output on the reference mode; the
    // printed lossless constants condition the other way round.
    let m = joint.matrix();
    let (keep, cond) = match inputs.formulation {
        Formulation::Methods => (2, 0),
        Formulation::MainText => (0, 2),
    };
    let sigma_keep = m.fixed_view::<2, 2>(keep, keep).into_owned();
    let sigma_cond = m.fixed_view::<2, 2>(cond, cond).into_owned();
    let sigma_cross = m.fixed_view::<2, 2>(keep, cond).into_owned();
    let inv = (sigma_cond + Matrix2::identity())
        .try_inverse()
        .ok_or_else(|| Error::Matrix("singular conditioning block".into()))?;
    let schur = sigma_keep - sigma_cross * inv * sigma_cross.transpose();
    let conditional =
        QuadratureCovariance::new(DMatrix::from_column_slice(2, 2, schur.as_slice()))?;
    let spectrum = symplectic_eigenvalues(&conditional)?;
    let nu3 = spectrum.values()[0];
    Ok((joint_entropy - g_clamped(nu3)?).max(0.0))
}
