//! Gaussian-state algebra for the client's interferometer.
//!
//! Quadratures follow `X = a + a†`, `P = (a - a†)/i`, so the vacuum has unit
//! variance (one shot-noise unit, SNU) in each quadrature. A covariance matrix
//! over `N` modes is `2N x 2N` with mode `i` owning rows/columns `2i, 2i + 1`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-9;
const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Symplectic eigenvalues below `1 - PHYSICAL_TOLERANCE` violate the uncertainty principle.
pub const PHYSICAL_TOLERANCE: f64 = 1e-9;

/// Client amplifier gain. `FeedForward` is the `G -> infinity` limit, where the
/// result mode is measured and a fresh coherent state is reinjected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gain {
    Finite(f64),
    FeedForward,
}

impl Gain {
    pub fn new(gain: f64) -> Result<Self> {
        if gain.is_nan() || gain < 1.0 {
            return Err(Error::param("gain", format!("must be >= 1, got {gain}")));
        }
        if gain.is_infinite() {
            Ok(Gain::FeedForward)
        } else {
            Ok(Gain::Finite(gain))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Gain::Finite(g) => g,
            Gain::FeedForward => f64::INFINITY,
        }
    }

    /// `2 - 2/G`: variance added to the reinjected result mode.
    pub fn excess_noise_factor(self) -> f64 {
        match self {
            Gain::Finite(g) => 2.0 - 2.0 / g,
            Gain::FeedForward => 2.0,
        }
    }

    /// `G(G-1) / (2G^2 - 3G + 2)`: SNR of the detector per unit `|w . x|^2`.
    pub fn snr_factor(self) -> f64 {
        match self {
            Gain::Finite(g) => g * (g - 1.0) / (2.0 * g * g - 3.0 * g + 2.0),
            Gain::FeedForward => 0.5,
        }
    }

    /// Amplitude transfer from the result mode to the detector port, `sqrt(G - 1)`.
    /// The feed-forward limit reads the result mode at unit gain.
    pub fn detector_amplitude_gain(self) -> f64 {
        match self {
            Gain::Finite(g) => (g - 1.0).sqrt(),
            Gain::FeedForward => 1.0,
        }
    }

    pub fn is_unity(self) -> bool {
        matches!(self, Gain::Finite(g) if g == 1.0)
    }
}

impl fmt::Display for Gain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gain::Finite(g) => write!(f, "{g}"),
            Gain::FeedForward => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Gain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "feedforward" => Ok(Gain::FeedForward),
            other => {
                let g: f64 = other
                    .parse()
                    .map_err(|_| Error::param("gain", format!("cannot parse `{s}`")))?;
                Gain::new(g)
            }
        }
    }
}

impl Serialize for Gain {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gain::Finite(g) => serializer.serialize_f64(*g),
            Gain::FeedForward => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Gain {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        let gain = match Repr::deserialize(deserializer)? {
            Repr::Number(g) => Gain::new(g),
            Repr::Text(s) => s.parse(),
        };
        gain.map_err(serde::de::Error::custom)
    }
}

/// Complex amplitudes over a set of optical modes.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexVec(Vec<Complex64>);

impl ComplexVec {
    pub fn new(elements: Vec<Complex64>) -> Self {
        ComplexVec(elements)
    }

    pub fn from_real(values: &[f64]) -> Self {
        ComplexVec(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(len: usize) -> Self {
        ComplexVec(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::Degenerate("cannot normalize the zero vector".into()));
        }
        if !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(ComplexVec(self.0.iter().map(|c| c / norm).collect()))
    }

    /// Bilinear product `sum_j self_j * other_j`, without conjugation. This is
    /// what the result mode of the client's unitary carries.
    pub fn dot(&self, other: &ComplexVec) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Degenerate("empty vector".into()));
        }
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::Degenerate("zero vector".into()));
        }
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ComplexVec {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl From<Vec<Complex64>> for ComplexVec {
    fn from(v: Vec<Complex64>) -> Self {
        ComplexVec(v)
    }
}

/// The client's data-dependent unitary. Row 0 is the normalized data vector,
/// so the first output mode carries the inner product with the input.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(DMatrix<Complex64>);

impl UnitaryMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `U† v`.
    pub fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.0[(j, i)].conj() * v[j]).sum())
            .collect()
    }

    /// Largest elementwise deviation of `U U†` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let product = &self.0 * self.0.adjoint();
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((product[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Completes the normalized `x_hat` to a unitary whose first row is `x_hat`.
///
/// The completion is a Householder reflection sending `e0` to `conj(x_hat)`
/// (after stripping the phase of its first entry), which makes it
/// deterministic for a given input.
pub fn build_unitary(x_hat: &ComplexVec) -> Result<UnitaryMatrix> {
    x_hat.require_normalized()?;
    let x_hat = x_hat.normalized()?;
    let n = x_hat.len();

    let y: Vec<Complex64> = x_hat.as_slice().iter().map(|c| c.conj()).collect();
    let lead = y[0].norm();
    let phase = if lead > 0.0 {
        y[0] / lead
    } else {
        Complex64::new(1.0, 0.0)
    };
    let y_rot: Vec<Complex64> = y.iter().map(|c| c / phase).collect();

    // v = y_rot - e0, with the first component computed without cancellation.
    let tail: f64 = y_rot[1..].iter().map(|c| c.norm_sqr()).sum();
    let mut v = y_rot.clone();
    v[0] = Complex64::new(-tail / (1.0 + lead), 0.0);
    let v_norm_sq = v[0].norm_sqr() + tail;

    let mut h = DMatrix::<Complex64>::identity(n, n);
    if v_norm_sq > 0.0 {
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] -= v[i] * v[j].conj() * (2.0 / v_norm_sq);
            }
        }
    }
    // U = conj(phase) * H. H is Hermitian, so this is the adjoint of phase * H.
    let mut u = h.map(|c| c * phase.conj());
    for j in 0..n {
        u[(0, j)] = x_hat[j];
    }
    Ok(UnitaryMatrix(u))
}

/// Quadrature variance after a phase-insensitive amplifier of gain `G` acting
/// on a coherent state: `2G - 1`.
pub fn amplifier_variance(gain: f64) -> Result<f64> {
    let g = Gain::new(gain)?;
    Ok(2.0 * g.value() - 1.0)
}

/// Quadrature variances at the two outputs of the `1 - 1/G : 1/G` splitter
/// that follows the amplifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitVariances {
    /// Variance at the detector port. In the feed-forward limit this is the
    /// variance per unit signal amplitude (the reading is normalized by `sqrt(G - 1)`).
    pub detector_var: f64,
    /// Variance of the light reinjected into the result mode.
    pub reinjected_var: f64,
}

pub fn amplify_split_variances(gain: f64) -> Result<SplitVariances> {
    Ok(split_variances(Gain::new(gain)?))
}

pub fn split_variances(gain: Gain) -> SplitVariances {
    match gain {
        Gain::Finite(g) => SplitVariances {
            detector_var: (2.0 * g * g - 3.0 * g + 2.0) / g,
            reinjected_var: 1.0 + gain.excess_noise_factor(),
        },
        Gain::FeedForward => SplitVariances {
            detector_var: 2.0,
            reinjected_var: 3.0,
        },
    }
}

/// Real symmetric `2N x 2N` quadrature covariance in shot-noise units.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureCovariance(DMatrix<f64>);

impl QuadratureCovariance {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r != c || r % 2 != 0 || r == 0 {
            return Err(Error::Matrix(format!(
                "covariance must be 2N x 2N, got {r} x {c}"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Matrix("covariance has non-finite entries".into()));
        }
        let scale = matrix.amax().max(1.0);
        for i in 0..r {
            for j in (i + 1)..r {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::Matrix(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(QuadratureCovariance(matrix))
    }

    pub fn vacuum(modes: usize) -> Self {
        QuadratureCovariance(DMatrix::identity(2 * modes, 2 * modes))
    }

    /// Single-mode thermal state `diag(V, V)`.
    pub fn thermal(variance: f64) -> Result<Self> {
        Self::new(DMatrix::from_diagonal_element(2, 2, variance))
    }

    /// Two-mode squeezed vacuum `[[V 1, sqrt(V^2-1) Z], [sqrt(V^2-1) Z, V 1]]`.
    pub fn two_mode_squeezed_vacuum(variance: f64) -> Result<Self> {
        if variance < 1.0 {
            return Err(Error::param("variance", "TMSV variance must be >= 1"));
        }
        let c = (variance * variance - 1.0).sqrt();
        Self::two_mode_block(variance, variance, c)
    }

    /// `[[a 1, c Z], [c Z, b 1]]`, the standard form of a phase-symmetric
    /// two-mode Gaussian state.
    pub fn two_mode_block(a: f64, b: f64, c: f64) -> Result<Self> {
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            a,   0.0, c,   0.0,
            0.0, a,   0.0, -c,
            c,   0.0, b,   0.0,
            0.0, -c,  0.0, b,
        ]);
        Self::new(m)
    }

    /// Embeds a Hermitian mode covariance `C` (phase-insensitive noise) as the
    /// quadrature matrix with `2x2` blocks `[[Re c, -Im c], [Im c, Re c]]`.
    pub fn from_complex(c: &DMatrix<Complex64>) -> Result<Self> {
        let n = c.nrows();
        if c.ncols() != n {
            return Err(Error::Matrix("complex covariance must be square".into()));
        }
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = c[(i, j)];
                m[(2 * i, 2 * j)] = z.re;
                m[(2 * i, 2 * j + 1)] = -z.im;
                m[(2 * i + 1, 2 * j)] = z.im;
                m[(2 * i + 1, 2 * j + 1)] = z.re;
            }
        }
        Self::new(m)
    }

    pub fn modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `(Var X_i, Var P_i)`.
    pub fn quadrature_variances(&self, mode: usize) -> (f64, f64) {
        (
            self.0[(2 * mode, 2 * mode)],
            self.0[(2 * mode + 1, 2 * mode + 1)],
        )
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Reorders modes: output mode `k` is input mode `perm[k]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.modes();
        if perm.len() != n {
            return Err(Error::Matrix("permutation length mismatch".into()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Matrix("not a permutation".into()));
            }
        }
        let m = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            self.0[(2 * perm[r / 2] + r % 2, 2 * perm[c / 2] + c % 2)]
        });
        Ok(QuadratureCovariance(m))
    }
}

/// Symplectic eigenvalues, one per mode, sorted descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymplecticSpectrum(Vec<f64>);

impl SymplecticSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_physical(&self) -> bool {
        self.0.iter().all(|&v| v >= 1.0 - PHYSICAL_TOLERANCE)
    }

    /// Von Neumann entropy `sum_i g(nu_i)` in bits.
    pub fn entropy(&self) -> Result<f64> {
        self.0.iter().map(|&v| entropy_g(v)).sum()
    }
}

/// The symplectic form `⊕ [[0, 1], [-1, 0]]`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Moduli of the eigenvalues of `i Ω Σ`.
///
/// `i Ω Σ` is similar to the Hermitian matrix `i Σ^{1/2} Ω Σ^{1/2}`, whose
/// eigenvalues come in pairs `±ν_k`; that form is diagonalized instead of the
/// non-normal original.
pub fn symplectic_eigenvalues(cov: &QuadratureCovariance) -> Result<SymplecticSpectrum> {
    let sigma = cov.matrix();
    let n = cov.modes();
    let eig = sigma.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Matrix("covariance is not positive definite".into()));
    }
    let sqrt_vals = DVector::from_iterator(2 * n, eig.eigenvalues.iter().map(|l| l.sqrt()));
    let root =
        &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let a = &root * symplectic_form(n) * &root;
    let h = a.map(|v| Complex64::new(0.0, v));
    let spectrum = h.symmetric_eigen().eigenvalues;

    let mut moduli: Vec<f64> = spectrum.iter().map(|v| v.abs()).collect();
    moduli.sort_by(|x, y| y.total_cmp(x));
    let values = moduli
        .chunks(2)
        .map(|pair| 0.5 * (pair[0] + pair[1]))
        .collect();
    Ok(SymplecticSpectrum(values))
}

/// Entropy in bits of a thermal mode with symplectic eigenvalue `nu`:
/// `((nu+1)/2) log2((nu+1)/2) - ((nu-1)/2) log2((nu-1)/2)`.
pub fn entropy_g(nu: f64) -> Result<f64> {
    if nu.is_nan() || nu < 1.0 - PHYSICAL_TOLERANCE {
        return Err(Error::Domain {
            function: "g",
            value: nu,
        });
    }
    if nu <= 1.0 {
        return Ok(0.0);
    }
    let plus = 0.5 * (nu + 1.0);
    let minus = 0.5 * (nu - 1.0);
    Ok(plus * plus.log2() - minus * minus.log2())
}

/// `Σ = 1 + (2 - 2/G) x_hat† x_hat` in quadrature form: the verification
/// state covariance after `U†` spreads the result-mode excess noise.
pub fn verification_covariance(x_hat: &ComplexVec, gain: Gain) -> Result<QuadratureCovariance> {
    x_hat.require_normalized()?;
    let kappa = gain.excess_noise_factor();
    let n = x_hat.len();
    let c = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) + x_hat[i].conj() * x_hat[j] * kappa
    });
    QuadratureCovariance::from_complex(&c)
}

/// Per-mode excess noise `η_i = (2 - 2/G) |x_hat_i|^2`.
pub fn excess_noise(x_hat: &ComplexVec, gain: Gain) -> Vec<f64> {
    let kappa = gain.excess_noise_factor();
    x_hat
        .as_slice()
        .iter()
        .map(|c| kappa * c.norm_sqr())
        .collect()
}
