//! Self-verification: Monte Carlo oracles and analytic invariants.

use anyhow::Context;
use qsmc_core::dnn::{logistic_fit, LogisticFit};
use qsmc_core::engine::{
    encode_weights, rescale_factor, sample_detector_readings, simulate_roundtrip_mc,
};
use qsmc_core::gaussian::{
    build_unitary, entropy_g, excess_noise, symplectic_eigenvalues, ComplexVec, Gain,
    QuadratureCovariance,
};
use qsmc_core::rng;
use qsmc_core::security::{
    fisher_information, holevo_weight_leakage, holevo_weight_leakage_matrix, measurement_variance,
    quantum_fisher_information, HolevoInputs,
};
use qsmc_core::stats::{ks_same_distribution, variance_standard_error};
use qsmc_core::ProtocolParams;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{envelope, RunConfig};
use crate::exit::VerificationFailed;
use crate::VerifyArgs;

const OPERATING_POINT_CHI: f64 = 0.110_687_432_631_312_64;

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn normal(r: &mut impl Rng) -> f64 {
    r.sample(rand_distr::StandardNormal)
}

fn random_complex(r: &mut impl Rng, len: usize, scale: f64) -> ComplexVec {
    ComplexVec::new(
        (0..len)
            .map(|_| num_complex::Complex64::new(scale * normal(r), scale * normal(r)))
            .collect(),
    )
}

fn covariance_oracle(seed: u64, samples: usize, fault: bool) -> anyhow::Result<Check> {
    let mut r = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    let gains = [
        Gain::Finite(1.0),
        Gain::Finite(1.5),
        Gain::Finite(3.0),
        Gain::Finite(100.0),
        Gain::FeedForward,
    ];
    for (i, &g) in gains.iter().enumerate() {
        let x = random_complex(&mut r, 8, 1.0).normalized()?;
        let w = random_complex(&mut r, 8, 1.5);
        let s = simulate_roundtrip_mc(
            &x,
            &w,
            &ProtocolParams::new(4.0, g),
            samples,
            seed.wrapping_add(i as u64),
        )?;
        for (m, eta) in excess_noise(&x, g).iter().enumerate() {
            let eta = if fault { 1.5 * eta + 0.05 } else { *eta };
            let v = 1.0 + eta;
            let se = variance_standard_error(v, samples);
            for q in s.quadrature_variance[m] {
                worst = worst.max((q - v).abs() / se);
            }
            let mse = (v / samples as f64).sqrt();
            let d = s.mean[m] - w[m];
            worst = worst.max(d.re.abs().max(d.im.abs()) / mse);
        }
    }
    Ok(check(
        "covariance_oracle",
        worst < 5.0,
        format!("worst deviation {worst:.3} standard errors"),
    ))
}

fn scaling_sufficiency(seed: u64) -> anyhow::Result<Check> {
    let mut r = rng::seeded(seed);
    let w: Vec<f64> = (0..8).map(|_| normal(&mut r)).collect();
    let x: Vec<f64> = (0..8).map(|_| normal(&mut r) + 0.5).collect();
    let w_rms = 0.8;
    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let x_hat = ComplexVec::from_real(&x).normalized()?;
    let readings = |p: &ProtocolParams, s: u64| -> anyhow::Result<Vec<f64>> {
        let enc = encode_weights(&ComplexVec::from_real(&w), w_rms, p.mu)?;
        let k = rescale_factor(p, x_norm, w_rms)?;
        Ok(
            sample_detector_readings(&x_hat, &enc.amplitudes, p, 10_000, s)?
                .iter()
                .map(|c| k * c.re)
                .collect(),
        )
    };
    let a = ProtocolParams::default();
    let f = a.physical_scaling();
    let b = ProtocolParams::new(f * f / Gain::FeedForward.snr_factor(), Gain::FeedForward);
    let same = ks_same_distribution(&readings(&a, seed + 1)?, &readings(&b, seed + 2)?, 0.01);
    Ok(check(
        "scaling_sufficiency",
        same,
        format!(
            "KS at alpha 0.01 between (mu=4, G=3) and (mu={:.4}, G=inf) at F = {f:.4}",
            b.mu
        ),
    ))
}

pub fn run(a: VerifyArgs) -> anyhow::Result<()> {
    let common = &a.common;
    let config = RunConfig::new(
        "verify",
        common,
        json!({ "samples": a.samples, "inject_fault": a.inject_fault }),
    );
    let seed = common.seed;
    let mut checks =
        vec![covariance_oracle(seed, a.samples, a.inject_fault).context("covariance oracle")?];

    let (g1, g3) = (entropy_g(1.0)?, entropy_g(3.0)?);
    checks.push(check(
        "entropy_exact_values",
        g1.abs() <= 1e-12 && (g3 - 2.0).abs() <= 1e-12,
        format!("g(1) = {g1:e}, g(3) = {g3}"),
    ));

    let mut worst: f64 = 0.0;
    for v in [1.5, 9.0, 100.0] {
        let spec = symplectic_eigenvalues(&QuadratureCovariance::two_mode_squeezed_vacuum(v)?)?;
        worst = spec
            .values()
            .iter()
            .fold(worst, |m, nu| m.max((nu - 1.0).abs()));
    }
    checks.push(check(
        "pure_state_spectrum",
        worst <= 1e-9,
        format!("max |nu - 1| = {worst:e}"),
    ));

    let mut r = rng::seeded(seed ^ 0x5eed);
    let mut defect: f64 = 0.0;
    for _ in 0..20 {
        let x = random_complex(&mut r, 64, 1.0).normalized()?;
        defect = defect.max(build_unitary(&x)?.unitarity_defect());
    }
    checks.push(check(
        "unitarity",
        defect < 1e-10,
        format!("max defect {defect:e}"),
    ));

    let point = HolevoInputs::new(4.0, 0.0034);
    let (closed, matrix) = (
        holevo_weight_leakage(&point)?,
        holevo_weight_leakage_matrix(&point)?,
    );
    checks.push(check(
        "holevo_operating_point",
        (closed - OPERATING_POINT_CHI).abs() <= 1e-6
            && (matrix - OPERATING_POINT_CHI).abs() <= 1e-6,
        format!("closed form {closed:.12}, eigen-solver {matrix:.12}"),
    ));

    let mut ratio_exact = true;
    let mut fd_worst: f64 = 0.0;
    for _ in 0..20 {
        let x: f64 = r.random_range(0.01..1.0);
        let g = Gain::new(r.random_range(1.05..100.0))?;
        let fi = fisher_information(x, g);
        ratio_exact &= quantum_fisher_information(x, g) / fi == 2.0;
        let s = measurement_variance(x, g);
        let kappa = g.excess_noise_factor();
        let delta = |xp: f64| {
            let d = kappa * (xp * xp - x * x) / s;
            -0.5 * d.ln_1p() + 0.5 * d / (1.0 + d)
        };
        let h = 1e-3 * x;
        let fd = -(delta(x - h) + delta(x + h)) / (h * h);
        fd_worst = fd_worst.max((fd - fi).abs() / fi);
    }
    checks.push(check(
        "fisher_information",
        ratio_exact && fd_worst <= 1e-4,
        format!("QFI/FI exactly 2: {ratio_exact}, finite-difference error {fd_worst:.2e}"),
    ));

    let truth = LogisticFit {
        l: 0.87,
        k: 2.3,
        f0: 1.1,
        b: 0.1,
        rmse: 0.0,
    };
    let fs = crate::commands::default_f_grid();
    let ys: Vec<f64> = fs.iter().map(|&f| truth.eval(f)).collect();
    let fit = logistic_fit(&fs, &ys)?;
    let err = [
        fit.l - truth.l,
        fit.k - truth.k,
        fit.f0 - truth.f0,
        fit.b - truth.b,
    ]
    .iter()
    .fold(0.0f64, |m, d| m.max(d.abs()));
    checks.push(check(
        "logistic_recovery",
        err <= 1e-6,
        format!("max parameter error {err:e}"),
    ));

    checks.push(scaling_sufficiency(seed)?);

    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.to_string())
        .collect();
    let body = json!({ "passed": failed.is_empty(), "checks": checks });
    crate::commands::write_json(common.out.as_deref(), &envelope(&config, body))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(VerificationFailed(failed).into())
    }
}
