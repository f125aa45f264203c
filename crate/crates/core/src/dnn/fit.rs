//! Four-parameter logistic `Acc(F) = L / (1 + exp(-k (F - F0))) + B`.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub l: f64,
    pub k: f64,
    pub f0: f64,
    pub b: f64,
    pub rmse: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticFit {
    pub fn eval(&self, f: f64) -> f64 {
        self.l * sigmoid(self.k * (f - self.f0)) + self.b
    }

    /// `F` at which the curve reaches `acc`, if it does.
    pub fn inverse(&self, acc: f64) -> Option<f64> {
        let frac = (acc - self.b) / self.l;
        if !(frac > 0.0 && frac < 1.0) || self.k == 0.0 {
            return None;
        }
        Some(self.f0 - (1.0 / frac - 1.0).ln() / self.k)
    }

    pub fn rmse_on(&self, fs: &[f64], accs: &[f64]) -> f64 {
        let sse: f64 = fs
            .iter()
            .zip(accs)
            .map(|(&f, &a)| (self.eval(f) - a).powi(2))
            .sum();
        (sse / fs.len() as f64).sqrt()
    }

    /// Same curve with `k > 0`.
    fn canonical(self) -> Self {
        if self.k < 0.0 {
            LogisticFit {
                l: -self.l,
                k: -self.k,
                b: self.b + self.l,
                ..self
            }
        } else {
            self
        }
    }
}

/// Least-squares `(L, B)` for fixed `(k, F0)`.
fn linear_part(fs: &[f64], accs: &[f64], k: f64, f0: f64) -> Option<(f64, f64, f64)> {
    let n = fs.len() as f64;
    let (mut s, mut ss, mut y, mut sy) = (0.0, 0.0, 0.0, 0.0);
    for (&f, &a) in fs.iter().zip(accs) {
        let v = sigmoid(k * (f - f0));
        s += v;
        ss += v * v;
        y += a;
        sy += v * a;
    }
    let det = n * ss - s * s;
    if det.abs() < 1e-12 * n * n {
        return None;
    }
    let l = (n * sy - s * y) / det;
    let b = (y - l * s) / n;
    let sse: f64 = fs
        .iter()
        .zip(accs)
        .map(|(&f, &a)| (l * sigmoid(k * (f - f0)) + b - a).powi(2))
        .sum();
    Some((l, b, sse))
}

fn logspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// Coarse grid over `(k, F0)` with the linear parameters solved exactly,
/// then Levenberg-Marquardt on all four.
pub fn logistic_fit(fs: &[f64], accs: &[f64]) -> Result<LogisticFit> {
    if fs.len() != accs.len() {
        return Err(Error::param("points", "F and accuracy lengths differ"));
    }
    if fs.len() < MIN_FIT_POINTS {
        return Err(Error::param(
            "points",
            format!("need at least {MIN_FIT_POINTS}"),
        ));
    }
    if fs.iter().chain(accs).any(|v| !v.is_finite()) {
        return Err(Error::param("points", "non-finite values"));
    }
    let fmin = fs.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = fmax - fmin;
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let spread = accs.iter().map(|a| (a - mean).abs()).fold(0.0, f64::max);
    if !(span > 0.0) || spread < 1e-12 {
        return Err(Error::Fit {
            reason: "data carry no transition (flat accuracy or a single F)".into(),
            best: None,
        });
    }

    let mut best: Option<(f64, LogisticFit)> = None;
    for k in logspace(0.1 / span, 1000.0 / span, 60) {
        for i in 0..=80 {
            let f0 = fmin + span * i as f64 / 80.0;
            if let Some((l, b, sse)) = linear_part(fs, accs, k, f0) {
                if best.as_ref().is_none_or(|(s, _)| sse < *s) {
                    best = Some((
                        sse,
                        LogisticFit {
                            l,
                            k,
                            f0,
                            b,
                            rmse: 0.0,
                        },
                    ));
                }
            }
        }
    }
    let (_, start) = best.ok_or_else(|| Error::Fit {
        reason: "no admissible starting point".into(),
        best: None,
    })?;
    let refined = levenberg_marquardt(fs, accs, start);
    let mut fit = refined.canonical();
    fit.rmse = fit.rmse_on(fs, accs);
    if !fit.rmse.is_finite() || [fit.l, fit.k, fit.f0, fit.b].iter().any(|v| !v.is_finite()) {
        let mut s = start.canonical();
        s.rmse = s.rmse_on(fs, accs);
        return Err(Error::Fit {
            reason: "refinement produced non-finite parameters".into(),
            best: Some(s),
        });
    }
    if fit.l.abs() < 1e-9 || fit.k < 1e-9 / span {
        return Err(Error::Fit {
            reason: "fitted curve is flat".into(),
            best: Some(fit),
        });
    }
    Ok(fit)
}

fn levenberg_marquardt(fs: &[f64], accs: &[f64], start: LogisticFit) -> LogisticFit {
    let sse = |p: &Vector4<f64>| -> f64 {
        fs.iter()
            .zip(accs)
            .map(|(&f, &a)| (p[0] * sigmoid(p[1] * (f - p[2])) + p[3] - a).powi(2))
            .sum()
    };
    let mut p = Vector4::new(start.l, start.k, start.f0, start.b);
    let mut cost = sse(&p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&f, &a) in fs.iter().zip(accs) {
            let s = sigmoid(p[1] * (f - p[2]));
            let ds = s * (1.0 - s);
            let j = Vector4::new(s, p[0] * ds * (f - p[2]), -p[0] * ds * p[1], 1.0);
            let r = p[0] * s + p[3] - a;
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let c = sse(&trial);
            if c.is_finite() && c <= cost {
                let small = step.norm() <= 1e-14 * (p.norm() + 1e-14);
                let flat = cost - c <= 1e-30 + 1e-15 * cost;
                p = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-15);
                improved = !(small || flat);
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    LogisticFit {
        l: p[0],
        k: p[1],
        f0: p[2],
        b: p[3],
        rmse: 0.0,
    }
}
