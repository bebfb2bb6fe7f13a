use super::ProsocialError;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;
/// Standardised-slope magnitude beyond which a still-improving fit is
/// treated as diverging.
const DIVERGENCE_SLOPE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub intercept: f64,
    pub slope: f64,
    pub slope_std_err: f64,
    pub z_statistic: f64,
    pub p_value: f64,
    pub odds_ratio: f64,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub n: usize,
}

impl RegressionResult {
    pub fn probability(&self, x: f64) -> f64 {
        sigmoid(self.intercept + self.slope * x)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn log_likelihood(x: &[f64], y: &[bool], a: f64, b: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let t = a + b * xi;
            if yi {
                -softplus(-t)
            } else {
                -softplus(t)
            }
        })
        .sum()
}

fn separated(x: &[f64], y: &[bool]) -> bool {
    let range = |class: bool| {
        x.iter()
            .zip(y)
            .filter(|(_, &yi)| yi == class)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&xi, _)| (lo.min(xi), hi.max(xi)))
    };
    let (lo1, hi1) = range(true);
    let (lo0, hi0) = range(false);
    hi0 <= lo1 || hi1 <= lo0
}

/// Maximum-likelihood fit of `P(y) = σ(intercept + slope·x)` by damped Newton
/// iterations on the standardised predictor, with a Wald test on the slope.
pub fn logistic_fit(x: &[f64], y: &[bool]) -> Result<RegressionResult, ProsocialError> {
    if x.len() != y.len() {
        return Err(ProsocialError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 10 {
        return Err(ProsocialError::TooFewRows { need: 10, got: n });
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(ProsocialError::SingleClass);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd == 0.0 {
        return Err(ProsocialError::ConstantPredictor);
    }
    if separated(x, y) {
        return Err(ProsocialError::SeparationDetected);
    }
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();

    let p0 = positives as f64 / n as f64;
    let (mut a, mut b) = ((p0 / (1.0 - p0)).ln(), 0.0);
    let mut ll = log_likelihood(&z, y, a, b);
    let mut converged = false;
    let mut improving = true;
    let mut iterations = 0;
    let mut info = [[0.0; 2]; 2];
    while iterations < MAX_ITER {
        iterations += 1;
        let (mut g0, mut g1) = (0.0, 0.0);
        info = [[0.0; 2]; 2];
        for (&zi, &yi) in z.iter().zip(y) {
            let p = sigmoid(a + b * zi);
            let r = f64::from(u8::from(yi)) - p;
            let w = p * (1.0 - p);
            g0 += r;
            g1 += r * zi;
            info[0][0] += w;
            info[0][1] += w * zi;
            info[1][1] += w * zi * zi;
        }
        info[1][0] = info[0][1];
        let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
        if det.is_nan() || det <= 0.0 {
            break;
        }
        let da = (info[1][1] * g0 - info[0][1] * g1) / det;
        let db = (info[0][0] * g1 - info[1][0] * g0) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = log_likelihood(&z, y, a + step * da, b + step * db);
            if cand >= ll - 1e-12 * ll.abs() {
                improving = cand > ll;
                a += step * da;
                b += step * db;
                ll = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            improving = false;
            break;
        }
        if (step * da).abs().max((step * db).abs()) < TOL {
            converged = true;
            break;
        }
    }
    if !converged && improving && b.abs() > DIVERGENCE_SLOPE {
        return Err(ProsocialError::SeparationDetected);
    }
    let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
    let se_b = (info[0][0] / det).sqrt();
    let z_stat = b / se_b;
    let slope = b / sd;
    Ok(RegressionResult {
        intercept: a - slope * mean,
        slope,
        slope_std_err: se_b / sd,
        z_statistic: z_stat,
        p_value: erfc(z_stat.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0),
        odds_ratio: slope.exp(),
        converged,
        iterations,
        log_likelihood: ll,
        n,
    })
}
