use super::ProsocialError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Unit-norm loading vector of the first principal component.
    pub component: [f64; 3],
    pub eigenvalues: [f64; 3],
    pub variance_explained: f64,
    pub means: [f64; 3],
    /// Sign applied to the solver's eigenvector (normalised so its first
    /// nonzero entry is positive) to orient the component.
    pub orientation_sign: f64,
}

impl PcaModel {
    pub fn score(&self, row: &[f64; 3]) -> f64 {
        (0..3).map(|j| (row[j] - self.means[j]) * self.component[j]).sum()
    }
}

/// Sample covariance (n − 1 denominator).
#[allow(clippy::needless_range_loop)]
pub fn covariance(rows: &[[f64; 3]]) -> ([[f64; 3]; 3], [f64; 3]) {
    let n = rows.len() as f64;
    let mut means = [0.0; 3];
    for r in rows {
        for j in 0..3 {
            means[j] += r[j] / n;
        }
    }
    let mut c = [[0.0; 3]; 3];
    for r in rows {
        for a in 0..3 {
            for b in a..3 {
                c[a][b] += (r[a] - means[a]) * (r[b] - means[b]);
            }
        }
    }
    for a in 0..3 {
        for b in a..3 {
            c[a][b] /= n - 1.0;
            c[b][a] = c[a][b];
        }
    }
    (c, means)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 3×3 matrix. Returns
/// eigenvalues and the matching eigenvectors as columns of `v`.
#[allow(clippy::needless_range_loop)]
fn jacobi(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        let diag = a[0][0].powi(2) + a[1][1].powi(2) + a[2][2].powi(2);
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// First principal component of the covariance of `rows`, and each row's
/// score on it.
///
/// The component is oriented so that scores covary nonnegatively with the
/// row mean of the three metrics; for a positive leading eigenvalue that
/// covariance is proportional to the sum of loadings.
pub fn pca_first_component(rows: &[[f64; 3]]) -> Result<(PcaModel, Vec<f64>), ProsocialError> {
    if rows.len() < 3 {
        return Err(ProsocialError::TooFewRows { need: 3, got: rows.len() });
    }
    let (cov, means) = covariance(rows);
    let total = cov[0][0] + cov[1][1] + cov[2][2];
    if total <= 0.0 {
        return Err(ProsocialError::DegenerateInput);
    }
    let (vals, vecs) = jacobi(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    let eigenvalues = order.map(|i| vals[i].max(0.0));
    let lead = order[0];
    let mut component = [vecs[0][lead], vecs[1][lead], vecs[2][lead]];
    let norm = component.iter().map(|x| x * x).sum::<f64>().sqrt();
    component.iter_mut().for_each(|x| *x /= norm);
    if component.iter().find(|x| x.abs() > 1e-12).is_some_and(|&x| x < 0.0) {
        component.iter_mut().for_each(|x| *x = -*x);
    }
    let sum: f64 = component.iter().sum();
    let orientation_sign = if sum < -1e-12 { -1.0 } else { 1.0 };
    component.iter_mut().for_each(|x| *x *= orientation_sign);
    let model = PcaModel {
        component,
        eigenvalues,
        variance_explained: (eigenvalues[0] / eigenvalues.iter().sum::<f64>()).clamp(0.0, 1.0),
        means,
        orientation_sign,
    };
    let scores = rows.iter().map(|r| model.score(r)).collect();
    Ok((model, scores))
}
