use super::ProsocialError;

const COLLINEAR_R2: f64 = 1.0 - 1e-12;

fn centered(rows: &[[f64; 3]], j: usize) -> Vec<f64> {
    let mean = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
    rows.iter().map(|r| r[j] - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// R² of an OLS fit (with intercept) of centred `y` on centred regressors,
/// via modified Gram-Schmidt. Regressors already spanned by earlier ones are
/// dropped.
fn r_squared(y: &[f64], regressors: &[&[f64]]) -> f64 {
    let sst = dot(y, y);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for x in regressors {
        let mut q = x.to_vec();
        let scale = dot(&q, &q).sqrt();
        for b in &basis {
            let c = dot(&q, b);
            q.iter_mut().zip(b).for_each(|(qi, bi)| *qi -= c * bi);
        }
        let norm = dot(&q, &q).sqrt();
        if norm > 1e-12 * scale {
            q.iter_mut().for_each(|qi| *qi /= norm);
            basis.push(q);
        }
    }
    let mut resid = y.to_vec();
    for b in &basis {
        let c = dot(&resid, b);
        resid.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= c * bi);
    }
    1.0 - dot(&resid, &resid) / sst
}

/// Variance inflation factor of each column against the other two.
pub fn vif(rows: &[[f64; 3]]) -> Result<[f64; 3], ProsocialError> {
    if rows.len() < 4 {
        return Err(ProsocialError::TooFewRows { need: 4, got: rows.len() });
    }
    let cols: Vec<Vec<f64>> = (0..3).map(|j| centered(rows, j)).collect();
    for (j, c) in cols.iter().enumerate() {
        if c.iter().all(|&x| x == 0.0) {
            return Err(ProsocialError::DegenerateColumn(j));
        }
    }
    let mut out = [0.0; 3];
    for i in 0..3 {
        let others: Vec<&[f64]> = (0..3).filter(|&j| j != i).map(|j| cols[j].as_slice()).collect();
        let r2 = r_squared(&cols[i], &others);
        if r2 >= COLLINEAR_R2 {
            return Err(ProsocialError::CollinearInput { column: i, r_squared: r2 });
        }
        out[i] = 1.0 / (1.0 - r2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn orthogonal_columns() {
        let rows = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        for v in vif(&rows).unwrap() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_collinearity() {
        let rows: Vec<[f64; 3]> = (0..10)
            .map(|i| {
                let a = (i as f64 * 0.7).sin();
                let b = (i as f64 * 1.3).cos();
                [a, b, a + b]
            })
            .collect();
        assert!(matches!(vif(&rows), Err(ProsocialError::CollinearInput { .. })));
    }

    #[test]
    fn guards() {
        assert!(matches!(vif(&[[0.0; 3]; 3]), Err(ProsocialError::TooFewRows { .. })));
        let rows = [[1.0, 2.0, 3.0], [2.0, 2.0, 1.0], [3.0, 2.0, 0.0], [0.0, 2.0, 5.0]];
        assert_eq!(vif(&rows), Err(ProsocialError::DegenerateColumn(1)));
    }

    proptest! {
        #[test]
        fn permuting_columns_permutes_vif(rows in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 8..40)) {
            let Ok(base) = vif(&rows) else { return Ok(()) };
            let swapped: Vec<[f64; 3]> = rows.iter().map(|r| [r[2], r[0], r[1]]).collect();
            let p = vif(&swapped).unwrap();
            for (a, b) in [(p[0], base[2]), (p[1], base[0]), (p[2], base[1])] {
                prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0));
            }
        }
    }
}
