use super::{ProsocialError, ProsocialVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub vectors: Vec<ProsocialVector>,
    /// Indices of metrics that were constant and mapped to 0.5.
    pub constant_columns: Vec<usize>,
}

/// Min-max normalises each metric over the whole input. A constant metric
/// becomes 0.5 everywhere.
pub fn normalize_scores(raw: &[ProsocialVector]) -> Result<Normalized, ProsocialError> {
    if raw.is_empty() {
        return Err(ProsocialError::EmptyInput);
    }
    let rows: Vec<[f64; 3]> = raw.iter().map(ProsocialVector::as_array).collect();
    let mut out = rows.clone();
    let mut constant_columns = Vec::new();
    for j in 0..3 {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
        if hi > lo {
            for (o, r) in out.iter_mut().zip(&rows) {
                o[j] = (r[j] - lo) / (hi - lo);
            }
        } else {
            tracing::warn!("{} is constant; normalised to 0.5", ProsocialVector::METRICS[j]);
            constant_columns.push(j);
            for o in out.iter_mut() {
                o[j] = 0.5;
            }
        }
    }
    Ok(Normalized {
        vectors: out.into_iter().map(ProsocialVector::from_array).collect(),
        constant_columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(s: f64, a: f64, p: f64) -> ProsocialVector {
        ProsocialVector::from_array([s, a, p])
    }

    #[test]
    fn examples() {
        let n = normalize_scores(&[v(0.0, 2.0, 0.0), v(5.0, 2.0, 1.0), v(10.0, 2.0, 0.25)]).unwrap();
        let col = |j: usize| n.vectors.iter().map(|x| x.as_array()[j]).collect::<Vec<_>>();
        assert_eq!(col(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(col(1), vec![0.5, 0.5, 0.5]);
        assert_eq!(col(2), vec![0.0, 1.0, 0.25]);
        assert_eq!(n.constant_columns, vec![1]);
        assert_eq!(normalize_scores(&[]), Err(ProsocialError::EmptyInput));
    }

    proptest! {
        #[test]
        fn output_in_unit_interval(rows in prop::collection::vec(prop::array::uniform3(-1e3f64..1e3), 1..50)) {
            let raw: Vec<_> = rows.into_iter().map(ProsocialVector::from_array).collect();
            for x in normalize_scores(&raw).unwrap().vectors {
                for c in x.as_array() {
                    prop_assert!((0.0..=1.0).contains(&c));
                }
            }
        }
    }
}
