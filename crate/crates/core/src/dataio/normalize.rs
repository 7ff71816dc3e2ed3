use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, NUM_FEATURES};
use crate::numerics::{Matrix, Scalar};

/// Per-column minimum and maximum of the training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NormalizationStats<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> NormalizationStats<T> {
    pub fn columns(&self) -> usize {
        self.min.len()
    }

    /// Scales one value of column `j` into `[0, 1]`.
    ///
    /// Constant columns map to 0. Values outside the fitted range are clamped.
    #[inline]
    pub fn scale(&self, j: usize, x: T) -> T {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi <= lo {
            return T::zero();
        }
        let r = (x - lo) / (hi - lo);
        r.max(T::zero()).min(T::one())
    }

    pub fn scale_row(&self, row: &[T]) -> Vec<T> {
        row.iter().enumerate().map(|(j, &x)| self.scale(j, x)).collect()
    }
}

pub fn fit_minmax<T: Scalar>(d: &Dataset<T>) -> Result<NormalizationStats<T>, DataError> {
    if d.is_empty() {
        return Err(DataError::Empty);
    }
    let f = d.features();
    let mut min = f.row(0).to_vec();
    let mut max = min.clone();
    for row in f.iter_rows().skip(1) {
        for (j, &v) in row.iter().enumerate() {
            if v < min[j] {
                min[j] = v;
            }
            if v > max[j] {
                max[j] = v;
            }
        }
    }
    Ok(NormalizationStats { min, max })
}

pub fn apply_minmax<T: Scalar>(d: &Dataset<T>, s: &NormalizationStats<T>) -> Dataset<T> {
    assert_eq!(s.columns(), NUM_FEATURES, "stats fitted on a different schema");
    let data: Vec<T> = d.features().iter_rows().flat_map(|row| s.scale_row(row)).collect();
    let features = Matrix::from_vec(d.len(), NUM_FEATURES, data)
        .expect("scaled values are finite and shaped like the input");
    Dataset::new(features, d.labels().to_vec())
        .expect("labels already validated")
        .with_class_names(d.class_names().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn dataset(rows: Vec<[f64; 7]>) -> Dataset<f64> {
        let n = rows.len();
        let m = Matrix::from_vec(n, 7, rows.into_iter().flatten().collect()).unwrap();
        Dataset::new(m, vec![0; n]).unwrap()
    }

    fn col(v: f64, c: f64) -> [f64; 7] {
        [v, c, 0.0, 0.0, 0.0, 0.0, 0.0]
    }

    #[test]
    fn three_point_column() {
        let d = dataset(vec![col(2.0, 5.0), col(4.0, 5.0), col(6.0, 5.0)]);
        let s = fit_minmax(&d).unwrap();
        assert_eq!((s.min[0], s.max[0]), (2.0, 6.0));
        assert_eq!((s.min[1], s.max[1]), (5.0, 5.0));
        let n = apply_minmax(&d, &s);
        let c0: Vec<f64> = n.features().column(0).collect();
        let c1: Vec<f64> = n.features().column(1).collect();
        assert_eq!(c0, vec![0.0, 0.5, 1.0]);
        assert_eq!(c1, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn out_of_range_test_values_clamp() {
        let s = NormalizationStats {
            min: vec![2.0; 7],
            max: vec![6.0; 7],
        };
        assert_eq!(s.scale(0, 1.0), 0.0);
        assert_eq!(s.scale(0, 9.0), 1.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(fit_minmax(&Dataset::<f64>::empty()), Err(DataError::Empty)));
    }

    #[test]
    fn matches_linear_scan_oracle() {
        let mut rng = SeededRng::new(77);
        let rows: Vec<[f64; 7]> = (0..1000)
            .map(|_| std::array::from_fn(|_| rng.uniform(-500.0, 500.0)))
            .collect();
        let d = dataset(rows.clone());
        let s = fit_minmax(&d).unwrap();
        for j in 0..7 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in &rows {
                lo = lo.min(r[j]);
                hi = hi.max(r[j]);
            }
            assert_eq!(s.min[j], lo);
            assert_eq!(s.max[j], hi);
        }
    }
}
