use log::warn;

use super::{DataError, Dataset, NUM_CLASSES};
use crate::numerics::{Scalar, SeededRng};

/// Seeded train/test partition. Both halves keep the original row order.
///
/// In stratified mode each class contributes `round(count * test_fraction)`
/// rows to the test set. Classes with fewer than two rows cannot be split
/// proportionally; they are pooled and partitioned by a plain shuffle.
pub fn split_train_test<T: Scalar>(
    d: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset<T>, Dataset<T>), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Fraction(test_fraction));
    }
    let mut rng = SeededRng::new(seed);
    let mut is_test = vec![false; d.len()];

    let mut take_test = |rows: &mut Vec<usize>, rng: &mut SeededRng| {
        rng.shuffle(rows);
        let k = (rows.len() as f64 * test_fraction).round() as usize;
        for &i in &rows[..k] {
            is_test[i] = true;
        }
    };

    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
        for (i, &l) in d.labels().iter().enumerate() {
            by_class[l].push(i);
        }
        let mut pool = Vec::new();
        for (class, mut rows) in by_class.into_iter().enumerate() {
            match rows.len() {
                0 => {}
                1 => {
                    warn!("class {class} has a single row; splitting it without stratification");
                    pool.extend(rows);
                }
                _ => take_test(&mut rows, &mut rng),
            }
        }
        if !pool.is_empty() {
            pool.sort_unstable();
            take_test(&mut pool, &mut rng);
        }
    } else {
        let mut rows: Vec<usize> = (0..d.len()).collect();
        take_test(&mut rows, &mut rng);
    }

    let (test, train): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&i| is_test[i]);
    Ok((d.select(&train), d.select(&test)))
}
