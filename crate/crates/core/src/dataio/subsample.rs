use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::csvio::{RecordReader, RecordWriter};
use super::{DataError, NUM_CLASSES};
use crate::numerics::SeededRng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsampleSummary {
    pub source_counts: [usize; NUM_CLASSES],
    pub output_counts: [usize; NUM_CLASSES],
}

impl SubsampleSummary {
    pub fn source_total(&self) -> usize {
        self.source_counts.iter().sum()
    }

    pub fn output_total(&self) -> usize {
        self.output_counts.iter().sum()
    }
}

/// Extracts exactly `n` rows from a large CSV without loading it.
///
/// Two streaming passes: the first counts rows per class, the second keeps
/// each row with probability `needed / remaining` within its stratum
/// (selection sampling), so the output size is exact and source order is
/// preserved. Stratified quotas use largest-remainder apportionment.
pub fn subsample_csv(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    n: usize,
    stratified: bool,
    seed: u64,
) -> Result<SubsampleSummary, DataError> {
    let input = input.as_ref();
    let open = || {
        File::open(input)
            .map(BufReader::new)
            .map_err(|source| DataError::Io {
                path: input.display().to_string(),
                source,
            })
    };

    let mut source_counts = [0usize; NUM_CLASSES];
    for row in RecordReader::new(open()?)? {
        source_counts[row?.1.label] += 1;
    }
    let total: usize = source_counts.iter().sum();
    if n > total {
        return Err(DataError::SubsampleSize {
            requested: n,
            available: total,
        });
    }

    // stratum per class, or a single stratum
    let strata = |label: usize| if stratified { label } else { 0 };
    let mut remaining = [0usize; NUM_CLASSES];
    let mut needed = [0usize; NUM_CLASSES];
    if stratified {
        remaining = source_counts;
        needed = apportion(&source_counts, n);
    } else {
        remaining[0] = total;
        needed[0] = n;
    }

    let output = output.as_ref();
    let file = File::create(output).map_err(|source| DataError::Io {
        path: output.display().to_string(),
        source,
    })?;
    let mut writer = RecordWriter::new(BufWriter::new(file))?;
    let mut rng = SeededRng::new(seed);
    let mut output_counts = [0usize; NUM_CLASSES];
    for row in RecordReader::new(open()?)? {
        let (_, rec) = row?;
        let s = strata(rec.label);
        let keep = needed[s] > 0 && rng.next_f64() * (remaining[s] as f64) < needed[s] as f64;
        remaining[s] -= 1;
        if keep {
            needed[s] -= 1;
            output_counts[rec.label] += 1;
            writer.write(&rec)?;
        }
    }
    writer.flush()?;
    Ok(SubsampleSummary {
        source_counts,
        output_counts,
    })
}

/// Largest-remainder apportionment of `n` across `counts`; ties go to the lower index.
fn apportion(counts: &[usize; NUM_CLASSES], n: usize) -> [usize; NUM_CLASSES] {
    let total: usize = counts.iter().sum();
    let mut quota = [0usize; NUM_CLASSES];
    if total == 0 {
        return quota;
    }
    let mut remainders = Vec::with_capacity(NUM_CLASSES);
    for (c, &count) in counts.iter().enumerate() {
        let exact = count as u128 * n as u128;
        quota[c] = (exact / total as u128) as usize;
        remainders.push((exact % total as u128, c));
    }
    let assigned: usize = quota.iter().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().take(n - assigned) {
        quota[c] += 1;
    }
    quota
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_sums_to_n() {
        let counts = [50, 30, 20, 0, 0, 0, 0, 1];
        for n in 0..=101 {
            let q = apportion(&counts, n);
            assert_eq!(q.iter().sum::<usize>(), n);
            for c in 0..NUM_CLASSES {
                assert!(q[c] <= counts[c]);
            }
        }
        assert_eq!(apportion(&counts, 10)[..3], [5, 3, 2]);
    }
}
