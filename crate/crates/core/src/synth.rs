//! Seeded synthetic binary datasets for demos and tests.

use crate::dataio::{Dataset, SplitMix64};
use crate::error::Result;

/// `n` rows of `m` uniform binary features labelled by a random sparse
/// integer rule, with each label flipped with probability `noise`.
/// Rows are redrawn until both labels occur and every feature takes both
/// values, so `f1` can always serve as a sensitive attribute.
pub fn random_dataset(n: usize, m: usize, noise: f64, seed: u64) -> Result<Dataset> {
    let mut rng = SplitMix64::new(seed);
    let names: Vec<String> = (1..=m).map(|j| format!("f{j}")).collect();
    loop {
        let weights: Vec<i64> = (0..m).map(|_| rng.below(5) as i64 - 2).collect();
        let offset = rng.below(3) as i64 - 1;
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<u8> = (0..m).map(|_| rng.below(2) as u8).collect();
            let score: i64 = row.iter().zip(&weights).map(|(&x, &w)| x as i64 * w).sum::<i64>() + offset;
            let mut y: i8 = if score > 0 { 1 } else { -1 };
            if rng.next_f64() < noise {
                y = -y;
            }
            rows.push(row);
            labels.push(y);
        }
        let both_labels = labels.contains(&1) && labels.contains(&-1);
        let varied = (0..m).all(|j| rows.iter().any(|r| r[j] == 1) && rows.iter().any(|r| r[j] == 0));
        // equal opportunity needs positives on both sides of f1
        let pos_split = m == 0
            || (rows.iter().zip(&labels).any(|(r, &y)| r[0] == 1 && y == 1)
                && rows.iter().zip(&labels).any(|(r, &y)| r[0] == 0 && y == 1));
        if both_labels && varied && pos_split {
            return Dataset::new(rows, labels, names);
        }
    }
}
