//! Borderline SMOTE oversampling.
//!
//! Only minority rows whose k nearest neighbours (over all rows) include a
//! majority row seed new samples. When no minority row is on the border,
//! every minority row is used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ClassifierError, Dataset, Sample};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest candidates to `query`, excluding `skip`.
/// Ties are broken by index.
fn nearest(rows: &[&[f64]], candidates: &[usize], query: usize, skip: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&c| c != skip)
        .map(|&c| (sq_dist(rows[query], rows[c]), c))
        .collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().map(|(_, c)| c).collect()
}

/// Oversamples the minority label up to the majority count.
///
/// Synthetic rows are appended after the originals and take the gender of the
/// row they were interpolated from.
pub fn smote_oversample(data: &Dataset, k_neighbors: usize, seed: u64) -> Result<Dataset, ClassifierError> {
    data.validate()?;
    if k_neighbors == 0 {
        return Err(ClassifierError::InvalidParameter("k_neighbors must be >= 1".into()));
    }
    let ones = data.count_label(1);
    let zeros = data.len() - ones;
    if ones == zeros {
        return Ok(data.clone());
    }
    let minority_label = u8::from(ones < zeros);
    let deficit = ones.abs_diff(zeros);
    let rows = data.features();
    let minority: Vec<usize> = (0..data.len()).filter(|&i| data.samples[i].label == minority_label).collect();
    if minority.len() < k_neighbors + 1 {
        return Err(ClassifierError::TooFewMinoritySamples { found: minority.len(), k: k_neighbors });
    }
    let all: Vec<usize> = (0..data.len()).collect();
    let border: Vec<usize> = minority
        .par_iter()
        .filter(|&&i| {
            nearest(&rows, &all, i, i, k_neighbors)
                .iter()
                .any(|&j| data.samples[j].label != minority_label)
        })
        .copied()
        .collect();
    let seeds = if border.is_empty() { minority.clone() } else { border };
    let neighbourhoods: Vec<Vec<usize>> = seeds
        .par_iter()
        .map(|&i| nearest(&rows, &minority, i, i, k_neighbors))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for n in 0..deficit {
        let s = rng.random_range(0..seeds.len());
        let base = &data.samples[seeds[s]];
        let nn = &data.samples[neighbourhoods[s][rng.random_range(0..neighbourhoods[s].len())]];
        let u = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        };
        let features = base
            .features
            .iter()
            .zip(&nn.features)
            .map(|(x, y)| x + u * (y - x))
            .collect();
        out.samples.push(Sample {
            features,
            label: minority_label,
            gender: base.gender,
            source_id: format!("smote-{n}"),
        });
    }
    Ok(out)
}
