//! Percentile bootstrap interval of a CM EER, stratified by class.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sasv_time::labels::TrialClass;
use sasv_time::metrics::{bootstrap_ci, eer, BootstrapConfig, Task, TrialScoreSet};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = Normal::new(0.0, 1.0).unwrap();
    let pairs: Vec<(TrialClass, f64)> = (0..400)
        .map(|i| if i % 4 == 0 { (TrialClass::Target, 1.5 + n.sample(&mut rng)) } else { (TrialClass::Spoof, n.sample(&mut rng)) })
        .collect();
    let set = TrialScoreSet::from_pairs(pairs).unwrap();
    let cfg = BootstrapConfig::default();
    let est = bootstrap_ci(&set, |s| Ok(eer(s, Task::Cm)?.0), &cfg).unwrap();
    println!(
        "EER {:.4}  {}% CI [{:.4}, {:.4}] from {} replicates (percentiles {:.4} / {:.4})",
        est.value,
        100.0 - est.alpha_percent,
        est.ci_low,
        est.ci_high,
        est.n_bootstrap,
        est.percentile_low,
        est.percentile_high
    );
}
