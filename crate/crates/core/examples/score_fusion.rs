//! Weighted and classifier fusion of two synthetic CM score streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sasv_time::classifiers::{GbdtParams, LogregParams};
use sasv_time::fusion::{score_pairs, tune_fusion_classifier, DevEvalSweep, FusionClassifierKind, PairedScores, PairedTrial};
use sasv_time::labels::{Gender, TrialClass};
use sasv_time::metrics::{eer, Task};

fn pairs(rng: &mut ChaCha8Rng, n: usize) -> PairedScores {
    let a = Normal::new(0.0, 0.15).unwrap();
    let b = Normal::new(0.0, 0.1).unwrap();
    let squash = |v: f64| v.clamp(0.0, 1.0);
    PairedScores {
        trials: (0..n)
            .map(|i| {
                let bona = i % 3 == 0;
                PairedTrial {
                    trial_id: format!("t{i}"),
                    gender: Gender::Unknown,
                    class: if bona { TrialClass::Target } else { TrialClass::Spoof },
                    gd: squash(if bona { 0.65 } else { 0.4 } + a.sample(rng)),
                    lfcc: squash(if bona { 0.6 } else { 0.4 } + b.sample(rng)),
                }
            })
            .collect(),
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let dev = pairs(&mut rng, 600);
    let eval = pairs(&mut rng, 600);
    let sweep = DevEvalSweep::run(&dev, &eval, 0.01).unwrap();
    let e = |a: f64| eer(&eval.fuse_weighted(a).unwrap(), Task::Cm).unwrap().0;
    println!("eval EER: gd {:.4}, lfcc {:.4}", e(1.0), e(0.0));
    println!("dev-tuned alpha {:.2}: eval EER {:.4}", sweep.dev.best_alpha, e(sweep.dev.best_alpha));
    println!("eval-tuned alpha {:.2}: eval EER {:.4}", sweep.eval.best_alpha, sweep.eval.best_eer);
    for kind in [FusionClassifierKind::LogisticRegression, FusionClassifierKind::Gbdt] {
        let t = tune_fusion_classifier(&dev, &dev, kind, &LogregParams::default(), &GbdtParams::default()).unwrap();
        let fused = score_pairs(&t.model, &eval).unwrap();
        println!("{kind:?} fusion: eval EER {:.4}", eer(&fused, Task::Cm).unwrap().0);
    }
}
