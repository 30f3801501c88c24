//! Trains the three grouped countermeasure networks on synthetic 160-dim
//! embeddings and reports dev EER. The male network has a sigmoid head, the
//! other two a one-class-softmax head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sasv_time::classifiers::{train_grouped_mlp, Dataset, FeatureLayout, GroupedMlpSpec, Sample, TrainedModel};
use sasv_time::labels::{Gender, TrialClass};
use sasv_time::metrics::{eer, Task, TrialEntry, TrialScoreSet};

fn data(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Dataset {
    let noise = Normal::new(0.0, 1.0).unwrap();
    let samples = (0..n)
        .map(|i| {
            let label = (i % 3 == 0) as u8;
            // bona fide rows shift a handful of coordinates in each group
            let features = (0..160).map(|k| noise.sample(rng) + if label == 1 && k % 10 < 3 { shift } else { 0.0 }).collect();
            Sample { features, label, gender: Gender::Unknown, source_id: format!("s{i}") }
        })
        .collect();
    Dataset::from_samples(FeatureLayout::EMBEDDING_GROUPS, samples).unwrap()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let train = data(&mut rng, 600, 0.8);
    let dev = data(&mut rng, 300, 0.8);
    for spec in [GroupedMlpSpec::male(), GroupedMlpSpec::female(), GroupedMlpSpec::gender_independent()] {
        let (net, log) = train_grouped_mlp(&train, &spec, Some(&dev)).unwrap();
        let model = TrainedModel::GroupedMlp(net);
        let entries = dev
            .samples
            .iter()
            .map(|s| TrialEntry {
                trial_id: s.source_id.clone(),
                gender: s.gender,
                class: if s.label == 1 { TrialClass::Target } else { TrialClass::Spoof },
                score: model.score(&s.features).unwrap(),
            })
            .collect();
        let dev_eer = eer(&TrialScoreSet { entries }, Task::Cm).unwrap().0;
        let (first, last) = (log.rows.first().unwrap(), log.rows.last().unwrap());
        println!(
            "{:?} {:?}: loss {:.4} -> {:.4} over {} epochs, dev EER {:.2}%",
            spec.variant,
            spec.head,
            first.1,
            last.1,
            log.rows.len(),
            100.0 * dev_eer
        );
    }
}
