//! Builds two class models from synthetic utterances and embeds a held-out
//! utterance against them. Prints the 16 groups and per-stage timings.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sasv_time::embedding::{regroup, EmbedConfig, Embedder, GroupKey, GROUP_COUNT};
use sasv_time::filterbank::{design_bank, FilterBankConfig, CHANNELS};
use sasv_time::pmf::{compute_pmf, GroupAccumulator, Pmf};

/// AR(1) noise with coefficient `a`, scaled to peak 0.5.
fn utterance(rng: &mut ChaCha8Rng, a: f64, len: usize) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut x = 0.0;
    let mut out: Vec<f64> = (0..len)
        .map(|_| {
            x = a * x + n.sample(rng);
            x
        })
        .collect();
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    out
}

fn main() {
    let bank = design_bank(16000, &FilterBankConfig::default()).expect("bank");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pmfs = |x: &[f64]| -> Vec<Pmf> { bank.channels().iter().map(|c| compute_pmf(&c.filter(x)).unwrap()).collect() };

    let t = Instant::now();
    let mut models = Vec::new();
    for (name, a) in [("genuine", 0.95), ("spoof", 0.5)] {
        let mut acc = GroupAccumulator::new(name, CHANNELS);
        for _ in 0..4 {
            acc.add_file(&pmfs(&utterance(&mut rng, a, 16000))).unwrap();
        }
        models.push(acc.finish().unwrap());
    }
    println!("models: {:.2?}", t.elapsed());

    let spoof = models.pop().unwrap();
    let genuine = models.pop().unwrap();
    let embedder = Embedder::new(genuine, spoof, EmbedConfig::default()).unwrap();

    let x = utterance(&mut rng, 0.95, 16000);
    let t = Instant::now();
    let input = pmfs(&x);
    println!("filter + pmf: {:.2?}", t.elapsed());
    let t = Instant::now();
    let e = embedder.embed(&input, "probe").unwrap();
    println!("embed: {:.2?}", t.elapsed());

    let g = regroup(&e);
    for i in 0..GROUP_COUNT {
        let key = GroupKey::from_index(i);
        let kind = if key.inverse { "inverse" } else { "gammatone" };
        let vals: Vec<String> = g.group(key).iter().map(|v| format!("{v:+.3e}")).collect();
        println!("{:>9} {:<26} {}", kind, key.measure.name(), vals.join(" "));
    }
}
