//! All eight similarity measures between two amplitude PMFs, plus each
//! PMF against itself. Divergences are taken on smoothed PMFs, as the
//! embedder does.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sasv_time::embedding::EmbedConfig;
use sasv_time::pmf::{compute_pmf, smooth_for_divergence};
use sasv_time::similarity::{measure, MeasureId};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut noise = |sd: f64| -> Vec<f64> {
        Normal::new(0.0, sd).unwrap().sample_iter(&mut rng).take(32000).map(|v: f64| v.clamp(-1.0, 1.0)).collect()
    };
    let p = compute_pmf(&noise(0.05)).unwrap();
    let q = compute_pmf(&noise(0.08)).unwrap();
    let eps = EmbedConfig::default().epsilon;
    let (ps, qs) = (smooth_for_divergence(&p, eps).unwrap(), smooth_for_divergence(&q, eps).unwrap());
    println!("epsilon {eps:e}");
    println!("{:<28} {:>14} {:>14}", "measure", "d(p, q)", "d(p, p)");
    for id in MeasureId::ALL {
        let kind = if id.is_similarity() { "similarity" } else { "distance" };
        let (p, q) = if id.needs_smoothing() { (&ps, &qs) } else { (&p, &q) };
        println!(
            "{:<28} {:>14.6e} {:>14.6e}  {kind}",
            id.name(),
            measure(id, p, q).unwrap(),
            measure(id, p, p).unwrap()
        );
    }
}
