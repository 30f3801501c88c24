//! Amplitude PMFs of Laplacian and Gaussian noise, a pooled class model,
//! and a save/load round trip of the model file.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sasv_time::pmf::{compute_pmf, GroupAccumulator, PmfGroupModel};

fn laplace(rng: &mut ChaCha8Rng, n: usize, b: f64) -> Vec<f64> {
    let e = rand_distr::Exp::new(1.0 / b).unwrap();
    (0..n).map(|i| if i % 2 == 0 { e.sample(rng) } else { -e.sample(rng) }).map(|v: f64| v.clamp(-1.0, 1.0)).collect()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gauss: Vec<f64> = Normal::new(0.0, 0.1).unwrap().sample_iter(&mut rng).take(16000).map(|v: f64| v.clamp(-1.0, 1.0)).collect();
    let lap = laplace(&mut rng, 16000, 0.07);
    for (name, x) in [("gaussian", &gauss), ("laplacian", &lap)] {
        let p = compute_pmf(x).expect("pmf");
        let s = p.support();
        let peak = p.bins().iter().cloned().fold(0.0, f64::max);
        println!("{name:<10} bins {} support {}..{} mass {:.12} peak {peak:.3e}", p.bin_count(), s.start, s.end, p.total_mass());
    }

    let mut acc = GroupAccumulator::new("noise", 1);
    for x in [&gauss, &lap] {
        acc.add_file(&[compute_pmf(x).unwrap()]).unwrap();
    }
    let model = acc.finish().expect("model");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noise.pmfm");
    model.save(&path).unwrap();
    let back = PmfGroupModel::load(&path).unwrap();
    println!("model '{}' from {} files, round trip equal: {}", back.group_name, back.file_count, back == model);
}
