//! Projects two clusters of 160-dim embeddings to two principal components
//! and prints the head of the plot-ready CSV.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sasv_time::embedding::{pca_project, Embedding};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut emb = Vec::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for i in 0..60 {
        let male = i % 2 == 0;
        let v: Vec<f64> = (0..160).map(|k| n.sample(&mut rng) + if male && k < 40 { 2.0 } else { 0.0 }).collect();
        emb.push(Embedding::new(v, ("female".into(), "male".into()), format!("u{i}")).unwrap());
        ids.push(format!("u{i}"));
        labels.push(if male { "male" } else { "female" }.to_string());
    }
    let pca = pca_project(&emb, 2).unwrap();
    println!("explained variance ratio {:.4?}", pca.explained_variance_ratio);
    for line in pca.to_csv(&ids, &labels).lines().take(6) {
        println!("{line}");
    }
}
