//! Gender recognition from female-vs-male time embeddings on a small
//! synthetic corpus. Prints held-out accuracy per split.

use sasv_time::pipeline::features::{cmd_build_models, cmd_embed, ModelPair};
use sasv_time::pipeline::{cmd_synth, cmd_train_gender, RunConfig};

fn main() -> sasv_time::error::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut cfg = RunConfig::default();
    cfg.paths.work_dir = dir.path().to_path_buf();
    let s = &mut cfg.synth;
    (s.train_bonafide, s.train_spoof, s.dev_bonafide, s.dev_spoof, s.eval_bonafide, s.eval_spoof) = (8, 12, 4, 6, 8, 12);

    let manifest = cmd_synth(&cfg)?;
    cmd_build_models(&cfg, &manifest)?;
    cmd_embed(&cfg, &manifest, Some(&[ModelPair::Gender]))?;
    let report = cmd_train_gender(&cfg, &manifest)?;
    print!("{}", report.to_text());
    Ok(())
}
