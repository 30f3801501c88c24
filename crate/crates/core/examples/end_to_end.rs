//! The whole system on a small synthetic corpus: synthesis, class models,
//! embeddings, gender recognizer, countermeasures, scoring, tandem
//! evaluation and fusion. Pass `gi` or `oracle` to change the gender mode.

use sasv_time::pipeline::{
    cmd_build_models, cmd_embed, cmd_eval, cmd_fuse, cmd_score, cmd_synth, cmd_train_cm, cmd_train_gender, GenderMode,
    RunConfig,
};

fn main() -> sasv_time::error::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut cfg = RunConfig::default();
    cfg.paths.work_dir = dir.path().to_path_buf();
    if let Some(m) = std::env::args().nth(1) {
        cfg.gender_mode = m.parse::<GenderMode>().map_err(sasv_time::error::Error::Config)?;
    }
    let s = &mut cfg.synth;
    (s.train_bonafide, s.train_spoof, s.dev_bonafide, s.dev_spoof, s.eval_bonafide, s.eval_spoof) = (10, 20, 5, 10, 10, 20);

    let m = cmd_synth(&cfg)?;
    cmd_build_models(&cfg, &m)?;
    cmd_embed(&cfg, &m, None)?;
    if cfg.gender_mode == GenderMode::GenderDependent {
        print!("{}", cmd_train_gender(&cfg, &m)?.to_text());
    }
    cmd_train_cm(&cfg, &m)?;
    cmd_score(&cfg, &m)?;
    for r in cmd_eval(&cfg)? {
        print!("{}", r.to_text());
    }
    print!("{}", cmd_fuse(&cfg)?.to_text());
    Ok(())
}
