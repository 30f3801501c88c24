//! File-based stages of the end-to-end system. Each `cmd_*` function reads
//! the artifacts of the stages before it from the work directory.

pub mod config;
pub mod eval;
pub mod features;
pub mod fuse;
pub mod manifest;
pub mod score;
pub mod synth;
pub mod train;

pub use config::{GenderMode, RunConfig};
pub use eval::{cmd_eval, evaluate, pair_tandem, EvalReport, EvalSettings, Group, Metric};
pub use features::{cmd_build_models, cmd_embed, ModelPair};
pub use fuse::{cmd_fuse, cmd_pca_export, FusionSummary};
pub use manifest::{Manifest, ManifestRow, Split};
pub use score::cmd_score;
pub use synth::{cmd_synth, SynthConfig};
pub use train::{cmd_train_cm, cmd_train_gender, CmSystem, GenderReport};
