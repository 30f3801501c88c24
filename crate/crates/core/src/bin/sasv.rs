use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use sasv_time::error::{Error, Result};
use sasv_time::fusion::{FusionMethod, TuneOn};
use sasv_time::labels::Gender;
use sasv_time::pipeline::{
    cmd_build_models, cmd_embed, cmd_eval, cmd_fuse, cmd_pca_export, cmd_score, cmd_synth, cmd_train_cm,
    cmd_train_gender, GenderMode, Manifest, ModelPair, RunConfig, Split,
};

#[derive(Parser)]
#[command(name = "sasv", version, about = "Time-domain PMF embeddings and tandem spoofing evaluation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// TOML config; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Derive every stage seed from this value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// gender_dependent, gender_independent or oracle_labels.
    #[arg(long, global = true)]
    gender_mode: Option<GenderMode>,
    /// Overrides paths.work_dir.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled synthetic corpus with ASV and second-stream scores.
    Synth,
    /// Build PMF class models from the train split.
    BuildModels,
    /// Embed every manifest row against each class-model pair.
    Embed {
        /// Restrict to these pairs: gender, cm_male, cm_female, cm_gi.
        #[arg(long, value_delimiter = ',')]
        pair: Vec<ModelPair>,
    },
    TrainGender,
    TrainCm,
    /// Score dev and eval under the gender mode.
    Score,
    /// Tandem metrics with bootstrap intervals, per gender and pooled.
    Eval,
    /// Fuse the countermeasure scores with the second stream.
    Fuse {
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        /// dev or eval.
        #[arg(long)]
        tune_on: Option<String>,
    },
    /// Write a PCA projection of the gender embeddings as CSV.
    PcaExport {
        #[arg(long, default_value = "eval")]
        split: Split,
        #[arg(long, default_value_t = 2)]
        dims: usize,
    },
    /// Every stage from synth to fuse.
    All,
    /// Build a manifest from ASVspoof 2019 LA protocol files.
    Asvspoof2019 {
        /// `SPLIT:PROTOCOL:AUDIO_DIR`, repeatable.
        #[arg(long, required = true)]
        protocol: Vec<String>,
        /// Speaker list of male speakers, repeatable.
        #[arg(long)]
        male: Vec<PathBuf>,
        #[arg(long)]
        female: Vec<PathBuf>,
    },
    Config {
        /// Print the effective configuration.
        #[arg(long)]
        dump: bool,
    },
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.reseed(s);
    }
    if let Some(t) = g.threads {
        cfg.threads = t;
    }
    if let Some(m) = g.gender_mode {
        cfg.gender_mode = m;
    }
    if let Some(w) = &g.work_dir {
        cfg.paths.work_dir = w.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest(cfg: &RunConfig) -> Result<Manifest> {
    Manifest::read(cfg.manifest_path())
}

fn parse_flag<T>(v: &Option<String>, name: &str, f: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
    v.as_deref().map(|s| f(s).ok_or_else(|| Error::Config(format!("--{name}: unknown value '{s}'")))).transpose()
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.global)?;
    if cfg.threads > 0 {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match cli.cmd {
        Cmd::Synth => {
            let m = cmd_synth(&cfg)?;
            println!("{} utterances written to {}", m.rows.len(), cfg.manifest_path().display());
        }
        Cmd::BuildModels => {
            for (g, n) in cmd_build_models(&cfg, &manifest(&cfg)?)? {
                println!("{g}\t{n}");
            }
        }
        Cmd::Embed { pair } => {
            let pairs = (!pair.is_empty()).then_some(pair.as_slice());
            for p in cmd_embed(&cfg, &manifest(&cfg)?, pairs)? {
                println!("{p}");
            }
        }
        Cmd::TrainGender => print!("{}", cmd_train_gender(&cfg, &manifest(&cfg)?)?.to_text()),
        Cmd::TrainCm => {
            for s in cmd_train_cm(&cfg, &manifest(&cfg)?)? {
                println!("{}\trows {}\tfinal loss {:.6}\tdev EER {:?}", s.system.model_name(), s.fitted_rows, s.final_loss, s.final_dev_eer);
            }
        }
        Cmd::Score => {
            for s in cmd_score(&cfg, &manifest(&cfg)?)? {
                println!("{}\t{} trials", s.split, s.trials);
            }
        }
        Cmd::Eval => {
            for r in cmd_eval(&cfg)? {
                print!("{}", r.to_text());
            }
        }
        Cmd::Fuse { method, alpha, tune_on } => {
            if let Some(m) = parse_flag(&method, "method", |s| match s {
                "weighted_average" | "weighted" => Some(FusionMethod::WeightedAverage),
                "classifier" => Some(FusionMethod::Classifier),
                _ => None,
            })? {
                cfg.fusion.method = m;
            }
            if let Some(t) = parse_flag(&tune_on, "tune-on", |s| match s {
                "dev" => Some(TuneOn::Dev),
                "eval" => Some(TuneOn::Eval),
                _ => None,
            })? {
                cfg.fusion.tune_on = t;
            }
            if alpha.is_some() {
                cfg.fusion.alpha = alpha;
            }
            cfg.validate()?;
            print!("{}", cmd_fuse(&cfg)?.to_text());
        }
        Cmd::PcaExport { split, dims } => println!("{}", cmd_pca_export(&cfg, &manifest(&cfg)?, split, dims)?.display()),
        Cmd::All => {
            let m = cmd_synth(&cfg)?;
            cmd_build_models(&cfg, &m)?;
            cmd_embed(&cfg, &m, None)?;
            if cfg.gender_mode == GenderMode::GenderDependent {
                cmd_train_gender(&cfg, &m)?;
            }
            cmd_train_cm(&cfg, &m)?;
            cmd_score(&cfg, &m)?;
            for r in cmd_eval(&cfg)? {
                print!("{}", r.to_text());
            }
            print!("{}", cmd_fuse(&cfg)?.to_text());
        }
        Cmd::Asvspoof2019 { protocol, male, female } => {
            let lists: Vec<(Gender, PathBuf)> = male
                .into_iter()
                .map(|p| (Gender::Male, p))
                .chain(female.into_iter().map(|p| (Gender::Female, p)))
                .collect();
            let mut out = Manifest { rows: Vec::new() };
            for spec in &protocol {
                let parts: Vec<&str> = spec.splitn(3, ':').collect();
                let [split, proto, audio] = parts[..] else {
                    return Err(Error::Config(format!("--protocol '{spec}': expected SPLIT:PROTOCOL:AUDIO_DIR")));
                };
                let split: Split = split.parse().map_err(Error::Config)?;
                out.extend(Manifest::from_asvspoof2019(proto.as_ref(), audio.as_ref(), split, &lists)?)?;
            }
            out.write(cfg.manifest_path())?;
            println!("{} rows written to {}", out.rows.len(), cfg.manifest_path().display());
        }
        Cmd::Config { dump } => {
            if dump {
                print!("{}", cfg.to_toml());
            } else {
                println!("configuration is valid");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
