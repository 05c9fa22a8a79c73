//! The `spoofsense` command line, callable in-process through [`run`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use spoofsense_core::classifier::{init_model, load_model, save_model, score, train, Standardizer};
use spoofsense_core::entropy::pse_report;
use spoofsense_core::metrics::{
    evaluate_scorefile, format_asv_scorefile, format_scorefile, report_csv, CostModel, Label,
    Metric, ScoreRecord,
};
use spoofsense_core::pipeline::{extract_feature, load_audio, load_inputs};
use spoofsense_core::store::{feature_file_name, write_feature};
use spoofsense_core::trials::{
    build_pairs, load_manifest, score_trials, Category, CmClass, EmbeddingFile, PairLabel, TrialSet,
};
use spoofsense_core::{Error, FeatureKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "spoofsense",
    version,
    about = "Speech-production features and spoofing countermeasure evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one feature file per manifest row.
    Extract(ExtractArgs),
    /// Build ASV trial pairs from a manifest.
    Pairs(PairsArgs),
    /// Train the MLP countermeasure on stored features.
    TrainCm(TrainArgs),
    /// Score manifest rows with a trained countermeasure.
    ScoreCm(ScoreCmArgs),
    /// Cosine-score trial pairs from speaker embeddings.
    ScoreAsv(ScoreAsvArgs),
    /// EER or min t-DCF per group and pooled.
    Eval(EvalArgs),
    /// Power spectral entropy per utterance with class histograms.
    PseReport(PseArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Run configuration (TOML). Falls back to $SPOOFSENSE_CONFIG, then built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// stft, mfcc, sp, ap, f0, jitter-shimmer or pse
    #[arg(long)]
    feature: FeatureKind,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Exit 0 even when some rows fail.
    #[arg(long)]
    keep_going: bool,
}

#[derive(Debug, Args)]
struct PairsArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// R, RI, IAB, TI, IRAB, IRT or all
    #[arg(long)]
    category: CategoryArg,
    #[arg(long)]
    out: PathBuf,
    /// Keep a random subset of this many pairs.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy)]
enum CategoryArg {
    One(Category),
    All,
}

impl std::str::FromStr for CategoryArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s.eq_ignore_ascii_case("all") {
            Ok(CategoryArg::All)
        } else {
            s.to_ascii_uppercase().parse().map(CategoryArg::One)
        }
    }
}

#[derive(Debug, Args)]
struct FeatureSource {
    /// Comma-separated feature kinds, concatenated in this order.
    #[arg(long, value_delimiter = ',', required = true)]
    features: Vec<FeatureKind>,
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding `<utt>.<feature>.ssft` files.
    #[arg(long)]
    feature_dir: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    source: FeatureSource,
    #[arg(long)]
    out_model: PathBuf,
    /// Per-epoch loss log; defaults to `<out-model>.log`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct ScoreCmArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    source: FeatureSource,
    #[arg(long)]
    out_scores: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreAsvArgs {
    #[arg(long)]
    trials: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out_scores: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    /// eer or tdcf
    #[arg(long, default_value = "eer")]
    metric: Metric,
    /// t-DCF cost model (TOML); overrides `cost_config` from the run config.
    #[arg(long)]
    cost_config: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
    /// Write the CSV report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PseArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

enum Failure {
    Usage(String),
    Runtime(Error),
    /// Details were already reported.
    Silent,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

/// Parse `args` (including the program name) and execute. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Pairs(a) => pairs(a),
        Command::TrainCm(a) => train_cm(a),
        Command::ScoreCm(a) => score_cm(a),
        Command::ScoreAsv(a) => score_asv(a),
        Command::Eval(a) => eval(a),
        Command::PseReport(a) => pse(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
        Err(Failure::Silent) => EXIT_FAILURE,
    }
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig, Error> {
    RunConfig::resolve(arg.config.as_deref())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn extract(a: ExtractArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let manifest = load_manifest(&a.manifest)?;
    create_dir(&a.out_dir)?;
    let results: Vec<Result<(), Error>> = thread_pool(a.jobs)?.install(|| {
        manifest
            .rows()
            .par_iter()
            .map(|row| {
                let buf = load_audio(&row.path, &cfg)?;
                let mut m = extract_feature(&buf, a.feature, &cfg)?;
                m.utt_id = row.utt_id.clone();
                write_feature(
                    a.out_dir.join(feature_file_name(&row.utt_id, a.feature)),
                    &m,
                )
            })
            .collect()
    });
    let mut failed = 0;
    for (row, r) in manifest.rows().iter().zip(&results) {
        if let Err(e) = r {
            failed += 1;
            eprintln!("failed {}: {e}", row.utt_id);
        }
    }
    println!(
        "extracted {} of {} utterances ({failed} failed)",
        results.len() - failed,
        results.len()
    );
    if failed > 0 && !a.keep_going {
        return Err(Failure::Silent);
    }
    Ok(())
}

fn pairs(a: PairsArgs) -> CmdResult {
    let manifest = load_manifest(&a.manifest)?;
    let set = match a.category {
        CategoryArg::One(c) => build_pairs(&manifest, c)?,
        CategoryArg::All => {
            let mut all = TrialSet::default();
            for c in Category::ALL {
                match build_pairs(&manifest, c) {
                    Ok(t) => all.pairs.extend(t.pairs),
                    Err(Error::EmptyCategory(_)) => eprintln!("note: category {c} is empty"),
                    Err(e) => return Err(e.into()),
                }
            }
            if all.is_empty() {
                return Err(Failure::Runtime(Error::InvalidConfig(
                    "manifest yields no pairs in any category".into(),
                )));
            }
            all
        }
    };
    let set = match a.sample {
        Some(n) => set.sample(n, a.seed),
        None => set,
    };
    write_text(&a.out, &set.to_tsv())?;
    println!("wrote {} pairs", set.len());
    Ok(())
}

fn train_cm(a: TrainArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let manifest = load_manifest(&a.source.manifest)?;
    let inputs = load_inputs(&manifest, &a.source.feature_dir, &a.source.features)?;
    let has = |c: CmClass| inputs.iter().any(|i| i.class == c);
    if !has(CmClass::Bonafide) || !has(CmClass::Spoof) {
        return Err(Error::EmptyDataset.into());
    }
    let raw: Vec<Vec<f64>> = inputs.iter().map(|i| i.vector.clone()).collect();
    let standardizer = Standardizer::fit(&raw)?;
    let data: Vec<(Vec<f64>, usize)> = inputs
        .iter()
        .map(|i| (standardizer.apply(&i.vector), i.class.index()))
        .collect();
    let dims = [raw[0].len(), cfg.hidden1, cfg.hidden2, 2];
    let model = init_model(&dims, cfg.activation, cfg.seed)?;
    let (mut model, history) = train(&model, &data, &cfg.train())?;
    standardizer.fold_into(&mut model);
    save_model(&a.out_model, &model)?;

    let log_path = a.log.unwrap_or_else(|| {
        let mut p = a.out_model.clone().into_os_string();
        p.push(".log");
        PathBuf::from(p)
    });
    let mut log = String::from("epoch\tloss\n");
    for (i, l) in history.iter().enumerate() {
        writeln!(log, "{}\t{l}", i + 1).unwrap();
    }
    write_text(&log_path, &log)?;
    println!(
        "trained {:?} on {} utterances; final loss {}",
        dims,
        data.len(),
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn score_cm(a: ScoreCmArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let manifest = load_manifest(&a.source.manifest)?;
    let inputs = load_inputs(&manifest, &a.source.feature_dir, &a.source.features)?;
    let mut records = inputs
        .iter()
        .map(|i| {
            Ok(ScoreRecord {
                trial_id: i.utt_id.clone(),
                group: i.attack_id.clone(),
                label: match i.class {
                    CmClass::Bonafide => Label::Positive,
                    CmClass::Spoof => Label::Negative,
                },
                score: score(&model, &i.vector)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    records.sort_by(|x, y| x.trial_id.cmp(&y.trial_id));
    write_text(&a.out_scores, &format_scorefile(&records))?;
    println!("scored {} utterances", records.len());
    Ok(())
}

fn score_asv(a: ScoreAsvArgs) -> CmdResult {
    let text = fs::read_to_string(&a.trials).map_err(|source| Error::Io {
        path: a.trials.clone(),
        source,
    })?;
    let trials = TrialSet::parse(&text)?;
    let emb = EmbeddingFile::load(&a.embeddings)?;
    let scores = score_trials(&trials, &emb)?;
    // Positive pairs are shared by every group so each negative category
    // is evaluated against the full target set.
    let records: Vec<ScoreRecord> = trials
        .pairs
        .iter()
        .zip(scores.scores())
        .zip(scores.labels())
        .map(|((p, &s), &label)| ScoreRecord {
            trial_id: format!("{}:{}", p.utt_a, p.utt_b),
            group: (p.label == PairLabel::Negative).then(|| p.category.to_string()),
            label,
            score: s,
        })
        .collect();
    write_text(&a.out_scores, &format_asv_scorefile(&records))?;
    println!("scored {} trials", records.len());
    Ok(())
}

fn eval(a: EvalArgs) -> CmdResult {
    let cost = match a.metric {
        Metric::Eer => None,
        Metric::Tdcf => {
            let path = match a.cost_config {
                Some(p) => p,
                None => load_config(&a.config)?.cost_config.ok_or_else(|| {
                    Failure::Usage(
                        "--metric tdcf needs --cost-config (or cost_config in the run config)"
                            .into(),
                    )
                })?,
            };
            Some(CostModel::load(&path)?)
        }
    };
    let rows = evaluate_scorefile(&a.scores, a.metric, cost.as_ref())?;
    let csv = report_csv(&rows);
    match a.out {
        Some(p) => write_text(&p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn pse(a: PseArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let manifest = load_manifest(&a.manifest)?;
    let summary = pse_report(&manifest, &a.out, &cfg.pse(), cfg.sample_rate, a.jobs)?;
    let failed = summary
        .per_utt
        .values()
        .filter(|u| u.value.is_err())
        .count();
    println!(
        "pse for {} utterances ({failed} failed)",
        summary.per_utt.len()
    );
    Ok(())
}
