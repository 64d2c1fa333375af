use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use meow_core::agents::{client_from_config, ChatClient};
use meow_core::digest::file_digest;
use meow_core::eval::{
    accuracy, emit_report, run_ablation, weighted_average_f1, AblationOptions, AggMode, Prediction,
    PredictionSet, ReportFormat, RoundEval,
};
use meow_core::gnn::{grad_check, train, Checkpoint, ModelConfig};
use meow_core::graph::{
    build_datasets, dataset_stats, make_splits, Dataset, RelationScheme, SplitSet,
};
use meow_core::judge::{judge, JudgeMethod};
use meow_core::pipeline::{run_pipeline, split_seed, Artifacts, PipelineConfig, PipelineError};
use meow_core::rng::derive_seed;
use meow_core::sim::{
    failure_manifest_path, read_jsonl, run_batch, write_failures, write_jsonl, BatchStats,
    PolicySpec,
};

/// Errors that exit with status 2.
#[derive(Debug)]
struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Parser)]
#[command(
    name = "meow",
    version,
    about = "Simulate Find The Spy games, train the graph expert, and judge with it"
)]
struct Cli {
    /// Pipeline config (JSON). Defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Games simulated concurrently.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Where artifacts go; defaults to the config's out_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play a batch of games and write them as JSONL records.
    Simulate(SimulateArgs),
    /// Turn records into the D1 and D2 graph datasets.
    BuildGraphs(BuildArgs),
    /// Make random train/test splits of a dataset.
    Split(SplitArgs),
    /// Train expert checkpoints, one per split.
    Train(TrainArgs),
    /// Compare analytic gradients with finite differences.
    GradCheck(GradArgs),
    /// Judge games with one method.
    Judge(JudgeArgs),
    /// Run every method on every split and write the tables.
    Ablate(AblateArgs),
    /// Sizes of record files and datasets.
    Stats(StatsArgs),
    /// Every stage in order, reusing cached results.
    RunAll,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n_games: Option<u64>,
    #[arg(long)]
    detect_rate: Option<f64>,
    #[arg(long)]
    false_alarm: Option<f64>,
    #[arg(long)]
    deception: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Tagged,
    Merged,
}

impl From<SchemeArg> for RelationScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Tagged => RelationScheme::RoundTagged,
            SchemeArg::Merged => RelationScheme::Merged,
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    n_splits: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Train this split only.
    #[arg(long)]
    split_id: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Checkpoint directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradArgs {
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 64)]
    coords: usize,
    /// 1 or 2; both when absent.
    #[arg(long)]
    round: Option<u8>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cot,
    Expert,
    #[value(name = "cot_eo")]
    CotEo,
}

impl From<MethodArg> for JudgeMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cot => JudgeMethod::Cot,
            MethodArg::Expert => JudgeMethod::Expert,
            MethodArg::CotEo => JudgeMethod::CotEo,
        }
    }
}

#[derive(Args)]
struct JudgeArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// `http(s)://…` or `mock:<script-file>`.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 1)]
    round: u8,
    /// Judge only these games.
    #[arg(long, value_delimiter = ',')]
    games: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggArg {
    Median8,
    Mean10,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    d1: Option<PathBuf>,
    #[arg(long)]
    d2: Option<PathBuf>,
    /// Splits of D1.
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Splits of D2; round 2 is skipped when there are none.
    #[arg(long)]
    splits2: Option<PathBuf>,
    #[arg(long)]
    ckpt_dir: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, value_enum)]
    agg: Option<AggArg>,
    /// `.md` or `.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    dataset: Vec<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.batch.base_seed = seed;
        cfg.splits.seed = seed;
        cfg.train_seed = seed;
        cfg.ablation_seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.batch.workers = w;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    Ok(cfg)
}

/// Input files named on the command line must exist; a missing one is a
/// usage error rather than a stage failure.
fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(config_err(format!("{} does not exist", path.display())))
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn judge_client(
    cfg: &PipelineConfig,
    endpoint: Option<String>,
    needed: bool,
) -> Result<Option<std::sync::Arc<dyn ChatClient>>> {
    if !needed {
        return Ok(None);
    }
    let mut jc = cfg.judge.clone().unwrap_or_default();
    if let Some(e) = endpoint {
        jc.endpoint = e;
    }
    if jc.endpoint.is_empty() {
        return Err(config_err(
            "this method needs a judge endpoint (--endpoint or judge.endpoint in the config)",
        ));
    }
    client_from_config(&jc)
        .map(Some)
        .map_err(|e| config_err(e.to_string()))
}

fn simulate(cfg: &PipelineConfig, art: &Artifacts, a: SimulateArgs) -> Result<()> {
    let mut batch = cfg.effective_batch()?;
    if let Some(n) = a.n_games {
        batch.n_games = n;
    }
    if a.detect_rate.is_some() || a.false_alarm.is_some() || a.deception.is_some() {
        let PolicySpec::Scripted { params } = &mut batch.policy else {
            return Err(config_err(
                "behaviour overrides apply to scripted policies only",
            ));
        };
        params.detect_rate = a.detect_rate.unwrap_or(params.detect_rate);
        params.false_alarm = a.false_alarm.unwrap_or(params.false_alarm);
        params.deception = a.deception.unwrap_or(params.deception);
    }
    batch.validate().map_err(|e| config_err(e.to_string()))?;
    let out_path = a.out.unwrap_or_else(|| art.records.clone());
    if let Some(dir) = out_path.parent() {
        ensure_dir(dir)?;
    }
    let out = run_batch(&batch)?;
    write_jsonl(&out_path, &out.records)?;
    if !out.failures.is_empty() {
        let manifest = failure_manifest_path(&out_path);
        write_failures(&manifest, &out.failures)?;
        log::warn!(
            "{} games failed; see {}",
            out.failures.len(),
            manifest.display()
        );
    }
    print_json(&out.stats);
    Ok(())
}

fn build_graphs(cfg: &PipelineConfig, art: &Artifacts, a: BuildArgs) -> Result<()> {
    let records_path = a.records.unwrap_or_else(|| art.records.clone());
    require(&records_path)?;
    let records = read_jsonl(&records_path)?;
    let scheme = a.scheme.map(Into::into).unwrap_or(cfg.scheme);
    let (d1, d2) = build_datasets(&records, scheme, &file_digest(&records_path)?);
    ensure_dir(&art.dir)?;
    d1.save(&art.d1)?;
    d2.save(&art.d2)?;
    print_json(&serde_json::json!({
        "d1": dataset_stats(&d1.graphs),
        "d2": dataset_stats(&d2.graphs),
        "rejected": d1.manifest.rejected.len(),
    }));
    Ok(())
}

fn split(cfg: &PipelineConfig, art: &Artifacts, a: SplitArgs) -> Result<()> {
    let path = a.dataset.unwrap_or_else(|| art.d1.clone());
    require(&path)?;
    let ds = Dataset::load(&path)?;
    let n_splits = a.n_splits.unwrap_or(cfg.splits.n_splits);
    let ratio = a.ratio.unwrap_or(cfg.splits.ratio);
    let splits = make_splits(ds.len(), n_splits, ratio, cfg.splits.seed)?;
    let set = SplitSet {
        dataset_digest: file_digest(&path)?,
        splits,
    };
    let out = a
        .out
        .unwrap_or_else(|| art.splits(ds.which.rounds()).to_path_buf());
    set.save(&out)?;
    println!(
        "{} splits of {} graphs -> {}",
        set.splits.len(),
        ds.len(),
        out.display()
    );
    Ok(())
}

fn model_for(cfg: &PipelineConfig, ds: &Dataset) -> ModelConfig {
    let round = ds.which.rounds();
    let given = if round == 1 { &cfg.round1 } else { &cfg.round2 };
    given
        .clone()
        .unwrap_or_else(|| ModelConfig::for_dataset(ds.which, ds.scheme))
}

fn load_checked(ds_path: &Path, splits_path: &Path) -> Result<(Dataset, SplitSet, String)> {
    let ds = Dataset::load(ds_path)?;
    let splits = SplitSet::load(splits_path)?;
    if splits.dataset_digest != file_digest(ds_path)? {
        bail!(
            "{} does not match the dataset {} was made for",
            ds_path.display(),
            splits_path.display()
        );
    }
    Ok((ds, splits, file_digest(splits_path)?))
}

fn train_cmd(cfg: &PipelineConfig, art: &Artifacts, a: TrainArgs) -> Result<()> {
    let ds_path = a.dataset.unwrap_or_else(|| art.d1.clone());
    require(&ds_path)?;
    let ds = Dataset::load(&ds_path)?;
    let round = ds.which.rounds();
    let splits_path = a.splits.unwrap_or_else(|| art.splits(round).to_path_buf());
    require(&splits_path)?;
    let (ds, splits, splits_digest) = load_checked(&ds_path, &splits_path)?;
    let mut model = model_for(cfg, &ds);
    if model.relation_keys != ds.relation_keys() {
        return Err(config_err(format!(
            "model relations {:?} do not match {}",
            model.relation_keys,
            ds_path.display()
        )));
    }
    if let Some(e) = a.max_epochs {
        model.max_epochs = e;
    }
    let dir = a.out.unwrap_or_else(|| art.checkpoints.clone());
    ensure_dir(&dir)?;
    let mut summary = Vec::new();
    for s in &splits.splits {
        if a.split_id.is_some_and(|id| id != s.split_id) {
            continue;
        }
        let seed = split_seed(cfg.train_seed, round, s.split_id);
        let (mut ck, log) =
            train(&ds.graphs, s, &model, seed).with_context(|| format!("split {}", s.split_id))?;
        ck.data_digest = splits_digest.clone();
        let path = dir.join(format!("r{round}_split{:02}.json", s.split_id));
        ck.save(&path)?;
        summary.push(serde_json::json!({
            "split_id": s.split_id,
            "fold": log.chosen_fold,
            "best_val_loss": ck.best_val_loss,
            "epoch": ck.epoch,
            "digest": ck.digest(),
            "path": path,
        }));
    }
    if summary.is_empty() {
        return Err(config_err("no split matched --split-id"));
    }
    print_json(&summary);
    Ok(())
}

fn grad_check_cmd(cfg: &PipelineConfig, a: GradArgs) -> Result<()> {
    let rounds: Vec<u8> = match a.round {
        Some(r @ (1 | 2)) => vec![r],
        Some(r) => return Err(config_err(format!("round must be 1 or 2, got {r}"))),
        None => vec![1, 2],
    };
    let mut worst: f64 = 0.0;
    for r in rounds {
        let report = grad_check(
            &cfg.model(r),
            a.trials,
            a.coords,
            derive_seed(cfg.train_seed, r as u64),
        )?;
        worst = worst.max(report.max_rel_error);
        println!("round {r}: {}", serde_json::to_string(&report)?);
    }
    if !(worst < 1e-4) {
        bail!("max relative error {worst:e} is not below 1e-4");
    }
    Ok(())
}

fn judge_cmd(cfg: &PipelineConfig, art: &Artifacts, a: JudgeArgs) -> Result<()> {
    let method: JudgeMethod = a.method.into();
    if !(1..=2).contains(&a.round) {
        return Err(config_err(format!("round must be 1 or 2, got {}", a.round)));
    }
    let ck = match (&a.checkpoint, method.needs_checkpoint()) {
        (Some(p), true) => {
            require(p)?;
            Some(Checkpoint::load(p)?)
        }
        (None, true) => return Err(config_err(format!("{} needs --checkpoint", method.key()))),
        _ => None,
    };
    let client = judge_client(cfg, a.endpoint, method.needs_client())?;
    let sampling = cfg.judge.as_ref().map(|j| j.sampling()).unwrap_or_default();
    let records_path = a.records.unwrap_or_else(|| art.records.clone());
    require(&records_path)?;
    let records = read_jsonl(&records_path)?;
    let out = a.out.unwrap_or_else(|| {
        art.dir
            .join(format!("judge_{}_r{}.jsonl", method.key(), a.round))
    });
    if let Some(dir) = out.parent() {
        ensure_dir(dir)?;
    }
    let mut lines = String::new();
    let mut pairs = Vec::new();
    for rec in &records {
        if !a.games.is_empty() && !a.games.contains(&rec.game_index) {
            continue;
        }
        // round-2 judging covers the games where the spy survived round 1
        if a.round == 2 && !rec.spy_survived_round1() {
            continue;
        }
        let seed = derive_seed(cfg.ablation_seed, rec.game_index);
        let res = judge(
            client.as_deref(),
            &sampling,
            method,
            rec,
            a.round,
            ck.as_ref(),
            seed,
        )
        .with_context(|| format!("game {}", rec.game_index))?;
        pairs.push(Prediction {
            game_index: rec.game_index,
            predicted: res.resolved(rec),
            truth: rec.spy_seat,
        });
        lines.push_str(&serde_json::to_string(&res)?);
        lines.push('\n');
    }
    std::fs::write(&out, lines).with_context(|| format!("writing {}", out.display()))?;
    let set = PredictionSet {
        method,
        round_scope: a.round,
        pairs,
    };
    if set.pairs.is_empty() {
        println!("no games to judge");
        return Ok(());
    }
    print_json(&serde_json::json!({
        "games": set.pairs.len(),
        "accuracy": accuracy(&set)?,
        "wa_f1": weighted_average_f1(&set)?,
        "out": out,
    }));
    Ok(())
}

fn ablate(cfg: &PipelineConfig, art: &Artifacts, a: AblateArgs) -> Result<()> {
    let methods: Vec<JudgeMethod> = if a.methods.is_empty() {
        cfg.methods.clone()
    } else {
        a.methods.into_iter().map(Into::into).collect()
    };
    let records_path = a.records.unwrap_or_else(|| art.records.clone());
    require(&records_path)?;
    let records = read_jsonl(&records_path)?;
    let ckpt_dir = a.ckpt_dir.unwrap_or_else(|| art.checkpoints.clone());
    let mut inputs = Vec::new();
    let round_files = [
        (
            1u8,
            a.d1.unwrap_or_else(|| art.d1.clone()),
            a.splits.unwrap_or_else(|| art.splits1.clone()),
        ),
        (
            2u8,
            a.d2.unwrap_or_else(|| art.d2.clone()),
            a.splits2.unwrap_or_else(|| art.splits2.clone()),
        ),
    ];
    for (round, ds_path, splits_path) in round_files {
        if round == 2 && !splits_path.exists() {
            log::info!("no {}; round 2 skipped", splits_path.display());
            continue;
        }
        require(&ds_path)?;
        require(&splits_path)?;
        let (ds, splits, digest) = load_checked(&ds_path, &splits_path)?;
        let mut cks = BTreeMap::new();
        for s in &splits.splits {
            let path = ckpt_dir.join(format!("r{round}_split{:02}.json", s.split_id));
            if !path.exists() {
                continue;
            }
            let ck = Checkpoint::load(&path)?;
            if !ck.data_digest.is_empty() && ck.data_digest != digest {
                bail!(
                    "{} was trained under different splits than {}",
                    path.display(),
                    splits_path.display()
                );
            }
            cks.insert(s.split_id, ck);
        }
        inputs.push((round, ds, splits, cks));
    }
    let rounds: Vec<RoundEval<'_>> = inputs
        .iter()
        .map(|(round, ds, splits, cks)| RoundEval {
            round: *round,
            dataset: ds,
            splits,
            checkpoints: cks,
        })
        .collect();
    let client = judge_client(cfg, a.endpoint, methods.iter().any(|m| m.needs_client()))?;
    let opts = AblationOptions {
        methods,
        agg_mode: match a.agg {
            Some(AggArg::Mean10) => AggMode::Mean10,
            Some(AggArg::Median8) => AggMode::Median8,
            None => cfg.agg_mode,
        },
        seed: cfg.ablation_seed,
        sampling: cfg.judge.as_ref().map(|j| j.sampling()).unwrap_or_default(),
    };
    let table = run_ablation(&records, &rounds, client.as_deref(), &opts)?;
    let out = a.out.unwrap_or_else(|| art.table_md.clone());
    if let Some(dir) = out.parent() {
        ensure_dir(dir)?;
    }
    emit_report(&table, ReportFormat::for_path(&out), &out)?;
    print!("{}", meow_core::eval::render_markdown(&table));
    Ok(())
}

fn stats(art: &Artifacts, a: StatsArgs) -> Result<()> {
    let mut out = serde_json::Map::new();
    let records = a
        .records
        .or_else(|| art.records.exists().then(|| art.records.clone()));
    if let Some(p) = records {
        let recs = read_jsonl(&p)?;
        out.insert(
            "records".into(),
            serde_json::to_value(BatchStats::from_records(&recs, 0))?,
        );
    }
    let datasets = if a.dataset.is_empty() {
        [&art.d1, &art.d2]
            .into_iter()
            .filter(|p| p.exists())
            .cloned()
            .collect()
    } else {
        a.dataset
    };
    for p in datasets {
        let ds = Dataset::load(&p)?;
        out.insert(
            format!("{:?}", ds.which),
            serde_json::to_value(dataset_stats(&ds.graphs))?,
        );
    }
    if out.is_empty() {
        return Err(config_err(format!(
            "nothing to describe in {}",
            art.dir.display()
        )));
    }
    print_json(&out);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let art = cfg.artifacts();
    match cli.command {
        Command::Simulate(a) => simulate(&cfg, &art, a),
        Command::BuildGraphs(a) => build_graphs(&cfg, &art, a),
        Command::Split(a) => split(&cfg, &art, a),
        Command::Train(a) => train_cmd(&cfg, &art, a),
        Command::GradCheck(a) => grad_check_cmd(&cfg, a),
        Command::Judge(a) => judge_cmd(&cfg, &art, a),
        Command::Ablate(a) => ablate(&cfg, &art, a),
        Command::Stats(a) => stats(&art, a),
        Command::RunAll => {
            let report = run_pipeline(&cfg)?;
            let names =
                |v: &[meow_core::pipeline::Stage]| v.iter().map(|s| s.name()).collect::<Vec<_>>();
            print_json(
                &serde_json::json!({"ran": names(&report.ran), "cached": names(&report.cached)}),
            );
            Ok(())
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.downcast_ref::<ConfigError>().is_some()
        || matches!(
            e.downcast_ref::<PipelineError>(),
            Some(PipelineError::Config(_))
        )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 3 })
        }
    }
}
