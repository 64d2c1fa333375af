//! End-to-end runs: simulate, build graphs, split, train, ablate, report.
//!
//! Each stage records a digest of its inputs and of the files it wrote in
//! `pipeline_state.json`; a stage whose inputs are unchanged and whose
//! outputs still exist is skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{client_from_config, ChatClientConfig};
use crate::digest::{file_digest, json_digest};
use crate::eval::{
    emit_report, run_ablation, AblationOptions, AblationTable, AggMode, ReportFormat, RoundEval,
};
use crate::game::WordPair;
use crate::gnn::{train, Checkpoint, ModelConfig};
use crate::graph::{
    build_datasets, make_splits, Dataset, RelationScheme, SplitSet, MIN_SPLIT_SIZE,
};
use crate::judge::JudgeMethod;
use crate::rng::derive_seed;
use crate::sim::{
    failure_manifest_path, read_jsonl, run_batch, write_failures, write_jsonl, BatchSpec,
};

pub const STATE_FILE: &str = "pipeline_state.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Simulate,
    BuildGraphs,
    Split,
    Train,
    Ablate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Simulate,
        Stage::BuildGraphs,
        Stage::Split,
        Stage::Train,
        Stage::Ablate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::BuildGraphs => "build-graphs",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Ablate => "ablate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage} failed: {msg}")]
    Stage { stage: Stage, msg: String },
}

fn stage_err(stage: Stage) -> impl Fn(String) -> PipelineError {
    move |msg| PipelineError::Stage { stage, msg }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub n_splits: usize,
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            n_splits: 10,
            ratio: 0.8,
            seed: 0,
        }
    }
}

fn default_batch() -> BatchSpec {
    BatchSpec::scripted(261, 0, Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// JSON list of word pairs replacing `batch.word_pairs`.
    pub word_pairs: Option<PathBuf>,
    pub batch: BatchSpec,
    pub scheme: RelationScheme,
    /// Model settings; the defaults for the scheme when absent.
    pub round1: Option<ModelConfig>,
    pub round2: Option<ModelConfig>,
    pub splits: SplitParams,
    pub train_seed: u64,
    /// Judge endpoint. Needed by every method except `expert`.
    pub judge: Option<ChatClientConfig>,
    pub methods: Vec<JudgeMethod>,
    pub agg_mode: AggMode,
    pub ablation_seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            word_pairs: None,
            batch: default_batch(),
            scheme: RelationScheme::RoundTagged,
            round1: None,
            round2: None,
            splits: SplitParams::default(),
            train_seed: 0,
            judge: None,
            methods: vec![JudgeMethod::Expert],
            agg_mode: AggMode::Median8,
            ablation_seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn model(&self, round: u8) -> ModelConfig {
        let given = if round == 1 {
            &self.round1
        } else {
            &self.round2
        };
        given.clone().unwrap_or_else(|| {
            if round == 1 {
                ModelConfig::round1(self.scheme)
            } else {
                ModelConfig::round2(self.scheme)
            }
        })
    }

    /// The batch spec with the word-pair file applied.
    pub fn effective_batch(&self) -> Result<BatchSpec, PipelineError> {
        let mut batch = self.batch.clone();
        if let Some(path) = &self.word_pairs {
            let text = std::fs::read_to_string(path).map_err(|e| {
                PipelineError::Config(format!("word pairs {}: {e}", path.display()))
            })?;
            batch.word_pairs = serde_json::from_str::<Vec<WordPair>>(&text).map_err(|e| {
                PipelineError::Config(format!("word pairs {}: {e}", path.display()))
            })?;
        }
        Ok(batch)
    }

    /// Checks everything that can be checked before any stage runs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        self.effective_batch()?
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        for round in [1u8, 2] {
            let m = self.model(round);
            m.validate()
                .map_err(|e| PipelineError::Config(format!("round{round} model: {e}")))?;
            if m.relation_keys != self.scheme.keys(round) {
                return bad(format!(
                    "round{round} model relations {:?} do not match the {:?} scheme",
                    m.relation_keys, self.scheme
                ));
            }
        }
        if self.splits.n_splits == 0 {
            return bad("splits.n_splits must be at least 1".into());
        }
        if !(self.splits.ratio > 0.0 && self.splits.ratio < 1.0) {
            return bad(format!(
                "splits.ratio {} is not in (0, 1)",
                self.splits.ratio
            ));
        }
        if self.methods.is_empty() {
            return bad("methods is empty".into());
        }
        if self.methods.iter().any(|m| m.needs_client()) {
            let Some(judge) = &self.judge else {
                return bad("methods other than expert need a judge endpoint".into());
            };
            if let Some(p) = judge.endpoint.strip_prefix("mock:") {
                if !Path::new(p).is_file() {
                    return bad(format!("mock script {p} does not exist"));
                }
            } else if !judge.endpoint.starts_with("http://")
                && !judge.endpoint.starts_with("https://")
            {
                return bad(format!("unsupported judge endpoint {:?}", judge.endpoint));
            }
        }
        Ok(())
    }

    pub fn artifacts(&self) -> Artifacts {
        Artifacts::new(&self.out_dir)
    }
}

/// Where each stage writes.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub records: PathBuf,
    pub d1: PathBuf,
    pub d2: PathBuf,
    pub splits1: PathBuf,
    pub splits2: PathBuf,
    pub checkpoints: PathBuf,
    pub ablation: PathBuf,
    pub table_md: PathBuf,
    pub table_csv: PathBuf,
    pub state: PathBuf,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        let p = |f: &str| dir.join(f);
        Artifacts {
            dir: dir.to_path_buf(),
            records: p("records.jsonl"),
            d1: p("d1.json"),
            d2: p("d2.json"),
            splits1: p("splits_d1.json"),
            splits2: p("splits_d2.json"),
            checkpoints: p("checkpoints"),
            ablation: p("ablation.json"),
            table_md: p("table.md"),
            table_csv: p("table.csv"),
            state: p(STATE_FILE),
        }
    }

    pub fn dataset(&self, round: u8) -> &Path {
        if round == 1 {
            &self.d1
        } else {
            &self.d2
        }
    }

    pub fn splits(&self, round: u8) -> &Path {
        if round == 1 {
            &self.splits1
        } else {
            &self.splits2
        }
    }

    pub fn checkpoint(&self, round: u8, split_id: usize) -> PathBuf {
        self.checkpoints
            .join(format!("r{round}_split{split_id:02}.json"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageState {
    pub input_digest: String,
    /// Digest of every file written, by path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    /// Small facts later stages key on, such as dataset sizes.
    #[serde(default)]
    pub info: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub stages: BTreeMap<Stage, StageState>,
}

impl PipelineState {
    pub fn load(path: &Path) -> Self {
        std::fs::read_to_string(path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(
            path,
            serde_json::to_string_pretty(self).expect("state serializes"),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineReport {
    pub ran: Vec<Stage>,
    pub cached: Vec<Stage>,
}

fn digest_of(stage: Stage, path: &Path) -> Result<String, PipelineError> {
    file_digest(path).map_err(|e| PipelineError::Stage {
        stage,
        msg: format!("{}: {e}", path.display()),
    })
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    art: Artifacts,
    state: PipelineState,
    report: PipelineReport,
}

impl Runner<'_> {
    fn rel(&self, path: &Path) -> String {
        path.strip_prefix(&self.art.dir)
            .unwrap_or(path)
            .display()
            .to_string()
    }

    fn cached(&self, stage: Stage, input: &str) -> bool {
        self.state.stages.get(&stage).is_some_and(|s| {
            s.input_digest == input && s.outputs.keys().all(|f| self.art.dir.join(f).exists())
        })
    }

    fn finish(
        &mut self,
        stage: Stage,
        input: String,
        files: &[PathBuf],
        info: BTreeMap<String, u64>,
    ) -> Result<(), PipelineError> {
        let mut outputs = BTreeMap::new();
        for f in files {
            outputs.insert(self.rel(f), digest_of(stage, f)?);
        }
        self.state.stages.insert(
            stage,
            StageState {
                input_digest: input,
                outputs,
                info,
            },
        );
        self.state
            .save(&self.art.state)
            .map_err(|e| stage_err(stage)(format!("{}: {e}", self.art.state.display())))?;
        self.report.ran.push(stage);
        Ok(())
    }

    /// Recorded digest of an upstream output.
    fn recorded(&self, stage: Stage, path: &Path) -> Option<String> {
        self.state
            .stages
            .get(&stage)?
            .outputs
            .get(&self.rel(path))
            .cloned()
    }

    fn run(&mut self, stage: Stage) -> Result<(), PipelineError> {
        let input = self.input_digest(stage)?;
        if self.cached(stage, &input) {
            log::info!("{stage}: inputs unchanged, skipping");
            self.report.cached.push(stage);
            return Ok(());
        }
        log::info!("{stage}: running");
        let err = stage_err(stage);
        let cfg = self.cfg;
        let art = self.art.clone();
        match stage {
            Stage::Simulate => {
                let out = run_batch(&cfg.effective_batch()?).map_err(|e| err(e.to_string()))?;
                write_jsonl(&art.records, &out.records).map_err(|e| err(e.to_string()))?;
                let manifest = failure_manifest_path(&art.records);
                if out.failures.is_empty() {
                    let _ = std::fs::remove_file(&manifest);
                } else {
                    log::warn!(
                        "{} games failed; see {}",
                        out.failures.len(),
                        manifest.display()
                    );
                    write_failures(&manifest, &out.failures).map_err(|e| err(e.to_string()))?;
                }
                let info = BTreeMap::from([("games".to_string(), out.records.len() as u64)]);
                self.finish(stage, input, std::slice::from_ref(&art.records), info)
            }
            Stage::BuildGraphs => {
                let records = read_jsonl(&art.records).map_err(|e| err(e.to_string()))?;
                let source = digest_of(stage, &art.records)?;
                let (d1, d2) = build_datasets(&records, cfg.scheme, &source);
                d1.save(&art.d1).map_err(|e| err(e.to_string()))?;
                d2.save(&art.d2).map_err(|e| err(e.to_string()))?;
                let info = BTreeMap::from([
                    ("d1".to_string(), d1.len() as u64),
                    ("d2".to_string(), d2.len() as u64),
                ]);
                self.finish(stage, input, &[art.d1.clone(), art.d2.clone()], info)
            }
            Stage::Split => {
                let info = &self.state.stages[&Stage::BuildGraphs].info;
                let mut files = Vec::new();
                for round in [1u8, 2] {
                    let n = info[if round == 1 { "d1" } else { "d2" }] as usize;
                    let path = art.splits(round).to_path_buf();
                    if round == 2 && n < MIN_SPLIT_SIZE {
                        log::warn!(
                            "D2 has {n} graphs, fewer than {MIN_SPLIT_SIZE}; round 2 is skipped"
                        );
                        let _ = std::fs::remove_file(&path);
                        continue;
                    }
                    let splits =
                        make_splits(n, cfg.splits.n_splits, cfg.splits.ratio, cfg.splits.seed)
                            .map_err(|e| err(format!("D{round}: {e}")))?;
                    let set = SplitSet {
                        dataset_digest: self
                            .recorded(Stage::BuildGraphs, art.dataset(round))
                            .unwrap_or_default(),
                        splits,
                    };
                    set.save(&path).map_err(|e| err(e.to_string()))?;
                    files.push(path);
                }
                self.finish(stage, input, &files, BTreeMap::new())
            }
            Stage::Train => {
                std::fs::create_dir_all(&art.checkpoints)
                    .map_err(|e| err(format!("{}: {e}", art.checkpoints.display())))?;
                let mut files = Vec::new();
                for round in self.rounds() {
                    let (ds, splits, splits_digest) = load_round(stage, &art, round)?;
                    let model = cfg.model(round);
                    for split in &splits.splits {
                        let seed = split_seed(cfg.train_seed, round, split.split_id);
                        let (mut ck, log) = train(&ds.graphs, split, &model, seed)
                            .map_err(|e| err(format!("D{round} split {}: {e}", split.split_id)))?;
                        ck.data_digest = splits_digest.clone();
                        log::info!(
                            "round {round} split {}: fold {} kept, val loss {:.4}",
                            split.split_id,
                            log.chosen_fold,
                            ck.best_val_loss
                        );
                        let path = art.checkpoint(round, split.split_id);
                        ck.save(&path).map_err(|e| err(e.to_string()))?;
                        files.push(path);
                    }
                }
                self.finish(stage, input, &files, BTreeMap::new())
            }
            Stage::Ablate => {
                let records = read_jsonl(&art.records).map_err(|e| err(e.to_string()))?;
                let mut loaded = Vec::new();
                for round in self.rounds() {
                    let (ds, splits, splits_digest) = load_round(stage, &art, round)?;
                    let mut cks = BTreeMap::new();
                    for split in &splits.splits {
                        let path = art.checkpoint(round, split.split_id);
                        if !path.exists() {
                            continue;
                        }
                        let ck = Checkpoint::load(&path).map_err(|e| err(e.to_string()))?;
                        if ck.data_digest != splits_digest {
                            return Err(err(format!(
                                "{} was trained under different splits than {}",
                                path.display(),
                                art.splits(round).display()
                            )));
                        }
                        cks.insert(split.split_id, ck);
                    }
                    loaded.push((round, ds, splits, cks));
                }
                let rounds: Vec<RoundEval<'_>> = loaded
                    .iter()
                    .map(|(round, ds, splits, cks)| RoundEval {
                        round: *round,
                        dataset: ds,
                        splits,
                        checkpoints: cks,
                    })
                    .collect();
                let client = match (&cfg.judge, cfg.methods.iter().any(|m| m.needs_client())) {
                    (Some(j), true) => Some(client_from_config(j).map_err(|e| err(e.to_string()))?),
                    _ => None,
                };
                let opts = AblationOptions {
                    methods: cfg.methods.clone(),
                    agg_mode: cfg.agg_mode,
                    seed: cfg.ablation_seed,
                    sampling: cfg.judge.as_ref().map(|j| j.sampling()).unwrap_or_default(),
                };
                let table = run_ablation(&records, &rounds, client.as_deref(), &opts)
                    .map_err(|e| err(e.to_string()))?;
                std::fs::write(
                    &art.ablation,
                    serde_json::to_string_pretty(&table).expect("table serializes"),
                )
                .map_err(|e| err(format!("{}: {e}", art.ablation.display())))?;
                self.finish(
                    stage,
                    input,
                    std::slice::from_ref(&art.ablation),
                    BTreeMap::new(),
                )
            }
            Stage::Report => {
                let text = std::fs::read_to_string(&art.ablation)
                    .map_err(|e| err(format!("{}: {e}", art.ablation.display())))?;
                let table: AblationTable = serde_json::from_str(&text)
                    .map_err(|e| err(format!("{}: {e}", art.ablation.display())))?;
                emit_report(&table, ReportFormat::Markdown, &art.table_md)
                    .map_err(|e| err(e.to_string()))?;
                emit_report(&table, ReportFormat::Csv, &art.table_csv)
                    .map_err(|e| err(e.to_string()))?;
                self.finish(
                    stage,
                    input,
                    &[art.table_md.clone(), art.table_csv.clone()],
                    BTreeMap::new(),
                )
            }
        }
    }

    /// Rounds with splits on record.
    fn rounds(&self) -> Vec<u8> {
        let split = self.state.stages.get(&Stage::Split);
        [1u8, 2]
            .into_iter()
            .filter(|&r| {
                split.is_some_and(|s| s.outputs.contains_key(&self.rel(self.art.splits(r))))
            })
            .collect()
    }

    fn input_digest(&self, stage: Stage) -> Result<String, PipelineError> {
        let cfg = self.cfg;
        let need = |up: Stage| -> Result<&StageState, PipelineError> {
            self.state.stages.get(&up).ok_or_else(|| {
                stage_err(stage)(format!(
                    "stage {up} has not run in {}",
                    self.art.dir.display()
                ))
            })
        };
        let on_disk = |paths: Vec<PathBuf>| -> Result<Vec<String>, PipelineError> {
            paths.iter().map(|p| digest_of(stage, p)).collect()
        };
        let value = match stage {
            Stage::Simulate => {
                let mut batch = cfg.effective_batch()?;
                // scripted output does not depend on the worker count
                batch.workers = 1;
                serde_json::json!(["simulate", batch])
            }
            Stage::BuildGraphs => {
                need(Stage::Simulate)?;
                serde_json::json!([
                    "build-graphs",
                    on_disk(vec![self.art.records.clone()])?,
                    cfg.scheme
                ])
            }
            Stage::Split => {
                serde_json::json!(["split", need(Stage::BuildGraphs)?.outputs, cfg.splits])
            }
            Stage::Train => {
                need(Stage::Split)?;
                let mut files = Vec::new();
                for r in self.rounds() {
                    files.push(self.art.dataset(r).to_path_buf());
                    files.push(self.art.splits(r).to_path_buf());
                }
                serde_json::json!([
                    "train",
                    on_disk(files)?,
                    cfg.model(1).digest(),
                    cfg.model(2).digest(),
                    cfg.train_seed
                ])
            }
            Stage::Ablate => {
                let trained = need(Stage::Train)?;
                let mut files = vec![self.art.records.clone()];
                for r in self.rounds() {
                    files.push(self.art.dataset(r).to_path_buf());
                    files.push(self.art.splits(r).to_path_buf());
                }
                files.extend(trained.outputs.keys().map(|k| self.art.dir.join(k)));
                let script = match &cfg.judge {
                    Some(j) => match j.endpoint.strip_prefix("mock:") {
                        Some(p) if cfg.methods.iter().any(|m| m.needs_client()) => {
                            Some(digest_of(stage, Path::new(p))?)
                        }
                        _ => None,
                    },
                    None => None,
                };
                serde_json::json!([
                    "ablate",
                    on_disk(files)?,
                    cfg.judge,
                    script,
                    cfg.methods,
                    cfg.agg_mode,
                    cfg.ablation_seed
                ])
            }
            Stage::Report => {
                need(Stage::Ablate)?;
                serde_json::json!(["report", on_disk(vec![self.art.ablation.clone()])?])
            }
        };
        Ok(json_digest(&value))
    }
}

/// Training seed for one split of one round.
pub fn split_seed(train_seed: u64, round: u8, split_id: usize) -> u64 {
    derive_seed(derive_seed(train_seed, round as u64), split_id as u64)
}

/// Loads a dataset and its splits, checking that the splits were made for
/// exactly this dataset file.
fn load_round(
    stage: Stage,
    art: &Artifacts,
    round: u8,
) -> Result<(Dataset, SplitSet, String), PipelineError> {
    let err = stage_err(stage);
    let ds_path = art.dataset(round);
    let ds = Dataset::load(ds_path).map_err(|e| err(e.to_string()))?;
    let splits_path = art.splits(round);
    let splits = SplitSet::load(splits_path).map_err(|e| err(e.to_string()))?;
    let found = digest_of(stage, ds_path)?;
    if splits.dataset_digest != found {
        return Err(err(format!(
            "{} does not match the dataset {} was made for",
            ds_path.display(),
            splits_path.display()
        )));
    }
    let splits_digest = digest_of(stage, splits_path)?;
    Ok((ds, splits, splits_digest))
}

/// Runs `stages` in order, skipping those whose inputs are unchanged.
pub fn run_stages(cfg: &PipelineConfig, stages: &[Stage]) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    let art = cfg.artifacts();
    std::fs::create_dir_all(&art.dir)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", art.dir.display())))?;
    let mut runner = Runner {
        cfg,
        state: PipelineState::load(&art.state),
        art,
        report: PipelineReport::default(),
    };
    for &stage in stages {
        runner.run(stage)?;
    }
    Ok(runner.report)
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    run_stages(cfg, &Stage::ALL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> PipelineConfig {
        let mut m1 = ModelConfig::round1(RelationScheme::RoundTagged);
        m1.max_epochs = 3;
        let mut m2 = ModelConfig::round2(RelationScheme::RoundTagged);
        m2.max_epochs = 3;
        PipelineConfig {
            batch: BatchSpec::scripted(60, 3, Default::default()),
            round1: Some(m1),
            round2: Some(m2),
            splits: SplitParams {
                n_splits: 3,
                ..Default::default()
            },
            out_dir: dir.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn runs_caches_and_catches_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let first = run_pipeline(&cfg).unwrap();
        assert_eq!(first.ran, Stage::ALL.to_vec());
        let art = cfg.artifacts();
        for p in [
            &art.records,
            &art.d1,
            &art.d2,
            &art.table_md,
            &art.table_csv,
        ] {
            assert!(p.exists(), "{}", p.display());
        }
        assert!(art.checkpoint(1, 2).exists() && art.checkpoint(2, 2).exists());

        let again = run_pipeline(&cfg).unwrap();
        assert!(again.ran.is_empty());
        assert_eq!(again.cached, Stage::ALL.to_vec());

        std::fs::write(&art.d1, "{\"which\": \"D1\"").unwrap();
        let e = run_pipeline(&cfg).unwrap_err();
        match e {
            PipelineError::Stage { stage, msg } => {
                assert_eq!(stage, Stage::Train);
                assert!(msg.contains("d1.json"), "{msg}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn config_errors() {
        let mut cfg = PipelineConfig {
            methods: vec![JudgeMethod::Cot],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
        cfg.methods = vec![JudgeMethod::Expert];
        cfg.validate().unwrap();
        cfg.splits.ratio = 1.0;
        assert!(cfg.validate().is_err());
        cfg.splits.ratio = 0.8;
        cfg.scheme = RelationScheme::Merged;
        cfg.validate().unwrap();
        cfg.round1 = Some(ModelConfig::round1(RelationScheme::RoundTagged));
        assert!(
            cfg.validate().is_err(),
            "round-tagged models under a merged scheme"
        );
        let text = r#"{"batch": {"n_games": 5, "base_seed": 1}, "unknown_field": 3}"#;
        assert!(serde_json::from_str::<PipelineConfig>(text).is_err());
    }
}
