//! Accuracy and weighted-average F1, the multi-split ablation harness, and
//! report rendering.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{ChatClient, SamplingParams};
use crate::game::{GameRecord, Seat, N_PLAYERS};
use crate::gnn::Checkpoint;
use crate::graph::{Dataset, SplitSet};
use crate::judge::{judge, JudgeError, JudgeMethod, JudgeResult};
use crate::rng::derive_seed;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no predictions to score")]
    Empty,
    #[error("round {round}, split {split_id}: no checkpoint")]
    MissingCheckpoint { round: u8, split_id: usize },
    #[error("game {0} is in the dataset but not in the records")]
    MissingRecord(u64),
    #[error("round {round}, split {split_id}: {msg}")]
    Audit {
        round: u8,
        split_id: usize,
        msg: String,
    },
    #[error("round {round}: splits were made for dataset {expected}, got {found}")]
    DigestMismatch {
        round: u8,
        expected: String,
        found: String,
    },
    #[error("judging game {game_index}: {source}")]
    Judge {
        game_index: u64,
        #[source]
        source: JudgeError,
    },
    #[error("{path}: {msg}")]
    File { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub game_index: u64,
    pub predicted: Seat,
    pub truth: Seat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub method: JudgeMethod,
    pub round_scope: u8,
    pub pairs: Vec<Prediction>,
}

impl PredictionSet {
    pub fn from_pairs(method: JudgeMethod, round_scope: u8, pairs: &[(Seat, Seat)]) -> Self {
        PredictionSet {
            method,
            round_scope,
            pairs: pairs
                .iter()
                .enumerate()
                .map(|(i, &(predicted, truth))| Prediction {
                    game_index: i as u64,
                    predicted,
                    truth,
                })
                .collect(),
        }
    }
}

pub fn accuracy(set: &PredictionSet) -> Result<f64, EvalError> {
    if set.pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = set.pairs.iter().filter(|p| p.predicted == p.truth).count();
    Ok(hits as f64 / set.pairs.len() as f64)
}

/// Per-class F1 averaged with weights equal to true-class support.
pub fn weighted_average_f1(set: &PredictionSet) -> Result<f64, EvalError> {
    if set.pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut tp = [0usize; N_PLAYERS];
    let mut n_pred = [0usize; N_PLAYERS];
    let mut support = [0usize; N_PLAYERS];
    for p in &set.pairs {
        n_pred[p.predicted.index()] += 1;
        support[p.truth.index()] += 1;
        if p.predicted == p.truth {
            tp[p.truth.index()] += 1;
        }
    }
    let mut total = 0.0;
    for c in 0..N_PLAYERS {
        // F1 = 2tp / (predicted + actual); zero when the class never appears
        let denom = n_pred[c] + support[c];
        if denom > 0 && tp[c] > 0 {
            total += support[c] as f64 * (2.0 * tp[c] as f64 / denom as f64);
        }
    }
    Ok(total / set.pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggMode {
    /// Drop the best and worst splits by WA-F1 and average the rest.
    #[default]
    Median8,
    Mean10,
}

impl AggMode {
    pub fn key(self) -> &'static str {
        match self {
            AggMode::Median8 => "median8",
            AggMode::Mean10 => "mean10",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        match s.trim() {
            "median8" => Some(AggMode::Median8),
            "mean10" => Some(AggMode::Mean10),
            _ => None,
        }
    }

    /// Aggregates per-split `(accuracy, wa_f1)` scores. With fewer than
    /// three splits median8 has nothing to drop and falls back to the mean.
    pub fn aggregate(self, scores: &[(f64, f64)]) -> (f64, f64) {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        if self == AggMode::Median8 && scores.len() > 2 {
            order.sort_by(|&a, &b| scores[a].1.total_cmp(&scores[b].1).then(a.cmp(&b)));
            order = order[1..order.len() - 1].to_vec();
        }
        if order.is_empty() {
            return (0.0, 0.0);
        }
        // mean as offset from the first value, so identical scores come back exactly
        let n = order.len() as f64;
        let (a0, w0) = scores[order[0]];
        let acc = a0 + order.iter().map(|&i| scores[i].0 - a0).sum::<f64>() / n;
        let wa = w0 + order.iter().map(|&i| scores[i].1 - w0).sum::<f64>() / n;
        (acc, wa)
    }
}

/// Population standard deviation.
pub fn population_stdev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values[0] + values.iter().map(|v| v - values[0]).sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub round: u8,
    pub split_id: usize,
    pub method: JudgeMethod,
    pub accuracy: f64,
    pub wa_f1: f64,
    /// Games scored, by game index.
    pub evaluated: Vec<u64>,
}

/// Aggregated scores in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: JudgeMethod,
    pub round: u8,
    pub accuracy: f64,
    pub wa_f1: f64,
}

/// Standard deviation of WA-F1 across splits, as a fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdevRow {
    pub method: JudgeMethod,
    pub round_1_std: Option<f64>,
    pub round_2_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub agg_mode: AggMode,
    pub rows: Vec<TableRow>,
    pub stdev: Vec<StdevRow>,
    #[serde(default)]
    pub splits: Vec<SplitScore>,
}

/// Everything needed to evaluate one round scope.
#[derive(Debug, Clone, Copy)]
pub struct RoundEval<'a> {
    pub round: u8,
    pub dataset: &'a Dataset,
    pub splits: &'a SplitSet,
    /// Checkpoints by split id.
    pub checkpoints: &'a BTreeMap<usize, Checkpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOptions {
    pub methods: Vec<JudgeMethod>,
    pub agg_mode: AggMode,
    /// Seeds the resolution of uncertain answers.
    pub seed: u64,
    pub sampling: SamplingParams,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions {
            methods: JudgeMethod::ALL.to_vec(),
            agg_mode: AggMode::Median8,
            seed: 0,
            sampling: SamplingParams::default(),
        }
    }
}

/// Methods in table order, without duplicates.
pub fn table_order(methods: &[JudgeMethod]) -> Vec<JudgeMethod> {
    JudgeMethod::ALL
        .into_iter()
        .filter(|m| methods.contains(m))
        .collect()
}

fn audit(round: &RoundEval<'_>, split_id: usize) -> Result<Vec<u64>, EvalError> {
    let split = &round.splits.splits[split_id];
    let fail = |msg: String| EvalError::Audit {
        round: round.round,
        split_id: split.split_id,
        msg,
    };
    let n = round.dataset.len();
    if let Some(i) = split
        .train_indices
        .iter()
        .chain(&split.test_indices)
        .find(|&&i| i >= n)
    {
        return Err(fail(format!("index {i} is out of range for {n} graphs")));
    }
    let train: BTreeSet<u64> = split
        .train_indices
        .iter()
        .map(|&i| round.dataset.graphs[i].game_index)
        .collect();
    let test: Vec<u64> = split
        .test_indices
        .iter()
        .map(|&i| round.dataset.graphs[i].game_index)
        .collect();
    if let Some(g) = test.iter().find(|g| train.contains(g)) {
        return Err(fail(format!("game {g} is in both train and test")));
    }
    Ok(test)
}

fn resolution_seed(base: u64, method: JudgeMethod, round: u8, game_index: u64) -> u64 {
    let m = JudgeMethod::ALL
        .iter()
        .position(|x| *x == method)
        .unwrap_or(0) as u64;
    derive_seed(derive_seed(base, (m << 8) | round as u64), game_index)
}

/// Scores every method on every split's test games, per round scope.
///
/// Chain-of-thought answers do not depend on the split, so each game is
/// judged once per round for that method. Games are judged one at a time
/// so scripted mock clients see a fixed call order.
pub fn run_ablation(
    records: &[GameRecord],
    rounds: &[RoundEval<'_>],
    client: Option<&dyn ChatClient>,
    opts: &AblationOptions,
) -> Result<AblationTable, EvalError> {
    let by_index: HashMap<u64, &GameRecord> = records.iter().map(|r| (r.game_index, r)).collect();
    let methods = table_order(&opts.methods);
    let mut splits = Vec::new();
    for round in rounds {
        let found = round.dataset.digest();
        if round.splits.dataset_digest != found {
            return Err(EvalError::DigestMismatch {
                round: round.round,
                expected: round.splits.dataset_digest.clone(),
                found,
            });
        }
        let mut cot_cache: HashMap<u64, JudgeResult> = HashMap::new();
        for &method in &methods {
            for (pos, split) in round.splits.splits.iter().enumerate() {
                let evaluated = audit(round, pos)?;
                let ck = if method.needs_checkpoint() {
                    Some(round.checkpoints.get(&split.split_id).ok_or(
                        EvalError::MissingCheckpoint {
                            round: round.round,
                            split_id: split.split_id,
                        },
                    )?)
                } else {
                    None
                };
                let mut pairs = Vec::with_capacity(evaluated.len());
                for &gi in &evaluated {
                    let record = *by_index.get(&gi).ok_or(EvalError::MissingRecord(gi))?;
                    let seed = resolution_seed(opts.seed, method, round.round, gi);
                    let run = || {
                        judge(
                            client,
                            &opts.sampling,
                            method,
                            record,
                            round.round,
                            ck,
                            seed,
                        )
                        .map_err(|source| EvalError::Judge {
                            game_index: gi,
                            source,
                        })
                    };
                    let result = if method == JudgeMethod::Cot {
                        match cot_cache.get(&gi) {
                            Some(r) => r.clone(),
                            None => {
                                let r = run()?;
                                cot_cache.insert(gi, r.clone());
                                r
                            }
                        }
                    } else {
                        run()?
                    };
                    pairs.push(Prediction {
                        game_index: gi,
                        predicted: result.resolved(record),
                        truth: record.spy_seat,
                    });
                }
                let set = PredictionSet {
                    method,
                    round_scope: round.round,
                    pairs,
                };
                splits.push(SplitScore {
                    round: round.round,
                    split_id: split.split_id,
                    method,
                    accuracy: accuracy(&set)?,
                    wa_f1: weighted_average_f1(&set)?,
                    evaluated,
                });
            }
        }
    }
    Ok(summarize(opts.agg_mode, &methods, splits))
}

/// Builds the aggregated and stdev tables from per-split scores.
pub fn summarize(
    agg_mode: AggMode,
    methods: &[JudgeMethod],
    splits: Vec<SplitScore>,
) -> AblationTable {
    let methods = table_order(methods);
    let rounds: BTreeSet<u8> = splits.iter().map(|s| s.round).collect();
    let scores = |m: JudgeMethod, r: u8| -> Vec<(f64, f64)> {
        splits
            .iter()
            .filter(|s| s.method == m && s.round == r)
            .map(|s| (s.accuracy, s.wa_f1))
            .collect()
    };
    let mut rows = Vec::new();
    for &r in &rounds {
        for &m in &methods {
            let sc = scores(m, r);
            if sc.is_empty() {
                continue;
            }
            let (acc, wa) = agg_mode.aggregate(&sc);
            rows.push(TableRow {
                method: m,
                round: r,
                accuracy: 100.0 * acc,
                wa_f1: 100.0 * wa,
            });
        }
    }
    let std_of = |m, r| {
        let sc = scores(m, r);
        (!sc.is_empty()).then(|| population_stdev(&sc.iter().map(|s| s.1).collect::<Vec<_>>()))
    };
    let stdev = methods
        .iter()
        .map(|&m| StdevRow {
            method: m,
            round_1_std: std_of(m, 1),
            round_2_std: std_of(m, 2),
        })
        .collect();
    AblationTable {
        agg_mode,
        rows,
        stdev,
        splits,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl ReportFormat {
    /// Csv for a `.csv` path, markdown otherwise.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Markdown,
        }
    }
}

fn opt4(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub fn render_markdown(table: &AblationTable) -> String {
    let n_splits = table
        .splits
        .iter()
        .map(|s| (s.round, s.split_id))
        .collect::<BTreeSet<_>>()
        .iter()
        .filter(|(r, _)| table.rows.first().is_none_or(|row| row.round == *r))
        .count();
    let mut out = format!(
        "## Ablation on test sets ({}, {} splits)\n\n| Method | Round | Acc. | WA-F1 |\n| --- | --- | --- | --- |\n",
        table.agg_mode.key(),
        n_splits
    );
    for row in &table.rows {
        out.push_str(&format!(
            "| {} | {} | {:.2} | {:.2} |\n",
            row.method.label(),
            row.round,
            row.accuracy,
            row.wa_f1
        ));
    }
    out.push_str(
        "\n## Standard deviation of WA-F1\n\n| Method | Round 1 | Round 2 |\n| --- | --- | --- |\n",
    );
    for row in &table.stdev {
        out.push_str(&format!(
            "| {} | {} | {} |\n",
            row.method.label(),
            opt4(row.round_1_std),
            opt4(row.round_2_std)
        ));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    method: String,
    round: u8,
    acc: f64,
    wa_f1: f64,
    agg_mode: String,
}

const CSV_HEADER: [&str; 5] = ["method", "round", "acc", "wa_f1", "agg_mode"];

pub fn render_csv(table: &AblationTable) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for row in &table.rows {
        w.serialize(CsvRow {
            method: row.method.key().to_string(),
            round: row.round,
            acc: row.accuracy,
            wa_f1: row.wa_f1,
            agg_mode: table.agg_mode.key().to_string(),
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Reads a csv report back. The csv carries the aggregated rows only, so
/// the stdev table and per-split scores come back empty.
pub fn parse_csv(text: &str) -> Result<AblationTable, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut agg_mode = None;
    let mut rows = Vec::new();
    for rec in r.deserialize::<CsvRow>() {
        let rec = rec.map_err(|e| e.to_string())?;
        let mode =
            AggMode::from_key(&rec.agg_mode).ok_or(format!("bad agg_mode {}", rec.agg_mode))?;
        if agg_mode.is_some_and(|m| m != mode) {
            return Err("mixed aggregation modes".into());
        }
        agg_mode = Some(mode);
        rows.push(TableRow {
            method: JudgeMethod::from_key(&rec.method)
                .ok_or(format!("bad method {}", rec.method))?,
            round: rec.round,
            accuracy: rec.acc,
            wa_f1: rec.wa_f1,
        });
    }
    Ok(AblationTable {
        agg_mode: agg_mode.unwrap_or_default(),
        rows,
        stdev: Vec::new(),
        splits: Vec::new(),
    })
}

pub fn emit_report(
    table: &AblationTable,
    format: ReportFormat,
    path: &Path,
) -> Result<(), EvalError> {
    let text = match format {
        ReportFormat::Markdown => render_markdown(table),
        ReportFormat::Csv => render_csv(table),
    };
    std::fs::write(path, text).map_err(|e| EvalError::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pairs: &[(u8, u8)]) -> PredictionSet {
        let pairs: Vec<(Seat, Seat)> = pairs.iter().map(|&(p, t)| (Seat(p), Seat(t))).collect();
        PredictionSet::from_pairs(JudgeMethod::Expert, 1, &pairs)
    }

    #[test]
    fn metric_examples() {
        assert_eq!(accuracy(&set(&[(0, 0), (1, 1), (3, 3)])).unwrap(), 1.0);
        assert_eq!(accuracy(&set(&[(0, 1), (1, 2)])).unwrap(), 0.0);
        assert_eq!(
            accuracy(&set(&[(0, 0), (1, 1), (0, 2), (0, 3), (1, 0)])).unwrap(),
            0.4
        );
        assert_eq!(
            weighted_average_f1(&set(&[(0, 0), (2, 2), (3, 3)])).unwrap(),
            1.0
        );
        // labels (0,0,1,2), preds (0,1,1,3)
        let wa = weighted_average_f1(&set(&[(0, 0), (1, 0), (1, 1), (3, 2)])).unwrap();
        assert!((wa - 0.5).abs() < 1e-15);
        assert!(matches!(accuracy(&set(&[])), Err(EvalError::Empty)));
    }

    #[test]
    fn aggregation() {
        let same = vec![(0.3, 0.4); 10];
        assert_eq!(AggMode::Median8.aggregate(&same), (0.3, 0.4));
        let scores: Vec<(f64, f64)> = (0..10)
            .map(|i| (i as f64 / 10.0, i as f64 / 10.0))
            .collect();
        let (acc, wa) = AggMode::Median8.aggregate(&scores);
        assert!((acc - 0.45).abs() < 1e-12 && (wa - 0.45).abs() < 1e-12);
        // the dropped splits are chosen by WA-F1, not accuracy
        let skew = vec![(1.0, 0.0), (0.0, 0.5), (0.0, 1.0)];
        assert_eq!(AggMode::Median8.aggregate(&skew), (0.0, 0.5));
        assert!((AggMode::Mean10.aggregate(&skew).0 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(population_stdev(&[1.0, 3.0]), 1.0);
        assert_eq!(population_stdev(&[0.2; 10]), 0.0);
    }

    fn sample_table() -> AblationTable {
        let mut splits = Vec::new();
        for round in [1u8, 2] {
            for method in JudgeMethod::ALL {
                for split_id in 0..10 {
                    let v = 0.25 + 0.01 * split_id as f64 + 0.02 * round as f64;
                    splits.push(SplitScore {
                        round,
                        split_id,
                        method,
                        accuracy: v,
                        wa_f1: v - 0.005,
                        evaluated: vec![],
                    });
                }
            }
        }
        summarize(AggMode::Median8, &JudgeMethod::ALL, splits)
    }

    #[test]
    fn csv_round_trip() {
        let t = sample_table();
        let back = parse_csv(&render_csv(&t)).unwrap();
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.agg_mode, t.agg_mode);
        let empty = summarize(AggMode::Median8, &[], vec![]);
        assert_eq!(render_csv(&empty), "method,round,acc,wa_f1,agg_mode\n");
        assert!(parse_csv(&render_csv(&empty)).unwrap().rows.is_empty());
    }

    #[test]
    fn markdown_layout() {
        let md = render_markdown(&sample_table());
        let lines: Vec<&str> = md
            .lines()
            .filter(|l| l.starts_with("| ") && !l.starts_with("| ---"))
            .collect();
        assert_eq!(lines[0], "| Method | Round | Acc. | WA-F1 |");
        assert_eq!(lines[1], "| LLM w/ CoT | 1 | 31.50 | 31.00 |");
        assert_eq!(lines[4], "| LLM w/ CoT | 2 | 33.50 | 33.00 |");
        assert_eq!(lines[7], "| Method | Round 1 | Round 2 |");
        assert_eq!(lines[8], "| LLM w/ CoT | 0.0287 | 0.0287 |");
        assert!(md.contains("median8, 10 splits"));
    }
}
