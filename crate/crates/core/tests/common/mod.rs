//! Fixtures shared by the integration targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use meow_core::agents::{MockChatClient, ScriptedPolicyParams};
use meow_core::eval::{render_markdown, run_ablation, AblationOptions, AblationTable, RoundEval};
use meow_core::game::GameRecord;
use meow_core::gnn::{Checkpoint, ModelConfig};
use meow_core::graph::{
    build_datasets, make_splits, Dataset, DatasetKind, RelationScheme, SplitSet,
};
use meow_core::pipeline::split_seed;
use meow_core::sim::{run_batch, BatchSpec};

pub const MOCK_SCRIPT: [&str; 6] = [
    "Alice hedged twice. My final answer is Carol.",
    "@expert",
    "Hard to say, I'm not certain.",
    "@expert",
    "Daniel voted oddly. My final answer is Daniel.",
    "Keeping it. My final answer is Bob.",
];

pub fn records(n: u64, seed: u64) -> Vec<GameRecord> {
    run_batch(&BatchSpec::scripted(
        n,
        seed,
        ScriptedPolicyParams::default(),
    ))
    .expect("scripted batch")
    .records
}

pub fn splits_for(d: &Dataset, n_splits: usize, seed: u64) -> SplitSet {
    SplitSet {
        dataset_digest: d.digest(),
        splits: make_splits(d.len(), n_splits, 0.8, seed).expect("splits"),
    }
}

/// Untrained checkpoints with seeded random parameters, one per split.
pub fn random_checkpoints(
    kind: DatasetKind,
    splits: &SplitSet,
    seed: u64,
) -> BTreeMap<usize, Checkpoint> {
    let round = kind.rounds();
    splits
        .splits
        .iter()
        .map(|s| {
            let mut ck =
                Checkpoint::zeros(ModelConfig::for_dataset(kind, RelationScheme::RoundTagged));
            ck.params = ck.config.layout().init(split_seed(seed, round, s.split_id));
            ck.split_id = Some(s.split_id);
            ck.data_digest = splits.dataset_digest.clone();
            (s.split_id, ck)
        })
        .collect()
}

/// Ablation over both rounds with every method, mock judge, random experts.
pub fn mock_ablation() -> Result<AblationTable, String> {
    let recs = records(200, 31);
    let (d1, d2) = build_datasets(&recs, RelationScheme::RoundTagged, "golden");
    let (s1, s2) = (splits_for(&d1, 10, 1), splits_for(&d2, 10, 2));
    let (c1, c2) = (
        random_checkpoints(DatasetKind::D1, &s1, 5),
        random_checkpoints(DatasetKind::D2, &s2, 5),
    );
    let rounds = [
        RoundEval {
            round: 1,
            dataset: &d1,
            splits: &s1,
            checkpoints: &c1,
        },
        RoundEval {
            round: 2,
            dataset: &d2,
            splits: &s2,
            checkpoints: &c2,
        },
    ];
    let client = MockChatClient::new(MOCK_SCRIPT.iter().map(|s| s.to_string()).collect());
    run_ablation(&recs, &rounds, Some(&client), &AblationOptions::default())
        .map_err(|e| e.to_string())
}

/// Renders the mock ablation and checks it against the stored golden,
/// rewriting the golden instead when `UPDATE_GOLDEN=1`.
pub fn mock_ablation_markdown() -> Result<String, String> {
    let md = render_markdown(&mock_ablation()?);
    if std::env::var("UPDATE_GOLDEN").as_deref() == Ok("1") {
        let path =
            std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/ablation_table.md");
        std::fs::write(path, &md).map_err(|e| e.to_string())?;
    }
    Ok(md)
}

/// Per table: the header cells and the leading label cells of each body row
/// (method, plus round where the table has a round column).
pub fn layout_of(md: &str) -> Vec<(Vec<String>, Vec<Vec<String>>)> {
    let mut tables = Vec::new();
    let mut current: Option<(Vec<String>, Vec<Vec<String>>)> = None;
    for line in md.lines() {
        let line = line.trim();
        if !line.starts_with('|') {
            if let Some(t) = current.take() {
                tables.push(t);
            }
            continue;
        }
        let cells: Vec<String> = line
            .trim_matches('|')
            .split('|')
            .map(|c| c.trim().to_string())
            .collect();
        if cells
            .iter()
            .all(|c| c.chars().all(|ch| ch == '-' || ch == ':'))
        {
            continue;
        }
        match current.as_mut() {
            None => current = Some((cells, Vec::new())),
            Some((header, rows)) => {
                let keep = if header.get(1).is_some_and(|h| h == "Round") {
                    2
                } else {
                    1
                };
                rows.push(cells.into_iter().take(keep).collect());
            }
        }
    }
    tables.extend(current);
    tables
}
