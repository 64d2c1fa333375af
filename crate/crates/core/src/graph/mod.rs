//! Interaction graphs built from game records, the D1/D2 datasets, and the
//! random train/test splits used for evaluation.
//!
//! Each game becomes a four-node directed graph. Node features are seat
//! one-hots and the label marks the spy. Every trust, doubt, and vote turns
//! into one edge under a relation key; by default keys are tagged with the
//! round they came from (`for@1`, `vote@2`, ...).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::game::{GameRecord, Polarity, Seat, N_PLAYERS};
use crate::rng::stream;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("game {0} has a single round; a two-round graph needs the spy to survive round 1")]
    NotTwoRound(u64),
    #[error("rounds must be 1 or 2, got {0}")]
    BadRounds(u8),
    #[error("dataset has {0} graphs; splitting needs at least {1}")]
    TooSmall(usize, usize),
    #[error("split ratio {0} is outside (0, 1)")]
    BadRatio(f64),
    #[error("unknown relation key {0:?}")]
    BadKey(String),
    #[error("{path}: {msg}")]
    File { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    For,
    Against,
    Vote,
}

impl RelationKind {
    pub const ALL: [RelationKind; 3] =
        [RelationKind::For, RelationKind::Against, RelationKind::Vote];

    fn as_str(self) -> &'static str {
        match self {
            RelationKind::For => "for",
            RelationKind::Against => "against",
            RelationKind::Vote => "vote",
        }
    }
}

impl From<Polarity> for RelationKind {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::For => RelationKind::For,
            Polarity::Against => RelationKind::Against,
        }
    }
}

/// Edge type: interaction kind, optionally tagged with its round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationKey {
    pub round: Option<u8>,
    pub kind: RelationKind,
}

impl RelationKey {
    pub fn tagged(kind: RelationKind, round: u8) -> Self {
        RelationKey {
            kind,
            round: Some(round),
        }
    }

    pub fn merged(kind: RelationKind) -> Self {
        RelationKey { kind, round: None }
    }
}

impl fmt::Display for RelationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.round {
            Some(r) => write!(f, "{}@{r}", self.kind.as_str()),
            None => f.write_str(self.kind.as_str()),
        }
    }
}

impl FromStr for RelationKey {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::BadKey(s.to_string());
        let (kind, round) = match s.split_once('@') {
            Some((k, r)) => (k, Some(r.parse::<u8>().map_err(|_| bad())?)),
            None => (s, None),
        };
        let kind = RelationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == kind)
            .ok_or_else(bad)?;
        if matches!(round, Some(r) if r == 0) {
            return Err(bad());
        }
        Ok(RelationKey { kind, round })
    }
}

impl Serialize for RelationKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RelationKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationScheme {
    /// One key per kind and round: six keys for two rounds.
    #[default]
    RoundTagged,
    /// One key per kind; round-2 edges are unioned into round-1 ones.
    Merged,
}

impl RelationScheme {
    /// The relation keys a graph covering `rounds` rounds carries.
    pub fn keys(self, rounds: u8) -> Vec<RelationKey> {
        match self {
            RelationScheme::Merged => RelationKind::ALL
                .into_iter()
                .map(RelationKey::merged)
                .collect(),
            RelationScheme::RoundTagged => (1..=rounds)
                .flat_map(|r| {
                    RelationKind::ALL
                        .into_iter()
                        .map(move |k| RelationKey::tagged(k, r))
                })
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        }
    }

    fn key(self, kind: RelationKind, round: u8) -> RelationKey {
        match self {
            RelationScheme::RoundTagged => RelationKey::tagged(kind, round),
            RelationScheme::Merged => RelationKey::merged(kind),
        }
    }
}

pub type Edge = (Seat, Seat);

/// One game as a relation-typed directed graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeteroGraph {
    pub game_index: u64,
    /// Row `i` is the one-hot of seat `i`.
    pub x: [[u8; N_PLAYERS]; N_PLAYERS],
    /// One-hot of the spy seat.
    pub y: [u8; N_PLAYERS],
    pub edges: BTreeMap<RelationKey, Vec<Edge>>,
}

impl HeteroGraph {
    pub fn spy_seat(&self) -> Seat {
        Seat(
            self.y
                .iter()
                .position(|v| *v == 1)
                .expect("graph has a positive label") as u8,
        )
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    pub fn relation_keys(&self) -> Vec<RelationKey> {
        self.edges.keys().copied().collect()
    }

    /// Only the round-1 relations.
    pub fn round1_view(&self) -> HeteroGraph {
        HeteroGraph {
            edges: self
                .edges
                .iter()
                .filter(|(k, _)| k.round == Some(1))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            ..self.clone()
        }
    }

    pub fn check(&self) -> Result<(), String> {
        for (i, row) in self.x.iter().enumerate() {
            let expected: Vec<u8> = (0..N_PLAYERS).map(|j| (i == j) as u8).collect();
            if row[..] != expected[..] {
                return Err(format!("row {i} of x is not a seat one-hot"));
            }
        }
        if self.y.iter().filter(|v| **v == 1).count() != 1 || self.y.iter().any(|v| *v > 1) {
            return Err("y must have exactly one 1".into());
        }
        for (k, es) in &self.edges {
            if let Some((s, d)) = es
                .iter()
                .find(|(s, d)| !s.is_valid() || !d.is_valid() || s == d)
            {
                return Err(format!("{k} has a bad edge ({s}, {d})"));
            }
        }
        Ok(())
    }
}

fn one_hot(seat: Seat) -> [u8; N_PLAYERS] {
    let mut v = [0; N_PLAYERS];
    v[seat.index()] = 1;
    v
}

/// Turns the first `rounds` rounds of a game into a graph.
pub fn game_to_graph(
    record: &GameRecord,
    rounds: u8,
    scheme: RelationScheme,
) -> Result<HeteroGraph, GraphError> {
    if !(1..=2).contains(&rounds) {
        return Err(GraphError::BadRounds(rounds));
    }
    if record.rounds.len() < rounds as usize {
        return Err(GraphError::NotTwoRound(record.game_index));
    }
    let mut edges: BTreeMap<RelationKey, Vec<Edge>> = scheme
        .keys(rounds)
        .into_iter()
        .map(|k| (k, Vec::new()))
        .collect();
    let mut push = |key: RelationKey, e: Edge| {
        let list = edges.get_mut(&key).expect("key is in the scheme");
        if scheme == RelationScheme::RoundTagged || !list.contains(&e) {
            list.push(e);
        }
    };
    for round in &record.rounds[..rounds as usize] {
        let r = round.round_index;
        for t in &round.tendencies {
            push(scheme.key(t.polarity.into(), r), (t.source, t.target));
        }
        let mut votes = round.votes.clone();
        votes.sort_by_key(|v| v.arrival_rank);
        for v in votes {
            push(scheme.key(RelationKind::Vote, r), (v.voter, v.target));
        }
    }
    Ok(HeteroGraph {
        game_index: record.game_index,
        x: std::array::from_fn(|i| one_hot(Seat(i as u8))),
        y: one_hot(record.spy_seat),
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetKind {
    D1,
    D2,
}

impl DatasetKind {
    pub fn rounds(self) -> u8 {
        match self {
            DatasetKind::D1 => 1,
            DatasetKind::D2 => 2,
        }
    }
}

/// A game left out of the datasets, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub game_index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Digest of the record file or batch the graphs came from.
    pub source_digest: String,
    pub n_records: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub which: DatasetKind,
    pub scheme: RelationScheme,
    pub manifest: DatasetManifest,
    pub graphs: Vec<HeteroGraph>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn relation_keys(&self) -> Vec<RelationKey> {
        self.scheme.keys(self.which.rounds())
    }

    /// Digest of the saved form; equals the digest of the file `save` writes.
    pub fn digest(&self) -> String {
        crate::digest::json_digest(self)
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let text = serde_json::to_string(self).expect("dataset serializes");
        std::fs::write(path, text).map_err(|e| file_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path).map_err(|e| file_err(path, e))?;
        let ds: Dataset = serde_json::from_str(&text).map_err(|e| file_err(path, e))?;
        for g in &ds.graphs {
            g.check()
                .map_err(|m| file_err(path, format!("graph {}: {m}", g.game_index)))?;
        }
        Ok(ds)
    }
}

fn file_err(path: &Path, e: impl fmt::Display) -> GraphError {
    GraphError::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Why a record cannot produce a graph, if it cannot.
pub fn validity_problem(record: &GameRecord) -> Option<String> {
    if let Err(e) = record.check() {
        return Some(e);
    }
    for (r, round) in record.rounds.iter().enumerate() {
        let alive = record.alive_at(r + 1);
        let is_alive = |s: &Seat| alive.contains(s);
        for seat in &alive {
            if !round.descriptions.contains_key(seat) {
                return Some(format!("round {}: {seat} has no description", r + 1));
            }
            if round.votes.iter().filter(|v| v.voter == *seat).count() != 1 {
                return Some(format!("round {}: {seat} did not vote exactly once", r + 1));
            }
        }
        if let Some(t) = round
            .tendencies
            .iter()
            .find(|t| !is_alive(&t.source) || !is_alive(&t.target) || t.source == t.target)
        {
            return Some(format!("round {}: invalid tendency {t:?}", r + 1));
        }
        if let Some(v) = round
            .votes
            .iter()
            .find(|v| !is_alive(&v.voter) || !is_alive(&v.target) || v.voter == v.target)
        {
            return Some(format!("round {}: invalid vote {v:?}", r + 1));
        }
    }
    None
}

/// D1 holds the round-1 graph of every valid game; D2 the two-round graph
/// of every valid game where the spy survived round 1.
pub fn build_datasets(
    records: &[GameRecord],
    scheme: RelationScheme,
    source_digest: &str,
) -> (Dataset, Dataset) {
    let mut rejected = Vec::new();
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    for rec in records {
        if let Some(reason) = validity_problem(rec) {
            rejected.push(Rejection {
                game_index: rec.game_index,
                reason,
            });
            continue;
        }
        d1.push(game_to_graph(rec, 1, scheme).expect("valid games have a round"));
        if rec.spy_survived_round1() {
            d2.push(game_to_graph(rec, 2, scheme).expect("spy survived so a second round exists"));
        }
    }
    let manifest = DatasetManifest {
        source_digest: source_digest.to_string(),
        n_records: records.len(),
        rejected,
    };
    let mk = |which, graphs| Dataset {
        which,
        scheme,
        manifest: manifest.clone(),
        graphs,
    };
    (mk(DatasetKind::D1, d1), mk(DatasetKind::D2, d2))
}

pub const MIN_SPLIT_SIZE: usize = 10;

/// One random train/test partition of a dataset, by graph position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub split_id: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
}

/// Number of training items: ⌈ratio·n⌉, tolerant to float noise.
pub fn train_size(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// `n_splits` independent shuffles of `0..n`; each puts the first
/// ⌈ratio·n⌉ positions in train and the rest in test.
pub fn make_splits(
    n: usize,
    n_splits: usize,
    ratio: f64,
    seed: u64,
) -> Result<Vec<SplitConfig>, GraphError> {
    if n < MIN_SPLIT_SIZE {
        return Err(GraphError::TooSmall(n, MIN_SPLIT_SIZE));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(GraphError::BadRatio(ratio));
    }
    let n_train = train_size(n, ratio);
    Ok((0..n_splits)
        .map(|split_id| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut stream(seed, split_id as u64));
            let test_indices = idx.split_off(n_train);
            SplitConfig {
                split_id,
                train_indices: idx,
                test_indices,
                ratio,
                seed,
            }
        })
        .collect())
}

/// Splits tied to the dataset they index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSet {
    pub dataset_digest: String,
    pub splits: Vec<SplitConfig>,
}

impl SplitSet {
    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let text = serde_json::to_string_pretty(self).expect("splits serialize");
        std::fs::write(path, text).map_err(|e| file_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path).map_err(|e| file_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| file_err(path, e))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub graphs: usize,
    pub nodes: usize,
    pub edges: usize,
}

pub fn dataset_stats(graphs: &[HeteroGraph]) -> DatasetStats {
    DatasetStats {
        graphs: graphs.len(),
        nodes: graphs.len() * N_PLAYERS,
        edges: graphs.iter().map(HeteroGraph::edge_count).sum(),
    }
}
