//! Game orchestration: one game at a time with [`run_game`], or a seeded
//! batch with [`run_batch`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    client_from_config, AgentError, ChatClient, ChatClientConfig, ClusterTag, LlmPolicy,
    PromptTemplateSet, ScriptedPolicy, ScriptedPolicyParams, SeatPolicy, SeatView,
};
use crate::game::{
    GameConfig, GameError, GameRecord, GameState, Polarity, RecordMeta, RoundInputs, RoundRecord,
    Seat, Vote, Winner, WordPair, N_PLAYERS,
};
use crate::rng::{derive_seed, seeded, stream, SimRng};

mod words;

pub use words::default_word_pairs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BroadcastKind {
    Description,
    Statement,
    VoteResult,
    Elimination,
}

/// Public information announced to every seat still in the game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastEvent {
    pub kind: BroadcastKind,
    pub payload: String,
    pub round: u8,
}

/// What was known about a game when it failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialRecord {
    pub game_index: u64,
    pub seed: u64,
    pub spy_seat: Seat,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("game {}: {source}", partial.game_index)]
    Game {
        #[source]
        source: GameError,
        partial: Box<PartialRecord>,
    },
    #[error("game {}: {source}", partial.game_index)]
    Agent {
        #[source]
        source: AgentError,
        partial: Box<PartialRecord>,
    },
    #[error("invalid batch spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl SimError {
    pub fn partial(&self) -> Option<&PartialRecord> {
        match self {
            SimError::Game { partial, .. } | SimError::Agent { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// A finished game plus what the engine announced along the way.
pub struct GameRun {
    pub record: GameRecord,
    pub events: Vec<BroadcastEvent>,
    /// Chat transcripts by seat, for chat policies.
    pub transcripts: Vec<Option<crate::agents::Transcript>>,
}

fn announce(
    policies: &mut [Box<dyn SeatPolicy>],
    state: &GameState,
    events: &mut Vec<BroadcastEvent>,
    ev: BroadcastEvent,
    skip: Option<Seat>,
) {
    for seat in state.alive_seats() {
        if Some(seat) != skip {
            policies[seat.index()].broadcast(&ev);
        }
    }
    events.push(ev);
}

fn names(seats: &[Seat]) -> String {
    seats
        .iter()
        .map(|s| s.display_name())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Plays one game to completion. `policies[i]` acts for seat `i`; each seat
/// draws from its own random stream derived from the config seed.
pub fn run_game(
    config: GameConfig,
    game_index: u64,
    policies: &mut [Box<dyn SeatPolicy>],
) -> Result<GameRun, SimError> {
    assert_eq!(policies.len(), N_PLAYERS, "one policy per seat");
    let seed = config.rng_seed;
    let spy_seat = config.spy_seat;
    let kind = policies[0].kind();
    let mut state = GameState::new_game(config).map_err(|source| SimError::Game {
        source,
        partial: Box::new(PartialRecord {
            game_index,
            seed,
            spy_seat,
            rounds: vec![],
        }),
    })?;
    let mut rngs: Vec<SimRng> = (0..N_PLAYERS as u64).map(|i| stream(seed, i)).collect();
    let mut events = Vec::new();

    let result = play(&mut state, policies, &mut rngs, &mut events);
    let partial = || {
        Box::new(PartialRecord {
            game_index,
            seed,
            spy_seat,
            rounds: state.rounds().to_vec(),
        })
    };
    match result {
        Ok(()) => {}
        Err(PlayError::Game(source)) => {
            return Err(SimError::Game {
                source,
                partial: partial(),
            })
        }
        Err(PlayError::Agent(source)) => {
            return Err(SimError::Agent {
                source,
                partial: partial(),
            })
        }
    }

    let mut fallback_events: Vec<_> = policies
        .iter_mut()
        .flat_map(|p| p.take_fallback_events())
        .collect();
    fallback_events.sort_by_key(|e| (e.round, e.seat));
    let pair = &state.config().word_pair;
    let record = GameRecord {
        game_index,
        seed,
        folk_word: pair.folk_word.clone(),
        spy_word: pair.spy_word.clone(),
        spy_seat,
        winner: state.winner().expect("play runs to a terminal state"),
        rounds: state.rounds().to_vec(),
        meta: RecordMeta {
            policy_kind: kind,
            fallback_events,
        },
    };
    let transcripts = policies.iter().map(|p| p.transcript().cloned()).collect();
    Ok(GameRun {
        record,
        events,
        transcripts,
    })
}

enum PlayError {
    Game(GameError),
    Agent(AgentError),
}

impl From<GameError> for PlayError {
    fn from(e: GameError) -> Self {
        PlayError::Game(e)
    }
}

impl From<AgentError> for PlayError {
    fn from(e: AgentError) -> Self {
        PlayError::Agent(e)
    }
}

fn play(
    state: &mut GameState,
    policies: &mut [Box<dyn SeatPolicy>],
    rngs: &mut [SimRng],
    events: &mut Vec<BroadcastEvent>,
) -> Result<(), PlayError> {
    for seat in Seat::all() {
        policies[seat.index()].start_game(&SeatView::new(state, seat))?;
    }
    while !state.is_terminal() {
        let round = state.round_index();
        let order = state.speaking_order();
        for &seat in &order {
            policies[seat.index()]
                .begin_round(&SeatView::new(state, seat), &mut rngs[seat.index()])?;
        }

        let mut inputs = RoundInputs::default();
        for &seat in &order {
            let token = policies[seat.index()]
                .describe(&SeatView::new(state, seat), &mut rngs[seat.index()])?;
            state.validate_description(seat, &token).map_err(|v| {
                GameError::ProtocolViolation(format!("{seat} described with {token:?}: {v:?}"))
            })?;
            let cluster = ClusterTag::of_word(&state.player(seat).word);
            for &other in &order {
                if other != seat {
                    policies[other.index()].observe_description(
                        &SeatView::new(state, other),
                        seat,
                        &token,
                        &cluster,
                        &mut rngs[other.index()],
                    )?;
                }
            }
            let ev = BroadcastEvent {
                kind: BroadcastKind::Description,
                payload: format!("Round {round}: {seat} described their word as \"{token}\"."),
                round,
            };
            announce(policies, state, events, ev, Some(seat));
            inputs.descriptions.insert(seat, token);
        }
        for &seat in &order {
            policies[seat.index()]
                .end_descriptions(&SeatView::new(state, seat), &mut rngs[seat.index()])?;
        }

        for &seat in &order {
            let d = policies[seat.index()]
                .discuss(&SeatView::new(state, seat), &mut rngs[seat.index()])?;
            let pick = |pol| {
                d.tendencies
                    .iter()
                    .filter(|t| t.polarity == pol)
                    .map(|t| t.target)
                    .collect::<Vec<_>>()
            };
            let (trust, doubt) = (pick(Polarity::For), pick(Polarity::Against));
            let ev = BroadcastEvent {
                kind: BroadcastKind::Statement,
                payload: format!(
                    "Round {round}: {seat} said: \"{}\" (trusts: {}; doubts: {}).",
                    d.statement,
                    if trust.is_empty() {
                        "nobody".into()
                    } else {
                        names(&trust)
                    },
                    if doubt.is_empty() {
                        "nobody".into()
                    } else {
                        names(&doubt)
                    },
                ),
                round,
            };
            announce(policies, state, events, ev, Some(seat));
            inputs.statements.insert(seat, d.statement);
            inputs.tendencies.extend(d.tendencies);
        }

        for (rank, &seat) in order.iter().enumerate() {
            let target = policies[seat.index()]
                .vote(&SeatView::new(state, seat), &mut rngs[seat.index()])?;
            inputs.votes.push(Vote {
                voter: seat,
                target,
                arrival_rank: rank as u32,
            });
        }
        let tally = inputs
            .votes
            .iter()
            .map(|v| format!("{} -> {}", v.voter, v.target))
            .collect::<Vec<_>>()
            .join(", ");
        let ev = BroadcastEvent {
            kind: BroadcastKind::VoteResult,
            payload: format!("Round {round} votes: {tally}."),
            round,
        };
        announce(policies, state, events, ev, None);

        let rec = state.advance(inputs)?;
        let ev = BroadcastEvent {
            kind: BroadcastKind::Elimination,
            payload: format!("Round {round}: {} was eliminated.", rec.eliminated),
            round,
        };
        // the eliminated seat still hears its own elimination
        for seat in Seat::all() {
            if state.is_alive(seat) || seat == rec.eliminated {
                policies[seat.index()].broadcast(&ev);
            }
        }
        events.push(ev);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpyAssignment {
    /// Game `i` puts the spy in seat `i mod 4`.
    #[default]
    RoundRobin,
    SeededUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Scripted {
        #[serde(default)]
        params: ScriptedPolicyParams,
    },
    Chat {
        client: ChatClientConfig,
        /// Scripted model used when replies cannot be used.
        #[serde(default)]
        fallback: ScriptedPolicyParams,
        /// Template directory; the built-in templates when absent.
        #[serde(default)]
        prompts_dir: Option<PathBuf>,
    },
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::Scripted {
            params: ScriptedPolicyParams::default(),
        }
    }
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub n_games: u64,
    pub base_seed: u64,
    #[serde(default = "default_word_pairs")]
    pub word_pairs: Vec<WordPair>,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub spy_assignment: SpyAssignment,
    /// Games played concurrently. Scripted output does not depend on it.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl BatchSpec {
    pub fn scripted(n_games: u64, base_seed: u64, params: ScriptedPolicyParams) -> Self {
        BatchSpec {
            n_games,
            base_seed,
            word_pairs: default_word_pairs(),
            policy: PolicySpec::Scripted { params },
            spy_assignment: SpyAssignment::RoundRobin,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if self.n_games == 0 {
            return bad("n_games must be at least 1".into());
        }
        if self.word_pairs.is_empty() {
            return bad("word_pairs is empty".into());
        }
        if let Some(p) = self.word_pairs.iter().find(|p| !p.is_valid()) {
            return bad(format!("invalid word pair {p:?}"));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        let params = match &self.policy {
            PolicySpec::Scripted { params } => params,
            PolicySpec::Chat { fallback, .. } => fallback,
        };
        params.validate().map_err(SimError::InvalidSpec)
    }

    /// Seed, word pair, and spy seat of game `index`.
    pub fn game_config(&self, index: u64) -> GameConfig {
        let seed = derive_seed(self.base_seed, index);
        let pair = self.word_pairs[(index % self.word_pairs.len() as u64) as usize].clone();
        let spy = match self.spy_assignment {
            SpyAssignment::RoundRobin => Seat((index % N_PLAYERS as u64) as u8),
            SpyAssignment::SeededUniform => {
                Seat(seeded(derive_seed(seed, 0x5B7)).random_range(0..N_PLAYERS as u8))
            }
        };
        GameConfig::new(pair, spy, seed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub games: u64,
    pub failed: u64,
    pub folk_wins: u64,
    pub spy_wins: u64,
    pub two_round_games: u64,
    pub two_round_fraction: f64,
    pub fallback_events: u64,
}

impl BatchStats {
    pub fn from_records(records: &[GameRecord], failed: u64) -> Self {
        let games = records.len() as u64;
        let two = records.iter().filter(|r| r.rounds.len() == 2).count() as u64;
        BatchStats {
            games,
            failed,
            folk_wins: records.iter().filter(|r| r.winner == Winner::Folk).count() as u64,
            spy_wins: records.iter().filter(|r| r.winner == Winner::Spies).count() as u64,
            two_round_games: two,
            two_round_fraction: if games == 0 {
                0.0
            } else {
                two as f64 / games as f64
            },
            fallback_events: records
                .iter()
                .map(|r| r.meta.fallback_events.len() as u64)
                .sum(),
        }
    }
}

/// One game that could not be completed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub game_index: u64,
    pub error: String,
    pub partial: Option<PartialRecord>,
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    /// Completed games in game_index order.
    pub records: Vec<GameRecord>,
    pub failures: Vec<BatchFailure>,
    pub stats: BatchStats,
}

fn make_policies(
    spec: &BatchSpec,
    client: Option<&Arc<dyn ChatClient>>,
    templates: Option<&Arc<PromptTemplateSet>>,
) -> Vec<Box<dyn SeatPolicy>> {
    (0..N_PLAYERS)
        .map(|_| -> Box<dyn SeatPolicy> {
            match &spec.policy {
                PolicySpec::Scripted { params } => Box::new(ScriptedPolicy::new(params.clone())),
                PolicySpec::Chat {
                    client: cfg,
                    fallback,
                    ..
                } => Box::new(LlmPolicy::new(
                    client.expect("chat client built").clone(),
                    templates.expect("templates loaded").clone(),
                    cfg.sampling(),
                    fallback.clone(),
                )),
            }
        })
        .collect()
}

/// Plays every game of `spec`. Games that fail are listed in
/// `failures` and the rest of the batch still completes.
pub fn run_batch(spec: &BatchSpec) -> Result<BatchOutput, SimError> {
    run_batch_with_client(spec, None)
}

/// [`run_batch`] with an explicit chat client for chat policies, overriding
/// the endpoint in the spec.
pub fn run_batch_with_client(
    spec: &BatchSpec,
    client: Option<Arc<dyn ChatClient>>,
) -> Result<BatchOutput, SimError> {
    spec.validate()?;
    let (client, templates) = match &spec.policy {
        PolicySpec::Scripted { .. } => (None, None),
        PolicySpec::Chat {
            client: cfg,
            prompts_dir,
            ..
        } => {
            let client = match client {
                Some(c) => c,
                None => client_from_config(cfg)
                    .map_err(|e| SimError::InvalidSpec(format!("chat client: {e}")))?,
            };
            let templates = match prompts_dir {
                Some(dir) => PromptTemplateSet::load_dir(dir)
                    .map_err(|e| SimError::InvalidSpec(e.to_string()))?,
                None => PromptTemplateSet::default(),
            };
            (Some(client), Some(Arc::new(templates)))
        }
    };

    let play_one = |index: u64| -> Result<GameRecord, SimError> {
        let boxed = make_policies(spec, client.as_ref(), templates.as_ref());
        run_boxed(spec.game_config(index), index, boxed).map(|run| run.record)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| SimError::InvalidSpec(format!("worker pool: {e}")))?;
    let results: Vec<Result<GameRecord, SimError>> = pool.install(|| {
        use rayon::prelude::*;
        (0..spec.n_games).into_par_iter().map(play_one).collect()
    });

    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (index, res) in results.into_iter().enumerate() {
        match res {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("{e}");
                failures.push(BatchFailure {
                    game_index: index as u64,
                    error: e.to_string(),
                    partial: e.partial().cloned(),
                })
            }
        }
    }
    let stats = BatchStats::from_records(&records, failures.len() as u64);
    Ok(BatchOutput {
        records,
        failures,
        stats,
    })
}

/// [`run_game`] over owned policies.
pub fn run_boxed(
    config: GameConfig,
    game_index: u64,
    mut policies: Vec<Box<dyn SeatPolicy>>,
) -> Result<GameRun, SimError> {
    run_game(config, game_index, &mut policies)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one compact JSON object per line, in the given order.
pub fn write_jsonl(path: &Path, records: &[GameRecord]) -> Result<(), SimError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<GameRecord>, SimError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| SimError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes the failure manifest next to a record file: `<records>.failures.json`.
pub fn failure_manifest_path(records_path: &Path) -> PathBuf {
    let mut s = records_path.as_os_str().to_owned();
    s.push(".failures.json");
    PathBuf::from(s)
}

pub fn write_failures(path: &Path, failures: &[BatchFailure]) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(failures).expect("failures serialize");
    std::fs::write(path, text).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::chat::{MockChatClient, CONFIRMATION};
    use crate::agents::ChatRole;
    use crate::game::PolicyKind;

    fn scripted(params: ScriptedPolicyParams) -> Vec<Box<dyn SeatPolicy>> {
        (0..4)
            .map(|_| Box::new(ScriptedPolicy::new(params.clone())) as Box<dyn SeatPolicy>)
            .collect()
    }

    fn play(config: GameConfig, params: ScriptedPolicyParams) -> GameRun {
        run_boxed(config, 0, scripted(params)).unwrap()
    }

    #[test]
    fn oracle_agents_catch_the_spy_in_round_one() {
        for seed in 0..50 {
            for spy in 0..4 {
                let cfg = GameConfig::new(WordPair::new("apple", "pineapple"), Seat(spy), seed);
                let run = play(cfg, ScriptedPolicyParams::new(1.0, 0.0, 0.0));
                assert_eq!(run.record.rounds.len(), 1);
                assert_eq!(run.record.winner, Winner::Folk);
                assert_eq!(run.record.rounds[0].eliminated, Seat(spy));
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = GameConfig::new(WordPair::new("tea", "coffee"), Seat(2), 99);
        let a = play(cfg.clone(), ScriptedPolicyParams::default());
        let b = play(cfg, ScriptedPolicyParams::default());
        assert_eq!(
            serde_json::to_string(&a.record).unwrap(),
            serde_json::to_string(&b.record).unwrap()
        );
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn each_alive_seat_acts_once_per_round() {
        for seed in 0..200 {
            let cfg = GameConfig::new(WordPair::new("tea", "coffee"), Seat((seed % 4) as u8), seed);
            let run = play(cfg, ScriptedPolicyParams::new(0.5, 0.5, 0.5));
            run.record.check().unwrap();
            for (r, round) in run.record.rounds.iter().enumerate() {
                let alive = N_PLAYERS - r;
                assert_eq!(round.descriptions.len(), alive);
                assert_eq!(round.statements.len(), alive);
                assert_eq!(round.votes.len(), alive);
            }
            let per_round = |k| run.events.iter().filter(|e| e.kind == k).count();
            let seat_rounds: usize = run.record.rounds.iter().map(|r| r.votes.len()).sum();
            assert_eq!(per_round(BroadcastKind::Description), seat_rounds);
            assert_eq!(per_round(BroadcastKind::Statement), seat_rounds);
            assert_eq!(
                per_round(BroadcastKind::VoteResult),
                run.record.rounds.len()
            );
            assert_eq!(
                per_round(BroadcastKind::Elimination),
                run.record.rounds.len()
            );
            assert!(run.transcripts.iter().all(Option::is_none));
        }
    }

    #[test]
    fn round_robin_spreads_spies() {
        let spec = BatchSpec::scripted(8, 3, ScriptedPolicyParams::default());
        let out = run_batch(&spec).unwrap();
        let mut count = [0; 4];
        for r in &out.records {
            count[r.spy_seat.index()] += 1;
        }
        assert_eq!(count, [2, 2, 2, 2]);
        assert_eq!(out.stats.games, 8);
        assert_eq!(out.stats.folk_wins + out.stats.spy_wins, 8);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let mut spec = BatchSpec::scripted(40, 11, ScriptedPolicyParams::default());
        spec.spy_assignment = SpyAssignment::SeededUniform;
        let one = run_batch(&spec).unwrap();
        spec.workers = 4;
        let four = run_batch(&spec).unwrap();
        assert_eq!(one.records, four.records);
    }

    #[test]
    fn games_are_independent() {
        let spec = BatchSpec::scripted(20, 5, ScriptedPolicyParams::default());
        let all = run_batch(&spec).unwrap().records;
        let mut shorter = spec.clone();
        shorter.n_games = 7;
        let some = run_batch(&shorter).unwrap().records;
        assert_eq!(&all[..7], &some[..]);
    }

    #[test]
    fn jsonl_round_trip() {
        let spec = BatchSpec::scripted(10, 1, ScriptedPolicyParams::default());
        let out = run_batch(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        write_jsonl(&path, &out.records).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), out.records);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 10);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let keys: Vec<_> = first.as_object().unwrap().keys().cloned().collect();
        assert_eq!(
            keys,
            [
                "folk_word",
                "game_index",
                "meta",
                "rounds",
                "seed",
                "spy_seat",
                "spy_word",
                "winner"
            ]
        );
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut spec = BatchSpec::scripted(0, 1, ScriptedPolicyParams::default());
        assert!(matches!(run_batch(&spec), Err(SimError::InvalidSpec(_))));
        spec.n_games = 3;
        spec.word_pairs.clear();
        assert!(matches!(run_batch(&spec), Err(SimError::InvalidSpec(_))));
    }

    #[test]
    fn chat_transcripts_confirm_every_broadcast() {
        let replies = vec![
            "Understood.".to_string(),
            "I am probably folk.".to_string(),
            r#"{"description": "@desc"}"#.to_string(),
        ];
        // the mock cycles; "@desc" is reused and gets refused, so fallbacks happen
        let client: Arc<dyn ChatClient> = Arc::new(MockChatClient::new(replies));
        let spec = BatchSpec {
            policy: PolicySpec::Chat {
                client: ChatClientConfig::default(),
                fallback: ScriptedPolicyParams::default(),
                prompts_dir: None,
            },
            ..BatchSpec::scripted(2, 8, ScriptedPolicyParams::default())
        };
        let boxed = make_policies(
            &spec,
            Some(&client),
            Some(&Arc::new(PromptTemplateSet::default())),
        );
        let run = run_boxed(spec.game_config(0), 0, boxed).unwrap();
        assert_eq!(run.record.meta.policy_kind, PolicyKind::Chat);
        assert!(!run.record.meta.fallback_events.is_empty());
        for t in run.transcripts.iter().map(|t| t.as_ref().unwrap()) {
            let turns = t.turns();
            let mut broadcasts = 0;
            for (i, turn) in turns.iter().enumerate() {
                if turn.role == ChatRole::User && turn.content.starts_with("(system)") {
                    broadcasts += 1;
                    assert_eq!(turns[i + 1].role, ChatRole::Assistant);
                    assert_eq!(turns[i + 1].content, CONFIRMATION);
                }
            }
            assert!(broadcasts > 0);
        }
        let scripted_run = play(spec.game_config(0), ScriptedPolicyParams::default());
        let text = serde_json::to_string(&scripted_run.record).unwrap();
        assert!(!text.contains(CONFIRMATION));
    }
}
