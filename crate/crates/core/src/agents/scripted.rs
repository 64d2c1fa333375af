//! Seeded stochastic stand-in for a generative agent.
//!
//! Every description carries a hidden cluster tag (the describer's word).
//! Folk observers run a noisy detector over those tags: a mismatching
//! description is flagged with probability `detect_rate`, a matching one
//! with probability `false_alarm`. The spy knows its role and, with
//! probability `deception`, fixes one folk as a deflection target.
//! Tendencies and votes follow the accumulated suspicion scores.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{bank_size, vocabulary};
use super::{AgentError, Discussion, SeatPolicy, SeatView};
use crate::game::{fold, Polarity, PolicyKind, Role, Seat, Tendency};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedPolicyParams {
    /// Chance a folk observer flags a description from the other cluster.
    pub detect_rate: f64,
    /// Chance a folk observer flags a description from its own cluster.
    pub false_alarm: f64,
    /// Chance the spy picks a folk to accuse throughout the game.
    pub deception: f64,
    /// Relative weights of emitting 1, 2, or 3 tendencies per round.
    pub tendency_weights: [f64; 3],
    pub vocab_size: usize,
}

impl Default for ScriptedPolicyParams {
    fn default() -> Self {
        ScriptedPolicyParams {
            detect_rate: 0.6,
            false_alarm: 0.25,
            deception: 0.5,
            tendency_weights: [0.2, 0.2, 0.6],
            vocab_size: 12,
        }
    }
}

impl ScriptedPolicyParams {
    pub fn new(detect_rate: f64, false_alarm: f64, deception: f64) -> Self {
        ScriptedPolicyParams {
            detect_rate,
            false_alarm,
            deception,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("detect_rate", self.detect_rate),
            ("false_alarm", self.false_alarm),
            ("deception", self.deception),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is not a probability"));
            }
        }
        if self
            .tendency_weights
            .iter()
            .any(|w| !(*w >= 0.0) || !w.is_finite())
            || self.tendency_weights.iter().sum::<f64>() <= 0.0
        {
            return Err("tendency_weights must be non-negative with a positive sum".into());
        }
        if self.vocab_size < 8 || self.vocab_size > bank_size() - 1 {
            return Err(format!(
                "vocab_size must lie in 8..={}, got {}",
                bank_size() - 1,
                self.vocab_size
            ));
        }
        Ok(())
    }

    /// Expected tendencies per player-round before capping by the number of targets.
    pub fn mean_tendencies(&self) -> f64 {
        let total: f64 = self.tendency_weights.iter().sum();
        self.tendency_weights
            .iter()
            .enumerate()
            .map(|(i, w)| (i + 1) as f64 * w / total)
            .sum()
    }
}

/// Hidden tag attached to a description: the describer's word. Observers
/// compare it with their own word; it is never written to a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTag(String);

impl ClusterTag {
    pub fn of_word(word: &str) -> Self {
        ClusterTag(fold(word))
    }

    pub fn matches(&self, word: &str) -> bool {
        self.0 == fold(word)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BelievedRole {
    Folk,
    Spy,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuspicionState {
    pub owner: Seat,
    pub scores: BTreeMap<Seat, f64>,
    pub believed_role: BelievedRole,
    /// Spy only: the folk it accuses. `None` until decided or after elimination.
    pub deflection: Option<Seat>,
    deflection_decided: bool,
}

impl SuspicionState {
    pub fn new(owner: Seat, others: impl IntoIterator<Item = Seat>) -> Self {
        SuspicionState {
            owner,
            scores: others
                .into_iter()
                .filter(|s| *s != owner)
                .map(|s| (s, 0.0))
                .collect(),
            believed_role: BelievedRole::Unknown,
            deflection: None,
            deflection_decided: false,
        }
    }

    /// Drops seats that are no longer alive.
    pub fn retain_alive(&mut self, alive: &[Seat]) {
        self.scores.retain(|s, _| alive.contains(s));
        if self.deflection.is_some_and(|d| !alive.contains(&d)) {
            self.deflection = None;
            self.deflection_decided = false;
        }
    }

    /// Other seats ordered by descending score, ties shuffled by `rng`.
    fn ranked(&self, rng: &mut SimRng) -> Vec<Seat> {
        let mut seats: Vec<Seat> = self.scores.keys().copied().collect();
        seats.shuffle(rng);
        seats.sort_by(|a, b| self.scores[b].total_cmp(&self.scores[a]));
        seats
    }
}

/// Picks a legal description from the seat's vocabulary: a uniform draw,
/// advanced to the next legal candidate if the draw is refused.
pub fn scripted_describe(
    view: &SeatView<'_>,
    params: &ScriptedPolicyParams,
    rng: &mut SimRng,
) -> (String, ClusterTag) {
    let word = view.word();
    let vocab = vocabulary(word, params.vocab_size);
    let start = rng.random_range(0..vocab.len());
    let token = (0..vocab.len())
        .map(|k| &vocab[(start + k) % vocab.len()])
        .find(|t| view.state.check_description(view.seat, t).is_ok())
        .cloned()
        // unreachable with vocab_size >= 8 and two rounds; keep the game moving anyway
        .unwrap_or_else(|| format!("{}-{}", vocab[start], view.state.round_index()));
    (token, ClusterTag::of_word(word))
}

/// Updates `observer`'s suspicion after `described` speaks.
pub fn scripted_observe(
    observer: &mut SuspicionState,
    observer_role: Role,
    observer_word: &str,
    described: Seat,
    cluster: &ClusterTag,
    params: &ScriptedPolicyParams,
    rng: &mut SimRng,
) {
    if described == observer.owner || !observer.scores.contains_key(&described) {
        return;
    }
    match observer_role {
        Role::Folk => {
            let p = if cluster.matches(observer_word) {
                params.false_alarm
            } else {
                params.detect_rate
            };
            if rng.random_bool(p) {
                *observer.scores.get_mut(&described).unwrap() += 1.0;
            }
        }
        Role::Spy => {
            observer.believed_role = BelievedRole::Spy;
            if !observer.deflection_decided {
                observer.deflection_decided = true;
                if rng.random_bool(params.deception) {
                    let folk: Vec<Seat> = observer.scores.keys().copied().collect();
                    observer.deflection = folk.choose(rng).copied();
                }
            }
            if observer.deflection == Some(described) {
                *observer.scores.get_mut(&described).unwrap() += 2.0;
            }
        }
    }
}

/// Folk identity inference: an observer that flagged most of the others
/// concludes it holds the odd word.
pub fn scripted_infer_identity(state: &mut SuspicionState, role: Role) {
    if role == Role::Spy {
        state.believed_role = BelievedRole::Spy;
        return;
    }
    let flagged = state.scores.values().filter(|s| **s > 0.0).count();
    state.believed_role = if flagged == 0 {
        BelievedRole::Unknown
    } else if 2 * flagged > state.scores.len() {
        BelievedRole::Spy
    } else {
        BelievedRole::Folk
    };
}

/// Draws how many tendencies to emit this round.
pub fn sample_tendency_count(params: &ScriptedPolicyParams, rng: &mut SimRng) -> usize {
    let dist = WeightedIndex::new(params.tendency_weights).expect("validated weights");
    dist.sample(rng) + 1
}

/// Against edges toward the most suspected seats, For edges toward the least.
pub fn scripted_tendencies_k(state: &SuspicionState, k: usize, rng: &mut SimRng) -> Vec<Tendency> {
    let ranked = state.ranked(rng);
    let k = k.min(ranked.len());
    let n_against = k.div_ceil(2);
    let n_for = k - n_against;
    let against = ranked
        .iter()
        .take(n_against)
        .map(|s| (*s, Polarity::Against));
    let trust = ranked.iter().rev().take(n_for).map(|s| (*s, Polarity::For));
    against
        .chain(trust)
        .map(|(target, polarity)| Tendency {
            source: state.owner,
            target,
            polarity,
        })
        .collect()
}

pub fn scripted_tendencies(
    state: &SuspicionState,
    params: &ScriptedPolicyParams,
    rng: &mut SimRng,
) -> Vec<Tendency> {
    let k = sample_tendency_count(params, rng);
    scripted_tendencies_k(state, k, rng)
}

/// Most suspected alive seat, ties broken uniformly.
pub fn scripted_vote(state: &SuspicionState, rng: &mut SimRng) -> Option<Seat> {
    state.ranked(rng).first().copied()
}

const FOR_PHRASES: &[&str] = &[
    "I trust {}.",
    "{} sounds consistent to me.",
    "I am for {}; that description fits.",
];
const AGAINST_PHRASES: &[&str] = &[
    "I am against {}.",
    "{} seems off to me.",
    "I doubt {}; that description does not quite fit.",
];

/// Statement text embodying `tendencies`.
pub fn scripted_statement(tendencies: &[Tendency], rng: &mut SimRng) -> String {
    if tendencies.is_empty() {
        return "I have no strong opinion yet.".to_string();
    }
    tendencies
        .iter()
        .map(|t| {
            let bank = match t.polarity {
                Polarity::For => FOR_PHRASES,
                Polarity::Against => AGAINST_PHRASES,
            };
            bank.choose(rng)
                .unwrap()
                .replace("{}", t.target.display_name())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Per-seat scripted agent.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    params: ScriptedPolicyParams,
    suspicion: Option<SuspicionState>,
}

impl ScriptedPolicy {
    pub fn new(params: ScriptedPolicyParams) -> Self {
        ScriptedPolicy {
            params,
            suspicion: None,
        }
    }

    pub fn params(&self) -> &ScriptedPolicyParams {
        &self.params
    }

    pub fn suspicion(&self) -> Option<&SuspicionState> {
        self.suspicion.as_ref()
    }

    fn state_mut(&mut self, view: &SeatView<'_>) -> &mut SuspicionState {
        let alive = view.state.alive_seats();
        let st = self
            .suspicion
            .get_or_insert_with(|| SuspicionState::new(view.seat, alive.iter().copied()));
        st.retain_alive(&alive);
        st
    }
}

impl SeatPolicy for ScriptedPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Scripted
    }

    fn begin_round(&mut self, view: &SeatView<'_>, _rng: &mut SimRng) -> Result<(), AgentError> {
        let role = view.role();
        scripted_infer_identity(self.state_mut(view), role);
        Ok(())
    }

    fn describe(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<String, AgentError> {
        Ok(scripted_describe(view, &self.params, rng).0)
    }

    fn observe_description(
        &mut self,
        view: &SeatView<'_>,
        describer: Seat,
        _token: &str,
        cluster: &ClusterTag,
        rng: &mut SimRng,
    ) -> Result<(), AgentError> {
        let role = view.role();
        let word = view.word().to_string();
        let params = self.params.clone();
        let st = self.state_mut(view);
        scripted_observe(st, role, &word, describer, cluster, &params, rng);
        Ok(())
    }

    fn discuss(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<Discussion, AgentError> {
        let params = self.params.clone();
        let st = self.state_mut(view).clone();
        let tendencies = scripted_tendencies(&st, &params, rng);
        let statement = scripted_statement(&tendencies, rng);
        Ok(Discussion {
            tendencies,
            statement,
        })
    }

    fn vote(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<Seat, AgentError> {
        let st = self.state_mut(view).clone();
        scripted_vote(&st, rng).ok_or_else(|| AgentError::NoLegalAction("vote".into()))
    }
}
