//! Judging a finished game: a chain-of-thought prompt over the public
//! broadcast, the expert model alone, or the chain-of-thought answer
//! revisited after the expert's observation is shown.

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::agents::llm::GAME_RULES;
use crate::agents::{ChatClient, ChatError, ChatTurn, SamplingParams, Transcript};
use crate::game::{GameRecord, Polarity, Seat};
use crate::gnn::{predict, Checkpoint, ExpertObservation, GnnError};
use crate::graph::{game_to_graph, GraphError, RelationScheme};
use crate::rng::seeded;

pub const JUDGE_SYSTEM: &str =
    "You are an experienced referee of the party game \"Find The Spy\". You read game logs and work out who the spy was.";

const COT_STEPS: [&str; 3] = [
    "Strategy review: recall how folk and spy usually play, and what a spy must do to blend in.",
    "Utterance analysis: go through every description, statement, and vote, and note which ones fit the majority word and which stand out.",
    "Motivation inference: for each player, ask why they said and voted what they did, and whose interests it served.",
];

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("{0:?} needs an expert checkpoint")]
    MissingCheckpoint(JudgeMethod),
    #[error("{0:?} needs a chat client")]
    MissingClient(JudgeMethod),
    #[error("round scope {scope} is out of range for game {game_index} with {rounds} rounds")]
    Scope {
        game_index: u64,
        scope: u8,
        rounds: usize,
    },
    #[error(transparent)]
    Transport(#[from] ChatError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] GnnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeMethod {
    Cot,
    Expert,
    CotEo,
}

impl JudgeMethod {
    pub const ALL: [JudgeMethod; 3] = [JudgeMethod::Cot, JudgeMethod::Expert, JudgeMethod::CotEo];

    pub fn label(self) -> &'static str {
        match self {
            JudgeMethod::Cot => "LLM w/ CoT",
            JudgeMethod::Expert => "Expert",
            JudgeMethod::CotEo => "LLM w/ CoT & EO",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            JudgeMethod::Cot => "cot",
            JudgeMethod::Expert => "expert",
            JudgeMethod::CotEo => "cot_eo",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.key() == s.trim())
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s.trim())
    }

    pub fn needs_client(self) -> bool {
        self != JudgeMethod::Expert
    }

    pub fn needs_checkpoint(self) -> bool {
        self != JudgeMethod::Cot
    }
}

fn check_scope(record: &GameRecord, scope: u8) -> Result<(), JudgeError> {
    if scope == 0 || scope as usize > record.rounds.len() {
        return Err(JudgeError::Scope {
            game_index: record.game_index,
            scope,
            rounds: record.rounds.len(),
        });
    }
    Ok(())
}

fn name_list(seats: &[Seat]) -> String {
    if seats.is_empty() {
        "nobody".to_string()
    } else {
        seats
            .iter()
            .map(|s| s.display_name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// The judge's initial prompt: rules, the word hint, the public broadcast of
/// rounds `1..=scope`, and the reasoning steps.
pub fn assemble_p_raw(record: &GameRecord, scope: u8) -> Result<String, JudgeError> {
    check_scope(record, scope)?;
    let mut words = [record.folk_word.as_str(), record.spy_word.as_str()];
    words.sort_unstable();
    let mut out = String::new();
    out.push_str(GAME_RULES);
    out.push_str("\n\n");
    out.push_str(&format!(
        "Word hint: the two secret words in this game were \"{}\" and \"{}\". You are not told which word the spy held.\n",
        words[0], words[1]
    ));
    out.push_str(&format!(
        "Players: {}.\n\nGame broadcast:\n",
        name_list(&Seat::all().collect::<Vec<_>>())
    ));
    for round in &record.rounds[..scope as usize] {
        let r = round.round_index;
        let order = round.speaking_order();
        out.push_str(&format!("\nRound {r}\nDescriptions:\n"));
        for seat in &order {
            if let Some(d) = round.descriptions.get(seat) {
                out.push_str(&format!("- {seat}: \"{d}\"\n"));
            }
        }
        out.push_str("Statements:\n");
        for seat in &order {
            let pick = |p| {
                round
                    .tendencies
                    .iter()
                    .filter(|t| t.source == *seat && t.polarity == p)
                    .map(|t| t.target)
                    .collect::<Vec<_>>()
            };
            let text = round.statements.get(seat).map(String::as_str).unwrap_or("");
            out.push_str(&format!(
                "- {seat}: \"{text}\" (trusts: {}; doubts: {})\n",
                name_list(&pick(Polarity::For)),
                name_list(&pick(Polarity::Against))
            ));
        }
        out.push_str("Votes:\n");
        let mut votes = round.votes.clone();
        votes.sort_by_key(|v| v.arrival_rank);
        for v in &votes {
            out.push_str(&format!("- {} voted for {}\n", v.voter, v.target));
        }
        out.push_str(&format!("{} was eliminated.\n", round.eliminated));
    }
    out.push_str("\nReason step by step:\n");
    for (i, step) in COT_STEPS.iter().enumerate() {
        out.push_str(&format!("{}. {step}\n", i + 1));
    }
    out.push_str(
        "Then make a final identity judgment naming exactly one player. End your reply with the sentence \"My final answer is <name>.\"",
    );
    Ok(out)
}

/// The expert's prediction for a game, through the same graph conversion
/// the datasets use.
pub fn expert_observe(
    record: &GameRecord,
    scope: u8,
    ck: &Checkpoint,
) -> Result<ExpertObservation, JudgeError> {
    check_scope(record, scope)?;
    let scheme = if ck.config.relation_keys.iter().all(|k| k.round.is_some()) {
        RelationScheme::RoundTagged
    } else {
        RelationScheme::Merged
    };
    let graph = game_to_graph(record, scope, scheme)?;
    Ok(predict(ck, &graph)?)
}

/// The expert observation as a prompt.
pub fn assemble_p_eo(obs: &ExpertObservation) -> String {
    let probs = Seat::all()
        .map(|s| format!("{} {:.2}", s.display_name(), obs.probs[s.index()]))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "According to the judgment of game experts, {} is likely to be the spy (probabilities: {probs}). Re-infer the game situation and state whether you adjust your final judgment.",
        obs.seat.display_name()
    )
}

fn last_name_in(text: &str) -> Option<Seat> {
    let lower = text.to_lowercase();
    let bytes = lower.as_bytes();
    let mut best: Option<(usize, Seat)> = None;
    for seat in Seat::all() {
        let name = seat.display_name().to_lowercase();
        for (at, _) in lower.match_indices(&name) {
            let before_ok = at == 0 || !bytes[at - 1].is_ascii_alphanumeric();
            let end = at + name.len();
            let after_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
            if before_ok && after_ok && best.is_none_or(|(b, _)| at > b) {
                best = Some((at, seat));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// The seat a reply names: the last player name in its final sentence,
/// else the last one anywhere, else `None` (uncertain).
pub fn parse_answer(reply: &str) -> Option<Seat> {
    let final_sentence = reply
        .split(['.', '!', '?', '\n'])
        .map(str::trim)
        .rfind(|s| !s.is_empty())
        .unwrap_or("");
    last_name_in(final_sentence).or_else(|| last_name_in(reply))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeResult {
    pub game_index: u64,
    pub method: JudgeMethod,
    pub round_scope: u8,
    /// Answer to the initial prompt; `None` when uncertain or not asked.
    pub y_raw: Option<Seat>,
    /// Final answer after the expert observation (CoT_EO), or the expert's
    /// pick (Expert); `None` when uncertain or not applicable.
    pub y_eo: Option<Seat>,
    pub rationale_raw: String,
    pub rationale_eo: String,
    pub expert: Option<ExpertObservation>,
    pub resolution_seed: u64,
    #[serde(default)]
    pub transcript: Option<Transcript>,
}

impl JudgeResult {
    /// The method's own answer before uncertainty is resolved.
    pub fn answer(&self) -> Option<Seat> {
        match self.method {
            JudgeMethod::Cot => self.y_raw,
            JudgeMethod::Expert | JudgeMethod::CotEo => self.y_eo,
        }
    }

    /// The method's answer, with "uncertain" replaced by a seeded uniform
    /// pick among the seats alive at the start of the last judged round.
    pub fn resolved(&self, record: &GameRecord) -> Seat {
        self.answer().unwrap_or_else(|| {
            let alive = record.alive_at(self.round_scope as usize);
            *alive
                .choose(&mut seeded(self.resolution_seed))
                .expect("someone is alive")
        })
    }
}

/// Judges one game with `method`.
#[allow(clippy::too_many_arguments)]
pub fn judge(
    client: Option<&dyn ChatClient>,
    sampling: &SamplingParams,
    method: JudgeMethod,
    record: &GameRecord,
    scope: u8,
    checkpoint: Option<&Checkpoint>,
    resolution_seed: u64,
) -> Result<JudgeResult, JudgeError> {
    check_scope(record, scope)?;
    let mut result = JudgeResult {
        game_index: record.game_index,
        method,
        round_scope: scope,
        y_raw: None,
        y_eo: None,
        rationale_raw: String::new(),
        rationale_eo: String::new(),
        expert: None,
        resolution_seed,
        transcript: None,
    };
    let expert = if method.needs_checkpoint() {
        let ck = checkpoint.ok_or(JudgeError::MissingCheckpoint(method))?;
        Some(expert_observe(record, scope, ck)?)
    } else {
        None
    };
    if method == JudgeMethod::Expert {
        result.y_eo = expert.as_ref().map(|o| o.seat);
        result.expert = expert;
        return Ok(result);
    }
    let client = client.ok_or(JudgeError::MissingClient(method))?;
    let mut t = Transcript::new();
    t.push(ChatTurn::system(JUDGE_SYSTEM))?;
    t.push_user(assemble_p_raw(record, scope)?);
    let reply = client.complete(t.turns(), sampling)?;
    t.push(ChatTurn::assistant(reply.clone()))?;
    result.y_raw = parse_answer(&reply);
    result.rationale_raw = reply;
    if let Some(obs) = expert {
        t.push_user(assemble_p_eo(&obs));
        let reply = client.complete(t.turns(), sampling)?;
        t.push(ChatTurn::assistant(reply.clone()))?;
        result.y_eo = parse_answer(&reply);
        result.rationale_eo = reply;
        result.expert = Some(obs);
    }
    result.transcript = Some(t);
    Ok(result)
}

/// Ground-truth leaks found in a judge prompt: field names of the record,
/// role reveals naming the spy, outcome announcements, and word-to-role
/// assignments.
pub fn leakage_findings(prompt: &str, record: &GameRecord) -> Vec<String> {
    let lower = prompt.to_lowercase();
    let spy = record.spy_seat.display_name().to_lowercase();
    let mut found = Vec::new();
    let mut fixed = vec![
        "spy_seat".to_string(),
        "spy_word".to_string(),
        "folk_word".to_string(),
        "revealed_role".to_string(),
        "cluster".to_string(),
        "winner".to_string(),
        "folk won".to_string(),
        "spy won".to_string(),
        "spies won".to_string(),
        "game over".to_string(),
        format!("{spy} is the spy"),
        format!("{spy} was the spy"),
        format!("the spy is {spy}"),
        format!("the spy was {spy}"),
        format!("{spy} (spy)"),
        format!("{spy} is a spy"),
    ];
    let spy_word = record.spy_word.to_lowercase();
    let folk_word = record.folk_word.to_lowercase();
    fixed.extend([
        format!("spy's word is \"{spy_word}\""),
        format!("spy word is \"{spy_word}\""),
        format!("spy held \"{spy_word}\""),
        format!("folk word is \"{folk_word}\""),
    ]);
    for pat in fixed {
        if lower.contains(&pat) {
            found.push(pat);
        }
    }
    found
}
