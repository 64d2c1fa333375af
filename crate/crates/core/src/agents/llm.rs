//! Chat-completion-backed player agent.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde_json::Value;

use super::chat::{ChatClient, ChatError, ChatTurn, SamplingParams, Transcript};
use super::scripted::{ClusterTag, ScriptedPolicy, ScriptedPolicyParams};
use super::{AgentError, Discussion, PhaseKind, SeatPolicy, SeatView};
use crate::game::{FallbackEvent, Polarity, PolicyKind, Seat, Tendency};
use crate::rng::SimRng;
use crate::sim::BroadcastEvent;

/// Re-prompts after the first unusable reply, before falling back.
pub const MAX_REPROMPTS: usize = 3;

pub const GAME_RULES: &str = "\
Rules of \"Find The Spy\": four players each receive a secret word. Three folk share the same word; \
the spy receives a different but related word. Nobody knows their own identity at the start. \
Each round, players take turns describing their word without saying it and without repeating any \
description used before; then they take turns stating which players they trust and doubt; then \
everyone votes, and the player with the most votes is eliminated (ties go to the player whose first \
vote arrived earliest). The folk win when the spy is eliminated; the spy wins when only two players remain.";

const PLACEHOLDERS: [&str; 6] = [
    "rules",
    "own_word",
    "history",
    "alive_players",
    "round",
    "player_name",
];

/// Values substituted into a phase template.
#[derive(Debug, Clone, Default)]
pub struct TemplateContext {
    pub rules: String,
    pub own_word: String,
    pub history: String,
    pub alive_players: String,
    pub round: u8,
    pub player_name: String,
}

impl TemplateContext {
    fn value(&self, key: &str) -> Option<String> {
        Some(match key {
            "rules" => self.rules.clone(),
            "own_word" => self.own_word.clone(),
            "history" => self.history.clone(),
            "alive_players" => self.alive_players.clone(),
            "round" => self.round.to_string(),
            "player_name" => self.player_name.clone(),
            _ => return None,
        })
    }
}

/// One template per phase, with `{placeholder}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplateSet {
    templates: BTreeMap<PhaseKind, String>,
}

impl Default for PromptTemplateSet {
    fn default() -> Self {
        let builtin = [
            (
                PhaseKind::GameInit,
                include_str!("../../prompts/game_init.txt"),
            ),
            (
                PhaseKind::IdentityInference,
                include_str!("../../prompts/identity_inference.txt"),
            ),
            (
                PhaseKind::WordDescription,
                include_str!("../../prompts/word_description.txt"),
            ),
            (
                PhaseKind::DescriptionAnalysis,
                include_str!("../../prompts/description_analysis.txt"),
            ),
            (
                PhaseKind::StatementDiscussion,
                include_str!("../../prompts/statement_discussion.txt"),
            ),
            (PhaseKind::Vote, include_str!("../../prompts/vote.txt")),
        ];
        PromptTemplateSet {
            templates: builtin
                .into_iter()
                .map(|(k, v)| (k, v.to_string()))
                .collect(),
        }
    }
}

impl PromptTemplateSet {
    /// Reads `<phase>.txt` for every phase from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, AgentError> {
        let mut templates = BTreeMap::new();
        for phase in PhaseKind::ALL {
            let path = dir.join(format!("{}.txt", phase.file_stem()));
            let text = std::fs::read_to_string(&path)
                .map_err(|e| AgentError::Template(format!("{}: {e}", path.display())))?;
            templates.insert(phase, text);
        }
        let set = PromptTemplateSet { templates };
        set.check()?;
        Ok(set)
    }

    /// Every `{identifier}` slot must be a known placeholder.
    pub fn check(&self) -> Result<(), AgentError> {
        let probe = TemplateContext::default();
        for phase in PhaseKind::ALL {
            self.render(phase, &probe)?;
        }
        Ok(())
    }

    pub fn render(&self, phase: PhaseKind, ctx: &TemplateContext) -> Result<String, AgentError> {
        let template = self
            .templates
            .get(&phase)
            .ok_or_else(|| AgentError::Template(format!("no template for {phase:?}")))?;
        render_template(template, ctx)
    }
}

/// Single-pass substitution of `{identifier}` slots. Braces that do not
/// enclose a bare identifier (JSON examples) are copied through.
fn render_template(template: &str, ctx: &TemplateContext) -> Result<String, AgentError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let ident_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c == '_'))
            .unwrap_or(after.len());
        if ident_len > 0 && after[ident_len..].starts_with('}') {
            let key = &after[..ident_len];
            let value = ctx.value(key).ok_or_else(|| {
                AgentError::Template(format!(
                    "unknown placeholder {{{key}}}; expected one of {PLACEHOLDERS:?}"
                ))
            })?;
            out.push_str(&value);
            rest = &after[ident_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// The first balanced `{…}` block of `text` that parses as a JSON object.
pub fn extract_first_json(text: &str) -> Option<serde_json::Map<String, Value>> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(off) = text[start..].find('{') {
        let open = start + off;
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        let mut close = None;
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let close = close?;
        if let Ok(Value::Object(map)) = serde_json::from_str(&text[open..=close]) {
            return Some(map);
        }
        start = open + 1;
    }
    None
}

/// A phase reply turned into an engine action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhaseAction {
    /// Free-text phases: the reply itself.
    Ack(String),
    Description(String),
    Tendencies {
        trust: Vec<Seat>,
        doubt: Vec<Seat>,
        statement: String,
    },
    Vote(Seat),
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error(transparent)]
    Transport(#[from] ChatError),
    #[error("no usable reply after {attempts} attempts: {reason}")]
    ParseExhausted { attempts: usize, reason: String },
    #[error("prompt template: {0}")]
    Template(String),
}

fn seat_named(name: &str) -> Option<Seat> {
    let name = name.trim().trim_matches('"');
    Seat::all().find(|s| s.display_name().eq_ignore_ascii_case(name))
}

fn seats_in(value: Option<&Value>) -> Result<Vec<Seat>, String> {
    let names: Vec<&str> = match value {
        None | Some(Value::Null) => vec![],
        Some(Value::String(s)) if s.trim().is_empty() => vec![],
        Some(Value::String(s)) => vec![s.as_str()],
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().ok_or_else(|| format!("{v} is not a name")))
            .collect::<Result<_, _>>()?,
        Some(other) => return Err(format!("{other} is not a name list")),
    };
    names
        .into_iter()
        .map(|n| seat_named(n).ok_or_else(|| format!("unknown player {n:?}")))
        .collect()
}

/// Parses the structured field a phase requires out of `reply`.
pub fn parse_phase_reply(phase: PhaseKind, reply: &str) -> Result<PhaseAction, String> {
    let json = || extract_first_json(reply).ok_or_else(|| "no JSON object found".to_string());
    match phase {
        PhaseKind::GameInit | PhaseKind::IdentityInference | PhaseKind::DescriptionAnalysis => {
            Ok(PhaseAction::Ack(reply.to_string()))
        }
        PhaseKind::WordDescription => {
            let obj = json()?;
            match obj.get("description") {
                Some(Value::String(s)) if !s.trim().is_empty() => {
                    Ok(PhaseAction::Description(s.trim().to_string()))
                }
                _ => Err("missing \"description\" string".into()),
            }
        }
        PhaseKind::StatementDiscussion => {
            let obj = json()?;
            if !obj.contains_key("for") && !obj.contains_key("against") {
                return Err("missing \"for\"/\"against\" lists".into());
            }
            let trust = seats_in(obj.get("for"))?;
            let doubt = seats_in(obj.get("against"))?;
            let statement = strip_json(reply);
            Ok(PhaseAction::Tendencies {
                trust,
                doubt,
                statement,
            })
        }
        PhaseKind::Vote => {
            let obj = json()?;
            match obj.get("vote").and_then(Value::as_str).and_then(seat_named) {
                Some(seat) => Ok(PhaseAction::Vote(seat)),
                None => Err("missing or unknown \"vote\" name".into()),
            }
        }
    }
}

/// The reply with its first JSON block removed.
fn strip_json(reply: &str) -> String {
    match (reply.find('{'), reply.rfind('}')) {
        (Some(a), Some(b)) if b > a => format!("{} {}", &reply[..a], &reply[b + 1..])
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" "),
        _ => reply.trim().to_string(),
    }
}

/// Runs one phase: renders the template, asks the client, and parses the
/// reply, re-prompting up to [`MAX_REPROMPTS`] times. `accept` applies
/// game legality on top of parsing.
pub fn llm_phase(
    client: &dyn ChatClient,
    sampling: &SamplingParams,
    templates: &PromptTemplateSet,
    phase: PhaseKind,
    ctx: &TemplateContext,
    transcript: &mut Transcript,
    accept: &dyn Fn(&PhaseAction) -> Result<(), String>,
) -> Result<PhaseAction, LlmError> {
    let prompt = templates
        .render(phase, ctx)
        .map_err(|e| LlmError::Template(e.to_string()))?;
    transcript.push_user(prompt);
    let mut reason = String::new();
    for attempt in 0..=MAX_REPROMPTS {
        if attempt > 0 {
            transcript.push_user(format!(
                "Your previous reply could not be used ({reason}). Reply again, following the required JSON format exactly."
            ));
        }
        let reply = client.complete(transcript.turns(), sampling)?;
        transcript.push(ChatTurn::assistant(reply.clone()))?;
        match parse_phase_reply(phase, &reply).and_then(|a| accept(&a).map(|_| a)) {
            Ok(action) => return Ok(action),
            Err(why) => reason = why,
        }
    }
    Err(LlmError::ParseExhausted {
        attempts: MAX_REPROMPTS + 1,
        reason,
    })
}

/// Player agent backed by a chat endpoint, with the scripted model as fallback.
pub struct LlmPolicy {
    client: Arc<dyn ChatClient>,
    templates: Arc<PromptTemplateSet>,
    sampling: SamplingParams,
    transcript: Transcript,
    history: Vec<String>,
    fallback: ScriptedPolicy,
    fallback_events: Vec<FallbackEvent>,
}

impl LlmPolicy {
    pub fn new(
        client: Arc<dyn ChatClient>,
        templates: Arc<PromptTemplateSet>,
        sampling: SamplingParams,
        fallback: ScriptedPolicyParams,
    ) -> Self {
        LlmPolicy {
            client,
            templates,
            sampling,
            transcript: Transcript::new(),
            history: Vec::new(),
            fallback: ScriptedPolicy::new(fallback),
            fallback_events: Vec::new(),
        }
    }

    fn context(&self, view: &SeatView<'_>) -> TemplateContext {
        TemplateContext {
            rules: GAME_RULES.to_string(),
            own_word: view.word().to_string(),
            history: if self.history.is_empty() {
                "(nothing yet)".to_string()
            } else {
                self.history.join("\n")
            },
            alive_players: view
                .state
                .alive_seats()
                .iter()
                .map(|s| s.display_name())
                .collect::<Vec<_>>()
                .join(", "),
            round: view.round(),
            player_name: view.seat.display_name().to_string(),
        }
    }

    fn run(
        &mut self,
        view: &SeatView<'_>,
        phase: PhaseKind,
        accept: &dyn Fn(&PhaseAction) -> Result<(), String>,
    ) -> Result<Option<PhaseAction>, AgentError> {
        let ctx = self.context(view);
        match llm_phase(
            self.client.as_ref(),
            &self.sampling,
            &self.templates,
            phase,
            &ctx,
            &mut self.transcript,
            accept,
        ) {
            Ok(action) => Ok(Some(action)),
            Err(LlmError::ParseExhausted { reason, .. }) => {
                log::info!(
                    "{} fell back to the scripted policy in {phase:?}: {reason}",
                    view.seat
                );
                self.fallback_events.push(FallbackEvent {
                    round: view.round(),
                    seat: view.seat,
                    phase: phase.file_stem().to_string(),
                    reason: format!("parse exhausted: {reason}"),
                });
                Ok(None)
            }
            Err(LlmError::Transport(e)) => Err(AgentError::Chat(e)),
            Err(LlmError::Template(e)) => Err(AgentError::Template(e)),
        }
    }
}

impl SeatPolicy for LlmPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Chat
    }

    fn start_game(&mut self, view: &SeatView<'_>) -> Result<(), AgentError> {
        self.run(view, PhaseKind::GameInit, &|_| Ok(()))?;
        Ok(())
    }

    fn begin_round(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<(), AgentError> {
        self.fallback.begin_round(view, rng)?;
        self.run(view, PhaseKind::IdentityInference, &|_| Ok(()))?;
        Ok(())
    }

    fn describe(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<String, AgentError> {
        let state = view.state;
        let seat = view.seat;
        let accept = move |a: &PhaseAction| match a {
            PhaseAction::Description(t) => state
                .check_description(seat, t)
                .map_err(|v| format!("description {t:?} is not allowed: {v:?}")),
            _ => Err("expected a description".into()),
        };
        match self.run(view, PhaseKind::WordDescription, &accept)? {
            Some(PhaseAction::Description(t)) => Ok(t),
            _ => self.fallback.describe(view, rng),
        }
    }

    fn observe_description(
        &mut self,
        view: &SeatView<'_>,
        describer: Seat,
        token: &str,
        cluster: &ClusterTag,
        rng: &mut SimRng,
    ) -> Result<(), AgentError> {
        self.fallback
            .observe_description(view, describer, token, cluster, rng)
    }

    fn end_descriptions(
        &mut self,
        view: &SeatView<'_>,
        _rng: &mut SimRng,
    ) -> Result<(), AgentError> {
        self.run(view, PhaseKind::DescriptionAnalysis, &|_| Ok(()))?;
        Ok(())
    }

    fn discuss(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<Discussion, AgentError> {
        let others = view.alive_others();
        let accept = move |a: &PhaseAction| match a {
            PhaseAction::Tendencies { trust, doubt, .. } => {
                if let Some(bad) = trust.iter().chain(doubt).find(|s| !others.contains(s)) {
                    return Err(format!("{bad} is not another player still in the game"));
                }
                if trust.iter().any(|s| doubt.contains(s)) {
                    return Err("a player cannot be both trusted and doubted".into());
                }
                Ok(())
            }
            _ => Err("expected tendencies".into()),
        };
        match self.run(view, PhaseKind::StatementDiscussion, &accept)? {
            Some(PhaseAction::Tendencies {
                trust,
                doubt,
                statement,
            }) => {
                let mut tendencies: Vec<Tendency> = Vec::new();
                let mk = |target, polarity| Tendency {
                    source: view.seat,
                    target,
                    polarity,
                };
                for s in doubt {
                    let t = mk(s, Polarity::Against);
                    if !tendencies.contains(&t) {
                        tendencies.push(t);
                    }
                }
                for s in trust {
                    let t = mk(s, Polarity::For);
                    if !tendencies.contains(&t) {
                        tendencies.push(t);
                    }
                }
                let statement = if statement.is_empty() {
                    super::scripted::scripted_statement(&tendencies, rng)
                } else {
                    statement
                };
                Ok(Discussion {
                    tendencies,
                    statement,
                })
            }
            _ => self.fallback.discuss(view, rng),
        }
    }

    fn vote(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<Seat, AgentError> {
        let others = view.alive_others();
        let accept = move |a: &PhaseAction| match a {
            PhaseAction::Vote(s) if others.contains(s) => Ok(()),
            PhaseAction::Vote(s) => Err(format!("{s} cannot receive your vote")),
            _ => Err("expected a vote".into()),
        };
        match self.run(view, PhaseKind::Vote, &accept)? {
            Some(PhaseAction::Vote(s)) => Ok(s),
            _ => self.fallback.vote(view, rng),
        }
    }

    fn broadcast(&mut self, event: &BroadcastEvent) {
        self.transcript.push_broadcast(&event.payload);
        self.history.push(event.payload.clone());
    }

    fn take_fallback_events(&mut self) -> Vec<FallbackEvent> {
        std::mem::take(&mut self.fallback_events)
    }

    fn transcript(&self) -> Option<&Transcript> {
        Some(&self.transcript)
    }
}
