//! Per-seat decision policies.
//!
//! A [`SeatPolicy`] is driven by the simulator through the six phases of a
//! game: initialization, identity inference, word description, description
//! analysis, statement and discussion, and vote. [`ScriptedPolicy`] is a
//! seeded stochastic model; [`LlmPolicy`] prompts a chat-completion
//! endpoint and falls back to the scripted model when replies cannot be used.

pub mod chat;
pub mod llm;
pub mod scripted;
pub mod vocab;

use serde::{Deserialize, Serialize};

use crate::game::{FallbackEvent, GameState, PolicyKind, Role, Seat, Tendency};
use crate::rng::SimRng;
use crate::sim::BroadcastEvent;

pub use chat::{
    client_from_config, ChatClient, ChatClientConfig, ChatError, ChatRole, ChatTurn, FnClient,
    HttpChatClient, MockChatClient, SamplingParams, Throttled, Transcript,
};
pub use llm::{extract_first_json, llm_phase, LlmError, LlmPolicy, PhaseAction, PromptTemplateSet};
pub use scripted::{
    scripted_describe, scripted_observe, scripted_statement, scripted_tendencies,
    scripted_tendencies_k, scripted_vote, BelievedRole, ClusterTag, ScriptedPolicy,
    ScriptedPolicyParams, SuspicionState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    GameInit,
    IdentityInference,
    WordDescription,
    DescriptionAnalysis,
    StatementDiscussion,
    Vote,
}

impl PhaseKind {
    pub const ALL: [PhaseKind; 6] = [
        PhaseKind::GameInit,
        PhaseKind::IdentityInference,
        PhaseKind::WordDescription,
        PhaseKind::DescriptionAnalysis,
        PhaseKind::StatementDiscussion,
        PhaseKind::Vote,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            PhaseKind::GameInit => "game_init",
            PhaseKind::IdentityInference => "identity_inference",
            PhaseKind::WordDescription => "word_description",
            PhaseKind::DescriptionAnalysis => "description_analysis",
            PhaseKind::StatementDiscussion => "statement_discussion",
            PhaseKind::Vote => "vote",
        }
    }
}

/// What a seat may look at when acting: the game state through its own seat.
#[derive(Clone, Copy)]
pub struct SeatView<'a> {
    pub seat: Seat,
    pub state: &'a GameState,
}

impl<'a> SeatView<'a> {
    pub fn new(state: &'a GameState, seat: Seat) -> Self {
        SeatView { seat, state }
    }

    pub fn word(&self) -> &'a str {
        &self.state.player(self.seat).word
    }

    /// Own role. Only the scripted model reads this (the spy knows it got the odd word).
    pub(crate) fn role(&self) -> Role {
        self.state.player(self.seat).role
    }

    pub fn round(&self) -> u8 {
        self.state.round_index()
    }

    pub fn alive_others(&self) -> Vec<Seat> {
        self.state
            .alive_seats()
            .into_iter()
            .filter(|s| *s != self.seat)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discussion {
    pub tendencies: Vec<Tendency>,
    pub statement: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("no legal {0} available")]
    NoLegalAction(String),
    #[error("prompt template: {0}")]
    Template(String),
}

/// One seat's behavior over a game. Calls arrive in engine order.
pub trait SeatPolicy: Send {
    fn kind(&self) -> PolicyKind;

    fn start_game(&mut self, _view: &SeatView<'_>) -> Result<(), AgentError> {
        Ok(())
    }

    /// Identity inference, before describing.
    fn begin_round(&mut self, _view: &SeatView<'_>, _rng: &mut SimRng) -> Result<(), AgentError> {
        Ok(())
    }

    /// A description token. The policy is responsible for legality.
    fn describe(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<String, AgentError>;

    /// Description analysis of another seat's token.
    fn observe_description(
        &mut self,
        view: &SeatView<'_>,
        describer: Seat,
        token: &str,
        cluster: &ClusterTag,
        rng: &mut SimRng,
    ) -> Result<(), AgentError>;

    /// Called once all alive seats have described.
    fn end_descriptions(
        &mut self,
        _view: &SeatView<'_>,
        _rng: &mut SimRng,
    ) -> Result<(), AgentError> {
        Ok(())
    }

    fn discuss(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<Discussion, AgentError>;

    fn vote(&mut self, view: &SeatView<'_>, rng: &mut SimRng) -> Result<Seat, AgentError>;

    /// Public information announced by the engine.
    fn broadcast(&mut self, _event: &BroadcastEvent) {}

    fn take_fallback_events(&mut self) -> Vec<FallbackEvent> {
        Vec::new()
    }

    /// Chat transcript, for policies that keep one.
    fn transcript(&self) -> Option<&Transcript> {
        None
    }
}
