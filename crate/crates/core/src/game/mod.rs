//! Rules engine for the four-player "Find The Spy" game.
//!
//! [`GameState`] is a small state machine: words are dealt by
//! [`GameState::new_game`], each round is applied with [`GameState::advance`],
//! and the game stops as soon as [`GameState::check_win`] names a winner.
//! Description legality and vote tallying are exposed separately so that
//! agents can check a move before committing to it.

mod record;
mod state;
mod types;

pub use record::{FallbackEvent, GameRecord, PolicyKind, RecordMeta};
pub use state::{tally_votes, DescriptionViolation, GameState, RoundInputs};
pub use types::{
    GameConfig, PlayerState, Polarity, Role, RoundRecord, Seat, Tendency, Vote, Winner, WordPair,
    N_PLAYERS,
};

pub(crate) use types::fold;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("game is already over")]
    GameOver,
}
