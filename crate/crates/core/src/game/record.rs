use serde::{Deserialize, Serialize};

use super::types::{Role, RoundRecord, Seat, Winner, WordPair};

/// Which kind of agent produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Scripted,
    Chat,
}

/// A chat agent's reply could not be parsed and the scripted policy acted instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackEvent {
    pub round: u8,
    pub seat: Seat,
    pub phase: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub policy_kind: PolicyKind,
    #[serde(default)]
    pub fallback_events: Vec<FallbackEvent>,
}

/// Full transcript of one game, one JSONL line per record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub game_index: u64,
    pub seed: u64,
    pub folk_word: String,
    pub spy_word: String,
    pub spy_seat: Seat,
    pub winner: Winner,
    pub rounds: Vec<RoundRecord>,
    pub meta: RecordMeta,
}

impl GameRecord {
    pub fn word_pair(&self) -> WordPair {
        WordPair::new(self.folk_word.clone(), self.spy_word.clone())
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// The spy survived the first vote (the game belongs to the two-round universe).
    pub fn spy_survived_round1(&self) -> bool {
        self.rounds
            .first()
            .is_some_and(|r| r.eliminated != self.spy_seat)
    }

    /// Seats alive at the start of `round` (1-based).
    pub fn alive_at(&self, round: usize) -> Vec<Seat> {
        let gone: Vec<Seat> = self
            .rounds
            .iter()
            .take(round.saturating_sub(1))
            .map(|r| r.eliminated)
            .collect();
        Seat::all().filter(|s| !gone.contains(s)).collect()
    }

    /// Winner implied by the eliminations alone, provided the game ends
    /// exactly at its last recorded round.
    pub fn derived_winner(&self) -> Option<Winner> {
        let mut alive = Seat::all().count();
        for (i, r) in self.rounds.iter().enumerate() {
            alive -= 1;
            let outcome = if r.eliminated == self.spy_seat {
                Some(Winner::Folk)
            } else if alive == 2 {
                Some(Winner::Spies)
            } else {
                None
            };
            if outcome.is_some() {
                return outcome.filter(|_| i + 1 == self.rounds.len());
            }
        }
        None
    }

    /// Structural consistency of a record, as read back from disk.
    pub fn check(&self) -> Result<(), String> {
        if !self.spy_seat.is_valid() {
            return Err(format!("game {}: spy seat out of range", self.game_index));
        }
        if self.rounds.is_empty() {
            return Err(format!("game {}: no rounds", self.game_index));
        }
        for (i, r) in self.rounds.iter().enumerate() {
            if r.round_index as usize != i + 1 {
                return Err(format!("game {}: round numbering", self.game_index));
            }
            let expect = if r.eliminated == self.spy_seat {
                Role::Spy
            } else {
                Role::Folk
            };
            if r.revealed_role != expect {
                return Err(format!(
                    "game {}: revealed role of round {} does not match",
                    self.game_index,
                    i + 1
                ));
            }
        }
        if self.derived_winner() != Some(self.winner) {
            return Err(format!(
                "game {}: winner does not follow from eliminations",
                self.game_index
            ));
        }
        Ok(())
    }
}
