use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of players at the table.
pub const N_PLAYERS: usize = 4;

const DEFAULT_NAMES: [&str; N_PLAYERS] = ["Alice", "Bob", "Carol", "Daniel"];

/// A position at the table, `0..N_PLAYERS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seat(pub u8);

impl Seat {
    pub fn new(index: usize) -> Option<Self> {
        (index < N_PLAYERS).then_some(Seat(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_valid(self) -> bool {
        self.index() < N_PLAYERS
    }

    pub fn display_name(self) -> &'static str {
        DEFAULT_NAMES
            .get(self.index())
            .copied()
            .unwrap_or("Unknown")
    }

    /// Looks a seat up by its display name (exact, case-sensitive).
    pub fn from_name(name: &str) -> Option<Self> {
        DEFAULT_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| Seat(i as u8))
    }

    pub fn all() -> impl Iterator<Item = Seat> {
        (0..N_PLAYERS).map(|i| Seat(i as u8))
    }

    pub fn names() -> &'static [&'static str] {
        &DEFAULT_NAMES
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Folk,
    Spy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Folk,
    Spies,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordPair {
    pub folk_word: String,
    pub spy_word: String,
    #[serde(default)]
    pub category: String,
}

impl WordPair {
    pub fn new(folk_word: impl Into<String>, spy_word: impl Into<String>) -> Self {
        WordPair {
            folk_word: folk_word.into(),
            spy_word: spy_word.into(),
            category: String::new(),
        }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = category.into();
        self
    }

    pub fn is_valid(&self) -> bool {
        !self.folk_word.is_empty()
            && !self.spy_word.is_empty()
            && fold(&self.folk_word) != fold(&self.spy_word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub word_pair: WordPair,
    pub spy_seat: Seat,
    pub rng_seed: u64,
    pub speaking_order: Vec<Seat>,
}

impl GameConfig {
    /// Config with the identity speaking order.
    pub fn new(word_pair: WordPair, spy_seat: Seat, rng_seed: u64) -> Self {
        GameConfig {
            word_pair,
            spy_seat,
            rng_seed,
            speaking_order: Seat::all().collect(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.word_pair.is_valid() {
            return Err(format!(
                "word pair ({:?}, {:?}) must hold two distinct non-empty words",
                self.word_pair.folk_word, self.word_pair.spy_word
            ));
        }
        if !self.spy_seat.is_valid() {
            return Err(format!("spy seat {} out of range", self.spy_seat.0));
        }
        let mut seen = [false; N_PLAYERS];
        if self.speaking_order.len() != N_PLAYERS {
            return Err("speaking order must list every seat exactly once".into());
        }
        for seat in &self.speaking_order {
            if !seat.is_valid() || seen[seat.index()] {
                return Err("speaking order must list every seat exactly once".into());
            }
            seen[seat.index()] = true;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayerState {
    pub seat: Seat,
    pub role: Role,
    pub word: String,
    pub alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    For,
    Against,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tendency {
    #[serde(rename = "src")]
    pub source: Seat,
    #[serde(rename = "dst")]
    pub target: Seat,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vote {
    pub voter: Seat,
    pub target: Seat,
    /// Position in which the vote reached the referee within its round.
    pub arrival_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    #[serde(rename = "round")]
    pub round_index: u8,
    pub descriptions: BTreeMap<Seat, String>,
    pub statements: BTreeMap<Seat, String>,
    pub tendencies: Vec<Tendency>,
    pub votes: Vec<Vote>,
    pub eliminated: Seat,
    pub revealed_role: Role,
}

impl RoundRecord {
    /// Seats that took part in this round.
    pub fn participants(&self) -> Vec<Seat> {
        self.descriptions.keys().copied().collect()
    }

    /// Participants in the order they spoke, recovered from vote arrival ranks.
    pub fn speaking_order(&self) -> Vec<Seat> {
        let mut votes = self.votes.clone();
        votes.sort_by_key(|v| v.arrival_rank);
        votes.into_iter().map(|v| v.voter).collect()
    }
}

/// Case folding used by both description rules.
pub(crate) fn fold(s: &str) -> String {
    s.to_lowercase()
}
