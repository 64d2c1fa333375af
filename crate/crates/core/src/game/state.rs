use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::types::{
    fold, GameConfig, PlayerState, Role, RoundRecord, Seat, Tendency, Vote, Winner, N_PLAYERS,
};
use super::GameError;

/// Why a description token was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptionViolation {
    /// The token is the describer's own word.
    OwnWord,
    /// Someone already used the token earlier in the game.
    Reused,
}

/// Everything the alive seats produced during one round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundInputs {
    pub descriptions: BTreeMap<Seat, String>,
    pub statements: BTreeMap<Seat, String>,
    pub tendencies: Vec<Tendency>,
    pub votes: Vec<Vote>,
}

#[derive(Debug, Clone)]
pub struct GameState {
    config: GameConfig,
    players: Vec<PlayerState>,
    round_index: u8,
    used_descriptions: HashSet<String>,
    registered_this_round: BTreeMap<Seat, String>,
    rounds: Vec<RoundRecord>,
    winner: Option<Winner>,
}

impl GameState {
    /// Deals the words and seats every player.
    pub fn new_game(config: GameConfig) -> Result<Self, GameError> {
        config.validate().map_err(GameError::InvalidConfig)?;
        let players = Seat::all()
            .map(|seat| {
                let spy = seat == config.spy_seat;
                PlayerState {
                    seat,
                    role: if spy { Role::Spy } else { Role::Folk },
                    word: if spy {
                        config.word_pair.spy_word.clone()
                    } else {
                        config.word_pair.folk_word.clone()
                    },
                    alive: true,
                }
            })
            .collect();
        Ok(GameState {
            config,
            players,
            round_index: 1,
            used_descriptions: HashSet::new(),
            registered_this_round: BTreeMap::new(),
            rounds: Vec::new(),
            winner: None,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn player(&self, seat: Seat) -> &PlayerState {
        &self.players[seat.index()]
    }

    pub fn players(&self) -> &[PlayerState] {
        &self.players
    }

    pub fn round_index(&self) -> u8 {
        self.round_index
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn winner(&self) -> Option<Winner> {
        self.winner
    }

    pub fn is_terminal(&self) -> bool {
        self.winner.is_some()
    }

    pub fn is_alive(&self, seat: Seat) -> bool {
        seat.is_valid() && self.players[seat.index()].alive
    }

    pub fn alive_seats(&self) -> Vec<Seat> {
        self.players
            .iter()
            .filter(|p| p.alive)
            .map(|p| p.seat)
            .collect()
    }

    /// Alive seats in this round's speaking order: the configured order
    /// rotated left once per completed round.
    pub fn speaking_order(&self) -> Vec<Seat> {
        let order = &self.config.speaking_order;
        let shift = (self.round_index as usize - 1) % order.len();
        order[shift..]
            .iter()
            .chain(&order[..shift])
            .copied()
            .filter(|s| self.is_alive(*s))
            .collect()
    }

    /// Checks both description rules without registering the token.
    pub fn check_description(&self, seat: Seat, token: &str) -> Result<(), DescriptionViolation> {
        let folded = fold(token);
        if folded == fold(&self.player(seat).word) {
            return Err(DescriptionViolation::OwnWord);
        }
        if self.used_descriptions.contains(&folded) {
            return Err(DescriptionViolation::Reused);
        }
        Ok(())
    }

    /// Checks the description rules and, if the token is legal, registers it
    /// as `seat`'s description for the current round.
    pub fn validate_description(
        &mut self,
        seat: Seat,
        token: &str,
    ) -> Result<(), DescriptionViolation> {
        self.check_description(seat, token)?;
        self.used_descriptions.insert(fold(token));
        self.registered_this_round.insert(seat, token.to_string());
        Ok(())
    }

    /// Winner implied by the current alive set, if any.
    pub fn check_win(&self) -> Option<Winner> {
        let spy = self.config.spy_seat;
        if !self.is_alive(spy) {
            Some(Winner::Folk)
        } else if self.alive_seats().len() == 2 {
            Some(Winner::Spies)
        } else {
            None
        }
    }

    /// Runs description, discussion, and voting for the current round.
    pub fn advance(&mut self, inputs: RoundInputs) -> Result<RoundRecord, GameError> {
        if self.is_terminal() {
            return Err(GameError::GameOver);
        }
        let alive: BTreeSet<Seat> = self.alive_seats().into_iter().collect();
        self.check_inputs(&alive, &inputs)?;

        for (seat, token) in &inputs.descriptions {
            if self.registered_this_round.get(seat) == Some(token) {
                continue;
            }
            self.validate_description(*seat, token).map_err(|v| {
                GameError::ProtocolViolation(format!(
                    "illegal description {token:?} from {seat}: {v:?}"
                ))
            })?;
        }

        let eliminated = tally_votes(&inputs.votes)
            .ok_or_else(|| GameError::ProtocolViolation("no votes cast".into()))?;
        self.players[eliminated.index()].alive = false;
        let record = RoundRecord {
            round_index: self.round_index,
            descriptions: inputs.descriptions,
            statements: inputs.statements,
            tendencies: inputs.tendencies,
            votes: inputs.votes,
            eliminated,
            revealed_role: self.players[eliminated.index()].role,
        };
        self.rounds.push(record.clone());
        self.registered_this_round.clear();
        self.winner = self.check_win();
        if self.winner.is_none() {
            self.round_index += 1;
        }
        Ok(record)
    }

    fn check_inputs(&self, alive: &BTreeSet<Seat>, inputs: &RoundInputs) -> Result<(), GameError> {
        let violation = |msg: String| Err(GameError::ProtocolViolation(msg));

        let described: BTreeSet<Seat> = inputs.descriptions.keys().copied().collect();
        if &described != alive {
            return violation(format!(
                "round {}: descriptions from {:?}, expected {:?}",
                self.round_index, described, alive
            ));
        }
        let stated: BTreeSet<Seat> = inputs.statements.keys().copied().collect();
        if &stated != alive {
            return violation(format!(
                "round {}: statements from {:?}, expected {:?}",
                self.round_index, stated, alive
            ));
        }

        let mut seen = BTreeSet::new();
        for t in &inputs.tendencies {
            if !alive.contains(&t.source) || !alive.contains(&t.target) {
                return violation(format!("tendency {t:?} touches a seat that is not alive"));
            }
            if t.source == t.target {
                return violation(format!("tendency {t:?} targets its own source"));
            }
            if !seen.insert(*t) {
                return violation(format!("duplicate tendency {t:?}"));
            }
        }

        let mut voters = BTreeSet::new();
        let mut ranks = BTreeSet::new();
        for v in &inputs.votes {
            if !alive.contains(&v.voter) {
                return violation(format!("vote from {} who is not alive", v.voter));
            }
            if !alive.contains(&v.target) {
                return violation(format!("vote for {} who is not alive", v.target));
            }
            if v.voter == v.target {
                return violation(format!("{} voted for themselves", v.voter));
            }
            if !voters.insert(v.voter) {
                return violation(format!("{} voted twice", v.voter));
            }
            if !ranks.insert(v.arrival_rank) {
                return violation(format!("arrival rank {} repeated", v.arrival_rank));
            }
        }
        if &voters != alive {
            return violation(format!(
                "round {}: votes from {:?}, expected {:?}",
                self.round_index, voters, alive
            ));
        }
        Ok(())
    }
}

/// Seat eliminated by a vote: most votes wins; among tied seats, the one
/// whose first vote arrived earliest. `None` only for an empty ballot.
pub fn tally_votes(votes: &[Vote]) -> Option<Seat> {
    let mut counts = [0usize; N_PLAYERS];
    let mut first_rank = [u32::MAX; N_PLAYERS];
    for v in votes {
        let t = v.target.index();
        counts[t] += 1;
        first_rank[t] = first_rank[t].min(v.arrival_rank);
    }
    (0..N_PLAYERS)
        .filter(|&s| counts[s] > 0)
        .max_by(|&a, &b| {
            counts[a]
                .cmp(&counts[b])
                .then_with(|| first_rank[b].cmp(&first_rank[a]))
        })
        .map(|s| Seat(s as u8))
}
