//! Expert model: two relation-typed GATv2 layers, a concatenating readout,
//! and a softmax over the four seats, trained with hand-written gradients.
//!
//! Parameters live in one flat `Vec<f64>`, in this order:
//!
//! 1. layer 1: `W` for every relation (each `H1·O1 × in_dim`, heads stacked
//!    row-wise), then `a` for every relation (each `H1·O1`);
//! 2. layer 2: the same with `H2·O2 × H1·O1` weights;
//! 3. readout `W_out` (`4 × 4·H2·O2`, row-major), then `b_out` (`4`).
//!
//! Relations follow the order of [`ModelConfig::relation_keys`].

mod gradcheck;
mod layer;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::digest::json_digest;
use crate::game::{Seat, N_PLAYERS};
use crate::graph::{DatasetKind, RelationKey, RelationScheme};

pub use gradcheck::{grad_check, random_graph, GradCheckReport};
pub use layer::{gemm, CompiledBatch};
pub use model::{
    backward, cross_entropy, dropout_mask, model_forward, predict_probs, ForwardTrace, LayerTrace,
    Mode, PROB_FLOOR,
};
pub use train::{
    predict, train, train_fold, AdamW, Checkpoint, EarlyStopping, EpochLog, FoldLog, TrainingLog,
    CHECKPOINT_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum GnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("graph relations {found:?} are not covered by the model's {expected:?}")]
    SchemaMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("training set has {0} graphs; at least {1} are needed")]
    TooSmall(usize, usize),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub heads1: usize,
    pub out1: usize,
    pub heads2: usize,
    pub out2: usize,
    pub aggr: Aggregation,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub patience: usize,
    pub relation_keys: Vec<RelationKey>,
    pub in_dim: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub folds: usize,
}

impl ModelConfig {
    /// Model for round-1 graphs.
    pub fn round1(scheme: RelationScheme) -> Self {
        ModelConfig {
            heads1: 6,
            out1: 32,
            heads2: 6,
            out2: 16,
            aggr: Aggregation::Sum,
            lr: 1e-4,
            weight_decay: 5e-4,
            dropout: 0.5,
            patience: 30,
            relation_keys: scheme.keys(1),
            in_dim: N_PLAYERS,
            batch_size: 32,
            max_epochs: 1000,
            folds: 4,
        }
    }

    /// Model for two-round graphs.
    pub fn round2(scheme: RelationScheme) -> Self {
        ModelConfig {
            out2: 18,
            patience: 50,
            relation_keys: scheme.keys(2),
            ..Self::round1(scheme)
        }
    }

    pub fn for_dataset(which: DatasetKind, scheme: RelationScheme) -> Self {
        match which {
            DatasetKind::D1 => Self::round1(scheme),
            DatasetKind::D2 => Self::round2(scheme),
        }
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |m: &str| Err(GnnError::InvalidConfig(m.to_string()));
        if [self.heads1, self.out1, self.heads2, self.out2, self.in_dim].contains(&0) {
            return bad("head counts and widths must be positive");
        }
        if self.relation_keys.is_empty() {
            return bad("no relation keys");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return bad("lr must be positive and weight_decay non-negative");
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.folds < 2 {
            return bad("patience, batch_size, max_epochs must be positive and folds at least 2");
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        json_digest(self)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }

    pub fn n_relations(&self) -> usize {
        self.relation_keys.len()
    }

    /// Width of the readout vector: four node rows of layer-2 output.
    pub fn concat_dim(&self) -> usize {
        N_PLAYERS * self.heads2 * self.out2
    }
}

/// Offsets of one layer's blocks in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub in_dim: usize,
    pub heads: usize,
    pub out: usize,
    pub relations: usize,
    /// Start of the stacked `W` blocks (`relations·heads·out × in_dim`).
    pub w: usize,
    /// Start of the stacked `a` vectors (`relations·heads·out`).
    pub a: usize,
}

impl LayerLayout {
    /// Per-node output width (heads concatenated).
    pub fn width(&self) -> usize {
        self.heads * self.out
    }

    /// Rows of the stacked weight matrix.
    pub fn stacked(&self) -> usize {
        self.relations * self.width()
    }

    fn end(&self) -> usize {
        self.a + self.stacked()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub layers: [LayerLayout; 2],
    pub w_out: usize,
    pub b_out: usize,
    pub concat_dim: usize,
    pub total: usize,
}

impl Layout {
    fn new(cfg: &ModelConfig) -> Self {
        let r = cfg.n_relations();
        let mk = |start: usize, in_dim, heads, out| {
            let w = start;
            let a = w + r * heads * out * in_dim;
            LayerLayout {
                in_dim,
                heads,
                out,
                relations: r,
                w,
                a,
            }
        };
        let l1 = mk(0, cfg.in_dim, cfg.heads1, cfg.out1);
        let l2 = mk(l1.end(), l1.width(), cfg.heads2, cfg.out2);
        let concat_dim = cfg.concat_dim();
        let w_out = l2.end();
        let b_out = w_out + N_PLAYERS * concat_dim;
        Layout {
            layers: [l1, l2],
            w_out,
            b_out,
            concat_dim,
            total: b_out + N_PLAYERS,
        }
    }

    /// Glorot-uniform weights and zero biases, from `seed`.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        use rand::Rng;
        let mut rng = crate::rng::seeded(seed);
        let mut p = vec![0.0; self.total];
        for l in &self.layers {
            let lim = (6.0 / (l.in_dim + l.out) as f64).sqrt();
            for v in &mut p[l.w..l.a] {
                *v = rng.random_range(-lim..lim);
            }
            let lim = (6.0 / (l.out + 1) as f64).sqrt();
            for v in &mut p[l.a..l.end()] {
                *v = rng.random_range(-lim..lim);
            }
        }
        let lim = (6.0 / (self.concat_dim + N_PLAYERS) as f64).sqrt();
        for v in &mut p[self.w_out..self.b_out] {
            *v = rng.random_range(-lim..lim);
        }
        p
    }
}

/// The expert's view of one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertObservation {
    pub probs: [f64; N_PLAYERS],
    /// Most probable seat; lowest index on ties.
    pub seat: Seat,
}

impl ExpertObservation {
    pub fn from_probs(probs: [f64; N_PLAYERS]) -> Self {
        ExpertObservation {
            probs,
            seat: Seat(argmax(&probs) as u8),
        }
    }
}

/// Index of the largest value; the first one on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
