use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{backward, dropout_mask, model_forward, Mode};
use super::{CompiledBatch, GnnError, ModelConfig};
use crate::game::{Seat, N_PLAYERS};
use crate::graph::HeteroGraph;
use crate::rng::{derive_seed, seeded, SimRng};

/// Central-difference step.
pub const EPS: f64 = 1e-5;
/// Gradients smaller than this in magnitude are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub trials: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// Trials whose graphs had at least one empty relation.
    pub trials_with_empty_relations: usize,
}

/// A random graph under the config's relations; each relation is empty with
/// probability 1/3, otherwise it gets 1 to 4 random non-loop edges.
pub fn random_graph(cfg: &ModelConfig, rng: &mut SimRng) -> HeteroGraph {
    let spy: usize = rng.random_range(0..N_PLAYERS);
    let edges = cfg
        .relation_keys
        .iter()
        .map(|k| {
            let n = if rng.random_bool(1.0 / 3.0) {
                0
            } else {
                rng.random_range(1..=4)
            };
            let list = (0..n)
                .map(|_| {
                    let s = rng.random_range(0..N_PLAYERS);
                    let d = (s + rng.random_range(1..N_PLAYERS)) % N_PLAYERS;
                    (Seat(s as u8), Seat(d as u8))
                })
                .collect();
            (*k, list)
        })
        .collect();
    HeteroGraph {
        game_index: 0,
        x: std::array::from_fn(|i| std::array::from_fn(|j| (i == j) as u8)),
        y: std::array::from_fn(|i| (i == spy) as u8),
        edges,
    }
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients with central finite differences over
/// `trials` random (graph batch, parameters, dropout mask) draws, checking
/// `coords` sampled coordinates per trial across every parameter block.
pub fn grad_check(
    cfg: &ModelConfig,
    trials: usize,
    coords: usize,
    seed: u64,
) -> Result<GradCheckReport, GnnError> {
    cfg.validate()?;
    let lay = cfg.layout();
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    for l in &lay.layers {
        blocks.push((l.w, l.a));
        blocks.push((l.a, l.a + l.stacked()));
    }
    blocks.push((lay.w_out, lay.b_out));
    blocks.push((lay.b_out, lay.total));

    let mut max_err: f64 = 0.0;
    let mut checked = 0;
    let mut with_empty = 0;
    for t in 0..trials {
        let mut rng = seeded(derive_seed(seed, t as u64));
        let n_graphs = rng.random_range(1..=3);
        let graphs: Vec<HeteroGraph> = (0..n_graphs).map(|_| random_graph(cfg, &mut rng)).collect();
        if graphs.iter().any(|g| g.edges.values().any(Vec::is_empty)) {
            with_empty += 1;
        }
        let refs: Vec<&HeteroGraph> = graphs.iter().collect();
        let batch = CompiledBatch::new(cfg, &refs)?;
        let mut params = lay.init(rng.random());
        // biases start at zero; give them a value so their path is exercised
        for v in &mut params[lay.b_out..] {
            *v = rng.random_range(-0.5..0.5);
        }
        let mask = dropout_mask(&mut rng, n_graphs * lay.concat_dim, cfg.dropout);
        let mode = Mode::Train { mask: &mask };
        let trace = model_forward(batch.clone(), &params, cfg, mode)?;
        let grad = backward(&trace, &params, cfg);

        let loss_at = |p: &[f64]| -> Result<f64, GnnError> {
            Ok(model_forward(batch.clone(), p, cfg, mode)?.loss())
        };
        for c in 0..coords {
            let (lo, hi) = blocks[c % blocks.len()];
            // prefer coordinates that actually influence the loss
            let nonzero: Vec<usize> = (lo..hi).filter(|&i| grad[i] != 0.0).collect();
            let i = match nonzero.choose(&mut rng) {
                Some(&i) if rng.random_bool(0.8) => i,
                _ => rng.random_range(lo..hi),
            };
            let orig = params[i];
            params[i] = orig + EPS;
            let up = loss_at(&params)?;
            params[i] = orig - EPS;
            let down = loss_at(&params)?;
            params[i] = orig;
            let numeric = (up - down) / (2.0 * EPS);
            let err = rel_error(grad[i], numeric);
            if err > max_err {
                log::debug!(
                    "trial {t} coord {i}: analytic {} numeric {numeric}",
                    grad[i]
                );
                max_err = err;
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        trials,
        coordinates: checked,
        max_rel_error: max_err,
        trials_with_empty_relations: with_empty,
    })
}
