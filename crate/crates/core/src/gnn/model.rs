use rand::Rng;

use super::layer::{gemm, layer_backward, layer_forward};
use super::{CompiledBatch, GnnError, Layout, ModelConfig};
use crate::game::N_PLAYERS;
use crate::graph::HeteroGraph;
use crate::rng::SimRng;

pub use super::layer::LayerTrace;

/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    /// No dropout.
    Eval,
    /// Dropout with an explicit inverted mask over the readout
    /// (`n_graphs × concat_dim`, entries `0` or `1/(1-p)`).
    Train { mask: &'a [f64] },
}

/// Inverted-dropout mask: each entry is kept with probability `1-p`.
pub fn dropout_mask(rng: &mut SimRng, len: usize, p: f64) -> Vec<f64> {
    if p == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random_bool(1.0 - p) { keep } else { 0.0 })
        .collect()
}

/// Everything computed by [`model_forward`], kept for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub batch: CompiledBatch,
    pub layers: [LayerTrace; 2],
    /// Layer outputs, `N × H1·O1` and `N × H2·O2`.
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// ReLU of the concatenated node rows, before dropout (`B × C`).
    pub readout: Vec<f64>,
    /// Dropout mask used, if any.
    pub mask: Option<Vec<f64>>,
    pub logits: Vec<f64>,
    /// Softmax outputs, `B × 4`.
    pub probs: Vec<f64>,
}

impl ForwardTrace {
    pub fn graph_probs(&self, b: usize) -> [f64; N_PLAYERS] {
        std::array::from_fn(|k| self.probs[b * N_PLAYERS + k])
    }

    /// Mean cross-entropy against the batch labels.
    pub fn loss(&self) -> f64 {
        let b = self.batch.n_graphs;
        (0..b)
            .map(|g| cross_entropy(&self.graph_probs(g), self.batch.labels[g]))
            .sum::<f64>()
            / b as f64
    }
}

/// `-ln ŷ[label]` with ŷ clamped to [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

fn check_params(cfg: &ModelConfig, params: &[f64]) -> Result<Layout, GnnError> {
    let layout = cfg.layout();
    if params.len() != layout.total {
        return Err(GnnError::ShapeMismatch(format!(
            "{} parameters, config needs {}",
            params.len(),
            layout.total
        )));
    }
    Ok(layout)
}

/// Runs the model over a stacked batch.
pub fn model_forward(
    batch: CompiledBatch,
    params: &[f64],
    cfg: &ModelConfig,
    mode: Mode<'_>,
) -> Result<ForwardTrace, GnnError> {
    let lay = check_params(cfg, params)?;
    let b = batch.n_graphs;
    let c = lay.concat_dim;
    let (x1, t1) = layer_forward(&batch.x, &batch, params, &lay.layers[0]);
    let (x2, t2) = layer_forward(&x1, &batch, params, &lay.layers[1]);
    // the N × H2·O2 layer output is already B rows of the 4-node concatenation
    let readout: Vec<f64> = x2.iter().map(|v| v.max(0.0)).collect();
    let mask = match mode {
        Mode::Eval => None,
        Mode::Train { mask } => {
            if mask.len() != b * c {
                return Err(GnnError::ShapeMismatch(format!(
                    "dropout mask has {} entries, expected {}",
                    mask.len(),
                    b * c
                )));
            }
            Some(mask.to_vec())
        }
    };
    let dropped: Vec<f64> = match &mask {
        None => readout.clone(),
        Some(m) => readout.iter().zip(m).map(|(r, k)| r * k).collect(),
    };
    let mut logits = Vec::with_capacity(b * N_PLAYERS);
    for _ in 0..b {
        logits.extend_from_slice(&params[lay.b_out..lay.b_out + N_PLAYERS]);
    }
    gemm(
        b,
        c,
        N_PLAYERS,
        &dropped,
        (c, 1),
        &params[lay.w_out..lay.b_out],
        (1, c),
        1.0,
        &mut logits,
    );
    let mut probs = vec![0.0; b * N_PLAYERS];
    for g in 0..b {
        let row = &logits[g * N_PLAYERS..(g + 1) * N_PLAYERS];
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - mx).exp()).collect();
        let total: f64 = exps.iter().sum();
        for k in 0..N_PLAYERS {
            probs[g * N_PLAYERS + k] = exps[k] / total;
        }
    }
    Ok(ForwardTrace {
        batch,
        layers: [t1, t2],
        x1,
        x2,
        readout,
        mask,
        logits,
        probs,
    })
}

/// Gradient of the mean batch cross-entropy with respect to every parameter.
pub fn backward(trace: &ForwardTrace, params: &[f64], cfg: &ModelConfig) -> Vec<f64> {
    let lay = cfg.layout();
    let b = trace.batch.n_graphs;
    let c = lay.concat_dim;
    let mut grad = vec![0.0; lay.total];

    // softmax + cross-entropy; the floor only matters when ŷ underflows
    let mut dlogits = trace.probs.clone();
    for g in 0..b {
        let y = trace.batch.labels[g];
        if trace.probs[g * N_PLAYERS + y] > PROB_FLOOR {
            dlogits[g * N_PLAYERS + y] -= 1.0;
        } else {
            dlogits[g * N_PLAYERS..(g + 1) * N_PLAYERS].fill(0.0);
        }
    }
    for v in &mut dlogits {
        *v /= b as f64;
    }
    for g in 0..b {
        for k in 0..N_PLAYERS {
            grad[lay.b_out + k] += dlogits[g * N_PLAYERS + k];
        }
    }
    let dropped: Vec<f64> = match &trace.mask {
        None => trace.readout.clone(),
        Some(m) => trace.readout.iter().zip(m).map(|(r, k)| r * k).collect(),
    };
    // dW_out += dlogitsᵀ · dropped
    gemm(
        N_PLAYERS,
        b,
        c,
        &dlogits,
        (1, N_PLAYERS),
        &dropped,
        (c, 1),
        1.0,
        &mut grad[lay.w_out..lay.b_out],
    );
    // d(dropped) = dlogits · W_out
    let mut d_x2 = vec![0.0; b * c];
    gemm(
        b,
        N_PLAYERS,
        c,
        &dlogits,
        (N_PLAYERS, 1),
        &params[lay.w_out..lay.b_out],
        (c, 1),
        0.0,
        &mut d_x2,
    );
    for (i, d) in d_x2.iter_mut().enumerate() {
        let keep = trace.mask.as_ref().map_or(1.0, |m| m[i]);
        if trace.x2[i] <= 0.0 {
            *d = 0.0;
        } else {
            *d *= keep;
        }
    }
    let d_x1 = layer_backward(
        &trace.x1,
        &trace.batch,
        params,
        &lay.layers[1],
        &trace.layers[1],
        &d_x2,
        &mut grad,
        true,
    )
    .expect("dX requested");
    layer_backward(
        &trace.batch.x,
        &trace.batch,
        params,
        &lay.layers[0],
        &trace.layers[0],
        &d_x1,
        &mut grad,
        false,
    );
    grad
}

/// Eval-mode probabilities for each graph.
pub fn predict_probs(
    graphs: &[&HeteroGraph],
    params: &[f64],
    cfg: &ModelConfig,
) -> Result<Vec<[f64; N_PLAYERS]>, GnnError> {
    let batch = CompiledBatch::new(cfg, graphs)?;
    let t = model_forward(batch, params, cfg, Mode::Eval)?;
    Ok((0..graphs.len()).map(|g| t.graph_probs(g)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Seat;
    use crate::graph::{RelationKey, RelationKind, RelationScheme};
    use std::collections::BTreeMap;

    fn graph(spy: u8, edges: &[(RelationKind, u8, u8)]) -> HeteroGraph {
        let mut map: BTreeMap<RelationKey, Vec<(Seat, Seat)>> = RelationScheme::RoundTagged
            .keys(1)
            .into_iter()
            .map(|k| (k, vec![]))
            .collect();
        for (k, s, d) in edges {
            map.get_mut(&RelationKey::tagged(*k, 1))
                .unwrap()
                .push((Seat(*s), Seat(*d)));
        }
        HeteroGraph {
            game_index: 0,
            x: std::array::from_fn(|i| std::array::from_fn(|j| (i == j) as u8)),
            y: std::array::from_fn(|i| (i == spy as usize) as u8),
            edges: map,
        }
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            heads1: 2,
            out1: 3,
            heads2: 2,
            out2: 2,
            ..ModelConfig::round1(RelationScheme::RoundTagged)
        }
    }

    #[test]
    fn zero_params_give_uniform() {
        let cfg = ModelConfig::round1(RelationScheme::RoundTagged);
        let g = graph(
            2,
            &[(RelationKind::Vote, 0, 2), (RelationKind::Against, 1, 2)],
        );
        let p = vec![0.0; cfg.layout().total];
        let probs = predict_probs(&[&g], &p, &cfg).unwrap();
        assert_eq!(probs[0], [0.25; 4]);
        assert!((cross_entropy(&probs[0], 2) - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0, 0.0], 1), 0.0);
        assert!((cross_entropy(&[0.7, 0.1, 0.1, 0.1], 0) - 0.356_674_943_938_732_4).abs() < 1e-12);
        assert!((cross_entropy(&[0.0, 1.0, 0.0, 0.0], 0) - 1e12f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn empty_graph_rows_are_zero() {
        let cfg = small_cfg();
        let g = graph(0, &[(RelationKind::Vote, 1, 2)]);
        let p = cfg.layout().init(4);
        let batch = CompiledBatch::new(&cfg, &[&g]).unwrap();
        let t = model_forward(batch, &p, &cfg, Mode::Eval).unwrap();
        let w1 = cfg.heads1 * cfg.out1;
        for node in [0, 1, 3] {
            assert!(t.x1[node * w1..(node + 1) * w1].iter().all(|v| *v == 0.0));
        }
        assert!(t.x1[2 * w1..3 * w1].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn attention_special_cases() {
        let cfg = small_cfg();
        let p = cfg.layout().init(9);
        // single in-neighbor: alpha = 1
        let g = graph(0, &[(RelationKind::For, 1, 0)]);
        let t = model_forward(
            CompiledBatch::new(&cfg, &[&g]).unwrap(),
            &p,
            &cfg,
            Mode::Eval,
        )
        .unwrap();
        for row in t.layers[0].attention_rows(&t.batch, cfg.heads1) {
            assert_eq!(row, &[1.0]);
        }
        // two in-neighbors with identical inputs and shared weights: (0.5, 0.5)
        let mut x = vec![0.0; 16];
        x[8..12].copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        x[12..16].copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let g = graph(0, &[(RelationKind::For, 2, 0), (RelationKind::For, 3, 0)]);
        let mut batch = CompiledBatch::new(&cfg, &[&g]).unwrap();
        batch.x = x;
        let t = model_forward(batch, &p, &cfg, Mode::Eval).unwrap();
        for row in t.layers[0].attention_rows(&t.batch, cfg.heads1) {
            assert_eq!(row, &[0.5, 0.5]);
        }
    }

    #[test]
    fn zero_readout_weights_give_bias_gradient() {
        let cfg = small_cfg();
        let lay = cfg.layout();
        let mut p = lay.init(1);
        p[lay.w_out..lay.b_out].fill(0.0);
        let g = graph(3, &[(RelationKind::Vote, 0, 3), (RelationKind::Vote, 3, 0)]);
        let t = model_forward(
            CompiledBatch::new(&cfg, &[&g]).unwrap(),
            &p,
            &cfg,
            Mode::Eval,
        )
        .unwrap();
        let grad = backward(&t, &p, &cfg);
        let probs = t.graph_probs(0);
        for k in 0..4 {
            let y = (k == 3) as u8 as f64;
            assert!((grad[lay.b_out + k] - (probs[k] - y)).abs() < 1e-15);
        }
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let cfg = ModelConfig::round1(RelationScheme::RoundTagged);
        let mut g = graph(0, &[]);
        g.edges
            .insert(RelationKey::tagged(RelationKind::Vote, 2), vec![]);
        assert!(matches!(
            CompiledBatch::new(&cfg, &[&g]),
            Err(GnnError::SchemaMismatch { .. })
        ));
        let p = vec![0.0; 3];
        let ok = graph(0, &[]);
        assert!(matches!(
            predict_probs(&[&ok], &p, &cfg),
            Err(GnnError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn two_node_path_gradient_by_hand() {
        // one head, one channel, single relation, single edge 1 -> 0.
        // x'_0 = elu(w1·1) with alpha = 1; layer 2 likewise from node 1's
        // output, which is zero (no in-edges), so layer-2 output depends on
        // nothing: everything routes through the readout of node 0's layer-1.
        let cfg = ModelConfig {
            heads1: 1,
            out1: 1,
            heads2: 1,
            out2: 1,
            relation_keys: vec![RelationKey::tagged(RelationKind::For, 1)],
            ..ModelConfig::round1(RelationScheme::RoundTagged)
        };
        let lay = cfg.layout();
        let mut p = vec![0.0; lay.total];
        // layer 1: W row = [0.3, 0.7, -0.2, 0.5]; node 0 receives from node 1 -> z_1 = 0.7
        p[lay.layers[0].w..lay.layers[0].w + 4].copy_from_slice(&[0.3, 0.7, -0.2, 0.5]);
        // layer 2: 1×1 weight 1.5; node 1 receives from node 0 in a second graph edge
        p[lay.layers[1].w] = 1.5;
        // readout weight on node 1's layer-2 output, for class 1
        p[lay.w_out + 4 + 1] = 2.0;
        let mut g = graph(1, &[]);
        g.edges.retain(|k, _| cfg.relation_keys.contains(k));
        g.edges
            .get_mut(&RelationKey::tagged(RelationKind::For, 1))
            .unwrap()
            .extend([(Seat(1), Seat(0)), (Seat(0), Seat(1))]);
        let t = model_forward(
            CompiledBatch::new(&cfg, &[&g]).unwrap(),
            &p,
            &cfg,
            Mode::Eval,
        )
        .unwrap();
        // node 1 layer-1: receives node 0 -> z = 0.3; node 0: z = 0.7
        assert!((t.x1[0] - 0.7).abs() < 1e-15);
        assert!((t.x1[1] - 0.3).abs() < 1e-15);
        // node 1 layer-2 = 1.5 · x1[0] = 1.05; logit_1 = 2 · 1.05
        assert!((t.x2[1] - 1.05).abs() < 1e-15);
        let grad = backward(&t, &p, &cfg);
        let probs = t.graph_probs(0);
        // dL/dlogit_1 = p1 - 1; logit_1 = 2 · 1.5 · W[0,1]
        let dl = probs[1] - 1.0;
        let expect_w01 = dl * 2.0 * 1.5;
        assert!((grad[lay.layers[0].w + 1] - expect_w01).abs() < 1e-12);
        let expect_w2 = dl * 2.0 * 0.7;
        assert!((grad[lay.layers[1].w] - expect_w2).abs() < 1e-12);
        // attention is over singletons: the a vectors get no gradient
        assert_eq!(grad[lay.layers[0].a], 0.0);
        assert_eq!(grad[lay.layers[1].a], 0.0);
    }
}
