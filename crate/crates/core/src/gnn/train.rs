use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{backward, dropout_mask, model_forward, predict_probs, Mode};
use super::{CompiledBatch, ExpertObservation, GnnError, ModelConfig};
use crate::digest::sha256_hex;
use crate::graph::{HeteroGraph, SplitConfig};
use crate::rng::{derive_seed, seeded};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Smallest training set `train` accepts: two graphs per fold.
const MIN_TRAIN: usize = 8;

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(n: usize, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -=
                self.lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * params[i]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldLog {
    pub fold: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub folds: Vec<FoldLog>,
    pub chosen_fold: usize,
}

/// Trained parameters plus what is needed to check and reuse them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub config_digest: String,
    /// Flat parameters in the documented layout.
    pub params: Vec<f64>,
    pub seed: u64,
    pub split_id: Option<usize>,
    pub fold: usize,
    pub best_val_loss: f64,
    /// Epoch (1-based) whose parameters were kept.
    pub epoch: usize,
    /// Digest of the split set the model was trained under, when known.
    #[serde(default)]
    pub data_digest: String,
}

impl Checkpoint {
    /// An untrained checkpoint with every parameter zero.
    pub fn zeros(config: ModelConfig) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_digest: config.digest(),
            params: vec![0.0; config.layout().total],
            config,
            seed: 0,
            split_id: None,
            fold: 0,
            best_val_loss: 0.0,
            epoch: 0,
            data_digest: String::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), GnnError> {
        std::fs::write(path, self.to_json()).map_err(|e| GnnError::Checkpoint {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, GnnError> {
        let err = |msg: String| GnnError::Checkpoint {
            path: path.display().to_string(),
            msg,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(err(format!("unsupported version {}", ck.version)));
        }
        if ck.config_digest != ck.config.digest() {
            return Err(err("config digest does not match the stored config".into()));
        }
        if ck.params.len() != ck.config.layout().total {
            return Err(err(format!(
                "{} parameters stored, config needs {}",
                ck.params.len(),
                ck.config.layout().total
            )));
        }
        if ck.params.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite parameter".into()));
        }
        Ok(ck)
    }
}

/// Patience-based early stopping that keeps the best parameters seen.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_loss: f64,
    /// 1-based epoch of the best loss; 0 before any update.
    pub best_epoch: usize,
    pub best_params: Vec<f64>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, initial: Vec<f64>) -> Self {
        EarlyStopping {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            best_params: initial,
            since_best: 0,
        }
    }

    /// Records an epoch's validation loss; true means stop now. Only a
    /// strictly lower loss counts as improvement.
    pub fn update(&mut self, epoch: usize, val_loss: f64, params: &[f64]) -> bool {
        if val_loss < self.best_loss {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
            self.best_params.clear();
            self.best_params.extend_from_slice(params);
            self.since_best = 0;
            false
        } else {
            self.since_best += 1;
            self.since_best >= self.patience
        }
    }
}

fn mean_loss(graphs: &[&HeteroGraph], params: &[f64], cfg: &ModelConfig) -> Result<f64, GnnError> {
    let probs = predict_probs(graphs, params, cfg)?;
    Ok(probs
        .iter()
        .zip(graphs)
        .map(|(p, g)| super::cross_entropy(p, g.spy_seat().index()))
        .sum::<f64>()
        / graphs.len() as f64)
}

/// Trains one model on `train` with early stopping on `val`.
/// Returns the parameters of the best validation epoch.
pub fn train_fold(
    train: &[&HeteroGraph],
    val: &[&HeteroGraph],
    cfg: &ModelConfig,
    seed: u64,
    fold: usize,
) -> Result<(Vec<f64>, FoldLog), GnnError> {
    cfg.validate()?;
    let layout = cfg.layout();
    let mut params = layout.init(derive_seed(seed, 0));
    let mut opt = AdamW::new(layout.total, cfg.lr, cfg.weight_decay);
    let mut rng = seeded(derive_seed(seed, 1));
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut stop = EarlyStopping::new(cfg.patience, params.clone());
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let graphs: Vec<&HeteroGraph> = chunk.iter().map(|&i| train[i]).collect();
            let batch = CompiledBatch::new(cfg, &graphs)?;
            let mask = dropout_mask(&mut rng, graphs.len() * cfg.concat_dim(), cfg.dropout);
            let trace = model_forward(batch, &params, cfg, Mode::Train { mask: &mask })?;
            train_loss += trace.loss() * graphs.len() as f64;
            let grad = backward(&trace, &params, cfg);
            opt.step(&mut params, &grad);
        }
        train_loss /= train.len() as f64;
        let val_loss = mean_loss(val, &params, cfg)?;
        history.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });
        if stop.update(epoch, val_loss, &params) {
            break;
        }
    }
    let log = FoldLog {
        fold,
        epochs_run: history.len(),
        best_epoch: stop.best_epoch,
        best_val_loss: stop.best_loss,
        history,
    };
    Ok((stop.best_params, log))
}

/// K-fold training on the split's train set. The fold model with the
/// lowest best validation loss becomes the checkpoint.
pub fn train(
    graphs: &[HeteroGraph],
    split: &SplitConfig,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(Checkpoint, TrainingLog), GnnError> {
    cfg.validate()?;
    let items: Vec<&HeteroGraph> = split.train_indices.iter().map(|&i| &graphs[i]).collect();
    if items.len() < MIN_TRAIN.max(cfg.folds) {
        return Err(GnnError::TooSmall(items.len(), MIN_TRAIN.max(cfg.folds)));
    }
    let k = cfg.folds;
    let n = items.len();
    let mut folds = Vec::with_capacity(k);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for f in 0..k {
        let (lo, hi) = (f * n / k, (f + 1) * n / k);
        let val: Vec<&HeteroGraph> = items[lo..hi].to_vec();
        let train: Vec<&HeteroGraph> = items[..lo].iter().chain(&items[hi..]).copied().collect();
        let (params, log) = train_fold(&train, &val, cfg, derive_seed(seed, f as u64), f)?;
        log::debug!(
            "split {} fold {f}: best val loss {:.4} at epoch {} of {}",
            split.split_id,
            log.best_val_loss,
            log.best_epoch,
            log.epochs_run
        );
        if best.as_ref().is_none_or(|b| log.best_val_loss < b.0) {
            best = Some((log.best_val_loss, f, params));
        }
        folds.push(log);
    }
    let (loss, fold, params) = best.expect("at least two folds");
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        config: cfg.clone(),
        config_digest: cfg.digest(),
        params,
        seed,
        split_id: Some(split.split_id),
        fold,
        best_val_loss: loss,
        epoch: folds[fold].best_epoch,
        data_digest: String::new(),
    };
    Ok((
        ck,
        TrainingLog {
            folds,
            chosen_fold: fold,
        },
    ))
}

/// Eval-mode prediction for one graph.
pub fn predict(ck: &Checkpoint, graph: &HeteroGraph) -> Result<ExpertObservation, GnnError> {
    let probs = predict_probs(&[graph], &ck.params, &ck.config)?;
    Ok(ExpertObservation::from_probs(probs[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adamw_first_step_moves_by_lr() {
        let mut p = vec![1.0, -2.0, 0.0];
        let mut opt = AdamW::new(3, 0.1, 0.0);
        opt.step(&mut p, &[0.5, -3.0, 0.0]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 1.9).abs() < 1e-6);
        assert_eq!(p[2], 0.0);
        let mut q = vec![2.0];
        let mut opt = AdamW::new(1, 0.1, 0.5);
        opt.step(&mut q, &[0.0]);
        assert!((q[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn patience_one_stops_after_first_worse_epoch() {
        let mut es = EarlyStopping::new(1, vec![0.0]);
        assert!(!es.update(1, 0.9, &[1.0]));
        assert!(es.update(2, 1.1, &[2.0]));
        assert_eq!((es.best_epoch, es.best_params.as_slice()), (1, &[1.0][..]));
    }

    #[test]
    fn equal_loss_is_not_improvement() {
        let mut es = EarlyStopping::new(3, vec![]);
        assert!(!es.update(1, 0.5, &[1.0]));
        assert!(!es.update(2, 0.5, &[2.0]));
        assert!(!es.update(3, 0.4, &[3.0]));
        assert!(!es.update(4, 0.4, &[4.0]));
        assert!(!es.update(5, 0.45, &[5.0]));
        assert!(es.update(6, 0.4, &[6.0]));
        assert_eq!(es.best_epoch, 3);
        assert_eq!(es.best_params, vec![3.0]);
    }
}
