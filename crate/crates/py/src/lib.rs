//! Python bindings: simulation, graph building, metrics, and expert
//! prediction. Records, graphs, and checkpoints cross the boundary as JSON
//! strings in the same schemas the CLI writes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use meow_core::agents::ScriptedPolicyParams;
use meow_core::eval::{accuracy, weighted_average_f1, PredictionSet};
use meow_core::game::{tally_votes as tally, GameRecord, Seat, Vote, N_PLAYERS};
use meow_core::gnn::{grad_check as check, predict, Checkpoint, ModelConfig};
use meow_core::graph::{build_datasets, HeteroGraph, RelationScheme};
use meow_core::judge::JudgeMethod;
use meow_core::sim::{run_batch, BatchSpec};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn seat(i: usize) -> PyResult<Seat> {
    Seat::new(i).ok_or_else(|| err(format!("seat {i} is not in 0..{N_PLAYERS}")))
}

/// Plays `n_games` scripted games; returns one JSON record per game.
#[pyfunction]
#[pyo3(signature = (n_games, seed=0, detect_rate=0.6, false_alarm=0.25, deception=0.5))]
fn simulate(
    n_games: u64,
    seed: u64,
    detect_rate: f64,
    false_alarm: f64,
    deception: f64,
) -> PyResult<Vec<String>> {
    let params = ScriptedPolicyParams {
        detect_rate,
        false_alarm,
        deception,
        ..Default::default()
    };
    let out = run_batch(&BatchSpec::scripted(n_games, seed, params)).map_err(err)?;
    out.records
        .iter()
        .map(|r| serde_json::to_string(r).map_err(err))
        .collect()
}

/// Round-1 and two-round graph lists (as JSON) for the given records.
#[pyfunction]
fn build_graphs(records: Vec<String>) -> PyResult<(Vec<String>, Vec<String>)> {
    let recs: Vec<GameRecord> = records
        .iter()
        .map(|r| serde_json::from_str(r).map_err(err))
        .collect::<PyResult<_>>()?;
    let (d1, d2) = build_datasets(&recs, RelationScheme::RoundTagged, "python");
    let enc = |gs: &[HeteroGraph]| -> PyResult<Vec<String>> {
        gs.iter()
            .map(|g| serde_json::to_string(g).map_err(err))
            .collect()
    };
    Ok((enc(&d1.graphs)?, enc(&d2.graphs)?))
}

/// Who is eliminated by `(voter, target)` votes listed in arrival order.
#[pyfunction]
fn tally_votes(votes: Vec<(usize, usize)>) -> PyResult<Option<usize>> {
    let votes = votes
        .iter()
        .enumerate()
        .map(|(i, &(v, t))| {
            Ok(Vote {
                voter: seat(v)?,
                target: seat(t)?,
                arrival_rank: i as u32,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(tally(&votes).map(Seat::index))
}

fn prediction_set(predicted: &[usize], truth: &[usize]) -> PyResult<PredictionSet> {
    if predicted.len() != truth.len() {
        return Err(err("predicted and truth differ in length"));
    }
    let pairs = predicted
        .iter()
        .zip(truth)
        .map(|(&p, &t)| Ok((seat(p)?, seat(t)?)))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(PredictionSet::from_pairs(JudgeMethod::Expert, 1, &pairs))
}

/// `(accuracy, weighted-average F1)` as fractions.
#[pyfunction]
fn scores(predicted: Vec<usize>, truth: Vec<usize>) -> PyResult<(f64, f64)> {
    let set = prediction_set(&predicted, &truth)?;
    Ok((
        accuracy(&set).map_err(err)?,
        weighted_average_f1(&set).map_err(err)?,
    ))
}

/// Largest relative gradient error for the round-1 or round-2 model.
#[pyfunction]
#[pyo3(signature = (round=1, trials=4, coords=16, seed=0))]
fn grad_check(round: u8, trials: usize, coords: usize, seed: u64) -> PyResult<f64> {
    let cfg = match round {
        1 => ModelConfig::round1(RelationScheme::RoundTagged),
        2 => ModelConfig::round2(RelationScheme::RoundTagged),
        _ => return Err(err("round must be 1 or 2")),
    };
    Ok(check(&cfg, trials, coords, seed)
        .map_err(err)?
        .max_rel_error)
}

/// Expert probabilities for one graph under a checkpoint file.
#[pyfunction]
fn expert_probs(checkpoint_path: &str, graph: &str) -> PyResult<Vec<f64>> {
    let ck = Checkpoint::load(std::path::Path::new(checkpoint_path)).map_err(err)?;
    let g: HeteroGraph = serde_json::from_str(graph).map_err(err)?;
    Ok(predict(&ck, &g).map_err(err)?.probs.to_vec())
}

#[pymodule]
fn meow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(build_graphs, m)?)?;
    m.add_function(wrap_pyfunction!(tally_votes, m)?)?;
    m.add_function(wrap_pyfunction!(scores, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(expert_probs, m)?)?;
    Ok(())
}
