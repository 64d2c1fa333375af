//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.
//!
//! Set `MEOW_ACCEPT_ONLY=3,8` to run a subset.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use meow_core::agents::chat::{MockChatClient, DEFER_TO_EXPERT};
use meow_core::agents::{ChatRole, SamplingParams, ScriptedPolicyParams};
use meow_core::eval::{
    run_ablation, weighted_average_f1, AblationOptions, AggMode, PredictionSet, RoundEval,
};
use meow_core::game::{tally_votes, GameConfig, GameState, RoundInputs, Seat, Vote, Winner};
use meow_core::gnn::{
    cross_entropy, grad_check, model_forward, predict, random_graph, train, Checkpoint,
    CompiledBatch, Mode, ModelConfig,
};
use meow_core::graph::{
    build_datasets, dataset_stats, make_splits, Dataset, DatasetKind, RelationScheme, SplitSet,
};
use meow_core::judge::{
    assemble_p_eo, assemble_p_raw, expert_observe, judge, leakage_findings, JudgeMethod,
};
use meow_core::pipeline::{run_stages, split_seed, PipelineConfig, SplitParams, Stage};
use meow_core::rng::{derive_seed, seeded};
use meow_core::sim::{run_batch, BatchSpec};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("took {:.1} s, limit {limit_secs} s", elapsed.as_secs_f64())
    })
}

// 1 ------------------------------------------------------------------------

/// Most votes wins; among tied seats, the one whose earliest vote arrived first.
fn tally_oracle(votes: &[(u8, u8)]) -> u8 {
    let mut count = [0usize; 4];
    let mut first = [usize::MAX; 4];
    for (rank, &(_, t)) in votes.iter().enumerate() {
        count[t as usize] += 1;
        first[t as usize] = first[t as usize].min(rank);
    }
    let top = *count.iter().max().unwrap();
    (0..4u8)
        .filter(|&s| count[s as usize] == top)
        .min_by_key(|&s| first[s as usize])
        .unwrap()
}

fn permutations(items: &[u8]) -> Vec<Vec<u8>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Every profile where each alive voter picks another alive seat, under every arrival order.
fn check_profiles(alive: &[u8]) -> Result<usize, String> {
    let choices: Vec<Vec<u8>> = alive
        .iter()
        .map(|&v| alive.iter().copied().filter(|&t| t != v).collect())
        .collect();
    let n_profiles: usize = choices.iter().map(Vec::len).product();
    for code in 0..n_profiles {
        let mut c = code;
        let targets: Vec<u8> = choices
            .iter()
            .map(|opts| {
                let t = opts[c % opts.len()];
                c /= opts.len();
                t
            })
            .collect();
        for order in permutations(&(0..alive.len() as u8).collect::<Vec<_>>()) {
            let arrived: Vec<(u8, u8)> = order
                .iter()
                .map(|&i| (alive[i as usize], targets[i as usize]))
                .collect();
            let votes: Vec<Vote> = arrived
                .iter()
                .enumerate()
                .map(|(rank, &(v, t))| Vote {
                    voter: Seat(v),
                    target: Seat(t),
                    arrival_rank: rank as u32,
                })
                .collect();
            let got = tally_votes(&votes).map(|s| s.0);
            let want = tally_oracle(&arrived);
            ensure(got == Some(want), || {
                format!("votes {arrived:?}: got {got:?}, oracle {want}")
            })?;
        }
    }
    Ok(n_profiles)
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let four = check_profiles(&[0, 1, 2, 3])?;
    ensure(four == 81, || format!("{four} four-voter profiles"))?;
    let mut three = 0;
    for out in 0..4u8 {
        let alive: Vec<u8> = (0..4).filter(|&s| s != out).collect();
        let n = check_profiles(&alive)?;
        ensure(n == 8, || format!("{n} three-voter profiles"))?;
        three += n;
    }
    within(t.elapsed(), 1)?;
    Ok(format!(
        "{four} four-voter profiles x 24 orders and {three} three-voter profiles x 6 orders match; {:.0} ms",
        t.elapsed().as_secs_f64() * 1e3
    ))
}

// 2 ------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let out = run_batch(&BatchSpec::scripted(
        10_000,
        20_240_601,
        ScriptedPolicyParams::default(),
    ))
    .map_err(|e| e.to_string())?;
    ensure(out.records.len() == 10_000, || {
        format!("{} records", out.records.len())
    })?;
    let mut lengths = [0usize; 3];
    for rec in &out.records {
        let n = rec.rounds.len();
        ensure(n == 1 || n == 2, || {
            format!("game {} has {n} rounds", rec.game_index)
        })?;
        lengths[n] += 1;
        // replay the record through a fresh engine
        let cfg = GameConfig::new(rec.word_pair(), rec.spy_seat, rec.seed);
        let mut state = GameState::new_game(cfg).map_err(|e| e.to_string())?;
        for r in &rec.rounds {
            let replayed = state
                .advance(RoundInputs {
                    descriptions: r.descriptions.clone(),
                    statements: r.statements.clone(),
                    tendencies: r.tendencies.clone(),
                    votes: r.votes.clone(),
                })
                .map_err(|e| format!("game {}: {e}", rec.game_index))?;
            ensure(replayed.eliminated == r.eliminated, || {
                format!(
                    "game {}: replay eliminated a different seat",
                    rec.game_index
                )
            })?;
        }
        ensure(state.check_win() == Some(rec.winner), || {
            format!(
                "game {}: recorded {:?}, engine says {:?}",
                rec.game_index,
                rec.winner,
                state.check_win()
            )
        })?;
        // and by the rule itself
        let folk = rec.rounds.iter().any(|r| r.eliminated == rec.spy_seat);
        let want = if folk { Winner::Folk } else { Winner::Spies };
        ensure(rec.winner == want, || {
            format!("game {}: winner rule", rec.game_index)
        })?;
    }
    within(t.elapsed(), 30)?;
    Ok(format!(
        "10000 games: {} one-round, {} two-round, winners re-derived; {:.1} s",
        lengths[1],
        lengths[2],
        t.elapsed().as_secs_f64()
    ))
}

// 3 ------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let params = ScriptedPolicyParams::default();
    let w = &params.tendency_weights;
    let mean_tendencies = (w[0] + 2.0 * w[1] + 3.0 * w[2]) / w.iter().sum::<f64>();
    let out = run_batch(&BatchSpec::scripted(261, 0, params)).map_err(|e| e.to_string())?;
    let (mut lists, mut total) = (0usize, 0usize);
    for r in out.records.iter().flat_map(|rec| &rec.rounds) {
        lists += r.statements.len();
        total += r.tendencies.len();
    }
    let observed = total as f64 / lists.max(1) as f64;
    let (d1, d2) = build_datasets(&out.records, RelationScheme::RoundTagged, "acceptance");
    let s = dataset_stats(&d1.graphs);
    ensure(s.graphs == 261, || format!("{} graphs", s.graphs))?;
    ensure(s.nodes == 1044, || format!("{} nodes", s.nodes))?;
    let (lo, hi) = (12 * 261, 16 * 261);
    ensure((lo..=hi).contains(&s.edges), || {
        format!("{} edges outside [{lo}, {hi}]", s.edges)
    })?;
    ensure((mean_tendencies - 2.4).abs() < 1e-9, || {
        format!("tendency mean {mean_tendencies}")
    })?;
    within(t.elapsed(), 120)?;
    Ok(format!(
        "D1 {} graphs / {} nodes / {} edges (band [{lo}, {hi}]; 3551 reported); D2 {} graphs; {observed:.2} tendencies per statement (configured mean {mean_tendencies:.1}); {:.1} s",
        s.graphs,
        s.nodes,
        s.edges,
        d2.len(),
        t.elapsed().as_secs_f64()
    ))
}

// 4 ------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();
    for (name, cfg) in [
        ("round-1", ModelConfig::round1(RelationScheme::RoundTagged)),
        ("round-2", ModelConfig::round2(RelationScheme::RoundTagged)),
    ] {
        let r = grad_check(&cfg, 10, 64, 0xC4).map_err(|e| e.to_string())?;
        ensure(r.max_rel_error < 1e-4, || {
            format!("{name}: max rel error {:e}", r.max_rel_error)
        })?;
        ensure(r.trials_with_empty_relations > 0, || {
            format!("{name}: no empty relations drawn")
        })?;
        parts.push(format!(
            "{name} {:.2e} over {} coords ({} trials with empty relations)",
            r.max_rel_error, r.coordinates, r.trials_with_empty_relations
        ));
    }
    within(t.elapsed(), 60)?;
    Ok(format!(
        "{}; {:.1} s",
        parts.join(", "),
        t.elapsed().as_secs_f64()
    ))
}

// 5 ------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let mut worst_row: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut rows = 0;
    for cfg in [
        ModelConfig::round1(RelationScheme::RoundTagged),
        ModelConfig::round2(RelationScheme::RoundTagged),
        ModelConfig::round2(RelationScheme::Merged),
    ] {
        let lay = cfg.layout();
        for trial in 0..20u64 {
            let mut rng = seeded(derive_seed(0xF5, trial));
            let graphs: Vec<_> = (0..3).map(|_| random_graph(&cfg, &mut rng)).collect();
            let refs: Vec<_> = graphs.iter().collect();
            let params = lay.init(trial);
            let batch = CompiledBatch::new(&cfg, &refs).map_err(|e| e.to_string())?;
            let tr = model_forward(batch, &params, &cfg, Mode::Eval).map_err(|e| e.to_string())?;
            for (l, heads) in [(0, cfg.heads1), (1, cfg.heads2)] {
                for row in tr.layers[l].attention_rows(&tr.batch, heads) {
                    worst_row = worst_row.max((row.iter().sum::<f64>() - 1.0).abs());
                    rows += 1;
                }
            }
            for b in 0..graphs.len() {
                let p = tr.graph_probs(b);
                worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
                ensure(p.iter().all(|&v| v > 0.0), || {
                    "non-positive probability".into()
                })?;
            }
        }
        let zeros = Checkpoint::zeros(cfg.clone());
        let mut rng = seeded(7);
        let g = random_graph(&cfg, &mut rng);
        let obs = predict(&zeros, &g).map_err(|e| e.to_string())?;
        ensure(obs.probs == [0.25; 4], || {
            format!("zero model gives {:?}", obs.probs)
        })?;
    }
    ensure(worst_row < 1e-12, || {
        format!("attention row off by {worst_row:e}")
    })?;
    ensure(worst_sum < 1e-12, || {
        format!("output sums off by {worst_sum:e}")
    })?;
    let uniform_loss = cross_entropy(&[0.25; 4], 2);
    let ln4 = 4f64.ln();
    ensure((uniform_loss - ln4).abs() < 1e-12, || {
        format!("uniform loss {uniform_loss}")
    })?;
    Ok(format!(
        "{rows} attention rows, max |sum-1| {worst_row:.1e}; max |sum(y)-1| {worst_sum:.1e}; zero model uniform; uniform loss = ln 4"
    ))
}

// 6, 7 ---------------------------------------------------------------------

struct Trained {
    records: Vec<meow_core::game::GameRecord>,
    d1: Dataset,
    splits: SplitSet,
    checkpoints: BTreeMap<usize, Checkpoint>,
}

fn train_round1(params: ScriptedPolicyParams, seed: u64) -> Result<Trained, String> {
    let records = run_batch(&BatchSpec::scripted(260, seed, params))
        .map_err(|e| e.to_string())?
        .records;
    let (d1, _) = build_datasets(&records, RelationScheme::RoundTagged, "acceptance");
    let splits = SplitSet {
        dataset_digest: d1.digest(),
        splits: make_splits(d1.len(), 10, 0.8, seed).map_err(|e| e.to_string())?,
    };
    let cfg = ModelConfig::for_dataset(DatasetKind::D1, RelationScheme::RoundTagged);
    let mut checkpoints = BTreeMap::new();
    for s in &splits.splits {
        let (ck, _) = train(&d1.graphs, s, &cfg, split_seed(seed, 1, s.split_id))
            .map_err(|e| e.to_string())?;
        checkpoints.insert(s.split_id, ck);
    }
    Ok(Trained {
        records,
        d1,
        splits,
        checkpoints,
    })
}

fn expert_ablation(t: &Trained) -> Result<meow_core::eval::AblationTable, String> {
    let rounds = [RoundEval {
        round: 1,
        dataset: &t.d1,
        splits: &t.splits,
        checkpoints: &t.checkpoints,
    }];
    let opts = AblationOptions {
        methods: vec![JudgeMethod::Expert],
        ..Default::default()
    };
    run_ablation(&t.records, &rounds, None, &opts).map_err(|e| e.to_string())
}

fn median8_accuracy(table: &meow_core::eval::AblationTable) -> f64 {
    let scores: Vec<(f64, f64)> = table.splits.iter().map(|s| (s.accuracy, s.wa_f1)).collect();
    AggMode::Median8.aggregate(&scores).0
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let signal = expert_ablation(&train_round1(ScriptedPolicyParams::new(0.9, 0.1, 0.3), 6)?)?;
    let t_signal = t.elapsed();
    let noise = expert_ablation(&train_round1(ScriptedPolicyParams::new(0.3, 0.3, 0.3), 6)?)?;
    let (a, b) = (median8_accuracy(&signal), median8_accuracy(&noise));
    let msg = format!(
        "median8 accuracy {a:.4} with signal (need >= 0.45), {b:.4} without (need 0.10..0.40); {:.0} s + {:.0} s",
        t_signal.as_secs_f64(),
        (t.elapsed() - t_signal).as_secs_f64()
    );
    ensure(a >= 0.45, || msg.clone())?;
    ensure((0.10..=0.40).contains(&b), || msg.clone())?;
    within(t.elapsed(), 600).map_err(|e| format!("{msg}; {e}"))?;
    Ok(msg)
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let trained = train_round1(ScriptedPolicyParams::new(1.0, 0.0, 0.0), 7)?;
    let table = expert_ablation(&trained)?;
    let accs: Vec<f64> = table.splits.iter().map(|s| s.accuracy).collect();
    ensure(accs.iter().all(|&a| a == 1.0), || {
        format!("split accuracies {accs:?}")
    })?;
    let std = table.stdev[0].round_1_std;
    ensure(std == Some(0.0), || format!("stdev {std:?}"))?;
    Ok(format!(
        "10/10 splits at 100% test accuracy, WA-F1 stdev 0; {:.0} s",
        t.elapsed().as_secs_f64()
    ))
}

// 8 ------------------------------------------------------------------------

/// WA-F1 from an explicit confusion matrix and the textbook definitions.
fn wa_f1_oracle(labels: &[usize], preds: &[usize]) -> f64 {
    let mut cm = [[0usize; 4]; 4];
    for (&y, &p) in labels.iter().zip(preds) {
        cm[y][p] += 1;
    }
    let mut num = 0.0;
    for c in 0..4 {
        let tp = cm[c][c] as f64;
        let fp = (0..4).filter(|&r| r != c).map(|r| cm[r][c]).sum::<usize>() as f64;
        let fn_ = (0..4).filter(|&q| q != c).map(|q| cm[c][q]).sum::<usize>() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        num += (tp + fn_) * f1;
    }
    num / labels.len() as f64
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let labels = [0usize, 2, 2, 3, 1];
    let mut worst: f64 = 0.0;
    for code in 0..4usize.pow(5) {
        let preds: Vec<usize> = (0..5).map(|i| (code / 4usize.pow(i)) % 4).collect();
        let pairs: Vec<(Seat, Seat)> = preds
            .iter()
            .zip(&labels)
            .map(|(&p, &y)| (Seat(p as u8), Seat(y as u8)))
            .collect();
        let got = weighted_average_f1(&PredictionSet::from_pairs(JudgeMethod::Expert, 1, &pairs))
            .map_err(|e| e.to_string())?;
        worst = worst.max((got - wa_f1_oracle(&labels, &preds)).abs());
    }
    ensure(worst < 1e-12, || format!("max deviation {worst:e}"))?;
    within(t.elapsed(), 10)?;
    Ok(format!("1024 assignments, max deviation {worst:.1e}"))
}

// 9 ------------------------------------------------------------------------

fn pipeline_digests(dir: &Path, workers: usize) -> Result<(Vec<u8>, Vec<u8>, Vec<String>), String> {
    let mut m1 = ModelConfig::round1(RelationScheme::RoundTagged);
    m1.max_epochs = 15;
    let mut m2 = ModelConfig::round2(RelationScheme::RoundTagged);
    m2.max_epochs = 15;
    let mut batch = BatchSpec::scripted(120, 99, ScriptedPolicyParams::default());
    batch.workers = workers;
    let cfg = PipelineConfig {
        batch,
        round1: Some(m1),
        round2: Some(m2),
        splits: SplitParams {
            n_splits: 2,
            ..Default::default()
        },
        out_dir: dir.to_path_buf(),
        ..Default::default()
    };
    run_stages(
        &cfg,
        &[
            Stage::Simulate,
            Stage::BuildGraphs,
            Stage::Split,
            Stage::Train,
        ],
    )
    .map_err(|e| e.to_string())?;
    let art = cfg.artifacts();
    let records = std::fs::read(&art.records).map_err(|e| e.to_string())?;
    let d1 = std::fs::read(&art.d1).map_err(|e| e.to_string())?;
    let mut cks = Vec::new();
    for round in [1u8, 2] {
        for id in 0..2 {
            let ck = Checkpoint::load(&art.checkpoint(round, id)).map_err(|e| e.to_string())?;
            cks.push(ck.digest());
        }
    }
    Ok((records, d1, cks))
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = pipeline_digests(&tmp.path().join("a"), 1)?;
    let b = pipeline_digests(&tmp.path().join("b"), 1)?;
    let c = pipeline_digests(&tmp.path().join("c"), 4)?;
    ensure(a.0 == b.0 && a.0 == c.0, || "record files differ".into())?;
    ensure(a.1 == b.1 && a.1 == c.1, || "d1 files differ".into())?;
    ensure(a.2 == b.2 && a.2 == c.2, || {
        format!("checkpoint digests differ: {:?} {:?} {:?}", a.2, b.2, c.2)
    })?;
    Ok(format!(
        "records ({} bytes), D1, and {} checkpoint digests identical across 3 runs (workers 1, 1, 4)",
        a.0.len(),
        a.2.len()
    ))
}

// 10 -----------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let records = run_batch(&BatchSpec::scripted(
        600,
        10,
        ScriptedPolicyParams::default(),
    ))
    .map_err(|e| e.to_string())?
    .records;
    let mut ck1 = Checkpoint::zeros(ModelConfig::round1(RelationScheme::RoundTagged));
    ck1.params = ck1.config.layout().init(101);
    let mut ck2 = Checkpoint::zeros(ModelConfig::round2(RelationScheme::RoundTagged));
    ck2.params = ck2.config.layout().init(102);

    // leakage over p_raw and p_EO prompts
    let mut prompts = 0;
    for rec in &records {
        for scope in 1..=rec.rounds.len() as u8 {
            if scope == 2 && !rec.spy_survived_round1() {
                continue;
            }
            let ck = if scope == 1 { &ck1 } else { &ck2 };
            let raw = assemble_p_raw(rec, scope).map_err(|e| e.to_string())?;
            let eo = assemble_p_eo(&expert_observe(rec, scope, ck).map_err(|e| e.to_string())?);
            for p in [raw, eo] {
                let found = leakage_findings(&p, rec);
                ensure(found.is_empty(), || {
                    format!("game {}: leaked {found:?}", rec.game_index)
                })?;
                prompts += 1;
            }
        }
    }
    ensure(prompts >= 1000, || {
        format!("only {prompts} prompts scanned")
    })?;

    let sampling = SamplingParams::default();
    let client = MockChatClient::new(vec![
        "Carol seems off. My final answer is Carol.".into(),
        DEFER_TO_EXPERT.into(),
    ]);
    let mut agree = 0;
    let mut judged = 0;
    for rec in records.iter().take(200) {
        let res = judge(
            Some(&client),
            &sampling,
            JudgeMethod::CotEo,
            rec,
            1,
            Some(&ck1),
            rec.game_index,
        )
        .map_err(|e| e.to_string())?;
        let t = res.transcript.as_ref().ok_or("no transcript")?;
        let users: Vec<&str> = t
            .turns()
            .iter()
            .filter(|u| u.role == ChatRole::User)
            .map(|u| u.content.as_str())
            .collect();
        let n_eo = users
            .iter()
            .filter(|u| u.starts_with("According to the judgment of game experts"))
            .count();
        ensure(
            users.len() == 2 && n_eo == 1 && !users[0].starts_with("According"),
            || format!("game {}: transcript shape", rec.game_index),
        )?;
        let expert = res.expert.as_ref().ok_or("no observation")?.seat;
        agree += (res.y_eo == Some(expert)) as usize;
        judged += 1;

        let ex = judge(None, &sampling, JudgeMethod::Expert, rec, 1, Some(&ck1), 0)
            .map_err(|e| e.to_string())?;
        ensure(ex.y_eo == Some(expert), || {
            "expert method disagrees with its observation".into()
        })?;
    }
    ensure(agree == judged, || {
        format!("deferring mock agreed on {agree}/{judged}")
    })?;
    Ok(format!(
        "{prompts} prompts scanned, 0 leaks; {judged} CoT_EO transcripts p_raw then one p_EO; deferring mock agrees {agree}/{judged}; Expert ran with no client"
    ))
}

// 11 -----------------------------------------------------------------------

fn criterion_11() -> Outcome {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let rendered = common::mock_ablation_markdown()?;
    let want =
        std::fs::read_to_string(golden.join("ablation_table.md")).map_err(|e| e.to_string())?;
    ensure(rendered == want, || {
        "rendered tables differ from tests/golden/ablation_table.md".into()
    })?;
    let reference =
        std::fs::read_to_string(golden.join("reference_layout.md")).map_err(|e| e.to_string())?;
    let (a, b) = (common::layout_of(&rendered), common::layout_of(&reference));
    ensure(a == b, || format!("layout {a:?} vs reference {b:?}"))?;
    Ok(format!(
        "golden match; {} tables with headers {:?}",
        a.len(),
        a.iter().map(|t| t.0.clone()).collect::<Vec<_>>()
    ))
}

mod common;

fn main() {
    let only: Option<Vec<usize>> = std::env::var("MEOW_ACCEPT_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "tally rule vs brute force", criterion_1),
        (2, "game length and winner", criterion_2),
        (3, "dataset structure", criterion_3),
        (4, "gradient check", criterion_4),
        (5, "forward invariants", criterion_5),
        (6, "learnability separation", criterion_6),
        (7, "oracle saturation", criterion_7),
        (8, "WA-F1 vs brute force", criterion_8),
        (9, "determinism", criterion_9),
        (10, "judge pipeline with mocks", criterion_10),
        (11, "table format", criterion_11),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
