mod common;

use meow_core::agents::ScriptedPolicyParams;
use meow_core::gnn::{predict, train, ModelConfig};
use meow_core::graph::{build_datasets, DatasetKind, RelationScheme, SplitConfig};
use meow_core::judge::expert_observe;
use meow_core::rng::seeded;
use meow_core::sim::{run_batch, BatchSpec};

fn whole_set_split(n: usize) -> SplitConfig {
    SplitConfig {
        split_id: 0,
        train_indices: (0..n).collect(),
        test_indices: Vec::new(),
        ratio: 1.0,
        seed: 0,
    }
}

#[test]
fn oracle_data_is_fit_within_200_epochs() {
    let recs = run_batch(&BatchSpec::scripted(
        80,
        3,
        ScriptedPolicyParams::new(1.0, 0.0, 0.0),
    ))
    .unwrap()
    .records;
    let (d1, _) = build_datasets(&recs, RelationScheme::RoundTagged, "oracle");
    let mut cfg = ModelConfig::round1(RelationScheme::RoundTagged);
    cfg.max_epochs = 200;
    cfg.patience = 200;
    let (ck, log) = train(&d1.graphs, &whole_set_split(d1.len()), &cfg, 11).unwrap();
    assert!(log.folds.iter().all(|f| f.epochs_run <= 200));
    let correct = d1
        .graphs
        .iter()
        .filter(|g| predict(&ck, g).unwrap().seat == g.spy_seat())
        .count();
    assert_eq!(
        correct,
        d1.len(),
        "training accuracy {correct}/{}",
        d1.len()
    );
}

#[test]
fn shuffled_labels_do_not_generalize() {
    use rand::seq::SliceRandom;
    let recs = common::records(200, 4);
    let (mut d1, _) = build_datasets(&recs, RelationScheme::RoundTagged, "shuffled");
    let mut labels: Vec<[u8; 4]> = d1.graphs.iter().map(|g| g.y).collect();
    labels.shuffle(&mut seeded(9));
    for (g, y) in d1.graphs.iter_mut().zip(labels) {
        g.y = y;
    }
    let split = common::splits_for(&d1, 1, 5).splits.remove(0);
    let mut cfg = ModelConfig::round1(RelationScheme::RoundTagged);
    cfg.max_epochs = 80;
    let (ck, _) = train(&d1.graphs, &split, &cfg, 12).unwrap();
    let correct = split
        .test_indices
        .iter()
        .filter(|&&i| predict(&ck, &d1.graphs[i]).unwrap().seat == d1.graphs[i].spy_seat())
        .count();
    let acc = correct as f64 / split.test_indices.len() as f64;
    assert!(acc < 0.5, "test accuracy {acc} on shuffled labels");
}

#[test]
fn expert_observation_matches_dataset_graph() {
    let recs = common::records(60, 8);
    let (d1, d2) = build_datasets(&recs, RelationScheme::RoundTagged, "obs");
    for (kind, data, round) in [(DatasetKind::D1, &d1, 1u8), (DatasetKind::D2, &d2, 2u8)] {
        let splits = common::splits_for(data, 2, 0);
        let cks = common::random_checkpoints(kind, &splits, 3);
        let ck = &cks[&0];
        for g in &data.graphs {
            let rec = recs.iter().find(|r| r.game_index == g.game_index).unwrap();
            let via_record = expert_observe(rec, round, ck).unwrap();
            assert_eq!(via_record, predict(ck, g).unwrap(), "game {}", g.game_index);
        }
    }
}
