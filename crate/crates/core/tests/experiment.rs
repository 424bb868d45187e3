use std::collections::BTreeMap;

use manet_core::config::ExperimentConfig;
use manet_core::experiment::run_experiment;
use manet_core::protocols::Protocol;
use manet_core::report::{emit_results, MANIFEST_FILE};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        mobiles: 60,
        topologies: 3,
        role_markings: 2,
        slot_set_draws: 2,
        trials: 3,
        protocols: vec![Protocol::Aodv, Protocol::Greedy { r_t: 0.4 }, Protocol::MaxProgress],
        ..ExperimentConfig::default()
    }
}

#[test]
fn ten_points_three_protocols_give_thirty_rows() {
    let mut cfg = small();
    cfg.sweep = BTreeMap::from([(
        "dest_distance".to_string(),
        (1..=10).map(|k| k as f64 / 10.0).collect(),
    )]);
    let table = run_experiment(&cfg, Some(1)).unwrap();
    assert_eq!(table.rows.len(), 30);
    let dir = tempfile::tempdir().unwrap();
    let path = emit_results(&table, &cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 31);
    for row in &table.rows {
        let r = row.report.reliability.mean;
        assert!((0.0..=1.0).contains(&r));
        assert!(row.report.ase.mean >= 0.0);
        assert_eq!(row.trials_per_topology, 12);
    }
}

#[test]
fn single_topology_run_is_repeatable() {
    let cfg = ExperimentConfig {
        topologies: 1,
        role_markings: 1,
        slot_set_draws: 1,
        trials: 1,
        ..small()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = emit_results(&run_experiment(&cfg, Some(1)).unwrap(), &cfg, a.path()).unwrap();
    let pb = emit_results(&run_experiment(&cfg, Some(1)).unwrap(), &cfg, b.path()).unwrap();
    assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
}

#[test]
fn manifest_replays_the_table() {
    let mut cfg = small();
    cfg.seed = u64::MAX - 3;
    cfg.sweep = BTreeMap::from([("mu".to_string(), vec![0.2, 0.6]), ("p".to_string(), vec![0.1, 0.5])]);
    let first = tempfile::tempdir().unwrap();
    let p1 = emit_results(&run_experiment(&cfg, Some(2)).unwrap(), &cfg, first.path()).unwrap();
    assert!(p1.ends_with("sweep_mu_p.csv"));

    let replayed = ExperimentConfig::from_file(&first.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(replayed, cfg);
    let second = tempfile::tempdir().unwrap();
    let p2 = emit_results(&run_experiment(&replayed, Some(1)).unwrap(), &replayed, second.path()).unwrap();
    assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
}

#[test]
fn fixed_topology_is_used_for_every_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("topo.txt");
    let t = manet_core::topology::generate_topology(30, 1.0, 0.05, 0.4, &mut manet_core::seed::rng(5)).unwrap();
    std::fs::write(&topo, t.to_table()).unwrap();
    let cfg = ExperimentConfig {
        mobiles: 30,
        dest_distance: 0.4,
        topology_file: Some(topo),
        ..small()
    };
    let table = run_experiment(&cfg, Some(1)).unwrap();
    for row in &table.rows {
        // Same placement each time, so only role/slot/trial randomness varies.
        assert_eq!(row.report.topologies, 3);
    }
}

#[test]
fn invalid_sweep_values_name_the_field() {
    let mut cfg = small();
    cfg.sweep = BTreeMap::from([("mu".to_string(), vec![0.5, 1.5])]);
    let err = run_experiment(&cfg, Some(1)).unwrap_err().to_string();
    assert!(err.contains("mu"), "{err}");
    cfg.sweep = BTreeMap::from([("warp".to_string(), vec![1.0])]);
    assert!(run_experiment(&cfg, Some(1)).is_err());
}
