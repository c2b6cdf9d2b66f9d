use super::*;
use crate::graph::{generate_sbm, SbmConfig};
use crate::noise::{apply_class_noise, transition_matrix, NoiseKind};
use rand::Rng as _;

fn insertion_oracle(scores: &[f64], ids: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &i in ids {
        let pos = out
            .iter()
            .position(|&j| scores[i] < scores[j] || (scores[i] == scores[j] && i < j))
            .unwrap_or(out.len());
        out.insert(pos, i);
    }
    out
}

#[test]
fn sorting_breaks_ties_by_id() {
    let ids = [4, 1, 3, 0, 2];
    assert_eq!(sort_by_cbc(&[0.5; 5], &ids), vec![0, 1, 2, 3, 4]);
    let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
    assert_eq!(sort_by_cbc(&rev, &[0, 1, 2, 3, 4]), vec![4, 3, 2, 1, 0]);
    let mut rng = rng_for(5, "test");
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 4.0).collect();
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut rng);
        ids.truncate(rng.random_range(1..=n));
        assert_eq!(sort_by_cbc(&scores, &ids), insertion_oracle(&scores, &ids));
    }
}

fn sbm(seed: u64) -> Graph<f64> {
    generate_sbm(&SbmConfig::new(150, 3, 0.08, 0.01, 8, 1.5, seed)).unwrap()
}

fn noisy_labels(g: &Graph<f64>, rate: f64, seed: u64) -> Vec<usize> {
    let t = transition_matrix(NoiseKind::Symmetric, rate, 3).unwrap();
    apply_class_noise(g.clean_labels().unwrap(), &t, &g.mask(Split::Train), seed).unwrap()
}

#[test]
fn zero_model_extracts_class_zero() {
    let g = sbm(1);
    let inputs = GcnInputs::from_graph(&g).unwrap();
    let noisy = noisy_labels(&g, 0.3, 2);
    let pool = g.ids(Split::Train);
    let zero = GcnParams::zeros(8, 4, 3);
    let got = confident_subset(&zero, &inputs, &noisy, &pool).unwrap();
    let want: Vec<usize> = pool.iter().copied().filter(|&i| noisy[i] == 0).collect();
    assert_eq!(got, want);
    assert!(confident_subset(&zero, &inputs, &noisy, &[]).is_err());

    let y = g.clean_labels().unwrap();
    assert_eq!(agreeing(y, y, &pool), pool);
}

#[test]
fn fscore_definitions() {
    let mut clean = vec![false; 20];
    for i in [0, 2, 3, 7, 8, 11, 15, 19] {
        clean[i] = true;
    }
    let pool: Vec<usize> = (0..20).collect();
    let exact = extraction_fscore(&[0, 2, 3, 7, 8, 11, 15, 19], &pool, &clean).unwrap();
    assert_eq!(exact.fscore, 1.0);
    let disjoint = extraction_fscore(&[1, 4, 5], &pool, &clean).unwrap();
    assert_eq!(disjoint.fscore, 0.0);
    // 8 clean + 8 noisy extracted: precision 1/2, recall 1.
    let half = extraction_fscore(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 15, 16, 19], &pool, &clean).unwrap();
    assert_eq!(half.precision, 0.5);
    assert_eq!(half.recall, 1.0);
    assert!((half.fscore - 2.0 / 3.0).abs() < 1e-15);
    // 3 of 4 extracted are clean; 3 of the 8 clean nodes found.
    let mixed = extraction_fscore(&[0, 1, 2, 3], &pool, &clean).unwrap();
    assert!((mixed.fscore - 2.0 * 0.75 * 0.375 / (0.75 + 0.375)).abs() < 1e-15);
    assert!(matches!(extraction_fscore(&[], &pool, &clean), Err(Error::Undefined(_))));
    assert!(matches!(extraction_fscore(&[1], &[1, 4], &clean), Err(Error::Undefined(_))));
}

#[test]
fn carve_partitions_training_ids() {
    let train: Vec<usize> = (0..50).map(|i| 2 * i).collect();
    let (fit, val) = carve_noisy_val(&train, 0.1, 3).unwrap();
    assert_eq!(val.len(), 5);
    assert_eq!(fit.len(), 45);
    let mut all = [fit.clone(), val.clone()].concat();
    all.sort_unstable();
    assert_eq!(all, train);
    assert_eq!(carve_noisy_val(&train, 0.1, 3).unwrap(), (fit, val));
    assert_eq!(carve_noisy_val(&train, 0.0, 3).unwrap().1.len(), 0);
    assert!(carve_noisy_val(&[1], 0.5, 0).is_err());
}

fn quick_config(seed: u64) -> TssConfig {
    TssConfig {
        epochs: 60,
        pretrain_epochs: 50,
        patience: 10,
        train: TrainConfig {
            seed,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn full_run_respects_invariants_and_is_deterministic() {
    let g = sbm(7);
    let noisy = noisy_labels(&g, 0.3, 8);
    for pacing in PacingKind::ALL {
        let cfg = TssConfig {
            pacing,
            ..quick_config(4)
        };
        let a = run_tss(&g, &noisy, &cfg).unwrap();
        a.trace.check_invariants(&g.mask(Split::Train)).unwrap();
        assert!(a.trace.epochs.iter().any(|e| e.lambda == 1.0));
        assert_eq!(a.trace.fit.len() + a.trace.val.len(), g.ids(Split::Train).len());
        assert!(a.trace.fit.iter().all(|i| !a.trace.val.contains(i)));
        let first = &a.trace.epochs[0];
        assert_eq!(first.pool_size, (first.lambda * a.trace.fit.len() as f64).floor() as usize);
        assert!(a.test_acc.is_some());
        let b = run_tss(&g, &noisy, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.params, b.params);
        let lines = a.trace.to_json_lines().unwrap();
        assert_eq!(lines.lines().count(), a.trace.epochs.len());
    }
}

#[test]
fn degenerate_curriculum_trains_on_all_agreeing_nodes() {
    let g = sbm(3);
    let y = g.clean_labels().unwrap().to_vec();
    let cfg = TssConfig {
        lambda0: 1.0,
        epochs: 1,
        ..quick_config(1)
    };
    let out = run_tss(&g, &y, &cfg).unwrap();
    let e = &out.trace.epochs[0];
    assert_eq!(e.pool_size, out.trace.fit.len());
    assert_eq!(e.confident, agreeing(&out.prepared.predicted, &y, &out.trace.fit));
}

#[test]
fn baseline_shares_split_and_selection() {
    let g = sbm(9);
    let noisy = noisy_labels(&g, 0.2, 1);
    let cfg = quick_config(2);
    let base = run_baseline(&g, &noisy, &cfg).unwrap();
    let best = base.best_epoch.unwrap();
    assert!(base.history.len() == 60 || base.history.len() == best + 10);
    let val_best = base.history[best - 1].val_acc.unwrap();
    assert!(base.history.iter().all(|r| r.val_acc.unwrap() <= val_best));
    assert!(base.test_acc.is_some());
}

#[test]
fn constant_centrality_has_no_correlation() {
    let g = sbm(2);
    let noisy = noisy_labels(&g, 0.3, 4);
    let train = g.ids(Split::Train);
    let y = g.clean_labels().unwrap();
    let cbc = vec![0.25; g.node_count()];
    let err = cbc_fscore_correlation(&cbc, y, &noisy, y, &train, 10, 20, 0).unwrap_err();
    assert!(matches!(err, Error::Undefined(_)));
}

#[test]
fn rejects_invalid_configs() {
    let g = sbm(1);
    let noisy = g.clean_labels().unwrap().to_vec();
    for cfg in [
        TssConfig { lambda0: 0.0, ..quick_config(0) },
        TssConfig { epochs: 0, ..quick_config(0) },
        TssConfig { refresh: Some(0), ..quick_config(0) },
    ] {
        assert!(run_tss(&g, &noisy, &cfg).is_err());
    }
    assert!(run_tss(&g, &noisy[..10], &quick_config(0)).is_err());
}
