use entropystop::harness::{
    build_report, load_source, mode_stats, read_rows, run_grid, run_single, write_rows, DataSource, GridSpec, Mode,
    RunConfig,
};
use entropystop::synth::{InjectionKind, SuiteConfig};

fn small_suite(kind: InjectionKind, count: usize) -> Vec<entropystop::Dataset> {
    let suite = SuiteConfig::new(count, 150, 3, 2, vec![kind], vec![0.1], 5);
    (0..count)
        .map(|index| {
            load_source(&DataSource::Synthetic {
                suite: suite.clone(),
                index,
            })
            .unwrap()
        })
        .collect()
}

fn quick(seed: u64) -> RunConfig {
    let mut c = RunConfig::default_ae(3, seed);
    c.epochs = 6;
    c.batch_size = 64;
    c.n_eval = 64;
    c.stopper.patience = 5;
    c
}

#[test]
fn one_point_grid_matches_single_run() {
    let ds = small_suite(InjectionKind::Cluster, 1);
    let base = quick(3);
    let configs = GridSpec::single(&base).unwrap().configs(&base).unwrap();
    assert_eq!(configs, vec![base.clone()]);
    let rows = run_grid(&ds, &configs, &Mode::ALL).unwrap();
    for row in &rows {
        let single = run_single(&base, &ds[0], row.mode).unwrap();
        assert_eq!(row.auc, single.auc);
        assert_eq!(row.selected_iter, Some(single.selected_iter));
        assert_eq!(row.total_iters, Some(single.total_iters));
        assert_eq!(row.config_hash, single.config_hash);
    }
}

#[test]
fn sweep_rows_cover_the_product_and_round_trip() {
    let datasets = small_suite(InjectionKind::Global, 2);
    let mut spec = GridSpec::small_ae();
    spec.epochs = vec![3];
    let configs = spec.configs(&quick(1)).unwrap();
    assert_eq!(configs.len(), 16);
    let modes = [Mode::Naive, Mode::Entropy];
    let rows = run_grid(&datasets, &configs, &modes).unwrap();
    assert_eq!(rows.len(), 2 * 16 * 2);
    assert!(rows.iter().all(|r| r.succeeded()));

    // the stopper can only shorten training
    for pair in rows.chunks(2) {
        assert_eq!((pair[0].mode, pair[1].mode), (Mode::Naive, Mode::Entropy));
        assert!(pair[1].total_iters <= pair[0].total_iters);
        assert_eq!(pair[0].selected_iter, pair[0].total_iters);
    }

    let mut buf = Vec::new();
    write_rows(&rows, &mut buf).unwrap();
    let back = read_rows(buf.as_slice()).unwrap();
    assert_eq!(back, rows);

    let stats = mode_stats(&rows);
    assert_eq!(stats.len(), 2);
    assert!(stats.iter().all(|s| s.runs == 32 && s.failed == 0));

    let report = build_report(&back).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].pairs, 32);
    assert_eq!(report, build_report(&rows).unwrap());
}

#[test]
fn repeated_sweeps_agree() {
    let datasets = small_suite(InjectionKind::Cluster, 2);
    let configs = GridSpec::small_ae().configs(&quick(2)).unwrap()[..4].to_vec();
    let strip = |rows: Vec<entropystop::harness::GridRow>| {
        rows.into_iter()
            .map(|r| (r.dataset, r.config_hash, r.mode, r.auc, r.selected_iter, r.total_iters))
            .collect::<Vec<_>>()
    };
    let a = strip(run_grid(&datasets, &configs, &Mode::ALL).unwrap());
    let b = strip(run_grid(&datasets, &configs, &Mode::ALL).unwrap());
    assert_eq!(a, b);
    let mut sorted = a.clone();
    sorted.sort_by(|x, y| (&x.0, &x.1, x.2).cmp(&(&y.0, &y.1, y.2)));
    assert_eq!(a, sorted);
}

#[test]
fn failing_runs_are_recorded_not_fatal() {
    let mut datasets = small_suite(InjectionKind::Cluster, 1);
    datasets.push(entropystop::Dataset::unlabeled(datasets[0].x().clone(), "unlabeled").unwrap());
    let rows = run_grid(&datasets, &[quick(4)], &[Mode::Optimal]).unwrap();
    assert_eq!(rows.len(), 2);
    let failed: Vec<_> = rows.iter().filter(|r| !r.succeeded()).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].dataset, "unlabeled");
    assert!(failed[0].error.as_deref().unwrap().contains("label"));
}
