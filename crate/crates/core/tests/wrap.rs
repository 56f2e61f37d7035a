use panelsim::config::SimConfig;
use panelsim::engine::run;
use panelsim::report::events_csv;

#[test]
fn replica_shift_leaves_results_unchanged() {
    let mut cfg = SimConfig::default();
    cfg.simulation.n_ue = 20;
    cfg.simulation.duration_ms = 3000;
    let base = run(&cfg).unwrap();
    for k in 1..=6 {
        cfg.geometry.drop_shift = k;
        let shifted = run(&cfg).unwrap();
        assert_eq!(shifted.summary.counters, base.summary.counters, "offset {k}");
        assert_eq!(events_csv(&shifted), events_csv(&base), "offset {k}");
    }
}
