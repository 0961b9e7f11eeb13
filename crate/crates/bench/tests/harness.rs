use crossing_bench::batch::{write_csv, AggregateMetrics};
use crossing_bench::sweeps::{prediction_error_probe, summarize, sweep_threshold};
use crossing_bench::{run_batch, run_episode, BenchConfig, BenchError, ExperimentSpec, Outcome, PolicyKind};
use crossing_core::Turn;

fn spec(policy: PolicyKind, episodes: u32) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(Turn::Right, policy, BenchConfig::default());
    s.episodes = episodes;
    s
}

fn small_pomcp(episodes: u32) -> ExperimentSpec {
    let mut s = spec(PolicyKind::Pomcp, episodes);
    s.config.solver.tree_queries = 200;
    s
}

#[test]
fn empty_road_crosses_without_disturbing_anyone() {
    for policy in [PolicyKind::Ttc, PolicyKind::Pomcp] {
        for turn in [Turn::Right, Turn::Left] {
            let mut s = small_pomcp(1);
            s.policy = policy;
            s.turn = turn;
            s.config.sim.density = 0.0;
            let m = run_episode(&s, 11, None).unwrap();
            assert_eq!(m.outcome, Outcome::Crossed, "{policy:?} {turn:?}");
            assert_eq!(m.braking_time, 0.0);
            assert_eq!(m.waiting_time, 0.0);
            assert_eq!(m.time_to_cross, Some(m.duration));
        }
    }
}

#[test]
fn same_seed_same_metrics() {
    for policy in [PolicyKind::Ttc, PolicyKind::Pomcp, PolicyKind::Random] {
        let s = small_pomcp(1);
        let s = ExperimentSpec { policy, ..s };
        assert_eq!(run_episode(&s, 5, None).unwrap(), run_episode(&s, 5, None).unwrap());
    }
}

#[test]
fn single_episode_batch_wraps_the_episode() {
    let mut s = spec(PolicyKind::Ttc, 1);
    s.base_seed = 42;
    let eps = run_batch(&s).unwrap();
    assert_eq!(eps, vec![run_episode(&s, 42, None).unwrap()]);
}

#[test]
fn metric_accounting_holds() {
    let eps = run_batch(&spec(PolicyKind::Random, 60)).unwrap();
    for e in &eps {
        assert!(e.braking_time >= 0.0 && e.waiting_time >= 0.0);
        assert_eq!(e.time_to_cross.is_some(), e.crossed());
        let flags = [e.crossed(), e.collided(), e.timed_out()];
        assert_eq!(flags.iter().filter(|f| **f).count(), 1);
        assert!((e.duration / 0.25 - (e.duration / 0.25).round()).abs() < 1e-9);
    }
    let a = AggregateMetrics::from_episodes(&eps);
    assert_eq!(a.success_pct, 100.0 - a.collision_pct - a.timeout_pct);
    assert!([a.success_pct, a.collision_pct, a.timeout_pct]
        .iter()
        .all(|r| (0.0..=100.0).contains(r)));
}

#[test]
fn csv_is_byte_identical_on_rerun() {
    let render = || {
        let rows = sweep_threshold(&[0.0, 4.5], &spec(PolicyKind::Ttc, 40)).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        buf
    };
    let first = render();
    assert_eq!(first, render());
    let pomcp = || {
        let (row, _) = summarize(&small_pomcp(4), "none", 0.0).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        buf
    };
    assert_eq!(pomcp(), pomcp());
}

#[test]
fn paired_seeds_share_the_spawn_draws() {
    // Traffic has its own random stream, so both policies start from the
    // same warmed-up road.
    let mut a = spec(PolicyKind::Ttc, 1);
    a.config.sim.density = 0.3;
    let b = ExperimentSpec {
        policy: PolicyKind::Random,
        ..a.clone()
    };
    let mut first_a = None;
    let mut first_b = None;
    let mut la = |r: crossing_bench::StepRecord| {
        first_a.get_or_insert(r.vehicles);
    };
    run_episode(&a, 9, Some(&mut la)).unwrap();
    let mut lb = |r: crossing_bench::StepRecord| {
        first_b.get_or_insert(r.vehicles);
    };
    run_episode(&b, 9, Some(&mut lb)).unwrap();
    let ids = |v: &Vec<crossing_bench::episode::LoggedVehicle>| v.iter().map(|x| x.id).collect::<Vec<_>>();
    assert_eq!(ids(first_a.as_ref().unwrap()), ids(first_b.as_ref().unwrap()));
}

#[test]
fn config_errors_come_before_stepping() {
    let mut s = spec(PolicyKind::Ttc, 1);
    s.config.sim.density = -0.1;
    assert!(matches!(run_episode(&s, 0, None), Err(BenchError::Config(_))));
    let mut s = spec(PolicyKind::Ttc, 1);
    s.episodes = 0;
    assert!(run_batch(&s).is_err());
    let mut s = spec(PolicyKind::Ttc, 1);
    s.config.model.dt = 0.1;
    assert!(run_episode(&s, 0, None).is_err());
    assert!(sweep_threshold(&[], &spec(PolicyKind::Ttc, 1)).is_err());
}

#[test]
fn prediction_error_starts_at_zero_and_grows() {
    let errs = prediction_error_probe(&BenchConfig::default(), Turn::Right, 10, 60, 0).unwrap();
    assert_eq!(errs.len(), 11);
    assert_eq!(errs[0], 0.0);
    assert!(errs.windows(2).all(|w| w[1] >= w[0]));
    assert!(errs[10] > 0.5 && errs[10] < 20.0);
    assert!(prediction_error_probe(&BenchConfig::default(), Turn::Right, 0, 10, 0).is_err());
}
