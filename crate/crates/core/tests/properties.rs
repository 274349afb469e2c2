use proptest::prelude::*;

use schedleak::analysis::{empirical_delay, queue_recursion_violation};
use schedleak::arrivals::{bin_counts, generate};
use schedleak::attacker::{estimate_acc_serve_genie, estimate_fcfs_exact, ProbeObservation, ProbeStrategy};
use schedleak::engine::warmup_trim;
use schedleak::{
    run, ArrivalTrace, PoissonSource, PolicyConfig, PolicyKind, TickDuration, TickScale, TickTime, UserId,
};

fn poisson(scale: TickScale, rates: &[f64], horizon: TickTime, seed: u64) -> Vec<ArrivalTrace> {
    rates
        .iter()
        .enumerate()
        .map(|(u, &r)| {
            generate(
                &PoissonSource::new(UserId(u), r, scale.one_unit(), seed).unwrap(),
                horizon,
                scale,
            )
        })
        .collect()
}

fn policy(kind: PolicyKind, scale: TickScale, users: usize) -> PolicyConfig {
    match kind {
        PolicyKind::Fcfs => PolicyConfig::fcfs(scale, users),
        PolicyKind::Tdma => PolicyConfig::tdma(scale, users),
        PolicyKind::AccumulateServe => PolicyConfig::accumulate_serve(scale, users, scale.one_unit() * 4),
        PolicyKind::ProportionalTdma => PolicyConfig::proportional_tdma(scale, users, scale.one_unit() * 6),
    }
    .unwrap()
}

fn kinds() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(vec![
        PolicyKind::Fcfs,
        PolicyKind::Tdma,
        PolicyKind::AccumulateServe,
        PolicyKind::ProportionalTdma,
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fcfs_attack_is_exact_on_coarse_grids(
        seed in any::<u64>(),
        tpu in prop::sample::select(vec![20u64, 100, 1000]),
        c_units in prop::sample::select(vec![1.0, 2.0, 2.5, 4.0]),
        target_rate in 0.05f64..0.7,
    ) {
        let scale = TickScale::new(tpu).unwrap();
        let c = scale.duration(c_units).unwrap();
        let periods = 300;
        let horizon = TickTime(c.0 * periods as u64);
        let strategy = ProbeStrategy::budgeted(c, 0.1, target_rate.min(0.85), scale);
        prop_assume!(strategy.is_ok());
        let strategy = strategy.unwrap();
        let alice = generate(&PoissonSource::new(UserId(0), target_rate, scale.one_unit(), seed).unwrap(), horizon, scale);
        let res = run(&PolicyConfig::fcfs(scale, 2).unwrap(), &[alice.clone(), strategy.generate(UserId(1), horizon)], horizon, 0).unwrap();
        let obs = ProbeObservation::from_result(&res, UserId(1)).unwrap();
        let rec = estimate_fcfs_exact(&obs, c, periods, scale).unwrap();
        prop_assert_eq!(rec.counts, bin_counts(&alice, c, periods).unwrap().counts);
    }

    #[test]
    fn genie_estimates_ignore_probe_pattern(
        seed in any::<u64>(),
        period_ticks in 1_000u64..20_000,
        size_frac in 0.001f64..0.69,
    ) {
        let scale = TickScale::default();
        let horizon = scale.time(2_000.0).unwrap();
        let t = scale.duration(10.0).unwrap();
        let c = scale.duration(2.0).unwrap();
        let alice = poisson(scale, &[0.3], horizon, seed).remove(0);
        let size = TickDuration(((period_ticks as f64 * size_frac) as u64).max(1));
        let probes = ProbeStrategy::periodic(TickDuration(period_ticks), size, 0.3).unwrap();
        let cfg = PolicyConfig::accumulate_serve(scale, 2, t).unwrap();
        let quiet = run(&cfg, &[alice.clone(), ArrivalTrace::empty(UserId(1), scale.one_unit(), horizon)], horizon, 0).unwrap();
        let probed = run(&cfg, &[alice, probes.generate(UserId(1), horizon)], horizon, 0).unwrap();
        let a = estimate_acc_serve_genie(&quiet.batch_counts(UserId(0)), t, c, 1_000).unwrap();
        let b = estimate_acc_serve_genie(&probed.batch_counts(UserId(0)), t, c, 1_000).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn server_invariants(kind in kinds(), seed in any::<u64>(), r0 in 0.05f64..0.3, r1 in 0.05f64..0.3, r2 in 0.0f64..0.3) {
        let scale = TickScale::new(100).unwrap();
        let horizon = scale.time(1_500.0).unwrap();
        let rates: Vec<f64> = [r0, r1, r2].into_iter().filter(|&r| r > 0.01).collect();
        let res = run(&policy(kind, scale, rates.len()), &poisson(scale, &rates, horizon, seed), horizon, seed).unwrap();
        let mut spans: Vec<_> = res.jobs.iter().map(|j| (j.start.unwrap(), j.departure.unwrap())).collect();
        spans.sort();
        prop_assert!(spans.windows(2).all(|w| w[0].1 <= w[1].0));
        for j in &res.jobs {
            prop_assert!(j.start.unwrap() >= j.arrival);
            prop_assert_eq!(j.departure.unwrap(), j.start.unwrap() + j.size);
        }
        for u in 0..rates.len() {
            let d = res.departures(UserId(u));
            prop_assert!(d.windows(2).all(|w| w[0] < w[1]));
        }
        if kind == PolicyKind::AccumulateServe {
            prop_assert_eq!(queue_recursion_violation(&res.periods, scale.one_unit() * 4), None);
        }
    }

    #[test]
    fn tdma_departures_depend_only_on_own_arrivals(seed in any::<u64>(), other in 0.01f64..0.45) {
        let scale = TickScale::new(100).unwrap();
        let horizon = scale.time(1_000.0).unwrap();
        let mine = poisson(scale, &[0.3], horizon, seed).remove(0);
        let cfg = PolicyConfig::tdma(scale, 2).unwrap();
        let alone = run(&cfg, &[mine.clone(), ArrivalTrace::empty(UserId(1), scale.one_unit(), horizon)], horizon, 0).unwrap();
        let noisy_trace = generate(&PoissonSource::new(UserId(1), other, scale.one_unit(), seed ^ 1).unwrap(), horizon, scale);
        let shared = run(&cfg, &[mine, noisy_trace], horizon, 0).unwrap();
        prop_assert_eq!(alone.departures(UserId(0)), shared.departures(UserId(0)));
    }

    #[test]
    fn aggregate_delay_is_job_weighted(kind in kinds(), seed in any::<u64>()) {
        let scale = TickScale::new(100).unwrap();
        let horizon = scale.time(2_000.0).unwrap();
        let results: Vec<_> = (0..3)
            .map(|i| {
                let traces = poisson(scale, &[0.1, 0.3], horizon, seed.wrapping_add(i));
                warmup_trim(run(&policy(kind, scale, 2), &traces, horizon, i).unwrap(), scale.time(100.0).unwrap()).unwrap()
            })
            .collect();
        let est = empirical_delay(&results).unwrap();
        let jobs: Vec<f64> = (0..2)
            .map(|u| results.iter().map(|r| r.delay_sums(Some(UserId(u))).jobs as f64).sum())
            .collect();
        let weighted = (est.per_user[0].mean * jobs[0] + est.per_user[1].mean * jobs[1]) / (jobs[0] + jobs[1]);
        prop_assert!((weighted - est.aggregate.mean).abs() < 1e-9 * weighted);
    }
}

#[test]
fn ptdma_records_cumulative_rates() {
    let scale = TickScale::new(100).unwrap();
    let horizon = scale.time(3_000.0).unwrap();
    let traces = poisson(scale, &[0.2, 0.45], horizon, 11);
    let l = scale.duration(20.0).unwrap();
    let res = run(
        &PolicyConfig::proportional_tdma(scale, 2, l).unwrap(),
        &traces,
        horizon,
        11,
    )
    .unwrap();
    for rec in res.adaptations.iter().filter(|r| r.boundary <= horizon) {
        for (u, trace) in traces.iter().enumerate() {
            let issued = trace.arrival_times.iter().filter(|&&t| t <= rec.boundary).count() as f64;
            let expected = issued / scale.time_units(rec.boundary);
            assert!((rec.empirical_rates[u] - expected).abs() < 1e-12, "{rec:?}");
        }
    }
    let last = res.adaptations.iter().rev().find(|r| r.boundary <= horizon).unwrap();
    assert!((last.empirical_rates[0] - 0.2).abs() < 0.03);
    assert!((last.empirical_rates[1] - 0.45).abs() < 0.03);
}
