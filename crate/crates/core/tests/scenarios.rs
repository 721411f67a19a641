use dyskew::config::ScenarioConfig;
use dyskew::fraction::Fraction;
use dyskew::report::{self, apply_policy};
use dyskew::routing::Selector;
use dyskew::simulator::{run, run_traced, NetworkModel};
use dyskew::state_machine::LinkState;
use dyskew::types::{InstanceId, SimTime};
use dyskew::workload::{generate, CostDist, PayloadDist, Placement, WorkloadSpec};

fn hot(rows: u64, cost: u64) -> ScenarioConfig {
    ScenarioConfig::new(
        1,
        4,
        WorkloadSpec {
            total_rows: rows,
            placement: Placement::SingleHot {
                fraction: Fraction::one(),
            },
            cost: CostDist::Constant {
                cost: SimTime::from_ms(cost),
            },
            payload: PayloadDist::Constant { bytes: 1024 },
        },
    )
}

fn policy(c: &ScenarioConfig, name: &str) -> ScenarioConfig {
    apply_policy(c, name).unwrap()
}

fn names(list: &str) -> Vec<String> {
    report::parse_policy_list(list).unwrap()
}

#[test]
fn never_distribute_never_moves() {
    let r = run(&policy(&hot(200, 10), "never")).unwrap();
    assert_eq!(r.bytes_redistributed_total, 0);
    assert_eq!(r.makespan, SimTime::from_ms(2000));
    assert!(r
        .transition_log
        .iter()
        .all(|t| t.from == LinkState::Initial && t.to == LinkState::TerminalLocal));
}

#[test]
fn late_drains_then_commits() {
    let mut c = policy(&hot(400, 10), "late");
    c.batching.max_batch_rows = 20;
    let (r, trace) = run_traced(&c).unwrap();
    let hot_id = InstanceId::new(0, 0);
    let log: Vec<_> = r
        .transition_log
        .iter()
        .filter(|t| t.instance == hot_id)
        .collect();
    let states: Vec<LinkState> = log.iter().map(|t| t.to).collect();
    assert_eq!(
        states,
        vec![
            LinkState::DecidingLocal,
            LinkState::DrainingToDistributed,
            LinkState::TerminalDistributed
        ]
    );
    let switch = log[1].at;
    // Nothing the hot producer emitted before the switch left instance 0.
    assert!(trace
        .iter()
        .filter(|s| s.origin == 0 && s.worker != 0)
        .all(|s| s.start >= switch));
    assert!(r.rows_redistributed_total > 0);
    assert!(r.makespan < SimTime::from_ms(4000));
}

#[test]
fn guard_disables_before_any_remote_bytes() {
    let mut c = ScenarioConfig::new(2, 2, WorkloadSpec::heavy_rows(SimTime::from_ms(1000)));
    c.network.per_byte_cost = Fraction::new(20_000, 1 << 30);
    let r = run(&policy(&c, "early")).unwrap();
    assert_eq!(r.bytes_redistributed_total, 0);
    assert!(r
        .final_states
        .iter()
        .all(|&s| s == LinkState::TerminalDisabled));
    let total: u64 = generate(&c.workload, 4, 0)
        .unwrap()
        .iter()
        .flatten()
        .map(|r| r.payload_bytes)
        .sum();
    assert_eq!(total, 100 << 30);
}

#[test]
fn free_remote_rows_arrive_at_once() {
    let r = run(&policy(&hot(4, 60_000), "early")).unwrap();
    assert_eq!(r.makespan, SimTime::from_ms(60_000));
    let mut c = policy(&hot(4, 60_000), "early");
    c.network.per_row_overhead = SimTime::from_ms(7);
    // Three remote sends leave back to back on one channel.
    assert_eq!(run(&c).unwrap().makespan, SimTime::from_ms(60_021));
}

#[test]
fn slow_worker_gets_less_under_least_loaded() {
    let mut c = policy(&hot(120, 10), "early");
    c.strategy.selector = Selector::LeastLoaded;
    c.load_factors = Some(vec![
        Fraction::one(),
        Fraction::new(3, 1),
        Fraction::one(),
        Fraction::one(),
    ]);
    let r = run(&c).unwrap();
    let slow = &r.instances[1];
    let fast = &r.instances[2];
    assert!(slow.rows_processed < fast.rows_processed, "{r:?}");
}

#[test]
fn sweep_with_one_count_is_compare() {
    let c = hot(40, 100);
    let list = names("never,late,early");
    let a = report::compare(&c, &list).unwrap();
    let b = report::sweep(&c, &[1], &list).unwrap();
    assert_eq!(report::comparison_json(&a), report::comparison_json(&b));
}

#[test]
fn sweep_orders_by_count_then_policy() {
    let c = hot(40, 100);
    let cmp = report::sweep(&c, &[3, 1, 2], &names("late,never")).unwrap();
    let keys: Vec<(u32, &str)> = cmp
        .entries
        .iter()
        .map(|e| (e.nodes, e.policy.as_str()))
        .collect();
    assert_eq!(
        keys,
        vec![
            (3, "late"),
            (3, "never"),
            (1, "late"),
            (1, "never"),
            (2, "late"),
            (2, "never")
        ]
    );
    assert_eq!(cmp.entries[2].report.config.nodes, 1);
}

fn mixed_cost(seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(
        1,
        2,
        WorkloadSpec {
            total_rows: 3,
            placement: Placement::Uniform,
            cost: CostDist::Bimodal {
                low: SimTime::from_ms(1),
                high: SimTime::from_ms(100),
                p_high: Fraction::new(1, 2),
            },
            payload: PayloadDist::Constant { bytes: 10 },
        },
    );
    c.seed = seed;
    c.network = NetworkModel::default();
    c
}

/// Round-robin does not look at row cost, so with mixed costs eager
/// redistribution can pair two expensive rows that staying local would not.
#[test]
fn mixed_costs_can_defeat_dominance() {
    let found = (0..200).find(|&seed| {
        let c = mixed_cost(seed);
        run(&policy(&c, "early")).unwrap().makespan > run(&policy(&c, "never")).unwrap().makespan
    });
    let seed = found.expect("some seed pairs the expensive rows");
    let rows = generate(&mixed_cost(seed).workload, 2, seed).unwrap();
    let costs: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| r.iter().map(|row| row.cost.as_ms()).collect())
        .collect();
    assert_eq!(
        costs.iter().flatten().filter(|&&c| c == 100).count(),
        2,
        "{costs:?}"
    );
}

/// Same effect for self-skip: which rows land where changes with the
/// candidate set, and with mixed costs that can outweigh the extra sends.
#[test]
fn mixed_costs_can_favour_self_skip() {
    let found = (0..200u64).any(|seed| {
        let mut c = ScenarioConfig::new(
            2,
            2,
            WorkloadSpec {
                total_rows: 200,
                placement: Placement::Uniform,
                cost: CostDist::Uniform {
                    lo: SimTime::from_ms(1),
                    hi: SimTime::from_ms(60),
                },
                payload: PayloadDist::Constant { bytes: 100 },
            },
        );
        c.network.per_row_overhead = SimTime::from_ms(1);
        c.seed = seed;
        run(&policy(&c, "early_self_skip")).unwrap().makespan
            < run(&policy(&c, "early")).unwrap().makespan
    });
    assert!(found);
}
