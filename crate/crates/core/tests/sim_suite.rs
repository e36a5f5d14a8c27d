mod common;

use aoi_core::experiments::{generate_instance, ExperimentSpec};
use aoi_core::sim::{
    myopic_policy, policy_from_table, simulate, simulate_replications, NeverTransmit, Policy,
    SimOptions,
};
use aoi_core::{relative_value_iteration, Kernel, SolveOptions};

fn small_default_shape() -> ExperimentSpec {
    ExperimentSpec {
        aoi_cap: 5,
        dest_aoi_cap: 5,
        channel_states: 3,
        ..ExperimentSpec::default()
    }
}

#[test]
fn optimal_simulation_matches_theta() {
    let cfg = generate_instance::<f64>(&small_default_shape(), 1).unwrap();
    let kernel = Kernel::new(&cfg).unwrap();
    assert!(kernel.space().len() <= 100_000);
    let sol = relative_value_iteration(&kernel, &SolveOptions::default()).unwrap();
    let mut policy = policy_from_table(&cfg, sol.policy).unwrap();
    let m = simulate(&cfg, &mut policy, SimOptions::new(500_000, 3)).unwrap();
    let rel = (m.avg_weighted_cost - sol.value.theta).abs() / sol.value.theta;
    assert!(rel < 0.01, "{} vs {}", m.avg_weighted_cost, sol.value.theta);
    assert!((m.avg_weighted_cost - sol.value.theta).abs() < 4.0 * m.se_weighted_cost + 1e-3);
}

#[test]
fn myopic_is_never_better_than_optimal() {
    let spec = small_default_shape();
    for seed in 1..=3 {
        for beta in [0.2, 1.0, 3.0] {
            let cfg = generate_instance::<f64>(&spec, seed)
                .unwrap()
                .with_uniform_weight(beta)
                .unwrap();
            let sol =
                relative_value_iteration(&Kernel::new(&cfg).unwrap(), &SolveOptions::default())
                    .unwrap();
            let opts = SimOptions::new(50_000, seed);
            let opt = simulate(
                &cfg,
                &mut policy_from_table(&cfg, sol.policy).unwrap(),
                opts,
            )
            .unwrap();
            let my = simulate(&cfg, &mut myopic_policy(&cfg), opts).unwrap();
            let sigma = opt.se_weighted_cost.hypot(my.se_weighted_cost);
            assert!(
                opt.avg_weighted_cost <= my.avg_weighted_cost + 3.0 * sigma,
                "seed {seed} beta {beta}: {} > {}",
                opt.avg_weighted_cost,
                my.avg_weighted_cost
            );
        }
    }
}

#[test]
fn replications_are_ordered_and_reproducible() {
    let cfg = common::random_config(2, common::small_mixed_shape(1));
    let seeds = [5, 1, 9];
    let a = simulate_replications(&cfg, &seeds, 5_000, |_| myopic_policy(&cfg)).unwrap();
    let b = simulate_replications(&cfg, &seeds, 5_000, |_| myopic_policy(&cfg)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iter().map(|m| m.seed).collect::<Vec<_>>(), seeds);
    let single = simulate(&cfg, &mut myopic_policy(&cfg), SimOptions::new(5_000, 1)).unwrap();
    assert_eq!(a[1], single);
}

#[test]
fn never_transmit_pins_the_destination_at_its_cap() {
    let cfg = common::random_config(0, common::small_mixed_shape(0));
    let cap = cfg.dest_aoi_cap() as f64;
    let m = simulate(
        &cfg,
        &mut NeverTransmit,
        SimOptions::new(10_000, 0).with_burn_in(100),
    )
    .unwrap();
    assert_eq!(m.avg_dest_aoi, cap);
    assert_eq!(m.avg_total_energy(), 0.0);
    assert_eq!(m.avg_weighted_cost, cap);
}

#[test]
fn policies_only_pick_valid_actions() {
    let cfg = common::random_config(6, common::small_mixed_shape(3));
    let kernel = Kernel::new(&cfg).unwrap();
    let mut myopic = myopic_policy(&cfg);
    for s in 0..kernel.space().len() {
        let a = myopic.decide(&kernel.space().state(s));
        assert!(a < kernel.actions().len());
    }
}
