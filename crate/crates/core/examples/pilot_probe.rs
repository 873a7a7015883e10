//! Quick look at the desk-scale pilot: entropy gap and trend shapes for
//! both scenarios.
//!
//! Run: cargo run --release -p clickcascade-core --example pilot_probe

use clickcascade_core::analysis::{
    bootstrap_final_entropy, feature_frequency_series, first_ranked_series, polyfit_r2,
};
use clickcascade_core::cascade::{
    run_experiment, DecisionModel, PureKeepRule, Scenario, SimConfig,
};
use clickcascade_core::netgen::Topology;

fn pilot_config(scenario: Scenario) -> SimConfig {
    SimConfig {
        n_agents: 500,
        total_steps: 500,
        round_length: 5,
        n_features_per_package: 7,
        feature_universe: 50,
        mutation_rate: 3.0 / 7.0,
        infection_rate: 0.5,
        ab_threshold: 0.95,
        scenario,
        pure_keep_rule: PureKeepRule::Random,
        graph: Topology::BarabasiAlbert { m: 3 },
        master_seed: 20240501,
        n_replicas: 50,
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let scale_factor: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let model_seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(271828);
    let master_seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20240501);

    let mut model = DecisionModel::synthetic(50, 7, model_seed);
    for w in &mut model.weights {
        *w *= scale_factor;
    }
    println!("scale x{scale_factor}, model seed {model_seed}, master seed {master_seed}");

    for scenario in [Scenario::Pure, Scenario::AbLed] {
        let mut config = pilot_config(scenario);
        config.master_seed = master_seed;
        let results = run_experiment(&config, &model).unwrap();

        let boot = bootstrap_final_entropy(&results, 50, 2000, 99).unwrap();
        let series = feature_frequency_series(&results, 50).unwrap();
        let trace = first_ranked_series(&series);
        let linear = polyfit_r2(&trace, 1).unwrap();
        let cubic = polyfit_r2(&trace, 3).unwrap();

        let promotions: usize = results
            .iter()
            .flat_map(|r| &r.round_logs)
            .filter(|l| l.decision.as_str() == "promote_b")
            .count();

        println!(
            "{scenario:?}: entropy {:.4} ci [{:.4}, {:.4}] | R2 lin {:.4} cub {:.4} d {:.4} | promo {promotions}",
            boot.point, boot.ci_low, boot.ci_high,
            linear.r_squared, cubic.r_squared, cubic.r_squared - linear.r_squared
        );
        let snapshot: Vec<String> = (0..=10)
            .map(|i| format!("{:.2}", trace[(i * (trace.len() - 1)) / 10]))
            .collect();
        println!("  trace deciles: {}", snapshot.join(" "));
    }
}
