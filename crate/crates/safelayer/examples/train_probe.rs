//! Scratch probe for training dynamics (not shipped behavior).
use safelayer::conservative::{build_normal_table, posterior_upper};
use safelayer::navsim::*;

fn main() {
    let gen = WorldGen {
        width: 9,
        height: 9,
        hazard_density: 0.12,
        sensor_noise: 0.1,
        horizon: 3,
    };
    let policy = GreedyPolicy::default();
    let data = collect_internal_test(&gen, &policy, 512, 77).unwrap();
    println!("counts: {:?}", data.set.per_state_counts());
    for steps in [50, 100, 200, 400, 800] {
        let cfg = TrainConfig { steps, ..TrainConfig::default() };
        let mlp = train_classifier(&gen, &policy, &data.set, &cfg, 78).unwrap();
        let logits: Vec<Vec<f64>> = data
            .set
            .records()
            .iter()
            .map(|r| mlp.forward(&r.measurement).unwrap())
            .collect();
        let table = build_normal_table(&data.set, &logits, 2, 0.0).unwrap();
        let upper = posterior_upper(&table, &[0.5, 0.5]).unwrap();
        println!(
            "steps {steps}: plus={:?} totals={:?} q=({:.4},{:.4}) psafe=({:.4},{:.4})",
            table.plus, table.totals,
            upper[0][1], upper[1][1], upper[0][0], upper[1][0]
        );
    }
}
