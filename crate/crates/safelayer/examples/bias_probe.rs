//! Probe the posterior-vs-bias curve on a validation set.
use safelayer::classifier::{apply_bias, BiasVector};
use safelayer::conservative::{build_normal_table, posterior_upper};
use safelayer::navsim::*;

fn main() {
    let gen = WorldGen::default();
    let policy = GreedyPolicy::default();
    let train = collect_internal_test(&gen, &policy, 2048, 4242 ^ 0x11).unwrap();
    let cfg = TrainConfig { steps: 600, ..TrainConfig::default() };
    let mlp = train_classifier(&gen, &policy, &train.set, &cfg, 4242 ^ 0x22).unwrap();
    let val = collect_internal_test(&gen, &policy, 8000, 4242 ^ 0x33).unwrap();
    for xi in [0.0, 0.05] {
        println!("=== xi {xi}");
        for v in [-3.0, -2.0, -1.0, -0.5, -0.2, 0.0, 0.2, 0.5, 1.0, 2.0, 3.0] {
            let bias = BiasVector { v: vec![v, 0.0] };
            let logits: Vec<Vec<f64>> = val
                .set
                .records()
                .iter()
                .map(|r| {
                    let mut l = mlp.forward(&r.measurement).unwrap();
                    apply_bias(&mut l, &bias);
                    l
                })
                .collect();
            let t = build_normal_table(&val.set, &logits, 2, xi).unwrap();
            let u = posterior_upper(&t, &[0.5, 0.5]).unwrap();
            println!(
                "v {v:>5}: counts plus=[[{},{}],[{},{}]] minus=[[{},{}],[{},{}]] q0 {:.5} q1 {:.5}",
                t.plus[0][0], t.plus[0][1], t.plus[1][0], t.plus[1][1],
                t.minus[0][0], t.minus[0][1], t.minus[1][0], t.minus[1][1],
                u[0][1], u[1][1]
            );
        }
    }
}
