//! Bias curve with a converged classifier.
use safelayer::classifier::{apply_bias, BiasVector};
use safelayer::conservative::{build_normal_table, posterior_upper};
use safelayer::navsim::*;

fn main() {
    let gen = WorldGen::default();
    let policy = GreedyPolicy::default();
    let train = collect_internal_test(&gen, &policy, 2048, 1).unwrap();
    let cfg = TrainConfig {
        steps: 1500,
        clip: 0.05,
        test_grad_weight: 3000.0,
        ..TrainConfig::default()
    };
    let mlp = train_classifier(&gen, &policy, &train.set, &cfg, 20).unwrap();
    let val = collect_internal_test(&gen, &policy, 8000, 2).unwrap();
    // class 1 is the safe class per the tuning probe
    for v in [-6.0, -4.0, -3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0] {
        let bias = BiasVector { v: vec![0.0, v] };
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
        for xi in [0.0, 0.05] {
            let t = build_normal_table(&val.set, &logits, 2, xi).unwrap();
            let u = posterior_upper(&t, &[0.5, 0.5]).unwrap();
            let members1 = t.plus[0][1] + t.plus[1][1];
            print!(
                "  xi {xi}: q1 {:.5} members {} unsafe_in {}",
                u[1][1], members1, t.plus[1][1]
            );
        }
        println!("   <- v {v}");
    }
}
