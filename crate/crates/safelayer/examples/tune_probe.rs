//! Knob grid for the training balance.
use safelayer::conservative::{build_normal_table, posterior_upper};
use safelayer::navsim::*;

fn q_on(set: &safelayer::InternalTestSet, mlp: &safelayer::Mlp, xi: f64) -> (f64, f64, u32, u32) {
    let logits: Vec<Vec<f64>> = set
        .records()
        .iter()
        .map(|r| mlp.forward(&r.measurement).unwrap())
        .collect();
    let t = build_normal_table(set, &logits, 2, xi).unwrap();
    let u = posterior_upper(&t, &[0.5, 0.5]).unwrap();
    // members of each class (plus counts at the observed side)
    let m0 = t.plus[0][0] + t.plus[1][0];
    let m1 = t.plus[0][1] + t.plus[1][1];
    (u[0][1], u[1][1], m0, m1)
}

fn main() {
    let gen = WorldGen::default();
    let policy = GreedyPolicy::default();
    let train = collect_internal_test(&gen, &policy, 2048, 1).unwrap();
    let val = collect_internal_test(&gen, &policy, 4000, 2).unwrap();
    for clip in [0.05, 0.02, 0.01] {
        for tgw in [300.0, 1000.0, 3000.0] {
            for seed in [10u64, 20] {
                let cfg = TrainConfig {
                    steps: 600,
                    clip,
                    test_grad_weight: tgw,
                    ..TrainConfig::default()
                };
                let mlp = train_classifier(&gen, &policy, &train.set, &cfg, seed).unwrap();
                let (tq0, tq1, tm0, tm1) = q_on(&train.set, &mlp, 0.0);
                let (vq0, vq1, vm0, vm1) = q_on(&val.set, &mlp, 0.0);
                println!(
                    "clip {clip:>5} tgw {tgw:>6} seed {seed:>2}: train q=({tq0:.4},{tq1:.4}) sizes=({tm0},{tm1}) | val q=({vq0:.4},{vq1:.4}) sizes=({vm0},{vm1})"
                );
            }
        }
    }
}
