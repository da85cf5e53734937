//! Margin landscape of the trained classifier, by record type.
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
    // margin = logit_safe_class(1) - logit(0); stay = one-hot slot 14
    let mut buckets: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
    for r in val.set.records() {
        let l = mlp.forward(&r.measurement).unwrap();
        let margin = l[1] - l[0];
        let is_stay = r.measurement[14] == 1.0;
        let key = match (is_stay, r.label) {
            (true, 0) => "stay/safe",
            (true, 1) => "stay/unsafe",
            (false, 0) => "move/safe",
            (false, 1) => "move/unsafe",
            _ => unreachable!(),
        };
        buckets.entry(key).or_default().push(margin);
    }
    for (k, mut v) in buckets {
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p) as usize];
        println!(
            "{k:>12}: n {:>5} p5 {:>8.2} p25 {:>8.2} p50 {:>8.2} p75 {:>8.2} p95 {:>8.2}",
            v.len(), q(0.05), q(0.25), q(0.5), q(0.75), q(0.95)
        );
    }
}
