use safelayer::classifier::bias_correct_logits;
use safelayer::prodplan::*;

fn main() {
    let cfg = ProdplanConfig::default();
    let seg = cfg.segment;
    let instance = PlanningInstance::generate(1000, 24 + 4 * seg).unwrap();
    let train = LAG_WINDOW..LAG_WINDOW + seg;
    let it_train = LAG_WINDOW + seg..LAG_WINDOW + 2 * seg;
    let it_val = LAG_WINDOW + 2 * seg..LAG_WINDOW + 3 * seg;
    let it_train_sets: Vec<ProductTestSet> = (0..N_PRODUCTS)
        .map(|p| internal_test_windows(&instance, p, it_train.clone()).unwrap())
        .collect();
    let predictor = train_framework_predictor(&instance, train, &it_train_sets, &cfg.predictor, 1000).unwrap();
    for p in 0..2 {
        let set = internal_test_windows(&instance, p, it_val.clone()).unwrap();
        let logits: Vec<Vec<f64>> = set.set.records().iter().map(|r| {
            let (_, l) = predictor.predict(p, &r.measurement).unwrap();
            // records store normalized windows; predict normalizes again!
            l.to_vec()
        }).collect();
        let mut margins: Vec<f64> = logits.iter().map(|l| l[0] - l[1]).collect();
        margins.sort_by(f64::total_cmp);
        let q = |x: f64| margins[((margins.len() - 1) as f64 * x) as usize];
        println!("product {p}: margin p5 {:.3} p25 {:.3} p50 {:.3} p75 {:.3} p95 {:.3}", q(0.05), q(0.25), q(0.5), q(0.75), q(0.95));
        for r_t in [0.1, 0.01, 0.001] {
            let c = bias_correct_logits(&logits, &set.set, cfg.xi_eval, &[0.5, 0.5], 1, r_t, cfg.bias_unit_step, 4000).unwrap();
            println!("  r_t {r_t}: safe_class {} v {:?} q {:.5} bracketed {}", c.safe_class, c.bias.v, c.posterior, c.bracketed);
        }
    }
}
