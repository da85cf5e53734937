use safelayer::prodplan::*;
use std::time::Instant;

fn main() {
    let cfg = ProdplanConfig { seeds: 6, ..ProdplanConfig::default() };
    let t0 = Instant::now();
    let results = run_prodplan(&cfg, 1000).unwrap();
    println!("{} seeds in {:?}", results.len(), t0.elapsed());
    let fw: Vec<_> = results.iter().map(|r| r.framework.clone()).collect();
    let mv: Vec<_> = results.iter().map(|r| r.mean_var.clone()).collect();
    let ts: Vec<_> = results.iter().map(|r| r.twostage.clone()).collect();
    println!("framework (r_t, mean_rev, viol_all, viol_evaluated):");
    for row in aggregate(&fw) { println!("  {:>7} {:>9.1} {:.5} {:.5}", row.0, row.1, row.2, row.3); }
    println!("mean_var (coeff, mean_rev, viol_all, _):");
    for row in aggregate(&mv) { println!("  {:>7} {:>9.1} {:.5}", row.0, row.1, row.2); }
    println!("twostage (coeff, mean_rev, viol_all, _):");
    for row in aggregate(&ts) { println!("  {:>7} {:>9.1} {:.5}", row.0, row.1, row.2); }
}
