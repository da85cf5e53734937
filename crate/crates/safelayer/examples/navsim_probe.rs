//! Dress rehearsal for the trained-framework violation run.
use safelayer::navsim::*;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let cfg = NavsimConfig {
        n_train: 2048,
        n_val: 8000,
        episodes: 50,
        steps_per_episode: 200,
        min_chance_decisions: 20_000,
        train: TrainConfig::default(),
        ..NavsimConfig::default()
    };
    let (rows, bare) = run_navsim_experiment(&cfg, 4242).unwrap();
    println!("collect+train+eval took {:?}", t0.elapsed());
    println!(
        "bare: reward {:.1} collisions {} decisions {}",
        bare.reward, bare.collisions, bare.decisions
    );
    for r in rows {
        println!(
            "r_t {:>7}: viol_rate {:.5} (viol {} / chance {}), default {}/{}, reward {:.1}, collisions {}, corrected_q {:.5} bracketed {}",
            r.r_t,
            r.violation_rate,
            r.metrics.violations,
            r.metrics.chance_evaluated(),
            r.metrics.default_used,
            r.metrics.decisions,
            r.metrics.reward,
            r.metrics.collisions,
            r.corrected_posterior,
            r.bias_bracketed
        );
    }
}
