//! Tabular Q on the 2-agent grid intersection for five seeds; prints the
//! final success rate of each. Usage: `grid_baseline [episodes]`.

use cadsim::learn::{run_actor_learner, Budget, LearnerConfig};
use cadsim::pomg::{default_registry, make_env};

fn main() {
    let reg = default_registry();
    let episodes: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    for seed in 0..5u64 {
        let cfg = LearnerConfig::tabular_q();
        let r = run_actor_learner(
            || make_env(&reg, "HomoNcomIndeFOIntstMAGrid2C-v0"),
            &cfg,
            seed,
            Budget::Episodes(episodes),
        )
        .unwrap();
        println!(
            "seed {seed}: success(last100)={:.2} steps={} updates={} {:.1}s mean_last={:.1}",
            r.final_success_rate(100),
            r.total_steps,
            r.updates,
            r.wall_clock_s,
            r.episodes.iter().rev().take(100).map(|e| e.total_reward()).sum::<f64>() / 100.0
        );
    }
}
