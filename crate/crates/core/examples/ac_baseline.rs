//! Shared-policy actor-critic on a 3-agent environment; prints how often the
//! cumulative max episode reward rose. Usage: `ac_baseline [env-id] [steps]`.

use cadsim::learn::{run_actor_learner, Budget, LearnerConfig};
use cadsim::pomg::{default_registry, make_env};

fn main() {
    let reg = default_registry();
    let name = std::env::args().nth(1).unwrap_or("HomoNcomIndeFOIntrxMASS3CTwn3-v0".into());
    let steps: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let cfg = LearnerConfig::shared_policy_ac();
    let r = run_actor_learner(|| make_env(&reg, &name), &cfg, 0, Budget::Steps(steps)).unwrap();
    let mut incs = 0;
    for w in r.cumulative_max.windows(2) {
        if w[1] > w[0] {
            incs += 1;
        }
    }
    println!(
        "episodes={} steps={} {:.1}s increases={incs} success={:.2}",
        r.episodes.len(),
        r.total_steps,
        r.wall_clock_s,
        r.final_success_rate(100)
    );
    for e in r.episodes.iter().step_by((r.episodes.len() / 20).max(1)) {
        println!(
            "{:5} len={:3} R={:9.2} succ={} coll={:?}",
            e.episode,
            e.length,
            e.total_reward(),
            e.success,
            e.collisions.values().collect::<Vec<_>>()
        );
    }
}
