mod common;

use std::collections::BTreeMap;

use cadsim::learn::*;
use cadsim::pomg::{default_registry, make_env, AgentId, EnvError, MultiAgentEnv};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: &str = "HomoNcomIndeFOIntstMAGrid2C-v0";
const TOWN3: &str = "HomoNcomIndePOIntrxMASS3CTwn3-v0";
const TOWN3_SINGLE: &str = "HomoNcomIndePOIntrxSASS1CTwn3-v0";

fn maker(name: &'static str) -> impl Fn() -> Result<Box<dyn MultiAgentEnv>, EnvError> {
    move || make_env(&default_registry(), name)
}

fn tr(obs: Vec<f64>, action: usize, reward: f64, next_obs: Vec<f64>, done: bool) -> Transition {
    Transition { agent: AgentId::from("a"), obs, action, reward, next_obs, done }
}

// ---------------------------------------------------------------- Q-learning

#[test]
fn uniform_exploration_is_multinomial() {
    let q = QFunction::tabular(Discretizer::new(vec![(0.0, 1.0, 2)]), 9, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut counts = [0usize; 9];
    let n = 10_000;
    for _ in 0..n {
        counts[act_epsilon_greedy(&q, &[0.3], 1.0, &mut rng)] += 1;
    }
    for c in counts {
        let f = c as f64 / n as f64;
        assert!((f - 1.0 / 9.0).abs() < 0.02, "{counts:?}");
        assert!(common::within_binomial(c, n, 1.0 / 9.0, 4.0));
    }
}

#[test]
fn greedy_choice_and_targets() {
    let mut q = QFunction::tabular(Discretizer::new(vec![(0.0, 1.0, 1)]), 9, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(act_epsilon_greedy(&q, &[0.0], 0.0, &mut rng), 0);
    q.theta.values[..3].copy_from_slice(&[1.0, 9.0, 3.0]);
    assert_eq!(act_epsilon_greedy(&q, &[0.0], 0.0, &mut rng), 1);
    q.theta.values = vec![10.0; 9];
    assert_eq!(td_target(&q, &tr(vec![0.0], 0, 0.0, vec![0.0], false), 0.9), 9.0);
    assert_eq!(td_target(&q, &tr(vec![0.0], 0, 1.0, vec![0.0], true), 0.9), 1.0);
    assert_eq!(td_target(&q, &tr(vec![0.0], 0, 0.25, vec![0.0], false), 0.0), 0.25);
}

fn mlp_q_fixture() -> (QFunction, Vec<Transition>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut q = QFunction::mlp(3, 5, 4, 10, &mut rng);
    // move θ away from θ⁻ so the target network matters
    for p in q.theta.values.iter_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let batch = (0..6)
        .map(|k| {
            let o: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let o2: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            tr(o, k % 4, rng.random_range(-1.0..1.0), o2, k % 3 == 0)
        })
        .collect();
    (q, batch)
}

#[test]
fn q_loss_gradient_matches_finite_differences() {
    let (q, batch) = mlp_q_fixture();
    let refs: Vec<&Transition> = batch.iter().collect();
    let analytic = q_loss_gradient(&q, &refs, 0.9);
    let numeric = common::finite_difference(|th| q_loss(&q, th, &refs, 0.9), &q.theta.values, 1e-5);
    let err = common::max_relative_error(&analytic, &numeric);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn small_q_step_lowers_the_batch_loss() {
    let (mut q, batch) = mlp_q_fixture();
    let refs: Vec<&Transition> = batch.iter().collect();
    let before = q_loss(&q, &q.theta.values, &refs, 0.9);
    let v0 = q.theta.version;
    q_update(&mut q, &refs, 0.9, 1e-3).unwrap();
    assert!(q_loss(&q, &q.theta.values, &refs, 0.9) < before);
    assert_eq!(q.theta.version, v0 + 1);
    assert_eq!(q_update(&mut q, &[], 0.9, 1e-3), Err(LearnError::EmptyBatch));
}

// ------------------------------------------------------------ value iteration

/// Chain 0..=4 with actions left/right; entering state 4 pays 1 and ends.
fn chain() -> (Vec<Vec<usize>>, Vec<Vec<f64>>, Vec<bool>) {
    let n: usize = 5;
    let next: Vec<Vec<usize>> = (0..n).map(|s| vec![s.saturating_sub(1), (s + 1).min(n - 1)]).collect();
    let reward: Vec<Vec<f64>> =
        (0..n).map(|s| next[s].iter().map(|&s2| if s2 == n - 1 && s != n - 1 { 1.0 } else { 0.0 }).collect()).collect();
    let terminal = (0..n).map(|s| s == n - 1).collect();
    (next, reward, terminal)
}

#[test]
fn chain_values_match_independent_iteration() {
    let (next, reward, terminal) = chain();
    let game = StochasticGame::mdp(
        next.iter().map(|row| row.iter().map(|&s2| vec![(s2, 1.0)]).collect()).collect(),
        reward.clone(),
        terminal.clone(),
    );
    let br = best_response_value_iteration(&game, &vec![vec![1.0]; 5], 0.9, 1e-12, 10_000).unwrap();
    let oracle = common::value_iteration_oracle(&next, &reward, &terminal, 0.9);
    let sup = br.values.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(sup < 1e-6, "{:?} vs {oracle:?}", br.values);
    assert!(br.policy[..4].iter().all(|&a| a == 1));
}

const GAMES: [[[f64; 2]; 2]; 3] = [
    // prisoner's dilemma (row player)
    [[3.0, 0.0], [5.0, 1.0]],
    // matching pennies
    [[1.0, -1.0], [-1.0, 1.0]],
    // coordination
    [[2.0, 0.0], [0.0, 1.0]],
];

#[test]
fn matrix_best_responses_match_enumeration() {
    for (g, payoff) in GAMES.iter().enumerate() {
        for opp in [[0.5, 0.5], [0.9, 0.1], [0.2, 0.8], [0.0, 1.0]] {
            let game = StochasticGame::matrix(&payoff.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
            let br = best_response_value_iteration(&game, &[opp.to_vec(), vec![0.5, 0.5]], 0.5, 1e-12, 100).unwrap();
            let (v, a) = common::enumerate_best_response(payoff, opp);
            assert!((br.values[0] - v).abs() < 1e-9, "game {g} vs {opp:?}");
            assert_eq!(br.policy[0], a, "game {g} vs {opp:?}");
        }
    }
}

// ----------------------------------------------------------- policy gradient

#[test]
fn bandit_probability_climbs_to_certainty() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut policy = Policy::new(1, 4, 2, &mut rng);
    let obs = vec![1.0];
    let mut p_a = policy.probs(&obs)[0];
    let mut reached = None;
    for k in 0..500 {
        let trajectories: Vec<Vec<Transition>> = (0..8)
            .map(|_| {
                let a = policy.sample(&obs, &mut rng);
                vec![tr(obs.clone(), a, if a == 0 { 1.0 } else { 0.0 }, obs.clone(), true)]
            })
            .collect();
        let pulled_a = trajectories.iter().any(|t| t[0].action == 0);
        pg_update(&mut policy, &trajectories, 0.99, 0.5, false).unwrap();
        let next = policy.probs(&obs)[0];
        // the expected update only ever pushes towards the paying arm
        if pulled_a {
            assert!(next > p_a, "update {k}: {next} <= {p_a}");
        } else {
            assert_eq!(next, p_a);
        }
        p_a = next;
        if p_a > 0.99 && reached.is_none() {
            reached = Some(k + 1);
        }
    }
    assert!(reached.is_some(), "P(A) = {p_a} after 500 updates");
}

/// Three one-hot states, three actions, two short episodes.
fn pg_fixture() -> (Policy, Vec<Vec<Transition>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let policy = Policy::new(3, 4, 3, &mut rng);
    let s = |k: usize| (0..3).map(|i| if i == k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let trajs = vec![
        vec![tr(s(0), 1, 0.5, s(1), false), tr(s(1), 2, -0.2, s(2), false), tr(s(2), 0, 1.0, s(2), true)],
        vec![tr(s(1), 0, 0.3, s(2), false), tr(s(2), 2, -1.0, s(2), true)],
    ];
    (policy, trajs)
}

#[test]
fn policy_gradient_matches_finite_differences() {
    let (policy, trajs) = pg_fixture();
    for baseline in [false, true] {
        let analytic = pg_gradient(&policy, &trajs, 0.9, baseline);
        let numeric = common::finite_difference(
            |th| pg_surrogate(&policy, th, &trajs, 0.9, baseline),
            &policy.theta.values,
            1e-5,
        );
        let err = common::max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "baseline {baseline}: relative error {err}");
    }
}

#[test]
fn zero_rewards_do_not_move_the_policy() {
    let (mut policy, mut trajs) = pg_fixture();
    for t in trajs.iter_mut().flatten() {
        t.reward = 0.0;
    }
    let before = policy.theta.values.clone();
    pg_update(&mut policy, &trajs, 0.9, 0.1, false).unwrap();
    assert_eq!(policy.theta.values, before);
    assert_eq!(pg_update(&mut policy, &[], 0.9, 0.1, false), Err(LearnError::EmptyTrajectory));
}

// ------------------------------------------------------------- architectures

fn random_obs(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn shared_policy_acts_identically_for_everyone() {
    let env = make_env(&default_registry(), TOWN3).unwrap();
    let snap = initial_snapshot(env.as_ref(), &LearnerConfig::shared_policy_ac(), 5).unwrap();
    assert_eq!(snap.brains.len(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let o = random_obs(env.observation_dim(), &mut rng);
        let p0 = snap.brain_for(0).action_probs(&o, 0.1);
        for i in 1..3 {
            let pi = snap.brain_for(i).action_probs(&o, 0.1);
            assert!(p0.iter().zip(&pi).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        assert!((p0.iter().sum::<f64>() - 1.0).abs() < 1e-9 && p0.iter().all(|p| *p >= 0.0));
    }
}

fn small_q() -> LearnerConfig {
    LearnerConfig {
        model: ModelSpec::Mlp { hidden: 8 },
        n_workers: 1,
        rollout_len: 10,
        batch_size: 4,
        learning_starts: 4,
        inline: true,
        ..LearnerConfig::default()
    }
}

#[test]
fn independent_learners_keep_separate_parameters() {
    let report = run_actor_learner(maker(TOWN3), &small_q(), 3, Budget::Steps(60)).unwrap();
    let snap = report.final_params.unwrap();
    assert_eq!(snap.brains.len(), 3);
    assert_eq!(snap.param_of_agent, vec![0, 1, 2]);
    let thetas: Vec<&Vec<f64>> = snap
        .brains
        .iter()
        .map(|b| match b {
            Brain::Q(q) => &q.theta.values,
            Brain::Ac(_) => unreachable!(),
        })
        .collect();
    assert!(thetas[0] != thetas[1] && thetas[1] != thetas[2] && thetas[0] != thetas[2]);
    assert!(snap.brains.iter().all(|b| b.updates() > 0));
}

#[test]
fn centralized_equals_independent_with_one_agent() {
    for base in
        [small_q(), LearnerConfig { n_workers: 1, inline: true, rollout_len: 10, ..LearnerConfig::central_ac() }]
    {
        let ind = LearnerConfig { architecture: Architecture::IndependentDecentralized, ..base.clone() };
        let cen = LearnerConfig { architecture: Architecture::Centralized, ..base };
        let a = run_actor_learner(maker(TOWN3_SINGLE), &ind, 8, Budget::Steps(300)).unwrap();
        let b = run_actor_learner(maker(TOWN3_SINGLE), &cen, 8, Budget::Steps(300)).unwrap();
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.updates, b.updates);
        assert_eq!(a.final_params, b.final_params);
    }
}

#[test]
fn shared_parameter_blocks_stay_identical() {
    let config = LearnerConfig { architecture: Architecture::SharedParameters, ..small_q() };
    let snap = run_actor_learner(maker(TOWN3), &config, 2, Budget::Steps(80)).unwrap().final_params.unwrap();
    let blocks: Vec<&[f64]> = snap
        .brains
        .iter()
        .map(|b| match b {
            Brain::Q(q) => match &q.model {
                QModel::Mlp(net) => &q.theta.values[..net.hidden_block_len()],
                QModel::Tabular(_) => unreachable!(),
            },
            Brain::Ac(_) => unreachable!(),
        })
        .collect();
    assert_eq!(blocks.len(), 3);
    assert!(blocks.windows(2).all(|w| w[0] == w[1]));
    // the private output layers still differ
    let full: Vec<&Vec<f64>> = snap
        .brains
        .iter()
        .map(|b| match b {
            Brain::Q(q) => &q.theta.values,
            _ => unreachable!(),
        })
        .collect();
    assert_ne!(full[0], full[1]);
}

// ------------------------------------------------------------------- runtime

#[test]
fn zero_budget_is_an_empty_report() {
    for budget in [Budget::Episodes(0), Budget::Steps(0)] {
        let r = run_actor_learner(maker(GRID), &LearnerConfig::tabular_q(), 1, budget).unwrap();
        assert!(r.episodes.is_empty() && r.cumulative_mean.is_empty() && r.cumulative_max.is_empty());
        assert_eq!((r.updates, r.total_steps, r.rounds), (0, 0, 0));
    }
}

type Episode = (u32, BTreeMap<AgentId, f64>, bool);

/// The plain single-threaded loop: act, step, store, learn, repeat.
fn synchronous_tabular_q(config: &LearnerConfig, seed: u64, steps: u64) -> (Vec<Episode>, Vec<Vec<f64>>) {
    let mut env = make_env(&default_registry(), GRID).unwrap();
    let agents = env.agent_ids();
    let grid = env.tabular_grid().unwrap();
    let mut qs: Vec<QFunction> = agents
        .iter()
        .map(|_| QFunction::tabular(Discretizer::new(grid.clone()), env.num_actions(), config.target_sync))
        .collect();
    let mut buffers: Vec<ReplayBuffer> =
        agents.iter().map(|_| ReplayBuffer::new(config.replay_capacity, false)).collect();
    let mut learner_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let mut episodes = Vec::new();
    let mut obs = None;
    let (mut done, mut len, mut ret, mut coll, mut reached) = (vec![], 0u32, vec![], vec![], vec![]);
    for t in 0..steps {
        let epsilon = config.epsilon.at(t as f64 / steps as f64);
        let o: BTreeMap<AgentId, Vec<f64>> = match obs.take() {
            Some(o) => o,
            None => {
                let o = env.reset(rng.random()).unwrap();
                (done, len, ret, coll, reached) = (vec![false; 2], 0, vec![0.0; 2], vec![0u32; 2], vec![false; 2]);
                o
            }
        };
        let mut actions = BTreeMap::new();
        for (i, id) in agents.iter().enumerate() {
            if !done[i] {
                actions.insert(id.clone(), act_epsilon_greedy(&qs[i], &o[id], epsilon, &mut rng));
            }
        }
        let r = env.step(&actions).unwrap();
        len += 1;
        let mut fresh = [0; 2];
        for (i, id) in agents.iter().enumerate() {
            let Some(&a) = actions.get(id) else { continue };
            buffers[i].push(Transition {
                agent: id.clone(),
                obs: o[id].clone(),
                action: a,
                reward: r.rewards[id],
                next_obs: r.observations[id].clone(),
                done: r.dones[id],
            });
            fresh[i] += 1;
            ret[i] += r.rewards[id];
            coll[i] += r.info[id].collisions;
            reached[i] |= r.info[id].reached_goal;
            done[i] = r.dones[id];
        }
        for i in 0..2 {
            for _ in 0..fresh[i] {
                if buffers[i].len() >= config.learning_starts {
                    let batch = buffers[i].sample(config.batch_size, &mut learner_rng);
                    q_update(&mut qs[i], &batch, config.gamma, config.lr).unwrap();
                }
            }
        }
        if r.all_done {
            let success = coll.iter().all(|&c| c == 0) && reached.iter().all(|&x| x);
            episodes.push((len, agents.iter().cloned().zip(ret.iter().copied()).collect(), success));
        } else {
            obs = Some(r.observations);
        }
    }
    (episodes, qs.into_iter().map(|q| q.theta.values).collect())
}

#[test]
fn degenerate_decoupling_is_the_synchronous_loop() {
    let config =
        LearnerConfig { rollout_len: 1, refresh_interval: 1, n_workers: 1, inline: true, ..LearnerConfig::tabular_q() };
    let steps = 3000;
    let report = run_actor_learner(maker(GRID), &config, 17, Budget::Steps(steps)).unwrap();
    let (episodes, tables) = synchronous_tabular_q(&config, 17, steps);
    let got: Vec<_> = report.episodes.iter().map(|e| (e.length, e.rewards.clone(), e.success)).collect();
    assert!(episodes.len() > 50);
    assert_eq!(got, episodes);
    let params: Vec<Vec<f64>> = report
        .final_params
        .unwrap()
        .brains
        .into_iter()
        .map(|b| match b {
            Brain::Q(q) => q.theta.values,
            Brain::Ac(_) => unreachable!(),
        })
        .collect();
    assert_eq!(params, tables);
}

#[test]
fn threads_and_inline_agree() {
    for config in [
        LearnerConfig { n_workers: 3, ..LearnerConfig::tabular_q() },
        LearnerConfig { n_workers: 2, rollout_len: 20, ..LearnerConfig::shared_policy_ac() },
    ] {
        let threaded = LearnerConfig { inline: false, ..config.clone() };
        let inline = LearnerConfig { inline: true, ..config };
        let a = run_actor_learner(maker(GRID), &threaded, 4, Budget::Steps(2000)).unwrap();
        let b = run_actor_learner(maker(GRID), &inline, 4, Budget::Steps(2000)).unwrap();
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.worker_versions, b.worker_versions);
        assert_eq!(a.final_params, b.final_params);
    }
}

#[test]
fn steps_budget_is_spent_exactly() {
    let config = LearnerConfig { n_workers: 3, rollout_len: 7, ..LearnerConfig::tabular_q() };
    let r = run_actor_learner(maker(GRID), &config, 0, Budget::Steps(1000)).unwrap();
    assert_eq!(r.total_steps, 1000);
    let r = run_actor_learner(maker(GRID), &config, 0, Budget::Episodes(37)).unwrap();
    assert_eq!(r.episodes.len(), 37);
    assert!(r.episodes.iter().enumerate().all(|(k, e)| e.episode == k));
}

#[test]
fn report_series_are_coherent() {
    let r = run_actor_learner(maker(GRID), &LearnerConfig::tabular_q(), 6, Budget::Episodes(400)).unwrap();
    let n = r.episodes.len();
    assert_eq!((r.cumulative_mean.len(), r.cumulative_max.len()), (n, n));
    let mut sum = 0.0;
    for (k, e) in r.episodes.iter().enumerate() {
        sum += e.rewards.values().sum::<f64>();
        assert!((r.cumulative_mean[k] - sum / (k + 1) as f64).abs() < 1e-9);
        let direct = r.episodes[..=k].iter().map(|e| e.rewards.values().sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.cumulative_max[k], direct);
    }
    for (agent, series) in &r.agent_rewards {
        assert_eq!(series.len(), n);
        assert!(series.iter().zip(&r.episodes).all(|(x, e)| *x == e.rewards[agent]));
    }
}

#[test]
fn shared_policy_agents_estimate_the_same_objective() {
    // car1 and car2 face mirror-image roads; one policy must give both the
    // same expected return
    let config = LearnerConfig { architecture: Architecture::SharedPolicy, ..LearnerConfig::tabular_q() };
    let r = run_actor_learner(maker(GRID), &config, 12, Budget::Episodes(4000)).unwrap();
    let tail = |a: &str| r.agent_rewards[&AgentId::from(a)][2000..].to_vec();
    let (x, y) = (tail("car1"), tail("car2"));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let se = ((var(&x) + var(&y)) / x.len() as f64).sqrt();
    assert!((mean(&x) - mean(&y)).abs() < 4.0 * se + 1e-9, "{} vs {} (se {se})", mean(&x), mean(&y));
}

// ---------------------------------------------------------------- checkpoint

#[test]
fn checkpoints_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (name, config) in [(GRID, LearnerConfig::tabular_q()), (TOWN3, LearnerConfig::central_ac()), (TOWN3, small_q())]
    {
        let env = make_env(&default_registry(), name).unwrap();
        let snap = initial_snapshot(env.as_ref(), &config, 9).unwrap();
        let path = dir.path().join("ck.bin");
        let hash = config_hash(name, &config);
        save_checkpoint(&path, &snap, name, &hash).unwrap();
        let (header, loaded) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, snap);
        assert_eq!((header.env.as_str(), header.config_hash.as_str()), (name, hash.as_str()));
        assert_eq!(header.format, CHECKPOINT_FORMAT);
    }
    let bogus = dir.path().join("bogus.bin");
    std::fs::write(&bogus, b"not a checkpoint").unwrap();
    assert!(matches!(load_checkpoint(&bogus), Err(LearnError::BadCheckpoint(_))));
}

#[test]
fn evaluation_rejects_mismatched_parameters() {
    let grid = make_env(&default_registry(), GRID).unwrap();
    let snap = initial_snapshot(grid.as_ref(), &LearnerConfig::tabular_q(), 0).unwrap();
    let mut town = make_env(&default_registry(), TOWN3).unwrap();
    assert!(matches!(evaluate(&snap, town.as_mut(), 1, 0), Err(LearnError::ShapeMismatch(_))));
}

// -------------------------------------------------------------- properties

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn replay_keeps_the_most_recent(cap in 1usize..50, k in 0usize..200, n in 1usize..60, seed in any::<u64>()) {
        let mut buf = ReplayBuffer::new(cap, false);
        for i in 0..k {
            buf.push(tr(vec![i as f64], 0, 0.0, vec![], false));
        }
        prop_assert_eq!(buf.len(), k.min(cap));
        let kept: Vec<f64> = buf.iter().map(|t| t.obs[0]).collect();
        let expect: Vec<f64> = (k.saturating_sub(cap)..k).map(|i| i as f64).collect();
        prop_assert_eq!(kept, expect);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = buf.sample_indices(n, &mut rng);
        prop_assert_eq!(idx.len(), n.min(buf.len()));
        idx.sort();
        idx.dedup();
        prop_assert_eq!(idx.len(), n.min(buf.len()));
    }

    #[test]
    fn versions_only_grow(seed in 0u64..200, refresh in 1u64..5, workers in 1usize..4) {
        let config = LearnerConfig { refresh_interval: refresh, n_workers: workers, rollout_len: 5, inline: true, ..LearnerConfig::tabular_q() };
        let r = run_actor_learner(maker(GRID), &config, seed, Budget::Steps(300)).unwrap();
        prop_assert_eq!(r.worker_versions.len() as u64, r.rounds);
        for w in 0..workers {
            let seen: Vec<u64> = r.worker_versions.iter().map(|v| v[w]).collect();
            prop_assert!(seen.windows(2).all(|p| p[0] <= p[1]));
            for (round, v) in seen.iter().enumerate() {
                // never ahead of the learner, never more than one refresh behind
                prop_assert!(*v <= round as u64);
                prop_assert!((round as u64) - v < refresh);
            }
        }
    }

    #[test]
    fn training_is_a_function_of_the_seed(seed in 0u64..1000) {
        let config = LearnerConfig { n_workers: 2, ..LearnerConfig::tabular_q() };
        let a = run_actor_learner(maker(GRID), &config, seed, Budget::Steps(400)).unwrap();
        let b = run_actor_learner(maker(GRID), &config, seed, Budget::Steps(400)).unwrap();
        prop_assert_eq!(a.episodes, b.episodes);
        prop_assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn epsilon_schedule_is_monotone(start in 0.0..=1.0f64, frac in 0.0..1.0f64, p in prop::collection::vec(0.0..1.5f64, 2..20)) {
        let e = EpsilonSchedule { start, end: start * 0.3, fraction: frac };
        let mut p = p;
        p.sort_by(f64::total_cmp);
        let values: Vec<f64> = p.iter().map(|x| e.at(*x)).collect();
        prop_assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        prop_assert!(values.iter().all(|v| *v >= e.end - 1e-15 && *v <= e.start + 1e-15));
    }
}
