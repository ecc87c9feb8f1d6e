use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::env::{Dir, GridMap, PaintWorld, TreasureMaze, DIRS};
use crate::machines;
use crate::pdrm::{Configuration, Pdrm};

fn maze5() -> TreasureMaze {
    TreasureMaze::new(GridMap::parse(machines::MAZE5_MAP).unwrap(), 1, false, 40).unwrap()
}

fn cfg(m: &Pdrm, state: &str, stack: &[&str]) -> Configuration {
    let stack: Vec<_> = stack.iter().map(|s| m.symbol(s).unwrap()).collect();
    Configuration::new(m, m.state_id(state).unwrap(), &stack)
}

#[test]
fn maze_move_pushes_direction() {
    let env = maze5();
    let pdrm = machines::maze().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ps = ProductState {
        env: EnvState(0),
        config: cfg(&pdrm, "u0", &["Z"]),
    };
    let (next, r, done) = product_step(&env, &pdrm, &ps, 3, &mut rng).unwrap();
    assert_eq!(next.env, EnvState(1));
    assert_eq!(next.config, cfg(&pdrm, "u0", &["r", "Z"]));
    assert_eq!((r, done), (0.0, false));
}

#[test]
fn final_configuration_is_held() {
    let env = maze5();
    let pdrm = machines::maze().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ps = ProductState {
        env: EnvState(0),
        config: cfg(&pdrm, "u3", &["Z"]),
    };
    let product = Product::new(&env, &pdrm);
    assert!(product.is_final(&ps));
    let o = product.step(&ps, 1, &mut rng).unwrap();
    assert_eq!(o.next, ps);
    assert_eq!((o.reward, o.done), (0.0, true));
}

#[test]
fn wall_bump_in_return_phase_fails() {
    let env = maze5();
    let pdrm = machines::maze().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ps = ProductState {
        env: EnvState(0),
        config: cfg(&pdrm, "u1", &["u", "Z"]),
    };
    let o = Product::new(&env, &pdrm).step(&ps, 0, &mut rng).unwrap();
    assert_eq!(o.label, PropSet::singleton(0));
    assert_eq!(o.next.env, EnvState(0));
    assert_eq!(o.next.config, cfg(&pdrm, "u2", &["Z"]));
    assert_eq!((o.reward, o.done), (-1.0, true));
}

fn opposite(d: usize) -> usize {
    d ^ 1
}

/// Walks the shortest path to the treasure, then undoes the stack.
fn scripted_maze_policy<'a>(env: &'a TreasureMaze, pdrm: &'a Pdrm) -> impl FnMut(&ProductState<Configuration>, &mut ChaCha8Rng) -> usize + 'a {
    let u1 = pdrm.state_id("u1").unwrap();
    move |ps, _| {
        if ps.config.state == u1 {
            opposite(ps.config.top().unwrap().0 as usize)
        } else {
            let map = env.map();
            let path = map
                .shortest_path(ps.env.0 as usize, env.treasure_cells()[0])
                .unwrap();
            DIRS.iter().position(|&d| d == path[0]).unwrap()
        }
    }
}

#[test]
fn scripted_maze_rollout_succeeds() {
    let env = maze5();
    let pdrm = machines::maze().unwrap();
    let product = Product::new(&env, &pdrm);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut policy = scripted_maze_policy(&env, &pdrm);
    let r = rollout(&product, &mut policy, env.horizon(), &mut rng).unwrap();
    assert_eq!((r.ret, r.normalized), (1.0, 1.0));
    assert_eq!(r.trajectory.len(), 8);
    let _ = Dir::Up;
}

#[test]
fn random_paintworld_returns_are_non_positive() {
    let env = PaintWorld::new();
    let pdrm = machines::paintworld().unwrap();
    let product = Product::new(&env, &pdrm);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let mut policy = |_: &ProductState<Configuration>, rng: &mut ChaCha8Rng| rng.gen_range(0..5);
        let r = rollout(&product, &mut policy, 5, &mut rng).unwrap();
        assert!((-1.0..=0.0).contains(&r.normalized));
        assert!(r.ret < 0.0);
    }
}

#[test]
fn zero_horizon_rollout_is_empty() {
    let env = maze5();
    let pdrm = machines::maze().unwrap();
    let product = Product::new(&env, &pdrm);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = rollout(&product, &mut |_, _| 0, 0, &mut rng).unwrap();
    assert_eq!(r.ret, 0.0);
    assert!(r.trajectory.is_empty());
}

#[test]
fn paintworld_enumeration_is_small() {
    let env = PaintWorld::new();
    let pdrm = machines::paintworld().unwrap();
    let mdp = enumerate_bounded_product(&env, &pdrm, 5, 0.99, None, DEFAULT_STATE_CAP).unwrap();
    assert!(mdp.n_states() <= 300, "{}", mdp.n_states());
    assert!(!mdp.overflow_reachable());
    for node in &mdp.nodes {
        assert!(node.config.as_ref().unwrap().stack_len() <= 6);
    }
    assert_eq!(mdp.initial.len(), 5);
}

#[test]
fn empty_horizon_yields_initial_states() {
    let env = PaintWorld::new();
    let pdrm = machines::paintworld().unwrap();
    let mdp = enumerate_bounded_product(&env, &pdrm, 0, 0.99, None, DEFAULT_STATE_CAP).unwrap();
    assert_eq!(mdp.n_states(), 5);
    assert!(mdp.nodes.iter().all(|n| n.kind == NodeKind::Frontier));
}

const MAZE3: &str = "X..\n.#.\n..T\n";

#[test]
fn small_maze_matches_brute_force() {
    let env = TreasureMaze::new(GridMap::parse(MAZE3).unwrap(), 1, false, 8).unwrap();
    let pdrm = machines::maze().unwrap();
    let horizon = 8;
    let mdp = enumerate_bounded_product(&env, &pdrm, horizon, 0.9, None, DEFAULT_STATE_CAP).unwrap();
    assert!(!mdp.overflow_reachable());

    let product = Product::new(&env, &pdrm);
    let mut seen = HashSet::new();
    fn go(
        product: &Product<'_, Pdrm>,
        ps: ProductState<Configuration>,
        left: usize,
        seen: &mut HashSet<ProductState<Configuration>>,
    ) {
        seen.insert(ps.clone());
        if left == 0 || ps.config.terminal {
            return;
        }
        for a in 0..4 {
            let next = product.env.transitions(ps.env, a)[0].0;
            let o = product.step_to(&ps, a, next).unwrap();
            go(product, o.next, left - 1, seen);
        }
    }
    let (start, _) = product.start_from(EnvState(0), PropSet::EMPTY).unwrap();
    go(&product, start, horizon, &mut seen);
    assert_eq!(mdp.n_states(), seen.len());
    for node in &mdp.nodes {
        let ps = ProductState {
            env: node.env,
            config: node.config.clone().unwrap(),
        };
        assert!(seen.contains(&ps));
    }
}

#[test]
fn tight_stack_cap_overflows() {
    let env = TreasureMaze::new(GridMap::parse(MAZE3).unwrap(), 1, false, 8).unwrap();
    let pdrm = machines::maze().unwrap();
    let mdp = enumerate_bounded_product(&env, &pdrm, 6, 0.9, Some(3), DEFAULT_STATE_CAP).unwrap();
    let o = mdp.overflow.unwrap();
    assert_eq!(mdp.nodes[o].kind, NodeKind::Overflow);
    assert!(mdp.is_absorbing(o));
    assert_eq!(mdp.row(o, 0), &[(o as u32, 1.0, 0.0)]);
}

#[test]
fn explosion_guard_trips() {
    let env = maze5();
    let pdrm = machines::maze().unwrap();
    let err = enumerate_bounded_product(&env, &pdrm, 12, 0.9, None, 100).unwrap_err();
    assert_eq!(err, ProductError::ExplosionGuard { cap: 100 });
}

#[test]
fn rows_normalize_and_tsv_has_header() {
    let env = PaintWorld::new();
    let pdrm = machines::paintworld().unwrap();
    let mdp = enumerate_bounded_product(&env, &pdrm, 5, 0.99, None, DEFAULT_STATE_CAP).unwrap();
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions {
            let total: f64 = mdp.row(s, a).iter().map(|r| r.1).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
    let mut buf = Vec::new();
    mdp.write_tsv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("state\taction\tnext\tprobability\treward\n"));
}

#[test]
fn label_map_by_name() {
    let from: Vec<String> = ["b", "a", "z"].iter().map(|s| s.to_string()).collect();
    let to: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
    let m = LabelMap::new(&from, &to);
    assert_eq!(m.apply(PropSet::from_indices([0, 2])), PropSet::singleton(1));
}

#[test]
fn keys_follow_abstraction() {
    let env = maze5();
    let pdrm = machines::maze().unwrap();
    let product = Product::new(&env, &pdrm);
    let a = ProductState { env: EnvState(2), config: cfg(&pdrm, "u1", &["r", "u", "Z"]) };
    let b = ProductState { env: EnvState(2), config: cfg(&pdrm, "u1", &["r", "Z"]) };
    assert_eq!(product.key(&a, AbstractionSpec::TopK(1)), product.key(&b, AbstractionSpec::TopK(1)));
    assert_ne!(product.key(&a, AbstractionSpec::TopK(2)), product.key(&b, AbstractionSpec::TopK(2)));
    assert_ne!(product.key(&a, AbstractionSpec::Full), product.key(&b, AbstractionSpec::Full));
}

mod properties {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rollouts_stay_inside_enumeration(seed in 0u64..1_000_000) {
            let env = TreasureMaze::new(GridMap::parse(MAZE3).unwrap(), 1, false, 7).unwrap();
            let pdrm = machines::maze().unwrap();
            let mdp = enumerate_bounded_product(&env, &pdrm, 7, 0.9, None, DEFAULT_STATE_CAP).unwrap();
            let known: HashSet<(EnvState, Configuration)> = mdp
                .nodes
                .iter()
                .filter_map(|n| n.config.clone().map(|c| (n.env, c)))
                .collect();
            let product = Product::new(&env, &pdrm);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut policy = |_: &ProductState<Configuration>, rng: &mut ChaCha8Rng| rng.gen_range(0..4);
            let r = rollout(&product, &mut policy, 7, &mut rng).unwrap();
            for (ps, _, _) in &r.trajectory {
                prop_assert!(known.contains(&(ps.env, ps.config.clone())));
            }
            let last = r.final_state.unwrap();
            prop_assert!(known.contains(&(last.env, last.config)));
        }

        #[test]
        fn stack_length_respects_static_bound(seed in 0u64..1_000_000, steps in 0usize..12) {
            let env = PaintWorld::new();
            let pdrm = machines::paintworld().unwrap();
            let product = Product::new(&env, &pdrm);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut policy = |_: &ProductState<Configuration>, rng: &mut ChaCha8Rng| rng.gen_range(0..5);
            let r = rollout(&product, &mut policy, steps, &mut rng).unwrap();
            // the start label is one extra read
            let bound = default_stack_cap(&pdrm, r.trajectory.len() + 1).unwrap();
            for (ps, _, _) in &r.trajectory {
                prop_assert!(ps.config.stack_len() <= bound);
            }
        }

        #[test]
        fn deterministic_env_steps_are_deterministic(seed in 0u64..1000, a in 0usize..4) {
            let env = maze5();
            let pdrm = machines::maze().unwrap();
            let product = Product::new(&env, &pdrm);
            let (ps, _) = product.start_from(EnvState(0), PropSet::EMPTY).unwrap();
            let mut r1 = ChaCha8Rng::seed_from_u64(seed);
            let mut r2 = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            prop_assert_eq!(product.step(&ps, a, &mut r1).unwrap(), product.step(&ps, a, &mut r2).unwrap());
        }
    }
}
