use super::*;
use crate::machines;
use crate::pdrm::Pdrm;
use rand::SeedableRng;

fn all_envs() -> Vec<Box<dyn LabeledMdp>> {
    let maze = TreasureMaze::new(GridMap::parse(machines::MAZE5_MAP).unwrap(), 1, false, 30).unwrap();
    let multi = TreasureMaze::new(GridMap::parse(machines::MULTIMAZE10_MAP).unwrap(), 2, true, 80).unwrap();
    let letter = LetterEnv::new(&LetterEnvConfig::default()).unwrap();
    let deliver = DeliverWorld::new(DeliverConfig {
        map: GridMap::parse(machines::DELIVER10_MAP).unwrap(),
        n_types: 4,
        n_sequences: 8,
        train_sequences: vec![0, 1, 2, 3],
        eval_sequences: vec![4, 5, 6, 7],
        horizon: 100,
    })
    .unwrap();
    vec![
        Box::new(maze),
        Box::new(multi),
        Box::new(letter),
        Box::new(deliver),
        Box::new(PaintWorld::new()),
        Box::new(ChainMdp::new(4, 10)),
        Box::new(SymbolEmitter::new(&["a", "b"], 10)),
    ]
}

#[test]
fn distributions_normalize_and_labels_are_pure() {
    for env in all_envs() {
        for s in 0..env.n_states() {
            let s = EnvState(s as u32);
            for a in 0..env.n_actions() {
                let dist = env.transitions(s, a);
                let total: f64 = dist.iter().map(|(_, p)| p).sum();
                assert!((total - 1.0).abs() < 1e-9, "{} {s:?} {a}", env.name());
                for &(next, _) in &dist {
                    assert!((next.0 as usize) < env.n_states());
                    assert_eq!(env.label(s, a, next), env.label(s, a, next));
                }
            }
        }
        for starts in [env.initial_distribution(), env.eval_distribution()] {
            let total: f64 = starts.iter().map(|s| s.2).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn sampling_follows_the_model() {
    let env = LetterEnv::new(&LetterEnvConfig::default()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    // standing next to the A cell at (0,3), moving right
    let s = env.encode(3, 0);
    let mut flipped = 0;
    for _ in 0..10_000 {
        let next = env.sample_next(s, 3, &mut rng);
        assert!(env.transitions(s, 3).iter().any(|&(n, _)| n == next));
        flipped += usize::from(env.decode(next).1 == 1);
    }
    assert!((flipped as f64 / 10_000.0 - 0.5).abs() < 0.02);
}

const TINY_MAZE: &str = "..\nXT\n";

#[test]
fn maze_labels() {
    let env = TreasureMaze::new(GridMap::parse(TINY_MAZE).unwrap(), 1, false, 10).unwrap();
    let p = |names: &[&str]| PropSet::from_names(names, env.props()).unwrap();
    let (up, down, right) = (0, 1, 3);
    let at = |cell: usize| EnvState(cell as u32);
    // right into the treasure
    let next = env.transitions(at(2), right)[0].0;
    assert_eq!(next, at(3));
    assert_eq!(env.label(at(2), right, next), p(&["r", "t"]));
    // up into the boundary: no move, direction only
    let next = env.transitions(at(0), up)[0].0;
    assert_eq!(next, at(0));
    assert_eq!(env.label(at(0), up, next), p(&["u"]));
    // down into the exit
    let next = env.transitions(at(0), down)[0].0;
    assert_eq!(env.label(at(0), down, next), p(&["d", "x"]));
    // staying on the treasure does not re-emit t
    let next = env.transitions(at(3), right)[0].0;
    assert_eq!(env.label(at(3), right, next), p(&["r"]));
}

#[test]
fn maze_requires_reachable_treasure() {
    let err = TreasureMaze::new(GridMap::parse("X#T\n.#.\n").unwrap(), 1, false, 10).unwrap_err();
    assert!(matches!(err, EnvError::BadConfig(_)));
    let err = TreasureMaze::new(GridMap::parse("X..\n").unwrap(), 1, false, 10).unwrap_err();
    assert!(matches!(err, EnvError::BadConfig(_)));
}

#[test]
fn shipped_maps_load() {
    for (text, n, multi) in [
        (machines::MAZE5_MAP, 1, false),
        (machines::MAZE10_MAP, 1, false),
        (machines::MAZE20_MAP, 1, false),
        (machines::MULTIMAZE10_MAP, 2, true),
        (machines::MULTIMAZE20_MAP, 2, true),
    ] {
        TreasureMaze::new(GridMap::parse(text).unwrap(), n, multi, 100).unwrap();
    }
}

#[test]
fn ragged_map_rejected() {
    let err = GridMap::parse("...\n..\n").unwrap_err();
    assert!(matches!(err, EnvError::Map { line: 2, .. }));
}

#[test]
fn shortest_path_on_maze5() {
    let map = GridMap::parse(machines::MAZE5_MAP).unwrap();
    let path = map.shortest_path(map.single('X').unwrap(), map.single('T').unwrap()).unwrap();
    assert_eq!(path.len(), 4);
}

#[test]
fn multimaze_collects_after_safe() {
    let env = TreasureMaze::new(GridMap::parse("TXHT\n").unwrap(), 2, true, 20).unwrap();
    let p = |names: &[&str]| PropSet::from_names(names, env.props()).unwrap();
    let (left, right) = (2, 3);
    let s0 = env.initial_distribution()[0].0;
    // a treasure before the safe cell is not collected
    let s1 = env.transitions(s0, left)[0].0;
    assert_eq!(env.label(s0, left, s1), p(&["l"]));
    let s2 = env.transitions(s1, right)[0].0;
    assert_eq!(env.label(s1, right, s2), p(&["r", "x"]));
    let s3 = env.transitions(s2, right)[0].0;
    assert_eq!(env.label(s2, right, s3), p(&["r", "safe"]));
    let s4 = env.transitions(s3, right)[0].0;
    assert_eq!(env.label(s3, right, s4), p(&["r", "t"]));
    let (_, _, mask) = env.decode(s4);
    assert_eq!(mask, 0b10);
    // walk back to the first treasure: the last one also says `all`
    let mut s = s4;
    for _ in 0..2 {
        s = env.transitions(s, left)[0].0;
    }
    let last = env.transitions(s, left)[0].0;
    assert_eq!(env.label(s, left, last), p(&["l", "t", "all"]));
}

#[test]
fn letterenv_labels() {
    let env = LetterEnv::new(&LetterEnvConfig::default()).unwrap();
    let p = |names: &[&str]| PropSet::from_names(names, env.props()).unwrap();
    let (up, right) = (0, 3);
    let (a, c, x) = env.cells();
    // standing on A and bumping the top wall lands on A again
    let on_a = env.encode(a, 0);
    let dist = env.transitions(on_a, up);
    assert_eq!(dist.len(), 2);
    assert!(dist.iter().all(|&(_, p)| p == 0.5));
    for &(next, _) in &dist {
        assert_eq!(env.label(on_a, up, next), p(&["P_A"]));
    }
    let flipped = env.encode(a, 1);
    let next = env.transitions(flipped, up)[0].0;
    assert_eq!(env.label(flipped, up, next), p(&["P_B"]));
    let spent = env.transitions(next, up)[0].0;
    assert_eq!(env.label(next, up, spent), PropSet::EMPTY);
    // plain move
    let s = env.encode(6, 0);
    let next = env.transitions(s, right)[0].0;
    assert_eq!(env.label(s, right, next), PropSet::EMPTY);
    let on_c = env.encode(c, 2);
    assert_eq!(env.label(on_c, 1, env.transitions(on_c, 1)[0].0), p(&["P_C"]));
    let near_x = env.encode(x - 1, 2);
    assert_eq!(env.label(near_x, right, env.transitions(near_x, right)[0].0), p(&["tau"]));
}

#[test]
fn letterenv_rejects_bad_cells() {
    let cfg = LetterEnvConfig {
        c_cell: (9, 9),
        ..LetterEnvConfig::default()
    };
    assert!(matches!(LetterEnv::new(&cfg).unwrap_err(), EnvError::BadConfig(_)));
}

fn deliver_env(train: Vec<usize>) -> DeliverWorld {
    DeliverWorld::new(DeliverConfig {
        map: GridMap::parse("S1.2\n3..4\n").unwrap(),
        n_types: 4,
        n_sequences: 4,
        train_sequences: train,
        eval_sequences: vec![0, 1, 2, 3],
        horizon: 50,
    })
    .unwrap()
}

#[test]
fn deliverworld_script() {
    let env = deliver_env(vec![0]);
    let pdrm = Pdrm::from_text(machines::DELIVER4_PDRM).unwrap();
    let (s0, start_label, p) = env.initial_distribution()[0];
    assert_eq!(p, 1.0);
    assert_eq!(start_label, PropSet::from_names(&["seq_0"], env.props()).unwrap());
    // sequence 0 is 1, 2, 3, 4
    let (right, left, down) = (3, 2, 1);
    let script = [right, right, right, down, left, left, left, right, right, right];
    let mut word = vec![start_label];
    let mut s = s0;
    for a in script {
        let next = env.transitions(s, a)[0].0;
        word.push(env.label(s, a, next));
        s = next;
    }
    let (trace, last) = pdrm.run_word(&word).unwrap();
    assert!(last.terminal);
    assert_eq!(trace.iter().sum::<f64>(), 1.0);
    // the first visit to type 1 pops; a visit to type 3 first would be ignored
    let (t, c) = pdrm.run_word(&word[..2]).unwrap();
    assert_eq!(t, vec![0.0, 0.0]);
    assert_eq!(c.stack_len(), 4);
    let skip = [start_label, PropSet::from_names(&["type_3"], env.props()).unwrap()];
    let (t, c) = pdrm.run_word(&skip).unwrap();
    assert_eq!((t, c.stack_len()), (vec![0.0, 0.0], 5));
}

#[test]
fn paintworld_rewards() {
    let env = PaintWorld::new();
    let s = EnvState(0);
    assert!((env.reward(s, 1, s) + 2.0 / 3.0).abs() < 1e-12);
    assert!((env.reward(s, 0, s) + 0.5).abs() < 1e-12);
    assert!((env.reward(s, 4, s) + 5.0 / 6.0).abs() < 1e-12);
}

/// Cheapest soap-request sequence for each stain count, by brute force over
/// every sequence within the horizon, run through the shipped machine.
#[test]
fn paintworld_optimum_is_single_exact_request() {
    let env = PaintWorld::new();
    let pdrm: Pdrm = machines::paintworld().unwrap();
    for (n, &(_, start_label, _)) in env.initial_distribution().iter().enumerate() {
        let n = n + 1;
        let mut best = (f64::NEG_INFINITY, Vec::new());
        let mut unique = true;
        let mut stack = vec![Vec::<usize>::new()];
        while let Some(seq) = stack.pop() {
            let mut word = vec![start_label];
            word.extend(seq.iter().map(|&a| env.label(EnvState(0), a, EnvState(0))));
            let (_, c) = pdrm.run_word(&word).unwrap();
            let ret: f64 = seq.iter().map(|&a| env.reward(EnvState(0), a, EnvState(0))).sum();
            if c.terminal || seq.len() == env.horizon() {
                if (ret - best.0).abs() < 1e-12 {
                    unique = false;
                } else if ret > best.0 {
                    best = (ret, seq.clone());
                    unique = true;
                }
                continue;
            }
            for a in 0..env.n_actions() {
                let mut next = seq.clone();
                next.push(a);
                stack.push(next);
            }
        }
        assert!((best.0 + n as f64 / (n as f64 + 1.0)).abs() < 1e-12);
        assert_eq!(best.1, vec![n - 1]);
        assert!(unique);
    }
}
