use super::*;
use crate::machines;
use crate::pdrm::{Configuration, Pdrm, PdrmSpec};

fn cfg(cra: &Cra, state: &str, c: u64) -> CraConfig {
    let state = cra.state_id(state).unwrap();
    CraConfig {
        state,
        counters: vec![c],
        terminal: cra.is_final(state),
    }
}

fn l(cra: &Cra, names: &[&str]) -> PropSet {
    cra.label(names).unwrap()
}

#[test]
fn letterenv_steps() {
    let cra = machines::letterenv_cra().unwrap();
    let (c, r) = cra.step(&cfg(&cra, "u0", 0), l(&cra, &["P_A"])).unwrap();
    assert_eq!((c, r), (cfg(&cra, "u0", 1), 0.0));
    let (c, r) = cra.step(&cfg(&cra, "u1", 1), l(&cra, &["P_C"])).unwrap();
    assert_eq!((c, r), (cfg(&cra, "u1", 0), 0.0));
    let (c, r) = cra.step(&cfg(&cra, "u1", 0), l(&cra, &["tau"])).unwrap();
    assert!(c.terminal);
    assert_eq!(c.counters, vec![0]);
    assert_eq!(r, 1.0);
}

#[test]
fn missing_transition_is_self_loop() {
    let cra = machines::letterenv_cra().unwrap();
    let c = cfg(&cra, "u0", 0);
    assert_eq!(cra.step(&c, l(&cra, &["P_B"])).unwrap(), (c, 0.0));
}

const TINY: &str = "\
cra tiny
props: a b
states: q0
initial: q0
final: f
counters: 1
";

#[test]
fn negative_counter_is_an_error() {
    let cra = Cra::from_text(&format!("{TINY}T q0 | a | 1 | -2 | 0 | q0\nT q0 | b | 0 | +1 | 0 | q0\n")).unwrap();
    let b = l(&cra, &["b"]);
    let a = l(&cra, &["a"]);
    let err = cra.run_word(&[b, a]).unwrap_err();
    assert_eq!(
        err,
        CraError::NegativeCounter {
            counter: 0,
            value: 1,
            delta: -2
        }
    );
}

#[test]
fn overlapping_guards_rejected() {
    let err = Cra::from_text(&format!("{TINY}T q0 | a | 1 | 0 | 0 | q0\nT q0 | a | 1 | +1 | 0 | q0\n")).unwrap_err();
    assert!(matches!(err, CraError::Nondeterministic { first: 0, second: 1, .. }));
    // different zero tests never conflict
    Cra::from_text(&format!("{TINY}T q0 | a | 1 | 0 | 0 | q0\nT q0 | a | 0 | +1 | 0 | q0\n")).unwrap();
}

#[test]
fn arity_mismatch_rejected() {
    let err = Cra::from_text(&format!("{TINY}T q0 | a | 10 | +1,0 | 0 | q0\n")).unwrap_err();
    assert!(matches!(err, CraError::Parse { .. }));
}

#[test]
fn multi_counter_translation_rejected() {
    let text = TINY.replace("counters: 1", "counters: 2") + "T q0 | a | 10 | +1,-1 | 0 | q0\n";
    let cra = Cra::from_text(&text).unwrap();
    assert_eq!(translate_cra_to_pdrm(&cra).unwrap_err(), CraError::MultiCounterUnsupported(2));
}

#[test]
fn text_round_trip() {
    let cra = machines::letterenv_cra().unwrap();
    assert_eq!(Cra::from_text(&cra.to_text()).unwrap(), cra);
}

fn transition_text(pdrm: &Pdrm, source: &str, guard: &str) -> Vec<String> {
    (0..pdrm.transitions().len())
        .map(|i| pdrm.describe_transition(i))
        .filter(|d| d.starts_with(&format!("{source} | {guard} |")))
        .collect()
}

#[test]
fn letterenv_translation_shapes() {
    let cra = machines::letterenv_cra().unwrap();
    let pdrm = translate_cra_to_pdrm(&cra).unwrap();
    let a_guard = "P_A & !P_B & !P_C & !tau";
    let t = transition_text(&pdrm, "u0", a_guard);
    assert!(t.contains(&format!("u0 | {a_guard} | A | A A | 0 | u0")));
    assert!(t.contains(&format!("u0 | {a_guard} | # | A # | 0 | u0")));
    // the single decrement routes through one helper state
    assert_eq!(pdrm.n_working_states(), 3);
    let c_guard = "P_C & !P_A & !P_B & !tau";
    let into_helper = transition_text(&pdrm, "u1", c_guard);
    assert_eq!(into_helper, vec![format!("u1 | {c_guard} | A | A | 0 | h_u1_7_1")]);
    // after the closure the step reads as `{P_C}, A/eps, 0`
    let (c, r) = pdrm
        .step(
            &Configuration::new(&pdrm, pdrm.state_id("u1").unwrap(), &[pdrm.symbol("A").unwrap(), pdrm.symbol("#").unwrap()]),
            pdrm.label(&["P_C"]).unwrap(),
        )
        .unwrap();
    assert_eq!(c.state, pdrm.state_id("u1").unwrap());
    assert_eq!(c.stack_vec(), vec![pdrm.symbol("#").unwrap()]);
    assert_eq!(r, 0.0);
    let (init, pending) = pdrm.initial_configuration().unwrap();
    assert_eq!(init.state, pdrm.state_id("u0").unwrap());
    assert_eq!(init.stack_vec(), vec![pdrm.symbol("#").unwrap()]);
    assert_eq!(pending, 0.0);
}

#[test]
fn zero_delta_pushes_popped_symbol_back() {
    let cra = Cra::from_text(&format!("{TINY}T q0 | a | 1 | 0 | 2 | q0\n")).unwrap();
    let pdrm = translate_cra_to_pdrm(&cra).unwrap();
    assert_eq!(pdrm.describe_transition(0), "q0 | a | A | A | 2 | q0");
}

fn gadget() -> Pdrm {
    let cra = Cra::from_text(&format!("{TINY}T q0 | a | 1 | -2 | 3 | q0\nT q0 | a | 0 | -2 | 3 | q0\n")).unwrap();
    translate_cra_to_pdrm(&cra).unwrap()
}

#[test]
fn decrement_gadget_closure_pops_units() {
    let p = gadget();
    let a = p.symbol("A").unwrap();
    let z = p.symbol("#").unwrap();
    let h1 = p.state_id("h_q0_0_1").unwrap();
    let start = Configuration::new(&p, h1, &[a, a, z]);
    let (c, r, n) = p.epsilon_closure(start).unwrap();
    assert_eq!(c, Configuration::new(&p, p.state_id("q0").unwrap(), &[z]));
    assert_eq!((r, n), (3.0, 2));
}

#[test]
fn decrement_gadget_closure_keeps_bottom() {
    let p = gadget();
    let z = p.symbol("#").unwrap();
    let h1 = p.state_id("h_q0_0_1").unwrap();
    let (c, r, n) = p.epsilon_closure(Configuration::new(&p, h1, &[z])).unwrap();
    assert_eq!(c, Configuration::new(&p, p.state_id("q0").unwrap(), &[z]));
    assert_eq!((r, n), (3.0, 2));
}

#[test]
fn helper_count_is_total_decrement() {
    for seed in 0..20 {
        let cra = random_one_counter_cra(5, 3, seed);
        let expected: usize = cra
            .transitions()
            .iter()
            .filter(|t| t.deltas[0] < 0)
            .map(|t| t.deltas[0].unsigned_abs() as usize)
            .sum();
        let pdrm = translate_cra_to_pdrm(&cra).unwrap();
        assert_eq!(pdrm.n_working_states(), cra.n_working_states() + expected);
    }
}

#[test]
fn letterenv_translation_is_equivalent() {
    let cra = machines::letterenv_cra().unwrap();
    let pdrm = translate_cra_to_pdrm(&cra).unwrap();
    let words = random_words(cra.props().len(), 1000, 20, 7);
    let report = check_reward_equivalence(&cra, &pdrm, &words);
    assert!(report.passed(), "{:?}", report.mismatches.first());
    assert_eq!(report.n_equal, 1000);
}

#[test]
fn shipped_letterenv_machines_agree() {
    let cra = machines::letterenv_cra().unwrap();
    let pdrm = machines::letterenv().unwrap();
    let words = random_words(cra.props().len(), 1000, 20, 11);
    assert!(check_reward_equivalence(&cra, &pdrm, &words).passed());
}

#[test]
fn empty_word_is_trivially_equal() {
    let cra = machines::letterenv_cra().unwrap();
    let pdrm = machines::maze().unwrap();
    let report = check_reward_equivalence(&cra, &pdrm, &[vec![]]);
    assert!(report.passed());
}

#[test]
fn zeroed_decrement_reward_is_caught() {
    let cra = Cra::from_text(&format!(
        "{TINY}T q0 | a & !b | 0 | +1 | 0 | q0\nT q0 | a & !b | 1 | +1 | 0 | q0\nT q0 | b & !a | 1 | -1 | 5 | q0\n"
    ))
    .unwrap();
    let good = translate_cra_to_pdrm(&cra).unwrap();
    let mut spec: PdrmSpec = good.to_spec();
    for t in &mut spec.transitions {
        if t.guard.is_none() {
            t.reward = 0.0;
        }
    }
    let mutant = spec.validate().unwrap();
    let a = cra.label(&["a"]).unwrap();
    let b = cra.label(&["b"]).unwrap();
    let word = vec![a, b];
    assert!(check_reward_equivalence(&cra, &good, std::slice::from_ref(&word)).passed());
    let report = check_reward_equivalence(&cra, &mutant, &[word]);
    assert_eq!(report.mismatches.len(), 1);
    assert_eq!(report.mismatches[0].cra_trace, vec![0.0, 5.0]);
    assert_eq!(report.mismatches[0].pdrm_trace, vec![0.0, 0.0]);
}

#[test]
fn path_encoding_growth() {
    let props: Vec<String> = ["u", "d", "l", "r", "t", "x"].iter().map(|s| s.to_string()).collect();
    let m = PathEncodingCra::new(&props, None).unwrap();
    let dir = |i: usize| PropSet::singleton(i);
    let g = measure_counter_growth(&m, &[dir(0), dir(1)]).unwrap();
    assert_eq!(g.last().unwrap(), &num_bigint::BigUint::from(4u32));
    let g = measure_counter_growth(&m, &[dir(0), dir(1), dir(2)]).unwrap();
    assert_eq!(g.last().unwrap(), &num_bigint::BigUint::from(36u32));
    let g = measure_counter_growth(&m, &[dir(0); 6]).unwrap();
    // the length counter is the only nonzero one
    assert!(g.iter().enumerate().all(|(i, v)| *v == num_bigint::BigUint::from(i as u64 + 1)));
    let start = m.start();
    assert_eq!(start.encoding, num_bigint::BigUint::from(0u32));
}

#[test]
fn path_encoding_mirrors_maze_machine() {
    let pdrm = machines::maze().unwrap();
    let m = PathEncodingCra::new(pdrm.props(), None).unwrap();
    let lab = |names: &[&str]| pdrm.label(names).unwrap();
    let words = vec![
        vec![lab(&["r"]), lab(&["d", "t"]), lab(&["u"]), lab(&["l", "x"])],
        vec![lab(&["r"]), lab(&["d", "t"]), lab(&["l"])],
        vec![lab(&["u", "t"]), lab(&["d"]), lab(&["d", "x"])],
        vec![lab(&[]), lab(&["x"]), lab(&["l", "t"]), lab(&[]), lab(&["r", "x"])],
    ];
    for w in words {
        let (expected, _) = pdrm.run_word(&w).unwrap();
        let mut c = m.start();
        let mut got = Vec::new();
        for &s in &w {
            if m.is_terminal(&c) {
                break;
            }
            let (n, r) = m.advance(&c, s).unwrap();
            got.push(r);
            c = n;
        }
        assert_eq!(got, expected, "{w:?}");
    }
}

#[test]
fn operation_budget_exhausts() {
    let props: Vec<String> = ["u", "d", "l", "r", "t", "x"].iter().map(|s| s.to_string()).collect();
    let m = PathEncodingCra::new(&props, Some(100)).unwrap();
    let right = PropSet::singleton(3);
    let mut c = m.start();
    let mut steps = 0;
    while !m.is_terminal(&c) {
        c = m.advance(&c, right).unwrap().0;
        steps += 1;
    }
    assert_eq!(c.phase, PathPhase::Exhausted);
    // 3 * (1 + 4 + 16) = 63 <= 100 < 63 + 3 * 64
    assert_eq!(steps, 4);
}

mod properties {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn random_translations_preserve_rewards(seed in 0u64..10_000, n_states in 1usize..=6) {
            let cra = random_one_counter_cra(n_states, 3, seed);
            let pdrm = translate_cra_to_pdrm(&cra).unwrap();
            let words = random_words(3, 200, 20, seed ^ 0x5eed);
            let report = check_reward_equivalence(&cra, &pdrm, &words);
            prop_assert!(report.passed(), "{:?}", report.mismatches.first());
        }

        #[test]
        fn accepted_runs_keep_counters_non_negative(seed in 0u64..10_000) {
            let cra = random_one_counter_cra(4, 3, seed);
            for w in random_words(3, 50, 20, seed) {
                // counters are unsigned, so an accepted run is non-negative by type;
                // the check here is that every error is the negative-counter guard
                if let Err(e) = cra.run_word(&w) {
                    let is_negative = matches!(e, CraError::NegativeCounter { .. });
                    prop_assert!(is_negative);
                }
            }
        }

        #[test]
        fn path_encoding_lower_bound(digits in proptest::collection::vec(0usize..4, 0..11), lead in 1usize..4) {
            let props: Vec<String> = ["u", "d", "l", "r", "t", "x"].iter().map(|s| s.to_string()).collect();
            let m = PathEncodingCra::new(&props, None).unwrap();
            let mut path: Vec<PropSet> = digits.iter().map(|&d| PropSet::singleton(d)).collect();
            path.push(PropSet::singleton(lead));
            let n = path.len();
            let growth = measure_counter_growth(&m, &path).unwrap();
            prop_assert!(growth[n - 1] >= BigUint::from(4u32).pow(n as u32 - 1));
        }
    }
}
