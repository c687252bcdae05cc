use super::*;
use crate::dsl::{parse, Cond, Stmt};
use crate::noise::{NoisySpec, TokenPrediction};
use crate::semantics::{run_concrete, Demonstration, DEFAULT_T_MAX};
use crate::world::{Action::*, Heading, Perception::*, WorldState};

fn corridor(len: usize) -> Demonstration {
    let start = WorldState::open(len, 1, (0, 0), Heading::East).unwrap();
    let p = parse("while(frontIsClear): move ; end").unwrap();
    run_concrete(&p, &start, DEFAULT_T_MAX).unwrap()
}

fn corridor_specs() -> Vec<IoSpec> {
    [2, 3, 4].into_iter().map(|l| corridor(l).spec()).collect()
}

fn bounds() -> SynthBounds {
    SynthBounds::default()
}

#[test]
fn corridors_need_one_loop() {
    let specs = corridor_specs();
    assert_eq!(synthesize_at_bound(&specs, 0, &bounds()).unwrap(), None);
    let r = synthesize_min_cost(&specs, &bounds()).unwrap();
    let Outcome::Found { program, n_used, specs_used } = r.outcome else {
        panic!("expected a program");
    };
    assert_eq!(n_used, 1);
    assert_eq!(specs_used, vec![0, 1, 2]);
    assert_eq!(
        program,
        Program::new(vec![Stmt::While { cond: Cond::pos(FrontIsClear), body: vec![Move] }]).unwrap()
    );
    assert_eq!(r.solver_calls, 2);
}

#[test]
fn straight_line_at_zero() {
    let spec = IoSpec { perceptions: vec![[true; 5]; 2], actions: vec![Move, End] };
    let r = synthesize_min_cost(&[spec], &bounds()).unwrap();
    assert_eq!(r.program(), Some(&Program::straight(&[Move]).unwrap()));
    assert_eq!(r.solver_calls, 1);
}

#[test]
fn contradictory_specs_are_unsat() {
    let row = [true, false, false, false, true];
    let a = IoSpec { perceptions: vec![row; 2], actions: vec![Move, End] };
    let b = IoSpec { perceptions: vec![row; 2], actions: vec![TurnLeft, End] };
    let r = synthesize_min_cost(&[a, b], &bounds()).unwrap();
    assert_eq!(r.outcome, Outcome::Unsat);
    assert_eq!(r.solver_calls, 3);
}

#[test]
fn branch_on_perception() {
    // Turn left when the front is blocked, otherwise move.
    let clear = [true, false, false, false, true];
    let blocked = [false, false, false, false, true];
    let a = IoSpec { perceptions: vec![clear; 2], actions: vec![Move, End] };
    let b = IoSpec { perceptions: vec![blocked; 2], actions: vec![TurnLeft, End] };
    let r = synthesize_min_cost(&[a.clone(), b.clone()], &bounds()).unwrap();
    let p = r.program().unwrap();
    assert_eq!(p.cost(), 1);
    assert!(satisfies(p, &a) && satisfies(p, &b));
}

#[test]
fn budget_is_enforced() {
    let tight = SynthBounds { node_budget: 3, ..bounds() };
    assert!(matches!(
        synthesize_min_cost(&corridor_specs(), &tight),
        Err(SynthError::BoundsExceeded { .. })
    ));
}

#[test]
fn no_specs_is_an_error() {
    assert_eq!(synthesize_at_bound(&[], 0, &bounds()), Err(SynthError::NoSpecs));
}

fn scored(demo: &Demonstration, action_conf: f64, per_conf: f64) -> NoisySpec {
    let mut s = NoisySpec::exact(demo, 1.0);
    for t in &mut s.actions {
        t.confidence = action_conf;
    }
    s.perceptions[0][0].confidence = per_conf;
    s
}

/// Corrupts the action at `step` of `spec` into `value`.
fn flip_action(spec: &mut NoisySpec, step: usize, value: crate::world::Action, confidence: f64) {
    spec.actions[step] = TokenPrediction { value, confidence };
}

#[test]
fn confidence_levels_take_minima() {
    let mut s = scored(&corridor(3), 0.99, 0.95);
    s.perceptions[1][4].confidence = 0.5;
    let c = confidence_levels(&s);
    assert_eq!(c.action_conf, 0.99);
    assert_eq!(c.per_conf, 0.5);
}

#[test]
fn static_filter_thresholds() {
    let d = corridor(3);
    let specs = vec![scored(&d, 0.99, 0.95), scored(&d, 0.97, 0.95), scored(&d, 0.99, 0.85), scored(&d, 0.98, 0.9)];
    let kept = static_filter(&specs, &FilterConfig::default());
    assert_eq!(kept, vec![specs[0].clone(), specs[3].clone()]);
}

#[test]
fn static_filter_is_monotone() {
    let d = corridor(3);
    let specs: Vec<NoisySpec> = (0..20)
        .map(|i| scored(&d, 0.9 + 0.005 * i as f64, 0.8 + 0.01 * (19 - i) as f64))
        .collect();
    let loose = FilterConfig { eps_action: 0.92, eps_perception: 0.85, ..FilterConfig::default() };
    let tight = FilterConfig { eps_action: 0.95, eps_perception: 0.9, ..FilterConfig::default() };
    let a = static_filter(&specs, &loose);
    let b = static_filter(&specs, &tight);
    assert!(b.iter().all(|s| a.contains(s)));
}

#[test]
fn static_recovers_after_dropping_noise() {
    let mut specs: Vec<NoisySpec> = [2, 3, 4, 5].into_iter().map(|l| scored(&corridor(l), 0.99, 0.99)).collect();
    flip_action(&mut specs[2], 1, TurnLeft, 0.4);
    let none = synthesize(&specs, Mode::None, &FilterConfig::default(), &bounds()).unwrap();
    let fixed = synthesize(&specs, Mode::Static, &FilterConfig::default(), &bounds()).unwrap();
    let target = parse("while(frontIsClear): move ; end").unwrap();
    assert_ne!(none.program(), Some(&target));
    assert_eq!(fixed.program(), Some(&target));
    let Outcome::Found { specs_used, .. } = fixed.outcome else { unreachable!() };
    assert_eq!(specs_used, vec![0, 1, 3]);
}

#[test]
fn dynamic_drops_low_perception_confidence() {
    // A confidently-predicted perception error defeats the static filter but
    // ranks last under dynamic filtering.
    let mut specs: Vec<NoisySpec> = [2, 3, 4, 5, 6, 7, 8, 9, 3, 4].into_iter().map(|l| scored(&corridor(l), 0.99, 0.99)).collect();
    let bad = &mut specs[4];
    let last = bad.perceptions.len() - 1;
    bad.perceptions[last][0] = TokenPrediction { value: true, confidence: 0.5 };
    let cfg = FilterConfig { eps_perception: 0.4, ..FilterConfig::default() };
    let stat = synthesize(&specs, Mode::Static, &cfg, &bounds()).unwrap();
    let dynamic = synthesize(&specs, Mode::Dynamic, &cfg, &bounds()).unwrap();
    let target = parse("while(frontIsClear): move ; end").unwrap();
    assert_ne!(stat.program(), Some(&target));
    assert_eq!(dynamic.program(), Some(&target));
    let Outcome::Found { specs_used, .. } = &dynamic.outcome else { unreachable!() };
    assert_eq!(specs_used, &vec![0, 1, 2, 3, 5, 6, 7, 8, 9]);
    let par = synthesize_dynamic_parallel(&specs, &cfg, &bounds()).unwrap();
    assert_eq!(par.outcome, dynamic.outcome);
    assert_eq!(par.solver_calls, dynamic.solver_calls);
}

#[test]
fn confidently_wrong_defeats_both_filters() {
    let mut specs: Vec<NoisySpec> = [2, 3, 4, 5].into_iter().map(|l| scored(&corridor(l), 0.99, 0.99)).collect();
    flip_action(&mut specs[1], 0, TurnRight, 0.995);
    let target = parse("while(frontIsClear): move ; end").unwrap();
    for mode in [Mode::Static, Mode::Dynamic] {
        let r = synthesize(&specs, mode, &FilterConfig::default(), &bounds()).unwrap();
        assert_ne!(r.program(), Some(&target), "{mode}");
    }
}

#[test]
fn subset_sizes() {
    assert_eq!(subset_size(0.7, 10), 7);
    assert_eq!(subset_size(0.95, 10), 10);
    assert_eq!(subset_size(0.1, 3), 1);
    assert_eq!(subset_size(0.3, 10), 3);
    let d = corridor(3);
    let specs: Vec<NoisySpec> = (0..10).map(|_| scored(&d, 0.99, 0.99)).collect();
    let sizes: Vec<usize> = dynamic_subsets(&specs, &FilterConfig::default()).iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![10, 9, 8, 7, 6, 5, 4, 3, 2, 1]);
}

#[test]
fn filter_config_validation() {
    assert!(FilterConfig::default().validate().is_ok());
    let bad = FilterConfig { prop_schedule: vec![1.0, 0.5, 0.6], ..FilterConfig::default() };
    assert!(bad.validate().is_err());
    let bad = FilterConfig { prop_schedule: vec![0.9], ..FilterConfig::default() };
    assert!(bad.validate().is_err());
    assert_eq!("dynamic".parse::<Mode>(), Ok(Mode::Dynamic));
}
