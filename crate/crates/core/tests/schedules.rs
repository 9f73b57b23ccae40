use selfedit::code::layout::{self, CfgParams};
use selfedit::code::{read_at, store_memory, Address, Atom, Code, Limits};
use selfedit::diag::fit::rec_entries;
use selfedit::diag::{diagonalize, MemoryTrace, Mode};
use selfedit::env::parameter_env;
use selfedit::evolution::{run, Evolution, EvolutionConfig};
use selfedit::lang::{eval, Enumeration, EvalBudget, Generator, Grammar, Program};

fn gen() -> Generator {
    Generator::new(Enumeration::new(Grammar::default()))
}

fn demands_as_trace(schedule: Vec<i64>) -> MemoryTrace {
    let env = parameter_env(schedule).unwrap();
    env.demands().into_iter().map(Code::Leaf).collect()
}

#[test]
fn decreasing_schedule_is_add_minus_one() {
    let trace = demands_as_trace(vec![9, 8, 7]);
    let r = diagonalize(&trace, &Address::root(), &gen(), 5000, EvalBudget::default(), Mode::Projected).unwrap();
    assert_eq!(r.program, Program::Add(-1));
}

#[test]
fn constant_schedule_is_copy() {
    let trace = demands_as_trace(vec![5, 5, 5, 5]);
    let r = diagonalize(&trace, &Address::root(), &gen(), 5000, EvalBudget::default(), Mode::Projected).unwrap();
    assert_eq!(r.program, Program::Id);
}

#[test]
fn decreasing_schedule_evolves() {
    let schedule: Vec<i64> = (0..12).map(|t| 20 - t).collect();
    let env = parameter_env(schedule).unwrap();
    let cfg = EvolutionConfig { population: 32, steps: 12, ..Default::default() };
    let reports = run(&cfg, &env).unwrap();
    assert!(reports.iter().all(|r| !r.extinct));
    assert!(reports.iter().skip(3).all(|r| r.recursors.iter().any(|f| f.prog == Program::Add(-1))));
    assert!(reports.iter().skip(4).all(|r| r.exploit_fraction() == 1.0));
}

/// A branch whose OUT follows 1,2,4,7 and whose stored OUT recursors are
/// the pairwise steps 1,2,3.
fn accelerating_branch() -> Code {
    let mut c = layout::seed(&CfgParams::default());
    for (i, (out, step)) in [(2, 1), (4, 2), (7, 3)].into_iter().enumerate() {
        let next = layout::with_slot(&c, layout::OUT, Code::int(out));
        let next = selfedit::diag::fit::rec_upsert(&next, &layout::out(), &Program::Add(step));
        c = if i == 0 { next } else { store_memory(&c, &next, 20, Limits::default()).unwrap() };
    }
    c
}

#[test]
fn accelerating_schedule_is_a_rank_two_target() {
    let c = accelerating_branch();
    let trace = MemoryTrace::of_code(&c);
    let budget = EvalBudget::default();
    let step_at = Address::new(vec![layout::REC, 1, 2, 2]);
    let steps: Vec<i64> = trace.snapshots().iter().map(|s| read_at(s, &step_at).unwrap().as_int().unwrap()).collect();
    assert_eq!(steps, vec![1, 2, 3]);
    let direct = diagonalize(&trace, &step_at, &gen(), 5000, budget, Mode::Projected).unwrap();
    assert_eq!(direct.program, Program::Add(1));

    let engine = Evolution::new(EvolutionConfig::default()).unwrap();
    let plan = engine.plan(&c);
    assert!(plan.found.iter().any(|r| r.target == step_at && r.program == Program::Add(1)));
    let out_recursor = rec_entries(&plan.base).into_iter().find(|(t, _)| *t == layout::out()).unwrap().1;
    assert_eq!(out_recursor, Program::Add(4));
    assert_eq!(eval(&out_recursor, &Code::int(7), budget), Ok(Code::int(11)));
    let kids = engine.proliferate(&c, &mut selfedit::evolution::member_stream(0, 0, 0));
    let hits = kids.members().iter().filter(|m| layout::slot(&m.code, layout::OUT) == Some(&Code::Leaf(Atom::Int(11))));
    assert!(hits.count() >= 6);
}
