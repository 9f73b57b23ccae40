//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the binary
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfedit::cli::cmd_run;
use selfedit::code::layout::{self, CfgParams};
use selfedit::code::{store_memory, Address, Atom, Code, Limits, Tok};
use selfedit::diag::fit::rec_entries;
use selfedit::diag::rules::{detect_implications, detect_useful};
use selfedit::diag::{apply_recursors, diagonalize, explore_pool, MemoryTrace, Mode, Proliferation, Ratio};
use selfedit::env::{arithmetic_env, flag_probe, guarded_env, nested_env, NestedScript};
use selfedit::evolution::{member_stream, run, Evolution, EvolutionConfig, GenerationReport};
use selfedit::lang::{eval, Enumeration, EvalBudget, Generator, Grammar, Program};

/// Tolerances and limits, pinned.
const ORACLE_MAX_SIZE: usize = 6;
const ORACLE_MIN_CASES: usize = 200;
const ARITH_FROM_GEN: usize = 4;
const ARITH_EXPLOIT_FRACTION: f64 = 1.0;
const ARITH_MIN_CORRECT: f64 = 0.75;
const SWEEP_SEEDS: u64 = 20;
const GUARDED_MIN_TRANSITIONS: usize = 12;
const GUARDED_S_MIN: usize = 3;
const USEFUL_TAU: (u64, u64) = (1, 2);
const LIMIT_1: Duration = Duration::from_secs(60);
const LIMIT_2: Duration = Duration::from_secs(30);
const LIMIT_3: Duration = Duration::from_secs(60);
const LIMIT_4: Duration = Duration::from_secs(120);
const LIMIT_5: Duration = Duration::from_secs(60);
const LIMIT_6: Duration = Duration::from_secs(30);
const LIMIT_7: Duration = Duration::from_secs(10);
const LIMIT_8: Duration = Duration::from_secs(30);

type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

/// Brute-force simplest-fit oracle built without the library enumeration.
mod oracle {
    use super::*;

    fn atoms(g: &Grammar) -> Vec<Atom> {
        let mut out: Vec<Atom> = (-g.int_bound..=g.int_bound).map(Atom::Int).collect();
        out.extend(Tok::ALL.iter().take(g.tokens).map(|t| Atom::Tok(*t)));
        out
    }

    fn codes_by_size(g: &Grammar, max: usize) -> Vec<Vec<Code>> {
        let mut by: Vec<Vec<Code>> = vec![Vec::new(); max + 1];
        if max == 0 {
            return by;
        }
        by[1] = atoms(g).into_iter().map(Code::Leaf).collect();
        by[1].push(Code::empty());
        for s in 2..=max {
            let mut out = Vec::new();
            children(&by, s - 1, &mut Vec::new(), &mut out);
            by[s] = out;
        }
        by
    }

    fn children(by: &[Vec<Code>], left: usize, acc: &mut Vec<Code>, out: &mut Vec<Code>) {
        if left == 0 {
            out.push(Code::node(acc.clone()));
            return;
        }
        for k in 1..=left {
            for c in &by[k] {
                acc.push(c.clone());
                children(by, left - k, acc, out);
                acc.pop();
            }
        }
    }

    fn addresses(len: usize, max_entry: usize) -> Vec<Address> {
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|p: Vec<usize>| (1..=max_entry).map(move |e| [p.clone(), vec![e]].concat()))
                .collect();
        }
        out.into_iter().map(Address::new).collect()
    }

    /// Every program of size at most `max`, grouped by size.
    pub fn programs(g: &Grammar, max: usize) -> Vec<Program> {
        let codes = codes_by_size(g, max.saturating_sub(2));
        let mut by: Vec<Vec<Program>> = vec![Vec::new(); max + 1];
        for s in 2..=max {
            let mut out = Vec::new();
            if s == 2 {
                out.push(Program::Id);
            }
            if s >= 3 {
                out.extend(codes[s - 2].iter().cloned().map(Program::Const));
                out.extend(addresses(s - 3, g.max_addr_entry).into_iter().map(Program::Read));
            }
            if s == 3 {
                out.extend((-g.int_bound..=g.int_bound).map(Program::Add));
            }
            for la in 0..s {
                for a in if 3 + la + 2 <= s { addresses(la, g.max_addr_entry) } else { Vec::new() } {
                    for p in &by[s - 3 - la] {
                        out.push(Program::Put(a.clone(), Box::new(p.clone())));
                        out.push(Program::Append(a.clone(), Box::new(p.clone())));
                    }
                }
            }
            for i in 2..s.saturating_sub(3) {
                for p in &by[i] {
                    for q in &by[s - 2 - i] {
                        out.push(Program::Seq(Box::new(p.clone()), Box::new(q.clone())));
                        out.push(Program::Pair(Box::new(p.clone()), Box::new(q.clone())));
                    }
                }
            }
            for la in 0..s {
                if 4 + la + 4 > s {
                    break;
                }
                for a in addresses(la, g.max_addr_entry) {
                    for v in atoms(g) {
                        for i in 2..=(s - 4 - la - 2) {
                            for p in &by[i] {
                                for q in &by[s - 4 - la - i] {
                                    out.push(Program::IfEq(a.clone(), v, Box::new(p.clone()), Box::new(q.clone())));
                                }
                            }
                        }
                    }
                }
            }
            for la in 0..s {
                for lb in 0..s {
                    if 4 + la + lb == s {
                        for a in addresses(la, g.max_addr_entry) {
                            for b in addresses(lb, g.max_addr_entry) {
                                out.push(Program::ApplyAt(a.clone(), b));
                            }
                        }
                    }
                }
            }
            by[s] = out;
        }
        let mut all: Vec<Program> = by.into_iter().flatten().collect();
        all.sort_by_cached_key(key);
        all
    }

    fn lit(v: i64) -> u64 {
        if v > 0 {
            2 * v as u64 - 1
        } else {
            2 * v.unsigned_abs()
        }
    }

    fn atom_key(a: &Atom, out: &mut Vec<u64>) {
        out.push(match a {
            Atom::Int(v) => lit(*v),
            Atom::Tok(t) => (1 << 40) + Tok::ALL.iter().position(|x| x == t).unwrap() as u64,
        });
    }

    fn addr_key(a: &Address, out: &mut Vec<u64>) {
        out.push(a.len() as u64);
        out.extend(a.path().iter().map(|&e| e as u64));
    }

    fn code_key(c: &Code, out: &mut Vec<u64>) {
        out.push(c.size() as u64);
        match c.children() {
            None => {
                out.push(0);
                atom_key(&c.atom().unwrap(), out);
            }
            Some(ch) => {
                out.push(1);
                for x in ch {
                    code_key(x, out);
                }
                out.push(0);
            }
        }
    }

    fn prog_key(p: &Program, out: &mut Vec<u64>) {
        out.push(p.size() as u64);
        match p {
            Program::Id => out.push(0),
            Program::Const(v) => {
                out.push(1);
                code_key(v, out);
            }
            Program::Add(k) => out.extend([2, lit(*k)]),
            Program::Read(a) => {
                out.push(3);
                addr_key(a, out);
            }
            Program::Put(a, q) | Program::Append(a, q) => {
                out.push(if matches!(p, Program::Put(..)) { 4 } else { 5 });
                addr_key(a, out);
                prog_key(q, out);
            }
            Program::Seq(x, y) | Program::Pair(x, y) => {
                out.push(if matches!(p, Program::Seq(..)) { 6 } else { 7 });
                prog_key(x, out);
                prog_key(y, out);
            }
            Program::IfEq(a, v, x, y) => {
                out.push(8);
                addr_key(a, out);
                atom_key(v, out);
                prog_key(x, out);
                prog_key(y, out);
            }
            Program::ApplyAt(a, b) => {
                out.push(9);
                addr_key(a, out);
                addr_key(b, out);
            }
        }
    }

    /// Lexicographic key realizing size, constructor rank, then fields.
    pub fn key(p: &Program) -> Vec<u64> {
        let mut out = Vec::new();
        prog_key(p, &mut out);
        out
    }

    /// Position and program of the first fitter of `seq`.
    pub fn simplest_fit(all: &[Program], seq: &[Code], budget: EvalBudget) -> Option<(u64, Program)> {
        all.iter()
            .position(|p| seq.windows(2).all(|w| eval(p, &w[0], budget).is_ok_and(|v| v == w[1])))
            .map(|i| (i as u64, all[i].clone()))
    }
}

fn criterion_1() -> Outcome {
    let g = Grammar::default();
    let all = oracle::programs(&g, ORACLE_MAX_SIZE);
    let e = Enumeration::new(g);
    if all.len() as u128 != e.count_up_to(ORACLE_MAX_SIZE) {
        return outcome(
            false,
            format!("oracle has {} programs, enumeration {}", all.len(), e.count_up_to(ORACLE_MAX_SIZE)),
        );
    }
    let gen = Generator::new(e);
    let budget = EvalBudget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases = 240;
    let mut agree = 0;
    let mut kinds = [0usize; 3];
    for i in 0..cases {
        let len = rng.gen_range(3..=6);
        let seq: Vec<i64> = match i % 3 {
            0 => {
                let (start, step) = (rng.gen_range(-5..=5), rng.gen_range(-3..=3));
                (0..len).map(|t| start + step * t as i64).collect()
            }
            1 => vec![rng.gen_range(-9..=9); len],
            _ => (0..len).map(|_| rng.gen_range(-20..=20)).collect(),
        };
        let seq: Vec<Code> = seq.into_iter().map(Code::int).collect();
        let expected = oracle::simplest_fit(&all, &seq, budget);
        if expected.is_some() {
            kinds[i % 3] += 1;
        }
        let got =
            diagonalize(&MemoryTrace::new(seq), &Address::root(), &gen, all.len() as u64, budget, Mode::Projected)
                .map(|r| (r.found_at_index, r.program));
        if got == expected {
            agree += 1;
        }
    }
    outcome(
        agree == cases && cases >= ORACLE_MIN_CASES,
        format!(
            "{agree}/{cases} cases agree on program and index over {} programs (fits: arithmetic {}, constant {}, random {})",
            all.len(),
            kinds[0],
            kinds[1],
            kinds[2]
        ),
    )
}

fn criterion_2() -> Outcome {
    let env = arithmetic_env(1, 1, 20).unwrap();
    let cfg = EvolutionConfig {
        population: 64,
        descendants: 8,
        warmup: 3,
        steps: 20,
        seed: 0,
        cfg: CfgParams { n: 3, p_num: 3, p_den: 4, ..Default::default() },
        ..Default::default()
    };
    let reports = run(&cfg, &env).unwrap();
    let extinct = reports.iter().any(|r| r.extinct) || reports.len() != 20;
    let late: Vec<&GenerationReport> = reports.iter().filter(|r| r.generation >= ARITH_FROM_GEN).collect();
    let exploit_ok = late.iter().all(|r| r.exploit_produced > 0 && r.exploit_fraction() == ARITH_EXPLOIT_FRACTION);
    let worst = late.iter().map(|r| r.correct_fraction).fold(1.0, f64::min);
    outcome(
        !extinct && exploit_ok && worst >= ARITH_MIN_CORRECT,
        format!("no extinction: {}, exploit fraction 1.0 from gen {ARITH_FROM_GEN}: {exploit_ok}, min correct_frac {worst:.6}", !extinct),
    )
}

fn nested_cfg(p: (i64, i64), seed: u64) -> EvolutionConfig {
    EvolutionConfig {
        warmup: 15,
        steps: 20,
        seed,
        cfg: CfgParams { p_num: p.0, p_den: p.1, ..Default::default() },
        ..Default::default()
    }
}

fn criterion_3() -> Outcome {
    let env = nested_env(&NestedScript::canonical(4, 3)).unwrap();
    let cfg = nested_cfg((3, 4), 0);
    let need = Ratio::new(3, 4).ceil_mul(cfg.descendants as u64) as usize;
    let engine = Evolution::new(cfg.clone()).unwrap();
    // Sub-experiment 4 starts at its LP, 5 demands per sub-experiment.
    let first_interior = 3 * 5 + 1;
    let mut state = engine.init_population();
    let mut rank_two = false;
    let mut add_four = false;
    let mut matched = Vec::new();
    for t in 0..cfg.steps {
        if t == first_interior {
            for m in state.population.members() {
                let plan = engine.plan(&m.code);
                rank_two |= plan.found.iter().any(|r| {
                    r.target.starts_with(&layout::rec()) && r.mode == Mode::Projected && r.program == Program::Add(1)
                });
                add_four |= rec_entries(&plan.base).iter().any(|(t, p)| *t == layout::out() && *p == Program::Add(4));
            }
        }
        let (next, report) = engine.step(state, &env);
        if (first_interior..first_interior + 3).contains(&t) {
            matched.push((report.demand, report.correct));
        }
        state = next;
        if state.extinct {
            break;
        }
    }
    let demands_ok = matched.iter().map(|m| m.0).eq([1, 5, 9].map(Atom::Int));
    let counts_ok = matched.len() == 3 && matched.iter().all(|m| m.1 >= need);
    let counts: Vec<usize> = matched.iter().map(|m| m.1).collect();
    outcome(
        rank_two && add_four && demands_ok && counts_ok,
        format!("rank-2 ADD(1) found: {rank_two}, OUT recursor ADD(4): {add_four}, matches on 1,5,9: {counts:?} (need {need} each)"),
    )
}

fn criterion_4() -> Outcome {
    let env = nested_env(&NestedScript::canonical(4, 3)).unwrap();
    let strict = nested_cfg((1, 1), 0);
    let brk = (strict.warmup..env.length).find(|&t| env.demand(t) == Some(Atom::Tok(Tok::Rp))).unwrap();
    let reports = run(&strict, &env).unwrap();
    let dies_at_break = reports.last().is_some_and(|r| r.extinct && r.generation == brk) && reports.len() == brk + 1;
    let again = run(&strict, &env).unwrap();
    let text = |rs: &[GenerationReport]| rs.iter().map(GenerationReport::to_json_line).collect::<Vec<_>>();
    let mut deterministic = text(&reports) == text(&again);
    let mut surviving = Vec::new();
    for seed in 0..SWEEP_SEEDS {
        let cfg = nested_cfg((3, 4), seed);
        let rs = run(&cfg, &env).unwrap();
        if seed == 0 {
            deterministic &= text(&rs) == text(&run(&cfg, &env).unwrap());
        }
        if rs.get(brk).is_some_and(|r| !r.extinct) {
            surviving.push(seed);
        }
    }
    outcome(
        dies_at_break && !surviving.is_empty() && deterministic,
        format!(
            "p=1 extinct exactly at break generation {brk}: {dies_at_break}; p=3/4 seeds surviving the break: {}/{SWEEP_SEEDS}; deterministic: {deterministic}",
            surviving.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let env = guarded_env(3, 2, 24).unwrap();
    let cfg = EvolutionConfig { memory: 13, steps: 24, warmup: 3, ..Default::default() };
    let engine = Evolution::new(cfg).unwrap();
    let mut last = None;
    engine.run_with(&env, |s, _| last = Some(s.clone())).unwrap();
    let Some(member) = last.and_then(|s| s.population.members().first().cloned()) else {
        return outcome(false, "population died out");
    };
    let trace = MemoryTrace::of_code(&member.code);
    let transitions = trace.transitions();
    let gen = Generator::new(Enumeration::new(Grammar::default()));
    let budget = EvalBudget::default();
    let rules = detect_implications(&trace, &layout::out(), GUARDED_S_MIN, 4000, &gen, 300, budget);
    let flag = flag_probe();
    let flagged: Vec<_> = transitions
        .iter()
        .filter(|t| eval(&flag, &t.before, budget).is_ok_and(|v| v.is_leaf(Atom::Tok(Tok::True))))
        .collect();
    let plus_two = |p: &Program| (-5..=5).all(|v| eval(p, &Code::int(v), budget) == Ok(Code::int(v + 2)));
    let hit = rules.iter().find(|r| r.condition == flag && plus_two(&r.action));
    let violations = hit.map_or(usize::MAX, |r| {
        flagged
            .iter()
            .filter(|t| {
                let before = layout::slot(&t.before, layout::OUT).unwrap();
                eval(&r.action, before, budget).ok().as_ref() != layout::slot(&t.after, layout::OUT)
            })
            .count()
    });
    outcome(
        transitions.len() >= GUARDED_MIN_TRANSITIONS
            && hit.is_some_and(|r| r.support >= GUARDED_S_MIN)
            && violations == 0,
        format!(
            "{} transitions, {} flagged; rule {} with support {}, violations {}",
            transitions.len(),
            flagged.len(),
            hit.map_or("none".into(), |r| format!("{} => {}", r.condition, r.action)),
            hit.map_or(0, |r| r.support),
            if violations == usize::MAX { "n/a".into() } else { violations.to_string() }
        ),
    )
}

fn criterion_6() -> Outcome {
    let g = Grammar { int_bound: 2, max_addr_entry: 1, tokens: 0, ..Default::default() };
    let e = Enumeration::new(g);
    let q: Program = "IFEQ([],2,ADD(2),ID)".parse().unwrap();
    let before = e.index_of(&q).unwrap();
    // Hits 2->4 three times and copies four values; every other transition is noise.
    let seq = [2, 4, -1, -1, 1, 1, 2, 4, 0, 0, -2, 2, 4, 4];
    let trace = MemoryTrace::new(seq.iter().map(|&v| Code::int(v)).collect());
    let gen = Generator::new(e.clone());
    let budget = EvalBudget::default();
    let scope = e.count_up_to(q.size()) as u64;
    let useful = detect_useful(&trace, &Address::root(), Ratio::new(USEFUL_TAU.0, USEFUL_TAU.1), &gen, scope, budget);
    // Independent fraction check for q.
    let hits = seq.windows(2).filter(|w| eval(&q, &Code::int(w[0]), budget) == Ok(Code::int(w[1]))).count();
    let fraction_ok = hits as u64 * USEFUL_TAU.1 >= (seq.len() as u64 - 1) * USEFUL_TAU.0;
    let unique = useful == vec![q.clone()];
    let promoted = useful.iter().fold(gen.clone(), |g, p| g.promote(p.clone()));
    let window = trace.window(3);
    let found = diagonalize(&window, &Address::root(), &promoted, 10, budget, Mode::Projected);
    let after = found.as_ref().filter(|r| r.program == q).map(|r| r.found_at_index);
    outcome(
        unique && fraction_ok && after == Some(0) && (after.unwrap_or(u64::MAX) as u128) < before,
        format!(
            "useful among {scope} programs: {:?}; fit {hits}/{}; index before {before}, after {}",
            useful.iter().map(Program::to_string).collect::<Vec<_>>(),
            seq.len() - 1,
            after.map_or("none".into(), |i| i.to_string())
        ),
    )
}

fn criterion_7() -> Outcome {
    let snapshot = |n: i64| layout::seed(&CfgParams { n, ..Default::default() });
    let limits = Limits::default();
    let c4 = store_memory(&snapshot(3), &snapshot(4), 20, limits).unwrap();
    let c5 = store_memory(&c4, &snapshot(5), 20, limits).unwrap();
    let trace = MemoryTrace::of_code(&c5);
    let gen = Generator::new(Enumeration::new(Grammar::default()));
    let budget = EvalBudget::default();
    let theta = CfgParams::n_address();
    let Some(r) = diagonalize(&trace, &theta, &gen, 5000, budget, Mode::Projected) else {
        return outcome(false, "no recursor at the CFG.n address");
    };
    let shape = Proliferation { m: 8, p: Ratio::new(1, 1), memory_cap: 20, limits };
    let kids = apply_recursors(
        &c5,
        std::slice::from_ref(&r),
        &shape,
        &mut member_stream(0, 0, 0),
        &explore_pool(&gen),
        budget,
    );
    let ns: Vec<Option<i64>> = kids.members().iter().map(|m| layout::cfg_of(&m.code).map(|c| c.n)).collect();
    let all_six = !ns.is_empty() && ns.iter().all(|n| *n == Some(6));
    outcome(
        r.program == Program::Add(1) && all_six,
        format!("recursor at {}: {} (index {}), descendant n values {:?}", r.target, r.program, r.found_at_index, ns),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"environment":{"kind":"arithmetic","start":1,"step":1,"length":20},"steps":20,"seed":11,"verbosity":"quiet"}"#,
    )
    .unwrap();
    let traces = [dir.path().join("a.jsonl"), dir.path().join("b.jsonl")];
    let codes: Vec<i32> =
        traces.iter().map(|t| cmd_run(&config, None, Some(t), &mut Vec::new(), &mut Vec::new())).collect();
    let a = std::fs::read(&traces[0]).unwrap_or_default();
    let b = std::fs::read(&traces[1]).unwrap_or_default();
    let identical = !a.is_empty() && a == b && codes == [0, 0];
    let lines_parse = String::from_utf8_lossy(&a).lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok());

    let e = Enumeration::new(Grammar::default());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let total = e.total();
    let mut round_trips = 0;
    for _ in 0..1000 {
        let p = e.canonical(rng.gen_range(0..total)).unwrap();
        let text = p.to_string();
        if text.parse::<Program>().ok().as_ref() == Some(&p) && Program::decode(&p.encode()).ok().as_ref() == Some(&p) {
            round_trips += 1;
        }
    }
    outcome(
        identical && lines_parse && round_trips == 1000,
        format!("trace files byte-identical: {identical} ({} bytes), lines parse: {lines_parse}, round trips {round_trips}/1000", a.len()),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("simplest-fit oracle equivalence", criterion_1, LIMIT_1),
        ("arithmetic experiment reproduction", criterion_2, LIMIT_2),
        ("rank-2 recursor in nested experiment", criterion_3, LIMIT_3),
        ("failure at the pattern break", criterion_4, LIMIT_4),
        ("implication detection", criterion_5, LIMIT_5),
        ("usefulness promotion", criterion_6, LIMIT_6),
        ("memory-length self-adjustment", criterion_7, LIMIT_7),
        ("determinism and interfaces", criterion_8, LIMIT_8),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let ok = out.ok && took < *limit;
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] criterion {} {}: {} ({:.2} s, limit {} s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            name,
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
