//! The population loop: proliferation, selection and per-code
//! self-diagonalization driven by each code's own CFG slot.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::code::layout::{self, CfgParams};
use crate::code::{self, read_at, Address, Atom, Code, Limits, Origin, Population, Tok};
use crate::diag::fit::{self, rec_entries, rec_upsert};
use crate::diag::rules::{as_probe, detect_implications, noticeable, notify, refresh_notices, GuardedRule};
use crate::diag::{diagonalize, explore_pool, MemoryTrace, Mode, Proliferation, Ratio, Recursor, Source};
use crate::env::{write_flag, Environment};
use crate::lang::{Enumeration, EvalBudget, Generator, Grammar, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("population cap must be at least 1")]
    Population,
    #[error("descendants per code must be at least 2")]
    Descendants,
    #[error("memory cap {memory} must be at least the diagonalization length {n}")]
    Memory { memory: usize, n: i64 },
    #[error("invalid CFG defaults")]
    Cfg,
    #[error("grammar must admit programs of size 2 and addresses of entry 1")]
    Grammar,
    #[error("{steps} steps requested but the environment has {length}")]
    Steps { steps: usize, length: usize },
}

/// Budgets for guarded-rule detection and the rank cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    /// Condition candidates tried.
    pub k_a: u64,
    /// Action candidates tried.
    pub k_b: u64,
    pub s_min: usize,
    /// Distinct actions that make a condition noticeable.
    pub many: usize,
    pub rank_max: usize,
}

impl Default for Detection {
    fn default() -> Self {
        Detection { k_a: 4000, k_b: 300, s_min: 2, many: 2, rank_max: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolutionConfig {
    /// Population cap `N`.
    pub population: usize,
    /// Descendants per code `m`.
    pub descendants: usize,
    /// Warmup steps `w`.
    pub warmup: usize,
    /// Memory cap `L`.
    pub memory: usize,
    pub seed: u64,
    /// CFG written into the seed code.
    pub cfg: CfgParams,
    /// Total steps `T`.
    pub steps: usize,
    pub detection: Detection,
    pub grammar: Grammar,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population: 64,
            descendants: 8,
            warmup: 3,
            memory: 20,
            seed: 0,
            cfg: CfgParams::default(),
            steps: 20,
            detection: Detection::default(),
            grammar: Grammar::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population < 1 {
            return Err(ConfigError::Population);
        }
        if self.descendants < 2 {
            return Err(ConfigError::Descendants);
        }
        if !self.cfg.is_valid() {
            return Err(ConfigError::Cfg);
        }
        if (self.memory as i64) < self.cfg.n {
            return Err(ConfigError::Memory { memory: self.memory, n: self.cfg.n });
        }
        if self.grammar.max_size < 2 || self.grammar.max_addr_entry < 1 {
            return Err(ConfigError::Grammar);
        }
        Ok(())
    }
}

/// One surviving population between steps.
#[derive(Debug, Clone)]
pub struct BranchState {
    pub population: Population,
    pub generation: usize,
    /// Master seed; per-member streams are derived from it.
    pub seed: u64,
    pub extinct: bool,
}

/// A freshly found recursor as reported in the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoundRecursor {
    pub addr: Address,
    pub prog: Program,
    pub index: u64,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub generation: usize,
    pub demand: Atom,
    pub produced: usize,
    pub survivors: usize,
    /// Share of viable produced descendants whose OUT matches the demand.
    pub correct_fraction: f64,
    pub recursors: Vec<FoundRecursor>,
    pub notices: Vec<Program>,
    pub extinct: bool,
    /// Viable produced descendants answering the demand.
    pub correct: usize,
    /// Exploit descendants produced and how many of them matched.
    pub exploit_produced: usize,
    pub exploit_correct: usize,
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

impl GenerationReport {
    /// One JSON object with a fixed field order and no trailing newline.
    pub fn to_json_line(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{{\"gen\":{},\"demand\":{},\"produced\":{},\"survivors\":{},\"correct_frac\":{:.6},\"recursors\":[",
            self.generation,
            json_str(&Code::Leaf(self.demand).to_string()),
            self.produced,
            self.survivors,
            self.correct_fraction
        );
        for (i, r) in self.recursors.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(
                s,
                "{{\"addr\":{},\"prog\":{},\"index\":{},\"mode\":{}}}",
                json_str(&r.addr.to_string()),
                json_str(&r.prog.to_string()),
                r.index,
                json_str(&r.mode.to_string())
            );
        }
        s.push_str("],\"notices\":[");
        let notices: Vec<String> = self.notices.iter().map(|n| json_str(&n.to_string())).collect();
        s.push_str(&notices.join(","));
        let _ = write!(s, "],\"extinct\":{}}}", self.extinct);
        s
    }

    /// Exploit descendants that matched, over those produced; 1 when none were produced.
    pub fn exploit_fraction(&self) -> f64 {
        if self.exploit_produced == 0 {
            1.0
        } else {
            self.exploit_correct as f64 / self.exploit_produced as f64
        }
    }
}

/// Everything one parent needs to proliferate.
#[derive(Debug, Clone)]
pub struct Plan {
    /// The parent with fresh recursors recorded and notices registered.
    pub base: Code,
    /// Recursors applied to build exploit descendants.
    pub exploit: Vec<Recursor>,
    /// Recursors found by self-diagonalization, all ranks.
    pub found: Vec<Recursor>,
    pub rule: Option<GuardedRule>,
    /// Conditions newly registered on the notice board.
    pub notices: Vec<Program>,
}

/// The random stream for member `id` at `generation`.
pub fn member_stream(seed: u64, generation: usize, id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(generation as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(id);
    rng
}

const SELECTION_STREAM: u64 = u64::MAX;

fn is_lp(c: &Code) -> bool {
    layout::slot(c, layout::OUT).is_some_and(|o| o.is_leaf(Atom::Tok(Tok::Lp)))
}

fn out_is(c: &Code, demand: Atom) -> bool {
    layout::slot(c, layout::OUT).is_some_and(|o| o.is_leaf(demand))
}

/// Rank of every REC entry: 1 when its target lies outside REC, one more
/// than the entry it points into otherwise, 0 when undefined.
fn entry_ranks(c: &Code) -> Vec<usize> {
    let entries = rec_entries(c);
    let rec = layout::rec();
    let parent: Vec<Option<usize>> =
        entries.iter().map(|(t, _)| if t.starts_with(&rec) { t.path().get(1).map(|j| j - 1) } else { None }).collect();
    (0..entries.len())
        .map(|i| {
            let mut rank = 1;
            let mut at = i;
            loop {
                if !entries[at].0.starts_with(&rec) {
                    return rank;
                }
                match parent[at] {
                    Some(j) if j < entries.len() && rank <= entries.len() => {
                        rank += 1;
                        at = j;
                    }
                    _ => return 0,
                }
            }
        })
        .collect()
}

/// Targets for rank `k + 1`: integer leaves inside the program part of every
/// rank-`k` REC entry.
fn next_rank_targets(c: &Code, k: usize) -> Vec<Address> {
    let Some(table) = layout::slot(c, layout::REC).and_then(Code::children) else { return Vec::new() };
    let ranks = entry_ranks(c);
    let mut out = Vec::new();
    for (i, entry) in table.iter().enumerate() {
        if ranks.get(i) != Some(&k) {
            continue;
        }
        let Some([_, prog]) = entry.children() else { continue };
        let at = layout::rec().child(i + 1).child(2);
        out.extend(prog.int_leaf_addresses().iter().map(|a| at.join(a)));
    }
    out
}

/// The trace seen by rank-2 and higher diagonalization. When the branch
/// marks sub-experiments with LP at OUT, only the marker snapshots are
/// compared, and only at a marker.
fn rank_trace(c: &Code, n: usize) -> Option<MemoryTrace> {
    let mem = layout::memory(c);
    let trace: MemoryTrace = if mem.iter().any(is_lp) || is_lp(c) {
        if !is_lp(c) {
            return None;
        }
        mem.iter().filter(|s| is_lp(s)).cloned().chain(std::iter::once(c.clone())).collect()
    } else {
        MemoryTrace::of_code(c)
    };
    let window = trace.window(n);
    (window.len() == n && n >= 2).then_some(window)
}

/// The evolution engine: configuration plus the shared code generator.
#[derive(Debug, Clone)]
pub struct Evolution {
    cfg: EvolutionConfig,
    gen: Generator,
    explore: Vec<Program>,
}

impl Evolution {
    pub fn new(cfg: EvolutionConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Self::with_generator(cfg.clone(), Generator::new(Enumeration::new(cfg.grammar))))
    }

    /// Uses `gen` (possibly carrying priority entries) instead of a fresh one.
    pub fn with_generator(cfg: EvolutionConfig, gen: Generator) -> Self {
        let explore = explore_pool(&gen);
        Evolution { cfg, gen, explore }
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.cfg
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    fn limits(&self) -> Limits {
        Limits::default()
    }

    pub fn init_population(&self) -> BranchState {
        let seed = layout::seed(&self.cfg.cfg);
        let mut population = Population::new();
        for _ in 0..self.cfg.population {
            population.push(seed.clone(), None, Origin::Seed);
        }
        BranchState { population, generation: 0, seed: self.cfg.seed, extinct: false }
    }

    /// Recursors found on `c` at every rank, using parameters from its own
    /// CFG slot, together with `c` updated by the recursors it keeps.
    fn diagonalize_ranks(&self, c: &Code) -> (Code, Vec<Recursor>) {
        let Some(params) = layout::cfg_of(c) else { return (c.clone(), Vec::new()) };
        let n = params.n as usize;
        let k_max = params.k_max as u64;
        let budget = EvalBudget::with_steps(params.s_budget as u64);
        let out = layout::out();
        let mut base = c.clone();
        let mut found = Vec::new();

        let trace = MemoryTrace::of_code(c).window(n);
        if n >= 2 && trace.len() == n {
            let hit = diagonalize(&trace, &out, &self.gen, k_max, budget, Mode::Projected)
                .or_else(|| diagonalize(&trace, &out, &self.gen, k_max, budget, Mode::Contextual));
            if let Some(r) = hit {
                if r.mode == Mode::Projected {
                    base = rec_upsert(&base, &out, &r.program);
                }
                found.push(r);
            }
        }

        for rank in 2..=self.cfg.detection.rank_max {
            let targets = next_rank_targets(&base, rank - 1);
            if targets.is_empty() {
                break;
            }
            let Some(trace) = rank_trace(&base, n) else { break };
            let mut progressed = false;
            for theta in targets {
                let Some(r) = diagonalize(&trace, &theta, &self.gen, k_max, budget, Mode::Projected) else { continue };
                if r.program != Program::Id {
                    let value = read_at(&base, &theta).ok().and_then(|v| crate::lang::eval(&r.program, v, budget).ok());
                    let edited = value.and_then(|v| code::replace_at(&base, &theta, v, self.limits()).ok());
                    if let Some(edited) = edited.filter(|e| rec_entries(e).len() == rec_entries(&base).len()) {
                        base = rec_upsert(&edited, &theta, &r.program);
                        progressed = true;
                    }
                }
                found.push(r);
            }
            if !progressed {
                break;
            }
        }
        (base, found)
    }

    /// Recursors found by self-diagonalization on `c`.
    pub fn self_diagonalize(&self, c: &Code) -> Vec<Recursor> {
        self.diagonalize_ranks(c).1
    }

    pub fn plan(&self, c: &Code) -> Plan {
        let (mut base, found) = self.diagonalize_ranks(c);
        let budget = layout::cfg_of(c).map(|p| EvalBudget::with_steps(p.s_budget as u64)).unwrap_or_default();
        let d = &self.cfg.detection;
        let out = layout::out();

        let rules = detect_implications(&MemoryTrace::of_code(c), &out, d.s_min, d.k_a, &self.gen, d.k_b, budget);
        let holds = |r: &GuardedRule| {
            as_probe(&r.condition).is_some_and(|(theta, atom)| read_at(c, theta).is_ok_and(|v| v.is_leaf(atom)))
        };
        let rule = rules
            .iter()
            .filter(|r| holds(r))
            .min_by(|a, b| {
                b.support
                    .cmp(&a.support)
                    .then(a.condition_index.cmp(&b.condition_index))
                    .then(a.action_index.cmp(&b.action_index))
            })
            .cloned();

        let mut notices = Vec::new();
        for a in noticeable(&rules, d.many) {
            if let Ok(next) = notify(&base, &a, budget, self.limits()) {
                if next != base {
                    notices.push(a);
                }
                base = next;
            }
        }

        let rec = layout::rec();
        let mut exploit: Vec<Recursor> = rec_entries(&base)
            .into_iter()
            .filter(|(t, _)| !t.starts_with(&rec))
            .map(|(t, p)| {
                let index = found.iter().find(|r| r.target == t && r.program == p).map_or(0, |r| r.found_at_index);
                Recursor { target: t, program: p, found_at_index: index, mode: Mode::Projected, source: Source::Fitted }
            })
            .collect();
        let mut set_out = |r: Recursor| match exploit.iter_mut().find(|e| e.target == out) {
            Some(e) => *e = r,
            None => exploit.insert(0, r),
        };
        if let Some(ctx) = found.iter().find(|r| r.mode == Mode::Contextual && r.target == out) {
            set_out(ctx.clone());
        }
        if let Some(rule) = &rule {
            set_out(Recursor {
                target: out.clone(),
                program: rule.action.clone(),
                found_at_index: rule.action_index,
                mode: Mode::Projected,
                source: Source::Guarded,
            });
        }
        Plan { base, exploit, found, rule, notices }
    }

    fn shape(&self, c: &Code) -> Proliferation {
        let cfg = layout::cfg_of(c).unwrap_or(self.cfg.cfg);
        Proliferation {
            m: self.cfg.descendants,
            p: Ratio::new(cfg.p_num as u64, cfg.p_den as u64),
            memory_cap: self.cfg.memory,
            limits: self.limits(),
        }
    }

    fn build<R: Rng>(&self, c: &Code, plan: &Plan, rng: &mut R) -> Population {
        let budget = layout::cfg_of(c).map(|p| EvalBudget::with_steps(p.s_budget as u64)).unwrap_or_default();
        let mut pop = fit::descendants(c, &plan.base, &plan.exploit, &self.shape(c), rng, &self.explore, budget);
        for m in pop.members_mut() {
            if !m.dead_on_arrival
                && layout::slot(&m.code, layout::NB).and_then(Code::children).is_some_and(|b| !b.is_empty())
            {
                m.code = refresh_notices(&m.code, budget);
            }
        }
        pop
    }

    /// The `m` descendants of `c`.
    pub fn proliferate<R: Rng>(&self, c: &Code, rng: &mut R) -> Population {
        self.build(c, &self.plan(c), rng)
    }

    pub fn step(&self, state: BranchState, env: &Environment) -> (BranchState, GenerationReport) {
        let t = state.generation;
        let demand = env.demand(t).unwrap_or(Atom::Tok(Tok::Nil));
        let flag = env.condition(t);
        let parents: Vec<(u64, Code)> = state
            .population
            .members()
            .iter()
            .map(|m| (m.id, flag.map_or_else(|| m.code.clone(), |f| write_flag(&m.code, f))))
            .collect();

        let mut slot_of: HashMap<&Code, usize> = HashMap::new();
        let mut distinct: Vec<&Code> = Vec::new();
        for (_, c) in &parents {
            slot_of.entry(c).or_insert_with(|| {
                distinct.push(c);
                distinct.len() - 1
            });
        }
        let plans: Vec<Plan> = distinct.par_iter().map(|c| self.plan(c)).collect();

        let mut next = Population::starting_at(state.population.next_id());
        let mut recursors: Vec<FoundRecursor> = Vec::new();
        let mut notices: Vec<Program> = Vec::new();
        for (id, c) in &parents {
            let plan = &plans[slot_of[c]];
            let mut rng = member_stream(state.seed, t, *id);
            let kids = self.build(c, plan, &mut rng);
            let from = next.len();
            next.absorb(kids);
            for k in &mut next.members_mut()[from..] {
                k.parent_id = Some(*id);
            }
            for r in &plan.found {
                let f = FoundRecursor {
                    addr: r.target.clone(),
                    prog: r.program.clone(),
                    index: r.found_at_index,
                    mode: r.mode,
                };
                if !recursors.contains(&f) {
                    recursors.push(f);
                }
            }
            for a in &plan.notices {
                if !notices.contains(a) {
                    notices.push(a.clone());
                }
            }
        }

        let viable = next.members().iter().filter(|m| !m.dead_on_arrival);
        let correct = viable.clone().filter(|m| out_is(&m.code, demand)).count();
        let exploit_produced = next.members().iter().filter(|m| m.origin == Origin::Exploit).count();
        let exploit_correct = next
            .members()
            .iter()
            .filter(|m| m.origin == Origin::Exploit && !m.dead_on_arrival && out_is(&m.code, demand))
            .count();
        let produced = next.len();
        let correct_fraction = if produced == 0 { 0.0 } else { correct as f64 / produced as f64 };

        if t < self.cfg.warmup {
            next = warmup_seed(next, demand);
        }
        let mut rng = member_stream(state.seed, t, SELECTION_STREAM);
        let survivors = select(next, demand, self.cfg.population, &mut rng);
        let extinct = survivors.is_empty();
        let report = GenerationReport {
            generation: t,
            demand,
            produced,
            survivors: survivors.len(),
            correct_fraction,
            recursors,
            notices,
            extinct,
            correct,
            exploit_produced,
            exploit_correct,
        };
        (BranchState { population: survivors, generation: t + 1, seed: state.seed, extinct }, report)
    }

    /// Steps until `T` generations have run or the population dies out.
    pub fn run(&self, env: &Environment) -> Result<Vec<GenerationReport>, ConfigError> {
        let mut reports = Vec::new();
        self.run_with(env, |_, r| reports.push(r.clone()))?;
        Ok(reports)
    }

    /// Like [`Evolution::run`], handing every post-selection state and its
    /// report to `visit`.
    pub fn run_with(
        &self,
        env: &Environment,
        mut visit: impl FnMut(&BranchState, &GenerationReport),
    ) -> Result<(), ConfigError> {
        if self.cfg.steps > env.length {
            return Err(ConfigError::Steps { steps: self.cfg.steps, length: env.length });
        }
        let mut state = self.init_population();
        for _ in 0..self.cfg.steps {
            let (next, report) = self.step(state, env);
            visit(&next, &report);
            state = next;
            if state.extinct {
                break;
            }
        }
        Ok(())
    }
}

/// Forces the lowest-id viable member to answer `demand` when nobody does.
/// If every member is dead on arrival the lowest-id one is revived.
pub fn warmup_seed(mut pop: Population, demand: Atom) -> Population {
    if pop.members().iter().any(|m| !m.dead_on_arrival && out_is(&m.code, demand)) {
        return pop;
    }
    let members = pop.members_mut();
    let pick = members.iter().position(|m| !m.dead_on_arrival).or(if members.is_empty() { None } else { Some(0) });
    if let Some(i) = pick {
        let m = &mut members[i];
        m.code = layout::with_slot(&m.code, layout::OUT, Code::Leaf(demand));
        m.dead_on_arrival = false;
    }
    pop
}

/// Viable members answering `demand`, thinned to `cap` by seeded sampling
/// that keeps id order.
pub fn select<R: Rng>(mut pop: Population, demand: Atom, cap: usize, rng: &mut R) -> Population {
    pop.retain(|m| !m.dead_on_arrival && out_is(&m.code, demand));
    if pop.len() > cap {
        let mut keep: Vec<usize> = sample(rng, pop.len(), cap).into_vec();
        keep.sort_unstable();
        let ids: Vec<u64> = keep.iter().map(|&i| pop.members()[i].id).collect();
        pop.retain(|m| ids.binary_search(&m.id).is_ok());
    }
    pop
}

/// Runs `cfg` on `env` from a fresh seed population.
pub fn run(cfg: &EvolutionConfig, env: &Environment) -> Result<Vec<GenerationReport>, ConfigError> {
    Evolution::new(cfg.clone())?.run(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{arithmetic_env, nested_env, NestedScript};

    fn p(s: &str) -> Program {
        s.parse().unwrap()
    }

    fn engine(cfg: EvolutionConfig) -> Evolution {
        Evolution::new(cfg).unwrap()
    }

    fn with_history(outs: &[i64], own: i64) -> Code {
        let seed = layout::seed(&CfgParams::default());
        let mut c = layout::with_slot(&seed, layout::OUT, Code::int(outs[0]));
        for &v in &outs[1..] {
            let next = layout::with_slot(&c, layout::OUT, Code::int(v));
            c = code::store_memory(&c, &next, 20, Limits::default()).unwrap();
        }
        let next = layout::with_slot(&c, layout::OUT, Code::int(own));
        code::store_memory(&c, &next, 20, Limits::default()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::default().validate().is_ok());
        let bad = EvolutionConfig { descendants: 1, ..Default::default() };
        assert_eq!(bad.validate(), Err(ConfigError::Descendants));
        let bad = EvolutionConfig { memory: 2, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ConfigError::Memory { .. })));
        let bad = EvolutionConfig { population: 0, ..Default::default() };
        assert_eq!(bad.validate(), Err(ConfigError::Population));
    }

    #[test]
    fn init_population_copies_the_seed() {
        let e = engine(EvolutionConfig { population: 4, ..Default::default() });
        let s = e.init_population();
        assert_eq!(s.population.len(), 4);
        assert_eq!(s.generation, 0);
        assert!(!s.extinct);
        let first = &s.population.members()[0].code;
        assert!(s.population.members().iter().all(|m| m.code == *first));
        assert_eq!(layout::cfg_of(first), Some(CfgParams::default()));
    }

    #[test]
    fn self_diagonalize_examples() {
        let e = engine(EvolutionConfig::default());
        let found = e.self_diagonalize(&with_history(&[1, 2], 3));
        assert_eq!(found[0].target, layout::out());
        assert_eq!(found[0].program, p("ADD(1)"));
        assert!(e.self_diagonalize(&layout::seed(&CfgParams::default())).is_empty());
    }

    #[test]
    fn rank_two_turns_rec_history_into_add_four() {
        let e = engine(EvolutionConfig::default());
        let seed = layout::seed(&CfgParams::default());
        let snap = |out: Code, k: i64| {
            rec_upsert(&layout::with_slot(&seed, layout::OUT, out), &layout::out(), &Program::Add(k))
        };
        let mut mem = Vec::new();
        for k in 1..=2 {
            mem.extend([snap(Code::tok(Tok::Lp), k), snap(Code::int(9), k), snap(Code::tok(Tok::Rp), k)]);
        }
        let c = layout::with_slot(&snap(Code::tok(Tok::Lp), 3), layout::MEM, Code::node(mem));
        // Only LP snapshots are sampled: ADD(1), ADD(2) from memory and ADD(3) on c.
        let (base, found) = e.diagonalize_ranks(&c);
        let rank2 = found.iter().find(|r| r.target.starts_with(&layout::rec())).unwrap();
        assert_eq!(rank2.program, p("ADD(1)"));
        assert_eq!(rank2.target, Address::new(vec![2, 1, 2, 2]));
        let table = rec_entries(&base);
        assert_eq!(table[0], (layout::out(), p("ADD(4)")));
        assert_eq!(table[1], (Address::new(vec![2, 1, 2, 2]), p("ADD(1)")));
        assert_eq!(entry_ranks(&base), vec![1, 2]);
    }

    #[test]
    fn rank_trace_skips_non_markers_once_markers_exist() {
        let mut c = layout::with_slot(&layout::seed(&CfgParams::default()), layout::OUT, Code::tok(Tok::Lp));
        let next = layout::with_slot(&c, layout::OUT, Code::int(1));
        c = code::store_memory(&c, &next, 20, Limits::default()).unwrap();
        assert!(rank_trace(&c, 2).is_none());
    }

    #[test]
    fn select_and_warmup() {
        let seed = layout::seed(&CfgParams::default());
        let mut pop = Population::new();
        for v in [4, 4, 5] {
            pop.push(layout::with_slot(&seed, layout::OUT, Code::int(v)), None, Origin::Explore);
        }
        let mut rng = member_stream(0, 0, 0);
        assert_eq!(select(pop.clone(), Atom::Int(4), 10, &mut rng).len(), 2);
        assert!(select(pop.clone(), Atom::Int(9), 10, &mut rng).is_empty());
        let a = select(pop.clone(), Atom::Int(4), 1, &mut member_stream(1, 2, 3));
        let b = select(pop.clone(), Atom::Int(4), 1, &mut member_stream(1, 2, 3));
        assert_eq!(a.len(), 1);
        assert_eq!(a.members()[0].id, b.members()[0].id);

        let forced = warmup_seed(pop.clone(), Atom::Int(9));
        assert_eq!(forced.members().iter().filter(|m| out_is(&m.code, Atom::Int(9))).count(), 1);
        assert!(out_is(&forced.members()[0].code, Atom::Int(9)));
        let same = warmup_seed(pop.clone(), Atom::Int(5));
        assert_eq!(same.members(), pop.members());
    }

    #[test]
    fn proliferation_counts() {
        let e = engine(EvolutionConfig::default());
        let c = with_history(&[1, 2], 3);
        let kids = e.proliferate(&c, &mut member_stream(0, 0, 0));
        assert_eq!(kids.len(), 8);
        let up = kids.members().iter().filter(|m| out_is(&m.code, Atom::Int(4))).count();
        assert!(up >= 6);
        for k in kids.members() {
            assert_eq!(layout::memory(&k.code).len(), layout::memory(&c).len() + 1);
        }
        let fresh = layout::seed(&CfgParams::default());
        let kids = e.proliferate(&fresh, &mut member_stream(0, 0, 0));
        assert!(kids.members().iter().all(|m| m.origin == Origin::Explore));
    }

    #[test]
    fn run_basics() {
        let env = arithmetic_env(1, 1, 10).unwrap();
        let cfg = EvolutionConfig { steps: 0, ..Default::default() };
        assert!(run(&cfg, &env).unwrap().is_empty());
        let cfg = EvolutionConfig { steps: 11, ..Default::default() };
        assert!(matches!(run(&cfg, &env), Err(ConfigError::Steps { .. })));
        let cfg = EvolutionConfig { population: 8, steps: 6, ..Default::default() };
        let a = run(&cfg, &env).unwrap();
        assert_eq!(a.iter().map(|r| r.generation).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
        let b = run(&cfg, &env).unwrap();
        let text = |rs: &[GenerationReport]| rs.iter().map(GenerationReport::to_json_line).collect::<Vec<_>>();
        assert_eq!(text(&a), text(&b));
    }

    #[test]
    fn extinction_ends_the_run() {
        let env = nested_env(&NestedScript::canonical(2, 3)).unwrap();
        // No warmup: nothing answers LP at the first step.
        let cfg = EvolutionConfig { population: 4, warmup: 0, steps: 10, ..Default::default() };
        let reports = run(&cfg, &env).unwrap();
        let last = reports.last().unwrap();
        assert!(last.extinct);
        assert_eq!(reports.iter().filter(|r| r.extinct).count(), 1);
    }

    #[test]
    fn json_line_shape() {
        let r = GenerationReport {
            generation: 2,
            demand: Atom::Int(3),
            produced: 8,
            survivors: 6,
            correct_fraction: 0.75,
            recursors: vec![FoundRecursor { addr: layout::out(), prog: p("ADD(1)"), index: 25, mode: Mode::Projected }],
            notices: vec![],
            extinct: false,
            correct: 6,
            exploit_produced: 6,
            exploit_correct: 6,
        };
        assert_eq!(
            r.to_json_line(),
            r#"{"gen":2,"demand":"3","produced":8,"survivors":6,"correct_frac":0.750000,"recursors":[{"addr":"[1]","prog":"ADD(1)","index":25,"mode":"projected"}],"notices":[],"extinct":false}"#
        );
    }
}
