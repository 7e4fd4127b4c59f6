//! Compilation of local past PDL formulas into local cascades of localized
//! transducers.
//!
//! Each subformula becomes one stage reading the outputs of earlier stages
//! at the same event. Letters, constants and boolean connectives are
//! stateless. A diamond `⟨π⟩φ` with `π` local to process `i` becomes a stage
//! whose only nontrivial local state lives at `i`: a deterministic automaton
//! for the reversed path read forward along the `i`-events, over the truth
//! vectors of the tests of `π`.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{EvRef, EventFormula, Formulas, PathFormula, PathRef, TraceFormula, TraceRef};
use crate::machines::{AsyncAutomaton, AsyncTransducer, CascadeChain, GlobalState};
use crate::trace::{DistributedAlphabet, LetterId, ProcId, Trace};

/// Limits of the construction.
#[derive(Clone, Debug)]
pub struct CompileConfig {
    /// Bound on the states of a single stage automaton, and on the entries of
    /// materialized transition tables.
    pub state_budget: usize,
    /// Bound on the number of distinct tests in one path.
    pub max_tests: usize,
    pub minimize: bool,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            state_budget: 1_000_000,
            max_tests: 16,
            minimize: true,
        }
    }
}

/// Deterministic automaton for one local path, read forward along the chain
/// of its process.
///
/// State `0` means "no event of the process yet". On an event of the
/// process with test valuation `v` (bit `k` is the truth of `tests[k]`),
/// the state moves to `next[q][v]` and the output is `out[q][v]`: whether
/// some match of the path starts at this event. On other events the state
/// is unchanged and the output is `idle[v]`, a match without moves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathDfa {
    pub process: Option<ProcId>,
    /// Source formulas of the tests; not stored in machine files.
    #[serde(skip)]
    pub tests: Vec<EvRef>,
    pub next: Vec<Vec<u32>>,
    pub out: Vec<Vec<bool>>,
    pub idle: Vec<bool>,
}

impl PathDfa {
    pub fn num_states(&self) -> usize {
        self.next.len()
    }
}

#[derive(Default)]
struct Nfa {
    eps: Vec<Vec<u32>>,
    tests: Vec<Vec<(u32, u32)>>,
    moves: Vec<Vec<u32>>,
}

impl Nfa {
    fn add(&mut self) -> u32 {
        self.eps.push(Vec::new());
        self.tests.push(Vec::new());
        self.moves.push(Vec::new());
        (self.eps.len() - 1) as u32
    }
}

struct NfaBuilder<'a> {
    f: &'a Formulas,
    nfa: Nfa,
    tests: Vec<EvRef>,
}

impl NfaBuilder<'_> {
    fn test_index(&mut self, x: EvRef) -> u32 {
        match self.tests.iter().position(|&t| t == x) {
            Some(k) => k as u32,
            None => {
                self.tests.push(x);
                (self.tests.len() - 1) as u32
            }
        }
    }

    /// Thompson fragment for the reversal of `p`.
    fn reversed(&mut self, p: PathRef) -> (u32, u32) {
        match self.f.path(p).clone() {
            PathFormula::Move(_) => {
                let (s, e) = (self.nfa.add(), self.nfa.add());
                self.nfa.moves[s as usize].push(e);
                (s, e)
            }
            PathFormula::Test(x) => self.test(x),
            PathFormula::Sum(ps) => {
                let (s, e) = (self.nfa.add(), self.nfa.add());
                for q in ps {
                    let (qs, qe) = self.reversed(q);
                    self.nfa.eps[s as usize].push(qs);
                    self.nfa.eps[qe as usize].push(e);
                }
                (s, e)
            }
            PathFormula::Concat(ps) => {
                let mut frags = ps.iter().rev().map(|&q| self.reversed(q)).collect::<Vec<_>>();
                for w in frags.windows(2) {
                    self.nfa.eps[w[0].1 as usize].push(w[1].0);
                }
                let first = frags.first().expect("nonempty concat").0;
                let last = frags.pop().expect("nonempty concat").1;
                (first, last)
            }
            PathFormula::Star(q) => {
                let (s, e) = (self.nfa.add(), self.nfa.add());
                let (qs, qe) = self.reversed(q);
                self.nfa.eps[s as usize].extend([e, qs]);
                self.nfa.eps[qe as usize].extend([qs, e]);
                (s, e)
            }
        }
    }

    fn test(&mut self, x: EvRef) -> (u32, u32) {
        let (s, e) = (self.nfa.add(), self.nfa.add());
        let k = self.test_index(x);
        self.nfa.tests[s as usize].push((k, e));
        (s, e)
    }
}

type StateSet = Vec<u64>;

fn set_with(n: usize, items: impl IntoIterator<Item = u32>) -> StateSet {
    let mut s = vec![0u64; n.div_ceil(64)];
    for i in items {
        s[i as usize / 64] |= 1 << (i % 64);
    }
    s
}

fn members(s: &StateSet) -> impl Iterator<Item = u32> + '_ {
    s.iter().enumerate().flat_map(|(w, &bits)| {
        (0..64).filter(move |b| bits >> b & 1 == 1).map(move |b| (w * 64 + b) as u32)
    })
}

fn contains(s: &StateSet, i: u32) -> bool {
    s[i as usize / 64] >> (i % 64) & 1 == 1
}

fn closure(nfa: &Nfa, start: &StateSet, v: usize) -> StateSet {
    let mut out = start.clone();
    let mut stack: Vec<u32> = members(start).collect();
    while let Some(q) = stack.pop() {
        let q = q as usize;
        let succ = nfa.eps[q]
            .iter()
            .copied()
            .chain(nfa.tests[q].iter().filter(|(k, _)| v >> k & 1 == 1).map(|&(_, t)| t));
        for r in succ {
            if !contains(&out, r) {
                out[r as usize / 64] |= 1 << (r % 64);
                stack.push(r);
            }
        }
    }
    out
}

/// Builds the automaton for `⟨π⟩φ` (`tail = Some(φ)`) or `⟨π⟩`.
pub fn path_to_dfa(f: &Formulas, p: PathRef, tail: Option<EvRef>, cfg: &CompileConfig) -> Result<PathDfa> {
    let moves = f.top_level_moves(p);
    if moves.count_ones() > 1 {
        return Err(Error::Input(format!(
            "path `{}` moves on several processes",
            f.show_path(p)
        )));
    }
    let process = (moves != 0).then(|| moves.trailing_zeros() as ProcId);
    let mut b = NfaBuilder {
        f,
        nfa: Nfa::default(),
        tests: Vec::new(),
    };
    // the reversed word reads the final test first
    let (init, fin) = match tail {
        Some(x) => {
            let (ts, te) = b.test(x);
            let (ps, pe) = b.reversed(p);
            b.nfa.eps[te as usize].push(ps);
            (ts, pe)
        }
        None => b.reversed(p),
    };
    if b.tests.len() > cfg.max_tests {
        return Err(Error::Resource(format!(
            "path `{}` has {} distinct tests, the limit is {}",
            f.show_path(p),
            b.tests.len(),
            cfg.max_tests
        )));
    }
    let nfa = b.nfa;
    let tests = b.tests;
    let n = nfa.eps.len();
    let nv = 1usize << tests.len();
    let init_set = set_with(n, [init]);
    let starts: Vec<StateSet> = (0..nv).map(|v| closure(&nfa, &init_set, v)).collect();
    let idle: Vec<bool> = starts.iter().map(|s| contains(s, fin)).collect();

    // subset construction; state 0 is "before the first event"
    let mut index: HashMap<StateSet, u32> = HashMap::new();
    let mut sets: Vec<Option<StateSet>> = vec![None];
    let mut next: Vec<Vec<u32>> = Vec::new();
    let mut out: Vec<Vec<bool>> = Vec::new();
    let mut q = 0;
    while q < sets.len() {
        let mut row = Vec::with_capacity(nv);
        let mut orow = Vec::with_capacity(nv);
        for v in 0..nv {
            let target = match &sets[q] {
                None => starts[v].clone(),
                Some(d) => {
                    let mut m = init_set.clone();
                    for s in members(d) {
                        for &r in &nfa.moves[s as usize] {
                            m[r as usize / 64] |= 1 << (r % 64);
                        }
                    }
                    closure(&nfa, &m, v)
                }
            };
            orow.push(contains(&target, fin));
            let id = match index.get(&target) {
                Some(&id) => id,
                None => {
                    let id = sets.len() as u32;
                    if sets.len() >= cfg.state_budget {
                        return Err(Error::Resource(format!(
                            "automaton for `{}` exceeds {} states",
                            f.show_path(p),
                            cfg.state_budget
                        )));
                    }
                    index.insert(target.clone(), id);
                    sets.push(Some(target));
                    id
                }
            };
            row.push(id);
        }
        next.push(row);
        out.push(orow);
        q += 1;
    }
    let mut dfa = PathDfa {
        process,
        tests,
        next,
        out,
        idle,
    };
    if process.is_none() {
        // no moves: the state is never consulted
        dfa.next = vec![vec![0; nv]];
        dfa.out = vec![dfa.idle.clone()];
    } else if cfg.minimize {
        minimize(&mut dfa);
    }
    Ok(dfa)
}

/// Merges states with the same future outputs (Moore refinement).
fn minimize(d: &mut PathDfa) {
    let n = d.next.len();
    let mut class: Vec<u32> = {
        let mut ids: HashMap<&Vec<bool>, u32> = HashMap::new();
        d.out
            .iter()
            .map(|o| {
                let k = ids.len() as u32;
                *ids.entry(o).or_insert(k)
            })
            .collect()
    };
    loop {
        let mut ids: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
        let refined: Vec<u32> = (0..n)
            .map(|q| {
                let sig = (class[q], d.next[q].iter().map(|&r| class[r as usize]).collect());
                let k = ids.len() as u32;
                *ids.entry(sig).or_insert(k)
            })
            .collect();
        let stable = ids.len() == class.iter().copied().max().map_or(0, |m| m as usize + 1);
        class = refined;
        if stable {
            break;
        }
    }
    // renumber so that the class of the initial state is 0, in BFS order
    let mut order: Vec<Option<u32>> = vec![None; n];
    let mut reps = vec![0usize];
    order[class[0] as usize] = Some(0);
    let mut k = 0;
    while k < reps.len() {
        let q = reps[k];
        for &r in &d.next[q] {
            let c = class[r as usize] as usize;
            if order[c].is_none() {
                order[c] = Some(reps.len() as u32);
                reps.push(r as usize);
            }
        }
        k += 1;
    }
    let next = reps
        .iter()
        .map(|&q| d.next[q].iter().map(|&r| order[class[r as usize] as usize].expect("reached")).collect())
        .collect();
    let out = reps.iter().map(|&q| d.out[q].clone()).collect();
    d.next = next;
    d.out = out;
}

/// One stage of a compiled cascade. Stage references point to earlier
/// stages.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Const(bool),
    /// True at events whose letter is in the mask.
    Letters(u64),
    Not(usize),
    Or(Vec<usize>),
    And(Vec<usize>),
    /// A path automaton; `tests[k]` is the stage giving bit `k`.
    Path { dfa: PathDfa, tests: Vec<usize> },
    /// Remembers, at `process`, the value of stage `input` at its last event:
    /// state 0 none yet, 1 false, 2 true.
    Flag { process: ProcId, input: usize },
}

impl Stage {
    /// Local states at the process carrying the stage's state, if any.
    pub fn states(&self) -> (Option<ProcId>, usize) {
        match self {
            Stage::Path { dfa, .. } => (dfa.process, dfa.num_states()),
            Stage::Flag { process, .. } => (Some(*process), 3),
            _ => (None, 1),
        }
    }
}

/// A compiled cascade: stages in dependency order and the stages whose
/// outputs form the result.
#[derive(Clone, Debug)]
pub struct CompiledCascade {
    alphabet: Arc<DistributedAlphabet>,
    stages: Vec<Stage>,
    outputs: Vec<usize>,
    prog: Program,
}

impl PartialEq for CompiledCascade {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet && self.stages == other.stages && self.outputs == other.outputs
    }
}

impl Eq for CompiledCascade {}

const NO_PROC: u32 = u32::MAX;

/// Flat form of the stages used for stepping.
#[derive(Clone, Debug, Default)]
struct Program {
    ops: Vec<Op>,
    refs: Vec<u32>,
    next: Vec<u32>,
    out: Vec<bool>,
    idle: Vec<bool>,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(bool),
    Letters(u64),
    Not(u32),
    Or(u32, u32),
    And(u32, u32),
    Path {
        process: u32,
        refs: u32,
        nrefs: u32,
        table: u32,
        idle: u32,
    },
    Flag {
        process: u32,
        input: u32,
    },
}

impl Program {
    fn new(stages: &[Stage]) -> Program {
        let mut p = Program::default();
        for st in stages {
            let op = match st {
                Stage::Const(b) => Op::Const(*b),
                Stage::Letters(m) => Op::Letters(*m),
                Stage::Not(x) => Op::Not(*x as u32),
                Stage::Or(xs) | Stage::And(xs) => {
                    let start = p.refs.len() as u32;
                    p.refs.extend(xs.iter().map(|&x| x as u32));
                    let end = p.refs.len() as u32;
                    if matches!(st, Stage::Or(_)) {
                        Op::Or(start, end)
                    } else {
                        Op::And(start, end)
                    }
                }
                Stage::Path { dfa, tests } => {
                    let refs = p.refs.len() as u32;
                    p.refs.extend(tests.iter().map(|&x| x as u32));
                    let table = p.next.len() as u32;
                    for (row, orow) in dfa.next.iter().zip(&dfa.out) {
                        p.next.extend_from_slice(row);
                        p.out.extend_from_slice(orow);
                    }
                    let idle = p.idle.len() as u32;
                    p.idle.extend_from_slice(&dfa.idle);
                    Op::Path {
                        process: dfa.process.map_or(NO_PROC, |i| i as u32),
                        refs,
                        nrefs: tests.len() as u32,
                        table,
                        idle,
                    }
                }
                Stage::Flag { process, input } => Op::Flag {
                    process: *process as u32,
                    input: *input as u32,
                },
            };
            p.ops.push(op);
        }
        p
    }
}

impl CompiledCascade {
    fn assemble(alphabet: Arc<DistributedAlphabet>, stages: Vec<Stage>, outputs: Vec<usize>) -> Self {
        let prog = Program::new(&stages);
        CompiledCascade {
            alphabet,
            stages,
            outputs,
            prog,
        }
    }

    pub fn alphabet(&self) -> &DistributedAlphabet {
        &self.alphabet
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    /// Local states before the first event, one per stage.
    pub fn initial_state(&self) -> Vec<u32> {
        vec![0; self.stages.len()]
    }

    /// Processes one event labelled `a`: updates `state` and writes the
    /// output of every stage into `o`.
    pub fn step(&self, state: &mut [u32], a: LetterId, o: &mut Vec<bool>) {
        let loc = self.alphabet.loc_mask(a);
        let p = &self.prog;
        o.clear();
        o.resize(p.ops.len(), false);
        for (k, op) in p.ops.iter().enumerate() {
            o[k] = match *op {
                Op::Const(b) => b,
                Op::Letters(m) => m >> a & 1 == 1,
                Op::Not(x) => !o[x as usize],
                Op::Or(s, e) => p.refs[s as usize..e as usize].iter().any(|&x| o[x as usize]),
                Op::And(s, e) => p.refs[s as usize..e as usize].iter().all(|&x| o[x as usize]),
                Op::Path {
                    process,
                    refs,
                    nrefs,
                    table,
                    idle,
                } => {
                    let tests = &p.refs[refs as usize..(refs + nrefs) as usize];
                    let v = tests
                        .iter()
                        .enumerate()
                        .fold(0usize, |v, (b, &x)| v | (usize::from(o[x as usize]) << b));
                    if process != NO_PROC && loc >> process & 1 == 1 {
                        let cell = table as usize + ((state[k] as usize) << nrefs) + v;
                        state[k] = p.next[cell];
                        p.out[cell]
                    } else {
                        p.idle[idle as usize + v]
                    }
                }
                Op::Flag { process, input } => {
                    if loc >> process & 1 == 1 {
                        state[k] = 1 + u32::from(o[input as usize]);
                    }
                    state[k] == 2
                }
            };
        }
    }

    /// The result outputs among the stage outputs of one event.
    pub fn select(&self, o: &[bool]) -> Vec<bool> {
        self.outputs.iter().map(|&k| o[k]).collect()
    }

    /// Runs every stage; returns the final local state of each stage and the
    /// output bits of every stage at every event.
    pub fn run(&self, t: &Trace) -> Result<(Vec<u32>, Vec<Vec<bool>>)> {
        if t.alphabet() != &*self.alphabet {
            return Err(Error::Input("trace and machine use different alphabets".into()));
        }
        let mut state = self.initial_state();
        let mut all = Vec::with_capacity(t.len());
        let mut o = Vec::new();
        for e in t.events() {
            self.step(&mut state, t.label(e), &mut o);
            all.push(o.clone());
        }
        Ok((state, all))
    }

    /// Output tuple at every event.
    pub fn labels(&self, t: &Trace) -> Result<Vec<Vec<bool>>> {
        let (_, all) = self.run(t)?;
        Ok(all
            .into_iter()
            .map(|o| self.select(&o))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&CascadeRepr {
            alphabet: (*self.alphabet).clone(),
            stages: self.stages.clone(),
            outputs: self.outputs.clone(),
        })
        .expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: CascadeRepr =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("bad cascade file: {e}")))?;
        let c = CompiledCascade {
            alphabet: Arc::new(r.alphabet),
            stages: r.stages,
            outputs: r.outputs,
            prog: Program::default(),
        };
        c.validate()?;
        Ok(Self::assemble(c.alphabet, c.stages, c.outputs))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Input(m));
        let np = self.alphabet.num_processes();
        for (k, st) in self.stages.iter().enumerate() {
            let refs: Vec<usize> = match st {
                Stage::Const(_) | Stage::Letters(_) => vec![],
                Stage::Not(x) => vec![*x],
                Stage::Or(xs) | Stage::And(xs) => xs.clone(),
                Stage::Path { tests, .. } => tests.clone(),
                Stage::Flag { input, .. } => vec![*input],
            };
            if refs.iter().any(|&x| x >= k) {
                return bad(format!("stage {k} reads a later stage"));
            }
            match st {
                Stage::Path { dfa, tests } => {
                    let nv = 1usize << tests.len();
                    let n = dfa.next.len();
                    if dfa.process.is_some_and(|i| i >= np)
                        || n == 0
                        || dfa.out.len() != n
                        || dfa.idle.len() != nv
                        || dfa.next.iter().any(|r| r.len() != nv || r.iter().any(|&q| q as usize >= n))
                        || dfa.out.iter().any(|r| r.len() != nv)
                    {
                        return bad(format!("stage {k} has malformed tables"));
                    }
                }
                Stage::Flag { process, .. } if *process >= np => {
                    return bad(format!("stage {k} names an unknown process"));
                }
                _ => {}
            }
        }
        if self.outputs.iter().any(|&k| k >= self.stages.len()) {
            return bad("output refers to a missing stage".into());
        }
        Ok(())
    }

    /// Stage `k` as an explicit transducer reading the letter together with
    /// the outputs of stages `0..k` (bit `m` of the context is stage `m`).
    pub fn stage_transducer(&self, k: usize, budget: usize) -> Result<AsyncTransducer> {
        let alph = self.alphabet.clone();
        let np = alph.num_processes();
        let st = &self.stages[k];
        let (owner, n) = st.states();
        let contexts = 1usize
            .checked_shl(k as u32)
            .filter(|&c| c.saturating_mul(alph.num_letters()).saturating_mul(n) <= budget)
            .ok_or_else(|| Error::Resource(format!("stage {k} needs more than {budget} table entries")))?;
        let mut sizes = vec![1; np];
        if let Some(i) = owner {
            sizes[i] = n;
        }
        let nl = alph.num_letters();
        let mut t = AsyncTransducer::from_fn(alph.clone(), contexts, &sizes, vec![0; np], 2, |x, local| {
            let a = x % nl;
            let c = x / nl;
            let bit = |m: usize| c >> m & 1 == 1;
            let pos = owner.and_then(|i| alph.loc(a).iter().position(|&p| p == i));
            let q = pos.map_or(0, |p| local[p]);
            let mut next = local.to_vec();
            let o = match st {
                Stage::Const(b) => *b,
                Stage::Letters(m) => m >> a & 1 == 1,
                Stage::Not(x) => !bit(*x),
                Stage::Or(xs) => xs.iter().any(|&x| bit(x)),
                Stage::And(xs) => xs.iter().all(|&x| bit(x)),
                Stage::Path { dfa, tests } => {
                    let v = tests
                        .iter()
                        .enumerate()
                        .fold(0usize, |v, (b, &x)| v | (usize::from(bit(x)) << b));
                    match pos {
                        Some(p) => {
                            next[p] = dfa.next[q][v] as usize;
                            dfa.out[q][v]
                        }
                        None => dfa.idle[v],
                    }
                }
                Stage::Flag { input, .. } => match pos {
                    Some(p) => {
                        next[p] = 1 + usize::from(bit(*input));
                        bit(*input)
                    }
                    None => q == 2,
                },
            };
            (next, usize::from(o))
        })?;
        t = t.with_output_names(vec!["false".into(), "true".into()])?;
        Ok(t)
    }

    /// Every stage made explicit; `budget` bounds the table entries of the
    /// whole chain.
    pub fn to_chain(&self, budget: usize) -> Result<CascadeChain> {
        let mut left = budget;
        let mut stages = Vec::with_capacity(self.stages.len());
        for k in 0..self.stages.len() {
            let t = self.stage_transducer(k, left)?;
            let a = t.automaton();
            let used: usize = (0..a.num_inputs()).map(|x| a.joint_size(a.base_letter(x))).sum();
            left = left.saturating_sub(used);
            stages.push(t);
        }
        CascadeChain::new(stages)
    }

    pub fn size_report(&self, formula_size: usize) -> SizeReport {
        let per_stage: Vec<usize> = self.stages.iter().map(|s| s.states().1).collect();
        let global = per_stage
            .iter()
            .fold(BigUint::from(1u32), |acc, &n| acc * BigUint::from(n));
        SizeReport {
            stages: self.stages.len(),
            per_stage_states: per_stage,
            global_state_count: global,
            formula_size,
        }
    }

    /// Every stage keeps its state on at most one process.
    pub fn locality_audit(&self) -> bool {
        self.stages.iter().all(|s| match s.states() {
            (None, n) => n == 1,
            (Some(_), _) => true,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CascadeRepr {
    alphabet: DistributedAlphabet,
    stages: Vec<Stage>,
    outputs: Vec<usize>,
}

/// Sizes of a compiled cascade.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeReport {
    pub stages: usize,
    pub per_stage_states: Vec<usize>,
    /// `∏` of the local state counts over stages and processes.
    pub global_state_count: BigUint,
    /// Node count of the source formula.
    pub formula_size: usize,
}

impl SizeReport {
    /// `global_state_count ≤ 2^(c·|φ|)`
    pub fn within_bound(&self, c: u64) -> bool {
        self.global_state_count.bits() <= c * self.formula_size as u64
            || self.global_state_count == BigUint::from(1u32) << (c * self.formula_size as u64)
    }
}

impl fmt::Display for SizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "formula_size={}", self.formula_size)?;
        writeln!(f, "stages={}", self.stages)?;
        writeln!(f, "stateful_stages={}", self.per_stage_states.iter().filter(|&&n| n > 1).count())?;
        writeln!(f, "max_stage_states={}", self.per_stage_states.iter().max().copied().unwrap_or(1))?;
        writeln!(f, "global_state_count={}", self.global_state_count)?;
        write!(f, "log2_global_state_count={}", log2(&self.global_state_count))
    }
}

fn log2(n: &BigUint) -> String {
    let bits = n.bits();
    if bits <= 52 {
        format!("{:.3}", (n.iter_u64_digits().next().unwrap_or(0) as f64).log2().max(0.0))
    } else {
        let shift = bits - 52;
        let top: BigUint = n >> shift;
        let m = top.iter_u64_digits().next().unwrap_or(0) as f64;
        format!("{:.3}", m.log2() + shift as f64)
    }
}

/// Incremental compiler sharing stages between formulas.
pub struct Compiler<'f> {
    f: &'f Formulas,
    cfg: CompileConfig,
    stages: Vec<Stage>,
    memo: HashMap<EvRef, usize>,
    dedup: HashMap<StageKey, usize>,
    paths: HashMap<u64, Vec<usize>>,
}

#[derive(Hash, PartialEq, Eq)]
enum StageKey {
    Const(bool),
    Letters(u64),
    Not(usize),
    Or(Vec<usize>),
    And(Vec<usize>),
}

impl<'f> Compiler<'f> {
    pub fn new(f: &'f Formulas, cfg: CompileConfig) -> Self {
        Compiler {
            f,
            cfg,
            stages: Vec::new(),
            memo: HashMap::new(),
            dedup: HashMap::new(),
            paths: HashMap::new(),
        }
    }

    fn push_simple(&mut self, key: StageKey) -> usize {
        if let Some(&k) = self.dedup.get(&key) {
            return k;
        }
        let st = match &key {
            StageKey::Const(b) => Stage::Const(*b),
            StageKey::Letters(m) => Stage::Letters(*m),
            StageKey::Not(x) => Stage::Not(*x),
            StageKey::Or(xs) => Stage::Or(xs.clone()),
            StageKey::And(xs) => Stage::And(xs.clone()),
        };
        self.stages.push(st);
        let k = self.stages.len() - 1;
        self.dedup.insert(key, k);
        k
    }

    /// Stage computing `φ`.
    pub fn event(&mut self, phi: EvRef) -> Result<usize> {
        if let Some(&k) = self.memo.get(&phi) {
            return Ok(k);
        }
        if let Some(mask) = self.f.atom_mask(phi) {
            let k = self.push_simple(StageKey::Letters(mask));
            self.memo.insert(phi, k);
            return Ok(k);
        }
        let k = match self.f.event(phi).clone() {
            EventFormula::True => self.push_simple(StageKey::Const(true)),
            EventFormula::False => self.push_simple(StageKey::Const(false)),
            EventFormula::Letter(a) => self.push_simple(StageKey::Letters(1 << a)),
            EventFormula::Not(x) => {
                let x = self.event(x)?;
                self.push_simple(StageKey::Not(x))
            }
            EventFormula::Or(xs) => {
                let mut ks = xs.iter().map(|&x| self.event(x)).collect::<Result<Vec<_>>>()?;
                ks.sort_unstable();
                ks.dedup();
                if ks.len() == 1 {
                    ks[0]
                } else {
                    self.push_simple(StageKey::Or(ks))
                }
            }
            EventFormula::And(xs) => {
                let mut ks = xs.iter().map(|&x| self.event(x)).collect::<Result<Vec<_>>>()?;
                ks.sort_unstable();
                ks.dedup();
                if ks.len() == 1 {
                    ks[0]
                } else {
                    self.push_simple(StageKey::And(ks))
                }
            }
            EventFormula::Diamond(p, x) => self.path(p, Some(x))?,
            EventFormula::DiamondExists(p) => self.path(p, None)?,
            EventFormula::Yleq(..) | EventFormula::Yleq2(..) => {
                return Err(Error::Input(
                    "constants cannot be compiled directly; eliminate them first".into(),
                ))
            }
        };
        self.memo.insert(phi, k);
        Ok(k)
    }

    fn path(&mut self, p: PathRef, tail: Option<EvRef>) -> Result<usize> {
        let dfa = path_to_dfa(self.f, p, tail, &self.cfg)?;
        let tests = dfa.tests.iter().map(|&x| self.event(x)).collect::<Result<Vec<_>>>()?;
        let key = {
            let mut h = std::collections::hash_map::DefaultHasher::new();
            (dfa.process, &tests, &dfa.next, &dfa.out, &dfa.idle).hash(&mut h);
            h.finish()
        };
        let same = |st: &Stage| match st {
            Stage::Path { dfa: d, tests: t } => {
                d.process == dfa.process && *t == tests && d.next == dfa.next && d.out == dfa.out && d.idle == dfa.idle
            }
            _ => false,
        };
        if let Some(&k) = self.paths.get(&key).and_then(|ks| ks.iter().find(|&&k| same(&self.stages[k]))) {
            return Ok(k);
        }
        self.stages.push(Stage::Path { dfa, tests });
        let k = self.stages.len() - 1;
        self.paths.entry(key).or_default().push(k);
        Ok(k)
    }

    fn flag(&mut self, process: ProcId, input: usize) -> usize {
        self.stages.push(Stage::Flag { process, input });
        self.stages.len() - 1
    }

    pub fn finish(self, outputs: Vec<usize>) -> CompiledCascade {
        CompiledCascade::assemble(self.f.alphabet_arc().clone(), self.stages, outputs)
    }
}

/// A cascade computing `θ^φ`.
pub fn compile_event(f: &Formulas, phi: EvRef, cfg: &CompileConfig) -> Result<CompiledCascade> {
    let mut c = Compiler::new(f, cfg.clone());
    let k = c.event(phi)?;
    Ok(c.finish(vec![k]))
}

/// A cascade computing `θ^F` for a list of formulas (their direct product,
/// with shared stages).
pub fn compile_events(f: &Formulas, phis: &[EvRef], cfg: &CompileConfig) -> Result<CompiledCascade> {
    let mut c = Compiler::new(f, cfg.clone());
    let ks = phis.iter().map(|&x| c.event(x)).collect::<Result<Vec<_>>>()?;
    Ok(c.finish(ks))
}

/// Boolean structure of a sentence over its `EM_i` flags.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    Const(bool),
    Flag(usize),
    Not(Box<Acceptance>),
    Or(Vec<Acceptance>),
    And(Vec<Acceptance>),
}

impl Acceptance {
    fn eval(&self, flag: &dyn Fn(usize) -> bool) -> bool {
        match self {
            Acceptance::Const(b) => *b,
            Acceptance::Flag(k) => flag(*k),
            Acceptance::Not(x) => !x.eval(flag),
            Acceptance::Or(xs) => xs.iter().any(|x| x.eval(flag)),
            Acceptance::And(xs) => xs.iter().all(|x| x.eval(flag)),
        }
    }
}

/// A compiled sentence: a cascade with flag stages and the acceptance
/// condition on their final states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledSentence {
    pub cascade: CompiledCascade,
    pub acceptance: Acceptance,
}

impl CompiledSentence {
    pub fn accepts(&self, t: &Trace) -> Result<bool> {
        let (state, _) = self.cascade.run(t)?;
        Ok(self.accepts_state(&state))
    }

    /// Acceptance of a cascade state reached by [`CompiledCascade::step`].
    pub fn accepts_state(&self, state: &[u32]) -> bool {
        self.acceptance.eval(&|k| state[k] == 2)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "cascade": serde_json::from_str::<serde_json::Value>(&self.cascade.to_json()).expect("own output"),
            "acceptance": self.acceptance,
        })
        .to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |e: serde_json::Error| Error::Input(format!("bad sentence file: {e}"));
        let mut v: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
        let cascade = CompiledCascade::from_json(&v["cascade"].take().to_string())?;
        let acceptance: Acceptance = serde_json::from_value(v["acceptance"].take()).map_err(bad)?;
        Ok(CompiledSentence { cascade, acceptance })
    }

    /// The whole cascade as one asynchronous automaton with its acceptance
    /// predicate, when the tables fit in `budget` entries.
    pub fn to_automaton(&self, budget: usize) -> Result<SentenceAcceptor> {
        let chain = self.cascade.to_chain(budget)?;
        let mut acc = chain.stages()[0].clone();
        for st in &chain.stages()[1..] {
            let entries: usize = (0..acc.automaton().num_inputs())
                .map(|x| {
                    let a = acc.automaton().base_letter(x);
                    acc.automaton().joint_size(a).saturating_mul(
                        st.automaton()
                            .alphabet()
                            .loc(a)
                            .iter()
                            .map(|&i| st.automaton().num_local_states(i))
                            .product::<usize>(),
                    )
                })
                .fold(0usize, |s, n| s.saturating_add(n));
            if entries > budget {
                return Err(Error::Resource(format!("flattened automaton needs more than {budget} table entries")));
            }
            acc = crate::machines::local_cascade(&acc, st)?;
        }
        let sizes: Vec<Vec<usize>> = chain
            .stages()
            .iter()
            .map(|s| {
                (0..s.automaton().alphabet().num_processes())
                    .map(|i| s.automaton().num_local_states(i))
                    .collect()
            })
            .collect();
        let base = acc.automaton().clone();
        Ok(SentenceAcceptor {
            automaton: base,
            sizes,
            flags: self
                .cascade
                .stages
                .iter()
                .enumerate()
                .filter_map(|(k, s)| match s {
                    Stage::Flag { process, .. } => Some((k, *process)),
                    _ => None,
                })
                .collect(),
            acceptance: self.acceptance.clone(),
        })
    }
}

/// An explicit automaton for a sentence.
#[derive(Clone, Debug)]
pub struct SentenceAcceptor {
    pub automaton: AsyncAutomaton,
    sizes: Vec<Vec<usize>>,
    flags: Vec<(usize, ProcId)>,
    acceptance: Acceptance,
}

impl SentenceAcceptor {
    /// Local state of stage `k` at process `i` inside a global state.
    fn component(&self, s: &GlobalState, k: usize, i: ProcId) -> usize {
        let below: usize = self.sizes[..k].iter().map(|v| v[i]).product();
        s[i] / below % self.sizes[k][i]
    }

    pub fn is_final(&self, s: &GlobalState) -> bool {
        self.acceptance.eval(&|k| {
            let i = self
                .flags
                .iter()
                .find(|(st, _)| *st == k)
                .map(|&(_, i)| i)
                .expect("flag stage");
            self.component(s, k, i) == 2
        })
    }

    pub fn accepts(&self, t: &Trace) -> Result<bool> {
        self.automaton.accepts(t, |s| self.is_final(s))
    }
}

/// Compiles a sentence built from `EM_i φ` with boolean connectives.
pub fn compile_sentence(f: &Formulas, phi: TraceRef, cfg: &CompileConfig) -> Result<CompiledSentence> {
    let mut c = Compiler::new(f, cfg.clone());
    let mut flags: HashMap<(ProcId, usize), usize> = HashMap::new();
    let acceptance = sentence_rec(f, phi, &mut c, &mut flags)?;
    let outputs = {
        let mut v: Vec<usize> = flags.values().copied().collect();
        v.sort_unstable();
        v
    };
    Ok(CompiledSentence {
        cascade: c.finish(outputs),
        acceptance,
    })
}

fn sentence_rec(
    f: &Formulas,
    phi: TraceRef,
    c: &mut Compiler,
    flags: &mut HashMap<(ProcId, usize), usize>,
) -> Result<Acceptance> {
    Ok(match f.trace(phi).clone() {
        TraceFormula::True => Acceptance::Const(true),
        TraceFormula::False => Acceptance::Const(false),
        TraceFormula::EMi(i, x) => {
            let k = c.event(x)?;
            let fl = match flags.get(&(i, k)) {
                Some(&fl) => fl,
                None => {
                    let fl = c.flag(i, k);
                    flags.insert((i, k), fl);
                    fl
                }
            };
            Acceptance::Flag(fl)
        }
        TraceFormula::Not(x) => Acceptance::Not(Box::new(sentence_rec(f, x, c, flags)?)),
        TraceFormula::Or(xs) => Acceptance::Or(
            xs.iter()
                .map(|&x| sentence_rec(f, x, c, flags))
                .collect::<Result<_>>()?,
        ),
        TraceFormula::And(xs) => Acceptance::And(
            xs.iter()
                .map(|&x| sentence_rec(f, x, c, flags))
                .collect::<Result<_>>()?,
        ),
        TraceFormula::EM(_) | TraceFormula::Lleq(..) | TraceFormula::Lleq2(..) => {
            return Err(Error::Input(
                "only EM_i and boolean connectives can be compiled; eliminate EM and constants first".into(),
            ))
        }
    })
}

/// The gossip labelling: for every ordered pair `(i, j)`, whether
/// `Y_i ≤ Y_j`, as one cascade with outputs in row-major pair order.
pub struct Gossip {
    pub pairs: Vec<(ProcId, ProcId)>,
    pub cascade: CompiledCascade,
    pub formula_size: usize,
}

/// Builds the gossip cascade from the eliminated `Yleq` formulas.
pub fn gossip(
    alphabet: Arc<DistributedAlphabet>,
    elim: crate::elim::ElimConfig,
    cfg: &CompileConfig,
) -> Result<(Formulas, Gossip)> {
    let mut f = Formulas::new(alphabet.clone());
    let k = alphabet.num_processes();
    let mut pairs = Vec::new();
    let mut phis = Vec::new();
    {
        let mut el = crate::elim::Eliminator::new(&mut f, elim)?;
        for i in 0..k {
            for j in 0..k {
                pairs.push((i, j));
                phis.push(el.build_yleq(i, j)?);
            }
        }
    }
    let cascade = compile_events(&f, &phis, cfg)?;
    let formula_size = phis
        .iter()
        .map(|&x| f.dag_size(crate::formula::AnyFormula::Event(x)))
        .sum();
    Ok((
        f,
        Gossip {
            pairs,
            cascade,
            formula_size,
        },
    ))
}
