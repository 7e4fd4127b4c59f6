//! Asynchronous automata and letter-to-letter transducers.
//!
//! Every process `i` owns a finite list of local states; a letter `a` acts
//! on the local states of `loc(a)` through a joint table indexed by
//! `S_a = ∏_{i ∈ loc(a)} S_i`, enumerated in mixed radix with the smallest
//! process first.
//!
//! Machines read *input letters* `x = a + |Σ|·c`: a base letter `a` of the
//! distributed alphabet enriched with a context `c < contexts`. A machine
//! over the plain alphabet has one context. In a local cascade `A ∘ℓ B`,
//! `B` reads `x + n_A·γ` where `n_A` is the number of input letters of `A`
//! and `γ` is `A`'s output, so contexts encode the outputs of all earlier
//! stages.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{EvRef, Formulas};
use crate::semantics::Evaluator;
use crate::trace::{DistributedAlphabet, LetterId, ProcId, Trace};

/// One local state index per process.
pub type GlobalState = Vec<usize>;

/// A deterministic asynchronous automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsyncAutomaton {
    alphabet: Arc<DistributedAlphabet>,
    contexts: usize,
    local_states: Vec<Vec<String>>,
    initial: GlobalState,
    // delta[x][joint index over loc(x)] = joint index
    delta: Vec<Vec<u32>>,
}

impl AsyncAutomaton {
    /// Builds an automaton from explicit joint tables, one per input letter.
    pub fn new(
        alphabet: Arc<DistributedAlphabet>,
        contexts: usize,
        local_states: Vec<Vec<String>>,
        initial: GlobalState,
        delta: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let a = AsyncAutomaton {
            alphabet,
            contexts,
            local_states,
            initial,
            delta,
        };
        a.validate()?;
        Ok(a)
    }

    /// Builds an automaton from a function giving, for an input letter and
    /// the local states of `loc(a)` (ascending process order), the new local
    /// states. Local states are named by their index.
    pub fn from_fn(
        alphabet: Arc<DistributedAlphabet>,
        contexts: usize,
        sizes: &[usize],
        initial: GlobalState,
        mut f: impl FnMut(usize, &[usize]) -> Vec<usize>,
    ) -> Result<Self> {
        let names = sizes
            .iter()
            .map(|&n| (0..n).map(|s| s.to_string()).collect())
            .collect();
        let mut a = AsyncAutomaton {
            alphabet,
            contexts,
            local_states: names,
            initial,
            delta: Vec::new(),
        };
        a.check_shape()?;
        let mut delta = Vec::with_capacity(a.num_inputs());
        for x in 0..a.num_inputs() {
            let base = a.base_letter(x);
            let n = a.joint_size(base);
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let local = a.decode_local(base, j);
                let next = f(x, &local);
                row.push(a.encode_local(base, &next)? as u32);
            }
            delta.push(row);
        }
        a.delta = delta;
        a.validate()?;
        Ok(a)
    }

    /// The automaton with a single state everywhere.
    pub fn trivial(alphabet: Arc<DistributedAlphabet>, contexts: usize) -> Self {
        let k = alphabet.num_processes();
        Self::from_fn(alphabet, contexts, &vec![1; k], vec![0; k], |_, s| s.to_vec())
            .expect("trivial automaton is well formed")
    }

    fn check_shape(&self) -> Result<()> {
        let k = self.alphabet.num_processes();
        if self.contexts == 0 {
            return Err(Error::Input("a machine needs at least one context".into()));
        }
        if self.local_states.len() != k || self.initial.len() != k {
            return Err(Error::Input(format!("expected local states for {k} processes")));
        }
        for (i, s) in self.local_states.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::Input(format!(
                    "process {} has no local state",
                    self.alphabet.process_name(i)
                )));
            }
            if self.initial[i] >= s.len() {
                return Err(Error::Input(format!(
                    "initial state of process {} out of range",
                    self.alphabet.process_name(i)
                )));
            }
            let distinct: BTreeSet<&String> = s.iter().collect();
            if distinct.len() != s.len() {
                return Err(Error::Input(format!(
                    "duplicate local state names on process {}",
                    self.alphabet.process_name(i)
                )));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.check_shape()?;
        if self.delta.len() != self.num_inputs() {
            return Err(Error::Input(format!(
                "expected {} transition tables, got {}",
                self.num_inputs(),
                self.delta.len()
            )));
        }
        for (x, row) in self.delta.iter().enumerate() {
            let n = self.joint_size(self.base_letter(x));
            if row.len() != n || row.iter().any(|&j| j as usize >= n) {
                return Err(Error::Input(format!("transition table of input {x} is not total on S_a")));
            }
        }
        Ok(())
    }

    pub fn alphabet(&self) -> &DistributedAlphabet {
        &self.alphabet
    }

    pub fn alphabet_arc(&self) -> &Arc<DistributedAlphabet> {
        &self.alphabet
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    /// `|Σ| · contexts`
    pub fn num_inputs(&self) -> usize {
        self.alphabet.num_letters() * self.contexts
    }

    pub fn base_letter(&self, x: usize) -> LetterId {
        x % self.alphabet.num_letters()
    }

    pub fn local_states(&self, i: ProcId) -> &[String] {
        &self.local_states[i]
    }

    pub fn num_local_states(&self, i: ProcId) -> usize {
        self.local_states[i].len()
    }

    pub fn initial(&self) -> &GlobalState {
        &self.initial
    }

    /// `|S_a|`
    pub fn joint_size(&self, a: LetterId) -> usize {
        self.alphabet
            .loc(a)
            .iter()
            .map(|&i| self.local_states[i].len())
            .product()
    }

    /// Joint index of the `loc(a)` part of a global state.
    pub fn encode(&self, a: LetterId, s: &GlobalState) -> usize {
        let mut idx = 0;
        let mut radix = 1;
        for &i in self.alphabet.loc(a) {
            idx += s[i] * radix;
            radix *= self.local_states[i].len();
        }
        idx
    }

    fn encode_local(&self, a: LetterId, local: &[usize]) -> Result<usize> {
        let loc = self.alphabet.loc(a);
        if local.len() != loc.len() {
            return Err(Error::Input("wrong number of local states for the letter".into()));
        }
        let mut idx = 0;
        let mut radix = 1;
        for (&i, &s) in loc.iter().zip(local) {
            let n = self.local_states[i].len();
            if s >= n {
                return Err(Error::Input(format!(
                    "local state {s} out of range on process {}",
                    self.alphabet.process_name(i)
                )));
            }
            idx += s * radix;
            radix *= n;
        }
        Ok(idx)
    }

    /// Local states of `loc(a)` for a joint index.
    pub fn decode_local(&self, a: LetterId, mut j: usize) -> Vec<usize> {
        self.alphabet
            .loc(a)
            .iter()
            .map(|&i| {
                let n = self.local_states[i].len();
                let s = j % n;
                j /= n;
                s
            })
            .collect()
    }

    fn write_back(&self, a: LetterId, s: &mut GlobalState, mut j: usize) {
        for &i in self.alphabet.loc(a) {
            let n = self.local_states[i].len();
            s[i] = j % n;
            j /= n;
        }
    }

    /// `Δ_x` applied in place.
    pub fn step(&self, s: &mut GlobalState, x: usize) {
        let a = self.base_letter(x);
        let j = self.delta[x][self.encode(a, s)] as usize;
        self.write_back(a, s, j);
    }

    fn check_trace(&self, t: &Trace) -> Result<()> {
        if t.alphabet() != &*self.alphabet {
            return Err(Error::Input("trace and machine use different alphabets".into()));
        }
        Ok(())
    }

    fn check_inputs(&self, t: &Trace, inputs: &[usize]) -> Result<()> {
        self.check_trace(t)?;
        if inputs.len() != t.len() {
            return Err(Error::Input("one input letter per event expected".into()));
        }
        for (e, &x) in inputs.iter().enumerate() {
            if x >= self.num_inputs() || self.base_letter(x) != t.label(e) {
                return Err(Error::Input(format!("input letter {x} does not extend the label of e{}", e + 1)));
            }
        }
        Ok(())
    }

    /// `Δ_t(s_in)`, along the trace's own linearization.
    pub fn run(&self, t: &Trace) -> Result<GlobalState> {
        self.check_trace(t)?;
        if self.contexts != 1 {
            return Err(Error::Input("machine reads enriched letters; use run_inputs".into()));
        }
        Ok(self.run_word(t.word()))
    }

    /// Runs over input letters given per event of `t`.
    pub fn run_inputs(&self, t: &Trace, inputs: &[usize]) -> Result<GlobalState> {
        self.check_inputs(t, inputs)?;
        Ok(self.run_word(inputs))
    }

    /// Runs over a word of input letters (no validation beyond bounds).
    pub fn run_word(&self, word: &[usize]) -> GlobalState {
        let mut s = self.initial.clone();
        for &x in word {
            self.step(&mut s, x);
        }
        s
    }

    /// Acceptance with an intensional final-state predicate.
    pub fn accepts(&self, t: &Trace, fin: impl Fn(&GlobalState) -> bool) -> Result<bool> {
        Ok(fin(&self.run(t)?))
    }

    /// Acceptance with an explicit set of final global states.
    pub fn accepts_set(&self, t: &Trace, fin: &BTreeSet<GlobalState>) -> Result<bool> {
        Ok(fin.contains(&self.run(t)?))
    }

    /// `∏_i |S_i|`
    pub fn global_state_count(&self) -> BigUint {
        self.local_states
            .iter()
            .fold(BigUint::from(1u32), |acc, s| acc * BigUint::from(s.len()))
    }

    /// Processes `i` such that every `S_j`, `j ≠ i`, is a singleton.
    pub fn localized_at(&self) -> Vec<ProcId> {
        let big: Vec<ProcId> = (0..self.local_states.len())
            .filter(|&i| self.local_states[i].len() > 1)
            .collect();
        match big.len() {
            0 => (0..self.local_states.len()).collect(),
            1 => big,
            _ => Vec::new(),
        }
    }

    /// For a machine localized at `i`, the map induced on `S_i` by input `x`.
    pub fn local_action(&self, i: ProcId, x: usize) -> Option<Vec<usize>> {
        if !self.localized_at().contains(&i) {
            return None;
        }
        let n = self.local_states[i].len();
        let a = self.base_letter(x);
        if !self.alphabet.loc(a).contains(&i) {
            return Some((0..n).collect());
        }
        let mut s = self.initial.clone();
        Some(
            (0..n)
                .map(|q| {
                    s[i] = q;
                    let mut t = s.clone();
                    self.step(&mut t, x);
                    t[i]
                })
                .collect(),
        )
    }

    fn active_process(&self) -> Option<ProcId> {
        let l = self.localized_at();
        match l.len() {
            0 => None,
            1 => Some(l[0]),
            _ => Some(0),
        }
    }

    /// Localized two-state reset automaton: two local states at the active
    /// process and every letter acting as the identity or a constant.
    pub fn is_reset_form(&self) -> bool {
        let Some(i) = self.active_process() else {
            return false;
        };
        if self.local_states[i].len() != 2 {
            return false;
        }
        (0..self.num_inputs()).all(|x| {
            let f = self.local_action(i, x).expect("localized");
            f.iter().enumerate().all(|(q, &r)| q == r) || f.iter().all(|&r| r == f[0])
        })
    }

    /// Localized permutation automaton: every letter permutes the local
    /// states of the active process.
    pub fn is_permutation_form(&self) -> bool {
        let Some(i) = self.active_process() else {
            return false;
        };
        (0..self.num_inputs()).all(|x| {
            let f = self.local_action(i, x).expect("localized");
            let img: BTreeSet<usize> = f.iter().copied().collect();
            img.len() == f.len()
        })
    }

    fn input_name(&self, x: usize) -> String {
        let a = self.alphabet.letter_name(self.base_letter(x));
        if self.contexts == 1 {
            a.to_string()
        } else {
            format!("{a}#{}", x / self.alphabet.num_letters())
        }
    }

    fn parse_input(&self, name: &str) -> Result<usize> {
        let (a, c) = match name.split_once('#') {
            Some((a, c)) => (
                a,
                c.parse::<usize>()
                    .map_err(|_| Error::Input(format!("bad context in input letter `{name}`")))?,
            ),
            None => (name, 0),
        };
        let a = self
            .alphabet
            .letter_id(a)
            .ok_or_else(|| Error::Input(format!("unknown letter `{a}`")))?;
        if c >= self.contexts {
            return Err(Error::Input(format!("context {c} out of range")));
        }
        Ok(a + self.alphabet.num_letters() * c)
    }
}

/// An asynchronous automaton with an output letter on every transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsyncTransducer {
    base: AsyncAutomaton,
    outputs: Vec<String>,
    // mu[x][joint index] = output index
    mu: Vec<Vec<u32>>,
}

impl AsyncTransducer {
    pub fn new(base: AsyncAutomaton, outputs: Vec<String>, mu: Vec<Vec<u32>>) -> Result<Self> {
        let t = AsyncTransducer { base, outputs, mu };
        t.validate()?;
        Ok(t)
    }

    /// Like [`AsyncAutomaton::from_fn`], with the function also returning
    /// the output index. Outputs are named by their index.
    pub fn from_fn(
        alphabet: Arc<DistributedAlphabet>,
        contexts: usize,
        sizes: &[usize],
        initial: GlobalState,
        num_outputs: usize,
        mut f: impl FnMut(usize, &[usize]) -> (Vec<usize>, usize),
    ) -> Result<Self> {
        let mut mu: Vec<Vec<u32>> = vec![Vec::new(); alphabet.num_letters() * contexts];
        let base = AsyncAutomaton::from_fn(alphabet, contexts, sizes, initial, |x, s| {
            let (next, out) = f(x, s);
            mu[x].push(out as u32);
            next
        })?;
        let outputs = (0..num_outputs).map(|g| g.to_string()).collect();
        Self::new(base, outputs, mu)
    }

    fn validate(&self) -> Result<()> {
        if self.outputs.is_empty() {
            return Err(Error::Input("empty output alphabet".into()));
        }
        if self.mu.len() != self.base.num_inputs() {
            return Err(Error::Input("one output table per input letter expected".into()));
        }
        for (x, row) in self.mu.iter().enumerate() {
            let n = self.base.joint_size(self.base.base_letter(x));
            if row.len() != n || row.iter().any(|&g| g as usize >= self.outputs.len()) {
                return Err(Error::Input(format!("output table of input {x} is not total on S_a")));
            }
        }
        Ok(())
    }

    /// Renames the output letters.
    pub fn with_output_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.outputs.len() {
            return Err(Error::Input("wrong number of output names".into()));
        }
        self.outputs = names;
        Ok(self)
    }

    pub fn automaton(&self) -> &AsyncAutomaton {
        &self.base
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// `μ_x` at the current global state, followed by `Δ_x`.
    pub fn step(&self, s: &mut GlobalState, x: usize) -> usize {
        let a = self.base.base_letter(x);
        let j = self.base.encode(a, s);
        let out = self.mu[x][j] as usize;
        let next = self.base.delta[x][j] as usize;
        self.base.write_back(a, s, next);
        out
    }

    /// Output at every event, `μ(e) = μ_a(s_a)` with `s` the state reached on
    /// the events before `e`.
    pub fn transduce(&self, t: &Trace) -> Result<Vec<usize>> {
        self.base.check_trace(t)?;
        if self.base.contexts != 1 {
            return Err(Error::Input("machine reads enriched letters; use transduce_inputs".into()));
        }
        Ok(self.transduce_word(t.word()))
    }

    pub fn transduce_inputs(&self, t: &Trace, inputs: &[usize]) -> Result<Vec<usize>> {
        self.base.check_inputs(t, inputs)?;
        Ok(self.transduce_word(inputs))
    }

    pub fn transduce_word(&self, word: &[usize]) -> Vec<usize> {
        let mut s = self.base.initial.clone();
        word.iter().map(|&x| self.step(&mut s, x)).collect()
    }

    /// Input letters for a following cascade stage: `x + n·γ`.
    pub fn enrich(&self, inputs: &[usize], outs: &[usize]) -> Vec<usize> {
        let n = self.base.num_inputs();
        inputs.iter().zip(outs).map(|(&x, &g)| x + n * g).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TransducerRepr::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: TransducerRepr = serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))?;
        r.try_into()
    }
}

/// `A ∘ℓ B`: states `S_i × Q_i`, output `(μ, ν)` encoded as `μ + |Γ_A|·ν`.
pub fn local_cascade(a: &AsyncTransducer, b: &AsyncTransducer) -> Result<AsyncTransducer> {
    let (am, bm) = (&a.base, &b.base);
    if am.alphabet != bm.alphabet {
        return Err(Error::Input("cascade stages use different alphabets".into()));
    }
    if bm.contexts != am.contexts * a.num_outputs() {
        return Err(Error::Input(format!(
            "second stage must read {} contexts (input × output of the first), it reads {}",
            am.contexts * a.num_outputs(),
            bm.contexts
        )));
    }
    let k = am.alphabet.num_processes();
    let sizes: Vec<usize> = (0..k)
        .map(|i| am.num_local_states(i) * bm.num_local_states(i))
        .collect();
    let initial: GlobalState = (0..k)
        .map(|i| am.initial[i] + am.num_local_states(i) * bm.initial[i])
        .collect();
    let na = am.num_inputs();
    let g = a.num_outputs();
    let loc_of = |x: usize| am.alphabet.loc(am.base_letter(x)).to_vec();
    let mut out = AsyncTransducer::from_fn(am.alphabet.clone(), am.contexts, &sizes, initial, g * b.num_outputs(), |x, local| {
        let loc = loc_of(x);
        let mut sa = am.initial.clone();
        let mut sb = bm.initial.clone();
        for (&i, &q) in loc.iter().zip(local) {
            sa[i] = q % am.num_local_states(i);
            sb[i] = q / am.num_local_states(i);
        }
        let mu = a.step(&mut sa, x);
        let nu = b.step(&mut sb, x + na * mu);
        let next = loc
            .iter()
            .map(|&i| sa[i] + am.num_local_states(i) * sb[i])
            .collect();
        (next, mu + g * nu)
    })?;
    for i in 0..k {
        out.base.local_states[i] = bm.local_states[i]
            .iter()
            .flat_map(|q| am.local_states[i].iter().map(move |s| format!("({s},{q})")))
            .collect();
    }
    out.outputs = b
        .outputs
        .iter()
        .flat_map(|n| a.outputs.iter().map(move |m| format!("({m},{n})")))
        .collect();
    Ok(out)
}

/// Componentwise product; the output tuple is encoded in mixed radix with the
/// first machine least significant.
pub fn direct_product(ms: &[AsyncTransducer]) -> Result<AsyncTransducer> {
    let first = ms
        .first()
        .ok_or_else(|| Error::Input("direct product of no machines".into()))?;
    let alph = first.base.alphabet.clone();
    let contexts = first.base.contexts;
    if ms.iter().any(|m| m.base.alphabet != alph || m.base.contexts != contexts) {
        return Err(Error::Input("direct product of machines over different inputs".into()));
    }
    let k = alph.num_processes();
    let sizes: Vec<usize> = (0..k)
        .map(|i| ms.iter().map(|m| m.base.num_local_states(i)).product())
        .collect();
    let initial: GlobalState = (0..k)
        .map(|i| {
            let mut idx = 0;
            let mut r = 1;
            for m in ms {
                idx += m.base.initial[i] * r;
                r *= m.base.num_local_states(i);
            }
            idx
        })
        .collect();
    let total_out: usize = ms.iter().map(|m| m.num_outputs()).product();
    let mut out = AsyncTransducer::from_fn(alph.clone(), contexts, &sizes, initial, total_out, |x, local| {
        let loc = alph.loc(x % alph.num_letters()).to_vec();
        let mut comps: Vec<Vec<usize>> = loc.iter().map(|_| Vec::with_capacity(ms.len())).collect();
        for (n, (&i, &q)) in loc.iter().zip(local).enumerate() {
            let mut q = q;
            for m in ms {
                let s = m.base.num_local_states(i);
                comps[n].push(q % s);
                q /= s;
            }
        }
        let mut next = vec![0; loc.len()];
        let mut radix = vec![1; loc.len()];
        let mut o = 0;
        let mut orad = 1;
        for (c, m) in ms.iter().enumerate() {
            let mut s = m.base.initial.clone();
            for (n, &i) in loc.iter().enumerate() {
                s[i] = comps[n][c];
            }
            let g = m.step(&mut s, x);
            o += g * orad;
            orad *= m.num_outputs();
            for (n, &i) in loc.iter().enumerate() {
                next[n] += s[i] * radix[n];
                radix[n] *= m.base.num_local_states(i);
            }
        }
        (next, o)
    })?;
    for i in 0..k {
        let mut names = vec![String::new()];
        for m in ms {
            let mut next = Vec::new();
            for s in &m.base.local_states[i] {
                for n in &names {
                    next.push(if n.is_empty() { s.clone() } else { format!("{n},{s}") });
                }
            }
            names = next;
        }
        out.base.local_states[i] = names.into_iter().map(|n| format!("({n})")).collect();
    }
    let mut onames = vec![String::new()];
    for m in ms {
        let mut next = Vec::new();
        for g in &m.outputs {
            for n in &onames {
                next.push(if n.is_empty() { g.clone() } else { format!("{n},{g}") });
            }
        }
        onames = next;
    }
    out.outputs = onames.into_iter().map(|n| format!("({n})")).collect();
    Ok(out)
}

/// A sequence of transducers where stage `k` reads the input and output of
/// stage `k - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CascadeChain {
    stages: Vec<AsyncTransducer>,
}

impl CascadeChain {
    pub fn new(stages: Vec<AsyncTransducer>) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| Error::Input("a cascade needs at least one stage".into()))?;
        if first.base.contexts != 1 {
            return Err(Error::Input("the first stage must read plain letters".into()));
        }
        for w in stages.windows(2) {
            if w[1].base.alphabet != w[0].base.alphabet
                || w[1].base.contexts != w[0].base.contexts * w[0].num_outputs()
            {
                return Err(Error::Input("adjacent cascade stages are not compatible".into()));
            }
        }
        Ok(CascadeChain { stages })
    }

    pub fn stages(&self) -> &[AsyncTransducer] {
        &self.stages
    }

    /// Outputs of every stage at every event, stage by stage.
    pub fn eval(&self, t: &Trace) -> Result<Vec<Vec<usize>>> {
        let mut inputs: Vec<usize> = t.word().to_vec();
        self.stages[0].base.check_trace(t)?;
        let mut out = Vec::with_capacity(self.stages.len());
        for st in &self.stages {
            let o = st.transduce_word(&inputs);
            inputs = st.enrich(&inputs, &o);
            out.push(o);
        }
        Ok(out)
    }

    /// The single transducer `A_1 ∘ℓ (A_2 ∘ℓ …)` folded from the left.
    pub fn flatten(&self) -> Result<AsyncTransducer> {
        let mut acc = self.stages[0].clone();
        for st in &self.stages[1..] {
            acc = local_cascade(&acc, st)?;
        }
        Ok(acc)
    }

    pub fn global_state_count(&self) -> BigUint {
        let k = self.stages[0].base.alphabet.num_processes();
        let mut n = BigUint::from(1u32);
        for st in &self.stages {
            for i in 0..k {
                n *= BigUint::from(st.base.num_local_states(i));
            }
        }
        n
    }

    pub fn to_json(&self) -> String {
        let r: Vec<TransducerRepr> = self.stages.iter().map(TransducerRepr::from).collect();
        serde_json::to_string_pretty(&r).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Vec<TransducerRepr> = serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))?;
        Self::new(r.into_iter().map(TryInto::try_into).collect::<Result<_>>()?)
    }
}

/// `θ^F`: truth values of the formulas at every event.
pub fn theta_labeling(f: &Formulas, t: &Trace, formulas: &[EvRef]) -> Result<Vec<Vec<bool>>> {
    let mut ev = Evaluator::new(f);
    ev.bind(t)?;
    let sets: Vec<u64> = formulas.iter().map(|&x| ev.event_set(x)).collect();
    Ok(t
        .events()
        .map(|e| sets.iter().map(|m| m >> e & 1 == 1).collect())
        .collect())
}

// ---------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TransitionRepr {
    input: String,
    from: Vec<String>,
    to: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    output: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct AutomatonRepr {
    alphabet: DistributedAlphabet,
    contexts: usize,
    local_states: BTreeMap<String, Vec<String>>,
    initial: BTreeMap<String, String>,
    transitions: Vec<TransitionRepr>,
}

#[derive(Serialize, Deserialize)]
struct TransducerRepr {
    #[serde(flatten)]
    automaton: AutomatonRepr,
    outputs: Vec<String>,
}

impl AutomatonRepr {
    fn build(a: &AsyncAutomaton, mu: Option<&AsyncTransducer>) -> Self {
        let name = |i: ProcId| a.alphabet.process_name(i).to_string();
        let mut transitions = Vec::new();
        for x in 0..a.num_inputs() {
            let base = a.base_letter(x);
            let loc = a.alphabet.loc(base);
            for j in 0..a.joint_size(base) {
                let from = a.decode_local(base, j);
                let to = a.decode_local(base, a.delta[x][j] as usize);
                transitions.push(TransitionRepr {
                    input: a.input_name(x),
                    from: loc.iter().zip(&from).map(|(&i, &s)| a.local_states[i][s].clone()).collect(),
                    to: loc.iter().zip(&to).map(|(&i, &s)| a.local_states[i][s].clone()).collect(),
                    output: mu.map(|m| m.outputs[m.mu[x][j] as usize].clone()),
                });
            }
        }
        AutomatonRepr {
            alphabet: (*a.alphabet).clone(),
            contexts: a.contexts,
            local_states: (0..a.local_states.len())
                .map(|i| (name(i), a.local_states[i].clone()))
                .collect(),
            initial: (0..a.local_states.len())
                .map(|i| (name(i), a.local_states[i][a.initial[i]].clone()))
                .collect(),
            transitions,
        }
    }

    fn parse(self, outputs: Option<&[String]>) -> Result<(AsyncAutomaton, Vec<Vec<u32>>)> {
        let alphabet = Arc::new(self.alphabet);
        let k = alphabet.num_processes();
        let mut local_states = Vec::with_capacity(k);
        let mut initial = Vec::with_capacity(k);
        for i in 0..k {
            let p = alphabet.process_name(i);
            let s = self
                .local_states
                .get(p)
                .ok_or_else(|| Error::Input(format!("no local states for process {p}")))?
                .clone();
            let init = self
                .initial
                .get(p)
                .ok_or_else(|| Error::Input(format!("no initial state for process {p}")))?;
            initial.push(
                s.iter()
                    .position(|n| n == init)
                    .ok_or_else(|| Error::Input(format!("unknown initial state `{init}`")))?,
            );
            local_states.push(s);
        }
        let mut a = AsyncAutomaton {
            alphabet,
            contexts: self.contexts,
            local_states,
            initial,
            delta: Vec::new(),
        };
        a.check_shape()?;
        let mut delta: Vec<Vec<Option<u32>>> = (0..a.num_inputs())
            .map(|x| vec![None; a.joint_size(a.base_letter(x))])
            .collect();
        let mut mu: Vec<Vec<Option<u32>>> = delta.clone();
        for tr in self.transitions {
            let x = a.parse_input(&tr.input)?;
            let base = a.base_letter(x);
            let lookup = |names: &[String]| -> Result<Vec<usize>> {
                let loc = a.alphabet.loc(base);
                if names.len() != loc.len() {
                    return Err(Error::Input(format!("transition on `{}` has the wrong arity", tr.input)));
                }
                loc.iter()
                    .zip(names)
                    .map(|(&i, n)| {
                        a.local_states[i]
                            .iter()
                            .position(|m| m == n)
                            .ok_or_else(|| Error::Input(format!("unknown local state `{n}`")))
                    })
                    .collect()
            };
            let from = a.encode_local(base, &lookup(&tr.from)?)?;
            let to = a.encode_local(base, &lookup(&tr.to)?)?;
            if delta[x][from].replace(to as u32).is_some() {
                return Err(Error::Input(format!("duplicate transition on `{}`", tr.input)));
            }
            if let Some(outs) = outputs {
                let o = tr
                    .output
                    .as_ref()
                    .ok_or_else(|| Error::Input(format!("missing output on `{}`", tr.input)))?;
                let g = outs
                    .iter()
                    .position(|n| n == o)
                    .ok_or_else(|| Error::Input(format!("unknown output `{o}`")))?;
                mu[x][from] = Some(g as u32);
            }
        }
        let total = |v: Vec<Vec<Option<u32>>>| -> Result<Vec<Vec<u32>>> {
            v.into_iter()
                .map(|row| {
                    row.into_iter()
                        .collect::<Option<Vec<u32>>>()
                        .ok_or_else(|| Error::Input("transition table is not total".into()))
                })
                .collect()
        };
        a.delta = total(delta)?;
        a.validate()?;
        let mu = if outputs.is_some() { total(mu)? } else { Vec::new() };
        Ok((a, mu))
    }
}

impl From<&AsyncTransducer> for TransducerRepr {
    fn from(t: &AsyncTransducer) -> Self {
        TransducerRepr {
            automaton: AutomatonRepr::build(&t.base, Some(t)),
            outputs: t.outputs.clone(),
        }
    }
}

impl TryFrom<TransducerRepr> for AsyncTransducer {
    type Error = Error;

    fn try_from(r: TransducerRepr) -> Result<Self> {
        let outputs = r.outputs;
        let (base, mu) = r.automaton.parse(Some(&outputs))?;
        AsyncTransducer::new(base, outputs, mu)
    }
}

impl AsyncAutomaton {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&AutomatonRepr::build(self, None)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: AutomatonRepr = serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))?;
        Ok(r.parse(None)?.0)
    }
}
