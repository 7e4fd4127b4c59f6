//! Direct evaluation of formulas over traces.
//!
//! Event formulas are evaluated to the set of events where they hold, as a
//! 64-bit mask. A diamond `⟨π⟩φ` is the preimage of `φ`'s set under `π`,
//! with `π*` as a least fixpoint. Every node is memoised per trace, so a
//! hash-consed DAG is evaluated in time linear in its number of nodes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formula::{AnyFormula, EvRef, EventFormula, Formulas, PathFormula, PathRef, TraceFormula, TraceRef};
use crate::trace::{canonical_words, EventId, LetterId, Trace};

/// Largest trace the evaluator accepts.
pub const MAX_EVENTS: usize = 64;

/// Reusable evaluation state for one formula store.
pub struct Evaluator<'f> {
    f: &'f Formulas,
    generation: u32,
    ev_memo: Vec<(u32, u64)>,
    tr_memo: Vec<(u32, bool)>,
    // per-trace data
    n: usize,
    letter_sets: Vec<u64>,
    // immediate predecessor/successor pairs on each process
    steps: Vec<Vec<(EventId, EventId)>>,
    maximal: u64,
    yesterday: Vec<Vec<Option<EventId>>>,
    leq: Vec<u64>,
    last: Vec<Option<EventId>>,
    single: bool,
}

fn mask_all(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl<'f> Evaluator<'f> {
    pub fn new(f: &'f Formulas) -> Self {
        Evaluator {
            f,
            generation: 0,
            ev_memo: Vec::new(),
            tr_memo: Vec::new(),
            n: 0,
            letter_sets: Vec::new(),
            steps: Vec::new(),
            maximal: 0,
            yesterday: Vec::new(),
            leq: Vec::new(),
            last: Vec::new(),
            single: false,
        }
    }

    pub fn formulas(&self) -> &'f Formulas {
        self.f
    }

    /// Loads a trace; invalidates all memoised values.
    pub fn bind(&mut self, t: &Trace) -> Result<()> {
        self.bind_batch(std::slice::from_ref(t))?;
        self.last = (0..t.alphabet().num_processes()).map(|i| t.last(i)).collect();
        self.single = true;
        Ok(())
    }

    /// Loads several traces side by side, the events of `ts[k]` occupying
    /// the bits from the `k`-th returned offset on. Event formulas only look
    /// into the past, so each event gets the value it has in its own trace.
    /// Trace formulas need [`Evaluator::bind`].
    pub fn bind_batch(&mut self, ts: &[Trace]) -> Result<Vec<usize>> {
        let total: usize = ts.iter().map(Trace::len).sum();
        if total > MAX_EVENTS {
            return Err(Error::Resource(format!(
                "{total} events bound at once, the evaluator handles at most {MAX_EVENTS}"
            )));
        }
        if ts.iter().any(|t| t.alphabet() != self.f.alphabet()) {
            return Err(Error::Input("trace and formulas use different alphabets".into()));
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.ev_memo.iter_mut().for_each(|m| m.0 = 0);
            self.tr_memo.iter_mut().for_each(|m| m.0 = 0);
            self.generation = 1;
        }
        self.ev_memo.resize(self.f.num_events(), (0, 0));
        self.tr_memo.resize(self.f.num_traces(), (0, false));
        let alphabet = self.f.alphabet();
        let k = alphabet.num_processes();
        self.n = total;
        self.letter_sets = vec![0; alphabet.num_letters()];
        self.steps = vec![Vec::new(); k];
        self.maximal = 0;
        self.yesterday = vec![Vec::with_capacity(total); k];
        self.leq = Vec::with_capacity(total);
        self.last = vec![None; k];
        self.single = false;
        let mut offsets = Vec::with_capacity(ts.len());
        let mut off = 0;
        for t in ts {
            offsets.push(off);
            for e in t.events() {
                self.letter_sets[t.label(e)] |= 1 << (off + e);
                if t.is_maximal(e) {
                    self.maximal |= 1 << (off + e);
                }
                self.leq
                    .push(t.events().filter(|&f| t.leq(e, f)).fold(0, |m, f| m | 1 << (off + f)));
            }
            for i in 0..k {
                for w in t.chain(i).windows(2) {
                    self.steps[i].push((off + w[0], off + w[1]));
                }
                self.yesterday[i].extend(t.events().map(|e| t.yesterday(i, e).map(|g| off + g)));
            }
            off += t.len();
        }
        Ok(offsets)
    }

    fn leq(&self, e: EventId, f: EventId) -> bool {
        self.leq[e] >> f & 1 == 1
    }

    /// Events of the bound trace satisfying `φ`.
    pub fn event_set(&mut self, phi: EvRef) -> u64 {
        let idx = phi.index();
        if let Some(&(g, v)) = self.ev_memo.get(idx) {
            if g == self.generation {
                return v;
            }
        }
        let all = mask_all(self.n);
        let v = match self.f.event(phi) {
            EventFormula::True => all,
            EventFormula::False => 0,
            EventFormula::Letter(a) => self.letter_sets[*a],
            EventFormula::Not(x) => !self.event_set(*x) & all,
            EventFormula::Or(xs) => xs.iter().fold(0, |m, &x| m | self.event_set(x)),
            EventFormula::And(xs) => xs.iter().fold(all, |m, &x| m & self.event_set(x)),
            EventFormula::Diamond(p, x) => {
                let target = self.event_set(*x);
                self.pre(*p, target)
            }
            EventFormula::DiamondExists(p) => self.pre(*p, all),
            EventFormula::Yleq(i, j) => (0..self.n)
                .filter(|&e| match (self.yesterday[*i][e], self.yesterday[*j][e]) {
                    (Some(a), Some(b)) => self.leq(a, b),
                    _ => false,
                })
                .fold(0, |m, e| m | 1 << e),
            EventFormula::Yleq2(i, j, k) => (0..self.n)
                .filter(|&e| {
                    let a = self.yesterday[*i][e].and_then(|g| self.yesterday[*j][g]);
                    match (a, self.yesterday[*k][e]) {
                        (Some(a), Some(b)) => self.leq(a, b),
                        _ => false,
                    }
                })
                .fold(0, |m, e| m | 1 << e),
        };
        if idx >= self.ev_memo.len() {
            self.ev_memo.resize(idx + 1, (0, 0));
        }
        self.ev_memo[idx] = (self.generation, v);
        v
    }

    /// Events `e` from which some `π`-path ends in `target`.
    pub fn pre(&mut self, p: PathRef, target: u64) -> u64 {
        match self.f.path(p) {
            PathFormula::Move(i) => {
                let mut out = 0;
                for &(a, b) in &self.steps[*i] {
                    out |= (target >> a & 1) << b;
                }
                out
            }
            PathFormula::Test(x) => target & self.event_set(*x),
            PathFormula::Sum(ps) => ps.iter().fold(0, |m, &q| m | self.pre(q, target)),
            PathFormula::Concat(ps) => ps.iter().rev().fold(target, |m, &q| self.pre(q, m)),
            PathFormula::Star(q) => {
                let mut z = target;
                loop {
                    let next = z | self.pre(*q, z);
                    if next == z {
                        return z;
                    }
                    z = next;
                }
            }
        }
    }

    /// Events reachable along `π` from some event of `from`.
    pub fn post(&mut self, p: PathRef, from: u64) -> u64 {
        match self.f.path(p) {
            PathFormula::Move(i) => {
                let mut out = 0;
                for &(a, b) in &self.steps[*i] {
                    out |= (from >> b & 1) << a;
                }
                out
            }
            PathFormula::Test(x) => from & self.event_set(*x),
            PathFormula::Sum(ps) => ps.iter().fold(0, |m, &q| m | self.post(q, from)),
            PathFormula::Concat(ps) => ps.iter().fold(from, |m, &q| self.post(q, m)),
            PathFormula::Star(q) => {
                let mut z = from;
                loop {
                    let next = z | self.post(*q, z);
                    if next == z {
                        return z;
                    }
                    z = next;
                }
            }
        }
    }

    /// Truth of a trace formula on the bound trace.
    ///
    /// # Panics
    /// After [`Evaluator::bind_batch`], which has no single trace to answer for.
    pub fn trace_value(&mut self, phi: TraceRef) -> bool {
        assert!(self.single, "trace formulas need a single bound trace");
        let idx = phi.index();
        if let Some(&(g, v)) = self.tr_memo.get(idx) {
            if g == self.generation {
                return v;
            }
        }
        let v = match self.f.trace(phi) {
            TraceFormula::True => true,
            TraceFormula::False => false,
            TraceFormula::EMi(i, x) => match self.last[*i] {
                Some(e) => self.event_set(*x) >> e & 1 == 1,
                None => false,
            },
            TraceFormula::EM(x) => self.event_set(*x) & self.maximal != 0,
            TraceFormula::Lleq(i, j) => match (self.last[*i], self.last[*j]) {
                (Some(a), Some(b)) => self.leq(a, b),
                _ => false,
            },
            TraceFormula::Lleq2(i, j, k) => {
                let a = self.last[*i].and_then(|l| {
                    if self.letter_sets.iter().enumerate().any(|(a, &m)| {
                        m >> l & 1 == 1 && self.f.alphabet().loc_mask(a) >> *j & 1 == 1
                    }) {
                        Some(l)
                    } else {
                        self.yesterday[*j][l]
                    }
                });
                match (a, self.last[*k]) {
                    (Some(a), Some(b)) => self.leq(a, b),
                    _ => false,
                }
            }
            TraceFormula::Not(x) => !self.trace_value(*x),
            TraceFormula::Or(xs) => xs.iter().any(|&x| self.trace_value(x)),
            TraceFormula::And(xs) => xs.iter().all(|&x| self.trace_value(x)),
        };
        if idx >= self.tr_memo.len() {
            self.tr_memo.resize(idx + 1, (0, false));
        }
        self.tr_memo[idx] = (self.generation, v);
        v
    }
}

/// `t ⊨ Φ`.
pub fn eval_trace(f: &Formulas, t: &Trace, phi: TraceRef) -> Result<bool> {
    let mut ev = Evaluator::new(f);
    ev.bind(t)?;
    Ok(ev.trace_value(phi))
}

/// `t, e ⊨ φ`.
pub fn eval_event(f: &Formulas, t: &Trace, e: EventId, phi: EvRef) -> Result<bool> {
    t.check(e)?;
    let mut ev = Evaluator::new(f);
    ev.bind(t)?;
    Ok(ev.event_set(phi) >> e & 1 == 1)
}

/// All events of `t` satisfying `φ`, in index order.
pub fn satisfying_events(f: &Formulas, t: &Trace, phi: EvRef) -> Result<Vec<EventId>> {
    let mut ev = Evaluator::new(f);
    ev.bind(t)?;
    Ok(bits(ev.event_set(phi)))
}

/// All `f` with `t, e, f ⊨ π`, in index order.
pub fn path_reaches(f: &Formulas, t: &Trace, e: EventId, p: PathRef) -> Result<Vec<EventId>> {
    t.check(e)?;
    let mut ev = Evaluator::new(f);
    ev.bind(t)?;
    Ok(bits(ev.post(p, 1 << e)))
}

/// Set bits of a mask, ascending.
pub fn bits(mut m: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

/// A trace (by canonical word) and, for event formulas, an event on which two
/// formulas disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub word: Vec<LetterId>,
    pub event: Option<EventId>,
}

/// Compares two formulas of the same sort on every trace with at most
/// `max_events` events. Returns the least disagreement in (size, canonical
/// word, event index) order.
pub fn equivalent_on(
    f: &Formulas,
    max_events: usize,
    a: AnyFormula,
    b: AnyFormula,
) -> Result<Option<Counterexample>> {
    let check = |ev: &mut Evaluator, t: &Trace| -> Option<Option<EventId>> {
        ev.bind(t).expect("bounded trace");
        match (a, b) {
            (AnyFormula::Event(x), AnyFormula::Event(y)) => {
                let d = ev.event_set(x) ^ ev.event_set(y);
                (d != 0).then(|| Some(d.trailing_zeros() as usize))
            }
            (AnyFormula::Trace(x), AnyFormula::Trace(y)) => {
                (ev.trace_value(x) != ev.trace_value(y)).then_some(None)
            }
            _ => unreachable!(),
        }
    };
    if matches!(
        (a, b),
        (AnyFormula::Event(_), AnyFormula::Trace(_)) | (AnyFormula::Trace(_), AnyFormula::Event(_))
    ) {
        return Err(Error::Input("cannot compare an event formula with a trace formula".into()));
    }
    if max_events > MAX_EVENTS {
        return Err(Error::Resource(format!("bound {max_events} exceeds {MAX_EVENTS}")));
    }
    let alphabet = f.alphabet_arc();
    let words: Vec<Vec<LetterId>> = canonical_words(alphabet, max_events).collect();
    let found = words
        .par_iter()
        .map_init(
            || Evaluator::new(f),
            |ev, w| {
                let t = Trace::from_word(alphabet.clone(), w).expect("alphabet letters");
                check(ev, &t).map(|event| Counterexample { word: w.clone(), event })
            },
        )
        .find_first(|r| r.is_some())
        .flatten();
    Ok(found)
}

/// Compares two formulas of the same sort on one trace.
pub fn differ_on(f: &Formulas, t: &Trace, a: AnyFormula, b: AnyFormula) -> Result<Option<Counterexample>> {
    let mut ev = Evaluator::new(f);
    ev.bind(t)?;
    let event = match (a, b) {
        (AnyFormula::Event(x), AnyFormula::Event(y)) => {
            let d = ev.event_set(x) ^ ev.event_set(y);
            if d == 0 {
                return Ok(None);
            }
            Some(d.trailing_zeros() as usize)
        }
        (AnyFormula::Trace(x), AnyFormula::Trace(y)) => {
            if ev.trace_value(x) == ev.trace_value(y) {
                return Ok(None);
            }
            None
        }
        _ => return Err(Error::Input("cannot compare an event formula with a trace formula".into())),
    };
    Ok(Some(Counterexample {
        word: t.word().to_vec(),
        event,
    }))
}

/// Groups traces into runs of at most [`MAX_EVENTS`] events in total, for
/// [`Evaluator::bind_batch`].
pub fn pack_traces(ts: impl IntoIterator<Item = Trace>) -> Vec<Vec<Trace>> {
    let mut out: Vec<Vec<Trace>> = Vec::new();
    let mut used = MAX_EVENTS + 1;
    for t in ts {
        if used + t.len() > MAX_EVENTS {
            out.push(Vec::new());
            used = 0;
        }
        used += t.len();
        out.last_mut().expect("pushed above").push(t);
    }
    out
}
