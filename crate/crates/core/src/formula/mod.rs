//! Formula syntax for PastPDL, LocPastPDL and PastPDL[Y,L].
//!
//! Formulas live in a hash-consed [`Formulas`] store tied to one alphabet.
//! Structurally equal nodes share an id, so equality is id equality and the
//! large formulas produced by constant elimination stay compact DAGs.
//!
//! Two families of constructors exist. The `raw_*` ones intern a node as
//! given (the parser uses them, keeping the AST faithful to the input). The
//! named helpers (`or`, `and`, `not`, `diamond`, `concat`, ...) simplify:
//! double negation, `⊤`/`⊥` absorption, flattening, duplicate removal, and
//! folding of purely letter-based subformulas into a canonical letter set.

mod parse;
mod print;

use std::collections::HashMap;
use std::sync::Arc;

use crate::trace::{DistributedAlphabet, LetterId, ProcId};

pub use parse::{parse_event_formula, parse_path_formula, parse_trace_formula, parse_formula_file, FileFormula};

/// Id of an event formula in a [`Formulas`] store.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EvRef(u32);
/// Id of a path formula.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathRef(u32);
/// Id of a trace formula.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceRef(u32);

impl EvRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}
impl PathRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}
impl TraceRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EventFormula {
    True,
    False,
    Letter(LetterId),
    Not(EvRef),
    Or(Vec<EvRef>),
    And(Vec<EvRef>),
    /// `⟨π⟩φ`
    Diamond(PathRef, EvRef),
    /// `⟨π⟩` with no trailing formula.
    DiamondExists(PathRef),
    /// `Y_i ≤ Y_j`
    Yleq(ProcId, ProcId),
    /// `Y_{i,j} ≤ Y_k`
    Yleq2(ProcId, ProcId, ProcId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PathFormula {
    /// `←_i`
    Move(ProcId),
    /// `φ?`
    Test(EvRef),
    Sum(Vec<PathRef>),
    Concat(Vec<PathRef>),
    Star(PathRef),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TraceFormula {
    True,
    False,
    /// `EM_i φ`
    EMi(ProcId, EvRef),
    /// `EM φ`: some maximal event satisfies `φ`.
    EM(EvRef),
    /// `L_i ≤ L_j`
    Lleq(ProcId, ProcId),
    /// `L_{i,j} ≤ L_k`
    Lleq2(ProcId, ProcId, ProcId),
    Not(TraceRef),
    Or(Vec<TraceRef>),
    And(Vec<TraceRef>),
}

/// Either sort of closed formula.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum AnyFormula {
    Event(EvRef),
    Trace(TraceRef),
}

/// Hash-consed formula store over a fixed alphabet.
#[derive(Clone, Debug)]
pub struct Formulas {
    alphabet: Arc<DistributedAlphabet>,
    events: Vec<EventFormula>,
    event_atom: Vec<Option<u64>>,
    event_ids: HashMap<EventFormula, EvRef>,
    paths: Vec<PathFormula>,
    path_ids: HashMap<PathFormula, PathRef>,
    traces: Vec<TraceFormula>,
    trace_ids: HashMap<TraceFormula, TraceRef>,
}

impl Formulas {
    pub fn new(alphabet: Arc<DistributedAlphabet>) -> Self {
        Formulas {
            alphabet,
            events: Vec::new(),
            event_atom: Vec::new(),
            event_ids: HashMap::new(),
            paths: Vec::new(),
            path_ids: HashMap::new(),
            traces: Vec::new(),
            trace_ids: HashMap::new(),
        }
    }

    pub fn alphabet(&self) -> &DistributedAlphabet {
        &self.alphabet
    }

    pub fn alphabet_arc(&self) -> &Arc<DistributedAlphabet> {
        &self.alphabet
    }

    pub fn event(&self, r: EvRef) -> &EventFormula {
        &self.events[r.index()]
    }

    pub fn path(&self, r: PathRef) -> &PathFormula {
        &self.paths[r.index()]
    }

    pub fn trace(&self, r: TraceRef) -> &TraceFormula {
        &self.traces[r.index()]
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn num_traces(&self) -> usize {
        self.traces.len()
    }

    /// Letter mask of `φ` if it is a boolean combination of letters.
    pub fn atom_mask(&self, r: EvRef) -> Option<u64> {
        self.event_atom[r.index()]
    }

    // ---- raw interning ----

    pub fn raw_event(&mut self, node: EventFormula) -> EvRef {
        if let Some(&r) = self.event_ids.get(&node) {
            return r;
        }
        let all = self.alphabet.all_letters_mask();
        let atom = match &node {
            EventFormula::True => Some(all),
            EventFormula::False => Some(0),
            EventFormula::Letter(a) => Some(1u64 << a),
            EventFormula::Not(x) => self.event_atom[x.index()].map(|m| !m & all),
            EventFormula::Or(xs) => xs
                .iter()
                .try_fold(0u64, |acc, x| self.event_atom[x.index()].map(|m| acc | m)),
            EventFormula::And(xs) => xs
                .iter()
                .try_fold(all, |acc, x| self.event_atom[x.index()].map(|m| acc & m)),
            _ => None,
        };
        let r = EvRef(self.events.len() as u32);
        self.events.push(node.clone());
        self.event_atom.push(atom);
        self.event_ids.insert(node, r);
        r
    }

    pub fn raw_path(&mut self, node: PathFormula) -> PathRef {
        if let Some(&r) = self.path_ids.get(&node) {
            return r;
        }
        let r = PathRef(self.paths.len() as u32);
        self.paths.push(node.clone());
        self.path_ids.insert(node, r);
        r
    }

    pub fn raw_trace(&mut self, node: TraceFormula) -> TraceRef {
        if let Some(&r) = self.trace_ids.get(&node) {
            return r;
        }
        let r = TraceRef(self.traces.len() as u32);
        self.traces.push(node.clone());
        self.trace_ids.insert(node, r);
        r
    }

    // ---- event formulas ----

    pub fn tt(&mut self) -> EvRef {
        self.raw_event(EventFormula::True)
    }

    pub fn ff(&mut self) -> EvRef {
        self.raw_event(EventFormula::False)
    }

    pub fn letter(&mut self, a: LetterId) -> EvRef {
        self.raw_event(EventFormula::Letter(a))
    }

    /// Canonical formula for a set of letters: `⊥`, `⊤`, a letter, or a
    /// disjunction of letters in id order.
    pub fn atoms(&mut self, mask: u64) -> EvRef {
        let all = self.alphabet.all_letters_mask();
        let mask = mask & all;
        if mask == 0 {
            return self.ff();
        }
        if mask == all {
            return self.tt();
        }
        if mask.count_ones() == 1 {
            return self.letter(mask.trailing_zeros() as usize);
        }
        let xs: Vec<EvRef> = (0..64)
            .filter(|a| mask >> a & 1 == 1)
            .map(|a| self.letter(a))
            .collect();
        self.raw_event(EventFormula::Or(xs))
    }

    /// `on_i`: the event is an `i`-event.
    pub fn on(&mut self, i: ProcId) -> EvRef {
        let m = self.alphabet.letters_mask(i);
        self.atoms(m)
    }

    pub fn not(&mut self, x: EvRef) -> EvRef {
        if let Some(m) = self.atom_mask(x) {
            return self.atoms(!m);
        }
        if let EventFormula::Not(y) = self.events[x.index()] {
            return y;
        }
        self.raw_event(EventFormula::Not(x))
    }

    pub fn or(&mut self, xs: impl IntoIterator<Item = EvRef>) -> EvRef {
        self.junction(xs, true)
    }

    pub fn and(&mut self, xs: impl IntoIterator<Item = EvRef>) -> EvRef {
        self.junction(xs, false)
    }

    pub fn or2(&mut self, a: EvRef, b: EvRef) -> EvRef {
        self.or([a, b])
    }

    pub fn and2(&mut self, a: EvRef, b: EvRef) -> EvRef {
        self.and([a, b])
    }

    /// `a ⇒ b`, i.e. `¬a ∨ b`.
    pub fn implies(&mut self, a: EvRef, b: EvRef) -> EvRef {
        let na = self.not(a);
        self.or([na, b])
    }

    fn junction(&mut self, xs: impl IntoIterator<Item = EvRef>, is_or: bool) -> EvRef {
        let all = self.alphabet.all_letters_mask();
        let (unit, zero) = if is_or { (0u64, all) } else { (all, 0u64) };
        let mut flat = Vec::new();
        let mut stack: Vec<EvRef> = xs.into_iter().collect();
        stack.reverse();
        while let Some(x) = stack.pop() {
            match &self.events[x.index()] {
                EventFormula::Or(ys) if is_or => stack.extend(ys.iter().rev()),
                EventFormula::And(ys) if !is_or => stack.extend(ys.iter().rev()),
                _ => flat.push(x),
            }
        }
        let mut atom = unit;
        let mut atom_pos = None;
        let mut seen = std::collections::HashSet::new();
        let mut rest = Vec::new();
        for x in flat {
            if let Some(m) = self.atom_mask(x) {
                atom = if is_or { atom | m } else { atom & m };
                atom_pos.get_or_insert(rest.len());
            } else if seen.insert(x) {
                rest.push(x);
            }
        }
        if atom == zero {
            return self.atoms(zero);
        }
        for &x in &rest {
            if let EventFormula::Not(y) = self.events[x.index()] {
                if seen.contains(&y) {
                    return self.atoms(zero);
                }
            }
        }
        if atom != unit {
            let a = self.atoms(atom);
            rest.insert(atom_pos.unwrap_or(0).min(rest.len()), a);
        }
        match rest.len() {
            0 => self.atoms(unit),
            1 => rest[0],
            _ => {
                if is_or {
                    self.raw_event(EventFormula::Or(rest))
                } else {
                    self.raw_event(EventFormula::And(rest))
                }
            }
        }
    }

    /// `⟨π⟩φ`, with tests at either end of `π` pulled out into conjunctions.
    pub fn diamond(&mut self, p: PathRef, phi: EvRef) -> EvRef {
        if self.events[phi.index()] == EventFormula::False {
            return phi;
        }
        match self.paths[p.index()].clone() {
            PathFormula::Test(psi) => self.and([psi, phi]),
            PathFormula::Concat(ps) => {
                let first = ps[0];
                let last = *ps.last().expect("nonempty concat");
                if let PathFormula::Test(psi) = self.paths[last.index()] {
                    let inner = self.concat(ps[..ps.len() - 1].iter().copied());
                    let body = self.and([psi, phi]);
                    return self.diamond(inner, body);
                }
                if let PathFormula::Test(psi) = self.paths[first.index()] {
                    let inner = self.concat(ps[1..].iter().copied());
                    let d = self.diamond(inner, phi);
                    return self.and([psi, d]);
                }
                self.raw_event(EventFormula::Diamond(p, phi))
            }
            _ => self.raw_event(EventFormula::Diamond(p, phi)),
        }
    }

    pub fn diamond_exists(&mut self, p: PathRef) -> EvRef {
        self.raw_event(EventFormula::DiamondExists(p))
    }

    pub fn yleq(&mut self, i: ProcId, j: ProcId) -> EvRef {
        self.raw_event(EventFormula::Yleq(i, j))
    }

    pub fn yleq2(&mut self, i: ProcId, j: ProcId, k: ProcId) -> EvRef {
        self.raw_event(EventFormula::Yleq2(i, j, k))
    }

    // ---- path formulas ----

    pub fn mv(&mut self, i: ProcId) -> PathRef {
        self.raw_path(PathFormula::Move(i))
    }

    pub fn test(&mut self, phi: EvRef) -> PathRef {
        self.raw_path(PathFormula::Test(phi))
    }

    pub fn concat(&mut self, ps: impl IntoIterator<Item = PathRef>) -> PathRef {
        let mut out: Vec<PathRef> = Vec::new();
        let mut stack: Vec<PathRef> = ps.into_iter().collect();
        stack.reverse();
        while let Some(p) = stack.pop() {
            match self.paths[p.index()].clone() {
                PathFormula::Concat(qs) => stack.extend(qs.iter().rev()),
                PathFormula::Test(phi) => {
                    if self.events[phi.index()] == EventFormula::True {
                        continue;
                    }
                    if self.events[phi.index()] == EventFormula::False {
                        let f = self.ff();
                        return self.test(f);
                    }
                    if let Some(&q) = out.last() {
                        if let PathFormula::Test(psi) = self.paths[q.index()] {
                            let both = self.and([psi, phi]);
                            out.pop();
                            if self.events[both.index()] == EventFormula::False {
                                return self.test(both);
                            }
                            let t = self.test(both);
                            out.push(t);
                            continue;
                        }
                    }
                    out.push(p);
                }
                _ => out.push(p),
            }
        }
        match out.len() {
            0 => {
                let t = self.tt();
                self.test(t)
            }
            1 => out[0],
            _ => self.raw_path(PathFormula::Concat(out)),
        }
    }

    pub fn sum(&mut self, ps: impl IntoIterator<Item = PathRef>) -> PathRef {
        let mut out: Vec<PathRef> = Vec::new();
        let mut stack: Vec<PathRef> = ps.into_iter().collect();
        stack.reverse();
        while let Some(p) = stack.pop() {
            match &self.paths[p.index()] {
                PathFormula::Sum(qs) => stack.extend(qs.iter().rev()),
                PathFormula::Test(phi) if self.events[phi.index()] == EventFormula::False => {}
                _ => {
                    if !out.contains(&p) {
                        out.push(p)
                    }
                }
            }
        }
        match out.len() {
            0 => {
                let f = self.ff();
                self.test(f)
            }
            1 => out[0],
            _ => self.raw_path(PathFormula::Sum(out)),
        }
    }

    pub fn star(&mut self, p: PathRef) -> PathRef {
        match self.paths[p.index()] {
            PathFormula::Star(_) => p,
            PathFormula::Test(_) => {
                let t = self.tt();
                self.test(t)
            }
            _ => self.raw_path(PathFormula::Star(p)),
        }
    }

    /// `π^+ = π·π*`
    pub fn plus(&mut self, p: PathRef) -> PathRef {
        let s = self.star(p);
        self.concat([p, s])
    }

    /// `π^n`
    pub fn power(&mut self, p: PathRef, n: usize) -> PathRef {
        self.concat(std::iter::repeat(p).take(n))
    }

    /// `⇐_i{φ} = ←_i·(¬φ?·←_i)*·φ?`: from an `i`-event, the closest strictly
    /// earlier `i`-event satisfying `φ`.
    pub fn prevon(&mut self, i: ProcId, phi: EvRef) -> PathRef {
        let m = self.mv(i);
        let on = self.alphabet.letters_mask(i);
        if let Some(mask) = self.atom_mask(phi) {
            if mask & on == on {
                return m;
            }
        }
        let nphi = self.not(phi);
        let tn = self.test(nphi);
        let body = self.concat([tn, m]);
        let st = self.star(body);
        let tp = self.test(phi);
        self.concat([m, st, tp])
    }

    // ---- trace formulas ----

    pub fn t_true(&mut self) -> TraceRef {
        self.raw_trace(TraceFormula::True)
    }

    pub fn t_false(&mut self) -> TraceRef {
        self.raw_trace(TraceFormula::False)
    }

    pub fn em_i(&mut self, i: ProcId, phi: EvRef) -> TraceRef {
        if self.events[phi.index()] == EventFormula::False {
            return self.t_false();
        }
        self.raw_trace(TraceFormula::EMi(i, phi))
    }

    pub fn em(&mut self, phi: EvRef) -> TraceRef {
        if self.events[phi.index()] == EventFormula::False {
            return self.t_false();
        }
        self.raw_trace(TraceFormula::EM(phi))
    }

    pub fn lleq(&mut self, i: ProcId, j: ProcId) -> TraceRef {
        self.raw_trace(TraceFormula::Lleq(i, j))
    }

    pub fn lleq2(&mut self, i: ProcId, j: ProcId, k: ProcId) -> TraceRef {
        self.raw_trace(TraceFormula::Lleq2(i, j, k))
    }

    pub fn t_not(&mut self, x: TraceRef) -> TraceRef {
        match self.traces[x.index()] {
            TraceFormula::True => self.t_false(),
            TraceFormula::False => self.t_true(),
            TraceFormula::Not(y) => y,
            _ => self.raw_trace(TraceFormula::Not(x)),
        }
    }

    pub fn t_or(&mut self, xs: impl IntoIterator<Item = TraceRef>) -> TraceRef {
        self.t_junction(xs, true)
    }

    pub fn t_and(&mut self, xs: impl IntoIterator<Item = TraceRef>) -> TraceRef {
        self.t_junction(xs, false)
    }

    pub fn t_implies(&mut self, a: TraceRef, b: TraceRef) -> TraceRef {
        let na = self.t_not(a);
        self.t_or([na, b])
    }

    fn t_junction(&mut self, xs: impl IntoIterator<Item = TraceRef>, is_or: bool) -> TraceRef {
        let (unit, zero) = if is_or {
            (TraceFormula::False, TraceFormula::True)
        } else {
            (TraceFormula::True, TraceFormula::False)
        };
        let mut out = Vec::new();
        let mut stack: Vec<TraceRef> = xs.into_iter().collect();
        stack.reverse();
        while let Some(x) = stack.pop() {
            let node = &self.traces[x.index()];
            if *node == zero {
                return self.raw_trace(zero);
            }
            if *node == unit {
                continue;
            }
            match node {
                TraceFormula::Or(ys) if is_or => stack.extend(ys.iter().rev()),
                TraceFormula::And(ys) if !is_or => stack.extend(ys.iter().rev()),
                _ => {
                    if !out.contains(&x) {
                        out.push(x)
                    }
                }
            }
        }
        for &x in &out {
            if let TraceFormula::Not(y) = self.traces[x.index()] {
                if out.contains(&y) {
                    return self.raw_trace(zero);
                }
            }
        }
        match out.len() {
            0 => self.raw_trace(unit),
            1 => out[0],
            _ => {
                if is_or {
                    self.raw_trace(TraceFormula::Or(out))
                } else {
                    self.raw_trace(TraceFormula::And(out))
                }
            }
        }
    }

    // ---- structure ----

    /// Processes `i` with a move `←_i` outside every test of `π`, as a mask.
    pub fn top_level_moves(&self, p: PathRef) -> u64 {
        match &self.paths[p.index()] {
            PathFormula::Move(i) => 1 << i,
            PathFormula::Test(_) => 0,
            PathFormula::Sum(ps) | PathFormula::Concat(ps) => {
                ps.iter().fold(0, |m, &q| m | self.top_level_moves(q))
            }
            PathFormula::Star(q) => self.top_level_moves(*q),
        }
    }

    /// Processes for which `π` is local: all of them when `π` has no top-level
    /// move, the single process when there is exactly one, none otherwise.
    pub fn local_processes(&self, p: PathRef) -> u64 {
        let m = self.top_level_moves(p);
        match m.count_ones() {
            0 => {
                let k = self.alphabet.num_processes();
                if k == 64 {
                    u64::MAX
                } else {
                    (1 << k) - 1
                }
            }
            1 => m,
            _ => 0,
        }
    }

    /// Node count: letters, constants and moves count 1, `¬`, `*` and `⟨·⟩`
    /// add 1, an n-ary connective adds `n − 1`, and `|ψ?| = 1 + |ψ|`.
    pub fn size(&self, f: AnyFormula) -> u64 {
        let mut sizer = Sizer::new(self, false);
        match f {
            AnyFormula::Event(e) => sizer.event(e),
            AnyFormula::Trace(t) => sizer.trace(t),
        }
    }

    pub fn event_size(&self, e: EvRef) -> u64 {
        Sizer::new(self, false).event(e)
    }

    pub fn path_size(&self, p: PathRef) -> u64 {
        Sizer::new(self, false).path(p)
    }

    /// `||π||`: like [`Formulas::path_size`] but every test counts 1.
    pub fn toplevel_size(&self, p: PathRef) -> u64 {
        Sizer::new(self, true).path(p)
    }

    /// Number of distinct nodes reachable from `f`.
    pub fn dag_size(&self, f: AnyFormula) -> usize {
        let mut seen = Reach::default();
        seen.any(self, f);
        seen.events.len() + seen.paths.len() + seen.traces.len()
    }

    /// Checks which dialect `f` belongs to.
    pub fn dialect_check(&self, f: AnyFormula) -> DialectReport {
        let mut reach = Reach::default();
        reach.any(self, f);
        let mut report = DialectReport {
            uses_constants: false,
            uses_global_em: false,
            uses_bare_diamond: false,
            all_paths_local: true,
            locality_witnesses: Vec::new(),
        };
        let mut events: Vec<_> = reach.events.into_iter().collect();
        events.sort();
        for e in events {
            match self.events[e.index()] {
                EventFormula::Yleq(..) | EventFormula::Yleq2(..) => report.uses_constants = true,
                EventFormula::Diamond(p, _) | EventFormula::DiamondExists(p) => {
                    if matches!(self.events[e.index()], EventFormula::DiamondExists(_)) {
                        report.uses_bare_diamond = true;
                    }
                    let l = self.local_processes(p);
                    if l == 0 {
                        report.all_paths_local = false;
                    }
                    report.locality_witnesses.push((
                        e,
                        (0..self.alphabet.num_processes()).filter(|i| l >> i & 1 == 1).collect(),
                    ));
                }
                _ => {}
            }
        }
        for t in reach.traces {
            match self.traces[t.index()] {
                TraceFormula::Lleq(..) | TraceFormula::Lleq2(..) => report.uses_constants = true,
                TraceFormula::EM(_) => report.uses_global_em = true,
                _ => {}
            }
        }
        report
    }
}

/// Result of [`Formulas::dialect_check`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DialectReport {
    /// Some `Yleq`, `Yleq2`, `Lleq` or `Lleq2` occurs.
    pub uses_constants: bool,
    /// Some `EM φ` (without process index) occurs.
    pub uses_global_em: bool,
    /// Some `⟨π⟩` without trailing formula occurs.
    pub uses_bare_diamond: bool,
    /// Every diamond path is local for some process.
    pub all_paths_local: bool,
    /// For each diamond node, the processes its path is local for.
    pub locality_witnesses: Vec<(EvRef, Vec<ProcId>)>,
}

impl DialectReport {
    /// No constants, no global `EM`, every path local. Bare diamonds are
    /// shorthand for `⟨π⟩⊤` and are accepted.
    pub fn is_locpastpdl(&self) -> bool {
        !self.uses_constants && !self.uses_global_em && self.all_paths_local
    }
}

#[derive(Default)]
struct Reach {
    events: std::collections::HashSet<EvRef>,
    paths: std::collections::HashSet<PathRef>,
    traces: std::collections::HashSet<TraceRef>,
}

impl Reach {
    fn any(&mut self, f: &Formulas, x: AnyFormula) {
        match x {
            AnyFormula::Event(e) => self.event(f, e),
            AnyFormula::Trace(t) => self.trace(f, t),
        }
    }

    fn trace(&mut self, f: &Formulas, t: TraceRef) {
        if !self.traces.insert(t) {
            return;
        }
        match &f.traces[t.index()] {
            TraceFormula::EMi(_, e) | TraceFormula::EM(e) => self.event(f, *e),
            TraceFormula::Not(x) => self.trace(f, *x),
            TraceFormula::Or(xs) | TraceFormula::And(xs) => {
                for &x in xs {
                    self.trace(f, x)
                }
            }
            _ => {}
        }
    }

    fn event(&mut self, f: &Formulas, e: EvRef) {
        if !self.events.insert(e) {
            return;
        }
        match &f.events[e.index()] {
            EventFormula::Not(x) => self.event(f, *x),
            EventFormula::Or(xs) | EventFormula::And(xs) => {
                for &x in xs {
                    self.event(f, x)
                }
            }
            EventFormula::Diamond(p, x) => {
                self.path(f, *p);
                self.event(f, *x)
            }
            EventFormula::DiamondExists(p) => self.path(f, *p),
            _ => {}
        }
    }

    fn path(&mut self, f: &Formulas, p: PathRef) {
        if !self.paths.insert(p) {
            return;
        }
        match &f.paths[p.index()] {
            PathFormula::Test(e) => self.event(f, *e),
            PathFormula::Sum(ps) | PathFormula::Concat(ps) => {
                for &q in ps {
                    self.path(f, q)
                }
            }
            PathFormula::Star(q) => self.path(f, *q),
            PathFormula::Move(_) => {}
        }
    }
}

struct Sizer<'a> {
    f: &'a Formulas,
    toplevel: bool,
    events: HashMap<EvRef, u64>,
    paths: HashMap<PathRef, u64>,
}

impl<'a> Sizer<'a> {
    fn new(f: &'a Formulas, toplevel: bool) -> Self {
        Sizer {
            f,
            toplevel,
            events: HashMap::new(),
            paths: HashMap::new(),
        }
    }

    fn nary(&self, sizes: impl Iterator<Item = u64>) -> u64 {
        let mut n = 0u64;
        let mut total = 0u64;
        for s in sizes {
            n += 1;
            total = total.saturating_add(s);
        }
        total.saturating_add(n.saturating_sub(1))
    }

    fn trace(&mut self, t: TraceRef) -> u64 {
        match self.f.traces[t.index()].clone() {
            TraceFormula::True | TraceFormula::False => 1,
            TraceFormula::Lleq(..) | TraceFormula::Lleq2(..) => 1,
            TraceFormula::EMi(_, e) | TraceFormula::EM(e) => 1 + self.event(e),
            TraceFormula::Not(x) => 1 + self.trace(x),
            TraceFormula::Or(xs) | TraceFormula::And(xs) => {
                let v: Vec<u64> = xs.iter().map(|&x| self.trace(x)).collect();
                self.nary(v.into_iter())
            }
        }
    }

    fn event(&mut self, e: EvRef) -> u64 {
        if let Some(&s) = self.events.get(&e) {
            return s;
        }
        let s = match self.f.events[e.index()].clone() {
            EventFormula::True
            | EventFormula::False
            | EventFormula::Letter(_)
            | EventFormula::Yleq(..)
            | EventFormula::Yleq2(..) => 1,
            EventFormula::Not(x) => self.event(x).saturating_add(1),
            EventFormula::Or(xs) | EventFormula::And(xs) => {
                let v: Vec<u64> = xs.iter().map(|&x| self.event(x)).collect();
                self.nary(v.into_iter())
            }
            EventFormula::Diamond(p, x) => {
                let saved = self.toplevel;
                self.toplevel = false;
                let ps = self.path(p);
                self.toplevel = saved;
                ps.saturating_add(self.event(x)).saturating_add(1)
            }
            EventFormula::DiamondExists(p) => {
                let saved = self.toplevel;
                self.toplevel = false;
                let ps = self.path(p);
                self.toplevel = saved;
                ps.saturating_add(1)
            }
        };
        if !self.toplevel {
            self.events.insert(e, s);
        }
        s
    }

    fn path(&mut self, p: PathRef) -> u64 {
        if let Some(&s) = self.paths.get(&p) {
            return s;
        }
        let s = match self.f.paths[p.index()].clone() {
            PathFormula::Move(_) => 1,
            PathFormula::Test(e) => {
                if self.toplevel {
                    1
                } else {
                    self.event(e).saturating_add(1)
                }
            }
            PathFormula::Sum(ps) | PathFormula::Concat(ps) => {
                let v: Vec<u64> = ps.iter().map(|&q| self.path(q)).collect();
                self.nary(v.into_iter())
            }
            PathFormula::Star(q) => self.path(q).saturating_add(1),
        };
        self.paths.insert(p, s);
        s
    }
}
