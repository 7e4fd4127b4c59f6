//! Elimination of the constants `Y_i ≤ Y_j`, `Y_{i,j} ≤ Y_k`, `L_i ≤ L_j`,
//! `L_{i,j} ≤ L_k` and of the global modality `EM` in favour of local past
//! PDL formulas.
//!
//! The builders follow the constructive proofs: `same_j(π)` and the modulo
//! counters `Mod_{k,n}(π)` give separating sets `Ξ(π)`; separating sets give
//! address equality `Peq`; prefixes plus short re-entry paths give address
//! order `Pleq`; the `Y` constants are then a finite boolean combination of
//! `Pleq` over the addressing paths of the `Y_i`. The trace constants use the
//! same scheme anchored at the last events (`EQ`, `LEQ`).
//!
//! The paper quantifies over all sd-paths up to a length bound, which is far
//! too many to write down. [`QuantifierRange::Witness`] restricts every
//! quantifier to the paths that the existence proofs actually produce; the
//! full range is available as [`QuantifierRange::Enumerated`] for small
//! inputs.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::formula::{EvRef, EventFormula, Formulas, PathFormula, PathRef, TraceFormula, TraceRef};
use crate::sdpath::{count_sdpaths, default_basis, enumerate_sdpaths, Atomic, SdLetter, SdPath};
use crate::trace::ProcId;

/// How the finite disjunctions and conjunctions over sd-paths are ranged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QuantifierRange {
    /// Only the paths built in the existence proofs: addressing chains of the
    /// `Y_j`, suffixes of the compared paths, and their combinations.
    Witness,
    /// Every standardized sd-path with atomics from the basis (extended with
    /// the atomics of the compared paths) and length within the stated bound.
    Enumerated { basis: Vec<Atomic> },
}

/// Limits and range selection for the builders.
#[derive(Clone, Debug)]
pub struct ElimConfig {
    pub max_processes: usize,
    /// Cap on the number of separating formulas collected for one `Peq`/`EQ`
    /// and on the number of enumerated paths in one quantifier.
    pub xi_budget: u128,
    pub range: QuantifierRange,
}

impl Default for ElimConfig {
    fn default() -> Self {
        ElimConfig {
            max_processes: 4,
            xi_budget: 1_000_000,
            range: QuantifierRange::Witness,
        }
    }
}

impl ElimConfig {
    pub fn enumerated_default(alphabet: &crate::trace::DistributedAlphabet) -> Self {
        ElimConfig {
            range: QuantifierRange::Enumerated {
                basis: default_basis(alphabet),
            },
            ..Default::default()
        }
    }
}

/// Memoising builder for the constructions.
pub struct Eliminator<'a> {
    f: &'a mut Formulas,
    cfg: ElimConfig,
    same_memo: HashMap<(ProcId, Vec<SdLetter>), EvRef>,
    mod_memo: HashMap<(SdPath, usize, usize), EvRef>,
    xi_memo: HashMap<SdPath, Vec<EvRef>>,
    peq_memo: HashMap<(SdPath, SdPath), EvRef>,
    pleq_memo: HashMap<(SdPath, SdPath), EvRef>,
    eq_memo: HashMap<(ProcId, ProcId, SdPath, SdPath), TraceRef>,
    leq_memo: HashMap<(ProcId, ProcId, SdPath, SdPath), TraceRef>,
    const_memo: HashMap<(u8, ProcId, ProcId, ProcId), EvRef>,
    tconst_memo: HashMap<(u8, ProcId, ProcId, ProcId), TraceRef>,
    elim_event_memo: HashMap<EvRef, EvRef>,
    elim_path_memo: HashMap<PathRef, PathRef>,
    elim_trace_memo: HashMap<TraceRef, TraceRef>,
}

impl<'a> Eliminator<'a> {
    pub fn new(f: &'a mut Formulas, cfg: ElimConfig) -> Result<Self> {
        let k = f.alphabet().num_processes();
        if k > cfg.max_processes {
            return Err(Error::Resource(format!(
                "{k} processes exceed the configured limit of {}",
                cfg.max_processes
            )));
        }
        Ok(Eliminator {
            f,
            cfg,
            same_memo: HashMap::new(),
            mod_memo: HashMap::new(),
            xi_memo: HashMap::new(),
            peq_memo: HashMap::new(),
            pleq_memo: HashMap::new(),
            eq_memo: HashMap::new(),
            leq_memo: HashMap::new(),
            const_memo: HashMap::new(),
            tconst_memo: HashMap::new(),
            elim_event_memo: HashMap::new(),
            elim_path_memo: HashMap::new(),
            elim_trace_memo: HashMap::new(),
        })
    }

    pub fn formulas(&mut self) -> &mut Formulas {
        self.f
    }

    pub fn config(&self) -> &ElimConfig {
        &self.cfg
    }

    fn nproc(&self) -> usize {
        self.f.alphabet().num_processes()
    }

    fn on(&self, i: ProcId) -> Atomic {
        Atomic::on(self.f.alphabet(), i)
    }

    fn std(&self, p: &SdPath) -> SdPath {
        p.standardize(self.f.alphabet())
    }

    fn atom(&mut self, a: Atomic) -> EvRef {
        self.f.atoms(a.0)
    }

    /// `⟨π⟩φ` as nested local diamonds.
    fn dia(&mut self, letters: &[SdLetter], phi: EvRef) -> EvRef {
        SdPath::new(letters.to_vec()).diamond_with(self.f, phi)
    }

    fn dia_top(&mut self, letters: &[SdLetter]) -> EvRef {
        let t = self.f.tt();
        self.dia(letters, t)
    }

    // ---------------------------------------------------------------
    // same_j, Mod, Ξ
    // ---------------------------------------------------------------

    /// `same_j(π)`: `⟨π⟩` and `⟨⇐_j{⟨π⟩}⟩` hold and `π(e) = π(⇐_j{⟨π⟩}(e))`.
    pub fn build_same(&mut self, j: ProcId, p: &SdPath) -> Result<EvRef> {
        if !p.is_standardized() {
            return Err(Error::Input("same_j expects a standardized sd-path".into()));
        }
        Ok(self.same_tail(j, p.letters()))
    }

    fn same_tail(&mut self, j: ProcId, letters: &[SdLetter]) -> EvRef {
        let key = (j, letters.to_vec());
        if let Some(&r) = self.same_memo.get(&key) {
            return r;
        }
        let r = match letters {
            [] | [SdLetter::Test(_)] => self.f.ff(),
            [SdLetter::Test(phi), rest @ ..] => {
                // φ ∧ same_j(π') ∧ ⟨←_j·((¬⟨π'⟩ ∨ (¬φ ∧ same_j(π')))?·←_j)*⟩⟨π⟩
                let phi_f = self.atom(*phi);
                let not_phi = self.atom(phi.not(self.f.alphabet()));
                let s_rest = self.same_tail(j, rest);
                let d_rest = self.dia_top(rest);
                let d_all = self.dia_top(letters);
                let nd_rest = self.f.not(d_rest);
                let inner = self.f.and([not_phi, s_rest]);
                let test = self.f.or([nd_rest, inner]);
                let mv = self.f.mv(j);
                let t = self.f.test(test);
                let step = self.f.concat([t, mv]);
                let loop_ = self.f.star(step);
                let path = self.f.concat([mv, loop_]);
                let d = self.f.diamond(path, d_all);
                self.f.and([phi_f, s_rest, d])
            }
            [SdLetter::PrevOn(i, phi), rest @ ..] if *i == j => {
                // ⟨π⟩ ∧ (⟨←_i⟩¬φ ∨ ⟨←_i·(φ ∧ same_i(π'))?·←_i·((⟨π'⟩ ⇒ (¬φ ∧ same_i(π')))?·←_i)*·(⟨π'⟩ ∧ φ)?⟩)
                let i = *i;
                let phi_f = self.atom(*phi);
                let not_phi = self.atom(phi.not(self.f.alphabet()));
                let d_all = self.dia_top(letters);
                let s_rest = self.same_tail(i, rest);
                let d_rest = self.dia_top(rest);
                let mv = self.f.mv(i);
                let first = self.f.diamond(mv, not_phi);
                let t1f = self.f.and([phi_f, s_rest]);
                let t1 = self.f.test(t1f);
                let ns = self.f.and([not_phi, s_rest]);
                let t2f = self.f.implies(d_rest, ns);
                let t2 = self.f.test(t2f);
                let step = self.f.concat([t2, mv]);
                let loop_ = self.f.star(step);
                let t3f = self.f.and([d_rest, phi_f]);
                let t3 = self.f.test(t3f);
                let path = self.f.concat([mv, t1, mv, loop_, t3]);
                let tt = self.f.tt();
                let second = self.f.diamond(path, tt);
                let alt = self.f.or([first, second]);
                self.f.and([d_all, alt])
            }
            [SdLetter::PrevOn(..), ..] => {
                // same_j(π) = same_i(on_j?·π)
                let i = match letters[0] {
                    SdLetter::PrevOn(i, _) => i,
                    _ => unreachable!(),
                };
                let mut l = vec![SdLetter::Test(self.on(j))];
                l.extend_from_slice(letters);
                self.same_tail(i, &l)
            }
        };
        self.same_memo.insert(key, r);
        r
    }

    /// `Mod_{k,n}(π)`: `⟨π⟩` holds and the number of `f < e` satisfying
    /// `⟨π⟩ ∧ ¬same_i(π)` is `k` modulo `n`, `i` being the first move's
    /// process.
    pub fn build_mod(&mut self, p: &SdPath, n: usize, k: usize) -> Result<EvRef> {
        if n < 2 || k >= n {
            return Err(Error::Input(format!("Mod needs n > 1 and k < n, got k={k}, n={n}")));
        }
        let p = self.std(p);
        let i = p
            .first_process()
            .ok_or_else(|| Error::Input("Mod needs an sd-path of positive length".into()))?;
        Ok(self.mod_inner(&p, i, n, k))
    }

    fn mod_inner(&mut self, p: &SdPath, i: ProcId, n: usize, k: usize) -> EvRef {
        let key = (p.clone(), n, k);
        if let Some(&r) = self.mod_memo.get(&key) {
            return r;
        }
        let d = self.dia_top(p.letters());
        let same = self.same_tail(i, p.letters());
        let nsame = self.f.not(same);
        let psi = self.f.and([d, nsame]);
        let step = self.f.prevon(i, psi);
        let r = if k == 0 {
            let pow = self.f.power(step, n);
            let loop_ = self.f.star(pow);
            let mv = self.f.mv(i);
            let plus = self.f.plus(mv);
            let earlier = self.f.diamond(plus, psi);
            let none = self.f.not(earlier);
            let body = self.f.diamond(loop_, none);
            self.f.and([d, body])
        } else {
            let prev = self.mod_inner(p, i, n, k - 1);
            let body = self.f.diamond(step, prev);
            self.f.and([d, body])
        };
        self.mod_memo.insert(key, r);
        r
    }

    /// `Ξ(π) = {¬⟨π⟩, ⟨π⟩, same_i(π), ¬same_i(π)} ∪ {Mod_{k,n}(π) : k < n}`
    /// with `n = ‖π‖ + 1`.
    pub fn separating_set(&mut self, p: &SdPath) -> Result<Vec<EvRef>> {
        let p = self.std(p);
        if p.is_empty() {
            return Err(Error::Input("separating sets need an sd-path of positive length".into()));
        }
        Ok(self.xi(&p))
    }

    fn xi(&mut self, p: &SdPath) -> Vec<EvRef> {
        if let Some(v) = self.xi_memo.get(p) {
            return v.clone();
        }
        let i = p.first_process().expect("positive length");
        let n = p.len() + 1;
        let d = self.dia_top(p.letters());
        let nd = self.f.not(d);
        let s = self.same_tail(i, p.letters());
        let ns = self.f.not(s);
        let mut out = vec![nd, d, s, ns];
        for k in 0..n {
            out.push(self.mod_inner(p, i, n, k));
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|x| seen.insert(*x));
        self.xi_memo.insert(p.clone(), out.clone());
        out
    }

    // ---------------------------------------------------------------
    // quantifier ranges
    // ---------------------------------------------------------------

    /// Addressing chains for `Y_j`: `⇐_ℓ{on_{i_m}}·⇐_{i_m}{on_{i_{m-1}}} ⋯
    /// ⇐_{i_2}{on_{i_1}}` with `i_1 = j`, the `i`'s pairwise distinct, `ℓ`
    /// arbitrary when `m = 1` and distinct from them otherwise.
    pub fn y_chains(&self, j: ProcId) -> Vec<SdPath> {
        let k = self.nproc();
        let mut out = Vec::new();
        let mut seqs: Vec<Vec<ProcId>> = vec![vec![j]];
        for m in 1..k {
            let mut next = Vec::new();
            for seq in &seqs {
                for l in 0..k {
                    if m > 1 && seq.contains(&l) {
                        continue;
                    }
                    let mut letters = vec![SdLetter::PrevOn(l, self.on(seq[m - 1]))];
                    for h in (1..m).rev() {
                        letters.push(SdLetter::PrevOn(seq[h], self.on(seq[h - 1])));
                    }
                    out.push(self.std(&SdPath::new(letters)));
                }
                for p in 0..k {
                    if !seq.contains(&p) {
                        let mut s = seq.clone();
                        s.push(p);
                        next.push(s);
                    }
                }
            }
            seqs = next;
        }
        out
    }

    fn quantifier_paths(&self, target: ProcId, min_len: usize, max_len: usize) -> Result<Vec<SdPath>> {
        match &self.cfg.range {
            QuantifierRange::Witness => {
                let mut v = Vec::new();
                if min_len == 0 {
                    v.push(SdPath::top(self.f.alphabet()));
                }
                v.extend(self.y_chains(target));
                Ok(v)
            }
            QuantifierRange::Enumerated { basis } => {
                enumerate_sdpaths(self.f.alphabet(), basis, min_len, max_len, self.cfg.xi_budget)
            }
        }
    }

    /// `{?⊤} ∪ {ρ·on_j? : ρ addressing Y_j}`
    fn reentry(&self, j: ProcId) -> Vec<SdPath> {
        let mut v = vec![SdPath::top(self.f.alphabet())];
        let on = self.on(j);
        for y in self.y_chains(j) {
            v.push(self.std(&y.then_test(on)));
        }
        v
    }

    /// Paths `σ` whose separating sets separate two addresses when one of
    /// them is `π`: re-entry into the `k`-th move's chain followed by the rest
    /// of `π`.
    fn witness_sigmas(&self, p: &SdPath) -> Vec<SdPath> {
        let p = self.std(p);
        let moves = p.moves();
        let mut out = Vec::new();
        for (k, &(j, _)) in moves.iter().enumerate() {
            for after in [false, true] {
                let s = p.suffix_from_move(k, after);
                for rho in self.reentry(j) {
                    let sigma = self.std(&rho.then(&s));
                    if !sigma.is_empty() && !out.contains(&sigma) {
                        out.push(sigma);
                    }
                }
            }
        }
        out
    }

    fn basis_with(&self, basis: &[Atomic], paths: &[&SdPath]) -> Vec<Atomic> {
        let mut b: Vec<Atomic> = basis.to_vec();
        for p in paths {
            for l in p.letters() {
                let a = match *l {
                    SdLetter::Test(a) | SdLetter::PrevOn(_, a) => a,
                };
                if !b.contains(&a) {
                    b.push(a);
                }
            }
        }
        b
    }

    fn enumerated_sigmas(&self, basis: &[Atomic], paths: &[&SdPath], max_len: usize) -> Result<Vec<SdPath>> {
        let b = self.basis_with(basis, paths);
        let k = self.nproc();
        let mut formulas: u128 = 0;
        for len in 1..=max_len {
            let c = count_sdpaths(b.len(), k, len)
                .ok_or_else(|| Error::Resource("separating set size overflows".into()))?;
            formulas = formulas.saturating_add(c.saturating_mul(len as u128 + 5));
        }
        if formulas > self.cfg.xi_budget {
            return Err(Error::Resource(format!(
                "separating set of {formulas} formulas (paths up to length {max_len}) exceeds the budget of {}",
                self.cfg.xi_budget
            )));
        }
        enumerate_sdpaths(self.f.alphabet(), &b, 1, max_len, u128::MAX)
    }

    /// `(prefix, extension)` pairs of the `Pleq`/`LEQ` disjunctions.
    fn order_pairs(&self, p: &SdPath, anchor: Option<ProcId>) -> Result<Vec<(SdPath, SdPath)>> {
        let p = self.std(p);
        let top = SdPath::top(self.f.alphabet());
        match &self.cfg.range {
            QuantifierRange::Witness => {
                let cuts = p.cuts(self.f.alphabet());
                let mut out = vec![(cuts[0].clone(), top.clone())];
                for (k, &(j, phi)) in p.moves().iter().enumerate() {
                    for rho in self.reentry(j) {
                        out.push((cuts[k + 1].clone(), rho.clone()));
                        out.push((cuts[k + 1].clone(), self.std(&rho.then(&SdPath::prevon(j, phi)))));
                    }
                }
                if let Some(i) = anchor {
                    let on = self.on(i);
                    out.push((top.clone(), top.clone()));
                    for y in self.y_chains(i) {
                        out.push((top.clone(), self.std(&y.then_test(on))));
                    }
                }
                let mut seen = std::collections::HashSet::new();
                out.retain(|x| seen.insert(x.clone()));
                Ok(out)
            }
            QuantifierRange::Enumerated { basis } => {
                let b = self.basis_with(basis, &[&p]);
                let exts = enumerate_sdpaths(self.f.alphabet(), &b, 0, self.nproc(), self.cfg.xi_budget)?;
                let mut out = Vec::new();
                for pre in p.prefixes(self.f.alphabet()) {
                    for x in &exts {
                        out.push((pre.clone(), x.clone()));
                    }
                }
                Ok(out)
            }
        }
    }

    // ---------------------------------------------------------------
    // Peq, Pleq, Y constants
    // ---------------------------------------------------------------

    /// Letters that the event addressed by a standardized path can carry.
    fn endpoint_letters(&self, p: &SdPath) -> u64 {
        let tests = p.tests();
        let mut m = tests.last().map_or(u64::MAX, |a| a.0);
        if let Some(&(j, phi)) = p.moves().last() {
            m &= phi.0 & self.f.alphabet().letters_mask(j);
        }
        m
    }

    /// Letters that an event where the path is defined can carry.
    fn start_letters(&self, p: &SdPath) -> u64 {
        let tests = p.tests();
        let mut m = tests.first().map_or(u64::MAX, |a| a.0);
        if let Some(&(j, _)) = p.moves().first() {
            m &= self.f.alphabet().letters_mask(j);
        } else {
            m &= self.endpoint_letters(p);
        }
        m
    }

    /// `Peq(π, π')`: both addresses exist and coincide.
    pub fn build_peq(&mut self, p: &SdPath, q: &SdPath) -> Result<EvRef> {
        let p = self.std(p);
        let q = self.std(q);
        let key = (p.clone(), q.clone());
        if let Some(&r) = self.peq_memo.get(&key) {
            return Ok(r);
        }
        let r = if p == q {
            self.dia_top(p.letters())
        } else if self.endpoint_letters(&p) & self.endpoint_letters(&q) == 0
            || self.start_letters(&p) & self.start_letters(&q) == 0
        {
            self.f.ff()
        } else {
            let sigmas = match self.cfg.range.clone() {
                QuantifierRange::Witness => {
                    let mut s = self.witness_sigmas(&p);
                    for x in self.witness_sigmas(&q) {
                        if !s.contains(&x) {
                            s.push(x);
                        }
                    }
                    s
                }
                QuantifierRange::Enumerated { basis } => {
                    let max = p.len().max(q.len()) + self.nproc();
                    self.enumerated_sigmas(&basis, &[&p, &q], max)?
                }
            };
            let sigmas = self.connecting(sigmas, &p, &q);
            let xis = self.collect_xi(&sigmas)?;
            let dp = self.dia_top(p.letters());
            let dq = self.dia_top(q.letters());
            let mut bad = Vec::with_capacity(xis.len());
            for xi in xis {
                let a = self.dia(p.letters(), xi);
                let nxi = self.f.not(xi);
                let b = self.dia(q.letters(), nxi);
                bad.push(self.f.and([a, b]));
            }
            let any_bad = self.f.or(bad);
            let none = self.f.not(any_bad);
            self.f.and([dp, dq, none])
        };
        self.peq_memo.insert(key, r);
        Ok(r)
    }

    /// Keeps the `σ` that can lead from one address to the other. `Ξ(σ)` only
    /// separates `g` from `σ(g)`, so the others contribute nothing.
    fn connecting(&self, sigmas: Vec<SdPath>, p: &SdPath, q: &SdPath) -> Vec<SdPath> {
        let (ep, eq) = (self.endpoint_letters(p), self.endpoint_letters(q));
        sigmas
            .into_iter()
            .filter(|s| {
                let (a, b) = (self.start_letters(s), self.endpoint_letters(s));
                (a & ep != 0 && b & eq != 0) || (a & eq != 0 && b & ep != 0)
            })
            .collect()
    }

    fn collect_xi(&mut self, sigmas: &[SdPath]) -> Result<Vec<EvRef>> {
        let mut xis: Vec<EvRef> = (0..self.nproc()).map(|i| self.f.on(i)).collect();
        let mut seen: std::collections::HashSet<EvRef> = xis.iter().copied().collect();
        for s in sigmas {
            for x in self.xi(s) {
                if seen.insert(x) {
                    xis.push(x);
                }
            }
            if xis.len() as u128 > self.cfg.xi_budget {
                return Err(Error::Resource(format!(
                    "more than {} separating formulas",
                    self.cfg.xi_budget
                )));
            }
        }
        Ok(xis)
    }

    /// `Pleq(π, π')`: both addresses exist and `π(e) ≤ π'(e)`.
    pub fn build_pleq(&mut self, p: &SdPath, q: &SdPath) -> Result<EvRef> {
        let p = self.std(p);
        let q = self.std(q);
        let key = (p.clone(), q.clone());
        if let Some(&r) = self.pleq_memo.get(&key) {
            return Ok(r);
        }
        let dp = self.dia_top(p.letters());
        let dq = self.dia_top(q.letters());
        let r = if p == q {
            dp
        } else {
            let mut alts = Vec::new();
            for (pre, ext) in self.order_pairs(&p, None)? {
                let target = q.then(&ext);
                alts.push(self.build_peq(&pre, &target)?);
            }
            let any = self.f.or(alts);
            self.f.and([dp, dq, any])
        };
        self.pleq_memo.insert(key, r);
        Ok(r)
    }

    /// `Y_i ≤ Y_j` as a local formula.
    pub fn build_yleq(&mut self, i: ProcId, j: ProcId) -> Result<EvRef> {
        if let Some(&r) = self.const_memo.get(&(0, i, j, 0)) {
            return Ok(r);
        }
        let k = self.nproc();
        let r = if k == 1 {
            let m = self.f.mv(i);
            let t = self.f.tt();
            self.f.diamond(m, t)
        } else {
            let (on_i, on_j) = (self.on(i), self.on(j));
            let lefts: Vec<SdPath> = self
                .quantifier_paths(i, 1, k - 1)?
                .iter()
                .map(|p| self.std(&p.then_test(on_i)))
                .collect();
            let rights: Vec<SdPath> = self
                .quantifier_paths(j, 1, k - 1)?
                .iter()
                .map(|p| self.std(&p.then_test(on_j)))
                .collect();
            self.order_combination(&lefts, &rights)?
        };
        self.const_memo.insert((0, i, j, 0), r);
        Ok(r)
    }

    /// `Y_{i,j} ≤ Y_k` as a local formula.
    pub fn build_yleq2(&mut self, i: ProcId, j: ProcId, k: ProcId) -> Result<EvRef> {
        if let Some(&r) = self.const_memo.get(&(1, i, j, k)) {
            return Ok(r);
        }
        let n = self.nproc();
        let r = if n == 1 {
            let m = self.f.mv(i);
            let p = self.f.concat([m, m]);
            let t = self.f.tt();
            self.f.diamond(p, t)
        } else {
            let (on_i, on_j, on_k) = (self.on(i), self.on(j), self.on(k));
            let firsts = self.quantifier_paths(i, 1, n - 1)?;
            let seconds = self.quantifier_paths(j, 1, n - 1)?;
            let mut lefts = Vec::new();
            for a in &firsts {
                for b in &seconds {
                    lefts.push(self.std(&a.then_test(on_i).then(b).then_test(on_j)));
                }
            }
            let rights: Vec<SdPath> = self
                .quantifier_paths(k, 1, n - 1)?
                .iter()
                .map(|p| self.std(&p.then_test(on_k)))
                .collect();
            self.order_combination(&lefts, &rights)?
        };
        self.const_memo.insert((1, i, j, k), r);
        Ok(r)
    }

    /// `⋁⟨l⟩ ∧ ⋁⟨r⟩ ∧ ⋁_r ⋀_l (⟨l⟩ ⇒ Pleq(l, r))`
    fn order_combination(&mut self, lefts: &[SdPath], rights: &[SdPath]) -> Result<EvRef> {
        let dl: Vec<EvRef> = lefts.iter().map(|l| self.dia_top(l.letters())).collect();
        let dr: Vec<EvRef> = rights.iter().map(|r| self.dia_top(r.letters())).collect();
        let phi1 = self.f.or(dl.iter().copied());
        let phi2 = self.f.or(dr.iter().copied());
        let mut outer = Vec::new();
        for r in rights {
            let mut inner = Vec::new();
            for (l, &d) in lefts.iter().zip(&dl) {
                let le = self.build_pleq(l, r)?;
                inner.push(self.f.implies(d, le));
            }
            outer.push(self.f.and(inner));
        }
        let phi3 = self.f.or(outer);
        Ok(self.f.and([phi1, phi2, phi3]))
    }

    // ---------------------------------------------------------------
    // trace constants
    // ---------------------------------------------------------------

    /// `EQ(i, j, π1, π2)`: `π1(L_i)` and `π2(L_j)` exist and coincide.
    pub fn build_eq_trace(&mut self, i: ProcId, j: ProcId, p1: &SdPath, p2: &SdPath) -> Result<TraceRef> {
        let p1 = self.std(p1);
        let p2 = self.std(p2);
        let key = (i, j, p1.clone(), p2.clone());
        if let Some(&r) = self.eq_memo.get(&key) {
            return Ok(r);
        }
        let d1 = self.dia_top(p1.letters());
        let d2 = self.dia_top(p2.letters());
        let e1 = self.f.em_i(i, d1);
        let e2 = self.f.em_i(j, d2);
        let r = if i == j && p1 == p2 {
            e1
        } else if self.endpoint_letters(&p1) & self.endpoint_letters(&p2) == 0 {
            self.f.t_false()
        } else {
            let sigmas = match self.cfg.range.clone() {
                QuantifierRange::Witness => {
                    let mut s = self.witness_sigmas(&p1);
                    for x in self.witness_sigmas(&p2) {
                        if !s.contains(&x) {
                            s.push(x);
                        }
                    }
                    for (anchor, p) in [(i, &p1), (j, &p2)] {
                        let on = self.on(anchor);
                        for y in self.y_chains(anchor) {
                            let x = self.std(&y.then_test(on).then(p));
                            if !x.is_empty() && !s.contains(&x) {
                                s.push(x);
                            }
                        }
                    }
                    s
                }
                QuantifierRange::Enumerated { basis } => {
                    let max = p1.len().max(p2.len()) + self.nproc();
                    self.enumerated_sigmas(&basis, &[&p1, &p2], max)?
                }
            };
            let sigmas = self.connecting(sigmas, &p1, &p2);
            let xis = self.collect_xi(&sigmas)?;
            let mut bad = Vec::with_capacity(xis.len());
            for xi in xis {
                let a = self.dia(p1.letters(), xi);
                let nxi = self.f.not(xi);
                let b = self.dia(p2.letters(), nxi);
                let ea = self.f.em_i(i, a);
                let eb = self.f.em_i(j, b);
                bad.push(self.f.t_and([ea, eb]));
            }
            let any_bad = self.f.t_or(bad);
            let none = self.f.t_not(any_bad);
            self.f.t_and([e1, e2, none])
        };
        self.eq_memo.insert(key, r);
        Ok(r)
    }

    /// `LEQ(i, j, π1, π2)`: `π1(L_i)` and `π2(L_j)` exist and
    /// `π1(L_i) ≤ π2(L_j)`.
    pub fn build_leq_trace(&mut self, i: ProcId, j: ProcId, p1: &SdPath, p2: &SdPath) -> Result<TraceRef> {
        let p1 = self.std(p1);
        let p2 = self.std(p2);
        let key = (i, j, p1.clone(), p2.clone());
        if let Some(&r) = self.leq_memo.get(&key) {
            return Ok(r);
        }
        let d1 = self.dia_top(p1.letters());
        let d2 = self.dia_top(p2.letters());
        let e1 = self.f.em_i(i, d1);
        let e2 = self.f.em_i(j, d2);
        let r = if i == j && p1 == p2 {
            e1
        } else {
            let mut alts = Vec::new();
            for (pre, ext) in self.order_pairs(&p1, Some(i))? {
                let target = p2.then(&ext);
                alts.push(self.build_eq_trace(i, j, &pre, &target)?);
            }
            let any = self.f.t_or(alts);
            self.f.t_and([e1, e2, any])
        };
        self.leq_memo.insert(key, r);
        Ok(r)
    }

    /// `L_i ≤ L_j` as `LEQ(i, j, ?⊤, ?⊤)`.
    pub fn build_lleq(&mut self, i: ProcId, j: ProcId) -> Result<TraceRef> {
        if let Some(&r) = self.tconst_memo.get(&(0, i, j, 0)) {
            return Ok(r);
        }
        let r = if self.nproc() == 1 {
            let t = self.f.tt();
            self.f.em_i(i, t)
        } else {
            let top = SdPath::top(self.f.alphabet());
            self.build_leq_trace(i, j, &top, &top)?
        };
        self.tconst_memo.insert((0, i, j, 0), r);
        Ok(r)
    }

    /// `L_{i,j} ≤ L_k`.
    pub fn build_lleq2(&mut self, i: ProcId, j: ProcId, k: ProcId) -> Result<TraceRef> {
        if let Some(&r) = self.tconst_memo.get(&(1, i, j, k)) {
            return Ok(r);
        }
        let n = self.nproc();
        let r = if n == 1 {
            let t = self.f.tt();
            self.f.em_i(k, t)
        } else {
            let on_j = self.on(j);
            let top = SdPath::top(self.f.alphabet());
            let tt = self.f.tt();
            let has_k = self.f.em_i(k, tt);
            let mut exists = Vec::new();
            let mut all = Vec::new();
            for p in self.quantifier_paths(j, 0, n - 1)? {
                let on_jf = self.atom(on_j);
                let d = self.dia(p.letters(), on_jf);
                let em = self.f.em_i(i, d);
                exists.push(em);
                let left = self.std(&p.then_test(on_j));
                let le = self.build_leq_trace(i, k, &left, &top)?;
                all.push(self.f.t_implies(em, le));
            }
            let ex = self.f.t_or(exists);
            let al = self.f.t_and(all);
            self.f.t_and([has_k, ex, al])
        };
        self.tconst_memo.insert((1, i, j, k), r);
        Ok(r)
    }

    /// `L_i < L_j`
    fn llt(&mut self, i: ProcId, j: ProcId) -> Result<TraceRef> {
        let a = self.build_lleq(i, j)?;
        let b = self.build_lleq(j, i)?;
        let nb = self.f.t_not(b);
        Ok(self.f.t_and([a, nb]))
    }

    /// `EM φ ≡ ⋁_i (EM_i φ ∧ ¬⋁_j L_i < L_j)`.
    pub fn build_em(&mut self, phi: EvRef) -> Result<TraceRef> {
        let k = self.nproc();
        let mut alts = Vec::new();
        for i in 0..k {
            let emi = self.f.em_i(i, phi);
            let mut lts = Vec::new();
            for j in 0..k {
                if j != i {
                    lts.push(self.llt(i, j)?);
                }
            }
            let any = self.f.t_or(lts);
            let none = self.f.t_not(any);
            alts.push(self.f.t_and([emi, none]));
        }
        Ok(self.f.t_or(alts))
    }

    // ---------------------------------------------------------------
    // full translation
    // ---------------------------------------------------------------

    /// Replaces `EM`, bare diamonds and every constant by its local
    /// definition. The input must already use local paths only.
    pub fn eliminate(&mut self, phi: TraceRef) -> Result<TraceRef> {
        if let Some(&r) = self.elim_trace_memo.get(&phi) {
            return Ok(r);
        }
        let r = match self.f.trace(phi).clone() {
            TraceFormula::True => self.f.t_true(),
            TraceFormula::False => self.f.t_false(),
            TraceFormula::EMi(i, x) => {
                let x = self.eliminate_event(x)?;
                self.f.em_i(i, x)
            }
            TraceFormula::EM(x) => {
                let x = self.eliminate_event(x)?;
                self.build_em(x)?
            }
            TraceFormula::Lleq(i, j) => self.build_lleq(i, j)?,
            TraceFormula::Lleq2(i, j, k) => self.build_lleq2(i, j, k)?,
            TraceFormula::Not(x) => {
                let x = self.eliminate(x)?;
                self.f.t_not(x)
            }
            TraceFormula::Or(xs) => {
                let ys = xs.iter().map(|&x| self.eliminate(x)).collect::<Result<Vec<_>>>()?;
                self.f.t_or(ys)
            }
            TraceFormula::And(xs) => {
                let ys = xs.iter().map(|&x| self.eliminate(x)).collect::<Result<Vec<_>>>()?;
                self.f.t_and(ys)
            }
        };
        self.elim_trace_memo.insert(phi, r);
        Ok(r)
    }

    pub fn eliminate_event(&mut self, phi: EvRef) -> Result<EvRef> {
        if let Some(&r) = self.elim_event_memo.get(&phi) {
            return Ok(r);
        }
        let r = match self.f.event(phi).clone() {
            EventFormula::True => self.f.tt(),
            EventFormula::False => self.f.ff(),
            EventFormula::Letter(a) => self.f.letter(a),
            EventFormula::Not(x) => {
                let x = self.eliminate_event(x)?;
                self.f.not(x)
            }
            EventFormula::Or(xs) => {
                let ys = xs.iter().map(|&x| self.eliminate_event(x)).collect::<Result<Vec<_>>>()?;
                self.f.or(ys)
            }
            EventFormula::And(xs) => {
                let ys = xs.iter().map(|&x| self.eliminate_event(x)).collect::<Result<Vec<_>>>()?;
                self.f.and(ys)
            }
            EventFormula::Diamond(p, x) => {
                self.check_local(p)?;
                let p = self.eliminate_path(p)?;
                let x = self.eliminate_event(x)?;
                self.f.diamond(p, x)
            }
            EventFormula::DiamondExists(p) => {
                self.check_local(p)?;
                let p = self.eliminate_path(p)?;
                let t = self.f.tt();
                self.f.diamond(p, t)
            }
            EventFormula::Yleq(i, j) => self.build_yleq(i, j)?,
            EventFormula::Yleq2(i, j, k) => self.build_yleq2(i, j, k)?,
        };
        self.elim_event_memo.insert(phi, r);
        Ok(r)
    }

    fn check_local(&self, p: PathRef) -> Result<()> {
        if self.f.local_processes(p) == 0 {
            return Err(Error::Input(format!(
                "path `{}` is not local; only local paths can be translated",
                self.f.show_path(p)
            )));
        }
        Ok(())
    }

    fn eliminate_path(&mut self, p: PathRef) -> Result<PathRef> {
        if let Some(&r) = self.elim_path_memo.get(&p) {
            return Ok(r);
        }
        let r = match self.f.path(p).clone() {
            PathFormula::Move(i) => self.f.mv(i),
            PathFormula::Test(x) => {
                let x = self.eliminate_event(x)?;
                self.f.test(x)
            }
            PathFormula::Sum(ps) => {
                let qs = ps.iter().map(|&q| self.eliminate_path(q)).collect::<Result<Vec<_>>>()?;
                self.f.sum(qs)
            }
            PathFormula::Concat(ps) => {
                let qs = ps.iter().map(|&q| self.eliminate_path(q)).collect::<Result<Vec<_>>>()?;
                self.f.concat(qs)
            }
            PathFormula::Star(q) => {
                let q = self.eliminate_path(q)?;
                self.f.star(q)
            }
        };
        self.elim_path_memo.insert(p, r);
        Ok(r)
    }
}
