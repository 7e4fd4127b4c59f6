//! Simple deterministic path formulas.
//!
//! An sd-path is a sequence of atomic tests `φ?` and guarded backward moves
//! `⇐_i{φ}`, where `⇐_i{φ}` steps from an `i`-event to the closest strictly
//! earlier `i`-event whose label is in `φ`. Every sd-path is deterministic
//! and monotone.


use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{parse_event_formula, EvRef, Formulas, PathRef};
use crate::trace::{DistributedAlphabet, EventId, LetterId, ProcId, Trace};

/// An atomic event formula, i.e. a set of letters.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atomic(pub u64);

impl Atomic {
    pub fn top(alphabet: &DistributedAlphabet) -> Self {
        Atomic(alphabet.all_letters_mask())
    }

    pub fn bottom() -> Self {
        Atomic(0)
    }

    /// `on_i = Σ_i`
    pub fn on(alphabet: &DistributedAlphabet, i: ProcId) -> Self {
        Atomic(alphabet.letters_mask(i))
    }

    pub fn letter(a: LetterId) -> Self {
        Atomic(1 << a)
    }

    pub fn and(self, other: Atomic) -> Self {
        Atomic(self.0 & other.0)
    }

    pub fn or(self, other: Atomic) -> Self {
        Atomic(self.0 | other.0)
    }

    pub fn not(self, alphabet: &DistributedAlphabet) -> Self {
        Atomic(!self.0 & alphabet.all_letters_mask())
    }

    pub fn contains(self, a: LetterId) -> bool {
        self.0 >> a & 1 == 1
    }

    pub fn is_top(self, alphabet: &DistributedAlphabet) -> bool {
        self.0 == alphabet.all_letters_mask()
    }

    pub fn to_formula(self, f: &mut Formulas) -> EvRef {
        f.atoms(self.0)
    }

    /// `T`, `F`, `on_i` when it is exactly some `Σ_i`, else a disjunction of
    /// letters.
    pub fn show(self, alphabet: &DistributedAlphabet) -> String {
        if self.0 == alphabet.all_letters_mask() {
            return "T".into();
        }
        if self.0 == 0 {
            return "F".into();
        }
        if let Some(i) = alphabet.processes().find(|&i| alphabet.letters_mask(i) == self.0) {
            return format!("on_{}", alphabet.process_name(i));
        }
        alphabet
            .letters()
            .filter(|&a| self.contains(a))
            .map(|a| alphabet.letter_name(a))
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SdLetter {
    /// `φ?`
    Test(Atomic),
    /// `⇐_i{φ}`
    PrevOn(ProcId, Atomic),
}

/// A simple deterministic path formula.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SdPath {
    letters: Vec<SdLetter>,
}

impl SdPath {
    pub fn new(letters: Vec<SdLetter>) -> Self {
        SdPath { letters }
    }

    pub fn test(a: Atomic) -> Self {
        SdPath {
            letters: vec![SdLetter::Test(a)],
        }
    }

    pub fn prevon(i: ProcId, a: Atomic) -> Self {
        SdPath {
            letters: vec![SdLetter::PrevOn(i, a)],
        }
    }

    /// The standardized `?⊤`.
    pub fn top(alphabet: &DistributedAlphabet) -> Self {
        Self::test(Atomic::top(alphabet))
    }

    pub fn letters(&self) -> &[SdLetter] {
        &self.letters
    }

    /// `π·π'`
    pub fn then(&self, other: &SdPath) -> SdPath {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        SdPath { letters }
    }

    /// `π·φ?`
    pub fn then_test(&self, a: Atomic) -> SdPath {
        self.then(&SdPath::test(a))
    }

    /// `‖π‖`: the number of moves.
    pub fn len(&self) -> usize {
        self.letters
            .iter()
            .filter(|l| matches!(l, SdLetter::PrevOn(..)))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The moves `(i_k, φ_k)` in order.
    pub fn moves(&self) -> Vec<(ProcId, Atomic)> {
        self.letters
            .iter()
            .filter_map(|l| match *l {
                SdLetter::PrevOn(i, a) => Some((i, a)),
                _ => None,
            })
            .collect()
    }

    /// Process of the first move, if any.
    pub fn first_process(&self) -> Option<ProcId> {
        self.moves().first().map(|m| m.0)
    }

    /// Alternating `?φ'_0·⇐_{i1}φ_1·?φ'_1 ⋯ ⇐_{in}φ_n·?φ'_n`.
    pub fn is_standardized(&self) -> bool {
        self.letters.len() % 2 == 1
            && self.letters.iter().enumerate().all(|(n, l)| match l {
                SdLetter::Test(_) => n % 2 == 0,
                SdLetter::PrevOn(..) => n % 2 == 1,
            })
    }

    /// Equivalent standardized path of the same length: adjacent tests are
    /// conjoined and `?⊤` is inserted wherever a test is missing.
    pub fn standardize(&self, alphabet: &DistributedAlphabet) -> SdPath {
        let top = Atomic::top(alphabet);
        let mut out = Vec::with_capacity(2 * self.letters.len() + 1);
        let mut acc = top;
        for l in &self.letters {
            match *l {
                SdLetter::Test(a) => acc = acc.and(a),
                SdLetter::PrevOn(i, a) => {
                    out.push(SdLetter::Test(acc));
                    out.push(SdLetter::PrevOn(i, a));
                    acc = top;
                }
            }
        }
        out.push(SdLetter::Test(acc));
        SdPath { letters: out }
    }

    /// Standardized tests `φ'_0, …, φ'_n` (requires standardized form).
    pub fn tests(&self) -> Vec<Atomic> {
        self.letters
            .iter()
            .filter_map(|l| match *l {
                SdLetter::Test(a) => Some(a),
                _ => None,
            })
            .collect()
    }

    /// `?⊤` followed by the standardized prefixes cut right after each test:
    /// `?φ'_0`, `?φ'_0·⇐_{i1}φ_1·?φ'_1`, …, `π` (without duplicates).
    pub fn prefixes(&self, alphabet: &DistributedAlphabet) -> Vec<SdPath> {
        let mut out = vec![SdPath::top(alphabet)];
        for c in self.cuts(alphabet) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    /// Standardized prefixes ending after the `m`-th move's test, for
    /// `m = 0..=‖π‖`.
    pub fn cuts(&self, alphabet: &DistributedAlphabet) -> Vec<SdPath> {
        let s = self.standardize(alphabet);
        (0..=s.len())
            .map(|m| SdPath {
                letters: s.letters[..2 * m + 1].to_vec(),
            })
            .collect()
    }

    /// Standardized suffix starting at move `k` (0-based), or after it when
    /// `after` is set. Requires standardized form.
    pub fn suffix_from_move(&self, k: usize, after: bool) -> SdPath {
        let start = if after { 2 * k + 2 } else { 2 * k + 1 };
        SdPath {
            letters: self.letters[start..].to_vec(),
        }
    }

    /// `π(e)`.
    pub fn eval(&self, t: &Trace, e: EventId) -> Option<EventId> {
        let mut cur = e;
        for l in &self.letters {
            match *l {
                SdLetter::Test(a) => {
                    if !a.contains(t.label(cur)) {
                        return None;
                    }
                }
                SdLetter::PrevOn(i, a) => {
                    if !t.is_on(cur, i) {
                        return None;
                    }
                    let r = t.clock(cur, i) - 1;
                    cur = *t.chain(i)[..r].iter().rev().find(|&&g| a.contains(t.label(g)))?;
                }
            }
        }
        Some(cur)
    }

    /// Expansion into a path formula, `⇐_i{φ}` becoming `←_i·(¬φ?·←_i)*·φ?`.
    pub fn to_path_formula(&self, f: &mut Formulas) -> PathRef {
        let parts: Vec<PathRef> = self
            .letters
            .iter()
            .map(|l| match *l {
                SdLetter::Test(a) => {
                    let x = a.to_formula(f);
                    f.test(x)
                }
                SdLetter::PrevOn(i, a) => {
                    let x = a.to_formula(f);
                    f.prevon(i, x)
                }
            })
            .collect();
        f.concat(parts)
    }

    /// `⟨π⟩` as nested single-process diamonds.
    pub fn diamond_local(&self, f: &mut Formulas) -> EvRef {
        let t = f.tt();
        self.diamond_with(f, t)
    }

    /// `⟨π⟩φ` as nested single-process diamonds, using
    /// `⟨π·π'⟩φ = ⟨π⟩⟨π'⟩φ`.
    pub fn diamond_with(&self, f: &mut Formulas, phi: EvRef) -> EvRef {
        let mut acc = phi;
        for l in self.letters.iter().rev() {
            acc = match *l {
                SdLetter::Test(a) => {
                    let x = a.to_formula(f);
                    f.and([x, acc])
                }
                SdLetter::PrevOn(i, a) => {
                    let x = a.to_formula(f);
                    let p = f.prevon(i, x);
                    f.diamond(p, acc)
                }
            };
        }
        acc
    }

    pub fn show(&self, alphabet: &DistributedAlphabet) -> String {
        if self.letters.is_empty() {
            return "?{T}".into();
        }
        self.letters
            .iter()
            .map(|l| match *l {
                SdLetter::Test(a) => format!("?{{{}}}", a.show(alphabet)),
                SdLetter::PrevOn(i, a) => {
                    format!("<=_{}{{{}}}", alphabet.process_name(i), a.show(alphabet))
                }
            })
            .collect::<Vec<_>>()
            .join(" . ")
    }

    /// Parses `?{φ}`, `<=_i{φ}` and `<-_i` items separated by `.`; each `φ`
    /// must be a boolean combination of letters, `on_i`, `T`, `F`.
    pub fn parse(alphabet: &std::sync::Arc<DistributedAlphabet>, text: &str) -> Result<SdPath> {
        let mut store = Formulas::new(alphabet.clone());
        let mut letters = Vec::new();
        let atom = |store: &mut Formulas, body: &str| -> Result<Atomic> {
            let e = parse_event_formula(store, body)?;
            store
                .atom_mask(e)
                .map(Atomic)
                .ok_or_else(|| Error::Input(format!("`{body}` is not atomic")))
        };
        for item in split_top_level(text) {
            let item = item.trim();
            if let Some(rest) = item.strip_prefix("?") {
                let body = rest.trim();
                let body = body
                    .strip_prefix('{')
                    .and_then(|b| b.strip_suffix('}'))
                    .unwrap_or(body);
                letters.push(SdLetter::Test(atom(&mut store, body)?));
            } else if let Some(rest) = item.strip_prefix("<=_") {
                let (name, body) = rest
                    .split_once('{')
                    .ok_or_else(|| Error::Input(format!("expected `{{` in `{item}`")))?;
                let body = body
                    .strip_suffix('}')
                    .ok_or_else(|| Error::Input(format!("expected `}}` in `{item}`")))?;
                let i = alphabet
                    .process_id(name.trim())
                    .ok_or_else(|| Error::UnknownProcess(name.trim().to_string()))?;
                letters.push(SdLetter::PrevOn(i, atom(&mut store, body)?));
            } else if let Some(name) = item.strip_prefix("<-_") {
                let i = alphabet
                    .process_id(name.trim())
                    .ok_or_else(|| Error::UnknownProcess(name.trim().to_string()))?;
                letters.push(SdLetter::PrevOn(i, Atomic::on(alphabet, i)));
            } else {
                return Err(Error::Input(format!("bad sd-path item `{item}`")));
            }
        }
        Ok(SdPath { letters })
    }
}

fn split_top_level(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (n, c) in text.char_indices() {
        match c {
            '{' | '(' => depth += 1,
            '}' | ')' => depth -= 1,
            '.' if depth == 0 => {
                out.push(&text[start..n]);
                start = n + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out.into_iter().filter(|s| !s.trim().is_empty()).collect()
}

/// `{⊤} ∪ {on_i}`, without duplicates.
pub fn default_basis(alphabet: &DistributedAlphabet) -> Vec<Atomic> {
    let mut b = vec![Atomic::top(alphabet)];
    for i in alphabet.processes() {
        let a = Atomic::on(alphabet, i);
        if !b.contains(&a) {
            b.push(a);
        }
    }
    b
}

/// Number of standardized paths of length `len` over a basis of size `b`
/// with `k` processes: `b^(len+1) · (k·b)^len`, or `None` on overflow.
pub fn count_sdpaths(b: usize, k: usize, len: usize) -> Option<u128> {
    let b = b as u128;
    let k = k as u128;
    let mut n = b;
    for _ in 0..len {
        n = n.checked_mul(b)?.checked_mul(k.checked_mul(b)?)?;
    }
    Some(n)
}

/// All standardized sd-paths with tests and guards from `basis` and length
/// in `min_len..=max_len`, shortest first, then in lexicographic order of
/// the choices. Fails when the total count exceeds `budget`.
pub fn enumerate_sdpaths(
    alphabet: &DistributedAlphabet,
    basis: &[Atomic],
    min_len: usize,
    max_len: usize,
    budget: u128,
) -> Result<Vec<SdPath>> {
    if basis.is_empty() {
        return Err(Error::Input("empty atomic basis".into()));
    }
    let mut b: Vec<Atomic> = Vec::new();
    for &a in basis {
        let a = Atomic(a.0 & alphabet.all_letters_mask());
        if !b.contains(&a) {
            b.push(a);
        }
    }
    if min_len > max_len {
        return Ok(Vec::new());
    }
    let k = alphabet.num_processes();
    let mut total: u128 = 0;
    for len in min_len..=max_len {
        let c = count_sdpaths(b.len(), k, len).ok_or_else(|| {
            Error::Resource(format!("sd-path count overflows at length {len}"))
        })?;
        total = total.saturating_add(c);
    }
    if total > budget {
        return Err(Error::Resource(format!(
            "{total} sd-paths of length {min_len}..={max_len} exceed the budget of {budget}"
        )));
    }
    let mut out = Vec::with_capacity(total as usize);
    for len in min_len..=max_len {
        let mut cur: Vec<Vec<SdLetter>> = b.iter().map(|&a| vec![SdLetter::Test(a)]).collect();
        for _ in 0..len {
            let mut next = Vec::with_capacity(cur.len() * k * b.len() * b.len());
            for w in &cur {
                for i in 0..k {
                    for &g in &b {
                        for &t in &b {
                            let mut v = w.clone();
                            v.push(SdLetter::PrevOn(i, g));
                            v.push(SdLetter::Test(t));
                            next.push(v);
                        }
                    }
                }
            }
            cur = next;
        }
        out.extend(cur.into_iter().map(SdPath::new));
    }
    Ok(out)
}

/// The address of `Y_i(e)` built by following processes back from `e`:
/// returns `π` with `1 ≤ ‖π‖ < |𝒫|`, guards `on_j` only, and
/// `(π·on_i?)(e) = Y_i(e)`.
pub fn y_path(t: &Trace, i: ProcId, e: EventId) -> Result<SdPath> {
    t.check(e)?;
    let alphabet = t.alphabet();
    let f = t
        .yesterday(i, e)
        .ok_or_else(|| Error::Precondition(format!("Y_{}(e{}) does not exist", alphabet.process_name(i), e + 1)))?;
    let loc_e = alphabet.loc_mask(t.label(e));
    let mut events = vec![f];
    let mut procs = vec![i];
    loop {
        let en = *events.last().expect("nonempty");
        if alphabet.loc_mask(t.label(en)) & loc_e != 0 {
            break;
        }
        let p = alphabet
            .loc(t.label(en))
            .iter()
            .copied()
            .find(|&p| {
                let r = t.clock(en, p);
                t.chain(p).get(r).is_some_and(|&g| t.leq(g, e))
            })
            .expect("some successor of e_n lies below e");
        events.push(t.yesterday(p, e).expect("Y_p(e) exists above e_n"));
        procs.push(p);
    }
    let em = *events.last().expect("nonempty");
    let l = (0..alphabet.num_processes())
        .find(|&l| (alphabet.loc_mask(t.label(em)) & loc_e) >> l & 1 == 1)
        .expect("loc(e_m) meets loc(e)");
    let m = procs.len();
    let mut letters = vec![SdLetter::PrevOn(l, Atomic::on(alphabet, procs[m - 1]))];
    for j in (1..m).rev() {
        letters.push(SdLetter::PrevOn(procs[j], Atomic::on(alphabet, procs[j - 1])));
    }
    Ok(SdPath::new(letters))
}
