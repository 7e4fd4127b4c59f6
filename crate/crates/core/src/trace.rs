//! Distributed alphabets and Mazurkiewicz traces.
//!
//! A trace is stored as the word it was built from together with per-process
//! chains and vector clocks: `clock(e, i)` is the number of `i`-events in the
//! causal past of `e` (including `e` itself).

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a process in its alphabet.
pub type ProcId = usize;
/// Index of a letter in its alphabet.
pub type LetterId = usize;
/// Index of an event in its trace (position in the construction word).
pub type EventId = usize;

/// Processes and letters are packed into 64-bit masks.
pub const MAX_PROCESSES: usize = 64;
pub const MAX_LETTERS: usize = 64;

/// A family `{Σ_i}` of per-process alphabets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlphabetRepr", into = "AlphabetRepr")]
pub struct DistributedAlphabet {
    processes: Vec<String>,
    letters: Vec<String>,
    letters_of: Vec<Vec<LetterId>>,
    loc: Vec<Vec<ProcId>>,
    proc_letters: Vec<u64>,
    loc_mask: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct AlphabetRepr {
    processes: Vec<(String, Vec<String>)>,
}

impl TryFrom<AlphabetRepr> for DistributedAlphabet {
    type Error = Error;
    fn try_from(r: AlphabetRepr) -> Result<Self> {
        DistributedAlphabet::new(r.processes)
    }
}

impl From<DistributedAlphabet> for AlphabetRepr {
    fn from(a: DistributedAlphabet) -> Self {
        AlphabetRepr {
            processes: a
                .processes
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    (
                        p.clone(),
                        a.letters_of[i].iter().map(|&l| a.letters[l].clone()).collect(),
                    )
                })
                .collect(),
        }
    }
}

impl DistributedAlphabet {
    /// Builds an alphabet from `(process, letters)` pairs. Letter ids follow
    /// the order of first appearance.
    pub fn new<P, L>(spec: impl IntoIterator<Item = (P, Vec<L>)>) -> Result<Self>
    where
        P: Into<String>,
        L: Into<String>,
    {
        let mut processes = Vec::new();
        let mut letters: Vec<String> = Vec::new();
        let mut index: HashMap<String, LetterId> = HashMap::new();
        let mut letters_of = Vec::new();
        for (p, ls) in spec {
            let p = p.into();
            if processes.contains(&p) {
                return Err(Error::Input(format!("duplicate process `{p}`")));
            }
            if ls.is_empty() {
                return Err(Error::Input(format!("process `{p}` has no letters")));
            }
            let mut mine = Vec::new();
            for l in ls {
                let l = l.into();
                let id = *index.entry(l.clone()).or_insert_with(|| {
                    letters.push(l.clone());
                    letters.len() - 1
                });
                if !mine.contains(&id) {
                    mine.push(id);
                }
            }
            mine.sort_unstable();
            processes.push(p);
            letters_of.push(mine);
        }
        if processes.is_empty() {
            return Err(Error::Input("alphabet has no processes".into()));
        }
        if processes.len() > MAX_PROCESSES || letters.len() > MAX_LETTERS {
            return Err(Error::Resource(format!(
                "at most {MAX_PROCESSES} processes and {MAX_LETTERS} letters are supported"
            )));
        }
        let mut loc = vec![Vec::new(); letters.len()];
        let mut proc_letters = vec![0u64; processes.len()];
        let mut loc_mask = vec![0u64; letters.len()];
        for (i, ls) in letters_of.iter().enumerate() {
            for &a in ls {
                loc[a].push(i);
                proc_letters[i] |= 1 << a;
                loc_mask[a] |= 1 << i;
            }
        }
        Ok(DistributedAlphabet {
            processes,
            letters,
            letters_of,
            loc,
            proc_letters,
            loc_mask,
        })
    }

    /// Parses the text format: one `process: letter letter ...` line per
    /// process, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (p, rest) = line.split_once(':').ok_or_else(|| Error::Parse {
                line: n + 1,
                column: 1,
                message: "expected `process: letters`".into(),
            })?;
            let p = p.trim();
            if p.is_empty() || !p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Parse {
                    line: n + 1,
                    column: 1,
                    message: format!("bad process name `{p}`"),
                });
            }
            let ls: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            for l in &ls {
                if !l.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'') {
                    return Err(Error::Parse {
                        line: n + 1,
                        column: 1,
                        message: format!("bad letter name `{l}`"),
                    });
                }
            }
            spec.push((p.to_string(), ls));
        }
        Self::new(spec)
    }

    pub fn num_processes(&self) -> usize {
        self.processes.len()
    }

    pub fn num_letters(&self) -> usize {
        self.letters.len()
    }

    pub fn processes(&self) -> impl Iterator<Item = ProcId> {
        0..self.processes.len()
    }

    pub fn letters(&self) -> impl Iterator<Item = LetterId> {
        0..self.letters.len()
    }

    pub fn process_name(&self, i: ProcId) -> &str {
        &self.processes[i]
    }

    pub fn letter_name(&self, a: LetterId) -> &str {
        &self.letters[a]
    }

    /// `Σ_i`, sorted by letter id.
    pub fn letters_of(&self, i: ProcId) -> &[LetterId] {
        &self.letters_of[i]
    }

    /// `Σ_i` as a letter mask.
    pub fn letters_mask(&self, i: ProcId) -> u64 {
        self.proc_letters[i]
    }

    /// Mask of the whole alphabet.
    pub fn all_letters_mask(&self) -> u64 {
        if self.letters.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.letters.len()) - 1
        }
    }

    /// `loc(a)`, sorted.
    pub fn loc(&self, a: LetterId) -> &[ProcId] {
        &self.loc[a]
    }

    pub fn loc_mask(&self, a: LetterId) -> u64 {
        self.loc_mask[a]
    }

    pub fn dependent(&self, a: LetterId, b: LetterId) -> bool {
        self.loc_mask[a] & self.loc_mask[b] != 0
    }

    pub fn letter_id(&self, name: &str) -> Option<LetterId> {
        self.letters.iter().position(|l| l == name)
    }

    /// Looks a process up by exact name, then as `P<name>`.
    pub fn process_id(&self, name: &str) -> Option<ProcId> {
        self.processes
            .iter()
            .position(|p| p == name)
            .or_else(|| self.processes.iter().position(|p| *p == format!("P{name}")))
    }

    /// Parses a whitespace-separated word.
    pub fn parse_word(&self, text: &str) -> Result<Vec<LetterId>> {
        text.split_whitespace()
            .enumerate()
            .map(|(pos, w)| {
                self.letter_id(w).ok_or_else(|| Error::UnknownLetter {
                    letter: w.to_string(),
                    position: pos,
                })
            })
            .collect()
    }

    pub fn format_word(&self, word: &[LetterId]) -> String {
        word.iter()
            .map(|&a| self.letters[a].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The alphabet in the text format accepted by [`DistributedAlphabet::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, p) in self.processes.iter().enumerate() {
            s.push_str(p);
            s.push(':');
            for &a in &self.letters_of[i] {
                s.push(' ');
                s.push_str(&self.letters[a]);
            }
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for DistributedAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A finite Mazurkiewicz trace.
#[derive(Clone, Debug)]
pub struct Trace {
    alphabet: Arc<DistributedAlphabet>,
    labels: Vec<LetterId>,
    chains: Vec<Vec<EventId>>,
    clocks: Vec<Vec<u32>>,
}

/// View of a single event: its label and its rank on each process of its
/// location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub id: EventId,
    pub label: LetterId,
    pub ranks: Vec<(ProcId, usize)>,
}

impl PartialEq for Trace {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet && self.canonical_word() == other.canonical_word()
    }
}

impl Eq for Trace {}

impl Trace {
    pub fn empty(alphabet: Arc<DistributedAlphabet>) -> Self {
        let k = alphabet.num_processes();
        Trace {
            alphabet,
            labels: Vec::new(),
            chains: vec![Vec::new(); k],
            clocks: Vec::new(),
        }
    }

    /// The trace of a word: events are word positions, ordered by the
    /// reflexive-transitive closure of "earlier and dependent".
    pub fn from_word(alphabet: Arc<DistributedAlphabet>, word: &[LetterId]) -> Result<Self> {
        for (pos, &a) in word.iter().enumerate() {
            if a >= alphabet.num_letters() {
                return Err(Error::UnknownLetter {
                    letter: format!("#{a}"),
                    position: pos,
                });
            }
        }
        let mut t = Trace::empty(alphabet);
        for &a in word {
            t.push(a);
        }
        Ok(t)
    }

    /// Parses a whitespace-separated word over `alphabet`.
    pub fn parse(alphabet: Arc<DistributedAlphabet>, text: &str) -> Result<Self> {
        let word = alphabet.parse_word(text)?;
        Self::from_word(alphabet, &word)
    }

    /// Appends an event labelled `a` on top of the current trace.
    pub fn push(&mut self, a: LetterId) -> EventId {
        let k = self.alphabet.num_processes();
        let mut clock = vec![0u32; k];
        for &i in self.alphabet.loc(a) {
            if let Some(&g) = self.chains[i].last() {
                for (c, &d) in clock.iter_mut().zip(&self.clocks[g]) {
                    *c = (*c).max(d);
                }
            }
        }
        let id = self.labels.len();
        for &i in self.alphabet.loc(a) {
            clock[i] += 1;
            self.chains[i].push(id);
        }
        self.labels.push(a);
        self.clocks.push(clock);
        id
    }

    pub fn alphabet(&self) -> &DistributedAlphabet {
        &self.alphabet
    }

    pub fn alphabet_arc(&self) -> &Arc<DistributedAlphabet> {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The construction word.
    pub fn word(&self) -> &[LetterId] {
        &self.labels
    }

    pub fn label(&self, e: EventId) -> LetterId {
        self.labels[e]
    }

    pub fn events(&self) -> std::ops::Range<EventId> {
        0..self.labels.len()
    }

    pub fn event(&self, e: EventId) -> Result<Event> {
        self.check(e)?;
        let label = self.labels[e];
        Ok(Event {
            id: e,
            label,
            ranks: self
                .alphabet
                .loc(label)
                .iter()
                .map(|&i| (i, self.clocks[e][i] as usize))
                .collect(),
        })
    }

    pub fn check(&self, e: EventId) -> Result<()> {
        if e < self.labels.len() {
            Ok(())
        } else {
            Err(Error::ForeignEvent(e))
        }
    }

    /// The `i`-events in causal order.
    pub fn chain(&self, i: ProcId) -> &[EventId] {
        &self.chains[i]
    }

    /// `|E_i ∩ ↓e|`.
    pub fn clock(&self, e: EventId, i: ProcId) -> usize {
        self.clocks[e][i] as usize
    }

    pub fn is_on(&self, e: EventId, i: ProcId) -> bool {
        self.alphabet.loc_mask(self.labels[e]) >> i & 1 == 1
    }

    /// `e ≤ f`.
    pub fn leq(&self, e: EventId, f: EventId) -> bool {
        e == f
            || self
                .alphabet
                .loc(self.labels[e])
                .iter()
                .any(|&i| self.clocks[e][i] <= self.clocks[f][i])
    }

    pub fn checked_leq(&self, e: EventId, f: EventId) -> Result<bool> {
        self.check(e)?;
        self.check(f)?;
        Ok(self.leq(e, f))
    }

    pub fn lt(&self, e: EventId, f: EventId) -> bool {
        e != f && self.leq(e, f)
    }

    pub fn concurrent(&self, e: EventId, f: EventId) -> bool {
        !self.leq(e, f) && !self.leq(f, e)
    }

    /// `Y_i(e)`: the maximum `i`-event strictly below `e`.
    pub fn yesterday(&self, i: ProcId, e: EventId) -> Option<EventId> {
        let c = self.clocks[e][i] as usize - usize::from(self.is_on(e, i));
        c.checked_sub(1).map(|c| self.chains[i][c])
    }

    /// `Y_{i,j}(e) = Y_j(Y_i(e))`.
    pub fn yesterday2(&self, i: ProcId, j: ProcId, e: EventId) -> Option<EventId> {
        self.yesterday(i, e).and_then(|f| self.yesterday(j, f))
    }

    /// The immediate predecessor of `e` on process `i`, provided `e` is an
    /// `i`-event.
    pub fn prev_on(&self, i: ProcId, e: EventId) -> Option<EventId> {
        if !self.is_on(e, i) {
            return None;
        }
        let r = self.clocks[e][i] as usize;
        r.checked_sub(2).map(|r| self.chains[i][r])
    }

    /// `L_i(t)`.
    pub fn last(&self, i: ProcId) -> Option<EventId> {
        self.chains[i].last().copied()
    }

    /// `L_{i,j}(t)`: the maximum `j`-event below `L_i(t)`, inclusive.
    pub fn last2(&self, i: ProcId, j: ProcId) -> Option<EventId> {
        let l = self.last(i)?;
        let c = self.clocks[l][j] as usize;
        c.checked_sub(1).map(|c| self.chains[j][c])
    }

    /// `e` is maximal iff it is the last event of every process it touches.
    pub fn is_maximal(&self, e: EventId) -> bool {
        self.alphabet
            .loc(self.labels[e])
            .iter()
            .all(|&i| self.chains[i].last() == Some(&e))
    }

    /// The lexicographically least linear extension.
    pub fn canonical_word(&self) -> Vec<LetterId> {
        let k = self.alphabet.num_processes();
        let mut next = vec![0usize; k];
        let mut out = Vec::with_capacity(self.len());
        for _ in 0..self.len() {
            let mut best: Option<EventId> = None;
            for i in 0..k {
                let Some(&e) = self.chains[i].get(next[i]) else {
                    continue;
                };
                let minimal = self
                    .alphabet
                    .loc(self.labels[e])
                    .iter()
                    .all(|&j| self.chains[j].get(next[j]) == Some(&e));
                if minimal && best.map_or(true, |b| self.labels[e] < self.labels[b]) {
                    best = Some(e);
                }
            }
            let e = best.expect("a finite poset has a minimal element");
            for &j in self.alphabet.loc(self.labels[e]) {
                next[j] += 1;
            }
            out.push(self.labels[e]);
        }
        out
    }

    /// Re-indexes the events along the canonical word.
    pub fn canonicalize(&self) -> Trace {
        Trace::from_word(self.alphabet.clone(), &self.canonical_word()).expect("same alphabet")
    }

    /// The sub-trace `↓e`, returned with the position of `e` in it.
    pub fn down_closure(&self, e: EventId) -> (Trace, EventId) {
        let word: Vec<_> = (0..=e)
            .filter(|&f| self.leq(f, e))
            .map(|f| self.labels[f])
            .collect();
        let n = word.len();
        (
            Trace::from_word(self.alphabet.clone(), &word).expect("same alphabet"),
            n - 1,
        )
    }

    /// The sub-trace `⇓e = ↓e \ {e}`.
    pub fn strict_down_closure(&self, e: EventId) -> Trace {
        let word: Vec<_> = (0..e)
            .filter(|&f| self.leq(f, e))
            .map(|f| self.labels[f])
            .collect();
        Trace::from_word(self.alphabet.clone(), &word).expect("same alphabet")
    }

    pub fn display_word(&self) -> String {
        self.alphabet.format_word(&self.labels)
    }
}

/// `w·a` stays in lexicographic normal form iff the longest suffix of `w`
/// made of letters independent of `a` contains no letter greater than `a`.
pub fn extends_canonically(alphabet: &DistributedAlphabet, word: &[LetterId], a: LetterId) -> bool {
    for &b in word.iter().rev() {
        if alphabet.dependent(a, b) {
            return true;
        }
        if b > a {
            return false;
        }
    }
    true
}

/// Canonical words of all traces with at most `max_events` events, by
/// length and then lexicographically. One word per isomorphism class.
pub fn canonical_words(alphabet: &DistributedAlphabet, max_events: usize) -> CanonicalWords<'_> {
    CanonicalWords {
        alphabet,
        max_events,
        level: vec![Vec::new()],
        pos: 0,
    }
}

pub struct CanonicalWords<'a> {
    alphabet: &'a DistributedAlphabet,
    max_events: usize,
    level: Vec<Vec<LetterId>>,
    pos: usize,
}

impl Iterator for CanonicalWords<'_> {
    type Item = Vec<LetterId>;

    fn next(&mut self) -> Option<Vec<LetterId>> {
        if self.pos == self.level.len() {
            let len = self.level.first()?.len();
            if len >= self.max_events {
                self.level.clear();
                return None;
            }
            let mut next = Vec::new();
            for w in &self.level {
                for a in self.alphabet.letters() {
                    if extends_canonically(self.alphabet, w, a) {
                        let mut v = w.clone();
                        v.push(a);
                        next.push(v);
                    }
                }
            }
            self.level = next;
            self.pos = 0;
            if self.level.is_empty() {
                return None;
            }
        }
        self.pos += 1;
        Some(self.level[self.pos - 1].clone())
    }
}

/// One trace per isomorphism class with at most `max_events` events, in
/// canonical-word order (shorter first).
pub fn enumerate_traces(
    alphabet: &Arc<DistributedAlphabet>,
    max_events: usize,
) -> impl Iterator<Item = Trace> + '_ {
    canonical_words(alphabet, max_events)
        .map(move |w| Trace::from_word(alphabet.clone(), &w).expect("letters come from the alphabet"))
}

/// The example alphabet with four processes used throughout the docs:
/// `a_i` local to process `i`, `b` on 3 and 4, `c` on 1 and 2, `d` on 2 and
/// 3, `e` on 1 and 4.
pub fn fig1_alphabet() -> Arc<DistributedAlphabet> {
    Arc::new(
        DistributedAlphabet::new([
            ("1", vec!["a1", "c", "e"]),
            ("2", vec!["a2", "c", "d"]),
            ("3", vec!["a3", "b", "d"]),
            ("4", vec!["a4", "b", "e"]),
        ])
        .expect("valid alphabet"),
    )
}

/// The example trace over [`fig1_alphabet`], events `e1..e11` at indices
/// `0..11`.
pub fn fig1_trace() -> Trace {
    Trace::parse(fig1_alphabet(), "a1 a1 b c d a3 e a2 b c a4").expect("valid word")
}
