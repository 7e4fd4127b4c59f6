use std::collections::HashMap;
use std::fmt::Write;

use super::{AnyFormula, EvRef, EventFormula, Formulas, PathFormula, PathRef, TraceFormula, TraceRef};

type Names = HashMap<EvRef, String>;

impl Formulas {
    /// Renders a formula as a formula-file fragment in which every shared
    /// compound event subformula is written once as a `$name := …` line
    /// and referred to by `$name` afterwards. The last line is the formula.
    pub fn show_shared(&self, f: AnyFormula) -> String {
        let mut parents: HashMap<EvRef, usize> = HashMap::new();
        let mut order = Vec::new();
        let mut seen_paths = std::collections::HashSet::new();
        let mut stack: Vec<(AnyNode, bool)> = match f {
            AnyFormula::Event(e) => vec![(AnyNode::Event(e), false)],
            AnyFormula::Trace(t) => vec![(AnyNode::Trace(t), false)],
        };
        // iterative postorder over the DAG
        while let Some((node, done)) = stack.pop() {
            if done {
                if let AnyNode::Event(e) = node {
                    order.push(e);
                }
                continue;
            }
            let children: Vec<AnyNode> = match node {
                AnyNode::Event(e) => {
                    let c = parents.entry(e).or_insert(0);
                    *c += 1;
                    if *c > 1 {
                        continue;
                    }
                    match self.event(e) {
                        EventFormula::Not(x) => vec![AnyNode::Event(*x)],
                        EventFormula::Or(xs) | EventFormula::And(xs) => xs.iter().map(|&x| AnyNode::Event(x)).collect(),
                        EventFormula::Diamond(p, x) => vec![AnyNode::Path(*p), AnyNode::Event(*x)],
                        EventFormula::DiamondExists(p) => vec![AnyNode::Path(*p)],
                        _ => vec![],
                    }
                }
                AnyNode::Path(p) => {
                    if !seen_paths.insert(p) {
                        continue;
                    }
                    match self.path(p) {
                        PathFormula::Move(_) => vec![],
                        PathFormula::Test(x) => vec![AnyNode::Event(*x)],
                        PathFormula::Star(q) => vec![AnyNode::Path(*q)],
                        PathFormula::Sum(ps) | PathFormula::Concat(ps) => ps.iter().map(|&q| AnyNode::Path(q)).collect(),
                    }
                }
                AnyNode::Trace(t) => match self.trace(t) {
                    TraceFormula::EMi(_, e) | TraceFormula::EM(e) => vec![AnyNode::Event(*e)],
                    TraceFormula::Not(x) => vec![AnyNode::Trace(*x)],
                    TraceFormula::Or(xs) | TraceFormula::And(xs) => xs.iter().map(|&x| AnyNode::Trace(x)).collect(),
                    _ => vec![],
                },
            };
            stack.push((node, true));
            stack.extend(children.into_iter().rev().map(|c| (c, false)));
        }
        let compound = |e: EvRef| {
            matches!(
                self.event(e),
                EventFormula::Not(_) | EventFormula::Or(_) | EventFormula::And(_) | EventFormula::Diamond(..) | EventFormula::DiamondExists(_)
            )
        };
        let mut names = Names::new();
        let mut out = String::new();
        for e in order {
            if parents[&e] > 1 && compound(e) && !names.contains_key(&e) {
                let name = format!("$s{}", names.len() + 1);
                let _ = write!(out, "{name} := ");
                self.write_event(&names, &mut out, e, 0);
                out.push('\n');
                names.insert(e, name);
            }
        }
        match f {
            AnyFormula::Event(e) => self.write_event(&names, &mut out, e, 0),
            AnyFormula::Trace(t) => self.write_trace(&names, &mut out, t, 0),
        }
        out
    }

    /// Renders an event formula in the parser's grammar.
    pub fn show_event(&self, e: EvRef) -> String {
        let mut s = String::new();
        self.write_event(&Names::new(), &mut s, e, 0);
        s
    }

    pub fn show_path(&self, p: PathRef) -> String {
        let mut s = String::new();
        self.write_path(&Names::new(), &mut s, p, 0);
        s
    }

    pub fn show_trace(&self, t: TraceRef) -> String {
        let mut s = String::new();
        self.write_trace(&Names::new(), &mut s, t, 0);
        s
    }

    pub fn show(&self, f: AnyFormula) -> String {
        match f {
            AnyFormula::Event(e) => self.show_event(e),
            AnyFormula::Trace(t) => self.show_trace(t),
        }
    }

    fn proc_name(&self, i: usize) -> &str {
        self.alphabet().process_name(i)
    }

    // precedence: 0 top, 1 inside `|`, 2 inside `&`, 3 unary operand
    fn write_event(&self, nm: &Names, s: &mut String, e: EvRef, prec: u8) {
        if let Some(name) = nm.get(&e) {
            s.push_str(name);
            return;
        }
        match self.event(e) {
            EventFormula::True => s.push('T'),
            EventFormula::False => s.push('F'),
            EventFormula::Letter(a) => s.push_str(self.alphabet().letter_name(*a)),
            EventFormula::Yleq(i, j) => {
                let _ = write!(s, "Yleq {} {}", self.proc_name(*i), self.proc_name(*j));
            }
            EventFormula::Yleq2(i, j, k) => {
                let _ = write!(
                    s,
                    "Yleq2 {} {} {}",
                    self.proc_name(*i),
                    self.proc_name(*j),
                    self.proc_name(*k)
                );
            }
            EventFormula::Not(x) => {
                s.push('!');
                self.write_event(nm, s, *x, 3);
            }
            EventFormula::Diamond(p, x) => {
                s.push_str("< ");
                self.write_path(nm, s, *p, 0);
                s.push_str(" > ");
                self.write_event(nm, s, *x, 3);
            }
            EventFormula::DiamondExists(p) => {
                s.push_str("< ");
                self.write_path(nm, s, *p, 0);
                s.push_str(" >");
            }
            EventFormula::Or(xs) | EventFormula::And(xs) => {
                let is_or = matches!(self.event(e), EventFormula::Or(_));
                let (mine, child, sep) = if is_or { (1, 1, " | ") } else { (2, 2, " & ") };
                let paren = prec >= mine;
                if paren {
                    s.push('(');
                }
                for (n, &x) in xs.iter().enumerate() {
                    if n > 0 {
                        s.push_str(sep);
                    }
                    self.write_event(nm, s, x, child);
                }
                if paren {
                    s.push(')');
                }
            }
        }
    }

    // precedence: 0 top, 1 inside `|`, 2 inside `.`, 3 under `*`
    fn write_path(&self, nm: &Names, s: &mut String, p: PathRef, prec: u8) {
        match self.path(p) {
            PathFormula::Move(i) => {
                let _ = write!(s, "<-_{}", self.proc_name(*i));
            }
            PathFormula::Test(x) => {
                s.push('?');
                self.write_event(nm, s, *x, 3);
            }
            PathFormula::Star(q) => {
                self.write_path(nm, s, *q, 3);
                s.push('*');
            }
            PathFormula::Sum(ps) | PathFormula::Concat(ps) => {
                let is_sum = matches!(self.path(p), PathFormula::Sum(_));
                let (mine, child, sep) = if is_sum { (1, 1, " | ") } else { (2, 2, " . ") };
                let paren = prec >= mine;
                if paren {
                    s.push('(');
                }
                for (n, &q) in ps.iter().enumerate() {
                    if n > 0 {
                        s.push_str(sep);
                    }
                    self.write_path(nm, s, q, child);
                }
                if paren {
                    s.push(')');
                }
            }
        }
    }

    fn write_trace(&self, nm: &Names, s: &mut String, t: TraceRef, prec: u8) {
        match self.trace(t) {
            TraceFormula::True => s.push('T'),
            TraceFormula::False => s.push('F'),
            TraceFormula::EMi(i, e) => {
                let _ = write!(s, "EM_{} ", self.proc_name(*i));
                self.write_event(nm, s, *e, 3);
            }
            TraceFormula::EM(e) => {
                s.push_str("EM ");
                self.write_event(nm, s, *e, 3);
            }
            TraceFormula::Lleq(i, j) => {
                let _ = write!(s, "Lleq {} {}", self.proc_name(*i), self.proc_name(*j));
            }
            TraceFormula::Lleq2(i, j, k) => {
                let _ = write!(
                    s,
                    "Lleq2 {} {} {}",
                    self.proc_name(*i),
                    self.proc_name(*j),
                    self.proc_name(*k)
                );
            }
            TraceFormula::Not(x) => {
                s.push('!');
                self.write_trace(nm, s, *x, 3);
            }
            TraceFormula::Or(xs) | TraceFormula::And(xs) => {
                let is_or = matches!(self.trace(t), TraceFormula::Or(_));
                let (mine, child, sep) = if is_or { (1, 1, " | ") } else { (2, 2, " & ") };
                let paren = prec >= mine;
                if paren {
                    s.push('(');
                }
                for (n, &x) in xs.iter().enumerate() {
                    if n > 0 {
                        s.push_str(sep);
                    }
                    self.write_trace(nm, s, x, child);
                }
                if paren {
                    s.push(')');
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum AnyNode {
    Event(EvRef),
    Path(PathRef),
    Trace(TraceRef),
}
