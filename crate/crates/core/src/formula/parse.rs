//! Recursive-descent parser for the ASCII formula grammar.
//!
//! ```text
//! trace  ::= tand ('|' tand)*
//! tand   ::= tun ('&' tun)*
//! tun    ::= '!' tun | 'EM_'p eun | 'EM' eun | 'Lleq' p p | 'Lleq2' p p p
//!          | 'T' | 'F' | '(' trace ')'
//! event  ::= eand ('|' eand)*
//! eand   ::= eun ('&' eun)*
//! eun    ::= '!' eun | '<' path '>' [eun] | letter | 'on_'p | 'T' | 'F'
//!          | 'Yleq' p p | 'Yleq2' p p p | '(' event ')'
//! path   ::= pcat ('|' pcat)*
//! pcat   ::= ppost ('.' ppost)*
//! ppost  ::= patom '*'*
//! patom  ::= '<-_'p | '<=_'p '{' event '}' | '?' '{' event '}' | '?' eun
//!          | '(' path ')'
//! ```

use super::{AnyFormula, EvRef, EventFormula, Formulas, PathFormula, PathRef, TraceFormula, TraceRef};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::trace::ProcId;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Move(String),
    Prevon(String),
    LAngle,
    RAngle,
    Question,
    Dot,
    Bar,
    Amp,
    Bang,
    Star,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Ref(String),
    End,
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> Result<Vec<Lexed>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut adv = 1;
        let tok = match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => None,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '<' if i + 2 < chars.len() && (chars[i + 1] == '-' || chars[i + 1] == '=') && chars[i + 2] == '_' => {
                let mut j = i + 3;
                while j < chars.len() && is_name_char(chars[j]) {
                    j += 1;
                }
                if j == i + 3 {
                    return Err(Error::Parse {
                        line,
                        column: col,
                        message: "expected a process name after `_`".into(),
                    });
                }
                let name: String = chars[i + 3..j].iter().collect();
                adv = j - i;
                Some(if chars[i + 1] == '-' {
                    Tok::Move(name)
                } else {
                    Tok::Prevon(name)
                })
            }
            '$' => {
                let mut j = i + 1;
                while j < chars.len() && is_name_char(chars[j]) {
                    j += 1;
                }
                adv = j - i;
                Some(Tok::Ref(chars[i + 1..j].iter().collect()))
            }
            '<' => Some(Tok::LAngle),
            '>' => Some(Tok::RAngle),
            '?' => Some(Tok::Question),
            '.' => Some(Tok::Dot),
            '|' => Some(Tok::Bar),
            '&' => Some(Tok::Amp),
            '!' | '~' => Some(Tok::Bang),
            '*' => Some(Tok::Star),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            c if is_name_char(c) => {
                let mut j = i;
                while j < chars.len() && is_name_char(chars[j]) {
                    j += 1;
                }
                adv = j - i;
                Some(Tok::Ident(chars[i..j].iter().collect()))
            }
            other => {
                return Err(Error::Parse {
                    line,
                    column: col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        if let Some(tok) = tok {
            out.push(Lexed { tok, line: l0, col: c0 });
        }
        i += adv;
        col += adv;
    }
    out.push(Lexed {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

struct Parser<'a> {
    f: &'a mut Formulas,
    toks: Vec<Lexed>,
    pos: usize,
    defs: Option<&'a HashMap<String, EvRef>>,
}

impl<'a> Parser<'a> {
    fn new(f: &'a mut Formulas, text: &str) -> Result<Self> {
        Ok(Parser {
            f,
            toks: lex(text)?,
            pos: 0,
            defs: None,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        let l = &self.toks[self.pos];
        Err(Error::Parse {
            line: l.line,
            column: l.col,
            message: message.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {:?}", self.peek()))
        }
    }

    fn finish(&mut self) -> Result<()> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            self.err(format!("unexpected trailing {:?}", self.peek()))
        }
    }

    fn process_name(&self, name: &str) -> Result<ProcId> {
        self.f
            .alphabet()
            .process_id(name)
            .ok_or_else(|| Error::UnknownProcess(name.to_string()))
    }

    fn process(&mut self) -> Result<ProcId> {
        match self.bump() {
            Tok::Ident(name) => self.process_name(&name),
            _ => {
                self.pos -= 1;
                self.err("expected a process name")
            }
        }
    }

    // ---- trace formulas ----

    fn trace(&mut self) -> Result<TraceRef> {
        let mut xs = vec![self.tand()?];
        while *self.peek() == Tok::Bar {
            self.bump();
            xs.push(self.tand()?);
        }
        Ok(if xs.len() == 1 {
            xs[0]
        } else {
            self.f.raw_trace(TraceFormula::Or(xs))
        })
    }

    fn tand(&mut self) -> Result<TraceRef> {
        let mut xs = vec![self.tun()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            xs.push(self.tun()?);
        }
        Ok(if xs.len() == 1 {
            xs[0]
        } else {
            self.f.raw_trace(TraceFormula::And(xs))
        })
    }

    fn tun(&mut self) -> Result<TraceRef> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                let x = self.tun()?;
                Ok(self.f.raw_trace(TraceFormula::Not(x)))
            }
            Tok::LParen => {
                self.bump();
                let x = self.trace()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(x)
            }
            Tok::Ident(w) => {
                self.bump();
                match w.as_str() {
                    "T" => Ok(self.f.raw_trace(TraceFormula::True)),
                    "F" => Ok(self.f.raw_trace(TraceFormula::False)),
                    "EM" => {
                        let e = self.eun()?;
                        Ok(self.f.raw_trace(TraceFormula::EM(e)))
                    }
                    "Lleq" => {
                        let i = self.process()?;
                        let j = self.process()?;
                        Ok(self.f.raw_trace(TraceFormula::Lleq(i, j)))
                    }
                    "Lleq2" => {
                        let i = self.process()?;
                        let j = self.process()?;
                        let k = self.process()?;
                        Ok(self.f.raw_trace(TraceFormula::Lleq2(i, j, k)))
                    }
                    _ if w.starts_with("EM_") => {
                        let i = self.process_name(&w[3..])?;
                        let e = self.eun()?;
                        Ok(self.f.raw_trace(TraceFormula::EMi(i, e)))
                    }
                    _ => {
                        self.pos -= 1;
                        self.err(format!("expected a trace formula, found `{w}`"))
                    }
                }
            }
            other => self.err(format!("expected a trace formula, found {other:?}")),
        }
    }

    // ---- event formulas ----

    fn event(&mut self) -> Result<EvRef> {
        let mut xs = vec![self.eand()?];
        while *self.peek() == Tok::Bar {
            self.bump();
            xs.push(self.eand()?);
        }
        Ok(if xs.len() == 1 {
            xs[0]
        } else {
            self.f.raw_event(EventFormula::Or(xs))
        })
    }

    fn eand(&mut self) -> Result<EvRef> {
        let mut xs = vec![self.eun()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            xs.push(self.eun()?);
        }
        Ok(if xs.len() == 1 {
            xs[0]
        } else {
            self.f.raw_event(EventFormula::And(xs))
        })
    }

    fn starts_event(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Ident(_) | Tok::Bang | Tok::LAngle | Tok::LParen | Tok::Ref(_)
        )
    }

    fn eun(&mut self) -> Result<EvRef> {
        match self.peek().clone() {
            Tok::Ref(name) => match self.defs.and_then(|d| d.get(&name)) {
                Some(&x) => {
                    self.bump();
                    Ok(x)
                }
                None => self.err(format!("undefined name `${name}`")),
            },
            Tok::Bang => {
                self.bump();
                let x = self.eun()?;
                Ok(self.f.raw_event(EventFormula::Not(x)))
            }
            Tok::LParen => {
                self.bump();
                let x = self.event()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(x)
            }
            Tok::LAngle => {
                self.bump();
                let p = self.path()?;
                self.expect(Tok::RAngle, "`>`")?;
                if self.starts_event() {
                    let x = self.eun()?;
                    Ok(self.f.raw_event(EventFormula::Diamond(p, x)))
                } else {
                    Ok(self.f.raw_event(EventFormula::DiamondExists(p)))
                }
            }
            Tok::Ident(w) => {
                self.bump();
                match w.as_str() {
                    "T" => Ok(self.f.raw_event(EventFormula::True)),
                    "F" => Ok(self.f.raw_event(EventFormula::False)),
                    "Yleq" => {
                        let i = self.process()?;
                        let j = self.process()?;
                        Ok(self.f.raw_event(EventFormula::Yleq(i, j)))
                    }
                    "Yleq2" => {
                        let i = self.process()?;
                        let j = self.process()?;
                        let k = self.process()?;
                        Ok(self.f.raw_event(EventFormula::Yleq2(i, j, k)))
                    }
                    _ => {
                        if let Some(a) = self.f.alphabet().letter_id(&w) {
                            return Ok(self.f.raw_event(EventFormula::Letter(a)));
                        }
                        if let Some(p) = w.strip_prefix("on_") {
                            let i = self.process_name(p)?;
                            return Ok(self.f.on(i));
                        }
                        self.pos -= 1;
                        if w.starts_with("EM") || w.starts_with("Lleq") {
                            return self.err(format!("`{w}` is a trace operator"));
                        }
                        Err(Error::UnknownLetter {
                            letter: w,
                            position: self.toks[self.pos].col,
                        })
                    }
                }
            }
            other => self.err(format!("expected an event formula, found {other:?}")),
        }
    }

    // ---- path formulas ----

    fn path(&mut self) -> Result<PathRef> {
        let mut xs = vec![self.pcat()?];
        while *self.peek() == Tok::Bar {
            self.bump();
            xs.push(self.pcat()?);
        }
        Ok(if xs.len() == 1 {
            xs[0]
        } else {
            self.f.raw_path(PathFormula::Sum(xs))
        })
    }

    fn pcat(&mut self) -> Result<PathRef> {
        let mut xs = vec![self.ppost()?];
        while *self.peek() == Tok::Dot {
            self.bump();
            xs.push(self.ppost()?);
        }
        Ok(if xs.len() == 1 {
            xs[0]
        } else {
            self.f.raw_path(PathFormula::Concat(xs))
        })
    }

    fn ppost(&mut self) -> Result<PathRef> {
        let mut p = self.patom()?;
        while *self.peek() == Tok::Star {
            self.bump();
            p = self.f.raw_path(PathFormula::Star(p));
        }
        Ok(p)
    }

    fn patom(&mut self) -> Result<PathRef> {
        match self.bump() {
            Tok::Move(name) => {
                let i = self.process_name(&name)?;
                Ok(self.f.raw_path(PathFormula::Move(i)))
            }
            Tok::Prevon(name) => {
                let i = self.process_name(&name)?;
                self.expect(Tok::LBrace, "`{`")?;
                let phi = self.event()?;
                self.expect(Tok::RBrace, "`}`")?;
                Ok(self.f.prevon(i, phi))
            }
            Tok::Question => {
                let phi = if *self.peek() == Tok::LBrace {
                    self.bump();
                    let phi = self.event()?;
                    self.expect(Tok::RBrace, "`}`")?;
                    phi
                } else {
                    self.eun()?
                };
                Ok(self.f.raw_path(PathFormula::Test(phi)))
            }
            Tok::LParen => {
                let p = self.path()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(p)
            }
            other => {
                self.pos -= usize::from(other != Tok::End);
                self.err(format!("expected a path formula, found {other:?}"))
            }
        }
    }
}

/// Parses an event formula over the store's alphabet.
pub fn parse_event_formula(f: &mut Formulas, text: &str) -> Result<EvRef> {
    let mut p = Parser::new(f, text)?;
    let r = p.event()?;
    p.finish()?;
    Ok(r)
}

/// Parses a trace formula over the store's alphabet.
pub fn parse_trace_formula(f: &mut Formulas, text: &str) -> Result<TraceRef> {
    let mut p = Parser::new(f, text)?;
    let r = p.trace()?;
    p.finish()?;
    Ok(r)
}

/// Parses a path formula over the store's alphabet.
pub fn parse_path_formula(f: &mut Formulas, text: &str) -> Result<PathRef> {
    let mut p = Parser::new(f, text)?;
    let r = p.path()?;
    p.finish()?;
    Ok(r)
}

/// One formula of a formula file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileFormula {
    pub line: usize,
    pub text: String,
    pub formula: AnyFormula,
}

/// Parses a formula file: one formula per line, `#` comments, blank lines
/// ignored. A line that parses as a trace formula is one; otherwise it is
/// read as an event formula. A line `$name := φ` defines an event formula
/// that later lines may use as `$name`.
pub fn parse_formula_file(f: &mut Formulas, text: &str) -> Result<Vec<FileFormula>> {
    let mut out = Vec::new();
    let mut defs: HashMap<String, EvRef> = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let relocate = |e: Error| match e {
            Error::Parse { column, message, .. } => Error::Parse {
                line: n + 1,
                column,
                message,
            },
            other => other,
        };
        if let Some((name, body)) = line.strip_prefix('$').and_then(|l| l.split_once(":=")) {
            let name = name.trim().to_string();
            if name.is_empty() || !name.chars().all(is_name_char) {
                return Err(relocate(Error::Parse {
                    line: 1,
                    column: 1,
                    message: format!("bad definition name `${name}`"),
                }));
            }
            let mut p = Parser::new(f, body).map_err(relocate)?;
            p.defs = Some(&defs);
            let x = p.event().and_then(|x| p.finish().map(|_| x)).map_err(relocate)?;
            defs.insert(name, x);
            continue;
        }
        let try_trace = |f: &mut Formulas| -> Result<TraceRef> {
            let mut p = Parser::new(f, line)?;
            p.defs = Some(&defs);
            let r = p.trace()?;
            p.finish()?;
            Ok(r)
        };
        let try_event = |f: &mut Formulas| -> Result<EvRef> {
            let mut p = Parser::new(f, line)?;
            p.defs = Some(&defs);
            let r = p.event()?;
            p.finish()?;
            Ok(r)
        };
        let formula = match try_trace(f) {
            Ok(t) => AnyFormula::Trace(t),
            Err(te) => match try_event(f) {
                Ok(e) => AnyFormula::Event(e),
                // report the reading that got further
                Err(ee) => {
                    let col = |e: &Error| match e {
                        Error::Parse { column, .. } => *column,
                        _ => 0,
                    };
                    return Err(relocate(if col(&te) >= col(&ee) { te } else { ee }));
                }
            },
        };
        out.push(FileFormula {
            line: n + 1,
            text: line.to_string(),
            formula,
        });
    }
    Ok(out)
}
