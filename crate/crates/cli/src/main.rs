//! `locpdl`: evaluate, translate and compile local past PDL formulas.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use locpdl::compiler::{compile_event, compile_sentence, gossip, CompileConfig, CompiledSentence};
use locpdl::elim::{ElimConfig, Eliminator, QuantifierRange};
use locpdl::formula::{parse_formula_file, AnyFormula, FileFormula, Formulas};
use locpdl::machines::theta_labeling;
use locpdl::semantics::{eval_trace, equivalent_on, Counterexample, Evaluator};
use locpdl::trace::{enumerate_traces, DistributedAlphabet, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "locpdl", version, about = "Local past PDL over Mazurkiewicz traces")]
struct Cli {
    /// Worker threads for trace sweeps (results are merged in a fixed order).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the formulas of a file on a trace.
    Eval {
        alphabet: PathBuf,
        /// Whitespace-separated letters; `-` or an empty string for the empty trace.
        trace: String,
        formulas: PathBuf,
        /// Evaluate event formulas at this event (1-based, in word order).
        #[arg(long)]
        event: Option<usize>,
    },
    /// Eliminate EM and the Y/L constants.
    Translate {
        formulas: PathBuf,
        #[arg(long)]
        alphabet: PathBuf,
        #[command(flatten)]
        elim: ElimArgs,
        /// Write the formula as a single expanded line instead of sharing
        /// repeated subformulas through `$name := …` definitions.
        #[arg(long)]
        expand: bool,
        /// With --expand, refuse formulas with more nodes than this.
        #[arg(long, default_value_t = 2_000_000)]
        max_print: u64,
    },
    /// Compile one formula into a cascade of localized machines.
    Compile {
        formulas: PathBuf,
        #[arg(long)]
        alphabet: PathBuf,
        /// 1-based position of the formula in the file.
        #[arg(long, default_value_t = 1)]
        index: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compare the machine with the evaluator on all traces up to this size.
        #[arg(long)]
        check_bound: Option<usize>,
        /// Write a flattened asynchronous machine instead of the stage list.
        #[arg(long)]
        explicit: bool,
        #[command(flatten)]
        elim: ElimArgs,
    },
    /// Build the gossip transducer of an alphabet.
    Gossip {
        alphabet: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        check_bound: Option<usize>,
        #[command(flatten)]
        elim: ElimArgs,
    },
    /// Compare two formulas on all traces up to a size.
    CheckEquiv {
        alphabet: PathBuf,
        /// Formula text, or `@file` for the first formula of a file.
        f1: String,
        f2: String,
        #[arg(long, default_value_t = 5)]
        bound: usize,
        /// Also compare on this many random longer traces.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, default_value_t = 12)]
        sample_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Basis {
    /// Quantify over the witnesses used in the existence proofs.
    Witness,
    /// Quantify over every sd-path over the default atomic basis.
    Enumerated,
}

#[derive(Args)]
struct ElimArgs {
    #[arg(long, value_enum, default_value_t = Basis::Witness)]
    basis: Basis,
    /// Comma-separated `key=value` limits: max_processes, xi_budget,
    /// state_budget, max_tests.
    #[arg(long, default_value = "")]
    limits: String,
}

struct Limits {
    elim: ElimConfig,
    compile: CompileConfig,
}

impl ElimArgs {
    fn limits(&self, alph: &DistributedAlphabet) -> anyhow::Result<Limits> {
        let mut elim = match self.basis {
            Basis::Witness => ElimConfig::default(),
            Basis::Enumerated => ElimConfig::enumerated_default(alph),
        };
        let mut compile = CompileConfig::default();
        for kv in self.limits.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("limit `{kv}` is not key=value")))?;
            let n: u128 = v.trim().parse().map_err(|_| usage(format!("bad number in `{kv}`")))?;
            let small = || usize::try_from(n).map_err(|_| usage(format!("`{kv}` is too large")));
            match k.trim() {
                "max_processes" => elim.max_processes = small()?,
                "xi_budget" => elim.xi_budget = n,
                "state_budget" => compile.state_budget = small()?,
                "max_tests" => compile.max_tests = small()?,
                other => return Err(usage(format!("unknown limit `{other}`"))),
            }
        }
        Ok(Limits { elim, compile })
    }
}

fn usage(msg: String) -> anyhow::Error {
    locpdl::Error::Input(msg).into()
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_alphabet(path: &Path) -> anyhow::Result<Arc<DistributedAlphabet>> {
    Ok(Arc::new(DistributedAlphabet::parse(&read(path)?)?))
}

fn load_formulas(f: &mut Formulas, path: &Path) -> anyhow::Result<Vec<FileFormula>> {
    Ok(parse_formula_file(f, &read(path)?)?)
}

fn event_name(e: usize) -> String {
    format!("e{}", e + 1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<locpdl::Error>() {
                Some(locpdl::Error::Resource(_)) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Cmd) -> anyhow::Result<u8> {
    match cmd {
        Cmd::Eval {
            alphabet,
            trace,
            formulas,
            event,
        } => eval(&alphabet, &trace, &formulas, event),
        Cmd::Translate {
            formulas,
            alphabet,
            elim,
            expand,
            max_print,
        } => translate(&formulas, &alphabet, &elim, expand.then_some(max_print)),
        Cmd::Compile {
            formulas,
            alphabet,
            index,
            out,
            check_bound,
            explicit,
            elim,
        } => compile(&formulas, &alphabet, index, out.as_deref(), check_bound, explicit, &elim),
        Cmd::Gossip {
            alphabet,
            out,
            check_bound,
            elim,
        } => run_gossip(&alphabet, out.as_deref(), check_bound, &elim),
        Cmd::CheckEquiv {
            alphabet,
            f1,
            f2,
            bound,
            samples,
            sample_len,
            seed,
        } => check_equiv(&alphabet, &f1, &f2, bound, samples, sample_len, seed),
    }
}

fn eval(alphabet: &Path, trace: &str, formulas: &Path, event: Option<usize>) -> anyhow::Result<u8> {
    let alph = load_alphabet(alphabet)?;
    let trace = if trace.trim() == "-" { "" } else { trace };
    let t = Trace::parse(alph.clone(), trace)?;
    let mut f = Formulas::new(alph);
    let fs = load_formulas(&mut f, formulas)?;
    if let Some(n) = event {
        if n == 0 || n > t.len() {
            return Err(usage(format!("event {n} is not in a trace of {} events", t.len())));
        }
    }
    let mut ev = Evaluator::new(&f);
    ev.bind(&t)?;
    let mut last = None;
    for ff in &fs {
        let value = match (ff.formula, event) {
            (AnyFormula::Trace(x), _) => Some(ev.trace_value(x)),
            (AnyFormula::Event(x), Some(n)) => Some(ev.event_set(x) >> (n - 1) & 1 == 1),
            (AnyFormula::Event(x), None) => {
                let set = ev.event_set(x);
                let names: Vec<String> = t.events().filter(|e| set >> e & 1 == 1).map(event_name).collect();
                println!("{}: {{{}}}", ff.text, names.join(", "));
                None
            }
        };
        if let Some(v) = value {
            println!("{}: {v}", ff.text);
        }
        last = value;
    }
    Ok(match (fs.len(), last) {
        (1, Some(false)) => 1,
        _ => 0,
    })
}

fn eliminate(f: &mut Formulas, x: AnyFormula, cfg: ElimConfig) -> anyhow::Result<AnyFormula> {
    let mut el = Eliminator::new(f, cfg)?;
    Ok(match x {
        AnyFormula::Trace(t) => AnyFormula::Trace(el.eliminate(t)?),
        AnyFormula::Event(e) => AnyFormula::Event(el.eliminate_event(e)?),
    })
}

fn translate(formulas: &Path, alphabet: &Path, elim: &ElimArgs, expand: Option<u64>) -> anyhow::Result<u8> {
    let alph = load_alphabet(alphabet)?;
    let limits = elim.limits(&alph)?;
    let mut f = Formulas::new(alph.clone());
    let fs = load_formulas(&mut f, formulas)?;
    println!("# alphabet: {}", alph.to_text().trim().replace('\n', "; "));
    println!(
        "# basis: {}",
        match limits.elim.range {
            QuantifierRange::Witness => "witness",
            QuantifierRange::Enumerated { .. } => "enumerated",
        }
    );
    for ff in &fs {
        let out = eliminate(&mut f, ff.formula, limits.elim.clone())?;
        let size = f.size(out);
        println!("# input (line {}): {}", ff.line, ff.text);
        println!("# size: {size} nodes, {} shared nodes", f.dag_size(out));
        match expand {
            Some(max) if size > max => {
                return Err(locpdl::Error::Resource(format!(
                    "the translation of line {} has {size} nodes when expanded; raise --max-print",
                    ff.line
                ))
                .into())
            }
            Some(_) => println!("{}", f.show(out)),
            None => println!("{}", f.show_shared(out)),
        }
    }
    Ok(0)
}

fn compile(
    formulas: &Path,
    alphabet: &Path,
    index: usize,
    out: Option<&Path>,
    check_bound: Option<usize>,
    explicit: bool,
    elim: &ElimArgs,
) -> anyhow::Result<u8> {
    let alph = load_alphabet(alphabet)?;
    let limits = elim.limits(&alph)?;
    let mut f = Formulas::new(alph.clone());
    let fs = load_formulas(&mut f, formulas)?;
    let ff = fs
        .get(index.wrapping_sub(1))
        .ok_or_else(|| usage(format!("the file has no formula number {index}")))?
        .clone();
    let report = f.dialect_check(ff.formula);
    let target = if report.uses_constants || report.uses_global_em {
        eliminate(&mut f, ff.formula, limits.elim.clone())?
    } else {
        ff.formula
    };
    let size = f.size(target) as usize;
    let (json, cascade) = match target {
        AnyFormula::Event(x) => {
            let c = compile_event(&f, x, &limits.compile)?;
            let json = if explicit {
                c.to_chain(limits.compile.state_budget)?.to_json()
            } else {
                c.to_json()
            };
            (json, c)
        }
        AnyFormula::Trace(x) => {
            let c = compile_sentence(&f, x, &limits.compile)?;
            let json = if explicit {
                c.to_automaton(limits.compile.state_budget)?.automaton.to_json()
            } else {
                c.to_json()
            };
            (json, c.cascade)
        }
    };
    println!("# formula: {}", ff.text);
    println!("{}", cascade.size_report(size));
    if let Some(path) = out {
        fs::write(path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(n) = check_bound {
        let ts: Vec<Trace> = enumerate_traces(&alph, n).collect();
        let sentence = match target {
            AnyFormula::Trace(x) => Some(compile_sentence(&f, x, &limits.compile)?),
            AnyFormula::Event(_) => None,
        };
        let bad = ts.iter().find(|t| match (target, &sentence) {
            (AnyFormula::Trace(x), Some(s)) => accepts(s, t) != eval_trace(&f, t, x).ok(),
            (AnyFormula::Event(x), _) => {
                cascade.labels(t).ok() != theta_labeling(&f, t, &[x]).ok()
            }
            _ => unreachable!(),
        });
        match bad {
            None => println!("check: ok on {} traces up to {n} events", ts.len()),
            Some(t) => {
                println!("check: mismatch on `{}`", t.display_word());
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn accepts(s: &CompiledSentence, t: &Trace) -> Option<bool> {
    s.accepts(t).ok()
}

fn run_gossip(alphabet: &Path, out: Option<&Path>, check_bound: Option<usize>, elim: &ElimArgs) -> anyhow::Result<u8> {
    let alph = load_alphabet(alphabet)?;
    let limits = elim.limits(&alph)?;
    let (mut f, g) = gossip(alph.clone(), limits.elim, &limits.compile)?;
    let pairs: Vec<String> = g
        .pairs
        .iter()
        .map(|&(i, j)| format!("Yleq {} {}", alph.process_name(i), alph.process_name(j)))
        .collect();
    println!("# outputs: {}", pairs.join(", "));
    println!("{}", g.cascade.size_report(g.formula_size));
    if let Some(path) = out {
        fs::write(path, g.cascade.to_json() + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(n) = check_bound {
        let direct: Vec<_> = g.pairs.iter().map(|&(i, j)| f.yleq(i, j)).collect();
        let mut count = 0;
        for t in enumerate_traces(&alph, n) {
            count += 1;
            if g.cascade.labels(&t)? != theta_labeling(&f, &t, &direct)? {
                println!("check: mismatch on `{}`", t.display_word());
                return Ok(1);
            }
        }
        println!("check: ok on {count} traces up to {n} events");
    }
    Ok(0)
}

fn formula_arg(f: &mut Formulas, arg: &str) -> anyhow::Result<AnyFormula> {
    let text = match arg.strip_prefix('@') {
        Some(path) => read(Path::new(path))?,
        None => arg.to_string(),
    };
    let fs = parse_formula_file(f, &text)?;
    Ok(fs.first().ok_or_else(|| usage(format!("no formula in `{arg}`")))?.formula)
}

fn print_cex(f: &Formulas, cex: &Counterexample) {
    println!("counterexample: `{}`", f.alphabet().format_word(&cex.word));
    if let Some(e) = cex.event {
        println!("at event: {}", event_name(e));
    }
}

fn check_equiv(
    alphabet: &Path,
    f1: &str,
    f2: &str,
    bound: usize,
    samples: usize,
    sample_len: usize,
    seed: u64,
) -> anyhow::Result<u8> {
    let alph = load_alphabet(alphabet)?;
    let mut f = Formulas::new(alph.clone());
    let a = formula_arg(&mut f, f1)?;
    let b = formula_arg(&mut f, f2)?;
    if let Some(cex) = equivalent_on(&f, bound, a, b)? {
        print_cex(&f, &cex);
        return Ok(1);
    }
    if samples > 0 {
        println!("seed: {seed}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nl = alph.num_letters();
        for _ in 0..samples {
            let word: Vec<usize> = (0..sample_len).map(|_| rng.gen_range(0..nl)).collect();
            let t = Trace::from_word(alph.clone(), &word)?;
            if let Some(cex) = locpdl::semantics::differ_on(&f, &t, a, b)? {
                print_cex(&f, &cex);
                return Ok(1);
            }
        }
    }
    println!("ok: equivalent on all traces up to {bound} events");
    Ok(0)
}
