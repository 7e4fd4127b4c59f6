#![allow(dead_code)]

use std::sync::Arc;

use locpdl::trace::{enumerate_traces, DistributedAlphabet, Trace};

pub fn one_proc() -> Arc<DistributedAlphabet> {
    Arc::new(DistributedAlphabet::new([("1", vec!["a", "b"])]).unwrap())
}

pub fn two_proc() -> Arc<DistributedAlphabet> {
    Arc::new(DistributedAlphabet::new([("1", vec!["a", "c"]), ("2", vec!["b", "c"])]).unwrap())
}

pub fn three_proc() -> Arc<DistributedAlphabet> {
    Arc::new(
        DistributedAlphabet::new([
            ("1", vec!["a", "x", "z"]),
            ("2", vec!["b", "x", "y"]),
            ("3", vec!["c", "y", "z"]),
        ])
        .unwrap(),
    )
}

/// Three processes with a letter shared by all of them.
pub fn three_proc_sync() -> Arc<DistributedAlphabet> {
    Arc::new(
        DistributedAlphabet::new([
            ("1", vec!["a", "s"]),
            ("2", vec!["b", "s", "x"]),
            ("3", vec!["c", "s", "x"]),
        ])
        .unwrap(),
    )
}

pub fn traces(a: &Arc<DistributedAlphabet>, n: usize) -> Vec<Trace> {
    enumerate_traces(a, n).collect()
}

use locpdl::formula::{EvRef, Formulas, PathRef, TraceRef};
use locpdl::machines::{AsyncAutomaton, AsyncTransducer};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random event formula whose paths are all local.
pub fn random_event(f: &mut Formulas, rng: &mut ChaCha8Rng, depth: u32) -> EvRef {
    let np = f.alphabet().num_processes();
    let nl = f.alphabet().num_letters();
    if depth == 0 {
        return match rng.gen_range(0..4) {
            0 => f.tt(),
            1 => {
                let i = rng.gen_range(0..np);
                f.on(i)
            }
            _ => {
                let a = rng.gen_range(0..nl);
                f.letter(a)
            }
        };
    }
    match rng.gen_range(0..6) {
        0 => {
            let x = random_event(f, rng, depth - 1);
            f.not(x)
        }
        1 => {
            let x = random_event(f, rng, depth - 1);
            let y = random_event(f, rng, depth - 1);
            f.or2(x, y)
        }
        2 => {
            let x = random_event(f, rng, depth - 1);
            let y = random_event(f, rng, depth - 1);
            f.and2(x, y)
        }
        _ => {
            let i = rng.gen_range(0..np);
            let p = random_path(f, rng, i, depth - 1);
            let x = random_event(f, rng, depth - 1);
            f.diamond(p, x)
        }
    }
}

/// Random path moving only on process `i`.
pub fn random_path(f: &mut Formulas, rng: &mut ChaCha8Rng, i: usize, depth: u32) -> PathRef {
    if depth == 0 {
        return if rng.gen_bool(0.7) {
            f.mv(i)
        } else {
            let x = random_event(f, rng, 0);
            f.test(x)
        };
    }
    match rng.gen_range(0..5) {
        0 => {
            let p = random_path(f, rng, i, depth - 1);
            let q = random_path(f, rng, i, depth - 1);
            f.concat([p, q])
        }
        1 => {
            let p = random_path(f, rng, i, depth - 1);
            let q = random_path(f, rng, i, depth - 1);
            f.sum([p, q])
        }
        2 => {
            let p = random_path(f, rng, i, depth - 1);
            f.star(p)
        }
        3 => {
            let x = random_event(f, rng, depth - 1);
            f.test(x)
        }
        _ => f.mv(i),
    }
}

/// Random asynchronous transducer with arbitrary joint tables.
pub fn random_transducer(
    a: &Arc<DistributedAlphabet>,
    rng: &mut ChaCha8Rng,
    contexts: usize,
    max_states: usize,
    outputs: usize,
) -> AsyncTransducer {
    let np = a.num_processes();
    let sizes: Vec<usize> = (0..np).map(|_| rng.gen_range(1..=max_states)).collect();
    let initial: Vec<usize> = sizes.iter().map(|&n| rng.gen_range(0..n)).collect();
    let nl = a.num_letters();
    let sz = sizes.clone();
    AsyncTransducer::from_fn(a.clone(), contexts, &sizes, initial, outputs, |x, _| {
        let letter = x % nl;
        let next = a
            .loc(letter)
            .iter()
            .map(|&i| rng.gen_range(0..sz[i]))
            .collect();
        (next, rng.gen_range(0..outputs))
    })
    .unwrap()
}

/// Random event formula over the whole logic, constants and non-local paths
/// included.
pub fn any_event(f: &mut Formulas, rng: &mut ChaCha8Rng, depth: u32) -> EvRef {
    let np = f.alphabet().num_processes();
    if depth == 0 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..5) {
            0 => f.tt(),
            1 => f.yleq(rng.gen_range(0..np), rng.gen_range(0..np)),
            2 => f.yleq2(rng.gen_range(0..np), rng.gen_range(0..np), rng.gen_range(0..np)),
            _ => {
                let a = rng.gen_range(0..f.alphabet().num_letters());
                f.letter(a)
            }
        };
    }
    match rng.gen_range(0..6) {
        0 => {
            let x = any_event(f, rng, depth - 1);
            f.not(x)
        }
        1 => {
            let x = any_event(f, rng, depth - 1);
            let y = any_event(f, rng, depth - 1);
            f.or2(x, y)
        }
        2 => {
            let x = any_event(f, rng, depth - 1);
            let y = any_event(f, rng, depth - 1);
            f.and2(x, y)
        }
        3 => {
            let p = any_path(f, rng, depth - 1);
            f.diamond_exists(p)
        }
        _ => {
            let p = any_path(f, rng, depth - 1);
            let x = any_event(f, rng, depth - 1);
            f.diamond(p, x)
        }
    }
}

pub fn any_path(f: &mut Formulas, rng: &mut ChaCha8Rng, depth: u32) -> PathRef {
    let np = f.alphabet().num_processes();
    if depth == 0 {
        return f.mv(rng.gen_range(0..np));
    }
    match rng.gen_range(0..6) {
        0 => {
            let x = any_event(f, rng, depth - 1);
            f.test(x)
        }
        1 => {
            let p = any_path(f, rng, depth - 1);
            let q = any_path(f, rng, depth - 1);
            f.sum([p, q])
        }
        2 => {
            let p = any_path(f, rng, depth - 1);
            let q = any_path(f, rng, depth - 1);
            f.concat([p, q])
        }
        3 => {
            let p = any_path(f, rng, depth - 1);
            f.star(p)
        }
        _ => f.mv(rng.gen_range(0..np)),
    }
}

pub fn any_trace(f: &mut Formulas, rng: &mut ChaCha8Rng) -> TraceRef {
    let np = f.alphabet().num_processes();
    let x = any_event(f, rng, 2);
    match rng.gen_range(0..6) {
        0 => f.em(x),
        1 => f.lleq(rng.gen_range(0..np), rng.gen_range(0..np)),
        2 => f.lleq2(rng.gen_range(0..np), rng.gen_range(0..np), rng.gen_range(0..np)),
        3 => {
            let y = f.em_i(rng.gen_range(0..np), x);
            f.t_not(y)
        }
        _ => f.em_i(rng.gen_range(0..np), x),
    }
}

/// All linearizations of `t`, as permutations of its event indices.
pub fn linearizations(t: &Trace) -> Vec<Vec<usize>> {
    fn go(t: &Trace, done: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if done.len() == t.len() {
            out.push(done.clone());
            return;
        }
        for e in t.events() {
            if !used[e] && t.events().all(|f| f == e || !t.lt(f, e) || used[f]) {
                used[e] = true;
                done.push(e);
                go(t, done, used, out);
                done.pop();
                used[e] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(t, &mut Vec::new(), &mut vec![false; t.len()], &mut out);
    out
}

/// Two-state reset machine at process 1 remembering whether the last
/// 1-event was `a`.
pub fn reset_machine() -> AsyncAutomaton {
    let alph = two_proc();
    let a = alph.letter_id("a").unwrap();
    AsyncAutomaton::from_fn(alph.clone(), 1, &[2, 1], vec![0, 0], |x, s| {
        let loc = alph.loc(x);
        let mut next = s.to_vec();
        if loc[0] == 0 {
            next[0] = usize::from(x == a);
        }
        next
    })
    .unwrap()
}

/// Parity of the number of `c` events, kept at process 2.
pub fn parity_machine() -> AsyncAutomaton {
    let alph = two_proc();
    let c = alph.letter_id("c").unwrap();
    AsyncAutomaton::from_fn(alph.clone(), 1, &[1, 2], vec![0, 0], |x, s| {
        let mut next = s.to_vec();
        if x == c {
            // loc(c) = {1, 2}; process 2 is the second component
            next[1] = 1 - s[1];
        }
        next
    })
    .unwrap()
}
