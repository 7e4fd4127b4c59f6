mod common;

use common::*;
use locpdl::elim::{ElimConfig, Eliminator, QuantifierRange};
use locpdl::formula::{AnyFormula, Formulas};
use locpdl::sdpath::{default_basis, enumerate_sdpaths, SdPath};
use locpdl::semantics::{eval_event, eval_trace, pack_traces, Evaluator};
use locpdl::trace::{fig1_alphabet, fig1_trace, Trace};

fn prevon_top(t: &Trace, j: usize, p: &SdPath, e: usize) -> Option<usize> {
    if !t.is_on(e, j) {
        return None;
    }
    let r = t.clock(e, j) - 1;
    t.chain(j)[..r].iter().rev().copied().find(|&g| p.eval(t, g).is_some())
}

fn same_oracle(t: &Trace, j: usize, p: &SdPath, e: usize) -> bool {
    match (p.eval(t, e), prevon_top(t, j, p, e)) {
        (Some(x), Some(f)) => p.eval(t, f) == Some(x),
        _ => false,
    }
}

fn mod_oracle(t: &Trace, p: &SdPath, n: usize, k: usize, e: usize) -> bool {
    let i = p.first_process().unwrap();
    if p.eval(t, e).is_none() {
        return false;
    }
    let below = &t.chain(i)[..t.clock(e, i) - 1];
    let c = below
        .iter()
        .filter(|&&f| p.eval(t, f).is_some() && !same_oracle(t, i, p, f))
        .count();
    c % n == k
}

/// Checks `φ_k` against `oracle_k` at every event of every trace.
fn check_events<O>(f: &Formulas, ts: Vec<Trace>, phis: &[locpdl::formula::EvRef], oracle: O)
where
    O: Fn(&Trace, usize, usize) -> bool,
{
    let mut ev = Evaluator::new(f);
    for batch in pack_traces(ts) {
        let offs = ev.bind_batch(&batch).unwrap();
        for (k, &phi) in phis.iter().enumerate() {
            let m = ev.event_set(phi);
            for (t, &o) in batch.iter().zip(&offs) {
                for e in t.events() {
                    assert_eq!(
                        m >> (o + e) & 1 == 1,
                        oracle(t, k, e),
                        "formula #{k} at e{} of {}",
                        e + 1,
                        t.display_word()
                    );
                }
            }
        }
    }
}

#[test]
fn same_matches_definition() {
    for (a, len) in [(two_proc(), 2), (three_proc(), 1), (three_proc_sync(), 1)] {
        let mut f = Formulas::new(a.clone());
        let paths = enumerate_sdpaths(&a, &default_basis(&a), 0, len, u128::MAX).unwrap();
        let mut cases = Vec::new();
        let mut phis = Vec::new();
        {
            let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
            for p in &paths {
                for j in a.processes() {
                    cases.push((j, p.clone()));
                    phis.push(el.build_same(j, p).unwrap());
                }
            }
        }
        check_events(&f, traces(&a, 5), &phis, |t, k, e| {
            let (j, p) = &cases[k];
            same_oracle(t, *j, p, e)
        });
    }
}

#[test]
fn same_of_a_test_is_false() {
    let a = two_proc();
    let mut f = Formulas::new(a.clone());
    let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
    let p = SdPath::parse(&a, "?{on_1}").unwrap();
    let s = el.build_same(0, &p).unwrap();
    assert_eq!(s, el.formulas().ff());
    let raw = SdPath::parse(&a, "<=_1{T}").unwrap();
    assert!(el.build_same(0, &raw).is_err());
}

#[test]
fn mod_counts_past_changes() {
    for a in [two_proc(), three_proc()] {
        let mut f = Formulas::new(a.clone());
        let paths = enumerate_sdpaths(&a, &default_basis(&a), 1, 1, u128::MAX).unwrap();
        let mut cases = Vec::new();
        let mut phis = Vec::new();
        {
            let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
            for p in &paths {
                for n in 2..=3 {
                    for k in 0..n {
                        cases.push((p.clone(), n, k));
                        phis.push(el.build_mod(p, n, k).unwrap());
                    }
                }
            }
        }
        check_events(&f, traces(&a, 5), &phis, |t, c, e| {
            let (p, n, k) = &cases[c];
            mod_oracle(t, p, *n, *k, e)
        });
    }
}

#[test]
fn mod_rejects_bad_arguments() {
    let a = two_proc();
    let mut f = Formulas::new(a.clone());
    let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
    let p = SdPath::parse(&a, "<=_1{T}").unwrap();
    assert!(el.build_mod(&p, 1, 0).is_err());
    assert!(el.build_mod(&p, 2, 2).is_err());
    assert!(el.build_mod(&SdPath::top(&a), 2, 0).is_err());
    assert!(el.separating_set(&SdPath::top(&a)).is_err());
    assert_eq!(el.separating_set(&p).unwrap().len() <= 4 + 2, true);
}

#[test]
fn fig1_mod_on_process_two() {
    let a = fig1_alphabet();
    let t = fig1_trace();
    let p = SdPath::parse(&a, "<=_2{T}").unwrap();
    let mut f = Formulas::new(a.clone());
    let ms: Vec<_> = {
        let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
        (0..2).map(|k| el.build_mod(&p, 2, k).unwrap()).collect()
    };
    for e in [4, 7, 9] {
        for (k, &m) in ms.iter().enumerate() {
            assert_eq!(eval_event(&f, &t, e, m).unwrap(), mod_oracle(&t, &p, 2, k, e));
        }
    }
}

fn peq_pleq_grid(
    a: std::sync::Arc<locpdl::DistributedAlphabet>,
    paths: &[SdPath],
    cfg: ElimConfig,
    n: usize,
    with_pleq: bool,
) {
    let mut f = Formulas::new(a.clone());
    let mut cases = Vec::new();
    let mut phis = Vec::new();
    {
        let mut el = Eliminator::new(&mut f, cfg).unwrap();
        for p in paths {
            for q in paths {
                cases.push((p.clone(), q.clone(), false));
                phis.push(el.build_peq(p, q).unwrap());
                if with_pleq {
                    cases.push((p.clone(), q.clone(), true));
                    phis.push(el.build_pleq(p, q).unwrap());
                }
            }
        }
    }
    check_events(&f, traces(&a, n), &phis, |t, k, e| {
        let (p, q, le) = &cases[k];
        match (p.eval(t, e), q.eval(t, e)) {
            (Some(x), Some(y)) => {
                if *le {
                    t.leq(x, y)
                } else {
                    x == y
                }
            }
            _ => false,
        }
    });
}

#[test]
fn peq_pleq_two_processes() {
    let a = two_proc();
    let paths = enumerate_sdpaths(&a, &default_basis(&a), 0, 1, u128::MAX).unwrap();
    peq_pleq_grid(a, &paths, ElimConfig::default(), 5, true);
}

#[test]
fn peq_enumerated_range() {
    let a = two_proc();
    let basis = vec![locpdl::sdpath::Atomic::top(&a)];
    let paths = enumerate_sdpaths(&a, &basis, 0, 1, u128::MAX).unwrap();
    let cfg = ElimConfig {
        range: QuantifierRange::Enumerated { basis },
        ..Default::default()
    };
    peq_pleq_grid(a, &paths, cfg, 5, false);
}

#[test]
fn enumerated_range_respects_budget() {
    let a = three_proc();
    let mut f = Formulas::new(a.clone());
    let cfg = ElimConfig {
        xi_budget: 1000,
        ..ElimConfig::enumerated_default(&a)
    };
    let mut el = Eliminator::new(&mut f, cfg).unwrap();
    let p = SdPath::parse(&a, "<=_1{on_2} . <=_2{T}").unwrap();
    let q = SdPath::parse(&a, "<=_1{T}").unwrap();
    let err = el.build_peq(&p, &q).unwrap_err();
    assert!(matches!(err, locpdl::Error::Resource(_)), "{err}");
}

#[test]
fn too_many_processes_is_a_resource_error() {
    let a = fig1_alphabet();
    let mut f = Formulas::new(a);
    let cfg = ElimConfig {
        max_processes: 3,
        ..Default::default()
    };
    assert!(matches!(Eliminator::new(&mut f, cfg), Err(locpdl::Error::Resource(_))));
}

#[test]
fn y_constants_two_processes() {
    let a = two_proc();
    let mut f = Formulas::new(a.clone());
    let mut cases = Vec::new();
    let mut phis = Vec::new();
    {
        let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                cases.push((i, j, None));
                phis.push(el.build_yleq(i, j).unwrap());
                for k in 0..2 {
                    cases.push((i, j, Some(k)));
                    phis.push(el.build_yleq2(i, j, k).unwrap());
                }
            }
        }
    }
    check_events(&f, traces(&a, 6), &phis, |t, c, e| {
        let (i, j, k) = cases[c];
        let (l, r) = match k {
            None => (t.yesterday(i, e), t.yesterday(j, e)),
            Some(k) => (t.yesterday2(i, j, e), t.yesterday(k, e)),
        };
        matches!((l, r), (Some(l), Some(r)) if t.leq(l, r))
    });
}

#[test]
fn l_constants_two_processes() {
    let a = two_proc();
    let mut f = Formulas::new(a.clone());
    let mut cases = Vec::new();
    {
        let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                cases.push((i, j, None, el.build_lleq(i, j).unwrap()));
                for k in 0..2 {
                    cases.push((i, j, Some(k), el.build_lleq2(i, j, k).unwrap()));
                }
            }
        }
    }
    let mut ev = Evaluator::new(&f);
    for t in traces(&a, 6) {
        ev.bind(&t).unwrap();
        for &(i, j, k, phi) in &cases {
            let (l, r) = match k {
                None => (t.last(i), t.last(j)),
                Some(k) => (t.last2(i, j), t.last(k)),
            };
            let want = matches!((l, r), (Some(l), Some(r)) if t.leq(l, r));
            assert_eq!(ev.trace_value(phi), want, "{i} {j} {k:?} on {}", t.display_word());
        }
    }
}

#[test]
fn single_process_bypasses() {
    let a = one_proc();
    let mut f = Formulas::new(a.clone());
    let (y, y2, l, l2) = {
        let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
        (
            el.build_yleq(0, 0).unwrap(),
            el.build_yleq2(0, 0, 0).unwrap(),
            el.build_lleq(0, 0).unwrap(),
            el.build_lleq2(0, 0, 0).unwrap(),
        )
    };
    assert_eq!(f.show_event(y), "< <-_1 > T");
    assert_eq!(f.show_event(y2), "< <-_1 . <-_1 > T");
    assert_eq!(f.show_trace(l), "EM_1 T");
    assert_eq!(l, l2);
}

#[test]
fn fig1_trace_constants() {
    let a = fig1_alphabet();
    let t = fig1_trace();
    let mut f = Formulas::new(a.clone());
    let (l34, l23, l234) = {
        let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
        (
            el.build_lleq(2, 3).unwrap(),
            el.build_lleq(1, 2).unwrap(),
            el.build_lleq2(1, 2, 3).unwrap(),
        )
    };
    assert!(eval_trace(&f, &t, l34).unwrap());
    assert!(!eval_trace(&f, &t, l23).unwrap());
    assert!(eval_trace(&f, &t, l234).unwrap());
}

#[test]
fn eliminate_em_and_constants() {
    let a = two_proc();
    let mut f = Formulas::new(a.clone());
    let src = [
        "EM b",
        "EM < <-_1 > a",
        "EM_1 (Yleq 1 2 & !Yleq2 2 1 2)",
        "Lleq 1 2 | Lleq2 2 1 1",
        "EM < <-_2 . ?c >",
    ];
    for s in src {
        let phi = locpdl::formula::parse_trace_formula(&mut f, s).unwrap();
        let out = {
            let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
            el.eliminate(phi).unwrap()
        };
        let report = f.dialect_check(AnyFormula::Trace(out));
        assert!(report.is_locpastpdl(), "{s}: {report:?}");
        let cex = locpdl::semantics::equivalent_on(&f, 6, AnyFormula::Trace(phi), AnyFormula::Trace(out)).unwrap();
        assert_eq!(cex, None, "{s}");
    }
}

#[test]
fn eliminate_rejects_non_local_paths() {
    let a = two_proc();
    let mut f = Formulas::new(a.clone());
    let phi = locpdl::formula::parse_trace_formula(&mut f, "EM < <-_1 . <-_2 > T").unwrap();
    let mut el = Eliminator::new(&mut f, ElimConfig::default()).unwrap();
    assert!(el.eliminate(phi).is_err());
}
