mod common;

use std::collections::BTreeSet;

use common::*;
use locpdl::formula::{AnyFormula, Formulas};
use locpdl::sdpath::{count_sdpaths, default_basis, enumerate_sdpaths, y_path, Atomic, SdLetter, SdPath};
use locpdl::semantics::{equivalent_on, satisfying_events, Evaluator};
use locpdl::trace::{fig1_alphabet, fig1_trace};
use locpdl::{Error, Trace};

/// `π(e)` computed from the strict order only.
fn naive_eval(t: &Trace, e: usize, p: &SdPath) -> Option<usize> {
    let mut cur = e;
    for l in p.letters() {
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
                let cands: Vec<usize> = t
                    .events()
                    .filter(|&g| t.lt(g, cur) && t.is_on(g, i) && a.contains(t.label(g)))
                    .collect();
                cur = *cands.iter().find(|&&g| cands.iter().all(|&h| t.leq(h, g)))?;
            }
        }
    }
    Some(cur)
}

#[test]
fn fig1_evaluations() {
    let a = fig1_alphabet();
    let t = fig1_trace();
    let p = SdPath::parse(&a, "<=_2{on_1}").unwrap();
    assert_eq!(p.eval(&t, 7), Some(3));
    let p = SdPath::parse(&a, "<=_2{T} . ?{on_3}").unwrap();
    assert_eq!(p.eval(&t, 7), Some(4));
    let p = SdPath::parse(&a, "<=_4{on_3} . <=_3{on_2} . ?{on_2}").unwrap();
    assert_eq!(p.eval(&t, 10), Some(4));
    assert_eq!(p.len(), 2);
    // ⇐_2 from an event not on process 2
    assert_eq!(SdPath::parse(&a, "<=_2{T}").unwrap().eval(&t, 6), None);
    assert!(SdPath::parse(&a, "<=_2{zz}").is_err());
    assert!(SdPath::parse(&a, "<=_2{< <-_1 > T}").is_err());
}

#[test]
fn standardize_examples() {
    let a = fig1_alphabet();
    let top = Atomic::top(&a);
    let two = SdPath::new(vec![SdLetter::PrevOn(0, top), SdLetter::PrevOn(0, top)]);
    let s = two.standardize(&a);
    assert_eq!(
        s.letters(),
        &[
            SdLetter::Test(top),
            SdLetter::PrevOn(0, top),
            SdLetter::Test(top),
            SdLetter::PrevOn(0, top),
            SdLetter::Test(top)
        ]
    );
    assert!(s.is_standardized() && !two.is_standardized());
    let phi = Atomic::letter(0).or(Atomic::letter(2));
    let psi = Atomic::on(&a, 0);
    let tt = SdPath::new(vec![SdLetter::Test(phi), SdLetter::Test(psi)]).standardize(&a);
    assert_eq!(tt.letters(), &[SdLetter::Test(phi.and(psi))]);
    assert_eq!(SdPath::new(vec![]).standardize(&a).letters(), &[SdLetter::Test(top)]);
    assert_eq!(s.len(), 2);
    assert_eq!(s.standardize(&a), s);
}

#[test]
fn prefixes_and_cuts() {
    let a = fig1_alphabet();
    let t = fig1_trace();
    assert_eq!(SdPath::top(&a).prefixes(&a), vec![SdPath::top(&a)]);
    let p = SdPath::parse(&a, "<=_4{on_3} . <=_3{on_2} . ?{on_2}").unwrap();
    let cuts = p.cuts(&a);
    assert_eq!(cuts.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![0, 1, 2]);
    let pre = p.prefixes(&a);
    assert_eq!(pre[0], SdPath::top(&a));
    assert_eq!(pre.last().unwrap(), &p.standardize(&a));
    for e in t.events() {
        let vals: Vec<Option<usize>> = cuts.iter().map(|c| c.eval(&t, e)).collect();
        for w in vals.windows(2) {
            if let (Some(x), Some(y)) = (w[0], w[1]) {
                assert!(t.leq(y, x));
            }
        }
    }
}

#[test]
fn enumeration() {
    let a = two_proc();
    let top = vec![Atomic::top(&a)];
    let one = enumerate_sdpaths(&a, &top, 1, 1, 1_000_000).unwrap();
    assert_eq!(one.len(), 2);
    let b = default_basis(&a);
    assert_eq!(b.len(), 3);
    for len in 0..3 {
        let ps = enumerate_sdpaths(&a, &b, len, len, 1_000_000).unwrap();
        // brute product of the choices: b tests, then per move k·b guards and b tests
        let mut want = b.len();
        for _ in 0..len {
            want *= a.num_processes() * b.len() * b.len();
        }
        assert_eq!(ps.len(), want);
        assert_eq!(count_sdpaths(b.len(), a.num_processes(), len), Some(want as u128));
        let set: BTreeSet<_> = ps.iter().cloned().collect();
        assert_eq!(set.len(), ps.len());
        assert!(ps.iter().all(|p| p.is_standardized() && p.len() == len));
    }
    assert!(enumerate_sdpaths(&a, &b, 3, 2, 1000).unwrap().is_empty());
    assert!(matches!(enumerate_sdpaths(&a, &[], 0, 1, 1000), Err(Error::Input(_))));
    assert!(matches!(enumerate_sdpaths(&a, &b, 0, 6, 1000), Err(Error::Resource(_))));
    let again = enumerate_sdpaths(&a, &b, 0, 2, 1_000_000).unwrap();
    assert_eq!(again, enumerate_sdpaths(&a, &b, 0, 2, 1_000_000).unwrap());
}

#[test]
fn determinism_monotonicity_and_expansion() {
    let a = three_proc();
    let b = default_basis(&a);
    let paths = enumerate_sdpaths(&a, &b, 0, 2, 1_000_000).unwrap();
    let mut f = Formulas::new(a.clone());
    let exp: Vec<_> = paths.iter().map(|p| p.to_path_formula(&mut f)).collect();
    let mut ev = Evaluator::new(&f);
    for t in traces(&a, 5) {
        ev.bind(&t).unwrap();
        for (p, &q) in paths.iter().zip(&exp) {
            let vals: Vec<Option<usize>> = t.events().map(|e| p.eval(&t, e)).collect();
            let st = p.standardize(&a);
            for e in t.events() {
                assert_eq!(vals[e], naive_eval(&t, e, p));
                assert_eq!(st.eval(&t, e), vals[e]);
                let reach = ev.post(q, 1 << e);
                assert_eq!(reach, vals[e].map_or(0, |x| 1 << x));
            }
            for e in t.events() {
                for g in t.events() {
                    if let (true, Some(x), Some(y)) = (t.leq(e, g), vals[e], vals[g]) {
                        assert!(t.leq(x, y), "{} not monotone", p.show(&a));
                    }
                }
            }
        }
    }
}

#[test]
fn local_diamonds() {
    let a = two_proc();
    let b = default_basis(&a);
    let mut f = Formulas::new(a.clone());
    for p in enumerate_sdpaths(&a, &b, 0, 2, 1_000_000).unwrap() {
        let d = p.diamond_local(&mut f);
        assert!(f.dialect_check(AnyFormula::Event(d)).is_locpastpdl());
        for t in traces(&a, 5) {
            let want: Vec<usize> = t.events().filter(|&e| p.eval(&t, e).is_some()).collect();
            assert_eq!(satisfying_events(&f, &t, d).unwrap(), want);
        }
    }
    let a = fig1_alphabet();
    let mut f = Formulas::new(a.clone());
    let p = SdPath::parse(&a, "<=_4{on_3} . <=_3{on_2}").unwrap();
    let d = p.diamond_local(&mut f);
    let q = p.to_path_formula(&mut f);
    let full = f.diamond_exists(q);
    assert_eq!(equivalent_on(&f, 4, AnyFormula::Event(d), AnyFormula::Event(full)).unwrap(), None);
    let test = SdPath::test(Atomic::letter(0).or(Atomic::letter(1)));
    let d = test.diamond_local(&mut f);
    assert_eq!(f.atom_mask(d), Some(0b11));
}

#[test]
fn yesterday_addresses() {
    let a = fig1_alphabet();
    let t = fig1_trace();
    let p = y_path(&t, 1, 10).unwrap();
    assert_eq!(p.show(&a), SdPath::parse(&a, "<=_4{on_3} . <=_3{on_2}").unwrap().show(&a));
    let p = y_path(&t, 0, 7).unwrap();
    assert!(p.len() <= 3);
    assert_eq!(p.then_test(Atomic::on(&a, 0)).eval(&t, 7), Some(3));
    assert!(matches!(y_path(&t, 3, 3), Err(Error::Precondition(_))));

    for a in [three_proc(), three_proc_sync()] {
        let ons: Vec<Atomic> = a.processes().map(|i| Atomic::on(&a, i)).collect();
        for t in traces(&a, 6) {
            for e in t.events() {
                for i in a.processes() {
                    let Some(y) = t.yesterday(i, e) else {
                        assert!(y_path(&t, i, e).is_err());
                        continue;
                    };
                    let p = y_path(&t, i, e).unwrap();
                    assert!(p.len() >= 1 && p.len() < a.num_processes());
                    assert!(p.moves().iter().all(|(_, g)| ons.contains(g)));
                    assert_eq!(p.then_test(ons[i]).eval(&t, e), Some(y));
                    if t.event(y).unwrap().ranks.iter().any(|&(j, _)| t.is_on(e, j)) {
                        assert_eq!(p.len(), 1);
                    }
                }
            }
        }
    }
}
