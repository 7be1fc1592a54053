//! Acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::*;
use elrc::inet::{build_net, inheritance_closure, inheritance_closure_entails};
use elrc::model::{is_nominal_safe_kb, Axiom, Concept, DefeasibleGci, KnowledgeBase, StrictGci};
use elrc::nominals::{
    self, defeasibilize_kb, encode_def_nominals, rank_nominal_safe, rank_via_classical, strict_entails_nominal_safe,
    strict_entails_unchecked, Closure, NominalError,
};
use elrc::normalize::normalize_kb;
use elrc::oracle::{classical_countermodel, exceptional_bounded, normality_witness, OracleBudget};
use elrc::rc::{Rank, Reasoner};

/// Per-criterion wall-clock limit.
const TIME_LIMIT: Duration = Duration::from_secs(5);
/// Limit for a single call at |D| = 20.
const CALL_LIMIT: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let r = Reasoner::new();
    let k = kb(EXINFTY);
    let rk = r.ranking(&k).map_err(|e| e.to_string())?;
    ensure(rk.tstar.contains(&s("A", "bot")) && rk.tstar.contains(&s("E", "bot")), || format!("T* = {:?}", rk.tstar))?;
    ensure(rk.cells == vec![[d("B", "C")].into()], || format!("cells {:?}", rk.cells))?;
    // two passes move axioms, the third confirms nothing is left
    let moved: Vec<usize> = rk.passes.iter().map(|p| p[p.len() - 1].len()).collect();
    ensure(moved == vec![1, 1, 0], || format!("moved per pass {moved:?}"))?;
    Ok("T* adds A <= bot, E <= bot; D0 = {B <~ C}; 2 moving passes".into())
}

fn criterion_2() -> Outcome {
    let r = Reasoner::new();
    let k = kb(BLOOD);
    let rk = r.ranking(&k).map_err(|e| e.to_string())?;
    let d0: BTreeSet<_> = [d("VRBC", "some hasCM. top"), d("VRBC", "some hasN. top")].into();
    let d1: BTreeSet<_> = [d("MRBC", "NotN")].into();
    ensure(rk.cells == vec![d0, d1], || format!("cells {:?}", rk.cells))?;
    ensure(rk.tstar == k.tbox, || "T* differs from T".into())?;
    ensure(rk.infinite.is_empty(), || "unexpected infinite ranks".into())?;
    Ok("two cells, T* = T".into())
}

fn criterion_3() -> Outcome {
    let r = Reasoner::new();
    let k = kb(BLOOD);
    let cases = [
        (d("BRBC", "some hasN. top"), false),
        (d("BRBC", "NotN"), true),
        (d("MRBC", "some hasCM. top"), false),
    ];
    for (q, want) in &cases {
        let got = r.decide(&k, q).map_err(|e| e.to_string())?.entailed;
        ensure(got == *want, || format!("{q}: got {got}"))?;
    }
    let rank = r.rank_of_concept(&k, &c("BRBC")).map_err(|e| e.to_string())?;
    ensure(rank == Rank::Finite(1), || format!("rank(BRBC) = {rank}"))?;
    Ok("3 verdicts, rank(BRBC) = 1".into())
}

fn criterion_4() -> Outcome {
    let r = Reasoner::new();
    let k = kb(BLOOD);
    let inh = |k: &KnowledgeBase, q: &DefeasibleGci| inheritance_closure_entails(&r, k, q).map_err(|e| e.to_string());
    ensure(inh(&k, &d("MRBC", "some hasCM. top"))?, || "MRBC <~ some hasCM. top not entailed".into())?;
    ensure(!inh(&k, &d("MRBC", "some hasN. top"))?, || "MRBC <~ some hasN. top entailed".into())?;
    let (nk, names) = normalize_kb(&k);
    let a1 = names
        .definitions
        .iter()
        .find(|(_, def)| **def == c("some hasN. top"))
        .map(|(n, _)| Concept::Atom(n.clone()))
        .ok_or("no name for some hasN. top")?;
    ensure(!inh(&nk, &DefeasibleGci::new(c("MRBC"), a1.clone()))?, || format!("MRBC <~ {a1} entailed"))?;

    let p = kb(PENGUIN);
    let pw = d("P", "W");
    ensure(inh(&p, &pw)?, || "P <~ W not entailed under inheritance".into())?;
    ensure(!r.decide(&p, &pw).map_err(|e| e.to_string())?.entailed, || "P <~ W entailed under RC".into())?;
    let net = build_net(&r, &normalize_kb(&p).0).map_err(|e| e.to_string())?;
    let links = net.delta_links(&c("P"), &c("W")).links;
    let want: BTreeSet<_> = [(c("P"), c("B")), (c("B"), c("W"))].into();
    ensure(links == want, || format!("Delta_P,W = {links:?}"))?;
    let closure = inheritance_closure(&r, &p, &[pw]).map_err(|e| e.to_string())?;
    Ok(format!("blood cells and penguin verdicts, Delta_P,W exact, {} axioms added", closure.added().count()))
}

fn criterion_5() -> Outcome {
    let r = Reasoner::new();
    let k = kb(NOSAFE);
    ensure(!is_nominal_safe_kb(&k), || "nosafe KB passes the safeness check".into())?;
    let gated = strict_entails_nominal_safe(&r, &k, &s("A", "B"));
    ensure(matches!(gated, Err(NominalError::NotNominalSafe(_))), || format!("gate returned {gated:?}"))?;
    // A and B are both {a}, so A <= B holds in ELO; the translation loses it
    let bypass = strict_entails_unchecked(&r, &k, &s("A", "B"), Closure::Rational).map_err(|e| e.to_string())?;
    ensure(!bypass, || "N(T) entails A <= B".into())?;
    Ok("flagged unsafe; N(T) does not entail A <= B".into())
}

fn criterion_6() -> Outcome {
    let r = Reasoner::new();
    let entails = |k: &KnowledgeBase, q: DefeasibleGci, closure| {
        nominals::entails(&r, k, &Axiom::Defeasible(q), closure).map_err(|e| e.to_string())
    };
    let abox = kb(ABOX);
    for closure in [Closure::Rational, Closure::Inheritance] {
        for (q, want) in [(d("<a>", "C"), true), (d("<b>", "C"), true), (d("<a>", "D"), false), (d("<a>", "bot"), false)] {
            let got = entails(&abox, q.clone(), closure)?;
            ensure(got == want, || format!("{q} under {closure:?}: got {got}"))?;
        }
    }
    let blood = kb(BLOOD_INDIVIDUALS);
    for (x, want) in [("<a>", Rank::Finite(1)), ("<b>", Rank::Finite(0))] {
        let got = rank_nominal_safe(&r, &blood, &c(x)).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("rank({x}) = {got}"))?;
    }
    ensure(entails(&blood, d("<a>", "NotN"), Closure::Rational)?, || "<a> <~ NotN".into())?;
    ensure(entails(&blood, d("<b>", "some hasN. top"), Closure::Rational)?, || "<b> <~ some hasN. top".into())?;
    Ok("abox verdicts under both closures, individual ranks 1 and 0".into())
}

fn criterion_7() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut slowest = Duration::ZERO;
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..200 {
        let n = rng.gen_range(1..=20usize);
        let shape = Shape { atoms: 10, roles: 2, tbox: (0, 30), dbox: (n, n), depth: 2, bot: 0.1, individuals: 0 };
        let k = random_kb(&mut rng, &shape);
        let n = k.dbox.len() as u64;

        let r = Reasoner::new();
        let start = Instant::now();
        r.ranking(&k).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        let ranking_tests = r.tests();
        ensure(ranking_tests <= n.pow(3) + n, || format!("KB {i}: ranking used {ranking_tests} tests, |D| = {n}"))?;

        let r = Reasoner::new();
        let q = DefeasibleGci::new(concept(&mut rng, &shape, 1), concept(&mut rng, &shape, 1));
        let start = Instant::now();
        r.entails(&k, &Axiom::Defeasible(q)).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        let query_tests = r.tests();
        ensure(query_tests <= n.pow(3) + 2 * n + 4, || format!("KB {i}: query used {query_tests} tests, |D| = {n}"))?;
        let bound = (n.pow(3) + 2 * n + 4) as f64;
        worst.0 = worst.0.max(ranking_tests as f64 / (n.pow(3) + n) as f64);
        worst.1 = worst.1.max(query_tests as f64 / bound);
        ensure(slowest < CALL_LIMIT, || format!("KB {i}: call took {slowest:?}"))?;
    }
    Ok(format!(
        "200 KBs; worst ratio to bound: ranking {:.3}, query {:.3}; slowest call {:?}",
        worst.0, worst.1, slowest
    ))
}

fn klm_and_ranking(k: &KnowledgeBase, r: &Reasoner, pool: &[Concept]) -> Result<(), String> {
    let err = |e: elrc::elcore::ElError| e.to_string();
    let mut rhs = pool.to_vec();
    rhs.push(Concept::Bot);
    let pairs: Vec<DefeasibleGci> =
        pool.iter().flat_map(|a| rhs.iter().map(move |b| DefeasibleGci::new(a.clone(), b.clone()))).collect();
    let m = r.entails_batch(k, &pairs).map_err(err)?;
    let holds = |i: usize, j: usize| m[i * rhs.len() + j];
    let classical = r.engine().prepare(&k.tbox, pool.iter().chain(&rhs)).map_err(err)?;

    let mut second = Vec::new();
    let mut expect = Vec::new();
    for (i, a) in pool.iter().enumerate() {
        // Ref
        let j = rhs.iter().position(|x| x == a).unwrap();
        ensure(holds(i, j), || format!("Ref fails for {a}"))?;
        for (j, b) in rhs.iter().enumerate() {
            for (l, e) in rhs.iter().enumerate() {
                // RW
                if holds(i, j) && classical.entails(b, e) {
                    ensure(holds(i, l), || format!("RW: {a} |~ {b}, {b} <= {e}, but not {a} |~ {e}"))?;
                }
                if holds(i, j) && holds(i, l) {
                    second.push(DefeasibleGci::new(a.clone(), b.and_with(e)));
                    expect.push(format!("And: {a} |~ {b} and {a} |~ {e}"));
                    second.push(DefeasibleGci::new(a.and_with(b), e.clone()));
                    expect.push(format!("CM: {a} |~ {b} and {a} |~ {e}"));
                }
            }
            // LLE: a and a & x are equivalent when T |= a <= x
            if let Some(x) = pool.get(j) {
                if classical.entails(a, x) {
                    for (l, e) in rhs.iter().enumerate() {
                        if holds(i, l) {
                            second.push(DefeasibleGci::new(a.and_with(x), e.clone()));
                            expect.push(format!("LLE: {a} |~ {e}, {a} == {a} & {x}"));
                        }
                    }
                }
            }
        }
    }
    let got = r.entails_batch(k, &second).map_err(err)?;
    for ((q, ok), why) in second.iter().zip(got).zip(expect) {
        ensure(ok, || format!("{why}, but not {q}"))?;
    }

    let rk = r.ranking(k).map_err(err)?;
    ensure(rk.cells.iter().all(|c| !c.is_empty()), || "empty cell".into())?;
    let union: BTreeSet<DefeasibleGci> = rk.cells.iter().flatten().cloned().collect();
    ensure(union.len() == rk.cells.iter().map(|c| c.len()).sum::<usize>(), || "cells overlap".into())?;
    ensure(union == rk.dstar, || "cells do not cover D*".into())?;
    ensure(rk.dstar.is_disjoint(&rk.infinite), || "D* meets infinite axioms".into())?;
    let all: BTreeSet<DefeasibleGci> = rk.dstar.union(&rk.infinite).cloned().collect();
    ensure(all == k.dbox, || "D* and infinite axioms do not cover D".into())?;
    let mut tstar = k.tbox.clone();
    tstar.extend(rk.infinite.iter().map(|d| StrictGci::new(d.lhs.clone(), Concept::Bot)));
    ensure(tstar == rk.tstar, || "T* is not T plus lhs <= bot of infinite axioms".into())?;
    for ax in k.dbox.iter() {
        let want = rk.rank_of_axiom(ax).unwrap();
        let got = r.rank_of_concept(k, &ax.lhs).map_err(err)?;
        ensure(got == want, || format!("{ax} sits at rank {want} but its lhs has rank {got}"))?;
    }
    let ranks: Vec<Rank> = pool.iter().map(|x| r.rank_of_concept(k, x)).collect::<Result<_, _>>().map_err(err)?;
    let tstar_p = r.engine().prepare(&rk.tstar, pool).map_err(err)?;
    for (i, a) in pool.iter().enumerate() {
        for (j, b) in pool.iter().enumerate() {
            if tstar_p.entails(a, b) {
                ensure(ranks[i] >= ranks[j], || format!("{a} <= {b} but rank {} < {}", ranks[i], ranks[j]))?;
            }
        }
    }
    let sat = r.is_rank_satisfiable(k).map_err(err)?;
    let top_bot = r.decide(k, &DefeasibleGci::new(Concept::Top, Concept::Bot)).map_err(err)?.entailed;
    ensure(sat != top_bot, || "rank satisfiability disagrees with top <~ bot".into())?;
    Ok(())
}

fn criterion_8() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let shape = Shape::small();
    let mut pool = atom_pool(&shape);
    pool.push(c("some r0. A0"));
    for i in 0..200 {
        let k = random_kb(&mut rng, &shape);
        klm_and_ranking(&k, &Reasoner::new(), &pool).map_err(|e| format!("KB {i}: {e}\n{k}"))?;
    }

    let deep = Shape { depth: 2, ..Shape::small() };
    let atoms = atom_pool(&deep);
    for i in 0..100 {
        let k = random_kb(&mut rng, &deep);
        let (nk, _) = normalize_kb(&k);
        let qs: Vec<DefeasibleGci> = atoms
            .iter()
            .flat_map(|a| atoms.iter().chain([&Concept::Bot]).map(move |b| DefeasibleGci::new(a.clone(), b.clone())))
            .collect();
        let r = Reasoner::new();
        let before = r.entails_batch(&k, &qs).map_err(|e| e.to_string())?;
        let after = r.entails_batch(&nk, &qs).map_err(|e| e.to_string())?;
        for ((q, x), y) in qs.iter().zip(before).zip(after) {
            ensure(x == y, || format!("normalization KB {i}: {q} was {x}, now {y}\n{k}"))?;
        }
    }

    let nominal = Shape { individuals: 2, ..Shape::small() };
    let mut done = 0;
    while done < 100 {
        let k = random_kb(&mut rng, &nominal);
        if !is_nominal_safe_kb(&k) {
            continue;
        }
        done += 1;
        let r = Reasoner::new();
        for x in ["a0", "a1"] {
            let def = rank_nominal_safe(&r, &k, &Concept::def_nominal(x)).map_err(|e| e.to_string())?;
            let cls = rank_via_classical(&r, &k, &Concept::nominal(x)).map_err(|e| e.to_string())?;
            ensure(def == cls, || format!("rank transfer: <{x}> has {def}, {{{x}}} has {cls}\n{k}"))?;
        }
        for a in &atoms {
            let def = rank_nominal_safe(&r, &k, a).map_err(|e| e.to_string())?;
            let cls = rank_via_classical(&r, &k, a).map_err(|e| e.to_string())?;
            ensure(def == cls, || format!("rank transfer: {a} has {def} and {cls}\n{k}"))?;
        }
    }
    Ok("KLM and ranking invariants on 200 KBs, normalization on 100, rank transfer on 100".into())
}

fn differential(k: &KnowledgeBase, extra: &[Concept], budget: &OracleBudget) -> Result<(usize, usize), String> {
    let r = Reasoner::new();
    let mut concepts: BTreeSet<Concept> = k.dbox.iter().map(|g| g.lhs.clone()).collect();
    concepts.extend(elrc::model::signature(k).atoms.into_iter().map(Concept::Atom));
    concepts.extend(extra.iter().cloned());
    let (mut checks, mut exceptional) = (0, 0);
    for x in &concepts {
        let by_rank = r.rank_of_concept(k, x).map_err(|e| e.to_string())? != Rank::Finite(0);
        let by_models = exceptional_bounded(k, x, budget).map_err(|e| e.to_string())?;
        if by_rank != by_models {
            let witness = normality_witness(k, x, budget).ok().flatten();
            let shown = witness.map(|m| m.to_string()).unwrap_or_else(|| "no model with a typical instance".into());
            return Err(format!("{x}: rank test {by_rank}, models {by_models}\n{k}\n{shown}"));
        }
        checks += 1;
        exceptional += by_rank as usize;
    }
    let lhs: Vec<&Concept> = concepts.iter().chain([&Concept::Top]).collect();
    let rhs: Vec<&Concept> = concepts.iter().chain([&Concept::Bot]).collect();
    for a in &lhs {
        for b in &rhs {
            let q = StrictGci::new((*a).clone(), (*b).clone());
            let proved = r.engine().entails(&k.tbox, &q).map_err(|e| e.to_string())?;
            let counter = classical_countermodel(&k.tbox, &q, budget).map_err(|e| e.to_string())?;
            if proved == counter.is_some() {
                let shown = counter.map(|m| m.to_string()).unwrap_or_else(|| "no countermodel".into());
                return Err(format!("{q}: entailed {proved}\n{k}\n{shown}"));
            }
            checks += 1;
        }
    }
    Ok((checks, exceptional))
}

fn criterion_9() -> Outcome {
    let budget = OracleBudget::with_domain(3);
    let encode = |t: &str| encode_def_nominals(&defeasibilize_kb(&kb(t)));
    let examples = [kb(BLOOD), kb(EXINFTY), kb(PENGUIN), encode(ABOX), encode(BLOOD_INDIVIDUALS)];
    let (mut checks, mut exceptional) = (0, 0);
    for k in &examples {
        let (n, e) = differential(k, &[], &budget)?;
        checks += n;
        exceptional += e;
    }
    let mut rng = StdRng::seed_from_u64(9);
    let shape = Shape::tiny();
    let extra: Vec<Concept> = (0..shape.atoms).map(|i| c(&format!("some r0. A{i}"))).collect();
    for _ in 0..100 {
        let k = random_kb(&mut rng, &shape);
        let (n, e) = differential(&k, &extra, &budget)?;
        checks += n;
        exceptional += e;
    }
    Ok(format!("{checks} checks ({exceptional} exceptional concepts) on 5 example KBs and 100 tiny KBs, domain <= 3"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("ranking trace, exinfty", criterion_1, TIME_LIMIT),
        ("ranking trace, blood cells", criterion_2, TIME_LIMIT),
        ("rational closure verdicts", criterion_3, TIME_LIMIT),
        ("inheritance verdicts", criterion_4, TIME_LIMIT),
        ("nominal safety", criterion_5, TIME_LIMIT),
        ("defeasible nominals", criterion_6, TIME_LIMIT),
        // bounded per call inside the criterion
        ("subsumption test counts", criterion_7, Duration::MAX),
        ("property suites", criterion_8, Duration::MAX),
        ("oracle differential", criterion_9, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = run();
        let took = start.elapsed();
        if outcome.is_ok() && took > *limit {
            outcome = Err(format!("took {took:?}, limit {limit:?}"));
        }
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({took:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
