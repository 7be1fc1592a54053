//! Rational closure over EL-bottom: exceptionality through delta atoms, the
//! ranking fixpoint, and the defeasible subsumption decision procedure.

use std::cmp::Ordering as CmpOrdering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::elcore::{ElEngine, ElError};
use crate::model::{
    signature, Axiom, Concept, DefeasibleGci, FreshNameSource, KnowledgeBase, Name, Namespace, Signature,
    StrictGci,
};

/// `T` extended with `E & delta <= F` for every `E <~ F` of a set of defeasible axioms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TDeltaEncoding {
    pub delta_atom: Name,
    pub tbox: BTreeSet<StrictGci>,
}

impl TDeltaEncoding {
    pub fn delta(&self) -> Concept {
        Concept::Atom(self.delta_atom.clone())
    }

    /// `c & delta`
    pub fn guard(&self, c: &Concept) -> Concept {
        c.and_with(&self.delta())
    }
}

pub fn build_t_delta<'a>(
    t: &BTreeSet<StrictGci>,
    eset: impl IntoIterator<Item = &'a DefeasibleGci>,
    fresh: &mut FreshNameSource,
) -> TDeltaEncoding {
    let delta_atom = fresh.fresh_atom();
    let delta = Concept::Atom(delta_atom.clone());
    let mut tbox = t.clone();
    for d in eset {
        tbox.insert(StrictGci::new(d.lhs.and_with(&delta), d.rhs.clone()));
    }
    TDeltaEncoding { delta_atom, tbox }
}

/// Rank of a concept or axiom; `Infinite` is above every finite value.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Rank {
    Finite(u32),
    Infinite,
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        match (self, other) {
            (Rank::Finite(a), Rank::Finite(b)) => a.cmp(b),
            (Rank::Finite(_), Rank::Infinite) => CmpOrdering::Less,
            (Rank::Infinite, Rank::Finite(_)) => CmpOrdering::Greater,
            (Rank::Infinite, Rank::Infinite) => CmpOrdering::Equal,
        }
    }
}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Finite(i) => write!(f, "{i}"),
            Rank::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ranking {
    pub tstar: BTreeSet<StrictGci>,
    pub dstar: BTreeSet<DefeasibleGci>,
    /// `D_0 .. D_n`, all non-empty.
    pub cells: Vec<BTreeSet<DefeasibleGci>>,
    /// Axioms of infinite rank, moved into `tstar` as `lhs <= bot`.
    pub infinite: BTreeSet<DefeasibleGci>,
    /// The chain `E_0, E_1, ..` computed in each pass of the outer loop.
    pub passes: Vec<Vec<BTreeSet<DefeasibleGci>>>,
}

impl Ranking {
    /// Axioms of cells `i..`; empty when `i` is past the last cell.
    pub fn from_level(&self, i: usize) -> impl Iterator<Item = &DefeasibleGci> {
        self.cells.iter().skip(i).flatten()
    }

    pub fn rank_of_axiom(&self, d: &DefeasibleGci) -> Option<Rank> {
        if self.infinite.contains(d) {
            return Some(Rank::Infinite);
        }
        self.cells.iter().position(|c| c.contains(d)).map(|i| Rank::Finite(i as u32))
    }
}

fn check_kb(kb: &KnowledgeBase) -> Result<(), ElError> {
    match kb.concepts().find(|c| c.has_nominals() || c.has_def_nominals()) {
        Some(c) => Err(ElError::Nominal(c.to_string())),
        None => Ok(()),
    }
}

/// The axioms of `eset` whose left side is exceptional w.r.t. `<t, eset>`.
pub fn exceptional(
    engine: &ElEngine,
    t: &BTreeSet<StrictGci>,
    eset: &BTreeSet<DefeasibleGci>,
    fresh: &mut FreshNameSource,
) -> Result<BTreeSet<DefeasibleGci>, ElError> {
    if eset.is_empty() {
        return Ok(BTreeSet::new());
    }
    let enc = build_t_delta(t, eset, fresh);
    let guarded: Vec<Concept> = eset.iter().map(|d| enc.guard(&d.lhs)).collect();
    let p = engine.prepare(&enc.tbox, &guarded)?;
    Ok(eset
        .iter()
        .zip(&guarded)
        .filter(|(_, g)| p.entails(g, &Concept::Bot))
        .map(|(d, _)| d.clone())
        .collect())
}

pub fn compute_ranking(
    engine: &ElEngine,
    kb: &KnowledgeBase,
    fresh: &mut FreshNameSource,
) -> Result<Ranking, ElError> {
    check_kb(kb)?;
    fresh.skip_past(&signature(kb));
    let mut tstar = kb.tbox.clone();
    let mut dstar = kb.dbox.clone();
    let mut infinite = BTreeSet::new();
    let mut passes = Vec::new();
    loop {
        let mut chain = vec![dstar.clone()];
        chain.push(exceptional(engine, &tstar, &chain[0], fresh)?);
        let mut i = 0;
        while chain[i + 1] != chain[i] {
            i += 1;
            let next = exceptional(engine, &tstar, &chain[i], fresh)?;
            chain.push(next);
        }
        let d_inf = chain[i].clone();
        for d in &d_inf {
            dstar.remove(d);
            tstar.insert(StrictGci::new(d.lhs.clone(), Concept::Bot));
            infinite.insert(d.clone());
        }
        passes.push(chain);
        if d_inf.is_empty() {
            break;
        }
    }
    let last = passes.last().unwrap();
    let cells = (1..last.len() - 1).map(|j| &last[j - 1] - &last[j]).collect();
    Ok(Ranking { tstar, dstar, cells, infinite, passes })
}

/// How a defeasible query was decided.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Stage {
    /// `T |= C <= D`
    Classical,
    /// `T* |= C <= D`
    StrictKnowledge,
    /// Decided with the defeasible axioms from the rank of `C` upwards.
    Level(u32),
    /// `C` has infinite rank; the classical answer stands.
    Fallback,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Decision {
    pub entailed: bool,
    pub stage: Stage,
}

impl Decision {
    /// The rank of the query's left side, when the procedure determined it.
    pub fn rank(&self) -> Option<Rank> {
        match self.stage {
            Stage::Level(i) => Some(Rank::Finite(i)),
            Stage::Fallback => Some(Rank::Infinite),
            _ => None,
        }
    }
}

/// Runs the rank search for the pending queries, level by level.
fn decide_levels(
    engine: &ElEngine,
    r: &Ranking,
    queries: &[(Concept, Option<Concept>)],
    fresh: &mut FreshNameSource,
) -> Result<Vec<(Rank, bool)>, ElError> {
    let mut out: Vec<Option<(Rank, bool)>> = vec![None; queries.len()];
    for i in 0..=r.cells.len() {
        let pending: Vec<usize> = (0..queries.len()).filter(|&k| out[k].is_none()).collect();
        if pending.is_empty() {
            break;
        }
        let enc = build_t_delta(&r.tstar, r.from_level(i), fresh);
        let mut concepts = Vec::new();
        for &k in &pending {
            concepts.push(enc.guard(&queries[k].0));
            concepts.extend(queries[k].1.clone());
        }
        let p = engine.prepare(&enc.tbox, &concepts)?;
        for &k in &pending {
            let (c, d) = &queries[k];
            let g = enc.guard(c);
            if !p.entails(&g, &Concept::Bot) {
                let entailed = d.as_ref().is_some_and(|d| p.entails(&g, d));
                out[k] = Some((Rank::Finite(i as u32), entailed));
            } else if i == r.cells.len() {
                out[k] = Some((Rank::Infinite, false));
            }
        }
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

pub fn rank_of_concept(
    engine: &ElEngine,
    r: &Ranking,
    c: &Concept,
    fresh: &mut FreshNameSource,
) -> Result<Rank, ElError> {
    Ok(decide_levels(engine, r, &[(c.clone(), None)], fresh)?[0].0)
}

/// Decides a batch of defeasible queries against `kb` whose ranking is `r`.
pub fn decide_defeasible(
    engine: &ElEngine,
    kb: &KnowledgeBase,
    r: &Ranking,
    qs: &[DefeasibleGci],
    fresh: &mut FreshNameSource,
) -> Result<Vec<Decision>, ElError> {
    let mut out: Vec<Option<Decision>> = vec![None; qs.len()];
    for q in qs {
        if q.lhs.has_nominals() || q.lhs.has_def_nominals() || q.rhs.has_nominals() || q.rhs.has_def_nominals() {
            return Err(ElError::Nominal(q.to_string()));
        }
    }
    let sides: Vec<&Concept> = qs.iter().flat_map(|q| [&q.lhs, &q.rhs]).collect();
    for (t, stage) in [(&kb.tbox, Stage::Classical), (&r.tstar, Stage::StrictKnowledge)] {
        let p = engine.prepare(t, sides.iter().copied())?;
        for (k, q) in qs.iter().enumerate() {
            if out[k].is_none() && p.entails(&q.lhs, &q.rhs) {
                out[k] = Some(Decision { entailed: true, stage });
            }
        }
    }
    let pending: Vec<usize> = (0..qs.len()).filter(|&k| out[k].is_none()).collect();
    let level_qs: Vec<(Concept, Option<Concept>)> =
        pending.iter().map(|&k| (qs[k].lhs.clone(), Some(qs[k].rhs.clone()))).collect();
    for (&k, (rank, entailed)) in pending.iter().zip(decide_levels(engine, r, &level_qs, fresh)?) {
        out[k] = Some(match rank {
            Rank::Finite(i) => Decision { entailed, stage: Stage::Level(i) },
            Rank::Infinite => Decision { entailed: false, stage: Stage::Fallback },
        });
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

/// Rational closure reasoner: owns the counted EL engine, the delta name
/// supply and a ranking cache keyed by KB.
#[derive(Debug)]
pub struct Reasoner {
    engine: ElEngine,
    deltas: Mutex<FreshNameSource>,
    rankings: Mutex<HashMap<KnowledgeBase, Arc<Ranking>>>,
    pub(crate) closures: Mutex<HashMap<KnowledgeBase, Arc<BTreeSet<DefeasibleGci>>>>,
}

impl Default for Reasoner {
    fn default() -> Self {
        Reasoner {
            engine: ElEngine::new(),
            deltas: Mutex::new(FreshNameSource::new(Namespace::Delta)),
            rankings: Mutex::new(HashMap::new()),
            closures: Mutex::new(HashMap::new()),
        }
    }
}

impl Reasoner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn engine(&self) -> &ElEngine {
        &self.engine
    }

    /// Number of classical entailment tests answered so far.
    pub fn tests(&self) -> u64 {
        self.engine.calls()
    }

    pub fn read_and_reset_counter(&self) -> u64 {
        self.engine.read_and_reset_counter()
    }

    fn with_fresh<T>(&self, sig: &Signature, f: impl FnOnce(&mut FreshNameSource) -> T) -> T {
        let mut fresh = self.deltas.lock().unwrap();
        fresh.skip_past(sig);
        f(&mut fresh)
    }

    pub fn exceptional(
        &self,
        t: &BTreeSet<StrictGci>,
        eset: &BTreeSet<DefeasibleGci>,
    ) -> Result<BTreeSet<DefeasibleGci>, ElError> {
        let kb = KnowledgeBase { tbox: t.clone(), dbox: eset.clone() };
        check_kb(&kb)?;
        self.with_fresh(&signature(&kb), |fresh| exceptional(&self.engine, t, eset, fresh))
    }

    /// The ranking of `kb`, computed once per distinct KB.
    pub fn ranking(&self, kb: &KnowledgeBase) -> Result<Arc<Ranking>, ElError> {
        if let Some(r) = self.rankings.lock().unwrap().get(kb) {
            return Ok(r.clone());
        }
        let r = Arc::new(self.with_fresh(&signature(kb), |fresh| compute_ranking(&self.engine, kb, fresh))?);
        self.rankings.lock().unwrap().insert(kb.clone(), r.clone());
        Ok(r)
    }

    pub fn clear_cache(&self) {
        self.rankings.lock().unwrap().clear();
        self.closures.lock().unwrap().clear();
    }

    fn query_signature(kb: &KnowledgeBase, concepts: &[&Concept]) -> Signature {
        let mut sig = signature(kb);
        concepts.iter().for_each(|c| sig.add_concept(c));
        sig
    }

    pub fn rank_of_concept(&self, kb: &KnowledgeBase, c: &Concept) -> Result<Rank, ElError> {
        let r = self.ranking(kb)?;
        if c.has_nominals() || c.has_def_nominals() {
            return Err(ElError::Nominal(c.to_string()));
        }
        let sig = Self::query_signature(kb, &[c]);
        self.with_fresh(&sig, |fresh| rank_of_concept(&self.engine, &r, c, fresh))
    }

    pub fn decide(&self, kb: &KnowledgeBase, q: &DefeasibleGci) -> Result<Decision, ElError> {
        Ok(self.decide_batch(kb, std::slice::from_ref(q))?[0])
    }

    pub fn decide_batch(&self, kb: &KnowledgeBase, qs: &[DefeasibleGci]) -> Result<Vec<Decision>, ElError> {
        check_kb(kb)?;
        let r = self.ranking(kb)?;
        let sides: Vec<&Concept> = qs.iter().flat_map(|q| [&q.lhs, &q.rhs]).collect();
        let sig = Self::query_signature(kb, &sides);
        self.with_fresh(&sig, |fresh| decide_defeasible(&self.engine, kb, &r, qs, fresh))
    }

    /// Is the axiom in the rational closure of `kb`? Strict axioms are
    /// checked against `T*`.
    pub fn entails(&self, kb: &KnowledgeBase, q: &Axiom) -> Result<bool, ElError> {
        match q {
            Axiom::Strict(g) => {
                let r = self.ranking(kb)?;
                self.engine.entails(&r.tstar, g)
            }
            Axiom::Defeasible(g) => Ok(self.decide(kb, g)?.entailed),
        }
    }

    pub fn entails_batch(&self, kb: &KnowledgeBase, qs: &[DefeasibleGci]) -> Result<Vec<bool>, ElError> {
        Ok(self.decide_batch(kb, qs)?.into_iter().map(|d| d.entailed).collect())
    }

    pub fn is_rank_satisfiable(&self, kb: &KnowledgeBase) -> Result<bool, ElError> {
        let r = self.ranking(kb)?;
        Ok(!self.engine.entails(&r.tstar, &StrictGci::new(Concept::Top, Concept::Bot))?)
    }
}

/// One-shot helper with a private reasoner.
pub fn rational_closure_entails(kb: &KnowledgeBase, q: &Axiom) -> Result<bool, ElError> {
    Reasoner::new().entails(kb, q)
}

pub fn is_rank_satisfiable(kb: &KnowledgeBase) -> Result<bool, ElError> {
    Reasoner::new().is_rank_satisfiable(kb)
}
