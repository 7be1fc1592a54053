//! Nominals. Classical nominals `{a}` are handled through the `N(.)`
//! translation to atoms `N_a`, which is exact for nominal-safe KBs.
//! Defeasible nominals `<a>` are treated as fresh atoms `D_a`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::elcore::ElError;
use crate::inet::{inheritance_closure_entails, inheritance_closure_entails_strict};
use crate::model::{
    is_safe_axiom, unsafe_axioms, Axiom, Concept, DefeasibleGci, KnowledgeBase, Name, Namespace, StrictGci,
};
use crate::rc::{Decision, Rank, Reasoner};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NominalError {
    #[error("not nominal safe: {0}")]
    NotNominalSafe(Axiom),
    #[error("defeasible query `{0}` uses a classical nominal; write <a> instead of {{a}}")]
    ClassicalNominalInDefeasibleQuery(DefeasibleGci),
    #[error(transparent)]
    El(#[from] ElError),
}

/// Which defeasible closure answers defeasible queries.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Closure {
    #[default]
    Rational,
    Inheritance,
}

/// Individual to image atom, for both kinds of nominals.
#[derive(Clone, Default, Debug, PartialEq, Eq)]
pub struct NominalImageMap {
    pub classical: BTreeMap<Name, Name>,
    pub defeasible: BTreeMap<Name, Name>,
    inverse_classical: BTreeMap<Name, Name>,
    inverse_defeasible: BTreeMap<Name, Name>,
}

impl NominalImageMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers every individual occurring in `concepts`.
    pub fn register<'a>(&mut self, concepts: impl IntoIterator<Item = &'a Concept>) {
        for c in concepts {
            c.walk(&mut |x| match x {
                Concept::Nominal(a) => {
                    let n = Namespace::Nom.individual_atom(a);
                    self.inverse_classical.insert(n.clone(), a.clone());
                    self.classical.insert(a.clone(), n);
                }
                Concept::DefNominal(a) => {
                    let n = Namespace::DefNom.individual_atom(a);
                    self.inverse_defeasible.insert(n.clone(), a.clone());
                    self.defeasible.insert(a.clone(), n);
                }
                _ => {}
            });
        }
    }

    pub fn for_kb(kb: &KnowledgeBase) -> Self {
        let mut m = Self::new();
        m.register(kb.concepts());
        m
    }

    /// Maps image atoms back to `{a}` and `<a>`.
    pub fn decode(&self, c: &Concept) -> Concept {
        c.map(&|x| match x {
            Concept::Atom(n) => self
                .inverse_classical
                .get(n)
                .map(|a| Concept::Nominal(a.clone()))
                .or_else(|| self.inverse_defeasible.get(n).map(|a| Concept::DefNominal(a.clone()))),
            _ => None,
        })
    }
}

fn n_atom(a: &Name) -> Concept {
    Concept::Atom(Namespace::Nom.individual_atom(a))
}

fn d_atom(a: &Name) -> Concept {
    Concept::Atom(Namespace::DefNom.individual_atom(a))
}

/// `N(c)`: every `{a}` becomes `N_a`.
pub fn n_translate(c: &Concept) -> Concept {
    c.map(&|x| match x {
        Concept::Nominal(a) => Some(n_atom(a)),
        _ => None,
    })
}

pub fn n_translate_kb(kb: &KnowledgeBase) -> KnowledgeBase {
    kb.map(&|x| match x {
        Concept::Nominal(a) => Some(n_atom(a)),
        _ => None,
    })
}

pub fn n_translate_gci(g: &StrictGci) -> StrictGci {
    StrictGci::new(n_translate(&g.lhs), n_translate(&g.rhs))
}

fn to_defeasible(x: &Concept) -> Option<Concept> {
    match x {
        Concept::Nominal(a) => Some(Concept::DefNominal(a.clone())),
        _ => None,
    }
}

fn to_classical(x: &Concept) -> Option<Concept> {
    match x {
        Concept::DefNominal(a) => Some(Concept::Nominal(a.clone())),
        _ => None,
    }
}

/// `{a}` to `<a>` everywhere.
pub fn defeasibilize(c: &Concept) -> Concept {
    c.map(&to_defeasible)
}

/// `<a>` to `{a}` everywhere.
pub fn classicalize(c: &Concept) -> Concept {
    c.map(&to_classical)
}

pub fn defeasibilize_kb(kb: &KnowledgeBase) -> KnowledgeBase {
    kb.map(&to_defeasible)
}

pub fn classicalize_kb(kb: &KnowledgeBase) -> KnowledgeBase {
    kb.map(&to_classical)
}

pub fn classicalize_axiom(ax: &Axiom) -> Axiom {
    ax.map(&to_classical)
}

/// Every `<a>` becomes the atom `D_a`.
pub fn encode_def_nominals(kb: &KnowledgeBase) -> KnowledgeBase {
    kb.map(&encode_concept_map)
}

fn encode_concept_map(x: &Concept) -> Option<Concept> {
    match x {
        Concept::DefNominal(a) => Some(d_atom(a)),
        _ => None,
    }
}

pub fn encode_def_nominal_concept(c: &Concept) -> Concept {
    c.map(&encode_concept_map)
}

fn check_safe(kb: &KnowledgeBase, q: Option<&Axiom>) -> Result<(), NominalError> {
    if let Some(ax) = unsafe_axioms(kb).into_iter().next() {
        return Err(NominalError::NotNominalSafe(ax));
    }
    match q {
        Some(q) if !is_safe_axiom(q) => Err(NominalError::NotNominalSafe(q.clone())),
        _ => Ok(()),
    }
}

/// Is the safe strict axiom `q` entailed by the nominal-safe `kb`?
pub fn strict_entails_nominal_safe(reasoner: &Reasoner, kb: &KnowledgeBase, q: &StrictGci) -> Result<bool, NominalError> {
    check_safe(kb, Some(&Axiom::Strict(q.clone())))?;
    strict_entails_unchecked(reasoner, kb, q, Closure::Rational)
}

/// The `N(.)` pipeline without the safeness gate. On unsafe input the answer
/// may be wrong; this exists for tests that exhibit exactly that.
pub fn strict_entails_unchecked(
    reasoner: &Reasoner,
    kb: &KnowledgeBase,
    q: &StrictGci,
    closure: Closure,
) -> Result<bool, NominalError> {
    let nkb = n_translate_kb(&classicalize_kb(kb));
    let nq = n_translate_gci(&StrictGci::new(classicalize(&q.lhs), classicalize(&q.rhs)));
    Ok(match closure {
        Closure::Rational => reasoner.entails(&nkb, &Axiom::Strict(nq))?,
        Closure::Inheritance => inheritance_closure_entails_strict(reasoner, &nkb, &nq)?,
    })
}

fn check_defeasible_query(q: &DefeasibleGci) -> Result<(), NominalError> {
    if q.lhs.has_nominals() || q.rhs.has_nominals() {
        Err(NominalError::ClassicalNominalInDefeasibleQuery(q.clone()))
    } else {
        Ok(())
    }
}

/// The encoded KB and query used to answer defeasible queries.
pub fn encode_defeasible(kb: &KnowledgeBase, q: &DefeasibleGci) -> (KnowledgeBase, DefeasibleGci) {
    let ekb = encode_def_nominals(&defeasibilize_kb(kb));
    let eq = DefeasibleGci::new(encode_def_nominal_concept(&q.lhs), encode_def_nominal_concept(&q.rhs));
    (ekb, eq)
}

pub fn defeasible_entails_nominal_safe(
    reasoner: &Reasoner,
    kb: &KnowledgeBase,
    q: &DefeasibleGci,
    closure: Closure,
) -> Result<bool, NominalError> {
    check_defeasible_query(q)?;
    check_safe(kb, Some(&Axiom::Defeasible(q.clone())))?;
    let (ekb, eq) = encode_defeasible(kb, q);
    Ok(match closure {
        Closure::Rational => reasoner.decide(&ekb, &eq)?.entailed,
        Closure::Inheritance => inheritance_closure_entails(reasoner, &ekb, &eq)?,
    })
}

/// Rational closure decision for a defeasible query, with the stage that settled it.
pub fn decide(reasoner: &Reasoner, kb: &KnowledgeBase, q: &DefeasibleGci) -> Result<Decision, NominalError> {
    check_defeasible_query(q)?;
    check_safe(kb, Some(&Axiom::Defeasible(q.clone())))?;
    let (ekb, eq) = encode_defeasible(kb, q);
    Ok(reasoner.decide(&ekb, &eq)?)
}

/// Entry point for any query against any supported KB.
pub fn entails(reasoner: &Reasoner, kb: &KnowledgeBase, q: &Axiom, closure: Closure) -> Result<bool, NominalError> {
    match q {
        Axiom::Strict(g) => {
            check_safe(kb, Some(q))?;
            strict_entails_unchecked(reasoner, kb, g, closure)
        }
        Axiom::Defeasible(g) => defeasible_entails_nominal_safe(reasoner, kb, g, closure),
    }
}

/// Rank of an n-safe concept, with nominals read as defeasible nominals.
pub fn rank_nominal_safe(reasoner: &Reasoner, kb: &KnowledgeBase, c: &Concept) -> Result<Rank, NominalError> {
    check_safe(kb, None)?;
    let ekb = encode_def_nominals(&defeasibilize_kb(kb));
    let ec = encode_def_nominal_concept(&defeasibilize(c));
    Ok(reasoner.rank_of_concept(&ekb, &ec)?)
}

/// Rank of an n-safe concept through the classical `N(.)` translation.
pub fn rank_via_classical(reasoner: &Reasoner, kb: &KnowledgeBase, c: &Concept) -> Result<Rank, NominalError> {
    check_safe(kb, None)?;
    let nkb = n_translate_kb(&classicalize_kb(kb));
    Ok(reasoner.rank_of_concept(&nkb, &n_translate(&classicalize(c)))?)
}

/// Individuals `a` with `N(T) |= N_a <= bot`; any of them makes the TBox unsatisfiable.
pub fn unsatisfiable_individuals(reasoner: &Reasoner, kb: &KnowledgeBase) -> Result<Vec<Name>, NominalError> {
    let ckb = classicalize_kb(kb);
    let m = NominalImageMap::for_kb(&ckb);
    let nkb = n_translate_kb(&ckb);
    let atoms: Vec<Concept> = m.classical.keys().map(n_atom).collect();
    let p = reasoner.engine().prepare(&nkb.tbox, &atoms)?;
    Ok(m.classical
        .keys()
        .zip(&atoms)
        .filter(|(_, n)| p.entails(n, &Concept::Bot))
        .map(|(a, _)| a.clone())
        .collect())
}
