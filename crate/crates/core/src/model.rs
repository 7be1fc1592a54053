//! Concept terms, axioms and knowledge bases for EL-bottom with classical
//! nominals `{a}` and defeasible nominals `<a>`.
//!
//! Concepts are plain algebraic values. Conjunction is n-ary and
//! [`Concept::canonical`] flattens, sorts and deduplicates it, so two
//! concepts that only differ by associativity, commutativity or idempotence
//! of `&` compare equal after canonicalization. Every constructor on
//! [`KnowledgeBase`] stores canonical axioms.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Prefix reserved for generated atoms. User input may never use it.
pub const RESERVED_PREFIX: &str = "__rc.";

/// An interned-by-refcount symbol (atom, role or individual name).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_reserved(&self) -> bool {
        self.0.starts_with(RESERVED_PREFIX)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl From<String> for Name {
    fn from(s: String) -> Self {
        Name(Arc::from(s))
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Concept {
    Top,
    Bot,
    Atom(Name),
    /// n-ary conjunction; canonical form has at least two operands.
    And(Vec<Concept>),
    Exists(Name, Box<Concept>),
    Nominal(Name),
    DefNominal(Name),
}

impl Concept {
    pub fn atom(name: impl Into<Name>) -> Self {
        Concept::Atom(name.into())
    }

    pub fn exists(role: impl Into<Name>, filler: Concept) -> Self {
        Concept::Exists(role.into(), Box::new(filler))
    }

    pub fn nominal(individual: impl Into<Name>) -> Self {
        Concept::Nominal(individual.into())
    }

    pub fn def_nominal(individual: impl Into<Name>) -> Self {
        Concept::DefNominal(individual.into())
    }

    /// Canonical conjunction of the given operands.
    pub fn and(operands: impl IntoIterator<Item = Concept>) -> Self {
        Concept::And(operands.into_iter().collect()).canonical()
    }

    /// Canonical conjunction of `self` and `other`.
    pub fn and_with(&self, other: &Concept) -> Self {
        Concept::and([self.clone(), other.clone()])
    }

    /// Flattened, sorted, duplicate-free form.
    ///
    /// Besides associativity, commutativity and idempotence this also drops
    /// `top` operands and collapses conjunctions containing `bot`, and
    /// rewrites `some r. bot` to `bot`.
    pub fn canonical(&self) -> Concept {
        match self {
            Concept::And(ops) => {
                let mut flat = BTreeSet::new();
                for op in ops {
                    match op.canonical() {
                        Concept::And(inner) => flat.extend(inner),
                        Concept::Top => {}
                        Concept::Bot => return Concept::Bot,
                        c => {
                            flat.insert(c);
                        }
                    }
                }
                let mut flat: Vec<Concept> = flat.into_iter().collect();
                match flat.len() {
                    0 => Concept::Top,
                    1 => flat.pop().unwrap(),
                    _ => Concept::And(flat),
                }
            }
            Concept::Exists(r, filler) => match filler.canonical() {
                Concept::Bot => Concept::Bot,
                f => Concept::Exists(r.clone(), Box::new(f)),
            },
            c => c.clone(),
        }
    }

    /// Atom, `top` or `bot`.
    pub fn is_basic(&self) -> bool {
        matches!(self, Concept::Top | Concept::Bot | Concept::Atom(_))
    }

    pub fn as_atom(&self) -> Option<&Name> {
        match self {
            Concept::Atom(n) => Some(n),
            _ => None,
        }
    }

    /// Pre-order traversal over all subconcepts, including `self`.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Concept)) {
        f(self);
        match self {
            Concept::And(ops) => ops.iter().for_each(|c| c.walk(f)),
            Concept::Exists(_, filler) => filler.walk(f),
            _ => {}
        }
    }

    /// Bottom-up rewrite of every subconcept. The result is canonicalized.
    pub fn map(&self, f: &impl Fn(&Concept) -> Option<Concept>) -> Concept {
        self.map_inner(f).canonical()
    }

    fn map_inner(&self, f: &impl Fn(&Concept) -> Option<Concept>) -> Concept {
        if let Some(replacement) = f(self) {
            return replacement;
        }
        match self {
            Concept::And(ops) => Concept::And(ops.iter().map(|c| c.map_inner(f)).collect()),
            Concept::Exists(r, filler) => Concept::Exists(r.clone(), Box::new(filler.map_inner(f))),
            c => c.clone(),
        }
    }

    pub fn has_nominals(&self) -> bool {
        self.any(|c| matches!(c, Concept::Nominal(_)))
    }

    pub fn has_def_nominals(&self) -> bool {
        self.any(|c| matches!(c, Concept::DefNominal(_)))
    }

    pub fn any(&self, pred: impl Fn(&Concept) -> bool) -> bool {
        let mut found = false;
        self.walk(&mut |c| found |= pred(c));
        found
    }

    /// Number of constructors in the term.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    fn fmt_primary(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Concept::And(_) => write!(f, "({})", self),
            c => write!(f, "{}", c),
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Concept::Top => f.write_str("top"),
            Concept::Bot => f.write_str("bot"),
            Concept::Atom(n) => write!(f, "{}", n),
            Concept::And(ops) => {
                for (i, op) in ops.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    op.fmt_primary(f)?;
                }
                Ok(())
            }
            Concept::Exists(r, filler) => {
                write!(f, "some {}. ", r)?;
                filler.fmt_primary(f)
            }
            Concept::Nominal(a) => write!(f, "{{{}}}", a),
            Concept::DefNominal(a) => write!(f, "<{}>", a),
        }
    }
}

/// Strict inclusion `lhs <= rhs`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct StrictGci {
    pub lhs: Concept,
    pub rhs: Concept,
}

/// Defeasible inclusion `lhs <~ rhs`: typical `lhs` are `rhs`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DefeasibleGci {
    pub lhs: Concept,
    pub rhs: Concept,
}

impl StrictGci {
    /// Builds a canonical strict GCI.
    pub fn new(lhs: Concept, rhs: Concept) -> Self {
        StrictGci { lhs: lhs.canonical(), rhs: rhs.canonical() }
    }

    pub fn map(&self, f: &impl Fn(&Concept) -> Option<Concept>) -> Self {
        StrictGci { lhs: self.lhs.map(f), rhs: self.rhs.map(f) }
    }
}

impl DefeasibleGci {
    pub fn new(lhs: Concept, rhs: Concept) -> Self {
        DefeasibleGci { lhs: lhs.canonical(), rhs: rhs.canonical() }
    }

    pub fn map(&self, f: &impl Fn(&Concept) -> Option<Concept>) -> Self {
        DefeasibleGci { lhs: self.lhs.map(f), rhs: self.rhs.map(f) }
    }

    /// The classical reading `lhs <= rhs`.
    pub fn as_strict(&self) -> StrictGci {
        StrictGci { lhs: self.lhs.clone(), rhs: self.rhs.clone() }
    }
}

impl fmt::Display for StrictGci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <= {}", self.lhs, self.rhs)
    }
}

impl fmt::Display for DefeasibleGci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <~ {}", self.lhs, self.rhs)
    }
}

/// Either kind of axiom; used for queries and error reports.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Axiom {
    Strict(StrictGci),
    Defeasible(DefeasibleGci),
}

impl Axiom {
    pub fn lhs(&self) -> &Concept {
        match self {
            Axiom::Strict(g) => &g.lhs,
            Axiom::Defeasible(g) => &g.lhs,
        }
    }

    pub fn rhs(&self) -> &Concept {
        match self {
            Axiom::Strict(g) => &g.rhs,
            Axiom::Defeasible(g) => &g.rhs,
        }
    }

    pub fn map(&self, f: &impl Fn(&Concept) -> Option<Concept>) -> Self {
        match self {
            Axiom::Strict(g) => Axiom::Strict(g.map(f)),
            Axiom::Defeasible(g) => Axiom::Defeasible(g.map(f)),
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axiom::Strict(g) => g.fmt(f),
            Axiom::Defeasible(g) => g.fmt(f),
        }
    }
}

/// A strict TBox plus a defeasible DBox.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct KnowledgeBase {
    pub tbox: BTreeSet<StrictGci>,
    pub dbox: BTreeSet<DefeasibleGci>,
}

impl KnowledgeBase {
    pub fn new(
        tbox: impl IntoIterator<Item = StrictGci>,
        dbox: impl IntoIterator<Item = DefeasibleGci>,
    ) -> Self {
        KnowledgeBase {
            tbox: tbox.into_iter().map(|g| StrictGci::new(g.lhs, g.rhs)).collect(),
            dbox: dbox.into_iter().map(|g| DefeasibleGci::new(g.lhs, g.rhs)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tbox.is_empty() && self.dbox.is_empty()
    }

    pub fn map(&self, f: &impl Fn(&Concept) -> Option<Concept>) -> Self {
        KnowledgeBase {
            tbox: self.tbox.iter().map(|g| g.map(f)).collect(),
            dbox: self.dbox.iter().map(|g| g.map(f)).collect(),
        }
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.tbox
            .iter()
            .flat_map(|g| [&g.lhs, &g.rhs])
            .chain(self.dbox.iter().flat_map(|g| [&g.lhs, &g.rhs]))
    }

    pub fn axioms(&self) -> impl Iterator<Item = Axiom> + '_ {
        self.tbox
            .iter()
            .cloned()
            .map(Axiom::Strict)
            .chain(self.dbox.iter().cloned().map(Axiom::Defeasible))
    }

    pub fn has_nominals(&self) -> bool {
        self.concepts().any(Concept::has_nominals)
    }

    pub fn has_def_nominals(&self) -> bool {
        self.concepts().any(Concept::has_def_nominals)
    }

    /// First symbol that uses the reserved prefix, if any.
    pub fn reserved_symbol(&self) -> Option<Name> {
        let sig = signature(self);
        sig.atoms
            .into_iter()
            .chain(sig.roles)
            .chain(sig.individuals)
            .find(Name::is_reserved)
    }
}

#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Signature {
    pub atoms: BTreeSet<Name>,
    pub roles: BTreeSet<Name>,
    pub individuals: BTreeSet<Name>,
}

impl Signature {
    pub fn add_concept(&mut self, c: &Concept) {
        c.walk(&mut |sub| match sub {
            Concept::Atom(a) => {
                self.atoms.insert(a.clone());
            }
            Concept::Exists(r, _) => {
                self.roles.insert(r.clone());
            }
            Concept::Nominal(a) | Concept::DefNominal(a) => {
                self.individuals.insert(a.clone());
            }
            _ => {}
        });
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.atoms.contains(name) || self.roles.contains(name) || self.individuals.contains(name)
    }
}

pub fn signature(kb: &KnowledgeBase) -> Signature {
    let mut sig = Signature::default();
    kb.concepts().for_each(|c| sig.add_concept(c));
    sig
}

pub fn canonicalize(c: &Concept) -> Concept {
    c.canonical()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SafetyError {
    #[error("concept `{0}` contains a defeasible nominal; judge safeness on its {{}}-image")]
    DefeasibleNominal(Concept),
}

/// True iff every nominal in `c` is the immediate filler of an existential.
pub fn is_safe_concept(c: &Concept) -> Result<bool, SafetyError> {
    if c.has_def_nominals() {
        return Err(SafetyError::DefeasibleNominal(c.clone()));
    }
    Ok(safe(c))
}

fn safe(c: &Concept) -> bool {
    match c {
        Concept::Nominal(_) => false,
        Concept::Exists(_, filler) => matches!(**filler, Concept::Nominal(_)) || safe(filler),
        Concept::And(ops) => ops.iter().all(safe),
        _ => true,
    }
}

/// Safe, or exactly a nominal.
pub fn is_nsafe_concept(c: &Concept) -> Result<bool, SafetyError> {
    Ok(matches!(c, Concept::Nominal(_)) || is_safe_concept(c)?)
}

/// Replaces every `<a>` by `{a}` (the `{}`-image used for safeness).
pub fn nominal_image(c: &Concept) -> Concept {
    c.map(&|x| match x {
        Concept::DefNominal(a) => Some(Concept::Nominal(a.clone())),
        _ => None,
    })
}

/// Safeness of a single axiom: n-safe lhs and safe rhs, with defeasible
/// nominals judged through their `{}`-image.
pub fn is_safe_axiom(ax: &Axiom) -> bool {
    let lhs = nominal_image(ax.lhs());
    let rhs = nominal_image(ax.rhs());
    (matches!(lhs, Concept::Nominal(_)) || safe(&lhs)) && safe(&rhs)
}

/// Axioms that break nominal safeness, in sorted order.
pub fn unsafe_axioms(kb: &KnowledgeBase) -> Vec<Axiom> {
    kb.axioms().filter(|ax| !is_safe_axiom(ax)).collect()
}

pub fn is_nominal_safe_kb(kb: &KnowledgeBase) -> bool {
    kb.axioms().all(|ax| is_safe_axiom(&ax))
}

/// Namespaces for generated atoms.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Namespace {
    /// Fresh atoms of the delta encoding.
    Delta,
    /// Definitional atoms introduced by normalization and query internalization.
    Defn,
    /// Images `N_a` of classical nominals.
    Nom,
    /// Images `D_a` of defeasible nominals.
    DefNom,
}

impl Namespace {
    fn tag(self) -> &'static str {
        match self {
            Namespace::Delta => "delta",
            Namespace::Defn => "defn",
            Namespace::Nom => "nom",
            Namespace::DefNom => "dnom",
        }
    }

    pub fn prefix(self) -> String {
        format!("{}{}.", RESERVED_PREFIX, self.tag())
    }

    /// The fixed image atom of individual `a` (only meaningful for `Nom` and `DefNom`).
    pub fn individual_atom(self, individual: &Name) -> Name {
        Name::from(format!("{}{}", self.prefix(), individual))
    }
}

/// Source of reserved-prefix atom names that never repeats itself.
#[derive(Clone, Debug)]
pub struct FreshNameSource {
    namespace: Namespace,
    counter: u64,
}

impl FreshNameSource {
    pub fn new(namespace: Namespace) -> Self {
        FreshNameSource { namespace, counter: 0 }
    }

    /// Starts numbering past every name of this namespace already in `sig`,
    /// so generated names cannot collide with previously generated ones.
    pub fn avoiding(namespace: Namespace, sig: &Signature) -> Self {
        let mut source = FreshNameSource::new(namespace);
        source.skip_past(sig);
        source
    }

    /// Advances the counter past every name of this namespace in `sig`.
    pub fn skip_past(&mut self, sig: &Signature) {
        let prefix = self.namespace.prefix();
        let start = sig
            .atoms
            .iter()
            .filter_map(|n| n.as_str().strip_prefix(prefix.as_str()))
            .filter_map(|rest| rest.parse::<u64>().ok())
            .map(|k| k + 1)
            .max()
            .unwrap_or(0);
        self.counter = self.counter.max(start);
    }

    pub fn namespace(&self) -> Namespace {
        self.namespace
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn fresh_atom(&mut self) -> Name {
        let name = Name::from(format!("{}{}", self.namespace.prefix(), self.counter));
        self.counter += 1;
        name
    }
}
