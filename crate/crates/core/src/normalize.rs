//! Normal-form transformation for EL-bottom TBoxes and defeasible KBs.
//!
//! Strict axioms are rewritten with the usual rules (R1 to R3 on the left
//! side to exhaustion, then R4 to R6 on the right side). Every fresh atom
//! stands for exactly one canonical concept, so a concept that is named by
//! several rule applications reuses one atom. Defeasible axioms become
//! `A_C <~ A_D` with `A_C == C` and `A_D == D` added to the TBox; sides that
//! already are atoms are kept.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::elcore::{NormalAxiom, NormalTBox, Term};
use crate::model::{
    Concept, DefeasibleGci, FreshNameSource, KnowledgeBase, Name, Namespace, Signature, StrictGci,
};

/// Fresh atom to the concept it abbreviates.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct NameMap {
    pub definitions: BTreeMap<Name, Concept>,
}

impl NameMap {
    pub fn get(&self, atom: &Name) -> Option<&Concept> {
        self.definitions.get(atom)
    }

    pub fn len(&self) -> usize {
        self.definitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.definitions.is_empty()
    }

    /// Replaces fresh atoms by their definitions until none are left.
    pub fn expand(&self, c: &Concept) -> Concept {
        let mut cur = c.clone();
        loop {
            let next = cur.map(&|x| match x {
                Concept::Atom(n) => self.definitions.get(n).cloned(),
                _ => None,
            });
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }
}

impl fmt::Display for NameMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, c) in &self.definitions {
            writeln!(f, "{} == {}", n, c)?;
        }
        Ok(())
    }
}

/// Order in which pending axioms are taken from the rule worklists.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum WorklistOrder {
    #[default]
    Fifo,
    Lifo,
}

pub struct Normalizer {
    fresh: FreshNameSource,
    names: HashMap<Concept, Name>,
    defs: BTreeMap<Name, Concept>,
    left: VecDeque<(Concept, Concept)>,
    right: VecDeque<(Concept, Concept)>,
    seen_left: HashSet<(Concept, Concept)>,
    seen_right: HashSet<(Concept, Concept)>,
    out: BTreeSet<NormalAxiom>,
    order: WorklistOrder,
}

impl Normalizer {
    /// A normalizer whose fresh atoms avoid every name in `sig`.
    pub fn new(sig: &Signature) -> Self {
        Normalizer {
            fresh: FreshNameSource::avoiding(Namespace::Defn, sig),
            names: HashMap::new(),
            defs: BTreeMap::new(),
            left: VecDeque::new(),
            right: VecDeque::new(),
            seen_left: HashSet::new(),
            seen_right: HashSet::new(),
            out: BTreeSet::new(),
            order: WorklistOrder::Fifo,
        }
    }

    pub fn with_order(mut self, order: WorklistOrder) -> Self {
        self.order = order;
        self
    }

    pub fn add(&mut self, gci: &StrictGci) {
        self.push_left(gci.lhs.canonical(), gci.rhs.canonical());
    }

    /// A term equivalent to `c`: `c` itself when it is basic, otherwise an
    /// atom fully defined as `c`.
    pub fn define(&mut self, c: &Concept) -> Term {
        let c = c.canonical();
        match Term::from_concept(&c) {
            Some(t) => t,
            None => Term::Atom(self.define_named(&c)),
        }
    }

    /// Like [`Normalizer::define`] but always yields an atom, naming `top`
    /// and `bot` too.
    pub fn define_atom(&mut self, c: &Concept) -> Name {
        let c = c.canonical();
        match c {
            Concept::Atom(n) => n,
            c => self.define_named(&c),
        }
    }

    fn define_named(&mut self, c: &Concept) -> Name {
        let a = self.name_of(c);
        self.push_left(c.clone(), Concept::Atom(a.clone()));
        self.push_left(Concept::Atom(a.clone()), c.clone());
        a
    }

    fn name_of(&mut self, c: &Concept) -> Name {
        if let Some(n) = self.names.get(c) {
            return n.clone();
        }
        let n = self.fresh.fresh_atom();
        self.names.insert(c.clone(), n.clone());
        self.defs.insert(n.clone(), c.clone());
        n
    }

    fn push_left(&mut self, lhs: Concept, rhs: Concept) {
        if self.seen_left.insert((lhs.clone(), rhs.clone())) {
            self.left.push_back((lhs, rhs));
        }
    }

    fn push_right(&mut self, lhs: Concept, rhs: Concept) {
        if self.seen_right.insert((lhs.clone(), rhs.clone())) {
            self.right.push_back((lhs, rhs));
        }
    }

    fn pop(queue: &mut VecDeque<(Concept, Concept)>, order: WorklistOrder) -> Option<(Concept, Concept)> {
        match order {
            WorklistOrder::Fifo => queue.pop_front(),
            WorklistOrder::Lifo => queue.pop_back(),
        }
    }

    /// Runs both rule phases to exhaustion and returns everything produced so far.
    pub fn finish(mut self) -> (NormalTBox, NameMap) {
        self.run();
        (NormalTBox { axioms: self.out }, NameMap { definitions: self.defs })
    }

    fn run(&mut self) {
        while let Some((lhs, rhs)) = Self::pop(&mut self.left, self.order) {
            self.left_rules(lhs, rhs);
        }
        while let Some((lhs, rhs)) = Self::pop(&mut self.right, self.order) {
            self.right_rules(lhs, rhs);
        }
    }

    // R1-R3
    fn left_rules(&mut self, lhs: Concept, rhs: Concept) {
        match &lhs {
            Concept::Bot => {}
            Concept::Top | Concept::Atom(_) => self.push_right(lhs, rhs),
            Concept::And(ops) => {
                if let Some(pos) = ops.iter().position(|o| !is_filler(o)) {
                    // R1 on a complex operand
                    let hat = ops[pos].clone();
                    let a = Concept::Atom(self.name_of(&hat));
                    let mut rest = ops.clone();
                    rest[pos] = a.clone();
                    self.push_left(hat, a);
                    self.push_left(Concept::And(rest).canonical(), rhs);
                } else if ops.len() > 2 {
                    // binarize: (o1 & .. & o_{n-1}) is the complex operand
                    let (last, init) = ops.split_last().unwrap();
                    let hat = Concept::And(init.to_vec());
                    let a = Concept::Atom(self.name_of(&hat));
                    self.push_left(hat, a.clone());
                    self.push_left(Concept::and([a, last.clone()]), rhs);
                } else {
                    self.push_right(lhs, rhs);
                }
            }
            Concept::Exists(r, filler) => {
                if is_filler(filler) {
                    self.push_right(lhs, rhs);
                } else {
                    // R2
                    let hat = (**filler).clone();
                    let a = Concept::Atom(self.name_of(&hat));
                    self.push_left(hat, a.clone());
                    self.push_left(Concept::Exists(r.clone(), Box::new(a)), rhs);
                }
            }
            Concept::Nominal(_) | Concept::DefNominal(_) => {
                unreachable!("nominals must be translated away before normalization: {lhs}")
            }
        }
    }

    // R4-R6
    fn right_rules(&mut self, lhs: Concept, rhs: Concept) {
        if let Some(head) = Term::from_concept(&rhs) {
            let ax = match &lhs {
                Concept::Top | Concept::Atom(_) => NormalAxiom::Sub(Term::from_concept(&lhs).unwrap(), head),
                Concept::And(ops) => NormalAxiom::Conj(
                    Term::from_concept(&ops[0]).unwrap(),
                    Term::from_concept(&ops[1]).unwrap(),
                    head,
                ),
                Concept::Exists(r, filler) => {
                    NormalAxiom::ExistsLhs(r.clone(), Term::from_concept(filler).unwrap(), head)
                }
                _ => unreachable!("left side not normal: {lhs}"),
            };
            self.out.insert(ax);
            return;
        }
        if !matches!(lhs, Concept::Top | Concept::Atom(_)) {
            // R4
            let a = Concept::Atom(self.name_of(&rhs));
            self.push_right(lhs, a.clone());
            self.push_right(a, rhs);
            return;
        }
        match &rhs {
            Concept::Exists(r, filler) => {
                if let Some(f) = Term::from_concept(filler).filter(|t| *t != Term::Bot) {
                    let l = Term::from_concept(&lhs).unwrap();
                    self.out.insert(NormalAxiom::ExistsRhs(l, r.clone(), f));
                } else {
                    // R5
                    let hat = (**filler).clone();
                    let a = Concept::Atom(self.name_of(&hat));
                    self.push_right(lhs.clone(), Concept::Exists(r.clone(), Box::new(a.clone())));
                    self.push_right(a, hat);
                }
            }
            Concept::And(ops) => {
                // R6
                for op in ops {
                    self.push_right(lhs.clone(), op.clone());
                }
            }
            _ => unreachable!("nominals must be translated away before normalization: {rhs}"),
        }
    }
}

/// Atom or `top`: allowed as conjunct or existential filler in normal form.
fn is_filler(c: &Concept) -> bool {
    matches!(c, Concept::Top | Concept::Atom(_))
}

fn tbox_signature<'a>(t: impl IntoIterator<Item = &'a StrictGci>) -> Signature {
    let mut sig = Signature::default();
    for g in t {
        sig.add_concept(&g.lhs);
        sig.add_concept(&g.rhs);
    }
    sig
}

pub fn normalize_tbox<'a>(t: impl IntoIterator<Item = &'a StrictGci> + Clone) -> (NormalTBox, NameMap) {
    normalize_tbox_ordered(t, WorklistOrder::Fifo)
}

pub fn normalize_tbox_ordered<'a>(
    t: impl IntoIterator<Item = &'a StrictGci> + Clone,
    order: WorklistOrder,
) -> (NormalTBox, NameMap) {
    let mut n = Normalizer::new(&tbox_signature(t.clone())).with_order(order);
    for g in t {
        n.add(g);
    }
    n.finish()
}

/// Normal form of a defeasible KB: atomic DBox, normal-form TBox.
pub fn normalize_kb(kb: &KnowledgeBase) -> (KnowledgeBase, NameMap) {
    let mut n = Normalizer::new(&crate::model::signature(kb));
    let dbox = atomize_dbox(&mut n, kb);
    let (tbox, names) = n.finish();
    (KnowledgeBase { tbox: tbox.to_gcis().collect(), dbox }, names)
}

pub(crate) fn atomize_dbox(n: &mut Normalizer, kb: &KnowledgeBase) -> BTreeSet<DefeasibleGci> {
    for g in &kb.tbox {
        n.add(g);
    }
    kb.dbox
        .iter()
        .map(|d| {
            let l = n.define_atom(&d.lhs);
            let r = n.define_atom(&d.rhs);
            DefeasibleGci { lhs: Concept::Atom(l), rhs: Concept::Atom(r) }
        })
        .collect()
}
