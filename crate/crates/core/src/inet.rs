//! Inheritance nets built from normal-form KBs and the inheritance-based
//! closure, which runs rational closure locally on the defeasible links
//! connecting each pair of nodes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::elcore::{ElError, NormalAxiom, NormalTBox, Term};
use crate::model::{signature, Concept, DefeasibleGci, KnowledgeBase, StrictGci};
use crate::normalize::{atomize_dbox, NameMap, Normalizer};
use crate::rc::Reasoner;

pub type Link = (Concept, Concept);

#[derive(Clone, Default, Debug, PartialEq, Eq)]
pub struct Net {
    pub nodes: BTreeSet<Concept>,
    /// `C => D`
    pub strict_pos: BTreeSet<Link>,
    /// `C <=/=> D`, stored with the smaller node first.
    pub strict_neg: BTreeSet<Link>,
    /// `C -> D`
    pub def_pos: BTreeSet<Link>,
    /// `C, D <=>^ E`, with `C < D`.
    pub conj: BTreeSet<(Link, Concept)>,
    pub def_origin: BTreeMap<Link, DefeasibleGci>,
}

#[derive(Clone, Default, Debug, PartialEq, Eq)]
pub struct DeltaSet {
    pub links: BTreeSet<Link>,
    pub axioms: BTreeSet<DefeasibleGci>,
}

fn ordered(a: Concept, b: Concept) -> Link {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Builds the net of a KB whose TBox is in normal form and whose DBox is atomic.
pub fn build_net(reasoner: &Reasoner, kb: &KnowledgeBase) -> Result<Net, ElError> {
    let mut net = Net::default();
    let normal = NormalTBox::from_gcis(&kb.tbox)
        .unwrap_or_else(|| panic!("build_net expects a normal-form TBox"));
    for c in kb.concepts() {
        c.walk(&mut |x| {
            if let Concept::Atom(_) = x {
                net.nodes.insert(x.clone());
            }
        });
    }
    for d in &kb.dbox {
        let link = (d.lhs.clone(), d.rhs.clone());
        net.def_pos.insert(link.clone());
        net.def_origin.insert(link, d.clone());
    }
    for ax in &normal.axioms {
        if let NormalAxiom::Conj(a, b, Term::Bot) = ax {
            net.strict_neg.insert(ordered(a.to_concept(), b.to_concept()));
            continue;
        }
        let g = ax.to_gci();
        net.nodes.insert(g.lhs.clone());
        net.nodes.insert(g.rhs.clone());
        net.strict_pos.insert((g.lhs, g.rhs));
    }
    complete(reasoner, kb, &mut net)?;
    Ok(net)
}

/// Step 5: conjunction links for node pairs whose conjunction is equivalent
/// to another node, followed by the conjunction closure.
fn complete(reasoner: &Reasoner, kb: &KnowledgeBase, net: &mut Net) -> Result<(), ElError> {
    let bases: Vec<&Concept> =
        net.nodes.iter().filter(|c| matches!(c, Concept::Atom(_) | Concept::Exists(..))).collect();
    let targets: Vec<&Concept> = net.nodes.iter().filter(|c| **c != Concept::Top).collect();
    let mut pairs = Vec::new();
    for (i, c) in bases.iter().enumerate() {
        for d in &bases[i + 1..] {
            pairs.push(((*c).clone(), (*d).clone(), c.and_with(d)));
        }
    }
    let concepts: Vec<&Concept> = net.nodes.iter().chain(pairs.iter().map(|p| &p.2)).collect();
    let p = reasoner.engine().prepare(&kb.tbox, concepts)?;
    for (c, d, cd) in &pairs {
        if p.entails(cd, &Concept::Bot) {
            continue;
        }
        for e in &targets {
            if *e == c || *e == d {
                continue;
            }
            if p.entails(e, c) && p.entails(e, d) && p.entails(cd, e) {
                net.conj.insert(((c.clone(), d.clone()), (*e).clone()));
            }
        }
    }
    for ((c, d), e) in net.conj.clone() {
        net.strict_pos.insert((e.clone(), c));
        net.strict_pos.insert((e, d));
    }
    Ok(())
}

impl Net {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn successors(&self) -> HashMap<&Concept, Vec<&Concept>> {
        let mut succ: HashMap<&Concept, Vec<&Concept>> = HashMap::new();
        for (a, b) in self.strict_pos.iter().chain(&self.def_pos) {
            succ.entry(a).or_default().push(b);
        }
        for (a, b) in &self.strict_neg {
            succ.entry(a).or_default().push(b);
            succ.entry(b).or_default().push(a);
        }
        succ
    }

    /// Every node a duct starting at `start` can reach.
    pub fn reachable_from(&self, start: &Concept) -> BTreeSet<Concept> {
        self.reach_with(&self.successors(), start)
    }

    fn reach_with(&self, succ: &HashMap<&Concept, Vec<&Concept>>, start: &Concept) -> BTreeSet<Concept> {
        let mut seen: BTreeSet<Concept> = BTreeSet::new();
        let mut stack = vec![start.clone()];
        loop {
            while let Some(x) = stack.pop() {
                if seen.contains(&x) {
                    continue;
                }
                for y in succ.get(&x).into_iter().flatten() {
                    if !seen.contains(*y) {
                        stack.push((*y).clone());
                    }
                }
                seen.insert(x);
            }
            for ((c, d), e) in &self.conj {
                if seen.contains(c) && seen.contains(d) && !seen.contains(e) {
                    stack.push(e.clone());
                }
            }
            if stack.is_empty() {
                return seen;
            }
        }
    }

    pub fn delta_links(&self, c: &Concept, d: &Concept) -> DeltaSet {
        let succ = self.successors();
        let from_c = self.reach_with(&succ, c);
        self.delta_from(&from_c, d, &mut |f| self.reach_with(&succ, f))
    }

    fn delta_from(
        &self,
        from_c: &BTreeSet<Concept>,
        d: &Concept,
        reach: &mut impl FnMut(&Concept) -> BTreeSet<Concept>,
    ) -> DeltaSet {
        let mut out = DeltaSet::default();
        for link @ (e, f) in &self.def_pos {
            if from_c.contains(e) && reach(f).contains(d) {
                out.links.insert(link.clone());
                out.axioms.insert(self.def_origin[link].clone());
            }
        }
        out
    }

    /// Graphviz rendering of the net.
    pub fn to_dot(&self) -> String {
        let ids: BTreeMap<&Concept, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let mut out = String::from("digraph net {\n  rankdir=LR;\n");
        for (n, i) in &ids {
            let label = n.to_string().replace('"', "\\\"");
            writeln!(out, "  n{i} [label=\"{label}\"];").unwrap();
        }
        for (a, b) in &self.strict_pos {
            writeln!(out, "  n{} -> n{} [style=bold];", ids[a], ids[b]).unwrap();
        }
        for (a, b) in &self.def_pos {
            writeln!(out, "  n{} -> n{};", ids[a], ids[b]).unwrap();
        }
        for (a, b) in &self.strict_neg {
            writeln!(out, "  n{} -> n{} [dir=both, style=dashed, color=red];", ids[a], ids[b]).unwrap();
        }
        for ((c, d), e) in &self.conj {
            let j = format!("c{}_{}_{}", ids[c], ids[d], ids[e]);
            writeln!(out, "  {j} [shape=point];").unwrap();
            writeln!(out, "  n{} -> {j} [arrowhead=none];\n  n{} -> {j} [arrowhead=none];", ids[c], ids[d]).unwrap();
            writeln!(out, "  {j} -> n{} [dir=both, style=bold];", ids[e]).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Everything computed for a batch of inheritance queries.
#[derive(Clone, Debug)]
pub struct InheritanceClosure {
    /// Normal form of the KB with the query sides defined in it.
    pub normalized: KnowledgeBase,
    pub names: NameMap,
    /// The queries over the normalized signature.
    pub queries: Vec<DefeasibleGci>,
    /// `None` when the KB has no ranked model and the net was never built.
    pub net: Option<Net>,
    pub d_in: Arc<BTreeSet<DefeasibleGci>>,
    pub entailed: Vec<bool>,
}

impl InheritanceClosure {
    /// Axioms of `d_in` that are not in the normalized DBox.
    pub fn added(&self) -> impl Iterator<Item = &DefeasibleGci> {
        self.d_in.iter().filter(|d| !self.normalized.dbox.contains(d))
    }
}

/// Normalizes `kb` together with the sides of `qs`.
pub fn normalize_with_queries(kb: &KnowledgeBase, qs: &[DefeasibleGci]) -> (KnowledgeBase, NameMap, Vec<DefeasibleGci>) {
    let mut sig = signature(kb);
    for q in qs {
        sig.add_concept(&q.lhs);
        sig.add_concept(&q.rhs);
    }
    let mut n = Normalizer::new(&sig);
    let dbox = atomize_dbox(&mut n, kb);
    let queries = qs
        .iter()
        .map(|q| DefeasibleGci::new(Concept::Atom(n.define_atom(&q.lhs)), Concept::Atom(n.define_atom(&q.rhs))))
        .collect();
    let (tbox, names) = n.finish();
    (KnowledgeBase { tbox: tbox.to_gcis().collect(), dbox }, names, queries)
}

/// The KB `<T, D_in>`, given the normalized KB and its net.
fn compute_d_in(
    reasoner: &Reasoner,
    kb: &KnowledgeBase,
    net: &Net,
) -> Result<BTreeSet<DefeasibleGci>, ElError> {
    let nodes: Vec<&Concept> = net.nodes.iter().collect();
    let succ = net.successors();
    let reach: Vec<BTreeSet<Concept>> = nodes.iter().map(|n| net.reach_with(&succ, n)).collect();
    let reach_of: HashMap<&Concept, &BTreeSet<Concept>> = nodes.iter().copied().zip(&reach).collect();
    let classical = reasoner.engine().prepare(&kb.tbox, nodes.iter().copied())?;

    // pairs sharing the same relevant DBox share one ranking
    let mut groups: BTreeMap<BTreeSet<DefeasibleGci>, Vec<DefeasibleGci>> = BTreeMap::new();
    for (i, c) in nodes.iter().enumerate() {
        for d in &nodes {
            // already a consequence of T, so redundant in D_in
            if classical.entails(c, d) {
                continue;
            }
            let delta = net.delta_from(&reach[i], d, &mut |f| (*reach_of[f]).clone());
            if delta.axioms.is_empty() {
                continue;
            }
            groups.entry(delta.axioms).or_default().push(DefeasibleGci::new((*c).clone(), (*d).clone()));
        }
    }
    let mut d_in = kb.dbox.clone();
    for (dprime, qs) in groups {
        let sub = KnowledgeBase { tbox: kb.tbox.clone(), dbox: dprime };
        for (q, yes) in qs.iter().zip(reasoner.entails_batch(&sub, &qs)?) {
            if yes {
                d_in.insert(q.clone());
            }
        }
    }
    Ok(d_in)
}

/// Decides a batch of defeasible queries under the inheritance-based closure.
pub fn inheritance_closure(
    reasoner: &Reasoner,
    kb: &KnowledgeBase,
    qs: &[DefeasibleGci],
) -> Result<InheritanceClosure, ElError> {
    if let Some(c) = kb.concepts().chain(qs.iter().flat_map(|q| [&q.lhs, &q.rhs])).find(|c| c.has_nominals() || c.has_def_nominals()) {
        return Err(ElError::Nominal(c.to_string()));
    }
    let (normalized, names, queries) = normalize_with_queries(kb, qs);
    let top_bot = DefeasibleGci::new(Concept::Top, Concept::Bot);
    if reasoner.decide(&normalized, &top_bot)?.entailed {
        let n = queries.len();
        return Ok(InheritanceClosure {
            d_in: Arc::new(normalized.dbox.clone()),
            normalized,
            names,
            queries,
            net: None,
            entailed: vec![true; n],
        });
    }
    let net = build_net(reasoner, &normalized)?;
    let cached = reasoner.closures.lock().unwrap().get(&normalized).cloned();
    let d_in = match cached {
        Some(d) => d,
        None => {
            let d = Arc::new(compute_d_in(reasoner, &normalized, &net)?);
            reasoner.closures.lock().unwrap().insert(normalized.clone(), d.clone());
            d
        }
    };
    let k_in = KnowledgeBase { tbox: normalized.tbox.clone(), dbox: (*d_in).clone() };
    let entailed = reasoner.entails_batch(&k_in, &queries)?;
    Ok(InheritanceClosure { normalized, names, queries, net: Some(net), d_in, entailed })
}

pub fn inheritance_closure_entails(reasoner: &Reasoner, kb: &KnowledgeBase, q: &DefeasibleGci) -> Result<bool, ElError> {
    Ok(inheritance_closure(reasoner, kb, std::slice::from_ref(q))?.entailed[0])
}

/// Strict queries hold under the inheritance closure iff they hold in `T*` of `<T, D_in>`.
pub fn inheritance_closure_entails_strict(
    reasoner: &Reasoner,
    kb: &KnowledgeBase,
    q: &StrictGci,
) -> Result<bool, ElError> {
    let as_def = DefeasibleGci::new(q.lhs.clone(), q.rhs.clone());
    let closure = inheritance_closure(reasoner, kb, std::slice::from_ref(&as_def))?;
    let k_in = KnowledgeBase { tbox: closure.normalized.tbox.clone(), dbox: (*closure.d_in).clone() };
    let nq = closure.queries[0].as_strict();
    reasoner.entails(&k_in, &crate::model::Axiom::Strict(nq))
}
