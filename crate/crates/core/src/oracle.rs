//! Bounded ranked-model search, used as an independent check of the
//! syntactic procedures on small KBs.
//!
//! Interpretations are built by backtracking over atom and role bits, one
//! domain element at a time. Partial interpretations are evaluated in three
//! values (`must` and `may` element masks), and a branch is cut as soon as
//! some axiom is violated in every completion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::ControlFlow;

use thiserror::Error;

use crate::model::{signature, Axiom, Concept, DefeasibleGci, KnowledgeBase, Name, StrictGci};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("search space of {0} interpretations exceeds the budget")]
    SpaceExceeded(u128),
    #[error("search gave up after {0} nodes")]
    NodesExceeded(u64),
    #[error("the oracle does not handle nominals: {0}")]
    Nominal(String),
    #[error("domain size {0} is not supported (at most 64)")]
    Domain(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_domain: usize,
    /// Largest height allowed; heights are contiguous from 0.
    pub max_height: u32,
    /// Cap on the raw number of interpretations `enumerate_models` may visit.
    pub max_space: u128,
    /// Cap on backtracking nodes for the pruned searches.
    pub max_nodes: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_domain: 3, max_height: 2, max_space: 1 << 22, max_nodes: 50_000_000 }
    }
}

impl OracleBudget {
    pub fn with_domain(max_domain: usize) -> Self {
        OracleBudget { max_domain, max_height: max_domain.saturating_sub(1) as u32, ..Self::default() }
    }
}

/// A finite ranked interpretation. Extensions are bitmasks over the domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedInterpretation {
    pub domain: usize,
    pub atom_ext: BTreeMap<Name, u64>,
    pub role_ext: BTreeMap<Name, BTreeSet<(usize, usize)>>,
    pub height: Vec<u32>,
}

impl RankedInterpretation {
    fn full(&self) -> u64 {
        mask(self.domain)
    }

    pub fn extension(&self, c: &Concept) -> u64 {
        match c {
            Concept::Top => self.full(),
            Concept::Bot => 0,
            Concept::Atom(a) => self.atom_ext.get(a).copied().unwrap_or(0),
            Concept::And(ops) => ops.iter().fold(self.full(), |m, o| m & self.extension(o)),
            Concept::Exists(r, f) => {
                let fe = self.extension(f);
                let mut out = 0;
                for &(x, y) in self.role_ext.get(r).into_iter().flatten() {
                    if fe >> y & 1 == 1 {
                        out |= 1 << x;
                    }
                }
                out
            }
            Concept::Nominal(_) | Concept::DefNominal(_) => panic!("nominals must be encoded before model checking"),
        }
    }

    /// Elements of `ext` of least height.
    pub fn minimal(&self, ext: u64) -> u64 {
        let hmin = (0..self.domain).filter(|&x| ext >> x & 1 == 1).map(|x| self.height[x]).min();
        match hmin {
            Some(h) => (0..self.domain).filter(|&x| ext >> x & 1 == 1 && self.height[x] == h).fold(0, |m, x| m | 1 << x),
            None => 0,
        }
    }

    pub fn satisfies(&self, ax: &Axiom) -> bool {
        match ax {
            Axiom::Strict(g) => self.satisfies_strict(g),
            Axiom::Defeasible(g) => self.satisfies_defeasible(g),
        }
    }

    pub fn satisfies_strict(&self, g: &StrictGci) -> bool {
        self.extension(&g.lhs) & !self.extension(&g.rhs) == 0
    }

    pub fn satisfies_defeasible(&self, g: &DefeasibleGci) -> bool {
        self.minimal(self.extension(&g.lhs)) & !self.extension(&g.rhs) == 0
    }

    pub fn is_model_of(&self, kb: &KnowledgeBase) -> bool {
        kb.axioms().all(|ax| self.satisfies(&ax))
    }

    /// Every height from 0 to the maximum is used.
    pub fn layers_contiguous(&self) -> bool {
        let used: BTreeSet<u32> = self.height.iter().copied().collect();
        used.iter().copied().eq(0..used.len() as u32)
    }
}

impl fmt::Display for RankedInterpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "domain 0..{} heights {:?}", self.domain, self.height)?;
        for (a, m) in &self.atom_ext {
            let xs: Vec<usize> = (0..self.domain).filter(|x| m >> x & 1 == 1).collect();
            writeln!(f, "  {a} = {xs:?}")?;
        }
        for (r, pairs) in &self.role_ext {
            writeln!(f, "  {r} = {pairs:?}")?;
        }
        Ok(())
    }
}

fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[derive(Clone, Debug)]
enum Cc {
    Top,
    Bot,
    Atom(usize),
    And(Vec<Cc>),
    Exists(usize, Box<Cc>),
}

struct Symbols {
    atoms: Vec<Name>,
    roles: Vec<Name>,
    atom_ids: HashMap<Name, usize>,
    role_ids: HashMap<Name, usize>,
}

impl Symbols {
    fn new(kb: &KnowledgeBase, extra: &[&Concept]) -> Self {
        let mut sig = signature(kb);
        extra.iter().for_each(|c| sig.add_concept(c));
        let atoms: Vec<Name> = sig.atoms.into_iter().collect();
        let roles: Vec<Name> = sig.roles.into_iter().collect();
        let atom_ids = atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let role_ids = roles.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect();
        Symbols { atoms, roles, atom_ids, role_ids }
    }

    fn compile(&self, c: &Concept) -> Cc {
        match c {
            Concept::Top => Cc::Top,
            Concept::Bot => Cc::Bot,
            Concept::Atom(a) => Cc::Atom(self.atom_ids[a]),
            Concept::And(ops) => Cc::And(ops.iter().map(|o| self.compile(o)).collect()),
            Concept::Exists(r, f) => Cc::Exists(self.role_ids[r], Box::new(self.compile(f))),
            Concept::Nominal(_) | Concept::DefNominal(_) => unreachable!(),
        }
    }
}

enum Constraint {
    Strict(Cc, Cc),
    Defeasible(Cc, Cc),
    /// Element must (or must not) be in the concept.
    Member(usize, Cc, bool),
}

/// A partial interpretation: `val` bits are meaningful only where `set` is on.
struct Partial {
    n: usize,
    heights: Vec<u32>,
    atom_val: Vec<u64>,
    atom_set: Vec<u64>,
    role_val: Vec<Vec<u64>>,
    role_set: Vec<Vec<u64>>,
}

#[derive(Clone, Copy)]
enum Var {
    Atom(usize, usize),
    Role(usize, usize, usize),
}

impl Partial {
    fn new(n: usize, heights: Vec<u32>, atoms: usize, roles: usize) -> Self {
        Partial {
            n,
            heights,
            atom_val: vec![0; atoms],
            atom_set: vec![0; atoms],
            role_val: vec![vec![0; n]; roles],
            role_set: vec![vec![0; n]; roles],
        }
    }

    fn full(&self) -> u64 {
        mask(self.n)
    }

    fn set(&mut self, v: Var, value: bool) {
        let bit = |m: &mut u64, i: usize| {
            if value {
                *m |= 1 << i
            } else {
                *m &= !(1 << i)
            }
        };
        match v {
            Var::Atom(a, x) => {
                bit(&mut self.atom_val[a], x);
                self.atom_set[a] |= 1 << x;
            }
            Var::Role(r, x, y) => {
                bit(&mut self.role_val[r][x], y);
                self.role_set[r][x] |= 1 << y;
            }
        }
    }

    fn unset(&mut self, v: Var) {
        match v {
            Var::Atom(a, x) => {
                self.atom_set[a] &= !(1 << x);
                self.atom_val[a] &= !(1 << x);
            }
            Var::Role(r, x, y) => {
                self.role_set[r][x] &= !(1 << y);
                self.role_val[r][x] &= !(1 << y);
            }
        }
    }

    /// `(must, may)` masks.
    fn eval(&self, c: &Cc) -> (u64, u64) {
        match c {
            Cc::Top => (self.full(), self.full()),
            Cc::Bot => (0, 0),
            Cc::Atom(a) => {
                let must = self.atom_val[*a] & self.atom_set[*a];
                (must, must | (!self.atom_set[*a] & self.full()))
            }
            Cc::And(ops) => ops.iter().fold((self.full(), self.full()), |(m, p), o| {
                let (om, op) = self.eval(o);
                (m & om, p & op)
            }),
            Cc::Exists(r, f) => {
                let (fm, fp) = self.eval(f);
                let (mut must, mut may) = (0, 0);
                for x in 0..self.n {
                    let sure = self.role_val[*r][x] & self.role_set[*r][x];
                    let maybe = sure | (!self.role_set[*r][x] & self.full());
                    if sure & fm != 0 {
                        must |= 1 << x;
                    }
                    if maybe & fp != 0 {
                        may |= 1 << x;
                    }
                }
                (must, may)
            }
        }
    }

    /// False if the constraint fails in every completion.
    fn possible(&self, k: &Constraint) -> bool {
        match k {
            Constraint::Strict(c, d) => {
                let (cm, _) = self.eval(c);
                let (_, dp) = self.eval(d);
                cm & !dp == 0
            }
            Constraint::Defeasible(c, d) => {
                let (cm, cp) = self.eval(c);
                let (_, dp) = self.eval(d);
                let hmin = (0..self.n).filter(|&x| cp >> x & 1 == 1).map(|x| self.heights[x]).min();
                match hmin {
                    None => true,
                    Some(h) => (0..self.n).all(|x| !(cm >> x & 1 == 1 && dp >> x & 1 == 0 && self.heights[x] == h)),
                }
            }
            Constraint::Member(x, c, want) => {
                let (cm, cp) = self.eval(c);
                if *want {
                    cp >> x & 1 == 1
                } else {
                    cm >> x & 1 == 0
                }
            }
        }
    }

    fn to_interpretation(&self, sym: &Symbols) -> RankedInterpretation {
        let atom_ext = sym.atoms.iter().cloned().zip(self.atom_val.iter().copied()).collect();
        let role_ext = sym
            .roles
            .iter()
            .enumerate()
            .map(|(r, name)| {
                let pairs = (0..self.n)
                    .flat_map(|x| (0..self.n).filter(move |y| self.role_val[r][x] >> y & 1 == 1).map(move |y| (x, y)))
                    .collect();
                (name.clone(), pairs)
            })
            .collect();
        RankedInterpretation { domain: self.n, atom_ext, role_ext, height: self.heights.clone() }
    }
}

struct Search<'a> {
    sym: &'a Symbols,
    constraints: Vec<Constraint>,
    vars: Vec<Var>,
    nodes: u64,
    max_nodes: u64,
}

impl Search<'_> {
    fn run(
        &mut self,
        p: &mut Partial,
        depth: usize,
        visit: &mut dyn FnMut(RankedInterpretation) -> ControlFlow<()>,
    ) -> Result<ControlFlow<()>, OracleError> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(OracleError::NodesExceeded(self.max_nodes));
        }
        if !self.constraints.iter().all(|k| p.possible(k)) {
            return Ok(ControlFlow::Continue(()));
        }
        if depth == self.vars.len() {
            return Ok(visit(p.to_interpretation(self.sym)));
        }
        let v = self.vars[depth];
        for value in [false, true] {
            p.set(v, value);
            let flow = self.run(p, depth + 1, visit)?;
            p.unset(v);
            if flow.is_break() {
                return Ok(flow);
            }
        }
        Ok(ControlFlow::Continue(()))
    }
}

fn check_input(kb: &KnowledgeBase, extra: &[&Concept]) -> Result<(), OracleError> {
    match kb.concepts().chain(extra.iter().copied()).find(|c| c.has_nominals() || c.has_def_nominals()) {
        Some(c) => Err(OracleError::Nominal(c.to_string())),
        None => Ok(()),
    }
}

/// All height functions on `n` elements whose image is `0..=k` for some `k <= max_height`.
fn layerings(n: usize, max_height: u32, sorted: bool) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut h = vec![0u32; n];
    fn rec(i: usize, h: &mut Vec<u32>, max_height: u32, sorted: bool, out: &mut Vec<Vec<u32>>) {
        if i == h.len() {
            let top = h.iter().copied().max().unwrap_or(0);
            if (0..=top).all(|k| h.contains(&k)) {
                out.push(h.clone());
            }
            return;
        }
        let lo = if sorted && i > 0 { h[i - 1] } else { 0 };
        for v in lo..=max_height {
            h[i] = v;
            rec(i + 1, h, max_height, sorted, out);
        }
    }
    rec(0, &mut h, max_height, sorted, &mut out);
    out
}

fn variables(n: usize, atoms: usize, roles: usize) -> Vec<Var> {
    let mut vars = Vec::new();
    for x in 0..n {
        vars.extend((0..atoms).map(|a| Var::Atom(a, x)));
        for r in 0..roles {
            vars.extend((0..n).map(|y| Var::Role(r, x, y)));
        }
    }
    vars
}

fn kb_constraints(sym: &Symbols, kb: &KnowledgeBase) -> Vec<Constraint> {
    kb.tbox
        .iter()
        .map(|g| Constraint::Strict(sym.compile(&g.lhs), sym.compile(&g.rhs)))
        .chain(kb.dbox.iter().map(|g| Constraint::Defeasible(sym.compile(&g.lhs), sym.compile(&g.rhs))))
        .collect()
}

/// Visits ranked models of `kb` up to the budget. With `sorted`, heights are
/// non-decreasing along the domain, which loses no model up to renaming.
fn search_models(
    kb: &KnowledgeBase,
    extra: &[(usize, &Concept, bool)],
    budget: &OracleBudget,
    sorted: bool,
    visit: &mut dyn FnMut(RankedInterpretation) -> ControlFlow<()>,
) -> Result<ControlFlow<()>, OracleError> {
    let concepts: Vec<&Concept> = extra.iter().map(|e| e.1).collect();
    check_input(kb, &concepts)?;
    if budget.max_domain > 64 {
        return Err(OracleError::Domain(budget.max_domain));
    }
    let sym = Symbols::new(kb, &concepts);
    let mut nodes = 0;
    for n in 1..=budget.max_domain {
        let vars = variables(n, sym.atoms.len(), sym.roles.len());
        let mut constraints = kb_constraints(&sym, kb);
        constraints.extend(extra.iter().filter(|e| e.0 < n).map(|&(x, c, want)| Constraint::Member(x, sym.compile(c), want)));
        let mut search = Search { sym: &sym, constraints, vars, nodes, max_nodes: budget.max_nodes };
        for heights in layerings(n, budget.max_height, sorted) {
            let mut p = Partial::new(n, heights, sym.atoms.len(), sym.roles.len());
            if search.run(&mut p, 0, visit)?.is_break() {
                return Ok(ControlFlow::Break(()));
            }
        }
        nodes = search.nodes;
    }
    Ok(ControlFlow::Continue(()))
}

/// Every ranked model of `kb` within the budget, for KBs whose raw search
/// space fits `budget.max_space`.
pub fn enumerate_models(kb: &KnowledgeBase, budget: &OracleBudget) -> Result<Vec<RankedInterpretation>, OracleError> {
    let sig = signature(kb);
    let (a, r) = (sig.atoms.len() as u32, sig.roles.len() as u32);
    let mut space: u128 = 0;
    for n in 1..=budget.max_domain as u32 {
        let bits = n * a + n * n * r;
        let layers = layerings(n as usize, budget.max_height, false).len() as u128;
        space = space.saturating_add(if bits >= 100 { u128::MAX } else { (1u128 << bits).saturating_mul(layers) });
    }
    if space > budget.max_space {
        return Err(OracleError::SpaceExceeded(space));
    }
    let mut out = Vec::new();
    let _ = search_models(kb, &[], budget, false, &mut |m| {
        out.push(m);
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Some ranked model of `kb` within the budget.
pub fn find_model(kb: &KnowledgeBase, budget: &OracleBudget) -> Result<Option<RankedInterpretation>, OracleError> {
    first(kb, &[], budget)
}

fn first(
    kb: &KnowledgeBase,
    extra: &[(usize, &Concept, bool)],
    budget: &OracleBudget,
) -> Result<Option<RankedInterpretation>, OracleError> {
    let mut found = None;
    let _ = search_models(kb, extra, budget, true, &mut |m| {
        found = Some(m);
        ControlFlow::Break(())
    })?;
    Ok(found)
}

/// A bounded model in which some minimal element belongs to `c`, if any.
/// Its existence proves `c` is not exceptional.
pub fn normality_witness(
    kb: &KnowledgeBase,
    c: &Concept,
    budget: &OracleBudget,
) -> Result<Option<RankedInterpretation>, OracleError> {
    // with sorted heights element 0 is always minimal
    first(kb, &[(0, c, true)], budget)
}

/// True if no bounded model puts a minimal element in `c`.
pub fn exceptional_bounded(kb: &KnowledgeBase, c: &Concept, budget: &OracleBudget) -> Result<bool, OracleError> {
    Ok(normality_witness(kb, c, budget)?.is_none())
}

/// A bounded model of the TBox with an element in `q.lhs` but not in `q.rhs`.
pub fn classical_countermodel(
    tbox: &BTreeSet<StrictGci>,
    q: &StrictGci,
    budget: &OracleBudget,
) -> Result<Option<RankedInterpretation>, OracleError> {
    let kb = KnowledgeBase { tbox: tbox.clone(), dbox: BTreeSet::new() };
    let flat = OracleBudget { max_height: 0, ..*budget };
    first(&kb, &[(0, &q.lhs, true), (0, &q.rhs, false)], &flat)
}
