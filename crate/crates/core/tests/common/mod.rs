#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;

use elrc::model::{Concept, DefeasibleGci, KnowledgeBase, StrictGci};
use elrc::parse::{parse_concept, parse_kb, SourceDocument};

pub const BLOOD: &str = "tbox:
  BRBC <= MRBC
  ARBC <= VRBC
  MRBC <= VRBC
  (some hasN. top) & NotN <= bot
dbox:
  VRBC <~ some hasCM. top
  VRBC <~ some hasN. top
  MRBC <~ NotN
";

pub const BLOOD_INDIVIDUALS: &str = "tbox:
  BRBC <= MRBC
  ARBC <= VRBC
  MRBC <= VRBC
  (some hasN. top) & NotN <= bot
  <a> <= BRBC
  <b> <= ARBC
dbox:
  VRBC <~ some hasCM. top
  VRBC <~ some hasN. top
  MRBC <~ NotN
";

pub const EXINFTY: &str = "tbox:
  A <= B
  B & D <= bot
dbox:
  B <~ C
  A <~ D
  E <~ some r. A
";

pub const PENGUIN: &str = "tbox:
  F & NF <= bot
dbox:
  P <~ B
  B <~ F
  P <~ NF
  B <~ W
";

pub const ABOX: &str = "tbox:
  <a> <= some r. <b>
  C & D <= bot
dbox:
  top <~ C
  some r. C <~ D
";

pub const NOSAFE: &str = "tbox:
  A <= {a}
  B <= {a}
  A <= some r. B
";

pub fn kb(text: &str) -> KnowledgeBase {
    parse_kb(&SourceDocument::inline(text)).unwrap()
}

pub fn c(text: &str) -> Concept {
    parse_concept(text).unwrap()
}

pub fn d(l: &str, r: &str) -> DefeasibleGci {
    DefeasibleGci::new(c(l), c(r))
}

pub fn s(l: &str, r: &str) -> StrictGci {
    StrictGci::new(c(l), c(r))
}

/// Shape of randomly generated KBs.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub atoms: usize,
    pub roles: usize,
    pub tbox: (usize, usize),
    pub dbox: (usize, usize),
    /// Nesting depth of generated concepts.
    pub depth: u32,
    /// Chance that a strict axiom has `bot` on the right.
    pub bot: f64,
    /// Individuals used in safe positions; 0 for nominal-free KBs.
    pub individuals: usize,
}

impl Shape {
    pub fn small() -> Self {
        Shape { atoms: 5, roles: 1, tbox: (0, 6), dbox: (1, 6), depth: 1, bot: 0.15, individuals: 0 }
    }

    pub fn tiny() -> Self {
        Shape { atoms: 3, roles: 1, tbox: (0, 2), dbox: (0, 2), depth: 1, bot: 0.2, individuals: 0 }
    }
}

pub fn atom(rng: &mut StdRng, shape: &Shape) -> Concept {
    Concept::atom(format!("A{}", rng.gen_range(0..shape.atoms)))
}

pub fn concept(rng: &mut StdRng, shape: &Shape, depth: u32) -> Concept {
    let roll = rng.gen_range(0..10);
    if depth == 0 || roll < 5 {
        return if rng.gen_bool(0.05) { Concept::Top } else { atom(rng, shape) };
    }
    if roll < 8 {
        let role = format!("r{}", rng.gen_range(0..shape.roles));
        let filler = if shape.individuals > 0 && rng.gen_bool(0.2) {
            nominal(rng, shape)
        } else {
            concept(rng, shape, depth - 1)
        };
        Concept::exists(role.as_str(), filler)
    } else {
        Concept::and([concept(rng, shape, depth - 1), concept(rng, shape, depth - 1)])
    }
}

fn nominal(rng: &mut StdRng, shape: &Shape) -> Concept {
    let a = format!("a{}", rng.gen_range(0..shape.individuals));
    if rng.gen_bool(0.5) {
        Concept::nominal(a.as_str())
    } else {
        Concept::def_nominal(a.as_str())
    }
}

fn lhs(rng: &mut StdRng, shape: &Shape) -> Concept {
    if shape.individuals > 0 && rng.gen_bool(0.2) {
        nominal(rng, shape)
    } else {
        concept(rng, shape, shape.depth)
    }
}

pub fn random_kb(rng: &mut StdRng, shape: &Shape) -> KnowledgeBase {
    let mut kb = KnowledgeBase::default();
    let nt = rng.gen_range(shape.tbox.0..=shape.tbox.1);
    let nd = rng.gen_range(shape.dbox.0..=shape.dbox.1);
    // duplicates collapse, so retry a bounded number of times
    for _ in 0..nt * 4 {
        if kb.tbox.len() == nt {
            break;
        }
        let l = lhs(rng, shape);
        let r = if rng.gen_bool(shape.bot) { Concept::Bot } else { concept(rng, shape, shape.depth) };
        kb.tbox.insert(StrictGci::new(l, r));
    }
    for _ in 0..nd * 4 {
        if kb.dbox.len() == nd {
            break;
        }
        kb.dbox.insert(DefeasibleGci::new(lhs(rng, shape), concept(rng, shape, shape.depth)));
    }
    kb
}

/// Atoms `A0..` of the shape, plus `top`.
pub fn atom_pool(shape: &Shape) -> Vec<Concept> {
    let mut pool: Vec<Concept> = (0..shape.atoms).map(|i| Concept::atom(format!("A{i}"))).collect();
    pool.push(Concept::Top);
    pool
}
