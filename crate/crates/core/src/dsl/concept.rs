use std::fmt;

use serde::{Deserialize, Serialize};

use super::vocab::{Dim, FeatureVocab};

/// De Bruijn variable reference. `0` is the innermost binder; with no binder
/// in scope it is the target object.
pub type Var = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuantKind {
    Exists,
    Forall,
    ExactlyOne,
}

impl QuantKind {
    pub const ALL: [QuantKind; 3] = [QuantKind::Exists, QuantKind::Forall, QuantKind::ExactlyOne];

    pub fn keyword(self) -> &'static str {
        match self {
            QuantKind::Exists => "exists",
            QuantKind::Forall => "forall",
            QuantKind::ExactlyOne => "exactly-one",
        }
    }
}

/// Range of a quantified variable: every object except the target, or every object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scope {
    Others,
    All,
}

impl Scope {
    pub fn keyword(self) -> &'static str {
        match self {
            Scope::Others => "others",
            Scope::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelKind {
    SameColor,
    SameShape,
    SameSize,
    SizeGt,
    SizeGe,
}

impl RelKind {
    pub const ALL: [RelKind; 5] =
        [RelKind::SameColor, RelKind::SameShape, RelKind::SameSize, RelKind::SizeGt, RelKind::SizeGe];

    pub fn keyword(self) -> &'static str {
        match self {
            RelKind::SameColor => "same-color",
            RelKind::SameShape => "same-shape",
            RelKind::SameSize => "same-size",
            RelKind::SizeGt => "size-gt",
            RelKind::SizeGe => "size-ge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    And,
    Or,
    Xor,
    Implies,
    Iff,
}

impl BinOp {
    pub const ALL: [BinOp; 5] = [BinOp::And, BinOp::Or, BinOp::Xor, BinOp::Implies, BinOp::Iff];

    pub fn keyword(self) -> &'static str {
        match self {
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Implies => "implies",
            BinOp::Iff => "iff",
        }
    }

    #[inline]
    pub fn apply(self, a: bool, b: bool) -> bool {
        match self {
            BinOp::And => a && b,
            BinOp::Or => a || b,
            BinOp::Xor => a != b,
            BinOp::Implies => !a || b,
            BinOp::Iff => a == b,
        }
    }
}

/// A logical rule over the target object and its set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Concept {
    Feature { dim: Dim, value: u8, var: Var },
    Not(Box<Concept>),
    Bin(BinOp, Box<Concept>, Box<Concept>),
    Quant { kind: QuantKind, scope: Scope, body: Box<Concept> },
    Rel { kind: RelKind, left: Var, right: Var },
    MajorityColor(Var),
    MinorityColor(Var),
}

impl Concept {
    pub fn feature(dim: Dim, value: u8) -> Concept {
        Concept::Feature { dim, value, var: 0 }
    }

    pub fn not(c: Concept) -> Concept {
        Concept::Not(Box::new(c))
    }

    pub fn bin(op: BinOp, a: Concept, b: Concept) -> Concept {
        Concept::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn and(a: Concept, b: Concept) -> Concept {
        Concept::bin(BinOp::And, a, b)
    }

    pub fn or(a: Concept, b: Concept) -> Concept {
        Concept::bin(BinOp::Or, a, b)
    }

    pub fn quant(kind: QuantKind, scope: Scope, body: Concept) -> Concept {
        Concept::Quant { kind, scope, body: Box::new(body) }
    }

    /// Node count.
    pub fn size(&self) -> usize {
        match self {
            Concept::Feature { .. } | Concept::Rel { .. } | Concept::MajorityColor(_) | Concept::MinorityColor(_) => 1,
            Concept::Not(c) => 1 + c.size(),
            Concept::Bin(_, a, b) => 1 + a.size() + b.size(),
            Concept::Quant { body, .. } => 1 + body.size(),
        }
    }

    /// Maximum nesting; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Concept::Feature { .. } | Concept::Rel { .. } | Concept::MajorityColor(_) | Concept::MinorityColor(_) => 1,
            Concept::Not(c) => 1 + c.depth(),
            Concept::Bin(_, a, b) => 1 + a.depth().max(b.depth()),
            Concept::Quant { body, .. } => 1 + body.depth(),
        }
    }

    /// True if the rule mentions quantifiers, relations or set-level color counts.
    pub fn is_first_order(&self) -> bool {
        match self {
            Concept::Feature { var, .. } => *var != 0,
            Concept::Not(c) => c.is_first_order(),
            Concept::Bin(_, a, b) => a.is_first_order() || b.is_first_order(),
            _ => true,
        }
    }

    /// Number of variables in scope that a reference may address, counting the
    /// target. Returns the largest `var + 1` minus enclosing binders, i.e. how many
    /// binders must surround this term for it to be closed.
    pub fn free_depth(&self) -> usize {
        fn go(c: &Concept, binders: usize) -> usize {
            let need = |v: Var| (v as usize + 1).saturating_sub(binders);
            match c {
                Concept::Feature { var, .. } => need(*var),
                Concept::MajorityColor(v) | Concept::MinorityColor(v) => need(*v),
                Concept::Rel { left, right, .. } => need(*left).max(need(*right)),
                Concept::Not(a) => go(a, binders),
                Concept::Bin(_, a, b) => go(a, binders).max(go(b, binders)),
                Concept::Quant { body, .. } => go(body, binders + 1),
            }
        }
        go(self, 0)
    }

    /// A concept is closed when every reference resolves to a binder or the target.
    pub fn is_closed(&self) -> bool {
        self.free_depth() <= 1
    }

    pub fn fits(&self, vocab: &FeatureVocab) -> bool {
        match self {
            Concept::Feature { dim, value, .. } => (*value as usize) < vocab.values(*dim).len(),
            Concept::Not(c) => c.fits(vocab),
            Concept::Bin(_, a, b) => a.fits(vocab) && b.fits(vocab),
            Concept::Quant { body, .. } => body.fits(vocab),
            _ => true,
        }
    }

    /// Canonical source text; parses back to an identical tree.
    pub fn display<'a>(&'a self, vocab: &'a FeatureVocab) -> ConceptDisplay<'a> {
        ConceptDisplay { concept: self, vocab }
    }

    pub fn to_source(&self, vocab: &FeatureVocab) -> String {
        self.display(vocab).to_string()
    }
}

pub struct ConceptDisplay<'a> {
    concept: &'a Concept,
    vocab: &'a FeatureVocab,
}

impl fmt::Display for ConceptDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_concept(self.concept, self.vocab, f)
    }
}

fn write_concept(c: &Concept, vocab: &FeatureVocab, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match c {
        Concept::Feature { dim, value, var } => {
            let name = vocab.values(*dim).get(*value as usize).map(String::as_str).unwrap_or("?");
            if *var == 0 {
                write!(f, "({} {})", dim.keyword(), name)
            } else {
                write!(f, "({} {} {})", dim.keyword(), name, var)
            }
        }
        Concept::Not(a) => {
            f.write_str("(not ")?;
            write_concept(a, vocab, f)?;
            f.write_str(")")
        }
        Concept::Bin(op, a, b) => {
            write!(f, "({} ", op.keyword())?;
            write_concept(a, vocab, f)?;
            f.write_str(" ")?;
            write_concept(b, vocab, f)?;
            f.write_str(")")
        }
        Concept::Quant { kind, scope, body } => {
            write!(f, "({} {} ", kind.keyword(), scope.keyword())?;
            write_concept(body, vocab, f)?;
            f.write_str(")")
        }
        Concept::Rel { kind, left, right } => write!(f, "({} {} {})", kind.keyword(), left, right),
        Concept::MajorityColor(v) | Concept::MinorityColor(v) => {
            let kw = if matches!(c, Concept::MajorityColor(_)) { "majority-color" } else { "minority-color" };
            if *v == 0 {
                write!(f, "({kw})")
            } else {
                write!(f, "({kw} {v})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf() -> Concept {
        Concept::feature(Dim::Color, 0)
    }

    #[test]
    fn size_and_depth() {
        assert_eq!((leaf().size(), leaf().depth()), (1, 1));
        let n = Concept::not(leaf());
        assert_eq!((n.size(), n.depth()), (2, 2));
        let t = Concept::and(leaf(), Concept::or(leaf(), leaf()));
        assert_eq!((t.size(), t.depth()), (5, 3));
    }

    #[test]
    fn closedness() {
        let open = Concept::Rel { kind: RelKind::SameColor, left: 0, right: 1 };
        assert!(!open.is_closed());
        assert!(Concept::quant(QuantKind::Exists, Scope::Others, open).is_closed());
    }

    #[test]
    fn propositional_vs_first_order() {
        assert!(!Concept::not(leaf()).is_first_order());
        assert!(Concept::MajorityColor(0).is_first_order());
    }
}
