//! Reader for the parenthesized prefix syntax.
//!
//! ```text
//! concept := feature | "(" "not" concept ")" | "(" binop concept concept+ ")"
//!          | "(" quant scope concept ")" | "(" rel var var ")"
//!          | "(" ("majority-color" | "minority-color") var? ")"
//! feature := name | "(" ("is-size" | "is-color" | "is-shape") name var? ")"
//! ```
//!
//! A bare feature name is shorthand for a test on variable 0. `and`/`or` accept
//! more than two operands and fold to the left. Grammar templates reuse the same
//! reader with nonterminal names allowed as holes.

use super::concept::{BinOp, Concept, QuantKind, RelKind, Scope, Var};
use super::vocab::{Dim, FeatureVocab};
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom { text: String, pos: usize },
    List { items: Vec<Sexp>, pos: usize },
}

impl Sexp {
    fn pos(&self) -> usize {
        match self {
            Sexp::Atom { pos, .. } | Sexp::List { pos, .. } => *pos,
        }
    }
}

fn syntax(pos: usize, msg: impl Into<String>) -> DslError {
    DslError::Syntax { pos, msg: msg.into() }
}

fn read(text: &str) -> Result<Sexp, DslError> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < bytes.len() && (bytes[*i] as char).is_ascii_whitespace() {
            *i += 1;
        }
    };
    fn go(text: &str, i: &mut usize, skip_ws: &dyn Fn(&mut usize)) -> Result<Sexp, DslError> {
        let bytes = text.as_bytes();
        skip_ws(i);
        if *i >= bytes.len() {
            return Err(syntax(*i, "unexpected end of input"));
        }
        match bytes[*i] {
            b'(' => {
                let pos = *i;
                *i += 1;
                let mut items = Vec::new();
                loop {
                    skip_ws(i);
                    if *i >= bytes.len() {
                        return Err(syntax(pos, "unclosed `(`"));
                    }
                    if bytes[*i] == b')' {
                        *i += 1;
                        break;
                    }
                    items.push(go(text, i, skip_ws)?);
                }
                Ok(Sexp::List { items, pos })
            }
            b')' => Err(syntax(*i, "unexpected `)`")),
            _ => {
                let pos = *i;
                while *i < bytes.len() && !(bytes[*i] as char).is_ascii_whitespace() && bytes[*i] != b'(' && bytes[*i] != b')' {
                    *i += 1;
                }
                Ok(Sexp::Atom { text: text[pos..*i].to_string(), pos })
            }
        }
    }
    let expr = go(text, &mut i, &skip_ws)?;
    skip_ws(&mut i);
    if i != bytes.len() {
        return Err(syntax(i, "trailing input after expression"));
    }
    Ok(expr)
}

/// A concept tree that may contain nonterminal holes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    /// Nonterminal index and the number of binders enclosing the hole.
    Hole { nonterminal: usize, binders: usize },
    Leaf(Concept),
    Not(Box<Pattern>),
    Bin(BinOp, Box<Pattern>, Box<Pattern>),
    Quant { kind: QuantKind, scope: Scope, body: Box<Pattern> },
}

impl Pattern {
    /// Nodes contributed by the pattern itself, excluding holes.
    pub fn own_size(&self) -> usize {
        match self {
            Pattern::Hole { .. } => 0,
            Pattern::Leaf(c) => c.size(),
            Pattern::Not(a) => 1 + a.own_size(),
            Pattern::Bin(_, a, b) => 1 + a.own_size() + b.own_size(),
            Pattern::Quant { body, .. } => 1 + body.own_size(),
        }
    }

    /// Holes in left-to-right order.
    pub fn holes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.collect_holes(&mut out);
        out
    }

    fn collect_holes(&self, out: &mut Vec<(usize, usize)>) {
        match self {
            Pattern::Hole { nonterminal, binders } => out.push((*nonterminal, *binders)),
            Pattern::Leaf(_) => {}
            Pattern::Not(a) => a.collect_holes(out),
            Pattern::Bin(_, a, b) => {
                a.collect_holes(out);
                b.collect_holes(out);
            }
            Pattern::Quant { body, .. } => body.collect_holes(out),
        }
    }

    /// Fills holes left to right from `fills`.
    pub fn instantiate(&self, fills: &mut impl Iterator<Item = Concept>) -> Concept {
        match self {
            Pattern::Hole { .. } => fills.next().expect("one fill per hole"),
            Pattern::Leaf(c) => c.clone(),
            Pattern::Not(a) => Concept::Not(Box::new(a.instantiate(fills))),
            Pattern::Bin(op, a, b) => {
                let a = a.instantiate(fills);
                let b = b.instantiate(fills);
                Concept::Bin(*op, Box::new(a), Box::new(b))
            }
            Pattern::Quant { kind, scope, body } => {
                Concept::Quant { kind: *kind, scope: *scope, body: Box::new(body.instantiate(fills)) }
            }
        }
    }

    fn into_concept(self) -> Concept {
        let mut none = std::iter::empty();
        self.instantiate(&mut none)
    }
}

struct Builder<'a> {
    vocab: &'a FeatureVocab,
    holes: Option<&'a dyn Fn(&str) -> Option<usize>>,
}

impl Builder<'_> {
    fn var(&self, s: &Sexp, binders: usize) -> Result<Var, DslError> {
        match s {
            Sexp::Atom { text, pos } => {
                let v: usize = text
                    .parse()
                    .map_err(|_| syntax(*pos, format!("expected a variable index, found `{text}`")))?;
                if v > binders || v > Var::MAX as usize {
                    return Err(DslError::UnboundVariable { pos: *pos, index: v });
                }
                Ok(v as Var)
            }
            Sexp::List { pos, .. } => Err(syntax(*pos, "expected a variable index, found a list")),
        }
    }

    fn opt_var(&self, rest: &[Sexp], binders: usize, head_pos: usize, max: usize) -> Result<Var, DslError> {
        match rest.len() {
            0 => Ok(0),
            1 => self.var(&rest[0], binders),
            _ if max == 1 => Err(syntax(rest[1].pos(), "too many arguments")),
            _ => Err(syntax(head_pos, "too many arguments")),
        }
    }

    fn build(&self, s: &Sexp, binders: usize) -> Result<Pattern, DslError> {
        match s {
            Sexp::Atom { text, pos } => {
                if let Some(nt) = self.holes.and_then(|h| h(text)) {
                    return Ok(Pattern::Hole { nonterminal: nt, binders });
                }
                match self.vocab.classify(text) {
                    Some((dim, value)) => Ok(Pattern::Leaf(Concept::Feature { dim, value: value as u8, var: 0 })),
                    None => Err(DslError::UnknownFeature { pos: *pos, name: text.clone() }),
                }
            }
            Sexp::List { items, pos } => {
                let Some((head, rest)) = items.split_first() else {
                    return Err(syntax(*pos, "empty list"));
                };
                let Sexp::Atom { text: head, pos: hpos } = head else {
                    return Err(syntax(head.pos(), "expected an operator keyword"));
                };
                let arity = |n: usize| -> Result<(), DslError> {
                    if rest.len() == n {
                        Ok(())
                    } else {
                        Err(syntax(*pos, format!("`{head}` takes {n} argument(s), got {}", rest.len())))
                    }
                };
                match head.as_str() {
                    "is-size" | "is-color" | "is-shape" => {
                        let dim = match head.as_str() {
                            "is-size" => Dim::Size,
                            "is-color" => Dim::Color,
                            _ => Dim::Shape,
                        };
                        if rest.is_empty() || rest.len() > 2 {
                            return Err(syntax(*pos, format!("`{head}` takes a value and an optional variable")));
                        }
                        let value = match &rest[0] {
                            Sexp::Atom { text, pos } => self
                                .vocab
                                .lookup(dim, text)
                                .ok_or_else(|| DslError::UnknownFeature { pos: *pos, name: text.clone() })?,
                            other => return Err(syntax(other.pos(), "expected a feature value")),
                        };
                        let var = self.opt_var(&rest[1..], binders, *hpos, 1)?;
                        Ok(Pattern::Leaf(Concept::Feature { dim, value: value as u8, var }))
                    }
                    "not" => {
                        arity(1)?;
                        Ok(Pattern::Not(Box::new(self.build(&rest[0], binders)?)))
                    }
                    "and" | "or" | "xor" | "implies" | "iff" => {
                        let op = match head.as_str() {
                            "and" => BinOp::And,
                            "or" => BinOp::Or,
                            "xor" => BinOp::Xor,
                            "implies" => BinOp::Implies,
                            _ => BinOp::Iff,
                        };
                        let variadic = matches!(op, BinOp::And | BinOp::Or);
                        if rest.len() < 2 || (!variadic && rest.len() != 2) {
                            return Err(syntax(*pos, format!("`{head}` takes two arguments, got {}", rest.len())));
                        }
                        let mut acc = self.build(&rest[0], binders)?;
                        for r in &rest[1..] {
                            acc = Pattern::Bin(op, Box::new(acc), Box::new(self.build(r, binders)?));
                        }
                        Ok(acc)
                    }
                    "exists" | "forall" | "exactly-one" => {
                        let kind = match head.as_str() {
                            "exists" => QuantKind::Exists,
                            "forall" => QuantKind::Forall,
                            _ => QuantKind::ExactlyOne,
                        };
                        arity(2)?;
                        let scope = match &rest[0] {
                            Sexp::Atom { text, .. } if text == "others" => Scope::Others,
                            Sexp::Atom { text, .. } if text == "all" => Scope::All,
                            other => return Err(syntax(other.pos(), "expected quantifier scope `others` or `all`")),
                        };
                        let body = self.build(&rest[1], binders + 1)?;
                        Ok(Pattern::Quant { kind, scope, body: Box::new(body) })
                    }
                    "same-color" | "same-shape" | "same-size" | "size-gt" | "size-ge" => {
                        let kind = RelKind::ALL.into_iter().find(|k| k.keyword() == head).unwrap();
                        arity(2)?;
                        let left = self.var(&rest[0], binders)?;
                        let right = self.var(&rest[1], binders)?;
                        Ok(Pattern::Leaf(Concept::Rel { kind, left, right }))
                    }
                    "majority-color" | "minority-color" => {
                        let v = self.opt_var(rest, binders, *hpos, 1)?;
                        Ok(Pattern::Leaf(if head == "majority-color" {
                            Concept::MajorityColor(v)
                        } else {
                            Concept::MinorityColor(v)
                        }))
                    }
                    other => Err(syntax(*hpos, format!("unknown operator `{other}`"))),
                }
            }
        }
    }
}

/// Parses a closed concept whose free variable is the target.
pub fn parse(text: &str, vocab: &FeatureVocab) -> Result<Concept, DslError> {
    let sexp = read(text)?;
    let b = Builder { vocab, holes: None };
    Ok(b.build(&sexp, 0)?.into_concept())
}

/// Parses a grammar template. `binders` is the number of binders already in scope
/// at the template's root; `holes` maps nonterminal names to indices.
pub fn parse_pattern(
    text: &str,
    vocab: &FeatureVocab,
    binders: usize,
    holes: &dyn Fn(&str) -> Option<usize>,
) -> Result<Pattern, DslError> {
    let sexp = read(text)?;
    let b = Builder { vocab, holes: Some(holes) };
    b.build(&sexp, binders)
}

/// Parses a concept file: one concept per line, `#` starts a comment.
/// Returns `(line number, result)` for every non-blank line.
pub fn parse_lines(text: &str, vocab: &FeatureVocab) -> Vec<(usize, Result<Concept, DslError>)> {
    text.lines()
        .enumerate()
        .filter_map(|(n, line)| {
            let body = line.split('#').next().unwrap_or("").trim();
            (!body.is_empty()).then(|| (n + 1, parse(body, vocab)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v() -> FeatureVocab {
        FeatureVocab::example()
    }

    #[test]
    fn parses_negated_feature() {
        let c = parse("(not (is-shape circle))", &v()).unwrap();
        assert_eq!(c, Concept::not(Concept::feature(Dim::Shape, 0)));
    }

    #[test]
    fn parses_xor_of_two_leaves() {
        let c = parse("(xor (is-shape circle) (is-color blue))", &v()).unwrap();
        assert_eq!(
            c,
            Concept::bin(BinOp::Xor, Concept::feature(Dim::Shape, 0), Concept::feature(Dim::Color, 0))
        );
    }

    #[test]
    fn parses_same_shape_as_yellow_object() {
        let c = parse("(exists others (and (same-shape 0 1) (is-color yellow 0)))", &v()).unwrap();
        let body = Concept::and(
            Concept::Rel { kind: RelKind::SameShape, left: 0, right: 1 },
            Concept::Feature { dim: Dim::Color, value: 2, var: 0 },
        );
        assert_eq!(c, Concept::quant(QuantKind::Exists, Scope::Others, body));
    }

    #[test]
    fn bare_names_and_variadic_and() {
        let c = parse("(and small blue circle)", &v()).unwrap();
        assert_eq!(c.to_source(&v()), "(and (and (is-size small) (is-color blue)) (is-shape circle))");
    }

    #[test]
    fn reports_errors_with_positions() {
        match parse("(and blue", &v()) {
            Err(DslError::Syntax { pos: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse("(is-color red)", &v()) {
            Err(DslError::UnknownFeature { pos: 10, name }) => assert_eq!(name, "red"),
            other => panic!("{other:?}"),
        }
        match parse("(same-color 0 1)", &v()) {
            Err(DslError::UnboundVariable { pos: 14, index: 1 }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse("(xor blue green yellow)", &v()).is_err());
        assert!(parse("(not blue) blue", &v()).is_err());
        assert!(parse("(frobnicate blue)", &v()).is_err());
        assert!(parse("(exists some blue)", &v()).is_err());
    }

    #[test]
    fn printed_form_reparses() {
        for src in [
            "(majority-color)",
            "(exists all (minority-color))",
            "(exists others (same-color 0 1))",
            "(forall others (size-ge 1 0))",
            "(exactly-one all (and (is-color blue) (is-shape circle 1)))",
        ] {
            let c = parse(src, &v()).unwrap();
            assert_eq!(c.to_source(&v()), src);
            assert_eq!(parse(&c.to_source(&v()), &v()).unwrap(), c);
        }
    }

    #[test]
    fn concept_files_skip_comments() {
        let text = "# rules\nblue\n\n(not circle) # trailing\n(bogus\n";
        let parsed = parse_lines(text, &v());
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[0].0, 2);
        assert!(parsed[1].1.is_ok());
        assert!(parsed[2].1.is_err());
    }
}
