use super::concept::{Concept, QuantKind, RelKind, Scope, Var};
use super::vocab::Context;

/// Variable environment: object positions, innermost binder last.
struct Env {
    slots: [usize; 16],
    len: usize,
}

impl Env {
    fn lookup(&self, v: Var) -> usize {
        self.slots[self.len - 1 - v as usize]
    }
}

/// Truth value of `c` for the target of `ctx`.
///
/// Total on closed concepts whose feature values fit the context's vocabulary.
pub fn eval(c: &Concept, ctx: &Context) -> bool {
    let mut env = Env { slots: [0; 16], len: 1 };
    env.slots[0] = ctx.target();
    go(c, ctx, &mut env)
}

fn color_count(ctx: &Context, color: u8) -> usize {
    ctx.objects().iter().filter(|o| o.color == color).count()
}

fn go(c: &Concept, ctx: &Context, env: &mut Env) -> bool {
    let objs = ctx.objects();
    match c {
        Concept::Feature { dim, value, var } => objs[env.lookup(*var)].feature(*dim) == *value,
        Concept::Not(a) => !go(a, ctx, env),
        Concept::Bin(op, a, b) => {
            let a = go(a, ctx, env);
            let b = go(b, ctx, env);
            op.apply(a, b)
        }
        Concept::Quant { kind, scope, body } => {
            assert!(env.len < env.slots.len(), "quantifier nesting too deep");
            let target = ctx.target();
            let mut hits = 0usize;
            let mut result = match kind {
                QuantKind::Exists => false,
                QuantKind::Forall => true,
                QuantKind::ExactlyOne => false,
            };
            env.len += 1;
            for i in 0..objs.len() {
                if *scope == Scope::Others && i == target {
                    continue;
                }
                env.slots[env.len - 1] = i;
                let holds = go(body, ctx, env);
                match kind {
                    QuantKind::Exists if holds => {
                        result = true;
                        break;
                    }
                    QuantKind::Forall if !holds => {
                        result = false;
                        break;
                    }
                    QuantKind::ExactlyOne if holds => {
                        hits += 1;
                        if hits > 1 {
                            break;
                        }
                    }
                    _ => {}
                }
            }
            env.len -= 1;
            if *kind == QuantKind::ExactlyOne {
                result = hits == 1;
            }
            result
        }
        Concept::Rel { kind, left, right } => {
            let a = objs[env.lookup(*left)];
            let b = objs[env.lookup(*right)];
            match kind {
                RelKind::SameColor => a.color == b.color,
                RelKind::SameShape => a.shape == b.shape,
                RelKind::SameSize => a.size == b.size,
                RelKind::SizeGt => a.size > b.size,
                RelKind::SizeGe => a.size >= b.size,
            }
        }
        Concept::MajorityColor(v) | Concept::MinorityColor(v) => {
            let me = objs[env.lookup(*v)].color;
            let mine = color_count(ctx, me);
            let mut others = objs.iter().map(|o| o.color).filter(|&c| c != me).peekable();
            if matches!(c, Concept::MajorityColor(_)) {
                others.all(|c| mine > color_count(ctx, c))
            } else {
                others.peek().is_some() && others.all(|c| mine < color_count(ctx, c))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, FeatureVocab, Obj};

    fn v() -> FeatureVocab {
        FeatureVocab::example()
    }

    fn obj(desc: &str) -> Obj {
        v().parse_object(desc).unwrap()
    }

    fn ctx(descs: &[&str], target: usize) -> Context {
        Context::new(descs.iter().map(|d| obj(d)).collect(), target).unwrap()
    }

    fn holds(src: &str, c: &Context) -> bool {
        eval(&parse(src, &v()).unwrap(), c)
    }

    #[test]
    fn negated_shape_on_triangle() {
        assert!(holds("(not (is-shape circle))", &ctx(&["medium blue triangle"], 0)));
    }

    #[test]
    fn implication_with_false_antecedent() {
        assert!(holds("(implies circle blue)", &ctx(&["small green rectangle"], 0)));
    }

    #[test]
    fn unique_blue_object_fails_when_another_is_blue() {
        let c = ctx(&["small blue circle", "large blue rectangle", "medium green circle"], 0);
        assert!(!holds("(and blue (exactly-one all (is-color blue 0)))", &c));
        assert!(!holds("(and blue (not (exists others (is-color blue 0))))", &c));
        let lone = ctx(&["small blue circle", "large green rectangle", "medium green circle"], 0);
        assert!(holds("(and blue (exactly-one all (is-color blue 0)))", &lone));
    }

    #[test]
    fn others_scope_excludes_target_but_all_includes_it() {
        let c = ctx(&["small blue triangle", "large green circle"], 0);
        assert!(!holds("(exists others (is-shape triangle 0))", &c));
        assert!(holds("(exists all (is-shape triangle 0))", &c));
        assert!(holds("(forall others (size-gt 0 1))", &c));
        assert!(!holds("(forall all (size-gt 0 1))", &c));
    }

    #[test]
    fn superlatives_admit_ties() {
        let c = ctx(&["large blue circle", "large green circle", "small green circle"], 0);
        assert!(holds("(forall others (size-ge 1 0))", &c));
        assert!(!holds("(forall others (size-gt 1 0))", &c));
    }

    #[test]
    fn same_shape_as_yellow_object() {
        let src = "(exists others (and (same-shape 0 1) (is-color yellow 0)))";
        let c = ctx(&["small blue circle", "large yellow circle", "medium yellow triangle"], 0);
        assert!(holds(src, &c));
        assert!(!holds(src, &c.with_target(1).unwrap()));
        assert!(!holds(src, &c.with_target(2).unwrap()));
    }

    #[test]
    fn majority_and_minority_are_strict() {
        let c = ctx(&["small blue circle", "small blue circle", "small green circle"], 0);
        assert!(holds("(majority-color)", &c));
        assert!(!holds("(minority-color)", &c));
        assert!(holds("(minority-color)", &c.with_target(2).unwrap()));
        let tie = ctx(&["small blue circle", "small green circle"], 0);
        assert!(!holds("(majority-color)", &tie));
        assert!(!holds("(minority-color)", &tie));
        let mono = ctx(&["small blue circle", "large blue circle"], 1);
        assert!(holds("(majority-color)", &mono));
        assert!(!holds("(minority-color)", &mono));
    }

    #[test]
    fn nested_quantifiers_address_outer_binders() {
        // Same color as every other object of the same shape.
        let src = "(forall others (implies (same-shape 0 1) (same-color 0 1)))";
        let c = ctx(&["small blue circle", "large blue circle", "small green triangle"], 0);
        assert!(holds(src, &c));
        let d = ctx(&["small blue circle", "large green circle"], 0);
        assert!(!holds(src, &d));
        // Some object is larger than every other object.
        let nested = "(exists all (forall all (size-ge 1 0)))";
        assert!(holds(nested, &c));
    }
}
