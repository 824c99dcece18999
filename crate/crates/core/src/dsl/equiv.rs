use super::concept::Concept;
use super::eval::eval;
use super::vocab::{Context, FeatureVocab, Obj};
use super::DslError;

pub const DEFAULT_CONTEXT_CAP: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquivOptions {
    pub max_set_size: usize,
    /// Upper bound on enumerated contexts before giving up.
    pub context_cap: usize,
}

impl Default for EquivOptions {
    fn default() -> Self {
        EquivOptions { max_set_size: 5, context_cap: DEFAULT_CONTEXT_CAP }
    }
}

/// Calls `visit` once per context up to multiset-with-target equality: every
/// multiset of 1..=max_set_size universe objects, once per distinct target object.
/// Stops early when `visit` returns `false`. Returns the number of contexts visited.
pub fn for_each_context(
    vocab: &FeatureVocab,
    opts: EquivOptions,
    mut visit: impl FnMut(&Context) -> bool,
) -> Result<usize, DslError> {
    if opts.max_set_size == 0 {
        return Err(DslError::Context("max_set_size must be at least 1".into()));
    }
    let universe = vocab.universe();
    let mut picks: Vec<usize> = Vec::with_capacity(opts.max_set_size);
    let mut seen = 0usize;
    let mut stopped = false;

    fn rec(
        universe: &[Obj],
        start: usize,
        max: usize,
        picks: &mut Vec<usize>,
        seen: &mut usize,
        cap: usize,
        stopped: &mut bool,
        visit: &mut dyn FnMut(&Context) -> bool,
    ) -> Result<(), DslError> {
        if !picks.is_empty() {
            let objects: Vec<Obj> = picks.iter().map(|&i| universe[i]).collect();
            for pos in 0..picks.len() {
                // picks is nondecreasing, so the first occurrence of each object type stands for all.
                if pos > 0 && picks[pos] == picks[pos - 1] {
                    continue;
                }
                *seen += 1;
                if *seen > cap {
                    return Err(DslError::Budget { limit: cap });
                }
                if !visit(&Context::unchecked(objects.clone(), pos)) {
                    *stopped = true;
                    return Ok(());
                }
            }
        }
        if picks.len() == max {
            return Ok(());
        }
        for i in start..universe.len() {
            picks.push(i);
            rec(universe, i, max, picks, seen, cap, stopped, visit)?;
            picks.pop();
            if *stopped {
                break;
            }
        }
        Ok(())
    }

    rec(
        &universe,
        0,
        opts.max_set_size,
        &mut picks,
        &mut seen,
        opts.context_cap,
        &mut stopped,
        &mut visit,
    )?;
    Ok(seen)
}

/// First context on which `a` and `b` disagree, if any.
pub fn counterexample(
    a: &Concept,
    b: &Concept,
    vocab: &FeatureVocab,
    opts: EquivOptions,
) -> Result<Option<Context>, DslError> {
    let mut found = None;
    for_each_context(vocab, opts, |ctx| {
        if eval(a, ctx) != eval(b, ctx) {
            found = Some(ctx.clone());
            false
        } else {
            true
        }
    })?;
    Ok(found)
}

/// Counterexample with the fewest objects: searches set sizes 1, 2, ... up to
/// `opts.max_set_size` in turn.
pub fn smallest_counterexample(
    a: &Concept,
    b: &Concept,
    vocab: &FeatureVocab,
    opts: EquivOptions,
) -> Result<Option<Context>, DslError> {
    for n in 1..=opts.max_set_size.max(1) {
        if let Some(ctx) = counterexample(a, b, vocab, EquivOptions { max_set_size: n, ..opts })? {
            return Ok(Some(ctx));
        }
    }
    Ok(None)
}

/// Truth-functional equivalence over every context of up to `max_set_size` objects.
pub fn equivalent(a: &Concept, b: &Concept, vocab: &FeatureVocab, max_set_size: usize) -> Result<bool, DslError> {
    let opts = EquivOptions { max_set_size, ..EquivOptions::default() };
    Ok(counterexample(a, b, vocab, opts)?.is_none())
}
