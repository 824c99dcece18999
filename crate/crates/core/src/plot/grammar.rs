use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PlotError;
use crate::dsl::{self, Concept, FeatureVocab, Pattern};

/// Grammar file entry: `nonterminal -> template` with an unnormalized weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionSpec {
    pub nonterminal: String,
    pub template: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarSpec {
    pub start: String,
    pub productions: Vec<ProductionSpec>,
}

#[derive(Debug, Clone)]
pub struct Production {
    pub nonterminal: usize,
    pub template: String,
    pub pattern: Pattern,
    pub log_prob: f64,
    own_size: usize,
    /// Nonterminal of each hole, left to right.
    holes: Vec<usize>,
}

/// A probabilistic grammar over concepts. Each nonterminal lives at a fixed
/// binder depth, so every expansion is well scoped.
#[derive(Debug, Clone)]
pub struct Grammar {
    names: Vec<String>,
    depths: Vec<usize>,
    productions: Vec<Production>,
    by_nonterminal: Vec<Vec<usize>>,
    start: usize,
    /// Order in which unit productions (`A -> B`) must be resolved.
    unit_order: Vec<usize>,
}

pub const DEFAULT_GRAMMAR: &str = include_str!("default_grammar.json");

impl Grammar {
    pub fn from_spec(spec: &GrammarSpec, vocab: &FeatureVocab) -> Result<Grammar, PlotError> {
        let mut names: Vec<String> = Vec::new();
        for p in &spec.productions {
            if !names.contains(&p.nonterminal) {
                names.push(p.nonterminal.clone());
            }
        }
        let index = |n: &str| names.iter().position(|x| x == n);
        let start = index(&spec.start)
            .ok_or_else(|| PlotError::Grammar(format!("start symbol `{}` has no productions", spec.start)))?;
        for n in &names {
            if vocab.classify(n).is_some() {
                return Err(PlotError::Grammar(format!("nonterminal `{n}` collides with a feature name")));
            }
        }
        for p in &spec.productions {
            if !(p.weight > 0.0 && p.weight.is_finite()) {
                return Err(PlotError::Grammar(format!("weight of `{}` must be positive", p.template)));
            }
        }

        // Assign binder depths from the start symbol outwards.
        let mut depths: Vec<Option<usize>> = vec![None; names.len()];
        depths[start] = Some(0);
        let mut parsed: Vec<Option<Pattern>> = vec![None; spec.productions.len()];
        let mut frontier = vec![start];
        while let Some(nt) = frontier.pop() {
            let d = depths[nt].unwrap();
            for (i, p) in spec.productions.iter().enumerate() {
                if index(&p.nonterminal) != Some(nt) {
                    continue;
                }
                let pat = dsl::parse_pattern(&p.template, vocab, d, &|h| index(h))
                    .map_err(|e| PlotError::Grammar(format!("template `{}`: {e}", p.template)))?;
                for (child, binders) in pat.holes() {
                    match depths[child] {
                        None => {
                            depths[child] = Some(binders);
                            frontier.push(child);
                        }
                        Some(b) if b != binders => {
                            return Err(PlotError::Grammar(format!(
                                "nonterminal `{}` is used at binder depths {b} and {binders}",
                                names[child]
                            )))
                        }
                        Some(_) => {}
                    }
                }
                parsed[i] = Some(pat);
            }
        }
        if let Some(i) = depths.iter().position(Option::is_none) {
            return Err(PlotError::Grammar(format!("nonterminal `{}` is unreachable", names[i])));
        }
        let depths: Vec<usize> = depths.into_iter().map(Option::unwrap).collect();

        let mut totals = vec![0.0; names.len()];
        for p in &spec.productions {
            totals[index(&p.nonterminal).unwrap()] += p.weight;
        }
        let mut productions = Vec::with_capacity(spec.productions.len());
        let mut by_nonterminal = vec![Vec::new(); names.len()];
        for (p, pat) in spec.productions.iter().zip(parsed) {
            let nt = index(&p.nonterminal).unwrap();
            let pattern = pat.expect("reachable productions are parsed");
            let holes = pattern.holes().into_iter().map(|(n, _)| n).collect();
            by_nonterminal[nt].push(productions.len());
            productions.push(Production {
                nonterminal: nt,
                template: p.template.clone(),
                own_size: pattern.own_size(),
                pattern,
                log_prob: (p.weight / totals[nt]).ln(),
                holes,
            });
        }

        let unit_order = unit_order(&names, &productions)?;
        Ok(Grammar { names, depths, productions, by_nonterminal, start, unit_order })
    }

    pub fn from_json(text: &str, vocab: &FeatureVocab) -> Result<Grammar, PlotError> {
        let spec: GrammarSpec = serde_json::from_str(text).map_err(|e| PlotError::Grammar(e.to_string()))?;
        Grammar::from_spec(&spec, vocab)
    }

    /// The bundled first-order grammar with uniform weights per nonterminal.
    pub fn default_for(vocab: &FeatureVocab) -> Grammar {
        let mut spec: GrammarSpec = serde_json::from_str(DEFAULT_GRAMMAR).expect("bundled grammar parses");
        // Feature productions are generated from the vocabulary.
        for dim in crate::dsl::Dim::ALL {
            for v in vocab.values(dim) {
                spec.productions.push(ProductionSpec {
                    nonterminal: "F".into(),
                    template: format!("({} {v})", dim.keyword()),
                    weight: 1.0,
                });
                spec.productions.push(ProductionSpec {
                    nonterminal: "G".into(),
                    template: format!("({} {v} 0)", dim.keyword()),
                    weight: 1.0,
                });
            }
        }
        Grammar::from_spec(&spec, vocab).expect("bundled grammar is well formed")
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn nonterminal_name(&self, nt: usize) -> &str {
        &self.names[nt]
    }

    pub fn depth_of(&self, nt: usize) -> usize {
        self.depths[nt]
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn productions_of(&self, nt: usize) -> &[usize] {
        &self.by_nonterminal[nt]
    }

    /// `table[nt][s]` = total prior probability of derivations from `nt` whose
    /// concept has exactly `s` nodes.
    pub fn inside_table(&self, max_size: usize) -> InsideTable {
        let n = self.names.len();
        let mut mass = vec![vec![0.0; max_size + 1]; n];
        for s in 1..=max_size {
            for &nt in &self.unit_order {
                let mut total = 0.0;
                for &pi in &self.by_nonterminal[nt] {
                    let p = &self.productions[pi];
                    total += p.log_prob.exp() * split_mass(&mass, &p.holes, p.own_size, s);
                }
                mass[nt][s] = total;
            }
        }
        InsideTable { mass }
    }

    /// Every concept derivable from the start symbol with at most `max_size`
    /// nodes, each listed once with its total prior log-probability.
    pub fn enumerate(&self, max_size: usize, cap: usize) -> Result<Vec<(Concept, f64)>, PlotError> {
        if max_size == 0 {
            return Err(PlotError::Grammar("max_size must be at least 1".into()));
        }
        let n = self.names.len();
        let mut lists: Vec<Vec<Vec<(Concept, f64)>>> = vec![vec![Vec::new(); max_size + 1]; n];
        let mut produced = 0usize;
        for s in 1..=max_size {
            for &nt in &self.unit_order {
                let mut out = Vec::new();
                for &pi in &self.by_nonterminal[nt] {
                    let p = &self.productions[pi];
                    if p.own_size > s {
                        continue;
                    }
                    expand(&lists, p, s, &mut out, &mut produced, cap)?;
                }
                lists[nt][s] = out;
            }
        }
        let mut index: HashMap<Concept, usize> = HashMap::new();
        let mut merged: Vec<(Concept, f64)> = Vec::new();
        for bucket in lists[self.start].iter_mut().skip(1) {
            for (c, lp) in std::mem::take(bucket) {
                match index.get(&c) {
                    Some(&i) => merged[i].1 = log_add(merged[i].1, lp),
                    None => {
                        index.insert(c.clone(), merged.len());
                        merged.push((c, lp));
                    }
                }
            }
        }
        Ok(merged)
    }

    /// Draws a derivation from `nt` restricted to at most `budget` nodes.
    pub fn sample<R: Rng + ?Sized>(&self, table: &InsideTable, nt: usize, budget: usize, rng: &mut R) -> Option<Derivation> {
        let budget = budget.min(table.max_size());
        let weights: Vec<f64> = (1..=budget).map(|s| table.mass[nt][s]).collect();
        let s = 1 + pick(&weights, rng)?;
        Some(self.sample_exact(table, nt, s, rng))
    }

    fn sample_exact<R: Rng + ?Sized>(&self, table: &InsideTable, nt: usize, size: usize, rng: &mut R) -> Derivation {
        let prods = &self.by_nonterminal[nt];
        let weights: Vec<f64> = prods
            .iter()
            .map(|&pi| {
                let p = &self.productions[pi];
                p.log_prob.exp() * split_mass(&table.mass, &p.holes, p.own_size, size)
            })
            .collect();
        let pi = prods[pick(&weights, rng).expect("positive mass at this size")];
        let p = &self.productions[pi];
        let sizes = sample_split(&table.mass, &p.holes, size - p.own_size, rng);
        let children = p
            .holes
            .iter()
            .zip(sizes)
            .map(|(&child, s)| self.sample_exact(table, child, s, rng))
            .collect();
        Derivation { production: pi, children }
    }

    /// Builds the concept a derivation denotes.
    pub fn concept(&self, d: &Derivation) -> Concept {
        let kids: Vec<Concept> = d.children.iter().map(|c| self.concept(c)).collect();
        self.productions[d.production].pattern.instantiate(&mut kids.into_iter())
    }

    pub fn log_prob(&self, d: &Derivation) -> f64 {
        self.productions[d.production].log_prob + d.children.iter().map(|c| self.log_prob(c)).sum::<f64>()
    }

    pub fn derivation_size(&self, d: &Derivation) -> usize {
        self.productions[d.production].own_size + d.children.iter().map(|c| self.derivation_size(c)).sum::<usize>()
    }
}

/// A derivation tree: production index plus one child per hole.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Derivation {
    pub production: usize,
    pub children: Vec<Derivation>,
}

impl Derivation {
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Derivation::node_count).sum::<usize>()
    }

    /// Node at preorder position `i`.
    pub fn node(&self, i: usize) -> Option<&Derivation> {
        if i == 0 {
            return Some(self);
        }
        let mut k = i - 1;
        for c in &self.children {
            let n = c.node_count();
            if k < n {
                return c.node(k);
            }
            k -= n;
        }
        None
    }

    pub fn node_mut(&mut self, i: usize) -> Option<&mut Derivation> {
        if i == 0 {
            return Some(self);
        }
        let mut k = i - 1;
        for c in self.children.iter_mut() {
            let n = c.node_count();
            if k < n {
                return c.node_mut(k);
            }
            k -= n;
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct InsideTable {
    mass: Vec<Vec<f64>>,
}

impl InsideTable {
    pub fn max_size(&self) -> usize {
        self.mass[0].len() - 1
    }

    pub fn mass(&self, nt: usize, size: usize) -> f64 {
        self.mass[nt].get(size).copied().unwrap_or(0.0)
    }

    /// Prior mass of derivations from `nt` with at most `budget` nodes.
    pub fn mass_upto(&self, nt: usize, budget: usize) -> f64 {
        self.mass[nt].iter().take(budget + 1).sum()
    }
}

fn unit_order(names: &[String], productions: &[Production]) -> Result<Vec<usize>, PlotError> {
    // Edges nt -> child for productions `nt -> child` that add no nodes.
    let n = names.len();
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in productions {
        if p.own_size == 0 {
            if p.holes.len() != 1 {
                return Err(PlotError::Grammar(format!("template `{}` produces no nodes", p.template)));
            }
            deps[p.nonterminal].push(p.holes[0]);
        }
    }
    // Depth-first topological sort, children first.
    let mut state = vec![0u8; n];
    let mut order = Vec::with_capacity(n);
    fn visit(v: usize, deps: &[Vec<usize>], state: &mut [u8], order: &mut Vec<usize>, names: &[String]) -> Result<(), PlotError> {
        match state[v] {
            2 => return Ok(()),
            1 => return Err(PlotError::Grammar(format!("unit-production cycle through `{}`", names[v]))),
            _ => {}
        }
        state[v] = 1;
        for &c in &deps[v] {
            visit(c, deps, state, order, names)?;
        }
        state[v] = 2;
        order.push(v);
        Ok(())
    }
    for v in 0..n {
        visit(v, &deps, &mut state, &mut order, names)?;
    }
    Ok(order)
}

/// Sum over ways to split `size - own` nodes among the holes (each >= 1) of the
/// product of hole masses.
fn split_mass(mass: &[Vec<f64>], holes: &[usize], own: usize, size: usize) -> f64 {
    if own > size {
        return 0.0;
    }
    fn go(mass: &[Vec<f64>], holes: &[usize], rem: usize) -> f64 {
        match holes {
            [] => (rem == 0) as u8 as f64,
            [last] => mass[*last].get(rem).copied().unwrap_or(0.0),
            [first, rest @ ..] => {
                let mut t = 0.0;
                for s in 1..=rem.saturating_sub(rest.len()) {
                    let m = mass[*first][s];
                    if m > 0.0 {
                        t += m * go(mass, rest, rem - s);
                    }
                }
                t
            }
        }
    }
    go(mass, holes, size - own)
}

fn sample_split<R: Rng + ?Sized>(mass: &[Vec<f64>], holes: &[usize], rem: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(holes.len());
    let mut rem = rem;
    for (i, &h) in holes.iter().enumerate() {
        let rest = &holes[i + 1..];
        if rest.is_empty() {
            out.push(rem);
            break;
        }
        let max_first = rem.saturating_sub(rest.len());
        let weights: Vec<f64> = (1..=max_first).map(|s| mass[h][s] * split_mass(mass, rest, 0, rem - s)).collect();
        let s = 1 + pick(&weights, rng).expect("positive split mass");
        out.push(s);
        rem -= s;
    }
    out
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return Some(i);
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}

fn expand(
    lists: &[Vec<Vec<(Concept, f64)>>],
    p: &Production,
    size: usize,
    out: &mut Vec<(Concept, f64)>,
    produced: &mut usize,
    cap: usize,
) -> Result<(), PlotError> {
    fn go(
        lists: &[Vec<Vec<(Concept, f64)>>],
        p: &Production,
        hole: usize,
        rem: usize,
        picked: &mut Vec<(usize, usize)>,
        out: &mut Vec<(Concept, f64)>,
        produced: &mut usize,
        cap: usize,
    ) -> Result<(), PlotError> {
        if hole == p.holes.len() {
            if rem != 0 {
                return Ok(());
            }
            let mut lp = p.log_prob;
            let kids: Vec<Concept> = picked
                .iter()
                .zip(&p.holes)
                .map(|(&(s, i), &nt)| {
                    let (c, l) = &lists[nt][s][i];
                    lp += l;
                    c.clone()
                })
                .collect();
            *produced += 1;
            if *produced > cap {
                return Err(PlotError::Budget { limit: cap });
            }
            out.push((p.pattern.instantiate(&mut kids.into_iter()), lp));
            return Ok(());
        }
        let left = p.holes.len() - hole - 1;
        let nt = p.holes[hole];
        let hi = if left == 0 { rem } else { rem.saturating_sub(left) };
        let lo = if left == 0 { rem } else { 1 };
        for s in lo.max(1)..=hi {
            for i in 0..lists[nt][s].len() {
                picked.push((s, i));
                go(lists, p, hole + 1, rem - s, picked, out, produced, cap)?;
                picked.pop();
            }
        }
        Ok(())
    }
    let mut picked = Vec::with_capacity(p.holes.len());
    go(lists, p, 0, size - p.own_size, &mut picked, out, produced, cap)
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab() -> FeatureVocab {
        FeatureVocab::example()
    }

    fn spec(start: &str, prods: &[(&str, &str, f64)]) -> GrammarSpec {
        GrammarSpec {
            start: start.into(),
            productions: prods
                .iter()
                .map(|(n, t, w)| ProductionSpec { nonterminal: n.to_string(), template: t.to_string(), weight: *w })
                .collect(),
        }
    }

    #[test]
    fn two_leaf_grammar() {
        let g = Grammar::from_spec(&spec("S", &[("S", "blue", 0.5), ("S", "circle", 0.5)]), &vocab()).unwrap();
        let hs = g.enumerate(1, 100).unwrap();
        assert_eq!(hs.len(), 2);
        for (_, lp) in hs {
            assert!((lp - 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn conjunction_grammar_counts_and_mass() {
        let g = Grammar::from_spec(
            &spec("S", &[("S", "blue", 0.4), ("S", "circle", 0.4), ("S", "(and S S)", 0.2)]),
            &vocab(),
        )
        .unwrap();
        let hs = g.enumerate(3, 100).unwrap();
        assert_eq!(hs.len(), 6);
        let total: f64 = hs.iter().map(|(_, lp)| lp.exp()).sum();
        // 0.8 from leaves plus 0.2 * 0.8^2 from size-3 conjunctions.
        assert!((total - (0.8 + 0.2 * 0.64)).abs() < 1e-12);
        assert!(total < 1.0);
        let t = g.inside_table(3);
        assert!((t.mass_upto(g.start(), 3) - total).abs() < 1e-12);
    }

    #[test]
    fn leaf_only_grammar_has_full_mass() {
        let g = Grammar::from_spec(&spec("S", &[("S", "blue", 1.0), ("S", "green", 3.0)]), &vocab()).unwrap();
        let total: f64 = g.enumerate(4, 100).unwrap().iter().map(|(_, lp)| lp.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ambiguous_derivations_merge() {
        let g = Grammar::from_spec(
            &spec("S", &[("S", "blue", 1.0), ("S", "A", 1.0), ("A", "blue", 1.0)]),
            &vocab(),
        )
        .unwrap();
        let hs = g.enumerate(1, 100).unwrap();
        assert_eq!(hs.len(), 1);
        assert!((hs[0].1 - 0.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grammars() {
        let v = vocab();
        assert!(Grammar::from_spec(&spec("S", &[("S", "blue", 0.0)]), &v).is_err());
        assert!(Grammar::from_spec(&spec("T", &[("S", "blue", 1.0)]), &v).is_err());
        assert!(Grammar::from_spec(&spec("S", &[("S", "A", 1.0), ("A", "S", 1.0)]), &v).is_err());
        assert!(Grammar::from_spec(&spec("S", &[("S", "(same-color 0 1)", 1.0)]), &v).is_err());
        assert!(Grammar::from_spec(&spec("S", &[("S", "blue", 1.0), ("X", "green", 1.0)]), &v).is_err());
        // B used both inside and outside a binder.
        assert!(Grammar::from_spec(
            &spec("S", &[("S", "(and B (exists all B))", 1.0), ("B", "blue", 1.0)]),
            &v
        )
        .is_err());
        assert!(Grammar::from_spec(&spec("blue", &[("blue", "green", 1.0)]), &v).is_err());
    }

    #[test]
    fn binders_scope_nonterminals() {
        let g = Grammar::from_spec(
            &spec("S", &[("S", "(exists others B)", 1.0), ("B", "(same-color 0 1)", 1.0), ("B", "(is-color blue 0)", 1.0)]),
            &vocab(),
        )
        .unwrap();
        assert_eq!(g.enumerate(2, 100).unwrap().len(), 2);
    }

    #[test]
    fn default_grammar_loads() {
        let g = Grammar::default_for(&vocab());
        let hs = g.enumerate(3, 1_000_000).unwrap();
        assert!(hs.iter().all(|(c, _)| c.is_closed() && c.size() <= 3));
        let srcs: Vec<String> = hs.iter().map(|(c, _)| c.to_source(&vocab())).collect();
        for needle in ["(is-color blue)", "(or (is-color blue) (is-size small))", "(majority-color)"] {
            assert!(srcs.iter().any(|s| s == needle), "{needle} missing");
        }
    }

    #[test]
    fn exact_sampling_matches_enumerated_prior() {
        let g = Grammar::from_spec(
            &spec("S", &[("S", "blue", 0.3), ("S", "circle", 0.3), ("S", "(not S)", 0.2), ("S", "(or S S)", 0.2)]),
            &vocab(),
        )
        .unwrap();
        let max = 4;
        let hs = g.enumerate(max, 1000).unwrap();
        let z: f64 = hs.iter().map(|(_, lp)| lp.exp()).sum();
        let table = g.inside_table(max);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 200_000;
        let mut counts: HashMap<Concept, usize> = HashMap::new();
        for _ in 0..n {
            let d = g.sample(&table, g.start(), max, &mut rng).unwrap();
            assert!(g.derivation_size(&d) <= max);
            *counts.entry(g.concept(&d)).or_default() += 1;
        }
        let tv: f64 = hs
            .iter()
            .map(|(c, lp)| (lp.exp() / z - *counts.get(c).unwrap_or(&0) as f64 / n as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "tv = {tv}");
    }
}
