use super::learner::{predictive, CompiledList, HypothesisSpace};
use super::posterior::NoiseParams;
use super::PlotError;
use crate::exemplar::ExemplarList;
use crate::metrics::r_squared;

/// One training list with human proportions aligned to its objects.
#[derive(Debug, Clone)]
pub struct FitTarget<'a> {
    pub list: &'a ExemplarList,
    pub human: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub noise: NoiseParams,
    /// `None` where the predictions have zero variance.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub best: NoiseParams,
    pub r2: f64,
    pub surface: Vec<FitPoint>,
}

/// The α×β lattice `{0, step, 2·step, ..., 1}²`.
pub fn lattice(step: f64) -> Result<Vec<NoiseParams>, PlotError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(PlotError::Fit(format!("lattice step {step} outside (0, 1]")));
    }
    let n = (1.0 / step).round() as usize;
    let axis: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(1.0)).collect();
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for &a in &axis {
        for &b in &axis {
            out.push(NoiseParams::new(a, b)?);
        }
    }
    Ok(out)
}

/// Grid point whose pooled R² against the human proportions is highest.
/// Ties go to the larger α, then the smaller β.
pub fn fit_noise(space: &HypothesisSpace, targets: &[FitTarget<'_>], grid: &[NoiseParams]) -> Result<FitResult, PlotError> {
    if grid.is_empty() {
        return Err(PlotError::Fit("empty grid".into()));
    }
    for t in targets {
        if t.human.len() != t.list.n_objects() {
            return Err(PlotError::Fit(format!(
                "rule {}: {} human cells for {} objects",
                t.list.rule_id,
                t.human.len(),
                t.list.n_objects()
            )));
        }
    }
    let compiled: Vec<CompiledList> = targets.iter().map(|t| CompiledList::new(space, t.list)).collect();
    let human: Vec<Option<f64>> = targets.iter().flat_map(|t| t.human.iter().copied()).collect();

    let score = |&noise: &NoiseParams| {
        let model: Vec<f64> = compiled.iter().flat_map(|c| predictive(space, c, noise)).collect();
        FitPoint { noise, r2: r_squared(&model, &human).ok().map(|r| r.r2) }
    };
    #[cfg(feature = "parallel")]
    let surface: Vec<FitPoint> = {
        use rayon::prelude::*;
        grid.par_iter().map(score).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let surface: Vec<FitPoint> = grid.iter().map(score).collect();

    let best = surface
        .iter()
        .filter_map(|p| p.r2.map(|r| (p.noise, r)))
        .max_by(|(na, ra), (nb, rb)| {
            ra.total_cmp(rb).then(na.alpha.total_cmp(&nb.alpha)).then(nb.beta.total_cmp(&na.beta))
        })
        .ok_or_else(|| PlotError::Fit("no grid point gives non-constant predictions".into()))?;
    Ok(FitResult { best: best.0, r2: best.1, surface })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, FeatureVocab};
    use crate::exemplar::generate_list;
    use crate::plot::Grammar;

    fn setup() -> (HypothesisSpace, Vec<ExemplarList>) {
        let v = FeatureVocab::example();
        let g = Grammar::default_for(&v);
        let space = HypothesisSpace::enumerate(&g, 3, 100_000).unwrap();
        let lists = ["blue", "(or circle small)", "(not triangle)"]
            .iter()
            .enumerate()
            .map(|(i, r)| generate_list(r, &parse(r, &v).unwrap(), &v, i as u64, 10))
            .collect();
        (space, lists)
    }

    #[test]
    fn recovers_generating_point() {
        let (space, lists) = setup();
        let truth = NoiseParams::new(0.8, 0.4).unwrap();
        let targets: Vec<FitTarget> = lists
            .iter()
            .map(|l| FitTarget { list: l, human: predictive(&space, &CompiledList::new(&space, l), truth).into_iter().map(Some).collect() })
            .collect();
        let fit = fit_noise(&space, &targets, &lattice(0.1).unwrap()).unwrap();
        assert_eq!(fit.best, truth);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_grid() {
        let (space, lists) = setup();
        let targets: Vec<FitTarget> =
            lists.iter().map(|l| FitTarget { list: l, human: l.items().map(|i| Some(i.label as u8 as f64)).collect() }).collect();
        let p = NoiseParams::new(0.3, 0.7).unwrap();
        assert_eq!(fit_noise(&space, &targets, &[p]).unwrap().best, p);
    }

    #[test]
    fn lattice_shape() {
        let g = lattice(0.05).unwrap();
        assert_eq!(g.len(), 21 * 21);
        assert_eq!(g.last().unwrap().alpha, 1.0);
        assert!(lattice(0.0).is_err());
    }
}
