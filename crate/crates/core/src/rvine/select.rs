//! Sequential vine fitting: greedy structure selection tree by tree with
//! per-edge family selection, plus a constrained variant that keeps a
//! response variable terminal for closed-form conditioning.

use super::model::RVineModel;
use super::structure::{EdgeSpec, VineStructure};
use crate::bicop::{
    empirical_tau, select_bicop, BicopFamily, BivariateCopula, Rotation, SelectionCriterion,
};
use crate::{Error, Result};
use std::collections::HashMap;

/// Options for vine fitting. An empty candidate list means the full default
/// family set.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct VineFitConfig {
    pub candidates: Vec<(BicopFamily, Rotation)>,
    pub criterion: SelectionCriterion,
}

impl Default for VineFitConfig {
    fn default() -> Self {
        VineFitConfig { candidates: Vec::new(), criterion: SelectionCriterion::Aic }
    }
}

/// A fitted vine with its in-sample fit statistics.
#[derive(Clone, Debug)]
pub struct FittedVine {
    pub model: RVineModel,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
}

/// One node of the construction graph: a variable (round 0) or an edge of
/// the previous round, carrying the conditional samples it can hand to the
/// next round.
struct NodeData {
    set: Vec<usize>,
    conditioned: (usize, usize),
    /// F(conditioned.0 | rest of set) per observation.
    first_given: Vec<f64>,
    /// F(conditioned.1 | rest of set) per observation.
    second_given: Vec<f64>,
}

impl NodeData {
    fn samples_for(&self, var: usize) -> &[f64] {
        if self.conditioned.0 == var {
            &self.first_given
        } else {
            debug_assert_eq!(self.conditioned.1, var);
            &self.second_given
        }
    }
}

fn validate_rows(rows: &[Vec<f64>]) -> Result<usize> {
    if rows.len() < 30 {
        return Err(Error::fit(format!(
            "vine fitting needs at least 30 observations, got {}",
            rows.len()
        )));
    }
    let d = rows.first().map(|r| r.len()).unwrap_or(0);
    if d < 2 {
        return Err(Error::fit("vine fitting needs at least two variables"));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::fit("rows have inconsistent lengths"));
    }
    if rows.iter().flatten().any(|&v| !v.is_finite() || v <= 0.0 || v >= 1.0) {
        return Err(Error::fit("copula-scale data must lie strictly inside (0, 1)"));
    }
    Ok(d)
}

/// Pearson correlation of normal scores, the attachment weight for the
/// response in the constrained fit.
fn normal_score_corr(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() as f64;
    let xs: Vec<f64> = u.iter().map(|&p| crate::special::norm_quantile(p)).collect();
    let ys: Vec<f64> = v.iter().map(|&p| crate::special::norm_quantile(p)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

fn initial_nodes(rows: &[Vec<f64>], d: usize) -> Vec<NodeData> {
    (0..d)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            NodeData {
                set: vec![j],
                conditioned: (j, j),
                first_given: col.clone(),
                second_given: col,
            }
        })
        .collect()
}

fn shared_count(a: &[usize], b: &[usize]) -> usize {
    // Both sorted.
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// The edge joining construction nodes i and j: conditioned pair in sorted
/// order and the shared conditioning set.
fn join_spec(ni: &NodeData, nj: &NodeData) -> EdgeSpec {
    let inter: Vec<usize> =
        ni.set.iter().copied().filter(|v| nj.set.contains(v)).collect();
    let a = *ni.set.iter().find(|v| !inter.contains(v)).expect("proper join");
    let b = *nj.set.iter().find(|v| !inter.contains(v)).expect("proper join");
    EdgeSpec::new(a, b, inter)
}

/// Fits one edge given its parent nodes and appends the resulting child
/// node. Returns the fitted pair copula and its log likelihood.
fn fit_edge(
    nodes: &[NodeData],
    ni: usize,
    nj: usize,
    spec: &EdgeSpec,
    cfg: &VineFitConfig,
) -> Result<(BivariateCopula, f64, NodeData)> {
    let (lo, hi) = spec.conditioned;
    let lo_node = if nodes[ni].set.contains(&lo) { ni } else { nj };
    let hi_node = if lo_node == ni { nj } else { ni };
    let arg_lo = nodes[lo_node].samples_for(lo);
    let arg_hi = nodes[hi_node].samples_for(hi);
    let fit = select_bicop(arg_lo, arg_hi, &cfg.candidates, cfg.criterion)?;
    let cop = fit.copula;
    // Conditional samples for the next round; keep them strictly interior.
    let squeeze = |x: f64| x.clamp(1e-10, 1.0 - 1e-10);
    let first_given: Vec<f64> = arg_lo
        .iter()
        .zip(arg_hi)
        .map(|(&a, &b)| squeeze(cop.hfunc2(a, b)))
        .collect();
    let second_given: Vec<f64> = arg_lo
        .iter()
        .zip(arg_hi)
        .map(|(&a, &b)| squeeze(cop.hfunc1(a, b)))
        .collect();
    let child = NodeData {
        set: spec.complete_set(),
        conditioned: spec.conditioned,
        first_given,
        second_given,
    };
    Ok((cop, fit.log_likelihood, child))
}

/// Kendall tau magnitude between the conditional samples an edge would use.
fn pair_weight(nodes: &[NodeData], ni: usize, nj: usize, spec: &EdgeSpec) -> Result<f64> {
    let (lo, hi) = spec.conditioned;
    let lo_node = if nodes[ni].set.contains(&lo) { ni } else { nj };
    let hi_node = if lo_node == ni { nj } else { ni };
    let tau =
        empirical_tau(nodes[lo_node].samples_for(lo), nodes[hi_node].samples_for(hi))?;
    Ok(tau.abs())
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }
    fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        self.0[rx] = ry;
        true
    }
}

/// Maximum spanning tree over the admissible node pairs by |tau|, ties
/// broken towards lower node indices for determinism.
fn spanning_edges(
    nodes: &[NodeData],
    admissible: &[(usize, usize)],
    weights: &[f64],
    target_count: usize,
) -> Result<Vec<(usize, usize)>> {
    let mut order: Vec<usize> = (0..admissible.len()).collect();
    order.sort_by(|&x, &y| {
        weights[y]
            .total_cmp(&weights[x])
            .then_with(|| admissible[x].cmp(&admissible[y]))
    });
    let mut uf = UnionFind::new(nodes.len());
    let mut chosen = Vec::with_capacity(target_count);
    for idx in order {
        let (i, j) = admissible[idx];
        if uf.union(i, j) {
            chosen.push((i, j));
            if chosen.len() == target_count {
                break;
            }
        }
    }
    if chosen.len() != target_count {
        return Err(Error::fit("admissible pairs do not connect the vine tree"));
    }
    Ok(chosen)
}

fn finish(
    rows: &[Vec<f64>],
    trees: Vec<Vec<EdgeSpec>>,
    copulas: Vec<Vec<BivariateCopula>>,
    log_likelihood: f64,
    d: usize,
) -> Result<FittedVine> {
    let structure = VineStructure::new(d, trees)?;
    let model = RVineModel::new(structure, copulas)?;
    let k = model.parameter_count() as f64;
    let n = rows.len() as f64;
    Ok(FittedVine {
        model,
        log_likelihood,
        aic: 2.0 * k - 2.0 * log_likelihood,
        bic: k * n.ln() - 2.0 * log_likelihood,
    })
}

/// Chooses a vine structure for the data without keeping the fitted pair
/// copulas (the h-transforms that define deeper trees still require fitting
/// along the way).
pub fn select_structure(rows: &[Vec<f64>]) -> Result<VineStructure> {
    Ok(fit_rvine(rows, &VineFitConfig::default())?.model.structure().clone())
}

/// Fits a vine copula to copula-scale rows: tree by tree, choose the
/// maximum spanning tree under |Kendall tau| among admissible pairs, then
/// select each edge's pair copula by information criterion.
pub fn fit_rvine(rows: &[Vec<f64>], cfg: &VineFitConfig) -> Result<FittedVine> {
    let d = validate_rows(rows)?;
    let mut nodes = initial_nodes(rows, d);
    let mut trees = Vec::with_capacity(d - 1);
    let mut copulas = Vec::with_capacity(d - 1);
    let mut total_ll = 0.0;

    for round in 0..d - 1 {
        let shared_needed = if round == 0 { 0 } else { round };
        let mut admissible = Vec::new();
        let mut weights = Vec::new();
        let mut specs = HashMap::new();
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if shared_count(&nodes[i].set, &nodes[j].set) != shared_needed {
                    continue;
                }
                let spec = join_spec(&nodes[i], &nodes[j]);
                weights.push(pair_weight(&nodes, i, j, &spec)?);
                admissible.push((i, j));
                specs.insert((i, j), spec);
            }
        }
        let chosen = spanning_edges(&nodes, &admissible, &weights, d - 1 - round)?;

        let mut tree = Vec::new();
        let mut fitted = Vec::new();
        let mut children = Vec::new();
        for (i, j) in chosen {
            let spec = specs.remove(&(i, j)).expect("chosen edges were enumerated");
            let (cop, ll, child) = fit_edge(&nodes, i, j, &spec, cfg)?;
            total_ll += ll;
            tree.push(spec);
            fitted.push(cop);
            children.push(child);
        }
        trees.push(tree);
        copulas.push(fitted);
        nodes = children;
    }

    finish(rows, trees, copulas, total_ll, d)
}

/// Refits pair copulas on a fixed structure (used by resampling schemes that
/// freeze the trees and refit families and parameters).
pub fn fit_rvine_fixed(
    rows: &[Vec<f64>],
    structure: &VineStructure,
    cfg: &VineFitConfig,
) -> Result<FittedVine> {
    let d = validate_rows(rows)?;
    if structure.dimension() != d {
        return Err(Error::fit("structure dimension does not match the data"));
    }
    let mut nodes = initial_nodes(rows, d);
    let mut copulas = Vec::with_capacity(d - 1);
    let mut total_ll = 0.0;

    for tree in structure.trees() {
        let mut by_set: HashMap<Vec<usize>, usize> = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            by_set.insert(n.set.clone(), i);
        }
        let mut fitted = Vec::new();
        let mut children = Vec::new();
        for spec in tree {
            let mut sa = spec.conditioning.clone();
            sa.push(spec.conditioned.0);
            sa.sort_unstable();
            let mut sb = spec.conditioning.clone();
            sb.push(spec.conditioned.1);
            sb.sort_unstable();
            let (&i, &j) = match (by_set.get(&sa), by_set.get(&sb)) {
                (Some(i), Some(j)) => (i, j),
                _ => return Err(Error::fit("structure edge has no parents in the data graph")),
            };
            let (cop, ll, child) = fit_edge(&nodes, i, j, spec, cfg)?;
            total_ll += ll;
            fitted.push(cop);
            children.push(child);
        }
        copulas.push(fitted);
        nodes = children;
    }

    finish(rows, structure.trees().to_vec(), copulas, total_ll, d)
}

/// Fits a vine in which `response` stays terminal (conditioned in exactly
/// one edge of every tree), so its conditional distribution given all other
/// variables is an h-function chain. Each tree is a spanning tree over the
/// non-response nodes plus a single best attachment of the response.
pub fn fit_regression_rvine(
    rows: &[Vec<f64>],
    response: usize,
    cfg: &VineFitConfig,
) -> Result<FittedVine> {
    let d = validate_rows(rows)?;
    if response >= d {
        return Err(Error::fit("response index out of range"));
    }
    let mut nodes = initial_nodes(rows, d);
    let mut trees = Vec::with_capacity(d - 1);
    let mut copulas = Vec::with_capacity(d - 1);
    let mut total_ll = 0.0;

    for round in 0..d - 1 {
        let shared_needed = if round == 0 { 0 } else { round };
        let y_node = nodes
            .iter()
            .position(|n| n.set.contains(&response))
            .expect("response node persists");
        let x_nodes: Vec<usize> = (0..nodes.len()).filter(|&i| i != y_node).collect();

        // Spanning tree among the non-response nodes.
        let mut admissible = Vec::new();
        let mut weights = Vec::new();
        let mut specs = HashMap::new();
        for (pi, &i) in x_nodes.iter().enumerate() {
            for &j in &x_nodes[pi + 1..] {
                if shared_count(&nodes[i].set, &nodes[j].set) != shared_needed {
                    continue;
                }
                let spec = join_spec(&nodes[i], &nodes[j]);
                weights.push(pair_weight(&nodes, i, j, &spec)?);
                admissible.push((i, j));
                specs.insert((i, j), spec);
            }
        }
        let x_edge_count = d - 2 - round;
        let mut chosen = if x_edge_count > 0 {
            spanning_edges(&nodes, &admissible, &weights, x_edge_count)?
        } else {
            Vec::new()
        };

        // Attach the response by the strongest conditional association,
        // measured as |Pearson correlation| of normal scores.
        let mut best: Option<(f64, usize)> = None;
        for &j in &x_nodes {
            if shared_count(&nodes[y_node].set, &nodes[j].set) != shared_needed {
                continue;
            }
            let spec = join_spec(&nodes[y_node], &nodes[j]);
            let (lo, hi) = spec.conditioned;
            let lo_node = if nodes[y_node].set.contains(&lo) { y_node } else { j };
            let hi_node = if lo_node == y_node { j } else { y_node };
            let w = normal_score_corr(
                nodes[lo_node].samples_for(lo),
                nodes[hi_node].samples_for(hi),
            )
            .abs();
            specs.insert((y_node, j), spec);
            if best.map(|(bw, _)| w > bw).unwrap_or(true) {
                best = Some((w, j));
            }
        }
        let (_, yj) = best.ok_or_else(|| {
            Error::fit("no admissible attachment keeps the response terminal")
        })?;
        chosen.push((y_node, yj));

        let mut tree = Vec::new();
        let mut fitted = Vec::new();
        let mut children = Vec::new();
        for (i, j) in chosen {
            let spec = specs.remove(&(i, j)).expect("chosen edges were enumerated");
            let (cop, ll, child) = fit_edge(&nodes, i, j, &spec, cfg)?;
            total_ll += ll;
            tree.push(spec);
            fitted.push(cop);
            children.push(child);
        }
        trees.push(tree);
        copulas.push(fitted);
        nodes = children;
    }

    let out = finish(rows, trees, copulas, total_ll, d)?;
    debug_assert!(out.model.structure().is_terminal_variable(response));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicop::{BicopFamily, Rotation};
    use rand::SeedableRng;

    fn gaussian_cfg() -> VineFitConfig {
        VineFitConfig {
            candidates: vec![(BicopFamily::Gaussian, Rotation::R0)],
            criterion: SelectionCriterion::Aic,
        }
    }

    fn simulate_normal_vine(n: usize, seed: u64) -> (RVineModel, Vec<Vec<f64>>) {
        use crate::rvine::structure::EdgeSpec;
        let s = VineStructure::new(
            3,
            vec![
                vec![EdgeSpec::new(0, 1, vec![]), EdgeSpec::new(1, 2, vec![])],
                vec![EdgeSpec::new(0, 2, vec![1])],
            ],
        )
        .unwrap();
        let pair = |rho: f64| {
            BivariateCopula::new(BicopFamily::Gaussian, Rotation::R0, vec![rho]).unwrap()
        };
        let cops = vec![vec![pair(0.7), pair(0.5)], vec![pair(0.2)]];
        let model = RVineModel::new(s, cops).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows = model.simulate(n, &mut rng);
        (model, rows)
    }

    #[test]
    fn recovers_gaussian_vine_structure_and_parameters() {
        let (truth, rows) = simulate_normal_vine(2500, 42);
        let fit = fit_rvine(&rows, &gaussian_cfg()).unwrap();
        // Strongest pairs sit in tree 0.
        let t0 = &fit.model.structure().trees()[0];
        let mut pairs: Vec<(usize, usize)> = t0.iter().map(|e| e.conditioned).collect();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        // Edge order inside a tree follows selection order, so look each
        // parameter up by its conditioned pair.
        for (tree, idx) in [(0, 0), (0, 1), (1, 0)] {
            let spec = &fit.model.structure().trees()[tree][idx];
            let got = fit.model.copula(tree, idx).parameters()[0];
            let want = match spec.conditioned {
                (0, 1) => 0.7,
                (1, 2) => 0.5,
                (0, 2) => 0.2,
                other => panic!("unexpected edge {other:?}"),
            };
            assert!((got - want).abs() < 0.06, "edge {spec:?}: rho {got} vs {want}");
        }
        let _ = truth;
    }

    #[test]
    fn fitted_log_likelihood_matches_model_evaluation() {
        let (_, rows) = simulate_normal_vine(600, 7);
        let fit = fit_rvine(&rows, &gaussian_cfg()).unwrap();
        let direct = fit.model.log_likelihood(&rows).unwrap();
        assert!(
            (fit.log_likelihood - direct).abs() < 1e-6 * direct.abs().max(1.0),
            "{} vs {direct}",
            fit.log_likelihood
        );
        let k = fit.model.parameter_count() as f64;
        assert!((fit.aic - (2.0 * k - 2.0 * fit.log_likelihood)).abs() < 1e-9);
    }

    #[test]
    fn fixed_structure_refit_keeps_the_trees() {
        let (_, rows) = simulate_normal_vine(800, 3);
        let free = fit_rvine(&rows, &gaussian_cfg()).unwrap();
        let refit = fit_rvine_fixed(&rows, free.model.structure(), &gaussian_cfg()).unwrap();
        assert_eq!(free.model.structure(), refit.model.structure());
        assert!((free.log_likelihood - refit.log_likelihood).abs() < 1e-9);
    }

    #[test]
    fn regression_fit_keeps_response_terminal() {
        let (_, rows) = simulate_normal_vine(1500, 9);
        for response in 0..3 {
            let fit = fit_regression_rvine(&rows, response, &gaussian_cfg()).unwrap();
            assert!(fit.model.structure().is_terminal_variable(response));
            let chain = fit.model.conditional(response).unwrap();
            let u = [0.4, 0.6, 0.5];
            let p = chain.cdf(&u).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn regression_median_tracks_normal_theory() {
        // Dense 4-d gaussian sample with a strong signal on the response.
        let (n, d) = (3000, 4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut rows = Vec::with_capacity(n);
        use rand_distr::{Distribution, StandardNormal};
        for _ in 0..n {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x0 = z[0];
            let x1 = 0.6 * z[0] + 0.8 * z[1];
            let x2 = z[2];
            let y = 0.8 * x0 - 0.5 * x1 + 0.3 * x2 + 0.4 * z[3];
            rows.push(vec![x0, x1, x2, y]);
        }
        let urows = crate::bicop::pseudo_observation_rows(&rows).unwrap();
        let fit = fit_regression_rvine(&urows, 3, &gaussian_cfg()).unwrap();
        let chain = fit.model.conditional(3).unwrap();
        // At the sample median of the predictors the conditional median of y
        // should be near its own PIT of the theoretical conditional median.
        let u = [0.5, 0.5, 0.5, f64::NAN];
        let med = chain.quantile(0.5, &u).unwrap();
        // x = 0 for all predictors implies y median 0; on the copula scale
        // that is F_y(0). Empirically locate it.
        let f_y_at_zero = rows.iter().filter(|r| r[3] <= 0.0).count() as f64 / n as f64;
        assert!(
            (med - f_y_at_zero).abs() < 0.06,
            "conditional median {med} vs marginal pit {f_y_at_zero}"
        );
    }

    #[test]
    fn short_samples_are_rejected() {
        let rows: Vec<Vec<f64>> = (0..29).map(|i| {
            let t = (i as f64 + 0.5) / 29.0;
            vec![t, 1.0 - t]
        }).collect();
        let err = fit_rvine(&rows, &VineFitConfig::default()).unwrap_err();
        assert!(err.to_string().contains("30"), "{err}");
    }

    #[test]
    fn structure_selection_matches_default_fit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        use rand::Rng;
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let a: f64 = rng.gen();
                let b: f64 = rng.gen();
                vec![a, (0.7 * a + 0.3 * b).clamp(1e-6, 1.0 - 1e-6), b]
            })
            .collect();
        let s = select_structure(&rows).unwrap();
        let fit = fit_rvine(&rows, &VineFitConfig::default()).unwrap();
        assert_eq!(&s, fit.model.structure());
    }

    #[test]
    fn two_variable_fit_is_a_single_edge() {
        let pair = BivariateCopula::new(BicopFamily::Clayton, Rotation::R90, vec![3.0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> =
            pair.simulate(1500, &mut rng).into_iter().map(|(u, v)| vec![u, v]).collect();
        let fit = fit_rvine(&rows, &VineFitConfig::default()).unwrap();
        assert_eq!(fit.model.dimension(), 2);
        let tau = fit.model.copula(0, 0).tau();
        assert!(tau < -0.3, "negative dependence should survive selection: {tau}");
    }

    #[test]
    fn independent_data_yields_mostly_independence_edges() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        use rand::Rng;
        let rows: Vec<Vec<f64>> =
            (0..400).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
        let fit = fit_rvine(&rows, &VineFitConfig::default()).unwrap();
        let indep_edges = fit
            .model
            .copulas()
            .iter()
            .flatten()
            .filter(|c| c.family() == BicopFamily::Independence)
            .count();
        assert!(indep_edges >= 4, "{indep_edges} of 6 edges independent");
    }

    #[test]
    fn deterministic_given_identical_data() {
        let (_, rows) = simulate_normal_vine(500, 77);
        let a = fit_rvine(&rows, &gaussian_cfg()).unwrap();
        let b = fit_rvine(&rows, &gaussian_cfg()).unwrap();
        let ja = serde_json::to_string(&a.model).unwrap();
        let jb = serde_json::to_string(&b.model).unwrap();
        assert_eq!(ja, jb);
    }
}
