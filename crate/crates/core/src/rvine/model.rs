//! Vine copula models: a structure plus one pair copula per edge, with
//! density evaluation, simulation, and closed-form conditioning on a
//! terminal variable.

use super::structure::{ColumnStep, Peeling, VineStructure};
use crate::bicop::{BivariateCopula, EVAL_CLAMP};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Where an edge's conditional-cdf argument comes from during a forward pass.
#[derive(Clone, Copy, Debug)]
enum ArgSource {
    /// The raw copula-scale input for a variable.
    Margin(usize),
    /// `hfunc1` output of an earlier edge: F(second | first, conditioning).
    H1(usize),
    /// `hfunc2` output of an earlier edge: F(first | second, conditioning).
    H2(usize),
}

/// One edge in global evaluation order with resolved argument sources.
#[derive(Clone, Debug)]
struct PlanNode {
    tree: usize,
    idx: usize,
    src1: ArgSource,
    src2: ArgSource,
    /// Whether some later edge consumes the respective h output.
    need_h1: bool,
    need_h2: bool,
}

/// A fitted or specified vine copula: structure plus pair copulas, edge for
/// edge. Densities multiply one pair-copula term per edge, with arguments
/// chained through h-functions.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct RVineModel {
    structure: VineStructure,
    copulas: Vec<Vec<BivariateCopula>>,
    plan: Vec<PlanNode>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    structure: VineStructure,
    copulas: Vec<Vec<BivariateCopula>>,
}

impl From<RVineModel> for ModelRepr {
    fn from(m: RVineModel) -> Self {
        ModelRepr { structure: m.structure, copulas: m.copulas }
    }
}

impl TryFrom<ModelRepr> for RVineModel {
    type Error = String;
    fn try_from(r: ModelRepr) -> std::result::Result<Self, String> {
        RVineModel::new(r.structure, r.copulas).map_err(|e| e.to_string())
    }
}

impl RVineModel {
    pub fn new(structure: VineStructure, copulas: Vec<Vec<BivariateCopula>>) -> Result<Self> {
        let trees = structure.trees();
        if copulas.len() != trees.len()
            || copulas.iter().zip(trees).any(|(c, t)| c.len() != t.len())
        {
            return Err(Error::InvalidModel(
                "copula layout must match the structure tree for tree".into(),
            ));
        }
        let plan = build_plan(&structure)?;
        Ok(RVineModel { structure, copulas, plan })
    }

    /// Product of independence copulas over an arbitrary valid structure.
    pub fn independence(dimension: usize) -> Result<Self> {
        use super::structure::EdgeSpec;
        // D-vine in index order; with independence pairs the shape is moot.
        let mut trees = Vec::new();
        for k in 0..dimension.saturating_sub(1) {
            let tree: Vec<EdgeSpec> = (0..dimension - 1 - k)
                .map(|i| EdgeSpec::new(i, i + k + 1, (i + 1..i + k + 1).collect()))
                .collect();
            trees.push(tree);
        }
        let structure = VineStructure::new(dimension, trees)?;
        let copulas = structure
            .trees()
            .iter()
            .map(|t| t.iter().map(|_| BivariateCopula::independence()).collect())
            .collect();
        RVineModel::new(structure, copulas)
    }

    pub fn dimension(&self) -> usize {
        self.structure.dimension()
    }

    pub fn structure(&self) -> &VineStructure {
        &self.structure
    }

    pub fn copula(&self, tree: usize, idx: usize) -> &BivariateCopula {
        &self.copulas[tree][idx]
    }

    pub fn copulas(&self) -> &[Vec<BivariateCopula>] {
        &self.copulas
    }

    /// Total number of free pair-copula parameters.
    pub fn parameter_count(&self) -> usize {
        self.copulas.iter().flatten().map(|c| c.parameter_count()).sum()
    }

    fn edge_count(&self) -> usize {
        self.structure.edge_count()
    }

    fn global_index(&self, tree: usize, idx: usize) -> usize {
        // Trees are laid out consecutively: tree k starts after the
        // d-1, d-2, ... edges of the earlier trees.
        let d = self.dimension();
        (0..tree).map(|t| d - 1 - t).sum::<usize>() + idx
    }

    fn fetch(&self, src: ArgSource, u: &[f64], h1: &[f64], h2: &[f64]) -> f64 {
        match src {
            ArgSource::Margin(v) => u[v],
            ArgSource::H1(g) => h1[g],
            ArgSource::H2(g) => h2[g],
        }
    }

    /// Forward pass over all edges, filling the h output slots. Returns the
    /// log density when requested.
    fn forward(&self, u: &[f64], h1: &mut [f64], h2: &mut [f64], accumulate: bool) -> f64 {
        let mut logc = 0.0;
        for (g, node) in self.plan.iter().enumerate() {
            let cop = &self.copulas[node.tree][node.idx];
            let a = self.fetch(node.src1, u, h1, h2);
            let b = self.fetch(node.src2, u, h1, h2);
            if accumulate {
                logc += cop.log_density(a, b);
            }
            if node.need_h1 {
                h1[g] = cop.hfunc1(a, b);
            }
            if node.need_h2 {
                h2[g] = cop.hfunc2(a, b);
            }
        }
        logc
    }

    /// Log density of the copula at a point on the unit cube. Inputs are
    /// clamped away from the boundary.
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        let u = self.clamped(u)?;
        let e = self.edge_count();
        let (mut h1, mut h2) = (vec![0.0; e], vec![0.0; e]);
        Ok(self.forward(&u, &mut h1, &mut h2, true))
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.log_density(u).map(f64::exp)
    }

    /// Sum of log densities over copula-scale rows.
    pub fn log_likelihood(&self, rows: &[Vec<f64>]) -> Result<f64> {
        let e = self.edge_count();
        let (mut h1, mut h2) = (vec![0.0; e], vec![0.0; e]);
        let mut total = 0.0;
        for row in rows {
            let u = self.clamped(row)?;
            total += self.forward(&u, &mut h1, &mut h2, true);
        }
        Ok(total)
    }

    fn clamped(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dimension() {
            return Err(Error::domain("input length does not match model dimension"));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("copula-scale inputs must be finite"));
        }
        Ok(u.iter().map(|x| x.clamp(EVAL_CLAMP, 1.0 - EVAL_CLAMP)).collect())
    }

    /// Draws `n` rows on the unit cube by inverse Rosenblatt along a peeling
    /// of the structure.
    pub fn simulate<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let peel = self.structure.peeling(None);
        let d = self.dimension();
        let e = self.edge_count();
        let (mut h1, mut h2) = (vec![0.0; e], vec![0.0; e]);
        let mut out = Vec::with_capacity(n);
        let mut u = vec![0.0; d];
        for _ in 0..n {
            let w: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            self.rosenblatt_inverse(&peel, &w, &mut u, &mut h1, &mut h2);
            out.push(u.clone());
        }
        out
    }

    /// Maps independent uniforms `w` to one dependent row `u`.
    fn rosenblatt_inverse(
        &self,
        peel: &Peeling,
        w: &[f64],
        u: &mut [f64],
        h1: &mut [f64],
        h2: &mut [f64],
    ) {
        u[peel.order[0]] = w[0];
        for k in 1..peel.order.len() {
            let col = &peel.columns[k];
            debug_assert_eq!(col.len(), k);
            // Invert the h-function chain from the deepest tree down.
            let mut p = w[k];
            for step in col.iter().rev() {
                let g = self.global_index(step.tree, step.edge);
                let cop = &self.copulas[step.tree][step.edge];
                let node = &self.plan[g];
                if step.v_is_first {
                    let partner = self.fetch(node.src2, u, h1, h2);
                    p = cop.hinv2(p, partner);
                } else {
                    let partner = self.fetch(node.src1, u, h1, h2);
                    p = cop.hinv1(p, partner);
                }
            }
            u[peel.order[k]] = p;
            // The new variable's column edges are now computable; everything
            // deeper in later columns reads from these slots.
            for step in col {
                let g = self.global_index(step.tree, step.edge);
                let node = &self.plan[g];
                let cop = &self.copulas[node.tree][node.idx];
                let a = self.fetch(node.src1, u, h1, h2);
                let b = self.fetch(node.src2, u, h1, h2);
                h1[g] = cop.hfunc1(a, b);
                h2[g] = cop.hfunc2(a, b);
            }
        }
    }

    /// Conditional evaluator for a terminal variable (one that appears in a
    /// conditioned pair of every tree). Fails otherwise: only terminal
    /// variables admit a closed-form conditional distribution.
    pub fn conditional(&self, target: usize) -> Result<ConditionalChain<'_>> {
        if target >= self.dimension() {
            return Err(Error::domain("conditional target out of range"));
        }
        if !self.structure.is_terminal_variable(target) {
            return Err(Error::InvalidModel(format!(
                "variable {target} is not terminal in the vine; its conditional \
                 cdf has no closed form"
            )));
        }
        let peel = self.structure.peeling(Some(target));
        debug_assert_eq!(*peel.order.last().unwrap(), target);
        let column = peel.columns.last().unwrap().clone();
        let mut in_column = vec![false; self.edge_count()];
        for step in &column {
            in_column[self.global_index(step.tree, step.edge)] = true;
        }
        Ok(ConditionalChain { model: self, target, column, in_column })
    }

    /// F(target <= q | others) evaluated at `u[target] = q`, conditioning on
    /// the remaining coordinates of `u`.
    pub fn conditional_cdf(&self, target: usize, u: &[f64]) -> Result<f64> {
        let chain = self.conditional(target)?;
        let partners = chain.partner_args(u)?;
        Ok(chain.cdf_given(&partners, u[target]))
    }

    /// The margin of the model with terminal variable `v` integrated out.
    /// Dropping a terminal variable's edges leaves a regular vine on the
    /// remaining variables whose copula is exactly the `v`-margin of this
    /// one; variables above `v` shift down by one.
    pub fn without_terminal(&self, v: usize) -> Result<RVineModel> {
        if v >= self.dimension() {
            return Err(Error::domain("variable out of range"));
        }
        if !self.structure.is_terminal_variable(v) {
            return Err(Error::InvalidModel(format!(
                "variable {v} is not terminal; its margin is not a sub-vine"
            )));
        }
        if self.dimension() < 2 {
            return Err(Error::InvalidModel(
                "cannot marginalize a univariate model".into(),
            ));
        }
        let relabel = |w: usize| if w > v { w - 1 } else { w };
        let mut trees = Vec::new();
        let mut copulas = Vec::new();
        for (k, tree) in self.structure.trees().iter().enumerate() {
            let mut spec_row = Vec::new();
            let mut cop_row = Vec::new();
            for (i, e) in tree.iter().enumerate() {
                if e.contains_conditioned(v) {
                    continue;
                }
                let cond: Vec<usize> = e.conditioning.iter().map(|&w| relabel(w)).collect();
                spec_row.push(super::structure::EdgeSpec::new(
                    relabel(e.conditioned.0),
                    relabel(e.conditioned.1),
                    cond,
                ));
                cop_row.push(self.copulas[k][i].clone());
            }
            if !spec_row.is_empty() {
                trees.push(spec_row);
                copulas.push(cop_row);
            }
        }
        let structure = VineStructure::new(self.dimension() - 1, trees)?;
        RVineModel::new(structure, copulas)
    }
}

/// Reusable conditional distribution of one terminal variable given the
/// rest, as a chain of h-functions through the variable's edges.
pub struct ConditionalChain<'a> {
    model: &'a RVineModel,
    target: usize,
    column: Vec<ColumnStep>,
    in_column: Vec<bool>,
}

impl ConditionalChain<'_> {
    pub fn target(&self) -> usize {
        self.target
    }

    /// Computes, per chain step, the partner's conditional cdf value. These
    /// depend on the conditioning coordinates only, so one call serves many
    /// evaluations in the target coordinate (`u[target]` is ignored).
    pub fn partner_args(&self, u: &[f64]) -> Result<Vec<f64>> {
        let m = self.model;
        let mut u = u.to_vec();
        if u.len() != m.dimension() {
            return Err(Error::domain("input length does not match model dimension"));
        }
        // The target coordinate plays no role here; make it inert so partial
        // inputs (e.g. NaN in the target slot) are accepted.
        u[self.target] = 0.5;
        let u = m.clamped(&u)?;
        let e = m.edge_count();
        let (mut h1, mut h2) = (vec![0.0; e], vec![0.0; e]);
        // Forward pass over the sub-vine that excludes the target: exactly
        // the edges outside the target's column.
        for (g, node) in m.plan.iter().enumerate() {
            if self.in_column[g] {
                continue;
            }
            let cop = &m.copulas[node.tree][node.idx];
            let a = m.fetch(node.src1, &u, &h1, &h2);
            let b = m.fetch(node.src2, &u, &h1, &h2);
            if node.need_h1 {
                h1[g] = cop.hfunc1(a, b);
            }
            if node.need_h2 {
                h2[g] = cop.hfunc2(a, b);
            }
        }
        Ok(self
            .column
            .iter()
            .map(|step| {
                let g = self.model.global_index(step.tree, step.edge);
                let node = &m.plan[g];
                let src = if step.v_is_first { node.src2 } else { node.src1 };
                m.fetch(src, &u, &h1, &h2)
            })
            .collect())
    }

    /// Chains the target value through the h-functions given precomputed
    /// partner arguments.
    pub fn cdf_given(&self, partners: &[f64], target_value: f64) -> f64 {
        let mut p = target_value.clamp(EVAL_CLAMP, 1.0 - EVAL_CLAMP);
        for (step, &arg) in self.column.iter().zip(partners) {
            let cop = self.model.copula(step.tree, step.edge);
            p = if step.v_is_first { cop.hfunc2(p, arg) } else { cop.hfunc1(arg, p) };
        }
        p
    }

    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        Ok(self.cdf_given(&self.partner_args(u)?, u[self.target]))
    }

    /// Inverts `cdf_given` in the target value by bisection; the chain is
    /// monotone in the target coordinate.
    pub fn quantile_given(&self, partners: &[f64], p: f64) -> f64 {
        let p = p.clamp(EVAL_CLAMP, 1.0 - EVAL_CLAMP);
        let (mut lo, mut hi) = (EVAL_CLAMP, 1.0 - EVAL_CLAMP);
        for _ in 0..70 {
            let mid = 0.5 * (lo + hi);
            if self.cdf_given(partners, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn quantile(&self, p: f64, u: &[f64]) -> Result<f64> {
        Ok(self.quantile_given(&self.partner_args(u)?, p))
    }
}

/// Resolves each edge's argument sources against the previous tree.
fn build_plan(structure: &VineStructure) -> Result<Vec<PlanNode>> {
    let trees = structure.trees();
    let mut plan: Vec<PlanNode> = Vec::with_capacity(structure.edge_count());
    // Complete variable set -> global edge index, for the previous tree.
    let mut prev: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut offset = 0;
    for (k, tree) in trees.iter().enumerate() {
        let mut current = HashMap::new();
        for (idx, e) in tree.iter().enumerate() {
            let g = offset + idx;
            current.insert(e.complete_set(), g);
            let (a, b) = e.conditioned;
            let (src1, src2) = if k == 0 {
                (ArgSource::Margin(a), ArgSource::Margin(b))
            } else {
                (
                    resolve(&plan, &prev, trees, &e.conditioning, a, k)?,
                    resolve(&plan, &prev, trees, &e.conditioning, b, k)?,
                )
            };
            plan.push(PlanNode { tree: k, idx, src1, src2, need_h1: false, need_h2: false });
        }
        offset += tree.len();
        prev = current;
    }
    // Mark which h outputs are consumed.
    let sources: Vec<(ArgSource, ArgSource)> =
        plan.iter().map(|n| (n.src1, n.src2)).collect();
    for (s1, s2) in sources {
        for s in [s1, s2] {
            match s {
                ArgSource::H1(g) => plan[g].need_h1 = true,
                ArgSource::H2(g) => plan[g].need_h2 = true,
                ArgSource::Margin(_) => {}
            }
        }
    }
    Ok(plan)
}

fn resolve(
    plan: &[PlanNode],
    prev: &HashMap<Vec<usize>, usize>,
    trees: &[Vec<super::structure::EdgeSpec>],
    conditioning: &[usize],
    var: usize,
    tree: usize,
) -> Result<ArgSource> {
    let mut set = conditioning.to_vec();
    set.push(var);
    set.sort_unstable();
    let &g = prev
        .get(&set)
        .ok_or_else(|| Error::InvalidModel("edge has no parent in the previous tree".into()))?;
    let parent = &trees[tree - 1][plan[g].idx];
    if parent.conditioned.0 == var {
        Ok(ArgSource::H2(g))
    } else if parent.conditioned.1 == var {
        Ok(ArgSource::H1(g))
    } else {
        // Regularity forces the needed variable to be conditioned in the
        // parent; a validated structure cannot reach this.
        Err(Error::InvalidModel(
            "parent edge does not condition the required variable".into(),
        ))
    }
}
