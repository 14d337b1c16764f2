//! The decomposed potential calculus.
//!
//! A potential is a pair (set of factors, set of densities) representing a
//! product that is never multiplied out. Combination is set union; variables
//! are eliminated by arc reversal (EXCHANGE) plus barren-variable removal,
//! continuous before discrete, so every element keeps a single-variable or
//! evidence-token head throughout.

mod density;
mod domain;
mod factor;
pub mod metrics;
mod mixture;

pub use density::{exchange_continuous, normal_pdf, Density};
pub use domain::DiscreteDomain;
pub use factor::{
    exchange_discrete, multiply_and_marginalize, EvidenceToken, Factor, FactorHead, TokenValue,
};
pub use mixture::{GaussianMixture, MixtureComponent};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::model::{Evidence, VarId};
use thiserror::Error;

static NEXT_UID: AtomicU64 = AtomicU64::new(1);

pub(crate) fn next_uid() -> u64 {
    NEXT_UID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("degenerate exchange between {head} and {tail} at configuration {config}: both variances zero with no coupling")]
    DegenerateExchange {
        head: VarId,
        tail: VarId,
        config: usize,
    },
    #[error("degenerate evidence on {var}: zero variance at configuration {config}")]
    DegenerateEvidence { var: VarId, config: usize },
    #[error("no density headed by {var} is available to eliminate it")]
    MissingDensity { var: VarId },
    #[error("{tail} is not in the continuous tail of the density for {head}")]
    MissingTailVar { head: VarId, tail: VarId },
    #[error("{var} collides with a head during domain extension")]
    HeadInTail { var: VarId },
    #[error("exchange requires variable-headed conditionals")]
    NotAConditional,
    #[error("density for {var} still has a continuous tail")]
    ContinuousTailNotEmpty { var: VarId },
    #[error("cannot eliminate discrete {var}: a density is conditioned on it")]
    DensityBlocksDiscrete { var: VarId },
    #[error("refusing to eliminate evidence variable {var}")]
    EvidenceEliminated { var: VarId },
    #[error("cyclic dependency while eliminating {var}")]
    ExchangeCycle { var: VarId },
}

/// A full assignment value for one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    State(usize),
    Real(f64),
}

pub type Assignment = BTreeMap<VarId, Value>;

/// Set of factors and densities; the represented function is their product.
#[derive(Debug, Clone, Default)]
pub struct Potential {
    factors: Vec<Arc<Factor>>,
    densities: Vec<Arc<Density>>,
}

impl PartialEq for Potential {
    /// Identity-based: equal when both hold the same objects.
    fn eq(&self, other: &Self) -> bool {
        self.factor_uids() == other.factor_uids() && self.density_uids() == other.density_uids()
    }
}

impl Potential {
    pub fn vacuous() -> Potential {
        Potential::default()
    }

    pub fn is_vacuous(&self) -> bool {
        self.factors.is_empty() && self.densities.is_empty()
    }

    pub fn factors(&self) -> &[Arc<Factor>] {
        &self.factors
    }

    pub fn densities(&self) -> &[Arc<Density>] {
        &self.densities
    }

    pub fn factor_uids(&self) -> BTreeSet<u64> {
        self.factors.iter().map(|f| f.uid()).collect()
    }

    pub fn density_uids(&self) -> BTreeSet<u64> {
        self.densities.iter().map(|d| d.uid()).collect()
    }

    pub fn add_factor(&mut self, f: Arc<Factor>) {
        if self.factors.iter().all(|x| x.uid() != f.uid()) {
            self.factors.push(f);
        }
    }

    pub fn add_density(&mut self, d: Arc<Density>) {
        if self.densities.iter().all(|x| x.uid() != d.uid()) {
            debug_assert!(
                self.densities.iter().all(|x| x.head() != d.head()),
                "second density headed by {}",
                d.head()
            );
            self.densities.push(d);
        }
    }

    pub fn remove_factor(&mut self, uid: u64) -> Option<Arc<Factor>> {
        let pos = self.factors.iter().position(|f| f.uid() == uid)?;
        Some(self.factors.remove(pos))
    }

    pub fn remove_density(&mut self, uid: u64) -> Option<Arc<Density>> {
        let pos = self.densities.iter().position(|d| d.uid() == uid)?;
        Some(self.densities.remove(pos))
    }

    pub fn replace_density(&mut self, uid: u64, new: Arc<Density>) -> bool {
        match self.densities.iter_mut().find(|d| d.uid() == uid) {
            Some(slot) => {
                *slot = new;
                true
            }
            None => false,
        }
    }

    pub fn replace_factor(&mut self, uid: u64, new: Arc<Factor>) -> bool {
        match self.factors.iter_mut().find(|f| f.uid() == uid) {
            Some(slot) => {
                *slot = new;
                true
            }
            None => false,
        }
    }

    pub fn density_headed(&self, v: VarId) -> Option<&Arc<Density>> {
        self.densities.iter().find(|d| d.head() == v)
    }

    pub fn factor_headed(&self, v: VarId) -> Option<&Arc<Factor>> {
        self.factors.iter().find(|f| f.head().variable() == Some(v))
    }

    /// Combination is set union (deduplicated by object identity).
    pub fn combine(&self, other: &Potential) -> Potential {
        let mut out = self.clone();
        for f in &other.factors {
            out.add_factor(f.clone());
        }
        for d in &other.densities {
            out.add_density(d.clone());
        }
        out
    }

    /// Discrete variables (with state counts) and continuous variables
    /// mentioned anywhere in the potential.
    pub fn domain(&self) -> (BTreeMap<VarId, usize>, BTreeSet<VarId>) {
        let mut disc = BTreeMap::new();
        let mut cont = BTreeSet::new();
        for f in &self.factors {
            if let FactorHead::Variable(v) = f.head() {
                disc.insert(*v, f.head_states());
            }
            for (&v, &c) in f.tail().vars().iter().zip(f.tail().cards()) {
                disc.insert(v, c);
            }
        }
        for d in &self.densities {
            cont.insert(d.head());
            cont.extend(d.cont_tail().iter().copied());
            for (&v, &c) in d.disc_tail().vars().iter().zip(d.disc_tail().cards()) {
                disc.insert(v, c);
            }
        }
        (disc, cont)
    }

    /// The product of every element evaluated at a full assignment.
    /// The vacuous potential contracts to 1.
    pub fn contract(&self, point: &Assignment) -> f64 {
        let state = |v: VarId| -> usize {
            match point.get(&v) {
                Some(Value::State(s)) => *s,
                _ => panic!("missing discrete value for {v}"),
            }
        };
        let real = |v: VarId| -> f64 {
            match point.get(&v) {
                Some(Value::Real(x)) => *x,
                _ => panic!("missing continuous value for {v}"),
            }
        };
        let mut product = 1.0;
        for f in &self.factors {
            let tail_states: Vec<usize> = f.tail().vars().iter().map(|&v| state(v)).collect();
            let t = f.tail().index_of(&tail_states);
            let s = match f.head() {
                FactorHead::Variable(v) => state(*v),
                FactorHead::Tokens(_) => 0,
            };
            product *= f.value(s, t);
        }
        for d in &self.densities {
            let cfg_states: Vec<usize> = d.disc_tail().vars().iter().map(|&v| state(v)).collect();
            let cfg = d.disc_tail().index_of(&cfg_states);
            let zs: Vec<f64> = d.cont_tail().iter().map(|&v| real(v)).collect();
            product *= normal_pdf(real(d.head()), d.mean_at(cfg, &zs), d.sigma2()[cfg]);
        }
        product
    }

    /// Apply discrete evidence to every element.
    pub fn instantiate_discrete(&self, evidence: &BTreeMap<VarId, usize>) -> Potential {
        let mut out = Potential::vacuous();
        for f in &self.factors {
            out.add_factor(Arc::new(f.instantiate_discrete(evidence)));
        }
        for d in &self.densities {
            out.add_density(Arc::new(d.instantiate_discrete(evidence)));
        }
        out
    }

    /// Substitute a continuous observation into every density tail.
    pub fn instantiate_tail_continuous(&self, var: VarId, value: f64) -> Potential {
        let mut out = Potential::vacuous();
        for f in &self.factors {
            out.add_factor(f.clone());
        }
        for d in &self.densities {
            if d.cont_tail().contains(&var) {
                out.add_density(Arc::new(d.instantiate_tail_continuous(var, value)));
            } else {
                out.add_density(d.clone());
            }
        }
        out
    }

    /// Iteratively drop variable-headed elements whose head is not a target,
    /// not evidence, and referenced by no other element's tail. Dropping such
    /// an element leaves all marginals over the targets unchanged.
    pub fn remove_barren(&self, targets: &BTreeSet<VarId>, evidence: &Evidence) -> Potential {
        let mut out = self.clone();
        loop {
            let mut tail_refs: BTreeSet<VarId> = BTreeSet::new();
            for f in &out.factors {
                tail_refs.extend(f.tail().vars().iter().copied());
            }
            for d in &out.densities {
                tail_refs.extend(d.disc_tail().vars().iter().copied());
                tail_refs.extend(d.cont_tail().iter().copied());
            }
            let barren_head = |v: VarId| {
                !targets.contains(&v) && !evidence.contains(v) && !tail_refs.contains(&v)
            };
            if let Some(pos) = out
                .factors
                .iter()
                .position(|f| matches!(f.head(), FactorHead::Variable(v) if barren_head(*v)))
            {
                out.factors.remove(pos);
                continue;
            }
            if let Some(pos) = out.densities.iter().position(|d| barren_head(d.head())) {
                out.densities.remove(pos);
                continue;
            }
            return out;
        }
    }

    /// Project onto `targets`: eliminate every other variable, continuous
    /// before discrete, choosing at each step the variable whose elimination
    /// touches the smallest combined domain (ties by id). Self-contained
    /// potentials derive their exchange order from their own dependency
    /// graph; pools shared with other potentials should use
    /// [`Potential::project_with_order`].
    pub fn project(
        &self,
        targets: &BTreeSet<VarId>,
        evidence: &Evidence,
    ) -> Result<Potential, AlgebraError> {
        let order = self.density_rank();
        self.project_with_order(targets, evidence, &order)
    }

    /// Number of distinct variables touched when eliminating `v`.
    fn elimination_cost(&self, v: VarId) -> usize {
        let mut touched: BTreeSet<VarId> = BTreeSet::new();
        for f in &self.factors {
            if f.mentions(v) {
                touched.extend(f.domain_vars());
                touched.extend(f.tail().vars());
            }
        }
        for d in &self.densities {
            if d.mentions(v) {
                touched.insert(d.head());
                touched.extend(d.disc_tail().vars());
                touched.extend(d.cont_tail().iter().copied());
            }
        }
        touched.remove(&v);
        touched.len()
    }

    /// Project onto `targets` using a caller-supplied variable order. All
    /// exchanges sort their participants by this order, so pools assembled
    /// from several projections stay mutually consistent as long as every
    /// projection uses the same order.
    pub fn project_with_order(
        &self,
        targets: &BTreeSet<VarId>,
        evidence: &Evidence,
        order: &BTreeMap<VarId, usize>,
    ) -> Result<Potential, AlgebraError> {
        let mut pot = self.remove_barren(targets, evidence);
        loop {
            let (_, cont) = pot.domain();
            let mut cands: Vec<VarId> = cont.into_iter().filter(|v| !targets.contains(v)).collect();
            if cands.is_empty() {
                break;
            }
            if let Some(&v) = cands.iter().find(|v| evidence.contains(**v)) {
                return Err(AlgebraError::EvidenceEliminated { var: v });
            }
            cands.sort_by_key(|&v| (pot.elimination_cost(v), v));
            let w = cands[0];
            pot.eliminate_continuous_ordered(w, order)?;
            pot = pot.remove_barren(targets, evidence);
        }
        loop {
            let (disc, _) = pot.domain();
            let mut cands: Vec<VarId> = disc
                .keys()
                .copied()
                .filter(|v| !targets.contains(v))
                .collect();
            if cands.is_empty() {
                break;
            }
            if let Some(&v) = cands.iter().find(|v| evidence.contains(**v)) {
                return Err(AlgebraError::EvidenceEliminated { var: v });
            }
            cands.sort_by_key(|&v| (pot.elimination_cost(v), v));
            let x = cands[0];
            pot.eliminate_discrete_ordered(x, order)?;
            pot = pot.remove_barren(targets, evidence);
        }
        Ok(pot)
    }

    /// Topological rank over the dependency graph of this potential's
    /// densities (edges tail -> head); leftovers from cross-potential cycles
    /// get stable trailing ranks.
    fn density_rank(&self) -> BTreeMap<VarId, usize> {
        let mut nodes: BTreeSet<VarId> = BTreeSet::new();
        let mut out_edges: BTreeMap<VarId, Vec<VarId>> = BTreeMap::new();
        let mut indeg: BTreeMap<VarId, usize> = BTreeMap::new();
        for d in &self.densities {
            nodes.insert(d.head());
            indeg.entry(d.head()).or_insert(0);
            for &t in d.cont_tail() {
                nodes.insert(t);
                indeg.entry(t).or_insert(0);
                out_edges.entry(t).or_default().push(d.head());
                *indeg.entry(d.head()).or_insert(0) += 1;
            }
        }
        let mut ready: BTreeSet<VarId> = nodes.iter().copied().filter(|v| indeg[v] == 0).collect();
        let mut rank = BTreeMap::new();
        let mut next = 0usize;
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            rank.insert(v, next);
            next += 1;
            if let Some(outs) = out_edges.get(&v) {
                for &h in outs {
                    let e = indeg.get_mut(&h).unwrap();
                    *e -= 1;
                    if *e == 0 {
                        ready.insert(h);
                    }
                }
            }
        }
        for v in nodes {
            rank.entry(v).or_insert_with(|| {
                let r = next;
                next += 1;
                r
            });
        }
        rank
    }

    /// Integrate out a continuous variable: exchange its density against
    /// every density referencing it, upstream children first, then drop it
    /// as barren. The head density must be present.
    pub fn eliminate_continuous_var(&mut self, w: VarId) -> Result<(), AlgebraError> {
        let order = self.density_rank();
        self.eliminate_continuous_ordered(w, &order)
    }

    pub fn eliminate_continuous_ordered(
        &mut self,
        w: VarId,
        order: &BTreeMap<VarId, usize>,
    ) -> Result<(), AlgebraError> {
        let head = self.density_headed(w).cloned();
        let mut children: Vec<u64> = self
            .densities
            .iter()
            .filter(|d| d.cont_tail().contains(&w))
            .map(|d| d.uid())
            .collect();
        let Some(mut g) = head else {
            if children.is_empty() {
                return Ok(());
            }
            return Err(AlgebraError::MissingDensity { var: w });
        };
        children.sort_by_key(|&uid| {
            let h = self.density_by_uid(uid).head();
            (order.get(&h).copied().unwrap_or(usize::MAX), h)
        });
        for uid in children {
            let child = self.density_by_uid(uid).clone();
            let (new_child, new_g) = exchange_continuous(&child, &g)?;
            self.replace_density(uid, Arc::new(new_child));
            self.remove_density(g.uid());
            g = Arc::new(new_g);
            self.add_density(g.clone());
        }
        // w now heads g and appears in no tail: barren.
        self.remove_density(g.uid());
        Ok(())
    }

    fn density_by_uid(&self, uid: u64) -> &Arc<Density> {
        self.densities
            .iter()
            .find(|d| d.uid() == uid)
            .expect("density uid present")
    }

    /// Sum out a discrete variable. When every factor touching it is a
    /// variable-headed conditional and the variable heads one of them, a
    /// sequence of arc reversals removes it without growing any table beyond
    /// the touched domains; otherwise all touching factors are multiplied
    /// and the variable is summed out of the product.
    pub fn eliminate_discrete_var(&mut self, x: VarId) -> Result<(), AlgebraError> {
        self.eliminate_discrete_ordered(x, &BTreeMap::new())
    }

    pub fn eliminate_discrete_ordered(
        &mut self,
        x: VarId,
        order: &BTreeMap<VarId, usize>,
    ) -> Result<(), AlgebraError> {
        if let Some(d) = self.densities.iter().find(|d| d.disc_tail().contains(x)) {
            debug_assert!(d.head() != x);
            return Err(AlgebraError::DensityBlocksDiscrete { var: x });
        }
        let relevant: Vec<u64> = self
            .factors
            .iter()
            .filter(|f| f.mentions(x))
            .map(|f| f.uid())
            .collect();
        if relevant.is_empty() {
            return Ok(());
        }
        let all_conditionals = relevant
            .iter()
            .all(|&uid| self.factor_by_uid(uid).head().variable().is_some());
        let head_uid = relevant
            .iter()
            .copied()
            .find(|&uid| self.factor_by_uid(uid).head().variable() == Some(x));
        if let (true, Some(head_uid)) = (all_conditionals, head_uid) {
            let mut px = self.factor_by_uid(head_uid).clone();
            let mut children: Vec<u64> = relevant
                .into_iter()
                .filter(|&uid| uid != px.uid())
                .collect();
            children.sort_by_key(|&uid| {
                let h = self.factor_by_uid(uid).head().variable().unwrap();
                (order.get(&h).copied().unwrap_or(usize::MAX), h)
            });
            let mut remaining = children;
            while !remaining.is_empty() {
                // A reversal is admissible only while neither side's head
                // sits in the other's tail; merge the rest of the product
                // when no child qualifies.
                let pick = remaining.iter().enumerate().find(|(_, &uid)| {
                    let f = self.factor_by_uid(uid);
                    let h = f.head().variable().unwrap();
                    !px.tail().contains(h)
                        && !remaining.iter().any(|&other| {
                            other != uid
                                && f.tail()
                                    .contains(self.factor_by_uid(other).head().variable().unwrap())
                        })
                });
                let Some((pos, &uid)) = pick else {
                    let mut parts: Vec<Arc<Factor>> = vec![px.clone()];
                    parts.extend(remaining.iter().map(|&uid| self.factor_by_uid(uid).clone()));
                    let refs: Vec<&Factor> = parts.iter().map(|f| f.as_ref()).collect();
                    let merged = multiply_and_marginalize(&refs, x);
                    for f in &parts {
                        self.remove_factor(f.uid());
                    }
                    self.add_factor(Arc::new(merged));
                    return Ok(());
                };
                remaining.remove(pos);
                let child = self.factor_by_uid(uid).clone();
                let (new_child, new_px) = exchange_discrete(&child, &px)?;
                self.replace_factor(uid, Arc::new(new_child));
                self.remove_factor(px.uid());
                px = Arc::new(new_px);
                self.add_factor(px.clone());
            }
            self.remove_factor(px.uid());
            Ok(())
        } else {
            let parts: Vec<Arc<Factor>> = relevant
                .iter()
                .map(|&uid| self.factor_by_uid(uid).clone())
                .collect();
            let refs: Vec<&Factor> = parts.iter().map(|f| f.as_ref()).collect();
            let merged = multiply_and_marginalize(&refs, x);
            for f in &parts {
                self.remove_factor(f.uid());
            }
            self.add_factor(Arc::new(merged));
            Ok(())
        }
    }

    fn factor_by_uid(&self, uid: u64) -> &Arc<Factor> {
        self.factors
            .iter()
            .find(|f| f.uid() == uid)
            .expect("factor uid present")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(pairs: &[(usize, usize)]) -> DiscreteDomain {
        DiscreteDomain::new(pairs.iter().map(|&(v, c)| (VarId(v), c)).collect())
    }

    fn chain_density(head: usize, tail: Option<usize>, alpha: f64, beta: f64, s2: f64) -> Density {
        let (vars, coefs) = match tail {
            Some(t) => (vec![VarId(t)], vec![beta]),
            None => (vec![], vec![]),
        };
        Density::new(
            VarId(head),
            DiscreteDomain::empty(),
            vars,
            vec![alpha],
            vec![coefs],
            vec![s2],
        )
    }

    #[test]
    fn combine_is_union_with_identity() {
        let mut p1 = Potential::vacuous();
        let f = Arc::new(Factor::conditional(
            VarId(0),
            2,
            DiscreteDomain::empty(),
            vec![0.3, 0.7],
        ));
        p1.add_factor(f.clone());
        let empty = Potential::vacuous();
        assert_eq!(p1.combine(&empty), p1);
        assert_eq!(empty.combine(&p1), p1);
        let mut p2 = Potential::vacuous();
        p2.add_factor(f);
        p2.add_density(Arc::new(chain_density(1, None, 0.0, 0.0, 1.0)));
        assert_eq!(p1.combine(&p2), p2.combine(&p1));
        // deduplication by identity
        assert_eq!(p1.combine(&p2).factors().len(), 1);
    }

    #[test]
    fn contract_of_vacuous_is_one() {
        let p = Potential::vacuous();
        assert_eq!(p.contract(&Assignment::new()), 1.0);
    }

    #[test]
    fn contract_multiplies_factor_and_density() {
        let mut p = Potential::vacuous();
        p.add_factor(Arc::new(Factor::conditional(
            VarId(0),
            2,
            DiscreteDomain::empty(),
            vec![0.3, 0.7],
        )));
        p.add_density(Arc::new(Density::new(
            VarId(1),
            dd(&[(0, 2)]),
            vec![],
            vec![-1.0, 2.0],
            vec![vec![], vec![]],
            vec![1.0, 0.5],
        )));
        let mut point = Assignment::new();
        point.insert(VarId(0), Value::State(1));
        point.insert(VarId(1), Value::Real(1.5));
        let expected = 0.7 * normal_pdf(1.5, 2.0, 0.5);
        assert!((p.contract(&point) - expected).abs() < 1e-15);
        // single factor at x = 1 contributes 0.7
        let mut only = Potential::vacuous();
        only.add_factor(Arc::new(Factor::conditional(
            VarId(0),
            2,
            DiscreteDomain::empty(),
            vec![0.3, 0.7],
        )));
        let mut pt = Assignment::new();
        pt.insert(VarId(0), Value::State(1));
        assert!((only.contract(&pt) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn barren_chain_cascades() {
        // f(Y3 | Y2), f(Y2 | Y1): projecting onto {Y1} removes both.
        let mut p = Potential::vacuous();
        p.add_density(Arc::new(chain_density(3, Some(2), 0.0, 1.0, 1.0)));
        p.add_density(Arc::new(chain_density(2, Some(1), 0.0, 1.0, 1.0)));
        let targets: BTreeSet<VarId> = [VarId(1)].into();
        let out = p.remove_barren(&targets, &Evidence::empty());
        assert!(out.is_vacuous());
        // evidence on Y3 blocks the cascade entirely
        let mut ev = Evidence::empty();
        ev.continuous.insert(VarId(3), 0.0);
        let kept = p.remove_barren(&targets, &ev);
        assert_eq!(kept.densities().len(), 2);
    }

    #[test]
    fn single_density_projects_to_vacuous() {
        let mut p = Potential::vacuous();
        p.add_density(Arc::new(chain_density(2, Some(1), 0.0, 1.0, 1.0)));
        let targets: BTreeSet<VarId> = [VarId(1)].into();
        let out = p.project(&targets, &Evidence::empty()).unwrap();
        assert!(out.is_vacuous());
    }

    #[test]
    fn chain_elimination_is_vacuous() {
        // f(Y2 | Y1), f(Y1 | X): project to {X} leaves nothing (both barren
        // after one exchange).
        let mut p = Potential::vacuous();
        p.add_density(Arc::new(chain_density(2, Some(1), 0.5, 2.0, 1.0)));
        p.add_density(Arc::new(Density::new(
            VarId(1),
            dd(&[(0, 2)]),
            vec![],
            vec![0.0, 1.0],
            vec![vec![], vec![]],
            vec![1.0, 1.0],
        )));
        let targets: BTreeSet<VarId> = [VarId(0)].into();
        let out = p.project(&targets, &Evidence::empty()).unwrap();
        assert!(out.is_vacuous());
    }

    #[test]
    fn project_to_full_domain_is_identity() {
        let mut p = Potential::vacuous();
        p.add_density(Arc::new(chain_density(2, Some(1), 0.5, 2.0, 1.0)));
        p.add_density(Arc::new(chain_density(1, None, 0.0, 0.0, 1.0)));
        let targets: BTreeSet<VarId> = [VarId(1), VarId(2)].into();
        let out = p.project(&targets, &Evidence::empty()).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn eliminate_discrete_multiply_path_handles_tokens() {
        // P(X) and a likelihood token factor over X.
        let mut p = Potential::vacuous();
        p.add_factor(Arc::new(Factor::conditional(
            VarId(0),
            2,
            DiscreteDomain::empty(),
            vec![0.4, 0.6],
        )));
        p.add_factor(Arc::new(Factor::likelihood(
            vec![EvidenceToken {
                var: VarId(5),
                value: TokenValue::Real(1.0),
            }],
            dd(&[(0, 2)]),
            vec![0.2, 0.5],
        )));
        let out = p.project(&BTreeSet::new(), &Evidence::empty()).unwrap();
        assert_eq!(out.factors().len(), 1);
        let f = &out.factors()[0];
        assert!(f.tail().is_empty());
        assert!((f.value(0, 0) - (0.4 * 0.2 + 0.6 * 0.5)).abs() < 1e-12);
        assert!(matches!(f.head(), FactorHead::Tokens(t) if t.len() == 1));
    }
}
