//! Discrete probability factors.
//!
//! A factor is headed by a discrete variable (a conditional table whose
//! columns sum to one), or by a set of evidence tokens (a likelihood), or by
//! nothing (a plain table, the empty token set). Tails are kept sorted by
//! variable id; tables are row-major over the tail, last variable fastest,
//! with the head state as the slowest axis.

use std::cmp::Ordering;

use crate::algebra::domain::DiscreteDomain;
use crate::algebra::{metrics, next_uid, AlgebraError};
use crate::model::VarId;

/// A recorded piece of evidence carried in a factor head.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceToken {
    pub var: VarId,
    pub value: TokenValue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenValue {
    State(usize),
    Real(f64),
}

impl EvidenceToken {
    fn sort_key(&self) -> (VarId, u8, u64) {
        match self.value {
            TokenValue::State(s) => (self.var, 0, s as u64),
            TokenValue::Real(x) => (self.var, 1, x.to_bits()),
        }
    }
}

impl Eq for EvidenceToken {}

impl PartialOrd for EvidenceToken {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EvidenceToken {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorHead {
    /// Conditional distribution of a discrete variable given the tail.
    Variable(VarId),
    /// Likelihood of the recorded evidence given the tail. The empty token
    /// set is the head-less plain table.
    Tokens(Vec<EvidenceToken>),
}

impl FactorHead {
    pub fn none() -> Self {
        FactorHead::Tokens(Vec::new())
    }

    pub fn variable(&self) -> Option<VarId> {
        match self {
            FactorHead::Variable(v) => Some(*v),
            FactorHead::Tokens(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Factor {
    uid: u64,
    head: FactorHead,
    head_states: usize,
    tail: DiscreteDomain,
    /// `table[s * tail.size() + t]`, all entries non-negative.
    table: Vec<f64>,
}

impl Factor {
    pub fn new(
        head: FactorHead,
        head_states: usize,
        tail: DiscreteDomain,
        table: Vec<f64>,
    ) -> Factor {
        assert_eq!(
            table.len(),
            head_states * tail.size(),
            "table size mismatch"
        );
        debug_assert!(table.iter().all(|&x| x >= 0.0), "negative factor entry");
        if let FactorHead::Tokens(_) = head {
            assert_eq!(head_states, 1, "token-headed factor has one head state");
        }
        #[cfg(debug_assertions)]
        if let FactorHead::Variable(v) = head {
            debug_assert!(!tail.contains(v), "head in own tail");
            for t in 0..tail.size() {
                let sum: f64 = (0..head_states).map(|s| table[s * tail.size() + t]).sum();
                debug_assert!(
                    (sum - 1.0).abs() <= 1e-9,
                    "conditional column for {v} sums to {sum}"
                );
            }
        }
        let config = head_states * tail.size();
        metrics::record_table(config, table.len() * std::mem::size_of::<f64>());
        Factor {
            uid: next_uid(),
            head,
            head_states,
            tail,
            table,
        }
    }

    /// Conditional P(head | tail) from a table with head as slowest axis over
    /// a pre-sorted tail domain.
    pub fn conditional(
        head: VarId,
        head_states: usize,
        tail: DiscreteDomain,
        table: Vec<f64>,
    ) -> Factor {
        Factor::new(FactorHead::Variable(head), head_states, tail, table)
    }

    /// Likelihood factor over `tail` for the given tokens.
    pub fn likelihood(tokens: Vec<EvidenceToken>, tail: DiscreteDomain, table: Vec<f64>) -> Factor {
        let mut tokens = tokens;
        tokens.sort();
        tokens.dedup();
        Factor::new(FactorHead::Tokens(tokens), 1, tail, table)
    }

    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn head(&self) -> &FactorHead {
        &self.head
    }

    pub fn head_states(&self) -> usize {
        self.head_states
    }

    pub fn tail(&self) -> &DiscreteDomain {
        &self.tail
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn value(&self, head_state: usize, tail_idx: usize) -> f64 {
        self.table[head_state * self.tail.size() + tail_idx]
    }

    /// All discrete variables this factor mentions (head variable plus tail).
    pub fn domain_vars(&self) -> Vec<VarId> {
        let mut out: Vec<VarId> = self.tail.vars().to_vec();
        if let FactorHead::Variable(v) = self.head {
            out.push(v);
            out.sort_unstable();
        }
        out
    }

    pub fn mentions(&self, v: VarId) -> bool {
        self.head.variable() == Some(v) || self.tail.contains(v)
    }

    /// The factor viewed as a plain table over head-variable plus tail.
    /// Token heads collapse to the tail domain unchanged.
    pub fn as_dense(&self) -> (DiscreteDomain, Vec<f64>) {
        match self.head {
            FactorHead::Tokens(_) => (self.tail.clone(), self.table.clone()),
            FactorHead::Variable(v) => {
                let full = self
                    .tail
                    .union(&DiscreteDomain::new(vec![(v, self.head_states)]));
                let proj_tail = full.projection_indices(&self.tail);
                let head_pos = full.position(v).unwrap();
                let mut dense = vec![0.0; full.size()];
                for (cfg, states) in full.configs() {
                    dense[cfg] = self.value(states[head_pos], proj_tail[cfg]);
                }
                (full, dense)
            }
        }
    }

    /// Same function over a larger tail (superset of the current one).
    pub fn extend_tail(&self, new_tail: DiscreteDomain) -> Factor {
        debug_assert!(self.tail.vars().iter().all(|v| new_tail.contains(*v)));
        if new_tail == self.tail {
            return self.clone();
        }
        let proj = new_tail.projection_indices(&self.tail);
        let mut table = vec![0.0; self.head_states * new_tail.size()];
        for s in 0..self.head_states {
            for (t, &old_t) in proj.iter().enumerate() {
                table[s * new_tail.size() + t] = self.value(s, old_t);
            }
        }
        Factor::new(self.head.clone(), self.head_states, new_tail, table)
    }

    /// Restrict to discrete evidence. Instantiated tail variables are sliced
    /// out; an instantiated head turns the factor into a token-headed slice.
    pub fn instantiate_discrete(
        &self,
        evidence: &std::collections::BTreeMap<VarId, usize>,
    ) -> Factor {
        let hit_tail: Vec<VarId> = self
            .tail
            .vars()
            .iter()
            .copied()
            .filter(|v| evidence.contains_key(v))
            .collect();
        let head_hit = self
            .head
            .variable()
            .and_then(|v| evidence.get(&v).map(|&s| (v, s)));
        if hit_tail.is_empty() && head_hit.is_none() {
            return self.clone();
        }
        let new_tail = self.tail.without(&hit_tail);
        let positions: Vec<(usize, usize)> = hit_tail
            .iter()
            .map(|v| (self.tail.position(*v).unwrap(), evidence[v]))
            .collect();
        let keep: Vec<usize> = new_tail
            .vars()
            .iter()
            .map(|v| self.tail.position(*v).unwrap())
            .collect();
        let mut tail_map = Vec::with_capacity(new_tail.size());
        for (_, states) in new_tail.configs() {
            let mut full = vec![0usize; self.tail.len()];
            for (&pos, &s) in keep.iter().zip(&states) {
                full[pos] = s;
            }
            for &(pos, s) in &positions {
                full[pos] = s;
            }
            tail_map.push(self.tail.index_of(&full));
        }
        match head_hit {
            None => {
                let mut table = vec![0.0; self.head_states * new_tail.size()];
                for s in 0..self.head_states {
                    for (t, &old_t) in tail_map.iter().enumerate() {
                        table[s * new_tail.size() + t] = self.value(s, old_t);
                    }
                }
                Factor::new(self.head.clone(), self.head_states, new_tail, table)
            }
            Some((v, s)) => {
                let table: Vec<f64> = tail_map.iter().map(|&old_t| self.value(s, old_t)).collect();
                Factor::likelihood(
                    vec![EvidenceToken {
                        var: v,
                        value: TokenValue::State(s),
                    }],
                    new_tail,
                    table,
                )
            }
        }
    }
}

/// Arc-reversal on a pair of discrete conditionals: afterwards `xj` no longer
/// depends on `xi`, and `xi` is conditioned on `xj`. The pointwise product of
/// the pair is preserved. Configurations where the new marginal is zero are
/// unreachable; there the reversed conditional is filled uniformly.
pub fn exchange_discrete(pj: &Factor, pi: &Factor) -> Result<(Factor, Factor), AlgebraError> {
    let xj = pj.head.variable().ok_or(AlgebraError::NotAConditional)?;
    let xi = pi.head.variable().ok_or(AlgebraError::NotAConditional)?;
    // Extend to a common tail: pj over {xi} + T, pi over T.
    let shared = pj.tail.without(&[xi]).union(&pi.tail);
    if shared.contains(xj) || pi.tail.contains(xj) {
        return Err(AlgebraError::HeadInTail { var: xj });
    }
    let pj = pj.extend_tail(shared.union(&DiscreteDomain::new(vec![(xi, pi.head_states)])));
    let pi = pi.extend_tail(shared.clone());

    let full = &pj.tail; // T + xi, sorted
    let t_dom = shared; // T
    let proj_t = full.projection_indices(&t_dom);
    let xi_pos = full.position(xi).unwrap();
    let si = pi.head_states;
    let sj = pj.head_states;

    // pj'(xj | T) = sum_xi pj(xj | xi, T) pi(xi | T)
    let mut pj_table = vec![0.0; sj * t_dom.size()];
    for (cfg, states) in full.configs() {
        let xi_state = states[xi_pos];
        let t = proj_t[cfg];
        let w = pi.value(xi_state, t);
        for s in 0..sj {
            pj_table[s * t_dom.size() + t] += pj.value(s, cfg) * w;
        }
    }

    // pi'(xi | xj, T) = pj pi / pj', uniform where pj' is zero.
    let new_tail = t_dom.union(&DiscreteDomain::new(vec![(xj, sj)]));
    let xj_pos = new_tail.position(xj).unwrap();
    let proj_t_new = new_tail.projection_indices(&t_dom);
    // full index for (t, xi): invert proj maps once.
    let mut full_index = vec![0usize; t_dom.size() * si];
    for (cfg, states) in full.configs() {
        full_index[proj_t[cfg] * si + states[xi_pos]] = cfg;
    }
    let mut pi_table = vec![0.0; si * new_tail.size()];
    for (cfg, states) in new_tail.configs() {
        let s_j = states[xj_pos];
        let t = proj_t_new[cfg];
        let denom = pj_table[s_j * t_dom.size() + t];
        for s_i in 0..si {
            let v = if denom > 0.0 {
                pj.value(s_j, full_index[t * si + s_i]) * pi.value(s_i, t) / denom
            } else {
                1.0 / si as f64
            };
            pi_table[s_i * new_tail.size() + cfg] = v;
        }
    }

    let pj_new = Factor::conditional(xj, sj, t_dom, pj_table);
    let pi_new = Factor::conditional(xi, si, new_tail, pi_table);
    Ok((pj_new, pi_new))
}

/// Multiply factors into one dense table over the union of their domains
/// (head variables become plain domain variables), then sum out `x`.
/// The result is headed by the union of the inputs' evidence tokens.
pub fn multiply_and_marginalize(factors: &[&Factor], x: VarId) -> Factor {
    let mut domain = DiscreteDomain::empty();
    let mut tokens: Vec<EvidenceToken> = Vec::new();
    for f in factors {
        let (d, _) = match f.head {
            FactorHead::Tokens(ref tk) => {
                tokens.extend(tk.iter().cloned());
                (f.tail.clone(), ())
            }
            FactorHead::Variable(v) => (
                f.tail.union(&DiscreteDomain::new(vec![(v, f.head_states)])),
                (),
            ),
        };
        domain = domain.union(&d);
    }
    let dense_parts: Vec<(DiscreteDomain, Vec<f64>)> =
        factors.iter().map(|f| f.as_dense()).collect();
    let projs: Vec<Vec<usize>> = dense_parts
        .iter()
        .map(|(d, _)| domain.projection_indices(d))
        .collect();
    let mut product = vec![1.0; domain.size()];
    for ((_, values), proj) in dense_parts.iter().zip(&projs) {
        for (cfg, p) in product.iter_mut().enumerate() {
            *p *= values[proj[cfg]];
        }
    }
    let out_domain = domain.without(&[x]);
    let proj_out = domain.projection_indices(&out_domain);
    let mut table = vec![0.0; out_domain.size()];
    for (cfg, &p) in product.iter().enumerate() {
        table[proj_out[cfg]] += p;
    }
    Factor::likelihood(tokens, out_domain, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn dom(pairs: &[(usize, usize)]) -> DiscreteDomain {
        DiscreteDomain::new(pairs.iter().map(|&(v, c)| (VarId(v), c)).collect())
    }

    #[test]
    fn exchange_discrete_matches_hand_bayes() {
        // pi = P(Xi) = (0.4, 0.6); pj = P(Xj | Xi) with P(xj=1 | xi) = (0.1, 0.8).
        let pi = Factor::conditional(VarId(0), 2, DiscreteDomain::empty(), vec![0.4, 0.6]);
        let pj = Factor::conditional(VarId(1), 2, dom(&[(0, 2)]), vec![0.9, 0.2, 0.1, 0.8]);
        let (pj2, pi2) = exchange_discrete(&pj, &pi).unwrap();
        assert!(pj2.tail().is_empty());
        assert!((pj2.value(0, 0) - 0.48).abs() < 1e-12);
        assert!((pj2.value(1, 0) - 0.52).abs() < 1e-12);
        // pi'(xi=0 | xj=1) = 0.1 * 0.4 / 0.52
        let t = pi2.tail().index_of(&[1]);
        assert!((pi2.value(0, t) - 0.04 / 0.52).abs() < 1e-12);
        assert!((pi2.value(0, t) - 0.076923076923).abs() < 1e-9);
    }

    #[test]
    fn exchange_discrete_independent_is_identity_like() {
        let pi = Factor::conditional(VarId(0), 2, DiscreteDomain::empty(), vec![0.4, 0.6]);
        // pj independent of xi
        let pj = Factor::conditional(VarId(1), 2, dom(&[(0, 2)]), vec![0.3, 0.3, 0.7, 0.7]);
        let (pj2, pi2) = exchange_discrete(&pj, &pi).unwrap();
        assert!((pj2.value(0, 0) - 0.3).abs() < 1e-12);
        assert!((pj2.value(1, 0) - 0.7).abs() < 1e-12);
        for t in 0..2 {
            assert!((pi2.value(0, t) - 0.4).abs() < 1e-12);
            assert!((pi2.value(1, t) - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn exchange_discrete_point_mass_prior() {
        let pi = Factor::conditional(VarId(0), 2, DiscreteDomain::empty(), vec![1.0, 0.0]);
        let pj = Factor::conditional(VarId(1), 2, dom(&[(0, 2)]), vec![0.9, 0.2, 0.1, 0.8]);
        let (pj2, pi2) = exchange_discrete(&pj, &pi).unwrap();
        // pj' = pj(. | xi = 0)
        assert!((pj2.value(0, 0) - 0.9).abs() < 1e-12);
        assert!((pj2.value(1, 0) - 0.1).abs() < 1e-12);
        // pi' puts mass 1 on xi = 0 where defined
        for t in 0..2 {
            assert!((pi2.value(0, t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn instantiate_head_becomes_token() {
        let p = Factor::conditional(VarId(0), 2, DiscreteDomain::empty(), vec![0.3, 0.7]);
        let mut ev = BTreeMap::new();
        ev.insert(VarId(0), 1usize);
        let sliced = p.instantiate_discrete(&ev);
        assert!(matches!(sliced.head(), FactorHead::Tokens(t) if t.len() == 1));
        assert!((sliced.value(0, 0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn instantiate_absent_var_is_noop() {
        let p = Factor::conditional(VarId(0), 2, DiscreteDomain::empty(), vec![0.3, 0.7]);
        let mut ev = BTreeMap::new();
        ev.insert(VarId(9), 0usize);
        let same = p.instantiate_discrete(&ev);
        assert_eq!(same.table(), p.table());
    }

    #[test]
    fn multiply_and_marginalize_sums_out() {
        let px = Factor::conditional(VarId(0), 2, DiscreteDomain::empty(), vec![0.4, 0.6]);
        let pw = Factor::conditional(VarId(1), 2, dom(&[(0, 2)]), vec![0.1, 0.8, 0.9, 0.2]);
        let out = multiply_and_marginalize(&[&px, &pw], VarId(0));
        // P(W) = (0.4*0.1 + 0.6*0.8, 0.4*0.9 + 0.6*0.2) = (0.52, 0.48)
        assert_eq!(out.tail().vars(), &[VarId(1)]);
        assert!((out.value(0, 0) - 0.52).abs() < 1e-12);
        assert!((out.value(0, 1) - 0.48).abs() < 1e-12);
    }
}
