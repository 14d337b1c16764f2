//! Brute-force reference: enumerate the full discrete configuration space,
//! build one multivariate Gaussian per configuration by forward recursion,
//! condition on evidence with rank-one updates, and read marginals.
//!
//! Deliberately independent of the propagation engine; used to verify it.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::algebra::{normal_pdf, Assignment, Value};
use crate::model::{Evidence, Network, VarId};

const MAX_CONFIGURATIONS: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("discrete configuration space has {configs} entries, limit {limit}")]
    TooLarge { configs: u64, limit: u64 },
    #[error("evidence has zero probability")]
    ImpossibleEvidence,
    #[error("conditioning on {var}: observed block is singular")]
    DegenerateObservation { var: VarId },
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
    #[error("{0} is instantiated")]
    Instantiated(VarId),
    #[error("{0} has the wrong kind for this query")]
    WrongKind(VarId),
}

/// One discrete configuration with its Gaussian over the continuous block.
#[derive(Debug, Clone)]
pub struct JointComponent {
    /// States of every discrete variable, ordered by variable id.
    pub states: Vec<usize>,
    pub weight: f64,
    /// Mean per continuous variable, ordered as `JointMixture::cont_vars`.
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// The network's full joint as a mixture of multivariate Gaussians.
#[derive(Debug, Clone)]
pub struct JointMixture {
    /// Discrete variables, ascending id.
    pub disc_vars: Vec<VarId>,
    /// Continuous variables still carried by the components, ascending id.
    pub cont_vars: Vec<VarId>,
    pub components: Vec<JointComponent>,
}

/// Marginal view for one variable.
pub enum Marginal {
    Discrete(Vec<f64>),
    Continuous(ContinuousMarginal),
}

/// Univariate mixture with a density evaluator.
#[derive(Debug, Clone)]
pub struct ContinuousMarginal {
    pub components: Vec<(f64, f64, f64)>, // (weight, mean, variance)
}

impl ContinuousMarginal {
    pub fn pdf(&self, y: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, m, v)| w * normal_pdf(y, m, v))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|&(w, m, _)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.components
            .iter()
            .map(|&(w, m, v)| w * (v + m * m))
            .sum::<f64>()
            - mean * mean
    }

    pub fn sd(&self) -> f64 {
        self.variance().max(0.0).sqrt()
    }
}

/// Enumerate the joint: per discrete configuration, the weight is the CPT
/// product and the Gaussian is built by pushing means and covariances through
/// the linear structure in topological order.
pub fn enumerate_joint(net: &Network) -> Result<JointMixture, OracleError> {
    let disc_vars: Vec<VarId> = net.discrete_vars().iter().map(|d| d.id).collect();
    let cont_vars: Vec<VarId> = net.continuous_vars().iter().map(|c| c.id).collect();
    let configs: u64 = disc_vars
        .iter()
        .map(|&v| net.state_count(v) as u64)
        .product();
    if configs > MAX_CONFIGURATIONS {
        return Err(OracleError::TooLarge {
            configs,
            limit: MAX_CONFIGURATIONS,
        });
    }
    let cont_pos: BTreeMap<VarId, usize> =
        cont_vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let topo = net.topological_order().expect("validated network");
    let k = cont_vars.len();

    let mut components = Vec::with_capacity(configs as usize);
    let mut states = vec![0usize; disc_vars.len()];
    loop {
        let by_var: BTreeMap<VarId, usize> = disc_vars
            .iter()
            .copied()
            .zip(states.iter().copied())
            .collect();
        let mut weight = 1.0;
        for cpt in net.cpts() {
            let tail_size: usize = cpt.tail.iter().map(|&p| net.state_count(p)).product();
            let mut t = 0;
            for &p in &cpt.tail {
                t = t * net.state_count(p) + by_var[&p];
            }
            weight *= cpt.table[by_var[&cpt.head] * tail_size + t];
        }
        let mut mean = vec![0.0; k];
        let mut cov = vec![vec![0.0; k]; k];
        for &v in &topo {
            if !net.is_continuous(v) {
                continue;
            }
            let spec = net.density(v).expect("density present");
            let mut cfg = 0;
            for &p in &spec.discrete_tail {
                cfg = cfg * net.state_count(p) + by_var[&p];
            }
            let i = cont_pos[&v];
            let parents: Vec<usize> = spec.continuous_tail.iter().map(|p| cont_pos[p]).collect();
            let b = &spec.beta[cfg];
            mean[i] = spec.alpha[cfg]
                + parents
                    .iter()
                    .zip(b)
                    .map(|(&p, &w)| w * mean[p])
                    .sum::<f64>();
            // cov(v, u) = sum_k b_k cov(parent_k, u) for previously built u,
            // var(v) adds sigma2 on top of b' Cov b.
            #[allow(clippy::needless_range_loop)]
            for u in 0..k {
                if u == i {
                    continue;
                }
                let c: f64 = parents.iter().zip(b).map(|(&p, &w)| w * cov[p][u]).sum();
                cov[i][u] = c;
                cov[u][i] = c;
            }
            let mut var = spec.sigma2[cfg];
            for (ki, &pi) in parents.iter().enumerate() {
                for (kj, &pj) in parents.iter().enumerate() {
                    var += b[ki] * b[kj] * cov[pi][pj];
                }
            }
            cov[i][i] = var;
        }
        components.push(JointComponent {
            states: states.clone(),
            weight,
            mean,
            cov,
        });
        // advance, last variable fastest
        let mut pos = disc_vars.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            states[pos] += 1;
            if states[pos] < net.state_count(disc_vars[pos]) {
                break;
            }
            states[pos] = 0;
        }
        if states.iter().all(|&s| s == 0) {
            break;
        }
        if disc_vars.is_empty() {
            break;
        }
    }
    Ok(JointMixture {
        disc_vars,
        cont_vars,
        components,
    })
}

/// Condition on evidence: discrete observations filter configurations,
/// continuous observations reweight by the marginal likelihood and apply the
/// standard Gaussian update, one observed variable at a time.
pub fn condition(joint: &JointMixture, evidence: &Evidence) -> Result<JointMixture, OracleError> {
    let mut out = joint.clone();
    if !evidence.discrete.is_empty() {
        for (&v, &s) in &evidence.discrete {
            let pos = out
                .disc_vars
                .iter()
                .position(|&d| d == v)
                .ok_or(OracleError::UnknownVariable(v))?;
            out.components.retain(|c| c.states[pos] == s);
        }
    }
    for (&v, &y) in &evidence.continuous {
        let pos = out
            .cont_vars
            .iter()
            .position(|&c| c == v)
            .ok_or(OracleError::UnknownVariable(v))?;
        for comp in &mut out.components {
            let var_kk = comp.cov[pos][pos];
            if var_kk <= 0.0 {
                return Err(OracleError::DegenerateObservation { var: v });
            }
            comp.weight *= normal_pdf(y, comp.mean[pos], var_kk);
            let shift = (y - comp.mean[pos]) / var_kk;
            let col: Vec<f64> = comp.cov.iter().map(|row| row[pos]).collect();
            for (i, m) in comp.mean.iter_mut().enumerate() {
                *m += col[i] * shift;
            }
            for i in 0..comp.mean.len() {
                for j in 0..comp.mean.len() {
                    comp.cov[i][j] -= col[i] * col[j] / var_kk;
                }
            }
        }
        // drop the observed variable from the continuous block
        out.cont_vars.remove(pos);
        for comp in &mut out.components {
            comp.mean.remove(pos);
            comp.cov.remove(pos);
            for row in &mut comp.cov {
                row.remove(pos);
            }
        }
    }
    let total: f64 = out.components.iter().map(|c| c.weight).sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(OracleError::ImpossibleEvidence);
    }
    for c in &mut out.components {
        c.weight /= total;
    }
    Ok(out)
}

/// Marginal for one variable: a probability table for a discrete target, a
/// mixture evaluator for a continuous one.
pub fn oracle_marginals(
    joint: &JointMixture,
    net: &Network,
    target: VarId,
) -> Result<Marginal, OracleError> {
    if target.0 >= net.var_count() {
        return Err(OracleError::UnknownVariable(target));
    }
    if net.is_discrete(target) {
        let pos = joint
            .disc_vars
            .iter()
            .position(|&d| d == target)
            .ok_or(OracleError::UnknownVariable(target))?;
        let mut table = vec![0.0; net.state_count(target)];
        for c in &joint.components {
            table[c.states[pos]] += c.weight;
        }
        Ok(Marginal::Discrete(table))
    } else {
        let pos = joint
            .cont_vars
            .iter()
            .position(|&c| c == target)
            .ok_or(OracleError::Instantiated(target))?;
        let components = joint
            .components
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| (c.weight, c.mean[pos], c.cov[pos][pos].max(0.0)))
            .collect();
        Ok(Marginal::Continuous(ContinuousMarginal { components }))
    }
}

/// One ancestral sample of every variable; used to produce consistent
/// evidence values.
pub fn forward_sample<R: Rng>(net: &Network, rng: &mut R) -> Assignment {
    let mut point = Assignment::new();
    for v in net.topological_order().expect("acyclic") {
        if net.is_discrete(v) {
            let cpt = net.cpt(v).expect("cpt present");
            let tail_size: usize = cpt.tail.iter().map(|&p| net.state_count(p)).product();
            let mut t = 0;
            for &p in &cpt.tail {
                let Value::State(s) = point[&p] else {
                    unreachable!()
                };
                t = t * net.state_count(p) + s;
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = net.state_count(v) - 1;
            for s in 0..net.state_count(v) {
                acc += cpt.table[s * tail_size + t];
                if u < acc {
                    chosen = s;
                    break;
                }
            }
            point.insert(v, Value::State(chosen));
        } else {
            let spec = net.density(v).expect("density present");
            let mut cfg = 0;
            for &p in &spec.discrete_tail {
                let Value::State(s) = point[&p] else {
                    unreachable!()
                };
                cfg = cfg * net.state_count(p) + s;
            }
            let mut mean = spec.alpha[cfg];
            for (&p, &b) in spec.continuous_tail.iter().zip(&spec.beta[cfg]) {
                let Value::Real(z) = point[&p] else {
                    unreachable!()
                };
                mean += b * z;
            }
            // Box-Muller
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random();
            let gauss = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            point.insert(v, Value::Real(mean + gauss * spec.sigma2[cfg].sqrt()));
        }
    }
    point
}
