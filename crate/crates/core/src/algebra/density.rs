//! Univariate CLG densities and the continuous arc-reversal operation.
//!
//! A density represents N(alpha(i) + beta(i) . z, sigma2(i)) for its head
//! variable, per configuration i of the discrete tail. Discrete and
//! continuous tails are kept sorted by variable id.

use std::collections::BTreeMap;

use crate::algebra::domain::DiscreteDomain;
use crate::algebra::factor::{EvidenceToken, Factor, TokenValue};
use crate::algebra::{metrics, next_uid, AlgebraError};
use crate::model::VarId;

/// Floating-point drift tolerance for computed variances.
const VARIANCE_DRIFT: f64 = -1e-12;

pub(crate) fn clamp_variance(v: f64) -> f64 {
    if v < 0.0 {
        assert!(v >= VARIANCE_DRIFT, "variance drifted to {v}");
        0.0
    } else {
        v
    }
}

pub fn normal_pdf(y: f64, mean: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        return if (y - mean).abs() < 1e-12 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    let d = y - mean;
    (-d * d / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

#[derive(Debug, Clone)]
pub struct Density {
    uid: u64,
    head: VarId,
    disc_tail: DiscreteDomain,
    /// Sorted continuous tail variable ids.
    cont_tail: Vec<VarId>,
    alpha: Vec<f64>,
    /// `beta[i][k]` multiplies `cont_tail[k]` in configuration i.
    beta: Vec<Vec<f64>>,
    sigma2: Vec<f64>,
}

impl Density {
    pub fn new(
        head: VarId,
        disc_tail: DiscreteDomain,
        mut cont_tail: Vec<VarId>,
        mut alpha: Vec<f64>,
        mut beta: Vec<Vec<f64>>,
        mut sigma2: Vec<f64>,
    ) -> Density {
        // Sort the continuous tail, permuting coefficient columns to match.
        let mut order: Vec<usize> = (0..cont_tail.len()).collect();
        order.sort_by_key(|&k| cont_tail[k]);
        if order.windows(2).any(|w| w[1] < w[0]) || !cont_tail.is_sorted() {
            cont_tail = order.iter().map(|&k| cont_tail[k]).collect();
            beta = beta
                .iter()
                .map(|row| order.iter().map(|&k| row[k]).collect())
                .collect();
        }
        debug_assert!(cont_tail.windows(2).all(|w| w[0] < w[1]), "duplicate tail");
        debug_assert!(!cont_tail.contains(&head), "head in own continuous tail");
        let n = disc_tail.size();
        assert_eq!(alpha.len(), n);
        assert_eq!(beta.len(), n);
        assert_eq!(sigma2.len(), n);
        debug_assert!(beta.iter().all(|b| b.len() == cont_tail.len()));
        for s in sigma2.iter_mut() {
            *s = clamp_variance(*s);
        }
        alpha.shrink_to_fit();
        let bytes = (alpha.len() + sigma2.len() + alpha.len() * cont_tail.len())
            * std::mem::size_of::<f64>();
        metrics::record_table(n, bytes);
        Density {
            uid: next_uid(),
            head,
            disc_tail,
            cont_tail,
            alpha,
            beta,
            sigma2,
        }
    }

    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn head(&self) -> VarId {
        self.head
    }

    pub fn disc_tail(&self) -> &DiscreteDomain {
        &self.disc_tail
    }

    pub fn cont_tail(&self) -> &[VarId] {
        &self.cont_tail
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn coefficient(&self, config: usize, z: VarId) -> f64 {
        match self.cont_tail.binary_search(&z) {
            Ok(k) => self.beta[config][k],
            Err(_) => 0.0,
        }
    }

    pub fn mentions(&self, v: VarId) -> bool {
        self.head == v || self.disc_tail.contains(v) || self.cont_tail.contains(&v)
    }

    pub fn mean_at(&self, config: usize, z_values: &[f64]) -> f64 {
        debug_assert_eq!(z_values.len(), self.cont_tail.len());
        self.alpha[config]
            + self.beta[config]
                .iter()
                .zip(z_values)
                .map(|(b, z)| b * z)
                .sum::<f64>()
    }

    /// Same function over an extended domain: replicated across added
    /// discrete configurations, zero coefficients for added continuous vars.
    pub fn extend_domain(
        &self,
        add_discrete: &[(VarId, usize)],
        add_continuous: &[VarId],
    ) -> Result<Density, AlgebraError> {
        for (v, _) in add_discrete {
            if *v == self.head || self.disc_tail.contains(*v) {
                return Err(AlgebraError::HeadInTail { var: *v });
            }
        }
        for v in add_continuous {
            if *v == self.head {
                return Err(AlgebraError::HeadInTail { var: *v });
            }
            if self.cont_tail.contains(v) {
                return Err(AlgebraError::HeadInTail { var: *v });
            }
        }
        let new_disc = self
            .disc_tail
            .union(&DiscreteDomain::new(add_discrete.to_vec()));
        let mut new_cont = self.cont_tail.clone();
        new_cont.extend(add_continuous.iter().copied());
        new_cont.sort_unstable();
        let proj = new_disc.projection_indices(&self.disc_tail);
        let mut alpha = Vec::with_capacity(new_disc.size());
        let mut beta = Vec::with_capacity(new_disc.size());
        let mut sigma2 = Vec::with_capacity(new_disc.size());
        for &old in &proj {
            alpha.push(self.alpha[old]);
            sigma2.push(self.sigma2[old]);
            beta.push(new_cont.iter().map(|&z| self.coefficient(old, z)).collect());
        }
        Ok(Density::new(
            self.head, new_disc, new_cont, alpha, beta, sigma2,
        ))
    }

    /// Restrict discrete-tail configurations to the evidence.
    pub fn instantiate_discrete(&self, evidence: &BTreeMap<VarId, usize>) -> Density {
        let hit: Vec<VarId> = self
            .disc_tail
            .vars()
            .iter()
            .copied()
            .filter(|v| evidence.contains_key(v))
            .collect();
        if hit.is_empty() {
            return self.clone();
        }
        let new_disc = self.disc_tail.without(&hit);
        let keep: Vec<usize> = new_disc
            .vars()
            .iter()
            .map(|v| self.disc_tail.position(*v).unwrap())
            .collect();
        let fixed: Vec<(usize, usize)> = hit
            .iter()
            .map(|v| (self.disc_tail.position(*v).unwrap(), evidence[v]))
            .collect();
        let mut alpha = Vec::with_capacity(new_disc.size());
        let mut beta = Vec::with_capacity(new_disc.size());
        let mut sigma2 = Vec::with_capacity(new_disc.size());
        for (_, states) in new_disc.configs() {
            let mut full = vec![0usize; self.disc_tail.len()];
            for (&pos, &s) in keep.iter().zip(&states) {
                full[pos] = s;
            }
            for &(pos, s) in &fixed {
                full[pos] = s;
            }
            let old = self.disc_tail.index_of(&full);
            alpha.push(self.alpha[old]);
            beta.push(self.beta[old].clone());
            sigma2.push(self.sigma2[old]);
        }
        Density::new(
            self.head,
            new_disc,
            self.cont_tail.clone(),
            alpha,
            beta,
            sigma2,
        )
    }

    /// Substitute an observed value for a continuous tail variable:
    /// alpha'(i) = alpha(i) + beta_k(i) * z, variance unchanged.
    pub fn instantiate_tail_continuous(&self, z_var: VarId, z: f64) -> Density {
        let Some(k) = self.cont_tail.iter().position(|&v| v == z_var) else {
            return self.clone();
        };
        let mut cont = self.cont_tail.clone();
        cont.remove(k);
        let alpha: Vec<f64> = self
            .alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| a + b[k] * z)
            .collect();
        let beta: Vec<Vec<f64>> = self
            .beta
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b.remove(k);
                b
            })
            .collect();
        Density::new(
            self.head,
            self.disc_tail.clone(),
            cont,
            alpha,
            beta,
            self.sigma2.clone(),
        )
    }

    /// Likelihood of observing the head at `y`, as a token-headed factor over
    /// the discrete tail. Requires an empty continuous tail and positive
    /// variances everywhere.
    pub fn evidence_likelihood(&self, y: f64) -> Result<Factor, AlgebraError> {
        if !self.cont_tail.is_empty() {
            return Err(AlgebraError::ContinuousTailNotEmpty { var: self.head });
        }
        if let Some(config) = self.sigma2.iter().position(|&s| s <= 0.0) {
            return Err(AlgebraError::DegenerateEvidence {
                var: self.head,
                config,
            });
        }
        let table: Vec<f64> = self
            .alpha
            .iter()
            .zip(&self.sigma2)
            .map(|(&a, &s2)| normal_pdf(y, a, s2))
            .collect();
        Ok(Factor::likelihood(
            vec![EvidenceToken {
                var: self.head,
                value: TokenValue::Real(y),
            }],
            self.disc_tail.clone(),
            table,
        ))
    }
}

/// Continuous arc reversal: given f(Y | Z, Z1..Zn) and f(Z | Z1..Zn) over a
/// shared discrete tail, produce f(Y | Z1..Zn) and f(Z | Y, Z1..Zn) with the
/// same pointwise product. Inputs are domain-extended here as needed.
///
/// Zero-variance handling, per discrete configuration: with
/// d = sigma_Y^2 + beta_Z^2 sigma_Z^2, the generic closed forms apply when
/// d > 0; when d = 0 and beta_Z != 0 the pair is a deterministic composition
/// and the reversed density is the exact linear inverse with zero variance;
/// when d = 0 and beta_Z = 0 the exchange is reported as degenerate.
pub fn exchange_continuous(
    f_y: &Density,
    f_z: &Density,
) -> Result<(Density, Density), AlgebraError> {
    let y = f_y.head();
    let z = f_z.head();
    if !f_y.cont_tail.contains(&z) {
        return Err(AlgebraError::MissingTailVar { head: y, tail: z });
    }
    if f_z.cont_tail.contains(&y) {
        return Err(AlgebraError::HeadInTail { var: y });
    }
    // Extend both to the shared scope: discrete union, continuous union
    // (minus z for f_z's side; plus z for f_y's side).
    let shared_cont: Vec<VarId> = {
        let mut s: Vec<VarId> = f_y.cont_tail.iter().copied().filter(|&v| v != z).collect();
        for &v in &f_z.cont_tail {
            if !s.contains(&v) {
                s.push(v);
            }
        }
        s.sort_unstable();
        s
    };
    let disc = f_y.disc_tail.union(&f_z.disc_tail);
    let add_disc_y: Vec<(VarId, usize)> = disc
        .vars()
        .iter()
        .zip(disc.cards())
        .filter(|(v, _)| !f_y.disc_tail.contains(**v))
        .map(|(&v, &c)| (v, c))
        .collect();
    let add_disc_z: Vec<(VarId, usize)> = disc
        .vars()
        .iter()
        .zip(disc.cards())
        .filter(|(v, _)| !f_z.disc_tail.contains(**v))
        .map(|(&v, &c)| (v, c))
        .collect();
    let add_cont_y: Vec<VarId> = shared_cont
        .iter()
        .copied()
        .filter(|v| !f_y.cont_tail.contains(v))
        .collect();
    let add_cont_z: Vec<VarId> = shared_cont
        .iter()
        .copied()
        .filter(|v| !f_z.cont_tail.contains(v))
        .collect();
    let f_y = f_y.extend_domain(&add_disc_y, &add_cont_y)?;
    let f_z = f_z.extend_domain(&add_disc_z, &add_cont_z)?;

    let n_cfg = disc.size();
    let n = shared_cont.len();
    let z_pos = f_y.cont_tail.binary_search(&z).unwrap();

    let mut y_alpha = Vec::with_capacity(n_cfg);
    let mut y_beta = Vec::with_capacity(n_cfg);
    let mut y_sigma2 = Vec::with_capacity(n_cfg);
    let mut z_alpha = Vec::with_capacity(n_cfg);
    let mut z_beta = Vec::with_capacity(n_cfg);
    let mut z_sigma2 = Vec::with_capacity(n_cfg);

    // New continuous tail of the reversed density: shared vars plus y.
    let mut z_new_cont = shared_cont.clone();
    z_new_cont.push(y);
    z_new_cont.sort_unstable();
    let y_pos_new = z_new_cont.binary_search(&y).unwrap();

    for i in 0..n_cfg {
        let alpha_y = f_y.alpha[i];
        let sigma_y = f_y.sigma2[i];
        let beta_z = f_y.beta[i][z_pos];
        let beta_rest: Vec<f64> = shared_cont.iter().map(|&v| f_y.coefficient(i, v)).collect();
        let alpha_z = f_z.alpha[i];
        let sigma_z = f_z.sigma2[i];
        let delta: Vec<f64> = shared_cont.iter().map(|&v| f_z.coefficient(i, v)).collect();

        // Marginal of y with z integrated out.
        y_alpha.push(alpha_y + beta_z * alpha_z);
        y_beta.push(
            (0..n)
                .map(|k| beta_rest[k] + beta_z * delta[k])
                .collect::<Vec<f64>>(),
        );
        let denom = sigma_y + beta_z * beta_z * sigma_z;
        y_sigma2.push(clamp_variance(denom));

        let mut zb = vec![0.0; z_new_cont.len()];
        if denom > 0.0 {
            z_alpha.push((alpha_z * sigma_y - alpha_y * beta_z * sigma_z) / denom);
            for k in 0..n {
                let pos = z_new_cont
                    .binary_search(&shared_cont[k])
                    .expect("shared var present");
                zb[pos] = (delta[k] * sigma_y - beta_rest[k] * beta_z * sigma_z) / denom;
            }
            zb[y_pos_new] = beta_z * sigma_z / denom;
            z_beta.push(zb);
            z_sigma2.push(clamp_variance(sigma_z * sigma_y / denom));
        } else if beta_z != 0.0 {
            // Deterministic composition: z = (y - alpha_y - sum beta_k z_k) / beta_z.
            z_alpha.push(-alpha_y / beta_z);
            for k in 0..n {
                let pos = z_new_cont.binary_search(&shared_cont[k]).unwrap();
                zb[pos] = -beta_rest[k] / beta_z;
            }
            zb[y_pos_new] = 1.0 / beta_z;
            z_beta.push(zb);
            z_sigma2.push(0.0);
        } else {
            return Err(AlgebraError::DegenerateExchange {
                head: y,
                tail: z,
                config: i,
            });
        }
    }

    let new_y = Density::new(y, disc.clone(), shared_cont, y_alpha, y_beta, y_sigma2);
    let new_z = Density::new(z, disc, z_new_cont, z_alpha, z_beta, z_sigma2);
    Ok((new_y, new_z))
}
