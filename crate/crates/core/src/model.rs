//! Network representation: variables, DAG structure, CPTs and CLG densities.
//!
//! Variables are referenced by dense ids everywhere; display names live only
//! in the I/O layer. All discrete-configuration-indexed tables use row-major
//! order over the tail list as declared, last variable fastest. A table over
//! an empty tail has exactly one entry (the empty configuration).

use std::collections::{BTreeMap, BTreeSet};

/// Dense, contiguous variable index, unique per network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for VarId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteVariable {
    pub id: VarId,
    pub state_labels: Vec<String>,
}

impl DiscreteVariable {
    pub fn state_count(&self) -> usize {
        self.state_labels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousVariable {
    pub id: VarId,
}

/// Conditional probability table P(head | tail).
///
/// `table[s * n_tail_configs + t]` is the probability of head state `s`
/// given tail configuration `t` (row-major over `tail`, last fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct CptSpec {
    pub head: VarId,
    pub tail: Vec<VarId>,
    pub table: Vec<f64>,
}

/// CLG density f(head | discrete_tail, continuous_tail):
/// N(alpha(i) + beta(i) . z, sigma2(i)) per discrete configuration i.
#[derive(Debug, Clone, PartialEq)]
pub struct ClgSpec {
    pub head: VarId,
    pub discrete_tail: Vec<VarId>,
    pub continuous_tail: Vec<VarId>,
    /// One entry per discrete-tail configuration.
    pub alpha: Vec<f64>,
    /// One coefficient vector (length = |continuous_tail|) per configuration.
    pub beta: Vec<Vec<f64>>,
    /// One non-negative variance per configuration.
    pub sigma2: Vec<f64>,
}

/// A CLG Bayesian network over discrete and continuous variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    kinds: Vec<VarKind>,
    discrete: Vec<DiscreteVariable>,
    continuous: Vec<ContinuousVariable>,
    /// Parent list per variable, by id, in declared order.
    parents: Vec<Vec<VarId>>,
    /// One CPT per discrete variable, aligned with `discrete`.
    cpts: Vec<CptSpec>,
    /// One density per continuous variable, aligned with `continuous`.
    densities: Vec<ClgSpec>,
}

/// Declaration of one variable; ids are assigned by position.
#[derive(Debug, Clone, PartialEq)]
pub enum VarDecl {
    Discrete { labels: Vec<String> },
    Continuous,
}

impl VarDecl {
    pub fn binary() -> Self {
        VarDecl::Discrete {
            labels: vec!["s0".into(), "s1".into()],
        }
    }

    pub fn discrete(n: usize) -> Self {
        VarDecl::Discrete {
            labels: (0..n).map(|i| format!("s{i}")).collect(),
        }
    }
}

impl Network {
    /// Assemble a network from declarations in id order. Structural
    /// consistency (every variable parameterized, tails matching parents)
    /// is required here; semantic constraints are checked by
    /// [`validate_network`].
    pub fn new(
        decls: Vec<VarDecl>,
        parents: Vec<Vec<VarId>>,
        mut cpts: BTreeMap<VarId, CptSpec>,
        mut densities: BTreeMap<VarId, ClgSpec>,
    ) -> Result<Network, String> {
        let n = decls.len();
        if parents.len() != n {
            return Err(format!("expected {n} parent lists, got {}", parents.len()));
        }
        let mut kinds = Vec::with_capacity(n);
        let mut discrete = Vec::new();
        let mut continuous = Vec::new();
        for (i, d) in decls.into_iter().enumerate() {
            let id = VarId(i);
            match d {
                VarDecl::Discrete { labels } => {
                    kinds.push(VarKind::Discrete);
                    discrete.push(DiscreteVariable {
                        id,
                        state_labels: labels,
                    });
                }
                VarDecl::Continuous => {
                    kinds.push(VarKind::Continuous);
                    continuous.push(ContinuousVariable { id });
                }
            }
        }
        for p in parents.iter().flatten() {
            if p.0 >= n {
                return Err(format!("parent id {p} out of range"));
            }
        }
        let mut cpt_list = Vec::new();
        for v in &discrete {
            let spec = cpts
                .remove(&v.id)
                .ok_or_else(|| format!("missing cpt for discrete variable {}", v.id))?;
            if spec.head != v.id {
                return Err(format!("cpt head mismatch for {}", v.id));
            }
            cpt_list.push(spec);
        }
        if let Some((id, _)) = cpts.into_iter().next() {
            return Err(format!("cpt supplied for non-discrete variable {id}"));
        }
        let mut density_list = Vec::new();
        for v in &continuous {
            let spec = densities
                .remove(&v.id)
                .ok_or_else(|| format!("missing density for continuous variable {}", v.id))?;
            if spec.head != v.id {
                return Err(format!("density head mismatch for {}", v.id));
            }
            density_list.push(spec);
        }
        if let Some((id, _)) = densities.into_iter().next() {
            return Err(format!("density supplied for non-continuous variable {id}"));
        }
        Ok(Network {
            kinds,
            discrete,
            continuous,
            parents,
            cpts: cpt_list,
            densities: density_list,
        })
    }

    pub fn var_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, v: VarId) -> VarKind {
        self.kinds[v.0]
    }

    pub fn is_discrete(&self, v: VarId) -> bool {
        self.kinds[v.0] == VarKind::Discrete
    }

    pub fn is_continuous(&self, v: VarId) -> bool {
        self.kinds[v.0] == VarKind::Continuous
    }

    pub fn discrete_vars(&self) -> &[DiscreteVariable] {
        &self.discrete
    }

    pub fn continuous_vars(&self) -> &[ContinuousVariable] {
        &self.continuous
    }

    pub fn all_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.kinds.len()).map(VarId)
    }

    pub fn parents(&self, v: VarId) -> &[VarId] {
        &self.parents[v.0]
    }

    /// fa(X) = {X} union parents(X).
    pub fn family(&self, v: VarId) -> BTreeSet<VarId> {
        let mut fam: BTreeSet<VarId> = self.parents[v.0].iter().copied().collect();
        fam.insert(v);
        fam
    }

    /// Number of states of a discrete variable. Panics on continuous ids.
    pub fn state_count(&self, v: VarId) -> usize {
        self.discrete_var(v)
            .unwrap_or_else(|| panic!("{v} is not discrete"))
            .state_count()
    }

    pub fn state_labels(&self, v: VarId) -> &[String] {
        &self
            .discrete_var(v)
            .unwrap_or_else(|| panic!("{v} is not discrete"))
            .state_labels
    }

    pub fn discrete_var(&self, v: VarId) -> Option<&DiscreteVariable> {
        self.discrete.iter().find(|d| d.id == v)
    }

    pub fn cpt(&self, v: VarId) -> Option<&CptSpec> {
        self.cpts.iter().find(|c| c.head == v)
    }

    pub fn density(&self, v: VarId) -> Option<&ClgSpec> {
        self.densities.iter().find(|d| d.head == v)
    }

    pub fn cpts(&self) -> &[CptSpec] {
        &self.cpts
    }

    pub fn densities(&self) -> &[ClgSpec] {
        &self.densities
    }

    /// Variables in a topological order of the DAG, or None if cyclic.
    pub fn topological_order(&self) -> Option<Vec<VarId>> {
        let n = self.var_count();
        let mut indeg = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (v, parents) in self.parents.iter().enumerate() {
            for p in parents {
                indeg[v] += 1;
                children[p.0].push(v);
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        queue.sort_unstable();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            order.push(VarId(v));
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Hard evidence: discrete instantiations and continuous value assignments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evidence {
    pub discrete: BTreeMap<VarId, usize>,
    pub continuous: BTreeMap<VarId, f64>,
}

impl Evidence {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.discrete.is_empty() && self.continuous.is_empty()
    }

    pub fn len(&self) -> usize {
        self.discrete.len() + self.continuous.len()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.discrete.contains_key(&v) || self.continuous.contains_key(&v)
    }
}

/// One violated model constraint; validation reports data, not failures.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    CycleDetected,
    DiscreteWithContinuousParent { var: VarId },
    CptNotNormalized { var: VarId, config: usize, sum: f64 },
    NegativeEntry { var: VarId },
    NegativeSigma { var: VarId, config: usize },
    TableArity { var: VarId, table: &'static str },
    StateCount { var: VarId },
    DuplicateLabels { var: VarId },
    TailMismatch { var: VarId },
    DuplicateTailVar { var: VarId },
}

impl Violation {
    /// Stable kebab-case code for reports.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::CycleDetected => "cycle",
            Violation::DiscreteWithContinuousParent { .. } => "discrete-with-continuous-parent",
            Violation::CptNotNormalized { .. } => "cpt-not-normalized",
            Violation::NegativeEntry { .. } => "cpt-negative-entry",
            Violation::NegativeSigma { .. } => "sigma2-negative",
            Violation::TableArity { .. } => "table-arity-mismatch",
            Violation::StateCount { .. } => "state-count-invalid",
            Violation::DuplicateLabels { .. } => "duplicate-state-labels",
            Violation::TailMismatch { .. } => "tail-parent-mismatch",
            Violation::DuplicateTailVar { .. } => "duplicate-tail-variable",
        }
    }

    pub fn var(&self) -> Option<VarId> {
        match self {
            Violation::CycleDetected => None,
            Violation::DiscreteWithContinuousParent { var }
            | Violation::CptNotNormalized { var, .. }
            | Violation::NegativeEntry { var }
            | Violation::NegativeSigma { var, .. }
            | Violation::TableArity { var, .. }
            | Violation::StateCount { var }
            | Violation::DuplicateLabels { var }
            | Violation::TailMismatch { var }
            | Violation::DuplicateTailVar { var } => Some(*var),
        }
    }
}

pub type ValidationReport = Vec<Violation>;

const CPT_NORMALIZATION_TOL: f64 = 1e-12;

/// Check every model constraint; an empty report means the network is valid.
/// Deterministic and side-effect free.
pub fn validate_network(net: &Network) -> ValidationReport {
    let mut report = Vec::new();

    if net.topological_order().is_none() {
        report.push(Violation::CycleDetected);
    }

    for d in net.discrete_vars() {
        if d.state_count() < 2 {
            report.push(Violation::StateCount { var: d.id });
        }
        let unique: BTreeSet<&String> = d.state_labels.iter().collect();
        if unique.len() != d.state_labels.len() {
            report.push(Violation::DuplicateLabels { var: d.id });
        }
        if net.parents(d.id).iter().any(|&p| net.is_continuous(p)) {
            report.push(Violation::DiscreteWithContinuousParent { var: d.id });
        }
    }

    for cpt in net.cpts() {
        let var = cpt.head;
        if cpt.tail.iter().collect::<BTreeSet<_>>().len() != cpt.tail.len() {
            report.push(Violation::DuplicateTailVar { var });
        }
        if cpt.tail != net.parents(var) {
            report.push(Violation::TailMismatch { var });
        }
        if cpt.tail.iter().any(|&p| net.is_continuous(p)) {
            // Covered by discrete-with-continuous-parent; the table cannot
            // be indexed, so skip numeric checks.
            continue;
        }
        let tail_size: usize = cpt.tail.iter().map(|&p| net.state_count(p)).product();
        let states = net.state_count(var);
        if cpt.table.len() != states * tail_size {
            report.push(Violation::TableArity { var, table: "cpt" });
            continue;
        }
        if cpt.table.iter().any(|&x| x < 0.0) {
            report.push(Violation::NegativeEntry { var });
        }
        for t in 0..tail_size {
            let sum: f64 = (0..states).map(|s| cpt.table[s * tail_size + t]).sum();
            if (sum - 1.0).abs() > CPT_NORMALIZATION_TOL {
                report.push(Violation::CptNotNormalized {
                    var,
                    config: t,
                    sum,
                });
            }
        }
    }

    for den in net.densities() {
        let var = den.head;
        let mut all_tail: Vec<VarId> = den.discrete_tail.clone();
        all_tail.extend(&den.continuous_tail);
        if all_tail.iter().collect::<BTreeSet<_>>().len() != all_tail.len() {
            report.push(Violation::DuplicateTailVar { var });
        }
        if all_tail != net.parents(var) {
            report.push(Violation::TailMismatch { var });
        }
        if den.discrete_tail.iter().any(|&p| !net.is_discrete(p))
            || den.continuous_tail.iter().any(|&p| !net.is_continuous(p))
        {
            report.push(Violation::TailMismatch { var });
            continue;
        }
        let configs: usize = den
            .discrete_tail
            .iter()
            .map(|&p| net.state_count(p))
            .product();
        if den.alpha.len() != configs {
            report.push(Violation::TableArity {
                var,
                table: "alpha",
            });
        }
        if den.sigma2.len() != configs {
            report.push(Violation::TableArity {
                var,
                table: "sigma2",
            });
        }
        if den.beta.len() != configs
            || den
                .beta
                .iter()
                .any(|b| b.len() != den.continuous_tail.len())
        {
            report.push(Violation::TableArity { var, table: "beta" });
        }
        for (i, &s2) in den.sigma2.iter().enumerate() {
            if s2 < 0.0 {
                report.push(Violation::NegativeSigma { var, config: i });
            }
        }
    }

    report
}
