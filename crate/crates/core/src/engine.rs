//! Lazy propagation over the strong junction tree.
//!
//! Clique potentials are the mutable state: every factor and density lives in
//! exactly one clique potential, and the product of all clique potentials
//! stays proportional to the evidence-restricted joint at all times.
//! Separator messages are derived caches, computed on demand by projection
//! and evicted whenever a clique on their root-side path is mutated.
//!
//! The update schedule is: initialize with discrete evidence, collect toward
//! the boundary cliques, insert each continuous observation by pushing its
//! density rootward, then collect to the root and distribute back out to the
//! boundary. Posterior tables are read from the smallest clique or separator
//! containing the query variable; posterior mixtures are produced by a
//! further (rolled-back) push followed by a projection.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{
    AlgebraError, Density, DiscreteDomain, Factor, FactorHead, GaussianMixture, MixtureComponent,
    Potential,
};
use crate::jtree::{CliqueId, SepId, StrongJunctionTree};
use crate::model::{ClgSpec, CptSpec, Evidence, Network, VarId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("operation requires phase {expected}, state is {actual:?}")]
    Phase {
        expected: &'static str,
        actual: Phase,
    },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
    #[error("{0} is not discrete")]
    NotDiscrete(VarId),
    #[error("{0} is not continuous")]
    NotContinuous(VarId),
    #[error("state {state} out of range for {var}")]
    StateOutOfRange { var: VarId, state: usize },
    #[error("{0} is already instantiated")]
    AlreadyInstantiated(VarId),
    #[error("cannot query instantiated continuous variable {0}")]
    QueryInstantiated(VarId),
    #[error("evidence has zero probability")]
    ImpossibleEvidence,
    #[error("evidence value for {0} is not finite")]
    NonFiniteEvidence(VarId),
    #[error("no clique covers the family of {0}")]
    FamilyNotCovered(VarId),
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Initialized,
    PreCollected,
    EvidenceInserted,
    Propagated,
}

/// Where in the update schedule a trace event was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Initialize,
    CollectToBoundary,
    EvidenceInsertion,
    CollectToRoot,
    Distribute,
    Query,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgDir {
    TowardRoot,
    FromRoot,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Message {
        dir: MsgDir,
        from: CliqueId,
        to: CliqueId,
        stage: Stage,
    },
    PushHop {
        var: VarId,
        from: CliqueId,
        to: CliqueId,
        stage: Stage,
    },
    LikelihoodInserted {
        var: VarId,
        clique: CliqueId,
        stage: Stage,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectScope {
    ToBoundary,
    ToRoot,
}

/// Where a posterior table was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuerySource {
    Separator(SepId),
    Clique(CliqueId),
}

/// One propagation session over a compiled tree.
pub struct TreeState<'a> {
    net: &'a Network,
    tree: &'a StrongJunctionTree,
    clique_potentials: Vec<Potential>,
    /// Toward-root message per separator; `None` means not yet computed or
    /// evicted after a mutation below.
    toward_root: Vec<Option<Potential>>,
    from_root: Vec<Option<Potential>>,
    /// Temporary member extensions from push operations.
    clique_extra: Vec<BTreeSet<VarId>>,
    sep_extra: Vec<BTreeSet<VarId>>,
    boundary: BTreeSet<CliqueId>,
    evidence: Evidence,
    phase: Phase,
    stage: Stage,
    trace: Vec<TraceEvent>,
    /// Current clique holding each continuous variable's density.
    density_home: BTreeMap<VarId, CliqueId>,
    /// Global exchange order: pristine topological rank of the network,
    /// with fully eliminated variables re-ranked past the end. Every
    /// exchange anywhere sorts by this one spine, so projections cached at
    /// different times stay mutually consistent.
    var_rank: BTreeMap<VarId, usize>,
    next_back_rank: usize,
}

pub fn factor_from_cpt(net: &Network, spec: &CptSpec) -> Factor {
    let declared: Vec<(VarId, usize)> =
        spec.tail.iter().map(|&v| (v, net.state_count(v))).collect();
    let tail = DiscreteDomain::new(declared.clone());
    let states = net.state_count(spec.head);
    let tail_size = tail.size();
    let mut table = vec![0.0; states * tail_size];
    for (idx, config) in tail.configs() {
        // Recover the declared-order index (row-major, last fastest).
        let mut declared_idx = 0;
        for (v, card) in &declared {
            let pos = tail.position(*v).unwrap();
            declared_idx = declared_idx * card + config[pos];
        }
        for s in 0..states {
            table[s * tail_size + idx] = spec.table[s * tail_size + declared_idx];
        }
    }
    Factor::conditional(spec.head, states, tail, table)
}

pub fn density_from_clg(net: &Network, spec: &ClgSpec) -> Density {
    let declared: Vec<(VarId, usize)> = spec
        .discrete_tail
        .iter()
        .map(|&v| (v, net.state_count(v)))
        .collect();
    let disc = DiscreteDomain::new(declared.clone());
    let mut alpha = Vec::with_capacity(disc.size());
    let mut beta = Vec::with_capacity(disc.size());
    let mut sigma2 = Vec::with_capacity(disc.size());
    for (_, config) in disc.configs() {
        let mut declared_idx = 0;
        for (v, card) in &declared {
            let pos = disc.position(*v).unwrap();
            declared_idx = declared_idx * card + config[pos];
        }
        alpha.push(spec.alpha[declared_idx]);
        beta.push(spec.beta[declared_idx].clone());
        sigma2.push(spec.sigma2[declared_idx]);
    }
    // Density::new sorts the continuous tail and permutes beta columns.
    Density::new(
        spec.head,
        disc,
        spec.continuous_tail.clone(),
        alpha,
        beta,
        sigma2,
    )
}

impl<'a> TreeState<'a> {
    /// Place every CPT and density in the clique nearest the root covering
    /// its family (ties to the lowest clique id), restricted to the discrete
    /// evidence.
    pub fn initialize(
        tree: &'a StrongJunctionTree,
        net: &'a Network,
        discrete_evidence: &BTreeMap<VarId, usize>,
    ) -> Result<TreeState<'a>, EngineError> {
        for (&v, &s) in discrete_evidence {
            if v.0 >= net.var_count() {
                return Err(EngineError::UnknownVariable(v));
            }
            if !net.is_discrete(v) {
                return Err(EngineError::NotDiscrete(v));
            }
            if s >= net.state_count(v) {
                return Err(EngineError::StateOutOfRange { var: v, state: s });
            }
        }
        let var_rank: BTreeMap<VarId, usize> = net
            .topological_order()
            .expect("validated network is acyclic")
            .into_iter()
            .enumerate()
            .map(|(rank, v)| (v, rank))
            .collect();
        let mut state = TreeState {
            net,
            tree,
            clique_potentials: vec![Potential::vacuous(); tree.cliques.len()],
            toward_root: vec![None; tree.separators.len()],
            from_root: vec![None; tree.separators.len()],
            clique_extra: vec![BTreeSet::new(); tree.cliques.len()],
            sep_extra: vec![BTreeSet::new(); tree.separators.len()],
            boundary: BTreeSet::new(),
            evidence: Evidence {
                discrete: discrete_evidence.clone(),
                continuous: BTreeMap::new(),
            },
            phase: Phase::Initialized,
            stage: Stage::Initialize,
            trace: Vec::new(),
            density_home: BTreeMap::new(),
            next_back_rank: net.var_count(),
            var_rank,
        };
        for v in net.all_vars() {
            let family = net.family(v);
            let home = tree
                .cliques_covering(&family)
                .into_iter()
                .min_by_key(|&c| (tree.clique(c).depth, c))
                .ok_or(EngineError::FamilyNotCovered(v))?;
            if net.is_discrete(v) {
                let f = factor_from_cpt(net, net.cpt(v).expect("cpt present"));
                let f = f.instantiate_discrete(discrete_evidence);
                state.clique_potentials[home].add_factor(Arc::new(f));
            } else {
                let d = density_from_clg(net, net.density(v).expect("density present"));
                let d = d.instantiate_discrete(discrete_evidence);
                state.clique_potentials[home].add_density(Arc::new(d));
                state.density_home.insert(v, home);
            }
        }
        state.boundary = state.compute_boundary();
        Ok(state)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    pub fn tree(&self) -> &StrongJunctionTree {
        self.tree
    }

    pub fn boundary_cliques(&self) -> &BTreeSet<CliqueId> {
        &self.boundary
    }

    pub fn clique_potential(&self, c: CliqueId) -> &Potential {
        &self.clique_potentials[c]
    }

    pub fn toward_root_message(&self, s: SepId) -> Option<&Potential> {
        self.toward_root[s].as_ref()
    }

    pub fn from_root_message(&self, s: SepId) -> Option<&Potential> {
        self.from_root[s].as_ref()
    }

    fn clique_members(&self, c: CliqueId) -> BTreeSet<VarId> {
        let mut m = self.tree.clique(c).members.clone();
        m.extend(self.clique_extra[c].iter().copied());
        m
    }

    fn sep_members(&self, s: SepId) -> BTreeSet<VarId> {
        let mut m = self.tree.separator(s).members.clone();
        m.extend(self.sep_extra[s].iter().copied());
        m
    }

    /// Boundary cliques: a continuous part, and a parent whose continuous
    /// part is empty or fully instantiated.
    fn compute_boundary(&self) -> BTreeSet<CliqueId> {
        self.tree
            .cliques
            .iter()
            .filter(|c| {
                let has_cont = c.members.iter().any(|&v| self.net.is_continuous(v));
                let Some(parent) = c.parent_clique else {
                    return false;
                };
                has_cont
                    && self
                        .clique_members(parent)
                        .iter()
                        .filter(|&&v| self.net.is_continuous(v))
                        .all(|v| self.evidence.continuous.contains_key(v))
            })
            .map(|c| c.id)
            .collect()
    }

    fn child_separators(&self, c: CliqueId) -> Vec<SepId> {
        self.tree
            .clique(c)
            .children
            .iter()
            .map(|&ch| self.tree.clique(ch).parent_separator.unwrap())
            .collect()
    }

    /// Combined potential at a clique: its own content plus every available
    /// inbound message (toward-root from children, from-root from parent).
    fn pool_of(&self, c: CliqueId, exclude: Option<SepId>, with_parent: bool) -> Potential {
        let mut pool = self.clique_potentials[c].clone();
        for s in self.child_separators(c) {
            if Some(s) == exclude {
                continue;
            }
            if let Some(msg) = &self.toward_root[s] {
                pool = pool.combine(msg);
            }
        }
        if with_parent {
            if let Some(ps) = self.tree.clique(c).parent_separator {
                if Some(ps) != exclude {
                    if let Some(msg) = &self.from_root[ps] {
                        pool = pool.combine(msg);
                    }
                }
            }
        }
        pool
    }

    /// Evict cached toward-root messages from `c` up to the root.
    fn invalidate_rootward(&mut self, mut c: CliqueId) {
        while let Some(ps) = self.tree.clique(c).parent_separator {
            self.toward_root[ps] = None;
            c = self.tree.separator(ps).parent;
        }
    }

    /// Compute (and cache) the toward-root message through separator `s`,
    /// recursing into the child's subtree as needed.
    fn ensure_toward_root(&mut self, s: SepId) -> Result<(), EngineError> {
        if self.toward_root[s].is_some() {
            return Ok(());
        }
        let child = self.tree.separator(s).child;
        for sub in self.child_separators(child) {
            self.ensure_toward_root(sub)?;
        }
        let pool = self.pool_of(child, None, false);
        let msg = pool.project_with_order(&self.sep_members(s), &self.evidence, &self.var_rank)?;
        self.trace.push(TraceEvent::Message {
            dir: MsgDir::TowardRoot,
            from: child,
            to: self.tree.separator(s).parent,
            stage: self.stage,
        });
        self.toward_root[s] = Some(msg);
        Ok(())
    }

    /// Compute, store and return the message from `c` toward its parent.
    pub fn message_to_parent(&mut self, c: CliqueId) -> Result<Potential, EngineError> {
        let ps = self
            .tree
            .clique(c)
            .parent_separator
            .ok_or_else(|| EngineError::Internal("root has no parent".into()))?;
        self.ensure_toward_root(ps)?;
        Ok(self.toward_root[ps].clone().unwrap())
    }

    /// Inward message passing. `ToBoundary` fills every separator strictly
    /// below a boundary clique; `ToRoot` completes the sweep up to the root.
    pub fn collect(&mut self, scope: CollectScope) -> Result<(), EngineError> {
        match scope {
            CollectScope::ToBoundary => {
                if self.phase != Phase::Initialized {
                    return Err(EngineError::Phase {
                        expected: "initialized",
                        actual: self.phase,
                    });
                }
                self.stage = Stage::CollectToBoundary;
                let boundary: Vec<CliqueId> = self.boundary.iter().copied().collect();
                for b in boundary {
                    for s in self.child_separators(b) {
                        self.ensure_toward_root(s)?;
                    }
                }
                self.phase = Phase::PreCollected;
            }
            CollectScope::ToRoot => {
                if self.phase != Phase::PreCollected && self.phase != Phase::EvidenceInserted {
                    return Err(EngineError::Phase {
                        expected: "pre-collected or evidence-inserted",
                        actual: self.phase,
                    });
                }
                self.stage = Stage::CollectToRoot;
                for s in self.child_separators(self.tree.root) {
                    self.ensure_toward_root(s)?;
                }
            }
        }
        Ok(())
    }

    /// Outward message passing from the root. A message crosses a separator
    /// only if the separator's continuous part is fully instantiated, which
    /// reaches every boundary clique and continues through all-discrete
    /// separators beyond them.
    pub fn distribute(&mut self) -> Result<(), EngineError> {
        if self.phase != Phase::PreCollected && self.phase != Phase::EvidenceInserted {
            return Err(EngineError::Phase {
                expected: "pre-collected or evidence-inserted",
                actual: self.phase,
            });
        }
        self.stage = Stage::Distribute;
        let mut queue = vec![self.tree.root];
        while let Some(c) = queue.pop() {
            for s in self.child_separators(c) {
                let sendable = self
                    .sep_members(s)
                    .iter()
                    .filter(|&&v| self.net.is_continuous(v))
                    .all(|v| self.evidence.continuous.contains_key(v));
                if !sendable {
                    continue;
                }
                let child = self.tree.separator(s).child;
                let pool = self.pool_of(c, Some(s), true);
                let msg =
                    pool.project_with_order(&self.sep_members(s), &self.evidence, &self.var_rank)?;
                self.trace.push(TraceEvent::Message {
                    dir: MsgDir::FromRoot,
                    from: c,
                    to: child,
                    stage: self.stage,
                });
                self.from_root[s] = Some(msg);
                queue.push(child);
            }
        }
        self.phase = Phase::Propagated;
        Ok(())
    }

    // ----- push machinery ------------------------------------------------

    /// Eliminate `z` from every continuous tail it appears in, globally. The
    /// variable is off every separator above `c`, so its density and every
    /// density referencing it live in `c`'s subtree and are pulled in first;
    /// reversing all its arcs at once keeps the global dependency structure
    /// acyclic. The reversed density for `z` stays resident in `c`.
    fn exchange_out_within(
        &mut self,
        c: CliqueId,
        z: VarId,
        guard: &mut Vec<VarId>,
    ) -> Result<(), EngineError> {
        if self.clique_potentials[c].density_headed(z).is_none() {
            if guard.contains(&z) {
                return Err(AlgebraError::ExchangeCycle { var: z }.into());
            }
            self.push_density_to(z, Some(c), guard)?;
        }
        loop {
            let outside: Option<VarId> = self
                .clique_potentials
                .iter()
                .enumerate()
                .filter(|&(c2, _)| c2 != c)
                .flat_map(|(_, pot)| pot.densities())
                .find(|d| d.cont_tail().contains(&z))
                .map(|d| d.head());
            let Some(w) = outside else { break };
            if guard.contains(&w) {
                return Err(AlgebraError::ExchangeCycle { var: w }.into());
            }
            self.push_density_to(w, Some(c), guard)?;
        }
        let pot = &self.clique_potentials[c];
        let Some(mut g) = pot.density_headed(z).cloned() else {
            return Err(AlgebraError::MissingDensity { var: z }.into());
        };
        let mut children: Vec<u64> = pot
            .densities()
            .iter()
            .filter(|d| d.cont_tail().contains(&z))
            .map(|d| d.uid())
            .collect();
        children.sort_by_key(|&uid| {
            let h = self.density_uid(c, uid).head();
            (self.var_rank.get(&h).copied().unwrap_or(usize::MAX), h)
        });
        for uid in children {
            let child = self.density_uid(c, uid).clone();
            let (new_child, new_g) = crate::algebra::exchange_continuous(&child, &g)?;
            let pot = &mut self.clique_potentials[c];
            pot.replace_density(uid, Arc::new(new_child));
            pot.remove_density(g.uid());
            g = Arc::new(new_g);
            pot.add_density(g.clone());
        }
        // The variable is now a pure sink of the dependency graph: nothing
        // references it and its reversed density conditions on survivors
        // only. Move it past the end of the exchange order.
        self.var_rank.insert(z, self.next_back_rank);
        self.next_back_rank += 1;
        self.invalidate_rootward(c);
        // Cached projections that mention the re-oriented variable would
        // retain its old orientation; evict them.
        for s in 0..self.tree.separators.len() {
            if self.toward_root[s].is_some() && self.sep_members(s).contains(&z) {
                self.toward_root[s] = None;
            }
        }
        Ok(())
    }

    fn density_uid(&self, c: CliqueId, uid: u64) -> &Arc<Density> {
        self.clique_potentials[c]
            .densities()
            .iter()
            .find(|d| d.uid() == uid)
            .expect("density resident")
    }

    /// Reduce the continuous tail of `head`'s density (resident in `c`) to a
    /// subset of `keep` by pulling and exchanging within the clique.
    fn reduce_tail(
        &mut self,
        c: CliqueId,
        head: VarId,
        keep: &BTreeSet<VarId>,
        guard: &mut Vec<VarId>,
    ) -> Result<(), EngineError> {
        guard.push(head);
        let result = (|| {
            loop {
                let d = self.clique_potentials[c]
                    .density_headed(head)
                    .ok_or_else(|| EngineError::Internal(format!("density for {head} lost")))?;
                // Eliminate downstream variables first (largest rank) so
                // reversals never run against the dependency order.
                let Some(&z) = d
                    .cont_tail()
                    .iter()
                    .filter(|z| !keep.contains(z))
                    .max_by_key(|&&z| {
                        (
                            self.var_rank.get(&z).copied().unwrap_or(0),
                            std::cmp::Reverse(z),
                        )
                    })
                else {
                    return Ok(());
                };
                self.exchange_out_within(c, z, guard)?;
            }
        })();
        guard.pop();
        result
    }

    /// Move `var`'s density rootward until a stopping clique: the given
    /// target, or (when `target` is None) the root, a boundary clique, or a
    /// clique whose parent separator has its continuous part instantiated.
    fn push_density_to(
        &mut self,
        var: VarId,
        target: Option<CliqueId>,
        guard: &mut Vec<VarId>,
    ) -> Result<CliqueId, EngineError> {
        let mut c = *self
            .density_home
            .get(&var)
            .ok_or_else(|| EngineError::Internal(format!("no density home for {var}")))?;
        loop {
            match target {
                Some(t) => {
                    if c == t {
                        return Ok(c);
                    }
                }
                None => {
                    if self.push_stop(c) {
                        return Ok(c);
                    }
                }
            }
            let Some(ps) = self.tree.clique(c).parent_separator else {
                return match target {
                    Some(t) => Err(EngineError::Internal(format!(
                        "push target {t} is not an ancestor of {c}"
                    ))),
                    None => Ok(c),
                };
            };
            let parent = self.tree.separator(ps).parent;
            if !self.sep_members(ps).contains(&var) {
                self.sep_extra[ps].insert(var);
            }
            if !self.clique_members(parent).contains(&var) {
                self.clique_extra[parent].insert(var);
            }
            let keep = self.sep_members(ps);
            self.reduce_tail(c, var, &keep, guard)?;
            let d = self.clique_potentials[c]
                .density_headed(var)
                .cloned()
                .ok_or_else(|| EngineError::Internal(format!("density for {var} lost")))?;
            let dangling: Vec<VarId> = d
                .disc_tail()
                .vars()
                .iter()
                .copied()
                .filter(|v| !keep.contains(v))
                .collect();
            if !dangling.is_empty() {
                return Err(EngineError::Internal(format!(
                    "discrete tail of {var} escapes separator: {dangling:?}"
                )));
            }
            self.clique_potentials[c].remove_density(d.uid());
            self.clique_potentials[parent].add_density(d);
            self.density_home.insert(var, parent);
            self.invalidate_rootward(c);
            self.trace.push(TraceEvent::PushHop {
                var,
                from: c,
                to: parent,
                stage: self.stage,
            });
            c = parent;
        }
    }

    /// A push stops at the root, or at a boundary clique that outward
    /// message passing can actually reach (every separator on its root path
    /// has a fully instantiated continuous part). An unreachable boundary
    /// clique cannot see root-side information, so the push climbs on.
    fn push_stop(&self, c: CliqueId) -> bool {
        if self.tree.clique(c).parent_separator.is_none() {
            return true;
        }
        self.boundary.contains(&c) && self.outward_reachable(c)
    }

    fn outward_reachable(&self, mut c: CliqueId) -> bool {
        while let Some(ps) = self.tree.clique(c).parent_separator {
            let ok = self
                .sep_members(ps)
                .iter()
                .filter(|&&v| self.net.is_continuous(v))
                .all(|v| self.evidence.continuous.contains_key(v));
            if !ok {
                return false;
            }
            c = self.tree.separator(ps).parent;
        }
        true
    }

    /// Rearrange the tree so `var` sits in a boundary clique (or the root),
    /// returning the stopping clique. Requires a collected state.
    pub fn push(&mut self, var: VarId) -> Result<CliqueId, EngineError> {
        if self.phase < Phase::PreCollected {
            return Err(EngineError::Phase {
                expected: "pre-collected",
                actual: self.phase,
            });
        }
        if !self.net.is_continuous(var) {
            return Err(EngineError::NotContinuous(var));
        }
        if self.evidence.continuous.contains_key(&var) {
            return Err(EngineError::AlreadyInstantiated(var));
        }
        let mut guard = Vec::new();
        self.push_density_to(var, None, &mut guard)
    }

    // ----- evidence -------------------------------------------------------

    /// Insert `var = value`: push the density to a stopping clique if it has
    /// continuous parents, swap it for the observation likelihood there, and
    /// substitute the value into every remaining density tail.
    pub fn insert_continuous_evidence(
        &mut self,
        var: VarId,
        value: f64,
    ) -> Result<(), EngineError> {
        if self.phase != Phase::PreCollected && self.phase != Phase::EvidenceInserted {
            return Err(EngineError::Phase {
                expected: "pre-collected or evidence-inserted",
                actual: self.phase,
            });
        }
        if var.0 >= self.net.var_count() {
            return Err(EngineError::UnknownVariable(var));
        }
        if !self.net.is_continuous(var) {
            return Err(EngineError::NotContinuous(var));
        }
        if self.evidence.contains(var) {
            return Err(EngineError::AlreadyInstantiated(var));
        }
        if !value.is_finite() {
            return Err(EngineError::NonFiniteEvidence(var));
        }
        self.stage = Stage::EvidenceInsertion;
        let mut guard = Vec::new();
        let mut q = *self
            .density_home
            .get(&var)
            .ok_or_else(|| EngineError::Internal(format!("no density home for {var}")))?;
        // Climb only while the density still conditions on continuous
        // variables: each hop eliminates the off-separator part, and the
        // moment the continuous tail is empty the likelihood can be formed
        // right here, whatever discrete conditioning survived.
        loop {
            let cont_empty = self.clique_potentials[q]
                .density_headed(var)
                .expect("density resident")
                .cont_tail()
                .is_empty();
            if cont_empty {
                break;
            }
            if self.push_stop(q) {
                self.reduce_tail(q, var, &BTreeSet::new(), &mut guard)?;
                break;
            }
            let ps = self.tree.clique(q).parent_separator.expect("non-root");
            let parent = self.tree.separator(ps).parent;
            if !self.sep_members(ps).contains(&var) {
                self.sep_extra[ps].insert(var);
            }
            if !self.clique_members(parent).contains(&var) {
                self.clique_extra[parent].insert(var);
            }
            let keep = self.sep_members(ps);
            self.reduce_tail(q, var, &keep, &mut guard)?;
            let d = self.clique_potentials[q]
                .density_headed(var)
                .cloned()
                .expect("density resident");
            if d.cont_tail().is_empty() {
                break;
            }
            let dangling: Vec<VarId> = d
                .disc_tail()
                .vars()
                .iter()
                .copied()
                .filter(|v| !keep.contains(v))
                .collect();
            if !dangling.is_empty() {
                return Err(EngineError::Internal(format!(
                    "discrete tail of {var} escapes separator: {dangling:?}"
                )));
            }
            self.clique_potentials[q].remove_density(d.uid());
            self.clique_potentials[parent].add_density(d);
            self.density_home.insert(var, parent);
            self.invalidate_rootward(q);
            self.trace.push(TraceEvent::PushHop {
                var,
                from: q,
                to: parent,
                stage: self.stage,
            });
            q = parent;
        }
        let d = self.clique_potentials[q]
            .density_headed(var)
            .cloned()
            .expect("density resident at stop clique");
        let likelihood = d.evidence_likelihood(value)?;
        {
            let pot = &mut self.clique_potentials[q];
            pot.remove_density(d.uid());
            pot.add_factor(Arc::new(likelihood));
        }
        self.density_home.remove(&var);
        self.invalidate_rootward(q);
        self.trace.push(TraceEvent::LikelihoodInserted {
            var,
            clique: q,
            stage: self.stage,
        });
        // Bake the observation into every density conditioned on it.
        for c in 0..self.clique_potentials.len() {
            let touched = self.clique_potentials[c]
                .densities()
                .iter()
                .any(|d| d.cont_tail().contains(&var));
            if touched {
                self.clique_potentials[c] =
                    self.clique_potentials[c].instantiate_tail_continuous(var, value);
                self.invalidate_rootward(c);
            }
        }
        self.evidence.continuous.insert(var, value);
        self.boundary = self.compute_boundary();
        self.phase = Phase::EvidenceInserted;
        Ok(())
    }

    // ----- queries ----------------------------------------------------------

    /// Posterior table for a discrete variable, from the smallest queryable
    /// clique or separator containing it. Instantiated variables return a
    /// point mass.
    pub fn query_discrete(&self, var: VarId) -> Result<Vec<f64>, EngineError> {
        if self.phase != Phase::Propagated {
            return Err(EngineError::Phase {
                expected: "propagated",
                actual: self.phase,
            });
        }
        if var.0 >= self.net.var_count() {
            return Err(EngineError::UnknownVariable(var));
        }
        if !self.net.is_discrete(var) {
            return Err(EngineError::NotDiscrete(var));
        }
        let states = self.net.state_count(var);
        if let Some(&s) = self.evidence.discrete.get(&var) {
            let mut table = vec![0.0; states];
            table[s] = 1.0;
            return Ok(table);
        }
        let source = self
            .query_sources(var)
            .into_iter()
            .min_by_key(|&(score, kind, id, _)| (score, kind, id))
            .map(|(_, _, _, src)| src)
            .ok_or_else(|| EngineError::Internal(format!("no query source for {var}")))?;
        self.query_discrete_from(var, source)
    }

    /// All queryable sources with their tables; used to check that every
    /// containing clique and separator agrees.
    pub fn query_discrete_all_sources(
        &self,
        var: VarId,
    ) -> Result<Vec<(QuerySource, Vec<f64>)>, EngineError> {
        let mut out = Vec::new();
        for (_, _, _, src) in self.query_sources(var) {
            out.push((src, self.query_discrete_from(var, src)?));
        }
        Ok(out)
    }

    /// (s-size, kind-rank, id, source) for every clique and separator
    /// containing `var` with complete inbound information.
    fn query_sources(&self, var: VarId) -> Vec<(u64, u8, usize, QuerySource)> {
        let disc_size = |members: &BTreeSet<VarId>| -> u64 {
            members
                .iter()
                .filter(|&&v| self.net.is_discrete(v))
                .map(|&v| self.net.state_count(v) as u64)
                .fold(1u64, |a, b| a.saturating_mul(b))
        };
        let mut out = Vec::new();
        for s in 0..self.tree.separators.len() {
            let members = self.sep_members(s);
            if members.contains(&var)
                && self.toward_root[s].is_some()
                && self.from_root[s].is_some()
            {
                out.push((disc_size(&members), 0u8, s, QuerySource::Separator(s)));
            }
        }
        for c in 0..self.tree.cliques.len() {
            let members = self.clique_members(c);
            if !members.contains(&var) {
                continue;
            }
            let reachable = match self.tree.clique(c).parent_separator {
                None => true,
                Some(ps) => self.from_root[ps].is_some(),
            };
            if reachable {
                out.push((disc_size(&members), 1u8, c, QuerySource::Clique(c)));
            }
        }
        out
    }

    fn query_discrete_from(
        &self,
        var: VarId,
        source: QuerySource,
    ) -> Result<Vec<f64>, EngineError> {
        let pot = match source {
            QuerySource::Separator(s) => {
                let mut p = self.toward_root[s].clone().expect("toward-root present");
                p = p.combine(self.from_root[s].as_ref().expect("from-root present"));
                p
            }
            QuerySource::Clique(c) => self.pool_of(c, None, true),
        };
        // Discrete marginals never require eliminating continuous variables:
        // the remaining densities are proper conditionals and integrate out.
        let mut factors_only = Potential::vacuous();
        for f in pot.factors() {
            factors_only.add_factor(f.clone());
        }
        let targets: BTreeSet<VarId> = [var].into();
        let projected =
            factors_only.project_with_order(&targets, &self.evidence, &self.var_rank)?;
        let states = self.net.state_count(var);
        let mut table = vec![1.0; states];
        for f in projected.factors() {
            for (x, t) in table.iter_mut().enumerate() {
                let (s, idx) = match f.head() {
                    FactorHead::Variable(v) => {
                        debug_assert_eq!(*v, var);
                        (x, 0)
                    }
                    FactorHead::Tokens(_) => {
                        if f.tail().contains(var) {
                            (0, f.tail().index_of(&[x]))
                        } else {
                            (0, 0)
                        }
                    }
                };
                *t *= f.value(s, idx);
            }
        }
        let total: f64 = table.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(EngineError::ImpossibleEvidence);
        }
        for t in &mut table {
            *t /= total;
        }
        Ok(table)
    }

    /// Posterior mixture for a continuous variable.
    ///
    /// Conceptually this pushes the variable's density to a stopping clique
    /// and projects there; operationally the same pool is assembled without
    /// touching the tree: the potentials of every clique on the path from
    /// the density's home to the stopping clique, each inbound message into
    /// that path from an off-path neighbor, and the stopping clique's
    /// inward message. Clique and separator contents are left untouched.
    pub fn query_continuous(&mut self, var: VarId) -> Result<GaussianMixture, EngineError> {
        if self.phase != Phase::Propagated {
            return Err(EngineError::Phase {
                expected: "propagated",
                actual: self.phase,
            });
        }
        if var.0 >= self.net.var_count() {
            return Err(EngineError::UnknownVariable(var));
        }
        if !self.net.is_continuous(var) {
            return Err(EngineError::NotContinuous(var));
        }
        if self.evidence.continuous.contains_key(&var) {
            return Err(EngineError::QueryInstantiated(var));
        }
        self.stage = Stage::Query;
        self.query_continuous_inner(var)
    }

    fn query_continuous_inner(&mut self, var: VarId) -> Result<GaussianMixture, EngineError> {
        let home = *self
            .density_home
            .get(&var)
            .ok_or_else(|| EngineError::Internal(format!("no density home for {var}")))?;
        let mut path = vec![home];
        while !self.push_stop(*path.last().unwrap()) {
            let c = *path.last().unwrap();
            let ps = self.tree.clique(c).parent_separator.unwrap();
            path.push(self.tree.separator(ps).parent);
        }
        let q = *path.last().unwrap();
        let mut pool = Potential::vacuous();
        for &p in &path {
            pool = pool.combine(&self.clique_potentials[p]);
            for s in self.child_separators(p) {
                if path.contains(&self.tree.separator(s).child) {
                    continue;
                }
                self.ensure_toward_root(s)?;
                pool = pool.combine(self.toward_root[s].as_ref().unwrap());
            }
        }
        if let Some(ps) = self.tree.clique(q).parent_separator {
            let msg = self.from_root[ps].as_ref().ok_or_else(|| {
                EngineError::Internal(format!("stopping clique {q} lacks its inward message"))
            })?;
            pool = pool.combine(msg);
        }
        let targets: BTreeSet<VarId> = [var].into();
        let mut pot = pool.remove_barren(&targets, &self.evidence);
        // Phase 1: integrate out every other continuous variable.
        loop {
            let (_, cont) = pot.domain();
            let mut cands: Vec<VarId> = cont.into_iter().filter(|&v| v != var).collect();
            if cands.is_empty() {
                break;
            }
            cands.sort_unstable();
            pot.eliminate_continuous_ordered(cands[0], &self.var_rank)?;
            pot = pot.remove_barren(&targets, &self.evidence);
        }
        let d = pot.density_headed(var).cloned().ok_or_else(|| {
            EngineError::Internal(format!("no density for {var} after projection"))
        })?;
        debug_assert!(d.cont_tail().is_empty());
        // Phase 2: sum out discrete variables not conditioning the density.
        let labels: BTreeSet<VarId> = d.disc_tail().vars().iter().copied().collect();
        loop {
            let (disc, _) = pot.domain();
            let mut cands: Vec<VarId> = disc
                .keys()
                .copied()
                .filter(|v| !labels.contains(v))
                .collect();
            if cands.is_empty() {
                break;
            }
            cands.sort_unstable();
            pot.eliminate_discrete_ordered(cands[0], &self.var_rank)?;
            let keep: BTreeSet<VarId> = labels.iter().copied().chain([var]).collect();
            pot = pot.remove_barren(&keep, &self.evidence);
        }
        // One component per configuration of the conditioning set, weighted
        // by the product of the remaining factors.
        let dom = d.disc_tail().clone();
        let mut components = Vec::with_capacity(dom.size());
        for (cfg, states) in dom.configs() {
            let mut weight = 1.0;
            for f in pot.factors() {
                let head_state = match f.head() {
                    FactorHead::Variable(v) => states[dom.position(*v).expect("head in labels")],
                    FactorHead::Tokens(_) => 0,
                };
                let tail_states: Vec<usize> = f
                    .tail()
                    .vars()
                    .iter()
                    .map(|v| states[dom.position(*v).expect("tail in labels")])
                    .collect();
                weight *= f.value(head_state, f.tail().index_of(&tail_states));
            }
            components.push(MixtureComponent {
                weight,
                mean: d.mean_at(cfg, &[]),
                variance: d.sigma2()[cfg],
                label: dom.vars().iter().copied().zip(states).collect(),
            });
        }
        GaussianMixture::new(components).map_err(|_| EngineError::ImpossibleEvidence)
    }
}

/// Run the full update schedule: initialize with the discrete evidence,
/// collect to the boundary, insert continuous evidence in ascending variable
/// order, collect to the root, and distribute.
pub fn propagate<'a>(
    tree: &'a StrongJunctionTree,
    net: &'a Network,
    evidence: &Evidence,
) -> Result<TreeState<'a>, EngineError> {
    let mut state = TreeState::initialize(tree, net, &evidence.discrete)?;
    state.collect(CollectScope::ToBoundary)?;
    for (&v, &y) in &evidence.continuous {
        state.insert_continuous_evidence(v, y)?;
    }
    state.collect(CollectScope::ToRoot)?;
    state.distribute()?;
    Ok(state)
}
