//! Strong junction tree compilation.
//!
//! The network is moralized and triangulated with a constrained min-fill
//! elimination that removes every continuous variable before any discrete
//! one (ties broken by smallest variable id). Maximal elimination cliques
//! form the tree; the root is the clique absorbing the last elimination, so
//! that on every root-to-leaf path a child either adds only continuous
//! variables or connects through an all-discrete separator.

use std::collections::BTreeSet;

use crate::model::{Network, VarId};

pub type CliqueId = usize;
pub type SepId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Clique {
    pub id: CliqueId,
    pub members: BTreeSet<VarId>,
    pub parent_clique: Option<CliqueId>,
    pub parent_separator: Option<SepId>,
    pub children: Vec<CliqueId>,
    /// Edge distance from the root.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Separator {
    pub id: SepId,
    pub members: BTreeSet<VarId>,
    /// (child-side clique, parent-side clique).
    pub child: CliqueId,
    pub parent: CliqueId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongJunctionTree {
    pub cliques: Vec<Clique>,
    pub separators: Vec<Separator>,
    pub root: CliqueId,
    pub elimination_order: Vec<VarId>,
}

impl StrongJunctionTree {
    pub fn clique(&self, id: CliqueId) -> &Clique {
        &self.cliques[id]
    }

    pub fn separator(&self, id: SepId) -> &Separator {
        &self.separators[id]
    }

    /// Cliques containing every member of `vars`, by id.
    pub fn cliques_covering(&self, vars: &BTreeSet<VarId>) -> Vec<CliqueId> {
        self.cliques
            .iter()
            .filter(|c| vars.is_subset(&c.members))
            .map(|c| c.id)
            .collect()
    }
}

/// Per-clique and total discrete state-space statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    /// Product of state counts of the discrete members, per clique.
    pub per_clique: Vec<u64>,
    pub clique_count: usize,
    pub max_clique_size: u64,
    pub total_size: u64,
}

/// Compile a validated network into a strong junction tree.
pub fn compile(net: &Network) -> StrongJunctionTree {
    let n = net.var_count();
    // Moral graph: undirected family edges.
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let connect = |a: usize, b: usize, adj: &mut Vec<BTreeSet<usize>>| {
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    };
    for v in net.all_vars() {
        let parents = net.parents(v);
        for &p in parents {
            connect(v.0, p.0, &mut adj);
        }
        for (i, &p) in parents.iter().enumerate() {
            for &q in &parents[i + 1..] {
                connect(p.0, q.0, &mut adj);
            }
        }
    }

    // Constrained min-fill elimination: continuous first, then discrete.
    let mut remaining_cont: BTreeSet<usize> =
        net.continuous_vars().iter().map(|c| c.id.0).collect();
    let mut remaining_disc: BTreeSet<usize> = net.discrete_vars().iter().map(|d| d.id.0).collect();
    let mut elim_cliques: Vec<BTreeSet<usize>> = Vec::with_capacity(n);
    let mut order: Vec<VarId> = Vec::with_capacity(n);

    let fill_count = |v: usize, adj: &Vec<BTreeSet<usize>>| -> usize {
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        let mut fill = 0;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !adj[a].contains(&b) {
                    fill += 1;
                }
            }
        }
        fill
    };
    let eliminate = |v: usize, adj: &mut Vec<BTreeSet<usize>>| -> BTreeSet<usize> {
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &a in &nb {
            adj[a].remove(&v);
        }
        let mut clique: BTreeSet<usize> = nb.into_iter().collect();
        adj[v].clear();
        clique.insert(v);
        clique
    };

    for phase in [&mut remaining_cont, &mut remaining_disc] {
        while !phase.is_empty() {
            let v = *phase
                .iter()
                .min_by_key(|&&v| (fill_count(v, &adj), v))
                .unwrap();
            phase.remove(&v);
            order.push(VarId(v));
            elim_cliques.push(eliminate(v, &mut adj));
        }
    }

    // Tree over all elimination cliques: each clique attaches through its
    // residual S_i = C_i \ {v_i} to the first later clique containing S_i
    // (the clique born when the first member of S_i is eliminated).
    let n_elim = elim_cliques.len();
    if n_elim == 0 {
        return StrongJunctionTree {
            cliques: vec![Clique {
                id: 0,
                members: BTreeSet::new(),
                parent_clique: None,
                parent_separator: None,
                children: Vec::new(),
                depth: 0,
            }],
            separators: Vec::new(),
            root: 0,
            elimination_order: order,
        };
    }
    let mut attach: Vec<Option<usize>> = vec![None; n_elim];
    for i in 0..n_elim {
        let mut residual = elim_cliques[i].clone();
        residual.remove(&order[i].0);
        attach[i] = (i + 1..n_elim).find(|&j| residual.is_subset(&elim_cliques[j]));
        debug_assert!(i == n_elim - 1 || attach[i].is_some());
    }

    // Contract containment edges: merge a clique into a tree neighbor that
    // contains it, re-pointing the neighbor's edges, until all survivors are
    // maximal. `merged[i]` redirects to the absorbing node.
    let mut merged: Vec<usize> = (0..n_elim).collect();
    let find = |merged: &Vec<usize>, mut i: usize| -> usize {
        while merged[i] != i {
            i = merged[i];
        }
        i
    };
    loop {
        let mut changed = false;
        for i in 0..n_elim {
            if merged[i] != i {
                continue;
            }
            let Some(raw_parent) = attach[i] else {
                continue;
            };
            let p = find(&merged, raw_parent);
            if p == i {
                continue;
            }
            if elim_cliques[i].is_subset(&elim_cliques[p]) {
                merged[i] = p;
                changed = true;
            } else if elim_cliques[p].is_subset(&elim_cliques[i]) {
                // absorb the parent: adopt its attachment
                merged[p] = i;
                attach[i] = attach[p];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let survivors: Vec<usize> = (0..n_elim).filter(|&i| merged[i] == i).collect();
    let k = survivors.len();
    let node_index: std::collections::BTreeMap<usize, usize> = survivors
        .iter()
        .enumerate()
        .map(|(ix, &i)| (i, ix))
        .collect();
    let maximal: Vec<BTreeSet<usize>> =
        survivors.iter().map(|&i| elim_cliques[i].clone()).collect();
    debug_assert!(!(0..k).any(|a| (0..k).any(|b| a != b && maximal[a].is_subset(&maximal[b]))));
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for &i in &survivors {
        if let Some(raw_parent) = attach[i] {
            let p = find(&merged, raw_parent);
            if p != i {
                edges.push((node_index[&i], node_index[&p]));
            }
        }
    }

    // Root at the clique that absorbed the last elimination.
    let root_birth = node_index[&find(&merged, n_elim - 1)];

    // Orient from the chosen root and renumber cliques breadth-first.
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(a, b) in &edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    let mut bfs_index: Vec<Option<usize>> = vec![None; k];
    let mut queue = vec![root_birth];
    let mut parent_of: Vec<Option<usize>> = vec![None; k];
    let mut head = 0;
    while head < queue.len() {
        let c = queue[head];
        bfs_index[c] = Some(head);
        head += 1;
        for &nb in &neighbors[c] {
            if bfs_index[nb].is_none() && !queue.contains(&nb) {
                parent_of[nb] = Some(c);
                queue.push(nb);
            }
        }
    }
    debug_assert_eq!(head, k, "junction tree is connected");

    let mut cliques: Vec<Clique> = queue
        .iter()
        .enumerate()
        .map(|(new_id, &old)| Clique {
            id: new_id,
            members: maximal[old].iter().map(|&v| VarId(v)).collect(),
            parent_clique: parent_of[old].map(|p| bfs_index[p].unwrap()),
            parent_separator: None,
            children: Vec::new(),
            depth: 0,
        })
        .collect();

    let mut separators = Vec::new();
    for id in 1..k {
        let parent = cliques[id].parent_clique.unwrap();
        let members: BTreeSet<VarId> = cliques[id]
            .members
            .intersection(&cliques[parent].members)
            .copied()
            .collect();
        let sep_id = separators.len();
        separators.push(Separator {
            id: sep_id,
            members,
            child: id,
            parent,
        });
        cliques[id].parent_separator = Some(sep_id);
        cliques[id].depth = cliques[parent].depth + 1;
        cliques[parent].children.push(id);
    }

    StrongJunctionTree {
        cliques,
        separators,
        root: 0,
        elimination_order: order,
    }
}

/// True iff every child clique either connects through an all-discrete
/// separator or adds only continuous variables beyond its parent.
pub fn verify_strong_property(tree: &StrongJunctionTree, net: &Network) -> bool {
    tree.separators.iter().all(|s| {
        let sep_all_discrete = s.members.iter().all(|&v| net.is_discrete(v));
        let added_all_continuous = tree.cliques[s.child]
            .members
            .difference(&tree.cliques[s.parent].members)
            .all(|&v| net.is_continuous(v));
        sep_all_discrete || added_all_continuous
    })
}

/// True iff for every variable the cliques containing it form a connected
/// subtree.
pub fn verify_running_intersection(tree: &StrongJunctionTree, net: &Network) -> bool {
    net.all_vars().all(|v| {
        let holders: Vec<CliqueId> = tree
            .cliques
            .iter()
            .filter(|c| c.members.contains(&v))
            .map(|c| c.id)
            .collect();
        if holders.is_empty() {
            return false;
        }
        // Every holder except the shallowest must have a holder parent.
        let shallowest = *holders
            .iter()
            .min_by_key(|&&c| tree.cliques[c].depth)
            .unwrap();
        holders.iter().all(|&c| {
            c == shallowest
                || tree.cliques[c]
                    .parent_clique
                    .is_some_and(|p| holders.contains(&p))
        })
    })
}

/// True iff every family fa(X) is contained in at least one clique.
pub fn verify_family_covering(tree: &StrongJunctionTree, net: &Network) -> bool {
    net.all_vars()
        .all(|v| !tree.cliques_covering(&net.family(v)).is_empty())
}

/// Discrete state-space statistics in the style of randomized benchmarking
/// reports: s(C) per clique, the maximum, and the total.
pub fn tree_stats(tree: &StrongJunctionTree, net: &Network) -> Stats {
    let per_clique: Vec<u64> = tree
        .cliques
        .iter()
        .map(|c| {
            c.members
                .iter()
                .filter(|&&v| net.is_discrete(v))
                .map(|&v| net.state_count(v) as u64)
                .fold(1u64, |a, b| a.saturating_mul(b))
        })
        .collect();
    Stats {
        clique_count: per_clique.len(),
        max_clique_size: per_clique.iter().copied().max().unwrap_or(0),
        total_size: per_clique.iter().fold(0u64, |a, &b| a.saturating_add(b)),
        per_clique,
    }
}
