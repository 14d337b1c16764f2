//! Network file schema: a small JSON document with named variables, edges,
//! CPTs and density parameter tables.
//!
//! Variable ids are assigned by position in the `variables` array. For each
//! child, its tail ordering is the order its parents appear in `edges`
//! (continuous children list discrete parents before continuous ones).
//! Tables are row-major over the tail, last variable fastest, with the head
//! state as the slowest axis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use clg_lazy::model::{ClgSpec, CptSpec, Network, VarDecl, VarId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub variables: Vec<VariableDecl>,
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub cpts: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub densities: BTreeMap<String, DensityDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityDecl {
    pub alpha: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
}

/// A parsed network together with its name table.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedNetwork {
    pub name: String,
    pub network: Network,
    pub var_names: Vec<String>,
    pub index: BTreeMap<String, VarId>,
}

impl ParsedNetwork {
    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn name_of(&self, v: VarId) -> &str {
        &self.var_names[v.0]
    }
}

/// Schema-level failure, with the offending variable where applicable.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemaError {
    Json(String),
    DuplicateVariable(String),
    UnknownVariable(String),
    MissingStates(String),
    UnexpectedStates(String),
    MissingTable(String),
    UnexpectedTable(String),
    CptArity(String),
    BetaArity(String),
    AlphaArity(String),
    Sigma2Arity(String),
    DiscreteParentOfContinuousTable(String),
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemaError::Json(m) => write!(f, "malformed JSON: {m}"),
            SchemaError::DuplicateVariable(n) => write!(f, "duplicate variable name {n}"),
            SchemaError::UnknownVariable(n) => write!(f, "unknown variable {n}"),
            SchemaError::MissingStates(n) => write!(f, "discrete variable {n} lacks states"),
            SchemaError::UnexpectedStates(n) => {
                write!(f, "continuous variable {n} must not declare states")
            }
            SchemaError::MissingTable(n) => write!(f, "no table supplied for {n}"),
            SchemaError::UnexpectedTable(n) => write!(f, "unexpected table for {n}"),
            SchemaError::CptArity(n) => write!(f, "cpt-arity-mismatch for {n}"),
            SchemaError::BetaArity(n) => write!(f, "beta-arity-mismatch for {n}"),
            SchemaError::AlphaArity(n) => write!(f, "alpha-arity-mismatch for {n}"),
            SchemaError::Sigma2Arity(n) => write!(f, "sigma2-arity-mismatch for {n}"),
            SchemaError::DiscreteParentOfContinuousTable(n) => {
                write!(f, "discrete variable {n} cannot take a density")
            }
        }
    }
}

pub fn parse_network(text: &str) -> Result<ParsedNetwork, SchemaError> {
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
    from_file(&file)
}

pub fn from_file(file: &NetworkFile) -> Result<ParsedNetwork, SchemaError> {
    let mut index: BTreeMap<String, VarId> = BTreeMap::new();
    let mut decls = Vec::new();
    let mut var_names = Vec::new();
    for (i, v) in file.variables.iter().enumerate() {
        if index.insert(v.name.clone(), VarId(i)).is_some() {
            return Err(SchemaError::DuplicateVariable(v.name.clone()));
        }
        var_names.push(v.name.clone());
        match v.kind {
            Kind::Discrete => {
                let states = v
                    .states
                    .clone()
                    .ok_or_else(|| SchemaError::MissingStates(v.name.clone()))?;
                decls.push(VarDecl::Discrete { labels: states });
            }
            Kind::Continuous => {
                if v.states.is_some() {
                    return Err(SchemaError::UnexpectedStates(v.name.clone()));
                }
                decls.push(VarDecl::Continuous);
            }
        }
    }
    let kind_of = |id: VarId| file.variables[id.0].kind;
    let states_of = |id: VarId| file.variables[id.0].states.as_ref().map_or(0, |s| s.len());

    // parents in edge order, per child
    let mut parents_in_order: Vec<Vec<VarId>> = vec![Vec::new(); decls.len()];
    for (p, c) in &file.edges {
        let pid = *index
            .get(p)
            .ok_or_else(|| SchemaError::UnknownVariable(p.clone()))?;
        let cid = *index
            .get(c)
            .ok_or_else(|| SchemaError::UnknownVariable(c.clone()))?;
        parents_in_order[cid.0].push(pid);
    }

    let mut cpts = BTreeMap::new();
    let mut densities = BTreeMap::new();
    for (name, table) in &file.cpts {
        let id = *index
            .get(name)
            .ok_or_else(|| SchemaError::UnknownVariable(name.clone()))?;
        if kind_of(id) != Kind::Discrete {
            return Err(SchemaError::UnexpectedTable(name.clone()));
        }
        let tail = parents_in_order[id.0].clone();
        let tail_size: usize = tail.iter().map(|&p| states_of(p).max(1)).product();
        if tail.iter().any(|&p| kind_of(p) == Kind::Continuous)
            || table.len() != states_of(id) * tail_size
        {
            return Err(SchemaError::CptArity(name.clone()));
        }
        cpts.insert(
            id,
            CptSpec {
                head: id,
                tail,
                table: table.clone(),
            },
        );
    }
    for (name, decl) in &file.densities {
        let id = *index
            .get(name)
            .ok_or_else(|| SchemaError::UnknownVariable(name.clone()))?;
        if kind_of(id) != Kind::Continuous {
            return Err(SchemaError::DiscreteParentOfContinuousTable(name.clone()));
        }
        let discrete_tail: Vec<VarId> = parents_in_order[id.0]
            .iter()
            .copied()
            .filter(|&p| kind_of(p) == Kind::Discrete)
            .collect();
        let continuous_tail: Vec<VarId> = parents_in_order[id.0]
            .iter()
            .copied()
            .filter(|&p| kind_of(p) == Kind::Continuous)
            .collect();
        let configs: usize = discrete_tail.iter().map(|&p| states_of(p)).product();
        if decl.alpha.len() != configs {
            return Err(SchemaError::AlphaArity(name.clone()));
        }
        if decl.sigma2.len() != configs {
            return Err(SchemaError::Sigma2Arity(name.clone()));
        }
        if decl.beta.len() != configs
            || decl
                .beta
                .iter()
                .any(|row| row.len() != continuous_tail.len())
        {
            return Err(SchemaError::BetaArity(name.clone()));
        }
        densities.insert(
            id,
            ClgSpec {
                head: id,
                discrete_tail,
                continuous_tail,
                alpha: decl.alpha.clone(),
                beta: decl.beta.clone(),
                sigma2: decl.sigma2.clone(),
            },
        );
    }
    for (i, decl) in decls.iter().enumerate() {
        let name = &file.variables[i].name;
        match decl {
            VarDecl::Discrete { .. } if !cpts.contains_key(&VarId(i)) => {
                return Err(SchemaError::MissingTable(name.clone()));
            }
            VarDecl::Continuous if !densities.contains_key(&VarId(i)) => {
                return Err(SchemaError::MissingTable(name.clone()));
            }
            _ => {}
        }
    }
    // reorder parents to (discrete, continuous) for continuous children,
    // matching the density tail convention
    let parents: Vec<Vec<VarId>> = (0..decls.len())
        .map(|i| {
            let id = VarId(i);
            if kind_of(id) == Kind::Continuous {
                let d = &densities[&id];
                let mut ps = d.discrete_tail.clone();
                ps.extend(&d.continuous_tail);
                ps
            } else {
                parents_in_order[i].clone()
            }
        })
        .collect();
    let network = Network::new(decls, parents, cpts, densities).map_err(SchemaError::Json)?;
    let name = file.name.clone().unwrap_or_else(|| "network".to_string());
    Ok(ParsedNetwork {
        name,
        network,
        var_names,
        index,
    })
}

/// Canonical serialization; `parse(serialize(n))` reproduces `n` exactly.
pub fn to_file(parsed: &ParsedNetwork) -> NetworkFile {
    let net = &parsed.network;
    let mut variables = Vec::new();
    for v in net.all_vars() {
        if net.is_discrete(v) {
            variables.push(VariableDecl {
                name: parsed.var_names[v.0].clone(),
                kind: Kind::Discrete,
                states: Some(net.state_labels(v).to_vec()),
            });
        } else {
            variables.push(VariableDecl {
                name: parsed.var_names[v.0].clone(),
                kind: Kind::Continuous,
                states: None,
            });
        }
    }
    let mut edges = Vec::new();
    for v in net.all_vars() {
        for &p in net.parents(v) {
            edges.push((parsed.var_names[p.0].clone(), parsed.var_names[v.0].clone()));
        }
    }
    let cpts = net
        .cpts()
        .iter()
        .map(|c| (parsed.var_names[c.head.0].clone(), c.table.clone()))
        .collect();
    let densities = net
        .densities()
        .iter()
        .map(|d| {
            (
                parsed.var_names[d.head.0].clone(),
                DensityDecl {
                    alpha: d.alpha.clone(),
                    beta: d.beta.clone(),
                    sigma2: d.sigma2.clone(),
                },
            )
        })
        .collect();
    NetworkFile {
        name: Some(parsed.name.clone()),
        variables,
        edges,
        cpts,
        densities,
    }
}

pub fn serialize(parsed: &ParsedNetwork) -> String {
    let mut text = serde_json::to_string_pretty(&to_file(parsed)).expect("serializable");
    text.push('\n');
    text
}
