//! Randomized benchmark harness: network generation, evidence generation,
//! timed propagation sweeps and CSV reporting.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{metrics, Value};
use crate::engine;
use crate::jtree;
use crate::model::{ClgSpec, CptSpec, Evidence, Network, VarDecl, VarId};
use crate::oracle::forward_sample;

/// Sweep configuration. Each (size, fraction, net index, evidence size,
/// set index) cell is fully determined by `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub fractions: Vec<f64>,
    pub nets_per_cell: usize,
    pub evidence_min: usize,
    pub evidence_max: usize,
    pub sets_per_size: usize,
    pub seed: u64,
    pub max_parents: usize,
    /// Optional byte budget on table allocations; exceeding it records an
    /// out-of-memory run instead of aborting the sweep.
    #[serde(default)]
    pub mem_budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    OutOfMemory,
    Error,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::OutOfMemory => "out-of-memory",
            RunStatus::Error => "error",
        }
    }
}

/// One (network, evidence set) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub network: String,
    pub size: usize,
    pub fraction: f64,
    pub evidence: usize,
    pub propagate_ms: f64,
    pub marginals_ms: f64,
    /// Largest discrete configuration materialized during belief update
    /// (factor domains and density conditioning sets).
    pub max_config: usize,
    pub max_components: usize,
    pub status: RunStatus,
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 round
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically generate a random CLG network: `round(frac * n)`
/// continuous variables placed on a random topological order, parent counts
/// uniform in [0, max_parents] over admissible predecessors, uniform-simplex
/// CPT columns, alpha ~ U(-2,2), beta ~ U(-1,1), sigma2 ~ U(0.1, 2).
pub fn generate_network(n: usize, frac: f64, seed: u64, max_parents: usize) -> Network {
    let mut rng =
        ChaCha8Rng::seed_from_u64(mix(seed, (n as u64) << 20 | (frac * 1024.0).round() as u64));
    let n_cont = (frac * n as f64).round() as usize;
    let n_cont = n_cont.min(n);
    // Random topological order, then random kinds over positions.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut kind_cont = vec![false; n];
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    for &v in ids.iter().take(n_cont) {
        kind_cont[v] = true;
    }
    let mut decls = Vec::with_capacity(n);
    for &cont in &kind_cont {
        if cont {
            decls.push(VarDecl::Continuous);
        } else {
            let states = if rng.random_range(0..2) == 0 { 2 } else { 3 };
            decls.push(VarDecl::discrete(states));
        }
    }
    let states_of = |decl: &VarDecl| match decl {
        VarDecl::Discrete { labels } => labels.len(),
        VarDecl::Continuous => 0,
    };

    let mut parents: Vec<Vec<VarId>> = vec![Vec::new(); n];
    for (pos, &v) in order.iter().enumerate() {
        let admissible: Vec<usize> = order[..pos]
            .iter()
            .copied()
            .filter(|&p| !(kind_cont[p] && !kind_cont[v]))
            .collect();
        let want = rng.random_range(0..=max_parents);
        let take = want.min(admissible.len());
        let mut pool = admissible;
        pool.shuffle(&mut rng);
        let mut chosen: Vec<VarId> = pool[..take].iter().map(|&p| VarId(p)).collect();
        chosen.sort_unstable();
        parents[v] = chosen;
    }

    let mut cpts = BTreeMap::new();
    let mut densities = BTreeMap::new();
    for v in 0..n {
        let id = VarId(v);
        if !kind_cont[v] {
            let states = states_of(&decls[v]);
            let tail_size: usize = parents[v].iter().map(|p| states_of(&decls[p.0])).product();
            let mut table = vec![0.0; states * tail_size];
            for t in 0..tail_size {
                // Dirichlet(1): normalized exponentials
                let draws: Vec<f64> = (0..states)
                    .map(|_| -rng.random::<f64>().max(1e-12).ln())
                    .collect();
                let total: f64 = draws.iter().sum();
                for (s, d) in draws.iter().enumerate() {
                    table[s * tail_size + t] = d / total;
                }
            }
            cpts.insert(
                id,
                CptSpec {
                    head: id,
                    tail: parents[v].clone(),
                    table,
                },
            );
        } else {
            let disc_tail: Vec<VarId> = parents[v]
                .iter()
                .copied()
                .filter(|p| !kind_cont[p.0])
                .collect();
            let cont_tail: Vec<VarId> = parents[v]
                .iter()
                .copied()
                .filter(|p| kind_cont[p.0])
                .collect();
            let configs: usize = disc_tail.iter().map(|p| states_of(&decls[p.0])).product();
            let mut alpha = Vec::with_capacity(configs);
            let mut beta = Vec::with_capacity(configs);
            let mut sigma2 = Vec::with_capacity(configs);
            for _ in 0..configs {
                alpha.push(rng.random_range(-2.0..2.0));
                beta.push(
                    (0..cont_tail.len())
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect::<Vec<f64>>(),
                );
                sigma2.push(rng.random_range(0.1..2.0));
            }
            densities.insert(
                id,
                ClgSpec {
                    head: id,
                    discrete_tail: disc_tail,
                    continuous_tail: cont_tail,
                    alpha,
                    beta,
                    sigma2,
                },
            );
        }
    }
    // Parents must be listed in density order (discrete then continuous).
    let parents = (0..n)
        .map(|v| {
            if kind_cont[v] {
                let d = &densities[&VarId(v)];
                let mut ps = d.discrete_tail.clone();
                ps.extend(&d.continuous_tail);
                ps
            } else {
                parents[v].clone()
            }
        })
        .collect();
    Network::new(decls, parents, cpts, densities).expect("generated network is well-formed")
}

/// Evidence on `k` distinct variables, with values drawn from one ancestral
/// sample of the network so the evidence always has positive likelihood.
pub fn generate_evidence(net: &Network, k: usize, seed: u64) -> Evidence {
    assert!(k <= net.var_count());
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x5EED_E41D));
    let sample = forward_sample(net, &mut rng);
    let mut vars: Vec<usize> = (0..net.var_count()).collect();
    vars.shuffle(&mut rng);
    let mut ev = Evidence::empty();
    for &v in vars.iter().take(k) {
        let id = VarId(v);
        match sample[&id] {
            Value::State(s) => {
                ev.discrete.insert(id, s);
            }
            Value::Real(y) => {
                ev.continuous.insert(id, y);
            }
        }
    }
    ev
}

/// Compile, propagate and query every non-evidence variable, returning the
/// record plus compiled tree statistics. Failures are captured as a status.
pub fn run_one(
    name: &str,
    net: &Network,
    evidence: &Evidence,
    mem_budget: Option<u64>,
) -> (BenchRecord, jtree::Stats) {
    let tree = jtree::compile(net);
    let stats = jtree::tree_stats(&tree, net);
    let size = net.var_count();
    let fraction = net.continuous_vars().len() as f64 / size.max(1) as f64;
    let mut record = BenchRecord {
        network: name.to_string(),
        size,
        fraction,
        evidence: evidence.len(),
        propagate_ms: 0.0,
        marginals_ms: 0.0,
        max_config: 0,
        max_components: 0,
        status: RunStatus::Ok,
    };

    let attempt = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        metrics::reset(mem_budget);
        // timing: median of three repetitions each
        let mut prop_times = Vec::new();
        for _ in 0..3 {
            let t0 = Instant::now();
            let state = engine::propagate(&tree, net, evidence)?;
            prop_times.push(t0.elapsed().as_secs_f64() * 1e3);
            drop(state);
        }
        prop_times.sort_by(f64::total_cmp);
        let mut state = engine::propagate(&tree, net, evidence)?;
        let mut marg_times = Vec::new();
        let mut max_components = 0usize;
        for _ in 0..3 {
            let t0 = Instant::now();
            for v in net.all_vars() {
                if evidence.contains(v) {
                    continue;
                }
                if net.is_discrete(v) {
                    state.query_discrete(v)?;
                } else {
                    let mix = state.query_continuous(v)?;
                    max_components = max_components.max(mix.len());
                }
            }
            marg_times.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        marg_times.sort_by(f64::total_cmp);
        Ok::<(f64, f64, usize), engine::EngineError>((prop_times[1], marg_times[1], max_components))
    }));
    record.max_config = metrics::max_config();
    metrics::reset(None);
    match attempt {
        Ok(Ok((p, m, comps))) => {
            record.propagate_ms = p;
            record.marginals_ms = m;
            record.max_components = comps;
        }
        Ok(Err(_)) => record.status = RunStatus::Error,
        Err(payload) => {
            if payload
                .downcast_ref::<metrics::MemBudgetExceeded>()
                .is_some()
            {
                record.status = RunStatus::OutOfMemory;
            } else {
                std::panic::resume_unwind(payload);
            }
        }
    }
    (record, stats)
}

/// Run the full sweep, returning one record per (network, evidence set).
pub fn run_benchmark(config: &BenchConfig) -> Vec<BenchRecord> {
    let mut records = Vec::new();
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {})); // silence budget panics
    for &size in &config.sizes {
        for &fraction in &config.fractions {
            for net_ix in 0..config.nets_per_cell {
                let net_seed = mix(config.seed, (net_ix as u64) << 32 | size as u64);
                let net = generate_network(size, fraction, net_seed, config.max_parents);
                let name = format!("net{size}-{fraction}-{net_ix}");
                for k in config.evidence_min..=config.evidence_max.min(size) {
                    for set_ix in 0..config.sets_per_size {
                        let ev_seed = mix(net_seed, (k as u64) << 16 | set_ix as u64);
                        let ev = generate_evidence(&net, k, ev_seed);
                        let (record, _) = run_one(&name, &net, &ev, config.mem_budget);
                        records.push(record);
                    }
                }
            }
        }
    }
    std::panic::set_hook(default_hook);
    records
}

/// Per-run CSV: versioned header plus one row per record.
pub fn runs_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("schema=1\n");
    out.push_str("network,size,fraction,evidence,propagate_ms,marginals_ms,max_config,max_components,status\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{},{},{}\n",
            r.network,
            r.size,
            r.fraction,
            r.evidence,
            r.propagate_ms,
            r.marginals_ms,
            r.max_config,
            r.max_components,
            r.status.as_str()
        ));
    }
    out
}

/// Aggregate CSV: means keyed by (size, fraction, evidence count).
pub fn agg_csv(records: &[BenchRecord]) -> String {
    let mut groups: BTreeMap<(usize, u64, usize), Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.size, (r.fraction * 1e6) as u64, r.evidence))
            .or_default()
            .push(r);
    }
    let mut out = String::from("schema=1\n");
    out.push_str(
        "size,fraction,evidence,runs,ok,propagate_ms_mean,marginals_ms_mean,max_config_mean,max_components_mean\n",
    );
    for ((size, frac_millionths, evidence), rs) in groups {
        let ok: Vec<&&BenchRecord> = rs.iter().filter(|r| r.status == RunStatus::Ok).collect();
        let mean = |f: &dyn Fn(&BenchRecord) -> f64| -> f64 {
            if ok.is_empty() {
                0.0
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        out.push_str(&format!(
            "{},{},{},{},{},{:.3},{:.3},{:.1},{:.1}\n",
            size,
            frac_millionths as f64 / 1e6,
            evidence,
            rs.len(),
            ok.len(),
            mean(&|r| r.propagate_ms),
            mean(&|r| r.marginals_ms),
            mean(&|r| r.max_config as f64),
            mean(&|r| r.max_components as f64),
        ));
    }
    out
}
