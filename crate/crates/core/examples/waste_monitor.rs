//! Build a small mixed network in code, observe a sensor reading, and read
//! posterior marginals.
//!
//! The model: a plant operates in one of two regimes (Mode). The regime
//! drives a latent emission level, the emission level drives a sensor, and
//! an alarm threshold is calibrated per regime:
//!
//! ```text
//!   Mode -> Emission -> Sensor
//!      \-> Alarm bias (per-regime intercept on Sensor)
//! ```

use std::collections::BTreeMap;

use clg_lazy::engine::propagate;
use clg_lazy::jtree::compile;
use clg_lazy::model::{ClgSpec, CptSpec, Evidence, Network, VarDecl, VarId};

fn main() {
    const MODE: VarId = VarId(0);
    const EMISSION: VarId = VarId(1);
    const SENSOR: VarId = VarId(2);

    let decls = vec![
        VarDecl::Discrete {
            labels: vec!["normal".into(), "overload".into()],
        },
        VarDecl::Continuous,
        VarDecl::Continuous,
    ];
    let parents = vec![vec![], vec![MODE], vec![MODE, EMISSION]];
    let mut cpts = BTreeMap::new();
    cpts.insert(
        MODE,
        CptSpec {
            head: MODE,
            tail: vec![],
            table: vec![0.9, 0.1],
        },
    );
    let mut densities = BTreeMap::new();
    densities.insert(
        EMISSION,
        ClgSpec {
            head: EMISSION,
            discrete_tail: vec![MODE],
            continuous_tail: vec![],
            alpha: vec![2.0, 6.5],
            beta: vec![vec![], vec![]],
            sigma2: vec![0.4, 1.5],
        },
    );
    densities.insert(
        SENSOR,
        ClgSpec {
            head: SENSOR,
            discrete_tail: vec![MODE],
            continuous_tail: vec![EMISSION],
            alpha: vec![0.1, 0.8],
            beta: vec![vec![1.0], vec![0.9]],
            sigma2: vec![0.25, 0.25],
        },
    );
    let net = Network::new(decls, parents, cpts, densities).unwrap();
    assert!(clg_lazy::model::validate_network(&net).is_empty());

    let tree = compile(&net);
    println!("junction tree with {} clique(s)", tree.cliques.len());

    let mut evidence = Evidence::empty();
    evidence.continuous.insert(SENSOR, 6.2);
    let mut state = propagate(&tree, &net, &evidence).unwrap();

    let mode = state.query_discrete(MODE).unwrap();
    println!(
        "P(Mode | sensor = 6.2): normal {:.4}, overload {:.4}",
        mode[0], mode[1]
    );

    let emission = state.query_continuous(EMISSION).unwrap();
    println!(
        "Emission | sensor = 6.2: mean {:.3}, sd {:.3}, {} mixture component(s)",
        emission.mean(),
        emission.variance().sqrt(),
        emission.len()
    );
    for c in emission.components() {
        println!(
            "  component weight {:.4}: N({:.3}, {:.3})",
            c.weight, c.mean, c.variance
        );
    }
}
