//! Engine behavior on the reference networks: initialization placement,
//! message passing, density pushing, evidence insertion and queries.

use std::collections::BTreeSet;

use clg_lazy::algebra::{FactorHead, Potential, TokenValue};
use clg_lazy::engine::{propagate, CollectScope, MsgDir, Stage, TraceEvent, TreeState};
use clg_lazy::fixtures::{net_a, net_b, net_c, net_d, net_e};
use clg_lazy::jtree::{compile, CliqueId, StrongJunctionTree};
use clg_lazy::model::{Evidence, Network, VarId};
use clg_lazy::oracle;

fn clique_by_members(tree: &StrongJunctionTree, members: &[VarId]) -> CliqueId {
    let want: BTreeSet<VarId> = members.iter().copied().collect();
    tree.cliques
        .iter()
        .find(|c| c.members == want)
        .unwrap_or_else(|| panic!("no clique {want:?}"))
        .id
}

/// Compact structural signature of a potential: conditional heads with
/// sorted tails, token heads, density heads with both tails.
fn signature(p: &Potential) -> BTreeSet<String> {
    let mut sig = BTreeSet::new();
    for f in p.factors() {
        let tail: Vec<String> = f.tail().vars().iter().map(|v| v.to_string()).collect();
        match f.head() {
            FactorHead::Variable(v) => sig.insert(format!("P({v}|{})", tail.join(","))),
            FactorHead::Tokens(tk) => {
                let tokens: Vec<String> = tk
                    .iter()
                    .map(|t| match t.value {
                        TokenValue::State(s) => format!("{}={s}", t.var),
                        TokenValue::Real(_) => format!("{}=*", t.var),
                    })
                    .collect();
                sig.insert(format!("L({}|{})", tokens.join(","), tail.join(",")))
            }
        };
    }
    for d in p.densities() {
        let disc: Vec<String> = d.disc_tail().vars().iter().map(|v| v.to_string()).collect();
        let cont: Vec<String> = d.cont_tail().iter().map(|v| v.to_string()).collect();
        sig.insert(format!(
            "f({}|{};{})",
            d.head(),
            disc.join(","),
            cont.join(",")
        ));
    }
    sig
}

fn sigs(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn net_a_initialization_matches_reference_decomposition() {
    let net = net_a::network();
    let tree = compile(&net);
    let state = TreeState::initialize(&tree, &net, &Default::default()).unwrap();
    let c1 = clique_by_members(&tree, &[net_a::X1, net_a::X2, net_a::X3, net_a::Y1]);
    let c2 = clique_by_members(&tree, &[net_a::X2, net_a::X3, net_a::Y1, net_a::Y2]);
    let c3 = clique_by_members(&tree, &[net_a::X3, net_a::Y1, net_a::Y2, net_a::Y3]);
    let c4 = clique_by_members(&tree, &[net_a::Y1, net_a::Y2, net_a::Y3, net_a::Y4]);
    assert_eq!(
        signature(state.clique_potential(c1)),
        sigs(&["P(v0|)", "P(v1|)", "P(v2|)", "f(v6|v0;)"])
    );
    assert_eq!(signature(state.clique_potential(c2)), sigs(&["f(v5|v1;)"]));
    assert_eq!(signature(state.clique_potential(c3)), sigs(&["f(v4|v2;)"]));
    assert_eq!(
        signature(state.clique_potential(c4)),
        sigs(&["f(v3|;v4,v5,v6)"])
    );
}

#[test]
fn net_d_initialization_matches_reference_decomposition() {
    let net = net_d::network();
    let tree = compile(&net);
    let state = TreeState::initialize(&tree, &net, &Default::default()).unwrap();
    let c1 = clique_by_members(&tree, &[net_d::X1, net_d::Y1, net_d::Y2, net_d::Y3]);
    let c2 = clique_by_members(&tree, &[net_d::Y1, net_d::Y2, net_d::Y4]);
    assert_eq!(
        signature(state.clique_potential(c1)),
        sigs(&["P(v0|)", "f(v1|v0;)", "f(v3|v0;v1,v2)"])
    );
    assert_eq!(
        signature(state.clique_potential(c2)),
        sigs(&["f(v2|;v1,v4)", "f(v4|;)"])
    );
}

#[test]
fn net_a_initialization_slices_discrete_evidence() {
    let net = net_a::network();
    let tree = compile(&net);
    let mut ev = std::collections::BTreeMap::new();
    ev.insert(net_a::X1, 0usize);
    let state = TreeState::initialize(&tree, &net, &ev).unwrap();
    let c1 = clique_by_members(&tree, &[net_a::X1, net_a::X2, net_a::X3, net_a::Y1]);
    let pot = state.clique_potential(c1);
    // P(X1) becomes a scalar token factor; f(Y1|X1) loses its discrete tail.
    assert_eq!(
        signature(pot),
        sigs(&["L(v0=0|)", "P(v1|)", "P(v2|)", "f(v6|;)"])
    );
    let token = pot
        .factors()
        .iter()
        .find(|f| matches!(f.head(), FactorHead::Tokens(_)))
        .unwrap();
    assert!((token.value(0, 0) - 0.3).abs() < 1e-15);
    let d = pot.density_headed(net_a::Y1).unwrap();
    assert!((d.alpha()[0] - -1.0).abs() < 1e-15);
    assert!((d.sigma2()[0] - 1.0).abs() < 1e-15);
}

#[test]
fn collect_messages_on_net_a_are_vacuous_without_evidence() {
    let net = net_a::network();
    let tree = compile(&net);
    let mut state = TreeState::initialize(&tree, &net, &Default::default()).unwrap();
    state.collect(CollectScope::ToBoundary).unwrap();
    state.collect(CollectScope::ToRoot).unwrap();
    for s in 0..tree.separators.len() {
        let msg = state.toward_root_message(s).expect("computed");
        assert!(msg.is_vacuous(), "separator {s} should carry nothing");
    }
}

#[test]
fn message_to_parent_projects_to_separator() {
    let net = net_b::network();
    let tree = compile(&net);
    let mut state = TreeState::initialize(&tree, &net, &Default::default()).unwrap();
    state.collect(CollectScope::ToBoundary).unwrap();
    let leaf = clique_by_members(&tree, &[net_b::Y1, net_b::Y2]);
    let msg = state.message_to_parent(leaf).unwrap();
    assert!(msg.is_vacuous(), "Y2 is barren, message is empty");
}

#[test]
fn net_b_continuous_evidence_reproduces_reference_rearrangement() {
    let net = net_b::network();
    let tree = compile(&net);
    let y2 = 1.0;
    let mut ev = Evidence::empty();
    ev.continuous.insert(net_b::Y2, y2);
    let state = propagate(&tree, &net, &ev).unwrap();
    let c1 = clique_by_members(&tree, &[net_b::X, net_b::Y1]);
    let c2 = clique_by_members(&tree, &[net_b::Y1, net_b::Y2]);
    assert!(state.clique_potential(c2).is_vacuous());
    let pot = state.clique_potential(c1);
    assert_eq!(signature(pot), sigs(&["P(v0|)", "L(v2=*|v0)", "f(v1|v0;)"]));
    // Likelihood values: the marginal of Y2 given X is
    // N(0.5 + 1.5 alpha1(x), 2 + 2.25 sigma1^2(x)).
    let lik = pot
        .factors()
        .iter()
        .find(|f| matches!(f.head(), FactorHead::Tokens(_)))
        .unwrap();
    let want0 = clg_lazy::algebra::normal_pdf(y2, -1.0, 4.25);
    let want1 = clg_lazy::algebra::normal_pdf(y2, 3.5, 3.125);
    assert!((lik.value(0, 0) - want0).abs() < 1e-14);
    assert!((lik.value(0, 1) - want1).abs() < 1e-14);
    // Conditioned density of Y1 given X and the observation.
    let d = pot.density_headed(net_b::Y1).unwrap();
    assert!(d.cont_tail().is_empty());
    assert!((d.alpha()[0] - (-2.75 + 1.5 * y2) / 4.25).abs() < 1e-14);
    assert!((d.sigma2()[0] - 2.0 / 4.25).abs() < 1e-14);
    assert!((d.alpha()[1] - (3.625 + 0.75 * y2) / 3.125).abs() < 1e-14);
    assert!((d.sigma2()[1] - 0.32).abs() < 1e-14);
    // The push itself is visible in the trace.
    assert!(state.trace().iter().any(|e| matches!(
        e,
        TraceEvent::PushHop { var, from, to, .. } if *var == net_b::Y2 && *from == c2 && *to == c1
    )));
    // Posterior of X agrees with the two-line computation.
    let got = state.query_discrete(net_b::X).unwrap();
    let w0 = 0.3 * want0;
    let w1 = 0.7 * want1;
    assert!((got[0] - w0 / (w0 + w1)).abs() < 1e-12);
    assert!((got[1] - w1 / (w0 + w1)).abs() < 1e-12);
}

#[test]
fn push_is_a_noop_when_density_sits_in_a_stopping_clique() {
    let net = net_e::network();
    let tree = compile(&net);
    let mut state = TreeState::initialize(&tree, &net, &Default::default()).unwrap();
    state.collect(CollectScope::ToBoundary).unwrap();
    let boundary = clique_by_members(&tree, &[net_e::X3, net_e::Y]);
    assert!(state.boundary_cliques().contains(&boundary));
    let before = state.trace().len();
    let stop = state.push(net_e::Y).unwrap();
    assert_eq!(stop, boundary);
    assert_eq!(state.trace().len(), before, "no hops recorded");
}

#[test]
fn continuous_evidence_insertion_order_does_not_matter() {
    let net = net_d::network();
    let tree = compile(&net);
    let items = [(net_d::Y3, 0.4), (net_d::Y4, -0.2)];
    let mut results = Vec::new();
    for order in [[0, 1], [1, 0]] {
        let mut state = TreeState::initialize(&tree, &net, &Default::default()).unwrap();
        state.collect(CollectScope::ToBoundary).unwrap();
        for ix in order {
            let (v, y) = items[ix];
            state.insert_continuous_evidence(v, y).unwrap();
        }
        state.collect(CollectScope::ToRoot).unwrap();
        state.distribute().unwrap();
        let table = state.query_discrete(net_d::X1).unwrap();
        let m1 = state.query_continuous(net_d::Y1).unwrap();
        let m2 = state.query_continuous(net_d::Y2).unwrap();
        results.push((table, m1.mean(), m1.variance(), m2.mean(), m2.variance()));
    }
    let (t0, a0, b0, c0, d0) = &results[0];
    let (t1, a1, b1, c1, d1) = &results[1];
    for (x, y) in t0.iter().zip(t1) {
        assert!((x - y).abs() < 1e-10);
    }
    assert!((a0 - a1).abs() < 1e-10);
    assert!((b0 - b1).abs() < 1e-10);
    assert!((c0 - c1).abs() < 1e-10);
    assert!((d0 - d1).abs() < 1e-10);
}

#[test]
fn observing_a_separated_root_leaves_other_roots_untouched() {
    // In the three-root network, observing X2 tells nothing about X1 or X3
    // while Y4 stays unobserved.
    let net = net_a::network();
    let tree = compile(&net);
    let mut ev = Evidence::empty();
    ev.discrete.insert(net_a::X2, 0);
    let state = propagate(&tree, &net, &ev).unwrap();
    let x1 = state.query_discrete(net_a::X1).unwrap();
    assert!((x1[0] - 0.3).abs() < 1e-12);
    let x3 = state.query_discrete(net_a::X3).unwrap();
    assert!((x3[0] - 0.2).abs() < 1e-12);
}

#[test]
fn every_containing_source_reports_the_same_table() {
    let net = net_e::network();
    let tree = compile(&net);
    let mut ev = Evidence::empty();
    ev.continuous.insert(net_e::Y2, 0.9);
    let state = propagate(&tree, &net, &ev).unwrap();
    for v in [net_e::X1, net_e::X2, net_e::X3] {
        let all = state.query_discrete_all_sources(v).unwrap();
        // Chain-interior variables appear in two cliques and one separator.
        if v != net_e::X1 {
            assert!(
                all.len() >= 3,
                "expect clique and separator sources for {v}"
            );
        }
        let reference = &all[0].1;
        for (_, table) in &all {
            for (a, b) in reference.iter().zip(table) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn query_leaves_contents_untouched() {
    let net = net_a::network();
    let tree = compile(&net);
    let mut ev = Evidence::empty();
    ev.continuous.insert(net_a::Y2, 0.25);
    let mut state = propagate(&tree, &net, &ev).unwrap();
    let before: Vec<Potential> = (0..tree.cliques.len())
        .map(|c| state.clique_potential(c).clone())
        .collect();
    let before_toward: Vec<Option<Potential>> = (0..tree.separators.len())
        .map(|s| state.toward_root_message(s).cloned())
        .collect();
    let _ = state.query_continuous(net_a::Y4).unwrap();
    let _ = state.query_continuous(net_a::Y1).unwrap();
    for (c, pot) in before.iter().enumerate() {
        assert_eq!(state.clique_potential(c), pot);
    }
    for (s, msg) in before_toward.iter().enumerate() {
        assert_eq!(state.toward_root_message(s), msg.as_ref());
    }
}

#[test]
fn mixture_component_counts_follow_the_conditioning_sets() {
    let net = net_c::network();
    let tree = compile(&net);
    let mut state = propagate(&tree, &net, &Evidence::empty()).unwrap();
    assert_eq!(state.query_continuous(net_c::Y1).unwrap().len(), 2);
    assert_eq!(state.query_continuous(net_c::Y2).unwrap().len(), 4);

    let net = net_a::network();
    let tree = compile(&net);
    let mut state = propagate(&tree, &net, &Evidence::empty()).unwrap();
    assert_eq!(state.query_continuous(net_a::Y1).unwrap().len(), 2);
    assert_eq!(state.query_continuous(net_a::Y2).unwrap().len(), 2);
    assert_eq!(state.query_continuous(net_a::Y3).unwrap().len(), 2);
    assert_eq!(state.query_continuous(net_a::Y4).unwrap().len(), 8);
}

#[test]
fn prior_mixture_weights_match_the_chain_rule() {
    // For the two-root chain network, the prior of Y2 carries weight
    // P(x1) P(x2 | x1) on each (x1, x2) component.
    let net = net_c::network();
    let tree = compile(&net);
    let mut state = propagate(&tree, &net, &Evidence::empty()).unwrap();
    let mix = state.query_continuous(net_c::Y2).unwrap();
    let p_x1 = [0.4, 0.6];
    let p_x2 = [[0.7, 0.3], [0.2, 0.8]];
    for comp in mix.components() {
        let x1 = comp.label.iter().find(|(v, _)| *v == net_c::X1).unwrap().1;
        let x2 = comp.label.iter().find(|(v, _)| *v == net_c::X2).unwrap().1;
        assert!((comp.weight - p_x1[x1] * p_x2[x1][x2]).abs() < 1e-12);
    }
    let joint = oracle::enumerate_joint(&net).unwrap();
    let oracle::Marginal::Continuous(want) =
        oracle::oracle_marginals(&joint, &net, net_c::Y2).unwrap()
    else {
        panic!()
    };
    assert!((mix.mean() - want.mean()).abs() < 1e-12);
    assert!((mix.variance() - want.variance()).abs() < 1e-12);
}

#[test]
fn schedule_stages_appear_in_order_with_visible_boundary_collect() {
    // The discrete-chain network has a boundary clique with a subtree below
    // it, so every stage leaves events.
    let net = net_e::network();
    let tree = compile(&net);
    let mut ev = Evidence::empty();
    ev.continuous.insert(net_e::Y2, -0.3);
    let state = propagate(&tree, &net, &ev).unwrap();
    let stages: Vec<Stage> = state
        .trace()
        .iter()
        .map(|e| match e {
            TraceEvent::Message { stage, .. }
            | TraceEvent::PushHop { stage, .. }
            | TraceEvent::LikelihoodInserted { stage, .. } => *stage,
        })
        .collect();
    assert!(
        stages.windows(2).all(|w| w[0] <= w[1]),
        "stages: {stages:?}"
    );
    assert!(stages.contains(&Stage::CollectToBoundary));
    assert!(stages.contains(&Stage::EvidenceInsertion));
    assert!(stages.contains(&Stage::CollectToRoot));
    assert!(stages.contains(&Stage::Distribute));
    // Push of Y2 lands in the boundary clique {X3, Y}.
    let boundary = clique_by_members(&tree, &[net_e::X3, net_e::Y]);
    assert!(state.trace().iter().any(|e| matches!(
        e,
        TraceEvent::LikelihoodInserted { var, clique, .. }
            if *var == net_e::Y2 && *clique == boundary
    )));
    // Distribute reaches through the all-discrete separators but never from
    // a boundary clique toward its leaves.
    let leaf = clique_by_members(&tree, &[net_e::Y, net_e::Y2]);
    for e in state.trace() {
        if let TraceEvent::Message {
            dir: MsgDir::FromRoot,
            to,
            ..
        } = e
        {
            assert_ne!(*to, leaf, "no outward message into the continuous leaf");
        }
    }
    assert!(state.trace().iter().any(
        |e| matches!(e, TraceEvent::Message { dir: MsgDir::FromRoot, to, .. } if *to == boundary)
    ));
}

#[test]
fn clique_products_stay_proportional_to_the_restricted_joint() {
    // The product of all clique potentials, contracted at any point
    // consistent with the evidence, is proportional to the joint density of
    // the full model at that point.
    use clg_lazy::algebra::{Assignment, Value};
    let net = net_d::network();
    let tree = compile(&net);
    let mut ev = Evidence::empty();
    ev.continuous.insert(net_d::Y4, 0.7);
    let state = propagate(&tree, &net, &ev).unwrap();
    let mut combined = Potential::vacuous();
    for c in 0..tree.cliques.len() {
        combined = combined.combine(state.clique_potential(c));
    }
    let full_model = {
        let mut p = Potential::vacuous();
        for v in net.all_vars() {
            if net.is_discrete(v) {
                p.add_factor(std::sync::Arc::new(clg_lazy::engine::factor_from_cpt(
                    &net,
                    net.cpt(v).unwrap(),
                )));
            } else {
                p.add_density(std::sync::Arc::new(clg_lazy::engine::density_from_clg(
                    &net,
                    net.density(v).unwrap(),
                )));
            }
        }
        p
    };
    let points = [[0usize, 0, 0, 0], [1, 0, 0, 0], [0, 1, 1, 0], [1, 1, 0, 1]];
    let mut ratio: Option<f64> = None;
    for (ix, disc) in points.iter().enumerate() {
        let mut point = Assignment::new();
        point.insert(net_d::X1, Value::State(disc[0]));
        point.insert(net_d::Y1, Value::Real(-0.4 + ix as f64 * 0.3));
        point.insert(net_d::Y2, Value::Real(0.2 + ix as f64 * 0.1));
        point.insert(net_d::Y3, Value::Real(1.1 - ix as f64 * 0.2));
        let mut full_point = point.clone();
        full_point.insert(net_d::Y4, Value::Real(0.7));
        let got = combined.contract(&point);
        let want = full_model.contract(&full_point);
        let r = got / want;
        match ratio {
            None => ratio = Some(r),
            Some(r0) => assert!(
                (r - r0).abs() <= 1e-8 * r0.abs(),
                "ratio drifted: {r0} vs {r}"
            ),
        }
    }
}

#[test]
fn out_of_order_operations_are_rejected() {
    let net = net_b::network();
    let tree = compile(&net);
    let mut state = TreeState::initialize(&tree, &net, &Default::default()).unwrap();
    assert!(state.query_discrete(net_b::X).is_err());
    assert!(state.insert_continuous_evidence(net_b::Y2, 0.0).is_err());
    assert!(state.collect(CollectScope::ToRoot).is_err());
    state.collect(CollectScope::ToBoundary).unwrap();
    assert!(state.collect(CollectScope::ToBoundary).is_err());
    state.collect(CollectScope::ToRoot).unwrap();
    state.distribute().unwrap();
    assert!(state.insert_continuous_evidence(net_b::Y2, 0.0).is_err());
    // instantiated discrete variables answer with a point mass
    let mut ev = Evidence::empty();
    ev.discrete.insert(net_b::X, 1);
    let state = propagate(&tree, &net, &ev).unwrap();
    assert_eq!(state.query_discrete(net_b::X).unwrap(), vec![0.0, 1.0]);
    // instantiated continuous variables cannot be queried
    let mut ev = Evidence::empty();
    ev.continuous.insert(net_b::Y1, 0.0);
    let mut state = propagate(&tree, &net, &ev).unwrap();
    assert!(state.query_continuous(net_b::Y1).is_err());
}

#[test]
fn full_propagation_on_all_fixture_networks_matches_enumeration() {
    for (net, tag) in [
        (net_a::network(), "a"),
        (net_b::network(), "b"),
        (net_c::network(), "c"),
        (net_d::network(), "d"),
        (net_e::network(), "e"),
    ] {
        check_against_oracle(&net, &Evidence::empty(), tag);
    }
}

fn check_against_oracle(net: &Network, ev: &Evidence, tag: &str) {
    let tree = compile(net);
    let joint = oracle::enumerate_joint(net).unwrap();
    let cond = oracle::condition(&joint, ev).unwrap();
    let mut state = propagate(&tree, net, ev).unwrap();
    for v in net.all_vars() {
        if ev.contains(v) {
            continue;
        }
        match oracle::oracle_marginals(&cond, net, v).unwrap() {
            oracle::Marginal::Discrete(want) => {
                let got = state.query_discrete(v).unwrap();
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-10, "net {tag} var {v}");
                }
            }
            oracle::Marginal::Continuous(want) => {
                let got = state.query_continuous(v).unwrap();
                let sd = want.sd().max(1e-9);
                for i in 0..=20 {
                    let y = want.mean() + (i as f64 - 10.0) * 0.5 * sd;
                    assert!(
                        (got.pdf(y) - want.pdf(y)).abs() < 1e-9,
                        "net {tag} var {v} at {y}"
                    );
                }
            }
        }
    }
}
