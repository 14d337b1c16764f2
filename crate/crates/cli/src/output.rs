//! Result emission shared by the engine-backed and enumeration-backed query
//! commands, so their outputs can be diffed directly. All numbers print
//! with twelve significant digits.

use clg_lazy::algebra::GaussianMixture;
use clg_lazy::oracle::ContinuousMarginal;

use crate::format::ParsedNetwork;
use clg_lazy::model::{Evidence, VarId};

pub fn num12(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    format!("{:.11e}", x)
}

pub enum TargetResult {
    Discrete {
        states: Vec<String>,
        probabilities: Vec<f64>,
    },
    Continuous {
        components: Vec<(f64, f64, f64)>,
        mean: f64,
        variance: f64,
    },
}

/// Canonical component list: merged within 1e-12 and ordered by mean,
/// variance, weight, so decompositions with differently-split identical
/// components print the same.
pub fn canonical_components(components: Vec<(f64, f64, f64)>) -> Vec<(f64, f64, f64)> {
    let mut merged: Vec<(f64, f64, f64)> = Vec::new();
    for (w, m, v) in components {
        if w <= 0.0 {
            continue;
        }
        match merged
            .iter_mut()
            .find(|(_, m2, v2)| (m - *m2).abs() <= 1e-12 && (v - *v2).abs() <= 1e-12)
        {
            Some((w2, _, _)) => *w2 += w,
            None => merged.push((w, m, v)),
        }
    }
    merged.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(a.2.total_cmp(&b.2))
            .then(a.0.total_cmp(&b.0))
    });
    merged
}

pub fn from_mixture(mix: &GaussianMixture) -> TargetResult {
    let components = canonical_components(
        mix.components()
            .iter()
            .map(|c| (c.weight, c.mean, c.variance))
            .collect(),
    );
    TargetResult::Continuous {
        components,
        mean: mix.mean(),
        variance: mix.variance(),
    }
}

pub fn from_marginal(m: &ContinuousMarginal) -> TargetResult {
    let components = canonical_components(m.components.clone());
    TargetResult::Continuous {
        components,
        mean: m.mean(),
        variance: m.variance(),
    }
}

/// Render the full result document.
pub fn render(
    parsed: &ParsedNetwork,
    evidence: &Evidence,
    targets: &[(VarId, TargetResult)],
) -> String {
    let mut out = String::from("{\n  \"evidence\": {");
    let mut ev_items: Vec<(String, String)> = Vec::new();
    for (&v, &s) in &evidence.discrete {
        let label = &parsed.network.state_labels(v)[s];
        ev_items.push((parsed.name_of(v).to_string(), format!("\"{label}\"")));
    }
    for (&v, &y) in &evidence.continuous {
        ev_items.push((parsed.name_of(v).to_string(), num12(y)));
    }
    ev_items.sort();
    let rendered: Vec<String> = ev_items
        .iter()
        .map(|(k, v)| format!("\"{k}\": {v}"))
        .collect();
    out.push_str(&rendered.join(", "));
    out.push_str("},\n  \"targets\": {\n");
    let lines: Vec<String> = targets
        .iter()
        .map(|(v, r)| {
            let name = parsed.name_of(*v);
            match r {
                TargetResult::Discrete {
                    states,
                    probabilities,
                } => {
                    let s: Vec<String> = states.iter().map(|s| format!("\"{s}\"")).collect();
                    let p: Vec<String> = probabilities.iter().map(|&p| num12(p)).collect();
                    format!(
                        "    \"{name}\": {{\"kind\": \"discrete\", \"states\": [{}], \"probabilities\": [{}]}}",
                        s.join(", "),
                        p.join(", ")
                    )
                }
                TargetResult::Continuous {
                    components,
                    mean,
                    variance,
                } => {
                    let comps: Vec<String> = components
                        .iter()
                        .map(|(w, m, v)| {
                            format!(
                                "{{\"weight\": {}, \"mean\": {}, \"variance\": {}}}",
                                num12(*w),
                                num12(*m),
                                num12(*v)
                            )
                        })
                        .collect();
                    format!(
                        "    \"{name}\": {{\"kind\": \"continuous\", \"components\": [{}], \"mean\": {}, \"variance\": {}}}",
                        comps.join(", "),
                        num12(*mean),
                        num12(*variance)
                    )
                }
            }
        })
        .collect();
    out.push_str(&lines.join(",\n"));
    out.push_str("\n  }\n}\n");
    out
}
