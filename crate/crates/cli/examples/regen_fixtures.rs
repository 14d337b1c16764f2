//! Regenerate the JSON fixture corpus from the library's reference networks.
//!
//! Usage: cargo run -p clg-lazy-cli --example regen_fixtures

use clg_lazy_cli::format;

use std::collections::BTreeMap;

use clg_lazy::fixtures;
use clg_lazy::model::{Network, VarId};
use format::ParsedNetwork;

fn parsed(name: &str, network: Network, names: &[&str]) -> ParsedNetwork {
    let var_names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let index: BTreeMap<String, VarId> = var_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), VarId(i)))
        .collect();
    ParsedNetwork {
        name: name.to_string(),
        network,
        var_names,
        index,
    }
}

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).unwrap();
    let all = [
        parsed(
            "net-a",
            fixtures::net_a::network(),
            &["X1", "X2", "X3", "Y4", "Y3", "Y2", "Y1"],
        ),
        parsed("net-b", fixtures::net_b::network(), &["X", "Y1", "Y2"]),
        parsed(
            "net-c",
            fixtures::net_c::network(),
            &["X1", "X2", "Y1", "Y2"],
        ),
        parsed(
            "net-d",
            fixtures::net_d::network(),
            &["X1", "Y1", "Y2", "Y3", "Y4"],
        ),
        parsed(
            "net-e",
            fixtures::net_e::network(),
            &["X1", "X2", "X3", "Y", "Y2"],
        ),
    ];
    for p in &all {
        let path = dir.join(format!("{}.json", p.name.replace('-', "_")));
        std::fs::write(&path, format::serialize(p)).unwrap();
        println!("wrote {}", path.display());
    }
}
