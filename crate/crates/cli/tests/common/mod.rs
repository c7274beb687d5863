#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

use gridbn_core::{Layer, Metadata, Network, Node};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures")).join(name)
}

pub fn network_path() -> String {
    fixture("network.json").display().to_string()
}

pub fn gridbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridbn"))
        .args(args)
        .env_remove("GRIDBN_PORT")
        .output()
        .expect("run gridbn")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", stderr(out));
    serde_json::from_slice(&out.stdout).expect("json output")
}

/// Root `A` is always `off`, so `A=on` has probability zero.
pub fn degenerate_network() -> Network {
    let a = Node::with_cpt("A", Layer::L1, &["off", "on"], &[], vec![vec![1.0, 0.0]]);
    let b = Node::with_cpt("B", Layer::L2, &["off", "on"], &["A"], vec![vec![0.7, 0.3], vec![0.2, 0.8]]);
    Network::from_nodes(Metadata::named("degenerate"), [a, b]).unwrap()
}

pub const BOTH_HIGH_SCENARIOS: [f64; 4] = [0.532, 0.119, 0.267, 0.082];
