#![allow(dead_code)]

use std::path::PathBuf;

use pedsim::io::parse_scenario;
use pedsim::Scenario;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.toml"))
}

pub fn fixture(name: &str) -> Scenario {
    let path = fixture_path(name);
    let bytes = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_scenario(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub const FIXTURES: [&str; 4] = ["corridor", "column", "bottleneck", "room"];
