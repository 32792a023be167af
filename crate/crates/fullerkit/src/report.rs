//! The RunReport envelope and the CSV views derived from it.

use std::path::Path;

use serde::Serialize;

use fullerkit_core::continuation::OrbitBranch;
use fullerkit_core::orbits::OrbitSet;
use fullerkit_core::Config;

#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub total_ms: f64,
    pub stages: Vec<Stage>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub version: String,
    pub unix_time: u64,
    pub threads: usize,
}

/// Everything a run produced. `timings` and `meta` vary between runs and are
/// dropped under `--no-meta`.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub scenario: Option<String>,
    pub config: Config,
    pub results: serde_json::Value,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialise");
        s.push('\n');
        s
    }
}

/// A numeric table written as `<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", self.name)))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()
    }
}

fn coord_names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// One row per orbit: id, period, least period, multiplicity, residual, base.
pub fn orbit_table(set: &OrbitSet) -> CsvTable {
    let n = set.orbits.first().map_or(0, |o| o.base.len());
    let mut header: Vec<String> =
        ["id", "period", "least_period", "multiplicity", "residual"].iter().map(|s| s.to_string()).collect();
    header.extend(coord_names("x", n));
    let rows = set
        .orbits
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let mut r = vec![i as f64, o.period, o.least_period, o.multiplicity as f64, o.residual];
            r.extend(&o.base);
            r
        })
        .collect();
    CsvTable { name: "orbits".into(), header, rows }
}

/// Branch dump: node_index, t, p, x...
pub fn branch_table(name: &str, b: &OrbitBranch) -> CsvTable {
    let n = b.nodes.first().map_or(0, |nd| nd.x.len());
    let mut header: Vec<String> = ["node_index", "t", "p"].iter().map(|s| s.to_string()).collect();
    header.extend(coord_names("x", n));
    let rows = b
        .nodes
        .iter()
        .enumerate()
        .map(|(i, nd)| {
            let mut r = vec![i as f64, nd.t, nd.period];
            r.extend(&nd.x);
            r
        })
        .collect();
    CsvTable { name: name.into(), header, rows }
}

/// Dense trajectory dump: s, x...
pub fn trajectory_table(name: &str, samples: &[(f64, Vec<f64>)]) -> CsvTable {
    let n = samples.first().map_or(0, |s| s.1.len());
    let mut header = vec!["s".to_string()];
    header.extend(coord_names("x", n));
    let rows = samples
        .iter()
        .map(|(s, x)| {
            let mut r = vec![*s];
            r.extend(x);
            r
        })
        .collect();
    CsvTable { name: name.into(), header, rows }
}
