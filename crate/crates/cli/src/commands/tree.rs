use majority::tree::{tree_rows, TreeRow, GAMMA_LOWER, GAMMA_UPPER};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliResult;
use crate::output::{finish, Sink};

#[derive(Serialize)]
struct CsvRow {
    p: f64,
    depth: u32,
    r_n: f64,
    #[serde(rename = "r_n^{1/n}")]
    rate: f64,
    #[serde(rename = "R1")]
    brownian: f64,
    bound_ok: bool,
}

impl From<&TreeRow> for CsvRow {
    fn from(r: &TreeRow) -> Self {
        Self {
            p: r.p,
            depth: r.depth,
            r_n: r.r_n,
            rate: r.rate,
            brownian: r.brownian,
            bound_ok: r.bound_ok,
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    /// Published bracket for the growth rate of the optimal cost.
    bracket: [f64; 2],
    rows: &'a [CsvRow],
}

pub fn run(cfg: &ExperimentConfig, sink: &mut Sink) -> CliResult<()> {
    let mut rows = Vec::new();
    for p in cfg.tree.values() {
        rows.extend(tree_rows(p)?.iter().map(CsvRow::from));
    }
    match sink.format {
        Format::Json => sink.json(
            "tree",
            &Report {
                bracket: [GAMMA_LOWER, GAMMA_UPPER],
                rows: &rows,
            },
        ),
        Format::Csv => {
            let note = ("gamma_bracket", format!("[{GAMMA_LOWER}, {GAMMA_UPPER}]"));
            let mut w = sink.csv("tree", &[note])?;
            for row in &rows {
                w.serialize(row)?;
            }
            finish(w)
        }
    }
}
