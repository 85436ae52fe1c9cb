use majority::analytic::ValueContext;
use majority::{Error, TripleState};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliResult;
use crate::output::{finish, Sink};

#[derive(Debug, Clone, Serialize)]
struct Row {
    x1: f64,
    x2: f64,
    x3: f64,
    r: f64,
    in_decision_set: bool,
    vhat: Option<f64>,
    fhat1: Option<f64>,
    fhat2: Option<f64>,
    fhat3: Option<f64>,
    residual1: Option<f64>,
    residual2: Option<f64>,
    residual3: Option<f64>,
    /// Filled only on switching-plane points (exactly two equal coordinates).
    pasting_gap: Option<f64>,
    /// Failures at this point, `;`-separated; empty when all quantities succeeded.
    error: String,
}

#[derive(Serialize)]
struct Surface<'a> {
    spec: &'a str,
    rates: &'a [f64],
    points: usize,
    rows: Vec<Row>,
}

pub fn run(cfg: &ExperimentConfig, sink: &mut Sink) -> CliResult<()> {
    let v = &cfg.value;
    let grid = v.grid();
    let mut rows = Vec::with_capacity(grid.len() * v.r.len());
    for &r in &v.r {
        let ctx = ValueContext::new(&cfg.spec, r);
        for &x in &grid {
            rows.push(match &ctx {
                Ok(ctx) => evaluate(ctx, x, v.delta, v.pasting_delta),
                Err(e) => failed_row(x, r, e),
            });
        }
    }
    match sink.format {
        Format::Json => sink.json(
            "value",
            &Surface {
                spec: &cfg.spec.label,
                rates: &v.r,
                points: grid.len(),
                rows,
            },
        ),
        Format::Csv => {
            let mut w = sink.csv("value", &[])?;
            for row in rows {
                w.serialize(row)?;
            }
            finish(w)
        }
    }
}

fn blank(x: [f64; 3], r: f64) -> Row {
    Row {
        x1: x[0],
        x2: x[1],
        x3: x[2],
        r,
        in_decision_set: TripleState::from(x).in_decision_set(),
        vhat: None,
        fhat1: None,
        fhat2: None,
        fhat3: None,
        residual1: None,
        residual2: None,
        residual3: None,
        pasting_gap: None,
        error: String::new(),
    }
}

fn failed_row(x: [f64; 3], r: f64, e: &Error) -> Row {
    Row {
        error: e.to_string(),
        ..blank(x, r)
    }
}

fn evaluate(ctx: &ValueContext, x: [f64; 3], delta: f64, pasting_delta: f64) -> Row {
    let mut row = blank(x, ctx.r());
    let state = TripleState::from(x);
    let mut errors: Vec<String> = Vec::new();
    // a stencil that does not fit is "not applicable", not a failure
    let mut keep = |what: &str, res: Result<f64, Error>| match res {
        Ok(v) => Some(v),
        Err(Error::StencilPlacement { .. }) => None,
        Err(e) => {
            errors.push(format!("{what}: {e}"));
            None
        }
    };
    row.vhat = keep("vhat", ctx.vhat(&state));
    row.fhat1 = keep("fhat1", ctx.fhat(0, &state));
    row.fhat2 = keep("fhat2", ctx.fhat(1, &state));
    row.fhat3 = keep("fhat3", ctx.fhat(2, &state));
    if !row.in_decision_set {
        row.residual1 = keep("residual1", ctx.pde_residual(&state, 0, delta));
        row.residual2 = keep("residual2", ctx.pde_residual(&state, 1, delta));
        row.residual3 = keep("residual3", ctx.pde_residual(&state, 2, delta));
        if let Some((i, j)) = tied_pair(x) {
            row.pasting_gap = keep("pasting_gap", ctx.smooth_pasting_gap(&state, i, j, pasting_delta));
        }
    }
    row.error = errors.join("; ");
    row
}

/// The indices of the only pair of equal coordinates, if exactly one pair is equal.
fn tied_pair(x: [f64; 3]) -> Option<(usize, usize)> {
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut tied = pairs.iter().filter(|(i, j)| x[*i] == x[*j]);
    match (tied.next(), tied.next()) {
        (Some(&p), None) => Some(p),
        _ => None,
    }
}
