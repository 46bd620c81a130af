//! Thermomajorization curve dumps.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use photoswitch_core::curves::build_curve;
use photoswitch_core::state::{
    correlated_target_state, tensor_power_grouped, uncorrelated_target_state, DiagonalState, ModelParams,
};

use crate::config::Format;
use crate::error::{config_err, CliResult};
use crate::table::{Cell, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CurveState {
    /// The excited product state
    Initial,
    /// A target state, from --gamma (product) or --p (per-level populations)
    Final,
    /// The thermal state of the same level structure
    Gibbs,
}

#[derive(Args, Clone, Debug)]
pub struct CurveArgs {
    #[arg(long, value_enum)]
    pub state: CurveState,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub q: f64,
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    pub w: f64,
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    /// Per-molecule switched population of a product target
    #[arg(long, allow_negative_numbers = true, conflicts_with = "p")]
    pub gamma: Option<f64>,
    /// Comma-separated populations p_1..p_N of each i-times-switched level
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// The state selected by `args`.
pub fn curve_state(args: &CurveArgs) -> CliResult<DiagonalState> {
    let params = ModelParams::new(args.delta, args.w, args.q, args.n).map_err(|e| config_err(e.to_string()))?;
    let state = match args.state {
        CurveState::Initial | CurveState::Gibbs => {
            if args.gamma.is_some() || args.p.is_some() {
                return Err(config_err("--gamma and --p apply to the final state only"));
            }
            let initial = tensor_power_grouped(&params)?;
            if args.state == CurveState::Gibbs {
                initial.gibbs()
            } else {
                initial
            }
        }
        CurveState::Final => match (&args.gamma, &args.p) {
            (Some(g), None) => uncorrelated_target_state(&params, *g).map_err(|e| config_err(e.to_string()))?,
            (None, Some(p)) => correlated_target_state(&params, p).map_err(|e| config_err(e.to_string()))?,
            _ => return Err(config_err("the final state needs exactly one of --gamma or --p")),
        },
    };
    Ok(state)
}

/// Elbows of the curve as columns `x, y, ln_x`.
pub fn dump_curve(args: &CurveArgs) -> CliResult<Table> {
    let curve = build_curve(&curve_state(args)?);
    let mut table = Table::new(vec!["x".into(), "y".into(), "ln_x".into()]);
    for e in curve.elbows() {
        table.rows.push(vec![Cell::Float(e.x()), Cell::Float(e.y), Cell::Float(e.ln_x)]);
    }
    Ok(table)
}
