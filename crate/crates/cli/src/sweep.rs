//! Grid sweeps for every mode.
//!
//! Grid points are evaluated on a rayon pool and collected in grid order, so
//! the output does not depend on the number of threads.

use photoswitch_core::asymptotics::greedy_asymptotic_yield;
use photoswitch_core::closedform::{gamma_td, relative_advantage};
use photoswitch_core::coherence::max_yield_coherent;
use photoswitch_core::curves::{max_uncorrelated_yield, single_molecule_yield, DEFAULT_YIELD_TOL};
use photoswitch_core::gibbslp::max_correlated_yield;
use photoswitch_core::multilevel::{five_level_yield, FiveLevelParams};
use photoswitch_core::state::{mutual_information_two_mol, ModelParams};
use rayon::prelude::*;

use crate::config::{Mode, SweepConfig};
use crate::error::{CliError, CliResult};
use crate::table::{Cell, Table};

fn headers(cfg: &SweepConfig) -> Vec<String> {
    let fixed: &[&str] = match cfg.mode {
        Mode::Uncorrelated => &["delta", "q", "w", "n", "gamma"],
        Mode::Correlated => &["delta", "q", "w", "n", "gamma"],
        Mode::Td => &["delta", "q", "w", "gamma"],
        Mode::Asymptotic => &["delta", "q", "w", "n", "gamma", "gamma_td"],
        Mode::Coherence => &[
            "delta",
            "q",
            "w",
            "alpha",
            "gamma_u",
            "gamma_c",
            "gamma_u_incoherent",
            "gamma_c_incoherent",
        ],
        Mode::Fivelevel => &[
            "delta",
            "q",
            "w",
            "n",
            "omega0",
            "omega_delta",
            "beta0",
            "gamma",
            "gamma_three_level",
        ],
        Mode::Single => &["delta", "q", "w", "gamma"],
        Mode::Mutualinfo => &["delta", "gamma", "p0", "p1", "p2", "mutual_information"],
        Mode::Advantage => &["n", "delta", "q", "w", "gamma_u", "gamma_c", "delta_n"],
    };
    let mut h: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    if cfg.mode == Mode::Correlated {
        let n_max = *cfg.n_values.last().expect("nonempty");
        h.extend((1..=n_max).map(|i| format!("p_{i}")));
    }
    h
}

/// Grid points in output order: `(delta, n)`, N-major for the advantage mode
/// and delta-major otherwise.
pub fn grid_points(cfg: &SweepConfig) -> Vec<(f64, u32)> {
    let deltas = cfg.delta_grid();
    let mut pts = Vec::with_capacity(deltas.len() * cfg.n_values.len());
    if cfg.mode == Mode::Advantage {
        for &n in &cfg.n_values {
            pts.extend(deltas.iter().map(|&d| (d, n)));
        }
    } else {
        for &d in &deltas {
            pts.extend(cfg.n_values.iter().map(|&n| (d, n)));
        }
    }
    pts
}

fn row(cfg: &SweepConfig, delta: f64, n: u32) -> photoswitch_core::Result<Vec<Cell>> {
    use Cell::{Float as F, Int as I};
    let params = ModelParams::new(delta, cfg.w, cfg.q, n)?;
    let (q, w) = (cfg.q, cfg.w);
    Ok(match cfg.mode {
        Mode::Uncorrelated => {
            let g = max_uncorrelated_yield(&params, DEFAULT_YIELD_TOL)?.gamma;
            vec![F(delta), F(q), F(w), I(n as u64), F(g)]
        }
        Mode::Correlated => {
            let (g, p) = max_correlated_yield(&params)?;
            let n_max = *cfg.n_values.last().expect("nonempty") as usize;
            let mut r = vec![F(delta), F(q), F(w), I(n as u64), F(g)];
            r.extend((0..n_max).map(|i| p.get(i).map_or(Cell::Empty, |&v| F(v))));
            r
        }
        Mode::Td => vec![F(delta), F(q), F(w), F(gamma_td(&params)?)],
        Mode::Asymptotic => {
            let g = greedy_asymptotic_yield(&params)?;
            vec![F(delta), F(q), F(w), I(n as u64), F(g), F(gamma_td(&params)?)]
        }
        Mode::Coherence => {
            let a = cfg.alpha;
            vec![
                F(delta),
                F(q),
                F(w),
                F(a),
                F(max_yield_coherent(&params, a, false)?),
                F(max_yield_coherent(&params, a, true)?),
                F(max_yield_coherent(&params, 0.0, false)?),
                F(max_yield_coherent(&params, 0.0, true)?),
            ]
        }
        Mode::Fivelevel => {
            let five = FiveLevelParams {
                delta,
                w,
                omega0: cfg.omega0,
                omega_delta: cfg.omega_delta,
                beta0: cfg.beta0,
                q,
            };
            let g = five_level_yield(&five, n)?;
            let three = if n == 1 {
                single_molecule_yield(&params)?
            } else {
                max_correlated_yield(&params)?.0
            };
            vec![
                F(delta),
                F(q),
                F(w),
                I(n as u64),
                F(cfg.omega0),
                F(cfg.omega_delta),
                F(cfg.beta0),
                F(g),
                F(three),
            ]
        }
        Mode::Single => vec![F(delta), F(q), F(w), F(single_molecule_yield(&params)?)],
        Mode::Mutualinfo => {
            let (g, p) = max_correlated_yield(&params)?;
            let p0 = (1.0 - 2.0 * p[0] - p[1]).max(0.0);
            let mi = mutual_information_two_mol(p0, p[0], p[1])?;
            vec![F(delta), F(g), F(p0), F(p[0]), F(p[1]), F(mi)]
        }
        Mode::Advantage => {
            let gu = max_uncorrelated_yield(&params, DEFAULT_YIELD_TOL)?.gamma;
            let gc = max_correlated_yield(&params)?.0;
            let adv = relative_advantage(gc, gu)?;
            vec![I(n as u64), F(delta), F(q), F(w), F(gu), F(gc), F(adv)]
        }
    })
}

/// Evaluates the whole grid. The first failing point, in grid order, aborts
/// the sweep.
pub fn run_sweep(cfg: &SweepConfig) -> CliResult<Table> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", cfg.threads)))?;
    let points = grid_points(cfg);
    let results: Vec<_> = pool.install(|| points.par_iter().map(|&(d, n)| row(cfg, d, n)).collect());
    let mut table = Table::new(headers(cfg));
    for (res, (d, n)) in results.into_iter().zip(&points) {
        match res {
            Ok(r) => table.rows.push(r),
            Err(source) => {
                return Err(CliError::NumericalAt {
                    delta: *d,
                    n: *n,
                    source,
                })
            }
        }
    }
    Ok(table)
}
