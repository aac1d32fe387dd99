//! Subcommand implementations. Each returns its table and, when a check fails,
//! the tolerance failure to report after the table is written.

use num_complex::Complex64;
use rayon::prelude::*;
use sppsband::floquet::{quasimomentum_from_discriminant, DEFAULT_IM_TOL, MIN_DARBOUX_ENERGY};
use sppsband::hyp::{normalized_f_oracle, normalized_g_oracle, quasimomentum};
use sppsband::{
    bloch_extend, darboux_partner, darboux_partner_cell, find_band_edges, hill_series, in_spectrum, monodromy_f,
    monodromy_g, self_matching, EdgeSearch, HillSeries, ModelParams, SppsBasis,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::table::{Cell, Table};

/// Energies used by the cross-validation checks.
pub const VALIDATION_ENERGIES: [f64; 3] = [0.25, 2.25, 6.25];
/// Points per cell compared against the exact solutions.
pub const VALIDATION_POINTS: usize = 50;
/// Fraction of a period around each pole left out of the g comparison.
pub const POLE_MARGIN: f64 = 0.01;

pub struct Outcome {
    pub table: Table,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Self { table, failure: None }
    }
}

struct Engine {
    params: ModelParams,
    basis: SppsBasis,
    hill: HillSeries,
}

impl Engine {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let params = ModelParams::new(cfg.k0, cfg.s)?;
        let basis = SppsBasis::build(&params, cfg.grid_n, cfg.spps_terms)?;
        let hill = hill_series(&basis);
        Ok(Self { params, basis, hill })
    }
}

fn uniform(min: f64, max: f64, n: usize) -> Vec<f64> {
    let step = (max - min) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { max } else { min + step * i as f64 })
        .collect()
}

fn push_complex(row: &mut Vec<Cell>, z: Complex64) {
    row.push(Cell::finite(z.re));
    row.push(Cell::finite(z.im));
}

pub fn scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let e = Engine::new(cfg)?;
    let period = e.params.period();
    let rows: Vec<Vec<Cell>> = uniform(cfg.k2_min, cfg.k2_max, cfg.samples)
        .into_par_iter()
        .map(|k2| -> Result<Vec<Cell>, CliError> {
            let d = e.hill.eval_checked(k2)?;
            let p = quasimomentum_from_discriminant(d, period);
            let mut row = vec![Cell::Num(k2)];
            push_complex(&mut row, d);
            row.push(Cell::Int(i64::from(in_spectrum(d, DEFAULT_IM_TOL))));
            push_complex(&mut row, p);
            Ok(row)
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(&["K2", "D_re", "D_im", "in_band", "P_re", "P_im"]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(Outcome::ok(table))
}

fn edge_errors(e: &Engine, cfg: &RunConfig) -> Result<(Table, f64), CliError> {
    let bs = find_band_edges(&e.hill, cfg.k2_min, cfg.k2_max, &EdgeSearch::default())?;
    for a in &bs.anomalies {
        eprintln!(
            "warning: extremum of D at K² = {} has D = {} away from ±2",
            a.k2, a.discriminant
        );
    }
    let mut table = Table::new(&["n", "parity", "K2_numeric", "K2_analytic", "abs_err"]);
    let mut worst = 0.0f64;
    for edge in &bs.edges {
        let analytic = e.params.analytic_band_edge(edge.n, edge.parity);
        let err = (edge.k2 - analytic).abs();
        worst = worst.max(err);
        table.push(vec![
            Cell::Int(i64::from(edge.n)),
            Cell::Text(edge.parity.as_str().to_owned()),
            Cell::Num(edge.k2),
            Cell::Num(analytic),
            Cell::Num(err),
        ]);
    }
    Ok((table, worst))
}

pub fn edges(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let e = Engine::new(cfg)?;
    let (table, worst) = edge_errors(&e, cfg)?;
    let failure = (worst > cfg.tol).then(|| {
        CliError::Tolerance(format!(
            "largest band-edge error {worst:e} exceeds the tolerance {:e}",
            cfg.tol
        ))
    });
    Ok(Outcome { table, failure })
}

pub struct BlochRequest {
    pub k2: Vec<f64>,
    pub cells: usize,
    pub allow_gap: bool,
}

pub const MAX_BLOCH_CELLS: usize = 64;

pub fn bloch(cfg: &RunConfig, req: &BlochRequest) -> Result<Outcome, CliError> {
    if req.k2.is_empty() {
        return Err(CliError::Usage("bloch needs at least one --k2 value".into()));
    }
    if req.cells == 0 || req.cells > MAX_BLOCH_CELLS {
        return Err(CliError::Usage(format!(
            "cells must lie in 1..={MAX_BLOCH_CELLS}, got {}",
            req.cells
        )));
    }
    if let Some(k2) = req.k2.iter().find(|k| !k.is_finite()) {
        return Err(CliError::Usage(format!("invalid K² value {k2}")));
    }
    let e = Engine::new(cfg)?;
    let n = cfg.grid_n;
    let period = e.params.period();
    let mut table = Table::new(&[
        "K2", "x", "f+_re", "f+_im", "f-_re", "f-_im", "g+_re", "g+_im", "g-_re", "g-_im",
    ]);
    for &k2 in &req.k2 {
        let d = e.hill.eval_checked(k2)?;
        if !in_spectrum(d, DEFAULT_IM_TOL) && !req.allow_gap {
            return Err(CliError::Usage(format!(
                "K² = {k2} lies outside the allowed bands (D = {d}); pass --allow-gap to tabulate growing solutions"
            )));
        }
        let sm_f = self_matching(&monodromy_f(&e.basis, k2)?)?;
        let f = e.basis.eval_cell_solutions(k2)?;
        let g = if k2.abs() >= MIN_DARBOUX_ENERGY {
            let sm_g = self_matching(&monodromy_g(&e.basis, k2)?)?;
            Some((sm_g, darboux_partner_cell(&e.basis, k2)?))
        } else {
            eprintln!("warning: K² = {k2} has no Darboux partner pair; g columns are empty");
            None
        };
        for i in 0..=req.cells * n {
            let cell = (i / n).min(req.cells - 1);
            let j = i - cell * n;
            let x = i as f64 * period / n as f64;
            let (fp, fm) = bloch_extend(&sm_f, f.f1[j], f.f2[j], cell as i64)?;
            let mut row = vec![Cell::Num(k2), Cell::Num(x)];
            push_complex(&mut row, fp);
            push_complex(&mut row, fm);
            match &g {
                Some((sm_g, gc)) if gc.f1[j].re.is_finite() => {
                    let (gp, gm) = bloch_extend(sm_g, gc.f1[j], gc.f2[j], cell as i64)?;
                    push_complex(&mut row, gp);
                    push_complex(&mut row, gm);
                }
                _ => row.extend(std::iter::repeat(Cell::Null).take(4)),
            }
            table.push(row);
        }
    }
    Ok(Outcome::ok(table))
}

fn oracle_error(x: f64, k2: f64) -> impl Fn(sppsband::HypError) -> CliError {
    move |source| CliError::Oracle { x, k2, source }
}

pub fn validate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let e = Engine::new(cfg)?;
    let p = &e.params;
    let period = p.period();
    let xs: Vec<f64> = (0..VALIDATION_POINTS)
        .map(|j| j as f64 * period / VALIDATION_POINTS as f64)
        .collect();

    let mut f_err = 0.0f64;
    let mut g_err = 0.0f64;
    for k2 in VALIDATION_ENERGIES {
        for &x in &xs {
            let (f1, f2) = e.basis.eval_values_at(k2, x)?;
            let (o1, o2) = normalized_f_oracle(x, k2, p).map_err(oracle_error(x, k2))?;
            f_err = f_err.max((f1 - o1).norm()).max((f2 - o2).norm());
            if p.singular_set().distance_to_pole(x) < POLE_MARGIN * period {
                continue;
            }
            let g = darboux_partner(&e.basis, k2, x)?;
            let (o1, o2) = normalized_g_oracle(x, k2, p).map_err(oracle_error(x, k2))?;
            g_err = g_err.max((g.f1 - o1).norm()).max((g.f2 - o2).norm());
        }
    }

    let mut d_err = 0.0f64;
    for k2 in uniform(p.seed_energy(), p.seed_energy() + 20.0, 200) {
        let exact = (period * quasimomentum(k2, p)).cos() * 2.0;
        d_err = d_err.max((e.hill.eval_checked(k2)? - exact).norm());
    }

    let (_, edge_err) = edge_errors(&e, cfg)?;

    let checks = [
        ("f_vs_exact", f_err),
        ("g_vs_exact", g_err),
        ("discriminant_vs_closed_form", d_err),
        ("band_edges_vs_analytic", edge_err),
    ];
    let mut table = Table::new(&["check", "max_error", "tol", "pass"]);
    let mut failed = Vec::new();
    for (name, err) in checks {
        let pass = err <= cfg.tol;
        if !pass {
            failed.push(name);
        }
        table.push(vec![
            Cell::Text(name.to_owned()),
            Cell::Num(err),
            Cell::Num(cfg.tol),
            Cell::Int(i64::from(pass)),
        ]);
    }
    let failure = (!failed.is_empty()).then(|| {
        CliError::Tolerance(format!(
            "checks above the tolerance {:e}: {}",
            cfg.tol,
            failed.join(", ")
        ))
    });
    Ok(Outcome { table, failure })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig {
            grid_n: 2000,
            ..RunConfig::default()
        }
    }

    #[test]
    fn uniform_grid_hits_both_ends() {
        let g = uniform(-2.0, 10.0, 500);
        assert_eq!(g.len(), 500);
        assert_eq!(g[0], -2.0);
        assert_eq!(g[499], 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn scan_rows_are_ordered_and_consistent() {
        let out = scan(&RunConfig { samples: 50, ..cfg() }).unwrap();
        assert_eq!(out.table.rows.len(), 50);
        for row in &out.table.rows {
            if let (Cell::Num(d), Cell::Int(1)) = (&row[1], &row[3]) {
                assert!(d.abs() <= 2.0);
            }
        }
    }

    #[test]
    fn edges_report_the_analytic_positions() {
        let out = edges(&cfg()).unwrap();
        assert!(out.failure.is_none());
        let analytic: Vec<f64> = out
            .table
            .rows
            .iter()
            .map(|r| match r[3] {
                Cell::Num(v) => v,
                _ => panic!("analytic column"),
            })
            .collect();
        for want in [-1.21, -0.21, 2.79, 7.79] {
            assert!(analytic.iter().any(|a| (a - want).abs() < 1e-12), "{want}");
        }
    }

    #[test]
    fn bloch_rejects_gap_energies_without_the_flag() {
        let req = BlochRequest {
            k2: vec![-1.5],
            cells: 1,
            allow_gap: false,
        };
        assert_eq!(bloch(&cfg(), &req).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn bloch_marks_poles_as_null() {
        let req = BlochRequest {
            k2: vec![0.25],
            cells: 2,
            allow_gap: false,
        };
        let out = bloch(&cfg(), &req).unwrap();
        assert_eq!(out.table.rows.len(), 4001);
        for i in [1000, 3000] {
            assert_eq!(out.table.rows[i][6], Cell::Null);
        }
        assert!(matches!(out.table.rows[999][6], Cell::Num(_)));
    }
}
