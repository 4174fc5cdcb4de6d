//! Non-relativistic limit: block residuals along a mass ladder and the k⁴
//! scaling of the relativistic level correction.

use spin_so4::grid::GridSpec;
use spin_so4::model::{energy_closed_form, nonrel_limit_energy, Branch, CoulombParams};
use spin_so4::operators::nonrel_limit_study;

use super::flag;
use crate::config::RunConfig;
use crate::report::{Record, Relation};

const SUITE: &str = "limits";
const H_LIMIT: &str = "H − M → diag(p²/2M − k/r, p²/2M)";
const Q_LIMIT: &str = "Q/2M → diag(R, f/(2Mk))";
const SCALING: &str = "|E₊ − (M − k²M/2n²)|/M ∝ k⁴";
pub const RATIO_RANGE: (f64, f64) = (12.0, 20.0);

fn correction(mass: f64, k: f64, n: u32) -> Result<f64, String> {
    let p = CoulombParams::new(mass, k).map_err(|e| e.to_string())?;
    let e = energy_closed_form(&p, n, Branch::Plus).map_err(|e| e.to_string())?;
    let nr = nonrel_limit_energy(&p, n).map_err(|e| e.to_string())?;
    Ok((e - nr).abs() / mass)
}

fn block_records(cfg: &RunConfig, out: &mut Vec<Record>) {
    let l = &cfg.limits;
    let masses = l.masses.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", ");
    let study = GridSpec::new(l.points, l.box_length)
        .map_err(|e| e.to_string())
        .and_then(|spec| nonrel_limit_study(l.k, &l.masses, spec, &l.policy, cfg.stream_seed("limits")).map_err(|e| e.to_string()));
    let study = match study {
        Ok(s) => s,
        Err(e) => {
            out.push(Record::failed(SUITE, format!("block residuals over M ∈ {{{masses}}}"), H_LIMIT, Relation::Equal, 1.0, e));
            return;
        }
    };
    let column = |f: &dyn Fn(&spin_so4::operators::LimitRow) -> f64| {
        study.rows.iter().map(|r| format!("{:.3e}", f(r))).collect::<Vec<_>>().join(" → ")
    };
    let decreasing = |f: &dyn Fn(&spin_so4::operators::LimitRow) -> f64| study.rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let h = |r: &spin_so4::operators::LimitRow| r.hamiltonian_residual;
    let q = |r: &spin_so4::operators::LimitRow| r.q_residual;
    out.push(
        Record::new(SUITE, format!("H − M residual decreases over M ∈ {{{masses}}}"), H_LIMIT, flag(decreasing(&h)), Relation::Equal, 1.0)
            .with_note(format!("{}; decay exponent {:.2}", column(&h), study.hamiltonian_exponent)),
    );
    out.push(
        Record::new(SUITE, format!("Q/2M residual decreases over M ∈ {{{masses}}}"), Q_LIMIT, flag(decreasing(&q)), Relation::Equal, 1.0)
            .with_note(format!("{}; decay exponent {:.2}", column(&q), study.q_exponent)),
    );
}

fn scaling_records(cfg: &RunConfig, out: &mut Vec<Record>) {
    let (k, mass) = (cfg.limits.k, cfg.coulomb.mass);
    for n in 1..=cfg.limits.halving_n_max {
        let ratio = correction(mass, k, n).and_then(|a| correction(mass, 0.5 * k, n).map(|b| a / b));
        let (lo, hi) = RATIO_RANGE;
        let lower = format!("n={n} k={k}→{} correction ratio ≥ {lo}", 0.5 * k);
        let upper = format!("n={n} k={k}→{} correction ratio ≤ {hi}", 0.5 * k);
        match ratio {
            Ok(r) => {
                out.push(Record::new(SUITE, lower, SCALING, r, Relation::AtLeast, lo));
                out.push(Record::new(SUITE, upper, SCALING, r, Relation::AtMost, hi));
            }
            Err(e) => {
                out.push(Record::failed(SUITE, lower, SCALING, Relation::AtLeast, lo, &e));
                out.push(Record::failed(SUITE, upper, SCALING, Relation::AtMost, hi, e));
            }
        }
    }
}

pub fn run(cfg: &RunConfig) -> Vec<Record> {
    let mut out = Vec::new();
    block_records(cfg, &mut out);
    scaling_records(cfg, &mut out);
    out
}
