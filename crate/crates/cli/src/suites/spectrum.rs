//! Closed-form Coulomb levels against the radial solver, and their
//! independence of l.

use spin_so4::model::{energy_closed_form, Branch, CoulombParams};
use spin_so4::radial::{degeneracy_scan, DegeneracyScan};

use crate::config::RunConfig;
use crate::report::{Record, Relation};

const SUITE: &str = "spectrum";
const LEVEL: &str = "E₊ = M(4n² − k²)/(4n² + k²)";
const SPREAD: &str = "E(n, l) independent of l";
pub const LEVEL_TOL: f64 = 1e-5;
pub const SPREAD_TOL: f64 = 1e-6;

fn scan(cfg: &RunConfig, k: f64) -> Result<(CoulombParams, DegeneracyScan), String> {
    let p = CoulombParams::new(cfg.coulomb.mass, k).map_err(|e| e.to_string())?;
    let s = degeneracy_scan(&p, cfg.coulomb.n_max, &cfg.radial).map_err(|e| e.to_string())?;
    Ok((p, s))
}

fn level_records(k: f64, p: &CoulombParams, s: &DegeneracyScan, out: &mut Vec<Record>) {
    for e in &s.entries {
        let check = format!("k={k} n={} l={} radial vs closed form", e.n, e.l);
        match energy_closed_form(p, e.n, Branch::Plus) {
            Ok(exact) => out.push(
                Record::new(SUITE, check, LEVEL, (e.energy - exact).abs() / p.mass(), Relation::AtMost, LEVEL_TOL)
                    .with_note(format!("radial {:.12} closed {:.12}", e.energy, exact)),
            ),
            Err(err) => out.push(Record::failed(SUITE, check, LEVEL, Relation::AtMost, LEVEL_TOL, err)),
        }
    }
}

pub fn run(cfg: &RunConfig) -> Vec<Record> {
    let mut out = Vec::new();
    let mut degeneracy_scan_result = None;
    for &k in &cfg.coulomb.couplings {
        match scan(cfg, k) {
            Ok((p, s)) => {
                level_records(k, &p, &s, &mut out);
                if k == cfg.coulomb.degeneracy_k {
                    degeneracy_scan_result = Some((p, s));
                }
            }
            Err(err) => out.push(Record::failed(
                SUITE,
                format!("k={k} radial scan"),
                LEVEL,
                Relation::AtMost,
                LEVEL_TOL,
                err,
            )),
        }
    }
    let k = cfg.coulomb.degeneracy_k;
    let scanned = match degeneracy_scan_result {
        Some(found) => Ok(found),
        None => scan(cfg, k),
    };
    match scanned {
        Ok((p, s)) => {
            for &(n, spread) in &s.spreads {
                out.push(Record::new(
                    SUITE,
                    format!("k={k} n={n} spread over l"),
                    SPREAD,
                    spread / p.mass(),
                    Relation::AtMost,
                    SPREAD_TOL,
                ));
            }
        }
        Err(err) => out.push(Record::failed(SUITE, format!("k={k} spread over l"), SPREAD, Relation::AtMost, SPREAD_TOL, err)),
    }
    out
}
