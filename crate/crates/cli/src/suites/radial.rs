//! The 4D radial oscillator against the quartic root.

use spin_so4::model::{oscillator_energy, OscParams};
use spin_so4::radial::oscillator_level;

use crate::config::RunConfig;
use crate::report::{Record, Relation};

const SUITE: &str = "radial";
const QUARTIC: &str = "(ε + m)(ε − m)² = 2mω²(N + 2)²";
pub const LEVEL_TOL: f64 = 1e-6;
pub const EXACT_TOL: f64 = 1e-10;

fn omega_records(cfg: &RunConfig, omega: f64, out: &mut Vec<Record>) {
    let p = match OscParams::new(cfg.oscillator.mass, omega) {
        Ok(p) => p,
        Err(e) => {
            out.push(Record::failed(SUITE, format!("ω={omega}"), QUARTIC, Relation::AtMost, LEVEL_TOL, e));
            return;
        }
    };
    for big_n in (0..=cfg.oscillator.n_max).step_by(2) {
        let reference = match oscillator_energy(&p, big_n) {
            Ok(e) => e,
            Err(e) => {
                out.push(Record::failed(SUITE, format!("ω={omega} N={big_n} quartic"), QUARTIC, Relation::AtMost, LEVEL_TOL, e));
                continue;
            }
        };
        for n_r in 0..=big_n / 2 {
            let lambda = big_n - 2 * n_r;
            let check = format!("ω={omega} N={big_n} λ={lambda} radial vs quartic");
            out.push(match oscillator_level(&p, lambda, n_r as usize, &cfg.radial) {
                Ok(eps) => Record::new(SUITE, check, QUARTIC, (eps - reference).abs() / reference, Relation::AtMost, LEVEL_TOL)
                    .with_note(format!("radial {eps:.12} quartic {reference:.12}")),
                Err(e) => Record::failed(SUITE, check, QUARTIC, Relation::AtMost, LEVEL_TOL, e),
            });
        }
    }
}

pub fn run(cfg: &RunConfig) -> Vec<Record> {
    let mut out = Vec::new();
    for &omega in &cfg.oscillator.omegas {
        omega_records(cfg, omega, &mut out);
    }
    // The one instance with a closed-form root: m = 1, ω = √2, N = 0 gives ε = 3.
    let check = "m=1 ω=√2 N=0 root is 3";
    let anchor = "(ε + 1)(ε − 1)² = 16 ⇒ ε = 3";
    out.push(
        match OscParams::new(1.0, 2f64.sqrt()).map_err(|e| e.to_string()).and_then(|p| oscillator_energy(&p, 0).map_err(|e| e.to_string())) {
            Ok(eps) => Record::new(SUITE, check, anchor, (eps - 3.0).abs() / 3.0, Relation::AtMost, EXACT_TOL),
            Err(e) => Record::failed(SUITE, check, anchor, Relation::AtMost, EXACT_TOL, e),
        },
    );
    out
}
