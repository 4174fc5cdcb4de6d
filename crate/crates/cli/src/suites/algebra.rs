//! Operator algebra on the grid ladder and SO(4) Casimirs on eigenclusters.

use spin_so4::grid::GridSpec;
use spin_so4::model::CoulombParams;
use spin_so4::operators::{algebra_ladder, casimir_cluster_study, ClusterReport, ClusterSettings, RESIDUAL_FLOOR};

use super::flag;
use crate::config::RunConfig;
use crate::report::{Record, Relation};

const SUITE: &str = "algebra";
pub const FINAL_TOL: f64 = 1e-3;
pub const MIN_REDUCTION: f64 = 4.0;
pub const CASIMIR_TOL: f64 = 0.01;
pub const PRINCIPAL_TOL: f64 = 0.05;
const MULTIPLICITY: &str = "2n² states per level";
const CASIMIR: &str = "⟨I²⟩ = ⟨K²⟩ = j(j + 1)";
const PRINCIPAL: &str = "n = 2j + 1";

/// Residual of one check on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub check: String,
    pub points: usize,
    pub box_length: f64,
    pub max_residual: f64,
    pub mean_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderStudy {
    pub records: Vec<Record>,
    pub rows: Vec<LadderRow>,
}

impl LadderStudy {
    /// Plot-ready table: one line per (check, grid).
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "points", "box", "max_residual", "mean_residual"])?;
        for r in &self.rows {
            w.write_record([
                r.check.clone(),
                r.points.to_string(),
                r.box_length.to_string(),
                r.max_residual.to_string(),
                r.mean_residual.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

/// Runs every algebra check on every grid of the ladder. A check passes when
/// its finest-grid residual is below [`FINAL_TOL`] and it either sits at the
/// residual floor on every grid or decreases at every step by at least
/// [`MIN_REDUCTION`] overall.
pub fn algebra_ladder_study(cfg: &RunConfig) -> LadderStudy {
    let ladder = &cfg.grid.points;
    let (first, last) = (ladder[0], ladder[ladder.len() - 1]);
    let outcome = CoulombParams::new(cfg.coulomb.mass, cfg.algebra_k)
        .map_err(|e| e.to_string())
        .and_then(|p| {
            algebra_ladder(&p, ladder, cfg.grid.box_length, &cfg.probes, cfg.stream_seed("algebra")).map_err(|e| e.to_string())
        });
    let (per_grid, verdicts) = match outcome {
        Ok(v) => v,
        Err(e) => {
            return LadderStudy {
                records: vec![Record::failed(SUITE, "operator ladder", "algebra checks", Relation::AtMost, FINAL_TOL, e)],
                rows: Vec::new(),
            }
        }
    };
    let mut rows = Vec::new();
    for (reports, &points) in per_grid.iter().zip(ladder) {
        for r in reports {
            rows.push(LadderRow {
                check: r.check.clone(),
                points,
                box_length: cfg.grid.box_length,
                max_residual: r.max_residual,
                mean_residual: r.mean_residual,
            });
        }
    }
    let mut records = Vec::new();
    for v in &verdicts {
        let series = v.values.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" → ");
        let anchor = v.check.as_str();
        let last_value = *v.values.last().expect("non-empty ladder");
        records.push(
            Record::new(SUITE, format!("{anchor} residual at {last}³"), anchor, last_value, Relation::AtMost, FINAL_TOL)
                .with_note(series.clone()),
        );
        if v.at_floor {
            let max = v.values.iter().copied().fold(0.0, f64::max);
            records.push(Record::new(SUITE, format!("{anchor} at residual floor"), anchor, max, Relation::AtMost, RESIDUAL_FLOOR));
        } else {
            records.push(Record::new(SUITE, format!("{anchor} decreases along ladder"), anchor, flag(v.monotone), Relation::Equal, 1.0));
            let reduction = v.values[0] / last_value.max(RESIDUAL_FLOOR);
            records.push(Record::new(
                SUITE,
                format!("{anchor} reduction {first}³ → {last}³"),
                anchor,
                reduction,
                Relation::AtLeast,
                MIN_REDUCTION,
            ));
        }
    }
    LadderStudy { records, rows }
}

fn cluster_records(n: u32, c: &ClusterReport, tol: f64, out: &mut Vec<Record>) {
    let energies = format!(
        "E = {:.6}..{:.6}, closed form {:.6}, {} iterations",
        c.energies.iter().copied().fold(f64::INFINITY, f64::min),
        c.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        c.closed_form,
        c.iterations
    );
    let expected = f64::from(2 * n * n);
    out.push(Record::new(SUITE, format!("n={n} cluster multiplicity"), MULTIPLICITY, c.multiplicity as f64, Relation::Equal, expected).with_note(energies));
    out.push(Record::new(SUITE, format!("n={n} guard states inside level window"), MULTIPLICITY, c.guard_in_window as f64, Relation::Equal, 0.0));
    let residual = c.residuals.iter().copied().fold(0.0, f64::max);
    out.push(Record::new(SUITE, format!("n={n} eigen residual ‖Hv − Ev‖"), "Hv = Ev", residual, Relation::AtMost, tol));
    let ns = c.casimir.iter().map(|x| format!("{:.4}", x.n)).collect::<Vec<_>>().join(" ");
    out.push(Record::new(SUITE, format!("n={n} ⟨I²⟩ vs ⟨K²⟩ mismatch"), CASIMIR, c.casimir_mismatch(), Relation::AtMost, CASIMIR_TOL));
    out.push(Record::new(SUITE, format!("n={n} inverted principal number"), PRINCIPAL, c.n_deviation(), Relation::AtMost, PRINCIPAL_TOL).with_note(format!("n = {ns}")));
}

/// Solves each configured level on the Casimir grid and checks multiplicity
/// and Casimirs.
pub fn casimir_records(cfg: &RunConfig) -> Vec<Record> {
    let c = &cfg.casimir;
    let mut out = Vec::new();
    let mut settings = ClusterSettings {
        tol: c.tol,
        ..ClusterSettings::default()
    };
    settings.options.seed = cfg.stream_seed("casimir");
    for &n in &c.levels {
        let study = CoulombParams::new(cfg.coulomb.mass, c.k)
            .map_err(|e| e.to_string())
            .and_then(|p| GridSpec::new(c.points, c.box_length).map(|s| (p, s)).map_err(|e| e.to_string()))
            .and_then(|(p, spec)| casimir_cluster_study(&p, spec, n, &settings).map_err(|e| e.to_string()));
        match study {
            Ok(report) => cluster_records(n, &report, c.tol, &mut out),
            Err(e) => out.push(Record::failed(SUITE, format!("n={n} cluster"), MULTIPLICITY, Relation::Equal, f64::from(2 * n * n), e)),
        }
    }
    out
}

pub fn run(cfg: &RunConfig) -> Vec<Record> {
    let mut out = algebra_ladder_study(cfg).records;
    out.extend(casimir_records(cfg));
    out
}
