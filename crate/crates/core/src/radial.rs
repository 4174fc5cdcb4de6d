//! Partial-wave oracle for the second-order (upper component) equation
//!
//! ```text
//! [P² + (E + M) V(ρ) − (E² − M²)] φ = 0
//! ```
//!
//! in D = 3 (Coulomb) or D = 4 (oscillator). For a fixed trial energy E the
//! radial operator −Δ_D + λ(λ + D − 2)/ρ² + (E + M)V(ρ) is discretised on an
//! offset uniform grid and its eigenvalues W(E) are bracketed with Sturm
//! sequences. The bound state is the root of W(E) − (E² − M²).
//!
//! The Laplacian is written in flux form on half-points,
//! −[a(ρ+h/2)(u₊ − u) − a(ρ−h/2)(u − u₋)]/(h² ρ^{D−1}) with a = ρ^{D−1},
//! and symmetrised with χ = ρ^{(D−1)/2} u. In the continuum this is the reduced
//! χ equation with the centrifugal term [(λ + (D−2)/2)² − 1/4]/ρ²; on the grid
//! the flux form keeps the error a clean series in h² for every λ, which is
//! what makes two-grid Richardson extrapolation reliable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, CoulombParams, ModelError, OscParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("invalid radial problem: {0}")]
    InvalidProblem(String),
    #[error("radial index {index} outside the {points}-point window")]
    IndexOutOfWindow { index: usize, points: usize },
    #[error("cutoff {cutoff} too small: tail amplitude ratio {tail_ratio:e} exceeds {tolerance:e}")]
    CutoffTooSmall {
        cutoff: f64,
        tail_ratio: f64,
        tolerance: f64,
    },
    #[error("no bound state: W(E) - (E^2 - M^2) does not change sign on [{lo}, {hi}] ({g_lo:e}, {g_hi:e})")]
    NoBoundState { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("self-consistent root search stalled after {iterations} iterations (defect {defect:e})")]
    NotConverged { iterations: usize, defect: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialPotential {
    /// V(ρ) = −k/ρ.
    Coulomb { k: f64 },
    /// V(ρ) = m ω² ρ² / 2, with m the problem's mass parameter.
    Oscillator { omega: f64 },
}

/// Uniform offset grid ρᵢ = (i + ½)h, i = 0..points. The outer Dirichlet wall
/// sits half a cell beyond the last node, at cutoff + h/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub spacing: f64,
    pub cutoff: f64,
}

impl RadialGrid {
    pub fn points(&self) -> usize {
        (self.cutoff / self.spacing).round() as usize
    }

    fn halved(&self) -> Self {
        Self {
            spacing: 0.5 * self.spacing,
            cutoff: self.cutoff,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProblem {
    pub dimension: u32,
    pub lambda: u32,
    pub potential: RadialPotential,
    pub mass: f64,
    pub grid: RadialGrid,
}

impl RadialProblem {
    pub fn validate(&self) -> Result<(), RadialError> {
        if !matches!(self.dimension, 3 | 4) {
            return Err(RadialError::InvalidProblem(format!(
                "dimension must be 3 or 4, got {}",
                self.dimension
            )));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(RadialError::InvalidProblem(format!("mass {} must be positive", self.mass)));
        }
        if !(self.grid.spacing > 0.0 && self.grid.cutoff > 0.0) {
            return Err(RadialError::InvalidProblem("grid spacing and cutoff must be positive".into()));
        }
        if self.grid.points() < 8 {
            return Err(RadialError::InvalidProblem(format!(
                "grid has only {} points",
                self.grid.points()
            )));
        }
        match self.potential {
            RadialPotential::Coulomb { k } if !(k >= 0.0) => {
                Err(RadialError::InvalidProblem(format!("Coulomb strength {k} must be >= 0")))
            }
            RadialPotential::Oscillator { omega } if !(omega > 0.0) => {
                Err(RadialError::InvalidProblem(format!("frequency {omega} must be > 0")))
            }
            _ => Ok(()),
        }
    }

    fn potential_at(&self, rho: f64) -> f64 {
        match self.potential {
            RadialPotential::Coulomb { k } => -k / rho,
            RadialPotential::Oscillator { omega } => 0.5 * self.mass * omega * omega * rho * rho,
        }
    }

    /// Characteristic length of the bound state at trial energy `energy`.
    fn length_scale(&self, energy: f64) -> f64 {
        let coupling = (energy + self.mass).max(1e-12);
        match self.potential {
            RadialPotential::Coulomb { k } => 2.0 / (coupling * k).max(1e-12),
            RadialPotential::Oscillator { omega } => {
                let c = 0.5 * coupling * self.mass * omega * omega;
                c.powf(-0.25)
            }
        }
    }
}

/// Symmetric tridiagonal matrix (diagonal, off-diagonal).
#[derive(Debug, Clone)]
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

fn assemble(prob: &RadialProblem, grid: &RadialGrid, energy: f64) -> Tridiagonal {
    let n = grid.points();
    let h = grid.spacing;
    let d = f64::from(prob.dimension);
    let lam = f64::from(prob.lambda);
    let centrifugal = lam * (lam + d - 2.0);
    let coupling = energy + prob.mass;
    let weight = |rho: f64| rho.powf(d - 1.0);
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        let rho = (i as f64 + 0.5) * h;
        let inner = weight(i as f64 * h);
        let outer = weight((i as f64 + 1.0) * h);
        let w = weight(rho);
        diag.push((inner + outer) / (h * h * w) + centrifugal / (rho * rho) + coupling * prob.potential_at(rho));
        if i + 1 < n {
            let w_next = weight(rho + h);
            off.push(-outer / (h * h * (w * w_next).sqrt()));
        }
    }
    Tridiagonal { diag, off }
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `x` (LDLᵀ pivot signs).
    fn count_below(&self, x: f64) -> usize {
        let guard = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let qs = if q.abs() < guard { guard.copysign(q) } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / qs;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// `index`-th smallest eigenvalue (0-based) by Sturm bisection.
    fn eigenvalue(&self, index: usize) -> f64 {
        let (mut lo, glob_hi) = self.gershgorin();
        // Walk an upper bound up from the bottom of the spectrum instead of
        // bisecting the whole (h⁻²-wide) Gershgorin interval.
        let mut step = 1.0_f64.max(lo.abs() * 1e-3);
        let mut hi = lo + step;
        while self.count_below(hi) <= index && hi < glob_hi {
            lo = hi;
            step *= 2.0;
            hi = (hi + step).min(glob_hi);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an (accurate) eigenvalue by two sweeps of inverse iteration.
    fn eigenvector(&self, eigenvalue: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shift = eigenvalue - 1e-10 * (1.0 + eigenvalue.abs());
        let mut v = vec![1.0; n];
        for _ in 0..3 {
            v = self.solve_shifted(shift, &v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        // Thomas algorithm on (T − shift); the near-singular pivot is clamped.
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let tiny = 1e-300;
        let mut b = self.diag[0] - shift;
        if b.abs() < tiny {
            b = tiny;
        }
        c[0] = if n > 1 { self.off[0] / b } else { 0.0 };
        d[0] = rhs[0] / b;
        for i in 1..n {
            let a = self.off[i - 1];
            let mut denom = self.diag[i] - shift - a * c[i - 1];
            if denom.abs() < tiny {
                denom = tiny;
            }
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            d[i] = (rhs[i] - a * d[i - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }
}

/// Single-grid eigenvalue (no extrapolation).
pub fn grid_radial_eigenvalue(
    prob: &RadialProblem,
    grid: &RadialGrid,
    energy: f64,
    n_r: usize,
) -> Result<f64, RadialError> {
    prob.validate()?;
    let points = grid.points();
    if n_r >= points {
        return Err(RadialError::IndexOutOfWindow { index: n_r, points });
    }
    Ok(assemble(prob, grid, energy).eigenvalue(n_r))
}

fn extrapolated_eigenvalue(prob: &RadialProblem, energy: f64, n_r: usize) -> Result<f64, RadialError> {
    let coarse = grid_radial_eigenvalue(prob, &prob.grid, energy, n_r)?;
    let fine = grid_radial_eigenvalue(prob, &prob.grid.halved(), energy, n_r)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Ratio max|χ| over the outer tenth of the grid to max|χ| overall.
pub fn tail_ratio(prob: &RadialProblem, energy: f64, n_r: usize) -> Result<f64, RadialError> {
    prob.validate()?;
    let t = assemble(prob, &prob.grid, energy);
    let points = t.diag.len();
    if n_r >= points {
        return Err(RadialError::IndexOutOfWindow { index: n_r, points });
    }
    let v = t.eigenvector(t.eigenvalue(n_r));
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let start = points - points / 10;
    let tail = v[start..].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(tail / peak)
}

/// Ratio above which the cutoff is considered too small.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// (n_r + 1)-th lowest eigenvalue W of the fixed-energy radial operator,
/// Richardson-extrapolated from spacings h and h/2. Fails if the eigenfunction
/// has not decayed to [`TAIL_TOLERANCE`] over the last tenth of the grid.
pub fn linear_radial_eigenvalue(prob: &RadialProblem, energy: f64, n_r: usize) -> Result<f64, RadialError> {
    let w = extrapolated_eigenvalue(prob, energy, n_r)?;
    let tail = tail_ratio(prob, energy, n_r)?;
    if tail > TAIL_TOLERANCE {
        return Err(RadialError::CutoffTooSmall {
            cutoff: prob.grid.cutoff,
            tail_ratio: tail,
            tolerance: TAIL_TOLERANCE,
        });
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScfStep {
    pub energy: f64,
    pub eigenvalue: f64,
    pub defect: f64,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScfTrace {
    pub steps: Vec<ScfStep>,
    pub converged: bool,
    pub cutoff: f64,
    pub spacing: f64,
}

/// Grid resolution used by the automatic solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSettings {
    /// Grid points per characteristic length of the state.
    pub points_per_length: f64,
    /// Initial cutoff in characteristic lengths (doubled while the tail is too large).
    pub initial_cutoff_lengths: f64,
    /// Exit tolerance on |W(E) − (E² − M²)|.
    pub defect_tolerance: f64,
}

impl Default for RadialSettings {
    fn default() -> Self {
        Self {
            points_per_length: 100.0,
            initial_cutoff_lengths: 24.0,
            defect_tolerance: 1e-10,
        }
    }
}

fn defect(prob: &RadialProblem, energy: f64, n_r: usize) -> Result<(f64, f64), RadialError> {
    let w = extrapolated_eigenvalue(prob, energy, n_r)?;
    Ok((w, w - (energy * energy - prob.mass * prob.mass)))
}

/// Brent root search of g(E) = W(E) − (E² − M²) on a fixed grid.
fn brent(
    prob: &RadialProblem,
    n_r: usize,
    mut a: f64,
    mut b: f64,
    tol: f64,
    trace: &mut ScfTrace,
) -> Result<f64, RadialError> {
    let (_, mut fa) = defect(prob, a, n_r)?;
    let (_, mut fb) = defect(prob, b, n_r)?;
    if fa.signum() == fb.signum() {
        return Err(RadialError::NoBoundState { lo: a, hi: b, g_lo: fa, g_hi: fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    let max_iter = 200;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 4.0 * f64::EPSILON * b.abs().max(1.0);
        let xm = 0.5 * (c - b);
        if fb.abs() <= tol || xm.abs() <= tol1 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        let (w, g) = defect(prob, b, n_r)?;
        fb = g;
        let bracket = if b < c { (b, c) } else { (c, b) };
        trace.steps.push(ScfStep {
            energy: b,
            eigenvalue: w,
            defect: g,
            bracket,
        });
    }
    Err(RadialError::NotConverged {
        iterations: max_iter,
        defect: fb,
    })
}

/// Bound state energy of `prob` with radial index `n_r`, found self-consistently
/// on the bracket [lo, hi]. The grid stored in `prob` is used as the starting
/// grid; its cutoff is doubled until the converged state's tail is below
/// [`TAIL_TOLERANCE`].
pub fn solve_self_consistent_in(
    prob: &RadialProblem,
    n_r: usize,
    lo: f64,
    hi: f64,
    defect_tolerance: f64,
) -> Result<(f64, ScfTrace), RadialError> {
    prob.validate()?;
    let mut work = *prob;
    let mut trace = ScfTrace {
        steps: Vec::new(),
        converged: false,
        cutoff: work.grid.cutoff,
        spacing: work.grid.spacing,
    };
    for _ in 0..8 {
        let energy = brent(&work, n_r, lo, hi, defect_tolerance, &mut trace)?;
        let tail = tail_ratio(&work, energy, n_r)?;
        if tail <= TAIL_TOLERANCE {
            let (_, g) = defect(&work, energy, n_r)?;
            trace.converged = g.abs() <= defect_tolerance;
            trace.cutoff = work.grid.cutoff;
            trace.spacing = work.grid.spacing;
            if !trace.converged {
                return Err(RadialError::NotConverged {
                    iterations: trace.steps.len(),
                    defect: g,
                });
            }
            return Ok((energy, trace));
        }
        work.grid.cutoff *= 2.0;
    }
    Err(RadialError::CutoffTooSmall {
        cutoff: work.grid.cutoff,
        tail_ratio: tail_ratio(&work, hi, n_r)?,
        tolerance: TAIL_TOLERANCE,
    })
}

/// Bracketing interval for the trial energy.
///
/// Coulomb bound states live in (−M, M); oscillator levels in (m, m + t_max)
/// with t_max the analytic upper bound on ε − m.
pub fn energy_bracket(prob: &RadialProblem, n_r: usize) -> (f64, f64) {
    let m = prob.mass;
    let delta = 1e-9 * m;
    match prob.potential {
        RadialPotential::Coulomb { .. } => (-m + delta, m - delta),
        RadialPotential::Oscillator { omega } => {
            let big_n = 2 * n_r as u32 + prob.lambda;
            let osc = OscParams::new(m, omega).expect("validated");
            let (_, t_max) = model::oscillator_bracket(&osc, big_n);
            (m + delta, m + t_max)
        }
    }
}

/// Builds a problem whose grid is sized for the bracket end with the shortest
/// length scale; the cutoff starts at `initial_cutoff_lengths` of the longest
/// plausible scale and grows as needed.
pub fn auto_problem(
    dimension: u32,
    lambda: u32,
    potential: RadialPotential,
    mass: f64,
    n_r: usize,
    settings: &RadialSettings,
) -> RadialProblem {
    let mut prob = RadialProblem {
        dimension,
        lambda,
        potential,
        mass,
        grid: RadialGrid { spacing: 1.0, cutoff: 1.0 },
    };
    let (lo, hi) = energy_bracket(&prob, n_r);
    let (short, long) = match potential {
        // Shortest scale at the top of the bracket; the long scale is taken at
        // the midpoint, deeper states are picked up by cutoff doubling.
        RadialPotential::Coulomb { .. } => (prob.length_scale(hi), prob.length_scale(0.5 * (lo + hi))),
        RadialPotential::Oscillator { .. } => (prob.length_scale(hi), prob.length_scale(lo)),
    };
    let level = (n_r as f64 + f64::from(lambda) + 1.0).max(1.0);
    let spacing = short / settings.points_per_length;
    let cutoff = match potential {
        RadialPotential::Coulomb { .. } => long * level * settings.initial_cutoff_lengths,
        RadialPotential::Oscillator { .. } => long * (settings.initial_cutoff_lengths + 2.0 * level).sqrt() * 2.0,
    };
    // Whole number of cells so that h and h/2 share the cutoff exactly.
    let cells = (cutoff / spacing).ceil();
    prob.grid = RadialGrid {
        spacing,
        cutoff: cells * spacing,
    };
    prob
}

/// Self-consistent level with automatic grid and bracket.
pub fn solve_self_consistent(
    dimension: u32,
    lambda: u32,
    potential: RadialPotential,
    mass: f64,
    n_r: usize,
    settings: &RadialSettings,
) -> Result<(f64, ScfTrace), RadialError> {
    let prob = auto_problem(dimension, lambda, potential, mass, n_r, settings);
    let (lo, hi) = energy_bracket(&prob, n_r);
    solve_self_consistent_in(&prob, n_r, lo, hi, settings.defect_tolerance)
}

/// Coulomb level (n, l) of the spin-symmetric problem, n = n_r + l + 1.
pub fn coulomb_level(p: &CoulombParams, n: u32, l: u32, settings: &RadialSettings) -> Result<f64, RadialError> {
    if n == 0 || l >= n {
        return Err(RadialError::InvalidProblem(format!("need 0 <= l < n, got n = {n}, l = {l}")));
    }
    if p.k() <= 0.0 {
        return Err(RadialError::InvalidProblem("no bound states at k = 0".into()));
    }
    let n_r = (n - l - 1) as usize;
    solve_self_consistent(3, l, RadialPotential::Coulomb { k: p.k() }, p.mass(), n_r, settings).map(|(e, _)| e)
}

/// 4D oscillator level ε with N = 2 n_r + λ.
pub fn oscillator_level(p: &OscParams, lambda: u32, n_r: usize, settings: &RadialSettings) -> Result<f64, RadialError> {
    solve_self_consistent(4, lambda, RadialPotential::Oscillator { omega: p.omega() }, p.mass(), n_r, settings)
        .map(|(e, _)| e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub n: u32,
    pub l: u32,
    pub n_r: u32,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyScan {
    pub entries: Vec<ScanEntry>,
    /// (n, max_l E − min_l E) for every n.
    pub spreads: Vec<(u32, f64)>,
}

impl DegeneracyScan {
    pub fn max_spread(&self) -> f64 {
        self.spreads.iter().fold(0.0, |m, &(_, s)| m.max(s))
    }

    pub fn level_mean(&self, n: u32) -> Option<f64> {
        let es: Vec<f64> = self.entries.iter().filter(|e| e.n == n).map(|e| e.energy).collect();
        (!es.is_empty()).then(|| es.iter().sum::<f64>() / es.len() as f64)
    }
}

/// Solves every (n, l < n) for n ≤ n_max and records the spread in l.
pub fn degeneracy_scan(p: &CoulombParams, n_max: u32, settings: &RadialSettings) -> Result<DegeneracyScan, RadialError> {
    if n_max == 0 || n_max > 6 {
        return Err(RadialError::InvalidProblem(format!("n_max must be in 1..=6, got {n_max}")));
    }
    let mut entries = Vec::new();
    let mut spreads = Vec::new();
    for n in 1..=n_max {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for l in 0..n {
            let energy = coulomb_level(p, n, l, settings)?;
            lo = lo.min(energy);
            hi = hi.max(energy);
            entries.push(ScanEntry {
                n,
                l,
                n_r: n - l - 1,
                energy,
            });
        }
        spreads.push((n, hi - lo));
    }
    Ok(DegeneracyScan { entries, spreads })
}
