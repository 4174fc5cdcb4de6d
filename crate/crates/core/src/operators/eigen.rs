//! Interior eigenpairs of H near a target energy and the Casimir study on them.
//!
//! The solver runs block LOBPCG on the folded operator (H − σ)², whose lowest
//! eigenvalues belong to the eigenvalues of H closest to σ. Choosing σ just
//! below a bound-state cluster picks that cluster out of the discretised
//! continua without any shift-invert solve.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{dot, gaussian_packet, DiracField, GridSpec, PacketSpec};
use crate::model::{energy_closed_form, Branch, CoulombParams};

use super::dirac::{build_hamiltonian, build_l, build_q};
use super::lattice::Lattice;
use super::{DiracOp, OperatorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    pub max_iterations: usize,
    /// Regulariser of the preconditioner denominators.
    pub preconditioner_shift: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            guard: 4,
            max_iterations: 400,
            preconditioner_shift: 0.0,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub energy: f64,
    pub residual: f64,
    pub vector: DiracField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenSummary {
    pub iterations: usize,
    /// Largest folded-operator residual among the wanted vectors, per iteration.
    pub history: Vec<f64>,
    /// Ritz energies of H from the guard vectors of the final block: the next
    /// states after the wanted ones, by distance from the target.
    pub guard_energies: Vec<f64>,
}

/// Lattice points per cache block in the block kernels below.
const CHUNK: usize = 2048;

/// a†b for a Hermitian pairing (b = T a with T Hermitian, or b = a),
/// accumulated block by block so each slice of every field is loaded once per
/// call instead of once per pair. Only the upper triangle is computed.
fn gram_hermitian(a: &[DiracField], b: &[DiracField]) -> DMatrix<C64> {
    let n = a.len();
    let mut g = DMatrix::zeros(n, n);
    if n == 0 {
        return g;
    }
    let len = a[0].spec().len();
    for c in 0..4 {
        for lo in (0..len).step_by(CHUNK) {
            let hi = (lo + CHUNK).min(len);
            for i in 0..n {
                let x = &a[i].component(c)[lo..hi];
                for j in i..n {
                    g[(i, j)] += dot(x, &b[j].component(c)[lo..hi]);
                }
            }
        }
    }
    for i in 0..n {
        g[(i, i)] = C64::new(g[(i, i)].re, 0.0);
        for j in i + 1..n {
            g[(j, i)] = g[(i, j)].conj();
        }
    }
    g
}

/// Columns basis·coeffs, built block by block over the lattice.
fn combine(basis: &[DiracField], coeffs: &DMatrix<C64>) -> Vec<DiracField> {
    let spec = *basis[0].spec();
    let mut out: Vec<DiracField> = (0..coeffs.ncols()).map(|_| DiracField::zeros(spec)).collect();
    let zero = C64::new(0.0, 0.0);
    for c in 0..4 {
        for lo in (0..spec.len()).step_by(CHUNK) {
            let hi = (lo + CHUNK).min(spec.len());
            for (j, o) in out.iter_mut().enumerate() {
                let dst = &mut o.component_mut(c)[lo..hi];
                for (i, b) in basis.iter().enumerate() {
                    let w = coeffs[(i, j)];
                    if w != zero {
                        dst.iter_mut().zip(&b.component(c)[lo..hi]).for_each(|(u, v)| *u += w * v);
                    }
                }
            }
        }
    }
    out
}

/// Eigenvectors sorted by ascending eigenvalue.
fn sorted_eigen(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rayleigh-Ritz of A on span(v) given av = A v: the `keep` lowest Ritz
/// values and the coefficients (over the columns of v) of their orthonormal
/// Ritz vectors. Numerically dependent directions are dropped first; `None`
/// when fewer than `keep` independent directions remain.
fn projected_ritz(v: &[DiracField], av: &[DiracField], keep: usize) -> Option<(Vec<f64>, DMatrix<C64>)> {
    let n = v.len();
    let s = gram_hermitian(v, v);
    let a = gram_hermitian(v, av);
    // Unit-diagonal scaling: near convergence the residual and search
    // directions are tiny and would otherwise fall under the relative cutoff.
    let d: Vec<f64> = (0..n)
        .map(|i| if s[(i, i)].re > 0.0 { 1.0 / s[(i, i)].re.sqrt() } else { 0.0 })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| s[(i, j)] * (d[i] * d[j]));
    let (vals, vecs) = sorted_eigen(scaled);
    let top = vals.iter().copied().fold(0.0, f64::max);
    let cols: Vec<usize> = (0..n).filter(|&i| vals[i] > 1e-13 * top).collect();
    if cols.len() < keep {
        return None;
    }
    let b = DMatrix::from_fn(n, cols.len(), |r, c| vecs[(r, cols[c])] * (d[r] / vals[cols[c]].sqrt()));
    let reduced = b.adjoint() * &a * &b;
    let reduced = (&reduced + reduced.adjoint()) * C64::new(0.5, 0.0);
    let (theta, c) = sorted_eigen(reduced);
    Some((theta[..keep].to_vec(), b * c.columns(0, keep)))
}

/// Momentum-space preconditioner approximating ((H₀ − σ)² + τ)⁻¹ with the free
/// Dirac operator H₀ = α·p + βM: on the positive/negative energy projectors
/// it divides by (±ε_p − σ)² + τ.
pub fn folded_preconditioner(lat: &Arc<Lattice>, mass: f64, sigma: f64, tau: f64) -> DiracOp {
    let l = lat.clone();
    DiracOp::new("T", true, lat.spec(), move |f: &DiracField| {
        l.free_dirac_function(f, mass, |e| {
            let tp = 1.0 / ((e - sigma).powi(2) + tau);
            let tm = 1.0 / ((e + sigma).powi(2) + tau);
            (0.5 * (tp + tm), 0.5 * (tp - tm) / e)
        })
    })
}

/// Smooth seeded start vectors: Gaussian packets near the origin with
/// widths between `width_range.0` and `width_range.1`.
pub fn start_vectors(lat: &Lattice, count: usize, width_range: (f64, f64), seed: u64) -> Result<Vec<DiracField>, OperatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w_lo, w_hi) = width_range;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let width = rng.gen_range(w_lo..=w_hi);
        let center = std::array::from_fn(|_| rng.gen_range(-0.25..=0.25) * width);
        let packet = PacketSpec {
            center,
            width,
            boost: [0.0; 3],
        };
        let pol: [C64; 4] = std::array::from_fn(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        out.push(gaussian_packet(lat.grid(), &packet, pol)?);
    }
    Ok(out)
}

/// The `count` eigenpairs of H closest to `target` from above-and-below,
/// found by LOBPCG on (H − target)². Each returned pair satisfies
/// ‖Hv − Ev‖ ≤ tol with ‖v‖ = 1; vectors are orthonormal. Results are sorted
/// by energy.
pub fn eigensolve_lowest(
    h: &DiracOp,
    count: usize,
    target: f64,
    tol: f64,
    start: Vec<DiracField>,
    preconditioner: Option<&DiracOp>,
    options: &EigenOptions,
) -> Result<(Vec<EigenPair>, EigenSummary), OperatorError> {
    if count == 0 || count > 30 {
        return Err(OperatorError::InvalidArgument(format!("count must be in 1..=30, got {count}")));
    }
    let block = count + options.guard;
    if start.len() < block {
        return Err(OperatorError::InvalidArgument(format!(
            "need {block} start vectors, got {}",
            start.len()
        )));
    }
    let spec = *h.spec();
    if start.iter().any(|v| v.spec() != &spec) {
        return Err(OperatorError::InvalidArgument("start vectors live on another grid".into()));
    }
    let shifted = |v: &DiracField| {
        let mut hv = h.apply(v);
        hv.axpy(C64::new(-target, 0.0), v);
        hv
    };
    let folded = |v: &DiracField| shifted(&shifted(v));

    let x0: Vec<DiracField> = start.into_iter().take(block).collect();
    let ax0: Vec<DiracField> = x0.iter().map(folded).collect();
    let dependent = || OperatorError::InvalidArgument("start vectors are linearly dependent".into());
    let (mut theta, c) = projected_ritz(&x0, &ax0, block).ok_or_else(dependent)?;
    let mut x = combine(&x0, &c);
    let mut ax = combine(&ax0, &c);
    drop((x0, ax0));
    let mut p: Vec<DiracField> = Vec::new();
    let mut ap: Vec<DiracField> = Vec::new();
    let mut history = Vec::new();
    // Near an eigenvalue E of H, ‖(A − θ)x‖ ≈ 2|E − σ|·‖(H − E)x‖ with
    // θ = (E − σ)², so folded residuals are compared against 2√θ·tol.
    let mut factor = 1.0;
    for iteration in 0..options.max_iterations {
        let residuals: Vec<DiracField> = (0..block)
            .map(|i| {
                let mut r = ax[i].clone();
                r.axpy(C64::new(-theta[i], 0.0), &x[i]);
                r
            })
            .collect();
        let norms: Vec<f64> = residuals.iter().map(|r| r.norm()).collect();
        let worst = norms[..count].iter().copied().fold(0.0, f64::max);
        history.push(worst);
        let scaled = (0..count)
            .map(|i| norms[i] / (2.0 * theta[i].max(0.0).sqrt() + tol))
            .fold(0.0, f64::max);
        if scaled <= factor * tol {
            let (pairs, guard_energies) = ritz_on_h(h, &x, count, target);
            let max_res = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
            if max_res <= tol {
                return Ok((
                    pairs,
                    EigenSummary {
                        iterations: iteration + 1,
                        history,
                        guard_energies,
                    },
                ));
            }
            factor *= 0.3;
        }
        let w: Vec<DiracField> = match preconditioner {
            Some(t) => residuals.iter().map(|r| t.apply(r)).collect(),
            None => residuals,
        };
        let aw: Vec<DiracField> = w.iter().map(folded).collect();
        let basis: Vec<DiracField> = x.into_iter().chain(w).chain(p).collect();
        let abasis: Vec<DiracField> = ax.into_iter().chain(aw).chain(ap).collect();
        let Some((t, c)) = projected_ritz(&basis, &abasis, block) else {
            return Err(OperatorError::NotConverged {
                iterations: iteration + 1,
                last: vec![worst],
                history,
            });
        };
        theta = t;
        // Search direction: the update without its component along the old block.
        let mut c_dir = c.clone();
        c_dir.rows_mut(0, block).fill(C64::new(0.0, 0.0));
        // One side at a time to bound the number of live fields.
        x = combine(&basis, &c);
        p = combine(&basis, &c_dir);
        drop(basis);
        ax = combine(&abasis, &c);
        ap = combine(&abasis, &c_dir);
    }
    let last = history.last().copied().into_iter().collect();
    Err(OperatorError::NotConverged {
        iterations: options.max_iterations,
        last,
        history,
    })
}

/// Rayleigh-Ritz of H on span(x): the `count` Ritz pairs closest to `target`
/// sorted by energy, and the remaining Ritz energies.
fn ritz_on_h(h: &DiracOp, x: &[DiracField], count: usize, target: f64) -> (Vec<EigenPair>, Vec<f64>) {
    let hx: Vec<DiracField> = x.iter().map(|v| h.apply(v)).collect();
    let (vals, c) = sorted_eigen(gram_hermitian(x, &hx));
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| (vals[a] - target).abs().total_cmp(&(vals[b] - target).abs()));
    let mut rest: Vec<f64> = idx[count..].iter().map(|&i| vals[i]).collect();
    rest.sort_by(f64::total_cmp);
    idx.truncate(count);
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let chosen = DMatrix::from_fn(c.nrows(), count, |r, j| c[(r, idx[j])]);
    let vecs = combine(x, &chosen);
    let hvecs = combine(&hx, &chosen);
    let pairs = idx
        .iter()
        .zip(vecs.into_iter().zip(hvecs))
        .map(|(&i, (v, hv))| {
            let mut r = hv;
            r.axpy(C64::new(-vals[i], 0.0), &v);
            EigenPair {
                energy: vals[i],
                residual: r.norm() / v.norm(),
                vector: v,
            }
        })
        .collect();
    (pairs, rest)
}

/// Settings for solving one Coulomb cluster on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSettings {
    pub tol: f64,
    /// Target placed this fraction of the gap to the next lower level below
    /// the closed-form energy.
    pub target_offset: f64,
    pub options: EigenOptions,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            target_offset: 0.1,
            options: EigenOptions::default(),
        }
    }
}

/// The 2n² states of the n-th positive-branch level, solved on `lat`.
pub fn coulomb_cluster(
    p: &CoulombParams,
    lat: &Arc<Lattice>,
    h: &DiracOp,
    n: u32,
    settings: &ClusterSettings,
) -> Result<(Vec<EigenPair>, EigenSummary), OperatorError> {
    let e_n = energy_closed_form(p, n, Branch::Plus)?;
    let below = if n > 1 {
        energy_closed_form(p, n - 1, Branch::Plus)?
    } else {
        -p.mass()
    };
    let target = e_n - settings.target_offset * (e_n - below);
    let count = 2 * (n * n) as usize;
    let block = count + settings.options.guard;
    // Start widths bracket the extent of the n-th level, n²·2/((E + M)k).
    let bohr = 2.0 / ((e_n + p.mass()) * p.k());
    // Capped so the widest start packet still meets the boundary tail bound.
    let extent = (bohr * f64::from(n * n)).min(lat.spec().box_length / 16.0);
    let start = start_vectors(lat, block, (0.5 * extent, extent), settings.options.seed)?;
    let t = folded_preconditioner(lat, p.mass(), target, settings.options.preconditioner_shift);
    eigensolve_lowest(h, count, target, settings.tol, start, Some(&t), &settings.options)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirEstimate {
    pub energy: f64,
    pub i_squared: f64,
    pub k_squared: f64,
    /// j from j(j + 1) = ⟨I²⟩.
    pub j: f64,
    /// 2j + 1.
    pub n: f64,
}

/// ⟨I²⟩ and ⟨K²⟩ with I = (L + A)/2, K = (L − A)/2 and
/// A = [(−4/k²)(E² − M²)]^(−1/2) Q, evaluated on each eigenvector with its own
/// Ritz energy.
pub fn casimir_on_eigenvectors(
    p: &CoulombParams,
    l: &[DiracOp; 3],
    q: &[DiracOp; 3],
    pairs: &[EigenPair],
) -> Result<Vec<CasimirEstimate>, OperatorError> {
    let (m, k) = (p.mass(), p.k());
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let e = pair.energy;
        if e.abs() >= m {
            return Err(OperatorError::InvalidArgument(format!(
                "energy {e} outside (−M, M): the normaliser is imaginary"
            )));
        }
        let scale = 1.0 / ((-4.0 / (k * k)) * (e * e - m * m)).sqrt();
        let half = C64::new(0.5, 0.0);
        let v = &pair.vector;
        let (mut i2, mut k2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for a in 0..3 {
            let generator = |sign: f64, f: &DiracField| {
                let mut out = l[a].apply(f);
                out.axpy(C64::new(sign * scale, 0.0), &q[a].apply(f));
                out.scale(half)
            };
            let iv = generator(1.0, v);
            let kv = generator(-1.0, v);
            i2 += v.inner_unchecked(&generator(1.0, &iv));
            k2 += v.inner_unchecked(&generator(-1.0, &kv));
        }
        let norm2 = v.norm_sqr();
        let i_sq = i2.re / norm2;
        let k_sq = k2.re / norm2;
        let root = (1.0 + 4.0 * i_sq.max(0.0)).sqrt();
        out.push(CasimirEstimate {
            energy: e,
            i_squared: i_sq,
            k_squared: k_sq,
            j: 0.5 * (root - 1.0),
            n: root,
        });
    }
    Ok(out)
}

/// Outcome of solving one Coulomb level on a grid and evaluating the
/// Casimirs on its eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n: u32,
    pub grid: GridSpec,
    pub closed_form: f64,
    /// Half the distance to the nearest neighbouring level.
    pub window: f64,
    pub energies: Vec<f64>,
    pub residuals: Vec<f64>,
    pub guard_energies: Vec<f64>,
    /// Converged states within `window` of the closed-form energy.
    pub multiplicity: usize,
    /// Guard states within the window; nonzero means the level was not
    /// fully captured.
    pub guard_in_window: usize,
    pub iterations: usize,
    pub casimir: Vec<CasimirEstimate>,
}

impl ClusterReport {
    /// Largest |⟨I²⟩ − ⟨K²⟩| relative to max(⟨I²⟩, ⟨K²⟩, 3/4). The floor keeps
    /// the ratio meaningful at n = 1, where both vanish.
    pub fn casimir_mismatch(&self) -> f64 {
        self.casimir
            .iter()
            .map(|c| (c.i_squared - c.k_squared).abs() / c.i_squared.max(c.k_squared).max(0.75))
            .fold(0.0, f64::max)
    }

    /// Largest |n_inverted − n|.
    pub fn n_deviation(&self) -> f64 {
        self.casimir
            .iter()
            .map(|c| (c.n - f64::from(self.n)).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves the n-th level on a fresh lattice and evaluates ⟨I²⟩, ⟨K²⟩ and the
/// inverted n on every eigenvector.
pub fn casimir_cluster_study(
    p: &CoulombParams,
    spec: GridSpec,
    n: u32,
    settings: &ClusterSettings,
) -> Result<ClusterReport, OperatorError> {
    let lat = Lattice::new(spec)?;
    let h = build_hamiltonian(p, &lat);
    let (pairs, summary) = coulomb_cluster(p, &lat, &h, n, settings)?;
    let e_n = energy_closed_form(p, n, Branch::Plus)?;
    let above = energy_closed_form(p, n + 1, Branch::Plus)? - e_n;
    let below = if n > 1 {
        e_n - energy_closed_form(p, n - 1, Branch::Plus)?
    } else {
        e_n + p.mass()
    };
    let window = 0.5 * above.min(below);
    let inside = |e: &f64| (e - e_n).abs() <= window;
    let l = build_l(&lat);
    let q = build_q(p, &lat)?;
    let casimir = casimir_on_eigenvectors(p, &l, &q, &pairs)?;
    Ok(ClusterReport {
        n,
        grid: spec,
        closed_form: e_n,
        window,
        energies: pairs.iter().map(|x| x.energy).collect(),
        residuals: pairs.iter().map(|x| x.residual).collect(),
        multiplicity: pairs.iter().map(|x| x.energy).filter(inside).count(),
        guard_in_window: summary.guard_energies.iter().filter(|e| inside(e)).count(),
        guard_energies: summary.guard_energies,
        iterations: summary.iterations,
        casimir,
    })
}

/// Largest relative residual of [I_a, K_b] = 0 over the eigenvectors and all
/// nine component pairs, with A normalised by each vector's own Ritz energy.
/// Normalised by ‖I_a v‖‖K_b v‖/‖v‖, so it is only meaningful where both
/// generators act nontrivially (n ≥ 2).
pub fn cluster_commutator_residual(
    p: &CoulombParams,
    l: &[DiracOp; 3],
    q: &[DiracOp; 3],
    pairs: &[EigenPair],
) -> Result<f64, OperatorError> {
    let (m, k) = (p.mass(), p.k());
    let mut worst = 0.0_f64;
    for pair in pairs {
        let e = pair.energy;
        if e.abs() >= m {
            return Err(OperatorError::InvalidArgument(format!(
                "energy {e} outside (−M, M): the normaliser is imaginary"
            )));
        }
        let scale = 1.0 / ((-4.0 / (k * k)) * (e * e - m * m)).sqrt();
        let generator = |a: usize, sign: f64, f: &DiracField| {
            let mut out = l[a].apply(f);
            out.axpy(C64::new(sign * scale, 0.0), &q[a].apply(f));
            out.scale(C64::new(0.5, 0.0))
        };
        let v = &pair.vector;
        let iv: Vec<DiracField> = (0..3).map(|a| generator(a, 1.0, v)).collect();
        let kv: Vec<DiracField> = (0..3).map(|b| generator(b, -1.0, v)).collect();
        for a in 0..3 {
            for b in 0..3 {
                let mut r = generator(a, 1.0, &kv[b]);
                r.axpy(C64::new(-1.0, 0.0), &generator(b, -1.0, &iv[a]));
                let denom = iv[a].norm() * kv[b].norm() / v.norm() + f64::EPSILON;
                worst = worst.max(r.norm() / denom);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coulomb_degeneracy;
    use crate::operators::CoulombOperators;

    fn params() -> CoulombParams {
        CoulombParams::new(1.0, 0.8).unwrap()
    }

    #[test]
    fn ground_cluster_on_a_small_grid() {
        let p = params();
        let lat = Lattice::new(GridSpec::new(24, 16.0).unwrap()).unwrap();
        let h = build_hamiltonian(&p, &lat);
        let settings = ClusterSettings::default();
        let (pairs, summary) = coulomb_cluster(&p, &lat, &h, 1, &settings).unwrap();
        assert_eq!(pairs.len() as u32, coulomb_degeneracy(1).unwrap());
        let e1 = energy_closed_form(&p, 1, Branch::Plus).unwrap();
        for pair in &pairs {
            assert!(pair.residual <= settings.tol, "{}", pair.residual);
            // grid accuracy at spacing 2/3 around the Coulomb cusp
            assert!((pair.energy - e1).abs() < 0.03, "{} vs {e1}", pair.energy);
        }
        assert!((pairs[0].energy - pairs[1].energy).abs() < 1e-8);
        for (i, a) in pairs.iter().enumerate() {
            for (j, b) in pairs.iter().enumerate() {
                let g = a.vector.inner(&b.vector).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - C64::new(want, 0.0)).norm() < 1e-8);
            }
        }
        // The next states belong to n = 2.
        let e2 = energy_closed_form(&p, 2, Branch::Plus).unwrap();
        assert!(summary.guard_energies.iter().all(|e| (e - e2).abs() < 0.03));

        let l = build_l(&lat);
        let ops = CoulombOperators::new(p, lat.spec()).unwrap();
        let casimir = casimir_on_eigenvectors(&p, &l, &ops.q, &pairs).unwrap();
        for c in &casimir {
            assert!((c.i_squared - c.k_squared).abs() <= 0.01 * 0.75);
            assert!((c.n - 1.0).abs() < 0.1, "{}", c.n);
        }

        // The Q² identity with H → E, in expectation on each Ritz vector.
        let q2 = ops.q_squared();
        let l2 = DiracOp::sum(&[0, 1, 2].map(|a| l[a].compose(&l[a])));
        let (m, k) = (p.mass(), p.k());
        for pair in &pairs {
            let (e, v) = (pair.energy, &pair.vector);
            let lhs = v.inner(&q2.apply(v)).unwrap().re;
            let l2e = v.inner(&l2.apply(v)).unwrap().re;
            let c = 4.0 / (k * k) * (e * e - m * m);
            let rhs = c * (l2e + 1.0) + (e + m).powi(2);
            let scale = c.abs() * (l2e + 1.0) + (e + m).powi(2);
            assert!((lhs - rhs).abs() <= 1e-2 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn solver_arguments_are_validated() {
        let lat = Lattice::new(GridSpec::new(16, 12.0).unwrap()).unwrap();
        let h = build_hamiltonian(&params(), &lat);
        let opts = EigenOptions::default();
        let start = || start_vectors(&lat, 6, (0.6, 0.7), 1).unwrap();
        assert!(eigensolve_lowest(&h, 0, 0.5, 1e-6, start(), None, &opts).is_err());
        assert!(eigensolve_lowest(&h, 31, 0.5, 1e-6, start(), None, &opts).is_err());
        // count + guard exceeds the start block
        assert!(eigensolve_lowest(&h, 3, 0.5, 1e-6, start(), None, &opts).is_err());
        let mut twins = start();
        twins[1] = twins[0].clone();
        assert!(eigensolve_lowest(&h, 2, 0.5, 1e-6, twins, None, &opts).is_err());
        let other = Lattice::new(GridSpec::new(16, 13.0).unwrap()).unwrap();
        let foreign = start_vectors(&other, 6, (0.6, 0.7), 1).unwrap();
        assert!(eigensolve_lowest(&h, 2, 0.5, 1e-6, foreign, None, &opts).is_err());
    }

    #[test]
    fn iteration_cap_reports_history() {
        let lat = Lattice::new(GridSpec::new(16, 12.0).unwrap()).unwrap();
        let h = build_hamiltonian(&params(), &lat);
        let opts = EigenOptions {
            max_iterations: 2,
            ..EigenOptions::default()
        };
        let start = start_vectors(&lat, 6, (0.6, 0.7), 1).unwrap();
        match eigensolve_lowest(&h, 2, 0.55, 1e-12, start, None, &opts) {
            Err(OperatorError::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 2);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn casimir_rejects_energies_outside_the_gap() {
        let p = params();
        let lat = Lattice::new(GridSpec::new(16, 12.0).unwrap()).unwrap();
        let l = build_l(&lat);
        let q = build_q(&p, &lat).unwrap();
        let vector = start_vectors(&lat, 1, (0.6, 0.7), 1).unwrap().pop().unwrap();
        let pair = EigenPair {
            energy: 1.0,
            residual: 0.0,
            vector,
        };
        assert!(casimir_on_eigenvectors(&p, &l, &q, &[pair]).is_err());
    }

    #[test]
    fn block_kernels_agree_with_pairwise_products() {
        let lat = Lattice::new(GridSpec::new(16, 12.0).unwrap()).unwrap();
        let v = start_vectors(&lat, 3, (0.6, 0.7), 4).unwrap();
        let g = gram_hermitian(&v, &v);
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[(i, j)] - v[i].inner(&v[j]).unwrap()).norm() < 1e-13);
            }
        }
        let c = DMatrix::from_fn(3, 2, |i, j| C64::new(i as f64 - j as f64, 0.5 * j as f64));
        let out = combine(&v, &c);
        for j in 0..2 {
            let mut want = DiracField::zeros(lat.spec());
            for i in 0..3 {
                want.axpy(c[(i, j)], &v[i]);
            }
            assert!((&out[j] - &want).norm() < 1e-13);
        }
    }
}
