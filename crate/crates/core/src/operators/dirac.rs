//! Pauli building blocks and the Dirac-space operators H, L, S, Q.
//!
//! Dirac fields are (upper, lower) pairs of Pauli fields, with
//! β = diag(1, −1) and α = offdiag(σ, σ) in that split.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::grid::{DiracField, PauliField};
use crate::model::CoulombParams;

use super::lattice::Lattice;
use super::{DiracOp, OperatorError, PauliOp};

const AXES: [&str; 3] = ["x", "y", "z"];

fn spin_independent(
    lat: &Arc<Lattice>,
    label: String,
    hint: bool,
    op: impl Fn(&Lattice, &[C64]) -> Vec<C64> + Send + Sync + 'static,
) -> PauliOp {
    let l = lat.clone();
    PauliOp::new(label, hint, lat.spec(), move |f: &PauliField| {
        let a = op(&l, f.component(0));
        let b = op(&l, f.component(1));
        PauliField::from_components(l.spec(), [a, b]).expect("lattice-sized")
    })
}

/// Multiplication by a real function of position.
pub fn position_multiplier(lat: &Arc<Lattice>, label: impl Into<String>, m: Vec<f64>) -> PauliOp {
    spin_independent(lat, label.into(), true, move |_, s| Lattice::pos_mul(s, &m))
}

/// Coulomb potential V = −k/r.
pub fn coulomb_potential(lat: &Arc<Lattice>, k: f64) -> PauliOp {
    position_multiplier(lat, "V", lat.inv_r.iter().map(|v| -k * v).collect())
}

/// Component of the unit radial vector, r_a/r.
pub fn radial_unit(lat: &Arc<Lattice>, a: usize) -> PauliOp {
    position_multiplier(lat, format!("r̂{}", AXES[a]), lat.rhat[a].clone())
}

/// The off-diagonal block of Q, −r_a/r.
pub fn neg_radial_unit(lat: &Arc<Lattice>, a: usize) -> PauliOp {
    position_multiplier(lat, format!("-r̂{}", AXES[a]), lat.rhat[a].iter().map(|v| -v).collect())
}

pub fn momentum_squared(lat: &Arc<Lattice>) -> PauliOp {
    spin_independent(lat, "p²".into(), true, |l, s| l.mom_mul(s, &l.p2))
}

pub fn inverse_momentum_squared(lat: &Arc<Lattice>) -> PauliOp {
    spin_independent(lat, "1/p²".into(), true, |l, s| l.mom_mul(s, &l.inv_p2))
}

pub fn orbital(lat: &Arc<Lattice>, a: usize) -> PauliOp {
    spin_independent(lat, format!("l{}", AXES[a]), true, move |l, s| l.angular(s, a))
}

/// f_a = (p × l − l × p)_a.
pub fn f_vector(lat: &Arc<Lattice>, a: usize) -> PauliOp {
    spin_independent(lat, format!("f{}", AXES[a]), true, move |l, s| l.f_vector(s, a))
}

/// Spin generator σ_a/2.
pub fn spin(lat: &Arc<Lattice>, a: usize) -> PauliOp {
    let spec = lat.spec();
    PauliOp::new(format!("s{}", AXES[a]), true, spec, move |f: &PauliField| {
        let (u, d) = (f.component(0), f.component(1));
        let half = 0.5;
        let (a0, a1): (Vec<C64>, Vec<C64>) = match a {
            0 => (d.iter().map(|z| z * half).collect(), u.iter().map(|z| z * half).collect()),
            1 => (
                d.iter().map(|z| z * C64::new(0.0, -half)).collect(),
                u.iter().map(|z| z * C64::new(0.0, half)).collect(),
            ),
            _ => (u.iter().map(|z| z * half).collect(), d.iter().map(|z| z * -half).collect()),
        };
        PauliField::from_components(spec, [a0, a1]).expect("lattice-sized")
    })
}

/// σ·p, applied in momentum space.
pub fn sigma_dot_p(lat: &Arc<Lattice>) -> PauliOp {
    let l = lat.clone();
    PauliOp::new("σ·p", true, lat.spec(), move |f| l.mom_spin(f, |i| l.sigma_p(i)))
}

/// Helicity operator U_p = σ·p/|p|; unitary and its own inverse.
pub fn helicity(lat: &Arc<Lattice>) -> PauliOp {
    let l = lat.clone();
    PauliOp::new("U_p", true, lat.spec(), move |f| {
        l.mom_spin(f, |i| {
            let m = l.sigma_p(i);
            let s = l.inv_p[i];
            [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
        })
    })
}

/// Dirac operator assembled from Pauli blocks; `None` is a zero block.
pub fn block_operator(
    label: impl Into<String>,
    hermitian_hint: bool,
    blocks: [[Option<PauliOp>; 2]; 2],
) -> DiracOp {
    let spec = blocks.iter().flatten().flatten().next().expect("at least one block").spec().to_owned();
    let [[ul, ur], [ll, lr]] = blocks;
    DiracOp::new(label, hermitian_hint, spec, move |f: &DiracField| {
        let upper = f.upper();
        let lower = f.lower();
        let row = |a: &Option<PauliOp>, b: &Option<PauliOp>| match (a, b) {
            (Some(a), Some(b)) => &a.apply(&upper) + &b.apply(&lower),
            (Some(a), None) => a.apply(&upper),
            (None, Some(b)) => b.apply(&lower),
            (None, None) => PauliField::zeros(spec),
        };
        let top = row(&ul, &ur);
        let bottom = row(&ll, &lr);
        DiracField::from_halves(top, bottom).expect("same grid")
    })
}

/// H = α·p + βM + (1 + β)V/2 with V = −k/r.
pub fn build_hamiltonian(p: &CoulombParams, lat: &Arc<Lattice>) -> DiracOp {
    let spec = lat.spec();
    let m = p.mass();
    let upper = PauliOp::scalar(spec, m).plus(&coulomb_potential(lat, p.k()));
    let sp = sigma_dot_p(lat);
    block_operator(
        "H",
        true,
        [[Some(upper), Some(sp.clone())], [Some(sp), Some(PauliOp::scalar(spec, -m))]],
    )
}

/// Free Dirac operator α·p + βM, used by the preconditioner and limit studies.
pub fn build_free_hamiltonian(mass: f64, lat: &Arc<Lattice>) -> DiracOp {
    let spec = lat.spec();
    let sp = sigma_dot_p(lat);
    block_operator(
        "H0",
        true,
        [
            [Some(PauliOp::scalar(spec, mass)), Some(sp.clone())],
            [Some(sp), Some(PauliOp::scalar(spec, -mass))],
        ],
    )
}

fn helicity_conjugate(lat: &Arc<Lattice>, op: &PauliOp) -> PauliOp {
    let u = helicity(lat);
    u.compose(op)
        .compose(&u)
        .with_label(format!("U_p {} U_p†", op.label()))
        .with_hint(true)
}

/// Deformed orbital angular momentum, diag(l, U_p l U_p†).
pub fn build_l(lat: &Arc<Lattice>) -> [DiracOp; 3] {
    [0, 1, 2].map(|a| {
        let l = orbital(lat, a);
        block_operator(format!("L{}", AXES[a]), true, [[Some(l.clone()), None], [None, Some(helicity_conjugate(lat, &l))]])
    })
}

/// Deformed spin, diag(s, U_p s U_p†).
pub fn build_s(lat: &Arc<Lattice>) -> [DiracOp; 3] {
    [0, 1, 2].map(|a| {
        let s = spin(lat, a);
        block_operator(format!("S{}", AXES[a]), true, [[Some(s.clone()), None], [None, Some(helicity_conjugate(lat, &s))]])
    })
}

/// Pauli blocks of the conserved vector Q for V = −k/r.
#[derive(Debug, Clone)]
pub struct QBlocks {
    /// 2M R + k r/r² = f/k − 2M r̂ + k r̂/r.
    pub q11: PauliOp,
    /// −r̂ (also Q₂₁).
    pub q12: PauliOp,
    pub q21: PauliOp,
    /// (1/p²) f / k, with 1/p² applied after f.
    pub q22: PauliOp,
}

fn require_coupling(p: &CoulombParams) -> Result<(), OperatorError> {
    if p.k() <= 0.0 {
        return Err(OperatorError::InvalidArgument("Q needs k > 0 (it carries 1/k)".into()));
    }
    Ok(())
}

pub fn q_blocks(p: &CoulombParams, lat: &Arc<Lattice>, a: usize) -> Result<QBlocks, OperatorError> {
    require_coupling(p)?;
    let (m, k) = (p.mass(), p.k());
    let radial: Vec<f64> = (0..lat.r.len())
        .map(|i| lat.rhat[a][i] * (k * lat.inv_r[i] - 2.0 * m))
        .collect();
    let f = f_vector(lat, a);
    let q11 = f
        .scaled(C64::new(1.0 / k, 0.0))
        .plus(&position_multiplier(lat, "(k/r - 2M)r̂", radial))
        .with_label(format!("Q11{}", AXES[a]));
    let q12 = neg_radial_unit(lat, a);
    let q22 = inverse_momentum_squared(lat)
        .compose(&f)
        .scaled(C64::new(1.0 / k, 0.0))
        .with_label(format!("Q22{}", AXES[a]));
    Ok(QBlocks {
        q11,
        q21: q12.clone(),
        q12,
        q22,
    })
}

/// Q₂₂ with the other ordering, f (1/p²) / k; equal to Q₂₂ in the continuum.
pub fn q22_commuted(p: &CoulombParams, lat: &Arc<Lattice>, a: usize) -> Result<PauliOp, OperatorError> {
    require_coupling(p)?;
    Ok(f_vector(lat, a)
        .compose(&inverse_momentum_squared(lat))
        .scaled(C64::new(1.0 / p.k(), 0.0))
        .with_label(format!("Q22'{}", AXES[a])))
}

fn assemble_q(lat: &Arc<Lattice>, blocks: QBlocks, label: String) -> DiracOp {
    let sp = sigma_dot_p(lat);
    let QBlocks { q11, q12, q21, q22 } = blocks;
    // Q₂₂ is symmetric only up to [f, p²], which vanishes in the continuum
    // but not on the lattice; hermiticity is measured, not assumed.
    block_operator(
        label,
        false,
        [
            [Some(q11), Some(q12.compose(&sp))],
            [Some(sp.compose(&q21)), Some(sp.compose(&q22).compose(&sp))],
        ],
    )
}

/// The conserved vector Q of the spin-symmetric Coulomb problem.
pub fn build_q(p: &CoulombParams, lat: &Arc<Lattice>) -> Result<[DiracOp; 3], OperatorError> {
    let blocks = [q_blocks(p, lat, 0)?, q_blocks(p, lat, 1)?, q_blocks(p, lat, 2)?];
    let [b0, b1, b2] = blocks;
    Ok([
        assemble_q(lat, b0, "Qx".into()),
        assemble_q(lat, b1, "Qy".into()),
        assemble_q(lat, b2, "Qz".into()),
    ])
}

/// Runge-Lenz vector R = f/(2Mk) − r̂ on Pauli fields.
pub fn runge_lenz(p: &CoulombParams, lat: &Arc<Lattice>, a: usize) -> Result<PauliOp, OperatorError> {
    require_coupling(p)?;
    Ok(f_vector(lat, a)
        .scaled(C64::new(1.0 / (2.0 * p.mass() * p.k()), 0.0))
        .plus(&neg_radial_unit(lat, a))
        .with_label(format!("R{}", AXES[a])))
}

/// Projector (1 + β)/2 onto the upper components.
pub fn upper_projector(lat: &Arc<Lattice>) -> DiracOp {
    block_operator("(1+β)/2", true, [[Some(PauliOp::identity(lat.spec())), None], [None, None]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gaussian_packet, GridSpec, PacketSpec};
    use crate::operators::residual::*;

    fn small_policy(points: usize) -> ProbePolicy {
        ProbePolicy {
            count: 3,
            design_points: points,
            origin_margin: 2.5,
            momentum_origin_margin: 2.5,
            band_margin: 2.5,
        }
    }

    fn setup(points: usize, box_length: f64) -> (Arc<Lattice>, ProbeSet<2>, ProbeSet<4>) {
        let lat = Lattice::new(GridSpec::new(points, box_length).unwrap()).unwrap();
        let policy = small_policy(points);
        let pauli = policy.probes::<2>(lat.grid(), 3).unwrap();
        let dirac = policy.probes::<4>(lat.grid(), 3).unwrap();
        (lat, pauli, dirac)
    }

    fn params() -> CoulombParams {
        CoulombParams::new(1.0, 0.8).unwrap()
    }

    #[test]
    fn helicity_squares_to_identity() {
        let (lat, pauli, _) = setup(32, 20.0);
        let u = helicity(&lat);
        let r = equality_residual("U²=1", &u.compose(&u), &PauliOp::identity(lat.spec()), &pauli).unwrap();
        assert!(r.max_residual <= 1e-12, "{}", r.max_residual);
    }

    #[test]
    fn hinted_operators_are_hermitian_and_all_are_linear() {
        let (lat, _, dirac) = setup(24, 16.0);
        let p = params();
        let mut hinted = vec![build_hamiltonian(&p, &lat), build_free_hamiltonian(1.0, &lat)];
        hinted.extend(build_l(&lat));
        hinted.extend(build_s(&lat));
        for op in &hinted {
            assert!(op.hermitian_hint(), "{}", op.label());
            let h = hermiticity_residual(op, &dirac).unwrap().max_residual;
            assert!(h <= 1e-10, "{}: {h}", op.label());
        }
        let q = build_q(&p, &lat).unwrap();
        for op in hinted.iter().chain(q.iter()) {
            let l = linearity_residual(op, &dirac).unwrap().max_residual;
            assert!(l <= 1e-12, "{}: {l}", op.label());
        }
    }

    #[test]
    fn q_hermiticity_is_measured_and_refines() {
        // 1/p² after f is not the adjoint ordering, so Q is Hermitian only as
        // far as f and p² commute on the grid.
        let p = params();
        let mut last = f64::INFINITY;
        for points in [24, 48] {
            let (lat, _, dirac) = setup(points, 16.0);
            let q = build_q(&p, &lat).unwrap();
            assert!(!q[0].hermitian_hint());
            let h = hermiticity_residual(&q[0], &dirac).unwrap().max_residual;
            assert!(h < last / 4.0, "{points}: {h} after {last}");
            last = h;
        }
    }

    #[test]
    fn radial_unit_commutes_with_potential_exactly() {
        let (lat, pauli, _) = setup(24, 16.0);
        let v = coulomb_potential(&lat, 0.8);
        for a in 0..3 {
            let r = commutator_residual(&neg_radial_unit(&lat, a), &v, None, &pauli).unwrap();
            assert!(r.max_residual <= 1e-14, "{}", r.max_residual);
        }
    }

    #[test]
    fn upper_projector_expectation_is_a_fraction_of_the_norm() {
        let (lat, _, dirac) = setup(24, 16.0);
        let proj = upper_projector(&lat);
        for f in &dirac.fields {
            let e = f.inner(&proj.apply(f)).unwrap();
            let n2 = f.norm_sqr();
            assert!(e.im.abs() <= 1e-14 * n2);
            assert!(e.re >= 0.0 && e.re <= n2 * (1.0 + 1e-14));
        }
    }

    #[test]
    fn free_dirac_operator_squares_to_the_dispersion() {
        let lat = Lattice::new(GridSpec::new(32, 40.0).unwrap()).unwrap();
        let h0 = build_free_hamiltonian(1.0, &lat);
        let p2 = momentum_squared(&lat);
        let boost = [0.5, -0.3, 0.4];
        let p0_sq: f64 = boost.iter().map(|b| b * b).sum();
        let mut last = f64::INFINITY;
        for width in [1.0, 1.5, 2.0, 2.5] {
            let packet = PacketSpec {
                center: [0.0; 3],
                width,
                boost,
            };
            let one = C64::new(1.0, 0.0);
            let zero = C64::new(0.0, 0.0);
            let f: DiracField = gaussian_packet(lat.grid(), &packet, [one, zero, zero, zero]).unwrap();
            // H₀² = p² + M² holds pointwise in momentum space.
            let mut exact = DiracField::from_halves(p2.apply(&f.upper()), p2.apply(&f.lower())).unwrap();
            exact.axpy(one, &f);
            let hh = h0.apply(&h0.apply(&f));
            assert!((&hh - &exact).norm() <= 1e-12 * exact.norm());
            // Against the packet's mean momentum the residual is the momentum
            // spread, which shrinks as the packet widens.
            let mut r = hh;
            r.axpy(C64::new(-(p0_sq + 1.0), 0.0), &f);
            let rel = r.norm() / f.norm();
            assert!(rel < last, "width {width}: {rel} after {last}");
            last = rel;
        }
    }

    #[test]
    fn helicity_conjugation_preserves_total_angular_momentum() {
        let policy = ProbePolicy {
            count: 2,
            ..ProbePolicy::default()
        };
        let mut values = Vec::new();
        for points in [48, 64] {
            let lat = Lattice::new(GridSpec::new(points, 20.0).unwrap()).unwrap();
            let probes = policy.probes::<2>(lat.grid(), 5).unwrap();
            let u = helicity(&lat);
            let (l, s) = (orbital(&lat, 2), spin(&lat, 2));
            let lhs = u.compose(&l).compose(&u).plus(&u.compose(&s).compose(&u));
            values.push(equality_residual("UlU+UsU=l+s", &lhs, &l.plus(&s), &probes).unwrap().max_residual);
        }
        assert!(values[1] < values[0] / 4.0, "{values:?}");
        assert!(values[1] < 1e-5, "{values:?}");
    }

    #[test]
    fn q_needs_positive_coupling() {
        let lat = Lattice::new(GridSpec::new(16, 10.0).unwrap()).unwrap();
        let free = CoulombParams::new(1.0, 0.0).unwrap();
        assert!(build_q(&free, &lat).is_err());
        assert!(q_blocks(&free, &lat, 0).is_err());
        assert!(runge_lenz(&free, &lat, 0).is_err());
    }

    #[test]
    fn off_diagonal_blocks_coincide() {
        let (lat, pauli, _) = setup(24, 16.0);
        for a in 0..3 {
            let b = q_blocks(&params(), &lat, a).unwrap();
            let r = equality_residual("Q12=Q21", &b.q12, &b.q21, &pauli).unwrap();
            assert_eq!(r.max_residual, 0.0);
        }
    }
}
