//! Kustaanheimo-Stiefel bridge between the 4D equal scalar/vector oscillator
//! and the 3D spin-symmetric Coulomb problem.
//!
//! The point map, the bilinear constraint and the 2x2 matrices Γ(u), B(P) are
//! checked at the level of classical commuting variables. The momentum lift is
//! read off from σ·p = Γ† B / (2u²), which is real-vector valued exactly on the
//! constraint surface.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, ModelError, OscParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KsError {
    #[error("constraint violated: u4 P1 - u1 P4 + u2 P3 - u3 P2 = {value:e} (allowed {allowed:e})")]
    ConstraintViolated { value: f64, allowed: f64 },
    #[error("4D coordinate vanishes; the lift is undefined at u = 0")]
    ZeroCoordinate,
    #[error("oscillator quantum number N = {0} is odd; only even N survive the constraint")]
    OddQuantumNumber(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Vec3 = [f64; 3];
pub type Vec4 = [f64; 4];

/// Point (u, P) of the 4D phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint4 {
    pub u: Vec4,
    pub p: Vec4,
}

/// Point (x, p) of the 3D phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint3 {
    pub x: Vec3,
    pub p: Vec3,
}

fn dot4(a: &Vec4, b: &Vec4) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm3(a: &Vec3) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// x = (2(u₁u₃ − u₂u₄), 2(u₁u₄ + u₂u₃), u₁² + u₂² − u₃² − u₄²); |x| = u·u.
pub fn ks_point(u: &Vec4) -> Vec3 {
    let [u1, u2, u3, u4] = *u;
    [
        2.0 * (u1 * u3 - u2 * u4),
        2.0 * (u1 * u4 + u2 * u3),
        u1 * u1 + u2 * u2 - u3 * u3 - u4 * u4,
    ]
}

/// Half Jacobian (∂x/∂u)/2 of [`ks_point`]; rows are orthogonal with norm² u·u.
pub fn point_jacobian(u: &Vec4) -> [Vec4; 3] {
    let [u1, u2, u3, u4] = *u;
    [[u3, -u4, u1, -u2], [u4, u3, u2, u1], [u1, u2, -u3, -u4]]
}

/// u₄P₁ − u₁P₄ + u₂P₃ − u₃P₂.
pub fn constraint_value(pt: &PhasePoint4) -> f64 {
    let [u1, u2, u3, u4] = pt.u;
    let [p1, p2, p3, p4] = pt.p;
    u4 * p1 - u1 * p4 + u2 * p3 - u3 * p2
}

/// Gradient of the constraint with respect to P.
pub fn constraint_direction(u: &Vec4) -> Vec4 {
    let [u1, u2, u3, u4] = *u;
    [u4, -u3, u2, -u1]
}

/// Lift matrix Λ(u) with σ·p = Γ†B/(2u²) ⇔ p = Λ(u)·P/(2u²) on the constraint
/// surface. Rows are orthogonal with norm² u·u and the constraint direction
/// spans its kernel.
pub fn lift_matrix(u: &Vec4) -> [Vec4; 3] {
    let [u1, u2, u3, u4] = *u;
    [[u1, -u2, -u3, u4], [u2, u1, -u4, -u3], [u3, u4, u1, u2]]
}

/// Generator flow of the constraint: (du/dt, dP/dt) = (∂c/∂P, −∂c/∂u).
pub fn constraint_flow(pt: &PhasePoint4) -> PhasePoint4 {
    let [p1, p2, p3, p4] = pt.p;
    PhasePoint4 {
        u: constraint_direction(&pt.u),
        p: [p4, -p3, p2, -p1],
    }
}

/// Removes the component of `p` along the constraint direction so that the
/// result lies exactly on the constraint surface.
pub fn project_onto_constraint(u: &Vec4, p: &Vec4) -> Vec4 {
    let d = constraint_direction(u);
    let dd = dot4(&d, &d);
    if dd == 0.0 {
        return *p;
    }
    let c = dot4(&d, p) / dd;
    [p[0] - c * d[0], p[1] - c * d[1], p[2] - c * d[2], p[3] - c * d[3]]
}

/// Lifts a constrained 4D phase point to (x, p) with x = [`ks_point`] and
/// p = Λ(u)·P/(2u²). On success P·P = 4|x| p·p.
pub fn ks_lift(pt: &PhasePoint4) -> Result<PhasePoint3, KsError> {
    let u2 = dot4(&pt.u, &pt.u);
    if u2 == 0.0 {
        return Err(KsError::ZeroCoordinate);
    }
    let value = constraint_value(pt);
    let allowed = 1e-10 * u2.sqrt() * dot4(&pt.p, &pt.p).sqrt();
    if value.abs() > allowed {
        return Err(KsError::ConstraintViolated { value, allowed });
    }
    Ok(PhasePoint3 {
        x: ks_point(&pt.u),
        p: lift_momentum(pt),
    })
}

fn lift_momentum(pt: &PhasePoint4) -> Vec3 {
    let u2 = dot4(&pt.u, &pt.u);
    let rows = lift_matrix(&pt.u);
    [
        dot4(&rows[0], &pt.p) / (2.0 * u2),
        dot4(&rows[1], &pt.p) / (2.0 * u2),
        dot4(&rows[2], &pt.p) / (2.0 * u2),
    ]
}

/// Relative defect |P² − 4|x|p²| / P² of a lifted point.
pub fn kinetic_identity_residual(pt: &PhasePoint4, lifted: &PhasePoint3) -> f64 {
    let big = dot4(&pt.p, &pt.p);
    if big == 0.0 {
        return norm3(&lifted.p);
    }
    let r = norm3(&lifted.x);
    let small: f64 = lifted.p.iter().map(|v| v * v).sum();
    (big - 4.0 * r * small).abs() / big
}

/// Complex 2x2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoByTwoC(pub [[Complex64; 2]; 2]);

impl TwoByTwoC {
    pub fn identity() -> Self {
        Self::scalar(Complex64::new(1.0, 0.0))
    }

    pub fn scalar(z: Complex64) -> Self {
        let o = Complex64::new(0.0, 0.0);
        Self([[z, o], [o, z]])
    }

    pub fn pauli(axis: usize) -> Self {
        let o = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match axis {
            0 => Self([[o, one], [one, o]]),
            1 => Self([[o, -i], [i, o]]),
            2 => Self([[one, o], [o, -one]]),
            _ => panic!("Pauli axis {axis} out of range"),
        }
    }

    /// σ·v for a real 3-vector.
    pub fn sigma_dot(v: &Vec3) -> Self {
        (0..3).fold(Self::scalar(Complex64::new(0.0, 0.0)), |acc, a| {
            acc + Self::pauli(a) * Complex64::new(v[a], 0.0)
        })
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Add for TwoByTwoC {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (row, rrow) in out.iter_mut().zip(rhs.0) {
            for (a, b) in row.iter_mut().zip(rrow) {
                *a += b;
            }
        }
        Self(out)
    }
}

impl Sub for TwoByTwoC {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + rhs * Complex64::new(-1.0, 0.0)
    }
}

impl Mul for TwoByTwoC {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self(out)
    }
}

impl Mul<Complex64> for TwoByTwoC {
    type Output = Self;
    fn mul(self, z: Complex64) -> Self {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|c| *c *= z);
        Self(out)
    }
}

/// Γ = u₁ + i u₂ σ₃ − i u₃ σ₂ + i u₄ σ₁.
pub fn gamma_of(u: &Vec4) -> TwoByTwoC {
    let i = Complex64::new(0.0, 1.0);
    TwoByTwoC::scalar(Complex64::new(u[0], 0.0))
        + TwoByTwoC::pauli(2) * (i * u[1])
        + TwoByTwoC::pauli(1) * (-i * u[2])
        + TwoByTwoC::pauli(0) * (i * u[3])
}

/// B = σ^μ P_μ with σ⁴ = i, i.e. σ·(P₁, P₂, P₃) + i P₄.
pub fn b_of(p: &Vec4) -> TwoByTwoC {
    TwoByTwoC::sigma_dot(&[p[0], p[1], p[2]]) + TwoByTwoC::scalar(Complex64::new(0.0, p[3]))
}

/// ‖ΓΓ† − (u·u) I‖_F / (u·u).
pub fn gamma_unitarity_residual(u: &Vec4) -> f64 {
    let g = gamma_of(u);
    let u2 = dot4(u, u);
    let defect = g * g.adjoint() - TwoByTwoC::scalar(Complex64::new(u2, 0.0));
    if u2 == 0.0 {
        defect.frobenius()
    } else {
        defect.frobenius() / u2
    }
}

/// ‖B − 2Γ σ·p‖_F / ‖B‖_F with p from the lift. Points off the constraint
/// surface are lifted without the constraint check so the defect can be
/// measured there as well.
pub fn b_identity_residual(pt: &PhasePoint4) -> Result<f64, KsError> {
    if dot4(&pt.u, &pt.u) == 0.0 {
        return Err(KsError::ZeroCoordinate);
    }
    let p = lift_momentum(pt);
    let b = b_of(&pt.p);
    let rhs = gamma_of(&pt.u) * TwoByTwoC::sigma_dot(&p) * Complex64::new(2.0, 0.0);
    let scale = b.frobenius();
    let defect = (b - rhs).frobenius();
    Ok(if scale == 0.0 { defect } else { defect / scale })
}

/// Oscillator level mapped onto Coulomb parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappedParams {
    pub mass: f64,
    pub energy: f64,
    pub k: f64,
    pub osc_mass: f64,
    pub omega: f64,
    pub epsilon: f64,
    pub big_n: u32,
    pub n: u32,
}

/// M + E = m + ε, M − E = mω²/8, k = (ε − m)/4, n = (N + 2)/2, with ε the
/// physical oscillator root for even N.
pub fn map_oscillator_to_hydrogen(p: &OscParams, big_n: u32) -> Result<MappedParams, KsError> {
    if big_n % 2 == 1 {
        return Err(KsError::OddQuantumNumber(big_n));
    }
    let epsilon = model::oscillator_energy(p, big_n)?;
    Ok(map_with_epsilon(p, big_n, epsilon))
}

/// Same map with a caller-supplied ε (used for sensitivity controls).
pub fn map_with_epsilon(p: &OscParams, big_n: u32, epsilon: f64) -> MappedParams {
    let m = p.mass();
    let w2 = p.omega() * p.omega();
    let sum = m + epsilon;
    let diff = m * w2 / 8.0;
    MappedParams {
        mass: 0.5 * (sum + diff),
        energy: 0.5 * (sum - diff),
        k: 0.25 * (epsilon - m),
        osc_mass: m,
        omega: p.omega(),
        epsilon,
        big_n,
        n: big_n / 2 + 1,
    }
}

/// |4n²(M − E) − k²(M + E)| / (4n²(M − E) + k²(M + E)); zero exactly when E is
/// the positive Coulomb level of principal number n.
pub fn spectrum_identity_residual(mp: &MappedParams) -> f64 {
    let n = f64::from(mp.n);
    let a = 4.0 * n * n * (mp.mass - mp.energy);
    let b = mp.k * mp.k * (mp.mass + mp.energy);
    (a - b).abs() / (a + b)
}

/// Random constrained phase point: Gaussian u, P with P projected exactly onto
/// the constraint surface.
pub fn random_constrained_point<R: Rng>(rng: &mut R) -> PhasePoint4 {
    let pt = random_point(rng);
    PhasePoint4 {
        u: pt.u,
        p: project_onto_constraint(&pt.u, &pt.p),
    }
}

/// Random unconstrained phase point with standard normal coordinates.
pub fn random_point<R: Rng>(rng: &mut R) -> PhasePoint4 {
    let mut draw = || {
        let mut v = [0.0; 4];
        for x in v.iter_mut() {
            *x = standard_normal(rng);
        }
        v
    };
    PhasePoint4 { u: draw(), p: draw() }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; avoids pulling in a distributions crate for one draw.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Aggregate of a constrained (or deliberately unconstrained) sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: usize,
    pub max_gamma_residual: f64,
    pub max_kinetic_residual: f64,
    pub max_b_residual: f64,
    pub max_norm_residual: f64,
}

/// Runs the classical identity checks over `points` seeded random points.
/// With `constrained = false` the momenta are left off the constraint surface
/// and the kinetic identity is evaluated on the unchecked lift.
pub fn classical_sweep(points: usize, seed: u64, constrained: bool) -> SweepSummary {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut summary = SweepSummary {
        points,
        max_gamma_residual: 0.0,
        max_kinetic_residual: 0.0,
        max_b_residual: 0.0,
        max_norm_residual: 0.0,
    };
    for _ in 0..points {
        let pt = if constrained {
            random_constrained_point(&mut rng)
        } else {
            random_point(&mut rng)
        };
        let u2 = dot4(&pt.u, &pt.u);
        let x = ks_point(&pt.u);
        let lifted = PhasePoint3 {
            x,
            p: lift_momentum(&pt),
        };
        summary.max_norm_residual = summary.max_norm_residual.max((norm3(&x) - u2).abs() / u2);
        summary.max_gamma_residual = summary.max_gamma_residual.max(gamma_unitarity_residual(&pt.u));
        summary.max_kinetic_residual = summary
            .max_kinetic_residual
            .max(kinetic_identity_residual(&pt, &lifted));
        summary.max_b_residual = summary
            .max_b_residual
            .max(b_identity_residual(&pt).expect("u is nonzero almost surely"));
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn finite_vec4() -> impl Strategy<Value = Vec4> {
        prop::array::uniform4(-10.0f64..10.0)
    }

    #[test]
    fn point_map_examples() {
        assert_eq!(ks_point(&[1.0, 0.0, 0.0, 0.0]), [0.0, 0.0, 1.0]);
        let x = ks_point(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(x, [0.0, 4.0, 0.0]);
        assert_eq!(norm3(&x), 4.0);
    }

    #[test]
    fn constraint_examples() {
        let zero = PhasePoint4 { u: [1.0, 0.0, 0.0, 0.0], p: [0.0; 4] };
        assert_eq!(constraint_value(&zero), 0.0);
        let pt = PhasePoint4 { u: [1.0, 0.0, 0.0, 0.0], p: [0.0, 0.0, 0.0, 1.0] };
        assert_eq!(constraint_value(&pt), -1.0);
    }

    #[test]
    fn constraint_is_conserved_by_its_own_flow() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut pt = random_point(&mut rng);
        let c0 = constraint_value(&pt);
        let r0 = dot4(&pt.u, &pt.u);
        let dt = 1e-3;
        let axpy = |a: &PhasePoint4, s: f64, b: &PhasePoint4| {
            let mut out = *a;
            for i in 0..4 {
                out.u[i] += s * b.u[i];
                out.p[i] += s * b.p[i];
            }
            out
        };
        for _ in 0..5000 {
            let k1 = constraint_flow(&pt);
            let k2 = constraint_flow(&axpy(&pt, 0.5 * dt, &k1));
            let k3 = constraint_flow(&axpy(&pt, 0.5 * dt, &k2));
            let k4 = constraint_flow(&axpy(&pt, dt, &k3));
            for i in 0..4 {
                pt.u[i] += dt / 6.0 * (k1.u[i] + 2.0 * k2.u[i] + 2.0 * k3.u[i] + k4.u[i]);
                pt.p[i] += dt / 6.0 * (k1.p[i] + 2.0 * k2.p[i] + 2.0 * k3.p[i] + k4.p[i]);
            }
        }
        assert!((constraint_value(&pt) - c0).abs() <= 1e-10, "drift {}", constraint_value(&pt) - c0);
        assert!((dot4(&pt.u, &pt.u) - r0).abs() <= 1e-10 * r0);
    }

    #[test]
    fn lift_of_zero_momentum_is_zero() {
        let pt = PhasePoint4 { u: [0.3, -1.2, 0.7, 2.0], p: [0.0; 4] };
        let lifted = ks_lift(&pt).unwrap();
        assert_eq!(lifted.p, [0.0; 3]);
        assert_eq!(b_identity_residual(&pt).unwrap(), 0.0);
    }

    #[test]
    fn lift_hand_evaluated_point() {
        // u = (1,0,0,0): Λ rows are (1,0,0,0), (0,1,0,0), (0,0,1,0), so
        // P = (0,1,0,0) lifts to p = (0, 1/2, 0) and P² = 1 = 4 r p².
        let pt = PhasePoint4 { u: [1.0, 0.0, 0.0, 0.0], p: [0.0, 1.0, 0.0, 0.0] };
        assert_eq!(constraint_value(&pt), 0.0);
        let lifted = ks_lift(&pt).unwrap();
        assert_eq!(lifted.x, [0.0, 0.0, 1.0]);
        assert_eq!(lifted.p, [0.0, 0.5, 0.0]);
        assert_eq!(kinetic_identity_residual(&pt, &lifted), 0.0);
        assert!(b_identity_residual(&pt).unwrap() < 1e-15);
    }

    #[test]
    fn lift_rejects_constraint_violation_and_origin() {
        let pt = PhasePoint4 { u: [1.0, 0.0, 0.0, 0.0], p: [0.0, 0.0, 0.0, 1.0] };
        match ks_lift(&pt) {
            Err(KsError::ConstraintViolated { value, .. }) => assert_eq!(value, -1.0),
            other => panic!("expected violation, got {other:?}"),
        }
        let origin = PhasePoint4 { u: [0.0; 4], p: [1.0, 0.0, 0.0, 0.0] };
        assert_eq!(ks_lift(&origin), Err(KsError::ZeroCoordinate));
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_of(&[1.0, 0.0, 0.0, 0.0]), TwoByTwoC::identity());
        let u = [0.4, -1.1, 2.5, 0.3];
        let u2 = dot4(&u, &u);
        let g = gamma_of(&u);
        assert_relative_eq!(g.det().norm(), u2, epsilon = 1e-13 * u2);
    }

    #[test]
    fn off_surface_b_identity_fails() {
        let s = classical_sweep(2000, 3, false);
        assert!(s.max_b_residual > 1e-2);
        assert!(s.max_kinetic_residual > 1e-2);
    }

    #[test]
    fn point_map_kernel_is_not_the_constraint_direction() {
        // The point map's Jacobian annihilates (−u₂, u₁, u₄, −u₃), while the
        // constraint (and hence the Γ-based lift) uses (u₄, −u₃, u₂, −u₁).
        let u = [0.7, -0.2, 1.3, 0.5];
        let d = constraint_direction(&u);
        let jac = point_jacobian(&u);
        let lift = lift_matrix(&u);
        let kernel = [-u[1], u[0], u[3], -u[2]];
        for row in &jac {
            assert!(dot4(row, &kernel).abs() < 1e-15);
        }
        assert!(jac.iter().any(|row| dot4(row, &d).abs() > 1e-3));
        for row in &lift {
            assert!(dot4(row, &d).abs() < 1e-15);
        }
    }

    #[test]
    fn mapped_exact_instance() {
        let p = OscParams::new(1.0, 2f64.sqrt()).unwrap();
        let mp = map_oscillator_to_hydrogen(&p, 0).unwrap();
        assert_relative_eq!(mp.epsilon, 3.0, epsilon = 1e-14);
        assert_relative_eq!(mp.mass, 2.125, epsilon = 1e-14);
        assert_relative_eq!(mp.energy, 1.875, epsilon = 1e-14);
        assert_relative_eq!(mp.k, 0.5, epsilon = 1e-14);
        assert_eq!(mp.n, 1);
        assert!(spectrum_identity_residual(&mp) <= 1e-15);
        // Cross-check against the closed-form Coulomb level.
        let coulomb = model::CoulombParams::new(mp.mass, mp.k).unwrap();
        let e = model::energy_closed_form(&coulomb, mp.n, model::Branch::Plus).unwrap();
        assert_relative_eq!(e, mp.energy, epsilon = 1e-14);
    }

    #[test]
    fn mapped_unit_frequency_level() {
        // ε solves (ε + 1)(ε − 1)² = 32; value from a 30-digit root solve.
        let p = OscParams::new(1.0, 1.0).unwrap();
        let mp = map_oscillator_to_hydrogen(&p, 2).unwrap();
        assert_relative_eq!(mp.epsilon, 3.629_192_424_553_504, epsilon = 1e-13);
        assert_eq!(mp.n, 2);
        assert!(spectrum_identity_residual(&mp) <= 1e-12);
    }

    #[test]
    fn weak_frequency_collapses_both_sides() {
        let p = OscParams::new(1.0, 1e-6).unwrap();
        let mp = map_oscillator_to_hydrogen(&p, 4).unwrap();
        assert!((mp.mass - 1.0).abs() < 1e-5);
        assert!((mp.energy - 1.0).abs() < 1e-5);
        assert!(mp.k < 1e-5);
    }

    #[test]
    fn odd_levels_are_rejected() {
        let p = OscParams::new(1.0, 1.0).unwrap();
        assert_eq!(map_oscillator_to_hydrogen(&p, 3), Err(KsError::OddQuantumNumber(3)));
    }

    #[test]
    fn perturbed_epsilon_breaks_the_identity() {
        let p = OscParams::new(1.0, 2f64.sqrt()).unwrap();
        let mp = map_with_epsilon(&p, 0, 3.0 + 1e-3);
        assert!(spectrum_identity_residual(&mp) > 1e-6);
    }

    #[test]
    fn spectrum_bridge_sweep() {
        for omega in [1.0, 2f64.sqrt()] {
            let p = OscParams::new(1.0, omega).unwrap();
            for big_n in (0..=40).step_by(2) {
                let mp = map_oscillator_to_hydrogen(&p, big_n).unwrap();
                assert!(spectrum_identity_residual(&mp) <= 1e-12, "N = {big_n}");
                assert_eq!(u64::from(mp.n * mp.n), model::constrained_degeneracy(big_n));
            }
        }
    }

    proptest! {
        #[test]
        fn point_norm_identity(u in finite_vec4()) {
            let u2 = dot4(&u, &u);
            prop_assert!((norm3(&ks_point(&u)) - u2).abs() <= 1e-12 * u2.max(1e-300));
        }

        #[test]
        fn jacobian_rows_orthogonal(u in finite_vec4()) {
            let u2 = dot4(&u, &u);
            for rows in [point_jacobian(&u), lift_matrix(&u)] {
                for i in 0..3 {
                    for j in 0..3 {
                        let expected = if i == j { u2 } else { 0.0 };
                        prop_assert!((dot4(&rows[i], &rows[j]) - expected).abs() <= 1e-12 * u2.max(1e-300));
                    }
                }
            }
        }

        #[test]
        fn lift_kinetic_and_b_identities(u in finite_vec4(), p in finite_vec4()) {
            prop_assume!(dot4(&u, &u) > 1e-6);
            let pt = PhasePoint4 { u, p: project_onto_constraint(&u, &p) };
            let lifted = ks_lift(&pt).unwrap();
            prop_assert!(kinetic_identity_residual(&pt, &lifted) <= 1e-12);
            prop_assert!(b_identity_residual(&pt).unwrap() <= 1e-12);
            prop_assert!(gamma_unitarity_residual(&u) <= 1e-13);
        }
    }
}
