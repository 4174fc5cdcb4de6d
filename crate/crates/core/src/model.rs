//! Closed-form spectra of the spin-symmetric Dirac-Coulomb problem and of the
//! four-dimensional equal scalar/vector oscillator, plus the degeneracy counting
//! that links them.
//!
//! Everything here is a pure function of value inputs and serves as the analytic
//! reference for the radial solver, the Cartesian grid eigensolver and the KS
//! bridge. Units are natural (ħ = c = 1).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("principal quantum number must be >= 1, got {0}")]
    PrincipalNumber(u32),
    #[error("invalid parameter {name} = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("oscillator root search failed to converge (residual {residual:e})")]
    RootNotConverged { residual: f64 },
}

/// Rest mass `mass` and Coulomb strength `k` of V(r) = -k/r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoulombParams {
    mass: f64,
    k: f64,
}

impl CoulombParams {
    pub fn new(mass: f64, k: f64) -> Result<Self, ModelError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(ModelError::Parameter {
                name: "M",
                value: mass,
                reason: "mass must be finite and positive",
            });
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(ModelError::Parameter {
                name: "k",
                value: k,
                reason: "coupling must be finite and non-negative",
            });
        }
        Ok(Self { mass, k })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Rest mass `mass` and frequency `omega` of the 4D potential m ω² u² / 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscParams {
    mass: f64,
    omega: f64,
}

impl OscParams {
    pub fn new(mass: f64, omega: f64) -> Result<Self, ModelError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(ModelError::Parameter {
                name: "m",
                value: mass,
                reason: "mass must be finite and positive",
            });
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(ModelError::Parameter {
                name: "omega",
                value: omega,
                reason: "frequency must be finite and positive",
            });
        }
        Ok(Self { mass, omega })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSource {
    ClosedForm,
    Radial,
    Grid,
    Quartic,
}

/// One energy level together with where the number came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: u32,
    pub l: Option<u32>,
    pub energy: f64,
    pub branch: Branch,
    pub source: LevelSource,
    pub degeneracy: u32,
}

impl LevelRecord {
    /// Closed-form level with the full (orbital x spin) multiplicity attached.
    pub fn closed_form(p: &CoulombParams, n: u32, branch: Branch) -> Result<Self, ModelError> {
        Ok(Self {
            n,
            l: None,
            energy: energy_closed_form(p, n, branch)?,
            branch,
            source: LevelSource::ClosedForm,
            degeneracy: coulomb_degeneracy(n)?,
        })
    }
}

fn check_principal(n: u32) -> Result<f64, ModelError> {
    if n == 0 {
        return Err(ModelError::PrincipalNumber(n));
    }
    Ok(f64::from(n))
}

/// E± = (±4n² − k²)/(4n² + k²) · M.
///
/// The minus branch is identically −M for every n and k; it is returned as
/// written and flagged by callers that report it.
pub fn energy_closed_form(p: &CoulombParams, n: u32, branch: Branch) -> Result<f64, ModelError> {
    let n = check_principal(n)?;
    let four_n2 = 4.0 * n * n;
    let k2 = p.k * p.k;
    let numerator = match branch {
        Branch::Plus => four_n2 - k2,
        Branch::Minus => -four_n2 - k2,
    };
    Ok(numerator / (four_n2 + k2) * p.mass)
}

/// Large-mass limit M − k²M/(2n²) of the positive branch.
pub fn nonrel_limit_energy(p: &CoulombParams, n: u32) -> Result<f64, ModelError> {
    let n = check_principal(n)?;
    Ok(p.mass - p.k * p.k * p.mass / (2.0 * n * n))
}

/// Bracket [lo, hi] for the oscillator excitation t = ε − m.
pub fn oscillator_bracket(p: &OscParams, big_n: u32) -> (f64, f64) {
    let c = 2.0 * p.mass * p.omega * p.omega;
    let n2 = f64::from(big_n) + 2.0;
    (0.0, 2.0 * c.cbrt() * n2.powf(2.0 / 3.0) + 1.0)
}

/// Physical root ε > m of (ε + m)(ε − m)² = 2 m ω² (N + 2)².
///
/// This is the oscillator quartic with the spurious double root ε = −m
/// divided out. The root is bracketed in t = ε − m, bisected and then polished
/// with Newton steps until the relative change drops below 1e-14.
pub fn oscillator_energy(p: &OscParams, big_n: u32) -> Result<f64, ModelError> {
    let m = p.mass;
    let n2 = f64::from(big_n) + 2.0;
    let rhs = 2.0 * m * p.omega * p.omega * n2 * n2;
    // f(t) = (2m + t) t² − rhs is strictly increasing for t > 0.
    let f = |t: f64| (2.0 * m + t) * t * t - rhs;
    let df = |t: f64| 4.0 * m * t + 3.0 * t * t;

    let (mut lo, mut hi) = oscillator_bracket(p, big_n);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..50 {
        let d = df(t);
        if d <= 0.0 {
            break;
        }
        let step = f(t) / d;
        let next = (t - step).clamp(lo, hi);
        let done = (next - t).abs() <= 1e-15 * next.abs();
        t = next;
        if done {
            break;
        }
    }
    let scale = (2.0 * m + t) * t * t + rhs;
    let residual = f(t).abs();
    if residual > 1e-12 * scale {
        return Err(ModelError::RootNotConverged { residual });
    }
    Ok(m + t)
}

/// Number of 4D oscillator states (n₁, n₂, n₃, n₄) with n₁ + n₂ = n₃ + n₄ and
/// total quantum number N. Zero for odd N, (N/2 + 1)² otherwise.
pub fn constrained_degeneracy(big_n: u32) -> u64 {
    if big_n % 2 == 1 {
        return 0;
    }
    let q = u64::from(big_n / 2);
    (q + 1) * (q + 1)
}

/// Orbital multiplicity n² of the SO(4) irrep (j, j) with n = 2j + 1.
pub fn orbital_degeneracy(n: u32) -> Result<u32, ModelError> {
    check_principal(n)?;
    Ok(n * n)
}

/// Full multiplicity 2n² of level n (orbital n² times the conserved spin doublet).
pub fn coulomb_degeneracy(n: u32) -> Result<u32, ModelError> {
    Ok(2 * orbital_degeneracy(n)?)
}

/// Inverts j(j + 1) = casimir to the principal number n = 2j + 1 = sqrt(1 + 4 casimir).
pub fn principal_from_casimir(casimir: f64) -> f64 {
    (1.0 + 4.0 * casimir).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn coulomb(m: f64, k: f64) -> CoulombParams {
        CoulombParams::new(m, k).unwrap()
    }

    #[test]
    fn ground_level_at_unit_coupling() {
        let e = energy_closed_form(&coulomb(1.0, 1.0), 1, Branch::Plus).unwrap();
        assert_relative_eq!(e, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn free_particle_sits_at_rest_mass() {
        for n in 1..10 {
            assert_eq!(energy_closed_form(&coulomb(1.0, 0.0), n, Branch::Plus).unwrap(), 1.0);
        }
    }

    #[test]
    fn mapped_instance_matches_exact_rational() {
        // 2.125 * (4 - 0.25) / (4 + 0.25) = 1.875
        let e = energy_closed_form(&coulomb(2.125, 0.5), 1, Branch::Plus).unwrap();
        assert_relative_eq!(e, 1.875, epsilon = 1e-15);
    }

    #[test]
    fn zero_principal_number_is_rejected() {
        let p = coulomb(1.0, 0.5);
        assert_eq!(
            energy_closed_form(&p, 0, Branch::Plus),
            Err(ModelError::PrincipalNumber(0))
        );
        assert!(nonrel_limit_energy(&p, 0).is_err());
        assert!(coulomb_degeneracy(0).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(CoulombParams::new(0.0, 1.0).is_err());
        assert!(CoulombParams::new(1.0, -0.1).is_err());
        assert!(CoulombParams::new(f64::NAN, 0.1).is_err());
        assert!(OscParams::new(1.0, 0.0).is_err());
        assert!(OscParams::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn nonrel_limit_values() {
        assert_relative_eq!(
            nonrel_limit_energy(&coulomb(1.0, 0.01), 1).unwrap(),
            0.99995,
            epsilon = 1e-15
        );
        assert_eq!(nonrel_limit_energy(&coulomb(1.0, 0.0), 3).unwrap(), 1.0);
    }

    #[test]
    fn nonrel_deviation_is_quartic_in_coupling() {
        let dev = |k: f64| {
            let p = coulomb(1.0, k);
            energy_closed_form(&p, 1, Branch::Plus).unwrap() - nonrel_limit_energy(&p, 1).unwrap()
        };
        let r1 = dev(0.1) / dev(0.05);
        let r2 = dev(0.05) / dev(0.025);
        assert!((r1 - 16.0).abs() < 0.1, "ratio {r1}");
        assert!((r2 - 16.0).abs() < 0.03, "ratio {r2}");
        assert!((r2 - 16.0).abs() < (r1 - 16.0).abs());
    }

    #[test]
    fn oscillator_exact_instance() {
        let p = OscParams::new(1.0, 2f64.sqrt()).unwrap();
        let eps = oscillator_energy(&p, 0).unwrap();
        assert!((eps - 3.0).abs() <= 1e-14 * 3.0, "eps = {eps}");
    }

    #[test]
    fn oscillator_unit_frequency_regression() {
        // Bisection oracle on [1, 4] for (e + 1)(e - 1)^2 = 8, carried to 1e-15.
        let f = |e: f64| (e + 1.0) * (e - 1.0) * (e - 1.0) - 8.0;
        let (mut lo, mut hi) = (1.0_f64, 4.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert_relative_eq!(oracle, 2.509_755_332_493_386, epsilon = 1e-12);
        let eps = oscillator_energy(&OscParams::new(1.0, 1.0).unwrap(), 0).unwrap();
        assert_relative_eq!(eps, oracle, epsilon = 1e-13);
    }

    #[test]
    fn oscillator_weak_frequency_approaches_rest_mass() {
        let mut prev = f64::INFINITY;
        for omega in [1e-2, 1e-4, 1e-6] {
            let eps = oscillator_energy(&OscParams::new(1.0, omega).unwrap(), 3).unwrap();
            assert!(eps > 1.0 && eps < prev);
            prev = eps;
        }
        assert!(prev - 1.0 < 1e-5);
    }

    fn brute_force_constrained(big_n: u32) -> u64 {
        let mut count = 0;
        for n1 in 0..=big_n {
            for n2 in 0..=big_n - n1 {
                for n3 in 0..=big_n - n1 - n2 {
                    let n4 = big_n - n1 - n2 - n3;
                    if n1 + n2 == n3 + n4 {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn constrained_degeneracy_matches_enumeration() {
        assert_eq!(constrained_degeneracy(0), 1);
        assert_eq!(constrained_degeneracy(3), 0);
        assert_eq!(constrained_degeneracy(2), 4);
        assert_eq!(constrained_degeneracy(4), 9);
        for big_n in 0..=40 {
            assert_eq!(constrained_degeneracy(big_n), brute_force_constrained(big_n), "N = {big_n}");
        }
    }

    #[test]
    fn degeneracy_bridge() {
        assert_eq!(coulomb_degeneracy(1).unwrap(), 2);
        assert_eq!(coulomb_degeneracy(2).unwrap(), 8);
        for n in 1..=20u32 {
            let orbital: u32 = (0..n).map(|l| 2 * l + 1).sum();
            assert_eq!(orbital_degeneracy(n).unwrap(), orbital);
            assert_eq!(u64::from(orbital), brute_force_constrained(2 * n - 2));
        }
    }

    #[test]
    fn casimir_inversion() {
        assert_eq!(principal_from_casimir(0.0), 1.0);
        assert_relative_eq!(principal_from_casimir(0.75), 2.0);
        assert_relative_eq!(principal_from_casimir(2.0), 3.0);
    }

    proptest! {
        #[test]
        fn minus_branch_is_minus_mass(m in 1e-3f64..1e3, k in 0.0f64..50.0, n in 1u32..200) {
            let e = energy_closed_form(&coulomb(m, k), n, Branch::Minus).unwrap();
            prop_assert!((e + m).abs() <= 4.0 * f64::EPSILON * m);
        }

        #[test]
        fn plus_branch_increases_towards_mass(m in 1e-2f64..1e2, k in 1e-3f64..10.0, n in 1u32..100) {
            let p = coulomb(m, k);
            let e0 = energy_closed_form(&p, n, Branch::Plus).unwrap();
            let e1 = energy_closed_form(&p, n + 1, Branch::Plus).unwrap();
            prop_assert!(e1 > e0);
            prop_assert!(e0 > -m && e0 < m);
            prop_assert!(e1 < m);
        }

        #[test]
        fn quartic_residual_is_tiny(m in 1e-2f64..1e2, omega in 1e-3f64..1e2, big_n in 0u32..60) {
            let p = OscParams::new(m, omega).unwrap();
            let eps = oscillator_energy(&p, big_n).unwrap();
            prop_assert!(eps > m);
            let n2 = f64::from(big_n) + 2.0;
            let rhs = 2.0 * m * omega * omega * n2 * n2;
            let lhs = (eps + m) * (eps - m) * (eps - m);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + rhs));
            // Same root of the unreduced quartic.
            let quartic = (eps + m).powi(2) * (eps - m).powi(2) - 2.0 * m * omega * omega * (eps + m) * n2 * n2;
            prop_assert!(quartic.abs() <= 1e-11 * (eps + m).powi(2) * (eps - m).powi(2).max(1e-300));
        }
    }
}
