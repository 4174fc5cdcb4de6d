//! Non-relativistic limit of H and Q at fixed k and growing M.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::grid::{gaussian_packet, DiracField, GridSpec, PacketSpec, PauliField};
use crate::model::CoulombParams;

use super::dirac::*;
use super::lattice::Lattice;
use super::residual::ProbePolicy;
use super::{DiracOp, OperatorError, PauliOp};

/// Free positive-energy projector Λ₊(p) = (1 + H₀/ε_p)/2.
pub fn positive_energy_projector(lat: &Arc<Lattice>, mass: f64) -> DiracOp {
    let l = lat.clone();
    DiracOp::new("Λ+", true, lat.spec(), move |f: &DiracField| {
        l.free_dirac_function(f, mass, |e| (0.5, 0.5 / e))
    })
}

/// Embeds an upper 2-spinor φ as the positive-energy state Λ₊(φ, 0).
///
/// The bare (φ, 0) is not a non-relativistic state: H maps it to (Vφ, σ·pφ),
/// whose lower part does not shrink with M. Projecting first gives the lower
/// component σ·p φ/(2ε_p), the familiar small component.
pub fn embed_upper(lat: &Arc<Lattice>, mass: f64, phi: &PauliField) -> DiracField {
    let lifted = DiracField::from_halves(phi.clone(), PauliField::zeros(lat.spec())).expect("same grid");
    positive_energy_projector(lat, mass).apply(&lifted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub mass: f64,
    /// max ‖(H − M)ψ − diag(p²/2M − k/r, p²/2M)ψ‖ / ‖ψ‖ over probes.
    pub hamiltonian_residual: f64,
    /// max ‖(Q/2M)ψ − diag(R, f/(2Mk))ψ‖ / ‖ψ‖ over probes.
    pub q_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitStudy {
    pub k: f64,
    pub rows: Vec<LimitRow>,
    /// Decay exponents α in residual ∝ M^(−α), from the last two rows.
    pub hamiltonian_exponent: f64,
    pub q_exponent: f64,
    /// Aitken Δ² estimate of the M → ∞ residual from the last three rows;
    /// exact for r∞ + C·M^(−α) on a geometric mass ladder.
    pub hamiltonian_extrapolated: Option<f64>,
    pub q_extrapolated: Option<f64>,
}

impl LimitStudy {
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].hamiltonian_residual < w[0].hamiltonian_residual && w[1].q_residual < w[0].q_residual
        })
    }
}

fn decay_exponent(masses: (f64, f64), values: (f64, f64)) -> f64 {
    (values.0 / values.1).ln() / (masses.1 / masses.0).ln()
}

fn aitken(values: &[f64]) -> Option<f64> {
    let [a, b, c] = values[values.len().checked_sub(3)?..] else {
        return None;
    };
    let denom = a - 2.0 * b + c;
    (denom != 0.0).then(|| (a * c - b * b) / denom)
}

/// Residuals of the non-relativistic forms of H − M and Q/(2M) along an
/// increasing mass ladder, on seeded upper-spinor probes embedded with Λ₊.
pub fn nonrel_limit_study(
    k: f64,
    masses: &[f64],
    spec: GridSpec,
    policy: &ProbePolicy,
    seed: u64,
) -> Result<LimitStudy, OperatorError> {
    if masses.len() < 2 || masses.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OperatorError::InvalidArgument("mass ladder must have >= 2 increasing entries".into()));
    }
    let lat = Lattice::new(spec)?;
    let probes = policy.probes::<2>(lat.grid(), seed)?;
    let mut rows = Vec::with_capacity(masses.len());
    for &mass in masses {
        let p = CoulombParams::new(mass, k)?;
        let h = build_hamiltonian(&p, &lat);
        let q = build_q(&p, &lat)?;
        let kinetic = momentum_squared(&lat).scaled(C64::new(0.5 / mass, 0.0));
        let nr_h = block_operator(
            "H_nr",
            true,
            [[Some(kinetic.plus(&coulomb_potential(&lat, k))), None], [None, Some(kinetic.clone())]],
        );
        let nr_q: Vec<DiracOp> = (0..3)
            .map(|a| {
                let lower: PauliOp = f_vector(&lat, a).scaled(C64::new(1.0 / (2.0 * mass * k), 0.0));
                Ok(block_operator("Q_nr", true, [[Some(runge_lenz(&p, &lat, a)?), None], [None, Some(lower)]]))
            })
            .collect::<Result<_, OperatorError>>()?;
        let (mut h_res, mut q_res) = (0.0_f64, 0.0_f64);
        for phi in &probes.fields {
            let psi = embed_upper(&lat, mass, phi);
            let norm = psi.norm();
            let mut r = h.apply(&psi);
            r.axpy(C64::new(-mass, 0.0), &psi);
            r.axpy(C64::new(-1.0, 0.0), &nr_h.apply(&psi));
            h_res = h_res.max(r.norm() / norm);
            for a in 0..3 {
                let mut r = q[a].apply(&psi).scale(C64::new(0.5 / mass, 0.0));
                r.axpy(C64::new(-1.0, 0.0), &nr_q[a].apply(&psi));
                q_res = q_res.max(r.norm() / norm);
            }
        }
        rows.push(LimitRow {
            mass,
            hamiltonian_residual: h_res,
            q_residual: q_res,
        });
    }
    let n = rows.len();
    let ms = (rows[n - 2].mass, rows[n - 1].mass);
    let hamiltonian_exponent = decay_exponent(ms, (rows[n - 2].hamiltonian_residual, rows[n - 1].hamiltonian_residual));
    let q_exponent = decay_exponent(ms, (rows[n - 2].q_residual, rows[n - 1].q_residual));
    let h_col: Vec<f64> = rows.iter().map(|r| r.hamiltonian_residual).collect();
    let q_col: Vec<f64> = rows.iter().map(|r| r.q_residual).collect();
    Ok(LimitStudy {
        k,
        hamiltonian_exponent,
        q_exponent,
        hamiltonian_extrapolated: aitken(&h_col),
        q_extrapolated: aitken(&q_col),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungeLenzAlignment {
    pub radius: f64,
    pub momentum: f64,
    /// Classical x component r p²/(Mk) − 1 for r = r x̂, p = p ŷ.
    pub classical: f64,
    /// ⟨R_x⟩ on the Gaussian packet.
    pub quantum: f64,
    pub aligned: bool,
}

/// ⟨R_x⟩ on a packet at r x̂ moving along ŷ, against the classical value.
pub fn runge_lenz_alignment(
    p: &CoulombParams,
    spec: GridSpec,
    radius: f64,
    momentum: f64,
    width: f64,
) -> Result<RungeLenzAlignment, OperatorError> {
    let lat = Lattice::new(spec)?;
    let packet = PacketSpec {
        center: [radius, 0.0, 0.0],
        width,
        boost: [0.0, momentum, 0.0],
    };
    let phi: PauliField = gaussian_packet(lat.grid(), &packet, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)])?;
    let r = runge_lenz(p, &lat, 0)?;
    let quantum = phi.inner_unchecked(&r.apply(&phi)).re;
    let classical = radius * momentum * momentum / (p.mass() * p.k()) - 1.0;
    Ok(RungeLenzAlignment {
        radius,
        momentum,
        classical,
        quantum,
        aligned: classical.signum() == quantum.signum(),
    })
}
