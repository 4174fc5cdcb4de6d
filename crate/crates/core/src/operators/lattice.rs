use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::grid::{DiracField, Grid, GridSpec, PauliField};

use super::OperatorError;

/// A grid together with the position and momentum multipliers the operators
/// need: components of r and p, r, 1/r, r̂, p², 1/p² and 1/|p|.
#[derive(Debug)]
pub struct Lattice {
    grid: Grid,
    pub(crate) x: [Vec<f64>; 3],
    pub(crate) p: [Vec<f64>; 3],
    pub(crate) r: Vec<f64>,
    pub(crate) inv_r: Vec<f64>,
    pub(crate) rhat: [Vec<f64>; 3],
    pub(crate) p2: Vec<f64>,
    pub(crate) inv_p2: Vec<f64>,
    pub(crate) inv_p: Vec<f64>,
}

/// Cyclic successor pair of an axis: (a, b, c) with ε_abc = +1.
pub(crate) fn cyclic(a: usize) -> (usize, usize) {
    ((a + 1) % 3, (a + 2) % 3)
}

impl Lattice {
    /// Builds the multipliers. Both offsets must be enabled so that 1/r and
    /// 1/p² are finite on every sample.
    pub fn new(spec: GridSpec) -> Result<Arc<Self>, OperatorError> {
        if !(spec.position_offset && spec.momentum_offset) {
            return Err(OperatorError::InvalidArgument(
                "operators need both the position and the momentum offset".into(),
            ));
        }
        let grid = Grid::new(spec);
        let x = [0, 1, 2].map(|a| grid.position_component(a));
        let p = [0, 1, 2].map(|a| grid.momentum_component(a));
        let r = grid.radius();
        let inv_r: Vec<f64> = r.iter().map(|v| 1.0 / v).collect();
        let rhat = [0, 1, 2].map(|a| x[a].iter().zip(&inv_r).map(|(x, ir)| x * ir).collect());
        let p2 = grid.momentum_squared();
        let inv_p2: Vec<f64> = p2.iter().map(|v| 1.0 / v).collect();
        let inv_p = inv_p2.iter().map(|v| v.sqrt()).collect();
        Ok(Arc::new(Self {
            grid,
            x,
            p,
            r,
            inv_r,
            rhat,
            p2,
            inv_p2,
            inv_p,
        }))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> GridSpec {
        *self.grid.spec()
    }

    pub fn radius(&self) -> &[f64] {
        &self.r
    }

    pub fn position_axis(&self, a: usize) -> &[f64] {
        &self.x[a]
    }

    pub fn momentum_axis(&self, a: usize) -> &[f64] {
        &self.p[a]
    }

    pub(crate) fn forward(&self, s: &[C64]) -> Vec<C64> {
        let mut out = s.to_vec();
        self.grid.forward_scalar(&mut out);
        out
    }

    pub(crate) fn inverse(&self, mut s: Vec<C64>) -> Vec<C64> {
        self.grid.inverse_scalar(&mut s);
        s
    }

    pub(crate) fn pos_mul(s: &[C64], m: &[f64]) -> Vec<C64> {
        s.iter().zip(m).map(|(z, w)| z * w).collect()
    }

    /// Momentum-space multiplier m(p) applied to a position-space scalar.
    pub(crate) fn mom_mul(&self, s: &[C64], m: &[f64]) -> Vec<C64> {
        let mut t = self.forward(s);
        t.iter_mut().zip(m).for_each(|(z, w)| *z *= w);
        self.inverse(t)
    }

    /// p_a s for every axis, from one forward and three inverse transforms.
    #[cfg(test)]
    pub(crate) fn gradient(&self, s: &[C64]) -> [Vec<C64>; 3] {
        let t = self.forward(s);
        [0, 1, 2].map(|a| self.inverse(Self::pos_mul(&t, &self.p[a])))
    }

    /// Orbital angular momentum l_a = (r × p)_a.
    pub(crate) fn angular(&self, s: &[C64], a: usize) -> Vec<C64> {
        let (b, c) = cyclic(a);
        let t = self.forward(s);
        let pb = self.inverse(Self::pos_mul(&t, &self.p[b]));
        let pc = self.inverse(Self::pos_mul(&t, &self.p[c]));
        (0..s.len())
            .map(|i| pc[i] * self.x[b][i] - pb[i] * self.x[c][i])
            .collect()
    }

    /// f_a = (p × l − l × p)_a, each product taken in the written order.
    pub(crate) fn f_vector(&self, s: &[C64], a: usize) -> Vec<C64> {
        let (b, c) = cyclic(a);
        let n = s.len();
        let t = self.forward(s);
        // (p × l)_a = p_b l_c − p_c l_b
        let lb = self.angular(s, b);
        let lc = self.angular(s, c);
        let mut pl = self.forward(&lc);
        let tb = self.forward(&lb);
        for i in 0..n {
            pl[i] = pl[i] * self.p[b][i] - tb[i] * self.p[c][i];
        }
        let pl = self.inverse(pl);
        // (l × p)_a = l_b p_c − l_c p_b, with l_b = x_c p_a − x_a p_c and
        // l_c = x_a p_b − x_b p_a acting on p_c s and p_b s respectively.
        let pp = |u: usize, v: usize| {
            let prod: Vec<C64> = (0..n).map(|i| t[i] * (self.p[u][i] * self.p[v][i])).collect();
            self.inverse(prod)
        };
        let pa_pc = pp(a, c);
        let pc_pc = pp(c, c);
        let pb_pb = pp(b, b);
        let pa_pb = pp(a, b);
        (0..n)
            .map(|i| {
                let lb_pc = self.x[c][i] * pa_pc[i] - self.x[a][i] * pc_pc[i];
                let lc_pb = self.x[a][i] * pb_pb[i] - self.x[b][i] * pa_pb[i];
                pl[i] - (lb_pc - lc_pb)
            })
            .collect()
    }

    /// Applies a spin matrix M(p) pointwise in momentum space to a Pauli field.
    pub(crate) fn mom_spin(&self, f: &PauliField, m: impl Fn(usize) -> [[C64; 2]; 2]) -> PauliField {
        let up = self.forward(f.component(0));
        let dn = self.forward(f.component(1));
        let mut a = Vec::with_capacity(up.len());
        let mut b = Vec::with_capacity(up.len());
        for i in 0..up.len() {
            let mat = m(i);
            a.push(mat[0][0] * up[i] + mat[0][1] * dn[i]);
            b.push(mat[1][0] * up[i] + mat[1][1] * dn[i]);
        }
        PauliField::from_components(self.spec(), [self.inverse(a), self.inverse(b)]).expect("lattice-sized")
    }

    /// Applies a(ε_p) + b(ε_p)·H₀(p) pointwise in momentum space, with
    /// H₀ = α·p + βM and ε_p = √(p² + M²); `coeffs` maps ε_p to (a, b).
    pub(crate) fn free_dirac_function(&self, f: &DiracField, mass: f64, coeffs: impl Fn(f64) -> (f64, f64)) -> DiracField {
        let comps: [Vec<C64>; 4] = std::array::from_fn(|c| self.forward(f.component(c)));
        let n = comps[0].len();
        let mut out: [Vec<C64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
        for i in 0..n {
            let (a, b) = coeffs((self.p2[i] + mass * mass).sqrt());
            let sp = self.sigma_p(i);
            let u = [comps[0][i], comps[1][i]];
            let d = [comps[2][i], comps[3][i]];
            let spd = [sp[0][0] * d[0] + sp[0][1] * d[1], sp[1][0] * d[0] + sp[1][1] * d[1]];
            let spu = [sp[0][0] * u[0] + sp[0][1] * u[1], sp[1][0] * u[0] + sp[1][1] * u[1]];
            out[0].push(a * u[0] + b * (mass * u[0] + spd[0]));
            out[1].push(a * u[1] + b * (mass * u[1] + spd[1]));
            out[2].push(a * d[0] + b * (spu[0] - mass * d[0]));
            out[3].push(a * d[1] + b * (spu[1] - mass * d[1]));
        }
        DiracField::from_components(self.spec(), out.map(|c| self.inverse(c))).expect("lattice-sized")
    }

    /// σ·p at momentum sample i.
    pub(crate) fn sigma_p(&self, i: usize) -> [[C64; 2]; 2] {
        let (px, py, pz) = (self.p[0][i], self.p[1][i], self.p[2][i]);
        [
            [C64::new(pz, 0.0), C64::new(px, -py)],
            [C64::new(px, py), C64::new(-pz, 0.0)],
        ]
    }
}
