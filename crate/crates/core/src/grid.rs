//! Offset Cartesian spectral grid, spinor fields and unitary transforms.
//!
//! Positions are x_i = −L/2 + (i + s_x)·L/N and momenta p_j = 2π(j − N/2 + s_p)/L
//! per axis, with s_x, s_p ∈ {0, ½}. With both offsets on, neither r = 0 nor
//! p = 0 is sampled, so 1/r and 1/p² are plain diagonal multipliers. The
//! half-mode momentum offset makes the discrete basis antiperiodic across the
//! box; test packets are localized well inside it, so this never shows.
//!
//! Fields are stored component-major, each component row-major with
//! index (ix·N + iy)·N + iz.

use std::io::{self, Read, Write};
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: GridSpec, found: GridSpec },
    #[error("packet tail {tail:e} at the {space} boundary exceeds {bound:e}")]
    TailBound { space: &'static str, tail: f64, bound: f64 },
    #[error("invalid packet: {0}")]
    InvalidPacket(String),
    #[error("dump format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Columns gathered per strided transform pass.
const COLUMN_BLOCK: usize = 16;

/// Relative amplitude a test packet may keep at the box boundary.
pub const PACKET_TAIL_BOUND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub box_length: f64,
    pub position_offset: bool,
    pub momentum_offset: bool,
}

impl GridSpec {
    /// Grid with both offsets enabled.
    pub fn new(points_per_axis: usize, box_length: f64) -> Result<Self, GridError> {
        Self::with_offsets(points_per_axis, box_length, true, true)
    }

    pub fn with_offsets(
        points_per_axis: usize,
        box_length: f64,
        position_offset: bool,
        momentum_offset: bool,
    ) -> Result<Self, GridError> {
        if points_per_axis < 16 || points_per_axis % 2 != 0 {
            return Err(GridError::InvalidSpec(format!(
                "points per axis must be even and >= 16, got {points_per_axis}"
            )));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(GridError::InvalidSpec(format!("box length {box_length} must be positive")));
        }
        Ok(Self {
            points_per_axis,
            box_length,
            position_offset,
            momentum_offset,
        })
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_axis as f64
    }

    pub fn mode_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_length
    }

    /// Largest sampled momentum component, π N / L up to the offset.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.points_per_axis as f64 / self.box_length
    }

    fn position_shift(&self) -> f64 {
        if self.position_offset {
            0.5
        } else {
            0.0
        }
    }

    fn momentum_shift(&self) -> f64 {
        if self.momentum_offset {
            0.5
        } else {
            0.0
        }
    }

    pub fn position_axis(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let h = self.spacing();
        (0..n)
            .map(|i| -0.5 * self.box_length + (i as f64 + self.position_shift()) * h)
            .collect()
    }

    pub fn momentum_axis(&self) -> Vec<f64> {
        let n = self.points_per_axis as f64;
        let dk = self.mode_spacing();
        (0..self.points_per_axis)
            .map(|j| (j as f64 - 0.5 * n + self.momentum_shift()) * dk)
            .collect()
    }

    pub fn split_index(&self, idx: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        [idx / (n * n), (idx / n) % n, idx % n]
    }
}

/// Sample arrays and transform plans for one [`GridSpec`]. Read-only once
/// built and cheap to share behind an `Arc`.
pub struct Grid {
    spec: GridSpec,
    x_axis: Vec<f64>,
    p_axis: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    // Full 3D twiddles of the forward transform; the inverse uses conjugates.
    pre: Vec<C64>,
    post: Vec<C64>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish_non_exhaustive()
    }
}

fn outer3(a: &[C64]) -> Vec<C64> {
    let n = a.len();
    let mut out = Vec::with_capacity(n * n * n);
    for &ax in a {
        for &ay in a {
            let axy = ax * ay;
            out.extend(a.iter().map(|&az| axy * az));
        }
    }
    out
}

impl Grid {
    pub fn new(spec: GridSpec) -> Self {
        let n = spec.points_per_axis;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let (sx, sp) = (spec.position_shift(), spec.momentum_shift());
        let nf = n as f64;
        let tau = 2.0 * std::f64::consts::PI;
        let sign = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
        let pre1: Vec<C64> = (0..n)
            .map(|i| C64::from_polar(sign(i), -tau * sp * i as f64 / nf))
            .collect();
        let a = sp - 0.5 * nf;
        let b = sx - 0.5 * nf;
        // Constant phase and the 1/√N normalisation folded into the post twiddle.
        let constant = C64::from_polar(1.0 / nf.sqrt(), -tau * (a * b).rem_euclid(nf) / nf);
        let post1: Vec<C64> = (0..n)
            .map(|j| constant * C64::from_polar(sign(j), -tau * sx * j as f64 / nf))
            .collect();
        Self {
            spec,
            x_axis: spec.position_axis(),
            p_axis: spec.momentum_axis(),
            forward,
            inverse,
            pre: outer3(&pre1),
            post: outer3(&post1),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.spec.split_index(idx);
        [self.x_axis[i], self.x_axis[j], self.x_axis[k]]
    }

    pub fn momentum(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.spec.split_index(idx);
        [self.p_axis[i], self.p_axis[j], self.p_axis[k]]
    }

    /// Position samples of one Cartesian component over the whole lattice.
    pub fn position_component(&self, axis: usize) -> Vec<f64> {
        (0..self.spec.len()).map(|idx| self.position(idx)[axis]).collect()
    }

    pub fn momentum_component(&self, axis: usize) -> Vec<f64> {
        (0..self.spec.len()).map(|idx| self.momentum(idx)[axis]).collect()
    }

    pub fn radius(&self) -> Vec<f64> {
        (0..self.spec.len())
            .map(|idx| {
                let [x, y, z] = self.position(idx);
                (x * x + y * y + z * z).sqrt()
            })
            .collect()
    }

    pub fn momentum_squared(&self) -> Vec<f64> {
        (0..self.spec.len())
            .map(|idx| {
                let [x, y, z] = self.momentum(idx);
                x * x + y * y + z * z
            })
            .collect()
    }

    pub fn min_radius(&self) -> f64 {
        self.radius().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn min_momentum(&self) -> f64 {
        self.momentum_squared().into_iter().fold(f64::INFINITY, f64::min).sqrt()
    }

    fn transform_axes(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.spec.points_per_axis;
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // z: contiguous lines.
        plan.process_with_scratch(data, &mut scratch);
        // y and x: gather blocks of columns into contiguous lines.
        let mut lines = vec![C64::new(0.0, 0.0); n * COLUMN_BLOCK];
        for stride in [n, n * n] {
            for outer in data.chunks_exact_mut(n * stride) {
                for start in (0..stride).step_by(COLUMN_BLOCK) {
                    let width = COLUMN_BLOCK.min(stride - start);
                    for i in 0..n {
                        let row = &outer[i * stride + start..i * stride + start + width];
                        for (b, v) in row.iter().enumerate() {
                            lines[b * n + i] = *v;
                        }
                    }
                    plan.process_with_scratch(&mut lines[..width * n], &mut scratch);
                    for i in 0..n {
                        let row = &mut outer[i * stride + start..i * stride + start + width];
                        for (b, v) in row.iter_mut().enumerate() {
                            *v = lines[b * n + i];
                        }
                    }
                }
            }
        }
    }

    /// In-place unitary transform of one scalar component to momentum space.
    pub fn forward_scalar(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.spec.len(), "scalar length does not match grid");
        data.iter_mut().zip(&self.pre).for_each(|(v, t)| *v *= t);
        self.transform_axes(data, &self.forward);
        data.iter_mut().zip(&self.post).for_each(|(v, t)| *v *= t);
    }

    /// In-place inverse of [`Grid::forward_scalar`].
    pub fn inverse_scalar(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.spec.len(), "scalar length does not match grid");
        data.iter_mut().zip(&self.post).for_each(|(v, t)| *v *= t.conj());
        self.transform_axes(data, &self.inverse);
        data.iter_mut().zip(&self.pre).for_each(|(v, t)| *v *= t.conj());
    }

    fn check<const C: usize>(&self, f: &Field<C>) -> Result<(), GridError> {
        if f.spec != self.spec {
            return Err(GridError::ShapeMismatch {
                expected: self.spec,
                found: f.spec,
            });
        }
        Ok(())
    }

    pub fn to_momentum<const C: usize>(&self, f: &Field<C>) -> Result<Field<C>, GridError> {
        self.check(f)?;
        let mut out = f.clone();
        out.comps.iter_mut().for_each(|c| self.forward_scalar(c));
        Ok(out)
    }

    pub fn to_position<const C: usize>(&self, f: &Field<C>) -> Result<Field<C>, GridError> {
        self.check(f)?;
        let mut out = f.clone();
        out.comps.iter_mut().for_each(|c| self.inverse_scalar(c));
        Ok(out)
    }
}

/// Σ conj(aᵢ)·bᵢ with independent partial sums, so the loop is not bound by
/// the latency of one long addition chain.
pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    let mut re = [0.0_f64; 4];
    let mut im = [0.0_f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            re[l] += x[l].re * y[l].re + x[l].im * y[l].im;
            im[l] += x[l].re * y[l].im - x[l].im * y[l].re;
        }
    }
    let mut out = C64::new(re.iter().sum(), im.iter().sum());
    for (x, y) in ta.iter().zip(tb) {
        out += x.conj() * y;
    }
    out
}

/// C-component complex lattice field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<const C: usize> {
    spec: GridSpec,
    comps: [Vec<C64>; C],
}

/// Two-component (Pauli) spinor field.
pub type PauliField = Field<2>;
/// Four-component (Dirac) spinor field: upper and lower Pauli halves.
pub type DiracField = Field<4>;
/// One-component field, used for scalar probes.
pub type ScalarField = Field<1>;

impl<const C: usize> Field<C> {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            comps: std::array::from_fn(|_| vec![C64::new(0.0, 0.0); spec.len()]),
        }
    }

    pub fn from_components(spec: GridSpec, comps: [Vec<C64>; C]) -> Result<Self, GridError> {
        if comps.iter().any(|c| c.len() != spec.len()) {
            return Err(GridError::InvalidSpec("component length does not match grid".into()));
        }
        Ok(Self { spec, comps })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn component(&self, i: usize) -> &[C64] {
        &self.comps[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[Vec<C64>; C] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<C64>; C] {
        self.comps
    }

    fn same_shape(&self, other: &Self) -> Result<(), GridError> {
        if self.spec != other.spec {
            return Err(GridError::ShapeMismatch {
                expected: self.spec,
                found: other.spec,
            });
        }
        Ok(())
    }

    /// ⟨self, other⟩, antilinear in the first slot.
    pub fn inner(&self, other: &Self) -> Result<C64, GridError> {
        self.same_shape(other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &Self) -> C64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| dot(a, b)).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.comps.iter().map(|a| dot(a, a).re).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(mut self, a: C64) -> Self {
        self.comps.iter_mut().flatten().for_each(|z| *z *= a);
        self
    }

    /// self + a·other, in place.
    pub fn axpy(&mut self, a: C64, other: &Self) {
        assert_eq!(self.spec, other.spec, "field shapes differ");
        for (x, y) in self.comps.iter_mut().zip(&other.comps) {
            x.iter_mut().zip(y).for_each(|(u, v)| *u += a * v);
        }
    }

    /// Pointwise multiplication of every component by a real lattice function.
    pub fn mul_real(mut self, w: &[f64]) -> Self {
        for c in self.comps.iter_mut() {
            c.iter_mut().zip(w).for_each(|(z, s)| *z *= s);
        }
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl<const C: usize> Add for &Field<C> {
    type Output = Field<C>;
    fn add(self, rhs: Self) -> Field<C> {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), rhs);
        out
    }
}

impl<const C: usize> Sub for &Field<C> {
    type Output = Field<C>;
    fn sub(self, rhs: Self) -> Field<C> {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), rhs);
        out
    }
}

impl<const C: usize> Mul<&Field<C>> for C64 {
    type Output = Field<C>;
    fn mul(self, rhs: &Field<C>) -> Field<C> {
        rhs.clone().scale(self)
    }
}

impl DiracField {
    pub fn from_halves(upper: PauliField, lower: PauliField) -> Result<Self, GridError> {
        if upper.spec != lower.spec {
            return Err(GridError::ShapeMismatch {
                expected: upper.spec,
                found: lower.spec,
            });
        }
        let spec = upper.spec;
        let [a, b] = upper.comps;
        let [c, d] = lower.comps;
        Ok(Self {
            spec,
            comps: [a, b, c, d],
        })
    }

    pub fn into_halves(self) -> (PauliField, PauliField) {
        let [a, b, c, d] = self.comps;
        (
            PauliField { spec: self.spec, comps: [a, b] },
            PauliField { spec: self.spec, comps: [c, d] },
        )
    }

    pub fn upper(&self) -> PauliField {
        PauliField {
            spec: self.spec,
            comps: [self.comps[0].clone(), self.comps[1].clone()],
        }
    }

    pub fn lower(&self) -> PauliField {
        PauliField {
            spec: self.spec,
            comps: [self.comps[2].clone(), self.comps[3].clone()],
        }
    }
}

/// Parameters of a Gaussian test packet
/// exp(−|x − c|²/(2w²) + i p₀·x) ⊗ polarization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub center: [f64; 3],
    pub width: f64,
    pub boost: [f64; 3],
}

impl PacketSpec {
    /// Largest relative amplitude the packet leaves on the box faces, per axis.
    pub fn position_tail(&self, spec: &GridSpec) -> f64 {
        let half = 0.5 * spec.box_length;
        self.center
            .iter()
            .map(|c| {
                let d = half - c.abs();
                if d <= 0.0 {
                    1.0
                } else {
                    (-d * d / (2.0 * self.width * self.width)).exp()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Relative amplitude of the momentum profile at the sampled band edge.
    pub fn momentum_tail(&self, spec: &GridSpec) -> f64 {
        let edge = spec.nyquist();
        self.boost
            .iter()
            .map(|p| {
                let d = edge - p.abs();
                if d <= 0.0 {
                    1.0
                } else {
                    (-0.5 * d * d * self.width * self.width).exp()
                }
            })
            .fold(0.0, f64::max)
    }
}

fn packet_profile(grid: &Grid, packet: &PacketSpec) -> Vec<C64> {
    let inv = 1.0 / (2.0 * packet.width * packet.width);
    (0..grid.spec().len())
        .map(|idx| {
            let x = grid.position(idx);
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for a in 0..3 {
                let d = x[a] - packet.center[a];
                r2 += d * d;
                phase += packet.boost[a] * x[a];
            }
            C64::from_polar((-r2 * inv).exp(), phase)
        })
        .collect()
}

/// Normalised C-component Gaussian packet. Rejects packets whose position
/// tail at the box boundary exceeds [`PACKET_TAIL_BOUND`].
pub fn gaussian_packet<const C: usize>(
    grid: &Grid,
    packet: &PacketSpec,
    polarization: [C64; C],
) -> Result<Field<C>, GridError> {
    let spec = *grid.spec();
    if !(packet.width > 0.0 && packet.width.is_finite()) {
        return Err(GridError::InvalidPacket(format!("width {} must be positive", packet.width)));
    }
    let pol_norm = polarization.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(pol_norm > 0.0 && pol_norm.is_finite()) {
        return Err(GridError::InvalidPacket("polarization must be nonzero".into()));
    }
    let tail = packet.position_tail(&spec);
    if tail >= PACKET_TAIL_BOUND {
        return Err(GridError::TailBound {
            space: "position",
            tail,
            bound: PACKET_TAIL_BOUND,
        });
    }
    let profile = packet_profile(grid, packet);
    let field = Field {
        spec,
        comps: polarization.map(|pol| profile.iter().map(|z| z * pol).collect()),
    };
    let norm = field.norm();
    Ok(field.scale(C64::new(1.0 / norm, 0.0)))
}

const DUMP_MAGIC: &[u8; 4] = b"SPFD";
const DUMP_VERSION: u32 = 1;

/// Writes a field as header (magic, version, dims, box, offsets, component
/// count) followed by little-endian (re, im) doubles, component-major, row-major.
pub fn write_dump<const C: usize, W: Write>(field: &Field<C>, mut out: W) -> Result<(), GridError> {
    let spec = field.spec;
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    for _ in 0..3 {
        out.write_all(&(spec.points_per_axis as u32).to_le_bytes())?;
    }
    out.write_all(&spec.box_length.to_le_bytes())?;
    out.write_all(&[u8::from(spec.position_offset), u8::from(spec.momentum_offset)])?;
    out.write_all(&(C as u32).to_le_bytes())?;
    for z in field.comps.iter().flatten() {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, GridError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, GridError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_dump<const C: usize, R: Read>(mut input: R) -> Result<Field<C>, GridError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(GridError::Format("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != DUMP_VERSION {
        return Err(GridError::Format(format!("unsupported version {version}")));
    }
    let dims = [read_u32(&mut input)?, read_u32(&mut input)?, read_u32(&mut input)?];
    if dims[0] != dims[1] || dims[1] != dims[2] {
        return Err(GridError::Format(format!("non-cubic dims {dims:?}")));
    }
    let box_length = read_f64(&mut input)?;
    let mut flags = [0u8; 2];
    input.read_exact(&mut flags)?;
    let comps = read_u32(&mut input)? as usize;
    if comps != C {
        return Err(GridError::Format(format!("expected {C} components, found {comps}")));
    }
    let spec = GridSpec::with_offsets(dims[0] as usize, box_length, flags[0] != 0, flags[1] != 0)?;
    let mut field = Field::<C>::zeros(spec);
    for z in field.comps.iter_mut().flatten() {
        *z = C64::new(read_f64(&mut input)?, read_f64(&mut input)?);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field<const C: usize>(spec: GridSpec, seed: u64) -> Field<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::<C>::zeros(spec);
        for z in f.comps.iter_mut().flatten() {
            *z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        f
    }

    /// Direct O(N²) offset DFT along each axis, for one scalar component.
    fn naive_forward(spec: &GridSpec, data: &[C64]) -> Vec<C64> {
        let n = spec.points_per_axis;
        let x = spec.position_axis();
        let p = spec.momentum_axis();
        let mut cur = data.to_vec();
        let strides = [n * n, n, 1];
        for stride in strides {
            let mut next = vec![C64::new(0.0, 0.0); cur.len()];
            for (idx, out) in next.iter_mut().enumerate() {
                let j = (idx / stride) % n;
                let base = idx - j * stride;
                *out = (0..n)
                    .map(|i| cur[base + i * stride] * C64::from_polar(1.0, -p[j] * x[i]))
                    .sum::<C64>()
                    / (n as f64).sqrt();
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn rejects_odd_and_small_grids() {
        assert!(GridSpec::new(15, 10.0).is_err());
        assert!(GridSpec::new(8, 10.0).is_err());
        assert!(GridSpec::new(17, 10.0).is_err());
        assert!(GridSpec::new(16, 0.0).is_err());
        assert!(GridSpec::new(48, 10.0).is_ok());
    }

    #[test]
    fn fast_transform_matches_direct_sum() {
        for (pos, mom) in [(true, true), (false, true), (true, false), (false, false)] {
            let spec = GridSpec::with_offsets(16, 7.0, pos, mom).unwrap();
            let grid = Grid::new(spec);
            let f = random_field::<1>(spec, 3);
            let mut fast = f.component(0).to_vec();
            grid.forward_scalar(&mut fast);
            let slow = naive_forward(&spec, f.component(0));
            let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "offsets ({pos}, {mom}): {err}");
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let spec = GridSpec::new(24, 9.0).unwrap();
        let grid = Grid::new(spec);
        let f = random_field::<4>(spec, 11);
        let g = grid.to_momentum(&f).unwrap();
        assert!((g.norm() - f.norm()).abs() <= 1e-13 * f.norm());
        let back = grid.to_position(&g).unwrap();
        assert!((&back - &f).norm() <= 1e-13 * f.norm());
    }

    #[test]
    fn offset_plane_wave_is_a_single_mode() {
        let spec = GridSpec::new(16, 5.0).unwrap();
        let grid = Grid::new(spec);
        let target = [3usize, 9, 14];
        let p = spec.momentum_axis();
        let data: Vec<C64> = (0..spec.len())
            .map(|idx| {
                let x = grid.position(idx);
                C64::from_polar(1.0, p[target[0]] * x[0] + p[target[1]] * x[1] + p[target[2]] * x[2])
            })
            .collect();
        let f = ScalarField::from_components(spec, [data]).unwrap();
        let g = grid.to_momentum(&f).unwrap();
        let n = spec.points_per_axis;
        let peak_idx = (target[0] * n + target[1]) * n + target[2];
        let peak = g.component(0)[peak_idx].norm();
        assert!((peak - (spec.len() as f64).sqrt()).abs() < 1e-9);
        let leak = g
            .component(0)
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != peak_idx)
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        assert!(leak < 1e-12 * peak, "{leak}");
    }

    #[test]
    fn offsets_exclude_origin_samples() {
        let spec = GridSpec::new(16, 8.0).unwrap();
        let grid = Grid::new(spec);
        let h = spec.spacing();
        assert!((grid.min_radius() - 0.5 * h * 3f64.sqrt()).abs() < 1e-12);
        let dk = spec.mode_spacing();
        assert!((grid.min_momentum() - 0.5 * dk * 3f64.sqrt()).abs() < 1e-12);
        assert!(grid.min_momentum() >= 0.5 * dk);

        let plain = Grid::new(GridSpec::with_offsets(16, 8.0, false, false).unwrap());
        assert_eq!(plain.min_radius(), 0.0);
        assert_eq!(plain.min_momentum(), 0.0);
    }

    #[test]
    fn packet_is_normalised_and_tail_checked() {
        let spec = GridSpec::new(32, 20.0).unwrap();
        let grid = Grid::new(spec);
        let packet = PacketSpec {
            center: [1.0, -0.5, 0.3],
            width: 1.1,
            boost: [0.4, 0.0, -0.2],
        };
        // Amplitude at the closest face: exp(−(10 − 1)²/(2·1.21)) ≈ 3e-15.
        assert!(packet.position_tail(&spec) < 1e-14);
        let pol = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0)];
        let f: DiracField = gaussian_packet(&grid, &packet, pol).unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-12);
        let n = spec.points_per_axis;
        let boundary = (0..spec.len())
            .filter(|&idx| spec.split_index(idx).iter().any(|&i| i == 0 || i == n - 1))
            .map(|idx| (0..4).map(|c| f.component(c)[idx].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert!(boundary < 1e-11, "{boundary}");
        assert_eq!(f, gaussian_packet(&grid, &packet, pol).unwrap());

        let wide = PacketSpec { width: 3.0, ..packet };
        assert!(matches!(
            gaussian_packet::<4>(&grid, &wide, pol),
            Err(GridError::TailBound { .. })
        ));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = Field::<2>::zeros(GridSpec::new(16, 8.0).unwrap());
        let b = Field::<2>::zeros(GridSpec::new(16, 9.0).unwrap());
        assert!(matches!(a.inner(&b), Err(GridError::ShapeMismatch { .. })));
        let grid = Grid::new(GridSpec::new(16, 9.0).unwrap());
        assert!(grid.to_momentum(&a).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let spec = GridSpec::new(16, 4.5).unwrap();
        let f = random_field::<4>(spec, 5);
        let mut bytes = Vec::new();
        write_dump(&f, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 4 + 4 + 12 + 8 + 2 + 4 + 16 * 4 * spec.len());
        let g: DiracField = read_dump(bytes.as_slice()).unwrap();
        assert_eq!(f, g);
        assert!(read_dump::<2, _>(bytes.as_slice()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn transform_is_unitary(seed in any::<u64>(), n in prop::sample::select(vec![16usize, 18, 20])) {
            let spec = GridSpec::new(n, 6.0).unwrap();
            let grid = Grid::new(spec);
            let f = random_field::<2>(spec, seed);
            let g = grid.to_momentum(&f).unwrap();
            prop_assert!((g.norm() - f.norm()).abs() <= 1e-13 * f.norm());
            let back = grid.to_position(&g).unwrap();
            prop_assert!((&back - &f).norm() <= 1e-13 * f.norm());
            // Same input, same bits.
            prop_assert_eq!(g, grid.to_momentum(&f).unwrap());
        }

        #[test]
        fn inner_product_axioms(seed in any::<u64>()) {
            let spec = GridSpec::new(16, 6.0).unwrap();
            let f = random_field::<4>(spec, seed);
            let g = random_field::<4>(spec, seed.wrapping_add(1));
            let fg = f.inner(&g).unwrap();
            let gf = g.inner(&f).unwrap();
            prop_assert!((fg - gf.conj()).norm() <= 1e-12 * fg.norm().max(1.0));
            let ff = f.inner(&f).unwrap();
            prop_assert!(ff.re >= 0.0 && ff.im.abs() <= 1e-12 * ff.re);
            prop_assert!(fg.norm() <= f.norm() * g.norm() * (1.0 + 1e-12));
        }
    }
}
