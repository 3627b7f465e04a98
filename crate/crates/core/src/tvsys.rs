//! Time-varying linear systems: polynomial matrix families, the generalized
//! Kalman sequence with its rank test, and resolvents of `dR/dt = M(t) R`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

pub type Mat = DMatrix<f64>;

/// Steps per unit time used when a caller does not pick a step count.
pub const DEFAULT_STEPS_PER_UNIT: f64 = 2048.0;
/// Relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Square matrix whose entries are polynomials in `t`; `coeffs[k]` multiplies `t^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPoly {
    dim: usize,
    coeffs: Vec<Mat>,
}

impl MatrixPoly {
    pub fn new(dim: usize, coeffs: Vec<Mat>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        for (k, c) in coeffs.iter().enumerate() {
            if c.nrows() != dim || c.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {k} is {}x{}, expected {dim}x{dim}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("coefficient {k}")));
            }
        }
        let mut coeffs = coeffs;
        if coeffs.is_empty() {
            coeffs.push(Mat::zeros(dim, dim));
        }
        Ok(Self { dim, coeffs })
    }

    pub fn constant(m: Mat) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "constant matrix polynomial must be square");
        Self { dim: m.nrows(), coeffs: vec![m] }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, coeffs: vec![Mat::zeros(dim, dim)] }
    }

    /// Build from row-major coefficient slices.
    pub fn from_row_slices(dim: usize, coeffs: &[&[f64]]) -> Result<Self> {
        let mut mats = Vec::with_capacity(coeffs.len());
        for (k, c) in coeffs.iter().enumerate() {
            if c.len() != dim * dim {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {k} has {} entries, expected {}",
                    c.len(),
                    dim * dim
                )));
            }
            mats.push(Mat::from_row_slice(dim, dim, c));
        }
        Self::new(dim, mats)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[Mat] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    /// Horner evaluation.
    pub fn eval(&self, t: f64) -> Mat {
        let mut acc = self.coeffs[self.coeffs.len() - 1].clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc *= t;
            acc += c;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero(self.dim);
        }
        let coeffs = self.coeffs[1..]
            .iter()
            .enumerate()
            .map(|(k, c)| c * (k as f64 + 1.0))
            .collect();
        Self { dim: self.dim, coeffs }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = Mat::zeros(self.dim, self.dim);
        let coeffs = (0..n)
            .map(|k| self.coeffs.get(k).unwrap_or(&zero) + other.coeffs.get(k).unwrap_or(&zero))
            .collect();
        Ok(Self { dim: self.dim, coeffs })
    }

    /// Polynomial matrix product `self * other`, exact in the coefficients.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![Mat::zeros(self.dim, self.dim); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Ok(Self { dim: self.dim, coeffs })
    }

    /// Right multiplication of every coefficient by a fixed matrix.
    pub fn mul_right(&self, m: &Mat) -> Result<Self> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch("right factor".into()));
        }
        Ok(Self { dim: self.dim, coeffs: self.coeffs.iter().map(|c| c * m).collect() })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// The family `t ↦ P(offset + sign·t)`, re-expanded in powers of `t`.
    pub fn reparametrize(&self, offset: f64, sign: f64) -> Self {
        // Horner on polynomials: acc = acc·(offset + sign·t) + c
        let lin = Self {
            dim: self.dim,
            coeffs: vec![Mat::identity(self.dim, self.dim) * offset, Mat::identity(self.dim, self.dim) * sign],
        };
        let mut acc = Self::constant(self.coeffs[self.coeffs.len() - 1].clone());
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(&lin).expect("same dim").add(&Self::constant(c.clone())).expect("same dim");
        }
        acc
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixPolyWire {
    dim: usize,
    coeffs: Vec<Vec<f64>>,
}

impl Serialize for MatrixPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| c.transpose().as_slice().to_vec())
            .collect();
        MatrixPolyWire { dim: self.dim, coeffs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatrixPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = MatrixPolyWire::deserialize(d)?;
        let refs: Vec<&[f64]> = w.coeffs.iter().map(|c| c.as_slice()).collect();
        MatrixPoly::from_row_slices(w.dim, &refs).map_err(serde::de::Error::custom)
    }
}

pub fn poly_eval(p: &MatrixPoly, t: f64) -> Mat {
    p.eval(t)
}

pub fn poly_derivative(p: &MatrixPoly) -> MatrixPoly {
    p.derivative()
}

pub fn default_k_max(dim: usize) -> usize {
    4 * dim
}

/// `out[0] = A`, `out[k+1] = out[k]' + B·out[k]`.
pub fn kalman_sequence(a: &MatrixPoly, b: &MatrixPoly, k_max: usize) -> Result<Vec<MatrixPoly>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("A is {0}x{0}, B is {1}x{1}", a.dim(), b.dim())));
    }
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(a.clone());
    for k in 0..k_max {
        let next = out[k].derivative().add(&b.mul(&out[k])?)?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KalmanRank {
    pub rank: usize,
    pub holds: bool,
    pub singular_values: Vec<f64>,
}

/// Rank of `[Ã_0(t), …, Ã_kmax(t)]` with threshold `tol·σ_max`.
pub fn kalman_rank_at(seq: &[MatrixPoly], t: f64, tol: f64) -> Result<KalmanRank> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let d = seq[0].dim();
    let mut stacked = Mat::zeros(d, d * seq.len());
    for (k, p) in seq.iter().enumerate() {
        stacked.view_mut((0, k * d), (d, d)).copy_from(&p.eval(t));
    }
    let mut sv: Vec<f64> = stacked.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = if smax > 0.0 { sv.iter().filter(|&&s| s > tol * smax).count() } else { 0 };
    Ok(KalmanRank { rank, holds: rank == d, singular_values: sv })
}

pub fn default_steps(t0: f64, t1: f64) -> usize {
    ((t1 - t0).abs() * DEFAULT_STEPS_PER_UNIT).ceil().max(1.0) as usize
}

fn rk4_step<F: Fn(f64) -> Mat>(m: &F, t: f64, h: f64, r: &Mat) -> Mat {
    let m0 = m(t);
    let mh = m(t + 0.5 * h);
    let m1 = m(t + h);
    let k1 = &m0 * r;
    let k2 = &mh * (r + &k1 * (0.5 * h));
    let k3 = &mh * (r + &k2 * (0.5 * h));
    let k4 = &m1 * (r + &k3 * h);
    r + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// `R(t1, t0)` for `∂R/∂t = M(t) R`, classical RK4 on a uniform grid.
/// Reversed integration (`t1 < t0`) uses negative steps.
pub fn resolvent<F: Fn(f64) -> Mat>(m: F, t0: f64, t1: f64, steps: usize) -> Result<Mat> {
    if steps == 0 {
        return Err(invalid("steps", "must be at least 1"));
    }
    let d = m(t0).nrows();
    let h = (t1 - t0) / steps as f64;
    let mut r = Mat::identity(d, d);
    for i in 0..steps {
        r = rk4_step(&m, t0 + i as f64 * h, h, &r);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("resolvent step {i}")));
        }
    }
    Ok(r)
}

pub type TimeMatrixFn = Arc<dyn Fn(f64) -> Mat + Send + Sync>;

/// Stored transition matrices `Φ(t_i) = R(t_i, t_start)` on a uniform grid.
#[derive(Clone)]
pub struct FlowResolvent {
    dim: usize,
    system: TimeMatrixFn,
    grid: Vec<f64>,
    phi: Vec<Mat>,
}

impl fmt::Debug for FlowResolvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowResolvent")
            .field("dim", &self.dim)
            .field("t_start", &self.grid[0])
            .field("t_end", &self.grid[self.grid.len() - 1])
            .field("nodes", &self.grid.len())
            .finish()
    }
}

impl FlowResolvent {
    pub fn new(system: TimeMatrixFn, t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        if !(t_end > t_start) {
            return Err(invalid("t_end", "grid must be strictly increasing"));
        }
        let dim = system(t_start).nrows();
        let h = (t_end - t_start) / steps as f64;
        let mut grid = Vec::with_capacity(steps + 1);
        let mut phi = Vec::with_capacity(steps + 1);
        let mut r = Mat::identity(dim, dim);
        grid.push(t_start);
        phi.push(r.clone());
        for i in 0..steps {
            let t = t_start + i as f64 * h;
            r = rk4_step(&|s| system(s), t, h, &r);
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("resolvent step {i}")));
            }
            grid.push(if i + 1 == steps { t_end } else { t_start + (i + 1) as f64 * h });
            phi.push(r.clone());
        }
        Ok(Self { dim, system, grid, phi })
    }

    pub fn from_poly(m: &MatrixPoly, t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        let m = m.clone();
        Self::new(Arc::new(move |t| m.eval(t)), t_start, t_end, steps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn system(&self) -> &TimeMatrixFn {
        &self.system
    }

    /// `R(t, t_start)`; off-grid times take one partial RK4 step from the node below.
    pub fn phi_at(&self, t: f64) -> Mat {
        let n = self.grid.len() - 1;
        let (a, b) = (self.grid[0], self.grid[n]);
        let t = t.clamp(a, b);
        let h = (b - a) / n as f64;
        let i = (((t - a) / h).floor() as usize).min(n);
        let dt = t - self.grid[i];
        if dt.abs() <= 1e-14 * h.max(1.0) {
            return self.phi[i].clone();
        }
        rk4_step(&|s| (self.system)(s), self.grid[i], dt, &self.phi[i])
    }

    /// `R(t1, t0) = Φ(t1) Φ(t0)^{-1}`.
    pub fn between(&self, t1: f64, t0: f64) -> Mat {
        let p1 = self.phi_at(t1);
        let p0 = self.phi_at(t0);
        let inv = p0.clone().try_inverse().unwrap_or_else(|| {
            p0.pseudo_inverse(1e-300).expect("pseudo-inverse")
        });
        p1 * inv
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiouvilleCheck {
    pub det_r: f64,
    pub liouville: f64,
    pub residual: f64,
}

/// Compares `det R(t1,t0)` with `exp(∫ Tr M)`; the trace integral uses Simpson on each step.
pub fn flow_determinant_check<F: Fn(f64) -> Mat>(m: F, t0: f64, t1: f64, steps: usize) -> Result<LiouvilleCheck> {
    let r = resolvent(&m, t0, t1, steps)?;
    let h = (t1 - t0) / steps as f64;
    let mut integral = 0.0;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        integral += h / 6.0 * (m(t).trace() + 4.0 * m(t + 0.5 * h).trace() + m(t + h).trace());
    }
    let det_r = r.determinant();
    let liouville = integral.exp();
    let residual = (det_r - liouville).abs() / liouville.abs().max(f64::MIN_POSITIVE);
    Ok(LiouvilleCheck { det_r, liouville, residual })
}

/// Matrix exponential of a small dense real matrix.
pub fn expm(m: &Mat) -> Mat {
    m.clone().exp()
}
