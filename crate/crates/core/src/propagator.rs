//! Fourier-side propagation of (possibly time-varying) Ornstein-Uhlenbeck
//! equations, Gaussian closed-form solutions, frequency cutoffs and
//! dissipation exponents.
//!
//! Every equation is brought to the contraction form
//! `∂t g = ½Tr(ÃÃᵀ∇²)g − ⟨B̃x,∇g⟩ − ½Tr(B̃) g`, whose transform
//! (`ĝ(ξ) = ∫ g(x) e^{−ix·ξ} dx`) is propagated along characteristics.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tvsys::{Mat, MatrixPoly, DEFAULT_STEPS_PER_UNIT};

pub const DEFAULT_N_TIME: usize = 513;
pub const DEFAULT_WINDOW: f64 = 0.5;
pub const DEFAULT_OUT_OF_BAND: f64 = 0.5;
pub const NORMALIZATION: &str = "khat(xi) = int k(x) exp(-i x.xi) dx; L2 norm = (2pi)^(-d/2) |khat|";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `∂t f = ½Tr(AAᵀ∇²)f + ⟨Bx,∇f⟩ + ½Tr(B) f`, coefficients at `t`.
    Forward,
    /// The adjoint system with coefficients at `T − t`.
    Adjoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OUSpec {
    pub a: MatrixPoly,
    pub b: MatrixPoly,
    pub horizon: f64,
    pub orientation: Orientation,
}

impl OUSpec {
    pub fn new(a: MatrixPoly, b: MatrixPoly, horizon: f64, orientation: Orientation) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch(format!("A is {0}x{0}, B is {1}x{1}", a.dim(), b.dim())));
        }
        if !(horizon > 0.0) {
            return Err(invalid("horizon", "must be positive"));
        }
        Ok(Self { a, b, horizon, orientation })
    }

    /// `A = √2·I`, `B = 0`.
    pub fn heat(d: usize, horizon: f64) -> Self {
        Self::new(
            MatrixPoly::constant(Mat::identity(d, d) * 2f64.sqrt()),
            MatrixPoly::zero(d),
            horizon,
            Orientation::Adjoint,
        )
        .expect("valid")
    }

    /// `A = diag(0, √2)`, `B = [[0,−1],[0,0]]`.
    pub fn kolmogorov(horizon: f64) -> Self {
        Self::new(
            MatrixPoly::constant(Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2f64.sqrt()])),
            MatrixPoly::constant(Mat::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0])),
            horizon,
            Orientation::Adjoint,
        )
        .expect("valid")
    }

    /// `A = diag(0, √2)`, `B = [[0,−1],[1,0]]`.
    pub fn rotation(horizon: f64) -> Self {
        Self::new(
            MatrixPoly::constant(Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2f64.sqrt()])),
            MatrixPoly::constant(Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])),
            horizon,
            Orientation::Adjoint,
        )
        .expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Diffusion factor `Ã(t)` of the contraction form.
    pub fn a_eff(&self, t: f64) -> Mat {
        match self.orientation {
            Orientation::Forward => self.a.eval(t),
            Orientation::Adjoint => self.a.eval(self.horizon - t),
        }
    }

    /// Drift `B̃(t)` of the contraction form.
    pub fn b_eff(&self, t: f64) -> Mat {
        match self.orientation {
            Orientation::Forward => -self.b.eval(t),
            Orientation::Adjoint => self.b.eval(self.horizon - t),
        }
    }

    /// `R̃(t1, t0)` solving `∂R̃/∂t1 = B̃(t1) R̃`.
    pub fn resolvent(&self, t1: f64, t0: f64) -> Mat {
        let steps = crate::tvsys::default_steps(t0, t1);
        crate::tvsys::resolvent(|t| self.b_eff(t), t0, t1, steps).expect("polynomial drift stays finite")
    }
}

/// `X(s)` on `nodes` uniform nodes from `s_from` to `s_to`, with
/// `dX/ds = −X·B̃(s)` and `X(s_from) = I`; then `X(s) = R̃(s_from, s)`.
fn right_transport(spec: &OUSpec, s_from: f64, s_to: f64, nodes: usize) -> Vec<Mat> {
    let d = spec.dim();
    let intervals = (nodes - 1).max(1);
    let len = (s_to - s_from).abs();
    let refine = ((len * DEFAULT_STEPS_PER_UNIT) / intervals as f64).ceil().max(1.0) as usize;
    let h = (s_to - s_from) / (intervals * refine) as f64;
    let f = |s: f64, x: &Mat| -(x * spec.b_eff(s));
    let mut x = Mat::identity(d, d);
    let mut out = Vec::with_capacity(nodes);
    out.push(x.clone());
    let constant = spec.b.is_constant();
    let b0 = spec.b_eff(s_from);
    for i in 0..intervals {
        for j in 0..refine {
            let s = s_from + ((i * refine + j) as f64) * h;
            if constant {
                let k1 = -(&x * &b0);
                let k2 = -((&x + &k1 * (0.5 * h)) * &b0);
                let k3 = -((&x + &k2 * (0.5 * h)) * &b0);
                let k4 = -((&x + &k3 * h) * &b0);
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            } else {
                let k1 = f(s, &x);
                let k2 = f(s + 0.5 * h, &(&x + &k1 * (0.5 * h)));
                let k3 = f(s + 0.5 * h, &(&x + &k2 * (0.5 * h)));
                let k4 = f(s + h, &(&x + &k3 * h));
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
        }
        out.push(x.clone());
    }
    if nodes == 1 {
        out.truncate(1);
    }
    out
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n >= 2 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    } else {
        w[0] = 0.0;
    }
    w
}

/// `∫_{lo}^{hi} Tr B̃` by Simpson's rule on the default step grid.
fn trace_integral(spec: &OUSpec, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        return 0.0;
    }
    let steps = crate::tvsys::default_steps(lo, hi);
    let h = (hi - lo) / steps as f64;
    (0..steps)
        .map(|i| {
            let s = lo + i as f64 * h;
            h / 6.0 * (spec.b_eff(s).trace() + 4.0 * spec.b_eff(s + 0.5 * h).trace() + spec.b_eff(s + h).trace())
        })
        .sum()
}

/// Uniform frequency grid: axis `i` has `n[i]` samples on `[−K_i, K_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: Vec<f64>,
    pub n: Vec<usize>,
}

impl GridSpec {
    pub fn new(half_width: Vec<f64>, n: Vec<usize>) -> Result<Self> {
        if half_width.len() != n.len() || n.is_empty() {
            return Err(Error::DimensionMismatch("grid half_width vs n".into()));
        }
        if n.iter().any(|&k| k < 2) || half_width.iter().any(|&k| !(k > 0.0)) {
            return Err(invalid("grid", "need N ≥ 2 and K > 0 per axis"));
        }
        Ok(Self { half_width, n })
    }

    /// `K=32, N=256` in 1D; `K=16, N=128` otherwise.
    pub fn default_for(d: usize) -> Self {
        if d == 1 {
            Self { half_width: vec![32.0], n: vec![256] }
        } else {
            Self { half_width: vec![16.0; d], n: vec![128; d] }
        }
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / (self.n[axis] - 1) as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).product()
    }

    /// Frequency of flat index `idx` (row-major, last axis fastest).
    pub fn xi(&self, mut idx: usize, out: &mut [f64]) {
        for axis in (0..self.dim()).rev() {
            let j = idx % self.n[axis];
            idx /= self.n[axis];
            out[axis] = -self.half_width[axis] + j as f64 * self.spacing(axis);
        }
    }
}

/// Samples of a Fourier transform on a uniform grid of `[−K, K]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    samples: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!("{} samples for a grid of {}", samples.len(), grid.len())));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("field samples".into()));
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64 + Sync) -> Self {
        let d = grid.dim();
        let samples = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut xi = vec![0.0; d];
                grid.xi(i, &mut xi);
                f(&xi)
            })
            .collect();
        Self { grid, samples }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// `(2π)^{−d/2} (Σ |k̂|² ΔV)^{1/2}`.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        ((2.0 * PI).powi(-(self.dim() as i32)) * s * self.grid.cell_volume()).sqrt()
    }

    /// Relative L² distance `‖self − other‖ / ‖other‖` on a shared grid.
    pub fn relative_distance(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("fields live on different grids".into()));
        }
        let num: f64 = self.samples.iter().zip(&other.samples).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = other.samples.iter().map(|z| z.norm_sqr()).sum();
        Ok((num / den).sqrt())
    }

    /// Multilinear interpolation; `None` outside the grid box.
    pub fn interpolate(&self, xi: &[f64]) -> Option<Complex64> {
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let k = self.grid.half_width[a];
            if !(xi[a] >= -k && xi[a] <= k) {
                return None;
            }
            let pos = (xi[a] + k) / self.grid.spacing(a);
            let j = (pos.floor() as usize).min(self.grid.n[a] - 2);
            base[a] = j;
            frac[a] = pos - j as f64;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * self.grid.n[a] + base[a] + bit;
            }
            if w != 0.0 {
                acc += self.samples[flat] * w;
            }
        }
        Some(acc)
    }

    /// CSV with a normalization comment, one row per sample: `xi_0..xi_{d-1},re,im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "# normalization: {NORMALIZATION}")?;
        let d = self.dim();
        let header: Vec<String> = (0..d).map(|i| format!("xi_{i}")).chain(["re".into(), "im".into()]).collect();
        writeln!(w, "{}", header.join(","))?;
        let mut xi = vec![0.0; d];
        for (i, z) in self.samples.iter().enumerate() {
            self.grid.xi(i, &mut xi);
            let coords: Vec<String> = xi.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{},{:e},{:e}", coords.join(","), z.re, z.im)?;
        }
        Ok(())
    }

    /// Binary layout: `b"HCSF"`, u32 version, u32 d, per axis (u64 N, f64 K),
    /// then row-major samples as (f64 re, f64 im); all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"HCSF")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for a in 0..self.dim() {
            w.write_all(&(self.grid.n[a] as u64).to_le_bytes())?;
            w.write_all(&self.grid.half_width[a].to_le_bytes())?;
        }
        for z in &self.samples {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        if &b4 != b"HCSF" {
            return Err(invalid("binary", "bad magic"));
        }
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(invalid("binary", "unsupported version"));
        }
        r.read_exact(&mut b4)?;
        let d = u32::from_le_bytes(b4) as usize;
        let (mut n, mut k) = (Vec::with_capacity(d), Vec::with_capacity(d));
        for _ in 0..d {
            r.read_exact(&mut b8)?;
            n.push(u64::from_le_bytes(b8) as usize);
            r.read_exact(&mut b8)?;
            k.push(f64::from_le_bytes(b8));
        }
        let grid = GridSpec::new(k, n)?;
        let mut samples = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            samples.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        Self::new(grid, samples)
    }
}

#[derive(Clone)]
pub struct SpectralFn(pub Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>);

impl fmt::Debug for SpectralFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SpectralFn(..)")
    }
}

/// Initial datum, given on the Fourier side.
#[derive(Clone, Debug)]
pub enum FieldInit {
    /// `g₀(x) = exp(−|x−z|²/(2α))`.
    Gaussian { center: Vec<f64>, alpha: f64 },
    /// Exact transform `k̂₀(ξ)`.
    Function(SpectralFn),
    /// Sampled transform, interpolated at warped frequencies.
    Grid(SpectralField),
}

impl FieldInit {
    pub fn function(f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        FieldInit::Function(SpectralFn(Arc::new(f)))
    }

    fn eval(&self, xi: &[f64]) -> Option<Complex64> {
        match self {
            FieldInit::Gaussian { center, alpha } => Some(gaussian_transform(center, *alpha, xi)),
            FieldInit::Function(f) => Some((f.0)(xi)),
            FieldInit::Grid(g) => g.interpolate(xi),
        }
    }

    pub fn sample(&self, grid: &GridSpec) -> SpectralField {
        match self {
            FieldInit::Grid(g) if g.grid() == grid => g.clone(),
            _ => SpectralField::from_fn(grid.clone(), |xi| self.eval(xi).unwrap_or_default()),
        }
    }
}

/// `(2πα)^{d/2} e^{−α|ξ|²/2} e^{−iz·ξ}`.
pub fn gaussian_transform(center: &[f64], alpha: f64, xi: &[f64]) -> Complex64 {
    let d = xi.len() as f64;
    let n2: f64 = xi.iter().map(|v| v * v).sum();
    let phase: f64 = center.iter().zip(xi).map(|(z, x)| z * x).sum();
    Complex64::from_polar((2.0 * PI * alpha).powf(d / 2.0) * (-0.5 * alpha * n2).exp(), -phase)
}

#[derive(Clone, Debug)]
pub struct Propagation {
    pub field: SpectralField,
    /// Number of warped frequencies that fell outside a grid datum.
    pub out_of_grid: usize,
    /// `R̃(t1, t0)`.
    pub transition: Mat,
    /// `∫ R̃(t1,s) ÃÃᵀ R̃(t1,s)ᵀ ds`.
    pub exponent: Mat,
    pub trace_integral: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagateOptions {
    pub n_time: usize,
    pub out_of_band_threshold: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self { n_time: DEFAULT_N_TIME, out_of_band_threshold: DEFAULT_OUT_OF_BAND }
    }
}

/// `k̂(t1,ξ) = k̂₀(R̃(t1,t0)ᵀξ)·exp(½∫Tr B̃)·exp(−½∫|ÃᵀR̃(t1,s)ᵀξ|² ds)`.
/// Functional data is sampled on `grid`; grid data keeps its own grid.
pub fn propagate_fourier(
    spec: &OUSpec,
    init: &FieldInit,
    t0: f64,
    t1: f64,
    grid: &GridSpec,
    opts: PropagateOptions,
) -> Result<Propagation> {
    if !(t0 <= t1) || t0 < 0.0 || t1 > spec.horizon + 1e-12 {
        return Err(invalid("t0/t1", format!("need 0 ≤ t0 ≤ t1 ≤ T, got {t0}, {t1}")));
    }
    if opts.n_time == 0 {
        return Err(invalid("n_time", "must be at least 1"));
    }
    let grid = match init {
        FieldInit::Grid(g) => g.grid().clone(),
        _ => grid.clone(),
    };
    if grid.dim() != spec.dim() {
        return Err(Error::DimensionMismatch("grid vs system".into()));
    }
    let d = spec.dim();
    let nodes = opts.n_time.max(2);
    let xs = right_transport(spec, t1, t0, nodes);
    let h = (t1 - t0) / (nodes - 1) as f64;
    let w = trapezoid_weights(nodes, h);
    let mut exponent = Mat::zeros(d, d);
    for (i, x) in xs.iter().enumerate() {
        let s = t1 - i as f64 * h;
        let xa = x * spec.a_eff(s);
        exponent += &xa * xa.transpose() * w[i];
    }
    let exponent = (&exponent + exponent.transpose()) * 0.5;
    let transition = xs[nodes - 1].clone();
    let tr = trace_integral(spec, t0, t1);
    let rt = transition.transpose();
    let out: Vec<(Complex64, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut xi = vec![0.0; d];
            grid.xi(i, &mut xi);
            let v = DVector::from_column_slice(&xi);
            let warped = &rt * &v;
            let damp = (0.5 * tr - 0.5 * (v.transpose() * &exponent * &v)[(0, 0)]).exp();
            match init.eval(warped.as_slice()) {
                Some(z) => (z * damp, false),
                None => (Complex64::new(0.0, 0.0), true),
            }
        })
        .collect();
    let out_of_grid = out.iter().filter(|p| p.1).count();
    let fraction = out_of_grid as f64 / grid.len() as f64;
    if fraction > opts.out_of_band_threshold {
        return Err(Error::OutOfBand { fraction, threshold: opts.out_of_band_threshold });
    }
    let field = SpectralField::new(grid, out.into_iter().map(|p| p.0).collect())?;
    Ok(Propagation { field, out_of_grid, transition, exponent, trace_integral: tr })
}

/// `(R̃(t1,t0), ∫_{t0}^{t1} R̃(t1,s)ÃÃᵀR̃(t1,s)ᵀ ds, ∫_{t0}^{t1} Tr B̃)`, the data of one propagation step.
pub fn step_data(spec: &OUSpec, t0: f64, t1: f64, n_time: usize) -> Result<(Mat, Mat, f64)> {
    if !(t0 <= t1) {
        return Err(invalid("t0/t1", "need t0 ≤ t1"));
    }
    let d = spec.dim();
    let nodes = n_time.max(2);
    let xs = right_transport(spec, t1, t0, nodes);
    let h = (t1 - t0) / (nodes - 1) as f64;
    let w = trapezoid_weights(nodes, h);
    let mut g = Mat::zeros(d, d);
    for (i, x) in xs.iter().enumerate() {
        let xa = x * spec.a_eff(t1 - i as f64 * h);
        g += &xa * xa.transpose() * w[i];
    }
    let g = (&g + g.transpose()) * 0.5;
    Ok((xs[nodes - 1].clone(), g, trace_integral(spec, t0, t1)))
}

/// `Q_t = ∫₀ᵗ R̃(0,s) Ã(s)Ã(s)ᵀ R̃(0,s)ᵀ ds`, trapezoid over `n_time` nodes.
pub fn gramian_qt(spec: &OUSpec, t: f64, n_time: usize) -> Result<Mat> {
    if !(t >= 0.0) || t > spec.horizon + 1e-12 {
        return Err(invalid("t", "must lie in [0, T]"));
    }
    let d = spec.dim();
    if t == 0.0 {
        return Ok(Mat::zeros(d, d));
    }
    let nodes = n_time.max(2);
    let xs = right_transport(spec, 0.0, t, nodes);
    let h = t / (nodes - 1) as f64;
    let w = trapezoid_weights(nodes, h);
    let mut q = Mat::zeros(d, d);
    for (i, x) in xs.iter().enumerate() {
        let xa = x * spec.a_eff(i as f64 * h);
        q += &xa * xa.transpose() * w[i];
    }
    Ok((&q + q.transpose()) * 0.5)
}

/// Closed-form evolution of `g₀(x) = exp(−|x−z|²/(2α))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianState {
    pub center: Vec<f64>,
    pub alpha: f64,
    pub t: f64,
    pub q_t: Mat,
    pub m_t: Mat,
    /// `R̃(0, t)`.
    pub r0t: Mat,
    /// `∫₀ᵗ Tr B̃`.
    pub trace_integral: f64,
    /// `α^{d/2}/√det M_t · exp(−½∫₀ᵗ Tr B̃)`.
    pub prefactor: f64,
    /// `∫|g(t)|² = α^d π^{d/2} / √det M_t`.
    pub l2_norm_sq: f64,
    m_inv: Mat,
}

impl GaussianState {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `g(t,x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let y = &self.r0t * DVector::from_column_slice(x) - DVector::from_column_slice(&self.center);
        self.prefactor * (-0.5 * (y.transpose() * &self.m_inv * &y)[(0, 0)]).exp()
    }

    /// `ĝ(t,ξ) = (2πα)^{d/2} e^{½∫Tr B̃} e^{−½ηᵀM_tη} e^{−iz·η}` with `η = R̃(t,0)ᵀξ`.
    pub fn fourier(&self, xi: &[f64]) -> Complex64 {
        let rt0 = self.r0t.clone().try_inverse().expect("resolvent is invertible");
        let eta = rt0.transpose() * DVector::from_column_slice(xi);
        let d = self.dim() as f64;
        let quad = (eta.transpose() * &self.m_t * &eta)[(0, 0)];
        let phase: f64 = self.center.iter().zip(eta.iter()).map(|(z, e)| z * e).sum();
        Complex64::from_polar(
            (2.0 * PI * self.alpha).powf(d / 2.0) * (0.5 * self.trace_integral - 0.5 * quad).exp(),
            -phase,
        )
    }

    /// Mean and covariance of the normalized density `|g(t,·)|² / ∫|g(t)|²`.
    pub fn density_moments(&self) -> (DVector<f64>, Mat) {
        let rt0 = self.r0t.clone().try_inverse().expect("resolvent is invertible");
        let mean = &rt0 * DVector::from_column_slice(&self.center);
        let cov = &rt0 * &self.m_t * rt0.transpose() * 0.5;
        (mean, (&cov + cov.transpose()) * 0.5)
    }
}

pub fn gaussian_solution(spec: &OUSpec, z: &[f64], alpha: f64, t: f64, n_time: usize) -> Result<GaussianState> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be positive"));
    }
    let d = spec.dim();
    if z.len() != d {
        return Err(Error::DimensionMismatch("center vs system".into()));
    }
    let q_t = gramian_qt(spec, t, n_time)?;
    let m_t = &q_t + Mat::identity(d, d) * alpha;
    let r0t = if t == 0.0 { Mat::identity(d, d) } else { right_transport(spec, 0.0, t, 2).pop().expect("two nodes") };
    let tr = trace_integral(spec, 0.0, t);
    let det = m_t.determinant();
    if !(det > 0.0) {
        return Err(Error::NonFinite("M_t is not positive definite".into()));
    }
    let m_inv = m_t.clone().try_inverse().ok_or_else(|| Error::NonFinite("M_t inverse".into()))?;
    let prefactor = alpha.powf(d as f64 / 2.0) / det.sqrt() * (-0.5 * tr).exp();
    let l2_norm_sq = alpha.powi(d as i32) * PI.powf(d as f64 / 2.0) / det.sqrt();
    Ok(GaussianState {
        center: z.to_vec(),
        alpha,
        t,
        q_t,
        m_t,
        r0t,
        trace_integral: tr,
        prefactor,
        l2_norm_sq,
        m_inv,
    })
}

/// Splits at the cube `[−k, k]^d` (max-norm); returns the low part and the Parseval norm of the rest.
pub fn project_low(f: &SpectralField, k: f64) -> Result<(SpectralField, f64)> {
    if !(k >= 0.0) {
        return Err(invalid("k", "must be non-negative"));
    }
    let d = f.dim();
    let mut low = f.samples.clone();
    let mut removed = 0.0;
    let mut xi = vec![0.0; d];
    for (i, z) in low.iter_mut().enumerate() {
        f.grid.xi(i, &mut xi);
        if xi.iter().any(|v| v.abs() > k) {
            removed += z.norm_sqr();
            *z = Complex64::new(0.0, 0.0);
        }
    }
    let residual = ((2.0 * PI).powi(-(d as i32)) * removed * f.grid.cell_volume()).sqrt();
    Ok((SpectralField { grid: f.grid.clone(), samples: low }, residual))
}

/// Unit directions: angular grid on a half circle in 2D, Fibonacci sphere otherwise.
pub fn sample_directions(d: usize, n_dir: usize) -> Vec<DVector<f64>> {
    match d {
        1 => vec![DVector::from_element(1, 1.0)],
        2 => (0..n_dir)
            .map(|i| {
                let th = PI * i as f64 / n_dir as f64;
                DVector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n_dir)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n_dir as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    let mut v = DVector::zeros(d);
                    v[0] = rho * th.cos();
                    v[1] = rho * th.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationFit {
    pub c_fit: f64,
    pub m1_fit: f64,
    /// `φ(τ) = min_{|ξ|=1} ξᵀQ_τξ`, the smallest eigenvalue.
    pub phi: Vec<f64>,
    /// Minimum over the sampled directions (an upper bound for `phi`).
    pub phi_sampled: Vec<f64>,
    /// Set when `φ(τ)` vanishes for some `τ`.
    pub degenerate: bool,
}

/// Fits `log φ(τ) = log c + m₁ log τ`.
pub fn dissipation_exponent(spec: &OUSpec, taus: &[f64], n_dir: usize, n_time: usize, window: f64) -> Result<DissipationFit> {
    if n_dir < 8 {
        return Err(invalid("n_dir", "need at least 8 directions"));
    }
    if taus.is_empty() || taus.iter().any(|&t| !(t > 0.0) || t > window) {
        return Err(invalid("taus", format!("must lie in (0, {window}]")));
    }
    let dirs = sample_directions(spec.dim(), n_dir);
    let mut phi = Vec::with_capacity(taus.len());
    let mut phi_sampled = Vec::with_capacity(taus.len());
    let mut degenerate = false;
    for &tau in taus {
        let q = gramian_qt(spec, tau, n_time)?;
        let sampled = dirs.iter().map(|v| (v.transpose() * &q * v)[(0, 0)]).fold(f64::INFINITY, f64::min);
        let eig = q.clone().symmetric_eigen().eigenvalues.min();
        let p = eig.min(sampled).max(0.0);
        if p <= f64::EPSILON * q.trace().abs() * 4.0 {
            degenerate = true;
        }
        phi.push(p);
        phi_sampled.push(sampled);
    }
    if degenerate {
        return Ok(DissipationFit { c_fit: 0.0, m1_fit: f64::INFINITY, phi, phi_sampled, degenerate });
    }
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = phi.iter().map(|p| p.ln()).collect();
    let (slope, intercept, _) = linear_fit(&xs, &ys);
    Ok(DissipationFit { c_fit: intercept.exp(), m1_fit: slope, phi, phi_sampled, degenerate })
}

/// Least squares `y ≈ a·x + b`; returns `(a, b, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let b = my - a * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (a, b, r2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DissipationCheck {
    pub lhs: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `‖(1−π_k) U(t,s) g‖ / ‖g‖` against `exp(−c₂(t−s)^{m₁}k²)`.
#[allow(clippy::too_many_arguments)]
pub fn dissipation_check(
    spec: &OUSpec,
    init: &FieldInit,
    s: f64,
    t: f64,
    k: f64,
    c2: f64,
    m1: f64,
    grid: &GridSpec,
    opts: PropagateOptions,
) -> Result<DissipationCheck> {
    let g0 = init.sample(grid);
    let n0 = g0.norm();
    if n0 == 0.0 {
        return Err(invalid("init", "zero initial norm"));
    }
    let p = propagate_fourier(spec, init, s, t, grid, opts)?;
    let (_, rest) = project_low(&p.field, k)?;
    let lhs = rest / n0;
    let bound = (-c2 * (t - s).powf(m1) * k * k).exp();
    Ok(DissipationCheck { lhs, bound, pass: lhs <= bound })
}
