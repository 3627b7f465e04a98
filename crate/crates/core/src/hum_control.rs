//! Null controls on periodic boxes by the Hilbert uniqueness method, control
//! cost sweeps, and Gaussian certificates against observability.
//!
//! The box `[−L/2, L/2)^d` is a periodic surrogate for `ℝ^d`. States are
//! physical samples; evolutions act on their transforms. With midpoint times
//! `t_i = (i+½)Δt`, the discrete control-to-state map is
//! `f(T) = U(T,0)f₀ + Σ Δt U(T,t_i) χ_i u_i`, and
//! `Λ = Σ Δt U(T,t_i) χ_i U(T,t_i)*` is its Gramian.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{gaussian_mass, MovingSupport};
use crate::propagator::{gaussian_solution, linear_fit, step_data, OUSpec};
use crate::tvsys::Mat;

pub const DEFAULT_CG_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 4000;
pub const STAGNATION_WINDOW: usize = 50;
pub const DEFAULT_GRADING: f64 = 2.0;
pub const DEFAULT_OBSTRUCTION_SLICES: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlModel {
    /// `∂t f = ∂²_x f + 1_ω u` on a torus of length `L` with `modes` grid points.
    Heat1D { length: f64, modes: usize },
    /// `∂t f = P f + 1_ω u` for the forward-orientation operator of `spec`,
    /// realized spectrally on `[−L/2, L/2)^d` with `n` points per axis. Approximate:
    /// warped frequencies are interpolated and those leaving the lattice are dropped.
    OUSpectral { spec: OUSpec, length: f64, n: usize },
}

impl ControlModel {
    pub fn dim(&self) -> usize {
        match self {
            ControlModel::Heat1D { .. } => 1,
            ControlModel::OUSpectral { spec, .. } => spec.dim(),
        }
    }

    fn grid(&self) -> (f64, usize) {
        match self {
            ControlModel::Heat1D { length, modes } => (*length, *modes),
            ControlModel::OUSpectral { length, n, .. } => (*length, *n),
        }
    }

    pub fn is_approximate(&self) -> bool {
        matches!(self, ControlModel::OUSpectral { .. })
    }
}

#[derive(Clone)]
enum StepMap {
    Diagonal(Vec<f64>),
    Warp { sources: Vec<Vec<(usize, f64)>>, damp: Vec<f64> },
}

impl StepMap {
    fn scaled(self, s: f64) -> Self {
        match self {
            StepMap::Diagonal(m) => StepMap::Diagonal(m.into_iter().map(|v| v * s).collect()),
            StepMap::Warp { sources, damp } => StepMap::Warp { sources, damp: damp.into_iter().map(|v| v * s).collect() },
        }
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        match self {
            StepMap::Diagonal(m) => v.iter().zip(m).map(|(z, w)| z * w).collect(),
            StepMap::Warp { sources, damp } => sources
                .iter()
                .zip(damp)
                .map(|(src, &dm)| src.iter().map(|&(k, w)| v[k] * w).sum::<Complex64>() * dm)
                .collect(),
        }
    }

    fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        match self {
            StepMap::Diagonal(m) => v.iter().zip(m).map(|(z, w)| z * w).collect(),
            StepMap::Warp { sources, damp } => {
                let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
                for (t, (src, &dm)) in sources.iter().zip(damp).enumerate() {
                    for &(k, w) in src {
                        out[k] += v[t] * (w * dm);
                    }
                }
                out
            }
        }
    }
}

struct Engine {
    d: usize,
    n: usize,
    length: f64,
    /// Lattice frequencies per flat index, in transform order.
    xi: Vec<Vec<f64>>,
    /// `e^{−i x₀·ξ}` per flat index, aligning the DFT with `∫ f e^{−ixξ}`.
    phase: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Engine {
    fn new(d: usize, n: usize, length: f64) -> Self {
        let total = n.pow(d as u32);
        let x0 = -0.5 * length;
        let mut xi = Vec::with_capacity(total);
        let mut phase = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut v = vec![0.0; d];
            for axis in (0..d).rev() {
                let k = rem % n;
                rem /= n;
                let signed = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
                v[axis] = 2.0 * PI * signed / length;
            }
            let s: f64 = v.iter().sum::<f64>() * x0;
            phase.push(Complex64::from_polar(1.0, -s));
            xi.push(v);
        }
        let mut planner = FftPlanner::new();
        Self { d, n, length, xi, phase, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn len(&self) -> usize {
        self.xi.len()
    }

    fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    fn point(&self, flat: usize) -> Vec<f64> {
        let mut rem = flat;
        let mut x = vec![0.0; self.d];
        for axis in (0..self.d).rev() {
            x[axis] = -0.5 * self.length + (rem % self.n) as f64 * self.spacing();
            rem /= self.n;
        }
        x
    }

    fn fft_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.d {
            let stride = n.pow((self.d - 1 - axis) as u32);
            for base in 0..data.len() {
                if (base / stride) % n != 0 {
                    continue;
                }
                for j in 0..n {
                    line[j] = data[base + j * stride];
                }
                plan.process(&mut line);
                for j in 0..n {
                    data[base + j * stride] = line[j];
                }
            }
        }
        let s = 1.0 / (data.len() as f64).sqrt();
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn to_coeffs(&self, phys: &[Complex64]) -> Vec<Complex64> {
        let mut c = phys.to_vec();
        self.fft_axes(&mut c, &self.fwd);
        c.iter_mut().zip(&self.phase).for_each(|(z, p)| *z *= p);
        c
    }

    fn to_phys(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = coeffs.iter().zip(&self.phase).map(|(z, p)| z * p.conj()).collect();
        self.fft_axes(&mut c, &self.inv);
        c
    }

    fn lattice_index(&self, k: &[i64]) -> Option<usize> {
        let n = self.n as i64;
        let (lo, hi) = (-(n / 2), (n - 1) / 2);
        let mut flat = 0usize;
        for &kk in k {
            if kk < lo || kk > hi {
                return None;
            }
            flat = flat * self.n + kk.rem_euclid(n) as usize;
        }
        Some(flat)
    }

    /// `(1 − e^{−w|ξ|²})/|ξ|²`.
    fn heat_injection(&self, w: f64) -> StepMap {
        StepMap::Diagonal(
            self.xi
                .iter()
                .map(|v| {
                    let q = v.iter().map(|x| x * x).sum::<f64>();
                    if q == 0.0 {
                        w
                    } else {
                        -(-w * q).exp_m1() / q
                    }
                })
                .collect(),
        )
    }

    fn heat_step(&self, dt: f64) -> StepMap {
        StepMap::Diagonal(self.xi.iter().map(|v| (-dt * v.iter().map(|x| x * x).sum::<f64>()).exp()).collect())
    }

    fn ou_step(&self, spec: &OUSpec, t0: f64, t1: f64) -> Result<StepMap> {
        let (r, g, tr) = step_data(spec, t0, t1, 33)?;
        let rt = r.transpose();
        let d = self.d;
        let unit = self.length / (2.0 * PI);
        let identity = (&r - Mat::identity(d, d)).amax() == 0.0;
        let mut damp = Vec::with_capacity(self.len());
        let mut sources = Vec::with_capacity(self.len());
        for v in &self.xi {
            let x = DVector::from_column_slice(v);
            damp.push((0.5 * tr - 0.5 * (x.transpose() * &g * &x)[(0, 0)]).exp());
            if identity {
                continue;
            }
            let eta = &rt * &x;
            let pos: Vec<f64> = eta.iter().map(|e| e * unit).collect();
            let base: Vec<i64> = pos.iter().map(|p| p.floor() as i64).collect();
            let mut src = Vec::with_capacity(1 << d);
            for corner in 0..(1usize << d) {
                let mut w = 1.0;
                let mut k = vec![0i64; d];
                for a in 0..d {
                    let bit = (corner >> a) & 1;
                    let f = pos[a] - base[a] as f64;
                    w *= if bit == 1 { f } else { 1.0 - f };
                    k[a] = base[a] + bit as i64;
                }
                if w > 1e-15 {
                    if let Some(idx) = self.lattice_index(&k) {
                        src.push((idx, w));
                    }
                }
            }
            sources.push(src);
        }
        if identity {
            return Ok(StepMap::Diagonal(damp));
        }
        Ok(StepMap::Warp { sources, damp })
    }
}

/// A control problem with precomputed masks and slice maps.
///
/// Slices `[b_{i−1}, b_i]` of width `w_i` tile `[0, T]`, graded toward `T` by
/// `b_i = T(1 − (1 − (i+1)/n_t)^p)`; controls are constant in time on each slice.
pub struct ControlProblem {
    pub model: ControlModel,
    pub support: MovingSupport,
    pub horizon: f64,
    pub n_t: usize,
    pub grading: f64,
    bounds: Vec<f64>,
    masks: Vec<Vec<bool>>,
    engine: Engine,
    /// Free evolution across slice `i`.
    steps: Vec<StepMap>,
    /// `∫_{slice i} U(b_i, s) ds`; exact for heat, midpoint otherwise.
    injections: Vec<StepMap>,
}

impl std::fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlProblem")
            .field("model", &self.model)
            .field("horizon", &self.horizon)
            .field("n_t", &self.n_t)
            .field("grading", &self.grading)
            .finish_non_exhaustive()
    }
}

impl ControlProblem {
    pub fn new(model: ControlModel, support: MovingSupport, horizon: f64, n_t: usize) -> Result<Self> {
        Self::with_grading(model, support, horizon, n_t, DEFAULT_GRADING)
    }

    pub fn with_grading(model: ControlModel, support: MovingSupport, horizon: f64, n_t: usize, grading: f64) -> Result<Self> {
        let (length, n) = model.grid();
        if n < 2 || n_t < 2 {
            return Err(invalid("N/n_t", "need at least 2 grid points and 2 time slices"));
        }
        if !(horizon > 0.0) || !(length > 0.0) {
            return Err(invalid("T/L", "must be positive"));
        }
        if !(grading >= 1.0) {
            return Err(invalid("grading", "must be at least 1"));
        }
        let d = model.dim();
        if let ControlModel::OUSpectral { spec, .. } = &model {
            if horizon > spec.horizon + 1e-12 {
                return Err(invalid("T", "exceeds the system horizon"));
            }
        }
        let engine = Engine::new(d, n, length);
        let mut bounds: Vec<f64> =
            (0..=n_t).map(|i| horizon * (1.0 - (1.0 - i as f64 / n_t as f64).powf(grading))).collect();
        bounds[n_t] = horizon;
        let masks = bounds
            .windows(2)
            .map(|w| {
                let region = support.region_at(0.5 * (w[0] + w[1]))?;
                Ok((0..engine.len()).map(|j| region.contains(&engine.point(j))).collect())
            })
            .collect::<Result<Vec<Vec<bool>>>>()?;
        let (steps, injections) = bounds
            .windows(2)
            .map(|w| {
                let width = w[1] - w[0];
                match &model {
                    ControlModel::Heat1D { .. } => Ok((engine.heat_step(width), engine.heat_injection(width))),
                    ControlModel::OUSpectral { spec, .. } => Ok((
                        engine.ou_step(spec, w[0], w[1])?,
                        engine.ou_step(spec, 0.5 * (w[0] + w[1]), w[1])?.scaled(width),
                    )),
                }
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(Self { model, support, horizon, n_t, grading, bounds, masks, engine, steps, injections })
    }

    /// Slice end points `b_{−1} = 0, b_0, …, b_{n_t−1} = T`.
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bounds.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn state_len(&self) -> usize {
        self.engine.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.engine.cell_volume()
    }

    /// Grid point of flat index `j`.
    pub fn point(&self, j: usize) -> Vec<f64> {
        self.engine.point(j)
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    /// Samples `f` on the grid.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<Complex64> {
        (0..self.state_len()).map(|j| Complex64::new(f(&self.point(j)), 0.0)).collect()
    }

    /// `L²` inner product on the box.
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * self.cell_volume()
    }

    pub fn norm(&self, a: &[Complex64]) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    /// `U(T, 0) f`.
    pub fn evolve_free(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut c = self.engine.to_coeffs(f);
        for m in &self.steps {
            c = m.apply(&c);
        }
        self.engine.to_phys(&c)
    }

    fn mask(&self, i: usize, v: &mut [Complex64]) {
        for (z, &keep) in v.iter_mut().zip(&self.masks[i]) {
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// `y_i = χ_i J_i* U(T, b_i)* g` for every slice.
    fn observe_adjoint(&self, g: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut out = vec![Vec::new(); self.n_t];
        let mut c = self.engine.to_coeffs(g);
        for i in (0..self.n_t).rev() {
            let mut y = self.engine.to_phys(&self.injections[i].apply_adjoint(&c));
            self.mask(i, &mut y);
            out[i] = y;
            if i > 0 {
                c = self.steps[i].apply_adjoint(&c);
            }
        }
        out
    }

    /// `Σ U(T, b_i) J_i χ_i v_i`.
    fn inject(&self, v: &[Vec<Complex64>]) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.state_len()];
        for (i, vi) in v.iter().enumerate() {
            if i > 0 {
                acc = self.steps[i].apply(&acc);
            }
            let mut vi = vi.clone();
            self.mask(i, &mut vi);
            let c = self.injections[i].apply(&self.engine.to_coeffs(&vi));
            acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
        }
        self.engine.to_phys(&acc)
    }

    /// Applies the observability Gramian `Λ = Σ w_i⁻¹ U(T,b_i) J_i χ_i J_i* U(T,b_i)*`.
    pub fn gramian_apply(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        if g.len() != self.state_len() {
            return Err(Error::DimensionMismatch(format!("state of length {} for a grid of {}", g.len(), self.state_len())));
        }
        if g.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("Gramian input".into()));
        }
        let widths = self.widths();
        let y: Vec<Vec<Complex64>> = self
            .observe_adjoint(g)
            .into_iter()
            .zip(&widths)
            .map(|(y, w)| y.into_iter().map(|z| z / *w).collect())
            .collect();
        Ok(self.inject(&y))
    }

    /// Sequential forward run, slice by slice, with `u` held constant on each slice.
    pub fn simulate(&self, f0: &[Complex64], control: &[Vec<Complex64>]) -> Vec<Complex64> {
        let mut c = self.engine.to_coeffs(f0);
        for i in 0..self.n_t {
            c = self.steps[i].apply(&c);
            let mut u = control[i].clone();
            self.mask(i, &mut u);
            let cu = self.injections[i].apply(&self.engine.to_coeffs(&u));
            c.iter_mut().zip(&cu).for_each(|(a, b)| *a += b);
        }
        self.engine.to_phys(&c)
    }

    /// Fraction of `‖f‖²` within 10% of the box boundary.
    pub fn boundary_mass(&self, f: &[Complex64]) -> f64 {
        let edge = 0.4 * self.engine.length;
        let total: f64 = f.iter().map(|z| z.norm_sqr()).sum();
        let outer: f64 = f
            .iter()
            .enumerate()
            .filter(|(j, _)| self.point(*j).iter().any(|x| x.abs() > edge))
            .map(|(_, z)| z.norm_sqr())
            .sum();
        if total > 0.0 {
            outer / total
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Null-control residual `‖f(T)‖/‖f₀‖` required for success.
    pub tol: f64,
    /// Conjugate-gradient stopping tolerance on `‖Λg − U(T,0)f₀‖/‖f₀‖`.
    pub cg_tol: f64,
    pub max_iter: usize,
    /// Iterations without a 0.1% gain in the best residual before giving up.
    pub stagnation_window: usize,
    /// Residuals are kept orthogonal to all previous ones when the state has at most this many entries.
    pub reorthogonalize_below: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-6, cg_tol: DEFAULT_CG_TOL, max_iter: DEFAULT_MAX_ITER, stagnation_window: STAGNATION_WINDOW, reorthogonalize_below: 8192 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlResult {
    /// Slice midpoints.
    pub times: Vec<f64>,
    /// Control samples per slice (real parts).
    #[serde(skip)]
    pub control: Vec<Vec<f64>>,
    /// `∫₀ᵀ ‖u(t)‖²_{L²} dt`.
    pub cost: f64,
    /// `⟨g, Λg⟩`, equal to `cost` for the HUM control.
    pub dual_cost: f64,
    /// `‖f(T)‖/‖f₀‖` from the sequential forward run.
    pub residual: f64,
    pub iterations: usize,
    /// Smallest Ritz value of the Lanczos tridiagonal built from the CG coefficients.
    pub gramian_min_eig_estimate: f64,
    pub boundary_mass: f64,
    pub success: bool,
    pub approximate: bool,
}

impl ControlResult {
    /// CSV `t,x_0..,u` for every grid point and slice.
    pub fn write_control_csv<W: Write>(&self, p: &ControlProblem, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let d = p.engine.d;
        let head: Vec<String> = std::iter::once("t".to_string())
            .chain((0..d).map(|i| format!("x_{i}")))
            .chain(std::iter::once("u".to_string()))
            .collect();
        writeln!(w, "{}", head.join(","))?;
        for (t, u) in self.times.iter().zip(&self.control) {
            for (j, v) in u.iter().enumerate() {
                let x: Vec<String> = p.point(j).iter().map(|c| format!("{c:e}")).collect();
                writeln!(w, "{t:e},{},{v:e}", x.join(","))?;
            }
        }
        Ok(())
    }
}

struct CgOutcome {
    x: Vec<Complex64>,
    iterations: usize,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

fn conjugate_gradient(p: &ControlProblem, b: &[Complex64], scale: f64, opts: &SolveOptions) -> Result<CgOutcome> {
    let n = b.len();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let mut dir = r.clone();
    let mut rr = p.inner(&r, &r).re;
    let mut history = vec![rr.sqrt() / scale];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let reorth = n <= opts.reorthogonalize_below;
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    if reorth {
        basis.push(r.iter().map(|z| z / rr.sqrt()).collect());
    }
    if history[0] <= opts.cg_tol {
        return Ok(CgOutcome { x, iterations: 0, alphas, betas });
    }
    for it in 1..=opts.max_iter {
        let ad = p.gramian_apply(&dir)?;
        let curv = p.inner(&dir, &ad).re;
        if !(curv > rr * 1e-300) {
            return Err(Error::NotObservable(format!("Gramian is singular along the search direction (iteration {it})")));
        }
        let alpha = rr / curv;
        for j in 0..n {
            x[j] += dir[j] * alpha;
            r[j] -= ad[j] * alpha;
        }
        if reorth {
            for _ in 0..2 {
                for q in &basis {
                    let c = p.inner(q, &r);
                    r.iter_mut().zip(q).for_each(|(a, b)| *a -= b * c);
                }
            }
        }
        let rr_new = p.inner(&r, &r).re;
        if reorth {
            basis.push(r.iter().map(|z| z / rr_new.sqrt()).collect());
        }
        let beta = rr_new / rr;
        alphas.push(alpha);
        betas.push(beta);
        rr = rr_new;
        let rel = rr.sqrt() / scale;
        history.push(rel);
        if rel <= opts.cg_tol {
            return Ok(CgOutcome { x, iterations: it, alphas, betas });
        }
        let window = opts.stagnation_window;
        if it >= window {
            let past = history[..=it - window].iter().cloned().fold(f64::INFINITY, f64::min);
            let recent = history[it - window + 1..].iter().cloned().fold(f64::INFINITY, f64::min);
            if recent >= past * 0.999 {
                return Err(Error::NotObservable(format!(
                    "conjugate gradient stagnated at relative residual {rel:.3e} after {it} iterations"
                )));
            }
        }
        for j in 0..n {
            dir[j] = r[j] + dir[j] * beta;
        }
    }
    Ok(CgOutcome { x, iterations: opts.max_iter, alphas, betas })
}

fn lanczos_min(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    if k == 0 {
        return f64::NAN;
    }
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = 1.0 / alphas[i] + if i > 0 { betas[i - 1] / alphas[i - 1] } else { 0.0 };
        if i + 1 < k {
            let off = betas[i].sqrt() / alphas[i];
            t[(i, i + 1)] = off;
            t[(i + 1, i)] = off;
        }
    }
    t.symmetric_eigen().eigenvalues.min()
}

/// HUM control: solve `Λg = U(T,0)f₀`, set `u_i = −χ_i U(T,t_i)* g`, and verify by a forward run.
pub fn solve_null_control(p: &ControlProblem, f0: &[Complex64], opts: &SolveOptions) -> Result<ControlResult> {
    if !(opts.tol > 0.0) || !(opts.cg_tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if f0.len() != p.state_len() {
        return Err(Error::DimensionMismatch("initial state length".into()));
    }
    let scale = p.norm(f0);
    if scale == 0.0 {
        return Err(invalid("f0", "zero initial state"));
    }
    let rhs = p.evolve_free(f0);
    let cg = conjugate_gradient(p, &rhs, scale, opts)?;
    let widths = p.widths();
    let control: Vec<Vec<Complex64>> =
        p.observe_adjoint(&cg.x).iter().zip(&widths).map(|(y, w)| y.iter().map(|z| -z / *w).collect()).collect();
    let cost: f64 = control.iter().zip(&widths).map(|(u, w)| w * p.inner(u, u).re).sum();
    let dual_cost = p.inner(&cg.x, &p.gramian_apply(&cg.x)?).re;
    let f_t = p.simulate(f0, &control);
    let residual = p.norm(&f_t) / scale;
    Ok(ControlResult {
        times: p.midpoints(),
        control: control.iter().map(|u| u.iter().map(|z| z.re).collect()).collect(),
        cost,
        dual_cost,
        residual,
        iterations: cg.iterations,
        gramian_min_eig_estimate: lanczos_min(&cg.alphas, &cg.betas),
        boundary_mass: p.boundary_mass(f0),
        success: residual <= opts.tol && cost.is_finite(),
        approximate: p.model.is_approximate(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostRow {
    pub t: f64,
    pub cost: Option<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostSweep {
    pub rows: Vec<CostRow>,
    pub gamma: f64,
    /// `log cost ≈ intercept + slope/T^γ`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub non_increasing: bool,
}

/// Runs the same `f₀` over horizons `t_list` with `n_t` slices each.
pub fn cost_vs_time(
    model: &ControlModel,
    support: &MovingSupport,
    n_t: usize,
    f0: impl Fn(&[f64]) -> f64 + Sync,
    t_list: &[f64],
    gamma: f64,
    opts: &SolveOptions,
) -> Result<CostSweep> {
    if t_list.is_empty() || t_list.iter().any(|&t| !(t > 0.0)) || t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("T_list", "must be positive and increasing"));
    }
    let rows: Vec<CostRow> = t_list
        .par_iter()
        .map(|&t| {
            let run = ControlProblem::new(model.clone(), support.clone(), t, n_t).and_then(|p| {
                let f = p.sample(&f0);
                solve_null_control(&p, &f, opts)
            });
            match run {
                Ok(r) => CostRow { t, cost: Some(r.cost), residual: Some(r.residual), error: None },
                Err(e) => CostRow { t, cost: None, residual: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        rows.iter().filter_map(|r| r.cost.filter(|c| *c > 0.0).map(|c| (r.t.powf(-gamma), c.ln()))).unzip();
    let (slope, intercept, r_squared) = if xs.len() >= 2 { linear_fit(&xs, &ys) } else { (f64::NAN, f64::NAN, f64::NAN) };
    let costs: Vec<f64> = rows.iter().filter_map(|r| r.cost).collect();
    let non_increasing = costs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
    Ok(CostSweep { rows, gamma, slope, intercept, r_squared, non_increasing })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstructionRow {
    pub z: Vec<f64>,
    /// `∫|g(T)|²`.
    pub lhs: f64,
    /// `∫₀ᵀ ∫_{ω(T−t)} |g(t)|² dx dt`.
    pub rhs: f64,
    pub ratio: f64,
}

/// Gaussian data `exp(−|x−z|²/(2α))` evolved by `spec`; a ratio `rhs/lhs → 0`
/// along `z_list` rules out an observability estimate.
pub fn gaussian_obstruction(
    spec: &OUSpec,
    support: &MovingSupport,
    horizon: f64,
    alpha: f64,
    z_list: &[Vec<f64>],
    n_slices: usize,
    seed: u64,
) -> Result<Vec<ObstructionRow>> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be positive"));
    }
    if !(horizon > 0.0) || horizon > spec.horizon + 1e-12 {
        return Err(invalid("T", "must lie in (0, horizon]"));
    }
    let n_slices = n_slices.max(1);
    let dt = horizon / n_slices as f64;
    let n_time = 257;
    let d = spec.dim();
    let lhs = gaussian_solution(spec, &vec![0.0; d], alpha, horizon, n_time)?.l2_norm_sq;
    let slices: Vec<(f64, crate::geometry::Region)> = (0..n_slices)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            Ok((t, support.region_at(horizon - t)?))
        })
        .collect::<Result<_>>()?;
    z_list
        .iter()
        .map(|z| {
            if z.len() != d {
                return Err(Error::DimensionMismatch("center vs system".into()));
            }
            let rhs = slices
                .par_iter()
                .enumerate()
                .map(|(i, (t, region))| {
                    let g = gaussian_solution(spec, z, alpha, *t, n_time)?;
                    let (mean, cov) = g.density_moments();
                    let p = gaussian_mass(region, &mean, &cov, 400, seed ^ (i as u64))?;
                    Ok(dt * g.l2_norm_sq * p)
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .sum::<f64>();
            let lhs_z = gaussian_solution(spec, z, alpha, horizon, n_time)?.l2_norm_sq;
            Ok(ObstructionRow { z: z.clone(), lhs: lhs_z, rhs, ratio: rhs / lhs })
        })
        .collect::<Result<Vec<_>>>()
        .map(|rows| {
            debug_assert!(rows.iter().all(|r| (r.lhs - lhs).abs() <= 1e-12 * lhs));
            rows
        })
}
