//! Complex quadratic Weyl symbols on `ℝ^{2d}`, their Hamilton maps and
//! singular spaces, and Hermite-Galerkin realizations of `q^w`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::keyed_rng;
use crate::propagator::linear_fit;

pub type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);
pub const DEFAULT_SVD_TOL: f64 = 1e-10;
pub const DEFAULT_TAIL_NODES: usize = 400;
pub const MOMENT_GUARD: usize = 120;

/// `q(X) = Xᵀ Q X` with `X = (x, ξ) ∈ ℝ^{2d}` and `Q` complex symmetric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymbolWire", into = "SymbolWire")]
pub struct QuadraticSymbol {
    d: usize,
    q: CMat,
}

#[derive(Serialize, Deserialize)]
struct SymbolWire {
    d: usize,
    /// `[[[re, im], ...], ...]`, row-major.
    matrix: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<SymbolWire> for QuadraticSymbol {
    type Error = Error;
    fn try_from(w: SymbolWire) -> Result<Self> {
        let n = w.matrix.len();
        if w.matrix.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("symbol matrix is not square".into()));
        }
        let q = CMat::from_fn(n, n, |i, j| Complex64::new(w.matrix[i][j][0], w.matrix[i][j][1]));
        let s = QuadraticSymbol::new(q)?;
        if s.d != w.d {
            return Err(Error::DimensionMismatch(format!("d = {} but matrix is {n}x{n}", w.d)));
        }
        Ok(s)
    }
}

impl From<QuadraticSymbol> for SymbolWire {
    fn from(s: QuadraticSymbol) -> Self {
        let n = 2 * s.d;
        SymbolWire {
            d: s.d,
            matrix: (0..n).map(|i| (0..n).map(|j| [s.q[(i, j)].re, s.q[(i, j)].im]).collect()).collect(),
        }
    }
}

/// A first- or zeroth-order factor in an operator monomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    X(usize),
    /// `∂/∂x_j`.
    Dx(usize),
}

/// `coeff · left ∘ right`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorTerm {
    pub coeff: Complex64,
    pub left: Factor,
    pub right: Factor,
}

impl OperatorTerm {
    pub fn new(coeff: impl Into<Complex64>, left: Factor, right: Factor) -> Self {
        Self { coeff: coeff.into(), left, right }
    }
}

impl QuadraticSymbol {
    /// Symmetrizes `Q`.
    pub fn new(q: CMat) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() == 0 || q.nrows() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!("need a 2d×2d matrix, got {}x{}", q.nrows(), q.ncols())));
        }
        if q.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("symbol matrix".into()));
        }
        let d = q.nrows() / 2;
        let q = (&q + q.transpose()) * Complex64::new(0.5, 0.0);
        Ok(Self { d, q })
    }

    pub fn from_real(q: &DMatrix<f64>) -> Result<Self> {
        Self::new(q.map(|v| Complex64::new(v, 0.0)))
    }

    pub fn zero(d: usize) -> Self {
        Self { d, q: CMat::zeros(2 * d, 2 * d) }
    }

    /// `|x|² + |ξ|²`.
    pub fn harmonic(d: usize) -> Self {
        Self { d, q: CMat::identity(2 * d, 2 * d) }
    }

    /// Weyl symbol of `Σ c·L∘R` for first-order factors, with `∂_j ↦ iξ_j`.
    /// Returns the quadratic part and the constant left over by reordering.
    pub fn from_operator(d: usize, terms: &[OperatorTerm]) -> Result<(Self, Complex64)> {
        let slot = |f: Factor| -> Result<(usize, Complex64)> {
            match f {
                Factor::X(j) if j < d => Ok((j, Complex64::new(1.0, 0.0))),
                Factor::Dx(j) if j < d => Ok((d + j, I)),
                _ => Err(invalid("terms", "variable index out of range")),
            }
        };
        let mut q = CMat::zeros(2 * d, 2 * d);
        let mut constant = Complex64::new(0.0, 0.0);
        for t in terms {
            let (a, ca) = slot(t.left)?;
            let (b, cb) = slot(t.right)?;
            let c = t.coeff * ca * cb;
            q[(a, b)] += c;
            // X̂_a X̂_b = Weyl(X_a X_b) + ½[X̂_a, X̂_b] with [x_j, D_j] = i.
            if a + d == b {
                constant += c * 0.5 * I;
            } else if b + d == a {
                constant -= c * 0.5 * I;
            }
        }
        Ok((Self::new(q)?, constant))
    }

    /// Kramers-Fokker-Planck operator `−∂_v² + v²/4 + v∂_x − V'(x)∂_v`
    /// with `V(x) = x²/2`, variables ordered `(x, v)`.
    pub fn kfp() -> Self {
        let terms = [
            OperatorTerm::new(-1.0, Factor::Dx(1), Factor::Dx(1)),
            OperatorTerm::new(0.25, Factor::X(1), Factor::X(1)),
            OperatorTerm::new(1.0, Factor::X(1), Factor::Dx(0)),
            OperatorTerm::new(-1.0, Factor::X(0), Factor::Dx(1)),
        ];
        let (q, c) = Self::from_operator(2, &terms).expect("static terms");
        debug_assert!(c.norm() == 0.0);
        q
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CMat {
        &self.q
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.polar(x, x)
    }

    /// Polarized form `q(X, Y) = XᵀQY`.
    pub fn polar(&self, x: &[f64], y: &[f64]) -> Complex64 {
        let n = 2 * self.d;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.q[(i, j)] * x[i] * y[j];
            }
        }
        acc
    }

    /// Smallest eigenvalue of `Re Q`; `Re q ≥ 0` iff this is `≥ 0`.
    pub fn min_real_eigenvalue(&self) -> f64 {
        self.q.map(|z| z.re).symmetric_eigen().eigenvalues.min()
    }

    pub fn is_accretive(&self, tol: f64) -> bool {
        self.min_real_eigenvalue() >= -tol
    }
}

/// `σ((x,ξ),(y,η)) = ⟨ξ,y⟩ − ⟨x,η⟩`.
pub fn symplectic_form(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let d = x.len() / 2;
    (0..d).map(|j| x[d + j] * y[j] - x[j] * y[d + j]).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonMap {
    pub f: CMat,
}

impl HamiltonMap {
    pub fn d(&self) -> usize {
        self.f.nrows() / 2
    }

    pub fn apply(&self, y: &[f64]) -> Vec<Complex64> {
        let v = DVector::from_iterator(y.len(), y.iter().map(|&r| Complex64::new(r, 0.0)));
        (&self.f * v).iter().copied().collect()
    }
}

/// `F = [[Q_ξx, Q_ξξ], [−Q_xx, −Q_xξ]]`, the unique map with `q(X,Y) = σ(X, FY)`.
pub fn hamilton_map(q: &QuadraticSymbol) -> HamiltonMap {
    let d = q.d;
    let m = &q.q;
    let f = CMat::from_fn(2 * d, 2 * d, |i, j| if i < d { m[(i + d, j)] } else { -m[(i - d, j)] });
    HamiltonMap { f }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularSpace {
    pub dim: usize,
    pub basis: Vec<Vec<f64>>,
    /// Smallest `j` with `∩_{i≤j} Ker[Re F (Im F)^i] ∩ ℝ^{2d} = {0}`; `None` when `S ≠ {0}`.
    pub k0: Option<usize>,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Smallest singular value above the threshold divided by the threshold.
    pub gap: f64,
}

fn stacked_kernel(blocks: &[DMatrix<f64>], tol: f64) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let n = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut stack = DMatrix::zeros(rows.max(n), n);
    let mut r = 0;
    for b in blocks {
        stack.view_mut((r, 0), (b.nrows(), n)).copy_from(b);
        r += b.nrows();
    }
    let svd = stack.svd(false, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let threshold = tol * smax.max(f64::MIN_POSITIVE);
    let vt = svd.v_t.expect("requested");
    let mut basis = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if s <= threshold {
            basis.push(vt.row(i).iter().copied().collect());
        }
    }
    (basis, sv, threshold)
}

/// `S = ∩_{j=0}^{2d−1} Ker[Re F (Im F)^j] ∩ ℝ^{2d}` via SVD of the stacked real blocks.
pub fn singular_space(f: &HamiltonMap, tol: f64) -> Result<SingularSpace> {
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let n = f.f.nrows();
    let re = f.f.map(|z| z.re);
    let im = f.f.map(|z| z.im);
    let mut blocks = Vec::with_capacity(n);
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut k0 = None;
    for j in 0..n {
        blocks.push(&re * &power);
        power = &power * &im;
        if k0.is_none() {
            let (basis, _, _) = stacked_kernel(&blocks, tol);
            if basis.is_empty() {
                k0 = Some(j);
            }
        }
    }
    let (basis, singular_values, threshold) = stacked_kernel(&blocks, tol);
    let gap = singular_values.iter().filter(|&&s| s > threshold).cloned().fold(f64::INFINITY, f64::min) / threshold;
    Ok(SingularSpace { dim: basis.len(), basis, k0, singular_values, threshold, gap })
}

/// Multi-indices `γ ∈ ℕ^d` with `|γ| ≤ n`, ordered by degree then lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteBasis {
    d: usize,
    n: usize,
    indices: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl HermiteBasis {
    pub fn new(d: usize, n: usize) -> Self {
        let mut indices = Vec::new();
        for deg in 0..=n {
            let mut cur = vec![0usize; d];
            compositions(d, deg, 0, &mut cur, &mut indices);
        }
        let lookup = indices.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        Self { d, n, indices, lookup }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn index_of(&self, gamma: &[usize]) -> Option<usize> {
        self.lookup.get(gamma).copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.indices[i].iter().sum()
    }
}

fn compositions(d: usize, left: usize, axis: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if axis + 1 == d {
        cur[axis] = left;
        out.push(cur.clone());
        return;
    }
    for k in (0..=left).rev() {
        cur[axis] = k;
        compositions(d, left - k, axis + 1, cur, out);
    }
    cur[axis] = 0;
}

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMatrix {
    fn from_entries(n: usize, entries: BTreeMap<(usize, usize), Complex64>) -> Self {
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        for (&(r, c), &v) in &entries {
            if v.norm() == 0.0 {
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_vec(&self, v: &[Complex64], out: &mut [Complex64]) {
        for r in 0..self.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            out[r] = acc;
        }
    }

    pub fn adjoint_mul_vec(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.cols[k]] += self.vals[k].conj() * v[r];
            }
        }
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for (k, &c) in self.cols.iter().enumerate() {
            col[c] += self.vals[k].norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }
}

/// `P q^w P` on `span{Φ_γ : |γ| ≤ N}`, `P` the orthogonal projection.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteOperator {
    pub basis: HermiteBasis,
    pub matrix: SparseMatrix,
}

/// `(axis, c₊, c₋)` with `X̂_a = c₊ a₊ + c₋ a₋` on `axis`.
fn ladder(a: usize, d: usize) -> (usize, Complex64, Complex64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a < d {
        (a, Complex64::new(s, 0.0), Complex64::new(s, 0.0))
    } else {
        (a - d, Complex64::new(0.0, s), Complex64::new(0.0, -s))
    }
}

/// Images of `Φ_γ` under `X̂_a`: up to two `(γ', coefficient)` pairs.
fn apply_linear(a: usize, d: usize, gamma: &[usize]) -> impl Iterator<Item = (Vec<usize>, Complex64)> {
    let (axis, cp, cm) = ladder(a, d);
    let n = gamma[axis];
    let mut up = gamma.to_vec();
    up[axis] += 1;
    let plus = Some((up, cp * ((n + 1) as f64).sqrt()));
    let minus = (n > 0).then(|| {
        let mut dn = gamma.to_vec();
        dn[axis] -= 1;
        (dn, cm * (n as f64).sqrt())
    });
    plus.into_iter().chain(minus)
}

/// Galerkin matrix of `q^w = Σ Q_ab X̂_a X̂_b` with `x = (a₊+a₋)/√2`, `D = i(a₊−a₋)/√2`.
pub fn weyl_hermite_matrix(q: &QuadraticSymbol, n: usize) -> Result<HermiteOperator> {
    if n < 2 {
        return Err(invalid("N", "truncation degree must be at least 2"));
    }
    let d = q.d;
    let basis = HermiteBasis::new(d, n);
    let mut entries: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    let pairs: Vec<(usize, usize, Complex64)> = (0..2 * d)
        .flat_map(|a| (0..2 * d).map(move |b| (a, b)))
        .filter_map(|(a, b)| {
            let c = q.q[(a, b)];
            (c.norm() != 0.0).then_some((a, b, c))
        })
        .collect();
    for (col, gamma) in basis.indices().iter().enumerate() {
        for &(a, b, c) in &pairs {
            for (g1, c1) in apply_linear(b, d, gamma) {
                for (g2, c2) in apply_linear(a, d, &g1) {
                    if let Some(row) = basis.index_of(&g2) {
                        *entries.entry((row, col)).or_default() += c * c1 * c2;
                    }
                }
            }
        }
    }
    let matrix = SparseMatrix::from_entries(basis.len(), entries);
    Ok(HermiteOperator { basis, matrix })
}

impl HermiteOperator {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        self.matrix.mul_vec(v, &mut out);
        out
    }

    pub fn to_dense(&self) -> CMat {
        self.matrix.to_dense()
    }

    /// Smallest `Re⟨v, Mv⟩/‖v‖²` over seeded random probes supported on `|γ| ≤ max_degree`.
    pub fn numerical_range_min(&self, probes: usize, max_degree: usize, seed: u64) -> f64 {
        let mut rng = keyed_rng(seed, 0x4e52);
        let mut worst = f64::INFINITY;
        for _ in 0..probes {
            let v: Vec<Complex64> = (0..self.len())
                .map(|i| {
                    if self.basis.degree(i) <= max_degree {
                        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let mv = self.apply(&v);
            let num: Complex64 = v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
            let den: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            worst = worst.min(num.re / den);
        }
        worst
    }
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `e^{−tM} v` (or `e^{−tM*} v`) by scaled Taylor series.
fn expmv(m: &SparseMatrix, t: f64, v: &[Complex64], adjoint: bool) -> Vec<Complex64> {
    let steps = (t * m.norm1()).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut cur = v.to_vec();
    let mut term = vec![Complex64::new(0.0, 0.0); v.len()];
    let mut next = term.clone();
    for _ in 0..steps {
        term.copy_from_slice(&cur);
        let mut acc = cur.clone();
        for k in 1..200 {
            if adjoint {
                m.adjoint_mul_vec(&term, &mut next);
            } else {
                m.mul_vec(&term, &mut next);
            }
            let s = -h / k as f64;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = n * s;
            }
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if vec_norm(&term) <= 1e-18 * vec_norm(&acc).max(f64::MIN_POSITIVE) {
                break;
            }
        }
        cur = acc;
    }
    cur
}

/// `e^{−tM} c`.
pub fn semigroup_evolve(m: &HermiteOperator, t: f64, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    if !(t >= 0.0) {
        return Err(invalid("t", "must be non-negative"));
    }
    if coeffs.len() != m.len() {
        return Err(Error::DimensionMismatch(format!("{} coefficients for a basis of {}", coeffs.len(), m.len())));
    }
    if t == 0.0 {
        return Ok(coeffs.to_vec());
    }
    Ok(expmv(&m.matrix, t, coeffs, false))
}

/// `e^{−tM*} c`.
pub fn semigroup_evolve_adjoint(m: &HermiteOperator, t: f64, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    if !(t >= 0.0) {
        return Err(invalid("t", "must be non-negative"));
    }
    if coeffs.len() != m.len() {
        return Err(Error::DimensionMismatch("coefficient length".into()));
    }
    Ok(expmv(&m.matrix, t, coeffs, true))
}

/// Hermite coefficients of `x^k ∂^l φ_n`, obtained with `x = (a₊+a₋)/√2` and `∂ = (a₋−a₊)/√2`.
pub fn hermite_moment_coeffs(n: usize, k: usize, l: usize) -> Result<Vec<f64>> {
    if n + k + l > MOMENT_GUARD {
        return Err(Error::Overflow(format!("n+k+l = {} exceeds {MOMENT_GUARD}", n + k + l)));
    }
    let len = n + k + l + 1;
    let mut c = vec![0.0; len];
    c[n] = 1.0;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let step = |c: &[f64], sign_up: f64| {
        let mut out = vec![0.0; len];
        for (m, &v) in c.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            if m + 1 < len {
                out[m + 1] += sign_up * s * ((m + 1) as f64).sqrt() * v;
            }
            if m > 0 {
                out[m - 1] += s * (m as f64).sqrt() * v;
            }
        }
        out
    };
    for _ in 0..l {
        c = step(&c, -1.0);
    }
    for _ in 0..k {
        c = step(&c, 1.0);
    }
    Ok(c)
}

/// `‖x^k ∂^l φ_n‖_{L²(ℝ)}`.
pub fn hermite_moment_norm(n: usize, k: usize, l: usize) -> Result<f64> {
    Ok(hermite_moment_coeffs(n, k, l)?.iter().map(|c| c * c).sum::<f64>().sqrt())
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// `2^{(k+l)/2} √((k+l+n)!/n!)`.
pub fn moment_bound_factorial(n: usize, k: usize, l: usize) -> f64 {
    (0.5 * (k + l) as f64 * 2f64.ln() + 0.5 * (ln_factorial(k + l + n) - ln_factorial(n))).exp()
}

/// `√2 (e^{ε r n^{1/(2r)}} or 1 if n=0) (2^{r+1}e^r / min(ε^r,1))^{k+l} (k!)^r (l!)^r`.
pub fn moment_bound_gevrey(n: usize, k: usize, l: usize, r: f64, eps: f64) -> f64 {
    let head = if n == 0 { 1.0 } else { (eps * r * (n as f64).powf(0.5 / r)).exp() };
    let base = 2f64.powf(r + 1.0) * r.exp() / eps.powf(r).min(1.0);
    2f64.sqrt() * head * base.powi((k + l) as i32) * (r * (ln_factorial(k) + ln_factorial(l))).exp()
}

/// `φ_0..φ_n` at `x` by the normalized three-term recurrence.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n >= 1 {
        out.push(2f64.sqrt() * x * out[0]);
    }
    for m in 1..n {
        let v = (2.0 / (m + 1) as f64).sqrt() * x * out[m] - (m as f64 / (m + 1) as f64).sqrt() * out[m - 1];
        out.push(v);
    }
    out
}

/// Gauss-Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `In_{mn} = ∫_{−k}^{k} φ_m φ_n`.
pub fn hermite_inner_gram(n: usize, k: f64, nodes: usize) -> DMatrix<f64> {
    let (x, w) = gauss_legendre(nodes);
    let mut g = DMatrix::zeros(n + 1, n + 1);
    for (xi, wi) in x.iter().zip(&w) {
        let phi = hermite_functions(n, k * xi);
        for a in 0..=n {
            let pa = phi[a] * wi * k;
            for b in 0..=a {
                g[(a, b)] += pa * phi[b];
            }
        }
    }
    for a in 0..=n {
        for b in 0..a {
            g[(b, a)] = g[(a, b)];
        }
    }
    g
}

/// Precomputed `(1−π_k)` quadratic form on Hermite coefficients, using
/// `Φ̂_γ = (2π)^{d/2} (−i)^{|γ|} Φ_γ` and the disjoint split of the cube complement.
#[derive(Clone, Debug)]
pub struct FourierTail {
    d: usize,
    n: usize,
    inner: DMatrix<f64>,
    outer: DMatrix<f64>,
}

impl FourierTail {
    pub fn new(d: usize, n: usize, k: f64, nodes: usize) -> Self {
        let inner = hermite_inner_gram(n, k, nodes);
        let outer = DMatrix::identity(n + 1, n + 1) - &inner;
        Self { d, n, inner, outer }
    }

    fn to_tensor(&self, basis: &HermiteBasis, c: &[Complex64]) -> Vec<Complex64> {
        let side = self.n + 1;
        let mut t = vec![Complex64::new(0.0, 0.0); side.pow(self.d as u32)];
        for (i, g) in basis.indices().iter().enumerate() {
            let flat = g.iter().fold(0, |acc, &v| acc * side + v);
            t[flat] = c[i] * I.powu(3 * (basis.degree(i) as u32 % 4));
        }
        t
    }

    fn apply_axis(&self, t: &[Complex64], m: &DMatrix<f64>, axis: usize) -> Vec<Complex64> {
        let side = self.n + 1;
        let stride = side.pow((self.d - 1 - axis) as u32);
        let mut out = vec![Complex64::new(0.0, 0.0); t.len()];
        for base in 0..t.len() {
            if (base / stride) % side != 0 {
                continue;
            }
            for a in 0..side {
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..side {
                    let w = m[(a, b)];
                    if w != 0.0 {
                        acc += t[base + b * stride] * w;
                    }
                }
                out[base + a * stride] = acc;
            }
        }
        out
    }

    /// `G c` in tensor form (Hermite-function coefficients of the tail mass operator).
    fn gram_tensor(&self, t: &[Complex64]) -> Vec<Complex64> {
        let mut total = vec![Complex64::new(0.0, 0.0); t.len()];
        for j in 0..self.d {
            let mut cur = t.to_vec();
            for axis in 0..self.d {
                if axis < j {
                    cur = self.apply_axis(&cur, &self.inner, axis);
                } else if axis == j {
                    cur = self.apply_axis(&cur, &self.outer, axis);
                }
            }
            for (a, b) in total.iter_mut().zip(&cur) {
                *a += b;
            }
        }
        total
    }

    /// `‖(1−π_k) f‖²` for `f = Σ c_γ Φ_γ`.
    pub fn tail_norm_sq(&self, basis: &HermiteBasis, c: &[Complex64]) -> f64 {
        let t = self.to_tensor(basis, c);
        let g = self.gram_tensor(&t);
        t.iter().zip(&g).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0)
    }

    /// `c ↦ P G c` back on the Hermite basis, with the Fourier phases undone.
    fn gram_apply(&self, basis: &HermiteBasis, c: &[Complex64]) -> Vec<Complex64> {
        let side = self.n + 1;
        let g = self.gram_tensor(&self.to_tensor(basis, c));
        basis
            .indices()
            .iter()
            .enumerate()
            .map(|(i, gm)| {
                let flat = gm.iter().fold(0, |acc, &v| acc * side + v);
                g[flat] * I.powu(basis.degree(i) as u32 % 4)
            })
            .collect()
    }
}

/// Normalized Hermite coefficients of `exp(−|x−z|²/2)`.
pub fn coherent_coeffs(basis: &HermiteBasis, center: &[f64]) -> Vec<Complex64> {
    basis
        .indices()
        .iter()
        .map(|g| {
            let mut v = 1.0;
            for (j, &n) in g.iter().enumerate() {
                let z = center[j];
                v *= (-z * z / 4.0).exp() * (z / 2f64.sqrt()).powi(n as i32) / ln_factorial(n).mul_add(0.5, 0.0).exp();
            }
            Complex64::new(v, 0.0)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub gamma: Vec<usize>,
    pub abs: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayProfile {
    pub rows: Vec<DecayRow>,
    /// `−slope` of `log max_{|γ|=m} |c_γ|` against `m`.
    pub rate: f64,
    pub within_bound: bool,
}

/// Evolved coefficients against `‖c‖·exp(−t^{2k₀+1}(2|γ|+d)/C₀)`.
pub fn hermite_decay_profile(m: &HermiteOperator, t: f64, coeffs: &[Complex64], c0: f64, k0: usize) -> Result<DecayProfile> {
    if !(t > 0.0) || !(c0 > 0.0) {
        return Err(invalid("t/C0", "must be positive"));
    }
    let out = semigroup_evolve(m, t, coeffs)?;
    let norm0 = vec_norm(coeffs);
    let d = m.basis.d() as f64;
    let expo = t.powi(2 * k0 as i32 + 1);
    let mut shell_max = vec![0.0f64; m.basis.truncation() + 1];
    let rows: Vec<DecayRow> = m
        .basis
        .indices()
        .iter()
        .zip(&out)
        .enumerate()
        .map(|(i, (g, c))| {
            let deg = m.basis.degree(i);
            shell_max[deg] = shell_max[deg].max(c.norm());
            DecayRow { gamma: g.clone(), abs: c.norm(), bound: norm0 * (-expo * (2.0 * deg as f64 + d) / c0).exp() }
        })
        .collect();
    let within_bound = rows.iter().all(|r| r.abs <= r.bound * (1.0 + 1e-12) + 1e-300);
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        shell_max.iter().enumerate().filter(|(_, v)| **v > 1e-300).map(|(i, v)| (i as f64, v.ln())).unzip();
    let rate = if xs.len() >= 2 { -linear_fit(&xs, &ys).0 } else { 0.0 };
    Ok(DecayProfile { rows, rate, within_bound })
}

/// Initial datum for the dissipation probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProbeDatum {
    /// `exp(−|x−z|²/2)`.
    Gaussian { center: Vec<f64> },
    /// Unit datum maximizing the tail fraction on `|γ| ≤ max_degree`, by a dense Hermitian eigensolve.
    WorstCase { max_degree: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub t: f64,
    pub k: f64,
    pub lhs: f64,
    pub reference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationProbe {
    pub k0: usize,
    pub rows: Vec<ProbeRow>,
    /// Per `t`: `−slope` of `log lhs` against `k²`.
    pub rates: Vec<(f64, f64)>,
    /// Fitted exponent of `rate ∝ t^p`.
    pub rate_exponent: f64,
    pub c2: f64,
    pub prefactor: f64,
}

/// Columns `e^{−tM} e_j` for the masked basis indices.
fn evolved_columns(m: &HermiteOperator, t: f64, cols: &[usize]) -> Vec<Vec<Complex64>> {
    cols.par_iter()
        .map(|&j| {
            let mut e = vec![Complex64::default(); m.len()];
            e[j] = Complex64::new(1.0, 0.0);
            if t == 0.0 {
                e
            } else {
                expmv(&m.matrix, t, &e, false)
            }
        })
        .collect()
}

/// `sup ‖(1−π_k) e^{−tM} g‖/‖g‖` over `g` spanned by the columns' sources, as the top eigenvalue of `E*GE`.
fn worst_case_tail(m: &HermiteOperator, tail: &FourierTail, cols: &[Vec<Complex64>]) -> f64 {
    let ge: Vec<Vec<Complex64>> = cols.par_iter().map(|c| tail.gram_apply(&m.basis, c)).collect();
    let k = cols.len();
    let mut h = CMat::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v: Complex64 = cols[i].iter().zip(&ge[j]).map(|(a, b)| a.conj() * b).sum();
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    h.symmetric_eigen().eigenvalues.max().max(0.0).sqrt()
}

/// `‖(1−π_k) e^{−tq^w} g‖ / ‖g‖` on a `(t, k)` table; requires `S = {0}`.
pub fn quad_dissipation_probe(
    q: &QuadraticSymbol,
    n: usize,
    t_list: &[f64],
    k_list: &[f64],
    datum: &ProbeDatum,
) -> Result<DissipationProbe> {
    let s = singular_space(&hamilton_map(q), DEFAULT_SVD_TOL)?;
    let k0 = match (s.dim, s.k0) {
        (0, Some(k0)) => k0,
        _ => return Err(Error::NotApplicable(format!("singular space has dimension {}", s.dim))),
    };
    if t_list.is_empty() || k_list.is_empty() || t_list.iter().any(|&t| !(t > 0.0)) || k_list.iter().any(|&k| !(k >= 0.0)) {
        return Err(invalid("t_list/k_list", "need positive times and non-negative cutoffs"));
    }
    let m = weyl_hermite_matrix(q, n)?;
    let d = q.d();
    let tails: Vec<FourierTail> = k_list.iter().map(|&k| FourierTail::new(d, n, k, DEFAULT_TAIL_NODES)).collect();
    let mut rows = Vec::new();
    for &t in t_list {
        match datum {
            ProbeDatum::Gaussian { center } => {
                if center.len() != d {
                    return Err(Error::DimensionMismatch("datum center".into()));
                }
                let c = coherent_coeffs(&m.basis, center);
                let n0 = vec_norm(&c);
                let ev = semigroup_evolve(&m, t, &c)?;
                for (tail, &k) in tails.iter().zip(k_list) {
                    let lhs = if k == 0.0 { vec_norm(&ev) / n0 } else { tail.tail_norm_sq(&m.basis, &ev).sqrt() / n0 };
                    rows.push(ProbeRow { t, k, lhs, reference: 0.0 });
                }
            }
            ProbeDatum::WorstCase { max_degree } => {
                let idx: Vec<usize> = (0..m.len()).filter(|&i| m.basis.degree(i) <= *max_degree).collect();
                let cols = evolved_columns(&m, t, &idx);
                for (tail, &k) in tails.iter().zip(k_list) {
                    rows.push(ProbeRow { t, k, lhs: worst_case_tail(&m, tail, &cols), reference: 0.0 });
                }
            }
        }
    }
    let p = (2 * k0 + 1) as f64;
    let mut rates = Vec::new();
    for &t in t_list {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.t == t && r.lhs > 0.0).map(|r| (r.k * r.k, r.lhs.ln())).unzip();
        let rate = if xs.len() >= 2 { -linear_fit(&xs, &ys).0 } else { f64::NAN };
        rates.push((t, rate));
    }
    let (lt, lr): (Vec<f64>, Vec<f64>) =
        rates.iter().filter(|r| r.1 > 0.0).map(|&(t, r)| (t.ln(), r.ln())).unzip();
    let rate_exponent = if lt.len() >= 2 { linear_fit(&lt, &lr).0 } else { f64::NAN };
    // log lhs + p(d+1) log t = log P − c₂ t^p k²
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.lhs > 0.0)
        .map(|r| (r.t.powf(p) * r.k * r.k, r.lhs.ln() + p * (d as f64 + 1.0) * r.t.ln()))
        .unzip();
    let (slope, intercept, _) = linear_fit(&xs, &ys);
    let (c2, prefactor) = (-slope, intercept.exp());
    for r in rows.iter_mut() {
        r.reference = prefactor * r.t.powf(-p * (d as f64 + 1.0)) * (-c2 * r.t.powf(p) * r.k * r.k).exp();
    }
    Ok(DissipationProbe { k0, rows, rates, rate_exponent, c2, prefactor })
}
