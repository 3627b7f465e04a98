//! Control-support geometry: CSG regions, moving supports, Lebesgue measure
//! estimation, thickness probes and the integral thickness functional.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::lebeau_robbiano::TimeSet;
use crate::tvsys::Mat;

/// Largest point dimension supported by the allocation-free membership path.
pub const MAX_DIM: usize = 8;
/// Target cell count per box for the default grid rule.
pub const DEFAULT_GRID_CELLS: f64 = 1e6;
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Invertible affine map `x ↦ M x + s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    matrix: Mat,
    inverse: Mat,
    shift: Vec<f64>,
}

impl Affine {
    pub fn new(matrix: Mat, shift: Vec<f64>) -> Result<Self> {
        let d = matrix.nrows();
        if matrix.ncols() != d || shift.len() != d {
            return Err(Error::DimensionMismatch("affine map must be square with matching shift".into()));
        }
        if d > MAX_DIM {
            return Err(invalid("matrix", format!("dimension {d} exceeds {MAX_DIM}")));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .ok_or_else(|| invalid("matrix", "affine matrix is not invertible"))?;
        Ok(Self { matrix, inverse, shift })
    }

    pub fn linear(matrix: Mat) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(matrix, vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn inverse(&self) -> &Mat {
        &self.inverse
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = self.shift[i];
            for j in 0..d {
                acc += self.matrix[(i, j)] * x[j];
            }
            out[i] = acc;
        }
    }

    pub fn apply_inverse(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.inverse[(i, j)] * (x[j] - self.shift[j]);
            }
            out[i] = acc;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AffineWire {
    matrix: Vec<Vec<f64>>,
    shift: Vec<f64>,
}

impl Serialize for Affine {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = (0..self.dim()).map(|i| self.matrix.row(i).iter().copied().collect()).collect();
        AffineWire { matrix: rows, shift: self.shift.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Affine {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = AffineWire::deserialize(d)?;
        let n = w.matrix.len();
        if w.matrix.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("affine matrix must be square"));
        }
        let flat: Vec<f64> = w.matrix.into_iter().flatten().collect();
        Affine::new(Mat::from_row_slice(n, n, &flat), w.shift).map_err(serde::de::Error::custom)
    }
}

/// Lazily materialized unbounded interval families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum IntervalGenerator {
    /// `⋃_k (lo + k·period, hi + k·period)`.
    Periodic { period: f64, lo: f64, hi: f64 },
    /// `⋃_{n ≥ n_min} (n², n²+n)`, mirrored to the negative axis when `mirror`.
    SquareGaps { n_min: u64, mirror: bool },
    /// `⋃_{n ∈ ℤ} (n − ε_|n|, n + ε_|n|)` with `ε_n = eps0·ratio^n`.
    VanishingStrips { eps0: f64, ratio: f64 },
}

impl IntervalGenerator {
    fn contains(&self, x: f64) -> bool {
        match *self {
            IntervalGenerator::Periodic { period, lo, hi } => {
                let k = ((x - lo) / period).floor();
                let y = x - k * period;
                y > lo && y < hi
            }
            IntervalGenerator::SquareGaps { n_min, mirror } => {
                let a = if mirror { x.abs() } else { x };
                if a <= 0.0 {
                    return false;
                }
                let n = a.sqrt().floor() as u64;
                [n.saturating_sub(1), n].iter().any(|&m| {
                    let m2 = (m * m) as f64;
                    m >= n_min.max(1) && a > m2 && a < m2 + m as f64
                })
            }
            IntervalGenerator::VanishingStrips { eps0, ratio } => {
                let n = x.round();
                [n - 1.0, n, n + 1.0]
                    .iter()
                    .any(|&m| (x - m).abs() < eps0 * ratio.powf(m.abs()))
            }
        }
    }

    fn push_segments(&self, lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
        match *self {
            IntervalGenerator::Periodic { period, lo: a, hi: b } => {
                let k0 = ((lo - b) / period).floor() as i64;
                let k1 = ((hi - a) / period).ceil() as i64;
                for k in k0..=k1 {
                    let s = k as f64 * period;
                    clip_push(a + s, b + s, lo, hi, out);
                }
            }
            IntervalGenerator::SquareGaps { n_min, mirror } => {
                let reach = lo.abs().max(hi.abs());
                let n1 = reach.sqrt().ceil() as u64 + 1;
                for n in n_min.max(1)..=n1 {
                    let (a, b) = ((n * n) as f64, (n * n + n) as f64);
                    clip_push(a, b, lo, hi, out);
                    if mirror {
                        clip_push(-b, -a, lo, hi, out);
                    }
                }
            }
            IntervalGenerator::VanishingStrips { eps0, ratio } => {
                let n0 = lo.floor() as i64 - 1;
                let n1 = hi.ceil() as i64 + 1;
                for n in n0..=n1 {
                    let e = eps0 * ratio.powi(n.unsigned_abs() as i32);
                    clip_push(n as f64 - e, n as f64 + e, lo, hi, out);
                }
            }
        }
    }
}

fn clip_push(a: f64, b: f64, lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
    let (x, y) = (a.max(lo), b.min(hi));
    if x < y {
        out.push((x, y));
    }
}

fn merge_segments(mut segs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    segs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(segs.len());
    for (a, b) in segs {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn intersect_segments(x: &[(f64, f64)], y: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < x.len() && j < y.len() {
        let a = x[i].0.max(y[j].0);
        let b = x[i].1.min(y[j].1);
        if a < b {
            out.push((a, b));
        }
        if x[i].1 < y[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn complement_segments(x: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut cur = lo;
    for &(a, b) in x {
        if a > cur {
            out.push((cur, a.min(hi)));
        }
        cur = cur.max(b);
    }
    if cur < hi {
        out.push((cur, hi));
    }
    out
}

/// Union of open intervals acting on one coordinate axis (a cylinder in d ≥ 2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalUnionWire", into = "IntervalUnionWire")]
pub struct IntervalUnion1D {
    axis: usize,
    intervals: Vec<(f64, f64)>,
    generator: Option<IntervalGenerator>,
}

#[derive(Serialize, Deserialize)]
struct IntervalUnionWire {
    #[serde(default)]
    axis: usize,
    #[serde(default)]
    intervals: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<IntervalGenerator>,
}

impl TryFrom<IntervalUnionWire> for IntervalUnion1D {
    type Error = Error;
    fn try_from(w: IntervalUnionWire) -> Result<Self> {
        let iv = w.intervals.into_iter().map(|[a, b]| (a, b)).collect();
        let mut u = IntervalUnion1D::new(iv)?;
        u.axis = w.axis;
        u.generator = w.generator;
        Ok(u)
    }
}

impl From<IntervalUnion1D> for IntervalUnionWire {
    fn from(u: IntervalUnion1D) -> Self {
        IntervalUnionWire {
            axis: u.axis,
            intervals: u.intervals.iter().map(|&(a, b)| [a, b]).collect(),
            generator: u.generator,
        }
    }
}

impl IntervalUnion1D {
    /// Sorts and merges the given intervals.
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if a.is_nan() || b.is_nan() || a >= b {
                return Err(invalid("intervals", format!("bad interval ({a}, {b})")));
            }
        }
        Ok(Self { axis: 0, intervals: merge_segments(intervals), generator: None })
    }

    pub fn with_generator(mut self, g: IntervalGenerator) -> Self {
        self.generator = Some(g);
        self
    }

    pub fn on_axis(mut self, axis: usize) -> Self {
        self.axis = axis;
        self
    }

    pub fn periodic(period: f64, lo: f64, hi: f64) -> Self {
        Self { axis: 0, intervals: Vec::new(), generator: Some(IntervalGenerator::Periodic { period, lo, hi }) }
    }

    /// The dilation base set `[−1,1] ∪ ⋃_{n≥1} ±(n², n²+n)`.
    pub fn square_gaps() -> Self {
        Self {
            axis: 0,
            intervals: vec![(-1.0, 1.0)],
            generator: Some(IntervalGenerator::SquareGaps { n_min: 1, mirror: true }),
        }
    }

    pub fn vanishing_strips(eps0: f64, ratio: f64) -> Self {
        Self { axis: 0, intervals: Vec::new(), generator: Some(IntervalGenerator::VanishingStrips { eps0, ratio }) }
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn generator(&self) -> Option<&IntervalGenerator> {
        self.generator.as_ref()
    }

    pub fn contains_scalar(&self, x: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv.0 < x);
        if i > 0 && x < self.intervals[i - 1].1 {
            return true;
        }
        self.generator.as_ref().is_some_and(|g| g.contains(x))
    }

    /// The set clipped to `(lo, hi)` as sorted disjoint segments.
    pub fn segments_in(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &(a, b) in &self.intervals {
            clip_push(a, b, lo, hi, &mut out);
        }
        if let Some(g) = &self.generator {
            g.push_segments(lo, hi, &mut out);
        }
        merge_segments(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    Empty,
    Full,
    Ball { center: Vec<f64>, radius: f64 },
    AxisBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `{x : ⟨normal, x⟩ < offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// `{ρ(cos φ, sin φ) : ρ > 0, φ ∈ (angle_lo, angle_hi)}`, doubled through the origin when antipodal.
    Sector2D { angle_lo: f64, angle_hi: f64, antipodal: bool },
    IntervalUnion1D { set: IntervalUnion1D },
    /// `M·child + shift`.
    AffineImage { map: Affine, child: Box<Region> },
    Scale { factor: f64, child: Box<Region> },
    Union { children: Vec<Region> },
    Intersect { children: Vec<Region> },
    Complement { child: Box<Region> },
}

fn in_open_arc(phi: f64, lo: f64, hi: f64) -> bool {
    let w = hi - lo;
    if w >= TAU {
        return true;
    }
    let r = (phi - lo).rem_euclid(TAU);
    r > 0.0 && r < w
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn axis_box(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Region::AxisBox { lo, hi }
    }

    /// Double cone `|angle to the x-axis| < theta0` around both half-axes.
    pub fn cone(theta0: f64) -> Self {
        Region::Sector2D { angle_lo: -theta0, angle_hi: theta0, antipodal: true }
    }

    pub fn interval_union(set: IntervalUnion1D) -> Self {
        Region::IntervalUnion1D { set }
    }

    pub fn affine_image(map: Affine, child: Region) -> Self {
        Region::AffineImage { map, child: Box::new(child) }
    }

    pub fn scale(factor: f64, child: Region) -> Self {
        Region::Scale { factor, child: Box::new(child) }
    }

    pub fn intersect(children: Vec<Region>) -> Self {
        Region::Intersect { children }
    }

    pub fn union(children: Vec<Region>) -> Self {
        Region::Union { children }
    }

    pub fn complement(child: Region) -> Self {
        Region::Complement { child: Box::new(child) }
    }

    /// Exact CSG membership with open primitives.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Empty => false,
            Region::Full => true,
            Region::Ball { center, radius } => {
                let d2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                d2 < radius * radius
            }
            Region::AxisBox { lo, hi } => lo.iter().zip(hi).zip(x).all(|((a, b), v)| v > a && v < b),
            Region::HalfSpace { normal, offset } => {
                normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() < *offset
            }
            Region::Sector2D { angle_lo, angle_hi, antipodal } => {
                if x[0] == 0.0 && x[1] == 0.0 {
                    return false;
                }
                let phi = x[1].atan2(x[0]);
                in_open_arc(phi, *angle_lo, *angle_hi) || (*antipodal && in_open_arc(phi + PI, *angle_lo, *angle_hi))
            }
            Region::IntervalUnion1D { set } => x.get(set.axis).is_some_and(|&v| set.contains_scalar(v)),
            Region::AffineImage { map, child } => {
                let mut buf = [0.0; MAX_DIM];
                let d = map.dim();
                map.apply_inverse(x, &mut buf[..d]);
                child.contains(&buf[..d])
            }
            Region::Scale { factor, child } => {
                let mut buf = [0.0; MAX_DIM];
                let d = x.len();
                for i in 0..d {
                    buf[i] = x[i] / factor;
                }
                child.contains(&buf[..d])
            }
            Region::Union { children } => children.iter().any(|c| c.contains(x)),
            Region::Intersect { children } => children.iter().all(|c| c.contains(x)),
            Region::Complement { child } => !child.contains(x),
        }
    }

    /// The set clipped to `(lo, hi)` as exact segments, when the region is one-dimensional.
    pub fn interval_cover(&self, lo: f64, hi: f64) -> Option<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        match self {
            Region::Empty => {}
            Region::Full => clip_push(lo, hi, lo, hi, &mut out),
            Region::Ball { center, radius } if center.len() == 1 => {
                clip_push(center[0] - radius, center[0] + radius, lo, hi, &mut out)
            }
            Region::AxisBox { lo: a, hi: b } if a.len() == 1 => clip_push(a[0], b[0], lo, hi, &mut out),
            Region::HalfSpace { normal, offset } if normal.len() == 1 => {
                let n = normal[0];
                if n > 0.0 {
                    clip_push(f64::NEG_INFINITY, offset / n, lo, hi, &mut out);
                } else if n < 0.0 {
                    clip_push(offset / n, f64::INFINITY, lo, hi, &mut out);
                } else if 0.0 < *offset {
                    clip_push(lo, hi, lo, hi, &mut out);
                }
            }
            Region::IntervalUnion1D { set } if set.axis == 0 => return Some(set.segments_in(lo, hi)),
            Region::AffineImage { map, child } if map.dim() == 1 => {
                let (m, s) = (map.matrix[(0, 0)], map.shift[0]);
                let (a, b) = ((lo - s) / m, (hi - s) / m);
                let inner = child.interval_cover(a.min(b), a.max(b))?;
                out = inner.into_iter().map(|(p, q)| {
                    let (u, v) = (m * p + s, m * q + s);
                    (u.min(v), u.max(v))
                }).collect();
                return Some(merge_segments(out));
            }
            Region::Scale { factor, child } => {
                let f = *factor;
                let (a, b) = (lo / f, hi / f);
                let inner = child.interval_cover(a.min(b), a.max(b))?;
                out = inner.into_iter().map(|(p, q)| {
                    let (u, v) = (f * p, f * q);
                    (u.min(v), u.max(v))
                }).collect();
                return Some(merge_segments(out));
            }
            Region::Union { children } => {
                for c in children {
                    out.extend(c.interval_cover(lo, hi)?);
                }
                return Some(merge_segments(out));
            }
            Region::Intersect { children } => {
                let mut acc = vec![(lo, hi)];
                for c in children {
                    acc = intersect_segments(&acc, &c.interval_cover(lo, hi)?);
                }
                return Some(acc);
            }
            Region::Complement { child } => {
                return Some(complement_segments(&child.interval_cover(lo, hi)?, lo, hi));
            }
            _ => return None,
        }
        Some(out)
    }

    /// `∫_region N(x; mean, cov) dx` in closed form when the region depends on a
    /// single linear functional of `x` (slabs, half-spaces, their affine images).
    pub fn gaussian_mass_exact(&self, mean: &DVector<f64>, cov: &Mat) -> Option<f64> {
        match self {
            Region::Empty => Some(0.0),
            Region::Full => Some(1.0),
            Region::IntervalUnion1D { set } => {
                let mu = mean[set.axis];
                let sd = cov[(set.axis, set.axis)].max(0.0).sqrt();
                Some(interval_union_normal_mass(set, mu, sd))
            }
            Region::HalfSpace { normal, offset } => {
                let n = DVector::from_column_slice(normal);
                let mu = n.dot(mean);
                let sd = (n.transpose() * cov * &n)[(0, 0)].max(0.0).sqrt();
                Some(normal_interval_mass(f64::NEG_INFINITY, *offset, mu, sd))
            }
            Region::AffineImage { map, child } => {
                let s = DVector::from_column_slice(map.shift());
                let m = map.inverse();
                child.gaussian_mass_exact(&(m * (mean - s)), &(m * cov * m.transpose()))
            }
            Region::Scale { factor, child } => {
                child.gaussian_mass_exact(&(mean / *factor), &(cov / (factor * factor)))
            }
            Region::Complement { child } => child.gaussian_mass_exact(mean, cov).map(|p| 1.0 - p),
            _ if mean.len() == 1 => {
                let sd = cov[(0, 0)].max(0.0).sqrt();
                let w = 12.0 * sd;
                let segs = self.interval_cover(mean[0] - w, mean[0] + w)?;
                Some(segs.iter().map(|&(a, b)| normal_interval_mass(a, b, mean[0], sd)).sum())
            }
            _ => None,
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(a < X < b)` for `X ~ N(mu, sd²)`, evaluated on the tail side to avoid cancellation.
pub fn normal_interval_mass(a: f64, b: f64, mu: f64, sd: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if sd == 0.0 {
        return if mu > a && mu < b { 1.0 } else { 0.0 };
    }
    let (za, zb) = ((a - mu) / sd, (b - mu) / sd);
    if zb - za < 1e-6 && za.is_finite() && zb.is_finite() {
        let zm = 0.5 * (za + zb);
        return (zb - za) * (-0.5 * zm * zm).exp() / (2.0 * PI).sqrt();
    }
    if za >= 0.0 {
        std_normal_cdf(-za) - std_normal_cdf(-zb)
    } else if zb <= 0.0 {
        std_normal_cdf(zb) - std_normal_cdf(za)
    } else {
        1.0 - std_normal_cdf(za) - std_normal_cdf(-zb)
    }
}

fn interval_union_normal_mass(set: &IntervalUnion1D, mu: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return if set.contains_scalar(mu) { 1.0 } else { 0.0 };
    }
    let w = 12.0 * sd;
    set.segments_in(mu - w, mu + w)
        .iter()
        .map(|&(a, b)| normal_interval_mass(a, b, mu, sd))
        .sum()
}

/// Axis-aligned box `[lo, hi]` used as a measurement window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxWindow {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxWindow {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch("box bounds".into()));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(invalid("box", "must be bounded"));
        }
        Ok(Self { lo, hi })
    }

    pub fn around_ball(center: &[f64], r: f64) -> Self {
        Self { lo: center.iter().map(|c| c - r).collect(), hi: center.iter().map(|c| c + r).collect() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).max(0.0)).product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MeasureMethod {
    /// Midpoint counting at resolution `h`.
    Grid { h: f64 },
    /// Midpoint counting with `cells` per axis.
    GridCells { cells: usize },
    MonteCarlo { n: usize, seed: u64 },
    /// Exact segments for one-dimensional regions, else the default grid (d ≤ 2) or Monte Carlo.
    Auto,
}

impl Default for MeasureMethod {
    fn default() -> Self {
        MeasureMethod::Auto
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `λ(r ∩ box)`.
pub fn measure_in_box(r: &Region, bx: &BoxWindow, method: MeasureMethod) -> Result<MeasureEstimate> {
    measure_keyed(r, bx, method, 0)
}

/// Same as [`measure_in_box`]; Monte Carlo draws from the stream keyed by `key`.
pub fn measure_keyed(r: &Region, bx: &BoxWindow, method: MeasureMethod, key: u64) -> Result<MeasureEstimate> {
    let vol = bx.volume();
    if vol == 0.0 {
        return Ok(MeasureEstimate { value: 0.0, std_error: 0.0 });
    }
    let d = bx.dim();
    if d > MAX_DIM {
        return Err(invalid("box", format!("dimension {d} exceeds {MAX_DIM}")));
    }
    match method {
        MeasureMethod::Grid { h } => {
            if !(h > 0.0) {
                return Err(invalid("h", "must be positive"));
            }
            let cells: Vec<usize> =
                bx.lo.iter().zip(&bx.hi).map(|(a, b)| ((b - a) / h).ceil().max(1.0) as usize).collect();
            Ok(grid_measure(r, bx, &cells))
        }
        MeasureMethod::GridCells { cells } => {
            if cells == 0 {
                return Err(invalid("cells", "must be positive"));
            }
            Ok(grid_measure(r, bx, &vec![cells; d]))
        }
        MeasureMethod::MonteCarlo { n, seed } => {
            if n == 0 {
                return Err(invalid("n", "must be at least 1"));
            }
            Ok(mc_measure(r, bx, n, seed, key))
        }
        MeasureMethod::Auto => {
            if d == 1 {
                if let Some(segs) = r.interval_cover(bx.lo[0], bx.hi[0]) {
                    let v = segs.iter().fold(0.0, |acc, (a, b)| acc + (b - a));
                    return Ok(MeasureEstimate { value: v, std_error: 0.0 });
                }
            }
            if d <= 2 {
                let h = (vol / DEFAULT_GRID_CELLS).powf(1.0 / d as f64);
                measure_keyed(r, bx, MeasureMethod::Grid { h }, key)
            } else {
                Ok(mc_measure(r, bx, DEFAULT_MC_SAMPLES, 0, key))
            }
        }
    }
}

fn grid_measure(r: &Region, bx: &BoxWindow, cells: &[usize]) -> MeasureEstimate {
    let d = bx.dim();
    let steps: Vec<f64> = (0..d).map(|i| (bx.hi[i] - bx.lo[i]) / cells[i] as f64).collect();
    let inner: usize = cells[1..].iter().product();
    let count: usize = (0..cells[0])
        .into_par_iter()
        .map(|i0| {
            let mut x = [0.0; MAX_DIM];
            x[0] = bx.lo[0] + (i0 as f64 + 0.5) * steps[0];
            let mut idx = [0usize; MAX_DIM];
            let mut c = 0usize;
            for _ in 0..inner {
                for k in 1..d {
                    x[k] = bx.lo[k] + (idx[k] as f64 + 0.5) * steps[k];
                }
                if r.contains(&x[..d]) {
                    c += 1;
                }
                for k in (1..d).rev() {
                    idx[k] += 1;
                    if idx[k] < cells[k] {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            c
        })
        .sum();
    let cell_vol: f64 = steps.iter().product();
    MeasureEstimate { value: count as f64 * cell_vol, std_error: 0.0 }
}

/// Counter-based stream: the seed selects the key, `key` selects the stream.
pub fn keyed_rng(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

pub fn stream_key(probe: usize, slice: usize) -> u64 {
    ((probe as u64) << 32) | slice as u64
}

fn mc_measure(r: &Region, bx: &BoxWindow, n: usize, seed: u64, key: u64) -> MeasureEstimate {
    let d = bx.dim();
    let mut rng = keyed_rng(seed, key);
    let mut x = [0.0; MAX_DIM];
    let mut hits = 0usize;
    for _ in 0..n {
        for k in 0..d {
            x[k] = rng.gen_range(bx.lo[k]..bx.hi[k]);
        }
        if r.contains(&x[..d]) {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    let vol = bx.volume();
    MeasureEstimate { value: vol * p, std_error: vol * (p * (1.0 - p) / n as f64).sqrt() }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThicknessReport {
    pub min_ratio: f64,
    pub witness: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl ThicknessReport {
    /// `(δ, α)`-thick over the probe family.
    pub fn is_thick(&self, delta: f64) -> bool {
        self.min_ratio >= delta
    }
}

/// `min_x λ(r ∩ (x + [0,α])) / Πα` over the probes.
pub fn thickness_probe(r: &Region, alpha: &[f64], probes: &[Vec<f64>], method: MeasureMethod) -> Result<ThicknessReport> {
    if probes.is_empty() {
        return Err(invalid("probes", "must be non-empty"));
    }
    if alpha.iter().any(|&a| !(a > 0.0)) {
        return Err(invalid("alpha", "entries must be positive"));
    }
    let vol: f64 = alpha.iter().product();
    let ratios = probes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if x.len() != alpha.len() {
                return Err(Error::DimensionMismatch("probe vs alpha".into()));
            }
            let hi = x.iter().zip(alpha).map(|(a, b)| a + b).collect();
            let bx = BoxWindow::new(x.clone(), hi)?;
            Ok(measure_keyed(r, &bx, method, stream_key(i, 0))?.value / vol)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (imin, &min_ratio) = ratios
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    Ok(ThicknessReport { min_ratio, witness: probes[imin].clone(), ratios })
}

#[derive(Clone)]
pub struct FlowFn(pub Arc<dyn Fn(f64) -> Mat + Send + Sync>);

impl fmt::Debug for FlowFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FlowFn(..)")
    }
}

/// A time-indexed matrix family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixFlow {
    Identity { dim: usize },
    /// `t ↦ exp((offset + rate·t)·generator)`.
    LinearExp { generator: Vec<Vec<f64>>, offset: f64, rate: f64 },
    #[serde(skip)]
    Custom(FlowFn),
}

impl MatrixFlow {
    pub fn linear_exp(generator: &Mat, offset: f64, rate: f64) -> Self {
        let rows = (0..generator.nrows()).map(|i| generator.row(i).iter().copied().collect()).collect();
        MatrixFlow::LinearExp { generator: rows, offset, rate }
    }

    pub fn custom(f: impl Fn(f64) -> Mat + Send + Sync + 'static) -> Self {
        MatrixFlow::Custom(FlowFn(Arc::new(f)))
    }

    pub fn at(&self, t: f64) -> Mat {
        match self {
            MatrixFlow::Identity { dim } => Mat::identity(*dim, *dim),
            MatrixFlow::LinearExp { generator, offset, rate } => {
                let n = generator.len();
                let flat: Vec<f64> = generator.iter().flatten().copied().collect();
                (Mat::from_row_slice(n, n, &flat) * (offset + rate * t)).exp()
            }
            MatrixFlow::Custom(f) => (f.0)(t),
        }
    }
}

#[derive(Clone)]
pub struct ScaleFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for ScaleFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScaleFn(..)")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ScaleLaw {
    /// `√(1 + 2μt)`.
    SqrtLinear { mu: f64 },
    #[serde(skip)]
    Custom(ScaleFn),
}

impl ScaleLaw {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ScaleLaw::SqrtLinear { mu } => (1.0 + 2.0 * mu * t).sqrt(),
            ScaleLaw::Custom(f) => (f.0)(t),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "support", rename_all = "snake_case")]
pub enum MovingSupport {
    Static { region: Region },
    /// `ω(t) = flow(t)·ω₀`.
    FlowImage { region: Region, flow: MatrixFlow },
    /// `ω(t) = scale(t)·ω`.
    Dilation { region: Region, scale: ScaleLaw },
    /// The child support on `E`, empty elsewhere.
    Gated { child: Box<MovingSupport>, time_set: TimeSet },
}

impl MovingSupport {
    pub fn region_at(&self, t: f64) -> Result<Region> {
        Ok(match self {
            MovingSupport::Static { region } => region.clone(),
            MovingSupport::FlowImage { region, flow } => Region::affine_image(Affine::linear(flow.at(t))?, region.clone()),
            MovingSupport::Dilation { region, scale } => Region::scale(scale.at(t), region.clone()),
            MovingSupport::Gated { child, time_set } => {
                if time_set.contains(t) {
                    child.region_at(t)?
                } else {
                    Region::Empty
                }
            }
        })
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> Result<bool> {
        Ok(self.region_at(t)?.contains(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralThickness {
    pub min_j: f64,
    pub argmin: Vec<f64>,
    pub profile: Vec<f64>,
    /// `J(last probe) / J(first probe)`; probes are expected ordered near to far.
    pub far_near_ratio: f64,
}

/// `J(x) = Σ_slices Δt · λ(B(x,r) ∩ flow(t)·ω(t))` with midpoint time nodes.
pub fn integral_thickness(
    s: &MovingSupport,
    flow: &MatrixFlow,
    horizon: f64,
    r: f64,
    probes: &[Vec<f64>],
    n_time: usize,
    method: MeasureMethod,
) -> Result<IntegralThickness> {
    if !(horizon > 0.0) || !(r > 0.0) {
        return Err(invalid("horizon/r", "must be positive"));
    }
    if n_time == 0 || probes.is_empty() {
        return Err(invalid("n_time/probes", "must be non-empty"));
    }
    let dt = horizon / n_time as f64;
    let slices: Vec<Region> = (0..n_time)
        .map(|j| {
            let t = (j as f64 + 0.5) * dt;
            Ok(Region::affine_image(Affine::linear(flow.at(t))?, s.region_at(t)?))
        })
        .collect::<Result<_>>()?;
    let profile = probes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let ball = Region::ball(x.clone(), r);
            let bx = BoxWindow::around_ball(x, r);
            slices
                .par_iter()
                .enumerate()
                .map(|(j, w)| {
                    let cut = Region::intersect(vec![ball.clone(), w.clone()]);
                    Ok(measure_keyed(&cut, &bx, method, stream_key(i, j))?.value * dt)
                })
                .collect::<Result<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (imin, &min_j) = profile.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let near = profile[0];
    let far = profile[profile.len() - 1];
    let far_near_ratio = if near > 0.0 { far / near } else if far > 0.0 { f64::INFINITY } else { 1.0 };
    Ok(IntegralThickness { min_j, argmin: probes[imin].clone(), profile, far_near_ratio })
}

/// Probes on the ray through `direction` at the given distances.
pub fn ray_probes(direction: &[f64], distances: &[f64]) -> Vec<Vec<f64>> {
    let n = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    distances
        .iter()
        .map(|&s| direction.iter().map(|v| v / n * s).collect())
        .collect()
}

/// Gaussian probability mass of a region; closed form when available, else
/// a weighted midpoint grid on the `6σ` box (d ≤ 2) or Monte Carlo.
pub fn gaussian_mass(r: &Region, mean: &DVector<f64>, cov: &Mat, cells_per_axis: usize, seed: u64) -> Result<f64> {
    if let Some(p) = r.gaussian_mass_exact(mean, cov) {
        return Ok(p);
    }
    let d = mean.len();
    let chol = nalgebra::Cholesky::new(cov.clone()).ok_or_else(|| invalid("cov", "must be positive definite"))?;
    if d <= 2 {
        let sd: Vec<f64> = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
        let lo: Vec<f64> = (0..d).map(|i| mean[i] - 6.0 * sd[i]).collect();
        let h: Vec<f64> = (0..d).map(|i| 12.0 * sd[i] / cells_per_axis as f64).collect();
        let prec = chol.inverse();
        let norm = (2.0 * PI).powf(d as f64 / 2.0) * cov.determinant().sqrt();
        let cell: f64 = h.iter().product();
        let n1 = if d == 2 { cells_per_axis } else { 1 };
        let total: f64 = (0..cells_per_axis)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                let mut x = [0.0; 2];
                x[0] = lo[0] + (i as f64 + 0.5) * h[0];
                for j in 0..n1 {
                    if d == 2 {
                        x[1] = lo[1] + (j as f64 + 0.5) * h[1];
                    }
                    if r.contains(&x[..d]) {
                        let mut q = 0.0;
                        for a in 0..d {
                            for b in 0..d {
                                q += (x[a] - mean[a]) * prec[(a, b)] * (x[b] - mean[b]);
                            }
                        }
                        acc += (-0.5 * q).exp();
                    }
                }
                acc
            })
            .sum();
        Ok(total * cell / norm)
    } else {
        let n = DEFAULT_MC_SAMPLES;
        let mut rng = keyed_rng(seed, 0);
        let l = chol.l();
        let mut hits = 0usize;
        let mut x = [0.0; MAX_DIM];
        for _ in 0..n {
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let y = mean + &l * z;
            x[..d].copy_from_slice(y.as_slice());
            if r.contains(&x[..d]) {
                hits += 1;
            }
        }
        Ok(hits as f64 / n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn membership_examples() {
        assert!(Region::ball(vec![0.0, 0.0], 1.0).contains(&[0.0, 0.0]));
        assert!(Region::cone(PI / 4.0).contains(&[1.0, 0.5]));
        assert!(Region::cone(PI / 4.0).contains(&[-1.0, 0.5]));
        assert!(!Region::cone(PI / 4.0).contains(&[0.5, 1.0]));
        let w = Region::interval_union(IntervalUnion1D::square_gaps());
        assert!(w.contains(&[5.0]));
        assert!(w.contains(&[-5.0]));
        assert!(!w.contains(&[3.0]));
        assert!(!w.contains(&[4.0]));
        assert!(w.contains(&[0.0]));
    }

    #[test]
    fn open_primitives_exclude_boundary() {
        assert!(!Region::ball(vec![0.0], 1.0).contains(&[1.0]));
        assert!(!Region::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]).contains(&[0.0, 0.5]));
        assert!(!Region::interval_union(IntervalUnion1D::periodic(2.0, 0.0, 1.0)).contains(&[2.0]));
        assert!(!Region::cone(0.3).contains(&[0.0, 0.0]));
    }

    #[test]
    fn measure_examples() {
        let bx = BoxWindow::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let m = measure_in_box(&Region::ball(vec![0.0, 0.0], 1.0), &bx, MeasureMethod::Grid { h: 1e-3 }).unwrap();
        assert!((m.value - PI).abs() < 1e-2);
        let strip = Region::interval_union(IntervalUnion1D::new(vec![(-0.25, 0.25)]).unwrap().on_axis(1));
        let unit = BoxWindow::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let m = measure_in_box(&strip, &unit, MeasureMethod::Auto).unwrap();
        assert_relative_eq!(m.value, 0.25, epsilon = 1e-9);
        let degenerate = BoxWindow::new(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(measure_in_box(&Region::Full, &degenerate, MeasureMethod::Auto).unwrap().value, 0.0);
    }

    #[test]
    fn exact_one_dimensional_cover() {
        let w = Region::interval_union(IntervalUnion1D::square_gaps());
        let bx = BoxWindow::new(vec![0.0], vec![30.0]).unwrap();
        // (0,1) + (1,2) + (4,6) + (9,12) + (16,20) + (25,30)
        let m = measure_in_box(&w, &bx, MeasureMethod::Auto).unwrap();
        assert_relative_eq!(m.value, 1.0 + 1.0 + 2.0 + 3.0 + 4.0 + 5.0, epsilon = 1e-12);
        let scaled = Region::scale(2.0, w.clone());
        let bx = BoxWindow::new(vec![0.0], vec![60.0]).unwrap();
        assert_relative_eq!(measure_in_box(&scaled, &bx, MeasureMethod::Auto).unwrap().value, 32.0, epsilon = 1e-12);
        let grid = measure_in_box(&scaled, &bx, MeasureMethod::Grid { h: 1e-4 }).unwrap();
        assert!((grid.value - 32.0).abs() < 1e-3);
    }

    #[test]
    fn periodic_probe_ratio_half() {
        let w = Region::interval_union(IntervalUnion1D::periodic(2.0, 0.0, 1.0));
        let probes: Vec<Vec<f64>> = (0..20).map(|i| vec![-7.3 + 0.77 * i as f64]).collect();
        let rep = thickness_probe(&w, &[2.0], &probes, MeasureMethod::Auto).unwrap();
        assert_relative_eq!(rep.min_ratio, 0.5, epsilon = 1e-12);
        assert!(rep.ratios.iter().all(|r| (r - 0.5).abs() < 1e-12));
        let rep = thickness_probe(&Region::Full, &[1.0, 3.0], &[vec![4.0, -2.0]], MeasureMethod::Auto).unwrap();
        assert_relative_eq!(rep.min_ratio, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn vanishing_strips_lose_thickness() {
        let strips = Region::interval_union(IntervalUnion1D::vanishing_strips(1.0, 0.5));
        let big_n = 2.0;
        let alpha = [2.0 * big_n, 2.0 * big_n];
        let ratios: Vec<f64> = [4.0, 8.0, 16.0]
            .iter()
            .map(|&n| {
                thickness_probe(&strips, &alpha, &[vec![n, 0.0]], MeasureMethod::Grid { h: 1e-3 })
                    .unwrap()
                    .min_ratio
            })
            .collect();
        for (n, r) in [4.0f64, 8.0, 16.0].iter().zip(&ratios) {
            let bound = 4.0 * big_n * (2.0 * big_n + 1.0) * 0.5f64.powf(n - big_n) / (2.0 * big_n).powi(2);
            assert!(*r <= bound + 1e-3, "n={n}: {r} > {bound}");
        }
        assert!(ratios[2] < ratios[0]);
    }

    #[test]
    fn gated_empty_time_set_gives_zero() {
        let s = MovingSupport::Gated {
            child: Box::new(MovingSupport::Static { region: Region::Full }),
            time_set: TimeSet::empty(),
        };
        let j = integral_thickness(&s, &MatrixFlow::Identity { dim: 1 }, 1.0, 1.0, &[vec![0.0]], 8, MeasureMethod::Auto)
            .unwrap();
        assert_eq!(j.min_j, 0.0);
    }

    #[test]
    fn static_identity_flow_is_t_times_measure() {
        let w = Region::interval_union(IntervalUnion1D::periodic(2.0, 0.0, 1.0));
        let s = MovingSupport::Static { region: w.clone() };
        let x = vec![0.3];
        let j = integral_thickness(&s, &MatrixFlow::Identity { dim: 1 }, 1.7, 1.5, &[x.clone()], 5, MeasureMethod::Auto)
            .unwrap();
        let bx = BoxWindow::around_ball(&x, 1.5);
        let stat = measure_in_box(&Region::intersect(vec![Region::ball(x, 1.5), w]), &bx, MeasureMethod::Auto).unwrap();
        assert_relative_eq!(j.min_j, 1.7 * stat.value, epsilon = 1e-12);
    }

    #[test]
    fn normal_mass_tails() {
        assert_relative_eq!(normal_interval_mass(f64::NEG_INFINITY, f64::INFINITY, 0.3, 2.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(normal_interval_mass(-1.0, 1.0, 0.0, 1.0), 0.682_689_492_137_085_9, epsilon = 1e-14);
        let tiny = normal_interval_mass(30.0, 31.0, 0.0, 1.0);
        assert!(tiny > 0.0 && tiny < 1e-190);
    }

    #[test]
    fn gaussian_mass_slab_matches_grid() {
        let strip = Region::interval_union(IntervalUnion1D::new(vec![(-0.5, 0.7)]).unwrap().on_axis(1));
        let mean = DVector::from_vec(vec![0.2, 0.1]);
        let cov = Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let exact = gaussian_mass(&strip, &mean, &cov, 800, 0).unwrap();
        let wrapped = Region::intersect(vec![strip.clone(), Region::Full]);
        let grid = gaussian_mass(&wrapped, &mean, &cov, 4000, 0).unwrap();
        assert!((exact - grid).abs() < 1e-3, "{exact} vs {grid}");
        let rot = Affine::linear(Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
        let turned = Region::affine_image(rot, strip);
        let e2 = turned.gaussian_mass_exact(&mean, &cov).unwrap();
        let g2 = gaussian_mass(&Region::intersect(vec![turned, Region::Full]), &mean, &cov, 4000, 0).unwrap();
        assert!((e2 - g2).abs() < 1e-3);
    }

    #[test]
    fn region_json_round_trip() {
        let r = Region::union(vec![
            Region::cone(0.5),
            Region::affine_image(
                Affine::new(Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), vec![0.5, 0.0]).unwrap(),
                Region::interval_union(IntervalUnion1D::square_gaps().on_axis(1)),
            ),
            Region::complement(Region::ball(vec![1.0, 2.0], 0.5)),
        ]);
        let s = serde_json::to_string(&r).unwrap();
        let back: Region = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        let bad = r#"{"type":"affine_image","map":{"matrix":[[1,2],[2,4]],"shift":[0,0]},"child":{"type":"full"}}"#;
        assert!(serde_json::from_str::<Region>(bad).is_err());
    }
}
