//! Observability constants from spectral and dissipation estimates:
//! cost constants, density-point sequences, the telescoping assembler and
//! a spectral-estimate harness for band-limited functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::IntervalUnion1D;
use crate::quadratic::gauss_legendre;

/// Finite sorted union of closed intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TimeSetWire", into = "TimeSetWire")]
pub struct TimeSet {
    intervals: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct TimeSetWire {
    intervals: Vec<[f64; 2]>,
}

impl TryFrom<TimeSetWire> for TimeSet {
    type Error = crate::Error;
    fn try_from(w: TimeSetWire) -> Result<Self> {
        TimeSet::new(w.intervals.into_iter().map(|[a, b]| (a, b)).collect())
    }
}

impl From<TimeSet> for TimeSetWire {
    fn from(s: TimeSet) -> Self {
        TimeSetWire { intervals: s.intervals.iter().map(|&(a, b)| [a, b]).collect() }
    }
}

impl TimeSet {
    /// Sorts and merges overlapping intervals.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite()) || a > b {
                return Err(invalid("intervals", format!("bad interval [{a}, {b}]")));
            }
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv.0 <= t);
        i > 0 && t <= self.intervals[i - 1].1
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// `λ(E ∩ [lo, hi])`.
    pub fn measure_in(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        self.intervals
            .iter()
            .map(|&(a, b)| (b.min(hi) - a.max(lo)).max(0.0))
            .sum()
    }

    /// `E ∩ [lo, hi]` as a list of closed intervals.
    pub fn clip(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.intervals
            .iter()
            .filter_map(|&(a, b)| {
                let (x, y) = (a.max(lo), b.min(hi));
                (x <= y).then_some((x, y))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LRParams {
    pub a: f64,
    pub b: f64,
    pub m1: f64,
    pub m2: f64,
    pub c1: f64,
    pub c1p: f64,
    pub c2: f64,
    pub c2p: f64,
}

impl LRParams {
    pub fn new(a: f64, b: f64, m1: f64, m2: f64, c1: f64, c1p: f64, c2: f64, c2p: f64) -> Result<Self> {
        let p = Self { a, b, m1, m2, c1, c1p, c2, c2p };
        p.validate()?;
        Ok(p)
    }

    /// `c1' = c2' = 1`, `m2 = 0`.
    pub fn simple(a: f64, b: f64, m1: f64, c1: f64, c2: f64) -> Result<Self> {
        Self::new(a, b, m1, 0.0, c1, 1.0, c2, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < self.b) {
            return Err(invalid("a/b", format!("need 0 < a < b, got a={}, b={}", self.a, self.b)));
        }
        if !(self.m1 > 0.0) || !(self.m2 >= 0.0) {
            return Err(invalid("m1/m2", "need m1 > 0 and m2 ≥ 0"));
        }
        for (name, v) in [("c1", self.c1), ("c1p", self.c1p), ("c2", self.c2), ("c2p", self.c2p)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("constants", format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `a·m1/(b−a)`, the exponent of the observability cost.
    pub fn cost_exponent(&self) -> f64 {
        self.a * self.m1 / (self.b - self.a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostConstant {
    pub gamma: f64,
    pub beta: f64,
    pub alpha_exp: f64,
    pub c_min: f64,
    pub mu_star: f64,
}

pub fn cost_constant(p: &LRParams) -> Result<CostConstant> {
    p.validate()?;
    let (a, b, m1) = (p.a, p.b, p.m1);
    let gamma = a * m1 / (b - a);
    let beta = 2.0 * gamma + a * b * m1 / ((b - a) * (b - a));
    let alpha_exp = gamma + 1.0 + a + a * a / (b - a);
    let ln_c = b / (b - a) * p.c1.ln() - a / (b - a) * p.c2.ln()
        + alpha_exp * 2f64.ln()
        + beta * beta.ln()
        - gamma * gamma.ln()
        - (beta - gamma) * (beta - gamma).ln();
    let mu_star = (beta / (beta - gamma)).log2();
    Ok(CostConstant { gamma, beta, alpha_exp, c_min: ln_c.exp(), mu_star })
}

/// `h(μ) = 2^{μβ}/(2^μ − 1)^γ`.
pub fn cost_profile(mu: f64, gamma: f64, beta: f64) -> f64 {
    (mu * beta * 2f64.ln() - gamma * (2f64.powf(mu) - 1.0).ln()).exp()
}

/// Constants of the three sequence properties.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceConstants {
    pub rho: f64,
    pub c0: f64,
    pub c0p: f64,
}

impl SequenceConstants {
    pub const DENSITY: Self = Self { rho: 0.75, c0: 1.0 / 12.0, c0p: 0.25 };

    pub fn geometric(mu: f64) -> Self {
        let q = 2f64.powf(-mu);
        Self { rho: 1.0, c0: q, c0p: 1.0 - q }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LRSequence {
    pub t_star: f64,
    pub t: Vec<f64>,
    pub constants: SequenceConstants,
    /// Scale on which the density precondition was certified (density sequences only).
    pub r0: Option<f64>,
}

impl LRSequence {
    /// `τ_j = (t_{j−1} − t_j)/2` for `j ≥ 1`; index 0 holds `τ_1`.
    pub fn taus(&self) -> Vec<f64> {
        self.t.windows(2).map(|w| 0.5 * (w[0] - w[1])).collect()
    }
}

/// `t_j = T/2^{(j+1)μ}` for `j = 0..=j_max`.
pub fn telescoping_sequence(t_final: f64, mu: f64, j_max: usize) -> Result<LRSequence> {
    if !(mu > 0.0) || !(t_final > 0.0) {
        return Err(invalid("mu/T", "must be positive"));
    }
    let t = (0..=j_max).map(|j| t_final * 2f64.powf(-((j + 1) as f64) * mu)).collect();
    Ok(LRSequence { t_star: 0.0, t, constants: SequenceConstants::geometric(mu), r0: None })
}

pub const DENSITY_RATIO: f64 = 0.9;
const MAX_HALVINGS: usize = 60;

/// `min_{0<r≤r0} λ(E∩[t*,t*+r])/r`. The ratio increases inside `E` and
/// decreases across gaps, so the minimum sits at a gap end or at `r0`.
pub fn min_density_ratio(e: &TimeSet, t_star: f64, r0: f64) -> f64 {
    let ratio = |r: f64| e.measure_in(t_star, t_star + r) / r;
    e.intervals()
        .iter()
        .map(|iv| iv.0 - t_star)
        .filter(|&r| r > 0.0 && r <= r0)
        .map(ratio)
        .fold(ratio(r0), f64::min)
}

/// `λ(E∩(s, (s+t)/2)) − ρ(t−s)/2` at `s`.
fn tm1_slack(e: &TimeSet, s: f64, t: f64, rho: f64) -> f64 {
    e.measure_in(s, 0.5 * (s + t)) - rho * 0.5 * (t - s)
}

/// Sub-intervals of `[lo, hi] ∩ E` where the next point would satisfy the first property.
fn feasible_set(e: &TimeSet, lo: f64, hi: f64, t: f64, rho: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in e.clip(lo, hi) {
        let mut cuts = vec![a, b];
        for &(p, q) in e.intervals() {
            for x in [p, q, 2.0 * p - t, 2.0 * q - t] {
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            let (fp, fq) = (tm1_slack(e, p, t, rho), tm1_slack(e, q, t, rho));
            let seg = match (fp >= 0.0, fq >= 0.0) {
                (true, true) => Some((p, q)),
                (true, false) => Some((p, p + (q - p) * fp / (fp - fq))),
                (false, true) => Some((q - (q - p) * fq / (fq - fp), q)),
                _ => None,
            };
            if let Some(sg) = seg {
                match out.last_mut() {
                    Some(last) if last.1 >= sg.0 => last.1 = last.1.max(sg.1),
                    _ => out.push(sg),
                }
            }
        }
    }
    out
}

/// Point of `set` closest to `target`, pulled inside its interval by `margin` when possible.
fn closest_inside(set: &[(f64, f64)], target: f64, margin: f64) -> Option<f64> {
    set.iter()
        .map(|&(a, b)| {
            let (lo, hi) = if b - a > 2.0 * margin { (a + margin, b - margin) } else { (0.5 * (a + b), 0.5 * (a + b)) };
            target.clamp(lo, hi)
        })
        .min_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()))
}

/// Decreasing sequence in `(t*, t*+R) ∩ E` with each `t_{j+1}` in the middle half band
/// `[t*+(t_j−t*)/4, t*+3(t_j−t*)/4]`, closest to the band midpoint among admissible points.
pub fn density_sequence(e: &TimeSet, t_star: f64, r: f64, j_max: usize) -> Result<LRSequence> {
    if !(r > 0.0) || !t_star.is_finite() {
        return Err(invalid("R/t_star", "need R > 0 and finite t*"));
    }
    if !e.contains(t_star) {
        return Err(Error::DensityFailure { level: 0 });
    }
    let mut r0 = r;
    let mut certified = false;
    for _ in 0..MAX_HALVINGS {
        if min_density_ratio(e, t_star, r0) >= DENSITY_RATIO {
            certified = true;
            break;
        }
        r0 *= 0.5;
    }
    if !certified {
        return Err(Error::DensityFailure { level: 0 });
    }
    let consts = SequenceConstants::DENSITY;
    let t0 = closest_inside(&e.clip(t_star, t_star + r0), t_star + 0.5 * r0, 1e-9 * r0)
        .filter(|&x| x > t_star && x < t_star + r0)
        .ok_or(Error::DensityFailure { level: 0 })?;
    let mut t = vec![t0];
    for j in 0..j_max {
        let tj = t[j];
        let delta = tj - t_star;
        let margin = 1e-9 * delta;
        let (lo, hi) = (t_star + 0.25 * delta + margin, t_star + 0.75 * delta - margin);
        let feas = feasible_set(e, lo, hi, tj, consts.rho);
        let next = closest_inside(&feas, t_star + 0.5 * delta, margin).ok_or(Error::DensityFailure { level: j + 1 })?;
        if !(next > t_star && next < tj) {
            return Err(Error::DensityFailure { level: j + 1 });
        }
        t.push(next);
    }
    Ok(LRSequence { t_star, t, constants: consts, r0: Some(r0) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceCheck {
    pub tm1: bool,
    pub tm2: bool,
    pub tm3: bool,
    pub in_set: bool,
    pub decreasing: bool,
    /// First level violating any property.
    pub first_violation: Option<usize>,
}

impl SequenceCheck {
    pub fn all(&self) -> bool {
        self.tm1 && self.tm2 && self.tm3 && self.in_set && self.decreasing
    }
}

/// Rounding allowance; geometric sequences meet the second and third properties with equality.
const REL_SLACK: f64 = 1e-12;

/// Checks the three properties with exact interval measures on `E`.
pub fn verify_sequence(e: &TimeSet, seq: &LRSequence) -> SequenceCheck {
    let SequenceConstants { rho, c0, c0p } = seq.constants;
    let t = &seq.t;
    let mut first = None;
    let flag = |ok: bool, j: usize, first: &mut Option<usize>| {
        if !ok && first.map_or(true, |f| j < f) {
            *first = Some(j);
        }
        ok
    };
    let mut tm1 = true;
    let mut tm2 = true;
    let mut in_set = true;
    let mut decreasing = true;
    for (j, &tj) in t.iter().enumerate() {
        in_set &= flag(e.contains(tj) && tj > seq.t_star, j, &mut first);
        if j >= 1 {
            decreasing &= flag(tj < t[j - 1], j, &mut first);
            let half = 0.5 * (t[j - 1] - tj);
            tm1 &= flag(e.measure_in(tj, tj + half) >= rho * half * (1.0 - REL_SLACK) && half > 0.0, j, &mut first);
            if j + 1 < t.len() {
                tm2 &= flag(tj - t[j + 1] >= c0 * (t[j - 1] - tj) * (1.0 - REL_SLACK), j, &mut first);
            }
        }
    }
    let tm3 = t.len() < 2 || flag(t[0] - t[1] >= c0p * (t[0] - seq.t_star) * (1.0 - REL_SLACK), 0, &mut first);
    SequenceCheck { tm1, tm2, tm3, in_set, decreasing, first_violation: first }
}

/// Observations of one fixed datum `g` along the evolution from `t*`.
pub trait ObservationHooks {
    /// `‖U(t, t*) g‖²`.
    fn norm_sq(&self, t: f64) -> f64;
    /// `∫_{(lo,hi)∩E} ‖U(t, t*) g‖²_{L²(ω(t))} dt`.
    fn observed(&self, lo: f64, hi: f64) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TelescopeLevel {
    pub j: usize,
    pub tau_j: f64,
    pub k_j: u64,
    pub f_tau_j: f64,
    /// `‖U(t_j+τ_j, t*) g‖²`.
    pub x_j: f64,
    /// `f(τ_j)X_j − f(τ_{j+1})X_{j+1}`.
    pub difference: f64,
    pub observed: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TelescopeReport {
    pub gamma: f64,
    pub m: f64,
    pub levels: Vec<TelescopeLevel>,
    /// `f(τ_1)·X_1`.
    pub collapsed: f64,
    /// Sum of the differences; equals `collapsed − f(τ_{J+1})X_{J+1}`.
    pub partial_sum: f64,
    pub observed_total: f64,
    /// `C = M(2/C0')^{a m1/(b−a)}`.
    pub c: f64,
    /// `exp(C/(t_0−t*)^{a m1/(b−a)})`.
    pub observability_constant: f64,
}

/// Evaluates the telescoping chain for the datum behind `hooks`.
pub fn telescoping_assemble(p: &LRParams, eps: f64, seq: &LRSequence, hooks: &dyn ObservationHooks) -> Result<TelescopeReport> {
    p.validate()?;
    if !(eps > 0.0 && eps < 2.0) {
        return Err(invalid("eps", "must lie in (0, 2)"));
    }
    if seq.t.len() < 3 {
        return Err(Error::EmptySequence);
    }
    let (a, b, m1) = (p.a, p.b, p.m1);
    let SequenceConstants { rho, c0, c0p } = seq.constants;
    let e1 = m1 / (b - a);
    let ex = a * m1 / (b - a);
    let gamma = ((2.0 + eps) * p.c1 * 2f64.powf(a) / ((2.0 - eps) * p.c2 * c0.powf(b * m1 / (b - a)))).powf(1.0 / (b - a));
    let m = (2.0 + eps) * p.c1 * (2.0 * gamma).powf(a);
    let f = |s: f64| (-m / s.powf(ex)).exp();
    let taus = seq.taus();
    for (i, &tau) in taus.iter().enumerate() {
        let j = i + 1;
        if !(gamma / tau.powf(e1) > 1.0) {
            return Err(Error::WindowTooLarge { level: j, which: "gamma/tau^(m1/(b-a)) > 1".into() });
        }
        if !(rho * tau / (2.0 * p.c1p * p.c1p) >= (-eps * p.c1 * (2.0 * gamma).powf(a) / tau.powf(ex)).exp()) {
            return Err(Error::WindowTooLarge { level: j, which: "spectral prefactor".into() });
        }
        let lhs = 2.0 / (c0 * p.c2p * p.c2p * tau.powf(2.0 * p.m2 - 1.0));
        if !(lhs <= (eps * p.c2 * gamma.powf(b) * c0.powf(b * m1 / (b - a)) / tau.powf(ex)).exp()) {
            return Err(Error::WindowTooLarge { level: j, which: "dissipation prefactor".into() });
        }
    }
    let xs: Vec<f64> = taus.iter().enumerate().map(|(i, &tau)| hooks.norm_sq(seq.t[i + 1] + tau)).collect();
    let mut levels = Vec::with_capacity(taus.len().saturating_sub(1));
    for i in 0..taus.len() - 1 {
        let j = i + 1;
        let tau = taus[i];
        let lo_k = gamma / tau.powf(e1);
        let k_j = lo_k.ceil().max(1.0);
        if k_j > 2.0 * lo_k {
            return Err(Error::WindowTooLarge { level: j, which: "no integer cutoff in [γτ^-e, 2γτ^-e]".into() });
        }
        let tj = seq.t[j];
        let fj = f(tau);
        let difference = fj * xs[i] - f(taus[i + 1]) * xs[i + 1];
        let observed = hooks.observed(tj, tj + tau);
        levels.push(TelescopeLevel {
            j,
            tau_j: tau,
            k_j: k_j as u64,
            f_tau_j: fj,
            x_j: xs[i],
            difference,
            observed,
            holds: difference <= observed * (1.0 + 1e-12) + 1e-300,
        });
    }
    let collapsed = f(taus[0]) * xs[0];
    let partial_sum = levels.iter().map(|l| l.difference).sum();
    let observed_total = levels.iter().map(|l| l.observed).sum();
    let c = m * (2.0 / c0p).powf(ex);
    let observability_constant = (c / (seq.t[0] - seq.t_star).powf(ex)).exp();
    Ok(TelescopeReport { gamma, m, levels, collapsed, partial_sum, observed_total, c, observability_constant })
}

/// `f(x) = e^{icx} Σ a_m s_β(x − x_m)` with `s_β(y) = sin(βy/2)/(πy)`, so that
/// `f̂` is supported in `[c − β/2, c + β/2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandLimited {
    pub beta: f64,
    pub center_freq: f64,
    pub nodes: Vec<f64>,
    pub coeffs: Vec<Complex64>,
}

fn sinc_kernel(beta: f64, y: f64) -> f64 {
    if y.abs() < 1e-8 {
        beta / (2.0 * PI) * (1.0 - (beta * y).powi(2) / 24.0)
    } else {
        (0.5 * beta * y).sin() / (PI * y)
    }
}

impl BandLimited {
    pub fn eval(&self, x: f64) -> Complex64 {
        let s: Complex64 = self.nodes.iter().zip(&self.coeffs).map(|(&xm, &a)| a * sinc_kernel(self.beta, x - xm)).sum();
        s * Complex64::from_polar(1.0, self.center_freq * x)
    }

    /// `‖f‖²_{L²(ℝ)}` in closed form.
    pub fn norm_sq(&self) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &xi) in self.nodes.iter().enumerate() {
            for (j, &xj) in self.nodes.iter().enumerate() {
                acc += self.coeffs[i] * self.coeffs[j].conj() * sinc_kernel(self.beta, xi - xj);
            }
        }
        acc.re
    }

    pub fn translated(&self, shift: f64) -> Self {
        Self {
            beta: self.beta,
            center_freq: self.center_freq,
            nodes: self.nodes.iter().map(|x| x + shift).collect(),
            coeffs: self.coeffs.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KovrijkineReport {
    pub ratio: f64,
    /// `log` of the bound, which overflows `f64` for moderate parameters.
    pub log_bound: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Gauss-Legendre integral of `|f|²` over `S ∩ [lo, hi]`, one panel per unit of `2π/β`.
pub fn norm_sq_on(f: &BandLimited, s: &IntervalUnion1D, lo: f64, hi: f64, nodes: usize) -> f64 {
    let (gx, gw) = gauss_legendre(nodes);
    let panel = 2.0 * PI / f.beta.max(1e-12);
    s.segments_in(lo, hi)
        .into_iter()
        .map(|(a, b)| {
            let pieces = ((b - a) / panel).ceil().max(1.0) as usize;
            let h = (b - a) / pieces as f64;
            (0..pieces)
                .map(|p| {
                    let (pa, pb) = (a + p as f64 * h, a + (p + 1) as f64 * h);
                    let (mid, half) = (0.5 * (pa + pb), 0.5 * (pb - pa));
                    gx.iter().zip(&gw).map(|(x, w)| w * half * f.eval(mid + half * x).norm_sqr()).sum::<f64>()
                })
                .sum::<f64>()
        })
        .sum()
}

/// `‖f‖²/‖f‖²_{L²(S)}` against `(C^d/δ)^{2C(αβ+d)}` for `d = 1`.
pub fn kovrijkine_ratio(
    f: &BandLimited,
    s: &IntervalUnion1D,
    delta: f64,
    alpha: f64,
    c_cal: f64,
    window: (f64, f64),
) -> Result<KovrijkineReport> {
    if !(c_cal > 1.0) {
        return Err(invalid("C_cal", "must exceed 1"));
    }
    if !(delta > 0.0 && delta <= 1.0) || !(alpha > 0.0) {
        return Err(invalid("delta/alpha", "need 0 < δ ≤ 1 and α > 0"));
    }
    if f.nodes.len() != f.coeffs.len() || !(f.beta > 0.0) {
        return Err(invalid("f", "nodes/coeffs mismatch or non-positive band"));
    }
    let measure: f64 = s.segments_in(window.0, window.1).iter().map(|(a, b)| b - a).sum();
    if measure <= 0.0 {
        return Err(Error::DegenerateSet("S has zero measure in the quadrature window".into()));
    }
    let total = f.norm_sq();
    let on_s = norm_sq_on(f, s, window.0, window.1, 16);
    if !(on_s > 0.0) {
        return Err(Error::DegenerateSet("f vanishes on S within the window".into()));
    }
    let ratio = total / on_s;
    let log_bound = 2.0 * c_cal * (alpha * f.beta + 1.0) * (c_cal / delta).ln();
    Ok(KovrijkineReport { ratio, log_bound, bound: log_bound.exp(), pass: ratio.ln() <= log_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cost_constant_example() {
        let c = cost_constant(&LRParams::simple(1.0, 2.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!((c.gamma, c.beta, c.alpha_exp), (1.0, 4.0, 4.0));
        assert_relative_eq!(c.c_min, 4096.0 / 27.0, max_relative = 1e-13);
        assert_relative_eq!(2f64.powf(c.mu_star), 4.0 / 3.0, max_relative = 1e-14);
        let k = cost_constant(&LRParams::simple(1.0, 2.0, 3.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(k.gamma, 3.0);
        assert!(LRParams::simple(2.0, 2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn telescoping_sequence_example() {
        let s = telescoping_sequence(1.0, 1.0, 5).unwrap();
        assert_eq!(s.t[0], 0.5);
        assert_eq!(s.t[3], 1.0 / 16.0);
        assert_eq!(s.taus()[0], 0.125);
        let e = TimeSet::new(vec![(0.0, 1.0)]).unwrap();
        assert!(verify_sequence(&e, &s).all());
    }

    #[test]
    fn density_sequence_full_interval() {
        let e = TimeSet::new(vec![(0.0, 1.0)]).unwrap();
        let s = density_sequence(&e, 0.0, 1.0, 20).unwrap();
        for w in s.t.windows(2) {
            assert_relative_eq!(w[1], w[0] / 2.0, max_relative = 1e-8);
        }
        assert!(verify_sequence(&e, &s).all());
    }

    #[test]
    fn density_sequence_failure() {
        let e = TimeSet::new(vec![(0.5, 1.0)]).unwrap();
        assert_eq!(density_sequence(&e, 0.0, 1.0, 5), Err(Error::DensityFailure { level: 0 }));
    }

    #[test]
    fn density_sequence_cantor_stage() {
        let e = TimeSet::new(vec![(0.0, 1.0 / 9.0), (2.0 / 9.0, 1.0 / 3.0), (2.0 / 3.0, 7.0 / 9.0), (8.0 / 9.0, 1.0)]).unwrap();
        let s = density_sequence(&e, 0.0, 1.0, 30).unwrap();
        assert!(verify_sequence(&e, &s).all());
    }

    #[test]
    fn min_density_ratio_at_gap() {
        let e = TimeSet::new(vec![(0.0, 0.5), (0.75, 1.0)]).unwrap();
        assert_relative_eq!(min_density_ratio(&e, 0.0, 1.0), 0.5 / 0.75);
    }

    #[test]
    fn band_limited_norm_closed_form() {
        let f = BandLimited { beta: 1.0, center_freq: 0.0, nodes: vec![0.0], coeffs: vec![Complex64::new(1.0, 0.0)] };
        assert_relative_eq!(f.norm_sq(), 1.0 / (2.0 * PI), max_relative = 1e-14);
        let all = IntervalUnion1D::new(vec![(-4000.0, 4000.0)]).unwrap();
        let r = kovrijkine_ratio(&f, &all, 1.0, 1.0, 10.0, (-4000.0, 4000.0)).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-3, "{}", r.ratio);
    }

    #[test]
    fn kovrijkine_degenerate() {
        let f = BandLimited { beta: 1.0, center_freq: 0.0, nodes: vec![0.0], coeffs: vec![Complex64::new(1.0, 0.0)] };
        let empty = IntervalUnion1D::new(vec![]).unwrap();
        assert!(matches!(kovrijkine_ratio(&f, &empty, 0.5, 2.0, 10.0, (-10.0, 10.0)), Err(Error::DegenerateSet(_))));
    }
}
