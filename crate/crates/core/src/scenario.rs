//! Named study cases with JSON/CSV outputs.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{
    integral_thickness, keyed_rng, ray_probes, thickness_probe, IntegralThickness, IntervalUnion1D, MatrixFlow,
    MeasureMethod, MovingSupport, Region, ScaleLaw,
};
use crate::hum_control::{
    cost_vs_time, gaussian_obstruction, solve_null_control, ControlModel, ControlProblem, SolveOptions,
};
use crate::lebeau_robbiano::{
    cost_constant, cost_profile, density_sequence, telescoping_sequence, verify_sequence, LRParams, TimeSet,
};
use crate::propagator::{dissipation_exponent, OUSpec};
use crate::quadratic::{hamilton_map, quad_dissipation_probe, singular_space, ProbeDatum, QuadraticSymbol};
use crate::tvsys::Mat;

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
}

pub const SCENARIOS: [ScenarioInfo; 8] = [
    ScenarioInfo { name: "heat-thick", description: "heat equation with a static thick periodic union: integral thickness and HUM" },
    ScenarioInfo { name: "kolmogorov-strips", description: "Kolmogorov equation with vanishing strips: thickness loss and Gaussian obstruction" },
    ScenarioInfo { name: "kolmogorov-cone-translate", description: "Kolmogorov shear flow and a double cone: integral thickness threshold 2/tan(theta0)" },
    ScenarioInfo { name: "kolmogorov-cone-rotate", description: "rotation flow and a cone: integral thickness threshold pi - theta0" },
    ScenarioInfo { name: "dilation-heat", description: "heat equation with a dilating non-thick support: integrally thick, not thick" },
    ScenarioInfo { name: "kfp-singular-space", description: "Kramers-Fokker-Planck symbol: singular space, k0 and Hermite dissipation probe" },
    ScenarioInfo { name: "lr-cost", description: "Lebeau-Robbiano cost constants, telescoping and density sequences" },
    ScenarioInfo { name: "hum-heat", description: "HUM null control of the 1D heat equation and control cost versus horizon" },
];

pub fn registry() -> &'static [ScenarioInfo] {
    &SCENARIOS
}

/// Renders a scenario list as text or a JSON array.
pub fn render_list(list: &[ScenarioInfo], as_json: bool) -> String {
    if as_json {
        serde_json::to_string_pretty(list).expect("serializable")
    } else {
        list.iter().map(|s| format!("{:<28}{}\n", s.name, s.description)).collect()
    }
}

/// Reads a TOML (by extension) or JSON config whose keys override `default`.
pub fn load_config_or<C: Serialize + DeserializeOwned>(path: Option<&Path>, default: C) -> Result<C> {
    let Some(path) = path else { return Ok(default) };
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let user: Value = if is_toml {
        let t: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        to_value(&t)
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
    };
    let Value::Object(user) = user else { return Err(Error::Config("config must be a table/object".into())) };
    let mut merged = to_value(&default);
    let fields = merged.as_object_mut().expect("config structs serialize to objects");
    for (k, v) in user {
        if !fields.contains_key(&k) {
            return Err(Error::Config(format!("unknown field `{k}`")));
        }
        fields.insert(k, v);
    }
    serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    /// `holds`, `fails` or `inconclusive`.
    pub status: String,
    pub probe_family: Value,
    pub detail: Value,
}

fn verdict(name: &str, status: &str, probe_family: Value, detail: Value) -> Verdict {
    Verdict { name: name.into(), status: status.into(), probe_family, detail }
}

fn holds(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub result: Value,
    pub files: Vec<PathBuf>,
}

struct Emitter {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Emitter {
    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r.iter().map(|v| format!("{v:e}"))).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs `name`, writing `result.json` and CSV files into `out`.
pub fn run_scenario(name: &str, config: Option<&Path>, out: &Path, seed: u64) -> Result<RunOutput> {
    if !SCENARIOS.iter().any(|s| s.name == name) {
        return Err(Error::UnknownScenario(name.into()));
    }
    fs::create_dir_all(out)?;
    let mut em = Emitter { dir: out.to_path_buf(), files: Vec::new() };
    let (cfg, verdicts, results) = match name {
        "heat-thick" => heat_thick(&load_config_or(config, Default::default())?, seed, &mut em)?,
        "kolmogorov-strips" => kolmogorov_strips(&load_config_or(config, Default::default())?, seed, &mut em)?,
        "kolmogorov-cone-translate" => cone_translate(&load_config_or(config, ConeConfig::translate())?, seed, &mut em)?,
        "kolmogorov-cone-rotate" => cone_rotate(&load_config_or(config, ConeConfig::rotate())?, seed, &mut em)?,
        "dilation-heat" => dilation_heat(&load_config_or(config, Default::default())?, &mut em)?,
        "kfp-singular-space" => kfp(&load_config_or(config, Default::default())?, &mut em)?,
        "lr-cost" => lr_cost(&load_config_or(config, Default::default())?, &mut em)?,
        "hum-heat" => hum_heat(&load_config_or(config, Default::default())?, seed, &mut em)?,
        _ => unreachable!(),
    };
    let generated = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let file_names: Vec<String> =
        em.files.iter().filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect();
    let result = json!({
        "schema": SCHEMA,
        "scenario": name,
        "seed": seed,
        "generated_unix": generated,
        "config": cfg,
        "verdicts": verdicts,
        "results": results,
        "files": file_names,
    });
    let path = out.join("result.json");
    fs::write(&path, serde_json::to_string_pretty(&result).expect("serializable") + "\n")?;
    let mut files = em.files;
    files.push(path);
    Ok(RunOutput { result, files })
}

type Outcome = (Value, Vec<Verdict>, Value);

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn midpoint_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

/// `J` profile verdict: `fails` on a decay by `decay` from near to far, `holds` when
/// the minimum stays above `floor` and within a factor 2 of the near value.
fn trend_status(j: &IntegralThickness, decay: f64, floor: f64) -> &'static str {
    let near = j.profile[0];
    let far = *j.profile.last().expect("non-empty");
    if near > 0.0 && far <= near / decay || near == 0.0 && far == 0.0 {
        "fails"
    } else if j.min_j >= floor && j.min_j >= 0.5 * near {
        "holds"
    } else {
        "inconclusive"
    }
}

fn bracket(rows: &[(f64, &str)]) -> Value {
    let largest_failing = rows.iter().filter(|r| r.1 == "fails").map(|r| r.0).fold(None, |a: Option<f64>, t| Some(a.map_or(t, |v| v.max(t))));
    let smallest_passing = rows.iter().filter(|r| r.1 == "holds").map(|r| r.0).fold(None, |a: Option<f64>, t| Some(a.map_or(t, |v| v.min(t))));
    json!({ "largest_failing_T": largest_failing, "smallest_passing_T": smallest_passing })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatThickConfig {
    pub period: f64,
    /// Covered fraction of each period.
    pub duty: f64,
    pub horizons: Vec<f64>,
    pub r: f64,
    pub probes: Vec<f64>,
    pub n_time: usize,
    pub floor: f64,
    pub modes: usize,
    pub n_t: usize,
    pub tol: f64,
    pub taus: Vec<f64>,
}

impl Default for HeatThickConfig {
    fn default() -> Self {
        Self {
            period: PI / 2.0,
            duty: 0.5,
            horizons: vec![0.1, 0.3, 1.0],
            r: 1.0,
            probes: (0..21).map(|i| -1000.0 + 100.0 * i as f64 + 0.37).collect(),
            n_time: 32,
            floor: 1e-3,
            modes: 256,
            n_t: 100,
            tol: 1e-6,
            taus: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
        }
    }
}

fn gaussian_bump(center: f64, width: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| (-(x[0] - center).powi(2) / (2.0 * width * width)).exp()
}

fn heat_thick(c: &HeatThickConfig, _seed: u64, em: &mut Emitter) -> Result<Outcome> {
    let set = IntervalUnion1D::periodic(c.period, 0.0, c.duty * c.period);
    let region = Region::interval_union(set.clone());
    let support = MovingSupport::Static { region: region.clone() };
    let probes: Vec<Vec<f64>> = c.probes.iter().map(|&x| vec![x]).collect();
    let thick = thickness_probe(&region, &[c.period], &probes, MeasureMethod::Auto)?;
    let mut verdicts = vec![verdict(
        "thick",
        holds(thick.min_ratio >= c.duty - 1e-9),
        json!({ "points": c.probes, "alpha": c.period }),
        json!({ "min_ratio": thick.min_ratio, "delta": c.duty }),
    )];
    let mut j_rows = Vec::new();
    let mut hum = Vec::new();
    for &t in &c.horizons {
        let j = integral_thickness(&support, &MatrixFlow::Identity { dim: 1 }, t, c.r, &probes, c.n_time, MeasureMethod::Auto)?;
        for (x, v) in c.probes.iter().zip(&j.profile) {
            j_rows.push(vec![t, *x, *v]);
        }
        verdicts.push(verdict(
            &format!("integral_thickness_T={t}"),
            holds(j.min_j >= c.floor),
            json!({ "points": c.probes, "r": c.r }),
            to_value(&j),
        ));
        let p = ControlProblem::new(
            ControlModel::Heat1D { length: 2.0 * PI, modes: c.modes },
            support.clone(),
            t,
            c.n_t,
        )?;
        let f0 = p.sample(gaussian_bump(0.5, 0.5));
        let r = solve_null_control(&p, &f0, &SolveOptions { tol: c.tol, ..Default::default() });
        let status = match &r {
            Ok(r) if r.success => "holds",
            _ => "fails",
        };
        verdicts.push(verdict(
            &format!("hum_null_control_T={t}"),
            status,
            json!({ "model": "periodic surrogate, L = 2pi", "modes": c.modes }),
            match &r {
                Ok(r) => to_value(r),
                Err(e) => json!({ "error": e.to_string() }),
            },
        ));
        hum.push(json!({ "T": t, "ok": r.is_ok() }));
    }
    em.csv("j_profile.csv", &["T", "x", "J"], j_rows)?;
    let fit = dissipation_exponent(&OUSpec::heat(1, 1.0), &c.taus, 64, 257, 1.0)?;
    em.csv("dissipation.csv", &["tau", "phi"], c.taus.iter().zip(&fit.phi).map(|(t, p)| vec![*t, *p]))?;
    Ok((to_value(c), verdicts, json!({ "dissipation_fit": fit, "hum": hum })))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StripsConfig {
    pub eps0: f64,
    pub ratio: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub centers: Vec<f64>,
    pub n_slices: usize,
    pub box_half: f64,
    pub taus: Vec<f64>,
}

impl Default for StripsConfig {
    fn default() -> Self {
        Self {
            eps0: 0.5,
            ratio: 0.5,
            horizon: 1.0,
            alpha: 1.0,
            centers: vec![4.0, 8.0, 16.0, 32.0],
            n_slices: 256,
            box_half: 2.0,
            taus: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
        }
    }
}

fn kolmogorov_strips(c: &StripsConfig, seed: u64, em: &mut Emitter) -> Result<Outcome> {
    let region = Region::interval_union(IntervalUnion1D::vanishing_strips(c.eps0, c.ratio));
    let support = MovingSupport::Static { region: region.clone() };
    let side = 2.0 * c.box_half;
    let probes: Vec<Vec<f64>> = c.centers.iter().map(|&n| vec![n - c.box_half, -c.box_half]).collect();
    let thick = thickness_probe(&region, &[side, side], &probes, MeasureMethod::Grid { h: side / 2000.0 })?;
    let decays = thick.ratios.windows(2).all(|w| w[1] <= w[0]) && thick.ratios.last() < Some(&(0.1 * thick.ratios[0]));
    let spec = OUSpec::kolmogorov(c.horizon);
    let z: Vec<Vec<f64>> = c.centers.iter().map(|&n| vec![n, 0.0]).collect();
    let rows = gaussian_obstruction(&spec, &support, c.horizon, c.alpha, &z, c.n_slices, seed)?;
    let decreasing = rows.windows(2).all(|w| w[1].ratio < w[0].ratio);
    em.csv(
        "obstruction.csv",
        &["z_x", "z_v", "lhs", "rhs", "ratio"],
        rows.iter().map(|r| vec![r.z[0], r.z[1], r.lhs, r.rhs, r.ratio]),
    )?;
    em.csv(
        "thickness.csv",
        &["n", "ratio"],
        c.centers.iter().zip(&thick.ratios).map(|(n, r)| vec![*n, *r]),
    )?;
    let fit = dissipation_exponent(&spec, &c.taus, 64, 257, c.horizon)?;
    em.csv("dissipation.csv", &["tau", "phi"], c.taus.iter().zip(&fit.phi).map(|(t, p)| vec![*t, *p]))?;
    let verdicts = vec![
        verdict(
            "thick",
            if decays { "fails" } else { "inconclusive" },
            json!({ "box_corners": probes, "side": side }),
            to_value(&thick),
        ),
        verdict(
            "gaussian_obstruction_ratio_decreasing",
            holds(decreasing),
            json!({ "centers": z }),
            json!({ "ratios": rows.iter().map(|r| r.ratio).collect::<Vec<_>>() }),
        ),
    ];
    Ok((to_value(c), verdicts, json!({ "obstruction": rows, "dissipation_fit": fit })))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub theta0: f64,
    pub horizons: Vec<f64>,
    /// Horizon whose uncovered directions fix the probe ray; defaults to the smallest horizon.
    pub probe_horizon: Option<f64>,
    pub r: f64,
    pub distances: Vec<f64>,
    pub n_time: usize,
    pub cells: usize,
    pub decay: f64,
    pub floor: f64,
}

impl ConeConfig {
    pub fn translate() -> Self {
        Self {
            theta0: PI / 4.0,
            horizons: vec![1.8, 2.5],
            probe_horizon: None,
            r: 1.0,
            distances: vec![10.0, 100.0, 1000.0],
            n_time: 200,
            cells: 200,
            decay: 10.0,
            floor: 1e-2,
        }
    }

    pub fn rotate() -> Self {
        Self { theta0: PI / 6.0, horizons: vec![2.5, 2.8], ..Self::translate() }
    }
}

/// Direction angle of the uncovered sector of `⋃_{s≤T} e^{−sB}ω` for the shear flow and the double cone.
pub fn translate_escape_angle(theta0: f64, horizon: f64) -> f64 {
    let k = theta0.tan();
    let hi = 1.0f64.atan2(horizon - 1.0 / k);
    0.5 * (theta0 + hi)
}

/// Same for the rotation flow and the cone of angles `(0, θ₀)`: the sector `[θ₀, π − T]`.
pub fn rotate_escape_angle(theta0: f64, horizon: f64) -> f64 {
    0.5 * (theta0 + PI - horizon)
}

fn cone_scan(
    c: &ConeConfig,
    region: Region,
    generator: Mat,
    threshold: f64,
    escape: f64,
    seed: u64,
    em: &mut Emitter,
) -> Result<Outcome> {
    let _ = seed;
    if c.horizons.is_empty() || c.distances.is_empty() {
        return Err(Error::Config("horizons and distances must be non-empty".into()));
    }
    let dir = [escape.cos(), escape.sin()];
    let probes = ray_probes(&dir, &c.distances);
    let support = MovingSupport::Static { region };
    let mut verdicts = Vec::new();
    let mut rows = Vec::new();
    let mut scan = Vec::new();
    let mut profiles = Vec::new();
    for &t in &c.horizons {
        // ∫₀ᵀ λ(B(x,r) ∩ e^{(t−T)B}ω) dt
        let flow = MatrixFlow::linear_exp(&generator, -t, 1.0);
        let j = integral_thickness(&support, &flow, t, c.r, &probes, c.n_time, MeasureMethod::GridCells { cells: c.cells })?;
        for (d, v) in c.distances.iter().zip(&j.profile) {
            rows.push(vec![t, *d, *v]);
        }
        let status = trend_status(&j, c.decay, c.floor);
        scan.push((t, status));
        verdicts.push(verdict(
            &format!("integral_thickness_T={t}"),
            status,
            json!({ "direction_angle": escape, "distances": c.distances, "r": c.r }),
            to_value(&j),
        ));
        profiles.push(json!({ "T": t, "profile": j.profile }));
    }
    em.csv("j_profile.csv", &["T", "distance", "J"], rows)?;
    let results = json!({
        "threshold": threshold,
        "bracket": bracket(&scan),
        "profiles": profiles,
        "null_controllability_beyond_threshold": "unknown",
    });
    Ok((to_value(c), verdicts, results))
}

fn cone_translate(c: &ConeConfig, seed: u64, em: &mut Emitter) -> Result<Outcome> {
    let th = c.probe_horizon.unwrap_or_else(|| c.horizons.iter().cloned().fold(f64::INFINITY, f64::min));
    let threshold = 2.0 / c.theta0.tan();
    if th >= threshold {
        return Err(Error::Config(format!("probe horizon {th} leaves no uncovered direction (threshold {threshold})")));
    }
    // e^{−tB} = [[1, t], [0, 1]]
    let b = Mat::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0]);
    cone_scan(c, Region::cone(c.theta0), b, threshold, translate_escape_angle(c.theta0, th), seed, em)
}

fn cone_rotate(c: &ConeConfig, seed: u64, em: &mut Emitter) -> Result<Outcome> {
    let th = c.probe_horizon.unwrap_or_else(|| c.horizons.iter().cloned().fold(f64::INFINITY, f64::min));
    let threshold = PI - c.theta0;
    if th >= threshold {
        return Err(Error::Config(format!("probe horizon {th} leaves no uncovered direction (threshold {threshold})")));
    }
    // e^{−tB} = [[cos t, sin t], [−sin t, cos t]]
    let b = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let region = Region::Sector2D { angle_lo: 0.0, angle_hi: c.theta0, antipodal: true };
    cone_scan(c, region, b, threshold, rotate_escape_angle(c.theta0, th), seed, em)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DilationConfig {
    pub mu: f64,
    pub horizon: f64,
    pub r: f64,
    pub x_min: i64,
    pub x_max: i64,
    pub n_time: usize,
    pub floor: f64,
    pub gap_n: u64,
    pub alpha: f64,
    pub fill_max: f64,
}

impl Default for DilationConfig {
    fn default() -> Self {
        Self { mu: 1.0, horizon: 1.0, r: 2.0, x_min: -200, x_max: 200, n_time: 400, floor: 1e-2, gap_n: 10, alpha: 1.0, fill_max: 0.05 }
    }
}

fn dilation_heat(c: &DilationConfig, em: &mut Emitter) -> Result<Outcome> {
    let base = Region::interval_union(IntervalUnion1D::square_gaps());
    let support = MovingSupport::Dilation { region: base.clone(), scale: ScaleLaw::SqrtLinear { mu: c.mu } };
    let xs: Vec<f64> = (c.x_min..=c.x_max).map(|x| x as f64).collect();
    let probes: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let j = integral_thickness(&support, &MatrixFlow::Identity { dim: 1 }, c.horizon, c.r, &probes, c.n_time, MeasureMethod::Auto)?;
    let n = c.gap_n as f64;
    let x_gap = n * n + 1.5 * n;
    let fill = thickness_probe(&base, &[c.alpha], &[vec![x_gap]], MeasureMethod::Auto)?;
    em.csv("j_profile.csv", &["x", "J"], xs.iter().zip(&j.profile).map(|(x, v)| vec![*x, *v]))?;
    let verdicts = vec![
        verdict(
            "integral_thickness",
            holds(j.min_j >= c.floor),
            json!({ "x_range": [c.x_min, c.x_max], "step": 1, "r": c.r }),
            json!({ "min_J": j.min_j, "argmin": j.argmin }),
        ),
        verdict(
            "thick",
            holds(fill.min_ratio >= c.fill_max),
            json!({ "points": [x_gap], "alpha": c.alpha }),
            json!({ "fill_ratio": fill.min_ratio }),
        ),
    ];
    Ok((to_value(c), verdicts, json!({ "null_controllability": "unknown" })))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KfpConfig {
    pub svd_tol: f64,
    pub probe: bool,
    pub n: usize,
    pub t_list: Vec<f64>,
    pub k_list: Vec<f64>,
}

impl Default for KfpConfig {
    fn default() -> Self {
        Self { svd_tol: 1e-10, probe: true, n: 40, t_list: vec![0.05, 0.1, 0.2], k_list: vec![2.0, 3.0, 4.0, 5.0, 6.0] }
    }
}

fn kfp(c: &KfpConfig, em: &mut Emitter) -> Result<Outcome> {
    let q = QuadraticSymbol::kfp();
    let s = singular_space(&hamilton_map(&q), c.svd_tol)?;
    let mut verdicts = vec![verdict(
        "singular_space_trivial",
        holds(s.dim == 0 && s.k0 == Some(1)),
        json!({ "tolerance": c.svd_tol }),
        json!({ "dim": s.dim, "k0": s.k0, "gap": s.gap }),
    )];
    let mut results = json!({ "singular_space": s });
    if c.probe {
        let p = quad_dissipation_probe(&q, c.n, &c.t_list, &c.k_list, &ProbeDatum::WorstCase { max_degree: c.n })?;
        em.csv("dissipation_probe.csv", &["t", "k", "lhs", "reference"], p.rows.iter().map(|r| vec![r.t, r.k, r.lhs, r.reference]))?;
        let scaled: Vec<f64> = p.rates.iter().map(|(t, r)| r / t.powi(3)).collect();
        let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        verdicts.push(verdict(
            "rate_scales_like_t^(2k0+1)",
            holds(spread <= 2.0),
            json!({ "t": c.t_list, "k": c.k_list, "truncation": c.n }),
            json!({ "rate_over_t3": scaled, "spread": spread, "rate_exponent": p.rate_exponent }),
        ));
        results["probe"] = to_value(&p);
    }
    Ok((to_value(c), verdicts, results))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrConfig {
    pub a: f64,
    pub b: f64,
    pub m1: f64,
    pub c1: f64,
    pub c2: f64,
    pub horizon: f64,
    pub j_max: usize,
    pub time_set: Vec<(f64, f64)>,
    pub t_star: f64,
    pub r: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 2.0,
            m1: 1.0,
            c1: 1.0,
            c2: 1.0,
            horizon: 1.0,
            j_max: 30,
            time_set: vec![(0.0, 1.0 / 9.0), (2.0 / 9.0, 1.0 / 3.0), (2.0 / 3.0, 7.0 / 9.0), (8.0 / 9.0, 1.0)],
            t_star: 0.0,
            r: 1.0,
        }
    }
}

fn lr_cost(c: &LrConfig, em: &mut Emitter) -> Result<Outcome> {
    let p = LRParams::simple(c.a, c.b, c.m1, c.c1, c.c2)?;
    let cc = cost_constant(&p)?;
    let grid: Vec<f64> = midpoint_grid(0.0, 4.0 * cc.mu_star.max(0.25), 400);
    em.csv("h_profile.csv", &["mu", "h"], grid.iter().map(|&m| vec![m, cost_profile(m, cc.gamma, cc.beta)]))?;
    let tele = telescoping_sequence(c.horizon, cc.mu_star, c.j_max)?;
    let taus = tele.taus();
    em.csv(
        "telescoping.csv",
        &["j", "t_j", "tau_j"],
        tele.t.iter().enumerate().map(|(j, t)| vec![j as f64, *t, if j >= 1 { taus[j - 1] } else { f64::NAN }]),
    )?;
    let e = TimeSet::new(c.time_set.clone())?;
    let dens = density_sequence(&e, c.t_star, c.r, c.j_max);
    let mut verdicts = vec![
        verdict("telescoping_sequence", holds(verify_sequence(&TimeSet::new(vec![(0.0, c.horizon)])?, &tele).all()), json!({ "j_max": c.j_max }), json!({ "mu": cc.mu_star })),
    ];
    let density = match &dens {
        Ok(s) => {
            let chk = verify_sequence(&e, s);
            verdicts.push(verdict("density_sequence", holds(chk.all()), json!({ "time_set": c.time_set }), to_value(&chk)));
            em.csv("density_sequence.csv", &["j", "t_j"], s.t.iter().enumerate().map(|(j, t)| vec![j as f64, *t]))?;
            to_value(s)
        }
        Err(err) => {
            verdicts.push(verdict("density_sequence", "fails", json!({ "time_set": c.time_set }), json!({ "error": err.to_string() })));
            json!(null)
        }
    };
    Ok((to_value(c), verdicts, json!({ "cost_constant": cc, "cost_exponent": p.cost_exponent(), "telescoping": tele, "density": density })))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumConfig {
    pub length: f64,
    pub modes: usize,
    pub period: f64,
    pub duty: f64,
    pub horizon: f64,
    pub n_t: usize,
    pub tol: f64,
    pub center: f64,
    pub width: f64,
    pub t_list: Vec<f64>,
    pub long_t_list: Vec<f64>,
    pub probes: usize,
}

impl Default for HumConfig {
    fn default() -> Self {
        Self {
            length: 2.0 * PI,
            modes: 256,
            period: PI / 2.0,
            duty: 0.5,
            horizon: 0.3,
            n_t: 100,
            tol: 1e-6,
            center: 0.5,
            width: 0.5,
            t_list: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
            long_t_list: vec![0.8, 1.6],
            probes: 4,
        }
    }
}

fn random_state(p: &ControlProblem, seed: u64, key: u64) -> Vec<Complex64> {
    let mut rng = keyed_rng(seed, key);
    (0..p.state_len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn hum_heat(c: &HumConfig, seed: u64, em: &mut Emitter) -> Result<Outcome> {
    let support = MovingSupport::Static {
        region: Region::interval_union(IntervalUnion1D::periodic(c.period, 0.0, c.duty * c.period)),
    };
    let model = ControlModel::Heat1D { length: c.length, modes: c.modes };
    let opts = SolveOptions { tol: c.tol, ..Default::default() };
    let p = ControlProblem::new(model.clone(), support.clone(), c.horizon, c.n_t)?;
    let f0 = p.sample(gaussian_bump(c.center, c.width));
    let r = solve_null_control(&p, &f0, &opts)?;
    let mut asym: f64 = 0.0;
    for i in 0..c.probes {
        let a = random_state(&p, seed, 2 * i as u64);
        let b = random_state(&p, seed, 2 * i as u64 + 1);
        let ab = p.inner(&b, &p.gramian_apply(&a)?);
        let ba = p.inner(&a, &p.gramian_apply(&b)?);
        asym = asym.max((ab - ba.conj()).norm() / (p.norm(&a) * p.norm(&b)));
    }
    {
        let file = fs::File::create(em.dir.join("control.csv"))?;
        r.write_control_csv(&p, file)?;
        em.files.push(em.dir.join("control.csv"));
    }
    let gamma = cost_constant(&LRParams::simple(1.0, 2.0, 1.0, 1.0, 1.0)?)?.gamma;
    let sweep = cost_vs_time(&model, &support, c.n_t, gaussian_bump(c.center, c.width), &c.t_list, gamma, &opts)?;
    em.csv(
        "cost_vs_time.csv",
        &["T", "cost", "residual"],
        sweep.rows.iter().map(|r| vec![r.t, r.cost.unwrap_or(f64::NAN), r.residual.unwrap_or(f64::NAN)]),
    )?;
    let long = cost_vs_time(&model, &support, c.n_t, gaussian_bump(c.center, c.width), &c.long_t_list, gamma, &opts)?;
    let long_costs: Vec<f64> = long.rows.iter().filter_map(|r| r.cost).collect();
    let plateau = long_costs.len() >= 2 && {
        let (a, b) = (long_costs[long_costs.len() - 2], long_costs[long_costs.len() - 1]);
        (a - b).abs() <= 0.1 * a
    };
    let verdicts = vec![
        verdict("null_control", holds(r.success), json!({ "model": "periodic surrogate", "T": c.horizon }), json!({ "residual": r.residual, "cost": r.cost })),
        verdict("gramian_self_adjoint", holds(asym <= 1e-10), json!({ "random_probes": c.probes, "seed": seed }), json!({ "max_asymmetry": asym })),
        verdict("cost_non_increasing", holds(sweep.non_increasing), json!({ "T": c.t_list }), json!(null)),
        verdict("cost_fit_r2", holds(sweep.r_squared >= 0.95), json!({ "T": c.t_list, "gamma": gamma }), json!({ "r_squared": sweep.r_squared, "slope": sweep.slope })),
        verdict("cost_plateau", holds(plateau), json!({ "T": c.long_t_list }), json!({ "costs": long_costs })),
    ];
    Ok((to_value(c), verdicts, json!({ "control": r, "sweep": sweep, "long_sweep": long })))
}
