//! Assembly layer: expectation values by either route, uncertainty products
//! with their free-Hamiltonian baselines, spectral weights, J-integrals, the
//! γ/δ crossing functions, the six critical gap values, short/long-time
//! limits, and the gapless Bessel closed forms.

use crate::model::{
    free_baseline, ConjugatePair, ExpectationResult, Method, ModelError, Observable, PacketConfig,
};
use crate::quad::{
    integrate_halfline, integrate_packet_weighted, min_panels_for_phase, QuadError, QuadResult,
    QuadSettings,
};
use crate::series::{
    series_vx, series_vy, series_x, series_x2, series_y, series_y2, SeriesError, SeriesResult,
};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("variance {variance} is negative beyond the error budget {tolerance}")]
    NegativeVariance { variance: f64, tolerance: f64 },
    #[error("no sign change on [{lo}, {hi}] (f: {f_lo} .. {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("mu_1 diverges for a = b (equal spinor amplitudes)")]
    DegenerateSpinor,
    #[error("J integral defined for m + n <= 2, got m={m} n={n}")]
    BadMomentOrder { m: u32, n: u32 },
    #[error("root solver stalled after {iterations} iterations (residual {residual})")]
    SolverStalled { iterations: u32, residual: f64 },
    #[error("{0}")]
    InvalidInput(String),
}

/// Tolerances and budgets shared by the evaluation paths.
#[derive(Debug, Clone)]
pub struct EngineSettings {
    pub quad: QuadSettings,
    pub series_tol: f64,
    pub series_n_max: usize,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings { quad: QuadSettings::default(), series_tol: 1e-10, series_n_max: 160 }
    }
}

/// Total phase span of the zitterbewegung factor cos/sin(2θ) over the
/// truncated integration box.
pub fn zb_phase_span(t: f64, cfg: &PacketConfig, truncation_radius: f64) -> f64 {
    let r = truncation_radius / cfg.d;
    let lo_x = cfg.alpha - r;
    let hi_x = cfg.alpha + r;
    let lo_y = cfg.beta - r;
    let hi_y = cfg.beta + r;
    let axis_min = |lo: f64, hi: f64| if lo <= 0.0 && 0.0 <= hi { 0.0 } else { lo.abs().min(hi.abs()) };
    let kx_min = axis_min(lo_x, hi_x);
    let ky_min = axis_min(lo_y, hi_y);
    let kx_max = lo_x.abs().max(hi_x.abs());
    let ky_max = lo_y.abs().max(hi_y.abs());
    let l2 = cfg.inv_lambda_c * cfg.inv_lambda_c;
    let e_min = (kx_min * kx_min + ky_min * ky_min + l2).sqrt();
    let e_max = (kx_max * kx_max + ky_max * ky_max + l2).sqrt();
    2.0 * cfg.v_f * t * (e_max - e_min)
}

/// Quadrature settings with the oscillation-aware panel floor for time t.
pub fn osc_quad_settings(t: f64, cfg: &PacketConfig, base: &QuadSettings) -> QuadSettings {
    let span = zb_phase_span(t, cfg, base.truncation_radius);
    QuadSettings { min_panels: base.min_panels.max(min_panels_for_phase(span)), ..*base }
}

fn quad_expectation(
    obs: Observable,
    t: f64,
    cfg: &PacketConfig,
    engine: &EngineSettings,
) -> Result<ExpectationResult, AnalysisError> {
    let spread = integrate_packet_weighted(|k| obs.kernel(k, t, cfg).spreading, cfg, &engine.quad)?;
    let osc = osc_quad_settings(t, cfg, &engine.quad);
    let zb = integrate_packet_weighted(|k| obs.kernel(k, t, cfg).zb, cfg, &osc)?;
    let est = finite_or(spread.est_error, 0.0) + finite_or(zb.est_error, f64::INFINITY);
    Ok(ExpectationResult {
        value: spread.value + zb.value + obs.offset(cfg),
        spreading_part: spread.value,
        zb_part: zb.value,
        est_error: est,
        method: Method::Quadrature,
        converged: spread.converged && zb.converged,
    })
}

fn finite_or(x: f64, fallback: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        fallback
    }
}

/// Spreading contribution as its exact J-integral combination (the spreading
/// kernels are time-polynomial J combinations, so this is closed-form up to
/// one smooth quadrature).
fn spreading_from_j(obs: Observable, t: f64, cfg: &PacketConfig) -> Result<f64, AnalysisError> {
    let slope = long_time_slope(obs, cfg)?;
    let vt = cfg.v_f * t;
    Ok(match obs {
        Observable::X | Observable::Y => slope * t,
        Observable::X2 | Observable::Y2 => slope * vt * vt,
        Observable::Vx | Observable::Vy => slope,
    })
}

fn series_raw(
    obs: Observable,
    t: f64,
    cfg: &PacketConfig,
    engine: &EngineSettings,
) -> Result<SeriesResult, SeriesError> {
    let (tol, n_max) = (engine.series_tol, engine.series_n_max);
    match obs {
        Observable::X => series_x(t, cfg, tol, n_max),
        Observable::Y => series_y(t, cfg, tol, n_max),
        Observable::X2 => series_x2(t, cfg, tol, n_max),
        Observable::Y2 => series_y2(t, cfg, tol, n_max),
        Observable::Vx => series_vx(t, cfg, tol, n_max),
        Observable::Vy => series_vy(t, cfg, tol, n_max),
    }
}

fn series_expectation(
    obs: Observable,
    t: f64,
    cfg: &PacketConfig,
    engine: &EngineSettings,
) -> Result<ExpectationResult, AnalysisError> {
    let s = series_raw(obs, t, cfg, engine)?;
    let spreading = spreading_from_j(obs, t, cfg)?;
    let est = s.last_term_magnitude + f64::EPSILON * s.max_shell_magnitude;
    Ok(ExpectationResult {
        value: s.value,
        spreading_part: spreading,
        zb_part: s.value - spreading - obs.offset(cfg),
        est_error: est,
        method: Method::Series,
        converged: s.converged,
    })
}

/// Expectation value of one observable at time t by the requested route.
///
/// The `Both` route cross-checks the two paths and returns the quadrature
/// value with est_error = max(path error, path discrepancy); when the series
/// flags itself non-converged the quadrature result stands alone.
pub fn expectation(
    obs: Observable,
    t: f64,
    cfg: &PacketConfig,
    method: Method,
) -> Result<ExpectationResult, AnalysisError> {
    expectation_with(obs, t, cfg, method, &EngineSettings::default())
}

pub fn expectation_with(
    obs: Observable,
    t: f64,
    cfg: &PacketConfig,
    method: Method,
    engine: &EngineSettings,
) -> Result<ExpectationResult, AnalysisError> {
    assert!(t >= 0.0, "expectation requires t >= 0");
    match method {
        Method::Quadrature => quad_expectation(obs, t, cfg, engine),
        Method::Series => series_expectation(obs, t, cfg, engine),
        Method::Both => {
            let q = quad_expectation(obs, t, cfg, engine)?;
            let s = series_raw(obs, t, cfg, engine)?;
            let est = if s.converged {
                q.est_error.max((q.value - s.value).abs())
            } else {
                q.est_error
            };
            Ok(ExpectationResult { est_error: est, method: Method::Both, ..q })
        }
    }
}

/// Δ(position)·Δ(momentum or velocity) at one time plus the free baseline.
#[derive(Debug, Clone, Copy)]
pub struct UncertaintyPoint {
    pub t: f64,
    pub delta_pos: f64,
    /// ħ/nm for momentum pairs, nm/fs for velocity pairs.
    pub delta_conj: f64,
    /// ħ units for momentum pairs, nm²/fs for velocity pairs.
    pub product: f64,
    /// None in the gapless case (baseline needs a finite mass).
    pub free_baseline: Option<f64>,
    pub spreading_share: f64,
    pub zb_share: f64,
    pub est_error: f64,
    pub converged: bool,
}

pub fn uncertainty(pair: ConjugatePair, t: f64, cfg: &PacketConfig) -> Result<UncertaintyPoint, AnalysisError> {
    uncertainty_with(pair, t, cfg, Method::Quadrature, &EngineSettings::default())
}

pub fn uncertainty_with(
    pair: ConjugatePair,
    t: f64,
    cfg: &PacketConfig,
    method: Method,
    engine: &EngineSettings,
) -> Result<UncertaintyPoint, AnalysisError> {
    let (pos_obs, sq_obs, vel_obs) = match pair {
        ConjugatePair::XP | ConjugatePair::XV => (Observable::X, Observable::X2, Observable::Vx),
        ConjugatePair::YP | ConjugatePair::YV => (Observable::Y, Observable::Y2, Observable::Vy),
    };
    let m = expectation_with(pos_obs, t, cfg, method, engine)?;
    let m2 = expectation_with(sq_obs, t, cfg, method, engine)?;
    let var = m2.value - m.value * m.value;
    let est_var = m2.est_error + 2.0 * m.value.abs() * m.est_error + m.est_error * m.est_error;
    if var < -(3.0 * est_var + 1e-12) {
        return Err(AnalysisError::NegativeVariance { variance: var, tolerance: 3.0 * est_var });
    }
    let var_c = var.max(0.0);
    let delta_pos = var_c.sqrt();
    let mut converged = m.converged && m2.converged;

    let (delta_conj, conj_est) = if pair.is_velocity() {
        let v = expectation_with(vel_obs, t, cfg, method, engine)?;
        converged &= v.converged;
        // <v^2> = v_F^2 exactly (operator identity), no integration
        let dv2 = cfg.v_f * cfg.v_f - v.value * v.value;
        let est = 2.0 * v.value.abs() * v.est_error;
        if dv2 < -(3.0 * est + 1e-12) {
            return Err(AnalysisError::NegativeVariance { variance: dv2, tolerance: 3.0 * est });
        }
        let dv = dv2.max(0.0).sqrt();
        (dv, if dv > 0.0 { est / (2.0 * dv) } else { est.sqrt() })
    } else {
        (1.0 / (2f64.sqrt() * cfg.d), 0.0)
    };

    let product = delta_pos * delta_conj;
    let baseline = free_baseline(pair, t, cfg).ok();
    // variance attribution: static width + spreading moments vs the rest
    let spread_var = sq_obs.offset(cfg) + m2.spreading_part - m.spreading_part * m.spreading_part;
    let (spreading_share, zb_share) = if var_c > 0.0 {
        (spread_var / var_c, (var_c - spread_var) / var_c)
    } else {
        (1.0, 0.0)
    };
    let pos_est = if delta_pos > 0.0 { est_var / (2.0 * delta_pos) } else { est_var.sqrt() };
    let est_error = delta_conj * pos_est + delta_pos * conj_est;
    Ok(UncertaintyPoint {
        t,
        delta_pos,
        delta_conj,
        product,
        free_baseline: baseline,
        spreading_share,
        zb_share,
        est_error,
        converged,
    })
}

/// Overlap intensities of the packet with the positive/negative energy bands.
#[derive(Debug, Clone, Copy)]
pub struct SpectralWeights {
    pub p_plus: f64,
    pub p_minus: f64,
    pub delta_p: f64,
}

pub fn packet_split_weights(cfg: &PacketConfig) -> Result<SpectralWeights, AnalysisError> {
    let settings = QuadSettings::with_tols(1e-11, 1e-13);
    let q = integrate_packet_weighted(
        |k| {
            let e = cfg.energy(k);
            if e == 0.0 {
                0.0
            } else {
                (cfg.inv_lambda_c * cfg.pol() + cfg.cross() * k[0]) / e
            }
        },
        cfg,
        &settings,
    )?;
    let delta_p = 0.5 * q.value;
    Ok(SpectralWeights { p_plus: 0.5 + delta_p, p_minus: 0.5 - delta_p, delta_p })
}

/// Bare Gaussian-weighted moment ∫ d²k w(k) k_x^m k_y^n / (k² + λ_c⁻²),
/// without the d²/π prefactor (callers apply their own printed prefactors).
pub fn j_integral(m: u32, n: u32, cfg: &PacketConfig) -> Result<f64, AnalysisError> {
    if m + n > 2 {
        return Err(AnalysisError::BadMomentOrder { m, n });
    }
    let settings = QuadSettings::with_tols(1e-11, 1e-14);
    let q = integrate_packet_weighted(
        |k| {
            let e2 = k[0] * k[0] + k[1] * k[1] + cfg.inv_lambda_c * cfg.inv_lambda_c;
            if e2 == 0.0 {
                0.0
            } else {
                k[0].powi(m as i32) * k[1].powi(n as i32) / e2
            }
        },
        cfg,
        &settings,
    )?;
    Ok(q.value * PI / (cfg.d * cfg.d))
}

fn with_gap(cfg: &PacketConfig, x: f64) -> PacketConfig {
    PacketConfig { inv_lambda_c: x, ..*cfg }
}

/// Long-time crossing function for the x pair: γ = 1 at λ_c⁻¹ = μ₂.
pub fn gamma_fn(x: f64, cfg: &PacketConfig) -> Result<f64, AnalysisError> {
    if !(x > 0.0) {
        return Err(AnalysisError::InvalidInput(format!("gamma_fn requires x > 0, got {x}")));
    }
    let c = with_gap(cfg, x);
    let j20 = j_integral(2, 0, &c)?;
    let j10 = j_integral(1, 0, &c)?;
    let d2 = cfg.d * cfg.d;
    let brace = cfg.pol() * x * j10 + cfg.cross() * j20;
    Ok(2.0 * x * x * d2 * d2 / PI * (j20 - d2 / PI * brace * brace))
}

/// Long-time crossing function for the y pair: δ = 1 at λ_c⁻¹ = ν₂.
pub fn delta_fn(x: f64, cfg: &PacketConfig) -> Result<f64, AnalysisError> {
    if !(x > 0.0) {
        return Err(AnalysisError::InvalidInput(format!("delta_fn requires x > 0, got {x}")));
    }
    let c = with_gap(cfg, x);
    let j02 = j_integral(0, 2, &c)?;
    let j01 = j_integral(0, 1, &c)?;
    let j11 = j_integral(1, 1, &c)?;
    let d2 = cfg.d * cfg.d;
    let brace = cfg.pol() * x * j01 + cfg.cross() * j11;
    Ok(2.0 * x * x * d2 * d2 / PI * (j02 - d2 / PI * brace * brace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedCritical {
    Mu1,
    Nu1,
}

/// Closed-form short-time critical gap values.
pub fn critical_closed(kind: ClosedCritical, cfg: &PacketConfig) -> Result<f64, AnalysisError> {
    match kind {
        ClosedCritical::Mu1 => {
            // 1 - 4a²b² = (a² - b²)²
            let pol = cfg.pol().abs();
            if pol < 1e-9 {
                return Err(AnalysisError::DegenerateSpinor);
            }
            Ok(1.0 / (2f64.sqrt() * cfg.d * pol))
        }
        ClosedCritical::Nu1 => Ok(1.0 / (2f64.sqrt() * cfg.d)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvedCritical {
    Mu2,
    Nu2,
    Mu2Star,
    Nu2Star,
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalRoot {
    pub value: f64,
    pub iterations: u32,
    /// |f(root) − target| at the returned root.
    pub residual: f64,
    /// Final bracket around the root.
    pub bracket: (f64, f64),
}

pub const DEFAULT_BRACKET: (f64, f64) = (1e-3, 20.0);
const BRACKET_CAP: f64 = 1024.0;

/// Bracketed root of the matching condition for the given critical value
/// (bisection with secant acceleration; the bracket is expanded geometrically
/// up to a cap when it does not straddle a sign change).
pub fn solve_critical(
    kind: SolvedCritical,
    cfg: &PacketConfig,
    bracket: (f64, f64),
    x_tol: f64,
) -> Result<CriticalRoot, AnalysisError> {
    let d2 = cfg.d * cfg.d;
    let f = |x: f64| -> Result<f64, AnalysisError> {
        let g = match kind {
            SolvedCritical::Mu2 | SolvedCritical::Mu2Star => gamma_fn(x, cfg)?,
            SolvedCritical::Nu2 | SolvedCritical::Nu2Star => delta_fn(x, cfg)?,
        };
        let target = match kind {
            SolvedCritical::Mu2 | SolvedCritical::Nu2 => 1.0,
            SolvedCritical::Mu2Star | SolvedCritical::Nu2Star => 1.0 / (2.0 * x * x * d2),
        };
        Ok(g - target)
    };

    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(AnalysisError::InvalidInput(format!("bad bracket ({lo}, {hi})")));
    }
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    while f_lo.signum() == f_hi.signum() && hi < BRACKET_CAP {
        hi *= 2.0;
        f_hi = f(hi)?;
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(AnalysisError::NoSignChange { lo, hi, f_lo, f_hi });
    }
    if f_lo == 0.0 {
        return Ok(CriticalRoot { value: lo, iterations: 0, residual: 0.0, bracket: (lo, hi) });
    }

    let mut best = hi;
    let mut f_best = f_hi;
    for it in 1..=200u32 {
        // secant candidate, bisection fallback (and a forced bisection every
        // third step so the bracket provably shrinks)
        let mid = 0.5 * (lo + hi);
        let sec = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        let margin = 0.01 * (hi - lo);
        let c = if it % 3 != 0 && sec.is_finite() && sec > lo + margin && sec < hi - margin {
            sec
        } else {
            mid
        };
        let f_c = f(c)?;
        if f_c.abs() < f_best.abs() {
            best = c;
            f_best = f_c;
        }
        if f_c.signum() == f_lo.signum() {
            lo = c;
            f_lo = f_c;
        } else {
            hi = c;
            f_hi = f_c;
        }
        if f_best.abs() < 1e-9 && (hi - lo) <= x_tol {
            return Ok(CriticalRoot { value: best, iterations: it, residual: f_best.abs(), bracket: (lo, hi) });
        }
    }
    Err(AnalysisError::SolverStalled { iterations: 200, residual: f_best.abs() })
}

/// Root solve with the default bracket and tolerance.
pub fn critical_value(kind: SolvedCritical, cfg: &PacketConfig) -> Result<CriticalRoot, AnalysisError> {
    solve_critical(kind, cfg, DEFAULT_BRACKET, 1e-6)
}

/// Parameter grids behind the critical-value tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableId {
    /// x-pair criticals: d = 8, α = 1.2/n, β = 1.2.
    I,
    /// y-pair criticals: d = 8, α = 1.2, β = 1.2/n.
    II,
}

/// Packet for one table cell; `n = None` is the n = ∞ column (zero momentum
/// along the varied axis).
pub fn table_config(table: TableId, a: f64, n: Option<u32>) -> Result<PacketConfig, ModelError> {
    let varied = n.map(|v| 1.2 / v as f64).unwrap_or(0.0);
    match table {
        TableId::I => PacketConfig::new(8.0, varied, 1.2, a, 1.0),
        TableId::II => PacketConfig::new(8.0, 1.2, varied, a, 1.0),
    }
}

/// One critical value with solver diagnostics; `value = None` marks a
/// confirmed divergence (no crossing up to the bracket cap).
#[derive(Debug, Clone, Copy)]
pub struct CriticalValue {
    pub value: Option<f64>,
    pub bracket: (f64, f64),
    pub iterations: u32,
    pub residual: f64,
}

impl CriticalValue {
    fn closed(v: f64) -> Self {
        CriticalValue { value: Some(v), bracket: (v, v), iterations: 0, residual: 0.0 }
    }

    fn from_root(r: CriticalRoot) -> Self {
        CriticalValue { value: Some(r.value), bracket: r.bracket, iterations: r.iterations, residual: r.residual }
    }

    fn divergent() -> Self {
        CriticalValue { value: None, bracket: (DEFAULT_BRACKET.0, BRACKET_CAP), iterations: 0, residual: f64::NAN }
    }
}

/// The six critical gap values for one (a, n) cell of the tables.
#[derive(Debug, Clone, Copy)]
pub struct CriticalReport {
    pub mu1: CriticalValue,
    pub mu2: CriticalValue,
    pub mu2_star: CriticalValue,
    pub nu1: CriticalValue,
    pub nu2: CriticalValue,
    pub nu2_star: CriticalValue,
}

fn solve_or_divergent(kind: SolvedCritical, cfg: &PacketConfig) -> Result<CriticalValue, AnalysisError> {
    match critical_value(kind, cfg) {
        Ok(r) => Ok(CriticalValue::from_root(r)),
        Err(AnalysisError::NoSignChange { .. }) => Ok(CriticalValue::divergent()),
        Err(e) => Err(e),
    }
}

pub fn critical_report(a: f64, n: Option<u32>) -> Result<CriticalReport, AnalysisError> {
    let cfg_x = table_config(TableId::I, a, n)?;
    let cfg_y = table_config(TableId::II, a, n)?;
    Ok(CriticalReport {
        mu1: CriticalValue::closed(critical_closed(ClosedCritical::Mu1, &cfg_x)?),
        mu2: solve_or_divergent(SolvedCritical::Mu2, &cfg_x)?,
        mu2_star: solve_or_divergent(SolvedCritical::Mu2Star, &cfg_x)?,
        nu1: CriticalValue::closed(critical_closed(ClosedCritical::Nu1, &cfg_y)?),
        nu2: solve_or_divergent(SolvedCritical::Nu2, &cfg_y)?,
        nu2_star: solve_or_divergent(SolvedCritical::Nu2Star, &cfg_y)?,
    })
}

/// Printed leading small-t behavior: value ≈ offset + coefficient·t^order.
#[derive(Debug, Clone, Copy)]
pub struct ShortTimeLimit {
    pub offset: f64,
    pub order: u32,
    pub coefficient: f64,
}

pub fn short_time_limit(obs: Observable, cfg: &PacketConfig) -> ShortTimeLimit {
    let vf = cfg.v_f;
    let curve = vf * vf * (-cfg.pol() * cfg.alpha + cfg.cross() * cfg.inv_lambda_c);
    match obs {
        Observable::X => ShortTimeLimit { offset: 0.0, order: 1, coefficient: cfg.cross() * vf },
        Observable::Y => ShortTimeLimit { offset: 0.0, order: 2, coefficient: curve },
        Observable::X2 | Observable::Y2 => {
            ShortTimeLimit { offset: 0.5 * cfg.d * cfg.d, order: 2, coefficient: vf * vf }
        }
        Observable::Vx => ShortTimeLimit { offset: 0.0, order: 0, coefficient: cfg.cross() * vf },
        Observable::Vy => ShortTimeLimit { offset: 0.0, order: 1, coefficient: 2.0 * curve },
    }
}

/// Long-time drift/growth coefficient from the J-integrals: the slope of
/// ⟨x⟩, ⟨y⟩ (nm/fs) and the asymptote of ⟨v⟩ for the velocity observables,
/// or the dimensionless (v_F t)² coefficient for the second moments.
pub fn long_time_slope(obs: Observable, cfg: &PacketConfig) -> Result<f64, AnalysisError> {
    let d2 = cfg.d * cfg.d;
    let l = cfg.inv_lambda_c;
    match obs {
        Observable::X | Observable::Vx => {
            let j10 = j_integral(1, 0, cfg)?;
            let j20 = j_integral(2, 0, cfg)?;
            Ok(d2 * cfg.v_f / PI * (cfg.pol() * l * j10 + cfg.cross() * j20))
        }
        Observable::Y | Observable::Vy => {
            let j01 = j_integral(0, 1, cfg)?;
            let j11 = j_integral(1, 1, cfg)?;
            Ok(d2 * cfg.v_f / PI * (cfg.pol() * l * j01 + cfg.cross() * j11))
        }
        Observable::X2 => Ok(d2 / PI * j_integral(2, 0, cfg)?),
        Observable::Y2 => Ok(d2 / PI * j_integral(0, 2, cfg)?),
    }
}

/// Dominant zitterbewegung period 2π/(2 v_F E) at the packet center.
pub fn zb_period(cfg: &PacketConfig) -> f64 {
    let e = cfg.energy([cfg.alpha, cfg.beta]);
    if e > 0.0 {
        PI / (cfg.v_f * e)
    } else {
        f64::INFINITY
    }
}

/// Mean of an expectation value over a window of `periods` ZB periods
/// centered at `center` (isolates the secular drift from the trembling).
pub fn windowed_mean(
    obs: Observable,
    center: f64,
    periods: u32,
    samples: usize,
    cfg: &PacketConfig,
    engine: &EngineSettings,
) -> Result<f64, AnalysisError> {
    assert!(samples >= 2);
    let w = periods as f64 * zb_period(cfg);
    let lo = (center - 0.5 * w).max(0.0);
    let mut sum = 0.0;
    for i in 0..samples {
        let t = lo + w * i as f64 / (samples - 1) as f64;
        sum += expectation_with(obs, t, cfg, Method::Quadrature, engine)?.value;
    }
    Ok(sum / samples as f64)
}

/// Closed forms for the gapless pure-upper-spinor packet (α = 0, a = 1,
/// b = 0): half-line integrals of Gaussian-damped Bessel kernels. Serves as
/// the independent oracle for the 2D quadrature route.
pub mod gapless {
    use super::*;
    use crate::special::{bessel_i0_scaled, bessel_i1_scaled};

    fn check(cfg: &PacketConfig) -> Result<(), AnalysisError> {
        if !cfg.is_gapless() || cfg.alpha != 0.0 || cfg.a != 1.0 || cfg.b != 0.0 {
            return Err(AnalysisError::InvalidInput(
                "gapless closed forms require inv_lambda_c = 0, alpha = 0, a = 1, b = 0".into(),
            ));
        }
        if !(cfg.beta > 0.0) {
            return Err(AnalysisError::InvalidInput("gapless closed forms require beta > 0".into()));
        }
        Ok(())
    }

    fn halfline_settings(t: f64, cfg: &PacketConfig) -> QuadSettings {
        let bd = cfg.beta * cfg.d;
        let base = QuadSettings::with_tols(1e-10, 1e-14);
        let q_max = bd + base.truncation_radius;
        let span = 2.0 * cfg.v_f * t * q_max / cfg.d;
        QuadSettings { min_panels: min_panels_for_phase(span), ..base }
    }

    /// ⟨x⟩(t) (nm).
    pub fn mean_x(t: f64, cfg: &PacketConfig) -> Result<QuadResult, AnalysisError> {
        check(cfg)?;
        let bd = cfg.beta * cfg.d;
        let vt = cfg.v_f * t;
        let s = halfline_settings(t, cfg);
        let osc = integrate_halfline(
            |q| (-(q - bd) * (q - bd)).exp() * bessel_i1_scaled(2.0 * bd * q) * (2.0 * vt * q / cfg.d).cos(),
            bd,
            &s,
        )?;
        let drift = (1.0 - (-bd * bd).exp()) / (2.0 * cfg.beta);
        Ok(QuadResult {
            value: drift - cfg.d * osc.value,
            est_error: cfg.d * osc.est_error,
            evaluations: osc.evaluations,
            converged: osc.converged,
        })
    }

    /// ⟨x²⟩(t) (nm²), including the d²/2 offset.
    pub fn mean_x2(t: f64, cfg: &PacketConfig) -> Result<QuadResult, AnalysisError> {
        check(cfg)?;
        let bd = cfg.beta * cfg.d;
        let vt = cfg.v_f * t;
        let ex = (-bd * bd).exp();
        let s = halfline_settings(t, cfg);
        let osc = integrate_halfline(
            |q| {
                let half = (vt * q / cfg.d).sin();
                (-(q - bd) * (q - bd)).exp() * 2.0 * half * half / (q * q)
                    * (q * bessel_i0_scaled(2.0 * bd * q) - bessel_i1_scaled(2.0 * bd * q) / (2.0 * bd))
            },
            bd,
            &s,
        )?;
        let d2 = cfg.d * cfg.d;
        Ok(QuadResult {
            value: 0.5 * d2 + vt * vt / (2.0 * bd * bd) * (1.0 - ex) + d2 * osc.value,
            est_error: d2 * osc.est_error,
            evaluations: osc.evaluations,
            converged: osc.converged,
        })
    }

    /// ⟨y²⟩(t) (nm²), including the d²/2 offset.
    pub fn mean_y2(t: f64, cfg: &PacketConfig) -> Result<QuadResult, AnalysisError> {
        check(cfg)?;
        let bd = cfg.beta * cfg.d;
        let vt = cfg.v_f * t;
        let ex = (-bd * bd).exp();
        let s = halfline_settings(t, cfg);
        let osc = integrate_halfline(
            |q| {
                let half = (vt * q / cfg.d).sin();
                (-(q - bd) * (q - bd)).exp() * 2.0 * half * half / (q * q) * bessel_i1_scaled(2.0 * bd * q)
            },
            bd,
            &s,
        )?;
        let d2 = cfg.d * cfg.d;
        let secular = 1.0 - (1.0 - ex) / (2.0 * bd * bd);
        Ok(QuadResult {
            value: 0.5 * d2 + vt * vt * secular + cfg.d / (2.0 * cfg.beta) * osc.value,
            est_error: cfg.d / (2.0 * cfg.beta) * osc.est_error,
            evaluations: osc.evaluations,
            converged: osc.converged,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::oracle_riemann;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn fig1b() -> PacketConfig {
        PacketConfig::new(8.0, 0.04, 1.2, 0.9, 2.0).unwrap()
    }

    #[test]
    fn expectation_trivials() {
        let cfg = fig1b();
        let x0 = expectation(Observable::X, 0.0, &cfg, Method::Quadrature).unwrap();
        assert_abs_diff_eq!(x0.value, 0.0, epsilon = 1e-14);
        assert!(x0.converged);
        let x2 = expectation(Observable::X2, 0.0, &cfg, Method::Quadrature).unwrap();
        assert_abs_diff_eq!(x2.value, 32.0, epsilon = 1e-12);
        let vx = expectation(Observable::Vx, 0.0, &cfg, Method::Quadrature).unwrap();
        assert_relative_eq!(vx.value, cfg.cross() * cfg.v_f, max_relative = 1e-12);
    }

    // Reference values from an independent 40-digit series evaluation,
    // cross-checked against brute-force 2D integration at 1e-14.
    #[test]
    fn expectation_frozen_point() {
        let cfg = fig1b();
        for (method, tol) in [(Method::Quadrature, 1e-8), (Method::Series, 1e-9), (Method::Both, 1e-8)] {
            let x = expectation(Observable::X, 0.5, &cfg, method).unwrap();
            assert_relative_eq!(x.value, 0.2400554390099, max_relative = tol);
            let y2 = expectation(Observable::Y2, 0.5, &cfg, method).unwrap();
            assert_relative_eq!(y2.value, 32.1802688850603, max_relative = tol);
            assert!(x.converged && y2.converged);
            // invariant: value = spreading + zb (+ offset)
            assert_relative_eq!(
                x.value,
                x.spreading_part + x.zb_part,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                y2.value,
                y2.spreading_part + y2.zb_part + 32.0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn uncertainty_minimum_at_t0() {
        let cfg = fig1b();
        let u = uncertainty(ConjugatePair::XP, 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(u.product, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(u.spreading_share, 1.0, epsilon = 1e-12);
        let uy = uncertainty(ConjugatePair::YP, 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(uy.product, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn velocity_pair_identity() {
        let cfg = fig1b();
        let u = uncertainty(ConjugatePair::XV, 0.8, &cfg).unwrap();
        let v = expectation(Observable::Vx, 0.8, &cfg, Method::Quadrature).unwrap();
        // Δv² + <v>² = v_F² as assembled
        assert_relative_eq!(
            u.delta_conj * u.delta_conj + v.value * v.value,
            cfg.v_f * cfg.v_f,
            max_relative = 1e-12
        );
        assert!(u.delta_conj <= cfg.v_f);
    }

    #[test]
    fn spectral_weights_balanced() {
        let cfg = PacketConfig::new(8.0, 0.0, 1.2, 1.0 / 2f64.sqrt(), 2.0).unwrap();
        let w = packet_split_weights(&cfg).unwrap();
        assert_abs_diff_eq!(w.p_plus, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(w.p_minus, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn spectral_weights_large_gap_saturates() {
        let cfg = PacketConfig::new(8.0, 0.3, 0.7, 1.0, 500.0).unwrap();
        let w = packet_split_weights(&cfg).unwrap();
        assert!(w.p_plus > 0.999_99, "p_plus = {}", w.p_plus);
        assert_abs_diff_eq!(w.p_plus + w.p_minus, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_weights_vs_riemann_oracle() {
        let cfg = fig1b();
        let w = packet_split_weights(&cfg).unwrap();
        let oracle = 0.5
            * oracle_riemann(
                |k| (cfg.inv_lambda_c * cfg.pol() + cfg.cross() * k[0]) / cfg.energy(k),
                &cfg,
                2048,
                8.0,
            );
        assert_abs_diff_eq!(w.delta_p, oracle, epsilon = 1e-7);
        assert!(w.delta_p > 0.0 && w.delta_p < 0.5);
    }

    #[test]
    fn j_integral_symmetries() {
        let sym_x = PacketConfig::new(8.0, 0.0, 1.2, 0.9, 2.0).unwrap();
        assert_abs_diff_eq!(j_integral(1, 0, &sym_x).unwrap(), 0.0, epsilon = 1e-13);
        let sym_y = PacketConfig::new(8.0, 1.2, 0.0, 0.9, 2.0).unwrap();
        assert_abs_diff_eq!(j_integral(0, 1, &sym_y).unwrap(), 0.0, epsilon = 1e-13);
        assert!(matches!(
            j_integral(2, 1, &sym_x),
            Err(AnalysisError::BadMomentOrder { m: 2, n: 1 })
        ));
    }

    #[test]
    fn j_integral_vs_riemann_oracle() {
        let cfg = fig1b();
        let j20 = j_integral(2, 0, &cfg).unwrap();
        let oracle = oracle_riemann(
            |k| k[0] * k[0] / (k[0] * k[0] + k[1] * k[1] + 4.0),
            &cfg,
            2048,
            8.0,
        ) * PI
            / (cfg.d * cfg.d);
        assert_relative_eq!(j20, oracle, max_relative = 1e-6);
    }

    #[test]
    fn gamma_small_x_vanishes() {
        let cfg = table_config(TableId::I, 0.9, Some(10)).unwrap();
        assert!(gamma_fn(1e-4, &cfg).unwrap() < 1e-4);
        assert!(gamma_fn(0.0, &cfg).is_err());
    }

    #[test]
    fn gamma_near_unity_at_table_root() {
        // Table I root: mu2(a=0.9, n=10) = 1.03
        let cfg = table_config(TableId::I, 0.9, Some(10)).unwrap();
        let g = gamma_fn(1.03, &cfg).unwrap();
        assert!((g - 1.0).abs() < 0.02, "gamma(1.03) = {g}");
    }

    #[test]
    fn balanced_spinor_gamma_drops_odd_moment() {
        // a = b: the braced term reduces to (2ab J20)^2 since pol = 0
        let cfg = PacketConfig::new(8.0, 0.3, 1.2, 1.0 / 2f64.sqrt(), 1.0).unwrap();
        let x = 0.7;
        let c = with_gap(&cfg, x);
        let j20 = j_integral(2, 0, &c).unwrap();
        let d2 = cfg.d * cfg.d;
        let expect = 2.0 * x * x * d2 * d2 / PI * (j20 - d2 / PI * (cfg.cross() * j20).powi(2));
        assert_relative_eq!(gamma_fn(x, &cfg).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn closed_criticals_match_tables() {
        let c9 = table_config(TableId::I, 0.9, Some(10)).unwrap();
        assert_abs_diff_eq!(critical_closed(ClosedCritical::Mu1, &c9).unwrap(), 0.143, epsilon = 5e-4);
        let c7 = table_config(TableId::I, 0.7, Some(10)).unwrap();
        assert_abs_diff_eq!(critical_closed(ClosedCritical::Mu1, &c7).unwrap(), 4.42, epsilon = 5e-3);
        assert_abs_diff_eq!(critical_closed(ClosedCritical::Nu1, &c9).unwrap(), 0.088, epsilon = 5e-4);
        let cb = PacketConfig::new(8.0, 0.0, 0.0, 1.0 / 2f64.sqrt(), 1.0).unwrap();
        assert!(matches!(critical_closed(ClosedCritical::Mu1, &cb), Err(AnalysisError::DegenerateSpinor)));
    }

    #[test]
    fn mu2_diverges_at_alpha_zero() {
        let cfg = table_config(TableId::I, 0.9, None).unwrap();
        assert!(matches!(
            critical_value(SolvedCritical::Mu2, &cfg),
            Err(AnalysisError::NoSignChange { .. })
        ));
    }

    #[test]
    fn short_time_coefficients() {
        let pure = PacketConfig::new(8.0, 0.5, 1.2, 1.0, 2.0).unwrap();
        assert_eq!(short_time_limit(Observable::X, &pure).coefficient, 0.0);
        let balanced = PacketConfig::new(8.0, 0.7, 1.2, 1.0 / 2f64.sqrt(), 2.0).unwrap();
        // pol = 0: curvature coefficient reduces to 2ab λ_c⁻¹ = λ_c⁻¹
        assert_relative_eq!(
            short_time_limit(Observable::Y, &balanced).coefficient,
            balanced.inv_lambda_c,
            max_relative = 1e-12
        );
        let st = short_time_limit(Observable::X2, &balanced);
        assert_eq!(st.offset, 32.0);
        assert_eq!(st.coefficient, 1.0);
    }

    #[test]
    fn long_time_slope_gapless_pure_upper_is_zero() {
        let cfg = PacketConfig::new(8.0, 0.0, 1.2, 1.0, 0.0).unwrap();
        let slope = long_time_slope(Observable::X, &cfg).unwrap();
        assert_abs_diff_eq!(slope, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gapless_mean_x_approaches_drift_constant() {
        let cfg = PacketConfig::new(8.0, 0.0, 1.2, 1.0, 0.0).unwrap();
        let r = gapless::mean_x(200.0, &cfg).unwrap();
        let limit = (1.0 - (-cfg.beta * cfg.beta * cfg.d * cfg.d).exp()) / (2.0 * cfg.beta);
        assert_relative_eq!(r.value, limit, max_relative = 1e-4);
    }

    // Frozen 40-digit evaluations of the closed forms at beta=1.2, d=8.
    #[test]
    fn gapless_closed_forms_frozen() {
        let cfg = PacketConfig::new(8.0, 0.0, 1.2, 1.0, 0.0).unwrap();
        let x1 = gapless::mean_x(1.0, &cfg).unwrap();
        assert!(x1.converged);
        assert_relative_eq!(x1.value, 0.7173199737139837, max_relative = 1e-8);
        let x5 = gapless::mean_x(5.0, &cfg).unwrap();
        assert_relative_eq!(x5.value, 0.18407174092874568, max_relative = 1e-8);
        let x2 = gapless::mean_x2(5.0, &cfg).unwrap();
        assert_relative_eq!(x2.value, 32.299475612869855, max_relative = 1e-8);
        let y2 = gapless::mean_y2(20.0, &cfg).unwrap();
        assert_relative_eq!(y2.value, 429.83179050664717, max_relative = 1e-8);
        // misuse is rejected
        let gapped = fig1b();
        assert!(gapless::mean_x(1.0, &gapped).is_err());
    }

    #[test]
    fn table_configs() {
        let c = table_config(TableId::I, 0.9, Some(30)).unwrap();
        assert_relative_eq!(c.alpha, 0.04, max_relative = 1e-15);
        assert_eq!(c.beta, 1.2);
        let c2 = table_config(TableId::II, 0.7, None).unwrap();
        assert_eq!(c2.beta, 0.0);
        assert_eq!(c2.alpha, 1.2);
    }
}
