//! Hermite triple-sum representations of the six expectation values, the
//! computation path independent of 2D quadrature.
//!
//! The expansion is in powers of z = 2·λ_c⁻¹·v_F·t, so it needs a finite gap.
//! Every term is assembled in log-magnitude + sign form (the G_n values
//! overflow f64 near n ≈ 150 for βd ≈ 10) and the outer sum over n is
//! compensated: the (−1)ⁿ shells cancel catastrophically once z is large,
//! which is what bounds the usable t range. The stopping rule requires three
//! consecutive small shells; `converged` is additionally withdrawn when
//! eps·max_shell exceeds the requested tolerance of the value (the
//! cancellation already destroyed the digits being asked for).

use crate::model::PacketConfig;
use crate::special::{ln_binomial, ln_factorial, HermiteTable};
use std::f64::consts::LN_2;
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_N_MAX: usize = 160;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("series expansion requires a finite gap (inv_lambda_c > 0)")]
    GapRequired,
}

#[derive(Debug, Clone, Copy)]
pub struct SeriesResult {
    pub value: f64,
    /// Outer shells evaluated (last index reached + 1).
    pub terms_used: usize,
    pub converged: bool,
    pub last_term_magnitude: f64,
    /// Largest |shell|; eps times this is the cancellation floor of `value`.
    pub max_shell_magnitude: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    X,
    Y,
    X2,
    Y2,
    Vx,
    Vy,
}

pub fn series_x(t: f64, cfg: &PacketConfig, tol: f64, n_max: usize) -> Result<SeriesResult, SeriesError> {
    evaluate(Kind::X, t, cfg, tol, n_max)
}

pub fn series_y(t: f64, cfg: &PacketConfig, tol: f64, n_max: usize) -> Result<SeriesResult, SeriesError> {
    evaluate(Kind::Y, t, cfg, tol, n_max)
}

pub fn series_x2(t: f64, cfg: &PacketConfig, tol: f64, n_max: usize) -> Result<SeriesResult, SeriesError> {
    evaluate(Kind::X2, t, cfg, tol, n_max)
}

pub fn series_y2(t: f64, cfg: &PacketConfig, tol: f64, n_max: usize) -> Result<SeriesResult, SeriesError> {
    evaluate(Kind::Y2, t, cfg, tol, n_max)
}

pub fn series_vx(t: f64, cfg: &PacketConfig, tol: f64, n_max: usize) -> Result<SeriesResult, SeriesError> {
    evaluate(Kind::Vx, t, cfg, tol, n_max)
}

pub fn series_vy(t: f64, cfg: &PacketConfig, tol: f64, n_max: usize) -> Result<SeriesResult, SeriesError> {
    evaluate(Kind::Vy, t, cfg, tol, n_max)
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

struct Evaluator {
    ga: HermiteTable,
    gb: HermiteTable,
    ln_z: f64,
    ln_w: f64,
    ln_t: f64,
    ln_l: f64,
    ln_d: f64,
    pol: f64,
    cross: f64,
    ln_pol: f64,
    ln_cross: f64,
    d: f64,
    v_f: f64,
}

impl Evaluator {
    fn new(t: f64, cfg: &PacketConfig, n_max: usize) -> Self {
        let l = cfg.inv_lambda_c;
        let vt = cfg.v_f * t;
        Evaluator {
            ga: HermiteTable::new(cfg.alpha * cfg.d, 2 * n_max + 4),
            gb: HermiteTable::new(cfg.beta * cfg.d, 2 * n_max + 4),
            ln_z: (2.0 * l * vt).ln(),
            ln_w: (2.0 * l * cfg.d).ln(),
            ln_t: vt.ln(),
            ln_l: l.ln(),
            ln_d: cfg.d.ln(),
            pol: cfg.pol(),
            cross: cfg.cross(),
            ln_pol: cfg.pol().abs().ln(),
            ln_cross: cfg.cross().abs().ln(),
            d: cfg.d,
            v_f: cfg.v_f,
        }
    }

    #[inline]
    fn gterm(&self, acc: &mut Kahan, base: f64, sign: f64, extra_ln: f64, ia: usize, ib: usize) {
        let s = sign * self.ga.sign(ia) * self.gb.sign(ib);
        if s != 0.0 {
            acc.add(s * (base + extra_ln + self.ga.ln_abs(ia) + self.gb.ln_abs(ib)).exp());
        }
    }

    /// One outer shell, including its (−1)ⁿ sign and any global multiplier.
    fn shell(&self, kind: Kind, n: usize) -> f64 {
        let nf = n as f64;
        let (pref, w_step) = match kind {
            Kind::X | Kind::Y => ((2.0 * nf + 2.0) * self.ln_z - ln_factorial(2 * n + 3), 2),
            Kind::X2 | Kind::Y2 => ((2.0 * nf + 4.0) * self.ln_z - ln_factorial(2 * n + 4), 4),
            Kind::Vx => ((2.0 * nf + 1.0) * self.ln_z - ln_factorial(2 * n + 2), 2),
            Kind::Vy => ((2.0 * nf + 1.0) * self.ln_z - ln_factorial(2 * n + 2), 1),
        };
        let spol = sgn(self.pol);
        let scross = sgn(self.cross);
        let mut acc = Kahan::default();
        for l in 0..=n {
            let base_l = pref + ln_binomial(n, l) - (2 * l + w_step) as f64 * self.ln_w;
            for m in 0..=l {
                let base = base_l + ln_binomial(l, m);
                let (a0, a1, a2) = (2 * m, 2 * m + 1, 2 * m + 2);
                let (b0, b1, b2) = (2 * l - 2 * m, 2 * l - 2 * m + 1, 2 * l - 2 * m + 2);
                match kind {
                    Kind::X => {
                        // pol·d[(2n+3)·Ga0·Gb1 + 2LT·Ga1·Gb0] − cross·T[Ga0·Gb2 + w²·Ga0·Gb0]
                        let c23 = (2.0 * nf + 3.0).ln();
                        self.gterm(&mut acc, base, spol, self.ln_pol + self.ln_d + c23, a0, b1);
                        self.gterm(&mut acc, base, spol, self.ln_pol + self.ln_d + LN_2 + self.ln_l + self.ln_t, a1, b0);
                        self.gterm(&mut acc, base, -scross, self.ln_cross + self.ln_t, a0, b2);
                        self.gterm(&mut acc, base, -scross, self.ln_cross + self.ln_t + 2.0 * self.ln_w, a0, b0);
                    }
                    Kind::Y => {
                        // −pol·d[(2n+3)·Ga1·Gb0 − 2LT·Ga0·Gb1]
                        //   + cross·[2Ld²·(2n+3)·Ga0·Gb0 + T·Ga1·Gb1]
                        let c23 = (2.0 * nf + 3.0).ln();
                        self.gterm(&mut acc, base, -spol, self.ln_pol + self.ln_d + c23, a1, b0);
                        self.gterm(&mut acc, base, spol, self.ln_pol + self.ln_d + LN_2 + self.ln_l + self.ln_t, a0, b1);
                        self.gterm(&mut acc, base, scross, self.ln_cross + LN_2 + self.ln_l + 2.0 * self.ln_d + c23, a0, b0);
                        self.gterm(&mut acc, base, scross, self.ln_cross + self.ln_t, a1, b1);
                    }
                    Kind::X2 => {
                        self.gterm(&mut acc, base, 1.0, 0.0, a0, b2);
                        self.gterm(&mut acc, base, 1.0, 2.0 * self.ln_w, a0, b0);
                    }
                    Kind::Y2 => {
                        self.gterm(&mut acc, base, 1.0, 0.0, a2, b0);
                        self.gterm(&mut acc, base, 1.0, 2.0 * self.ln_w, a0, b0);
                    }
                    Kind::Vx => {
                        // pol·2Ld[(n+1)·Ga0·Gb1 + LT·Ga1·Gb0] − cross·LT[w²·Ga0·Gb0 + Ga0·Gb2]
                        let twold = LN_2 + self.ln_l + self.ln_d;
                        self.gterm(&mut acc, base, spol, self.ln_pol + twold + (nf + 1.0).ln(), a0, b1);
                        self.gterm(&mut acc, base, spol, self.ln_pol + twold + self.ln_l + self.ln_t, a1, b0);
                        self.gterm(&mut acc, base, -scross, self.ln_cross + self.ln_l + self.ln_t + 2.0 * self.ln_w, a0, b0);
                        self.gterm(&mut acc, base, -scross, self.ln_cross + self.ln_l + self.ln_t, a0, b2);
                    }
                    Kind::Vy => {
                        // −pol[(2n+2)·Ga1·Gb0 − 2LT·Ga0·Gb1]
                        //   + cross[(2n+2)·2Ld·Ga0·Gb0 + (T/d)·Ga1·Gb1]
                        let c22 = (2.0 * nf + 2.0).ln();
                        self.gterm(&mut acc, base, -spol, self.ln_pol + c22, a1, b0);
                        self.gterm(&mut acc, base, spol, self.ln_pol + LN_2 + self.ln_l + self.ln_t, a0, b1);
                        self.gterm(&mut acc, base, scross, self.ln_cross + c22 + LN_2 + self.ln_l + self.ln_d, a0, b0);
                        self.gterm(&mut acc, base, scross, self.ln_cross + self.ln_t - self.ln_d, a1, b1);
                    }
                }
            }
        }
        let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
        let global = match kind {
            Kind::X | Kind::Y => 1.0,
            Kind::X2 | Kind::Y2 => -2.0 * self.d * self.d,
            Kind::Vx => 2.0 * self.v_f,
            Kind::Vy => self.v_f,
        };
        sign_n * global * acc.sum
    }
}

fn prefix(kind: Kind, t: f64, cfg: &PacketConfig) -> f64 {
    let vt = cfg.v_f * t;
    match kind {
        Kind::X => cfg.cross() * vt,
        Kind::Y | Kind::Vy => 0.0,
        Kind::X2 | Kind::Y2 => 0.5 * cfg.d * cfg.d + vt * vt,
        Kind::Vx => cfg.cross() * cfg.v_f,
    }
}

fn evaluate(kind: Kind, t: f64, cfg: &PacketConfig, tol: f64, n_max: usize) -> Result<SeriesResult, SeriesError> {
    assert!(t >= 0.0, "series requires t >= 0");
    if !(cfg.inv_lambda_c > 0.0) {
        return Err(SeriesError::GapRequired);
    }
    let closed = prefix(kind, t, cfg);
    if t == 0.0 {
        return Ok(SeriesResult {
            value: closed,
            terms_used: 0,
            converged: true,
            last_term_magnitude: 0.0,
            max_shell_magnitude: 0.0,
        });
    }
    let ev = Evaluator::new(t, cfg, n_max);
    let mut sum = Kahan::default();
    let mut max_shell = 0.0f64;
    let mut hist = [f64::INFINITY; 3];
    let mut rule_met = false;
    let mut terms_used = 0;
    for n in 0..n_max {
        let sh = ev.shell(kind, n);
        sum.add(sh);
        terms_used = n + 1;
        max_shell = max_shell.max(sh.abs());
        hist.rotate_left(1);
        hist[2] = sh.abs();
        let scale = (closed + sum.sum).abs().max(1e-300);
        if n >= 2 && hist.iter().all(|&h| h <= tol * scale) {
            rule_met = true;
            break;
        }
    }
    let value = closed + sum.sum;
    let scale = value.abs().max(1e-300);
    let converged = rule_met && f64::EPSILON * max_shell <= tol * scale;
    Ok(SeriesResult {
        value,
        terms_used,
        converged,
        last_term_magnitude: hist[2],
        max_shell_magnitude: max_shell,
    })
}
