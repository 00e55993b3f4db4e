//! Packet configuration and the analytic integrand kernels.
//!
//! Each expectation value ⟨x⟩, ⟨y⟩, ⟨x²⟩, ⟨y²⟩, ⟨v_x⟩, ⟨v_y⟩ is a
//! Gaussian-weighted momentum-space integral of a kernel that splits into a
//! spreading part (secular, polynomial in t) and a zitterbewegung part
//! (oscillatory through the phase θ = v_F t √(k² + λ_c⁻²)). The velocity
//! kernels are the exact time derivatives of the position kernels; their
//! equivalence with the Heisenberg velocity-operator contraction is checked in
//! tests, not assumed.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid packet config: {0}")]
    InvalidConfig(String),
    #[error("free baseline requires a finite gap (inv_lambda_c > 0)")]
    GaplessBaseline,
}

/// Physical parameters of the packet and the material.
///
/// `a` and `b` are the real spinor amplitudes (a² + b² = 1); `inv_lambda_c`
/// is the inverse Compton-like wavelength M v_F / ħ that parameterizes the
/// gap, with 0 meaning gapless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketConfig {
    /// Packet width d (nm).
    pub d: f64,
    /// Packet center momentum along x (1/nm).
    pub alpha: f64,
    /// Packet center momentum along y (1/nm).
    pub beta: f64,
    /// Spinor amplitude on the upper component.
    pub a: f64,
    /// Spinor amplitude on the lower component.
    pub b: f64,
    /// Inverse Compton wavelength λ_c⁻¹ (1/nm); 0 for the gapless case.
    pub inv_lambda_c: f64,
    /// Fermi velocity (nm/fs).
    pub v_f: f64,
}

impl PacketConfig {
    /// Config with `b = +√(1−a²)` and the default Fermi velocity 1 nm/fs.
    pub fn new(d: f64, alpha: f64, beta: f64, a: f64, inv_lambda_c: f64) -> Result<Self, ModelError> {
        if !(a.abs() <= 1.0) {
            return Err(ModelError::InvalidConfig(format!("|a| = {} > 1", a.abs())));
        }
        Self::with_b(d, alpha, beta, a, (1.0 - a * a).max(0.0).sqrt(), inv_lambda_c)
    }

    /// Config with an explicit (possibly negative) `b`.
    pub fn with_b(
        d: f64,
        alpha: f64,
        beta: f64,
        a: f64,
        b: f64,
        inv_lambda_c: f64,
    ) -> Result<Self, ModelError> {
        let cfg = PacketConfig { d, alpha, beta, a, b, inv_lambda_c, v_f: 1.0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_v_f(mut self, v_f: f64) -> Result<Self, ModelError> {
        self.v_f = v_f;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let norm = self.a * self.a + self.b * self.b;
        if (norm - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidConfig(format!(
                "a^2 + b^2 = {norm} (must be 1 within 1e-12)"
            )));
        }
        if !(self.d > 0.0) {
            return Err(ModelError::InvalidConfig(format!("d = {} (must be > 0)", self.d)));
        }
        if !(self.v_f > 0.0) {
            return Err(ModelError::InvalidConfig(format!("v_f = {} (must be > 0)", self.v_f)));
        }
        if !(self.inv_lambda_c >= 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "inv_lambda_c = {} (must be >= 0)",
                self.inv_lambda_c
            )));
        }
        if !(self.d.is_finite() && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(ModelError::InvalidConfig("non-finite parameter".into()));
        }
        Ok(())
    }

    /// a² − b².
    #[inline]
    pub fn pol(&self) -> f64 {
        self.a * self.a - self.b * self.b
    }

    /// 2ab.
    #[inline]
    pub fn cross(&self) -> f64 {
        2.0 * self.a * self.b
    }

    /// Dispersion magnitude √(k² + λ_c⁻²) (1/nm).
    #[inline]
    pub fn energy(&self, k: [f64; 2]) -> f64 {
        let l = self.inv_lambda_c;
        (k[0] * k[0] + k[1] * k[1] + l * l).sqrt()
    }

    /// True when the gap is exactly zero.
    #[inline]
    pub fn is_gapless(&self) -> bool {
        self.inv_lambda_c == 0.0
    }
}

/// Kernel value split into its spreading and zitterbewegung parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplitKernel {
    pub spreading: f64,
    pub zb: f64,
}

impl SplitKernel {
    #[inline]
    pub fn total(&self) -> f64 {
        self.spreading + self.zb
    }
}

/// The six observables with integral representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    X,
    Y,
    X2,
    Y2,
    Vx,
    Vy,
}

impl Observable {
    pub const ALL: [Observable; 6] =
        [Observable::X, Observable::Y, Observable::X2, Observable::Y2, Observable::Vx, Observable::Vy];

    /// Constant offset added outside the integral (d²/2 for the second moments).
    pub fn offset(&self, cfg: &PacketConfig) -> f64 {
        match self {
            Observable::X2 | Observable::Y2 => 0.5 * cfg.d * cfg.d,
            _ => 0.0,
        }
    }

    pub fn kernel(&self, k: [f64; 2], t: f64, cfg: &PacketConfig) -> SplitKernel {
        match self {
            Observable::X => kernel_x(k, t, cfg),
            Observable::Y => kernel_y(k, t, cfg),
            Observable::X2 => kernel_x2(k, t, cfg),
            Observable::Y2 => kernel_y2(k, t, cfg),
            Observable::Vx => kernel_vx(k, t, cfg),
            Observable::Vy => kernel_vy(k, t, cfg),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Observable::X => "x",
            Observable::Y => "y",
            Observable::X2 => "x2",
            Observable::Y2 => "y2",
            Observable::Vx => "vx",
            Observable::Vy => "vy",
        }
    }
}

/// Computation route for an expectation value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Quadrature,
    Series,
    Both,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::Series => "series",
            Method::Both => "both",
        }
    }
}

/// One observable at one time, with the part split and an error estimate.
///
/// Invariant: `value = spreading_part + zb_part + offset` where the offset is
/// d²/2 for the second moments and 0 otherwise.
#[derive(Debug, Clone, Copy)]
pub struct ExpectationResult {
    pub value: f64,
    pub spreading_part: f64,
    pub zb_part: f64,
    pub est_error: f64,
    pub method: Method,
    /// True when every contributing route converged within its tolerance.
    pub converged: bool,
}

/// Conjugate pairs for uncertainty products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjugatePair {
    /// Δx·Δp_x (ħ units).
    XP,
    /// Δy·Δp_y (ħ units).
    YP,
    /// Δx·Δv_x (nm²/fs).
    XV,
    /// Δy·Δv_y (nm²/fs).
    YV,
}

impl ConjugatePair {
    pub fn name(&self) -> &'static str {
        match self {
            ConjugatePair::XP => "xp",
            ConjugatePair::YP => "yp",
            ConjugatePair::XV => "xv",
            ConjugatePair::YV => "yv",
        }
    }

    pub fn is_velocity(&self) -> bool {
        matches!(self, ConjugatePair::XV | ConjugatePair::YV)
    }
}

/// Evolution phase θ = v_F t √(k² + λ_c⁻²).
#[inline]
pub fn phase(k: [f64; 2], t: f64, cfg: &PacketConfig) -> f64 {
    cfg.v_f * t * cfg.energy(k)
}

/// Packet weight exp[−d²(k_x−α)² − d²(k_y−β)²].
///
/// The d²/π normalization prefactor is owned by the integrator, so a unit
/// kernel integrates to 1.
#[inline]
pub fn gaussian_weight(k: [f64; 2], cfg: &PacketConfig) -> f64 {
    let dx = k[0] - cfg.alpha;
    let dy = k[1] - cfg.beta;
    (-cfg.d * cfg.d * (dx * dx + dy * dy)).exp()
}

/// ⟨x⟩ kernel (nm).
pub fn kernel_x(k: [f64; 2], t: f64, cfg: &PacketConfig) -> SplitKernel {
    let l = cfg.inv_lambda_c;
    let e2 = k[0] * k[0] + k[1] * k[1] + l * l;
    if e2 == 0.0 {
        // gapless k = 0: integrable point singularity, measure zero
        return SplitKernel::default();
    }
    let e = e2.sqrt();
    let th = cfg.v_f * t * e;
    let (s, c) = th.sin_cos();
    let spreading = cfg.v_f * t * (cfg.pol() * l * k[0] + cfg.cross() * k[0] * k[0]) / e2;
    let zb = cfg.pol() / e2 * (k[1] * s * s - l * k[0] / e * s * c)
        + cfg.cross() / (e2 * e) * s * c * (k[1] * k[1] + l * l);
    SplitKernel { spreading, zb }
}

/// ⟨y⟩ kernel (nm).
pub fn kernel_y(k: [f64; 2], t: f64, cfg: &PacketConfig) -> SplitKernel {
    let l = cfg.inv_lambda_c;
    let e2 = k[0] * k[0] + k[1] * k[1] + l * l;
    if e2 == 0.0 {
        return SplitKernel::default();
    }
    let e = e2.sqrt();
    let th = cfg.v_f * t * e;
    let (s, c) = th.sin_cos();
    let drift = cfg.pol() * l * k[1] + cfg.cross() * k[0] * k[1];
    let spreading = cfg.v_f * t * drift / e2;
    let zb = s * s / e2 * (-cfg.pol() * k[0] + cfg.cross() * l) - s * c / (e2 * e) * drift;
    SplitKernel { spreading, zb }
}

/// ⟨x²⟩ kernel (nm²); excludes the constant d²/2 offset.
pub fn kernel_x2(k: [f64; 2], t: f64, cfg: &PacketConfig) -> SplitKernel {
    let l = cfg.inv_lambda_c;
    let e2 = k[0] * k[0] + k[1] * k[1] + l * l;
    if e2 == 0.0 {
        return SplitKernel::default();
    }
    let vt = cfg.v_f * t;
    let s = (vt * e2.sqrt()).sin();
    SplitKernel {
        spreading: vt * vt * k[0] * k[0] / e2,
        zb: s * s * (k[1] * k[1] + l * l) / (e2 * e2),
    }
}

/// ⟨y²⟩ kernel (nm²); excludes the constant d²/2 offset.
pub fn kernel_y2(k: [f64; 2], t: f64, cfg: &PacketConfig) -> SplitKernel {
    kernel_x2([k[1], k[0]], t, cfg)
}

/// ⟨v_x⟩ kernel (nm/fs): exact time derivative of the ⟨x⟩ kernel.
///
/// The spreading part is the time-independent drift term v_F·∂X_S/∂(v_F t).
pub fn kernel_vx(k: [f64; 2], t: f64, cfg: &PacketConfig) -> SplitKernel {
    let l = cfg.inv_lambda_c;
    let e2 = k[0] * k[0] + k[1] * k[1] + l * l;
    if e2 == 0.0 {
        return SplitKernel::default();
    }
    let e = e2.sqrt();
    let th2 = 2.0 * cfg.v_f * t * e;
    let (s2, c2) = th2.sin_cos();
    let spreading = cfg.v_f * (cfg.pol() * l * k[0] + cfg.cross() * k[0] * k[0]) / e2;
    let zb = cfg.v_f
        * (cfg.pol() * (k[1] * s2 / e - l * k[0] * c2 / e2)
            + cfg.cross() * c2 * (k[1] * k[1] + l * l) / e2);
    SplitKernel { spreading, zb }
}

/// ⟨v_y⟩ kernel (nm/fs): exact time derivative of the ⟨y⟩ kernel.
pub fn kernel_vy(k: [f64; 2], t: f64, cfg: &PacketConfig) -> SplitKernel {
    let l = cfg.inv_lambda_c;
    let e2 = k[0] * k[0] + k[1] * k[1] + l * l;
    if e2 == 0.0 {
        return SplitKernel::default();
    }
    let e = e2.sqrt();
    let th2 = 2.0 * cfg.v_f * t * e;
    let (s2, c2) = th2.sin_cos();
    let drift = cfg.pol() * l * k[1] + cfg.cross() * k[0] * k[1];
    let spreading = cfg.v_f * drift / e2;
    let zb = cfg.v_f * (s2 * (-cfg.pol() * k[0] + cfg.cross() * l) / e - c2 * drift / e2);
    SplitKernel { spreading, zb }
}

/// Uncertainty product of the nonrelativistic free Hamiltonian p²/2M with the
/// same packet.
///
/// XP/YP return the dimensionless product in units of ħ; XV/YV return nm²/fs.
/// Requires a finite gap (the free baseline needs a finite mass).
pub fn free_baseline(pair: ConjugatePair, t: f64, cfg: &PacketConfig) -> Result<f64, ModelError> {
    if !(cfg.inv_lambda_c > 0.0) {
        return Err(ModelError::GaplessBaseline);
    }
    let lam = 1.0 / cfg.inv_lambda_c;
    let d2 = cfg.d * cfg.d;
    match pair {
        ConjugatePair::XP | ConjugatePair::YP => {
            let r = lam * cfg.v_f * t / (2.0 * d2);
            Ok((0.25 + r * r).sqrt())
        }
        ConjugatePair::XV | ConjugatePair::YV => {
            let u = lam * cfg.v_f / 2.0;
            let r = lam * lam * cfg.v_f * cfg.v_f * t / (2.0 * d2);
            Ok((u * u + r * r).sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn fig1b() -> PacketConfig {
        PacketConfig::new(8.0, 0.04, 1.2, 0.9, 2.0).unwrap()
    }

    #[test]
    fn config_invariants() {
        let cfg = fig1b();
        assert_abs_diff_eq!(cfg.a * cfg.a + cfg.b * cfg.b, 1.0, epsilon = 1e-12);
        assert!(PacketConfig::new(-1.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(PacketConfig::with_b(8.0, 0.0, 0.0, 0.9, 0.9, 1.0).is_err());
        // explicit negative b is allowed
        let neg = PacketConfig::with_b(8.0, 0.0, 0.0, 0.6, -0.8, 1.0).unwrap();
        assert_eq!(neg.b, -0.8);
    }

    #[test]
    fn phase_examples() {
        let gapless = PacketConfig::new(8.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(phase([0.0, 0.0], 7.3, &gapless), 0.0);
        let gapped = PacketConfig::new(8.0, 0.0, 0.0, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(phase([0.0, 0.0], 1.0, &gapped), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phase([3.0, 4.0], 2.0, &gapless), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn weight_examples() {
        let cfg = fig1b();
        assert_eq!(gaussian_weight([cfg.alpha, cfg.beta], &cfg), 1.0);
        let one_width = gaussian_weight([cfg.alpha + 1.0 / cfg.d, cfg.beta], &cfg);
        assert_relative_eq!(one_width, (-1.0f64).exp(), max_relative = 1e-14);
        let two_widths = gaussian_weight([cfg.alpha, cfg.beta + 2.0 / cfg.d], &cfg);
        assert_relative_eq!(two_widths, (-4.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn kernel_x_at_origin_is_pure_zb() {
        let cfg = fig1b();
        let t = 0.7;
        let k = kernel_x([0.0, 0.0], t, &cfg);
        assert_eq!(k.spreading, 0.0);
        let th = cfg.v_f * t * cfg.inv_lambda_c;
        let expect = cfg.cross() / cfg.inv_lambda_c * th.sin() * th.cos();
        assert_relative_eq!(k.zb, expect, max_relative = 1e-14);
    }

    #[test]
    fn kernel_x_pure_upper_spinor_on_axis() {
        let cfg = PacketConfig::new(8.0, 0.04, 1.2, 1.0, 2.0).unwrap();
        let (kx, t) = (0.3, 1.1);
        let k = kernel_x([kx, 0.0], t, &cfg);
        let l = cfg.inv_lambda_c;
        let e2 = kx * kx + l * l;
        let th = t * e2.sqrt();
        assert_relative_eq!(k.spreading, l * t * kx / e2, max_relative = 1e-14);
        assert_relative_eq!(
            k.zb,
            -l * kx * th.sin() * th.cos() / e2.powf(1.5),
            max_relative = 1e-14
        );
    }

    #[test]
    fn kernel_y_at_origin() {
        let cfg = fig1b();
        let t = 0.4;
        let k = kernel_y([0.0, 0.0], t, &cfg);
        let th = cfg.v_f * t * cfg.inv_lambda_c;
        assert_eq!(k.spreading, 0.0);
        assert_relative_eq!(k.zb, cfg.cross() / cfg.inv_lambda_c * th.sin().powi(2), max_relative = 1e-14);
    }

    #[test]
    fn kernel_y_gapless_pure_upper() {
        // a=1, b=0, gapless: zb = -sin^2(theta) kx / k^2
        let cfg = PacketConfig::new(8.0, 0.0, 1.2, 1.0, 0.0).unwrap();
        let (kx, ky, t): (f64, f64, f64) = (0.3, 0.9, 2.0);
        let k2 = kx * kx + ky * ky;
        let th = t * k2.sqrt();
        let k = kernel_y([kx, ky], t, &cfg);
        assert_eq!(k.spreading, 0.0);
        assert_relative_eq!(k.zb, -th.sin().powi(2) * kx / k2, max_relative = 1e-13);
    }

    // Reference values from an independent 40-digit evaluation of the kernel
    // formulas at k=(0.1, 1.0), t=1, the Fig. 1b configuration.
    #[test]
    fn kernel_values_frozen_point() {
        let cfg = fig1b();
        let k = [0.1, 1.0];
        let t = 1.0;
        let x = kernel_x(k, t, &cfg);
        assert_relative_eq!(x.spreading, 0.026316570478717208, max_relative = 1e-14);
        assert_relative_eq!(x.zb, -0.088370922004387668, max_relative = 1e-14);
        let y = kernel_y(k, t, &cfg);
        assert_relative_eq!(y.spreading, 0.26316570478717208, max_relative = 1e-14);
        assert_relative_eq!(y.zb, 0.24271855206129286, max_relative = 1e-14);
        let x2 = kernel_x2(k, t, &cfg);
        assert_relative_eq!(x2.spreading, 0.0019960079840319361, max_relative = 1e-14);
        assert_relative_eq!(x2.zb, 0.12286848584681173, max_relative = 1e-14);
        let y2 = kernel_y2(k, t, &cfg);
        assert_relative_eq!(y2.spreading, 0.19960079840319361, max_relative = 1e-14);
        assert_relative_eq!(y2.zb, 0.098540525649143008, max_relative = 1e-14);
        let vx = kernel_vx(k, t, &cfg);
        assert_relative_eq!(vx.spreading, 0.026316570478717208, max_relative = 1e-14);
        assert_relative_eq!(vx.zb, -0.44647042874742152, max_relative = 1e-14);
        let vy = kernel_vy(k, t, &cfg);
        assert_relative_eq!(vy.spreading, 0.26316570478717208, max_relative = 1e-14);
        assert_relative_eq!(vy.zb, -0.59326124681863734, max_relative = 1e-14);
    }

    #[test]
    fn second_moment_kernels_vanish_at_t0() {
        let cfg = fig1b();
        for k in [[0.3, -0.2], [1.0, 0.5]] {
            let x2 = kernel_x2(k, 0.0, &cfg);
            assert_eq!(x2.spreading, 0.0);
            assert_eq!(x2.zb, 0.0);
        }
    }

    #[test]
    fn x2_kernel_at_origin() {
        let cfg = fig1b();
        let t = 0.9;
        let k = kernel_x2([0.0, 0.0], t, &cfg);
        let th = cfg.v_f * t * cfg.inv_lambda_c;
        let lam = 1.0 / cfg.inv_lambda_c;
        assert_eq!(k.spreading, 0.0);
        assert_relative_eq!(k.zb, th.sin().powi(2) * lam * lam, max_relative = 1e-14);
    }

    #[test]
    fn vx_kernel_total_at_t0_is_drift_plus_cross() {
        let cfg = fig1b();
        for k in [[0.0, 0.0], [0.5, -1.3], [2.0, 0.7]] {
            let v = kernel_vx(k, 0.0, &cfg);
            // spinor contraction at theta = 0 gives 2ab v_F plus the drift term
            // that cancels against the zb part's cos term composition
            let e2 = k[0] * k[0] + k[1] * k[1] + cfg.inv_lambda_c.powi(2);
            if e2 == 0.0 {
                continue;
            }
            assert_relative_eq!(v.total(), cfg.cross() * cfg.v_f, max_relative = 1e-13);
        }
    }

    #[test]
    fn spreading_is_pure_kx2_for_balanced_spinor() {
        let cfg = PacketConfig::new(8.0, 0.04, 1.2, 1.0 / 2f64.sqrt(), 2.0).unwrap();
        assert_abs_diff_eq!(cfg.pol(), 0.0, epsilon = 1e-15);
        for k in [[0.3, 0.8], [-0.6, 1.4], [1.0, -0.2]] {
            let t = 1.7;
            let e2 = k[0] * k[0] + k[1] * k[1] + cfg.inv_lambda_c.powi(2);
            let kx = kernel_x(k, t, &cfg);
            assert_relative_eq!(
                kx.spreading * e2 / (cfg.v_f * t),
                cfg.cross() * k[0] * k[0],
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn y2_is_x2_with_axes_swapped() {
        let cfg = fig1b();
        for (k, t) in [([0.3, 0.8], 1.0), ([-0.6, 1.4], 2.5), ([1.0, -0.2], 0.1)] {
            let y2 = kernel_y2(k, t, &cfg);
            let x2 = kernel_x2([k[1], k[0]], t, &cfg);
            assert_eq!(y2, x2);
        }
    }

    #[test]
    fn free_baseline_examples() {
        let cfg = fig1b();
        assert_abs_diff_eq!(free_baseline(ConjugatePair::XP, 0.0, &cfg).unwrap(), 0.5, epsilon = 1e-15);
        let lam = 1.0 / cfg.inv_lambda_c;
        assert_abs_diff_eq!(
            free_baseline(ConjugatePair::XV, 0.0, &cfg).unwrap(),
            lam * cfg.v_f / 2.0,
            epsilon = 1e-15
        );
        // lambda_c v_f t = 2 d^2  ->  sqrt(0.25 + 1)
        let t = 2.0 * cfg.d * cfg.d / (lam * cfg.v_f);
        assert_relative_eq!(
            free_baseline(ConjugatePair::YP, t, &cfg).unwrap(),
            1.25f64.sqrt(),
            max_relative = 1e-14
        );
        let gapless = PacketConfig::new(8.0, 0.0, 1.2, 1.0, 0.0).unwrap();
        assert_eq!(
            free_baseline(ConjugatePair::XP, 1.0, &gapless),
            Err(ModelError::GaplessBaseline)
        );
    }
}
