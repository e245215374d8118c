//! Adaptive actor-critic update laws.
//!
//! The critic `Ŵ_c` follows a normalized least-squares law driven by the
//! Bellman error, the actor `Ŵ_a` is pulled toward the critic along the
//! Bellman-error gradient, and the input-gain parameters `θ̂` are estimated
//! by concurrent learning over a recorded history stack (with a leakage
//! fallback until the stack becomes full rank).

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;

use crate::algebra::{gauss_jordan_inverse, is_positive_definite, min_eigenvalue_sym, Matrix, Vector};
use crate::basis::QuadBasis;
use crate::error::{Error, Result};
use crate::plants::{Dims, PlantModel};

/// Default probing amplitude.
pub const PROBING_AMPLITUDE: f64 = 0.01;

/// Fraction of a projection bound at which the outward rate starts being attenuated.
const PROJECTION_LAYER: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct GainConfig {
    q: Matrix,
    r: Matrix,
    r_inv: Matrix,
    /// critic learning rate
    pub gamma_c: f64,
    /// critic normalization
    pub c1: f64,
    /// Gain-matrix adaptation rate. `None` uses `gamma_c`.
    pub gamma: Option<f64>,
    pub gamma_a: f64,
    /// actor-to-critic consensus gain
    pub gamma_a2: f64,
    pub gamma_theta: f64,
    pub k_cl: f64,
    /// leakage gain used before the stack is full rank
    pub sigma2: f64,
    /// initial gain matrix scale, `Γ(0) = c₂ I`
    pub c2: f64,
    pub probing_amplitude: f64,
    pub wc_radius: f64,
    pub wa_radius: f64,
    pub theta_lo: Vector,
    pub theta_hi: Vector,
    /// excitation level above which the concurrent-learning law is latched on
    pub eps_rank: f64,
    pub stack_capacity: usize,
    /// When false, `θ̂` is held at its initial value.
    pub adapt_theta: bool,
}

impl GainConfig {
    /// Gains with the given cost weights and defaults for everything else.
    pub fn new(q: Matrix, r: Matrix, p: usize) -> Result<Self> {
        let r_inv = checked_weights(&q, &r)?;
        Ok(GainConfig {
            q,
            r,
            r_inv,
            gamma_c: 10.0,
            c1: 10.0,
            gamma: None,
            gamma_a: 0.01,
            gamma_a2: 10.9,
            gamma_theta: 0.01,
            k_cl: 50.0,
            sigma2: 0.1,
            c2: 100.0,
            probing_amplitude: PROBING_AMPLITUDE,
            wc_radius: 100.0,
            wa_radius: 100.0,
            theta_lo: Vector::from_element(p, 0.01),
            theta_hi: Vector::from_element(p, 10.0),
            eps_rank: 1e-6,
            stack_capacity: 20,
            adapt_theta: true,
        })
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn r_inv(&self) -> &Matrix {
        &self.r_inv
    }

    pub fn set_weights(&mut self, q: Matrix, r: Matrix) -> Result<()> {
        self.r_inv = checked_weights(&q, &r)?;
        self.q = q;
        self.r = r;
        Ok(())
    }

    pub fn gamma_ls(&self) -> f64 {
        self.gamma.unwrap_or(self.gamma_c)
    }

    /// Checks positivity of every gain and consistency with the plant dimensions.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        if self.q.shape() != (dims.n, dims.n) {
            return Err(Error::dim(
                "Q",
                format!("{0}x{0}", dims.n),
                format!("{}x{}", self.q.nrows(), self.q.ncols()),
            ));
        }
        if self.r.shape() != (dims.m, dims.m) {
            return Err(Error::dim(
                "R",
                format!("{0}x{0}", dims.m),
                format!("{}x{}", self.r.nrows(), self.r.ncols()),
            ));
        }
        let positive = [
            ("gamma_c", self.gamma_c),
            ("c1", self.c1),
            ("gamma", self.gamma_ls()),
            ("gamma_a", self.gamma_a),
            ("gamma_a2", self.gamma_a2),
            ("gamma_theta", self.gamma_theta),
            ("k_cl", self.k_cl),
            ("sigma2", self.sigma2),
            ("c2", self.c2),
            ("wc_radius", self.wc_radius),
            ("wa_radius", self.wa_radius),
            ("eps_rank", self.eps_rank),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.probing_amplitude >= 0.0) || !self.probing_amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "probing_amplitude must be non-negative, got {}",
                self.probing_amplitude
            )));
        }
        if self.stack_capacity == 0 {
            return Err(Error::InvalidParameter("stack_capacity must be at least 1".into()));
        }
        if self.theta_lo.len() != dims.p {
            return Err(Error::dim("theta_lo", dims.p, self.theta_lo.len()));
        }
        if self.theta_hi.len() != dims.p {
            return Err(Error::dim("theta_hi", dims.p, self.theta_hi.len()));
        }
        for (lo, hi) in self.theta_lo.iter().zip(self.theta_hi.iter()) {
            if !(*lo > 0.0) || !hi.is_finite() || lo / PROJECTION_LAYER >= PROJECTION_LAYER * hi {
                return Err(Error::InvalidParameter(format!(
                    "theta interval [{lo}, {hi}] must satisfy 0 < lo and lo/0.9 < 0.9*hi"
                )));
            }
        }
        Ok(())
    }
}

fn checked_weights(q: &Matrix, r: &Matrix) -> Result<Matrix> {
    for (name, m) in [("Q", q), ("R", r)] {
        if !m.is_square() {
            return Err(Error::dim(
                name,
                "square matrix",
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
            return Err(Error::InvalidParameter(format!("{name} must be symmetric")));
        }
        if !is_positive_definite(m) {
            return Err(Error::InvalidParameter(format!("{name} must be positive definite")));
        }
    }
    gauss_jordan_inverse(r)
}

/// Adaptive state: critic and actor weights, parameter estimate and the
/// least-squares gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub wc: Vector,
    pub wa: Vector,
    pub theta: Vector,
    pub gamma: Matrix,
}

impl LearnerState {
    pub fn new(wc: Vector, wa: Vector, theta: Vector, c2: f64) -> Result<Self> {
        if wc.len() != wa.len() {
            return Err(Error::dim("LearnerState actor weights", wc.len(), wa.len()));
        }
        let n_c = wc.len();
        Ok(LearnerState {
            wc,
            wa,
            theta,
            gamma: Matrix::identity(n_c, n_c) * c2,
        })
    }
}

/// Quantities shared by every law at one instant: regulation error, basis
/// Jacobian and the estimated input-gain matrix.
#[derive(Debug, Clone)]
pub struct Features {
    pub xbar: Vector,
    pub dphi: Matrix,
    pub g_hat: Matrix,
}

impl Features {
    pub fn compute(plant: &PlantModel, basis: &QuadBasis, x: &Vector, theta_hat: &Vector) -> Result<Self> {
        let xbar = x - plant.desired_state();
        Ok(Features {
            dphi: basis.grad(&xbar)?,
            g_hat: plant.g_matrix(x, theta_hat)?,
            xbar,
        })
    }
}

/// `û = -½ R⁻¹ ĝᵀ φ′ᵀ Ŵ_a`
pub fn control(f: &Features, wa: &Vector, cfg: &GainConfig) -> Vector {
    let grad_v = f.dphi.tr_mul(wa);
    cfg.r_inv() * f.g_hat.tr_mul(&grad_v) * -0.5
}

/// `r(x̄, u) = x̄ᵀ Q x̄ + uᵀ R u`
pub fn local_cost(xbar: &Vector, u: &Vector, cfg: &GainConfig) -> f64 {
    xbar.dot(&(cfg.q() * xbar)) + u.dot(&(cfg.r() * u))
}

/// Critic regressor `w = φ′ ĝ û`.
pub fn bellman_w(f: &Features, u_hat: &Vector) -> Vector {
    &f.dphi * (&f.g_hat * u_hat)
}

/// Measurable Bellman error `δ = Ŵ_cᵀ w + r(x̄, û)`.
pub fn bellman_error(f: &Features, u_hat: &Vector, wc: &Vector, cfg: &GainConfig) -> f64 {
    bellman_error_with_w(&bellman_w(f, u_hat), &f.xbar, u_hat, wc, cfg)
}

pub fn bellman_error_with_w(w: &Vector, xbar: &Vector, u_hat: &Vector, wc: &Vector, cfg: &GainConfig) -> f64 {
    wc.dot(w) + local_cost(xbar, u_hat, cfg)
}

pub fn value_estimate(basis: &QuadBasis, xbar: &Vector, wc: &Vector) -> Result<f64> {
    Ok(wc.dot(&basis.eval(xbar)?))
}

/// Critic weight rate (projected onto the weight ball) and gain-matrix rate.
pub fn critic_rate(wc: &Vector, gamma: &Matrix, w: &Vector, delta: f64, cfg: &GainConfig) -> (Vector, Matrix) {
    let gw = gamma * w;
    let norm = 1.0 + cfg.c1 * w.dot(&gw);
    let raw = &gw * (-cfg.gamma_c * delta / norm);
    let gamma_rate = &gw * gw.transpose() * (-cfg.gamma_ls() / norm);
    (proj_ball(wc, &raw, cfg.wc_radius), gamma_rate)
}

/// Actor weight rate, projected onto the weight ball.
pub fn actor_rate(wa: &Vector, wc: &Vector, delta: f64, w: &Vector, f: &Features, cfg: &GainConfig) -> Vector {
    let diff = wa - wc;
    // ĝ_φ (Ŵa - Ŵc) = (φ′ĝ) R⁻¹ (φ′ĝ)ᵀ (Ŵa - Ŵc)
    let pg = &f.dphi * &f.g_hat;
    let g_phi_diff = &pg * (cfg.r_inv() * pg.tr_mul(&diff));
    let raw = g_phi_diff * (-cfg.gamma_a * delta / (1.0 + w.dot(w)).sqrt()) - &diff * cfg.gamma_a2;
    proj_ball(wa, &raw, cfg.wa_radius)
}

/// Parameter estimate rate.
///
/// The feedback term `γ_θ Yᵀ (û ⊗ φ′ᵀŴ_c)` is always present. Once the stack
/// has latched full rank the concurrent-learning sum
/// `k_cl γ_θ Σ 𝒴ⱼᵀ(ẋ̂ⱼ - bⱼ - 𝒴ⱼθ̂)` is added; before that a leakage term
/// `-σ₂ θ̂` is used instead. The result is interval-projected.
#[allow(clippy::too_many_arguments)]
pub fn param_rate(
    plant: &PlantModel,
    x: &Vector,
    f: &Features,
    u_hat: &Vector,
    wc: &Vector,
    theta: &Vector,
    stack: &HistoryStack,
    cfg: &GainConfig,
) -> Result<Vector> {
    if !cfg.adapt_theta {
        return Ok(Vector::zeros(theta.len()));
    }
    let y = plant.regressor(x)?;
    let grad_v = f.dphi.tr_mul(wc);
    let n = grad_v.len();
    // (û ⊗ φ′ᵀŴc) in column-major vec order
    let mut kron_uv = Vector::zeros(n * u_hat.len());
    for (k, uk) in u_hat.iter().enumerate() {
        kron_uv.rows_mut(k * n, n).copy_from(&(&grad_v * *uk));
    }
    let mut rate = y.tr_mul(&kron_uv) * cfg.gamma_theta;
    match stack.law() {
        ParamLaw::ConcurrentLearning => {
            rate += (stack.rhs() - stack.gram() * theta) * (cfg.k_cl * cfg.gamma_theta);
        }
        ParamLaw::SigmaModification => rate -= theta * cfg.sigma2,
    }
    Ok(proj_interval(theta, &rate, &cfg.theta_lo, &cfg.theta_hi))
}

/// Ball projection. Interior points (`‖value‖ < 0.9 radius`) keep their
/// rate; in the outer layer the outward radial component is scaled linearly
/// to zero at the boundary. Tangential components are untouched.
pub fn proj_ball(value: &Vector, rate: &Vector, radius: f64) -> Vector {
    let norm = value.norm();
    if norm < PROJECTION_LAYER * radius || norm == 0.0 {
        return rate.clone();
    }
    let unit = value / norm;
    let radial = rate.dot(&unit);
    if radial <= 0.0 {
        return rate.clone();
    }
    let keep = ((radius - norm) / ((1.0 - PROJECTION_LAYER) * radius)).clamp(0.0, 1.0);
    rate - unit * ((1.0 - keep) * radial)
}

/// Componentwise interval projection. The upper layer spans `[0.9 hi, hi]`,
/// the lower layer `[lo, lo / 0.9]`; inside a layer the rate pointing out of
/// the interval is scaled linearly to zero at the bound.
pub fn proj_interval(value: &Vector, rate: &Vector, lo: &Vector, hi: &Vector) -> Vector {
    let mut out = rate.clone();
    for i in 0..value.len() {
        let (v, r) = (value[i], rate[i]);
        if r > 0.0 && v > PROJECTION_LAYER * hi[i] {
            let width = (1.0 - PROJECTION_LAYER) * hi[i];
            out[i] = r * ((hi[i] - v) / width).clamp(0.0, 1.0);
        } else if r < 0.0 && v < lo[i] / PROJECTION_LAYER {
            let width = lo[i] / PROJECTION_LAYER - lo[i];
            out[i] = r * ((v - lo[i]) / width).clamp(0.0, 1.0);
        }
    }
    out
}

/// Exploration signal, identical on every channel, with a decaying `e^{-t}` envelope.
pub fn probing(t: f64, amplitude: f64, m: usize) -> Vector {
    let s2 = |a: f64| a.sin().powi(2);
    let shape = s2(PI * t / 5.0) * (PI * t / 2.0).cos()
        + s2(2.0 * PI * t / 3.0) * (0.1 * t).cos()
        + s2(-1.2 * (-0.01 * t).exp()) * (0.5 * t).cos()
        + (-0.1 * t).exp().sin().powi(5);
    Vector::from_element(m, amplitude * (-t).exp() * shape)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamLaw {
    SigmaModification,
    ConcurrentLearning,
}

impl fmt::Display for ParamLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamLaw::SigmaModification => "sigma-mod",
            ParamLaw::ConcurrentLearning => "CL",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackEntry {
    pub x: Vector,
    pub u: Vector,
    pub xdot_hat: Vector,
    /// `𝒴ⱼ`, shape `n x p`
    pub regressor: Matrix,
    /// `bⱼ`, known input-driven offset
    pub offset: Vector,
}

/// Recorded data for concurrent learning, kept so that the minimum
/// eigenvalue of `Σ 𝒴ⱼᵀ𝒴ⱼ` only grows once the stack is full.
#[derive(Debug, Clone)]
pub struct HistoryStack {
    capacity: usize,
    entries: Vec<StackEntry>,
    gram: Matrix,
    rhs: Vector,
    sigma1: f64,
    eps_rank: f64,
    latched: bool,
}

impl HistoryStack {
    pub fn new(capacity: usize, p: usize, eps_rank: f64) -> Self {
        HistoryStack {
            capacity,
            entries: Vec::with_capacity(capacity),
            gram: Matrix::zeros(p, p),
            rhs: Vector::zeros(p),
            sigma1: 0.0,
            eps_rank,
            latched: false,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[StackEntry] {
        &self.entries
    }

    /// `Σ 𝒴ⱼᵀ𝒴ⱼ`
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// `Σ 𝒴ⱼᵀ(ẋ̂ⱼ - bⱼ)`
    pub fn rhs(&self) -> &Vector {
        &self.rhs
    }

    /// Excitation level `λ_min(Σ 𝒴ⱼᵀ𝒴ⱼ)`.
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    /// Once the excitation threshold has been crossed the law never switches back.
    pub fn law(&self) -> ParamLaw {
        if self.latched {
            ParamLaw::ConcurrentLearning
        } else {
            ParamLaw::SigmaModification
        }
    }

    /// Builds an entry from a sample and offers it; see [`HistoryStack::offer_entry`].
    pub fn offer(&mut self, plant: &PlantModel, x: &Vector, u: &Vector, xdot_hat: &Vector) -> Result<bool> {
        let (regressor, offset) = plant.lip_regressor(x, u)?;
        if xdot_hat.len() != regressor.nrows() {
            return Err(Error::dim("HistoryStack::offer", regressor.nrows(), xdot_hat.len()));
        }
        if ![x.as_slice(), u.as_slice(), xdot_hat.as_slice()]
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
        {
            return Ok(false);
        }
        self.offer_entry(StackEntry {
            x: x.clone(),
            u: u.clone(),
            xdot_hat: xdot_hat.clone(),
            regressor,
            offset,
        })
    }

    /// Appends while there is room. When full, the entry whose removal costs
    /// the least excitation is swapped for the candidate, but only if that
    /// strictly raises `λ_min`.
    pub fn offer_entry(&mut self, entry: StackEntry) -> Result<bool> {
        if entry.regressor.ncols() != self.gram.ncols() {
            return Err(Error::dim(
                "HistoryStack::offer_entry",
                self.gram.ncols(),
                entry.regressor.ncols(),
            ));
        }
        if self.entries.len() < self.capacity {
            self.entries.push(entry);
            self.refresh()?;
            return Ok(true);
        }
        let mut best: Option<(usize, f64)> = None;
        for (k, old) in self.entries.iter().enumerate() {
            let without = &self.gram - old.regressor.tr_mul(&old.regressor);
            let lam = min_eigenvalue_sym(&without)?;
            if best.is_none_or(|(_, b)| lam > b) {
                best = Some((k, lam));
            }
        }
        let Some((k, _)) = best else {
            return Ok(false);
        };
        let old = &self.entries[k];
        let candidate = &self.gram - old.regressor.tr_mul(&old.regressor) + entry.regressor.tr_mul(&entry.regressor);
        let lam = min_eigenvalue_sym(&candidate)?;
        if lam > self.sigma1 + 1e-12 * self.sigma1.abs().max(1.0) {
            self.entries[k] = entry;
            self.refresh()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Gram matrix recomputed from the entries, without using the cached sum.
    pub fn recompute_gram(&self) -> Matrix {
        let p = self.gram.ncols();
        self.entries
            .iter()
            .fold(Matrix::zeros(p, p), |acc, e| acc + e.regressor.tr_mul(&e.regressor))
    }

    fn refresh(&mut self) -> Result<()> {
        self.gram = self.recompute_gram();
        self.rhs = self.entries.iter().fold(Vector::zeros(self.gram.ncols()), |acc, e| {
            acc + e.regressor.tr_mul(&(&e.xdot_hat - &e.offset))
        });
        self.sigma1 = min_eigenvalue_sym(&self.gram)?;
        if self.sigma1 > self.eps_rank {
            self.latched = true;
        }
        Ok(())
    }
}

/// Sliding window of five uniformly spaced samples for a central-difference
/// state derivative. Each sample also carries the input applied at that time.
#[derive(Debug, Clone)]
pub struct DerivativeWindow {
    spacing: f64,
    samples: VecDeque<(f64, Vector, Vector)>,
}

impl DerivativeWindow {
    pub const WIDTH: usize = 5;

    pub fn new(spacing: f64) -> Self {
        DerivativeWindow {
            spacing,
            samples: VecDeque::with_capacity(Self::WIDTH),
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn push(&mut self, t: f64, x: Vector, u: Vector) {
        if self.samples.len() == Self::WIDTH {
            self.samples.pop_front();
        }
        self.samples.push_back((t, x, u));
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == Self::WIDTH
    }

    /// Middle sample `(t, x, u)` of a full window.
    pub fn middle(&self) -> Option<&(f64, Vector, Vector)> {
        self.is_full().then(|| &self.samples[2])
    }

    /// Five-point central difference at the middle sample,
    /// `(x₋₂ - 8x₋₁ + 8x₊₁ - x₊₂) / 12h`. `None` until the window is full.
    pub fn estimate_xdot(&self) -> Option<Vector> {
        if !self.is_full() {
            return None;
        }
        let s = |k: usize| &self.samples[k].1;
        Some((s(0) - s(1) * 8.0 + s(3) * 8.0 - s(4)) / (12.0 * self.spacing))
    }
}
