//! Fixed-step closed-loop simulation.
//!
//! The augmented state `(x, truth, Ŵ_c, Ŵ_a, θ̂, Γ)` is integrated with
//! classical RK4. The history stack, derivative window and parameter-law
//! mode are discrete-event state: they are only touched between steps and
//! are read-only inside the four RK4 stages.

use std::io::{BufRead, Write};

use crate::algebra::{all_finite, is_positive_definite, max_eigenvalue_sym, min_eigenvalue_sym, Matrix, Vector};
use crate::basis::QuadBasis;
use crate::error::{Error, Result};
use crate::learner::{
    actor_rate, bellman_error_with_w, bellman_w, control, critic_rate, param_rate, probing, value_estimate,
    DerivativeWindow, Features, GainConfig, HistoryStack, LearnerState, ParamLaw,
};
use crate::plants::{PlantModel, TruthState};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    /// steps between history-stack offers
    pub sample_every: usize,
    /// steps between log rows
    pub log_every: usize,
    /// Reserved for noise models; nominal runs are deterministic and ignore it.
    pub seed: u64,
    /// Compute the Bellman error from the probed input instead of `û`.
    pub probed_bellman: bool,
    /// Ceiling on the Frobenius norm of `g(x, θ)` along the run; exceeding it is counted, not fatal.
    pub g_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_final: 60.0,
            sample_every: 10,
            log_every: 10,
            seed: 0,
            probed_bellman: false,
            g_bound: 1e3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.sample_every == 0 || self.log_every == 0 {
            return Err(Error::InvalidParameter(
                "sample_every and log_every must be at least 1".into(),
            ));
        }
        if !(self.g_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "g_bound must be positive, got {}",
                self.g_bound
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: Vector,
    pub xbar: Vector,
    /// policy output `û`, before probing
    pub u: Vector,
    /// probing value added to every channel
    pub probe: f64,
    pub delta: f64,
    pub value: f64,
    pub wc: Vector,
    pub wa: Vector,
    pub theta: Vector,
    pub depths: Vec<f64>,
    pub sigma1: f64,
    pub mode: ParamLaw,
    /// `λ_max(Γ)`, which equals its spectral norm
    pub gamma_norm: f64,
    pub gamma_min_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    pub steps: usize,
    pub rate_evals: usize,
    pub stack_offers: usize,
    pub stack_accepts: usize,
    /// step index at which the concurrent-learning law latched on
    pub mode_switch_step: Option<usize>,
    pub g_bound_breaches: usize,
    pub max_g_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    pub stats: RunStats,
    pub final_state: LearnerState,
    pub stack: HistoryStack,
}

#[derive(Debug, Clone)]
pub struct SimFault {
    pub step: usize,
    pub t: f64,
    pub reason: String,
    /// rows logged up to the fault, plus a final diagnostic row when one could be formed
    pub log: TrajectoryLog,
    pub stats: RunStats,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] Error),
    #[error("simulation fault at step {} (t = {}): {}", .0.step, .0.t, .0.reason)]
    Fault(Box<SimFault>),
}

/// One classical Runge-Kutta step of `ż = f(t, z)`.
pub fn rk4_step<F>(mut f: F, t: f64, z: &Vector, dt: f64) -> Result<Vector>
where
    F: FnMut(f64, &Vector) -> Result<Vector>,
{
    let half = 0.5 * dt;
    let stage = |k: Vector| -> Result<Vector> {
        if all_finite(k.as_slice()) {
            Ok(k)
        } else {
            Err(Error::NonFinite("rk4 stage"))
        }
    };
    let k1 = stage(f(t, z)?)?;
    let k2 = stage(f(t + half, &(z + &k1 * half))?)?;
    let k3 = stage(f(t + half, &(z + &k2 * half))?)?;
    let k4 = stage(f(t + dt, &(z + &k3 * dt))?)?;
    Ok(z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Offsets of each block inside the flattened augmented state.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    k: usize,
    nc: usize,
    p: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.n + self.k + 2 * self.nc + self.p + self.nc * self.nc
    }

    fn pack(&self, x: &Vector, truth: &TruthState, s: &LearnerState) -> Vector {
        let mut z = Vector::zeros(self.len());
        let mut at = 0;
        for block in [
            x.as_slice(),
            &truth.depths,
            s.wc.as_slice(),
            s.wa.as_slice(),
            s.theta.as_slice(),
            s.gamma.as_slice(),
        ] {
            z.rows_mut(at, block.len()).copy_from_slice(block);
            at += block.len();
        }
        z
    }

    fn unpack(&self, z: &Vector) -> (Vector, TruthState, LearnerState) {
        let mut at = 0;
        let mut take = |len: usize| {
            let out = z.rows(at, len).clone_owned();
            at += len;
            out
        };
        let x = take(self.n);
        let depths = take(self.k).as_slice().to_vec();
        let wc = take(self.nc);
        let wa = take(self.nc);
        let theta = take(self.p);
        let gamma = Matrix::from_column_slice(self.nc, self.nc, take(self.nc * self.nc).as_slice());
        (x, TruthState { depths }, LearnerState { wc, wa, theta, gamma })
    }
}

/// Everything the laws produce at one instant.
struct Evaluation {
    features: Features,
    u_hat: Vector,
    probe: f64,
    u_applied: Vector,
    delta: f64,
    rate: Vector,
}

struct ClosedLoop<'a> {
    plant: &'a PlantModel,
    basis: QuadBasis,
    gains: &'a GainConfig,
    sim: &'a SimConfig,
    layout: Layout,
}

impl ClosedLoop<'_> {
    fn evaluate(&self, t: f64, z: &Vector, stack: &HistoryStack) -> Result<Evaluation> {
        let (x, truth, s) = self.layout.unpack(z);
        let features = Features::compute(self.plant, &self.basis, &x, &s.theta)?;
        let u_hat = control(&features, &s.wa, self.gains);
        let probe_vec = probing(t, self.gains.probing_amplitude, u_hat.len());
        let probe = probe_vec.get(0).copied().unwrap_or(0.0);
        let u_applied = &u_hat + probe_vec;
        let u_learn = if self.sim.probed_bellman { &u_applied } else { &u_hat };

        let w = bellman_w(&features, u_learn);
        let delta = bellman_error_with_w(&w, &features.xbar, u_learn, &s.wc, self.gains);
        let (wc_rate, gamma_rate) = critic_rate(&s.wc, &s.gamma, &w, delta, self.gains);
        let wa_rate = actor_rate(&s.wa, &s.wc, delta, &w, &features, self.gains);
        let theta_rate = param_rate(self.plant, &x, &features, u_learn, &s.wc, &s.theta, stack, self.gains)?;
        let (xdot, zdot) = self.plant.truth_rate(&x, &truth, &u_applied)?;

        let rate = self.layout.pack(
            &xdot,
            &TruthState { depths: zdot },
            &LearnerState {
                wc: wc_rate,
                wa: wa_rate,
                theta: theta_rate,
                gamma: gamma_rate,
            },
        );
        Ok(Evaluation {
            features,
            u_hat,
            probe,
            u_applied,
            delta,
            rate,
        })
    }

    fn log_row(&self, t: f64, z: &Vector, eval: &Evaluation, stack: &HistoryStack) -> Result<LogRow> {
        let (x, truth, s) = self.layout.unpack(z);
        Ok(LogRow {
            t,
            value: value_estimate(&self.basis, &eval.features.xbar, &s.wc)?,
            xbar: eval.features.xbar.clone(),
            x,
            u: eval.u_hat.clone(),
            probe: eval.probe,
            delta: eval.delta,
            wc: s.wc,
            wa: s.wa,
            theta: s.theta,
            depths: truth.depths,
            sigma1: stack.sigma1(),
            mode: stack.law(),
            gamma_norm: max_eigenvalue_sym(&s.gamma)?,
            gamma_min_eig: min_eigenvalue_sym(&s.gamma)?,
        })
    }

    /// Post-step cleanup: symmetrize Γ, keep estimates inside their sets and
    /// check the state is still admissible.
    fn settle(&self, z: &mut Vector) -> std::result::Result<(), String> {
        if !all_finite(z.as_slice()) {
            return Err("non-finite augmented state".into());
        }
        let (x, truth, mut s) = self.layout.unpack(z);
        s.gamma = (&s.gamma + s.gamma.transpose()) * 0.5;
        if !is_positive_definite(&s.gamma) {
            return Err("gain matrix lost positive definiteness".into());
        }
        if let Some(z) = truth.depths.iter().find(|z| !(**z > 0.0)) {
            return Err(format!("feature depth {z} is not positive"));
        }
        clamp_norm(&mut s.wc, self.gains.wc_radius);
        clamp_norm(&mut s.wa, self.gains.wa_radius);
        for i in 0..s.theta.len() {
            s.theta[i] = s.theta[i].clamp(self.gains.theta_lo[i], self.gains.theta_hi[i]);
        }
        *z = self.layout.pack(&x, &truth, &s);
        Ok(())
    }
}

fn clamp_norm(v: &mut Vector, radius: f64) {
    let norm = v.norm();
    if norm > radius {
        *v *= radius / norm;
    }
}

/// Runs the adaptive actor-critic loop from `init` until `sim.t_final`.
pub fn run_closed_loop(
    plant: &PlantModel,
    gains: &GainConfig,
    sim: &SimConfig,
    init: &LearnerState,
) -> std::result::Result<RunOutput, RunError> {
    let dims = plant.dims();
    gains.validate(dims)?;
    sim.validate()?;
    let basis = QuadBasis::new(dims.n);
    let nc = basis.len();
    if init.wc.len() != nc || init.wa.len() != nc {
        return Err(Error::dim("initial weights", nc, init.wc.len().max(init.wa.len())).into());
    }
    if init.theta.len() != dims.p {
        return Err(Error::dim("initial theta", dims.p, init.theta.len()).into());
    }
    if init.gamma.shape() != (nc, nc) || !is_positive_definite(&init.gamma) {
        return Err(Error::InvalidParameter("initial gain matrix must be symmetric positive definite".into()).into());
    }
    let truth0 = plant.initial_truth();
    let layout = Layout {
        n: dims.n,
        k: truth0.len(),
        nc,
        p: dims.p,
    };
    let cl = ClosedLoop {
        plant,
        basis,
        gains,
        sim,
        layout,
    };

    let mut z = layout.pack(plant.initial_state(), &truth0, init);
    let mut stack = HistoryStack::new(gains.stack_capacity, dims.p, gains.eps_rank);
    let mut window = DerivativeWindow::new(sim.sample_every as f64 * sim.dt);
    let mut log = TrajectoryLog::default();
    let mut stats = RunStats::default();
    let steps = sim.steps();

    let fault = |step: usize, reason: String, log: TrajectoryLog, stats: RunStats| {
        RunError::Fault(Box::new(SimFault {
            step,
            t: step as f64 * sim.dt,
            reason,
            log,
            stats,
        }))
    };

    for k in 0..=steps {
        let t = k as f64 * sim.dt;
        let eval = match cl.evaluate(t, &z, &stack) {
            Ok(e) => e,
            Err(e) => return Err(fault(k, e.to_string(), log, stats)),
        };

        if k % sim.sample_every == 0 {
            let (x, _, _) = layout.unpack(&z);
            window.push(t, x, eval.u_applied.clone());
            if let (Some((_, xm, um)), Some(xdot)) = (window.middle(), window.estimate_xdot()) {
                let was = stack.law();
                stats.stack_offers += 1;
                match stack.offer(plant, xm, um, &xdot) {
                    Ok(true) => stats.stack_accepts += 1,
                    Ok(false) => {}
                    Err(e) => return Err(fault(k, e.to_string(), log, stats)),
                }
                if was != stack.law() {
                    stats.mode_switch_step = Some(k);
                }
            }
        }

        // Frobenius norm of the true input gain when it is known exactly
        let g_norm = match plant.theta_true() {
            Some(theta) => {
                let (x, _, _) = layout.unpack(&z);
                plant.g_matrix(&x, &theta).map(|g| g.norm()).unwrap_or(f64::INFINITY)
            }
            None => eval.features.g_hat.norm(),
        };
        stats.max_g_norm = stats.max_g_norm.max(g_norm);
        if g_norm > sim.g_bound {
            stats.g_bound_breaches += 1;
        }

        if k % sim.log_every == 0 || k == steps {
            match cl.log_row(t, &z, &eval, &stack) {
                Ok(row) => log.rows.push(row),
                Err(e) => return Err(fault(k, e.to_string(), log, stats)),
            }
        }
        if k == steps {
            break;
        }

        let step = rk4_step(
            |ts, zs| {
                stats.rate_evals += 1;
                cl.evaluate(ts, zs, &stack).map(|e| e.rate)
            },
            t,
            &z,
            sim.dt,
        );
        let settled = step
            .map_err(|e| e.to_string())
            .and_then(|mut next| cl.settle(&mut next).map(|_| next));
        z = match settled {
            Ok(next) => next,
            Err(reason) => {
                // diagnostic row: last admissible state before the failed step
                if log.rows.last().is_none_or(|r| r.t != t) {
                    if let Ok(row) = cl.log_row(t, &z, &eval, &stack) {
                        log.rows.push(row);
                    }
                }
                return Err(fault(k, reason, log, stats));
            }
        };
        stats.steps += 1;
    }

    let (_, _, final_state) = layout.unpack(&z);
    Ok(RunOutput {
        log,
        stats,
        final_state,
        stack,
    })
}

/// Scalar metrics of a finished run. A pure function of the log (and the
/// true parameter when it is known).
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub final_time: f64,
    pub initial_error_norm: f64,
    pub final_error_norm: f64,
    pub final_theta: Vector,
    pub final_theta_error: Option<f64>,
    pub final_wc: Vector,
    pub final_wa: Vector,
    pub actor_critic_gap: f64,
    pub max_control_norm: f64,
    /// first logged time after which `‖x̄‖` stays within 5% of its initial value
    pub time_to_5pct: Option<f64>,
    pub min_gamma_eig: f64,
    pub sigma1_first: f64,
    pub sigma1_last: f64,
}

pub fn summarize(log: &TrajectoryLog, theta_true: Option<&Vector>) -> Result<Summary> {
    let (first, last) = match (log.rows.first(), log.rows.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InvalidParameter("cannot summarize an empty log".into())),
    };
    let e0 = first.xbar.norm();
    let threshold = 0.05 * e0;
    let mut time_to_5pct = None;
    for row in log.rows.iter().rev() {
        if row.xbar.norm() <= threshold {
            time_to_5pct = Some(row.t);
        } else {
            break;
        }
    }
    Ok(Summary {
        final_time: last.t,
        initial_error_norm: e0,
        final_error_norm: last.xbar.norm(),
        final_theta: last.theta.clone(),
        final_theta_error: theta_true.map(|th| (th - &last.theta).norm()),
        final_wc: last.wc.clone(),
        final_wa: last.wa.clone(),
        actor_critic_gap: (&last.wa - &last.wc).norm(),
        max_control_norm: log.rows.iter().map(|r| r.u.norm()).fold(0.0, f64::max),
        time_to_5pct,
        min_gamma_eig: log.rows.iter().map(|r| r.gamma_min_eig).fold(f64::INFINITY, f64::min),
        sigma1_first: first.sigma1,
        sigma1_last: last.sigma1,
    })
}

impl TrajectoryLog {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column names; every field of [`LogRow`] appears exactly once (vectors expanded per component).
    pub fn header(&self) -> Vec<String> {
        let Some(row) = self.rows.first() else {
            return Vec::new();
        };
        header_for(
            row.x.len(),
            row.u.len(),
            row.wc.len(),
            row.theta.len(),
            row.depths.len(),
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.header().join(","))?;
        for r in &self.rows {
            let mut cells: Vec<String> = Vec::new();
            cells.push(r.t.to_string());
            for v in [&r.x, &r.xbar, &r.u] {
                cells.extend(v.iter().map(f64::to_string));
            }
            cells.push(r.probe.to_string());
            cells.push(r.delta.to_string());
            cells.push(r.value.to_string());
            for v in [&r.wc, &r.wa, &r.theta] {
                cells.extend(v.iter().map(f64::to_string));
            }
            cells.extend(r.depths.iter().map(f64::to_string));
            cells.push(r.sigma1.to_string());
            cells.push(r.mode.to_string());
            cells.push(r.gamma_norm.to_string());
            cells.push(r.gamma_min_eig.to_string());
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Parses the output of [`TrajectoryLog::write_csv`]. Values round-trip exactly.
    pub fn read_csv<R: BufRead>(input: R) -> Result<TrajectoryLog> {
        let bad = |msg: String| Error::InvalidParameter(format!("trajectory csv: {msg}"));
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(Ok(h)) => h,
            _ => return Err(bad("missing header".into())),
        };
        let cols: Vec<&str> = header.split(',').collect();
        let count = |prefix: &str| {
            cols.iter()
                .filter(|c| c.strip_prefix(prefix).is_some_and(|rest| rest.parse::<usize>().is_ok()))
                .count()
        };
        let (n, m, nc, p, k) = (count("x"), count("u"), count("wc"), count("theta"), count("depth"));
        if header_for(n, m, nc, p, k) != cols {
            return Err(bad("unrecognized header".into()));
        }
        let mut log = TrajectoryLog::default();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != cols.len() {
                return Err(bad(format!(
                    "row {} has {} cells, expected {}",
                    i + 1,
                    cells.len(),
                    cols.len()
                )));
            }
            let mut at = 0;
            let mut num = || -> Result<f64> {
                let c = cells[at];
                at += 1;
                c.parse::<f64>()
                    .map_err(|_| bad(format!("row {}: cannot parse {c:?}", i + 1)))
            };
            let vector = |len: usize, num: &mut dyn FnMut() -> Result<f64>| -> Result<Vector> {
                let mut v = Vector::zeros(len);
                for j in 0..len {
                    v[j] = num()?;
                }
                Ok(v)
            };
            let t = num()?;
            let x = vector(n, &mut num)?;
            let xbar = vector(n, &mut num)?;
            let u = vector(m, &mut num)?;
            let probe = num()?;
            let delta = num()?;
            let value = num()?;
            let wc = vector(nc, &mut num)?;
            let wa = vector(nc, &mut num)?;
            let theta = vector(p, &mut num)?;
            let depths = vector(k, &mut num)?.as_slice().to_vec();
            let sigma1 = num()?;
            let mode = match cells[at] {
                "CL" => ParamLaw::ConcurrentLearning,
                "sigma-mod" => ParamLaw::SigmaModification,
                other => return Err(bad(format!("row {}: unknown mode {other:?}", i + 1))),
            };
            at += 1;
            let gamma_norm = cells[at]
                .parse()
                .map_err(|_| bad(format!("row {}: gamma_norm", i + 1)))?;
            let gamma_min_eig = cells[at + 1]
                .parse()
                .map_err(|_| bad(format!("row {}: gamma_min_eig", i + 1)))?;
            log.rows.push(LogRow {
                t,
                x,
                xbar,
                u,
                probe,
                delta,
                value,
                wc,
                wa,
                theta,
                depths,
                sigma1,
                mode,
                gamma_norm,
                gamma_min_eig,
            });
        }
        Ok(log)
    }
}

fn header_for(n: usize, m: usize, nc: usize, p: usize, k: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let indexed = |prefix: &str, len: usize, h: &mut Vec<String>| h.extend((1..=len).map(|i| format!("{prefix}{i}")));
    indexed("x", n, &mut h);
    indexed("xbar", n, &mut h);
    indexed("u", m, &mut h);
    h.extend(["probe", "delta", "value"].map(String::from));
    indexed("wc", nc, &mut h);
    indexed("wa", nc, &mut h);
    indexed("theta", p, &mut h);
    indexed("depth", k, &mut h);
    h.extend(["sigma1", "mode", "gamma_norm", "gamma_min_eig"].map(String::from));
    h
}

/// Result of a frozen-critic parameter identification run.
#[derive(Debug, Clone)]
pub struct Identification {
    pub stack: HistoryStack,
    pub theta_true: Vector,
    pub times: Vec<f64>,
    pub theta: Vec<Vector>,
    /// `k_cl γ_θ σ₁`
    pub decay_rate: f64,
}

impl Identification {
    pub fn error_norms(&self) -> Vec<f64> {
        self.theta.iter().map(|th| (&self.theta_true - th).norm()).collect()
    }
}

/// Concurrent-learning identification with the critic frozen at zero.
///
/// The plant is first driven open loop by `excitation` for `excite_for`
/// seconds; every `sample_period` the state, input and exact state rate are
/// offered to the stack. The stack is then frozen and `θ̂` is integrated
/// from `theta0` for `horizon` seconds with RK4 step `dt`.
#[allow(clippy::too_many_arguments)]
pub fn identify_frozen_critic<E>(
    plant: &PlantModel,
    gains: &GainConfig,
    excitation: E,
    excite_for: f64,
    sample_period: f64,
    theta0: &Vector,
    horizon: f64,
    dt: f64,
) -> Result<Identification>
where
    E: Fn(f64) -> Vector,
{
    let theta_true = plant
        .theta_true()
        .ok_or_else(|| Error::InvalidParameter(format!("{} plant has no exact parameter", plant.name())))?;
    let dims = plant.dims();
    gains.validate(dims)?;
    let mut stack = HistoryStack::new(gains.stack_capacity, dims.p, gains.eps_rank);

    let n = dims.n;
    let mut z = Vector::zeros(n + plant.initial_truth().len());
    z.rows_mut(0, n).copy_from(plant.initial_state());
    z.rows_mut(n, plant.initial_truth().len())
        .copy_from_slice(&plant.initial_truth().depths);
    let plant_rate = |t: f64, z: &Vector| -> Result<Vector> {
        let x = z.rows(0, n).clone_owned();
        let truth = TruthState {
            depths: z.rows(n, z.len() - n).as_slice().to_vec(),
        };
        let (xdot, zdot) = plant.truth_rate(&x, &truth, &excitation(t))?;
        let mut out = Vector::zeros(z.len());
        out.rows_mut(0, n).copy_from(&xdot);
        out.rows_mut(n, zdot.len()).copy_from_slice(&zdot);
        Ok(out)
    };
    let sample_steps = (sample_period / dt).round().max(1.0) as usize;
    let excite_steps = (excite_for / dt).round() as usize;
    for k in 0..=excite_steps {
        let t = k as f64 * dt;
        if k % sample_steps == 0 {
            let x = z.rows(0, n).clone_owned();
            let xdot = plant_rate(t, &z)?.rows(0, n).clone_owned();
            stack.offer(plant, &x, &excitation(t), &xdot)?;
        }
        if k < excite_steps {
            z = rk4_step(plant_rate, t, &z, dt)?;
        }
    }

    let basis = QuadBasis::new(n);
    let x = z.rows(0, n).clone_owned();
    let u = excitation(excite_for);
    let wc = Vector::zeros(basis.len());
    let theta_rate = |_t: f64, theta: &Vector| -> Result<Vector> {
        let f = Features::compute(plant, &basis, &x, theta)?;
        param_rate(plant, &x, &f, &u, &wc, theta, &stack, gains)
    };
    let steps = (horizon / dt).round() as usize;
    let mut theta = theta0.clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut path = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        times.push(k as f64 * dt);
        path.push(theta.clone());
        if k < steps {
            theta = rk4_step(theta_rate, k as f64 * dt, &theta, dt)?;
            for i in 0..theta.len() {
                theta[i] = theta[i].clamp(gains.theta_lo[i], gains.theta_hi[i]);
            }
        }
    }
    let decay_rate = gains.k_cl * gains.gamma_theta * stack.sigma1();
    Ok(Identification {
        stack,
        theta_true,
        times,
        theta: path,
        decay_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{make_scalar_plant, wmr_default};

    #[test]
    fn rk4_zero_field_is_identity() {
        let z = Vector::from_vec(vec![1.0, -2.0]);
        let next = rk4_step(|_, z| Ok(Vector::zeros(z.len())), 0.0, &z, 0.1).unwrap();
        assert_eq!(next, z);
    }

    #[test]
    fn rk4_exponential_single_step() {
        let z = Vector::from_element(1, 1.0);
        let next = rk4_step(|_, z| Ok(-z), 0.0, &z, 0.1).unwrap();
        assert!((next[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn rk4_reports_non_finite_stage() {
        let z = Vector::from_element(1, 1.0);
        let r = rk4_step(|_, _| Ok(Vector::from_element(1, f64::NAN)), 0.0, &z, 0.1);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn layout_roundtrip() {
        let layout = Layout {
            n: 2,
            k: 1,
            nc: 3,
            p: 1,
        };
        let s = LearnerState {
            wc: Vector::from_vec(vec![1.0, 2.0, 3.0]),
            wa: Vector::from_vec(vec![4.0, 5.0, 6.0]),
            theta: Vector::from_vec(vec![7.0]),
            gamma: Matrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64),
        };
        let x = Vector::from_vec(vec![-1.0, -2.0]);
        let truth = TruthState { depths: vec![0.5] };
        let z = layout.pack(&x, &truth, &s);
        assert_eq!(z.len(), layout.len());
        let (x2, t2, s2) = layout.unpack(&z);
        assert_eq!((x2, t2, s2), (x, truth, s));
    }

    #[test]
    fn summarize_empty_log_is_an_error() {
        assert!(summarize(&TrajectoryLog::default(), None).is_err());
    }

    #[test]
    fn identification_requires_exact_parameter() {
        let plant = crate::plants::ibvs_default();
        let gains = GainConfig::new(Matrix::identity(8, 8), Matrix::identity(6, 6), 1).unwrap();
        let r = identify_frozen_critic(
            &plant,
            &gains,
            |_| Vector::zeros(6),
            1.0,
            0.1,
            &Vector::from_element(1, 0.5),
            1.0,
            0.01,
        );
        assert!(r.is_err());
    }

    #[test]
    fn invalid_sim_config() {
        let plant = make_scalar_plant(2.0).unwrap();
        let gains = GainConfig::new(Matrix::identity(1, 1), Matrix::identity(1, 1), 1).unwrap();
        let init = LearnerState::new(
            Vector::from_element(1, 1.0),
            Vector::from_element(1, 1.0),
            Vector::from_element(1, 2.0),
            100.0,
        )
        .unwrap();
        let sim = SimConfig {
            dt: 0.0,
            ..SimConfig::default()
        };
        assert!(matches!(
            run_closed_loop(&plant, &gains, &sim, &init),
            Err(RunError::Config(_))
        ));
        let sim = SimConfig {
            log_every: 0,
            ..SimConfig::default()
        };
        assert!(matches!(
            run_closed_loop(&plant, &gains, &sim, &init),
            Err(RunError::Config(_))
        ));
        let wrong = LearnerState::new(Vector::zeros(6), Vector::zeros(6), Vector::zeros(2), 1.0).unwrap();
        let sim = SimConfig::default();
        assert!(matches!(
            run_closed_loop(&wmr_default(), &gains, &sim, &wrong),
            Err(RunError::Config(_))
        ));
    }
}
