//! Self-checks runnable from the command line.

use aac_core::algebra::{gauss_jordan_inverse, kron, max_eigenvalue_sym, min_eigenvalue_sym, vec, vec_inv};
use aac_core::learner::{critic_rate, proj_ball, proj_interval, GainConfig};
use aac_core::plants::{make_scalar_plant, wmr_default};
use aac_core::presets::{scalar_oracle, wmr_paper};
use aac_core::simulator::{identify_frozen_critic, rk4_step};
use aac_core::{Matrix, QuadBasis, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SUITES: &[&str] = &["algebra", "basis", "gamma", "projection", "cl-envelope", "oracle"];

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

/// Runs one named suite. `None` if the name is unknown.
pub fn run_suite(name: &str) -> Option<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    Some(match name {
        "algebra" => algebra(&mut rng),
        "basis" => basis(&mut rng),
        "gamma" => gamma(&mut rng),
        "projection" => projection(&mut rng),
        "cl-envelope" => cl_envelope(),
        "oracle" => oracle(),
        _ => return None,
    })
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
}

fn algebra(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut kron_err: f64 = 0.0;
    let mut round_trip = true;
    let mut rayleigh = true;
    let mut inverse_err: f64 = 0.0;
    for _ in 0..200 {
        let (n, m, q) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..6));
        let a = random_matrix(rng, n, m);
        let b = random_matrix(rng, m, q);
        let lhs = vec(&(&a * &b));
        let rhs = kron(&b.transpose(), &Matrix::identity(n, n)) * vec(&a);
        kron_err = kron_err.max((lhs - rhs).amax());
        round_trip &= vec_inv(&vec(&a), n, m).ok().as_ref() == Some(&a);

        let s = random_matrix(rng, n, n);
        let s = &s + s.transpose();
        let v = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if v.norm() > 1e-6 {
            let rq = v.dot(&(&s * &v)) / v.norm_squared();
            let lo = min_eigenvalue_sym(&s).unwrap_or(f64::NAN);
            let hi = max_eigenvalue_sym(&s).unwrap_or(f64::NAN);
            rayleigh &= lo <= rq + 1e-10 && rq <= hi + 1e-10;
        }
        let dd = &s + Matrix::identity(n, n) * 20.0;
        if let Ok(inv) = gauss_jordan_inverse(&dd) {
            inverse_err = inverse_err.max((&dd * inv - Matrix::identity(n, n)).amax());
        } else {
            inverse_err = f64::INFINITY;
        }
    }
    vec![
        check(
            "kron-vec identity",
            kron_err <= 1e-12,
            format!("max error {kron_err:.1e}"),
        ),
        check("vec round trip", round_trip, "all shapes up to 5x5".into()),
        check("Rayleigh quotient bounds", rayleigh, "200 symmetric samples".into()),
        check(
            "Gauss-Jordan inverse",
            inverse_err < 1e-12,
            format!("max residual {inverse_err:.1e}"),
        ),
    ]
}

fn basis(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let (mut euler, mut fd): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = rng.random_range(1..9);
        let b = QuadBasis::new(n);
        let x = Vector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let (Ok(phi), Ok(d)) = (b.eval(&x), b.grad(&x)) else {
            return vec![check("basis evaluation", false, "dimension error".into())];
        };
        euler = euler.max((&d * &x - &phi * 2.0).amax());
        let h = 1e-5;
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            if let (Ok(p), Ok(m)) = (b.eval(&xp), b.eval(&xm)) {
                fd = fd.max(((p - m) / (2.0 * h) - d.column(j)).amax());
            }
        }
    }
    let order = QuadBasis::new(3).labels();
    vec![
        check("Euler identity", euler <= 1e-12, format!("max error {euler:.1e}")),
        check("finite-difference Jacobian", fd <= 1e-6, format!("max error {fd:.1e}")),
        check(
            "three-state ordering",
            order == ["x1^2", "x2^2", "x3^2", "x1*x2", "x2*x3", "x1*x3"],
            order.join(" "),
        ),
        check("sizes", QuadBasis::new(8).len() == 36, "n = 8 gives 36 terms".into()),
    ]
}

fn gamma(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let gains = wmr_paper().gains;
    let mut asym: f64 = 0.0;
    let mut top: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let l = random_matrix(rng, 6, 6);
        let g = &l * l.transpose() + Matrix::identity(6, 6);
        let w = Vector::from_fn(6, |_, _| rng.random_range(-3.0..3.0));
        let (_, rate) = critic_rate(&Vector::zeros(6), &g, &w, rng.random_range(-5.0..5.0), &gains);
        asym = asym.max((&rate - rate.transpose()).amax());
        top = top.max(max_eigenvalue_sym(&rate).unwrap_or(f64::NAN) / rate.amax().max(1.0));
    }
    let mut run_checks = Vec::new();
    for mut s in [scalar_oracle(), wmr_paper()] {
        s.sim.t_final = 10.0;
        let name = s.plant.name();
        match s.run() {
            Ok(out) => {
                let pd = out.log.rows.iter().all(|r| r.gamma_min_eig > 0.0);
                let bounded = out.log.rows.iter().all(|r| r.gamma_norm <= s.gains.c2 * (1.0 + 1e-12));
                let max = out.log.rows.iter().map(|r| r.gamma_norm).fold(0.0, f64::max);
                run_checks.push(check(
                    "Gamma positive definite and bounded",
                    pd && bounded,
                    format!("{name}: lambda_max <= {max:.3} (c2 = {})", s.gains.c2),
                ));
            }
            Err(e) => run_checks.push(check(
                "Gamma positive definite and bounded",
                false,
                format!("{name}: {e}"),
            )),
        }
    }
    let mut out = vec![
        check(
            "Gamma rate symmetric",
            asym <= 1e-10,
            format!("max asymmetry {asym:.1e}"),
        ),
        check(
            "Gamma rate negative semidefinite",
            top <= 1e-9,
            format!("largest scaled eigenvalue {top:.1e}"),
        ),
    ];
    out.extend(run_checks);
    out
}

fn projection(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let dt = 1e-4;
    let (lo, hi) = (Vector::from_element(2, 0.01), Vector::from_element(2, 10.0));
    let mut worst_ball: f64 = 0.0;
    let mut worst_interval: f64 = f64::NEG_INFINITY;
    for _ in 0..3 {
        let dir = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)).normalize();
        let spin = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let push = rng.random_range(1.0..10.0);
        let mut v = dir * 50.0;
        let mut th = Vector::from_vec(vec![5.0, 5.0]);
        for k in 0..30_000 {
            let t = k as f64 * dt;
            let ball = |_t: f64, v: &Vector| Ok(proj_ball(v, &(v * 5.0 + &spin * 20.0), 100.0));
            v = match rk4_step(ball, t, &v, dt) {
                Ok(v) => v,
                Err(e) => return vec![check("ball containment", false, e.to_string())],
            };
            worst_ball = worst_ball.max(v.norm());
            let interval = |_t: f64, th: &Vector| Ok(proj_interval(th, &Vector::from_vec(vec![push, -push]), &lo, &hi));
            th = match rk4_step(interval, t, &th, dt) {
                Ok(th) => th,
                Err(e) => return vec![check("interval containment", false, e.to_string())],
            };
            worst_interval = worst_interval.max(th[0] - hi[0]).max(lo[1] - th[1]);
        }
    }
    vec![
        check(
            "ball containment",
            worst_ball <= 100.0 * (1.0 + 1e-8),
            format!("max norm {worst_ball:.9} (radius 100)"),
        ),
        check(
            "interval containment",
            worst_interval <= 1e-9,
            format!("largest excursion {worst_interval:.1e}"),
        ),
    ]
}

fn cl_envelope() -> Vec<Check> {
    let mut out = Vec::new();
    let scalar = make_scalar_plant(2.0).and_then(|p| {
        GainConfig::new(Matrix::identity(1, 1), Matrix::identity(1, 1), 1).map(|g| (p, g, Vector::from_element(1, 1.0)))
    });
    let cases = [
        ("scalar", scalar.ok()),
        (
            "wmr",
            Some((wmr_default(), wmr_paper().gains, Vector::from_vec(vec![1.0, 0.5]))),
        ),
    ];
    for (name, case) in cases {
        let Some((plant, gains, theta0)) = case else {
            out.push(check("exponential envelope", false, format!("{name}: setup failed")));
            continue;
        };
        let m = plant.dims().m;
        let excite = move |t: f64| Vector::from_element(m, 1.0 + 0.5 * (2.0 * t).sin());
        match identify_frozen_critic(&plant, &gains, excite, 2.0, 0.1, &theta0, 1.0, 1e-3) {
            Ok(id) => {
                let errs = id.error_norms();
                let k = ((3.0 / id.decay_rate) / 1e-3).round() as usize;
                let predicted = (-id.decay_rate * id.times[k]).exp() * errs[0];
                let rel = (errs[k] - predicted).abs() / predicted;
                out.push(check(
                    "exponential envelope",
                    rel < 0.05,
                    format!("{name}: rate {:.3}/s, relative deviation {rel:.1e}", id.decay_rate),
                ));
            }
            Err(e) => out.push(check("exponential envelope", false, format!("{name}: {e}"))),
        }
    }
    out
}

fn oracle() -> Vec<Check> {
    let s = scalar_oracle();
    match s.run() {
        Ok(out) => {
            let wc = out.final_state.wc[0];
            let wa = out.final_state.wa[0];
            vec![
                check(
                    "critic matches Riccati solution",
                    (wc - 0.5).abs() < 0.05,
                    format!("Wc = {wc:.4}, p = 0.5"),
                ),
                check(
                    "actor tracks critic",
                    (wa - wc).abs() < 0.02,
                    format!("|Wa - Wc| = {:.1e}", (wa - wc).abs()),
                ),
            ]
        }
        Err(e) => vec![check("scalar oracle run", false, e.to_string())],
    }
}
