use std::io::Cursor;

use aac_core::learner::{DerivativeWindow, ParamLaw};
use aac_core::presets::{ibvs_paper, scalar_oracle, wmr_paper};
use aac_core::simulator::{rk4_step, summarize, RunError, TrajectoryLog};
use aac_core::{Matrix, PlantModel, TruthState, Vector};

fn short_wmr(t_final: f64) -> aac_core::Scenario {
    let mut s = wmr_paper();
    s.sim.t_final = t_final;
    s
}

#[test]
fn runs_are_bit_identical() {
    let s = short_wmr(5.0);
    let a = s.run().unwrap();
    let b = s.run().unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.final_state, b.final_state);
}

#[test]
fn csv_round_trip_preserves_summary() {
    let s = short_wmr(5.0);
    let out = s.run().unwrap();
    let mut buf = Vec::new();
    out.log.write_csv(&mut buf).unwrap();
    let back = TrajectoryLog::read_csv(Cursor::new(buf)).unwrap();
    assert_eq!(back, out.log);
    let theta = s.plant.theta_true().unwrap();
    assert_eq!(
        summarize(&back, Some(&theta)).unwrap(),
        summarize(&out.log, Some(&theta)).unwrap()
    );
}

#[test]
fn header_lists_every_field_once() {
    let out = short_wmr(0.1).run().unwrap();
    let header = out.log.header();
    let mut unique = header.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), header.len());
    // t, x, xbar, u, probe, delta, value, wc, wa, theta, sigma1, mode, gamma_norm, gamma_min_eig
    assert_eq!(header.len(), 1 + 3 + 3 + 2 + 3 + 6 + 6 + 2 + 4);
}

#[test]
fn four_rate_evaluations_per_step() {
    let out = short_wmr(2.0).run().unwrap();
    assert_eq!(out.stats.steps, 2000);
    assert_eq!(out.stats.rate_evals, 4 * out.stats.steps);
}

#[test]
fn mode_switch_happens_on_a_sample_boundary_and_latches() {
    let s = short_wmr(10.0);
    let out = s.run().unwrap();
    let k = out.stats.mode_switch_step.expect("robot run reaches full rank");
    assert_eq!(k % s.sim.sample_every, 0);
    let first_cl = out
        .log
        .rows
        .iter()
        .position(|r| r.mode == ParamLaw::ConcurrentLearning)
        .unwrap();
    assert!(out.log.rows[first_cl..]
        .iter()
        .all(|r| r.mode == ParamLaw::ConcurrentLearning));
    assert!(out.log.rows.windows(2).all(|w| w[1].sigma1 >= w[0].sigma1));
}

#[test]
fn least_squares_gain_stays_bounded() {
    for s in [scalar_oracle(), short_wmr(20.0)] {
        let out = s.run().unwrap();
        for r in &out.log.rows {
            assert!(r.gamma_min_eig > 0.0);
            assert!(r.gamma_norm <= s.gains.c2 * (1.0 + 1e-12));
        }
    }
}

#[test]
fn halving_the_step_changes_little() {
    let coarse = short_wmr(60.0);
    let mut fine = coarse.clone();
    fine.sim.dt /= 2.0;
    fine.sim.sample_every *= 2;
    fine.sim.log_every *= 2;
    let theta = coarse.plant.theta_true().unwrap();
    let a = summarize(&coarse.run().unwrap().log, Some(&theta)).unwrap();
    let b = summarize(&fine.run().unwrap().log, Some(&theta)).unwrap();
    assert!(((a.final_error_norm - b.final_error_norm) / b.final_error_norm).abs() < 0.01);
    for i in 0..2 {
        assert!(((a.final_theta[i] - b.final_theta[i]) / b.final_theta[i]).abs() < 0.01);
    }
}

#[test]
fn five_point_derivative_of_sine() {
    let h = 0.01;
    let mut w = DerivativeWindow::new(h);
    for k in 0..5 {
        let t = 1.0 + k as f64 * h;
        w.push(t, Vector::from_element(1, t.sin()), Vector::zeros(1));
    }
    let est = w.estimate_xdot().unwrap()[0];
    assert!((est - (1.0f64 + 2.0 * h).cos()).abs() < 1e-8);
}

/// Integrates the image features together with the 3-D points they come
/// from and checks that the features remain their projections.
#[test]
fn ibvs_features_stay_projections_of_moving_points() {
    let plant = ibvs_paper().plant;
    let x0 = plant.initial_state().clone();
    let depths0 = plant.initial_truth().depths;
    let input = |t: f64| {
        Vector::from_vec(vec![
            0.1 * t.sin(),
            -0.05,
            0.2 * (0.5 * t).cos(),
            0.03 * t.cos(),
            -0.02,
            0.1 * (0.3 * t).sin(),
        ])
    };
    let mut z = Vector::zeros(8 + 4 + 12);
    z.rows_mut(0, 8).copy_from(&x0);
    for i in 0..4 {
        z[8 + i] = depths0[i];
        z[12 + 3 * i] = x0[2 * i] * depths0[i];
        z[12 + 3 * i + 1] = x0[2 * i + 1] * depths0[i];
        z[12 + 3 * i + 2] = depths0[i];
    }
    let rate = |plant: &PlantModel, t: f64, z: &Vector| {
        let u = input(t);
        let x = z.rows(0, 8).clone_owned();
        let truth = TruthState {
            depths: z.rows(8, 4).iter().copied().collect(),
        };
        let (xdot, zdot) = plant.truth_rate(&x, &truth, &u)?;
        let mut out = Vector::zeros(z.len());
        out.rows_mut(0, 8).copy_from(&xdot);
        out.rows_mut(8, 4).copy_from_slice(&zdot);
        let v = [u[0], u[1], u[2]];
        let w = [u[3], u[4], u[5]];
        for i in 0..4 {
            let p = [z[12 + 3 * i], z[12 + 3 * i + 1], z[12 + 3 * i + 2]];
            let cross = [
                w[1] * p[2] - w[2] * p[1],
                w[2] * p[0] - w[0] * p[2],
                w[0] * p[1] - w[1] * p[0],
            ];
            for c in 0..3 {
                out[12 + 3 * i + c] = v[c] + cross[c];
            }
        }
        Ok(out)
    };
    let dt = 1e-3;
    for k in 0..5000 {
        z = rk4_step(|t, z| rate(&plant, t, z), k as f64 * dt, &z, dt).unwrap();
    }
    for i in 0..4 {
        let (px, py, pz) = (z[12 + 3 * i], z[12 + 3 * i + 1], z[12 + 3 * i + 2]);
        assert!((z[8 + i] - pz).abs() < 1e-9);
        assert!((z[2 * i] - px / pz).abs() < 1e-9);
        assert!((z[2 * i + 1] - py / pz).abs() < 1e-9);
    }
}

#[test]
fn gain_bound_breaches_are_counted() {
    let mut s = short_wmr(1.0);
    s.sim.g_bound = 1.0;
    let out = s.run().unwrap();
    assert!(out.stats.max_g_norm > 1.0);
    assert_eq!(out.stats.g_bound_breaches, out.stats.steps + 1);
}

#[test]
fn indefinite_gain_matrix_aborts_with_partial_log() {
    let mut s = scalar_oracle();
    s.gains.gamma = Some(1e7);
    match s.run() {
        Err(RunError::Fault(f)) => {
            assert!(!f.log.is_empty());
            assert!(f.log.rows.last().unwrap().t <= f.t);
            assert!(!f.reason.is_empty());
        }
        other => panic!("expected a fault, got {:?}", other.map(|o| o.log.rows.len())),
    }
}

#[test]
fn bad_configuration_is_rejected_before_running() {
    let mut s = short_wmr(1.0);
    s.sim.dt = 0.0;
    assert!(matches!(s.run(), Err(RunError::Config(_))));

    let mut s = short_wmr(1.0);
    s.init.wc = Vector::zeros(5);
    s.init.wa = Vector::zeros(5);
    assert!(matches!(s.run(), Err(RunError::Config(_))));

    let mut s = short_wmr(1.0);
    s.init.gamma = -Matrix::identity(6, 6);
    assert!(matches!(s.run(), Err(RunError::Config(_))));
}

#[test]
fn probing_changes_the_applied_input_only() {
    let out = short_wmr(1.0).run().unwrap();
    assert!(out.log.rows.iter().any(|r| r.probe != 0.0));
    let mut quiet = short_wmr(1.0);
    quiet.gains.probing_amplitude = 0.0;
    let q = quiet.run().unwrap();
    assert!(q.log.rows.iter().all(|r| r.probe == 0.0));
}
