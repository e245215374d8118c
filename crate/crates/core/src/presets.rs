//! Ready-made scenarios: the scalar LQR oracle and the robot and visual
//! servoing studies with their reference gains.

use crate::algebra::{Matrix, Vector};
use crate::basis::QuadBasis;
use crate::error::Result;
use crate::learner::{GainConfig, LearnerState};
use crate::plants::{ibvs_default, make_scalar_plant, wmr_default, PlantModel};
use crate::simulator::{run_closed_loop, RunError, RunOutput, SimConfig};

/// A complete, runnable problem definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: PlantModel,
    pub gains: GainConfig,
    pub sim: SimConfig,
    pub init: LearnerState,
}

impl Scenario {
    pub fn run(&self) -> std::result::Result<RunOutput, RunError> {
        run_closed_loop(&self.plant, &self.gains, &self.sim, &self.init)
    }

    pub fn basis(&self) -> QuadBasis {
        QuadBasis::new(self.plant.dims().n)
    }
}

/// `ẋ = 2u`, `q = r = 1`, `θ̂` held at the true gain. The Riccati solution
/// with zero drift is `p = √(qr)/|b| = 0.5`, so the critic should settle at 0.5.
pub fn scalar_oracle() -> Scenario {
    let plant = make_scalar_plant(2.0)
        .and_then(|p| p.with_initial_state(Vector::from_element(1, 2.0)))
        .expect("valid scalar plant");
    let mut gains = GainConfig::new(Matrix::identity(1, 1), Matrix::identity(1, 1), 1).expect("valid weights");
    gains.gamma_c = 10.0;
    gains.c1 = 1.0;
    gains.gamma_a = 0.01;
    gains.gamma_a2 = 10.9;
    gains.adapt_theta = false;
    let init = LearnerState::new(
        Vector::from_element(1, 1.0),
        Vector::from_element(1, 1.0),
        Vector::from_element(1, 2.0),
        gains.c2,
    )
    .expect("consistent dimensions");
    Scenario {
        plant,
        gains,
        sim: SimConfig {
            t_final: 30.0,
            ..SimConfig::default()
        },
        init,
    }
}

/// Wheeled robot regulated from `[2, 2, π/4]` to `[0, 0, π/2]`.
pub fn wmr_paper() -> Scenario {
    let plant = wmr_default();
    let mut gains = GainConfig::new(Matrix::identity(3, 3) * 2.0, Matrix::identity(2, 2), 2).expect("valid weights");
    gains.gamma_c = 10.0;
    gains.c2 = 100.0;
    gains.c1 = 10.0;
    gains.gamma_a = 0.01;
    gains.gamma_a2 = 10.9;
    gains.gamma_theta = 0.01;
    gains.k_cl = 50.0;
    let init = LearnerState::new(
        Vector::from_element(6, 5.0),
        Vector::from_element(6, 10.0),
        Vector::from_vec(vec![1.0, 0.5]),
        gains.c2,
    )
    .expect("consistent dimensions");
    Scenario {
        plant,
        gains,
        sim: SimConfig {
            t_final: 60.0,
            ..SimConfig::default()
        },
        init,
    }
}

/// `60 · blkdiag(100 I₃, 10 I₃)`: translational inputs weighted ten times
/// more than rotational ones.
pub fn ibvs_input_weight() -> Matrix {
    let mut r = Matrix::zeros(6, 6);
    for i in 0..3 {
        r[(i, i)] = 6000.0;
        r[(i + 3, i + 3)] = 600.0;
    }
    r
}

/// Four-point visual servoing with default intrinsics and 2 m initial depths.
pub fn ibvs_paper() -> Scenario {
    let plant = ibvs_default();
    let mut gains = GainConfig::new(Matrix::identity(8, 8) * 800.0, ibvs_input_weight(), 1).expect("valid weights");
    gains.gamma_c = 2.0;
    gains.c2 = 100.0;
    gains.c1 = 100.0;
    gains.gamma_a = 0.01;
    gains.gamma_a2 = 10.5;
    gains.gamma_theta = 0.1;
    gains.k_cl = 100.0;
    gains.theta_lo = Vector::from_element(1, 0.01);
    gains.theta_hi = Vector::from_element(1, 1.0);
    gains.wc_radius = 1000.0;
    gains.wa_radius = 1000.0;
    let init = LearnerState::new(
        Vector::from_element(36, 3.0),
        Vector::from_element(36, 3.5),
        Vector::from_element(1, 0.8),
        gains.c2,
    )
    .expect("consistent dimensions");
    Scenario {
        plant,
        gains,
        sim: SimConfig {
            t_final: 100.0,
            log_every: 100,
            ..SimConfig::default()
        },
        init,
    }
}

pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "scalar" => Some(scalar_oracle()),
        "wmr" => Some(wmr_paper()),
        "ibvs" => Some(ibvs_paper()),
        _ => None,
    }
}

/// Validates every part of a scenario without running it.
pub fn validate(s: &Scenario) -> Result<()> {
    s.gains.validate(s.plant.dims())?;
    s.sim.validate()
}
