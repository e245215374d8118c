//! Drift-free plants `ẋ = g(x, θ) u` written as `vec(g(x, θ)) = Y(x) θ + Y₀(x)`.
//!
//! Three concrete plants are provided: a scalar integrator used as an LQR
//! oracle, a kinematic wheeled mobile robot, and a four-point image-based
//! visual servoing model whose ground truth carries per-feature depths.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;

use crate::algebra::{input_kron_identity, vec_inv, Matrix, Vector};
use crate::error::{Error, Result};

/// Number of tracked image features in the visual servoing plant.
pub const IBVS_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// state
    pub n: usize,
    /// input
    pub m: usize,
    /// parameters
    pub p: usize,
}

/// Pinhole camera intrinsics (pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Intrinsics {
            fx: 1000.0,
            fy: 1000.0,
            cx: 500.0,
            cy: 500.0,
        }
    }
}

impl Intrinsics {
    pub fn normalize(&self, px: [f64; 2]) -> [f64; 2] {
        [(px[0] - self.cx) / self.fx, (px[1] - self.cy) / self.fy]
    }

    pub fn to_pixels(&self, xn: [f64; 2]) -> [f64; 2] {
        [xn[0] * self.fx + self.cx, xn[1] * self.fy + self.cy]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlantKind {
    /// `ẋ = b u`, one state, one input, one parameter.
    Scalar { b: f64 },
    /// Unicycle `[X, Y, ψ]` with `v` scaled by `a` and `ω` scaled by `b`.
    Wmr { a: f64, b: f64 },
    /// Four normalized image points; the learner models all depths with one inverse depth.
    Ibvs {
        intrinsics: Intrinsics,
        depths0: [f64; IBVS_FEATURES],
    },
}

/// Ground-truth variables that are not part of the measured state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthState {
    /// Per-feature depths in meters (visual servoing only).
    pub depths: Vec<f64>,
}

impl TruthState {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    kind: PlantKind,
    dims: Dims,
    x0: Vector,
    x_d: Vector,
}

impl PlantModel {
    pub fn kind(&self) -> &PlantKind {
        &self.kind
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PlantKind::Scalar { .. } => "scalar",
            PlantKind::Wmr { .. } => "wmr",
            PlantKind::Ibvs { .. } => "ibvs",
        }
    }

    pub fn initial_state(&self) -> &Vector {
        &self.x0
    }

    pub fn desired_state(&self) -> &Vector {
        &self.x_d
    }

    pub fn with_initial_state(mut self, x0: Vector) -> Result<Self> {
        self.check_state("with_initial_state", &x0)?;
        self.x0 = x0;
        Ok(self)
    }

    pub fn with_desired_state(mut self, x_d: Vector) -> Result<Self> {
        self.check_state("with_desired_state", &x_d)?;
        self.x_d = x_d;
        Ok(self)
    }

    /// True parameter vector when the plant matches the learner's model exactly.
    /// Visual servoing has a depth per feature, so the single-θ model has no exact truth.
    pub fn theta_true(&self) -> Option<Vector> {
        match self.kind {
            PlantKind::Scalar { b } => Some(Vector::from_element(1, b)),
            PlantKind::Wmr { a, b } => Some(Vector::from_vec(vec![a, b])),
            PlantKind::Ibvs { .. } => None,
        }
    }

    pub fn initial_truth(&self) -> TruthState {
        match &self.kind {
            PlantKind::Ibvs { depths0, .. } => TruthState {
                depths: depths0.to_vec(),
            },
            _ => TruthState::default(),
        }
    }

    /// `Y(x)`, shape `nm x p`.
    pub fn regressor(&self, x: &Vector) -> Result<Matrix> {
        self.check_state("regressor", x)?;
        let Dims { n, m, p } = self.dims;
        let mut y = Matrix::zeros(n * m, p);
        match self.kind {
            PlantKind::Scalar { .. } => y[(0, 0)] = 1.0,
            PlantKind::Wmr { .. } => {
                let psi = x[2];
                y[(0, 0)] = psi.cos();
                y[(1, 0)] = psi.sin();
                y[(5, 1)] = 1.0;
            }
            PlantKind::Ibvs { .. } => {
                // vec index of g[(row, col)] is col * n + row
                for i in 0..IBVS_FEATURES {
                    let (x1, x2) = (x[2 * i], x[2 * i + 1]);
                    let (r1, r2) = (2 * i, 2 * i + 1);
                    y[(r1, 0)] = 1.0;
                    y[(n + r2, 0)] = 1.0;
                    y[(2 * n + r1, 0)] = -x1;
                    y[(2 * n + r2, 0)] = -x2;
                }
            }
        }
        Ok(y)
    }

    /// `Y₀(x)`, length `nm`. Identically zero except for visual servoing.
    pub fn offset(&self, x: &Vector) -> Result<Vector> {
        self.check_state("offset", x)?;
        let Dims { n, m, .. } = self.dims;
        let mut y0 = Vector::zeros(n * m);
        if let PlantKind::Ibvs { .. } = self.kind {
            for i in 0..IBVS_FEATURES {
                let (x1, x2) = (x[2 * i], x[2 * i + 1]);
                let (r1, r2) = (2 * i, 2 * i + 1);
                y0[3 * n + r1] = -x1 * x2;
                y0[4 * n + r1] = 1.0 + x1 * x1;
                y0[5 * n + r1] = -x2;
                y0[3 * n + r2] = -1.0 - x2 * x2;
                y0[4 * n + r2] = x1 * x2;
                y0[5 * n + r2] = x1;
            }
        }
        Ok(y0)
    }

    /// `g(x, θ) = vec⁻¹(Y(x) θ + Y₀(x))`.
    pub fn g_matrix(&self, x: &Vector, theta: &Vector) -> Result<Matrix> {
        self.check_theta("g_matrix", theta)?;
        let Dims { n, m, .. } = self.dims;
        let v = self.regressor(x)? * theta + self.offset(x)?;
        vec_inv(&v, n, m)
    }

    /// Linear-in-parameter form: returns `(𝒴, b)` with `𝒴 = (uᵀ⊗Iₙ) Y(x)` and
    /// `b = (uᵀ⊗Iₙ) Y₀(x)`, so that the modelled rate is `𝒴 θ + b`.
    pub fn lip_regressor(&self, x: &Vector, u: &Vector) -> Result<(Matrix, Vector)> {
        self.check_input("lip_regressor", u)?;
        let k = input_kron_identity(u, self.dims.n);
        Ok((&k * self.regressor(x)?, &k * self.offset(x)?))
    }

    /// Ground-truth state rate and truth-variable rate under input `u`.
    pub fn truth_rate(&self, x: &Vector, truth: &TruthState, u: &Vector) -> Result<(Vector, Vec<f64>)> {
        self.check_state("truth_rate", x)?;
        self.check_input("truth_rate", u)?;
        match &self.kind {
            PlantKind::Scalar { b } => Ok((Vector::from_element(1, b * u[0]), Vec::new())),
            PlantKind::Wmr { a, b } => {
                let psi = x[2];
                Ok((
                    Vector::from_vec(vec![a * psi.cos() * u[0], a * psi.sin() * u[0], b * u[1]]),
                    Vec::new(),
                ))
            }
            PlantKind::Ibvs { .. } => {
                if truth.depths.len() != IBVS_FEATURES {
                    return Err(Error::dim("truth_rate depths", IBVS_FEATURES, truth.depths.len()));
                }
                let mut xdot = Vector::zeros(2 * IBVS_FEATURES);
                let mut zdot = Vec::with_capacity(IBVS_FEATURES);
                let (v, w) = ([u[0], u[1], u[2]], [u[3], u[4], u[5]]);
                for (i, &z) in truth.depths.iter().enumerate() {
                    if !(z > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "feature {i} depth {z} is not positive"
                        )));
                    }
                    let (x1, x2) = (x[2 * i], x[2 * i + 1]);
                    let th = 1.0 / z;
                    xdot[2 * i] = th * v[0] - x1 * th * v[2] - x1 * x2 * w[0] + (1.0 + x1 * x1) * w[1] - x2 * w[2];
                    xdot[2 * i + 1] = th * v[1] - x2 * th * v[2] - (1.0 + x2 * x2) * w[0] + x1 * x2 * w[1] + x1 * w[2];
                    // rigid motion of the point P = z [x1, x2, 1] under the
                    // sign convention of the Jacobian above: Ṗ = v + ω × P
                    let (px, py) = (x1 * z, x2 * z);
                    zdot.push(v[2] + w[0] * py - w[1] * px);
                }
                Ok((xdot, zdot))
            }
        }
    }

    fn check_state(&self, context: &'static str, x: &Vector) -> Result<()> {
        if x.len() != self.dims.n {
            return Err(Error::dim(context, self.dims.n, x.len()));
        }
        Ok(())
    }

    fn check_input(&self, context: &'static str, u: &Vector) -> Result<()> {
        if u.len() != self.dims.m {
            return Err(Error::dim(context, self.dims.m, u.len()));
        }
        Ok(())
    }

    fn check_theta(&self, context: &'static str, theta: &Vector) -> Result<()> {
        if theta.len() != self.dims.p {
            return Err(Error::dim(context, self.dims.p, theta.len()));
        }
        Ok(())
    }
}

/// Scalar integrator `ẋ = b u` regulated to zero from `x(0) = 1`.
pub fn make_scalar_plant(b_true: f64) -> Result<PlantModel> {
    if b_true == 0.0 || !b_true.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scalar plant gain must be finite and nonzero, got {b_true}"
        )));
    }
    Ok(PlantModel {
        kind: PlantKind::Scalar { b: b_true },
        dims: Dims { n: 1, m: 1, p: 1 },
        x0: Vector::from_element(1, 1.0),
        x_d: Vector::zeros(1),
    })
}

pub fn make_wmr_plant(a: f64, b: f64, x0: Vector, x_d: Vector) -> Result<PlantModel> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "wheeled robot parameters must be positive, got a={a}, b={b}"
        )));
    }
    if x0.len() != 3 {
        return Err(Error::dim("make_wmr_plant x0", 3, x0.len()));
    }
    if x_d.len() != 3 {
        return Err(Error::dim("make_wmr_plant x_d", 3, x_d.len()));
    }
    Ok(PlantModel {
        kind: PlantKind::Wmr { a, b },
        dims: Dims { n: 3, m: 2, p: 2 },
        x0,
        x_d,
    })
}

/// Robot with `a = 1.5`, `b = 1`, driven from `[2, 2, π/4]` to `[0, 0, π/2]`.
pub fn wmr_default() -> PlantModel {
    make_wmr_plant(
        1.5,
        1.0,
        Vector::from_vec(vec![2.0, 2.0, FRAC_PI_4]),
        Vector::from_vec(vec![0.0, 0.0, FRAC_PI_2]),
    )
    .expect("default robot parameters are valid")
}

pub const IBVS_PIXELS0: [[f64; 2]; IBVS_FEATURES] = [[50.0, 50.0], [100.0, 50.0], [100.0, 100.0], [50.0, 100.0]];
pub const IBVS_PIXELS_D: [[f64; 2]; IBVS_FEATURES] = [[825.0, 790.0], [860.0, 825.0], [825.0, 860.0], [790.0, 825.0]];

pub fn make_ibvs_plant(
    pixels0: &[[f64; 2]; IBVS_FEATURES],
    pixels_d: &[[f64; 2]; IBVS_FEATURES],
    intrinsics: Intrinsics,
    depths0: [f64; IBVS_FEATURES],
) -> Result<PlantModel> {
    if let Some(z) = depths0.iter().find(|z| !(**z > 0.0) || !z.is_finite()) {
        return Err(Error::InvalidParameter(format!("initial depth {z} is not positive")));
    }
    let Intrinsics { fx, fy, cx, cy } = intrinsics;
    if !(fx.abs() > 0.0 && fy.abs() > 0.0) || ![fx, fy, cx, cy].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("camera intrinsics are not invertible".into()));
    }
    let to_state = |px: &[[f64; 2]; IBVS_FEATURES]| {
        Vector::from_iterator(2 * IBVS_FEATURES, px.iter().flat_map(|p| intrinsics.normalize(*p)))
    };
    Ok(PlantModel {
        kind: PlantKind::Ibvs { intrinsics, depths0 },
        dims: Dims { n: 8, m: 6, p: 1 },
        x0: to_state(pixels0),
        x_d: to_state(pixels_d),
    })
}

pub fn ibvs_default() -> PlantModel {
    make_ibvs_plant(
        &IBVS_PIXELS0,
        &IBVS_PIXELS_D,
        Intrinsics::default(),
        [2.0; IBVS_FEATURES],
    )
    .expect("default visual servoing setup is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::vec;

    fn v(values: &[f64]) -> Vector {
        Vector::from_column_slice(values)
    }

    #[test]
    fn wmr_g_at_reference_headings() {
        let plant = wmr_default();
        let theta = v(&[1.5, 1.0]);
        let g0 = plant.g_matrix(&v(&[0.0, 0.0, 0.0]), &theta).unwrap();
        assert_eq!(g0, Matrix::from_row_slice(3, 2, &[1.5, 0.0, 0.0, 0.0, 0.0, 1.0]));
        assert_eq!(vec(&g0).as_slice(), &[1.5, 0.0, 0.0, 0.0, 0.0, 1.0]);

        let g90 = plant.g_matrix(&v(&[0.0, 0.0, FRAC_PI_2]), &theta).unwrap();
        let expected = Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.5, 0.0, 0.0, 1.0]);
        assert!((g90 - expected).abs().max() < 1e-15);
    }

    #[test]
    fn wmr_regressor_structure() {
        let plant = wmr_default();
        let y = plant.regressor(&v(&[0.3, -0.1, 0.0])).unwrap();
        assert_eq!(y.shape(), (6, 2));
        assert_eq!(y.iter().filter(|e| **e != 0.0).count(), 2);
        assert_eq!(y[(0, 0)], 1.0);
        assert_eq!(y[(1, 0)], 0.0);
        assert_eq!(y[(5, 1)], 1.0);
        assert_eq!(plant.offset(&v(&[1.0, 2.0, 3.0])).unwrap(), Vector::zeros(6));
    }

    #[test]
    fn wmr_lip_and_truth() {
        let plant = wmr_default();
        let (ycal, b) = plant.lip_regressor(&v(&[0.0, 0.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert_eq!(ycal, Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        assert_eq!(b, Vector::zeros(3));

        let (xdot, extra) = plant
            .truth_rate(&v(&[0.0, 0.0, FRAC_PI_4]), &TruthState::default(), &v(&[1.0, 1.0]))
            .unwrap();
        assert!(extra.is_empty());
        let c = 1.5 * FRAC_PI_4.cos();
        assert!((xdot - v(&[c, c, 1.0])).abs().max() < 1e-15);
        assert!((c - 1.0607).abs() < 1e-4);
    }

    #[test]
    fn zero_input_gives_zero_rates() {
        for plant in [make_scalar_plant(2.0).unwrap(), wmr_default(), ibvs_default()] {
            let Dims { n, m, p } = plant.dims();
            let x = plant.initial_state().clone();
            let (ycal, b) = plant.lip_regressor(&x, &Vector::zeros(m)).unwrap();
            assert_eq!(ycal, Matrix::zeros(n, p));
            assert_eq!(b, Vector::zeros(n));
            let (xdot, zdot) = plant.truth_rate(&x, &plant.initial_truth(), &Vector::zeros(m)).unwrap();
            assert_eq!(xdot, Vector::zeros(n));
            assert!(zdot.iter().all(|z| *z == 0.0));
        }
    }

    #[test]
    fn scalar_plant() {
        assert!(make_scalar_plant(0.0).is_err());
        let plant = make_scalar_plant(2.0).unwrap();
        let (xdot, _) = plant
            .truth_rate(&v(&[5.0]), &TruthState::default(), &v(&[1.0]))
            .unwrap();
        assert_eq!(xdot[0], 2.0);
        assert_eq!(plant.g_matrix(&v(&[5.0]), &v(&[1.7])).unwrap()[(0, 0)], 1.7);
        let (ycal, b) = plant.lip_regressor(&v(&[5.0]), &v(&[3.0])).unwrap();
        assert_eq!(ycal[(0, 0)], 3.0);
        assert_eq!(b[0], 0.0);
    }

    #[test]
    fn ibvs_jacobian_at_origin() {
        let plant = ibvs_default();
        let g = plant.g_matrix(&Vector::zeros(8), &v(&[1.0])).unwrap();
        for i in 0..IBVS_FEATURES {
            let r1: Vec<f64> = g.row(2 * i).iter().copied().collect();
            let r2: Vec<f64> = g.row(2 * i + 1).iter().copied().collect();
            assert_eq!(r1, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
            assert_eq!(r2, vec![0.0, 1.0, 0.0, -1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn ibvs_theta_free_columns() {
        let plant = ibvs_default();
        let x = plant.initial_state().clone();
        let g = plant.g_matrix(&x, &v(&[0.0])).unwrap();
        assert_eq!(g.columns(0, 3).abs().max(), 0.0);
        assert!(g.columns(3, 3).abs().max() > 0.0);
    }

    #[test]
    fn ibvs_pure_translation_along_axis() {
        let plant = ibvs_default();
        let truth = TruthState { depths: vec![2.0; 4] };
        let u = v(&[0.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        let (xdot, zdot) = plant.truth_rate(&Vector::zeros(8), &truth, &u).unwrap();
        assert_eq!(xdot, Vector::zeros(8));
        // under this Jacobian's sign convention the point moves with +u
        assert!(zdot.iter().all(|z| (*z + 1.0).abs() < 1e-15));
    }

    #[test]
    fn ibvs_rejects_bad_depths() {
        assert!(make_ibvs_plant(
            &IBVS_PIXELS0,
            &IBVS_PIXELS_D,
            Intrinsics::default(),
            [2.0, 0.0, 2.0, 2.0]
        )
        .is_err());
        let plant = ibvs_default();
        let truth = TruthState {
            depths: vec![2.0, -1.0, 2.0, 2.0],
        };
        assert!(plant.truth_rate(&Vector::zeros(8), &truth, &Vector::zeros(6)).is_err());
    }

    #[test]
    fn ibvs_initial_state_is_normalized() {
        let plant = ibvs_default();
        let x0 = plant.initial_state();
        assert_eq!(x0.len(), 8);
        assert!((x0[0] + 0.45).abs() < 1e-15);
        assert!((plant.desired_state()[0] - 0.325).abs() < 1e-15);
        assert!(x0.iter().chain(plant.desired_state().iter()).all(|e| e.abs() < 1.0));
    }

    #[test]
    fn dimension_errors() {
        let plant = wmr_default();
        assert!(plant.regressor(&Vector::zeros(2)).is_err());
        assert!(plant.g_matrix(&Vector::zeros(3), &Vector::zeros(3)).is_err());
        assert!(plant.lip_regressor(&Vector::zeros(3), &Vector::zeros(3)).is_err());
    }
}
