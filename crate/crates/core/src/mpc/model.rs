//! Linear error-state model `ẋ = Ax + Bu + h` with output `y = Cx − d`
//! over the stacked state `x = [ψ; ξ]`.

use nalgebra::{DMatrix, SMatrix, SVector};

use crate::dynamics::InertiaParams;
use crate::error::{Error, Result};
use crate::lie::{ad_se3, coad_se3, hat3, Mat6, Vec6};

pub const STATE_DIM: usize = 12;
pub type Vec12 = SVector<f64, 12>;
pub type Mat12 = SMatrix<f64, 12, 12>;

/// Which error-dynamics model the controller uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Full model, including the `−ad_{ξ_d}` transport term.
    #[default]
    Proposed,
    /// Ablation that drops `−ad_{ξ_d}` from both `A` and `C`.
    Simplified,
}

impl Variant {
    pub fn is_simplified(self) -> bool {
        self == Variant::Simplified
    }
}

/// Affine twist model `ξ̇ ≈ Hξ + b + J_b⁻¹u` around an operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwistLinearization {
    pub h: Mat6,
    pub b: Vec6,
}

/// `[[(I_b ω)^, m v^], [m v^, 0]]`, the chain-rule part of the Jacobian of
/// `ad*_ξ J_b ξ`.
fn momentum_coupling(xi_bar: &Vec6, inertia: &InertiaParams) -> Mat6 {
    let w = xi_bar.fixed_rows::<3>(0).into_owned();
    let v = xi_bar.fixed_rows::<3>(3).into_owned();
    let iw = hat3(&(inertia.inertia() * w));
    let mv = hat3(&v) * inertia.mass();
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&iw);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&mv);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&mv);
    m
}

/// Linearizes `J_b⁻¹ ad*_ξ J_b ξ` at `ξ̄`. Exact at `ξ = ξ̄`.
pub fn linearize_twist_dynamics(xi_bar: &Vec6, inertia: &InertiaParams) -> TwistLinearization {
    let j = inertia.spatial();
    let j_inv = inertia.spatial_inv();
    let coupling = momentum_coupling(xi_bar, inertia);
    let h = j_inv * coad_se3(xi_bar) * j + j_inv * coupling;
    let b = -(j_inv * coupling * xi_bar);
    TwistLinearization { h, b }
}

/// Continuous-time matrices for one horizon stage.
#[derive(Clone, Debug, PartialEq)]
pub struct CtMatrices {
    pub a: Mat12,
    /// `12 × n_u`.
    pub b: DMatrix<f64>,
    pub h: Vec12,
    pub c: Mat12,
    pub d: Vec12,
}

/// Output map `y = Cx − d` with `y = [ψ; ψ̇]`.
pub fn output_map(xi_d: &Vec6, variant: Variant) -> (Mat12, Vec12) {
    let mut c = Mat12::identity();
    if !variant.is_simplified() {
        c.fixed_view_mut::<6, 6>(6, 0).copy_from(&(-ad_se3(xi_d)));
    }
    let mut d = Vec12::zeros();
    d.fixed_rows_mut::<6>(6).copy_from(xi_d);
    (c, d)
}

/// Assembles `(A, B, h, C, d)` for wrench inputs `u = (τ, f)`.
pub fn build_ct_system(xi_d: &Vec6, xi_bar: &Vec6, inertia: &InertiaParams, simplified: bool) -> CtMatrices {
    let variant = if simplified {
        Variant::Simplified
    } else {
        Variant::Proposed
    };
    let lin = linearize_twist_dynamics(xi_bar, inertia);
    build_ct_system_with_input(xi_d, &lin, inertia, &DMatrix::identity(6, 6), variant)
}

/// Assembles `(A, B, h, C, d)` where the body wrench is `input_map · u`.
pub fn build_ct_system_with_input(
    xi_d: &Vec6,
    lin: &TwistLinearization,
    inertia: &InertiaParams,
    input_map: &DMatrix<f64>,
    variant: Variant,
) -> CtMatrices {
    let mut a = Mat12::zeros();
    if !variant.is_simplified() {
        a.fixed_view_mut::<6, 6>(0, 0).copy_from(&(-ad_se3(xi_d)));
    }
    a.fixed_view_mut::<6, 6>(0, 6).copy_from(&Mat6::identity());
    a.fixed_view_mut::<6, 6>(6, 6).copy_from(&lin.h);

    let n_u = input_map.ncols();
    let j_inv = DMatrix::from_iterator(6, 6, inertia.spatial_inv().iter().copied());
    let mut b = DMatrix::zeros(STATE_DIM, n_u);
    b.view_mut((6, 0), (6, n_u)).copy_from(&(j_inv * input_map));

    let mut h = Vec12::zeros();
    h.fixed_rows_mut::<6>(0).copy_from(&(-xi_d));
    h.fixed_rows_mut::<6>(6).copy_from(&lin.b);

    let (c, d) = output_map(xi_d, variant);
    CtMatrices { a, b, h, c, d }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// `A_k = I + AΔt`, `B_k = BΔt`, `h_k = hΔt`.
    #[default]
    Euler,
    /// Exact discretization of `ẋ = Ax + Bu + h` under piecewise-constant `u`.
    ZeroOrderHold,
}

/// `x_{k+1} = A_k x_k + B_k u_k + h_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteModel {
    pub a: Mat12,
    pub b: DMatrix<f64>,
    pub h: Vec12,
}

pub fn discretize(ct: &CtMatrices, dt: f64, method: Discretization) -> Result<DiscreteModel> {
    if !(dt > 0.0) {
        return Err(Error::InvalidDt(dt));
    }
    match method {
        Discretization::Euler => Ok(DiscreteModel {
            a: Mat12::identity() + ct.a * dt,
            b: &ct.b * dt,
            h: ct.h * dt,
        }),
        Discretization::ZeroOrderHold => {
            // exp of [[A, B, h], [0, 0, 0]]·dt carries (A_k, B_k, h_k) in its top rows.
            let n_u = ct.b.ncols();
            let size = STATE_DIM + n_u + 1;
            let mut m = DMatrix::zeros(size, size);
            m.view_mut((0, 0), (STATE_DIM, STATE_DIM)).copy_from(&(ct.a * dt));
            m.view_mut((0, STATE_DIM), (STATE_DIM, n_u)).copy_from(&(&ct.b * dt));
            m.view_mut((0, STATE_DIM + n_u), (STATE_DIM, 1)).copy_from(&(ct.h * dt));
            let e = m.exp();
            Ok(DiscreteModel {
                a: Mat12::from_fn(|r, c| e[(r, c)]),
                b: e.view((0, STATE_DIM), (STATE_DIM, n_u)).into_owned(),
                h: Vec12::from_fn(|r, _| e[(r, STATE_DIM + n_u)]),
            })
        }
    }
}
