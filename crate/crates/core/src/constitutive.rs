//! Classical material models evaluated through the correspondence
//! principle: isotropic elasticity, modified Cam-Clay with an implicit
//! return map, Darcy flow, and the energy-derived stabilization constants.
//!
//! Sign convention: tension positive for the solid (compression negative,
//! `p_c < 0`), pore pressure positive in compression.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor4, Vector9};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticParams {
    /// Bulk modulus [kPa]
    pub bulk: f64,
    /// Shear modulus [kPa]
    pub shear: f64,
}

impl ElasticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bulk > 0.0 && self.shear > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "elastic moduli must be positive (K = {}, mu = {})",
                self.bulk, self.shear
            )));
        }
        Ok(())
    }

    /// Oedometric (constrained) modulus `K + 4 mu / 3`.
    pub fn oedometric(&self) -> f64 {
        self.bulk + 4.0 * self.shear / 3.0
    }

    pub fn tensor(&self) -> Tensor4 {
        tensor::isotropic_elasticity(self.bulk, self.shear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CamClayParams {
    /// Critical-state slope M
    pub m: f64,
    /// Compression index
    pub lambda: f64,
    /// Swelling index
    pub kappa: f64,
    /// Initial preconsolidation pressure [kPa], negative
    pub pc0: f64,
}

impl CamClayParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.kappa > 0.0 && self.lambda > self.kappa && self.pc0 < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Cam-Clay parameters require M > 0, lambda > kappa > 0, pc0 < 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn yield_tolerance(&self) -> f64 {
        1e-8 * self.pc0 * self.pc0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    /// Hydraulic conductivity k_w
    pub conductivity: f64,
    /// Fluid bulk modulus K_w [kPa]
    pub fluid_bulk: f64,
    /// Fluid density [kg/m^3]
    pub fluid_density: f64,
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.conductivity > 0.0 && self.fluid_bulk > 0.0 && self.fluid_density > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "flow parameters must be positive (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SolidModel {
    Elastic(ElasticParams),
    CamClay {
        elastic: ElasticParams,
        plastic: CamClayParams,
    },
}

impl SolidModel {
    pub fn elastic(&self) -> &ElasticParams {
        match self {
            SolidModel::Elastic(e) => e,
            SolidModel::CamClay { elastic, .. } => elastic,
        }
    }

    pub fn initial_state(&self, initial_stress: Matrix3<f64>) -> ConstitutiveState {
        let pc = match self {
            SolidModel::Elastic(_) => 0.0,
            SolidModel::CamClay { plastic, .. } => plastic.pc0,
        };
        ConstitutiveState {
            stress: initial_stress,
            plastic_strain: Matrix3::zeros(),
            pc,
            strain: Matrix3::zeros(),
            initial_stress,
        }
    }

    /// Stress update for total strain `eps` from the converged history `state`.
    pub fn update(&self, eps: &Matrix3<f64>, state: &ConstitutiveState) -> Result<StressUpdate> {
        match self {
            SolidModel::Elastic(e) => {
                let stress = state.initial_stress + elastic_stress(&(eps - state.plastic_strain), e);
                Ok(StressUpdate {
                    state: ConstitutiveState {
                        stress,
                        strain: *eps,
                        ..state.clone()
                    },
                    tangent: e.tensor(),
                    plastic: false,
                    delta_gamma: 0.0,
                })
            }
            SolidModel::CamClay { elastic, plastic } => camclay_return_map(eps, state, elastic, plastic),
        }
    }
}

/// History carried by each material point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstitutiveState {
    /// Effective Cauchy stress [kPa]
    pub stress: Matrix3<f64>,
    pub plastic_strain: Matrix3<f64>,
    /// Preconsolidation pressure [kPa]; zero for elastic models
    pub pc: f64,
    pub strain: Matrix3<f64>,
    /// Stress at zero strain [kPa]
    pub initial_stress: Matrix3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressUpdate {
    pub state: ConstitutiveState,
    /// Algorithmic tangent `d sigma / d eps`
    pub tangent: Tensor4,
    pub plastic: bool,
    pub delta_gamma: f64,
}

/// Small-strain measure `sym(F) - I`.
pub fn strain_from_f(f: &Matrix3<f64>) -> Matrix3<f64> {
    tensor::sym(f) - Matrix3::identity()
}

/// Same strain as [`strain_from_f`] from `H = F - I`, without the
/// cancellation of forming `I + H`.
pub fn strain_from_displacement_gradient(h: &Matrix3<f64>) -> Matrix3<f64> {
    tensor::sym(h)
}

/// `K tr(eps) I + 2 mu dev(eps)`.
pub fn elastic_stress(eps_e: &Matrix3<f64>, params: &ElasticParams) -> Matrix3<f64> {
    Matrix3::identity() * (params.bulk * eps_e.trace()) + tensor::dev(eps_e) * (2.0 * params.shear)
}

/// `f = (p - p_c) p + (q / M)^2`.
pub fn yield_function(p: f64, q: f64, pc: f64, m: f64) -> f64 {
    (p - pc) * p + (q / m) * (q / m)
}

const RETURN_MAP_MAX_ITER: usize = 50;

/// Implicit (backward Euler) return map for modified Cam-Clay with
/// associative flow and exponential hardening, solved in `(p, dgamma)` with
/// `q` eliminated in closed form. Returns the algorithmic tangent.
pub fn camclay_return_map(
    eps: &Matrix3<f64>,
    state: &ConstitutiveState,
    elastic: &ElasticParams,
    params: &CamClayParams,
) -> Result<StressUpdate> {
    let k = elastic.bulk;
    let mu = elastic.shear;
    let m2 = params.m * params.m;
    let lk = params.lambda - params.kappa;
    let trial = state.initial_stress + elastic_stress(&(eps - state.plastic_strain), elastic);
    let (p_tr, q_tr) = tensor::stress_invariants(&trial);
    let s_tr = tensor::dev(&trial);
    let pc_n = state.pc;
    let tol = params.yield_tolerance();

    if yield_function(p_tr, q_tr, pc_n, params.m) <= tol {
        return Ok(StressUpdate {
            state: ConstitutiveState {
                stress: trial,
                strain: *eps,
                ..state.clone()
            },
            tangent: elastic.tensor(),
            plastic: false,
            delta_gamma: 0.0,
        });
    }

    let hard = |p: f64| pc_n * (-(p_tr - p) / (k * lk)).exp();
    let ratio = |dg: f64| 1.0 / (1.0 + 6.0 * mu * dg / m2);
    let residual = |p: f64, dg: f64| -> Vector2<f64> {
        let pc = hard(p);
        let q = q_tr * ratio(dg);
        Vector2::new(p - p_tr + k * dg * (2.0 * p - pc), yield_function(p, q, pc, params.m))
    };
    let scale = Vector2::new(1.0 / pc_n.abs(), 1.0 / (pc_n * pc_n));
    let merit = |r: &Vector2<f64>| r.component_mul(&scale).norm();

    let mut p = p_tr;
    let mut dg = 0.0;
    let mut r = residual(p, dg);
    let mut converged = false;
    for _ in 0..RETURN_MAP_MAX_ITER {
        if r[1].abs() <= tol && r[0].abs() <= 1e-10 * pc_n.abs() {
            converged = true;
            break;
        }
        let pc = hard(p);
        let dpc = pc / (k * lk);
        let rt = ratio(dg);
        let q = q_tr * rt;
        let dq = -q * (6.0 * mu / m2) * rt;
        let jac = Matrix2::new(
            1.0 + k * dg * (2.0 - dpc),
            k * (2.0 * p - pc),
            (2.0 * p - pc) - p * dpc,
            2.0 * q / m2 * dq,
        );
        let Some(step) = jac.lu().solve(&(-r)) else {
            break;
        };
        let m0 = merit(&r);
        let mut t = 1.0;
        loop {
            let pn = p + t * step[0];
            let dgn = (dg + t * step[1]).max(0.0);
            let rn = residual(pn, dgn);
            if (rn.iter().all(|v| v.is_finite()) && merit(&rn) < m0) || t < 1e-6 {
                p = pn;
                dg = dgn;
                r = rn;
                break;
            }
            t *= 0.5;
        }
    }
    if !converged && !(r[1].abs() <= tol && r[0].abs() <= 1e-10 * pc_n.abs()) {
        return Err(Error::ReturnMapFailure {
            point: None,
            p_trial: p_tr,
            q_trial: q_tr,
        });
    }

    let pc = hard(p);
    let rt = ratio(dg);
    let s = s_tr * rt;
    let stress = Matrix3::identity() * p + s;
    let flow = Matrix3::identity() * ((2.0 * p - pc) / 3.0) + s * (3.0 / m2);
    let plastic_strain = state.plastic_strain + flow * dg;

    // Linearization of the local system with respect to the trial invariants.
    let dpc = pc / (k * lk);
    let q = q_tr * rt;
    let dq_ddg = -q * (6.0 * mu / m2) * rt;
    let jac = Matrix2::new(
        1.0 + k * dg * (2.0 - dpc),
        k * (2.0 * p - pc),
        (2.0 * p - pc) - p * dpc,
        2.0 * q / m2 * dq_ddg,
    );
    let jinv = jac.try_inverse().ok_or(Error::ReturnMapFailure {
        point: None,
        p_trial: p_tr,
        q_trial: q_tr,
    })?;
    let ident = tensor::flatten(&Matrix3::identity());
    let nhat = if q_tr > 0.0 {
        tensor::flatten(&(s_tr / s_tr.norm()))
    } else {
        Vector9::zeros()
    };
    // d p_tr / d eps = K I ; d q_tr / d eps = sqrt(3/2) 2 mu nhat
    let dptr = ident * k;
    let dqtr = nhat * ((1.5f64).sqrt() * 2.0 * mu);
    let dr1 = dptr * (-1.0 + k * dg * dpc);
    let dr2 = dptr * (p * dpc) + dqtr * (2.0 * q * rt / m2);
    let dp = -(dr1 * jinv[(0, 0)] + dr2 * jinv[(0, 1)]);
    let ddg = -(dr1 * jinv[(1, 0)] + dr2 * jinv[(1, 1)]);
    let drt = -(6.0 * mu / m2) * rt * rt;
    let tangent = ident * dp.transpose()
        + tensor::projector_dev() * (2.0 * mu * rt)
        + tensor::flatten(&s_tr) * (ddg.transpose() * drt);

    Ok(StressUpdate {
        state: ConstitutiveState {
            stress,
            plastic_strain,
            pc,
            strain: *eps,
            initial_stress: state.initial_stress,
        },
        tangent,
        plastic: true,
        delta_gamma: dg,
    })
}

/// Darcy flux `q = -k_w gradPhi`.
pub fn darcy_flux(grad_phi: &Vector3<f64>, conductivity: f64) -> Vector3<f64> {
    -grad_phi * conductivity
}

/// Stabilization micromodulus obtained by equating the microelastic energy
/// of an isotropic extension with the classical energy in `dim` dimensions.
pub fn micromodulus(elastic: &ElasticParams, delta: f64, dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0 * elastic.oedometric() / (delta * delta),
        2 => 12.0 * (elastic.bulk + elastic.shear / 3.0) / (PI * delta.powi(3)),
        _ => 18.0 * elastic.bulk / (PI * delta.powi(4)),
    }
}

/// Hydraulic micro-conductivity obtained by equating the micro-dissipation
/// of a linear pressure field with the classical one in `dim` dimensions.
pub fn micro_conductivity(conductivity: f64, delta: f64, dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0 * conductivity / (delta * delta),
        2 => 6.0 * conductivity / (PI * delta.powi(3)),
        _ => 6.0 * conductivity / (PI * delta.powi(4)),
    }
}

/// `rho = rho_s (1 - phi) + rho_w phi`.
pub fn mixture_density(porosity: f64, rho_s: f64, rho_w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&porosity) {
        return Err(Error::InvalidParameter(format!("porosity {porosity} outside [0, 1]")));
    }
    Ok(rho_s * (1.0 - porosity) + rho_w * porosity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loc_params() -> (ElasticParams, CamClayParams) {
        (
            ElasticParams { bulk: 2.5e4, shear: 1.154e4 },
            CamClayParams { m: 1.0, lambda: 0.10, kappa: 0.03, pc0: -250.0 },
        )
    }

    #[test]
    fn strain_measure_examples() {
        assert_eq!(strain_from_f(&Matrix3::identity()), Matrix3::zeros());
        let e = strain_from_f(&(Matrix3::identity() * 1.01));
        assert!((e - Matrix3::identity() * 0.01).norm() < 1e-15);
        let mut f = Matrix3::identity();
        f[(0, 1)] = 0.02;
        assert!((strain_from_f(&f)[(0, 1)] - 0.01).abs() < 1e-16);
    }

    #[test]
    fn elastic_stress_examples() {
        let p = ElasticParams { bulk: 2.1e5, shear: 9.8e4 };
        let s = elastic_stress(&(Matrix3::identity() * (0.003 / 3.0)), &p);
        assert!((s - Matrix3::identity() * (2.1e5 * 0.003)).norm() < 1e-9);
        let mut e = Matrix3::zeros();
        e[(0, 1)] = 0.0005;
        e[(1, 0)] = 0.0005;
        assert!((elastic_stress(&e, &p)[(0, 1)] - 9.8e4 * 0.001).abs() < 1e-9);
        assert_eq!(elastic_stress(&Matrix3::zeros(), &p), Matrix3::zeros());
    }

    #[test]
    fn yield_function_examples() {
        assert_eq!(yield_function(-125.0, 0.0, -250.0, 1.0), -15625.0);
        assert_eq!(yield_function(-250.0, 0.0, -250.0, 1.0), 0.0);
        assert_eq!(yield_function(-125.0, 125.0, -250.0, 1.0), 0.0);
    }

    #[test]
    fn elastic_start_of_localization() {
        let (e, c) = loc_params();
        let model = SolidModel::CamClay { elastic: e, plastic: c };
        let st = model.initial_state(Matrix3::identity() * -100.0);
        let up = model.update(&Matrix3::zeros(), &st).unwrap();
        assert!(!up.plastic);
        assert_eq!(up.state.stress, Matrix3::identity() * -100.0);
    }

    #[test]
    fn plastic_return_lands_on_yield_surface_with_normal_flow() {
        let (e, c) = loc_params();
        let model = SolidModel::CamClay { elastic: e, plastic: c };
        let st = model.initial_state(Matrix3::identity() * -100.0);
        let mut eps = Matrix3::zeros();
        eps[(0, 0)] = -0.006;
        eps[(1, 1)] = 0.006;
        let up = model.update(&eps, &st).unwrap();
        assert!(up.plastic);
        let (p, q) = tensor::stress_invariants(&up.state.stress);
        assert!(yield_function(p, q, up.state.pc, c.m).abs() <= c.yield_tolerance());
        // associativity: plastic strain increment parallel to df/dsigma
        let n = Matrix3::identity() * ((2.0 * p - up.state.pc) / 3.0) + tensor::dev(&up.state.stress) * 3.0;
        let de = up.state.plastic_strain;
        let cos = tensor::ddot(&de, &n) / (de.norm() * n.norm());
        assert!((1.0 - cos).abs() < 1e-8);
        // dry side: dilation and softening
        assert!(up.state.plastic_strain.trace() > 0.0);
        assert!(up.state.pc > c.pc0);
    }

    #[test]
    fn algorithmic_tangent_matches_central_differences() {
        let (e, c) = loc_params();
        let model = SolidModel::CamClay { elastic: e, plastic: c };
        let st = model.initial_state(Matrix3::identity() * -100.0);
        let mut eps = Matrix3::zeros();
        eps[(0, 0)] = -0.008;
        eps[(1, 1)] = 0.002;
        eps[(0, 1)] = 0.001;
        eps[(1, 0)] = 0.001;
        let up = model.update(&eps, &st).unwrap();
        assert!(up.plastic);
        let h = 1e-7;
        let mut max_err: f64 = 0.0;
        let scale = up.tangent.abs().max();
        for a in 0..3 {
            for b in a..3 {
                let mut d = Matrix3::zeros();
                d[(a, b)] += 0.5 * h;
                d[(b, a)] += 0.5 * h;
                let sp = model.update(&(eps + d), &st).unwrap().state.stress;
                let sm = model.update(&(eps - d), &st).unwrap().state.stress;
                let fd = (sp - sm) / (2.0 * h);
                let an = tensor::contract(&up.tangent, &(d / h));
                max_err = max_err.max((fd - an).abs().max() / scale);
            }
        }
        assert!(max_err < 1e-5, "max relative tangent error {max_err}");
    }

    #[test]
    fn purely_deviatoric_flow_at_critical_state_keeps_pc() {
        let (e, c) = loc_params();
        // start on the critical-state point
        let st = ConstitutiveState {
            stress: Matrix3::from_diagonal(&Vector3::new(-125.0 - 125.0 * 2.0 / 3.0, -125.0 + 125.0 / 3.0, -125.0 + 125.0 / 3.0)),
            plastic_strain: Matrix3::zeros(),
            pc: -250.0,
            strain: Matrix3::zeros(),
            initial_stress: Matrix3::from_diagonal(&Vector3::new(-125.0 - 125.0 * 2.0 / 3.0, -125.0 + 125.0 / 3.0, -125.0 + 125.0 / 3.0)),
        };
        let (p, q) = tensor::stress_invariants(&st.stress);
        assert!((p + 125.0).abs() < 1e-12 && (q - 125.0).abs() < 1e-9);
        let mut de = Matrix3::zeros();
        de[(0, 0)] = -1e-4;
        de[(1, 1)] = 0.5e-4;
        de[(2, 2)] = 0.5e-4;
        let up = camclay_return_map(&de, &st, &e, &c).unwrap();
        assert!(up.plastic);
        assert!((up.state.pc + 250.0).abs() < 1e-9);
        assert!(up.state.plastic_strain.trace().abs() < 1e-12);
    }

    #[test]
    fn darcy_sign() {
        let q = darcy_flux(&Vector3::new(2.0, 0.0, 0.0), 1e-3);
        assert!(q[0] < 0.0);
        assert_eq!(darcy_flux(&Vector3::zeros(), 1.0), Vector3::zeros());
        assert_eq!(darcy_flux(&(Vector3::new(1.0, 1.0, 1.0) * 3.0), 0.5), Vector3::new(-1.5, -1.5, -1.5));
    }

    #[test]
    fn stabilization_constants() {
        let p = ElasticParams { bulk: 2.1e5, shear: 9.8e4 };
        let c = micromodulus(&p, 0.082, 3);
        assert!((c / 2.661e10 - 1.0).abs() < 1e-3, "{c}");
        assert!((micromodulus(&p, 0.164, 3) * 16.0 / c - 1.0).abs() < 1e-14);
        assert!((micromodulus(&p, 0.5, 1) - 2.0 * p.oedometric() / 0.25).abs() < 1e-6);
        let kp = micro_conductivity(3.55e-5, 0.082, 3);
        assert!((kp - 1.50).abs() < 0.01, "{kp}");
        assert!((micro_conductivity(3.55e-5, 0.164, 3) * 16.0 / kp - 1.0).abs() < 1e-14);
        assert!((micro_conductivity(1.0, 0.5, 1) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn mixture_density_examples() {
        assert_eq!(mixture_density(0.0, 1884.0, 1000.0).unwrap(), 1884.0);
        assert_eq!(mixture_density(1.0, 1884.0, 1000.0).unwrap(), 1000.0);
        assert!((mixture_density(0.48, 1884.0, 1000.0).unwrap() - 1459.68).abs() < 1e-9);
        assert!(mixture_density(1.2, 1884.0, 1000.0).is_err());
    }
}
