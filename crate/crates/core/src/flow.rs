//! Adaptive Dormand-Prince 5(4) integration of X_t on M, with the
//! variational equation for the differential of the flow map.
//!
//! The state is retracted onto M after every accepted step. Step-size control
//! is a pure function of the inputs, so repeated runs are bitwise identical.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // needed without std, where f64 has no inherent math
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::{Config, IntegratorConfig};
use crate::error::{Error, Result};
use crate::geometry::{check_on_manifold, VectorFieldFamily};
use crate::linalg;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step of the continuous extension.
#[derive(Clone, Debug)]
struct DenseStep {
    s0: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
}

/// Fourth-order continuous extension over the whole integration interval.
#[derive(Clone, Debug, Default)]
pub struct Dense {
    steps: Vec<DenseStep>,
}

impl Dense {
    pub fn span(&self) -> (f64, f64) {
        match (self.steps.first(), self.steps.last()) {
            (Some(a), Some(b)) => (a.s0, b.s0 + b.h),
            _ => (0.0, 0.0),
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        let idx = match self.steps.binary_search_by(|st| st.s0.partial_cmp(&s).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let st = &self.steps[idx.min(self.steps.len() - 1)];
        let th = if st.h > 0.0 { (s - st.s0) / st.h } else { 0.0 };
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &st.rcont;
        (0..r1.len())
            .map(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
            .collect()
    }

    /// Accepted step boundaries.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.steps.iter().map(|s| s.s0).collect();
        if let Some(last) = self.steps.last() {
            m.push(last.s0 + last.h);
        }
        m
    }
}

pub(crate) struct Solution {
    pub y: Vec<f64>,
    pub steps: usize,
    pub est_error: f64,
    pub dense: Option<Dense>,
}

/// Integrates y' = rhs(s, y) from s = 0 to `s_end`. `post_step` may project
/// the accepted state (retraction onto M).
pub(crate) fn integrate<F, P>(
    mut rhs: F,
    y0: &[f64],
    s_end: f64,
    cfg: &IntegratorConfig,
    mut post_step: P,
    keep_dense: bool,
) -> Result<Solution>
where
    F: FnMut(&[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut dense = if keep_dense { Some(Dense::default()) } else { None };
    if s_end == 0.0 {
        return Ok(Solution { y, steps: 0, est_error: 0.0, dense });
    }
    let (rtol, atol) = (cfg.rtol, cfg.atol);
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    rhs(&y, &mut k1);

    let sc0: Vec<f64> = y.iter().map(|v| atol + rtol * v.abs()).collect();
    let d0 = rms_scaled(&y, &sc0);
    let d1 = rms_scaled(&k1, &sc0);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(s_end).min(1.0).max(cfg.h_min * 10.0);

    let mut s = 0.0;
    let mut steps = 0usize;
    let mut est_error = 0.0f64;
    let mut last = false;
    let mut rejected_last = false;
    while !last || s < s_end {
        if steps > cfg.max_steps {
            return Err(Error::StepSizeUnderflow { s });
        }
        if s + 1.01 * h >= s_end {
            h = s_end - s;
            last = true;
        } else {
            last = false;
        }
        // a short final step is allowed: it only closes the interval
        if h < cfg.h_min && !last {
            return Err(Error::StepSizeUnderflow { s });
        }
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(&tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(&tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(&tmp, &mut k6);
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(&y1, &mut k7);
        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = atol + rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            last = false;
            rejected_last = true;
            continue;
        }
        if err <= 1.0 {
            if let Some(d) = dense.as_mut() {
                let r2: Vec<f64> = (0..n).map(|i| y1[i] - y[i]).collect();
                let r3: Vec<f64> = (0..n).map(|i| h * k1[i] - r2[i]).collect();
                let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * k7[i] - r3[i]).collect();
                let r5: Vec<f64> = (0..n)
                    .map(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
                    .collect();
                d.steps.push(DenseStep { s0: s, h, rcont: [y.clone(), r2, r3, r4, r5] });
            }
            est_error = est_error.max(err);
            s = if last { s_end } else { s + h };
            core::mem::swap(&mut y, &mut y1);
            post_step(&mut y);
            core::mem::swap(&mut k1, &mut k7);
            steps += 1;
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            rejected_last = false;
            if last {
                break;
            }
            h *= fac;
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            last = false;
            rejected_last = true;
        }
    }
    Ok(Solution { y, steps, est_error, dense })
}

fn rms_scaled(v: &[f64], sc: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(sc).map(|(a, b)| (a / b) * (a / b)).sum();
    (s / v.len().max(1) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub endpoint: Vec<f64>,
    /// Accepted-step samples (s, x) when dense output was requested.
    pub trajectory: Option<Vec<(f64, Vec<f64>)>>,
    pub steps: usize,
    pub est_error: f64,
}

fn check_duration(p: f64) -> Result<()> {
    if p >= 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(alloc::format!("flow duration must be finite and >= 0, got {p}")))
    }
}

/// F_{t,p}(x): the time-p flow of X_t.
pub fn flow_map(fam: &dyn VectorFieldFamily, x: &[f64], p: f64, t: f64, cfg: &Config) -> Result<FlowResult> {
    flow_map_opts(fam, x, p, t, cfg, false)
}

pub fn flow_map_opts(
    fam: &dyn VectorFieldFamily,
    x: &[f64],
    p: f64,
    t: f64,
    cfg: &Config,
    keep_trajectory: bool,
) -> Result<FlowResult> {
    check_duration(p)?;
    check_on_manifold(fam.manifold(), x, cfg.metric_tol)?;
    let m = fam.manifold();
    let sol = integrate(
        |y, dy| fam.eval_into(y, t, dy),
        x,
        p,
        &cfg.integrator,
        |y| {
            let r = m.retract(y);
            y.copy_from_slice(&r);
        },
        keep_trajectory,
    )?;
    let trajectory = sol.dense.map(|d| {
        d.mesh().into_iter().map(|s| (s, if s == 0.0 { x.to_vec() } else { m.retract(&d.eval(s)) })).collect()
    });
    Ok(FlowResult { endpoint: sol.y, trajectory, steps: sol.steps, est_error: sol.est_error })
}

/// Flow with a dense interpolant of the state.
pub fn flow_dense(fam: &dyn VectorFieldFamily, x: &[f64], p: f64, t: f64, cfg: &Config) -> Result<(Vec<f64>, Dense)> {
    check_duration(p)?;
    check_on_manifold(fam.manifold(), x, cfg.metric_tol)?;
    let m = fam.manifold();
    let sol = integrate(
        |y, dy| fam.eval_into(y, t, dy),
        x,
        p,
        &cfg.integrator,
        |y| {
            let r = m.retract(y);
            y.copy_from_slice(&r);
        },
        true,
    )?;
    Ok((sol.y, sol.dense.unwrap_or_default()))
}

/// Ambient Jacobian of X_t: closed form when registered, otherwise central
/// differences along an orthonormal tangent basis (so J = DX P).
pub fn field_jacobian(fam: &dyn VectorFieldFamily, x: &[f64], t: f64, h: f64) -> DMatrix<f64> {
    if let Some(j) = fam.jacobian(x, t) {
        return j;
    }
    let n = x.len();
    let basis = fam.manifold().tangent_basis(x);
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = vec![0.0; n];
    let mut xm = vec![0.0; n];
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for k in 0..basis.ncols() {
        for i in 0..n {
            xp[i] = x[i] + h * basis[(i, k)];
            xm[i] = x[i] - h * basis[(i, k)];
        }
        fam.eval_into(&xp, t, &mut fp);
        fam.eval_into(&xm, t, &mut fm);
        for i in 0..n {
            let d = (fp[i] - fm[i]) / (2.0 * h);
            for j in 0..n {
                jac[(i, j)] += d * basis[(j, k)];
            }
        }
    }
    jac
}

/// dX_t/dt by central differences, one-sided at the ends of [0, 1].
pub fn field_t_derivative(fam: &dyn VectorFieldFamily, x: &[f64], t: f64, h: f64) -> Vec<f64> {
    if fam.t_independent() {
        return vec![0.0; x.len()];
    }
    let (ta, tb) = if t - h < 0.0 {
        (t, t + h)
    } else if t + h > 1.0 {
        (t - h, t)
    } else {
        (t - h, t + h)
    };
    let fa = fam.eval(x, ta);
    let fb = fam.eval(x, tb);
    fa.iter().zip(&fb).map(|(a, b)| (b - a) / (tb - ta)).collect()
}

#[derive(Clone, Debug)]
pub struct VariationalSolution {
    pub endpoint: Vec<f64>,
    /// dF_{t,p} in ambient coordinates.
    pub matrix: DMatrix<f64>,
    /// d F_{t,p}(x) / dt, when requested.
    pub param_sensitivity: Option<Vec<f64>>,
    /// Interpolant of the augmented state (x, V column-major[, w]).
    pub dense: Option<Dense>,
    pub steps: usize,
}

impl VariationalSolution {
    /// Point and matrix parts of the dense interpolant at time s.
    pub fn dense_at(&self, s: f64) -> Option<(Vec<f64>, DMatrix<f64>)> {
        let d = self.dense.as_ref()?;
        let n = self.endpoint.len();
        let y = d.eval(s);
        Some((y[..n].to_vec(), DMatrix::from_column_slice(n, n, &y[n..n + n * n])))
    }
}

/// Integrates x' = X_t(x), V' = DX_t(x) V (and optionally the parameter
/// sensitivity w' = DX_t w + dX_t/dt) with shared error control.
pub fn variational(
    fam: &dyn VectorFieldFamily,
    x: &[f64],
    p: f64,
    t: f64,
    cfg: &Config,
    with_param: bool,
    keep_dense: bool,
) -> Result<VariationalSolution> {
    check_duration(p)?;
    check_on_manifold(fam.manifold(), x, cfg.metric_tol)?;
    let m = fam.manifold();
    let n = x.len();
    let extra = if with_param { n } else { 0 };
    let mut y0 = vec![0.0; n + n * n + extra];
    y0[..n].copy_from_slice(x);
    for i in 0..n {
        y0[n + i * n + i] = 1.0;
    }
    let h = cfg.fd_step;
    let sol = integrate(
        |y, dy| {
            let xs = &y[..n];
            fam.eval_into(xs, t, &mut dy[..n]);
            let j = field_jacobian(fam, xs, t, h);
            // column-major V: column c occupies y[n + c n .. n + (c + 1) n]
            for c in 0..n {
                let col = &y[n + c * n..n + (c + 1) * n];
                for r in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += j[(r, k)] * col[k];
                    }
                    dy[n + c * n + r] = acc;
                }
            }
            if with_param {
                let w = &y[n + n * n..];
                let dt = field_t_derivative(fam, xs, t, h);
                for r in 0..n {
                    let mut acc = dt[r];
                    for k in 0..n {
                        acc += j[(r, k)] * w[k];
                    }
                    dy[n + n * n + r] = acc;
                }
            }
        },
        &y0,
        p,
        &cfg.integrator,
        |y| {
            let r = m.retract(&y[..n]);
            y[..n].copy_from_slice(&r);
        },
        keep_dense,
    )?;
    let matrix = DMatrix::from_column_slice(n, n, &sol.y[n..n + n * n]);
    let param_sensitivity = if with_param { Some(sol.y[n + n * n..].to_vec()) } else { None };
    Ok(VariationalSolution {
        endpoint: sol.y[..n].to_vec(),
        matrix,
        param_sensitivity,
        dense: sol.dense,
        steps: sol.steps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monodromy {
    /// Ambient linearization of F_{t,p} at x.
    pub matrix: DMatrix<f64>,
    /// Section-to-section restriction: from T_xM cut by X(x)^perp to
    /// T_yM cut by X(y)^perp, projecting along X(y).
    pub restricted: DMatrix<f64>,
    pub endpoint: Vec<f64>,
    /// Largest entry of the component of V E_x that leaves T_yM.
    pub projection_defect: f64,
}

pub fn monodromy(fam: &dyn VectorFieldFamily, x: &[f64], p: f64, t: f64, cfg: &Config) -> Result<Monodromy> {
    let sol = variational(fam, x, p, t, cfg, false, false)?;
    let m = fam.manifold();
    let y = &sol.endpoint;
    let vx = fam.eval(x, t);
    let vy = fam.eval(y, t);
    let ex = m.section_basis(x, &vx);
    let ey = m.section_basis(y, &vy);
    let ny = linalg::scale(&vy, 1.0 / linalg::norm(&vy));
    let n = x.len();
    let mut q = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] -= ny[i] * ny[j];
        }
    }
    let restricted = ey.transpose() * &q * &sol.matrix * &ex;
    let py = m.tangent_projector(y);
    let leak = (DMatrix::identity(n, n) - py) * &sol.matrix * m.tangent_basis(x);
    Ok(Monodromy { matrix: sol.matrix, restricted, endpoint: sol.endpoint, projection_defect: leak.abs().max() })
}
