//! Constraint-defined manifolds, tangent vector field families and
//! conformal families of contact forms.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)] // needed without std, where f64 has no inherent math
use num_traits::{Euclid, Float};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg::{self, halton, orthonormal_complement, PRIMES};

const TAU: f64 = 2.0 * PI;

/// Built-in manifolds. Points are stored in ambient coordinates; angle
/// coordinates are kept unwrapped during integration and compared modulo 2pi.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Manifold {
    /// Unit sphere in R^ambient, constraint |x|^2 - 1 = 0.
    Sphere { ambient: usize },
    /// Flat two-torus in angle coordinates (theta1, theta2), no constraint.
    Torus2,
    /// D^2 x S^1 in coordinates (u, v, z): u^2 + v^2 <= 1, z periodic.
    SolidTorus,
    /// Ordered k-fold product of a base manifold.
    Product { base: Box<Manifold>, k: usize },
}

impl Manifold {
    pub fn sphere3() -> Self {
        Manifold::Sphere { ambient: 4 }
    }

    pub fn name(&self) -> String {
        match self {
            Manifold::Sphere { ambient } => alloc::format!("S{}", ambient - 1),
            Manifold::Torus2 => "T2".into(),
            Manifold::SolidTorus => "solid-torus".into(),
            Manifold::Product { base, k } => alloc::format!("{}^{}", base.name(), k),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Sphere { ambient } => *ambient,
            Manifold::Torus2 => 2,
            Manifold::SolidTorus => 3,
            Manifold::Product { base, k } => base.ambient_dim() * k,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Manifold::Sphere { ambient } => ambient - 1,
            Manifold::Torus2 => 2,
            Manifold::SolidTorus => 3,
            Manifold::Product { base, k } => base.dim() * k,
        }
    }

    /// Indices of angle coordinates.
    pub fn periodic_coords(&self) -> Vec<usize> {
        match self {
            Manifold::Sphere { .. } => Vec::new(),
            Manifold::Torus2 => vec![0, 1],
            Manifold::SolidTorus => vec![2],
            Manifold::Product { base, k } => {
                let n = base.ambient_dim();
                let inner = base.periodic_coords();
                (0..*k).flat_map(|b| inner.iter().map(move |i| b * n + i)).collect()
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Manifold::Sphere { .. } => 2.0,
            Manifold::Torus2 => PI * 2.0.sqrt(),
            Manifold::SolidTorus => (4.0 + PI * PI).sqrt(),
            Manifold::Product { base, k } => base.diameter() * (*k as f64).sqrt(),
        }
    }

    pub fn constraint(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Manifold::Sphere { .. } => vec![linalg::dot(x, x) - 1.0],
            Manifold::Torus2 | Manifold::SolidTorus => Vec::new(),
            Manifold::Product { base, k } => {
                let n = base.ambient_dim();
                (0..*k).flat_map(|b| base.constraint(&x[b * n..(b + 1) * n])).collect()
            }
        }
    }

    /// Gradients of the constraint functions, one row per constraint.
    pub fn constraint_gradients(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self {
            Manifold::Sphere { .. } => vec![linalg::scale(x, 2.0)],
            Manifold::Torus2 | Manifold::SolidTorus => Vec::new(),
            Manifold::Product { base, k } => {
                let n = base.ambient_dim();
                let mut rows = Vec::new();
                for b in 0..*k {
                    for g in base.constraint_gradients(&x[b * n..(b + 1) * n]) {
                        let mut row = vec![0.0; n * k];
                        row[b * n..(b + 1) * n].copy_from_slice(&g);
                        rows.push(row);
                    }
                }
                rows
            }
        }
    }

    /// Membership defect: constraint residual plus any excursion outside the
    /// solid-torus disk.
    pub fn residual(&self, x: &[f64]) -> f64 {
        match self {
            Manifold::SolidTorus => (x[0] * x[0] + x[1] * x[1] - 1.0).max(0.0),
            Manifold::Product { base, k } => {
                let n = base.ambient_dim();
                (0..*k).fold(0.0, |m, b| m.max(base.residual(&x[b * n..(b + 1) * n])))
            }
            _ => linalg::max_abs(&self.constraint(x)),
        }
    }

    pub fn retract(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Manifold::Sphere { .. } => {
                let r = linalg::norm(y);
                linalg::scale(y, 1.0 / r)
            }
            Manifold::Torus2 | Manifold::SolidTorus => y.to_vec(),
            Manifold::Product { base, k } => {
                let n = base.ambient_dim();
                (0..*k).flat_map(|b| base.retract(&y[b * n..(b + 1) * n])).collect()
            }
        }
    }

    /// Orthonormal basis of T_xM as columns of an `ambient x dim` matrix.
    pub fn tangent_basis(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            Manifold::Torus2 | Manifold::SolidTorus => DMatrix::identity(self.ambient_dim(), self.dim()),
            _ => orthonormal_complement(&self.constraint_gradients(x), self.ambient_dim()),
        }
    }

    pub fn tangent_projector(&self, x: &[f64]) -> DMatrix<f64> {
        let b = self.tangent_basis(x);
        &b * b.transpose()
    }

    /// Orthonormal basis of T_xM intersected with the hyperplane orthogonal to `normal`.
    pub fn section_basis(&self, x: &[f64], normal: &[f64]) -> DMatrix<f64> {
        let mut span = self.constraint_gradients(x);
        span.push(normal.to_vec());
        orthonormal_complement(&span, self.ambient_dim())
    }

    /// b - a with angle coordinates reduced to (-pi, pi].
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d = linalg::sub(b, a);
        for i in self.periodic_coords() {
            d[i] = wrap_angle(d[i]);
        }
        d
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        linalg::norm(&self.displacement(a, b))
    }

    /// Canonical coordinates: angles reduced to [0, 2pi).
    pub fn wrap(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for i in self.periodic_coords() {
            y[i] = Euclid::rem_euclid(&y[i], &TAU);
            if y[i] >= TAU {
                y[i] = 0.0;
            }
        }
        y
    }

    /// Integer winding of each angle coordinate along an unwrapped path.
    pub fn windings(&self, start: &[f64], end_unwrapped: &[f64]) -> Vec<i64> {
        match self {
            Manifold::Sphere { .. } => vec![0],
            _ => self
                .periodic_coords()
                .iter()
                .map(|&i| ((end_unwrapped[i] - start[i]) / TAU).round() as i64)
                .collect(),
        }
    }

    /// Smooth periodic features used to pick a canonical phase on an orbit.
    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Manifold::Sphere { .. } => x.to_vec(),
            Manifold::Torus2 => vec![x[0].cos(), x[0].sin(), x[1].cos(), x[1].sin()],
            Manifold::SolidTorus => vec![x[0], x[1], x[2].cos(), x[2].sin()],
            Manifold::Product { base, k } => {
                let n = base.ambient_dim();
                (0..*k).flat_map(|b| base.features(&x[b * n..(b + 1) * n])).collect()
            }
        }
    }

    /// Deterministic low-discrepancy points on M (Halton sequence).
    pub fn seed_net(&self, count: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut i = 1usize;
        while out.len() < count && i < 64 * count + 64 {
            match self {
                Manifold::Sphere { ambient } => {
                    let y: Vec<f64> =
                        (0..*ambient).map(|d| 2.0 * halton(i, PRIMES[d % PRIMES.len()]) - 1.0).collect();
                    let r = linalg::norm(&y);
                    if (0.2..=1.0).contains(&r) {
                        out.push(linalg::scale(&y, 1.0 / r));
                    }
                }
                Manifold::Torus2 => out.push(vec![TAU * halton(i, 2), TAU * halton(i, 3)]),
                Manifold::SolidTorus => {
                    let r = 0.9 * halton(i, 2).sqrt();
                    let phi = TAU * halton(i, 3);
                    out.push(vec![r * phi.cos(), r * phi.sin(), TAU * halton(i, 5)]);
                }
                Manifold::Product { .. } => break,
            }
            i += 1;
        }
        out
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut r = Euclid::rem_euclid(&(a + PI), &TAU) - PI;
    if r <= -PI {
        r += TAU;
    }
    r
}

/// A smooth family {X_t}, t in [0, 1], of tangent vector fields on a
/// built-in manifold. `eval_into` must accept points in a small ambient
/// neighbourhood of M: finite differences probe off the manifold.
pub trait VectorFieldFamily: Send + Sync {
    fn manifold(&self) -> &Manifold;

    fn label(&self) -> &str;

    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]);

    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, t, &mut out);
        out
    }

    /// Closed-form ambient Jacobian, if one is registered.
    fn jacobian(&self, _x: &[f64], _t: f64) -> Option<DMatrix<f64>> {
        None
    }

    fn t_independent(&self) -> bool {
        false
    }
}

/// Evaluates X_t(x) after checking that x is on M and t is in [0, 1].
pub fn eval_field(fam: &dyn VectorFieldFamily, x: &[f64], t: f64, cfg: &Config) -> Result<Vec<f64>> {
    check_param(t)?;
    check_on_manifold(fam.manifold(), x, cfg.metric_tol)?;
    Ok(fam.eval(x, t))
}

pub fn check_param(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::ParamOutOfRange(t))
    }
}

pub fn check_on_manifold(m: &Manifold, x: &[f64], tol: f64) -> Result<()> {
    if x.len() != m.ambient_dim() {
        return Err(Error::InvalidArgument(alloc::format!(
            "point has {} coordinates, manifold {} needs {}",
            x.len(),
            m.name(),
            m.ambient_dim()
        )));
    }
    let residual = m.residual(x);
    if residual > tol || !residual.is_finite() {
        return Err(Error::OffManifold { residual });
    }
    Ok(())
}

/// |P v - v| for the field at x: how far the returned vector leaves T_xM.
pub fn tangency_defect(fam: &dyn VectorFieldFamily, x: &[f64], t: f64) -> f64 {
    let v = fam.eval(x, t);
    let pv = linalg::mat_vec(&fam.manifold().tangent_projector(x), &v);
    linalg::norm(&linalg::sub(&pv, &v))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonsingularReport {
    pub min_norm: f64,
    pub witness: (Vec<f64>, f64),
}

pub fn check_nonsingular(
    fam: &dyn VectorFieldFamily,
    net: &[(Vec<f64>, f64)],
    cfg: &Config,
) -> Result<NonsingularReport> {
    let mut best: Option<NonsingularReport> = None;
    for (x, t) in net {
        let v = eval_field(fam, x, *t, cfg)?;
        let n = linalg::norm(&v);
        if best.as_ref().map_or(true, |b| n < b.min_norm) {
            best = Some(NonsingularReport { min_norm: n, witness: (x.clone(), *t) });
        }
    }
    best.ok_or(Error::EmptyNet)
}

/// Base contact forms with closed-form exterior derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseForm {
    /// lambda = x1 dx2 - x2 dx1 + x3 dx4 - x4 dx3 on S^3; its Reeb field is
    /// the Hopf field with period 2pi.
    StandardSphere3,
}

impl BaseForm {
    pub fn manifold(&self) -> Manifold {
        Manifold::sphere3()
    }

    pub fn covector(&self, x: &[f64]) -> Vec<f64> {
        match self {
            BaseForm::StandardSphere3 => vec![-x[1], x[0], -x[3], x[2]],
        }
    }

    /// Matrix W with d(lambda)(u, v) = u^T W v.
    pub fn exterior_derivative(&self, _x: &[f64]) -> DMatrix<f64> {
        match self {
            BaseForm::StandardSphere3 => {
                let mut w = DMatrix::zeros(4, 4);
                w[(0, 1)] = 2.0;
                w[(1, 0)] = -2.0;
                w[(2, 3)] = 2.0;
                w[(3, 2)] = -2.0;
                w
            }
        }
    }

    /// Oriented orthonormal frame of the contact plane. On S^3 this global
    /// frame is homotopic to the one induced by any bounding disk.
    pub fn xi_frame(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            BaseForm::StandardSphere3 => {
                let r = linalg::norm(x);
                (
                    vec![-x[2] / r, x[3] / r, x[0] / r, -x[1] / r],
                    vec![-x[3] / r, -x[2] / r, x[1] / r, x[0] / r],
                )
            }
        }
    }
}

/// Morse functions on the orbit space of the Hopf fibration, pulled back to S^3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MorseFunction {
    /// Height on CP^1 = S^2 pulled back by the Hopf map: |z1|^2 - |z2|^2.
    /// Perfect: a minimum (fibre z1 = 0) and a maximum (fibre z2 = 0).
    HopfHeight,
}

impl MorseFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            MorseFunction::HopfHeight => x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - x[3] * x[3],
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MorseFunction::HopfHeight => vec![2.0 * x[0], 2.0 * x[1], -2.0 * x[2], -2.0 * x[3]],
        }
    }

    /// Critical fibres as (point on the fibre, Morse index on CP^1).
    pub fn critical_fibres(&self) -> Vec<(Vec<f64>, u32)> {
        match self {
            MorseFunction::HopfHeight => vec![(vec![0.0, 0.0, 1.0, 0.0], 0), (vec![1.0, 0.0, 0.0, 0.0], 2)],
        }
    }

    pub fn max_abs(&self) -> f64 {
        1.0
    }
}

/// The positive factor f_t(x) in lambda_t = f_t lambda.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConformalFactor {
    /// f_t = 1 + eps t.
    Rescale { eps: f64 },
    /// f_t = 1 + s(t) mu f(x) with s = 1, or s = 1 - t along the structure
    /// homotopy back to the unperturbed form.
    Morse { mu: f64, morse: MorseFunction, structure: bool },
}

impl ConformalFactor {
    fn weight(&self, t: f64) -> f64 {
        match self {
            ConformalFactor::Morse { structure: true, .. } => 1.0 - t,
            _ => 1.0,
        }
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        match self {
            ConformalFactor::Rescale { eps } => 1.0 + eps * t,
            ConformalFactor::Morse { mu, morse, .. } => 1.0 + self.weight(t) * mu * morse.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        match self {
            ConformalFactor::Rescale { .. } => vec![0.0; x.len()],
            ConformalFactor::Morse { mu, morse, .. } => linalg::scale(&morse.gradient(x), self.weight(t) * mu),
        }
    }

    pub fn t_derivative(&self, x: &[f64], _t: f64) -> f64 {
        match self {
            ConformalFactor::Rescale { eps } => *eps,
            ConformalFactor::Morse { mu, morse, structure } => {
                if *structure {
                    -mu * morse.value(x)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn t_independent(&self) -> bool {
        match self {
            ConformalFactor::Rescale { eps } => *eps == 0.0,
            ConformalFactor::Morse { structure, mu, .. } => !structure || *mu == 0.0,
        }
    }
}

/// lambda_t = f_t lambda with f_t > 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactFormFamily {
    pub label: String,
    pub base: BaseForm,
    pub factor: ConformalFactor,
}

impl ContactFormFamily {
    pub fn new(label: &str, base: BaseForm, factor: ConformalFactor) -> Self {
        Self { label: label.into(), base, factor }
    }

    pub fn standard() -> Self {
        Self::new("standard", BaseForm::StandardSphere3, ConformalFactor::Rescale { eps: 0.0 })
    }

    pub fn manifold(&self) -> Manifold {
        self.base.manifold()
    }

    pub fn covector(&self, x: &[f64], t: f64) -> Vec<f64> {
        linalg::scale(&self.base.covector(x), self.factor.value(x, t))
    }

    pub fn evaluate(&self, x: &[f64], t: f64, v: &[f64]) -> f64 {
        linalg::dot(&self.covector(x, t), v)
    }

    /// Closed form d(f lambda) = df ^ lambda + f d(lambda).
    pub fn exterior_derivative(&self, x: &[f64], t: f64) -> DMatrix<f64> {
        let lam = self.base.covector(x);
        let df = self.factor.gradient(x, t);
        let f = self.factor.value(x, t);
        let n = x.len();
        let mut w = self.base.exterior_derivative(x) * f;
        for i in 0..n {
            for j in 0..n {
                w[(i, j)] += df[i] * lam[j] - df[j] * lam[i];
            }
        }
        w
    }

    /// Central-difference exterior derivative; a cross-check on the closed form.
    pub fn exterior_derivative_fd(&self, x: &[f64], t: f64, h: f64) -> DMatrix<f64> {
        let n = x.len();
        let mut jac = DMatrix::zeros(n, n); // jac[(i, j)] = d alpha_j / d x_i
        for i in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let ap = self.covector(&xp, t);
            let am = self.covector(&xm, t);
            for j in 0..n {
                jac[(i, j)] = (ap[j] - am[j]) / (2.0 * h);
            }
        }
        &jac - jac.transpose()
    }

    pub fn t_independent(&self) -> bool {
        self.factor.t_independent()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let r = linalg::norm(&v);
        linalg::scale(&v, 1.0 / r)
    }

    #[test]
    fn retraction_is_identity_on_manifold() {
        for m in [Manifold::sphere3(), Manifold::Torus2, Manifold::SolidTorus] {
            for x in m.seed_net(50) {
                let r = m.retract(&x);
                assert!(linalg::max_abs(&linalg::sub(&r, &x)) <= 1e-12, "{}", m.name());
            }
        }
    }

    #[test]
    fn seed_nets_lie_on_their_manifolds() {
        for m in [Manifold::sphere3(), Manifold::Torus2, Manifold::SolidTorus] {
            let net = m.seed_net(256);
            assert_eq!(net.len(), 256);
            assert!(net.iter().all(|x| m.residual(x) <= 1e-12));
        }
    }

    #[test]
    fn displacement_wraps_angles() {
        let m = Manifold::SolidTorus;
        let d = m.displacement(&[0.0, 0.0, 0.1], &[0.0, 0.0, 0.1 + 4.0 * PI + 1e-3]);
        assert!((d[2] - 1e-3).abs() < 1e-12);
        assert_eq!(m.windings(&[0.0, 0.0, 0.0], &[0.0, 0.0, 2.0 * TAU + 0.01]), vec![2]);
    }

    #[test]
    fn product_blocks_match_base() {
        let base = Manifold::sphere3();
        let p = Manifold::Product { base: Box::new(base.clone()), k: 3 };
        assert_eq!(p.ambient_dim(), 12);
        assert_eq!(p.dim(), 9);
        let x: Vec<f64> = base.seed_net(3).concat();
        assert!(p.residual(&x) < 1e-12);
        assert_eq!(p.tangent_basis(&x).ncols(), 9);
    }

    #[test]
    fn standard_form_exterior_derivative_matches_finite_differences() {
        let fam = ContactFormFamily::new(
            "perturbed",
            BaseForm::StandardSphere3,
            ConformalFactor::Morse { mu: 0.3, morse: MorseFunction::HopfHeight, structure: true },
        );
        let x = unit(vec![0.3, -0.5, 0.7, 0.2]);
        let exact = fam.exterior_derivative(&x, 0.4);
        let fd = fam.exterior_derivative_fd(&x, 0.4, 1e-6);
        assert!((exact - fd).abs().max() < 1e-8);
    }

    #[test]
    fn xi_frame_spans_the_kernel_with_positive_orientation() {
        let b = BaseForm::StandardSphere3;
        let x = unit(vec![0.1, 0.9, -0.3, 0.4]);
        let (e1, e2) = b.xi_frame(&x);
        let lam = b.covector(&x);
        assert!(linalg::dot(&lam, &e1).abs() < 1e-14 && linalg::dot(&lam, &e2).abs() < 1e-14);
        assert!(linalg::dot(&x, &e1).abs() < 1e-14 && linalg::dot(&x, &e2).abs() < 1e-14);
        assert!(linalg::dot(&e1, &e2).abs() < 1e-14);
        let w = b.exterior_derivative(&x);
        let omega = linalg::dot(&e1, &linalg::mat_vec(&w, &e2));
        assert!((omega - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sphere_projector_is_idempotent_and_normal_free(
            a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0,
            v in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            prop_assume!(a * a + b * b + c * c + d * d > 1e-2);
            let m = Manifold::sphere3();
            let x = unit(vec![a, b, c, d]);
            let p = m.tangent_projector(&x);
            prop_assert!((&p * &p - &p).abs().max() <= 1e-12);
            let pv = linalg::mat_vec(&p, &v);
            for g in m.constraint_gradients(&x) {
                prop_assert!(linalg::dot(&g, &pv).abs() <= 1e-10);
            }
        }

        #[test]
        fn sphere_retraction_lands_on_sphere(
            v in proptest::collection::vec(-1.0f64..1.0, 4),
            r in 0.5f64..1.5,
        ) {
            prop_assume!(linalg::norm(&v) > 0.1);
            let y = linalg::scale(&v, r / linalg::norm(&v));
            let m = Manifold::sphere3();
            prop_assert!(m.residual(&m.retract(&y)) <= 1e-9);
        }
    }
}
