//! Built-in closed-form fields and the scenario description format.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)] // needed without std, where f64 has no inherent math
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::flow;
use crate::geometry::{BaseForm, ConformalFactor, ContactFormFamily, Manifold, MorseFunction, VectorFieldFamily};
use crate::linalg;
use crate::orbits::PeriodicOrbit;
use crate::reeb::ReebField;

/// H(x) = (-x2, x1, -x4, x3, ...) on the unit sphere of even ambient dimension.
#[derive(Clone, Debug)]
pub struct HopfField {
    manifold: Manifold,
}

impl HopfField {
    pub fn new(ambient: usize) -> Self {
        assert!(ambient % 2 == 0 && ambient >= 2, "Hopf field needs an even ambient dimension");
        Self { manifold: Manifold::Sphere { ambient } }
    }
}

fn hopf_into(x: &[f64], out: &mut [f64]) {
    for b in 0..x.len() / 2 {
        out[2 * b] = -x[2 * b + 1];
        out[2 * b + 1] = x[2 * b];
    }
}

fn hopf_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, n);
    for b in 0..n / 2 {
        j[(2 * b, 2 * b + 1)] = -1.0;
        j[(2 * b + 1, 2 * b)] = 1.0;
    }
    j
}

impl VectorFieldFamily for HopfField {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }
    fn label(&self) -> &str {
        "hopf"
    }
    fn eval_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        hopf_into(x, out);
    }
    fn jacobian(&self, x: &[f64], _t: f64) -> Option<DMatrix<f64>> {
        Some(hopf_matrix(x.len()))
    }
    fn t_independent(&self) -> bool {
        true
    }
}

/// X_t = (1 + eps t) Y_t for an inner family Y.
pub struct ScaledField {
    inner: Box<dyn VectorFieldFamily>,
    eps: f64,
    label: String,
}

impl ScaledField {
    pub fn new(inner: Box<dyn VectorFieldFamily>, eps: f64) -> Self {
        let label = format!("scaled({})", inner.label());
        Self { inner, eps, label }
    }
}

impl VectorFieldFamily for ScaledField {
    fn manifold(&self) -> &Manifold {
        self.inner.manifold()
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        self.inner.eval_into(x, t, out);
        let s = 1.0 + self.eps * t;
        for v in out.iter_mut() {
            *v *= s;
        }
    }
    fn jacobian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        self.inner.jacobian(x, t).map(|j| j * (1.0 + self.eps * t))
    }
    fn t_independent(&self) -> bool {
        self.eps == 0.0 && self.inner.t_independent()
    }
}

/// Blue-sky family on the solid torus in coordinates (u, v, z):
///
/// u' = kappa u (a^2 - u^2) / a^2, v' = -kappa v,
/// z' = omega [(1 - t) + t rho(u, v)], rho = ((u - a)^2 + v^2) / a^2.
///
/// The circles u in {0, a, -a}, v = 0 are periodic with periods 2pi/omega,
/// 2pi/(omega (1 - t)) and 2pi/(omega (1 + 3t)). The field vanishes only on
/// the circle u = a at t = 1, so the branch through it leaves every period cap
/// before t = 1. The flow points inward on the boundary circle r = 1.
#[derive(Clone, Debug)]
pub struct BlueSkyTorus {
    pub kappa: f64,
    pub a: f64,
    pub omega: f64,
    manifold: Manifold,
}

impl BlueSkyTorus {
    pub fn new(kappa: f64, a: f64, omega: f64) -> Self {
        Self { kappa, a, omega, manifold: Manifold::SolidTorus }
    }

    pub fn standard() -> Self {
        Self::new(0.2, 0.5, 1.0)
    }

    /// Closed-form period of the witness circle u = a.
    pub fn witness_period(&self, t: f64) -> f64 {
        2.0 * PI / (self.omega * (1.0 - t))
    }

    /// The three periodic circles at parameter t as (point, period, index).
    pub fn closed_orbits(&self, t: f64) -> Vec<(Vec<f64>, f64, i32)> {
        vec![
            (vec![0.0, 0.0, 0.0], 2.0 * PI / self.omega, -1),
            (vec![self.a, 0.0, 0.0], self.witness_period(t), 1),
            (vec![-self.a, 0.0, 0.0], 2.0 * PI / (self.omega * (1.0 + 3.0 * t)), 1),
        ]
    }
}

impl VectorFieldFamily for BlueSkyTorus {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }
    fn label(&self) -> &str {
        "blue-sky-torus"
    }
    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let (u, v) = (x[0], x[1]);
        let a2 = self.a * self.a;
        let rho = ((u - self.a) * (u - self.a) + v * v) / a2;
        out[0] = self.kappa * u * (a2 - u * u) / a2;
        out[1] = -self.kappa * v;
        out[2] = self.omega * ((1.0 - t) + t * rho);
    }
    fn jacobian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        let (u, v) = (x[0], x[1]);
        let a2 = self.a * self.a;
        let mut j = DMatrix::zeros(3, 3);
        j[(0, 0)] = self.kappa * (a2 - 3.0 * u * u) / a2;
        j[(1, 1)] = -self.kappa;
        j[(2, 0)] = self.omega * t * 2.0 * (u - self.a) / a2;
        j[(2, 1)] = self.omega * t * 2.0 * v / a2;
        Some(j)
    }
}

/// Constant field (1, slope) on the flat two-torus.
#[derive(Clone, Debug)]
pub struct TorusLinear {
    pub slope: f64,
    manifold: Manifold,
}

impl TorusLinear {
    pub fn new(slope: f64) -> Self {
        Self { slope, manifold: Manifold::Torus2 }
    }
}

impl VectorFieldFamily for TorusLinear {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }
    fn label(&self) -> &str {
        "torus-linear"
    }
    fn eval_into(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = self.slope;
    }
    fn jacobian(&self, _x: &[f64], _t: f64) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(2, 2))
    }
    fn t_independent(&self) -> bool {
        true
    }
}

/// H(x) + delta P_x(C x) on S^3 with C = diag(1, 1, -1, -1) + N, where N is
/// the anti-linear map (z1, z2) -> (conj z2, conj z1). The diagonal part
/// drives the orbit space towards the fibre z2 = 0; N averages out along
/// the fibres. |X - H| <= 2 delta, so the family is C^0 delta-close to H.
#[derive(Clone, Debug)]
pub struct HopfC0Near {
    pub delta: f64,
    manifold: Manifold,
}

impl HopfC0Near {
    pub fn new(delta: f64) -> Self {
        Self { delta, manifold: Manifold::sphere3() }
    }

    fn c_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 1.0, 0.0, -1.0, 0.0, 0.0, -1.0, 0.0, -1.0],
        )
    }
}

impl VectorFieldFamily for HopfC0Near {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }
    fn label(&self) -> &str {
        "hopf-c0-near"
    }
    fn eval_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        hopf_into(x, out);
        let c = Self::c_matrix();
        let cx = linalg::mat_vec(&c, x);
        let q = linalg::dot(x, &cx);
        for i in 0..4 {
            out[i] += self.delta * (cx[i] - q * x[i]);
        }
    }
    fn jacobian(&self, x: &[f64], _t: f64) -> Option<DMatrix<f64>> {
        let c = Self::c_matrix();
        let cx = linalg::mat_vec(&c, x);
        let q = linalg::dot(x, &cx);
        let sym = &c + c.transpose();
        let grad_q = linalg::mat_vec(&sym, x);
        let mut j = hopf_matrix(4);
        for i in 0..4 {
            for k in 0..4 {
                let id = if i == k { 1.0 } else { 0.0 };
                j[(i, k)] += self.delta * (c[(i, k)] - x[i] * grad_q[k] - q * id);
            }
        }
        Some(j)
    }
    fn t_independent(&self) -> bool {
        true
    }
}

/// Loop-space distance from an orbit of a perturbed field to the Hopf orbit
/// through the same base point: sup over samples of |o(s) - h(s 2pi m / p)|
/// plus |p - 2pi m|, with m the multiplicity.
pub fn hopf_loop_distance(
    fam: &dyn VectorFieldFamily,
    orbit: &PeriodicOrbit,
    samples: usize,
    cfg: &Config,
) -> Result<f64> {
    let (_, dense) = flow::flow_dense(fam, &orbit.base, orbit.period, orbit.param_t, cfg)?;
    let m = orbit.multiplicity.max(1) as f64;
    let mut sup = 0.0f64;
    for j in 0..=samples {
        let s = orbit.period * j as f64 / samples as f64;
        let o = dense.eval(s);
        let phase = s * 2.0 * PI * m / orbit.period;
        let (c, sn) = (phase.cos(), phase.sin());
        let x = &orbit.base;
        let h = [c * x[0] - sn * x[1], sn * x[0] + c * x[1], c * x[2] - sn * x[3], sn * x[2] + c * x[3]];
        sup = sup.max(linalg::norm(&linalg::sub(&o, &h)));
    }
    Ok(sup + (orbit.period - 2.0 * PI * m).abs())
}

/// Field families a scenario file can name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum FamilySpec {
    Hopf,
    Scaled { eps: f64, inner: Box<FamilySpec> },
    BlueSkyTorus { kappa: f64, a: f64, omega: f64 },
    TorusLinear { slope: f64 },
    HopfC0Near { delta: f64 },
    /// Reeb field of a contact form family.
    Reeb { contact: ContactFormFamily },
}

impl FamilySpec {
    pub fn build(&self) -> Box<dyn VectorFieldFamily> {
        match self {
            FamilySpec::Hopf => Box::new(HopfField::new(4)),
            FamilySpec::Scaled { eps, inner } => Box::new(ScaledField::new(inner.build(), *eps)),
            FamilySpec::BlueSkyTorus { kappa, a, omega } => Box::new(BlueSkyTorus::new(*kappa, *a, *omega)),
            FamilySpec::TorusLinear { slope } => Box::new(TorusLinear::new(*slope)),
            FamilySpec::HopfC0Near { delta } => Box::new(HopfC0Near::new(*delta)),
            FamilySpec::Reeb { contact } => Box::new(ReebField::new(contact.clone())),
        }
    }

    pub fn manifold(&self) -> Manifold {
        match self {
            FamilySpec::Hopf | FamilySpec::HopfC0Near { .. } | FamilySpec::Reeb { .. } => Manifold::sphere3(),
            FamilySpec::Scaled { inner, .. } => inner.manifold(),
            FamilySpec::BlueSkyTorus { .. } => Manifold::SolidTorus,
            FamilySpec::TorusLinear { .. } => Manifold::Torus2,
        }
    }
}

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Stated by the published construction being reproduced.
    Published,
    /// Immediate from definitions.
    Trivial,
    /// Computed from an independent closed form or method, named in `oracle`.
    Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExpectedValue {
    Bool(bool),
    Integer(i64),
    Number(f64),
    Text(String),
    Numbers(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub name: String,
    pub value: ExpectedValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub basis: Basis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    /// Increasing period caps for capped orbit sets and type classification.
    #[serde(default)]
    pub levels: Vec<f64>,
    /// Period cap for continuation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmax: Option<f64>,
    /// Cap for the orbit sets that seed continuation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub levels: usize,
    pub mu0: f64,
    pub morse: MorseFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub v: u32,
    pub id: String,
    pub description: String,
    pub manifold: Manifold,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<ContactFormFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    pub seeds: usize,
    #[serde(default)]
    pub caps: Caps,
    pub expected: Vec<Expectation>,
}

pub const SCHEMA_VERSION: u32 = 1;

impl Scenario {
    /// Structural checks beyond what deserialisation enforces.
    pub fn validate(&self) -> core::result::Result<(), String> {
        if self.v != SCHEMA_VERSION {
            return Err(format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.v));
        }
        if self.family.is_none() && self.contact.is_none() && self.perturbation.is_none() {
            return Err("scenario needs one of family, contact or perturbation".into());
        }
        if let Some(f) = &self.family {
            if f.manifold() != self.manifold {
                return Err(format!("family lives on {}, scenario declares {}", f.manifold().name(), self.manifold.name()));
            }
        }
        if (self.contact.is_some() || self.perturbation.is_some()) && self.manifold != Manifold::sphere3() {
            return Err("contact forms are only available on S3".into());
        }
        if self.seeds == 0 {
            return Err("seeds must be positive".into());
        }
        if self.caps.levels.windows(2).any(|w| w[1] <= w[0]) || self.caps.levels.iter().any(|c| !(*c > 0.0)) {
            return Err("caps.levels must be positive and strictly increasing".into());
        }
        if let Some(p) = &self.perturbation {
            if p.levels == 0 || !(p.mu0 >= 0.0) {
                return Err("perturbation needs levels >= 1 and mu0 >= 0".into());
            }
        }
        for e in &self.expected {
            if e.basis == Basis::Derived && e.oracle.as_deref().map_or(true, |o| o.trim().is_empty()) {
                return Err(format!("derived expectation '{}' must name its oracle", e.name));
            }
        }
        Ok(())
    }

    /// The field the scenario's single-field operations run on.
    pub fn field(&self) -> Box<dyn VectorFieldFamily> {
        if let Some(f) = &self.family {
            return f.build();
        }
        if let Some(c) = &self.contact {
            return Box::new(ReebField::new(c.clone()));
        }
        Box::new(ReebField::new(self.contact_form().expect("validated scenario")))
    }

    /// The contact form whose Reeb field `field` returns, if there is one.
    pub fn contact_form(&self) -> Option<ContactFormFamily> {
        if self.family.is_some() {
            return None;
        }
        if let Some(c) = &self.contact {
            return Some(c.clone());
        }
        self.perturbation.as_ref().map(|p| perturbed_contact(p.mu0, p.morse, false))
    }

    pub fn expectation(&self, name: &str) -> Option<&Expectation> {
        self.expected.iter().find(|e| e.name == name)
    }

    pub fn seed_net(&self) -> Vec<Vec<f64>> {
        self.manifold.seed_net(self.seeds)
    }
}

fn exp(name: &str, value: ExpectedValue, tol: Option<f64>, basis: Basis, oracle: Option<&str>) -> Expectation {
    Expectation { name: name.into(), value, tol, basis, oracle: oracle.map(|s| s.to_string()) }
}

pub const BUILTIN_IDS: [&str; 6] =
    ["hopf-s3", "hopf-perturbed", "hopf-rescale", "blue-sky-torus", "torus-linear", "hopf-c0-near"];

pub fn builtin(id: &str) -> Option<Scenario> {
    use Basis::*;
    use ExpectedValue::*;
    let tau = 2.0 * PI;
    let s = match id {
        "hopf-s3" => Scenario {
            v: 1,
            id: id.into(),
            description: "Round S3 with the Hopf field; every orbit has period 2pi (Morse-Bott baseline).".into(),
            manifold: Manifold::sphere3(),
            family: Some(FamilySpec::Hopf),
            contact: Some(ContactFormFamily::standard()),
            perturbation: None,
            seeds: 16,
            caps: Caps { levels: vec![7.0], pmax: None, sample: None },
            expected: vec![
                exp("period", Number(tau), Some(1e-8), Derived, Some("closed-form linear flow exp(sJ)")),
                exp("monodromy_identity_tol", Number(1e-6), None, Derived, Some("exp(2pi J) = I")),
                exp("morse_bott_suspect", Bool(true), None, Derived, Some("all orbits share the period 2pi")),
            ],
        },
        "hopf-perturbed" => Scenario {
            v: 1,
            id: id.into(),
            description: "Perturbation system (1 + mu f) lambda_std with f the pulled-back height on CP1.".into(),
            manifold: Manifold::sphere3(),
            family: None,
            contact: None,
            perturbation: Some(PerturbationSpec { levels: 3, mu0: 0.005, morse: MorseFunction::HopfHeight }),
            seeds: 12,
            caps: Caps { levels: vec![7.0, 13.0, 19.0], pmax: None, sample: Some(13.0) },
            expected: vec![
                exp("orbits_per_level", Integer(2), None, Published, None),
                exp("classification", Text("plus-infinity".into()), None, Published, None),
                exp("partial_sums", Numbers(vec![2.0, 3.0, 11.0 / 3.0]), Some(0.0), Derived, Some("sum of 1/m over two covers per level")),
                exp("cz_difference", Integer(2), None, Published, None),
                exp("max_multiplicity_at_13", Integer(2), None, Derived, Some("covers of the two critical fibres below 13")),
            ],
        },
        "hopf-rescale" => Scenario {
            v: 1,
            id: id.into(),
            description: "Reeb fields of (1 + 0.1 t) lambda_std: periods 2pi (1 + 0.1 t).".into(),
            manifold: Manifold::sphere3(),
            family: None,
            contact: Some(ContactFormFamily::new("rescale", BaseForm::StandardSphere3, ConformalFactor::Rescale { eps: 0.1 })),
            perturbation: None,
            seeds: 6,
            caps: Caps { levels: vec![7.0], pmax: Some(1000.0), sample: Some(7.0) },
            expected: vec![
                exp("verdict", Text("admissible".into()), None, Derived, Some("periods bounded by 2pi max f")),
                exp("growth_k", Number(0.11), Some(0.01), Derived, Some("max |df/dt| max f = 0.1 * 1.1")),
                exp("growth_bound", Number(0.11f64.exp()), Some(0.01), Derived, Some("exp(L K) with L = 1")),
                exp("period_ratio", Number(1.1), Some(1e-6), Derived, Some("Reeb field H / (1 + 0.1 t)")),
            ],
        },
        "blue-sky-torus" => Scenario {
            v: 1,
            id: id.into(),
            description: "Solid-torus family whose circle u = a has period 2pi / (1 - t).".into(),
            manifold: Manifold::SolidTorus,
            family: Some(FamilySpec::BlueSkyTorus { kappa: 0.2, a: 0.5, omega: 1.0 }),
            contact: None,
            perturbation: None,
            seeds: 16,
            caps: Caps { levels: vec![7.0], pmax: Some(1000.0), sample: Some(7.0) },
            expected: vec![
                exp("verdict", Text("sky-flagged".into()), None, Derived, Some("closed-form branch 2pi / (1 - t)")),
                exp("witnesses", Integer(1), None, Derived, Some("only the circle u = a loses speed")),
                exp("witness_fit", Number(0.02), None, Derived, Some("closed-form branch 2pi / (1 - t)")),
                exp("orbits_at_t0", Integer(3), None, Derived, Some("zeros of the planar part")),
                exp("fuller_sum_t0", Integer(1), None, Derived, Some("saddle -1 plus two sinks +1")),
            ],
        },
        "torus-linear" => Scenario {
            v: 1,
            id: id.into(),
            description: "Constant field (1, 1/2) on T2: every orbit closes after winding (2, 1).".into(),
            manifold: Manifold::Torus2,
            family: Some(FamilySpec::TorusLinear { slope: 0.5 }),
            contact: None,
            perturbation: None,
            seeds: 8,
            caps: Caps { levels: vec![13.0], pmax: None, sample: None },
            expected: vec![
                exp("period", Number(4.0 * PI), Some(1e-8), Derived, Some("theta(s) = theta0 + s (1, 1/2)")),
                exp("class_tag", Numbers(vec![2.0, 1.0]), None, Derived, Some("winding of the straight line")),
            ],
        },
        "hopf-c0-near" => Scenario {
            v: 1,
            id: id.into(),
            description: "Hopf field plus a C0-small perturbation of size delta.".into(),
            manifold: Manifold::sphere3(),
            family: Some(FamilySpec::HopfC0Near { delta: 1e-3 }),
            contact: None,
            perturbation: None,
            seeds: 8,
            caps: Caps { levels: vec![7.0], pmax: None, sample: None },
            expected: vec![
                exp("deltas", Numbers(vec![1e-2, 1e-3, 1e-4]), None, Published, None),
                exp("distance_monotone", Bool(true), None, Published, None),
            ],
        },
        _ => return None,
    };
    Some(s)
}

/// The perturbed contact form of a scenario's perturbation block at a given mu.
pub fn perturbed_contact(mu: f64, morse: MorseFunction, structure: bool) -> ContactFormFamily {
    ContactFormFamily::new(
        if structure { "structure-homotopy" } else { "perturbed" },
        BaseForm::StandardSphere3,
        ConformalFactor::Morse { mu, morse, structure },
    )
}

/// Checks that a scenario's field is tangent and non-singular on a net.
pub fn self_check(s: &Scenario, net_size: usize, cfg: &Config) -> Result<f64> {
    let fam = s.field();
    let pts = s.manifold.seed_net(net_size);
    let mut net = Vec::with_capacity(pts.len() * 3);
    let mut worst_tangency = 0.0f64;
    for (i, x) in pts.iter().enumerate() {
        let t = [0.0, 0.5, 1.0][i % 3];
        worst_tangency = worst_tangency.max(crate::geometry::tangency_defect(fam.as_ref(), x, t));
        net.push((x.clone(), t));
    }
    if worst_tangency > 1e-10 {
        return Err(Error::InvalidArgument(format!("tangency defect {worst_tangency:e}")));
    }
    let rep = crate::geometry::check_nonsingular(fam.as_ref(), &net, cfg)?;
    Ok(rep.min_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{check_nonsingular, eval_field, tangency_defect};

    #[test]
    fn hopf_at_e1() {
        let h = HopfField::new(4);
        assert_eq!(eval_field(&h, &[1.0, 0.0, 0.0, 0.0], 0.7, &Config::default()).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        let lam = ContactFormFamily::standard();
        let x = [0.5, -0.5, 0.5, 0.5];
        assert!((lam.evaluate(&x, 0.0, &h.eval(&x, 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn off_manifold_point_is_rejected() {
        let h = HopfField::new(4);
        let x = [1.5f64.sqrt(), 0.0, 0.0, 0.0];
        assert!(matches!(eval_field(&h, &x, 0.0, &Config::default()), Err(Error::OffManifold { .. })));
        assert!(matches!(eval_field(&h, &[1.0, 0.0, 0.0, 0.0], 1.5, &Config::default()), Err(Error::ParamOutOfRange(_))));
    }

    #[test]
    fn scaled_family_is_the_identity_at_t0() {
        let s = ScaledField::new(Box::new(HopfField::new(4)), 0.1);
        let x = [0.6, 0.0, 0.0, 0.8];
        assert_eq!(s.eval(&x, 0.0), HopfField::new(4).eval(&x, 0.0));
    }

    #[test]
    fn hopf_min_norm_is_one() {
        let h = HopfField::new(4);
        let net: Vec<_> = h.manifold().seed_net(200).into_iter().map(|x| (x, 0.0)).collect();
        let r = check_nonsingular(&h, &net, &Config::default()).unwrap();
        assert!((r.min_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeroed_field_reports_its_witness() {
        struct Bump;
        impl VectorFieldFamily for Bump {
            fn manifold(&self) -> &Manifold {
                static M: Manifold = Manifold::Torus2;
                &M
            }
            fn label(&self) -> &str {
                "bump"
            }
            fn eval_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
                let s = if x[0] == 1.0 && x[1] == 2.0 { 0.0 } else { 1.0 };
                out[0] = s;
                out[1] = 0.0;
            }
        }
        let net = vec![(vec![0.5, 0.5], 0.0), (vec![1.0, 2.0], 0.3), (vec![3.0, 1.0], 1.0)];
        let r = check_nonsingular(&Bump, &net, &Config::default()).unwrap();
        assert_eq!(r.min_norm, 0.0);
        assert_eq!(r.witness, (vec![1.0, 2.0], 0.3));
        assert_eq!(check_nonsingular(&Bump, &[], &Config::default()), Err(Error::EmptyNet));
    }

    #[test]
    fn blue_sky_is_nonsingular_before_t1() {
        let b = BlueSkyTorus::standard();
        let mut net = Vec::new();
        for x in b.manifold().seed_net(4000) {
            net.push((x, 0.999));
        }
        for (x, _, _) in b.closed_orbits(0.999) {
            net.push((x, 0.999));
        }
        let r = check_nonsingular(&b, &net, &Config::default()).unwrap();
        assert!(r.min_norm > 0.0);
        // the only zero sits on the witness circle at t = 1
        assert_eq!(b.eval(&[0.5, 0.0, 1.0], 1.0), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn blue_sky_flow_points_inward_on_the_boundary() {
        let b = BlueSkyTorus::standard();
        for k in 0..360 {
            let th = 2.0 * PI * k as f64 / 360.0;
            let x = [th.cos(), th.sin(), 0.0];
            let v = b.eval(&x, 0.5);
            assert!(x[0] * v[0] + x[1] * v[1] < 0.0);
        }
    }

    #[test]
    fn closed_form_jacobians_match_differences() {
        let fields: Vec<Box<dyn VectorFieldFamily>> =
            vec![Box::new(BlueSkyTorus::standard()), Box::new(HopfC0Near::new(0.3)), Box::new(HopfField::new(4))];
        for f in fields {
            let x = f.manifold().seed_net(3)[2].clone();
            let exact = f.jacobian(&x, 0.4).unwrap();
            let n = x.len();
            for k in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += 1e-6;
                xm[k] -= 1e-6;
                let (fp, fm) = (f.eval(&xp, 0.4), f.eval(&xm, 0.4));
                for i in 0..n {
                    assert!((exact[(i, k)] - (fp[i] - fm[i]) / 2e-6).abs() < 1e-7, "{}", f.label());
                }
            }
        }
    }

    #[test]
    fn builtin_fields_are_tangent() {
        for id in BUILTIN_IDS {
            let s = builtin(id).unwrap();
            let fam = s.field();
            for (i, x) in s.manifold.seed_net(10_000).iter().enumerate() {
                let t = (i % 11) as f64 / 10.0;
                assert!(tangency_defect(fam.as_ref(), x, t) <= 1e-10, "{id}");
            }
        }
    }

    #[test]
    fn builtins_validate() {
        for id in BUILTIN_IDS {
            let s = builtin(id).unwrap();
            assert_eq!(s.validate(), Ok(()), "{id}");
            assert!(self_check(&s, 500, &Config::default()).unwrap() > 0.0, "{id}");
        }
        assert!(builtin("nonexistent").is_none());
    }

    #[test]
    fn derived_expectations_need_an_oracle() {
        let mut s = builtin("torus-linear").unwrap();
        s.expected[0].oracle = None;
        assert!(s.validate().is_err());
    }
}
