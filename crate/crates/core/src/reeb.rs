//! Reeb fields of conformal contact forms, actions, perturbation systems
//! for the Hopf field and the exp(L K) period-growth check.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
#[allow(unused_imports)] // needed without std, where f64 has no inherent math
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::continuation::OrbitBranch;
use crate::error::{Error, Result};
use crate::flow;
use crate::geometry::{BaseForm, ContactFormFamily, Manifold, MorseFunction, VectorFieldFamily};
use crate::index::{fixed_point_index, CapProvider, IndexReport};
use crate::linalg::{self, halton};
use crate::orbits::{OrbitSet, PeriodicOrbit};
use crate::scenarios::perturbed_contact;

/// Oriented orthonormal tangent frame of S^3: (Hx, e1, e2) / |x|.
fn sphere3_frame(x: &[f64]) -> DMatrix<f64> {
    let r = linalg::norm(x);
    DMatrix::from_column_slice(
        4,
        3,
        &[
            -x[1] / r,
            x[0] / r,
            -x[3] / r,
            x[2] / r,
            -x[2] / r,
            x[3] / r,
            x[0] / r,
            -x[1] / r,
            -x[3] / r,
            -x[2] / r,
            x[1] / r,
            x[0] / r,
        ],
    )
}

/// Solves lambda_t(R) = 1, d lambda_t(R, .) = 0 on T_xM.
pub fn reeb_vector(contact: &ContactFormFamily, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let tb = match contact.base {
        BaseForm::StandardSphere3 => sphere3_frame(x),
    };
    let w = contact.exterior_derivative(x, t);
    let alpha = contact.covector(x, t);
    let omega = tb.transpose() * w * &tb;
    let a = tb.transpose() * nalgebra::DVector::from_column_slice(&alpha);
    // the kernel of a 3x3 antisymmetric matrix is its axial vector
    let k = Vector3::new(omega[(1, 2)], omega[(2, 0)], omega[(0, 1)]);
    let ak = a[0] * k[0] + a[1] * k[1] + a[2] * k[2];
    let scale = a.norm() * k.norm();
    if !(ak.abs() > 1e-12 * scale.max(1e-300)) {
        return Err(Error::DegenerateContact);
    }
    let c = k / ak;
    Ok((0..4).map(|i| tb[(i, 0)] * c[0] + tb[(i, 1)] * c[1] + tb[(i, 2)] * c[2]).collect())
}

/// |lambda(R) - 1| and max |d lambda(R, v)| over a unit tangent basis.
pub fn reeb_defect(contact: &ContactFormFamily, x: &[f64], t: f64, r: &[f64]) -> (f64, f64) {
    let m = contact.manifold();
    let tb = m.tangent_basis(x);
    let w = contact.exterior_derivative(x, t);
    let wr = w.transpose() * nalgebra::DVector::from_column_slice(r);
    let mut worst = 0.0f64;
    for j in 0..tb.ncols() {
        let mut s = 0.0;
        for i in 0..r.len() {
            s += wr[i] * tb[(i, j)];
        }
        worst = worst.max(s.abs());
    }
    ((contact.evaluate(x, t, r) - 1.0).abs(), worst)
}

/// The Reeb family t -> R^{lambda_t}.
#[derive(Clone, Debug)]
pub struct ReebField {
    pub contact: ContactFormFamily,
    manifold: Manifold,
    label: String,
}

impl ReebField {
    pub fn new(contact: ContactFormFamily) -> Self {
        let manifold = contact.manifold();
        let label = alloc::format!("reeb({})", contact.label);
        Self { contact, manifold, label }
    }
}

impl VectorFieldFamily for ReebField {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match reeb_vector(&self.contact, x, t) {
            Ok(r) => out.copy_from_slice(&r),
            Err(_) => out.iter_mut().for_each(|v| *v = f64::NAN),
        }
    }
    fn t_independent(&self) -> bool {
        self.contact.t_independent()
    }
}

/// Reeb field of a contact family, checked at a point.
pub fn reeb_field(contact: &ContactFormFamily, x: &[f64], t: f64, cfg: &Config) -> Result<Vec<f64>> {
    crate::geometry::check_param(t)?;
    crate::geometry::check_on_manifold(&contact.manifold(), x, cfg.metric_tol)?;
    let r = reeb_vector(contact, x, t)?;
    let (d1, d2) = reeb_defect(contact, x, t, &r);
    if d1 > cfg.reeb.reeb_tol || d2 > cfg.reeb.reeb_tol {
        return Err(Error::DegenerateContact);
    }
    Ok(r)
}

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Integral of lambda_t along the orbit over its period, by Gauss-Legendre
/// quadrature on the dense solution.
pub fn action(orbit: &PeriodicOrbit, fam: &dyn VectorFieldFamily, contact: &ContactFormFamily, cfg: &Config) -> Result<f64> {
    let t = orbit.param_t;
    let (_, dense) = flow::flow_dense(fam, &orbit.base, orbit.period, t, cfg)?;
    let m = fam.manifold();
    let panels = ((orbit.period * 4.0).ceil() as usize).max(4);
    let h = orbit.period / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * h;
        for (node, w) in GL8 {
            let s = mid + 0.5 * h * node;
            let x = m.retract(&dense.eval(s));
            total += 0.5 * h * w * contact.evaluate(&x, t, &fam.eval(&x, t));
        }
    }
    Ok(total)
}

/// One level of a perturbation system: X^a for caps a < energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationLevel {
    pub level: usize,
    pub energy: f64,
    pub mu: f64,
    pub halvings: usize,
    /// Orbits with period below the level, with their indices.
    pub orbits: Vec<IndexReport>,
    /// The perturbed orbits could not be separated (mu = 0).
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSystem {
    pub base: ContactFormFamily,
    pub morse: MorseFunction,
    pub levels: Vec<PerturbationLevel>,
}

/// Levels 2pi (n + 1/2), midway in the action spectrum 2pi Z of lambda_std.
pub fn level_energy(n: usize) -> f64 {
    2.0 * PI * (n as f64 + 0.5)
}

impl PerturbationSystem {
    pub fn contact_for_level(&self, i: usize) -> ContactFormFamily {
        perturbed_contact(self.levels[i].mu, self.morse, false)
    }

    pub fn field_for_level(&self, i: usize) -> ReebField {
        ReebField::new(self.contact_for_level(i))
    }

    /// s -> Reeb field of (1 + (1 - s) mu f) lambda, from X^a back to the base.
    pub fn structure_homotopy(&self, i: usize) -> ReebField {
        ReebField::new(perturbed_contact(self.levels[i].mu, self.morse, true))
    }

    /// Index of the first level whose energy exceeds the cap.
    pub fn level_for_cap(&self, cap: f64) -> Option<usize> {
        self.levels.iter().position(|l| l.energy > cap)
    }
}

impl CapProvider for PerturbationSystem {
    fn field_for_cap(&self, cap: f64) -> Result<Box<dyn VectorFieldFamily>> {
        let i = self
            .level_for_cap(cap)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("cap {cap} is above the top level")))?;
        Ok(Box::new(self.field_for_level(i)))
    }
}

/// Distance from a point to the nearest critical fibre of the Morse function.
pub fn distance_to_critical_fibres(morse: MorseFunction, x: &[f64]) -> f64 {
    match morse {
        MorseFunction::HopfHeight => (x[2] * x[2] + x[3] * x[3]).sqrt().min((x[0] * x[0] + x[1] * x[1]).sqrt()),
    }
}

/// Builds the Bourgeois perturbation system for the Hopf field. Each level
/// is validated on S(X^a, E_n): isolated nondegenerate orbits on critical
/// fibres, two per cover level. Failing levels halve mu up to the configured
/// number of times.
pub fn build_perturbation_system(
    n_levels: usize,
    morse: MorseFunction,
    mu_schedule: &[f64],
    sampler: &dyn Fn(&dyn VectorFieldFamily, f64, f64) -> Result<OrbitSet>,
    cfg: &Config,
) -> Result<PerturbationSystem> {
    if mu_schedule.len() < n_levels {
        return Err(Error::InvalidArgument("mu schedule shorter than the number of levels".into()));
    }
    if mu_schedule.iter().any(|m| !(*m >= 0.0)) || mu_schedule.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("mu schedule must be non-negative and non-increasing".into()));
    }
    let crit = morse.critical_fibres().len();
    let mut levels = Vec::with_capacity(n_levels);
    for n in 1..=n_levels {
        let energy = level_energy(n);
        let mut mu = mu_schedule[n - 1];
        if let Some(prev) = levels.last() {
            let prev: &PerturbationLevel = prev;
            mu = mu.min(prev.mu);
        }
        if mu == 0.0 {
            levels.push(PerturbationLevel { level: n, energy, mu, halvings: 0, orbits: Vec::new(), degenerate: true });
            continue;
        }
        let mut halvings = 0;
        loop {
            let field = ReebField::new(perturbed_contact(mu, morse, false));
            let ok = sampler(&field, 0.0, energy).and_then(|set| {
                let reports =
                    set.orbits.iter().map(|o| fixed_point_index(o, &field, cfg)).collect::<Result<Vec<_>>>()?;
                Ok(reports)
            });
            let valid = match &ok {
                Ok(reports) => {
                    reports.len() == crit * n
                        && reports.iter().all(|r| {
                            r.nondegenerate && distance_to_critical_fibres(morse, &r.orbit.base) < 1e-6
                        })
                }
                Err(_) => false,
            };
            if valid {
                levels.push(PerturbationLevel {
                    level: n,
                    energy,
                    mu,
                    halvings,
                    orbits: ok.unwrap_or_default(),
                    degenerate: false,
                });
                break;
            }
            if halvings >= cfg.reeb.max_halvings {
                return Err(Error::MuTooLarge { level: n, retries: halvings });
            }
            halvings += 1;
            mu *= 0.5;
        }
    }
    Ok(PerturbationSystem { base: ContactFormFamily::standard(), morse, levels })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthBoundReport {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub bound: f64,
    /// Total variation of the period along the branch relative to its start.
    pub measured: f64,
    /// Total variation of the period, unnormalised.
    pub period_variation: f64,
    pub pass: bool,
    pub net_size: usize,
}

/// max |df/dt| * max f over a Halton net of M x [0, 1].
pub fn estimate_k(contact: &ContactFormFamily, net_size: usize) -> f64 {
    let m = contact.manifold();
    let pts = m.seed_net(net_size);
    let mut max_dt = 0.0f64;
    let mut max_f = 0.0f64;
    for (i, x) in pts.iter().enumerate() {
        // include both ends of the parameter interval
        let t = match i % 4 {
            0 => 0.0,
            1 => 1.0,
            _ => halton(i + 1, 7),
        };
        max_dt = max_dt.max(contact.factor.t_derivative(x, t).abs());
        max_f = max_f.max(contact.factor.value(x, t));
    }
    max_dt * max_f
}

pub fn growth_verdict(k: f64, l: f64, measured: f64, slack: f64) -> (f64, bool) {
    let bound = (l * k).exp();
    (bound, measured <= bound * (1.0 + slack))
}

/// Checks the exp(L K) bound on the period variation along a Reeb branch.
pub fn growth_bound_check(
    branch: &OrbitBranch,
    fam: &dyn VectorFieldFamily,
    contact: &ContactFormFamily,
    cfg: &Config,
) -> Result<GrowthBoundReport> {
    growth_bound_check_with_k(branch, fam, contact, None, cfg)
}

/// As `growth_bound_check`, optionally with K supplied instead of estimated.
pub fn growth_bound_check_with_k(
    branch: &OrbitBranch,
    fam: &dyn VectorFieldFamily,
    contact: &ContactFormFamily,
    k_override: Option<f64>,
    cfg: &Config,
) -> Result<GrowthBoundReport> {
    if fam.manifold() != &contact.manifold() {
        return Err(Error::NotReebBranch { defect: f64::INFINITY });
    }
    let mut defect = 0.0f64;
    for node in &branch.nodes {
        let v = fam.eval(&node.x, node.t);
        defect = defect.max((contact.evaluate(&node.x, node.t, &v) - 1.0).abs());
    }
    if !(defect <= cfg.reeb.branch_reeb_tol) {
        return Err(Error::NotReebBranch { defect });
    }
    let k = k_override.unwrap_or_else(|| estimate_k(contact, cfg.reeb.k_net));
    let l: f64 = branch.nodes.windows(2).map(|w| (w[1].t - w[0].t).abs()).sum();
    let variation: f64 = branch.nodes.windows(2).map(|w| (w[1].period - w[0].period).abs()).sum();
    let p0 = branch.nodes.first().map_or(1.0, |n| n.period);
    let measured = variation / p0;
    let (bound, pass) = growth_verdict(k, l, measured, cfg.reeb.growth_slack);
    Ok(GrowthBoundReport { k, l, bound, measured, period_variation: variation, pass, net_size: cfg.reeb.k_net })
}
