//! Pseudo-arclength continuation of periodic orbits across t, branch
//! assembly into components, sky-catastrophe detection and admissibility.
//!
//! Branches live in (x, ln p, t). Measuring the period logarithmically keeps
//! steps meaningful when periods blow up.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // needed without std, where f64 has no inherent math
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::flow;
use crate::geometry::{check_param, VectorFieldFamily};
use crate::index::sign_det_index;
use crate::linalg;
use crate::orbits::{self, section_return_matrix, OrbitSet, PeriodicOrbit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchNode {
    pub x: Vec<f64>,
    pub period: f64,
    pub t: f64,
    pub fp_index: Option<i32>,
    /// Cumulative pseudo-arclength up to this node.
    pub arclength: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalStatus {
    ReachedT0,
    ReachedT1,
    PeriodCapHit,
    /// The node budget ran out before the branch closed.
    FoldExhausted,
    NewtonLost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitBranch {
    pub nodes: Vec<BranchNode>,
    pub arclength: f64,
    pub terminal_status: TerminalStatus,
    pub component_id: usize,
    /// Multiplicity of the start orbit, carried along the branch.
    pub multiplicity: u32,
    pub class_tag: Vec<i64>,
}

impl OrbitBranch {
    pub fn last(&self) -> &BranchNode {
        self.nodes.last().expect("branches are never empty")
    }

    pub fn max_period(&self) -> f64 {
        self.nodes.iter().map(|n| n.period).fold(0.0, f64::max)
    }
}

/// Distance between nodes in the branch metric |dx|^2 + |d ln p|^2 + |dt|^2.
pub fn node_distance(fam: &dyn VectorFieldFamily, a: &BranchNode, b: &BranchNode) -> f64 {
    let dx = fam.manifold().displacement(&a.x, &b.x);
    let dq = b.period.ln() - a.period.ln();
    (linalg::dot(&dx, &dx) + dq * dq + (b.t - a.t) * (b.t - a.t)).sqrt()
}

struct Tangent {
    x: Vec<f64>,
    q: f64,
    t: f64,
}

impl Tangent {
    fn normalised(mut self) -> Self {
        let n = (linalg::dot(&self.x, &self.x) + self.q * self.q + self.t * self.t).sqrt();
        self.x = linalg::scale(&self.x, 1.0 / n);
        self.q /= n;
        self.t /= n;
        self
    }
}

struct Corrected {
    node: BranchNode,
    iterations: usize,
}

fn node_index(a: &DMatrix<f64>, cfg: &Config) -> Option<i32> {
    let (d, s) = sign_det_index(a);
    if d.abs() > cfg.index.nondegeneracy {
        Some(s)
    } else {
        None
    }
}

/// Newton corrector on (section coordinates, ln p, t) with the arclength
/// constraint <tau, u - u0> = h.
fn correct(
    fam: &dyn VectorFieldFamily,
    prev: &BranchNode,
    tau: &Tangent,
    h: f64,
    cfg: &Config,
) -> Result<Corrected> {
    let m = fam.manifold();
    let cc = &cfg.continuation;
    let mut x = m.retract(&linalg::add_scaled(&prev.x, h, &tau.x));
    let mut q = prev.period.ln() + h * tau.q;
    let mut t = prev.t + h * tau.t;
    let e_pred = {
        let v = fam.eval(&x, t);
        m.section_basis(&x, &linalg::scale(&v, 1.0 / linalg::norm(&v)))
    };
    let x_pred = x.clone();
    let ncols = e_pred.ncols();
    let mut last_res = f64::INFINITY;
    for it in 0..cc.corrector_max_iter {
        let p = q.exp();
        if !(p.is_finite() && p > 0.0) {
            break;
        }
        let sol = flow::variational(fam, &x, p, t, cfg, true, false)?;
        let r = m.displacement(&x, &sol.endpoint);
        let res = linalg::norm(&r);
        let vx = fam.eval(&x, t);
        let normal = linalg::scale(&vx, 1.0 / linalg::norm(&vx));
        let vy = fam.eval(&sol.endpoint, t);
        if linalg::dot(&vy, &normal).abs() < cfg.newton.section_ratio * linalg::norm(&vy) {
            return Err(Error::DegenerateSection);
        }
        let dx = m.displacement(&prev.x, &x);
        let g2 = linalg::dot(&tau.x, &dx) + tau.q * (q - prev.period.ln()) + tau.t * (t - prev.t) - h;
        if (res <= cfg.newton.target_residual || (res <= cfg.newton.residual_tol && res > 0.5 * last_res))
            && g2.abs() < 1e-9
        {
            let e = m.section_basis(&x, &normal);
            let a = section_return_matrix(&sol.matrix, &e, &normal, &vy);
            return Ok(Corrected {
                node: BranchNode { x, period: p, t, fp_index: node_index(&a, cfg), arclength: 0.0 },
                iterations: it,
            });
        }
        last_res = res;
        let tb = m.tangent_basis(&x);
        let n = x.len();
        let dim = tb.ncols();
        let vm = &sol.matrix - DMatrix::<f64>::identity(n, n);
        let mut big = DMatrix::zeros(n, ncols + 2);
        big.view_mut((0, 0), (n, ncols)).copy_from(&(vm * &e_pred));
        let w = sol.param_sensitivity.as_ref().expect("requested");
        for i in 0..n {
            big[(i, ncols)] = vy[i] * p;
            big[(i, ncols + 1)] = w[i];
        }
        let mut jac = DMatrix::zeros(dim + 1, ncols + 2);
        jac.view_mut((0, 0), (dim, ncols + 2)).copy_from(&(tb.transpose() * &big));
        let tx = e_pred.transpose() * DVector::from_column_slice(&tau.x);
        for j in 0..ncols {
            jac[(dim, j)] = tx[j];
        }
        jac[(dim, ncols)] = tau.q;
        jac[(dim, ncols + 1)] = tau.t;
        let mut rhs = DVector::zeros(dim + 1);
        let tr = tb.transpose() * DVector::from_column_slice(&r);
        for i in 0..dim {
            rhs[i] = -tr[i];
        }
        rhs[dim] = -g2;
        let delta = linalg::solve_robust(&jac, &rhs);
        // section coordinates are measured from the predicted point
        let a_now = e_pred.transpose() * DVector::from_column_slice(&m.displacement(&x_pred, &x));
        let a_new: Vec<f64> = (0..ncols).map(|j| a_now[j] + delta[j]).collect();
        x = m.retract(&linalg::add_scaled(&x_pred, 1.0, &linalg::mat_vec(&e_pred, &a_new)));
        q += delta[ncols];
        t += delta[ncols + 1];
    }
    Err(Error::NoConvergence { iterations: cc.corrector_max_iter, residual: last_res })
}

/// Orbit at a fixed parameter value from a nearby guess.
fn land(fam: &dyn VectorFieldFamily, x: &[f64], p: f64, t: f64, cfg: &Config) -> Result<BranchNode> {
    let m = fam.manifold();
    let shot = orbits::shoot(fam, &m.retract(x), p, t, cfg)?;
    let fp = if shot.det.abs() > cfg.index.nondegeneracy { Some(if shot.det > 0.0 { 1 } else { -1 }) } else { None };
    Ok(BranchNode { x: shot.x, period: shot.p, t, fp_index: fp, arclength: 0.0 })
}

fn initial_tangent(fam: &dyn VectorFieldFamily, node: &BranchNode, direction: f64, cfg: &Config) -> Result<Tangent> {
    let m = fam.manifold();
    let sol = flow::variational(fam, &node.x, node.period, node.t, cfg, true, false)?;
    let vx = fam.eval(&node.x, node.t);
    let normal = linalg::scale(&vx, 1.0 / linalg::norm(&vx));
    let e = m.section_basis(&node.x, &normal);
    let tb = m.tangent_basis(&node.x);
    let n = node.x.len();
    let vy = fam.eval(&sol.endpoint, node.t);
    let vm = &sol.matrix - DMatrix::<f64>::identity(n, n);
    let ncols = e.ncols();
    let mut big = DMatrix::zeros(n, ncols + 1);
    big.view_mut((0, 0), (n, ncols)).copy_from(&(vm * &e));
    for i in 0..n {
        big[(i, ncols)] = vy[i] * node.period;
    }
    let jac = tb.transpose() * big;
    let w = sol.param_sensitivity.expect("requested");
    let rhs = -(tb.transpose() * DVector::from_column_slice(&w));
    // tangent with dt = 1; the minimum-norm choice ignores Morse-Bott directions
    let sol_aq = linalg::lstsq(&jac, &rhs, 1e-8);
    let x = linalg::mat_vec(&e, &sol_aq.as_slice()[..ncols]);
    let tan = Tangent { x, q: sol_aq[ncols], t: 1.0 }.normalised();
    let s = direction.signum();
    Ok(Tangent { x: linalg::scale(&tan.x, s), q: tan.q * s, t: tan.t * s })
}

/// Continues a periodic orbit from its parameter value towards `t_target`.
pub fn continue_branch(
    fam: &dyn VectorFieldFamily,
    start: &PeriodicOrbit,
    t_target: f64,
    p_max: f64,
    cfg: &Config,
) -> Result<OrbitBranch> {
    check_param(t_target).map_err(|_| Error::StartInvalid(alloc::format!("target t = {t_target} outside [0, 1]")))?;
    check_param(start.param_t).map_err(|_| Error::StartInvalid("start parameter outside [0, 1]".into()))?;
    if !(p_max > start.period) {
        return Err(Error::StartInvalid(alloc::format!("period cap {p_max} does not exceed the start period {}", start.period)));
    }
    let m = fam.manifold();
    crate::geometry::check_on_manifold(m, &start.base, cfg.metric_tol)
        .map_err(|e| Error::StartInvalid(alloc::format!("{e}")))?;
    let end = flow::flow_map(fam, &start.base, start.period, start.param_t, cfg)
        .map_err(|e| Error::StartInvalid(alloc::format!("{e}")))?
        .endpoint;
    let res = linalg::norm(&m.displacement(&start.base, &end));
    if res > 10.0 * cfg.newton.residual_tol {
        return Err(Error::StartInvalid(alloc::format!("start does not close (residual {res:e})")));
    }
    let cc = &cfg.continuation;
    let first = BranchNode { x: start.base.clone(), period: start.period, t: start.param_t, fp_index: None, arclength: 0.0 };
    let mut branch = OrbitBranch {
        nodes: vec![first],
        arclength: 0.0,
        terminal_status: TerminalStatus::ReachedT1,
        component_id: 0,
        multiplicity: start.multiplicity,
        class_tag: start.class_tag.clone(),
    };
    let reached = |t: f64| if t <= 0.0 { TerminalStatus::ReachedT0 } else { TerminalStatus::ReachedT1 };
    if t_target == start.param_t {
        branch.terminal_status = reached(t_target);
        return Ok(branch);
    }
    let direction = t_target - start.param_t;
    let mut tau = initial_tangent(fam, &branch.nodes[0], direction, cfg)?;
    let h_cap = 0.5 * cc.step_cap;
    let mut h = cc.initial_step.min(h_cap);
    // t-levels at which the branch stops: the target and the ends of [0, 1]
    let mut stops = vec![t_target, 0.0, 1.0];
    stops.dedup();
    while branch.nodes.len() < cc.max_nodes {
        let prev = branch.last().clone();
        let corrected = correct(fam, &prev, &tau, h, cfg).ok().filter(|c| {
            c.node.period.is_finite() && node_distance(fam, &prev, &c.node) <= cc.step_cap
        });
        let Some(Corrected { mut node, iterations }) = corrected else {
            h *= cc.shrink;
            if h < cc.min_step {
                branch.terminal_status = TerminalStatus::NewtonLost;
                return Ok(branch);
            }
            continue;
        };
        let crossed = stops
            .iter()
            .copied()
            .find(|&s| prev.t != s && ((node.t - s) * (prev.t - s) < 0.0 || node.t == s));
        if let Some(s) = crossed {
            let frac = (s - prev.t) / (node.t - prev.t);
            let dx = m.displacement(&prev.x, &node.x);
            let guess = linalg::add_scaled(&prev.x, frac, &dx);
            let p_guess = (prev.period.ln() + frac * (node.period.ln() - prev.period.ln())).exp();
            match land(fam, &guess, p_guess, s, cfg) {
                Ok(mut last) if node_distance(fam, &prev, &last) <= cc.step_cap => {
                    last.arclength = prev.arclength + node_distance(fam, &prev, &last);
                    branch.arclength = last.arclength;
                    let over = last.period > p_max;
                    branch.nodes.push(last);
                    branch.terminal_status = if over { TerminalStatus::PeriodCapHit } else { reached(s) };
                    return Ok(branch);
                }
                _ => {
                    h *= cc.shrink;
                    if h < cc.min_step {
                        branch.terminal_status = TerminalStatus::NewtonLost;
                        return Ok(branch);
                    }
                    continue;
                }
            }
        }
        node.arclength = prev.arclength + node_distance(fam, &prev, &node);
        branch.arclength = node.arclength;
        let over = node.period > p_max;
        let dx = m.displacement(&prev.x, &node.x);
        tau = Tangent { x: dx, q: node.period.ln() - prev.period.ln(), t: node.t - prev.t }.normalised();
        branch.nodes.push(node);
        if over {
            branch.terminal_status = TerminalStatus::PeriodCapHit;
            return Ok(branch);
        }
        if iterations <= cc.fast_iterations {
            h = (h * cc.growth).min(h_cap);
        }
    }
    branch.terminal_status = TerminalStatus::FoldExhausted;
    Ok(branch)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PartiallyAdmissible,
    Admissible,
    SkyFlagged,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkyMode {
    /// Sample at t = 0 only.
    Partial,
    /// Sample at both ends of the homotopy.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub homotopy_label: String,
    pub period_cap: f64,
    pub mode: SkyMode,
    pub branches: Vec<OrbitBranch>,
    pub verdict: Verdict,
    /// Indices into `branches` of those that hit the period cap before t = 1.
    pub sky_witnesses: Vec<usize>,
    pub components: usize,
    /// Components meeting a t-slice in more than one dedup cluster.
    pub branching_components: Vec<usize>,
}

/// A continuation job: an orbit and the direction to continue it in.
#[derive(Clone, Debug, PartialEq)]
pub struct SkyJob {
    pub start: PeriodicOrbit,
    pub t_target: f64,
}

/// Jobs for the sky detector: every t = 0 orbit towards 1, and in full mode
/// every t = 1 orbit towards 0.
pub fn sky_jobs(at_t0: &OrbitSet, at_t1: Option<&OrbitSet>) -> Vec<SkyJob> {
    let mut jobs: Vec<SkyJob> = at_t0.orbits.iter().map(|o| SkyJob { start: o.clone(), t_target: 1.0 }).collect();
    if let Some(s) = at_t1 {
        jobs.extend(s.orbits.iter().map(|o| SkyJob { start: o.clone(), t_target: 0.0 }));
    }
    jobs
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut i = i;
        while self.parent[i] != r {
            let next = self.parent[i];
            self.parent[i] = r;
            i = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Component assembly and verdict over finished branches (in job order).
pub fn assemble_sky(
    fam: &dyn VectorFieldFamily,
    p_max: f64,
    mode: SkyMode,
    mut branches: Vec<OrbitBranch>,
    cfg: &Config,
) -> AdmissibilityReport {
    let n = branches.len();
    let mut uf = UnionFind::new(n);
    let tol = cfg.continuation.merge_tol;
    for i in 0..n {
        for j in (i + 1)..n {
            let ends_i = [&branches[i].nodes[0], branches[i].last()];
            let ends_j = [&branches[j].nodes[0], branches[j].last()];
            let close = ends_i.iter().any(|a| {
                ends_j.iter().any(|b| {
                    node_distance(fam, a, b) < tol
                        && (a.t == 0.0 || a.t == 1.0 || branches[i].nodes.len() > 1)
                })
            });
            if close {
                uf.union(i, j);
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        let id = match roots.iter().position(|x| *x == r) {
            Some(k) => k,
            None => {
                roots.push(r);
                roots.len() - 1
            }
        };
        branches[i].component_id = id;
    }
    // non-branching: the ends of a component on each t-slice form one cluster
    let mut branching = Vec::new();
    for c in 0..roots.len() {
        for slice in [0.0, 1.0] {
            let ends: Vec<&BranchNode> = branches
                .iter()
                .filter(|b| b.component_id == c)
                .flat_map(|b| [&b.nodes[0], b.last()])
                .filter(|nd| nd.t == slice)
                .collect();
            if ends.windows(2).any(|w| node_distance(fam, w[0], w[1]) >= tol) {
                branching.push(c);
                break;
            }
        }
    }
    let sky_witnesses: Vec<usize> = branches
        .iter()
        .enumerate()
        .filter(|(_, b)| b.terminal_status == TerminalStatus::PeriodCapHit && b.last().t < 1.0)
        .map(|(i, _)| i)
        .collect();
    let lost = branches
        .iter()
        .any(|b| matches!(b.terminal_status, TerminalStatus::NewtonLost | TerminalStatus::FoldExhausted));
    let capped_at_end = branches.iter().any(|b| b.terminal_status == TerminalStatus::PeriodCapHit);
    let verdict = if !sky_witnesses.is_empty() {
        Verdict::SkyFlagged
    } else if lost || capped_at_end {
        Verdict::Inconclusive
    } else if mode == SkyMode::Full {
        Verdict::Admissible
    } else {
        Verdict::PartiallyAdmissible
    };
    AdmissibilityReport {
        homotopy_label: fam.label().into(),
        period_cap: p_max,
        mode,
        branches,
        verdict,
        sky_witnesses,
        components: roots.len(),
        branching_components: branching,
    }
}

/// Samples S at t = 0 (and t = 1 in full mode) below `sample_cap`, continues
/// every orbit across the homotopy and renders the admissibility verdict.
pub fn detect_sky(
    fam: &dyn VectorFieldFamily,
    seeds: &[Vec<f64>],
    p_max: f64,
    sample_cap: f64,
    mode: SkyMode,
    cfg: &Config,
) -> Result<AdmissibilityReport> {
    let s0 = orbits::sample_orbit_space(fam, 0.0, sample_cap, seeds, cfg)?;
    let s1 = match mode {
        SkyMode::Full => Some(orbits::sample_orbit_space(fam, 1.0, sample_cap, seeds, cfg)?),
        SkyMode::Partial => None,
    };
    let jobs = sky_jobs(&s0, s1.as_ref());
    let branches = jobs
        .iter()
        .map(|j| continue_branch(fam, &j.start, j.t_target, p_max, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_sky(fam, p_max, mode, branches, cfg))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplicityBound {
    pub m_max: u32,
    /// Smallest prime above m_max.
    pub k: u32,
}

pub fn smallest_prime_above(m: u32) -> u32 {
    let mut k = m + 1;
    while !linalg::is_prime(k) {
        k += 1;
    }
    k
}

/// Largest multiplicity among branch nodes with period at most `a`.
pub fn max_multiplicity(report: &AdmissibilityReport, a: f64) -> MultiplicityBound {
    let m_max = report
        .branches
        .iter()
        .filter(|b| b.nodes.iter().any(|n| n.period <= a))
        .map(|b| b.multiplicity)
        .max()
        .unwrap_or(1)
        .max(1);
    MultiplicityBound { m_max, k: smallest_prime_above(m_max) }
}
