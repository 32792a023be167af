//! Periodic orbits by Newton shooting on sections orthogonal to the field,
//! least periods, canonical representatives and capped orbit-space sampling.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // needed without std, where f64 has no inherent math
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::flow::{self, Dense};
use crate::geometry::{check_on_manifold, check_param, Manifold, VectorFieldFamily};
use crate::linalg;

/// A periodic orbit (o, p) of X_t with its canonical base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub base: Vec<f64>,
    pub period: f64,
    #[serde(rename = "t")]
    pub param_t: f64,
    pub least_period: f64,
    pub multiplicity: u32,
    /// Winding data: [0] on spheres, [w_z] on the solid torus, [w1, w2] on T^2.
    pub class_tag: Vec<i64>,
    pub residual: f64,
    /// |det(I - A)| of the return map fell below the nondegeneracy threshold.
    #[serde(default)]
    pub degenerate: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingDiagnostics {
    pub attempts: usize,
    pub converged: usize,
    pub above_cap: usize,
    pub duplicates: usize,
    pub no_convergence: usize,
    pub degenerate_section: usize,
    pub other_errors: usize,
}

impl SamplingDiagnostics {
    fn absorb(&mut self, o: &SamplingDiagnostics) {
        self.attempts += o.attempts;
        self.converged += o.converged;
        self.above_cap += o.above_cap;
        self.duplicates += o.duplicates;
        self.no_convergence += o.no_convergence;
        self.degenerate_section += o.degenerate_section;
        self.other_errors += o.other_errors;
    }

    fn record_error(&mut self, e: &Error) {
        match e {
            Error::NoConvergence { .. } => self.no_convergence += 1,
            Error::DegenerateSection => self.degenerate_section += 1,
            _ => self.other_errors += 1,
        }
    }
}

/// The numerical proxy of S(X_t, a, beta).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSet {
    pub manifold: String,
    #[serde(rename = "t")]
    pub param_t: f64,
    #[serde(rename = "cap")]
    pub period_cap: f64,
    pub dedup_eps: f64,
    pub orbits: Vec<PeriodicOrbit>,
    pub diagnostics: SamplingDiagnostics,
    /// Degenerate orbits were found: the orbit set is likely a Morse-Bott family.
    pub morse_bott_suspect: bool,
}

/// Sampled image of an orbit over its least period: points and velocities at
/// uniform times, used for Hausdorff comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitImage {
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// Time between consecutive samples.
    pub ds: f64,
    /// Mean of the features and of their pairwise products over the loop.
    pub moments: Vec<f64>,
}

/// An orbit together with its image, as produced for one seed.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub orbit: PeriodicOrbit,
    pub image: OrbitImage,
}

/// Return matrix on the section through x orthogonal to `normal`:
/// E^T (I - X(y) n^T / (n . X(y))) V E.
pub fn section_return_matrix(v: &DMatrix<f64>, e: &DMatrix<f64>, normal: &[f64], vy: &[f64]) -> DMatrix<f64> {
    let n = normal.len();
    let denom = linalg::dot(normal, vy);
    let mut q = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] -= vy[i] * normal[j] / denom;
        }
    }
    e.transpose() * q * v * e
}

fn unit(v: &[f64]) -> Vec<f64> {
    linalg::scale(v, 1.0 / linalg::norm(v))
}

pub(crate) struct Shot {
    pub x: Vec<f64>,
    pub p: f64,
    pub det: f64,
}

fn closing_residual(fam: &dyn VectorFieldFamily, x: &[f64], p: f64, t: f64, cfg: &Config) -> Result<f64> {
    let y = flow::flow_map(fam, x, p, t, cfg)?.endpoint;
    Ok(linalg::norm(&fam.manifold().displacement(x, &y)))
}

/// Newton iteration for F_{t,p}(x) = x with x moving in the section through
/// the current iterate and p free.
pub(crate) fn shoot(fam: &dyn VectorFieldFamily, seed: &[f64], p_guess: f64, t: f64, cfg: &Config) -> Result<Shot> {
    let m = fam.manifold();
    let nc = &cfg.newton;
    let mut x = seed.to_vec();
    let mut p = p_guess;
    let mut last_res = f64::INFINITY;
    let mut last_det = f64::NAN;
    // periods this far below the guess mean Newton is collapsing onto the
    // trivial solution p = 0
    let p_floor = 1e-3 * p_guess;
    for iter in 0..nc.max_iter {
        let sol = flow::variational(fam, &x, p, t, cfg, false, false)?;
        let r = m.displacement(&x, &sol.endpoint);
        let res = linalg::norm(&r);
        let vx = fam.eval(&x, t);
        let normal = unit(&vx);
        let vy = fam.eval(&sol.endpoint, t);
        if linalg::dot(&vy, &normal).abs() < nc.section_ratio * linalg::norm(&vy) {
            return Err(Error::DegenerateSection);
        }
        let e = m.section_basis(&x, &normal);
        let a = section_return_matrix(&sol.matrix, &e, &normal, &vy);
        let k = a.nrows();
        last_det = (DMatrix::<f64>::identity(k, k) - a).determinant();
        if res <= nc.target_residual || (res <= nc.residual_tol && res > 0.5 * last_res) {
            return Ok(Shot { x, p, det: last_det });
        }
        let tb = m.tangent_basis(&x);
        let n = x.len();
        let vm = &sol.matrix - DMatrix::<f64>::identity(n, n);
        let mut big = DMatrix::zeros(n, e.ncols() + 1);
        big.view_mut((0, 0), (n, e.ncols())).copy_from(&(vm * &e));
        for i in 0..n {
            big[(i, e.ncols())] = vy[i];
        }
        let jac = tb.transpose() * big;
        let rhs = -(tb.transpose() * DVector::from_column_slice(&r));
        let delta = linalg::solve_robust(&jac, &rhs);
        let step: Vec<f64> = linalg::mat_vec(&e, &delta.as_slice()[..e.ncols()]);
        let dp = delta[e.ncols()];
        let mut lam = 1.0;
        let mut accepted = None;
        for _ in 0..16 {
            let p_try = p + lam * dp;
            if p_try > p_floor {
                let x_try = m.retract(&linalg::add_scaled(&x, lam, &step));
                if let Ok(rt) = closing_residual(fam, &x_try, p_try, t, cfg) {
                    if rt < res {
                        accepted = Some((x_try, p_try, rt));
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        match accepted {
            Some((xn, pn, rn)) => {
                x = xn;
                p = pn;
                last_res = res;
                if rn <= nc.target_residual {
                    return Ok(Shot { x, p, det: last_det });
                }
            }
            None if res <= nc.residual_tol => return Ok(Shot { x, p, det: last_det }),
            None => return Err(Error::NoConvergence { iterations: iter + 1, residual: res }),
        }
    }
    let res = closing_residual(fam, &x, p, t, cfg)?;
    if res <= nc.residual_tol {
        return Ok(Shot { x, p, det: last_det });
    }
    Err(Error::NoConvergence { iterations: nc.max_iter, residual: res })
}

/// Smallest p/j (j <= max_cover) at which the orbit through x closes.
fn least_period(fam: &dyn VectorFieldFamily, x: &[f64], p: f64, dense: &Dense, t: f64, cfg: &Config) -> Result<(f64, u32)> {
    let m = fam.manifold();
    for j in (2..=cfg.newton.max_cover).rev() {
        let l = p / j as f64;
        let guess = m.distance(x, &dense.eval(l));
        if guess > 1e-4 {
            continue;
        }
        if closing_residual(fam, x, l, t, cfg)? <= cfg.newton.least_period_tol {
            return Ok((l, j));
        }
    }
    Ok((p, 1))
}

// Fixed generic weights for the phase function and its tie-breaker.
fn phase_weights(len: usize, salt: f64) -> Vec<f64> {
    (0..len).map(|i| ((i as f64 + 1.0) * (1.618_033_988_75 + salt)).sin() + 0.25).collect()
}

/// Time s in [0, l) of the canonical base point along the orbit through the
/// dense solution: the upward zero of a fixed linear phase function of the
/// features (centred on the orbit mean), choosing the zero that maximises a
/// second fixed functional.
fn canonical_phase(m: &Manifold, dense: &Dense, l: f64) -> f64 {
    const N: usize = 256;
    let feats: Vec<Vec<f64>> = (0..N).map(|j| m.features(&dense.eval(l * j as f64 / N as f64))).collect();
    let dimf = feats[0].len();
    let mut centroid = vec![0.0; dimf];
    for f in &feats {
        for i in 0..dimf {
            centroid[i] += f[i] / N as f64;
        }
    }
    for salt in [0.0, 0.37, 0.91] {
        let c = phase_weights(dimf, salt);
        let g = phase_weights(dimf, salt + 0.5);
        let psi = |f: &[f64]| linalg::dot(&c, f) - linalg::dot(&c, &centroid);
        let vals: Vec<f64> = feats.iter().map(|f| psi(f)).collect();
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale < 1e-9 {
            continue;
        }
        let mut best: Option<(f64, f64)> = None;
        for j in 0..N {
            let (a, b) = (vals[j], vals[(j + 1) % N]);
            if a < 0.0 && b >= 0.0 {
                let (mut lo, mut hi) = (l * j as f64 / N as f64, l * (j + 1) as f64 / N as f64);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if psi(&m.features(&dense.eval(mid))) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let s = 0.5 * (lo + hi);
                let score = linalg::dot(&g, &m.features(&dense.eval(s)));
                if best.map_or(true, |(_, b)| score > b) {
                    best = Some((s, score));
                }
            }
        }
        if let Some((s, _)) = best {
            return if s >= l { 0.0 } else { s };
        }
    }
    0.0
}

/// Sampled image over the least period starting at the orbit's base.
pub fn orbit_image(fam: &dyn VectorFieldFamily, orbit: &PeriodicOrbit, samples: usize, cfg: &Config) -> Result<OrbitImage> {
    let (_, dense) = flow::flow_dense(fam, &orbit.base, orbit.least_period, orbit.param_t, cfg)?;
    Ok(image_from_dense(fam, &dense, orbit.least_period, orbit.param_t, samples))
}

fn image_from_dense(fam: &dyn VectorFieldFamily, dense: &Dense, l: f64, t: f64, samples: usize) -> OrbitImage {
    let m = fam.manifold();
    let ds = l / samples as f64;
    let points: Vec<Vec<f64>> = (0..samples).map(|j| m.retract(&dense.eval(ds * j as f64))).collect();
    let velocities: Vec<Vec<f64>> = points.iter().map(|x| fam.eval(x, t)).collect();
    let feats: Vec<Vec<f64>> = points.iter().map(|x| m.features(x)).collect();
    let d = feats[0].len();
    let mut moments = vec![0.0; d + d * (d + 1) / 2];
    for f in &feats {
        let mut k = d;
        for i in 0..d {
            moments[i] += f[i] / samples as f64;
            for j in i..d {
                moments[k] += f[i] * f[j] / samples as f64;
                k += 1;
            }
        }
    }
    OrbitImage { points, velocities, ds, moments }
}

/// Distance from a point to the closed Hermite curve through the samples.
fn point_to_image(m: &Manifold, a: &[f64], img: &OrbitImage) -> f64 {
    let n = img.points.len();
    let (mut k0, mut d0) = (0, f64::INFINITY);
    for (k, b) in img.points.iter().enumerate() {
        let d = m.distance(a, b);
        if d < d0 {
            d0 = d;
            k0 = k;
        }
    }
    let mut best = d0;
    for seg in [(k0 + n - 1) % n, k0] {
        let p0 = &img.points[seg];
        let p1 = &img.points[(seg + 1) % n];
        let d01 = m.displacement(p0, p1);
        let m0 = linalg::scale(&img.velocities[seg], img.ds);
        let m1 = linalg::scale(&img.velocities[(seg + 1) % n], img.ds);
        let curve = |s: f64| -> Vec<f64> {
            let (s2, s3) = (s * s, s * s * s);
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            (0..p0.len()).map(|i| p0[i] + h10 * m0[i] + h01 * d01[i] + h11 * m1[i]).collect()
        };
        let f = |s: f64| m.distance(a, &curve(s));
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let m1s = lo + (hi - lo) / 3.0;
            let m2s = hi - (hi - lo) / 3.0;
            if f(m1s) < f(m2s) {
                hi = m2s;
            } else {
                lo = m1s;
            }
        }
        best = best.min(f(0.5 * (lo + hi)));
    }
    best
}

/// Symmetric Hausdorff distance between two sampled orbit images, measured
/// against the interpolated curves.
pub fn hausdorff(m: &Manifold, a: &OrbitImage, b: &OrbitImage) -> f64 {
    let ab = a.points.iter().map(|p| point_to_image(m, p, b)).fold(0.0, f64::max);
    let ba = b.points.iter().map(|p| point_to_image(m, p, a)).fold(0.0, f64::max);
    ab.max(ba)
}

/// Largest distance from the samples of `a` to the closest of `images`.
pub fn directed_distance_to_set(m: &Manifold, a: &OrbitImage, images: &[OrbitImage]) -> f64 {
    a.points
        .iter()
        .map(|p| images.iter().map(|b| point_to_image(m, p, b)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn check_guess(p_guess: f64) -> Result<()> {
    if p_guess > 0.0 && p_guess.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(alloc::format!("period guess must be positive, got {p_guess}")))
    }
}

/// Converges a periodic orbit from a seed and a period guess.
pub fn find_orbit(fam: &dyn VectorFieldFamily, seed: &[f64], p_guess: f64, t: f64, cfg: &Config) -> Result<PeriodicOrbit> {
    find_orbit_with_image(fam, seed, p_guess, t, cfg).map(|c| c.orbit)
}

pub fn find_orbit_with_image(
    fam: &dyn VectorFieldFamily,
    seed: &[f64],
    p_guess: f64,
    t: f64,
    cfg: &Config,
) -> Result<Candidate> {
    check_guess(p_guess)?;
    check_param(t)?;
    let m = fam.manifold();
    check_on_manifold(m, seed, cfg.metric_tol)?;
    let shot = shoot(fam, seed, p_guess, t, cfg)?;
    finish_orbit(fam, &shot.x, shot.p, t, shot.det, cfg)
}

/// Least period, canonical base, winding and image of a converged orbit.
pub(crate) fn finish_orbit(
    fam: &dyn VectorFieldFamily,
    x: &[f64],
    p: f64,
    t: f64,
    det: f64,
    cfg: &Config,
) -> Result<Candidate> {
    let m = fam.manifold();
    let (_, dense) = flow::flow_dense(fam, x, p, t, cfg)?;
    let (l, mult) = least_period(fam, x, p, &dense, t, cfg)?;
    let s = canonical_phase(m, &dense, l);
    let base = if s > 0.0 { m.wrap(&flow::flow_map(fam, x, s, t, cfg)?.endpoint) } else { m.wrap(x) };
    let (end, dense_base) = flow::flow_dense(fam, &base, p, t, cfg)?;
    let residual = linalg::norm(&m.displacement(&base, &end));
    if residual > cfg.newton.residual_tol {
        return Err(Error::NoConvergence { iterations: cfg.newton.max_iter, residual });
    }
    let class_tag = m.windings(&base, &end);
    let image = image_from_dense(fam, &dense_base, l, t, cfg.sampling.image_samples);
    let orbit = PeriodicOrbit {
        base,
        period: p,
        param_t: t,
        least_period: l,
        multiplicity: mult,
        class_tag,
        residual,
        degenerate: !(det.abs() > cfg.index.nondegeneracy),
    };
    Ok(Candidate { orbit, image })
}

/// Period guesses cap * ratio^j.
pub fn period_ladder(cap: f64, cfg: &Config) -> Vec<f64> {
    (0..cfg.sampling.ladder_rungs).map(|j| cap * cfg.sampling.ladder_ratio.powi(j as i32)).collect()
}

/// All orbits found from one seed over the period ladder, deduplicated.
pub fn seed_candidates(
    fam: &dyn VectorFieldFamily,
    t: f64,
    cap: f64,
    seed: &[f64],
    cfg: &Config,
) -> (Vec<Candidate>, SamplingDiagnostics) {
    let mut diag = SamplingDiagnostics::default();
    let mut out: Vec<Candidate> = Vec::new();
    for p_guess in period_ladder(cap, cfg) {
        diag.attempts += 1;
        match find_orbit_with_image(fam, seed, p_guess, t, cfg) {
            Ok(c) => {
                diag.converged += 1;
                if c.orbit.period > cap * (1.0 + 1e-12) {
                    diag.above_cap += 1;
                } else if out.iter().any(|o| same_orbit(fam.manifold(), o, &c, dedup_eps(fam.manifold(), cfg), cfg)) {
                    diag.duplicates += 1;
                } else {
                    out.push(c);
                }
            }
            Err(e) => diag.record_error(&e),
        }
    }
    // Iterates of every orbit found are orbits too. Newton from the seed
    // misses them when the orbit repels over long times, so polish each
    // cover below the cap from the orbit's own base point.
    let eps = dedup_eps(fam.manifold(), cfg);
    let mut i = 0;
    while i < out.len() {
        let (base, l) = (out[i].orbit.base.clone(), out[i].orbit.least_period);
        i += 1;
        let covers = (cap * (1.0 + 1e-12) / l).floor() as u32;
        for j in 1..=covers {
            let p = l * j as f64;
            let known = out.iter().any(|o| {
                (o.orbit.period - p).abs() < cfg.sampling.dedup_period_rel * p
                    && fam.manifold().distance(&o.orbit.base, &base) < eps
            });
            if known {
                continue;
            }
            diag.attempts += 1;
            match find_orbit_with_image(fam, &base, p, t, cfg) {
                Ok(c) => {
                    diag.converged += 1;
                    if c.orbit.period > cap * (1.0 + 1e-12) {
                        diag.above_cap += 1;
                    } else if out.iter().any(|o| same_orbit(fam.manifold(), o, &c, eps, cfg)) {
                        diag.duplicates += 1;
                    } else {
                        out.push(c);
                    }
                }
                Err(e) => diag.record_error(&e),
            }
        }
    }
    (out, diag)
}

pub fn dedup_eps(m: &Manifold, cfg: &Config) -> f64 {
    cfg.sampling.dedup_factor * m.diameter()
}

fn same_orbit(m: &Manifold, a: &Candidate, b: &Candidate, eps: f64, cfg: &Config) -> bool {
    let (pa, pb) = (a.orbit.period, b.orbit.period);
    if (pa - pb).abs() >= cfg.sampling.dedup_period_rel * pa.max(pb) {
        return false;
    }
    let aligned = a.image.points.len() == b.image.points.len()
        && a.image.points.iter().zip(&b.image.points).all(|(x, y)| m.distance(x, y) < eps);
    if aligned {
        return true;
    }
    let dm = linalg::max_abs(&linalg::sub(&a.image.moments, &b.image.moments));
    if dm > 10.0 * eps.max(1e-6) + 4.0 * a.image.ds * a.image.ds {
        return false;
    }
    hausdorff(m, &a.image, &b.image) < eps
}

fn cmp_orbits(a: &PeriodicOrbit, b: &PeriodicOrbit) -> Ordering {
    a.period.partial_cmp(&b.period).unwrap_or(Ordering::Equal).then_with(|| {
        for (x, y) in a.base.iter().zip(&b.base) {
            match x.partial_cmp(y) {
                Some(Ordering::Equal) | None => continue,
                Some(o) => return o,
            }
        }
        Ordering::Equal
    })
}

/// Deterministic reduction of per-seed candidates into an orbit set: sorted
/// by (period, base) and deduplicated by image and period.
pub fn assemble(
    fam: &dyn VectorFieldFamily,
    t: f64,
    cap: f64,
    per_seed: Vec<(Vec<Candidate>, SamplingDiagnostics)>,
    cfg: &Config,
) -> (OrbitSet, Vec<OrbitImage>) {
    let m = fam.manifold();
    let eps = dedup_eps(m, cfg);
    let mut diagnostics = SamplingDiagnostics::default();
    let mut all: Vec<Candidate> = Vec::new();
    for (c, d) in per_seed {
        diagnostics.absorb(&d);
        all.extend(c);
    }
    all.sort_by(|a, b| cmp_orbits(&a.orbit, &b.orbit));
    let mut kept: Vec<Candidate> = Vec::new();
    for c in all {
        if kept.iter().rev().any(|k| same_orbit(m, k, &c, eps, cfg)) {
            diagnostics.duplicates += 1;
        } else {
            kept.push(c);
        }
    }
    let morse_bott_suspect = kept.iter().any(|c| c.orbit.degenerate);
    let images = kept.iter().map(|c| c.image.clone()).collect();
    let set = OrbitSet {
        manifold: m.name(),
        param_t: t,
        period_cap: cap,
        dedup_eps: eps,
        orbits: kept.into_iter().map(|c| c.orbit).collect(),
        diagnostics,
        morse_bott_suspect,
    };
    (set, images)
}

/// S(X_t, a) sampled from the given seeds (sequentially; the std crate
/// provides a parallel driver over `seed_candidates`).
pub fn sample_orbit_space(fam: &dyn VectorFieldFamily, t: f64, cap: f64, seeds: &[Vec<f64>], cfg: &Config) -> Result<OrbitSet> {
    sample_orbit_space_with_images(fam, t, cap, seeds, cfg).map(|r| r.0)
}

pub fn sample_orbit_space_with_images(
    fam: &dyn VectorFieldFamily,
    t: f64,
    cap: f64,
    seeds: &[Vec<f64>],
    cfg: &Config,
) -> Result<(OrbitSet, Vec<OrbitImage>)> {
    check_sampling_args(fam, t, cap, seeds, cfg)?;
    let per_seed = seeds.iter().map(|s| seed_candidates(fam, t, cap, s, cfg)).collect();
    Ok(assemble(fam, t, cap, per_seed, cfg))
}

pub fn check_sampling_args(fam: &dyn VectorFieldFamily, t: f64, cap: f64, seeds: &[Vec<f64>], cfg: &Config) -> Result<()> {
    if !(cap > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("period cap must be positive, got {cap}")));
    }
    check_param(t)?;
    for s in seeds {
        check_on_manifold(fam.manifold(), s, cfg.metric_tol)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{HopfField, TorusLinear};
    use core::f64::consts::PI;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn hopf_simple_orbit() {
        let h = HopfField::new(4);
        let o = find_orbit(&h, &[1.0, 0.0, 0.0, 0.0], 6.0, 0.0, &cfg()).unwrap();
        assert!((o.period - 2.0 * PI).abs() < 1e-8);
        assert_eq!(o.multiplicity, 1);
        assert!(o.residual <= 1e-8);
        assert!(o.degenerate);
        assert_eq!(o.class_tag, vec![0]);
    }

    #[test]
    fn hopf_double_cover() {
        let h = HopfField::new(4);
        let o = find_orbit(&h, &[1.0, 0.0, 0.0, 0.0], 12.4, 0.0, &cfg()).unwrap();
        assert!((o.period - 4.0 * PI).abs() < 1e-8);
        assert!((o.least_period - 2.0 * PI).abs() < 1e-8);
        assert_eq!(o.multiplicity, 2);
        assert!((o.period - o.multiplicity as f64 * o.least_period).abs() <= 1e-6 * o.period);
    }

    #[test]
    fn negative_guess_is_rejected() {
        let h = HopfField::new(4);
        assert!(matches!(find_orbit(&h, &[1.0, 0.0, 0.0, 0.0], -1.0, 0.0, &cfg()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn canonical_base_does_not_depend_on_the_seed_phase() {
        let h = HopfField::new(4);
        let a = find_orbit(&h, &[1.0, 0.0, 0.0, 0.0], 6.0, 0.0, &cfg()).unwrap();
        let b = find_orbit(&h, &[0.0, 1.0, 0.0, 0.0], 6.0, 0.0, &cfg()).unwrap();
        let c = find_orbit(&h, &[-0.6, -0.8, 0.0, 0.0], 6.5, 0.0, &cfg()).unwrap();
        assert!(linalg::max_abs(&linalg::sub(&a.base, &b.base)) < 1e-8);
        assert!(linalg::max_abs(&linalg::sub(&a.base, &c.base)) < 1e-8);
    }

    #[test]
    fn rerunning_from_the_base_is_idempotent() {
        let h = HopfField::new(4);
        let a = find_orbit(&h, &[0.6, 0.0, 0.0, 0.8], 6.0, 0.0, &cfg()).unwrap();
        let b = find_orbit(&h, &a.base, a.period, 0.0, &cfg()).unwrap();
        assert!((a.period - b.period).abs() < 1e-10);
    }

    #[test]
    fn covers_close_at_every_multiple_of_the_least_period() {
        let f = crate::scenarios::BlueSkyTorus::standard();
        let m = f.manifold().clone();
        let set = sample_orbit_space(&f, 0.0, 19.0, &m.seed_net(8), &cfg()).unwrap();
        // three circles, each with its double and triple cover
        assert_eq!(set.orbits.len(), 9);
        for o in &set.orbits {
            assert!((o.period - o.multiplicity as f64 * o.least_period).abs() < 1e-9 * o.period);
            for j in 1..=o.multiplicity {
                let end = flow::flow_map(&f, &o.base, o.least_period * j as f64, 0.0, &cfg()).unwrap().endpoint;
                assert!(m.distance(&o.base, &end) < 1e-7);
            }
        }
    }

    #[test]
    fn torus_winding_tag() {
        let f = TorusLinear::new(0.5);
        let o = find_orbit(&f, &[0.3, 1.1], 12.0, 0.0, &cfg()).unwrap();
        assert!((o.least_period - 4.0 * PI).abs() < 1e-8);
        assert_eq!(o.class_tag, vec![2, 1]);
    }

    #[test]
    fn cap_below_minimal_period_is_empty() {
        let h = HopfField::new(4);
        let seeds = h.manifold().seed_net(4);
        let set = sample_orbit_space(&h, 0.0, 3.0, &seeds, &cfg()).unwrap();
        assert!(set.orbits.is_empty());
    }

    #[test]
    fn unperturbed_hopf_is_flagged_morse_bott() {
        let h = HopfField::new(4);
        let seeds = h.manifold().seed_net(8);
        let mut c = cfg();
        c.sampling.ladder_rungs = 2;
        let set = sample_orbit_space(&h, 0.0, 7.0, &seeds, &c).unwrap();
        assert!(set.morse_bott_suspect);
        assert_eq!(set.orbits.len(), 8);
        for o in &set.orbits {
            assert!((o.period - 2.0 * PI).abs() < 1e-8);
        }
    }

    #[test]
    fn hausdorff_of_the_same_loop_at_shifted_phase_is_small() {
        let h = HopfField::new(4);
        let o = find_orbit(&h, &[1.0, 0.0, 0.0, 0.0], 6.0, 0.0, &cfg()).unwrap();
        let a = orbit_image(&h, &o, 64, &cfg()).unwrap();
        let mut shifted = o.clone();
        shifted.base = flow::flow_map(&h, &o.base, 0.05, 0.0, &cfg()).unwrap().endpoint;
        let b = orbit_image(&h, &shifted, 64, &cfg()).unwrap();
        assert!(hausdorff(h.manifold(), &a, &b) < 1e-6);
    }
}
