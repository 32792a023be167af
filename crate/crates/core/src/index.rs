//! Fixed-point indices of return maps, Conley-Zehnder indices of Reeb
//! orbits, exact rational Fuller sums and the finite/infinite type test.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_rational::Ratio;
#[allow(unused_imports)] // needed without std, where f64 has no inherent math
use num_traits::{Float, Zero};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::flow;
use crate::geometry::{ContactFormFamily, VectorFieldFamily};
use crate::linalg;
use crate::orbits::{section_return_matrix, OrbitSet, PeriodicOrbit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMethod {
    SignDet,
    BoundaryDegree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub orbit: PeriodicOrbit,
    pub fp_index: i32,
    pub cz_index: Option<i64>,
    pub method: IndexMethod,
    pub nondegenerate: bool,
    pub det_i_minus_a: f64,
}

/// Restricted return map of an orbit on the section through its base point
/// orthogonal to `normal` (default: the field direction).
pub fn return_matrix(
    fam: &dyn VectorFieldFamily,
    orbit: &PeriodicOrbit,
    normal: Option<&[f64]>,
    cfg: &Config,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let m = fam.manifold();
    let t = orbit.param_t;
    let sol = flow::variational(fam, &orbit.base, orbit.period, t, cfg, false, false)?;
    let vx = fam.eval(&orbit.base, t);
    let n = match normal {
        Some(n) => linalg::scale(n, 1.0 / linalg::norm(n)),
        None => linalg::scale(&vx, 1.0 / linalg::norm(&vx)),
    };
    if linalg::dot(&n, &vx).abs() < cfg.newton.section_ratio * linalg::norm(&vx) {
        return Err(Error::DegenerateSection);
    }
    let e = m.section_basis(&orbit.base, &n);
    let vy = fam.eval(&sol.endpoint, t);
    Ok((section_return_matrix(&sol.matrix, &e, &n, &vy), e, n))
}

pub fn sign_det_index(a: &DMatrix<f64>) -> (f64, i32) {
    let k = a.nrows();
    let d = (DMatrix::<f64>::identity(k, k) - a).determinant();
    (d, if d > 0.0 { 1 } else if d < 0.0 { -1 } else { 0 })
}

/// i(o, p) through the section orthogonal to the field at the base point.
pub fn fixed_point_index(orbit: &PeriodicOrbit, fam: &dyn VectorFieldFamily, cfg: &Config) -> Result<IndexReport> {
    fixed_point_index_with_section(orbit, fam, None, cfg)
}

/// i(o, p) through the section through the base point orthogonal to `normal`.
pub fn fixed_point_index_with_section(
    orbit: &PeriodicOrbit,
    fam: &dyn VectorFieldFamily,
    normal: Option<&[f64]>,
    cfg: &Config,
) -> Result<IndexReport> {
    let (a, e, n) = return_matrix(fam, orbit, normal, cfg)?;
    let (det, sign) = sign_det_index(&a);
    if det.abs() > cfg.index.nondegeneracy {
        return Ok(IndexReport {
            orbit: orbit.clone(),
            fp_index: sign,
            cz_index: None,
            method: IndexMethod::SignDet,
            nondegenerate: true,
            det_i_minus_a: det,
        });
    }
    let deg = degree_on_section(fam, orbit, &e, &n, cfg)?;
    Ok(IndexReport {
        orbit: orbit.clone(),
        fp_index: deg,
        cz_index: None,
        method: IndexMethod::BoundaryDegree,
        nondegenerate: false,
        det_i_minus_a: det,
    })
}

/// A unit normal tilted away from the field direction inside T_xM, for
/// section-independence checks.
pub fn tilted_normal(fam: &dyn VectorFieldFamily, orbit: &PeriodicOrbit, tilt: f64) -> Vec<f64> {
    let vx = fam.eval(&orbit.base, orbit.param_t);
    let n = linalg::scale(&vx, 1.0 / linalg::norm(&vx));
    let e = fam.manifold().section_basis(&orbit.base, &n);
    let mut w = n.clone();
    for j in 0..e.ncols() {
        let c = tilt / (j as f64 + 1.0);
        for i in 0..w.len() {
            w[i] += c * e[(i, j)];
        }
    }
    linalg::scale(&w, 1.0 / linalg::norm(&w))
}

/// First-return map of a section point near the orbit base.
fn return_point(
    fam: &dyn VectorFieldFamily,
    orbit: &PeriodicOrbit,
    z: &[f64],
    normal: &[f64],
    cfg: &Config,
) -> Result<Vec<f64>> {
    let m = fam.manifold();
    let t = orbit.param_t;
    let mut tau = orbit.period;
    let mut y = flow::flow_map(fam, z, tau, t, cfg)?.endpoint;
    for _ in 0..6 {
        let g = linalg::dot(normal, &m.displacement(&orbit.base, &y));
        let dg = linalg::dot(normal, &fam.eval(&y, t));
        let dt = -g / dg;
        if dt.abs() < 1e-15 * orbit.period {
            break;
        }
        tau += dt;
        y = flow::flow_map(fam, z, tau, t, cfg)?.endpoint;
    }
    Ok(y)
}

fn degree_on_section(
    fam: &dyn VectorFieldFamily,
    orbit: &PeriodicOrbit,
    e: &DMatrix<f64>,
    normal: &[f64],
    cfg: &Config,
) -> Result<i32> {
    let m = fam.manifold();
    let r = cfg.index.degree_radius;
    let x = &orbit.base;
    // z - P(z) in section coordinates
    let g = |w: &[f64]| -> Result<Vec<f64>> {
        let amb = linalg::mat_vec(e, w);
        let z = m.retract(&linalg::add_scaled(x, 1.0, &amb));
        let pz = return_point(fam, orbit, &z, normal, cfg)?;
        let d = m.displacement(&pz, &z);
        let c = e.transpose() * nalgebra::DVector::from_column_slice(&d);
        let v: Vec<f64> = c.iter().copied().collect();
        if linalg::norm(&v) < cfg.index.degree_zero_tol {
            return Err(Error::DegenerateUnresolved(format!("z - P(z) vanishes on the degree circle at {w:?}")));
        }
        Ok(v)
    };
    match e.ncols() {
        1 => {
            let a = g(&[r])?;
            let b = g(&[-r])?;
            Ok(((a[0].signum() - b[0].signum()) / 2.0).round() as i32)
        }
        2 => {
            let n = cfg.index.degree_samples;
            let mut total = 0.0;
            let first = g(&[r, 0.0])?;
            let mut prev = first[1].atan2(first[0]);
            for k in 1..=n {
                let th = 2.0 * PI * k as f64 / n as f64;
                let v = if k == n { first.clone() } else { g(&[r * th.cos(), r * th.sin()])? };
                let ang = v[1].atan2(v[0]);
                let mut d = ang - prev;
                while d > PI {
                    d -= 2.0 * PI;
                }
                while d <= -PI {
                    d += 2.0 * PI;
                }
                total += d;
                prev = ang;
            }
            Ok((total / (2.0 * PI)).round() as i32)
        }
        k => Err(Error::DegenerateUnresolved(format!("degree fallback needs a section of dimension <= 2, got {k}"))),
    }
}

/// Local degree of z - P(z) on a small circle (or interval) of the section,
/// independent of the determinant test.
pub fn boundary_degree(orbit: &PeriodicOrbit, fam: &dyn VectorFieldFamily, cfg: &Config) -> Result<i32> {
    let vx = fam.eval(&orbit.base, orbit.param_t);
    let n = linalg::scale(&vx, 1.0 / linalg::norm(&vx));
    let e = fam.manifold().section_basis(&orbit.base, &n);
    degree_on_section(fam, orbit, &e, &n, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzIndex {
    /// Conley-Zehnder index, or the Robbin-Salamon half-integer when degenerate.
    pub value: f64,
    pub degenerate: bool,
}

impl CzIndex {
    pub fn integer(&self) -> Option<i64> {
        if self.degenerate || self.value.fract() != 0.0 {
            None
        } else {
            Some(self.value as i64)
        }
    }
}

/// Conley-Zehnder index of a path of 2x2 matrices sampled on a grid, from the
/// interval of rotation numbers over unit directions. Each sample is
/// normalised to determinant one first.
pub fn cz_of_path(path: &[DMatrix<f64>], directions: usize, degeneracy: f64) -> CzIndex {
    let end = normalise(&path[path.len() - 1]);
    let d = (DMatrix::<f64>::identity(2, 2) - &end).determinant();
    if d.abs() < degeneracy {
        let eps = 1e-3;
        let n = path.len() - 1;
        let twist = |sgn: f64| -> Vec<DMatrix<f64>> {
            path.iter()
                .enumerate()
                .map(|(i, m)| rotation(sgn * eps * i as f64 / n.max(1) as f64) * m)
                .collect()
        };
        let plus = rotation_interval_cz(&twist(1.0), directions);
        let minus = rotation_interval_cz(&twist(-1.0), directions);
        return CzIndex { value: 0.5 * (plus + minus) as f64, degenerate: true };
    }
    CzIndex { value: rotation_interval_cz(path, directions) as f64, degenerate: false }
}

fn rotation(a: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
}

fn normalise(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.determinant();
    if d > 0.0 {
        m / d.sqrt()
    } else {
        m.clone()
    }
}

fn rotation_interval_cz(path: &[DMatrix<f64>], directions: usize) -> i64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..directions {
        let th = 2.0 * PI * k as f64 / directions as f64;
        let v = [th.cos(), th.sin()];
        let mut prev = th;
        let mut total = 0.0;
        for m in path.iter().skip(1) {
            let w0 = m[(0, 0)] * v[0] + m[(0, 1)] * v[1];
            let w1 = m[(1, 0)] * v[0] + m[(1, 1)] * v[1];
            let ang = w1.atan2(w0);
            let mut d = ang - prev;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d <= -PI {
                d += 2.0 * PI;
            }
            total += d;
            prev = ang;
        }
        let turns = total / (2.0 * PI);
        lo = lo.min(turns);
        hi = hi.max(turns);
    }
    let k = lo.floor();
    if hi < k + 1.0 && lo > k {
        (2.0 * k) as i64 + 1
    } else {
        let kk = if lo <= k { k } else { k + 1.0 };
        (2.0 * kk) as i64
    }
}

/// CZ index of a Reeb orbit on a 3-manifold in the contact-plane frame of
/// the base form, which on S^3 is induced by a bounding disk.
pub fn conley_zehnder(
    orbit: &PeriodicOrbit,
    fam: &dyn VectorFieldFamily,
    contact: &ContactFormFamily,
    cfg: &Config,
) -> Result<CzIndex> {
    let m = fam.manifold();
    if m.dim() != 3 {
        return Err(Error::InvalidArgument(format!("Conley-Zehnder indices need dim M = 3, got {}", m.dim())));
    }
    let t = orbit.param_t;
    let sol = flow::variational(fam, &orbit.base, orbit.period, t, cfg, false, true)?;
    let steps = ((orbit.period * cfg.index.cz_samples_per_time).ceil() as usize).max(16);
    let (a1, a2) = contact.base.xi_frame(&orbit.base);
    let mut path = Vec::with_capacity(steps + 1);
    let mut defect = 0.0f64;
    for i in 0..=steps {
        let s = orbit.period * i as f64 / steps as f64;
        let (x, v) = if i == 0 {
            (orbit.base.clone(), DMatrix::identity(m.ambient_dim(), m.ambient_dim()))
        } else {
            sol.dense_at(s).ok_or(Error::DegenerateContact)?
        };
        let x = m.retract(&x);
        defect = defect.max((contact.evaluate(&x, t, &fam.eval(&x, t)) - 1.0).abs());
        let (b1, b2) = contact.base.xi_frame(&x);
        let c1 = linalg::mat_vec(&v, &a1);
        let c2 = linalg::mat_vec(&v, &a2);
        path.push(DMatrix::from_row_slice(
            2,
            2,
            &[linalg::dot(&b1, &c1), linalg::dot(&b1, &c2), linalg::dot(&b2, &c1), linalg::dot(&b2, &c2)],
        ));
    }
    if defect > 1e-6 {
        return Err(Error::NotReebOrbit { defect });
    }
    Ok(cz_of_path(&path, cfg.index.cz_directions, cfg.index.cz_degeneracy))
}

/// Fixed-point index together with the CZ index when the orbit is a
/// nondegenerate Reeb orbit.
pub fn index_with_cz(
    orbit: &PeriodicOrbit,
    fam: &dyn VectorFieldFamily,
    contact: &ContactFormFamily,
    cfg: &Config,
) -> Result<(IndexReport, CzIndex)> {
    let mut rep = fixed_point_index(orbit, fam, cfg)?;
    let cz = conley_zehnder(orbit, fam, contact, cfg)?;
    rep.cz_index = cz.integer();
    Ok((rep, cz))
}

/// Exact rational carried as an integer pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl From<Ratio<i64>> for Rational {
    fn from(r: Ratio<i64>) -> Self {
        Rational { num: *r.numer(), den: *r.denom() }
    }
}

impl From<Rational> for Ratio<i64> {
    fn from(r: Rational) -> Self {
        Ratio::new(r.num, r.den)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullerKind {
    Finite(Rational),
    PlusInfinity,
    MinusInfinity,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeEvidence {
    /// The cutoff E.
    pub cutoff: f64,
    pub caps: Vec<f64>,
    pub partial_sums: Vec<Rational>,
    pub orbit_counts: Vec<usize>,
    /// Common index sign of the orbits with period in (E, a], when uniform.
    pub tail_sign: Option<i32>,
    /// The orbit sets at the two largest caps coincide.
    pub stabilized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullerIndexValue {
    pub kind: FullerKind,
    pub evidence: TypeEvidence,
}

/// Sum of i/m over index reports in exact arithmetic.
pub fn fuller_sum(reports: &[IndexReport]) -> Ratio<i64> {
    reports
        .iter()
        .fold(Ratio::zero(), |acc, r| acc + Ratio::new(r.fp_index as i64, r.orbit.multiplicity.max(1) as i64))
}

/// i(N, X) for the orbits of a set, each matched to its index report.
pub fn fuller_index_local(set: &OrbitSet, reports: &[IndexReport]) -> Result<FullerIndexValue> {
    let mut matched = Vec::with_capacity(set.orbits.len());
    for o in &set.orbits {
        let r = reports
            .iter()
            .find(|r| r.orbit.period == o.period && r.orbit.base == o.base)
            .ok_or(Error::MissingIndex)?;
        matched.push(r.clone());
    }
    let sum = fuller_sum(&matched);
    Ok(FullerIndexValue {
        kind: FullerKind::Finite(sum.into()),
        evidence: TypeEvidence {
            cutoff: set.period_cap,
            caps: vec![set.period_cap],
            partial_sums: vec![sum.into()],
            orbit_counts: vec![set.orbits.len()],
            tail_sign: None,
            stabilized: false,
        },
    })
}

/// Index data of one capped orbit set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelData {
    pub cap: f64,
    /// (period, fixed-point index, multiplicity) per orbit.
    pub orbits: Vec<(f64, i32, u32)>,
}

impl LevelData {
    pub fn from_reports(cap: f64, reports: &[IndexReport]) -> Self {
        let mut orbits: Vec<(f64, i32, u32)> =
            reports.iter().map(|r| (r.orbit.period, r.fp_index, r.orbit.multiplicity)).collect();
        orbits.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        LevelData { cap, orbits }
    }

    fn sum(&self) -> Ratio<i64> {
        self.orbits.iter().fold(Ratio::zero(), |acc, o| acc + Ratio::new(o.1 as i64, o.2.max(1) as i64))
    }
}

fn same_level_sets(a: &LevelData, b: &LevelData) -> bool {
    a.orbits.len() == b.orbits.len()
        && a.orbits
            .iter()
            .zip(&b.orbits)
            .all(|(x, y)| (x.0 - y.0).abs() <= 1e-6 * x.0.max(y.0) && x.1 == y.1 && x.2 == y.2)
}

/// The type decision on capped orbit sets sorted by increasing cap.
pub fn classify_from_levels(levels: &[LevelData], cfg: &Config) -> Result<FullerIndexValue> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no caps given".into()));
    }
    let sums: Vec<Ratio<i64>> = levels.iter().map(|l| l.sum()).collect();
    let mut evidence = TypeEvidence {
        cutoff: 0.0,
        caps: levels.iter().map(|l| l.cap).collect(),
        partial_sums: sums.iter().map(|s| (*s).into()).collect(),
        orbit_counts: levels.iter().map(|l| l.orbits.len()).collect(),
        tail_sign: None,
        stabilized: false,
    };
    let n = levels.len();
    if n >= 2 && same_level_sets(&levels[n - 2], &levels[n - 1]) {
        evidence.stabilized = true;
        evidence.cutoff = levels[n - 2].orbits.iter().map(|o| o.0).fold(0.0, f64::max);
        return Ok(FullerIndexValue { kind: FullerKind::Finite(sums[n - 1].into()), evidence });
    }
    let need = cfg.index.infinite_type_caps.max(1);
    let last = &levels[n - 1];
    for j in 0..n {
        if n - j < need {
            break;
        }
        let e = if j == 0 { 0.0 } else { levels[j - 1].cap };
        let tail: Vec<i32> = last.orbits.iter().filter(|o| o.0 > e).map(|o| o.1).collect();
        if tail.is_empty() {
            continue;
        }
        let sign = tail[0];
        if sign == 0 || tail.iter().any(|s| *s != sign) {
            continue;
        }
        let every_cap_has_tail = levels[j..].iter().all(|l| l.orbits.iter().any(|o| o.0 > e));
        let monotone = sums[j..].windows(2).all(|w| if sign > 0 { w[1] > w[0] } else { w[1] < w[0] });
        if every_cap_has_tail && monotone {
            evidence.cutoff = e;
            evidence.tail_sign = Some(sign);
            let kind = if sign > 0 { FullerKind::PlusInfinity } else { FullerKind::MinusInfinity };
            return Ok(FullerIndexValue { kind, evidence });
        }
    }
    let sums_txt: Vec<String> = sums.iter().map(|s| format!("{s}")).collect();
    Err(Error::Indeterminate(format!(
        "orbit sets do not stabilise and tail signs are mixed; partial sums {}",
        sums_txt.join(", ")
    )))
}

/// Supplies the field X^a used below each period cap a.
pub trait CapProvider {
    fn field_for_cap(&self, cap: f64) -> Result<Box<dyn VectorFieldFamily>>;
    /// Parameter value at which the fields are sampled.
    fn param_t(&self) -> f64 {
        0.0
    }
}

/// Classifies the capped Fuller sums. `sampler` computes S(X^a, a) for a
/// field and a cap; the std crate passes a parallel sampler.
pub fn classify_definite_type(
    system: &dyn CapProvider,
    caps: &[f64],
    sampler: &dyn Fn(&dyn VectorFieldFamily, f64, f64) -> Result<OrbitSet>,
    cfg: &Config,
) -> Result<(FullerIndexValue, Vec<Vec<IndexReport>>)> {
    if caps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("caps must be strictly increasing".into()));
    }
    let mut levels = Vec::with_capacity(caps.len());
    let mut all_reports = Vec::with_capacity(caps.len());
    for &cap in caps {
        let fam = system.field_for_cap(cap)?;
        let set = sampler(fam.as_ref(), system.param_t(), cap)?;
        let reports =
            set.orbits.iter().map(|o| fixed_point_index(o, fam.as_ref(), cfg)).collect::<Result<Vec<_>>>()?;
        levels.push(LevelData::from_reports(cap, &reports));
        all_reports.push(reports);
    }
    Ok((classify_from_levels(&levels, cfg)?, all_reports))
}

/// Index sign agreement check used by the parity law: (-1)^(cz - n).
pub fn parity_sign(cz: i64, n: i64) -> i32 {
    if (cz - n).rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// The rational value, when finite.
pub fn as_ratio(v: &FullerIndexValue) -> Option<Ratio<i64>> {
    match v.kind {
        FullerKind::Finite(r) => Some(r.into()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::find_orbit;
    use crate::scenarios::HopfField;
    use proptest::prelude::*;

    fn rot(th: f64) -> DMatrix<f64> {
        rotation(th)
    }

    fn report(i: i32, m: u32, p: f64) -> IndexReport {
        IndexReport {
            orbit: PeriodicOrbit {
                base: vec![p, 0.0],
                period: p,
                param_t: 0.0,
                least_period: p / m as f64,
                multiplicity: m,
                class_tag: vec![0],
                residual: 0.0,
                degenerate: false,
            },
            fp_index: i,
            cz_index: None,
            method: IndexMethod::SignDet,
            nondegenerate: true,
            det_i_minus_a: 1.0,
        }
    }

    #[test]
    fn rotation_by_one_radian_has_index_plus_one() {
        assert_eq!(sign_det_index(&rot(1.0)).1, 1);
    }

    #[test]
    fn hyperbolic_has_index_minus_one() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let (d, s) = sign_det_index(&a);
        assert_eq!(s, -1);
        assert!((d + 0.5).abs() < 1e-15);
    }

    #[test]
    fn cz_of_small_rotation_path_is_one() {
        for th in [0.3, 1.0, 3.0, 6.0] {
            let path: Vec<_> = (0..=200).map(|i| rot(th * i as f64 / 200.0)).collect();
            let cz = cz_of_path(&path, 64, 1e-8);
            assert_eq!(cz, CzIndex { value: 1.0, degenerate: false }, "theta = {th}");
        }
        // beyond one full turn the index steps by two
        let path: Vec<_> = (0..=400).map(|i| rot(7.0 * i as f64 / 400.0)).collect();
        assert_eq!(cz_of_path(&path, 64, 1e-8).value, 3.0);
    }

    #[test]
    fn identity_path_is_degenerate_with_value_zero() {
        let path: Vec<_> = (0..=10).map(|_| DMatrix::<f64>::identity(2, 2)).collect();
        assert_eq!(cz_of_path(&path, 64, 1e-8), CzIndex { value: 0.0, degenerate: true });
    }

    #[test]
    fn positive_hyperbolic_path_has_cz_zero() {
        let path: Vec<_> =
            (0..=100).map(|i| DMatrix::from_row_slice(2, 2, &[(i as f64 / 50.0).exp(), 0.0, 0.0, (-(i as f64) / 50.0).exp()])).collect();
        assert_eq!(cz_of_path(&path, 64, 1e-8).value, 0.0);
    }

    #[test]
    fn fuller_weights() {
        assert_eq!(fuller_sum(&[report(1, 1, 1.0)]), Ratio::new(1, 1));
        assert_eq!(fuller_sum(&[report(1, 2, 1.0)]), Ratio::new(1, 2));
        assert_eq!(fuller_sum(&[report(1, 1, 1.0), report(-1, 3, 2.0)]), Ratio::new(2, 3));
    }

    #[test]
    fn local_index_requires_reports() {
        let r = report(1, 1, 1.0);
        let set = OrbitSet {
            manifold: "T2".into(),
            param_t: 0.0,
            period_cap: 2.0,
            dedup_eps: 1e-4,
            orbits: vec![r.orbit.clone(), report(1, 1, 1.5).orbit],
            diagnostics: Default::default(),
            morse_bott_suspect: false,
        };
        assert_eq!(fuller_index_local(&set, &[r]), Err(Error::MissingIndex));
    }

    #[test]
    fn synthetic_cancelling_pair_is_finite_zero() {
        let level = |cap| LevelData { cap, orbits: vec![(1.0, -1, 1), (2.0, 1, 1)] };
        let v = classify_from_levels(&[level(5.0), level(9.0), level(13.0)], &Config::default()).unwrap();
        assert_eq!(v.kind, FullerKind::Finite(Rational { num: 0, den: 1 }));
        assert!(v.evidence.stabilized);
    }

    #[test]
    fn uniform_positive_tail_is_plus_infinity() {
        let l1 = LevelData { cap: 7.0, orbits: vec![(6.2, 1, 1), (6.3, 1, 1)] };
        let mut l2 = l1.clone();
        l2.cap = 13.0;
        l2.orbits.extend([(12.5, 1, 2), (12.6, 1, 2)]);
        let mut l3 = l2.clone();
        l3.cap = 19.0;
        l3.orbits.extend([(18.8, 1, 3), (18.9, 1, 3)]);
        let v = classify_from_levels(&[l1, l2, l3], &Config::default()).unwrap();
        assert_eq!(v.kind, FullerKind::PlusInfinity);
        let sums: Vec<Ratio<i64>> = v.evidence.partial_sums.iter().map(|r| (*r).into()).collect();
        assert_eq!(sums, vec![Ratio::new(2, 1), Ratio::new(3, 1), Ratio::new(11, 3)]);
    }

    #[test]
    fn mixed_tail_is_indeterminate() {
        let l1 = LevelData { cap: 7.0, orbits: vec![(6.2, -1, 1), (6.2, 1, 1), (6.3, 1, 1)] };
        let mut l2 = l1.clone();
        l2.cap = 13.0;
        l2.orbits.extend([(12.5, -1, 2), (12.5, 1, 2), (12.6, 1, 2)]);
        let mut l3 = l2.clone();
        l3.cap = 19.0;
        l3.orbits.extend([(18.8, -1, 3), (18.8, 1, 3), (18.9, 1, 3)]);
        assert!(matches!(classify_from_levels(&[l1, l2, l3], &Config::default()), Err(Error::Indeterminate(_))));
    }

    #[test]
    fn hopf_orbit_falls_back_to_the_degree_and_fails_loudly() {
        // every Hopf orbit is degenerate and z - P(z) vanishes identically
        let h = HopfField::new(4);
        let o = find_orbit(&h, &[1.0, 0.0, 0.0, 0.0], 6.0, 0.0, &Config::default()).unwrap();
        assert!(matches!(fixed_point_index(&o, &h, &Config::default()), Err(Error::DegenerateUnresolved(_))));
    }

    #[test]
    fn parity_sign_law() {
        assert_eq!(parity_sign(3, 1), 1);
        assert_eq!(parity_sign(4, 1), -1);
        assert_eq!(parity_sign(2, 1), -1);
    }

    proptest! {
        #[test]
        fn fuller_sum_is_permutation_invariant(
            items in proptest::collection::vec((prop_oneof![Just(-1i32), Just(1i32)], 1u32..6), 1..12),
            rot_by in 0usize..12,
        ) {
            let reports: Vec<IndexReport> =
                items.iter().enumerate().map(|(k, (i, m))| report(*i, *m, k as f64 + 1.0)).collect();
            let mut shuffled = reports.clone();
            let k = rot_by % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert_eq!(fuller_sum(&reports), fuller_sum(&shuffled));
        }
    }
}
