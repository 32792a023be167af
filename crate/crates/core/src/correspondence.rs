//! The cyclic k-fold lift of orbits: configuration tuples, the lifted field
//! on the k-fold product, the map (o, p) -> (o_k, p/k), the shift class and
//! numerical checks that index, period and multiplicity are preserved.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::flow;
use crate::geometry::{check_on_manifold, check_param, Manifold, VectorFieldFamily};
use crate::index::{fixed_point_index, sign_det_index};
use crate::linalg;
use crate::orbits::{self, section_return_matrix, PeriodicOrbit};

/// An ordered k-tuple of pairwise distinct points, stored as its
/// lexicographically minimal cyclic rotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicTuple {
    pub points: Vec<Vec<f64>>,
    pub k: usize,
}

fn lex(a: &[Vec<f64>], b: &[Vec<f64>]) -> Ordering {
    for (p, q) in a.iter().zip(b) {
        for (x, y) in p.iter().zip(q) {
            match x.partial_cmp(y) {
                Some(Ordering::Equal) | None => {}
                Some(o) => return o,
            }
        }
    }
    Ordering::Equal
}

fn rotate(points: &[Vec<f64>], r: usize) -> Vec<Vec<f64>> {
    let k = points.len();
    (0..k).map(|j| points[(j + r) % k].clone()).collect()
}

impl CyclicTuple {
    /// Validates separation and prime length, wraps angles and canonicalises.
    pub fn new(m: &Manifold, points: Vec<Vec<f64>>, cfg: &Config) -> Result<Self> {
        let k = points.len();
        if !linalg::is_prime(k as u32) {
            return Err(Error::InvalidArgument(alloc::format!("tuple length {k} is not prime")));
        }
        let sep = cfg.correspondence.sep_factor * m.diameter();
        for (i, p) in points.iter().enumerate() {
            check_on_manifold(m, p, cfg.metric_tol)?;
            for q in &points[i + 1..] {
                if m.distance(p, q) <= sep {
                    return Err(Error::InvalidArgument("tuple points are not pairwise distinct".into()));
                }
            }
        }
        let wrapped: Vec<Vec<f64>> = points.iter().map(|p| m.wrap(p)).collect();
        Ok(Self { points: canonical_rotation(&wrapped).1, k })
    }

    /// Concatenated coordinates, a point of the k-fold product.
    pub fn flat(&self) -> Vec<f64> {
        self.points.concat()
    }
}

/// The minimal rotation and the offset r with result[j] = points[j + r].
fn canonical_rotation(points: &[Vec<f64>]) -> (usize, Vec<Vec<f64>>) {
    let mut best = (0, points.to_vec());
    for r in 1..points.len() {
        let cand = rotate(points, r);
        if lex(&cand, &best.1) == Ordering::Less {
            best = (r, cand);
        }
    }
    best
}

/// The lifted field (X(x_1), ..., X(x_k)) on the k-fold product of M.
pub struct LiftedField<'a> {
    inner: &'a dyn VectorFieldFamily,
    manifold: Manifold,
    label: String,
    fd_step: f64,
}

impl<'a> LiftedField<'a> {
    pub fn new(inner: &'a dyn VectorFieldFamily, k: usize, fd_step: f64) -> Self {
        Self {
            inner,
            manifold: Manifold::Product { base: Box::new(inner.manifold().clone()), k },
            label: alloc::format!("{}^{k}", inner.label()),
            fd_step,
        }
    }

    fn n(&self) -> usize {
        self.inner.manifold().ambient_dim()
    }
}

impl VectorFieldFamily for LiftedField<'_> {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let n = self.n();
        for (xs, os) in x.chunks(n).zip(out.chunks_mut(n)) {
            self.inner.eval_into(xs, t, os);
        }
    }

    fn jacobian(&self, x: &[f64], t: f64) -> Option<DMatrix<f64>> {
        let n = self.n();
        let mut j = DMatrix::zeros(x.len(), x.len());
        for (b, xs) in x.chunks(n).enumerate() {
            let block = flow::field_jacobian(self.inner, xs, t, self.fd_step);
            j.view_mut((b * n, b * n), (n, n)).copy_from(&block);
        }
        Some(j)
    }

    fn t_independent(&self) -> bool {
        self.inner.t_independent()
    }
}

/// Componentwise field values on a tuple.
pub fn lift_field(fam: &dyn VectorFieldFamily, tuple: &CyclicTuple, t: f64, cfg: &Config) -> Result<Vec<Vec<f64>>> {
    check_param(t)?;
    tuple.points.iter().map(|p| crate::geometry::eval_field(fam, p, t, cfg)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedOrbit {
    pub tuple: CyclicTuple,
    pub period: f64,
    /// The source orbit with its canonical base point.
    pub source: PeriodicOrbit,
    /// Cyclic shift after flowing for `period`, an element of Z/k.
    pub mu: u32,
    /// Multiplicity of the lifted orbit in the quotient by cyclic shifts.
    pub multiplicity: u32,
}

/// Shift s with flowed[j] = stored[j + s] for all j, if any.
fn detect_shift(m: &Manifold, stored: &[Vec<f64>], flowed: &[Vec<f64>], tol: f64) -> Option<u32> {
    let k = stored.len();
    (0..k).find(|&s| (0..k).all(|j| m.distance(&flowed[j], &stored[(j + s) % k]) <= tol)).map(|s| s as u32)
}

fn flow_tuple(fam: &dyn VectorFieldFamily, points: &[Vec<f64>], s: f64, t: f64, cfg: &Config) -> Result<Vec<Vec<f64>>> {
    points.iter().map(|p| flow::flow_map(fam, p, s, t, cfg).map(|r| r.endpoint)).collect()
}

/// Ful_k: the tuple (o(0), o(p/k), ..., o((k-1)p/k)) from the canonical base,
/// with period p/k.
pub fn fuller_map(fam: &dyn VectorFieldFamily, orbit: &PeriodicOrbit, k: u32, cfg: &Config) -> Result<LiftedOrbit> {
    if k < 2 || !linalg::is_prime(k) {
        return Err(Error::InvalidArgument(alloc::format!("k = {k} is not a prime")));
    }
    if orbit.multiplicity >= k {
        return Err(Error::MultiplicityTooHigh { m: orbit.multiplicity, k });
    }
    let m = fam.manifold();
    let t = orbit.param_t;
    let det = if orbit.degenerate { 0.0 } else { 1.0 };
    let source = orbits::finish_orbit(fam, &orbit.base, orbit.period, t, det, cfg)?.orbit;
    let step = source.period / k as f64;
    let mut raw = Vec::with_capacity(k as usize);
    raw.push(source.base.clone());
    for j in 1..k {
        raw.push(flow::flow_map(fam, &source.base, j as f64 * step, t, cfg)?.endpoint);
    }
    let tuple = CyclicTuple::new(m, raw, cfg)?;
    let tol = cfg.correspondence.closure_tol;
    let flowed = flow_tuple(fam, &tuple.points, step, t, cfg)?;
    let mu = detect_shift(m, &tuple.points, &flowed, tol);
    if mu != Some(1) {
        return Err(Error::ShiftMismatch { shift: mu });
    }
    // largest j < k for which the tuple returns to a rotation of itself after step / j
    let mut multiplicity = 1;
    for j in (2..k).rev() {
        let f = flow_tuple(fam, &tuple.points, step / j as f64, t, cfg)?;
        if detect_shift(m, &tuple.points, &f, tol).is_some() {
            multiplicity = j;
            break;
        }
    }
    Ok(LiftedOrbit { tuple, period: step, source, mu: 1, multiplicity })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub k: u32,
    pub original_index: i32,
    pub lifted_index: i32,
    pub index_match: bool,
    /// lifted period times k over the original period.
    pub period_ratio: f64,
    pub original_multiplicity: u32,
    pub lifted_multiplicity: u32,
    pub mult_match: bool,
    pub mu: u32,
    pub lifted_det: f64,
}

/// Fixed-point index of a lifted orbit: the return map of the product flow
/// at time p/k composed with the inverse cyclic shift.
pub fn lifted_index(fam: &dyn VectorFieldFamily, lifted: &LiftedOrbit, cfg: &Config) -> Result<(f64, i32)> {
    let k = lifted.tuple.k;
    let field = LiftedField::new(fam, k, cfg.fd_step);
    let t = lifted.source.param_t;
    let x = lifted.tuple.flat();
    let sol = flow::variational(&field, &x, lifted.period, t, cfg, false, false)?;
    let n = fam.manifold().ambient_dim();
    let nk = n * k;
    // (P^-1 z)_j = z_{j-1}
    let mut d = DMatrix::zeros(nk, nk);
    for j in 0..k {
        let src = (j + k - 1) % k;
        d.view_mut((j * n, 0), (n, nk)).copy_from(&sol.matrix.view((src * n, 0), (n, nk)));
    }
    let vx = field.eval(&x, t);
    let normal = linalg::scale(&vx, 1.0 / linalg::norm(&vx));
    let e = field.manifold().section_basis(&x, &normal);
    let a = section_return_matrix(&d, &e, &normal, &vx);
    let (det, sign) = sign_det_index(&a);
    if det.abs() <= cfg.index.nondegeneracy {
        return Err(Error::DegenerateLift);
    }
    Ok((det, sign))
}

/// Compares index, period and multiplicity of an orbit and its lift.
pub fn verify_correspondence(
    fam: &dyn VectorFieldFamily,
    orbit: &PeriodicOrbit,
    k: u32,
    cfg: &Config,
) -> Result<CorrespondenceReport> {
    let lifted = fuller_map(fam, orbit, k, cfg)?;
    let original = fixed_point_index(&lifted.source, fam, cfg)?;
    let (lifted_det, lifted_index) = lifted_index(fam, &lifted, cfg)?;
    Ok(CorrespondenceReport {
        k,
        original_index: original.fp_index,
        lifted_index,
        index_match: original.fp_index == lifted_index,
        period_ratio: lifted.period * k as f64 / orbit.period,
        original_multiplicity: lifted.source.multiplicity,
        lifted_multiplicity: lifted.multiplicity,
        mult_match: lifted.source.multiplicity == lifted.multiplicity,
        mu: lifted.mu,
        lifted_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::find_orbit;
    use crate::scenarios::{BlueSkyTorus, HopfField};
    use alloc::vec;
    use core::f64::consts::PI;

    fn cfg() -> Config {
        Config::default()
    }

    fn three_points() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 0.6, 0.8]]
    }

    #[test]
    fn lifted_field_is_componentwise() {
        let h = HopfField::new(4);
        let m = h.manifold().clone();
        let tup = CyclicTuple::new(&m, three_points(), &cfg()).unwrap();
        let vals = lift_field(&h, &tup, 0.0, &cfg()).unwrap();
        for (p, v) in tup.points.iter().zip(&vals) {
            assert_eq!(v, &h.eval(p, 0.0));
        }
    }

    #[test]
    fn shifted_tuples_share_a_canonical_form() {
        let m = Manifold::sphere3();
        let a = CyclicTuple::new(&m, three_points(), &cfg()).unwrap();
        let b = CyclicTuple::new(&m, rotate(&three_points(), 1), &cfg()).unwrap();
        assert_eq!(a, b);
        let again = CyclicTuple::new(&m, a.points.clone(), &cfg()).unwrap();
        assert_eq!(again, a);
    }

    #[test]
    fn coincident_points_are_rejected() {
        let m = Manifold::sphere3();
        let mut pts = three_points();
        pts[2] = pts[0].clone();
        assert!(matches!(CyclicTuple::new(&m, pts, &cfg()), Err(Error::InvalidArgument(_))));
        assert!(CyclicTuple::new(&m, three_points()[..2].to_vec(), &cfg()).is_ok());
        let four = vec![three_points(), vec![vec![0.0, 0.0, 0.8, 0.6]]].concat();
        assert!(CyclicTuple::new(&m, four, &cfg()).is_err());
    }

    #[test]
    fn multiplicity_must_stay_below_k() {
        let h = HopfField::new(4);
        let o = find_orbit(&h, &[1.0, 0.0, 0.0, 0.0], 4.0 * PI, 0.0, &cfg()).unwrap();
        assert_eq!(o.multiplicity, 2);
        assert_eq!(fuller_map(&h, &o, 2, &cfg()), Err(Error::MultiplicityTooHigh { m: 2, k: 2 }));
        let lifted = fuller_map(&h, &o, 3, &cfg()).unwrap();
        assert_eq!(lifted.multiplicity, 2);
        assert_eq!(lifted.mu, 1);
        assert!(matches!(fuller_map(&h, &o, 4, &cfg()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn hyperbolic_saddle_lifts_with_index_minus_one() {
        let f = BlueSkyTorus::standard();
        let o = find_orbit(&f, &[0.0, 0.0, 1.0], 6.0, 0.0, &cfg()).unwrap();
        let r = verify_correspondence(&f, &o, 2, &cfg()).unwrap();
        assert_eq!(r.original_index, -1);
        assert!(r.index_match);
        assert!((r.period_ratio - 1.0).abs() < 1e-10);
        assert!(r.mult_match);
    }

    #[test]
    fn lift_is_independent_of_the_base_point() {
        let f = BlueSkyTorus::standard();
        let o = find_orbit(&f, &[0.5, 0.0, 0.2], 6.0, 0.0, &cfg()).unwrap();
        let mut shifted = o.clone();
        shifted.base = flow::flow_map(&f, &o.base, 1.3, 0.0, &cfg()).unwrap().endpoint;
        let a = fuller_map(&f, &o, 3, &cfg()).unwrap();
        let b = fuller_map(&f, &shifted, 3, &cfg()).unwrap();
        assert!((a.period - b.period).abs() < 1e-8);
        let m = f.manifold();
        for (p, q) in a.tuple.points.iter().zip(&b.tuple.points) {
            assert!(m.distance(p, q) < 1e-6);
        }
        assert_eq!(a.period, a.source.period / 3.0);
    }

    #[test]
    fn every_builtin_orbit_lifts_with_mu_one() {
        for id in crate::scenarios::BUILTIN_IDS {
            let s = crate::scenarios::builtin(id).unwrap();
            let f = s.field();
            let cap = s.caps.sample.or(s.caps.levels.first().copied()).unwrap();
            let set = crate::orbits::sample_orbit_space(f.as_ref(), 0.0, cap, &s.seed_net(), &cfg()).unwrap();
            for o in set.orbits.iter().filter(|o| o.multiplicity < 3) {
                let lifted = fuller_map(f.as_ref(), o, 3, &cfg()).unwrap();
                assert_eq!(lifted.mu, 1, "{id}");
                assert!((lifted.period * 3.0 - o.period).abs() <= 1e-10 * o.period, "{id}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn canonical_form_is_idempotent_and_rotation_blind(
            angles in proptest::collection::vec(0.0f64..6.28, 6),
            r in 0usize..3,
        ) {
            let m = Manifold::sphere3();
            let pts: Vec<Vec<f64>> = (0..3)
                .map(|j| {
                    let (a, b) = (angles[2 * j], angles[2 * j + 1]);
                    let c = 0.3 + 0.2 * j as f64;
                    let s = (1.0 - c * c).sqrt();
                    vec![c * a.cos(), c * a.sin(), s * b.cos(), s * b.sin()]
                })
                .collect();
            let a = CyclicTuple::new(&m, pts.clone(), &cfg()).unwrap();
            let b = CyclicTuple::new(&m, rotate(&pts, r), &cfg()).unwrap();
            proptest::prop_assert_eq!(&a, &b);
            proptest::prop_assert_eq!(&CyclicTuple::new(&m, a.points.clone(), &cfg()).unwrap(), &a);
        }
    }
}
