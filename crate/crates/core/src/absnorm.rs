//! Absolute normalized norms on the plane.
//!
//! Two families are representable. Polyhedral norms are given by the vertices
//! of the unit sphere in the closed positive quadrant, from `(1,0)` to
//! `(0,1)`. The `l_p` norms with rational `p`, or `p = inf`, are the other
//! family. Polyhedral computations are exact. For `l_p`, norm values are not
//! materialized. Comparisons are exact for `p = r/s` with `s <= 2` or when
//! the roots involved are rational, and use certified rational enclosures
//! otherwise.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{fmt_q, parse_q, q, qi, Q};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlanePoint {
    pub a: Q,
    pub b: Q,
}

impl PlanePoint {
    pub fn new(a: Q, b: Q) -> Self {
        PlanePoint { a, b }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        PlanePoint::new(&self.a + &o.a, &self.b + &o.b)
    }

    pub fn sub(&self, o: &Self) -> Self {
        PlanePoint::new(&self.a - &o.a, &self.b - &o.b)
    }

    pub fn scale(&self, s: &Q) -> Self {
        PlanePoint::new(&self.a * s, &self.b * s)
    }

    pub fn dot(&self, o: &Self) -> Q {
        &self.a * &o.a + &self.b * &o.b
    }

    pub fn cross(&self, o: &Self) -> Q {
        &self.a * &o.b - &self.b * &o.a
    }

    pub fn abs(&self) -> Self {
        PlanePoint::new(self.a.abs(), self.b.abs())
    }

    pub fn to_strings(&self) -> [String; 2] {
        [fmt_q(&self.a), fmt_q(&self.b)]
    }
}

pub fn pt(a: Q, b: Q) -> PlanePoint {
    PlanePoint::new(a, b)
}

/// Polyhedral absolute normalized norm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polyhedral {
    cone: Vec<PlanePoint>,
    normals: Vec<PlanePoint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exponent {
    Finite(Q),
    Infinity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbsNorm2 {
    Polyhedral(Polyhedral),
    Lp(Exponent),
}

/// Normal `n` with `n . p = n . q = 1` for the sphere segment `[p, q]`.
fn facet_normal(p: &PlanePoint, q: &PlanePoint) -> PlanePoint {
    let det = p.cross(q);
    pt((&q.b - &p.b) / &det, (&p.a - &q.a) / &det)
}

impl Polyhedral {
    /// Validates and stores the positive-cone vertex list.
    pub fn new(cone: Vec<PlanePoint>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidNorm(m.to_string()));
        if cone.len() < 2 {
            return bad("need at least the two axis vertices");
        }
        if cone[0] != pt(qi(1), qi(0)) || cone[cone.len() - 1] != pt(qi(0), qi(1)) {
            return bad("cone vertices must run from (1,0) to (0,1)");
        }
        for w in cone.windows(2) {
            if w[1].a > w[0].a || w[1].b < w[0].b || w[0] == w[1] {
                return bad("cone vertices must be monotone and distinct");
            }
        }
        for v in &cone[1..cone.len() - 1] {
            if !v.a.is_positive() || !v.b.is_positive() {
                return bad("intermediate vertices must lie in the open quadrant");
            }
        }
        for w in cone.windows(3) {
            if !w[1].sub(&w[0]).cross(&w[2].sub(&w[1])).is_positive() {
                return bad("cone vertices must be in strictly convex position");
            }
        }
        let normals = cone.windows(2).map(|w| facet_normal(&w[0], &w[1])).collect();
        Ok(Polyhedral { cone, normals })
    }

    pub fn l1() -> Self {
        Self::new(vec![pt(qi(1), qi(0)), pt(qi(0), qi(1))]).expect("valid")
    }

    pub fn linf() -> Self {
        Self::new(vec![pt(qi(1), qi(0)), pt(qi(1), qi(1)), pt(qi(0), qi(1))]).expect("valid")
    }

    /// Cone vertices `(1,0), (3/4,1/2), (1/2,3/4), (0,1)`.
    pub fn figure_alpha() -> Self {
        Self::new(vec![
            pt(qi(1), qi(0)),
            pt(q(3, 4), q(1, 2)),
            pt(q(1, 2), q(3, 4)),
            pt(qi(0), qi(1)),
        ])
        .expect("valid")
    }

    pub fn cone_vertices(&self) -> &[PlanePoint] {
        &self.cone
    }

    /// Facet normals in the positive quadrant, one per cone edge.
    pub fn facet_normals(&self) -> &[PlanePoint] {
        &self.normals
    }

    pub fn eval(&self, x: &PlanePoint) -> Q {
        let x = x.abs();
        self.normals
            .iter()
            .map(|n| n.dot(&x))
            .max()
            .expect("at least one facet")
    }

    /// Dual norm value `max { a|c| + b|d| : N(a,b) = 1 }`.
    pub fn dual_eval(&self, f: &PlanePoint) -> Q {
        let f = f.abs();
        self.cone.iter().map(|v| v.dot(&f)).max().expect("nonempty")
    }

    /// Polar norm: its cone vertices are the facet normals, framed by the
    /// axis points, with repeats and collinear points dropped.
    pub fn dual(&self) -> Polyhedral {
        let mut list = vec![pt(qi(1), qi(0))];
        list.extend(self.normals.iter().cloned());
        list.push(pt(qi(0), qi(1)));
        list.dedup();
        loop {
            let drop = (1..list.len().saturating_sub(1))
                .find(|&i| list[i].sub(&list[i - 1]).cross(&list[i + 1].sub(&list[i])).is_zero());
            match drop {
                Some(i) => {
                    list.remove(i);
                }
                None => break,
            }
        }
        Polyhedral::new(list).expect("polar of a valid norm is valid")
    }

    /// Extreme points of the unit ball in counterclockwise order.
    pub fn extreme_points(&self) -> Vec<PlanePoint> {
        let c = &self.cone;
        let mut ring: Vec<PlanePoint> = Vec::new();
        ring.extend(c.iter().cloned());
        ring.extend(c.iter().rev().map(|v| pt(-v.a.clone(), v.b.clone())));
        ring.extend(c.iter().map(|v| pt(-v.a.clone(), -v.b.clone())));
        ring.extend(c.iter().rev().map(|v| pt(v.a.clone(), -v.b.clone())));
        ring.dedup();
        if ring.first() == ring.last() {
            ring.pop();
        }
        loop {
            let n = ring.len();
            let drop = (0..n).find(|&i| {
                let prev = &ring[(i + n - 1) % n];
                let next = &ring[(i + 1) % n];
                ring[i].sub(prev).cross(&next.sub(&ring[i])).is_zero()
            });
            match drop {
                Some(i) => {
                    ring.remove(i);
                }
                None => break,
            }
        }
        ring
    }
}

impl Exponent {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "inf" {
            return Ok(Exponent::Infinity);
        }
        let p = parse_q(s)?;
        if p < Q::one() {
            return Err(Error::InvalidNorm(format!("exponent {s} is below 1")));
        }
        Ok(Exponent::Finite(p))
    }

    /// Conjugate exponent `p / (p - 1)`.
    pub fn conjugate(&self) -> Self {
        match self {
            Exponent::Infinity => Exponent::Finite(Q::one()),
            Exponent::Finite(p) if p.is_one() => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - Q::one())),
        }
    }

    fn render(&self) -> String {
        match self {
            Exponent::Infinity => "inf".into(),
            Exponent::Finite(p) => fmt_q(p),
        }
    }
}

/// Rational `k`-th root when it exists.
fn exact_root(x: &Q, k: u32) -> Option<Q> {
    let root = |n: &BigInt| {
        let r = n.nth_root(k);
        (num_traits::pow(r.clone(), k as usize) == *n).then_some(r)
    };
    Some(Q::new(root(x.numer())?, root(x.denom())?))
}

/// Bisection bounds `lo <= x^(1/k) <= hi` for `x >= 0`.
fn root_bounds(x: &Q, k: u32, iters: u32) -> (Q, Q) {
    if let Some(r) = exact_root(x, k) {
        return (r.clone(), r);
    }
    let mut lo = Q::zero();
    let mut hi = Q::from_integer(x.ceil().to_integer().max(BigInt::one()));
    let half = q(1, 2);
    for _ in 0..iters {
        let mid = (&lo + &hi) * &half;
        if num_traits::pow(mid.clone(), k as usize) <= *x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

fn qpow(x: &Q, e: &BigInt) -> Q {
    let e: usize = e.try_into().expect("small exponent");
    num_traits::pow(x.clone(), e)
}

const BISECTION_ROUNDS: [u32; 3] = [64, 160, 400];

impl AbsNorm2 {
    pub fn lp(p: Q) -> Result<Self> {
        if p < Q::one() {
            return Err(Error::InvalidNorm("exponent below 1".into()));
        }
        Ok(AbsNorm2::Lp(Exponent::Finite(p)))
    }

    pub fn figure_alpha() -> Self {
        AbsNorm2::Polyhedral(Polyhedral::figure_alpha())
    }

    /// Named norms: `l1`, `l2`, `linf`, `lp:<p>`, `figure-alpha`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "l1" => Ok(AbsNorm2::Polyhedral(Polyhedral::l1())),
            "linf" => Ok(AbsNorm2::Polyhedral(Polyhedral::linf())),
            "l2" => Self::lp(qi(2)),
            "figure-alpha" => Ok(Self::figure_alpha()),
            _ => match name.strip_prefix("lp:") {
                Some(p) => Ok(AbsNorm2::Lp(Exponent::parse(p)?)),
                None => Err(Error::Config(format!("unknown norm {name:?}"))),
            },
        }
    }

    /// Polyhedral form, including `l_1` and `l_inf`.
    pub fn as_polyhedral(&self) -> Option<Polyhedral> {
        match self {
            AbsNorm2::Polyhedral(p) => Some(p.clone()),
            AbsNorm2::Lp(Exponent::Infinity) => Some(Polyhedral::linf()),
            AbsNorm2::Lp(Exponent::Finite(p)) if p.is_one() => Some(Polyhedral::l1()),
            AbsNorm2::Lp(_) => None,
        }
    }

    pub fn is_polyhedral(&self) -> bool {
        self.as_polyhedral().is_some()
    }

    /// `p = r/s` for `l_p` norms with `1 < p < inf`.
    fn strict_exponent(&self) -> Option<(BigInt, BigInt)> {
        match self {
            AbsNorm2::Lp(Exponent::Finite(p)) if !p.is_one() => Some((p.numer().clone(), p.denom().clone())),
            _ => None,
        }
    }

    /// Exact value where it is rational: polyhedral norms, and `l_p` points
    /// whose powers have rational roots.
    pub fn eval_exact(&self, x: &PlanePoint) -> Option<Q> {
        if let Some(p) = self.as_polyhedral() {
            return Some(p.eval(x));
        }
        let (r, s) = self.strict_exponent()?;
        let rr: u32 = (&r).try_into().ok()?;
        let ss: u32 = (&s).try_into().ok()?;
        let u = exact_root(&x.a.abs(), ss)?;
        let v = exact_root(&x.b.abs(), ss)?;
        let sum = qpow(&u, &r) + qpow(&v, &r);
        let w = exact_root(&sum, rr)?;
        Some(qpow(&w, &s))
    }

    /// Three-way comparison of `N(x)` with `t`.
    pub fn norm_cmp(&self, x: &PlanePoint, t: &Q) -> Result<Ordering> {
        if !t.is_positive() {
            return Ok(if x.is_zero() && t.is_zero() {
                Ordering::Equal
            } else {
                Ordering::Greater
            });
        }
        let y = x.scale(&t.recip()).abs();
        if let Some(v) = self.eval_exact(&y) {
            return Ok(v.cmp(&Q::one()));
        }
        let (r, s) = self.strict_exponent().expect("non-exact only for strict l_p");
        let big = |m: &str| Error::Undecided(format!("exponent too large: {m}"));
        let ss: u32 = (&s).try_into().map_err(|_| big("denominator"))?;
        // sum of |y_i|^(r/s) against 1
        let pa = qpow(&y.a, &r);
        let pb = qpow(&y.b, &r);
        if ss == 2 {
            let rest = Q::one() - &pa - &pb;
            let lhs = qi(4) * &pa * &pb;
            return Ok(if rest.is_negative() {
                Ordering::Greater
            } else {
                lhs.cmp(&(&rest * &rest))
            });
        }
        for iters in BISECTION_ROUNDS {
            let (la, ha) = root_bounds(&pa, ss, iters);
            let (lb, hb) = root_bounds(&pb, ss, iters);
            if la + lb > Q::one() {
                return Ok(Ordering::Greater);
            }
            if ha + hb < Q::one() {
                return Ok(Ordering::Less);
            }
        }
        Err(Error::Undecided(format!(
            "cannot separate the l_{} norm of ({}, {}) from {}",
            fmt_q(&(Q::new(r, s))),
            fmt_q(&x.a),
            fmt_q(&x.b),
            fmt_q(t)
        )))
    }

    /// Rational enclosure `lo <= N(x) <= hi`.
    pub fn norm_bounds(&self, x: &PlanePoint, iters: u32) -> (Q, Q) {
        if let Some(v) = self.eval_exact(x) {
            return (v.clone(), v);
        }
        let (r, s) = self.strict_exponent().expect("non-exact only for strict l_p");
        let rr: u32 = (&r).try_into().expect("small exponent");
        let ss: u32 = (&s).try_into().expect("small exponent");
        let (la, ha) = root_bounds(&qpow(&x.a.abs(), &r), ss, iters);
        let (lb, hb) = root_bounds(&qpow(&x.b.abs(), &r), ss, iters);
        let (lo, _) = root_bounds(&qpow(&(la + lb), &s), rr, iters);
        let (_, hi) = root_bounds(&qpow(&(ha + hb), &s), rr, iters);
        (lo, hi)
    }

    pub fn dual(&self) -> AbsNorm2 {
        match self {
            AbsNorm2::Polyhedral(p) => AbsNorm2::Polyhedral(p.dual()),
            AbsNorm2::Lp(e) => AbsNorm2::Lp(e.conjugate()),
        }
    }

    pub fn to_json(&self) -> NormJson {
        match self {
            AbsNorm2::Polyhedral(p) => NormJson::Polyhedral {
                cone_vertices: p.cone.iter().map(|v| v.to_strings()).collect(),
            },
            AbsNorm2::Lp(e) => NormJson::Lp { p: e.render() },
        }
    }
}

/// `{ "kind": "polyhedral", "cone_vertices": [["p/q","r/s"], ...] }` or
/// `{ "kind": "lp", "p": "p/q" | "inf" }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormJson {
    Polyhedral { cone_vertices: Vec<[String; 2]> },
    Lp { p: String },
}

impl NormJson {
    pub fn build(&self) -> Result<AbsNorm2> {
        match self {
            NormJson::Polyhedral { cone_vertices } => {
                let cone = cone_vertices
                    .iter()
                    .map(|[a, b]| Ok(pt(parse_q(a)?, parse_q(b)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(AbsNorm2::Polyhedral(Polyhedral::new(cone)?))
            }
            NormJson::Lp { p } => Ok(AbsNorm2::Lp(Exponent::parse(p)?)),
        }
    }
}

/// A unit-sphere point, given exactly or as the normalization `d / N(d)`
/// of a nonzero direction (for `l_p` spheres without rational points).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpherePoint {
    Exact(PlanePoint),
    Normalized(PlanePoint),
}

impl SpherePoint {
    /// Exact coordinates when they are rational.
    fn resolve(&self, n: &AbsNorm2) -> Result<Option<PlanePoint>> {
        match self {
            SpherePoint::Exact(x) => {
                if n.norm_cmp(x, &Q::one())? != Ordering::Equal {
                    return Err(Error::Precondition("point is not on the unit sphere".into()));
                }
                Ok(Some(x.clone()))
            }
            SpherePoint::Normalized(d) => {
                if d.is_zero() {
                    return Err(Error::Precondition("zero direction".into()));
                }
                Ok(n.eval_exact(d).map(|v| d.scale(&v.recip())))
            }
        }
    }
}

/// `x` is a v-point. Polyhedral: `x` is an extreme point. Strictly convex
/// `l_p`: never.
pub fn is_v_point(n: &AbsNorm2, x: &SpherePoint) -> Result<bool> {
    let exact = x.resolve(n)?;
    match n.as_polyhedral() {
        Some(p) => {
            let x = exact.expect("polyhedral norms have rational values");
            Ok(p.extreme_points().contains(&x))
        }
        None => Ok(false),
    }
}

/// Explicit `(y, z)` on the sphere with `N(x+y) = N(x+z) = 2 > N(y+z)`,
/// verified exactly. Uses the two extreme points adjacent to `x`.
pub fn v_point_witness(p: &Polyhedral, x: &PlanePoint) -> Option<(PlanePoint, PlanePoint)> {
    let ext = p.extreme_points();
    let i = ext.iter().position(|e| e == x)?;
    let n = ext.len();
    let y = ext[(i + n - 1) % n].clone();
    let z = ext[(i + 1) % n].clone();
    let two = qi(2);
    let ok = p.eval(&x.add(&y)) == two && p.eval(&x.add(&z)) == two && p.eval(&y.add(&z)) < two;
    ok.then_some((y, z))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub v1: PlanePoint,
    pub v2: PlanePoint,
    /// `x = lambda v1 + (1 - lambda) v2`.
    pub lambda: Q,
}

// Index k with x on the segment [ext[k], ext[k+1]].
fn facet_of(ext: &[PlanePoint], x: &PlanePoint) -> Option<usize> {
    let n = ext.len();
    (0..n).find(|&k| {
        let a = &ext[k];
        let b = &ext[(k + 1) % n];
        let ab = b.sub(a);
        let ax = x.sub(a);
        ab.cross(&ax).is_zero() && !ab.dot(&ax).is_negative() && ab.dot(&ax) <= ab.dot(&ab)
    })
}

/// Writes `x` as a convex combination of two v-points when possible.
pub fn vpoint_decomposition(n: &AbsNorm2, x: &SpherePoint) -> Result<Option<Decomposition>> {
    let exact = x.resolve(n)?;
    let Some(p) = n.as_polyhedral() else {
        return Ok(None);
    };
    let x = exact.expect("polyhedral norms have rational values");
    let ext = p.extreme_points();
    if ext.contains(&x) {
        return Ok(Some(Decomposition {
            v1: x.clone(),
            v2: x,
            lambda: Q::one(),
        }));
    }
    let k = facet_of(&ext, &x).expect("sphere points lie on a facet");
    let v1 = ext[k].clone();
    let v2 = ext[(k + 1) % ext.len()].clone();
    // x - v2 = lambda (v1 - v2)
    let d = v1.sub(&v2);
    let lambda = x.sub(&v2).dot(&d) / d.dot(&d);
    Ok(Some(Decomposition { v1, v2, lambda }))
}

/// Positive-quadrant sphere point `(a, b)` admits a decomposition into
/// v-points.
pub fn transfer_predicate(n: &AbsNorm2, x: &SpherePoint) -> Result<bool> {
    let dir = match x {
        SpherePoint::Exact(p) | SpherePoint::Normalized(p) => p,
    };
    if dir.a.is_negative() || dir.b.is_negative() {
        return Err(Error::Precondition("point must lie in the positive quadrant".into()));
    }
    Ok(vpoint_decomposition(n, x)?.is_some())
}

/// Certifies `N(x + y) < 2` for the normalizations of two directions.
/// Returns `false` when the enclosures never separate the value from 2.
pub fn certified_strict_midpoint(n: &AbsNorm2, dx: &PlanePoint, dy: &PlanePoint) -> Result<bool> {
    if dx.is_zero() || dy.is_zero() {
        return Err(Error::Precondition("zero direction".into()));
    }
    if dx.cross(dy).is_zero() && dx.dot(dy).is_positive() {
        // same normalized point, the midpoint has norm exactly 1
        return Ok(false);
    }
    for iters in BISECTION_ROUNDS {
        let (xl, xh) = n.norm_bounds(dx, iters);
        let (yl, yh) = n.norm_bounds(dy, iters);
        // |coordinate| bounds of the normalized points
        let coord = |d: &Q, lo: &Q, hi: &Q| (d.abs() / hi, d.abs() / lo);
        let sum_hi = |u: &Q, v: &Q| {
            let (ul, uh) = coord(u, &xl, &xh);
            let (vl, vh) = coord(v, &yl, &yh);
            if u.is_negative() == v.is_negative() || u.is_zero() || v.is_zero() {
                uh + vh
            } else {
                (&uh - &vl).max(&vh - &ul)
            }
        };
        let s = pt(sum_hi(&dx.a, &dy.a), sum_hi(&dx.b, &dy.b));
        let (_, hi) = n.norm_bounds(&s, iters);
        if hi < qi(2) {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SliceCase {
    /// `x` is an extreme point with neighbours `y1`, `y2`.
    Vertex,
    /// `x` lies inside the facet `[x1, x2]`.
    Facet,
}

/// A supporting slice `S(x*, alpha)` at `x` whose subslices all contain one
/// of the points in `keep`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportingSlice {
    pub case: SliceCase,
    pub functional: PlanePoint,
    pub alpha: Q,
    pub keep: Vec<PlanePoint>,
    /// Sphere points kept outside the slice.
    pub excluded: Vec<PlanePoint>,
}

pub fn supporting_slice_construction(p: &Polyhedral, x: &PlanePoint) -> Result<SupportingSlice> {
    if x.a.is_negative() || x.b.is_negative() {
        return Err(Error::Precondition(
            "point must lie in the closed positive quadrant".into(),
        ));
    }
    if p.eval(x) != Q::one() {
        return Err(Error::Precondition("point is not on the unit sphere".into()));
    }
    let ext = p.extreme_points();
    let n = ext.len();
    if let Some(i) = ext.iter().position(|e| e == x) {
        let y1 = ext[(i + n - 1) % n].clone();
        let y2 = ext[(i + 1) % n].clone();
        let f1 = facet_normal(&y1, x);
        let f2 = facet_normal(x, &y2);
        let functional = f1.add(&f2).scale(&q(1, 2));
        let alpha = (qi(2) - p.eval(&y1.add(&y2))) / qi(4);
        return Ok(SupportingSlice {
            case: SliceCase::Vertex,
            functional,
            alpha,
            keep: vec![x.clone()],
            excluded: vec![y1, y2],
        });
    }
    let k = facet_of(&ext, x).expect("sphere points lie on a facet");
    let x1 = ext[k].clone();
    let x2 = ext[(k + 1) % n].clone();
    let y1 = ext[(k + n - 1) % n].clone();
    let y2 = ext[(k + 2) % n].clone();
    let functional = facet_normal(&x1, &x2);
    let worst = p.eval(&y1.add(x)).max(p.eval(&y2.add(x)));
    let alpha = (qi(2) - worst) / qi(2);
    Ok(SupportingSlice {
        case: SliceCase::Facet,
        functional,
        alpha,
        keep: vec![x1, x2],
        excluded: vec![y1, y2],
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SliceVerification {
    pub functional_norm_one: bool,
    pub supports_x: bool,
    pub alpha_positive: bool,
    pub excluded_outside: bool,
    /// Extreme points inside the slice, all of which must be kept points.
    pub extreme_in_slice: Vec<[String; 2]>,
    pub passes: bool,
}

/// Every slice of the ball attains its sup at an extreme point, so a
/// subslice of `S(x*, alpha)` always contains an extreme point of
/// `S(x*, alpha)`. The check enumerates those exactly.
pub fn verify_supporting_slice(p: &Polyhedral, x: &PlanePoint, s: &SupportingSlice) -> SliceVerification {
    let level = Q::one() - &s.alpha;
    let inside: Vec<PlanePoint> = p
        .extreme_points()
        .into_iter()
        .filter(|e| s.functional.dot(e) > level)
        .collect();
    let functional_norm_one = p.dual_eval(&s.functional).is_one();
    let supports_x = s.functional.dot(x).is_one();
    let alpha_positive = s.alpha.is_positive();
    let excluded_outside = s.excluded.iter().all(|y| s.functional.dot(y) <= level);
    let contained = !inside.is_empty() && inside.iter().all(|e| s.keep.contains(e));
    SliceVerification {
        passes: functional_norm_one && supports_x && alpha_positive && excluded_outside && contained,
        functional_norm_one,
        supports_x,
        alpha_positive,
        excluded_outside,
        extreme_in_slice: inside.iter().map(|e| e.to_strings()).collect(),
    }
}

/// Rational point of the Euclidean unit circle in the positive quadrant,
/// `((1 - t^2) / (1 + t^2), 2t / (1 + t^2))` for `0 <= t <= 1`.
pub fn circle_point(t: &Q) -> PlanePoint {
    let d = Q::one() + t * t;
    pt((Q::one() - t * t) / &d, qi(2) * t / d)
}
