//! Finitely supported elements of the Lipschitz-free space over a finite
//! pointed metric space, and Lipschitz functions acting on them.
//!
//! The norm of `mu = sum a_p delta_p` is the optimal transport cost between
//! its positive and negative parts, the base point absorbing the imbalance.
//! Each norm computation also yields a 1-Lipschitz function attaining the
//! norm, which certifies optimality by weak duality.

mod flow;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{ExampleSpace, FiniteMetricSpace};
use crate::rational::{fmt_q, parse_q, ExactValue, Q};

/// A finite rational combination of point evaluations, `delta_base = 0`.
#[derive(Clone, PartialEq, Eq)]
pub struct FreeElement<'s> {
    space: &'s FiniteMetricSpace,
    coeffs: BTreeMap<usize, Q>,
}

impl fmt::Debug for FreeElement<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (p, c) in &self.coeffs {
            m.entry(&self.space.name(*p), &fmt_q(c));
        }
        m.finish()
    }
}

impl<'s> FreeElement<'s> {
    pub fn zero(space: &'s FiniteMetricSpace) -> Self {
        FreeElement {
            space,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn delta(space: &'s FiniteMetricSpace, p: usize) -> Result<Self> {
        Self::from_coeffs(space, [(p, Q::one())])
    }

    /// Collects coefficients, summing repeats and dropping the base point and
    /// zero entries.
    pub fn from_coeffs(space: &'s FiniteMetricSpace, coeffs: impl IntoIterator<Item = (usize, Q)>) -> Result<Self> {
        let mut out = Self::zero(space);
        for (p, c) in coeffs {
            space.check_point(p)?;
            out.add_term(p, c);
        }
        Ok(out)
    }

    fn add_term(&mut self, p: usize, c: Q) {
        if p == self.space.base() || c.is_zero() {
            return;
        }
        let e = self.coeffs.entry(p).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(&p);
        }
    }

    pub fn space(&self) -> &'s FiniteMetricSpace {
        self.space
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, Q> {
        &self.coeffs
    }

    pub fn coeff(&self, p: usize) -> Q {
        self.coeffs.get(&p).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        self.coeffs.keys().copied().collect()
    }

    pub fn scale(&self, s: &Q) -> Self {
        let mut out = Self::zero(self.space);
        for (p, c) in &self.coeffs {
            out.add_term(*p, c * s);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(
            std::ptr::eq(self.space, other.space),
            "elements live in different spaces"
        );
        let mut out = self.clone();
        for (p, c) in &other.coeffs {
            out.add_term(*p, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Q::one()))
    }

    /// Signed measure of total mass zero: the coefficients plus the balancing
    /// atom at the base point.
    pub fn balanced_atoms(&self) -> BTreeMap<usize, Q> {
        let mut atoms = self.coeffs.clone();
        let total: Q = self.coeffs.values().sum();
        if !total.is_zero() {
            atoms.insert(self.space.base(), -total);
        }
        atoms
    }

    /// Pushes every atom (including the balancing base atom) through `map`.
    pub fn push_forward(&self, map: impl Fn(usize) -> usize) -> Self {
        let mut out = Self::zero(self.space);
        for (p, c) in self.balanced_atoms() {
            out.add_term(map(p), c);
        }
        out
    }

    pub fn to_json(&self) -> FreeElementJson {
        FreeElementJson {
            space: None,
            coeffs: self
                .coeffs
                .iter()
                .map(|(p, c)| (self.space.name(*p).to_string(), fmt_q(c)))
                .collect(),
        }
    }
}

/// `{ "space": <optional reference>, "coeffs": { id: "p/q" } }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FreeElementJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<serde_json::Value>,
    pub coeffs: BTreeMap<String, String>,
}

impl FreeElementJson {
    pub fn resolve<'s>(&self, space: &'s FiniteMetricSpace) -> Result<FreeElement<'s>> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(id, c)| Ok((space.index_of(id)?, parse_q(c)?)))
            .collect::<Result<Vec<_>>>()?;
        FreeElement::from_coeffs(space, coeffs)
    }
}

/// `m_xy = (delta_x - delta_y) / d(x, y)`.
pub fn molecule(space: &FiniteMetricSpace, x: usize, y: usize) -> Result<FreeElement<'_>> {
    space.check_point(x)?;
    space.check_point(y)?;
    if x == y {
        return Err(Error::Precondition("molecule needs two distinct points".into()));
    }
    let w = space.d(x, y).recip();
    FreeElement::from_coeffs(space, [(x, w.clone()), (y, -w)])
}

/// A real-valued function on the points, normalized to vanish at the base.
#[derive(Clone, PartialEq, Eq)]
pub struct LipschitzFunction<'s> {
    space: &'s FiniteMetricSpace,
    values: Vec<Q>,
}

impl fmt::Debug for LipschitzFunction<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (p, v) in self.values.iter().enumerate() {
            m.entry(&self.space.name(p), &fmt_q(v));
        }
        m.finish()
    }
}

impl<'s> LipschitzFunction<'s> {
    /// Takes one value per point and shifts them so that `f(base) = 0`.
    pub fn new(space: &'s FiniteMetricSpace, values: Vec<Q>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Precondition(format!(
                "expected {} values, got {}",
                space.len(),
                values.len()
            )));
        }
        let shift = values[space.base()].clone();
        Ok(LipschitzFunction {
            space,
            values: values.into_iter().map(|v| v - &shift).collect(),
        })
    }

    pub fn from_fn(space: &'s FiniteMetricSpace, f: impl Fn(usize) -> Q) -> Self {
        Self::new(space, (0..space.len()).map(f).collect()).expect("lengths match")
    }

    pub fn zero(space: &'s FiniteMetricSpace) -> Self {
        Self::from_fn(space, |_| Q::zero())
    }

    pub fn space(&self) -> &'s FiniteMetricSpace {
        self.space
    }

    pub fn value(&self, p: usize) -> &Q {
        &self.values[p]
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn lip_norm(&self) -> Q {
        lip_constant(self.space, self.values.iter().enumerate())
    }

    pub fn eval(&self, mu: &FreeElement<'_>) -> Q {
        eval_functional(self, mu)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.space, |p| &self.values[p] + &other.values[p])
    }
}

fn lip_constant<'a>(space: &FiniteMetricSpace, pts: impl Iterator<Item = (usize, &'a Q)> + Clone) -> Q {
    let mut best = Q::zero();
    for (i, (p, fp)) in pts.clone().enumerate() {
        for (q, fq) in pts.clone().skip(i + 1) {
            if p == q {
                continue;
            }
            let r = (fp - fq).abs() / space.d(p, q);
            if r > best {
                best = r;
            }
        }
    }
    best
}

pub fn lip_norm(f: &LipschitzFunction<'_>) -> Q {
    f.lip_norm()
}

/// `f(mu) = sum_p mu_p f(p)`.
pub fn eval_functional(f: &LipschitzFunction<'_>, mu: &FreeElement<'_>) -> Q {
    mu.coeffs.iter().fold(Q::zero(), |acc, (p, c)| acc + c * &f.values[*p])
}

/// Optimal transport plan for `mu` together with a norming 1-Lipschitz
/// function.
#[derive(Debug, Clone)]
pub struct NormCertificate<'s> {
    pub norm: Q,
    /// `(from, to, mass)` in point indices.
    pub plan: Vec<(usize, usize, Q)>,
    pub dual: LipschitzFunction<'s>,
}

impl NormCertificate<'_> {
    /// Checks the plan against the element's excesses and the dual function
    /// against the Lipschitz constraint and the value of the plan.
    pub fn verify(&self, mu: &FreeElement<'_>) -> bool {
        let space = mu.space;
        let mut net: BTreeMap<usize, Q> = BTreeMap::new();
        let mut cost = Q::zero();
        for (a, b, m) in &self.plan {
            if !m.is_positive() {
                return false;
            }
            *net.entry(*a).or_insert_with(Q::zero) += m;
            *net.entry(*b).or_insert_with(Q::zero) -= m;
            cost += m * space.d(*a, *b);
        }
        net.retain(|_, v| !v.is_zero());
        let mut atoms = mu.balanced_atoms();
        atoms.retain(|_, v| !v.is_zero());
        atoms == net && cost == self.norm && self.dual.lip_norm() <= Q::one() && self.dual.eval(mu) == self.norm
    }
}

/// Exact norm with its transport plan and dual certificate.
pub fn free_norm_certified<'s>(mu: &FreeElement<'s>) -> NormCertificate<'s> {
    let space = mu.space;
    let atoms = mu.balanced_atoms();
    if atoms.is_empty() {
        return NormCertificate {
            norm: Q::zero(),
            plan: Vec::new(),
            dual: LipschitzFunction::zero(space),
        };
    }
    let nodes: Vec<usize> = atoms.keys().copied().collect();
    let cost: Vec<Vec<Q>> = nodes
        .iter()
        .map(|&a| nodes.iter().map(|&b| space.d(a, b).clone()).collect())
        .collect();
    let excess: Vec<Q> = atoms.values().cloned().collect();
    let sol = flow::min_cost_transshipment(&cost, &excess);
    let partial: BTreeMap<usize, Q> = nodes
        .iter()
        .zip(sol.potential.iter())
        .map(|(&p, v)| (p, v.clone()))
        .collect();
    let dual = extend_with_constant(space, &partial, &Q::one());
    let cert = NormCertificate {
        norm: sol.cost,
        plan: sol.flows.into_iter().map(|(a, b, m)| (nodes[a], nodes[b], m)).collect(),
        dual,
    };
    debug_assert!(cert.verify(mu), "transport duality certificate failed");
    cert
}

/// Exact Lipschitz-free norm.
pub fn free_norm(mu: &FreeElement<'_>) -> Q {
    free_norm_certified(mu).norm
}

/// `p -> max_a (partial(a) - lip * d(p, a))`, shifted to vanish at the base.
fn extend_with_constant<'s>(
    space: &'s FiniteMetricSpace,
    partial: &BTreeMap<usize, Q>,
    lip: &Q,
) -> LipschitzFunction<'s> {
    LipschitzFunction::from_fn(space, |p| {
        partial
            .iter()
            .map(|(a, v)| v - lip * space.d(p, *a))
            .max()
            .expect("partial data is nonempty")
    })
}

/// McShane extension of Lipschitz data given on a subset, keeping the
/// Lipschitz constant of the data.
pub fn mcshane_extend<'s>(space: &'s FiniteMetricSpace, partial: &BTreeMap<usize, Q>) -> Result<LipschitzFunction<'s>> {
    if partial.is_empty() {
        return Err(Error::Precondition("McShane extension of empty data".into()));
    }
    for &p in partial.keys() {
        space.check_point(p)?;
    }
    let lip = lip_constant(space, partial.iter().map(|(p, v)| (*p, v)));
    Ok(extend_with_constant(space, partial, &lip))
}

/// `S(f, width) = { mu in B : f(mu) > 1 - width }`.
#[derive(Debug, Clone)]
pub struct Slice<'s> {
    functional: LipschitzFunction<'s>,
    width: Q,
}

impl<'s> Slice<'s> {
    pub fn new(functional: LipschitzFunction<'s>, width: Q) -> Result<Self> {
        if functional.lip_norm() > Q::one() {
            return Err(Error::Precondition("slice functional has Lipschitz norm > 1".into()));
        }
        if !width.is_positive() || width > Q::from_integer(2.into()) {
            return Err(Error::Precondition("slice width must lie in (0, 2]".into()));
        }
        Ok(Slice { functional, width })
    }

    pub fn functional(&self) -> &LipschitzFunction<'s> {
        &self.functional
    }

    pub fn width(&self) -> &Q {
        &self.width
    }

    pub fn contains(&self, mu: &FreeElement<'_>) -> bool {
        self.functional.eval(mu) > Q::one() - &self.width && free_norm(mu) <= Q::one()
    }
}

pub fn slice_members<'s>(slice: &Slice<'_>, candidates: &[FreeElement<'s>]) -> Vec<FreeElement<'s>> {
    candidates.iter().filter(|m| slice.contains(m)).cloned().collect()
}

/// Dentingness of `m_uv` in a generated example space, certified only at the
/// space's truncation level: `u, v` avoid `{x, y}` and `[u, v] = {u, v}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DentingCertificate {
    pub denting: bool,
    pub level: u32,
}

pub fn denting_molecule_certificate(ex: &ExampleSpace, u: usize, v: usize) -> Result<DentingCertificate> {
    ex.space.check_point(u)?;
    ex.space.check_point(v)?;
    let denting = u != v
        && ![ex.x, ex.y].contains(&u)
        && ![ex.x, ex.y].contains(&v)
        && ex.space.segment(u, v)? == {
            let mut s = vec![u, v];
            s.sort_unstable();
            s
        };
    Ok(DentingCertificate {
        denting,
        level: ex.level,
    })
}

/// All ordered pairs `(p, q)` whose molecule is certified denting at this level.
pub fn certified_denting_pairs(ex: &ExampleSpace) -> Vec<(usize, usize)> {
    let n = ex.space.len();
    let mut out = Vec::new();
    for p in 0..n {
        for q in 0..n {
            if denting_molecule_certificate(ex, p, q).is_ok_and(|c| c.denting) {
                out.push((p, q));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DentingDistance {
    pub p: String,
    pub q: String,
    pub in_slice: bool,
    pub distance: ExactValue,
    #[serde(skip)]
    pub exact_distance: Q,
}

/// Distances from `mu` to every level-certified denting molecule.
#[derive(Debug, Clone, Serialize)]
pub struct DentingReport {
    pub certificate: String,
    pub level: u32,
    pub entries: Vec<DentingDistance>,
    /// Every certified denting molecule inside the slice is at distance 2.
    pub all_in_slice_at_two: bool,
    /// In-slice molecules at distance different from 2.
    pub exceptions: Vec<(String, String)>,
}

pub fn distance_to_denting_report(ex: &ExampleSpace, mu: &FreeElement<'_>, slice: &Slice<'_>) -> Result<DentingReport> {
    if !std::ptr::eq(mu.space, &ex.space) {
        return Err(Error::Precondition("element does not live in the example space".into()));
    }
    if free_norm(mu) != Q::one() {
        return Err(Error::Precondition("element is not on the unit sphere".into()));
    }
    let two = Q::from_integer(2.into());
    let mut entries = Vec::new();
    let mut exceptions = Vec::new();
    for (p, q) in certified_denting_pairs(ex) {
        let m = molecule(&ex.space, p, q)?;
        let in_slice = slice.contains(&m);
        let dist = free_norm(&mu.sub(&m));
        if in_slice && dist != two {
            exceptions.push((ex.space.name(p).to_string(), ex.space.name(q).to_string()));
        }
        entries.push(DentingDistance {
            p: ex.space.name(p).to_string(),
            q: ex.space.name(q).to_string(),
            in_slice,
            distance: ExactValue::from(&dist),
            exact_distance: dist,
        });
    }
    Ok(DentingReport {
        certificate: format!("level-{} certificate", ex.level),
        level: ex.level,
        all_in_slice_at_two: exceptions.is_empty(),
        entries,
        exceptions,
    })
}
