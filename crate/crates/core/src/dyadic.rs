//! The span of the functions `f_t`, `h_t` in `L1[0,1]`.
//!
//! For a node `t` (a nonempty bit string), `B_n^t` and `C_n^t` are the
//! `t`-th dyadic subintervals of `B_n = [2^-(n+1), 2^-n)` and
//! `C_n = 1/2 + B_n`, and
//!
//! ```text
//! f_t = 2^(|t|+1) (1_{C_|t|^t} + sum_{i <= |t|} 1_{B_i^t})
//! h_t = 2^(|t|+1) sum_{i >= 1} 1_{B_i^t}
//! ```
//!
//! Every finite combination is represented exactly by a [`DyadicStep`]: a
//! dense step function on a dyadic grid, together with a cutoff `K` below
//! which the function repeats its pattern on `B_{K+1}`, scaled into each
//! `B_i`, `i > K + 1`. Integrals over the tail then sum to exactly twice
//! the integral over `B_{K+1}`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{fmt_q, parse_q, pow2, q, qi, Q};

/// Largest grid resolution, `2^20` cells.
pub const MAX_RESOLUTION: u32 = 20;

/// A finite bit string `t = (t_1, ..., t_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node(Vec<u8>);

impl Node {
    pub fn root() -> Self {
        Node(Vec::new())
    }

    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Parse("node bits must be 0 or 1".into()));
        }
        if bits.len() > 40 {
            return Err(Error::Precondition("node deeper than 40".into()));
        }
        Ok(Node(bits))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::Parse(format!("invalid node {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }

    pub fn len(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    /// The bits read as a binary number, `t_1` most significant.
    pub fn value(&self) -> u64 {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn child(&self, bit: u8) -> Node {
        let mut v = self.0.clone();
        v.push(bit);
        Node(v)
    }

    /// Initial segment `t|m`.
    pub fn prefix(&self, m: u32) -> Node {
        Node(self.0[..m as usize].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Node) -> bool {
        other.0.starts_with(&self.0)
    }

    /// All nodes of length `n`, in lexicographic order.
    pub fn level(n: u32) -> Vec<Node> {
        (0..1u64 << n)
            .map(|v| Node((0..n).rev().map(|k| ((v >> k) & 1) as u8).collect()))
            .collect()
    }

    /// `S_t^m`: extensions of `self` by `m` bits.
    pub fn descendants(&self, m: u32) -> Vec<Node> {
        Node::level(m)
            .into_iter()
            .map(|s| {
                let mut v = self.0.clone();
                v.extend(s.0);
                Node(v)
            })
            .collect()
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Dyadic interval `[index / 2^level, (index + 1) / 2^level)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub level: u32,
    pub index: u64,
}

impl Interval {
    pub fn measure(&self) -> Q {
        pow2(-(self.level as i64))
    }

    pub fn start(&self) -> Q {
        Q::from_integer(self.index.into()) * self.measure()
    }

    pub fn end(&self) -> Q {
        Q::from_integer((self.index + 1).into()) * self.measure()
    }

    /// `i` with the interval inside `B_i`; `0` for the right half `[1/2, 1)`.
    /// `None` for intervals starting at 0.
    fn band(&self) -> Option<u32> {
        if self.index == 0 {
            return None;
        }
        let bitlen = 64 - self.index.leading_zeros();
        Some(self.level - bitlen)
    }
}

fn check_set_args(n: u32) -> Result<()> {
    if n < 1 {
        return Err(Error::Precondition("set index n must be at least 1".into()));
    }
    Ok(())
}

/// `B_n^t` as a list of dyadic intervals (a single one).
pub fn b_set(t: &Node, n: u32) -> Result<Vec<Interval>> {
    check_set_args(n)?;
    Ok(vec![Interval {
        level: n + 1 + t.len(),
        index: (1u64 << t.len()) | t.value(),
    }])
}

/// `C_n^t = 1/2 + B_n^t` as a list of dyadic intervals (a single one).
pub fn c_set(t: &Node, n: u32) -> Result<Vec<Interval>> {
    check_set_args(n)?;
    Ok(vec![Interval {
        level: n + 1 + t.len(),
        index: (((1u64 << n) + 1) << t.len()) | t.value(),
    }])
}

fn b_int(t: &Node, n: u32) -> Interval {
    b_set(t, n).expect("n >= 1")[0]
}

fn c_int(t: &Node, n: u32) -> Interval {
    c_set(t, n).expect("n >= 1")[0]
}

/// Step function on `2^resolution` cells, self-similar below `B_{cutoff+1}`.
/// Cells inside `[0, 2^-(cutoff+2))` are not used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicStep {
    cutoff: u32,
    resolution: u32,
    values: Vec<Q>,
}

impl DyadicStep {
    pub fn zero(cutoff: u32, resolution: u32) -> Result<Self> {
        let resolution = resolution.max(cutoff + 2);
        if resolution > MAX_RESOLUTION {
            return Err(Error::Resolution(format!(
                "resolution {resolution} exceeds {MAX_RESOLUTION}"
            )));
        }
        Ok(DyadicStep {
            cutoff,
            resolution,
            values: vec![Q::zero(); 1 << resolution],
        })
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    // First cell of B_{cutoff+1} and first cell of the head.
    fn tail_range(&self) -> (usize, usize) {
        let r = self.resolution;
        let k = self.cutoff;
        (1 << (r - k - 2), 1 << (r - k - 1))
    }

    /// Cells carrying information: the head and `B_{cutoff+1}`.
    fn live(&self) -> std::ops::Range<usize> {
        self.tail_range().0..self.values.len()
    }

    /// Adds `value` on a dyadic interval inside the head or `B_{cutoff+1}`.
    fn paint(&mut self, iv: Interval, value: &Q) {
        debug_assert!(iv.level <= self.resolution);
        let shift = self.resolution - iv.level;
        let lo = (iv.index << shift) as usize;
        let hi = ((iv.index + 1) << shift) as usize;
        debug_assert!(lo >= self.tail_range().0);
        for v in &mut self.values[lo..hi] {
            *v += value;
        }
    }

    fn refine(&mut self) -> Result<()> {
        if self.resolution + 1 > MAX_RESOLUTION {
            return Err(Error::Resolution(format!(
                "resolution {} exceeds {MAX_RESOLUTION}",
                self.resolution + 1
            )));
        }
        self.values = self.values.iter().flat_map(|v| [v.clone(), v.clone()]).collect();
        self.resolution += 1;
        Ok(())
    }

    /// Moves the cutoff one band deeper, copying the `B_{cutoff+1}` pattern
    /// into `B_{cutoff+2}` at the refined resolution.
    fn raise_cutoff(&mut self) -> Result<()> {
        let (lo, hi) = self.tail_range();
        let pattern = self.values[lo..hi].to_vec();
        self.refine()?;
        self.cutoff += 1;
        for v in &mut self.values[..lo] {
            *v = Q::zero();
        }
        self.values[lo..hi].clone_from_slice(&pattern);
        Ok(())
    }

    fn raise_to(&mut self, cutoff: u32, resolution: u32) -> Result<()> {
        while self.cutoff < cutoff {
            self.raise_cutoff()?;
        }
        while self.resolution < resolution {
            self.refine()?;
        }
        Ok(())
    }

    fn aligned(&self, other: &Self) -> Result<(DyadicStep, DyadicStep)> {
        let k = self.cutoff.max(other.cutoff);
        let mut a = self.clone();
        let mut b = other.clone();
        a.raise_to(k, 0)?;
        b.raise_to(k, 0)?;
        let r = a.resolution.max(b.resolution);
        a.raise_to(k, r)?;
        b.raise_to(k, r)?;
        Ok((a, b))
    }

    fn combine(&self, other: &Self, op: impl Fn(&Q, &Q) -> Q) -> Result<Self> {
        let (mut a, b) = self.aligned(other)?;
        for (x, y) in a.values.iter_mut().zip(&b.values) {
            *x = op(x, y);
        }
        Ok(a)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |x, y| x - y)
    }

    pub fn scale(&self, s: &Q) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// Cellwise sign, a functional of unit essential sup (or zero).
    pub fn sign(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.signum();
        }
        out
    }

    /// Integral of `w(values)` with the tail counted twice over `B_{cutoff+1}`.
    fn tail_integral(&self, w: impl Fn(usize, &Q) -> Q) -> Q {
        let (lo, hi) = self.tail_range();
        let mut head = Q::zero();
        let mut band = Q::zero();
        for (i, v) in self.values.iter().enumerate().skip(lo) {
            if i < hi {
                band += w(i, v);
            } else {
                head += w(i, v);
            }
        }
        (head + qi(2) * band) * pow2(-(self.resolution as i64))
    }

    pub fn l1_norm(&self) -> Q {
        self.tail_integral(|_, v| v.abs())
    }

    /// `integral of self * other`.
    pub fn pair(&self, other: &Self) -> Result<Q> {
        let (a, b) = self.aligned(other)?;
        Ok(a.tail_integral(|i, v| v * &b.values[i]))
    }

    /// Essential sup of `|self|`.
    pub fn sup_abs(&self) -> Q {
        self.values[self.live()]
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.values[self.live()].iter().all(|v| v.is_zero())
    }

    /// `f(x) != 0` implies `g(x) != 0` almost everywhere.
    pub fn support_within(&self, other: &Self) -> Result<bool> {
        let (a, b) = self.aligned(other)?;
        Ok(a.live().all(|i| a.values[i].is_zero() || !b.values[i].is_zero()))
    }

    /// Integral of `w(value)` over a dyadic interval not starting at 0.
    fn interval_integral(&self, iv: Interval, w: &impl Fn(&Q) -> Q) -> Result<Q> {
        let band = iv
            .band()
            .ok_or_else(|| Error::Precondition("interval must not start at 0".into()))?;
        if band > self.cutoff + 1 {
            // scale the interval up into B_{cutoff+1}
            let d = band - self.cutoff - 1;
            let image = Interval {
                level: iv.level - d,
                index: iv.index,
            };
            return Ok(pow2(-(d as i64)) * self.interval_integral(image, w)?);
        }
        if iv.level <= self.resolution {
            let shift = self.resolution - iv.level;
            let lo = (iv.index << shift) as usize;
            let hi = ((iv.index + 1) << shift) as usize;
            let s: Q = self.values[lo..hi].iter().map(w).sum();
            Ok(s * pow2(-(self.resolution as i64)))
        } else {
            let cell = (iv.index >> (iv.level - self.resolution)) as usize;
            Ok(w(&self.values[cell]) * iv.measure())
        }
    }

    pub fn integral_over(&self, iv: Interval) -> Result<Q> {
        self.interval_integral(iv, &|v: &Q| v.clone())
    }

    pub fn abs_integral_over(&self, iv: Interval) -> Result<Q> {
        self.interval_integral(iv, &|v: &Q| v.abs())
    }
}

/// `f_t` as an exact step function.
pub fn f_fn(t: &Node) -> Result<DyadicStep> {
    if t.is_empty() {
        return Err(Error::Precondition("f_t needs a nonempty node".into()));
    }
    let n = t.len();
    let mut s = DyadicStep::zero(n, 2 * n + 1)?;
    let w = pow2(n as i64 + 1);
    s.paint(c_int(t, n), &w);
    for i in 1..=n {
        s.paint(b_int(t, i), &w);
    }
    Ok(s)
}

/// `h_t` including its infinite tail.
pub fn h_fn(t: &Node) -> Result<DyadicStep> {
    if t.is_empty() {
        return Err(Error::Precondition("h_t needs a nonempty node".into()));
    }
    let n = t.len();
    let mut s = DyadicStep::zero(n, 2 * n + 2)?;
    let w = pow2(n as i64 + 1);
    for i in 1..=n + 1 {
        s.paint(b_int(t, i), &w);
    }
    Ok(s)
}

/// `h_t^m = 2^(|t|+1) (1_{C_{m+n}^t} + 1_{union_{i <= m+n} B_i^t})`, `n = |t|`.
pub fn h_fn_approx(t: &Node, m: u32) -> Result<DyadicStep> {
    if t.is_empty() {
        return Err(Error::Precondition("h_t needs a nonempty node".into()));
    }
    let n = t.len();
    let mut s = DyadicStep::zero(m + n, m + 2 * n + 1)?;
    let w = pow2(n as i64 + 1);
    s.paint(c_int(t, m + n), &w);
    for i in 1..=m + n {
        s.paint(b_int(t, i), &w);
    }
    Ok(s)
}

/// `<x, f_u>` from interval integrals of `x`, without building `f_u`.
pub fn pair_f(x: &DyadicStep, u: &Node) -> Result<Q> {
    let n = u.len();
    let mut s = x.integral_over(c_int(u, n))?;
    for i in 1..=n {
        s += x.integral_over(b_int(u, i))?;
    }
    Ok(s * pow2(n as i64 + 1))
}

/// `<x, h_t>` using the self-similar tail of `x`.
pub fn pair_h(x: &DyadicStep, t: &Node) -> Result<Q> {
    let n = t.len();
    let k = x.cutoff.max(n);
    let mut s = Q::zero();
    for i in 1..=k {
        s += x.integral_over(b_int(t, i))?;
    }
    s += qi(2) * x.integral_over(b_int(t, k + 1))?;
    Ok(s * pow2(n as i64 + 1))
}

/// `<x, h_t^m>` from interval integrals.
pub fn pair_h_approx(x: &DyadicStep, t: &Node, m: u32) -> Result<Q> {
    let n = t.len();
    let mut s = x.integral_over(c_int(t, m + n))?;
    for i in 1..=m + n {
        s += x.integral_over(b_int(t, i))?;
    }
    Ok(s * pow2(n as i64 + 1))
}

/// `sum alpha_t f_t + sum beta_t h_t` with finitely many nonzero terms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TreeSpanElement {
    pub f: BTreeMap<Node, Q>,
    pub h: BTreeMap<Node, Q>,
}

impl TreeSpanElement {
    pub fn f_only(f: BTreeMap<Node, Q>) -> Self {
        TreeSpanElement { f, h: BTreeMap::new() }.pruned()
    }

    pub fn h_only(h: BTreeMap<Node, Q>) -> Self {
        TreeSpanElement { f: BTreeMap::new(), h }.pruned()
    }

    pub fn single_f(t: Node, c: Q) -> Self {
        Self::f_only(BTreeMap::from([(t, c)]))
    }

    pub fn single_h(t: Node, c: Q) -> Self {
        Self::h_only(BTreeMap::from([(t, c)]))
    }

    fn pruned(mut self) -> Self {
        self.f.retain(|_, c| !c.is_zero());
        self.h.retain(|_, c| !c.is_zero());
        self
    }

    pub fn max_depth(&self) -> u32 {
        self.f.keys().chain(self.h.keys()).map(|t| t.len()).max().unwrap_or(0)
    }

    pub fn scale(&self, s: &Q) -> Self {
        TreeSpanElement {
            f: self.f.iter().map(|(t, c)| (t.clone(), c * s)).collect(),
            h: self.h.iter().map(|(t, c)| (t.clone(), c * s)).collect(),
        }
        .pruned()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (t, c) in &other.f {
            *out.f.entry(t.clone()).or_insert_with(Q::zero) += c;
        }
        for (t, c) in &other.h {
            *out.h.entry(t.clone()).or_insert_with(Q::zero) += c;
        }
        out.pruned()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Q::one()))
    }

    pub fn to_step(&self) -> Result<DyadicStep> {
        let mut acc = DyadicStep::zero(0, 2)?;
        for (t, c) in &self.f {
            acc = acc.add(&f_fn(t)?.scale(c))?;
        }
        for (t, c) in &self.h {
            acc = acc.add(&h_fn(t)?.scale(c))?;
        }
        Ok(acc)
    }

    /// The h-part rewritten at a single level `n >= max depth` by
    /// `h_t = (h_{t0} + h_{t1}) / 2`.
    pub fn h_at_level(&self, n: u32) -> BTreeMap<Node, Q> {
        let mut out = BTreeMap::new();
        for (t, c) in &self.h {
            let d = n - t.len();
            let share = c * pow2(-(d as i64));
            for u in t.descendants(d) {
                *out.entry(u).or_insert_with(Q::zero) += &share;
            }
        }
        out.retain(|_, c: &mut Q| !c.is_zero());
        out
    }

    pub fn to_json(&self) -> SpanJson {
        let m = |x: &BTreeMap<Node, Q>| x.iter().map(|(t, c)| (t.to_string(), fmt_q(c))).collect();
        SpanJson {
            f: m(&self.f),
            h: m(&self.h),
        }
    }
}

/// `{ "f": { "bitstring": "p/q" }, "h": { "bitstring": "p/q" } }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq, Default)]
pub struct SpanJson {
    #[serde(default)]
    pub f: BTreeMap<String, String>,
    #[serde(default)]
    pub h: BTreeMap<String, String>,
}

impl SpanJson {
    pub fn build(&self) -> Result<TreeSpanElement> {
        let m = |x: &BTreeMap<String, String>| {
            x.iter()
                .map(|(t, c)| {
                    let node = Node::parse(t)?;
                    if node.is_empty() {
                        return Err(Error::Parse("empty node in span element".into()));
                    }
                    Ok((node, parse_q(c)?))
                })
                .collect::<Result<BTreeMap<_, _>>>()
        };
        Ok(TreeSpanElement {
            f: m(&self.f)?,
            h: m(&self.h)?,
        }
        .pruned())
    }
}

pub fn l1_norm(e: &TreeSpanElement) -> Result<Q> {
    Ok(e.to_step()?.l1_norm())
}

/// Norm of the restriction to a union of disjoint dyadic intervals.
pub fn restricted_norm(e: &TreeSpanElement, region: &[Interval]) -> Result<Q> {
    let s = e.to_step()?;
    region.iter().map(|iv| s.abs_integral_over(*iv)).sum()
}

/// Closed form `2^-n sum_{|t|=n} sum_{j<=n} (|sum_{i=j}^n 2^(i-j) a_{t|i}| + |a_{t|j}|)`
/// for an f-span element, `n` its depth.
pub fn span_norm_formula(alpha: &BTreeMap<Node, Q>) -> Result<Q> {
    if alpha.keys().any(|t| t.is_empty()) {
        return Err(Error::Precondition("coefficients must sit on nonempty nodes".into()));
    }
    let n = alpha.keys().map(|t| t.len()).max().unwrap_or(0);
    let a = |t: &Node| alpha.get(t).cloned().unwrap_or_else(Q::zero);
    let mut total = Q::zero();
    for t in Node::level(n) {
        for j in 1..=n {
            let inner: Q = (j..=n).map(|i| pow2((i - j) as i64) * a(&t.prefix(i))).sum();
            total += inner.abs() + a(&t.prefix(j)).abs();
        }
    }
    Ok(total * pow2(-(n as i64)))
}

/// Exact check of
/// `|sum_{i=m}^n 2^(i-m) a_i| <= sum_{j=m+1}^n |sum_{i=j}^n 2^(i-j) a_i| + sum_{i=m}^n |a_i|`,
/// with `alpha[i - 1] = a_i`. Returns `(lhs, rhs, holds)`.
pub fn cascade_inequality_check(alpha: &[Q], m: usize, n: usize) -> Result<(Q, Q, bool)> {
    if m < 1 || m > n || n > alpha.len() {
        return Err(Error::Precondition("need 1 <= m <= n <= len".into()));
    }
    let a = |i: usize| &alpha[i - 1];
    let tail = |j: usize| -> Q { (j..=n).map(|i| pow2((i - j) as i64) * a(i)).sum() };
    let lhs = tail(m).abs();
    let rhs: Q = ((m + 1)..=n).map(|j| tail(j).abs()).sum::<Q>() + (m..=n).map(|i| a(i).abs()).sum::<Q>();
    let holds = lhs <= rhs;
    Ok((lhs, rhs, holds))
}

/// `||g restricted to B_1 u ... u B_m|| <= (1 - 2^-m) ||g||` for an f-span
/// element. Returns `(lhs, rhs, holds)`.
pub fn concentration_check(g: &TreeSpanElement, m: u32) -> Result<(Q, Q, bool)> {
    if !g.h.is_empty() {
        return Err(Error::Precondition("concentration applies to the f-span".into()));
    }
    if m < 1 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    let s = g.to_step()?;
    let lhs: Q = (1..=m)
        .map(|i| s.abs_integral_over(b_int(&Node::root(), i)))
        .sum::<Result<Q>>()?;
    let rhs = (Q::one() - pow2(-(m as i64))) * s.l1_norm();
    let holds = lhs <= rhs;
    Ok((lhs, rhs, holds))
}

/// Indicator of `supp f_t`.
pub fn support_indicator_f(t: &Node) -> Result<DyadicStep> {
    Ok(f_fn(t)?.sign())
}

#[derive(Debug, Clone, Serialize)]
pub struct ExposureReport {
    pub node: String,
    pub epsilon: String,
    pub slice_width: String,
    pub samples: usize,
    pub directed: usize,
    pub rejection: usize,
    pub violations: usize,
    pub max_distance: String,
    pub bound: String,
}

/// Random f-span element with nodes of depth `<= depth`.
pub fn random_f_span(rng: &mut impl Rng, depth: u32, terms: usize) -> TreeSpanElement {
    loop {
        let mut f = BTreeMap::new();
        for _ in 0..terms {
            let len = rng.gen_range(1..=depth);
            let bits = (0..len).map(|_| rng.gen_range(0..=1u8)).collect();
            let c = q(rng.gen_range(-6..=6), rng.gen_range(1..=4));
            *f.entry(Node(bits)).or_insert_with(Q::zero) += c;
        }
        let e = TreeSpanElement::f_only(f);
        if !e.f.is_empty() {
            return e;
        }
    }
}

/// Random h-span element of norm one with nodes of depth `<= depth`.
pub fn random_h_sphere(rng: &mut impl Rng, depth: u32, terms: usize) -> TreeSpanElement {
    loop {
        let mut h = BTreeMap::new();
        for _ in 0..terms {
            let len = rng.gen_range(1..=depth);
            let bits = (0..len).map(|_| rng.gen_range(0..=1u8)).collect();
            let c = q(rng.gen_range(-6..=6), rng.gen_range(1..=4));
            *h.entry(Node(bits)).or_insert_with(Q::zero) += c;
        }
        let e = TreeSpanElement::h_only(h);
        if e.h.is_empty() {
            continue;
        }
        let n = l1_norm(&e).expect("shallow element");
        if n.is_positive() {
            return e.scale(&n.recip());
        }
    }
}

/// Samples f-span elements `h` in the slice `{ <1_{supp f_t}, h> > 1 - 2^-|t| eps }`
/// of the unit ball and checks `||f_t - h|| < 2 eps` for each.
pub fn exposure_experiment(t: &Node, eps: &Q, samples: usize, rng: &mut impl Rng) -> Result<ExposureReport> {
    if !eps.is_positive() || *eps >= Q::one() {
        return Err(Error::Precondition("epsilon must lie in (0, 1)".into()));
    }
    let ft = TreeSpanElement::single_f(t.clone(), Q::one());
    let ft_step = ft.to_step()?;
    let xstar = support_indicator_f(t)?;
    let delta = pow2(-(t.len() as i64)) * eps;
    let level = Q::one() - &delta;
    let bound = qi(2) * eps;
    let mut max_distance = Q::zero();
    let (mut directed, mut rejection, mut violations) = (0, 0, 0);
    let depth = t.len() + 1;
    let mut check = |h: &TreeSpanElement| -> Result<()> {
        let d = l1_norm(&ft.sub(h))?;
        if d >= bound {
            violations += 1;
        }
        if d > max_distance {
            max_distance = d;
        }
        Ok(())
    };
    for k in 0..samples {
        let p = random_f_span(rng, depth, 3);
        if k % 2 == 1 {
            // perturb f_t and renormalize; keep it only if it falls in the slice
            let c = q(1, rng.gen_range(4..=64)) * &delta;
            let raw = ft.add(&p.scale(&c));
            let h = raw.scale(&l1_norm(&raw)?.recip());
            let hs = h.to_step()?;
            if xstar.pair(&hs)? > level {
                rejection += 1;
                check(&h)?;
                continue;
            }
        }
        // (1 - s) f_t + s p / ||p||, with s shrunk until the pairing clears the slice level
        let pn = l1_norm(&p)?;
        let mut s = &delta * q(rng.gen_range(1..=63), 64);
        let h = loop {
            let h = ft.scale(&(Q::one() - &s)).add(&p.scale(&(&s / &pn)));
            if xstar.pair(&h.to_step()?)? > level {
                break h;
            }
            s /= qi(2);
        };
        debug_assert!(l1_norm(&h)? <= Q::one());
        directed += 1;
        check(&h)?;
    }
    drop(ft_step);
    Ok(ExposureReport {
        node: t.to_string(),
        epsilon: fmt_q(eps),
        slice_width: fmt_q(&delta),
        samples,
        directed,
        rejection,
        violations,
        max_distance: fmt_q(&max_distance),
        bound: fmt_q(&bound),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleReport {
    pub level: u32,
    /// `h_t = (h_{t0} + h_{t1}) / 2` for every `t` of the level.
    pub martingale: bool,
    /// `sum |a_t| = ||sum a_t h_t||`.
    pub isometry: bool,
    pub coefficient_sum: String,
    pub norm: String,
}

pub fn martingale_and_isometry_check(n: u32, coeffs: &BTreeMap<Node, Q>) -> Result<MartingaleReport> {
    if n < 1 {
        return Err(Error::Precondition("level must be at least 1".into()));
    }
    if coeffs.keys().any(|t| t.len() != n) {
        return Err(Error::Precondition(
            "all coefficients must sit on the given level".into(),
        ));
    }
    let mut martingale = true;
    for t in Node::level(n) {
        let avg = h_fn(&t.child(0))?.add(&h_fn(&t.child(1))?)?.scale(&q(1, 2));
        martingale &= avg.sub(&h_fn(&t)?)?.is_zero();
    }
    let e = TreeSpanElement::h_only(coeffs.clone());
    let norm = l1_norm(&e)?;
    let sum: Q = coeffs.values().map(|c| c.abs()).sum();
    Ok(MartingaleReport {
        level: n,
        martingale,
        isometry: norm == sum,
        coefficient_sum: fmt_q(&sum),
        norm: fmt_q(&norm),
    })
}

/// `x* = 1_P - 1_N` with `P = B_{|t|+1}^t u C_{|t|+1}^t` and `N = C_|t|^t`.
pub fn separation_functional(t: &Node) -> Result<DyadicStep> {
    if t.is_empty() {
        return Err(Error::Precondition("separation needs a nonempty node".into()));
    }
    let n = t.len();
    let mut s = DyadicStep::zero(n + 1, 2 * n + 3)?;
    s.paint(b_int(t, n + 1), &Q::one());
    s.paint(c_int(t, n + 1), &Q::one());
    s.paint(c_int(t, n), &-Q::one());
    Ok(s)
}

/// `<x*, f_s>` for the separation functional of `t`.
pub fn separation_functional_values(t: &Node, s: &Node) -> Result<Q> {
    pair_f(&separation_functional(t)?, s)
}

/// The element `f_{t0} + f_{t1} - 2 f_t` separated by [`separation_functional`].
pub fn separated_element(t: &Node) -> TreeSpanElement {
    TreeSpanElement::f_only(BTreeMap::from([
        (t.child(0), Q::one()),
        (t.child(1), Q::one()),
        (t.clone(), qi(-2)),
    ]))
}

fn check_h_sphere(g: &TreeSpanElement) -> Result<DyadicStep> {
    if !g.f.is_empty() || g.h.is_empty() {
        return Err(Error::Precondition("element must lie in the h-span".into()));
    }
    let s = g.to_step()?;
    if s.l1_norm() != Q::one() {
        return Err(Error::Precondition("element is not on the unit sphere".into()));
    }
    Ok(s)
}

fn check_functional(x: &DyadicStep) -> Result<()> {
    if x.sup_abs() > Q::one() {
        return Err(Error::Precondition("functional exceeds 1 in absolute value".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct NotRelativeDaugavetWitness {
    pub level: u32,
    pub node: String,
    pub sign: i32,
    pub m: u32,
    pub u: String,
    pub pairing: String,
    pub dist_plus: String,
    pub dist_minus: String,
    #[serde(skip)]
    pub exact_plus: Q,
    #[serde(skip)]
    pub exact_minus: Q,
    pub min_below_two: bool,
}

/// Finds `f_u` with `sign * f_u` in the slice `S(x*, eps)` and returns the
/// exact distances `||g + f_u||` and `||g - f_u||`.
pub fn not_relative_daugavet_witness(
    g: &TreeSpanElement,
    xstar: &DyadicStep,
    eps: &Q,
) -> Result<NotRelativeDaugavetWitness> {
    let gs = check_h_sphere(g)?;
    check_functional(xstar)?;
    if !eps.is_positive() {
        return Err(Error::Precondition("epsilon must be positive".into()));
    }
    if xstar.pair(&gs)? != Q::one() {
        return Err(Error::Precondition("functional does not support the element".into()));
    }
    if !xstar.support_within(&gs)? {
        return Err(Error::Precondition(
            "functional support leaves the element's support".into(),
        ));
    }
    let level = Q::one() - eps;
    let n = g.max_depth();
    let alpha = g.h_at_level(n);
    debug_assert_eq!(alpha.values().map(|c| c.abs()).sum::<Q>(), Q::one());
    let mut best: Option<(Q, Node, i32)> = None;
    for (t, a) in &alpha {
        let sign = if a.is_positive() { 1 } else { -1 };
        let v = qi(sign as i64) * pair_h(xstar, t)?;
        if best.as_ref().is_none_or(|(b, ..)| v > *b) {
            best = Some((v, t.clone(), sign));
        }
    }
    let (v, t, sign) = best.expect("nonzero element");
    if v <= level {
        return Err(Error::Precondition("no level node in the slice".into()));
    }
    let sq = qi(sign as i64);
    let m = (1..=30)
        .find(|&m| pair_h_approx(xstar, &t, m).is_ok_and(|p| &sq * p > level))
        .ok_or_else(|| Error::Resolution("no approximation h_t^m enters the slice".into()))?;
    let mut pick: Option<(Q, Node)> = None;
    for u in t.descendants(m) {
        let p = &sq * pair_f(xstar, &u)?;
        if pick.as_ref().is_none_or(|(b, _)| p > *b) {
            pick = Some((p, u));
        }
    }
    let (pairing, u) = pick.expect("descendants exist");
    debug_assert!(pairing > level);
    let fu = TreeSpanElement::single_f(u.clone(), Q::one()).to_step()?;
    let plus = gs.add(&fu)?.l1_norm();
    let minus = gs.sub(&fu)?.l1_norm();
    let two = qi(2);
    Ok(NotRelativeDaugavetWitness {
        level: n,
        node: t.to_string(),
        sign,
        m,
        u: u.to_string(),
        pairing: fmt_q(&pairing),
        dist_plus: fmt_q(&plus),
        dist_minus: fmt_q(&minus),
        min_below_two: plus < two || minus < two,
        exact_plus: plus,
        exact_minus: minus,
    })
}

#[derive(Debug, Clone)]
pub struct DeltaWitness {
    pub y: TreeSpanElement,
    pub pairing: Q,
    pub distance: Q,
    pub norm: Q,
}

/// Deepest level the Delta-witness may descend to: `h_s` at level `m`
/// needs resolution `2m + 2`.
const DELTA_MAX_LEVEL: u32 = (MAX_RESOLUTION - 2) / 2;

/// Finds `y` in the h-span with `||y|| <= 1`, `<x*, y> > 1 - alpha` and
/// `||g - y|| >= 2 - eps`: rewrite `g` at a level where every coefficient is
/// at most `eps / 2` in absolute value and take the best signed `h_s`.
pub fn delta_witness(g: &TreeSpanElement, xstar: &DyadicStep, alpha: &Q, eps: &Q) -> Result<DeltaWitness> {
    let gs = check_h_sphere(g)?;
    check_functional(xstar)?;
    if !alpha.is_positive() || !eps.is_positive() {
        return Err(Error::Precondition("alpha and epsilon must be positive".into()));
    }
    let level = Q::one() - alpha;
    if xstar.pair(&gs)? <= level {
        return Err(Error::Precondition("element is not in the slice".into()));
    }
    let finish = |y: TreeSpanElement| -> Result<DeltaWitness> {
        let ys = y.to_step()?;
        Ok(DeltaWitness {
            pairing: xstar.pair(&ys)?,
            distance: gs.sub(&ys)?.l1_norm(),
            norm: ys.l1_norm(),
            y,
        })
    };
    if *eps >= qi(2) {
        return finish(g.clone());
    }
    let n = g.max_depth();
    let top = g
        .h_at_level(n)
        .values()
        .map(|c| c.abs())
        .max()
        .expect("nonzero element");
    let half = eps / qi(2);
    let mut m = n;
    while &top * pow2(-((m - n) as i64)) > half {
        m += 1;
        if m > DELTA_MAX_LEVEL {
            let minimal = qi(2) * &top * pow2(-((DELTA_MAX_LEVEL - n) as i64));
            return Err(Error::InfeasibleBudget {
                minimal_epsilon: fmt_q(&minimal),
            });
        }
    }
    let mut best: Option<(Q, Node, i32)> = None;
    for (s, a) in g.h_at_level(m) {
        let sign = if a.is_positive() { 1 } else { -1 };
        let v = qi(sign as i64) * pair_h(xstar, &s)?;
        if best.as_ref().is_none_or(|(b, ..)| v > *b) {
            best = Some((v, s, sign));
        }
    }
    let (_, s, sign) = best.expect("nonzero element");
    finish(TreeSpanElement::single_h(s, qi(sign as i64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(s: &str) -> Node {
        Node::parse(s).unwrap()
    }

    #[test]
    fn sets_and_measures() {
        let b1 = b_set(&Node::root(), 1).unwrap()[0];
        assert_eq!((b1.start(), b1.end(), b1.measure()), (q(1, 4), q(1, 2), q(1, 4)));
        let c2 = c_set(&Node::root(), 2).unwrap()[0];
        assert_eq!((c2.start(), c2.end()), (q(5, 8), q(3, 4)));
        assert!(b_set(&Node::root(), 0).is_err());
        let b = b_set(&node("0"), 1).unwrap()[0];
        assert_eq!((b.start(), b.end()), (q(1, 4), q(3, 8)));
    }

    #[test]
    fn f_and_h_basics() {
        let f0 = f_fn(&node("0")).unwrap();
        assert_eq!(f0.l1_norm(), qi(1));
        assert_eq!(f0.integral_over(Interval { level: 3, index: 6 }).unwrap(), q(1, 2));
        assert_eq!(f0.integral_over(Interval { level: 3, index: 2 }).unwrap(), q(1, 2));
        assert!(f_fn(&Node::root()).is_err());
        for t in ["0", "1", "01", "110"] {
            assert_eq!(h_fn(&node(t)).unwrap().l1_norm(), qi(1));
        }
    }

    #[test]
    fn approximations_average_f() {
        let t = node("0");
        let avg = f_fn(&node("00"))
            .unwrap()
            .add(&f_fn(&node("01")).unwrap())
            .unwrap()
            .scale(&q(1, 2));
        assert!(avg.sub(&h_fn_approx(&t, 1).unwrap()).unwrap().is_zero());
        let gap = h_fn(&t).unwrap().sub(&h_fn_approx(&t, 3).unwrap()).unwrap();
        // missing B_i^t for i >= 5 plus the C piece: 2^-4 + 2^-4
        assert_eq!(gap.l1_norm(), q(1, 8));
    }

    #[test]
    fn cutoff_raising_preserves_norm() {
        let mut h = h_fn(&node("01")).unwrap();
        let before = h.l1_norm();
        h.raise_to(h.cutoff() + 3, 0).unwrap();
        assert_eq!(h.l1_norm(), before);
        assert!(h.sub(&h_fn(&node("01")).unwrap()).unwrap().is_zero());
    }

    #[test]
    fn pairings_match_integration() {
        let x = h_fn(&node("1"))
            .unwrap()
            .sign()
            .sub(&f_fn(&node("10")).unwrap().scale(&q(1, 4)))
            .unwrap();
        for t in ["1", "10", "011", "1101"] {
            let t = node(t);
            assert_eq!(pair_h(&x, &t).unwrap(), x.pair(&h_fn(&t).unwrap()).unwrap());
            assert_eq!(pair_f(&x, &t).unwrap(), x.pair(&f_fn(&t).unwrap()).unwrap());
            assert_eq!(
                pair_h_approx(&x, &t, 2).unwrap(),
                x.pair(&h_fn_approx(&t, 2).unwrap()).unwrap()
            );
        }
    }

    #[test]
    fn norm_formula_examples() {
        let one = BTreeMap::from([(node("0"), qi(1))]);
        assert_eq!(span_norm_formula(&one).unwrap(), qi(1));
        let two = BTreeMap::from([(node("0"), qi(1)), (node("1"), qi(-1))]);
        assert_eq!(span_norm_formula(&two).unwrap(), qi(2));
        assert_eq!(l1_norm(&TreeSpanElement::f_only(two)).unwrap(), qi(2));
        let g = TreeSpanElement::single_f(node("0"), qi(1));
        assert_eq!(restricted_norm(&g, &b_set(&node("0"), 1).unwrap()).unwrap(), q(1, 2));
        let d = TreeSpanElement::single_h(node("0"), qi(1)).sub(&TreeSpanElement::single_h(node("1"), qi(1)));
        assert_eq!(l1_norm(&d).unwrap(), qi(2));
        assert_eq!(l1_norm(&TreeSpanElement::default()).unwrap(), qi(0));
    }

    #[test]
    fn cascade_examples() {
        assert_eq!(
            cascade_inequality_check(&[qi(0), qi(0)], 1, 2).unwrap(),
            (qi(0), qi(0), true)
        );
        assert_eq!(
            cascade_inequality_check(&[qi(1), qi(1)], 1, 2).unwrap(),
            (qi(3), qi(3), true)
        );
        assert!(cascade_inequality_check(&[qi(1)], 2, 1).is_err());
    }

    #[test]
    fn concentration_examples() {
        let t = node("01");
        let (l, r, ok) = concentration_check(&TreeSpanElement::single_f(t, qi(1)), 2).unwrap();
        assert!(ok);
        assert_eq!(l, q(3, 4));
        assert_eq!(r, q(3, 4));
        let (l, r, ok) = concentration_check(&TreeSpanElement::single_f(node("0"), qi(1)), 2).unwrap();
        assert!(ok && l < r);
        assert_eq!(
            concentration_check(&TreeSpanElement::default(), 1).unwrap(),
            (qi(0), qi(0), true)
        );
    }

    #[test]
    fn separation_values() {
        let t = node("01");
        assert_eq!(separation_functional_values(&t, &t).unwrap(), q(-1, 4));
        assert_eq!(separation_functional_values(&t, &node("011")).unwrap(), q(1, 4));
        assert_eq!(separation_functional_values(&t, &node("0110")).unwrap(), q(1, 8));
        assert_eq!(separation_functional_values(&t, &node("00")).unwrap(), qi(0));
        assert_eq!(separation_functional_values(&t, &node("0")).unwrap(), qi(0));
        let f = separated_element(&t).to_step().unwrap();
        let x = separation_functional(&t).unwrap();
        assert_eq!(x.pair(&f).unwrap(), f.l1_norm());
    }

    #[test]
    fn martingale() {
        let coeffs = BTreeMap::from([(node("0"), qi(1)), (node("1"), qi(-1))]);
        let r = martingale_and_isometry_check(1, &coeffs).unwrap();
        assert!(r.martingale && r.isometry);
        assert_eq!(r.norm, "2/1");
    }

    #[test]
    fn witnesses_for_h0() {
        let g = TreeSpanElement::single_h(node("0"), qi(1));
        let x = g.to_step().unwrap().sign();
        let w = not_relative_daugavet_witness(&g, &x, &q(1, 4)).unwrap();
        assert!(w.min_below_two);
        let d = delta_witness(&g, &x, &q(1, 2), &q(1, 4)).unwrap();
        assert!(d.distance >= q(7, 4));
        assert!(d.pairing > q(1, 2));
        assert_eq!(d.norm, qi(1));
        let same = delta_witness(&g, &x, &q(1, 2), &qi(2)).unwrap();
        assert_eq!(same.y, g);
        let tiny = delta_witness(&g, &x, &q(1, 2), &pow2(-20));
        assert!(matches!(tiny, Err(Error::InfeasibleBudget { .. })));
        let bad = TreeSpanElement::single_h(node("0"), qi(2));
        assert!(not_relative_daugavet_witness(&bad, &x, &q(1, 4)).is_err());
    }

    #[test]
    fn exposure_bound_holds() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let r = exposure_experiment(&node("01"), &q(1, 4), 10, &mut rng).unwrap();
        assert_eq!(r.violations, 0);
        assert!(exposure_experiment(&node("01"), &qi(1), 1, &mut rng).is_err());
    }
}
