//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use daugavet::dyadic::Node;
use daugavet::freespace::FreeElement;
use daugavet::metric::FiniteMetricSpace;
use daugavet::rational::{pow2, q, Q};
use num_traits::{One, Signed, Zero};

/// Dense simplex for `max c.x` subject to `A x <= b`, `x >= 0`, with
/// `b >= 0` so the slack basis is feasible. Bland's rule. Returns the
/// optimum, or `None` when unbounded.
pub fn simplex_max(a: &[Vec<Q>], b: &[Q], c: &[Q]) -> Option<Q> {
    let m = a.len();
    let n = c.len();
    assert!(b.iter().all(|v| !v.is_negative()));
    let width = n + m;
    let mut t: Vec<Vec<Q>> = (0..m)
        .map(|i| {
            let mut row = a[i].clone();
            row.extend((0..m).map(|k| if k == i { Q::one() } else { Q::zero() }));
            row.push(b[i].clone());
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut reduced: Vec<Q> = c.iter().cloned().chain((0..m).map(|_| Q::zero())).collect();
    let mut value = Q::zero();
    loop {
        let Some(e) = (0..width).find(|&j| reduced[j].is_positive()) else {
            return Some(value);
        };
        let mut leave: Option<(usize, Q)> = None;
        for i in 0..m {
            if t[i][e].is_positive() {
                let ratio = &t[i][width] / &t[i][e];
                let better = match &leave {
                    None => true,
                    Some((l, r)) => ratio < *r || (ratio == *r && basis[i] < basis[*l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (l, _) = leave?;
        let piv = t[l][e].clone();
        for v in t[l].iter_mut() {
            *v /= &piv;
        }
        let prow = t[l].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != l && !row[e].is_zero() {
                let k = row[e].clone();
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= &k * p;
                }
            }
        }
        let k = reduced[e].clone();
        for (r, p) in reduced.iter_mut().zip(&prow) {
            *r -= &k * p;
        }
        value += &k * &prow[width];
        basis[l] = e;
    }
}

/// `max { f(mu) : f(base) = 0, f(p) - f(q) <= d(p, q) }` by the simplex
/// method, splitting each free value as `f = y - z`.
pub fn dual_lp_norm(mu: &FreeElement<'_>) -> Q {
    let space: &FiniteMetricSpace = mu.space();
    let base = space.base();
    let vars: Vec<usize> = (0..space.len()).filter(|&p| p != base).collect();
    let col = |p: usize| vars.iter().position(|&v| v == p);
    let nv = 2 * vars.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for p in 0..space.len() {
        for r in 0..space.len() {
            if p == r {
                continue;
            }
            let mut row = vec![Q::zero(); nv];
            if let Some(i) = col(p) {
                row[2 * i] += Q::one();
                row[2 * i + 1] -= Q::one();
            }
            if let Some(i) = col(r) {
                row[2 * i] -= Q::one();
                row[2 * i + 1] += Q::one();
            }
            a.push(row);
            b.push(space.d(p, r).clone());
        }
    }
    let mut c = vec![Q::zero(); nv];
    for (i, &p) in vars.iter().enumerate() {
        c[2 * i] = mu.coeff(p);
        c[2 * i + 1] = -mu.coeff(p);
    }
    simplex_max(&a, &b, &c).expect("the Lipschitz polytope is bounded in the objective")
}

/// Half-open interval `[lo, hi)`.
pub type Iv = (Q, Q);

fn bisect(mut iv: Iv, t: &Node) -> Iv {
    for &bit in t.bits() {
        let mid = (&iv.0 + &iv.1) / Q::from_integer(2.into());
        iv = if bit == 0 { (iv.0, mid) } else { (mid, iv.1) };
    }
    iv
}

/// `B_n^t` by repeated halving of `[2^-(n+1), 2^-n)`.
pub fn b_oracle(t: &Node, n: u32) -> Iv {
    bisect((pow2(-(n as i64) - 1), pow2(-(n as i64))), t)
}

/// `C_n^t = 1/2 + B_n^t`.
pub fn c_oracle(t: &Node, n: u32) -> Iv {
    let (lo, hi) = b_oracle(t, n);
    (lo + q(1, 2), hi + q(1, 2))
}

pub fn overlap(x: &Iv, y: &Iv) -> Q {
    let lo = if x.0 > y.0 { &x.0 } else { &y.0 };
    let hi = if x.1 < y.1 { &x.1 } else { &y.1 };
    if lo < hi {
        hi - lo
    } else {
        Q::zero()
    }
}

/// `f_t` as weighted disjoint intervals.
pub fn f_pieces(t: &Node) -> Vec<(Iv, Q)> {
    let n = t.len();
    let w = pow2(n as i64 + 1);
    let mut out = vec![(c_oracle(t, n), w.clone())];
    for i in 1..=n {
        out.push((b_oracle(t, i), w.clone()));
    }
    out
}

/// Integral of the product of two piecewise-constant functions.
pub fn pair_pieces(x: &[(Iv, Q)], y: &[(Iv, Q)]) -> Q {
    let mut s = Q::zero();
    for (i, a) in x {
        for (j, b) in y {
            s += a * b * overlap(i, j);
        }
    }
    s
}
