//! Finite R-trees modelled as edge-weighted trees.
//!
//! Points are vertices or interior points of edges. A subset `M` is given by
//! member vertices together with edges whose whole continuum lies in `M`.
//! Free-space computations use the metric space of all tree vertices, which
//! is closed under the segment retractions between vertices.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freespace::{free_norm, molecule, FreeElement, LipschitzFunction};
use crate::metric::FiniteMetricSpace;
use crate::rational::{fmt_q, parse_q, q, qi, Q};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub len: Q,
}

#[derive(Debug, Clone)]
pub struct WeightedTree {
    names: Vec<String>,
    edges: Vec<Edge>,
    /// `adj[v]` lists `(neighbour, edge index)`.
    adj: Vec<Vec<(usize, usize)>>,
    space: FiniteMetricSpace,
}

/// A vertex, or a point strictly inside an edge at `offset` from `edge.u`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreePoint {
    Vertex(usize),
    OnEdge { edge: usize, offset: Q },
}

// One straight piece of a geodesic, inside a single edge.
#[derive(Debug, Clone)]
struct Leg {
    edge: usize,
    from: Q,
    to: Q,
}

impl WeightedTree {
    pub fn new(names: Vec<String>, edges: Vec<(usize, usize, Q)>, base: usize) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidTree("no vertices".into()));
        }
        if base >= n {
            return Err(Error::InvalidTree("base is not a vertex".into()));
        }
        if edges.len() + 1 != n {
            return Err(Error::InvalidTree(format!(
                "{} vertices need {} edges, got {}",
                n,
                n - 1,
                edges.len()
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for (i, (u, v, len)) in edges.iter().enumerate() {
            if *u >= n || *v >= n || u == v {
                return Err(Error::InvalidTree(format!("bad edge {i}")));
            }
            if !len.is_positive() {
                return Err(Error::InvalidTree(format!("edge {i} has non-positive length")));
            }
            adj[*u].push((*v, i));
            adj[*v].push((*u, i));
        }
        let mut dist = vec![vec![Q::zero(); n]; n];
        for s in 0..n {
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            let mut count = 1;
            while let Some(a) = queue.pop_front() {
                for &(b, e) in &adj[a] {
                    if !seen[b] {
                        seen[b] = true;
                        count += 1;
                        dist[s][b] = &dist[s][a] + &edges[e].2;
                        queue.push_back(b);
                    }
                }
            }
            if count != n {
                return Err(Error::InvalidTree("graph is not connected".into()));
            }
        }
        let space = FiniteMetricSpace::new_unchecked(names.clone(), base, dist);
        Ok(WeightedTree {
            names,
            edges: edges.into_iter().map(|(u, v, len)| Edge { u, v, len }).collect(),
            adj,
            space,
        })
    }

    /// Pointed metric space of all vertices.
    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn base(&self) -> usize {
        self.space.base()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adj[a].iter().find(|(n, _)| *n == b).map(|(_, e)| *e)
    }

    /// Builds a point, snapping offsets `0` and `len` to the endpoints.
    pub fn point_on_edge(&self, edge: usize, offset: Q) -> Result<TreePoint> {
        let e = self
            .edges
            .get(edge)
            .ok_or_else(|| Error::InvalidTree(format!("no edge {edge}")))?;
        if offset.is_negative() || offset > e.len {
            return Err(Error::InvalidTree("offset outside the edge".into()));
        }
        Ok(if offset.is_zero() {
            TreePoint::Vertex(e.u)
        } else if offset == e.len {
            TreePoint::Vertex(e.v)
        } else {
            TreePoint::OnEdge { edge, offset }
        })
    }

    fn check(&self, p: &TreePoint) -> Result<()> {
        match p {
            TreePoint::Vertex(v) if *v < self.vertex_count() => Ok(()),
            TreePoint::OnEdge { edge, offset }
                if *edge < self.edges.len() && offset.is_positive() && *offset < self.edges[*edge].len =>
            {
                Ok(())
            }
            _ => Err(Error::InvalidTree(format!("invalid tree point {p:?}"))),
        }
    }

    // Ways to leave a point towards the vertex set: (vertex, length, leg).
    fn exits(&self, p: &TreePoint) -> Vec<(usize, Q, Option<Leg>)> {
        match p {
            TreePoint::Vertex(v) => vec![(*v, Q::zero(), None)],
            TreePoint::OnEdge { edge, offset } => {
                let e = &self.edges[*edge];
                vec![
                    (
                        e.u,
                        offset.clone(),
                        Some(Leg {
                            edge: *edge,
                            from: offset.clone(),
                            to: Q::zero(),
                        }),
                    ),
                    (
                        e.v,
                        &e.len - offset,
                        Some(Leg {
                            edge: *edge,
                            from: offset.clone(),
                            to: e.len.clone(),
                        }),
                    ),
                ]
            }
        }
    }

    fn vertex_path(&self, a: usize, b: usize) -> Vec<usize> {
        let n = self.vertex_count();
        let mut parent = vec![usize::MAX; n];
        parent[a] = a;
        let mut queue = VecDeque::from([a]);
        while let Some(x) = queue.pop_front() {
            if x == b {
                break;
            }
            for &(y, _) in &self.adj[x] {
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    queue.push_back(y);
                }
            }
        }
        let mut path = vec![b];
        let mut v = b;
        while v != a {
            v = parent[v];
            path.push(v);
        }
        path.reverse();
        path
    }

    fn geodesic(&self, p: &TreePoint, q: &TreePoint) -> Vec<Leg> {
        if let (TreePoint::OnEdge { edge: e1, offset: o1 }, TreePoint::OnEdge { edge: e2, offset: o2 }) = (p, q) {
            if e1 == e2 {
                return vec![Leg {
                    edge: *e1,
                    from: o1.clone(),
                    to: o2.clone(),
                }];
            }
        }
        let mut best: Option<(Q, Option<Leg>, usize, usize, Option<Leg>)> = None;
        for (a, la, lega) in self.exits(p) {
            for (b, lb, legb) in self.exits(q) {
                let total = &la + self.space.d(a, b) + &lb;
                if best.as_ref().is_none_or(|(t, ..)| total < *t) {
                    best = Some((total, lega.clone(), a, b, legb));
                }
            }
        }
        let (_, lega, a, b, legb) = best.expect("points have exits");
        let mut legs: Vec<Leg> = lega.into_iter().collect();
        for w in self.vertex_path(a, b).windows(2) {
            let e = self.edge_between(w[0], w[1]).expect("consecutive path vertices");
            let len = self.edges[e].len.clone();
            legs.push(if self.edges[e].u == w[0] {
                Leg {
                    edge: e,
                    from: Q::zero(),
                    to: len,
                }
            } else {
                Leg {
                    edge: e,
                    from: len,
                    to: Q::zero(),
                }
            });
        }
        if let Some(l) = legb {
            legs.push(Leg {
                edge: l.edge,
                from: l.to,
                to: l.from,
            });
        }
        legs
    }

    /// Exact path length between two tree points.
    pub fn distance(&self, p: &TreePoint, q: &TreePoint) -> Result<Q> {
        self.check(p)?;
        self.check(q)?;
        Ok(self
            .geodesic(p, q)
            .iter()
            .fold(Q::zero(), |acc, l| acc + (&l.to - &l.from).abs()))
    }

    /// The point of `[p, q]` at distance `t` from `p`, `0 <= t <= d(p, q)`.
    pub fn point_along(&self, p: &TreePoint, q: &TreePoint, t: &Q) -> Result<TreePoint> {
        self.check(p)?;
        self.check(q)?;
        if t.is_negative() {
            return Err(Error::Precondition("negative distance along a segment".into()));
        }
        let mut left = t.clone();
        for leg in self.geodesic(p, q) {
            let len = (&leg.to - &leg.from).abs();
            if left <= len {
                let off = if leg.to >= leg.from {
                    &leg.from + &left
                } else {
                    &leg.from - &left
                };
                return self.point_on_edge(leg.edge, off);
            }
            left -= len;
        }
        if left.is_zero() {
            return Ok(q.clone());
        }
        Err(Error::Precondition("distance exceeds the segment length".into()))
    }

    /// Nearest-point retraction `Y_xy p` onto `[x, y]`.
    pub fn retract(&self, x: &TreePoint, y: &TreePoint, p: &TreePoint) -> Result<TreePoint> {
        if x == y {
            return Err(Error::Precondition("retraction onto a degenerate segment".into()));
        }
        let dxy = self.distance(x, y)?;
        let t = (self.distance(x, p)? + &dxy - self.distance(y, p)?) / qi(2);
        self.point_along(x, y, &t)
    }

    /// Retraction between vertices, which always lands on a vertex.
    pub fn retract_vertex(&self, x: usize, y: usize, p: usize) -> usize {
        let d = |a, b| self.space.d(a, b);
        let t = (d(x, p) + d(x, y) - d(y, p)) / qi(2);
        *self
            .vertex_path(x, y)
            .iter()
            .find(|&&v| *d(x, v) == t)
            .expect("projection of a vertex is a branch vertex")
    }

    pub fn to_json(&self) -> TreeJson {
        TreeJson {
            vertices: self.names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| (self.names[e.u].clone(), self.names[e.v].clone(), fmt_q(&e.len)))
                .collect(),
            base: self.names[self.base()].clone(),
        }
    }
}

/// `{ "vertices": [...], "edges": [[u, v, "p/q"]], "base": v }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TreeJson {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String, String)>,
    pub base: String,
}

impl TreeJson {
    pub fn build(&self) -> Result<WeightedTree> {
        let idx = |s: &str| {
            self.vertices
                .iter()
                .position(|v| v == s)
                .ok_or_else(|| Error::UnknownPoint(s.to_string()))
        };
        let edges = self
            .edges
            .iter()
            .map(|(u, v, l)| Ok((idx(u)?, idx(v)?, parse_q(l)?)))
            .collect::<Result<Vec<_>>>()?;
        WeightedTree::new(self.vertices.clone(), edges, idx(&self.base)?)
    }
}

/// Subset `M` of a tree: member vertices and edges contained in `M`.
#[derive(Debug, Clone)]
pub struct RTreeSubset<'t> {
    tree: &'t WeightedTree,
    members: BTreeSet<usize>,
    full_edges: BTreeSet<usize>,
}

impl<'t> RTreeSubset<'t> {
    pub fn new(
        tree: &'t WeightedTree,
        members: impl IntoIterator<Item = usize>,
        full_edges: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        let full_edges: BTreeSet<usize> = full_edges.into_iter().collect();
        if members.iter().any(|&v| v >= tree.vertex_count()) {
            return Err(Error::InvalidTree("member is not a vertex".into()));
        }
        for &e in &full_edges {
            let edge = tree
                .edges
                .get(e)
                .ok_or_else(|| Error::InvalidTree(format!("no edge {e}")))?;
            if !members.contains(&edge.u) || !members.contains(&edge.v) {
                return Err(Error::InvalidTree(format!(
                    "full edge {e} has an endpoint outside the subset"
                )));
            }
        }
        Ok(RTreeSubset {
            tree,
            members,
            full_edges,
        })
    }

    /// The whole tree.
    pub fn full(tree: &'t WeightedTree) -> Self {
        Self::new(tree, 0..tree.vertex_count(), 0..tree.edges.len()).expect("full subset")
    }

    /// Vertices only, no continuum.
    pub fn vertices_only(tree: &'t WeightedTree) -> Self {
        Self::new(tree, 0..tree.vertex_count(), []).expect("vertex subset")
    }

    pub fn tree(&self) -> &'t WeightedTree {
        self.tree
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn contains(&self, p: &TreePoint) -> bool {
        match p {
            TreePoint::Vertex(v) => self.members.contains(v),
            TreePoint::OnEdge { edge, .. } => self.full_edges.contains(edge),
        }
    }

    /// `[x, y]` lies in `M`: every edge met by the path is a full edge.
    pub fn segment_in_subset(&self, x: &TreePoint, y: &TreePoint) -> Result<bool> {
        for p in [x, y] {
            self.tree.check(p)?;
            if !self.contains(p) {
                return Err(Error::Precondition(format!("{p:?} is not in the subset")));
            }
        }
        Ok(self
            .tree
            .geodesic(x, y)
            .iter()
            .filter(|l| l.from != l.to)
            .all(|l| self.full_edges.contains(&l.edge)))
    }

    pub fn to_json(&self) -> SubsetJson {
        let t = self.tree;
        SubsetJson {
            tree: t.to_json(),
            members: self.members.iter().map(|&v| t.names[v].clone()).collect(),
            full_edges: self
                .full_edges
                .iter()
                .map(|&e| (t.names[t.edges[e].u].clone(), t.names[t.edges[e].v].clone()))
                .collect(),
        }
    }
}

/// Tree JSON extended with `{ "members": [...], "full_edges": [[u, v]] }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SubsetJson {
    #[serde(flatten)]
    pub tree: TreeJson,
    pub members: Vec<String>,
    pub full_edges: Vec<(String, String)>,
}

/// Checks the three-piece decomposition of `d(p, q)` through the
/// retraction when the projections differ, and constancy of the projection
/// along `[p, q]` when they coincide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetractionReport {
    pub projections_differ: bool,
    pub decomposition_holds: Option<bool>,
    pub constancy_holds: Option<bool>,
    pub samples: usize,
}

impl RetractionReport {
    pub fn holds(&self) -> bool {
        self.decomposition_holds.unwrap_or(true) && self.constancy_holds.unwrap_or(true)
    }
}

pub fn retraction_identities_check(
    tree: &WeightedTree,
    x: &TreePoint,
    y: &TreePoint,
    p: &TreePoint,
    q: &TreePoint,
) -> Result<RetractionReport> {
    let yp = tree.retract(x, y, p)?;
    let yq = tree.retract(x, y, q)?;
    if yp != yq {
        let lhs = tree.distance(p, q)?;
        let rhs = tree.distance(p, &yp)? + tree.distance(&yp, &yq)? + tree.distance(&yq, q)?;
        return Ok(RetractionReport {
            projections_differ: true,
            decomposition_holds: Some(lhs == rhs),
            constancy_holds: None,
            samples: 0,
        });
    }
    let dpq = tree.distance(p, q)?;
    let mut ok = true;
    let steps = 4;
    for k in 0..=steps {
        let r = tree.point_along(p, q, &(&dpq * crate::rational::q(k, steps)))?;
        ok &= tree.retract(x, y, &r)? == yp;
    }
    Ok(RetractionReport {
        projections_differ: false,
        decomposition_holds: None,
        constancy_holds: Some(ok),
        samples: steps as usize + 1,
    })
}

#[derive(Debug, Clone)]
pub struct LProjectionSplit<'s> {
    pub head: FreeElement<'s>,
    pub tail: FreeElement<'s>,
    pub norm: Q,
    pub head_norm: Q,
    pub tail_norm: Q,
    pub additive: bool,
}

/// Splits `mu` into the push-forward of its zero-mass form under `Y_xy`
/// and the remainder, and checks that the norm splits additively.
pub fn l_projection_split<'s>(
    subset: &RTreeSubset<'s>,
    x: usize,
    y: usize,
    mu: &FreeElement<'s>,
) -> Result<LProjectionSplit<'s>> {
    let tree = subset.tree;
    if !std::ptr::eq(mu.space(), tree.space()) {
        return Err(Error::Precondition("element does not live on this tree".into()));
    }
    if x == y {
        return Err(Error::Precondition("retraction onto a degenerate segment".into()));
    }
    if let Some(p) = mu.support().into_iter().find(|p| !subset.members.contains(p)) {
        return Err(Error::Precondition(format!(
            "support point {} is not in the subset",
            tree.name(p)
        )));
    }
    let head = mu.push_forward(|p| tree.retract_vertex(x, y, p));
    let tail = mu.sub(&head);
    let norm = free_norm(mu);
    let head_norm = free_norm(&head);
    let tail_norm = free_norm(&tail);
    let additive = norm == &head_norm + &tail_norm;
    Ok(LProjectionSplit {
        head,
        tail,
        norm,
        head_norm,
        tail_norm,
        additive,
    })
}

/// `weight * m_xy` inside a convex combination of molecules.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct WeightedMolecule {
    pub weight: Q,
    pub x: usize,
    pub y: usize,
}

pub fn combination_element<'s>(space: &'s FiniteMetricSpace, comb: &[WeightedMolecule]) -> Result<FreeElement<'s>> {
    let mut out = FreeElement::zero(space);
    for t in comb {
        out = out.add(&molecule(space, t.x, t.y)?.scale(&t.weight));
    }
    Ok(out)
}

fn check_convex(comb: &[WeightedMolecule]) -> Result<()> {
    if comb.is_empty() {
        return Err(Error::Precondition("empty combination".into()));
    }
    if comb.iter().any(|t| !t.weight.is_positive() || t.x == t.y) {
        return Err(Error::Precondition(
            "weights must be positive and molecules nondegenerate".into(),
        ));
    }
    if comb.iter().map(|t| &t.weight).sum::<Q>() != Q::one() {
        return Err(Error::Precondition("weights must sum to 1".into()));
    }
    Ok(())
}

/// Distance from `x` to `Y_xy p`, zero when the segment is degenerate.
fn depth_along(tree: &WeightedTree, x: usize, y: usize, p: usize) -> Q {
    if x == y {
        Q::zero()
    } else {
        tree.space.d(x, tree.retract_vertex(x, y, p)).clone()
    }
}

/// `g(p) = max_i ( f(x_i) - max_j d(x_i, Y_{x_i y_j} p) )`, shifted to vanish
/// at the base, for `f` norming the combination.
pub fn g_mu_build<'s>(
    tree: &'s WeightedTree,
    comb: &[WeightedMolecule],
    f: &LipschitzFunction<'s>,
) -> Result<LipschitzFunction<'s>> {
    check_convex(comb)?;
    let space = tree.space();
    let mu = combination_element(space, comb)?;
    if f.lip_norm() > Q::one() || f.eval(&mu) != Q::one() {
        return Err(Error::Precondition("functional does not norm the combination".into()));
    }
    Ok(LipschitzFunction::from_fn(space, |p| {
        comb.iter()
            .map(|ti| {
                let far = comb
                    .iter()
                    .map(|tj| depth_along(tree, ti.x, tj.y, p))
                    .max()
                    .expect("nonempty");
                f.value(ti.x) - far
            })
            .max()
            .expect("nonempty")
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PropertyOutcome {
    /// `m_uv` is outside the slice.
    Vacuous,
    /// Indices `(i, j)` with `x_i != y_j` and
    /// `(1 - alpha) d(u, v) < d(Y_{x_i y_j} u, Y_{x_i y_j} v)`.
    Witness {
        i: usize,
        j: usize,
    },
    NoWitness,
}

pub fn g_mu_property_check(
    tree: &WeightedTree,
    comb: &[WeightedMolecule],
    g: &LipschitzFunction<'_>,
    u: usize,
    v: usize,
    alpha: &Q,
) -> Result<PropertyOutcome> {
    let space = tree.space();
    let m = molecule(space, u, v)?;
    if g.eval(&m) <= Q::one() - alpha {
        return Ok(PropertyOutcome::Vacuous);
    }
    let bound = (Q::one() - alpha) * space.d(u, v);
    for (i, ti) in comb.iter().enumerate() {
        for (j, tj) in comb.iter().enumerate() {
            if ti.x == tj.y {
                continue;
            }
            let yu = tree.retract_vertex(ti.x, tj.y, u);
            let yv = tree.retract_vertex(ti.x, tj.y, v);
            if bound < *space.d(yu, yv) {
                return Ok(PropertyOutcome::Witness { i, j });
            }
        }
    }
    Ok(PropertyOutcome::NoWitness)
}

/// Rewrites a convex combination of molecules with segments in `M` into
/// one whose molecules join consecutive projected endpoints, merging
/// repeated molecules.
pub fn recombine(subset: &RTreeSubset<'_>, comb: &[WeightedMolecule]) -> Result<Vec<WeightedMolecule>> {
    check_convex(comb)?;
    let tree = subset.tree;
    let d = |a, b| tree.space.d(a, b);
    for t in comb {
        if !subset.segment_in_subset(&TreePoint::Vertex(t.x), &TreePoint::Vertex(t.y))? {
            return Err(Error::Precondition(format!(
                "segment [{}, {}] is not contained in the subset",
                tree.name(t.x),
                tree.name(t.y)
            )));
        }
    }
    let ends: BTreeSet<usize> = comb.iter().flat_map(|t| [t.x, t.y]).collect();
    let mut merged: BTreeMap<(usize, usize), Q> = BTreeMap::new();
    for t in comb {
        let mut stops: Vec<usize> = ends
            .iter()
            .map(|&p| tree.retract_vertex(t.x, t.y, p))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        stops.sort_by(|a, b| d(t.x, *a).cmp(d(t.x, *b)));
        let dxy = d(t.x, t.y);
        for w in stops.windows(2) {
            let wt = &t.weight * d(w[0], w[1]) / dxy;
            *merged.entry((w[0], w[1])).or_insert_with(Q::zero) += wt;
        }
    }
    if merged.keys().any(|&(a, b)| merged.contains_key(&(b, a))) {
        return Err(Error::Precondition(
            "opposite molecules appear, the combination is not norming".into(),
        ));
    }
    Ok(merged
        .into_iter()
        .map(|((x, y), weight)| WeightedMolecule { weight, x, y })
        .collect())
}

/// For `j != k`, `Y_{u_j v_j}` maps `u_k` and `v_k` to the same endpoint of
/// `[u_j, v_j]`. Returns the first offending pair.
pub fn projection_property_violation(tree: &WeightedTree, comb: &[WeightedMolecule]) -> Option<(usize, usize)> {
    for (j, tj) in comb.iter().enumerate() {
        for (k, tk) in comb.iter().enumerate() {
            if j == k {
                continue;
            }
            let a = tree.retract_vertex(tj.x, tj.y, tk.x);
            let b = tree.retract_vertex(tj.x, tj.y, tk.y);
            if a != b || (a != tj.x && a != tj.y) {
                return Some((j, k));
            }
        }
    }
    None
}

/// Result of the witness construction for `||mu - m_xy|| >= 2 - 4 eps`.
#[derive(Debug, Clone)]
pub enum HWitness<'s> {
    /// `g(mu) = 0`; `h = f + g` is 1-Lipschitz with the stated values.
    Witnessed {
        h: LipschitzFunction<'s>,
        lip: Q,
        h_mu: Q,
        h_myx: Q,
        gap: Q,
    },
    /// `g(mu) != 0`: the construction does not apply to this element.
    Obstructed { g_mu: Q },
}

/// Builds `h = f + g` with
/// `g(p) = min{ max{ d(x, Yp) - f(Yp) - 2 eps d(x, y), 0 }, (1 - 4 eps) d(x, y) - f(y) }`,
/// `Y = Y_xy` and `f` shifted so that `f(x) = 0`.
pub fn daugavet_witness_h<'s>(
    tree: &'s WeightedTree,
    mu: &FreeElement<'s>,
    f: &LipschitzFunction<'s>,
    x: usize,
    y: usize,
    eps: &Q,
) -> Result<HWitness<'s>> {
    let space = tree.space();
    if !std::ptr::eq(mu.space(), space) || !std::ptr::eq(f.space(), space) {
        return Err(Error::Precondition("inputs do not live on this tree".into()));
    }
    if x == y {
        return Err(Error::Precondition("x and y must differ".into()));
    }
    if !eps.is_positive() || *eps >= q(1, 2) {
        return Err(Error::Precondition("epsilon must lie in (0, 1/2)".into()));
    }
    if free_norm(mu) != Q::one() || f.lip_norm() > Q::one() || f.eval(mu) != Q::one() {
        return Err(Error::Precondition("f must norm a unit element".into()));
    }
    let dxy = space.d(x, y).clone();
    let f0 = |p: usize| f.value(p) - f.value(x);
    let cap = (Q::one() - qi(4) * eps) * &dxy - f0(y);
    if !cap.is_positive() {
        return Err(Error::Precondition(
            "f(m_yx) >= 1 - 4 eps: f itself already witnesses the distance".into(),
        ));
    }
    let slack = qi(2) * eps * &dxy;
    let g = LipschitzFunction::from_fn(space, |p| {
        let yp = tree.retract_vertex(x, y, p);
        let raw = space.d(x, yp) - f0(yp) - &slack;
        raw.max(Q::zero()).min(cap.clone())
    });
    let g_mu = g.eval(mu);
    if !g_mu.is_zero() {
        return Ok(HWitness::Obstructed { g_mu });
    }
    let h = f.add(&g);
    let h_mu = h.eval(mu);
    let h_myx = h.eval(&molecule(space, y, x)?);
    let gap = &h_mu - h.eval(&molecule(space, x, y)?);
    Ok(HWitness::Witnessed {
        lip: h.lip_norm(),
        h,
        h_mu,
        h_myx,
        gap,
    })
}

/// Random tree on `n` vertices: each new vertex attaches to an earlier one
/// with length `k / den`, `1 <= k <= 2 den`.
pub fn random_tree(rng: &mut impl Rng, n: usize, den: i64) -> WeightedTree {
    let names = (0..n).map(|i| format!("t{i}")).collect();
    let edges = (1..n)
        .map(|v| (rng.gen_range(0..v), v, q(rng.gen_range(1..=2 * den), den)))
        .collect();
    WeightedTree::new(names, edges, 0).expect("random tree is valid")
}

/// Random element with at most `atoms` atoms and small integer coefficients.
pub fn random_element<'s>(rng: &mut impl Rng, space: &'s FiniteMetricSpace, atoms: usize) -> FreeElement<'s> {
    let k = rng.gen_range(1..=atoms);
    let terms: Vec<(usize, Q)> = (0..k)
        .map(|_| {
            (
                rng.gen_range(0..space.len()),
                q(rng.gen_range(-6..=6), rng.gen_range(1..=4)),
            )
        })
        .collect();
    FreeElement::from_coeffs(space, terms).expect("indices are in range")
}

/// Random 1-Lipschitz `f` together with a convex combination of molecules
/// it norms: McShane extension of random data scaled to Lipschitz constant
/// one, then random positive weights on pairs where `f(m_pq) = 1`.
pub fn random_normed_combination<'s>(
    rng: &mut impl Rng,
    tree: &'s WeightedTree,
    max_terms: usize,
) -> (LipschitzFunction<'s>, Vec<WeightedMolecule>) {
    let space = tree.space();
    let n = space.len();
    loop {
        let k = rng.gen_range(2..=n.min(4));
        let mut pts: Vec<usize> = (0..n).collect();
        pts.shuffle(rng);
        let data: BTreeMap<usize, Q> = pts[..k].iter().map(|&p| (p, q(rng.gen_range(-8..=8), 4))).collect();
        let Ok(ext) = crate::freespace::mcshane_extend(space, &data) else {
            continue;
        };
        let lip = ext.lip_norm();
        if lip.is_zero() {
            continue;
        }
        let f = LipschitzFunction::from_fn(space, |p| ext.value(p) / &lip);
        let mut tight: Vec<(usize, usize)> = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && (f.value(a) - f.value(b)) == *space.d(a, b) {
                    tight.push((a, b));
                }
            }
        }
        tight.shuffle(rng);
        let m = rng.gen_range(1..=tight.len().min(max_terms));
        let raw: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=5)).collect();
        let total: i64 = raw.iter().sum();
        let comb = tight[..m]
            .iter()
            .zip(&raw)
            .map(|(&(x, y), &w)| WeightedMolecule {
                weight: q(w, total),
                x,
                y,
            })
            .collect();
        return (f, comb);
    }
}
