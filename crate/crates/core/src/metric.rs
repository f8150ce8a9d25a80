//! Finite pointed metric spaces with exact rational distances.
//!
//! Points are addressed by their index in [`FiniteMetricSpace::points`];
//! string identifiers are kept for I/O. The two grid spaces built by
//! [`example_space_a`] and [`example_space_b`] are truncations of countable
//! spaces made of horizontal rows over the segment between `x = (0,0)` and
//! `y = (1,0)`.

use std::collections::HashMap;

use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{fmt_q, parse_q, pow2, q, Q};

/// Largest truncation level accepted by the example generators.
pub const MAX_LEVEL: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMetricSpace {
    points: Vec<String>,
    index: HashMap<String, usize>,
    base: usize,
    dist: Vec<Vec<Q>>,
}

/// Raw, possibly malformed, distance table as read from JSON.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    pub points: Vec<String>,
    pub base: String,
    pub dist: Vec<Vec<Option<Q>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Identity,
    Separation,
    Symmetry,
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ValidationReport {
    Pass,
    Fail { axiom: Axiom, witness: Vec<String> },
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        matches!(self, ValidationReport::Pass)
    }
}

impl FiniteMetricSpace {
    /// Builds a space, checking structure and all metric axioms.
    pub fn new(points: Vec<String>, base: &str, dist: Vec<Vec<Q>>) -> Result<Self> {
        let table = DistanceTable {
            points,
            base: base.to_string(),
            dist: dist
                .into_iter()
                .map(|row| row.into_iter().map(Some).collect())
                .collect(),
        };
        Self::try_from(table)
    }

    /// Builds a space without checking the metric axioms. Used by the
    /// generators, whose outputs are validated in tests.
    pub(crate) fn new_unchecked(points: Vec<String>, base: usize, dist: Vec<Vec<Q>>) -> Self {
        let index = points.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        FiniteMetricSpace {
            points,
            index,
            base,
            dist,
        }
    }

    /// Shortest-path completion of a weighted connected graph.
    pub fn from_graph(points: Vec<String>, base: usize, edges: &[(usize, usize, Q)]) -> Result<Self> {
        let n = points.len();
        let mut d: Vec<Vec<Option<Q>>> = vec![vec![None; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = Some(Q::zero());
        }
        for (a, b, w) in edges {
            if !w.is_positive() {
                return Err(Error::MalformedTable("edge weights must be positive".into()));
            }
            for (s, t) in [(*a, *b), (*b, *a)] {
                if d[s][t].as_ref().is_none_or(|cur| w < cur) {
                    d[s][t] = Some(w.clone());
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                let Some(dik) = d[i][k].clone() else { continue };
                for j in 0..n {
                    if let Some(dkj) = &d[k][j] {
                        let via = &dik + dkj;
                        if d[i][j].as_ref().is_none_or(|cur| via < *cur) {
                            d[i][j] = Some(via);
                        }
                    }
                }
            }
        }
        let dist = d
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::MalformedTable("graph is not connected".into()))?;
        Ok(Self::new_unchecked(points, base, dist))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn name(&self, p: usize) -> &str {
        &self.points[p]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    pub fn d(&self, p: usize, q: usize) -> &Q {
        &self.dist[p][q]
    }

    pub fn check_point(&self, p: usize) -> Result<()> {
        if p < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownPoint(format!("#{p}")))
        }
    }

    pub fn validate(&self) -> ValidationReport {
        check_axioms(&self.points, |i, j| &self.dist[i][j])
    }

    /// Points `p` with `d(x,p) + d(p,y) = d(x,y)`, in index order.
    pub fn segment(&self, x: usize, y: usize) -> Result<Vec<usize>> {
        self.check_point(x)?;
        self.check_point(y)?;
        let dxy = self.d(x, y);
        Ok((0..self.len())
            .filter(|&p| &(self.d(x, p) + self.d(p, y)) == dxy)
            .collect())
    }

    /// Restriction to a subset of points (kept in the given order). The base
    /// point must be included.
    pub fn subspace(&self, keep: &[usize]) -> Result<Self> {
        let base = keep
            .iter()
            .position(|&p| p == self.base)
            .ok_or_else(|| Error::Precondition("subspace must contain the base point".into()))?;
        let points = keep.iter().map(|&p| self.points[p].clone()).collect();
        let dist = keep
            .iter()
            .map(|&i| keep.iter().map(|&j| self.dist[i][j].clone()).collect())
            .collect();
        Ok(Self::new_unchecked(points, base, dist))
    }

    pub fn to_json(&self) -> SpaceJson {
        SpaceJson {
            points: self.points.clone(),
            base: self.points[self.base].clone(),
            dist: self
                .dist
                .iter()
                .map(|row| row.iter().map(|x| Some(fmt_q(x))).collect())
                .collect(),
        }
    }
}

impl TryFrom<DistanceTable> for FiniteMetricSpace {
    type Error = Error;

    fn try_from(table: DistanceTable) -> Result<Self> {
        match validate_metric(&table)? {
            ValidationReport::Pass => {}
            ValidationReport::Fail { axiom, witness } => {
                return Err(Error::NotAMetric(format!("{axiom:?} fails at {witness:?}")))
            }
        }
        let base = table.points.iter().position(|p| *p == table.base).unwrap();
        let dist = table
            .dist
            .into_iter()
            .map(|row| row.into_iter().map(Option::unwrap).collect())
            .collect();
        Ok(Self::new_unchecked(table.points, base, dist))
    }
}

/// Checks a raw table: structural problems are errors, axiom failures are
/// reported with the first witnessing tuple.
pub fn validate_metric(table: &DistanceTable) -> Result<ValidationReport> {
    let n = table.points.len();
    if n == 0 {
        return Err(Error::MalformedTable("no points".into()));
    }
    if !table.points.contains(&table.base) {
        return Err(Error::MalformedTable(format!("base {:?} is not a point", table.base)));
    }
    let mut seen = std::collections::HashSet::new();
    for p in &table.points {
        if !seen.insert(p) {
            return Err(Error::MalformedTable(format!("duplicate point {p:?}")));
        }
    }
    if table.dist.len() != n || table.dist.iter().any(|r| r.len() != n) {
        return Err(Error::MalformedTable(format!("table is not {n}x{n}")));
    }
    for (i, row) in table.dist.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            match e {
                None => {
                    return Err(Error::MalformedTable(format!(
                        "missing entry ({}, {})",
                        table.points[i], table.points[j]
                    )))
                }
                Some(v) if v.is_negative() => {
                    return Err(Error::MalformedTable(format!(
                        "negative entry ({}, {})",
                        table.points[i], table.points[j]
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(check_axioms(&table.points, |i, j| table.dist[i][j].as_ref().unwrap()))
}

fn check_axioms<'a>(points: &[String], d: impl Fn(usize, usize) -> &'a Q) -> ValidationReport {
    let n = points.len();
    let fail = |axiom, idx: &[usize]| ValidationReport::Fail {
        axiom,
        witness: idx.iter().map(|&i| points[i].clone()).collect(),
    };
    for i in 0..n {
        if !d(i, i).is_zero() {
            return fail(Axiom::Identity, &[i]);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && d(i, j).is_zero() {
                return fail(Axiom::Separation, &[i, j]);
            }
            if d(i, j) != d(j, i) {
                return fail(Axiom::Symmetry, &[i, j]);
            }
        }
    }
    for p in 0..n {
        for m in 0..n {
            for r in 0..n {
                if d(p, r) > &(d(p, m) + d(m, r)) {
                    return fail(Axiom::Triangle, &[p, m, r]);
                }
            }
        }
    }
    ValidationReport::Pass
}

/// JSON form: `{ "points": [...], "base": id, "dist": [["p/q", ...], ...] }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SpaceJson {
    pub points: Vec<String>,
    pub base: String,
    pub dist: Vec<Vec<Option<String>>>,
}

impl SpaceJson {
    pub fn to_table(&self) -> Result<DistanceTable> {
        let dist = self
            .dist
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.as_deref().map(parse_q).transpose())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DistanceTable {
            points: self.points.clone(),
            base: self.base.clone(),
            dist,
        })
    }
}

/// A point `(a, b)` of the planar grid used by the example spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint {
    pub a: Q,
    pub b: Q,
}

impl GridPoint {
    pub fn new(a: Q, b: Q) -> Self {
        GridPoint { a, b }
    }

    /// Stable identifier `"a_num/a_den,b_num/b_den"`.
    pub fn id(&self) -> String {
        format!("{},{}", fmt_q(&self.a), fmt_q(&self.b))
    }

    pub fn parse(id: &str) -> Result<Self> {
        let (a, b) = id
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("invalid grid point {id:?}")))?;
        Ok(GridPoint::new(parse_q(a)?, parse_q(b)?))
    }

    /// Row-wise metric: horizontal distance within a row, otherwise the
    /// path through the nearer of the two vertical sides.
    pub fn distance(&self, other: &GridPoint) -> Q {
        if self.b == other.b {
            (&self.a - &other.a).abs()
        } else {
            let s = &self.a + &other.a;
            let two = q(2, 1);
            let via = if s <= &two - &s { s.clone() } else { &two - &s };
            via + (&self.b - &other.b).abs()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExampleKind {
    /// Rows `S_n = {(k/2^n, 1/2^n)}` for `n >= 2`, plus `u = (0,1/2)`, `v = (1,1/2)`.
    A,
    /// Rows `S_n = {(k/2^(n-1), 1/2^n)}` for `n >= 1`.
    B,
}

/// A generated example space together with its rows and named points.
#[derive(Debug, Clone)]
pub struct ExampleSpace {
    pub kind: ExampleKind,
    pub level: u32,
    pub space: FiniteMetricSpace,
    /// `rows[n]` lists the indices of the points of `S_n`, left to right.
    pub rows: Vec<Vec<usize>>,
    pub x: usize,
    pub y: usize,
}

impl ExampleSpace {
    pub fn point(&self, a: Q, b: Q) -> Result<usize> {
        self.space.index_of(&GridPoint::new(a, b).id())
    }

    pub fn grid(&self, p: usize) -> GridPoint {
        GridPoint::parse(self.space.name(p)).expect("generated ids are grid points")
    }

    /// Consecutive pairs within each row `S_n`, `n >= 1`.
    pub fn adjacent_pairs(&self) -> Vec<(u32, usize, usize)> {
        let mut out = Vec::new();
        for (n, row) in self.rows.iter().enumerate().skip(1) {
            for w in row.windows(2) {
                out.push((n as u32, w[0], w[1]));
            }
        }
        out
    }
}

fn example_rows(kind: ExampleKind, level: u32) -> Vec<Vec<GridPoint>> {
    let mut rows = vec![vec![GridPoint::new(q(0, 1), q(0, 1)), GridPoint::new(q(1, 1), q(0, 1))]];
    for n in 1..=level as i64 {
        let row = match (kind, n) {
            (ExampleKind::A, 1) => vec![GridPoint::new(q(0, 1), q(1, 2)), GridPoint::new(q(1, 1), q(1, 2))],
            (ExampleKind::A, n) => (0..=(1i64 << n))
                .map(|k| GridPoint::new(q(k, 1 << n), pow2(-n)))
                .collect(),
            (ExampleKind::B, n) => (0..=(1i64 << (n - 1)))
                .map(|k| GridPoint::new(q(k, 1 << (n - 1)), pow2(-n)))
                .collect(),
        };
        rows.push(row);
    }
    rows
}

pub fn example_space(kind: ExampleKind, level: u32) -> Result<ExampleSpace> {
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(Error::Precondition(format!(
            "level must be in 1..={MAX_LEVEL}, got {level}"
        )));
    }
    let grid_rows = example_rows(kind, level);
    let mut grid = Vec::new();
    let mut rows = Vec::new();
    for row in &grid_rows {
        rows.push((grid.len()..grid.len() + row.len()).collect());
        grid.extend(row.iter().cloned());
    }
    let dist = grid
        .iter()
        .map(|p| grid.iter().map(|r| p.distance(r)).collect())
        .collect();
    let space = FiniteMetricSpace::new_unchecked(grid.iter().map(GridPoint::id).collect(), 0, dist);
    Ok(ExampleSpace {
        kind,
        level,
        space,
        rows,
        x: 0,
        y: 1,
    })
}

/// Random connected graph metric on `2..=max_points` points: a random
/// spanning tree plus a few chords, edge lengths `k / 4`, `1 <= k <= 8`.
pub fn random_graph_metric(rng: &mut impl Rng, max_points: usize) -> FiniteMetricSpace {
    let n = rng.gen_range(2..=max_points.max(2));
    let mut edges: Vec<(usize, usize, Q)> = (1..n)
        .map(|v| (rng.gen_range(0..v), v, q(rng.gen_range(1..=8), 4)))
        .collect();
    for _ in 0..rng.gen_range(0..=n) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.push((a, b, q(rng.gen_range(1..=8), 4)));
        }
    }
    let names = (0..n).map(|i| format!("p{i}")).collect();
    FiniteMetricSpace::from_graph(names, 0, &edges).expect("spanning tree keeps the graph connected")
}

pub fn example_space_a(level: u32) -> Result<ExampleSpace> {
    example_space(ExampleKind::A, level)
}

pub fn example_space_b(level: u32) -> Result<ExampleSpace> {
    example_space(ExampleKind::B, level)
}
