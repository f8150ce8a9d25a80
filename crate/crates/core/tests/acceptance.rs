//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{b_oracle, c_oracle, dual_lp_norm, f_pieces, pair_pieces, Iv};
use daugavet::absnorm::{
    circle_point, is_v_point, pt, supporting_slice_construction, transfer_predicate, v_point_witness,
    verify_supporting_slice, AbsNorm2, PlanePoint, Polyhedral, SpherePoint, SupportingSlice,
};
use daugavet::cli::{example_a_functional, sample_supporting_functional};
use daugavet::dyadic::{self, Node, TreeSpanElement};
use daugavet::freespace::{
    certified_denting_pairs, denting_molecule_certificate, free_norm, free_norm_certified, molecule, FreeElement, Slice,
};
use daugavet::metric::{example_space_a, example_space_b, random_graph_metric};
use daugavet::rational::{pow2, q, qi, Q};
use daugavet::rtree::{
    combination_element, daugavet_witness_h, g_mu_build, g_mu_property_check, l_projection_split,
    projection_property_violation, random_element, random_normed_combination, random_tree, recombine,
    retraction_identities_check, HWitness, PropertyOutcome, RTreeSubset, TreePoint,
};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took <= limit, format!("took {took:.1?}, limit {limit:?}"))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn transport_duality() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut pairs = 0;
    for k in 0..200 {
        let space = random_graph_metric(&mut r, 8);
        let mu = random_element(&mut r, &space, 6);
        let cert = free_norm_certified(&mu);
        ensure(cert.verify(&mu), format!("space {k}: certificate rejected"))?;
        ensure(
            cert.norm == dual_lp_norm(&mu),
            format!("space {k}: primal differs from the LP dual"),
        )?;
        for p in 0..space.len() {
            for s in 0..space.len() {
                if p == s {
                    continue;
                }
                let diff = FreeElement::delta(&space, p)
                    .unwrap()
                    .sub(&FreeElement::delta(&space, s).unwrap());
                ensure(&free_norm(&diff) == space.d(p, s), format!("space {k}: atom distance"))?;
                ensure(
                    free_norm(&molecule(&space, p, s).unwrap()).is_one(),
                    format!("space {k}: molecule norm"),
                )?;
                pairs += 1;
            }
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("200 spaces, {pairs} ordered pairs"))
}

fn example_a() -> Outcome {
    let start = Instant::now();
    let ex = example_space_a(3).unwrap();
    let (u, v) = (ex.rows[1][0], ex.rows[1][1]);
    let f = example_a_functional(&ex).unwrap();
    let mxy = molecule(&ex.space, ex.x, ex.y).unwrap();
    let muv = molecule(&ex.space, u, v).unwrap();
    ensure(f.lip_norm().is_one(), "lip norm is not 1")?;
    ensure(f.eval(&mxy).is_one(), "f(m_xy) != 1")?;
    ensure(f.eval(&muv).is_zero(), "f(m_uv) != 0")?;
    ensure(!Slice::new(f, qi(1)).unwrap().contains(&muv), "m_uv lies in S(f, 1)")?;
    ensure(
        denting_molecule_certificate(&ex, u, v).unwrap().denting,
        "m_uv not certified",
    )?;

    let d_uv = free_norm(&mxy.sub(&muv));
    // value confirmed by the Lipschitz LP
    ensure(d_uv == dual_lp_norm(&mxy.sub(&muv)), "m_uv distance disagrees with LP")?;
    ensure(d_uv == qi(1), format!("m_uv distance {d_uv}, expected 1"))?;

    let mut count = 0;
    for (p, s) in certified_denting_pairs(&ex) {
        if (p, s) == (u, v) {
            continue;
        }
        let m = molecule(&ex.space, p, s).unwrap();
        let d = free_norm(&mxy.sub(&m));
        ensure(d == qi(2), format!("pair ({p}, {s}) at distance {d}"))?;
        count += 1;
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "||m_xy - m_uv|| = {d_uv}, {count} other denting molecules at 2"
    ))
}

fn example_b() -> Outcome {
    let ex = example_space_b(4).unwrap();
    let mxy = molecule(&ex.space, ex.x, ex.y).unwrap();
    let pairs: Vec<(u32, usize, usize)> = ex
        .adjacent_pairs()
        .into_iter()
        .filter(|&(n, a, b)| n >= 2 && denting_molecule_certificate(&ex, a, b).unwrap().denting)
        .collect();
    ensure(!pairs.is_empty(), "no certified adjacent pairs")?;
    let mut seen_rows = std::collections::BTreeSet::new();
    for &(n, a, b) in &pairs {
        let diff = mxy.sub(&molecule(&ex.space, a, b).unwrap());
        let d = free_norm(&diff);
        ensure(d < qi(2), format!("row {n}: distance {d}"))?;
        // adjacent pairs in row n sit at 2 - 2^(1-n)
        ensure(d == qi(2) - pow2(1 - n as i64), format!("row {n}: distance {d}"))?;
        if seen_rows.insert(n) {
            ensure(d == dual_lp_norm(&diff), format!("row {n}: LP disagrees"))?;
        }
    }
    let mut r = rng(3);
    for k in 0..20 {
        let f = sample_supporting_functional(&mut r, &ex).unwrap();
        ensure(
            f.lip_norm().is_one() && f.eval(&mxy).is_one(),
            format!("slice {k}: not supporting"),
        )?;
        let alpha = q(r.gen_range(2..=8), 8);
        let slice = Slice::new(f, alpha.clone()).unwrap();
        let hit = pairs.iter().any(|&(_, a, b)| {
            [(a, b), (b, a)]
                .into_iter()
                .any(|(s, t)| slice.contains(&molecule(&ex.space, s, t).unwrap()))
        });
        ensure(hit, format!("slice {k} (width {alpha}) misses every adjacent pair"))?;
    }
    Ok(format!("{} adjacent pairs below 2, 20/20 slices hit", pairs.len()))
}

fn rtree_identities() -> Outcome {
    let mut r = rng(4);
    let eps = q(1, 8);
    let (mut witnesses, mut h_witnessed) = (0, 0);
    for k in 0..200 {
        let size = r.gen_range(3..=10);
        let tree = random_tree(&mut r, size, 4);
        let space = tree.space();
        let x = r.gen_range(0..size);
        let y = (x + r.gen_range(1..size)) % size;
        let (vx, vy) = (TreePoint::Vertex(x), TreePoint::Vertex(y));
        let e = r.gen_range(0..tree.edges().len());
        let len = tree.edges()[e].len.clone();
        let p = tree.point_on_edge(e, len * q(r.gen_range(0..=4), 4)).unwrap();
        let s = TreePoint::Vertex(r.gen_range(0..size));
        ensure(
            retraction_identities_check(&tree, &vx, &vy, &p, &s).unwrap().holds(),
            format!("instance {k}: retraction identities"),
        )?;

        let full = RTreeSubset::full(&tree);
        let mu = random_element(&mut r, space, 6);
        let split = l_projection_split(&full, x, y, &mu).unwrap();
        ensure(split.additive, format!("instance {k}: L-projection not additive"))?;
        ensure(
            dual_lp_norm(&mu) == dual_lp_norm(&split.head) + dual_lp_norm(&split.tail),
            format!("instance {k}: LP norms not additive"),
        )?;

        let (f, comb) = random_normed_combination(&mut r, &tree, 4);
        let g = g_mu_build(&tree, &comb, &f).unwrap();
        let mu_c = combination_element(space, &comb).unwrap();
        ensure(
            g.eval(&mu_c).is_one() && g.lip_norm() <= Q::one(),
            format!("instance {k}: g_mu not norming"),
        )?;
        let mut best: Option<(Q, usize, usize)> = None;
        for a in 0..size {
            for b in 0..size {
                if a != b {
                    let val = g.eval(&molecule(space, a, b).unwrap());
                    if best.as_ref().is_none_or(|m| val > m.0) {
                        best = Some((val, a, b));
                    }
                }
            }
        }
        let (_, bu, bv) = best.unwrap();
        match g_mu_property_check(&tree, &comb, &g, bu, bv, &q(r.gen_range(1..=8), 8)).unwrap() {
            PropertyOutcome::Witness { .. } => witnesses += 1,
            PropertyOutcome::Vacuous => {}
            PropertyOutcome::NoWitness => return Err(format!("instance {k}: g_mu property has no witness")),
        }

        let out = recombine(&full, &comb).unwrap();
        ensure(
            combination_element(space, &out).unwrap() == mu_c,
            format!("instance {k}: recombine changed mu"),
        )?;
        ensure(
            projection_property_violation(&tree, &out).is_none(),
            format!("instance {k}: projection property"),
        )?;

        let raw = random_element(&mut r, space, 6);
        if free_norm(&raw).is_zero() {
            continue;
        }
        let unit = raw.scale(&free_norm(&raw).recip());
        let f = free_norm_certified(&unit).dual;
        if let Ok(HWitness::Witnessed { h, lip, gap, .. }) = daugavet_witness_h(&tree, &unit, &f, x, y, &eps) {
            ensure(lip.is_one(), format!("instance {k}: lip(h) = {lip}"))?;
            let direct = h.eval(&unit) - h.eval(&molecule(space, x, y).unwrap());
            ensure(
                direct == gap && gap == qi(2) - qi(4) * &eps,
                format!("instance {k}: h gap {gap}"),
            )?;
            h_witnessed += 1;
        }
    }
    ensure(witnesses >= 100, format!("only {witnesses} g_mu witnesses"))?;
    Ok(format!(
        "200 instances, {witnesses} g_mu witnesses, {h_witnessed} h witnesses"
    ))
}

fn sorted(mut v: Vec<PlanePoint>) -> Vec<PlanePoint> {
    v.sort();
    v
}

/// Slice construction at `|x|`, mirrored back into the quadrant of `x`.
fn reflected_slice(p: &Polyhedral, x: &PlanePoint) -> daugavet::Result<SupportingSlice> {
    let (sa, sb) = (
        if x.a.is_negative() { -Q::one() } else { Q::one() },
        if x.b.is_negative() { -Q::one() } else { Q::one() },
    );
    let flip = |v: &PlanePoint| pt(&v.a * &sa, &v.b * &sb);
    let s = supporting_slice_construction(p, &x.abs())?;
    Ok(SupportingSlice {
        functional: flip(&s.functional),
        keep: s.keep.iter().map(flip).collect(),
        excluded: s.excluded.iter().map(flip).collect(),
        ..s
    })
}

fn absolute_norms() -> Outcome {
    let l1 = Polyhedral::l1();
    let linf = Polyhedral::linf();
    let axes = vec![pt(qi(1), qi(0)), pt(qi(0), qi(1)), pt(qi(-1), qi(0)), pt(qi(0), qi(-1))];
    let corners = vec![
        pt(qi(1), qi(1)),
        pt(qi(-1), qi(1)),
        pt(qi(-1), qi(-1)),
        pt(qi(1), qi(-1)),
    ];
    ensure(sorted(l1.extreme_points()) == sorted(axes), "l1 extreme points")?;
    ensure(sorted(linf.extreme_points()) == sorted(corners), "linf extreme points")?;
    for p in [&l1, &linf] {
        let n = AbsNorm2::Polyhedral(p.clone());
        for e in p.extreme_points() {
            ensure(
                is_v_point(&n, &SpherePoint::Exact(e.clone())).unwrap(),
                "extreme point is not a v-point",
            )?;
            ensure(v_point_witness(p, &e).is_some(), "v-point without witness")?;
        }
        for w in p.cone_vertices().windows(2) {
            let mid = SpherePoint::Exact(w[0].add(&w[1]).scale(&q(1, 2)));
            ensure(!is_v_point(&n, &mid).unwrap(), "facet midpoint is a v-point")?;
        }
    }

    let mut r = rng(5);
    for name in ["lp:3/2", "l2", "lp:3"] {
        let n = AbsNorm2::builtin(name).unwrap();
        for _ in 0..50 {
            let d = loop {
                let d = pt(q(r.gen_range(-16..=16), 8), q(r.gen_range(-16..=16), 8));
                if !d.is_zero() {
                    break d;
                }
            };
            ensure(
                !is_v_point(&n, &SpherePoint::Normalized(d)).unwrap(),
                format!("{name} has a v-point"),
            )?;
        }
    }

    let fig = AbsNorm2::figure_alpha();
    let p = fig.as_polyhedral().ok_or("figure norm is not polyhedral")?;
    let want = vec![
        pt(qi(1), qi(0)),
        pt(q(3, 4), q(1, 2)),
        pt(q(1, 2), q(3, 4)),
        pt(qi(0), qi(1)),
    ];
    ensure(p.cone_vertices() == want.as_slice(), "figure cone vertices")?;
    for w in p.cone_vertices().windows(2) {
        for k in 0..=8 {
            let x = w[0].scale(&q(k, 8)).add(&w[1].scale(&q(8 - k, 8)));
            ensure(
                transfer_predicate(&fig, &SpherePoint::Exact(x)).unwrap(),
                "transfer false on figure norm",
            )?;
        }
    }
    let l2 = AbsNorm2::builtin("l2").unwrap();
    for k in 1..64 {
        let x = circle_point(&q(k, 64));
        ensure(
            !transfer_predicate(&l2, &SpherePoint::Exact(x)).unwrap(),
            "transfer true on l2",
        )?;
    }
    for name in ["l1", "linf", "figure-alpha", "l2", "lp:3/2", "lp:3"] {
        let n = AbsNorm2::builtin(name).unwrap();
        ensure(n.dual().dual() == n, format!("bipolarity fails for {name}"))?;
    }
    let mut points = p.extreme_points();
    let verts = p.cone_vertices();
    points.extend(verts.windows(2).map(|w| w[0].add(&w[1]).scale(&q(1, 2))));
    let mut slices = 0;
    for x in &points {
        let s = reflected_slice(&p, x).map_err(|e| format!("slice at {x:?}: {e}"))?;
        ensure(
            verify_supporting_slice(&p, x, &s).passes,
            format!("slice at {x:?} fails verification"),
        )?;
        slices += 1;
    }
    Ok(format!("{slices} supporting slices verified on the figure norm"))
}

/// `x* = 1_P - 1_N` with `P = B^t_{|t|+1} u C^t_{|t|+1}` and `N = C^t_{|t|}`.
fn separation_pieces(t: &Node) -> Vec<(Iv, Q)> {
    let n = t.len();
    vec![
        (b_oracle(t, n + 1), Q::one()),
        (c_oracle(t, n + 1), Q::one()),
        (c_oracle(t, n), -Q::one()),
    ]
}

fn dyadic_suite() -> Outcome {
    let start = Instant::now();
    let mut r = rng(6);
    for n in 1..=6 {
        for t in Node::level(n) {
            ensure(dyadic::f_fn(&t).unwrap().l1_norm().is_one(), format!("||f_{t}|| != 1"))?;
            ensure(dyadic::h_fn(&t).unwrap().l1_norm().is_one(), format!("||h_{t}|| != 1"))?;
        }
    }
    for k in 0..500 {
        let g = dyadic::random_f_span(&mut r, 5, 6);
        ensure(
            dyadic::l1_norm(&g).unwrap() == dyadic::span_norm_formula(&g.f).unwrap(),
            format!("formula sample {k}"),
        )?;
    }
    for k in 0..1000 {
        let n = r.gen_range(1..=8);
        let a: Vec<Q> = (0..n).map(|_| q(r.gen_range(-9..=9), r.gen_range(1..=5))).collect();
        let m = r.gen_range(1..=n);
        ensure(
            dyadic::cascade_inequality_check(&a, m, n).unwrap().2,
            format!("cascade sample {k}"),
        )?;
    }
    for n in 1..=4 {
        for t in Node::level(n) {
            let (l, rhs, _) = dyadic::concentration_check(&TreeSpanElement::single_f(t.clone(), Q::one()), n).unwrap();
            ensure(l == rhs, format!("concentration not tight at f_{t}"))?;
        }
    }
    for _ in 0..100 {
        let g = dyadic::random_f_span(&mut r, 4, 4);
        ensure(
            dyadic::concentration_check(&g, r.gen_range(1..=5)).unwrap().2,
            "concentration inequality",
        )?;
    }
    for n in 1..=6 {
        let nodes = Node::level(n);
        let coeffs = (0..nodes.len().min(8))
            .map(|_| (nodes[r.gen_range(0..nodes.len())].clone(), q(r.gen_range(-5..=5), 3)))
            .collect();
        let rep = dyadic::martingale_and_isometry_check(n, &coeffs).unwrap();
        ensure(
            rep.martingale && rep.isometry,
            format!("martingale/isometry at level {n}"),
        )?;
    }

    let deep: Vec<Node> = (1..=6).flat_map(Node::level).collect();
    let mut flips = 0;
    for n in 1..=4 {
        for t in Node::level(n) {
            let xs = separation_pieces(&t);
            let allowed = [pow2(-(n as i64)), pow2(-(n as i64) - 1), Q::zero()];
            for s in &deep {
                let v = dyadic::separation_functional_values(&t, s).unwrap();
                ensure(
                    v == pair_pieces(&xs, &f_pieces(s)),
                    format!("separation value at ({t}, {s})"),
                )?;
                ensure(
                    allowed.contains(&v.abs()),
                    format!("separation value {v} at ({t}, {s})"),
                )?;
                if v.is_negative() {
                    flips += 1;
                }
            }
            let x = dyadic::separation_functional(&t).unwrap();
            let g = dyadic::separated_element(&t).to_step().unwrap();
            ensure(x.pair(&g).unwrap() == g.l1_norm(), format!("x*(f) != ||f|| at {t}"))?;
        }
    }

    for t in ["0", "01", "110"] {
        for eps in [q(1, 2), q(1, 4), q(1, 8)] {
            let rep = dyadic::exposure_experiment(&Node::parse(t).unwrap(), &eps, 100, &mut r).unwrap();
            ensure(
                rep.violations == 0,
                format!("exposure violations at t = {t}, eps = {eps}"),
            )?;
        }
    }

    for k in 0..20 {
        let g = dyadic::random_h_sphere(&mut r, 3, 4);
        let gs = g.to_step().unwrap();
        let x = gs.sign();
        let eps = [q(1, 2), q(1, 4), q(1, 8)][k % 3].clone();
        let w = dyadic::not_relative_daugavet_witness(&g, &x, &eps).unwrap();
        let fu = dyadic::f_fn(&Node::parse(&w.u).unwrap()).unwrap();
        let plus = gs.add(&fu).unwrap().l1_norm();
        let minus = gs.sub(&fu).unwrap().l1_norm();
        ensure(
            plus == w.exact_plus && minus == w.exact_minus,
            format!("witness {k}: distances"),
        )?;
        ensure(
            w.min_below_two && plus.min(minus) < qi(2),
            format!("witness {k}: min distance not below 2"),
        )?;
    }

    for k in 0..5 {
        let g = dyadic::random_h_sphere(&mut r, 3, 4);
        let gs = g.to_step().unwrap();
        let x = gs.sign();
        let alpha = q(1, 2);
        for eps in [q(1, 2), q(1, 4), q(1, 8)] {
            let w = dyadic::delta_witness(&g, &x, &alpha, &eps).unwrap();
            let ys = w.y.to_step().unwrap();
            let d = gs.sub(&ys).unwrap().l1_norm();
            ensure(
                d == w.distance && d >= qi(2) - &eps,
                format!("delta {k}: distance {d} at eps {eps}"),
            )?;
            ensure(
                ys.l1_norm() <= Q::one() && x.pair(&ys).unwrap() > Q::one() - &alpha,
                format!("delta {k}: slice"),
            )?;
        }
    }
    within(start, Duration::from_secs(300))?;
    Ok(format!("all items exact; x*(f_t) = -2^-|t| at {flips} diagonal pairs"))
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_daugavet"))
            .args(["verify", "all", "--seed", "42"])
            .output()
            .map_err(|e| e.to_string())
    };
    let a = run()?;
    let b = run()?;
    ensure(a.status.success(), format!("verify all exited with {}", a.status))?;
    ensure(!a.stdout.is_empty() && a.stdout == b.stdout, "reports differ")?;
    Ok(format!("{} identical bytes", a.stdout.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("transportation duality", transport_duality),
        ("example A denting distances", example_a),
        ("example B adjacent pairs and slices", example_b),
        ("R-tree identities", rtree_identities),
        ("absolute norms", absolute_norms),
        ("dyadic suite", dyadic_suite),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let took = start.elapsed();
        match outcome {
            Ok(msg) => println!("PASS criterion {}: {name} ({msg}) [{took:.2?}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({msg}) [{took:.2?}]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
