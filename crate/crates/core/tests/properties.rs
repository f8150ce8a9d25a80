mod common;

use std::collections::BTreeMap;

use common::{b_oracle, c_oracle, dual_lp_norm, f_pieces, pair_pieces};
use daugavet::absnorm::{
    circle_point, is_v_point, pt, transfer_predicate, v_point_witness, AbsNorm2, PlanePoint, Polyhedral, SpherePoint,
};
use daugavet::dyadic::{self, b_set, c_set, DyadicStep, Node, TreeSpanElement};
use daugavet::freespace::{free_norm, free_norm_certified, mcshane_extend, FreeElement};
use daugavet::metric::{example_space_a, example_space_b, random_graph_metric};
use daugavet::rational::{q, qi, Q};
use daugavet::rtree::{
    combination_element, daugavet_witness_h, l_projection_split, projection_property_violation, random_element,
    random_normed_combination, random_tree, recombine, retraction_identities_check, HWitness, RTreeSubset, TreePoint,
};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

#[test]
fn generators_validate_up_to_level_six() {
    for level in 1..=6 {
        assert!(example_space_a(level).unwrap().space.validate().is_pass());
        assert!(example_space_b(level).unwrap().space.validate().is_pass());
    }
    let ex = example_space_a(3).unwrap();
    let (u, v) = (ex.rows[1][0], ex.rows[1][1]);
    assert_eq!(ex.space.d(ex.x, ex.y), &qi(1));
    assert_eq!(ex.space.d(u, v), &qi(1));
    assert_eq!(ex.space.d(ex.x, u), &q(1, 2));
    assert_eq!(ex.space.d(ex.y, v), &q(1, 2));
}

#[test]
fn segments_are_stable_under_truncation() {
    for level in 1..=3 {
        for (small, big) in [
            (example_space_a(level).unwrap(), example_space_a(level + 1).unwrap()),
            (example_space_b(level).unwrap(), example_space_b(level + 1).unwrap()),
        ] {
            let n = small.space.len();
            for a in 0..n {
                for b in 0..n {
                    let names = |s: &daugavet::metric::FiniteMetricSpace, v: Vec<usize>| {
                        let mut x: Vec<String> = v.into_iter().map(|p| s.name(p).to_string()).collect();
                        x.sort();
                        x
                    };
                    let seg = names(&small.space, small.space.segment(a, b).unwrap());
                    let ba = big.space.index_of(small.space.name(a)).unwrap();
                    let bb = big.space.index_of(small.space.name(b)).unwrap();
                    let mut wide = names(&big.space, big.space.segment(ba, bb).unwrap());
                    wide.retain(|p| small.space.index_of(p).is_ok());
                    assert_eq!(seg, wide);
                    assert_eq!(seg, names(&small.space, small.space.segment(b, a).unwrap()));
                }
            }
        }
    }
}

#[test]
fn free_norm_is_truncation_invariant() {
    let mut r = rng(5);
    for level in 1..=3 {
        let small = example_space_a(level).unwrap();
        let big = example_space_a(level + 1).unwrap();
        for _ in 0..10 {
            let mu = random_element(&mut r, &small.space, 4);
            let lifted = FreeElement::from_coeffs(
                &big.space,
                mu.coeffs()
                    .iter()
                    .map(|(&p, c)| (big.space.index_of(small.space.name(p)).unwrap(), c.clone())),
            )
            .unwrap();
            assert_eq!(free_norm(&mu), free_norm(&lifted));
        }
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn primal_norm_equals_dual_lp(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_graph_metric(&mut r, 6);
        let mu = random_element(&mut r, &space, 5);
        let cert = free_norm_certified(&mu);
        prop_assert!(cert.verify(&mu));
        prop_assert_eq!(cert.norm, dual_lp_norm(&mu));
    }

    #[test]
    fn norm_is_subadditive_and_homogeneous(seed in any::<u64>(), num in -7i64..=7, den in 1i64..=5) {
        let mut r = rng(seed);
        let space = random_graph_metric(&mut r, 8);
        let a = random_element(&mut r, &space, 5);
        let b = random_element(&mut r, &space, 5);
        prop_assert!(free_norm(&a.add(&b)) <= free_norm(&a) + free_norm(&b));
        let c = q(num, den);
        prop_assert_eq!(free_norm(&a.scale(&c)), c.abs() * free_norm(&a));
    }

    #[test]
    fn segment_is_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_graph_metric(&mut r, 8);
        let a = r.gen_range(0..space.len());
        let b = r.gen_range(0..space.len());
        let mut s1 = space.segment(a, b).unwrap();
        let mut s2 = space.segment(b, a).unwrap();
        s1.sort();
        s2.sort();
        prop_assert!(s1.contains(&a) && s1.contains(&b));
        prop_assert_eq!(s1, s2);
    }

    #[test]
    fn mcshane_keeps_the_data_constant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_graph_metric(&mut r, 8);
        let k = r.gen_range(1..=space.len());
        let data: BTreeMap<usize, Q> = (0..k).map(|i| (i, q(r.gen_range(-8..=8), 4))).collect();
        let mut lip = Q::zero();
        for (&a, fa) in &data {
            for (&b, fb) in &data {
                if a != b {
                    lip = lip.max((fa - fb).abs() / space.d(a, b));
                }
            }
        }
        let f = mcshane_extend(&space, &data).unwrap();
        prop_assert_eq!(f.lip_norm(), lip);
        let shift = f.value(0) - &data[&0];
        for (&p, v) in &data {
            prop_assert_eq!(f.value(p) - &shift, v.clone());
        }
    }

    #[test]
    fn retraction_is_idempotent_and_contracting(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=10);
        let tree = random_tree(&mut r, n, 4);
        let x = r.gen_range(0..n);
        let y = (x + r.gen_range(1..n)) % n;
        let point = |r: &mut ChaCha8Rng| {
            let e = r.gen_range(0..tree.edges().len());
            let len = tree.edges()[e].len.clone();
            tree.point_on_edge(e, len * q(r.gen_range(0..=4), 4)).unwrap()
        };
        let (vx, vy) = (TreePoint::Vertex(x), TreePoint::Vertex(y));
        let p = point(&mut r);
        let s = point(&mut r);
        let yp = tree.retract(&vx, &vy, &p).unwrap();
        let ys = tree.retract(&vx, &vy, &s).unwrap();
        prop_assert_eq!(tree.retract(&vx, &vy, &yp).unwrap(), yp.clone());
        prop_assert!(tree.distance(&yp, &ys).unwrap() <= tree.distance(&p, &s).unwrap());
        prop_assert!(retraction_identities_check(&tree, &vx, &vy, &p, &s).unwrap().holds());
    }

    #[test]
    fn l_projection_is_additive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=8);
        let tree = random_tree(&mut r, n, 4);
        let x = r.gen_range(0..n);
        let y = (x + r.gen_range(1..n)) % n;
        let mu = random_element(&mut r, tree.space(), 6);
        let split = l_projection_split(&RTreeSubset::full(&tree), x, y, &mu).unwrap();
        prop_assert!(split.additive);
        prop_assert_eq!(&split.norm, &dual_lp_norm(&mu));
        prop_assert_eq!(split.norm, dual_lp_norm(&split.head) + dual_lp_norm(&split.tail));
    }

    #[test]
    fn recombination_preserves_the_element(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=10);
        let tree = random_tree(&mut r, n, 4);
        let (_, comb) = random_normed_combination(&mut r, &tree, 4);
        let out = recombine(&RTreeSubset::full(&tree), &comb).unwrap();
        prop_assert_eq!(combination_element(tree.space(), &out).unwrap(), combination_element(tree.space(), &comb).unwrap());
        prop_assert_eq!(out.iter().map(|t| &t.weight).sum::<Q>(), Q::one());
        prop_assert!(projection_property_violation(&tree, &out).is_none());
    }

    #[test]
    fn witness_h_has_the_stated_values(seed in any::<u64>(), k in 1i64..=7) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=10);
        let tree = random_tree(&mut r, n, 4);
        let raw = random_element(&mut r, tree.space(), 6);
        prop_assume!(!free_norm(&raw).is_zero());
        let mu = raw.scale(&free_norm(&raw).recip());
        let f = free_norm_certified(&mu).dual;
        let x = r.gen_range(0..n);
        let y = (x + r.gen_range(1..n)) % n;
        let eps = q(k, 16);
        if let Ok(HWitness::Witnessed { lip, h_mu, gap, .. }) = daugavet_witness_h(&tree, &mu, &f, x, y, &eps) {
            prop_assert!(lip.is_one());
            prop_assert!(h_mu.is_one());
            prop_assert_eq!(gap, qi(2) - qi(4) * eps);
        }
    }
}

/// Strictly convex cone through random rational points of the unit circle.
fn random_cone(r: &mut ChaCha8Rng) -> Polyhedral {
    let k = r.gen_range(0..=3);
    let mut ts: Vec<i64> = (0..k).map(|_| r.gen_range(1..16)).collect();
    ts.sort();
    ts.dedup();
    let mut cone = vec![pt(qi(1), qi(0))];
    cone.extend(ts.iter().map(|&t| circle_point(&q(t, 16))));
    cone.push(pt(qi(0), qi(1)));
    Polyhedral::new(cone).unwrap()
}

fn grid() -> Vec<PlanePoint> {
    let vals: Vec<Q> = (-4..=4).map(|k| q(k, 4)).collect();
    vals.iter()
        .flat_map(|a| vals.iter().map(move |b| pt(a.clone(), b.clone())))
        .collect()
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn norm_sits_between_sup_and_sum(seed in any::<u64>()) {
        let p = random_cone(&mut rng(seed));
        for x in grid() {
            let v = p.eval(&x);
            prop_assert!(v <= x.a.abs() + x.b.abs());
            prop_assert!(v >= x.a.abs().max(x.b.abs()));
        }
    }

    #[test]
    fn bipolar_and_holder(seed in any::<u64>()) {
        let p = random_cone(&mut rng(seed));
        let d = p.dual();
        prop_assert_eq!(d.dual(), p.clone());
        for e in p.extreme_points() {
            for f in d.extreme_points() {
                prop_assert!(e.dot(&f) <= Q::one());
            }
        }
        // each facet normal is attained at both endpoints of its facet
        for (w, n) in p.cone_vertices().windows(2).zip(p.facet_normals()) {
            prop_assert!(w[0].dot(n).is_one() && w[1].dot(n).is_one());
            prop_assert!(p.dual_eval(n).is_one());
        }
    }

    #[test]
    fn v_points_come_with_witnesses(seed in any::<u64>()) {
        let p = random_cone(&mut rng(seed));
        let n = AbsNorm2::Polyhedral(p.clone());
        for e in p.extreme_points() {
            prop_assert!(is_v_point(&n, &SpherePoint::Exact(e.clone())).unwrap());
            let (y, z) = v_point_witness(&p, &e).unwrap();
            prop_assert_eq!(p.eval(&e.add(&y)), qi(2));
            prop_assert_eq!(p.eval(&e.add(&z)), qi(2));
            prop_assert!(p.eval(&y.add(&z)) < qi(2));
        }
        for w in p.cone_vertices().windows(2) {
            let mid = w[0].add(&w[1]).scale(&q(1, 2));
            prop_assert!(transfer_predicate(&n, &SpherePoint::Exact(mid)).unwrap());
        }
    }

    #[test]
    fn lp_transfer_fails_on_open_cone(idx in 0usize..5, a in 1i64..=20, b in 1i64..=20) {
        let name = ["lp:3/2", "l2", "lp:5/2", "lp:3", "lp:4"][idx];
        let n = AbsNorm2::builtin(name).unwrap();
        let x = SpherePoint::Normalized(pt(q(a, 4), q(b, 4)));
        prop_assert!(!transfer_predicate(&n, &x).unwrap());
        prop_assert!(!is_v_point(&n, &x).unwrap());
    }
}

#[test]
fn dyadic_sets_match_bisection() {
    for n in 1..=6 {
        let b_n = b_oracle(&Node::root(), n);
        let c_n = c_oracle(&Node::root(), n);
        assert_eq!(&b_n.1 - &b_n.0, daugavet::rational::pow2(-(n as i64) - 1));
        assert_eq!(&c_n.1 - &c_n.0, daugavet::rational::pow2(-(n as i64) - 1));
        let covered: Q = (1..=n)
            .map(|i| {
                let b = b_oracle(&Node::root(), i);
                b.1 - b.0
            })
            .sum::<Q>()
            + (&c_n.1 - &c_n.0);
        assert_eq!(covered, q(1, 2));
        for k in 0..=6 {
            let mut pieces: Vec<(Q, Q)> = Node::level(k)
                .iter()
                .map(|t| {
                    let b = b_set(t, n).unwrap()[0];
                    let c = c_set(t, n).unwrap()[0];
                    assert_eq!((b.start(), b.end()), b_oracle(t, n));
                    assert_eq!((c.start(), c.end()), c_oracle(t, n));
                    assert_eq!(b.measure(), daugavet::rational::pow2(-(k as i64) - n as i64 - 1));
                    (b.start(), b.end())
                })
                .collect();
            pieces.sort();
            assert_eq!(pieces[0].0, b_n.0);
            assert_eq!(pieces.last().unwrap().1, b_n.1);
            assert!(pieces.windows(2).all(|w| w[0].1 == w[1].0));
        }
    }
}

#[test]
fn f_pairings_match_interval_oracle() {
    let nodes: Vec<Node> = (1..=4).flat_map(Node::level).collect();
    for t in nodes.iter().step_by(3) {
        let x = dyadic::f_fn(t).unwrap();
        for s in &nodes {
            let exact = x.pair(&dyadic::f_fn(s).unwrap()).unwrap();
            assert_eq!(exact, pair_pieces(&f_pieces(t), &f_pieces(s)), "{t} {s}");
        }
    }
}

#[test]
fn refinement_preserves_functions() {
    let f = dyadic::h_fn(&Node::parse("101").unwrap()).unwrap();
    let padded = DyadicStep::zero(7, 16).unwrap().add(&f).unwrap();
    assert_eq!(padded.resolution(), 16);
    assert_eq!(padded.l1_norm(), f.l1_norm());
    assert!(padded.sub(&f).unwrap().is_zero());
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn span_formula_equals_integration(seed in any::<u64>()) {
        let g = dyadic::random_f_span(&mut rng(seed), 5, 6);
        prop_assert_eq!(dyadic::l1_norm(&g).unwrap(), dyadic::span_norm_formula(&g.f).unwrap());
    }

    #[test]
    fn restricted_norms_follow_the_formula(seed in any::<u64>()) {
        let g = dyadic::random_f_span(&mut rng(seed), 4, 5);
        let n = g.max_depth();
        let a = |t: &Node| g.f.get(t).cloned().unwrap_or_else(Q::zero);
        for t in Node::level(n) {
            for j in 1..=n {
                let inner: Q = (j..=n).map(|i| daugavet::rational::pow2((i - j) as i64) * a(&t.prefix(i))).sum();
                let scale = daugavet::rational::pow2(-(n as i64));
                prop_assert_eq!(dyadic::restricted_norm(&g, &b_set(&t, j).unwrap()).unwrap(), &scale * inner.abs());
                prop_assert_eq!(dyadic::restricted_norm(&g, &c_set(&t, j).unwrap()).unwrap(), &scale * a(&t.prefix(j)).abs());
            }
        }
    }

    #[test]
    fn cascade_and_concentration_hold(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=9);
        let a: Vec<Q> = (0..n).map(|_| q(r.gen_range(-9..=9), r.gen_range(1..=6))).collect();
        let m = r.gen_range(1..=n);
        prop_assert!(dyadic::cascade_inequality_check(&a, m, n).unwrap().2);
        let g = dyadic::random_f_span(&mut r, 4, 5);
        prop_assert!(dyadic::concentration_check(&g, r.gen_range(1..=6)).unwrap().2);
    }

    #[test]
    fn disjoint_split_conditions_agree(seed in any::<u64>(), k in 1i64..=15) {
        let mut r = rng(seed);
        let x = TreeSpanElement::single_h(Node::parse("0").unwrap(), q(r.gen_range(1..=9), 4))
            .add(&TreeSpanElement::single_h(Node::parse("01").unwrap(), q(r.gen_range(-9..=9), 4)));
        let y = TreeSpanElement::single_h(Node::parse("1").unwrap(), q(r.gen_range(1..=9), 4));
        let (nx, ny, nz) = (dyadic::l1_norm(&x).unwrap(), dyadic::l1_norm(&y).unwrap(), dyadic::l1_norm(&x.add(&y)).unwrap());
        prop_assert_eq!(&nx + &ny, nz.clone());
        let eps = q(k, 16);
        let c1 = nx <= (Q::one() - &eps) * &nz;
        let c2 = ny >= &eps * &nz;
        let c3 = nx <= (eps.recip() - Q::one()) * &ny;
        prop_assert!(c1 == c2 && c2 == c3);
    }

    #[test]
    fn h_span_is_isometric(seed in any::<u64>(), level in 1u32..=4) {
        let mut r = rng(seed);
        let nodes = Node::level(level);
        let coeffs: BTreeMap<Node, Q> = (0..4)
            .map(|_| (nodes[r.gen_range(0..nodes.len())].clone(), q(r.gen_range(-6..=6), 5)))
            .collect();
        let rep = dyadic::martingale_and_isometry_check(level, &coeffs).unwrap();
        prop_assert!(rep.martingale && rep.isometry);
    }

    #[test]
    fn exposure_never_violates(seed in any::<u64>(), k in 1i64..=7) {
        let t = Node::parse(["0", "10", "011"][(seed % 3) as usize]).unwrap();
        let rep = dyadic::exposure_experiment(&t, &q(k, 8), 3, &mut rng(seed)).unwrap();
        prop_assert_eq!(rep.violations, 0);
    }
}
