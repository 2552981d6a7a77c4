mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use realshare::engine::{AlphaChoice, Session, SessionConfig};
use realshare::sharing::{reconstruct, SharedScalar};

fn session(seed: u64) -> Session {
    Session::new(&SessionConfig::new(5, 3, seed)).unwrap()
}

/// A random expression over shared leaves, evaluated both in plaintext and
/// under sharing.
fn eval_tree(depth: u32, rng: &mut ChaCha20Rng, s: &mut Session) -> (f64, SharedScalar) {
    if depth == 0 || rng.random_bool(0.25) {
        let v = rng.random_range(0.1..10.0);
        return (v, s.share(v));
    }
    let (x, sx) = eval_tree(depth - 1, rng, s);
    match rng.random_range(0..5) {
        0 => {
            let (y, sy) = eval_tree(depth - 1, rng, s);
            (x + y, sx.add(&sy).unwrap())
        }
        1 => {
            let c = rng.random_range(0.1..10.0);
            (c * x, sx.mul_const(c))
        }
        2 => {
            let c = rng.random_range(0.1..10.0);
            (x + c, sx.add_const(c))
        }
        3 => {
            let (y, sy) = eval_tree(depth - 1, rng, s);
            (x * y, s.beaver_multiply(&sx, &sy).unwrap())
        }
        _ => (1.0 / x, s.secure_invert(&sx).unwrap()),
    }
}

#[test]
fn expression_trees_match_plaintext() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for tree in 0..500u64 {
        let mut s = session(tree);
        let (want, shared) = eval_tree(5, &mut rng, &mut s);
        let got = s.open(&shared);
        let rel = (got - want).abs() / want.abs().max(1.0);
        assert!(rel < 1e-6, "tree {tree}: {got} vs {want}");
        assert!(s.ledger().is_consistent());
    }
}

#[test]
fn beaver_products_of_random_pairs() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let mut s = session(12);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (x, y) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let (sx, sy) = (s.share(x), s.share(y));
        let p = s.beaver_multiply(&sx, &sy).unwrap().reconstruct();
        worst = worst.max((p - x * y).abs() / (x * y).abs().max(1e-3));
    }
    assert!(worst < 1e-6, "worst relative error {worst}");
    assert_eq!(s.ledger().multiplications, 1000);
    assert_eq!(s.ledger().openings, 2000);
}

#[test]
fn dealt_masks_have_the_configured_variance() {
    let mut s = session(13);
    let draws: Vec<f64> = (0..10_000).map(|_| s.deal_mask().r.reconstruct()).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / draws.len() as f64;
    assert!((var / 1e4 - 1.0).abs() < 0.05, "sample variance {var}");
    assert_eq!(s.ledger().openings, 0);
}

#[test]
fn dealt_matrix_entries_are_uncorrelated() {
    let mut s = session(14);
    let draws: Vec<DMatrix<f64>> = (0..10_000).map(|_| s.deal_random_matrix(2).reconstruct()).collect();
    let entry = |k: usize| -> Vec<f64> { draws.iter().map(|m| m[(k / 2, k % 2)]).collect() };
    let corr = |a: &[f64], b: &[f64]| {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    for i in 0..4 {
        for j in i + 1..4 {
            let c = corr(&entry(i), &entry(j));
            assert!(c.abs() < 0.05, "entries {i},{j}: correlation {c}");
        }
    }
}

#[test]
fn dealt_triples_multiply() {
    let mut s = session(15);
    for _ in 0..100 {
        let t = s.deal_triple();
        let (a, b, c) = (t.a.reconstruct(), t.b.reconstruct(), t.c.reconstruct());
        assert!((c - a * b).abs() <= 1e-6 * (a * b).abs().max(1.0));
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let run = || {
        let mut s = session(99);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let outputs: Vec<u64> = (0..50)
            .map(|_| {
                let (_, e) = eval_tree(4, &mut rng, &mut s);
                s.open(&e).to_bits()
            })
            .collect();
        (outputs, s.ledger())
    };
    assert_eq!(run(), run());
}

#[test]
fn matrix_product_costs_d_cubed() {
    let mut rng = ChaCha20Rng::seed_from_u64(16);
    let mut s = session(16);
    let x = common::gaussian_matrix(&mut rng, 3, 3);
    let y = common::gaussian_matrix(&mut rng, 3, 3);
    let (sx, sy) = (s.share_matrix(&x), s.share_matrix(&y));
    let p = s.secure_mat_mul(&sx, &sy).unwrap().reconstruct();
    assert!((&p - &x * &y).amax() <= 1e-6 * (&x * &y).amax());
    assert_eq!(s.ledger().multiplications, 27);
    assert_eq!(s.ledger().openings, 54);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn any_t_plus_one_shares_reconstruct(
        s in -1e3f64..1e3,
        seed in any::<u64>(),
        start in 0usize..2,
    ) {
        let mut sess = Session::new(&SessionConfig::new(5, 3, seed).alphas(AlphaChoice::Grid)).unwrap();
        let x = sess.share(s);
        let parties: Vec<usize> = (start..start + 4).collect();
        let got = reconstruct(&x.pairs(&parties), sess.policy()).unwrap();
        prop_assert!((got - s).abs() < 1e-6);
    }

    #[test]
    fn sharing_is_linear(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -50f64..50.0, seed in any::<u64>()) {
        let mut sess = session(seed);
        let (sa, sb) = (sess.share(a), sess.share(b));
        let combo = sa.mul_const(c).add(&sb).unwrap().add_const(1.0);
        prop_assert!((combo.reconstruct() - (c * a + b + 1.0)).abs() < 1e-6 * (1.0 + (c * a).abs() + b.abs()));
    }

    #[test]
    fn openings_follow_the_ledger_identity(ops in proptest::collection::vec(0u8..3, 1..30), seed in any::<u64>()) {
        let mut sess = session(seed);
        let x = sess.share(2.5);
        for op in ops {
            match op {
                0 => { sess.beaver_multiply(&x, &x).unwrap(); }
                1 => { sess.secure_invert(&x).unwrap(); }
                _ => { sess.open(&x); }
            }
        }
        prop_assert!(sess.ledger().is_consistent());
    }
}
