#[path = "common/oracle.rs"]
mod oracle;

use confpair::linalg::{
    intersect, kernel, numerical_rank, projection_matrix, radical, ScalarProduct, Subspace, Tolerance,
};
use nalgebra::{DMatrix, DVector};
use oracle::{hcat, rank, span_signature, to_f64, to_q};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn oracle_knows_small_cases() {
    let diag = |d: &[i64]| -> Vec<Vec<i64>> {
        (0..d.len()).map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0 }).collect()).collect()
    };
    assert_eq!(oracle::inertia(to_q(&diag(&[1, -1, 0]))), (1, 1, 1));
    assert_eq!(oracle::inertia(to_q(&[vec![0, 1], vec![1, 0]])), (1, 1, 0));
    assert_eq!(oracle::inertia(to_q(&[vec![0, 0], vec![0, 0]])), (0, 0, 2));
    assert_eq!(rank(to_q(&[vec![1, 2], vec![2, 4]])), 1);
    // a null line in Minkowski 2-space
    assert_eq!(span_signature(&diag(&[1, -1]), &[vec![1], vec![1]]), (0, 0, 1));
}

#[derive(Default, Debug)]
struct Tally {
    mismatches: Vec<String>,
    degenerate: usize,
    deficient: usize,
}

#[test]
fn ranks_and_signatures_match_exact_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let tol = Tolerance::default();
    let mut t = Tally::default();
    for case in 0..1000 {
        let inst = oracle::random_instance(&mut rng);
        let m = inst.gram.len();
        let g = ScalarProduct::from_gram(to_f64(&inst.gram)).unwrap();
        let u = Subspace::span(&g, &to_f64(&inst.u), &tol);
        let v = Subspace::span(&g, &to_f64(&inst.v), &tol);

        let (pos, neg, null) = span_signature(&inst.gram, &inst.u);
        let ru = pos + neg + null;
        let rv = rank(to_q(&inst.v));
        let ruv = rank(to_q(&hcat(&inst.u, &inst.v)));
        if null > 0 {
            t.degenerate += 1;
        }
        if ru < inst.u.first().map_or(0, |r| r.len()) {
            t.deficient += 1;
        }

        let s = u.signature();
        let checks = [
            ("rank", u.rank(), ru),
            ("numerical_rank", numerical_rank(&to_f64(&inst.u), &tol), ru),
            ("pos", s.pos, pos),
            ("neg", s.neg, neg),
            ("null", s.null, null),
            ("radical", radical(&u).rank(), null),
            ("sum", u.sum(&v).rank(), ruv),
            ("intersect", intersect(&u, &v).rank(), ru + rv - ruv),
            ("complement", u.complement().rank(), m - ru),
        ];
        for (what, got, want) in checks {
            if got != want {
                t.mismatches.push(format!("case {case}: {what} {got} != {want}"));
            }
        }
    }
    println!("degenerate spans: {}, rank-deficient families: {}", t.degenerate, t.deficient);
    assert!(t.degenerate > 50 && t.deficient > 100, "instances not diverse enough: {t:?}");
    assert!(t.mismatches.is_empty(), "{:#?}", t.mismatches);
}

fn lorentz(m: usize) -> ScalarProduct {
    let mut signs = vec![1i8; m];
    signs[0] = -1;
    ScalarProduct::with_signature(&signs).unwrap()
}

fn mat(m: usize, k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, m * k).prop_map(move |v| DMatrix::from_vec(m, k, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_is_idempotent_and_self_adjoint(a in mat(5, 2), x in mat(5, 1), y in mat(5, 1)) {
        let g = lorentz(5);
        let u = Subspace::span(&g, &a, &Tolerance::default());
        prop_assume!(u.signature().is_nondegenerate() && u.signature().flagged == 0);
        let p = projection_matrix(&u).unwrap();
        prop_assert!((&p * &p - &p).amax() < 1e-8 * (1.0 + p.amax().powi(2)));
        let (x, y) = (x.column(0).into_owned(), y.column(0).into_owned());
        let lhs = g.dot(&(&p * &x), &y);
        let rhs = g.dot(&x, &(&p * &y));
        prop_assert!((lhs - rhs).abs() < 1e-8 * (1.0 + p.amax()) * (1.0 + x.amax() * y.amax()));
    }

    #[test]
    fn radical_is_orthogonal_to_the_subspace(a in mat(6, 3)) {
        let g = lorentz(6);
        let tol = Tolerance::default();
        // plant a null vector so the span can degenerate
        let mut a = a;
        a[(0, 0)] = 1.0;
        a[(1, 0)] = 1.0;
        for i in 2..6 { a[(i, 0)] = 0.0; }
        let u = Subspace::span(&g, &a, &tol);
        let r = radical(&u);
        for v in r.vectors() {
            for w in u.vectors() {
                prop_assert!(g.dot(&v, &w).abs() < 1e-8);
            }
            prop_assert!(u.residual(&v) < 1e-8);
        }
        prop_assert_eq!(r.rank(), u.signature().null);
    }

    #[test]
    fn kernel_is_annihilated_and_rank_nullity_holds(a in mat(4, 7)) {
        let tol = Tolerance::default();
        let k = kernel(&a, &tol, None);
        prop_assert_eq!(k.ncols() + numerical_rank(&a, &tol), 7);
        prop_assert!((&a * &k).amax() < 1e-9 * (1.0 + a.amax()));
    }

    #[test]
    fn complement_splits_nondegenerate_ambient(a in mat(5, 2)) {
        let g = lorentz(5);
        let u = Subspace::span(&g, &a, &Tolerance::default());
        let c = u.complement();
        prop_assert_eq!(u.rank() + c.rank(), 5);
        for v in c.vectors() {
            for w in u.vectors() {
                prop_assert!(g.dot(&v, &w).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn signature_is_invariant_under_rescaling(a in mat(4, 3), s in 0.1f64..10.0) {
        let g = lorentz(4);
        let tol = Tolerance::default();
        let u = Subspace::span(&g, &a, &tol);
        let w = Subspace::span(&g, &(&a * s), &tol);
        prop_assume!(u.signature().flagged == 0);
        prop_assert_eq!(u.signature(), w.signature());
    }
}

#[test]
fn light_cone_product_has_one_negative_direction() {
    let g = ScalarProduct::light_cone(3);
    assert_eq!(g.dim(), 5);
    assert_eq!(g.index(), 1);
    let e0 = g.e0().unwrap();
    assert_eq!(g.norm_sq(&e0), 0.0);
    let full = Subspace::full(&g).signature();
    assert_eq!((full.pos, full.neg, full.null), (4, 1, 0));
    let line = Subspace::span_of(&g, &[e0], &Tolerance::default());
    assert_eq!(line.signature().null, 1);
    assert!(projection_matrix(&line).is_err());
    let _ = DVector::<f64>::zeros(1);
}
