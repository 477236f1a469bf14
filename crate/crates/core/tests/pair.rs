use std::sync::Arc;

use confpair::chart::{AffineImage, CircleProduct, Cylinder, Grid, Inversion, MapRef, Plane};
use confpair::error::Error;
use confpair::jets::ImmersionJet;
use confpair::lightcone::{isometric_representative, BaseMetric};
use confpair::linalg::{projection_matrix, Tolerance};
use confpair::pair::{
    analyze_pair, build_joint, check_dimension_bound, omega, BoundInput, BoundKind, PairOptions, Side,
};
use nalgebra::{DMatrix, DVector};

fn jet(map: MapRef, grid: &Grid) -> ImmersionJet {
    ImmersionJet::closed_form(map, grid).unwrap()
}

fn congruent_torus(grid: &Grid) -> (ImmersionJet, ImmersionJet) {
    let base: MapRef = Arc::new(CircleProduct { radii: vec![1.0, 1.5] });
    let moved: MapRef = Arc::new(
        AffineImage::rigid(
            base.clone(),
            &[(0, 2, 0.7), (1, 3, -0.4), (0, 1, 1.1)],
            DVector::from_vec(vec![0.5, -1.0, 2.0, 0.3]),
        )
        .unwrap(),
    );
    (jet(base, grid), jet(moved, grid))
}

#[test]
fn joint_metric_blocks() {
    let grid = Grid::cube(&[0.2, 0.4], 0.1, 2);
    let (f, g) = congruent_torus(&grid);
    let tol = Tolerance::default();
    let js = build_joint(Side::new(f).at_grid(0, &tol).unwrap(), Side::new(g).at_grid(0, &tol).unwrap(), 1e-7).unwrap();
    let u = js.embed_left(&DVector::from_vec(vec![1.0, 0.5, 0.0, 2.0]));
    let v = js.embed_right(&DVector::from_vec(vec![0.0, 3.0, -1.0, 1.0]));
    assert_eq!(js.metric.dot(&u, &v), 0.0);
    assert_eq!(js.metric.norm_sq(&v), -11.0);
    // graph of an isometry is null
    let om = omega(&js, &tol);
    assert_eq!(om.rank(), 2);
    assert!(om.gram().amax() < 1e-10);
}

#[test]
fn congruent_pair_has_full_rulings() {
    let grid = Grid::cube(&[0.2, 0.4], 0.1, 3);
    let (f, g) = congruent_torus(&grid);
    let a = analyze_pair(&f, &g, &PairOptions::default()).unwrap();
    assert!(!a.degenerate());
    assert_eq!(a.regions.len(), 1);
    let r = &a.regions[0];
    assert_eq!(r.profile.omega, 2);
    assert_eq!(r.profile.gamma_perp, 2);
    assert_eq!(r.profile.theta, 2);
    assert_eq!(r.profile.l, 2, "T lives on the whole normal bundle");
    assert_eq!(r.profile.d, 2);
    let res = &r.residuals;
    assert!(res.star < 1e-10, "{res:?}");
    assert!(res.c1() < 1e-8, "{res:?}");
    assert!(res.c2.unwrap() < 1e-8, "{res:?}");
    assert!(res.skew < 1e-8 && res.theta_identity < 1e-8, "{res:?}");
}

#[test]
fn corrupted_isometry_breaks_c1() {
    let grid = Grid::cube(&[0.2, 0.4], 0.1, 2);
    let (f, g) = congruent_torus(&grid);
    let opts = PairOptions {
        second_level: false,
        ..PairOptions::default()
    };
    let a = analyze_pair(&f, &g, &opts).unwrap();
    let pt = &a.points[0];
    let (c, s) = (0.8f64.cos(), 0.8f64.sin());
    let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let t_bad = pt.l_hat.basis() * (pt.t_matrix() * rot) * pt.l.basis().transpose();
    let pl = projection_matrix(&pt.l).unwrap();
    let plh = projection_matrix(&pt.l_hat).unwrap();
    let js = &pt.fiber.joint;
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let d = &plh * js.right.alpha.get(i, j) - &t_bad * (&pl * js.left.alpha.get(i, j));
            worst = worst.max(d.amax());
        }
    }
    assert!(pt.residuals.c1_sff < 1e-10);
    assert!(worst > 1e-1, "{worst}");
}

#[test]
fn flat_pair_rules_along_the_line() {
    let grid = Grid::cube(&[0.3, -0.2], 0.1, 3);
    let f = jet(Arc::new(Plane { n: 2, codim: 1 }), &grid);
    let g = jet(Arc::new(Cylinder { n: 2, radius: 0.8 }), &grid);
    let a = analyze_pair(&f, &g, &PairOptions::default()).unwrap();
    assert!(!a.degenerate());
    assert_eq!(a.regions.len(), 1);
    let r = &a.regions[0];
    assert_eq!((r.profile.omega, r.profile.l, r.profile.d), (0, 0, 1));
    for p in &a.points {
        let z = p.d.basis().column(0);
        assert!(z[0].abs() < 1e-8 && (z[1].abs() - 1.0).abs() < 1e-8, "{z}");
    }
}

#[test]
fn metric_mismatch_is_rejected() {
    let grid = Grid::cube(&[0.3, -0.2], 0.1, 2);
    let f = jet(Arc::new(Plane { n: 2, codim: 1 }), &grid);
    let g = jet(Arc::new(Cylinder { n: 2, radius: 0.8 }), &grid);
    let g2 = jet(Arc::new(AffineImage::scaled(Arc::new(Cylinder { n: 2, radius: 0.8 }), 1.1)), &grid);
    assert!(analyze_pair(&f, &g, &PairOptions::default()).is_ok());
    assert!(matches!(
        analyze_pair(&f, &g2, &PairOptions::default()),
        Err(Error::NotIsometricPair { .. })
    ));
}

/// `f` and the light-cone lift of an inverted copy of `f`: conformally congruent,
/// hence a degenerate isometric pair.
fn mobius_pair(grid: &Grid) -> (ImmersionJet, ImmersionJet) {
    let base: MapRef = Arc::new(Cylinder { n: 3, radius: 1.0 });
    let c = DVector::from_vec(vec![2.5, 0.3, 0.4, -0.6]);
    let inv: MapRef = Arc::new(Inversion {
        inner: base.clone(),
        center: c,
        radius: 1.3,
    });
    let f = jet(base.clone(), grid);
    let tol = Tolerance::default();
    let g = isometric_representative(&jet(inv, grid), BaseMetric::Induced(base), &tol).unwrap();
    (f, g)
}

#[test]
fn mobius_pair_takes_the_degenerate_branch() {
    let grid = Grid::cube(&[0.1, 0.2, 0.3], 0.05, 2);
    let (f, g) = mobius_pair(&grid);
    let a = analyze_pair(&f, &g, &PairOptions::default()).unwrap();
    assert!(a.degenerate());
    assert_eq!((a.p, a.q), (1, 1));
    for p in &a.points {
        let xi0 = p.xi0.as_ref().expect("witness");
        let fhat = &p.fiber.joint.right.position;
        assert!((p.fiber.joint.right.ambient.dot(fhat, xi0) - 1.0).abs() < 1e-10);
        let c = p.claims.as_ref().unwrap();
        assert!(c.all_pass(), "{c:?}");
        assert!(c.j_position < 1e-8 && c.j_e0.unwrap() < 1e-8, "{c:?}");
        assert!(c.th0 < 1e-8, "{c:?}");
    }
    let r = &a.regions[0];
    assert_eq!((r.profile.s, r.profile.l, r.profile.d), (3, 3, 3));
    assert!(r.residuals.c1() < 1e-6 && r.residuals.c2.unwrap() < 1e-5, "{:?}", r.residuals);
}

#[test]
fn bound_examples() {
    let input = |n, p, q, d, r, ell| BoundInput { n, p, q, a: 0, b: 0, d, r, ell };
    let v = check_dimension_bound(BoundKind::Isometric, &input(8, 2, 2, 7, 0, 1)).unwrap();
    assert_eq!((v.rhs, v.slack, v.holds), (7, 0, true));
    let v = check_dimension_bound(BoundKind::Isometric, &input(8, 2, 2, 6, 0, 1)).unwrap();
    assert!(!v.holds);
    let v = check_dimension_bound(BoundKind::Isometric, &input(7, 2, 2, 3, 0, 0)).unwrap();
    assert_eq!(v.rhs, 3);
    let v = check_dimension_bound(BoundKind::DegenerateLift, &input(9, 1, 1, 7, 2, 2)).unwrap();
    assert_eq!((v.rhs, v.lhs, v.holds), (9, 9, true));
    let v = check_dimension_bound(BoundKind::DegenerateLift, &input(9, 1, 1, 8, 1, 2)).unwrap();
    assert_eq!(v.r_in_range, Some(false));
    assert!(matches!(
        check_dimension_bound(BoundKind::Isometric, &input(5, 3, 3, 5, 0, 0)),
        Err(Error::HypothesisOutOfRange(_))
    ));
    assert!(matches!(
        check_dimension_bound(BoundKind::Conformal, &input(6, 2, 2, 6, 0, 0)),
        Err(Error::HypothesisOutOfRange(_))
    ));
    // the exceptional case min{p+b-a, q+a-b} = 6, ell = 0
    let v = check_dimension_bound(BoundKind::Isometric, &input(14, 6, 7, 0, 0, 0)).unwrap();
    assert_eq!(v.rhs, 0);
}
