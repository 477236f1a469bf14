use std::sync::Arc;

use confpair::chart::{Cylinder, Grid, Inversion, MapRef, Plane, PsiLift, Sphere, Torus};
use confpair::error::Error;
use confpair::jets::ImmersionJet;
use confpair::lightcone::{
    cone_projection, isometric_representative, position_identities, psi, sff_transfer_check,
    BaseMetric, HessianSource, LightConeModel,
};
use confpair::linalg::{ScalarProduct, Tolerance};
use nalgebra::{DMatrix, DVector};

fn tol() -> Tolerance {
    Tolerance::default()
}

#[test]
fn psi_encodes_distances() {
    let l = ScalarProduct::light_cone(3);
    let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
    let y = DVector::from_vec(vec![1.5, 0.2, -0.4]);
    assert!(l.norm_sq(&psi(&x)).abs() < 1e-14);
    let d = l.dot(&psi(&x), &psi(&y)) + 0.5 * (&x - &y).norm_squared();
    assert!(d.abs() < 1e-13);
    let m = LightConeModel::new(3);
    assert_eq!(l.dot(&psi(&x), &m.e0()), 1.0);
}

#[test]
fn projection_inverts_the_lift() {
    let map: MapRef = Arc::new(Torus { big: 2.0, small: 0.5 });
    let grid = Grid::cube(&[0.3, 1.1], 0.2, 3);
    let f = ImmersionJet::closed_form(map, &grid).unwrap();
    let g = isometric_representative(&f, BaseMetric::Induced(f.map().clone()), &tol()).unwrap();
    let back = cone_projection(&g, &tol()).unwrap();
    for k in 0..grid.len() {
        assert!((back.position(k) - f.position(k)).amax() < 1e-12);
        assert!((back.d1(k) - f.d1(k)).amax() < 1e-11);
    }
}

#[test]
fn lifts_satisfy_position_identities() {
    let maps: Vec<MapRef> = vec![
        Arc::new(Sphere { n: 3, radius: 1.5 }),
        Arc::new(Torus { big: 3.0, small: 1.0 }),
        Arc::new(Cylinder { n: 3, radius: 0.7 }),
    ];
    for map in maps {
        let n = map.domain_dim();
        let grid = Grid::cube(&vec![0.8; n], 0.1, 2);
        let f = ImmersionJet::closed_form(map.clone(), &grid).unwrap();
        let g = isometric_representative(&f, BaseMetric::Induced(map), &tol()).unwrap();
        let r = position_identities(&g, None, &tol()).unwrap();
        assert!(r.position < 1e-8, "{r:?}");
        assert!(r.null_vector < 1e-8, "{r:?}");
    }
}

#[test]
fn inverted_lift_kills_the_image_of_the_centre() {
    let base: MapRef = Arc::new(Cylinder { n: 2, radius: 1.0 });
    let c = DVector::from_vec(vec![2.5, 0.0, 0.4]);
    let inv: MapRef = Arc::new(Inversion { inner: base.clone(), center: c.clone(), radius: 1.3 });
    let grid = Grid::cube(&[0.1, 0.2], 0.2, 3);
    let f = ImmersionJet::closed_form(inv, &grid).unwrap();
    let g = isometric_representative(&f, BaseMetric::Induced(base), &tol()).unwrap();
    let xi0 = psi(&c);
    let r = position_identities(&g, Some(&xi0), &tol()).unwrap();
    assert!(r.position < 1e-8 && r.null_vector < 1e-8, "{r:?}");
    // e0 is no longer normal to the shape operator's kernel
    let r0 = position_identities(&g, None, &tol()).unwrap();
    assert!(r0.null_vector > 1e-3);
}

#[test]
fn exceptional_ray_is_reported() {
    // a cone-valued map with <g, e0> = 0 at the origin
    #[derive(Debug)]
    struct Degenerate;
    impl confpair::chart::ChartMap for Degenerate {
        fn name(&self) -> String {
            "degenerate".into()
        }
        fn domain_dim(&self) -> usize {
            1
        }
        fn ambient(&self) -> ScalarProduct {
            ScalarProduct::light_cone(1)
        }
        fn apply(&self, a: &[confpair::taylor::Jet]) -> confpair::Result<Vec<confpair::taylor::Jet>> {
            // t -> (-t^2/2, t^2... ) scaled lift t * Psi(t) has <g, e0> = t
            let t = &a[0];
            Ok(vec![(t * t * t).scale(-0.5), t.clone(), t * t])
        }
    }
    let grid = Grid::single(&[0.0]);
    let g = ImmersionJet::closed_form(Arc::new(Degenerate), &grid).unwrap();
    assert!(matches!(cone_projection(&g, &tol()), Err(Error::OnExceptionalRay { .. })));
}

#[test]
fn non_lorentz_input_is_rejected() {
    let map: MapRef = Arc::new(Plane { n: 2, codim: 1 });
    let grid = Grid::single(&[0.0, 0.0]);
    let f = ImmersionJet::closed_form(map, &grid).unwrap();
    assert!(position_identities(&f, None, &tol()).is_err());
}

fn rulings(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n - 1, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
}

fn inverted_cylinder() -> MapRef {
    let base: MapRef = Arc::new(Cylinder { n: 3, radius: 1.0 });
    Arc::new(Inversion {
        inner: base,
        center: DVector::from_vec(vec![2.0, 0.5, -0.3, 0.8]),
        radius: 1.0,
    })
}

#[test]
fn transfer_formulas_hold_for_an_inverted_cylinder() {
    let pts = Grid::cube(&[0.2, 0.1, -0.1], 0.15, 2).points();
    let d = sff_transfer_check(inverted_cylinder(), BaseMetric::Euclidean, &pts, &rulings, HessianSource::ClosedForm, &tol()).unwrap();
    assert!(d.max_sff_residual() < 1e-7, "{}", d.max_sff_residual());
    assert!(d.max_beta_residual() < 1e-7, "{}", d.max_beta_residual());
    assert!(d.max_lambda_spread() < 1e-7);
    assert!(d.max_eta_residual() < 1e-7);
    assert!(d.points.iter().all(|p| (p.phi - 1.0).abs() > 1e-3));

    let d = sff_transfer_check(
        inverted_cylinder(),
        BaseMetric::Euclidean,
        &pts,
        &rulings,
        HessianSource::FiniteDifference { step: 1e-3 },
        &tol(),
    )
    .unwrap();
    assert!(d.max_sff_residual() < 1e-5, "{}", d.max_sff_residual());
}

#[test]
fn non_umbilic_distribution_is_rejected() {
    let pts = vec![vec![0.2, 0.1, -0.1]];
    let full = |x: &[f64]| DMatrix::identity(x.len(), 2);
    let r = sff_transfer_check(inverted_cylinder(), BaseMetric::Euclidean, &pts, &full, HessianSource::ClosedForm, &tol());
    assert!(matches!(r, Err(Error::NotConformallyRuled { .. })));
}

#[test]
fn psi_lift_map_agrees_with_own_representative() {
    let map: MapRef = Arc::new(Sphere { n: 2, radius: 1.0 });
    let grid = Grid::cube(&[1.0, 0.5], 0.1, 2);
    let a = ImmersionJet::closed_form(Arc::new(PsiLift { inner: map.clone() }), &grid).unwrap();
    let f = ImmersionJet::closed_form(map.clone(), &grid).unwrap();
    let b = isometric_representative(&f, BaseMetric::Induced(map), &tol()).unwrap();
    for k in 0..grid.len() {
        assert!((a.d2(k, 0, 1) - b.d2(k, 0, 1)).amax() < 1e-12);
    }
}

mod invariants {
    use confpair::lightcone::{psi, psi_push, LightConeModel};
    use confpair::linalg::ScalarProduct;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn vec3() -> impl Strategy<Value = DVector<f64>> {
        prop::collection::vec(-5.0f64..5.0, 3).prop_map(DVector::from_vec)
    }

    proptest! {
        #[test]
        fn psi_is_a_null_isometric_embedding(x in vec3(), y in vec3(), v in vec3(), w in vec3()) {
            let l = ScalarProduct::light_cone(3);
            let e0 = LightConeModel::new(3).e0();
            let scale = 1.0 + x.norm_squared() + y.norm_squared();
            prop_assert!(l.norm_sq(&psi(&x)).abs() < 1e-13 * scale);
            prop_assert!((l.dot(&psi(&x), &e0) - 1.0).abs() < 1e-14);
            let dist = l.dot(&psi(&x), &psi(&y)) + 0.5 * (&x - &y).norm_squared();
            prop_assert!(dist.abs() < 1e-13 * scale);
            let metric = l.dot(&psi_push(&x, &v), &psi_push(&x, &w)) - v.dot(&w);
            prop_assert!(metric.abs() < 1e-13 * (1.0 + v.norm() * w.norm()));
        }
    }
}
