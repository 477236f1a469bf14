use std::sync::Arc;

use confpair::chart::{Cylinder, Grid, Inversion, MapRef, Sphere, Torus};
use confpair::jets::{
    conformal_factor, fundamental_data, induced_metric, DistributionFrame, ImmersionJet,
};
use confpair::linalg::Tolerance;
use nalgebra::{DMatrix, DVector};

fn tol() -> Tolerance {
    Tolerance::default()
}

#[test]
fn sphere_metric_is_round() {
    let map: MapRef = Arc::new(Sphere { n: 2, radius: 2.0 });
    let grid = Grid::cube(&[1.0, 0.5], 0.2, 3);
    let j = ImmersionJet::closed_form(map, &grid).unwrap();
    let g = induced_metric(&j, &tol()).unwrap();
    for (k, m) in g.iter().enumerate() {
        let t = grid.point(k)[0];
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 4.0 * t.sin().powi(2)]));
        assert!((m - want).amax() < 1e-12);
    }
}

#[test]
fn unit_sphere_second_form_is_minus_metric_times_position() {
    let map: MapRef = Arc::new(Sphere { n: 3, radius: 1.0 });
    let grid = Grid::cube(&[1.0, 1.2, 0.3], 0.1, 2);
    let j = ImmersionJet::closed_form(map, &grid).unwrap();
    let fd = fundamental_data(&j, &tol()).unwrap();
    for pg in fd.points() {
        for a in 0..3 {
            for b in 0..3 {
                let want = &pg.position * (-pg.metric[(a, b)]);
                assert!((pg.alpha.get(a, b) - want).amax() < 1e-10);
            }
        }
    }
}

#[test]
fn finite_differences_match_closed_form() {
    let map: MapRef = Arc::new(Torus { big: 3.0, small: 1.0 });
    let grid = Grid::cube(&[0.4, 0.9], 0.3, 3);
    let a = ImmersionJet::closed_form(map.clone(), &grid).unwrap();
    let b = ImmersionJet::finite_difference(map, &grid, 1e-3).unwrap();
    for k in 0..grid.len() {
        assert!((a.d1(k) - b.d1(k)).amax() < 1e-8);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.d2(k, i, j) - b.d2(k, i, j)).amax() < 1e-6);
                for l in 0..2 {
                    assert!((a.d3(k, i, j, l) - b.d3(k, i, j, l)).amax() < 1e-4);
                }
            }
        }
    }
}

#[test]
fn inversion_has_inverse_square_factor() {
    let base: MapRef = Arc::new(Cylinder { n: 2, radius: 1.0 });
    let c = DVector::from_vec(vec![3.0, 0.5, -1.0]);
    let inv: MapRef = Arc::new(Inversion { inner: base.clone(), center: c.clone(), radius: 1.0 });
    let grid = Grid::cube(&[0.2, 0.1], 0.3, 3);
    let jf = ImmersionJet::closed_form(base.clone(), &grid).unwrap();
    let jg = ImmersionJet::closed_form(inv, &grid).unwrap();
    let cf = conformal_factor(&jf, &jg, &tol()).unwrap();
    assert!(cf.max_residual() < 1e-10);
    for k in 0..grid.len() {
        let y = base.eval(&grid.point(k)).unwrap();
        let want = 1.0 / (y - &c).norm_squared();
        assert!((cf.phi[k] - want).abs() < 1e-10 * want.max(1.0));
    }
}

#[test]
fn contact_distribution_is_not_involutive() {
    let grid = Grid::cube(&[0.1, 0.2, 0.3], 0.2, 3);
    // span{d/dx, d/dy + x d/dz}
    let d = DistributionFrame::from_fn(&grid, |x| {
        DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, x[0]])
    });
    let r = d.bracket_residual();
    assert!(r.iter().all(|&v| v > 0.5));
    let flat = DistributionFrame::coordinate(&grid, &[0, 1]);
    assert!(flat.bracket_residual().iter().all(|&v| v < 1e-8));
}

#[test]
fn torus_meridians_have_expected_mean_curvature() {
    // meridian circles (second coordinate) have curvature 1/r towards the tube core
    let map: MapRef = Arc::new(Torus { big: 3.0, small: 1.0 });
    let grid = Grid::cube(&[0.4, 0.9], 0.2, 2);
    let j = ImmersionJet::closed_form(map, &grid).unwrap();
    let fd = fundamental_data(&j, &tol()).unwrap();
    let d = DistributionFrame::coordinate(&grid, &[1]);
    let eta = confpair::jets::leaf_mean_curvature(&fd, &d);
    for e in &eta {
        assert!((e.norm() - 1.0).abs() < 1e-8);
    }
}
