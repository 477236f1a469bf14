use std::sync::Arc;

use confpair::chart::{AffineImage, ConeOverSphere, Cylinder, Graph, Grid, MapRef, Plane, Sphere};
use confpair::conformal::{
    common_eigenspace, conformal_s_nullity, conformal_sff, grid_nullity_bound_p2, is_conformally_ruled,
    nullity_from_forms, rigidity_criterion, BoundStatus, NullityOptions,
};
use confpair::error::Error;
use confpair::jets::{DistributionFrame, ImmersionJet};
use confpair::linalg::Tolerance;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn jet(map: MapRef, grid: &Grid) -> ImmersionJet {
    ImmersionJet::closed_form(map, grid).unwrap()
}

#[test]
fn affine_subspace_has_vanishing_beta() {
    let grid = Grid::cube(&[0.0, 0.0, 0.0], 0.5, 2);
    let j = jet(Arc::new(Plane { n: 3, codim: 2 }), &grid);
    let c = conformal_sff(&j, &DistributionFrame::coordinate(&grid, &[0, 2]), &tol()).unwrap();
    assert_eq!(c.ell, 0);
    assert!(c.beta.iter().all(|b| b.max_norm() < 1e-14));
}

#[test]
fn sphere_is_umbilic_along_the_whole_tangent_bundle() {
    let grid = Grid::cube(&[1.0, 0.8, 0.6], 0.1, 2);
    let j = jet(Arc::new(Sphere { n: 3, radius: 2.0 }), &grid);
    let c = conformal_sff(&j, &DistributionFrame::coordinate(&grid, &[0, 1, 2]), &tol()).unwrap();
    assert_eq!(c.ell, 0);
    for (k, e) in c.eta.iter().enumerate() {
        // mean curvature vector of the radius-2 sphere: -x / 4
        let want = -j.position(k) / 4.0;
        assert!((e - want).amax() < 1e-12);
    }
}

#[test]
fn cone_rulings_and_cross_sections_give_no_l() {
    let grid = Grid::cube(&[1.0, 0.9, 1.1], 0.1, 2);
    let j = jet(Arc::new(ConeOverSphere { n: 3, rho: 0.6 }), &grid);
    for axes in [vec![0], vec![1, 2]] {
        let c = conformal_sff(&j, &DistributionFrame::coordinate(&grid, &axes), &tol()).unwrap();
        assert_eq!(c.ell, 0, "axes {axes:?}");
    }
}

#[test]
fn tilted_line_field_on_a_graph_spans_the_normal() {
    let grid = Grid::single(&[0.0, 0.0]);
    let j = jet(Arc::new(Graph { quadratic: vec![1.0, -2.0], cubic: vec![] }), &grid);
    let d = DistributionFrame::from_fn(&grid, |_| DMatrix::from_column_slice(2, 1, &[1.0, 1.0]));
    let c = conformal_sff(&j, &d, &tol()).unwrap();
    assert_eq!(c.ell, 1);
}

#[test]
fn non_integrable_distribution_is_rejected() {
    let grid = Grid::cube(&[0.1, 0.2, 0.3], 0.1, 2);
    let j = jet(Arc::new(Plane { n: 3, codim: 1 }), &grid);
    let d = DistributionFrame::from_fn(&grid, |x| DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, x[0]]));
    assert!(matches!(conformal_sff(&j, &d, &tol()), Err(Error::InvalidInput(_))));
}

#[test]
fn ruledness_verdicts() {
    let grid = Grid::cube(&[0.3, 0.2, -0.1], 0.2, 3);
    let cyl = jet(Arc::new(Cylinder { n: 3, radius: 1.0 }), &grid);
    let v = is_conformally_ruled(&cyl, &DistributionFrame::coordinate(&grid, &[1, 2]), &tol()).unwrap();
    assert!(v.ruled && v.residual <= 1e-10, "{v:?}");

    let sph = jet(Arc::new(Sphere { n: 3, radius: 1.0 }), &Grid::cube(&[1.0, 1.0, 1.0], 0.2, 3));
    let v = is_conformally_ruled(&sph, &DistributionFrame::coordinate(&sph.grid, &[0, 2]), &tol()).unwrap();
    assert!(v.ruled, "{v:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let quadratic: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let cubic: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let g = jet(Arc::new(Graph { quadratic, cubic }), &grid);
    let v = is_conformally_ruled(&g, &DistributionFrame::coordinate(&grid, &[0, 1]), &tol()).unwrap();
    assert!(!v.ruled && v.residual > 1e-3, "{v:?}");
}

#[test]
fn first_nullities_of_model_hypersurfaces() {
    let opts = NullityOptions::default();
    let n = 4;
    let grid = Grid::single(&[0.9, 1.0, 1.1, 0.7]);
    let sphere = jet(Arc::new(Sphere { n, radius: 1.3 }), &grid);
    assert_eq!(conformal_s_nullity(&sphere, 1, 0, &opts, &tol()).unwrap().value, n);
    let cyl = jet(Arc::new(Cylinder { n, radius: 0.8 }), &grid);
    let r = conformal_s_nullity(&cyl, 1, 0, &opts, &tol()).unwrap();
    assert_eq!(r.value, n - 1);
    assert!(r.exact);
    assert!(r.certificate.zeta.amax() < 1e-12);
    let g = jet(
        Arc::new(Graph { quadratic: vec![1.0, 2.0, -0.5, 3.0], cubic: vec![] }),
        &Grid::single(&[0.0; 4]),
    );
    assert_eq!(conformal_s_nullity(&g, 1, 0, &opts, &tol()).unwrap().value, 1);
}

#[test]
fn common_eigenspace_of_commuting_pair() {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 1.0, 2.0]));
    let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.0, 5.0, 0.0]));
    let (dim, cs, ker) = common_eigenspace(&[a, b], 1e-9);
    assert_eq!(dim, 2);
    assert_eq!(ker.ncols(), 2);
    assert!((cs[0] - 1.0).abs() < 1e-12 && cs[1].abs() < 1e-12);
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
}

/// Toy shape operators for a rank-2 normal bundle, often with shared eigenspaces.
fn toy_pair(rng: &mut ChaCha8Rng) -> Vec<DMatrix<f64>> {
    let n = rng.gen_range(2..=4);
    let q = random_orthogonal(n, rng);
    let mut ops = Vec::new();
    for _ in 0..2 {
        let d = nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-2..=2) as f64);
        let mut a = &q * DMatrix::from_diagonal(&d) * q.transpose();
        if rng.gen_bool(0.3) {
            let e = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
            a += &e + e.transpose();
        }
        ops.push(a);
    }
    ops
}

#[test]
fn search_never_exceeds_grid_upper_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = NullityOptions { restarts: 3, max_iterations: 300, ..NullityOptions::default() };
    for _ in 0..60 {
        let ops = toy_pair(&mut rng);
        for s in 1..=2 {
            let found = nullity_from_forms(&ops, s, &opts).unwrap().value;
            let bound = grid_nullity_bound_p2(&ops, s, if s == 1 { 1000 } else { 60 }, opts.eigen_tol);
            assert!(found <= bound, "s = {s}: {found} > {bound} for {ops:?}");
        }
    }
}

#[test]
fn rigidity_hypotheses() {
    let opts = NullityOptions::default();
    let grid = Grid::single(&[0.9, 1.0, 1.1, 0.7, 1.2, 0.8]);
    let sphere = jet(Arc::new(Sphere { n: 6, radius: 1.0 }), &grid);
    let v = rigidity_criterion(&sphere, 1, &opts, &tol()).unwrap();
    assert!(!v[0].holds);
    assert_eq!(v[0].bounds[0].nullity, 6);
    assert_eq!(v[0].bounds[0].bound, 3);
    assert_eq!(v[0].bounds[0].status, BoundStatus::Violated);

    let g = jet(
        Arc::new(Graph { quadratic: vec![1.0, 2.0, -0.5, 3.0, -1.5, 0.25], cubic: vec![] }),
        &Grid::single(&[0.0; 6]),
    );
    let v = rigidity_criterion(&g, 1, &opts, &tol()).unwrap();
    assert!(v[0].holds);
    assert_eq!(v[0].bounds[0].status, BoundStatus::Satisfied);

    assert!(matches!(rigidity_criterion(&g, 3, &opts, &tol()), Err(Error::HypothesisOutOfRange(_))));
}

#[test]
fn large_codimension_engages_extra_bound() {
    let opts = NullityOptions { restarts: 2, ..NullityOptions::default() };
    let x: Vec<f64> = (0..13).map(|i| 0.7 + 0.05 * i as f64).collect();
    let sphere: MapRef = Arc::new(Sphere { n: 13, radius: 1.0 });
    let j = jet(Arc::new(AffineImage::embed(sphere, 1)), &Grid::single(&x));
    let v = rigidity_criterion(&j, 8, &opts, &tol()).unwrap();
    let extra = v[0].extra.as_ref().expect("q >= p + 5");
    assert_eq!(extra.bound, 2);
    assert_eq!(extra.status, BoundStatus::Violated);
}

#[test]
fn search_usually_attains_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let opts = NullityOptions { restarts: 3, max_iterations: 300, ..NullityOptions::default() };
    let mut hits = [0usize; 2];
    let total = 60;
    for _ in 0..total {
        let ops = toy_pair(&mut rng);
        for s in 1..=2 {
            let found = nullity_from_forms(&ops, s, &opts).unwrap().value;
            let bound = grid_nullity_bound_p2(&ops, s, if s == 1 { 1000 } else { 60 }, opts.eigen_tol);
            if found == bound {
                hits[s - 1] += 1;
            }
        }
    }
    eprintln!("hits {hits:?} of {total}");
    assert!(hits[0] * 10 >= total * 8 && hits[1] * 10 >= total * 8, "{hits:?}");
}
