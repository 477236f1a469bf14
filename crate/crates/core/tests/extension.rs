use std::sync::Arc;

use confpair::chart::{AffineImage, Cylinder, Grid, MapRef, Plane, Sphere};
use confpair::extension::{phi_obstruction, ruled_extension, verify_extension, ExtensionOptions};
use confpair::jets::ImmersionJet;
use confpair::pair::{analyze_pair, PairAnalysis, PairOptions};
use nalgebra::DVector;

fn jet(map: MapRef, grid: &Grid) -> ImmersionJet {
    ImmersionJet::closed_form(map, grid).unwrap()
}

fn sphere_pair() -> PairAnalysis {
    let grid = Grid::cube(&[1.0, 0.7], 0.1, 2);
    let s: MapRef = Arc::new(AffineImage::embed(Arc::new(Sphere { n: 2, radius: 1.2 }), 1));
    let moved: MapRef = Arc::new(
        AffineImage::rigid(s.clone(), &[(0, 3, 0.6), (1, 2, -0.3)], DVector::from_vec(vec![0.1, 0.2, -0.4, 1.0])).unwrap(),
    );
    analyze_pair(&jet(s, &grid), &jet(moved, &grid), &PairOptions::default()).unwrap()
}

#[test]
fn congruent_sphere_extends_along_its_normal() {
    let a = sphere_pair();
    assert_eq!((a.regions.len(), a.regions[0].profile.l, a.regions[0].profile.d), (1, 1, 2));
    let phi = phi_obstruction(&a, 0).unwrap();
    assert_eq!((phi.delta.ncols(), phi.r()), (3, 1));
    assert!(phi.inter_residual < 1e-8, "{}", phi.inter_residual);
    let ext = ruled_extension(&a, &ExtensionOptions::default()).unwrap();
    assert_eq!(ext.grid.len(), 4 * 3);
    let rep = verify_extension(&ext).unwrap();
    println!("{rep:?}");
    assert!(rep.zero_section_exact);
    assert!(rep.straightness < 1e-12);
    assert!(rep.metric < 1e-6 && rep.inc < 1e-6 && rep.inter < 1e-6, "{rep:?}");
    assert!(rep.inc_rank_ok && rep.split < 1e-8 && rep.transfer < 1e-6, "{rep:?}");
}

#[test]
fn corrupted_inputs_are_caught() {
    let a = sphere_pair();
    let ext = ruled_extension(&a, &ExtensionOptions::default()).unwrap();
    let bad = ext.with_right_frames(|m| m * 1.1).unwrap();
    let rep = verify_extension(&bad).unwrap();
    assert!(rep.metric > 1e-3, "{rep:?}");
}

#[test]
fn flat_pair_extension_is_trivial() {
    let grid = Grid::cube(&[0.3, -0.2], 0.1, 2);
    let f = jet(Arc::new(Plane { n: 2, codim: 1 }), &grid);
    let g = jet(Arc::new(Cylinder { n: 2, radius: 0.8 }), &grid);
    let a = analyze_pair(&f, &g, &PairOptions::default()).unwrap();
    let ext = ruled_extension(&a, &ExtensionOptions::default()).unwrap();
    assert!(ext.is_trivial());
    let rep = verify_extension(&ext).unwrap();
    assert!(rep.zero_section_exact && rep.inc < 1e-8 && rep.inter < 1e-8 && rep.inc_rank_ok, "{rep:?}");
    // the circle direction is not in Delta
    let delta = ext.delta_chart(0);
    let mut wrong = delta.clone().insert_column(delta.ncols(), 0.0);
    wrong[(0, delta.ncols())] = 1.0;
    let good = ext.inc_residual_on(0, &delta).unwrap();
    let corrupt = ext.inc_residual_on(0, &wrong).unwrap();
    assert!(good < 1e-9 && corrupt > 1e-3, "{good} {corrupt}");
}

mod slices {
    use super::*;
    use confpair::chart::{psi_jets, ChartMap, PsiLine, ShearedCylinder};
    use confpair::linalg::ScalarProduct;
    use confpair::taylor::Jet;
    use confpair::error::Error;
    use confpair::extension::{generate_conformal_pair, locate_root, transversality_check, RootPick, SliceMap, SliceOptions};
    use confpair::jets::conformal_factor;
    use confpair::lightcone::cone_projection;
    use confpair::linalg::Tolerance;
    use confpair::pair::{check_dimension_bound, BoundInput, BoundKind};

    const N: usize = 4;
    const K: f64 = 0.5;

    fn pair_maps() -> (MapRef, MapRef) {
        let mut w = DVector::zeros(N + 3);
        w[0] = 1.0;
        w[N + 2] = 1.0;
        let fp: MapRef = Arc::new(ShearedCylinder { n: N, radius: 1.0, shear: K });
        let fh: MapRef = Arc::new(PsiLine::new(N, 1, w, K).unwrap());
        (fp, fh)
    }

    fn slice_grid() -> Grid {
        Grid::cube(&[0.2, 0.1, -0.3, 0.4], 0.05, 2)
    }

    #[test]
    fn both_cone_branches_are_found() {
        let (fp, fh) = pair_maps();
        let grid = slice_grid();
        let tol = Tolerance::default();
        for (pick, offset) in [(RootPick::Highest, 0.0), (RootPick::Lowest, -2.0)] {
            let opts = SliceOptions { pick, ..SliceOptions::default() };
            let s = generate_conformal_pair(&fp, &fh, &grid, &opts, &tol).unwrap();
            for (x, t) in grid.points().iter().zip(&s.roots) {
                assert!((t - (offset - K * x[0])).abs() < 1e-12, "{t}");
            }
            let worst = s.factor.max_residual();
            assert!(worst < 1e-8, "{worst}");
        }
    }

    /// `(u, x) -> e^u Psi(x)`: every point lies on the cone.
    #[derive(Debug)]
    struct ScaledPsi;

    impl ChartMap for ScaledPsi {
        fn name(&self) -> String {
            "scaled-psi".into()
        }
        fn domain_dim(&self) -> usize {
            N + 1
        }
        fn ambient(&self) -> ScalarProduct {
            ScalarProduct::light_cone(N + 1)
        }
        fn apply(&self, args: &[Jet]) -> confpair::Result<Vec<Jet>> {
            let s = args[0].exp();
            let mut out: Vec<Jet> = psi_jets(&args[1..]).iter().map(|c| c * &s).collect();
            out.push(args[0].constant_like(0.0));
            Ok(out)
        }
    }

    #[test]
    fn cone_contained_map_is_rejected() {
        let (fp, _) = pair_maps();
        let fh: MapRef = Arc::new(ScaledPsi);
        let err = generate_conformal_pair(&fp, &fh, &slice_grid(), &SliceOptions::default(), &Tolerance::default());
        assert!(matches!(err, Err(Error::NotTransversal { .. })), "{err:?}");
    }

    #[test]
    fn tangency_is_flagged() {
        // <F_hat, F_hat> = t^2 + 2t has a critical point at t = -1
        let (_, fh) = pair_maps();
        let pts = vec![vec![-1.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 0.0, 0.0]];
        let t = transversality_check(fh.as_ref(), &pts, 1e-8).unwrap();
        assert!(!t[0].transversal && t[1].transversal, "{t:?}");
    }

    #[test]
    fn missing_intersection_is_reported() {
        let (fp, fh) = pair_maps();
        let opts = SliceOptions { t_range: (0.5, 3.0), ..SliceOptions::default() };
        let err = generate_conformal_pair(&fp, &fh, &slice_grid(), &opts, &Tolerance::default());
        assert!(matches!(err, Err(Error::NoIntersection)), "{err:?}");
    }

    #[test]
    fn generated_pair_is_degenerate_and_extends() {
        let (fp, fh) = pair_maps();
        let grid = slice_grid();
        let tol = Tolerance::default();
        let opts = SliceOptions { pick: RootPick::Lowest, ..SliceOptions::default() };
        let s = generate_conformal_pair(&fp, &fh, &grid, &opts, &tol).unwrap();
        let (f, g) = s.isometric_pair(&tol).unwrap();
        let a = analyze_pair(&f, &g, &PairOptions::default()).unwrap();
        assert!(a.degenerate());
        assert_eq!(a.regions.len(), 1);
        let prof = &a.regions[0].profile;
        assert_eq!((a.p, a.q), (2, 1));
        assert_eq!((prof.theta, prof.s, prof.l, prof.d), (N - 1, 2, 2, N - 1), "{prof:?}");
        let res = &a.regions[0].residuals;
        assert!(res.c1() < 1e-8 && res.c2.unwrap() < 1e-8, "{res:?}");
        let ext = ruled_extension(&a, &ExtensionOptions::default()).unwrap();
        let rep = verify_extension(&ext).unwrap();
        assert_eq!((ext.d, ext.r, ext.ell), (N - 1, 2, 2));
        assert!(rep.cone.unwrap() < 1e-10, "{rep:?}");
        let v = check_dimension_bound(
            BoundKind::DegenerateLift,
            &BoundInput { n: N, p: a.p, q: a.q, a: 0, b: 0, d: ext.d, r: ext.r, ell: ext.ell },
        )
        .unwrap();
        assert!(v.holds, "{v:?}");
        assert!(rep.metric < 1e-5 && rep.inc < 1e-5, "{rep:?}");
    }

    /// `Psi(x) + t e2` has `<F_hat, F_hat> = t^2 + 2 t x1`, roots `t = 0` and `t = -2 x1`.
    #[test]
    fn psi_plus_line_level_set() {
        let mut w = DVector::zeros(N + 2);
        w[2] = 1.0;
        let fh: MapRef = Arc::new(PsiLine::new(N, 0, w, 0.0).unwrap());
        let grid = slice_grid();
        for x in grid.points() {
            let lo = locate_root(fh.as_ref(), &x, &SliceOptions::default()).unwrap();
            let hi = locate_root(fh.as_ref(), &x, &SliceOptions { pick: RootPick::Highest, ..SliceOptions::default() }).unwrap();
            assert!((lo + 2.0 * x[0]).abs() < 1e-12 && hi.abs() < 1e-12, "{lo} {hi}");
        }
        // the t = 0 branch is Psi itself, whose cone projection is the identity chart
        let map: MapRef = Arc::new(SliceMap {
            source: fh.clone(),
            level: fh.clone(),
            options: SliceOptions { pick: RootPick::Highest, ..SliceOptions::default() },
            anchors: Vec::new(),
        });
        let fbar = cone_projection(&ImmersionJet::closed_form(map, &grid).unwrap(), &Tolerance::default()).unwrap();
        let flat = jet(Arc::new(Plane { n: N, codim: 0 }), &grid);
        let cf = conformal_factor(&flat, &fbar, &Tolerance::default()).unwrap();
        assert!(cf.phi.iter().all(|p| (p - 1.0).abs() < 1e-12) && cf.max_residual() < 1e-12, "{cf:?}");
    }
}

