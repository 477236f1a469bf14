//! Builtin immersions with parameter ranges and example instances, and the
//! named manifests runnable with `gallery run`.

use serde::Serialize;
use serde_json::json;

use super::manifest::{Analysis, Branch, GenerateSpec, GridSpec, Manifest, Outputs, PairSpec, Pick, SliceSpec, Target};
use super::spec::ImmersionSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub wrapper: bool,
    pub description: &'static str,
    /// Parameters with their admissible ranges.
    pub params: &'static [(&'static str, &'static str)],
    /// A valid instance and a chart grid where it is an immersion.
    pub example: ImmersionSpec,
    pub example_grid: GridSpec,
}

fn cube(center: &[f64], half: f64, count: usize) -> GridSpec {
    GridSpec::Cube {
        center: center.to_vec(),
        half,
        count,
    }
}

fn b(name: &str, params: serde_json::Value) -> ImmersionSpec {
    ImmersionSpec::builtin(name, params)
}

fn inverted_cylinder() -> ImmersionSpec {
    ImmersionSpec::wrap(
        "inversion",
        json!({ "center": [2.5, 0.3, 0.4, -0.6], "radius": 1.3 }),
        b("cylinder", json!({ "n": 3, "radius": 1.0 })),
    )
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "plane",
            wrapper: false,
            description: "x -> (x, 0) in R^{n+codim}",
            params: &[("n", "integer >= 1"), ("codim", "integer >= 0, default 1")],
            example: b("plane", json!({ "n": 2, "codim": 1 })),
            example_grid: cube(&[0.3, -0.2], 0.1, 3),
        },
        CatalogEntry {
            name: "sphere",
            wrapper: false,
            description: "round n-sphere of radius r in R^{n+1}, hyperspherical angles",
            params: &[("n", "integer >= 1"), ("radius", "r > 0")],
            example: b("sphere", json!({ "n": 2, "radius": 1.2 })),
            example_grid: cube(&[1.0, 0.7], 0.1, 3),
        },
        CatalogEntry {
            name: "cylinder",
            wrapper: false,
            description: "S^1(r) x R^{n-1} in R^{n+1}",
            params: &[("n", "integer >= 1"), ("radius", "r > 0")],
            example: b("cylinder", json!({ "n": 3, "radius": 1.0 })),
            example_grid: cube(&[0.1, 0.2, 0.3], 0.1, 2),
        },
        CatalogEntry {
            name: "cone-over-sphere",
            wrapper: false,
            description: "cone t * (rho sigma(y), sqrt(1 - rho^2)) over a small sphere, t > 0",
            params: &[("n", "integer >= 2"), ("rho", "0 < rho < 1")],
            example: b("cone-over-sphere", json!({ "n": 2, "rho": 0.6 })),
            example_grid: cube(&[1.0, 0.4], 0.1, 3),
        },
        CatalogEntry {
            name: "torus",
            wrapper: false,
            description: "torus of revolution in R^3",
            params: &[("big", "R > small"), ("small", "r > 0")],
            example: b("torus", json!({ "big": 2.0, "small": 0.7 })),
            example_grid: cube(&[0.3, 0.5], 0.1, 3),
        },
        CatalogEntry {
            name: "graph",
            wrapper: false,
            description: "graph of sum c_i x_i^2 / 2 + d_i x_i^3 / 6 in R^{n+1}",
            params: &[("quadratic", "c_i, one per variable"), ("cubic", "d_i, default 0")],
            example: b("graph", json!({ "quadratic": [1.0, -0.5], "cubic": [0.3, 0.2] })),
            example_grid: cube(&[0.1, 0.2], 0.1, 3),
        },
        CatalogEntry {
            name: "circle-product",
            wrapper: false,
            description: "product of planar circles in R^{2n} (flat)",
            params: &[("radii", "r_i > 0")],
            example: b("circle-product", json!({ "radii": [1.0, 1.5] })),
            example_grid: cube(&[0.2, 0.4], 0.1, 3),
        },
        CatalogEntry {
            name: "sheared-cylinder",
            wrapper: false,
            description: "(u, x) -> (r cos(x1/r), r sin(x1/r), x2..xn, u + k x1) in R^{n+2} (flat)",
            params: &[("n", "integer >= 1"), ("radius", "r > 0"), ("shear", "k real")],
            example: b("sheared-cylinder", json!({ "n": 2, "radius": 1.0, "shear": 0.5 })),
            example_grid: cube(&[0.1, 0.2, 0.3], 0.1, 2),
        },
        CatalogEntry {
            name: "psi-line",
            wrapper: false,
            description: "flat Lorentz slice family (u, x) -> Psi(x) + (u + k x1) v in L^{n+2+extra}",
            params: &[
                ("n", "integer >= 1"),
                ("extra", "integer >= 0"),
                ("direction", "v with n + 2 + extra components"),
                ("shear", "k real, default 0"),
            ],
            example: b("psi-line", json!({ "n": 2, "extra": 1, "direction": [1.0, 0.0, 0.0, 0.0, 1.0], "shear": 0.5 })),
            example_grid: cube(&[0.1, 0.2, 0.3], 0.1, 2),
        },
        CatalogEntry {
            name: "inversion",
            wrapper: true,
            description: "inversion y -> c + r^2 (y - c)/|y - c|^2 after a Euclidean immersion",
            params: &[("center", "c off the image"), ("radius", "r > 0")],
            example: inverted_cylinder(),
            example_grid: cube(&[0.1, 0.2, 0.3], 0.1, 2),
        },
        CatalogEntry {
            name: "psi-lift",
            wrapper: true,
            description: "Psi after a Euclidean immersion, into the light cone",
            params: &[],
            example: ImmersionSpec::wrap("psi-lift", json!(null), b("sphere", json!({ "n": 2, "radius": 1.2 }))),
            example_grid: cube(&[1.0, 0.7], 0.1, 3),
        },
        CatalogEntry {
            name: "iso-lift",
            wrapper: true,
            description: "light-cone representative isometric to `base` (chart metric if absent) of a conformal immersion",
            params: &[],
            example: ImmersionSpec::wrap("iso-lift", json!(null), inverted_cylinder())
                .with_base(b("cylinder", json!({ "n": 3, "radius": 1.0 }))),
            example_grid: cube(&[0.1, 0.2, 0.3], 0.1, 2),
        },
        CatalogEntry {
            name: "rigid",
            wrapper: true,
            description: "plane rotations (i, j, angle) followed by a translation",
            params: &[("rotations", "list of [i, j, angle]"), ("offset", "translation vector")],
            example: ImmersionSpec::wrap(
                "rigid",
                json!({ "rotations": [[0, 2, 0.7], [1, 3, -0.4]], "offset": [0.5, -1.0, 2.0, 0.3] }),
                b("circle-product", json!({ "radii": [1.0, 1.5] })),
            ),
            example_grid: cube(&[0.2, 0.4], 0.1, 3),
        },
        CatalogEntry {
            name: "embed",
            wrapper: true,
            description: "append zero coordinates",
            params: &[("extra", "integer >= 0")],
            example: ImmersionSpec::wrap("embed", json!({ "extra": 1 }), b("sphere", json!({ "n": 2, "radius": 1.2 }))),
            example_grid: cube(&[1.0, 0.7], 0.1, 3),
        },
        CatalogEntry {
            name: "scale",
            wrapper: true,
            description: "homothety y -> k y",
            params: &[("factor", "k != 0")],
            example: ImmersionSpec::wrap("scale", json!({ "factor": 1.1 }), b("cylinder", json!({ "n": 2, "radius": 0.8 }))),
            example_grid: cube(&[0.3, -0.2], 0.1, 3),
        },
    ]
}

fn manifest(name: &str, analysis: Analysis, expect: &[(&str, i64)]) -> Manifest {
    Manifest {
        name: Some(name.into()),
        seed: 0,
        tolerance: 1e-9,
        analysis,
        expect: expect.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        outputs: Outputs::default(),
    }
}

fn pair(n: usize, p: usize, q: usize, f: ImmersionSpec, g: ImmersionSpec, grid: GridSpec) -> PairSpec {
    PairSpec {
        n,
        p,
        q,
        f,
        g,
        grid,
        branch: Branch::Auto,
    }
}

/// Round trips through the light cone for every Euclidean catalog example.
fn psi_invariants() -> Manifest {
    let trips = catalog()
        .into_iter()
        .filter(|e| !matches!(e.name, "psi-line" | "psi-lift" | "iso-lift"))
        .map(|e| Target {
            immersion: e.example,
            grid: e.example_grid,
        })
        .collect();
    manifest(
        "psi-invariants",
        Analysis::Lightcone {
            n: 4,
            samples: 1000,
            round_trips: trips,
        },
        &[],
    )
}

pub fn manifests() -> Vec<Manifest> {
    let cyl = |n: usize, r: f64| b("cylinder", json!({ "n": n, "radius": r }));
    let torus = b("circle-product", json!({ "radii": [1.0, 1.5] }));
    let moved_torus = ImmersionSpec::wrap(
        "rigid",
        json!({ "rotations": [[0, 2, 0.7], [1, 3, -0.4], [0, 1, 1.1]], "offset": [0.5, -1.0, 2.0, 0.3] }),
        torus.clone(),
    );
    let sphere4 = ImmersionSpec::wrap("embed", json!({ "extra": 1 }), b("sphere", json!({ "n": 2, "radius": 1.2 })));
    let moved_sphere4 = ImmersionSpec::wrap(
        "rigid",
        json!({ "rotations": [[0, 3, 0.6], [1, 2, -0.3]], "offset": [0.1, 0.2, -0.4, 1.0] }),
        sphere4.clone(),
    );
    let moved_cyl4 = ImmersionSpec::wrap(
        "rigid",
        json!({ "rotations": [[0, 4, 0.5], [2, 3, 0.9]], "offset": [1.0, 0.0, -0.5, 0.2, 0.3] }),
        cyl(4, 1.0),
    );
    let mobius_g = ImmersionSpec::wrap("iso-lift", json!(null), inverted_cylinder()).with_base(cyl(3, 1.0));
    let n = 4;
    let mut w = vec![0.0; n + 3];
    w[0] = 1.0;
    w[n + 2] = 1.0;
    vec![
        psi_invariants(),
        manifest(
            "cylinder-nullity",
            Analysis::Single {
                n: 3,
                p: 1,
                immersion: cyl(3, 1.0),
                grid: cube(&[0.1, 0.2, 0.3], 0.1, 2),
                nullity: vec![1],
                rigidity_q: None,
                ruled_axes: Some(vec![1, 2]),
            },
            &[("nu_1", 2), ("conformally_ruled", 1)],
        ),
        manifest(
            "sphere-nullity",
            Analysis::Single {
                n: 3,
                p: 1,
                immersion: b("sphere", json!({ "n": 3, "radius": 1.5 })),
                grid: cube(&[1.0, 0.8, 0.4], 0.1, 2),
                nullity: vec![1],
                rigidity_q: None,
                ruled_axes: None,
            },
            &[("nu_1", 3)],
        ),
        manifest(
            "graph-nullity",
            Analysis::Single {
                n: 3,
                p: 1,
                immersion: b("graph", json!({ "quadratic": [1.0, 2.0, 3.5], "cubic": [0.2, -0.1, 0.3] })),
                grid: cube(&[0.05, -0.05, 0.1], 0.05, 2),
                nullity: vec![1],
                rigidity_q: None,
                ruled_axes: None,
            },
            &[("nu_1", 1)],
        ),
        manifest(
            "congruent-torus",
            Analysis::Pair(pair(2, 2, 2, torus, moved_torus, cube(&[0.2, 0.4], 0.1, 3))),
            &[("regions", 1), ("degenerate", 0), ("region0.l", 2), ("region0.d", 2)],
        ),
        manifest(
            "congruent-cylinder",
            Analysis::Extend(pair(4, 1, 1, cyl(4, 1.0), moved_cyl4, cube(&[0.1, 0.2, 0.3, 0.4], 0.1, 2))),
            &[("regions", 1), ("region0.l", 1), ("region0.d", 4), ("ext.r", 1)],
        ),
        manifest(
            "flat-pair",
            Analysis::Extend(pair(
                3,
                1,
                1,
                b("plane", json!({ "n": 3, "codim": 1 })),
                cyl(3, 0.8),
                cube(&[0.3, -0.2, 0.1], 0.1, 2),
            )),
            &[("regions", 1), ("region0.l", 0), ("region0.d", 2), ("ext.trivial", 1)],
        ),
        manifest(
            "congruent-sphere",
            Analysis::Extend(pair(2, 2, 2, sphere4, moved_sphere4, cube(&[1.0, 0.7], 0.1, 2))),
            &[("regions", 1), ("region0.l", 1), ("region0.d", 2), ("ext.r", 1)],
        ),
        manifest(
            "mobius-pair",
            Analysis::Pair(pair(3, 1, 1, cyl(3, 1.0), mobius_g, cube(&[0.1, 0.2, 0.3], 0.05, 2))),
            &[("degenerate", 1), ("region0.s", 3), ("region0.l", 3), ("region0.d", 3)],
        ),
        manifest(
            "generated-pair",
            Analysis::Generate(GenerateSpec {
                n,
                p: 2,
                q: 1,
                f_prime: b("sheared-cylinder", json!({ "n": n, "radius": 1.0, "shear": 0.5 })),
                f_hat: b("psi-line", json!({ "n": n, "extra": 1, "direction": w, "shear": 0.5 })),
                grid: cube(&[0.2, 0.1, -0.3, 0.4], 0.05, 2),
                slice: SliceSpec {
                    pick: Pick::Lowest,
                    ..SliceSpec::default()
                },
                analyze: true,
                extend: true,
            }),
            &[("degenerate", 1), ("p", 2), ("q", 1), ("region0.l", 2), ("region0.d", 3), ("ext.r", 2)],
        ),
    ]
}

pub fn find(name: &str) -> Option<Manifest> {
    manifests().into_iter().find(|m| m.name.as_deref() == Some(name))
}
