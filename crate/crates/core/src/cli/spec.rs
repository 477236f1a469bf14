//! Immersion specifications: builtin names with parameters, wrappers around
//! other specifications, expression maps and tabulated jets.

use std::sync::Arc;

use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chart::{
    AffineImage, ChartMap, CircleProduct, ConeOverSphere, Cylinder, Graph, Grid, Inversion, MapRef, Plane, PsiLift,
    PsiLine, ShearedCylinder, Sphere, TabulatedMap, Torus,
};
use crate::error::{Error, Result};
use crate::expr::ExprMap;
use crate::jets::ImmersionJet;
use crate::lightcone::{BaseMetric, IsometricRepresentative};
use crate::linalg::ScalarProduct;
use crate::taylor::Jet;

/// How jets are obtained from a map.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JetMode {
    #[default]
    ClosedForm,
    FiniteDifference(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmbientSpec {
    /// `R^m`.
    Euclidean(usize),
    /// The light-cone model space over `R^m`, of dimension `m + 2`.
    LightCone(usize),
}

impl AmbientSpec {
    pub fn product(self) -> ScalarProduct {
        match self {
            AmbientSpec::Euclidean(m) => ScalarProduct::euclidean(m),
            AmbientSpec::LightCone(m) => ScalarProduct::light_cone(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExprSpec {
    pub vars: usize,
    pub ambient: AmbientSpec,
    /// One expression in `x1..xn` per ambient coordinate.
    pub components: Vec<String>,
}

/// Derivatives of every ambient coordinate at one grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableNode {
    pub value: Vec<f64>,
    /// `d1[c][i]`.
    pub d1: Vec<Vec<f64>>,
    /// `d2[c][i * n + j]`.
    #[serde(default)]
    pub d2: Option<Vec<Vec<f64>>>,
    /// `d3[c][(i * n + j) * n + k]`.
    #[serde(default)]
    pub d3: Option<Vec<Vec<f64>>>,
}

/// Jets tabulated at the nodes of the manifest grid, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub ambient: AmbientSpec,
    pub nodes: Vec<TableNode>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
    /// The wrapped immersion of a wrapper builtin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<ImmersionSpec>>,
    /// Reference metric of `iso-lift`; the chart's Euclidean metric when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<ImmersionSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<ExprSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSpec>,
    #[serde(default)]
    pub jets: JetMode,
}

impl ImmersionSpec {
    pub fn builtin(name: &str, params: Value) -> ImmersionSpec {
        ImmersionSpec {
            builtin: Some(name.into()),
            params,
            ..ImmersionSpec::default()
        }
    }

    pub fn wrap(name: &str, params: Value, inner: ImmersionSpec) -> ImmersionSpec {
        ImmersionSpec {
            inner: Some(Box::new(inner)),
            ..ImmersionSpec::builtin(name, params)
        }
    }

    pub fn with_base(mut self, base: ImmersionSpec) -> ImmersionSpec {
        self.base = Some(Box::new(base));
        self
    }
}

fn manifest_err(field: &str, message: impl Into<String>) -> Error {
    Error::Manifest {
        field: field.into(),
        message: message.into(),
    }
}

fn params<T: DeserializeOwned>(field: &str, v: &Value) -> Result<T> {
    let v = if v.is_null() { Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| manifest_err(&format!("{field}.params"), e.to_string()))
}

fn positive(field: &str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(manifest_err(&format!("{field}.params.{name}"), format!("must be positive, got {v}")))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaneP {
    n: usize,
    #[serde(default = "one")]
    codim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundP {
    n: usize,
    radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConeP {
    n: usize,
    rho: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TorusP {
    big: f64,
    small: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphP {
    quadratic: Vec<f64>,
    #[serde(default)]
    cubic: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CirclesP {
    radii: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShearedP {
    n: usize,
    radius: f64,
    shear: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PsiLineP {
    n: usize,
    #[serde(default)]
    extra: usize,
    direction: Vec<f64>,
    #[serde(default)]
    shear: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InversionP {
    center: Vec<f64>,
    radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RigidP {
    #[serde(default)]
    rotations: Vec<(usize, usize, f64)>,
    offset: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbedP {
    extra: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleP {
    factor: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn one() -> usize {
    1
}

/// Builtin immersions (`wrapper = false`) and wrappers around an inner spec.
pub const BUILTINS: &[(&str, bool)] = &[
    ("plane", false),
    ("sphere", false),
    ("cylinder", false),
    ("cone-over-sphere", false),
    ("torus", false),
    ("graph", false),
    ("circle-product", false),
    ("sheared-cylinder", false),
    ("psi-line", false),
    ("inversion", true),
    ("psi-lift", true),
    ("iso-lift", true),
    ("rigid", true),
    ("embed", true),
    ("scale", true),
];

/// Resolve a specification into a chart map; `grid` is needed by tables.
pub fn build_map(spec: &ImmersionSpec, field: &str, grid: &Grid) -> Result<MapRef> {
    let sources = [spec.builtin.is_some(), spec.expr.is_some(), spec.table.is_some()];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(manifest_err(field, "exactly one of `builtin`, `expr`, `table` is required"));
    }
    if let Some(e) = &spec.expr {
        let map = ExprMap::new(field, e.vars, &e.components, e.ambient.product())
            .map_err(|err| manifest_err(&format!("{field}.expr"), err.to_string()))?;
        return Ok(Arc::new(map));
    }
    if let Some(t) = &spec.table {
        return build_table(t, field, grid);
    }
    let name = spec.builtin.as_deref().expect("checked above");
    let wrapper = BUILTINS
        .iter()
        .find(|(b, _)| *b == name)
        .map(|&(_, w)| w)
        .ok_or_else(|| manifest_err(&format!("{field}.builtin"), format!("unknown builtin `{name}`")))?;
    let inner = match (&spec.inner, wrapper) {
        (Some(i), true) => Some(build_map(i, &format!("{field}.inner"), grid)?),
        (None, true) => return Err(manifest_err(&format!("{field}.inner"), format!("`{name}` wraps another immersion"))),
        (Some(_), false) => return Err(manifest_err(&format!("{field}.inner"), format!("`{name}` takes no inner immersion"))),
        (None, false) => None,
    };
    if spec.base.is_some() && name != "iso-lift" {
        return Err(manifest_err(&format!("{field}.base"), "only `iso-lift` takes a base"));
    }
    let p = &spec.params;
    let map: MapRef = match name {
        "plane" => {
            let q: PlaneP = params(field, p)?;
            Arc::new(Plane { n: q.n, codim: q.codim })
        }
        "sphere" => {
            let q: RoundP = params(field, p)?;
            positive(field, "radius", q.radius)?;
            Arc::new(Sphere { n: q.n, radius: q.radius })
        }
        "cylinder" => {
            let q: RoundP = params(field, p)?;
            positive(field, "radius", q.radius)?;
            Arc::new(Cylinder { n: q.n, radius: q.radius })
        }
        "cone-over-sphere" => {
            let q: ConeP = params(field, p)?;
            if !(q.rho > 0.0 && q.rho < 1.0) {
                return Err(manifest_err(&format!("{field}.params.rho"), "must lie in (0, 1)"));
            }
            Arc::new(ConeOverSphere { n: q.n, rho: q.rho })
        }
        "torus" => {
            let q: TorusP = params(field, p)?;
            positive(field, "small", q.small)?;
            if q.big <= q.small {
                return Err(manifest_err(&format!("{field}.params.big"), "must exceed `small`"));
            }
            Arc::new(Torus { big: q.big, small: q.small })
        }
        "graph" => {
            let q: GraphP = params(field, p)?;
            let cubic = if q.cubic.is_empty() { vec![0.0; q.quadratic.len()] } else { q.cubic };
            if cubic.len() != q.quadratic.len() || cubic.is_empty() {
                return Err(manifest_err(&format!("{field}.params.cubic"), "needs one entry per variable"));
            }
            Arc::new(Graph {
                quadratic: q.quadratic,
                cubic,
            })
        }
        "circle-product" => {
            let q: CirclesP = params(field, p)?;
            for r in &q.radii {
                positive(field, "radii", *r)?;
            }
            if q.radii.is_empty() {
                return Err(manifest_err(&format!("{field}.params.radii"), "needs at least one radius"));
            }
            Arc::new(CircleProduct { radii: q.radii })
        }
        "sheared-cylinder" => {
            let q: ShearedP = params(field, p)?;
            positive(field, "radius", q.radius)?;
            Arc::new(ShearedCylinder {
                n: q.n,
                radius: q.radius,
                shear: q.shear,
            })
        }
        "psi-line" => {
            let q: PsiLineP = params(field, p)?;
            Arc::new(
                PsiLine::new(q.n, q.extra, DVector::from_vec(q.direction), q.shear)
                    .map_err(|e| manifest_err(&format!("{field}.params.direction"), e.to_string()))?,
            )
        }
        "inversion" => {
            let q: InversionP = params(field, p)?;
            positive(field, "radius", q.radius)?;
            Arc::new(Inversion {
                inner: inner.expect("wrapper"),
                center: DVector::from_vec(q.center),
                radius: q.radius,
            })
        }
        "psi-lift" => {
            let _: NoParams = params(field, p)?;
            Arc::new(PsiLift { inner: inner.expect("wrapper") })
        }
        "iso-lift" => {
            let _: NoParams = params(field, p)?;
            let base = match &spec.base {
                Some(b) => BaseMetric::Induced(build_map(b, &format!("{field}.base"), grid)?),
                None => BaseMetric::Euclidean,
            };
            Arc::new(IsometricRepresentative {
                inner: inner.expect("wrapper"),
                base,
            })
        }
        "rigid" => {
            let q: RigidP = params(field, p)?;
            Arc::new(
                AffineImage::rigid(inner.expect("wrapper"), &q.rotations, DVector::from_vec(q.offset))
                    .map_err(|e| manifest_err(&format!("{field}.params"), e.to_string()))?,
            )
        }
        "embed" => {
            let q: EmbedP = params(field, p)?;
            Arc::new(AffineImage::embed(inner.expect("wrapper"), q.extra))
        }
        "scale" => {
            let q: ScaleP = params(field, p)?;
            Arc::new(AffineImage::scaled(inner.expect("wrapper"), q.factor))
        }
        _ => unreachable!("names come from BUILTINS"),
    };
    Ok(map)
}

fn build_table(t: &TableSpec, field: &str, grid: &Grid) -> Result<MapRef> {
    let amb = t.ambient.product();
    let (m, n) = (amb.dim(), grid.dim());
    if t.nodes.len() != grid.len() {
        return Err(manifest_err(
            &format!("{field}.table.nodes"),
            format!("{} nodes for a grid of {} points", t.nodes.len(), grid.len()),
        ));
    }
    let order = if t.nodes.iter().all(|nd| nd.d3.is_some()) {
        3
    } else if t.nodes.iter().all(|nd| nd.d2.is_some()) {
        2
    } else {
        1
    };
    let mut nodes = Vec::with_capacity(t.nodes.len());
    for (k, nd) in t.nodes.iter().enumerate() {
        let at = |what: &str| format!("{field}.table.nodes[{k}].{what}");
        let check = |rows: &Vec<Vec<f64>>, what: &str, len: usize| -> Result<()> {
            if rows.len() != m || rows.iter().any(|r| r.len() != len) {
                return Err(manifest_err(&at(what), format!("expected {m} rows of {len} numbers")));
            }
            Ok(())
        };
        if nd.value.len() != m {
            return Err(manifest_err(&at("value"), format!("expected {m} numbers")));
        }
        check(&nd.d1, "d1", n)?;
        if let Some(d2) = &nd.d2 {
            check(d2, "d2", n * n)?;
        }
        if let Some(d3) = &nd.d3 {
            check(d3, "d3", n * n * n)?;
        }
        let jets: Vec<Jet> = (0..m)
            .map(|c| {
                Jet::from_derivatives(
                    n,
                    order,
                    nd.value[c],
                    Some(&nd.d1[c]),
                    nd.d2.as_ref().filter(|_| order >= 2).map(|d| d[c].as_slice()),
                    nd.d3.as_ref().filter(|_| order >= 3).map(|d| d[c].as_slice()),
                )
            })
            .collect();
        nodes.push(jets);
    }
    Ok(Arc::new(TabulatedMap::new(field, grid.clone(), amb, nodes)?))
}

/// Jets of a specification on a grid.
pub fn build_jet(spec: &ImmersionSpec, field: &str, grid: &Grid) -> Result<ImmersionJet> {
    let map = build_map(spec, field, grid)?;
    if map.domain_dim() != grid.dim() {
        return Err(manifest_err(
            field,
            format!("chart dimension {} differs from grid dimension {}", map.domain_dim(), grid.dim()),
        ));
    }
    match spec.jets {
        JetMode::ClosedForm => ImmersionJet::closed_form(map, grid),
        JetMode::FiniteDifference(h) => ImmersionJet::finite_difference(map, grid, h),
    }
}

/// Table entries reproducing a map's jets on a grid (used to round-trip tables).
pub fn tabulate(map: &dyn ChartMap, grid: &Grid, ambient: AmbientSpec) -> Result<TableSpec> {
    let n = grid.dim();
    let nodes = grid
        .points()
        .iter()
        .map(|x| {
            let jets = map.taylor(x, 3)?;
            Ok(TableNode {
                value: jets.iter().map(|j| j.value()).collect(),
                d1: jets.iter().map(|j| (0..n).map(|i| j.deriv(&[i])).collect()).collect(),
                d2: Some(
                    jets.iter()
                        .map(|j| (0..n * n).map(|ij| j.deriv(&[ij / n, ij % n])).collect())
                        .collect(),
                ),
                d3: Some(
                    jets.iter()
                        .map(|j| (0..n * n * n).map(|t| j.deriv(&[t / (n * n), (t / n) % n, t % n])).collect())
                        .collect(),
                ),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TableSpec { ambient, nodes })
}
