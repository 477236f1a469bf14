//! Dispatch of manifests to the analysis modules and assembly of reports.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::manifest::{Analysis, GenerateSpec, Manifest, PairSpec, Target};
use super::report::{num, Check, Provenance, Report, Table};
use super::spec::{build_jet, build_map};
use crate::conformal::{conformal_s_nullity, is_conformally_ruled, rigidity_criterion, NullityOptions};
use crate::error::{Error, Result};
use crate::extension::{generate_conformal_pair, phi_obstruction, ruled_extension, verify_extension, ExtensionOptions, SliceOptions};
use crate::jets::{fundamental_data, induced_metric, DistributionFrame, ImmersionJet};
use crate::lightcone::{cone_projection, isometric_representative, position_identities, psi, psi_push, BaseMetric, LightConeModel};
use crate::linalg::{ScalarProduct, Tolerance};
use crate::pair::{analyze_pair, check_dimension_bound, BoundInput, BoundKind, PairAnalysis, PairOptions};

/// Thresholds of the report checks.
pub mod thresholds {
    pub const IDENTITY: f64 = 1e-12;
    pub const PROJECTION: f64 = 1e-10;
    pub const LIFT_METRIC: f64 = 1e-8;
    pub const POSITION: f64 = 1e-8;
    pub const PAIR: f64 = 1e-6;
    pub const C2: f64 = 1e-5;
    pub const CLAIM: f64 = crate::pair::CLAIM_TOL;
    pub const FACTOR: f64 = 1e-8;
    pub const STRAIGHT: f64 = 1e-12;
    pub const EXTENSION: f64 = 1e-6;
    pub const CONE: f64 = 1e-8;
}

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    /// Restrict region summaries and CSV rows to one region.
    pub region: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub table: Table,
}

struct Ctx {
    tol: Tolerance,
    seed: u64,
    region: Option<usize>,
    checks: Vec<Check>,
    facts: BTreeMap<String, i64>,
    table: Table,
}

impl Ctx {
    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn fact(&mut self, key: impl Into<String>, v: i64) {
        self.facts.insert(key.into(), v);
    }
}

fn manifest_err(field: &str, message: impl Into<String>) -> Error {
    Error::Manifest {
        field: field.into(),
        message: message.into(),
    }
}

/// Run a validated manifest. `bytes` are hashed into the provenance.
pub fn run_manifest(m: &Manifest, bytes: &[u8], opts: &RunOptions) -> Result<RunOutput> {
    let mut m = m.clone();
    if let Some(t) = opts.tolerance {
        m.tolerance = t;
    }
    if let Some(s) = opts.seed {
        m.seed = s;
    }
    m.validate()?;
    let mut ctx = Ctx {
        tol: Tolerance::new(m.tolerance),
        seed: m.seed,
        region: opts.region,
        checks: Vec::new(),
        facts: BTreeMap::new(),
        table: Table::default(),
    };
    let results = match &m.analysis {
        Analysis::Lightcone { n, samples, round_trips } => lightcone(&mut ctx, *n, *samples, round_trips)?,
        Analysis::Single {
            n,
            p,
            immersion,
            grid,
            nullity,
            rigidity_q,
            ruled_axes,
        } => {
            let grid = grid.build("analysis.grid")?;
            let j = build_jet(immersion, "analysis.immersion", &grid)?;
            check_codim(&j, *n, *p, "analysis.p")?;
            single(&mut ctx, &j, nullity, *rigidity_q, ruled_axes.as_deref())?
        }
        Analysis::Pair(spec) => pair_kind(&mut ctx, spec, false)?,
        Analysis::Extend(spec) => pair_kind(&mut ctx, spec, true)?,
        Analysis::Generate(spec) => generate(&mut ctx, spec)?,
    };
    for (key, &want) in &m.expect {
        let c = match ctx.facts.get(key) {
            Some(&got) => Check::equal(format!("expect.{key}"), got, want),
            None => Check {
                name: format!("expect.{key}"),
                value: f64::NAN,
                threshold: want as f64,
                comparison: super::report::Comparison::Equal,
                pass: false,
            },
        };
        ctx.check(c);
    }
    let pass = ctx.checks.iter().all(|c| c.pass);
    let report = Report {
        name: m.name.clone(),
        kind: m.kind().into(),
        provenance: Provenance::new(bytes, m.tolerance, m.seed),
        results: json!({ "summary": results, "facts": ctx.facts }),
        checks: ctx.checks,
        pass,
    };
    Ok(RunOutput { report, table: ctx.table })
}

/// `(codimension, index)` of a jet, reading light-cone targets in the Euclidean model.
fn codim(j: &ImmersionJet) -> (usize, usize) {
    let dim = j.ambient.dim();
    if j.ambient.null_pair().is_some() {
        (dim.saturating_sub(j.n() + 2), 0)
    } else {
        (dim.saturating_sub(j.n()), j.ambient.index())
    }
}

fn check_codim(j: &ImmersionJet, n: usize, p: usize, field: &str) -> Result<()> {
    if j.n() != n {
        return Err(manifest_err("analysis.n", format!("immersion has chart dimension {}, manifest says {n}", j.n())));
    }
    let (c, _) = codim(j);
    if c != p {
        return Err(manifest_err(field, format!("immersion has codimension {c}, manifest says {p}")));
    }
    Ok(())
}

fn max_abs_diff(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).amax()
}

fn lightcone(ctx: &mut Ctx, n: usize, samples: usize, targets: &[Target]) -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let model = LightConeModel::new(n);
    let amb = model.ambient();
    let e0 = model.e0();
    let draw = |rng: &mut ChaCha8Rng| DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-2.0..2.0)));
    let mut worst = [0.0f64; 4];
    for _ in 0..samples {
        let (x, y, v, w) = (draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let px = psi(&x);
        worst[0] = worst[0].max(amb.norm_sq(&px).abs());
        worst[1] = worst[1].max((amb.dot(&px, &e0) - 1.0).abs());
        worst[2] = worst[2].max((amb.dot(&psi_push(&x, &v), &psi_push(&x, &w)) - v.dot(&w)).abs());
        worst[3] = worst[3].max((amb.dot(&px, &psi(&y)) + 0.5 * (&x - &y).norm_squared()).abs());
    }
    let names = ["psi_null", "psi_e0", "psi_isometric", "psi_distance"];
    for (name, w) in names.iter().zip(worst) {
        ctx.check(Check::at_most(*name, w, thresholds::IDENTITY));
    }
    let mut trips = Vec::new();
    for (i, t) in targets.iter().enumerate() {
        let field = format!("analysis.round_trips[{i}]");
        let grid = t.grid.build(&format!("{field}.grid"))?;
        let f = build_jet(&t.immersion, &format!("{field}.immersion"), &grid)?;
        if !f.ambient.is_euclidean() {
            return Err(manifest_err(&field, "round trips need a Euclidean immersion"));
        }
        let g = isometric_representative(&f, BaseMetric::Induced(f.map().clone()), &ctx.tol)?;
        let back = cone_projection(&g, &ctx.tol)?;
        let (mf, mg) = (induced_metric(&f, &ctx.tol)?, induced_metric(&g, &ctx.tol)?);
        let mut projection: f64 = 0.0;
        let mut metric: f64 = 0.0;
        for k in 0..f.len() {
            projection = projection
                .max((back.position(k) - f.position(k)).amax())
                .max(max_abs_diff(&back.d1(k), &f.d1(k)));
            metric = metric.max(max_abs_diff(&mf[k], &mg[k]));
        }
        let pos = position_identities(&g, None, &ctx.tol)?;
        ctx.check(Check::at_most(format!("round_trip[{i}].projection"), projection, thresholds::PROJECTION));
        ctx.check(Check::at_most(format!("round_trip[{i}].metric"), metric, thresholds::LIFT_METRIC));
        ctx.check(Check::at_most(format!("round_trip[{i}].shape_position"), pos.position, thresholds::POSITION));
        ctx.check(Check::at_most(format!("round_trip[{i}].shape_null"), pos.null_vector, thresholds::POSITION));
        trips.push(json!({
            "immersion": f.map().name(),
            "points": f.len(),
            "projection": projection,
            "metric": metric,
            "position_identities": pos,
        }));
    }
    Ok(json!({ "n": n, "samples": samples, "identities": {
        "psi_null": worst[0], "psi_e0": worst[1], "psi_isometric": worst[2], "psi_distance": worst[3] },
        "round_trips": trips }))
}

fn nullity_options(seed: u64) -> NullityOptions {
    NullityOptions {
        seed,
        ..NullityOptions::default()
    }
}

fn single(ctx: &mut Ctx, j: &ImmersionJet, nullity: &[usize], rigidity_q: Option<usize>, ruled_axes: Option<&[usize]>) -> Result<Value> {
    let fd = fundamental_data(j, &ctx.tol)?;
    let opts = nullity_options(ctx.seed);
    let n = j.n();
    let mut header: Vec<String> = vec!["point".into()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend(nullity.iter().map(|s| format!("nu_{s}")));
    ctx.table = Table::new(header);
    let mut per_point: Vec<Vec<usize>> = vec![Vec::new(); j.len()];
    let mut table = Vec::new();
    for &s in nullity {
        if s == 0 || s > codim(j).0 {
            return Err(manifest_err("analysis.nullity", format!("s = {s} outside 1..=p")));
        }
        let mut values = Vec::with_capacity(j.len());
        let mut exact = true;
        for k in 0..j.len() {
            let r = conformal_s_nullity(j, s, k, &opts, &ctx.tol)?;
            exact &= r.exact;
            values.push(r.value);
            per_point[k].push(r.value);
        }
        let (lo, hi) = (*values.iter().min().unwrap_or(&0), *values.iter().max().unwrap_or(&0));
        if lo == hi {
            ctx.fact(format!("nu_{s}"), lo as i64);
        }
        ctx.fact(format!("nu_{s}.min"), lo as i64);
        ctx.fact(format!("nu_{s}.max"), hi as i64);
        table.push(json!({ "s": s, "min": lo, "max": hi, "exact": exact, "values": values }));
    }
    for (k, vals) in per_point.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(j.grid.point(k).iter().map(|v| num(*v)));
        row.extend(vals.iter().map(|v| v.to_string()));
        ctx.table.push(row);
    }
    let rigidity = match rigidity_q {
        Some(q) => {
            let v = rigidity_criterion(j, q, &opts, &ctx.tol)?;
            let holds = v.iter().all(|p| p.holds);
            ctx.fact("rigidity_holds", holds as i64);
            json!({ "q": q, "holds_everywhere": holds, "points": v })
        }
        None => Value::Null,
    };
    let ruled = match ruled_axes {
        Some(axes) => {
            if axes.iter().any(|&a| a >= n) || axes.is_empty() {
                return Err(manifest_err("analysis.ruled_axes", format!("axes must lie in 0..{n}")));
            }
            let d = DistributionFrame::coordinate(&j.grid, axes);
            let v = is_conformally_ruled(j, &d, &ctx.tol)?;
            ctx.fact("conformally_ruled", v.ruled as i64);
            json!({ "axes": axes, "verdict": v })
        }
        None => Value::Null,
    };
    Ok(json!({
        "immersion": j.map().name(),
        "n": n,
        "p": codim(j).0,
        "points": j.len(),
        "metric_scale": fd.points().iter().map(|pg| pg.metric.amax()).fold(0.0, f64::max),
        "nullity": table,
        "rigidity": rigidity,
        "conformally_ruled": ruled,
    }))
}

fn pair_options(ctx: &Ctx, spec: &PairSpec) -> PairOptions {
    PairOptions {
        tol: ctx.tol,
        branch: spec.branch.into(),
        strict_claims: false,
        ..PairOptions::default()
    }
}

fn pair_kind(ctx: &mut Ctx, spec: &PairSpec, extend: bool) -> Result<Value> {
    let grid = spec.grid.build("analysis.grid")?;
    let f = build_jet(&spec.f, "analysis.f", &grid)?;
    let g = build_jet(&spec.g, "analysis.g", &grid)?;
    check_codim(&f, spec.n, spec.p, "analysis.p")?;
    check_codim(&g, spec.n, spec.q, "analysis.q")?;
    let a = analyze_pair(&f, &g, &pair_options(ctx, spec))?;
    let mut out = pair_section(ctx, &a)?;
    if extend {
        out["extension"] = extension_section(ctx, &a)?;
    }
    Ok(out)
}

fn pair_section(ctx: &mut Ctx, a: &PairAnalysis) -> Result<Value> {
    use thresholds::*;
    let n = a.n;
    let mut header: Vec<String> = vec!["point".into()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    for h in [
        "region", "degenerate", "omega", "gamma_perp", "theta", "s", "s0", "l", "d", "star", "skew", "c1", "c2", "theta_identity",
    ] {
        header.push(h.into());
    }
    ctx.table = Table::new(header);
    let region_of: Vec<usize> = {
        let mut r = vec![0; a.points.len()];
        for reg in &a.regions {
            for &k in &reg.points {
                r[k] = reg.id;
            }
        }
        r
    };
    for p in &a.points {
        if ctx.region.is_some_and(|id| id != region_of[p.k]) {
            continue;
        }
        let pr = &p.profile;
        let mut row = vec![p.k.to_string()];
        row.extend(p.x.iter().map(|v| num(*v)));
        row.extend(
            [region_of[p.k], pr.degenerate as usize, pr.omega, pr.gamma_perp, pr.theta, pr.s, pr.s0, pr.l, pr.d]
                .iter()
                .map(|v| v.to_string()),
        );
        let r = &p.residuals;
        row.extend([r.star, r.skew, r.c1(), r.c2.unwrap_or(f64::NAN), r.theta_identity].iter().map(|v| num(*v)));
        ctx.table.push(row);
    }
    ctx.fact("regions", a.regions.len() as i64);
    ctx.fact("degenerate", a.degenerate() as i64);
    ctx.fact("p", a.p as i64);
    ctx.fact("q", a.q as i64);
    let opts = nullity_options(ctx.seed);
    let mut regions = Vec::new();
    for reg in &a.regions {
        if ctx.region.is_some_and(|id| id != reg.id) {
            continue;
        }
        let id = reg.id;
        let k0 = reg.points[0];
        let pr = reg.profile;
        let phi = phi_obstruction(a, k0)?;
        let (d, r, ell) = (phi.d, phi.r(), phi.ell);
        for (key, v) in [
            ("omega", pr.omega),
            ("gamma_perp", pr.gamma_perp),
            ("theta", pr.theta),
            ("s", pr.s),
            ("s0", pr.s0),
            ("l", pr.l),
            ("d", pr.d),
            ("r", r),
            ("delta", phi.delta.ncols()),
            ("degenerate", pr.degenerate as usize),
        ] {
            ctx.fact(format!("region{id}.{key}"), v as i64);
        }
        let res = &reg.residuals;
        ctx.check(Check::at_most(format!("region{id}.star"), res.star, PAIR));
        ctx.check(Check::at_most(format!("region{id}.skew"), res.skew, PAIR));
        ctx.check(Check::at_most(format!("region{id}.c1"), res.c1(), PAIR));
        if let Some(c2) = res.c2 {
            ctx.check(Check::at_most(format!("region{id}.c2"), c2, C2));
        }
        ctx.check(Check::at_most(format!("region{id}.theta_identity"), res.theta_identity, PAIR));
        ctx.check(Check::at_most(format!("region{id}.omega_null"), res.omega_null, PAIR));
        ctx.check(Check::at_most(format!("region{id}.inter"), phi.inter_residual, EXTENSION));
        let claims = if pr.degenerate {
            let reports: Vec<_> = reg.points.iter().filter_map(|&k| a.points[k].claims.clone()).collect();
            for (c, test) in [
                (1, crate::pair::ClaimReport::claim1 as fn(&crate::pair::ClaimReport) -> bool),
                (2, crate::pair::ClaimReport::claim2),
                (3, crate::pair::ClaimReport::claim3),
                (4, crate::pair::ClaimReport::claim4),
            ] {
                let ok = reports.iter().all(test);
                ctx.check(Check::equal(format!("region{id}.claim{c}"), ok as i64, 1));
            }
            let th0 = reports.iter().map(|c| c.th0).fold(0.0, f64::max);
            ctx.check(Check::at_most(format!("region{id}.th0"), th0, CLAIM));
            let right = a.right_jet();
            let pairing: Vec<f64> = reg
                .points
                .iter()
                .filter_map(|&k| a.points[k].xi0.as_ref().map(|xi| (right.ambient.dot(&right.position(k), xi) - 1.0).abs()))
                .collect();
            ctx.check(Check::equal(format!("region{id}.witness_found"), (pairing.len() == reg.points.len()) as i64, 1));
            let normalization = pairing.iter().cloned().fold(0.0, f64::max);
            ctx.check(Check::at_most(format!("region{id}.witness_normalization"), normalization, CLAIM));
            json!({ "first_point": reports.first(), "th0": th0, "witnesses": pairing.len(), "witness_normalization": normalization })
        } else {
            Value::Null
        };
        let (kind, input) = if pr.degenerate {
            (BoundKind::DegenerateLift, BoundInput { n, p: a.p, q: a.q, a: 0, b: 0, d, r, ell })
        } else {
            (BoundKind::Isometric, BoundInput { n, p: a.p, q: a.q, a: a.a, b: a.b, d, r, ell })
        };
        let bound = match check_dimension_bound(kind, &input) {
            Ok(v) => {
                ctx.check(Check::at_least(format!("region{id}.bound_slack"), v.slack as f64, 0.0));
                if let Some(ok) = v.r_in_range {
                    ctx.check(Check::equal(format!("region{id}.bound_r_range"), ok as i64, 1));
                }
                json!({ "applicable": true, "input": input, "verdict": v })
            }
            Err(Error::HypothesisOutOfRange(reason)) => json!({ "applicable": false, "kind": kind, "reason": reason }),
            Err(e) => return Err(e),
        };
        let f = &a.points[k0];
        let nu = nu_table(a, k0, &opts, &ctx.tol)?;
        regions.push(json!({
            "id": id,
            "points": reg.points.len(),
            "branch": if pr.degenerate { "degenerate" } else { "nondegenerate" },
            "ranks": pr,
            "ell": ell,
            "r": r,
            "delta": phi.delta.ncols(),
            "s_riemannian": reg.s_riemannian,
            "residuals": res,
            "claims": claims,
            "bound": bound,
            "conformal_nullity_f": nu,
            "first_point": f.k,
        }));
    }
    Ok(json!({ "n": n, "p": a.p, "q": a.q, "a": a.a, "b": a.b, "points": a.points.len(), "regions": regions }))
}

/// `nu_s` of the left immersion at one point for `s = 1..=p`.
fn nu_table(a: &PairAnalysis, k: usize, opts: &NullityOptions, tol: &Tolerance) -> Result<Value> {
    let f = a.left_jet();
    if !f.ambient.is_euclidean() {
        return Ok(Value::Null);
    }
    let p = codim(f).0;
    let mut out = Vec::new();
    for s in 1..=p {
        let r = conformal_s_nullity(f, s, k, opts, tol)?;
        out.push(json!({ "s": s, "value": r.value, "exact": r.exact }));
    }
    Ok(Value::Array(out))
}

fn extension_section(ctx: &mut Ctx, a: &PairAnalysis) -> Result<Value> {
    use thresholds::*;
    let ext = ruled_extension(a, &ExtensionOptions::default())?;
    let rep = verify_extension(&ext)?;
    ctx.fact("ext.d", ext.d as i64);
    ctx.fact("ext.r", ext.r as i64);
    ctx.fact("ext.ell", ext.ell as i64);
    ctx.fact("ext.trivial", ext.is_trivial() as i64);
    ctx.check(Check::equal("ext.zero_section_exact", rep.zero_section_exact as i64, 1));
    ctx.check(Check::at_most("ext.straightness", rep.straightness, STRAIGHT));
    ctx.check(Check::at_most("ext.metric", rep.metric, EXTENSION));
    ctx.check(Check::at_most("ext.split", rep.split, EXTENSION));
    ctx.check(Check::at_most("ext.inc", rep.inc, EXTENSION));
    ctx.check(Check::equal("ext.inc_rank", rep.inc_rank_ok as i64, 1));
    ctx.check(Check::at_most("ext.inter", rep.inter, EXTENSION));
    ctx.check(Check::at_most("ext.transfer", rep.transfer, EXTENSION));
    if let Some(c) = rep.cone {
        ctx.check(Check::at_most("ext.cone", c, CONE));
    }
    Ok(json!({
        "d": ext.d,
        "r": ext.r,
        "ell": ext.ell,
        "radius": ext.radius,
        "tube_points": ext.grid.len(),
        "report": rep,
    }))
}

fn generate(ctx: &mut Ctx, spec: &GenerateSpec) -> Result<Value> {
    let grid = spec.grid.build("analysis.grid")?;
    if grid.dim() != spec.n {
        return Err(manifest_err("analysis.grid", format!("slice grid must have dimension n = {}", spec.n)));
    }
    let big = crate::chart::Grid::single(&vec![0.0; spec.n + 1]);
    let fp = build_map(&spec.f_prime, "analysis.f_prime", &big)?;
    let fh = build_map(&spec.f_hat, "analysis.f_hat", &big)?;
    for (map, field) in [(&fp, "analysis.f_prime"), (&fh, "analysis.f_hat")] {
        if map.domain_dim() != spec.n + 1 {
            return Err(manifest_err(field, format!("needs an (n+1) = {}-dimensional chart", spec.n + 1)));
        }
    }
    if fp.ambient() != ScalarProduct::euclidean(spec.n + spec.p) {
        return Err(manifest_err("analysis.p", format!("f_prime must map into R^{}", spec.n + spec.p)));
    }
    if fh.ambient() != ScalarProduct::light_cone(spec.n + spec.q) {
        return Err(manifest_err("analysis.q", format!("f_hat must map into the light-cone model over R^{}", spec.n + spec.q)));
    }
    let opts = SliceOptions {
        axis: spec.slice.axis,
        t_range: spec.slice.t_range,
        scan: spec.slice.scan,
        pick: spec.slice.pick.into(),
        ..SliceOptions::default()
    };
    let s = generate_conformal_pair(&fp, &fh, &grid, &opts, &ctx.tol)?;
    let residual = s.factor.max_residual();
    ctx.check(Check::at_most("slice.conformal_factor", residual, thresholds::FACTOR));
    let grad = s.transversality.iter().map(|t| t.gradient).fold(f64::INFINITY, f64::min);
    let minmax = |v: &[f64]| (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let slice = json!({
        "points": grid.len(),
        "roots": minmax(&s.roots),
        "min_gradient": grad,
        "phi": minmax(&s.factor.phi),
        "factor_residual": residual,
    });
    if !spec.analyze {
        let mut header: Vec<String> = vec!["point".into()];
        header.extend((1..=spec.n).map(|i| format!("x{i}")));
        header.extend(["root", "gradient", "phi", "factor_residual"].map(String::from));
        ctx.table = Table::new(header);
        for k in 0..grid.len() {
            let mut row = vec![k.to_string()];
            row.extend(grid.point(k).iter().map(|v| num(*v)));
            row.extend([s.roots[k], s.transversality[k].gradient, s.factor.phi[k], s.factor.residual[k]].iter().map(|v| num(*v)));
            ctx.table.push(row);
        }
        return Ok(json!({ "slice": slice }));
    }
    let (f, g) = s.isometric_pair(&ctx.tol)?;
    let pair_spec_opts = PairOptions {
        tol: ctx.tol,
        strict_claims: false,
        ..PairOptions::default()
    };
    let a = analyze_pair(&f, &g, &pair_spec_opts)?;
    let mut out = json!({ "slice": slice, "pair": pair_section(ctx, &a)? });
    if spec.extend {
        out["extension"] = extension_section(ctx, &a)?;
    }
    Ok(out)
}
