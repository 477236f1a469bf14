use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::spec::ImmersionSpec;
use crate::chart::Grid;
use crate::error::{Error, Result};
use crate::extension::RootPick;
use crate::pair::BranchChoice;

pub const MAX_TOLERANCE: f64 = 1e-3;

/// A self-describing analysis request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Seed for randomized searches and samples.
    #[serde(default)]
    pub seed: u64,
    /// Relative rank tolerance.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub analysis: Analysis,
    /// Integer results the run must reproduce, e.g. `"nu_1": 2` or `"region0.d": 3`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expect: BTreeMap<String, i64>,
    #[serde(default, skip_serializing_if = "Outputs::is_empty")]
    pub outputs: Outputs,
}

fn default_tolerance() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl Outputs {
    fn is_empty(&self) -> bool {
        self.report.is_none() && self.csv.is_none()
    }
}

/// Either `{center, half, count}` or `{lo, hi, counts}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Cube { center: Vec<f64>, half: f64, count: usize },
    Box { lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize> },
}

impl GridSpec {
    pub fn build(&self, field: &str) -> Result<Grid> {
        let err = |e: Error| Error::Manifest {
            field: field.into(),
            message: match e {
                Error::InvalidInput(m) => m,
                other => other.to_string(),
            },
        };
        match self {
            GridSpec::Cube { center, half, count } => {
                if !(*half >= 0.0) || *count == 0 || center.is_empty() {
                    return Err(err(Error::InvalidInput("need half >= 0, count >= 1 and a centre".into())));
                }
                Grid::new(
                    center.iter().map(|c| c - half).collect(),
                    center.iter().map(|c| c + half).collect(),
                    vec![*count; center.len()],
                )
                .map_err(err)
            }
            GridSpec::Box { lo, hi, counts } => Grid::new(lo.clone(), hi.clone(), counts.clone()).map_err(err),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub immersion: ImmersionSpec,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Analysis {
    /// Light-cone identities on random samples, and lift round trips.
    Lightcone {
        n: usize,
        samples: usize,
        #[serde(default)]
        round_trips: Vec<Target>,
    },
    /// Invariants of one immersion into `R^{n+p}`.
    Single {
        n: usize,
        p: usize,
        immersion: ImmersionSpec,
        grid: GridSpec,
        /// Values of `s` for the conformal `s`-nullity table.
        #[serde(default)]
        nullity: Vec<usize>,
        /// Codimension of a putative deformation for the rigidity criterion.
        #[serde(default)]
        rigidity_q: Option<usize>,
        /// Coordinate axes spanning a distribution tested for conformal ruledness.
        #[serde(default)]
        ruled_axes: Option<Vec<usize>>,
    },
    /// Isometric pair `{f, g}`.
    Pair(PairSpec),
    /// Isometric pair plus its ruled extension.
    Extend(PairSpec),
    /// Slice an isometric pair `{F', F_hat}` by the light cone.
    Generate(GenerateSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub f: ImmersionSpec,
    pub g: ImmersionSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    #[default]
    Auto,
    Nondegenerate,
    Degenerate,
}

impl From<Branch> for BranchChoice {
    fn from(b: Branch) -> Self {
        match b {
            Branch::Auto => BranchChoice::Auto,
            Branch::Nondegenerate => BranchChoice::Nondegenerate,
            Branch::Degenerate => BranchChoice::Degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    /// Dimension of the slice.
    pub n: usize,
    /// `F'` maps the `(n+1)`-dimensional chart into `R^{n+p}`, so the slice `f` has codimension `p`.
    pub p: usize,
    /// `F_hat` maps into the light-cone model over `R^{n+q}`.
    pub q: usize,
    pub f_prime: ImmersionSpec,
    pub f_hat: ImmersionSpec,
    /// `n`-dimensional grid of the slice.
    pub grid: GridSpec,
    #[serde(default)]
    pub slice: SliceSpec,
    /// Run the pair pipeline on the generated pair.
    #[serde(default = "yes")]
    pub analyze: bool,
    /// Also build the ruled extension of the generated pair.
    #[serde(default)]
    pub extend: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    #[serde(default)]
    pub axis: usize,
    #[serde(default = "default_range")]
    pub t_range: (f64, f64),
    #[serde(default = "default_scan")]
    pub scan: usize,
    #[serde(default)]
    pub pick: Pick,
}

impl Default for SliceSpec {
    fn default() -> Self {
        SliceSpec {
            axis: 0,
            t_range: default_range(),
            scan: default_scan(),
            pick: Pick::default(),
        }
    }
}

fn default_range() -> (f64, f64) {
    (-4.0, 4.0)
}

fn default_scan() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pick {
    #[default]
    Lowest,
    Highest,
    Nearest(f64),
}

impl From<Pick> for RootPick {
    fn from(p: Pick) -> Self {
        match p {
            Pick::Lowest => RootPick::Lowest,
            Pick::Highest => RootPick::Highest,
            Pick::Nearest(t) => RootPick::Nearest(t),
        }
    }
}

impl Manifest {
    /// Parse JSON; errors name the line, column and offending field.
    pub fn from_json(text: &str) -> Result<Manifest> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| Error::Manifest {
            field: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= MAX_TOLERANCE) {
            return Err(Error::Manifest {
                field: "tolerance".into(),
                message: format!("must lie in (0, {MAX_TOLERANCE:e}], got {}", self.tolerance),
            });
        }
        let dims_err = |field: &str, message: String| Err(Error::Manifest { field: field.into(), message });
        match &self.analysis {
            Analysis::Lightcone { n, samples, .. } => {
                if *n == 0 || *samples == 0 {
                    return dims_err("analysis", "n and samples must be positive".into());
                }
            }
            Analysis::Single { n, .. } | Analysis::Pair(PairSpec { n, .. }) | Analysis::Extend(PairSpec { n, .. }) => {
                if *n == 0 {
                    return dims_err("analysis.n", "must be positive".into());
                }
            }
            Analysis::Generate(g) => {
                if g.n == 0 || g.slice.axis > g.n {
                    return dims_err("analysis.slice.axis", format!("axis {} outside 0..={}", g.slice.axis, g.n));
                }
                if !(g.slice.t_range.0 < g.slice.t_range.1) || g.slice.scan < 2 {
                    return dims_err("analysis.slice", "need t_range lo < hi and scan >= 2".into());
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &'static str {
        match self.analysis {
            Analysis::Lightcone { .. } => "lightcone",
            Analysis::Single { .. } => "single",
            Analysis::Pair(_) => "pair",
            Analysis::Extend(_) => "extend",
            Analysis::Generate(_) => "generate",
        }
    }
}
