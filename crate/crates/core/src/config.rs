//! TOML configuration: kernel files, material laws, problems and scenario settings.
//!
//! A kernel is a list of separable terms, each a named profile family with parameters
//! times a matrix given as `scale` (times the identity), `diag` or `matrix`:
//!
//! ```toml
//! dim = 2
//! [[term]]
//! family = "exponential"
//! params = { rate = 1.0 }
//! scale = 0.5
//! ```
//!
//! Material laws declare fields and blocks; problems add a grid, an operator, a source,
//! optional initial values and relations. Scenario files hold `[visco]` and/or `[phase]`
//! tables plus shared `[checks]` and `[tolerances]` sections.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::kernels::{OperatorKernel, ProfileRegistry, Term};
use crate::linalg::RMatrix;
use crate::material_laws::{BlockKind, MaterialLaw};
use crate::monotone::{MonotoneRelation, RelationRegistry};
use crate::operators::{assemble_block_skew, assemble_phase_skew, build_grad_dirichlet_1d, BlockOperator, Layout, Structure};
use crate::scenarios::{NodalSource, PhaseTransitionScenario, ScenarioChecks, TimeShape, ViscoElasticScenario};
use crate::solver::build_ivp_rhs;
use crate::tolerances::Tolerances;
use crate::weighted_space::{TimeGrid, WeightedSignal};

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Matrix given by exactly one of `scale`, `diag`, `matrix`; none means the identity.
fn build_matrix(scale: Option<f64>, diag: &Option<Vec<f64>>, matrix: &Option<Vec<Vec<f64>>>, dim: usize) -> Result<RMatrix> {
    let given = scale.is_some() as u8 + diag.is_some() as u8 + matrix.is_some() as u8;
    if given > 1 {
        return Err(Error::Config("give only one of `scale`, `diag`, `matrix`".into()));
    }
    if let Some(d) = diag {
        if d.len() != dim {
            return Err(Error::Config(format!("`diag` has {} entries, expected {dim}", d.len())));
        }
        return Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d)));
    }
    if let Some(rows) = matrix {
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Config(format!("`matrix` must be {dim}x{dim}")));
        }
        return Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]));
    }
    Ok(DMatrix::identity(dim, dim) * scale.unwrap_or(1.0))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub scale: Option<f64>,
    pub diag: Option<Vec<f64>>,
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl TermSpec {
    fn implied_dim(&self) -> Option<usize> {
        self.diag.as_ref().map(Vec::len).or(self.matrix.as_ref().map(Vec::len))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub dim: Option<usize>,
    /// Declared decay parameter; raised to what the terms need when absent.
    pub mu: Option<f64>,
    #[serde(default)]
    pub term: Vec<TermSpec>,
}

impl KernelSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    /// The dimension from `dim` or the first explicit matrix.
    pub fn infer_dim(&self) -> Option<usize> {
        self.dim.or_else(|| self.term.iter().find_map(TermSpec::implied_dim))
    }

    pub fn build(&self, dim: usize) -> Result<OperatorKernel> {
        if let Some(d) = self.dim.filter(|&d| d != dim) {
            return Err(Error::Config(format!("kernel declares dim = {d} where {dim} is needed")));
        }
        let registry = ProfileRegistry::default();
        let terms = self
            .term
            .iter()
            .map(|t| {
                Ok(Term {
                    profile: registry.build(&t.family, &t.params)?,
                    matrix: build_matrix(t.scale, &t.diag, &t.matrix, dim)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let k = OperatorKernel::separable(dim, terms)?;
        match self.mu {
            Some(mu) => k.with_mu(mu),
            None => Ok(k),
        }
    }

    /// Builds with the inferred dimension.
    pub fn build_standalone(&self) -> Result<OperatorKernel> {
        let dim = self.infer_dim().ok_or_else(|| Error::Config("kernel needs `dim` or an explicit matrix".into()))?;
        self.build(dim)
    }

    fn exponential(rate: f64, scale: f64) -> Self {
        Self {
            dim: None,
            mu: None,
            term: vec![TermSpec {
                family: "exponential".into(),
                params: BTreeMap::from([("rate".to_string(), rate)]),
                scale: Some(scale),
                diag: None,
                matrix: None,
            }],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKindSpec {
    Const,
    Zconst,
    Hyp0,
    Hyp1,
    Par2,
    Par3,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub row: String,
    pub col: String,
    pub kind: BlockKindSpec,
    /// Matrix of `const` and `zconst` blocks.
    pub scale: Option<f64>,
    pub diag: Option<Vec<f64>>,
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Kernel of the other kinds.
    pub kernel: Option<KernelSpec>,
    /// Diagonal of a congruence `S`: the block becomes `S X S`.
    pub congruence: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub radius: Option<f64>,
    pub field: Vec<FieldSpec>,
    #[serde(default)]
    pub block: Vec<BlockSpec>,
}

impl MaterialSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    pub fn layout(&self) -> Layout {
        self.field.iter().map(|f| (f.name.clone(), f.dim)).collect()
    }

    fn field_dim(&self, name: &str) -> Result<usize> {
        self.field
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.dim)
            .ok_or_else(|| Error::Config(format!("unknown field `{name}`")))
    }

    pub fn build(&self) -> Result<MaterialLaw> {
        let mut law = MaterialLaw::new(self.layout());
        if let Some(r) = self.radius {
            law = law.with_radius(r)?;
        }
        for b in &self.block {
            let (rows, cols) = (self.field_dim(&b.row)?, self.field_dim(&b.col)?);
            let kind = match b.kind {
                BlockKindSpec::Const | BlockKindSpec::Zconst => {
                    let m = if rows == cols {
                        build_matrix(b.scale, &b.diag, &b.matrix, rows)?
                    } else {
                        let data = b.matrix.as_ref().ok_or_else(|| {
                            Error::Config(format!("block ({}, {}) is rectangular and needs `matrix`", b.row, b.col))
                        })?;
                        if data.len() != rows || data.iter().any(|r| r.len() != cols) {
                            return Err(Error::Config(format!("block ({}, {}) must be {rows}x{cols}", b.row, b.col)));
                        }
                        DMatrix::from_fn(rows, cols, |i, j| data[i][j])
                    };
                    if matches!(b.kind, BlockKindSpec::Const) {
                        BlockKind::Const(m)
                    } else {
                        BlockKind::ZConst(m)
                    }
                }
                ref k => {
                    let spec = b
                        .kernel
                        .as_ref()
                        .ok_or_else(|| Error::Config(format!("block ({}, {}) needs a `kernel`", b.row, b.col)))?;
                    let kernel = spec.build(rows)?;
                    match k {
                        BlockKindSpec::Hyp0 => BlockKind::Hyp0(kernel),
                        BlockKindSpec::Hyp1 => BlockKind::Hyp1(kernel),
                        BlockKindSpec::Par2 => BlockKind::Par2(kernel),
                        _ => BlockKind::Par3(kernel),
                    }
                }
            };
            law = match &b.congruence {
                Some(d) => {
                    let s = build_matrix(None, &Some(d.clone()), &None, rows)?;
                    law.with_conjugated_entry(&b.row, &b.col, kind, s)?
                }
                None => law.with_entry(&b.row, &b.col, kind)?,
            };
        }
        Ok(law)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureSpec {
    Skew,
    SymmetricPositive,
    General,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Zero,
    Matrix { matrix: Vec<Vec<f64>>, structure: StructureSpec },
    /// `[[0, G^T], [-G, 0]]` on two fields of widths `cells - 1` and `cells`.
    GradSkew { length: Option<f64> },
    /// `[[0, 0, -G^T], [0, 0, 0], [G, 0, 0]]` on three fields.
    PhaseSkew { length: Option<f64> },
}

impl OperatorSpec {
    pub fn build(&self, layout: Layout) -> Result<BlockOperator> {
        let n: usize = layout.iter().map(|(_, d)| d).sum();
        match self {
            OperatorSpec::Zero => Ok(BlockOperator::zero(layout)),
            OperatorSpec::Matrix { matrix, structure } => {
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("operator matrix must be {n}x{n}")));
                }
                let s = match structure {
                    StructureSpec::Skew => Structure::Skew,
                    StructureSpec::SymmetricPositive => Structure::SymmetricPositive,
                    StructureSpec::General => Structure::General,
                };
                BlockOperator::new(DMatrix::from_fn(n, n, |i, j| matrix[i][j]), s, layout)
            }
            OperatorSpec::GradSkew { length } | OperatorSpec::PhaseSkew { length } => {
                let cells = layout.last().map(|f| f.1).unwrap_or(0);
                let (g, _) = build_grad_dirichlet_1d(cells, length.unwrap_or(1.0) / cells as f64)?;
                if matches!(self, OperatorSpec::GradSkew { .. }) {
                    assemble_block_skew(&g, layout)
                } else {
                    assemble_phase_skew(&g, layout)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialSpec {
    #[default]
    Uniform,
    /// `sin(pi (i + 1)/(m + 1))` over the `m` components of the field.
    Sine,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// A CSV file `t,x0,x1,...` on the problem grid, relative to the config file.
    Csv { path: PathBuf },
    /// `amplitude · shape(t) · spatial` on one field.
    Function {
        field: String,
        amplitude: f64,
        #[serde(flatten)]
        shape: TimeShape,
        #[serde(default)]
        spatial: SpatialSpec,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub t0: f64,
    pub dt: f64,
    pub tmax: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationSpec {
    pub field: String,
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Numeric overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub nu: Option<f64>,
    pub dt: Option<f64>,
    pub tmax: Option<f64>,
    pub cells: Option<usize>,
}

impl Overrides {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu", self.nu), ("dt", self.dt), ("tmax", self.tmax)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("--{name} must be positive, got {v}")));
                }
            }
        }
        if self.cells.is_some_and(|c| c < 2) {
            return Err(Error::Config("--cells must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub grid: GridSpec,
    pub material: MaterialSpec,
    pub operator: OperatorSpec,
    pub source: SourceSpec,
    /// Initial value `x0`, added as `P(δ ⊗ x0)`.
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub relation: Vec<RelationSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// A problem ready for the solvers.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub law: MaterialLaw,
    pub a: BlockOperator,
    pub relations: Vec<(String, MonotoneRelation)>,
    pub f: WeightedSignal,
    pub grid: TimeGrid,
    pub nu: f64,
    pub tolerances: Tolerances,
}

impl ProblemSpec {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut p: Self = parse(text)?;
        p.base_dir = base_dir.to_path_buf();
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn build(&self, o: &Overrides) -> Result<BuiltProblem> {
        o.validate()?;
        self.tolerances.validate()?;
        let nu = o.nu.unwrap_or(self.grid.nu);
        let dt = o.dt.unwrap_or(self.grid.dt);
        let tmax = o.tmax.unwrap_or(self.grid.tmax);
        let law = self.material.build()?;
        let layout = self.material.layout();
        let a = self.operator.build(layout)?;
        let (f, grid) = match &self.source {
            SourceSpec::Csv { path } => {
                let f = WeightedSignal::read_csv(&self.base_dir.join(path), nu)?;
                (f.clone(), *f.grid())
            }
            SourceSpec::Function { field, amplitude, shape, spatial } => {
                let grid = TimeGrid::spanning(self.grid.t0, tmax - self.grid.t0, dt)?;
                let idx = law.field_index(field)?;
                let range = law.field_range(idx);
                let m = range.len();
                let weights: Vec<f64> = (0..m)
                    .map(|i| match spatial {
                        SpatialSpec::Uniform => 1.0,
                        SpatialSpec::Sine => (PI * (i + 1) as f64 / (m + 1) as f64).sin(),
                    })
                    .collect();
                let f = WeightedSignal::from_fn(grid, nu, law.dim(), |t, v| {
                    v.iter_mut().for_each(|x| *x = 0.0);
                    let s = amplitude * shape.eval(t);
                    for (x, w) in v[range.clone()].iter_mut().zip(&weights) {
                        *x = s * w;
                    }
                })?;
                (f, grid)
            }
        };
        if f.dim() != law.dim() {
            return Err(Error::Config(format!("source has {} components, the law {}", f.dim(), law.dim())));
        }
        let f = match &self.initial {
            Some(x0) => build_ivp_rhs(&law, x0, &f)?,
            None => f,
        };
        let registry = RelationRegistry::default();
        let relations = self
            .relation
            .iter()
            .map(|r| {
                let dim = self.material.field_dim(&r.field)?;
                Ok((r.field.clone(), registry.build(&r.name, dim, &r.params)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BuiltProblem { law, a, relations, f, grid, nu, tolerances: self.tolerances })
    }
}

/// A value per node or cell, or one value for all.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Uniform(f64),
    Values(Vec<f64>),
}

impl Profile {
    fn expand(&self, n: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            Profile::Uniform(v) => Ok(vec![*v; n]),
            Profile::Values(v) if v.len() == n => Ok(v.clone()),
            Profile::Values(v) => Err(Error::Config(format!("`{name}` has {} values, expected {n}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscoConfig {
    pub cells: Option<usize>,
    pub length: Option<f64>,
    pub rho: Option<Profile>,
    pub c: Option<Profile>,
    pub kernel: Option<KernelSpec>,
    pub source: Option<NodalSource>,
    pub nu: Option<f64>,
    pub dt: Option<f64>,
    pub tmax: Option<f64>,
    pub cross_validate: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationChoice {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub cells: Option<usize>,
    pub length: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub kernel_c: Option<KernelSpec>,
    pub kernel_d: Option<KernelSpec>,
    pub kernel_k: Option<KernelSpec>,
    pub relation: Option<RelationChoice>,
    pub source: Option<NodalSource>,
    pub nu: Option<f64>,
    pub dt: Option<f64>,
    pub tmax: Option<f64>,
}

/// Scenario settings; every key is optional and falls back to the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub visco: ViscoConfig,
    #[serde(default)]
    pub phase: PhaseConfig,
    #[serde(default)]
    pub checks: ScenarioChecks,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    pub fn visco(&self, o: &Overrides) -> Result<ViscoElasticScenario> {
        o.validate()?;
        self.tolerances.validate()?;
        let c = &self.visco;
        let d = ViscoElasticScenario::default();
        let cells = o.cells.or(c.cells).unwrap_or(d.cells);
        if cells < 2 {
            return Err(Error::Config("cells must be at least 2".into()));
        }
        let kernel = c.kernel.clone().unwrap_or_else(|| KernelSpec::exponential(1.0, 0.5)).build(cells)?;
        Ok(ViscoElasticScenario {
            cells,
            length: c.length.unwrap_or(d.length),
            rho: c.rho.clone().unwrap_or(Profile::Uniform(1.0)).expand(cells - 1, "rho")?,
            c: c.c.clone().unwrap_or(Profile::Uniform(1.0)).expand(cells, "c")?,
            kernel,
            source: c.source.unwrap_or(d.source),
            nu: o.nu.or(c.nu).unwrap_or(d.nu),
            dt: o.dt.or(c.dt).unwrap_or(d.dt),
            tmax: o.tmax.or(c.tmax).unwrap_or(d.tmax),
            cross_validate: c.cross_validate.unwrap_or(d.cross_validate),
            checks: self.checks.clone(),
            tolerances: self.tolerances,
        })
    }

    pub fn phase(&self, o: &Overrides) -> Result<PhaseTransitionScenario> {
        o.validate()?;
        self.tolerances.validate()?;
        let c = &self.phase;
        let d = PhaseTransitionScenario::default();
        let cells = o.cells.or(c.cells).unwrap_or(d.cells);
        if cells < 2 {
            return Err(Error::Config("cells must be at least 2".into()));
        }
        let kernel = |spec: &Option<KernelSpec>, scale: f64, dim: usize| {
            spec.clone().unwrap_or_else(|| KernelSpec::exponential(1.0, scale)).build(dim)
        };
        let relation = match &c.relation {
            Some(r) => RelationRegistry::default().build(&r.name, cells - 1, &r.params)?,
            None => MonotoneRelation::heaviside_inverse(cells - 1),
        };
        Ok(PhaseTransitionScenario {
            cells,
            length: c.length.unwrap_or(d.length),
            alpha: c.alpha.unwrap_or(d.alpha),
            lambda: c.lambda.unwrap_or(d.lambda),
            kernel_c: kernel(&c.kernel_c, 0.2, cells - 1)?,
            kernel_d: kernel(&c.kernel_d, 0.2, cells - 1)?,
            kernel_k: kernel(&c.kernel_k, 0.5, cells)?,
            relation,
            source: c.source.unwrap_or(d.source),
            nu: o.nu.or(c.nu).unwrap_or(d.nu),
            dt: o.dt.or(c.dt).unwrap_or(d.dt),
            tmax: o.tmax.or(c.tmax).unwrap_or(d.tmax),
            checks: self.checks.clone(),
            tolerances: self.tolerances,
        })
    }
}
