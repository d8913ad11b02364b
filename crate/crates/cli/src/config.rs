//! Experiment configuration.
//!
//! A config is a TOML file with the blocks `problem`, `tableau`, `data`,
//! `grid`, `output` and (for `study`) `study`. Unknown keys anywhere are an
//! error. Relative tableau paths resolve against the config file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, ensure, Context, Result};
use galerkin_rk::analysis::{SpatialExpectation, StudyOptions};
use galerkin_rk::equations::{make_initial_data, nls_problem, wave_problem, DataKind, DealiasRule, PotentialTerm, Problem};
use galerkin_rk::integrator::{ReferenceOptions, StageOptions};
use galerkin_rk::spectral::{ModeGrid, SpectralState};
use galerkin_rk::tableau::{gauss_legendre, parse_tableau, ButcherTableau};
use serde::Deserialize;
use sha2::{Digest, Sha256};

/// Overrides the directory that relative `output.dir` values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "GALERKIN_RK_OUTPUT_ROOT";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemBlock,
    pub tableau: TableauSource,
    pub data: DataBlock,
    pub grid: GridBlock,
    pub study: Option<StudyBlock>,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    Nls,
    Wave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    None,
    TwoThirds,
    ThreeHalves,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub name: ProblemName,
    /// Wave: `f(u) = sum_j c[j] u^j`. NLS: `c[j]` multiplies `|u|^{2j+2} u`,
    /// so `[1.0]` is the cubic equation. Empty means `B = 0`.
    #[serde(default)]
    pub coefficients: Vec<f64>,
    pub dealias: Option<Dealias>,
    /// Radius of the admissible ball as a multiple of the initial norm.
    pub domain_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    ExplicitEuler,
}

/// Exactly one of the three must be given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableauSource {
    pub gauss: Option<usize>,
    pub file: Option<PathBuf>,
    pub builtin: Option<Builtin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataName {
    Smooth,
    Algebraic,
    SingleMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub kind: DataName,
    pub r: Option<f64>,
    pub k0: Option<f64>,
    pub k: Option<i64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub kind: DataName,
    pub r: Option<f64>,
    pub k0: Option<f64>,
    pub k: Option<i64>,
    pub seed: Option<u64>,
    /// Direction `V` of the derivative study.
    pub direction: Option<DataSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    /// Largest wavenumber carried by the state.
    pub kmax: usize,
    pub h: Vec<f64>,
    /// Wavenumber cutoffs.
    pub m: Vec<usize>,
    pub t_final: f64,
    pub m_ref: Option<usize>,
    pub stage_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub reference_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyName {
    Temporal,
    Spatial,
    Coupling,
    Derivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    Spectral,
    Algebraic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyBlock {
    pub kind: StudyName,
    /// Spatial study: decay law expected from the data.
    pub expect: Option<Expect>,
    /// Spatial study with algebraic decay: fitted slope must be `<= -exponent + slack`.
    pub exponent: Option<u32>,
    /// Coupling study: tableau that must fail at the largest `(h, m)`.
    pub control: Option<TableauSource>,
    /// Derivative study: target order `P`.
    pub p_target: Option<u32>,
    /// Derivative study: horizon of the semiflow variant.
    pub semiflow_t: Option<f64>,
    pub slope_below: Option<f64>,
    pub slope_above: Option<f64>,
    pub slack: Option<f64>,
    pub dominance: Option<f64>,
    pub spectral_reduction: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

/// A parsed and validated config with its provenance.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    /// SHA-256 of the raw file bytes, lowercase hex.
    pub hash: String,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let raw = std::fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let text = std::str::from_utf8(&raw).context("config is not valid UTF-8")?;
    let config: ExperimentConfig = toml::from_str(text).with_context(|| format!("invalid config {}", path.display()))?;
    config.validate()?;
    let hash = format!("{:x}", Sha256::digest(&raw));
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, hash, base })
}

impl DataBlock {
    pub fn spec(&self) -> DataSpec {
        DataSpec {
            kind: self.kind,
            r: self.r,
            k0: self.k0,
            k: self.k,
            seed: self.seed,
        }
    }
}

impl DataSpec {
    fn validate(&self, what: &str) -> Result<()> {
        let (needs_r, needs_k0, needs_k) = match self.kind {
            DataName::Smooth => (false, true, false),
            DataName::Algebraic => (true, false, false),
            DataName::SingleMode => (false, false, true),
        };
        for (name, given, needed) in [
            ("r", self.r.is_some(), needs_r),
            ("k0", self.k0.is_some(), needs_k0),
            ("k", self.k.is_some(), needs_k),
        ] {
            ensure!(given == needed, "{what}: `{name}` is {} for kind {:?}", if needed { "required" } else { "not allowed" }, self.kind);
        }
        // phases are random for everything but a single mode
        ensure!(
            self.kind == DataName::SingleMode || self.seed.is_some(),
            "{what}: `seed` is required for randomized data"
        );
        Ok(())
    }

    pub fn kind(&self) -> DataKind {
        match self.kind {
            DataName::Smooth => DataKind::BandLimitedSmooth { k0: self.k0.unwrap() },
            DataName::Algebraic => DataKind::AlgebraicDecay { r: self.r.unwrap() },
            DataName::SingleMode => DataKind::SingleMode { k: self.k.unwrap() },
        }
    }

    pub fn build(&self, p: &Problem, grid: &Arc<ModeGrid>) -> Result<SpectralState> {
        Ok(make_initial_data(p, grid, self.kind(), self.seed.unwrap_or(0))?)
    }
}

impl TableauSource {
    fn validate(&self, what: &str) -> Result<()> {
        let given = [self.gauss.is_some(), self.file.is_some(), self.builtin.is_some()];
        ensure!(
            given.iter().filter(|g| **g).count() == 1,
            "{what}: give exactly one of `gauss`, `file`, `builtin`"
        );
        Ok(())
    }

    pub fn build(&self, base: &Path) -> Result<ButcherTableau> {
        if let Some(s) = self.gauss {
            return Ok(gauss_legendre(s)?);
        }
        if let Some(file) = &self.file {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read tableau {}", path.display()))?;
            return parse_tableau(&text).with_context(|| format!("tableau {}", path.display()));
        }
        match self.builtin {
            Some(Builtin::ExplicitEuler) => Ok(ButcherTableau::explicit_euler()),
            None => Err(anyhow!("empty tableau source")),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        ensure!(!g.h.is_empty(), "grid.h is empty");
        ensure!(!g.m.is_empty(), "grid.m is empty");
        ensure!(g.h.iter().all(|h| h.is_finite() && *h > 0.0), "grid.h values must be positive");
        ensure!(g.m.iter().all(|m| *m > 0), "grid.m values must be positive");
        ensure!(g.m.windows(2).all(|w| w[0] < w[1]), "grid.m must be increasing");
        ensure!(g.kmax > 0, "grid.kmax must be positive");
        ensure!(*g.m.last().unwrap() <= g.kmax, "grid.m exceeds grid.kmax = {}", g.kmax);
        if let Some(m_ref) = g.m_ref {
            ensure!(m_ref <= g.kmax, "grid.m_ref exceeds grid.kmax = {}", g.kmax);
            ensure!(m_ref > *g.m.last().unwrap(), "grid.m_ref must exceed every m");
        }
        ensure!(g.t_final.is_finite() && g.t_final > 0.0, "grid.t_final must be positive");
        for (name, tol) in [("stage_tol", g.stage_tol), ("reference_tol", g.reference_tol)] {
            if let Some(tol) = tol {
                ensure!(tol.is_finite() && tol > 0.0, "grid.{name} must be positive");
            }
        }
        if let Some(f) = self.problem.domain_factor {
            ensure!(f.is_finite() && f > 0.0, "problem.domain_factor must be positive");
        }
        self.tableau.validate("tableau")?;
        self.data.spec().validate("data")?;
        if let Some(d) = &self.data.direction {
            d.validate("data.direction")?;
        }
        if let Some(s) = &self.study {
            if let Some(c) = &s.control {
                c.validate("study.control")?;
            }
            if s.expect == Some(Expect::Algebraic) {
                ensure!(s.exponent.is_some(), "study.exponent is required for algebraic expectation");
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem> {
        let c = self.problem.coefficients.clone();
        let p = match self.problem.name {
            ProblemName::Wave => wave_problem(c)?,
            ProblemName::Nls => nls_problem(
                c.iter()
                    .enumerate()
                    .map(|(j, &coeff)| PotentialTerm {
                        coeff,
                        u_power: j as u32 + 2,
                        conj_power: j as u32 + 1,
                    })
                    .collect(),
            )?,
        };
        let p = match self.problem.dealias {
            Some(Dealias::None) => p.with_dealias(DealiasRule::None),
            Some(Dealias::TwoThirds) => p.with_dealias(DealiasRule::TwoThirds),
            Some(Dealias::ThreeHalves) | None => p.with_dealias(DealiasRule::ThreeHalvesPadding),
        };
        Ok(match self.problem.domain_factor {
            Some(f) => p.with_domain_factor(f),
            None => p,
        })
    }

    pub fn stage_options(&self) -> StageOptions {
        let mut o = StageOptions::default();
        if let Some(tol) = self.grid.stage_tol {
            o.tol = tol;
        }
        if let Some(n) = self.grid.max_iter {
            o.max_iter = n;
        }
        o
    }

    pub fn reference_options(&self) -> ReferenceOptions {
        let mut o = ReferenceOptions::default();
        if let Some(tol) = self.grid.reference_tol {
            o.target = tol;
        }
        o
    }

    pub fn study_options(&self, jobs: Option<usize>) -> StudyOptions {
        let mut o = StudyOptions {
            stage: self.stage_options(),
            reference: self.reference_options(),
            jobs,
            ..StudyOptions::default()
        };
        if let Some(s) = &self.study {
            let set = |slot: &mut f64, v: Option<f64>| {
                if let Some(v) = v {
                    *slot = v;
                }
            };
            set(&mut o.slope_below, s.slope_below);
            set(&mut o.slope_above, s.slope_above);
            set(&mut o.slack, s.slack);
            set(&mut o.dominance, s.dominance);
            set(&mut o.spectral_reduction, s.spectral_reduction);
        }
        o
    }

    pub fn spatial_expectation(&self) -> Result<SpatialExpectation> {
        let s = self.study.as_ref().ok_or_else(|| anyhow!("missing [study] block"))?;
        match s.expect {
            Some(Expect::Spectral) => Ok(SpatialExpectation::Spectral),
            Some(Expect::Algebraic) => Ok(SpatialExpectation::Algebraic {
                exponent: s.exponent.unwrap(),
            }),
            None => bail!("study.expect is required for a spatial study"),
        }
    }

    /// Single `(h, m)` pair for `run` and `oracle-check`.
    pub fn single_cell(&self) -> Result<(f64, usize)> {
        ensure!(
            self.grid.h.len() == 1 && self.grid.m.len() == 1,
            "this command takes exactly one h and one m"
        );
        Ok((self.grid.h[0], self.grid.m[0]))
    }

    /// Number of steps of size `h` that reach `t_final` exactly.
    pub fn steps(&self, h: f64) -> Result<usize> {
        let n = (self.grid.t_final / h).round();
        ensure!(
            n >= 1.0 && (n * h - self.grid.t_final).abs() <= 1e-9 * self.grid.t_final,
            "t_final = {} is not a multiple of h = {h}",
            self.grid.t_final
        );
        Ok(n as usize)
    }

    pub fn output_dir(&self) -> PathBuf {
        if self.output.dir.is_absolute() {
            return self.output.dir.clone();
        }
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(&self.output.dir),
            None => self.output.dir.clone(),
        }
    }
}
