//! Convergence studies and order fitting.
//!
//! Every study returns a [`StudyReport`]: the raw `(h, m)` cells, the fitted
//! slopes with their expected windows, named pass/fail checks and a single
//! [`StudyVerdict`]. Cells are computed in parallel and addressed by index,
//! so a report does not depend on thread count or completion order.

mod fit;
mod monitor;
mod studies;

pub use fit::{fit_order, noise_floor, OrderFit};
pub use monitor::{invariant_monitor, DriftSummary, DriftThresholds};
pub use studies::{
    coupling_study, derivative_projection_study, spatial_order_study, temporal_order_study,
    SpatialExpectation, StudyOptions,
};

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StudyKind {
    Temporal,
    Spatial,
    Coupling,
    DerivativeProjection,
}

impl StudyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyKind::Temporal => "temporal",
            StudyKind::Spatial => "spatial",
            StudyKind::Coupling => "coupling",
            StudyKind::DerivativeProjection => "derivative_projection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StudyVerdict {
    Pass,
    Fail,
    /// Not enough usable cells to decide (dominance filter, unreliable
    /// derivatives, too few points above the floor).
    Inconclusive,
    /// Every error sits at the noise floor; there is no slope to report.
    Floor,
}

impl StudyVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyVerdict::Pass => "pass",
            StudyVerdict::Fail => "fail",
            StudyVerdict::Inconclusive => "inconclusive",
            StudyVerdict::Floor => "floor",
        }
    }

    fn combine(self, other: Self) -> Self {
        use StudyVerdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            (Pass, _) | (_, Pass) => Pass,
            (Floor, Floor) => Floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    /// At or below the noise floor; excluded from fits.
    Floor,
    /// Excluded by the dominance filter: the competing error source is not
    /// at least the dominance factor below the measured error.
    Dominated,
    /// Finite-difference derivative failed its reliability check.
    Unreliable,
    Failed(&'static str),
    /// A control run failed, as it should.
    ExpectedFailure(&'static str),
}

impl CellStatus {
    pub fn label(&self) -> String {
        match self {
            CellStatus::Ok => "ok".into(),
            CellStatus::Floor => "floor".into(),
            CellStatus::Dominated => "dominated".into(),
            CellStatus::Unreliable => "unreliable".into(),
            CellStatus::Failed(kind) => format!("failed:{kind}"),
            CellStatus::ExpectedFailure(kind) => format!("expected-failure:{kind}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Series tag written to the `study` column.
    pub series: String,
    pub tableau: String,
    pub h: f64,
    /// Wavenumber cutoff; the projection threshold is `threshold`.
    pub m: usize,
    pub threshold: f64,
    pub norm_index: u32,
    /// `None` exactly when the run failed.
    pub error: Option<f64>,
    /// Estimate of the error source the study is not measuring.
    pub competing: Option<f64>,
    pub iterations: Option<usize>,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitEntry {
    pub label: String,
    /// Grid axis of the fit (`h` or the threshold `m`).
    pub axis: &'static str,
    pub fit: Option<OrderFit>,
    /// Accepted slope interval; `None` for informational fits.
    pub window: Option<(f64, f64)>,
    pub verdict: StudyVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub problem: String,
    pub tableau: String,
    pub h_values: Vec<f64>,
    pub m_values: Vec<usize>,
    pub cells: Vec<Cell>,
    pub fits: Vec<FitEntry>,
    pub checks: Vec<Check>,
    pub verdict: StudyVerdict,
    pub notes: Vec<String>,
    pub metadata: Vec<(String, String)>,
}

pub const CSV_HEADER: &str = "study,problem,tableau,h,m,norm_index,error,status";

impl StudyReport {
    fn new(kind: StudyKind, problem: String, tableau: String) -> Self {
        Self {
            kind,
            problem,
            tableau,
            h_values: Vec::new(),
            m_values: Vec::new(),
            cells: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            verdict: StudyVerdict::Inconclusive,
            notes: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    fn check(&mut self, name: impl Into<String>, value: f64, limit: f64, passed: bool) {
        self.checks.push(Check {
            name: name.into(),
            value,
            limit,
            passed,
        });
    }

    /// Fit entries whose label starts with `prefix`.
    pub fn fits_for<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a FitEntry> + 'a {
        self.fits.iter().filter(move |f| f.label.starts_with(prefix))
    }

    pub fn slope(&self, label: &str) -> Option<f64> {
        self.fits
            .iter()
            .find(|f| f.label == label)
            .and_then(|f| f.fit.map(|fit| fit.slope))
    }

    pub fn failed_cells(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.status, CellStatus::Failed(_)))
            .count()
    }

    /// One row per cell under [`CSV_HEADER`]. Failed cells leave `error`
    /// empty and carry the cause in `status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let error = c.error.map(|e| format!("{e:.16e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:e},{},{},{},{}",
                c.series,
                self.problem,
                c.tableau,
                c.h,
                c.m,
                c.norm_index,
                error,
                c.status.label()
            );
        }
        out
    }

    /// The slopes and verdicts side file; also used for terminal output.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "study {}", self.kind.as_str());
        let _ = writeln!(out, "problem {}", self.problem);
        let _ = writeln!(out, "tableau {}", self.tableau);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for f in &self.fits {
            let window = f
                .window
                .map(|(lo, hi)| format!("[{lo:.2}, {hi:.2}]"))
                .unwrap_or_else(|| "-".into());
            match f.fit {
                Some(fit) => {
                    let _ = writeln!(
                        out,
                        "fit {} axis={} slope={:.4} residual={:.3e} points={} window={} {}",
                        f.label,
                        f.axis,
                        fit.slope,
                        fit.residual,
                        fit.used,
                        window,
                        f.verdict.as_str()
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "fit {} axis={} slope=- window={} {}",
                        f.label,
                        f.axis,
                        window,
                        f.verdict.as_str()
                    );
                }
            }
        }
        for c in &self.checks {
            let _ = writeln!(
                out,
                "check {} value={:.4e} limit={:.4e} {}",
                c.name,
                c.value,
                c.limit,
                if c.passed { "pass" } else { "fail" }
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note {n}");
        }
        let _ = writeln!(out, "verdict {}", self.verdict.as_str());
        out
    }
}
