//! Parameter sweep over box scale and initial amplitude.
//!
//! Each grid point scales every box length by one factor, swaps in one
//! amplitude, runs the configured solver, and classifies the outcome. Points
//! are independent and run in parallel; rows come back in lexicographic
//! (scale, amplitude) order regardless of scheduling, and every point is
//! seeded identically, so the table is deterministic.

use rayon::prelude::*;

use crate::config::{Range3, RunConfig};
use crate::diagnostics::fit_decay_default;
use crate::error::{Error, Result};
use crate::geometry::{analyze_domain, estimate_embedding_constant};
use crate::solver::{self, InitialData, RunOutcome};

/// Environment variable capping the sweep's worker-thread count.
pub const THREADS_ENV: &str = "KSZK_THREADS";

/// A validated sweep: base configuration plus the two axes.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub scale: Range3,
    pub amplitude: Range3,
}

impl SweepSpec {
    /// Pull the sweep axes out of a parsed config; the config must carry
    /// `sweep.scale` and `sweep.amplitude`.
    pub fn from_config(base: RunConfig) -> Result<Self> {
        let ranges = base.sweep.ok_or_else(|| {
            Error::Config("sweep needs sweep.scale and sweep.amplitude keys".into())
        })?;
        if ranges.scale.min <= 0.0 {
            return Err(Error::Config(format!(
                "sweep.scale must be positive, got minimum {}",
                ranges.scale.min
            )));
        }
        Ok(Self {
            base,
            scale: ranges.scale,
            amplitude: ranges.amplitude,
        })
    }
}

/// How one sweep point ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Decayed,
    Grew,
    Blowup,
}

impl PointClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointClass::Decayed => "decayed",
            PointClass::Grew => "grew",
            PointClass::Blowup => "blowup",
        }
    }
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scale: f64,
    pub amplitude: f64,
    pub a: f64,
    pub theta: f64,
    pub geometric_ok: bool,
    /// Smallness margin of the decay criterion at this point's initial data (absent
    /// when the geometry already fails).
    pub smallness_margin: Option<f64>,
    /// Log-linear energy rate over the recorded series; absent when the fit
    /// is impossible (e.g. energy at roundoff).
    pub fitted_rate: Option<f64>,
    pub class: Option<PointClass>,
    /// Failure message when the point could not be evaluated; the sweep
    /// continues past such points.
    pub error: Option<String>,
}

fn run_point(base: &RunConfig, scale: f64, amplitude: f64) -> SweepRow {
    let mut row = SweepRow {
        scale,
        amplitude,
        a: f64::NAN,
        theta: f64::NAN,
        geometric_ok: false,
        smallness_margin: None,
        fitted_rate: None,
        class: None,
        error: None,
    };
    let fail = |mut row: SweepRow, e: Error| {
        row.error = Some(e.to_string());
        row
    };

    let domain = match base.domain.scaled(scale) {
        Ok(d) => d,
        Err(e) => return fail(row, e),
    };
    let grid = match crate::basis::ModeGrid::new(
        domain.clone(),
        base.modes.clone(),
        base.grid_points.clone(),
    ) {
        Ok(g) => g,
        Err(e) => return fail(row, e),
    };
    let data = InitialData {
        amplitude,
        ..base.initial.clone()
    };

    let initial = match solver::initial_from_potential(&grid, &data) {
        Ok(s) => s,
        Err(e) => return fail(row, e),
    };
    let c_s = match base.c_s {
        Some(cs) => Ok(cs),
        // Cheap per-point estimate; deterministic via the config seed.
        None => estimate_embedding_constant(&domain, 8, 64, base.initial.seed),
    };
    let c_s = match c_s {
        Ok(v) => v,
        Err(e) => return fail(row, e),
    };
    let report = match analyze_domain(&domain, Some(&initial.h2_sq_per_component()), c_s) {
        Ok(r) => r,
        Err(e) => return fail(row, e),
    };
    row.a = report.a;
    row.theta = report.theta;
    row.geometric_ok = report.geometric_ok;
    row.smallness_margin = report.smallness_margin;

    let result = match solver::run(&grid, &data, &base.solver) {
        Ok(r) => r,
        Err(e) => return fail(row, e),
    };
    row.fitted_rate = fit_decay_default(&result.series).ok().map(|f| f.rate);
    row.class = Some(match result.outcome {
        RunOutcome::BlowUp { .. } => PointClass::Blowup,
        RunOutcome::Completed => match row.fitted_rate {
            Some(rate) if rate > 0.0 => PointClass::Decayed,
            Some(_) => PointClass::Grew,
            // Fit unavailable (e.g. zero initial data or energy at
            // roundoff): compare endpoint energies directly.
            None => {
                let e0 = result.series.first().map(|r| r.h2_sq_total).unwrap_or(0.0);
                let e1 = result.series.last().map(|r| r.h2_sq_total).unwrap_or(0.0);
                if e1 <= e0 {
                    PointClass::Decayed
                } else {
                    PointClass::Grew
                }
            }
        },
    });
    row
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&k| k >= 1)
}

/// Run every (scale, amplitude) point and return rows in lexicographic
/// order. Honors [`THREADS_ENV`] as an upper bound on parallelism.
pub fn run_sweep(spec: &SweepSpec) -> Vec<SweepRow> {
    let mut points = Vec::new();
    for &s in &spec.scale.points() {
        for &a in &spec.amplitude.points() {
            points.push((s, a));
        }
    }
    let body = || {
        points
            .par_iter()
            .map(|&(s, a)| run_point(&spec.base, s, a))
            .collect::<Vec<_>>()
    };
    match thread_cap() {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(body),
            Err(_) => body(),
        },
        None => body(),
    }
}
