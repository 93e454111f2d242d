//! Turning runs into verdicts.
//!
//! This module owns the recorded time series, the decay-rate fit, the
//! envelope check against the predicted bound, the dissipation-integral
//! tracker, standalone comparison-ODE oracles, and the
//! random-field inequality suite.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{lap_dx1_sq, sobolev_norms, ModeGrid, SpectralField};
use crate::error::{Error, Result};
use crate::geometry::{compute_a, AdmissibilityReport};

/// One recorded instant of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord {
    pub t: f64,
    /// `|Lap u_j|^2` for each component.
    pub h2_sq_per_component: Vec<f64>,
    pub h2_sq_total: f64,
    /// `sum_j |Lap^2 u_j|^2`.
    pub bilap_sq_total: f64,
    pub curl_residual: f64,
    /// `E(0) exp(-a^2 theta t / 2)`, the predicted upper envelope.
    pub bound_envelope: f64,
}

/// Result of the log-linear decay fit: the `lambda` of the best `A e^{-lambda t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Least-squares fit of `log(h2_sq_total)` against `t` over the records whose
/// times fall in the inclusive window. Requires at least three strictly
/// positive records; energies at or below zero signal the series has decayed
/// to roundoff, and the caller should narrow the window.
pub fn fit_decay(series: &[TimeSeriesRecord], window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    if !(t0.is_finite() && t1.is_finite() && t0 <= t1) {
        return Err(Error::Fit(format!("invalid fit window [{t0}, {t1}]")));
    }
    let eps = 1e-12 * (1.0 + t1.abs());
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for r in series {
        if r.t < t0 - eps || r.t > t1 + eps {
            continue;
        }
        if r.h2_sq_total <= 0.0 {
            return Err(Error::Fit(format!(
                "non-positive energy {} at t = {} in fit window; narrow the window",
                r.h2_sq_total, r.t
            )));
        }
        ts.push(r.t);
        logs.push(r.h2_sq_total.ln());
    }
    let m = ts.len();
    if m < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 records in the fit window, found {m}"
        )));
    }
    let tm: f64 = ts.iter().sum::<f64>() / m as f64;
    let lm: f64 = logs.iter().sum::<f64>() / m as f64;
    let mut stt = 0.0;
    let mut stl = 0.0;
    for (t, l) in ts.iter().zip(&logs) {
        stt += (t - tm) * (t - tm);
        stl += (t - tm) * (l - lm);
    }
    if stt <= 0.0 {
        return Err(Error::Fit("all records in window share one time".into()));
    }
    let slope = stl / stt;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (t, l) in ts.iter().zip(&logs) {
        let pred = lm + slope * (t - tm);
        ss_res += (l - pred) * (l - pred);
        ss_tot += (l - lm) * (l - lm);
    }
    // A constant series is fit perfectly by its own mean.
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        window,
    })
}

/// [`fit_decay`] over the default window: drop the first 10% of records to
/// skip the initial transient, keep everything after.
pub fn fit_decay_default(series: &[TimeSeriesRecord]) -> Result<DecayFit> {
    if series.is_empty() {
        return Err(Error::Fit("empty series".into()));
    }
    let skip = series.len() / 10;
    let t0 = series[skip].t;
    let t1 = series[series.len() - 1].t;
    fit_decay(series, (t0, t1))
}

/// Outcome of checking a series against its recorded decay envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundVerdict {
    /// The decay envelope needs `theta > 0`; on a domain that fails the
    /// geometric condition there is nothing to check.
    NotApplicable { theta: f64 },
    Checked {
        holds: bool,
        /// Largest `h2_sq_total / bound_envelope - 1` over the series;
        /// non-positive when the bound holds with room to spare.
        worst_margin: f64,
        /// Time of the record attaining `worst_margin`.
        worst_t: f64,
    },
}

impl BoundVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, BoundVerdict::Checked { holds: true, .. })
    }
}

/// Compare every record's energy against its envelope with relative slack
/// `tol`.
pub fn check_decay_bound(
    series: &[TimeSeriesRecord],
    report: &AdmissibilityReport,
    tol: f64,
) -> Result<BoundVerdict> {
    if series.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot check an empty series".into(),
        ));
    }
    if report.theta <= 0.0 {
        return Ok(BoundVerdict::NotApplicable {
            theta: report.theta,
        });
    }
    let mut worst_margin = f64::NEG_INFINITY;
    let mut worst_t = series[0].t;
    let mut holds = true;
    for r in series {
        let margin = if r.bound_envelope > 0.0 {
            r.h2_sq_total / r.bound_envelope - 1.0
        } else if r.h2_sq_total <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if margin > worst_margin {
            worst_margin = margin;
            worst_t = r.t;
        }
        if margin > tol {
            holds = false;
        }
    }
    Ok(BoundVerdict::Checked {
        holds,
        worst_margin,
        worst_t,
    })
}

/// Trapezoidal integral of `bilap_sq_total` over the recorded times. Fewer
/// than two records integrate to zero.
pub fn dissipation_integral(series: &[TimeSeriesRecord]) -> f64 {
    series
        .windows(2)
        .map(|w| 0.5 * (w[0].bilap_sq_total + w[1].bilap_sq_total) * (w[1].t - w[0].t))
        .sum()
}

/// Verdict of the comparison-ODE oracle for `f' + (alpha - k f^n) f <= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeTrapVerdict {
    /// Whether the trapping condition `alpha - k f0^n > 0` holds.
    pub hypothesis_ok: bool,
    /// Whether the integrated extremal solution stayed strictly below `f0`.
    pub conclusion_ok: bool,
    /// Minimum of `f0 - f(t)` over all steps after the start.
    pub min_gap: f64,
    /// `f(t_end)` as integrated (capped if the solution escaped).
    pub final_value: f64,
}

/// Integrate the extremal ODE `f' = -(alpha - k f^n) f` with classical RK4
/// and report whether the trapped solution stays below its initial value.
///
/// A failed hypothesis is a reported verdict, not an error; the integration
/// still runs (capped at 1e12 to avoid overflow) so the caller can see what
/// the unconstrained solution does.
pub fn ode_trap_oracle(
    alpha: f64,
    k: f64,
    n_exp: u32,
    f0: f64,
    t_end: f64,
    dt: f64,
) -> OdeTrapVerdict {
    let hypothesis_ok = alpha - k * f0.powi(n_exp as i32) > 0.0;
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let deriv = |f: f64| -(alpha - k * f.powi(n_exp as i32)) * f;

    let mut f = f0;
    let mut min_gap = f64::INFINITY;
    let mut conclusion_ok = true;
    for _ in 0..steps {
        let k1 = deriv(f);
        let k2 = deriv(f + 0.5 * h * k1);
        let k3 = deriv(f + 0.5 * h * k2);
        let k4 = deriv(f + h * k3);
        f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !f.is_finite() || f.abs() > 1e12 {
            conclusion_ok = false;
            min_gap = f64::NEG_INFINITY;
            break;
        }
        min_gap = min_gap.min(f0 - f);
        if f >= f0 {
            conclusion_ok = false;
        }
    }
    OdeTrapVerdict {
        hypothesis_ok,
        conclusion_ok,
        min_gap,
        final_value: f,
    }
}

/// Verdict of the differential-inequality oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallVerdict {
    pub bound_holds: bool,
    /// Largest `(u - bound) / max(|bound|, tiny)` over the steps; negative
    /// when the bound holds with slack everywhere.
    pub max_violation: f64,
}

/// Cross-check the integrating-factor bound for `u' = a(t) u + b(t)`.
///
/// The equality-case ODE is integrated with classical RK4; independently,
/// the bound `u0 e^{A(t)} + int_0^t e^{A(t) - A(s)} b(s) ds` with
/// `A(t) = int_0^t a` is evaluated by composite Simpson quadrature on a
/// half-step grid. The verdict accepts the bound with 1e-8 relative slack so
/// the two discretizations cannot disagree spuriously.
pub fn gronwall_oracle(
    a_fn: impl Fn(f64) -> f64,
    b_fn: impl Fn(f64) -> f64,
    u0: f64,
    t_end: f64,
    dt: f64,
) -> GronwallVerdict {
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;

    // A(t) on the half-step grid via Simpson over each half step (quarter
    // points as midpoints).
    let mut a_cum = vec![0.0f64; 2 * steps + 1];
    for j in 0..2 * steps {
        let x = j as f64 * h / 2.0;
        let d = h / 2.0;
        a_cum[j + 1] =
            a_cum[j] + d / 6.0 * (a_fn(x) + 4.0 * a_fn(x + 0.5 * d) + a_fn(x + d));
    }

    let g = |j: usize| (-a_cum[j]).exp() * b_fn(j as f64 * h / 2.0);

    let mut u = u0;
    let mut z = 0.0; // int_0^t e^{-A(s)} b(s) ds
    let mut max_violation = f64::NEG_INFINITY;
    let mut bound_holds = true;
    let mut check = |u: f64, bound: f64| {
        let scale = bound.abs().max(1e-300);
        let v = (u - bound) / scale;
        if v > max_violation {
            max_violation = v;
        }
        if u - bound > 1e-8 * scale {
            bound_holds = false;
        }
    };
    check(u, u0);
    for i in 0..steps {
        let t = i as f64 * h;
        let rhs = |t: f64, u: f64| a_fn(t) * u + b_fn(t);
        let k1 = rhs(t, u);
        let k2 = rhs(t + 0.5 * h, u + 0.5 * h * k1);
        let k3 = rhs(t + 0.5 * h, u + 0.5 * h * k2);
        let k4 = rhs(t + h, u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        z += h / 6.0 * (g(2 * i) + 4.0 * g(2 * i + 1) + g(2 * i + 2));
        let bound = a_cum[2 * i + 2].exp() * (u0 + z);
        check(u, bound);
    }
    GronwallVerdict {
        bound_holds,
        max_violation,
    }
}

/// Relative residual of one functional inequality on one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityResidual {
    pub name: &'static str,
    /// The two norm-equivalence bounds require `a > 1`; they are evaluated
    /// regardless but flagged inapplicable below that threshold.
    pub applicable: bool,
    /// `(rhs - lhs) / rhs`; the inequality holds when this is nonnegative
    /// (up to roundoff).
    pub residual: f64,
}

/// Names of the seven checked inequalities, in report order.
pub const INEQUALITY_NAMES: [&str; 7] = [
    "spectral_gap_l2_grad",
    "spectral_gap_l2_lap",
    "spectral_gap_grad_lap",
    "spectral_gap_lap_bilap",
    "spectral_gap_lapdx1_bilap",
    "h2_norm_equivalence",
    "h4_norm_equivalence",
];

/// Evaluate all seven inequalities on a single field.
///
/// The first chain bounds lower norms by higher ones through the spectral
/// gap `a` of the negative Laplacian; the second chain does the same at the
/// biharmonic level (including the dispersive combination `(Lap f)_{x_1}`);
/// the last two are the norm equivalences `|f|_{H^2}^2 <= 3 |Lap f|^2` and
/// `|f|_{H^4}^2 <= 5 |Lap^2 f|^2`, valid when `a > 1`.
pub fn evaluate_inequalities(field: &SpectralField) -> Vec<InequalityResidual> {
    let a = compute_a(field.grid().domain());
    let norms = sobolev_norms(field);
    let lapdx1 = lap_dx1_sq(field);
    let equivalence_ok = a > 1.0;

    let rel = |lhs: f64, rhs: f64| {
        if rhs > 0.0 {
            (rhs - lhs) / rhs
        } else {
            0.0
        }
    };
    let pairs: [(& 'static str, f64, f64, bool); 7] = [
        ("spectral_gap_l2_grad", a * norms.l2_sq, norms.grad_sq, true),
        ("spectral_gap_l2_lap", a * a * norms.l2_sq, norms.lap_sq, true),
        ("spectral_gap_grad_lap", a * norms.grad_sq, norms.lap_sq, true),
        (
            "spectral_gap_lap_bilap",
            a * a * norms.lap_sq,
            norms.bilap_sq,
            true,
        ),
        (
            "spectral_gap_lapdx1_bilap",
            a * lapdx1,
            norms.bilap_sq,
            true,
        ),
        (
            "h2_norm_equivalence",
            norms.l2_sq + norms.grad_sq + norms.lap_sq,
            3.0 * norms.lap_sq,
            equivalence_ok,
        ),
        (
            "h4_norm_equivalence",
            norms.l2_sq + norms.grad_sq + norms.lap_sq + norms.gradlap_sq + norms.bilap_sq,
            5.0 * norms.bilap_sq,
            equivalence_ok,
        ),
    ];
    pairs
        .into_iter()
        .map(|(name, lhs, rhs, applicable)| InequalityResidual {
            name,
            applicable,
            residual: rel(lhs, rhs),
        })
        .collect()
}

/// Aggregate of one inequality over a batch of random fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub applicable: bool,
    pub samples: usize,
    /// Samples whose residual fell below `-1e-10`.
    pub failures: usize,
    /// Smallest residual seen (infinite when nothing was evaluated).
    pub worst_residual: f64,
}

/// Suite verdict over random spectral fields.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalitySuiteReport {
    /// Spectral gap of the domain the fields were drawn on.
    pub a: f64,
    pub checks: Vec<InequalityCheck>,
}

impl InequalitySuiteReport {
    /// True when every applicable inequality held for every sample.
    pub fn all_passed(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.applicable)
            .all(|c| c.failures == 0)
    }
}

/// Tolerance below which an inequality residual counts as a failure.
pub const INEQUALITY_TOLERANCE: f64 = 1e-10;

/// Draw `samples` random spectral fields (independent standard-normal
/// coefficients, reproducible from `seed`) and evaluate all seven
/// inequalities on each.
pub fn verify_inequality_suite(
    grid: &ModeGrid,
    samples: usize,
    seed: u64,
) -> Result<InequalitySuiteReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "inequality suite needs at least one sample".into(),
        ));
    }
    let a = compute_a(grid.domain());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut checks: Vec<InequalityCheck> = INEQUALITY_NAMES
        .iter()
        .map(|&name| InequalityCheck {
            name,
            applicable: true,
            samples: 0,
            failures: 0,
            worst_residual: f64::INFINITY,
        })
        .collect();

    for _ in 0..samples {
        let mut field = SpectralField::zeros(grid.clone());
        for c in field.coeffs_mut().iter_mut() {
            *c = StandardNormal.sample(&mut rng);
        }
        for (check, res) in checks.iter_mut().zip(evaluate_inequalities(&field)) {
            check.applicable = res.applicable;
            if !res.applicable {
                continue;
            }
            check.samples += 1;
            if res.residual < -INEQUALITY_TOLERANCE {
                check.failures += 1;
            }
            if res.residual < check.worst_residual {
                check.worst_residual = res.residual;
            }
        }
    }
    Ok(InequalitySuiteReport { a, checks })
}
