//! Box geometry and the admissibility conditions that guarantee decay.
//!
//! Everything here reduces to the single domain constant `a`, the infimum of
//! the Dirichlet quotient over the sine basis. The box is admissible when
//! `2a > 3 + sqrt(5)`; the margin against that threshold and the data-smallness
//! margin are what the rest of the crate reports on.

use crate::error::{Error, Result};

/// Threshold that `2a` must exceed for the decay estimate to apply.
pub fn geometric_threshold() -> f64 {
    3.0 + 5.0_f64.sqrt()
}

/// Rectangular box `(0, L_1) x ... x (0, L_n)` with `2 <= n <= 7`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    lengths: Vec<f64>,
}

impl DomainSpec {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        let n = lengths.len();
        if !(2..=7).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "dimension must be between 2 and 7, got {n}"
            )));
        }
        if let Some(bad) = lengths.iter().find(|l| !l.is_finite() || **l <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "edge lengths must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { lengths })
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Volume normalization of one product-sine basis function: prod(L_i / 2).
    pub fn basis_norm_sq(&self) -> f64 {
        self.lengths.iter().map(|l| l / 2.0).product()
    }

    /// Scale every edge by `s`, keeping the aspect ratio.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.lengths.iter().map(|l| l * s).collect())
    }
}

/// Smallest eigenvalue of `-Laplace` on the box with Dirichlet sides:
/// `a = sum_i pi^2 / L_i^2`.
pub fn compute_a(domain: &DomainSpec) -> f64 {
    domain
        .lengths()
        .iter()
        .map(|l| (std::f64::consts::PI / l).powi(2))
        .sum()
}

/// Decay coefficient `theta(a) = 1 - 1/a - 1/sqrt(a)`.
///
/// Positive exactly when `2a` clears [`geometric_threshold`]; strictly
/// increasing in `a`.
pub fn compute_theta(a: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "theta is only defined for a > 0, got {a}"
        )));
    }
    Ok(1.0 - 1.0 / a - 1.0 / a.sqrt())
}

/// Outcome of checking a box (and optionally initial data) against the
/// decay hypotheses.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    /// Domain constant `a`.
    pub a: f64,
    /// Decay coefficient `theta(a)`.
    pub theta: f64,
    /// Whether the geometric condition `2a > 3 + sqrt(5)` holds.
    pub geometric_ok: bool,
    /// `2a - (3 + sqrt(5))`; positive iff `geometric_ok`.
    pub geometric_margin: f64,
    /// `theta - (2 c_s^2 n^3 / (a theta)) * sum_j |Lap u_j0|^2`.
    /// Present when initial norms were supplied and `theta > 0`.
    pub smallness_margin: Option<f64>,
    /// Same margin with the dimension factor pinned at `7^3`, the worst case
    /// over the supported dimensions. Reported alongside for reference.
    pub smallness_margin_worst_case: Option<f64>,
    /// Exponential rate `a^2 theta / 2` for the squared H2 norm. Present only
    /// when `theta > 0`.
    pub decay_rate: Option<f64>,
    /// Embedding constant used in the smallness margin.
    pub c_s_used: f64,
    /// Whether `a > 1`, the hypothesis behind the Sobolev-sum and
    /// sup-norm bounds.
    pub embedding_hypothesis_ok: bool,
}

/// Evaluate both admissibility conditions for a box.
///
/// `initial_h2_sq` are the squared norms `|Lap u_j0|^2` per component; pass
/// `None` to check the geometry alone. `c_s` is the sup-norm embedding
/// constant (see [`estimate_embedding_constant`]).
pub fn analyze_domain(
    domain: &DomainSpec,
    initial_h2_sq: Option<&[f64]>,
    c_s: f64,
) -> Result<AdmissibilityReport> {
    if !c_s.is_finite() || c_s <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "embedding constant must be positive, got {c_s}"
        )));
    }
    let n = domain.dim();
    if let Some(norms) = initial_h2_sq {
        if norms.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} initial norms, got {}",
                norms.len()
            )));
        }
        if let Some(bad) = norms.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial squared norms must be finite and nonnegative, got {bad}"
            )));
        }
    }

    let a = compute_a(domain);
    let theta = compute_theta(a)?;
    let geometric_margin = 2.0 * a - geometric_threshold();
    let geometric_ok = geometric_margin > 0.0;

    let margin_with_factor = |dim_factor: f64, norms: &[f64]| -> f64 {
        let total: f64 = norms.iter().sum();
        theta - (2.0 * c_s * c_s * dim_factor / (a * theta)) * total
    };

    let (smallness_margin, smallness_margin_worst_case) = match (initial_h2_sq, theta > 0.0) {
        (Some(norms), true) => (
            Some(margin_with_factor((n as f64).powi(3), norms)),
            Some(margin_with_factor(343.0, norms)),
        ),
        _ => (None, None),
    };

    let decay_rate = (theta > 0.0).then(|| a * a * theta / 2.0);

    Ok(AdmissibilityReport {
        a,
        theta,
        geometric_ok,
        geometric_margin,
        smallness_margin,
        smallness_margin_worst_case,
        decay_rate,
        c_s_used: c_s,
        embedding_hypothesis_ok: a > 1.0,
    })
}

/// Estimate the sup-norm embedding constant `c_s` with
/// `sup |f| <= c_s |Lap^2 f|` over random truncated sine fields.
///
/// The lowest basis mode is always included as a deterministic candidate:
/// its sup is exactly 1 and its fourth-order norm is `mu^2 sqrt(prod L_i /
/// 2)` with `mu` minimal, so it floors the estimate in closed form. On top
/// of that the function draws `samples` random coefficient sets (seeded, so
/// the estimate is deterministic and non-decreasing in `samples`),
/// normalizes each by its fourth-order norm, and keeps the largest grid sup
/// observed. Coefficients are damped by the biharmonic symbol so that every
/// mode contributes at the same scale to the denominator; this keeps the
/// sampler close to the maximizing low-mode region.
pub fn estimate_embedding_constant(
    domain: &DomainSpec,
    modes_per_dim: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    use ndarray::Dimension;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    if modes_per_dim == 0 {
        return Err(Error::InvalidParameter(
            "modes_per_dim must be at least 1".into(),
        ));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }

    let n = domain.dim();
    // Even node count per dimension so box centers (where symmetric fields
    // peak) are on the evaluation grid.
    let eval_points = vec![2 * modes_per_dim + 2; n];
    let grid = crate::basis::ModeGrid::new(domain.clone(), vec![modes_per_dim; n], eval_points)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mu_min = grid.mode_symbol_at(&vec![0; n]);
    let mut best = 1.0 / (mu_min * mu_min * domain.basis_norm_sq().sqrt());
    for _ in 0..samples {
        let mut coeffs = ndarray::ArrayD::zeros(ndarray::IxDyn(grid.coeff_shape()));
        for (idx, c) in coeffs.indexed_iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let mu = grid.mode_symbol_at(idx.slice());
            *c = z / (mu * mu);
        }
        let field = crate::basis::SpectralField::new(grid.clone(), coeffs)?;
        let norms = crate::basis::sobolev_norms(&field);
        if norms.bilap_sq <= 0.0 {
            continue;
        }
        let phys = crate::basis::synthesize(&field);
        let sup = phys
            .values()
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        best = best.max(sup / norms.bilap_sq.sqrt());
    }
    Ok(best)
}
