//! Time integration of the gradient system in the sine basis.
//!
//! Per mode the equation reads `dc_k/dt = -(mu_k^2 - mu_k) c_k - [Z c]_k -
//! N_k(u)`: a stiff diagonal from the bilaplacian and Laplacian, a dispersive
//! coupling `Z` along the first dimension from `(Lap u)_{x_1}`, and the
//! quadratic gradient nonlinearity. The diagonal and `Z` are treated
//! implicitly (one dense solve per transverse line), the nonlinearity
//! explicitly.

use ndarray::{Array2, ArrayD, Axis, Dimension, IxDyn, Zip};
use std::f64::consts::PI;

use crate::basis::{
    self, cos_to_sine_projection_1d, derivative_coupling_1d, sobolev_norms, ModeGrid,
    PhysicalField, SpectralField,
};
use crate::diagnostics::TimeSeriesRecord;
use crate::error::{Error, Result};
use crate::geometry::{compute_a, compute_theta};

/// Energy level at which a run is declared blown up.
pub const ENERGY_ABORT_THRESHOLD: f64 = 1e12;

/// Time stepping scheme for the stiff linear part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Implicit Euler on the linear part, explicit Euler on the nonlinearity.
    Imex1,
    /// Crank-Nicolson on the linear part, two-step Adams-Bashforth on the
    /// nonlinearity; the first step keeps Crank-Nicolson and treats the
    /// nonlinearity with explicit Euler to seed the history.
    Cnab2,
}

/// Switches and step sizes for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Include the dispersive `(Lap u)_{x_1}` coupling.
    pub zk: bool,
    /// Include the quadratic nonlinearity.
    pub nonlinear: bool,
    /// Zero-pad the product grid to the 3/2 rule before squaring.
    pub dealias: bool,
    /// Keep every `record_every`-th step in the time series.
    pub record_every: usize,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !self.t_end.is_finite() || self.t_end < self.dt {
            return Err(Error::InvalidParameter(format!(
                "t_end must be at least dt, got t_end = {} and dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter(
                "record_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Families of initial states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    /// Gradient of the smooth bump potential `prod_i sin^2(pi x_i / L_i)`.
    PotentialBump,
    /// One basis mode `w_k` in every component, weighted by the gradient
    /// pattern `k_j pi / L_j`. Deliberately not a gradient field; this is the
    /// probe for dispersion tests.
    SingleMode,
    /// Gradient of a random combination of `prod_i sin^2(k_i pi x_i / L_i)`
    /// potentials with decaying weights.
    RandomCurlFree,
}

/// Recipe for building the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub kind: InitialKind,
    pub amplitude: f64,
    /// Mode multi-index for [`InitialKind::SingleMode`] (and the potential
    /// family index otherwise). Defaults to all ones.
    pub mode: Option<Vec<usize>>,
    pub seed: u64,
}

/// The unknown: one spectral field per space dimension, plus the clock.
#[derive(Debug, Clone)]
pub struct VectorState {
    components: Vec<SpectralField>,
    time: f64,
}

impl VectorState {
    pub fn new(components: Vec<SpectralField>, time: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::ShapeMismatch("state has no components".into()));
        }
        let grid = components[0].grid().clone();
        if components.len() != grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} components for a {}-dimensional box",
                components.len(),
                grid.dim()
            )));
        }
        if components.iter().any(|c| *c.grid() != grid) {
            return Err(Error::ShapeMismatch(
                "all components must share one grid".into(),
            ));
        }
        Ok(Self { components, time })
    }

    pub fn zeros(grid: ModeGrid) -> Self {
        let components = (0..grid.dim())
            .map(|_| SpectralField::zeros(grid.clone()))
            .collect();
        Self {
            components,
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &ModeGrid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[SpectralField] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &SpectralField {
        &self.components[j]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut SpectralField {
        &mut self.components[j]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Squared H2 seminorm `|Lap u_j|^2` per component.
    pub fn h2_sq_per_component(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| sobolev_norms(c).lap_sq)
            .collect()
    }

    /// `sum_j |Lap u_j|^2`, the decaying energy.
    pub fn h2_sq_total(&self) -> f64 {
        self.h2_sq_per_component().iter().sum()
    }

    /// `sum_j |Lap^2 u_j|^2`, the dissipation density.
    pub fn bilap_sq_total(&self) -> f64 {
        self.components
            .iter()
            .map(|c| sobolev_norms(c).bilap_sq)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.coeffs().iter().all(|v| v.is_finite()))
    }
}

/// Build the initial state for a grid: evaluate the potential gradient on the
/// collocation nodes (or place the single mode directly) and project into the
/// truncated sine basis.
pub fn initial_from_potential(grid: &ModeGrid, data: &InitialData) -> Result<VectorState> {
    if !data.amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "amplitude must be finite, got {}",
            data.amplitude
        )));
    }
    let n = grid.dim();
    let mode = match &data.mode {
        Some(k) => {
            if k.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "mode index has {} entries for a {n}-dimensional box",
                    k.len()
                )));
            }
            if k.iter().any(|&ki| ki < 1) {
                return Err(Error::InvalidParameter(
                    "mode indices start at 1 in every dimension".into(),
                ));
            }
            k.clone()
        }
        None => vec![1; n],
    };

    match data.kind {
        InitialKind::SingleMode => {
            for (d, (&ki, &nd)) in mode.iter().zip(grid.modes()).enumerate() {
                if ki > nd {
                    return Err(Error::InvalidParameter(format!(
                        "single mode index {ki} exceeds truncation {nd} in dimension {d}"
                    )));
                }
            }
            let mut state = VectorState::zeros(grid.clone());
            let idx: Vec<usize> = mode.iter().map(|k| k - 1).collect();
            for j in 0..n {
                let weight = mode[j] as f64 * PI / grid.domain().lengths()[j];
                state.components[j].coeffs_mut()[IxDyn(&idx)] = data.amplitude * weight;
            }
            Ok(state)
        }
        InitialKind::PotentialBump => {
            let terms = vec![(mode, data.amplitude)];
            gradient_state_from_terms(grid, &terms)
        }
        InitialKind::RandomCurlFree => {
            use rand::SeedableRng;
            use rand_distr::{Distribution, StandardNormal};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(data.seed);
            let per_dim: Vec<usize> = grid.modes().iter().map(|&nd| nd.min(3)).collect();
            let mut terms = Vec::new();
            let mut k = vec![1usize; n];
            loop {
                let z: f64 = StandardNormal.sample(&mut rng);
                let damp = 0.5f64.powi(k.iter().map(|ki| ki - 1).sum::<usize>() as i32);
                terms.push((k.clone(), data.amplitude * damp * z));
                // Odometer over the potential family indices.
                let mut d = n;
                loop {
                    if d == 0 {
                        break;
                    }
                    d -= 1;
                    if k[d] < per_dim[d] {
                        k[d] += 1;
                        break;
                    }
                    k[d] = 1;
                }
                if k.iter().all(|&ki| ki == 1) {
                    break;
                }
            }
            gradient_state_from_terms(grid, &terms)
        }
    }
}

/// Evaluate `u_j = d/dx_j sum_t r_t prod_i sin^2(k_i pi x_i / L_i)` on the
/// interior nodes and project each component.
fn gradient_state_from_terms(grid: &ModeGrid, terms: &[(Vec<usize>, f64)]) -> Result<VectorState> {
    let n = grid.dim();
    let lengths = grid.domain().lengths();
    let points = grid.grid_points();
    let phys_shape = grid.phys_shape();

    // Per-dimension node tables: sin^2(k pi m / M) and the derivative factor.
    let sin_at = |d: usize, k: usize, node: usize| -> f64 {
        let m = points[d];
        (PI * ((k * node) % (2 * m)) as f64 / m as f64).sin()
    };

    let mut components = Vec::with_capacity(n);
    for j in 0..n {
        let mut values = ArrayD::zeros(IxDyn(&phys_shape));
        for (k, r) in terms {
            if *r == 0.0 {
                continue;
            }
            // factors[d][node-1], with the derivative applied in dimension j:
            // d/dx sin^2(k pi x / L) = (k pi / L) sin(2 k pi x / L).
            let factors: Vec<Vec<f64>> = (0..n)
                .map(|d| {
                    (1..points[d])
                        .map(|node| {
                            if d == j {
                                (k[d] as f64 * PI / lengths[d]) * sin_at(d, 2 * k[d], node)
                            } else {
                                let s = sin_at(d, k[d], node);
                                s * s
                            }
                        })
                        .collect()
                })
                .collect();
            for (idx, v) in values.indexed_iter_mut() {
                let mut prod = *r;
                for (d, &i) in idx.slice().iter().enumerate() {
                    prod *= factors[d][i];
                }
                *v += prod;
            }
        }
        let phys = PhysicalField::new(grid.clone(), values)?;
        components.push(basis::analyze(&phys));
    }
    VectorState::new(components, 0.0)
}

/// Padded product-grid resolution per dimension when dealiasing: the
/// smallest `P` with `P > 3N/2`, so that no aliased image of a quadratic
/// product (cosine degrees up to `2N`) lands inside the retained band
/// `0..=N`. Without dealiasing the native grid is used as-is.
fn padded_points(grid: &ModeGrid, dealias: bool) -> Vec<usize> {
    grid.modes()
        .iter()
        .zip(grid.grid_points())
        .map(|(&n, &m)| if dealias { m.max((3 * n + 2) / 2) } else { m })
        .collect()
}

/// Galerkin projection of the nonlinearity `N_j(u) = (1/2) d/dx_j sum_i u_i^2`
/// for every component `j`.
///
/// The square `s = sum_i u_i^2` is formed pointwise on the (optionally
/// zero-padded) product grid. Because `s` is a product of sine polynomials it
/// is exactly a cosine polynomial, so it is analyzed in the cosine basis on
/// that grid; the derivative along `x_j` is then exact (cosine degree `q`
/// maps to sine degree `q`), and the transverse cosine factors are projected
/// onto the kept sine modes with the closed-form coupling weights. The
/// padding keeps every retained cosine degree alias-free, so the derivative
/// direction is exact; transverse projections see only images of degrees
/// beyond the padded band, which vanish for well-resolved fields. With a
/// product grid of at least `2N` points the result is the exact Galerkin
/// integral for every mode pair.
pub fn nonlinearity(state: &VectorState, dealias: bool) -> Result<Vec<SpectralField>> {
    let grid = state.grid();
    let n = grid.dim();
    let pad = padded_points(grid, dealias);

    let interior: Vec<usize> = pad.iter().map(|p| p - 1).collect();
    let mut s = ArrayD::zeros(IxDyn(&interior));
    for u in state.components() {
        let vals = basis::synthesize_on(u, &pad);
        Zip::from(&mut s).and(&vals).for_each(|acc, &v| {
            *acc += v * v;
        });
    }

    // Cosine coefficients of s, degree 0..=pad[d] per dimension.
    let b = basis::cosine_analyze_interior(&s, &pad);

    let projections: Vec<Array2<f64>> = (0..n)
        .map(|d| cos_to_sine_projection_1d(grid.modes()[d], pad[d]))
        .collect();

    let lengths = grid.domain().lengths();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        // Derivative along dimension j: cosine degree m_j becomes sine mode
        // m_j with weight -(m_j pi / L_j); the 1/2 from the nonlinearity is
        // folded in here.
        let nj = grid.modes()[j];
        let lj = lengths[j];
        let mut arr = map_lanes_arr(&b, j, nj, |bin, cout| {
            for (i, out) in cout.iter_mut().enumerate() {
                let m = i + 1;
                *out = -(m as f64 * PI / (2.0 * lj)) * bin[m];
            }
        });
        for l in 0..n {
            if l == j {
                continue;
            }
            let p = &projections[l];
            let nl = grid.modes()[l];
            arr = map_lanes_arr(&arr, l, nl, |bin, cout| {
                for (i, out) in cout.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (q, &bq) in bin.iter().enumerate() {
                        acc += p[(i, q)] * bq;
                    }
                    *out = acc;
                }
            });
        }
        out.push(SpectralField::from_parts(grid.clone(), arr));
    }
    Ok(out)
}

/// Same lane-mapping helper as the transforms use, local to this module.
fn map_lanes_arr(
    arr: &ArrayD<f64>,
    axis: usize,
    out_len: usize,
    mut f: impl FnMut(&[f64], &mut [f64]),
) -> ArrayD<f64> {
    let mut shape = arr.shape().to_vec();
    let in_len = shape[axis];
    shape[axis] = out_len;
    let mut out = ArrayD::zeros(IxDyn(&shape));
    let mut line_in = vec![0.0; in_len];
    let mut line_out = vec![0.0; out_len];
    Zip::from(arr.lanes(Axis(axis)))
        .and(out.lanes_mut(Axis(axis)))
        .for_each(|li, mut lo| {
            for (dst, src) in line_in.iter_mut().zip(li.iter()) {
                *dst = *src;
            }
            f(&line_in, &mut line_out);
            for (dst, src) in lo.iter_mut().zip(line_out.iter()) {
                *dst = *src;
            }
        });
    out
}

/// Galerkin coefficients of the dispersive term `(Lap u)_{x_1}`: scale by the
/// Laplacian symbol, then couple first-dimension modes of opposite parity.
pub fn dispersive_term(field: &SpectralField) -> SpectralField {
    let grid = field.grid();
    let l1 = grid.domain().lengths()[0];
    let coupling = derivative_coupling_1d(grid.modes()[0], l1);
    let mut scaled = field.coeffs().clone();
    for (idx, c) in scaled.indexed_iter_mut() {
        *c *= -grid.mode_symbol_at(idx.slice());
    }
    let scale = 2.0 / l1;
    let arr = map_lanes_arr(&scaled, 0, grid.modes()[0], |gin, gout| {
        for (i, out) in gout.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &g) in gin.iter().enumerate() {
                acc += coupling[(i, k)] * g;
            }
            *out = scale * acc;
        }
    });
    SpectralField::from_parts(grid.clone(), arr)
}

/// Factorized implicit operators, one dense solve per transverse line when
/// the dispersive coupling is on, scalar divisions otherwise.
struct ImplicitLinear {
    /// `mu^2 - mu` per mode.
    diag: ArrayD<f64>,
    /// LU factors of `I + w (D + Z)` per transverse line, in the iteration
    /// order of `lanes(Axis(0))`; empty when the coupling is off.
    line_lu: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    /// Implicit weight `w` (dt for the backward-Euler solve, dt/2 for
    /// Crank-Nicolson).
    weight: f64,
}

impl ImplicitLinear {
    fn new(grid: &ModeGrid, weight: f64, zk: bool) -> Self {
        let mut diag = ArrayD::zeros(IxDyn(grid.coeff_shape()));
        for (idx, d) in diag.indexed_iter_mut() {
            let mu = grid.mode_symbol_at(idx.slice());
            *d = mu * mu - mu;
        }

        let mut line_lu = Vec::new();
        if zk {
            let n1 = grid.modes()[0];
            let l1 = grid.domain().lengths()[0];
            let coupling = derivative_coupling_1d(n1, l1);
            // Iterate transverse lines in the same row-major order that
            // `lanes(Axis(0))` uses.
            let trans_shape: Vec<usize> = grid.coeff_shape()[1..].to_vec();
            let count: usize = trans_shape.iter().product();
            let lengths = grid.domain().lengths();
            let mut trans_idx = vec![0usize; trans_shape.len()];
            for _ in 0..count {
                let trans_part: f64 = trans_idx
                    .iter()
                    .zip(&lengths[1..])
                    .map(|(&i, &l)| ((i + 1) as f64 * PI / l).powi(2))
                    .sum();
                let mut a = nalgebra::DMatrix::<f64>::zeros(n1, n1);
                for r in 0..n1 {
                    let mu_r = ((r + 1) as f64 * PI / l1).powi(2) + trans_part;
                    a[(r, r)] = mu_r * mu_r - mu_r;
                    for c in 0..n1 {
                        let mu_c = ((c + 1) as f64 * PI / l1).powi(2) + trans_part;
                        a[(r, c)] += -(2.0 / l1) * coupling[(r, c)] * mu_c;
                    }
                }
                let mut m = nalgebra::DMatrix::<f64>::identity(n1, n1);
                m += a * weight;
                line_lu.push(m.lu());
                let mut d = trans_idx.len();
                while d > 0 {
                    d -= 1;
                    if trans_idx[d] + 1 < trans_shape[d] {
                        trans_idx[d] += 1;
                        break;
                    }
                    trans_idx[d] = 0;
                }
            }
        }

        Self {
            diag,
            line_lu,
            weight,
        }
    }

    /// Solve `(I + w (D + Z)) x = rhs` in place.
    fn solve(&self, rhs: &mut ArrayD<f64>) -> Result<()> {
        if self.line_lu.is_empty() {
            Zip::from(&mut *rhs).and(&self.diag).for_each(|r, &d| {
                *r /= 1.0 + self.weight * d;
            });
            return Ok(());
        }
        let n1 = rhs.shape()[0];
        let mut any_singular = false;
        let mut line = 0usize;
        Zip::from(rhs.lanes_mut(Axis(0))).for_each(|mut lane| {
            let v = nalgebra::DVector::from_iterator(n1, lane.iter().copied());
            match self.line_lu[line].solve(&v) {
                Some(x) => {
                    for (dst, src) in lane.iter_mut().zip(x.iter()) {
                        *dst = *src;
                    }
                }
                None => any_singular = true,
            }
            line += 1;
        });
        if any_singular {
            return Err(Error::Solver(
                "implicit line system is singular; reduce dt".into(),
            ));
        }
        Ok(())
    }

    /// Apply `c - w (D + Z) c` (the explicit Crank-Nicolson half) using the
    /// same operator structure.
    fn apply_explicit(&self, field: &SpectralField, zk: bool) -> ArrayD<f64> {
        let mut out = field.coeffs().clone();
        Zip::from(&mut out)
            .and(field.coeffs())
            .and(&self.diag)
            .for_each(|o, &c, &d| {
                *o = c - self.weight * d * c;
            });
        if zk {
            let disp = dispersive_term(field);
            Zip::from(&mut out).and(disp.coeffs()).for_each(|o, &z| {
                *o -= self.weight * z;
            });
        }
        out
    }
}

/// Reusable time stepper holding the factorized implicit operators and the
/// Adams-Bashforth history.
pub struct Stepper {
    grid: ModeGrid,
    config: SolverConfig,
    implicit: ImplicitLinear,
    prev_nonlin: Option<Vec<ArrayD<f64>>>,
}

impl Stepper {
    pub fn new(grid: &ModeGrid, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let weight = match config.scheme {
            Scheme::Imex1 => config.dt,
            Scheme::Cnab2 => config.dt / 2.0,
        };
        Ok(Self {
            grid: grid.clone(),
            config: config.clone(),
            implicit: ImplicitLinear::new(grid, weight, config.zk),
            prev_nonlin: None,
        })
    }

    /// Advance one step of `dt`. For [`Scheme::Cnab2`] the first call uses a
    /// backward-Euler substep to seed the Adams-Bashforth history.
    pub fn step(&mut self, state: &VectorState) -> Result<VectorState> {
        if *state.grid() != self.grid {
            return Err(Error::ShapeMismatch(
                "state grid does not match the stepper".into(),
            ));
        }
        if !state.is_finite() {
            return Err(Error::Solver(format!(
                "non-finite state entering step at t = {}",
                state.time()
            )));
        }
        let dt = self.config.dt;
        let n = self.grid.dim();

        let nonlin: Vec<ArrayD<f64>> = if self.config.nonlinear {
            nonlinearity(state, self.config.dealias)?
                .into_iter()
                .map(|f| f.coeffs().clone())
                .collect()
        } else {
            (0..n)
                .map(|_| ArrayD::zeros(IxDyn(self.grid.coeff_shape())))
                .collect()
        };

        let mut new_components = Vec::with_capacity(n);
        match self.config.scheme {
            Scheme::Imex1 => {
                for j in 0..n {
                    let mut rhs = state.component(j).coeffs().clone();
                    Zip::from(&mut rhs).and(&nonlin[j]).for_each(|r, &nl| {
                        *r -= dt * nl;
                    });
                    self.implicit.solve(&mut rhs)?;
                    new_components.push(SpectralField::from_parts(self.grid.clone(), rhs));
                }
            }
            Scheme::Cnab2 => {
                for j in 0..n {
                    let mut rhs = self
                        .implicit
                        .apply_explicit(state.component(j), self.config.zk);
                    match &self.prev_nonlin {
                        // Seed step: explicit Euler on the nonlinearity.
                        None => {
                            Zip::from(&mut rhs).and(&nonlin[j]).for_each(|r, &nl| {
                                *r -= dt * nl;
                            });
                        }
                        Some(prev) => {
                            Zip::from(&mut rhs)
                                .and(&nonlin[j])
                                .and(&prev[j])
                                .for_each(|r, &nl, &pnl| {
                                    *r -= dt * (1.5 * nl - 0.5 * pnl);
                                });
                        }
                    }
                    self.implicit.solve(&mut rhs)?;
                    new_components.push(SpectralField::from_parts(self.grid.clone(), rhs));
                }
            }
        }
        self.prev_nonlin = Some(nonlin);
        VectorState::new(new_components, state.time() + dt)
    }
}

/// One-shot step with a fresh stepper (for Crank-Nicolson this is the seed
/// step, matching the run loop's first step).
pub fn step(state: &VectorState, config: &SolverConfig) -> Result<VectorState> {
    Stepper::new(state.grid(), config)?.step(state)
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// Energy became non-finite or exceeded [`ENERGY_ABORT_THRESHOLD`].
    BlowUp { t: f64 },
}

impl std::fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunOutcome::Completed => write!(f, "completed"),
            RunOutcome::BlowUp { t } => write!(f, "blow-up detected at t = {t}"),
        }
    }
}

/// Full result of a run: the last healthy state, the recorded series, and
/// the outcome flag.
pub struct RunResult {
    pub final_state: VectorState,
    pub series: Vec<TimeSeriesRecord>,
    pub outcome: RunOutcome,
}

/// Integrate from the configured initial data until `t_end`, recording every
/// `record_every`-th step (plus the initial and final states).
///
/// A blow-up is an expected outcome, not an error: the series collected so
/// far is returned with [`RunOutcome::BlowUp`].
pub fn run(grid: &ModeGrid, data: &InitialData, config: &SolverConfig) -> Result<RunResult> {
    config.validate()?;
    let mut state = initial_from_potential(grid, data)?;
    let a = compute_a(grid.domain());
    let theta = compute_theta(a)?;
    let rate = a * a * theta / 2.0;

    let e0 = state.h2_sq_total();
    let record = |state: &VectorState, t: f64| -> TimeSeriesRecord {
        let per = state.h2_sq_per_component();
        TimeSeriesRecord {
            t,
            h2_sq_total: per.iter().sum(),
            h2_sq_per_component: per,
            bilap_sq_total: state.bilap_sq_total(),
            curl_residual: curl_residual(state),
            bound_envelope: e0 * (-rate * t).exp(),
        }
    };

    let steps = ((config.t_end / config.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut series = Vec::with_capacity(steps / config.record_every + 2);
    series.push(record(&state, 0.0));

    let mut stepper = Stepper::new(grid, config)?;
    for step_idx in 1..=steps {
        let next = stepper.step(&state)?;
        let t = step_idx as f64 * config.dt;
        let energy = next.h2_sq_total();
        if !energy.is_finite() || !next.is_finite() || energy > ENERGY_ABORT_THRESHOLD {
            return Ok(RunResult {
                final_state: state,
                series,
                outcome: RunOutcome::BlowUp { t },
            });
        }
        state = next;
        if step_idx % config.record_every == 0 || step_idx == steps {
            series.push(record(&state, t));
        }
    }

    Ok(RunResult {
        final_state: state,
        series,
        outcome: RunOutcome::Completed,
    })
}

/// Largest curl component `|d u_i / d x_j - d u_j / d x_i|_{L2}` over pairs
/// `i < j`, normalized by `max(1, sum_i |grad u_i|)`.
///
/// Derivatives are evaluated exactly from the spectral representation on the
/// closed collocation grid and integrated with trapezoid weights, which is
/// exact for the band-limited integrand once `M_i > N_i`.
pub fn curl_residual(state: &VectorState) -> f64 {
    let grid = state.grid();
    let n = grid.dim();
    let points = grid.grid_points();
    let cell: f64 = grid
        .domain()
        .lengths()
        .iter()
        .zip(points)
        .map(|(l, &m)| l / m as f64)
        .product();

    let grad_total: f64 = state
        .components()
        .iter()
        .map(|c| sobolev_norms(c).grad_sq.sqrt())
        .sum();
    let denom = grad_total.max(1.0);

    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let di = basis::synthesize_closed(state.component(i), Some(j));
            let dj = basis::synthesize_closed(state.component(j), Some(i));
            let mut acc = 0.0;
            for (idx, &a) in di.indexed_iter() {
                let d = a - dj[&idx];
                let mut w = 1.0;
                for (dim, &pos) in idx.slice().iter().enumerate() {
                    if pos == 0 || pos == points[dim] {
                        w *= 0.5;
                    }
                }
                acc += w * d * d;
            }
            worst = worst.max((cell * acc).sqrt());
        }
    }
    worst / denom
}
