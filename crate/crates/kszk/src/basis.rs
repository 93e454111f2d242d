//! Product-sine basis on a box: mode symbols, discrete transforms, Galerkin
//! coupling matrices, and spectral Sobolev norms.
//!
//! Basis functions are `w_k(x) = prod_i sin(k_i pi x_i / L_i)` with `k_i >= 1`.
//! They satisfy `w = Lap w = 0` on the boundary and diagonalize both the
//! Laplacian (`-Lap w_k = mu_k w_k`) and the bilaplacian (`mu_k^2`). The
//! physical representation lives on the interior nodes `x_i = m L_i / M_i`,
//! `1 <= m <= M_i - 1`, where the plain type-I sine transform is an exact
//! inverse of synthesis as soon as `M_i >= N_i + 1`.

use ndarray::{Array2, ArrayD, Axis, Dimension, IxDyn, Zip};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

/// Truncation and collocation resolution over a [`DomainSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    domain: DomainSpec,
    modes: Vec<usize>,
    grid_points: Vec<usize>,
}

impl ModeGrid {
    /// `modes[i] = N_i >= 1` kept sine modes, `grid_points[i] = M_i >= N_i`
    /// subintervals of the collocation grid, per dimension.
    pub fn new(domain: DomainSpec, modes: Vec<usize>, grid_points: Vec<usize>) -> Result<Self> {
        let n = domain.dim();
        if modes.len() != n || grid_points.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} entries in modes and grid_points, got {} and {}",
                modes.len(),
                grid_points.len()
            )));
        }
        for (i, (&nm, &mp)) in modes.iter().zip(&grid_points).enumerate() {
            if nm < 1 {
                return Err(Error::InvalidParameter(format!(
                    "modes[{i}] must be at least 1"
                )));
            }
            if mp < nm {
                return Err(Error::InvalidParameter(format!(
                    "grid_points[{i}] = {mp} is below modes[{i}] = {nm}"
                )));
            }
        }
        Ok(Self {
            domain,
            modes,
            grid_points,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn grid_points(&self) -> &[usize] {
        &self.grid_points
    }

    /// Shape of a coefficient array: `N_i` per dimension.
    pub fn coeff_shape(&self) -> &[usize] {
        &self.modes
    }

    /// Shape of an interior-node value array: `M_i - 1` per dimension.
    pub fn phys_shape(&self) -> Vec<usize> {
        self.grid_points.iter().map(|m| m - 1).collect()
    }

    /// `-Lap` symbol of the mode at zero-based coefficient index `idx`:
    /// `mu = sum_i ((idx_i + 1) pi / L_i)^2`.
    pub fn mode_symbol_at(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .zip(self.domain.lengths())
            .map(|(&i, &l)| ((i + 1) as f64 * PI / l).powi(2))
            .sum()
    }
}

/// `-Lap` symbol `mu_k = sum_i (k_i pi / L_i)^2` for a one-based mode index.
/// The bilaplacian symbol is `mu_k^2`.
pub fn mode_symbol(k: &[usize], domain: &DomainSpec) -> Result<f64> {
    if k.len() != domain.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mode index has {} entries for a {}-dimensional box",
            k.len(),
            domain.dim()
        )));
    }
    if k.iter().any(|&ki| ki < 1) {
        return Err(Error::InvalidParameter(
            "mode indices start at 1 in every dimension".into(),
        ));
    }
    Ok(k.iter()
        .zip(domain.lengths())
        .map(|(&ki, &l)| (ki as f64 * PI / l).powi(2))
        .sum())
}

/// Coefficients of a truncated sine expansion on a grid.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: ModeGrid,
    coeffs: ArrayD<f64>,
}

impl SpectralField {
    pub fn new(grid: ModeGrid, coeffs: ArrayD<f64>) -> Result<Self> {
        if coeffs.shape() != grid.coeff_shape() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient shape {:?} does not match mode counts {:?}",
                coeffs.shape(),
                grid.coeff_shape()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "coefficients must be finite".into(),
            ));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: ModeGrid) -> Self {
        let shape = IxDyn(grid.coeff_shape());
        Self {
            grid,
            coeffs: ArrayD::zeros(shape),
        }
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &ArrayD<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut ArrayD<f64> {
        &mut self.coeffs
    }

    pub(crate) fn from_parts(grid: ModeGrid, coeffs: ArrayD<f64>) -> Self {
        debug_assert_eq!(coeffs.shape(), grid.coeff_shape());
        Self { grid, coeffs }
    }
}

/// Values on the interior collocation nodes of a grid.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    grid: ModeGrid,
    values: ArrayD<f64>,
}

impl PhysicalField {
    pub fn new(grid: ModeGrid, values: ArrayD<f64>) -> Result<Self> {
        if values.shape() != grid.phys_shape().as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "value shape {:?} does not match interior grid {:?}",
                values.shape(),
                grid.phys_shape()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn values(&self) -> &ArrayD<f64> {
        &self.values
    }
}

/// Table of `sin(pi r / m)`, indexed by `r mod 2m`. Arguments are reduced
/// exactly before the table lookup, which keeps transforms bit-deterministic.
struct SineTable {
    m: usize,
    vals: Vec<f64>,
}

impl SineTable {
    fn new(m: usize) -> Self {
        let mut vals: Vec<f64> = (0..2 * m)
            .map(|r| (PI * r as f64 / m as f64).sin())
            .collect();
        // sin(0) and sin(pi) are exact zeros; pin them so synthesized fields
        // vanish on the boundary to the last bit.
        vals[0] = 0.0;
        vals[m] = 0.0;
        Self { m, vals }
    }

    #[inline]
    fn at(&self, k: usize, node: usize) -> f64 {
        self.vals[(k * node) % (2 * self.m)]
    }
}

/// Table of `cos(pi r / m)`, same reduction scheme as [`SineTable`].
struct CosineTable {
    m: usize,
    vals: Vec<f64>,
}

impl CosineTable {
    fn new(m: usize) -> Self {
        let vals = (0..2 * m)
            .map(|r| (PI * r as f64 / m as f64).cos())
            .collect();
        Self { m, vals }
    }

    #[inline]
    fn at(&self, k: usize, node: usize) -> f64 {
        self.vals[(k * node) % (2 * self.m)]
    }
}

/// Apply a 1d line transform along `axis`, changing that axis to `out_len`.
fn map_lanes(
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

/// Evaluate coefficients on interior nodes of a grid with `points[i]`
/// subintervals per dimension (used both for the native grid and for the
/// zero-padded product grid).
pub(crate) fn synthesize_on(field: &SpectralField, points: &[usize]) -> ArrayD<f64> {
    let mut arr = field.coeffs.clone();
    for (d, &p) in points.iter().enumerate() {
        let table = SineTable::new(p);
        let n = field.grid.modes()[d];
        arr = map_lanes(&arr, d, p - 1, |cin, fout| {
            for (j, out) in fout.iter_mut().enumerate() {
                let node = j + 1;
                let mut acc = 0.0;
                for (i, &c) in cin.iter().enumerate().take(n) {
                    acc += c * table.at(i + 1, node);
                }
                *out = acc;
            }
        });
    }
    arr
}

/// Evaluate a truncated expansion on its interior collocation nodes.
pub fn synthesize(field: &SpectralField) -> PhysicalField {
    let values = synthesize_on(field, field.grid.grid_points());
    PhysicalField {
        grid: field.grid.clone(),
        values,
    }
}

/// Project interior-node values back onto the kept sine modes.
///
/// Exactly inverts [`synthesize`] when `M_i >= N_i + 1` in every dimension.
/// At the degenerate resolution `M_i = N_i` the top mode lies in the
/// quadrature nullspace and analyzes to zero.
pub fn analyze(field: &PhysicalField) -> SpectralField {
    let grid = &field.grid;
    let mut arr = field.values.clone();
    for d in 0..grid.dim() {
        let m = grid.grid_points()[d];
        let n = grid.modes()[d];
        let table = SineTable::new(m);
        let scale = 2.0 / m as f64;
        arr = map_lanes(&arr, d, n, |vin, cout| {
            for (i, out) in cout.iter_mut().enumerate() {
                let k = i + 1;
                if k >= m {
                    *out = 0.0;
                    continue;
                }
                let mut acc = 0.0;
                for (j, &v) in vin.iter().enumerate() {
                    acc += v * table.at(k, j + 1);
                }
                *out = scale * acc;
            }
        });
    }
    SpectralField {
        grid: grid.clone(),
        coeffs: arr,
    }
}

/// Cosine coefficients (degree `0..=points[d]` per dimension) of a product
/// field sampled on interior nodes. Valid for data that vanishes on the whole
/// box boundary, which makes the closed-grid endpoint terms drop out.
pub(crate) fn cosine_analyze_interior(values: &ArrayD<f64>, points: &[usize]) -> ArrayD<f64> {
    let mut arr = values.clone();
    for (d, &p) in points.iter().enumerate() {
        let table = CosineTable::new(p);
        arr = map_lanes(&arr, d, p + 1, |vin, bout| {
            for (q, out) in bout.iter_mut().enumerate() {
                let eps = if q == 0 || q == p { 2.0 } else { 1.0 };
                let scale = 2.0 / (p as f64 * eps);
                let mut acc = 0.0;
                for (j, &v) in vin.iter().enumerate() {
                    acc += v * table.at(q, j + 1);
                }
                *out = scale * acc;
            }
        });
    }
    arr
}

/// Evaluate a field (or its exact partial derivative along `deriv_dim`) on
/// the closed collocation grid, boundary nodes included.
pub(crate) fn synthesize_closed(field: &SpectralField, deriv_dim: Option<usize>) -> ArrayD<f64> {
    let grid = &field.grid;
    let mut arr = field.coeffs.clone();
    for d in 0..grid.dim() {
        let m = grid.grid_points()[d];
        let n = grid.modes()[d];
        let length = grid.domain().lengths()[d];
        let sine = SineTable::new(m);
        let cosine = CosineTable::new(m);
        let derivative = deriv_dim == Some(d);
        arr = map_lanes(&arr, d, m + 1, |cin, fout| {
            for (node, out) in fout.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, &c) in cin.iter().enumerate().take(n) {
                    let k = i + 1;
                    if derivative {
                        acc += c * (k as f64 * PI / length) * cosine.at(k, node);
                    } else {
                        acc += c * sine.at(k, node);
                    }
                }
                *out = acc;
            }
        });
    }
    arr
}

/// Galerkin first-derivative coupling on `n` sine modes:
/// `I[k-1][m-1] = int_0^L sin(k pi x / L) d/dx sin(m pi x / L) dx`
/// `= k m (1 - (-1)^{k+m}) / (k^2 - m^2)` off the diagonal.
///
/// The entries are independent of the edge length (it cancels after
/// substitution); the argument is kept so call sites state which dimension
/// they couple. The matrix is skew-symmetric and vanishes unless `k + m`
/// is odd.
pub fn derivative_coupling_1d(n: usize, _length: f64) -> Array2<f64> {
    let mut mat = Array2::zeros((n, n));
    for k in 1..=n {
        for m in 1..=n {
            if (k + m) % 2 == 1 {
                let num = 2.0 * (k as f64) * (m as f64);
                let den = (k * k) as f64 - (m * m) as f64;
                mat[(k - 1, m - 1)] = num / den;
            }
        }
    }
    mat
}

/// Projection of cosine modes onto normalized sine modes on one edge:
/// `P[m-1][q] = (cos(q pi x / L), sin(m pi x / L)) / (L / 2)`
/// `= (4 m / pi) / (m^2 - q^2)` when `m + q` is odd, else zero.
/// Length-independent for the same reason as [`derivative_coupling_1d`].
pub fn cos_to_sine_projection_1d(n_sine: usize, max_cos: usize) -> Array2<f64> {
    let mut mat = Array2::zeros((n_sine, max_cos + 1));
    for m in 1..=n_sine {
        for q in 0..=max_cos {
            if (m + q) % 2 == 1 {
                let den = (m * m) as f64 - (q * q) as f64;
                mat[(m - 1, q)] = 4.0 * m as f64 / PI / den;
            }
        }
    }
    mat
}

/// Squared spectral Sobolev seminorms of one field, all computed from the
/// coefficient tensor by Parseval: `|f|^2 = (prod L_i / 2) sum_k c_k^2`,
/// with powers of `mu_k` inserted for derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevNorms {
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub lap_sq: f64,
    pub gradlap_sq: f64,
    pub bilap_sq: f64,
}

/// Parseval norms of a spectral field.
pub fn sobolev_norms(field: &SpectralField) -> SobolevNorms {
    let weight = field.grid.domain().basis_norm_sq();
    let mut n = SobolevNorms {
        l2_sq: 0.0,
        grad_sq: 0.0,
        lap_sq: 0.0,
        gradlap_sq: 0.0,
        bilap_sq: 0.0,
    };
    for (idx, &c) in field.coeffs.indexed_iter() {
        let mu = field.grid.mode_symbol_at(idx.slice());
        let c2 = c * c;
        n.l2_sq += c2;
        n.grad_sq += mu * c2;
        n.lap_sq += mu * mu * c2;
        n.gradlap_sq += mu * mu * mu * c2;
        n.bilap_sq += mu * mu * mu * mu * c2;
    }
    n.l2_sq *= weight;
    n.grad_sq *= weight;
    n.lap_sq *= weight;
    n.gradlap_sq *= weight;
    n.bilap_sq *= weight;
    n
}

/// Squared norm of the first-coordinate derivative of the Laplacian,
/// `|(Lap f)_{x_1}|^2 = (prod L_i / 2) sum_k (k_1 pi / L_1)^2 mu_k^2 c_k^2`.
/// This is the quantity the dispersive term feeds on.
pub fn lap_dx1_sq(field: &SpectralField) -> f64 {
    let weight = field.grid.domain().basis_norm_sq();
    let l1 = field.grid.domain().lengths()[0];
    let mut acc = 0.0;
    for (idx, &c) in field.coeffs.indexed_iter() {
        let mu = field.grid.mode_symbol_at(idx.slice());
        let k1 = (idx[0] + 1) as f64 * PI / l1;
        acc += k1 * k1 * mu * mu * c * c;
    }
    weight * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn unit_square_grid(n: usize, m: usize) -> ModeGrid {
        let domain = DomainSpec::new(vec![1.0, 1.0]).unwrap();
        ModeGrid::new(domain, vec![n, n], vec![m, m]).unwrap()
    }

    fn single_mode_field(grid: &ModeGrid, k: &[usize], amp: f64) -> SpectralField {
        let mut f = SpectralField::zeros(grid.clone());
        let idx: Vec<usize> = k.iter().map(|ki| ki - 1).collect();
        f.coeffs_mut()[IxDyn(&idx)] = amp;
        f
    }

    #[test]
    fn mode_symbol_reference_values() {
        let domain = DomainSpec::new(vec![1.0, 1.0]).unwrap();
        let mu11 = mode_symbol(&[1, 1], &domain).unwrap();
        assert!((mu11 - 19.7392088).abs() <= 1e-6 * mu11);
        let mu21 = mode_symbol(&[2, 1], &domain).unwrap();
        let exact = 5.0 * PI * PI;
        assert!((mu21 - exact).abs() <= 1e-12 * exact);
        // Bilaplacian symbol is the square.
        assert!((mu11 * mu11 - 389.6364).abs() <= 1e-4);
    }

    #[test]
    fn lowest_symbol_equals_domain_constant() {
        for lengths in [vec![1.0, 1.0], vec![0.7, 2.3], vec![1.0, 2.0, 3.0]] {
            let domain = DomainSpec::new(lengths).unwrap();
            let ones = vec![1; domain.dim()];
            let mu = mode_symbol(&ones, &domain).unwrap();
            let a = crate::geometry::compute_a(&domain);
            assert!((mu - a).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn mode_symbol_scales_inverse_square_in_length() {
        let domain = DomainSpec::new(vec![1.0, 2.0]).unwrap();
        let scaled = domain.scaled(3.0).unwrap();
        let mu = mode_symbol(&[3, 2], &domain).unwrap();
        let mu_s = mode_symbol(&[3, 2], &scaled).unwrap();
        assert!((mu_s - mu / 9.0).abs() <= 1e-12 * mu);
    }

    #[test]
    fn mode_symbol_rejects_zero_index_and_bad_rank() {
        let domain = DomainSpec::new(vec![1.0, 1.0]).unwrap();
        assert!(mode_symbol(&[0, 1], &domain).is_err());
        assert!(mode_symbol(&[1, 1, 1], &domain).is_err());
    }

    #[test]
    fn transform_round_trip_is_exact() {
        let grid = unit_square_grid(6, 9);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut f = SpectralField::zeros(grid.clone());
        for c in f.coeffs_mut().iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let back = analyze(&synthesize(&f));
        for (a, b) in f.coeffs().iter().zip(back.coeffs().iter()) {
            assert!((a - b).abs() <= 1e-12, "round trip error {}", (a - b).abs());
        }
    }

    #[test]
    fn transform_round_trip_three_dimensional() {
        let domain = DomainSpec::new(vec![1.0, 0.8, 1.3]).unwrap();
        let grid = ModeGrid::new(domain, vec![3, 4, 2], vec![5, 6, 4]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut f = SpectralField::zeros(grid);
        for c in f.coeffs_mut().iter_mut() {
            *c = rng.gen_range(-2.0..2.0);
        }
        let back = analyze(&synthesize(&f));
        for (a, b) in f.coeffs().iter().zip(back.coeffs().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn synthesis_vanishes_on_the_closed_boundary() {
        let grid = unit_square_grid(4, 8);
        let f = single_mode_field(&grid, &[3, 2], 1.7);
        let closed = synthesize_closed(&f, None);
        let m = grid.grid_points()[0];
        for j in 0..=m {
            assert_eq!(closed[IxDyn(&[0, j])], 0.0);
            assert_eq!(closed[IxDyn(&[m, j])], 0.0);
            assert_eq!(closed[IxDyn(&[j, 0])], 0.0);
            assert_eq!(closed[IxDyn(&[j, m])], 0.0);
        }
    }

    #[test]
    fn coupling_matrix_reference_entries() {
        let mat = derivative_coupling_1d(4, 1.0);
        // I_{1,2} = int sin(pi x) d/dx sin(2 pi x) dx = -4/3.
        assert!((mat[(0, 1)] + 4.0 / 3.0).abs() <= 1e-15);
        assert!((mat[(1, 0)] - 4.0 / 3.0).abs() <= 1e-15);
        // Same parity (including the diagonal) gives exact zeros.
        assert_eq!(mat[(0, 2)], 0.0);
        assert_eq!(mat[(1, 3)], 0.0);
        assert_eq!(mat[(2, 2)], 0.0);
    }

    #[test]
    fn coupling_matrix_is_skew_and_length_free() {
        for n in [2, 5, 16, 33] {
            let mat = derivative_coupling_1d(n, 2.7);
            let mat_other = derivative_coupling_1d(n, 0.4);
            for k in 0..n {
                for m in 0..n {
                    assert_eq!(mat[(k, m)], mat_other[(k, m)]);
                    assert!(
                        (mat[(k, m)] + mat[(m, k)]).abs() <= 1e-14,
                        "skew symmetry fails at ({k},{m})"
                    );
                }
            }
        }
    }

    #[test]
    fn cosine_projection_reference_entries() {
        let p = cos_to_sine_projection_1d(3, 4);
        assert!((p[(0, 0)] - 4.0 / PI).abs() <= 1e-15);
        assert!((p[(0, 2)] + 4.0 / (3.0 * PI)).abs() <= 1e-15);
        // Same parity entries vanish, including q = m.
        assert_eq!(p[(1, 0)], 0.0);
        assert_eq!(p[(1, 2)], 0.0);
        assert_eq!(p[(2, 3)], 0.0);
    }

    #[test]
    fn norms_of_the_lowest_unit_mode() {
        let grid = unit_square_grid(4, 8);
        let f = single_mode_field(&grid, &[1, 1], 1.0);
        let norms = sobolev_norms(&f);
        assert!((norms.l2_sq - 0.25).abs() <= 1e-15);
        let mu = 2.0 * PI * PI;
        assert!((norms.lap_sq - mu * mu / 4.0).abs() <= 1e-10);
        assert!((norms.grad_sq / norms.l2_sq - mu).abs() <= 1e-12 * mu);
        assert!((norms.gradlap_sq / norms.lap_sq - mu).abs() <= 1e-12 * mu);
        assert!((norms.bilap_sq / norms.l2_sq - mu.powi(4) / mu.powi(0)).abs() >= 0.0);
        assert!((norms.bilap_sq / norms.lap_sq - mu * mu).abs() <= 1e-9 * mu * mu);
    }

    #[test]
    fn norms_add_over_modes() {
        let grid = unit_square_grid(5, 8);
        let f1 = single_mode_field(&grid, &[2, 3], 0.8);
        let f2 = single_mode_field(&grid, &[4, 1], -1.1);
        let mut both = f1.clone();
        both.coeffs_mut()[IxDyn(&[3, 0])] = -1.1;
        let n1 = sobolev_norms(&f1);
        let n2 = sobolev_norms(&f2);
        let nb = sobolev_norms(&both);
        assert!((nb.l2_sq - n1.l2_sq - n2.l2_sq).abs() <= 1e-14);
        assert!((nb.bilap_sq - n1.bilap_sq - n2.bilap_sq).abs() <= 1e-7);
    }

    #[test]
    fn first_direction_derivative_norm_single_mode() {
        let domain = DomainSpec::new(vec![0.9, 1.4]).unwrap();
        let grid = ModeGrid::new(domain.clone(), vec![4, 4], vec![8, 8]).unwrap();
        let f = single_mode_field(&grid, &[3, 2], 0.6);
        let mu = mode_symbol(&[3, 2], &domain).unwrap();
        let k1 = 3.0 * PI / 0.9;
        let expected = domain.basis_norm_sq() * k1 * k1 * mu * mu * 0.36;
        let got = lap_dx1_sq(&f);
        assert!((got - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn field_constructors_enforce_shapes_and_finiteness() {
        let grid = unit_square_grid(3, 6);
        let bad_shape = ArrayD::zeros(IxDyn(&[3, 4]));
        assert!(SpectralField::new(grid.clone(), bad_shape).is_err());
        let mut nan = ArrayD::zeros(IxDyn(&[3, 3]));
        nan[IxDyn(&[0, 0])] = f64::NAN;
        assert!(SpectralField::new(grid.clone(), nan).is_err());
        let bad_phys = ArrayD::zeros(IxDyn(&[5, 6]));
        assert!(PhysicalField::new(grid, bad_phys).is_err());
    }

    #[test]
    fn grid_validation() {
        let domain = DomainSpec::new(vec![1.0, 1.0]).unwrap();
        assert!(ModeGrid::new(domain.clone(), vec![0, 2], vec![4, 4]).is_err());
        assert!(ModeGrid::new(domain.clone(), vec![4, 4], vec![3, 4]).is_err());
        assert!(ModeGrid::new(domain, vec![4], vec![4]).is_err());
    }
}
