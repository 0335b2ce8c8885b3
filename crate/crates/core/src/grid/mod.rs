//! Periodic spectral grid and the complex fields sampled on it.
//!
//! The box is `[-L, L)^dim` with `n` points per axis, `x_j = -L + j dx`.
//! Wavenumbers follow the usual FFT ordering, `k = (pi / L) m` with
//! `m = 0, 1, ..., n/2 - 1, -n/2, ..., -1`.
//!
//! Transforms are unitary: `F_k = N^{-1/2} sum_j f_j exp(-2 pi i j.m / n)`,
//! so `sum |f_j|^2 = sum |F_k|^2` and every Fourier multiplier in this crate
//! is written against that convention.

pub mod io;
mod norms;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub use norms::{
    boundary_mass_fraction, fh_half_norm, galilean_norm, lp_norm, sobolev_seminorm,
    weighted_lp_norm, x_norm, NormSpec,
};

/// Fraction of the half-width, measured in from each face, that the boundary-mass
/// monitor treats as the boundary layer.
pub const BOUNDARY_LAYER: f64 = 0.1;

struct GridInner {
    dim: usize,
    n: usize,
    half_width: f64,
    dx: f64,
    k_axis: Vec<f64>,
    m_axis: Vec<i64>,
    k_sq: Vec<f64>,
    r_sq: Vec<f64>,
    dealias: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Immutable, cheaply cloneable periodic grid.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("n", &self.inner.n)
            .field("half_width", &self.inner.half_width)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.half_width.to_bits() == other.inner.half_width.to_bits())
    }
}

fn is_supported_size(n: usize) -> bool {
    if n < 8 {
        return false;
    }
    let odd = n >> n.trailing_zeros();
    odd == 1 || odd == 3
}

/// Build a grid on `[-half_width, half_width)^dim`.
///
/// `n` must be a power of two or three times a power of two (at least 8); both
/// keep the FFT radix small and, for `3 * 2^k`, make the 2/3 mask exact.
pub fn make_grid(dim: usize, n: usize, half_width: f64) -> Result<Grid> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    if !is_supported_size(n) {
        return Err(Error::InvalidGrid(format!(
            "points per axis must be 2^k or 3*2^k and at least 8, got {n}"
        )));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidGrid(format!("half width must be positive, got {half_width}")));
    }

    let dx = 2.0 * half_width / n as f64;
    let dk = std::f64::consts::PI / half_width;
    let m_axis: Vec<i64> = (0..n as i64)
        .map(|j| if j < n as i64 / 2 { j } else { j - n as i64 })
        .collect();
    let k_axis: Vec<f64> = m_axis.iter().map(|&m| m as f64 * dk).collect();
    let x_axis: Vec<f64> = (0..n).map(|j| -half_width + j as f64 * dx).collect();
    let keep_axis: Vec<bool> = m_axis.iter().map(|&m| 3 * m.unsigned_abs() as usize <= n).collect();

    let total = n.pow(dim as u32);
    let mut k_sq = vec![0.0; total];
    let mut r_sq = vec![0.0; total];
    let mut dealias = vec![0.0; total];
    let mut idx = vec![0usize; dim];
    for p in 0..total {
        let mut rem = p;
        for a in (0..dim).rev() {
            idx[a] = rem % n;
            rem /= n;
        }
        k_sq[p] = idx.iter().map(|&i| k_axis[i] * k_axis[i]).sum();
        r_sq[p] = idx.iter().map(|&i| x_axis[i] * x_axis[i]).sum();
        dealias[p] = if idx.iter().all(|&i| keep_axis[i]) { 1.0 } else { 0.0 };
    }

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    Ok(Grid {
        inner: Arc::new(GridInner {
            dim,
            n,
            half_width,
            dx,
            k_axis,
            m_axis,
            k_sq,
            r_sq,
            dealias,
            fwd,
            inv,
        }),
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    pub fn dx(&self) -> f64 {
        self.inner.dx
    }

    /// Quadrature weight `dx^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.inner.dx.powi(self.inner.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.inner.k_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumbers along one axis, FFT ordered.
    pub fn k_axis(&self) -> &[f64] {
        &self.inner.k_axis
    }

    /// Integer mode labels along one axis, FFT ordered.
    pub fn m_axis(&self) -> &[i64] {
        &self.inner.m_axis
    }

    pub fn x_axis(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.coordinate(j)).collect()
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -self.inner.half_width + j as f64 * self.inner.dx
    }

    /// `|k|^2` at every spectral index.
    pub fn k_sq(&self) -> &[f64] {
        &self.inner.k_sq
    }

    /// `|x|^2` at every grid point, measured from the box center.
    pub fn r_sq(&self) -> &[f64] {
        &self.inner.r_sq
    }

    /// 0/1 mask implementing the 2/3 rule: keeps modes with `|m_a| <= n/3` on every axis.
    pub fn dealias_mask(&self) -> &[f64] {
        &self.inner.dealias
    }

    /// Row-major multi-index of a flat index.
    pub fn multi_index(&self, mut p: usize, out: &mut [usize]) {
        let n = self.n();
        for a in (0..self.dim()).rev() {
            out[a] = p % n;
            p /= n;
        }
    }

    /// Physical coordinates of the flat index `p`.
    pub fn point(&self, p: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.multi_index(p, &mut idx[..self.dim()]);
        for a in 0..self.dim() {
            out[a] = self.coordinate(idx[a]);
        }
    }

    /// Wave vector of the flat spectral index `p`.
    pub fn wave_vector(&self, p: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.multi_index(p, &mut idx[..self.dim()]);
        for a in 0..self.dim() {
            out[a] = self.inner.k_axis[idx[a]];
        }
    }

    /// Same box refined or coarsened to `n` points per axis.
    pub fn with_points(&self, n: usize) -> Result<Grid> {
        make_grid(self.dim(), n, self.half_width())
    }

    /// Same resolution on the box `[-L/factor, L/factor)^dim`.
    pub fn shrunk(&self, factor: f64) -> Result<Grid> {
        make_grid(self.dim(), self.n(), self.half_width() / factor)
    }

    /// Whether `v` is a vector of the dual lattice `(pi/L) Z^dim`.
    pub fn on_dual_lattice(&self, v: &[f64]) -> bool {
        let dk = std::f64::consts::PI / self.half_width();
        v.len() == self.dim()
            && v.iter().all(|&c| {
                let m = c / dk;
                (m - m.round()).abs() <= 1e-9 * m.abs().max(1.0)
            })
    }

    /// In-place unitary forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// In-place unitary inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let n = self.n();
        let dim = self.dim();
        let plan = if inverse { &self.inner.inv } else { &self.inner.fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];

        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            let mut buf = vec![Complex64::new(0.0, 0.0); block];
            for chunk in data.chunks_mut(block) {
                for i in 0..n {
                    let row = &chunk[i * stride..(i + 1) * stride];
                    for (o, &z) in row.iter().enumerate() {
                        buf[o * n + i] = z;
                    }
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                for i in 0..n {
                    let row = &mut chunk[i * stride..(i + 1) * stride];
                    for (o, z) in row.iter_mut().enumerate() {
                        *z = buf[o * n + i];
                    }
                }
            }
        }

        let scale = 1.0 / (self.len() as f64).sqrt();
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}

/// Complex scalar field sampled on a [`Grid`], row-major over axes.
#[derive(Clone)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("l2", &self.norm_sq().sqrt())
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    /// Sample `f(x)` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let dim = grid.dim();
        let mut x = [0.0; 3];
        let values = (0..grid.len())
            .map(|p| {
                grid.point(p, &mut x);
                f(&x[..dim])
            })
            .collect();
        Field {
            grid: grid.clone(),
            values,
        }
    }

    /// Field whose unitary spectrum is `spectrum`.
    pub fn from_spectrum(grid: &Grid, mut spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::InvalidArgument("spectrum does not match grid".into()));
        }
        grid.inverse(&mut spectrum);
        Ok(Field {
            grid: grid.clone(),
            values: spectrum,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Unitary forward transform of the samples.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut s = self.values.clone();
        self.grid.forward(&mut s);
        s
    }

    /// Apply the Fourier multiplier `symbol(|k|^2)`.
    pub fn apply_symbol(&self, symbol: impl Fn(f64) -> Complex64) -> Field {
        let mut s = self.spectrum();
        for (z, &k2) in s.iter_mut().zip(self.grid.k_sq()) {
            *z *= symbol(k2);
        }
        self.grid.inverse(&mut s);
        Field {
            grid: self.grid.clone(),
            values: s,
        }
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scaled(&self, c: impl Into<Complex64>) -> Field {
        let c = c.into();
        self.map(|z| z * c)
    }

    pub fn conj(&self) -> Field {
        self.map(|z| z.conj())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: impl Into<Complex64>, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let c = c.into();
        Ok(Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + c * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(-1.0, other)
    }

    /// `int conj(self) other dx`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// `int |f|^2 dx`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Same samples reinterpreted on another grid with identical point count.
    pub fn regrid(&self, grid: &Grid) -> Result<Field> {
        if grid.len() != self.grid.len() || grid.dim() != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        Ok(Field {
            grid: grid.clone(),
            values: self.values.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wavenumbers_on_unit_spacing() {
        let g = make_grid(1, 8, PI).unwrap();
        assert!((g.dx() - PI / 4.0).abs() < 1e-15);
        let k: Vec<f64> = g.k_axis().to_vec();
        let expect = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (a, b) in k.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{k:?}");
        }
    }

    #[test]
    fn point_count_and_spacing() {
        let g = make_grid(3, 16, 8.0).unwrap();
        assert_eq!(g.len(), 4096);
        assert_eq!(g.dx() * g.n() as f64, 16.0);
        let g = make_grid(1, 8, 1.0).unwrap();
        assert!((g.k_axis()[1] - PI).abs() < 1e-15);
    }

    #[test]
    fn lattice_symmetry() {
        let g = make_grid(1, 16, 3.0).unwrap();
        let k = g.k_axis();
        assert!(k.contains(&0.0));
        let nyquist = k[g.n() / 2];
        for &kk in k {
            if kk != nyquist {
                assert!(k.iter().any(|&q| (q + kk).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(make_grid(1, 10, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(1, 4, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(4, 8, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(0, 8, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(2, 8, 0.0), Err(Error::InvalidGrid(_))));
        assert!(make_grid(3, 48, 10.0).is_ok());
        assert!(make_grid(2, 12, 1.0).is_ok());
    }

    #[test]
    fn transform_roundtrip_and_plane_wave() {
        let g = make_grid(3, 8, PI).unwrap();
        let f = Field::from_fn(&g, |x| Complex64::new(0.0, x[0] * 1.0 + 2.0 * x[2]).exp());
        let s = f.spectrum();
        // a single lattice mode carries all the energy
        let peak = s.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        let total: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        assert!((peak - total).abs() < 1e-9 * total);
        let back = Field::from_spectrum(&g, s).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn dealias_mask_keeps_two_thirds() {
        let g = make_grid(1, 48, 1.0).unwrap();
        let kept = g.dealias_mask().iter().filter(|&&m| m > 0.0).count();
        assert_eq!(kept, 33);
    }
}
