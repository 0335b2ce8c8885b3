//! Scaling `(f, g) -> (λ² f(λx), λ² g(λx))` and Galilean boosts
//! `(f, g) -> (e^{ix·ξ} f, e^{2ix·ξ} g)`, as data transforms and as a check that the
//! solver commutes with them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate, SolverConfig, State};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Closed-form Gaussian `A e^{iφ} e^{i ξ·x} exp(-|x - c|² / (2w²))`.
///
/// Missing `center`/`boost` entries are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian {
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub boost: Vec<f64>,
}

impl Gaussian {
    pub fn new(amplitude: f64, width: f64) -> Self {
        Gaussian { amplitude, width, center: Vec::new(), phase: 0.0, boost: Vec::new() }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidArgument(format!("gaussian width must be positive, got {}", self.width)));
        }
        if !self.amplitude.is_finite() || !self.phase.is_finite() {
            return Err(Error::InvalidArgument("gaussian amplitude and phase must be finite".into()));
        }
        if self.center.len() > dim || self.boost.len() > dim {
            return Err(Error::InvalidArgument(format!("center/boost longer than dimension {dim}")));
        }
        Ok(())
    }

    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        self.validate(grid.dim())?;
        let c = |a: usize| self.center.get(a).copied().unwrap_or(0.0);
        let b = |a: usize| self.boost.get(a).copied().unwrap_or(0.0);
        let base = Complex64::from_polar(self.amplitude, self.phase);
        let inv = 0.5 / (self.width * self.width);
        Ok(Field::from_fn(grid, |x| {
            let mut r2 = 0.0;
            let mut dot = 0.0;
            for (a, &xa) in x.iter().enumerate() {
                r2 += (xa - c(a)).powi(2);
                dot += xa * b(a);
            }
            base * Complex64::from_polar((-inv * r2).exp(), dot)
        }))
    }

    /// Descriptor of `λ² f(λx)`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Gaussian {
            amplitude: lambda * lambda * self.amplitude,
            width: self.width / lambda,
            center: self.center.iter().map(|c| c / lambda).collect(),
            phase: self.phase,
            boost: self.boost.iter().map(|b| b * lambda).collect(),
        }
    }
}

fn dyadic_exponent(lambda: f64) -> Result<i32> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {lambda}")));
    }
    let k = lambda.log2().round();
    if (2f64.powi(k as i32) - lambda).abs() > 1e-12 * lambda {
        return Err(Error::InvalidArgument(format!("sampled data can only be scaled by powers of two, got {lambda}")));
    }
    Ok(k as i32)
}

/// `f(2x)` by subsampling; points whose image `2x` leaves the box are set to zero.
fn compress(f: &Field) -> Field {
    let g = f.grid();
    let n = g.n();
    let dim = g.dim();
    let mut idx = [0usize; 3];
    let values = (0..g.len())
        .map(|p| {
            g.multi_index(p, &mut idx[..dim]);
            if idx[..dim].iter().any(|&j| j < n / 4 || j >= 3 * n / 4) {
                return Complex64::new(0.0, 0.0);
            }
            let q = idx[..dim].iter().fold(0usize, |acc, &j| acc * n + 2 * j - n / 2);
            f.values()[q]
        })
        .collect();
    Field::from_values(g, values).expect("same grid")
}

/// `f(x/2)` by evaluating the trigonometric interpolant at half-grid points.
fn dilate(f: &Field) -> Result<Field> {
    let g = f.grid();
    let n = g.n();
    let dim = g.dim();
    let fine = g.with_points(2 * n)?;
    let spec = f.spectrum();
    let mut padded = vec![Complex64::new(0.0, 0.0); fine.len()];
    let mut idx = [0usize; 3];
    let half = n as i64 / 2;
    for (p, &z) in spec.iter().enumerate() {
        g.multi_index(p, &mut idx[..dim]);
        // the Nyquist mode is split symmetrically so the interpolant stays real for real data
        let mut targets: Vec<(usize, f64)> = vec![(0, 1.0)];
        for &i in &idx[..dim] {
            let m = g.m_axis()[i];
            let mut next = Vec::with_capacity(targets.len() * 2);
            for &(acc, w) in &targets {
                let place = |m: i64| acc * 2 * n + m.rem_euclid(2 * n as i64) as usize;
                if m == -half {
                    next.push((place(-half), 0.5 * w));
                    next.push((place(half), 0.5 * w));
                } else {
                    next.push((place(m), w));
                }
            }
            targets = next;
        }
        for (q, w) in targets {
            padded[q] += z * w;
        }
    }
    // unitary transforms: amplitude grows by sqrt(N_fine / N)
    let gain = 2f64.powf(0.5 * dim as f64);
    for z in padded.iter_mut() {
        *z *= gain;
    }
    let up = Field::from_spectrum(&fine, padded)?;
    let offset = n / 2;
    let values = (0..g.len())
        .map(|p| {
            g.multi_index(p, &mut idx[..dim]);
            let q = idx[..dim].iter().fold(0usize, |acc, &j| acc * 2 * n + j + offset);
            up.values()[q]
        })
        .collect();
    Field::from_values(g, values)
}

/// `λ² f(λx)` on the same grid, `λ` a power of two.
///
/// `λ > 1` subsamples and zero-fills the points whose image `λx` leaves the box, which
/// assumes the data has decayed at the box boundary; `λ < 1` evaluates the
/// trigonometric interpolant, which is exact for band-limited data.
pub fn scale_field(f: &Field, lambda: f64) -> Result<Field> {
    let k = dyadic_exponent(lambda)?;
    let mut out = f.clone();
    for _ in 0..k.max(0) {
        out = compress(&out);
    }
    for _ in 0..(-k).max(0) {
        out = dilate(&out)?;
    }
    Ok(out.scaled(lambda * lambda))
}

pub fn scale_data(pair: (&Field, &Field), lambda: f64) -> Result<(Field, Field)> {
    pair.0.check_same_grid(pair.1)?;
    Ok((scale_field(pair.0, lambda)?, scale_field(pair.1, lambda)?))
}

/// `λ² f(λx)` represented exactly: the samples are kept and placed on the grid with half
/// width `L/λ`.
pub fn rescale_onto_shrunk_grid(f: &Field, lambda: f64) -> Result<Field> {
    let grid = f.grid().shrunk(lambda)?;
    Ok(f.regrid(&grid)?.scaled(lambda * lambda))
}

fn check_boost(grid: &Grid, xi: &[f64]) -> Result<()> {
    if !grid.on_dual_lattice(xi) {
        return Err(Error::InvalidArgument(format!(
            "boost {xi:?} is not on the dual lattice (pi/{})Z^{}",
            grid.half_width(),
            grid.dim()
        )));
    }
    Ok(())
}

fn modulate(f: &Field, xi: &[f64], factor: f64, phase: f64) -> Field {
    let grid = f.grid();
    let dim = grid.dim();
    let mut x = [0.0; 3];
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(p, &z)| {
            grid.point(p, &mut x);
            let dot: f64 = x[..dim].iter().zip(xi).map(|(a, b)| a * b).sum();
            z * Complex64::from_polar(1.0, factor * dot + phase)
        })
        .collect();
    Field::from_values(grid, values).expect("same grid")
}

/// `(e^{ix·ξ} u, e^{2ix·ξ} v)`; `ξ` must lie on the dual lattice.
pub fn galilean_boost(pair: (&Field, &Field), xi: &[f64]) -> Result<(Field, Field)> {
    pair.0.check_same_grid(pair.1)?;
    check_boost(pair.0.grid(), xi)?;
    Ok((modulate(pair.0, xi, 1.0, 0.0), modulate(pair.1, xi, 2.0, 0.0)))
}

/// `f(x - a)` on the torus, as a spectral phase.
pub fn translate(f: &Field, shift: &[f64]) -> Result<Field> {
    let grid = f.grid();
    let dim = grid.dim();
    if shift.len() != dim {
        return Err(Error::InvalidArgument("shift length does not match dimension".into()));
    }
    let mut spec = f.spectrum();
    let mut k = [0.0; 3];
    for (p, z) in spec.iter_mut().enumerate() {
        grid.wave_vector(p, &mut k);
        let dot: f64 = k[..dim].iter().zip(shift).map(|(a, b)| a * b).sum();
        *z *= Complex64::from_polar(1.0, -dot);
    }
    Field::from_spectrum(grid, spec)
}

/// `T(ξ) D(h)`: dilation by the dyadic `h` followed by the boost `ξ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deformation {
    pub xi: Vec<f64>,
    pub h: f64,
}

impl Deformation {
    pub fn identity(dim: usize) -> Self {
        Deformation { xi: vec![0.0; dim], h: 1.0 }
    }

    /// `self ∘ other`, using `D(h) T(ξ) = T(hξ) D(h)`.
    pub fn compose(&self, other: &Deformation) -> Deformation {
        Deformation {
            xi: self.xi.iter().zip(&other.xi).map(|(a, b)| a + self.h * b).collect(),
            h: self.h * other.h,
        }
    }

    pub fn apply(&self, pair: (&Field, &Field)) -> Result<(Field, Field)> {
        let (u, v) = scale_data(pair, self.h)?;
        galilean_boost((&u, &v), &self.xi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub absolute: f64,
    pub relative: f64,
}

/// Distance at time `t_end` between evolving the boosted data and boosting the evolved
/// data, where the latter is `(e^{-it|ξ|² + ix·ξ} u(x - 2ξt), e^{-2it|ξ|² + 2ix·ξ} v(x - 2ξt))`.
pub fn check_equivariance(
    data: (&Field, &Field),
    xi: &[f64],
    cfg: &SolverConfig,
) -> Result<EquivarianceReport> {
    let (bu, bv) = galilean_boost(data, xi)?;
    let t = cfg.t_end;
    let boosted_run = propagate(&State::new(bu, bv, 0.0)?, cfg)?;
    let plain_run = propagate(&State::new(data.0.clone(), data.1.clone(), 0.0)?, cfg)?;

    let shift: Vec<f64> = xi.iter().map(|c| 2.0 * c * t).collect();
    let xi2: f64 = xi.iter().map(|c| c * c).sum();
    let u = modulate(&translate(&plain_run.u, &shift)?, xi, 1.0, -t * xi2);
    let v = modulate(&translate(&plain_run.v, &shift)?, xi, 2.0, -2.0 * t * xi2);

    let du = boosted_run.u.sub(&u)?.norm_sq();
    let dv = boosted_run.v.sub(&v)?.norm_sq();
    let absolute = (du + dv).sqrt();
    let scale = (boosted_run.u.norm_sq() + boosted_run.v.norm_sq()).sqrt();
    let relative = if scale == 0.0 { absolute } else { absolute / scale };
    Ok(EquivarianceReport { absolute, relative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::observables::energy;

    fn close(a: &Field, b: &Field, tol: f64) {
        let d = a.sub(b).unwrap().max_abs();
        assert!(d < tol, "max difference {d}");
    }

    #[test]
    fn identity_transforms() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let u = Gaussian::new(1.0, 1.0).sample(&g).unwrap();
        let v = Gaussian { amplitude: 0.5, width: 1.3, center: vec![0.5], phase: 0.2, boost: vec![] }
            .sample(&g)
            .unwrap();
        let (su, sv) = scale_data((&u, &v), 1.0).unwrap();
        assert_eq!(su.values(), u.values());
        assert_eq!(sv.values(), v.values());
        let (bu, bv) = galilean_boost((&u, &v), &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(bu.values(), u.values());
        assert_eq!(bv.values(), v.values());
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = make_grid(2, 16, 4.0).unwrap();
        let u = Gaussian::new(1.0, 1.0).sample(&g).unwrap();
        assert!(scale_field(&u, 3.0).is_err());
        assert!(scale_field(&u, -2.0).is_err());
        assert!(galilean_boost((&u, &u), &[0.3, 0.0]).is_err());
        assert!(galilean_boost((&u, &u), &[std::f64::consts::PI / 4.0, 0.0]).is_ok());
    }

    #[test]
    fn sampled_scaling_matches_closed_form() {
        let g = make_grid(2, 128, 16.0).unwrap();
        let gauss = Gaussian { amplitude: 0.9, width: 1.0, center: vec![0.5, -0.25], phase: 0.3, boost: vec![] };
        let f = gauss.sample(&g).unwrap();
        close(&scale_field(&f, 2.0).unwrap(), &gauss.scaled(2.0).sample(&g).unwrap(), 1e-12);
        close(&scale_field(&f, 0.5).unwrap(), &gauss.scaled(0.5).sample(&g).unwrap(), 1e-10);
        close(&scale_field(&scale_field(&f, 0.5).unwrap(), 2.0).unwrap(), &f, 1e-10);
    }

    #[test]
    fn boost_adds_kinetic_energy() {
        let g = make_grid(3, 32, 2.0 * std::f64::consts::PI).unwrap();
        let u = Gaussian::new(0.8, 1.0).sample(&g).unwrap();
        let v = u.clone();
        let xi = [1.0, -0.5, 0.5];
        let (bu, bv) = galilean_boost((&u, &v), &xi).unwrap();
        let before = energy(&State::new(u.clone(), v.clone(), 0.0).unwrap());
        let after = energy(&State::new(bu, bv, 0.0).unwrap());
        let xi2: f64 = xi.iter().map(|c| c * c).sum();
        assert!((after.mass - before.mass).abs() < 1e-12 * before.mass);
        // real profile: the cross term vanishes
        let expect_u = before.kinetic_u + xi2 * u.norm_sq();
        let expect_v = before.kinetic_v + 0.5 * 4.0 * xi2 * v.norm_sq();
        assert!((after.kinetic_u - expect_u).abs() < 1e-9 * expect_u);
        assert!((after.kinetic_v - expect_v).abs() < 1e-9 * expect_v);
    }

    #[test]
    fn translation_is_periodic_shift() {
        let g = make_grid(1, 32, 4.0).unwrap();
        let f = Gaussian::new(1.0, 0.7).sample(&g).unwrap();
        let shifted = translate(&f, &[3.0 * g.dx()]).unwrap();
        for j in 0..32 {
            let expect = f.values()[(j + 32 - 3) % 32];
            assert!((shifted.values()[j] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn group_law() {
        let g = make_grid(2, 128, 4.0 * std::f64::consts::PI).unwrap();
        let u = Gaussian::new(1.0, 0.8).sample(&g).unwrap();
        let v = Gaussian { amplitude: 0.4, width: 0.7, center: vec![0.5, 0.0], phase: 0.0, boost: vec![] }
            .sample(&g)
            .unwrap();
        let a = Deformation { xi: vec![0.5, 1.0], h: 2.0 };
        let b = Deformation { xi: vec![-1.0, 0.5], h: 0.5 };
        let (u1, v1) = b.apply((&u, &v)).unwrap();
        let (u2, v2) = a.apply((&u1, &v1)).unwrap();
        let (u3, v3) = a.compose(&b).apply((&u, &v)).unwrap();
        close(&u2, &u3, 1e-10);
        close(&v2, &v3, 1e-10);
        assert_eq!(Deformation::identity(2).compose(&a), a);
    }

    #[test]
    fn trivial_boost_has_zero_discrepancy() {
        let g = make_grid(3, 16, 2.0 * std::f64::consts::PI).unwrap();
        let u = Gaussian::new(0.5, 1.0).sample(&g).unwrap();
        let cfg = SolverConfig { dt: 0.01, t_end: 0.05, ..Default::default() };
        let r = check_equivariance((&u, &u), &[0.0, 0.0, 0.0], &cfg).unwrap();
        assert!(r.absolute < 1e-12);
    }

    #[test]
    fn linear_regime_equivariance_is_exact() {
        // data decayed at the box edge and resolved after the boost, so no mode wraps
        let g = make_grid(2, 64, 2.0 * std::f64::consts::PI).unwrap();
        let u = Gaussian::new(1e-7, 0.7).sample(&g).unwrap();
        let v = Gaussian::new(1e-7, 0.8).sample(&g).unwrap();
        let cfg = SolverConfig { dt: 0.05, t_end: 0.5, dealias: false, ..Default::default() };
        let r = check_equivariance((&u, &v), &[1.0, 0.5], &cfg).unwrap();
        assert!(r.relative < 1e-11, "relative {}", r.relative);
    }
}
