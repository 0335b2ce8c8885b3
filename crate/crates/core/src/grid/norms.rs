use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Field, Grid, BOUNDARY_LAYER};
use crate::error::{Error, Result};

/// Exponents of a time-dependent Galilean norm `‖J_m^s(t) f‖_{L^r}` accumulated in `L^q_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub s: f64,
    pub r: f64,
    pub m: f64,
    pub q: f64,
}

impl NormSpec {
    pub fn new(s: f64, r: f64, m: f64, q: f64) -> Result<Self> {
        let spec = NormSpec { s, r, m, q };
        spec.validate()?;
        Ok(spec)
    }

    /// `W_1`: `L_t^6 X_{1/2}^{1/2, 18/7}`, the u-component space.
    pub fn w_u() -> Self {
        NormSpec { s: 0.5, r: 18.0 / 7.0, m: 0.5, q: 6.0 }
    }

    /// `W_2`: `L_t^6 X_1^{1/2, 18/7}`, the v-component space.
    pub fn w_v() -> Self {
        NormSpec { s: 0.5, r: 18.0 / 7.0, m: 1.0, q: 6.0 }
    }

    /// `S`: `L_t^{3/2} L_x^{9/2}`.
    pub fn s_space(m: f64) -> Self {
        NormSpec { s: 0.0, r: 4.5, m, q: 1.5 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r >= 1.0 && self.q >= 1.0 && self.s >= 0.0 && (self.m == 0.5 || self.m == 1.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid norm spec {self:?}")))
        }
    }
}

/// `(sum |f_j|^r dx^dim)^{1/r}`; `r = inf` gives the max modulus.
pub fn lp_norm(f: &Field, r: f64) -> f64 {
    assert!(r >= 1.0, "Lebesgue exponent must be at least 1, got {r}");
    if r.is_infinite() {
        return f.max_abs();
    }
    let dv = f.grid().cell_volume();
    let sum: f64 = if r == 2.0 {
        f.values().iter().map(|z| z.norm_sqr()).sum()
    } else {
        f.values().iter().map(|z| z.norm().powf(r)).sum()
    };
    (sum * dv).powf(1.0 / r)
}

/// `‖ |∇|^s f ‖_{L^2}` from the spectrum.
pub fn sobolev_seminorm(f: &Field, s: f64) -> f64 {
    assert!(s >= 0.0);
    let spec = f.spectrum();
    let sum: f64 = spec
        .iter()
        .zip(f.grid().k_sq())
        .map(|(z, &k2)| {
            let w = if s == 0.0 {
                1.0
            } else if k2 == 0.0 {
                0.0
            } else {
                k2.powf(s)
            };
            w * z.norm_sqr()
        })
        .sum();
    (sum * f.grid().cell_volume()).sqrt()
}

/// Radial moment `int_{|x|<R} |x| e^{i k.x} dx` as a function of `|k|`.
fn ball_weight(dim: usize, k: f64, radius: f64) -> f64 {
    match dim {
        1 => {
            if k == 0.0 {
                radius * radius
            } else {
                let kr = k * radius;
                2.0 * (radius * kr.sin() / k + (kr.cos() - 1.0) / (k * k))
            }
        }
        3 => {
            if k == 0.0 {
                PI * radius.powi(4)
            } else {
                let kr = k * radius;
                let k3 = k * k * k;
                let inner = 2.0 * radius * kr.sin() / (k * k) - (radius * radius / k - 2.0 / k3) * kr.cos()
                    - 2.0 / k3;
                4.0 * PI * inner / k
            }
        }
        _ => unreachable!("ball weights are only tabulated for dimensions 1 and 3"),
    }
}

/// `‖ |x|^{1/2} f ‖_{L^2}` with `|x|` the distance to the box center.
///
/// In one and three dimensions the integral of `|x| |f|^2` over the inscribed ball is
/// evaluated exactly for the trigonometric interpolant of `|f|^2`, which avoids the
/// algebraic quadrature error caused by the kink of `|x|` at the origin. Mass outside the
/// inscribed ball is neglected (see [`boundary_mass_fraction`]). In two dimensions the
/// plain grid quadrature is used.
pub fn fh_half_norm(f: &Field) -> f64 {
    let grid = f.grid();
    let dim = grid.dim();
    if dim == 2 {
        return weighted_lp_norm(f, 0.5, 2.0);
    }
    let mut rho: Vec<Complex64> = f.values().iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
    grid.forward(&mut rho);
    let radius = grid.half_width();
    let norm = (grid.len() as f64).sqrt();
    let m_axis = grid.m_axis();
    let mut idx = [0usize; 3];
    let mut total = 0.0;
    for (p, (c, &k2)) in rho.iter().zip(grid.k_sq()).enumerate() {
        grid.multi_index(p, &mut idx[..dim]);
        let parity: i64 = idx[..dim].iter().map(|&i| m_axis[i]).sum();
        let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        total += sign * c.re * ball_weight(dim, k2.sqrt(), radius);
    }
    (total / norm).max(0.0).sqrt()
}

/// `‖ |x|^s f ‖_{L^r}` by plain grid quadrature.
pub fn weighted_lp_norm(f: &Field, s: f64, r: f64) -> f64 {
    let weighted = Field::from_values(
        f.grid(),
        f.values()
            .iter()
            .zip(f.grid().r_sq())
            .map(|(&z, &r2)| z * r2.powf(0.5 * s))
            .collect(),
    )
    .expect("same grid");
    lp_norm(&weighted, r)
}

/// `(|t|/m)^s ‖ |∇|^s M_m(-t) f ‖_{L^r}` with `M_m(-t) = exp(-i m |x|^2 / (2t))`.
///
/// The quadratic phase must be resolved by the grid where `f` is non-negligible; for
/// small `|t|` prefer [`galilean_norm`], which never forms the phase.
pub fn x_norm(f: &Field, t: f64, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(
            "the pseudo-conformal form of the norm needs t != 0".into(),
        ));
    }
    if spec.s == 0.0 {
        return Ok(lp_norm(f, spec.r));
    }
    let grid = f.grid();
    let phased: Vec<Complex64> = f
        .values()
        .iter()
        .zip(grid.r_sq())
        .map(|(&z, &r2)| z * Complex64::from_polar(1.0, -spec.m * r2 / (2.0 * t)))
        .collect();
    let g = Field::from_values(grid, phased)?;
    let s = spec.s;
    let h = g.apply_symbol(|k2| Complex64::new(if k2 == 0.0 { 0.0 } else { k2.powf(0.5 * s) }, 0.0));
    Ok((t.abs() / spec.m).powf(s) * lp_norm(&h, spec.r))
}

/// `‖ J_m^s(t) f ‖_{L^r}` evaluated as `e^{it/(2m) Δ} |x|^s e^{-it/(2m) Δ} f`.
///
/// Equal to [`x_norm`] for `t != 0` and to `‖|x|^s f‖_{L^r}` at `t = 0`.
pub fn galilean_norm(f: &Field, t: f64, spec: &NormSpec) -> f64 {
    let a = t / (2.0 * spec.m);
    let grid = f.grid();
    let mut s = f.spectrum();
    for (z, &k2) in s.iter_mut().zip(grid.k_sq()) {
        *z *= Complex64::from_polar(1.0, a * k2);
    }
    grid.inverse(&mut s);
    let half_s = 0.5 * spec.s;
    for (z, &r2) in s.iter_mut().zip(grid.r_sq()) {
        *z *= r2.powf(half_s);
    }
    grid.forward(&mut s);
    for (z, &k2) in s.iter_mut().zip(grid.k_sq()) {
        *z *= Complex64::from_polar(1.0, -a * k2);
    }
    grid.inverse(&mut s);
    lp_norm(&Field::from_values(grid, s).expect("same grid"), spec.r)
}

/// Fraction of `int |f|^2` lying within `BOUNDARY_LAYER * L` of any face.
pub fn boundary_mass_fraction(f: &Field) -> f64 {
    let grid: &Grid = f.grid();
    let inner = (1.0 - BOUNDARY_LAYER) * grid.half_width();
    let dim = grid.dim();
    let mut x = [0.0; 3];
    let mut edge = 0.0;
    let mut total = 0.0;
    for (p, z) in f.values().iter().enumerate() {
        let w = z.norm_sqr();
        total += w;
        grid.point(p, &mut x);
        if x[..dim].iter().any(|c| c.abs() > inner) {
            edge += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        edge / total
    }
}
