//! Non-scattering certificates for data `(u0, v0)`.
//!
//! * energy sign: `E[u0, v0] <= 0` with nontrivial data;
//! * eigenvalue: if `H = -Δ - 2 Re(e^{iθ} v0)` has a negative eigenvalue `ẽ` with
//!   eigenfunction `φ`, then `u0 = c e^{-iθ/2} φ` with `c² = ‖∇v0‖² / (2|ẽ| ‖φ‖²)` has
//!   zero energy, so `ℓ_{v0} <= ‖φ‖_{FḢ^{1/2}} ‖∇v0‖ / (√(2|ẽ|) ‖φ‖)`;
//! * large data: with `u0 = v0^{1/2} |v0|^{1/2}` and `d = ‖∇v0‖ ‖v0‖_{L³}^{-3/2}`, the pair
//!   `(c^{1/2} d u0, c v0)` has negative energy once `c` is large.

use std::f64::consts::PI;

use log::debug;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::grid::{boundary_mass_fraction, fh_half_norm, lp_norm, sobolev_seminorm, Field, Grid};
use crate::observables::energy;

/// Number of phase angles tried by [`theta_scan`].
pub const THETA_SAMPLES: usize = 16;

/// Eigenfunctions with more boundary-layer mass than this are box states, not bound states.
pub const MAX_BOUNDARY_FRACTION: f64 = 1e-2;

/// Shift of the spectral preconditioner `(-Δ + PRECONDITIONER_SHIFT)⁻¹`.
pub const PRECONDITIONER_SHIFT: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Rayleigh quotient of `phi`.
    pub e_tilde: f64,
    /// Real eigenfunction with unit L² norm, positive at its largest modulus.
    pub phi: Field,
    pub theta: f64,
    pub converged: bool,
    /// `‖Hφ - ẽφ‖_{L²}`.
    pub residual: f64,
    pub iterations: usize,
    pub boundary_fraction: f64,
}

/// `-2 Re(e^{iθ} v0)`.
pub fn potential(v0: &Field, theta: f64) -> Vec<f64> {
    let phase = Complex64::from_polar(1.0, theta);
    v0.values().iter().map(|&z| -2.0 * (phase * z).re).collect()
}

/// `-Δ x + V x` for real `x`.
fn apply_h(grid: &Grid, pot: &[f64], x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    grid.forward(&mut buf);
    for (z, &k2) in buf.iter_mut().zip(grid.k_sq()) {
        *z *= k2;
    }
    grid.inverse(&mut buf);
    buf.iter().zip(pot).zip(x).map(|((z, &p), &a)| z.re + p * a).collect()
}

fn precondition(grid: &Grid, r: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = r.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    grid.forward(&mut buf);
    for (z, &k2) in buf.iter_mut().zip(grid.k_sq()) {
        *z /= k2 + PRECONDITIONER_SHIFT;
    }
    grid.inverse(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

enum Solve {
    Done(Vec<f64>),
    /// `H - σ` is not positive definite: σ lies above the lowest eigenvalue.
    Indefinite,
}

/// Preconditioned CG for `(H - σ) w = b`.
fn pcg(grid: &Grid, pot: &[f64], sigma: f64, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Solve> {
    let op = |x: &[f64]| -> Vec<f64> {
        apply_h(grid, pot, x).iter().zip(x).map(|(h, &a)| h - sigma * a).collect()
    };
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut z = precondition(grid, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = op(&p);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Ok(Solve::Indefinite);
        }
        let alpha = rz / curvature;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * b_norm {
            return Ok(Solve::Done(x));
        }
        z = precondition(grid, &r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: dot(&r, &r).sqrt() / b_norm })
}

fn normalize(x: &mut [f64], dv: f64) {
    let n = (dot(x, x) * dv).sqrt();
    x.iter_mut().for_each(|a| *a /= n);
}

/// Rayleigh quotient and residual norm of a unit vector.
fn rayleigh(grid: &Grid, pot: &[f64], x: &[f64]) -> (f64, f64) {
    let dv = grid.cell_volume();
    let hx = apply_h(grid, pot, x);
    let rho = dot(x, &hx) * dv;
    let res: f64 = hx.iter().zip(x).map(|(h, a)| (h - rho * a).powi(2)).sum::<f64>() * dv;
    (rho, res.sqrt())
}

fn initial_vector(grid: &Grid, pot: &[f64]) -> Vec<f64> {
    let well: Vec<f64> = pot.iter().map(|&p| (-p).max(0.0)).collect();
    if well.iter().any(|&w| w > 0.0) {
        well
    } else {
        grid.r_sq().iter().map(|&r2| (-0.5 * r2).exp()).collect()
    }
}

/// Lowest eigenpair of `H = -Δ - 2 Re(e^{iθ} v0)` by shifted inverse iteration.
///
/// The shift starts at `min V - 1`, a guaranteed lower bound, and moves to
/// `ρ - max(‖r‖, 1e-3)` after each step; if CG meets negative curvature the shift is pushed
/// back down. Converged when `‖Hφ - ρφ‖ < tol`.
pub fn lowest_eigenpair(v0: &Field, theta: f64, tol: f64, max_iter: usize) -> Result<EigenResult> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidArgument("tolerance and iteration budget must be positive".into()));
    }
    let grid = v0.grid();
    let dv = grid.cell_volume();
    let pot = potential(v0, theta);
    let v_min = pot.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = v_min - 1.0;
    let mut sigma = floor;
    let mut x = initial_vector(grid, &pot);
    normalize(&mut x, dv);
    let (mut rho, mut res) = rayleigh(grid, &pot, &x);
    let mut iterations = 0;
    while res >= tol && iterations < max_iter {
        iterations += 1;
        match pcg(grid, &pot, sigma, &x, 1e-12, 2000)? {
            Solve::Done(w) => {
                x = w;
                normalize(&mut x, dv);
                (rho, res) = rayleigh(grid, &pot, &x);
                sigma = sigma.max(rho - res.max(1e-3));
            }
            Solve::Indefinite => {
                sigma = floor.max(sigma - 2.0 * (rho - sigma).abs().max(1e-3));
            }
        }
    }
    let converged = res < tol;
    if !converged {
        return Err(Error::NoConvergence { iterations, residual: res });
    }

    let (imax, _) = x
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, &a)| if a.abs() > bv { (i, a.abs()) } else { (bi, bv) });
    if x[imax] < 0.0 {
        x.iter_mut().for_each(|a| *a = -*a);
    }
    let phi = Field::from_values(grid, x.iter().map(|&a| Complex64::new(a, 0.0)).collect())?;
    let boundary_fraction = boundary_mass_fraction(&phi);
    debug!("theta {theta:.4}: e_tilde {rho:.12} after {iterations} iterations, residual {res:.2e}");
    if rho >= -tol {
        return Err(Error::NoNegativeEigenvalue { e_tilde: rho });
    }
    if boundary_fraction > MAX_BOUNDARY_FRACTION {
        return Err(Error::Delocalized { boundary_fraction });
    }
    Ok(EigenResult { e_tilde: rho, phi, theta, converged, residual: res, iterations, boundary_fraction })
}

/// Run [`lowest_eigenpair`] at `THETA_SAMPLES` equally spaced angles and keep the lowest.
///
/// When no angle yields a localized negative eigenvalue the error of the first angle is
/// returned.
pub fn theta_scan(v0: &Field, tol: f64, max_iter: usize) -> Result<EigenResult> {
    let results: Vec<Result<EigenResult>> = (0..THETA_SAMPLES)
        .into_par_iter()
        .map(|j| lowest_eigenpair(v0, 2.0 * PI * j as f64 / THETA_SAMPLES as f64, tol, max_iter))
        .collect();
    let mut best: Option<EigenResult> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.e_tilde < b.e_tilde) {
                    best = Some(res);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one angle"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    EnergySign,
    Eigenvalue,
    LargeData,
}

/// What was evaluated to support (or fail to support) a bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// The data itself.
    Data { energy: f64, fh_half_u: f64 },
    /// `u0 = scale · e^{-iθ/2} φ`.
    EigenDirection { theta: f64, e_tilde: f64, scale: f64, energy: f64, kinetic_scale: f64 },
    /// `(c^{1/2} d u0, c v0)` with `u0 = v0^{1/2} |v0|^{1/2}`.
    LargeData { c: f64, d: f64, energy: f64, c_threshold: f64, identity_residual: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    /// Upper bound on `ℓ_{v0}`; present exactly when the criterion fired.
    pub bound_value: Option<f64>,
    pub witness: Witness,
}

impl BoundReport {
    pub fn fired(&self) -> bool {
        self.bound_value.is_some()
    }
}

/// Fires when `E[u0, v0] <= 0` for nontrivial data, with bound `‖u0‖_{FḢ^{1/2}}`.
pub fn energy_sign_bound(u0: &Field, v0: &Field) -> Result<BoundReport> {
    let state = State::new(u0.clone(), v0.clone(), 0.0)?;
    let e = energy(&state).energy;
    let fh = fh_half_norm(u0);
    let trivial = u0.is_zero() && v0.is_zero();
    Ok(BoundReport {
        kind: BoundKind::EnergySign,
        bound_value: (e <= 0.0 && !trivial).then_some(fh),
        witness: Witness::Data { energy: e, fh_half_u: fh },
    })
}

/// `c e^{-iθ/2} φ` with `c² = ‖∇v0‖² / (2|ẽ| ‖φ‖²)`.
pub fn eigen_witness(v0: &Field, res: &EigenResult) -> Result<(Field, f64)> {
    if res.e_tilde >= 0.0 {
        return Err(Error::NoNegativeEigenvalue { e_tilde: res.e_tilde });
    }
    res.phi.check_same_grid(v0)?;
    let grad_v = sobolev_seminorm(v0, 1.0);
    let c = grad_v / ((2.0 * res.e_tilde.abs()).sqrt() * res.phi.norm_sq().sqrt());
    Ok((res.phi.scaled(Complex64::from_polar(c, -0.5 * res.theta)), c))
}

/// The eigenvalue bound and its zero-energy witness.
pub fn eigenvalue_bound(v0: &Field, res: &EigenResult) -> Result<BoundReport> {
    let (u0, c) = eigen_witness(v0, res)?;
    let grad_v = sobolev_seminorm(v0, 1.0);
    let bound = fh_half_norm(&res.phi) * grad_v / ((2.0 * res.e_tilde.abs()).sqrt() * res.phi.norm_sq().sqrt());
    let report = energy(&State::new(u0, v0.clone(), 0.0)?);
    Ok(BoundReport {
        kind: BoundKind::Eigenvalue,
        bound_value: Some(bound),
        witness: Witness::EigenDirection {
            theta: res.theta,
            e_tilde: res.e_tilde,
            scale: c,
            energy: report.energy,
            kinetic_scale: report.kinetic_u + report.kinetic_v,
        },
    })
}

/// Principal square root with `sqrt(0) = 0`.
fn principal_sqrt(z: Complex64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        z
    } else {
        z.sqrt()
    }
}

/// `u0 = v0^{1/2} |v0|^{1/2}` pointwise, principal branch.
pub fn large_data_profile(v0: &Field) -> Field {
    v0.map(|z| principal_sqrt(z) * z.norm().sqrt())
}

/// Ingredients of the large-data construction that do not depend on `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeDataParts {
    /// `‖∇v0‖ ‖v0‖_{L³}^{-3/2}`.
    pub d: f64,
    /// `E < 0` exactly for `c > c_threshold`.
    pub c_threshold: f64,
    /// `|∫ Re(u0² v̄0) - ‖v0‖³_{L³}|`.
    pub identity_residual: f64,
    /// `‖d u0‖_{FḢ^{1/2}}`.
    pub fh_half_du0: f64,
}

pub fn large_data_parts(v0: &Field) -> Result<LargeDataParts> {
    if v0.is_zero() {
        return Err(Error::InvalidArgument("large-data construction needs v0 != 0".into()));
    }
    let u0 = large_data_profile(v0);
    let l3 = lp_norm(v0, 3.0).powi(3);
    let grad_v = sobolev_seminorm(v0, 1.0);
    let d = grad_v / l3.sqrt();
    let pairing: f64 = u0
        .values()
        .iter()
        .zip(v0.values())
        .map(|(&a, &b)| (a * a * b.conj()).re)
        .sum::<f64>()
        * v0.grid().cell_volume();
    // E(c) = c d² ‖∇u0‖² + c² (½‖∇v0‖² - 2 d² ∫Re u0² v̄0) = c d² ‖∇u0‖² - (3/2) c² ‖∇v0‖²
    let grad_u = sobolev_seminorm(&u0, 1.0);
    let c_threshold = 2.0 * d * d * grad_u * grad_u / (3.0 * grad_v * grad_v);
    Ok(LargeDataParts {
        d,
        c_threshold,
        identity_residual: (pairing - l3).abs(),
        fh_half_du0: d * fh_half_norm(&u0),
    })
}

/// Evaluate `(c^{1/2} d u0, c v0)` for every `c` and report those with negative energy,
/// in increasing `c`. Empty when none fires.
pub fn large_data_bound(v0: &Field, c_list: &[f64]) -> Result<Vec<BoundReport>> {
    let parts = large_data_parts(v0)?;
    let u0 = large_data_profile(v0);
    let mut cs: Vec<f64> = c_list.to_vec();
    if cs.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidArgument("large-data scales must be positive".into()));
    }
    cs.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for c in cs {
        let data = State::new(u0.scaled(c.sqrt() * parts.d), v0.scaled(c), 0.0)?;
        let e = energy(&data).energy;
        if e < 0.0 {
            out.push(BoundReport {
                kind: BoundKind::LargeData,
                bound_value: Some(c.sqrt() * parts.fh_half_du0),
                witness: Witness::LargeData {
                    c,
                    d: parts.d,
                    energy: e,
                    c_threshold: parts.c_threshold,
                    identity_residual: parts.identity_residual,
                },
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn well(grid: &Grid, depth: f64, width: f64) -> Field {
        Field::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            Complex64::new(depth * (-r2 / (width * width)).exp(), 0.0)
        })
    }

    /// Dense `-d²/dx² + V` from the trigonometric interpolant's second derivative.
    fn dense_1d(grid: &Grid, pot: &[f64]) -> DMatrix<f64> {
        let n = grid.n();
        let mut m = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let zero = vec![0.0; n];
            let h = apply_h(grid, &zero, &e);
            for row in 0..n {
                m[(row, col)] = h[row];
            }
            m[(col, col)] += pot[col];
        }
        m
    }

    #[test]
    fn one_dimensional_well_matches_dense() {
        let g = make_grid(1, 128, 10.0).unwrap();
        let v0 = well(&g, 3.0, 1.0);
        let res = lowest_eigenpair(&v0, 0.0, 1e-10, 200).unwrap();
        let m = dense_1d(&g, &potential(&v0, 0.0));
        let lowest = SymmetricEigen::new(m).eigenvalues.min();
        assert!((res.e_tilde - lowest).abs() < 1e-10, "{} vs {lowest}", res.e_tilde);
        assert!((res.phi.norm_sq() - 1.0).abs() < 1e-12);
        assert!(res.phi.values().iter().all(|z| z.im == 0.0));
        assert!(res.phi.values()[64].re > 0.0);
    }

    #[test]
    fn zero_potential_has_no_negative_eigenvalue() {
        let g = make_grid(3, 16, 6.0).unwrap();
        match lowest_eigenpair(&Field::zeros(&g), 0.0, 1e-8, 100) {
            Err(Error::NoNegativeEigenvalue { e_tilde }) => assert!(e_tilde.abs() < 1e-8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shallow_well_on_torus_is_delocalized() {
        let g = make_grid(3, 16, 8.0).unwrap();
        let v0 = well(&g, 0.05, 1.0);
        assert!(matches!(lowest_eigenpair(&v0, 0.0, 1e-9, 200), Err(Error::Delocalized { .. })));
    }

    #[test]
    fn theta_rotates_complex_potential() {
        let g = make_grid(1, 64, 10.0).unwrap();
        let v0 = well(&g, 2.0, 1.0).scaled(Complex64::from_polar(1.0, 1.0));
        let best = theta_scan(&v0, 1e-9, 200).unwrap();
        let direct = lowest_eigenpair(&v0.scaled(Complex64::from_polar(1.0, -1.0)), 0.0, 1e-9, 200).unwrap();
        // the scan grid contains no angle exactly at -1, so it cannot beat the aligned potential
        assert!(best.e_tilde >= direct.e_tilde - 1e-9);
        assert!(best.e_tilde < 0.9 * direct.e_tilde);
    }

    #[test]
    fn deeper_well_lowers_eigenvalue() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let v0 = well(&g, 4.0, 1.0);
        let a = lowest_eigenpair(&v0, 0.0, 1e-9, 200).unwrap();
        let b = lowest_eigenpair(&v0.scaled(2.0), 0.0, 1e-9, 200).unwrap();
        assert!(b.e_tilde < a.e_tilde);
        assert!(eigenvalue_bound(&v0.scaled(2.0), &b).unwrap().fired());
    }

    #[test]
    fn eigen_witness_has_zero_energy() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let v0 = well(&g, 4.0, 1.0).scaled(Complex64::from_polar(1.0, 0.7));
        let res = lowest_eigenpair(&v0, -0.7, 1e-10, 200).unwrap();
        let report = eigenvalue_bound(&v0, &res).unwrap();
        let Witness::EigenDirection { energy, kinetic_scale, scale, .. } = report.witness else {
            panic!("wrong witness")
        };
        assert!(energy.abs() < 1e-8 * kinetic_scale, "{energy} vs {kinetic_scale}");
        let (u0, _) = eigen_witness(&v0, &res).unwrap();
        assert!((fh_half_norm(&u0) - report.bound_value.unwrap()).abs() < 1e-12 * scale);
        assert!(energy_sign_bound(&u0, &v0).unwrap().fired() == (energy <= 0.0));
    }

    #[test]
    fn energy_sign_on_pure_v() {
        let g = make_grid(3, 16, 6.0).unwrap();
        let v0 = well(&g, 1.0, 1.0);
        let r = energy_sign_bound(&Field::zeros(&g), &v0).unwrap();
        assert!(!r.fired());
        let r = energy_sign_bound(&Field::zeros(&g), &Field::zeros(&g)).unwrap();
        assert!(!r.fired());
    }

    #[test]
    fn large_data_identity_and_threshold() {
        let g = make_grid(3, 32, 8.0).unwrap();
        let v0 = well(&g, 1.0, 1.5).scaled(Complex64::new(-0.6, 0.8));
        let parts = large_data_parts(&v0).unwrap();
        assert!(parts.identity_residual < 1e-12 * lp_norm(&v0, 3.0).powi(3));
        let c0 = parts.c_threshold;
        let below = large_data_bound(&v0, &[0.9 * c0]).unwrap();
        assert!(below.is_empty());
        let reports = large_data_bound(&v0, &[8.0 * c0, 1.1 * c0, 2.0 * c0]).unwrap();
        assert_eq!(reports.len(), 3);
        let per_root: Vec<f64> = reports
            .iter()
            .map(|r| match r.witness {
                Witness::LargeData { c, .. } => r.bound_value.unwrap() / c.sqrt(),
                _ => unreachable!(),
            })
            .collect();
        assert!(per_root.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12 * w[0]));
        assert!(large_data_bound(&Field::zeros(&g), &[1.0]).is_err());
    }
}
