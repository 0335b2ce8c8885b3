//! Strang-split pseudo-spectral time stepping of
//!
//! ```text
//! i u_t + Δu   = -2 v ū
//! i v_t + ½Δv  = -u²
//! ```
//!
//! Each step is a half linear step (exact Fourier multiplier), a full pointwise
//! RK4 step of the zero-dispersion ODE `u' = 2i v ū`, `v' = i u²`, and another half
//! linear step. The 2/3 mask, when enabled, is applied right after the nonlinear part.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{boundary_mass_fraction, galilean_norm, io, lp_norm, Field, Grid, NormSpec};
use crate::observables;

/// Default blowup thresholds are this multiple of the initial values.
pub const BLOWUP_FACTOR: f64 = 1e3;

#[derive(Clone, Debug)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl State {
    pub fn new(u: Field, v: Field, t: f64) -> Result<Self> {
        u.check_same_grid(&v)?;
        if !t.is_finite() {
            return Err(Error::InvalidArgument("state time must be finite".into()));
        }
        Ok(State { u, v, t })
    }

    pub fn zeros(grid: &Grid) -> Self {
        State {
            u: Field::zeros(grid),
            v: Field::zeros(grid),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn linf(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        io::write_checkpoint(&mut file, &self.u, &self.v, self.t)?;
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let (u, v, t) = io::read_checkpoint(&mut file)?;
        State::new(u, v, t)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubstepIntegrator {
    #[default]
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub substep_integrator: SubstepIntegrator,
    pub record_every: usize,
    /// Max-modulus threshold; `None` means `BLOWUP_FACTOR` times the initial value.
    pub blowup_linf: Option<f64>,
    /// Threshold on `‖∇u‖ + ‖∇v‖`; `None` means `BLOWUP_FACTOR` times the initial value.
    pub blowup_hs: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            t_end: 1.0,
            dealias: true,
            substep_integrator: SubstepIntegrator::Rk4,
            record_every: 10,
            blowup_linf: None,
            blowup_hs: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidArgument(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        self.step_count()?;
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        for (name, th) in [("blowup_linf", self.blowup_linf), ("blowup_hs", self.blowup_hs)] {
            if let Some(th) = th {
                if !(th > 0.0) {
                    return Err(Error::InvalidArgument(format!("{name} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Number of steps; `t_end` must be a whole number of steps.
    pub fn step_count(&self) -> Result<usize> {
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::InvalidArgument(format!(
                "t_end = {} is not a whole number of steps of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// `e^{i a t Δ}`: multiplies the spectrum by `exp(-i a |k|² dt)`.
pub fn linear_step(f: &Field, dt: f64, a: f64) -> Field {
    if dt == 0.0 {
        return f.clone();
    }
    f.apply_symbol(|k2| Complex64::from_polar(1.0, -a * k2 * dt))
}

#[inline]
fn rhs(u: Complex64, v: Complex64) -> (Complex64, Complex64) {
    let i = Complex64::i();
    (2.0 * i * v * u.conj(), i * u * u)
}

#[inline]
fn rk4_point(u: Complex64, v: Complex64, dt: f64) -> (Complex64, Complex64) {
    let (ku1, kv1) = rhs(u, v);
    let (ku2, kv2) = rhs(u + 0.5 * dt * ku1, v + 0.5 * dt * kv1);
    let (ku3, kv3) = rhs(u + 0.5 * dt * ku2, v + 0.5 * dt * kv2);
    let (ku4, kv4) = rhs(u + dt * ku3, v + dt * kv3);
    (
        u + dt / 6.0 * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4),
        v + dt / 6.0 * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4),
    )
}

fn nonlinear_in_place(u: &mut [Complex64], v: &mut [Complex64], dt: f64) -> bool {
    let mut finite = true;
    for (a, b) in u.iter_mut().zip(v.iter_mut()) {
        let (na, nb) = rk4_point(*a, *b, dt);
        finite &= na.re.is_finite() && na.im.is_finite() && nb.re.is_finite() && nb.im.is_finite();
        *a = na;
        *b = nb;
    }
    finite
}

/// Pointwise RK4 step of `u' = 2i v ū`, `v' = i u²`. Time is not advanced.
pub fn nonlinear_substep(state: &State, dt: f64) -> Result<State> {
    let mut u = state.u.clone();
    let mut v = state.v.clone();
    if !nonlinear_in_place(u.values_mut(), v.values_mut(), dt) {
        return Err(Error::NonFinite { t: state.t });
    }
    Ok(State { u, v, t: state.t })
}

/// Precomputed half-step multipliers for one `(grid, dt, dealias)` triple.
struct Stepper {
    grid: Grid,
    dt: f64,
    half_u: Vec<Complex64>,
    half_v: Vec<Complex64>,
    post_u: Vec<Complex64>,
    post_v: Vec<Complex64>,
}

impl Stepper {
    fn new(grid: &Grid, dt: f64, dealias: bool) -> Self {
        let half = |a: f64| -> Vec<Complex64> {
            grid.k_sq()
                .iter()
                .map(|&k2| Complex64::from_polar(1.0, -a * k2 * 0.5 * dt))
                .collect()
        };
        let half_u = half(1.0);
        let half_v = half(0.5);
        let masked = |h: &[Complex64]| -> Vec<Complex64> {
            if dealias {
                h.iter().zip(grid.dealias_mask()).map(|(&z, &m)| z * m).collect()
            } else {
                h.to_vec()
            }
        };
        Stepper {
            grid: grid.clone(),
            dt,
            post_u: masked(&half_u),
            post_v: masked(&half_v),
            half_u,
            half_v,
        }
    }

    fn multiply(&self, data: &mut [Complex64], symbol: &[Complex64]) {
        self.grid.forward(data);
        for (z, &m) in data.iter_mut().zip(symbol) {
            *z *= m;
        }
        self.grid.inverse(data);
    }

    fn step(&self, state: &mut State) -> Result<()> {
        self.multiply(state.u.values_mut(), &self.half_u);
        self.multiply(state.v.values_mut(), &self.half_v);
        if !nonlinear_in_place(state.u.values_mut(), state.v.values_mut(), self.dt) {
            return Err(Error::NonFinite { t: state.t });
        }
        self.multiply(state.u.values_mut(), &self.post_u);
        self.multiply(state.v.values_mut(), &self.post_v);
        state.t += self.dt;
        Ok(())
    }
}

/// One Strang step: half linear, full nonlinear (then 2/3 mask), half linear.
pub fn strang_step(state: &State, cfg: &SolverConfig) -> Result<State> {
    cfg.validate()?;
    let mut next = state.clone();
    Stepper::new(state.grid(), cfg.dt, cfg.dealias).step(&mut next)?;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Blowup { t: f64 },
}

/// Time-indexed diagnostics sampled every `record_every` steps.
///
/// Space-time accumulators are trapezoid integrals on the sampled sequence:
/// `s_*` of `‖·‖_{L^{9/2}}^{3/2}` and `w_*` of `‖J_m^{1/2}(t)·‖_{L^{18/7}}^6` with
/// `m = 1/2` for `u` and `m = 1` for `v`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub kinetic_u: Vec<f64>,
    pub kinetic_v: Vec<f64>,
    pub interaction: Vec<f64>,
    pub linf: Vec<f64>,
    pub gradient_norm: Vec<f64>,
    pub boundary_fraction: Vec<f64>,
    pub s_norm_u_accum: Vec<f64>,
    pub s_norm_v_accum: Vec<f64>,
    pub w_norm_u_accum: Vec<f64>,
    pub w_norm_v_accum: Vec<f64>,
    #[serde(skip)]
    last_integrands: [f64; 4],
}

/// CSV column order of [`DiagnosticSeries::write_csv`].
pub const CSV_COLUMNS: [&str; 13] = [
    "t",
    "mass",
    "energy",
    "kinetic_u",
    "kinetic_v",
    "interaction",
    "linf",
    "gradient_norm",
    "boundary_fraction",
    "s_u",
    "s_v",
    "w_u",
    "w_v",
];

impl DiagnosticSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Append a sample and advance the accumulators.
    pub fn record(&mut self, state: &State) {
        let report = observables::energy(state);
        let s_u = lp_norm(&state.u, 4.5).powf(1.5);
        let s_v = lp_norm(&state.v, 4.5).powf(1.5);
        let w_u = galilean_norm(&state.u, state.t, &NormSpec::w_u()).powi(6);
        let w_v = galilean_norm(&state.v, state.t, &NormSpec::w_v()).powi(6);
        let integrands = [s_u, s_v, w_u, w_v];

        let accum = if let Some(&t_prev) = self.times.last() {
            let h = state.t - t_prev;
            let last = self.len() - 1;
            let prev = [
                self.s_norm_u_accum[last],
                self.s_norm_v_accum[last],
                self.w_norm_u_accum[last],
                self.w_norm_v_accum[last],
            ];
            let mut out = [0.0; 4];
            for j in 0..4 {
                out[j] = prev[j] + 0.5 * h * (integrands[j] + self.last_integrands[j]);
            }
            out
        } else {
            [0.0; 4]
        };

        self.times.push(state.t);
        self.mass.push(report.mass);
        self.energy.push(report.energy);
        self.kinetic_u.push(report.kinetic_u);
        self.kinetic_v.push(report.kinetic_v);
        self.interaction.push(report.interaction);
        self.linf.push(state.linf());
        self.gradient_norm.push(report.gradient_norm_sum());
        let mut both = state.u.clone();
        both.values_mut()
            .iter_mut()
            .zip(state.v.values())
            .for_each(|(a, b)| *a = Complex64::new((a.norm_sqr() + 2.0 * b.norm_sqr()).sqrt(), 0.0));
        self.boundary_fraction.push(boundary_mass_fraction(&both));
        self.s_norm_u_accum.push(accum[0]);
        self.s_norm_v_accum.push(accum[1]);
        self.w_norm_u_accum.push(accum[2]);
        self.w_norm_v_accum.push(accum[3]);
        self.last_integrands = integrands;
    }

    /// `‖u‖_{W_1} + ‖v‖_{W_2}` over the recorded window.
    pub fn w_proxy_norm(&self) -> f64 {
        match (self.w_norm_u_accum.last(), self.w_norm_v_accum.last()) {
            (Some(a), Some(b)) => a.powf(1.0 / 6.0) + b.powf(1.0 / 6.0),
            _ => 0.0,
        }
    }

    pub fn max_relative_mass_drift(&self) -> f64 {
        relative_drift(&self.mass)
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        relative_drift(&self.energy)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for i in 0..self.len() {
            let row = [
                self.times[i],
                self.mass[i],
                self.energy[i],
                self.kinetic_u[i],
                self.kinetic_v[i],
                self.interaction[i],
                self.linf[i],
                self.gradient_norm[i],
                self.boundary_fraction[i],
                self.s_norm_u_accum[i],
                self.s_norm_v_accum[i],
                self.w_norm_u_accum[i],
                self.w_norm_v_accum[i],
            ];
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

fn relative_drift(series: &[f64]) -> f64 {
    let Some(&first) = series.first() else {
        return 0.0;
    };
    let scale = first.abs();
    let worst = series.iter().map(|x| (x - first).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

struct Thresholds {
    linf: f64,
    hs: f64,
}

fn thresholds(state: &State, cfg: &SolverConfig) -> Result<Thresholds> {
    let scaled = |x: f64| if x == 0.0 { f64::INFINITY } else { BLOWUP_FACTOR * x };
    let linf0 = state.linf();
    let hs0 = observables::energy(state).gradient_norm_sum();
    let linf = cfg.blowup_linf.unwrap_or_else(|| scaled(linf0));
    let hs = cfg.blowup_hs.unwrap_or_else(|| scaled(hs0));
    if linf <= linf0 || hs <= hs0 {
        return Err(Error::InvalidArgument(
            "blowup thresholds must exceed the initial values".into(),
        ));
    }
    Ok(Thresholds { linf, hs })
}

/// Step to `t_end` without recording diagnostics; blowup is an error here.
pub fn propagate(state: &State, cfg: &SolverConfig) -> Result<State> {
    cfg.validate()?;
    let th = thresholds(state, cfg)?;
    let stepper = Stepper::new(state.grid(), cfg.dt, cfg.dealias);
    let mut s = state.clone();
    for _ in 0..cfg.step_count()? {
        stepper.step(&mut s)?;
        if s.linf() > th.linf {
            return Err(Error::Blowup { t: s.t });
        }
    }
    Ok(s)
}

/// Step to `t_end`, recording diagnostics every `record_every` steps and at the end.
///
/// Crossing either blowup threshold stops the run with [`Outcome::Blowup`]. Non-finite
/// values without a prior threshold crossing mean the step is too large and are a hard
/// error.
pub fn evolve(state: &State, cfg: &SolverConfig) -> Result<(State, DiagnosticSeries, Outcome)> {
    cfg.validate()?;
    let th = thresholds(state, cfg)?;
    let steps = cfg.step_count()?;
    let stepper = Stepper::new(state.grid(), cfg.dt, cfg.dealias);
    let mut series = DiagnosticSeries::default();
    let mut s = state.clone();
    series.record(&s);

    for step in 1..=steps {
        let before = s.linf();
        if let Err(e) = stepper.step(&mut s) {
            return match e {
                Error::NonFinite { t } if before > th.linf => Ok((s, series, Outcome::Blowup { t })),
                other => Err(other),
            };
        }
        if s.linf() > th.linf {
            series.record(&s);
            return Ok((s.clone(), series, Outcome::Blowup { t: s.t }));
        }
        if step % cfg.record_every == 0 || step == steps {
            series.record(&s);
            if *series.gradient_norm.last().unwrap() > th.hs {
                let t = s.t;
                return Ok((s, series, Outcome::Blowup { t }));
            }
        }
    }
    Ok((s, series, Outcome::Completed))
}
