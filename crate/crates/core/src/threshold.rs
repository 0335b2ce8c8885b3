//! Finite-time evidence for scattering, bisection of the threshold `ℓ_{v0}` along a fixed
//! profile direction, and the curve `ℓ ↦ L_{v0}(ℓ)`.
//!
//! A run scatters when the space-time accumulators stop growing. The classifier fits the
//! log of the accumulator increments over the second half of the run: a per-unit-time
//! decay factor below `r_scatter` counts as scattering, a factor above `r_plateau` with
//! increments still at least `plateau_floor` of the accumulator per unit time counts as
//! non-scattering, anything in between is undecided.

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, DiagnosticSeries, Outcome, SolverConfig, State};
use crate::error::{Error, Result};
use crate::grid::{fh_half_norm, Field};
use crate::observables::energy;
use crate::spectral_criterion::{eigenvalue_bound, large_data_bound, theta_scan, BoundReport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Largest per-unit-time decay factor of the increments that still counts as scattering.
    pub r_scatter: f64,
    /// Smallest per-unit-time factor that counts as a plateau or growth.
    pub r_plateau: f64,
    /// Minimal increment rate, relative to the accumulator, for a plateau to count.
    pub plateau_floor: f64,
    /// Accumulators below this are treated as zero.
    pub zero_floor: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { r_scatter: 0.5, r_plateau: 0.8, plateau_floor: 0.01, zero_floor: 1e-200 }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r_scatter > 0.0
            && self.r_scatter <= self.r_plateau
            && self.plateau_floor >= 0.0
            && self.zero_floor >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid classifier settings {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Scatters,
    NonScatter,
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentEvidence {
    pub verdict: Verdict,
    /// Final value of the `W` accumulator.
    pub accumulator: f64,
    /// Fitted per-unit-time factor of the increments; `None` without enough samples.
    pub decay_factor: Option<f64>,
    /// Last increment per unit time divided by the accumulator.
    pub tail_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunVerdict {
    pub verdict: Verdict,
    pub verdict_u: Verdict,
    pub verdict_v: Verdict,
    /// The two components reached opposite decided verdicts.
    pub conflict: bool,
    pub blowup: bool,
    pub u: ComponentEvidence,
    pub v: ComponentEvidence,
    pub final_linf: f64,
    pub final_mass: f64,
    pub final_energy: f64,
    pub s_norm_u: f64,
    pub s_norm_v: f64,
}

/// Per-unit-time factor from a least-squares fit of `log(increment rate)` against time.
fn fit_decay(times: &[f64], accum: &[f64]) -> Option<(f64, f64)> {
    let mut pts = Vec::new();
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        if h <= 0.0 {
            continue;
        }
        let rate = (accum[i] - accum[i - 1]) / h;
        pts.push((0.5 * (times[i] + times[i - 1]), rate.max(f64::MIN_POSITIVE).ln(), rate));
    }
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(((sxy / sxx).exp(), pts.last().unwrap().2))
}

fn classify_component(times: &[f64], accum: &[f64], cfg: &ClassifierConfig) -> ComponentEvidence {
    let last = accum.last().copied().unwrap_or(0.0);
    let mut ev = ComponentEvidence { verdict: Verdict::Undecided, accumulator: last, decay_factor: None, tail_rate: None };
    if last <= cfg.zero_floor {
        ev.verdict = Verdict::Scatters;
        return ev;
    }
    let t_end = *times.last().unwrap();
    let t_mid = times[0] + 0.5 * (t_end - times[0]);
    let start = times.iter().position(|&t| t >= t_mid).unwrap_or(0).saturating_sub(1);
    let Some((factor, rate)) = fit_decay(&times[start..], &accum[start..]) else {
        return ev;
    };
    let tail_rate = rate / last;
    ev.decay_factor = Some(factor);
    ev.tail_rate = Some(tail_rate);
    ev.verdict = if factor < cfg.r_scatter {
        Verdict::Scatters
    } else if factor >= cfg.r_plateau && tail_rate >= cfg.plateau_floor {
        Verdict::NonScatter
    } else {
        Verdict::Undecided
    };
    ev
}

/// Verdict for a finished run. Blowup means non-scattering; otherwise each component is
/// judged on its `W` accumulator and the run scatters only if both components do.
pub fn classify_run(series: &DiagnosticSeries, outcome: Outcome, cfg: &ClassifierConfig) -> RunVerdict {
    let blowup = matches!(outcome, Outcome::Blowup { .. });
    let mut u = classify_component(&series.times, &series.w_norm_u_accum, cfg);
    let mut v = classify_component(&series.times, &series.w_norm_v_accum, cfg);
    if blowup {
        u.verdict = Verdict::NonScatter;
        v.verdict = Verdict::NonScatter;
    }
    let conflict = matches!(
        (u.verdict, v.verdict),
        (Verdict::Scatters, Verdict::NonScatter) | (Verdict::NonScatter, Verdict::Scatters)
    );
    let verdict = match (u.verdict, v.verdict) {
        _ if blowup => Verdict::NonScatter,
        (Verdict::Scatters, Verdict::Scatters) => Verdict::Scatters,
        (Verdict::NonScatter, Verdict::NonScatter) => Verdict::NonScatter,
        (Verdict::NonScatter, Verdict::Undecided) | (Verdict::Undecided, Verdict::NonScatter) => Verdict::NonScatter,
        _ => Verdict::Undecided,
    };
    let last = |xs: &[f64]| xs.last().copied().unwrap_or(0.0);
    RunVerdict {
        verdict,
        verdict_u: u.verdict,
        verdict_v: v.verdict,
        conflict,
        blowup,
        u,
        v,
        final_linf: last(&series.linf),
        final_mass: last(&series.mass),
        final_energy: last(&series.energy),
        s_norm_u: last(&series.s_norm_u_accum).powf(2.0 / 3.0),
        s_norm_v: last(&series.s_norm_v_accum).powf(2.0 / 3.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub solver: SolverConfig,
    pub classifier: ClassifierConfig,
    pub max_bisections: usize,
    /// Consecutive undecided probes tolerated before the bisection stops.
    pub max_undecided: usize,
    /// Eigen solver settings for the attached analytic bounds.
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            solver: SolverConfig { dt: 0.01, t_end: 2.0, record_every: 5, ..Default::default() },
            classifier: ClassifierConfig::default(),
            max_bisections: 8,
            max_undecided: 3,
            eigen_tol: 1e-8,
            eigen_max_iter: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub amplitude: f64,
    pub verdict: RunVerdict,
    pub initial_energy: f64,
    /// `‖u‖_{W_1} + ‖v‖_{W_2}` over the run window.
    pub w_proxy: f64,
}

/// Evolve `(a · shape, v0)` and classify the run.
pub fn run_amplitude(v0: &Field, shape: &Field, amplitude: f64, cfg: &ThresholdConfig) -> Result<(RunRecord, DiagnosticSeries)> {
    let state = State::new(shape.scaled(amplitude), v0.clone(), 0.0)?;
    let initial_energy = energy(&state).energy;
    let (_, series, outcome) = evolve(&state, &cfg.solver)?;
    let verdict = classify_run(&series, outcome, &cfg.classifier);
    info!("amplitude {amplitude:.6}: {:?} (u {:?}, v {:?})", verdict.verdict, verdict.verdict_u, verdict.verdict_v);
    Ok((RunRecord { amplitude, verdict, initial_energy, w_proxy: series.w_proxy_norm() }, series))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub v0_descriptor: String,
    pub shape_descriptor: String,
    /// Largest amplitude seen to scatter with every smaller probe scattering too.
    pub ell_lower: f64,
    /// Smallest amplitude seen not to scatter.
    pub ell_upper: f64,
    pub runs: Vec<RunRecord>,
    pub analytic_bounds: Vec<BoundReport>,
    /// Set when an undecided run was met.
    pub flagged: bool,
    /// Diagnostics of each entry of `runs`.
    #[serde(skip)]
    pub series: Vec<DiagnosticSeries>,
}

fn describe(f: &Field) -> String {
    format!(
        "dim {} n {} half_width {} |f|_2 {:.6e} |f|_FH1/2 {:.6e}",
        f.grid().dim(),
        f.grid().n(),
        f.grid().half_width(),
        f.norm_sq().sqrt(),
        fh_half_norm(f)
    )
}

/// Normalize `shape` to unit `FḢ^{1/2}` norm so amplitudes are `‖u0‖_{FḢ^{1/2}}`.
pub fn normalize_shape(shape: &Field) -> Result<Field> {
    let fh = fh_half_norm(shape);
    if !(fh > 0.0) {
        return Err(Error::InvalidArgument("shape has zero FH^1/2 norm".into()));
    }
    Ok(shape.scaled(1.0 / fh))
}

/// Analytic upper bounds on `ℓ_{v0}` that do not depend on the `u0` direction.
pub fn analytic_bounds(v0: &Field, cfg: &ThresholdConfig) -> Vec<BoundReport> {
    let mut out = Vec::new();
    if v0.is_zero() {
        return out;
    }
    if let Ok(res) = theta_scan(v0, cfg.eigen_tol, cfg.eigen_max_iter) {
        if let Ok(b) = eigenvalue_bound(v0, &res) {
            out.push(b);
        }
    }
    if let Ok(mut b) = large_data_bound(v0, &[1.0]) {
        out.append(&mut b);
    }
    out
}

/// Bisect on the amplitude of `u0 = a · shape` with `v0` fixed.
///
/// `a_lo` must scatter and `a_hi` must not. Undecided probes never move the bracket: the
/// next probe moves halfway towards `ell_lower`, and after `max_undecided` consecutive
/// undecided probes the bisection stops with the estimate flagged.
pub fn bisect_threshold(v0: &Field, shape: &Field, a_lo: f64, a_hi: f64, cfg: &ThresholdConfig) -> Result<ThresholdEstimate> {
    cfg.classifier.validate()?;
    if !(0.0 <= a_lo && a_lo < a_hi) {
        return Err(Error::BracketInvalid(format!("need 0 <= a_lo < a_hi, got {a_lo}, {a_hi}")));
    }
    let shape = normalize_shape(shape)?;
    let mut runs = Vec::new();
    let mut series = Vec::new();
    let mut probe_at = |a: f64| -> Result<Verdict> {
        let (rec, s) = run_amplitude(v0, &shape, a, cfg)?;
        let verdict = rec.verdict.verdict;
        runs.push(rec);
        series.push(s);
        Ok(verdict)
    };
    let lo_verdict = probe_at(a_lo)?;
    if lo_verdict != Verdict::Scatters {
        return Err(Error::BracketInvalid(format!("a_lo = {a_lo} classified {lo_verdict:?}")));
    }
    let hi_verdict = probe_at(a_hi)?;
    if hi_verdict != Verdict::NonScatter {
        return Err(Error::BracketInvalid(format!("no upper bracket: a_hi = {a_hi} classified {hi_verdict:?}")));
    }

    let (mut lo, mut hi) = (a_lo, a_hi);
    let mut flagged = false;
    let mut undecided = 0;
    let mut probe = 0.5 * (lo + hi);
    for _ in 0..cfg.max_bisections {
        match probe_at(probe)? {
            Verdict::Scatters => {
                lo = probe;
                undecided = 0;
                probe = 0.5 * (lo + hi);
            }
            Verdict::NonScatter => {
                hi = probe;
                undecided = 0;
                probe = 0.5 * (lo + hi);
            }
            Verdict::Undecided => {
                flagged = true;
                undecided += 1;
                if undecided >= cfg.max_undecided {
                    break;
                }
                probe = 0.5 * (lo + probe);
            }
        }
    }
    Ok(ThresholdEstimate {
        v0_descriptor: describe(v0),
        shape_descriptor: describe(&shape),
        ell_lower: lo,
        ell_upper: hi,
        runs,
        analytic_bounds: analytic_bounds(v0, cfg),
        flagged,
        series,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LCurve {
    pub ell_values: Vec<f64>,
    /// Largest `W`-proxy over the shapes among runs that did not blow up.
    pub l_values: Vec<f64>,
    /// False where some run blew up or was classified non-scattering.
    pub saturated: Vec<bool>,
    /// Indices `i` with `l_values[i + 1] < l_values[i]`.
    pub violations: Vec<usize>,
    pub runs: Vec<Vec<RunRecord>>,
}

impl LCurve {
    pub fn first_unsaturated(&self) -> Option<f64> {
        self.saturated.iter().position(|s| !s).map(|i| self.ell_values[i])
    }
}

/// For each `ℓ`, evolve `(ℓ · shape, v0)` for every shape and record the largest `W`-proxy.
pub fn scan_l_curve(v0: &Field, shapes: &[Field], ell_grid: &[f64], cfg: &ThresholdConfig) -> Result<LCurve> {
    cfg.classifier.validate()?;
    if shapes.is_empty() {
        return Err(Error::InvalidArgument("at least one shape is needed".into()));
    }
    let shapes: Vec<Field> = shapes.iter().map(normalize_shape).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..ell_grid.len()).flat_map(|i| (0..shapes.len()).map(move |j| (i, j))).collect();
    let records: Vec<(usize, RunRecord)> = jobs
        .par_iter()
        .map(|&(i, j)| run_amplitude(v0, &shapes[j], ell_grid[i], cfg).map(|(r, _)| (i, r)))
        .collect::<Result<_>>()?;

    let mut runs: Vec<Vec<RunRecord>> = vec![Vec::new(); ell_grid.len()];
    for (i, r) in records {
        runs[i].push(r);
    }
    let l_values: Vec<f64> = runs
        .iter()
        .map(|rs| rs.iter().filter(|r| !r.verdict.blowup).map(|r| r.w_proxy).fold(0.0, f64::max))
        .collect();
    let saturated = runs
        .iter()
        .map(|rs| rs.iter().all(|r| !r.verdict.blowup && r.verdict.verdict != Verdict::NonScatter))
        .collect();
    let violations = l_values.windows(2).enumerate().filter(|(_, w)| w[1] < w[0]).map(|(i, _)| i).collect();
    Ok(LCurve { ell_values: ell_grid.to_vec(), l_values, saturated, violations, runs })
}
