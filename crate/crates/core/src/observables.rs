//! Conserved and monitored functionals of a [`State`].

use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::grid::{fh_half_norm, galilean_norm, sobolev_seminorm, NormSpec};

/// Mass and the three pieces of the energy.
///
/// `energy = kinetic_u + kinetic_v - interaction` with `kinetic_v = ½‖∇v‖²` and
/// `interaction = 2 Re ∫ u² v̄`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservedReport {
    pub mass: f64,
    pub energy: f64,
    pub kinetic_u: f64,
    pub kinetic_v: f64,
    pub interaction: f64,
}

impl ConservedReport {
    /// `‖∇u‖ + ‖∇v‖`.
    pub fn gradient_norm_sum(&self) -> f64 {
        self.kinetic_u.sqrt() + (2.0 * self.kinetic_v).sqrt()
    }
}

/// `∫ |u|² + 2|v|²`.
pub fn mass(state: &State) -> f64 {
    state.u.norm_sq() + 2.0 * state.v.norm_sq()
}

/// `2 Re ∫ u² v̄` by grid quadrature.
pub fn interaction(state: &State) -> f64 {
    let s: f64 = state
        .u
        .values()
        .iter()
        .zip(state.v.values())
        .map(|(&u, &v)| (u * u * v.conj()).re)
        .sum();
    2.0 * s * state.u.grid().cell_volume()
}

pub fn energy(state: &State) -> ConservedReport {
    let kinetic_u = sobolev_seminorm(&state.u, 1.0).powi(2);
    let kinetic_v = 0.5 * sobolev_seminorm(&state.v, 1.0).powi(2);
    let interaction = interaction(state);
    ConservedReport {
        mass: mass(state),
        energy: kinetic_u + kinetic_v - interaction,
        kinetic_u,
        kinetic_v,
        interaction,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalileanNormEntry {
    pub spec: NormSpec,
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub t: f64,
    pub conserved: ConservedReport,
    pub fh_half_u: f64,
    pub fh_half_v: f64,
    pub linf: f64,
    pub x_norms: Vec<GalileanNormEntry>,
}

pub fn report_all(state: &State, specs: &[NormSpec]) -> FullReport {
    let x_norms = specs
        .iter()
        .map(|spec| GalileanNormEntry {
            spec: *spec,
            u: galilean_norm(&state.u, state.t, spec),
            v: galilean_norm(&state.v, state.t, spec),
        })
        .collect();
    FullReport {
        t: state.t,
        conserved: energy(state),
        fh_half_u: fh_half_norm(&state.u),
        fh_half_v: fh_half_norm(&state.v),
        linf: state.u.max_abs().max(state.v.max_abs()),
        x_norms,
    }
}
