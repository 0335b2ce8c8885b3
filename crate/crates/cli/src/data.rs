use std::collections::HashMap;
use std::path::{Path, PathBuf};

use log::info;

use qnls_core::grid::io::load_field;
use qnls_core::groundstate::{solve_ground_state, GroundState};
use qnls_core::{Error, Field, Grid};

use crate::config::{Component, FieldSpec};
use crate::error::Result;

/// Builds initial data on one grid, solving each requested ground state once.
pub struct DataBuilder {
    grid: Grid,
    base_dir: PathBuf,
    ground_states: HashMap<(u64, u64, usize), GroundState>,
}

impl DataBuilder {
    pub fn new(grid: &Grid, base_dir: &Path) -> Self {
        DataBuilder { grid: grid.clone(), base_dir: base_dir.to_path_buf(), ground_states: HashMap::new() }
    }

    pub fn ground_state(&mut self, omega: f64, tol: f64, max_iter: usize) -> Result<&GroundState> {
        let key = (omega.to_bits(), tol.to_bits(), max_iter);
        if !self.ground_states.contains_key(&key) {
            info!("solving ground state at omega = {omega}");
            let gs = solve_ground_state(&self.grid, omega, tol, max_iter)?;
            self.ground_states.insert(key, gs);
        }
        Ok(&self.ground_states[&key])
    }

    pub fn build(&mut self, spec: &FieldSpec) -> Result<Field> {
        match spec {
            FieldSpec::Zero => Ok(Field::zeros(&self.grid)),
            FieldSpec::Gaussian(g) => Ok(g.sample(&self.grid)?),
            FieldSpec::GroundStateComponent { omega, which, scale, tol, max_iter } => {
                let gs = self.ground_state(*omega, *tol, *max_iter)?;
                let q = match which {
                    Component::Q1 => &gs.q1,
                    Component::Q2 => &gs.q2,
                };
                Ok(q.scaled(*scale))
            }
            FieldSpec::FileRef { path } => {
                let f = load_field(&self.base_dir.join(path))?;
                if f.grid() != &self.grid {
                    return Err(Error::Format(format!(
                        "{} holds a field on {:?}, config grid is {:?}",
                        path.display(),
                        f.grid(),
                        self.grid
                    ))
                    .into());
                }
                Ok(f)
            }
        }
    }
}

/// Build one field from its descriptor.
pub fn build_data(spec: &FieldSpec, grid: &Grid, base_dir: &Path) -> Result<Field> {
    DataBuilder::new(grid, base_dir).build(spec)
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;
    use qnls_core::make_grid;
    use qnls_core::symmetry::Gaussian;

    use super::*;

    #[test]
    fn unit_gaussian_is_sampled_in_closed_form() {
        let g = make_grid(2, 16, 4.0).unwrap();
        let f = build_data(&FieldSpec::Gaussian(Gaussian::new(1.0, 1.0)), &g, Path::new(".")).unwrap();
        let mut x = [0.0; 2];
        for (p, z) in f.values().iter().enumerate() {
            g.point(p, &mut x);
            let expected = (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
            assert_eq!(*z, Complex64::new(expected, 0.0));
        }
    }

    #[test]
    fn zero_family_is_zero() {
        let g = make_grid(1, 8, 1.0).unwrap();
        assert!(build_data(&FieldSpec::Zero, &g, Path::new(".")).unwrap().is_zero());
    }
}
