//! Refinement studies in the coarse time step.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Assembler, Source};
use crate::harmonic::elliptic_from_stiffness;
use crate::media::Medium;
use crate::mesh::Mesh;
use crate::metrics::loglog_slope;
use crate::upscale::{solve_coarse_semidiscrete, triple_product, CoarseDriver, CoarseSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeStepStudy {
    pub coarse_steps: Vec<usize>,
    pub dt: Vec<f64>,
    pub errors: Vec<f64>,
    /// Log-log slope of error against coarse `dt`.
    pub slope: f64,
}

/// Error of the implicit coarse scheme with `M` steps against the fixed-basis
/// semidiscrete solution integrated with `n_sub` steps, for a time-independent medium.
///
/// The error is `|e(T)|_M + (sum_n dt e_n^T A_c e_n)^(1/2)` over the coarse times.
pub fn time_step_study(
    mesh: Arc<Mesh>,
    medium: &Medium,
    source: &Source,
    final_time: f64,
    n_c: usize,
    coarse_steps: &[usize],
    n_sub: usize,
) -> Result<TimeStepStudy> {
    if medium.is_time_dependent() {
        return Err(Error::Config("the time-step study needs a time-independent medium".into()));
    }
    if coarse_steps.len() < 2 || coarse_steps.iter().any(|&m| m == 0 || n_sub % m != 0) {
        return Err(Error::Config(format!("every coarse step count must divide n_sub = {n_sub}")));
    }
    let asm = Assembler::new(mesh);
    let a_full = asm.stiffness_full(medium, 0.0)?;
    let a_int = Arc::new(asm.restrict(&a_full));
    let level = elliptic_from_stiffness(&asm, &a_full, 0.0)?;
    let space = CoarseSpace::new(&asm, n_c)?;
    let basis = Arc::new(space.basis(&level)?);
    let mc = triple_product(&basis, space.mass(), &basis);
    let ac = triple_product(&basis, &a_int, &basis);
    let reference = solve_coarse_semidiscrete(&space, &basis, medium, source, final_time, n_sub)?;

    let fine_dt = final_time / n_sub as f64;
    let fixed_load = source.is_time_independent().then(|| asm.load(source, 0.0));
    let mut errors = Vec::with_capacity(coarse_steps.len());
    let mut dts = Vec::with_capacity(coarse_steps.len());
    for &m in coarse_steps {
        let substeps = n_sub / m;
        let mut driver = CoarseDriver::new(space.clone(), basis.clone(), substeps, fine_dt);
        for k in 1..=n_sub {
            let load = fixed_load.clone().unwrap_or_else(|| asm.load(source, k as f64 * fine_dt));
            driver.advance(basis.clone(), &a_int, &load)?;
        }
        let dt = final_time / m as f64;
        let diff = |n: usize| -> DVector<f64> { &driver.trajectory().coefficients[n] - &reference.coefficients[n * substeps] };
        let end = diff(m);
        let dissipation: f64 = (1..=m)
            .map(|n| {
                let e = diff(n);
                dt * e.dot(&(&ac * &e))
            })
            .sum();
        errors.push(end.dot(&(&mc * &end)).max(0.0).sqrt() + dissipation.max(0.0).sqrt());
        dts.push(dt);
    }
    let slope = loglog_slope(&dts, &errors);
    Ok(TimeStepStudy { coarse_steps: coarse_steps.to_vec(), dt: dts, errors, slope })
}
