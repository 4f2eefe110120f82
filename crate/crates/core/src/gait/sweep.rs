use std::fmt::Write as _;

use rayon::prelude::*;

use super::{
    average_body_velocity_with, BodyVelocity, FrictionCoefficients, GaitError, GaitParams,
    SimSettings,
};
use crate::format::sig9;

/// One averaged grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub amplitude: f64,
    pub kappa: f64,
    pub velocity: BodyVelocity,
}

/// Averaged body velocities over a rectangular `(A, kappa)` lattice,
/// amplitude-major in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: Vec<SweepPoint>,
    pub cycles_averaged: usize,
    pub settle_cycles: usize,
}

impl SweepResult {
    pub const CSV_HEADER: &'static str = "A,kappa,xi_x,xi_y,omega";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.grid {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                sig9(p.amplitude),
                sig9(p.kappa),
                sig9(p.velocity.xi_x),
                sig9(p.velocity.xi_y),
                sig9(p.velocity.omega)
            );
        }
        out
    }

    /// Distinct curvature values in first-seen order.
    pub fn kappas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.grid {
            if !out.contains(&p.kappa) {
                out.push(p.kappa);
            }
        }
        out
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.grid {
            if !out.contains(&p.amplitude) {
                out.push(p.amplitude);
            }
        }
        out
    }

    pub fn at(&self, amplitude: f64, kappa: f64) -> Option<&SweepPoint> {
        self.grid
            .iter()
            .find(|p| p.amplitude == amplitude && p.kappa == kappa)
    }
}

/// Sweep with default resolution and the given base geometry.
pub fn sweep_parameters(
    base: &GaitParams,
    amplitudes: &[f64],
    kappas: &[f64],
    friction: &FrictionCoefficients,
    settle_cycles: usize,
    average_cycles: usize,
) -> Result<SweepResult, GaitError> {
    sweep_parameters_with(
        base,
        amplitudes,
        kappas,
        friction,
        settle_cycles,
        average_cycles,
        &SimSettings::default(),
    )
}

/// Evaluates every grid point independently (in parallel on the current
/// rayon pool); results are assembled by grid index.
pub fn sweep_parameters_with(
    base: &GaitParams,
    amplitudes: &[f64],
    kappas: &[f64],
    friction: &FrictionCoefficients,
    settle_cycles: usize,
    average_cycles: usize,
    settings: &SimSettings,
) -> Result<SweepResult, GaitError> {
    if amplitudes.is_empty() || kappas.is_empty() {
        return Err(GaitError::EmptyGrid);
    }
    let symmetric = kappas.iter().all(|k| {
        kappas
            .iter()
            .any(|m| (m + k).abs() <= 1e-12 * (1.0 + k.abs()))
    });
    if !symmetric {
        return Err(GaitError::AsymmetricGrid);
    }
    let points: Vec<(f64, f64)> = amplitudes
        .iter()
        .flat_map(|&a| kappas.iter().map(move |&k| (a, k)))
        .collect();
    let grid = points
        .par_iter()
        .map(|&(amplitude, kappa)| {
            let params = base.with_amplitude(amplitude).with_curvature(kappa);
            average_body_velocity_with(&params, friction, settle_cycles, average_cycles, settings)
                .map(|velocity| SweepPoint {
                    amplitude,
                    kappa,
                    velocity,
                })
                .map_err(|e| GaitError::GridPoint {
                    amplitude,
                    kappa,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult {
        grid,
        cycles_averaged: average_cycles,
        settle_cycles,
    })
}
