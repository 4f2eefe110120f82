use serde::{Deserialize, Serialize};

use super::{GaitError, SweepResult};

/// Fixed-speed unicycle fitted to a sweep: `omega = slope * kappa + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionMap {
    pub v_forward: f64,
    pub omega_slope: f64,
    pub omega_intercept: f64,
    pub fit_r_squared: f64,
}

/// Curvature command after the actuation clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaCommand {
    pub kappa: f64,
    pub saturated: bool,
}

impl ReductionMap {
    /// Forward map: turn rate produced by holding curvature `kappa`.
    pub fn omega_of_kappa(&self, kappa: f64) -> f64 {
        self.omega_slope * kappa + self.omega_intercept
    }

    pub fn validate(&self) -> Result<(), GaitError> {
        let fields = [
            self.v_forward,
            self.omega_slope,
            self.omega_intercept,
            self.fit_r_squared,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(GaitError::MalformedMap("non-finite field".into()));
        }
        if self.v_forward <= 0.0 {
            return Err(GaitError::MalformedMap(format!(
                "v_forward {} must be positive",
                self.v_forward
            )));
        }
        if self.omega_slope == 0.0 {
            return Err(GaitError::NonInvertibleMap);
        }
        Ok(())
    }

    /// Flat `key = value` record; values keep full f64 precision.
    pub fn to_text(&self) -> String {
        format!(
            "v_forward = {:?}\nomega_slope = {:?}\nomega_intercept = {:?}\nfit_r_squared = {:?}\n",
            self.v_forward, self.omega_slope, self.omega_intercept, self.fit_r_squared
        )
    }

    pub fn from_text(text: &str) -> Result<Self, GaitError> {
        let map: ReductionMap =
            toml::from_str(text).map_err(|e| GaitError::MalformedMap(e.message().to_string()))?;
        map.validate()?;
        Ok(map)
    }
}

/// Least-squares line through the pooled `(kappa, omega)` pairs; forward
/// speed is the grid mean of `xi_x`.
pub fn fit_reduction(sweep: &SweepResult) -> Result<ReductionMap, GaitError> {
    let distinct = sweep.kappas().len();
    if distinct < 3 {
        return Err(GaitError::TooFewCurvatures(distinct));
    }
    let n = sweep.grid.len() as f64;
    let mean_k = sweep.grid.iter().map(|p| p.kappa).sum::<f64>() / n;
    let mean_w = sweep.grid.iter().map(|p| p.velocity.omega).sum::<f64>() / n;
    let mut s_kk = 0.0;
    let mut s_kw = 0.0;
    let mut s_ww = 0.0;
    for p in &sweep.grid {
        let dk = p.kappa - mean_k;
        let dw = p.velocity.omega - mean_w;
        s_kk += dk * dk;
        s_kw += dk * dw;
        s_ww += dw * dw;
    }
    if s_kk <= 0.0 {
        return Err(GaitError::DegenerateFit("zero curvature variance".into()));
    }
    let slope = s_kw / s_kk;
    let intercept = mean_w - slope * mean_k;
    let ss_res: f64 = sweep
        .grid
        .iter()
        .map(|p| {
            let r = p.velocity.omega - (slope * p.kappa + intercept);
            r * r
        })
        .sum();
    let r_squared = if s_ww > 0.0 {
        (1.0 - ss_res / s_ww).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let v_forward = sweep.grid.iter().map(|p| p.velocity.xi_x).sum::<f64>() / n;
    if slope == 0.0 {
        return Err(GaitError::DegenerateFit("zero angular slope".into()));
    }
    Ok(ReductionMap {
        v_forward,
        omega_slope: slope,
        omega_intercept: intercept,
        fit_r_squared: r_squared,
    })
}

/// Inverse map `kappa(omega)`, clamped to `[-kappa_max, kappa_max]`.
pub fn kappa_of_omega(
    map: &ReductionMap,
    omega: f64,
    kappa_max: f64,
) -> Result<KappaCommand, GaitError> {
    if map.omega_slope == 0.0 || !map.omega_slope.is_finite() {
        return Err(GaitError::NonInvertibleMap);
    }
    let kappa = (omega - map.omega_intercept) / map.omega_slope;
    if kappa.abs() > kappa_max {
        Ok(KappaCommand {
            kappa: kappa_max.copysign(kappa),
            saturated: true,
        })
    } else {
        Ok(KappaCommand {
            kappa,
            saturated: false,
        })
    }
}
