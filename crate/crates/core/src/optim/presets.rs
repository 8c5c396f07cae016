//! Horizon-dependent step-size, momentum and extrapolation schedules for
//! A-SignSGD, with the constants taken from the objective's smoothness.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::SmoothnessConstants;
use crate::signcore::DescentOperator;

use super::Hyper;

/// Preset hyperparameters plus any horizon warnings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetHyper {
    pub gamma: f64,
    pub theta: f64,
    pub zeta: f64,
    pub warnings: Vec<String>,
}

impl PresetHyper {
    pub fn into_hyper(self, operator: DescentOperator) -> Result<Hyper> {
        Hyper::new(self.gamma, self.theta, self.zeta, 0.0, operator)
    }
}

/// `t^(num/den)` that is exact whenever `t` is a perfect `den`-th power.
///
/// `powf` with a fractional exponent rounds (`128^(4/7)` comes out one ulp
/// below 16), so the `den`-th root is snapped to whichever of the nearest
/// integer and the neighbouring floats reproduces `t` best before raising
/// it to `num`. Ties go to the integer.
pub fn root_pow(t: f64, num: i32, den: i32) -> f64 {
    let root = match den {
        1 => t,
        2 => t.sqrt(),
        4 => t.sqrt().sqrt(),
        _ => {
            let r = t.powf(1.0 / den as f64);
            [r.round(), r, r.next_down(), r.next_up()]
                .into_iter()
                .min_by(|a, b| {
                    let ea = (a.powi(den) - t).abs();
                    let eb = (b.powi(den) - t).abs();
                    ea.total_cmp(&eb)
                })
                .unwrap_or(r)
        }
    };
    root.powi(num)
}

pub(crate) fn check_horizon(t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("T must be >= 1"));
    }
    Ok(t as f64)
}

/// Returns a warning if `t` falls below the largest computable floor.
pub(crate) fn floor_warning(t: f64, floors: &[(&str, Option<f64>)]) -> Option<String> {
    let (name, worst) = floors
        .iter()
        .filter_map(|(name, v)| v.filter(|v| v.is_finite()).map(|v| (*name, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    (t < worst).then(|| format!("T = {t} is below the horizon floor {name} = {worst:.6e}"))
}

/// Single-node presets. Non-accelerated: `1 - theta = T^(-1/2)`,
/// `gamma = 1 / (L1 T^(3/4))`, `zeta = 0`. Accelerated:
/// `1 - theta = T^(-4/7)`, `gamma = 1 / (C T^(5/7))`, `zeta = theta / (1 - theta)`.
///
/// `dim` only enters the horizon-floor warnings.
pub fn single_node_presets(
    t: u64,
    constants: &SmoothnessConstants,
    accelerated: bool,
    dim: usize,
) -> Result<PresetHyper> {
    let tf = check_horizon(t)?;
    let d = dim as f64;
    let l2 = constants.l2;
    let r = constants.r;
    if !accelerated {
        let l1 = constants.require_l1()?;
        let one_minus = 1.0 / root_pow(tf, 1, 2);
        let gamma = 1.0 / (l1 * root_pow(tf, 3, 4));
        let floors = [
            ("(16 L2)^4 d^2 / L1^4", l2.map(|l2| (16.0 * l2).powi(4) * d * d / l1.powi(4))),
            ("(L2 d / L1)^(4/3)", l2.map(|l2| (l2 * d / l1).powf(4.0 / 3.0))),
            ("(L1 r)^(-4/3)", r.map(|r| (l1 * r).powf(-4.0 / 3.0))),
        ];
        Ok(PresetHyper {
            gamma,
            theta: 1.0 - one_minus,
            zeta: 0.0,
            warnings: floor_warning(tf, &floors).into_iter().collect(),
        })
    } else {
        let c = constants.c()?;
        let one_minus = 1.0 / root_pow(tf, 4, 7);
        let gamma = 1.0 / (c * root_pow(tf, 5, 7));
        let theta = 1.0 - one_minus;
        let floors = [
            ("(d L2 / C)^(7/5)", l2.map(|l2| (d * l2 / c).powf(1.4))),
            ("(r C)^(-7/5)", r.map(|r| (r * c).powf(-1.4))),
            ("(R C)^(-7/5)", constants.big_r.map(|big_r| (big_r * c).powf(-1.4))),
            ("(8 H2 / C^2)^(7/2)", constants.h2.map(|h2| (8.0 * h2 / (c * c)).powf(3.5))),
            ("128 d^(21/4)", Some(128.0 * d.powf(5.25))),
        ];
        Ok(PresetHyper {
            gamma,
            theta,
            zeta: theta / one_minus,
            warnings: floor_warning(tf, &floors).into_iter().collect(),
        })
    }
}
