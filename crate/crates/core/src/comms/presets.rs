//! Hyperparameters and round counts for the compressed distributed method.

use crate::error::{Error, Result};
use crate::optim::presets::{check_horizon, floor_warning};
use crate::optim::{root_pow, PresetHyper};
use crate::problems::SmoothnessConstants;

/// FCC round count: the real-valued schedule `2 ln(arg) / ln(1 / (1 - delta))`
/// rounded up and floored at 1. Returns 0 (pass-through) when `delta = 1`.
pub fn fcc_rounds(arg: f64, delta: f64) -> Result<u32> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    if delta == 1.0 {
        return Ok(0);
    }
    let u = (2.0 * arg.ln() / (1.0 / (1.0 - delta)).ln()).ceil();
    Ok(u.max(1.0) as u32)
}

/// Round count prescribed for horizon `t`, `n` workers and dimension `dim`:
/// `u = ceil(2 ln(arg) / ln(1 / (1 - delta)))` with `arg = 64 sqrt(2d) n T^(1/4)`,
/// or `(64 sqrt 2 + 64 sqrt(2d)) n T` for the accelerated schedule.
pub fn auto_rounds(t: u64, n: usize, dim: usize, delta: f64, accelerated: bool) -> Result<u32> {
    let (tf, nf, d) = (t as f64, n as f64, dim as f64);
    let arg = if accelerated {
        (64.0 * 2f64.sqrt() + 64.0 * (2.0 * d).sqrt()) * nf * tf
    } else {
        64.0 * (2.0 * d).sqrt() * nf * root_pow(tf, 1, 4)
    };
    fcc_rounds(arg, delta)
}

/// Presets for `n` workers. Non-accelerated: `1 - theta = sqrt(n / T)`,
/// `gamma = n^(1/4) / (L1 T^(3/4))`, `u` from `64 sqrt(2d) n T^(1/4)`.
/// Accelerated: `1 - theta = sqrt(n) / T^(4/7)`, `gamma = n^(1/4) / (C T^(5/7))`,
/// `zeta = theta / (1 - theta)`, `u` from `(64 sqrt 2 + 64 sqrt(2d)) n T`.
pub fn distributed_presets(
    t: u64,
    n: usize,
    dim: usize,
    delta: f64,
    constants: &SmoothnessConstants,
    accelerated: bool,
) -> Result<(PresetHyper, u32)> {
    let tf = check_horizon(t)?;
    if n == 0 {
        return Err(Error::invalid("worker count must be >= 1"));
    }
    let nf = n as f64;
    let d = dim as f64;
    let root_n = root_pow(nf, 1, 2);
    let quarter_n = root_pow(nf, 1, 4);
    let l2 = constants.l2;
    let r = constants.r;
    let (one_minus, gamma, zeta_wanted, floors) = if !accelerated {
        let l1 = constants.require_l1()?;
        let one_minus = root_n / root_pow(tf, 1, 2);
        let gamma = quarter_n / (l1 * root_pow(tf, 3, 4));
        let floors = vec![
            ("(16 d L2)^4 / L1^4", l2.map(|l2| (16.0 * d * l2).powi(4) / l1.powi(4))),
            ("(L2 d / L1)^(4/3)", l2.map(|l2| (l2 * d / l1).powf(4.0 / 3.0))),
            ("(L1 r)^(-4/3)", r.map(|r| (l1 * r).powf(-4.0 / 3.0))),
        ];
        (one_minus, gamma, false, floors)
    } else {
        let c = constants.c()?;
        let one_minus = root_n / root_pow(tf, 4, 7);
        let gamma = quarter_n / (c * root_pow(tf, 5, 7));
        let floors = vec![
            ("(d L2 / C)^7", l2.map(|l2| (d * l2 / c).powi(7))),
            ("(r C)^(-7/5)", r.map(|r| (r * c).powf(-1.4))),
            ("(R C)^(-7/5)", constants.big_r.map(|big_r| (big_r * c).powf(-1.4))),
            ("(8 d^(3/2) H2 / C^2)^(7/2)", constants.h2.map(|h2| (8.0 * d.powf(1.5) * h2 / (c * c)).powf(3.5))),
            ("n^4", Some(nf.powi(4))),
        ];
        (one_minus, gamma, true, floors)
    };
    if one_minus > 1.0 {
        return Err(Error::invalid(format!(
            "momentum schedule needs more steps than workers allow: 1 - theta = {one_minus} > 1"
        )));
    }
    let theta = 1.0 - one_minus;
    let u = auto_rounds(t, n, dim, delta, accelerated)?;
    let preset = PresetHyper {
        gamma,
        theta,
        zeta: if zeta_wanted { theta / one_minus } else { 0.0 },
        warnings: floor_warning(tf, &floors).into_iter().collect(),
    };
    Ok((preset, u))
}
