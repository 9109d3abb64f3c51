//! Central finite-difference check of analytic gradients.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::objective::Objective;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |a - n| / max(1e-8, |a| + |n|)` over checked parameters.
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub checked: usize,
}

/// Which parameters to perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    All,
    /// A seeded random subset of this many parameters (all if fewer exist).
    Sample { count: usize, seed: u64 },
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    libm::fabs(analytic - numeric) / (libm::fabs(analytic) + libm::fabs(numeric)).max(1e-8)
}

/// Compare the analytic gradient of `objective` with
/// `(L(theta + h e_k) - L(theta - h e_k)) / 2h`.
pub fn verify_gradients<O: Objective + ?Sized>(
    params: &ModelParams,
    objective: &O,
    h: f64,
    coverage: Coverage,
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!("finite-difference step must be positive, got {h}")));
    }
    let (_, analytic) = objective.value_and_gradient(params)?;
    let n = params.values().len();
    let indices: Vec<usize> = match coverage {
        Coverage::All => (0..n).collect(),
        Coverage::Sample { count, .. } if count >= n => (0..n).collect(),
        Coverage::Sample { count, seed } => {
            let mut idx = sample(&mut SplitMix64::seed_from_u64(seed), n, count).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    let mut probe = params.clone();
    let mut worst = (0.0, 0usize);
    for &k in &indices {
        let original = probe.values()[k];
        probe.values_mut()[k] = original + h;
        let up = objective.value(&probe)?;
        probe.values_mut()[k] = original - h;
        let down = objective.value(&probe)?;
        probe.values_mut()[k] = original;
        let err = relative_error(analytic.values[k], (up - down) / (2.0 * h));
        if err > worst.0 || !err.is_finite() {
            worst = (err, k);
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        worst_parameter: params.layout().path_of(worst.1),
        checked: indices.len(),
    })
}
