//! Training objectives: zero-inflated lognormal regression, within-group and
//! cross-group response ranking, listwise uplift ranking, representation
//! balancing (linear-kernel MMD) and their weighted combination.
//!
//! Every loss here has a `*_grad` companion returning derivatives with
//! respect to its inputs; the objective module chains them into the network.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{softplus, BaseModel, ModelParams, ZilnGrad, ZilnParams};

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Per-sample ZILN negative log-likelihood.
///
/// `y = 0`: `-ln(1 - p)`. `y > 0`: `-ln p + ln(y sigma sqrt(2 pi)) + (ln y - mu)^2 / (2 sigma^2)`.
/// The purchase term is evaluated from the logit.
pub fn loss_ziln(y: f64, head: &ZilnParams) -> f64 {
    loss_ziln_grad(y, head).0
}

pub fn loss_ziln_grad(y: f64, head: &ZilnParams) -> (f64, ZilnGrad) {
    if y <= 0.0 {
        // -ln(1 - sigmoid(l)) = softplus(l)
        return (softplus(head.logit), ZilnGrad { logit: head.p, mu: 0.0, sigma: 0.0 });
    }
    let ln_y = libm::log(y);
    let s = head.sigma;
    let r = ln_y - head.mu;
    let value = softplus(-head.logit) + ln_y + libm::log(s) + HALF_LN_TWO_PI + r * r / (2.0 * s * s);
    let grad = ZilnGrad { logit: head.p - 1.0, mu: -r / (s * s), sigma: 1.0 / s - r * r / (s * s * s) };
    (value, grad)
}

/// Mean ZILN loss over `(y, head)` pairs.
pub fn loss_ziln_batch(samples: &[(f64, ZilnParams)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyGroup("ZILN batch"));
    }
    let v = samples.iter().map(|(y, h)| loss_ziln(*y, h)).sum::<f64>() / samples.len() as f64;
    if !v.is_finite() {
        return Err(Error::NonFiniteLoss("ziln"));
    }
    Ok(v)
}

/// Two individuals from the same group: predicted and observed responses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WithinPair {
    pub predicted: (f64, f64),
    pub observed: (f64, f64),
}

/// Loss of one within-group pair and its derivative w.r.t. `predicted.0`
/// (the derivative w.r.t. `predicted.1` is the negation).
pub fn wr_pair_grad(pair: &WithinPair) -> (f64, f64) {
    let a = pair.predicted.0 - pair.predicted.1;
    let b = pair.observed.0 - pair.observed.1;
    if a * b >= 0.0 {
        (0.0, 0.0)
    } else {
        let d = a - b;
        (d * d, 2.0 * d)
    }
}

/// Mean within-group response ranking loss. Zero for an empty list.
pub fn loss_wr_rank(pairs: &[WithinPair]) -> f64 {
    if pairs.is_empty() {
        log::warn!("within-group ranking loss over an empty pair list");
        return 0.0;
    }
    pairs.iter().map(|p| wr_pair_grad(p).0).sum::<f64>() / pairs.len() as f64
}

/// Individual `i` from one group and `j` from the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossPair {
    /// `(predicted, observed)` for `i`.
    pub first: (f64, f64),
    /// `(predicted, observed)` for `j`.
    pub second: (f64, f64),
}

/// Loss of one cross-group pair and the derivative w.r.t. each predicted
/// value (both equal).
pub fn cr_pair_grad(pair: &CrossPair) -> (f64, f64) {
    let (pred_i, obs_i) = pair.first;
    let (pred_j, obs_j) = pair.second;
    let a = pred_i - obs_j;
    let b = obs_i - pred_j;
    if a * b >= 0.0 {
        (0.0, 0.0)
    } else {
        let d = a - b;
        (d * d, 2.0 * d)
    }
}

/// Mean cross-group response ranking loss. Zero for an empty list.
pub fn loss_cr_rank(pairs: &[CrossPair]) -> f64 {
    if pairs.is_empty() {
        log::warn!("cross-group ranking loss over an empty pair list");
        return 0.0;
    }
    pairs.iter().map(|p| cr_pair_grad(p).0).sum::<f64>() / pairs.len() as f64
}

/// Predicted and potential outcomes of two individuals `i` and `j`
/// under both arms, as `(i, j)` tuples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomePair {
    pub predicted_treated: (f64, f64),
    pub predicted_control: (f64, f64),
    pub treated: (f64, f64),
    pub control: (f64, f64),
}

/// Pairwise uplift-distance error and the three upper bounds on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBounds {
    /// `|(tau_hat_i - tau_hat_j) - (tau_i - tau_j)|`.
    pub uplift_distance: f64,
    /// Sum of the within-group pair misalignments of both arms.
    pub within_group: f64,
    /// Sum of the two cross-group pair misalignments.
    pub cross_group: f64,
    /// Sum of the four per-sample absolute errors.
    pub pointwise: f64,
}

impl ErrorBounds {
    /// `uplift_distance <= within_group <= pointwise` and
    /// `uplift_distance <= cross_group <= pointwise`, up to `slack`.
    pub fn holds(&self, slack: f64) -> bool {
        self.uplift_distance <= self.within_group + slack
            && self.within_group <= self.pointwise + slack
            && self.uplift_distance <= self.cross_group + slack
            && self.cross_group <= self.pointwise + slack
    }
}

pub fn error_bounds(o: &OutcomePair) -> ErrorBounds {
    let (h1i, h1j) = o.predicted_treated;
    let (h0i, h0j) = o.predicted_control;
    let (y1i, y1j) = o.treated;
    let (y0i, y0j) = o.control;
    let abs = libm::fabs;
    ErrorBounds {
        uplift_distance: abs(((h1i - h0i) - (h1j - h0j)) - ((y1i - y0i) - (y1j - y0j))),
        within_group: abs((h1i - h1j) - (y1i - y1j)) + abs((h0i - h0j) - (y0i - y0j)),
        cross_group: abs((h1i - y0j) - (y1i - h0j)) + abs((h0i - y1j) - (y0i - h1j)),
        pointwise: abs(h1i - y1i) + abs(h1j - y1j) + abs(h0i - y0i) + abs(h0j - y0j),
    }
}

/// `(observed response, predicted uplift)` of one batch member.
pub type UpliftSample = (f64, f64);

/// Listwise uplift ranking loss over the union of a treated and a control
/// batch, with the softmax of predicted uplift taken over the union.
///
/// Returns the loss and its gradient w.r.t. every predicted uplift (treated
/// members first, then control).
pub fn loss_lu_rank_grad(treated: &[UpliftSample], control: &[UpliftSample]) -> Result<(f64, Vec<f64>)> {
    if treated.is_empty() {
        return Err(Error::EmptyGroup("treated"));
    }
    if control.is_empty() {
        return Err(Error::EmptyGroup("control"));
    }
    let all = treated.iter().chain(control);
    let max = all.clone().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = all.clone().map(|s| libm::exp(s.1 - max)).sum();
    let log_norm = max + libm::log(sum_exp);

    let wt = 1.0 / treated.len() as f64;
    let wc = -1.0 / control.len() as f64;
    let weights: Vec<f64> = treated.iter().map(|s| wt * s.0).chain(control.iter().map(|s| wc * s.0)).collect();
    let loss = -all.clone().zip(&weights).map(|(s, w)| w * (s.1 - log_norm)).sum::<f64>();
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss("lu_rank"));
    }
    let total_weight: f64 = weights.iter().sum();
    let grad = all.zip(&weights).map(|(s, w)| -w + total_weight * libm::exp(s.1 - log_norm)).collect();
    Ok((loss, grad))
}

pub fn loss_lu_rank(treated: &[UpliftSample], control: &[UpliftSample]) -> Result<f64> {
    loss_lu_rank_grad(treated, control).map(|(l, _)| l)
}

/// Squared linear-kernel MMD `||mean(phi_t) - mean(phi_c)||^2` and its
/// gradient w.r.t. every row (treated rows first).
pub fn loss_mmd_grad(phi_t: &[&[f64]], phi_c: &[&[f64]]) -> Result<(f64, Vec<Vec<f64>>)> {
    if phi_t.is_empty() {
        return Err(Error::EmptyGroup("treated"));
    }
    if phi_c.is_empty() {
        return Err(Error::EmptyGroup("control"));
    }
    let dim = phi_t[0].len();
    if let Some(bad) = phi_t.iter().chain(phi_c).find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let mean = |rows: &[&[f64]]| {
        let mut m = vec![0.0; dim];
        for r in rows {
            for (a, b) in m.iter_mut().zip(r.iter()) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= rows.len() as f64);
        m
    };
    let diff: Vec<f64> = mean(phi_t).iter().zip(mean(phi_c)).map(|(a, b)| a - b).collect();
    let value = diff.iter().map(|d| d * d).sum();
    let gt: Vec<f64> = diff.iter().map(|d| 2.0 * d / phi_t.len() as f64).collect();
    let gc: Vec<f64> = diff.iter().map(|d| -2.0 * d / phi_c.len() as f64).collect();
    let grads = phi_t.iter().map(|_| gt.clone()).chain(phi_c.iter().map(|_| gc.clone())).collect();
    Ok((value, grads))
}

pub fn loss_mmd(phi_t: &[&[f64]], phi_c: &[&[f64]]) -> Result<f64> {
    loss_mmd_grad(phi_t, phi_c).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_ziln: f64,
    pub w_wr: f64,
    pub w_cr: f64,
    pub w_lu: f64,
    /// `None` resolves to 0 for TAR and 1 for CFR-mmd.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_mmd: Option<f64>,
    /// L2 coefficient on weights and embeddings.
    pub lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w_ziln: 1.0, w_wr: 1.0, w_cr: 1.0, w_lu: 1.0, w_mmd: None, lambda: 1e-5 }
    }
}

impl LossWeights {
    pub fn mmd_weight(&self, base: BaseModel) -> f64 {
        self.w_mmd.unwrap_or(match base {
            BaseModel::Tar => 0.0,
            BaseModel::CfrMmd => 1.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_ziln, self.w_wr, self.w_cr, self.w_lu, self.w_mmd.unwrap_or(0.0), self.lambda];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("loss weights must be finite and non-negative: {all:?}")));
        }
        Ok(())
    }
}

/// Unweighted component values of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossComponents {
    pub ziln: f64,
    pub wr_rank: f64,
    pub cr_rank: f64,
    pub lu_rank: f64,
    pub mmd: f64,
}

/// Unweighted components, the penalized squared norm `l2`, and the
/// weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ziln: f64,
    pub wr_rank: f64,
    pub cr_rank: f64,
    pub lu_rank: f64,
    pub mmd: f64,
    pub l2: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `total = w_ziln*ziln + w_wr*wr + w_cr*cr + w_lu*lu + w_mmd*mmd + lambda*l2`.
    pub fn assemble(c: LossComponents, weights: &LossWeights, w_mmd: f64, l2: f64) -> Result<Self> {
        let total = weights.w_ziln * c.ziln
            + weights.w_wr * c.wr_rank
            + weights.w_cr * c.cr_rank
            + weights.w_lu * c.lu_rank
            + w_mmd * c.mmd
            + weights.lambda * l2;
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss("total"));
        }
        Ok(Self { ziln: c.ziln, wr_rank: c.wr_rank, cr_rank: c.cr_rank, lu_rank: c.lu_rank, mmd: c.mmd, l2, total })
    }

    /// Element-wise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut m = LossBreakdown::default();
        for b in items {
            m.ziln += b.ziln / n;
            m.wr_rank += b.wr_rank / n;
            m.cr_rank += b.cr_rank / n;
            m.lu_rank += b.lu_rank / n;
            m.mmd += b.mmd / n;
            m.l2 += b.l2 / n;
            m.total += b.total / n;
        }
        m
    }
}

pub fn loss_overall(components: LossComponents, weights: &LossWeights, params: &ModelParams) -> Result<LossBreakdown> {
    let base = params.config().base_model;
    LossBreakdown::assemble(components, weights, weights.mmd_weight(base), params.penalized_sq_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ziln_zero_response() {
        let h = ZilnParams::from_probability(0.5, 0.3, 2.0);
        assert_abs_diff_eq!(loss_ziln(0.0, &h), core::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn ziln_positive_response() {
        let h = ZilnParams::from_probability(0.8, 0.0, 1.0);
        assert_abs_diff_eq!(loss_ziln(1.0, &h), 1.142_082_084_518_882_4, epsilon = 1e-9);
    }

    #[test]
    fn ziln_quadratic_term_vanishes_at_log_y() {
        let h = ZilnParams::from_probability(1.0 - 1e-15, 1.0, 1.0);
        let v = loss_ziln(core::f64::consts::E, &h);
        assert_abs_diff_eq!(v, 1.0 + HALF_LN_TWO_PI, epsilon = 1e-9);
        assert_eq!(loss_ziln_grad(core::f64::consts::E, &h).1.mu, 0.0);
    }

    #[test]
    fn ziln_batch_requires_samples() {
        assert!(loss_ziln_batch(&[]).is_err());
        let h = ZilnParams::from_probability(0.5, 0.0, 1.0);
        assert_abs_diff_eq!(loss_ziln_batch(&[(0.0, h), (0.0, h)]).unwrap(), core::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn wr_examples() {
        let concordant = WithinPair { predicted: (2.0, 1.0), observed: (3.0, 1.0) };
        let discordant = WithinPair { predicted: (1.0, 2.0), observed: (3.0, 1.0) };
        assert_eq!(loss_wr_rank(&[concordant]), 0.0);
        assert_eq!(loss_wr_rank(&[discordant]), 9.0);
        assert_eq!(loss_wr_rank(&[concordant, discordant]), 4.5);
        assert_eq!(loss_wr_rank(&[]), 0.0);
    }

    #[test]
    fn cr_examples() {
        let concordant = CrossPair { first: (2.0, 3.0), second: (2.0, 1.0) };
        let discordant = CrossPair { first: (0.5, 3.0), second: (2.0, 1.0) };
        assert_eq!(loss_cr_rank(&[concordant]), 0.0);
        assert_eq!(loss_cr_rank(&[discordant]), 2.25);
        assert_eq!(loss_cr_rank(&[]), 0.0);
    }

    #[test]
    fn lu_examples() {
        let v = loss_lu_rank(&[(2.0, 0.3)], &[(1.0, 0.3)]).unwrap();
        assert_abs_diff_eq!(v, core::f64::consts::LN_2, epsilon = 1e-12);
        assert_eq!(loss_lu_rank(&[(0.0, 1.0), (0.0, -3.0)], &[(0.0, 2.0)]).unwrap(), 0.0);
        assert_eq!(loss_lu_rank(&[], &[(1.0, 0.0)]).unwrap_err(), Error::EmptyGroup("treated"));
        assert_eq!(loss_lu_rank(&[(1.0, 0.0)], &[]).unwrap_err(), Error::EmptyGroup("control"));
    }

    #[test]
    fn lu_stable_for_large_scores() {
        let v = loss_lu_rank(&[(1.0, 800.0)], &[(1.0, -800.0)]).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn mmd_examples() {
        let a: [&[f64]; 2] = [&[1.0, 0.0], &[1.0, 0.0]];
        let b: [&[f64]; 1] = [&[0.0, 0.0]];
        assert_eq!(loss_mmd(&a, &b).unwrap(), 1.0);
        assert_eq!(loss_mmd(&b, &a).unwrap(), 1.0);
        assert_eq!(loss_mmd(&a, &a).unwrap(), 0.0);
        let bad: [&[f64]; 1] = [&[0.0]];
        assert!(matches!(loss_mmd(&a, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn assemble_examples() {
        let zero = LossWeights { w_ziln: 0.0, w_wr: 0.0, w_cr: 0.0, w_lu: 0.0, w_mmd: Some(0.0), lambda: 0.0 };
        let c = LossComponents { ziln: 1.0, wr_rank: 2.0, cr_rank: 3.0, lu_rank: 4.0, mmd: 0.0 };
        assert_eq!(LossBreakdown::assemble(c, &zero, 0.0, 5.0).unwrap().total, 0.0);
        let unit = LossWeights { lambda: 0.0, ..Default::default() };
        assert_eq!(LossBreakdown::assemble(c, &unit, 1.0, 5.0).unwrap().total, 10.0);
        let l2 = LossWeights { lambda: 0.1, ..Default::default() };
        let b = LossBreakdown::assemble(LossComponents::default(), &l2, 0.0, 2.0 * 2.0).unwrap();
        assert_abs_diff_eq!(b.total, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn weights_resolve_by_base() {
        let w = LossWeights::default();
        assert_eq!(w.mmd_weight(BaseModel::Tar), 0.0);
        assert_eq!(w.mmd_weight(BaseModel::CfrMmd), 1.0);
        assert!(LossWeights { w_lu: -1.0, ..w }.validate().is_err());
    }
}
