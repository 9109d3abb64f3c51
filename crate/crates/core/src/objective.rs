//! The combined training objective on one treated batch and one control
//! batch, with exact gradients with respect to every model parameter.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::SampleRecord;
use crate::error::{Error, Result};
use crate::losses::{
    cr_pair_grad, loss_lu_rank_grad, loss_mmd_grad, loss_ziln_grad, wr_pair_grad, CrossPair, LossBreakdown,
    LossComponents, LossWeights, WithinPair,
};
use crate::model::{backward, forward, sigma_raw_derivative, Gradients, HeadMode, HeadOutput, ModelConfig, ModelParams, ZilnGrad};

/// Scalar loss of the model parameters on a fixed batch.
pub trait Objective {
    fn value(&self, params: &ModelParams) -> Result<f64>;
    fn value_and_gradient(&self, params: &ModelParams) -> Result<(f64, Gradients)>;
}

/// Exact gradient of `objective` at `params`, rejecting non-finite entries.
pub fn gradient<O: Objective + ?Sized>(params: &ModelParams, objective: &O) -> Result<Gradients> {
    let (_, g) = objective.value_and_gradient(params)?;
    if let Some(i) = g.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient(params.layout().path_of(i)));
    }
    Ok(g)
}

/// Index pairs for the ranking losses. `tt` indexes the treated batch,
/// `cc` the control batch; `tc` is `(treated, control)` and `ct` is
/// `(control, treated)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairSet {
    pub tt: Vec<(usize, usize)>,
    pub cc: Vec<(usize, usize)>,
    pub tc: Vec<(usize, usize)>,
    pub ct: Vec<(usize, usize)>,
}

/// Every pair over the given draws.
pub fn all_pairs(treated_draw: &[usize], control_draw: &[usize]) -> PairSet {
    let within = |draw: &[usize]| {
        let mut out = Vec::with_capacity(draw.len() * draw.len().saturating_sub(1) / 2);
        for (a, &i) in draw.iter().enumerate() {
            for &j in &draw[a + 1..] {
                out.push((i, j));
            }
        }
        out
    };
    let mut tc = Vec::with_capacity(treated_draw.len() * control_draw.len());
    let mut ct = Vec::with_capacity(treated_draw.len() * control_draw.len());
    for &i in treated_draw {
        for &j in control_draw {
            tc.push((i, j));
        }
    }
    for &j in control_draw {
        for &i in treated_draw {
            ct.push((j, i));
        }
    }
    PairSet { tt: within(treated_draw), cc: within(control_draw), tc, ct }
}

/// Regression + ranking + balancing + L2 objective on one step's batches.
pub struct UpliftObjective<'a> {
    pub config: &'a ModelConfig,
    pub weights: &'a LossWeights,
    pub treated: &'a [&'a SampleRecord],
    pub control: &'a [&'a SampleRecord],
    pub pairs: &'a PairSet,
}

struct Point {
    value: f64,
    grad: ZilnGrad,
}

fn point(head: &HeadOutput) -> Point {
    match head {
        HeadOutput::Ziln(z) => {
            let (value, grad) = z.mean_with_grad();
            Point { value, grad }
        }
        HeadOutput::Scalar(v) => Point { value: *v, grad: ZilnGrad { logit: 0.0, mu: 1.0, sigma: 0.0 } },
    }
}

impl UpliftObjective<'_> {
    pub fn evaluate(&self, params: &ModelParams, want_gradient: bool) -> Result<(LossBreakdown, Option<Gradients>)> {
        let nt = self.treated.len();
        let nc = self.control.len();
        if nt == 0 {
            return Err(Error::EmptyGroup("treated"));
        }
        if nc == 0 {
            return Err(Error::EmptyGroup("control"));
        }
        let n = nt + nc;
        let w = self.weights;
        let w_mmd = w.mmd_weight(self.config.base_model);
        let union: Vec<&SampleRecord> = self.treated.iter().chain(self.control).copied().collect();
        let out = forward(params, self.config, &union)?;
        let y: Vec<f64> = union.iter().map(|r| r.response).collect();
        let m1: Vec<Point> = out.treated.iter().map(point).collect();
        let m0: Vec<Point> = out.control.iter().map(point).collect();

        // Derivatives w.r.t. point predictions and, for ZILN, w.r.t. head params.
        let mut d_m1 = vec![0.0; n];
        let mut d_m0 = vec![0.0; n];
        let mut d_z1 = vec![ZilnGrad::default(); n];
        let mut d_z0 = vec![ZilnGrad::default(); n];
        let mut c = LossComponents::default();

        // Regression on each group's observed arm.
        for (range, treated_arm) in [(0..nt, true), (nt..n, false)] {
            let count = range.len() as f64;
            let mut total = 0.0;
            for s in range {
                let head = if treated_arm { &out.treated[s] } else { &out.control[s] };
                match head {
                    HeadOutput::Ziln(z) => {
                        let (l, g) = loss_ziln_grad(y[s], z);
                        total += l;
                        let dz = if treated_arm { &mut d_z1[s] } else { &mut d_z0[s] };
                        let k = w.w_ziln / count;
                        dz.logit += k * g.logit;
                        dz.mu += k * g.mu;
                        dz.sigma += k * g.sigma;
                    }
                    HeadOutput::Scalar(v) => {
                        let r = v - y[s];
                        total += r * r;
                        let dm = if treated_arm { &mut d_m1[s] } else { &mut d_m0[s] };
                        *dm += w.w_ziln * 2.0 * r / count;
                    }
                }
            }
            c.ziln += total / count;
        }

        // Within-group response ranking, observed-arm predictions.
        for (pairs, offset, treated_arm) in [(&self.pairs.tt, 0, true), (&self.pairs.cc, nt, false)] {
            if pairs.is_empty() {
                continue;
            }
            let count = pairs.len() as f64;
            let preds = if treated_arm { &m1 } else { &m0 };
            let mut total = 0.0;
            for &(i, j) in pairs {
                let (i, j) = (i + offset, j + offset);
                let (l, g) = wr_pair_grad(&WithinPair {
                    predicted: (preds[i].value, preds[j].value),
                    observed: (y[i], y[j]),
                });
                total += l;
                let dm = if treated_arm { &mut d_m1 } else { &mut d_m0 };
                dm[i] += w.w_wr * g / count;
                dm[j] -= w.w_wr * g / count;
            }
            c.wr_rank += total / count;
        }

        // Cross-group response ranking in both directions.
        if !self.pairs.tc.is_empty() {
            let count = self.pairs.tc.len() as f64;
            let mut total = 0.0;
            for &(i, j) in &self.pairs.tc {
                let j = j + nt;
                let (l, g) = cr_pair_grad(&CrossPair { first: (m1[i].value, y[i]), second: (m0[j].value, y[j]) });
                total += l;
                d_m1[i] += w.w_cr * g / count;
                d_m0[j] += w.w_cr * g / count;
            }
            c.cr_rank += total / count;
        }
        if !self.pairs.ct.is_empty() {
            let count = self.pairs.ct.len() as f64;
            let mut total = 0.0;
            for &(j, i) in &self.pairs.ct {
                let j = j + nt;
                let (l, g) = cr_pair_grad(&CrossPair { first: (m0[j].value, y[j]), second: (m1[i].value, y[i]) });
                total += l;
                d_m0[j] += w.w_cr * g / count;
                d_m1[i] += w.w_cr * g / count;
            }
            c.cr_rank += total / count;
        }

        // Listwise uplift ranking over the union batch.
        let tau: Vec<(f64, f64)> = (0..n).map(|s| (y[s], m1[s].value - m0[s].value)).collect();
        let (lu, d_tau) = loss_lu_rank_grad(&tau[..nt], &tau[nt..])?;
        c.lu_rank = lu;
        for s in 0..n {
            d_m1[s] += w.w_lu * d_tau[s];
            d_m0[s] -= w.w_lu * d_tau[s];
        }

        let phi_t: Vec<&[f64]> = (0..nt).map(|s| out.representation(s)).collect();
        let phi_c: Vec<&[f64]> = (nt..n).map(|s| out.representation(s)).collect();
        let (mmd, d_phi_rows) = loss_mmd_grad(&phi_t, &phi_c)?;
        c.mmd = mmd;

        if [c.ziln, c.wr_rank, c.cr_rank, c.lu_rank, c.mmd].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss("component"));
        }
        let breakdown = LossBreakdown::assemble(c, w, w_mmd, params.penalized_sq_norm())?;
        if !want_gradient {
            return Ok((breakdown, None));
        }

        let k = params.layout().head_outputs();
        let raw_grads = |points: &[Point], d_m: &[f64], d_z: &[ZilnGrad], treated_head: bool| -> Vec<f64> {
            let mut raw = vec![0.0; n * k];
            for s in 0..n {
                let g = &points[s].grad;
                match self.config.head_mode {
                    HeadMode::Ziln => {
                        let sigma_raw = out.raw_head(treated_head, s)[2];
                        raw[s * 3] = d_z[s].logit + d_m[s] * g.logit;
                        raw[s * 3 + 1] = d_z[s].mu + d_m[s] * g.mu;
                        raw[s * 3 + 2] = (d_z[s].sigma + d_m[s] * g.sigma) * sigma_raw_derivative(sigma_raw);
                    }
                    HeadMode::Mse => raw[s] = d_m[s],
                }
            }
            raw
        };
        let d_treated = raw_grads(&m1, &d_m1, &d_z1, true);
        let d_control = raw_grads(&m0, &d_m0, &d_z0, false);
        let d_phi: Option<Vec<f64>> = (w_mmd > 0.0).then(|| d_phi_rows.iter().flatten().map(|g| w_mmd * g).collect());

        let mut grads = backward(params, self.config, &out, &d_treated, &d_control, d_phi.as_deref())?;
        params.add_l2_gradient(w.lambda, &mut grads);
        Ok((breakdown, Some(grads)))
    }
}

impl Objective for UpliftObjective<'_> {
    fn value(&self, params: &ModelParams) -> Result<f64> {
        Ok(self.evaluate(params, false)?.0.total)
    }

    fn value_and_gradient(&self, params: &ModelParams) -> Result<(f64, Gradients)> {
        let (b, g) = self.evaluate(params, true)?;
        Ok((b.total, g.expect("gradient requested")))
    }
}
