//! Uplift ranking evaluation: jointly-ranked absolute uplift and Qini
//! curves, their normalized areas over buckets, bucket-level Kendall
//! correlation, LIFT@h and MAPE.
//!
//! Samples are ranked by predicted uplift, descending, ties kept in input
//! order. Bucket `p` of `B` covers the top `k = floor(n * p / B)` samples,
//! so the last bucket always covers all `n`.

use core::cmp::Ordering;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub uplift: f64,
    pub treated: bool,
    pub response: f64,
    /// Point prediction of the observed arm, for MAPE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_response: Option<f64>,
}

/// Numeric order with `-0.0 == 0.0`; NaN compares equal to everything.
fn descending(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Indices of `samples` ordered by uplift, descending; stable.
pub fn rank_descending(samples: &[ScoredSample]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| descending(samples[a].uplift, samples[b].uplift));
    order
}

pub fn ranked(samples: &[ScoredSample]) -> Vec<ScoredSample> {
    rank_descending(samples).into_iter().map(|i| samples[i]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Uplift,
    Qini,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub k: usize,
    /// `None` when the top-k prefix lacks a treated or a control sample.
    pub value: Option<f64>,
    pub n_treated: usize,
    pub n_control: usize,
    pub r_treated: f64,
    pub r_control: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoints {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
}

/// `(R^T/N^T - R^C/N^C) * (N^T + N^C)`.
pub fn uplift_value(n_t: usize, n_c: usize, r_t: f64, r_c: f64) -> Option<f64> {
    (n_t > 0 && n_c > 0).then(|| (r_t / n_t as f64 - r_c / n_c as f64) * (n_t + n_c) as f64)
}

/// `R^T - R^C * N^T / N^C`.
pub fn qini_value(n_t: usize, n_c: usize, r_t: f64, r_c: f64) -> Option<f64> {
    (n_t > 0 && n_c > 0).then(|| r_t - r_c * n_t as f64 / n_c as f64)
}

fn curve(ranked: &[ScoredSample], buckets: usize, kind: CurveKind) -> Result<CurvePoints> {
    if ranked.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if buckets == 0 {
        return Err(Error::InvalidConfig("bucket count must be at least 1".into()));
    }
    let value = match kind {
        CurveKind::Uplift => uplift_value,
        CurveKind::Qini => qini_value,
    };
    let n = ranked.len();
    let (mut n_t, mut n_c, mut r_t, mut r_c) = (0usize, 0usize, 0.0, 0.0);
    let mut consumed = 0;
    let mut points = Vec::with_capacity(buckets);
    for p in 1..=buckets {
        let k = n * p / buckets;
        for s in &ranked[consumed..k] {
            if s.treated {
                n_t += 1;
                r_t += s.response;
            } else {
                n_c += 1;
                r_c += s.response;
            }
        }
        consumed = k;
        points.push(CurvePoint {
            fraction: p as f64 / buckets as f64,
            k,
            value: value(n_t, n_c, r_t, r_c),
            n_treated: n_t,
            n_control: n_c,
            r_treated: r_t,
            r_control: r_c,
        });
    }
    Ok(CurvePoints { kind, points })
}

/// Uplift curve values over `buckets` cumulative prefixes of `ranked`
/// (samples already in rank order).
pub fn uplift_curve_values(ranked: &[ScoredSample], buckets: usize) -> Result<CurvePoints> {
    curve(ranked, buckets, CurveKind::Uplift)
}

pub fn qini_curve_values(ranked: &[ScoredSample], buckets: usize) -> Result<CurvePoints> {
    curve(ranked, buckets, CurveKind::Qini)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaResult {
    pub value: Option<f64>,
    /// Buckets left out of the mean because their value is undefined.
    pub excluded: usize,
}

/// Mean of the defined bucket values divided by the full-population value.
/// Undefined when the full-population value is missing or not positive.
pub fn normalized_area(curve: &CurvePoints) -> AreaResult {
    let defined: Vec<f64> = curve.points.iter().filter_map(|p| p.value).collect();
    let excluded = curve.points.len() - defined.len();
    let full = curve.points.last().and_then(|p| p.value);
    let value = match full {
        Some(v) if v > 0.0 && !defined.is_empty() => Some(defined.iter().sum::<f64>() / defined.len() as f64 / v),
        _ => None,
    };
    AreaResult { value, excluded }
}

pub fn auuc(curve: &CurvePoints) -> AreaResult {
    normalized_area(curve)
}

pub fn auqc(curve: &CurvePoints) -> AreaResult {
    normalized_area(curve)
}

/// Kendall tau-b; `None` when either side is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {
                    tie_x += 1;
                    tie_y += 1;
                }
                (true, false) => tie_x += 1,
                (false, true) => tie_y += 1,
                (false, false) if (dx > 0.0) == (dy > 0.0) => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (n * n.saturating_sub(1) / 2) as i64;
    let denom = ((n0 - tie_x) as f64) * ((n0 - tie_y) as f64);
    (denom > 0.0).then(|| (concordant - discordant) as f64 / libm::sqrt(denom))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrccResult {
    pub value: Option<f64>,
    pub buckets_used: usize,
    pub flags: Vec<String>,
}

#[derive(Clone, Copy, Default)]
struct BucketStats {
    n_t: usize,
    n_c: usize,
    r_t: f64,
    r_c: f64,
}

impl BucketStats {
    fn absorb(&mut self, o: &BucketStats) {
        self.n_t += o.n_t;
        self.n_c += o.n_c;
        self.r_t += o.r_t;
        self.r_c += o.r_c;
    }

    fn complete(&self) -> bool {
        self.n_t > 0 && self.n_c > 0
    }

    fn uplift(&self) -> f64 {
        self.r_t / self.n_t as f64 - self.r_c / self.n_c as f64
    }
}

fn bucket_bounds(n: usize, buckets: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..buckets).map(move |b| (n * b / buckets, n * (b + 1) / buckets))
}

fn all_equal(samples: &[ScoredSample]) -> bool {
    samples.windows(2).all(|w| w[0].uplift == w[1].uplift)
}

/// Kendall tau-b between predicted bucket order and per-bucket observed
/// uplift (treated mean minus control mean). Buckets missing a group are
/// merged into the following bucket; a trailing incomplete bucket merges
/// backward.
pub fn krcc(scored: &[ScoredSample], buckets: usize) -> KrccResult {
    let mut flags = Vec::new();
    if scored.is_empty() || buckets == 0 {
        flags.push("krcc_undefined_no_samples".to_string());
        return KrccResult { value: None, buckets_used: 0, flags };
    }
    if all_equal(scored) {
        flags.push("krcc_constant_predictions".to_string());
        return KrccResult { value: Some(0.0), buckets_used: 0, flags };
    }
    let ranked = ranked(scored);
    let mut merged: Vec<BucketStats> = Vec::new();
    let mut pending = BucketStats::default();
    let mut merges = 0;
    for (lo, hi) in bucket_bounds(ranked.len(), buckets) {
        for s in &ranked[lo..hi] {
            pending.absorb(&if s.treated {
                BucketStats { n_t: 1, r_t: s.response, ..Default::default() }
            } else {
                BucketStats { n_c: 1, r_c: s.response, ..Default::default() }
            });
        }
        if pending.complete() {
            merged.push(pending);
            pending = BucketStats::default();
        } else {
            merges += 1;
        }
    }
    if pending.n_t + pending.n_c > 0 {
        match merged.last_mut() {
            Some(last) => last.absorb(&pending),
            None => merged.push(pending),
        }
    }
    if merges > 0 {
        flags.push(format!("krcc_merged_{merges}_buckets"));
    }
    if merged.len() < 2 || !merged.iter().all(BucketStats::complete) {
        flags.push("krcc_undefined_too_few_buckets".to_string());
        return KrccResult { value: None, buckets_used: merged.len(), flags };
    }
    let order: Vec<f64> = (0..merged.len()).map(|b| -(b as f64)).collect();
    let uplift: Vec<f64> = merged.iter().map(BucketStats::uplift).collect();
    let value = kendall_tau_b(&order, &uplift);
    if value.is_none() {
        flags.push("krcc_tied_bucket_uplift".to_string());
    }
    KrccResult { value: Some(value.unwrap_or(0.0)), buckets_used: merged.len(), flags }
}

/// Kendall tau-b between predicted bucket order and per-bucket mean of a
/// known true effect (synthetic data).
pub fn krcc_against_truth(predicted: &[f64], truth: &[f64], buckets: usize) -> Option<f64> {
    if predicted.len() != truth.len() || predicted.is_empty() || buckets == 0 {
        return None;
    }
    if predicted.windows(2).all(|w| w[0] == w[1]) {
        return Some(0.0);
    }
    let mut order: Vec<usize> = (0..predicted.len()).collect();
    order.sort_by(|&a, &b| descending(predicted[a], predicted[b]));
    let mut rank = Vec::new();
    let mut means = Vec::new();
    for (b, (lo, hi)) in bucket_bounds(order.len(), buckets).enumerate() {
        if hi > lo {
            rank.push(-(b as f64));
            means.push(order[lo..hi].iter().map(|&i| truth[i]).sum::<f64>() / (hi - lo) as f64);
        }
    }
    kendall_tau_b(&rank, &means)
}

/// Treated mean minus control mean among the top `ceil(n * h / 100)`.
pub fn lift_at_h(scored: &[ScoredSample], h: f64) -> Option<f64> {
    if scored.is_empty() || !(h > 0.0 && h <= 100.0) {
        return None;
    }
    let n = scored.len();
    let m = (libm::ceil(n as f64 * h / 100.0 - 1e-9) as usize).clamp(1, n);
    let ranked = ranked(scored);
    let mut s = BucketStats::default();
    for x in &ranked[..m] {
        if x.treated {
            s.n_t += 1;
            s.r_t += x.response;
        } else {
            s.n_c += 1;
            s.r_c += x.response;
        }
    }
    s.complete().then(|| s.uplift())
}

/// Mean of `|yhat - y| / y` over pairs `(yhat, y)` with `y > 0`.
pub fn mape(pairs: &[(f64, f64)]) -> Option<f64> {
    let kept: Vec<f64> = pairs.iter().filter(|(_, y)| *y > 0.0).map(|(p, y)| libm::fabs(p - y) / y).collect();
    (!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    pub buckets: usize,
    pub lift_h: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { buckets: 100, lift_h: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auuc_norm: Option<f64>,
    pub auqc_norm: Option<f64>,
    pub krcc: Option<f64>,
    pub lift_at_h: Option<f64>,
    pub lift_h: f64,
    pub mape: Option<f64>,
    pub buckets: usize,
    pub n: usize,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    pub uplift_curve: CurvePoints,
    pub qini_curve: CurvePoints,
}

pub fn evaluate(samples: &[ScoredSample], options: &MetricOptions) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(bad) = samples.iter().position(|s| !s.uplift.is_finite()) {
        return Err(Error::InvalidConfig(format!("predicted uplift of sample {bad} is not finite")));
    }
    let ranked_samples = ranked(samples);
    let uplift_curve = uplift_curve_values(&ranked_samples, options.buckets)?;
    let qini_curve = qini_curve_values(&ranked_samples, options.buckets)?;
    let mut flags = Vec::new();
    let u = auuc(&uplift_curve);
    let q = auqc(&qini_curve);
    for (name, area) in [("auuc", &u), ("auqc", &q)] {
        if area.excluded > 0 {
            flags.push(format!("{name}_excluded_{}_undefined_buckets", area.excluded));
        }
        if area.value.is_none() {
            flags.push(format!("{name}_undefined_nonpositive_total"));
        }
    }
    let k = krcc(samples, options.buckets);
    flags.extend(k.flags);
    let lift = lift_at_h(samples, options.lift_h);
    if lift.is_none() {
        flags.push("lift_undefined_missing_group".to_string());
    }
    let pairs: Vec<(f64, f64)> =
        samples.iter().filter_map(|s| s.predicted_response.map(|p| (p, s.response))).collect();
    let mape = mape(&pairs);
    if mape.is_none() {
        flags.push("mape_undefined_no_positive_response".to_string());
    }
    Ok(Evaluation {
        report: MetricReport {
            auuc_norm: u.value,
            auqc_norm: q.value,
            krcc: k.value,
            lift_at_h: lift,
            lift_h: options.lift_h,
            mape,
            buckets: options.buckets,
            n: samples.len(),
            flags,
        },
        uplift_curve,
        qini_curve,
    })
}
