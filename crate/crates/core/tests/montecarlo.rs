use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use rerum_core::synthetic::{generate_synthetic, ArmCoefficients, SyntheticCoefficients, SyntheticConfig};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn certain_purchase_lognormal_mean() {
    // sigmoid(40) rounds to 1 in f64.
    let arm = ArmCoefficients { a: vec![0.0; 2], b: 40.0, c: vec![0.0; 2], d: 0.0 };
    let config = SyntheticConfig {
        n: 200_000,
        d_numeric: 2,
        sigma: 1.0,
        coefficients: Some(SyntheticCoefficients { treated: arm.clone(), control: arm }),
        ..Default::default()
    };
    let (data, truth) = generate_synthetic(&config, 11).unwrap();
    assert!(truth.params.iter().all(|p| p.p_treated == 1.0));
    let treated: Vec<f64> = data.records().iter().filter(|r| r.treated).map(|r| r.response).collect();
    let (mean, se) = mean_and_se(&treated);
    let expected = 0.5f64.exp();
    assert!((mean - expected).abs() < 3.0 * se, "mean {mean} vs {expected} (se {se})");
}

#[test]
fn forced_arm_responses_match_true_effect() {
    let config = SyntheticConfig { n: 20, ..Default::default() };
    let (data, truth) = generate_synthetic(&config, 3).unwrap();
    let model = config.model().unwrap();
    let mut rng = SplitMix64::seed_from_u64(99);
    for (record, cate) in data.records().iter().zip(&truth.cate).take(6) {
        let draws = 100_000;
        let t: Vec<f64> = (0..draws).map(|_| model.sample_response(&record.numeric, true, &mut rng)).collect();
        let c: Vec<f64> = (0..draws).map(|_| model.sample_response(&record.numeric, false, &mut rng)).collect();
        let (mt, st) = mean_and_se(&t);
        let (mc, sc) = mean_and_se(&c);
        let se = (st * st + sc * sc).sqrt();
        assert!(((mt - mc) - cate).abs() < 3.0 * se, "estimate {} vs truth {cate} (se {se})", mt - mc);
    }
}
