//! Bayesian A/B decision machinery with a frequentist baseline.
//!
//! Click outcomes are Bernoulli, so a flat Beta(1,1) prior gives the
//! posterior Beta(C+1, F+1) after C clicks and F failures. The probability
//! that variant B beats control A has a closed form when the posterior
//! parameters are integers:
//!
//! ```text
//! Pr(p_B > p_A) = sum_{i=0}^{aB-1} B(aA+i, bA+bB) / ((bB+i) B(1+i, bB) B(aA, bA))
//! ```
//!
//! evaluated here entirely in log-gamma space so realistic click counts
//! (up to millions) neither overflow nor underflow. A paired-sampling Monte
//! Carlo estimator serves as an independent cross-check.

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::Error;
use crate::rng;
use crate::Result;

/// Click/failure counts for one experiment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmStats {
    pub clicks: u64,
    pub failures: u64,
}

impl ArmStats {
    pub fn new(clicks: u64, failures: u64) -> Self {
        ArmStats { clicks, failures }
    }

    /// From clicks out of total impressions.
    pub fn from_impressions(clicks: u64, impressions: u64) -> Result<Self> {
        if clicks > impressions {
            return Err(Error::invalid(format!(
                "clicks ({clicks}) exceed impressions ({impressions})"
            )));
        }
        Ok(ArmStats { clicks, failures: impressions - clicks })
    }

    pub fn impressions(&self) -> u64 {
        self.clicks + self.failures
    }

    pub fn ctr(&self) -> Option<f64> {
        let n = self.impressions();
        (n > 0).then(|| self.clicks as f64 / n as f64)
    }
}

/// Beta(alpha, beta) posterior over a click probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPosterior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta parameters must be positive finite, got ({alpha}, {beta})"
            )));
        }
        Ok(BetaPosterior { alpha, beta })
    }
}

/// Beta(C+1, F+1): the posterior after C clicks and F failures under the
/// flat Beta(1,1) prior.
pub fn posterior_from_counts(stats: ArmStats) -> BetaPosterior {
    BetaPosterior {
        alpha: stats.clicks as f64 + 1.0,
        beta: stats.failures as f64 + 1.0,
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn as_count(x: f64, name: &str) -> Result<u64> {
    if x >= 1.0 && x.fract() == 0.0 && x <= 2f64.powi(53) {
        Ok(x as u64)
    } else {
        Err(Error::invalid(format!(
            "{name}={x} is not a positive integer; use prob_b_beats_a_mc for \
             non-integer posteriors"
        )))
    }
}

/// Exact Pr(p_B > p_A) for integer-parameter posteriors (the counts-plus-one
/// case). Result is clamped to [0, 1].
pub fn prob_b_beats_a(post_a: BetaPosterior, post_b: BetaPosterior) -> Result<f64> {
    let alpha_a = as_count(post_a.alpha, "alpha_a")? as f64;
    let beta_a = as_count(post_a.beta, "beta_a")? as f64;
    let terms = as_count(post_b.alpha, "alpha_b")?;
    let beta_b = as_count(post_b.beta, "beta_b")? as f64;

    let ln_beta_a = ln_beta(alpha_a, beta_a);
    let mut total = 0.0;
    for i in 0..terms {
        let i = i as f64;
        let log_term = ln_beta(alpha_a + i, beta_a + beta_b)
            - (beta_b + i).ln()
            - ln_beta(1.0 + i, beta_b)
            - ln_beta_a;
        total += log_term.exp();
    }
    Ok(total.clamp(0.0, 1.0))
}

const MC_BATCH: u64 = 10_000;

/// Monte Carlo estimate of Pr(p_B > p_A) from paired posterior draws.
/// Draws are batched with one RNG stream per batch, so the estimate is
/// identical no matter how batches are scheduled.
pub fn prob_b_beats_a_mc(
    post_a: BetaPosterior,
    post_b: BetaPosterior,
    n_samples: u64,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    let dist_a = Beta::new(post_a.alpha, post_a.beta)
        .map_err(|e| Error::invalid(format!("bad posterior A: {e}")))?;
    let dist_b = Beta::new(post_b.alpha, post_b.beta)
        .map_err(|e| Error::invalid(format!("bad posterior B: {e}")))?;

    let n_batches = n_samples.div_ceil(MC_BATCH);
    let batch_hits = |batch: u64| -> u64 {
        let mut rng = rng::stream(seed, batch);
        let start = batch * MC_BATCH;
        let len = MC_BATCH.min(n_samples - start);
        let mut hits = 0;
        for _ in 0..len {
            let a = dist_a.sample(&mut rng);
            let b = dist_b.sample(&mut rng);
            if b > a {
                hits += 1;
            }
        }
        hits
    };

    #[cfg(feature = "parallel")]
    let hits: u64 = {
        use rayon::prelude::*;
        (0..n_batches).into_par_iter().map(batch_hits).sum()
    };
    #[cfg(not(feature = "parallel"))]
    let hits: u64 = (0..n_batches).map(batch_hits).sum();

    Ok(hits as f64 / n_samples as f64)
}

/// Relative CTR gain of B over A: (ctr_b - ctr_a) / ctr_a.
pub fn uplift(ctr_a: f64, ctr_b: f64) -> Result<f64> {
    if ctr_a == 0.0 {
        return Err(Error::invalid("uplift undefined for ctr_a = 0"));
    }
    Ok((ctr_b - ctr_a) / ctr_a)
}

/// Outcome of the frequentist baseline test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZTestOutcome {
    SignificantBBetter,
    NotSignificant,
}

/// One-sided two-proportion z-test with pooled variance: does B click
/// through significantly better than A?
pub fn z_test(stats_a: ArmStats, stats_b: ArmStats, significance: f64) -> Result<ZTestOutcome> {
    if stats_a.impressions() == 0 || stats_b.impressions() == 0 {
        return Err(Error::invalid("z_test needs at least one impression per arm"));
    }
    if !(0.0 < significance && significance < 1.0) {
        return Err(Error::invalid(format!("significance {significance} outside (0,1)")));
    }
    let n_a = stats_a.impressions() as f64;
    let n_b = stats_b.impressions() as f64;
    let p_a = stats_a.clicks as f64 / n_a;
    let p_b = stats_b.clicks as f64 / n_b;
    if p_b <= p_a {
        return Ok(ZTestOutcome::NotSignificant);
    }
    // p_b > p_a rules out the degenerate pooled rates 0 and 1
    let pooled = (stats_a.clicks + stats_b.clicks) as f64 / (n_a + n_b);
    let se = (pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b)).sqrt();
    let z = (p_b - p_a) / se;
    if z > standard_normal_quantile(1.0 - significance) {
        Ok(ZTestOutcome::SignificantBBetter)
    } else {
        Ok(ZTestOutcome::NotSignificant)
    }
}

/// Standard normal quantile via Acklam's rational approximation
/// (relative error below 1.15e-9).
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| -> f64 {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Action taken by the Bayesian selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbAction {
    KeepControl,
    PromoteVariant,
}

/// The Bayesian decision on one (control, variant) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbDecision {
    pub action: AbAction,
    pub probability_b_beats_a: f64,
    /// Absent when the control CTR is zero (uplift undefined).
    pub uplift: Option<f64>,
    pub threshold: f64,
}

/// Full Bayesian decision: posteriors from counts, exact Pr(p_B > p_A), and
/// promotion iff that probability strictly exceeds the threshold.
pub fn decide(stats_a: ArmStats, stats_b: ArmStats, threshold: f64) -> Result<AbDecision> {
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} outside (0,1)")));
    }
    let probability = prob_b_beats_a(posterior_from_counts(stats_a), posterior_from_counts(stats_b))?;
    let uplift = match (stats_a.ctr(), stats_b.ctr()) {
        (Some(a), Some(b)) if a > 0.0 => Some((b - a) / a),
        _ => None,
    };
    let action = if probability > threshold {
        AbAction::PromoteVariant
    } else {
        AbAction::KeepControl
    };
    Ok(AbDecision { action, probability_b_beats_a: probability, uplift, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn beta(a: f64, b: f64) -> BetaPosterior {
        BetaPosterior::new(a, b).unwrap()
    }

    #[test]
    fn posterior_from_counts_examples() {
        assert_eq!(posterior_from_counts(ArmStats::new(0, 0)), beta(1.0, 1.0));
        assert_eq!(posterior_from_counts(ArmStats::new(5, 10)), beta(6.0, 11.0));
        assert_eq!(posterior_from_counts(ArmStats::new(0, 100)), beta(1.0, 101.0));
    }

    #[test]
    fn arm_stats_guards() {
        assert!(ArmStats::from_impressions(10, 5).is_err());
        let s = ArmStats::from_impressions(201, 14342).unwrap();
        assert_eq!(s.failures, 14141);
    }

    #[test]
    fn prob_symmetric_flat_case_is_half() {
        let p = prob_b_beats_a(beta(1.0, 1.0), beta(1.0, 1.0)).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn prob_identical_posteriors_are_half() {
        for &(c, f) in &[(3u64, 9u64), (40, 60), (250, 750)] {
            let post = posterior_from_counts(ArmStats::new(c, f));
            let p = prob_b_beats_a(post, post).unwrap();
            assert!((p - 0.5).abs() < 1e-12, "({c},{f}): {p}");
        }
    }

    #[test]
    fn prob_analytic_two_thirds() {
        // A ~ Uniform, B ~ Beta(2,1): Pr(B > A) = int 2x * x dx = 2/3
        let p = prob_b_beats_a(beta(1.0, 1.0), beta(2.0, 1.0)).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn prob_matches_mc_oracle_on_moderate_counts() {
        let a = beta(21.0, 81.0);
        let b = beta(31.0, 71.0);
        let exact = prob_b_beats_a(a, b).unwrap();
        let mc = prob_b_beats_a_mc(a, b, 1_000_000, 2024).unwrap();
        assert!((exact - mc).abs() < 0.005, "exact {exact} vs mc {mc}");
    }

    #[test]
    fn prob_rejects_non_integer_parameters() {
        let err = prob_b_beats_a(beta(1.5, 1.0), beta(2.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("prob_b_beats_a_mc"));
    }

    #[test]
    fn mc_symmetric_and_dominant_cases() {
        let half = prob_b_beats_a_mc(beta(4.0, 6.0), beta(4.0, 6.0), 1_000_000, 7).unwrap();
        assert!((half - 0.5).abs() < 0.002, "{half}");
        let sure = prob_b_beats_a_mc(beta(1.0, 100.0), beta(100.0, 1.0), 100_000, 7).unwrap();
        assert!(sure >= 0.999);
    }

    #[test]
    fn mc_is_deterministic_under_seed() {
        let a = beta(12.0, 34.0);
        let b = beta(14.0, 30.0);
        let x = prob_b_beats_a_mc(a, b, 123_456, 99).unwrap();
        let y = prob_b_beats_a_mc(a, b, 123_456, 99).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn closed_form_agrees_with_mc_on_random_pairs() {
        let mut rng = crate::rng::seeded(31);
        for trial in 0..20 {
            let c_a = rng.gen_range(0..10_000u64);
            let f_a = rng.gen_range(0..10_000u64);
            let c_b = rng.gen_range(0..10_000u64);
            let f_b = rng.gen_range(0..10_000u64);
            let a = posterior_from_counts(ArmStats::new(c_a, f_a));
            let b = posterior_from_counts(ArmStats::new(c_b, f_b));
            let exact = prob_b_beats_a(a, b).unwrap();
            let mc = prob_b_beats_a_mc(a, b, 200_000, 1000 + trial).unwrap();
            assert!(
                (exact - mc).abs() < 0.005,
                "trial {trial} ({c_a},{f_a})x({c_b},{f_b}): exact {exact} vs mc {mc}"
            );
        }
    }

    #[test]
    fn no_overflow_for_million_count_arms() {
        let a = posterior_from_counts(ArmStats::new(100_000, 900_000));
        let b = posterior_from_counts(ArmStats::new(100_450, 899_550));
        let p = prob_b_beats_a(a, b).unwrap();
        assert!(p.is_finite() && (0.5..=1.0).contains(&p), "{p}");
    }

    #[test]
    fn uplift_examples() {
        assert!((uplift(0.10, 0.12).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(uplift(0.10, 0.10).unwrap(), 0.0);
        assert!(uplift(0.0, 0.3).is_err());
    }

    #[test]
    fn z_test_examples() {
        let a = ArmStats::new(50, 950);
        assert_eq!(z_test(a, a, 0.05).unwrap(), ZTestOutcome::NotSignificant);

        // pooled p = 0.055, se ~ 0.0102, z ~ 8.8
        let a = ArmStats::new(10, 990);
        let b = ArmStats::new(100, 900);
        assert_eq!(z_test(a, b, 0.05).unwrap(), ZTestOutcome::SignificantBBetter);

        // one-sided: B worse is never significant
        assert_eq!(z_test(b, a, 0.4).unwrap(), ZTestOutcome::NotSignificant);

        assert!(z_test(ArmStats::new(0, 0), b, 0.05).is_err());
    }

    #[test]
    fn normal_quantile_reference_values() {
        let cases = [
            (0.5, 0.0),
            (0.95, 1.6448536269514722),
            (0.975, 1.959963984540054),
            (0.99, 2.3263478740408408),
            (0.01, -2.3263478740408408),
            (0.001, -3.0902323061678132),
        ];
        for (p, expected) in cases {
            assert!(
                (standard_normal_quantile(p) - expected).abs() < 1e-8,
                "p={p}"
            );
        }
    }

    #[test]
    fn decide_examples() {
        // clearly better variant
        let d = decide(ArmStats::new(10, 190), ArmStats::new(40, 160), 0.95).unwrap();
        assert_eq!(d.action, AbAction::PromoteVariant);
        assert!(d.probability_b_beats_a > 0.95);
        assert!((d.uplift.unwrap() - 3.0).abs() < 1e-12);

        // probability exactly at the threshold keeps the control
        let p = d.probability_b_beats_a;
        let at_threshold = decide(ArmStats::new(10, 190), ArmStats::new(40, 160), p).unwrap();
        assert_eq!(at_threshold.action, AbAction::KeepControl);

        // both arms silent: probability 0.5, control kept, uplift absent
        let quiet = decide(ArmStats::new(0, 50), ArmStats::new(0, 50), 0.95).unwrap();
        assert_eq!(quiet.action, AbAction::KeepControl);
        assert!((quiet.probability_b_beats_a - 0.5).abs() < 1e-12);
        assert_eq!(quiet.uplift, None);
    }

    proptest! {
        #[test]
        fn complementarity(c_a in 0u64..800, f_a in 0u64..800, c_b in 0u64..800, f_b in 0u64..800) {
            let a = posterior_from_counts(ArmStats::new(c_a, f_a));
            let b = posterior_from_counts(ArmStats::new(c_b, f_b));
            let ab = prob_b_beats_a(a, b).unwrap();
            let ba = prob_b_beats_a(b, a).unwrap();
            prop_assert!((ab + ba - 1.0).abs() < 1e-9, "{ab} + {ba}");
        }

        #[test]
        fn extra_click_never_hurts_b(c_a in 0u64..300, f_a in 0u64..300, c_b in 0u64..300, f_b in 0u64..300) {
            let a = posterior_from_counts(ArmStats::new(c_a, f_a));
            let b0 = posterior_from_counts(ArmStats::new(c_b, f_b));
            let b1 = posterior_from_counts(ArmStats::new(c_b + 1, f_b));
            let p0 = prob_b_beats_a(a, b0).unwrap();
            let p1 = prob_b_beats_a(a, b1).unwrap();
            prop_assert!(p1 >= p0 - 1e-12, "{p0} -> {p1}");
        }
    }
}
