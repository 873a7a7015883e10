//! Result analysis: feature-frequency dynamics across replicas, final
//! feature distributions, concentration metrics (Shannon entropy in nats,
//! Gini), polynomial trend fits, and seeded bootstrap confidence intervals.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::ReplicaResult;
use crate::error::Error;
use crate::rng;
use crate::Result;

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 2000;

/// Shares (or raw counts) per feature index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDistribution {
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl FeatureDistribution {
    /// Normalized shares from occurrence counts.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("cannot normalize an all-zero count vector"));
        }
        Ok(FeatureDistribution {
            values: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            normalized: true,
        })
    }

    pub fn from_shares(values: Vec<f64>) -> Self {
        FeatureDistribution { values, normalized: true }
    }

    fn require_normalized(&self, what: &str) -> Result<()> {
        if !self.normalized {
            return Err(Error::invalid(format!("{what} needs a normalized distribution")));
        }
        let sum: f64 = self.values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "{what}: shares sum to {sum}, not 1"
            )));
        }
        if self.values.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid(format!("{what}: negative share")));
        }
        Ok(())
    }
}

/// Cross-replica feature presence over time: entry (t, i) is the fraction
/// of replicas whose round-t control package contains feature i.
pub fn feature_frequency_series(results: &[ReplicaResult], m: usize) -> Result<Array2<f64>> {
    if results.is_empty() {
        return Err(Error::invalid("no replica results"));
    }
    let rounds = results[0].feature_frequency.len();
    for r in results {
        if r.feature_frequency.len() != rounds
            || r.feature_frequency.iter().any(|row| row.len() != m)
        {
            return Err(Error::invalid(format!(
                "replica {} has mismatched feature-frequency shape",
                r.replica_index
            )));
        }
    }
    let mut series = Array2::zeros((rounds, m));
    for result in results {
        for (t, row) in result.feature_frequency.iter().enumerate() {
            for (i, &present) in row.iter().enumerate() {
                series[(t, i)] += present as f64;
            }
        }
    }
    series /= results.len() as f64;
    Ok(series)
}

/// The first-ranked-feature trace: the row-wise maximum share.
pub fn first_ranked_series(series: &Array2<f64>) -> Vec<f64> {
    series
        .rows()
        .into_iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .collect()
}

/// Share of each feature among the final control genotypes across
/// replicas.
pub fn final_feature_distribution(results: &[ReplicaResult], m: usize) -> Result<FeatureDistribution> {
    if results.is_empty() {
        return Err(Error::invalid("no replica results"));
    }
    let mut counts = vec![0u64; m];
    for result in results {
        for &f in &result.final_control.features {
            if f >= m {
                return Err(Error::invalid(format!(
                    "replica {} holds feature {f} outside universe of {m}",
                    result.replica_index
                )));
            }
            counts[f] += 1;
        }
    }
    FeatureDistribution::from_counts(&counts)
}

/// Shannon entropy in nats: -sum p ln p over nonzero entries.
pub fn shannon_entropy(dist: &FeatureDistribution) -> Result<f64> {
    dist.require_normalized("shannon_entropy")?;
    Ok(dist
        .values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum())
}

/// Gini coefficient of the share vector, zeros included. Computed by the
/// sorted formula; tests cross-check it against the pairwise-difference
/// definition.
pub fn gini(dist: &FeatureDistribution) -> Result<f64> {
    dist.require_normalized("gini")?;
    let n = dist.values.len();
    if n == 0 {
        return Err(Error::invalid("gini: empty distribution"));
    }
    let mut sorted = dist.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (i + 1) as f64 * x)
        .sum();
    // shares sum to 1 within tolerance; use the actual sum for stability
    let total: f64 = sorted.iter().sum();
    Ok((2.0 * weighted) / (n as f64 * total) - (n as f64 + 1.0) / n as f64)
}

/// Least-squares polynomial fit of a series over the normalized time axis
/// [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    /// Coefficients c0..c_degree of c0 + c1 t + ... over t in [0, 1].
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub degree: usize,
}

/// Fits by normal equations on the scaled basis {1, t, ..., t^degree},
/// t in [0, 1]. R^2 = 1 - SSR/SST. Errors on zero-variance input or a
/// degenerate system.
pub fn polyfit_r2(series: &[f64], degree: usize) -> Result<PolyFit> {
    let n = series.len();
    if n <= degree + 1 {
        return Err(Error::invalid(format!(
            "series of length {n} cannot support a degree-{degree} fit"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let sst: f64 = series.iter().map(|y| (y - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::invalid("zero-variance series: R^2 undefined"));
    }
    let ts: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
    let dim = degree + 1;
    // normal equations A c = b with A[i][j] = sum t^(i+j), b[i] = sum t^i y
    let mut a = vec![vec![0.0; dim + 1]; dim];
    for (row, a_row) in a.iter_mut().enumerate() {
        for col in 0..dim {
            a_row[col] = ts.iter().map(|t| t.powi((row + col) as i32)).sum();
        }
        a_row[dim] = ts
            .iter()
            .zip(series)
            .map(|(t, y)| t.powi(row as i32) * y)
            .sum();
    }
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        if a[col][col].abs() < 1e-12 {
            return Err(Error::invalid("degenerate normal equations"));
        }
        for row in (col + 1)..dim {
            let f = a[row][col] / a[col][col];
            for j in col..=dim {
                a[row][j] -= f * a[col][j];
            }
        }
    }
    let mut coefficients = vec![0.0; dim];
    for row in (0..dim).rev() {
        let mut acc = a[row][dim];
        for j in (row + 1)..dim {
            acc -= a[row][j] * coefficients[j];
        }
        coefficients[row] = acc / a[row][row];
    }
    let ssr: f64 = ts
        .iter()
        .zip(series)
        .map(|(t, y)| {
            let fitted: f64 = coefficients
                .iter()
                .enumerate()
                .map(|(p, c)| c * t.powi(p as i32))
                .sum();
            (y - fitted).powi(2)
        })
        .sum();
    Ok(PolyFit {
        coefficients,
        r_squared: 1.0 - ssr / sst,
        degree,
    })
}

/// Seeded bootstrap of the final-distribution entropy over replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// Entropy of the full replica set.
    pub point: f64,
    /// Mean over bootstrap resamples.
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
    pub seed: u64,
}

/// Percentile (2.5%, 97.5%) bootstrap of the final feature distribution's
/// entropy: replicas are resampled with replacement `resamples` times.
pub fn bootstrap_final_entropy(
    results: &[ReplicaResult],
    m: usize,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    if resamples < 2 {
        return Err(Error::invalid("need at least 2 bootstrap resamples"));
    }
    let point = shannon_entropy(&final_feature_distribution(results, m)?)?;
    let mut rng = rng::seeded(seed);
    let mut samples = Vec::with_capacity(resamples);
    let mut counts = vec![0u64; m];
    for _ in 0..resamples {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..results.len() {
            let pick = &results[rng.gen_range(0..results.len())];
            for &f in &pick.final_control.features {
                counts[f] += 1;
            }
        }
        samples.push(shannon_entropy(&FeatureDistribution::from_counts(&counts)?)?);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(BootstrapSummary {
        point,
        mean,
        ci_low: percentile(&samples, 0.025),
        ci_high: percentile(&samples, 0.975),
        resamples,
        seed,
    })
}

/// Linearly interpolated percentile of a sorted sample.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::PackageGenotype;

    fn replica(index: u32, features: Vec<usize>, rounds: usize, m: usize) -> ReplicaResult {
        let mut presence = vec![0u8; m];
        for &f in &features {
            presence[f] = 1;
        }
        ReplicaResult {
            replica_index: index,
            seed: 0,
            round_logs: vec![],
            final_control: PackageGenotype {
                features,
                lineage_id: rounds as u32,
                parent_id: None,
            },
            feature_frequency: vec![presence; rounds],
        }
    }

    #[test]
    fn frequency_series_definition() {
        let results = vec![
            replica(0, vec![0, 1], 3, 4),
            replica(1, vec![1, 2], 3, 4),
        ];
        let series = feature_frequency_series(&results, 4).unwrap();
        assert_eq!(series.dim(), (3, 4));
        for t in 0..3 {
            assert_eq!(series[(t, 0)], 0.5);
            assert_eq!(series[(t, 1)], 1.0);
            assert_eq!(series[(t, 3)], 0.0);
        }
        let trace = first_ranked_series(&series);
        assert_eq!(trace, vec![1.0; 3]);

        let mismatched = vec![replica(0, vec![0], 3, 4), replica(1, vec![0], 2, 4)];
        assert!(feature_frequency_series(&mismatched, 4).is_err());
    }

    #[test]
    fn final_distribution_shapes() {
        // all replicas end on the same genotype: n_F atoms of 1/n_F
        let results = vec![
            replica(0, vec![2, 5, 7], 1, 10),
            replica(1, vec![2, 5, 7], 1, 10),
        ];
        let dist = final_feature_distribution(&results, 10).unwrap();
        let nonzero: Vec<f64> = dist.values.iter().copied().filter(|&v| v > 0.0).collect();
        assert_eq!(nonzero.len(), 3);
        assert!(nonzero.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!((dist.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let single = final_feature_distribution(&results[..1], 10).unwrap();
        assert_eq!(single.values.iter().filter(|&&v| v > 0.0).count(), 3);
    }

    #[test]
    fn entropy_analytic_values() {
        let uniform = FeatureDistribution::from_shares(vec![1.0 / 50.0; 50]);
        assert!((shannon_entropy(&uniform).unwrap() - 50f64.ln()).abs() < 1e-12);

        let mut point = vec![0.0; 50];
        point[7] = 1.0;
        assert_eq!(shannon_entropy(&FeatureDistribution::from_shares(point)).unwrap(), 0.0);

        let two = FeatureDistribution::from_shares(vec![0.5, 0.5, 0.0]);
        assert!((shannon_entropy(&two).unwrap() - 2f64.ln()).abs() < 1e-12);

        let unnormalized = FeatureDistribution { values: vec![0.5, 0.2], normalized: true };
        assert!(shannon_entropy(&unnormalized).is_err());
        let flagless = FeatureDistribution { values: vec![1.0], normalized: false };
        assert!(shannon_entropy(&flagless).is_err());
    }

    /// The definitional oracle: mean absolute pairwise difference over twice
    /// the mean.
    fn gini_pairwise(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let total: f64 = values.iter().sum();
        let pairwise: f64 = values
            .iter()
            .flat_map(|a| values.iter().map(move |b| (a - b).abs()))
            .sum();
        pairwise / (2.0 * n * total)
    }

    #[test]
    fn gini_analytic_values() {
        let uniform = FeatureDistribution::from_shares(vec![1.0 / 50.0; 50]);
        assert!(gini(&uniform).unwrap().abs() < 1e-12);

        let mut point = vec![0.0; 50];
        point[3] = 1.0;
        let dist = FeatureDistribution::from_shares(point);
        assert!((gini(&dist).unwrap() - 0.98).abs() < 1e-12);

        let half = FeatureDistribution::from_shares(vec![0.5, 0.5, 0.0, 0.0]);
        assert!((gini(&half).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gini_matches_pairwise_definition() {
        let mut rng = crate::rng::seeded(3);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..12).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let shares: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let dist = FeatureDistribution::from_shares(shares.clone());
            let fast = gini(&dist).unwrap();
            let slow = gini_pairwise(&shares);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn polyfit_exact_fits() {
        let n = 50;
        let linear: Vec<f64> = (0..n).map(|j| 2.0 + 3.0 * j as f64 / (n - 1) as f64).collect();
        let fit = polyfit_r2(&linear, 1).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-9);

        let cubic: Vec<f64> = (0..n)
            .map(|j| {
                let t = j as f64 / (n - 1) as f64;
                t * t * t
            })
            .collect();
        let fit = polyfit_r2(&cubic, 3).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn polyfit_underfit_cubic_matches_continuous_oracle() {
        // least squares of t^3 by a line on [0,1]: slope 0.9, intercept
        // -0.2, R^2 = 1 - (9/700)/(9/112) = 0.84
        let n = 201;
        let cubic: Vec<f64> = (0..n)
            .map(|j| {
                let t = j as f64 / (n - 1) as f64;
                t * t * t
            })
            .collect();
        let fit = polyfit_r2(&cubic, 1).unwrap();
        assert!((fit.r_squared - 0.84).abs() < 0.01, "{}", fit.r_squared);
        assert!((fit.coefficients[1] - 0.9).abs() < 0.02);
    }

    #[test]
    fn polyfit_error_paths() {
        assert!(polyfit_r2(&[1.0, 2.0], 1).is_err()); // too short
        assert!(polyfit_r2(&[5.0, 5.0, 5.0, 5.0], 1).is_err()); // zero variance
        let ok = polyfit_r2(&[1.0, 0.5, 2.0, 1.5], 2).unwrap();
        assert!(ok.r_squared <= 1.0);
    }

    #[test]
    fn bootstrap_entropy_brackets_the_point() {
        let results: Vec<ReplicaResult> = (0..30)
            .map(|i| replica(i, vec![(i as usize) % 5, 5 + (i as usize) % 3, 9], 1, 12))
            .collect();
        let summary = bootstrap_final_entropy(&results, 12, 500, 7).unwrap();
        assert!(summary.ci_low <= summary.mean && summary.mean <= summary.ci_high);
        // resampling collapses atoms, so bootstrap entropy sits at or below
        // the full-sample point estimate
        assert!(summary.ci_low <= summary.point + 1e-12);
        // deterministic under seed
        let again = bootstrap_final_entropy(&results, 12, 500, 7).unwrap();
        assert_eq!(summary, again);
    }
}
