//! Dataset diversity measures and the server-side diversity index.
//!
//! Each device reports three raw metrics: label diversity of its local
//! dataset, its dataset size and its age (rounds since it last contributed an
//! update). The server max-normalizes every metric over the reporting
//! population and combines the normalized values with per-metric weights:
//!
//! ```text
//! I_k = v_div,k * gamma_div + v_size,k * gamma_size + v_age,k * gamma_age
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Per-class label proportions of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    probabilities: Vec<f64>,
    num_classes: usize,
    empty: bool,
}

impl LabelDistribution {
    /// Builds a distribution from explicit proportions.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidInput("distribution needs at least one class".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidInput(format!("invalid class proportion {p}")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("proportions sum to {total}, expected 1")));
        }
        let num_classes = probabilities.len();
        Ok(Self { probabilities, num_classes, empty: false })
    }

    /// A distribution over `num_classes` labels backed by no samples.
    pub fn empty(num_classes: usize) -> Self {
        Self { probabilities: vec![0.0; num_classes], num_classes, empty: true }
    }

    pub fn uniform(num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidInput("num_classes must be positive".into()));
        }
        Self::from_probabilities(vec![1.0 / num_classes as f64; num_classes])
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }
}

/// Empirical label frequencies. An empty label list yields a flagged-empty
/// distribution.
pub fn label_distribution(labels: &[usize], num_classes: usize) -> Result<LabelDistribution> {
    if num_classes == 0 {
        return Err(Error::InvalidInput("num_classes must be positive".into()));
    }
    if labels.is_empty() {
        return Ok(LabelDistribution::empty(num_classes));
    }
    let mut counts = vec![0usize; num_classes];
    for &label in labels {
        if label >= num_classes {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        counts[label] += 1;
    }
    let n = labels.len() as f64;
    Ok(LabelDistribution {
        probabilities: counts.into_iter().map(|c| c as f64 / n).collect(),
        num_classes,
        empty: false,
    })
}

/// Gini-Simpson index `1 - sum p_j^2`.
pub fn gini_simpson(dist: &LabelDistribution) -> Result<f64> {
    if dist.is_empty() {
        return Err(Error::NoData("empty label distribution".into()));
    }
    Ok((1.0 - sum_of_squares(&dist.probabilities)).clamp(0.0, 1.0))
}

/// `sum x^2` with the rounding errors of every product and addition carried
/// along, so the result is as if computed in twice the precision. This makes
/// the uniform case come out as exactly `1/m`.
fn sum_of_squares(xs: &[f64]) -> f64 {
    let (mut sum, mut err) = (0.0_f64, 0.0_f64);
    for &x in xs {
        let sq = x * x;
        let sq_err = x.mul_add(x, -sq);
        let t = sum + sq;
        let z = t - sum;
        err += (sum - (t - z)) + (sq - z) + sq_err;
        sum = t;
    }
    sum + err
}

/// Shannon entropy normalized by `log(num_classes)`, with `0 log 0 = 0`.
/// A single-class distribution scores 0.
pub fn shannon_entropy(dist: &LabelDistribution) -> Result<f64> {
    if dist.is_empty() {
        return Err(Error::NoData("empty label distribution".into()));
    }
    if dist.num_classes < 2 {
        return Ok(0.0);
    }
    let h: f64 = dist
        .probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    Ok((h / (dist.num_classes as f64).ln()).clamp(0.0, 1.0))
}

/// Selectable dataset-diversity measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityMeasure {
    #[default]
    GiniSimpson,
    Entropy,
}

impl DiversityMeasure {
    pub fn score(self, dist: &LabelDistribution) -> Result<f64> {
        match self {
            DiversityMeasure::GiniSimpson => gini_simpson(dist),
            DiversityMeasure::Entropy => shannon_entropy(dist),
        }
    }
}

/// Divides every value by the population maximum; an all-zero population
/// maps to all zeros.
pub fn normalize_metric(values: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidInput(format!("metric values must be non-negative, got {v}")));
    }
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| v / max).collect())
}

/// Server-assigned weight of each metric in the index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricWeights {
    pub gamma_diversity: f64,
    pub gamma_size: f64,
    pub gamma_age: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self { gamma_diversity: 1.0 / 3.0, gamma_size: 1.0 / 3.0, gamma_age: 1.0 / 3.0 }
    }
}

impl MetricWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [
            ("gamma_diversity", self.gamma_diversity),
            ("gamma_size", self.gamma_size),
            ("gamma_age", self.gamma_age),
        ] {
            if !g.is_finite() || g < 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be non-negative, got {g}")));
            }
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.gamma_diversity + self.gamma_size + self.gamma_age
    }
}

/// Raw metrics a device reports at the start of a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub dataset_diversity: f64,
    pub dataset_size: usize,
    pub age: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub device_id: usize,
    pub metrics: DeviceMetrics,
    /// Normalized (diversity, size, age).
    pub normalized: [f64; 3],
    pub index: f64,
}

/// Computes the diversity index of every device. Device ids are positions in
/// `metrics`.
pub fn diversity_index(metrics: &[DeviceMetrics], weights: &MetricWeights) -> Result<Vec<DiversityReport>> {
    if metrics.is_empty() {
        return Err(Error::InvalidInput("diversity index needs at least one device".into()));
    }
    weights.validate()?;
    if let Some(m) = metrics
        .iter()
        .find(|m| !(0.0..=1.0).contains(&m.dataset_diversity))
    {
        return Err(Error::InvalidInput(format!(
            "dataset diversity {} outside [0, 1]",
            m.dataset_diversity
        )));
    }

    let div = normalize_metric(&metrics.iter().map(|m| m.dataset_diversity).collect::<Vec<_>>())?;
    let size = normalize_metric(&metrics.iter().map(|m| m.dataset_size as f64).collect::<Vec<_>>())?;
    let age = normalize_metric(&metrics.iter().map(|m| m.age as f64).collect::<Vec<_>>())?;

    Ok(metrics
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let normalized = [div[k], size[k], age[k]];
            let index = normalized[0] * weights.gamma_diversity
                + normalized[1] * weights.gamma_size
                + normalized[2] * weights.gamma_age;
            DiversityReport { device_id: k, metrics: *m, normalized, index }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(p: &[f64]) -> LabelDistribution {
        LabelDistribution::from_probabilities(p.to_vec()).unwrap()
    }

    #[test]
    fn gini_simpson_examples() {
        assert_eq!(gini_simpson(&dist(&[0.5, 0.5])).unwrap(), 0.5);
        assert_eq!(gini_simpson(&dist(&[1.0, 0.0, 0.0])).unwrap(), 0.0);
        let g = gini_simpson(&LabelDistribution::uniform(10).unwrap()).unwrap();
        assert!((g - 0.9).abs() < 1e-12);
    }

    #[test]
    fn gini_simpson_uniform_is_exact() {
        for m in 1..=5000 {
            let g = gini_simpson(&LabelDistribution::uniform(m).unwrap()).unwrap();
            assert_eq!(g, 1.0 - 1.0 / m as f64, "m = {m}");
        }
    }

    #[test]
    fn gini_simpson_empty_is_no_data() {
        let err = gini_simpson(&LabelDistribution::empty(3)).unwrap_err();
        assert!(matches!(err, Error::NoData(_)));
    }

    #[test]
    fn entropy_examples() {
        for m in 2..12 {
            let h = shannon_entropy(&LabelDistribution::uniform(m).unwrap()).unwrap();
            assert!((h - 1.0).abs() < 1e-12, "m={m} h={h}");
        }
        assert_eq!(shannon_entropy(&dist(&[0.0, 1.0, 0.0])).unwrap(), 0.0);
        assert!((shannon_entropy(&dist(&[0.5, 0.5])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(shannon_entropy(&dist(&[1.0])).unwrap(), 0.0);
    }

    #[test]
    fn label_distribution_examples() {
        assert_eq!(label_distribution(&[0, 0, 1, 1], 2).unwrap().probabilities(), &[0.5, 0.5]);
        assert_eq!(label_distribution(&[3], 4).unwrap().probabilities(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(label_distribution(&[0, 1, 2, 2], 3).unwrap().probabilities(), &[0.25, 0.25, 0.5]);
        assert!(label_distribution(&[], 3).unwrap().is_empty());
        assert!(label_distribution(&[5], 3).is_err());
    }

    #[test]
    fn from_probabilities_rejects_bad_sums() {
        assert!(LabelDistribution::from_probabilities(vec![0.5, 0.4]).is_err());
        assert!(LabelDistribution::from_probabilities(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_metric(&[2.0, 4.0, 8.0]).unwrap(), vec![0.25, 0.5, 1.0]);
        assert_eq!(normalize_metric(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(normalize_metric(&[5.0]).unwrap(), vec![1.0]);
        assert!(normalize_metric(&[1.0, -1.0]).is_err());
    }

    fn metrics(div: f64, size: usize, age: u64) -> DeviceMetrics {
        DeviceMetrics { dataset_diversity: div, dataset_size: size, age }
    }

    #[test]
    fn index_of_population_maximal_device_is_total_weight() {
        let reports = diversity_index(
            &[metrics(0.9, 100, 4), metrics(0.3, 10, 1)],
            &MetricWeights::default(),
        )
        .unwrap();
        assert!((reports[0].index - 1.0).abs() < 1e-15);
    }

    #[test]
    fn index_examples_from_normalized_values() {
        // v = [0.5, 0, 1] for device 0; device 1 holds the maxima of the first two metrics.
        let reports = diversity_index(
            &[metrics(0.4, 0, 6), metrics(0.8, 50, 3)],
            &MetricWeights::default(),
        )
        .unwrap();
        assert_eq!(reports[0].normalized, [0.5, 0.0, 1.0]);
        assert!((reports[0].index - 0.5).abs() < 1e-15);

        // v = [0.9, 0.2, 0.4] with weights [1/2, 1/4, 1/4].
        let w = MetricWeights { gamma_diversity: 0.5, gamma_size: 0.25, gamma_age: 0.25 };
        let reports = diversity_index(
            &[metrics(0.9, 20, 4), metrics(1.0, 100, 10)],
            &w,
        )
        .unwrap();
        assert!((reports[0].normalized[0] - 0.9).abs() < 1e-15);
        assert!((reports[0].index - 0.6).abs() < 1e-12);
    }

    #[test]
    fn index_rejects_out_of_range_diversity() {
        assert!(diversity_index(&[metrics(1.5, 1, 0)], &MetricWeights::default()).is_err());
        assert!(diversity_index(&[], &MetricWeights::default()).is_err());
    }

    #[test]
    fn all_zero_round_zero_ages_contribute_nothing() {
        let reports = diversity_index(
            &[metrics(0.5, 10, 0), metrics(0.2, 20, 0)],
            &MetricWeights::default(),
        )
        .unwrap();
        assert!(reports.iter().all(|r| r.normalized[2] == 0.0));
    }

    fn arb_dist() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..12).prop_filter_map("non-zero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
        })
    }

    fn arb_metrics() -> impl Strategy<Value = Vec<DeviceMetrics>> {
        prop::collection::vec((0.0f64..=1.0, 0usize..2000, 0u64..50), 1..20)
            .prop_map(|v| v.into_iter().map(|(d, s, a)| metrics(d, s, a)).collect())
    }

    proptest! {
        #[test]
        fn gini_is_permutation_invariant_and_bounded_by_uniform(p in arb_dist(), seed in any::<u64>()) {
            let g = gini_simpson(&dist(&p)).unwrap();
            let mut q = p.clone();
            let n = q.len();
            q.rotate_left((seed as usize) % n);
            q.reverse();
            let g2 = gini_simpson(&LabelDistribution::from_probabilities(q).unwrap()).unwrap();
            prop_assert!((g - g2).abs() < 1e-12);
            prop_assert!(g <= 1.0 - 1.0 / n as f64 + 1e-12);
        }

        #[test]
        fn merging_classes_never_increases_gini(p in arb_dist()) {
            prop_assume!(p.len() >= 2);
            let mut merged = p[2..].to_vec();
            merged.push(p[0] + p[1]);
            let before = gini_simpson(&dist(&p)).unwrap();
            let after = gini_simpson(&LabelDistribution::from_probabilities(merged).unwrap()).unwrap();
            prop_assert!(after <= before + 1e-12);
        }

        #[test]
        fn some_device_attains_one_per_metric(ms in arb_metrics()) {
            let reports = diversity_index(&ms, &MetricWeights::default()).unwrap();
            for i in 0..3 {
                let max = reports.iter().map(|r| r.normalized[i]).fold(0.0, f64::max);
                prop_assert!(max == 1.0 || max == 0.0);
                prop_assert!(reports.iter().all(|r| (0.0..=1.0).contains(&r.normalized[i])));
            }
        }

        #[test]
        fn index_is_bounded_by_total_weight(ms in arb_metrics(), g in prop::array::uniform3(0.0f64..2.0)) {
            let w = MetricWeights { gamma_diversity: g[0], gamma_size: g[1], gamma_age: g[2] };
            let reports = diversity_index(&ms, &w).unwrap();
            for r in &reports {
                prop_assert!(r.index <= w.total() + 1e-12);
                let maximal = r.normalized.iter().all(|v| *v == 1.0);
                if maximal {
                    prop_assert!((r.index - w.total()).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn index_is_monotone_in_own_metric(ms in arb_metrics(), which in 0usize..3, bump in 1u64..100) {
            let w = MetricWeights::default();
            let before = diversity_index(&ms, &w).unwrap()[0].index;
            let mut raised = ms.clone();
            match which {
                0 => raised[0].dataset_diversity = (raised[0].dataset_diversity + bump as f64 / 100.0).min(1.0),
                1 => raised[0].dataset_size += bump as usize,
                _ => raised[0].age += bump,
            }
            let after = diversity_index(&raised, &w).unwrap()[0].index;
            prop_assert!(after >= before - 1e-12);
        }
    }
}
