use std::fmt;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Average (fractional) 1-based ranks; tied values share the mean rank.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let mean = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = mean;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of two rank vectors. Average ranks are multiples of
/// one half, so the sums are formed exactly on doubled integer ranks and
/// only the final ratio is rounded.
fn rank_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let twice = |v: &[f64]| -> Vec<i128> { v.iter().map(|r| (r * 2.0) as i128).collect() };
    let (x, y) = (twice(x), twice(y));
    let n = x.len() as i128;
    let (sx, sy): (i128, i128) = (x.iter().sum(), y.iter().sum());
    let dot = |a: &[i128], b: &[i128]| -> i128 { a.iter().zip(b).map(|(p, q)| p * q).sum() };
    let cov = n * dot(&x, &y) - sx * sy;
    let vx = n * dot(&x, &x) - sx * sx;
    let vy = n * dot(&y, &y) - sy * sy;
    if vx == 0 || vy == 0 {
        return None;
    }
    let rho = if vx == vy {
        cov as f64 / vx as f64
    } else {
        cov as f64 / ((vx as f64).sqrt() * (vy as f64).sqrt())
    };
    Some(rho.clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
///
/// A constant input has no defined correlation and is reported as
/// `DegenerateInput` rather than 0.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, MetricError> {
    if xs.len() != ys.len() {
        return Err(MetricError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(MetricError::DegenerateInput(format!(
            "need at least 2 paired values, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(MetricError::DegenerateInput("NaN in input".into()));
    }
    rank_pearson(&rank_average(xs), &rank_average(ys))
        .ok_or_else(|| MetricError::DegenerateInput("constant input vector".into()))
}

/// Binary confusion counts for one classification task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, gold: bool, predicted: bool) {
        match (gold, predicted) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }
}

/// A percentage that prints with two decimals.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Percentage(pub f64);

impl fmt::Display for Percentage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.0)
    }
}

pub fn accuracy(c: &ConfusionCounts) -> Result<Percentage, MetricError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricError::DegenerateInput("no samples".into()));
    }
    Ok(Percentage(100.0 * (c.tp + c.tn) as f64 / total as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimePair {
    pub app: String,
    pub time_basic: f64,
    pub time_guided: f64,
}

impl RuntimePair {
    pub fn new(app: impl Into<String>, time_basic: f64, time_guided: f64) -> Self {
        RuntimePair {
            app: app.into(),
            time_basic,
            time_guided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppSpeedup {
    pub app: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupSummary {
    pub per_app: Vec<AppSpeedup>,
    pub average: f64,
}

/// `(time_basic / time_guided - 1) * 100` per app, then the arithmetic mean.
/// Negative values mean the guided code ran slower.
pub fn speedup_percent(pairs: &[RuntimePair]) -> Result<SpeedupSummary, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::DegenerateInput("no runtime pairs".into()));
    }
    let mut per_app = Vec::with_capacity(pairs.len());
    for p in pairs {
        let valid = |t: f64| t.is_finite() && t > 0.0;
        if !valid(p.time_basic) || !valid(p.time_guided) {
            return Err(MetricError::InvalidRuntime { app: p.app.clone() });
        }
        per_app.push(AppSpeedup {
            app: p.app.clone(),
            percent: (p.time_basic / p.time_guided - 1.0) * 100.0,
        });
    }
    let average = per_app.iter().map(|a| a.percent).sum::<f64>() / per_app.len() as f64;
    Ok(SpeedupSummary { per_app, average })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(rank_average(&[10.0, 20.0, 20.0, 30.0]), [1.0, 2.5, 2.5, 4.0]);
        assert_eq!(rank_average(&[3.0, 1.0, 2.0]), [3.0, 1.0, 2.0]);
    }

    #[test]
    fn spearman_basic_cases() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // no ties: 1 - 6*4/(4*15)
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap(), 0.6);
        assert_eq!(spearman(&[5.0, 1.0, 3.0], &[50.0, 10.0, 30.0]).unwrap(), 1.0);
    }

    #[test]
    fn spearman_with_ties_matches_float_pearson() {
        // ranks x = [1, 2.5, 2.5, 4], y = [1, 3, 2, 4]
        let (rx, ry) = ([1.0, 2.5, 2.5, 4.0], [1.0, 3.0, 2.0, 4.0]);
        let mean = 2.5;
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - mean) * (a - mean)).sum();
        let syy: f64 = ry.iter().map(|b| (b - mean) * (b - mean)).sum();
        let expected = sxy / (sxx * syy).sqrt();
        let rho = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - expected).abs() < 1e-12, "{rho} vs {expected}");
    }

    #[test]
    fn spearman_degenerate() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MetricError::DegenerateInput(_))
        ));
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(MetricError::DegenerateInput(_))));
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0]),
            Err(MetricError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn accuracy_reported_values() {
        let c = ConfusionCounts {
            tp: 55,
            tn: 30,
            fp: 2,
            fn_: 3,
        };
        assert_eq!(accuracy(&c).unwrap().to_string(), "94.44");
        let all = ConfusionCounts {
            tp: 7,
            ..Default::default()
        };
        assert_eq!(accuracy(&all).unwrap().to_string(), "100.00");
        // 52 of 56 private loops found, the other 34 loops all correct
        let private = ConfusionCounts {
            tp: 52,
            tn: 34,
            fp: 0,
            fn_: 4,
        };
        assert_eq!(accuracy(&private).unwrap().to_string(), "95.56");
        assert!(accuracy(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn speedup_basics() {
        let s = speedup_percent(&[RuntimePair::new("BT", 2.0, 2.0)]).unwrap();
        assert_eq!(s.average, 0.0);
        let s = speedup_percent(&[RuntimePair::new("a", 1.1, 1.0), RuntimePair::new("b", 1.0, 1.25)]).unwrap();
        assert!((s.per_app[0].percent - 10.0).abs() < 1e-9);
        assert!((s.per_app[1].percent + 20.0).abs() < 1e-9);
        assert!((s.average + 5.0).abs() < 1e-9);
        assert!(speedup_percent(&[]).is_err());
        assert!(speedup_percent(&[RuntimePair::new("x", 0.0, 1.0)]).is_err());
    }
}
