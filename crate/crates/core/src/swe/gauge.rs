use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surface-elevation time series at one gauge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeRecord {
    pub id: String,
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
}

impl GaugeRecord {
    pub fn new(id: impl Into<String>, times: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if times.len() != eta.len() {
            return Err(Error::InvalidInput(format!(
                "gauge {id}: {} times but {} values",
                times.len(),
                eta.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!("gauge {id}: times not strictly increasing")));
        }
        Ok(GaugeRecord { id, times, eta })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// First time with `|eta| >= threshold`, or `None` if never reached.
pub fn arrival_time(rec: &GaugeRecord, threshold: f64) -> Result<Option<f64>> {
    if rec.is_empty() {
        return Err(Error::InvalidInput(format!("gauge {} record is empty", rec.id)));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidInput("arrival threshold must be positive".into()));
    }
    Ok(rec.times.iter().zip(&rec.eta).find(|(_, e)| e.abs() >= threshold).map(|(t, _)| *t))
}

/// Signed crest height: the maximum of `eta` over the record.
pub fn max_wave_amplitude(rec: &GaugeRecord) -> Result<f64> {
    rec.eta
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::InvalidInput(format!("gauge {} record is empty", rec.id)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(eta: Vec<f64>) -> GaugeRecord {
        let times = (0..eta.len()).map(|k| 10.0 * k as f64).collect();
        GaugeRecord::new("g", times, eta).unwrap()
    }

    #[test]
    fn arrival_examples() {
        assert_eq!(arrival_time(&rec(vec![0.0; 20]), 0.05).unwrap(), None);
        let step: Vec<f64> = (0..30).map(|k| if k >= 10 { 1.0 } else { 0.0 }).collect();
        assert_eq!(arrival_time(&rec(step), 0.05).unwrap(), Some(100.0));
        assert!(arrival_time(&rec(vec![]), 0.05).is_err());
        assert!(arrival_time(&rec(vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn ramp_matches_scan() {
        let eta: Vec<f64> = (0..100).map(|k| 0.003 * k as f64).collect();
        let r = rec(eta.clone());
        let mut expected = None;
        for (k, e) in eta.iter().enumerate() {
            if e.abs() >= 0.05 {
                expected = Some(10.0 * k as f64);
                break;
            }
        }
        assert_eq!(arrival_time(&r, 0.05).unwrap(), expected);
    }

    #[test]
    fn mwa_examples() {
        assert_eq!(max_wave_amplitude(&rec(vec![0.0; 5])).unwrap(), 0.0);
        assert_eq!(max_wave_amplitude(&rec(vec![-0.3, 0.2, 0.1])).unwrap(), 0.2);
        assert!(max_wave_amplitude(&rec(vec![])).is_err());
    }

    #[test]
    fn record_validation() {
        assert!(GaugeRecord::new("g", vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(GaugeRecord::new("g", vec![0.0], vec![1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn mwa_is_scan_max(eta in proptest::collection::vec(-5.0f64..5.0, 1..200)) {
            let mut best = f64::NEG_INFINITY;
            for &e in &eta {
                if e > best { best = e; }
            }
            prop_assert_eq!(max_wave_amplitude(&rec(eta)).unwrap(), best);
        }
    }
}
