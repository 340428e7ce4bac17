//! Posterior summaries: running means, Gaussian KDE, MAP and HPD intervals.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub fn running_mean(series: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            sum += x;
            sum / (i + 1) as f64
        })
        .collect()
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let (_, sd) = mean_std(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (samples.len() as f64).powf(-0.2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Silverman,
    Fixed(f64),
}

/// Density values on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    /// All samples identical: `grid` holds the single value.
    pub degenerate: bool,
}

impl Density {
    pub fn spacing(&self) -> f64 {
        if self.grid.len() < 2 {
            0.0
        } else {
            self.grid[1] - self.grid[0]
        }
    }

    /// Trapezoidal integral of the density over its grid.
    pub fn integral(&self) -> f64 {
        if self.degenerate {
            return 1.0;
        }
        let dx = self.spacing();
        self.values.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dx).sum()
    }
}

/// Gaussian KDE on `grid_points` nodes spanning the samples plus four
/// bandwidths on each side. Samples are linearly binned onto the grid before
/// the kernel sum, which keeps long chains cheap.
pub fn kde(samples: &[f64], bandwidth: Bandwidth, grid_points: usize) -> Result<Density> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("KDE needs at least two samples".into()));
    }
    if grid_points < 16 {
        return Err(Error::InvalidInput("KDE grid needs at least 16 points".into()));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if lo == hi {
        return Ok(Density { grid: vec![lo], values: vec![1.0], bandwidth: 0.0, degenerate: true });
    }
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(samples),
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(h) => return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}"))),
    };
    // keep at least four grid cells per bandwidth
    let (start, end) = (lo - 4.0 * h, hi + 4.0 * h);
    let needed = ((end - start) / (h / 4.0)).ceil() as usize + 1;
    let m = grid_points.max(needed);
    let dx = (end - start) / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|i| start + dx * i as f64).collect();

    let mut counts = vec![0.0; m];
    for &x in samples {
        let pos = (x - start) / dx;
        let i = (pos.floor() as usize).min(m - 2);
        let frac = pos - i as f64;
        counts[i] += 1.0 - frac;
        counts[i + 1] += frac;
    }
    let reach = ((8.0 * h) / dx).ceil() as usize;
    let kernel: Vec<f64> = (0..=reach)
        .map(|k| {
            let z = k as f64 * dx / h;
            (-0.5 * z * z).exp()
        })
        .collect();
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    let mut values = vec![0.0; m];
    for (b, &c) in counts.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let from = b.saturating_sub(reach);
        let to = (b + reach).min(m - 1);
        for (i, v) in values.iter_mut().enumerate().take(to + 1).skip(from) {
            *v += c * kernel[i.abs_diff(b)];
        }
    }
    values.iter_mut().for_each(|v| *v *= norm);
    Ok(Density { grid, values, bandwidth: h, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapEstimate {
    pub value: f64,
    /// Another, non-adjacent grid node attains the same maximum.
    pub tied: bool,
}

/// Arg-max of a gridded density; ties go to the lowest grid value.
pub fn map_estimate(density: &Density) -> Result<MapEstimate> {
    let best = density
        .values
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::InvalidInput("empty density".into()))?;
    let first = density.values.iter().position(|&v| v == best).expect("max exists");
    let tied = density.values.iter().enumerate().any(|(i, &v)| i > first + 1 && v == best);
    if tied {
        log::warn!("MAP is not unique on the KDE grid; reporting the lowest maximizer");
    }
    Ok(MapEstimate { value: density.grid[first], tied })
}

/// Shortest interval containing `ceil(mass * n)` of the samples.
pub fn hpd_interval(samples: &[f64], mass: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("HPD of an empty sample".into()));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::InvalidInput(format!("HPD mass must lie in (0, 1], got {mass}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let (mut best, mut lo) = (f64::INFINITY, 0);
    for i in 0..=(n - k) {
        let width = sorted[i + k - 1] - sorted[i];
        if width < best {
            best = width;
            lo = i;
        }
    }
    Ok((sorted[lo], sorted[lo + k - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn running_mean_examples() {
        assert_eq!(running_mean(&[2.0; 5]), vec![2.0; 5]);
        let alt: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(running_mean(&alt).last().unwrap().abs() < 1e-12);
        let x = normals(500, 2);
        let rm = running_mean(&x);
        let mut prefix = 0.0;
        for (i, v) in x.iter().enumerate() {
            prefix += v;
            assert!((rm[i] - prefix / (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn kde_integrates_to_one_and_peaks_at_mean() {
        let x: Vec<f64> = normals(20_000, 4).into_iter().map(|v| 3.0 + 0.5 * v).collect();
        let d = kde(&x, Bandwidth::Silverman, 512).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-3);
        let map = map_estimate(&d).unwrap();
        assert!((map.value - 3.0).abs() < 0.1, "mode {}", map.value);
    }

    #[test]
    fn kde_symmetric_samples() {
        let half = normals(2000, 8);
        let x: Vec<f64> = half.iter().copied().chain(half.iter().map(|v| -v)).collect();
        let d = kde(&x, Bandwidth::Silverman, 401).unwrap();
        let m = d.values.len();
        for i in 0..m {
            assert!((d.values[i] - d.values[m - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_samples() {
        let d = kde(&[1.5; 10], Bandwidth::Silverman, 64).unwrap();
        assert!(d.degenerate);
        assert_eq!(map_estimate(&d).unwrap().value, 1.5);
        assert!(kde(&[1.0], Bandwidth::Silverman, 64).is_err());
    }

    #[test]
    fn map_invariant_under_rescaling() {
        let x = normals(3000, 9);
        let d = kde(&x, Bandwidth::Fixed(0.3), 256).unwrap();
        let scaled = Density { values: d.values.iter().map(|v| 7.5 * v).collect(), ..d.clone() };
        assert_eq!(map_estimate(&d).unwrap(), map_estimate(&scaled).unwrap());
    }

    #[test]
    fn ties_are_flagged_and_resolved_low() {
        let d = Density {
            grid: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            values: vec![0.1, 0.5, 0.2, 0.5, 0.1],
            bandwidth: 1.0,
            degenerate: false,
        };
        let m = map_estimate(&d).unwrap();
        assert_eq!(m.value, 1.0);
        assert!(m.tied);
    }

    #[test]
    fn hpd_of_standard_normal() {
        let x = normals(200_000, 11);
        let (lo, hi) = hpd_interval(&x, 0.95).unwrap();
        assert!((lo + 1.96).abs() < 0.03 && (hi - 1.96).abs() < 0.03, "({lo}, {hi})");
    }

    #[test]
    fn hpd_shorter_than_equal_tail_for_skewed() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let exp = Exp::new(1.0).unwrap();
        let x: Vec<f64> = (0..50_000).map(|_| exp.sample(&mut rng)).collect();
        let (lo, hi) = hpd_interval(&x, 0.95).unwrap();
        // interval-scan oracle: every window holding the same count is no shorter
        let mut s = x.clone();
        s.sort_unstable_by(f64::total_cmp);
        let k = (0.95 * s.len() as f64).ceil() as usize;
        let scan = (0..=s.len() - k).map(|i| s[i + k - 1] - s[i]).fold(f64::INFINITY, f64::min);
        assert_eq!(hi - lo, scan);
        let equal_tail = quantile_sorted(&s, 0.975) - quantile_sorted(&s, 0.025);
        assert!(hi - lo < equal_tail);
        assert!(hpd_interval(&x, 0.0).is_err());
    }
}
