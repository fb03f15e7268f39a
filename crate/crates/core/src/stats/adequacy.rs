use serde::{Deserialize, Serialize};

use super::correlation::winrate_r2;
use super::StatsError;
use crate::model::PreferenceDataset;
use crate::rng::derive_path;
use crate::sampling::disjoint_pair;

/// Mean agreement between the win rates of two disjoint samples of one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyPoint {
    pub sample_size: usize,
    /// `sample_size / population`.
    pub fraction: f64,
    pub r_squared: f64,
    pub std_dev: f64,
    /// Repetitions that produced an R².
    pub repetitions: usize,
    /// Repetitions dropped because fewer than two proposals had win rates on
    /// both sides, or one side's win rates were constant.
    pub skipped: usize,
}

/// For every size, draws `repetitions` disjoint sample pairs and averages
/// their win-rate R². Repetition `r` of size `s` uses seed
/// `derive_path(seed, [s, r])`.
pub fn adequacy_curve(
    dataset: &PreferenceDataset,
    sizes: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<AdequacyPoint>, StatsError> {
    if repetitions == 0 {
        return Err(StatsError::DegenerateInput("zero repetitions".into()));
    }
    let population = dataset.participants().len();
    sizes
        .iter()
        .map(|&size| {
            let mut values = Vec::with_capacity(repetitions);
            let mut skipped = 0;
            for r in 0..repetitions {
                let (left, right) =
                    disjoint_pair(dataset, size, derive_path(seed, &[size as u64, r as u64]))?;
                match winrate_r2(&left, &right) {
                    Ok(v) => values.push(v),
                    Err(StatsError::DegenerateInput(_)) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            if values.is_empty() {
                return Err(StatsError::DegenerateInput(format!(
                    "no repetition at size {size} produced a defined R²"
                )));
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            Ok(AdequacyPoint {
                sample_size: size,
                fraction: size as f64 / population as f64,
                r_squared: mean,
                std_dev: var.sqrt(),
                repetitions: values.len(),
                skipped,
            })
        })
        .collect()
}

/// Least-squares trend `r²(x) = a·x / (b + x)` over sample fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RationalFit {
    pub a: f64,
    pub b: f64,
    pub residual_sum_of_squares: f64,
    /// Residual of the best coarse-grid candidate before refinement.
    pub grid_residual: f64,
}

impl RationalFit {
    pub fn predict(&self, x: f64) -> f64 {
        if self.b + x == 0.0 {
            self.a
        } else {
            self.a * x / (self.b + x)
        }
    }
}

/// Optimal `a` and residual for a fixed `b`.
fn profile(xs: &[f64], ys: &[f64], b: f64) -> (f64, f64) {
    let g: Vec<f64> = xs.iter().map(|&x| x / (b + x)).collect();
    let gg: f64 = g.iter().map(|v| v * v).sum();
    let gy: f64 = g.iter().zip(ys).map(|(v, y)| v * y).sum();
    let a = gy / gg;
    let rss = g.iter().zip(ys).map(|(v, y)| (y - a * v).powi(2)).sum();
    (a, rss)
}

const GRID_POINTS: usize = 241;

fn grid() -> Vec<f64> {
    // 0, then 1e-4 ..= 1e2 evenly in log space
    std::iter::once(0.0)
        .chain(
            (0..GRID_POINTS - 1)
                .map(|i| 10f64.powf(-4.0 + 6.0 * i as f64 / (GRID_POINTS - 2) as f64)),
        )
        .collect()
}

/// Fits `a·x/(b+x)` with `b ≥ 0`. For fixed `b` the optimal `a` is closed
/// form, so only `b` is searched: a coarse grid, then golden-section search
/// between the best grid point's neighbours, keeping the best value seen.
pub fn fit_rational(points: &[AdequacyPoint]) -> Result<RationalFit, StatsError> {
    let xs: Vec<f64> = points.iter().map(|p| p.fraction).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.r_squared).collect();
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) || xs.iter().any(|&x| x <= 0.0) {
        return Err(StatsError::DegenerateInput(
            "fractions must be positive and finite".into(),
        ));
    }
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(StatsError::DegenerateInput(
            "need at least two distinct sizes".into(),
        ));
    }

    let bs = grid();
    let (mut best_i, mut best) = (0, (f64::NAN, f64::INFINITY));
    for (i, &b) in bs.iter().enumerate() {
        let cand = profile(&xs, &ys, b);
        if cand.1 < best.1 {
            best_i = i;
            best = cand;
        }
    }
    let grid_residual = best.1;
    let mut best_b = bs[best_i];

    let mut lo = bs[best_i.saturating_sub(1)];
    let mut hi = bs[(best_i + 1).min(bs.len() - 1)];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (profile(&xs, &ys, c), profile(&xs, &ys, d));
    for _ in 0..200 {
        for (b, f) in [(c, fc), (d, fd)] {
            if f.1 < best.1 {
                best = f;
                best_b = b;
            }
        }
        if hi - lo <= 1e-15 * (1.0 + hi) {
            break;
        }
        if fc.1 <= fd.1 {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = profile(&xs, &ys, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = profile(&xs, &ys, d);
        }
    }
    Ok(RationalFit {
        a: best.0,
        b: best_b,
        residual_sum_of_squares: best.1,
        grid_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> AdequacyPoint {
        AdequacyPoint {
            sample_size: 0,
            fraction: x,
            r_squared: y,
            std_dev: 0.0,
            repetitions: 1,
            skipped: 0,
        }
    }

    #[test]
    fn recovers_generating_curve() {
        let pts: Vec<_> = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
            .iter()
            .map(|&x| pt(x, x / (0.1 + x)))
            .collect();
        let fit = fit_rational(&pts).unwrap();
        assert!((fit.a - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.b - 0.1).abs() < 1e-6, "{fit:?}");
        assert!(fit.residual_sum_of_squares <= fit.grid_residual);
    }

    #[test]
    fn plateau() {
        let pts: Vec<_> = [0.1, 0.2, 0.4].iter().map(|&x| pt(x, 0.8)).collect();
        let fit = fit_rational(&pts).unwrap();
        assert!((fit.a - 0.8).abs() < 1e-9 && fit.b.abs() < 1e-9);
        assert!((fit.predict(0.3) - 0.8).abs() < 1e-9);
    }

    #[test]
    fn needs_two_sizes() {
        assert!(fit_rational(&[pt(0.1, 0.5), pt(0.1, 0.6)]).is_err());
        assert!(fit_rational(&[]).is_err());
    }
}
