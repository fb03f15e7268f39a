use super::StatsError;
use crate::aggregate::{tally, win_rates};
use crate::model::PreferenceDataset;

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::DegenerateInput(format!(
            "vectors differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(StatsError::DegenerateInput(
            "need at least two observations".into(),
        ));
    }
    for (name, v) in [("x", x), ("y", y)] {
        if v.iter().any(|a| !a.is_finite()) {
            return Err(StatsError::DegenerateInput(format!(
                "{name} has a non-finite value"
            )));
        }
        if v.iter().all(|&a| a == v[0]) {
            return Err(StatsError::DegenerateInput(format!("{name} is constant")));
        }
    }
    Ok(())
}

fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    (sxx, syy, sxy)
}

fn pearson_r(x: &[f64], y: &[f64]) -> f64 {
    let (sxx, syy, sxy) = moments(x, y);
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Squared sample Pearson correlation.
pub fn pearson_r2(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    let (sxx, syy, sxy) = moments(x, y);
    Ok((sxy * sxy / (sxx * syy)).min(1.0))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    Ok(pearson_r(&ranks(x), &ranks(y)))
}

/// Win rates of the proposals defined in both datasets, aligned by id.
pub fn winrate_vectors(
    reference: &PreferenceDataset,
    candidate: &PreferenceDataset,
) -> (Vec<f64>, Vec<f64>) {
    let left = win_rates(&tally(reference));
    let right = win_rates(&tally(candidate));
    left.defined()
        .filter_map(|(id, w)| right.win_rate(id).map(|v| (w, v)))
        .unzip()
}

/// Pearson R² between the two datasets' win rates. Proposals without
/// appearances on either side are left out.
pub fn winrate_r2(
    reference: &PreferenceDataset,
    candidate: &PreferenceDataset,
) -> Result<f64, StatsError> {
    let (x, y) = winrate_vectors(reference, candidate);
    if x.len() < 2 {
        return Err(StatsError::DegenerateInput(format!(
            "only {} proposals have win rates on both sides",
            x.len()
        )));
    }
    pearson_r2(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_values() {
        assert!((pearson_r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap() - 0.75).abs() < 1e-12);
        let x = [0.3, -1.0, 2.5, 7.0];
        assert!((pearson_r2(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson_r2(&x, &[1.0; 4]),
            Err(StatsError::DegenerateInput(_))
        ));
        assert!(pearson_r2(&[1.0], &[2.0]).is_err());
        assert!(pearson_r2(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn spearman_uses_ranks() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 10.0, 100.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }
}
