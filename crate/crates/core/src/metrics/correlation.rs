use std::cmp::Ordering;

use crate::error::{QppError, Result};

fn check_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(QppError::Input(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(QppError::Input("correlation needs at least 2 points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(QppError::Input("correlation input is not finite".into()));
    }
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(QppError::DegenerateVariance(
            "pearson: constant input vector".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite values")
}

/// Number of tied pairs within runs of equal values of an already-sorted key.
fn tied_pairs<T>(items: &[T], same: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in items.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort on the second coordinate, returning the number of inversions.
fn sort_counting_swaps(v: &mut [(f64, f64)], buf: &mut Vec<(f64, f64)>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid], buf) + sort_counting_swaps(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if cmp(v[j].1, v[i].1) == Ordering::Less {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Tie-aware Kendall τ-b, computed with Knight's O(n log n) algorithm.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(a.0, b.0).then(cmp(a.1, b.1)));

    let total = n * (n - 1) / 2;
    let tied_x = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let tied_xy = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);
    let mut buf = Vec::with_capacity(pairs.len());
    let swaps = sort_counting_swaps(&mut pairs, &mut buf);
    let tied_y = tied_pairs(&pairs, |a, b| a.1 == b.1);

    if tied_x == total || tied_y == total {
        return Err(QppError::DegenerateVariance(
            "kendall: all values tied".into(),
        ));
    }
    // concordant - discordant = total - tied_x - tied_y + tied_xy - 2 * discordant
    let numerator = total as i64 - tied_x as i64 - tied_y as i64 + tied_xy as i64 - 2 * swaps as i64;
    let denom = ((total - tied_x) as f64).sqrt() * ((total - tied_y) as f64).sqrt();
    Ok((numerator as f64 / denom).clamp(-1.0, 1.0))
}

/// Maps a degenerate-variance failure (constant input) to a correlation of 0.
pub fn or_zero_if_degenerate(r: Result<f64>) -> Result<f64> {
    match r {
        Err(QppError::DegenerateVariance(_)) => Ok(0.0),
        r => r,
    }
}
