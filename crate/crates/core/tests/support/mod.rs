//! Test-only reference implementations. Nothing here calls into the solver.

#![allow(dead_code)]

use rand::Rng;

/// Minimum-norm point of `{ δ : A δ + b >= 0 }` by enumerating every subset
/// of at most `d` rows, solving the equality-constrained least-norm problem
/// on it, and keeping the smallest feasible candidate. `None` if no
/// candidate is feasible.
pub fn enumerate_min_norm(rows: &[Vec<f64>], b: &[f64], d: usize) -> Option<Vec<f64>> {
    let m = rows.len();
    let feasible = |delta: &[f64]| {
        rows.iter()
            .zip(b)
            .all(|(r, &bi)| r.iter().zip(delta).map(|(a, x)| a * x).sum::<f64>() + bi >= -1e-9)
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |delta: Vec<f64>| {
        if feasible(&delta) {
            let n = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(bn, _)| n < *bn) {
                best = Some((n, delta));
            }
        }
    };
    consider(vec![0.0; d]);
    for mask in 1u32..(1 << m) {
        let subset: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        if subset.len() > d {
            continue;
        }
        if let Some(delta) = least_norm_on(rows, b, &subset, d) {
            consider(delta);
        }
    }
    best.map(|(_, delta)| delta)
}

/// `min ‖δ‖ s.t. A_S δ = -b_S` via the Gram system and Gaussian elimination.
fn least_norm_on(rows: &[Vec<f64>], b: &[f64], subset: &[usize], d: usize) -> Option<Vec<f64>> {
    let k = subset.len();
    let mut gram = vec![vec![0.0; k + 1]; k];
    for (i, &ri) in subset.iter().enumerate() {
        for (j, &rj) in subset.iter().enumerate() {
            gram[i][j] = (0..d).map(|t| rows[ri][t] * rows[rj][t]).sum();
        }
        gram[i][k] = -b[ri];
    }
    let scale = gram
        .iter()
        .map(|r| r[..k].iter().fold(0.0f64, |a, v| a.max(v.abs())))
        .fold(0.0, f64::max);
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| gram[x][col].abs().total_cmp(&gram[y][col].abs()))?;
        if gram[piv][col].abs() <= 1e-10 * scale.max(1e-300) {
            return None;
        }
        gram.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = gram[r][col] / gram[col][col];
                for c in col..=k {
                    gram[r][c] -= f * gram[col][c];
                }
            }
        }
    }
    let mu: Vec<f64> = (0..k).map(|i| gram[i][k] / gram[i][i]).collect();
    let mut delta = vec![0.0; d];
    for (i, &ri) in subset.iter().enumerate() {
        for t in 0..d {
            delta[t] += mu[i] * rows[ri][t];
        }
    }
    Some(delta)
}

/// Random small QP instance: a mix of generic rows, opposing pairs that may
/// conflict, and duplicated/scaled rows.
pub fn random_qp<R: Rng>(rng: &mut R) -> (Vec<Vec<f64>>, Vec<f64>, usize) {
    let d = rng.random_range(1..=4);
    let m = rng.random_range(0..=10);
    let mut rows = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    while rows.len() < m {
        let kind = rng.random_range(0..10);
        let r: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let off = rng.random_range(-1.0..1.0);
        if kind == 0 && rows.len() + 2 <= m {
            // a·δ >= -off and -a·δ >= -off2
            let off2 = rng.random_range(-1.0..1.0);
            rows.push(r.clone());
            b.push(off);
            rows.push(r.iter().map(|v| -v).collect());
            b.push(off2);
        } else if kind == 1 && !rows.is_empty() {
            let j = rng.random_range(0..rows.len());
            let f = rng.random_range(0.1..5.0);
            let dup: Vec<f64> = rows[j].iter().map(|v: &f64| v * f).collect();
            rows.push(dup);
            b.push(b[j] * f);
        } else {
            rows.push(r);
            b.push(off);
        }
    }
    (rows, b, d)
}
