#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let nb = l2(b);
    let d = l2(&sub(a, b));
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

/// Central differences with step `1e-6 · (1 + |t_j|)`.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, t: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; t.len()];
    let mut tp = t.to_vec();
    for j in 0..t.len() {
        let h = 1e-6 * (1.0 + t[j].abs());
        tp[j] = t[j] + h;
        let fp = f(&tp);
        tp[j] = t[j] - h;
        let fm = f(&tp);
        tp[j] = t[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Golden-section search on `[a, b]` down to width `tol`, after a coarse
/// grid scan that brackets the minimum.
pub fn golden_section(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let steps = 2000;
    let h = (b - a) / steps as f64;
    let mut best = 0;
    let mut fbest = f64::INFINITY;
    for i in 0..=steps {
        let v = f(a + i as f64 * h);
        if v < fbest {
            fbest = v;
            best = i;
        }
    }
    let (mut lo, mut hi) = (
        a + (best.max(1) - 1) as f64 * h,
        a + (best + 1).min(steps) as f64 * h,
    );
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Singular values of a row-major `rows × cols` matrix by one-sided Jacobi
/// rotations on its columns.
pub fn jacobi_singular_values(entries: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut cols_v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| entries[i * cols + j]).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&cols_v[p], &cols_v[p]);
                let beta = dot(&cols_v[q], &cols_v[q]);
                let gamma = dot(&cols_v[p], &cols_v[q]);
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (u, v) = (cols_v[p][i], cols_v[q][i]);
                    cols_v[p][i] = c * u - s * v;
                    cols_v[q][i] = s * u + c * v;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = cols_v.iter().map(|c| l2(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Gaussian elimination with partial pivoting on a square row-major system.
pub fn dense_solve(entries: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = entries[i * n..(i + 1) * n].to_vec();
            row.push(b[i]);
            row
        })
        .collect();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .unwrap();
        m.swap(k, piv);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..=n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}
