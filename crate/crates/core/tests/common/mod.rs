#![allow(dead_code)]

use meanscore::TrialDataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Linear outcome, design (1, z, x1..xk), MCAR-ish missingness depending on z.
pub fn linear_data(seed: u64, n: usize, k: usize) -> TrialDataset {
    let mut r = rng(seed);
    let p = 2 + k;
    let mut xs = DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let z = if r.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        xs[(i, 0)] = 1.0;
        xs[(i, 1)] = z;
        let mut eta = 0.5 + 0.8 * z;
        for j in 0..k {
            let v: f64 = StandardNormal.sample(&mut r);
            xs[(i, 2 + j)] = v;
            eta += 0.3 * v;
        }
        let e: f64 = StandardNormal.sample(&mut r);
        let yi = eta + (1.0 + 0.5 * z) * e;
        let p_obs = expit(1.2 - 0.6 * z);
        y.push(if r.random::<f64>() < p_obs { Some(yi) } else { None });
    }
    TrialDataset::without_auxiliaries(y, xs, 1).unwrap()
}

/// Binary outcome, design (1, z, x), optional auxiliary column.
pub fn binary_data(seed: u64, n: usize, aux: bool) -> TrialDataset {
    let mut r = rng(seed);
    let mut xs = DMatrix::zeros(n, 3);
    let mut xa = DMatrix::zeros(n, usize::from(aux));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let z = if r.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        let x: f64 = StandardNormal.sample(&mut r);
        let a: f64 = StandardNormal.sample(&mut r);
        xs[(i, 0)] = 1.0;
        xs[(i, 1)] = z;
        xs[(i, 2)] = x;
        if aux {
            xa[(i, 0)] = a;
        }
        let yi = if r.random::<f64>() < expit(-0.3 + 0.7 * z + 0.5 * x + 0.8 * a) { 1.0 } else { 0.0 };
        let p_obs = expit(1.0 + 0.4 * x - 0.5 * z + 0.3 * a);
        y.push(if r.random::<f64>() < p_obs { Some(yi) } else { None });
    }
    TrialDataset::new(y, xs, 1, xa).unwrap()
}

/// Saturated arm × stratum design with linear outcome: columns
/// (1, z, s1..s_{k-1}, z·s1..z·s_{k-1}), every cell populated.
pub fn saturated_linear(seed: u64, n: usize, strata: usize) -> TrialDataset {
    let mut r = rng(seed);
    let p = 2 * strata;
    let mut xs = DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let z = (i % 2) as f64;
        let s = (i / 2) % strata;
        xs[(i, 0)] = 1.0;
        xs[(i, 1)] = z;
        if s > 0 {
            xs[(i, 1 + s)] = 1.0;
            xs[(i, strata + s)] = z;
        }
        let e: f64 = StandardNormal.sample(&mut r);
        let yi = 1.0 + 0.5 * z + 0.4 * s as f64 + (0.8 + 0.3 * s as f64) * e;
        let p_obs = 0.6 + 0.1 * s as f64 / strata as f64 + 0.15 * z;
        let obs = r.random::<f64>() < p_obs || i < 4 * strata;
        y.push(if obs { Some(yi) } else { None });
    }
    TrialDataset::without_auxiliaries(y, xs, 1).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn max_rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.amax().max(1e-300);
    (a - b).amax() / scale
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        let (top, rest) = a.split_at_mut(c + 1);
        let pivot = &top[c];
        for (r, row) in rest.iter_mut().enumerate() {
            let f = row[c] / pivot[c];
            for (dst, src) in row.iter_mut().zip(pivot).skip(c) {
                *dst -= f * src;
            }
            b[c + 1 + r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| solve(a.to_vec(), (0..n).map(|i| f64::from(u8::from(i == j))).collect()))
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// Textbook GLM by Newton-Raphson on row-major data; returns
/// `(beta, sandwich HC0 variance)`.
pub fn oracle_glm(y: &[f64], x: &[Vec<f64>], logit: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    let mean = |eta: f64| if logit { expit(eta) } else { eta };
    let deriv = |eta: f64| {
        if logit {
            let m = expit(eta);
            m * (1.0 - m)
        } else {
            1.0
        }
    };
    for _ in 0..100 {
        let mut info = vec![vec![0.0; p]; p];
        let mut score = vec![0.0; p];
        for (xi, &yi) in x.iter().zip(y) {
            let eta: f64 = xi.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let w = deriv(eta);
            for a in 0..p {
                score[a] += (yi - mean(eta)) * xi[a];
                for b in 0..p {
                    info[a][b] += w * xi[a] * xi[b];
                }
            }
        }
        let step = solve(info, score);
        let size: f64 = step.iter().map(|s| s.abs()).sum();
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if size < 1e-13 {
            break;
        }
    }
    let mut info = vec![vec![0.0; p]; p];
    let mut meat = vec![vec![0.0; p]; p];
    for (xi, &yi) in x.iter().zip(y) {
        let eta: f64 = xi.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let e = yi - mean(eta);
        for a in 0..p {
            for b in 0..p {
                info[a][b] += deriv(eta) * xi[a] * xi[b];
                meat[a][b] += e * e * xi[a] * xi[b];
            }
        }
    }
    let inv = invert(&info);
    let mut v = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            v[a][b] = (0..p)
                .flat_map(|k| (0..p).map(move |l| (k, l)))
                .map(|(k, l)| inv[a][k] * meat[k][l] * inv[l][b])
                .sum();
        }
    }
    (beta, v)
}

/// Standard analysis of `(y, X)`: sandwich with `f = n/(n - p*)`, t reference
/// with `n - p*` df for the identity link, normal for logit. Returns
/// `(estimate, se, ci_low, ci_high)` for coefficient `coef`.
pub fn oracle_interval(y: &[f64], x: &[Vec<f64>], logit: bool, coef: usize, level: f64) -> (f64, f64, f64, f64) {
    use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
    let (beta, v) = oracle_glm(y, x, logit);
    let n = y.len() as f64;
    let p_star = if logit { 1.0 } else { x[0].len() as f64 };
    let se = (v[coef][coef] * n / (n - p_star)).sqrt();
    let prob = 0.5 + level / 2.0;
    let q = if logit {
        Normal::new(0.0, 1.0).unwrap().inverse_cdf(prob)
    } else {
        StudentsT::new(0.0, 1.0, n - p_star).unwrap().inverse_cdf(prob)
    };
    (beta[coef], se, beta[coef] - q * se, beta[coef] + q * se)
}

/// Complete-case rows of a data set as row-major vectors.
pub fn complete_cases(d: &TrialDataset) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut y = Vec::new();
    let mut x = Vec::new();
    for i in 0..d.n() {
        if let Some(v) = d.outcome()[i] {
            y.push(v);
            x.push(d.xs().row(i).iter().copied().collect());
        }
    }
    (y, x)
}
