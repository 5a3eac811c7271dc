#![allow(dead_code)]

use diter::{DenseVector, FixedPointProblem, OperatorSpec, SparseMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact solution of the 4x4 benchmark system `A·X = 1`.
pub const X_STAR: [f64; 4] = [51.0 / 1090.0, 179.0 / 1090.0, 149.0 / 1090.0, 433.0 / 1090.0];

pub fn golden_a() -> SparseMatrix {
    SparseMatrix::from_dense_rows(&[
        vec![5.0, 3.0, 2.0, 0.0],
        vec![0.0, 7.0, -4.0, 1.0],
        vec![-2.0, 0.0, 8.0, 0.0],
        vec![0.0, -2.0, 1.0, 3.0],
    ])
    .unwrap()
}

pub fn ones(n: usize) -> DenseVector {
    DenseVector::filled(n, 1.0)
}

/// Gaussian elimination with partial pivoting on dense rows. Kept separate
/// from the library's solver so it can serve as an independent oracle.
pub fn gauss_oracle(rows: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let n = rows.len();
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            let mut row = r.clone();
            row.push(b);
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap()).unwrap();
        m.swap(c, p);
        assert!(m[c][c].abs() > 1e-300, "oracle hit a singular matrix");
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

/// Oracle solution of `X = P·X + F₀` in the problem's own unknowns.
pub fn fixed_point_oracle(prob: &FixedPointProblem) -> Vec<f64> {
    let n = prob.n();
    let mut rows = prob.operator().to_dense_rows();
    for (i, row) in rows.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = -*v;
        }
        row[i] += 1.0;
    }
    let x = gauss_oracle(&rows, prob.f0());
    assert_eq!(x.len(), n);
    x
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Column strictly diagonally dominant matrix with positive diagonal.
pub fn random_column_sdd(rng: &mut TestRng, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for col in 0..n {
        let mut off = 0.0;
        for row in 0..n {
            if row != col && rng.gen_bool(density) {
                let v: f64 = rng.gen_range(-1.0..1.0);
                off += v.abs();
                t.push((row, col, v));
            }
        }
        let diag = off * rng.gen_range(1.1..2.0) + rng.gen_range(0.1..1.0);
        t.push((col, col, diag));
    }
    SparseMatrix::from_triplets(n, &t).unwrap()
}

/// Signed operator whose columns have abs sums at most `max_sum` (< 1).
pub fn random_contractive(rng: &mut TestRng, n: usize, density: f64, max_sum: f64) -> FixedPointProblem {
    let mut t = Vec::new();
    for col in 0..n {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for row in 0..n {
            if rng.gen_bool(density) {
                entries.push((row, rng.gen_range(-1.0..1.0)));
            }
        }
        let total: f64 = entries.iter().map(|(_, v)| v.abs()).sum();
        if total == 0.0 {
            continue;
        }
        let target = rng.gen_range(0.2..max_sum);
        t.extend(entries.into_iter().map(|(row, v)| (row, col, v * target / total)));
    }
    let p = SparseMatrix::from_triplets(n, &t).unwrap();
    let f0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FixedPointProblem::new(OperatorSpec::sparse(p), DenseVector::new(f0).unwrap()).unwrap()
}

/// Column-stochastic link matrix with every node having 1..=max_out
/// out-links to other nodes (no dangling node).
pub fn random_web_graph(rng: &mut TestRng, n: usize, max_out: usize) -> SparseMatrix {
    let mut t = Vec::new();
    for src in 0..n {
        let k = rng.gen_range(1..=max_out.min(n - 1));
        let mut targets = Vec::new();
        while targets.len() < k {
            let dst = rng.gen_range(0..n);
            if dst != src && !targets.contains(&dst) {
                targets.push(dst);
            }
        }
        for dst in targets {
            t.push((dst, src, 1.0 / k as f64));
        }
    }
    SparseMatrix::from_triplets(n, &t).unwrap()
}
