//! Small dense matrices of expressions.

use nalgebra::{DMatrix, DVector};

use crate::expr::Expr;

pub type Matrix = Vec<Vec<Expr>>;

pub fn zeros(rows: usize, cols: usize) -> Matrix {
    vec![vec![Expr::zero(); cols]; rows]
}

pub fn identity(n: usize) -> Matrix {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Expr::one();
    }
    m
}

pub fn transpose(m: &Matrix) -> Matrix {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            assert_eq!(row.len(), inner, "matrix shapes");
            (0..cols).map(|j| Expr::sum((0..inner).map(|k| &row[k] * &b[k][j]))).collect()
        })
        .collect()
}

pub fn matvec(a: &Matrix, v: &[Expr]) -> Vec<Expr> {
    a.iter().map(|row| Expr::sum(row.iter().zip(v).map(|(m, x)| m * x))).collect()
}

/// Determinant by cofactor expansion along the first row (fine for n ≤ 6).
pub fn det(m: &Matrix) -> Expr {
    let n = m.len();
    let cols: Vec<usize> = (0..n).collect();
    det_minor(m, 0, &cols)
}

fn det_minor(m: &Matrix, row: usize, cols: &[usize]) -> Expr {
    if cols.is_empty() {
        return Expr::one();
    }
    if cols.len() == 1 {
        return m[row][cols[0]].clone();
    }
    let mut terms = Vec::new();
    for (pos, &c) in cols.iter().enumerate() {
        let a = &m[row][c];
        if a.is_zero() {
            continue;
        }
        let rest: Vec<usize> = cols.iter().copied().filter(|&k| k != c).collect();
        let minor = det_minor(m, row + 1, &rest);
        let t = a * &minor;
        terms.push(if pos % 2 == 0 { t } else { -t });
    }
    Expr::sum(terms)
}

/// Transposed cofactor matrix, so that `m · adj(m) = det(m) · I`.
pub fn adjugate(m: &Matrix) -> Matrix {
    let n = m.len();
    let mut adj = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let sub: Matrix = (0..n).filter(|&r| r != i).map(|r| (0..n).filter(|&c| c != j).map(|c| m[r][c].clone()).collect()).collect();
            let c = det(&sub);
            adj[j][i] = if (i + j) % 2 == 0 { c } else { -c };
        }
    }
    adj
}

/// Symbolic inverse `adj(m) / det(m)`; `None` when the determinant is the literal 0.
pub fn inverse(m: &Matrix) -> Option<(Matrix, Expr)> {
    let d = det(m);
    if d.is_zero() {
        return None;
    }
    let inv_d = d.recip();
    let adj = adjugate(m);
    Some((adj.iter().map(|row| row.iter().map(|a| a * &inv_d).collect()).collect(), d))
}

/// Solves `a x = b` numerically; `None` if `a` is numerically singular.
pub fn solve_numeric(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let lu = m.lu();
    let scale = a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let d = lu.determinant();
    if !d.is_finite() || d.abs() <= 1e-13 * scale.powi(n as i32) {
        return None;
    }
    lu.solve(&DVector::from_column_slice(b)).map(|x| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjugate_identity() {
        let x = Expr::var("x1");
        let m = vec![
            vec![Expr::one(), x.clone(), Expr::int(2)],
            vec![Expr::zero(), x.powi(2) + Expr::one(), Expr::zero()],
            vec![x.clone(), Expr::zero(), Expr::int(3)],
        ];
        let d = det(&m);
        let prod = matmul(&m, &adjugate(&m));
        for (i, row) in prod.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { d.clone() } else { Expr::zero() };
                assert_eq!(v, &want);
            }
        }
    }

    #[test]
    fn constant_inverse_is_exact() {
        let m = vec![vec![Expr::int(2), Expr::int(1)], vec![Expr::int(1), Expr::int(1)]];
        let (inv, d) = inverse(&m).unwrap();
        assert!(d.is_one());
        let p = matmul(&m, &inv);
        assert_eq!(p, identity(2));
    }

    #[test]
    fn numeric_solve() {
        let x = solve_numeric(&[vec![2.0, 1.0], vec![1.0, 3.0]], &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve_numeric(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 1.0]).is_none());
    }
}
