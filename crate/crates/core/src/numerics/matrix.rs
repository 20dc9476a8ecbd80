//! Row-major `f64` matrix with the three matrix-product kernels the network
//! engine needs.
//!
//! The kernels are written so LLVM can vectorize them without reassociating
//! floating-point math: `matmul_nt` accumulates dot products in eight
//! independent lanes, while `matmul_nn` and `matmul_tn` stream along
//! contiguous rows of the right-hand operand. Results are therefore both fast
//! and bit-reproducible across runs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wraps an existing buffer; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dimension(
                "from_vec",
                format!("{}x{} needs {} values, got {}", rows, cols, rows * cols, data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::dimension("from_rows", "no rows given"));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::dimension(
                    "from_rows",
                    format!("row 0 has {} columns but row {} has {}", cols, i, row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Sum of squared entries.
    pub fn sq_sum(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::dimension(
                "add_assign",
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += alpha * other`, elementwise.
    pub fn add_scaled(&mut self, alpha: f64, other: &Matrix) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::dimension(
                "add_scaled",
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Adds `v` to every row; `v.len()` must equal `cols`.
    pub fn add_row_vector(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.cols {
            return Err(Error::dimension(
                "add_row_vector",
                format!("vector of {} vs {} columns", v.len(), self.cols),
            ));
        }
        for r in 0..self.rows {
            for (a, b) in self.row_mut(r).iter_mut().zip(v) {
                *a += b;
            }
        }
        Ok(())
    }

    /// `self * other^T`: `(m,k) x (n,k) -> (m,n)`.
    ///
    /// This is the forward-pass product for layers whose weights are stored
    /// as `(out, in)`: both operands are traversed along their contiguous
    /// rows.
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dimension(
                "matmul_nt",
                format!(
                    "{}x{} * ({}x{})^T: inner dimensions {} vs {}",
                    self.rows, self.cols, other.rows, other.cols, self.cols, other.cols
                ),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            let dst = out.row_mut(i);
            for (j, d) in dst.iter_mut().enumerate() {
                *d = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// `self * other`: `(m,k) x (k,n) -> (m,n)`.
    ///
    /// Used for gradient-versus-input products (`dZ * W`). The k-inner loop
    /// runs over contiguous rows of `other`, accumulating into the output
    /// row, so no transpose is ever materialized.
    pub fn matmul_nn(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dimension(
                "matmul_nn",
                format!(
                    "{}x{} * {}x{}: inner dimensions {} vs {}",
                    self.rows, self.cols, other.rows, other.cols, self.cols, other.rows
                ),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let dst = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                axpy(aik, other.row(k), dst);
            }
        }
        Ok(out)
    }

    /// `self^T * other`: `(k,m)^T x (k,n) -> (m,n)`.
    ///
    /// Used for weight gradients (`dZ^T * X`). The outer loop runs over the
    /// shared `k` dimension so both operands are read along contiguous rows.
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::dimension(
                "matmul_tn",
                format!(
                    "({}x{})^T * {}x{}: inner dimensions {} vs {}",
                    self.rows, self.cols, other.rows, other.cols, self.rows, other.rows
                ),
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a = self.row(k);
            let b = other.row(k);
            for (j, &akj) in a.iter().enumerate() {
                axpy(akj, b, out.row_mut(j));
            }
        }
        Ok(out)
    }

    /// Sum over rows, yielding one value per column.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        sums
    }

    /// Copies the given rows into a new matrix.
    pub fn gather_rows(&self, indices: &[u32]) -> Result<Matrix> {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (dst, &i) in indices.iter().enumerate() {
            let i = i as usize;
            if i >= self.rows {
                return Err(Error::dimension(
                    "gather_rows",
                    format!("row {} out of {}", i, self.rows),
                ));
            }
            out.row_mut(dst).copy_from_slice(self.row(i));
        }
        Ok(out)
    }
}

/// Dot product with eight independent accumulator lanes.
///
/// The fixed lane structure gives LLVM a vectorizable reduction without
/// `-ffast-math`-style reassociation, and the final lane sum uses a fixed
/// tree, so results do not depend on target vector width.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            lanes[i] += xa[i] * xb[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
        + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))
        + tail
}

/// `y += alpha * x` over full slices; vectorizes as-is.
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }

    /// Naive triple loop used as the oracle for all three kernels.
    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn kernels_match_naive_product() {
        let mut rng = crate::rng::stream(11, "matmul-test", 0, 0);
        for &(m, k, n) in &[(1, 1, 1), (2, 3, 4), (5, 8, 3), (7, 17, 9), (4, 64, 4), (3, 100, 2)] {
            let a = random_matrix(m, k, &mut rng);
            let b = random_matrix(k, n, &mut rng);
            let want = naive_matmul(&a, &b);

            let got_nn = a.matmul_nn(&b).unwrap();
            let got_nt = a.matmul_nt(&b.transpose()).unwrap();
            let got_tn = a.transpose().matmul_tn(&b).unwrap();
            for (name, got) in [("nn", got_nn), ("nt", got_nt), ("tn", got_tn)] {
                assert_eq!(got.rows(), m, "{}", name);
                assert_eq!(got.cols(), n, "{}", name);
                for i in 0..m {
                    for j in 0..n {
                        assert_close(got.get(i, j), want.get(i, j), 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn hand_checked_two_by_two() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let c = a.matmul_nn(&b).unwrap();
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn mismatched_inner_dimension_is_rejected() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        assert!(a.matmul_nn(&b).is_err());
        assert!(a.matmul_nt(&Matrix::zeros(4, 2)).is_err());
        assert!(a.matmul_tn(&Matrix::zeros(4, 2)).is_err());
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let mut rng = crate::rng::stream(12, "matmul-test", 1, 0);
        let a = random_matrix(5, 7, &mut rng);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn column_sums_and_row_vector() {
        let mut m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0]).unwrap();
        assert_eq!(m.column_sums(), vec![11.0, 22.0, 33.0]);
        m.add_row_vector(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.row(1), &[11.0, 21.0, 31.0]);
        assert!(m.add_row_vector(&[1.0]).is_err());
    }

    #[test]
    fn gather_rows_copies_and_bounds_checks() {
        let m = Matrix::from_vec(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let g = m.gather_rows(&[2, 0]).unwrap();
        assert_eq!(g.data(), &[4.0, 5.0, 0.0, 1.0]);
        assert!(m.gather_rows(&[3]).is_err());
    }

    /// Rough kernel throughput at training shapes; run explicitly with
    /// `cargo test -p semcom --release -- --ignored throughput`.
    #[test]
    #[ignore = "manual throughput probe"]
    fn throughput_probe() {
        let mut rng = crate::rng::stream(99, "throughput", 0, 0);
        let x = random_matrix(64, 784, &mut rng); // batch of images
        let w = random_matrix(512, 784, &mut rng); // wide layer
        let dz = random_matrix(64, 512, &mut rng);

        let time = |name: &str, flops: f64, f: &dyn Fn() -> Matrix| {
            let reps = 50;
            let mut sink = 0.0;
            let start = std::time::Instant::now();
            for _ in 0..reps {
                sink += f().get(0, 0);
            }
            let secs = start.elapsed().as_secs_f64() / reps as f64;
            println!("{name}: {:.2} GFLOP/s (sink {sink:.3})", flops / secs / 1e9);
        };
        let flops = 2.0 * 64.0 * 512.0 * 784.0;
        time("matmul_nt (forward)", flops, &|| x.matmul_nt(&w).unwrap());
        time("matmul_nn (grad-in)", flops, &|| dz.matmul_nn(&w).unwrap());
        time("matmul_tn (grad-w) ", flops, &|| dz.matmul_tn(&x).unwrap());
    }

    #[test]
    fn repeated_products_are_bit_identical() {
        let mut rng = crate::rng::stream(13, "matmul-test", 2, 0);
        let a = random_matrix(9, 33, &mut rng);
        let b = random_matrix(33, 6, &mut rng);
        let c1 = a.matmul_nn(&b).unwrap();
        let c2 = a.matmul_nn(&b).unwrap();
        assert_eq!(c1.data(), c2.data());
        let d1 = a.matmul_tn(&a).unwrap();
        let d2 = a.matmul_tn(&a).unwrap();
        assert_eq!(d1.data(), d2.data());
    }
}
