//! Complex matrices, interferometers and permanent kernels.
//!
//! The production kernel is Ryser's inclusion-exclusion formula walked in
//! Gray-code order, so consecutive column subsets differ by one column and the
//! row sums are updated in O(s) per subset. Sizes up to three are expanded
//! directly.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::path::Path;

use itertools::Itertools;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest matrix accepted by [`permanent`]. Ryser costs O(2^s s).
pub const MAX_PERMANENT_DIM: usize = 30;

/// Largest matrix accepted by [`permanent_naive`].
pub const MAX_NAIVE_DIM: usize = 9;

pub const DEFAULT_UNITARITY_TOL: f64 = 1e-10;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting NaN/Inf entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_vec(n_rows, n_cols, rows.concat())
    }

    /// Builds a matrix from separate real and imaginary parts.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        if re.len() != im.len() || re.iter().zip(im).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Dimension(
                "real and imaginary parts have different shapes".into(),
            ));
        }
        let rows = re
            .iter()
            .zip(im)
            .map(|(r, i)| r.iter().zip(i).map(|(&a, &b)| Complex64::new(a, b)).collect())
            .collect::<Vec<Vec<_>>>();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        Ok(out)
    }

    /// Elementwise product with the complex conjugate of `other`.
    pub fn hadamard_conj(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "elementwise product of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Returns a copy with rows reordered so that row `i` is `self.row(order[i])`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.rows || !is_permutation(order) {
            return Err(Error::Dimension("row order is not a permutation".into()));
        }
        let data = order.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn permute_cols(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.cols || !is_permutation(order) {
            return Err(Error::Dimension("column order is not a permutation".into()));
        }
        let mut out = Self::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, &c) in order.iter().enumerate() {
                out[(i, j)] = self[(i, c)];
            }
        }
        Ok(out)
    }
}

fn is_permutation(order: &[usize]) -> bool {
    let mut seen = vec![false; order.len()];
    order.iter().all(|&i| i < seen.len() && !std::mem::replace(&mut seen[i], true))
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row = self.row(i).iter().map(|z| format!("{:+.4}{:+.4}i", z.re, z.im)).join(", ");
            writeln!(f, "  [{row}]")?;
        }
        write!(f, "]")
    }
}

/// An N-mode linear-optical network described by a unitary transfer matrix.
///
/// Row index is the input mode, column index the output mode: a photon
/// entering mode `i` exits mode `j` with amplitude `U[i, j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interferometer {
    matrix: ComplexMatrix,
}

impl Interferometer {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, DEFAULT_UNITARITY_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tolerance: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "interferometer must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation.is_nan() || deviation > tolerance {
            return Err(Error::NotUnitary {
                deviation,
                tolerance,
            });
        }
        Ok(Self { matrix })
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(n_modes),
        }
    }

    /// The two-mode 50:50 beamsplitter `[[1, 1], [1, -1]] / sqrt(2)`.
    pub fn balanced_beamsplitter() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = ComplexMatrix::from_parts(&[vec![h, h], vec![h, -h]], &[vec![0.0; 2], vec![0.0; 2]])
            .expect("static shape");
        Self { matrix: m }
    }

    /// Haar-random unitary via Gram-Schmidt on a complex Ginibre matrix.
    pub fn haar_random<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> Self {
        loop {
            let mut cols: Vec<Vec<Complex64>> = (0..n_modes)
                .map(|_| {
                    (0..n_modes)
                        .map(|_| {
                            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                        })
                        .collect()
                })
                .collect();
            let mut degenerate = false;
            for j in 0..n_modes {
                for p in 0..j {
                    let (done, rest) = cols.split_at_mut(j);
                    let proj: Complex64 =
                        done[p].iter().zip(rest[0].iter()).map(|(q, v)| q.conj() * v).sum();
                    for (v, q) in rest[0].iter_mut().zip(done[p].iter()) {
                        *v -= proj * q;
                    }
                }
                let norm = cols[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-8 {
                    degenerate = true;
                    break;
                }
                cols[j].iter_mut().for_each(|v| *v /= norm);
            }
            if degenerate {
                continue;
            }
            let mut m = ComplexMatrix::zeros(n_modes, n_modes);
            for (j, col) in cols.iter().enumerate() {
                for (i, &v) in col.iter().enumerate() {
                    m[(i, j)] = v;
                }
            }
            return Self { matrix: m };
        }
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    #[inline]
    pub fn amplitude(&self, input: usize, output: usize) -> Complex64 {
        self.matrix[(input, output)]
    }

    pub fn to_file(&self) -> UnitaryFile {
        let n = self.n_modes();
        UnitaryFile {
            n_modes: n,
            re: (0..n).map(|i| self.matrix.row(i).iter().map(|z| z.re).collect()).collect(),
            im: (0..n).map(|i| self.matrix.row(i).iter().map(|z| z.im).collect()).collect(),
        }
    }

    pub fn from_file(file: &UnitaryFile, tolerance: f64) -> Result<Self> {
        let m = file.to_matrix()?;
        if m.rows() != file.n_modes {
            return Err(Error::Dimension(format!(
                "n_modes is {} but the matrix has {} rows",
                file.n_modes,
                m.rows()
            )));
        }
        Self::with_tolerance(m, tolerance)
    }

    pub fn load(path: impl AsRef<Path>, tolerance: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: UnitaryFile = serde_json::from_str(&text)?;
        Self::from_file(&file, tolerance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }
}

/// `max |(U^dagger U - I)_ij|`.
pub fn unitarity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.rows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..n {
                acc += m[(l, i)].conj() * m[(l, j)];
            }
            if i == j {
                acc -= 1.0;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

/// On-disk unitary: `{"n_modes": N, "re": [[..]], "im": [[..]]}`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitaryFile {
    pub n_modes: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl UnitaryFile {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        ComplexMatrix::from_parts(&self.re, &self.im)
    }
}

/// Permanent of a square matrix; the 0x0 permanent is 1.
pub fn permanent(m: &ComplexMatrix) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "permanent of a non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() > MAX_PERMANENT_DIM {
        return Err(Error::Dimension(format!(
            "permanent size {} exceeds limit {MAX_PERMANENT_DIM}",
            m.rows()
        )));
    }
    Ok(permanent_square(m.as_slice(), m.rows()))
}

/// Permanent of an `n x n` row-major slice. Caller guarantees the shape.
pub(crate) fn permanent_square(a: &[Complex64], n: usize) -> Complex64 {
    debug_assert_eq!(a.len(), n * n);
    match n {
        0 => Complex64::new(1.0, 0.0),
        1 => a[0],
        2 => a[0] * a[3] + a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] + a[5] * a[7])
                + a[1] * (a[3] * a[8] + a[5] * a[6])
                + a[2] * (a[3] * a[7] + a[4] * a[6])
        }
        _ => ryser_gray(a, n),
    }
}

fn ryser_gray(a: &[Complex64], n: usize) -> Complex64 {
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for step in 1u64..(1u64 << n) {
        let col = step.trailing_zeros() as usize;
        let bit = 1u64 << col;
        gray ^= bit;
        if gray & bit != 0 {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += a[i * n + col];
            }
        } else {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= a[i * n + col];
            }
        }
        let prod = row_sums.iter().fold(Complex64::new(1.0, 0.0), |acc, s| acc * s);
        // (-1)^(n - |S|)
        if (n - gray.count_ones() as usize).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

/// Permanent by direct summation over all permutations.
///
/// Kept as an independent reference for [`permanent`]; O(s! s).
pub fn permanent_naive(m: &ComplexMatrix) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "permanent of a non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n > MAX_NAIVE_DIM {
        return Err(Error::Dimension(format!(
            "naive permanent size {n} exceeds limit {MAX_NAIVE_DIM}"
        )));
    }
    Ok((0..n)
        .permutations(n)
        .map(|sigma| {
            sigma
                .iter()
                .enumerate()
                .fold(Complex64::new(1.0, 0.0), |acc, (i, &j)| acc * m[(i, j)])
        })
        .sum())
}

/// `M[i, j] = U[rows[i], cols[j]]`; repeated indices repeat rows or columns.
pub fn submatrix(u: &Interferometer, rows: &[usize], cols: &[usize]) -> Result<ComplexMatrix> {
    let n = u.n_modes();
    if let Some(&index) = rows.iter().chain(cols).find(|&&i| i >= n) {
        return Err(Error::Bounds { index, bound: n });
    }
    let data = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| u.amplitude(r, c)))
        .collect();
    Ok(ComplexMatrix {
        rows: rows.len(),
        cols: cols.len(),
        data,
    })
}

/// `Perm(c)` with `c[i, j] = a[i, j] * conj(b[i, j])`.
pub fn hadamard_conj_permanent(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Complex64> {
    permanent(&a.hadamard_conj(b)?)
}
