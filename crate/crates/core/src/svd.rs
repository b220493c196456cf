//! Truncated SVD of re-weighted co-occurrence matrices.
//!
//! Matrices below [`SvdOptions::exact_limit`] on both axes use a dense
//! exact decomposition (faer); larger ones use a seeded randomized range finder
//! with oversampling and power iterations.

use std::io::{self, BufRead, Write};

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cooc::{CoocMatrix, MatrixError};

/// Default reduction dimension.
pub const DEFAULT_SVD_DIM: usize = 1000;

/// How rows of the left factor are turned into embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingScaling {
    /// `U Σ`
    #[default]
    ScaledBySingularValues,
    /// `U`
    LeftVectors,
}

#[derive(Debug, Clone)]
pub struct SvdOptions {
    pub scaling: EmbeddingScaling,
    pub seed: u64,
    pub oversample: usize,
    pub power_iters: usize,
    pub exact_limit: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            scaling: EmbeddingScaling::default(),
            seed: 0x5eed,
            oversample: 10,
            power_iters: 4,
            exact_limit: 5000,
        }
    }
}

/// Rank-d factorisation `U diag(σ) Vᵀ` with σ non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    pub u: Array2<f64>,
    pub singular_values: Array1<f64>,
    pub vt: Array2<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn embeddings(&self, scaling: EmbeddingScaling) -> Array2<f64> {
        match scaling {
            EmbeddingScaling::ScaledBySingularValues => &self.u * &self.singular_values,
            EmbeddingScaling::LeftVectors => self.u.clone(),
        }
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        (&self.u * &self.singular_values).dot(&self.vt)
    }
}

/// Dense word embeddings with rows aligned to a word list.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseEmbeddings {
    pub words: Vec<String>,
    pub matrix: Array2<f64>,
}

impl DenseEmbeddings {
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Writes `word<TAB>v1 v2 ... vd` rows.
    pub fn write<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (word, row) in self.words.iter().zip(self.matrix.rows()) {
            write!(out, "{word}\t")?;
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.write_all(b" ")?;
                }
                write!(out, "{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, MatrixError> {
        let mut words = Vec::new();
        let mut values = Vec::new();
        let mut dim = None;
        for line in reader.lines() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (word, rest) = line
                .split_once('\t')
                .ok_or_else(|| MatrixError::Format(format!("missing tab in {line:?}")))?;
            let row: Vec<f64> = rest
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| MatrixError::Format(format!("bad value in row for {word:?}")))?;
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(MatrixError::Format(format!(
                        "row for {word:?} has {} values, expected {d}",
                        row.len()
                    )))
                }
                _ => {}
            }
            words.push(word.to_string());
            values.extend(row);
        }
        let d = dim.unwrap_or(0);
        let matrix = Array2::from_shape_vec((words.len(), d), values)
            .map_err(|e| MatrixError::Format(e.to_string()))?;
        Ok(DenseEmbeddings { words, matrix })
    }
}

/// Reduces a weighted matrix to `d` dense dimensions.
///
/// When `d` exceeds the numerical rank it is lowered to the rank and a
/// warning is logged.
pub fn truncated_svd(
    weighted: &CoocMatrix,
    d: usize,
    opts: &SvdOptions,
) -> Result<(DenseEmbeddings, TruncatedSvd), MatrixError> {
    let svd = if weighted.n_rows() < opts.exact_limit && weighted.n_cols() < opts.exact_limit {
        let dense = DMatrix::from_fn(weighted.n_rows(), weighted.n_cols(), |r, c| {
            weighted.get(r, c)
        });
        exact_svd(dense, d)
    } else {
        randomized_svd(weighted, d, opts)
    };
    if svd.rank() == 0 {
        return Err(MatrixError::EmptyMatrix);
    }
    let words = weighted.rows.words().map(str::to_string).collect();
    let matrix = svd.embeddings(opts.scaling);
    Ok((DenseEmbeddings { words, matrix }, svd))
}

/// Exact truncated SVD of a dense matrix.
pub fn truncated_svd_dense(m: &Array2<f64>, d: usize) -> TruncatedSvd {
    let dense = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[[r, c]]);
    exact_svd(dense, d)
}

/// Randomized truncated SVD of a dense matrix, same conventions as the exact path.
pub fn randomized_svd_dense(m: &Array2<f64>, d: usize, opts: &SvdOptions) -> TruncatedSvd {
    let dense = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[[r, c]]);
    randomized_svd(&dense, d, opts)
}

fn exact_svd(m: DMatrix<f64>, d: usize) -> TruncatedSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return empty(rows, cols);
    }
    let (u, sigma, vt) = thin_svd(&m);
    finish(&u, &sigma, &vt, d, rows.max(cols))
}

/// Thin SVD `(U, σ, Vᵀ)` computed with faer's blocked dense solver.
fn thin_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let fm = faer::Mat::<f64>::from_fn(rows, cols, |r, c| m[(r, c)]);
    let svd = fm.thin_svd().expect("SVD of a finite matrix converges");
    let (u, v) = (svd.U(), svd.V());
    let sigma = svd.S().column_vector();
    let k = sigma.nrows();
    (
        DMatrix::from_fn(rows, k, |r, c| u[(r, c)]),
        (0..k).map(|i| sigma[i]).collect(),
        DMatrix::from_fn(k, cols, |r, c| v[(c, r)]),
    )
}

fn empty(rows: usize, cols: usize) -> TruncatedSvd {
    TruncatedSvd {
        u: Array2::zeros((rows, 0)),
        singular_values: Array1::zeros(0),
        vt: Array2::zeros((0, cols)),
    }
}

/// Orders components, drops numerically null ones, truncates and fixes signs.
fn finish(u: &DMatrix<f64>, sigma: &[f64], vt: &DMatrix<f64>, d: usize, max_dim: usize) -> TruncatedSvd {
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let top = order.first().map_or(0.0, |&i| sigma[i]);
    let tol = top * max_dim as f64 * f64::EPSILON;
    let rank = order.iter().filter(|&&i| sigma[i] > tol).count();
    let keep = if d > rank {
        log::warn!("requested SVD dimension {d} exceeds numerical rank {rank}; using {rank}");
        rank
    } else {
        d
    };
    let rows = u.nrows();
    let cols = vt.ncols();
    let mut out_u = Array2::zeros((rows, keep));
    let mut out_vt = Array2::zeros((keep, cols));
    let mut out_s = Array1::zeros(keep);
    for (k, &i) in order.iter().take(keep).enumerate() {
        // largest-magnitude coordinate of each left vector is made positive
        let mut pivot = 0;
        for r in 0..rows {
            if u[(r, i)].abs() > u[(pivot, i)].abs() {
                pivot = r;
            }
        }
        let sign = if u[(pivot, i)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..rows {
            out_u[[r, k]] = sign * u[(r, i)];
        }
        for c in 0..cols {
            out_vt[[k, c]] = sign * vt[(i, c)];
        }
        out_s[k] = sigma[i];
    }
    TruncatedSvd {
        u: out_u,
        singular_values: out_s,
        vt: out_vt,
    }
}

/// Minimal operator interface for the randomized range finder.
trait LinearOp {
    fn shape(&self) -> (usize, usize);
    /// `A X`
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// `Aᵀ X`
    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
}

impl LinearOp for DMatrix<f64> {
    fn shape(&self) -> (usize, usize) {
        DMatrix::shape(self)
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }

    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(x)
    }
}

impl LinearOp for CoocMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.n_rows(), self.n_cols())
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_rows(), x.ncols());
        for (r, c, v) in self.iter() {
            for k in 0..x.ncols() {
                out[(r, k)] += v * x[(c, k)];
            }
        }
        out
    }

    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_cols(), x.ncols());
        for (r, c, v) in self.iter() {
            for k in 0..x.ncols() {
                out[(c, k)] += v * x[(r, k)];
            }
        }
        out
    }
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

fn randomized_svd<M: LinearOp>(m: &M, d: usize, opts: &SvdOptions) -> TruncatedSvd {
    let (rows, cols) = m.shape();
    let width = (d + opts.oversample).min(rows).min(cols);
    if width == 0 {
        return empty(rows, cols);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let omega = DMatrix::from_fn(cols, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormal_basis(m.apply(&omega));
    for _ in 0..opts.power_iters {
        let z = orthonormal_basis(m.apply_t(&q));
        q = orthonormal_basis(m.apply(&z));
    }
    // B = Qᵀ M, computed as (Mᵀ Q)ᵀ
    let b = m.apply_t(&q).transpose();
    let (ub, sigma, vt) = thin_svd(&b);
    let u = q * ub;
    finish(&u, &sigma, &vt, d, rows.max(cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diagonal_matrix() {
        let m = array![[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
        let svd = truncated_svd_dense(&m, 2);
        let emb = svd.embeddings(EmbeddingScaling::ScaledBySingularValues);
        let expected = array![[3.0, 0.0], [0.0, 2.0], [0.0, 0.0]];
        assert!((&emb - &expected).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn rank_one_recovered() {
        let u = array![1.0, -2.0, 0.5, 3.0];
        let v = array![0.3, 0.1, -0.7];
        let m = Array2::from_shape_fn((4, 3), |(i, j)| u[i] * v[j]);
        let svd = truncated_svd_dense(&m, 1);
        let err = (&svd.reconstruct() - &m).mapv(|x| x * x).sum().sqrt();
        assert!(err < 1e-8);
    }

    #[test]
    fn rank_deficient_request_is_clamped() {
        let m = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let svd = truncated_svd_dense(&m, 2);
        assert_eq!(svd.rank(), 1);
    }

    #[test]
    fn sign_convention() {
        let m = array![[-5.0, 0.0], [0.0, -1.0]];
        let svd = truncated_svd_dense(&m, 2);
        for k in 0..2 {
            let col = svd.u.column(k);
            let pivot = col.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn randomized_matches_exact_on_low_rank() {
        let a = Array2::from_shape_fn((30, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let b = Array2::from_shape_fn((3, 25), |(i, j)| ((i * 5 + j * 2) % 7) as f64 - 3.0);
        let m = a.dot(&b);
        let exact = truncated_svd_dense(&m, 3);
        let approx = randomized_svd_dense(&m, 3, &SvdOptions::default());
        for (x, y) in exact.singular_values.iter().zip(approx.singular_values.iter()) {
            assert!((x - y).abs() < 1e-8 * x.max(1.0));
        }
        let ea = exact.embeddings(EmbeddingScaling::ScaledBySingularValues);
        let eb = approx.embeddings(EmbeddingScaling::ScaledBySingularValues);
        assert!((&ea - &eb).iter().all(|x| x.abs() < 1e-6));
    }

    #[test]
    fn sparse_path_via_cooc_matrix() {
        let m = CoocMatrix::from_dense(&[
            vec![1.0, 0.0, 2.0, 0.0],
            vec![0.0, 3.0, 0.0, 0.0],
            vec![4.0, 0.0, 0.0, 1.0],
        ]);
        let exact = truncated_svd(&m, 2, &SvdOptions::default()).unwrap().1;
        let opts = SvdOptions {
            exact_limit: 0,
            ..SvdOptions::default()
        };
        let approx = truncated_svd(&m, 2, &opts).unwrap().1;
        for (x, y) in exact.singular_values.iter().zip(approx.singular_values.iter()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn embedding_dump_round_trip() {
        let emb = DenseEmbeddings {
            words: vec!["a".into(), "b".into()],
            matrix: array![[0.1, -2.5e-17], [3.0, 0.0]],
        };
        let mut buf = Vec::new();
        emb.write(&mut buf).unwrap();
        assert_eq!(DenseEmbeddings::read(&buf[..]).unwrap(), emb);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let m = CoocMatrix::from_dense(&[vec![0.0, 0.0]]);
        assert!(truncated_svd(&m, 1, &SvdOptions::default()).is_err());
    }
}
