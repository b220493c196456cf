//! Objective, smooth-part gradients and proximal operators.
//!
//! ```text
//! Σ_i ½‖A_e,i D_eᵀ − X_e,i‖² + λ_e‖A_e,i‖₁
//! + Σ_j ½‖A_f,j D_fᵀ − X_f,j‖² + λ_f‖A_f,j‖₁
//! + Σ_ij ½ λ_x S_ij ‖A_e,i − A_f,j‖²
//! ```
//! subject to `A ≥ 0` and `‖D_:,k‖² ≤ 1` for every atom `k`.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use super::translation::TranslationMatrix;
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambdas {
    pub e: f64,
    pub f: f64,
    pub x: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Lambdas {
            e: 0.1,
            f: 0.1,
            x: 0.5,
        }
    }
}

/// Dense inputs, sparse codes and dictionaries for both languages.
#[derive(Debug, Clone, PartialEq)]
pub struct BilingualSpace {
    /// `v_e × n_e`
    pub x_e: Array2<f64>,
    /// `v_f × n_f`
    pub x_f: Array2<f64>,
    /// `v_e × k`
    pub a_e: Array2<f64>,
    /// `v_f × k`
    pub a_f: Array2<f64>,
    /// `n_e × k`
    pub d_e: Array2<f64>,
    /// `n_f × k`
    pub d_f: Array2<f64>,
    pub lambdas: Lambdas,
    /// `v_e × v_f`
    pub translation: TranslationMatrix,
}

impl BilingualSpace {
    pub fn k(&self) -> usize {
        self.a_e.ncols()
    }

    pub fn check_shapes(&self) -> Result<(), SolverError> {
        let k = self.a_e.ncols();
        let mismatch = |what: &str| Err(SolverError::ShapeMismatch(what.to_string()));
        if self.a_e.nrows() != self.x_e.nrows() {
            return mismatch("A_e rows must match X_e rows");
        }
        if self.a_f.nrows() != self.x_f.nrows() {
            return mismatch("A_f rows must match X_f rows");
        }
        if self.a_f.ncols() != k || self.d_e.ncols() != k || self.d_f.ncols() != k {
            return mismatch("A_e, A_f, D_e, D_f must share the sparse dimension");
        }
        if self.d_e.nrows() != self.x_e.ncols() {
            return mismatch("D_e rows must match X_e columns");
        }
        if self.d_f.nrows() != self.x_f.ncols() {
            return mismatch("D_f rows must match X_f columns");
        }
        if self.translation.shape() != (self.x_e.nrows(), self.x_f.nrows()) {
            return mismatch("S must be v_e × v_f");
        }
        Ok(())
    }

    /// Codes non-negative and atoms within the unit ball.
    pub fn is_feasible(&self) -> bool {
        let codes_ok = self.a_e.iter().chain(self.a_f.iter()).all(|&v| v >= 0.0);
        let atoms_ok = [&self.d_e, &self.d_f]
            .iter()
            .all(|d| d.columns().into_iter().all(|c| c.dot(&c) <= 1.0 + 1e-9));
        codes_ok && atoms_ok
    }
}

/// `½‖A Dᵀ − X‖²_F`
pub fn reconstruction_loss(x: ArrayView2<f64>, a: ArrayView2<f64>, d: ArrayView2<f64>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let r = a.dot(&d.t()) - x;
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// `Σ|A|`
pub fn l1_norm(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// `½ λ_x Σ_i Σ_(j,w) w ‖A_i − B_j‖²` with `pairs[i]` listing row i's partners in `b`.
pub fn coupling_loss(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    pairs: &[Vec<(usize, f64)>],
    lambda_x: f64,
) -> f64 {
    if lambda_x == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (i, row) in pairs.iter().enumerate() {
        for &(j, w) in row {
            let ai = a.row(i);
            let bj = b.row(j);
            let dist: f64 = ai.iter().zip(bj.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            total += w * dist;
        }
    }
    0.5 * lambda_x * total
}

/// Full objective value.
pub fn objective_value(space: &BilingualSpace) -> Result<f64, SolverError> {
    space.check_shapes()?;
    Ok(smooth_objective(space)
        + space.lambdas.e * l1_norm(space.a_e.view())
        + space.lambdas.f * l1_norm(space.a_f.view()))
}

/// Objective without the ℓ1 terms.
pub fn smooth_objective(space: &BilingualSpace) -> f64 {
    reconstruction_loss(space.x_e.view(), space.a_e.view(), space.d_e.view())
        + reconstruction_loss(space.x_f.view(), space.a_f.view(), space.d_f.view())
        + coupling_loss(
            space.a_e.view(),
            space.a_f.view(),
            space.translation.rows(),
            space.lambdas.x,
        )
}

/// Gradient of `½‖A Dᵀ − X‖² + coupling` with respect to `A`.
///
/// Row i of the coupling part is `λ_x Σ_(j,w) w (A_i − B_j)`.
pub fn code_gradient(
    x: ArrayView2<f64>,
    a: ArrayView2<f64>,
    d: ArrayView2<f64>,
    other: ArrayView2<f64>,
    pairs: &[Vec<(usize, f64)>],
    lambda_x: f64,
) -> Array2<f64> {
    let mut g = if x.is_empty() {
        Array2::zeros(a.raw_dim())
    } else {
        (a.dot(&d.t()) - x).dot(&d)
    };
    if lambda_x != 0.0 {
        for (i, row) in pairs.iter().enumerate() {
            let mut gi = g.row_mut(i);
            for &(j, w) in row {
                let scale = lambda_x * w;
                gi.zip_mut_with(&(&a.row(i) - &other.row(j)), |g, &diff| *g += scale * diff);
            }
        }
    }
    g
}

/// Gradient of `½‖A Dᵀ − X‖²` with respect to `D`: `(A Dᵀ − X)ᵀ A`.
pub fn dictionary_gradient(x: ArrayView2<f64>, a: ArrayView2<f64>, d: ArrayView2<f64>) -> Array2<f64> {
    if x.is_empty() {
        return Array2::zeros(d.raw_dim());
    }
    (a.dot(&d.t()) - x).t().dot(&a)
}

/// Smooth-part gradients `(∂/∂A_e, ∂/∂A_f)`.
pub fn code_gradients(space: &BilingualSpace) -> (Array2<f64>, Array2<f64>) {
    let s = &space.translation;
    let st = s.transposed_rows();
    let ge = code_gradient(
        space.x_e.view(),
        space.a_e.view(),
        space.d_e.view(),
        space.a_f.view(),
        s.rows(),
        space.lambdas.x,
    );
    let gf = code_gradient(
        space.x_f.view(),
        space.a_f.view(),
        space.d_f.view(),
        space.a_e.view(),
        &st,
        space.lambdas.x,
    );
    (ge, gf)
}

/// Smooth-part gradients `(∂/∂D_e, ∂/∂D_f)`.
pub fn dictionary_gradients(space: &BilingualSpace) -> (Array2<f64>, Array2<f64>) {
    (
        dictionary_gradient(space.x_e.view(), space.a_e.view(), space.d_e.view()),
        dictionary_gradient(space.x_f.view(), space.a_f.view(), space.d_f.view()),
    )
}

/// Proximal map of `τ‖·‖₁` plus non-negativity: `max(v − τ, 0)`.
pub fn nonneg_soft_threshold(v: ArrayView1<f64>, tau: f64) -> ndarray::Array1<f64> {
    assert!(tau >= 0.0, "threshold must be non-negative");
    v.mapv(|x| (x - tau).max(0.0))
}

/// Projection onto the Euclidean unit ball.
pub fn project_unit_ball(atom: ArrayView1<f64>) -> ndarray::Array1<f64> {
    let norm = atom.dot(&atom).sqrt();
    if norm <= 1.0 {
        atom.to_owned()
    } else {
        atom.mapv(|x| x / norm)
    }
}

/// Projects every column of `d` onto the unit ball in place.
pub fn project_atoms(d: &mut Array2<f64>) {
    for mut col in d.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        if norm > 1.0 {
            col.mapv_inplace(|x| x / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn space_1x1() -> BilingualSpace {
        BilingualSpace {
            x_e: array![[2.0]],
            x_f: Array2::zeros((0, 0)),
            a_e: array![[1.0]],
            a_f: Array2::zeros((0, 1)),
            d_e: array![[1.0]],
            d_f: Array2::zeros((0, 1)),
            lambdas: Lambdas {
                e: 1.0,
                f: 0.0,
                x: 0.0,
            },
            translation: TranslationMatrix::empty(1, 0),
        }
    }

    #[test]
    fn scalar_case() {
        assert!((objective_value(&space_1x1()).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_codes_give_half_frobenius() {
        let x_e = array![[1.0, 2.0], [0.5, -1.0]];
        let x_f = array![[3.0], [0.0], [-2.0]];
        let space = BilingualSpace {
            a_e: Array2::zeros((2, 3)),
            a_f: Array2::zeros((3, 3)),
            d_e: Array2::ones((2, 3)),
            d_f: Array2::ones((1, 3)),
            lambdas: Lambdas::default(),
            translation: TranslationMatrix::one_hot(2, 3, &[(0, 0), (1, 2)]),
            x_e: x_e.clone(),
            x_f: x_f.clone(),
        };
        let expected = 0.5 * (x_e.mapv(|v| v * v).sum() + x_f.mapv(|v| v * v).sum());
        assert!((objective_value(&space).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit_is_zero() {
        let a_e = array![[1.0, 0.0], [0.5, 2.0]];
        let d_e = array![[0.6, 0.0], [0.8, 1.0]];
        let a_f = array![[0.3, 0.1]];
        let d_f = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let space = BilingualSpace {
            x_e: a_e.dot(&d_e.t()),
            x_f: a_f.dot(&d_f.t()),
            a_e,
            a_f,
            d_e,
            d_f,
            lambdas: Lambdas {
                e: 0.0,
                f: 0.0,
                x: 0.0,
            },
            translation: TranslationMatrix::one_hot(2, 1, &[(0, 0)]),
        };
        assert!(objective_value(&space).unwrap().abs() < 1e-24);
    }

    #[test]
    fn shape_mismatch_detected() {
        let mut s = space_1x1();
        s.d_e = Array2::zeros((2, 1));
        assert!(matches!(objective_value(&s), Err(SolverError::ShapeMismatch(_))));
    }

    #[test]
    fn soft_threshold_examples() {
        let v = array![3.0, -1.0, 0.5];
        assert_eq!(nonneg_soft_threshold(v.view(), 1.0), array![2.0, 0.0, 0.0]);
        assert_eq!(nonneg_soft_threshold(v.view(), 0.0), array![3.0, 0.0, 0.5]);
        assert_eq!(nonneg_soft_threshold(v.view(), 5.0), Array1::<f64>::zeros(3));
    }

    #[test]
    fn unit_ball_examples() {
        let on = array![0.6, 0.8];
        assert_eq!(project_unit_ball(on.view()), on);
        let p = project_unit_ball(array![3.0, 4.0].view());
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_unit_ball(Array1::zeros(3).view()), Array1::<f64>::zeros(3));
    }
}
