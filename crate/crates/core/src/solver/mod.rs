//! Bilingual non-negative sparse coding.
//!
//! Solved by block-alternating proximal gradient: each outer iteration
//! updates `A_e`, `A_f`, `D_e`, `D_f` in turn, every block step using an
//! Armijo backtracking search on the composite objective so that the total
//! objective never increases. A language's blocks are frozen once its part
//! of the objective stops decreasing by more than the configured tolerance.

mod objective;
pub mod translation;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub use objective::{
    code_gradient, code_gradients, coupling_loss, dictionary_gradient, dictionary_gradients,
    l1_norm, nonneg_soft_threshold, objective_value, project_atoms, project_unit_ball,
    reconstruction_loss, smooth_objective, BilingualSpace, Lambdas,
};
pub use translation::{
    build_translation_matrix, read_alignment_counts, reverse_counts, subsample_counts,
    AlignmentCount, TranslationMatrix, TranslationMode,
};

/// Default sparse dimension.
pub const DEFAULT_SPARSE_DIM: usize = 100;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("objective became non-finite at iteration {iteration} ({value})")]
    NonFinite { iteration: usize, value: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Armijo backtracking on the composite objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Backtracking {
    pub shrink: f64,
    pub initial_step: f64,
    pub sufficient_decrease: f64,
    pub max_steps: usize,
}

impl Default for Backtracking {
    fn default() -> Self {
        Backtracking {
            shrink: 0.5,
            initial_step: 1.0,
            sufficient_decrease: 1e-4,
            max_steps: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Sparse dimension (number of dictionary atoms).
    pub k: usize,
    pub max_outer_iters: usize,
    /// Proximal steps per block per outer iteration.
    pub inner_iters: usize,
    /// Relative objective decrease below which a language is converged.
    pub tolerance: f64,
    pub backtracking: Backtracking,
    pub seed: u64,
    /// ℓ2-normalise rows of X before solving.
    pub normalize_rows: bool,
    pub update_dictionaries: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            k: DEFAULT_SPARSE_DIM,
            max_outer_iters: 200,
            inner_iters: 5,
            tolerance: 1e-5,
            backtracking: Backtracking::default(),
            seed: 1,
            normalize_rows: true,
            update_dictionaries: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if self.k == 0 {
            return bad("k must be positive");
        }
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters must be at least 1");
        }
        if self.inner_iters == 0 {
            return bad("inner_iters must be at least 1");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        let b = &self.backtracking;
        if !(b.shrink > 0.0 && b.shrink < 1.0) {
            return bad("backtracking shrink must lie in (0, 1)");
        }
        if !(b.initial_step > 0.0) || !(b.sufficient_decrease > 0.0) {
            return bad("backtracking step and sufficient-decrease constant must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    E,
    F,
}

impl Language {
    fn stream(self) -> u64 {
        match self {
            Language::E => 0,
            Language::F => 1,
        }
    }
}

/// Per outer-iteration progress, passed to observers.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub objective: f64,
    /// Whether the e and f blocks are still being updated.
    pub active: [bool; 2],
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub space: BilingualSpace,
    pub iterations: usize,
    /// Objective before the first iteration, then after each one.
    pub objective_history: Vec<f64>,
    pub converged: bool,
}

impl SolveResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().expect("history holds the initial value")
    }
}

/// Seeded dictionary initialisation: standard normal entries, atoms projected
/// onto the unit ball. Each language draws from its own stream.
pub fn initial_dictionary(n: usize, k: usize, seed: u64, language: Language) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(language.stream());
    let mut d = Array2::from_shape_simple_fn((n, k), || StandardNormal.sample(&mut rng));
    project_atoms(&mut d);
    d
}

/// Scales each nonzero row to unit ℓ2 norm.
pub fn normalize_rows(x: &mut Array2<f64>) {
    for mut row in x.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
}

pub fn solve_bisparse(
    x_e: Array2<f64>,
    x_f: Array2<f64>,
    translation: TranslationMatrix,
    lambdas: Lambdas,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    solve_bisparse_observed(x_e, x_f, translation, lambdas, config, |_, _| {})
}

/// One language on its own; the other side is empty.
pub fn solve_monolingual(
    x: Array2<f64>,
    lambda: f64,
    language: Language,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    let empty = Array2::zeros((0, 0));
    match language {
        Language::E => {
            let s = TranslationMatrix::empty(x.nrows(), 0);
            let l = Lambdas {
                e: lambda,
                f: 0.0,
                x: 0.0,
            };
            solve_bisparse(x, empty, s, l, config)
        }
        Language::F => {
            let s = TranslationMatrix::empty(0, x.nrows());
            let l = Lambdas {
                e: 0.0,
                f: lambda,
                x: 0.0,
            };
            solve_bisparse(empty, x, s, l, config)
        }
    }
}

/// Like [`solve_bisparse`], calling `observer` after every outer iteration.
pub fn solve_bisparse_observed<F>(
    mut x_e: Array2<f64>,
    mut x_f: Array2<f64>,
    translation: TranslationMatrix,
    lambdas: Lambdas,
    config: &SolverConfig,
    mut observer: F,
) -> Result<SolveResult, SolverError>
where
    F: FnMut(&IterationReport, &BilingualSpace),
{
    config.validate()?;
    if [lambdas.e, lambdas.f, lambdas.x].iter().any(|l| !(*l >= 0.0)) {
        return Err(SolverError::InvalidConfig("lambdas must be non-negative".into()));
    }
    if config.normalize_rows {
        normalize_rows(&mut x_e);
        normalize_rows(&mut x_f);
    }
    let k = config.k;
    let (v_e, n_e) = x_e.dim();
    let (v_f, n_f) = x_f.dim();
    let mut space = BilingualSpace {
        a_e: Array2::zeros((v_e, k)),
        a_f: Array2::zeros((v_f, k)),
        d_e: initial_dictionary(n_e, k, config.seed, Language::E),
        d_f: initial_dictionary(n_f, k, config.seed, Language::F),
        x_e,
        x_f,
        lambdas,
        translation,
    };
    space.check_shapes()?;
    if lambdas.x > 0.0 && space.translation.is_empty() && v_e > 0 && v_f > 0 {
        log::warn!("λ_x > 0 with an empty translation matrix; languages are solved independently");
    }

    let pairs_e = space.translation.rows().to_vec();
    let pairs_f = space.translation.transposed_rows();
    let bt = &config.backtracking;
    // step memory for A_e, A_f, D_e, D_f
    let mut steps = [bt.initial_step; 4];

    let mut objective = objective_value(&space)?;
    if !objective.is_finite() {
        return Err(SolverError::NonFinite {
            iteration: 0,
            value: objective,
        });
    }
    let mut history = vec![objective];
    let mut active = [v_e > 0, v_f > 0];
    let mut partial = [partial_objective(&space, Language::E), partial_objective(&space, Language::F)];
    let mut iterations = 0;

    while iterations < config.max_outer_iters && active.iter().any(|&a| a) {
        iterations += 1;
        let BilingualSpace {
            x_e,
            x_f,
            a_e,
            a_f,
            d_e,
            d_f,
            ..
        } = &mut space;
        if active[0] {
            for _ in 0..config.inner_iters {
                let block = CodeBlock {
                    x: x_e.view(),
                    d: d_e.view(),
                    lambda: lambdas.e,
                    other: a_f.view(),
                    pairs: &pairs_e,
                    lambda_x: lambdas.x,
                };
                if !block.step(a_e, bt, &mut steps[0]) {
                    break;
                }
            }
        }
        if active[1] {
            for _ in 0..config.inner_iters {
                let block = CodeBlock {
                    x: x_f.view(),
                    d: d_f.view(),
                    lambda: lambdas.f,
                    other: a_e.view(),
                    pairs: &pairs_f,
                    lambda_x: lambdas.x,
                };
                if !block.step(a_f, bt, &mut steps[1]) {
                    break;
                }
            }
        }
        if config.update_dictionaries {
            if active[0] {
                for _ in 0..config.inner_iters {
                    if !dictionary_step(x_e.view(), a_e.view(), d_e, bt, &mut steps[2]) {
                        break;
                    }
                }
            }
            if active[1] {
                for _ in 0..config.inner_iters {
                    if !dictionary_step(x_f.view(), a_f.view(), d_f, bt, &mut steps[3]) {
                        break;
                    }
                }
            }
        }

        objective = objective_value(&space)?;
        if !objective.is_finite() {
            return Err(SolverError::NonFinite {
                iteration: iterations,
                value: objective,
            });
        }
        history.push(objective);
        for (slot, lang) in [Language::E, Language::F].into_iter().enumerate() {
            if !active[slot] {
                continue;
            }
            let now = partial_objective(&space, lang);
            let prev = partial[slot];
            let rel = (prev - now) / prev.abs().max(f64::MIN_POSITIVE);
            if rel < config.tolerance {
                active[slot] = false;
            }
            partial[slot] = now;
        }
        log::debug!("iteration {iterations}: objective {objective:.6e}, active {active:?}");
        observer(
            &IterationReport {
                iteration: iterations,
                objective,
                active,
            },
            &space,
        );
    }

    Ok(SolveResult {
        space,
        iterations,
        objective_history: history,
        converged: active.iter().all(|a| !a),
    })
}

/// The terms that depend on one language's blocks.
fn partial_objective(space: &BilingualSpace, language: Language) -> f64 {
    let coupling = coupling_loss(
        space.a_e.view(),
        space.a_f.view(),
        space.translation.rows(),
        space.lambdas.x,
    );
    match language {
        Language::E => {
            reconstruction_loss(space.x_e.view(), space.a_e.view(), space.d_e.view())
                + space.lambdas.e * l1_norm(space.a_e.view())
                + coupling
        }
        Language::F => {
            reconstruction_loss(space.x_f.view(), space.a_f.view(), space.d_f.view())
                + space.lambdas.f * l1_norm(space.a_f.view())
                + coupling
        }
    }
}

/// The code block of one language with everything else held fixed.
struct CodeBlock<'a> {
    x: ArrayView2<'a, f64>,
    d: ArrayView2<'a, f64>,
    lambda: f64,
    other: ArrayView2<'a, f64>,
    pairs: &'a [Vec<(usize, f64)>],
    lambda_x: f64,
}

impl CodeBlock<'_> {
    fn smooth(&self, a: ArrayView2<f64>) -> f64 {
        reconstruction_loss(self.x, a, self.d)
            + coupling_loss(a, self.other, self.pairs, self.lambda_x)
    }

    fn composite(&self, a: ArrayView2<f64>) -> f64 {
        self.smooth(a) + self.lambda * l1_norm(a)
    }

    /// One proximal gradient step. Returns `false` when nothing moved.
    fn step(&self, a: &mut Array2<f64>, bt: &Backtracking, step: &mut f64) -> bool {
        if a.is_empty() {
            return false;
        }
        let grad = code_gradient(self.x, a.view(), self.d, self.other, self.pairs, self.lambda_x);
        let current = self.composite(a.view());
        let lambda = self.lambda;
        let next = backtrack(bt, step, current, a, |t| {
            let mut next = a.clone();
            Zip::from(&mut next).and(&grad).for_each(|v, &g| {
                *v = (*v - t * g - t * lambda).max(0.0);
            });
            let value = self.composite(next.view());
            (next, value)
        });
        next.map(|n| *a = n).is_some()
    }
}

/// One projected gradient step on a dictionary. Returns `false` when nothing moved.
fn dictionary_step(
    x: ArrayView2<f64>,
    a: ArrayView2<f64>,
    d: &mut Array2<f64>,
    bt: &Backtracking,
    step: &mut f64,
) -> bool {
    if d.is_empty() || a.is_empty() {
        return false;
    }
    let grad = dictionary_gradient(x, a, d.view());
    let current = reconstruction_loss(x, a, d.view());
    let next = backtrack(bt, step, current, d, |t| {
        let mut next = &*d - &(&grad * t);
        project_atoms(&mut next);
        let value = reconstruction_loss(x, a, next.view());
        (next, value)
    });
    next.map(|n| *d = n).is_some()
}

/// Shrinks the step until `F(next) ≤ F(current) − (c / t)‖next − current‖²`.
///
/// The search starts from twice the last accepted step, capped at the
/// configured initial step. Returns the accepted iterate, or `None` when the
/// proposal does not move or no step is accepted.
fn backtrack<P>(
    bt: &Backtracking,
    step: &mut f64,
    current: f64,
    block: &Array2<f64>,
    mut propose: P,
) -> Option<Array2<f64>>
where
    P: FnMut(f64) -> (Array2<f64>, f64),
{
    let mut t = (*step * 2.0).min(bt.initial_step);
    for _ in 0..bt.max_steps {
        let (next, value) = propose(t);
        let moved: f64 = Zip::from(&next)
            .and(block)
            .fold(0.0, |acc, &n, &o| acc + (n - o) * (n - o));
        if moved == 0.0 {
            return None;
        }
        if value.is_finite() && value <= current - bt.sufficient_decrease / t * moved {
            *step = t;
            return Some(next);
        }
        t *= bt.shrink;
    }
    None
}
