//! Binary Gaussian-process classification with a probit likelihood under the
//! Laplace approximation.
//!
//! The mode of the latent posterior is found by Newton iteration in the
//! numerically stable parameterization built around
//! `B = I + W^{1/2} K W^{1/2}`. Everything downstream (predictive variance,
//! the quadratic form against `(K + W^{-1})^{-1}`) reuses the Cholesky factor
//! of `B`, so `W` is never inverted explicitly.

use faer::{Mat, Side};

use crate::error::{invalid, Error, Result};
use crate::normal;

/// Added to the diagonal of `K` before factorization.
pub const KERNEL_JITTER: f64 = 1e-10;
/// Lower clamp on the entries of `W`.
pub const W_FLOOR: f64 = 1e-12;
/// Newton iteration cap.
pub const MAX_NEWTON_ITERATIONS: usize = 100;
const OBJECTIVE_TOL: f64 = 1e-9;
const STEP_TOL: f64 = 1e-8;
const MAX_STEP_HALVINGS: usize = 30;
const PREDICT_CHUNK: usize = 1024;

/// Class label returned by an oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Infeasible,
    Feasible,
}

impl Label {
    /// `+1.0` for feasible, `-1.0` for infeasible.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Feasible => 1.0,
            Label::Infeasible => -1.0,
        }
    }

    #[inline]
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Feasible => 1,
            Label::Infeasible => -1,
        }
    }

    /// Class decision for a latent value; zero goes to the feasible class.
    #[inline]
    pub fn from_latent(value: f64) -> Label {
        if value >= 0.0 {
            Label::Feasible
        } else {
            Label::Infeasible
        }
    }

    #[inline]
    pub fn flipped(self) -> Label {
        match self {
            Label::Feasible => Label::Infeasible,
            Label::Infeasible => Label::Feasible,
        }
    }

    pub fn is_feasible(self) -> bool {
        self == Label::Feasible
    }
}

/// Isotropic Gaussian kernel `exp(-|a - b|^2 / (2 l^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    length_scale: f64,
}

impl KernelConfig {
    pub fn new(length_scale: f64) -> Result<Self> {
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(invalid(format!("length scale must be positive, got {length_scale}")));
        }
        Ok(Self { length_scale })
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(invalid(format!(
                "kernel arguments differ in dimension ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        Ok(self.eval_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-sq / (2.0 * self.length_scale * self.length_scale)).exp()
    }
}

/// Queried points and their labels, in query order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    dim: usize,
    coords: Vec<f64>,
    labels: Vec<Label>,
}

impl LabeledSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(Self {
            dim,
            coords: Vec::new(),
            labels: Vec::new(),
        })
    }

    /// Builds a set from parallel point and label lists, validating every entry.
    pub fn from_parts(points: &[Vec<f64>], labels: &[Label]) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(invalid("points and labels differ in length"));
        }
        let dim = points.first().map(Vec::len).ok_or_else(|| invalid("empty training set"))?;
        let mut set = Self::new(dim)?;
        for (p, &y) in points.iter().zip(labels) {
            set.push(p, y)?;
        }
        Ok(set)
    }

    /// Appends a sample. Rejects wrong dimensions, non-finite coordinates and
    /// exact duplicates (which would make the kernel matrix singular).
    pub fn push(&mut self, point: &[f64], label: Label) -> Result<()> {
        if point.len() != self.dim {
            return Err(invalid(format!(
                "point has {} coordinates, expected {}",
                point.len(),
                self.dim
            )));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(invalid("point has non-finite coordinates"));
        }
        if self.points().any(|p| p == point) {
            return Err(invalid(format!("duplicate training point {point:?}")));
        }
        self.coords.extend_from_slice(point);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// True when both classes are present.
    pub fn has_both_classes(&self) -> bool {
        let first = match self.labels.first() {
            Some(&l) => l,
            None => return false,
        };
        self.labels.iter().any(|&l| l != first)
    }

    /// Centroid of the feasible samples, if any.
    pub fn feasible_centroid(&self) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut count = 0usize;
        for (p, l) in self.points().zip(&self.labels) {
            if l.is_feasible() {
                sum.iter_mut().zip(p).for_each(|(s, v)| *s += v);
                count += 1;
            }
        }
        (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
    }

    /// The first `n` samples.
    pub fn prefix(&self, n: usize) -> LabeledSet {
        let n = n.min(self.len());
        LabeledSet {
            dim: self.dim,
            coords: self.coords[..n * self.dim].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    /// Copy of the set with every label flipped.
    pub fn flipped(&self) -> LabeledSet {
        LabeledSet {
            dim: self.dim,
            coords: self.coords.clone(),
            labels: self.labels.iter().map(|l| l.flipped()).collect(),
        }
    }
}

/// Posterior mean and variance of the latent function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// A converged Laplace fit.
#[derive(Debug, Clone)]
pub struct GpcFit {
    training: LabeledSet,
    kernel: KernelConfig,
    mode: Vec<f64>,
    gradient: Vec<f64>,
    w_diag: Vec<f64>,
    sqrt_w: Vec<f64>,
    /// Lower Cholesky factor of `B = I + W^{1/2} K W^{1/2}`.
    chol_b: Mat<f64>,
    mu: f64,
    nu: f64,
    iterations: usize,
}

struct LaplaceState {
    gradient: Vec<f64>,
    w_diag: Vec<f64>,
    sqrt_w: Vec<f64>,
    chol_b: Mat<f64>,
}

impl LaplaceState {
    fn at(k: &Mat<f64>, y: &[f64], f: &[f64]) -> Result<Self> {
        let n = y.len();
        let mut gradient = Vec::with_capacity(n);
        let mut w_diag = Vec::with_capacity(n);
        for (&yi, &fi) in y.iter().zip(f) {
            let z = yi * fi;
            let r = normal::pdf_over_cdf(z);
            gradient.push(yi * r);
            w_diag.push((r * r + z * r).max(W_FLOOR));
        }
        let sqrt_w: Vec<f64> = w_diag.iter().map(|w| w.sqrt()).collect();
        let b = Mat::from_fn(n, n, |i, j| {
            sqrt_w[i] * k[(i, j)] * sqrt_w[j] + if i == j { 1.0 } else { 0.0 }
        });
        let chol_b = b
            .llt(Side::Lower)
            .map_err(|e| invalid(format!("B matrix is not positive definite: {e:?}")))?
            .L()
            .to_owned();
        Ok(Self {
            gradient,
            w_diag,
            sqrt_w,
            chol_b,
        })
    }
}

fn symmetric_matvec(k: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for j in 0..n {
        let vj = v[j];
        if vj == 0.0 {
            continue;
        }
        out.iter_mut().zip(k.col_as_slice(j)).for_each(|(o, &kij)| *o += kij * vj);
    }
    out
}

fn log_likelihood(y: &[f64], f: &[f64]) -> f64 {
    y.iter().zip(f).map(|(yi, fi)| normal::ln_cdf(yi * fi)).sum()
}

/// `-a'f/2 + log p(y|f)` with `f = K a`.
fn objective(y: &[f64], a: &[f64], f: &[f64]) -> f64 {
    let quad: f64 = a.iter().zip(f).map(|(x, y)| x * y).sum();
    -0.5 * quad + log_likelihood(y, f)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solves `L x = rhs` in place for a lower-triangular `L` and a single column.
fn solve_lower(l: &Mat<f64>, rhs: &[f64]) -> Vec<f64> {
    let mut m = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    l.solve_lower_triangular_in_place(&mut m);
    m.col_as_slice(0).to_vec()
}

fn solve_lower_transpose(l: &Mat<f64>, rhs: &[f64]) -> Vec<f64> {
    let mut m = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    l.transpose().solve_upper_triangular_in_place(&mut m);
    m.col_as_slice(0).to_vec()
}

/// Kernel matrix of the training inputs, jitter included.
pub fn kernel_matrix(training: &LabeledSet, kernel: &KernelConfig) -> Mat<f64> {
    let n = training.len();
    let mut k = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let pj = training.point(j);
        k[(j, j)] = 1.0 + KERNEL_JITTER;
        for i in (j + 1)..n {
            let v = kernel.eval_unchecked(training.point(i), pj);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Fits the Laplace approximation to `training`.
pub fn fit(training: &LabeledSet, kernel: KernelConfig) -> Result<GpcFit> {
    if training.is_empty() {
        return Err(invalid("cannot fit an empty training set"));
    }
    let n = training.len();
    let y: Vec<f64> = training.labels().iter().map(|l| l.sign()).collect();
    let k = kernel_matrix(training, &kernel);

    let mut f = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut psi = objective(&y, &a, &f);
    let mut converged = false;

    for iteration in 0..=MAX_NEWTON_ITERATIONS {
        let state = LaplaceState::at(&k, &y, &f)?;
        if converged {
            return Ok(GpcFit::from_state(training.clone(), kernel, f, state, iteration));
        }
        if iteration == MAX_NEWTON_ITERATIONS {
            break;
        }

        // b = W f + grad;  a = b - W^{1/2} B^{-1} W^{1/2} K b
        let b: Vec<f64> = (0..n).map(|i| state.w_diag[i] * f[i] + state.gradient[i]).collect();
        let kb = symmetric_matvec(&k, &b);
        let c: Vec<f64> = (0..n).map(|i| state.sqrt_w[i] * kb[i]).collect();
        let z = solve_lower(&state.chol_b, &c);
        let z = solve_lower_transpose(&state.chol_b, &z);
        let mut a_new: Vec<f64> = (0..n).map(|i| b[i] - state.sqrt_w[i] * z[i]).collect();
        let mut f_new = symmetric_matvec(&k, &a_new);
        let mut psi_new = objective(&y, &a_new, &f_new);

        let mut halvings = 0;
        while psi_new < psi - 1e-12 && halvings < MAX_STEP_HALVINGS {
            a_new.iter_mut().zip(&a).for_each(|(x, old)| *x = 0.5 * (*x + old));
            f_new = symmetric_matvec(&k, &a_new);
            psi_new = objective(&y, &a_new, &f_new);
            halvings += 1;
        }

        converged = (psi_new - psi).abs() < OBJECTIVE_TOL || max_abs_diff(&f_new, &f) < STEP_TOL;
        a = a_new;
        f = f_new;
        psi = psi_new;
    }

    let grad: Vec<f64> = y.iter().zip(&f).map(|(yi, fi)| yi * normal::pdf_over_cdf(yi * fi)).collect();
    let residual = max_abs_diff(&f, &symmetric_matvec(&k, &grad));
    Err(Error::FitFailure {
        iterations: MAX_NEWTON_ITERATIONS,
        residual,
    })
}

impl GpcFit {
    fn from_state(
        training: LabeledSet,
        kernel: KernelConfig,
        mode: Vec<f64>,
        state: LaplaceState,
        iterations: usize,
    ) -> Self {
        let mu = state.gradient.iter().map(|g| g.abs()).sum();
        let v = solve_lower(&state.chol_b, &state.sqrt_w);
        let nu = v.iter().map(|x| x * x).sum();
        Self {
            training,
            kernel,
            mode,
            gradient: state.gradient,
            w_diag: state.w_diag,
            sqrt_w: state.sqrt_w,
            chol_b: state.chol_b,
            mu,
            nu,
            iterations,
        }
    }

    pub fn training(&self) -> &LabeledSet {
        &self.training
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.training.dim()
    }

    /// Posterior mode of the latent values at the training inputs.
    pub fn mode(&self) -> &[f64] {
        &self.mode
    }

    /// `grad log p(y | f)` at the mode.
    pub fn likelihood_gradient(&self) -> &[f64] {
        &self.gradient
    }

    /// Diagonal of `W = -grad grad log p(y | f)` at the mode.
    pub fn w_diag(&self) -> &[f64] {
        &self.w_diag
    }

    /// `sum_i sign(y_i) * d/df_i log p(y|f)`. Strictly positive.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `1' (K + W^{-1})^{-1} 1`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn newton_iterations(&self) -> usize {
        self.iterations
    }

    /// `v' (K + W^{-1})^{-1} v`, computed as `|L^{-1} W^{1/2} v|^2`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.training.len() {
            return Err(invalid("vector length does not match the training set"));
        }
        let scaled: Vec<f64> = v.iter().zip(&self.sqrt_w).map(|(x, s)| x * s).collect();
        Ok(solve_lower(&self.chol_b, &scaled).iter().map(|x| x * x).sum())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(invalid(format!(
                "query point has {} coordinates, expected {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_dim(x)?;
        Ok(self.predict_chunk(std::slice::from_ref(&x))[0])
    }

    /// Posterior mean and variance at each point.
    pub fn predict_many<P: AsRef<[f64]>>(&self, xs: &[P]) -> Result<Vec<Prediction>> {
        let rows: Vec<&[f64]> = xs.iter().map(|p| p.as_ref()).collect();
        for x in &rows {
            self.check_dim(x)?;
        }
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(PREDICT_CHUNK) {
            out.extend(self.predict_chunk(chunk));
        }
        Ok(out)
    }

    /// Posterior mean only; skips the triangular solves.
    pub fn predict_mean_many<P: AsRef<[f64]>>(&self, xs: &[P]) -> Result<Vec<f64>> {
        xs.iter()
            .map(|p| {
                let x = p.as_ref();
                self.check_dim(x)?;
                Ok(self
                    .training
                    .points()
                    .zip(&self.gradient)
                    .map(|(xi, g)| self.kernel.eval_unchecked(xi, x) * g)
                    .sum())
            })
            .collect()
    }

    fn predict_chunk(&self, xs: &[&[f64]]) -> Vec<Prediction> {
        let n = self.training.len();
        let m = xs.len();
        let mut means = vec![0.0; m];
        let mut rhs = Mat::<f64>::zeros(n, m);
        for (j, x) in xs.iter().enumerate() {
            let col = rhs.col_as_slice_mut(j);
            let mut mean = 0.0;
            for (i, xi) in self.training.points().enumerate() {
                let kij = self.kernel.eval_unchecked(xi, x);
                mean += kij * self.gradient[i];
                col[i] = kij * self.sqrt_w[i];
            }
            means[j] = mean;
        }
        self.chol_b.solve_lower_triangular_in_place(&mut rhs);
        (0..m)
            .map(|j| {
                let reduction: f64 = rhs.col_as_slice(j).iter().map(|v| v * v).sum();
                Prediction {
                    mean: means[j],
                    variance: (1.0 - reduction).clamp(f64::MIN_POSITIVE, 1.0),
                }
            })
            .collect()
    }
}
