//! Exact Gaussian-process regression over the control window: squared
//! exponential ARD kernel, Cholesky fit, posterior mean/std queries.
//!
//! Targets are standardized (centered on their mean, divided by their
//! standard deviation) inside [`gp_fit`] and un-standardized on query, which
//! is algebraically a constant-mean GP in the original units: the model is
//! `y ~ GP(mean(y), k)` with
//! `k(u, u') = signal_variance * exp(-0.5 * sum_d ((u_d - u'_d)/l_d)^2)`
//! plus `noise_variance + JITTER_FLOOR_REL * signal_variance` on the
//! diagonal.

use thiserror::Error;

use crate::scalar::{half, lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("dataset must contain at least one observation")]
    EmptyDataset,
    #[error("dataset inputs and targets have different lengths ({inputs} vs {targets})")]
    MismatchedLengths { inputs: usize, targets: usize },
    #[error("input dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("kernel matrix not positive definite even with jitter {max_jitter:e}")]
    NotPositiveDefinite { max_jitter: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Relative jitter always added to the diagonal, as a fraction of the signal
/// variance.
pub const JITTER_FLOOR_REL: f64 = 1e-13;
/// Jitter escalation stops once the extra nugget exceeds this fraction of
/// the signal variance.
pub const JITTER_CAP_REL: f64 = 1e-4;

/// Squared exponential ARD kernel hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelHyperparams<T = f64> {
    pub signal_variance: T,
    /// One positive lengthscale per input dimension.
    pub lengthscales: Vec<T>,
    pub noise_variance: T,
}

impl<T: Real> KernelHyperparams<T> {
    pub fn new(signal_variance: T, lengthscales: Vec<T>, noise_variance: T) -> Result<Self, GpError> {
        let h = KernelHyperparams { signal_variance, lengthscales, noise_variance };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.signal_variance > T::zero()) || !self.signal_variance.is_finite() {
            return Err(GpError::InvalidHyperparams("signal variance must be positive".into()));
        }
        if self.lengthscales.is_empty() {
            return Err(GpError::InvalidHyperparams("at least one lengthscale required".into()));
        }
        if self.lengthscales.iter().any(|l| !(*l > T::zero()) || !l.is_finite()) {
            return Err(GpError::InvalidHyperparams("lengthscales must be positive".into()));
        }
        if self.noise_variance < T::zero() || !self.noise_variance.is_finite() {
            return Err(GpError::InvalidHyperparams("noise variance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.lengthscales.len()
    }
}

/// `signal_variance * exp(-0.5 * sum_d ((u_d - u'_d) / l_d)^2)`.
pub fn kernel_se_ard<T: Real>(
    u: &[T],
    u_prime: &[T],
    h: &KernelHyperparams<T>,
) -> Result<T, GpError> {
    if u.len() != h.input_dim() || u_prime.len() != h.input_dim() {
        return Err(GpError::DimensionMismatch {
            expected: h.input_dim(),
            got: if u.len() != h.input_dim() { u.len() } else { u_prime.len() },
        });
    }
    let mut sq = T::zero();
    for d in 0..u.len() {
        let z = (u[d] - u_prime[d]) / h.lengthscales[d];
        sq += z * z;
    }
    Ok(h.signal_variance * (-half::<T>() * sq).exp())
}

/// Observations of one scalar quantity over control inputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset<T = f64> {
    pub inputs: Vec<Vec<T>>,
    pub targets: Vec<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new() -> Self {
        Dataset { inputs: Vec::new(), targets: Vec::new() }
    }

    pub fn push(&mut self, input: Vec<T>, target: T) {
        self.inputs.push(input);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn validate(&self) -> Result<usize, GpError> {
        if self.is_empty() {
            return Err(GpError::EmptyDataset);
        }
        if self.inputs.len() != self.targets.len() {
            return Err(GpError::MismatchedLengths {
                inputs: self.inputs.len(),
                targets: self.targets.len(),
            });
        }
        let dim = self.inputs[0].len();
        for input in &self.inputs {
            if input.len() != dim {
                return Err(GpError::DimensionMismatch { expected: dim, got: input.len() });
            }
            if input.iter().any(|v| !v.is_finite()) {
                return Err(GpError::NonFinite("dataset inputs"));
            }
        }
        if self.targets.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("dataset targets"));
        }
        Ok(dim)
    }
}

/// Fitted GP posterior: training inputs, Cholesky factor of the regularized
/// kernel matrix, and the precomputed weight vector.
#[derive(Clone, Debug)]
pub struct GpModel<T = f64> {
    hyper: KernelHyperparams<T>,
    train_inputs: Vec<Vec<T>>,
    /// Lower-triangular Cholesky factor, row-major packed.
    chol: Vec<T>,
    /// `(K + nugget I)^-1 y_standardized`.
    weights: Vec<T>,
    y_mean: T,
    y_scale: T,
    /// Diagonal nugget actually used, on the standardized scale.
    nugget: T,
}

impl<T: Real> GpModel<T> {
    pub fn train_size(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn input_dim(&self) -> usize {
        self.hyper.input_dim()
    }

    pub fn hyperparams(&self) -> &KernelHyperparams<T> {
        &self.hyper
    }

    /// Posterior mean and standard deviation at a query input.
    pub fn posterior(&self, query: &[T]) -> Result<(T, T), GpError> {
        gp_posterior(self, query)
    }

    /// Log marginal likelihood of the standardized training targets.
    pub fn log_marginal_likelihood(&self) -> T {
        let n = self.train_size();
        // log p(y) = -1/2 y^T alpha - sum(log L_ii) - n/2 log(2 pi)
        let mut fit = T::zero();
        for i in 0..n {
            fit += self.standardized_target(i) * self.weights[i];
        }
        let mut log_det = T::zero();
        for i in 0..n {
            log_det += self.chol[i * (i + 1) / 2 + i].ln();
        }
        -half::<T>() * fit - log_det
            - lit::<T>(n as f64) * half::<T>() * (lit::<T>(2.0) * T::PI()).ln()
    }

    fn standardized_target(&self, i: usize) -> T {
        // Reconstruct via K alpha = y_std; cheaper to cache, but n is tiny.
        let mut acc = T::zero();
        for (j, x) in self.train_inputs.iter().enumerate() {
            let k = scaled_kernel(&self.hyper, self.y_scale, &self.train_inputs[i], x);
            let k = if i == j { k + self.nugget } else { k };
            acc += k * self.weights[j];
        }
        acc
    }
}

fn scaled_kernel<T: Real>(h: &KernelHyperparams<T>, y_scale: T, a: &[T], b: &[T]) -> T {
    // Kernel on the standardized target scale.
    let mut sq = T::zero();
    for d in 0..a.len() {
        let z = (a[d] - b[d]) / h.lengthscales[d];
        sq += z * z;
    }
    (h.signal_variance / (y_scale * y_scale)) * (-half::<T>() * sq).exp()
}

/// Fits an exact GP to the dataset.
///
/// The Cholesky factorization escalates the diagonal jitter by factors of 10
/// (up to `JITTER_CAP_REL` of the signal variance) before giving up, so
/// duplicated inputs do not abort a planning step.
pub fn gp_fit<T: Real>(data: &Dataset<T>, h: &KernelHyperparams<T>) -> Result<GpModel<T>, GpError> {
    h.validate()?;
    let dim = data.validate()?;
    if dim != h.input_dim() {
        return Err(GpError::DimensionMismatch { expected: h.input_dim(), got: dim });
    }
    let n = data.len();

    let y_mean = data.targets.iter().fold(T::zero(), |a, &b| a + b) / lit::<T>(n as f64);
    let var = data
        .targets
        .iter()
        .map(|&y| (y - y_mean) * (y - y_mean))
        .fold(T::zero(), |a, b| a + b)
        / lit::<T>(n as f64);
    let y_scale = if var.sqrt() > lit::<T>(1e-12) { var.sqrt() } else { T::one() };

    let y_std: Vec<T> = data.targets.iter().map(|&y| (y - y_mean) / y_scale).collect();

    // Kernel and noise on the standardized scale.
    let scale_sq = y_scale * y_scale;
    let signal_s = h.signal_variance / scale_sq;
    let noise_s = h.noise_variance / scale_sq;
    let base_nugget = noise_s + lit::<T>(JITTER_FLOOR_REL) * signal_s;

    let mut kernel = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = scaled_kernel(h, y_scale, &data.inputs[i], &data.inputs[j]);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    let cap = lit::<T>(JITTER_CAP_REL) * signal_s;
    let mut extra = T::zero();
    let mut step = lit::<T>(JITTER_FLOOR_REL) * signal_s;
    let chol = loop {
        match cholesky_lower(&kernel, n, base_nugget + extra) {
            Some(chol) => break chol,
            None => {
                extra = if extra == T::zero() { step } else { extra * lit::<T>(10.0) };
                step = extra;
                if extra > cap {
                    return Err(GpError::NotPositiveDefinite {
                        max_jitter: (base_nugget + cap).to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
    };

    let weights = cholesky_solve(&chol, n, &y_std);
    Ok(GpModel {
        hyper: h.clone(),
        train_inputs: data.inputs.clone(),
        chol,
        weights,
        y_mean,
        y_scale,
        nugget: base_nugget + extra,
    })
}

/// Posterior mean and standard deviation at a query input. The variance is
/// clamped at zero before the square root.
pub fn gp_posterior<T: Real>(model: &GpModel<T>, query: &[T]) -> Result<(T, T), GpError> {
    if query.len() != model.input_dim() {
        return Err(GpError::DimensionMismatch { expected: model.input_dim(), got: query.len() });
    }
    let n = model.train_size();
    let mut k_star = Vec::with_capacity(n);
    for x in &model.train_inputs {
        k_star.push(scaled_kernel(&model.hyper, model.y_scale, query, x));
    }
    let mut mean_s = T::zero();
    for i in 0..n {
        mean_s += k_star[i] * model.weights[i];
    }
    // var = k(q, q) - || L^-1 k* ||^2 on the standardized scale.
    let v = forward_substitute(&model.chol, n, &k_star);
    let k_self = model.hyper.signal_variance / (model.y_scale * model.y_scale);
    let mut var = k_self;
    for value in &v {
        var -= *value * *value;
    }
    var = var.max(T::zero());
    Ok((model.y_mean + model.y_scale * mean_s, model.y_scale * var.sqrt()))
}

/// Cholesky factor of `K + nugget I` in packed lower-triangular form, or
/// `None` if the matrix is not positive definite.
fn cholesky_lower<T: Real>(kernel: &[T], n: usize, nugget: T) -> Option<Vec<T>> {
    let mut chol = vec![T::zero(); n * (n + 1) / 2];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = kernel[i * n + j];
            if i == j {
                sum += nugget;
            }
            for k in 0..j {
                sum -= chol[i * (i + 1) / 2 + k] * chol[j * (j + 1) / 2 + k];
            }
            if i == j {
                if !(sum > T::zero()) {
                    return None;
                }
                chol[i * (i + 1) / 2 + j] = sum.sqrt();
            } else {
                chol[i * (i + 1) / 2 + j] = sum / chol[j * (j + 1) / 2 + j];
            }
        }
    }
    Some(chol)
}

/// Solves `L z = b`.
fn forward_substitute<T: Real>(chol: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut z = vec![T::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= chol[i * (i + 1) / 2 + k] * z[k];
        }
        z[i] = sum / chol[i * (i + 1) / 2 + i];
    }
    z
}

/// Solves `L L^T x = b`.
fn cholesky_solve<T: Real>(chol: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut x = forward_substitute(chol, n, b);
    for i in (0..n).rev() {
        let mut sum = x[i];
        for k in (i + 1)..n {
            sum -= chol[k * (k + 1) / 2 + i] * x[k];
        }
        x[i] = sum / chol[i * (i + 1) / 2 + i];
    }
    x
}

/// Fits hyperparameters by bounded multi-start coordinate search on the log
/// marginal likelihood, then fits the returned model with them.
///
/// Intended for offline studies; the planner's per-step fits use fixed
/// window-scaled hyperparameters instead.
pub fn fit_ml2<T: Real>(
    data: &Dataset<T>,
    initial: &KernelHyperparams<T>,
) -> Result<GpModel<T>, GpError> {
    initial.validate()?;
    data.validate()?;
    let dim = initial.input_dim();

    let score = |h: &KernelHyperparams<T>| -> Option<T> {
        gp_fit(data, h).ok().map(|m| m.log_marginal_likelihood())
    };

    let mut best_h = initial.clone();
    let mut best_score = score(&best_h).ok_or_else(|| GpError::InvalidHyperparams(
        "initial hyperparameters do not admit a fit".into(),
    ))?;

    // Multi-start: scale all parameters jointly, then refine coordinates in
    // log space with a shrinking multiplicative step.
    for start_scale in [0.5f64, 1.0, 2.0] {
        let mut h = initial.clone();
        h.signal_variance = h.signal_variance * lit::<T>(start_scale);
        for l in &mut h.lengthscales {
            *l = *l * lit::<T>(start_scale);
        }
        let Some(mut current) = score(&h) else { continue };
        let mut step = 0.5f64; // log-space step
        for _ in 0..30 {
            let mut improved = false;
            for param in 0..=dim {
                for direction in [step, -step] {
                    let mut trial = h.clone();
                    let factor = lit::<T>(direction.exp());
                    if param == 0 {
                        trial.signal_variance = trial.signal_variance * factor;
                    } else {
                        trial.lengthscales[param - 1] = trial.lengthscales[param - 1] * factor;
                    }
                    if trial.validate().is_err() {
                        continue;
                    }
                    if let Some(s) = score(&trial) {
                        if s > current {
                            current = s;
                            h = trial;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-3 {
                    break;
                }
            }
        }
        if current > best_score {
            best_score = current;
            best_h = h;
        }
    }
    gp_fit(data, &best_h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper1(l: f64) -> KernelHyperparams<f64> {
        KernelHyperparams::new(1.0, vec![l], 0.0).unwrap()
    }

    #[test]
    fn kernel_at_zero_distance_is_signal_variance() {
        let h = KernelHyperparams::new(2.5, vec![0.3, 0.7], 0.0).unwrap();
        let u = [0.4, -0.2];
        assert_eq!(kernel_se_ard(&u, &u, &h).unwrap(), 2.5);
    }

    #[test]
    fn kernel_unit_case() {
        // exp(-0.5) for unit signal, unit lengthscale, unit separation.
        let k = kernel_se_ard(&[0.0], &[1.0], &hyper1(1.0)).unwrap();
        assert!((k - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        assert!(matches!(
            kernel_se_ard(&[0.0, 1.0], &[0.0], &hyper1(1.0)),
            Err(GpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_point_interpolation() {
        let mut data = Dataset::new();
        data.push(vec![0.3], 4.2);
        let model = gp_fit(&data, &hyper1(0.5)).unwrap();
        let (mean, std) = model.posterior(&[0.3]).unwrap();
        assert!((mean - 4.2).abs() < 1e-9);
        assert!(std <= 1e-6 * 1.0f64.sqrt());
    }

    #[test]
    fn duplicated_inputs_survive_via_jitter() {
        let mut data = Dataset::new();
        data.push(vec![0.5, 0.5], 1.0);
        data.push(vec![0.5, 0.5], 1.0);
        data.push(vec![0.5, 0.5], 1.0);
        let h = KernelHyperparams::new(1.0f64, vec![0.3, 0.3], 0.0).unwrap();
        let model = gp_fit(&data, &h).unwrap();
        let (mean, _) = model.posterior(&[0.5, 0.5]).unwrap();
        assert!((mean - 1.0).abs() < 1e-6);
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let mut data = Dataset::new();
        data.push(vec![0.0], 2.0);
        data.push(vec![0.1], 4.0);
        let h = KernelHyperparams::new(3.0f64, vec![0.05], 1e-8).unwrap();
        let model = gp_fit(&data, &h).unwrap();
        let (mean, std) = model.posterior(&[100.0]).unwrap();
        // Mean reverts to the target offset, std to the prior scale.
        assert!((mean - 3.0).abs() < 1e-9);
        assert!((std - 3.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn interpolates_noise_free_training_points() {
        let mut data = Dataset::new();
        let f = |x: f64, y: f64| (3.0 * x).sin() + 0.5 * y;
        for i in 0..10 {
            let x = 0.1 * i as f64;
            let y = 0.07 * (i as f64) - 0.3;
            data.push(vec![x, y], f(x, y));
        }
        let h = KernelHyperparams::new(1.0, vec![0.3, 0.3], 0.0).unwrap();
        let model = gp_fit(&data, &h).unwrap();
        for (input, &target) in data.inputs.iter().zip(&data.targets) {
            let (mean, std) = model.posterior(input).unwrap();
            assert!((mean - target).abs() < 1e-5, "mean {mean} vs {target}");
            assert!(std <= 1e-6, "std {std}");
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let data: Dataset<f64> = Dataset::new();
        assert!(matches!(gp_fit(&data, &hyper1(1.0)), Err(GpError::EmptyDataset)));
    }

    #[test]
    fn posterior_dimension_mismatch() {
        let mut data = Dataset::new();
        data.push(vec![0.0], 0.0);
        let model = gp_fit(&data, &hyper1(1.0)).unwrap();
        assert!(matches!(
            model.posterior(&[0.0, 0.0]),
            Err(GpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fit_is_deterministic() {
        let mut data = Dataset::new();
        for i in 0..7 {
            data.push(vec![0.13 * i as f64, (i as f64).cos()], (i as f64).sin());
        }
        let h = KernelHyperparams::new(2.0, vec![0.4, 0.6], 1e-8).unwrap();
        let a = gp_fit(&data, &h).unwrap();
        let b = gp_fit(&data, &h).unwrap();
        assert_eq!(a.posterior(&[0.2, 0.5]).unwrap(), b.posterior(&[0.2, 0.5]).unwrap());
    }

    #[test]
    fn ml2_does_not_reduce_likelihood() {
        let mut data = Dataset::new();
        for i in 0..12 {
            let x = i as f64 / 11.0;
            data.push(vec![x], (6.0 * x).sin());
        }
        let initial = KernelHyperparams::new(1.0, vec![0.5], 1e-8).unwrap();
        let fixed = gp_fit(&data, &initial).unwrap();
        let tuned = fit_ml2(&data, &initial).unwrap();
        assert!(tuned.log_marginal_likelihood() >= fixed.log_marginal_likelihood() - 1e-9);
    }
}
