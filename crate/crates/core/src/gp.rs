//! Sparse Gaussian-process surrogate: pointwise prediction, dense
//! predictive covariance, and closed-form sensitivity bounds.
//!
//! A model is a kernel plus inducing inputs Z with a Gaussian belief
//! N(u0, S) over the latent values at Z. Predictions condition on that
//! belief; the link is the identity, so the prediction eta equals the
//! posterior mean mu.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::SpatialDataset;

/// Largest point count accepted by [`GpModel::compute_sigma_matrix`]; the
/// result is a dense n-by-n matrix (8 n^2 bytes).
pub const MAX_SIGMA_POINTS: usize = 4096;

/// Supported covariance families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// exp(-0.5 * sum_i theta_i^2 (x_i - z_i)^2)
    Rbf,
    /// exp(-sum_i theta_i |x_i - z_i|)
    Exponential,
}

impl KernelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Exponential => "exponential",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(KernelFamily::Rbf),
            "exponential" => Ok(KernelFamily::Exponential),
            other => Err(Error::InvalidParameter(format!(
                "unknown kernel family {other:?} (expected \"rbf\" or \"exponential\")"
            ))),
        }
    }
}

/// A stationary kernel with per-axis inverse length scales.
///
/// `white_noise` is added on the diagonal of Gram matrices of a point list
/// against itself (including the 1x1 "list" used for a single query), never
/// to cross-covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub white_noise: f64,
}

impl KernelSpec {
    pub fn new(
        family: KernelFamily,
        length_scales: Vec<f64>,
        signal_variance: f64,
        white_noise: f64,
    ) -> Result<Self> {
        let spec = Self { family, length_scales, signal_variance, white_noise };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_scales.is_empty() {
            return Err(Error::InvalidParameter("kernel needs at least one axis".into()));
        }
        if let Some(t) = self.length_scales.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "length scales must be positive (got {t})"
            )));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "signal variance must be positive (got {})",
                self.signal_variance
            )));
        }
        if !(self.white_noise.is_finite() && self.white_noise >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "white noise must be nonnegative (got {})",
                self.white_noise
            )));
        }
        Ok(())
    }

    fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        let e = match self.family {
            KernelFamily::Rbf => {
                let mut s = 0.0;
                for ((xi, zi), t) in x.iter().zip(z).zip(&self.length_scales) {
                    let d = t * (xi - zi);
                    s += d * d;
                }
                (-0.5 * s).exp()
            }
            KernelFamily::Exponential => {
                let mut s = 0.0;
                for ((xi, zi), t) in x.iter().zip(z).zip(&self.length_scales) {
                    s += t * (xi - zi).abs();
                }
                (-s).exp()
            }
        };
        self.signal_variance * e
    }
}

/// Noise-free covariance between two points.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != spec.dim() || z.len() != spec.dim() {
        return Err(Error::InvalidParameter(format!(
            "kernel has {} axes; got points of dimension {} and {}",
            spec.dim(),
            x.len(),
            z.len()
        )));
    }
    Ok(spec.eval_unchecked(x, z))
}

/// Gram matrix of a point list against itself, with white noise on the
/// diagonal.
fn gram_self(spec: &KernelSpec, points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval_unchecked(points.row(i).transpose().as_slice(), points.row(j).transpose().as_slice());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += spec.white_noise;
    }
    k
}

/// Cross-covariance matrix between two distinct point lists (no noise).
fn gram_cross(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(a.nrows(), b.nrows());
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            k[(i, j)] = spec.eval_unchecked(
                a.row(i).transpose().as_slice(),
                b.row(j).transpose().as_slice(),
            );
        }
    }
    k
}

/// One prediction: posterior mean, variance, and the (identity-link)
/// prediction itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPrediction {
    pub mu: f64,
    pub sigma2: f64,
    pub eta: f64,
}

/// Sparse GP posterior over inducing values, ready for prediction.
///
/// Construction validates shapes and symmetry, verifies S is positive
/// definite, factorizes the inducing Gram matrix once (escalating jitter if
/// necessary), and caches the spectral quantities used by the sensitivity
/// bound. All methods are read-only afterwards.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelSpec,
    z: DMatrix<f64>,
    u0: DVector<f64>,
    s_mat: DMatrix<f64>,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    lambda1: f64,
    lambda2: f64,
    u0_norm: f64,
}

/// Factorizes `k + jitter I`, escalating jitter by tens within
/// `[base, cap]`; returns the factor and the jitter that worked.
fn cholesky_with_jitter(
    k: &DMatrix<f64>,
    start: f64,
    base: f64,
    cap: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = start.max(base);
    loop {
        let mut kj = k.clone();
        for i in 0..k.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
        if jitter > cap * (1.0 + 1e-12) {
            return Err(Error::Numerical(format!(
                "Cholesky failed even with jitter {cap:.3e}"
            )));
        }
    }
}

impl GpModel {
    /// Builds a model from row-major inducing inputs (`rho` points of the
    /// kernel's dimension), the posterior mean `u0`, and the row-major
    /// posterior covariance `s_mat` (`rho` by `rho`).
    pub fn new(
        kernel: KernelSpec,
        z_rows: Vec<f64>,
        u0: Vec<f64>,
        s_rows: Vec<f64>,
        jitter: f64,
    ) -> Result<Self> {
        kernel.validate()?;
        let d = kernel.dim();
        let rho = u0.len();
        if rho == 0 {
            return Err(Error::InvalidParameter("need at least one inducing point".into()));
        }
        if z_rows.len() != rho * d {
            return Err(Error::InvalidParameter(format!(
                "inducing inputs have {} entries; expected {rho} x {d}",
                z_rows.len()
            )));
        }
        if s_rows.len() != rho * rho {
            return Err(Error::InvalidParameter(format!(
                "posterior covariance has {} entries; expected {rho} x {rho}",
                s_rows.len()
            )));
        }
        if let Some(v) = z_rows.iter().chain(&u0).chain(&s_rows).find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite model entry {v}")));
        }
        if !(jitter.is_finite() && jitter >= 0.0) {
            return Err(Error::InvalidParameter(format!("bad jitter {jitter}")));
        }
        let z = DMatrix::from_row_slice(rho, d, &z_rows);
        let u0 = DVector::from_vec(u0);
        let s_raw = DMatrix::from_row_slice(rho, rho, &s_rows);

        let scale = s_raw.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let asym = (&s_raw - s_raw.transpose()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if asym > 1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "posterior covariance is asymmetric (relative defect {:.3e})",
                asym / scale
            )));
        }
        let s_mat = (&s_raw + s_raw.transpose()) * 0.5;
        if Cholesky::new(s_mat.clone()).is_none() {
            return Err(Error::InvalidParameter(
                "posterior covariance is not positive definite".into(),
            ));
        }

        let k = gram_self(&kernel, &z);
        let diag_mean = k.diagonal().mean();
        let base = 1e-10 * diag_mean;
        let cap = 1e-4 * diag_mean;
        let (chol, jitter_eff) = cholesky_with_jitter(&k, jitter, base, cap)?;
        let alpha = chol.solve(&u0);

        let mut k_eff = k;
        for i in 0..rho {
            k_eff[(i, i)] += jitter_eff;
        }
        let eig_k = SymmetricEigen::new(k_eff);
        let lambda1 = eig_k.eigenvalues.min();
        if !(lambda1 > 0.0) {
            return Err(Error::Numerical(format!(
                "inducing Gram matrix has nonpositive eigenvalue {lambda1:.3e}"
            )));
        }
        let eig_s = SymmetricEigen::new(s_mat.clone());
        let lambda2 = eig_s.eigenvalues.max();
        let u0_norm = u0.norm();

        Ok(Self {
            kernel,
            z,
            u0,
            s_mat,
            jitter: jitter_eff,
            chol,
            alpha,
            lambda1,
            lambda2,
            u0_norm,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn rho(&self) -> usize {
        self.u0.len()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Row-major inducing inputs.
    pub fn inducing_inputs(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn u0(&self) -> &[f64] {
        self.u0.as_slice()
    }

    pub fn s_mat(&self) -> &DMatrix<f64> {
        &self.s_mat
    }

    /// The jitter that actually made the Gram factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Smallest eigenvalue of the (jittered) inducing Gram matrix.
    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.lambda1
    }

    /// Largest eigenvalue of the posterior covariance over inducing values.
    pub fn max_s_eigenvalue(&self) -> f64 {
        self.lambda2
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "point has dimension {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite coordinate {v}")));
        }
        Ok(())
    }

    fn cross_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.rho(),
            (0..self.rho()).map(|j| {
                self.kernel
                    .eval_unchecked(x, self.z.row(j).transpose().as_slice())
            }),
        )
    }

    /// Posterior mean and variance at `x`; `eta` is the identity-link
    /// prediction, equal to `mu`.
    pub fn predict(&self, x: &[f64]) -> Result<PointPrediction> {
        self.check_point(x)?;
        let kx = self.cross_vector(x);
        let mu = kx.dot(&self.alpha);
        let kxx = self.kernel.eval_unchecked(x, x) + self.kernel.white_noise;
        let w = self.chol.solve(&kx); // K^-1 k(x)
        let sigma2 = kxx - kx.dot(&w) + (&self.s_mat * &w).dot(&w);
        if !sigma2.is_finite() {
            return Err(Error::Numerical(format!("non-finite predictive variance {sigma2}")));
        }
        Ok(PointPrediction { mu, sigma2, eta: mu })
    }

    /// Predictions at every point of a dataset.
    pub fn predict_many(&self, data: &SpatialDataset) -> Result<Vec<PointPrediction>> {
        if data.dim() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "dataset has dimension {}, model expects {}",
                data.dim(),
                self.dim()
            )));
        }
        (0..data.n()).map(|i| self.predict(data.point(i))).collect()
    }

    /// Dense predictive covariance over all points of `data`:
    /// `K_ff - K_fu K^-1 K_uf + K_fu K^-1 S K^-1 K_uf`. O(n^2) memory, so
    /// the point count is capped at [`MAX_SIGMA_POINTS`].
    pub fn compute_sigma_matrix(&self, data: &SpatialDataset) -> Result<DMatrix<f64>> {
        if data.dim() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "dataset has dimension {}, model expects {}",
                data.dim(),
                self.dim()
            )));
        }
        let n = data.n();
        if n > MAX_SIGMA_POINTS {
            return Err(Error::ResourceLimit(format!(
                "dense covariance needs {n}x{n} storage; the cap is {MAX_SIGMA_POINTS} points"
            )));
        }
        let pts = DMatrix::from_fn(n, self.dim(), |i, j| data.point(i)[j]);
        let k_ff = gram_self(&self.kernel, &pts);
        let k_fu = gram_cross(&self.kernel, &pts, &self.z);
        let w = self.chol.solve(&k_fu.transpose()); // K^-1 K_uf
        let sigma = &k_ff - &k_fu * &w + w.transpose() * &self.s_mat * &w;
        Ok((&sigma + sigma.transpose()) * 0.5)
    }

    /// Euclidean norms of the per-axis gradients of the cross-covariance
    /// vector k(x).
    fn kappa1(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut sums = vec![0.0f64; d];
        for j in 0..self.rho() {
            let zj = self.z.row(j);
            let k = self.kernel.eval_unchecked(x, zj.transpose().as_slice());
            for i in 0..d {
                let t = self.kernel.length_scales[i];
                let g = match self.kernel.family {
                    KernelFamily::Rbf => -k * t * t * (x[i] - zj[i]),
                    KernelFamily::Exponential => {
                        // Magnitude of the one-sided derivative; at the kink
                        // this is the larger of the two, so the bound holds.
                        t * k * if x[i] >= zj[i] { -1.0 } else { 1.0 }
                    }
                };
                sums[i] += g * g;
            }
        }
        sums.into_iter().map(f64::sqrt).collect()
    }

    /// Per-axis bound on the gradient of the prediction at `x`, given the
    /// link moments `|nu1(x)|` and `|nu2(x) - nu0(x)|`. For the identity
    /// link use [`GpModel::sensitivity_bound_identity`], which supplies
    /// them analytically.
    pub fn sensitivity_bound(
        &self,
        x: &[f64],
        nu1_abs: f64,
        nu2_minus_nu0_abs: f64,
    ) -> Result<Vec<f64>> {
        self.check_point(x)?;
        if !(nu1_abs.is_finite() && nu1_abs >= 0.0)
            || !(nu2_minus_nu0_abs.is_finite() && nu2_minus_nu0_abs >= 0.0)
        {
            return Err(Error::InvalidParameter(
                "link moments must be nonnegative finite".into(),
            ));
        }
        let p = self.predict(x)?;
        if p.sigma2 <= 0.0 {
            return Err(Error::Numerical(format!(
                "predictive variance {:.3e} is not positive at the query point",
                p.sigma2
            )));
        }
        let kx_norm = self.cross_vector(x).norm();
        let kappa1 = self.kappa1(x);
        // kappa2 (gradient of the prior variance) vanishes for stationary
        // kernels.
        let first = self.u0_norm * nu1_abs / (self.lambda1 * p.sigma2.sqrt());
        let second = nu2_minus_nu0_abs / (2.0 * p.sigma2)
            * (2.0 * kx_norm / self.lambda1)
            * (1.0 + self.lambda2 / self.lambda1);
        Ok(kappa1.iter().map(|k1| first * k1 + second * k1).collect())
    }

    /// Sensitivity bound with the identity link's analytic moments:
    /// `nu1 = sqrt(sigma2)` and `nu2 - nu0 = 0`, which collapses the bound
    /// to `|u0| kappa1_i / lambda1`.
    pub fn sensitivity_bound_identity(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let p = self.predict(x)?;
        if p.sigma2 <= 0.0 {
            return Err(Error::Numerical(format!(
                "predictive variance {:.3e} is not positive at the query point",
                p.sigma2
            )));
        }
        self.sensitivity_bound(x, p.sigma2.sqrt(), 0.0)
    }

    /// Per-axis bound on the prediction gradient valid at every point, for
    /// the identity link: the pointwise bound maximized analytically over
    /// x. Used to size aggregation cells ahead of time.
    pub fn global_sensitivity_bound(&self) -> Vec<f64> {
        let pair_max = match self.kernel.family {
            // |d/dt exp(-t^2/2)| peaks at t = 1 with value exp(-1/2).
            KernelFamily::Rbf => (-0.5f64).exp(),
            KernelFamily::Exponential => 1.0,
        };
        let lead = self.u0_norm * (self.rho() as f64).sqrt() * self.kernel.signal_variance
            / self.lambda1;
        self.kernel
            .length_scales
            .iter()
            .map(|t| lead * t * pair_max)
            .collect()
    }
}

/// Resamples points with probability proportional to `weights`, perturbing
/// each uniformly within a ball of the given radius. Deterministic in the
/// seed. The returned dataset carries no responses.
pub fn generate_query_points(
    data: &SpatialDataset,
    weights: &[f64],
    n_new: usize,
    radius: f64,
    seed: u64,
) -> Result<SpatialDataset> {
    let n = data.n();
    let d = data.dim();
    if weights.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} weights for {n} points",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "weights must be nonnegative (got {w})"
        )));
    }
    if n_new == 0 {
        return Err(Error::InvalidParameter("need at least one query point".into()));
    }
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::InvalidParameter(format!("bad radius {radius}")));
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut total = 0.0;
    for w in weights {
        total += w;
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("weights sum to zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss_spare: Option<f64> = None;
    let mut next_gaussian = |rng: &mut ChaCha8Rng| -> f64 {
        if let Some(v) = gauss_spare.take() {
            return v;
        }
        // Box-Muller transform.
        let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        gauss_spare = Some(r * s);
        r * c
    };
    let mut coords = Vec::with_capacity(n_new * d);
    for _ in 0..n_new {
        let u: f64 = rng.random_range(0.0..total);
        let idx = cumulative.partition_point(|c| *c <= u).min(n - 1);
        let base = data.point(idx);
        if radius == 0.0 {
            coords.extend_from_slice(base);
            continue;
        }
        match d {
            2 => {
                // Uniform in a disk: radius scales with sqrt(u).
                let r = radius * rng.random_range(0.0f64..=1.0).sqrt();
                let angle = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                coords.push(base[0] + r * angle.cos());
                coords.push(base[1] + r * angle.sin());
            }
            _ => {
                // Uniform in a d-ball: Gaussian direction, radius ~ u^(1/d).
                let dir: Vec<f64> = (0..d).map(|_| next_gaussian(&mut rng)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                let r = radius * rng.random_range(0.0f64..=1.0).powf(1.0 / d as f64);
                for i in 0..d {
                    coords.push(base[i] + r * dir[i] / norm);
                }
            }
        }
    }
    SpatialDataset::new(d, coords, None)
}

/// Exact-GP log marginal likelihood of the responses under a candidate
/// kernel whose white noise plays the role of the observation noise.
fn log_marginal_likelihood(k_noiseless: &DMatrix<f64>, noise: f64, y: &DVector<f64>) -> Result<f64> {
    let n = y.len();
    let mut k = k_noiseless.clone();
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let chol = Cholesky::new(k).ok_or_else(|| {
        Error::Numerical("training covariance is not positive definite".into())
    })?;
    let alpha = chol.solve(y);
    let logdet: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * y.dot(&alpha) - 0.5 * logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Selects the grid candidate with the highest exact-GP log marginal
/// likelihood on the dataset's responses, then packages the exact posterior
/// as a sparse model: Z is the full training set, u0 and S are the latent
/// posterior mean and covariance.
///
/// Each candidate's `white_noise` acts as the observation-noise variance
/// and must be positive (it is what keeps S positive definite); the
/// returned model's kernel carries zero white noise, so its predictions
/// reproduce the exact latent posterior. Ties keep the earliest candidate.
/// Training points should be distinct, or the posterior covariance
/// degenerates.
pub fn fit_exact_gp_grid(data: &SpatialDataset, grid: &[KernelSpec]) -> Result<GpModel> {
    let y = data
        .responses()
        .ok_or_else(|| Error::InvalidData("fitting requires responses".into()))?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty kernel grid".into()));
    }
    let n = data.n();
    let d = data.dim();
    let y = DVector::from_column_slice(y);
    let pts = DMatrix::from_fn(n, d, |i, j| data.point(i)[j]);

    let mut best: Option<(f64, usize)> = None;
    for (ci, cand) in grid.iter().enumerate() {
        cand.validate()?;
        if cand.dim() != d {
            return Err(Error::InvalidParameter(format!(
                "candidate {ci} has {} axes; data has {d}",
                cand.dim()
            )));
        }
        if !(cand.white_noise > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "candidate {ci} needs positive white noise to act as observation noise"
            )));
        }
        let noiseless = KernelSpec { white_noise: 0.0, ..cand.clone() };
        let k = gram_self(&noiseless, &pts);
        let lml = log_marginal_likelihood(&k, cand.white_noise, &y)?;
        if best.map_or(true, |(b, _)| lml > b) {
            best = Some((lml, ci));
        }
    }
    let (_, ci) = best.expect("nonempty grid");
    let winner = &grid[ci];
    let noise = winner.white_noise;
    let kernel = KernelSpec { white_noise: 0.0, ..winner.clone() };
    let k_nl = gram_self(&kernel, &pts);
    let mut k_y = k_nl.clone();
    for i in 0..n {
        k_y[(i, i)] += noise;
    }
    let chol = Cholesky::new(k_y)
        .ok_or_else(|| Error::Numerical("training covariance is not positive definite".into()))?;
    // Latent posterior: mean K (K + wI)^-1 y, covariance w K (K + wI)^-1.
    let alpha = chol.solve(&y);
    let u0 = &k_nl * &alpha;
    let s = chol.solve(&k_nl) * noise;
    let s = (&s + s.transpose()) * 0.5;
    // Rounding can push the smallest eigenvalues of the covariance a hair
    // below zero when the kernel matrix is nearly singular; floor them at a
    // level far beneath the noise so the packaged matrix stays positive
    // definite without visibly changing the posterior.
    let eig = SymmetricEigen::new(s);
    let floor = 1e-12 * noise;
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let s = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let base_jitter = 1e-10 * k_nl.diagonal().mean();
    GpModel::new(
        kernel,
        pts.transpose().as_slice().to_vec(),
        u0.as_slice().to_vec(),
        s.transpose().as_slice().to_vec(),
        base_jitter,
    )
}
