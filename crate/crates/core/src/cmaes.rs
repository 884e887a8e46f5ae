//! Covariance Matrix Adaptation Evolution Strategy with an ask/tell interface.
//!
//! Full-covariance CMA-ES with weighted recombination, cumulative step-size
//! adaptation and rank-one plus rank-μ covariance updates, using Hansen's
//! default strategy parameters. Minimisation throughout.
//!
//! Reference: N. Hansen, "The CMA Evolution Strategy: A Tutorial", 2016.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CmaError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("population size {0} is below the minimum of 2")]
    PopulationTooSmall(usize),
    #[error("initial step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),
    #[error("expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("initial mean contains a non-finite value")]
    NonFiniteMean,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Strategy parameters. Everything except `dimension`, `population_size`
/// and `initial_step_size` is derived from those three.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaConfig {
    pub dimension: usize,
    /// λ
    pub population_size: usize,
    /// μ = ⌊λ/2⌋
    pub parent_count: usize,
    /// σ₀
    pub initial_step_size: f64,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// E‖N(0, I)‖
    pub chi_n: f64,
    /// Generations between eigendecompositions of C.
    pub eigen_interval: u64,
}

impl CmaConfig {
    pub fn new(
        dimension: usize,
        population_size: usize,
        initial_step_size: f64,
    ) -> Result<Self, CmaError> {
        if dimension == 0 {
            return Err(CmaError::ZeroDimension);
        }
        if population_size < 2 {
            return Err(CmaError::PopulationTooSmall(population_size));
        }
        if !(initial_step_size > 0.0 && initial_step_size.is_finite()) {
            return Err(CmaError::InvalidStepSize(initial_step_size));
        }
        let n = dimension as f64;
        let mu = population_size / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((population_size as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff))
            .max(0.0);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        let eigen_interval = ((1.0 / (10.0 * n * (c_1 + c_mu))).floor() as u64).max(1);

        Ok(CmaConfig {
            dimension,
            population_size,
            parent_count: mu,
            initial_step_size,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            eigen_interval,
        })
    }

    /// Uses the default population size `4 + ⌊3 ln n⌋`.
    pub fn with_default_population(
        dimension: usize,
        initial_step_size: f64,
    ) -> Result<Self, CmaError> {
        let lambda = 4 + (3.0 * (dimension.max(1) as f64).ln()).floor() as usize;
        CmaConfig::new(dimension, lambda, initial_step_size)
    }
}

/// What `tell` did with a generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TellOutcome {
    Updated(GenerationStats),
    /// Every fitness was non-finite; the state is unchanged.
    Skipped,
}

/// One row of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    /// Zero-based index of the generation just told.
    pub generation: u64,
    pub best_fitness: f64,
    pub median_fitness: f64,
    pub sigma: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl GenerationStats {
    /// `generation, best_fitness, median_fitness, sigma, min_eigenvalue, max_eigenvalue`
    pub fn log_line(&self) -> String {
        format!(
            "{}, {:e}, {:e}, {:e}, {:e}, {:e}",
            self.generation,
            self.best_fitness,
            self.median_fitness,
            self.sigma,
            self.min_eigenvalue,
            self.max_eigenvalue
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSoFar {
    pub genome: Vec<f64>,
    pub fitness: f64,
}

/// The last `ask`: its candidates and their steps `B D z`.
type Asked = (Vec<Vec<f64>>, Vec<DVector<f64>>);

#[derive(Debug, Clone)]
pub struct CmaState {
    config: CmaConfig,
    mean: DVector<f64>,
    sigma: f64,
    covariance: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    generation: u64,
    evaluations: u64,
    eigen: EigenCache,
    best: Option<BestSoFar>,
    pending: Option<Asked>,
}

/// `C = B diag(eigenvalues) Bᵀ` as of generation `generation`.
#[derive(Debug, Clone)]
struct EigenCache {
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    /// √eigenvalues
    scales: DVector<f64>,
    inv_sqrt: DMatrix<f64>,
    generation: u64,
}

impl EigenCache {
    fn identity(n: usize) -> Self {
        EigenCache::from_parts(DMatrix::identity(n, n), DVector::from_element(n, 1.0), 0)
    }

    fn from_parts(basis: DMatrix<f64>, eigenvalues: DVector<f64>, generation: u64) -> Self {
        let scales = eigenvalues.map(f64::sqrt);
        let inv_scaled = DMatrix::from_fn(basis.nrows(), basis.ncols(), |i, j| {
            basis[(i, j)] / scales[j]
        });
        let inv_sqrt = &inv_scaled * basis.transpose();
        EigenCache {
            basis,
            eigenvalues,
            scales,
            inv_sqrt,
            generation,
        }
    }

    fn decompose(c: &DMatrix<f64>, generation: u64) -> Result<Self, CmaError> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(CmaError::Numerical(
                "covariance matrix has non-finite entries".into(),
            ));
        }
        let eig = SymmetricEigen::new(c.clone());
        let min = eig.eigenvalues.min();
        if min.is_nan() || min <= 0.0 {
            return Err(CmaError::Numerical(format!(
                "covariance matrix is not positive definite (min eigenvalue {min:e})"
            )));
        }
        Ok(EigenCache::from_parts(
            eig.eigenvectors,
            eig.eigenvalues,
            generation,
        ))
    }
}

impl CmaState {
    pub fn new(mean: Vec<f64>, config: CmaConfig) -> Result<Self, CmaError> {
        if mean.len() != config.dimension {
            return Err(CmaError::DimensionMismatch {
                expected: config.dimension,
                actual: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(CmaError::NonFiniteMean);
        }
        let n = config.dimension;
        Ok(CmaState {
            sigma: config.initial_step_size,
            mean: DVector::from_vec(mean),
            covariance: DMatrix::identity(n, n),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            generation: 0,
            evaluations: 0,
            eigen: EigenCache::identity(n),
            best: None,
            pending: None,
            config,
        })
    }

    pub fn config(&self) -> &CmaConfig {
        &self.config
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn path_sigma(&self) -> &[f64] {
        self.path_sigma.as_slice()
    }

    pub fn path_c(&self) -> &[f64] {
        self.path_c.as_slice()
    }

    /// Number of completed `tell` calls.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Eigenvalues of C as of the last decomposition.
    pub fn eigenvalues(&self) -> &[f64] {
        self.eigen.eigenvalues.as_slice()
    }

    /// Lowest-fitness candidate ever told, if any.
    pub fn best(&self) -> Option<&BestSoFar> {
        self.best.as_ref()
    }

    /// Samples `λ` candidates `m + σ B D z` with `z ~ N(0, I)`.
    ///
    /// The steps behind the candidates are remembered, so a `tell` with the
    /// same candidates updates from the exact steps rather than from
    /// `(x - m) / σ`.
    pub fn ask<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<Vec<f64>>, CmaError> {
        let n = self.config.dimension;
        if !self.sigma.is_finite() || self.mean.iter().any(|v| !v.is_finite()) {
            return Err(CmaError::Numerical("state is not finite".into()));
        }
        let lambda = self.config.population_size;
        let mut out = Vec::with_capacity(lambda);
        let mut steps = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::from_fn(n, |i, _| {
                let u: f64 = rng.sample(StandardNormal);
                u * self.eigen.scales[i]
            });
            let y = &self.eigen.basis * z;
            out.push(
                self.mean
                    .iter()
                    .zip(y.iter())
                    .map(|(m, d)| m + self.sigma * d)
                    .collect(),
            );
            steps.push(y);
        }
        self.pending = Some((out.clone(), steps));
        Ok(out)
    }

    /// Ranks `candidates` by `fitnesses` (lower is better, ties keep
    /// submission order, non-finite values rank last) and updates the
    /// search distribution.
    pub fn tell(
        &mut self,
        candidates: &[Vec<f64>],
        fitnesses: &[f64],
    ) -> Result<TellOutcome, CmaError> {
        let lambda = self.config.population_size;
        let n = self.config.dimension;
        if candidates.len() != lambda {
            return Err(CmaError::DimensionMismatch {
                expected: lambda,
                actual: candidates.len(),
            });
        }
        if fitnesses.len() != lambda {
            return Err(CmaError::DimensionMismatch {
                expected: lambda,
                actual: fitnesses.len(),
            });
        }
        if let Some(bad) = candidates.iter().find(|c| c.len() != n) {
            return Err(CmaError::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        if fitnesses.iter().all(|f| !f.is_finite()) {
            log::warn!(
                "generation {}: every fitness is non-finite, skipping update",
                self.generation
            );
            return Ok(TellOutcome::Skipped);
        }

        let fit: Vec<f64> = fitnesses
            .iter()
            .map(|&f| if f.is_finite() { f } else { f64::INFINITY })
            .collect();
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]));

        let best_idx = order[0];
        if self.best.as_ref().is_none_or(|b| fit[best_idx] < b.fitness) {
            self.best = Some(BestSoFar {
                genome: candidates[best_idx].clone(),
                fitness: fit[best_idx],
            });
        }
        let median_fitness = if lambda % 2 == 1 {
            fit[order[lambda / 2]]
        } else {
            0.5 * (fit[order[lambda / 2 - 1]] + fit[order[lambda / 2]])
        };

        let pending = self.pending.take();
        let cfg = &self.config;
        let steps: Vec<DVector<f64>> = match pending {
            Some((asked, steps)) if asked == candidates => order[..cfg.parent_count]
                .iter()
                .map(|&k| steps[k].clone())
                .collect(),
            _ => order[..cfg.parent_count]
                .iter()
                .map(|&k| {
                    DVector::from_iterator(
                        n,
                        candidates[k]
                            .iter()
                            .zip(self.mean.iter())
                            .map(|(x, m)| (x - m) / self.sigma),
                    )
                })
                .collect(),
        };

        let mut y_w = DVector::zeros(n);
        for (w, step) in cfg.weights.iter().zip(&steps) {
            y_w.axpy(*w, step, 1.0);
        }
        let new_mean = &self.mean + &y_w * self.sigma;

        let cs = cfg.c_sigma;
        self.path_sigma = &self.path_sigma * (1.0 - cs)
            + (&self.eigen.inv_sqrt * &y_w) * (cs * (2.0 - cs) * cfg.mu_eff).sqrt();
        let ps_norm = self.path_sigma.norm();
        let gen = (self.generation + 1) as f64;
        let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * gen)).sqrt() / cfg.chi_n
            < 1.4 + 2.0 / (n as f64 + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };

        let cc = cfg.c_c;
        self.path_c =
            &self.path_c * (1.0 - cc) + &y_w * (h * (cc * (2.0 - cc) * cfg.mu_eff).sqrt());

        // Rank-μ term as Y Yᵀ with Y's columns scaled by √w.
        let y = DMatrix::from_fn(n, cfg.parent_count, |i, j| {
            steps[j][i] * cfg.weights[j].sqrt()
        });
        let decay = 1.0 - cfg.c_1 - cfg.c_mu + (1.0 - h) * cfg.c_1 * cc * (2.0 - cc);
        let mut c = &self.covariance * decay;
        c.ger(cfg.c_1, &self.path_c, &self.path_c, 1.0);
        c.gemm(cfg.c_mu, &y, &y.transpose(), 1.0);
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = avg;
                c[(j, i)] = avg;
            }
        }
        self.covariance = c;

        let exponent = ((cs / cfg.d_sigma) * (ps_norm / cfg.chi_n - 1.0)).min(1.0);
        self.sigma *= exponent.exp();
        self.mean = new_mean;
        self.generation += 1;
        self.evaluations += lambda as u64;

        if self.generation - self.eigen.generation >= cfg.eigen_interval {
            self.eigen = EigenCache::decompose(&self.covariance, self.generation)?;
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(CmaError::Numerical(format!(
                "step size degenerated to {}",
                self.sigma
            )));
        }

        Ok(TellOutcome::Updated(GenerationStats {
            generation: self.generation - 1,
            best_fitness: self.best.as_ref().map_or(f64::INFINITY, |b| b.fitness),
            median_fitness,
            sigma: self.sigma,
            min_eigenvalue: self.eigen.eigenvalues.min(),
            max_eigenvalue: self.eigen.eigenvalues.max(),
        }))
    }

    pub fn snapshot(&self) -> CmaSnapshot {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        CmaSnapshot {
            dimension: self.config.dimension,
            population_size: self.config.population_size,
            initial_step_size: self.config.initial_step_size,
            mean: self.mean.as_slice().to_vec(),
            sigma: self.sigma,
            covariance: rows(&self.covariance),
            path_sigma: self.path_sigma.as_slice().to_vec(),
            path_c: self.path_c.as_slice().to_vec(),
            eigenvectors: rows(&self.eigen.basis),
            eigenvalues: self.eigen.eigenvalues.as_slice().to_vec(),
            eigen_generation: self.eigen.generation,
            generation: self.generation,
            evaluations: self.evaluations,
            best: self.best.clone(),
        }
    }

    pub fn restore(snapshot: &CmaSnapshot) -> Result<Self, CmaError> {
        let config = CmaConfig::new(
            snapshot.dimension,
            snapshot.population_size,
            snapshot.initial_step_size,
        )?;
        let n = config.dimension;
        let check = |len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(CmaError::DimensionMismatch {
                    expected: n,
                    actual: len,
                })
            }
        };
        check(snapshot.mean.len())?;
        check(snapshot.path_sigma.len())?;
        check(snapshot.path_c.len())?;
        check(snapshot.eigenvalues.len())?;
        let matrix = |rows: &[Vec<f64>]| -> Result<DMatrix<f64>, CmaError> {
            check(rows.len())?;
            for r in rows {
                check(r.len())?;
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        };
        Ok(CmaState {
            mean: DVector::from_vec(snapshot.mean.clone()),
            sigma: snapshot.sigma,
            covariance: matrix(&snapshot.covariance)?,
            path_sigma: DVector::from_vec(snapshot.path_sigma.clone()),
            path_c: DVector::from_vec(snapshot.path_c.clone()),
            generation: snapshot.generation,
            evaluations: snapshot.evaluations,
            eigen: EigenCache::from_parts(
                matrix(&snapshot.eigenvectors)?,
                DVector::from_vec(snapshot.eigenvalues.clone()),
                snapshot.eigen_generation,
            ),
            best: snapshot.best.clone(),
            pending: None,
            config,
        })
    }
}

/// Serialisable CMA-ES state. Matrices are stored row-major; restoring a
/// snapshot reproduces the state exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaSnapshot {
    pub dimension: usize,
    pub population_size: usize,
    pub initial_step_size: f64,
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub covariance: Vec<Vec<f64>>,
    pub path_sigma: Vec<f64>,
    pub path_c: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub eigen_generation: u64,
    pub generation: u64,
    pub evaluations: u64,
    pub best: Option<BestSoFar>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn init_is_identity() {
        let s = CmaState::new(vec![0.0, 0.0], CmaConfig::new(2, 6, 1.0).unwrap()).unwrap();
        assert_eq!(s.covariance(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(s.path_sigma(), &[0.0, 0.0]);
        assert_eq!(s.path_c(), &[0.0, 0.0]);
        assert_eq!(s.generation(), 0);
        assert!(s.best().is_none());
    }

    #[test]
    fn full_scale_init() {
        let s = CmaState::new(vec![0.0; 130], CmaConfig::new(130, 128, 1.0).unwrap()).unwrap();
        assert!(s.eigenvalues().iter().all(|&e| e == 1.0));
        assert_eq!(s.config().parent_count, 64);
    }

    #[test]
    fn config_errors() {
        assert_eq!(
            CmaConfig::new(2, 6, 0.0),
            Err(CmaError::InvalidStepSize(0.0))
        );
        assert_eq!(
            CmaConfig::new(2, 1, 1.0),
            Err(CmaError::PopulationTooSmall(1))
        );
        assert_eq!(CmaConfig::new(0, 4, 1.0), Err(CmaError::ZeroDimension));
        assert!(matches!(
            CmaState::new(vec![0.0; 3], CmaConfig::new(2, 4, 1.0).unwrap()),
            Err(CmaError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn default_parameters_are_consistent() {
        for (n, lambda) in [(1, 2), (2, 6), (10, 10), (130, 128), (1300, 128)] {
            let c = CmaConfig::new(n, lambda, 1.0).unwrap();
            assert!(c.parent_count < c.population_size);
            assert!((c.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(c.weights.iter().all(|&w| w > 0.0));
            assert!(c.weights.windows(2).all(|w| w[0] > w[1]));
            assert!(c.c_1 + c.c_mu <= 1.0);
            assert!(c.c_sigma > 0.0 && c.c_sigma <= 1.0);
            assert!(c.c_c > 0.0 && c.c_c <= 1.0);
            assert!(c.eigen_interval >= 1);
        }
    }

    #[test]
    fn ask_returns_population() {
        let mut s = CmaState::new(vec![0.0; 130], CmaConfig::new(130, 128, 1.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pop = s.ask(&mut rng).unwrap();
        assert_eq!(pop.len(), 128);
        assert!(pop.iter().all(|c| c.len() == 130));
    }

    #[test]
    fn tiny_sigma_collapses_samples() {
        let mean = vec![0.3, -2.0, 5.0];
        let mut s = CmaState::new(mean.clone(), CmaConfig::new(3, 8, 1e-12).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for c in s.ask(&mut rng).unwrap() {
            for (a, b) in c.iter().zip(&mean) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ask_is_deterministic() {
        let mut s = CmaState::new(vec![1.0; 5], CmaConfig::new(5, 7, 0.5).unwrap()).unwrap();
        let a = s.ask(&mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = s.ask(&mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_covariance_follows_c() {
        // C = diag(4, 1) via a restored state with that eigendecomposition
        let mut snap = CmaState::new(vec![0.0, 0.0], CmaConfig::new(2, 2, 1.0).unwrap())
            .unwrap()
            .snapshot();
        snap.covariance = vec![vec![4.0, 0.0], vec![0.0, 1.0]];
        snap.eigenvalues = vec![4.0, 1.0];
        let mut s = CmaState::restore(&snap).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        let mut count = 0.0;
        while count < 1e5 {
            for c in s.ask(&mut rng).unwrap() {
                sxx += c[0] * c[0];
                syy += c[1] * c[1];
                sxy += c[0] * c[1];
                count += 1.0;
            }
        }
        assert!((sxx / count - 4.0).abs() < 0.05 * 4.0);
        assert!((syy / count - 1.0).abs() < 0.05);
        // off-diagonal is zero; 5% of the diagonal scale
        assert!((sxy / count).abs() < 0.05 * 2.0);
    }

    #[test]
    fn tell_errors() {
        let mut s = CmaState::new(vec![0.0; 2], CmaConfig::new(2, 4, 1.0).unwrap()).unwrap();
        let pop = s.ask(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(matches!(
            s.tell(&pop, &[1.0, 2.0]),
            Err(CmaError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            s.tell(&pop[..3], &[1.0, 2.0, 3.0]),
            Err(CmaError::DimensionMismatch { .. })
        ));
        let outcome = s.tell(&pop, &[f64::NAN; 4]).unwrap();
        assert_eq!(outcome, TellOutcome::Skipped);
        assert_eq!(s.generation(), 0);
    }

    #[test]
    fn non_finite_ranks_last() {
        let mut s = CmaState::new(vec![0.0; 2], CmaConfig::new(2, 4, 1.0).unwrap()).unwrap();
        let pop = vec![
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![3.0, 0.0],
            vec![4.0, 0.0],
        ];
        s.tell(&pop, &[f64::NAN, 2.0, 1.0, f64::INFINITY]).unwrap();
        assert_eq!(s.best().unwrap().genome, vec![3.0, 0.0]);
        let w = &s.config().weights;
        let expect = w[0] * 3.0 + w[1] * 2.0;
        assert!((s.mean()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn equal_fitness_keeps_submission_order() {
        let mut s = CmaState::new(vec![0.0; 2], CmaConfig::new(2, 6, 1.0).unwrap()).unwrap();
        let pop: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, -(i as f64)]).collect();
        s.tell(&pop, &[0.5; 6]).unwrap();
        let w = &s.config().weights;
        let expect: f64 = (0..3).map(|i| w[i] * i as f64).sum();
        assert_eq!(s.mean()[0], expect);
        assert_eq!(s.best().unwrap().genome, pop[0]);
    }

    #[test]
    fn best_after_one_tell() {
        let mut s = CmaState::new(vec![0.0], CmaConfig::new(1, 3, 1.0).unwrap()).unwrap();
        let pop = vec![vec![3.0], vec![1.0], vec![2.0]];
        s.tell(&pop, &[3.0, 1.0, 2.0]).unwrap();
        let best = s.best().unwrap();
        assert_eq!(best.fitness, 1.0);
        assert_eq!(best.genome, vec![1.0]);
    }

    #[test]
    fn sphere_converges_and_best_is_monotone() {
        let config = CmaConfig::new(10, 10, 1.0).unwrap();
        let mut s = CmaState::new(vec![3.0; 10], config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut last = f64::INFINITY;
        while s.evaluations() < 6000 {
            let pop = s.ask(&mut rng).unwrap();
            let fit: Vec<f64> = pop.iter().map(|x| sphere(x)).collect();
            s.tell(&pop, &fit).unwrap();
            let b = s.best().unwrap().fitness;
            assert!(b <= last);
            last = b;
            let sym = s.covariance() - s.covariance().transpose();
            assert!(sym.amax() < 1e-10);
            assert!(s.eigenvalues().iter().all(|&e| e > 0.0));
        }
        assert!(last < 1e-10, "best {last}");
    }

    #[test]
    fn snapshot_round_trip_continues_identically() {
        let config = CmaConfig::new(4, 8, 0.7).unwrap();
        let mut a = CmaState::new(vec![1.0, -1.0, 2.0, 0.5], config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let pop = a.ask(&mut rng).unwrap();
            let fit: Vec<f64> = pop.iter().map(|x| sphere(x)).collect();
            a.tell(&pop, &fit).unwrap();
        }
        let json = serde_json::to_string(&a.snapshot()).unwrap();
        let mut b = CmaState::restore(&serde_json::from_str(&json).unwrap()).unwrap();
        for _ in 0..5 {
            let mut rng_a = rng.clone();
            let pa = a.ask(&mut rng_a).unwrap();
            let pb = b.ask(&mut rng).unwrap();
            assert_eq!(pa, pb);
            let fit: Vec<f64> = pa.iter().map(|x| sphere(x)).collect();
            a.tell(&pa, &fit).unwrap();
            b.tell(&pb, &fit).unwrap();
        }
        assert_eq!(a.snapshot(), b.snapshot());
    }

    #[test]
    fn log_line_format() {
        let stats = GenerationStats {
            generation: 3,
            best_fitness: 0.25,
            median_fitness: 0.5,
            sigma: 1.0,
            min_eigenvalue: 0.5,
            max_eigenvalue: 2.0,
        };
        assert_eq!(stats.log_line(), "3, 2.5e-1, 5e-1, 1e0, 5e-1, 2e0");
    }
}
