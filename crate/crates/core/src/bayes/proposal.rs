use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::PriorSpec;

/// Eigenvalue floor for `I - beta^2 S` before taking its square root.
const CLIP_FLOOR: f64 = 1e-12;

/// Maps the Crank-Nicolson step size `delta` to the pCN scalar: `2 sqrt(2 delta) / (2 + delta)`.
pub fn beta_from_delta(delta: f64) -> f64 {
    2.0 * (2.0 * delta).sqrt() / (2.0 + delta)
}

fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `xi* = sqrt(1 - beta^2) xi + beta w` with `w ~ N(0, B)`.
pub fn pcn_propose<R: Rng + ?Sized>(xi: &[f64], beta: f64, prior: &PriorSpec, rng: &mut R) -> Vec<f64> {
    debug_assert_eq!(xi.len(), prior.dim());
    let z = standard_normals(rng, xi.len());
    let keep = (1.0 - beta * beta).max(0.0).sqrt();
    xi.iter()
        .zip(prior.variances())
        .zip(z)
        .map(|((x, v), z)| keep * x + beta * v.sqrt() * z)
        .collect()
}

/// Symmetric proposal covariance estimate (with diagonal jitter).
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCovariance(DMatrix<f64>);

impl EmpiricalCovariance {
    pub fn from_prior(prior: &PriorSpec) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(
            prior.variances(),
        )))
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Unbiased sample covariance plus `jitter * I`; falls back to the prior
/// covariance when fewer than two samples are available.
pub fn empirical_cov(samples: &[Vec<f64>], jitter: f64, fallback: &PriorSpec) -> EmpiricalCovariance {
    if samples.len() < 2 {
        return EmpiricalCovariance::from_prior(fallback);
    }
    let p = samples[0].len();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; p];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut c = DMatrix::<f64>::zeros(p, p);
    for s in samples {
        for a in 0..p {
            let da = s[a] - mean[a];
            for b in a..p {
                c[(a, b)] += da * (s[b] - mean[b]);
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = c[(a, b)] / (n - 1.0);
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
        c[(a, a)] += jitter;
    }
    EmpiricalCovariance(c)
}

fn spectral_sqrt(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(floor).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Adaptive pCN proposal `xi* = B^{1/2} sqrt(I - beta^2 S) B^{-1/2} xi + beta w`,
/// `S = B^{-1/2} C B^{-1/2}`, `w ~ N(0, C)`.
#[derive(Clone, Debug)]
pub struct AdaptivePcn {
    beta: f64,
    mean_map: DMatrix<f64>,
    noise_factor: DMatrix<f64>,
}

impl AdaptivePcn {
    pub fn new(beta: f64, prior: &PriorSpec, cov: &EmpiricalCovariance) -> Self {
        let p = prior.dim();
        assert_eq!(cov.dim(), p, "covariance and prior dimensions differ");
        let sd: Vec<f64> = prior.variances().iter().map(|v| v.sqrt()).collect();
        let c = cov.matrix();
        let s = DMatrix::from_fn(p, p, |i, j| c[(i, j)] / (sd[i] * sd[j]));
        let m = DMatrix::<f64>::identity(p, p) - s * (beta * beta);
        let m = (&m + m.transpose()) * 0.5;
        let root = spectral_sqrt(&m, CLIP_FLOOR);
        let mean_map = DMatrix::from_fn(p, p, |i, j| sd[i] * root[(i, j)] / sd[j]);
        let noise_factor = match c.clone().cholesky() {
            Some(ch) => ch.l(),
            None => spectral_sqrt(c, 0.0),
        };
        Self {
            beta,
            mean_map,
            noise_factor,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn propose<R: Rng + ?Sized>(&self, xi: &[f64], rng: &mut R) -> Vec<f64> {
        let p = xi.len();
        let z = DVector::from_vec(standard_normals(rng, p));
        let x = DVector::from_column_slice(xi);
        let out = &self.mean_map * x + (&self.noise_factor * z) * self.beta;
        out.as_slice().to_vec()
    }
}

pub fn apcn_propose<R: Rng + ?Sized>(
    xi: &[f64],
    beta: f64,
    prior: &PriorSpec,
    emp: &EmpiricalCovariance,
    rng: &mut R,
) -> Vec<f64> {
    AdaptivePcn::new(beta, prior, emp).propose(xi, rng)
}

/// `min(1, exp(phi_current - phi_proposed))`; zero for an inadmissible proposal.
pub fn acceptance_probability(phi_current: f64, phi_proposed: f64) -> f64 {
    if phi_proposed == f64::INFINITY || phi_proposed.is_nan() {
        return 0.0;
    }
    (phi_current - phi_proposed).exp().min(1.0)
}

/// Metropolis test on the data misfit. Always consumes one uniform draw.
pub fn accept<R: Rng + ?Sized>(phi_current: f64, phi_proposed: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u < acceptance_probability(phi_current, phi_proposed)
}
