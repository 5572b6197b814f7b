use rand::Rng;
use serde::{Deserialize, Serialize};

use super::likelihood::{ForwardMap, ForwardOutput, ObservationSet};
use super::proposal::{accept, empirical_cov, pcn_propose, AdaptivePcn, EmpiricalCovariance};
use super::PriorSpec;
use crate::heat::{FluxRing, HeatState};
use crate::{Error, Result};

/// Prior draws tried when the initial guess is inadmissible.
const MAX_INIT_DRAWS: usize = 10_000;
const BETA_MIN: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalConfig {
    /// Initial step scalar for both phases, in (0, 1].
    pub beta: f64,
    /// Iterations using plain pCN before switching to the adaptive proposal.
    pub n_warm: usize,
    pub n_total: usize,
    /// Empirical covariance refresh period.
    pub k0: usize,
    pub target_accept: (f64, f64),
    /// Robbins-Monro tuning of beta toward the middle of `target_accept`.
    pub auto_tune: bool,
    /// Fraction of each phase's iterations spent tuning beta.
    pub tune_fraction: f64,
    /// Covariance jitter as a multiple of `trace(B) / p`.
    pub jitter_scale: f64,
    /// Store the end-of-window field of every `field_thin`-th sample.
    pub field_thin: usize,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            n_warm: 0,
            n_total: 10_000,
            k0: 2_500,
            target_accept: (0.30, 0.40),
            auto_tune: true,
            tune_fraction: 0.2,
            jitter_scale: 1e-8,
            field_thin: 10,
        }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta = {} must lie in (0, 1]", self.beta));
        }
        if self.n_warm > self.n_total {
            return bad(format!(
                "n_warm = {} exceeds n_total = {}",
                self.n_warm, self.n_total
            ));
        }
        if self.n_total == 0 {
            return bad("n_total must be positive".into());
        }
        if self.k0 == 0 {
            return bad("k0 must be at least 1".into());
        }
        let (lo, hi) = self.target_accept;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return bad(format!("target acceptance band ({lo}, {hi}) is invalid"));
        }
        if !(0.0..=1.0).contains(&self.tune_fraction) {
            return bad(format!(
                "tune_fraction = {} must lie in [0, 1]",
                self.tune_fraction
            ));
        }
        if !(self.jitter_scale >= 0.0 && self.jitter_scale.is_finite()) {
            return bad("jitter_scale must be nonnegative".into());
        }
        if self.field_thin == 0 {
            return bad("field_thin must be at least 1".into());
        }
        Ok(())
    }

    fn target(&self) -> f64 {
        0.5 * (self.target_accept.0 + self.target_accept.1)
    }

    fn tune_len(&self, phase_len: usize) -> usize {
        if self.auto_tune {
            (self.tune_fraction * phase_len as f64).ceil() as usize
        } else {
            0
        }
    }
}

/// Current chain position together with everything derived from it.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub xi: Vec<f64>,
    pub potential: f64,
    pub output: ForwardOutput,
}

/// All iterates of one chain.
#[derive(Clone, Debug, Default)]
pub struct PosteriorEnsemble {
    /// State after every iteration (repeats on rejection).
    pub samples: Vec<Vec<f64>>,
    pub potentials: Vec<f64>,
    pub accepted: Vec<bool>,
    /// Flux ring of the state after every iteration; empty when the forward map has none.
    pub flux_rings: Vec<FluxRing>,
    /// `(iteration, field)` for every `field_thin`-th iteration.
    pub fields: Vec<(usize, HeatState)>,
    pub accept_count: usize,
    /// Frozen step scalars of the pCN and adaptive phases.
    pub beta_pcn: Option<f64>,
    pub beta_adaptive: Option<f64>,
    /// First iteration after all tuning stopped.
    pub tuned_until: usize,
}

impl PosteriorEnsemble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.accept_count as f64 / self.samples.len() as f64
        }
    }

    /// Acceptance over the iterations after beta was frozen.
    pub fn frozen_acceptance_rate(&self) -> f64 {
        let tail = &self.accepted[self.tuned_until.min(self.accepted.len())..];
        if tail.is_empty() {
            return self.acceptance_rate();
        }
        tail.iter().filter(|&&a| a).count() as f64 / tail.len() as f64
    }

    /// Index of the first sample kept after discarding `fraction` as burn-in.
    pub fn burn_in_start(&self, fraction: f64) -> usize {
        ((fraction * self.samples.len() as f64).floor() as usize).min(self.samples.len().saturating_sub(1))
    }

    pub fn retained(&self, burn_in: f64) -> &[Vec<f64>] {
        &self.samples[self.burn_in_start(burn_in)..]
    }

    pub fn retained_rings(&self, burn_in: f64) -> &[FluxRing] {
        if self.flux_rings.is_empty() {
            return &[];
        }
        &self.flux_rings[self.burn_in_start(burn_in)..]
    }

    pub fn retained_fields(&self, burn_in: f64) -> impl Iterator<Item = &HeatState> {
        let start = self.burn_in_start(burn_in);
        self.fields
            .iter()
            .filter(move |(i, _)| *i >= start)
            .map(|(_, f)| f)
    }

    pub fn mean(&self, burn_in: f64) -> Vec<f64> {
        let kept = self.retained(burn_in);
        let mut m = vec![0.0; self.dim()];
        for s in kept {
            for (a, v) in m.iter_mut().zip(s) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= kept.len() as f64);
        m
    }

    /// Per-component sample standard deviation (divisor n - 1).
    pub fn std(&self, burn_in: f64) -> Vec<f64> {
        let kept = self.retained(burn_in);
        let mean = self.mean(burn_in);
        if kept.len() < 2 {
            return vec![0.0; mean.len()];
        }
        let mut v = vec![0.0; mean.len()];
        for s in kept {
            for ((a, x), m) in v.iter_mut().zip(s).zip(&mean) {
                *a += (x - m) * (x - m);
            }
        }
        v.iter().map(|a| (a / (kept.len() - 1) as f64).sqrt()).collect()
    }
}

enum Proposal {
    Pcn,
    Adaptive(AdaptivePcn),
}

struct Tuner {
    log_beta: f64,
    steps: usize,
}

impl Tuner {
    fn new(beta: f64) -> Self {
        Self {
            log_beta: beta.ln(),
            steps: 0,
        }
    }

    fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    fn update(&mut self, accepted: bool, target: f64) {
        self.steps += 1;
        let gain = 1.0 / (self.steps as f64).powf(0.6);
        let a = if accepted { 1.0 } else { 0.0 };
        self.log_beta = (self.log_beta + gain * (a - target)).clamp(BETA_MIN.ln(), 0.0);
    }
}

fn initial_state<F, R>(
    initial_xi: &[f64],
    obs: &ObservationSet,
    prior: &PriorSpec,
    forward: &F,
    rng: &mut R,
) -> Result<ChainState>
where
    F: ForwardMap + ?Sized,
    R: Rng + ?Sized,
{
    let wrap = |source| Error::ChainAborted {
        iteration: 0,
        source: Box::new(source),
    };
    let mut xi = initial_xi.to_vec();
    for _ in 0..MAX_INIT_DRAWS {
        if let Some(output) = forward.evaluate(&xi).map_err(wrap)? {
            let potential = obs.potential(&output.predictions).map_err(wrap)?;
            return Ok(ChainState {
                xi,
                potential,
                output,
            });
        }
        xi = prior.sample(rng);
    }
    Err(wrap(Error::InvalidParameter(format!(
        "no admissible starting point in {MAX_INIT_DRAWS} prior draws"
    ))))
}

/// Runs `cfg.n_total` Metropolis iterations.
///
/// Iterations `0..n_warm` propose with pCN. From `n_warm` on the adaptive
/// proposal is used with a covariance estimated from every sample so far,
/// re-estimated whenever the iteration count is a multiple of `k0`. With
/// `auto_tune`, beta is Robbins-Monro adjusted toward the middle of the
/// target band during the first `tune_fraction` of each phase and then frozen.
///
/// An inadmissible `initial_xi` is replaced by the first admissible prior draw.
pub fn run_chain<F, R>(
    initial_xi: &[f64],
    obs: &ObservationSet,
    prior: &PriorSpec,
    cfg: &ProposalConfig,
    forward: &F,
    rng: &mut R,
) -> Result<PosteriorEnsemble>
where
    F: ForwardMap + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if initial_xi.len() != prior.dim() {
        return Err(Error::InvalidParameter(format!(
            "initial state has {} components, prior has {}",
            initial_xi.len(),
            prior.dim()
        )));
    }
    let p = prior.dim();
    let jitter = cfg.jitter_scale * prior.trace() / p as f64;
    let target = cfg.target();
    let warm_tune = cfg.tune_len(cfg.n_warm);
    let adapt_tune = cfg.tune_len(cfg.n_total - cfg.n_warm);

    let mut state = initial_state(initial_xi, obs, prior, forward, rng)?;
    let mut ens = PosteriorEnsemble {
        samples: Vec::with_capacity(cfg.n_total),
        potentials: Vec::with_capacity(cfg.n_total),
        accepted: Vec::with_capacity(cfg.n_total),
        tuned_until: if adapt_tune > 0 {
            cfg.n_warm + adapt_tune
        } else {
            warm_tune
        },
        ..Default::default()
    };

    let mut tuner = Tuner::new(cfg.beta);
    let mut cov = EmpiricalCovariance::from_prior(prior);
    let mut proposal = Proposal::Pcn;

    for k in 0..cfg.n_total {
        let adaptive = k >= cfg.n_warm;
        let tuning = if adaptive {
            k < cfg.n_warm + adapt_tune
        } else {
            k < warm_tune
        };
        if k == cfg.n_warm {
            if cfg.n_warm > 0 {
                ens.beta_pcn = Some(tuner.beta());
            }
            tuner = Tuner::new(cfg.beta);
            cov = empirical_cov(&ens.samples, jitter, prior);
            proposal = Proposal::Adaptive(AdaptivePcn::new(tuner.beta(), prior, &cov));
        } else if adaptive && k % cfg.k0 == 0 {
            cov = empirical_cov(&ens.samples, jitter, prior);
            proposal = Proposal::Adaptive(AdaptivePcn::new(tuner.beta(), prior, &cov));
        }

        let candidate = match &proposal {
            Proposal::Pcn => pcn_propose(&state.xi, tuner.beta(), prior, rng),
            Proposal::Adaptive(a) => a.propose(&state.xi, rng),
        };
        let abort = |source| Error::ChainAborted {
            iteration: k,
            source: Box::new(source),
        };
        let evaluated = forward.evaluate(&candidate).map_err(abort)?;
        let phi = match &evaluated {
            Some(out) => obs.potential(&out.predictions).map_err(abort)?,
            None => f64::INFINITY,
        };
        let took = accept(state.potential, phi, rng);
        if took {
            state = ChainState {
                xi: candidate,
                potential: phi,
                output: evaluated.expect("accepted proposals are admissible"),
            };
            ens.accept_count += 1;
        }

        if tuning {
            tuner.update(took, target);
            if adaptive {
                proposal = Proposal::Adaptive(AdaptivePcn::new(tuner.beta(), prior, &cov));
            }
        }

        ens.samples.push(state.xi.clone());
        ens.potentials.push(state.potential);
        ens.accepted.push(took);
        if let Some(ring) = &state.output.ring {
            ens.flux_rings.push(ring.clone());
        }
        if (k + 1) % cfg.field_thin == 0 {
            if let Some(field) = &state.output.field {
                ens.fields.push((k, field.clone()));
            }
        }
    }
    if cfg.n_warm == cfg.n_total {
        ens.beta_pcn = Some(tuner.beta());
    } else {
        ens.beta_adaptive = Some(tuner.beta());
    }
    Ok(ens)
}
