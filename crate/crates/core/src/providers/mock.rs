//! Deterministic offline provider.
//!
//! Output lengths follow a normal distribution clipped to `[1, max_tokens]`
//! and rounded. The normal's location is solved so that the *clipped* mean
//! equals the profile's target mean; the scale is `dispersion * target`.
//! Each request seeds its own generator from a hash of the profile seed and
//! the request, so responses are reproducible and no state is shared.

use std::collections::BTreeMap;
use std::time::Duration;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

use super::tokens::{count_tokens, tokens_for};
use super::{ChatBackend, CompletionRequest, ProviderError, RawCompletion, Usage};
use crate::domain::TemplateId;
use crate::templates::{token_cap, DEFAULT_TOKEN_CAP};

/// Standard deviation of sampled lengths as a fraction of the target mean.
pub const DEFAULT_DISPERSION: f64 = 0.15;

/// Length model of one mock provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderProfile {
    pub name: String,
    pub model: String,
    /// Target mean output tokens per known template.
    pub mean_tokens: BTreeMap<TemplateId, f64>,
    /// Target mean for templates outside the registry.
    pub unknown_mean: f64,
    #[serde(default = "default_dispersion")]
    pub dispersion: f64,
    #[serde(default)]
    pub seed: u64,
    /// Simulated per-call latency.
    #[serde(default)]
    pub latency_ms: u64,
}

fn default_dispersion() -> f64 {
    DEFAULT_DISPERSION
}

impl ProviderProfile {
    /// Means in canonical order: minimal, executive, standard, technical, verbose.
    pub fn from_means(name: &str, model: &str, means: [f64; 5], seed: u64) -> Self {
        Self {
            name: name.to_string(),
            model: model.to_string(),
            mean_tokens: TemplateId::CANONICAL.iter().cloned().zip(means).collect(),
            unknown_mean: 600.0,
            dispersion: DEFAULT_DISPERSION,
            seed,
            latency_ms: 0,
        }
    }

    /// Verbose baseline 496 tokens; 328.0 under the reference template mix.
    pub fn gemini() -> Self {
        Self::from_means("gemini", "gemini-2.0-flash-lite", [38.5, 125.1, 173.2, 307.9, 496.0], 0x6e6d)
    }

    /// Verbose baseline 498 tokens; 334.0 under the reference template mix.
    pub fn openai() -> Self {
        Self::from_means("openai", "gpt-4o-mini", [41.2, 133.8, 185.3, 329.4, 498.0], 0x0a1)
    }

    /// Verbose baseline 455 tokens; 307.0 under the reference template mix.
    pub fn anthropic() -> Self {
        Self::from_means("anthropic", "claude-3-haiku", [38.6, 125.5, 173.8, 309.0, 455.0], 0xc1a)
    }

    pub fn presets() -> Vec<Self> {
        vec![Self::gemini(), Self::openai(), Self::anthropic()]
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "gemini" => Some(Self::gemini()),
            "openai" => Some(Self::openai()),
            "anthropic" | "claude" => Some(Self::anthropic()),
            _ => None,
        }
    }

    pub fn target_mean(&self, template: &TemplateId) -> f64 {
        self.mean_tokens
            .get(template)
            .copied()
            .unwrap_or(self.unknown_mean)
    }

    /// Expected output tokens under a template mix given in canonical order.
    pub fn mixture_mean(&self, weights: &[f64; 5]) -> f64 {
        TemplateId::CANONICAL
            .iter()
            .zip(weights)
            .map(|(t, w)| w * self.target_mean(t))
            .sum()
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(self.dispersion > 0.0 && self.dispersion.is_finite()) {
            return Err(ProviderError::Config(format!(
                "profile `{}`: dispersion must be positive",
                self.name
            )));
        }
        let entries = self
            .mean_tokens
            .iter()
            .map(|(t, m)| (t.clone(), *m, token_cap(t)))
            .chain(std::iter::once((
                TemplateId::Unknown("unknown".into()),
                self.unknown_mean,
                DEFAULT_TOKEN_CAP,
            )));
        for (t, mean, cap) in entries {
            if !(mean > 1.0 && mean < f64::from(cap)) {
                return Err(ProviderError::Config(format!(
                    "profile `{}`: mean {mean} for `{t}` must lie strictly between 1 and the cap {cap}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Mean of `clamp(X, lo, hi)` for `X ~ N(mu, sigma^2)`.
pub fn censored_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let n = StdNormal::standard();
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    lo * n.cdf(a) + hi * (1.0 - n.cdf(b)) + mu * (n.cdf(b) - n.cdf(a)) + sigma * (n.pdf(a) - n.pdf(b))
}

/// Location `mu` such that [`censored_mean`] equals `target`, by bisection.
pub fn calibrate_location(target: f64, sigma: f64, lo: f64, hi: f64) -> Option<f64> {
    if !(target > lo && target < hi && sigma > 0.0) {
        return None;
    }
    let span = hi - lo + 40.0 * sigma;
    let (mut a, mut b) = (lo - span, hi + span);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if censored_mean(mid, sigma, lo, hi) < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Offline [`ChatBackend`] driven by a [`ProviderProfile`].
#[derive(Debug, Clone)]
pub struct MockProvider {
    profile: ProviderProfile,
    locations: BTreeMap<(TemplateId, u32), f64>,
}

impl MockProvider {
    pub fn new(profile: ProviderProfile) -> Result<Self, ProviderError> {
        profile.validate()?;
        let mut locations = BTreeMap::new();
        for (t, &mean) in &profile.mean_tokens {
            let cap = token_cap(t);
            let sigma = profile.dispersion * mean;
            let loc = calibrate_location(mean, sigma, 1.0, f64::from(cap)).expect("validated");
            locations.insert((t.clone(), cap), loc);
        }
        Ok(Self { profile, locations })
    }

    pub fn profile(&self) -> &ProviderProfile {
        &self.profile
    }

    /// Output length for a request; pure function of profile and request.
    pub fn sample_tokens(&self, req: &CompletionRequest) -> u32 {
        let mut rng = self.rng_for(req);
        self.draw(&req.bundle.template, req.bundle.max_tokens, &mut rng)
    }

    fn draw(&self, template: &TemplateId, cap: u32, rng: &mut ChaCha8Rng) -> u32 {
        if cap <= 1 {
            return cap;
        }
        let mean = self.profile.target_mean(template);
        let sigma = self.profile.dispersion * mean;
        let loc = self
            .locations
            .get(&(template.clone(), cap))
            .copied()
            .or_else(|| calibrate_location(mean, sigma, 1.0, f64::from(cap)))
            .unwrap_or(mean);
        let x = Normal::new(loc, sigma).expect("sigma > 0").sample(rng);
        x.round().clamp(1.0, f64::from(cap)) as u32
    }

    fn rng_for(&self, req: &CompletionRequest) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.profile.seed.to_le_bytes());
        for part in [
            self.profile.name.as_str(),
            req.model.as_str(),
            req.bundle.template.as_str(),
            req.bundle.system_prompt.as_str(),
            req.bundle.user_prompt.as_str(),
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        h.update(req.bundle.max_tokens.to_le_bytes());
        let digest = h.finalize();
        ChaCha8Rng::from_seed(digest.into())
    }
}

#[async_trait]
impl ChatBackend for MockProvider {
    fn name(&self) -> &str {
        &self.profile.name
    }

    async fn send(&self, req: &CompletionRequest) -> Result<RawCompletion, ProviderError> {
        if self.profile.latency_ms > 0 {
            tokio::time::sleep(Duration::from_millis(self.profile.latency_ms)).await;
        }
        let mut rng = self.rng_for(req);
        let n = self.draw(&req.bundle.template, req.bundle.max_tokens, &mut rng);
        let text = filler_text(n, &mut rng);
        let input = count_tokens(&req.bundle.system_prompt) + count_tokens(&req.bundle.user_prompt);
        Ok(RawCompletion {
            text,
            usage: Some(Usage {
                input_tokens: input,
                output_tokens: n,
            }),
        })
    }
}

const FILLER: &[&str] = &[
    "the", "answer", "depends", "on", "several", "factors", "which", "we", "consider",
    "carefully", "first", "observe", "that", "each", "step", "follows", "from", "previous",
    "reasoning", "example", "consider", "context", "therefore", "result", "important",
    "detail", "explanation", "because", "structure", "process", "value", "approach",
    "principle", "summary", "evidence", "finally", "general", "specific", "method", "case",
];

/// Deterministic prose whose built-in token count is exactly `n`.
pub(crate) fn filler_text(n: u32, rng: &mut impl Rng) -> String {
    let mut text = String::with_capacity(n as usize * 6);
    let (mut chars, mut words) = (0u64, 0u64);
    let mut sentence_len = 0;
    // Long words while they cannot overshoot, then single letters: each
    // adds 11/12 of a token, so the running count passes through `n`.
    loop {
        let mut word = FILLER[rng.random_range(0..FILLER.len())].to_string();
        if sentence_len == 0 {
            word[..1].make_ascii_uppercase();
        }
        sentence_len += 1;
        if sentence_len >= 12 {
            word.push('.');
            sentence_len = 0;
        }
        let sep = u64::from(words > 0);
        let next = tokens_for(chars + sep + word.len() as u64, words + 1);
        if next >= n {
            break;
        }
        if sep == 1 {
            text.push(' ');
        }
        text.push_str(&word);
        chars += sep + word.len() as u64;
        words += 1;
    }
    while tokens_for(chars, words) < n {
        let sep = u64::from(words > 0);
        if sep == 1 {
            text.push(' ');
        }
        text.push('a');
        chars += sep + 1;
        words += 1;
    }
    text
}
