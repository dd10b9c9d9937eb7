//! Constrained four-component Gaussian mixture output and the Bernoulli
//! voicing head.
//!
//! A channel's distribution has four free parameters: mean `mu`, standard
//! deviation `sigma`, skewness `alpha` and shape `beta`. Components sit at
//! fixed offsets `d = [-1.5, -0.5, 0.5, 1.5]` with weights
//! `softmax(alpha * d_k + 0.4 * beta * (1 - |d_k|))`. Offsets are centred on
//! the weighted mean and scaled by `sigma_c = sigma / sqrt(1 + Var_w(d))`;
//! every component has standard deviation `sigma_c`, equal to the spacing.
//! The mixture therefore has mean exactly `mu` and variance exactly
//! `sigma^2`. With these constants the density has a single maximum for
//! every `alpha, beta` in (-1, 1); at a width of 0.75 or a shape gain of 0.5
//! strongly negative `beta` splits it in two.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const OFFSETS: [f64; 4] = [-1.5, -0.5, 0.5, 1.5];
/// Component width as a fraction of the component spacing.
pub const COMPONENT_WIDTH: f64 = 1.0;
/// Gain on the shape feature `1 - |d_k|`.
pub const SHAPE_GAIN: f64 = 0.4;
pub const SIGMA_FLOOR: f64 = 1e-4;
pub const BERNOULLI_CLAMP: f64 = 1e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgmParams {
    pub mu: f64,
    pub sigma: f64,
    /// Skewness, in (-1, 1).
    pub alpha: f64,
    /// Shape, in (-1, 1).
    pub beta: f64,
}

impl CgmParams {
    pub fn new(mu: f64, sigma: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = CgmParams { mu, sigma, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.mu.is_finite() || !(self.alpha.abs() < 1.0) || !(self.beta.abs() < 1.0) {
            return Err(Error::Domain(format!("invalid mixture parameters {self:?}")));
        }
        Ok(())
    }

    pub fn mixture(&self) -> Mixture {
        Mixture::new(self)
    }
}

/// Expanded mixture: weights, component means and the shared component width.
#[derive(Debug, Clone, Copy)]
pub struct Mixture {
    pub weights: [f64; 4],
    pub means: [f64; 4],
    pub std: f64,
    mean_offset: f64,
    offset_var: f64,
    sigma_c: f64,
    /// `log w_k - log(sqrt(2 pi) s)`.
    log_coef: [f64; 4],
}

impl Mixture {
    fn new(p: &CgmParams) -> Self {
        let logits = OFFSETS.map(|d| p.alpha * d + p.beta * SHAPE_GAIN * (1.0 - d.abs()));
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e = logits.map(|l| (l - top).exp());
        let z: f64 = e.iter().sum();
        let weights = e.map(|v| v / z);
        let mean_offset: f64 = weights.iter().zip(OFFSETS).map(|(w, d)| w * d).sum();
        let offset_var: f64 = weights
            .iter()
            .zip(OFFSETS)
            .map(|(w, d)| w * (d - mean_offset).powi(2))
            .sum();
        let sigma_c = p.sigma / (COMPONENT_WIDTH * COMPONENT_WIDTH + offset_var).sqrt();
        let means = OFFSETS.map(|d| p.mu + sigma_c * (d - mean_offset));
        let std = COMPONENT_WIDTH * sigma_c;
        let base = -LN_SQRT_2PI - std.ln();
        Mixture {
            weights,
            means,
            std,
            mean_offset,
            offset_var,
            sigma_c,
            log_coef: weights.map(|w| w.ln() + base),
        }
    }

    /// Per-component `log(w_k N(x; m_k, s^2))`.
    fn log_terms(&self, x: f64) -> [f64; 4] {
        let inv = 1.0 / self.std;
        std::array::from_fn(|k| {
            let u = (x - self.means[k]) * inv;
            self.log_coef[k] - 0.5 * u * u
        })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        log_sum_exp(&self.log_terms(x))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// First and second derivatives of `log pdf` at `x`.
    fn log_pdf_derivatives(&self, x: f64) -> (f64, f64) {
        let terms = self.log_terms(x);
        let lse = log_sum_exp(&terms);
        let inv_var = 1.0 / (self.std * self.std);
        let (mut g, mut h) = (0.0, 0.0);
        for k in 0..4 {
            let r = (terms[k] - lse).exp();
            let u = -(x - self.means[k]) * inv_var;
            g += r * u;
            h += r * (u * u - inv_var);
        }
        (g, h - g * g)
    }

    fn heaviest(&self) -> usize {
        (0..4).fold(0, |best, k| if self.weights[k] > self.weights[best] { k } else { best })
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_finite(raw: &[f64]) -> Result<()> {
    if raw.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite raw output {raw:?}")))
    }
}

/// Maps four unbounded network outputs onto a valid parameter set.
pub fn squash_raw(raw: [f64; 4]) -> Result<CgmParams> {
    check_finite(&raw)?;
    Ok(CgmParams {
        mu: raw[0],
        sigma: softplus(raw[1]) + SIGMA_FLOOR,
        alpha: raw[2].tanh(),
        beta: raw[3].tanh(),
    })
}

pub fn cgm_pdf(params: &CgmParams, x: f64) -> Result<f64> {
    params.validate()?;
    Ok(params.mixture().pdf(x))
}

/// Negative log-likelihood of `x` and its gradient with respect to
/// `(mu, sigma, alpha, beta)`.
pub fn cgm_nll(params: &CgmParams, x: f64) -> Result<(f64, [f64; 4])> {
    params.validate()?;
    let mix = params.mixture();
    let terms = mix.log_terms(x);
    let lse = log_sum_exp(&terms);
    let resp = terms.map(|t| (t - lse).exp());

    let s = mix.std;
    let sc = mix.sigma_c;
    let e = mix.mean_offset;
    // d log N_k / d m_k and d log N_k / d s.
    let dm = mix.means.map(|m| (x - m) / (s * s));
    let ds = mix.means.map(|m| -1.0 / s + (x - m).powi(2) / (s * s * s));

    let d_mu: f64 = resp.iter().zip(&dm).map(|(r, g)| r * g).sum();
    // sigma scales sigma_c, hence every offset and the component width.
    let d_sigma: f64 = (0..4)
        .map(|k| resp[k] * (dm[k] * sc * (OFFSETS[k] - e) + ds[k] * COMPONENT_WIDTH * sc) / params.sigma)
        .sum();

    let shape_features = OFFSETS.map(|d| SHAPE_GAIN * (1.0 - d.abs()));
    let d_logit = |q: &[f64; 4]| -> f64 {
        let w = &mix.weights;
        let q_bar: f64 = (0..4).map(|k| w[k] * q[k]).sum();
        let cov_d: f64 = (0..4).map(|k| w[k] * (q[k] - q_bar) * OFFSETS[k]).sum();
        let cov_d2: f64 = (0..4).map(|k| w[k] * (q[k] - q_bar) * OFFSETS[k] * OFFSETS[k]).sum();
        let d_e = cov_d;
        let d_var = cov_d2 - 2.0 * e * cov_d;
        let d_sc = -0.5 * sc / (COMPONENT_WIDTH * COMPONENT_WIDTH + mix.offset_var) * d_var;
        (0..4)
            .map(|k| {
                let d_mk = d_sc * (OFFSETS[k] - e) - sc * d_e;
                resp[k] * ((q[k] - q_bar) + dm[k] * d_mk + ds[k] * COMPONENT_WIDTH * d_sc)
            })
            .sum()
    };
    let d_alpha = d_logit(&OFFSETS);
    let d_beta = d_logit(&shape_features);
    Ok((-lse, [-d_mu, -d_sigma, -d_alpha, -d_beta]))
}

/// NLL of `x` under the squashed raw outputs, with the gradient taken with
/// respect to the raw outputs.
pub fn cgm_nll_raw(raw: [f64; 4], x: f64) -> Result<(f64, [f64; 4])> {
    let p = squash_raw(raw)?;
    let (nll, g) = cgm_nll(&p, x)?;
    Ok((
        nll,
        [
            g[0],
            g[1] * sigmoid(raw[1]),
            g[2] * (1.0 - p.alpha * p.alpha),
            g[3] * (1.0 - p.beta * p.beta),
        ],
    ))
}

/// Location of the density maximum.
///
/// The density is unimodal, so the sign of the log-density slope tells on
/// which side of the mode a point lies. Newton steps on the slope are kept
/// inside a shrinking bracket, falling back to bisection, until the root is
/// pinned to `1e-9 sigma`.
pub fn cgm_mode(params: &CgmParams) -> f64 {
    let mix = params.mixture();
    let (mut a, mut b) = (params.mu - 4.0 * params.sigma, params.mu + 4.0 * params.sigma);
    let mut x = mix.means[mix.heaviest()];
    let tol = 1e-9 * params.sigma;
    for _ in 0..200 {
        let (g, h) = mix.log_pdf_derivatives(x);
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - g / h;
        let next = if h < 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let step = (next - x).abs();
        x = next;
        if step < tol || b - a < tol {
            break;
        }
    }
    x
}

fn check_temperature(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("temperature {tau} outside [0, 1]")));
    }
    Ok(())
}

/// Draws from the mixture and contracts the draw toward the mode by `tau`.
/// `tau = 1` samples the unmodified distribution, `tau = 0` returns the mode.
pub fn cgm_sample<R: Rng + ?Sized>(params: &CgmParams, tau: f64, rng: &mut R) -> Result<f64> {
    Ok(cgm_sample_traced(params, tau, rng)?.0)
}

/// [`cgm_sample`] that also reports the drawn component (`None` at `tau = 0`).
pub fn cgm_sample_traced<R: Rng + ?Sized>(params: &CgmParams, tau: f64, rng: &mut R) -> Result<(f64, Option<usize>)> {
    check_temperature(tau)?;
    params.validate()?;
    if tau == 0.0 {
        return Ok((cgm_mode(params), None));
    }
    let mix = params.mixture();
    let u: f64 = rng.gen();
    let mut k = 0;
    let mut acc = mix.weights[0];
    while u >= acc && k < 3 {
        k += 1;
        acc += mix.weights[k];
    }
    let z: f64 = rng.sample(StandardNormal);
    let x0 = mix.means[k] + mix.std * z;
    if tau == 1.0 {
        return Ok((x0, Some(k)));
    }
    let mode = cgm_mode(params);
    Ok((mode + tau * (x0 - mode), Some(k)))
}

/// Sum of per-channel NLLs for one frame; `raw` holds four values per
/// channel. The gradient with respect to `raw` is written into `grad`.
pub fn mixture_frame_nll(raw: &[f64], target: &[f64], grad: &mut [f64]) -> Result<f64> {
    if raw.len() != 4 * target.len() || grad.len() != raw.len() {
        return Err(Error::Dimension(format!(
            "mixture frame: {} raw outputs for {} channels",
            raw.len(),
            target.len()
        )));
    }
    let mut total = 0.0;
    for (ch, &x) in target.iter().enumerate() {
        let r: [f64; 4] = raw[4 * ch..4 * ch + 4].try_into().unwrap();
        let (nll, g) = cgm_nll_raw(r, x)?;
        total += nll;
        grad[4 * ch..4 * ch + 4].copy_from_slice(&g);
    }
    Ok(total)
}

/// Voicing probability from a raw logit, clamped away from 0 and 1.
pub fn squash_vuv(raw: f64) -> Result<f64> {
    check_finite(&[raw])?;
    Ok(sigmoid(raw).clamp(BERNOULLI_CLAMP, 1.0 - BERNOULLI_CLAMP))
}

fn check_target(target: f64) -> Result<()> {
    if target != 0.0 && target != 1.0 {
        return Err(Error::Domain(format!("voicing target must be 0 or 1, got {target}")));
    }
    Ok(())
}

/// Bernoulli NLL and its derivative with respect to `p`.
pub fn vuv_nll(p: f64, target: f64) -> Result<(f64, f64)> {
    check_target(target)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("voicing probability {p} outside (0, 1)")));
    }
    let nll = -(target * p.ln() + (1.0 - target) * (1.0 - p).ln());
    Ok((nll, -target / p + (1.0 - target) / (1.0 - p)))
}

/// Bernoulli NLL with the derivative taken with respect to the raw logit.
/// The derivative vanishes where the probability clamp is active.
pub fn vuv_nll_raw(raw: f64, target: f64) -> Result<(f64, f64)> {
    let p = squash_vuv(raw)?;
    let (nll, _) = vuv_nll(p, target)?;
    let s = sigmoid(raw);
    let grad = if s > BERNOULLI_CLAMP && s < 1.0 - BERNOULLI_CLAMP { s - target } else { 0.0 };
    Ok((nll, grad))
}

/// Voicing decision. `tau = 0` thresholds at 0.5; otherwise a Bernoulli draw
/// from the sharpened probability `p^(1/tau) / (p^(1/tau) + (1-p)^(1/tau))`.
pub fn vuv_sample<R: Rng + ?Sized>(p: f64, tau: f64, rng: &mut R) -> Result<f64> {
    check_temperature(tau)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("voicing probability {p} outside [0, 1]")));
    }
    if tau == 0.0 {
        return Ok(if p >= 0.5 { 1.0 } else { 0.0 });
    }
    let sharpened = if p <= 0.0 || p >= 1.0 {
        p
    } else {
        sigmoid((p.ln() - (1.0 - p).ln()) / tau)
    };
    let u: f64 = rng.gen();
    Ok(if u < sharpened { 1.0 } else { 0.0 })
}
