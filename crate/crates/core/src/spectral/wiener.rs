use crate::error::{Error, Result};

/// Frequency response of the linear denoising filter of a diffusion reverse
/// step under a `1/f²` image power law.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerProfile {
    /// Diffusion timestep the profile belongs to, when known.
    pub timestep: Option<usize>,
    pub alpha_bar: f64,
    pub freqs: Vec<f64>,
    pub response: Vec<f64>,
}

/// `ᾱ / (ᾱ + (1 − ᾱ) f²)`.
pub fn wiener_response(alpha_bar: f64, f: f64) -> f64 {
    alpha_bar / (alpha_bar + (1.0 - alpha_bar) * f * f)
}

pub fn wiener_profile(alpha_bar: f64, freqs: &[f64]) -> Result<WienerProfile> {
    if !(alpha_bar > 0.0 && alpha_bar <= 1.0) {
        return Err(Error::invalid(format!("alpha_bar must lie in (0, 1], got {alpha_bar}")));
    }
    if let Some(f) = freqs.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
        return Err(Error::invalid(format!("frequencies must be finite and non-negative, got {f}")));
    }
    Ok(WienerProfile {
        timestep: None,
        alpha_bar,
        freqs: freqs.to_vec(),
        response: freqs.iter().map(|&f| wiener_response(alpha_bar, f)).collect(),
    })
}

/// Cumulative products `ᾱ_t = Π_{s≤t} (1 − β_s)` for a linear β schedule.
///
/// Entry `t - 1` holds `ᾱ_t`, so the returned vector has `steps` entries.
pub fn ddpm_alpha_bar_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::invalid("schedule needs at least one step"));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::invalid(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let mut acc = 1.0;
    Ok((0..steps)
        .map(|i| {
            let beta = if steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
            };
            acc *= 1.0 - beta;
            acc
        })
        .collect())
}
