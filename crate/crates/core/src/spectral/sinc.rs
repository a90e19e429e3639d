use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Width, in cycles per sample, of the transition band between the cutoff
/// and the start of the stop band used for the ripple measurement.
pub const DEFAULT_TRANSITION_WIDTH: f64 = 0.05;

/// Frequency response of a truncated (rectangular-window) sinc low-pass kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelResponse {
    pub kernel_size: usize,
    pub cutoff: f64,
    pub taps: Vec<f64>,
    /// `|DFT|` of the zero-padded kernel; bin `i` is frequency `i / len` cycles per sample.
    pub response: Vec<f64>,
    /// Largest response in the stop band `[cutoff + transition, 0.5]`.
    pub ripple: f64,
}

impl KernelResponse {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 / self.response.len() as f64
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        // exact zeros, so kernels that differ only by zero taps respond identically
        0.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

pub fn sinc_kernel_response(kernel_size: usize, cutoff: f64, pad: usize) -> Result<KernelResponse> {
    sinc_kernel_response_with(kernel_size, cutoff, pad, DEFAULT_TRANSITION_WIDTH)
}

pub fn sinc_kernel_response_with(
    kernel_size: usize,
    cutoff: f64,
    pad: usize,
    transition: f64,
) -> Result<KernelResponse> {
    if kernel_size % 2 == 0 {
        return Err(Error::invalid(format!("kernel size must be odd, got {kernel_size}")));
    }
    if !(cutoff > 0.0 && cutoff <= 0.5) {
        return Err(Error::invalid(format!("cutoff must lie in (0, 0.5], got {cutoff}")));
    }
    if pad < kernel_size {
        return Err(Error::invalid(format!("pad {pad} shorter than kernel {kernel_size}")));
    }
    if !(transition >= 0.0 && transition.is_finite()) {
        return Err(Error::invalid("transition width must be non-negative"));
    }
    let center = (kernel_size / 2) as f64;
    let taps: Vec<f64> = (0..kernel_size)
        .map(|n| 2.0 * cutoff * sinc(2.0 * cutoff * (n as f64 - center)))
        .collect();
    let mut buf: Vec<Complex<f64>> = (0..pad)
        .map(|i| Complex::new(taps.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(pad).process(&mut buf);
    let response: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let stop = cutoff + transition;
    let ripple = response
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let f = *i as f64 / pad as f64;
            f >= stop && f <= 0.5
        })
        .map(|(_, &r)| r)
        .fold(0.0, f64::max);
    Ok(KernelResponse {
        kernel_size,
        cutoff,
        taps,
        response,
        ripple,
    })
}
