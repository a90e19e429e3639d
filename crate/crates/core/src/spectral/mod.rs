//! Discrete Fourier analysis of images.
//!
//! Images are stored height × width × channels with values in `[-1, 1]`.
//! Spectra are always produced centered, with the DC bin at `(H/2, W/2)`,
//! which is why both spatial dimensions must be even.

mod chessboard;
mod dft;
mod sinc;
mod wiener;

pub use chessboard::{chessboard_integration, ring_cell_counts, ring_index, ChessboardProfile, Layout};
pub use dft::{to_image, to_spectrum, ChannelRange, SpectralTransform, SpectrumRecord};
pub use sinc::{sinc_kernel_response, sinc_kernel_response_with, KernelResponse, DEFAULT_TRANSITION_WIDTH};
pub use wiener::{ddpm_alpha_bar_schedule, wiener_profile, wiener_response, WienerProfile};

use ndarray::{Array3, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Floating point types the spectral routines are generic over.
pub trait Real:
    rustfft::FftNum + num_traits::Float + num_traits::FloatConst + std::fmt::Display + Default
{
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn from_f64<T: Real>(v: f64) -> T {
    T::from_f64(v).unwrap_or_else(T::nan)
}

/// An image with pixel values in `[-1, 1]`, laid out `H × W × C`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSample<T: Real = f32> {
    pixels: Array3<T>,
}

impl<T: Real> ImageSample<T> {
    /// Validates and wraps a pixel array.
    ///
    /// Rejects odd spatial sizes, empty arrays, non-finite values and values
    /// outside `[-1, 1]`.
    pub fn new(pixels: Array3<T>) -> Result<Self> {
        let (h, w, c) = pixels.dim();
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::invalid(format!("empty image {h}x{w}x{c}")));
        }
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be even, got {h}x{w}"
            )));
        }
        let one = T::one();
        for &v in pixels.iter() {
            if !v.is_finite() {
                return Err(Error::invalid("image contains non-finite pixels"));
            }
            if v > one || v < -one {
                return Err(Error::invalid(format!("pixel value {v} outside [-1, 1]")));
            }
        }
        Ok(Self { pixels })
    }

    /// Clamps every value into `[-1, 1]` before validating.
    pub fn new_clamped(mut pixels: Array3<T>) -> Result<Self> {
        let one = T::one();
        pixels.mapv_inplace(|v| if v.is_nan() { v } else { v.max(-one).min(one) });
        Self::new(pixels)
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().1
    }

    pub fn channels(&self) -> usize {
        self.pixels.dim().2
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.pixels.dim()
    }

    pub fn pixels(&self) -> &Array3<T> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array3<T> {
        self.pixels
    }

    pub fn channel(&self, c: usize) -> ArrayView2<'_, T> {
        self.pixels.index_axis(Axis(2), c)
    }

    /// Converts the sample to another float precision.
    pub fn cast<U: Real>(&self) -> ImageSample<U> {
        ImageSample {
            pixels: self.pixels.mapv(|v| from_f64::<U>(to_f64(v)).max(-U::one()).min(U::one())),
        }
    }

    /// Rotates the image counter-clockwise by `quarter_turns × 90°`.
    pub fn rotate90(&self, quarter_turns: usize) -> Self {
        let mut out = self.pixels.clone();
        for _ in 0..quarter_turns % 4 {
            let mut t = out.view();
            t.swap_axes(0, 1);
            t.invert_axis(Axis(0));
            out = t.to_owned();
        }
        Self { pixels: out }
    }
}
