//! Real-input DFT and its inverse for arbitrary lengths.
//!
//! Transforms are unnormalized forward and scaled by `1/T` on the inverse.
//! Composite lengths go through a recursive mixed-radix decimation-in-time
//! pass; prime lengths above [`DIRECT_DFT_MAX`] use Bluestein's chirp-z
//! reformulation on a power-of-two convolution.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Primes up to this length are transformed by direct summation.
const DIRECT_DFT_MAX: usize = 31;

/// One-sided spectrum of a real sequence of length `original_length`.
///
/// Holds `floor(T/2) + 1` bins. The DC bin, and the Nyquist bin when `T` is
/// even, always have an exactly zero imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum<S> {
    bins: Vec<Complex<S>>,
    original_length: usize,
}

impl<S: Scalar> ComplexSpectrum<S> {
    /// Builds a spectrum, projecting the DC and Nyquist bins onto the real axis.
    pub fn new(mut bins: Vec<Complex<S>>, original_length: usize) -> Result<Self> {
        if original_length == 0 || bins.len() != original_length / 2 + 1 {
            return Err(Error::dim(
                "spectrum",
                format!(
                    "{} bins cannot describe a length-{original_length} signal",
                    bins.len()
                ),
            ));
        }
        enforce_hermitian_edges(&mut bins, original_length);
        Ok(Self {
            bins,
            original_length,
        })
    }

    pub fn bins(&self) -> &[Complex<S>] {
        &self.bins
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    /// Energy of the implied two-sided spectrum, `Σ_s |X_s|²` over all `T` bins.
    pub fn two_sided_energy(&self) -> S {
        let n = self.original_length;
        self.bins
            .iter()
            .enumerate()
            .map(|(s, z)| {
                let weight = if s == 0 || (n % 2 == 0 && s == n / 2) { 1.0 } else { 2.0 };
                S::cast(weight) * z.norm_sqr()
            })
            .sum()
    }
}

fn enforce_hermitian_edges<S: Scalar>(bins: &mut [Complex<S>], n: usize) {
    bins[0].im = S::zero();
    if n % 2 == 0 {
        bins[n / 2].im = S::zero();
    }
}

pub fn rfft<S: Scalar>(x: &[S]) -> Result<ComplexSpectrum<S>> {
    if x.is_empty() {
        return Err(Error::Contract("rfft of an empty sequence".into()));
    }
    ComplexSpectrum::new(rfft_bins(x), x.len())
}

pub fn irfft<S: Scalar>(spectrum: &ComplexSpectrum<S>, len: usize) -> Result<Vec<S>> {
    if spectrum.original_length != len {
        return Err(Error::Contract(format!(
            "spectrum of a length-{} signal inverted to length {len}",
            spectrum.original_length
        )));
    }
    Ok(irfft_bins(&spectrum.bins, len))
}

/// Per-bin complex product `X ⊙ W`.
pub fn complex_hadamard<S: Scalar>(
    x: &ComplexSpectrum<S>,
    w: &ComplexSpectrum<S>,
) -> Result<ComplexSpectrum<S>> {
    if x.original_length != w.original_length {
        return Err(Error::dim(
            "complex_hadamard",
            format!(
                "spectra of lengths {} and {}",
                x.original_length, w.original_length
            ),
        ));
    }
    let bins = x.bins.iter().zip(&w.bins).map(|(a, b)| a * b).collect();
    ComplexSpectrum::new(bins, x.original_length)
}

/// Unnormalized DFT with `e^{-2πi st/n}` kernel.
pub fn fft<S: Scalar>(x: &[Complex<S>]) -> Vec<Complex<S>> {
    transform(x, -S::one())
}

/// Unnormalized inverse DFT with `e^{+2πi st/n}` kernel (no `1/n`).
pub fn ifft_unnormalized<S: Scalar>(x: &[Complex<S>]) -> Vec<Complex<S>> {
    transform(x, S::one())
}

pub(crate) fn rfft_bins<S: Scalar>(x: &[S]) -> Vec<Complex<S>> {
    let n = x.len();
    let full: Vec<Complex<S>> = x.iter().map(|&v| Complex::new(v, S::zero())).collect();
    let mut bins = transform(&full, -S::one());
    bins.truncate(n / 2 + 1);
    enforce_hermitian_edges(&mut bins, n);
    bins
}

pub(crate) fn irfft_bins<S: Scalar>(bins: &[Complex<S>], n: usize) -> Vec<S> {
    let mut full = vec![Complex::new(S::zero(), S::zero()); n];
    full[0] = Complex::new(bins[0].re, S::zero());
    for s in 1..bins.len() {
        if n % 2 == 0 && s == n / 2 {
            full[s] = Complex::new(bins[s].re, S::zero());
        } else {
            full[s] = bins[s];
            full[n - s] = bins[s].conj();
        }
    }
    let scale = S::one() / S::from_usize_exact(n);
    transform(&full, S::one())
        .into_iter()
        .map(|z| z.re * scale)
        .collect()
}

/// Adjoint of [`rfft_bins`] as a real-linear map from `R^n` to `C^{n/2+1}`.
pub(crate) fn rfft_adjoint<S: Scalar>(upstream: &[Complex<S>], n: usize) -> Vec<S> {
    let mut full = vec![Complex::new(S::zero(), S::zero()); n];
    full[..upstream.len()].copy_from_slice(upstream);
    // The edge imaginary parts are pinned to zero in the forward pass.
    full[0].im = S::zero();
    if n % 2 == 0 {
        full[n / 2].im = S::zero();
    }
    transform(&full, S::one()).into_iter().map(|z| z.re).collect()
}

/// Adjoint of [`irfft_bins`] from `R^n` back to the one-sided bins.
pub(crate) fn irfft_adjoint<S: Scalar>(upstream: &[S]) -> Vec<Complex<S>> {
    let n = upstream.len();
    let inv_n = S::one() / S::from_usize_exact(n);
    let two = S::cast(2.0);
    rfft_bins(upstream)
        .into_iter()
        .enumerate()
        .map(|(s, g)| {
            if s == 0 || (n % 2 == 0 && s == n / 2) {
                Complex::new(g.re * inv_n, S::zero())
            } else {
                g * (two * inv_n)
            }
        })
        .collect()
}

/// `e^{sign · 2πi · e / n}` with the exponent reduced modulo `n` first.
fn twiddle<S: Scalar>(e: usize, n: usize, sign: S) -> Complex<S> {
    let angle = sign * S::TAU() * S::from_usize_exact(e % n) / S::from_usize_exact(n);
    Complex::new(angle.cos(), angle.sin())
}

fn smallest_factor(n: usize) -> usize {
    if n % 2 == 0 {
        return 2;
    }
    let mut p = 3;
    while p * p <= n {
        if n % p == 0 {
            return p;
        }
        p += 2;
    }
    n
}

fn transform<S: Scalar>(x: &[Complex<S>], sign: S) -> Vec<Complex<S>> {
    let n = x.len();
    if n <= 1 {
        return x.to_vec();
    }
    let p = smallest_factor(n);
    if p == n {
        return if n <= DIRECT_DFT_MAX {
            direct_dft(x, sign)
        } else {
            bluestein(x, sign)
        };
    }

    let m = n / p;
    let subs: Vec<Vec<Complex<S>>> = (0..p)
        .map(|r| {
            let decimated: Vec<_> = (0..m).map(|j| x[r + p * j]).collect();
            transform(&decimated, sign)
        })
        .collect();

    let mut out = vec![Complex::new(S::zero(), S::zero()); n];
    for k in 0..m {
        for q in 0..p {
            let idx = k + m * q;
            let mut acc = subs[0][k];
            for (r, sub) in subs.iter().enumerate().skip(1) {
                acc += twiddle(r * idx, n, sign) * sub[k];
            }
            out[idx] = acc;
        }
    }
    out
}

fn direct_dft<S: Scalar>(x: &[Complex<S>], sign: S) -> Vec<Complex<S>> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| v * twiddle(k * t, n, sign))
                .fold(Complex::new(S::zero(), S::zero()), |a, b| a + b)
        })
        .collect()
}

fn bluestein<S: Scalar>(x: &[Complex<S>], sign: S) -> Vec<Complex<S>> {
    let n = x.len();
    // chirp[k] = e^{sign · iπ k²/n}; k² is reduced mod 2n to keep the angle small.
    let chirp: Vec<Complex<S>> = (0..n)
        .map(|k| {
            let e = (k * k) % (2 * n);
            let angle = sign * S::PI() * S::from_usize_exact(e) / S::from_usize_exact(n);
            Complex::new(angle.cos(), angle.sin())
        })
        .collect();

    let len = (2 * n - 1).next_power_of_two();
    let zero = Complex::new(S::zero(), S::zero());
    let mut a = vec![zero; len];
    for k in 0..n {
        a[k] = x[k] * chirp[k];
    }
    let mut b = vec![zero; len];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[len - k] = chirp[k].conj();
    }

    let fa = transform(&a, -S::one());
    let fb = transform(&b, -S::one());
    let prod: Vec<_> = fa.iter().zip(&fb).map(|(u, v)| u * v).collect();
    let conv = transform(&prod, S::one());
    let inv_len = S::one() / S::from_usize_exact(len);
    (0..n).map(|k| conv[k] * inv_len * chirp[k]).collect()
}
