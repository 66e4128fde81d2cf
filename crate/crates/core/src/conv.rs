//! FFT-backed linear convolution with zero padding, and its adjoints.
//!
//! Images are `height × width`, kernels `k × k` with their centre at
//! `(k/2, k/2)`. The "same" output keeps the image size:
//! `out(y, x) = Σ_{a,b} p(a, b) · img(y - a + k/2, x - b + k/2)`, with
//! samples outside the image taken as zero.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Zero;

use crate::fft::{fast_len, Fft2};

#[derive(Debug, Clone)]
pub struct LinearConv {
    height: usize,
    width: usize,
    ksize: usize,
    fft: Fft2,
}

impl LinearConv {
    pub fn new(height: usize, width: usize, ksize: usize) -> Self {
        let ph = fast_len(height + ksize - 1);
        let pw = fast_len(width + ksize - 1);
        Self { height, width, ksize, fft: Fft2::new(ph, pw) }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn ksize(&self) -> usize {
        self.ksize
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    fn embed(&self, data: &[f64], rows: usize, cols: usize, offset: usize) -> Vec<Complex64> {
        let pw = self.fft.cols();
        let mut buf = vec![Complex64::zero(); self.fft.len()];
        for r in 0..rows {
            for c in 0..cols {
                buf[(r + offset) * pw + c + offset] = Complex64::new(data[r * cols + c], 0.0);
            }
        }
        buf
    }

    fn extract(&self, buf: &[Complex64], rows: usize, cols: usize, offset: usize) -> Vec<f64> {
        let pw = self.fft.cols();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                out.push(buf[(r + offset) * pw + c + offset].re);
            }
        }
        out
    }

    fn embed_pair(&self, a: &[f64], b: Option<&[f64]>, rows: usize, cols: usize, offset: usize) -> Vec<Complex64> {
        let pw = self.fft.cols();
        let mut buf = vec![Complex64::zero(); self.fft.len()];
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                buf[(r + offset) * pw + c + offset] = Complex64::new(a[i], b.map_or(0.0, |b| b[i]));
            }
        }
        buf
    }

    /// Separates the transform of `a + i·b` into the spectra of `a` and `b`.
    fn split_pair(&self, z: Vec<Complex64>) -> (Vec<Complex64>, Vec<Complex64>) {
        let (ph, pw) = (self.fft.rows(), self.fft.cols());
        let mut sa = vec![Complex64::zero(); z.len()];
        let mut sb = vec![Complex64::zero(); z.len()];
        for r in 0..ph {
            let nr = (ph - r) % ph;
            for c in 0..pw {
                let nc = (pw - c) % pw;
                let (u, v) = (z[r * pw + c], z[nr * pw + nc].conj());
                sa[r * pw + c] = (u + v) * 0.5;
                let d = (u - v) * 0.5;
                sb[r * pw + c] = Complex64::new(d.im, -d.re);
            }
        }
        (sa, sb)
    }

    /// Spectra of two images from one complex transform.
    pub fn image_spectra_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut buf = self.embed_pair(a, Some(b), self.height, self.width, 0);
        self.fft.forward(&mut buf);
        self.split_pair(buf)
    }

    /// [`LinearConv::gradient_spectrum`] of two sensitivities at once.
    pub fn gradient_spectra_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut buf = self.embed_pair(a, Some(b), self.height, self.width, self.ksize / 2);
        self.fft.forward(&mut buf);
        self.split_pair(buf)
    }

    /// Two [`LinearConv::finish_convolution`] calls sharing one inverse
    /// transform. Both spectra must belong to real signals.
    pub fn finish_convolution_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + Complex64::new(-y.im, y.re)).collect();
        self.fft.inverse(&mut buf);
        self.extract_pair(&buf, self.height, self.width, self.ksize / 2)
    }

    /// Two [`LinearConv::adjoint_image_from`] calls sharing one inverse
    /// transform.
    pub fn adjoint_image_pair(
        &self,
        grad_a: &[Complex64],
        kernel_a: &[Complex64],
        grad_b: &[Complex64],
        kernel_b: &[Complex64],
    ) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = (0..grad_a.len())
            .map(|i| {
                let y = grad_b[i] * kernel_b[i].conj();
                grad_a[i] * kernel_a[i].conj() + Complex64::new(-y.im, y.re)
            })
            .collect();
        self.fft.inverse(&mut buf);
        self.extract_pair(&buf, self.height, self.width, 0)
    }

    fn extract_pair(&self, buf: &[Complex64], rows: usize, cols: usize, offset: usize) -> (Vec<f64>, Vec<f64>) {
        let pw = self.fft.cols();
        let mut a = Vec::with_capacity(rows * cols);
        let mut b = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let z = buf[(r + offset) * pw + c + offset];
                a.push(z.re);
                b.push(z.im);
            }
        }
        (a, b)
    }

    /// Spectrum of an image placed at the padded origin.
    pub fn image_spectrum(&self, image: &[f64]) -> Vec<Complex64> {
        let mut buf = self.embed(image, self.height, self.width, 0);
        self.fft.forward(&mut buf);
        buf
    }

    /// Spectrum of a kernel placed at the padded origin.
    pub fn kernel_spectrum(&self, kernel: &[f64]) -> Vec<Complex64> {
        let mut buf = self.embed(kernel, self.ksize, self.ksize, 0);
        self.fft.forward(&mut buf);
        buf
    }

    /// Spectrum of an output-shaped sensitivity shifted by `k/2`, the form
    /// both adjoints correlate against.
    pub fn gradient_spectrum(&self, grad: &[f64]) -> Vec<Complex64> {
        let mut buf = self.embed(grad, self.height, self.width, self.ksize / 2);
        self.fft.forward(&mut buf);
        buf
    }

    /// Inverse-transforms a product spectrum and keeps the "same" window.
    pub fn finish_convolution(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.fft.inverse(&mut spectrum);
        self.extract(&spectrum, self.height, self.width, self.ksize / 2)
    }

    pub fn convolve(&self, image: &[f64], kernel: &[f64]) -> Vec<f64> {
        let mut spec = self.image_spectrum(image);
        for (s, k) in spec.iter_mut().zip(self.kernel_spectrum(kernel)) {
            *s *= k;
        }
        self.finish_convolution(spec)
    }

    /// Gradient with respect to the image of `<grad, convolve(image, kernel)>`,
    /// given the kernel spectrum and the [`LinearConv::gradient_spectrum`].
    pub fn adjoint_image_from(&self, grad_spec: &[Complex64], kernel_spec: &[Complex64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> =
            grad_spec.iter().zip(kernel_spec).map(|(g, k)| g * k.conj()).collect();
        self.fft.inverse(&mut buf);
        self.extract(&buf, self.height, self.width, 0)
    }

    /// Gradient with respect to the kernel of `<grad, convolve(image, kernel)>`.
    pub fn adjoint_kernel_from(&self, grad_spec: &[Complex64], image_spec: &[Complex64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> =
            grad_spec.iter().zip(image_spec).map(|(g, i)| g * i.conj()).collect();
        self.fft.inverse(&mut buf);
        self.extract(&buf, self.ksize, self.ksize, 0)
    }

    pub fn adjoint_image(&self, grad: &[f64], kernel: &[f64]) -> Vec<f64> {
        self.adjoint_image_from(&self.gradient_spectrum(grad), &self.kernel_spectrum(kernel))
    }

    pub fn adjoint_kernel(&self, grad: &[f64], image: &[f64]) -> Vec<f64> {
        self.adjoint_kernel_from(&self.gradient_spectrum(grad), &self.image_spectrum(image))
    }
}

/// Places a `k × k` kernel on a `rows × cols` circular grid with its centre
/// sample at the origin.
pub fn embed_centered(kernel: &[f64], k: usize, rows: usize, cols: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::zero(); rows * cols];
    let half = k / 2;
    for a in 0..k {
        let r = (a + rows - half % rows) % rows;
        for b in 0..k {
            let c = (b + cols - half % cols) % cols;
            buf[r * cols + c] += Complex64::new(kernel[a * k + b], 0.0);
        }
    }
    buf
}

/// Index of kernel sample `(a, b)` on the grid used by [`embed_centered`].
pub fn centered_position(a: usize, b: usize, k: usize, rows: usize, cols: usize) -> usize {
    let half = k / 2;
    let r = (a + rows - half % rows) % rows;
    let c = (b + cols - half % cols) % cols;
    r * cols + c
}
