//! Complex discrete Fourier transforms.
//!
//! Power-of-two lengths use an iterative radix-2 kernel, other lengths whose
//! prime factors are all at most 5 a recursive mixed-radix kernel, and every
//! other length Bluestein's chirp-z algorithm on a padded power-of-two
//! transform. Forward transforms are unnormalized, inverse transforms scale
//! by `1/n` so that `inverse(forward(x)) == x`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Zero;

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { n, twiddles, bitrev }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for block in buf.chunks_exact_mut(len) {
                let (lo, hi) = block.split_at_mut(half);
                for j in 0..half {
                    let t = hi[j] * self.twiddles[j * stride];
                    hi[j] = lo[j] - t;
                    lo[j] += t;
                }
            }
            len <<= 1;
        }
    }
}

/// Splits `n` into radix-4, 2, 3 and 5 factors, or `None` if another prime
/// divides it.
fn smooth_factors(mut n: usize) -> Option<Vec<usize>> {
    let mut f = Vec::new();
    while n.is_multiple_of(4) {
        f.push(4);
        n /= 4;
    }
    for p in [2, 3, 5] {
        while n.is_multiple_of(p) {
            f.push(p);
            n /= p;
        }
    }
    (n == 1).then_some(f)
}

#[derive(Debug, Clone)]
struct Stage {
    radix: usize,
    /// Length of the sub-transforms this stage combines.
    span: usize,
    /// `W_{span·radix}^{q·k}` at `k·(radix-1) + q-1`.
    twiddles: Vec<Complex64>,
}

/// Iterative self-sorting (Stockham) transform for lengths with prime
/// factors 2, 3 and 5.
#[derive(Debug, Clone)]
struct MixedRadix {
    n: usize,
    stages: Vec<Stage>,
}

impl MixedRadix {
    fn new(n: usize, factors: Vec<usize>) -> Self {
        let mut span = 1;
        let stages = factors
            .into_iter()
            .map(|radix| {
                let size = span * radix;
                let mut twiddles = Vec::with_capacity(span * (radix - 1));
                for k in 0..span {
                    for q in 1..radix {
                        twiddles.push(Complex64::from_polar(1.0, -2.0 * PI * (q * k) as f64 / size as f64));
                    }
                }
                let stage = Stage { radix, span, twiddles };
                span = size;
                stage
            })
            .collect();
        Self { n, stages }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let mut scratch = vec![Complex64::zero(); self.n];
        let mut in_buf = true;
        for stage in &self.stages {
            if in_buf {
                Self::stage(stage, buf, &mut scratch);
            } else {
                Self::stage(stage, &scratch, buf);
            }
            in_buf = !in_buf;
        }
        if !in_buf {
            buf.copy_from_slice(&scratch);
        }
    }

    fn stage(stage: &Stage, x: &[Complex64], y: &mut [Complex64]) {
        let n = x.len();
        let (r, span) = (stage.radix, stage.span);
        let stride = n / r;
        let blocks = stride / span;
        let tw = &stage.twiddles;
        match r {
            2 => {
                for b in 0..blocks {
                    for k in 0..span {
                        let j = b * span + k;
                        let a = x[j];
                        let c = x[j + stride] * tw[k];
                        let o = b * span * 2 + k;
                        y[o] = a + c;
                        y[o + span] = a - c;
                    }
                }
            }
            3 => {
                let s = -(3.0f64).sqrt() / 2.0;
                for b in 0..blocks {
                    for k in 0..span {
                        let j = b * span + k;
                        let a = x[j];
                        let c = x[j + stride] * tw[2 * k];
                        let d = x[j + 2 * stride] * tw[2 * k + 1];
                        let sum = c + d;
                        let diff = c - d;
                        let base = a - sum * 0.5;
                        let rot = Complex64::new(-diff.im * s, diff.re * s);
                        let o = b * span * 3 + k;
                        y[o] = a + sum;
                        y[o + span] = base + rot;
                        y[o + 2 * span] = base - rot;
                    }
                }
            }
            4 => {
                for b in 0..blocks {
                    for k in 0..span {
                        let j = b * span + k;
                        let a = x[j];
                        let c = x[j + stride] * tw[3 * k];
                        let d = x[j + 2 * stride] * tw[3 * k + 1];
                        let e = x[j + 3 * stride] * tw[3 * k + 2];
                        let (s0, s1) = (a + d, a - d);
                        let (t0, t1) = (c + e, c - e);
                        let t1 = Complex64::new(t1.im, -t1.re);
                        let o = b * span * 4 + k;
                        y[o] = s0 + t0;
                        y[o + span] = s1 + t1;
                        y[o + 2 * span] = s0 - t0;
                        y[o + 3 * span] = s1 - t1;
                    }
                }
            }
            _ => {
                let (c1, s1) = ((2.0 * PI / 5.0).cos(), -(2.0 * PI / 5.0).sin());
                let (c2, s2) = ((4.0 * PI / 5.0).cos(), -(4.0 * PI / 5.0).sin());
                for b in 0..blocks {
                    for k in 0..span {
                        let j = b * span + k;
                        let v0 = x[j];
                        let v1 = x[j + stride] * tw[4 * k];
                        let v2 = x[j + 2 * stride] * tw[4 * k + 1];
                        let v3 = x[j + 3 * stride] * tw[4 * k + 2];
                        let v4 = x[j + 4 * stride] * tw[4 * k + 3];
                        let (a1, b1) = (v1 + v4, v1 - v4);
                        let (a2, b2) = (v2 + v3, v2 - v3);
                        let r1 = v0 + a1 * c1 + a2 * c2;
                        let r2 = v0 + a1 * c2 + a2 * c1;
                        // i·(s1·b1 + s2·b2) and i·(s2·b1 − s1·b2)
                        let i1 = b1 * s1 + b2 * s2;
                        let i2 = b1 * s2 - b2 * s1;
                        let i1 = Complex64::new(-i1.im, i1.re);
                        let i2 = Complex64::new(-i2.im, i2.re);
                        let o = b * span * 5 + k;
                        y[o] = v0 + a1 + a2;
                        y[o + span] = r1 + i1;
                        y[o + 4 * span] = r1 - i1;
                        y[o + 2 * span] = r2 + i2;
                        y[o + 3 * span] = r2 - i2;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Bluestein {
    n: usize,
    inner: Radix2,
    chirp: Vec<Complex64>,
    kernel_spectrum: Vec<Complex64>,
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // exp(-i pi k^2 / n), with k^2 reduced mod 2n to keep the angle small
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
                Complex64::from_polar(1.0, -PI * k2 / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::zero(); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self { n, inner, chirp, kernel_spectrum: kernel }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let m = self.inner.n;
        let mut work = vec![Complex64::zero(); m];
        for k in 0..self.n {
            work[k] = buf[k] * self.chirp[k];
        }
        self.inner.forward(&mut work);
        for (w, k) in work.iter_mut().zip(&self.kernel_spectrum) {
            *w = (*w * k).conj();
        }
        // inverse via conjugation; the 1/m scale is folded into the output
        self.inner.forward(&mut work);
        let scale = 1.0 / m as f64;
        for k in 0..self.n {
            buf[k] = work[k].conj() * scale * self.chirp[k];
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Trivial,
    Radix2(Radix2),
    Mixed(MixedRadix),
    Bluestein(Bluestein),
}

/// A one-dimensional transform plan for a fixed length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    kernel: Kernel,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        let kernel = if n <= 1 {
            Kernel::Trivial
        } else if n.is_power_of_two() {
            Kernel::Radix2(Radix2::new(n))
        } else if let Some(factors) = smooth_factors(n) {
            Kernel::Mixed(MixedRadix::new(n, factors))
        } else {
            Kernel::Bluestein(Bluestein::new(n))
        };
        Self { n, kernel }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place unnormalized forward transform, `X[k] = sum_j x[j] e^{-2 pi i jk/n}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length does not match plan");
        match &self.kernel {
            Kernel::Trivial => {}
            Kernel::Radix2(r) => r.forward(buf),
            Kernel::Mixed(m) => m.forward(buf),
            Kernel::Bluestein(b) => b.forward(buf),
        }
    }

    /// In-place inverse transform including the `1/n` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

/// Row-major two-dimensional transform plan.
#[derive(Debug, Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_plan: Fft,
    col_plan: Fft,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let row_plan = Fft::new(cols);
        let col_plan = if rows == cols { row_plan.clone() } else { Fft::new(rows) };
        Self { rows, cols, row_plan, col_plan }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, false);
    }

    /// Inverse transform, normalized by `1/(rows*cols)`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, true);
    }

    fn apply(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len(), "buffer length does not match plan");
        if inverse {
            for v in data.iter_mut() {
                *v = v.conj();
            }
        }
        for row in data.chunks_exact_mut(self.cols) {
            self.row_plan.forward(row);
        }
        if self.rows > 1 {
            let mut t = vec![Complex64::zero(); data.len()];
            transpose(data, &mut t, self.rows, self.cols);
            for column in t.chunks_exact_mut(self.rows) {
                self.col_plan.forward(column);
            }
            transpose(&t, data, self.cols, self.rows);
        }
        if inverse {
            let scale = 1.0 / self.len() as f64;
            for v in data.iter_mut() {
                *v = v.conj() * scale;
            }
        }
    }
}

/// Blocked out-of-place transpose of a `rows × cols` matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for r0 in (0..rows).step_by(BLOCK) {
        for c0 in (0..cols).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(rows) {
                for c in c0..(c0 + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Smallest power of two that is at least `n`.
pub fn padded_len(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Smallest length of the form `2^a 3^b 5^c` that is at least `n`.
pub fn fast_len(n: usize) -> usize {
    let n = n.max(1);
    let mut best = n.next_power_of_two();
    let mut p5 = 1;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n {
                v *= 2;
            }
            best = best.min(v);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}
