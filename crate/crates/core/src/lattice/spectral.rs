//! Fourier-multiplier calculus on the 4-torus.
//!
//! Every derivative is a polynomial in the effective wavenumber `k̃`, which
//! equals the signed integer wavenumber except at the Nyquist index where it
//! is zero. Using one wavenumber for odd and even orders keeps real fields
//! real and makes the discrete identities (trace of the Hessian equals the
//! Laplacian, `Σ|∇df|² = Σ|Δf|²`, symmetric mixed partials) hold exactly.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::Fft;

use super::{Grid4, MapField, ScalarField};

const LINES_PER_TASK: usize = 256;

impl Grid4 {
    fn fft4(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.n;
        let total = data.len();
        debug_assert_eq!(total, self.len());
        let batch = |buf: &mut [Complex64]| {
            buf.par_chunks_mut(n * LINES_PER_TASK)
                .for_each(|c| fft.process(c));
        };
        // innermost axis is contiguous
        batch(data);
        let mut tmp = vec![Complex64::default(); total];
        for axis in 0..3 {
            let stride = n.pow(3 - axis as u32);
            let block = n * stride;
            transpose_blocks(data, &mut tmp, n, stride);
            batch(&mut tmp);
            transpose_blocks(&tmp, data, stride, n);
            debug_assert_eq!(total % block, 0);
        }
    }

    /// Unnormalized forward DFT of a real array.
    pub(crate) fn forward(&self, v: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft4(&mut data, self.plans.forward.as_ref());
        data
    }

    /// Inverse DFT (normalized) returning the real part.
    pub(crate) fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.fft4(&mut data, self.plans.inverse.as_ref());
        let scale = 1.0 / self.len() as f64;
        data.into_iter().map(|c| c.re * scale).collect()
    }

    /// Multiplies a spectrum by `symbol(k̃)` and transforms back.
    pub(crate) fn apply_symbol(
        &self,
        hat: &[Complex64],
        symbol: impl Fn([f64; 4]) -> Complex64 + Sync,
    ) -> Vec<f64> {
        let mut out = hat.to_vec();
        self.multiply_symbol(&mut out, symbol);
        self.inverse_real(out)
    }

    pub(crate) fn multiply_symbol(
        &self,
        hat: &mut [Complex64],
        symbol: impl Fn([f64; 4]) -> Complex64 + Sync,
    ) {
        let n = self.n;
        let w = self.wave();
        hat.par_chunks_mut(n * n * n)
            .enumerate()
            .for_each(|(i0, chunk)| {
                let mut idx = 0;
                for i1 in 0..n {
                    for i2 in 0..n {
                        for i3 in 0..n {
                            chunk[idx] *= symbol([w[i0], w[i1], w[i2], w[i3]]);
                            idx += 1;
                        }
                    }
                }
            });
    }

    /// Real-valued symbol variant (the common case for even-order operators).
    pub(crate) fn multiply_real_symbol(
        &self,
        hat: &mut [Complex64],
        symbol: impl Fn([f64; 4]) -> f64 + Sync,
    ) {
        self.multiply_symbol(hat, |k| Complex64::new(symbol(k), 0.0));
    }

    /// Sum of `weight(k̃) |f̂(k̃)|²` scaled so that it equals the matching
    /// physical-space integral.
    pub fn parseval_sum(&self, v: &[f64], weight: impl Fn([f64; 4]) -> f64 + Sync) -> f64 {
        let orig = self.forward(v);
        let mut hat = orig.clone();
        self.multiply_real_symbol(&mut hat, weight);
        let h2 = self.h * self.h;
        let s: f64 = hat.iter().zip(&orig).map(|(a, b)| (a * b.conj()).re).sum();
        h2 * h2 * s / self.len() as f64
    }

    pub fn derivative(&self, s: &[f64], axis: usize) -> Vec<f64> {
        let hat = self.forward(s);
        self.apply_symbol(&hat, |k| Complex64::new(0.0, k[axis]))
    }

    pub fn laplacian_scalar(&self, s: &[f64]) -> Vec<f64> {
        let hat = self.forward(s);
        self.apply_symbol(&hat, |k| Complex64::new(-ksq(k), 0.0))
    }

    pub fn bilaplacian_scalar(&self, s: &[f64]) -> Vec<f64> {
        let hat = self.forward(s);
        self.apply_symbol(&hat, |k| {
            let q = ksq(k);
            Complex64::new(q * q, 0.0)
        })
    }

    pub fn laplacian(&self, f: &MapField) -> MapField {
        MapField {
            components: f
                .components
                .iter()
                .map(|c| self.laplacian_scalar(c))
                .collect(),
        }
    }

    pub fn bilaplacian(&self, f: &MapField) -> MapField {
        MapField {
            components: f
                .components
                .iter()
                .map(|c| self.bilaplacian_scalar(c))
                .collect(),
        }
    }

    /// `(1 + c·Δ²)⁻¹` applied componentwise.
    pub fn inverse_bilaplacian_shift(&self, f: &MapField, c: f64) -> MapField {
        MapField {
            components: f
                .components
                .iter()
                .map(|comp| {
                    let mut hat = self.forward(comp);
                    self.multiply_real_symbol(&mut hat, |k| {
                        let q = ksq(k);
                        1.0 / (1.0 + c * q * q)
                    });
                    self.inverse_real(hat)
                })
                .collect(),
        }
    }

    /// Exact bilaplacian heat semigroup `exp(-t Δ²)`.
    pub fn bilaplacian_semigroup(&self, f: &MapField, t: f64) -> MapField {
        MapField {
            components: f
                .components
                .iter()
                .map(|comp| {
                    let mut hat = self.forward(comp);
                    self.multiply_real_symbol(&mut hat, |k| {
                        let q = ksq(k);
                        (-t * q * q).exp()
                    });
                    self.inverse_real(hat)
                })
                .collect(),
        }
    }

    pub fn scalar_laplacian_field(&self, s: &ScalarField) -> ScalarField {
        ScalarField {
            values: self.laplacian_scalar(&s.values),
        }
    }
}

#[inline]
pub(crate) fn ksq(k: [f64; 4]) -> f64 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + k[3] * k[3]
}

/// Copies `rows × cols` blocks (repeated along the slowest axis) into
/// `cols × rows` blocks.
fn transpose_blocks(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    let block = rows * cols;
    dst.par_chunks_mut(block)
        .zip(src.par_chunks(block))
        .for_each(|(d, s)| {
            for r in 0..rows {
                let row = &s[r * cols..(r + 1) * cols];
                for (c, v) in row.iter().enumerate() {
                    d[c * rows + r] = *v;
                }
            }
        });
}

/// Index of the unordered pair `(i, j)` in the packed symmetric Hessian.
#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    // rows: (0,0..3) -> 0..3, (1,1..3) -> 4..6, (2,2..3) -> 7..8, (3,3) -> 9
    match a {
        0 => b,
        1 => 3 + b,
        2 => 5 + b,
        _ => 9,
    }
}

/// All derivatives of a map field used by the flow, each computed by a
/// Fourier multiplier.
#[derive(Debug, Clone)]
pub struct Jet {
    l: usize,
    /// `[i * L + α]`: `∂ᵢ f^α`.
    df: Vec<Vec<f64>>,
    /// `[pair(i,j) * L + α]`: `∂ᵢ∂ⱼ f^α`, upper triangle only.
    hessian: Vec<Vec<f64>>,
    laplacian: Vec<Vec<f64>>,
    /// `[i * L + α]`: `∂ᵢ Δf^α`.
    grad_laplacian: Vec<Vec<f64>>,
    bilaplacian: Vec<Vec<f64>>,
}

impl Jet {
    pub fn compute(grid: &Grid4, f: &MapField) -> Self {
        Self::build(grid, f, true)
    }

    /// Only first derivatives and the Hessian (what the density needs).
    pub fn first_and_second(grid: &Grid4, f: &MapField) -> Self {
        Self::build(grid, f, false)
    }

    fn build(grid: &Grid4, f: &MapField, full: bool) -> Self {
        let l = f.ambient_dim();
        let hats: Vec<_> = f.components.iter().map(|c| grid.forward(c)).collect();
        let mut df = Vec::with_capacity(4 * l);
        for i in 0..4 {
            for hat in &hats {
                df.push(grid.apply_symbol(hat, |k| Complex64::new(0.0, k[i])));
            }
        }
        let mut hessian = vec![Vec::new(); 10 * l];
        for i in 0..4 {
            for j in i..4 {
                for (a, hat) in hats.iter().enumerate() {
                    hessian[pair_index(i, j) * l + a] =
                        grid.apply_symbol(hat, |k| Complex64::new(-k[i] * k[j], 0.0));
                }
            }
        }
        let (laplacian, grad_laplacian, bilaplacian) = if full {
            let lap = hats
                .iter()
                .map(|hat| grid.apply_symbol(hat, |k| Complex64::new(-ksq(k), 0.0)))
                .collect();
            let mut gl = Vec::with_capacity(4 * l);
            for i in 0..4 {
                for hat in &hats {
                    gl.push(grid.apply_symbol(hat, |k| Complex64::new(0.0, -k[i] * ksq(k))));
                }
            }
            let bl = hats
                .iter()
                .map(|hat| {
                    grid.apply_symbol(hat, |k| {
                        let q = ksq(k);
                        Complex64::new(q * q, 0.0)
                    })
                })
                .collect();
            (lap, gl, bl)
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };
        Self {
            l,
            df,
            hessian,
            laplacian,
            grad_laplacian,
            bilaplacian,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.l
    }

    /// `∂ᵢ f^α`.
    pub fn df(&self, i: usize, alpha: usize) -> &[f64] {
        &self.df[i * self.l + alpha]
    }

    /// `∂ᵢ∂ⱼ f^α`; symmetric in `(i, j)`.
    pub fn hessian(&self, i: usize, j: usize, alpha: usize) -> &[f64] {
        &self.hessian[pair_index(i, j) * self.l + alpha]
    }

    /// `Δf^α`. Empty for jets built with [`Jet::first_and_second`].
    pub fn laplacian(&self, alpha: usize) -> &[f64] {
        &self.laplacian[alpha]
    }

    pub fn grad_laplacian(&self, i: usize, alpha: usize) -> &[f64] {
        &self.grad_laplacian[i * self.l + alpha]
    }

    pub fn bilaplacian(&self, alpha: usize) -> &[f64] {
        &self.bilaplacian[alpha]
    }

    pub fn laplacian_field(&self) -> MapField {
        MapField {
            components: self.laplacian.clone(),
        }
    }

    pub fn bilaplacian_field(&self) -> MapField {
        MapField {
            components: self.bilaplacian.clone(),
        }
    }

    /// `|df|²` pointwise.
    pub fn df_sq(&self) -> Vec<f64> {
        let len = self.df[0].len();
        let mut out = vec![0.0; len];
        for c in &self.df {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v * v;
            }
        }
        out
    }

    /// `|∇df|²` pointwise, summing all 16 index pairs.
    pub fn hessian_sq(&self) -> Vec<f64> {
        let len = self.df[0].len();
        let mut out = vec![0.0; len];
        for i in 0..4 {
            for j in i..4 {
                let w = if i == j { 1.0 } else { 2.0 };
                for a in 0..self.l {
                    for (o, v) in out.iter_mut().zip(self.hessian(i, j, a)) {
                        *o += w * v * v;
                    }
                }
            }
        }
        out
    }

    /// `|Δf|²` pointwise.
    pub fn laplacian_sq(&self) -> Vec<f64> {
        let len = self.df[0].len();
        let mut out = vec![0.0; len];
        for c in &self.laplacian {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v * v;
            }
        }
        out
    }

    /// Trace of the Hessian over the grid indices.
    pub fn hessian_trace(&self, alpha: usize) -> Vec<f64> {
        let len = self.df[0].len();
        let mut out = vec![0.0; len];
        for i in 0..4 {
            for (o, v) in out.iter_mut().zip(self.hessian(i, i, alpha)) {
                *o += v;
            }
        }
        out
    }

    /// `|∇df|² + |df|⁴` pointwise.
    pub fn density(&self) -> Vec<f64> {
        let mut d = self.hessian_sq();
        for (o, s) in d.iter_mut().zip(self.df_sq()) {
            *o += s * s;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(grid: &Grid4, k: f64, axis: usize) -> MapField {
        MapField::from_fn(grid, |x, out| {
            out.fill(0.0);
            out[0] = (k * x[axis]).cos();
            out[1] = (k * x[axis]).sin();
        })
    }

    #[test]
    fn great_circle_is_laplace_eigenfunction() {
        let g = Grid4::new(8, 3).unwrap();
        let f = circle(&g, 1.0, 0);
        let jet = Jet::compute(&g, &f);
        for a in 0..3 {
            for (idx, v) in jet.laplacian(a).iter().enumerate() {
                assert!((v + f.components[a][idx]).abs() < 1e-12);
            }
            for (idx, v) in jet.bilaplacian(a).iter().enumerate() {
                assert!((v - f.components[a][idx]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let g = Grid4::new(8, 3).unwrap();
        let f = MapField::from_fn(&g, |_, out| {
            out.copy_from_slice(&[0.0, 0.0, 1.0]);
        });
        let jet = Jet::compute(&g, &f);
        for a in 0..3 {
            assert!(jet.laplacian(a).iter().all(|v| *v == 0.0));
            assert!(jet.bilaplacian(a).iter().all(|v| *v == 0.0));
            for i in 0..4 {
                assert!(jet.df(i, a).iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn bilaplacian_eigenvalue_sixteen() {
        let g = Grid4::new(8, 3).unwrap();
        let f = circle(&g, 2.0, 1);
        let jet = Jet::compute(&g, &f);
        for a in 0..2 {
            for (idx, v) in jet.bilaplacian(a).iter().enumerate() {
                assert!((v - 16.0 * f.components[a][idx]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn derivative_of_sine() {
        let g = Grid4::new(16, 2).unwrap();
        let s: Vec<f64> = (0..g.len()).map(|i| (3.0 * g.coords(i)[2]).sin()).collect();
        let d = g.derivative(&s, 2);
        for (i, v) in d.iter().enumerate() {
            let x = g.coords(i)[2];
            assert!((v - 3.0 * (3.0 * x).cos()).abs() < 1e-11);
        }
    }

    #[test]
    fn nyquist_mode_has_zero_derivative() {
        let g = Grid4::new(8, 2).unwrap();
        let s: Vec<f64> = (0..g.len()).map(|i| (4.0 * g.coords(i)[0]).cos()).collect();
        let d = g.derivative(&s, 0);
        assert!(d.iter().all(|v| v.abs() < 1e-12));
        assert!(g.laplacian_scalar(&s).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn semigroup_damps_single_mode() {
        let g = Grid4::new(8, 2).unwrap();
        let f = circle(&g, 2.0, 3);
        let t = 0.01;
        let out = g.bilaplacian_semigroup(&f, t);
        let decay = (-16.0 * t).exp();
        for (a, b) in out.components[0].iter().zip(&f.components[0]) {
            assert!((a - decay * b).abs() < 1e-13);
        }
    }
}
