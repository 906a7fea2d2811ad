//! FFT machinery on a [`Grid3D`]: spectral kinetic energy, the truncated
//! free-space Coulomb kernel, and the Sobolev preconditioner used by the
//! descent solver.
//!
//! Discrete transform convention: `f̂[k] = Σ_x f[x] e^{-i k·x}` (unnormalized),
//! so `∫ f g ≈ dx³/N Σ_k conj(f̂) ĝ` with `N = n³`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Field3D, Grid3D};

/// Forward/inverse plans for an `n × n × n` complex transform.
#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Unnormalized inverse; divide by `n³` to invert [`Fft3::forward`].
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        plan.process_with_scratch(data, &mut scratch);

        let mut plane = vec![Complex64::default(); n * n];
        // middle axis: transpose each slab
        for i in 0..n {
            let slab = &mut data[i * n * n..(i + 1) * n * n];
            for j in 0..n {
                for k in 0..n {
                    plane[k * n + j] = slab[j * n + k];
                }
            }
            plan.process_with_scratch(&mut plane, &mut scratch);
            for j in 0..n {
                for k in 0..n {
                    slab[j * n + k] = plane[k * n + j];
                }
            }
        }
        // first axis: gather (k, i) planes at fixed j
        for j in 0..n {
            for i in 0..n {
                let row = &data[(i * n + j) * n..(i * n + j + 1) * n];
                for k in 0..n {
                    plane[k * n + i] = row[k];
                }
            }
            plan.process_with_scratch(&mut plane, &mut scratch);
            for i in 0..n {
                let row = &mut data[(i * n + j) * n..(i * n + j + 1) * n];
                for k in 0..n {
                    row[k] = plane[k * n + i];
                }
            }
        }
    }
}

/// Angular wavenumber of FFT bin `m` on a box of side `length`.
pub fn wavenumber(m: usize, n: usize, length: f64) -> f64 {
    let signed = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
    2.0 * PI * signed / length
}

/// Fourier transform of the Coulomb kernel truncated at radius `cutoff`:
/// `4π (1 - cos(|k| c)) / |k|²`, with the limit `2π c²` at `k = 0`.
pub fn truncated_coulomb_symbol(k2: f64, cutoff: f64) -> f64 {
    if k2 == 0.0 {
        2.0 * PI * cutoff * cutoff
    } else {
        let k = k2.sqrt();
        4.0 * PI * (1.0 - (k * cutoff).cos()) / k2
    }
}

/// Per-grid spectral operators with cached symbols.
#[derive(Debug, Clone)]
pub struct SpectralOps {
    grid: Grid3D,
    fft: Fft3,
    k2: Vec<f64>,
    coulomb: Vec<f64>,
}

impl SpectralOps {
    /// Coulomb kernel truncated at half the box side.
    pub fn new(grid: Grid3D) -> Self {
        Self::with_cutoff(grid, 0.5 * grid.length())
    }

    pub fn with_cutoff(grid: Grid3D, cutoff: f64) -> Self {
        let n = grid.n();
        let l = grid.length();
        let kk: Vec<f64> = (0..n).map(|m| wavenumber(m, n, l)).collect();
        let mut k2 = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    k2.push(kk[i] * kk[i] + kk[j] * kk[j] + kk[k] * kk[k]);
                }
            }
        }
        let coulomb = k2.iter().map(|&q| truncated_coulomb_symbol(q, cutoff)).collect();
        Self {
            grid,
            fft: Fft3::new(n),
            k2,
            coulomb,
        }
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }

    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    pub fn transform(&self, f: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut data);
        data
    }

    /// Forward transforms of two real arrays at the cost of one complex FFT.
    pub fn transform_pair(&self, f: &[f64], g: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.grid.n();
        let mut data: Vec<Complex64> = f.iter().zip(g).map(|(&a, &b)| Complex64::new(a, b)).collect();
        self.fft.forward(&mut data);
        let neg = |m: usize| if m == 0 { 0 } else { n - m };
        let mut fh = vec![Complex64::default(); data.len()];
        let mut gh = vec![Complex64::default(); data.len()];
        for (idx, (a, b)) in fh.iter_mut().zip(gh.iter_mut()).enumerate() {
            let [i, j, k] = self.grid.unravel(idx);
            let x = data[idx];
            let y = data[self.grid.index(neg(i), neg(j), neg(k))].conj();
            *a = 0.5 * (x + y);
            *b = Complex64::new(0.0, -0.5) * (x - y);
        }
        (fh, gh)
    }

    /// Real part of the normalized inverse transform.
    pub fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.fft.inverse(&mut data);
        let scale = 1.0 / self.grid.len() as f64;
        data.into_iter().map(|c| c.re * scale).collect()
    }

    /// `dx³/N Σ w(k) |f̂(k)|²`.
    fn weighted_power(&self, fh: &[Complex64], weight: &[f64]) -> f64 {
        let s: f64 = fh.iter().zip(weight).map(|(c, w)| w * c.norm_sqr()).sum();
        s * self.grid.cell_volume() / self.grid.len() as f64
    }

    pub fn kinetic_from_hat(&self, psi_hat: &[Complex64]) -> f64 {
        self.weighted_power(psi_hat, &self.k2)
    }

    pub fn coulomb_from_hat(&self, rho_hat: &[Complex64]) -> f64 {
        self.weighted_power(rho_hat, &self.coulomb)
    }

    /// `∫ |∇ψ|²` evaluated spectrally.
    pub fn kinetic_energy(&self, psi: &Field3D) -> f64 {
        self.kinetic_from_hat(&self.transform(psi.values()))
    }

    /// `D(ρ, ρ)` with the truncated kernel.
    pub fn coulomb_energy(&self, rho: &Field3D) -> f64 {
        self.coulomb_from_hat(&self.transform(rho.values()))
    }

    /// `-Δψ` from a precomputed transform.
    pub fn neg_laplacian_from_hat(&self, psi_hat: &[Complex64]) -> Vec<f64> {
        let data = psi_hat.iter().zip(&self.k2).map(|(c, k)| c * k).collect();
        self.inverse_real(data)
    }

    /// Potential `Φ = G * ρ` from a precomputed transform of `ρ`.
    pub fn coulomb_potential_from_hat(&self, rho_hat: &[Complex64]) -> Vec<f64> {
        let data = rho_hat.iter().zip(&self.coulomb).map(|(c, g)| c * g).collect();
        self.inverse_real(data)
    }

    pub fn coulomb_potential(&self, rho: &Field3D) -> Field3D {
        let values = self.coulomb_potential_from_hat(&self.transform(rho.values()));
        Field3D::from_vec_unchecked(self.grid, values)
    }

    /// Applies `(-Δ + shift)⁻¹` to the transform of `f`.
    pub fn precondition_hat(&self, fh: &[Complex64], shift: f64) -> Vec<Complex64> {
        fh.iter().zip(&self.k2).map(|(c, k)| c / (k + shift)).collect()
    }

    /// `∫ conj(f) (-Δ+s)⁻¹ g` from transforms.
    pub fn preconditioned_pairing(&self, fh: &[Complex64], gh: &[Complex64], shift: f64) -> f64 {
        let s: f64 = fh
            .iter()
            .zip(gh)
            .zip(&self.k2)
            .map(|((a, b), k)| (a.conj() * b).re / (k + shift))
            .sum();
        s * self.grid.cell_volume() / self.grid.len() as f64
    }

    /// Continuous translation `f(x - a)` of a band-limited field via phase shift.
    pub fn translate(&self, f: &Field3D, shift: [f64; 3]) -> Field3D {
        let n = self.grid.n();
        let l = self.grid.length();
        let mut fh = self.transform(f.values());
        let kk: Vec<f64> = (0..n).map(|m| wavenumber(m, n, l)).collect();
        let half = n / 2;
        for (idx, c) in fh.iter_mut().enumerate() {
            let [i, j, k] = self.grid.unravel(idx);
            // Nyquist bins carry no well-defined phase for real fields
            if i == half || j == half || k == half {
                let phase = kk[i] * shift[0] * f64::from(i != half)
                    + kk[j] * shift[1] * f64::from(j != half)
                    + kk[k] * shift[2] * f64::from(k != half);
                let cosines = [(i, 0), (j, 1), (k, 2)]
                    .iter()
                    .filter(|(m, _)| *m == half)
                    .map(|&(_, a)| (PI * n as f64 / l * shift[a]).cos())
                    .product::<f64>();
                *c *= Complex64::from_polar(cosines, -phase);
            } else {
                let phase = kk[i] * shift[0] + kk[j] * shift[1] + kk[k] * shift[2];
                *c *= Complex64::from_polar(1.0, -phase);
            }
        }
        Field3D::from_vec_unchecked(self.grid, self.inverse_real(fh))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_roundtrip_and_delta() {
        let g = Grid3D::new(8, 1.0).unwrap();
        let fft = Fft3::new(8);
        let mut data = vec![Complex64::default(); g.len()];
        data[0] = Complex64::new(1.0, 0.0);
        fft.forward(&mut data);
        for c in &data {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
        fft.inverse(&mut data);
        assert!((data[0].re - 512.0).abs() < 1e-10);
        assert!(data[1..].iter().all(|c| c.norm() < 1e-10));
    }

    #[test]
    fn fft_matches_direct_dft_on_one_mode() {
        let n = 8;
        let g = Grid3D::new(n, 1.0).unwrap();
        let fft = Fft3::new(n);
        let (a, b, c) = (1usize, 2usize, 3usize);
        let mut data: Vec<Complex64> = (0..g.len())
            .map(|idx| {
                let [i, j, k] = g.unravel(idx);
                let t = 2.0 * PI * ((a * i + b * j + c * k) as f64) / n as f64;
                Complex64::new(t.cos(), t.sin())
            })
            .collect();
        fft.forward(&mut data);
        let peak = g.index(a, b, c);
        assert!((data[peak].re - g.len() as f64).abs() < 1e-9);
        for (idx, v) in data.iter().enumerate() {
            if idx != peak {
                assert!(v.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn pair_transform_matches_separate() {
        let g = Grid3D::new(8, 3.0).unwrap();
        let ops = SpectralOps::new(g);
        let f = Field3D::from_fn(g, |x| (x[0] - 0.3).sin() + x[1] * x[2]);
        let h = Field3D::from_fn(g, |x| (-(x[0] * x[0] + x[2])).exp());
        let (fh, hh) = ops.transform_pair(f.values(), h.values());
        let fh2 = ops.transform(f.values());
        let hh2 = ops.transform(h.values());
        for i in 0..g.len() {
            assert!((fh[i] - fh2[i]).norm() < 1e-10);
            assert!((hh[i] - hh2[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn coulomb_symbol_is_continuous_at_zero() {
        let c = 3.0;
        let near = truncated_coulomb_symbol(1e-8, c);
        assert!((near - truncated_coulomb_symbol(0.0, c)).abs() / near < 1e-6);
    }

    #[test]
    fn spectral_shift_by_whole_cells_matches_roll() {
        let g = Grid3D::new(16, 8.0).unwrap();
        let ops = SpectralOps::new(g);
        let f = Field3D::from_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2])).exp());
        let a = ops.translate(&f, [2.0 * g.dx(), -g.dx(), 0.0]);
        let b = f.translate_cells([2, -1, 0]);
        for (u, v) in a.values().iter().zip(b.values()) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
