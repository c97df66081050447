//! FFT plumbing over 1D/2D grids and spectral derivatives.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::fields::Grid;

pub struct Spectral {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    wavenumbers: Vec<Vec<f64>>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.axes().iter().map(|a| planner.plan_fft_forward(a.n)).collect();
        let inverse = grid.axes().iter().map(|a| planner.plan_fft_inverse(a.n)).collect();
        let wavenumbers = grid.axes().iter().map(|a| a.wavenumbers()).collect();
        Self { grid: grid.clone(), forward, inverse, wavenumbers }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the 1/N normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        debug_assert_eq!(data.len(), self.grid.len());
        match self.grid.dims() {
            1 => plans[0].process(data),
            _ => {
                let n0 = self.grid.axis(0).n;
                let n1 = self.grid.axis(1).n;
                // contiguous rows along axis 1
                plans[1].process(data);
                let mut col = vec![Complex64::new(0.0, 0.0); n0];
                let mut scratch = vec![Complex64::new(0.0, 0.0); plans[0].get_inplace_scratch_len()];
                for j in 0..n1 {
                    for i in 0..n0 {
                        col[i] = data[i * n1 + j];
                    }
                    plans[0].process_with_scratch(&mut col, &mut scratch);
                    for i in 0..n0 {
                        data[i * n1 + j] = col[i];
                    }
                }
            }
        }
    }

    /// Multiply a spectrum in place by `f(k)` where `k` holds per-axis wavenumbers.
    pub fn apply_multiplier(&self, spectrum: &mut [Complex64], f: impl Fn(&[f64]) -> Complex64) {
        let d = self.grid.dims();
        for (idx, v) in spectrum.iter_mut().enumerate() {
            let ij = self.grid.unflatten(idx);
            let mut k = [0.0; 2];
            for a in 0..d {
                k[a] = self.wavenumbers[a][ij[a]];
            }
            *v *= f(&k[..d]);
        }
    }

    /// ∂/∂x_a of each axis; the Nyquist mode is dropped for odd derivatives.
    pub fn gradient(&self, values: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut spec = values.to_vec();
        self.forward(&mut spec);
        (0..self.grid.dims())
            .map(|a| {
                let n = self.grid.axis(a).n;
                let mut s = spec.clone();
                let nyq = if n.is_multiple_of(2) { Some(n / 2) } else { None };
                for (idx, v) in s.iter_mut().enumerate() {
                    let j = self.grid.unflatten(idx)[a];
                    if Some(j) == nyq {
                        *v = Complex64::new(0.0, 0.0);
                    } else {
                        *v *= Complex64::new(0.0, self.wavenumbers[a][j]);
                    }
                }
                self.inverse(&mut s);
                s
            })
            .collect()
    }

    /// ∂²/∂x_a² along one axis.
    pub fn second_derivative(&self, values: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut spec = values.to_vec();
        self.forward(&mut spec);
        self.apply_multiplier(&mut spec, |k| Complex64::new(-k[axis] * k[axis], 0.0));
        self.inverse(&mut spec);
        spec
    }

    pub fn laplacian(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut spec = values.to_vec();
        self.forward(&mut spec);
        self.apply_multiplier(&mut spec, |k| {
            Complex64::new(-k.iter().map(|v| v * v).sum::<f64>(), 0.0)
        });
        self.inverse(&mut spec);
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Axis;

    #[test]
    fn derivative_of_gaussian_1d_and_2d() {
        let grid = Grid::line(Axis::centered(256, 0.1).unwrap());
        let sp = Spectral::new(&grid);
        let f: Vec<Complex64> = grid.axis(0).coords().iter().map(|x| Complex64::new((-x * x).exp(), 0.0)).collect();
        let g = &sp.gradient(&f)[0];
        let l = sp.laplacian(&f);
        for (i, x) in grid.axis(0).coords().iter().enumerate() {
            let e = (-x * x).exp();
            assert!((g[i].re + 2.0 * x * e).abs() < 1e-10);
            assert!((l[i].re - (4.0 * x * x - 2.0) * e).abs() < 1e-9);
        }

        let grid2 = Grid::plane(Axis::centered(64, 0.2).unwrap(), Axis::centered(64, 0.3).unwrap());
        let sp2 = Spectral::new(&grid2);
        let f2: Vec<Complex64> = (0..grid2.len())
            .map(|i| {
                let p = grid2.point(i);
                Complex64::new((-(p[0] * p[0]) - 0.5 * p[1] * p[1]).exp(), 0.0)
            })
            .collect();
        let g2 = sp2.gradient(&f2);
        for i in 0..grid2.len() {
            let p = grid2.point(i);
            let e = f2[i].re;
            assert!((g2[0][i].re + 2.0 * p[0] * e).abs() < 1e-9);
            assert!((g2[1][i].re + p[1] * e).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let grid = Grid::plane(Axis::centered(16, 0.1).unwrap(), Axis::centered(8, 0.1).unwrap());
        let sp = Spectral::new(&grid);
        let orig: Vec<Complex64> = (0..grid.len()).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut d = orig.clone();
        sp.forward(&mut d);
        sp.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
