//! Uniform grids, scalar and spinor fields, physical parameter sets.
//!
//! Fields may carry a *carrier* wavevector per axis: the physical amplitude
//! at `x` is `exp(i k·x) · values[x]`. Carriers let the propagators move the
//! fast linear phase produced by uniform forces (gravity, Stern–Gerlach
//! gradients) out of the sampled envelope, which would otherwise need a grid
//! finer than the de Broglie wavelength of the kick.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub origin: f64,
    pub spacing: f64,
}

impl Axis {
    pub fn new(n: usize, origin: f64, spacing: f64) -> Result<Self> {
        if n < 8 {
            return Err(SimError::InvalidArgument(format!("axis needs at least 8 points, got {n}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() || !origin.is_finite() {
            return Err(SimError::InvalidArgument(format!("axis spacing must be positive, got {spacing}")));
        }
        Ok(Self { n, origin, spacing })
    }

    /// Axis whose point `n/2` sits exactly on zero.
    pub fn centered(n: usize, spacing: f64) -> Result<Self> {
        Self::new(n, -((n / 2) as f64) * spacing, spacing)
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    /// n × spacing (the periodic box length).
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.spacing
    }

    pub fn first(&self) -> f64 {
        self.origin
    }

    pub fn last(&self) -> f64 {
        self.coord(self.n - 1)
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n as i64;
        let dk = 2.0 * PI / self.extent();
        (0..n)
            .map(|j| {
                let m = if j < (n + 1) / 2 { j } else { j - n };
                m as f64 * dk
            })
            .collect()
    }
}

/// A 1D or 2D uniform grid, stored row-major (axis 0 slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn line(axis: Axis) -> Self {
        Self { axes: vec![axis] }
    }

    pub fn plane(a0: Axis, a1: Axis) -> Self {
        Self { axes: vec![a0, a1] }
    }

    pub fn from_axes(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(SimError::InvalidArgument(format!("grids have 1 or 2 axes, got {}", axes.len())));
        }
        Ok(Self { axes })
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    /// Grid indices per axis for a flat index.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        match self.axes.len() {
            1 => [idx, 0],
            _ => [idx / self.axes[1].n, idx % self.axes[1].n],
        }
    }

    pub fn flatten(&self, ij: [usize; 2]) -> usize {
        match self.axes.len() {
            1 => ij[0],
            _ => ij[0] * self.axes[1].n + ij[1],
        }
    }

    /// Physical coordinates of a flat index; unused trailing entries are 0.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let ij = self.unflatten(idx);
        let mut p = [0.0; 2];
        for (d, a) in self.axes.iter().enumerate() {
            p[d] = a.coord(ij[d]);
        }
        p
    }

    /// True if `x` lies within the closed sampled range on every axis.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes.iter().zip(x).all(|(a, &xi)| xi >= a.first() && xi <= a.last())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
    /// Gravitational acceleration per grid axis (potential m·g·x).
    pub gravity: Vec<f64>,
    /// Magnetic moment coupling μ_B.
    pub magneton: f64,
    /// Optional per-axis kinetic masses (two-body grids, configuration space).
    pub axis_masses: Option<Vec<f64>>,
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64) -> Self {
        Self { mass, hbar, gravity: Vec::new(), magneton: 0.0, axis_masses: None }
    }

    pub fn with_gravity(mut self, g: Vec<f64>) -> Self {
        self.gravity = g;
        self
    }

    pub fn with_magneton(mut self, mu: f64) -> Self {
        self.magneton = mu;
        self
    }

    pub fn with_axis_masses(mut self, masses: Vec<f64>) -> Self {
        self.axis_masses = Some(masses);
        self
    }

    pub fn mass_for_axis(&self, axis: usize) -> f64 {
        self.axis_masses
            .as_ref()
            .and_then(|m| m.get(axis).copied())
            .unwrap_or(self.mass)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(SimError::InvalidArgument(format!("mass must be > 0, got {}", self.mass)));
        }
        if !(self.hbar > 0.0) {
            return Err(SimError::InvalidArgument(format!("hbar must be > 0, got {}", self.hbar)));
        }
        if let Some(m) = &self.axis_masses {
            if m.iter().any(|v| !(*v > 0.0)) {
                return Err(SimError::InvalidArgument("axis masses must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Complex amplitudes on a grid, with an optional carrier wavevector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub carrier: Vec<f64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SimError::InvalidArgument(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let carrier = vec![0.0; grid.dims()];
        Ok(Self { grid, values, carrier })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        let carrier = vec![0.0; grid.dims()];
        Self { grid, values: vec![Complex64::new(0.0, 0.0); n], carrier }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let d = grid.dims();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..d])).collect();
        let carrier = vec![0.0; d];
        Self { grid, values, carrier }
    }

    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm2();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(SimError::Normalization { norm2: n2 });
        }
        let s = 1.0 / n2.sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
        Ok(n2)
    }

    pub fn scale(&mut self, s: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn carrier_phase(&self, x: &[f64]) -> Complex64 {
        let ph: f64 = self.carrier.iter().zip(x).map(|(k, xi)| k * xi).sum();
        Complex64::from_polar(1.0, ph)
    }

    /// Physical amplitude at a flat index (carrier applied).
    pub fn physical_value(&self, idx: usize) -> Complex64 {
        let p = self.grid.point(idx);
        self.values[idx] * self.carrier_phase(&p[..self.grid.dims()])
    }

    pub fn physical_values(&self) -> Vec<Complex64> {
        (0..self.values.len()).map(|i| self.physical_value(i)).collect()
    }

    /// Re-express the same physical state with a different carrier.
    pub fn rebase_carrier(&mut self, carrier: &[f64]) {
        let d = self.grid.dims();
        let delta: Vec<f64> = carrier.iter().zip(&self.carrier).map(|(a, b)| a - b).collect();
        if delta.iter().all(|v| *v == 0.0) {
            return;
        }
        for (i, v) in self.values.iter_mut().enumerate() {
            let p = self.grid.point(i);
            let ph: f64 = delta.iter().zip(&p[..d]).map(|(k, x)| k * x).sum();
            *v *= Complex64::from_polar(1.0, -ph);
        }
        self.carrier = carrier.to_vec();
    }

    /// Multiply the physical state by exp(i m v·x / ħ) through the carrier.
    pub fn boost(&mut self, velocity: &[f64], params: &PhysicalParams) {
        for (a, v) in velocity.iter().enumerate().take(self.grid.dims()) {
            self.carrier[a] += params.mass_for_axis(a) * v / params.hbar;
        }
    }
}

/// Multi-component field; all components share one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub grid: Grid,
    pub components: Vec<ComplexField>,
}

impl SpinorField {
    pub fn new(components: Vec<ComplexField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| SimError::InvalidArgument("spinor needs at least one component".into()))?;
        let grid = first.grid.clone();
        if components.iter().any(|c| c.grid != grid) {
            return Err(SimError::InvalidArgument("spinor components must share one grid".into()));
        }
        Ok(Self { grid, components })
    }

    /// Gaussian-profile spinor: `profile` times a constant spin vector.
    pub fn from_profile(profile: &ComplexField, spin: &[Complex64]) -> Self {
        let components = spin
            .iter()
            .map(|s| {
                let mut c = profile.clone();
                c.scale(*s);
                c
            })
            .collect();
        Self { grid: profile.grid.clone(), components }
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn norm2(&self) -> f64 {
        self.components.iter().map(|c| c.norm2()).sum()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm2();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(SimError::Normalization { norm2: n2 });
        }
        let s = Complex64::new(1.0 / n2.sqrt(), 0.0);
        self.components.iter_mut().for_each(|c| c.scale(s));
        Ok(n2)
    }

    pub fn density(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.grid.len()];
        for c in &self.components {
            for (r, v) in rho.iter_mut().zip(&c.values) {
                *r += v.norm_sqr();
            }
        }
        rho
    }
}

/// Normalized Gaussian with linear phase m·v·x/ħ stored explicitly.
pub fn gaussian_packet(
    grid: &Grid,
    center: &[f64],
    sigma0: f64,
    velocity: &[f64],
    params: &PhysicalParams,
) -> Result<ComplexField> {
    params.validate()?;
    let d = grid.dims();
    if center.len() != d || velocity.len() != d {
        return Err(SimError::InvalidArgument(format!(
            "center/velocity must have {d} components"
        )));
    }
    if !(sigma0 > 0.0) {
        return Err(SimError::InvalidArgument(format!("sigma0 must be > 0, got {sigma0}")));
    }
    for (a, axis) in grid.axes().iter().enumerate() {
        if axis.spacing > sigma0 / 4.0 {
            return Err(SimError::Resolution(format!(
                "axis {a}: spacing {} exceeds sigma0/4 = {}",
                axis.spacing,
                sigma0 / 4.0
            )));
        }
        if velocity[a] != 0.0 {
            let lambda = 2.0 * PI * params.hbar / (params.mass_for_axis(a) * velocity[a].abs());
            if axis.spacing > lambda / 4.0 {
                return Err(SimError::Resolution(format!(
                    "axis {a}: spacing {} exceeds de Broglie wavelength/4 = {}",
                    axis.spacing,
                    lambda / 4.0
                )));
            }
        }
        if center[a] - 4.0 * sigma0 < axis.first() || center[a] + 4.0 * sigma0 > axis.last() {
            return Err(SimError::Domain(format!(
                "axis {a}: packet [{}, {}] clipped by grid [{}, {}]",
                center[a] - 4.0 * sigma0,
                center[a] + 4.0 * sigma0,
                axis.first(),
                axis.last()
            )));
        }
    }
    let wavenumber: Vec<f64> = (0..d)
        .map(|a| params.mass_for_axis(a) * velocity[a] / params.hbar)
        .collect();
    let mut field = ComplexField::from_fn(grid.clone(), |x| {
        let mut arg = 0.0;
        let mut phase = 0.0;
        for a in 0..d {
            let dx = x[a] - center[a];
            arg -= dx * dx / (4.0 * sigma0 * sigma0);
            phase += wavenumber[a] * x[a];
        }
        Complex64::from_polar(arg.exp(), phase)
    });
    field.normalize()?;
    Ok(field)
}

pub fn norm2(field: &ComplexField) -> f64 {
    field.norm2()
}

pub fn spinor_norm2(field: &SpinorField) -> f64 {
    field.norm2()
}

/// ⟨x⟩ per axis as a cell-volume Riemann sum.
pub fn expectation_position(field: &ComplexField) -> Result<Vec<f64>> {
    let n2 = field.norm2();
    if (n2 - 1.0).abs() > 1e-6 {
        return Err(SimError::Normalization { norm2: n2 });
    }
    Ok(density_mean(&field.grid, &field.density()))
}

pub(crate) fn density_mean(grid: &Grid, rho: &[f64]) -> Vec<f64> {
    let d = grid.dims();
    let mut acc = vec![0.0; d];
    for (i, r) in rho.iter().enumerate() {
        let p = grid.point(i);
        for a in 0..d {
            acc[a] += p[a] * r;
        }
    }
    acc.iter().map(|v| v * grid.cell_volume()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn silver() -> PhysicalParams {
        PhysicalParams::new(1.8e-25, 1.05e-34)
    }

    #[test]
    fn axis_rejects_bad_input() {
        assert!(Axis::new(4, 0.0, 1.0).is_err());
        assert!(Axis::new(16, 0.0, 0.0).is_err());
        assert!(Axis::new(16, 0.0, -1.0).is_err());
        let a = Axis::new(16, -1.0, 0.25).unwrap();
        assert_eq!(a.extent(), 4.0);
        assert_eq!(a.last(), -1.0 + 15.0 * 0.25);
    }

    #[test]
    fn peak_density_of_static_silver_packet() {
        let sigma0 = 1e-4;
        let grid = Grid::line(Axis::centered(1024, sigma0 / 40.0).unwrap());
        let f = gaussian_packet(&grid, &[0.0], sigma0, &[0.0], &silver()).unwrap();
        let peak = f.values[512].norm_sqr();
        let expected = (2.0 * PI * sigma0 * sigma0).powf(-0.5);
        assert!((peak / expected - 1.0).abs() < 1e-12, "{peak} vs {expected}");
        assert!((f.norm2() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stored_phase_step_matches_momentum() {
        let p = PhysicalParams::new(1.8e-25, 1.05e-34);
        // λ = 2πħ/(mv) ≈ 3.7e-9 m for v = 1 m/s
        let dx = 2.5e-10;
        let grid = Grid::line(Axis::centered(4096, dx).unwrap());
        let f = gaussian_packet(&grid, &[0.0], 1e-7, &[1.0], &p).unwrap();
        let expected = p.mass * 1.0 * dx / p.hbar;
        for i in 2000..2100 {
            let dphi = (f.values[i + 1] / f.values[i]).arg();
            assert!((dphi - expected).abs() < 1e-9, "{dphi} vs {expected}");
        }
    }

    #[test]
    fn resolution_and_domain_errors() {
        let p = silver();
        let grid = Grid::line(Axis::centered(64, 1e-5).unwrap());
        assert!(matches!(
            gaussian_packet(&grid, &[0.0], 1e-5, &[0.0], &p),
            Err(SimError::Resolution(_))
        ));
        assert!(matches!(
            gaussian_packet(&grid, &[0.0], 1e-4, &[1.0], &p),
            Err(SimError::Resolution(_))
        ));
        assert!(matches!(
            gaussian_packet(&grid, &[2.5e-4], 1e-4, &[0.0], &p),
            Err(SimError::Domain(_))
        ));
    }

    #[test]
    fn scaling_by_two_quadruples_norm() {
        let grid = Grid::line(Axis::centered(256, 0.05).unwrap());
        let mut f = gaussian_packet(&grid, &[0.3], 1.0, &[0.0], &PhysicalParams::new(1.0, 1.0)).unwrap();
        let before = norm2(&f);
        f.scale(Complex64::new(2.0, 0.0));
        assert!((norm2(&f) - 4.0 * before).abs() < 1e-12);
    }

    #[test]
    fn separated_two_slit_superposition_normalizes() {
        let grid = Grid::line(Axis::centered(2048, 0.01).unwrap());
        let p = PhysicalParams::new(1.0, 1.0);
        let a = gaussian_packet(&grid, &[-5.0], 0.5, &[0.0], &p).unwrap();
        let b = gaussian_packet(&grid, &[5.0], 0.5, &[0.0], &p).unwrap();
        let sum: Vec<_> = a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect();
        let mut f = ComplexField::new(grid, sum).unwrap();
        // quadrature of |ψA+ψB|² = 2 + 2 Re⟨A|B⟩, overlap negligible here
        assert!((f.norm2() - 2.0).abs() < 1e-12);
        f.normalize().unwrap();
        assert!((f.norm2() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expectation_position_basics() {
        let grid = Grid::line(Axis::centered(512, 0.05).unwrap());
        let p = PhysicalParams::new(1.0, 1.0);
        let f = gaussian_packet(&grid, &[0.0], 1.0, &[0.0], &p).unwrap();
        assert!(expectation_position(&f).unwrap()[0].abs() < 0.05 / 100.0);
        let g = gaussian_packet(&grid, &[1.7], 1.0, &[0.0], &p).unwrap();
        assert!((expectation_position(&g).unwrap()[0] - 1.7).abs() < 1e-12);
        let mut h = g.clone();
        h.scale(Complex64::new(1.1, 0.0));
        assert!(matches!(expectation_position(&h), Err(SimError::Normalization { .. })));
    }

    #[test]
    fn static_packet_is_real_positive() {
        let grid = Grid::plane(Axis::centered(64, 0.25).unwrap(), Axis::centered(64, 0.25).unwrap());
        let f = gaussian_packet(&grid, &[0.5, -0.5], 1.5, &[0.0, 0.0], &PhysicalParams::new(1.0, 1.0)).unwrap();
        assert!(f.values.iter().all(|v| v.im == 0.0 && v.re > 0.0));
    }

    #[test]
    fn rebase_carrier_preserves_physical_values() {
        let grid = Grid::line(Axis::centered(128, 0.1).unwrap());
        let p = PhysicalParams::new(1.0, 1.0);
        let f = gaussian_packet(&grid, &[0.0], 1.0, &[2.0], &p).unwrap();
        let mut g = f.clone();
        g.rebase_carrier(&[2.0]);
        for i in 0..128 {
            assert!((f.physical_value(i) - g.physical_value(i)).norm() < 1e-12);
        }
        // the envelope left behind is real
        assert!(g.values.iter().all(|v| v.im.abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn norm_is_phase_invariant(theta in -10.0f64..10.0, c in -2.0f64..2.0) {
            let grid = Grid::line(Axis::centered(256, 0.05).unwrap());
            let p = PhysicalParams::new(1.0, 1.0);
            let f = gaussian_packet(&grid, &[c], 0.7, &[0.5], &p).unwrap();
            let mut g = f.clone();
            g.scale(Complex64::from_polar(1.0, theta));
            prop_assert!((g.norm2() - f.norm2()).abs() < 1e-14);
        }

        #[test]
        fn expectation_shifts_by_one_cell(shift in 1usize..20) {
            let grid = Grid::line(Axis::centered(256, 0.05).unwrap());
            let p = PhysicalParams::new(1.0, 1.0);
            let f = gaussian_packet(&grid, &[-1.0], 0.7, &[0.0], &p).unwrap();
            let mut g = f.clone();
            g.values.rotate_right(shift);
            let a = expectation_position(&f).unwrap()[0];
            let b = expectation_position(&g).unwrap()[0];
            prop_assert!((b - a - shift as f64 * 0.05).abs() < 1e-12);
        }
    }
}
