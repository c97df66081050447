//! Strang split-operator stepping for scalar and spinor fields.
//!
//! One step over `[t, t + dt]` is
//! `L(dt/2) · K(dt) · L(dt/2)` where `L` is the cell-local part (nonlinear
//! scalar potential plus the exact SU(2) exponential of the magnetic term)
//! and `K` is the spectral kinetic propagator. Linear potentials, including
//! the diagonal gradient part of a Stern–Gerlach field, are removed exactly by
//! a per-component moving momentum frame: the carrier wavevector drifts as
//! `dk/dt = F/ħ` and `K` integrates `(q + k(t))²` in closed form.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fields::{ComplexField, Grid, PhysicalParams, SpinorField};
use crate::propagators::potential::{MagneticField, Potential};
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Periodic,
    /// Cosine-ramp mask over `width` cells at every edge; each step
    /// multiplies by `1 − strength·sin²(π/2 · depth)`.
    Absorbing { width: usize, strength: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub boundary: Boundary,
}

impl StepConfig {
    pub fn periodic(dt: f64) -> Self {
        Self { dt, boundary: Boundary::Periodic }
    }
}

/// Where a spin-½ particle lives on the grid. Particle `p` of `P` owns
/// bit `P − 1 − p` of the component index; bit value 0 is spin up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSlot {
    pub z_axis: usize,
    pub x_axis: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpinLayout {
    pub slots: Vec<SpinSlot>,
}

impl SpinLayout {
    pub fn scalar() -> Self {
        Self { slots: Vec::new() }
    }

    pub fn single_z(z_axis: usize) -> Self {
        Self { slots: vec![SpinSlot { z_axis, x_axis: None }] }
    }

    pub fn single_xz(x_axis: usize, z_axis: usize) -> Self {
        Self { slots: vec![SpinSlot { z_axis, x_axis: Some(x_axis) }] }
    }

    pub fn pair(z_axis_a: usize, z_axis_b: usize) -> Self {
        Self {
            slots: vec![
                SpinSlot { z_axis: z_axis_a, x_axis: None },
                SpinSlot { z_axis: z_axis_b, x_axis: None },
            ],
        }
    }

    pub fn n_components(&self) -> usize {
        1 << self.slots.len()
    }

    pub fn bit(&self, particle: usize) -> usize {
        1 << (self.slots.len() - 1 - particle)
    }

    /// +1 for spin up of `particle` in component `c`, −1 for down.
    pub fn spin_sign(&self, c: usize, particle: usize) -> f64 {
        if c & self.bit(particle) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// (up, down) component index pairs for `particle`.
    pub fn pairs(&self, particle: usize) -> Vec<(usize, usize)> {
        let b = self.bit(particle);
        (0..self.n_components()).filter(|c| c & b == 0).map(|c| (c, c | b)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedField {
    pub particle: usize,
    pub field: MagneticField,
}

type KineticCache = Option<(Vec<f64>, Vec<f64>, Vec<Complex64>)>;

pub struct SplitStepper {
    spectral: Spectral,
    params: PhysicalParams,
    cfg: StepConfig,
    layout: SpinLayout,
    fields: Vec<AppliedField>,
    half_local: Vec<Complex64>,
    linear_force: Vec<f64>,
    mask: Option<Vec<f64>>,
    cache: Vec<KineticCache>,
    scratch: Vec<Complex64>,
}

impl SplitStepper {
    pub fn new(
        grid: &Grid,
        potential: &Potential,
        params: &PhysicalParams,
        cfg: StepConfig,
        layout: SpinLayout,
        fields: Vec<AppliedField>,
    ) -> Result<Self> {
        params.validate()?;
        if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
            return Err(SimError::StepSize(format!("dt must be positive, got {}", cfg.dt)));
        }
        for f in &fields {
            if f.particle >= layout.slots.len() {
                return Err(SimError::InvalidArgument(format!("field acts on missing particle {}", f.particle)));
            }
        }
        for s in &layout.slots {
            if s.z_axis >= grid.dims() || s.x_axis.is_some_and(|x| x >= grid.dims()) {
                return Err(SimError::InvalidArgument("spin slot axis outside grid".into()));
            }
        }
        let w = potential.sample_nonlinear(grid)?;
        let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let wrap = (hi - lo) * cfg.dt / params.hbar;
        if wrap >= FRAC_PI_4 {
            return Err(SimError::StepSize(format!(
                "potential phase spread per step {wrap:.3} rad exceeds π/4"
            )));
        }
        let half_local = w
            .iter()
            .map(|v| Complex64::from_polar(1.0, -v * cfg.dt / (2.0 * params.hbar)))
            .collect();
        let linear_force = potential.linear_coeffs(grid.dims()).iter().map(|c| -c).collect();
        let mask = match cfg.boundary {
            Boundary::Periodic => None,
            Boundary::Absorbing { width, strength } => Some(absorbing_mask(grid, width, strength)?),
        };
        let nc = layout.n_components();
        Ok(Self {
            spectral: Spectral::new(grid),
            params: params.clone(),
            cfg,
            layout,
            fields,
            half_local,
            linear_force,
            mask,
            cache: vec![None; nc],
            scratch: vec![Complex64::new(0.0, 0.0); grid.len()],
        })
    }

    /// Scalar stepper (one component, no magnetic fields).
    pub fn scalar(grid: &Grid, potential: &Potential, params: &PhysicalParams, cfg: StepConfig) -> Result<Self> {
        Self::new(grid, potential, params, cfg, SpinLayout::scalar(), Vec::new())
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt
    }

    pub fn layout(&self) -> &SpinLayout {
        &self.layout
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    /// Total force on component `c` during a step whose midpoint is `tm`.
    fn force(&self, c: usize, tm: f64) -> Vec<f64> {
        let mut f = self.linear_force.clone();
        for af in &self.fields {
            if af.field.is_active(tm) {
                let slot = self.layout.slots[af.particle];
                f[slot.z_axis] += self.layout.spin_sign(c, af.particle) * self.params.magneton * af.field.gradient;
            }
        }
        f
    }

    pub fn step(&mut self, state: &mut SpinorField, t: f64) -> Result<()> {
        if state.n_components() != self.layout.n_components() {
            return Err(SimError::InvalidArgument(format!(
                "stepper expects {} components, state has {}",
                self.layout.n_components(),
                state.n_components()
            )));
        }
        if state.grid != *self.spectral.grid() {
            return Err(SimError::InvalidArgument("state grid differs from stepper grid".into()));
        }
        let dt = self.cfg.dt;
        let tm = t + 0.5 * dt;
        self.local_half(state, tm);
        for c in 0..state.n_components() {
            let force = self.force(c, tm);
            self.kinetic(&mut state.components[c], c, &force);
        }
        self.local_half(state, tm);
        if let Some(mask) = &self.mask {
            for comp in &mut state.components {
                comp.values.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
            }
        }
        let n = state.norm2();
        if !n.is_finite() {
            return Err(SimError::NumericalBlowup { time: t + dt });
        }
        Ok(())
    }

    fn kinetic(&mut self, comp: &mut ComplexField, c: usize, force: &[f64]) {
        let dt = self.cfg.dt;
        let hbar = self.params.hbar;
        let d = comp.grid.dims();
        let hit = matches!(&self.cache[c], Some((k, f, _)) if k == &comp.carrier && f == force);
        if !hit {
            let masses: Vec<f64> = (0..d).map(|a| self.params.mass_for_axis(a)).collect();
            let carrier = comp.carrier.clone();
            let accel: Vec<f64> = force.iter().map(|f| f / hbar).collect();
            let mut factor = vec![Complex64::new(1.0, 0.0); comp.values.len()];
            for (idx, v) in factor.iter_mut().enumerate() {
                let ij = comp.grid.unflatten(idx);
                let mut phase = 0.0;
                for a in 0..d {
                    let q = self.spectral.wavenumbers(a)[ij[a]] + carrier[a];
                    let al = accel[a];
                    let integral = q * q * dt + q * al * dt * dt + al * al * dt * dt * dt / 3.0;
                    phase -= hbar / (2.0 * masses[a]) * integral;
                }
                *v = Complex64::from_polar(1.0, phase);
            }
            self.cache[c] = Some((carrier, force.to_vec(), factor));
        }
        let factor = &self.cache[c].as_ref().unwrap().2;
        self.scratch.copy_from_slice(&comp.values);
        self.spectral.forward(&mut self.scratch);
        self.scratch.iter_mut().zip(factor).for_each(|(v, f)| *v *= f);
        self.spectral.inverse(&mut self.scratch);
        comp.values.copy_from_slice(&self.scratch);
        for (k, f) in comp.carrier.iter_mut().zip(force) {
            *k += f / hbar * dt;
        }
    }

    fn local_half(&self, state: &mut SpinorField, tm: f64) {
        for comp in &mut state.components {
            comp.values.iter_mut().zip(&self.half_local).for_each(|(v, p)| *v *= p);
        }
        let half = 0.5 * self.cfg.dt;
        for af in &self.fields {
            if !af.field.is_active(tm) {
                continue;
            }
            let slot = self.layout.slots[af.particle];
            let coupling = self.params.magneton * half / self.params.hbar;
            for (up, dn) in self.layout.pairs(af.particle) {
                apply_cell_su2(state, up, dn, |p| {
                    let x = slot.x_axis.map(|a| p[a]).unwrap_or(0.0);
                    // the −B′₀ z part of B_z is carried by the momentum frame
                    [af.field.gradient * x, 0.0, af.field.b0]
                }, coupling);
            }
        }
    }
}

/// Apply exp(−i·coupling·B(x)·σ) cell by cell to the (up, dn) pair.
fn apply_cell_su2(
    state: &mut SpinorField,
    up: usize,
    dn: usize,
    b_at: impl Fn(&[f64; 2]) -> [f64; 3],
    coupling: f64,
) {
    let grid = state.grid.clone();
    let d = grid.dims();
    let (lo, hi) = state.components.split_at_mut(dn);
    let cu = &mut lo[up];
    let cd = &mut hi[0];
    let same_carrier = cu.carrier == cd.carrier;
    for idx in 0..grid.len() {
        let p = grid.point(idx);
        let b = b_at(&p);
        let u = su2_exponential(b, coupling);
        if u[0][1] == Complex64::new(0.0, 0.0) {
            cu.values[idx] *= u[0][0];
            cd.values[idx] *= u[1][1];
            continue;
        }
        // off-diagonal mixing sees the carrier phase difference
        let rel = if same_carrier {
            Complex64::new(1.0, 0.0)
        } else {
            let ph: f64 = (0..d).map(|a| (cd.carrier[a] - cu.carrier[a]) * p[a]).sum();
            Complex64::from_polar(1.0, ph)
        };
        let a = cu.values[idx];
        let bb = cd.values[idx] * rel;
        let na = u[0][0] * a + u[0][1] * bb;
        let nb = u[1][0] * a + u[1][1] * bb;
        cu.values[idx] = na;
        cd.values[idx] = nb * rel.conj();
    }
}

/// exp(−i θ n·σ) with θ n = coupling · B.
pub fn su2_exponential(b: [f64; 3], coupling: f64) -> [[Complex64; 2]; 2] {
    let mag = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    let theta = coupling * mag;
    if mag == 0.0 {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        return [[one, zero], [zero, one]];
    }
    let (nx, ny, nz) = (b[0] / mag, b[1] / mag, b[2] / mag);
    let (s, c) = theta.sin_cos();
    let i = Complex64::new(0.0, 1.0);
    // n·σ = [[nz, nx − i ny], [nx + i ny, −nz]]
    [
        [Complex64::new(c, 0.0) - i * s * nz, -i * s * Complex64::new(nx, -ny)],
        [-i * s * Complex64::new(nx, ny), Complex64::new(c, 0.0) + i * s * nz],
    ]
}

fn absorbing_mask(grid: &Grid, width: usize, strength: f64) -> Result<Vec<f64>> {
    for a in grid.axes() {
        if 4 * width >= a.n {
            return Err(SimError::InvalidArgument(format!(
                "absorbing width {width} must be < n/4 = {}",
                a.n / 4
            )));
        }
    }
    if !(0.0..=1.0).contains(&strength) {
        return Err(SimError::InvalidArgument(format!("absorbing strength must be in [0, 1], got {strength}")));
    }
    let axis_mask = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let edge = i.min(n - 1 - i);
                if width == 0 || edge >= width {
                    1.0
                } else {
                    let depth = (width - edge) as f64 / width as f64;
                    1.0 - strength * (std::f64::consts::FRAC_PI_2 * depth).sin().powi(2)
                }
            })
            .collect()
    };
    let masks: Vec<Vec<f64>> = grid.axes().iter().map(|a| axis_mask(a.n)).collect();
    Ok((0..grid.len())
        .map(|idx| {
            let ij = grid.unflatten(idx);
            masks.iter().enumerate().map(|(a, m)| m[ij[a]]).product()
        })
        .collect())
}

/// Rotate the spin basis of `particle` by R_y(−angle), so a subsequent
/// z-gradient measures spin along (sin a, 0, cos a).
pub fn rotate_spin_basis(state: &mut SpinorField, layout: &SpinLayout, particle: usize, angle: f64) {
    let (s, c) = (0.5 * angle).sin_cos();
    let u = [
        [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
        [Complex64::new(-s, 0.0), Complex64::new(c, 0.0)],
    ];
    let grid = state.grid.clone();
    let d = grid.dims();
    for (up, dn) in layout.pairs(particle) {
        let (lo, hi) = state.components.split_at_mut(dn);
        let cu = &mut lo[up];
        let cd = &mut hi[0];
        let delta: Vec<f64> = (0..d).map(|a| cd.carrier[a] - cu.carrier[a]).collect();
        for idx in 0..grid.len() {
            let p = grid.point(idx);
            let ph: f64 = (0..d).map(|a| delta[a] * p[a]).sum();
            let rel = Complex64::from_polar(1.0, ph);
            let a = cu.values[idx];
            let b = cd.values[idx] * rel;
            cu.values[idx] = u[0][0] * a + u[0][1] * b;
            cd.values[idx] = (u[1][0] * a + u[1][1] * b) * rel.conj();
        }
    }
}

/// One Strang step of the scalar Schrödinger equation.
pub fn schrodinger_step(
    field: &ComplexField,
    potential: &Potential,
    params: &PhysicalParams,
    cfg: StepConfig,
    t: f64,
) -> Result<ComplexField> {
    let mut stepper = SplitStepper::scalar(&field.grid, potential, params, cfg)?;
    let mut state = SpinorField::new(vec![field.clone()])?;
    stepper.step(&mut state, t)?;
    Ok(state.components.pop().unwrap())
}

/// One Strang step of the Pauli equation for a single spin-½ particle whose
/// gradient axis is the last grid axis (x is axis 0 on 2D grids).
pub fn pauli_step(
    spinor: &SpinorField,
    bfield: &MagneticField,
    potential: &Potential,
    params: &PhysicalParams,
    cfg: StepConfig,
    t: f64,
) -> Result<SpinorField> {
    let layout = match spinor.grid.dims() {
        1 => SpinLayout::single_z(0),
        _ => SpinLayout::single_xz(0, 1),
    };
    let mut stepper = SplitStepper::new(
        &spinor.grid,
        potential,
        params,
        cfg,
        layout,
        vec![AppliedField { particle: 0, field: *bfield }],
    )?;
    let mut state = spinor.clone();
    stepper.step(&mut state, t)?;
    Ok(state)
}
