//! Density, velocity field, quantum potential and spin vector of a state.

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fields::{ComplexField, Grid, PhysicalParams, SpinorField};
use crate::spectral::Spectral;

/// Relative density below which velocities and Q are not defined.
pub const DENSITY_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MadelungView {
    pub grid: Grid,
    pub density: Vec<f64>,
    /// One vector per axis.
    pub velocity: Vec<Vec<f64>>,
    pub quantum_potential: Vec<f64>,
    pub valid: Vec<bool>,
}

impl MadelungView {
    pub fn from_spinor(state: &SpinorField, params: &PhysicalParams) -> Self {
        let spectral = Spectral::new(&state.grid);
        Self::with_spectral(&spectral, state, params)
    }

    pub fn with_spectral(spectral: &Spectral, state: &SpinorField, params: &PhysicalParams) -> Self {
        Self::build(spectral, state, params, true)
    }

    /// Density and velocity only; `quantum_potential` is left empty.
    pub fn kinematic(spectral: &Spectral, state: &SpinorField, params: &PhysicalParams) -> Self {
        Self::build(spectral, state, params, false)
    }

    fn build(spectral: &Spectral, state: &SpinorField, params: &PhysicalParams, with_q: bool) -> Self {
        let grid = state.grid.clone();
        let d = grid.dims();
        let n = grid.len();
        let density = state.density();
        let rho_max = density.iter().cloned().fold(0.0, f64::max);
        let cut = DENSITY_CUTOFF * rho_max;
        let valid: Vec<bool> = density.iter().map(|r| *r >= cut && *r > 0.0).collect();

        // current j = Σ Im(ψ*∇ψ), ∂ρ and ∂²ρ/2 per axis
        let mut current = vec![vec![0.0; n]; d];
        let mut grad_rho = vec![vec![0.0; n]; d];
        let mut half_curv = vec![vec![0.0; n]; d];
        for comp in &state.components {
            let grad = spectral.gradient(&comp.values);
            for a in 0..d {
                for i in 0..n {
                    let g = comp.values[i].conj() * grad[a][i];
                    current[a][i] += g.im + comp.carrier[a] * comp.values[i].norm_sqr();
                }
                if !with_q {
                    continue;
                }
                let second = spectral.second_derivative(&comp.values, a);
                for i in 0..n {
                    let psi = comp.values[i];
                    let g = psi.conj() * grad[a][i];
                    grad_rho[a][i] += 2.0 * g.re;
                    half_curv[a][i] += (psi.conj() * second[i]).re + grad[a][i].norm_sqr();
                }
            }
        }
        let mut velocity = vec![vec![0.0; n]; d];
        let mut quantum_potential = vec![0.0; if with_q { n } else { 0 }];
        for i in 0..n {
            if !valid[i] {
                continue;
            }
            let r = density[i];
            let mut q = 0.0;
            for a in 0..d {
                let m = params.mass_for_axis(a);
                velocity[a][i] = params.hbar * current[a][i] / (m * r);
                // ∂²√ρ/√ρ = ∂²ρ/2ρ − (∂ρ)²/4ρ²
                q += (half_curv[a][i] / r - grad_rho[a][i].powi(2) / (4.0 * r * r)) / m;
            }
            if with_q {
                quantum_potential[i] = -0.5 * params.hbar * params.hbar * q;
            }
        }
        Self { grid, density, velocity, quantum_potential, valid }
    }

    /// Linear (1D) or bilinear (2D) interpolation of the velocity at `x`.
    pub fn velocity_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let st = stencil(&self.grid, x)?;
        if st.iter().any(|(i, w)| *w > 0.0 && !self.valid[*i]) {
            return Err(SimError::LowDensity { position: x.to_vec() });
        }
        Ok((0..self.grid.dims())
            .map(|a| st.iter().map(|(i, w)| w * self.velocity[a][*i]).sum())
            .collect())
    }
}

/// Interpolation stencil: flat indices and weights around `x`.
pub(crate) fn stencil(grid: &Grid, x: &[f64]) -> Result<Vec<(usize, f64)>> {
    let d = grid.dims();
    if x.len() != d || !x.iter().all(|v| v.is_finite()) {
        return Err(SimError::InvalidArgument(format!("position must have {d} finite components")));
    }
    if !grid.contains(x) {
        return Err(SimError::Domain(format!("position {x:?} outside the grid")));
    }
    let mut lo = [0usize; 2];
    let mut fr = [0.0f64; 2];
    for a in 0..d {
        let ax = grid.axis(a);
        let s = (x[a] - ax.origin) / ax.spacing;
        let i = (s.floor() as usize).min(ax.n - 2);
        lo[a] = i;
        fr[a] = s - i as f64;
    }
    Ok(match d {
        1 => vec![(lo[0], 1.0 - fr[0]), (lo[0] + 1, fr[0])],
        _ => {
            let idx = |i: usize, j: usize| grid.flatten([i, j]);
            vec![
                (idx(lo[0], lo[1]), (1.0 - fr[0]) * (1.0 - fr[1])),
                (idx(lo[0] + 1, lo[1]), fr[0] * (1.0 - fr[1])),
                (idx(lo[0], lo[1] + 1), (1.0 - fr[0]) * fr[1]),
                (idx(lo[0] + 1, lo[1] + 1), fr[0] * fr[1]),
            ]
        }
    })
}

pub fn madelung_decompose(field: &ComplexField, params: &PhysicalParams) -> MadelungView {
    let s = SpinorField { grid: field.grid.clone(), components: vec![field.clone()] };
    MadelungView::from_spinor(&s, params)
}

pub fn scalar_velocity(field: &ComplexField, at: &[f64], params: &PhysicalParams) -> Result<Vec<f64>> {
    madelung_decompose(field, params).velocity_at(at)
}

pub fn spinor_velocity(spinor: &SpinorField, at: &[f64], params: &PhysicalParams) -> Result<Vec<f64>> {
    MadelungView::from_spinor(spinor, params).velocity_at(at)
}

/// Spinor components at `x`, with the carrier applied at the exact point.
pub fn interpolate_spinor(spinor: &SpinorField, x: &[f64]) -> Result<Vec<Complex64>> {
    let st = stencil(&spinor.grid, x)?;
    let rho = spinor.density();
    let rho_max = rho.iter().cloned().fold(0.0, f64::max);
    if st.iter().any(|(i, w)| *w > 0.0 && rho[*i] < DENSITY_CUTOFF * rho_max) {
        return Err(SimError::LowDensity { position: x.to_vec() });
    }
    Ok(spinor
        .components
        .iter()
        .map(|c| {
            let env: Complex64 = st.iter().map(|(i, w)| c.values[*i] * w).sum();
            env * c.carrier_phase(x)
        })
        .collect())
}

/// Unit Bloch vector (s_x, s_y, s_z) of a two-component spinor value, with
/// s = (sinθ sinφ, sinθ cosφ, cosθ).
pub fn bloch_vector(psi: [Complex64; 2]) -> [f64; 3] {
    let rho = psi[0].norm_sqr() + psi[1].norm_sqr();
    let cross = psi[0].conj() * psi[1];
    [2.0 * cross.re / rho, 2.0 * cross.im / rho, (psi[0].norm_sqr() - psi[1].norm_sqr()) / rho]
}

/// Polar angles of a Bloch vector; φ is 0 on the poles.
pub fn spin_angles(s: [f64; 3]) -> (f64, f64) {
    let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    let theta = (s[2] / norm).clamp(-1.0, 1.0).acos();
    let transverse = (s[0] * s[0] + s[1] * s[1]).sqrt();
    let phi = if transverse <= 1e-15 * norm { 0.0 } else { s[0].atan2(s[1]) };
    (theta, if phi == -std::f64::consts::PI { std::f64::consts::PI } else { phi })
}

/// (θ, φ) of the local spin vector of a single spin-½ state at `at`.
pub fn spin_vector(spinor: &SpinorField, at: &[f64]) -> Result<(f64, f64)> {
    if spinor.n_components() != 2 {
        return Err(SimError::InvalidArgument("spin vector needs a two-component spinor".into()));
    }
    let v = interpolate_spinor(spinor, at)?;
    Ok(spin_angles(bloch_vector([v[0], v[1]])))
}

/// The initial spinor direction for polar angles (θ₀, φ₀).
pub fn spin_state(theta0: f64, phi0: f64) -> [Complex64; 2] {
    [
        Complex64::from_polar((theta0 / 2.0).cos(), phi0 / 2.0),
        Complex64::new(0.0, 1.0) * Complex64::from_polar((theta0 / 2.0).sin(), -phi0 / 2.0),
    ]
}
