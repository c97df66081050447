//! Closed-form reference solutions.
//!
//! Nothing here calls into the propagators or the Madelung layer; the
//! functions sample analytic expressions directly so they can serve as
//! independent checks.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fields::{ComplexField, Grid, SpinorField};

/// Free-falling Gaussian packet and its pilot-wave trajectories. Axes are
/// (x, y, z) with gravity acting along −z; unused axes can be ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGravityPacket {
    pub sigma0: [f64; 3],
    pub center: [f64; 3],
    /// Initial particle position (x_G(0), y_G(0), z_G(0)).
    pub start: [f64; 3],
    pub v0: [f64; 3],
    pub g: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl GaussianGravityPacket {
    pub fn sigma_hbar(&self, axis: usize, t: f64) -> f64 {
        let s = self.sigma0[axis];
        s * (1.0 + (self.hbar * t / (2.0 * self.mass * s * s)).powi(2)).sqrt()
    }

    pub fn with_start(&self, start: [f64; 3]) -> Self {
        Self { start, ..self.clone() }
    }
}

pub fn gravity_packet_trajectory(p: &GaussianGravityPacket, t: f64) -> Result<[f64; 3]> {
    if !(t >= 0.0) {
        return Err(SimError::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let mut out = [0.0; 3];
    for a in 0..3 {
        let spread = 1.0 - p.sigma_hbar(a, t) / p.sigma0[a];
        out[a] = p.start[a] + p.v0[a] * t + (p.center[a] - p.start[a]) * spread;
    }
    out[2] -= 0.5 * p.g * t * t;
    Ok(out)
}

/// Harmonic-oscillator coherent state of width σ_h = √(ħ/2mω).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentState {
    pub omega: f64,
    pub mass: f64,
    pub hbar: f64,
    pub x0: f64,
}

impl CoherentState {
    pub fn sigma_h(&self) -> f64 {
        (self.hbar / (2.0 * self.mass * self.omega)).sqrt()
    }

    pub fn center(&self, t: f64) -> f64 {
        self.x0 * (self.omega * t).cos()
    }

    pub fn velocity(&self, t: f64) -> f64 {
        -self.x0 * self.omega * (self.omega * t).sin()
    }

    /// False when x0 is not large against σ_h (the packet then sits on many
    /// low eigenstates; the formula still holds).
    pub fn in_classical_regime(&self) -> bool {
        self.x0.abs() >= 5.0 * self.sigma_h()
    }
}

/// Sample the coherent state at time `t`. The phase includes the global
/// time factor exp(−iωt/2 − i m v(t) x(t)/2ħ) so the result is the exact
/// solution of the oscillator equation; at t = 0 it is the real Gaussian.
pub fn coherent_state_field(c: &CoherentState, t: f64, grid: &Grid) -> Result<ComplexField> {
    if grid.dims() != 1 {
        return Err(SimError::InvalidArgument("coherent state is one-dimensional".into()));
    }
    let s = c.sigma_h();
    if grid.axis(0).spacing > s / 4.0 {
        return Err(SimError::Resolution(format!(
            "spacing {} exceeds sigma_h/4 = {}",
            grid.axis(0).spacing,
            s / 4.0
        )));
    }
    let (xc, v) = (c.center(t), c.velocity(t));
    let k = c.mass * v / c.hbar;
    let global = -0.5 * c.omega * t - 0.5 * k * xc;
    let amp = (2.0 * PI * s * s).powf(-0.25);
    Ok(ComplexField::from_fn(grid.clone(), |x| {
        let d = x[0] - xc;
        Complex64::from_polar(amp * (-d * d / (4.0 * s * s)).exp(), k * x[0] + global)
    }))
}

/// Parameters of the magnet kick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickParams {
    pub mass: f64,
    pub hbar: f64,
    pub magneton: f64,
    pub gradient: f64,
    /// Time spent inside the field.
    pub duration: f64,
    pub sigma0: f64,
}

impl KickParams {
    /// Offset of each spin packet at field exit, μ_B B′₀ Δt²/2m.
    pub fn z_delta(&self) -> f64 {
        self.magneton * self.gradient * self.duration * self.duration / (2.0 * self.mass)
    }

    /// Transverse speed gained in the field, μ_B B′₀ Δt/m.
    pub fn u(&self) -> f64 {
        self.magneton * self.gradient * self.duration / self.mass
    }
}

/// Spinor `t` after leaving the magnet: up and down packets of width σ₀ at
/// ±(z_Δ + u t) with momenta ±m u, weights cos(θ₀/2) and i sin(θ₀/2), and
/// both constant phases set to zero. z is the last grid axis; on a 2D grid
/// axis 0 is x and carries a centred Gaussian of the same width. The
/// momentum kick is stored as each component's carrier.
pub fn postmagnet_spinor(theta0: f64, t: f64, grid: &Grid, p: &KickParams) -> Result<SpinorField> {
    if !(t >= 0.0) {
        return Err(SimError::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let d = grid.dims();
    let zaxis = grid.axis(d - 1);
    let shift = p.z_delta() + p.u() * t;
    if -shift - 4.0 * p.sigma0 < zaxis.first() || shift + 4.0 * p.sigma0 > zaxis.last() {
        return Err(SimError::Domain(format!(
            "packets at ±{shift} with 4σ0 tails leave the z range [{}, {}]",
            zaxis.first(),
            zaxis.last()
        )));
    }
    let s2 = p.sigma0 * p.sigma0;
    let norm = (2.0 * PI * s2).powf(-0.25 * d as f64);
    let k = p.mass * p.u() / p.hbar;
    let make = |sign: f64, weight: Complex64| {
        let mut f = ComplexField::from_fn(grid.clone(), |x| {
            let z = x[d - 1] - sign * shift;
            let r2 = z * z + if d == 2 { x[0] * x[0] } else { 0.0 };
            weight * norm * (-r2 / (4.0 * s2)).exp()
        });
        f.carrier[d - 1] = sign * k;
        f
    };
    let up = make(1.0, Complex64::new((theta0 / 2.0).cos(), 0.0));
    let down = make(-1.0, Complex64::new(0.0, (theta0 / 2.0).sin()));
    SpinorField::new(vec![up, down])
}

pub fn de_broglie_wavelength(mass: f64, speed: f64, hbar: f64) -> f64 {
    2.0 * PI * hbar / (mass * speed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeEstimate {
    pub spacing: f64,
    /// False unless L ≫ d ≫ λ (each ratio at least 10).
    pub regime_ok: bool,
}

/// Far-field two-slit fringe spacing λL/d.
pub fn fringe_spacing(lambda: f64, slit_separation: f64, distance: f64) -> FringeEstimate {
    FringeEstimate {
        spacing: lambda * distance / slit_separation,
        regime_ok: distance >= 10.0 * slit_separation && slit_separation >= 10.0 * lambda,
    }
}

/// Singlet (|+−⟩ − |−+⟩)/√2 in the component order ++, +−, −+, −−.
pub fn singlet() -> [Complex64; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [Complex64::new(0.0, 0.0), Complex64::new(h, 0.0), Complex64::new(-h, 0.0), Complex64::new(0.0, 0.0)]
}

/// σ·n for n = (sin a, 0, cos a).
fn spin_along(a: f64) -> [[f64; 2]; 2] {
    let (s, c) = a.sin_cos();
    [[c, s], [s, -c]]
}

/// Born-rule joint outcome probabilities P(s_A, s_B) for measurements along
/// angles `a` and `b` in the x–z plane, indexed [A up/down][B up/down].
pub fn joint_probabilities(psi: &[Complex64; 4], a: f64, b: f64) -> [[f64; 2]; 2] {
    let proj = |angle: f64, sign: f64| {
        let m = spin_along(angle);
        [
            [0.5 * (1.0 + sign * m[0][0]), 0.5 * sign * m[0][1]],
            [0.5 * sign * m[1][0], 0.5 * (1.0 + sign * m[1][1])],
        ]
    };
    let mut out = [[0.0; 2]; 2];
    for (ia, sa) in [1.0, -1.0].into_iter().enumerate() {
        for (ib, sb) in [1.0, -1.0].into_iter().enumerate() {
            let pa = proj(a, sa);
            let pb = proj(b, sb);
            // ⟨ψ|P_A ⊗ P_B|ψ⟩ with index = 2·i_A + i_B
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..4 {
                for c in 0..4 {
                    let m = pa[r >> 1][c >> 1] * pb[r & 1][c & 1];
                    acc += psi[r].conj() * m * psi[c];
                }
            }
            out[ia][ib] = acc.re;
        }
    }
    out
}

/// E(a, b) = P(++) + P(−−) − P(+−) − P(−+).
pub fn spin_correlation(psi: &[Complex64; 4], a: f64, b: f64) -> f64 {
    let p = joint_probabilities(psi, a, b);
    p[0][0] + p[1][1] - p[0][1] - p[1][0]
}

/// CHSH combination E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′).
pub fn chsh(e: impl Fn(f64, f64) -> f64, a: f64, a2: f64, b: f64, b2: f64) -> f64 {
    e(a, b) - e(a, b2) + e(a2, b) + e(a2, b2)
}
