use crate::error::{Result, SimError};
use crate::fields::{Grid, PhysicalParams};

/// Scalar potentials acting on the grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    None,
    Constant(f64),
    /// V = Σ_a c_a x_a. Gravity is `c_a = m_a g_a`.
    Linear { coeffs: Vec<f64> },
    /// V = ½ k |x − c|².
    Harmonic { stiffness: f64, center: Vec<f64> },
    /// Internal pair potential on a (x₁, x₂) grid: U = ½ k (x₁ − x₂ − r₀)².
    PairHarmonic { stiffness: f64, rest: f64 },
    /// Values sampled on the grid the potential is used with.
    Sampled(Vec<f64>),
    Sum(Vec<Potential>),
}

impl Potential {
    /// Linear gravity m_a g_a x_a built from the parameter set.
    pub fn gravity(params: &PhysicalParams) -> Self {
        let coeffs = params
            .gravity
            .iter()
            .enumerate()
            .map(|(a, g)| params.mass_for_axis(a) * g)
            .collect();
        Potential::Linear { coeffs }
    }

    pub fn harmonic(mass: f64, omega: f64, center: Vec<f64>) -> Self {
        Potential::Harmonic { stiffness: mass * omega * omega, center }
    }

    /// Coefficients of the linear part, padded to `dims`.
    pub fn linear_coeffs(&self, dims: usize) -> Vec<f64> {
        let mut out = vec![0.0; dims];
        self.accumulate_linear(&mut out);
        out
    }

    fn accumulate_linear(&self, out: &mut [f64]) {
        match self {
            Potential::Linear { coeffs } => {
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o += c;
                }
            }
            Potential::Sum(parts) => parts.iter().for_each(|p| p.accumulate_linear(out)),
            _ => {}
        }
    }

    /// Full potential on the grid.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let mut out = vec![0.0; grid.len()];
        self.accumulate(grid, &mut out, true)?;
        Ok(out)
    }

    /// Potential with its linear part removed (the part the propagators
    /// apply pointwise).
    pub fn sample_nonlinear(&self, grid: &Grid) -> Result<Vec<f64>> {
        let mut out = vec![0.0; grid.len()];
        self.accumulate(grid, &mut out, false)?;
        Ok(out)
    }

    fn accumulate(&self, grid: &Grid, out: &mut [f64], include_linear: bool) -> Result<()> {
        let d = grid.dims();
        match self {
            Potential::None => {}
            Potential::Constant(c) => out.iter_mut().for_each(|v| *v += c),
            Potential::Linear { coeffs } => {
                if include_linear {
                    for (i, v) in out.iter_mut().enumerate() {
                        let p = grid.point(i);
                        *v += coeffs.iter().zip(&p[..d]).map(|(c, x)| c * x).sum::<f64>();
                    }
                }
            }
            Potential::Harmonic { stiffness, center } => {
                for (i, v) in out.iter_mut().enumerate() {
                    let p = grid.point(i);
                    let r2: f64 = (0..d)
                        .map(|a| {
                            let dx = p[a] - center.get(a).copied().unwrap_or(0.0);
                            dx * dx
                        })
                        .sum();
                    *v += 0.5 * stiffness * r2;
                }
            }
            Potential::PairHarmonic { stiffness, rest } => {
                if d != 2 {
                    return Err(SimError::InvalidArgument("pair potential needs a 2D (x1, x2) grid".into()));
                }
                for (i, v) in out.iter_mut().enumerate() {
                    let p = grid.point(i);
                    let r = p[0] - p[1] - rest;
                    *v += 0.5 * stiffness * r * r;
                }
            }
            Potential::Sampled(values) => {
                if values.len() != grid.len() {
                    return Err(SimError::InvalidArgument(format!(
                        "sampled potential has {} values for {} grid points",
                        values.len(),
                        grid.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(SimError::InvalidArgument("sampled potential must be finite and real".into()));
                }
                out.iter_mut().zip(values).for_each(|(o, v)| *o += v);
            }
            Potential::Sum(parts) => {
                for p in parts {
                    p.accumulate(grid, out, include_linear)?;
                }
            }
        }
        Ok(())
    }
}

/// Stern–Gerlach magnet: B = (B′₀ x, 0, B₀ − B′₀ z), active on `window`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticField {
    pub b0: f64,
    pub gradient: f64,
    pub window: (f64, f64),
}

impl MagneticField {
    pub fn new(b0: f64, gradient: f64, window: (f64, f64)) -> Self {
        Self { b0, gradient, window }
    }

    pub fn uniform(b0: f64, window: (f64, f64)) -> Self {
        Self { b0, gradient: 0.0, window }
    }

    pub fn at(&self, x: f64, z: f64) -> [f64; 3] {
        [self.gradient * x, 0.0, self.b0 - self.gradient * z]
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.window.0 && t < self.window.1
    }

    /// ∂Bx/∂x + ∂By/∂y + ∂Bz/∂z of the stored geometry.
    pub fn divergence(&self) -> f64 {
        self.gradient + 0.0 - self.gradient
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Axis;

    #[test]
    fn linear_split_recombines() {
        let grid = Grid::plane(Axis::centered(16, 0.5).unwrap(), Axis::centered(16, 0.5).unwrap());
        let params = PhysicalParams::new(1.0, 1.0).with_axis_masses(vec![1.0, 2.0]).with_gravity(vec![0.3, 0.3]);
        let v = Potential::Sum(vec![
            Potential::gravity(&params),
            Potential::PairHarmonic { stiffness: 2.0, rest: 0.1 },
            Potential::Constant(0.25),
        ]);
        assert_eq!(v.linear_coeffs(2), vec![0.3, 0.6]);
        let full = v.sample(&grid).unwrap();
        let rest = v.sample_nonlinear(&grid).unwrap();
        for i in 0..grid.len() {
            let p = grid.point(i);
            assert!((full[i] - rest[i] - (0.3 * p[0] + 0.6 * p[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_length_mismatch_is_rejected() {
        let grid = Grid::line(Axis::centered(16, 0.5).unwrap());
        assert!(Potential::Sampled(vec![0.0; 3]).sample(&grid).is_err());
    }

    #[test]
    fn magnet_geometry_is_divergence_free() {
        let b = MagneticField::new(5.0, 1e3, (0.0, 2e-5));
        assert_eq!(b.divergence(), 0.0);
        assert_eq!(b.at(0.0, 1e-3), [0.0, 0.0, 4.0]);
        assert!(b.is_active(1e-5) && !b.is_active(2e-5));
    }
}
