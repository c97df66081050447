//! Per-scenario reference scales.
//!
//! Every scenario picks a reference length, time and mass so that the
//! quantities handed to the propagators stay near unity. SI values only
//! appear at configuration and output boundaries.

use crate::fields::PhysicalParams;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub length: f64,
    pub time: f64,
    pub mass: f64,
}

impl Units {
    /// Units in which every quantity is already dimensionless.
    pub const NATURAL: Units = Units { length: 1.0, time: 1.0, mass: 1.0 };

    pub fn new(length: f64, time: f64, mass: f64) -> Self {
        Self { length, time, mass }
    }

    pub fn velocity(&self) -> f64 {
        self.length / self.time
    }

    pub fn energy(&self) -> f64 {
        self.mass * self.length * self.length / (self.time * self.time)
    }

    pub fn action(&self) -> f64 {
        self.energy() * self.time
    }

    pub fn acceleration(&self) -> f64 {
        self.length / (self.time * self.time)
    }

    /// Magnetic moments are scaled so that fields stay in tesla.
    pub fn magnetic_moment(&self) -> f64 {
        self.energy()
    }

    pub fn scale_params(&self, si: &PhysicalParams) -> PhysicalParams {
        PhysicalParams {
            mass: si.mass / self.mass,
            hbar: si.hbar / self.action(),
            gravity: si.gravity.iter().map(|g| g / self.acceleration()).collect(),
            magneton: si.magneton / self.magnetic_moment(),
            axis_masses: si
                .axis_masses
                .as_ref()
                .map(|m| m.iter().map(|v| v / self.mass).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_hbar_for_c60_is_order_unity_ish() {
        let u = Units::new(1e-7, 1e-6, 1.197e-24);
        let p = PhysicalParams::new(1.197e-24, HBAR);
        let s = u.scale_params(&p);
        assert!((s.mass - 1.0).abs() < 1e-15);
        assert!((s.hbar - HBAR * 1e-6 / (1.197e-24 * 1e-14)).abs() < 1e-15);
        assert!(s.hbar > 1e-3 && s.hbar < 1e-1);
    }
}
