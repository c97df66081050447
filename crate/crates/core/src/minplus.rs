//! Classical limit: closed-form actions, the (min,+) action integral, the
//! statistical Hamilton–Jacobi flow, and its comparison with Madelung
//! quantities at decreasing ħ.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::fields::{Axis, ComplexField, Grid, PhysicalParams, SpinorField};
use crate::madelung::MadelungView;
use crate::propagators::{evolve, Potential, SplitStepper, StepConfig};

/// One-dimensional actions with a closed form. Gravity is the potential
/// m·g·x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassicalAction {
    Free { mass: f64 },
    Gravity { mass: f64, g: f64 },
    Harmonic { mass: f64, omega: f64 },
}

impl ClassicalAction {
    pub fn mass(&self) -> f64 {
        match *self {
            ClassicalAction::Free { mass }
            | ClassicalAction::Gravity { mass, .. }
            | ClassicalAction::Harmonic { mass, .. } => mass,
        }
    }

    pub fn potential(&self, x: f64) -> f64 {
        match *self {
            ClassicalAction::Free { .. } => 0.0,
            ClassicalAction::Gravity { mass, g } => mass * g * x,
            ClassicalAction::Harmonic { mass, omega } => 0.5 * mass * omega * omega * x * x,
        }
    }

    /// S_cl(x, t; x0) along the classical path from x0 to x in time t.
    pub fn action(&self, x: f64, t: f64, x0: f64) -> f64 {
        match *self {
            ClassicalAction::Free { mass } => mass * (x - x0).powi(2) / (2.0 * t),
            ClassicalAction::Gravity { mass, g } => {
                mass * (x - x0).powi(2) / (2.0 * t) - 0.5 * mass * g * t * (x + x0) - mass * g * g * t.powi(3) / 24.0
            }
            ClassicalAction::Harmonic { mass, omega } => {
                let (s, c) = (omega * t).sin_cos();
                mass * omega / (2.0 * s) * ((x * x + x0 * x0) * c - 2.0 * x * x0)
            }
        }
    }

    /// Position and velocity at time t of the path leaving x0 with velocity v0.
    pub fn characteristic(&self, x0: f64, v0: f64, t: f64) -> (f64, f64) {
        match *self {
            ClassicalAction::Free { .. } => (x0 + v0 * t, v0),
            ClassicalAction::Gravity { g, .. } => (x0 + v0 * t - 0.5 * g * t * t, v0 - g * t),
            ClassicalAction::Harmonic { omega, .. } => {
                let (s, c) = (omega * t).sin_cos();
                (x0 * c + v0 / omega * s, -x0 * omega * s + v0 * c)
            }
        }
    }

    pub fn as_potential(&self) -> Potential {
        match *self {
            ClassicalAction::Free { .. } => Potential::None,
            ClassicalAction::Gravity { mass, g } => Potential::Linear { coeffs: vec![mass * g] },
            ClassicalAction::Harmonic { mass, omega } => Potential::harmonic(mass, omega, vec![0.0]),
        }
    }
}

/// ρ0 and S0 sampled on the x0 grid; neither depends on ħ.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub axis: Axis,
    pub rho0: Vec<f64>,
    pub s0: Vec<f64>,
}

impl InitialData {
    /// Sample ρ0 and S0; ρ0 is renormalized to unit mass.
    pub fn sample(axis: Axis, rho0: impl Fn(f64) -> f64, s0: impl Fn(f64) -> f64) -> Result<Self> {
        let xs = axis.coords();
        let mut r: Vec<f64> = xs.iter().map(|x| rho0(*x)).collect();
        let s: Vec<f64> = xs.iter().map(|x| s0(*x)).collect();
        if r.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(SimError::InvalidArgument("rho0 must be finite and non-negative".into()));
        }
        if s.iter().zip(&r).any(|(v, rho)| *rho > 0.0 && !v.is_finite()) {
            return Err(SimError::InvalidArgument("S0 must be finite on the support of rho0".into()));
        }
        let mass: f64 = r.iter().sum::<f64>() * axis.spacing;
        if !(mass > 0.0) {
            return Err(SimError::Normalization { norm2: mass });
        }
        r.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { axis, rho0: r, s0: s })
    }

    /// Initial velocity ∂S0/∂x / m by centred differences (one-sided at ends).
    pub fn velocity0(&self, mass: f64) -> Vec<f64> {
        let n = self.s0.len();
        let h = self.axis.spacing;
        (0..n)
            .map(|i| {
                let d = if i == 0 {
                    (self.s0[1] - self.s0[0]) / h
                } else if i == n - 1 {
                    (self.s0[n - 1] - self.s0[n - 2]) / h
                } else {
                    (self.s0[i + 1] - self.s0[i - 1]) / (2.0 * h)
                };
                d / mass
            })
            .collect()
    }
}

/// Minimize `f` over a uniform grid and refine with a parabola through the
/// minimizer and its neighbours. Returns (argmin, min).
fn grid_min(axis: &Axis, f: impl Fn(usize) -> f64) -> Result<(f64, f64)> {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..axis.n {
        let v = f(i);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    if !best_val.is_finite() {
        return Err(SimError::InvalidArgument("objective is not finite anywhere on the x0 grid".into()));
    }
    if best == 0 || best == axis.n - 1 {
        return Err(SimError::Coverage { index: best });
    }
    let (fm, f0, fp) = (f(best - 1), best_val, f(best + 1));
    let curv = fm - 2.0 * f0 + fp;
    if !(curv > 0.0) {
        return Ok((axis.coord(best), f0));
    }
    let h = axis.spacing;
    let shift = 0.5 * h * (fm - fp) / curv;
    let value = f0 - (fm - fp).powi(2) / (8.0 * curv);
    Ok((axis.coord(best) + shift, value))
}

/// S(x, t) = min over x0 of S0(x0) + S_cl(x, t; x0).
pub fn minplus_action(data: &InitialData, act: &ClassicalAction, x: f64, t: f64) -> Result<f64> {
    minplus_minimizer(data, act, x, t).map(|r| r.1)
}

/// (x0*, S(x, t)) with the refined minimizer.
pub fn minplus_minimizer(data: &InitialData, act: &ClassicalAction, x: f64, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(SimError::InvalidArgument(format!("t must be > 0, got {t}")));
    }
    grid_min(&data.axis, |i| data.s0[i] + act.action(x, t, data.axis.coord(i)))
}

/// min over y on `mid` of S(y, s) + S_cl(x, t − s; y): the same action
/// reached through an intermediate time.
pub fn minplus_compose(data: &InitialData, act: &ClassicalAction, mid: &Axis, x: f64, s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0 && s < t) {
        return Err(SimError::InvalidArgument(format!("intermediate time must lie in (0, {t}), got {s}")));
    }
    let inner: Vec<f64> = mid
        .coords()
        .par_iter()
        .map(|y| minplus_action(data, act, *y, s))
        .collect::<Result<_>>()?;
    grid_min(mid, |j| inner[j] + act.action(x, t - s, mid.coord(j))).map(|r| r.1)
}

/// ∂S/∂t + (∂S/∂x)²/2m + V(x) by centred differences with steps (h, k).
pub fn hj_residual(data: &InitialData, act: &ClassicalAction, x: f64, t: f64, h: f64, k: f64) -> Result<f64> {
    let s = |x: f64, t: f64| minplus_action(data, act, x, t);
    let st = (s(x, t + k)? - s(x, t - k)?) / (2.0 * k);
    let sx = (s(x + h, t)? - s(x - h, t)?) / (2.0 * h);
    Ok(st + sx * sx / (2.0 * act.mass()) + act.potential(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjSolution {
    pub x: Vec<f64>,
    pub action: Vec<f64>,
    pub velocity: Vec<f64>,
    pub density: Vec<f64>,
}

/// Classical velocity and density at time `t` on the points of `out`.
pub fn hj_velocity_and_density(data: &InitialData, act: &ClassicalAction, t: f64, out: &Axis) -> Result<HjSolution> {
    let m = act.mass();
    let x0s = data.axis.coords();
    let v0 = data.velocity0(m);
    let chars: Vec<f64> = x0s.iter().zip(&v0).map(|(x0, v)| act.characteristic(*x0, *v, t).0).collect();
    let h0 = data.axis.spacing;
    let mut jac = Vec::with_capacity(chars.len());
    for i in 0..chars.len() {
        let (a, b, w) = if i == 0 {
            (0, 1, h0)
        } else if i == chars.len() - 1 {
            (i - 1, i, h0)
        } else {
            (i - 1, i + 1, 2.0 * h0)
        };
        let j = (chars[b] - chars[a]) / w;
        if !(j > 1e-12) {
            return Err(SimError::Caustic { x0: x0s[i] });
        }
        jac.push(j);
    }
    let xs = out.coords();
    let action: Vec<f64> = xs.par_iter().map(|x| minplus_action(data, act, *x, t)).collect::<Result<_>>()?;
    let n = xs.len();
    let hx = out.spacing;
    let velocity = (0..n)
        .map(|i| {
            let d = if i == 0 {
                (action[1] - action[0]) / hx
            } else if i == n - 1 {
                (action[n - 1] - action[n - 2]) / hx
            } else {
                (action[i + 1] - action[i - 1]) / (2.0 * hx)
            };
            d / m
        })
        .collect();
    // push ρ0/J forward and interpolate on the increasing image points
    let pushed: Vec<f64> = data.rho0.iter().zip(&jac).map(|(r, j)| r / j).collect();
    let density = xs
        .iter()
        .map(|x| {
            if *x < chars[0] || *x > chars[chars.len() - 1] {
                return 0.0;
            }
            let k = chars.partition_point(|c| c <= x).clamp(1, chars.len() - 1);
            let w = (x - chars[k - 1]) / (chars[k] - chars[k - 1]);
            (1.0 - w) * pushed[k - 1] + w * pushed[k]
        })
        .collect();
    Ok(HjSolution { x: xs, action, velocity, density })
}

/// Quantum runs at several ħ against one classical reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSetup {
    pub data: InitialData,
    pub action: ClassicalAction,
    /// Quantum grid; also where the classical solution is evaluated.
    pub grid: Axis,
    pub t: f64,
    pub dt: f64,
    /// Velocity errors are taken where the classical density exceeds this
    /// fraction of its maximum (and the quantum density is valid).
    pub velocity_mask: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub hbar: f64,
    pub density_l1: f64,
    pub velocity_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    /// True if both error norms fall strictly along the listed ħ (which
    /// must be given in decreasing order).
    pub fn strictly_decreasing(&self) -> bool {
        self.entries.windows(2).all(|w| {
            w[0].hbar > w[1].hbar && w[1].density_l1 < w[0].density_l1 && w[1].velocity_inf < w[0].velocity_inf
        })
    }
}

pub fn hbar_sweep_compare(setup: &SweepSetup, hbars: &[f64]) -> Result<SweepReport> {
    let classical = hj_velocity_and_density(&setup.data, &setup.action, setup.t, &setup.grid)?;
    let grid = Grid::line(setup.grid);
    let mass = setup.action.mass();
    // ψ0 = √ρ0 e^{iS0/ħ} on the quantum grid
    let rho0: Vec<f64> = setup.grid.coords().iter().map(|x| interp(&setup.data.axis, &setup.data.rho0, *x)).collect();
    let s0: Vec<f64> = setup.grid.coords().iter().map(|x| interp(&setup.data.axis, &setup.data.s0, *x)).collect();
    let rho_max = classical.density.iter().cloned().fold(0.0, f64::max);
    let entries = hbars
        .par_iter()
        .map(|&hbar| -> Result<SweepEntry> {
            let params = PhysicalParams::new(mass, hbar);
            let values = rho0.iter().zip(&s0).map(|(r, s)| Complex64::from_polar(r.sqrt(), s / hbar)).collect();
            let mut psi = ComplexField::new(grid.clone(), values)?;
            psi.normalize()?;
            let mut stepper =
                SplitStepper::scalar(&grid, &setup.action.as_potential(), &params, StepConfig::periodic(setup.dt))?;
            let out = evolve(&mut stepper, SpinorField::new(vec![psi])?, 0.0, setup.t, 0, |_, _| Ok(()))?;
            let view = MadelungView::from_spinor(&out, &params);
            let h = setup.grid.spacing;
            let density_l1 = view.density.iter().zip(&classical.density).map(|(q, c)| (q - c).abs()).sum::<f64>() * h;
            let velocity_inf = (0..grid.len())
                .filter(|&i| view.valid[i] && classical.density[i] >= setup.velocity_mask * rho_max)
                .map(|i| (view.velocity[0][i] - classical.velocity[i]).abs())
                .fold(0.0, f64::max);
            Ok(SweepEntry { hbar, density_l1, velocity_inf })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { entries })
}

fn interp(axis: &Axis, values: &[f64], x: f64) -> f64 {
    if x < axis.first() || x > axis.last() {
        return 0.0;
    }
    let s = (x - axis.origin) / axis.spacing;
    let i = (s.floor() as usize).min(axis.n - 2);
    let w = s - i as f64;
    (1.0 - w) * values[i] + w * values[i + 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(x: f64) -> f64 {
        (-x * x / 2.0).exp()
    }

    fn linear_data(v0: f64, m: f64) -> InitialData {
        InitialData::sample(Axis::centered(2001, 0.02).unwrap(), gaussian, |x| m * v0 * x).unwrap()
    }

    #[test]
    fn hopf_lax_for_linear_initial_action() {
        let (m, v0) = (1.5, 0.8);
        let d = linear_data(v0, m);
        let act = ClassicalAction::Free { mass: m };
        for (x, t) in [(0.3, 1.0), (-2.0, 0.5), (4.1, 3.0)] {
            let s = minplus_action(&d, &act, x, t).unwrap();
            let exact = m * v0 * x - 0.5 * m * v0 * v0 * t;
            assert!((s - exact).abs() < 1e-10, "{s} vs {exact}");
        }
    }

    #[test]
    fn quadratic_initial_action_closed_form() {
        let (m, a, b, t) = (1.0, 0.7, 0.4, 0.9);
        let d = InitialData::sample(Axis::centered(1601, 0.01).unwrap(), gaussian, |x| a * (x - b).powi(2)).unwrap();
        let act = ClassicalAction::Free { mass: m };
        for x in [-1.0, 0.0, 2.5] {
            let (x0, s) = minplus_minimizer(&d, &act, x, t).unwrap();
            // minimize a(x0 − b)² + m(x − x0)²/2t
            let k = m / (2.0 * t);
            let xstar = (a * b + k * x) / (a + k);
            let exact = a * k / (a + k) * (x - b).powi(2);
            assert!((x0 - xstar).abs() < 1e-10);
            assert!((s - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn small_time_recovers_initial_action() {
        let d = InitialData::sample(Axis::centered(4001, 0.005).unwrap(), gaussian, |x| (x * 0.7).sin()).unwrap();
        let act = ClassicalAction::Free { mass: 1.0 };
        let s = minplus_action(&d, &act, 0.4, 1e-4).unwrap();
        assert!((s - (0.28f64).sin()).abs() < 1e-4);
    }

    #[test]
    fn coverage_error_at_grid_edge() {
        let d = linear_data(5.0, 1.0);
        let act = ClassicalAction::Free { mass: 1.0 };
        assert!(matches!(minplus_action(&d, &act, 0.0, 10.0), Err(SimError::Coverage { .. })));
        assert!(minplus_action(&d, &act, 0.0, 0.0).is_err());
    }

    #[test]
    fn actions_satisfy_hamilton_jacobi() {
        let (m, x0, t, h) = (1.3, 0.4, 0.8, 1e-4);
        for act in [
            ClassicalAction::Free { mass: m },
            ClassicalAction::Gravity { mass: m, g: 2.0 },
            ClassicalAction::Harmonic { mass: m, omega: 1.1 },
        ] {
            for x in [-1.0, 0.5, 2.0] {
                let st = (act.action(x, t + h, x0) - act.action(x, t - h, x0)) / (2.0 * h);
                let sx = (act.action(x + h, t, x0) - act.action(x - h, t, x0)) / (2.0 * h);
                let r = st + sx * sx / (2.0 * m) + act.potential(x);
                assert!(r.abs() < 1e-6, "{act:?} {r}");
            }
        }
    }

    #[test]
    fn dynamic_programming_composition() {
        let m = 1.0;
        let d = InitialData::sample(Axis::centered(801, 0.025).unwrap(), gaussian, |x| 0.3 * x * x + (x * 0.5).sin()).unwrap();
        for act in [ClassicalAction::Free { mass: m }, ClassicalAction::Gravity { mass: m, g: 1.0 }] {
            let mid = Axis::centered(801, 0.025).unwrap();
            for x in [-0.5, 0.2, 1.0] {
                let direct = minplus_action(&d, &act, x, 1.0).unwrap();
                let comp = minplus_compose(&d, &act, &mid, x, 0.4, 1.0).unwrap();
                assert!((direct - comp).abs() < 1e-5, "{direct} {comp}");
            }
        }
    }

    #[test]
    fn hj_residual_shrinks_with_grid() {
        let act = ClassicalAction::Gravity { mass: 1.0, g: 0.5 };
        let mut res = Vec::new();
        for h in [0.04, 0.02, 0.01] {
            let n = (16.0 / h) as usize + 1;
            let d = InitialData::sample(Axis::centered(n, h).unwrap(), gaussian, |x| 0.2 * (x * 0.8).sin()).unwrap();
            let r = hj_residual(&d, &act, 0.3, 0.7, h, h).unwrap();
            res.push(r.abs());
        }
        assert!(res[0] / res[1] > 3.0 && res[1] / res[2] > 3.0, "{res:?}");
    }

    #[test]
    fn rigid_transport_for_uniform_velocity() {
        let d = linear_data(0.8, 1.0);
        let act = ClassicalAction::Free { mass: 1.0 };
        let out = Axis::centered(301, 0.05).unwrap();
        let sol = hj_velocity_and_density(&d, &act, 2.0, &out).unwrap();
        let mass: f64 = sol.density.iter().sum::<f64>() * out.spacing;
        assert!((mass - 1.0).abs() < 1e-6);
        for (i, x) in sol.x.iter().enumerate() {
            let expect = gaussian(x - 1.6) / (2.0 * std::f64::consts::PI).sqrt();
            assert!((sol.density[i] - expect).abs() < 1e-4);
            assert!((sol.velocity[i] - 0.8).abs() < 1e-9);
        }
    }

    #[test]
    fn expanding_flow_keeps_gaussian_shape() {
        // S0 = αx²/2 gives v0 = αx/m and the affine map x ↦ (1 + αt/m)x
        let (alpha, t) = (0.5, 2.0);
        let d = InitialData::sample(Axis::centered(2001, 0.01).unwrap(), gaussian, |x| 0.5 * alpha * x * x).unwrap();
        let act = ClassicalAction::Free { mass: 1.0 };
        let out = Axis::centered(201, 0.05).unwrap();
        let sol = hj_velocity_and_density(&d, &act, t, &out).unwrap();
        let scale = 1.0 + alpha * t;
        for (i, x) in sol.x.iter().enumerate() {
            let expect = gaussian(x / scale) / ((2.0 * std::f64::consts::PI).sqrt() * scale);
            assert!((sol.density[i] - expect).abs() < 1e-4, "{x}");
        }
    }

    #[test]
    fn harmonic_focus_is_a_caustic() {
        let d = InitialData::sample(Axis::centered(801, 0.02).unwrap(), gaussian, |_| 0.0).unwrap();
        let act = ClassicalAction::Harmonic { mass: 1.0, omega: 1.0 };
        let out = Axis::centered(101, 0.05).unwrap();
        assert!(hj_velocity_and_density(&d, &act, 0.5, &out).is_ok());
        assert!(matches!(
            hj_velocity_and_density(&d, &act, std::f64::consts::FRAC_PI_2, &out),
            Err(SimError::Caustic { .. })
        ));
    }

    proptest! {
        #[test]
        fn shift_and_order_preserving(c in -5.0f64..5.0, x in -1.0f64..1.0) {
            let d = InitialData::sample(Axis::centered(401, 0.02).unwrap(), gaussian, |x| 0.4 * x * x).unwrap();
            let mut e = d.clone();
            e.s0.iter_mut().for_each(|s| *s += c);
            let mut f = d.clone();
            f.s0.iter_mut().enumerate().for_each(|(i, s)| *s += 0.1 * (i as f64 * 0.3).sin().abs());
            let act = ClassicalAction::Free { mass: 1.0 };
            let base = minplus_action(&d, &act, x, 0.5).unwrap();
            prop_assert!((minplus_action(&e, &act, x, 0.5).unwrap() - base - c).abs() < 1e-12);
            prop_assert!(minplus_action(&f, &act, x, 0.5).unwrap() >= base - 1e-12);
        }
    }
}
