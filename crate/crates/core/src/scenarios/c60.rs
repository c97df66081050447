//! C60 two-slit interference in the transverse coordinate.
//!
//! An incident Gaussian is evolved from the approach distance to the slit
//! plane (t = 0), multiplied by an erf-edged two-slit transmission, and
//! propagated to the screen. Bohmian paths start at the slit plane.
//! Reference scales: 100 nm, 1 μs and the molecular mass.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::{at_least, positive, si_frame, trajectory_to_si, within, RunRecord, ScenarioId};
use crate::error::{Result, SimError};
use crate::fields::{gaussian_packet, Axis, ComplexField, Grid, PhysicalParams, SpinorField};
use crate::oracles::{de_broglie_wavelength, fringe_spacing};
use crate::propagators::{step_count, Potential, SplitStepper, StepConfig};
use crate::rng::stream;
use crate::spectral::Spectral;
use crate::stats::chi_square_against_density;
use crate::trajectories::{sample_initial_positions, Ensemble, KinematicFrame};
use crate::units::{Units, ATOMIC_MASS_UNIT, HBAR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct C60Params {
    pub mass: f64,
    pub speed: f64,
    /// Centre-to-centre slit distance.
    pub slit_separation: f64,
    pub slit_width: f64,
    /// Edge length of the erf ramp as a fraction of the slit width.
    pub edge_smoothing: f64,
    pub incident_sigma: f64,
    /// Distance travelled before the slits; sets the first frame time.
    pub approach_distance: f64,
    pub screen_distance: f64,
    pub frame_interval: f64,
    pub grid_points: usize,
    pub spacing: f64,
    pub dt: f64,
    pub hbar: f64,
    pub samples: usize,
    pub record: usize,
    /// Minimum expected count per bin in the equivariance test.
    pub min_expected: f64,
}

impl Default for C60Params {
    fn default() -> Self {
        Self {
            mass: 720.0 * ATOMIC_MASS_UNIT,
            speed: 200.0,
            slit_separation: 1e-7,
            slit_width: 5.5e-8,
            edge_smoothing: 0.1,
            incident_sigma: 1e-7,
            approach_distance: 2e-3,
            screen_distance: 5e-3,
            frame_interval: 2.5e-6,
            grid_points: 8192,
            spacing: 1e-9,
            dt: 2.5e-8,
            hbar: HBAR,
            samples: 10_000,
            record: 24,
            min_expected: 5.0,
        }
    }
}

impl C60Params {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("mass", self.mass),
            ("speed", self.speed),
            ("slit_separation", self.slit_separation),
            ("slit_width", self.slit_width),
            ("incident_sigma", self.incident_sigma),
            ("screen_distance", self.screen_distance),
            ("frame_interval", self.frame_interval),
            ("spacing", self.spacing),
            ("dt", self.dt),
            ("hbar", self.hbar),
            ("min_expected", self.min_expected),
        ] {
            positive(k, v)?;
        }
        within("edge_smoothing", self.edge_smoothing, 1e-3, 0.5)?;
        if self.slit_width >= self.slit_separation {
            return Err(super::invalid("slit_width", format!("< slit_separation = {}", self.slit_separation), self.slit_width));
        }
        if !(self.approach_distance >= 0.0) {
            return Err(super::invalid("approach_distance", ">= 0", self.approach_distance));
        }
        at_least("grid_points", self.grid_points, 64)?;
        at_least("samples", self.samples, 10)?;
        step_count(self.approach_time(), self.dt)?;
        step_count(self.screen_time(), self.dt)?;
        step_count(self.frame_interval, self.dt)?;
        Ok(())
    }

    pub fn approach_time(&self) -> f64 {
        self.approach_distance / self.speed
    }

    pub fn screen_time(&self) -> f64 {
        self.screen_distance / self.speed
    }

    pub fn wavelength(&self) -> f64 {
        de_broglie_wavelength(self.mass, self.speed, self.hbar)
    }

    fn units(&self) -> Units {
        Units::new(1e-7, 1e-6, self.mass)
    }
}

/// Two-slit transmission with erf edges, coordinates in any common unit.
pub(crate) fn slit_transmission(x: f64, centers: &[f64], width: f64, edge: f64) -> f64 {
    centers
        .iter()
        .map(|c| 0.5 * (erf((x - c + width / 2.0) / edge) - erf((x - c - width / 2.0) / edge)))
        .sum()
}

fn parabolic_vertex(xs: &[f64], ys: &[f64], i: usize) -> f64 {
    let (y0, y1, y2) = (ys[i - 1], ys[i], ys[i + 1]);
    let den = y0 - 2.0 * y1 + y2;
    let h = xs[i + 1] - xs[i];
    if den == 0.0 {
        xs[i]
    } else {
        xs[i] + 0.5 * h * (y0 - y2) / den
    }
}

/// Fringe spacing near the pattern centre, two ways: the distance between
/// the minima flanking the central maximum, and the mean distance between
/// the nearest maxima on either side of the central one.
pub fn measure_fringes(xs: &[f64], rho: &[f64]) -> Result<(f64, f64)> {
    let n = rho.len();
    let centre = (1..n - 1)
        .filter(|&i| xs[i].abs() <= 0.25 * (xs[n - 1] - xs[0]))
        .max_by(|&a, &b| rho[a].total_cmp(&rho[b]))
        .ok_or_else(|| SimError::InvalidArgument("empty pattern".into()))?;
    let peak = rho[centre];
    let is_max = |i: usize| rho[i] >= rho[i - 1] && rho[i] > rho[i + 1] && rho[i] > 0.02 * peak;
    let is_min = |i: usize| rho[i] <= rho[i - 1] && rho[i] < rho[i + 1];
    let right_min = (centre + 1..n - 1).find(|&i| is_min(i));
    let left_min = (1..centre).rev().find(|&i| is_min(i));
    let (Some(r), Some(l)) = (right_min, left_min) else {
        return Err(SimError::InvalidArgument("no fringe minima around the central maximum".into()));
    };
    let minima = parabolic_vertex(xs, rho, r) - parabolic_vertex(xs, rho, l);
    let right = (centre + 1..n - 1).find(|&i| is_max(i));
    let left = (1..centre).rev().find(|&i| is_max(i));
    let peaks = match (left, right) {
        (Some(l), Some(r)) => (parabolic_vertex(xs, rho, r) - parabolic_vertex(xs, rho, l)) / 2.0,
        _ => f64::NAN,
    };
    Ok((minima, peaks))
}

pub fn run_c60(p: &C60Params, seed: u64) -> Result<RunRecord> {
    p.validate()?;
    let u = p.units();
    let sp = u.scale_params(&PhysicalParams::new(p.mass, p.hbar));
    let grid = Grid::line(Axis::centered(p.grid_points, p.spacing / u.length)?);
    let dt = p.dt / u.time;
    let mut stepper = SplitStepper::scalar(&grid, &Potential::None, &sp, StepConfig::periodic(dt))?;
    let incident = gaussian_packet(&grid, &[0.0], p.incident_sigma / u.length, &[0.0], &sp)?;
    let mut state = SpinorField::new(vec![incident])?;

    let t0 = -p.approach_time() / u.time;
    let pre = step_count(p.approach_time(), p.dt)?;
    let post = step_count(p.screen_time(), p.dt)?;
    let every = step_count(p.frame_interval, p.dt)?;
    let mut rec = RunRecord::new(ScenarioId::C60DoubleSlit, seed);
    let push_frame = |rec: &mut RunRecord, t: f64, st: &SpinorField| {
        let name = format!("rho_{:03}", rec.frames.len());
        rec.frames.push(si_frame(name, t * u.time, &grid, &st.density(), u.length));
    };

    for k in 0..pre {
        if k % every == 0 {
            push_frame(&mut rec, t0 + k as f64 * dt, &state);
        }
        stepper.step(&mut state, t0 + k as f64 * dt)?;
    }

    // slit plane
    let half = 0.5 * p.slit_separation / u.length;
    let w = p.slit_width / u.length;
    let edge = p.edge_smoothing * w;
    let before = state.norm2();
    let comp: &mut ComplexField = &mut state.components[0];
    for (i, v) in comp.values.iter_mut().enumerate() {
        *v *= slit_transmission(grid.axis(0).coord(i), &[-half, half], w, edge);
    }
    let transmitted = state.norm2() / before;
    state.normalize()?;

    let spectral = Spectral::new(&grid);
    let starts = sample_initial_positions(&grid, &state.density(), p.samples, &mut stream(seed, "c60/starts"))?;
    let mut ens = Ensemble::new(starts, p.record, dt)?;
    let mut prev = KinematicFrame::spinor(0.0, &state, &sp, &spectral, false);
    ens.begin(&prev);
    for k in 0..post {
        if (pre + k) % every == 0 {
            push_frame(&mut rec, k as f64 * dt, &state);
        }
        stepper.step(&mut state, k as f64 * dt)?;
        let frame = KinematicFrame::spinor((k + 1) as f64 * dt, &state, &sp, &spectral, false);
        ens.advance(&prev, &frame);
        prev = frame;
    }
    let t_end = post as f64 * dt;
    push_frame(&mut rec, t_end, &state);
    let res = ens.finish();

    let rho = state.density();
    let xs_si: Vec<f64> = grid.axis(0).coords().iter().map(|x| x * u.length).collect();
    let (fringe_minima, fringe_peaks) = measure_fringes(&xs_si, &rho)?;
    let oracle = fringe_spacing(p.wavelength(), p.slit_separation, p.screen_distance);
    rec.push("wavelength", p.wavelength());
    rec.push("fringe_spacing_oracle", oracle.spacing);
    rec.push("fringe_regime_ok", if oracle.regime_ok { 1.0 } else { 0.0 });
    rec.push("fringe_spacing_peaks", fringe_peaks);
    rec.push("fringe_spacing_minima", fringe_minima);
    rec.push("transmitted_fraction", transmitted);
    rec.push("norm_drift", (state.norm2() - 1.0).abs());

    let ends: Vec<f64> = res.endpoints.iter().flatten().map(|x| x[0]).collect();
    let chi = chi_square_against_density(&ends, &grid, &rho, p.min_expected)?;
    rec.push("equivariance_chi2", chi.statistic);
    rec.push("equivariance_dof", chi.dof as f64);
    rec.push("equivariance_p", chi.p_value);

    let crossings = res
        .starts
        .iter()
        .zip(&res.endpoints)
        .filter(|(s, e)| e.as_ref().is_some_and(|e| e[0].signum() != s[0].signum()))
        .count()
        + res
            .trajectories
            .iter()
            .filter(|t| {
                let s0 = t.positions[0][0].signum();
                t.positions.iter().any(|x| x[0].signum() != s0)
            })
            .count();
    rec.push("axis_crossings", crossings as f64);
    rec.push("abort_fraction", res.abort_fraction());

    rec.table_from(
        "endpoints",
        &["x_slit", "x_screen"],
        res.starts
            .iter()
            .zip(&res.endpoints)
            .map(|(s, e)| vec![s[0] * u.length, e.as_ref().map_or(f64::NAN, |x| x[0] * u.length)])
            .collect(),
    );
    rec.trajectories = res.trajectories.into_iter().map(|t| trajectory_to_si(t, u.length, u.time)).collect();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transmission_profile() {
        let t = |x| slit_transmission(x, &[-0.5, 0.5], 0.55, 0.055);
        assert!((t(0.5) - 1.0).abs() < 1e-9);
        assert!(t(0.0) < 1e-8);
        assert!((t(0.5 + 0.275) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fringe_measurement_on_cosine_pattern() {
        let xs: Vec<f64> = (0..4001).map(|i| -2.0 + i as f64 * 1e-3).collect();
        let rho: Vec<f64> = xs
            .iter()
            .map(|x| (std::f64::consts::PI * x / 0.3).cos().powi(2) * (-x * x / 2.0).exp())
            .collect();
        let (a, b) = measure_fringes(&xs, &rho).unwrap();
        assert!((a - 0.3).abs() < 1e-3, "{a}");
        assert!((b - 0.3).abs() < 2e-3, "{b}");
    }

    #[test]
    fn frame_count_matches_schedule() {
        let p = C60Params { samples: 200, record: 2, grid_points: 4096, ..Default::default() };
        let rec = run_c60(&p, 0).unwrap();
        assert_eq!(rec.frames.len(), 15);
        assert_eq!(rec.trajectories.len(), 2);
        assert!((rec.frames[0].t + 1e-5).abs() < 1e-15);
        assert!((rec.frames[14].t - 2.5e-5).abs() < 1e-12);
        assert_eq!(rec.value("axis_crossings"), 0.0);
    }
}
