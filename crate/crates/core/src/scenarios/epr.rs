//! Spin-singlet pair measured sequentially by two Stern–Gerlach magnets.
//!
//! Configuration space is (z_A, z_B). Particle A crosses its magnet first,
//! its branches separate during a free flight, then particle B crosses a
//! magnet rotated by its own angle and flies on. Each magnet angle is
//! applied as a rotation of that particle's spin basis right before its
//! field window. The outcome of a path is the sign of each coordinate at
//! the end.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{at_least, positive, si_frame, trajectory_to_si, within, RunRecord, ScenarioId};
use crate::error::Result;
use crate::fields::{gaussian_packet, Axis, Grid, PhysicalParams, SpinorField};
use crate::oracles::{chsh, singlet, spin_correlation};
use crate::propagators::{
    rotate_spin_basis, step_count, AppliedField, MagneticField, Potential, SpinLayout, SplitStepper, StepConfig,
};
use crate::rng::stream;
use crate::spectral::Spectral;
use crate::stats::binomial_fraction;
use crate::trajectories::{sample_initial_positions, EnsembleResult, Ensemble, KinematicFrame, Trajectory};
use crate::units::{Units, BOHR_MAGNETON, HBAR};

const TIME_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EprParams {
    pub b0: f64,
    pub gradient: f64,
    pub magnet_length: f64,
    pub speed: f64,
    pub mass: f64,
    pub sigma0: f64,
    pub hbar: f64,
    pub magneton: f64,
    /// Free flight after each magnet.
    pub flight_time: f64,
    pub grid_points: usize,
    pub spacing: f64,
    pub dt: f64,
    pub samples: usize,
    pub record: usize,
    /// Magnet angle pairs (a, b), radians.
    pub settings: Vec<[f64; 2]>,
    /// CHSH angles a, a′, b, b′.
    pub chsh: [f64; 4],
}

impl Default for EprParams {
    fn default() -> Self {
        let q = PI / 4.0;
        Self {
            b0: 5.0,
            gradient: 1e3,
            magnet_length: 0.01,
            speed: 500.0,
            mass: 1.8e-25,
            sigma0: 1e-4,
            hbar: HBAR,
            magneton: BOHR_MAGNETON,
            flight_time: 6e-4,
            grid_points: 256,
            spacing: 1.5e-5,
            dt: 1e-5,
            samples: 10_000,
            record: 8,
            settings: vec![[0.0, 0.0], [0.0, q], [0.0, 2.0 * q], [0.0, 3.0 * q]],
            chsh: [0.0, 2.0 * q, q, 3.0 * q],
        }
    }
}

impl EprParams {
    pub fn validate(&self) -> Result<()> {
        within("b0", self.b0, -1e3, 1e3)?;
        within("gradient", self.gradient, -1e6, 1e6)?;
        for (k, v) in [
            ("magnet_length", self.magnet_length),
            ("speed", self.speed),
            ("mass", self.mass),
            ("sigma0", self.sigma0),
            ("hbar", self.hbar),
            ("magneton", self.magneton),
            ("flight_time", self.flight_time),
            ("spacing", self.spacing),
            ("dt", self.dt),
        ] {
            positive(k, v)?;
        }
        at_least("grid_points", self.grid_points, 16)?;
        at_least("samples", self.samples, 1)?;
        for s in &self.settings {
            within("settings", s[0], -2.0 * PI, 2.0 * PI)?;
            within("settings", s[1], -2.0 * PI, 2.0 * PI)?;
        }
        for a in self.chsh {
            within("chsh", a, -2.0 * PI, 2.0 * PI)?;
        }
        step_count(self.field_time(), self.dt)?;
        step_count(self.flight_time, self.dt)?;
        Ok(())
    }

    pub fn field_time(&self) -> f64 {
        self.magnet_length / self.speed
    }

    /// Settings measured in a run: the configured pairs plus the CHSH ones.
    pub fn all_settings(&self) -> Vec<[f64; 2]> {
        let [a, a2, b, b2] = self.chsh;
        let mut out = self.settings.clone();
        for s in [[a, b], [a, b2], [a2, b], [a2, b2]] {
            if find(&out, s).is_none() {
                out.push(s);
            }
        }
        out
    }

    fn units(&self) -> Units {
        Units::new(self.sigma0, TIME_SCALE, self.mass)
    }
}

fn find(list: &[[f64; 2]], s: [f64; 2]) -> Option<usize> {
    list.iter().position(|v| (v[0] - s[0]).abs() < 1e-12 && (v[1] - s[1]).abs() < 1e-12)
}

struct SettingRun {
    result: EnsembleResult,
    /// Largest deviation of B's marginal from free spreading, relative to its peak.
    marginal_deviation: f64,
    frames: Vec<(f64, Vec<f64>)>,
    norm_drift: f64,
}

fn run_setting(p: &EprParams, sp: &PhysicalParams, grid: &Grid, setting: [f64; 2], seed: u64, idx: usize, record: usize) -> Result<SettingRun> {
    let u = p.units();
    let dt = p.dt / u.time;
    let dtf = p.field_time() / u.time;
    let fl = p.flight_time / u.time;
    let t_b = dtf + fl;
    let layout = SpinLayout::pair(0, 1);
    let fields = vec![
        AppliedField { particle: 0, field: MagneticField::new(p.b0, p.gradient * u.length, (0.0, dtf)) },
        AppliedField { particle: 1, field: MagneticField::new(p.b0, p.gradient * u.length, (t_b, t_b + dtf)) },
    ];
    let mut stepper = SplitStepper::new(grid, &Potential::None, sp, StepConfig::periodic(dt), layout.clone(), fields)?;
    let profile = gaussian_packet(grid, &[0.0, 0.0], 1.0, &[0.0, 0.0], sp)?;
    let mut state = SpinorField::from_profile(&profile, &singlet());
    rotate_spin_basis(&mut state, &layout, 0, setting[0]);

    let spectral = Spectral::new(grid);
    let label = format!("epr_b/starts/{idx}");
    let starts = sample_initial_positions(grid, &state.density(), p.samples, &mut stream(seed, &label))?;
    let mut ens = Ensemble::new(starts, record, dt)?;
    let mut prev = KinematicFrame::spinor(0.0, &state, sp, &spectral, false);
    ens.begin(&prev);

    let b_step = step_count(p.field_time() + p.flight_time, p.dt)?;
    let steps = b_step + step_count(p.field_time() + p.flight_time, p.dt)?;
    let mut frames = vec![(0.0, state.density())];
    let mut marginal_deviation = 0.0;
    for k in 0..steps {
        if k == b_step {
            marginal_deviation = marginal_vs_free(&state, sp, k as f64 * dt);
            frames.push((k as f64 * dt, state.density()));
            rotate_spin_basis(&mut state, &layout, 1, setting[1]);
        }
        stepper.step(&mut state, k as f64 * dt)?;
        let frame = KinematicFrame::spinor((k + 1) as f64 * dt, &state, sp, &spectral, false);
        ens.advance(&prev, &frame);
        prev = frame;
    }
    frames.push((steps as f64 * dt, state.density()));
    Ok(SettingRun { result: ens.finish(), marginal_deviation, frames, norm_drift: (state.norm2() - 1.0).abs() })
}

/// Marginal of z_B against a freely spreading Gaussian of width σ₀ = 1.
fn marginal_vs_free(state: &SpinorField, sp: &PhysicalParams, t: f64) -> f64 {
    let g = &state.grid;
    let (n0, n1) = (g.axis(0).n, g.axis(1).n);
    let rho = state.density();
    let mut marg = vec![0.0; n1];
    for i in 0..n0 {
        for j in 0..n1 {
            marg[j] += rho[g.flatten([i, j])] * g.axis(0).spacing;
        }
    }
    let tau = sp.hbar * t / (2.0 * sp.mass);
    let s2 = 1.0 + tau * tau;
    let norm = 1.0 / (2.0 * PI * s2).sqrt();
    let peak = norm;
    (0..n1)
        .map(|j| {
            let z = g.axis(1).coord(j);
            (marg[j] - norm * (-z * z / (2.0 * s2)).exp()).abs()
        })
        .fold(0.0, f64::max)
        / peak
}

fn outcomes(res: &EnsembleResult) -> Vec<(f64, f64)> {
    res.endpoints
        .iter()
        .flatten()
        .map(|z| (z[0].signum(), z[1].signum()))
        .collect()
}

pub fn run_epr_b(p: &EprParams, seed: u64) -> Result<RunRecord> {
    p.validate()?;
    let u = p.units();
    let si = PhysicalParams::new(p.mass, p.hbar).with_magneton(p.magneton);
    let sp = u.scale_params(&si);
    let ax = Axis::centered(p.grid_points, p.spacing / u.length)?;
    let grid = Grid::plane(ax, ax);
    let settings = p.all_settings();

    let runs: Vec<Result<SettingRun>> = settings
        .par_iter()
        .enumerate()
        .map(|(i, s)| run_setting(p, &sp, &grid, *s, seed, i, if i == 0 { p.record } else { 0 }))
        .collect();
    let runs: Vec<SettingRun> = runs.into_iter().collect::<Result<_>>()?;

    let mut rec = RunRecord::new(ScenarioId::EprB, seed);
    let psi: [Complex64; 4] = singlet();
    let mut corr = Vec::new();
    let mut rows = Vec::new();
    for (s, run) in settings.iter().zip(&runs) {
        let o = outcomes(&run.result);
        let n = o.len() as f64;
        let e = o.iter().map(|(a, b)| a * b).sum::<f64>() / n;
        let err = ((1.0 - e * e) / n).sqrt();
        let born = spin_correlation(&psi, s[0], s[1]);
        let (pa, _) = binomial_fraction(o.iter().filter(|(a, _)| *a > 0.0).count(), o.len());
        let (pb, _) = binomial_fraction(o.iter().filter(|(_, b)| *b > 0.0).count(), o.len());
        let same = o.iter().filter(|(a, b)| a == b).count() as f64 / n;
        let key = format!("a{:.0}_b{:.0}", s[0].to_degrees(), s[1].to_degrees());
        rec.push_err(&format!("corr_{key}"), e, err);
        rec.push(&format!("born_{key}"), born);
        corr.push((e, err));
        rows.push(vec![s[0], s[1], e, err, born, pa, pb, same, run.result.abort_fraction()]);
    }
    let [a, a2, b, b2] = p.chsh;
    let lookup = |x: f64, y: f64| corr[find(&settings, [x, y]).expect("CHSH setting simulated")];
    let s_val = chsh(|x, y| lookup(x, y).0, a, a2, b, b2);
    let s_err = [lookup(a, b), lookup(a, b2), lookup(a2, b), lookup(a2, b2)]
        .iter()
        .map(|c| c.1 * c.1)
        .sum::<f64>()
        .sqrt();
    rec.push_err("chsh", s_val, s_err);
    rec.push("chsh_born", chsh(|x, y| spin_correlation(&psi, x, y), a, a2, b, b2));
    rec.push(
        "no_signalling_deviation",
        runs.iter().map(|r| r.marginal_deviation).fold(0.0, f64::max),
    );
    rec.push("abort_fraction", runs.iter().map(|r| r.result.abort_fraction()).fold(0.0, f64::max));
    rec.push("norm_drift", runs.iter().map(|r| r.norm_drift).fold(0.0, f64::max));
    rec.table_from(
        "correlations",
        &["a", "b", "correlation", "stat_error", "born", "p_a_up", "p_b_up", "same_sign_fraction", "abort_fraction"],
        rows,
    );

    let first = runs.into_iter().next().expect("at least one setting");
    let names = ["start", "before_b", "end"];
    rec.frames = first
        .frames
        .iter()
        .zip(names)
        .map(|((t, rho), name)| si_frame(format!("rho_{name}"), t * u.time, &grid, rho, u.length))
        .collect();
    rec.table_from(
        "endpoints",
        &["z_a0", "z_b0", "z_a", "z_b"],
        first
            .result
            .starts
            .iter()
            .zip(&first.result.endpoints)
            .map(|(s, e)| {
                let e = e.clone().unwrap_or(vec![f64::NAN; 2]);
                vec![s[0] * u.length, s[1] * u.length, e[0] * u.length, e[1] * u.length]
            })
            .collect(),
    );
    rec.trajectories = first
        .result
        .trajectories
        .into_iter()
        .map(|t: Trajectory| trajectory_to_si(t, u.length, u.time))
        .collect();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EprParams {
        EprParams {
            gradient: 2e3,
            flight_time: 2e-4,
            grid_points: 128,
            spacing: 2.5e-5,
            dt: 1e-5,
            samples: 2000,
            record: 2,
            settings: vec![[0.0, 0.0], [0.0, PI / 2.0]],
            ..Default::default()
        }
    }

    #[test]
    fn chsh_settings_are_added() {
        assert_eq!(EprParams::default().all_settings().len(), 6);
    }

    #[test]
    fn equal_angles_give_perfect_anticorrelation() {
        let rec = run_epr_b(&small(), 1).unwrap();
        let t = rec.table("correlations").unwrap();
        assert_eq!(t.rows[0][7], 0.0, "{:?}", t.rows[0]);
        assert!((rec.value("corr_a0_b0") + 1.0).abs() < 1e-12);
        let c = rec.stat("corr_a0_b90").unwrap();
        assert!(c.value.abs() < 4.0 * c.uncertainty.unwrap() + 0.02, "{c:?}");
        assert!(rec.value("no_signalling_deviation") < 1e-6, "{:?}", rec.stats);
    }
}
