//! De Broglie–Bohm trajectories over stored kinematic frames.
//!
//! Frames hold the velocity field at one instant; between two frames the
//! field is interpolated linearly in time and (bi)linearly in space, and
//! each path is advanced with classical RK4. Ensembles are streamed: only
//! the two frames bracketing the current interval need to be alive.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::fields::{ComplexField, Grid, PhysicalParams, SpinorField};
use crate::madelung::{bloch_vector, spin_angles, stencil, MadelungView};
use crate::spectral::Spectral;

pub struct KinematicFrame {
    pub t: f64,
    pub view: MadelungView,
    spin: Option<SpinorField>,
}

impl KinematicFrame {
    pub fn scalar(t: f64, field: &ComplexField, params: &PhysicalParams) -> Self {
        let s = SpinorField { grid: field.grid.clone(), components: vec![field.clone()] };
        let view = MadelungView::kinematic(&Spectral::new(&field.grid), &s, params);
        Self { t, view, spin: None }
    }

    /// Frame of a spinor state; `track_spin` keeps the components so paths
    /// can record (θ, φ) (two-component states only).
    pub fn spinor(t: f64, state: &SpinorField, params: &PhysicalParams, spectral: &Spectral, track_spin: bool) -> Self {
        let view = MadelungView::kinematic(spectral, state, params);
        let spin = (track_spin && state.n_components() == 2).then(|| state.clone());
        Self { t, view, spin }
    }

    pub fn velocity_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.view.velocity_at(x)
    }

    pub fn spin_at(&self, x: &[f64]) -> Option<(f64, f64)> {
        let s = self.spin.as_ref()?;
        let st = stencil(&s.grid, x).ok()?;
        if st.iter().any(|(i, w)| *w > 0.0 && !self.view.valid[*i]) {
            return None;
        }
        let v: Vec<Complex64> = s
            .components
            .iter()
            .map(|c| st.iter().map(|(i, w)| c.values[*i] * w).sum::<Complex64>() * c.carrier_phase(x))
            .collect();
        Some(spin_angles(bloch_vector([v[0], v[1]])))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    /// Spin polar angle per stored time (spinor runs only).
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub aborted_at: Option<f64>,
}

impl Trajectory {
    pub fn last_position(&self) -> &[f64] {
        self.positions.last().expect("trajectory has a start point")
    }
}

#[derive(Debug, Clone)]
struct Walker {
    x: Vec<f64>,
    aborted_at: Option<f64>,
    spin: Option<(f64, f64)>,
    path: Option<Trajectory>,
}

/// Result of an ensemble integration. `trajectories` holds the full paths of
/// the first `record` samples; endpoints and final spins cover every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub starts: Vec<Vec<f64>>,
    pub endpoints: Vec<Option<Vec<f64>>>,
    pub final_spin: Vec<Option<(f64, f64)>>,
    pub trajectories: Vec<Trajectory>,
    pub aborted: usize,
}

impl EnsembleResult {
    pub fn abort_fraction(&self) -> f64 {
        self.aborted as f64 / self.starts.len().max(1) as f64
    }
}

pub struct Ensemble {
    starts: Vec<Vec<f64>>,
    walkers: Vec<Walker>,
    dt_traj: f64,
}

impl Ensemble {
    pub fn new(starts: Vec<Vec<f64>>, record: usize, dt_traj: f64) -> Result<Self> {
        if !(dt_traj > 0.0) {
            return Err(SimError::StepSize(format!("trajectory step must be > 0, got {dt_traj}")));
        }
        let walkers = starts
            .iter()
            .enumerate()
            .map(|(label, x)| Walker {
                x: x.clone(),
                aborted_at: None,
                spin: None,
                path: (label < record).then(|| Trajectory {
                    label,
                    times: Vec::new(),
                    positions: Vec::new(),
                    theta: Vec::new(),
                    phi: Vec::new(),
                    aborted_at: None,
                }),
            })
            .collect();
        Ok(Self { starts, walkers, dt_traj })
    }

    /// Record the starting frame. Samples outside the valid region abort at once.
    pub fn begin(&mut self, frame: &KinematicFrame) {
        self.walkers.par_iter_mut().for_each(|w| {
            if frame.velocity_at(&w.x).is_err() {
                w.aborted_at = Some(frame.t);
            }
            w.spin = frame.spin_at(&w.x);
            record(w, frame.t);
        });
    }

    /// Advance every live path from frame `a` to frame `b`.
    pub fn advance(&mut self, a: &KinematicFrame, b: &KinematicFrame) {
        let span = b.t - a.t;
        let n = ((span / self.dt_traj).ceil() as usize).max(1);
        let h = span / n as f64;
        self.walkers.par_iter_mut().for_each(|w| {
            if w.aborted_at.is_some() {
                return;
            }
            for k in 0..n {
                let s0 = k as f64 / n as f64;
                match rk4(a, b, &w.x, s0, h, span) {
                    Ok(x) => w.x = x,
                    Err(_) => {
                        w.aborted_at = Some(a.t + s0 * span);
                        break;
                    }
                }
            }
            if w.aborted_at.is_none() {
                if b.velocity_at(&w.x).is_err() {
                    w.aborted_at = Some(b.t);
                }
                w.spin = b.spin_at(&w.x);
                record(w, b.t);
            } else if let Some(p) = w.path.as_mut() {
                p.aborted_at = w.aborted_at;
            }
        });
    }

    pub fn finish(self) -> EnsembleResult {
        let aborted = self.walkers.iter().filter(|w| w.aborted_at.is_some()).count();
        let mut endpoints = Vec::with_capacity(self.walkers.len());
        let mut final_spin = Vec::with_capacity(self.walkers.len());
        let mut trajectories = Vec::new();
        for w in self.walkers {
            let ok = w.aborted_at.is_none();
            endpoints.push(ok.then(|| w.x.clone()));
            final_spin.push(if ok { w.spin } else { None });
            if let Some(mut p) = w.path {
                p.aborted_at = w.aborted_at;
                trajectories.push(p);
            }
        }
        EnsembleResult { starts: self.starts, endpoints, final_spin, trajectories, aborted }
    }
}

fn record(w: &mut Walker, t: f64) {
    if w.aborted_at.is_some() {
        return;
    }
    if let Some(p) = w.path.as_mut() {
        p.times.push(t);
        p.positions.push(w.x.clone());
        if let Some((th, ph)) = w.spin {
            p.theta.push(th);
            p.phi.push(ph);
        }
    }
}

fn blended(a: &KinematicFrame, b: &KinematicFrame, x: &[f64], s: f64) -> Result<Vec<f64>> {
    let va = a.velocity_at(x)?;
    let vb = b.velocity_at(x)?;
    Ok(va.iter().zip(&vb).map(|(p, q)| (1.0 - s) * p + s * q).collect())
}

fn rk4(a: &KinematicFrame, b: &KinematicFrame, x: &[f64], s0: f64, h: f64, span: f64) -> Result<Vec<f64>> {
    let ds = h / span;
    let add = |x: &[f64], k: &[f64], f: f64| -> Vec<f64> { x.iter().zip(k).map(|(p, q)| p + f * q).collect() };
    let k1 = blended(a, b, x, s0)?;
    let k2 = blended(a, b, &add(x, &k1, h / 2.0), s0 + ds / 2.0)?;
    let k3 = blended(a, b, &add(x, &k2, h / 2.0), s0 + ds / 2.0)?;
    let k4 = blended(a, b, &add(x, &k3, h), s0 + ds)?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrate one path through a stored sequence of frames.
pub fn integrate_trajectory(frames: &[KinematicFrame], x0: &[f64], dt_traj: f64) -> Result<Trajectory> {
    let first = frames
        .first()
        .ok_or_else(|| SimError::InvalidArgument("no kinematic frames".into()))?;
    if frames.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(SimError::InvalidArgument("frame times must increase strictly".into()));
    }
    first.velocity_at(x0)?;
    let mut ens = Ensemble::new(vec![x0.to_vec()], 1, dt_traj)?;
    ens.begin(first);
    for w in frames.windows(2) {
        ens.advance(&w[0], &w[1]);
    }
    Ok(ens.finish().trajectories.remove(0))
}

/// `n` i.i.d. draws from the density `rho` sampled on `grid`: inverse CDF of
/// the cell-constant density in 1D, rejection over cells in 2D, with a
/// uniform offset inside the chosen cell.
pub fn sample_initial_positions<R: Rng>(grid: &Grid, rho: &[f64], n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(SimError::InvalidArgument("sample count must be >= 1".into()));
    }
    if rho.len() != grid.len() || rho.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(SimError::InvalidArgument("density must be finite, non-negative and match the grid".into()));
    }
    let total: f64 = rho.iter().sum();
    if !(total > 0.0) {
        return Err(SimError::Normalization { norm2: total });
    }
    let mut out = Vec::with_capacity(n);
    match grid.dims() {
        1 => {
            let ax = grid.axis(0);
            let mut cdf = Vec::with_capacity(rho.len());
            let mut acc = 0.0;
            for r in rho {
                acc += r / total;
                cdf.push(acc);
            }
            for _ in 0..n {
                let u: f64 = rng.random::<f64>() * acc;
                let i = cdf.partition_point(|c| *c <= u).min(rho.len() - 1);
                let offset: f64 = rng.random::<f64>() - 0.5;
                out.push(vec![ax.coord(i) + offset * ax.spacing]);
            }
        }
        _ => {
            let max = rho.iter().cloned().fold(0.0, f64::max);
            while out.len() < n {
                let i = rng.random_range(0..rho.len());
                if rng.random::<f64>() * max < rho[i] {
                    let p = grid.point(i);
                    let off0: f64 = rng.random::<f64>() - 0.5;
                    let off1: f64 = rng.random::<f64>() - 0.5;
                    out.push(vec![p[0] + off0 * grid.axis(0).spacing, p[1] + off1 * grid.axis(1).spacing]);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian_packet, Axis};
    use crate::propagators::{evolve, Potential, SplitStepper, StepConfig};
    use crate::rng::stream;

    fn line(n: usize, h: f64) -> Grid {
        Grid::line(Axis::centered(n, h).unwrap())
    }

    #[test]
    fn gaussian_sample_mean_within_clt_bound() {
        let grid = line(1024, 0.02);
        let p = PhysicalParams::new(1.0, 1.0);
        let f = gaussian_packet(&grid, &[0.7], 0.8, &[0.0], &p).unwrap();
        let n = 100_000;
        let xs = sample_initial_positions(&grid, &f.density(), n, &mut stream(3, "t")).unwrap();
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.7).abs() < 4.0 * 0.8 / (n as f64).sqrt(), "{mean}");
        let var = xs.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var.sqrt() - 0.8).abs() < 0.01);
    }

    #[test]
    fn sampling_is_reproducible() {
        let grid = Grid::plane(Axis::centered(64, 0.25).unwrap(), Axis::centered(64, 0.25).unwrap());
        let p = PhysicalParams::new(1.0, 1.0);
        let f = gaussian_packet(&grid, &[0.0, 0.5], 1.2, &[0.0, 0.0], &p).unwrap();
        let a = sample_initial_positions(&grid, &f.density(), 1, &mut stream(11, "x")).unwrap();
        let b = sample_initial_positions(&grid, &f.density(), 1, &mut stream(11, "x")).unwrap();
        assert_eq!(a, b);
        assert!(sample_initial_positions(&grid, &f.density(), 0, &mut stream(11, "x")).is_err());
    }

    #[test]
    fn two_packet_fraction_matches_weight() {
        let grid = line(2048, 0.01);
        let p = PhysicalParams::new(1.0, 1.0);
        let a = gaussian_packet(&grid, &[-3.0], 0.5, &[0.0], &p).unwrap();
        let b = gaussian_packet(&grid, &[3.0], 0.5, &[0.0], &p).unwrap();
        let w = 0.3f64;
        let rho: Vec<f64> = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x * w.sqrt() + y * (1.0 - w).sqrt()).norm_sqr())
            .collect();
        let n = 20_000;
        let xs = sample_initial_positions(&grid, &rho, n, &mut stream(5, "s")).unwrap();
        let upper = xs.iter().filter(|x| x[0] > 0.0).count() as f64 / n as f64;
        let sd = (w * (1.0 - w) / n as f64).sqrt();
        assert!((upper - (1.0 - w)).abs() < 4.0 * sd, "{upper}");
    }

    fn free_frames(x0: f64, v: f64, steps_per_frame: usize, frames: usize) -> (Vec<KinematicFrame>, f64) {
        let grid = line(1024, 0.05);
        let p = PhysicalParams::new(1.0, 1.0);
        let f = gaussian_packet(&grid, &[x0], 1.0, &[v], &p).unwrap();
        let dt = 0.01;
        let mut st = SplitStepper::scalar(&grid, &Potential::None, &p, StepConfig::periodic(dt)).unwrap();
        let mut out = Vec::new();
        evolve(
            &mut st,
            SpinorField::new(vec![f]).unwrap(),
            0.0,
            dt * (steps_per_frame * frames) as f64,
            steps_per_frame,
            |t, s| {
                out.push(KinematicFrame::scalar(t, &s.components[0], &p));
                Ok(())
            },
        )
        .unwrap();
        (out, dt)
    }

    #[test]
    fn center_path_moves_with_group_velocity() {
        let (frames, _) = free_frames(-2.0, 0.5, 1, 200);
        let tr = integrate_trajectory(&frames, &[-2.0], 0.01).unwrap();
        assert_eq!(tr.times.len(), 201);
        assert!(tr.aborted_at.is_none());
        assert!((tr.last_position()[0] + 1.0).abs() < 1e-5, "{:?}", tr.last_position());
    }

    #[test]
    fn paths_do_not_cross_in_one_dimension() {
        let (frames, _) = free_frames(0.0, 0.0, 10, 20);
        let starts: Vec<Vec<f64>> = (0..30).map(|i| vec![-2.5 + i as f64 * 0.17]).collect();
        let mut ens = Ensemble::new(starts, 30, 0.02).unwrap();
        ens.begin(&frames[0]);
        for w in frames.windows(2) {
            ens.advance(&w[0], &w[1]);
        }
        let res = ens.finish();
        assert_eq!(res.aborted, 0);
        for k in 0..res.trajectories[0].times.len() {
            for pair in res.trajectories.windows(2) {
                assert!(pair[0].positions[k][0] < pair[1].positions[k][0]);
            }
        }
    }

    #[test]
    fn masked_start_aborts() {
        let (frames, _) = free_frames(0.0, 0.0, 10, 2);
        let mut ens = Ensemble::new(vec![vec![0.0], vec![24.0]], 2, 0.02).unwrap();
        ens.begin(&frames[0]);
        ens.advance(&frames[0], &frames[1]);
        let r = ens.finish();
        assert_eq!(r.aborted, 1);
        assert!(r.endpoints[1].is_none());
        assert_eq!(r.trajectories[1].aborted_at, Some(0.0));
        assert!(integrate_trajectory(&frames, &[24.0], 0.02).is_err());
    }
}
