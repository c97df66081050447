//! Far-field pattern behind an asymmetric aperture pair under two
//! hypotheses about a particle extension `s_int`.
//!
//! Aperture A is a single wide slit; B is a grating whose slits may be
//! narrower than `s_int`. Under the standard hypothesis a slit narrower
//! than `s_int` transmits nothing. Under the alternative hypothesis the
//! wave passes every slit, but particles whose path starts in a slit
//! narrower than `s_int` are vetoed at the aperture plane.
//!
//! Both apertures are lit uniformly. The far field is the momentum
//! distribution |FFT|². In one dimension Bohmian paths keep their order,
//! so a particle at aperture quantile q arrives at far-field quantile q;
//! the vetoed particles therefore remove whole quantile intervals.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::{at_least, positive, within, RunRecord, ScenarioId};
use crate::error::{Result, SimError};
use crate::fields::{Axis, Grid};
use crate::rng::stream;
use crate::spectral::Spectral;
use crate::stats::{binomial_fraction, chi_square_against_density};
use crate::trajectories::sample_initial_positions;

const LENGTH_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Standard,
    Alternative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymParams {
    pub slit_a_width: f64,
    pub slit_a_center: f64,
    pub grid_b_slit_width: f64,
    pub grid_b_count: usize,
    pub grid_b_pitch: f64,
    pub grid_b_center: f64,
    /// Particle extension s_int.
    pub extension: f64,
    pub edge_smoothing: f64,
    pub grid_points: usize,
    pub spacing: f64,
    pub samples: usize,
    /// Far-field rows written to the pattern table, |k| up to this value (1/m).
    pub pattern_k_max: f64,
}

impl Default for AsymParams {
    fn default() -> Self {
        Self {
            slit_a_width: 100e-6,
            slit_a_center: -150e-6,
            grid_b_slit_width: 0.1e-6,
            grid_b_count: 1000,
            grid_b_pitch: 0.2e-6,
            grid_b_center: 150e-6,
            extension: 1e-6,
            edge_smoothing: 0.1,
            grid_points: 262_144,
            spacing: 12.5e-9,
            samples: 10_000,
            pattern_k_max: 5e5,
        }
    }
}

impl AsymParams {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("slit_a_width", self.slit_a_width),
            ("grid_b_slit_width", self.grid_b_slit_width),
            ("grid_b_pitch", self.grid_b_pitch),
            ("extension", self.extension),
            ("spacing", self.spacing),
            ("pattern_k_max", self.pattern_k_max),
        ] {
            positive(k, v)?;
        }
        within("edge_smoothing", self.edge_smoothing, 1e-3, 0.5)?;
        at_least("grid_points", self.grid_points, 64)?;
        at_least("samples", self.samples, 10)?;
        if self.grid_b_count > 0 && self.grid_b_slit_width >= self.grid_b_pitch {
            return Err(super::invalid(
                "grid_b_slit_width",
                format!("< grid_b_pitch = {}", self.grid_b_pitch),
                self.grid_b_slit_width,
            ));
        }
        Ok(())
    }

    /// (centre, width) of every aperture, A first.
    fn apertures(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(self.slit_a_center, self.slit_a_width)];
        let n = self.grid_b_count as f64;
        for j in 0..self.grid_b_count {
            let c = self.grid_b_center + (j as f64 - (n - 1.0) / 2.0) * self.grid_b_pitch;
            out.push((c, self.grid_b_slit_width));
        }
        out
    }
}

fn transmission(x: f64, apertures: &[(f64, f64)], smoothing: f64) -> f64 {
    apertures
        .iter()
        .map(|&(c, w)| {
            let e = smoothing * w;
            if (x - c).abs() > w / 2.0 + 8.0 * e {
                0.0
            } else {
                0.5 * (erf((x - c + w / 2.0) / e) - erf((x - c - w / 2.0) / e))
            }
        })
        .sum()
}

/// Aperture-plane setup in reference units.
struct Plane {
    grid: Grid,
    /// Transmission through apertures at least `extension` wide.
    wide: Vec<f64>,
    /// Transmission through the narrower ones.
    narrow: Vec<f64>,
}

fn plane(p: &AsymParams) -> Result<Plane> {
    let l = LENGTH_SCALE;
    let grid = Grid::line(Axis::centered(p.grid_points, p.spacing / l)?);
    let ax = *grid.axis(0);
    let aps: Vec<(f64, f64)> = p.apertures().iter().map(|(c, w)| (c / l, w / l)).collect();
    for &(c, w) in &aps {
        if w < 4.0 * ax.spacing {
            return Err(SimError::Resolution(format!("aperture of width {} needs spacing <= {}", w * l, w * l / 4.0)));
        }
        if c - w < ax.first() || c + w > ax.last() {
            return Err(SimError::Domain(format!("aperture at {} outside the grid", c * l)));
        }
    }
    let s = p.extension / l;
    let (wide, narrow): (Vec<_>, Vec<_>) = aps.into_iter().partition(|a| a.1 >= s);
    let sample = |set: &[(f64, f64)]| -> Vec<f64> {
        (0..ax.n).map(|i| transmission(ax.coord(i), set, p.edge_smoothing)).collect()
    };
    Ok(Plane { wide: sample(&wide), narrow: sample(&narrow), grid })
}

/// Probability per far-field cell and the ascending wavenumbers (1/m).
fn far_field(plane: &Plane, amplitude: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let spectral = Spectral::new(&plane.grid);
    let mut data: Vec<Complex64> = amplitude.iter().map(|a| Complex64::new(*a, 0.0)).collect();
    if data.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(SimError::Normalization { norm2: 0.0 });
    }
    spectral.forward(&mut data);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| spectral.wavenumbers(0)[a].total_cmp(&spectral.wavenumbers(0)[b]));
    let power: Vec<f64> = order.iter().map(|&i| data[i].norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    let ks = order.iter().map(|&i| spectral.wavenumbers(0)[i] / LENGTH_SCALE).collect();
    Ok((ks, power.iter().map(|v| v / total).collect()))
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(p.len() + 1);
    out.push(0.0);
    for v in p {
        acc += v / total;
        out.push(acc);
    }
    out
}

/// Quantile intervals of the aperture distribution that reach the far field.
fn admitted_intervals(rho: &[f64], keep: &[bool]) -> Vec<(f64, f64)> {
    let cdf = cumulative(rho);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in 0..rho.len() {
        if !keep[i] || rho[i] == 0.0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.1 == cdf[i] => last.1 = cdf[i + 1],
            _ => out.push((cdf[i], cdf[i + 1])),
        }
    }
    out
}

fn overlap(lo: f64, hi: f64, set: &[(f64, f64)]) -> f64 {
    set.iter().map(|(a, b)| (hi.min(*b) - lo.max(*a)).max(0.0)).sum()
}

pub struct Pattern {
    pub k: Vec<f64>,
    /// Probability per cell, summing to one.
    pub probability: Vec<f64>,
    /// Fraction of particles removed at the aperture plane.
    pub veto_fraction: f64,
}

/// Far-field pattern under one hypothesis.
pub fn asym_pattern(p: &AsymParams, hypothesis: Hypothesis) -> Result<Pattern> {
    p.validate()?;
    let pl = plane(p)?;
    pattern_on(&pl, hypothesis)
}

fn pattern_on(pl: &Plane, hypothesis: Hypothesis) -> Result<Pattern> {
    match hypothesis {
        Hypothesis::Standard => {
            let (k, probability) = far_field(pl, &pl.wide)?;
            Ok(Pattern { k, probability, veto_fraction: 0.0 })
        }
        Hypothesis::Alternative => {
            let amp: Vec<f64> = pl.wide.iter().zip(&pl.narrow).map(|(a, b)| a + b).collect();
            let (k, full) = far_field(pl, &amp)?;
            let rho: Vec<f64> = amp.iter().map(|a| a * a).collect();
            let keep: Vec<bool> = pl.wide.iter().zip(&pl.narrow).map(|(a, b)| a >= b).collect();
            let admitted = admitted_intervals(&rho, &keep);
            let kept_mass: f64 = admitted.iter().map(|(a, b)| b - a).sum();
            let cdf = cumulative(&full);
            let mut probability: Vec<f64> =
                (0..full.len()).map(|i| overlap(cdf[i], cdf[i + 1], &admitted)).collect();
            let s: f64 = probability.iter().sum();
            if !(s > 0.0) {
                return Err(SimError::Normalization { norm2: 0.0 });
            }
            probability.iter_mut().for_each(|v| *v /= s);
            Ok(Pattern { k, probability, veto_fraction: 1.0 - kept_mass })
        }
    }
}

/// (max − min)/(max + min) within one cross-fringe period of the peak.
fn visibility(pat: &Pattern, period: f64) -> f64 {
    let ipk = (0..pat.k.len())
        .max_by(|&a, &b| pat.probability[a].total_cmp(&pat.probability[b]))
        .unwrap();
    let kc = pat.k[ipk];
    let window: Vec<f64> = pat
        .k
        .iter()
        .zip(&pat.probability)
        .filter(|(k, _)| (*k - kc).abs() <= period)
        .map(|(_, v)| *v)
        .collect();
    let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo) / (hi + lo)
}

pub fn run_asym_interference(p: &AsymParams, seed: u64) -> Result<RunRecord> {
    p.validate()?;
    let pl = plane(p)?;
    let std_pat = pattern_on(&pl, Hypothesis::Standard)?;
    let alt_pat = pattern_on(&pl, Hypothesis::Alternative)?;
    let mut rec = RunRecord::new(ScenarioId::AsymInterference, seed);

    let l1: f64 = std_pat.probability.iter().zip(&alt_pat.probability).map(|(a, b)| (a - b).abs()).sum();
    rec.push("l1_distance", l1);
    let period = 2.0 * PI / (p.grid_b_center - p.slit_a_center).abs().max(p.slit_a_width);
    rec.push("visibility_standard", visibility(&std_pat, period));
    rec.push("visibility_alternative", visibility(&alt_pat, period));
    rec.push("veto_fraction_expected", alt_pat.veto_fraction);

    // sampled particles under the alternative hypothesis
    let amp: Vec<f64> = pl.wide.iter().zip(&pl.narrow).map(|(a, b)| a + b).collect();
    let rho: Vec<f64> = amp.iter().map(|a| a * a).collect();
    let starts = sample_initial_positions(&pl.grid, &rho, p.samples, &mut stream(seed, "asym/starts"))?;
    let ax = *pl.grid.axis(0);
    let x_cdf = cumulative(&rho);
    let (ks, full) = far_field(&pl, &amp)?;
    let k_cdf = cumulative(&full);
    let dk = ks[1] - ks[0];
    let mut arrivals = Vec::new();
    let mut vetoed = 0;
    for s in &starts {
        let f = (s[0] - ax.origin) / ax.spacing + 0.5;
        let i = (f.floor() as usize).min(ax.n - 1);
        if pl.wide[i] < pl.narrow[i] {
            vetoed += 1;
            continue;
        }
        let q = x_cdf[i] + (f - i as f64) * (x_cdf[i + 1] - x_cdf[i]);
        let j = k_cdf.partition_point(|c| *c < q).clamp(1, full.len()) - 1;
        let frac = if full[j] > 0.0 { (q - k_cdf[j]) / full[j] } else { 0.5 };
        arrivals.push(ks[j] - 0.5 * dk + frac.clamp(0.0, 1.0) * dk);
    }
    let (vf, verr) = binomial_fraction(vetoed, starts.len());
    rec.push_err("veto_fraction", vf, verr);
    if arrivals.len() >= 10 {
        let kgrid = Grid::line(Axis::new(ks.len(), ks[0], dk)?);
        let chi = chi_square_against_density(&arrivals, &kgrid, &alt_pat.probability, 5.0)?;
        rec.push("alternative_sample_p", chi.p_value);
    }

    let rows = (0..ks.len())
        .filter(|&i| ks[i].abs() <= p.pattern_k_max)
        .map(|i| vec![ks[i], std_pat.probability[i] / dk, alt_pat.probability[i] / dk])
        .collect();
    rec.table_from("far_field", &["k", "standard", "alternative"], rows);
    rec.table_from("arrivals_alternative", &["k"], arrivals.into_iter().map(|k| vec![k]).collect());
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AsymParams {
        AsymParams {
            slit_a_width: 10e-6,
            slit_a_center: -15e-6,
            grid_b_count: 50,
            grid_b_center: 15e-6,
            grid_points: 16_384,
            samples: 2000,
            ..Default::default()
        }
    }

    #[test]
    fn hypotheses_differ_when_grating_is_sub_extension() {
        let rec = run_asym_interference(&small(), 0).unwrap();
        assert!(rec.value("l1_distance") > 0.1, "{:?}", rec.stats);
        let v = rec.stat("veto_fraction").unwrap();
        assert!((v.value - rec.value("veto_fraction_expected")).abs() < 4.0 * v.uncertainty.unwrap() + 1e-3);
        assert!(rec.value("alternative_sample_p") > 1e-4, "{:?}", rec.stats);
    }

    #[test]
    fn tiny_extension_makes_hypotheses_identical() {
        let p = AsymParams { extension: 0.05e-6, ..small() };
        let rec = run_asym_interference(&p, 0).unwrap();
        assert!(rec.value("l1_distance") < 1e-12, "{:?}", rec.stats);
        assert_eq!(rec.value("veto_fraction"), 0.0);
    }

    #[test]
    fn no_grating_makes_hypotheses_identical() {
        let p = AsymParams { grid_b_count: 0, ..small() };
        let rec = run_asym_interference(&p, 0).unwrap();
        assert!(rec.value("l1_distance") < 1e-12, "{:?}", rec.stats);
    }
}
