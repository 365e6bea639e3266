//! Parallel frequency sweep over an immutable lifted system.

use super::{periodic_steady_state, Tone, ToneResponse};
use crate::circuit::PiecewiseLtiSystem;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

/// Metadata stamped into sweep results for reproducibility.
#[derive(Debug, Clone, Default)]
pub struct SweepMeta {
    pub config_hash: u64,
    pub loop_enabled: bool,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub f_in: f64,
    pub response: Option<ToneResponse>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub meta: SweepMeta,
}

impl SweepResult {
    /// Magnitude (dB) of component k at a probe across the sweep, skipping
    /// failed points.
    pub fn curve(&self, probe: usize, k: i64) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| {
                p.response
                    .as_ref()
                    .map(|r| (p.f_in, crate::util::db(r.component(probe, k).norm())))
            })
            .collect()
    }

    /// Baseband magnitude (dB) at a probe across the sweep.
    pub fn baseband_curve(&self, probe: usize) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| {
                p.response
                    .as_ref()
                    .map(|r| (p.f_in, crate::util::db(r.baseband(probe).1.norm())))
            })
            .collect()
    }

    pub fn failed_points(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

/// Uniform frequency grid, inclusive of both ends.
pub fn linear_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![start];
    }
    let step = (stop - start) / (points - 1) as f64;
    (0..points).map(|i| start + i as f64 * step).collect()
}

/// Sweeps the input frequency, one periodic-steady-state solve per point.
/// Points are independent and run in parallel; result order follows the
/// grid, and per-point failures are recorded without aborting the sweep.
pub fn harmonic_sweep(
    sys: &PiecewiseLtiSystem,
    source: usize,
    grid: &[f64],
    kmax: i64,
) -> Result<SweepResult> {
    let f_max = 8.0 * sys.f_lo;
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty sweep grid".into()));
    }
    for &f in grid {
        if !(f > 0.0 && f < f_max) {
            return Err(Error::InvalidInput(format!(
                "sweep frequency {f} outside (0, {f_max})"
            )));
        }
    }
    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&f_in| {
            let tone = Tone {
                source,
                amp: Complex64::new(1.0, 0.0),
                freq: f_in,
            };
            match periodic_steady_state(sys, &tone, kmax) {
                Ok(r) => SweepPoint {
                    f_in,
                    response: Some(r),
                    error: None,
                },
                Err(e) => SweepPoint {
                    f_in,
                    response: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepResult {
        points,
        meta: SweepMeta::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{extract_segments, Element, Netlist, GROUND};
    use crate::clocks::make_nonoverlap_clocks;

    #[test]
    fn grid_is_inclusive_and_uniform() {
        let g = linear_grid(300e6, 3e9, 271);
        assert_eq!(g.len(), 271);
        assert!((g[0] - 300e6).abs() < 1.0);
        assert!((g[270] - 3e9).abs() < 1.0);
        assert!((g[1] - g[0] - 10e6).abs() < 1.0);
    }

    #[test]
    fn sweep_preserves_grid_order_and_rejects_out_of_band() {
        let mut nl = Netlist::new();
        let inn = nl.node("in");
        let out = nl.node("out");
        nl.add(Element::VSource {
            name: "vin".into(),
            p: inn,
            n: GROUND,
        });
        nl.add(Element::Resistor {
            name: "r".into(),
            p: inn,
            n: out,
            ohms: 50.0,
        });
        nl.add(Element::Capacitor {
            name: "c".into(),
            p: out,
            n: GROUND,
            farads: 1e-12,
        });
        nl.add_probe("vout", out, GROUND);
        let clocks = make_nonoverlap_clocks(8, 500e6, 0.125, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        let grid = linear_grid(100e6, 900e6, 9);
        let r = harmonic_sweep(&sys, 0, &grid, 3).unwrap();
        assert_eq!(r.points.len(), 9);
        for (p, &f) in r.points.iter().zip(&grid) {
            assert_eq!(p.f_in, f);
            assert!(p.response.is_some());
        }
        assert!(harmonic_sweep(&sys, 0, &[5e9], 3).is_err());
        assert!(harmonic_sweep(&sys, 0, &[], 3).is_err());
    }
}
