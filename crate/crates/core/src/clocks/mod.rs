//! Multiphase non-overlapping clocks and PWM-LO pulse trains.
//!
//! The clock scheme drives the N-path switches; signed pulse trains drive the
//! feedback upconverter. Fourier coefficients of both are computed by exact
//! piecewise integration so that spectral contracts can be checked without
//! sampling error.

mod pwm;

pub use pwm::{synthesize_pwm_lo, PwmSynthesisReport};

use crate::error::{Error, Result};
use num_complex::Complex64;

/// N-phase non-overlapping rectangular clock set over one LO period.
#[derive(Debug, Clone)]
pub struct ClockScheme {
    pub n_phases: usize,
    pub f_lo: f64,
    pub duty: f64,
    pub guard: f64,
    /// Per-phase (start, end) high-window within [0, T).
    pub phase_windows: Vec<(f64, f64)>,
}

impl ClockScheme {
    pub fn period(&self) -> f64 {
        1.0 / self.f_lo
    }

    /// True when phase `k` is high at time `t` (taken modulo the period).
    pub fn phase_active(&self, k: usize, t: f64) -> bool {
        let t = t.rem_euclid(self.period());
        let (s, e) = self.phase_windows[k];
        t >= s && t < e
    }

    /// All switching edges within [0, T), sorted and deduplicated.
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .phase_windows
            .iter()
            .flat_map(|&(s, t)| [s, t])
            .map(|t| t.rem_euclid(self.period()))
            .collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * self.period());
        e
    }

    /// Exact Fourier coefficient c_k of the phase-`p` indicator function.
    pub fn window_fourier(&self, p: usize, k: i64) -> Complex64 {
        let (s, e) = self.phase_windows[p];
        fourier_intervals(&[(s, e, 1.0)], self.period(), k)
    }
}

/// Builds an N-phase non-overlapping clock set: phase k is high on
/// [k*T/n, k*T/n + duty*T - guard).
pub fn make_nonoverlap_clocks(
    n_phases: usize,
    f_lo: f64,
    duty: f64,
    guard: f64,
) -> Result<ClockScheme> {
    if n_phases < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 phases, got {n_phases}"
        )));
    }
    if !(f_lo > 0.0) || !f_lo.is_finite() {
        return Err(Error::InvalidInput(format!("bad f_lo {f_lo}")));
    }
    if duty <= 0.0 || duty * n_phases as f64 > 1.0 + 1e-12 {
        return Err(Error::InvalidDuty { duty, n_phases });
    }
    let period = 1.0 / f_lo;
    let width = duty * period;
    if guard < 0.0 || guard >= width {
        return Err(Error::InvalidGuard {
            guard_s: guard,
            width_s: width,
        });
    }
    let phase_windows = (0..n_phases)
        .map(|k| {
            let start = k as f64 * period / n_phases as f64;
            (start, start + width - guard)
        })
        .collect();
    Ok(ClockScheme {
        n_phases,
        f_lo,
        duty,
        guard,
        phase_windows,
    })
}

/// A signed pulse on the PWM grid: half-open cell interval with polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub start: usize,
    pub end: usize,
    pub polarity: i8,
}

/// Signed pulse train over one LO period on a uniform grid of `grid` cells.
/// The waveform takes values in {-1, 0, +1}, constant per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PwmWaveform {
    pub f_lo: f64,
    pub grid: usize,
    pub pulses: Vec<Pulse>,
}

impl PwmWaveform {
    pub fn from_cells(f_lo: f64, cells: &[i8]) -> Self {
        let grid = cells.len();
        let mut pulses = Vec::new();
        let mut i = 0;
        while i < grid {
            if cells[i] != 0 {
                let pol = cells[i];
                let start = i;
                while i < grid && cells[i] == pol {
                    i += 1;
                }
                pulses.push(Pulse {
                    start,
                    end: i,
                    polarity: pol,
                });
            } else {
                i += 1;
            }
        }
        PwmWaveform { f_lo, grid, pulses }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f_lo
    }

    /// Per-cell values over one period.
    pub fn cells(&self) -> Vec<i8> {
        let mut v = vec![0i8; self.grid];
        for p in &self.pulses {
            for c in v.iter_mut().take(p.end).skip(p.start) {
                *c = p.polarity;
            }
        }
        v
    }

    /// Value at time `t` (modulo the period).
    pub fn value_at(&self, t: f64) -> i8 {
        let period = self.period();
        let tau = t.rem_euclid(period);
        let cell = ((tau / period) * self.grid as f64).floor() as usize;
        let cell = cell.min(self.grid - 1);
        self.cells()[cell]
    }

    /// All cell-boundary times in [0, T) where the value changes.
    pub fn edges(&self) -> Vec<f64> {
        let cells = self.cells();
        let dt = self.period() / self.grid as f64;
        let mut out = Vec::new();
        for i in 0..self.grid {
            let prev = cells[(i + self.grid - 1) % self.grid];
            if cells[i] != prev {
                out.push(i as f64 * dt);
            }
        }
        out
    }

    /// Cyclic shift by `cells` grid cells (a delay of cells*T/grid).
    pub fn shifted(&self, cells_by: usize) -> Self {
        let src = self.cells();
        let mut dst = vec![0i8; self.grid];
        for (i, &v) in src.iter().enumerate() {
            dst[(i + cells_by) % self.grid] = v;
        }
        PwmWaveform::from_cells(self.f_lo, &dst)
    }

    /// True if pulses are pairwise disjoint on the grid (always holds for
    /// values built via `from_cells`; verifies hand-built pulse lists).
    pub fn pulses_disjoint(&self) -> bool {
        let mut covered = vec![false; self.grid];
        for p in &self.pulses {
            if p.start >= p.end || p.end > self.grid {
                return false;
            }
            for c in covered.iter_mut().take(p.end).skip(p.start) {
                if *c {
                    return false;
                }
                *c = true;
            }
        }
        true
    }

    /// Exact complex Fourier coefficient c_k (piecewise integration of the
    /// piecewise-constant waveform; no sampling error).
    pub fn fourier_coefficient(&self, k: i64) -> Complex64 {
        let period = self.period();
        let dt = period / self.grid as f64;
        let ivs: Vec<(f64, f64, f64)> = self
            .pulses
            .iter()
            .map(|p| {
                (
                    p.start as f64 * dt,
                    p.end as f64 * dt,
                    f64::from(p.polarity),
                )
            })
            .collect();
        fourier_intervals(&ivs, period, k)
    }

    /// |c_1|/|c_3| in dB.
    pub fn fundamental_suppression_db(&self) -> f64 {
        crate::util::db(self.fourier_coefficient(1).norm())
            - crate::util::db(self.fourier_coefficient(3).norm())
    }

    /// |c_3| - |c_5| imbalance in dB.
    pub fn harmonic_balance_db(&self) -> f64 {
        crate::util::db(self.fourier_coefficient(3).norm())
            - crate::util::db(self.fourier_coefficient(5).norm())
    }

    /// Half-wave odd symmetry: value(t + T/2) == -value(t) for every cell.
    pub fn is_half_wave_odd(&self) -> bool {
        let c = self.cells();
        let h = self.grid / 2;
        self.grid % 2 == 0 && (0..h).all(|i| c[i + h] == -c[i])
    }

    /// Serializes to the text pulse format: a header line with f_lo and grid,
    /// then one "start end polarity" line per pulse.
    pub fn to_text(&self) -> String {
        let mut s = format!("pwm f_lo_hz={} grid={}\n", self.f_lo, self.grid);
        for p in &self.pulses {
            s.push_str(&format!("{} {} {:+}\n", p.start, p.end, p.polarity));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty pwm text".into()))?;
        let mut f_lo = None;
        let mut grid = None;
        for tok in header.split_whitespace().skip(1) {
            if let Some(v) = tok.strip_prefix("f_lo_hz=") {
                f_lo = v.parse::<f64>().ok();
            } else if let Some(v) = tok.strip_prefix("grid=") {
                grid = v.parse::<usize>().ok();
            }
        }
        let (f_lo, grid) = match (f_lo, grid) {
            (Some(f), Some(g)) if f > 0.0 && g > 0 => (f, g),
            _ => return Err(Error::InvalidInput(format!("bad pwm header: {header}"))),
        };
        let mut pulses = Vec::new();
        for (ln, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::InvalidInput(format!("bad pulse at line {}: {line}", ln + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            pulses.push(Pulse {
                start: f[0].parse().map_err(|_| bad())?,
                end: f[1].parse().map_err(|_| bad())?,
                polarity: f[2].parse().map_err(|_| bad())?,
            });
        }
        let w = PwmWaveform { f_lo, grid, pulses };
        if !w.pulses_disjoint() {
            return Err(Error::InvalidInput("overlapping pulses".into()));
        }
        Ok(w)
    }
}

/// Ideal +/-1 square wave at f_lo on a grid (50% duty), used by the
/// square-LO upconverter variant.
pub fn square_wave(f_lo: f64, grid: usize) -> PwmWaveform {
    let mut cells = vec![1i8; grid];
    for c in cells.iter_mut().skip(grid / 2) {
        *c = -1;
    }
    PwmWaveform::from_cells(f_lo, &cells)
}

/// The eight positive and eight negative pulse sequences of the upconverter
/// bank. Sequence k is the parent's pulses of one polarity delayed by
/// (k-1) * T/8.
#[derive(Debug, Clone)]
pub struct PwmBank {
    pub positive: Vec<PwmWaveform>,
    pub negative: Vec<PwmWaveform>,
}

impl PwmBank {
    /// The signed gate waveform for branch k: positive and negative pulses
    /// recombined, i.e. the parent delayed by k*T/8.
    pub fn gate(&self, k: usize) -> PwmWaveform {
        let p = self.positive[k].cells();
        let n = self.negative[k].cells();
        let cells: Vec<i8> = p.iter().zip(&n).map(|(&a, &b)| a + b).collect();
        PwmWaveform::from_cells(self.positive[k].f_lo, &cells)
    }
}

/// Splits a PWM waveform into its positive / negative pulse sequences and the
/// eight shifted copies of each.
pub fn split_and_shift(pwm: &PwmWaveform) -> Result<PwmBank> {
    if pwm.grid % 8 != 0 {
        return Err(Error::InvalidInput(format!(
            "grid {} not divisible by 8",
            pwm.grid
        )));
    }
    let step = pwm.grid / 8;
    let cells = pwm.cells();
    let pos: Vec<i8> = cells.iter().map(|&v| if v > 0 { v } else { 0 }).collect();
    let neg: Vec<i8> = cells.iter().map(|&v| if v < 0 { v } else { 0 }).collect();
    let p1 = PwmWaveform::from_cells(pwm.f_lo, &pos);
    let n1 = PwmWaveform::from_cells(pwm.f_lo, &neg);
    Ok(PwmBank {
        positive: (0..8).map(|k| p1.shifted(k * step)).collect(),
        negative: (0..8).map(|k| n1.shifted(k * step)).collect(),
    })
}

/// Exact Fourier coefficient c_k of a weighted set of intervals within one
/// period: c_k = (1/T) * sum_i w_i * integral_{a_i}^{b_i} e^{-j 2 pi k t / T} dt.
pub fn fourier_intervals(intervals: &[(f64, f64, f64)], period: f64, k: i64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &(a, b, w) in intervals {
        if k == 0 {
            acc += Complex64::new(w * (b - a) / period, 0.0);
        } else {
            let om = std::f64::consts::TAU * k as f64 / period;
            let ea = Complex64::from_polar(1.0, -om * a);
            let eb = Complex64::from_polar(1.0, -om * b);
            acc += w * (eb - ea) / Complex64::new(0.0, -om * period);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const F500M: f64 = 500e6;

    #[test]
    fn eight_phase_windows_tile_the_period() {
        let c = make_nonoverlap_clocks(8, F500M, 1.0 / 8.0, 0.0).unwrap();
        let t = c.period();
        assert!((c.phase_windows[0].0 - 0.0).abs() < 1e-18);
        assert!((c.phase_windows[0].1 - 250e-12).abs() < 1e-18);
        assert!((c.phase_windows[1].0 - 250e-12).abs() < 1e-18);
        // window k is window 0 shifted by k*T/8
        for k in 0..8 {
            assert!((c.phase_windows[k].0 - k as f64 * t / 8.0).abs() < 1e-18);
            assert!((c.phase_windows[k].1 - c.phase_windows[k].0 - t / 8.0).abs() < 1e-18);
        }
        // zero guard: indicators sum to one everywhere
        for i in 0..999 {
            let t_probe = t * (i as f64 + 0.5) / 999.0;
            let n_on = (0..8).filter(|&k| c.phase_active(k, t_probe)).count();
            assert_eq!(n_on, 1, "t = {t_probe}");
        }
    }

    #[test]
    fn two_phase_complementary_halves() {
        let c = make_nonoverlap_clocks(2, 1.0, 0.5, 0.0).unwrap();
        assert_eq!(c.phase_windows, vec![(0.0, 0.5), (0.5, 1.0)]);
    }

    #[test]
    fn guard_shortens_windows_and_keeps_them_disjoint() {
        let c = make_nonoverlap_clocks(8, F500M, 1.0 / 8.0, 10e-12).unwrap();
        for &(s, e) in &c.phase_windows {
            assert!((e - s - 240e-12).abs() < 1e-18);
        }
        // exhaustive pairwise interval-overlap scan
        for i in 0..8 {
            for j in 0..8 {
                if i == j {
                    continue;
                }
                let (s1, e1) = c.phase_windows[i];
                let (s2, e2) = c.phase_windows[j];
                assert!(e1 <= s2 || e2 <= s1, "windows {i} and {j} overlap");
            }
        }
    }

    #[test]
    fn clock_preconditions_rejected() {
        assert!(matches!(
            make_nonoverlap_clocks(8, F500M, 0.2, 0.0),
            Err(crate::Error::InvalidDuty { .. })
        ));
        assert!(matches!(
            make_nonoverlap_clocks(8, F500M, 1.0 / 8.0, 260e-12),
            Err(crate::Error::InvalidGuard { .. })
        ));
        assert!(make_nonoverlap_clocks(1, F500M, 0.5, 0.0).is_err());
    }

    #[test]
    fn square_wave_fourier_textbook_values() {
        let w = square_wave(1.0, 64);
        // duty-1/2 square: |c_1| = 2/pi, c_2 = 0 by odd symmetry
        assert!((w.fourier_coefficient(1).norm() - 2.0 / PI).abs() < 1e-12);
        assert!(w.fourier_coefficient(2).norm() < 1e-14);
        assert!(w.fourier_coefficient(0).norm() < 1e-14);
        assert!((w.fourier_coefficient(3).norm() - 2.0 / (3.0 * PI)).abs() < 1e-12);
    }

    /// Independent quadrature oracle: midpoint Riemann sum at 10x the grid
    /// resolution.
    fn riemann_ck(w: &PwmWaveform, k: i64, oversample: usize) -> Complex64 {
        let n = w.grid * oversample;
        let period = w.period();
        let cells = w.cells();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64 * period;
            let v = f64::from(cells[i / oversample]);
            acc += v * Complex64::from_polar(1.0, -std::f64::consts::TAU * k as f64 * t / period);
        }
        acc / n as f64
    }

    #[test]
    fn single_pulse_fourier_vs_quadrature() {
        // one +1 pulse of width T/8 at phase 0 on a 64 grid
        let mut cells = vec![0i8; 64];
        for c in cells.iter_mut().take(8) {
            *c = 1;
        }
        let w = PwmWaveform::from_cells(1.0, &cells);
        let c3 = w.fourier_coefficient(3);
        // closed form: |c_3| = sin(3*pi/8) / (3*pi)
        let expect = (3.0 * PI / 8.0).sin() / (3.0 * PI);
        assert!((c3.norm() - expect).abs() < 1e-12);
        assert!((c3 - riemann_ck(&w, 3, 10)).norm() < 2e-4);

        // the half-wave-odd completion (negative copy at +T/2) doubles it
        for c in cells.iter_mut().skip(32).take(8) {
            *c = -1;
        }
        let w2 = PwmWaveform::from_cells(1.0, &cells);
        assert!((w2.fourier_coefficient(3).norm() - 2.0 * expect).abs() < 1e-12);
        assert!(w2.is_half_wave_odd());
    }

    #[test]
    fn shift_property_multiplies_by_phase_factor() {
        let mut cells = vec![0i8; 64];
        for c in cells.iter_mut().take(5) {
            *c = 1;
        }
        for c in cells.iter_mut().skip(20).take(7) {
            *c = -1;
        }
        let w = PwmWaveform::from_cells(F500M, &cells);
        for k in [1i64, 2, 3, 5, 9] {
            for shift in [1usize, 8, 17] {
                let tau = shift as f64 / 64.0 * w.period();
                let expect = w.fourier_coefficient(k)
                    * Complex64::from_polar(
                        1.0,
                        -std::f64::consts::TAU * k as f64 * tau / w.period(),
                    );
                let got = w.shifted(shift).fourier_coefficient(k);
                assert!((got - expect).norm() < 1e-12, "k={k} shift={shift}");
            }
        }
    }

    #[test]
    fn split_and_shift_partitions_and_delays() {
        let mut cells = vec![0i8; 64];
        // two positive, two negative pulses
        for c in cells.iter_mut().take(4) {
            *c = 1;
        }
        for c in cells.iter_mut().skip(10).take(4) {
            *c = -1;
        }
        for c in cells.iter_mut().skip(32).take(4) {
            *c = -1;
        }
        for c in cells.iter_mut().skip(42).take(4) {
            *c = 1;
        }
        let w = PwmWaveform::from_cells(F500M, &cells);
        let bank = split_and_shift(&w).unwrap();
        assert_eq!(bank.positive[0].pulses.len(), 2);
        assert!(bank.positive[0].pulses.iter().all(|p| p.polarity == 1));
        assert_eq!(bank.negative[0].pulses.len(), 2);
        assert!(bank.negative[0].pulses.iter().all(|p| p.polarity == -1));
        // sequence 3 is sequence 1 delayed by 2*T/8 = 16 cells
        assert_eq!(bank.positive[2], bank.positive[0].shifted(16));
        for k in 0..8 {
            assert!(bank.positive[k].pulses_disjoint());
            assert!(bank.negative[k].pulses_disjoint());
        }
        // recombination: sum_k [gate_k] equals sum_k parent shifted by k*T/8
        let mut got = vec![0i32; 64];
        let mut expect = vec![0i32; 64];
        for k in 0..8 {
            for (g, v) in got.iter_mut().zip(bank.gate(k).cells()) {
                *g += i32::from(v);
            }
            for (e, v) in expect.iter_mut().zip(w.shifted(k * 8).cells()) {
                *e += i32::from(v);
            }
        }
        assert_eq!(got, expect);
    }

    #[test]
    fn pwm_text_roundtrip() {
        let mut cells = vec![0i8; 64];
        for c in cells.iter_mut().skip(3).take(6) {
            *c = 1;
        }
        for c in cells.iter_mut().skip(35).take(6) {
            *c = -1;
        }
        let w = PwmWaveform::from_cells(F500M, &cells);
        let text = w.to_text();
        let back = PwmWaveform::from_text(&text).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn clock_window_fourier_matches_interval_formula() {
        let c = make_nonoverlap_clocks(8, F500M, 1.0 / 8.0, 0.0).unwrap();
        // duty-1/8 window at phase 0: |c_k| = sin(pi k/8)/(pi k)
        for k in 1..=9i64 {
            let expect = (PI * k as f64 / 8.0).sin() / (PI * k as f64);
            assert!((c.window_fourier(0, k).norm() - expect.abs()).abs() < 1e-12);
        }
    }
}
