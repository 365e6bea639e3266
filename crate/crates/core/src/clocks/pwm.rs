//! PWM-LO synthesis: a ternary pulse train with a suppressed fundamental and
//! nominally equal 3rd/5th harmonics.
//!
//! The waveform is represented on a uniform grid and constrained to half-wave
//! odd symmetry, which forces DC and every even harmonic to zero exactly.
//! Within that family the synthesizer seeds from naturally sampled PWM of
//! sin(3wt) + sin(5wt) against a triangular carrier and then runs a greedy
//! cell-perturbation descent in three phases: meet the hard contract
//! (fundamental suppression and 3rd/5th balance), push the 8k +/- 1
//! harmonics down as far as the grid affords, then grow |c3| subject to
//! both. Moves are scanned in a fixed order (single cells, then cell pairs)
//! with best-improvement selection and earliest-index tie-breaking, and the
//! whole search restarts from a fixed list of carrier seeds, so the result
//! is deterministic. A documented heuristic, not a proven optimum.

use super::PwmWaveform;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Secondary suppression set: 8k +/- 1 harmonics (with per-harmonic slack in
/// dB relative to the fundamental target). Gate energy at these harmonics
/// downconverts through an 8-path bank into the same spatial pattern as the
/// fundamental and reappears in the f_lo band through the filter's
/// unmitigated 8k*f_lo +/- f_lo response, so the synthesizer pushes these
/// down as far as the grid affords after the hard contract is met. The
/// slack grows with harmonic index because the filter's own response at
/// 8k*f_lo +/- f_lo falls with k.
const SOFT_SUPPRESSED: [(i64, f64); 10] = [
    (7, -6.0),
    (9, -6.0),
    (15, 0.0),
    (17, 0.0),
    (23, 4.0),
    (25, 4.0),
    (31, 8.0),
    (33, 8.0),
    (39, 12.0),
    (41, 12.0),
];

/// Tracked harmonics: hard contract first (1, 3, 5), then the soft set.
const N_TRACKED: usize = 3 + SOFT_SUPPRESSED.len();

fn tracked_harmonics() -> [i64; N_TRACKED] {
    let mut t = [0i64; N_TRACKED];
    t[0] = 1;
    t[1] = 3;
    t[2] = 5;
    for (i, (k, _)) in SOFT_SUPPRESSED.iter().enumerate() {
        t[3 + i] = *k;
    }
    t
}

/// What the synthesizer achieved, attached to the returned waveform.
#[derive(Debug, Clone)]
pub struct PwmSynthesisReport {
    pub waveform: PwmWaveform,
    pub suppression_db: f64,
    pub balance_db: f64,
    pub c3_mag: f64,
    pub iterations: usize,
}

struct HalfWave {
    f_lo: f64,
    grid: usize,
    /// First-half cells; cell i+grid/2 is implicitly the negation.
    half: Vec<i8>,
}

impl HalfWave {
    fn full_cells(&self) -> Vec<i8> {
        let h = self.grid / 2;
        let mut v = vec![0i8; self.grid];
        for i in 0..h {
            v[i] = self.half[i];
            v[i + h] = -self.half[i];
        }
        v
    }

    fn waveform(&self) -> PwmWaveform {
        PwmWaveform::from_cells(self.f_lo, &self.full_cells())
    }
}

/// Incrementally maintained Fourier coefficients of the tracked harmonics.
/// For odd k the half-wave representation gives
/// c_k = sum_i half[i] * u_k(i) with u_k the exact cell integral doubled.
struct Tracker {
    /// u[t][i]: contribution of a +1 in first-half cell i to harmonic t.
    u: Vec<Vec<Complex64>>,
    c: Vec<Complex64>,
}

impl Tracker {
    fn new(hw: &HalfWave) -> Tracker {
        let h = hw.grid / 2;
        let harms = tracked_harmonics();
        let mut u = Vec::with_capacity(N_TRACKED);
        for &k in &harms {
            debug_assert!(k % 2 != 0);
            let om = std::f64::consts::TAU * k as f64 / hw.grid as f64;
            let denom = Complex64::new(0.0, -std::f64::consts::TAU * k as f64);
            let row: Vec<Complex64> = (0..h)
                .map(|i| {
                    let ea = Complex64::from_polar(1.0, -om * i as f64);
                    let eb = Complex64::from_polar(1.0, -om * (i + 1) as f64);
                    2.0 * (eb - ea) / denom
                })
                .collect();
            u.push(row);
        }
        let mut c = vec![Complex64::new(0.0, 0.0); N_TRACKED];
        for (t, row) in u.iter().enumerate() {
            for (i, &v) in hw.half.iter().enumerate() {
                c[t] += f64::from(v) * row[i];
            }
        }
        Tracker { u, c }
    }

    fn apply(&mut self, cell: usize, dv: f64) {
        for t in 0..N_TRACKED {
            self.c[t] += dv * self.u[t][cell];
        }
    }

    fn score(&self) -> Score {
        self.score_with(&[])
    }

    /// Score after hypothetical cell deltas, without mutating.
    fn score_with(&self, deltas: &[(usize, f64)]) -> Score {
        let mut mags = [0.0f64; N_TRACKED];
        for t in 0..N_TRACKED {
            let mut v = self.c[t];
            for &(cell, dv) in deltas {
                v += dv * self.u[t][cell];
            }
            mags[t] = v.norm();
        }
        Score { mags }
    }
}

#[derive(Clone, Copy)]
struct Score {
    /// Magnitudes in tracked order: 1, 3, 5, then the soft set.
    mags: [f64; N_TRACKED],
}

impl Score {
    fn c1(&self) -> f64 {
        self.mags[0]
    }
    fn c3(&self) -> f64 {
        self.mags[1]
    }
    fn c5(&self) -> f64 {
        self.mags[2]
    }

    fn ratio_db(&self) -> f64 {
        crate::util::db(self.c1()) - crate::util::db(self.c3())
    }

    fn balance_db(&self) -> f64 {
        (crate::util::db(self.c3()) - crate::util::db(self.c5())).abs()
    }

    /// Hard-contract violation: zero when the fundamental suppression and
    /// the 3rd/5th balance targets are both met.
    fn violation(&self, supp_db: f64, bal_db: f64) -> f64 {
        (self.ratio_db() - supp_db).max(0.0) + (self.balance_db() - bal_db).max(0.0)
    }

    /// Soft violation: dominated by the worst 8k +/- 1 offender (minimax
    /// pressure keeps single harmonics from hiding behind an improving sum),
    /// with a small sum term to keep gradient on the rest, plus a gentle
    /// pull keeping the fundamental near (not far below) its target: the
    /// suppression contract is one-sided, but sitting close to it keeps the
    /// direct fundamental path dominant over the residual 8k +/- 1 leakage,
    /// which is what makes the gate's c1 coefficient predictive.
    fn soft_violation(&self, supp_db: f64) -> f64 {
        let mut sum = 0.0;
        let mut worst = 0.0f64;
        for (i, (_, slack)) in SOFT_SUPPRESSED.iter().enumerate() {
            let ratio = crate::util::db(self.mags[3 + i]) - crate::util::db(self.c3());
            let v = (ratio - (supp_db + slack)).max(0.0);
            sum += v;
            worst = worst.max(v);
        }
        let overshoot = ((supp_db - 2.0) - self.ratio_db()).max(0.0);
        worst + 0.1 * sum + 0.3 * overshoot
    }
}

/// Naturally sampled ternary PWM of sin(3wt)+sin(5wt) against a triangular
/// carrier (`carrier_periods` per LO cycle, optional carrier phase),
/// evaluated at cell centers.
fn natural_seed(grid: usize, carrier_periods: f64, carrier_phase0: f64) -> Vec<i8> {
    let h = grid / 2;
    let mut half = vec![0i8; h];
    let mut rmax = 0.0f64;
    let r = |i: usize| -> f64 {
        let t = (i as f64 + 0.5) / grid as f64; // t/T at cell center
        (3.0 * std::f64::consts::TAU * t).sin() + (5.0 * std::f64::consts::TAU * t).sin()
    };
    for i in 0..h {
        rmax = rmax.max(r(i).abs());
    }
    for (i, cell) in half.iter_mut().enumerate() {
        let t = (i as f64 + 0.5) / grid as f64;
        let carrier_phase = (t * carrier_periods + carrier_phase0).fract();
        let tri = 1.0 - (2.0 * carrier_phase - 1.0).abs();
        let x = r(i) / rmax;
        if x.abs() > tri {
            *cell = if x > 0.0 { 1 } else { -1 };
        }
    }
    half
}

/// xorshift64* PRNG; fixed seeds keep the synthesis fully deterministic.
struct Rng(u64);

impl Rng {
    fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }
    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Scalar objective for the annealing stage: hard violations dominate, then
/// the soft residue, then (weakly) third-harmonic amplitude.
fn energy(s: &Score, supp_db: f64, bal_db: f64) -> f64 {
    1000.0 * s.violation(supp_db, bal_db) + s.soft_violation(supp_db) - 8.0 * s.c3()
}

/// Seeded annealing pass: random single-cell reassignments with a geometric
/// cooling schedule. Escapes the local optima the pure descent gets stuck
/// in when many harmonics are constrained at once.
fn anneal(hw: &mut HalfWave, supp_db: f64, bal_db: f64, seed: u64, steps: usize) {
    let h = hw.grid / 2;
    let mut rng = Rng(seed | 1);
    let mut tracker = Tracker::new(hw);
    let mut e = energy(&tracker.score(), supp_db, bal_db);
    let t0: f64 = 4.0;
    let t1: f64 = 1e-3;
    for step in 0..steps {
        let temp = t0 * (t1 / t0).powf(step as f64 / steps as f64);
        let cell = rng.below(h);
        let orig = hw.half[cell];
        let cand = match (orig, rng.below(2)) {
            (-1, 0) => 0,
            (-1, _) => 1,
            (0, 0) => -1,
            (0, _) => 1,
            (1, 0) => -1,
            (1, _) => 0,
            _ => unreachable!(),
        };
        let s = tracker.score_with(&[(cell, f64::from(cand - orig))]);
        let e_new = energy(&s, supp_db, bal_db);
        if e_new < e || rng.uniform() < ((e - e_new) / temp).exp() {
            tracker.apply(cell, f64::from(cand - orig));
            hw.half[cell] = cand;
            e = e_new;
        }
    }
}

/// Greedy best-improvement descent over single-cell and cell-pair moves.
/// Phase 0 drives the hard-contract violation to zero; phase 1 minimizes the
/// soft 8k +/- 1 residue; phase 2 maximizes |c3| without regressing either.
fn polish(hw: &mut HalfWave, supp_db: f64, bal_db: f64) -> (Score, usize) {
    const VALS: [i8; 3] = [-1, 0, 1];
    let h = hw.grid / 2;
    let mut tracker = Tracker::new(hw);
    let mut score = tracker.score();
    let mut iterations = 0usize;

    for phase in 0..3 {
        loop {
            iterations += 1;
            if phase == 0 && score.violation(supp_db, bal_db) == 0.0 {
                break;
            }
            if phase == 1 && score.soft_violation(supp_db) == 0.0 {
                break;
            }
            let soft_bound = score.soft_violation(supp_db);
            let better = |s: &Score, best: &Score| -> bool {
                match phase {
                    0 => s.violation(supp_db, bal_db) < best.violation(supp_db, bal_db) - 1e-15,
                    1 => {
                        s.violation(supp_db, bal_db) == 0.0
                            && s.soft_violation(supp_db) < best.soft_violation(supp_db) - 1e-12
                    }
                    _ => {
                        s.violation(supp_db, bal_db) == 0.0
                            && s.soft_violation(supp_db) <= soft_bound + 1e-12
                            && s.c3() > best.c3() + 1e-15
                    }
                }
            };

            let mut best: Option<(Vec<(usize, i8)>, Score)> = None;
            let mut best_score = score;

            // single-cell moves
            for i in 0..h {
                let orig = hw.half[i];
                for &v in &VALS {
                    if v == orig {
                        continue;
                    }
                    let s = tracker.score_with(&[(i, f64::from(v - orig))]);
                    if better(&s, &best_score) {
                        best_score = s;
                        best = Some((vec![(i, v)], s));
                    }
                }
            }
            // cell-pair moves once single moves stall
            if best.is_none() {
                for i in 0..h {
                    let oi = hw.half[i];
                    for &vi in &VALS {
                        if vi == oi {
                            continue;
                        }
                        let di = (i, f64::from(vi - oi));
                        for j in (i + 1)..h {
                            let oj = hw.half[j];
                            for &vj in &VALS {
                                if vj == oj {
                                    continue;
                                }
                                let s = tracker.score_with(&[di, (j, f64::from(vj - oj))]);
                                if better(&s, &best_score) {
                                    best_score = s;
                                    best = Some((vec![(i, vi), (j, vj)], s));
                                }
                            }
                        }
                    }
                }
            }

            match best {
                Some((moves, s)) => {
                    for (i, v) in moves {
                        tracker.apply(i, f64::from(v - hw.half[i]));
                        hw.half[i] = v;
                    }
                    score = s;
                }
                None => break,
            }
            if iterations > 20_000 {
                break;
            }
        }
    }
    (score, iterations)
}

/// Synthesizes a PWM-LO waveform satisfying the spectral contract:
/// |c1|/|c3| <= suppression_target_db and ||c3|-|c5|| <= balance_target_db,
/// with c0 and all even harmonics exactly zero by construction. The
/// remaining 8k +/- 1 harmonics are minimized best-effort (see
/// `SOFT_SUPPRESSED`); feasibility of the hard contract is what decides
/// success.
///
/// The search is deterministic, so results are memoized per argument set.
pub fn synthesize_pwm_lo(
    f_lo: f64,
    grid_size: usize,
    suppression_target_db: f64,
    balance_target_db: f64,
) -> Result<PwmSynthesisReport> {
    use std::collections::HashMap;
    use std::sync::Mutex;
    static CACHE: Mutex<Option<HashMap<(u64, usize, u64, u64), PwmSynthesisReport>>> =
        Mutex::new(None);
    let key = (
        f_lo.to_bits(),
        grid_size,
        suppression_target_db.to_bits(),
        balance_target_db.to_bits(),
    );
    if let Some(cache) = CACHE.lock().unwrap().as_ref() {
        if let Some(hit) = cache.get(&key) {
            return Ok(hit.clone());
        }
    }
    let report =
        synthesize_pwm_lo_uncached(f_lo, grid_size, suppression_target_db, balance_target_db)?;
    CACHE
        .lock()
        .unwrap()
        .get_or_insert_with(HashMap::new)
        .insert(key, report.clone());
    Ok(report)
}

fn synthesize_pwm_lo_uncached(
    f_lo: f64,
    grid_size: usize,
    suppression_target_db: f64,
    balance_target_db: f64,
) -> Result<PwmSynthesisReport> {
    if grid_size == 0 || grid_size % 16 != 0 {
        return Err(Error::InvalidInput(format!(
            "pwm grid {grid_size} must be a positive multiple of 16"
        )));
    }
    if !suppression_target_db.is_finite() || !balance_target_db.is_finite() {
        return Err(Error::InvalidInput("non-finite pwm targets".into()));
    }
    if !(f_lo > 0.0) {
        return Err(Error::InvalidInput(format!("bad f_lo {f_lo}")));
    }

    // deterministic multi-start: natural-PWM seeds (carrier on the 8-per-
    // period grid so its sidebands avoid the 8k +/- 1 lines), an annealing
    // escape with a fixed per-start seed, then greedy descent
    let mut best_overall: Option<(HalfWave, Score, usize)> = None;
    for (start, (periods, phase0)) in [
        (16.0, 0.0),
        (16.0, 0.5),
        (8.0, 0.0),
        (24.0, 0.0),
        (16.0, 0.25),
        (8.0, 0.5),
    ]
    .into_iter()
    .enumerate()
    {
        let mut hw = HalfWave {
            f_lo,
            grid: grid_size,
            half: natural_seed(grid_size, periods, phase0),
        };
        let mut score;
        let mut iters;
        let mut cycle = 0u64;
        loop {
            anneal(
                &mut hw,
                suppression_target_db,
                balance_target_db,
                0x9E3779B97F4A7C15u64
                    .wrapping_mul(start as u64 + 1)
                    .wrapping_add(cycle),
                200_000,
            );
            let (s, it) = polish(&mut hw, suppression_target_db, balance_target_db);
            score = s;
            iters = it;
            cycle += 1;
            // reheat once if the soft set has not converged
            if cycle >= 2
                || (score.violation(suppression_target_db, balance_target_db) == 0.0
                    && score.soft_violation(suppression_target_db) == 0.0)
            {
                break;
            }
        }
        let feasible = score.violation(suppression_target_db, balance_target_db) == 0.0;
        let better = match &best_overall {
            None => true,
            Some((_, bs, _)) => {
                let best_feasible = bs.violation(suppression_target_db, balance_target_db) == 0.0;
                match (feasible, best_feasible) {
                    (true, false) => true,
                    (false, true) => false,
                    // among hard-feasible candidates: least soft residue,
                    // then largest 3rd harmonic
                    (true, true) => {
                        let (sv, bsv) = (
                            score.soft_violation(suppression_target_db),
                            bs.soft_violation(suppression_target_db),
                        );
                        sv < bsv - 1e-12 || (sv <= bsv + 1e-12 && score.c3() > bs.c3() + 1e-15)
                    }
                    (false, false) => {
                        score.violation(suppression_target_db, balance_target_db)
                            < bs.violation(suppression_target_db, balance_target_db)
                    }
                }
            }
        };
        if better {
            best_overall = Some((hw, score, iters));
        }
    }
    let (hw, score, iterations) = best_overall.expect("at least one seed");

    let waveform = hw.waveform();
    debug_assert!(waveform.is_half_wave_odd());
    let report = PwmSynthesisReport {
        suppression_db: score.ratio_db(),
        balance_db: score.balance_db(),
        c3_mag: score.c3(),
        iterations,
        waveform,
    };
    if score.violation(suppression_target_db, balance_target_db) > 0.0 {
        return Err(Error::SynthesisFailure {
            best_db: report.suppression_db,
            target_db: suppression_target_db,
            balance_db: report.balance_db,
        });
    }
    Ok(report)
}
