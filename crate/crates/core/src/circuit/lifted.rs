//! Lifting a switched network into per-segment LTI state-space models.
//!
//! Segment boundaries are the sorted union of all clock and pulse-train
//! edges. Within a segment the capacitor voltages obey xdot = A x + B u with
//! probe outputs y = C x + D u; propagation across a segment is exact for
//! tone inputs (matrix exponential plus a phasor particular solution), so the
//! only numerical error in linear analyses is roundoff.

use super::expm::expm_scaled;
use super::stamp::{stamp, SwitchStates};
use super::{Element, Netlist};
use crate::clocks::ClockScheme;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Saturating cell resolved against the state vector: the control voltage is
/// sign * x[state_idx], its output current sign pattern enters the state and
/// probe equations through precomputed columns.
#[derive(Debug, Clone)]
pub struct SatMap {
    pub state_idx: usize,
    pub sign: f64,
    pub gm: f64,
    pub i_max: f64,
    pub gate: f64,
    /// d(xdot)/d(i_cell)
    pub k_col: DVector<f64>,
    /// d(probes)/d(i_cell)
    pub l_col: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// e^(A * (end - start))
    pub exp_a: DMatrix<f64>,
    pub sat: Vec<SatMap>,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }

    /// Particular phasor solution for a tone at angular frequency `omega`
    /// with complex input amplitudes `u`: phi = (j omega I - A)^{-1} B u.
    pub fn phasor(&self, omega: f64, u: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let n = self.a.nrows();
        if n == 0 {
            return Ok(DVector::from_element(0, Complex64::new(0.0, 0.0)));
        }
        let mut m = self.a.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let rhs_r = &self.b * u.map(|z| z.re);
        let rhs_i = &self.b * u.map(|z| z.im);
        let rhs = DVector::from_iterator(
            n,
            rhs_r
                .iter()
                .zip(rhs_i.iter())
                .map(|(r, i)| Complex64::new(*r, *i)),
        );
        let lu = m.clone().lu();
        let sol = lu.solve(&rhs).ok_or(Error::ResonanceSingularity {
            f_hz: omega / std::f64::consts::TAU,
            residual: f64::INFINITY,
        })?;
        let res = (&m * &sol - &rhs).norm();
        let scale = rhs.norm().max(1e-300);
        if res / scale > 1e-6 {
            return Err(Error::ResonanceSingularity {
                f_hz: omega / std::f64::consts::TAU,
                residual: res / scale,
            });
        }
        Ok(sol)
    }
}

/// One LO period lifted into ordered LTI segments.
#[derive(Debug, Clone)]
pub struct PiecewiseLtiSystem {
    pub period: f64,
    pub f_lo: f64,
    pub segments: Vec<Segment>,
    pub state_dim: usize,
    pub n_inputs: usize,
    pub probe_names: Vec<String>,
    pub input_names: Vec<String>,
    /// Capacitance per state entry (for stored-energy checks).
    pub cap_values: Vec<f64>,
    /// State transition over one full period (product of segment exponentials).
    pub monodromy: DMatrix<f64>,
    /// Set when any segment exponential needed an unusually deep
    /// scale-and-square (a stiffness indicator, not an error).
    pub stiffness_warning: bool,
    /// True when any segment carries saturating cells.
    pub has_saturation: bool,
}

impl PiecewiseLtiSystem {
    /// Index of the segment containing time `t` (modulo the period).
    pub fn segment_at(&self, t: f64) -> usize {
        let tau = t.rem_euclid(self.period);
        match self
            .segments
            .binary_search_by(|s| s.start.partial_cmp(&tau).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    pub fn probe_index(&self, name: &str) -> Option<usize> {
        self.probe_names.iter().position(|p| p == name)
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.input_names.iter().position(|p| p == name)
    }

    /// Spectral radius of the monodromy matrix; < 1 means every periodic
    /// trajectory settles. Uses a bounded Schur iteration (the unbounded one
    /// can stall on the defective structure a switched period map produces)
    /// and falls back to power iteration.
    pub fn monodromy_spectral_radius(&self) -> f64 {
        if let Some(schur) = nalgebra::linalg::Schur::try_new(self.monodromy.clone(), 1e-12, 20_000)
        {
            return schur
                .complex_eigenvalues()
                .iter()
                .map(|l| l.norm())
                .fold(0.0, f64::max);
        }
        // power iteration on the modulus growth rate; a deterministic
        // non-degenerate start vector
        let n = self.monodromy.nrows();
        let mut x = DVector::from_iterator(n, (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()));
        x /= x.norm();
        let mut log_sum = 0.0;
        let mut count = 0usize;
        for it in 0..400 {
            x = &self.monodromy * x;
            let nrm = x.norm();
            if nrm == 0.0 {
                return 0.0;
            }
            x /= nrm;
            if it >= 200 {
                log_sum += nrm.ln();
                count += 1;
            }
        }
        (log_sum / count as f64).exp()
    }

    /// Stored energy 1/2 sum C_i x_i^2 for a real state.
    pub fn energy(&self, x: &DVector<f64>) -> f64 {
        0.5 * self
            .cap_values
            .iter()
            .zip(x.iter())
            .map(|(c, v)| c * v * v)
            .sum::<f64>()
    }
}

/// Builds the piecewise LTI model: segment boundaries are exactly the sorted
/// union of clock edges and pulse-train edges of every control in the
/// netlist.
pub fn extract_segments(netlist: &Netlist, clocks: &ClockScheme) -> Result<PiecewiseLtiSystem> {
    let period = clocks.period();
    let mut edges: Vec<f64> = vec![0.0];
    edges.extend(clocks.edges());
    for e in &netlist.elements {
        let train = match e {
            Element::Switch {
                ctrl: super::SwitchCtrl::Train(w),
                ..
            } => Some(w),
            Element::Vccs { gate: Some(w), .. } => Some(w),
            _ => None,
        };
        if let Some(w) = train {
            if (w.f_lo - clocks.f_lo).abs() > 1e-6 * clocks.f_lo {
                return Err(Error::PeriodMismatch {
                    found_hz: w.f_lo,
                    expected_hz: clocks.f_lo,
                });
            }
            edges.extend(w.edges());
        }
    }
    edges.retain(|t| t.is_finite() && *t >= 0.0 && *t < period);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * period);

    let caps = netlist.capacitors();
    let nc = caps.len();
    let sources = netlist.sources();
    let n_inputs = sources.len();
    let n_probes = netlist.probes.len();

    let mut segments = Vec::with_capacity(edges.len());
    let mut stiffness_warning = false;
    let mut has_saturation = false;

    for (si, &t0) in edges.iter().enumerate() {
        let t1 = if si + 1 < edges.len() {
            edges[si + 1]
        } else {
            period
        };
        if t1 - t0 <= 1e-15 * period {
            continue;
        }
        let mid = 0.5 * (t0 + t1);
        let states = SwitchStates::at_time(netlist, clocks, mid);
        let st = stamp(netlist, &states).map_err(|e| match e {
            Error::SingularTopology { detail, .. } => Error::SingularTopology {
                segment: si,
                detail,
            },
            other => other,
        })?;
        let dim = st.m.nrows();
        let nn = st.nn;
        let lu = st.m.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularTopology {
                segment: si,
                detail: "bordered MNA matrix is singular (check for loops of \
                         ideal sources or isolated transconductor outputs)"
                    .into(),
            });
        }

        // right-hand sides: state unit columns, then input columns, then
        // saturating-cell injections
        let n_sat = st.sat_cells.len();
        let mut rhs = DMatrix::<f64>::zeros(dim, nc + n_inputs + n_sat);
        for c in 0..nc {
            rhs[(nn + c, c)] = 1.0;
        }
        for s in 0..n_inputs {
            for r in 0..dim {
                rhs[(r, nc + s)] = st.b_input[(r, s)];
            }
        }
        for (j, cell) in st.sat_cells.iter().enumerate() {
            let col = st.inject_column(cell.out_n, cell.out_p);
            for r in 0..dim {
                rhs[(r, nc + n_inputs + j)] = col[r];
            }
        }
        let sol = lu.solve(&rhs).ok_or_else(|| Error::SingularTopology {
            segment: si,
            detail: "MNA solve failed".into(),
        })?;

        // xdot_c = iC_c / C_c
        let mut a = DMatrix::<f64>::zeros(nc, nc);
        let mut b = DMatrix::<f64>::zeros(nc, n_inputs);
        for c in 0..nc {
            let cap = caps[c].3;
            for j in 0..nc {
                a[(c, j)] = sol[(nn + c, j)] / cap;
            }
            for s in 0..n_inputs {
                b[(c, s)] = sol[(nn + c, nc + s)] / cap;
            }
        }
        // probes
        let mut cmatx = DMatrix::<f64>::zeros(n_probes, nc);
        let mut dmat = DMatrix::<f64>::zeros(n_probes, n_inputs);
        let vrow = |sol: &DMatrix<f64>, node: usize, col: usize| -> f64 {
            if node == super::GROUND {
                0.0
            } else {
                sol[(node - 1, col)]
            }
        };
        for (pi, probe) in netlist.probes.iter().enumerate() {
            for j in 0..nc {
                cmatx[(pi, j)] = vrow(&sol, probe.pos, j) - vrow(&sol, probe.neg, j);
            }
            for s in 0..n_inputs {
                dmat[(pi, s)] = vrow(&sol, probe.pos, nc + s) - vrow(&sol, probe.neg, nc + s);
            }
        }
        // saturating cells: resolve control to a capacitor state. Note the
        // injection column direction: a transconductor's current i leaves
        // out_p (matching the linear stamp), so the unit column is built
        // with the terminals swapped.
        let mut sat = Vec::with_capacity(n_sat);
        for (j, cell) in st.sat_cells.iter().enumerate() {
            let mapped = caps
                .iter()
                .position(|&(_, p, n, _)| p == cell.in_p && n == cell.in_n)
                .map(|i| (i, 1.0))
                .or_else(|| {
                    caps.iter()
                        .position(|&(_, p, n, _)| p == cell.in_n && n == cell.in_p)
                        .map(|i| (i, -1.0))
                });
            let (state_idx, sign) = mapped.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "saturating vccs '{}' must sense a capacitor branch voltage",
                    netlist.elements[cell.element].name()
                ))
            })?;
            let col = nc + n_inputs + j;
            let mut k_col = DVector::<f64>::zeros(nc);
            for c in 0..nc {
                k_col[c] = sol[(nn + c, col)] / caps[c].3;
            }
            let mut l_col = DVector::<f64>::zeros(n_probes);
            for (pi, probe) in netlist.probes.iter().enumerate() {
                l_col[pi] = vrow(&sol, probe.pos, col) - vrow(&sol, probe.neg, col);
            }
            sat.push(SatMap {
                state_idx,
                sign,
                gm: cell.gm,
                i_max: cell.i_max,
                gate: cell.gate,
                k_col,
                l_col,
            });
        }
        has_saturation |= !sat.is_empty();

        let (exp_a, squarings) = expm_scaled(&(&a * (t1 - t0)));
        stiffness_warning |= squarings > 40;

        segments.push(Segment {
            start: t0,
            end: t1,
            a,
            b,
            c: cmatx,
            d: dmat,
            exp_a,
            sat,
        });
    }

    if segments.is_empty() {
        return Err(Error::Netlist("no segments over the period".into()));
    }

    let mut monodromy = DMatrix::<f64>::identity(nc, nc);
    for s in &segments {
        monodromy = &s.exp_a * &monodromy;
    }

    Ok(PiecewiseLtiSystem {
        period,
        f_lo: clocks.f_lo,
        segments,
        state_dim: nc,
        n_inputs,
        probe_names: netlist.probes.iter().map(|p| p.name.clone()).collect(),
        input_names: sources.into_iter().map(|(_, n)| n).collect(),
        cap_values: caps.iter().map(|&(_, _, _, c)| c).collect(),
        monodromy,
        stiffness_warning,
        has_saturation,
    })
}

/// Exact propagation of a complex state across part of one segment under a
/// set of tones: x(t1) = e^(A dt) (x0 - sum phi_j e^(j w t0)) + sum phi_j
/// e^(j w t1). `phis` pairs each tone's angular frequency with its
/// precomputed phasor particular solution.
pub fn propagate_segment(
    seg: &Segment,
    x0: &DVector<Complex64>,
    phis: &[(f64, DVector<Complex64>)],
    t0: f64,
    t1: f64,
) -> DVector<Complex64> {
    let dt = t1 - t0;
    let mut h = x0.clone();
    for (omega, phi) in phis {
        h -= phi * Complex64::from_polar(1.0, omega * t0);
    }
    let e = if (dt - seg.len()).abs() < 1e-18 {
        seg.exp_a.clone()
    } else {
        super::expm::expm(&(&seg.a * dt))
    };
    let er = e.map(|x| Complex64::new(x, 0.0));
    let mut x = &er * h;
    for (omega, phi) in phis {
        x += phi * Complex64::from_polar(1.0, omega * t1);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Element, SwitchCtrl, GROUND};
    use crate::clocks::make_nonoverlap_clocks;

    fn rc_netlist(r: f64, c: f64) -> Netlist {
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
            ohms: r,
        });
        nl.add(Element::Capacitor {
            name: "c".into(),
            p: out,
            n: GROUND,
            farads: c,
        });
        nl.add_probe("vout", out, GROUND);
        nl
    }

    #[test]
    fn static_rc_is_a_single_segment_with_correct_pole() {
        let nl = rc_netlist(1000.0, 1e-9);
        let clocks = make_nonoverlap_clocks(8, 1e6, 0.125, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        // no switches: every segment has the same A; the union of edges still
        // splits the period into the 8 clock windows
        assert_eq!(sys.state_dim, 1);
        for s in &sys.segments {
            assert!((s.a[(0, 0)] + 1.0 / (1000.0 * 1e-9)).abs() < 1e-3);
        }
    }

    #[test]
    fn eight_phase_clock_yields_eight_segments() {
        let mut nl = rc_netlist(1000.0, 1e-9);
        let out = nl.node("out");
        let tap = nl.node("tap");
        nl.add(Element::Switch {
            name: "s0".into(),
            p: out,
            n: tap,
            r_on: 10.0,
            ctrl: SwitchCtrl::Phase(0),
        });
        nl.add(Element::Capacitor {
            name: "ct".into(),
            p: tap,
            n: GROUND,
            farads: 1e-12,
        });
        let clocks = make_nonoverlap_clocks(8, 1e6, 0.125, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        assert_eq!(sys.segments.len(), 8);
        let total: f64 = sys.segments.iter().map(|s| s.len()).sum();
        assert!((total - sys.period).abs() < 1e-18);
    }

    #[test]
    fn always_closed_switches_collapse_to_static_network() {
        // sw always closed in series with R-C: one distinct topology; A's
        // eigenvalue must be -1/((R + r_on) C)
        let mut nl = Netlist::new();
        let a = nl.node("a");
        let b = nl.node("b");
        nl.add(Element::Resistor {
            name: "r".into(),
            p: a,
            n: GROUND,
            ohms: 990.0,
        });
        nl.add(Element::Switch {
            name: "s".into(),
            p: a,
            n: b,
            r_on: 10.0,
            ctrl: SwitchCtrl::Always,
        });
        nl.add(Element::Capacitor {
            name: "c".into(),
            p: b,
            n: GROUND,
            farads: 1e-9,
        });
        let clocks = make_nonoverlap_clocks(2, 1e6, 0.5, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        for s in &sys.segments {
            assert!((s.a[(0, 0)] + 1.0 / (1000.0 * 1e-9)).abs() / 1e6 < 1e-9);
        }
    }

    #[test]
    fn scalar_exponential_decay_example() {
        // A = -1/(RC), zero input, x0 = 1, duration RC -> e^{-1}
        let nl = rc_netlist(1000.0, 1e-9);
        let clocks = make_nonoverlap_clocks(2, 1.0 / (1000.0 * 1e-9), 0.5, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        let seg = &sys.segments[0];
        let x0 = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let rc = 1000.0 * 1e-9;
        let x = propagate_segment(seg, &x0, &[], 0.0, rc);
        assert!((x[0].re - (-1.0f64).exp()).abs() < 1e-9);
        // zero duration -> identity
        let x = propagate_segment(seg, &x0, &[], 0.0, 0.0);
        assert!((x[0].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn first_order_pole_magnitude_at_corner() {
        // RC driven at f = 1/(2 pi RC): |H| = 1/sqrt(2) of DC gain
        let nl = rc_netlist(1000.0, 1e-9);
        let clocks = make_nonoverlap_clocks(2, 1e6, 0.5, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        let seg = &sys.segments[0];
        let omega = 1.0 / (1000.0 * 1e-9);
        let u = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let phi = seg.phasor(omega, &u).unwrap();
        assert!((phi[0].norm() - 1.0 / 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn charge_conservation_when_disconnected() {
        // cap behind an open switch: state must not move
        let mut nl = Netlist::new();
        let a = nl.node("a");
        let b = nl.node("b");
        nl.add(Element::Resistor {
            name: "r".into(),
            p: a,
            n: GROUND,
            ohms: 50.0,
        });
        nl.add(Element::Switch {
            name: "s".into(),
            p: a,
            n: b,
            r_on: 10.0,
            ctrl: SwitchCtrl::Phase(0),
        });
        nl.add(Element::Capacitor {
            name: "c".into(),
            p: b,
            n: GROUND,
            farads: 1e-12,
        });
        let clocks = make_nonoverlap_clocks(4, 1e9, 0.25, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        // segments 1..3 have the switch open
        let seg = &sys.segments[2];
        assert!(seg.a[(0, 0)].abs() < 1e-12);
        let x0 = DVector::from_element(1, Complex64::new(0.73, 0.0));
        let x = propagate_segment(seg, &x0, &[], seg.start, seg.end);
        assert!((x[0].re - 0.73).abs() < 1e-15);
    }

    #[test]
    fn passivity_energy_nonincreasing() {
        // R/C/switch network, zero input: energy must not grow across a period
        let mut nl = Netlist::new();
        let a = nl.node("a");
        let b = nl.node("b");
        nl.add(Element::Resistor {
            name: "r1".into(),
            p: a,
            n: GROUND,
            ohms: 200.0,
        });
        nl.add(Element::Capacitor {
            name: "c1".into(),
            p: a,
            n: GROUND,
            farads: 2e-12,
        });
        nl.add(Element::Switch {
            name: "s".into(),
            p: a,
            n: b,
            r_on: 15.0,
            ctrl: SwitchCtrl::Phase(1),
        });
        nl.add(Element::Capacitor {
            name: "c2".into(),
            p: b,
            n: GROUND,
            farads: 1e-12,
        });
        let clocks = make_nonoverlap_clocks(4, 1e8, 0.25, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        let mut x = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-0.4, 0.0)]);
        let mut e_prev = sys.energy(&x.map(|z| z.re));
        for seg in &sys.segments {
            x = propagate_segment(seg, &x, &[], seg.start, seg.end);
            let e = sys.energy(&x.map(|z| z.re));
            assert!(e <= e_prev * (1.0 + 1e-12), "energy grew: {e} > {e_prev}");
            e_prev = e;
        }
    }

    #[test]
    fn monodromy_radius_below_one_for_dissipative_network() {
        let nl = rc_netlist(1000.0, 1e-9);
        let clocks = make_nonoverlap_clocks(2, 1e6, 0.5, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        assert!(sys.monodromy_spectral_radius() < 1.0);
    }
}
