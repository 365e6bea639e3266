//! Response extraction: periodic steady state, transient + DFT, and sweeps.
//!
//! Linear periodically time-varying networks map a tone at f_in onto
//! components at f_in + k * f_lo. The lifted solver finds the steady state
//! directly: the response to e^(j 2 pi f t) is x(t) = e^(j 2 pi f t) p(t)
//! with p periodic, fixed by one linear solve against the monodromy matrix;
//! components then come from exact per-segment Fourier integration of p. The
//! transient + DFT path brute-forces the same quantities and is the only
//! valid method once saturation is enabled.

mod sweep;
mod transient;

pub use sweep::{harmonic_sweep, linear_grid, SweepMeta, SweepPoint, SweepResult};
pub use transient::{transient, transient_dft, DftOptions, TransientResult, TransientSpec};

use crate::circuit::{phi1_complex, PiecewiseLtiSystem};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Analysis method that produced a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lifted,
    TransientDft,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lifted => "lifted",
            Method::TransientDft => "transient_dft",
        }
    }
}

/// One input tone: complex amplitude on a named input column. Linear
/// analyses use the analytic convention u(t) = amp * e^(j 2 pi f t);
/// time-domain nonlinear runs drive Re[amp * e^(j 2 pi f t)].
#[derive(Debug, Clone, Copy)]
pub struct Tone {
    pub source: usize,
    pub amp: Complex64,
    pub freq: f64,
}

/// Complex component amplitudes at f_in + k*f_lo for each probe.
#[derive(Debug, Clone)]
pub struct ToneResponse {
    pub f_in: f64,
    pub f_lo: f64,
    pub method: Method,
    pub probe_names: Vec<String>,
    /// components[probe][k] with k in [-kmax, kmax]
    components: Vec<BTreeMap<i64, Complex64>>,
}

impl ToneResponse {
    pub fn component(&self, probe: usize, k: i64) -> Complex64 {
        self.components[probe]
            .get(&k)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn component_by_name(&self, probe: &str, k: i64) -> Option<Complex64> {
        let i = self.probe_names.iter().position(|p| p == probe)?;
        Some(self.component(i, k))
    }

    /// The harmonic index of the LO multiple nearest to f_in.
    pub fn nearest_harmonic(&self) -> i64 {
        (self.f_in / self.f_lo).round() as i64
    }

    /// Baseband component: the response translated to the offset
    /// delta = f_in - m*f_lo for the nearest harmonic m (k = -m). A tone
    /// exactly on the harmonic grid lands in the DC bin.
    pub fn baseband(&self, probe: usize) -> (f64, Complex64) {
        let m = self.nearest_harmonic();
        (self.f_in - m as f64 * self.f_lo, self.component(probe, -m))
    }

    /// Component at the input frequency itself (k = 0).
    pub fn at_input(&self, probe: usize) -> Complex64 {
        self.component(probe, 0)
    }

    pub fn tracked_k(&self, probe: usize) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.components[probe].iter().map(|(k, v)| (*k, *v))
    }
}

/// Periodic steady state of a linear configuration for a single tone.
///
/// Errors with `ResonanceSingularity` when the periodic boundary solve is
/// numerically singular and with `InvalidInput` when saturation is enabled
/// anywhere in the system.
pub fn periodic_steady_state(
    sys: &PiecewiseLtiSystem,
    tone: &Tone,
    kmax: i64,
) -> Result<ToneResponse> {
    if sys.has_saturation {
        return Err(Error::InvalidInput(
            "periodic steady state requires a linear configuration (saturation enabled)".into(),
        ));
    }
    if tone.source >= sys.n_inputs {
        return Err(Error::InvalidInput(format!(
            "tone source index {} out of range",
            tone.source
        )));
    }
    let omega = std::f64::consts::TAU * tone.freq;
    let n = sys.state_dim;
    let period = sys.period;
    let nseg = sys.segments.len();

    let mut u = DVector::from_element(sys.n_inputs, Complex64::new(0.0, 0.0));
    u[tone.source] = tone.amp;

    // particular phasor per segment
    let mut phis = Vec::with_capacity(nseg);
    for seg in &sys.segments {
        phis.push(seg.phasor(omega, &u)?);
    }

    // forced response over one period starting from zero state
    let mut w = DVector::from_element(n, Complex64::new(0.0, 0.0));
    for (i, seg) in sys.segments.iter().enumerate() {
        let h = &w - &phis[i] * Complex64::from_polar(1.0, omega * seg.start);
        let e = seg.exp_a.map(|x| Complex64::new(x, 0.0));
        w = e * h + &phis[i] * Complex64::from_polar(1.0, omega * seg.end);
    }

    // periodicity of the envelope: x(T) = e^{j w T} x(0)
    let x0 = if n == 0 {
        w.clone()
    } else {
        let rot = Complex64::from_polar(1.0, omega * period);
        let mono_c = sys.monodromy.map(|x| Complex64::new(x, 0.0));
        let mut m = -mono_c;
        for i in 0..n {
            m[(i, i)] += rot;
        }
        let lu = m.clone().lu();
        let x0 = lu.solve(&w).ok_or(Error::ResonanceSingularity {
            f_hz: tone.freq,
            residual: f64::INFINITY,
        })?;
        let res = (&m * &x0 - &w).norm() / w.norm().max(1e-300);
        if res > 1e-6 {
            return Err(Error::ResonanceSingularity {
                f_hz: tone.freq,
                residual: res,
            });
        }
        x0
    };

    // segment-start states
    let mut starts = Vec::with_capacity(nseg);
    let mut x = x0.clone();
    for (i, seg) in sys.segments.iter().enumerate() {
        starts.push(x.clone());
        let h = &x - &phis[i] * Complex64::from_polar(1.0, omega * seg.start);
        let e = seg.exp_a.map(|z| Complex64::new(z, 0.0));
        x = e * h + &phis[i] * Complex64::from_polar(1.0, omega * seg.end);
    }

    // exact Fourier extraction of the periodic envelope
    let n_probes = sys.probe_names.len();
    let mut components = vec![BTreeMap::new(); n_probes];
    let big_omega = std::f64::consts::TAU * sys.f_lo;
    for k in -kmax..=kmax {
        let omega_k = omega + k as f64 * big_omega;
        let mut acc = vec![Complex64::new(0.0, 0.0); n_probes];
        for (i, seg) in sys.segments.iter().enumerate() {
            let dt = seg.len();
            let q = &starts[i] - &phis[i] * Complex64::from_polar(1.0, omega * seg.start);
            // S = int_seg e^{A(t-t0)} q e^{-j w_k t} dt = e^{-j w_k t0} * g
            // with (A - j w_k) g = e^{A dt} q e^{-j w_k dt} - q
            let e = seg.exp_a.map(|z| Complex64::new(z, 0.0));
            let r = e * &q * Complex64::from_polar(1.0, -omega_k * dt) - &q;
            let mut mk = seg.a.map(|z| Complex64::new(z, 0.0));
            for d in 0..n {
                mk[(d, d)] -= Complex64::new(0.0, omega_k);
            }
            let g = if n == 0 {
                r
            } else {
                match mk.clone().lu().solve(&r) {
                    Some(g) => {
                        let resid = (&mk * &g - &r).norm();
                        if resid > 1e-9 * r.norm().max(1e-300) {
                            phi1_complex(&mk, dt) * &q
                        } else {
                            g
                        }
                    }
                    None => phi1_complex(&mk, dt) * &q,
                }
            };
            let s_int = g * Complex64::from_polar(1.0, -omega_k * seg.start);
            // scalar integral of e^{-j k W t} over the segment
            let t_k = if k == 0 {
                Complex64::new(dt, 0.0)
            } else {
                let kw = k as f64 * big_omega;
                (Complex64::from_polar(1.0, -kw * seg.end)
                    - Complex64::from_polar(1.0, -kw * seg.start))
                    / Complex64::new(0.0, -kw)
            };
            let cc = seg.c.map(|z| Complex64::new(z, 0.0));
            let dd = seg.d.map(|z| Complex64::new(z, 0.0));
            let y_seg = &cc * (s_int + &phis[i] * t_k) + dd * &u * t_k;
            for (p, a) in acc.iter_mut().enumerate() {
                *a += y_seg[p];
            }
        }
        for (p, a) in acc.iter().enumerate() {
            components[p].insert(k, a / Complex64::new(period, 0.0));
        }
    }

    Ok(ToneResponse {
        f_in: tone.freq,
        f_lo: sys.f_lo,
        method: Method::Lifted,
        probe_names: sys.probe_names.clone(),
        components,
    })
}

/// Reference check helper shared by tests: builds the dense complex identity
/// scaled matrix (j w I - A) for a segment.
#[allow(dead_code)]
pub(crate) fn jw_minus_a(a: &DMatrix<f64>, omega: f64) -> DMatrix<Complex64> {
    let n = a.nrows();
    let mut m = a.map(|x| Complex64::new(-x, 0.0));
    for i in 0..n {
        m[(i, i)] += Complex64::new(0.0, omega);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{extract_segments, Element, Netlist, GROUND};
    use crate::clocks::make_nonoverlap_clocks;

    fn rc_system(r: f64, c: f64, f_lo: f64) -> PiecewiseLtiSystem {
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
        let clocks = make_nonoverlap_clocks(2, f_lo, 0.5, 0.0).unwrap();
        extract_segments(&nl, &clocks).unwrap()
    }

    #[test]
    fn static_rc_matches_first_order_transfer_function() {
        let (r, c) = (1.0e3, 1.0e-9);
        let sys = rc_system(r, c, 1e6);
        for f in [1e3, 1e5, 1.0 / (std::f64::consts::TAU * r * c), 5e6] {
            let resp = periodic_steady_state(
                &sys,
                &Tone {
                    source: 0,
                    amp: Complex64::new(1.0, 0.0),
                    freq: f,
                },
                5,
            )
            .unwrap();
            let h = resp.at_input(0);
            let h_ref = 1.0 / Complex64::new(1.0, std::f64::consts::TAU * f * r * c);
            assert!(
                (h - h_ref).norm() < 1e-9,
                "f={f}: {h} vs {h_ref} (diff {})",
                (h - h_ref).norm()
            );
            // an LTI network must not create harmonic translation
            for k in [-2i64, -1, 1, 2] {
                assert!(resp.component(0, k).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn response_scales_linearly_with_amplitude() {
        let sys = rc_system(1e3, 1e-9, 1e6);
        let base = periodic_steady_state(
            &sys,
            &Tone {
                source: 0,
                amp: Complex64::new(1.0, 0.0),
                freq: 2.3e5,
            },
            3,
        )
        .unwrap();
        let scaled = periodic_steady_state(
            &sys,
            &Tone {
                source: 0,
                amp: Complex64::new(-2.5, 1.0),
                freq: 2.3e5,
            },
            3,
        )
        .unwrap();
        let s = Complex64::new(-2.5, 1.0);
        for k in -3..=3 {
            let want = base.component(0, k) * s;
            assert!((scaled.component(0, k) - want).norm() < 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn saturating_system_is_rejected() {
        let mut nl = Netlist::new();
        let inn = nl.node("in");
        let a = nl.node("a");
        let b = nl.node("b");
        nl.add(Element::VSource {
            name: "vin".into(),
            p: inn,
            n: GROUND,
        });
        nl.add(Element::Resistor {
            name: "rin".into(),
            p: inn,
            n: a,
            ohms: 50.0,
        });
        nl.add(Element::Capacitor {
            name: "c1".into(),
            p: a,
            n: GROUND,
            farads: 1e-12,
        });
        nl.add(Element::Resistor {
            name: "rl".into(),
            p: b,
            n: GROUND,
            ohms: 1e3,
        });
        nl.add(Element::Vccs {
            name: "g".into(),
            out_p: b,
            out_n: GROUND,
            in_p: a,
            in_n: GROUND,
            gm: 1e-3,
            gate: None,
            i_max: Some(1e-3),
        });
        nl.add_probe("out", b, GROUND);
        let clocks = make_nonoverlap_clocks(2, 1e6, 0.5, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        assert!(sys.has_saturation);
        let err = periodic_steady_state(
            &sys,
            &Tone {
                source: 0,
                amp: Complex64::new(1.0, 0.0),
                freq: 1e5,
            },
            3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn switched_rc_translates_between_harmonics() {
        // one-path switched RC: the downconverter's defining behavior is a
        // nonzero k = -1 component for a tone near f_lo
        let mut nl = Netlist::new();
        let inn = nl.node("in");
        let rf = nl.node("rf");
        let bb = nl.node("bb");
        nl.add(Element::VSource {
            name: "vin".into(),
            p: inn,
            n: GROUND,
        });
        nl.add(Element::Resistor {
            name: "rs".into(),
            p: inn,
            n: rf,
            ohms: 50.0,
        });
        nl.add(Element::Switch {
            name: "s".into(),
            p: rf,
            n: bb,
            r_on: 10.0,
            ctrl: crate::circuit::SwitchCtrl::Phase(0),
        });
        nl.add(Element::Capacitor {
            name: "cb".into(),
            p: bb,
            n: GROUND,
            farads: 40e-12,
        });
        nl.add_probe("vbb", bb, GROUND);
        let clocks = make_nonoverlap_clocks(8, 500e6, 0.125, 0.0).unwrap();
        let sys = extract_segments(&nl, &clocks).unwrap();
        let resp = periodic_steady_state(
            &sys,
            &Tone {
                source: 0,
                amp: Complex64::new(1.0, 0.0),
                freq: 501e6,
            },
            5,
        )
        .unwrap();
        let (offset, bb_amp) = resp.baseband(0);
        assert!((offset - 1e6).abs() < 1.0);
        assert!(
            bb_amp.norm() > 0.05,
            "expected visible downconversion, got {}",
            bb_amp.norm()
        );
    }
}
