//! Receiver builders: N-path downconverter with peak compensation, the
//! harmonic-selective combiner HR2 with its PWM upconverter bank, the output
//! combiner HR1 with transimpedance loads, and the closed main loop.
//!
//! The receiver is differential in implementation; it is modeled here as the
//! equivalent half circuit. Each baseband capacitor commutates twice per
//! period with reversed plate orientation (so its effective sampling function
//! has no even harmonics) and the combiners use antisymmetric eight-phase
//! weight vectors (w[k+4] = -w[k]), which is the half-circuit image of taking
//! every gm-cell input differentially. The feedback upconverter injects
//! current into the RF node through transconductors gated by the signed PWM
//! pulse trains.

use crate::circuit::{
    extract_segments, Element, Netlist, NodeId, PiecewiseLtiSystem, SwitchCtrl, GROUND,
};
use crate::clocks::{
    make_nonoverlap_clocks, split_and_shift, square_wave, synthesize_pwm_lo, ClockScheme,
    PwmSynthesisReport, PwmWaveform,
};
use crate::error::{Error, Result};
use num_complex::Complex64;

pub const N_PATHS: usize = 8;

/// N-path filter parameters.
#[derive(Debug, Clone)]
pub struct NPathParams {
    pub n_paths: usize,
    pub f_lo: f64,
    /// Source resistance (ohms).
    pub r_s: f64,
    /// Switch on-resistance (ohms).
    pub r_on: f64,
    /// Baseband capacitance per path (farads).
    pub c_bb: f64,
    /// Parasitic capacitance at the RF node (farads).
    pub c_in: f64,
    /// Polarity-toggled compensation capacitance (farads).
    pub c_x: f64,
    /// Double-balanced commutation (each C_BB connects twice per period with
    /// flipped orientation). False gives the literal single-ended bank.
    pub differential: bool,
}

impl NPathParams {
    /// C_BB from the first-order bandwidth relation: each capacitor charges
    /// through r_s for a fraction d of the period (d = 2/N differential,
    /// 1/N single-ended), giving a baseband pole at d/(2 pi r_s c_bb) and an
    /// RF bandwidth of twice that.
    pub fn c_bb_for_bandwidth(n_paths: usize, differential: bool, r_s: f64, rf_bw: f64) -> f64 {
        let duty = if differential {
            2.0 / n_paths as f64
        } else {
            1.0 / n_paths as f64
        };
        duty / (std::f64::consts::PI * r_s * rf_bw)
    }
}

/// Harmonic-selective combiner in the loop: rejects the fundamental, passes
/// the 3rd and 5th.
#[derive(Debug, Clone)]
pub struct Hr2Params {
    /// Transconductance of one unit cell (S); tap k uses weight[k] units.
    pub gm_unit: f64,
    /// Integer weight magnitudes (side, center, side); (5, 7, 5) realizes
    /// the ideal 1 : sqrt(2) : 1.
    pub ratios: (u32, u32, u32),
    /// Input rotation of the side taps in phase steps of 45 degrees; 3 puts
    /// them at +/-135 degrees. Checked against the fundamental-null property
    /// at build time.
    pub rotation: usize,
    /// Output resistance of each combiner output (ohms).
    pub r_out: f64,
    /// Capacitance at each combiner output (farads); filters 2 f_lo / 4 f_lo
    /// content out of the feedback path.
    pub c_out: f64,
    /// Per-unit-cell saturation current (A); None = linear.
    pub saturation: Option<f64>,
}

impl Hr2Params {
    /// c_out placing the output pole at f_lo/5.
    pub fn c_out_for_pole(r_out: f64, f_lo: f64) -> f64 {
        1.0 / (std::f64::consts::TAU * r_out * f_lo / 5.0)
    }
}

/// Output combiner: selects the fundamental, quadrature outputs into TIAs.
#[derive(Debug, Clone)]
pub struct Hr1Params {
    pub gm_unit: f64,
    /// Integer weights (side, center, side); (12, 17, 12) approximates
    /// 1 : sqrt(2) : 1.
    pub ratios: (u32, u32, u32),
    /// Transimpedance (ohms).
    pub tia_gain: f64,
    /// TIA single-pole bandwidth (Hz).
    pub tia_bandwidth: f64,
    /// Per-unit-cell saturation current (A); None = linear.
    pub saturation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpconverterMode {
    /// PWM-LO gates (suppressed fundamental).
    PwmLo,
    /// Plain square-wave gates; reference case for the noise-translation
    /// comparison.
    SquareLo,
}

/// How the RF port is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveMode {
    /// Voltage source behind r_s (normal operation). Input name "vin".
    Voltage,
    /// Current probe directly into the RF node, no source branch; used for
    /// input-impedance extraction. Input name "iin".
    CurrentProbe,
}

#[derive(Debug, Clone)]
pub struct PwmSettings {
    pub grid: usize,
    pub suppression_db: f64,
    pub balance_db: f64,
}

impl Default for PwmSettings {
    fn default() -> Self {
        PwmSettings {
            grid: 256,
            suppression_db: -40.0,
            balance_db: 0.5,
        }
    }
}

/// Everything needed to build one receiver instance.
#[derive(Debug, Clone)]
pub struct ReceiverParams {
    pub npath: NPathParams,
    pub hr2: Hr2Params,
    pub hr1: Hr1Params,
    pub pwm: PwmSettings,
    pub duty: f64,
    pub guard: f64,
    pub loop_enabled: bool,
    pub upconverter: UpconverterMode,
    /// Feedback upconverter transconductance per branch (S).
    pub gm_up: f64,
    pub drive: DriveMode,
}

/// A built receiver: netlist, clocks and the lifted model.
pub struct Receiver {
    pub netlist: Netlist,
    pub clocks: ClockScheme,
    pub system: PiecewiseLtiSystem,
    /// Synthesis report when the PWM upconverter is present.
    pub pwm: Option<PwmSynthesisReport>,
    /// Per-branch upconverter gate waveforms (empty with the loop off).
    pub gates: Vec<PwmWaveform>,
    pub params: ReceiverParams,
}

impl Receiver {
    pub fn input(&self) -> usize {
        let name = match self.params.drive {
            DriveMode::Voltage => "vin",
            DriveMode::CurrentProbe => "iin",
        };
        self.system.input_index(name).expect("input source present")
    }

    pub fn noise_input(&self) -> Option<usize> {
        self.system.input_index("inoise")
    }

    pub fn probe(&self, name: &str) -> Result<usize> {
        self.system
            .probe_index(name)
            .ok_or_else(|| Error::InvalidInput(format!("no probe named {name}")))
    }
}

/// Spatial discrete Fourier response of an 8-phase weight vector:
/// W(m) = sum_k w[k] e^(j 2 pi m k / 8).
pub fn spatial_response(weights: &[f64; 8], m: i64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, w) in weights.iter().enumerate() {
        acc += w * Complex64::from_polar(1.0, std::f64::consts::TAU * m as f64 * k as f64 / 8.0);
    }
    acc
}

/// Antisymmetric completion of a tap pattern: full[k] = base[k] - base[k-4].
/// The completion nulls every even spatial harmonic exactly and is the
/// half-circuit image of differential gm-cell inputs.
fn antisymmetric(base: [f64; 8]) -> [f64; 8] {
    let mut full = [0.0; 8];
    for k in 0..8 {
        full[k] = base[k] - base[(k + 4) % 8];
    }
    full
}

/// Eight-phase weight vector of HR2: center tap plus two side taps rotated
/// by +/- `rotation` phase steps, antisymmetrically completed.
pub fn hr2_weights(ratios: (u32, u32, u32), rotation: usize) -> [f64; 8] {
    let mut base = [0.0; 8];
    base[0] += ratios.1 as f64;
    base[rotation % 8] += ratios.0 as f64;
    base[(8 - rotation % 8) % 8] += ratios.2 as f64;
    antisymmetric(base)
}

/// Eight-phase weight vector of HR1 (side taps at +/-1 phase step).
pub fn hr1_weights(ratios: (u32, u32, u32)) -> [f64; 8] {
    let mut base = [0.0; 8];
    base[0] += ratios.1 as f64;
    base[1] += ratios.0 as f64;
    base[7] += ratios.2 as f64;
    antisymmetric(base)
}

/// Node pairs of the eight baseband outputs (positive plate, negative plate).
pub struct NPathPorts {
    pub rf: NodeId,
    pub bb: Vec<(NodeId, NodeId)>,
}

/// Builds the N-path core into `nl`: RF port, commutated baseband
/// capacitors, optional C_in and polarity-toggled C_X. Adds probes "vrf" and
/// "vb1".."vb8".
pub fn build_npath(nl: &mut Netlist, p: &NPathParams, clocks: &ClockScheme) -> Result<NPathPorts> {
    if p.n_paths != clocks.n_phases {
        return Err(Error::InvalidInput(format!(
            "n_paths {} must match clock phases {}",
            p.n_paths, clocks.n_phases
        )));
    }
    if p.n_paths != N_PATHS {
        return Err(Error::InvalidInput(format!(
            "the receiver is an 8-path design, got {}",
            p.n_paths
        )));
    }
    if p.c_bb <= 0.0 || p.c_in < 0.0 || p.c_x < 0.0 {
        return Err(Error::Netlist("need c_bb > 0, c_in >= 0, c_x >= 0".into()));
    }
    let rf = nl.node("vrf");
    if p.c_in > 0.0 {
        nl.add(Element::Capacitor {
            name: "cin".into(),
            p: rf,
            n: GROUND,
            farads: p.c_in,
        });
    }
    let mut bb = Vec::with_capacity(N_PATHS);
    for k in 0..N_PATHS {
        let bkp = nl.node(&format!("b{}p", k + 1));
        let bkn = if p.differential {
            nl.node(&format!("b{}n", k + 1))
        } else {
            GROUND
        };
        nl.add(Element::Capacitor {
            name: format!("cbb{}", k + 1),
            p: bkp,
            n: bkn,
            farads: p.c_bb,
        });
        // forward connection during phase k
        nl.add(Element::Switch {
            name: format!("swf{}", k + 1),
            p: rf,
            n: bkp,
            r_on: p.r_on,
            ctrl: SwitchCtrl::Phase(k),
        });
        if p.differential {
            nl.add(Element::Switch {
                name: format!("swfg{}", k + 1),
                p: bkn,
                n: GROUND,
                r_on: p.r_on,
                ctrl: SwitchCtrl::Phase(k),
            });
            // reversed connection half a period later
            let k2 = (k + 4) % N_PATHS;
            nl.add(Element::Switch {
                name: format!("swr{}", k + 1),
                p: rf,
                n: bkn,
                r_on: p.r_on,
                ctrl: SwitchCtrl::Phase(k2),
            });
            nl.add(Element::Switch {
                name: format!("swrg{}", k + 1),
                p: bkp,
                n: GROUND,
                r_on: p.r_on,
                ctrl: SwitchCtrl::Phase(k2),
            });
        }
        nl.add_probe(&format!("vb{}", k + 1), bkp, bkn);
        bb.push((bkp, bkn));
    }
    // toggling compensation capacitor across the active path, plate
    // orientation flipping on every phase advance
    if p.c_x > 0.0 {
        let cxp = nl.node("cxp");
        let cxn = nl.node("cxn");
        nl.add(Element::Capacitor {
            name: "cx".into(),
            p: cxp,
            n: cxn,
            farads: p.c_x,
        });
        for (k, &(bkp, bkn)) in bb.iter().enumerate() {
            let (top, bot) = if k % 2 == 0 { (bkp, bkn) } else { (bkn, bkp) };
            nl.add(Element::Switch {
                name: format!("swxp{}", k + 1),
                p: cxp,
                n: top,
                r_on: p.r_on,
                ctrl: SwitchCtrl::Phase(k),
            });
            nl.add(Element::Switch {
                name: format!("swxn{}", k + 1),
                p: cxn,
                n: bot,
                r_on: p.r_on,
                ctrl: SwitchCtrl::Phase(k),
            });
        }
    }
    nl.add_probe("vrf", rf, GROUND);
    Ok(NPathPorts { rf, bb })
}

/// Builds HR2 into `nl`: eight weighted-sum transconductor outputs loaded by
/// r_out || c_out. Validates the fundamental-null property of the realized
/// weight vector. Returns the output nodes.
pub fn build_hr2(nl: &mut Netlist, p: &Hr2Params, bb: &[(NodeId, NodeId)]) -> Result<Vec<NodeId>> {
    let w = hr2_weights(p.ratios, p.rotation);
    let w1 = spatial_response(&w, 1).norm();
    let w3 = spatial_response(&w, 3).norm();
    if !(w3 > 0.0) || w1 > 0.05 * w3 {
        return Err(Error::InvalidRotation {
            rotation: p.rotation,
            ratio_db: crate::util::db(w1) - crate::util::db(w3),
        });
    }
    if p.r_out <= 0.0 || p.c_out < 0.0 {
        return Err(Error::Netlist("hr2 needs r_out > 0, c_out >= 0".into()));
    }
    let mut outs = Vec::with_capacity(8);
    for o in 0..8 {
        let node = nl.node(&format!("hr2o{}", o + 1));
        nl.add(Element::Resistor {
            name: format!("hr2r{}", o + 1),
            p: node,
            n: GROUND,
            ohms: p.r_out,
        });
        if p.c_out > 0.0 {
            nl.add(Element::Capacitor {
                name: format!("hr2c{}", o + 1),
                p: node,
                n: GROUND,
                farads: p.c_out,
            });
        }
        for (k, &wk) in w.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let (ip, inn) = bb[(o + k) % 8];
            nl.add(Element::Vccs {
                name: format!("hr2g{}_{}", o + 1, k),
                out_p: node,
                out_n: GROUND,
                in_p: ip,
                in_n: inn,
                gm: p.gm_unit * wk,
                gate: None,
                i_max: p.saturation.map(|im| im * wk.abs()),
            });
        }
        outs.push(node);
    }
    nl.add_probe("hr2o1", outs[0], GROUND);
    Ok(outs)
}

/// Builds the feedback upconverter: one gated transconductor per branch,
/// sensing HR2 output k and injecting current into the RF node under the
/// signed gate waveform k. The cells invert (negative gm) so the loop closes
/// with negative feedback at the selected harmonics.
pub fn build_pwm_upconverter(
    nl: &mut Netlist,
    gates: &[PwmWaveform],
    hr2_out: &[NodeId],
    rf: NodeId,
    gm_up: f64,
) -> Result<()> {
    if gates.len() != hr2_out.len() {
        return Err(Error::InvalidInput(format!(
            "{} gates for {} upconverter branches",
            gates.len(),
            hr2_out.len()
        )));
    }
    for (k, (gate, &src)) in gates.iter().zip(hr2_out).enumerate() {
        nl.add(Element::Vccs {
            name: format!("upc{}", k + 1),
            out_p: rf,
            out_n: GROUND,
            in_p: src,
            in_n: GROUND,
            gm: -gm_up,
            gate: Some(gate.clone()),
            i_max: None,
        });
    }
    Ok(())
}

/// Builds HR1 into `nl`: four quadrature outputs {I_P, I_N, Q_P, Q_N}, each
/// a weighted transconductor sum into a single-pole TIA. Adds probes
/// "hr1_i", "hr1_q" (differential) and "hr1_ip" (single-ended).
pub fn build_hr1(nl: &mut Netlist, p: &Hr1Params, bb: &[(NodeId, NodeId)]) -> Result<Vec<NodeId>> {
    if p.tia_bandwidth <= 0.0 || p.tia_gain <= 0.0 {
        return Err(Error::Netlist(
            "hr1 needs tia_gain > 0 and tia_bandwidth > 0".into(),
        ));
    }
    let w = hr1_weights(p.ratios);
    let c_tia = 1.0 / (std::f64::consts::TAU * p.tia_gain * p.tia_bandwidth);
    let offsets = [0usize, 4, 2, 6]; // I_P, I_N, Q_P, Q_N
    let labels = ["ip", "in", "qp", "qn"];
    let mut outs = Vec::with_capacity(4);
    for (o, (&off, label)) in offsets.iter().zip(labels).enumerate() {
        let node = nl.node(&format!("hr1{label}"));
        nl.add(Element::Resistor {
            name: format!("tiar{o}"),
            p: node,
            n: GROUND,
            ohms: p.tia_gain,
        });
        nl.add(Element::Capacitor {
            name: format!("tiac{o}"),
            p: node,
            n: GROUND,
            farads: c_tia,
        });
        for (k, &wk) in w.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let (ip, inn) = bb[(off + k) % 8];
            nl.add(Element::Vccs {
                name: format!("hr1g{o}_{k}"),
                out_p: node,
                out_n: GROUND,
                in_p: ip,
                in_n: inn,
                gm: p.gm_unit * wk,
                gate: None,
                i_max: p.saturation.map(|im| im * wk.abs()),
            });
        }
        outs.push(node);
    }
    nl.add_probe("hr1_i", outs[0], outs[1]);
    nl.add_probe("hr1_q", outs[2], outs[3]);
    nl.add_probe("hr1_ip", outs[0], GROUND);
    Ok(outs)
}

/// Builds the full receiver and lifts it. With the loop disabled the
/// feedback path (HR2, upconverter, noise port) is omitted entirely; HR1 is
/// always present.
pub fn build_receiver(params: &ReceiverParams) -> Result<Receiver> {
    let clocks = make_nonoverlap_clocks(
        params.npath.n_paths,
        params.npath.f_lo,
        params.duty,
        params.guard,
    )?;
    let mut nl = Netlist::new();

    match params.drive {
        DriveMode::Voltage => {
            let vin = nl.node("vin_node");
            let rf = nl.node("vrf");
            nl.add(Element::VSource {
                name: "vin".into(),
                p: vin,
                n: GROUND,
            });
            nl.add(Element::Resistor {
                name: "rs".into(),
                p: vin,
                n: rf,
                ohms: params.npath.r_s,
            });
        }
        DriveMode::CurrentProbe => {
            let rf = nl.node("vrf");
            nl.add(Element::ISource {
                name: "iin".into(),
                p: rf,
                n: GROUND,
            });
        }
    }

    let ports = build_npath(&mut nl, &params.npath, &clocks)?;
    build_hr1(&mut nl, &params.hr1, &ports.bb)?;

    let mut pwm_report = None;
    let mut gates = Vec::new();
    if params.loop_enabled {
        let hr2_out = build_hr2(&mut nl, &params.hr2, &ports.bb)?;
        gates = match params.upconverter {
            UpconverterMode::PwmLo => {
                let rep = synthesize_pwm_lo(
                    params.npath.f_lo,
                    params.pwm.grid,
                    params.pwm.suppression_db,
                    params.pwm.balance_db,
                )?;
                let bank = split_and_shift(&rep.waveform)?;
                let g = (0..8).map(|k| bank.gate(k)).collect();
                pwm_report = Some(rep);
                g
            }
            UpconverterMode::SquareLo => {
                let sq = square_wave(params.npath.f_lo, params.pwm.grid);
                (0..8)
                    .map(|k| sq.shifted(k * params.pwm.grid / 8))
                    .collect()
            }
        };
        build_pwm_upconverter(&mut nl, &gates, &hr2_out, ports.rf, params.gm_up)?;
        // deterministic surrogate for combiner noise: a current port at the
        // first HR2 output
        nl.add(Element::ISource {
            name: "inoise".into(),
            p: hr2_out[0],
            n: GROUND,
        });
    }

    let system = extract_segments(&nl, &clocks)?;
    Ok(Receiver {
        netlist: nl,
        clocks,
        system,
        pwm: pwm_report,
        gates,
        params: params.clone(),
    })
}

/// Laptop-scale defaults: 500 MHz LO, 20 MHz RF bandwidth, loop tuned for
/// 15-20 dB of harmonic suppression.
pub fn default_params() -> ReceiverParams {
    let f_lo = 500e6;
    let r_s = 50.0;
    let differential = true;
    let c_bb = NPathParams::c_bb_for_bandwidth(N_PATHS, differential, r_s, 20e6);
    let r_out = 2000.0;
    ReceiverParams {
        npath: NPathParams {
            n_paths: N_PATHS,
            f_lo,
            r_s,
            r_on: 5.0,
            c_bb,
            c_in: 0.0,
            c_x: 0.0,
            differential,
        },
        hr2: Hr2Params {
            gm_unit: 1e-3,
            ratios: (5, 7, 5),
            rotation: 3,
            r_out,
            c_out: Hr2Params::c_out_for_pole(r_out, f_lo),
            saturation: None,
        },
        hr1: Hr1Params {
            gm_unit: 1e-3,
            ratios: (12, 17, 12),
            tia_gain: 1000.0,
            tia_bandwidth: 20e6,
            saturation: None,
        },
        pwm: PwmSettings::default(),
        duty: 1.0 / N_PATHS as f64,
        guard: 0.0,
        loop_enabled: true,
        upconverter: UpconverterMode::PwmLo,
        gm_up: 4e-3,
        drive: DriveMode::Voltage,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hr2_weight_vector_nulls_fundamental_and_evens() {
        let w = hr2_weights((5, 7, 5), 3);
        assert_eq!(w, [7.0, -5.0, 0.0, 5.0, -7.0, 5.0, 0.0, -5.0]);
        let w1 = spatial_response(&w, 1).norm();
        let w3 = spatial_response(&w, 3).norm();
        let w5 = spatial_response(&w, 5).norm();
        // integer 5:7:5 leaves a finite fundamental residue
        let rejection_db = crate::util::db(w1) - crate::util::db(w3);
        assert!(rejection_db < -40.0, "5:7:5 rejection {rejection_db} dB");
        assert!((w3 - w5).abs() < 1e-12, "3rd and 5th gains must be equal");
        // ideal sqrt(2) ratios null exactly
        let base = [2f64.sqrt(), 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0];
        let mut ideal = [0.0; 8];
        for k in 0..8 {
            ideal[k] = base[k] - base[(k + 4) % 8];
        }
        assert!(spatial_response(&ideal, 1).norm() < 1e-12);
        // even spatial harmonics are nulled by antisymmetry alone
        for m in [0i64, 2, 4, 6] {
            assert!(spatial_response(&w, m).norm() < 1e-12);
        }
    }

    #[test]
    fn hr1_weight_vector_selects_fundamental() {
        let w = hr1_weights((12, 17, 12));
        assert_eq!(w, [17.0, 12.0, 0.0, -12.0, -17.0, -12.0, 0.0, 12.0]);
        let w1 = spatial_response(&w, 1).norm();
        let w3 = spatial_response(&w, 3).norm();
        let w5 = spatial_response(&w, 5).norm();
        assert!(w1 > 60.0);
        // 12:17:12 integer-ratio null leaves a small residue at 3 and 5
        assert!(w3 / w1 < 1e-3);
        assert!((w3 - w5).abs() < 1e-9);
        for m in [0i64, 2, 4, 6] {
            assert!(spatial_response(&w, m).norm() < 1e-12);
        }
    }

    #[test]
    fn wrong_rotation_is_rejected_at_build() {
        let mut nl = Netlist::new();
        let bb: Vec<_> = (0..8)
            .map(|k| {
                let p = nl.node(&format!("b{k}p"));
                let n = nl.node(&format!("b{k}n"));
                nl.add(Element::Capacitor {
                    name: format!("c{k}"),
                    p,
                    n,
                    farads: 1e-12,
                });
                (p, n)
            })
            .collect();
        let mut p = default_params().hr2;
        p.rotation = 2;
        let err = build_hr2(&mut nl, &p, &bb).unwrap_err();
        assert!(matches!(err, Error::InvalidRotation { .. }));
    }

    #[test]
    fn receiver_builds_and_lifts() {
        let params = default_params();
        let rx = build_receiver(&params).unwrap();
        assert!(rx.system.state_dim >= 13);
        assert!(rx.system.probe_index("vrf").is_some());
        assert!(rx.system.probe_index("vb1").is_some());
        assert!(rx.system.probe_index("hr1_i").is_some());
        assert!(rx.system.probe_index("hr2o1").is_some());
        assert!(rx.noise_input().is_some());
        assert!(rx.pwm.is_some());
        // loop off: no feedback path at all
        let mut off = params.clone();
        off.loop_enabled = false;
        let rx_off = build_receiver(&off).unwrap();
        assert!(rx_off.system.probe_index("hr2o1").is_none());
        assert!(rx_off.noise_input().is_none());
        assert!(rx_off.system.state_dim < rx.system.state_dim);
    }

    #[test]
    fn segment_count_bounds_with_pwm_bank() {
        let params = default_params();
        let rx = build_receiver(&params).unwrap();
        let n_seg = rx.system.segments.len();
        // at least the 8 clock segments, at most one per PWM grid cell plus
        // clock edges
        assert!(n_seg >= 8, "{n_seg}");
        assert!(n_seg <= params.pwm.grid + 8, "{n_seg}");
        let mut off = params.clone();
        off.loop_enabled = false;
        let rx_off = build_receiver(&off).unwrap();
        assert_eq!(rx_off.system.segments.len(), 8);
    }

    #[test]
    fn derived_cbb_matches_bandwidth_relation() {
        // differential: duty 1/4, 50 ohm, 20 MHz -> ~79.6 pF
        let c = NPathParams::c_bb_for_bandwidth(8, true, 50.0, 20e6);
        assert!((c - 7.957e-11).abs() < 1e-13, "{c}");
        let c_se = NPathParams::c_bb_for_bandwidth(8, false, 50.0, 20e6);
        assert!((c_se - c / 2.0).abs() < 1e-15);
    }
}
