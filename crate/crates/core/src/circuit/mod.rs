//! Switched linear network representation and its lifting into per-segment
//! LTI state-space models.
//!
//! Elements are resistors, capacitors, phase- or pulse-controlled switches,
//! transconductors (optionally gated by a signed pulse train, optionally
//! saturating) and sources. The state vector is the set of capacitor branch
//! voltages, which survive topology changes: a capacitor that is left
//! floating in some clock segment simply holds its charge.

mod expm;
mod lifted;
mod stamp;

pub use expm::{expm, expm_scaled, phi1_complex};
pub use lifted::{extract_segments, propagate_segment, PiecewiseLtiSystem, Segment};
pub use stamp::{stamp, Stamped, SwitchStates};

use crate::clocks::{ClockScheme, PwmWaveform};
use crate::error::{Error, Result};

pub type NodeId = usize;
pub const GROUND: NodeId = 0;

/// How a switch decides to be closed.
#[derive(Debug, Clone)]
pub enum SwitchCtrl {
    /// Closed while clock phase k is high.
    Phase(usize),
    /// Closed while the pulse train is nonzero.
    Train(PwmWaveform),
    /// Permanently closed.
    Always,
}

#[derive(Debug, Clone)]
pub enum Element {
    Resistor {
        name: String,
        p: NodeId,
        n: NodeId,
        ohms: f64,
    },
    Capacitor {
        name: String,
        p: NodeId,
        n: NodeId,
        farads: f64,
    },
    Switch {
        name: String,
        p: NodeId,
        n: NodeId,
        r_on: f64,
        ctrl: SwitchCtrl,
    },
    /// Voltage-controlled current source: i = gm * v(in_p, in_n) out of
    /// out_p into out_n, scaled by the signed gate value when gated, and
    /// clipped through i_max * tanh(gm v / i_max) when saturating.
    Vccs {
        name: String,
        out_p: NodeId,
        out_n: NodeId,
        in_p: NodeId,
        in_n: NodeId,
        gm: f64,
        gate: Option<PwmWaveform>,
        i_max: Option<f64>,
    },
    /// Independent voltage source; its value is input column `input_idx`.
    VSource { name: String, p: NodeId, n: NodeId },
    /// Independent current source injecting into `p`; value from the inputs.
    ISource { name: String, p: NodeId, n: NodeId },
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Resistor { name, .. }
            | Element::Capacitor { name, .. }
            | Element::Switch { name, .. }
            | Element::Vccs { name, .. }
            | Element::VSource { name, .. }
            | Element::ISource { name, .. } => name,
        }
    }
}

/// A named probe: differential voltage v(pos) - v(neg).
#[derive(Debug, Clone)]
pub struct Probe {
    pub name: String,
    pub pos: NodeId,
    pub neg: NodeId,
}

#[derive(Debug, Clone, Default)]
pub struct Netlist {
    node_names: Vec<String>,
    pub elements: Vec<Element>,
    pub probes: Vec<Probe>,
}

impl Netlist {
    pub fn new() -> Self {
        Netlist {
            node_names: vec!["0".to_string()],
            elements: Vec::new(),
            probes: Vec::new(),
        }
    }

    /// Returns the id for a node name, creating it on first use. "0" and
    /// "gnd" map to ground.
    pub fn node(&mut self, name: &str) -> NodeId {
        if name == "0" || name.eq_ignore_ascii_case("gnd") {
            return GROUND;
        }
        if let Some(i) = self.node_names.iter().position(|n| n == name) {
            i
        } else {
            self.node_names.push(name.to_string());
            self.node_names.len() - 1
        }
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id]
    }

    pub fn num_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn add(&mut self, e: Element) {
        self.elements.push(e);
    }

    pub fn add_probe(&mut self, name: &str, pos: NodeId, neg: NodeId) {
        self.probes.push(Probe {
            name: name.to_string(),
            pos,
            neg,
        });
    }

    pub fn probe_index(&self, name: &str) -> Option<usize> {
        self.probes.iter().position(|p| p.name == name)
    }

    /// Capacitors in element order; their branch voltages form the state.
    pub fn capacitors(&self) -> Vec<(usize, NodeId, NodeId, f64)> {
        self.elements
            .iter()
            .enumerate()
            .filter_map(|(i, e)| match e {
                Element::Capacitor { p, n, farads, .. } => Some((i, *p, *n, *farads)),
                _ => None,
            })
            .collect()
    }

    /// Independent sources in element order; they form the input vector.
    pub fn sources(&self) -> Vec<(usize, String)> {
        self.elements
            .iter()
            .enumerate()
            .filter_map(|(i, e)| match e {
                Element::VSource { name, .. } | Element::ISource { name, .. } => {
                    Some((i, name.clone()))
                }
                _ => None,
            })
            .collect()
    }

    pub fn source_index(&self, name: &str) -> Option<usize> {
        self.sources().iter().position(|(_, n)| n == name)
    }

    /// Basic validation: element values positive where required, terminals in
    /// range (guaranteed by construction through `node`), probes resolvable.
    pub fn validate(&self) -> Result<()> {
        for e in &self.elements {
            match e {
                Element::Resistor { ohms, name, .. } if *ohms <= 0.0 => {
                    return Err(Error::Netlist(format!("resistor {name}: R must be > 0")));
                }
                Element::Capacitor { farads, name, .. } if *farads <= 0.0 => {
                    return Err(Error::Netlist(format!("capacitor {name}: C must be > 0")));
                }
                Element::Switch { r_on, name, .. } if *r_on <= 0.0 => {
                    return Err(Error::Netlist(format!("switch {name}: r_on must be > 0")));
                }
                Element::Vccs { i_max, name, .. } => {
                    if let Some(im) = i_max {
                        if *im <= 0.0 {
                            return Err(Error::Netlist(format!("vccs {name}: i_max must be > 0")));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Parses the element-per-line netlist text format.
///
/// Grammar (one directive per line, `#` starts a comment):
///
/// ```text
/// clock <n_phases> <f_lo_hz> <duty> <guard_s>
/// R  <name> <a> <b> <ohms>
/// C  <name> <a> <b> <farads>
/// SW <name> <a> <b> <r_on> phase <k>
/// SW <name> <a> <b> <r_on> always
/// G  <name> <out+> <out-> <in+> <in-> <gm> [imax]
/// V  <name> <p> <n>
/// I  <name> <p> <n>
/// PROBE <name> <pos> [neg]
/// ```
///
/// Node "0" or "gnd" is ground. Sources take their waveforms from the engine
/// by name. Returns the netlist and the clock scheme (a `clock` line is
/// required when any switch is phase-controlled).
pub fn parse_netlist(text: &str) -> Result<(Netlist, Option<ClockScheme>)> {
    let mut nl = Netlist::new();
    let mut clocks = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| Error::Netlist(format!("line {}: {msg}: {line}", lineno + 1));
        let fval = |s: &str, what: &str| -> Result<f64> {
            crate::util::parse_value(s).map_err(|_| err(&format!("bad {what} '{s}'")))
        };
        match tok[0].to_ascii_uppercase().as_str() {
            "CLOCK" => {
                if tok.len() != 5 {
                    return Err(err("clock needs: n_phases f_lo duty guard"));
                }
                let n: usize = tok[1].parse().map_err(|_| err("bad n_phases"))?;
                clocks = Some(crate::clocks::make_nonoverlap_clocks(
                    n,
                    fval(tok[2], "f_lo")?,
                    fval(tok[3], "duty")?,
                    fval(tok[4], "guard")?,
                )?);
            }
            "R" | "C" => {
                if tok.len() != 5 {
                    return Err(err("need: name a b value"));
                }
                let (a, b) = (nl.node(tok[2]), nl.node(tok[3]));
                let v = fval(tok[4], "value")?;
                let name = tok[1].to_string();
                if tok[0].eq_ignore_ascii_case("R") {
                    nl.add(Element::Resistor {
                        name,
                        p: a,
                        n: b,
                        ohms: v,
                    });
                } else {
                    nl.add(Element::Capacitor {
                        name,
                        p: a,
                        n: b,
                        farads: v,
                    });
                }
            }
            "SW" => {
                if tok.len() < 6 {
                    return Err(err("need: name a b r_on phase k | always"));
                }
                let (a, b) = (nl.node(tok[2]), nl.node(tok[3]));
                let r_on = fval(tok[4], "r_on")?;
                let ctrl = match tok[5].to_ascii_lowercase().as_str() {
                    "phase" => {
                        let k: usize = tok
                            .get(6)
                            .ok_or_else(|| err("phase needs an index"))?
                            .parse()
                            .map_err(|_| err("bad phase index"))?;
                        SwitchCtrl::Phase(k)
                    }
                    "always" => SwitchCtrl::Always,
                    other => return Err(err(&format!("unknown switch control '{other}'"))),
                };
                nl.add(Element::Switch {
                    name: tok[1].to_string(),
                    p: a,
                    n: b,
                    r_on,
                    ctrl,
                });
            }
            "G" => {
                if tok.len() < 7 {
                    return Err(err("need: name out+ out- in+ in- gm [imax]"));
                }
                let out_p = nl.node(tok[2]);
                let out_n = nl.node(tok[3]);
                let in_p = nl.node(tok[4]);
                let in_n = nl.node(tok[5]);
                let gm = fval(tok[6], "gm")?;
                let i_max = match tok.get(7) {
                    Some(s) => Some(fval(s, "imax")?),
                    None => None,
                };
                nl.add(Element::Vccs {
                    name: tok[1].to_string(),
                    out_p,
                    out_n,
                    in_p,
                    in_n,
                    gm,
                    gate: None,
                    i_max,
                });
            }
            "V" | "I" => {
                if tok.len() != 4 {
                    return Err(err("need: name p n"));
                }
                let (p, n) = (nl.node(tok[2]), nl.node(tok[3]));
                let name = tok[1].to_string();
                if tok[0].eq_ignore_ascii_case("V") {
                    nl.add(Element::VSource { name, p, n });
                } else {
                    nl.add(Element::ISource { name, p, n });
                }
            }
            "PROBE" => {
                if tok.len() < 3 {
                    return Err(err("need: name pos [neg]"));
                }
                let pos = nl.node(tok[2]);
                let neg = tok.get(3).map(|s| nl.node(s)).unwrap_or(GROUND);
                nl.add_probe(tok[1], pos, neg);
            }
            other => return Err(err(&format!("unknown element kind '{other}'"))),
        }
    }
    nl.validate()?;
    Ok((nl, clocks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_simple_rc_netlist() {
        let text = "
            # one-pole RC
            clock 8 500e6 0.125 0
            V vin in 0
            R rs in out 50
            C cl out 0 1e-12
            SW s1 out tap 10 phase 3
            PROBE vout out
        ";
        let (nl, clocks) = parse_netlist(text).unwrap();
        assert_eq!(nl.elements.len(), 4);
        assert_eq!(nl.capacitors().len(), 1);
        assert_eq!(nl.sources().len(), 1);
        assert_eq!(nl.probe_index("vout"), Some(0));
        assert_eq!(clocks.unwrap().n_phases, 8);
    }

    #[test]
    fn parse_rejects_bad_lines() {
        assert!(parse_netlist("R r1 a").is_err());
        assert!(parse_netlist("Q q1 a b 5").is_err());
        assert!(parse_netlist("R r1 a b -5").is_err());
        assert!(parse_netlist("SW s a b 10 sometimes").is_err());
    }

    #[test]
    fn ground_aliases() {
        let mut nl = Netlist::new();
        assert_eq!(nl.node("0"), GROUND);
        assert_eq!(nl.node("gnd"), GROUND);
        assert_eq!(nl.node("GND"), GROUND);
        let a = nl.node("a");
        assert_eq!(nl.node("a"), a);
    }
}
