//! Per-segment MNA assembly.
//!
//! Within one clock segment every switch state and gate value is constant, so
//! the network is linear. The solve treats capacitor branch voltages as known
//! quantities (the state) and recovers node voltages, capacitor currents and
//! voltage-source currents from one bordered system:
//!
//! ```text
//! [ G    Ac   Av ] [ v  ]   [ Bi u ]
//! [ Ac^T 0    0  ] [ iC ] = [  x   ]
//! [ Av^T 0    0  ] [ iV ]   [ Ev u ]
//! ```
//!
//! Subnetworks with no DC path to ground have their common-mode voltage
//! pinned by a 1 S tie to ground on one node; summing KCL over such a
//! component shows the tie carries exactly zero current, so charge on
//! isolated capacitors is conserved to machine precision.

use super::{Element, Netlist, NodeId, SwitchCtrl, GROUND};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Resolved switch/gate state for one segment.
#[derive(Debug, Clone)]
pub struct SwitchStates {
    /// Closed flag per element index (meaningful for switches only).
    pub closed: Vec<bool>,
    /// Signed gate multiplier per element index (meaningful for gated vccs;
    /// 1.0 for ungated).
    pub gate: Vec<f64>,
}

impl SwitchStates {
    /// Evaluates every control at time `t`.
    pub fn at_time(netlist: &Netlist, clocks: &crate::clocks::ClockScheme, t: f64) -> Self {
        let mut closed = vec![false; netlist.elements.len()];
        let mut gate = vec![1.0; netlist.elements.len()];
        for (i, e) in netlist.elements.iter().enumerate() {
            match e {
                Element::Switch { ctrl, .. } => {
                    closed[i] = match ctrl {
                        SwitchCtrl::Phase(k) => clocks.phase_active(*k, t),
                        SwitchCtrl::Train(w) => w.value_at(t) != 0,
                        SwitchCtrl::Always => true,
                    };
                }
                Element::Vccs { gate: Some(w), .. } => {
                    gate[i] = f64::from(w.value_at(t));
                }
                _ => {}
            }
        }
        SwitchStates { closed, gate }
    }

    /// All switches closed, all gates at +1 (useful for static analyses).
    pub fn all_closed(netlist: &Netlist) -> Self {
        SwitchStates {
            closed: vec![true; netlist.elements.len()],
            gate: vec![1.0; netlist.elements.len()],
        }
    }
}

/// A saturating transconductor cell extracted for nonlinear integration:
/// i = gate * i_max * tanh(gm * v_ctrl / i_max).
#[derive(Debug, Clone)]
pub struct SatCell {
    pub element: usize,
    pub gm: f64,
    pub i_max: f64,
    pub gate: f64,
    pub in_p: NodeId,
    pub in_n: NodeId,
    pub out_p: NodeId,
    pub out_n: NodeId,
}

/// Stamped matrices for one switch configuration.
#[derive(Debug)]
pub struct Stamped {
    /// Non-ground node count; node v-index = node_id - 1.
    pub nn: usize,
    pub nc: usize,
    pub nv: usize,
    /// Bordered solve matrix of size (nn + nc + nv).
    pub m: DMatrix<f64>,
    /// Conventional MNA conductance (nodes + vsource rows), for inspection.
    pub g_bordered: DMatrix<f64>,
    /// Nodal capacitance matrix (nn x nn).
    pub cmat: DMatrix<f64>,
    /// Input map onto the bordered system: one column per source.
    pub b_input: DMatrix<f64>,
    /// Capacitor (element idx, p, n, farads), defining the state order.
    pub caps: Vec<(usize, NodeId, NodeId, f64)>,
    /// Saturating cells excluded from the linear stamps.
    pub sat_cells: Vec<SatCell>,
    /// Nodes that received a common-mode tie this segment.
    pub tied_nodes: Vec<NodeId>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Assembles the per-segment matrices for a given switch configuration.
///
/// Closed switches stamp as conductance 1/r_on; open switches are absent.
/// Saturating transconductors (i_max set) are excluded from the linear
/// stamps and returned as `sat_cells`; enable them by injecting their output
/// currents through `Stamped::inject_columns`.
pub fn stamp(netlist: &Netlist, states: &SwitchStates) -> Result<Stamped> {
    netlist.validate()?;
    let nn = netlist.num_nodes() - 1;
    let caps = netlist.capacitors();
    let nc = caps.len();
    let sources = netlist.sources();
    let vsrcs: Vec<(usize, NodeId, NodeId)> = netlist
        .elements
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e {
            Element::VSource { p, n, .. } => Some((i, *p, *n)),
            _ => None,
        })
        .collect();
    let nv = vsrcs.len();
    let dim = nn + nc + nv;

    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut g_bordered = DMatrix::<f64>::zeros(nn + nv, nn + nv);
    let mut cmat = DMatrix::<f64>::zeros(nn, nn);
    let mut b_input = DMatrix::<f64>::zeros(dim, sources.len());
    let mut sat_cells = Vec::new();

    // union-find over nodes joined by current-carrying two-terminal paths
    let mut uf = UnionFind::new(netlist.num_nodes());
    // per-node: has any incident R / C / closed switch / V source
    let mut anchored = vec![false; netlist.num_nodes()];
    // per-node: receives vccs or current-source output
    let mut injected = vec![false; netlist.num_nodes()];

    let stamp_g = |m: &mut DMatrix<f64>, gb: &mut DMatrix<f64>, p: NodeId, n: NodeId, g: f64| {
        if p != GROUND {
            m[(p - 1, p - 1)] += g;
            gb[(p - 1, p - 1)] += g;
        }
        if n != GROUND {
            m[(n - 1, n - 1)] += g;
            gb[(n - 1, n - 1)] += g;
        }
        if p != GROUND && n != GROUND {
            m[(p - 1, n - 1)] -= g;
            m[(n - 1, p - 1)] -= g;
            gb[(p - 1, n - 1)] -= g;
            gb[(n - 1, p - 1)] -= g;
        }
    };

    let mut cap_seen = 0usize;
    let mut v_seen = 0usize;
    for (idx, e) in netlist.elements.iter().enumerate() {
        match e {
            Element::Resistor { p, n, ohms, .. } => {
                stamp_g(&mut m, &mut g_bordered, *p, *n, 1.0 / ohms);
                uf.union(*p, *n);
                anchored[*p] = true;
                anchored[*n] = true;
            }
            Element::Switch { p, n, r_on, .. } => {
                if states.closed[idx] {
                    stamp_g(&mut m, &mut g_bordered, *p, *n, 1.0 / r_on);
                    uf.union(*p, *n);
                    anchored[*p] = true;
                    anchored[*n] = true;
                }
            }
            Element::Capacitor { p, n, farads, .. } => {
                let c = cap_seen;
                cap_seen += 1;
                let col = nn + c;
                // KCL: current iC leaves p, enters n
                if *p != GROUND {
                    m[(*p - 1, col)] += 1.0;
                    m[(col, *p - 1)] += 1.0;
                    cmat[(*p - 1, *p - 1)] += farads;
                }
                if *n != GROUND {
                    m[(*n - 1, col)] -= 1.0;
                    m[(col, *n - 1)] -= 1.0;
                    cmat[(*n - 1, *n - 1)] += farads;
                }
                if *p != GROUND && *n != GROUND {
                    cmat[(*p - 1, *n - 1)] -= farads;
                    cmat[(*n - 1, *p - 1)] -= farads;
                }
                uf.union(*p, *n);
                anchored[*p] = true;
                anchored[*n] = true;
            }
            Element::Vccs {
                out_p,
                out_n,
                in_p,
                in_n,
                gm,
                i_max,
                ..
            } => {
                let g_eff = gm * states.gate[idx];
                injected[*out_p] = true;
                injected[*out_n] = true;
                if let Some(imax) = i_max {
                    if states.gate[idx] != 0.0 {
                        sat_cells.push(SatCell {
                            element: idx,
                            gm: *gm,
                            i_max: *imax,
                            gate: states.gate[idx],
                            in_p: *in_p,
                            in_n: *in_n,
                            out_p: *out_p,
                            out_n: *out_n,
                        });
                    }
                } else if g_eff != 0.0 {
                    // i = g_eff * (v_inp - v_inn) out of out_p
                    let mut add = |row: NodeId, col: NodeId, s: f64| {
                        if row != GROUND && col != GROUND {
                            m[(row - 1, col - 1)] += s;
                            g_bordered[(row - 1, col - 1)] += s;
                        }
                    };
                    add(*out_p, *in_p, g_eff);
                    add(*out_p, *in_n, -g_eff);
                    add(*out_n, *in_p, -g_eff);
                    add(*out_n, *in_n, g_eff);
                }
            }
            Element::VSource { p, n, .. } => {
                let row = nn + nc + v_seen;
                let brow = nn + v_seen;
                v_seen += 1;
                if *p != GROUND {
                    m[(*p - 1, row)] += 1.0;
                    m[(row, *p - 1)] += 1.0;
                    g_bordered[(*p - 1, brow)] += 1.0;
                    g_bordered[(brow, *p - 1)] += 1.0;
                }
                if *n != GROUND {
                    m[(*n - 1, row)] -= 1.0;
                    m[(row, *n - 1)] -= 1.0;
                    g_bordered[(*n - 1, brow)] -= 1.0;
                    g_bordered[(brow, *n - 1)] -= 1.0;
                }
                uf.union(*p, *n);
                anchored[*p] = true;
                anchored[*n] = true;
            }
            Element::ISource { p, n, .. } => {
                injected[*p] = true;
                injected[*n] = true;
            }
        }
    }

    // input columns
    for (s, (elem_idx, _)) in sources.iter().enumerate() {
        match &netlist.elements[*elem_idx] {
            Element::VSource { .. } => {
                let v_ord = vsrcs.iter().position(|(i, _, _)| i == elem_idx).unwrap();
                b_input[(nn + nc + v_ord, s)] = 1.0;
            }
            Element::ISource { p, n, .. } => {
                if *p != GROUND {
                    b_input[(*p - 1, s)] += 1.0;
                }
                if *n != GROUND {
                    b_input[(*n - 1, s)] -= 1.0;
                }
            }
            _ => unreachable!(),
        }
    }

    // genuinely underdetermined nodes: current injected with nothing to
    // carry it away
    let offending: Vec<String> = (1..netlist.num_nodes())
        .filter(|&id| injected[id] && !anchored[id])
        .map(|id| netlist.node_name(id).to_string())
        .collect();
    if !offending.is_empty() {
        return Err(Error::SingularTopology {
            segment: 0,
            detail: format!(
                "current injected into floating node(s) with no path: {}",
                offending.join(", ")
            ),
        });
    }

    // tie one node per ground-less component (pins the common-mode voltage)
    let gref = uf.find(GROUND);
    let mut tied_nodes = Vec::new();
    let mut tied_roots: Vec<usize> = Vec::new();
    for id in 1..netlist.num_nodes() {
        if !anchored[id] && !injected[id] {
            // dangling node touched only by open switches: pin it directly
            m[(id - 1, id - 1)] += 1.0;
            tied_nodes.push(id);
            continue;
        }
        let root = uf.find(id);
        if root != gref && !tied_roots.contains(&root) {
            tied_roots.push(root);
            m[(id - 1, id - 1)] += 1.0;
            tied_nodes.push(id);
        }
    }

    Ok(Stamped {
        nn,
        nc,
        nv,
        m,
        g_bordered,
        cmat,
        b_input,
        caps,
        sat_cells,
        tied_nodes,
    })
}

impl Stamped {
    /// Unit current-injection column for a node pair (+1 into p, -1 into n).
    pub fn inject_column(&self, p: NodeId, n: NodeId) -> nalgebra::DVector<f64> {
        let mut col = nalgebra::DVector::zeros(self.m.nrows());
        if p != GROUND {
            col[p - 1] += 1.0;
        }
        if n != GROUND {
            col[n - 1] -= 1.0;
        }
        col
    }

    /// RHS column selecting capacitor `c`'s constraint row.
    pub fn state_column(&self, c: usize) -> nalgebra::DVector<f64> {
        let mut col = nalgebra::DVector::zeros(self.m.nrows());
        col[self.nn + c] = 1.0;
        col
    }
}
