//! Flat key=value configuration with section prefixes.
//!
//! The format is one `section.key = value` pair per line, `#` comments,
//! duplicate keys rejected. Values accept engineering suffixes (`2pF`,
//! `500MHz`, `10m`) and plain scientific notation. Every parameter that
//! affects results has a default here and appears in the resolved table, so
//! `validate` output is the complete effective configuration.

use crate::blocks::{
    DriveMode, Hr1Params, Hr2Params, NPathParams, PwmSettings, ReceiverParams, UpconverterMode,
    N_PATHS,
};
use crate::error::{Error, Result};

/// Ordered, duplicate-checked key=value pairs.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: Vec<(String, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Config {
                line: ln + 1,
                msg: format!("expected key = value, got '{line}'"),
            })?;
            let key = k.trim().to_string();
            let val = v.trim().to_string();
            if key.is_empty() || val.is_empty() {
                return Err(Error::Config {
                    line: ln + 1,
                    msg: format!("empty key or value in '{line}'"),
                });
            }
            if entries.iter().any(|(ek, _)| *ek == key) {
                return Err(Error::Config {
                    line: ln + 1,
                    msg: format!("duplicate key '{key}'"),
                });
            }
            entries.push((key, val));
        }
        Ok(Config { entries })
    }

    /// Applies a `--set key=value` override (replaces an existing key).
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or(Error::Config {
            line: 0,
            msg: format!("override must be key=value, got '{assignment}'"),
        })?;
        let key = k.trim().to_string();
        let val = v.trim().to_string();
        if let Some(e) = self.entries.iter_mut().find(|(ek, _)| *ek == key) {
            e.1 = val;
        } else {
            self.entries.push((key, val));
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }
}

pub use crate::util::parse_value;

pub fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(Error::Config {
            line: 0,
            msg: format!("cannot parse boolean '{other}'"),
        }),
    }
}

fn parse_ratios(s: &str) -> Result<(u32, u32, u32)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config {
            line: 0,
            msg: format!("ratios must be a:b:c, got '{s}'"),
        });
    }
    let p = |x: &str| -> Result<u32> {
        x.trim().parse().map_err(|_| Error::Config {
            line: 0,
            msg: format!("bad ratio component '{x}'"),
        })
    };
    Ok((p(parts[0])?, p(parts[1])?, p(parts[2])?))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| parse_value(x.trim())).collect()
}

/// Engine-level settings shared by the studies.
#[derive(Debug, Clone)]
pub struct EngineSettings {
    pub harmonics: i64,
    pub settle_periods: usize,
    pub analysis_periods: usize,
    pub samples_per_period: usize,
    pub rk4_substeps: usize,
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// The fully resolved configuration: receiver parameters plus every study
/// knob, with all defaults materialized.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: ReceiverParams,
    pub engine: EngineSettings,
    pub sweep: SweepSettings,
    /// Band half-span and point count for harmonic-response curves.
    pub bands_span: f64,
    pub bands_points: usize,
    /// Tone offset from a harmonic for single-point measurements.
    pub delta: f64,
    pub peakshift_c_in: Vec<f64>,
    pub peakshift_c_x: Vec<f64>,
    pub compress: crate::metrics::CompressionSettings,
    /// Per-unit-cell saturation currents used when a study enables
    /// compression.
    pub hr2_i_max: f64,
    pub hr1_i_max: f64,
    pub noise_delta: f64,
    /// Front-end parasitics used by the noise-translation study: the gate
    /// waveform's residual high harmonics only stay below the fundamental
    /// path when the RF node has realistic shunt capacitance (compensated
    /// by c_x), so the study defaults to a representative front end.
    pub noise_c_in: f64,
    pub noise_c_x: f64,
    pub impedance_span: f64,
    pub impedance_points: usize,
    pub impedance_ref: f64,
    pub jobs: usize,
    pub timestamp: bool,
    /// Derived values echoed by validate.
    pub c_bb_derived: bool,
    pub c_out_derived: bool,
}

impl Resolved {
    pub fn from_config(cfg: &Config) -> Result<Resolved> {
        // reject unknown keys up front so typos do not silently default
        for k in cfg.keys() {
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::Config {
                    line: 0,
                    msg: format!("unknown key '{k}'"),
                });
            }
        }
        let num = |key: &str, default: f64| -> Result<f64> {
            match cfg.get(key) {
                Some(v) => parse_value(v).map_err(|_| Error::Config {
                    line: 0,
                    msg: format!("bad value for {key}: '{v}'"),
                }),
                None => Ok(default),
            }
        };
        let int = |key: &str, default: usize| -> Result<usize> {
            Ok(num(key, default as f64)?.round() as usize)
        };
        let boolean = |key: &str, default: bool| -> Result<bool> {
            match cfg.get(key) {
                Some(v) => parse_bool(v),
                None => Ok(default),
            }
        };

        let f_lo = num("clock.f_lo", 500e6)?;
        let duty = num("clock.duty", 1.0 / N_PATHS as f64)?;
        let guard = num("clock.guard", 0.0)?;
        let r_s = num("npath.r_s", 50.0)?;
        let r_on = num("npath.r_on", 5.0)?;
        let differential = boolean("npath.differential", true)?;
        let bw = num("npath.bw", 20e6)?;
        let (c_bb, c_bb_derived) = match cfg.get("npath.c_bb") {
            Some(v) if v != "auto" => (parse_value(v)?, false),
            _ => (
                NPathParams::c_bb_for_bandwidth(N_PATHS, differential, r_s, bw),
                true,
            ),
        };
        let r_out = num("hr2.r_out", 2000.0)?;
        let (c_out, c_out_derived) = match cfg.get("hr2.c_out") {
            Some(v) if v != "auto" => (parse_value(v)?, false),
            _ => (Hr2Params::c_out_for_pole(r_out, f_lo), true),
        };
        let hr2_i_max = num("hr2.i_max", 2e-5)?;
        let hr1_i_max = num("hr1.i_max", 2e-5)?;
        let hr2_sat = boolean("hr2.saturate", false)?;
        let hr1_sat = boolean("hr1.saturate", false)?;

        let upconverter = match cfg.get("loop.upconverter").unwrap_or("pwm") {
            "pwm" => UpconverterMode::PwmLo,
            "square" => UpconverterMode::SquareLo,
            other => {
                return Err(Error::Config {
                    line: 0,
                    msg: format!("loop.upconverter must be pwm or square, got '{other}'"),
                })
            }
        };

        let params = ReceiverParams {
            npath: NPathParams {
                n_paths: N_PATHS,
                f_lo,
                r_s,
                r_on,
                c_bb,
                c_in: num("npath.c_in", 0.0)?,
                c_x: num("npath.c_x", 0.0)?,
                differential,
            },
            hr2: Hr2Params {
                gm_unit: num("hr2.gm_unit", 1e-3)?,
                ratios: parse_ratios(cfg.get("hr2.ratios").unwrap_or("5:7:5"))?,
                rotation: int("hr2.rotation", 3)?,
                r_out,
                c_out,
                saturation: if hr2_sat { Some(hr2_i_max) } else { None },
            },
            hr1: Hr1Params {
                gm_unit: num("hr1.gm_unit", 1e-3)?,
                ratios: parse_ratios(cfg.get("hr1.ratios").unwrap_or("12:17:12"))?,
                tia_gain: num("hr1.tia_gain", 1000.0)?,
                tia_bandwidth: num("hr1.tia_bw", 20e6)?,
                saturation: if hr1_sat { Some(hr1_i_max) } else { None },
            },
            pwm: PwmSettings {
                grid: int("pwm.grid", 256)?,
                suppression_db: num("pwm.suppression_db", -40.0)?,
                balance_db: num("pwm.balance_db", 0.5)?,
            },
            duty,
            guard,
            loop_enabled: boolean("loop.enabled", true)?,
            upconverter,
            gm_up: num("loop.gm_up", 4e-3)?,
            drive: DriveMode::Voltage,
        };

        let sweep = SweepSettings {
            start: num("sweep.start", 300e6)?,
            stop: num("sweep.stop", 3e9)?,
            points: int("sweep.points", 271)?,
        };
        if !(sweep.start < sweep.stop) || sweep.points < 2 {
            return Err(Error::Config {
                line: 0,
                msg: format!(
                    "sweep needs start < stop and points >= 2 (got {} .. {} x {})",
                    sweep.start, sweep.stop, sweep.points
                ),
            });
        }

        let compress = crate::metrics::CompressionSettings {
            blocker_harmonic: int("compress.blocker_harmonic", 3)? as i64,
            pwm_grid: int("compress.pwm_grid", 64)?,
            desired_delta: num("compress.desired_delta", 2e6)?,
            blocker_delta: num("compress.blocker_delta", 6e6)?,
            desired_amp: num("compress.desired_amp", 1e-3)?,
            start_dbv: num("compress.start_dbv", -44.0)?,
            stop_dbv: num("compress.stop_dbv", 6.0)?,
            coarse_step_db: num("compress.coarse_step_db", 4.0)?,
            fine_step_db: num("compress.fine_step_db", 1.0)?,
            settle_periods: int("compress.settle_periods", 260)?,
            analysis_periods: int("compress.analysis_periods", 250)?,
            samples_per_period: int("engine.samples_per_period", 256)?,
            rk4_substeps: int("engine.rk4_substeps", 32)?,
        };

        Ok(Resolved {
            params,
            engine: EngineSettings {
                harmonics: int("engine.harmonics", 9)? as i64,
                settle_periods: int("engine.settle_periods", 100)?,
                analysis_periods: int("engine.analysis_periods", 500)?,
                samples_per_period: int("engine.samples_per_period", 256)?,
                rk4_substeps: int("engine.rk4_substeps", 32)?,
            },
            sweep,
            bands_span: num("bands.span", 15e6)?,
            bands_points: int("bands.points", 24)?,
            delta: num("offset.delta", 1e6)?,
            peakshift_c_in: match cfg.get("peakshift.c_in_list") {
                Some(v) => parse_list(v)?,
                None => vec![0.5e-12, 1e-12, 2e-12, 5e-12],
            },
            peakshift_c_x: match cfg.get("peakshift.c_x_list") {
                Some(v) => parse_list(v)?,
                None => vec![0.0, 1e-12, 2e-12, 5e-12],
            },
            compress,
            hr2_i_max,
            hr1_i_max,
            noise_delta: num("noise.delta", 1e6)?,
            noise_c_in: num("noise.c_in", 2e-12)?,
            noise_c_x: num("noise.c_x", 1e-12)?,
            impedance_span: num("impedance.span", 30e6)?,
            impedance_points: int("impedance.points", 31)?,
            impedance_ref: num("impedance.ref", 50.0)?,
            jobs: int("run.jobs", 0)?,
            timestamp: boolean("run.timestamp", true)?,
            c_bb_derived,
            c_out_derived,
        })
    }

    /// The complete effective parameter table (key, value, note) in a fixed
    /// order; the basis of validate output and the config hash.
    pub fn effective_table(&self) -> Vec<(String, String, String)> {
        let p = &self.params;
        let fnum = |v: f64| format!("{v:.9e}");
        let mut t: Vec<(String, String, String)> = Vec::new();
        let mut push = |k: &str, v: String, note: &str| t.push((k.into(), v, note.into()));
        push("clock.f_lo", fnum(p.npath.f_lo), "Hz");
        push("clock.n_phases", format!("{}", p.npath.n_paths), "fixed");
        push("clock.duty", fnum(p.duty), "");
        push("clock.guard", fnum(p.guard), "s");
        push("pwm.grid", format!("{}", p.pwm.grid), "");
        push("pwm.suppression_db", fnum(p.pwm.suppression_db), "dB");
        push("pwm.balance_db", fnum(p.pwm.balance_db), "dB");
        push("npath.r_s", fnum(p.npath.r_s), "ohm");
        push("npath.r_on", fnum(p.npath.r_on), "ohm");
        push(
            "npath.c_bb",
            fnum(p.npath.c_bb),
            if self.c_bb_derived {
                "F, derived from npath.bw"
            } else {
                "F"
            },
        );
        push("npath.c_in", fnum(p.npath.c_in), "F");
        push("npath.c_x", fnum(p.npath.c_x), "F");
        push(
            "npath.differential",
            format!("{}", p.npath.differential),
            "",
        );
        push("hr2.gm_unit", fnum(p.hr2.gm_unit), "S");
        push(
            "hr2.ratios",
            format!("{}:{}:{}", p.hr2.ratios.0, p.hr2.ratios.1, p.hr2.ratios.2),
            "",
        );
        push("hr2.rotation", format!("{}", p.hr2.rotation), "phase steps");
        push("hr2.r_out", fnum(p.hr2.r_out), "ohm");
        push(
            "hr2.c_out",
            fnum(p.hr2.c_out),
            if self.c_out_derived {
                "F, derived: pole at f_lo/5"
            } else {
                "F"
            },
        );
        push(
            "hr2.saturate",
            format!("{}", p.hr2.saturation.is_some()),
            "",
        );
        push("hr2.i_max", fnum(self.hr2_i_max), "A per unit cell");
        push("hr1.gm_unit", fnum(p.hr1.gm_unit), "S");
        push(
            "hr1.ratios",
            format!("{}:{}:{}", p.hr1.ratios.0, p.hr1.ratios.1, p.hr1.ratios.2),
            "",
        );
        push("hr1.tia_gain", fnum(p.hr1.tia_gain), "ohm");
        push("hr1.tia_bw", fnum(p.hr1.tia_bandwidth), "Hz");
        push(
            "hr1.saturate",
            format!("{}", p.hr1.saturation.is_some()),
            "",
        );
        push("hr1.i_max", fnum(self.hr1_i_max), "A per unit cell");
        push("loop.enabled", format!("{}", p.loop_enabled), "");
        push(
            "loop.upconverter",
            match p.upconverter {
                UpconverterMode::PwmLo => "pwm".into(),
                UpconverterMode::SquareLo => "square".into(),
            },
            "",
        );
        push("loop.gm_up", fnum(p.gm_up), "S");
        push("engine.harmonics", format!("{}", self.engine.harmonics), "");
        push(
            "engine.settle_periods",
            format!("{}", self.engine.settle_periods),
            "",
        );
        push(
            "engine.analysis_periods",
            format!("{}", self.engine.analysis_periods),
            "",
        );
        push(
            "engine.samples_per_period",
            format!("{}", self.engine.samples_per_period),
            "",
        );
        push(
            "engine.rk4_substeps",
            format!("{}", self.engine.rk4_substeps),
            "per segment",
        );
        push("sweep.start", fnum(self.sweep.start), "Hz");
        push("sweep.stop", fnum(self.sweep.stop), "Hz");
        push("sweep.points", format!("{}", self.sweep.points), "");
        push("bands.span", fnum(self.bands_span), "Hz");
        push("bands.points", format!("{}", self.bands_points), "");
        push("offset.delta", fnum(self.delta), "Hz");
        push(
            "peakshift.c_in_list",
            self.peakshift_c_in
                .iter()
                .map(|v| fnum(*v))
                .collect::<Vec<_>>()
                .join(","),
            "F",
        );
        push(
            "peakshift.c_x_list",
            self.peakshift_c_x
                .iter()
                .map(|v| fnum(*v))
                .collect::<Vec<_>>()
                .join(","),
            "F",
        );
        let c = &self.compress;
        push(
            "compress.blocker_harmonic",
            format!("{}", c.blocker_harmonic),
            "",
        );
        push("compress.desired_delta", fnum(c.desired_delta), "Hz");
        push("compress.blocker_delta", fnum(c.blocker_delta), "Hz");
        push("compress.desired_amp", fnum(c.desired_amp), "V");
        push("compress.start_dbv", fnum(c.start_dbv), "dBV");
        push("compress.stop_dbv", fnum(c.stop_dbv), "dBV");
        push("compress.coarse_step_db", fnum(c.coarse_step_db), "dB");
        push("compress.fine_step_db", fnum(c.fine_step_db), "dB");
        push("compress.pwm_grid", format!("{}", c.pwm_grid), "");
        push(
            "compress.settle_periods",
            format!("{}", c.settle_periods),
            "",
        );
        push(
            "compress.analysis_periods",
            format!("{}", c.analysis_periods),
            "",
        );
        push("noise.delta", fnum(self.noise_delta), "Hz");
        push("noise.c_in", fnum(self.noise_c_in), "F");
        push("noise.c_x", fnum(self.noise_c_x), "F");
        push("impedance.span", fnum(self.impedance_span), "Hz");
        push("impedance.points", format!("{}", self.impedance_points), "");
        push("impedance.ref", fnum(self.impedance_ref), "ohm");
        push("run.jobs", format!("{}", self.jobs), "0 = all cores");
        push("run.timestamp", format!("{}", self.timestamp), "");
        t
    }

    /// Hash over every simulation-affecting parameter (run.* excluded).
    pub fn hash(&self) -> u64 {
        let mut text = String::new();
        for (k, v, _) in self.effective_table() {
            if k.starts_with("run.") {
                continue;
            }
            text.push_str(&k);
            text.push('=');
            text.push_str(&v);
            text.push('\n');
        }
        crate::util::fnv1a64(text.as_bytes())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "clock.f_lo",
    "clock.duty",
    "clock.guard",
    "pwm.grid",
    "pwm.suppression_db",
    "pwm.balance_db",
    "npath.r_s",
    "npath.r_on",
    "npath.bw",
    "npath.c_bb",
    "npath.c_in",
    "npath.c_x",
    "npath.differential",
    "hr2.gm_unit",
    "hr2.ratios",
    "hr2.rotation",
    "hr2.r_out",
    "hr2.c_out",
    "hr2.saturate",
    "hr2.i_max",
    "hr1.gm_unit",
    "hr1.ratios",
    "hr1.tia_gain",
    "hr1.tia_bw",
    "hr1.saturate",
    "hr1.i_max",
    "loop.enabled",
    "loop.upconverter",
    "loop.gm_up",
    "engine.harmonics",
    "engine.settle_periods",
    "engine.analysis_periods",
    "engine.samples_per_period",
    "engine.rk4_substeps",
    "sweep.start",
    "sweep.stop",
    "sweep.points",
    "bands.span",
    "bands.points",
    "offset.delta",
    "peakshift.c_in_list",
    "peakshift.c_x_list",
    "compress.blocker_harmonic",
    "compress.desired_delta",
    "compress.blocker_delta",
    "compress.desired_amp",
    "compress.start_dbv",
    "compress.stop_dbv",
    "compress.coarse_step_db",
    "compress.fine_step_db",
    "compress.pwm_grid",
    "compress.settle_periods",
    "compress.analysis_periods",
    "noise.delta",
    "noise.c_in",
    "noise.c_x",
    "impedance.span",
    "impedance.points",
    "impedance.ref",
    "run.jobs",
    "run.timestamp",
];

/// Per-key documentation used by the validate listing.
pub fn known_keys() -> &'static [&'static str] {
    KNOWN_KEYS
}
