//! Named studies behind the CLI: each builds receivers from the resolved
//! configuration, runs the relevant metric, writes a CSV artifact and prints
//! a script-friendly summary line.

use crate::blocks::{build_receiver, DriveMode, ReceiverParams};
use crate::config::{Config, Resolved};
use crate::engine::{harmonic_sweep, SweepResult};
use crate::error::{Error, Result};
use crate::metrics;
use crate::util::fmt_f64;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Sweep,
    RfResponse,
    Hrr,
    PeakShift,
    Compress,
    PwmDesign,
    NoiseTranslation,
    Impedance,
    Validate,
}

impl Study {
    pub fn from_name(name: &str) -> Option<Study> {
        Some(match name {
            "sweep" => Study::Sweep,
            "rf-response" => Study::RfResponse,
            "hrr" => Study::Hrr,
            "peakshift" => Study::PeakShift,
            "compress" => Study::Compress,
            "pwm-design" => Study::PwmDesign,
            "noise-translation" => Study::NoiseTranslation,
            "impedance" => Study::Impedance,
            "validate" => Study::Validate,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Study::Sweep => "sweep",
            Study::RfResponse => "rf-response",
            Study::Hrr => "hrr",
            Study::PeakShift => "peakshift",
            Study::Compress => "compress",
            Study::PwmDesign => "pwm-design",
            Study::NoiseTranslation => "noise-translation",
            Study::Impedance => "impedance",
            Study::Validate => "validate",
        }
    }

    pub fn all_names() -> &'static [&'static str] {
        &[
            "sweep",
            "rf-response",
            "hrr",
            "peakshift",
            "compress",
            "pwm-design",
            "noise-translation",
            "impedance",
            "validate",
        ]
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config_path: Option<PathBuf>,
    pub sets: Vec<String>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub no_timestamp: bool,
}

/// Loads, overrides and resolves the configuration for a run.
pub fn resolve_config(args: &RunArgs) -> Result<Resolved> {
    let mut cfg = match &args.config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config {
                line: 0,
                msg: format!("cannot read {}: {e}", p.display()),
            })?;
            Config::parse(&text)?
        }
        None => Config::parse("")?,
    };
    for s in &args.sets {
        cfg.set(s)?;
    }
    let mut resolved = Resolved::from_config(&cfg)?;
    if let Some(j) = args.jobs {
        resolved.jobs = j;
    }
    if args.no_timestamp {
        resolved.timestamp = false;
    }
    Ok(resolved)
}

fn csv_header(out: &mut String, resolved: &Resolved, study: &str) {
    let _ = writeln!(out, "# study={study}");
    let _ = writeln!(out, "# config_hash={:016x}", resolved.hash());
    if resolved.timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(out, "# generated_unix={now}");
    }
}

fn write_artifact(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn default_out(study: Study) -> PathBuf {
    PathBuf::from(format!("{}.csv", study.name()))
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(f)
    }
}

/// Runs a study, writes its artifact(s), prints the summary line. Returns
/// the paths written.
pub fn run(study: Study, args: &RunArgs) -> Result<Vec<PathBuf>> {
    let resolved = resolve_config(args)?;
    let out_path = args.out.clone().unwrap_or_else(|| default_out(study));
    with_pool(resolved.jobs, || match study {
        Study::Sweep => run_sweep(&resolved, &out_path),
        Study::RfResponse => run_rf_response(&resolved, &out_path),
        Study::Hrr => run_hrr(&resolved, &out_path),
        Study::PeakShift => run_peakshift(&resolved, &out_path),
        Study::Compress => run_compress(&resolved, &out_path),
        Study::PwmDesign => run_pwm_design(&resolved, &out_path),
        Study::NoiseTranslation => run_noise_translation(&resolved, &out_path),
        Study::Impedance => run_impedance(&resolved, &out_path),
        Study::Validate => run_validate(&resolved),
    })
}

fn sweep_to_csv(out: &mut String, result: &SweepResult, probes: &[&str], loop_label: &str) {
    for point in &result.points {
        match &point.response {
            Some(r) => {
                for probe in probes {
                    if let Some(pi) = r.probe_names.iter().position(|p| p == probe) {
                        for (k, v) in r.tracked_k(pi) {
                            let _ = writeln!(
                                out,
                                "{},{},{},{},{},{},{}",
                                fmt_f64(point.f_in),
                                loop_label,
                                probe,
                                k,
                                fmt_f64(crate::util::db(v.norm())),
                                fmt_f64(crate::util::phase_deg(v)),
                                r.method.as_str(),
                            );
                        }
                    }
                }
            }
            None => {
                let _ = writeln!(
                    out,
                    "# error,f_in={},{}",
                    fmt_f64(point.f_in),
                    point.error.as_deref().unwrap_or("unknown")
                );
            }
        }
    }
}

fn run_sweep(resolved: &Resolved, out_path: &Path) -> Result<Vec<PathBuf>> {
    let rx = build_receiver(&resolved.params)?;
    let grid = crate::engine::linear_grid(
        resolved.sweep.start,
        resolved.sweep.stop,
        resolved.sweep.points,
    );
    let mut result = harmonic_sweep(&rx.system, rx.input(), &grid, resolved.engine.harmonics)?;
    result.meta.config_hash = resolved.hash();
    result.meta.loop_enabled = resolved.params.loop_enabled;

    let mut out = String::new();
    csv_header(&mut out, resolved, "sweep");
    let _ = writeln!(out, "# loop_enabled={}", resolved.params.loop_enabled);
    let _ = writeln!(out, "f_in_hz,loop,probe,k,mag_db,phase_deg,method");
    let probes = ["vrf", "vb1", "hr1_i", "hr1_q"];
    let label = if resolved.params.loop_enabled {
        "on"
    } else {
        "off"
    };
    sweep_to_csv(&mut out, &result, &probes, label);
    write_artifact(out_path, &out)?;
    println!(
        "sweep points={} failed={} out={}",
        result.points.len(),
        result.failed_points(),
        out_path.display()
    );
    Ok(vec![out_path.to_path_buf()])
}

fn run_rf_response(resolved: &Resolved, out_path: &Path) -> Result<Vec<PathBuf>> {
    let grid = crate::engine::linear_grid(
        resolved.sweep.start,
        resolved.sweep.stop,
        resolved.sweep.points,
    );
    let mut out = String::new();
    csv_header(&mut out, resolved, "rf-response");
    let _ = writeln!(out, "f_in_hz,loop,probe,k,mag_db,phase_deg,method");
    let mut summaries = Vec::new();
    for enabled in [false, true] {
        let mut p = resolved.params.clone();
        p.loop_enabled = enabled;
        let rx = build_receiver(&p)?;
        let result = harmonic_sweep(&rx.system, rx.input(), &grid, 1)?;
        sweep_to_csv(
            &mut out,
            &result,
            &["vrf"],
            if enabled { "on" } else { "off" },
        );
        for m in [1i64, 3, 5, 7] {
            let peak = metrics::rf_band_peak(&rx, "vrf", m, resolved.bands_span, 15)?;
            summaries.push(format!(
                "peak{}_{}={:.2}",
                m,
                if enabled { "on" } else { "off" },
                peak
            ));
        }
    }
    write_artifact(out_path, &out)?;
    println!(
        "rf-response {} out={}",
        summaries.join(" "),
        out_path.display()
    );
    Ok(vec![out_path.to_path_buf()])
}

fn run_hrr(resolved: &Resolved, out_path: &Path) -> Result<Vec<PathBuf>> {
    let r = metrics::hrr(&resolved.params, resolved.delta, resolved.engine.harmonics)?;
    let mut off = resolved.params.clone();
    off.loop_enabled = false;
    let rx_off = build_receiver(&off)?;
    let pred3 = metrics::single_stage_hrr_prediction(&rx_off, 3);
    let pred5 = metrics::single_stage_hrr_prediction(&rx_off, 5);
    let mut out = String::new();
    csv_header(&mut out, resolved, "hrr");
    let _ = writeln!(out, "variant,hrr3_db,hrr5_db");
    let _ = writeln!(
        out,
        "proposed,{},{}",
        fmt_f64(r.proposed.0),
        fmt_f64(r.proposed.1)
    );
    let _ = writeln!(
        out,
        "single_stage,{},{}",
        fmt_f64(r.single_stage.0),
        fmt_f64(r.single_stage.1)
    );
    let _ = writeln!(
        out,
        "single_stage_predicted,{},{}",
        fmt_f64(pred3),
        fmt_f64(pred5)
    );
    write_artifact(out_path, &out)?;
    println!(
        "hrr proposed_hrr3={:.1} proposed_hrr5={:.1} single_hrr3={:.1} single_hrr5={:.1} \
         predicted3={:.1} predicted5={:.1} out={}",
        r.proposed.0,
        r.proposed.1,
        r.single_stage.0,
        r.single_stage.1,
        pred3,
        pred5,
        out_path.display()
    );
    Ok(vec![out_path.to_path_buf()])
}

fn run_peakshift(resolved: &Resolved, out_path: &Path) -> Result<Vec<PathBuf>> {
    let table = metrics::peak_shift_study(
        &resolved.params,
        &resolved.peakshift_c_in,
        &resolved.peakshift_c_x,
    )?;
    let f_lo = resolved.params.npath.f_lo;
    let mut out = String::new();
    csv_header(&mut out, resolved, "peakshift");
    let _ = writeln!(out, "kind,c_in_f,c_x_f,peak_hz,shift_ppm");
    for &(ci, cx, fpk) in &table.entries {
        let _ = writeln!(
            out,
            "grid,{},{},{},{}",
            fmt_f64(ci),
            fmt_f64(cx),
            fmt_f64(fpk),
            fmt_f64((fpk / f_lo - 1.0) * 1e6)
        );
    }
    let mut summary = String::new();
    for &ci in &resolved.peakshift_c_in {
        let cx = metrics::recenter_cx(&resolved.params, ci, 0.002)?;
        let mut p = resolved.params.clone();
        p.loop_enabled = false;
        p.npath.c_in = ci;
        p.npath.c_x = cx;
        let fpk = metrics::find_peak(&build_receiver(&p)?, 0.05)?;
        let _ = writeln!(
            out,
            "recenter,{},{},{},{}",
            fmt_f64(ci),
            fmt_f64(cx),
            fmt_f64(fpk),
            fmt_f64((fpk / f_lo - 1.0) * 1e6)
        );
        let _ = write!(summary, " cx({:.1}pF)={:.2}pF", ci * 1e12, cx * 1e12);
    }
    write_artifact(out_path, &out)?;
    println!("peakshift{summary} out={}", out_path.display());
    Ok(vec![out_path.to_path_buf()])
}

fn run_compress(resolved: &Resolved, out_path: &Path) -> Result<Vec<PathBuf>> {
    let mut out = String::new();
    csv_header(&mut out, resolved, "compress");
    let _ = writeln!(out, "loop,blocker_dbv,gain_db");
    let mut b3 = [f64::NAN; 2];
    for (i, enabled) in [false, true].into_iter().enumerate() {
        let mut p = resolved.params.clone();
        p.loop_enabled = enabled;
        p.pwm.grid = resolved.compress.pwm_grid;
        p.hr2.saturation = Some(resolved.hr2_i_max);
        p.hr1.saturation = Some(resolved.hr1_i_max);
        let rx = build_receiver(&p)?;
        let r = metrics::blocker_compression(&rx, &resolved.compress)?;
        for &(l, g) in &r.levels {
            let _ = writeln!(
                out,
                "{},{},{}",
                if enabled { "on" } else { "off" },
                fmt_f64(l),
                fmt_f64(g)
            );
        }
        b3[i] = r.b3db_dbv;
    }
    let _ = writeln!(out, "# b3db_off_dbv={}", fmt_f64(b3[0]));
    let _ = writeln!(out, "# b3db_on_dbv={}", fmt_f64(b3[1]));
    write_artifact(out_path, &out)?;
    println!(
        "compress blocker_harmonic={} b3db_off={:.2} b3db_on={:.2} improvement_db={:.2} out={}",
        resolved.compress.blocker_harmonic,
        b3[0],
        b3[1],
        b3[1] - b3[0],
        out_path.display()
    );
    Ok(vec![out_path.to_path_buf()])
}

fn run_pwm_design(resolved: &Resolved, out_path: &Path) -> Result<Vec<PathBuf>> {
    let rep = crate::clocks::synthesize_pwm_lo(
        resolved.params.npath.f_lo,
        resolved.params.pwm.grid,
        resolved.params.pwm.suppression_db,
        resolved.params.pwm.balance_db,
    )?;
    let mut out = String::new();
    csv_header(&mut out, resolved, "pwm-design");
    let _ = writeln!(out, "k,mag_db,phase_deg");
    for k in 0..=12i64 {
        let c = rep.waveform.fourier_coefficient(k);
        let _ = writeln!(
            out,
            "{},{},{}",
            k,
            fmt_f64(crate::util::db(c.norm())),
            fmt_f64(crate::util::phase_deg(c))
        );
    }
    write_artifact(out_path, &out)?;
    let pulse_path = out_path.with_extension("pulses.txt");
    write_artifact(&pulse_path, &rep.waveform.to_text())?;
    println!(
        "pwm-design suppression_db={:.2} balance_db={:.3} c3={:.4} out={} pulses={}",
        rep.suppression_db,
        rep.balance_db,
        rep.c3_mag,
        out_path.display(),
        pulse_path.display()
    );
    Ok(vec![out_path.to_path_buf(), pulse_path])
}

fn run_noise_translation(resolved: &Resolved, out_path: &Path) -> Result<Vec<PathBuf>> {
    let mut p = resolved.params.clone();
    p.npath.c_in = resolved.noise_c_in;
    p.npath.c_x = resolved.noise_c_x;
    let r = metrics::noise_translation_test(&p, resolved.noise_delta)?;
    let mut out = String::new();
    csv_header(&mut out, resolved, "noise-translation");
    let _ = writeln!(out, "mode,level_db");
    let _ = writeln!(out, "pwm,{}", fmt_f64(r.pwm_db));
    let _ = writeln!(out, "square,{}", fmt_f64(r.square_db));
    let _ = writeln!(out, "# ratio_db={}", fmt_f64(r.ratio_db));
    let _ = writeln!(out, "# predicted_db={}", fmt_f64(r.predicted_db));
    write_artifact(out_path, &out)?;
    println!(
        "noise-translation ratio_db={:.2} predicted_db={:.2} out={}",
        r.ratio_db,
        r.predicted_db,
        out_path.display()
    );
    Ok(vec![out_path.to_path_buf()])
}

fn run_impedance(resolved: &Resolved, out_path: &Path) -> Result<Vec<PathBuf>> {
    let mut p = resolved.params.clone();
    p.drive = DriveMode::CurrentProbe;
    let rx = build_receiver(&p)?;
    let f_lo = p.npath.f_lo;
    // without the source branch the only damping is r_on and c_x loss; a
    // strong loop can push the period map unstable, in which case the
    // steady-state solution is a mathematical fixed point, not a reachable
    // operating condition
    let rho = rx.system.monodromy_spectral_radius();
    let grid = crate::engine::linear_grid(
        f_lo - resolved.impedance_span,
        f_lo + resolved.impedance_span,
        resolved.impedance_points,
    );
    let mut out = String::new();
    csv_header(&mut out, resolved, "impedance");
    if rho >= 1.0 {
        let _ = writeln!(
            out,
            "# warning: period map unstable (spectral radius {rho:.4}); add c_x \
             loss or disable the loop"
        );
    }
    let _ = writeln!(out, "f_hz,re_z_ohm,im_z_ohm,reflection_db");
    let mut at_flo = None;
    for &f in &grid {
        let r = metrics::input_impedance(&rx, f, resolved.impedance_ref)?;
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(f),
            fmt_f64(r.z.re),
            fmt_f64(r.z.im),
            fmt_f64(r.reflection_db)
        );
        if (f - f_lo).abs() < 0.51 * (grid[1] - grid[0]) {
            at_flo = Some(r);
        }
    }
    write_artifact(out_path, &out)?;
    let summary = at_flo.expect("grid covers f_lo");
    let stability = if rho >= 1.0 {
        " UNSTABLE-PERIOD-MAP"
    } else {
        ""
    };
    println!(
        "impedance z_at_f_lo={:.1}{:+.1}j reflection_db={:.2}{stability} out={}",
        summary.z.re,
        summary.z.im,
        summary.reflection_db,
        out_path.display()
    );
    Ok(vec![out_path.to_path_buf()])
}

fn run_validate(resolved: &Resolved) -> Result<Vec<PathBuf>> {
    println!(
        "# effective configuration (config_hash={:016x})",
        resolved.hash()
    );
    for (k, v, note) in resolved.effective_table() {
        if note.is_empty() {
            println!("{k} = {v}");
        } else {
            println!("{k} = {v}  # {note}");
        }
    }
    Ok(Vec::new())
}

/// Convenience for tests: builds the default receiver parameters (matches an
/// empty configuration).
pub fn default_receiver_params() -> ReceiverParams {
    Resolved::from_config(&Config::parse("").unwrap())
        .unwrap()
        .params
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_names_roundtrip() {
        for name in Study::all_names() {
            assert_eq!(Study::from_name(name).unwrap().name(), *name);
        }
        assert!(Study::from_name("nope").is_none());
    }

    #[test]
    fn default_params_match_blocks_defaults() {
        let a = default_receiver_params();
        let b = crate::blocks::default_params();
        assert_eq!(a.npath.r_on, b.npath.r_on);
        assert_eq!(a.npath.c_bb, b.npath.c_bb);
        assert_eq!(a.hr2.gm_unit, b.hr2.gm_unit);
        assert_eq!(a.gm_up, b.gm_up);
    }

    #[test]
    fn missing_config_file_is_a_config_error() {
        let args = RunArgs {
            config_path: Some(PathBuf::from("/nonexistent/zzz.cfg")),
            ..Default::default()
        };
        let err = resolve_config(&args).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
