//! Command-line front end: runs named studies against a key=value
//! configuration and emits CSV artifacts.

use npathsim::studies::{run, RunArgs, Study};
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
npathsim <study> [options]

Studies:
  sweep              full harmonic-transfer sweep (components vs f_in)
  rf-response        |V_rf| response, loop on and off
  hrr                harmonic rejection ratios (proposed vs single-stage)
  peakshift          response-peak position vs (c_in, c_x), with recentering
  compress           blocker compression and B3dB, loop on vs off
  pwm-design         synthesize the PWM-LO waveform and dump its spectrum
  noise-translation  HR2-output tone leakage to f_lo: pwm vs square gating
  impedance          input impedance and reflection around f_lo
  validate           print the fully resolved configuration, run nothing

Options:
  --config PATH   key=value configuration file
  --set KEY=VAL   override one key (repeatable)
  --out PATH      output CSV path (default: <study>.csv)
  --jobs N        worker threads (default 0 = all cores)
  --no-timestamp  omit the timestamp header line from artifacts
  -h, --help      this text

Exit codes: 0 success, 2 configuration error, 3 simulation error.";

fn parse_args() -> Result<(Study, RunArgs), String> {
    let mut argv = std::env::args().skip(1);
    let study_name = match argv.next() {
        Some(s) if s == "-h" || s == "--help" => return Err(String::new()),
        Some(s) => s,
        None => return Err("missing study name".into()),
    };
    let study = Study::from_name(&study_name).ok_or_else(|| {
        format!(
            "unknown study '{study_name}' (expected one of: {})",
            Study::all_names().join(", ")
        )
    })?;
    let mut args = RunArgs::default();
    while let Some(flag) = argv.next() {
        match flag.as_str() {
            "--config" => {
                args.config_path = Some(PathBuf::from(argv.next().ok_or("--config needs a path")?));
            }
            "--set" => {
                args.sets.push(argv.next().ok_or("--set needs KEY=VAL")?);
            }
            "--out" => {
                args.out = Some(PathBuf::from(argv.next().ok_or("--out needs a path")?));
            }
            "--jobs" => {
                let n = argv.next().ok_or("--jobs needs a count")?;
                args.jobs = Some(n.parse().map_err(|_| format!("bad --jobs '{n}'"))?);
            }
            "--no-timestamp" => args.no_timestamp = true,
            "-h" | "--help" => return Err(String::new()),
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok((study, args))
}

fn main() -> ExitCode {
    let (study, args) = match parse_args() {
        Ok(v) => v,
        Err(msg) => {
            if msg.is_empty() {
                println!("{USAGE}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {msg}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    match run(study, &args) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
