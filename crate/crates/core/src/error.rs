//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid duty: duty {duty} with {n_phases} phases does not fit one period")]
    InvalidDuty { duty: f64, n_phases: usize },

    #[error("invalid guard: {guard_s} s consumes the whole {width_s} s phase pulse")]
    InvalidGuard { guard_s: f64, width_s: f64 },

    #[error(
        "pwm synthesis failed: best fundamental suppression {best_db:.2} dB \
         (target {target_db:.2} dB), balance error {balance_db:.2} dB"
    )]
    SynthesisFailure {
        best_db: f64,
        target_db: f64,
        balance_db: f64,
    },

    #[error("singular topology in segment {segment}: {detail}")]
    SingularTopology { segment: usize, detail: String },

    #[error("period mismatch: control waveform at {found_hz} Hz, clocks at {expected_hz} Hz")]
    PeriodMismatch { found_hz: f64, expected_hz: f64 },

    #[error("resonance singularity at f = {f_hz} Hz: periodic solve residual {residual:.3e}")]
    ResonanceSingularity { f_hz: f64, residual: f64 },

    #[error(
        "insufficient settling: relative state delta {delta:.3e} after {periods} periods \
         (need <= {tol:.1e})"
    )]
    InsufficientSettling {
        delta: f64,
        periods: usize,
        tol: f64,
    },

    #[error("no peak: response is monotone over [{lo_hz}, {hi_hz}] Hz")]
    NoPeak { lo_hz: f64, hi_hz: f64 },

    #[error(
        "combiner rotation {rotation} does not null the fundamental (|W1/W3| = {ratio_db:.1} dB)"
    )]
    InvalidRotation { rotation: usize, ratio_db: f64 },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("netlist error: {0}")]
    Netlist(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("study failed: {0}")]
    Study(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// simulation/runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidInput(_) => 2,
            _ => 3,
        }
    }
}
