//! Small shared helpers: dB conversions, deterministic hashing, windows.

use num_complex::Complex64;

/// 20*log10(|x|), with a -400 dB floor for zero magnitude.
pub fn db(mag: f64) -> f64 {
    if mag <= 0.0 {
        -400.0
    } else {
        20.0 * mag.log10()
    }
}

pub fn db_c(x: Complex64) -> f64 {
    db(x.norm())
}

pub fn from_db(d: f64) -> f64 {
    10f64.powf(d / 20.0)
}

pub fn phase_deg(x: Complex64) -> f64 {
    x.arg().to_degrees()
}

/// Wrap an angle difference into (-180, 180] degrees.
pub fn wrap_deg(d: f64) -> f64 {
    let mut d = d % 360.0;
    if d > 180.0 {
        d -= 360.0;
    }
    if d <= -180.0 {
        d += 360.0;
    }
    d
}

/// FNV-1a 64-bit hash, used for reproducible config fingerprints in CSV
/// headers.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Five-term flat-top window, n in [0, len). Near-flat passband makes tone
/// amplitude estimates insensitive to bin misalignment (error well under
/// 0.05 dB).
pub fn flat_top(n: usize, len: usize) -> f64 {
    const A: [f64; 5] = [
        0.21557895,
        -0.41663158,
        0.277263158,
        -0.083578947,
        0.006947368,
    ];
    let x = std::f64::consts::TAU * n as f64 / len as f64;
    A[0] + A[1] * x.cos() + A[2] * (2.0 * x).cos() + A[3] * (3.0 * x).cos() + A[4] * (4.0 * x).cos()
}

/// Deterministic float formatting for CSV output.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{:.9e}", x)
    }
}

/// Golden-section search for the maximum of a unimodal function on [a, b].
/// Returns (argmax, max). `tol` is absolute in x.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a, b);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Parses a numeric value with an optional unit word and engineering prefix:
/// "2pF" -> 2e-12, "500MHz" -> 5e8, "0.125" -> 0.125, "-40" -> -40.
pub fn parse_value(s: &str) -> crate::error::Result<f64> {
    let bad = || crate::error::Error::Config {
        line: 0,
        msg: format!("cannot parse numeric value '{s}'"),
    };
    let mut t = s.trim().to_string();
    // strip a trailing unit word (longest first so "Hz" wins over "z")
    for unit in [
        "ohms", "ohm", "Hz", "hz", "dBV", "dbv", "dB", "db", "F", "f", "S", "V", "A", "s",
    ] {
        if t.len() > unit.len() && t.ends_with(unit) {
            // only strip when what remains ends in a digit or prefix char
            let rest = &t[..t.len() - unit.len()];
            let last = rest.chars().last().unwrap_or(' ');
            if last.is_ascii_digit() || "fpnumkMGT.".contains(last) {
                t = rest.to_string();
                break;
            }
        }
    }
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (num, mult) = match t.chars().last() {
        Some('f') => (&t[..t.len() - 1], 1e-15),
        Some('p') => (&t[..t.len() - 1], 1e-12),
        Some('n') => (&t[..t.len() - 1], 1e-9),
        Some('u') => (&t[..t.len() - 1], 1e-6),
        Some('m') => (&t[..t.len() - 1], 1e-3),
        Some('k') => (&t[..t.len() - 1], 1e3),
        Some('M') => (&t[..t.len() - 1], 1e6),
        Some('G') => (&t[..t.len() - 1], 1e9),
        Some('T') => (&t[..t.len() - 1], 1e12),
        _ => return Err(bad()),
    };
    num.trim()
        .parse::<f64>()
        .map(|v| v * mult)
        .map_err(|_| bad())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_roundtrip() {
        assert!((db(from_db(-37.5)) + 37.5).abs() < 1e-12);
        assert_eq!(db(0.0), -400.0);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| 3.0 - (x - 1.25) * (x - 1.25), -4.0, 4.0, 1e-9);
        assert!((x - 1.25).abs() < 1e-7);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a64(b"npath"), fnv1a64(b"npath"));
        assert_ne!(fnv1a64(b"npath"), fnv1a64(b"npath "));
    }
}
