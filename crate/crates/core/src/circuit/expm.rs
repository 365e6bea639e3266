//! Dense matrix exponential (Pade order 13 with scaling and squaring) and the
//! phi1 integral used by the segment Fourier extraction.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Pade-13 numerator/denominator coefficients for exp.
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// e^A by the order-13 Pade approximant with scaling and squaring.
/// Returns the exponential and the number of squarings applied (useful as a
/// stiffness indicator).
pub fn expm_scaled(a: &DMatrix<f64>) -> (DMatrix<f64>, u32) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let theta13 = 5.371920351148152;
    let norm = one_norm(a);
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let a1 = a * (0.5f64).powi(s as i32);

    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    // u = A * (A6*(b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let w1 = &a6 * (B13[13] * &a6 + B13[11] * &a4 + B13[9] * &a2);
    let w2 = B13[7] * &a6 + B13[5] * &a4 + B13[3] * &a2 + B13[1] * &ident;
    let u = &a1 * (w1 + w2);
    // v = A6*(b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let z1 = &a6 * (B13[12] * &a6 + B13[10] * &a4 + B13[8] * &a2);
    let v = z1 + B13[6] * &a6 + B13[4] * &a4 + B13[2] * &a2 + B13[0] * &ident;

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("pade denominator must be invertible");
    for _ in 0..s {
        r = &r * &r;
    }
    (r, s)
}

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    expm_scaled(a).0
}

fn one_norm_c(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// phi1(M, h) = integral_0^h e^(M s) ds, computed by a scaled Taylor series
/// followed by the doubling identity phi1(2h) = phi1(h) + e^(M h) phi1(h).
/// Valid for singular M, which the solve-based route cannot handle.
pub fn phi1_complex(m: &DMatrix<Complex64>, h: f64) -> DMatrix<Complex64> {
    let n = m.nrows();
    let ident = DMatrix::<Complex64>::identity(n, n);
    let norm = one_norm_c(m) * h.abs();
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let hs = h / 2f64.powi(s as i32);

    // phi1(hs) = hs * sum_k (M hs)^k / (k+1)!
    let mhs = m * Complex64::new(hs, 0.0);
    let mut term = ident.clone();
    let mut sum = ident.clone();
    for k in 1..30 {
        term = (&term * &mhs) / Complex64::new((k + 1) as f64, 0.0);
        sum += &term;
        if one_norm_c(&term) < 1e-18 {
            break;
        }
    }
    let mut phi = sum * Complex64::new(hs, 0.0);
    // e^(M hs) = I + M*phi1(hs)
    let mut e = &ident + m * &phi;
    for _ in 0..s {
        phi = &phi + &e * &phi;
        e = &e * &e;
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_exponential() {
        let a = DMatrix::from_element(1, 1, -3.0);
        let e = expm(&a);
        assert!((e[(0, 0)] - (-3.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let a = DMatrix::<f64>::zeros(4, 4);
        let e = expm(&a);
        assert!((e - DMatrix::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn rotation_block() {
        // exp([[0,-w],[w,0]] t) = rotation by w t
        let w = 3.5;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] - w.cos()).abs() < 1e-12);
        assert!((e[(1, 0)] - w.sin()).abs() < 1e-12);
    }

    #[test]
    fn large_norm_requires_scaling_and_matches_semigroup() {
        let a = DMatrix::from_row_slice(2, 2, &[-8.0, 2.0, 0.5, -9.0]);
        let (e1, s) = expm_scaled(&a);
        assert!(s > 0);
        let half = expm(&(&a * 0.5));
        let diff = (&half * &half - &e1).norm();
        assert!(diff / e1.norm() < 1e-12);
    }

    #[test]
    fn phi1_satisfies_exponential_identity() {
        let m = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.0, -5.0])
            .map(|x| Complex64::new(x, 0.3 * x));
        let h = 0.7;
        let phi = phi1_complex(&m, h);
        // I + M*phi1(M,h) must equal e^{M h}; compute the reference through
        // the real 2n x 2n embedding [[Re,-Im],[Im,Re]] and the real expm.
        let n = 2;
        let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                big[(i, j)] = (m[(i, j)] * h).re;
                big[(i, j + n)] = -(m[(i, j)] * h).im;
                big[(i + n, j)] = (m[(i, j)] * h).im;
                big[(i + n, j + n)] = (m[(i, j)] * h).re;
            }
        }
        let eb = expm(&big);
        let mut e_ref = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                e_ref[(i, j)] = Complex64::new(eb[(i, j)], eb[(i + n, j)]);
            }
        }
        let lhs = &m * &phi + DMatrix::<Complex64>::identity(n, n);
        assert!((lhs - e_ref).norm() < 1e-12);
    }

    #[test]
    fn phi1_handles_singular_matrix() {
        // M = 0: phi1 = h * I
        let m = DMatrix::<Complex64>::zeros(3, 3);
        let phi = phi1_complex(&m, 2.5);
        assert!(
            (phi - DMatrix::<Complex64>::identity(3, 3) * Complex64::new(2.5, 0.0)).norm() < 1e-14
        );
    }
}
