//! Conversions between direct-form LPC coefficients and line spectral
//! frequencies for a 10th-order filter.
//!
//! `lpc_to_lsf` locates the roots of the symmetric/antisymmetric split
//! polynomials on the unit circle by coarse grid search plus bisection in
//! the cosine domain, following the classic approach used in sinusoidal
//! coders. `lsf_to_lpc` rebuilds the prediction polynomial from cascaded
//! second-order sections.

use super::LSF_MIN_SEP;

pub const ORDER: usize = 10;

/// Evaluates sum_k c[k] * T_k(x) with the Chebyshev recurrence.
fn cheb_eval(c: &[f64; ORDER / 2 + 1], x: f64) -> f64 {
    let mut b0 = 0.0;
    let mut b1 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b2 = b1;
        b1 = b0;
        b0 = 2.0 * x * b1 - b2 + ck;
    }
    x * b0 - b1 + c[0]
}

/// Builds the Chebyshev coefficients of the two split polynomials from the
/// prediction coefficients `a[1..=10]` of A(z) = 1 + a1 z^-1 + ... .
fn split_polynomials(a: &[f64; ORDER + 1]) -> ([f64; ORDER / 2 + 1], [f64; ORDER / 2 + 1]) {
    let m = ORDER / 2;
    // P'(z) = [A(z) + z^-(p+1) A(z^-1)] / (1 + z^-1), symmetric, degree 10.
    // Q'(z) = [A(z) - z^-(p+1) A(z^-1)] / (1 - z^-1), symmetric, degree 10.
    let mut p = [0.0f64; ORDER / 2 + 1];
    let mut q = [0.0f64; ORDER / 2 + 1];
    p[0] = 1.0;
    q[0] = 1.0;
    for i in 1..=m {
        p[i] = a[i] + a[ORDER + 1 - i] - p[i - 1];
        q[i] = a[i] - a[ORDER + 1 - i] + q[i - 1];
    }
    // On the unit circle P'(e^jw) = e^{-j5w} [p5 + 2 sum_k p_{5-k} cos(kw)],
    // so the real zero-locator in x = cos w has c[0] = p[m], c[k] = 2 p[m-k].
    let mut pc = [0.0f64; ORDER / 2 + 1];
    let mut qc = [0.0f64; ORDER / 2 + 1];
    pc[0] = p[m];
    qc[0] = q[m];
    for k in 1..=m {
        pc[k] = 2.0 * p[m - k];
        qc[k] = 2.0 * q[m - k];
    }
    (pc, qc)
}

/// Converts prediction coefficients `a[1..=10]` (with `a[0] == 1`) to ten
/// strictly increasing line spectral frequencies in (0, pi). Returns `None`
/// when fewer than ten interlaced roots are found (grossly unstable input).
pub fn lpc_to_lsf(a: &[f64; ORDER + 1]) -> Option<[f64; ORDER]> {
    let (pc, qc) = split_polynomials(a);
    const GRID: usize = 512;
    let mut roots = [0.0f64; ORDER];
    let mut found = 0usize;
    let mut x_left = 1.0f64;
    let mut f_left = cheb_eval(&pc, x_left);
    // Roots of P' and Q' interlace; scan x = cos(w) from 1 toward -1 and
    // alternate which polynomial we bracket.
    let mut use_p = true;
    for step in 1..=GRID {
        let x_right = 1.0 - 2.0 * step as f64 / GRID as f64;
        let poly = if use_p { &pc } else { &qc };
        let f_right = cheb_eval(poly, x_right);
        if f_left * f_right <= 0.0 {
            // Bisect to near machine precision.
            let (mut lo, mut hi, mut f_lo) = (x_left, x_right, f_left);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let f_mid = cheb_eval(poly, mid);
                if f_lo * f_mid <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    f_lo = f_mid;
                }
            }
            let x_root = 0.5 * (lo + hi);
            roots[found] = x_root.clamp(-1.0, 1.0).acos();
            found += 1;
            if found == ORDER {
                break;
            }
            use_p = !use_p;
            x_left = x_root;
            f_left = cheb_eval(if use_p { &pc } else { &qc }, x_left);
        } else {
            x_left = x_right;
            f_left = f_right;
        }
    }
    if found == ORDER {
        Some(roots)
    } else {
        None
    }
}

/// Rebuilds prediction coefficients from line spectral frequencies.
/// Even-indexed frequencies belong to the symmetric polynomial, odd to the
/// antisymmetric one.
pub fn lsf_to_lpc(lsf: &[f64; ORDER]) -> [f64; ORDER + 1] {
    // P(z) = (1 + z^-1) prod_{even i} (1 - 2 cos w_i z^-1 + z^-2)
    // Q(z) = (1 - z^-1) prod_{odd i}  (1 - 2 cos w_i z^-1 + z^-2)
    let mut p = vec![0.0f64; ORDER + 2];
    let mut q = vec![0.0f64; ORDER + 2];
    p[0] = 1.0;
    p[1] = 1.0;
    q[0] = 1.0;
    q[1] = -1.0;
    let mut p_len = 2;
    let mut q_len = 2;
    for i in (0..ORDER).step_by(2) {
        mul_in_place(&mut p, &mut p_len, -2.0 * lsf[i].cos());
    }
    for i in (1..ORDER).step_by(2) {
        mul_in_place(&mut q, &mut q_len, -2.0 * lsf[i].cos());
    }
    debug_assert_eq!(p_len, ORDER + 2);
    debug_assert_eq!(q_len, ORDER + 2);
    let mut a = [0.0f64; ORDER + 1];
    for (k, ak) in a.iter_mut().enumerate() {
        *ak = 0.5 * (p[k] + q[k]);
    }
    a
}

/// Multiplies the polynomial in `buf[..len]` by (1 + c z^-1 + z^-2).
fn mul_in_place(buf: &mut [f64], len: &mut usize, c: f64) {
    let old = buf[..*len].to_vec();
    for v in buf[..*len + 2].iter_mut() {
        *v = 0.0;
    }
    for (k, &ov) in old.iter().enumerate() {
        buf[k] += ov;
        buf[k + 1] += c * ov;
        buf[k + 2] += ov;
    }
    *len += 2;
}

/// Forces strict ordering with at least [`LSF_MIN_SEP`] separation, keeping
/// all values inside (0, pi).
pub fn enforce_monotonic(lsf: &mut [f64; ORDER]) {
    let lo = LSF_MIN_SEP;
    let hi = std::f64::consts::PI - LSF_MIN_SEP;
    let mut prev = lo - LSF_MIN_SEP;
    for w in lsf.iter_mut() {
        if *w < prev + LSF_MIN_SEP {
            *w = prev + LSF_MIN_SEP;
        }
        prev = *w;
    }
    // If the forward pass pushed the tail past pi, sweep back down.
    if lsf[ORDER - 1] > hi {
        lsf[ORDER - 1] = hi;
        for i in (0..ORDER - 1).rev() {
            if lsf[i] > lsf[i + 1] - LSF_MIN_SEP {
                lsf[i] = lsf[i + 1] - LSF_MIN_SEP;
            }
        }
    }
}
