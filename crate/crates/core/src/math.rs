//! Small numerical routines shared across the crate.

/// Bessel functions of the first kind, `J_0(x) ..= J_{k_max}(x)`, for `x >= 0`.
///
/// Uses Miller's backward recurrence normalized by the identity
/// `J_0(x) + 2 * sum_{m>=1} J_{2m}(x) = 1`, which is stable for every order
/// (the upward recurrence diverges once the order exceeds the argument).
pub fn bessel_j_table(k_max: usize, x: f64) -> Vec<f64> {
    assert!(
        x.is_finite() && x >= 0.0,
        "bessel_j_table requires a finite nonnegative argument"
    );
    let mut out = vec![0.0_f64; k_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }

    let start = k_max.max(x.ceil() as usize) + 24 + (2.0 * x.sqrt()).ceil() as usize;
    let mut j_hi = 0.0_f64; // J_{m+1}
    let mut j_cur = 1e-280_f64; // J_m, arbitrary tiny seed
    let mut norm = 0.0_f64;

    if start % 2 == 0 {
        norm += 2.0 * j_cur;
    }
    let mut m = start;
    while m >= 1 {
        let j_lo = (2.0 * m as f64 / x) * j_cur - j_hi; // J_{m-1}
        j_hi = j_cur;
        j_cur = j_lo;
        m -= 1;

        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_hi *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
        if m <= k_max {
            out[m] = j_cur;
        }
        if m == 0 {
            norm += j_cur;
        } else if m % 2 == 0 {
            norm += 2.0 * j_cur;
        }
    }

    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// `J_k(x)` for any integer order, using `J_{-k}(x) = (-1)^k J_k(x)`.
pub fn bessel_j(k: i32, x: f64) -> f64 {
    let a = k.unsigned_abs() as usize;
    let v = bessel_j_table(a, x)[a];
    if k < 0 && k % 2 != 0 {
        -v
    } else {
        v
    }
}

/// Sideband weight outside `|k| <= half_width` for modulation index `mu`:
/// `1 - sum_{|k| <= w} J_k(mu)^2`, clamped at zero.
pub fn sideband_tail_weight(half_width: usize, mu: f64) -> f64 {
    let table = bessel_j_table(half_width, mu);
    let mut kept = table[0] * table[0];
    for v in &table[1..] {
        kept += 2.0 * v * v;
    }
    (1.0 - kept).max(0.0)
}

/// Binary entropy `h2(p) = -p log2 p - (1-p) log2 (1-p)`, zero at the endpoints.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}
