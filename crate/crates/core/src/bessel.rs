//! Integer-order Bessel functions of real argument.
//!
//! `J_n` uses its power series for small arguments and Miller's backward
//! recurrence (normalized by `J_0 + 2 Σ J_2k = 1`) above that. `K_0` and
//! `K_1` use the logarithmic series for `x <= 2` and Steed's continued
//! fraction otherwise; higher orders follow from the upward recurrence,
//! which is stable for `K`.

use std::sync::OnceLock;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT_J: f64 = 8.0;

/// Bessel function of the first kind `J_n(x)` for integer `n`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let v = bessel_j(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    let n = n as u32;
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_LIMIT_J {
        j_series(n, x)
    } else {
        j_miller(n, x)
    }
}

fn j_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn j_miller(n: u32, x: f64) -> f64 {
    let top = (n as f64).max(x);
    let mut start = (top + 30.0 + (50.0 * top).sqrt()) as u32;
    if start % 2 == 1 {
        start += 1;
    }
    let mut next = 0.0_f64;
    let mut cur = 1e-300_f64;
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let idx = k - 1;
        if idx == n {
            wanted = cur;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += cur;
    wanted / norm
}

/// `(K_0(x), K_1(x))` for `x > 0`.
pub fn bessel_k01(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x <= 2.0 {
        k01_series(x)
    } else {
        k01_steed(x)
    }
}

fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_half = (0.5 * x).ln();
    // t0 = q^k / (k!)^2, t1 = q^k / (k! (k+1)!)
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut i1_sum = 1.0;
    let mut k0_sum = 0.0;
    let mut k1_sum = -2.0 * EULER_GAMMA + 1.0;
    for k in 1..100 {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        let next_harmonic = harmonic + 1.0 / (kf + 1.0);
        i0 += t0;
        i1_sum += t1;
        k0_sum += harmonic * t0;
        k1_sum += (-2.0 * EULER_GAMMA + harmonic + next_harmonic) * t1;
        if t0 < 1e-18 * i0 && t1 < 1e-18 * i1_sum {
            break;
        }
    }
    let i1 = 0.5 * x * i1_sum;
    let k0 = -(log_half + EULER_GAMMA) * i0 + k0_sum;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * k1_sum;
    (k0, k1)
}

fn k01_steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// Modified Bessel function of the second kind `K_n(x)` for integer `n`, `x > 0`.
pub fn bessel_k(n: i32, x: f64) -> f64 {
    let n = n.unsigned_abs();
    let (k0, k1) = bessel_k01(x);
    match n {
        0 => k0,
        1 => k1,
        _ => {
            let (mut prev, mut cur) = (k0, k1);
            for j in 1..n {
                let next = prev + 2.0 * j as f64 / x * cur;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `(K_{n-1}(x), K_n(x))`, with `K_{-1} = K_1`.
pub fn bessel_k_pair(n: u32, x: f64) -> (f64, f64) {
    let (k0, k1) = bessel_k01(x);
    match n {
        0 => (k1, k0),
        1 => (k0, k1),
        _ => {
            let (mut prev, mut cur) = (k0, k1);
            for j in 1..n {
                let next = prev + 2.0 * j as f64 / x * cur;
                prev = cur;
                cur = next;
            }
            (prev, cur)
        }
    }
}

pub fn bessel_j_derivative(n: i32, x: f64) -> f64 {
    0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
}

pub fn bessel_k_derivative(n: i32, x: f64) -> f64 {
    -0.5 * (bessel_k(n - 1, x) + bessel_k(n + 1, x))
}

const ZERO_TABLE_ORDERS: usize = 16;
const ZERO_TABLE_COUNT: usize = 12;

fn zero_table() -> &'static Vec<Vec<f64>> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..ZERO_TABLE_ORDERS as u32)
            .map(|n| find_j_zeros(n, ZERO_TABLE_COUNT))
            .collect()
    })
}

fn find_j_zeros(n: u32, count: usize) -> Vec<f64> {
    let f = |x: f64| bessel_j(n as i32, x);
    let mut zeros = Vec::with_capacity(count);
    let step = 0.05;
    let mut a = if n == 0 { step } else { n as f64 };
    let mut fa = f(a);
    while zeros.len() < count {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    zeros
}

/// The `m`-th positive zero (`m >= 1`) of `J_n`.
pub fn bessel_j_zero(n: u32, m: u32) -> f64 {
    assert!(m >= 1, "zero index is 1-based");
    let (ni, mi) = (n as usize, m as usize - 1);
    if ni < ZERO_TABLE_ORDERS && mi < ZERO_TABLE_COUNT {
        zero_table()[ni][mi]
    } else {
        find_j_zeros(n, m as usize)[mi]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const J_REF: &[(i32, f64, f64)] = &[
        (0, 0.5, 0.938469807240813),
        (0, 1.0, 0.7651976865579666),
        (1, 1.0, 0.44005058574493355),
        (2, 3.0, 0.4860912605858912),
        (0, 7.9, 0.19436184484127808),
        (1, 8.5, 0.2731219636740538),
        (3, 10.0, 0.05837937930518667),
        (0, 25.0, 0.09626678327595811),
        (5, 2.0, 0.007039629755871686),
        (1, 0.001, 0.0004999999375000028),
    ];

    const K_REF: &[(i32, f64, f64)] = &[
        (0, 0.1, 2.427069024702017),
        (0, 1.0, 0.42102443824070834),
        (1, 1.0, 0.6019072301972346),
        (0, 2.0, 0.11389387274953341),
        (1, 2.0, 0.13986588181652246),
        (0, 2.5, 0.062347553200366196),
        (1, 3.0, 0.040156431128194184),
        (2, 2.0, 0.2537597545660559),
        (3, 5.0, 0.008291768415230931),
        (0, 15.0, 9.819536482396433e-08),
        (1, 0.01, 99.97389411829624),
    ];

    #[test]
    fn j_matches_reference_values() {
        for &(n, x, want) in J_REF {
            let got = bessel_j(n, x);
            assert!(
                (got - want).abs() < 1e-13 * want.abs().max(1e-3),
                "J_{n}({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn k_matches_reference_values() {
        for &(n, x, want) in K_REF {
            let got = bessel_k(n, x);
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "K_{n}({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn series_and_recurrence_agree_at_switch_point() {
        for n in 0..4 {
            let a = j_series(n, SERIES_LIMIT_J);
            let b = j_miller(n, SERIES_LIMIT_J);
            assert!((a - b).abs() < 1e-13, "n={n}: {a} vs {b}");
        }
        let (s0, s1) = k01_series(2.0);
        let (c0, c1) = k01_steed(2.0);
        assert!(((s0 - c0) / c0).abs() < 1e-14);
        assert!(((s1 - c1) / c1).abs() < 1e-14);
    }

    #[test]
    fn negative_orders() {
        assert_eq!(bessel_j(-1, 1.3), -bessel_j(1, 1.3));
        assert_eq!(bessel_j(-2, 1.3), bessel_j(2, 1.3));
        assert_eq!(bessel_k(-1, 1.3), bessel_k(1, 1.3));
        let (km1, k0) = bessel_k_pair(0, 0.7);
        assert_eq!(km1, bessel_k(1, 0.7));
        assert_eq!(k0, bessel_k(0, 0.7));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for n in 0..3 {
            for &x in &[0.3, 1.7, 4.2] {
                let fd = (bessel_j(n, x + h) - bessel_j(n, x - h)) / (2.0 * h);
                assert!((bessel_j_derivative(n, x) - fd).abs() < 1e-8);
                let fd = (bessel_k(n, x + h) - bessel_k(n, x - h)) / (2.0 * h);
                assert!((bessel_k_derivative(n, x) - fd).abs() < 1e-7 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zeros_match_tabulated() {
        let cases = [
            (0, 1, 2.404825557695773),
            (0, 2, 5.520078110286311),
            (0, 3, 8.653727912911013),
            (1, 1, 3.831705970207512),
            (1, 2, 7.015586669815619),
            (2, 1, 5.135622301840683),
            (2, 2, 8.417244140399864),
        ];
        for (n, m, want) in cases {
            assert!((bessel_j_zero(n, m) - want).abs() < 1e-13, "j_{n},{m}");
        }
        assert!(bessel_j(7, bessel_j_zero(20, 1)).is_finite());
    }
}
