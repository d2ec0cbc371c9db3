//! Small integer arithmetic modulo `Z`: gcd, inverses and linear congruences.

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Returns `(g, s, t)` with `s*a + t*b = g = gcd(a, b)`.
pub fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i64, 0i64);
    let (mut old_t, mut t) = (0i64, 1i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    (old_r, old_s, old_t)
}

/// Canonical representative of `v` in `[0, m)`.
pub fn reduce(v: i64, m: u64) -> u64 {
    v.rem_euclid(m as i64) as u64
}

/// Inverse of `a` modulo `m`, if it exists. `m = 1` yields `Some(0)`.
pub fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (g, s, _) = extended_gcd((a % m) as i64, m as i64);
    (g == 1).then(|| reduce(s, m))
}

pub fn is_unit(a: u64, m: u64) -> bool {
    gcd(a % m, m) == 1
}

/// Residues coprime to `m`, ascending.
pub fn units(m: u32) -> Vec<u32> {
    (0..m).filter(|&a| is_unit(a as u64, m as u64)).collect()
}

/// All `x` in `[0, m)` with `a*x ≡ b (mod m)`, ascending.
///
/// With `g = gcd(a, m)` (taking `g = m` when `a ≡ 0`) there are exactly `g`
/// solutions when `g | b`, otherwise none.
pub fn solve_linear_congruence(a: u64, b: u64, m: u64) -> Vec<u64> {
    let a = a % m;
    let b = b % m;
    let g = gcd(a, m);
    if !b.is_multiple_of(g) {
        return Vec::new();
    }
    let step = m / g;
    let inv = mod_inverse(a / g, step).expect("a/g is a unit modulo m/g");
    let base = ((b / g) as u128 * inv as u128 % step as u128) as u64;
    (0..g).map(|t| base + t * step).collect()
}
