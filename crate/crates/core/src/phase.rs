//! Exact reduction of phases `n·φ mod 2π` for frequencies up to `2^62`.
//!
//! `φ/(2π)` is formed as a 128-bit binary fraction from the exact binary value
//! of `φ` and a 256-bit fixed-point `1/(2π)`; multiplying by `n` is then an
//! exact wrapping product modulo one turn.

/// `floor(2^256 / (2π))`, little-endian 64-bit limbs.
const INV_TWO_PI: [u64; 4] = [
    0x7f94_58ea_f7ae_f158,
    0x36d8_a566_4f10_e410,
    0x7f09_d5f4_7d4d_3770,
    0x28be_60db_9391_054a,
];

/// `2π / 2^128`.
const TURN_UNIT: f64 = std::f64::consts::TAU / 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

/// Fractional part of `φ/(2π)` in units of `2^-128` turns.
pub fn turns(phi: f64) -> u128 {
    if phi == 0.0 || !phi.is_finite() {
        return 0;
    }
    let bits = phi.abs().to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    };
    if exp > 64 {
        // |φ| > 2^116: beyond the table; reduce in floating point.
        let t = phi.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
        return (t * 2f64.powi(128)) as u128;
    }

    // 320-bit product mant * INV_TWO_PI.
    let mut prod = [0u64; 5];
    let mut carry: u128 = 0;
    for (i, &limb) in INV_TWO_PI.iter().enumerate() {
        let p = (mant as u128) * (limb as u128) + carry;
        prod[i] = p as u64;
        carry = p >> 64;
    }
    prod[4] = carry as u64;

    // value * 2^128 = prod * 2^(exp - 128): take bits [shift, shift + 128).
    let shift = (128 - exp) as u64;
    let word = |pos: u64| -> u64 {
        let q = (pos / 64) as usize;
        let off = pos % 64;
        let lo = prod.get(q).copied().unwrap_or(0);
        if off == 0 {
            lo
        } else {
            let hi = prod.get(q + 1).copied().unwrap_or(0);
            (lo >> off) | (hi << (64 - off))
        }
    };
    let t = if shift >= 320 {
        0
    } else {
        (word(shift) as u128) | ((word(shift + 64) as u128) << 64)
    };
    if phi < 0.0 {
        t.wrapping_neg()
    } else {
        t
    }
}

/// Maps a turn fraction to an angle in `(-π, π]`.
pub fn turns_to_angle(t: u128) -> f64 {
    let a = (t as i128) as f64 * TURN_UNIT;
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

/// `n·φ` reduced to `(-π, π]`.
pub fn reduce(n: u64, phi: f64) -> f64 {
    turns_to_angle(turns(phi).wrapping_mul(n as u128))
}

/// `2π·n·j/m` reduced to `(-π, π]`, exactly.
pub fn grid_angle(n: u64, j: u64, m: u64) -> f64 {
    debug_assert!(m > 0);
    let k = ((n % m) as u128 * (j % m) as u128 % m as u128) as u64;
    let k = k as i128 - if 2 * k > m { m as i128 } else { 0 };
    std::f64::consts::TAU * (k as f64 / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_multiple_is_identity() {
        for phi in [0.3, -2.5, 1e-9, 3.0, -PI + 1e-3] {
            assert!((reduce(1, phi) - phi).abs() < 1e-15, "{phi}");
        }
    }

    #[test]
    fn small_multiples_match_float() {
        let phi = 0.123_456_789;
        for n in [2u64, 3, 17, 1000] {
            let expect = (n as f64 * phi + PI).rem_euclid(2.0 * PI) - PI;
            assert!((reduce(n, phi) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn half_turn_maps_to_pi() {
        assert_eq!(turns_to_angle(1u128 << 127), PI);
        assert_eq!(grid_angle(1, 2, 4), PI);
        assert_eq!(grid_angle(3, 1, 4), -PI / 2.0);
        assert_eq!(grid_angle(1 << 62, 5, 7), grid_angle((1u64 << 62) % 7, 5, 7));
    }
}
