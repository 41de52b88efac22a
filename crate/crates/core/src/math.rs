//! Small float helpers that `core` does not provide.

/// `x^n` for a small nonnegative integer exponent, with `x^0 = 1`.
#[inline]
pub(crate) fn powu(x: f64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => {
            let mut acc = 1.0;
            let mut base = x;
            let mut e = n;
            while e > 0 {
                if e & 1 == 1 {
                    acc *= base;
                }
                base *= base;
                e >>= 1;
            }
            acc
        }
    }
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powu_matches_repeated_product() {
        for n in 0..8 {
            let mut expected = 1.0;
            for _ in 0..n {
                expected *= 1.3;
            }
            assert!((powu(1.3, n) - expected).abs() < 1e-12);
        }
        assert_eq!(powu(0.0, 0), 1.0);
        assert_eq!(powu(0.0, 3), 0.0);
    }
}
