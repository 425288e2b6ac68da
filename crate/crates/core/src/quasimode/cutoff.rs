//! The smooth cutoff `χ`: 1 on `[0, 1]`, 0 on `[2, ∞)`, glued with `e^{-1/s}`.

#[inline]
fn g(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// `χ(|s|)`.
#[inline]
pub fn chi(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        return 1.0;
    }
    if s >= 2.0 {
        return 0.0;
    }
    let a = g(2.0 - s);
    a / (a + g(s - 1.0))
}

/// Bump scaled to width `w`: `χ(|s| / w)`, supported in `|s| < 2w`.
#[inline]
pub fn chi_scaled(s: f64, w: f64) -> f64 {
    chi(s / w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_support() {
        for &s in &[0.0, 0.5, 1.0, -1.0] {
            assert_eq!(chi(s), 1.0);
        }
        for &s in &[2.0, 2.5, -3.0] {
            assert_eq!(chi(s), 0.0);
        }
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = chi(1.0 + k as f64 / 100.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!((chi(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivatives_bounded() {
        // finite-difference derivatives up to third order stay moderate
        let h = 1e-3;
        let mut worst = [0.0f64; 3];
        for k in 0..=2000 {
            let s = 0.9 + 1.2 * k as f64 / 2000.0;
            let d1 = (chi(s + h) - chi(s - h)) / (2.0 * h);
            let d2 = (chi(s + h) - 2.0 * chi(s) + chi(s - h)) / (h * h);
            let d3 = (chi(s + 2.0 * h) - 2.0 * chi(s + h) + 2.0 * chi(s - h) - chi(s - 2.0 * h)) / (2.0 * h * h * h);
            worst[0] = worst[0].max(d1.abs());
            worst[1] = worst[1].max(d2.abs());
            worst[2] = worst[2].max(d3.abs());
        }
        assert!(worst[0] < 3.0 && worst[1] < 20.0 && worst[2] < 200.0, "{:?}", worst);
    }
}
