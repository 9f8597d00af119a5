//! Closed forms for the Kobayashi metric and distance of the unit ball.

use crate::point::C2;

/// `K(z, X)² = |X|²/(1−|z|²) + |⟨z, X⟩|²/(1−|z|²)²`.
pub fn ball_kobayashi_metric(z: &C2, x: &C2) -> f64 {
    let s = 1.0 - z.norm_sqr();
    (x.norm_sqr() / s + z.hdot(*x).norm_sqr() / (s * s)).sqrt()
}

/// `atanh |φ_z(w)|` with `|φ_z(w)|² = 1 − (1−|z|²)(1−|w|²)/|1−⟨z,w⟩|²`.
pub fn ball_kobayashi_distance(z: &C2, w: &C2) -> f64 {
    let num = (1.0 - z.norm_sqr()) * (1.0 - w.norm_sqr());
    let den = (num_complex::Complex64::new(1.0, 0.0) - z.hdot(*w)).norm_sqr();
    let t = (1.0 - num / den).max(0.0).sqrt();
    t.min(1.0 - 1e-17).atanh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    #[test]
    fn origin_and_radial() {
        let o = C2::ZERO;
        let x = C2::new(C::new(0.3, 0.0), C::new(0.0, 0.4));
        assert!((ball_kobayashi_metric(&o, &x) - 0.5).abs() < 1e-15);
        let w = C2::new(C::new(0.0, 0.0), C::new(0.5, 0.0));
        assert!((ball_kobayashi_distance(&o, &w) - 0.5f64.atanh()).abs() < 1e-15);
    }

    #[test]
    fn metric_integrates_to_distance_along_radius() {
        // ∫_0^a dt/(1−t²) = atanh(a)
        let a = 0.9;
        let n = 20_000;
        let dir = C2::new(C::new(0.0, 0.0), C::new(1.0, 0.0));
        let mut s = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64 * a;
            s += ball_kobayashi_metric(&(dir * t), &dir) * a / n as f64;
        }
        let d = ball_kobayashi_distance(&C2::ZERO, &(dir * a));
        assert!((s - d).abs() < 1e-6);
    }

    #[test]
    fn distance_is_symmetric() {
        let z = C2::new(C::new(0.1, 0.2), C::new(-0.3, 0.5));
        let w = C2::new(C::new(-0.4, 0.1), C::new(0.2, 0.6));
        assert!((ball_kobayashi_distance(&z, &w) - ball_kobayashi_distance(&w, &z)).abs() < 1e-14);
    }
}
