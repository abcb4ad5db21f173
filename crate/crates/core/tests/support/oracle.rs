use gestibot_core::Vec3;

/// Root of a monotone `f` on `[lo, hi]` with a sign change, by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First boundary distance along unit `d` from an interior point, found
/// without the quadratic: the distance to the origin falls until `k*` and
/// rises after it, so each sphere crossing is bracketed by a monotone piece.
pub fn oracle_exit(o: Vec3, d: Vec3, r_int: f64, r_ext: f64) -> (f64, f64) {
    let dist = |k: f64| (o + d * k).norm();
    let k_star = -o.dot(d);
    if k_star > 0.0 && dist(k_star) < r_int {
        return (bisect(|k| dist(k) - r_int, 0.0, k_star), r_int);
    }
    let start = k_star.max(0.0);
    (bisect(|k| dist(k) - r_ext, start, start + 4.0 * r_ext), r_ext)
}

/// Unit vector from an azimuth and a height on the unit sphere.
pub fn unit(theta: f64, z: f64) -> Vec3 {
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * theta.cos(), s * theta.sin(), z)
}
