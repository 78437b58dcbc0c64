//! Liquid retained by a tilted open cylinder whose free surface passes through
//! the lowest rim point.

use std::f64::consts::PI;

use crate::container::ContainerSpec;
use crate::error::{Error, Result};

fn check_angle(theta_deg: f64) -> Result<()> {
    if !(0.0..90.0).contains(&theta_deg) {
        return Err(Error::Domain(format!(
            "tilt angle must lie in [0, 90) degrees, got {theta_deg}"
        )));
    }
    Ok(())
}

/// Closed-form retained volume in mL.
///
/// While the free surface cuts the side wall all the way round (2R·tanθ ≤ H) the
/// retained liquid is a truncated cylinder of mean height H − R·tanθ. Past that
/// the surface cuts the base and the liquid is a cylindrical wedge; with the
/// chord at x = R·cos φ the wedge volume is R³·tanθ·(sin φ − sin³φ/3 − φ·cos φ).
pub fn max_retained_volume(container: &ContainerSpec, theta_deg: f64) -> Result<f64> {
    check_angle(theta_deg)?;
    let r = container.radius_mm();
    let h = container.height_mm;
    let tan = theta_deg.to_radians().tan();
    let mm3 = if 2.0 * r * tan <= h {
        PI * r * r * (h - r * tan)
    } else {
        // wetted base extends from the chord at x = a to the lip at x = R
        let a = r - h / tan;
        let phi = (a / r).clamp(-1.0, 1.0).acos();
        let (s, c) = phi.sin_cos();
        r * r * r * tan * (s - s * s * s / 3.0 - phi * c)
    };
    Ok(mm3.max(0.0) / 1000.0)
}

/// Brute-force retained volume: the base disk is cut into `resolution` slabs
/// parallel to the tilt axis, and each slab holds liquid up to the free surface
/// clipped to [0, H].
pub fn oracle_max_retained_volume(
    container: &ContainerSpec,
    theta_deg: f64,
    resolution: usize,
) -> Result<f64> {
    check_angle(theta_deg)?;
    if resolution < 100 {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least 100 slices, got {resolution}"
        )));
    }
    let r = container.radius_mm();
    let h = container.height_mm;
    let tan = theta_deg.to_radians().tan();
    let dx = 2.0 * r / resolution as f64;
    let mut mm3 = 0.0;
    for k in 0..resolution {
        let x0 = -r + k as f64 * dx;
        let x1 = x0 + dx;
        // exact slab area between x0 and x1 of the circle
        let area = segment_area(r, x1) - segment_area(r, x0);
        let xm = 0.5 * (x0 + x1);
        let surface = (h - (r - xm) * tan).clamp(0.0, h);
        mm3 += area * surface;
    }
    Ok(mm3 / 1000.0)
}

/// Area of the disk of radius r to the left of the line x = const.
fn segment_area(r: f64, x: f64) -> f64 {
    let x = x.clamp(-r, r);
    x * (r * r - x * x).sqrt() + r * r * (x / r).asin() + 0.5 * PI * r * r
}

/// Smallest angle at which a container holding `volume_ml` starts to pour.
pub fn critical_angle_deg(container: &ContainerSpec, volume_ml: f64) -> f64 {
    if volume_ml >= container.capacity_ml() {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 89.999_f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if max_retained_volume(container, mid).unwrap_or(0.0) > volume_ml {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference() -> ContainerSpec {
        ContainerSpec::new("ref", 100.0, 60.0).unwrap()
    }

    #[test]
    fn full_capacity_at_zero_tilt() {
        let v = max_retained_volume(&reference(), 0.0).unwrap();
        assert!((v - 282.743).abs() < 0.01, "{v}");
    }

    #[test]
    fn thirty_degrees_on_reference() {
        let c = reference();
        let v = max_retained_volume(&c, 30.0).unwrap();
        let by_hand = PI * 900.0 * (100.0 - 30.0 * 30f64.to_radians().tan()) / 1000.0;
        assert!((v - by_hand).abs() < 1e-9);
        assert!((v - 233.77).abs() < 0.01, "{v}");
        let oracle = oracle_max_retained_volume(&c, 30.0, 4000).unwrap();
        assert!((v - oracle).abs() / v < 0.005);
    }

    #[test]
    fn nearly_horizontal_empties() {
        for (h, d) in [(100.0, 60.0), (280.0, 45.0), (80.0, 120.0)] {
            let c = ContainerSpec::new("c", h, d).unwrap();
            assert!(max_retained_volume(&c, 89.9).unwrap() < 1.0);
        }
    }

    #[test]
    fn regimes_meet_continuously() {
        let c = reference();
        // 2R tanθ = H
        let theta = (100.0f64 / 60.0).atan().to_degrees();
        let below = max_retained_volume(&c, theta - 1e-9).unwrap();
        let above = max_retained_volume(&c, theta + 1e-9).unwrap();
        assert!((below - above).abs() < 1e-6);
        assert!((below - PI * 27000.0 * (100.0 / 60.0) / 1000.0).abs() < 1e-6);
    }

    #[test]
    fn angle_domain_enforced() {
        let c = reference();
        assert!(matches!(max_retained_volume(&c, -1.0), Err(Error::Domain(_))));
        assert!(matches!(max_retained_volume(&c, 90.0), Err(Error::Domain(_))));
        assert!(oracle_max_retained_volume(&c, 10.0, 50).is_err());
    }

    #[test]
    fn critical_angle_reference_fill() {
        let theta = critical_angle_deg(&reference(), 200.0);
        let expected = ((282.743_338_823 - 200.0) / (PI * 27.0)).atan().to_degrees();
        assert!((theta - expected).abs() < 1e-6);
        assert!((theta - 44.3).abs() < 0.05, "{theta}");
    }

    #[test]
    fn closed_form_matches_slicing_oracle_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let c = ContainerSpec::new(
                "rand",
                rng.random_range(50.0..300.0),
                rng.random_range(30.0..150.0),
            )
            .unwrap();
            let mut prev = f64::INFINITY;
            for step in 0..18 {
                let theta = step as f64 * 5.0;
                let v = max_retained_volume(&c, theta).unwrap();
                let o = oracle_max_retained_volume(&c, theta, 2000).unwrap();
                assert!((v - o).abs() <= 0.005 * o, "{c:?} θ={theta}: {v} vs {o}");
                assert!(o <= prev + 1e-9);
                prev = o;
            }
            let cap = c.capacity_ml();
            let o = oracle_max_retained_volume(&c, 0.0, 2000).unwrap();
            assert!((o - cap).abs() < 0.001 * cap);
        }
    }
}
