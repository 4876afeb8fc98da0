//! Linear opponent-color transform used as the working ("decorrelated lab") space.
//!
//! `L = (R + G + B) / 3`, `a = (R - G) / 2 + 1/2`, `b = (R + G - 2B) / 4 + 1/2`.
//! The map is affine and invertible, and sends the unit RGB cube into the unit cube.

use crate::scalar::Real;

#[inline]
pub fn rgb_to_lab<T: Real>([r, g, b]: [T; 3]) -> [T; 3] {
    let half = T::lit(0.5);
    [
        (r + g + b) / T::lit(3.0),
        (r - g) * half + half,
        (r + g - b - b) * T::lit(0.25) + half,
    ]
}

#[inline]
pub fn lab_to_rgb<T: Real>([l, a, b]: [T; 3]) -> [T; 3] {
    let half = T::lit(0.5);
    // d = R - G, s = R + G - 2B
    let d = (a - half) * T::lit(2.0);
    let s = (b - half) * T::lit(4.0);
    // 3L = R + G + B ; s = R + G - 2B  =>  B = (3L - s) / 3
    let blue = (T::lit(3.0) * l - s) / T::lit(3.0);
    let rg = T::lit(3.0) * l - blue;
    let red = (rg + d) * half;
    let green = (rg - d) * half;
    [red, green, blue]
}

/// Linear part of [`lab_to_rgb`], for mapping differences between colors.
#[inline]
pub fn lab_delta_to_rgb<T: Real>([l, a, b]: [T; 3]) -> [T; 3] {
    let d = a * T::lit(2.0);
    let s = b * T::lit(4.0);
    let blue = (T::lit(3.0) * l - s) / T::lit(3.0);
    let rg = T::lit(3.0) * l - blue;
    [(rg + d) * T::lit(0.5), (rg - d) * T::lit(0.5), blue]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_within_tolerance(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let back = lab_to_rgb(rgb_to_lab([r, g, b]));
            for (x, y) in back.iter().zip([r, g, b]) {
                prop_assert!((x - y).abs() < 1e-4);
            }
        }

        #[test]
        fn lab_stays_in_unit_cube(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            for v in rgb_to_lab([r, g, b]) {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }

        #[test]
        fn delta_map_is_linear_part(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0,
                                    dr in -0.2f64..0.2, dg in -0.2f64..0.2, db in -0.2f64..0.2) {
            let p = rgb_to_lab([r, g, b]);
            let q = rgb_to_lab([r + dr, g + dg, b + db]);
            let d = lab_delta_to_rgb([q[0] - p[0], q[1] - p[1], q[2] - p[2]]);
            for (x, y) in d.iter().zip([dr, dg, db]) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn f32_round_trip() {
        let c = [0.8f32, 0.2, 0.25];
        let back = lab_to_rgb(rgb_to_lab(c));
        for (x, y) in back.iter().zip(c) {
            assert!((x - y).abs() < 1e-4);
        }
    }
}
