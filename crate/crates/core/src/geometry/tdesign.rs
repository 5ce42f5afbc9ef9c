//! Embedded spherical designs.
//!
//! Both tables are spherical 9-designs that are symmetric under the antipodal
//! map and the left-right mirror `y → −y`. Neither has points on the
//! horizontal plane, so the upper half of each is exactly half of it. The
//! coordinates were obtained numerically (residual of the degree ≤ 9 moment
//! equations below 1e−14).

use std::sync::OnceLock;

const TDESIGN_56: &str = include_str!("../../data/tdesign_56.txt");
const TDESIGN_60: &str = include_str!("../../data/tdesign_60.txt");

fn parse(text: &str) -> Vec<[f64; 3]> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().expect("embedded table")).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

/// Unit vectors of the embedded design with `points` points.
pub fn table(points: usize) -> Option<&'static [[f64; 3]]> {
    static T56: OnceLock<Vec<[f64; 3]>> = OnceLock::new();
    static T60: OnceLock<Vec<[f64; 3]>> = OnceLock::new();
    match points {
        56 => Some(T56.get_or_init(|| parse(TDESIGN_56))),
        60 => Some(T60.get_or_init(|| parse(TDESIGN_60))),
        _ => None,
    }
}

pub const AVAILABLE: [usize; 2] = [56, 60];

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact sphere average of x^a y^b z^c: zero unless all exponents are even,
    /// otherwise (a−1)!!(b−1)!!(c−1)!! / (a+b+c+1)!!.
    fn sphere_moment(a: u32, b: u32, c: u32) -> f64 {
        if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
            return 0.0;
        }
        let dfact = |n: i64| -> f64 {
            let mut p = 1.0;
            let mut k = n;
            while k > 1 {
                p *= k as f64;
                k -= 2;
            }
            p
        };
        dfact(a as i64 - 1) * dfact(b as i64 - 1) * dfact(c as i64 - 1) / dfact((a + b + c) as i64 + 1)
    }

    #[test]
    fn designs_integrate_monomials_up_to_degree_nine() {
        for n in AVAILABLE {
            let pts = table(n).unwrap();
            assert_eq!(pts.len(), n);
            for p in pts {
                let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                assert!((norm - 1.0).abs() < 1e-14);
            }
            for deg in 1..=9u32 {
                for a in 0..=deg {
                    for b in 0..=(deg - a) {
                        let c = deg - a - b;
                        let mean: f64 = pts
                            .iter()
                            .map(|p| p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                            .sum::<f64>()
                            / n as f64;
                        let want = sphere_moment(a, b, c);
                        assert!((mean - want).abs() < 1e-12, "n={n} x^{a} y^{b} z^{c}: {mean} vs {want}");
                    }
                }
            }
        }
    }

    #[test]
    fn first_moment_vanishes() {
        let pts = table(56).unwrap();
        let s = pts.iter().fold([0.0; 3], |acc, p| [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]]);
        assert!(s.iter().all(|x| x.abs() < 1e-9));
    }
}
