//! Real spherical harmonics in ACN channel order.

use serde::{Deserialize, Serialize};

use crate::geometry::Direction;
use crate::real::Real;

pub const MAX_ORDER: usize = 9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Schmidt semi-normalized (AmbiX).
    #[default]
    Sn3d,
    /// Orthonormal over the sphere up to a 4π factor; `N3D = SN3D · √(2n + 1)`.
    N3d,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrdering {
    #[default]
    Acn,
}

#[inline]
pub fn channel_count(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// ACN index of degree `n`, index `m ∈ [−n, n]`.
#[inline]
pub fn acn(n: usize, m: isize) -> usize {
    debug_assert!(m.unsigned_abs() <= n);
    ((n * (n + 1)) as isize + m) as usize
}

pub fn channel_labels(order: usize) -> Vec<String> {
    (0..channel_count(order)).map(|k| format!("ACN{k}")).collect()
}

/// Max-rE weight of every degree `0..=order` for three-dimensional
/// decoding: `P_n(cos(137.9° / (order + 1.51)))`.
pub fn max_re_weights(order: usize) -> Vec<f64> {
    let x = (137.9f64 / (order as f64 + 1.51)).to_radians().cos();
    let mut w = Vec::with_capacity(order + 1);
    let (mut prev, mut cur) = (1.0, x);
    w.push(1.0);
    for n in 1..=order {
        w.push(cur);
        let next = ((2 * n + 1) as f64 * x * cur - n as f64 * prev) / (n + 1) as f64;
        prev = cur;
        cur = next;
    }
    w
}

/// Normalization factor of degree `n`, order `|m|`, computed in f64.
fn norm_factor(n: usize, m: usize, normalization: Normalization) -> f64 {
    // (n − m)! / (n + m)! as a running product to stay in range
    let mut ratio = 1.0;
    for k in (n - m + 1)..=(n + m) {
        ratio /= k as f64;
    }
    let delta = if m == 0 { 1.0 } else { 2.0 };
    let sn3d = (delta * ratio).sqrt();
    match normalization {
        Normalization::Sn3d => sn3d,
        Normalization::N3d => sn3d * ((2 * n + 1) as f64).sqrt(),
    }
}

/// Evaluates all `(order + 1)²` real spherical harmonics at `dir`, ACN order,
/// without the Condon-Shortley phase. `Y₀⁰ = 1` under both normalizations.
pub fn sh_row<T: Real>(order: usize, normalization: Normalization, dir: &Direction<T>) -> Vec<T> {
    let mut out = vec![T::zero(); channel_count(order)];
    sh_row_into(order, normalization, dir, &mut out);
    out
}

pub fn sh_row_into<T: Real>(order: usize, normalization: Normalization, dir: &Direction<T>, out: &mut [T]) {
    assert!(out.len() >= channel_count(order));
    let az = dir.azimuth().to_radians();
    let el = dir.elevation().to_radians();
    let x = el.sin();
    let s = el.cos().max(T::zero());

    // associated Legendre P_n^m(x), no Condon-Shortley phase
    let dim = order + 1;
    let mut p = vec![T::zero(); dim * dim];
    let idx = |n: usize, m: usize| n * dim + m;
    p[idx(0, 0)] = T::one();
    for m in 1..=order {
        let f = T::from_usize_lossy(2 * m - 1);
        p[idx(m, m)] = f * s * p[idx(m - 1, m - 1)];
    }
    for m in 0..order {
        p[idx(m + 1, m)] = T::from_usize_lossy(2 * m + 1) * x * p[idx(m, m)];
    }
    for m in 0..=order {
        for n in (m + 2)..=order {
            let a = T::from_usize_lossy(2 * n - 1) * x * p[idx(n - 1, m)];
            let b = T::from_usize_lossy(n + m - 1) * p[idx(n - 2, m)];
            p[idx(n, m)] = (a - b) / T::from_usize_lossy(n - m);
        }
    }

    for n in 0..=order {
        let base = n * (n + 1);
        out[base] = T::lit(norm_factor(n, 0, normalization)) * p[idx(n, 0)];
        for m in 1..=n {
            let k = T::lit(norm_factor(n, m, normalization)) * p[idx(n, m)];
            let (sm, cm) = (T::from_usize_lossy(m) * az).sin_cos();
            out[base + m] = k * cm;
            out[base - m] = k * sm;
        }
    }
}
