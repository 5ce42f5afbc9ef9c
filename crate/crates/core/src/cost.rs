//! The psychoacoustic cost of a transcoding matrix and its gradient.
//!
//! Every direction-dependent term has the form `(1/L) Σ_ℓ w_ℓ f_ℓ²`, where
//! `f_ℓ` is a deviation computed from row `ℓ` of the speaker matrix `S`. The
//! gain cap `Σ` is computed directly on the entries of `T`.
//!
//! The symmetry terms compare the gain of speaker `p` for a source at `ℓ`
//! with the gain of its partner `p′` for the mirror-image source `ℓ̄`,
//! `Δ_ℓ ∝ Σ_(p,p′) |s_ℓp − s_ℓ̄p′|`.
//! Directions without a mirror image in the cloud do not contribute; for
//! directions on the median plane (`ℓ̄ = ℓ`) this compares `p` and `p′`
//! within the same row.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{guard_energy, guard_pressure, TranscodingMatrix, ENERGY_GUARD, PRESSURE_GUARD};
use crate::error::{Error, Result};
use crate::formats::{DecoderToSpeaker, EncodingMatrix};
use crate::geometry::DEFAULT_SYMMETRY_TOL_DEG;
use crate::linalg::{Matrix, Vec3};
use crate::real::Real;

/// Prefactors `c_x` of the cost terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostCoefficients {
    pub c_p: f64,
    pub c_vr: f64,
    pub c_vt: f64,
    pub c_e: f64,
    pub c_ir: f64,
    pub c_it: f64,
    pub c_phi_lin: f64,
    pub c_phi_quad: f64,
    pub c_delta_lin: f64,
    pub c_delta_quad: f64,
    pub c_sigma_lin: f64,
    pub c_sigma_quad: f64,
    pub c_s_lin: f64,
    pub c_s_quad: f64,
    /// Largest allowed transcoder gain, in dB.
    pub l_max_db: f64,
    /// Temperature of the smooth step and absolute value used in place of
    /// the exact ones; `0` keeps the exact piecewise definitions.
    pub smoothing: f64,
}

impl Default for CostCoefficients {
    fn default() -> Self {
        Self {
            c_p: 0.0,
            c_vr: 0.0,
            c_vt: 0.0,
            c_e: 0.0,
            c_ir: 0.0,
            c_it: 0.0,
            c_phi_lin: 0.0,
            c_phi_quad: 0.0,
            c_delta_lin: 0.0,
            c_delta_quad: 0.0,
            c_sigma_lin: 0.0,
            c_sigma_quad: 0.0,
            c_s_lin: 0.0,
            c_s_quad: 0.0,
            l_max_db: 3.0,
            smoothing: 0.0,
        }
    }
}

impl CostCoefficients {
    /// Coefficient of each term, in [`Term::ALL`] order.
    pub fn as_array(&self) -> [f64; 14] {
        [
            self.c_p,
            self.c_vr,
            self.c_vt,
            self.c_e,
            self.c_ir,
            self.c_it,
            self.c_phi_lin,
            self.c_phi_quad,
            self.c_delta_lin,
            self.c_delta_quad,
            self.c_sigma_lin,
            self.c_sigma_quad,
            self.c_s_lin,
            self.c_s_quad,
        ]
    }

    pub fn set(&mut self, term: Term, value: f64) {
        let slot = match term {
            Term::P => &mut self.c_p,
            Term::VR => &mut self.c_vr,
            Term::VT => &mut self.c_vt,
            Term::E => &mut self.c_e,
            Term::IR => &mut self.c_ir,
            Term::IT => &mut self.c_it,
            Term::PhiLin => &mut self.c_phi_lin,
            Term::PhiQuad => &mut self.c_phi_quad,
            Term::DeltaLin => &mut self.c_delta_lin,
            Term::DeltaQuad => &mut self.c_delta_quad,
            Term::SigmaLin => &mut self.c_sigma_lin,
            Term::SigmaQuad => &mut self.c_sigma_quad,
            Term::SLin => &mut self.c_s_lin,
            Term::SQuad => &mut self.c_s_quad,
        };
        *slot = value;
    }

    pub fn get(&self, term: Term) -> f64 {
        self.as_array()[term as usize]
    }

    pub fn d_max(&self) -> f64 {
        10f64.powf(self.l_max_db / 20.0)
    }

    /// All coefficients multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for term in Term::ALL {
            out.set(term, self.get(term) * k);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for term in Term::ALL {
            let c = self.get(term);
            if !c.is_finite() || c < 0.0 {
                return Err(Error::config(term.coefficient_key(), format!("must be a non-negative number, got {c}")));
            }
        }
        if !self.l_max_db.is_finite() {
            return Err(Error::config("l_max_db", "must be finite"));
        }
        if !self.smoothing.is_finite() || self.smoothing < 0.0 {
            return Err(Error::config("smoothing", "must be a non-negative number"));
        }
        if Term::ALL[..6].iter().all(|&t| self.get(t) == 0.0) {
            return Err(Error::config(
                "c_p",
                "at least one of c_p, c_vr, c_vt, c_e, c_ir, c_it must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    P,
    VR,
    VT,
    E,
    IR,
    IT,
    PhiLin,
    PhiQuad,
    DeltaLin,
    DeltaQuad,
    SigmaLin,
    SigmaQuad,
    SLin,
    SQuad,
}

impl Term {
    pub const ALL: [Term; 14] = [
        Term::P,
        Term::VR,
        Term::VT,
        Term::E,
        Term::IR,
        Term::IT,
        Term::PhiLin,
        Term::PhiQuad,
        Term::DeltaLin,
        Term::DeltaQuad,
        Term::SigmaLin,
        Term::SigmaQuad,
        Term::SLin,
        Term::SQuad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::P => "C_P",
            Term::VR => "C_VR",
            Term::VT => "C_VT",
            Term::E => "C_E",
            Term::IR => "C_IR",
            Term::IT => "C_IT",
            Term::PhiLin => "C_Phi_lin",
            Term::PhiQuad => "C_Phi_quad",
            Term::DeltaLin => "C_Delta_lin",
            Term::DeltaQuad => "C_Delta_quad",
            Term::SigmaLin => "C_Sigma_lin",
            Term::SigmaQuad => "C_Sigma_quad",
            Term::SLin => "C_S_lin",
            Term::SQuad => "C_S_quad",
        }
    }

    pub fn coefficient_key(self) -> &'static str {
        match self {
            Term::P => "c_p",
            Term::VR => "c_vr",
            Term::VT => "c_vt",
            Term::E => "c_e",
            Term::IR => "c_ir",
            Term::IT => "c_it",
            Term::PhiLin => "c_phi_lin",
            Term::PhiQuad => "c_phi_quad",
            Term::DeltaLin => "c_delta_lin",
            Term::DeltaQuad => "c_delta_quad",
            Term::SigmaLin => "c_sigma_lin",
            Term::SigmaQuad => "c_sigma_quad",
            Term::SLin => "c_s_lin",
            Term::SQuad => "c_s_quad",
        }
    }
}

/// Value of every cost term and the weighted total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBreakdown<T> {
    pub terms: [T; 14],
    pub total: T,
}

impl<T: Real> CostBreakdown<T> {
    pub fn get(&self, term: Term) -> T {
        self.terms[term as usize]
    }

    /// `name = value` lines, one per term, then the total.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for term in Term::ALL {
            let _ = writeln!(out, "{} = {:.16e}", term.name(), self.get(term).to_f64_lossy());
        }
        let _ = writeln!(out, "total = {:.16e}", self.total.to_f64_lossy());
        out
    }

    pub fn parse(text: &str) -> Result<CostBreakdown<f64>> {
        let mut terms = [f64::NAN; 14];
        let mut total = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("bad cost line `{line}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Invalid(format!("bad cost value `{line}`")))?;
            let k = k.trim();
            if k == "total" {
                total = Some(v);
            } else if let Some(t) = Term::ALL.iter().find(|t| t.name() == k) {
                terms[*t as usize] = v;
            } else {
                return Err(Error::Invalid(format!("unknown cost term `{k}`")));
            }
        }
        if terms.iter().any(|x| x.is_nan()) {
            return Err(Error::Invalid("missing cost term".into()));
        }
        let total = total.ok_or_else(|| Error::Invalid("missing total".into()))?;
        Ok(CostBreakdown { terms, total })
    }
}

/// Exact or smoothed `|x|` and step `θ(x)`, each with its derivative.
#[derive(Clone, Copy, Debug)]
struct Kinks<T> {
    tau: T,
}

impl<T: Real> Kinks<T> {
    #[inline]
    fn abs(&self, x: T) -> (T, T) {
        if self.tau > T::zero() {
            let r = (x * x + self.tau * self.tau).sqrt();
            (r - self.tau, x / r)
        } else {
            (x.abs(), x.sign0())
        }
    }

    #[inline]
    fn step(&self, x: T) -> (T, T) {
        if self.tau > T::zero() {
            let s = T::one() / (T::one() + (-x / self.tau).exp());
            (s, s * (T::one() - s) / self.tau)
        } else if x > T::zero() {
            (T::one(), T::zero())
        } else {
            (T::zero(), T::zero())
        }
    }
}

/// Everything the cost needs besides the transcoding matrix itself.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    pub encoding: EncodingMatrix<T>,
    pub decoder: DecoderToSpeaker<T>,
    pub coefficients: CostCoefficients,
    /// Mirror image of every cloud direction, see the module docs.
    pub mirror: Vec<Option<usize>>,
    /// Symmetric speaker pairs of the decoder layout.
    pub pairs: Vec<(usize, usize)>,
    /// Remapping transcoder used by remap initializations.
    pub baseline: Option<TranscodingMatrix<T>>,
    /// Labels of the output-format channels (rows of `T`).
    pub output_labels: Vec<String>,
    speaker_vectors: Vec<Vec3<T>>,
    weights_over_l: Vec<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(encoding: EncodingMatrix<T>, decoder: DecoderToSpeaker<T>, coefficients: CostCoefficients) -> Result<Self> {
        coefficients.validate()?;
        let mirror = encoding.cloud.mirror_map(T::lit(DEFAULT_SYMMETRY_TOL_DEG));
        let pairs = decoder.layout.symmetry_pairs().to_vec();
        if pairs.is_empty() && (coefficients.c_delta_lin > 0.0 || coefficients.c_delta_quad > 0.0) {
            log::warn!("symmetry terms requested but the output layout has no symmetric pairs; they stay at zero");
        }
        let l = T::from_usize_lossy(encoding.cloud.len());
        let weights_over_l = encoding.cloud.weights().iter().map(|&w| w / l).collect();
        let speaker_vectors = decoder.layout.vectors();
        let output_labels = decoder.channel_labels.clone();
        Ok(Self {
            encoding,
            decoder,
            coefficients,
            mirror,
            pairs,
            baseline: None,
            output_labels,
            speaker_vectors,
            weights_over_l,
        })
    }

    pub fn with_baseline(mut self, baseline: TranscodingMatrix<T>) -> Result<Self> {
        if baseline.shape() != self.shape() {
            return Err(Error::Dimension(format!(
                "baseline is {:?}, transcoder must be {:?}",
                baseline.shape(),
                self.shape()
            )));
        }
        self.baseline = Some(baseline);
        Ok(self)
    }

    pub fn with_coefficients(&self, coefficients: CostCoefficients) -> Result<Self> {
        coefficients.validate()?;
        let mut out = self.clone();
        out.coefficients = coefficients;
        Ok(out)
    }

    /// `(N, M)`: the shape of the transcoding matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.decoder.channels(), self.encoding.channels())
    }

    pub fn input_labels(&self) -> &[String] {
        &self.encoding.channel_labels
    }

    pub fn transcoder(&self, entries: Matrix<T>) -> Result<TranscodingMatrix<T>> {
        TranscodingMatrix::new(entries, self.encoding.channel_labels.clone(), self.output_labels.clone())
    }

    fn check(&self, t: &Matrix<T>) -> Result<()> {
        if t.shape() != self.shape() {
            return Err(Error::Dimension(format!("transcoder is {:?}, expected {:?}", t.shape(), self.shape())));
        }
        Ok(())
    }

    /// `D = D_spk · T`, skipping the product for identity decoders.
    fn decoding(&self, t: &Matrix<T>) -> Result<Matrix<T>> {
        if self.decoder.is_identity() {
            Ok(t.clone())
        } else {
            self.decoder.entries.matmul(t)
        }
    }

    pub fn speaker_entries(&self, t: &Matrix<T>) -> Result<Matrix<T>> {
        self.check(t)?;
        self.encoding.entries.matmul_transposed(&self.decoding(t)?)
    }

    pub fn cost_terms(&self, t: &Matrix<T>) -> Result<CostBreakdown<T>> {
        let s = self.speaker_entries(t)?;
        Ok(self.evaluate(&s, t, None))
    }

    pub fn total_cost(&self, t: &Matrix<T>) -> Result<T> {
        Ok(self.cost_terms(t)?.total)
    }

    /// Cost breakdown and `∂C/∂T`.
    pub fn cost_gradient(&self, t: &Matrix<T>) -> Result<(CostBreakdown<T>, Matrix<T>)> {
        let s = self.speaker_entries(t)?;
        let mut dc_ds = Matrix::zeros(s.rows(), s.cols());
        let mut grad = Matrix::zeros(t.rows(), t.cols());
        let breakdown = self.evaluate(&s, t, Some((&mut dc_ds, &mut grad)));
        // ∂C/∂D = Aᵀ·G, ∂C/∂T = D_spkᵀ·∂C/∂D
        let dc_dd = dc_ds.transpose().matmul(&self.encoding.entries)?;
        let chain = if self.decoder.is_identity() { dc_dd } else { self.decoder.entries.transpose().matmul(&dc_dd)? };
        Ok((breakdown, &grad + &chain))
    }

    /// Term values for speaker gains `s` and transcoder `t`. When `grad` is
    /// given, accumulates `∂C/∂S` into the first matrix and the direct
    /// `∂C/∂T` of the gain cap into the second.
    fn evaluate(&self, s: &Matrix<T>, t: &Matrix<T>, mut grad: Option<(&mut Matrix<T>, &mut Matrix<T>)>) -> CostBreakdown<T> {
        let kinks = Kinks { tau: T::lit(self.coefficients.smoothing) };
        let coeffs = self.coefficients.as_array().map(T::lit);
        let c = |t: Term| coeffs[t as usize];
        let two = T::lit(2.0);
        let one = T::one();
        let zero = T::zero();
        let u = &self.speaker_vectors;
        let n_spk = s.cols();
        let mut terms = [zero; 14];
        let mut row_grad = vec![zero; n_spk];

        for (l, &v) in self.encoding.cloud.vectors().iter().enumerate() {
            let row = s.row(l);
            let wl = self.weights_over_l[l];

            let mut p = zero;
            let mut e = zero;
            let mut a = Vec3::zero();
            let mut b = Vec3::zero();
            let mut l1 = zero;
            let mut phi_lin = zero;
            let mut phi_quad = zero;
            for (k, &x) in row.iter().enumerate() {
                p += x;
                e += x * x;
                a = a + u[k].scale(x);
                b = b + u[k].scale(x * x);
                let (ax, _) = kinks.abs(x);
                let (neg, _) = kinks.step(-x);
                l1 += ax;
                phi_lin += ax * neg;
                phi_quad += x * x * neg;
            }
            let pg = guard_pressure(p);
            let pg_abs = pg.abs();
            let sigma = pg.signum();
            let gp = if p.abs() > T::lit(PRESSURE_GUARD) { one } else { zero };
            let eg = guard_energy(e);
            let hp = if e > T::lit(ENERGY_GUARD) { one } else { zero };

            let vel = a.scale(one / pg);
            let vr = vel.dot(v);
            let vt_vec = vel - v.scale(vr);
            let vt = vel.cross(v).norm();
            let vt_hat = if vt > zero { vt_vec.scale(one / vt) } else { Vec3::zero() };
            let int = b.scale(one / eg);
            let ir = int.dot(v);
            let it_vec = int - v.scale(ir);
            let it = int.cross(v).norm();
            let it_hat = if it > zero { it_vec.scale(one / it) } else { Vec3::zero() };
            let l2 = e.sqrt();

            let f_phi_lin = phi_lin / pg_abs;
            let f_phi_quad = phi_quad / eg;
            let f_s_lin = (l1 - l2) / pg_abs;
            let f_s_quad = (l1 * l1 - e) / eg;

            // symmetry against the mirror-image direction
            let mut f_d_lin = zero;
            let mut f_d_quad = zero;
            let mirror = self.mirror[l];
            if let Some(lm) = mirror {
                let mrow = s.row(lm);
                for &(q, qm) in &self.pairs {
                    let diff = row[q] - mrow[qm];
                    f_d_lin += kinks.abs(diff).0;
                    f_d_quad += diff * diff;
                }
                f_d_lin = f_d_lin / pg_abs;
                f_d_quad = f_d_quad / eg;
            }

            let values = [
                (one - p) * (one - p),
                (one - vr) * (one - vr),
                vt * vt,
                (one - e) * (one - e),
                (one - ir) * (one - ir),
                it * it,
                f_phi_lin * f_phi_lin,
                f_phi_quad * f_phi_quad,
                f_d_lin * f_d_lin,
                f_d_quad * f_d_quad,
                zero,
                zero,
                f_s_lin * f_s_lin,
                f_s_quad * f_s_quad,
            ];
            for (acc, val) in terms.iter_mut().zip(values) {
                *acc += wl * val;
            }

            let Some((dc_ds, _)) = grad.as_mut() else { continue };

            // outer factors  ∂(c·w/L·f²)/∂f
            let k_p = -two * c(Term::P) * wl * (one - p);
            let k_vr = -two * c(Term::VR) * wl * (one - vr);
            let k_vt = two * c(Term::VT) * wl * vt;
            let k_e = -two * c(Term::E) * wl * (one - e);
            let k_ir = -two * c(Term::IR) * wl * (one - ir);
            let k_it = two * c(Term::IT) * wl * it;
            let k_phi_lin = two * c(Term::PhiLin) * wl * f_phi_lin;
            let k_phi_quad = two * c(Term::PhiQuad) * wl * f_phi_quad;
            let k_d_lin = two * c(Term::DeltaLin) * wl * f_d_lin;
            let k_d_quad = two * c(Term::DeltaQuad) * wl * f_d_quad;
            let k_s_lin = two * c(Term::SLin) * wl * f_s_lin;
            let k_s_quad = two * c(Term::SQuad) * wl * f_s_quad;
            // derivative of |Pg| and Eg with respect to every entry of the row
            let d_pabs = sigma * gp;

            for (k, &x) in row.iter().enumerate() {
                let uv = u[k].dot(v);
                let d_vr = (uv - vr * gp) / pg;
                let d_vt = (vt_hat.dot(u[k]) - vt * gp) / pg;
                let d_eg = two * x * hp;
                let d_ir = two * x * (uv - ir * hp) / eg;
                let d_it = two * x * (it_hat.dot(u[k]) - it * hp) / eg;

                let (ax, dax) = kinks.abs(x);
                let (neg, dneg) = kinks.step(-x);
                let d_phi_lin_num = dax * neg - ax * dneg;
                let d_phi_quad_num = two * x * neg - x * x * dneg;
                let d_phi_lin = (d_phi_lin_num - f_phi_lin * d_pabs) / pg_abs;
                let d_phi_quad = (d_phi_quad_num - f_phi_quad * d_eg) / eg;

                let d_l2 = if l2 > zero { x / l2 } else { zero };
                let d_s_lin = (dax - d_l2 - f_s_lin * d_pabs) / pg_abs;
                let d_s_quad = (two * l1 * dax - two * x - f_s_quad * d_eg) / eg;

                // the denominator part of the symmetry terms; numerators below
                let d_d_lin = -f_d_lin * d_pabs / pg_abs;
                let d_d_quad = -f_d_quad * d_eg / eg;

                row_grad[k] = k_p
                    + k_vr * d_vr
                    + k_vt * d_vt
                    + k_e * two * x
                    + k_ir * d_ir
                    + k_it * d_it
                    + k_phi_lin * d_phi_lin
                    + k_phi_quad * d_phi_quad
                    + k_s_lin * d_s_lin
                    + k_s_quad * d_s_quad;
                if mirror.is_some() {
                    row_grad[k] += k_d_lin * d_d_lin + k_d_quad * d_d_quad;
                }
            }
            for (dst, &g) in dc_ds.row_mut(l).iter_mut().zip(&row_grad) {
                *dst += g;
            }
            if let Some(lm) = mirror {
                let mrow = s.row(lm).to_vec();
                for &(q, qm) in &self.pairs {
                    let diff = row[q] - mrow[qm];
                    let g = k_d_lin * kinks.abs(diff).1 / pg_abs + k_d_quad * two * diff / eg;
                    dc_ds[(l, q)] += g;
                    dc_ds[(lm, qm)] -= g;
                }
            }
        }

        // gain cap on the transcoder entries
        let d_max = T::lit(self.coefficients.d_max());
        let nm = T::from_usize_lossy(t.rows() * t.cols());
        let mut sigma_lin = zero;
        let mut sigma_quad = zero;
        for &d in t.as_slice() {
            let (st, _) = kinks.step(d - d_max);
            sigma_lin += d * st;
            sigma_quad += d * d * st;
        }
        sigma_lin = sigma_lin / nm;
        sigma_quad = sigma_quad / nm;
        terms[Term::SigmaLin as usize] = sigma_lin * sigma_lin;
        terms[Term::SigmaQuad as usize] = sigma_quad * sigma_quad;
        if let Some((_, dc_dt)) = grad.as_mut() {
            let k_lin = two * c(Term::SigmaLin) * sigma_lin / nm;
            let k_quad = two * c(Term::SigmaQuad) * sigma_quad / nm;
            if k_lin != zero || k_quad != zero {
                for (dst, &d) in dc_dt.as_mut_slice().iter_mut().zip(t.as_slice()) {
                    let (st, dst_dd) = kinks.step(d - d_max);
                    *dst += k_lin * (st + d * dst_dd) + k_quad * (two * d * st + d * d * dst_dd);
                }
            }
        }

        let total = terms.iter().zip(coeffs).map(|(&v, c)| c * v).sum();
        CostBreakdown { terms, total }
    }
}

pub fn total_cost<T: Real>(t: &TranscodingMatrix<T>, problem: &Problem<T>) -> Result<T> {
    problem.total_cost(&t.entries)
}

pub fn cost_gradient<T: Real>(t: &TranscodingMatrix<T>, problem: &Problem<T>) -> Result<Matrix<T>> {
    Ok(problem.cost_gradient(&t.entries)?.1)
}
