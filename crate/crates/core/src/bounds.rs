//! Closed-form generalization bounds and rate comparisons.
//!
//! Logs are natural throughout.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::linalg::SchattenOrder;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("sample count must exceed 3, got {0}")]
    TooFewSamples(usize),
    #[error("confidence delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("alpha must lie in [0, 1/2], got {0}")]
    InvalidAlpha(f64),
    #[error("truncation must be at least 1")]
    ZeroTruncation,
    #[error("invalid decay model: {0}")]
    InvalidDecay(String),
    #[error("ill-posed (alpha={alpha}, p={p}, r={r}): alpha*p must exceed 1/r")]
    IllPosed { alpha: f64, p: SchattenOrder, r: f64 },
    #[error("spectrum must be non-negative and non-increasing")]
    InvalidSpectrum,
    #[error("shift t must be positive, got {0}")]
    InvalidShift(f64),
    #[error("rate exponents undefined for r={r}, s={s}")]
    DegenerateRate { r: f64, s: f64 },
    #[error("not enough positive eigenvalues in [{lo}, {hi}] to fit a decay model")]
    FitWindow { lo: usize, hi: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = BoundsError> = std::result::Result<T, E>;

/// Polynomial eigenvalue decay `q j^{-r} ≤ σ_j ≤ Q j^{-r}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayModel {
    pub q: f64,
    #[serde(rename = "Q")]
    pub big_q: f64,
    pub r: f64,
}

impl DecayModel {
    pub fn new(q: f64, big_q: f64, r: f64) -> Result<Self> {
        if !(q > 0.0 && q <= big_q && big_q.is_finite()) {
            return Err(BoundsError::InvalidDecay(format!("need 0 < q <= Q, got q={q}, Q={big_q}")));
        }
        if q >= 1.0 {
            return Err(BoundsError::InvalidDecay(format!("q must be below 1, got {q}")));
        }
        if !(r > 1.0 && r.is_finite()) {
            return Err(BoundsError::InvalidDecay(format!("r must exceed 1, got {r}")));
        }
        Ok(Self { q, big_q, r })
    }

    /// Fits `r` by least squares of `ln σ_j` on `ln j` over `j ∈ [lo, hi]`
    /// (1-based), then takes `q` as the smallest `σ_j j^r` inside the window
    /// and `Q` as the largest over the whole list.
    pub fn fit(spectrum: &[f64], lo: usize, hi: usize) -> Result<Self> {
        let (slope, _) = crate::oracle::loglog_slope(spectrum, lo, hi)
            .ok_or(BoundsError::FitWindow { lo, hi })?;
        let r = -slope;
        let scaled = |j: usize| spectrum[j - 1] * (j as f64).powf(r);
        let q = (lo.max(1)..=hi.min(spectrum.len()))
            .filter(|&j| spectrum[j - 1] > 0.0)
            .map(scaled)
            .fold(f64::INFINITY, f64::min);
        let big_q = (1..=spectrum.len())
            .filter(|&j| spectrum[j - 1] > 0.0)
            .map(scaled)
            .fold(0.0, f64::max);
        Self::new(q, big_q, r)
    }

    /// `Q j^{-r}` for `j = 1..=count`.
    pub fn upper_envelope(&self, count: usize) -> Vec<f64> {
        (1..=count).map(|j| self.big_q * (j as f64).powf(-self.r)).collect()
    }

    /// The regularized norm is finite only when `αp > 1/r`.
    pub fn check_posed(&self, alpha: f64, p: SchattenOrder) -> Result<()> {
        if let SchattenOrder::Finite(pv) = p {
            if alpha * pv <= 1.0 / self.r {
                return Err(BoundsError::IllPosed { alpha, p, r: self.r });
            }
        }
        Ok(())
    }
}

/// Inputs shared by the bounds of Theorems 1 and 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundParams {
    pub alpha: f64,
    pub p: SchattenOrder,
    pub n: usize,
    pub delta: f64,
    pub k: usize,
}

impl BoundParams {
    pub fn new(alpha: f64, p: SchattenOrder, n: usize, delta: f64, k: usize) -> Result<Self> {
        let b = Self { alpha, p, n, delta, k };
        b.validate()?;
        Ok(b)
    }

    pub fn with_k(mut self, k: usize) -> Result<Self> {
        self.k = k;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_n_delta(self.n, self.delta)?;
        if !(0.0..=0.5).contains(&self.alpha) {
            return Err(BoundsError::InvalidAlpha(self.alpha));
        }
        if self.k == 0 {
            return Err(BoundsError::ZeroTruncation);
        }
        Ok(())
    }
}

fn check_n_delta(n: usize, delta: f64) -> Result<()> {
    if n <= 3 {
        return Err(BoundsError::TooFewSamples(n));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::InvalidDelta(delta));
    }
    Ok(())
}

/// `(9/n) ln(n/δ)`, the floor of `t_k`.
pub fn log_floor(n: usize, delta: f64) -> Result<f64> {
    check_n_delta(n, delta)?;
    let nf = n as f64;
    Ok(9.0 / nf * (nf / delta).ln())
}

/// `t_k = max(σ_k, (9/n) ln(n/δ))`.
pub fn t_k(sigma_k: f64, n: usize, delta: f64) -> Result<f64> {
    Ok(sigma_k.max(log_floor(n, delta)?))
}

/// Eigenvalue information fed to [`thm1_bound`].
#[derive(Clone, Copy, Debug)]
pub enum SpectrumInput<'a> {
    /// A finite list; indices beyond it are taken as zero.
    Values(&'a [f64]),
    /// A finite list followed by a tail obeying the decay model.
    ValuesWithDecay(&'a [f64], &'a DecayModel),
    /// Only the decay model; its upper envelope stands in for `σ_j`.
    Decay(&'a DecayModel),
}

/// Length of the explicit envelope used when only a decay model is given.
const ENVELOPE_LEN: usize = 4096;

fn check_spectrum(values: &[f64]) -> Result<()> {
    let ok = values.iter().all(|v| *v >= 0.0 && v.is_finite())
        && values.windows(2).all(|w| w[1] <= w[0]);
    if ok {
        Ok(())
    } else {
        Err(BoundsError::InvalidSpectrum)
    }
}

/// `(σ/(σ+t))^{e}` with `0^0 := 0`.
fn ratio_pow(sigma: f64, t: f64, e: f64) -> f64 {
    if sigma <= 0.0 {
        0.0
    } else if e == 0.0 {
        1.0
    } else {
        (sigma / (sigma + t)).powf(e)
    }
}

/// `‖C^α (C+tI)^{-α}‖_p` computed termwise over `values`, with an integral
/// tail bound for indices past the list when `decay` is given.
pub fn regularized_norm(
    values: &[f64],
    decay: Option<&DecayModel>,
    alpha: f64,
    p: SchattenOrder,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(BoundsError::InvalidShift(t));
    }
    if let Some(d) = decay {
        d.check_posed(alpha, p)?;
    }
    let len = values.len() as f64;
    match p {
        SchattenOrder::Infinity => {
            let head = values.iter().map(|&s| ratio_pow(s, t, alpha)).fold(0.0, f64::max);
            let tail = decay.map_or(0.0, |d| {
                let s = d.big_q * (len + 1.0).powf(-d.r);
                ratio_pow(s, t, alpha)
            });
            Ok(head.max(tail))
        }
        SchattenOrder::Finite(pv) => {
            let e = alpha * pv;
            let head: f64 = values.iter().map(|&s| ratio_pow(s, t, e)).sum();
            let tail = decay.map_or(0.0, |d| {
                // Σ_{j>L} (Q j^{-r}/t)^{e} ≤ (Q/t)^{e} ∫_L^∞ x^{-re} dx
                let re = d.r * e;
                if len == 0.0 {
                    // the j = 1 term is at most 1; integrate from 1 for the rest
                    1.0 + (d.big_q / t).powf(e) / (re - 1.0)
                } else {
                    (d.big_q / t).powf(e) * len.powf(1.0 - re) / (re - 1.0)
                }
            });
            Ok((head + tail).powf(1.0 / pv))
        }
    }
}

/// Theorem 1: `3 t_k^α ‖C^α (C + t_k I)^{-α}‖_p`.
pub fn thm1_bound(params: &BoundParams, spectrum: SpectrumInput<'_>) -> Result<f64> {
    params.validate()?;
    let envelope;
    let (values, decay) = match spectrum {
        SpectrumInput::Values(v) => (v, None),
        SpectrumInput::ValuesWithDecay(v, d) => (v, Some(d)),
        SpectrumInput::Decay(d) => {
            envelope = d.upper_envelope(ENVELOPE_LEN.max(params.k));
            (envelope.as_slice(), Some(d))
        }
    };
    check_spectrum(values)?;
    let sigma_k = match values.get(params.k - 1) {
        Some(&s) => s,
        None => decay.map_or(0.0, |d| d.big_q * (params.k as f64).powf(-d.r)),
    };
    let t = t_k(sigma_k, params.n, params.delta)?;
    let norm = regularized_norm(values, decay, params.alpha, params.p, t)?;
    let scale = if params.alpha == 0.0 { 1.0 } else { t.powf(params.alpha) };
    Ok(3.0 * scale * norm)
}

/// Lemma 3 relaxation for `f(k) = g k^{-1/γ}`: `Q t^{-γ/p}` with
/// `Q = (g^γ Γ(αp−γ) Γ(1+γ) / Γ(γ))^{1/p}`. For `p = ∞` the trivial bound 1.
pub fn lemma3_term_c(g: f64, gamma_exp: f64, alpha: f64, p: SchattenOrder, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(BoundsError::InvalidShift(t));
    }
    if !(g > 0.0 && gamma_exp > 0.0 && gamma_exp < 1.0) {
        return Err(BoundsError::InvalidDecay(format!(
            "need g > 0 and 0 < gamma < 1, got g={g}, gamma={gamma_exp}"
        )));
    }
    let pv = match p {
        SchattenOrder::Infinity => return Ok(1.0),
        SchattenOrder::Finite(pv) => pv,
    };
    if alpha * pv <= gamma_exp {
        return Err(BoundsError::IllPosed { alpha, p, r: 1.0 / gamma_exp });
    }
    let c = g.powf(gamma_exp) * gamma(alpha * pv - gamma_exp) * gamma(1.0 + gamma_exp) / gamma(gamma_exp);
    Ok(c.powf(1.0 / pv) * t.powf(-gamma_exp / pv))
}

/// The same relaxation with the constant of `∫_0^∞ (f/(f+t))^{αp} dx`
/// evaluated exactly: `Γ(αp)` replaces `Γ(γ)` in the denominator.
///
/// Unlike [`lemma3_term_c`] this always dominates the termwise norm.
pub fn lemma3_integral_term_c(g: f64, gamma_exp: f64, alpha: f64, p: SchattenOrder, t: f64) -> Result<f64> {
    let stated = lemma3_term_c(g, gamma_exp, alpha, p, t)?;
    match p {
        SchattenOrder::Infinity => Ok(stated),
        SchattenOrder::Finite(pv) => Ok(stated * (gamma(gamma_exp) / gamma(alpha * pv)).powf(1.0 / pv)),
    }
}

/// `k*_n = (qn / (9 ln(n/δ)))^{1/r}`, as a real number.
pub fn kstar(d: &DecayModel, n: usize, delta: f64) -> Result<f64> {
    check_n_delta(n, delta)?;
    let nf = n as f64;
    Ok((d.q * nf / (9.0 * (nf / delta).ln())).powf(1.0 / d.r))
}

/// `Q′ = 3 (Q^{1/r} Γ(αp−1/r) Γ(1+1/r) / Γ(1/r))^{1/p}`; 3 for `p = ∞`.
pub fn qprime(d: &DecayModel, alpha: f64, p: SchattenOrder) -> Result<f64> {
    d.check_posed(alpha, p)?;
    let pv = match p {
        SchattenOrder::Infinity => return Ok(3.0),
        SchattenOrder::Finite(pv) => pv,
    };
    let g = 1.0 / d.r;
    let inner = d.big_q.powf(g) * gamma(alpha * pv - g) * gamma(1.0 + g) / gamma(g);
    Ok(3.0 * inner.powf(1.0 / pv))
}

fn thm2_exponent(d: &DecayModel, alpha: f64, p: SchattenOrder) -> f64 {
    -d.r * alpha + p.reciprocal()
}

/// Theorem 2: `Q′ k^{-rα+1/p}` below `k*_n`, frozen at `k*_n` from there on.
pub fn thm2_bound(d: &DecayModel, params: &BoundParams) -> Result<f64> {
    params.validate()?;
    let qp = qprime(d, params.alpha, params.p)?;
    let ks = kstar(d, params.n, params.delta)?;
    let kf = params.k as f64;
    let at = if kf < ks { kf } else { ks };
    Ok(qp * at.powf(thm2_exponent(d, params.alpha, params.p)))
}

/// Corollary 3: `Q′ (9 ln(n/δ) / (qn))^{α − 1/(rp)}`.
pub fn corollary3_rate(d: &DecayModel, params: &BoundParams) -> Result<f64> {
    params.validate()?;
    let qp = qprime(d, params.alpha, params.p)?;
    let nf = params.n as f64;
    let base = 9.0 * (nf / params.delta).ln() / (d.q * nf);
    Ok(qp * base.powf(params.alpha - params.p.reciprocal() / d.r))
}

/// Polynomial learning-rate exponents for `d_R` under decay order `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateExponents {
    pub ours_dr: f64,
    pub shawe_taylor: f64,
    pub blanchard: f64,
}

pub fn rate_exponents(r: f64, s: f64) -> Result<RateExponents> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(BoundsError::DegenerateRate { r, s });
    }
    let denom = r - s + s * r;
    if denom == 0.0 || !s.is_finite() {
        return Err(BoundsError::DegenerateRate { r, s });
    }
    Ok(RateExponents {
        ours_dr: 1.0 - 1.0 / r,
        shawe_taylor: (r - 1.0) / (2.0 * r - 1.0),
        blanchard: s * (r - 1.0) / denom,
    })
}

/// Writes `(k, bound)` pairs as CSV.
pub fn write_curve_csv<W: Write>(out: W, curve: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "bound"])?;
    for (k, b) in curve {
        w.write_record([k.to_string(), format!("{b:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv_path(path: impl AsRef<Path>, curve: &[(usize, f64)]) -> Result<()> {
    write_curve_csv(std::fs::File::create(path)?, curve)
}
