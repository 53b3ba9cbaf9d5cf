//! Time-to-solution, scaling-law fits and approximation-ratio histograms.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::anneal::SampleSet;
use crate::error::{Error, Result};
use crate::exact::GroundTruth;
use crate::model::{approximation_ratio, SpectrumBounds};

pub const DEFAULT_CONFIDENCE: f64 = 0.99;
/// Reads within this distance of `c_min` count as ground-state hits.
pub const GROUND_TOLERANCE: f64 = 1e-9;
/// Lower bound on every fitted coefficient.
pub const COEFFICIENT_FLOOR: f64 = 1e-6;
/// Deterministic start grid for the exponential rate.
pub const FIT_STARTS: usize = 64;
/// RMSE differences below this fraction of the data's RMS count as ties.
pub const FIT_TIE_TOLERANCE: f64 = 1e-6;

/// Finite seconds, or infinite when no read reached the ground state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tts {
    Finite(f64),
    Infinite,
}

impl Tts {
    pub fn seconds(self) -> Option<f64> {
        match self {
            Tts::Finite(s) => Some(s),
            Tts::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Tts::Finite(_))
    }
}

impl fmt::Display for Tts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tts::Finite(s) => write!(f, "{s}"),
            Tts::Infinite => f.write_str("inf"),
        }
    }
}

// serialized as a number, or the string "inf"
impl Serialize for Tts {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tts::Finite(v) => s.serialize_f64(*v),
            Tts::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Tts {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Tts::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(Tts::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad tts value {t:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtsResult {
    pub success_rate: f64,
    pub num_reads: usize,
    pub cpu_time_seconds: f64,
    pub tts_seconds: Tts,
    pub confidence: f64,
}

/// TTS from a success rate: expected CPU time to see the optimum at least
/// once with probability `confidence`.
pub fn tts_from_rate(p: f64, num_reads: usize, cpu_time_seconds: f64, confidence: f64) -> Result<Tts> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidConfidence(confidence));
    }
    if num_reads == 0 {
        return Err(Error::TooFew {
            what: "reads",
            min: 1,
            got: 0,
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::NonFinite("success rate"));
    }
    if !cpu_time_seconds.is_finite() {
        return Err(Error::NonFinite("cpu time"));
    }
    if p == 0.0 {
        return Ok(Tts::Infinite);
    }
    let per_read = cpu_time_seconds / num_reads as f64;
    let target = (1.0 - confidence).ln();
    let miss = (1.0 - p).ln();
    if miss <= target {
        return Ok(Tts::Finite(per_read));
    }
    Ok(Tts::Finite(per_read * target / miss))
}

pub fn compute_tts(samples: &SampleSet, truth: &GroundTruth, confidence: f64) -> Result<TtsResult> {
    let n = samples.num_reads;
    let hits = samples.count_at_or_below(truth.c_min + GROUND_TOLERANCE);
    let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    let tts = tts_from_rate(p, n, samples.cpu_time_seconds, confidence)?;
    Ok(TtsResult {
        success_rate: p,
        num_reads: n,
        cpu_time_seconds: samples.cpu_time_seconds,
        tts_seconds: tts,
        confidence,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitFamily {
    Log,
    Linear,
    Quadratic,
    Exponential,
}

impl FitFamily {
    pub const ALL: [FitFamily; 4] = [
        FitFamily::Log,
        FitFamily::Linear,
        FitFamily::Quadratic,
        FitFamily::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitFamily::Log => "log",
            FitFamily::Linear => "linear",
            FitFamily::Quadratic => "quadratic",
            FitFamily::Exponential => "exponential",
        }
    }

    pub fn coefficient_count(self) -> usize {
        match self {
            FitFamily::Log | FitFamily::Linear => 2,
            FitFamily::Quadratic | FitFamily::Exponential => 3,
        }
    }

    /// Family value at `x` for coefficients `a, b, c` (`c` ignored by the
    /// two-parameter families).
    pub fn eval(self, x: f64, a: f64, b: f64, c: f64) -> f64 {
        match self {
            FitFamily::Log => a * x.log2() + b,
            FitFamily::Linear => a * x + b,
            FitFamily::Quadratic => a * x * x + b * x + c,
            FitFamily::Exponential => (x * a).exp2() * b + c,
        }
    }
}

impl fmt::Display for FitFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FitFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::parse("fit family", format!("unknown family {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: FitFamily,
    pub a: f64,
    pub b: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c: Option<f64>,
    pub rmse: f64,
    /// One flag per coefficient, set when it sits on the floor.
    pub bounds_active: Vec<bool>,
}

impl FitResult {
    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = vec![self.a, self.b];
        v.extend(self.c);
        v
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.family.eval(x, self.a, self.b, self.c.unwrap_or(0.0))
    }
}

fn check_points(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::TooFew {
            what: "fit points",
            min: 3,
            got: points.len(),
        });
    }
    if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::NonFinite("fit point"));
    }
    if points.iter().any(|&(x, _)| x <= 0.0) {
        return Err(Error::parse("fit points", "sizes must be positive"));
    }
    Ok(())
}

pub fn rmse(family: FitFamily, coef: &[f64], points: &[(f64, f64)]) -> f64 {
    let c = coef.get(2).copied().unwrap_or(0.0);
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = family.eval(x, coef[0], coef[1], c) - y;
            r * r
        })
        .sum();
    (sse / points.len() as f64).sqrt()
}

/// Unconstrained least squares on up to a handful of columns by modified
/// Gram-Schmidt with one reorthogonalization pass. `None` if rank deficient.
fn lstsq(cols: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = cols.len();
    if k == 0 {
        return Some(Vec::new());
    }
    let scale: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    if scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return None;
    }
    let mut q: Vec<Vec<f64>> = cols
        .iter()
        .zip(&scale)
        .map(|(c, s)| c.iter().map(|v| v / s).collect())
        .collect();
    let mut r = vec![vec![0.0; k]; k];
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    for j in 0..k {
        let original = dot(&q[j], &q[j]).sqrt();
        for _pass in 0..2 {
            for i in 0..j {
                let d = dot(&q[i], &q[j]);
                r[i][j] += d;
                let (head, tail) = q.split_at_mut(j);
                for (t, h) in tail[0].iter_mut().zip(&head[i]) {
                    *t -= d * h;
                }
            }
        }
        let norm = dot(&q[j], &q[j]).sqrt();
        if norm <= 1e-12 * original.max(f64::MIN_POSITIVE) {
            return None;
        }
        r[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qty: Vec<f64> = q.iter().map(|qj| dot(qj, y)).collect();
    let mut beta = vec![0.0; k];
    for j in (0..k).rev() {
        let s: f64 = (j + 1..k).map(|i| r[j][i] * beta[i]).sum();
        beta[j] = (qty[j] - s) / r[j][j];
    }
    Some(beta.iter().zip(&scale).map(|(b, s)| b / s).collect())
}

/// Least squares with every coefficient bounded below by `floor`, solved
/// exactly by trying each active set.
fn bounded_lstsq(cols: &[Vec<f64>], y: &[f64], floor: f64) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..1 << k {
        let fixed = |j: usize| mask >> j & 1 == 1;
        let target: Vec<f64> = (0..y.len())
            .map(|i| y[i] - (0..k).filter(|&j| fixed(j)).map(|j| floor * cols[j][i]).sum::<f64>())
            .collect();
        let free: Vec<Vec<f64>> = (0..k).filter(|&j| !fixed(j)).map(|j| cols[j].clone()).collect();
        let Some(sol) = lstsq(&free, &target) else {
            continue;
        };
        if sol.iter().any(|&v| !(v >= floor)) {
            continue;
        }
        let mut coef = vec![floor; k];
        let mut it = sol.into_iter();
        for (j, c) in coef.iter_mut().enumerate() {
            if !fixed(j) {
                *c = it.next().unwrap();
            }
        }
        let sse: f64 = (0..y.len())
            .map(|i| {
                let r = y[i] - (0..k).map(|j| coef[j] * cols[j][i]).sum::<f64>();
                r * r
            })
            .sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, coef));
        }
    }
    best.map(|(_, c)| c)
}

fn linear_family_columns(family: FitFamily, xs: &[f64]) -> Vec<Vec<f64>> {
    let ones = vec![1.0; xs.len()];
    match family {
        FitFamily::Log => vec![xs.iter().map(|x| x.log2()).collect(), ones],
        FitFamily::Linear => vec![xs.to_vec(), ones],
        FitFamily::Quadratic => vec![xs.iter().map(|x| x * x).collect(), xs.to_vec(), ones],
        FitFamily::Exponential => unreachable!("exponential is not linear in its coefficients"),
    }
}

/// Best `(b, c)` and its SSE for a fixed exponential rate `a`.
fn exponential_profile(a: f64, xs: &[f64], ys: &[f64]) -> (f64, [f64; 2]) {
    let cols = vec![xs.iter().map(|x| (x * a).exp2()).collect(), vec![1.0; xs.len()]];
    match bounded_lstsq(&cols, ys, COEFFICIENT_FLOOR) {
        Some(bc) => {
            let sse = xs
                .iter()
                .zip(ys)
                .map(|(x, y)| {
                    let r = (x * a).exp2() * bc[0] + bc[1] - y;
                    r * r
                })
                .sum();
            (sse, [bc[0], bc[1]])
        }
        None => (f64::INFINITY, [COEFFICIENT_FLOOR; 2]),
    }
}

/// Golden-section search for the rate on `[lo, hi]` in log space.
fn golden_rate(lo: f64, hi: f64, xs: &[f64], ys: &[f64]) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let f = |t: f64| exponential_profile(t.exp(), xs, ys).0;
    let (mut l, mut h) = (lo.ln(), hi.ln());
    let mut p = h - INV_PHI * (h - l);
    let mut q = l + INV_PHI * (h - l);
    let (mut fp, mut fq) = (f(p), f(q));
    for _ in 0..80 {
        if fp <= fq {
            h = q;
            q = p;
            fq = fp;
            p = h - INV_PHI * (h - l);
            fp = f(p);
        } else {
            l = p;
            p = q;
            fp = fq;
            q = l + INV_PHI * (h - l);
            fq = f(q);
        }
        if h - l <= 1e-15 * h.abs().max(1.0) {
            break;
        }
    }
    // the bracket ends are candidates too
    [(fp, p), (fq, q), (f(l), l), (f(h), h)]
        .into_iter()
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(v, t)| (t.exp(), v))
        .unwrap()
}

fn fit_exponential(xs: &[f64], ys: &[f64]) -> [f64; 3] {
    let x_max = xs.iter().fold(0.0f64, |m, &x| m.max(x));
    // keep 2^(a x) well inside f64 range
    let a_max = (1000.0 / x_max).max(COEFFICIENT_FLOOR * 10.0);
    let ratio = (a_max / COEFFICIENT_FLOOR).ln();
    let starts: Vec<f64> = (0..FIT_STARTS)
        .map(|s| COEFFICIENT_FLOOR * (ratio * s as f64 / (FIT_STARTS - 1) as f64).exp())
        .collect();
    let best = (0..FIT_STARTS)
        .into_par_iter()
        .map(|s| {
            let lo = starts[s.saturating_sub(1)];
            let hi = starts[(s + 1).min(FIT_STARTS - 1)];
            let (a, sse) = golden_rate(lo, hi, xs, ys);
            (sse, s, a)
        })
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
        .unwrap();
    let a = best.2.max(COEFFICIENT_FLOOR);
    let (_, [b, c]) = exponential_profile(a, xs, ys);
    [a, b, c]
}

/// Bounded least-squares fit of one family. Every coefficient is held at or
/// above [`COEFFICIENT_FLOOR`].
pub fn fit_scaling(points: &[(f64, f64)], family: FitFamily) -> Result<FitResult> {
    check_points(points)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let coef: Vec<f64> = match family {
        FitFamily::Exponential => fit_exponential(&xs, &ys).to_vec(),
        _ => bounded_lstsq(&linear_family_columns(family, &xs), &ys, COEFFICIENT_FLOOR)
            .ok_or_else(|| Error::Mismatch(format!("{family} fit is rank deficient")))?,
    };
    let rmse = rmse(family, &coef, points);
    if !rmse.is_finite() {
        return Err(Error::NonFinite("fit residual"));
    }
    Ok(FitResult {
        family,
        a: coef[0],
        b: coef[1],
        c: coef.get(2).copied(),
        rmse,
        bounds_active: coef.iter().map(|&v| v <= COEFFICIENT_FLOOR).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestFit {
    pub fits: Vec<FitResult>,
    pub best: FitFamily,
}

impl BestFit {
    pub fn get(&self, family: FitFamily) -> &FitResult {
        self.fits.iter().find(|f| f.family == family).expect("all families are fitted")
    }
}

/// Fit all four families and keep the lowest RMSE. RMSEs within
/// [`FIT_TIE_TOLERANCE`] of the data's RMS are tied and resolved in family
/// order.
pub fn select_best_fit(points: &[(f64, f64)]) -> Result<BestFit> {
    check_points(points)?;
    let fits: Vec<FitResult> = FitFamily::ALL
        .par_iter()
        .map(|&f| fit_scaling(points, f))
        .collect::<Result<_>>()?;
    let scale = (points.iter().map(|p| p.1 * p.1).sum::<f64>() / points.len() as f64).sqrt();
    let min = fits.iter().map(|f| f.rmse).fold(f64::INFINITY, f64::min);
    let best = fits
        .iter()
        .find(|f| f.rmse <= min + FIT_TIE_TOLERANCE * scale)
        .map(|f| f.family)
        .unwrap();
    Ok(BestFit { fits, best })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    /// `bin_left,bin_right,density` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,density\n");
        for b in &self.bins {
            out.push_str(&format!("{},{},{}\n", b.bin_left, b.bin_right, b.density));
        }
        out
    }

    /// Sum of density times bin width.
    pub fn mass(&self) -> f64 {
        self.bins.iter().map(|b| b.density * (b.bin_right - b.bin_left)).sum()
    }
}

/// Density histogram of approximation ratios on `[0, 1]`.
pub fn histogram_approximation_ratios(
    energies: &[f64],
    bounds: &SpectrumBounds,
    bin_count: usize,
) -> Result<Histogram> {
    if bin_count == 0 {
        return Err(Error::TooFew {
            what: "bins",
            min: 1,
            got: 0,
        });
    }
    if energies.is_empty() {
        return Err(Error::TooFew {
            what: "energies",
            min: 1,
            got: 0,
        });
    }
    let mut counts = vec![0u64; bin_count];
    for &e in energies {
        let r = approximation_ratio(e, bounds)?;
        if !(-1e-9..=1.0 + 1e-9).contains(&r) {
            return Err(Error::Mismatch(format!("energy {e} outside the spectrum bounds")));
        }
        let bin = ((r.clamp(0.0, 1.0) * bin_count as f64) as usize).min(bin_count - 1);
        counts[bin] += 1;
    }
    let total = energies.len() as u64;
    let width = 1.0 / bin_count as f64;
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| HistogramBin {
            bin_left: i as f64 * width,
            bin_right: if i + 1 == bin_count { 1.0 } else { (i + 1) as f64 * width },
            density: c as f64 / (total as f64 * width),
        })
        .collect();
    Ok(Histogram { bins, counts, total })
}
