//! Matrices of 1-periodic PT-symmetric complex functions.
//!
//! Every entry is a truncated Fourier series over the real span of
//! {1, cos(2πlx), i·sin(2πlx)}, which is exactly the class of 1-periodic
//! functions with p(-x) = conj(p(x)): the symmetry holds by construction,
//! and the mean value over a period is the constant coefficient `a[0]`,
//! which downstream determinant oracles rely on.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmatrix::CMat;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("order index k={k} out of range 1..={n}")]
    OrderIndex { k: usize, n: usize },
    #[error("coefficient matrices malformed: {0}")]
    Malformed(String),
    #[error("non-finite coefficient in entry ({i},{j}) of P_{k}")]
    NonFinite { k: usize, i: usize, j: usize },
    #[error("amplitude must be positive, got {0}")]
    Amplitude(f64),
    #[error("empty input")]
    Empty,
}

/// One scalar entry p(x) = a[0] + Σ_{l≥1} a[l]·cos(2πlx) + i·b[l]·sin(2πlx),
/// with `b` stored from l = 1 (so `b[0]` is the coefficient of i·sin(2πx)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierEntry {
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
}

impl FourierEntry {
    pub fn constant(a0: f64) -> Self {
        Self { a: vec![a0], b: vec![] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        Self { a, b }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }

    pub fn is_constant(&self) -> bool {
        self.a.iter().skip(1).all(|&v| v == 0.0) && self.b.iter().all(|&v| v == 0.0)
    }

    /// Mean value over one period; exact in this representation.
    pub fn mean(&self) -> f64 {
        self.a.first().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let mut re = self.a.first().copied().unwrap_or(0.0);
        for (l, &al) in self.a.iter().enumerate().skip(1) {
            re += al * (TAU * l as f64 * x).cos();
        }
        let mut im = 0.0;
        for (l1, &bl) in self.b.iter().enumerate() {
            im += bl * (TAU * (l1 + 1) as f64 * x).sin();
        }
        Complex64::new(re, im)
    }
}

/// Evaluation interface the linearization and the propagator consume.
/// `CoefficientSet` is the PT-symmetric implementation; the verification
/// harness supplies a deliberately broken one as a negative control.
pub trait CoefficientProvider {
    /// Differential order n.
    fn order(&self) -> usize;
    /// Matrix dimension m.
    fn dim(&self) -> usize;
    /// P_k evaluated entrywise at x, for k in 1..=n.
    fn coefficient_matrix(&self, k: usize, x: f64) -> CMat;
}

/// The n coefficient matrices P_1..P_n, each m×m, with PT-symmetric
/// 1-periodic entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSet {
    n: usize,
    m: usize,
    #[serde(rename = "P")]
    entries: Vec<Vec<Vec<FourierEntry>>>,
}

impl CoefficientSet {
    pub fn new(
        n: usize,
        m: usize,
        entries: Vec<Vec<Vec<FourierEntry>>>,
    ) -> Result<Self, CoefficientError> {
        if n < 1 || m < 1 {
            return Err(CoefficientError::Malformed(format!(
                "need n >= 1 and m >= 1, got n={n}, m={m}"
            )));
        }
        if entries.len() != n {
            return Err(CoefficientError::Malformed(format!(
                "expected {n} coefficient matrices, got {}",
                entries.len()
            )));
        }
        for (k, mat) in entries.iter().enumerate() {
            if mat.len() != m || mat.iter().any(|row| row.len() != m) {
                return Err(CoefficientError::Malformed(format!(
                    "P_{} is not {m}x{m}",
                    k + 1
                )));
            }
            for (i, row) in mat.iter().enumerate() {
                for (j, entry) in row.iter().enumerate() {
                    if !entry.is_finite() {
                        return Err(CoefficientError::NonFinite { k: k + 1, i, j });
                    }
                }
            }
        }
        Ok(Self { n, m, entries })
    }

    /// All-zero coefficients ("free" operator).
    pub fn zero(n: usize, m: usize) -> Self {
        let entries = vec![vec![vec![FourierEntry::zero(); m]; m]; n];
        Self::new(n, m, entries).expect("zero set is well-formed")
    }

    /// Deterministic random PT-symmetric set: all Fourier coefficients drawn
    /// uniformly from [-amplitude, amplitude]. L = 0 gives real constants.
    pub fn random_pt(
        n: usize,
        m: usize,
        harmonics: usize,
        amplitude: f64,
        seed: u64,
    ) -> Result<Self, CoefficientError> {
        if !(amplitude > 0.0) {
            return Err(CoefficientError::Amplitude(amplitude));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| rng.random_range(-amplitude..=amplitude);
        let entries = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        (0..m)
                            .map(|_| {
                                let a = (0..=harmonics).map(|_| draw(&mut rng)).collect();
                                let b = (0..harmonics).map(|_| draw(&mut rng)).collect();
                                FourierEntry::new(a, b)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::new(n, m, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entry(&self, k: usize, i: usize, j: usize) -> Result<&FourierEntry, CoefficientError> {
        if k < 1 || k > self.n {
            return Err(CoefficientError::OrderIndex { k, n: self.n });
        }
        Ok(&self.entries[k - 1][i][j])
    }

    pub fn eval_matrix(&self, k: usize, x: f64) -> Result<CMat, CoefficientError> {
        if k < 1 || k > self.n {
            return Err(CoefficientError::OrderIndex { k, n: self.n });
        }
        let mat = &self.entries[k - 1];
        Ok(CMat::from_fn(self.m, self.m, |i, j| mat[i][j].eval(x)))
    }

    pub fn is_constant(&self) -> bool {
        self.entries
            .iter()
            .flatten()
            .flatten()
            .all(FourierEntry::is_constant)
    }

    /// Sum of the mean values of the diagonal entries of P_k.
    pub fn diagonal_mean_sum(&self, k: usize) -> Result<f64, CoefficientError> {
        if k < 1 || k > self.n {
            return Err(CoefficientError::OrderIndex { k, n: self.n });
        }
        Ok((0..self.m).map(|i| self.entries[k - 1][i][i].mean()).sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, CoefficientError> {
        let raw: RawCoefficientSet = serde_json::from_str(text)
            .map_err(|e| CoefficientError::Malformed(e.to_string()))?;
        Self::new(raw.n, raw.m, raw.entries)
    }
}

impl<'de> Deserialize<'de> for CoefficientSet {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = RawCoefficientSet::deserialize(deserializer)?;
        CoefficientSet::new(raw.n, raw.m, raw.entries).map_err(serde::de::Error::custom)
    }
}

#[derive(Deserialize)]
struct RawCoefficientSet {
    n: usize,
    m: usize,
    #[serde(rename = "P")]
    entries: Vec<Vec<Vec<FourierEntry>>>,
}

impl CoefficientProvider for CoefficientSet {
    fn order(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.m
    }

    fn coefficient_matrix(&self, k: usize, x: f64) -> CMat {
        self.eval_matrix(k, x).expect("k validated by caller")
    }
}

/// Input forms accepted by the PT-symmetry validator.
pub enum PtCheckInput<'a> {
    /// Exponential-Fourier coefficients c_l for l = -L..=L per entry
    /// (innermost index runs over l). PT-symmetry ⇔ all c_l real.
    FourierCoefficients(&'a [Vec<Complex64>]),
    /// Per-entry samples (x, p(x)) where for every (x, ·) the point (-x, ·)
    /// is also present.
    Samples(&'a [Vec<(f64, Complex64)>]),
}

/// Outcome of a PT-symmetry check, with the worst offender localized.
#[derive(Debug, Clone, Serialize)]
pub struct PtReport {
    pub pass: bool,
    pub tol: f64,
    pub worst_residual: f64,
    /// Entry index and either harmonic l (coefficient form) or sample x.
    pub worst_location: String,
}

/// Validates PT-symmetry of raw coefficient input: max_l |Im c_l| ≤ tol in
/// coefficient form, or max_x |p(-x) - conj(p(x))| ≤ tol in sample form.
pub fn check_pt_symmetry(input: &PtCheckInput, tol: f64) -> Result<PtReport, CoefficientError> {
    let mut worst = 0.0f64;
    let mut location = String::new();
    match input {
        PtCheckInput::FourierCoefficients(entries) => {
            if entries.is_empty() || entries.iter().any(|c| c.is_empty()) {
                return Err(CoefficientError::Empty);
            }
            for (e, coeffs) in entries.iter().enumerate() {
                for (idx, c) in coeffs.iter().enumerate() {
                    let r = c.im.abs();
                    if r > worst {
                        worst = r;
                        let half = (coeffs.len() / 2) as isize;
                        location = format!("entry {e}, harmonic l={}", idx as isize - half);
                    }
                }
            }
        }
        PtCheckInput::Samples(entries) => {
            if entries.is_empty() || entries.iter().any(|s| s.is_empty()) {
                return Err(CoefficientError::Empty);
            }
            for (e, samples) in entries.iter().enumerate() {
                for &(x, v) in samples.iter() {
                    let Some(&(_, v_neg)) = samples
                        .iter()
                        .find(|(y, _)| (*y + x).abs() <= 1e-12 * x.abs().max(1.0))
                    else {
                        return Err(CoefficientError::Malformed(format!(
                            "sample grid of entry {e} is not symmetric: no point -x for x={x}"
                        )));
                    };
                    let r = (v_neg - v.conj()).norm();
                    if r > worst {
                        worst = r;
                        location = format!("entry {e}, x={x}");
                    }
                }
            }
        }
    }
    Ok(PtReport {
        pass: worst <= tol,
        tol,
        worst_residual: worst,
        worst_location: location,
    })
}

/// Converts validated real exponential-Fourier coefficients c_{-L}..c_L into
/// the internal basis: a_0 = c_0, a_l = c_l + c_{-l}, b_l = c_l - c_{-l}.
pub fn entry_from_fourier_coefficients(
    coeffs: &[Complex64],
    tol: f64,
) -> Result<FourierEntry, CoefficientError> {
    if coeffs.is_empty() || coeffs.len() % 2 == 0 {
        return Err(CoefficientError::Malformed(
            "need an odd number of coefficients c_{-L}..c_L".into(),
        ));
    }
    let report = check_pt_symmetry(&PtCheckInput::FourierCoefficients(&[coeffs.to_vec()]), tol)?;
    if !report.pass {
        return Err(CoefficientError::Malformed(format!(
            "input is not PT-symmetric: |Im c_l| = {:.3e} at {}",
            report.worst_residual, report.worst_location
        )));
    }
    let half = coeffs.len() / 2;
    let c = |l: isize| coeffs[(half as isize + l) as usize].re;
    let a = (0..=half as isize).map(|l| if l == 0 { c(0) } else { c(l) + c(-l) }).collect();
    let b = (1..=half as isize).map(|l| c(l) - c(-l)).collect();
    Ok(FourierEntry::new(a, b))
}
