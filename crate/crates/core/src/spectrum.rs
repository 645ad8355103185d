//! From monodromy to spectra: multipliers, unit-circle classification, band
//! scans over real intervals and complex rectangles, and eigenvalues of the
//! quasi-periodic boundary problems located by argument-principle counting.

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

use crate::coefficients::CoefficientProvider;
use crate::eigensolve::{self, EigenError};
use crate::propagator::{integrate_fundamental, IntegratorSettings, PropagateError};

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Propagate(#[from] PropagateError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("monodromy is numerically singular at λ = {lambda}")]
    SingularMonodromy { lambda: Complex64 },
    #[error("contour failure while isolating roots: {0}")]
    Contour(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// The multiset of Floquet multipliers at a fixed spectral parameter,
/// sorted by (modulus, phase).
#[derive(Debug, Clone)]
pub struct MultiplierSet {
    pub lambda: Complex64,
    pub multipliers: Vec<Complex64>,
}

impl MultiplierSet {
    pub fn moduli(&self) -> Vec<f64> {
        self.multipliers.iter().map(|z| z.norm()).collect()
    }

    /// min_k | |μ_k| - 1 |, the distance to the unit circle in modulus.
    pub fn circle_distance(&self) -> f64 {
        self.multipliers
            .iter()
            .map(|z| (z.norm() - 1.0).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn dimension_split(&self, tol_circle: f64) -> DimensionSplit {
        assert!(tol_circle > 0.0, "tol_circle must be positive");
        let mut split = DimensionSplit {
            inside: 0,
            on: 0,
            outside: 0,
            tol_circle,
        };
        for z in &self.multipliers {
            let r = z.norm();
            if r < 1.0 - tol_circle {
                split.inside += 1;
            } else if r > 1.0 + tol_circle {
                split.outside += 1;
            } else {
                split.on += 1;
            }
        }
        split
    }

    /// Principal arguments in [0, 2π) of the unit-circle multipliers,
    /// ascending. Empty when no multiplier lies on the circle band.
    pub fn quasimomenta(&self, tol_circle: f64) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .multipliers
            .iter()
            .filter(|z| (z.norm() - 1.0).abs() <= tol_circle)
            .map(|z| {
                let t = z.arg();
                if t < 0.0 {
                    t + TAU
                } else {
                    t
                }
            })
            .collect();
        ts.sort_by(|a, b| a.partial_cmp(b).expect("finite arguments"));
        ts
    }
}

/// Counts of multipliers strictly inside, on (within `tol_circle`), and
/// strictly outside the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionSplit {
    pub inside: usize,
    pub on: usize,
    pub outside: usize,
    pub tol_circle: f64,
}

/// Membership of a single λ in the spectrum, via the unit-circle distance.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumMembership {
    pub distance: f64,
    pub in_spectrum: bool,
}

/// One grid point of a band scan. `distance` is absent when the point's
/// integration or eigensolve failed; the scan itself never aborts.
#[derive(Debug, Clone)]
pub struct ScanSample {
    pub lambda: Complex64,
    pub distance: Option<f64>,
    pub in_spectrum: bool,
    pub error: Option<String>,
}

/// Spectral-distance grid over a real interval or a complex rectangle,
/// stored row-major: the imaginary grid index varies slowest.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub tol_circle: f64,
    pub n_re: usize,
    pub n_im: usize,
    pub samples: Vec<ScanSample>,
}

impl ScanResult {
    pub fn sample(&self, i_re: usize, i_im: usize) -> &ScanSample {
        &self.samples[i_im * self.n_re + i_re]
    }
}

/// A root of the characteristic determinant λ ↦ det(X(1,λ) - e^{it}I).
#[derive(Debug, Clone)]
pub struct TtRoot {
    pub lambda: Complex64,
    pub residual: f64,
    pub multiplicity: usize,
    /// False when Newton refinement failed and the reported location is the
    /// center of the isolating cell.
    pub refined: bool,
}

/// Eigenvalues of the boundary problem with phase t inside a rectangle.
#[derive(Debug, Clone)]
pub struct TtEigenvalues {
    pub t: f64,
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub roots: Vec<TtRoot>,
    /// Winding number of the determinant along the outer rectangle boundary.
    pub winding: i64,
}

impl TtEigenvalues {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

/// Eigenvalues of X(1, λ): exactly m·n multipliers, all nonzero.
pub fn multipliers(
    set: &dyn CoefficientProvider,
    lambda: Complex64,
    settings: &IntegratorSettings,
) -> Result<MultiplierSet, SpectrumError> {
    let mono = integrate_fundamental(set, lambda, settings)?;
    let eigs = eigensolve::eigenvalues(&mono.x1)?;
    if eigs.iter().any(|z| z.norm() == 0.0) {
        return Err(SpectrumError::SingularMonodromy { lambda });
    }
    Ok(MultiplierSet {
        lambda,
        multipliers: eigs,
    })
}

/// Spectrum membership test: some multiplier lies within `tol_circle` of the
/// unit circle.
pub fn in_spectrum(
    set: &dyn CoefficientProvider,
    lambda: Complex64,
    tol_circle: f64,
    settings: &IntegratorSettings,
) -> Result<SpectrumMembership, SpectrumError> {
    assert!(tol_circle > 0.0, "tol_circle must be positive");
    let ms = multipliers(set, lambda, settings)?;
    let distance = ms.circle_distance();
    Ok(SpectrumMembership {
        distance,
        in_spectrum: distance <= tol_circle,
    })
}

/// Scans `count` evenly spaced real λ in [λ_min, λ_max]. Per-point failures
/// are recorded in the sample, not propagated.
pub fn scan_real(
    set: &dyn CoefficientProvider,
    lambda_min: f64,
    lambda_max: f64,
    count: usize,
    tol_circle: f64,
    settings: &IntegratorSettings,
) -> Result<ScanResult, SpectrumError> {
    if count < 2 || !(lambda_min < lambda_max) {
        return Err(SpectrumError::InvalidArgument(format!(
            "need λ_min < λ_max and at least 2 points, got [{lambda_min}, {lambda_max}] with {count}"
        )));
    }
    let samples = (0..count)
        .map(|i| {
            let lam = lambda_min + (lambda_max - lambda_min) * i as f64 / (count - 1) as f64;
            scan_point(set, Complex64::new(lam, 0.0), tol_circle, settings)
        })
        .collect();
    Ok(ScanResult {
        tol_circle,
        n_re: count,
        n_im: 1,
        samples,
    })
}

/// Scans a complex rectangle on an (n_re × n_im) grid, row-major with the
/// imaginary index slowest. A grid symmetric about the real axis pairs the
/// rows i_im and n_im-1-i_im.
pub fn scan_region(
    set: &dyn CoefficientProvider,
    re_range: (f64, f64),
    im_range: (f64, f64),
    n_re: usize,
    n_im: usize,
    tol_circle: f64,
    settings: &IntegratorSettings,
) -> Result<ScanResult, SpectrumError> {
    if n_re < 2 || n_im < 2 || !(re_range.0 < re_range.1) || !(im_range.0 < im_range.1) {
        return Err(SpectrumError::InvalidArgument(format!(
            "need a nondegenerate rectangle and ≥2 points per axis, got re {re_range:?} ({n_re}), im {im_range:?} ({n_im})"
        )));
    }
    let mut samples = Vec::with_capacity(n_re * n_im);
    for i_im in 0..n_im {
        let im = im_range.0 + (im_range.1 - im_range.0) * i_im as f64 / (n_im - 1) as f64;
        for i_re in 0..n_re {
            let re = re_range.0 + (re_range.1 - re_range.0) * i_re as f64 / (n_re - 1) as f64;
            samples.push(scan_point(set, Complex64::new(re, im), tol_circle, settings));
        }
    }
    Ok(ScanResult {
        tol_circle,
        n_re,
        n_im,
        samples,
    })
}

fn scan_point(
    set: &dyn CoefficientProvider,
    lambda: Complex64,
    tol_circle: f64,
    settings: &IntegratorSettings,
) -> ScanSample {
    match in_spectrum(set, lambda, tol_circle, settings) {
        Ok(m) => ScanSample {
            lambda,
            distance: Some(m.distance),
            in_spectrum: m.in_spectrum,
            error: None,
        },
        Err(e) => ScanSample {
            lambda,
            distance: None,
            in_spectrum: false,
            error: Some(e.to_string()),
        },
    }
}

/// D_t(λ) = det(X(1, λ) - e^{it}·I).
pub fn char_det(
    set: &dyn CoefficientProvider,
    lambda: Complex64,
    t: f64,
    settings: &IntegratorSettings,
) -> Result<Complex64, SpectrumError> {
    let mono = integrate_fundamental(set, lambda, settings)?;
    let mut shifted = mono.x1;
    shifted.shift_diagonal(Complex64::from_polar(1.0, t));
    Ok(eigensolve::determinant(&shifted))
}

// ---------------------------------------------------------------------------
// Argument-principle root finder for D_t.
// ---------------------------------------------------------------------------

const MERGE_TOL: f64 = 1e-7;
const MAX_SUBDIVISION_DEPTH: usize = 64;
const MAX_EDGE_REFINEMENT: usize = 26;

#[derive(Debug, Clone, Copy)]
struct Rect {
    re: (f64, f64),
    im: (f64, f64),
}

impl Rect {
    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re.0 + self.re.1), 0.5 * (self.im.0 + self.im.1))
    }

    fn diameter(&self) -> f64 {
        (self.re.1 - self.re.0).hypot(self.im.1 - self.im.0)
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re.0, self.im.0),
            Complex64::new(self.re.1, self.im.0),
            Complex64::new(self.re.1, self.im.1),
            Complex64::new(self.re.0, self.im.1),
        ]
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re.0 - slack
            && z.re <= self.re.1 + slack
            && z.im >= self.im.0 - slack
            && z.im <= self.im.1 + slack
    }

    /// Splits the longer side at the given fraction.
    fn split(&self, fraction: f64) -> (Rect, Rect) {
        if self.re.1 - self.re.0 >= self.im.1 - self.im.0 {
            let mid = self.re.0 + fraction * (self.re.1 - self.re.0);
            (
                Rect {
                    re: (self.re.0, mid),
                    im: self.im,
                },
                Rect {
                    re: (mid, self.re.1),
                    im: self.im,
                },
            )
        } else {
            let mid = self.im.0 + fraction * (self.im.1 - self.im.0);
            (
                Rect {
                    re: self.re,
                    im: (self.im.0, mid),
                },
                Rect {
                    re: self.re,
                    im: (mid, self.im.1),
                },
            )
        }
    }

    fn inflated(&self, amount: f64) -> Rect {
        Rect {
            re: (self.re.0 - amount, self.re.1 + amount),
            im: (self.im.0 - amount, self.im.1 + amount),
        }
    }
}

struct DetFn<'a> {
    set: &'a dyn CoefficientProvider,
    t: f64,
    settings: &'a IntegratorSettings,
}

impl DetFn<'_> {
    fn eval(&self, lambda: Complex64) -> Result<Complex64, SpectrumError> {
        char_det(self.set, lambda, self.t, self.settings)
    }
}

/// Locates all zeros of D_t inside a rectangle by recursive winding-number
/// counting on the boundary, then Newton refinement with a central-difference
/// derivative. Roots closer than 1e-7 merge, with multiplicity taken from
/// the winding count of the isolating cell.
pub fn tt_eigenvalues(
    set: &dyn CoefficientProvider,
    t: f64,
    re_range: (f64, f64),
    im_range: (f64, f64),
    settings: &IntegratorSettings,
    residual_tol: f64,
) -> Result<TtEigenvalues, SpectrumError> {
    if !(0.0..TAU).contains(&t) {
        return Err(SpectrumError::InvalidArgument(format!(
            "t must lie in [0, 2π), got {t}"
        )));
    }
    if !(re_range.0 < re_range.1) || !(im_range.0 < im_range.1) {
        return Err(SpectrumError::InvalidArgument(format!(
            "degenerate rectangle re {re_range:?} × im {im_range:?}"
        )));
    }
    if !(residual_tol > 0.0) {
        return Err(SpectrumError::InvalidArgument(format!(
            "residual_tol must be positive, got {residual_tol}"
        )));
    }

    let f = DetFn { set, t, settings };
    let rect = Rect {
        re: re_range,
        im: im_range,
    };

    let winding = winding_with_retries(&f, rect)?;
    let mut roots = Vec::new();
    if winding > 0 {
        isolate(&f, rect, winding as usize, residual_tol, 0, &mut roots)?;
    }
    merge_close_roots(&mut roots);
    roots.sort_by(|a, b| {
        (a.lambda.re, a.lambda.im)
            .partial_cmp(&(b.lambda.re, b.lambda.im))
            .expect("finite roots")
    });
    Ok(TtEigenvalues {
        t,
        re_range,
        im_range,
        roots,
        winding,
    })
}

fn winding_with_retries(f: &DetFn, rect: Rect) -> Result<i64, SpectrumError> {
    // Retry with slightly inflated contours when a zero sits on (or hugs)
    // the boundary. A root exactly on the requested boundary is ambiguous
    // at this scale anyway.
    let base = rect.diameter();
    let mut last_err = None;
    for inflation in [0.0, 1e-9, 3.1e-7, 2.3e-5] {
        match boundary_winding(f, rect.inflated(inflation * base)) {
            Ok(w) => return Ok(w),
            Err(e) => last_err = Some(e),
        }
    }
    Err(match last_err.expect("at least one attempt") {
        ContourIssue::Numeric(e) => e,
        ContourIssue::ZeroOnContour(z) => SpectrumError::Contour(format!(
            "determinant vanishes on every perturbed contour near λ = {z}"
        )),
        ContourIssue::Unresolved(z) => SpectrumError::Contour(format!(
            "phase continuation could not be resolved near λ = {z}"
        )),
    })
}

enum ContourIssue {
    Numeric(SpectrumError),
    ZeroOnContour(Complex64),
    Unresolved(Complex64),
}

impl From<SpectrumError> for ContourIssue {
    fn from(e: SpectrumError) -> Self {
        ContourIssue::Numeric(e)
    }
}

/// Winding number of f along the rectangle boundary, counterclockwise, by
/// phase continuation with adaptive edge refinement: successive samples must
/// differ in phase by at most π/2.
fn boundary_winding(f: &DetFn, rect: Rect) -> Result<i64, ContourIssue> {
    let corners = rect.corners();
    // Magnitude floor, relative to the largest |D| seen at the corners.
    let mut corner_vals = [Complex64::ZERO; 4];
    let mut scale = 0.0f64;
    for (i, &z) in corners.iter().enumerate() {
        let v = f.eval(z)?;
        corner_vals[i] = v;
        scale = scale.max(v.norm());
    }
    if scale == 0.0 {
        return Err(ContourIssue::ZeroOnContour(corners[0]));
    }
    let floor = 1e-13 * scale;
    for (i, &v) in corner_vals.iter().enumerate() {
        if v.norm() < floor {
            return Err(ContourIssue::ZeroOnContour(corners[i]));
        }
    }

    let mut total_phase = 0.0f64;
    for i in 0..4 {
        let (z0, z1) = (corners[i], corners[(i + 1) % 4]);
        let (v0, v1) = (corner_vals[i], corner_vals[(i + 1) % 4]);
        total_phase += edge_phase(f, z0, v0, z1, v1, floor)?;
    }
    let w = total_phase / TAU;
    let rounded = w.round();
    if (w - rounded).abs() > 0.25 {
        return Err(ContourIssue::Unresolved(rect.center()));
    }
    Ok(rounded as i64)
}

/// Accumulated phase of f along one edge, refining the sampling wherever the
/// phase jump between neighbours exceeds π/2.
fn edge_phase(
    f: &DetFn,
    z0: Complex64,
    v0: Complex64,
    z1: Complex64,
    v1: Complex64,
    floor: f64,
) -> Result<f64, ContourIssue> {
    const INITIAL_PANELS: usize = 8;
    let mut total = 0.0;
    let mut prev_z = z0;
    let mut prev_v = v0;
    for k in 1..=INITIAL_PANELS {
        let frac = k as f64 / INITIAL_PANELS as f64;
        let (z, v) = if k == INITIAL_PANELS {
            (z1, v1)
        } else {
            let z = z0 + (z1 - z0) * frac;
            let v = f.eval(z)?;
            if v.norm() < floor {
                return Err(ContourIssue::ZeroOnContour(z));
            }
            (z, v)
        };
        total += panel_phase(f, prev_z, prev_v, z, v, floor, 0)?;
        prev_z = z;
        prev_v = v;
    }
    Ok(total)
}

fn panel_phase(
    f: &DetFn,
    z0: Complex64,
    v0: Complex64,
    z1: Complex64,
    v1: Complex64,
    floor: f64,
    depth: usize,
) -> Result<f64, ContourIssue> {
    let jump = (v1 / v0).arg();
    if jump.abs() <= std::f64::consts::FRAC_PI_2 {
        return Ok(jump);
    }
    if depth >= MAX_EDGE_REFINEMENT {
        return Err(ContourIssue::Unresolved(z0));
    }
    let zm = (z0 + z1) * 0.5;
    let vm = f.eval(zm)?;
    if vm.norm() < floor {
        return Err(ContourIssue::ZeroOnContour(zm));
    }
    Ok(panel_phase(f, z0, v0, zm, vm, floor, depth + 1)?
        + panel_phase(f, zm, vm, z1, v1, floor, depth + 1)?)
}

/// Recursively subdivides until each cell isolates one zero (or a cluster
/// tighter than the merge tolerance), then refines by Newton.
fn isolate(
    f: &DetFn,
    rect: Rect,
    count: usize,
    residual_tol: f64,
    depth: usize,
    out: &mut Vec<TtRoot>,
) -> Result<(), SpectrumError> {
    debug_assert!(count > 0);

    if count == 1 {
        if let Some((z, residual)) = newton_refine(f, rect.center(), rect, residual_tol) {
            out.push(TtRoot {
                lambda: z,
                residual,
                multiplicity: 1,
                refined: true,
            });
            return Ok(());
        }
    }

    if rect.diameter() < MERGE_TOL || depth >= MAX_SUBDIVISION_DEPTH {
        // Cluster (or persistent Newton failure): report the cell center,
        // polished if possible.
        let center = rect.center();
        let (lambda, residual, refined) = match newton_refine(f, center, rect, residual_tol) {
            Some((z, r)) => (z, r, true),
            None => {
                let r = f.eval(center).map(|v| v.norm()).unwrap_or(f64::NAN);
                (center, r, false)
            }
        };
        out.push(TtRoot {
            lambda,
            residual,
            multiplicity: count,
            refined,
        });
        return Ok(());
    }

    // Split the longer side; nudge the cut when a root lands on it.
    for fraction in [0.5, 0.55, 0.43, 0.61, 0.37] {
        let (ra, rb) = rect.split(fraction);
        let wa = match winding_with_retries(f, ra) {
            Ok(w) => w,
            Err(_) => continue,
        };
        let wb = match winding_with_retries(f, rb) {
            Ok(w) => w,
            Err(_) => continue,
        };
        if wa < 0 || wb < 0 || (wa + wb) as usize != count {
            continue;
        }
        if wa > 0 {
            isolate(f, ra, wa as usize, residual_tol, depth + 1, out)?;
        }
        if wb > 0 {
            isolate(f, rb, wb as usize, residual_tol, depth + 1, out)?;
        }
        return Ok(());
    }
    Err(SpectrumError::Contour(format!(
        "could not split cell around {} cleanly",
        rect.center()
    )))
}

/// Newton iteration with central-difference derivative. Returns the refined
/// root and its residual, or None when the iteration leaves the cell, the
/// derivative degenerates, or the residual target is missed.
fn newton_refine(
    f: &DetFn,
    start: Complex64,
    rect: Rect,
    residual_tol: f64,
) -> Option<(Complex64, f64)> {
    let slack = 0.5 * rect.diameter() + 1e-9;
    let mut z = start;
    let mut best: Option<(Complex64, f64)> = None;
    for _ in 0..50 {
        let fz = f.eval(z).ok()?;
        let r = fz.norm();
        if best.map_or(true, |(_, br)| r < br) {
            best = Some((z, r));
        }
        let h = 1e-4 * z.norm().max(1.0);
        let fp = f.eval(z + h).ok()?;
        let fm = f.eval(z - h).ok()?;
        let df = (fp - fm) / (2.0 * h);
        if df.norm() < 1e-300 {
            break;
        }
        let step = fz / df;
        z -= step;
        if !rect.contains(z, slack) {
            return None;
        }
        if step.norm() <= 1e-13 * z.norm().max(1.0) {
            let fz = f.eval(z).ok()?;
            let r = fz.norm();
            if best.map_or(true, |(_, br)| r < br) {
                best = Some((z, r));
            }
            break;
        }
    }
    let (z, r) = best?;
    // The refined root must stay inside its isolating cell.
    if r <= residual_tol && rect.contains(z, 1e-7 + 1e-12 * z.norm()) {
        Some((z, r))
    } else {
        None
    }
}

fn merge_close_roots(roots: &mut Vec<TtRoot>) {
    let mut merged: Vec<TtRoot> = Vec::with_capacity(roots.len());
    for root in roots.drain(..) {
        if let Some(existing) = merged
            .iter_mut()
            .find(|r| (r.lambda - root.lambda).norm() < MERGE_TOL)
        {
            existing.multiplicity += root.multiplicity;
            if root.residual < existing.residual {
                existing.lambda = root.lambda;
                existing.residual = root.residual;
                existing.refined = root.refined;
            }
        } else {
            merged.push(root);
        }
    }
    *roots = merged;
}
