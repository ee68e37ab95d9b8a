//! Spatial channel model: ULA geometry, covariance synthesis, correlated
//! Rayleigh draws, and assembly of the received training signal.
//!
//! Covariances follow two constructions: the exponential Toeplitz model
//! (tractable, used for the compaction analysis) and the practical model
//! `R = D_a B D_a^H` built from a mean steering direction and an angular
//! spread with Gaussian or uniform law.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, HermitianEig};
use crate::rng::complex_gaussian_vector;

/// Relative Hermitian tolerance for covariance inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative PSD tolerance: eigenvalues may undershoot zero by this fraction
/// of the trace.
pub const PSD_TOL: f64 = 1e-10;
/// Eigenvalue floor (relative to the largest) applied when taking covariance
/// square roots for channel draws.
pub const SQRT_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Geometry and angular spread
// ---------------------------------------------------------------------------

/// Uniform linear array description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlaGeometry {
    /// Number of antenna elements M.
    pub antenna_count: usize,
    /// Element spacing over wavelength, d/lambda.
    pub spacing_over_wavelength: f64,
    /// Number of multipath components Q.
    pub path_count: usize,
}

impl UlaGeometry {
    pub fn new(antenna_count: usize, spacing_over_wavelength: f64, path_count: usize) -> Result<Self> {
        if antenna_count == 0 {
            return Err(Error::param("antenna_count must be >= 1"));
        }
        if !(spacing_over_wavelength > 0.0) {
            return Err(Error::param("spacing_over_wavelength must be > 0"));
        }
        if path_count == 0 {
            return Err(Error::param("path_count must be >= 1"));
        }
        Ok(Self {
            antenna_count,
            spacing_over_wavelength,
            path_count,
        })
    }

    /// Half-wavelength spacing, single path.
    pub fn half_wavelength(antenna_count: usize) -> Self {
        Self {
            antenna_count,
            spacing_over_wavelength: 0.5,
            path_count: 1,
        }
    }

    /// Spatial frequency omega = 2 pi (d/lambda) sin(theta).
    pub fn omega(&self, theta: f64) -> f64 {
        std::f64::consts::TAU * self.spacing_over_wavelength * theta.sin()
    }
}

/// Angular spread law of the multipath cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadDistribution {
    Gaussian,
    Uniform,
}

/// Angular spread seen at the base station: arrivals occupy
/// `[theta_start, theta_start + span]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularSpreadParams {
    /// Lower limit of the spread, radians.
    pub theta_start: f64,
    /// Span of the spread, radians (>= 0).
    pub span: f64,
    pub distribution: SpreadDistribution,
    /// Spread overlap between co-scheduled users; scenario-level bookkeeping.
    pub overlap: f64,
}

impl AngularSpreadParams {
    pub fn new(theta_start: f64, span: f64, distribution: SpreadDistribution, overlap: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta_start) {
            return Err(Error::param(format!(
                "theta_start {theta_start} outside [0, pi/2)"
            )));
        }
        if !(span >= 0.0) || !span.is_finite() {
            return Err(Error::param("span must be finite and >= 0"));
        }
        Ok(Self {
            theta_start,
            span,
            distribution,
            overlap,
        })
    }

    /// Center of the spread; the steering direction used for `D_a`.
    pub fn mean_angle(&self) -> f64 {
        self.theta_start + 0.5 * self.span
    }

    /// Angular standard deviation. The uniform law on a span has
    /// sigma = span / (2 sqrt(3)); the Gaussian law is variance-matched so
    /// both distributions describe the same spread width.
    pub fn sigma_theta(&self) -> f64 {
        self.span / (2.0 * 3.0_f64.sqrt())
    }

    /// Spatial-frequency standard deviation
    /// sigma_omega = 2 pi (d/lambda) sigma_theta cos(theta).
    pub fn sigma_omega(&self, geom: &UlaGeometry, mean_angle: f64) -> f64 {
        std::f64::consts::TAU * geom.spacing_over_wavelength * self.sigma_theta() * mean_angle.cos()
    }

    /// Spatial-frequency half-width delta_omega of the uniform law.
    pub fn delta_omega(&self, geom: &UlaGeometry, mean_angle: f64) -> f64 {
        std::f64::consts::TAU * geom.spacing_over_wavelength * 0.5 * self.span * mean_angle.cos()
    }
}

// ---------------------------------------------------------------------------
// Covariance matrix
// ---------------------------------------------------------------------------

/// Hermitian PSD covariance with cached eigendecomposition and square root.
pub struct CovarianceMatrix {
    entries: DMatrix<Complex64>,
    eig: OnceLock<HermitianEig>,
    sqrt: OnceLock<DMatrix<Complex64>>,
}

impl std::fmt::Debug for CovarianceMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CovarianceMatrix")
            .field("dim", &self.dim())
            .field("trace", &self.trace())
            .finish()
    }
}

impl Clone for CovarianceMatrix {
    fn clone(&self) -> Self {
        let c = Self {
            entries: self.entries.clone(),
            eig: OnceLock::new(),
            sqrt: OnceLock::new(),
        };
        if let Some(e) = self.eig.get() {
            let _ = c.eig.set(e.clone());
        }
        if let Some(s) = self.sqrt.get() {
            let _ = c.sqrt.set(s.clone());
        }
        c
    }
}

impl CovarianceMatrix {
    /// Wraps a matrix, requiring Hermitian symmetry to `HERMITIAN_TOL`
    /// (relative Frobenius). The stored matrix is exactly symmetrized.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidCovariance(format!(
                "matrix is {}x{}, expected square",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidCovariance("empty matrix".into()));
        }
        let defect = linalg::hermitian_defect(&entries);
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidCovariance(format!(
                "Hermitian defect {defect:.3e} exceeds {HERMITIAN_TOL:.0e}"
            )));
        }
        Ok(Self {
            entries: linalg::hermitize(&entries),
            eig: OnceLock::new(),
            sqrt: OnceLock::new(),
        })
    }

    pub fn identity(m: usize) -> Self {
        Self::new(DMatrix::identity(m, m)).expect("identity is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.entries)
    }

    /// Covariance scaled by a nonnegative link gain.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::param("scale must be >= 0"));
        }
        Self::new(self.entries.scale(alpha))
    }

    /// Cached eigendecomposition, eigenvalues descending.
    pub fn eig(&self) -> &HermitianEig {
        self.eig.get_or_init(|| linalg::hermitian_eig(&self.entries))
    }

    /// Fails if any eigenvalue undershoots `-PSD_TOL * trace`.
    pub fn validate_psd(&self) -> Result<()> {
        let tol = PSD_TOL * self.trace().abs() + f64::MIN_POSITIVE;
        let min = self.eig().values.last().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(Error::InvalidCovariance(format!(
                "eigenvalue {min:.3e} below -{tol:.3e}"
            )));
        }
        Ok(())
    }

    /// Matrix power on the eigenspace above `rel_floor * lambda_max`.
    pub fn power(&self, p: f64, rel_floor: f64) -> DMatrix<Complex64> {
        self.eig().power(p, rel_floor)
    }

    /// Cached PSD square root with the `SQRT_FLOOR` truncation.
    pub fn sqrt(&self) -> &DMatrix<Complex64> {
        self.sqrt.get_or_init(|| self.power(0.5, SQRT_FLOOR))
    }

    /// Pseudo-inverse with the default floor.
    pub fn pinv(&self) -> DMatrix<Complex64> {
        self.eig().pinv()
    }
}

// ---------------------------------------------------------------------------
// Link gains
// ---------------------------------------------------------------------------

/// Attenuations alpha_lc between each user's cell and each base station.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    alpha: DMatrix<f64>,
}

impl LinkGains {
    pub fn new(alpha: DMatrix<f64>) -> Result<Self> {
        if alpha.nrows() != alpha.ncols() {
            return Err(Error::param("alpha must be square"));
        }
        if alpha.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::param("alpha entries must be >= 0"));
        }
        for c in 0..alpha.nrows() {
            if !(alpha[(c, c)] > 0.0) {
                return Err(Error::param("direct-link gains alpha_cc must be > 0"));
            }
        }
        Ok(Self { alpha })
    }

    /// Interference-limited layout: direct links at 1, cross links at 1/beta.
    pub fn uniform(cells: usize, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::param("beta must be > 0"));
        }
        let alpha = DMatrix::from_fn(cells, cells, |l, c| if l == c { 1.0 } else { 1.0 / beta });
        Self::new(alpha)
    }

    pub fn cells(&self) -> usize {
        self.alpha.nrows()
    }

    /// Attenuation from cell `l`'s user toward base station `c`.
    pub fn alpha(&self, l: usize, c: usize) -> f64 {
        self.alpha[(l, c)]
    }

    /// beta_lc = alpha_cc / alpha_lc.
    pub fn beta_ratio(&self, l: usize, c: usize) -> f64 {
        self.alpha[(c, c)] / self.alpha[(l, c)]
    }
}

// ---------------------------------------------------------------------------
// Training sequences
// ---------------------------------------------------------------------------

/// Length-tau pilot with constant per-symbol power P/tau.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSequence {
    symbols: DVector<Complex64>,
    power: f64,
}

impl TrainingSequence {
    pub fn new(symbols: DVector<Complex64>, power: f64) -> Result<Self> {
        let tau = symbols.len();
        if tau == 0 {
            return Err(Error::param("training sequence must be nonempty"));
        }
        if !(power > 0.0) {
            return Err(Error::param("training power must be > 0"));
        }
        let per_symbol = power / tau as f64;
        for (j, s) in symbols.iter().enumerate() {
            let p = s.norm_sqr();
            if (p - per_symbol).abs() > 1e-9 * per_symbol {
                return Err(Error::param(format!(
                    "symbol {j} power {p:.6e} != P/tau = {per_symbol:.6e}"
                )));
            }
        }
        Ok(Self { symbols, power })
    }

    /// A set of `count` mutually orthogonal DFT pilots of length `tau`, each
    /// with total power `power`.
    pub fn orthogonal_set(tau: usize, count: usize, power: f64) -> Result<Vec<Self>> {
        if count > tau {
            return Err(Error::param(format!(
                "cannot build {count} orthogonal sequences of length {tau}"
            )));
        }
        let amp = (power / tau as f64).sqrt();
        (0..count)
            .map(|i| {
                let s = DVector::from_fn(tau, |j, _| {
                    let phase = -std::f64::consts::TAU * (i * j) as f64 / tau as f64;
                    Complex64::new(phase.cos(), phase.sin()).scale(amp)
                });
                Self::new(s, power)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn symbols(&self) -> &DVector<Complex64> {
        &self.symbols
    }

    /// s^H s; equals the total power P by the symbol normalization.
    pub fn energy(&self) -> f64 {
        self.symbols.iter().map(|s| s.norm_sqr()).sum()
    }

    /// True when s_i^H s_j vanishes to tolerance.
    pub fn orthogonal_to(&self, other: &Self) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let dot: Complex64 = self
            .symbols
            .iter()
            .zip(other.symbols.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        dot.norm() <= 1e-9 * (self.energy() * other.energy()).sqrt()
    }

    /// The training matrix S = s (x) I_M, of shape (M tau) x M.
    pub fn training_matrix(&self, m: usize) -> DMatrix<Complex64> {
        let tau = self.len();
        let mut s = DMatrix::zeros(m * tau, m);
        for t in 0..tau {
            for i in 0..m {
                s[(t * m + i, i)] = self.symbols[t];
            }
        }
        s
    }

    /// Matched-filter output S^H y / (s^H s). With unit-energy-per-sequence
    /// normalization this is the paper-style S^H y / tau; dividing by the
    /// actual sequence energy keeps the noise-free single-user output equal
    /// to the channel for any total power.
    pub fn correlate(&self, y: &DVector<Complex64>, m: usize) -> Result<DVector<Complex64>> {
        let tau = self.len();
        if y.len() != m * tau {
            return Err(Error::DimensionMismatch {
                expected: m * tau,
                got: y.len(),
            });
        }
        let energy = self.energy();
        let mut out = DVector::zeros(m);
        for t in 0..tau {
            let c = self.symbols[t].conj();
            for i in 0..m {
                out[i] += c * y[t * m + i];
            }
        }
        Ok(out.scale(1.0 / energy))
    }
}

// ---------------------------------------------------------------------------
// Channels and received signal
// ---------------------------------------------------------------------------

/// One fading realization h together with its owner.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: DVector<Complex64>,
    pub user: usize,
    pub cell: usize,
}

impl ChannelRealization {
    pub fn with_owner(mut self, user: usize, cell: usize) -> Self {
        self.user = user;
        self.cell = cell;
        self
    }
}

/// Stacked received training signal y of length M tau.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    pub y: DVector<Complex64>,
    pub noise_variance: f64,
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Exponential Toeplitz correlation: unit diagonal, rho^{|i-j|} below it and
/// the conjugate mirror above.
pub fn exponential_correlation(m: usize, rho: Complex64) -> Result<CovarianceMatrix> {
    if m == 0 {
        return Err(Error::param("M must be >= 1"));
    }
    if rho.norm() > 1.0 + 1e-15 {
        return Err(Error::param(format!("|rho| = {} exceeds 1", rho.norm())));
    }
    let entries = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else if i > j {
            rho.powu((i - j) as u32)
        } else {
            rho.conj().powu((j - i) as u32)
        }
    });
    CovarianceMatrix::new(entries)
}

/// ULA response a(omega) with unit-modulus entries exp(-j n omega).
pub fn ula_response(geom: &UlaGeometry, theta: f64) -> DVector<Complex64> {
    let omega = geom.omega(theta);
    DVector::from_fn(geom.antenna_count, |n, _| {
        let phase = -(n as f64) * omega;
        Complex64::new(phase.cos(), phase.sin())
    })
}

/// Multipath superposition h = sum_i gamma_i a(omega_i).
pub fn multipath_channel(geom: &UlaGeometry, gains: &[Complex64], angles: &[f64]) -> Result<DVector<Complex64>> {
    if gains.len() != angles.len() {
        return Err(Error::DimensionMismatch {
            expected: gains.len(),
            got: angles.len(),
        });
    }
    let mut h = DVector::zeros(geom.antenna_count);
    for (g, &th) in gains.iter().zip(angles.iter()) {
        h += ula_response(geom, th).scale(1.0) * *g;
    }
    Ok(h)
}

/// Practical covariance R = D_a B D_a^H for a spread centered on
/// `mean_angle`. B is the characteristic-function Toeplitz of the spread law:
/// Gaussian `exp(-((m-n) sigma_omega)^2 / 2)` or the uniform sinc form with
/// the m = n limit fixed at 1. Zero spread collapses B to all-ones.
pub fn practical_correlation(
    geom: &UlaGeometry,
    spread: &AngularSpreadParams,
    mean_angle: f64,
) -> Result<CovarianceMatrix> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&mean_angle) {
        return Err(Error::param(format!("mean_angle {mean_angle} outside [0, pi/2)")));
    }
    let m = geom.antenna_count;
    let omega = geom.omega(mean_angle);
    let b = |lag: f64| -> f64 {
        match spread.distribution {
            SpreadDistribution::Gaussian => {
                let s = spread.sigma_omega(geom, mean_angle);
                (-0.5 * (lag * s).powi(2)).exp()
            }
            SpreadDistribution::Uniform => {
                let d = spread.delta_omega(geom, mean_angle);
                let x = lag * d;
                if x.abs() < 1e-12 {
                    1.0
                } else {
                    x.sin() / x
                }
            }
        }
    };
    let entries = DMatrix::from_fn(m, m, |i, j| {
        let lag = i as f64 - j as f64;
        let phase = -lag * omega;
        Complex64::new(phase.cos(), phase.sin()).scale(b(lag))
    });
    CovarianceMatrix::new(entries)
}

/// Zero-mean complex Gaussian draw with covariance R, via the cached
/// truncated square root.
pub fn draw_channel<R: Rng + ?Sized>(r: &CovarianceMatrix, rng: &mut R) -> Result<ChannelRealization> {
    r.validate_psd()?;
    let g = complex_gaussian_vector(rng, r.dim());
    let h = r.sqrt() * g;
    Ok(ChannelRealization { h, user: 0, cell: 0 })
}

/// Builds y = sum_i (s_i (x) I_M) sum_{l in K_i} h_l + n with
/// n ~ CN(0, sigma2 I). Sequences must be mutually orthogonal and all
/// channels must share the same length.
pub fn assemble_received<R: Rng + ?Sized>(
    groups: &[(&TrainingSequence, Vec<&ChannelRealization>)],
    sigma2: f64,
    rng: &mut R,
) -> Result<ReceivedSignal> {
    if groups.is_empty() {
        return Err(Error::config("no sequence groups"));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::param("sigma2 must be >= 0"));
    }
    let tau = groups[0].0.len();
    for (s, _) in groups {
        if s.len() != tau {
            return Err(Error::config("sequences must share one length tau"));
        }
    }
    for (i, (si, _)) in groups.iter().enumerate() {
        for (sj, _) in groups.iter().skip(i + 1) {
            if !si.orthogonal_to(sj) {
                return Err(Error::config("training sequences are not mutually orthogonal"));
            }
        }
    }
    let m = groups
        .iter()
        .flat_map(|(_, chans)| chans.iter())
        .map(|c| c.h.len())
        .next()
        .ok_or_else(|| Error::config("no channels in any group"))?;
    let mut y = DVector::<Complex64>::zeros(m * tau);
    for (seq, chans) in groups {
        let mut total = DVector::<Complex64>::zeros(m);
        for ch in chans {
            if ch.h.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: ch.h.len(),
                });
            }
            total += &ch.h;
        }
        for t in 0..tau {
            let s = seq.symbols()[t];
            for i in 0..m {
                y[t * m + i] += s * total[i];
            }
        }
    }
    if sigma2 > 0.0 {
        let scale = sigma2.sqrt();
        for v in y.iter_mut() {
            *v += crate::rng::complex_standard_normal(rng).scale(scale);
        }
    }
    Ok(ReceivedSignal {
        y,
        noise_variance: sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngFactory;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exponential_small_cases() {
        let r = exponential_correlation(2, c(0.5, 0.0)).unwrap();
        assert_relative_eq!(r.entries()[(0, 1)].re, 0.5);
        assert_relative_eq!(r.entries()[(1, 0)].re, 0.5);
        assert_relative_eq!(r.entries()[(0, 0)].re, 1.0);

        let id = exponential_correlation(3, c(0.0, 0.0)).unwrap();
        assert!(linalg::frobenius(&(id.entries() - DMatrix::<Complex64>::identity(3, 3))) < 1e-14);
    }

    #[test]
    fn exponential_two_by_two_eigenvalues() {
        // 2x2 eigenvalues are 1 +/- rho by hand
        let r = exponential_correlation(2, c(0.9, 0.0)).unwrap();
        let ev = &r.eig().values;
        assert_relative_eq!(ev[0], 1.9, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn exponential_rejects_large_rho() {
        assert!(exponential_correlation(4, c(1.2, 0.0)).is_err());
    }

    #[test]
    fn exponential_complex_rho_is_hermitian_psd() {
        let r = exponential_correlation(6, c(0.6, 0.5)).unwrap();
        assert!(linalg::hermitian_defect(r.entries()) < 1e-12);
        r.validate_psd().unwrap();
    }

    #[test]
    fn ula_response_basics() {
        let geom = UlaGeometry::half_wavelength(4);
        let a0 = ula_response(&geom, 0.0);
        for v in a0.iter() {
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-14);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-14);
        }
        let g2 = UlaGeometry::half_wavelength(2);
        let a = ula_response(&g2, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(a[1].re, -1.0, epsilon = 1e-12);
        assert!(a[1].im.abs() < 1e-12);
        // theta = 30 deg: omega = pi sin(30) = pi/2, phase step e^{-j pi/2}
        let g4 = UlaGeometry::half_wavelength(4);
        let a = ula_response(&g4, 30f64.to_radians());
        let step = a[1] / a[0];
        assert_relative_eq!(step.re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(step.im, -1.0, epsilon = 1e-12);
        for v in a.iter() {
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn practical_zero_spread_is_rank_one() {
        let geom = UlaGeometry::half_wavelength(4);
        let spread = AngularSpreadParams::new(0.3, 0.0, SpreadDistribution::Uniform, 0.0).unwrap();
        let r = practical_correlation(&geom, &spread, 0.3).unwrap();
        let a = ula_response(&geom, 0.3);
        let mut outer = DMatrix::<Complex64>::zeros(4, 4);
        outer.ger(c(1.0, 0.0), &a, &a.conjugate(), c(0.0, 0.0));
        assert!(linalg::frobenius(&(r.entries() - &outer)) < 1e-12);
        // Gaussian zero spread behaves the same (all-ones B)
        let gs = AngularSpreadParams::new(0.3, 0.0, SpreadDistribution::Gaussian, 0.0).unwrap();
        let rg = practical_correlation(&geom, &gs, 0.3).unwrap();
        assert!(linalg::frobenius(&(rg.entries() - &outer)) < 1e-12);
    }

    #[test]
    fn practical_unit_diagonal() {
        let geom = UlaGeometry::half_wavelength(8);
        let spread = AngularSpreadParams::new(0.2, 0.35, SpreadDistribution::Uniform, 0.0).unwrap();
        let r = practical_correlation(&geom, &spread, spread.mean_angle()).unwrap();
        for i in 0..8 {
            assert_relative_eq!(r.entries()[(i, i)].re, 1.0, epsilon = 1e-12);
        }
        r.validate_psd().unwrap();
    }

    #[test]
    fn practical_matches_quadrature_oracle() {
        // delta_omega = 0.3 at mean 20 deg; integrate a(omega(theta)) a^H over
        // the uniform theta law with 1e4 midpoint samples.
        let m = 4;
        let geom = UlaGeometry::half_wavelength(m);
        let mean: f64 = 20f64.to_radians();
        let d_om = 0.3;
        let d_th = d_om / (std::f64::consts::TAU * 0.5 * mean.cos());
        let spread =
            AngularSpreadParams::new(mean - d_th, 2.0 * d_th, SpreadDistribution::Uniform, 0.0).unwrap();
        let r = practical_correlation(&geom, &spread, mean).unwrap();

        let nq = 10_000;
        let mut oracle = DMatrix::<Complex64>::zeros(m, m);
        for k in 0..nq {
            let th = mean - d_th + (k as f64 + 0.5) / nq as f64 * 2.0 * d_th;
            let a = ula_response(&geom, th);
            oracle.ger(c(1.0 / nq as f64, 0.0), &a, &a.conjugate(), c(1.0, 0.0));
        }
        let rel = linalg::frobenius(&(r.entries() - &oracle)) / linalg::frobenius(&oracle);
        assert!(rel < 0.05, "relative Frobenius {rel}");
    }

    #[test]
    fn draw_channel_edge_cases() {
        let f = RngFactory::new(1);
        // zero covariance -> zero vector
        let z = CovarianceMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        let h = draw_channel(&z, &mut f.stream(&[1])).unwrap();
        assert!(h.h.iter().all(|v| v.norm() == 0.0));
        // rank-1: every draw parallel to u
        let geom = UlaGeometry::half_wavelength(5);
        let u = ula_response(&geom, 0.4);
        let mut outer = DMatrix::<Complex64>::zeros(5, 5);
        outer.ger(c(1.0, 0.0), &u, &u.conjugate(), c(0.0, 0.0));
        let r1 = CovarianceMatrix::new(outer).unwrap();
        let mut rng = f.stream(&[2]);
        for _ in 0..20 {
            let h = draw_channel(&r1, &mut rng).unwrap().h;
            // component orthogonal to u must vanish
            let coef = u.dotc(&h) / c(u.norm_sqr(), 0.0);
            let residual = &h - u.scale(1.0) * coef;
            assert!(residual.norm() < 1e-10 * h.norm().max(1e-30));
        }
    }

    #[test]
    fn draw_channel_identity_unit_variance() {
        let f = RngFactory::new(9);
        let r = CovarianceMatrix::identity(4);
        let mut rng = f.stream(&[3]);
        let n = 100_000;
        let mut acc = [0.0; 4];
        for _ in 0..n {
            let h = draw_channel(&r, &mut rng).unwrap().h;
            for i in 0..4 {
                acc[i] += h[i].norm_sqr();
            }
        }
        for a in acc {
            let mean = a / n as f64;
            // per-entry |h|^2 is Exp(1): 3 sigma of the mean is 3/sqrt(n)
            assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt() * 1.5, "mean {mean}");
        }
    }

    #[test]
    fn draw_channel_empirical_covariance() {
        let f = RngFactory::new(33);
        let geom = UlaGeometry::half_wavelength(4);
        let spread = AngularSpreadParams::new(0.2, 0.3, SpreadDistribution::Uniform, 0.0).unwrap();
        let r = practical_correlation(&geom, &spread, spread.mean_angle()).unwrap();
        let mut rng = f.stream(&[4]);
        let n = 100_000;
        let mut acc = DMatrix::<Complex64>::zeros(4, 4);
        for _ in 0..n {
            let h = draw_channel(&r, &mut rng).unwrap().h;
            acc.ger(c(1.0 / n as f64, 0.0), &h, &h.conjugate(), c(1.0, 0.0));
        }
        let rel = linalg::frobenius(&(&acc - r.entries())) / linalg::frobenius(r.entries());
        assert!(rel < 0.02, "relative Frobenius {rel}");
    }

    #[test]
    fn training_sequence_power_checks() {
        let set = TrainingSequence::orthogonal_set(4, 4, 1.0).unwrap();
        for s in &set {
            assert_relative_eq!(s.energy(), 1.0, epsilon = 1e-12);
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!(set[i].orthogonal_to(&set[j]));
            }
        }
        // wrong per-symbol power rejected
        let bad = DVector::from_vec(vec![c(1.0, 0.0), c(0.5, 0.0)]);
        assert!(TrainingSequence::new(bad, 1.0).is_err());
    }

    #[test]
    fn assemble_and_correlate_roundtrip() {
        let f = RngFactory::new(5);
        let m = 4;
        let geom = UlaGeometry::half_wavelength(m);
        let seqs = TrainingSequence::orthogonal_set(2, 2, 2.0).unwrap();
        let h1 = ChannelRealization {
            h: ula_response(&geom, 0.2),
            user: 0,
            cell: 0,
        };
        let h2 = ChannelRealization {
            h: ula_response(&geom, 0.7),
            user: 1,
            cell: 1,
        };
        // single user, sigma2 = 0: exact recovery
        let y = assemble_received(&[(&seqs[0], vec![&h1])], 0.0, &mut f.stream(&[7])).unwrap();
        let z = seqs[0].correlate(&y.y, m).unwrap();
        assert!((&z - &h1.h).norm() < 1e-12);
        // two users, same pilot: correlator returns the sum
        let y = assemble_received(&[(&seqs[0], vec![&h1, &h2])], 0.0, &mut f.stream(&[8])).unwrap();
        let z = seqs[0].correlate(&y.y, m).unwrap();
        assert!((&z - (&h1.h + &h2.h)).norm() < 1e-12);
        // orthogonal pilots separate exactly
        let y = assemble_received(
            &[(&seqs[0], vec![&h1]), (&seqs[1], vec![&h2])],
            0.0,
            &mut f.stream(&[9]),
        )
        .unwrap();
        let z0 = seqs[0].correlate(&y.y, m).unwrap();
        let z1 = seqs[1].correlate(&y.y, m).unwrap();
        assert!((&z0 - &h1.h).norm() < 1e-11);
        assert!((&z1 - &h2.h).norm() < 1e-11);
    }

    #[test]
    fn assemble_rejects_non_orthogonal() {
        let f = RngFactory::new(5);
        let m = 2;
        let geom = UlaGeometry::half_wavelength(m);
        let s = TrainingSequence::orthogonal_set(2, 1, 2.0).unwrap().remove(0);
        let s_same = s.clone();
        let h = ChannelRealization {
            h: ula_response(&geom, 0.1),
            user: 0,
            cell: 0,
        };
        let err = assemble_received(
            &[(&s, vec![&h]), (&s_same, vec![&h])],
            0.0,
            &mut f.stream(&[1]),
        );
        assert!(err.is_err());
    }

    #[test]
    fn link_gains_uniform_beta() {
        let g = LinkGains::uniform(3, 1.0).unwrap();
        for l in 0..3 {
            for c in 0..3 {
                assert_relative_eq!(g.alpha(l, c), 1.0);
                assert_relative_eq!(g.beta_ratio(l, c), 1.0);
            }
        }
        let g2 = LinkGains::uniform(2, 2.0).unwrap();
        assert_relative_eq!(g2.alpha(0, 1), 0.5);
        assert_relative_eq!(g2.beta_ratio(0, 1), 2.0);
    }
}
