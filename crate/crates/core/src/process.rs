//! Sample paths of self-similar Gaussian processes on uniform grids.
//!
//! Paths are synthesized on `[0, 1]` and mapped to `[0, T]` through
//! self-similarity, `X(T s) = T^H X(s)` in law, so one synthesizer serves every
//! horizon. Increments are generated by circulant embedding of their
//! stationary covariance (two independent paths per FFT). When the embedding
//! is not nonnegative definite the synthesizer falls back to a triangular
//! factorization of the path covariance.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Embedding eigenvalues in `[-EIGEN_TOLERANCE, 0)` are clamped to zero.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

/// Uniform grid `t_j = T j / n_points`, `j = 0..=n_points`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub horizon: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, horizon: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::domain("n_points", format!("must be >= 2, got {n_points}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain("horizon", format!("must be positive and finite, got {horizon}")));
        }
        Ok(Self { n_points, horizon })
    }

    pub fn unit(n_points: usize) -> Result<Self> {
        Self::new(n_points, 1.0)
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_points as f64
    }

    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        self.horizon * j as f64 / self.n_points as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_points).map(|j| self.time(j)).collect()
    }
}

/// Process values at the grid times of `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub values: Vec<f64>,
    pub grid: GridSpec,
    pub hurst: f64,
}

impl SamplePath {
    /// Builds a path from explicit values. `values[0]` must be zero.
    pub fn from_values(values: Vec<f64>, grid: GridSpec, hurst: f64) -> Result<Self> {
        if values.len() != grid.n_points + 1 {
            return Err(Error::domain(
                "values",
                format!("expected {} values, got {}", grid.n_points + 1, values.len()),
            ));
        }
        if values[0] != 0.0 {
            return Err(Error::domain("values", "path must start at 0"));
        }
        Ok(Self { values, grid, hurst })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Autocovariance of fractional Gaussian noise, `γ(0..=max_lag)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FgnCovariance {
    pub hurst: f64,
    pub lags: Vec<f64>,
}

pub(crate) fn check_hurst(field: &str, hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must lie in (0, 1), got {hurst}")))
    }
}

#[inline]
fn fgn_gamma(two_h: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).powf(two_h))
}

/// `γ(k) = ½(|k+1|^{2H} − 2|k|^{2H} + |k−1|^{2H})` for `k = 0..=max_lag`.
pub fn fgn_covariance(hurst: f64, max_lag: usize) -> Result<FgnCovariance> {
    check_hurst("hurst", hurst)?;
    let two_h = 2.0 * hurst;
    Ok(FgnCovariance {
        hurst,
        lags: (0..=max_lag).map(|k| fgn_gamma(two_h, k)).collect(),
    })
}

/// Covariance structure of a centered self-similar process with stationary
/// increments and unit variance at `t = 1`.
pub trait IncrementKernel: Send + Sync {
    fn hurst(&self) -> f64;

    /// Autocovariance of the unit-spaced increment sequence.
    fn increment_autocovariance(&self, lag: usize) -> f64;

    /// `Cov(X(s), X(t))`.
    fn covariance(&self, s: f64, t: f64) -> f64;
}

/// Standard fractional Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmKernel {
    hurst: f64,
}

impl FbmKernel {
    pub fn new(hurst: f64) -> Result<Self> {
        check_hurst("hurst", hurst)?;
        Ok(Self { hurst })
    }
}

impl IncrementKernel for FbmKernel {
    fn hurst(&self) -> f64 {
        self.hurst
    }

    fn increment_autocovariance(&self, lag: usize) -> f64 {
        fgn_gamma(2.0 * self.hurst, lag)
    }

    fn covariance(&self, s: f64, t: f64) -> f64 {
        let two_h = 2.0 * self.hurst;
        0.5 * (s.abs().powf(two_h) + t.abs().powf(two_h) - (s - t).abs().powf(two_h))
    }
}

/// Requested synthesis route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthesisMethod {
    /// Circulant embedding, falling back to factorization if the embedding fails.
    #[default]
    Auto,
    CirculantEmbedding,
    Factorization,
}

enum Engine {
    /// Independent increments (`H = 1/2`).
    WhiteNoise,
    Circulant {
        /// `sqrt(λ_k / M)` for the `M = 2N` embedding eigenvalues.
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    /// Row-major packed lower factor of the covariance at `t_1..t_N`.
    Factorization { lower: Vec<f64> },
}

/// Reusable buffers for allocation-free sampling.
#[derive(Default)]
pub struct Scratch {
    spectrum: Vec<Complex64>,
    fft: Vec<Complex64>,
    normals: Vec<f64>,
}

/// Precomputed sampler of unit-horizon paths; immutable and shareable.
pub struct PathSynthesizer {
    hurst: f64,
    n_points: usize,
    engine: Engine,
}

impl fmt::Debug for PathSynthesizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathSynthesizer")
            .field("hurst", &self.hurst)
            .field("n_points", &self.n_points)
            .field("method", &self.method())
            .finish()
    }
}

fn embedding_eigenvalues(kernel: &dyn IncrementKernel, n: usize, fft: &Arc<dyn Fft<f64>>) -> Vec<f64> {
    let m = 2 * n;
    let mut row: Vec<Complex64> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex64::new(kernel.increment_autocovariance(lag), 0.0)
        })
        .collect();
    fft.process(&mut row);
    row.into_iter().map(|z| z.re).collect()
}

fn cholesky_packed(n: usize, cov: impl Fn(usize, usize) -> f64) -> Result<Vec<f64>> {
    // row i occupies lower[i(i+1)/2 .. i(i+1)/2 + i + 1]
    let mut lower = vec![0.0; n * (n + 1) / 2];
    let row = |i: usize| i * (i + 1) / 2;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = cov(i, j);
            let (ri, rj) = (row(i), row(j));
            for l in 0..j {
                sum -= lower[ri + l] * lower[rj + l];
            }
            if i == j {
                if sum < -EIGEN_TOLERANCE * cov(i, i).max(1.0) {
                    return Err(Error::Synthesis(format!(
                        "covariance is not positive semidefinite (pivot {sum:e} at row {i})"
                    )));
                }
                lower[ri + i] = sum.max(0.0).sqrt();
            } else {
                let d = lower[rj + j];
                lower[ri + j] = if d > 0.0 { sum / d } else { 0.0 };
            }
        }
    }
    Ok(lower)
}

impl PathSynthesizer {
    /// Standard fBm synthesizer with the default method.
    pub fn fbm(hurst: f64, n_points: usize) -> Result<Self> {
        Self::new(&FbmKernel::new(hurst)?, n_points, SynthesisMethod::Auto)
    }

    pub fn new(kernel: &dyn IncrementKernel, n_points: usize, method: SynthesisMethod) -> Result<Self> {
        let hurst = kernel.hurst();
        check_hurst("hurst", hurst)?;
        if n_points < 2 {
            return Err(Error::domain("n_points", format!("must be >= 2, got {n_points}")));
        }
        let white = (1..=n_points.min(8)).all(|k| kernel.increment_autocovariance(k) == 0.0)
            && kernel.increment_autocovariance(0) == 1.0
            && hurst == 0.5;
        if white && method == SynthesisMethod::Auto {
            return Ok(Self { hurst, n_points, engine: Engine::WhiteNoise });
        }

        let circulant_error = if method != SynthesisMethod::Factorization {
            let m = 2 * n_points;
            let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
            let eig = embedding_eigenvalues(kernel, n_points, &fft);
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            if min >= -EIGEN_TOLERANCE {
                let scale = eig.iter().map(|&l| (l.max(0.0) / m as f64).sqrt()).collect();
                return Ok(Self {
                    hurst,
                    n_points,
                    engine: Engine::Circulant { scale, fft },
                });
            }
            let msg = format!("circulant embedding has eigenvalue {min:e} < -{EIGEN_TOLERANCE:e}");
            if method == SynthesisMethod::CirculantEmbedding {
                return Err(Error::Synthesis(msg));
            }
            Some(msg)
        } else {
            None
        };

        let step = 1.0 / n_points as f64;
        let lower = cholesky_packed(n_points, |i, j| {
            kernel.covariance((i + 1) as f64 * step, (j + 1) as f64 * step)
        })
        .map_err(|e| match circulant_error {
            Some(ce) => Error::Synthesis(format!("{ce}; fallback failed: {e}")),
            None => e,
        })?;
        Ok(Self {
            hurst,
            n_points,
            engine: Engine::Factorization { lower },
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// The route actually in use.
    pub fn method(&self) -> SynthesisMethod {
        match self.engine {
            Engine::WhiteNoise | Engine::Circulant { .. } => SynthesisMethod::CirculantEmbedding,
            Engine::Factorization { .. } => SynthesisMethod::Factorization,
        }
    }

    pub fn unit_grid(&self) -> GridSpec {
        GridSpec { n_points: self.n_points, horizon: 1.0 }
    }

    /// Fills `out` (length `n_points + 1`) with one path on `[0, 1]`.
    pub fn fill_unit<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], scratch: &mut Scratch) {
        assert_eq!(out.len(), self.n_points + 1, "output buffer length");
        match &self.engine {
            Engine::WhiteNoise => {
                let sd = (self.n_points as f64).sqrt().recip();
                out[0] = 0.0;
                let mut acc = 0.0;
                for v in out[1..].iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    acc += z;
                    *v = acc * sd;
                }
            }
            Engine::Circulant { .. } => {
                // the second path of the pair is discarded
                let n = self.n_points;
                let mut other = std::mem::take(&mut scratch.normals);
                other.resize(n + 1, 0.0);
                self.fill_unit_pair(rng, out, &mut other, scratch);
                scratch.normals = other;
            }
            Engine::Factorization { lower } => {
                let n = self.n_points;
                scratch.normals.clear();
                scratch
                    .normals
                    .extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                out[0] = 0.0;
                let z = &scratch.normals;
                for i in 0..n {
                    let r = i * (i + 1) / 2;
                    out[i + 1] = lower[r..=r + i].iter().zip(z).map(|(l, z)| l * z).sum();
                }
            }
        }
    }

    /// Fills two independent paths. With circulant embedding both come from one FFT.
    pub fn fill_unit_pair<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        first: &mut [f64],
        second: &mut [f64],
        scratch: &mut Scratch,
    ) {
        let n = self.n_points;
        assert_eq!(first.len(), n + 1, "output buffer length");
        assert_eq!(second.len(), n + 1, "output buffer length");
        match &self.engine {
            Engine::Circulant { scale, fft } => {
                let m = 2 * n;
                scratch.spectrum.clear();
                scratch.spectrum.extend(scale.iter().map(|&s| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(s * re, s * im)
                }));
                let need = fft.get_inplace_scratch_len();
                if scratch.fft.len() < need {
                    scratch.fft.resize(need, Complex64::new(0.0, 0.0));
                }
                fft.process_with_scratch(&mut scratch.spectrum, &mut scratch.fft[..need]);
                debug_assert_eq!(scratch.spectrum.len(), m);
                let unit = (n as f64).powf(-self.hurst);
                first[0] = 0.0;
                second[0] = 0.0;
                let (mut a, mut b) = (0.0, 0.0);
                for j in 0..n {
                    let z = scratch.spectrum[j];
                    a += z.re;
                    b += z.im;
                    first[j + 1] = a * unit;
                    second[j + 1] = b * unit;
                }
            }
            _ => {
                self.fill_unit(rng, first, scratch);
                self.fill_unit(rng, second, scratch);
            }
        }
    }

    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePath {
        let mut values = vec![0.0; self.n_points + 1];
        self.fill_unit(rng, &mut values, &mut Scratch::default());
        SamplePath { values, grid: self.unit_grid(), hurst: self.hurst }
    }

    pub fn sample_unit_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (SamplePath, SamplePath) {
        let mut a = vec![0.0; self.n_points + 1];
        let mut b = vec![0.0; self.n_points + 1];
        self.fill_unit_pair(rng, &mut a, &mut b, &mut Scratch::default());
        let grid = self.unit_grid();
        (
            SamplePath { values: a, grid, hurst: self.hurst },
            SamplePath { values: b, grid, hurst: self.hurst },
        )
    }
}

/// One standard fBm path on the unit grid with `n_points` cells.
pub fn sample_fbm_unit<R: Rng + ?Sized>(hurst: f64, n_points: usize, rng: &mut R) -> Result<SamplePath> {
    Ok(PathSynthesizer::fbm(hurst, n_points)?.sample_unit(rng))
}

/// Maps a path on `[0, 1]` to `[0, T]`: values scale by `T^H`.
pub fn rescale_self_similar(path: &SamplePath, horizon: f64) -> Result<SamplePath> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::domain("horizon", format!("must be positive, got {horizon}")));
    }
    if path.grid.horizon != 1.0 {
        return Err(Error::domain("path", "rescaling expects a path on [0, 1]"));
    }
    let factor = horizon.powf(path.hurst);
    Ok(SamplePath {
        values: path.values.iter().map(|v| v * factor).collect(),
        grid: GridSpec { n_points: path.grid.n_points, horizon },
        hurst: path.hurst,
    })
}

/// Exact dyadic refinement of a small path: new midpoints are drawn from
/// their conditional law given the existing grid values, so the refined path
/// contains the coarse one.
pub struct NestedRefiner {
    coarse: usize,
    /// Packed lower factor of the covariance with coarse points ordered first.
    lower: Vec<f64>,
}

impl NestedRefiner {
    pub fn new(kernel: &dyn IncrementKernel, coarse_points: usize) -> Result<Self> {
        if coarse_points < 2 {
            return Err(Error::domain("coarse_points", "must be >= 2"));
        }
        let fine = 2 * coarse_points;
        // order: coarse times j/N (j=1..N), then midpoints (2j-1)/(2N)
        let time = |idx: usize| -> f64 {
            if idx < coarse_points {
                (idx + 1) as f64 / coarse_points as f64
            } else {
                (2 * (idx - coarse_points) + 1) as f64 / fine as f64
            }
        };
        let lower = cholesky_packed(fine, |i, j| kernel.covariance(time(i), time(j)))?;
        Ok(Self { coarse: coarse_points, lower })
    }

    pub fn refine<R: Rng + ?Sized>(&self, path: &SamplePath, rng: &mut R) -> Result<SamplePath> {
        let n = self.coarse;
        if path.grid.n_points != n || path.grid.horizon != 1.0 {
            return Err(Error::GridMismatch(format!(
                "refiner built for {n} unit cells, path has {} cells on [0, {}]",
                path.grid.n_points, path.grid.horizon
            )));
        }
        let row = |i: usize| i * (i + 1) / 2;
        // forward-solve L_cc z_c = x_c
        let mut z = vec![0.0; 2 * n];
        for i in 0..n {
            let r = row(i);
            let mut s = path.values[i + 1];
            s -= self.lower[r..r + i].iter().zip(&z[..i]).map(|(a, b)| a * b).sum::<f64>();
            let d = self.lower[r + i];
            z[i] = if d > 0.0 { s / d } else { 0.0 };
        }
        for zi in z[n..].iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let mut values = vec![0.0; 2 * n + 1];
        for j in 0..n {
            values[2 * (j + 1)] = path.values[j + 1];
            let i = n + j;
            let r = row(i);
            values[2 * j + 1] = (0..=i).map(|l| self.lower[r + l] * z[l]).sum();
        }
        Ok(SamplePath {
            values,
            grid: GridSpec { n_points: 2 * n, horizon: 1.0 },
            hurst: path.hurst,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStreamPlan;

    #[test]
    fn fgn_covariance_values() {
        let bm = fgn_covariance(0.5, 3).unwrap();
        assert_eq!(bm.lags[0], 1.0);
        assert!(bm.lags[1].abs() < 1e-15);
        let c = fgn_covariance(0.75, 1).unwrap();
        assert!((c.lags[1] - 0.5 * (2f64.powf(1.5) - 2.0)).abs() < 1e-14);
        assert!((c.lags[1] - 0.414_213_562_373_095).abs() < 1e-12);
        let near_one = fgn_covariance(1.0 - 1e-9, 1).unwrap();
        assert!((near_one.lags[1] - 1.0).abs() < 1e-8);
        assert!(fgn_covariance(1.0, 2).is_err());
        assert!(fgn_covariance(0.0, 2).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 1.0).is_err());
        assert!(GridSpec::new(4, 0.0).is_err());
        let g = GridSpec::new(4, 2.0).unwrap();
        assert_eq!(g.times(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let mut rng = RngStreamPlan::new(1).stream(0, 0);
        assert!(sample_fbm_unit(0.5, 1, &mut rng).is_err());
    }

    #[test]
    fn paths_start_at_zero_and_are_deterministic() {
        for (h, n) in [(0.5, 64), (0.3, 100), (0.8, 128)] {
            let synth = PathSynthesizer::fbm(h, n).unwrap();
            let a = synth.sample_unit(&mut RngStreamPlan::new(9).stream(1, 2));
            let b = synth.sample_unit(&mut RngStreamPlan::new(9).stream(1, 2));
            assert_eq!(a.values[0], 0.0);
            assert_eq!(a.values.len(), n + 1);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn default_route_is_circulant() {
        for h in [0.1, 0.3, 0.7, 0.95] {
            let s = PathSynthesizer::fbm(h, 256).unwrap();
            assert_eq!(s.method(), SynthesisMethod::CirculantEmbedding);
        }
    }

    #[test]
    fn factorization_route_matches_covariance_exactly() {
        let kernel = FbmKernel::new(0.7).unwrap();
        let s = PathSynthesizer::new(&kernel, 8, SynthesisMethod::Factorization).unwrap();
        let Engine::Factorization { lower } = &s.engine else { panic!() };
        for i in 0..8 {
            for j in 0..=i {
                let (ri, rj) = (i * (i + 1) / 2, j * (j + 1) / 2);
                let llt: f64 = (0..=j).map(|l| lower[ri + l] * lower[rj + l]).sum();
                let want = kernel.covariance((i + 1) as f64 / 8.0, (j + 1) as f64 / 8.0);
                assert!((llt - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embedding_reproduces_fgn_covariance() {
        // E[(Re Y_j)(Re Y_l)] = Σ_k scale_k² cos(2π k (j-l) / M) must equal γ(|j-l|)
        let n = 16;
        let s = PathSynthesizer::fbm(0.8, n).unwrap();
        let Engine::Circulant { scale, .. } = &s.engine else { panic!() };
        let m = 2 * n;
        let g = fgn_covariance(0.8, n).unwrap();
        for lag in 0..n {
            let c: f64 = scale
                .iter()
                .enumerate()
                .map(|(k, s)| s * s * (2.0 * std::f64::consts::PI * (k * lag) as f64 / m as f64).cos())
                .sum();
            assert!((c - g.lags[lag]).abs() < 1e-12, "lag {lag}: {c} vs {}", g.lags[lag]);
        }
    }

    #[test]
    fn rescale_identity_and_scaling() {
        let mut rng = RngStreamPlan::new(3).stream(0, 0);
        let p = sample_fbm_unit(0.5, 16, &mut rng).unwrap();
        let same = rescale_self_similar(&p, 1.0).unwrap();
        assert_eq!(same, p);
        let four = rescale_self_similar(&p, 4.0).unwrap();
        for (a, b) in four.values.iter().zip(&p.values) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
        assert_eq!(four.grid.horizon, 4.0);
        assert!(rescale_self_similar(&p, 0.0).is_err());
        assert!(rescale_self_similar(&four, 2.0).is_err());
    }

    #[test]
    fn refinement_keeps_coarse_points() {
        let kernel = FbmKernel::new(0.3).unwrap();
        let refiner = NestedRefiner::new(&kernel, 32).unwrap();
        let mut rng = RngStreamPlan::new(5).stream(0, 0);
        let coarse = sample_fbm_unit(0.3, 32, &mut rng).unwrap();
        let fine = refiner.refine(&coarse, &mut rng).unwrap();
        for j in 0..=32 {
            assert!((fine.values[2 * j] - coarse.values[j]).abs() < 1e-12);
        }
        assert!(fine.max() >= coarse.max());
    }
}
