//! Heat semigroup `e^{(τ/2)Δ}` on the periodic box, evaluated with real-input FFTs.
//!
//! On `[-π, π]^dim` the Fourier modes have integer wave vectors `m`, so the semigroup is the
//! Fourier multiplier `exp(-|m|² τ/2)`. The last axis is transformed real-to-complex (keeping
//! `n/2 + 1` bins) and the remaining axes with complex FFTs.

use std::fmt;
use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

/// FFT plans for one grid, shared by every [`HeatOperator`] on that grid.
pub struct SpectralPlan {
    spec: GridSpec,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan").field("spec", &self.spec).finish()
    }
}

impl SpectralPlan {
    pub fn new(spec: GridSpec) -> Arc<Self> {
        let n = spec.n();
        let mut real = RealFftPlanner::<f64>::new();
        let mut complex = FftPlanner::<f64>::new();
        Arc::new(Self {
            spec,
            r2c: real.plan_fft_forward(n),
            c2r: real.plan_fft_inverse(n),
            forward: complex.plan_fft_forward(n),
            inverse: complex.plan_fft_inverse(n),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn half(&self) -> usize {
        self.spec.n() / 2 + 1
    }

    fn spectrum_len(&self) -> usize {
        self.spec.len() / self.spec.n() * self.half()
    }

    /// Layout of the complex axes as `(outer, len, inner)` blocks, innermost axis last.
    fn complex_axes(&self) -> Vec<(usize, usize, usize)> {
        let n = self.spec.n();
        let half = self.half();
        match self.spec.dim() {
            2 => vec![(1, n, half)],
            _ => vec![(n, n, half), (1, n, n * half)],
        }
    }

    fn forward(&self, values: &[f64], spectrum: &mut [Complex64], work: &mut Work) {
        let n = self.spec.n();
        let half = self.half();
        for (row, out) in values.chunks_exact(n).zip(spectrum.chunks_exact_mut(half)) {
            work.row.copy_from_slice(row);
            self.r2c
                .process_with_scratch(&mut work.row, out, &mut work.real_scratch)
                .expect("real FFT buffers are sized by the plan");
        }
        for (outer, len, inner) in self.complex_axes() {
            transform_axis(spectrum, outer, len, inner, &*self.forward, work);
        }
    }

    fn inverse(&self, spectrum: &mut [Complex64], values: &mut [f64], work: &mut Work) {
        let n = self.spec.n();
        let half = self.half();
        for (outer, len, inner) in self.complex_axes().into_iter().rev() {
            transform_axis(spectrum, outer, len, inner, &*self.inverse, work);
        }
        for (row, out) in spectrum.chunks_exact_mut(half).zip(values.chunks_exact_mut(n)) {
            // The zero and Nyquist bins of a real signal are real; drop round-off residue.
            row[0].im = 0.0;
            row[half - 1].im = 0.0;
            self.c2r
                .process_with_scratch(row, out, &mut work.complex_scratch_c2r)
                .expect("inverse real FFT buffers are sized by the plan");
        }
    }
}

struct Work {
    row: Vec<f64>,
    real_scratch: Vec<Complex64>,
    complex_scratch_c2r: Vec<Complex64>,
    transposed: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
}

impl Work {
    fn new(plan: &SpectralPlan) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let fft_scratch = plan
            .forward
            .get_inplace_scratch_len()
            .max(plan.inverse.get_inplace_scratch_len());
        Self {
            row: vec![0.0; plan.spec.n()],
            real_scratch: plan.r2c.make_scratch_vec(),
            complex_scratch_c2r: plan.c2r.make_scratch_vec(),
            transposed: vec![zero; plan.spectrum_len()],
            fft_scratch: vec![zero; fft_scratch],
        }
    }
}

/// Runs `fft` along the middle axis of a `[outer][len][inner]` block array.
fn transform_axis(
    data: &mut [Complex64],
    outer: usize,
    len: usize,
    inner: usize,
    fft: &dyn Fft<f64>,
    work: &mut Work,
) {
    let block = len * inner;
    let buf = &mut work.transposed[..block];
    for chunk in data.chunks_exact_mut(block).take(outer) {
        for i in 0..len {
            for j in 0..inner {
                buf[j * len + i] = chunk[i * inner + j];
            }
        }
        fft.process_with_scratch(buf, &mut work.fft_scratch);
        for i in 0..len {
            for j in 0..inner {
                chunk[i * inner + j] = buf[j * len + i];
            }
        }
    }
}

/// Signed integer frequency of FFT bin `i` on an axis with `n` bins: `{-n/2, …, n/2 - 1}`.
pub fn wave_number(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// The operator `e^{(τ/2)Δ}` on a fixed grid, with its Fourier multiplier precomputed.
#[derive(Clone)]
pub struct HeatOperator {
    plan: Arc<SpectralPlan>,
    tau: f64,
    multiplier: Vec<f64>,
}

impl fmt::Debug for HeatOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeatOperator")
            .field("spec", self.plan.spec())
            .field("tau", &self.tau)
            .finish()
    }
}

impl HeatOperator {
    pub fn new(spec: GridSpec, tau: f64) -> Result<Self> {
        Self::with_plan(SpectralPlan::new(spec), tau)
    }

    /// Builds the operator for diffusion time `tau` (heat flow for time `tau/2`).
    pub fn with_plan(plan: Arc<SpectralPlan>, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidTau {
                tau,
                requirement: "nonnegative",
            });
        }
        let spec = *plan.spec();
        let n = spec.n();
        let half = plan.half();
        let sq: Vec<f64> = (0..n).map(|i| (wave_number(i, n) as f64).powi(2)).collect();
        let mut multiplier = Vec::with_capacity(plan.spectrum_len());
        match spec.dim() {
            2 => {
                for a in &sq {
                    for c in 0..half {
                        multiplier.push((-(a + (c * c) as f64) * tau / 2.0).exp());
                    }
                }
            }
            _ => {
                for a in &sq {
                    for b in &sq {
                        for c in 0..half {
                            multiplier.push((-(a + b + (c * c) as f64) * tau / 2.0).exp());
                        }
                    }
                }
            }
        }
        Ok(Self {
            plan,
            tau,
            multiplier,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        self.plan.spec()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn plan(&self) -> &Arc<SpectralPlan> {
        &self.plan
    }

    /// Multiplier over the half spectrum: complex axes in FFT order, last axis `0..=n/2`.
    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        self.spec().ensure_same(f.spec())?;
        let mut out = f.clone();
        self.apply_in_place(out.values_mut());
        Ok(out)
    }

    /// Applies the operator to a raw value array laid out like [`ScalarField`] values.
    pub(crate) fn apply_in_place(&self, values: &mut [f64]) {
        debug_assert_eq!(values.len(), self.spec().len());
        if self.tau == 0.0 {
            return;
        }
        let plan = &*self.plan;
        let mut work = Work::new(plan);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); plan.spectrum_len()];
        plan.forward(values, &mut spectrum, &mut work);
        let norm = 1.0 / self.spec().len() as f64;
        for (s, m) in spectrum.iter_mut().zip(&self.multiplier) {
            *s *= m * norm;
        }
        plan.inverse(&mut spectrum, values, &mut work);
    }
}

/// Applies `e^{(τ/2)Δ}` to `f`.
pub fn heat_semigroup(op: &HeatOperator, f: &ScalarField) -> Result<ScalarField> {
    op.apply(f)
}
