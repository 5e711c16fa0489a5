//! Splitting schemes `Q_dt = P0(a_1 dt) P1(b_1 dt) ... P0(a_s dt) P1(b_s dt)`
//! with real drift weights and complex diffusion weights, and their
//! application to a pair of propagators.

use std::fmt;

use num_complex::Complex;
use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::scalar::{lit, Real};
use crate::weighted_space::{weighted_sup_norm, Region, WeightFunction};

pub type Rational = Ratio<i64>;

/// Exact complex rational `re + im i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexRational {
    pub re: Rational,
    pub im: Rational,
}

impl ComplexRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        Self { re, im }
    }

    pub fn real(re: Rational) -> Self {
        Self {
            re,
            im: Rational::zero(),
        }
    }

    pub fn conj(self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn to_complex<T: Real>(self) -> Complex<T> {
        Complex::new(ratio_to::<T>(self.re), ratio_to::<T>(self.im))
    }
}

impl fmt::Display for ComplexRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_negative() {
            write!(f, "{} - {}i", self.re, -self.im)
        } else {
            write!(f, "{} + {}i", self.re, self.im)
        }
    }
}

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

pub fn ratio_to<T: Real>(q: Rational) -> T {
    lit::<T>(*q.numer() as f64) / lit::<T>(*q.denom() as f64)
}

/// Stage weights of a splitting scheme, stored exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingScheme {
    name: String,
    alphas: Vec<Rational>,
    betas: Vec<ComplexRational>,
    order: u32,
}

/// One failed invariant of a scheme. Stage indices are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeViolation {
    Empty,
    LengthMismatch { alphas: usize, betas: usize },
    NegativeAlpha { stage: usize },
    NegativeRealBeta { stage: usize },
    AlphaSum(Rational),
    BetaSum(ComplexRational),
    ZeroOrder,
}

impl fmt::Display for SchemeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "scheme has no stages"),
            Self::LengthMismatch { alphas, betas } => {
                write!(f, "{alphas} drift weights but {betas} diffusion weights")
            }
            Self::NegativeAlpha { stage } => write!(f, "α_{stage} < 0"),
            Self::NegativeRealBeta { stage } => write!(f, "Re β_{stage} < 0"),
            Self::AlphaSum(s) => write!(f, "Σα ≠ 1 (Σα = {s})"),
            Self::BetaSum(s) => write!(f, "Σβ ≠ 1 (Σβ = {s})"),
            Self::ZeroOrder => write!(f, "formal order must be positive"),
        }
    }
}

impl SplittingScheme {
    /// Unchecked constructor; call [`SplittingScheme::validate`] before use.
    pub fn new(
        name: impl Into<String>,
        alphas: Vec<Rational>,
        betas: Vec<ComplexRational>,
        order: u32,
    ) -> Self {
        Self {
            name: name.into(),
            alphas,
            betas,
            order,
        }
    }

    /// Five-stage fourth-order scheme with complex diffusion weights.
    pub fn cdv_fourth_order() -> Self {
        let quarter = r(1, 4);
        let outer = ComplexRational::new(r(1, 10), r(-1, 30));
        let inner = ComplexRational::new(r(4, 15), r(2, 15));
        let middle = ComplexRational::new(r(4, 15), r(-1, 5));
        Self::new(
            "cdv4",
            vec![Rational::zero(), quarter, quarter, quarter, quarter],
            vec![outer, inner, middle, inner, outer],
            4,
        )
    }

    pub fn lie_trotter() -> Self {
        Self::new(
            "lie",
            vec![r(1, 1)],
            vec![ComplexRational::real(r(1, 1))],
            1,
        )
    }

    /// Drift half step, full diffusion step, drift half step.
    pub fn strang() -> Self {
        Self::new(
            "strang",
            vec![r(1, 2), r(1, 2)],
            vec![
                ComplexRational::real(r(1, 1)),
                ComplexRational::real(Rational::zero()),
            ],
            2,
        )
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "cdv4" | "cdv" | "cdv_fourth_order" | "fourth" => Some(Self::cdv_fourth_order()),
            "lie" | "lie_trotter" | "lie-trotter" => Some(Self::lie_trotter()),
            "strang" => Some(Self::strang()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[Rational] {
        &self.alphas
    }

    pub fn betas(&self) -> &[ComplexRational] {
        &self.betas
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// True when every diffusion weight is real.
    pub fn is_real(&self) -> bool {
        self.betas.iter().all(|b| b.im.is_zero())
    }

    /// Checks every invariant and reports all violations found.
    pub fn validate(&self) -> std::result::Result<(), Vec<SchemeViolation>> {
        let mut out = Vec::new();
        if self.alphas.is_empty() && self.betas.is_empty() {
            out.push(SchemeViolation::Empty);
        }
        if self.alphas.len() != self.betas.len() {
            out.push(SchemeViolation::LengthMismatch {
                alphas: self.alphas.len(),
                betas: self.betas.len(),
            });
        }
        for (k, a) in self.alphas.iter().enumerate() {
            if a.is_negative() {
                out.push(SchemeViolation::NegativeAlpha { stage: k + 1 });
            }
        }
        for (k, b) in self.betas.iter().enumerate() {
            if b.re.is_negative() {
                out.push(SchemeViolation::NegativeRealBeta { stage: k + 1 });
            }
        }
        let sa: Rational = self.alphas.iter().copied().sum();
        if sa != r(1, 1) {
            out.push(SchemeViolation::AlphaSum(sa));
        }
        let sb = ComplexRational::new(
            self.betas.iter().map(|b| b.re).sum(),
            self.betas.iter().map(|b| b.im).sum(),
        );
        if sb != ComplexRational::real(r(1, 1)) {
            out.push(SchemeViolation::BetaSum(sb));
        }
        if self.order == 0 {
            out.push(SchemeViolation::ZeroOrder);
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

/// A linear evolution operator acting on grid functions.
pub trait Propagator<T: Real> {
    /// Whether only real nonnegative times are admissible.
    fn real_time_only(&self) -> bool {
        false
    }

    fn propagate(&mut self, u: &GridFunction<T>, tau: Complex<T>) -> Result<GridFunction<T>>;
}

impl<T: Real, P: Propagator<T> + ?Sized> Propagator<T> for &mut P {
    fn real_time_only(&self) -> bool {
        (**self).real_time_only()
    }

    fn propagate(&mut self, u: &GridFunction<T>, tau: Complex<T>) -> Result<GridFunction<T>> {
        (**self).propagate(u, tau)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPropagator;

impl<T: Real> Propagator<T> for IdentityPropagator {
    fn propagate(&mut self, u: &GridFunction<T>, _tau: Complex<T>) -> Result<GridFunction<T>> {
        Ok(u.clone())
    }
}

/// Multiplies nodal value `i` by `exp(tau * rates[i])`.
#[derive(Debug, Clone)]
pub struct DiagonalPropagator<T> {
    rates: Vec<Complex<T>>,
    real_only: bool,
}

impl<T: Real> DiagonalPropagator<T> {
    pub fn new(rates: Vec<Complex<T>>) -> Self {
        Self {
            rates,
            real_only: false,
        }
    }

    pub fn real_time_only(mut self) -> Self {
        self.real_only = true;
        self
    }
}

impl<T: Real> Propagator<T> for DiagonalPropagator<T> {
    fn real_time_only(&self) -> bool {
        self.real_only
    }

    fn propagate(&mut self, u: &GridFunction<T>, tau: Complex<T>) -> Result<GridFunction<T>> {
        if self.rates.len() != u.values().len() {
            return Err(Error::DimensionMismatch {
                expected: self.rates.len(),
                found: u.values().len(),
            });
        }
        let values = u
            .values()
            .iter()
            .zip(&self.rates)
            .map(|(v, l)| v * (l * tau).exp())
            .collect();
        u.with_values(values)
    }
}

fn run_stage<T: Real, P: Propagator<T> + ?Sized>(
    prop: &mut P,
    u: GridFunction<T>,
    tau: Complex<T>,
    stage: usize,
) -> Result<GridFunction<T>> {
    if tau.re == T::zero() && tau.im == T::zero() {
        return Ok(u);
    }
    if prop.real_time_only() && (tau.im != T::zero() || tau.re < T::zero()) {
        return Err(Error::Stage {
            stage,
            source: Box::new(Error::ComplexTimeRejected {
                re: crate::scalar::to_f64(tau.re),
                im: crate::scalar::to_f64(tau.im),
            }),
        });
    }
    prop.propagate(&u, tau).map_err(|e| Error::Stage {
        stage,
        source: Box::new(e),
    })
}

/// One step of the scheme. Stages are applied right to left: for `k = s..1`
/// first `P1(beta_k dt)`, then `P0(alpha_k dt)`. Zero-length stages are skipped.
pub fn compose_step<T, P0, P1>(
    scheme: &SplittingScheme,
    drift: &mut P0,
    diffusion: &mut P1,
    u: &GridFunction<T>,
    dt: T,
) -> Result<GridFunction<T>>
where
    T: Real,
    P0: Propagator<T> + ?Sized,
    P1: Propagator<T> + ?Sized,
{
    scheme.validate().map_err(Error::InvalidScheme)?;
    if !(dt >= T::zero()) {
        return Err(Error::InvalidInput(format!("timestep must be nonnegative, got {dt}")));
    }
    let mut cur = u.clone();
    for k in (0..scheme.stages()).rev() {
        let beta = scheme.betas[k].to_complex::<T>() * dt;
        cur = run_stage(diffusion, cur, beta, k + 1)?;
        let alpha = Complex::new(ratio_to::<T>(scheme.alphas[k]) * dt, T::zero());
        cur = run_stage(drift, cur, alpha, k + 1)?;
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics<T> {
    pub step: usize,
    pub max_imag: T,
    pub sup_norm: T,
}

#[derive(Debug, Clone)]
pub struct Evolution<T> {
    pub solution: GridFunction<T>,
    pub steps: Vec<StepDiagnostics<T>>,
}

/// `n` uniform steps of size `horizon / n`.
pub fn evolve<T, P0, P1>(
    scheme: &SplittingScheme,
    drift: &mut P0,
    diffusion: &mut P1,
    u0: &GridFunction<T>,
    horizon: T,
    n: usize,
) -> Result<Evolution<T>>
where
    T: Real,
    P0: Propagator<T> + ?Sized,
    P1: Propagator<T> + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidInput("number of timesteps must be positive".into()));
    }
    if !(horizon > T::zero()) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let dt = horizon / lit(n as f64);
    let mut u = u0.clone();
    let mut steps = Vec::with_capacity(n);
    for step in 1..=n {
        u = compose_step(scheme, drift, diffusion, &u, dt)?;
        steps.push(StepDiagnostics {
            step,
            max_imag: u.max_imag(),
            sup_norm: weighted_sup_norm(&u, WeightFunction::new(0), &Region::Full)?,
        });
    }
    Ok(Evolution { solution: u, steps })
}
