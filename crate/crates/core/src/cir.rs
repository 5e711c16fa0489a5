//! CIR and two-factor CIR reference values: closed-form bond prices, an
//! independent Riccati integration, and the explicit squared-Gaussian
//! semigroup of the one-dimensional squared Bessel type generator.

use num_complex::Complex;

use crate::drift::AffineDrift;
use crate::error::{Error, Result};
use crate::ode::{integrate_adaptive, OdeTolerance};
use crate::scalar::{lit, Real};

/// One square-root factor `dx = theta (mu - x) dt + sigma sqrt(x) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirFactor<T> {
    pub theta: T,
    pub mu: T,
    pub sigma: T,
}

/// Two independent CIR factors with short rate `r = x + y`; the volatilities
/// are scaled by `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cir2Params<T> {
    x: CirFactor<T>,
    y: CirFactor<T>,
    epsilon: T,
    horizon: T,
}

impl<T: Real> Cir2Params<T> {
    pub fn new(x: CirFactor<T>, y: CirFactor<T>, epsilon: T, horizon: T) -> Result<Self> {
        for (name, f) in [("x", &x), ("y", &y)] {
            if !(f.theta > T::zero() && f.mu > T::zero() && f.sigma >= T::zero()) || !f.theta.is_finite() || !f.mu.is_finite() || !f.sigma.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "factor {name}: need theta > 0, mu > 0, sigma >= 0 (got {}, {}, {})",
                    f.theta, f.mu, f.sigma
                )));
            }
        }
        if !(epsilon >= T::zero() && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        if !(horizon >= T::zero() && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon must be nonnegative, got {horizon}")));
        }
        let four: T = lit(4.0);
        for (name, f) in [("x", &x), ("y", &y)] {
            let s = f.sigma * epsilon;
            if four * f.theta * f.mu < s * s {
                return Err(Error::InvalidInput(format!(
                    "factor {name} violates the outflow condition 4 theta mu >= sigma^2 ({} < {})",
                    four * f.theta * f.mu,
                    s * s
                )));
            }
        }
        Ok(Self { x, y, epsilon, horizon })
    }

    /// theta = (15.5, 20.5), mu = 0.025, sigma = (0.2, 0.3) epsilon, T = 1.
    pub fn reference_model(epsilon: T) -> Self {
        let f = |theta: f64, mu: f64, sigma: f64| CirFactor {
            theta: lit(theta),
            mu: lit(mu),
            sigma: lit(sigma),
        };
        Self::new(f(15.5, 0.025, 0.2), f(20.5, 0.025, 0.3), epsilon, T::one())
            .expect("reference parameters satisfy the outflow condition")
    }

    pub fn with_horizon(self, horizon: T) -> Result<Self> {
        Self::new(self.x, self.y, self.epsilon, horizon)
    }

    pub fn with_epsilon(self, epsilon: T) -> Result<Self> {
        Self::new(self.x, self.y, epsilon, self.horizon)
    }

    /// Factor `i` (0 = x, 1 = y) with its effective, epsilon-scaled volatility.
    pub fn factor(&self, i: usize) -> CirFactor<T> {
        let f = if i == 0 { self.x } else { self.y };
        CirFactor {
            sigma: f.sigma * self.epsilon,
            ..f
        }
    }

    pub fn sigma_x(&self) -> T {
        self.x.sigma * self.epsilon
    }

    pub fn sigma_y(&self) -> T {
        self.y.sigma * self.epsilon
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// First-order part of the generator in Stratonovich form,
    /// `(theta mu - sigma^2 / 4) - theta x` per coordinate.
    pub fn stratonovich_drift(&self) -> AffineDrift<T> {
        let quarter: T = lit(0.25);
        let (fx, fy) = (self.factor(0), self.factor(1));
        AffineDrift::new(
            vec![
                fx.theta * fx.mu - quarter * fx.sigma * fx.sigma,
                fy.theta * fy.mu - quarter * fy.sigma * fy.sigma,
            ],
            vec![fx.theta, fy.theta],
        )
        .expect("two finite coefficient pairs")
    }
}

/// `price_i = exp(ln_a[i] - b[i] x_i)` per factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineBondCoeffs<T> {
    pub ln_a: [T; 2],
    pub b: [T; 2],
}

impl<T: Real> AffineBondCoeffs<T> {
    pub fn a(&self, i: usize) -> T {
        self.ln_a[i].exp()
    }

    pub fn price(&self, x0: T, y0: T) -> T {
        (self.ln_a[0] + self.ln_a[1] - self.b[0] * x0 - self.b[1] * y0).exp()
    }
}

/// Standard affine closed form for one factor over horizon `t`, written with
/// `expm1`/`ln_1p` so it stays accurate as `sigma -> 0`.
fn factor_coeffs<T: Real>(f: CirFactor<T>, t: T) -> (T, T) {
    let two: T = lit(2.0);
    let gamma = (f.theta * f.theta + two * f.sigma * f.sigma).sqrt();
    let em = (-gamma * t).exp_m1();
    // gamma - theta, without cancellation
    let delta = two * f.sigma * f.sigma / (gamma + f.theta);
    let z = delta * em / (two * gamma);
    let b = -em / (gamma * (T::one() + z));
    let l = if delta == T::zero() {
        em / (two * gamma)
    } else {
        z.ln_1p() / delta
    };
    let ln_a = lit::<T>(4.0) * f.theta * f.mu / (gamma + f.theta) * (-t / two - l);
    (ln_a, b)
}

pub fn closed_form_coeffs<T: Real>(p: &Cir2Params<T>) -> AffineBondCoeffs<T> {
    let (ax, bx) = factor_coeffs(p.factor(0), p.horizon());
    let (ay, by) = factor_coeffs(p.factor(1), p.horizon());
    AffineBondCoeffs {
        ln_a: [ax, ay],
        b: [bx, by],
    }
}

/// Zero-coupon bond price `E[exp(-int_0^T (x + y) dt)]` from `(x0, y0)`.
pub fn bond_price_cir2<T: Real>(p: &Cir2Params<T>, x0: T, y0: T) -> T {
    closed_form_coeffs(p).price(x0, y0)
}

/// Integrates `B' = 1 - theta B - sigma^2 B^2 / 2`, `(ln A)' = -theta mu B`
/// from zero initial data with an adaptive Runge–Kutta method.
pub fn riccati_coeffs(p: &Cir2Params<f64>) -> Result<AffineBondCoeffs<f64>> {
    let mut ln_a = [0.0; 2];
    let mut b = [0.0; 2];
    for i in 0..2 {
        let f = p.factor(i);
        let y = integrate_adaptive(
            |_t, y, dy| {
                dy[0] = 1.0 - f.theta * y[0] - 0.5 * f.sigma * f.sigma * y[0] * y[0];
                dy[1] = -f.theta * f.mu * y[0];
            },
            0.0,
            p.horizon(),
            &[0.0, 0.0],
            OdeTolerance { rel: 1e-13, abs: 1e-15 },
        )?;
        b[i] = y[0];
        ln_a[i] = y[1];
    }
    Ok(AffineBondCoeffs { ln_a, b })
}

pub fn riccati_bond_price(p: &Cir2Params<f64>, x0: f64, y0: f64) -> Result<f64> {
    Ok(riccati_coeffs(p)?.price(x0, y0))
}

/// Bond price when both volatilities vanish: the discount along the
/// deterministic mean-reverting paths.
pub fn deterministic_bond_price(p: &Cir2Params<f64>, x0: f64, y0: f64) -> f64 {
    let t = p.horizon();
    let integral = |f: CirFactor<f64>, v0: f64| f.mu * t + (v0 - f.mu) * (-(-f.theta * t).exp_m1()) / f.theta;
    (-(integral(p.factor(0), x0) + integral(p.factor(1), y0))).exp()
}

/// Exact action of `P_t f(x) = E[f((sqrt(x) + sigma sqrt(t) Y)^2)]`,
/// `Y ~ N(0, 1)`, on a polynomial given by ascending coefficients. The
/// result is polynomial in `t`, so complex `t` is the analytic continuation.
pub fn cir_semigroup_apply<T: Real>(sigma: T, t: Complex<T>, coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; coeffs.len()];
    let s2t = t * (sigma * sigma);
    for (n, &c) in coeffs.iter().enumerate() {
        if c == zero {
            continue;
        }
        // C(2n, 2j) (2j - 1)!!, built up incrementally in j
        let mut weight = T::one();
        let mut pow = Complex::new(T::one(), T::zero());
        for j in 0..=n {
            if j > 0 {
                let (a, b) = ((2 * n - 2 * j + 2) as f64, (2 * n - 2 * j + 1) as f64);
                let k = (2 * j) as f64;
                // C(2n,2j)/C(2n,2j-2) * (2j-1)
                weight *= lit::<T>(a * b / k);
                pow *= s2t;
            }
            out[n - j] += c * pow * weight;
        }
    }
    out
}

/// `d/dt` of [`cir_semigroup_apply`], coefficientwise.
pub fn cir_semigroup_dt<T: Real>(sigma: T, t: Complex<T>, coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; coeffs.len()];
    let s2 = sigma * sigma;
    for (n, &c) in coeffs.iter().enumerate() {
        let mut weight = T::one();
        for j in 1..=n {
            let (a, b) = ((2 * n - 2 * j + 2) as f64, (2 * n - 2 * j + 1) as f64);
            let k = (2 * j) as f64;
            weight *= lit::<T>(a * b / k);
            // d/dt (s2 t)^j = j s2 (s2 t)^{j-1}
            let tj = (0..j - 1).fold(Complex::new(T::one(), T::zero()), |acc, _| acc * t * s2);
            out[n - j] += c * tj * (weight * s2 * lit(j as f64));
        }
    }
    out
}

/// `(2 sigma^2 x d^2/dx^2 + sigma^2 d/dx) f` on ascending coefficients.
pub fn bessel_generator_apply<T: Real>(sigma: T, coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
    let s2 = sigma * sigma;
    let mut out = vec![Complex::new(T::zero(), T::zero()); coeffs.len()];
    for (n, &c) in coeffs.iter().enumerate().skip(1) {
        let nf: T = lit(n as f64);
        // x^n -> 2 s2 n (n-1) x^{n-1} + s2 n x^{n-1}
        out[n - 1] += c * (s2 * nf * (lit::<T>(2.0) * (nf - T::one()) + T::one()));
    }
    out
}

/// Gauss–Hermite nodes and weights for the weight `exp(-z^2)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    let mut pp = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 3e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Hermite evaluation of `E[f((sqrt(x) + sigma sqrt(t) Y)^2)]` with 64 nodes.
pub fn cir_semigroup_quadrature(sigma: f64, t: f64, f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let (z, w) = gauss_hermite(64);
    let scale = sigma * (2.0 * t).sqrt();
    let sx = x.sqrt();
    let sum: f64 = z
        .iter()
        .zip(&w)
        .map(|(&zi, &wi)| {
            let r = sx + scale * zi;
            wi * f(r * r)
        })
        .sum();
    sum / std::f64::consts::PI.sqrt()
}
