//! Transport along an affine vector field, solved exactly along
//! characteristics and projected back onto the mesh by interpolation.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::mesh::{GridFunction, InterpScratch, Point};
use crate::scalar::{lit, to_f64, Real};
use crate::splitting::Propagator;

/// Componentwise drift `dx_i/dt = a_i - b_i x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDrift<T> {
    a: Vec<T>,
    b: Vec<T>,
}

impl<T: Real> AffineDrift<T> {
    pub fn new(a: Vec<T>, b: Vec<T>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() || a.len() > 2 {
            return Err(Error::InvalidInput(format!(
                "drift needs matching 1D or 2D coefficients, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("drift coefficients must be finite".into()));
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    /// Equilibrium `a_i / b_i` of coordinate `i` (infinite when `b_i = 0`).
    pub fn equilibrium(&self, i: usize) -> T {
        self.a[i] / self.b[i]
    }

    /// Exact flow of the affine field after time `t >= 0`.
    pub fn exact_flow(&self, x: &[T], t: T) -> Point<T> {
        let mut out = [T::zero(); 2];
        for i in 0..self.dim() {
            out[i] = flow_1d(self.a[i], self.b[i], x[i], t);
        }
        Point::from_slice(&out[..self.dim()])
    }
}

/// `x e^{-bt} + a (1 - e^{-bt}) / b`, with the second factor evaluated via
/// `expm1` and a series for `|bt| < 1e-8`.
fn flow_1d<T: Real>(a: T, b: T, x: T, t: T) -> T {
    let bt = b * t;
    let phi = if bt.abs() < lit(1e-8) {
        t * (T::one() - bt / lit(2.0) + bt * bt / lit(6.0))
    } else {
        -(-bt).exp_m1() / b
    };
    x * (-bt).exp() + a * phi
}

/// The drift propagator `P0_t f = f o Fl_t`.
#[derive(Debug, Clone)]
pub struct DriftPropagator<T> {
    drift: AffineDrift<T>,
}

impl<T: Real> DriftPropagator<T> {
    pub fn new(drift: AffineDrift<T>) -> Self {
        Self { drift }
    }

    pub fn drift(&self) -> &AffineDrift<T> {
        &self.drift
    }

    /// New nodal values `u(Fl_t(node))`.
    pub fn step(&self, u: &GridFunction<T>, t: T) -> Result<GridFunction<T>> {
        if !(t >= T::zero()) {
            return Err(Error::ComplexTimeRejected {
                re: to_f64(t),
                im: 0.0,
            });
        }
        if t == T::zero() {
            return Ok(u.clone());
        }
        let mesh = u.mesh();
        if mesh.dim() != self.drift.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.drift.dim(),
                found: mesh.dim(),
            });
        }
        // the domain box is flow invariant iff both extreme corners stay inside
        let upper = mesh.upper();
        let zero = [T::zero(); 2];
        for corner in [&zero[..mesh.dim()], upper.as_slice()] {
            let img = self.drift.exact_flow(corner, t);
            if !mesh.contains(img.as_slice()) {
                let (axis, value) = img
                    .as_slice()
                    .iter()
                    .enumerate()
                    .find(|(i, &c)| c < T::zero() || c > upper.as_slice()[*i])
                    .map(|(i, &c)| (i, c))
                    .unwrap_or((0, img.as_slice()[0]));
                return Err(Error::OutOfDomain {
                    axis,
                    value: to_f64(value),
                    upper: to_f64(upper.as_slice()[axis]),
                });
            }
        }
        let mut scratch = InterpScratch::new(mesh.degree());
        let values = mesh
            .nodes()
            .map(|p| {
                let foot = self.drift.exact_flow(p.as_slice(), t);
                u.interpolate_with(foot.as_slice(), &mut scratch)
            })
            .collect::<Result<Vec<Complex<T>>>>()?;
        u.with_values(values)
    }
}

impl<T: Real> Propagator<T> for DriftPropagator<T> {
    fn real_time_only(&self) -> bool {
        true
    }

    fn propagate(&mut self, u: &GridFunction<T>, tau: Complex<T>) -> Result<GridFunction<T>> {
        if tau.im != T::zero() {
            return Err(Error::ComplexTimeRejected {
                re: to_f64(tau.re),
                im: to_f64(tau.im),
            });
        }
        self.step(u, tau.re)
    }
}
