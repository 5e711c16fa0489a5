//! Polynomial weight functions and the weighted supremum norm used to
//! measure errors on the unbounded state space.

use std::fmt;

use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::scalar::{lit, Real};

/// The weight `psi_s(x) = (1 + |x|^2)^(s/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WeightFunction {
    exponent: u32,
}

impl WeightFunction {
    pub const fn new(exponent: u32) -> Self {
        Self { exponent }
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        let r2 = x.iter().fold(T::zero(), |a, &c| a + c * c);
        let base = T::one() + r2;
        if self.exponent.is_multiple_of(2) {
            base.powi((self.exponent / 2) as i32)
        } else {
            base.powf(lit::<T>(self.exponent as f64) / lit(2.0))
        }
    }
}

/// Subset of the mesh domain over which a norm is taken.
#[derive(Debug, Clone, PartialEq)]
pub enum Region<T> {
    Full,
    /// `sum_i x_i <= bound`
    Simplex { bound: T },
    /// Componentwise `lower <= x <= upper`.
    Box { lower: Vec<T>, upper: Vec<T> },
}

impl<T: Real> Region<T> {
    pub fn contains(&self, x: &[T]) -> bool {
        match self {
            Region::Full => true,
            Region::Simplex { bound } => x.iter().fold(T::zero(), |a, &c| a + c) <= *bound,
            Region::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&c, (&lo, &hi))| c >= lo && c <= hi),
        }
    }
}

impl<T: Real> fmt::Display for Region<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Full => write!(f, "full domain"),
            Region::Simplex { bound } => write!(f, "simplex sum(x) <= {bound}"),
            Region::Box { lower, upper } => write!(f, "box {lower:?}..{upper:?}"),
        }
    }
}

/// `max over nodes in region of |u(x)| / psi(x)`.
pub fn weighted_sup_norm<T: Real>(
    u: &GridFunction<T>,
    weight: WeightFunction,
    region: &Region<T>,
) -> Result<T> {
    let mesh = u.mesh();
    let mut found = false;
    let mut max = T::zero();
    for (p, v) in mesh.nodes().zip(u.values()) {
        let x = p.as_slice();
        if !region.contains(x) {
            continue;
        }
        found = true;
        max = max.max(v.norm() / weight.eval(x));
    }
    if found {
        Ok(max)
    } else {
        Err(Error::DegenerateRegion(region.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_complex::Complex;
    use proptest::prelude::*;

    use super::*;
    use crate::mesh::SpectralMesh;

    fn mesh() -> Arc<SpectralMesh<f64>> {
        Arc::new(SpectralMesh::build(4.0, 4.0, 4, 4).unwrap())
    }

    #[test]
    fn weight_examples() {
        let w = WeightFunction::new(6);
        assert_eq!(w.eval(&[0.0, 0.0]), 1.0);
        assert_eq!(w.eval(&[1.0, 0.0]), 8.0);
        assert_eq!(WeightFunction::new(0).eval(&[3.0, -7.0]), 1.0);
        assert!((WeightFunction::new(1).eval(&[3.0f64, 4.0]) - 26f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn norm_examples() {
        let m = mesh();
        let w = WeightFunction::new(6);
        let zero = GridFunction::zeros(m.clone());
        assert_eq!(weighted_sup_norm(&zero, w, &Region::Full).unwrap(), 0.0);
        let one = GridFunction::sample(m.clone(), |_| 1.0).unwrap();
        assert_eq!(weighted_sup_norm(&one, w, &Region::Full).unwrap(), 1.0);
        let psi = GridFunction::sample(m, |x| w.eval(x)).unwrap();
        assert!((weighted_sup_norm(&psi, w, &Region::Full).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_region_is_an_error() {
        let m = mesh();
        let u = GridFunction::sample(m, |_| 1.0).unwrap();
        let r = Region::Simplex { bound: -1.0 };
        assert!(matches!(
            weighted_sup_norm(&u, WeightFunction::new(0), &r),
            Err(Error::DegenerateRegion(_))
        ));
    }

    #[test]
    fn nested_refinement_never_decreases_norm() {
        // degree-2 GLL nodes are nested under element bisection
        let g = |x: &[f64]| (2.0 * x[0]).sin() * (x[1] - 0.3).cos();
        let w = WeightFunction::new(2);
        let mut last = 0.0;
        for e in [1, 2, 4, 8] {
            let m = Arc::new(SpectralMesh::build(3.0, 3.0, e, 2).unwrap());
            let u = GridFunction::sample(m, g).unwrap();
            let n = weighted_sup_norm(&u, w, &Region::Full).unwrap();
            assert!(n >= last);
            last = n;
        }
    }

    fn arb_values(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), n)
    }

    proptest! {
        #[test]
        fn weight_is_radially_monotone(a in -50.0..50.0f64, b in -50.0..50.0f64, s in 0u32..9) {
            let w = WeightFunction::new(s);
            let p = [a, b];
            let q = [a * 1.5, b * 1.5];
            prop_assert!(w.eval(&p) >= 1.0);
            prop_assert!(w.eval(&p) <= w.eval(&q));
        }

        #[test]
        fn norm_axioms(
            u in arb_values(81), v in arb_values(81),
            cr in -3.0..3.0f64, ci in -3.0..3.0f64, bound in 0.5..6.0f64,
        ) {
            let m = Arc::new(SpectralMesh::build(4.0, 4.0, 2, 4).unwrap());
            let to_gf = |vals: &[(f64, f64)]| {
                GridFunction::new(m.clone(), vals.iter().map(|&(a, b)| Complex::new(a, b)).collect()).unwrap()
            };
            let (fu, fv) = (to_gf(&u), to_gf(&v));
            let w = WeightFunction::new(6);
            let full = Region::Full;
            let nu = weighted_sup_norm(&fu, w, &full).unwrap();
            let nv = weighted_sup_norm(&fv, w, &full).unwrap();

            let c = Complex::new(cr, ci);
            let scaled = fu.with_values(fu.values().iter().map(|z| z * c).collect()).unwrap();
            let ns = weighted_sup_norm(&scaled, w, &full).unwrap();
            prop_assert!((ns - c.norm() * nu).abs() <= 1e-12 * (1.0 + ns));

            let sum = fu.with_values(fu.values().iter().zip(fv.values()).map(|(a, b)| a + b).collect()).unwrap();
            prop_assert!(weighted_sup_norm(&sum, w, &full).unwrap() <= nu + nv + 1e-12);

            let small = Region::Simplex { bound };
            prop_assert!(weighted_sup_norm(&fu, w, &small).unwrap() <= nu);
        }
    }
}
