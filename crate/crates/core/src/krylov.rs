//! Action of `exp(tau A)` on a vector for complex `tau` with `Re tau >= 0`,
//! by shift-and-invert (resolvent) Krylov projection.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::diffusion::DiscreteOperator;
use crate::error::{Error, Result};
use crate::linalg::{BandLu, BandMatrix, DenseMatrix};
use crate::mesh::GridFunction;
use crate::scalar::{dot, lit, norm2, to_f64, Real};
use crate::splitting::Propagator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KrylovVariant {
    /// Basis of `span{w, S w, ...}` with `S = (I - gamma A)^{-1}`.
    ShiftInvert,
    /// Plain Arnoldi on `A`, kept for cross-checking.
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrylovConfig {
    /// Maximal subspace dimension.
    pub m: usize,
    /// Fixed positive shift; `None` selects `|tau| / m`.
    pub shift: Option<f64>,
    /// Relative change of the projected solution below which the iteration stops.
    pub tol: f64,
    pub variant: KrylovVariant,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            m: 30,
            shift: None,
            tol: 1e-10,
            variant: KrylovVariant::ShiftInvert,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidInput("Krylov dimension must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("Krylov tolerance must be positive, got {}", self.tol)));
        }
        if let Some(g) = self.shift {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidInput(format!("Krylov shift must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// Effective shift for a step of length `tau`.
    pub fn effective_shift<T: Real>(&self, tau: Complex<T>) -> T {
        match self.shift {
            Some(g) => lit(g),
            None => tau.norm() / lit(self.m as f64),
        }
    }
}

/// Factorization of `I - gamma A`.
#[derive(Debug)]
pub enum ShiftedSolver<T> {
    Identity,
    Real(BandLu<T>),
    Complex(BandLu<Complex<T>>),
}

impl<T: Real> ShiftedSolver<T> {
    /// Overwrites `b` with `(I - gamma A)^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [Complex<T>]) {
        match self {
            ShiftedSolver::Identity => {}
            ShiftedSolver::Real(lu) => lu.solve_in_place(b),
            ShiftedSolver::Complex(lu) => lu.solve_in_place(b),
        }
    }
}

/// Banded LU factorization of `I - gamma A`.
pub fn factor_shifted<T: Real>(op: &DiscreteOperator<T>, gamma: Complex<T>) -> Result<ShiftedSolver<T>> {
    if gamma.re == T::zero() && gamma.im == T::zero() {
        return Ok(ShiftedSolver::Identity);
    }
    let a = op.matrix();
    let n = a.dim();
    let (kl, ku) = a.bandwidths();
    let named = |e: Error| match e {
        Error::SingularShift { pivot, .. } => Error::SingularShift {
            re: to_f64(gamma.re),
            im: to_f64(gamma.im),
            pivot,
        },
        other => other,
    };
    if gamma.im == T::zero() {
        let mut band = BandMatrix::<T>::new::<T>(n, kl, ku);
        for i in 0..n {
            band.set(i, i, T::one());
            for (j, v) in a.row(i) {
                let old = band.get(i, j).unwrap_or(T::zero());
                band.set(i, j, old - gamma.re * v);
            }
        }
        band.factor::<T>().map(ShiftedSolver::Real).map_err(named)
    } else {
        let mut band = BandMatrix::<Complex<T>>::new::<T>(n, kl, ku);
        let one = Complex::new(T::one(), T::zero());
        for i in 0..n {
            band.set(i, i, one);
            for (j, v) in a.row(i) {
                let old = band.get(i, j).unwrap_or(Complex::new(T::zero(), T::zero()));
                band.set(i, j, old - gamma * v);
            }
        }
        band.factor::<T>().map(ShiftedSolver::Complex).map_err(named)
    }
}

/// Shared cache of shifted factorizations keyed by operator identity and shift.
#[derive(Debug, Default)]
pub struct FactorCache<T> {
    map: RwLock<HashMap<(u64, u64, u64), Arc<ShiftedSolver<T>>>>,
    factorizations: AtomicUsize,
}

impl<T: Real> FactorCache<T> {
    pub fn new() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
            factorizations: AtomicUsize::new(0),
        }
    }

    /// Number of factorizations performed (cache misses).
    pub fn factorizations(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("factor cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_factor(&self, op: &DiscreteOperator<T>, gamma: Complex<T>) -> Result<Arc<ShiftedSolver<T>>> {
        let key = (op.id(), to_f64(gamma.re).to_bits(), to_f64(gamma.im).to_bits());
        if let Some(s) = self.map.read().expect("factor cache poisoned").get(&key) {
            return Ok(s.clone());
        }
        let solver = Arc::new(factor_shifted(op, gamma)?);
        self.factorizations.fetch_add(1, Ordering::Relaxed);
        let mut map = self.map.write().expect("factor cache poisoned");
        Ok(map.entry(key).or_insert(solver).clone())
    }
}

/// `exp(tau A) v` with a private factorization cache.
pub fn expmv<T: Real>(
    op: &DiscreteOperator<T>,
    v: &[Complex<T>],
    tau: Complex<T>,
    cfg: &KrylovConfig,
) -> Result<Vec<Complex<T>>> {
    expmv_cached(op, v, tau, cfg, &FactorCache::new())
}

/// `exp(tau A) v`, reusing factorizations from `cache`.
pub fn expmv_cached<T: Real>(
    op: &DiscreteOperator<T>,
    v: &[Complex<T>],
    tau: Complex<T>,
    cfg: &KrylovConfig,
    cache: &FactorCache<T>,
) -> Result<Vec<Complex<T>>> {
    cfg.validate()?;
    let n = op.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    if let Some(index) = v.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite { index });
    }
    if tau.re < T::zero() || !tau.re.is_finite() || !tau.im.is_finite() {
        return Err(Error::InvalidInput(format!(
            "diffusion time must have nonnegative real part, got {}{:+}i",
            tau.re, tau.im
        )));
    }
    if tau.re == T::zero() && tau.im == T::zero() {
        return Ok(v.to_vec());
    }
    let beta0 = norm2(v);
    if beta0 == T::zero() {
        return Ok(v.to_vec());
    }
    match cfg.variant {
        KrylovVariant::ShiftInvert => {
            let gamma = cfg.effective_shift(tau);
            let solver = cache.get_or_factor(op, Complex::new(gamma, T::zero()))?;
            arnoldi_expmv(v, beta0, tau, cfg, n, |w| {
                solver.solve_in_place(w);
                Ok(())
            }, |h| {
                // A_k = (I - H^{-1}) / gamma
                let hinv = h.inverse()?;
                let scale = Complex::new(T::one() / gamma, T::zero());
                Ok(DenseMatrix::identity(h.dim()).sub(&hinv).scale(scale))
            })
        }
        KrylovVariant::Polynomial => {
            let mut tmp = vec![Complex::new(T::zero(), T::zero()); n];
            arnoldi_expmv(
                v,
                beta0,
                tau,
                cfg,
                n,
                |w| {
                    op.matrix().apply_into(w, &mut tmp)?;
                    w.copy_from_slice(&tmp);
                    Ok(())
                },
                |h| Ok(h.clone()),
            )
        }
    }
}

/// Arnoldi with modified Gram–Schmidt and one reorthogonalization pass;
/// `generator` maps the projected Hessenberg matrix to the projection of `A`.
fn arnoldi_expmv<T, Op, Gen>(
    v: &[Complex<T>],
    beta0: T,
    tau: Complex<T>,
    cfg: &KrylovConfig,
    n: usize,
    mut apply: Op,
    generator: Gen,
) -> Result<Vec<Complex<T>>>
where
    T: Real,
    Op: FnMut(&mut [Complex<T>]) -> Result<()>,
    Gen: Fn(&DenseMatrix<T>) -> Result<DenseMatrix<T>>,
{
    let zero = Complex::new(T::zero(), T::zero());
    let m = cfg.m.min(n);
    let tol: T = lit(cfg.tol);
    let breakdown_tol = lit::<T>(1e-13);
    let mut basis: Vec<Vec<Complex<T>>> = Vec::with_capacity(m + 1);
    basis.push(v.iter().map(|z| z / beta0).collect());
    let mut h = vec![vec![zero; m]; m + 1];
    let mut prev: Option<Vec<Complex<T>>> = None;
    let mut coeffs: Vec<Complex<T>> = Vec::new();
    let mut k_used = 0;
    for j in 0..m {
        let mut w = basis[j].clone();
        apply(&mut w)?;
        if w.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::KrylovBreakdown { iteration: j + 1 });
        }
        let wnorm0 = norm2(&w);
        for _pass in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(q, &w);
                h[i][j] += c;
                for (wk, qk) in w.iter_mut().zip(q) {
                    *wk -= c * qk;
                }
            }
        }
        let hnext = norm2(&w);
        h[j + 1][j] = Complex::new(hnext, T::zero());
        k_used = j + 1;
        let happy = hnext <= breakdown_tol * wnorm0.max(T::min_positive_value());
        // projected solution on the current subspace
        let k = k_used;
        let hk = DenseMatrix::from_fn(k, |a, b| h[a][b]);
        let ak = generator(&hk)?;
        let e = ak.scale(tau).expm()?;
        let y = e.column(0);
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::KrylovBreakdown { iteration: k });
        }
        let converged = match &prev {
            Some(p) if k >= 2 => {
                let mut diff: Vec<Complex<T>> = y.clone();
                for (d, q) in diff.iter_mut().zip(p) {
                    *d -= q;
                }
                norm2(&diff) <= tol * norm2(&y)
            }
            _ => false,
        };
        coeffs = y.clone();
        prev = Some(y);
        if happy || converged || j + 1 == m {
            break;
        }
        basis.push(w.iter().map(|z| z / hnext).collect());
    }
    let mut out = vec![zero; n];
    for (q, c) in basis.iter().take(k_used).zip(&coeffs) {
        let c = c * beta0;
        for (o, qk) in out.iter_mut().zip(q) {
            *o += c * qk;
        }
    }
    Ok(out)
}

/// The diffusion propagator `P1_tau = exp(tau A)`.
#[derive(Debug, Clone)]
pub struct DiffusionPropagator<T> {
    op: Arc<DiscreteOperator<T>>,
    cfg: KrylovConfig,
    cache: Arc<FactorCache<T>>,
}

impl<T: Real> DiffusionPropagator<T> {
    pub fn new(op: Arc<DiscreteOperator<T>>, cfg: KrylovConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            op,
            cfg,
            cache: Arc::new(FactorCache::new()),
        })
    }

    pub fn with_cache(mut self, cache: Arc<FactorCache<T>>) -> Self {
        self.cache = cache;
        self
    }

    pub fn operator(&self) -> &Arc<DiscreteOperator<T>> {
        &self.op
    }

    pub fn config(&self) -> &KrylovConfig {
        &self.cfg
    }

    pub fn cache(&self) -> &Arc<FactorCache<T>> {
        &self.cache
    }
}

impl<T: Real> Propagator<T> for DiffusionPropagator<T> {
    fn propagate(&mut self, u: &GridFunction<T>, tau: Complex<T>) -> Result<GridFunction<T>> {
        let values = expmv_cached(&self.op, u.values(), tau, &self.cfg, &self.cache)?;
        u.with_values(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cir::Cir2Params;
    use crate::diffusion::{assemble_l1, CsrMatrix};
    use crate::mesh::SpectralMesh;

    type C = Complex<f64>;

    fn rel_err(a: &[C], b: &[C]) -> f64 {
        let d: Vec<C> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm2(&d) / norm2(b)
    }

    fn diagonal_op(lambdas: &[f64]) -> DiscreteOperator<f64> {
        let rows = lambdas.iter().enumerate().map(|(i, &l)| vec![(i, l)]).collect();
        DiscreteOperator::from_matrix(CsrMatrix::from_rows(rows)).unwrap()
    }

    fn small_cir2() -> DiscreteOperator<f64> {
        let mesh = Arc::new(SpectralMesh::build(8.0, 8.0, 4, 4).unwrap());
        assemble_l1(mesh, &Cir2Params::reference_model(1.0)).unwrap()
    }

    fn smooth_data(op: &DiscreteOperator<f64>) -> Vec<C> {
        op.mesh()
            .nodes()
            .map(|p| {
                let x = p.as_slice();
                C::new((-(x[0] + x[1]) * 0.3).exp(), 0.0)
            })
            .collect()
    }

    #[test]
    fn zero_time_is_identity() {
        let op = small_cir2();
        let v = smooth_data(&op);
        let out = expmv(&op, &v, C::new(0.0, 0.0), &KrylovConfig::default()).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn diagonal_matrix_matches_scalar_exponentials() {
        let lambdas: Vec<f64> = (0..40).map(|i| -(i as f64) * 2.5).collect();
        let op = diagonal_op(&lambdas);
        let v: Vec<C> = (0..40).map(|i| C::new(1.0 + 0.1 * i as f64, 0.5)).collect();
        for tau in [C::new(0.3, 0.0), C::new(0.1, -0.05), C::new(0.02, 0.4)] {
            for variant in [KrylovVariant::ShiftInvert, KrylovVariant::Polynomial] {
                let cfg = KrylovConfig {
                    m: 40,
                    variant,
                    ..KrylovConfig::default()
                };
                let out = expmv(&op, &v, tau, &cfg).unwrap();
                let exact: Vec<C> = v.iter().zip(&lambdas).map(|(x, l)| x * (tau * l).exp()).collect();
                assert!(rel_err(&out, &exact) < 1e-10, "{variant:?} {tau}");
            }
        }
    }

    #[test]
    fn eigenvectors_are_reproduced_with_one_vector() {
        let op = diagonal_op(&[-1.0, -4.0, -9.0]);
        let v = vec![C::new(0.0, 0.0), C::new(2.0, 0.0), C::new(0.0, 0.0)];
        let tau = C::new(0.2, 0.1);
        let cfg = KrylovConfig {
            m: 1,
            ..KrylovConfig::default()
        };
        let out = expmv(&op, &v, tau, &cfg).unwrap();
        assert!((out[1] - 2.0 * (tau * -4.0).exp()).norm() < 1e-14);
        assert!(out[0].norm() < 1e-15 && out[2].norm() < 1e-15);
    }

    #[test]
    fn conjugate_time_gives_conjugate_result() {
        let op = small_cir2();
        let v = smooth_data(&op);
        let tau = C::new(0.05, 0.02);
        let cfg = KrylovConfig::default();
        let a = expmv(&op, &v, tau, &cfg).unwrap();
        let b = expmv(&op, &v, tau.conj(), &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y.conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn semigroup_consistency() {
        let op = small_cir2();
        let v = smooth_data(&op);
        let cfg = KrylovConfig::default();
        for tau in [C::new(0.1, 0.0), C::new(0.0267, -0.02)] {
            let half = tau / 2.0;
            let two = expmv(&op, &expmv(&op, &v, half, &cfg).unwrap(), half, &cfg).unwrap();
            let one = expmv(&op, &v, tau, &cfg).unwrap();
            assert!(rel_err(&two, &one) < 1e-9, "{tau}");
        }
    }

    #[test]
    fn shift_invert_agrees_with_polynomial_on_small_problem() {
        let op = small_cir2();
        let v = smooth_data(&op);
        let tau = C::new(0.02, 0.01);
        let si = expmv(&op, &v, tau, &KrylovConfig::default()).unwrap();
        let poly = expmv(
            &op,
            &v,
            tau,
            &KrylovConfig {
                m: 80,
                variant: KrylovVariant::Polynomial,
                ..KrylovConfig::default()
            },
        )
        .unwrap();
        assert!(rel_err(&si, &poly) < 1e-8);
    }

    #[test]
    fn factorization_cache_counts_misses() {
        let op = small_cir2();
        let cache = FactorCache::new();
        let g = C::new(0.01, 0.0);
        let a = cache.get_or_factor(&op, g).unwrap();
        let b = cache.get_or_factor(&op, g).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.factorizations(), 1);
        cache.get_or_factor(&op, C::new(0.02, 0.0)).unwrap();
        assert_eq!(cache.factorizations(), 2);
        assert!(matches!(*cache.get_or_factor(&op, C::new(0.0, 0.0)).unwrap(), ShiftedSolver::Identity));
    }

    #[test]
    fn shifted_solve_residual() {
        let op = small_cir2();
        let b = smooth_data(&op);
        for gamma in [C::new(0.003, 0.0), C::new(0.003, 0.002)] {
            let solver = factor_shifted(&op, gamma).unwrap();
            let mut x = b.clone();
            solver.solve_in_place(&mut x);
            let ax = op.apply(&x).unwrap();
            let r: Vec<C> = x.iter().zip(&ax).zip(&b).map(|((xi, axi), bi)| xi - gamma * axi - bi).collect();
            assert!(norm2(&r) <= 1e-12 * norm2(&b));
        }
    }

    #[test]
    fn singular_shift_names_gamma() {
        // A = I, gamma = 1 makes I - gamma A the zero matrix
        let op = diagonal_op(&[1.0, 1.0]);
        match factor_shifted(&op, C::new(1.0, 0.0)) {
            Err(Error::SingularShift { re, .. }) => assert_eq!(re, 1.0),
            other => panic!("expected singular shift, got {other:?}"),
        }
    }

    #[test]
    fn input_contracts() {
        let op = diagonal_op(&[-1.0, -2.0]);
        let cfg = KrylovConfig::default();
        let v = vec![C::new(1.0, 0.0); 2];
        assert!(expmv(&op, &v, C::new(-0.1, 0.0), &cfg).is_err());
        assert!(matches!(expmv(&op, &v[..1], C::new(0.1, 0.0), &cfg), Err(Error::DimensionMismatch { .. })));
        let bad = vec![C::new(f64::NAN, 0.0), C::new(1.0, 0.0)];
        assert!(matches!(expmv(&op, &bad, C::new(0.1, 0.0), &cfg), Err(Error::NonFinite { index: 0 })));
        let zero_m = KrylovConfig {
            m: 0,
            ..KrylovConfig::default()
        };
        assert!(expmv(&op, &v, C::new(0.1, 0.0), &zero_m).is_err());
    }
}
