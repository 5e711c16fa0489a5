//! Spectral-element assembly of the degenerate diffusion operator with
//! killing term, `A = M^{-1} K` with GLL-lumped mass `M`.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex;

use crate::cir::Cir2Params;
use crate::error::{Error, Result};
use crate::mesh::{Axis, SpectralMesh};
use crate::scalar::{lit, to_f64, Real};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Dense row-major input, keeping nonzeros only.
    pub fn from_dense(n: usize, dense: &[T]) -> Self {
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| dense[i * n + j] != T::zero())
                    .map(|j| (j, dense[i * n + j]))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i).find(|e| e.0 == j).map_or(T::zero(), |e| e.1)
    }

    /// Lower and upper bandwidths of the sparsity pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.n];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, v: &[Complex<T>], out: &mut [Complex<T>]) -> Result<()> {
        if v.len() != self.n || out.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: if v.len() != self.n { v.len() } else { out.len() },
            });
        }
        for (i, o) in out.iter_mut().enumerate() {
            let (mut re, mut im) = (T::zero(), T::zero());
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[k];
                let x = v[self.cols[k]];
                re += a * x.re;
                im += a * x.im;
            }
            *o = Complex::new(re, im);
        }
        Ok(())
    }
}

/// Which pieces of the generator were assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorTerms {
    pub diffusion: bool,
    pub first_order: bool,
    pub killing: bool,
}

static NEXT_OPERATOR_ID: AtomicU64 = AtomicU64::new(1);

/// Assembled generator on a mesh.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<T> {
    id: u64,
    mesh: Arc<SpectralMesh<T>>,
    matrix: CsrMatrix<T>,
    terms: OperatorTerms,
}

impl<T: Real> DiscreteOperator<T> {
    pub fn new(mesh: Arc<SpectralMesh<T>>, matrix: CsrMatrix<T>, terms: OperatorTerms) -> Result<Self> {
        if matrix.dim() != mesh.node_count() {
            return Err(Error::DimensionMismatch {
                expected: mesh.node_count(),
                found: matrix.dim(),
            });
        }
        Ok(Self {
            id: NEXT_OPERATOR_ID.fetch_add(1, Ordering::Relaxed),
            mesh,
            matrix,
            terms,
        })
    }

    /// Wraps an arbitrary matrix on a 1D mesh of matching size; used for
    /// testing the propagators against dense references.
    pub fn from_matrix(matrix: CsrMatrix<T>) -> Result<Self> {
        let n = matrix.dim();
        if n < 2 {
            return Err(Error::InvalidInput("operator needs at least two unknowns".into()));
        }
        let mesh = Arc::new(SpectralMesh::build_1d(T::one(), n - 1, 1)?);
        let terms = OperatorTerms {
            diffusion: false,
            first_order: false,
            killing: false,
        };
        Self::new(mesh, matrix, terms)
    }

    /// Process-unique identity, used as a cache key.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn mesh(&self) -> &Arc<SpectralMesh<T>> {
        &self.mesh
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn terms(&self) -> OperatorTerms {
        self.terms
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.matrix.apply(v)
    }

    /// Coordinate-format dump, one `row col value` triple per line.
    pub fn write_coordinate(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut w = std::io::BufWriter::new(file);
        for i in 0..self.dim() {
            for (j, v) in self.matrix.row(i) {
                writeln!(w, "{i} {j} {:e}", to_f64(v)).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)
    }
}

/// 1D weak form of `c x u'' + d u' - kill x u` on one axis, as sparse rows of
/// `M^{-1} K`.
///
/// The second-order term is integrated by parts once as `(c x u')' + (d - c) u'`,
/// dropping the flux at both ends (it vanishes at `x = 0` and is the
/// do-nothing condition at the truncation boundary).
fn assemble_axis<T: Real>(axis: &Axis<T>, c: T, d: T, kill: T) -> Vec<Vec<(usize, T)>> {
    let n = axis.len();
    let p = axis.degree();
    let rule = axis.rule();
    let dref = rule.derivative_matrix();
    let wref = rule.weights();
    let nodes = axis.nodes();
    let h = axis.element_width();
    let jac = lit::<T>(2.0) / h;
    let half = h / lit(2.0);
    let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for e in 0..axis.elements() {
        let first = e * p;
        for i in 0..=p {
            for j in 0..=p {
                let mut k = T::zero();
                for q in 0..=p {
                    let wq = wref[q] * half;
                    k -= wq * c * nodes[first + q] * dref[q][j] * dref[q][i] * jac * jac;
                }
                k += wref[i] * half * (d - c) * dref[i][j] * jac;
                if k != T::zero() {
                    rows[first + i].push((first + j, k));
                }
            }
        }
    }
    let mass = axis.weights();
    for (g, row) in rows.iter_mut().enumerate() {
        if kill != T::zero() {
            row.push((g, -kill * nodes[g] * mass[g]));
        }
        for entry in row.iter_mut() {
            entry.1 /= mass[g];
        }
    }
    rows
}

/// Diffusion part of the CIR2 generator in Stratonovich split form,
/// `1/2 sx^2 x u_xx + 1/4 sx^2 u_x + 1/2 sy^2 y u_yy + 1/4 sy^2 u_y - (x + y) u`.
///
/// The operator is a Kronecker sum of 1D operators, so the tensor-product
/// Galerkin matrix with lumped mass is `A_x (x) I + I (x) A_y`.
pub fn assemble_l1<T: Real>(mesh: Arc<SpectralMesh<T>>, params: &Cir2Params<T>) -> Result<DiscreteOperator<T>> {
    if mesh.dim() != 2 {
        return Err(Error::InvalidInput("CIR2 operator needs a 2D mesh".into()));
    }
    let (sx, sy) = (params.sigma_x(), params.sigma_y());
    if sx < T::zero() || sy < T::zero() {
        return Err(Error::InvalidInput("volatilities must be nonnegative".into()));
    }
    let half = lit::<T>(0.5);
    let quarter = lit::<T>(0.25);
    let ax = assemble_axis(mesh.axis(0), half * sx * sx, quarter * sx * sx, T::one());
    let ay = assemble_axis(mesh.axis(1), half * sy * sy, quarter * sy * sy, T::one());
    let nx = mesh.axis(0).len();
    let ny = mesh.axis(1).len();
    let mut rows = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let mut row: Vec<(usize, T)> = Vec::with_capacity(ax[ix].len() + ay[iy].len());
            row.extend(ax[ix].iter().map(|&(jx, v)| (iy * nx + jx, v)));
            row.extend(ay[iy].iter().map(|&(jy, v)| (jy * nx + ix, v)));
            rows.push(row);
        }
    }
    let terms = OperatorTerms {
        diffusion: sx > T::zero() || sy > T::zero(),
        first_order: sx > T::zero() || sy > T::zero(),
        killing: true,
    };
    DiscreteOperator::new(mesh, CsrMatrix::from_rows(rows), terms)
}

/// One-dimensional squared-Bessel generator `2 s^2 x u'' + s^2 u'`, optionally
/// with the killing term `- x u`.
pub fn assemble_l1_1d<T: Real>(mesh: Arc<SpectralMesh<T>>, sigma: T, with_killing: bool) -> Result<DiscreteOperator<T>> {
    if mesh.dim() != 1 {
        return Err(Error::InvalidInput("expected a 1D mesh".into()));
    }
    if !(sigma >= T::zero()) {
        return Err(Error::InvalidInput("sigma must be nonnegative".into()));
    }
    let s2 = sigma * sigma;
    let kill = if with_killing { T::one() } else { T::zero() };
    let rows = assemble_axis(mesh.axis(0), lit::<T>(2.0) * s2, s2, kill);
    let terms = OperatorTerms {
        diffusion: sigma > T::zero(),
        first_order: sigma > T::zero(),
        killing: with_killing,
    };
    DiscreteOperator::new(mesh, CsrMatrix::from_rows(rows), terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::GridFunction;

    type C = Complex<f64>;

    fn reference_op(eps: f64) -> DiscreteOperator<f64> {
        let mesh = Arc::new(SpectralMesh::build(16.0, 16.0, 16, 4).unwrap());
        assemble_l1(mesh, &Cir2Params::reference_model(eps)).unwrap()
    }

    fn interior(mesh: &SpectralMesh<f64>, idx: usize) -> bool {
        let p = mesh.node(idx);
        p.as_slice()
            .iter()
            .zip(mesh.axes())
            .all(|(&c, ax)| c < ax.length())
    }

    fn applied(op: &DiscreteOperator<f64>, g: impl Fn(&[f64]) -> f64) -> Vec<C> {
        let u = GridFunction::sample(op.mesh().clone(), g).unwrap();
        op.apply(u.values()).unwrap()
    }

    #[test]
    fn constants_are_killed_by_the_potential_only() {
        let op = reference_op(1.0);
        let out = applied(&op, |_| 1.0);
        let mesh = op.mesh();
        for (i, v) in out.iter().enumerate() {
            if interior(mesh, i) {
                let p = mesh.node(i);
                let x = p.as_slice();
                assert!((v.re + x[0] + x[1]).abs() < 1e-10, "node {i}");
            }
        }
    }

    #[test]
    fn zero_volatility_is_pure_killing() {
        let op = reference_op(0.0);
        let mesh = op.mesh().clone();
        let out = applied(&op, |x| (x[0] - 0.3 * x[1]).cos());
        for (i, v) in out.iter().enumerate() {
            let p = mesh.node(i);
            let x = p.as_slice();
            let u = (x[0] - 0.3 * x[1]).cos();
            assert!((v.re + (x[0] + x[1]) * u).abs() < 1e-12);
        }
        // diagonal matrix
        for i in 0..op.dim() {
            assert!(op.matrix().row(i).all(|(j, v)| j == i || v == 0.0));
        }
    }

    #[test]
    fn linear_data_matches_symbolic_generator() {
        let op = reference_op(1.0);
        let sx = 0.2f64;
        let out = applied(&op, |x| x[0]);
        for (i, v) in out.iter().enumerate() {
            if interior(op.mesh(), i) {
                let p = op.mesh().node(i);
                let (x, y) = (p.as_slice()[0], p.as_slice()[1]);
                let expected = 0.25 * sx * sx - x * (x + y);
                assert!((v.re - expected).abs() < 1e-10 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn monomials_up_to_degree_three_match_symbolic_generator() {
        let mesh = Arc::new(SpectralMesh::build(8.0, 8.0, 8, 4).unwrap());
        let params = Cir2Params::reference_model(1.0);
        let op = assemble_l1(mesh.clone(), &params).unwrap();
        let (sx, sy) = (params.sigma_x(), params.sigma_y());
        for m in 0..=3i32 {
            for k in 0..=(3 - m) {
                let f = |x: &[f64]| x[0].powi(m) * x[1].powi(k);
                let out = applied(&op, f);
                for (i, v) in out.iter().enumerate() {
                    if !interior(&mesh, i) {
                        continue;
                    }
                    let p = mesh.node(i);
                    let (x, y) = (p.as_slice()[0], p.as_slice()[1]);
                    let (mf, kf) = (m as f64, k as f64);
                    let dx = if m >= 1 { mf * x.powi(m - 1) * y.powi(k) } else { 0.0 };
                    let dxx = if m >= 2 { mf * (mf - 1.0) * x.powi(m - 2) * y.powi(k) } else { 0.0 };
                    let dy = if k >= 1 { kf * x.powi(m) * y.powi(k - 1) } else { 0.0 };
                    let dyy = if k >= 2 { kf * (kf - 1.0) * x.powi(m) * y.powi(k - 2) } else { 0.0 };
                    let exact = 0.5 * sx * sx * x * dxx + 0.25 * sx * sx * dx + 0.5 * sy * sy * y * dyy
                        + 0.25 * sy * sy * dy
                        - (x + y) * f(&[x, y]);
                    assert!((v.re - exact).abs() < 1e-9 * (1.0 + exact.abs()), "m={m} k={k} at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn one_dimensional_operator_examples() {
        let mesh = Arc::new(SpectralMesh::build_1d(10.0, 10, 4).unwrap());
        let sigma = 0.3;
        let op = assemble_l1_1d(mesh.clone(), sigma, false).unwrap();
        let s2 = sigma * sigma;
        let last = mesh.node_count() - 1;
        let cst = applied(&op, |_| 2.0);
        assert!(cst[..last].iter().all(|v| v.norm() < 1e-12));
        let lin = applied(&op, |x| x[0]);
        assert!(lin[..last].iter().all(|v| (v.re - s2).abs() < 1e-12));
        let quad = applied(&op, |x| x[0] * x[0]);
        for (i, v) in quad[..last].iter().enumerate() {
            let x = mesh.node(i).as_slice()[0];
            assert!((v.re - 6.0 * s2 * x).abs() < 1e-11);
        }
    }

    #[test]
    fn degenerate_boundary_row_has_no_second_order_flux() {
        // at x = 0 the row reduces to the first-order term: applied to x^2
        // (zero slope at the origin) it must vanish
        let mesh = Arc::new(SpectralMesh::build_1d(4.0, 4, 4).unwrap());
        let op = assemble_l1_1d(mesh, 0.5, false).unwrap();
        let out = applied(&op, |x| x[0] * x[0]);
        assert!(out[0].norm() < 1e-13);
    }

    #[test]
    fn locality_and_apply_contracts() {
        let mesh = Arc::new(SpectralMesh::build(4.0, 4.0, 4, 2).unwrap());
        let op = assemble_l1(mesh.clone(), &Cir2Params::reference_model(1.0)).unwrap();
        let nx = mesh.axis(0).len();
        for i in 0..op.dim() {
            for (j, _) in op.matrix().row(i) {
                let (ix, iy) = (i % nx, i / nx);
                let (jx, jy) = (j % nx, j / nx);
                assert!(ix.abs_diff(jx) <= 2 && iy.abs_diff(jy) <= 2);
                assert!(ix == jx || iy == jy);
            }
        }
        let n = op.dim();
        assert!(op.apply(&vec![C::new(0.0, 0.0); n]).unwrap().iter().all(|v| v.norm() == 0.0));
        let mut e = vec![C::new(0.0, 0.0); n];
        e[7] = C::new(1.0, 0.0);
        let col = op.apply(&e).unwrap();
        for i in 0..n {
            assert_eq!(col[i].re, op.matrix().get(i, 7));
        }
        let u: Vec<C> = (0..n).map(|i| C::new((i as f64).sin(), 0.0)).collect();
        let v: Vec<C> = (0..n).map(|i| C::new((i as f64).cos(), 0.0)).collect();
        let w: Vec<C> = u.iter().zip(&v).map(|(a, b)| a + C::new(0.0, 1.0) * b).collect();
        let (au, av, aw) = (op.apply(&u).unwrap(), op.apply(&v).unwrap(), op.apply(&w).unwrap());
        for i in 0..n {
            assert!((aw[i] - (au[i] + C::new(0.0, 1.0) * av[i])).norm() < 1e-12);
        }
        assert!(matches!(op.apply(&u[..3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bandwidth_of_lexicographic_order() {
        let op = reference_op(1.0);
        assert_eq!(op.matrix().bandwidths(), (4 * 65, 4 * 65));
    }

    #[test]
    fn coordinate_dump() {
        let mesh = Arc::new(SpectralMesh::build_1d(1.0, 1, 1).unwrap());
        let op = assemble_l1_1d(mesh, 1.0, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        op.write_coordinate(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), op.matrix().nnz());
        assert!(text.lines().all(|l| l.split_whitespace().count() == 3));
    }
}
