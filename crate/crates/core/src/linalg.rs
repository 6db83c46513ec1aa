//! Dense linear algebra over small finite fields: matrices, subspaces in
//! reduced row echelon form, semilinear maps (matrix plus Frobenius twist),
//! and subquotients with induced maps.
//!
//! Vectors are column vectors; a map is `x -> M · σ^t(x)`.

use crate::error::{Error, Result};
use crate::fq::{El, FqField};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<El>,
}

impl Mat {
    pub fn zero(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            a: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zero(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<El>]) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut a = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            a.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, a }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> El {
        self.a[i * self.cols + j]
    }
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: El) {
        self.a[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[El] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, k: &FqField, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let s = self.get(i, l);
                if s == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let add = k.mul(s, other.get(l, j));
                    out.set(i, j, k.add(out.get(i, j), add));
                }
            }
        }
        out
    }

    pub fn add(&self, k: &FqField, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.a.iter_mut().zip(&other.a) {
            *x = k.add(*x, *y);
        }
        out
    }

    pub fn apply(&self, k: &FqField, v: &[El]) -> Vec<El> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0;
            for j in 0..self.cols {
                acc = k.add(acc, k.mul(self.get(i, j), v[j]));
            }
            out[i] = acc;
        }
        out
    }

    /// Entrywise σ^t of the matrix.
    pub fn frob_map(&self, k: &FqField, t: i64) -> Mat {
        let mut out = self.clone();
        for x in out.a.iter_mut() {
            *x = k.frob_pow(*x, t);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|&x| x == 0)
    }

    /// Row reduction in place; returns pivot columns.
    pub fn rref(&mut self, k: &FqField) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let mut piv = None;
            for i in r..self.rows {
                if self.get(i, c) != 0 {
                    piv = Some(i);
                    break;
                }
            }
            let Some(piv) = piv else { continue };
            if piv != r {
                for j in 0..self.cols {
                    let (x, y) = (self.get(r, j), self.get(piv, j));
                    self.set(r, j, y);
                    self.set(piv, j, x);
                }
            }
            let inv = k.inv(self.get(r, c));
            for j in 0..self.cols {
                self.set(r, j, k.mul(inv, self.get(r, j)));
            }
            for i in 0..self.rows {
                if i != r && self.get(i, c) != 0 {
                    let factor = self.get(i, c);
                    for j in 0..self.cols {
                        let sub = k.mul(factor, self.get(r, j));
                        self.set(i, j, k.sub(self.get(i, j), sub));
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self, k: &FqField) -> usize {
        let mut m = self.clone();
        m.rref(k).len()
    }

    /// Inverse of a square matrix, if it exists.
    pub fn inverse(&self, k: &FqField) -> Option<Mat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = Mat::zero(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, n + i, 1);
        }
        let pivots = aug.rref(k);
        if pivots.len() < n || pivots[n - 1] >= n {
            return None;
        }
        let mut inv = Mat::zero(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, aug.get(i, n + j));
            }
        }
        Some(inv)
    }

    /// Kernel of the linear map x -> self · x, as a subspace of the domain.
    pub fn kernel(&self, k: &FqField) -> Subspace {
        let mut m = self.clone();
        let pivots = m.rref(k);
        let mut basis = Vec::new();
        let piv_iter = pivots.to_vec();
        for free in 0..self.cols {
            if piv_iter.contains(&free) {
                continue;
            }
            let mut v = vec![0; self.cols];
            v[free] = 1;
            for (r, &pc) in piv_iter.iter().enumerate() {
                v[pc] = k.neg(m.get(r, free));
            }
            basis.push(v);
        }
        Subspace::from_rows(k, self.cols, basis)
    }

    /// Column space of the matrix, inside the codomain.
    pub fn column_space(&self, k: &FqField) -> Subspace {
        let rows: Vec<Vec<El>> = (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).collect())
            .collect();
        Subspace::from_rows(k, self.rows, rows)
    }

    /// One solution x of self · x = rhs, if any.
    pub fn solve(&self, k: &FqField, rhs: &[El]) -> Option<Vec<El>> {
        assert_eq!(self.rows, rhs.len());
        let mut aug = Mat::zero(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, self.cols, rhs[i]);
        }
        let pivots = aug.rref(k);
        if pivots.contains(&self.cols) {
            return None;
        }
        let mut x = vec![0; self.cols];
        for (r, &pc) in pivots.iter().enumerate() {
            x[pc] = aug.get(r, self.cols);
        }
        Some(x)
    }
}

/// A subspace of k^n held as a reduced-row-echelon basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subspace {
    pub n: usize,
    /// rows form the basis, in RREF
    pub basis: Mat,
}

impl Subspace {
    pub fn zero(n: usize) -> Subspace {
        Subspace {
            n,
            basis: Mat::zero(0, n),
        }
    }

    pub fn full(n: usize) -> Subspace {
        Subspace {
            n,
            basis: Mat::identity(n),
        }
    }

    pub fn from_rows(k: &FqField, n: usize, rows: Vec<Vec<El>>) -> Subspace {
        let mut m = Mat::from_rows(&rows);
        if rows.is_empty() {
            return Subspace::zero(n);
        }
        let pivots = m.rref(k);
        let mut basis = Mat::zero(pivots.len(), n);
        for i in 0..pivots.len() {
            for j in 0..n {
                basis.set(i, j, m.get(i, j));
            }
        }
        Subspace { n, basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.rows
    }

    pub fn basis_rows(&self) -> Vec<Vec<El>> {
        (0..self.dim()).map(|i| self.basis.row(i).to_vec()).collect()
    }

    pub fn contains(&self, k: &FqField, v: &[El]) -> bool {
        // reduce v against the RREF basis
        let mut v = v.to_vec();
        let mut row = 0;
        for c in 0..self.n {
            if row < self.dim() && self.basis.get(row, c) == 1 && is_pivot(&self.basis, row, c) {
                if v[c] != 0 {
                    let f = v[c];
                    for j in 0..self.n {
                        v[j] = k.sub(v[j], k.mul(f, self.basis.get(row, j)));
                    }
                }
                row += 1;
            }
        }
        v.iter().all(|&x| x == 0)
    }

    pub fn contains_space(&self, k: &FqField, other: &Subspace) -> bool {
        (0..other.dim()).all(|i| self.contains(k, other.basis.row(i)))
    }

    pub fn sum(&self, k: &FqField, other: &Subspace) -> Subspace {
        assert_eq!(self.n, other.n);
        let mut rows = self.basis_rows();
        rows.extend(other.basis_rows());
        Subspace::from_rows(k, self.n, rows)
    }

    pub fn intersect(&self, k: &FqField, other: &Subspace) -> Subspace {
        // x in both spans: solve for combinations; use kernel of stacked basis
        assert_eq!(self.n, other.n);
        let d1 = self.dim();
        let d2 = other.dim();
        if d1 == 0 || d2 == 0 {
            return Subspace::zero(self.n);
        }
        // columns: coefficients (a, b); rows: ambient coordinates
        let mut m = Mat::zero(self.n, d1 + d2);
        for i in 0..d1 {
            for c in 0..self.n {
                m.set(c, i, self.basis.get(i, c));
            }
        }
        for i in 0..d2 {
            for c in 0..self.n {
                m.set(c, d1 + i, k.neg(other.basis.get(i, c)));
            }
        }
        let ker = m.kernel(k);
        let mut rows = Vec::new();
        for bi in 0..ker.dim() {
            let coeffs = ker.basis.row(bi);
            let mut v = vec![0; self.n];
            for i in 0..d1 {
                for c in 0..self.n {
                    v[c] = k.add(v[c], k.mul(coeffs[i], self.basis.get(i, c)));
                }
            }
            rows.push(v);
        }
        Subspace::from_rows(k, self.n, rows)
    }

    /// Image under a linear matrix.
    pub fn image_under(&self, k: &FqField, m: &Mat) -> Subspace {
        let rows: Vec<Vec<El>> = (0..self.dim())
            .map(|i| m.apply(k, self.basis.row(i)))
            .collect();
        Subspace::from_rows(k, m.rows, rows)
    }

    /// Preimage {x : m·x ∈ self} of this subspace under a linear matrix.
    pub fn preimage_under(&self, k: &FqField, m: &Mat) -> Subspace {
        assert_eq!(m.rows, self.n);
        // x with m x ∈ span: [m | -basis^T] kernel projected to x-part
        let d = self.dim();
        let mut stack = Mat::zero(self.n, m.cols + d);
        for i in 0..self.n {
            for j in 0..m.cols {
                stack.set(i, j, m.get(i, j));
            }
            for b in 0..d {
                stack.set(i, m.cols + b, k.neg(self.basis.get(b, i)));
            }
        }
        let ker = stack.kernel(k);
        let rows: Vec<Vec<El>> = (0..ker.dim())
            .map(|i| ker.basis.row(i)[..m.cols].to_vec())
            .collect();
        Subspace::from_rows(k, m.cols, rows)
    }

    /// Applies σ^t entrywise to a basis; the image of a subspace under the
    /// (non-linear but additive) Frobenius power is again a subspace.
    pub fn frob_map(&self, k: &FqField, t: i64) -> Subspace {
        let rows: Vec<Vec<El>> = self
            .basis_rows()
            .into_iter()
            .map(|r| r.into_iter().map(|x| k.frob_pow(x, t)).collect())
            .collect();
        Subspace::from_rows(k, self.n, rows)
    }
}

fn is_pivot(m: &Mat, row: usize, col: usize) -> bool {
    if m.get(row, col) != 1 {
        return false;
    }
    (0..col).all(|c| m.get(row, c) == 0)
}

/// A σ-semilinear map x -> mat · σ^twist(x).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemiMap {
    pub mat: Mat,
    pub twist: i64,
}

impl SemiMap {
    pub fn linear(mat: Mat) -> SemiMap {
        SemiMap { mat, twist: 0 }
    }

    pub fn apply(&self, k: &FqField, v: &[El]) -> Vec<El> {
        let tv: Vec<El> = v.iter().map(|&x| k.frob_pow(x, self.twist)).collect();
        self.mat.apply(k, &tv)
    }

    /// self ∘ other.
    pub fn compose(&self, k: &FqField, other: &SemiMap) -> SemiMap {
        let m = self.mat.mul(k, &other.mat.frob_map(k, self.twist));
        SemiMap {
            mat: m,
            twist: self.twist + other.twist,
        }
    }

    pub fn kernel(&self, k: &FqField) -> Subspace {
        self.mat.kernel(k).frob_map(k, -self.twist)
    }

    pub fn image(&self, k: &FqField) -> Subspace {
        self.mat.column_space(k)
    }

    /// One solution of self(x) = y, if any.
    pub fn solve(&self, k: &FqField, y: &[El]) -> Option<Vec<El>> {
        let z = self.mat.solve(k, y)?;
        Some(z.iter().map(|&c| k.frob_pow(c, -self.twist)).collect())
    }

    pub fn inverse(&self, k: &FqField) -> Option<SemiMap> {
        let inv = self.mat.inverse(k)?;
        Some(SemiMap {
            mat: inv.frob_map(k, -self.twist),
            twist: -self.twist,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.mat.is_zero()
    }
}

/// A subquotient num/den of an ambient k^n, with a fixed transversal basis.
#[derive(Clone, Debug)]
pub struct SubQuot {
    pub num: Subspace,
    pub den: Subspace,
    /// rows: representatives completing den to num; quotient coordinates
    /// refer to this basis
    pub reps: Mat,
}

impl SubQuot {
    pub fn new(k: &FqField, num: Subspace, den: Subspace) -> Result<SubQuot> {
        if !num.contains_space(k, &den) {
            return Err(Error::DimensionViolation(
                "denominator not contained in numerator".into(),
            ));
        }
        // extend den basis to num basis; the new rows are the transversal
        let mut acc = den.clone();
        let mut reps = Vec::new();
        for i in 0..num.dim() {
            let row = num.basis.row(i);
            if !acc.contains(k, row) {
                reps.push(row.to_vec());
                acc = acc.sum(
                    k,
                    &Subspace::from_rows(k, num.n, vec![row.to_vec()]),
                );
            }
        }
        Ok(SubQuot {
            num,
            den,
            reps: Mat::from_rows(&reps),
        })
    }

    pub fn dim(&self) -> usize {
        self.num.dim() - self.den.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.num.n
    }

    /// Lifts quotient coordinates to an ambient vector.
    pub fn lift(&self, k: &FqField, coords: &[El]) -> Vec<El> {
        assert_eq!(coords.len(), self.dim());
        let mut v = vec![0; self.num.n];
        for (i, &c) in coords.iter().enumerate() {
            for j in 0..self.num.n {
                v[j] = k.add(v[j], k.mul(c, self.reps.get(i, j)));
            }
        }
        v
    }

    /// Projects an ambient vector (must lie in num) to quotient coordinates.
    pub fn project(&self, k: &FqField, v: &[El]) -> Result<Vec<El>> {
        // solve v = reps^T a + den^T b
        let d = self.dim();
        let dd = self.den.dim();
        let mut m = Mat::zero(self.num.n, d + dd);
        for j in 0..d {
            for i in 0..self.num.n {
                m.set(i, j, self.reps.get(j, i));
            }
        }
        for j in 0..dd {
            for i in 0..self.num.n {
                m.set(i, d + j, self.den.basis.get(j, i));
            }
        }
        let sol = m
            .solve(k, v)
            .ok_or_else(|| Error::DimensionViolation("vector not in numerator".into()))?;
        Ok(sol[..d].to_vec())
    }

    /// The induced map on quotients of an ambient semilinear map, checking
    /// that numerator and denominator are respected.
    pub fn induced_map(&self, k: &FqField, target: &SubQuot, f: &SemiMap) -> Result<SemiMap> {
        // denominators must map into denominators
        for i in 0..self.den.dim() {
            let img = f.apply(k, self.den.basis.row(i));
            if !target.den.contains(k, &img) {
                return Err(Error::DimensionViolation(
                    "map does not respect denominators".into(),
                ));
            }
        }
        let d = self.dim();
        let mut cols = Vec::with_capacity(d);
        for i in 0..d {
            // reps hold σ^0 representatives; the twist acts on coordinates,
            // so apply f to the rep of the σ^{-t}-preimage basis vector
            let img = f.apply(k, self.reps.row(i));
            if !target.num.contains(k, &img) {
                return Err(Error::DimensionViolation(
                    "map does not respect numerators".into(),
                ));
            }
            cols.push(target.project(k, &img)?);
        }
        // f(Σ a_i rep_i) = Σ σ^t(a_i) f(rep_i): quotient matrix has columns
        // f(rep_i), twist carried over
        let mut mat = Mat::zero(target.dim(), d);
        for (j, col) in cols.iter().enumerate() {
            for i in 0..target.dim() {
                mat.set(i, j, col[i]);
            }
        }
        Ok(SemiMap {
            mat,
            twist: f.twist,
        })
    }

    /// Induced "division" map sending x to the class of any y with n·y = x,
    /// y taken in the target numerator. Errors when no such y exists or the
    /// choice is not well defined modulo the target denominator.
    pub fn induced_div(&self, k: &FqField, target: &SubQuot, n: &Mat) -> Result<SemiMap> {
        // well-definedness: ker n ∩ target.num ⊆ target.den
        let ker = n.kernel(k);
        let overlap = ker.intersect(k, &target.num);
        if !target.den.contains_space(k, &overlap) {
            return Err(Error::DimensionViolation(
                "division map not well defined".into(),
            ));
        }
        // solve n y = x with y constrained to target.num
        let tb = target.num.dim();
        let mut m = Mat::zero(n.rows, tb);
        for j in 0..tb {
            let col = n.apply(k, target.num.basis.row(j));
            for i in 0..n.rows {
                m.set(i, j, col[i]);
            }
        }
        let solve_one = |x: &[El]| -> Result<Vec<El>> {
            let c = m
                .solve(k, x)
                .ok_or_else(|| Error::DimensionViolation("division has no solution".into()))?;
            let mut y = vec![0; target.num.n];
            for (j, &cj) in c.iter().enumerate() {
                for i in 0..target.num.n {
                    y[i] = k.add(y[i], k.mul(cj, target.num.basis.get(j, i)));
                }
            }
            Ok(y)
        };
        // denominators of the source must land in the target denominator
        for i in 0..self.den.dim() {
            let y = solve_one(self.den.basis.row(i))?;
            if !target.den.contains(k, &y) {
                return Err(Error::DimensionViolation(
                    "division map does not respect denominators".into(),
                ));
            }
        }
        let d = self.dim();
        let mut mat = Mat::zero(target.dim(), d);
        for j in 0..d {
            let y = solve_one(self.reps.row(j))?;
            let coords = target.project(k, &y)?;
            for i in 0..target.dim() {
                mat.set(i, j, coords[i]);
            }
        }
        Ok(SemiMap { mat, twist: 0 })
    }
}
