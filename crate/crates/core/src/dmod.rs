//! A concrete mod-p Dieudonné-module playground.
//!
//! A module has one free rank-2 piece over k[u]/u^e per Frobenius slot,
//! with a σ-semilinear u-linear Frobenius into the next slot and a
//! σ⁻¹-semilinear Verschiebung back, composing to zero with matching
//! kernels and images. Everything is flattened to k-linear algebra in the
//! basis e1, u e1, …, u^{e-1} e1, e2, …, u^{e-1} e2 with Frobenius twists
//! carried as counters.
//!
//! On top of such a module live the Pappas-Rapoport filtrations, the
//! rank-2 graded pieces, the essential Frobenius and Verschiebung maps
//! with their case table, the partial Hasse invariants that cut out the
//! strata, and the filtration bookkeeping for isogenies and duals.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fq::{El, FqField};
use crate::linalg::{Mat, SemiMap, SubQuot, Subspace};
use crate::local_model::u_action;

/// The coefficient ring k[u]/u^e of one slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncRing {
    pub field: FqField,
    pub e: usize,
}

impl TruncRing {
    pub fn new(field: FqField, e: usize) -> Result<TruncRing> {
        if e == 0 {
            return Err(Error::Invalid("nilpotency degree must be positive".into()));
        }
        Ok(TruncRing { field, e })
    }

    pub fn dim(&self) -> usize {
        2 * self.e
    }

    pub fn u_mat(&self) -> Mat {
        u_action(self.e)
    }
}

/// A position: Frobenius slot and filtration level (1-based).
pub type Pos = (usize, usize);

#[derive(Clone, Debug)]
pub struct DModule {
    pub ring: TruncRing,
    pub f: usize,
    /// phi[t]: D_t -> D_{t+1}, twist +1
    pub phi: Vec<Mat>,
    /// v[t]: D_{t+1} -> D_t, twist -1
    pub v: Vec<Mat>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DViolation {
    NotULinear { slot: usize, which: &'static str },
    CompositionNonzero { slot: usize, which: &'static str },
    ImageKernelMismatch { slot: usize, which: &'static str },
}

impl DModule {
    pub fn new(ring: TruncRing, f: usize, phi: Vec<Mat>, v: Vec<Mat>) -> Result<DModule> {
        let n = ring.dim();
        if f == 0 || phi.len() != f || v.len() != f {
            return Err(Error::Invalid("need one Phi and one V per slot".into()));
        }
        for m in phi.iter().chain(&v) {
            if m.rows != n || m.cols != n {
                return Err(Error::Invalid("matrix size must be 2e".into()));
            }
        }
        Ok(DModule { ring, f, phi, v })
    }

    pub fn phi_map(&self, t: usize) -> SemiMap {
        SemiMap {
            mat: self.phi[t].clone(),
            twist: 1,
        }
    }

    pub fn v_map(&self, t: usize) -> SemiMap {
        SemiMap {
            mat: self.v[t].clone(),
            twist: -1,
        }
    }

    /// The Hodge subspace of slot t: the image of Verschiebung from the
    /// next slot.
    pub fn omega(&self, t: usize) -> Subspace {
        self.v_map(t).image(&self.ring.field)
    }

    pub fn validate(&self) -> Vec<DViolation> {
        let k = &self.ring.field;
        let n_mat = self.ring.u_mat();
        let mut out = Vec::new();
        for t in 0..self.f {
            for (which, m) in [("Phi", &self.phi[t]), ("V", &self.v[t])] {
                if m.mul(k, &n_mat) != n_mat.mul(k, m) {
                    out.push(DViolation::NotULinear { slot: t, which });
                }
            }
            let phi = self.phi_map(t);
            let v = self.v_map(t);
            // Phi_t ∘ V_t on D_{t+1}, V_t ∘ Phi_t on D_t
            if !phi.compose(k, &v).is_zero() {
                out.push(DViolation::CompositionNonzero {
                    slot: t,
                    which: "Phi∘V",
                });
            }
            if !v.compose(k, &phi).is_zero() {
                out.push(DViolation::CompositionNonzero {
                    slot: t,
                    which: "V∘Phi",
                });
            }
            let im_phi = phi.image(k);
            let ker_v = v.kernel(k);
            if im_phi != ker_v {
                out.push(DViolation::ImageKernelMismatch {
                    slot: t,
                    which: "im Phi = ker V",
                });
            }
            let ker_phi = phi.kernel(k);
            let im_v = v.image(k);
            if ker_phi != im_v {
                out.push(DViolation::ImageKernelMismatch {
                    slot: t,
                    which: "ker Phi = im V",
                });
            }
        }
        out
    }

    fn require_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid module: {v:?}")))
        }
    }

    /// Plain-text dump: field, shape, then the matrices in row-major
    /// two-digit hex entries.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "dmod p={} m={} e={} f={}",
            self.ring.field.p(),
            self.ring.field.m(),
            self.ring.e,
            self.f
        );
        let n = self.ring.dim();
        for t in 0..self.f {
            for (name, m) in [("phi", &self.phi[t]), ("v", &self.v[t])] {
                let _ = writeln!(out, "{name} {t}");
                for i in 0..n {
                    let row: String = (0..n).map(|j| format!("{:02x}", m.get(i, j))).collect();
                    let _ = writeln!(out, "{row}");
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<DModule> {
        let bad = |msg: &str| Error::Invalid(format!("dump parse: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let mut p = None;
        let mut m = None;
        let mut e = None;
        let mut f = None;
        for tok in header.split_whitespace().skip(1) {
            let (key, val) = tok.split_once('=').ok_or_else(|| bad("bad header token"))?;
            let val: usize = val.parse().map_err(|_| bad("bad header number"))?;
            match key {
                "p" => p = Some(val),
                "m" => m = Some(val),
                "e" => e = Some(val),
                "f" => f = Some(val),
                _ => return Err(bad("unknown header key")),
            }
        }
        let (p, m, e, f) = match (p, m, e, f) {
            (Some(p), Some(m), Some(e), Some(f)) => (p, m, e, f),
            _ => return Err(bad("incomplete header")),
        };
        let field = FqField::new(p as u32, m as u32);
        let ring = TruncRing::new(field.clone(), e)?;
        let n = ring.dim();
        let mut phi = vec![Mat::zero(n, n); f];
        let mut v = vec![Mat::zero(n, n); f];
        for _ in 0..2 * f {
            let head = lines.next().ok_or_else(|| bad("missing matrix header"))?;
            let mut it = head.split_whitespace();
            let name = it.next().ok_or_else(|| bad("empty matrix header"))?;
            let t: usize = it
                .next()
                .ok_or_else(|| bad("missing slot"))?
                .parse()
                .map_err(|_| bad("bad slot"))?;
            if t >= f {
                return Err(bad("slot out of range"));
            }
            let mut mat = Mat::zero(n, n);
            for i in 0..n {
                let row = lines.next().ok_or_else(|| bad("missing matrix row"))?;
                let row = row.trim();
                if row.len() != 2 * n {
                    return Err(bad("bad row length"));
                }
                for j in 0..n {
                    let hex = &row[2 * j..2 * j + 2];
                    let val = u16::from_str_radix(hex, 16).map_err(|_| bad("bad hex"))?;
                    if val as u32 >= field.q() {
                        return Err(bad("entry outside the field"));
                    }
                    mat.set(i, j, val as El);
                }
            }
            match name {
                "phi" => phi[t] = mat,
                "v" => v[t] = mat,
                _ => return Err(bad("unknown matrix name")),
            }
        }
        DModule::new(ring, f, phi, v)
    }
}

/// A Pappas-Rapoport filtration: per slot a full flag on the Hodge
/// subspace with u-killed graded pieces of prescribed ranks.
#[derive(Clone, Debug)]
pub struct PRFiltration {
    /// chains[t][i] for i in 0..=e, chains[t][0] = 0, chains[t][e] = ω_t
    pub chains: Vec<Vec<Subspace>>,
    /// types[t][i-1] = s at position (t, i)
    pub types: Vec<Vec<u8>>,
}

impl PRFiltration {
    pub fn s_at(&self, pos: Pos) -> u8 {
        self.types[pos.0][pos.1 - 1]
    }
}

/// Checks nesting, u-stability, graded ranks, and that the top of each
/// chain is the Hodge subspace of its slot.
pub fn validate_filtration(d: &DModule, filt: &PRFiltration) -> Result<()> {
    let k = &d.ring.field;
    let e = d.ring.e;
    let n_mat = d.ring.u_mat();
    if filt.chains.len() != d.f || filt.types.len() != d.f {
        return Err(Error::DimensionViolation("wrong slot count".into()));
    }
    for t in 0..d.f {
        let chain = &filt.chains[t];
        let types = &filt.types[t];
        if chain.len() != e + 1 || types.len() != e {
            return Err(Error::DimensionViolation("wrong chain length".into()));
        }
        if chain[0].dim() != 0 {
            return Err(Error::DimensionViolation("chain must start at 0".into()));
        }
        if chain[e] != d.omega(t) {
            return Err(Error::DimensionViolation(
                "chain top must be the Hodge subspace".into(),
            ));
        }
        for i in 1..=e {
            if !chain[i].contains_space(k, &chain[i - 1]) {
                return Err(Error::DimensionViolation("chain not nested".into()));
            }
            if chain[i].dim() != chain[i - 1].dim() + types[i - 1] as usize {
                return Err(Error::DimensionViolation("graded rank mismatch".into()));
            }
            let moved = chain[i].image_under(k, &n_mat);
            if !chain[i - 1].contains_space(k, &moved) {
                return Err(Error::DimensionViolation(
                    "graded piece not killed by u".into(),
                ));
            }
        }
    }
    Ok(())
}

/// The rank-2 subquotient u⁻¹ω(i−1)/ω(i−1) at a position.
pub fn h1_at(d: &DModule, filt: &PRFiltration, pos: Pos) -> Result<SubQuot> {
    let (t, i) = pos;
    if t >= d.f || i == 0 || i > d.ring.e {
        return Err(Error::InvalidIndex(format!("position ({t}, {i})")));
    }
    let k = &d.ring.field;
    let below = &filt.chains[t][i - 1];
    let num = below.preimage_under(k, &d.ring.u_mat());
    let q = SubQuot::new(k, num, below.clone())?;
    if q.dim() != 2 {
        return Err(Error::DimensionViolation(format!(
            "H¹ at ({t}, {i}) has dimension {}",
            q.dim()
        )));
    }
    Ok(q)
}

/// The Hodge line (or plane) ω(i)/ω(i−1) inside the H¹ at that position,
/// in H¹ quotient coordinates.
pub fn omega_in_h1(d: &DModule, filt: &PRFiltration, pos: Pos) -> Result<Vec<Vec<El>>> {
    let (t, i) = pos;
    let k = &d.ring.field;
    let h = h1_at(d, filt, pos)?;
    let mut coords = Vec::new();
    for row in filt.chains[t][i].basis_rows() {
        if filt.chains[t][i - 1].contains(k, &row) {
            continue;
        }
        coords.push(h.project(k, &row)?);
    }
    Ok(coords)
}

fn prev_pos(d: &DModule, pos: Pos) -> Pos {
    let (t, i) = pos;
    if i > 1 {
        (t, i - 1)
    } else {
        ((t + d.f - 1) % d.f, d.ring.e)
    }
}

/// The map x ↦ V(x') for any u^{e-1} x' = x, from the H¹ at the first
/// level of a slot to the H¹ at the last level of the previous slot.
fn vprime_map(d: &DModule, filt: &PRFiltration, t: usize) -> Result<SemiMap> {
    let k = &d.ring.field;
    let e = d.ring.e;
    let n_mat = d.ring.u_mat();
    let tp = (t + d.f - 1) % d.f;
    let src = h1_at(d, filt, (t, 1))?;
    let dst = h1_at(d, filt, (tp, e))?;
    // u^{e-1} as a matrix
    let mut ue1 = Mat::identity(2 * e);
    for _ in 0..e - 1 {
        ue1 = ue1.mul(k, &n_mat);
    }
    let v = d.v_map(tp); // D_t -> D_tp
    // well-definedness: V(ker u^{e-1}) must die in the target quotient
    for row in ue1.kernel(k).basis_rows() {
        let img = v.apply(k, &row);
        if !dst.den.contains(k, &img) {
            return Err(Error::DimensionViolation(
                "lift through u^{e-1} is not independent of the choice".into(),
            ));
        }
    }
    let mut mat = Mat::zero(dst.dim(), src.dim());
    for jcol in 0..src.dim() {
        let x = src.reps.row(jcol);
        let xp = ue1
            .solve(k, x)
            .ok_or_else(|| Error::DimensionViolation("no u^{e-1} preimage".into()))?;
        let img = v.apply(k, &xp);
        if !dst.num.contains(k, &img) {
            return Err(Error::DimensionViolation(
                "V' image leaves the target".into(),
            ));
        }
        let coords = dst.project(k, &img)?;
        for irow in 0..dst.dim() {
            mat.set(irow, jcol, coords[irow]);
        }
    }
    Ok(SemiMap { mat, twist: -1 })
}

/// Frobenius-induced map from the last level of the previous slot into the
/// first level of slot t.
fn frob_level_map(d: &DModule, filt: &PRFiltration, t: usize) -> Result<SemiMap> {
    let k = &d.ring.field;
    let tp = (t + d.f - 1) % d.f;
    let src = h1_at(d, filt, (tp, d.ring.e))?;
    let dst = h1_at(d, filt, (t, 1))?;
    src.induced_map(k, &dst, &d.phi_map(tp))
}

/// Essential Frobenius into the position: identity-induced or u-division
/// inside a slot, Frobenius or inverse Verschiebung across the slot
/// boundary, split on the signature below.
pub fn f_es(d: &DModule, filt: &PRFiltration, pos: Pos) -> Result<SemiMap> {
    d.require_valid()?;
    let k = &d.ring.field;
    let (t, i) = pos;
    let prev = prev_pos(d, pos);
    let s_prev = filt.s_at(prev);
    if i > 1 {
        let src = h1_at(d, filt, prev)?;
        let dst = h1_at(d, filt, pos)?;
        match s_prev {
            0 | 1 => src.induced_map(k, &dst, &SemiMap::linear(Mat::identity(d.ring.dim()))),
            _ => src.induced_div(k, &dst, &d.ring.u_mat()),
        }
    } else {
        match s_prev {
            0 | 1 => frob_level_map(d, filt, t),
            _ => vprime_map(d, filt, t)?.inverse(k).ok_or(Error::SingularMap),
        }
    }
}

/// Essential Verschiebung out of the position: multiplication by u or
/// identity inside a slot, V' or inverse Frobenius across the boundary.
pub fn v_es(d: &DModule, filt: &PRFiltration, pos: Pos) -> Result<SemiMap> {
    d.require_valid()?;
    let k = &d.ring.field;
    let (t, i) = pos;
    let prev = prev_pos(d, pos);
    let s_prev = filt.s_at(prev);
    if i > 1 {
        let src = h1_at(d, filt, pos)?;
        let dst = h1_at(d, filt, prev)?;
        match s_prev {
            1 | 2 => src.induced_map(k, &dst, &SemiMap::linear(d.ring.u_mat())),
            _ => src.induced_map(k, &dst, &SemiMap::linear(Mat::identity(d.ring.dim()))),
        }
    } else {
        match s_prev {
            1 | 2 => vprime_map(d, filt, t),
            _ => frob_level_map(d, filt, t)?.inverse(k).ok_or(Error::SingularMap),
        }
    }
}

/// The previous position carrying signature 1, walking back through the
/// ramified positions.
fn prev_signature_one(d: &DModule, filt: &PRFiltration, pos: Pos) -> Result<Pos> {
    let mut cur = prev_pos(d, pos);
    for _ in 0..d.f * d.ring.e {
        if filt.s_at(cur) == 1 {
            return Ok(cur);
        }
        cur = prev_pos(d, cur);
    }
    Err(Error::SignatureNotOne)
}

/// The partial Hasse invariant at a signature-1 position: the composite of
/// essential Verschiebung maps back to the previous signature-1 position,
/// restricted to the Hodge line. Returns the restricted map (columns are
/// images of the line basis) and whether it vanishes.
pub fn partial_hasse(d: &DModule, filt: &PRFiltration, pos: Pos) -> Result<(SemiMap, bool)> {
    if filt.s_at(pos) != 1 {
        return Err(Error::SignatureNotOne);
    }
    let k = &d.ring.field;
    let target = prev_signature_one(d, filt, pos)?;
    let mut acc = v_es(d, filt, pos)?;
    let mut cur = prev_pos(d, pos);
    while cur != target {
        acc = v_es(d, filt, cur)?.compose(k, &acc);
        cur = prev_pos(d, cur);
    }
    let line = omega_in_h1(d, filt, pos)?;
    debug_assert_eq!(line.len(), 1);
    let mut mat = Mat::zero(acc.mat.rows, line.len());
    for (j, coords) in line.iter().enumerate() {
        let img = acc.apply(k, coords);
        for i in 0..mat.rows {
            mat.set(i, j, img[i]);
        }
    }
    let vanishes = mat.is_zero();
    Ok((
        SemiMap {
            mat,
            twist: acc.twist,
        },
        vanishes,
    ))
}

/// Positions whose partial Hasse invariant vanishes: the type of the open
/// stratum through this module.
pub fn go_type(d: &DModule, filt: &PRFiltration) -> Result<Vec<Pos>> {
    let mut out = Vec::new();
    for t in 0..d.f {
        for i in 1..=d.ring.e {
            if filt.s_at((t, i)) != 1 {
                continue;
            }
            let (_, vanishes) = partial_hasse(d, filt, (t, i))?;
            if vanishes {
                out.push((t, i));
            }
        }
    }
    Ok(out)
}

/// The unique filtration of a given type on a Hodge subspace in
/// generalized Rapoport form, built from the top: equal step on s = 0,
/// u·previous on s = 2, and the forced line u·ω(j) + (ω(j) ∩ ker u^c) on
/// s = 1 with c the number of twos so far.
pub fn forced_filtration(
    ring: &TruncRing,
    omega: &Subspace,
    types: &[u8],
) -> Result<Vec<Subspace>> {
    let k = &ring.field;
    let e = ring.e;
    if types.len() != e || omega.n != ring.dim() {
        return Err(Error::DimensionViolation("type vector must have length e".into()));
    }
    let total: usize = types.iter().map(|&s| s as usize).sum();
    if omega.dim() != total {
        return Err(Error::NoSuchFiltration);
    }
    let n_mat = ring.u_mat();
    // check u-stability of the top
    if !omega.contains_space(k, &omega.image_under(k, &n_mat)) {
        return Err(Error::NoSuchFiltration);
    }
    let mut chain = vec![Subspace::zero(ring.dim()); e + 1];
    chain[e] = omega.clone();
    for j in (1..=e).rev() {
        let d2_below: usize = types[..j - 1].iter().filter(|&&s| s == 2).count();
        let prev = match types[j - 1] {
            0 => chain[j].clone(),
            2 => chain[j].image_under(k, &n_mat),
            _ => {
                // u·ω(j) + (ω(j) ∩ ker u^{d2_below})
                let mut kerpow = Mat::identity(ring.dim());
                for _ in 0..d2_below {
                    kerpow = kerpow.mul(k, &n_mat);
                }
                let cap = chain[j].intersect(k, &kerpow.kernel(k));
                chain[j].image_under(k, &n_mat).sum(k, &cap)
            }
        };
        let want: usize = types[..j - 1].iter().map(|&s| s as usize).sum();
        if prev.dim() != want {
            return Err(Error::NoSuchFiltration);
        }
        chain[j - 1] = prev;
    }
    if chain[0].dim() != 0 {
        return Err(Error::NoSuchFiltration);
    }
    Ok(chain)
}

/// Builds the filtration of every slot of a module by the forced descent,
/// given the type vector per slot.
pub fn forced_pr_filtration(d: &DModule, types: Vec<Vec<u8>>) -> Result<PRFiltration> {
    if types.len() != d.f {
        return Err(Error::DimensionViolation("wrong slot count".into()));
    }
    let mut chains = Vec::with_capacity(d.f);
    for t in 0..d.f {
        chains.push(forced_filtration(&d.ring, &d.omega(t), &types[t])?);
    }
    let filt = PRFiltration { chains, types };
    validate_filtration(d, &filt)?;
    Ok(filt)
}

/// A perfect pairing between a module and its conjugate side: one 2×2
/// matrix over k[u]/u^e per slot with unit determinant; the k-valued form
/// is the top-coefficient trace, automatically u-self-adjoint.
#[derive(Clone, Debug)]
pub struct PairingData {
    pub e: usize,
    /// per slot, entries [a][b] are coefficient vectors of length e
    pub b: Vec<[[Vec<El>; 2]; 2]>,
}

impl PairingData {
    /// The standard antidiagonal pairing.
    pub fn standard(ring: &TruncRing, f: usize) -> PairingData {
        let e = ring.e;
        let mut one = vec![0; e];
        one[0] = 1;
        let mut minus_one = vec![0; e];
        minus_one[0] = ring.field.neg(1);
        let zero = vec![0; e];
        let slot = [
            [zero.clone(), one.clone()],
            [minus_one.clone(), zero.clone()],
        ];
        PairingData {
            e,
            b: vec![slot; f],
        }
    }

    /// The same pairing read from the conjugate side.
    pub fn flip(&self) -> PairingData {
        let b = self
            .b
            .iter()
            .map(|slot| {
                [
                    [slot[0][0].clone(), slot[1][0].clone()],
                    [slot[0][1].clone(), slot[1][1].clone()],
                ]
            })
            .collect();
        PairingData { e: self.e, b }
    }

    /// The flattened Gram matrix of one slot: the u^{e-1} coefficient of
    /// ⟨u^i e_a, u^j e_b⟩.
    pub fn gram(&self, k: &FqField, t: usize) -> Result<Mat> {
        let e = self.e;
        let mut g = Mat::zero(2 * e, 2 * e);
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..e {
                    for j in 0..e {
                        if i + j < e {
                            g.set(a * e + i, b * e + j, self.b[t][a][b][e - 1 - i - j]);
                        }
                    }
                }
            }
        }
        if g.inverse(k).is_none() {
            return Err(Error::NonPerfectPairing);
        }
        Ok(g)
    }
}

/// The conjugate-side filtration: orthogonal complement at each level,
/// pushed down by u^{e-i}; graded ranks complement to 2.
pub fn dual_filtration(
    d: &DModule,
    filt: &PRFiltration,
    pairing: &PairingData,
) -> Result<PRFiltration> {
    let k = &d.ring.field;
    let e = d.ring.e;
    if pairing.e != e || pairing.b.len() != d.f {
        return Err(Error::NonPerfectPairing);
    }
    let n_mat = d.ring.u_mat();
    let mut chains = Vec::with_capacity(d.f);
    let mut types = Vec::with_capacity(d.f);
    for t in 0..d.f {
        let g = pairing.gram(k, t)?;
        let mut chain = vec![Subspace::zero(2 * e); e + 1];
        for i in 0..=e {
            // orthogonal complement of ω(i) in the conjugate ambient
            let w = &filt.chains[t][i];
            let mut rows = Mat::zero(w.dim(), 2 * e);
            for r in 0..w.dim() {
                let functional = g.transpose().apply(k, w.basis.row(r));
                for c in 0..2 * e {
                    rows.set(r, c, functional[c]);
                }
            }
            let perp = rows.kernel(k);
            let mut shift = Mat::identity(2 * e);
            for _ in 0..e - i {
                shift = shift.mul(k, &n_mat);
            }
            chain[i] = perp.image_under(k, &shift);
        }
        let mut slot_types = Vec::with_capacity(e);
        for i in 1..=e {
            if !chain[i].contains_space(k, &chain[i - 1]) {
                return Err(Error::DimensionViolation(
                    "dual chain not nested".into(),
                ));
            }
            let s = 2 - filt.types[t][i - 1];
            if chain[i].dim() != chain[i - 1].dim() + s as usize {
                return Err(Error::DimensionViolation(
                    "dual graded rank mismatch".into(),
                ));
            }
            slot_types.push(s);
        }
        chains.push(chain);
        types.push(slot_types);
    }
    Ok(PRFiltration { chains, types })
}

/// The conjugate module: Frobenius and Verschiebung obtained as pairing
/// adjoints of Verschiebung and Frobenius.
pub fn dual_module(d: &DModule, pairing: &PairingData) -> Result<DModule> {
    d.require_valid()?;
    let k = &d.ring.field;
    let mut phi = Vec::with_capacity(d.f);
    let mut v = Vec::with_capacity(d.f);
    for t in 0..d.f {
        let tn = (t + 1) % d.f;
        let g_t = pairing.gram(k, t)?;
        let g_tn = pairing.gram(k, tn)?;
        let g_t_inv = g_t.inverse(k).ok_or(Error::NonPerfectPairing)?;
        let g_tn_inv = g_tn.inverse(k).ok_or(Error::NonPerfectPairing)?;
        // V^c_t = G_t^{-1} σ^{-1}(Phi_t^T G_{t+1}), twist -1
        let w = g_t_inv.mul(k, &d.phi[t].transpose().mul(k, &g_tn).frob_map(k, -1));
        // Phi^c_t = G_{t+1}^{-1} σ(V_t^T G_t), twist +1
        let m = g_tn_inv.mul(k, &d.v[t].transpose().mul(k, &g_t).frob_map(k, 1));
        phi.push(m);
        v.push(w);
    }
    let dual = DModule::new(d.ring.clone(), d.f, phi, v)?;
    dual.require_valid()?;
    Ok(dual)
}

/// The stratum data of an isogeny: per slot a u-linear matrix D_2 -> D_1
/// commuting with Frobenius and Verschiebung and of level rank one on the
/// isogeny's support. I collects the signature-1 positions where the Hodge
/// line dies, J those where the induced map on the quotient line dies.
pub struct IsogenyStratum {
    pub i_set: BTreeSet<Pos>,
    pub j_set: BTreeSet<Pos>,
    /// slots where the map is an isomorphism (untouched by the isogeny)
    pub iso_slots: BTreeSet<usize>,
}

pub fn stratum_of_isogeny(
    d1: &DModule,
    filt1: &PRFiltration,
    d2: &DModule,
    filt2: &PRFiltration,
    f_maps: &[Mat],
) -> Result<IsogenyStratum> {
    d1.require_valid()?;
    d2.require_valid()?;
    validate_filtration(d1, filt1)?;
    validate_filtration(d2, filt2)?;
    if d1.f != d2.f || d1.ring != d2.ring || f_maps.len() != d1.f {
        return Err(Error::Invalid("modules must share their shape".into()));
    }
    let k = &d1.ring.field;
    let n_mat = d1.ring.u_mat();
    let e = d1.ring.e;
    for t in 0..d1.f {
        let f_t = &f_maps[t];
        if f_t.mul(k, &n_mat) != n_mat.mul(k, f_t) {
            return Err(Error::Invalid(format!("map at slot {t} is not u-linear")));
        }
        let tn = (t + 1) % d1.f;
        // f ∘ Phi_2 = Phi_1 ∘ f and f ∘ V_2 = V_1 ∘ f with twists
        let lhs = f_maps[tn].mul(k, &d2.phi[t]);
        let rhs = d1.phi[t].mul(k, &f_t.frob_map(k, 1));
        if lhs != rhs {
            return Err(Error::Invalid(format!(
                "map does not intertwine Frobenius at slot {t}"
            )));
        }
        let lhs = f_t.mul(k, &d2.v[t]);
        let rhs = d1.v[t].mul(k, &f_maps[tn].frob_map(k, -1));
        if lhs != rhs {
            return Err(Error::Invalid(format!(
                "map does not intertwine Verschiebung at slot {t}"
            )));
        }
    }
    let mut i_set = BTreeSet::new();
    let mut j_set = BTreeSet::new();
    let mut iso_slots = BTreeSet::new();
    for t in 0..d1.f {
        let fm = SemiMap::linear(f_maps[t].clone());
        let mut level_ranks = Vec::with_capacity(e);
        let mut level_maps = Vec::with_capacity(e);
        for i in 1..=e {
            let src = h1_at(d2, filt2, (t, i))?;
            let dst = h1_at(d1, filt1, (t, i))?;
            let ind = src.induced_map(k, &dst, &fm)?;
            level_ranks.push(ind.mat.rank(k));
            level_maps.push((src, dst, ind));
        }
        if level_ranks.iter().all(|&r| r == 2) {
            iso_slots.insert(t);
            continue;
        }
        if !level_ranks.iter().all(|&r| r == 1) {
            return Err(Error::DimensionViolation(format!(
                "level cokernel ranks {level_ranks:?} at slot {t}; expected all one"
            )));
        }
        for i in 1..=e {
            if filt2.s_at((t, i)) != 1 {
                continue;
            }
            let (_, dst, ind) = &level_maps[i - 1];
            // image of the Hodge line of the second module
            let line2 = omega_in_h1(d2, filt2, (t, i))?;
            let img = ind.apply(k, &line2[0]);
            let kills_omega = img.iter().all(|&x| x == 0);
            // induced map on v-quotients vanishes iff the image lies in ω_1
            let line1 = omega_in_h1(d1, filt1, (t, i))?;
            let omega1 = Subspace::from_rows(k, dst.dim(), line1);
            let image = ind.image(k);
            let into_omega = omega1.contains_space(k, &image);
            if kills_omega {
                i_set.insert((t, i));
            }
            if into_omega {
                j_set.insert((t, i));
            }
            if !kills_omega && !into_omega {
                return Err(Error::DimensionViolation(format!(
                    "position ({t}, {i}) lies in neither stratum set"
                )));
            }
        }
    }
    Ok(IsogenyStratum {
        i_set,
        j_set,
        iso_slots,
    })
}

/// Ordinary module: Frobenius is a unit block on a complement of the Hodge
/// piece at every slot; no partial Hasse invariant vanishes.
pub fn ordinary(field: &FqField, e: usize, f: usize) -> Result<(DModule, PRFiltration)> {
    let ring = TruncRing::new(field.clone(), e)?;
    let n = ring.dim();
    let mut phi_mat = Mat::zero(n, n);
    let mut v_mat = Mat::zero(n, n);
    for i in 0..e {
        phi_mat.set(i, i, 1);
        v_mat.set(e + i, e + i, 1);
    }
    let d = DModule::new(
        ring,
        f,
        vec![phi_mat; f],
        vec![v_mat; f],
    )?;
    let types = vec![vec![1u8; e]; f];
    let filt = forced_pr_filtration(&d, types)?;
    Ok((d, filt))
}

/// Supersingular module at e = f = 1: Frobenius and Verschiebung share
/// their image and kernel, so the single partial Hasse invariant vanishes.
pub fn supersingular(field: &FqField) -> Result<(DModule, PRFiltration)> {
    let ring = TruncRing::new(field.clone(), 1)?;
    let m = Mat::from_rows(&[vec![0, 1], vec![0, 0]]);
    let d = DModule::new(ring, 1, vec![m.clone()], vec![m])?;
    let types = vec![vec![1u8]];
    let filt = forced_pr_filtration(&d, types)?;
    Ok((d, filt))
}

/// Independent prime blocks: a list of modules, one per prime, with the
/// stratum type of the product the union of the per-block types.
pub struct BlockModule {
    pub blocks: Vec<(DModule, PRFiltration)>,
}

impl BlockModule {
    pub fn go_type(&self) -> Result<Vec<(usize, Pos)>> {
        let mut out = Vec::new();
        for (idx, (d, filt)) in self.blocks.iter().enumerate() {
            for pos in go_type(d, filt)? {
                out.push((idx, pos));
            }
        }
        Ok(out)
    }
}
