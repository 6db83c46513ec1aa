//! Scalar Raynaud data for F_q-vector schemes in characteristic p.
//!
//! At a geometric point every line bundle of a (partial) datum is
//! trivialized, so a datum is a support set of Frobenius slots with a pair
//! of scalars (s, t) per slot satisfying s·t = 0 (the mixed-characteristic
//! unit w degenerates to 0 mod p). Characters of F_q^× are residues mod
//! q−1 with fundamental characters the p-power positions; the group scheme
//! attached to a datum has a monomial basis indexed by digit vectors, and
//! its Dieudonné crystal is one line per supported slot with Frobenius
//! acting by s and Verschiebung by t.

use std::collections::BTreeSet;

use crate::embeddings::{Embedding, FieldShape, InfinityType};
use crate::error::{Error, Result};
use crate::fq::{El, FqField};

/// The character group of F_{p^f}^×, cyclic of order p^f − 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CharacterGroup {
    pub p: u64,
    pub f: usize,
}

impl CharacterGroup {
    pub fn new(p: u64, f: usize) -> Result<CharacterGroup> {
        if p < 2 || (2..p).any(|d| p.is_multiple_of(d)) {
            return Err(Error::Invalid("p must be prime".into()));
        }
        if f == 0 {
            return Err(Error::Invalid("f must be positive".into()));
        }
        p.checked_pow(f as u32)
            .ok_or_else(|| Error::Invalid("q too large".into()))?;
        Ok(CharacterGroup { p, f })
    }

    pub fn modulus(&self) -> u64 {
        self.p.pow(self.f as u32) - 1
    }

    pub fn character(&self, residue: u64) -> Character {
        Character {
            residue: residue % self.modulus().max(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Character {
    pub residue: u64,
}

/// Digits of a character in the fundamental-character basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expansion {
    /// the trivial character; both degenerate digit vectors represent it
    Trivial,
    Digits(Vec<u8>),
}

/// The unique expression χ = Π χ_θ^{n_θ} with digits in [0, p−1], not all
/// zero and not all p−1; the trivial character is flagged instead.
pub fn padic_expansion(group: &CharacterGroup, chi: Character) -> Expansion {
    let q1 = group.modulus();
    if q1 == 0 || chi.residue.is_multiple_of(q1) {
        return Expansion::Trivial;
    }
    let mut digits = Vec::with_capacity(group.f);
    let mut rem = chi.residue % q1;
    // base-p digits of the least positive residue are already the unique
    // admissible vector: the residue is < q−1, so the all-(p−1) vector
    // never appears
    for _ in 0..group.f {
        digits.push((rem % group.p) as u8);
        rem /= group.p;
    }
    debug_assert_eq!(rem, 0);
    Expansion::Digits(digits)
}

/// A partial Raynaud datum over a chosen coefficient field: scalars per
/// slot, zero off the support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RaynaudDatum {
    pub field: FqField,
    /// number of Frobenius slots (an F_{p^f}-vector scheme)
    pub f: usize,
    pub support: BTreeSet<usize>,
    pub s: Vec<El>,
    pub t: Vec<El>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// s·t ≠ 0 at the slot
    ProductNonzero { slot: usize },
    /// scalar must vanish because the slot or its successor leaves the support
    OffSupportNonzero { slot: usize, which: &'static str },
}

impl RaynaudDatum {
    pub fn new(
        field: FqField,
        f: usize,
        support: BTreeSet<usize>,
        s: Vec<El>,
        t: Vec<El>,
    ) -> Result<RaynaudDatum> {
        if f == 0 || s.len() != f || t.len() != f || support.iter().any(|&x| x >= f) {
            return Err(Error::InvalidDatum("slot arrays must have length f".into()));
        }
        Ok(RaynaudDatum {
            field,
            f,
            support,
            s,
            t,
        })
    }

    pub fn next_slot(&self, theta: usize) -> usize {
        (theta + 1) % self.f
    }

    /// Checks s·t = 0 everywhere and automatic vanishing off the support.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for theta in 0..self.f {
            if self.field.mul(self.s[theta], self.t[theta]) != 0 {
                out.push(Violation::ProductNonzero { slot: theta });
            }
            let off = !self.support.contains(&theta)
                || !self.support.contains(&self.next_slot(theta));
            if off {
                if self.s[theta] != 0 {
                    out.push(Violation::OffSupportNonzero {
                        slot: theta,
                        which: "s",
                    });
                }
                if self.t[theta] != 0 {
                    out.push(Violation::OffSupportNonzero {
                        slot: theta,
                        which: "t",
                    });
                }
            }
        }
        out
    }

    fn require_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDatum(format!("{v:?}")))
        }
    }

    /// Cartier dual: swap s and t slotwise.
    pub fn dual(&self) -> Result<RaynaudDatum> {
        self.require_valid()?;
        Ok(RaynaudDatum {
            field: self.field.clone(),
            f: self.f,
            support: self.support.clone(),
            s: self.t.clone(),
            t: self.s.clone(),
        })
    }

    /// log_p of the group order.
    pub fn order(&self) -> Result<usize> {
        self.require_valid()?;
        Ok(self.support.len())
    }

    /// Restriction to a sub-support, valid when the boundary scalars vanish.
    pub fn sub_datum(&self, sub: &BTreeSet<usize>) -> Result<RaynaudDatum> {
        self.require_valid()?;
        if !sub.is_subset(&self.support) {
            return Err(Error::InvalidDatum(
                "sub-support must lie inside the support".into(),
            ));
        }
        for theta in 0..self.f {
            let here = sub.contains(&theta);
            let next = sub.contains(&self.next_slot(theta));
            if !here && next && self.s[theta] != 0 {
                return Err(Error::SubDatumCondition {
                    slot: theta,
                    which: "s",
                });
            }
            if here && !next && self.t[theta] != 0 {
                return Err(Error::SubDatumCondition {
                    slot: theta,
                    which: "t",
                });
            }
        }
        let keep = |v: &[El]| -> Vec<El> {
            (0..self.f)
                .map(|th| {
                    if sub.contains(&th) && sub.contains(&self.next_slot(th)) {
                        v[th]
                    } else {
                        0
                    }
                })
                .collect()
        };
        Ok(RaynaudDatum {
            field: self.field.clone(),
            f: self.f,
            support: sub.clone(),
            s: keep(&self.s),
            t: keep(&self.t),
        })
    }

    /// Enumerates the monomial basis: digit vectors in [0, p−1] supported
    /// on the support set.
    pub fn basis(&self) -> Vec<Vec<u8>> {
        let p = self.field.p() as u8;
        let slots: Vec<usize> = self.support.iter().copied().collect();
        let mut out = Vec::new();
        let mut digits = vec![0u8; slots.len()];
        loop {
            let mut mono = vec![0u8; self.f];
            for (idx, &slot) in slots.iter().enumerate() {
                mono[slot] = digits[idx];
            }
            out.push(mono);
            let mut pos = 0;
            loop {
                if pos == slots.len() {
                    return out;
                }
                digits[pos] += 1;
                if digits[pos] < p {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
        }
    }
}

/// A monomial c · Π x_θ^{m_θ} in the algebra of the datum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: El,
    pub digits: Vec<u8>,
}

impl Monomial {
    pub fn one(f: usize) -> Monomial {
        Monomial {
            coeff: 1,
            digits: vec![0; f],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == 0
    }
}

/// Multiplies two monomials and reduces with x_θ^p = s_θ · x_{φθ} until all
/// digits are below p. The result is a scalar multiple of a basis monomial.
pub fn algebra_multiply(d: &RaynaudDatum, a: &Monomial, b: &Monomial) -> Result<Monomial> {
    d.require_valid()?;
    let p = d.field.p() as u8;
    for mono in [a, b] {
        if mono.digits.len() != d.f {
            return Err(Error::InvalidDatum("monomial has wrong slot count".into()));
        }
        for (theta, &m) in mono.digits.iter().enumerate() {
            if m >= p || (m > 0 && !d.support.contains(&theta)) {
                return Err(Error::InvalidDatum(format!(
                    "monomial digit out of range at slot {theta}"
                )));
            }
        }
    }
    let mut coeff = d.field.mul(a.coeff, b.coeff);
    let mut digits: Vec<u8> = a
        .digits
        .iter()
        .zip(&b.digits)
        .map(|(&x, &y)| x + y)
        .collect();
    if coeff == 0 {
        return Ok(Monomial {
            coeff: 0,
            digits: vec![0; d.f],
        });
    }
    while let Some(theta) = (0..d.f).find(|&th| digits[th] >= p) {
        digits[theta] -= p;
        coeff = d.field.mul(coeff, d.s[theta]);
        if coeff == 0 {
            return Ok(Monomial {
                coeff: 0,
                digits: vec![0; d.f],
            });
        }
        digits[d.next_slot(theta)] += 1;
    }
    Ok(Monomial { coeff, digits })
}

/// The scalar model of the Dieudonné crystal of a datum: one line per
/// supported slot, Frobenius acting by s and Verschiebung by t. The
/// crystal's dimension shows up one slot forward: dim at φθ is 1 iff θ is
/// in the support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarCrystal {
    pub f: usize,
    /// dims[τ] = dimension of the τ-component
    pub dims: Vec<u8>,
    /// phi[θ]: the σ-semilinear scalar L_θ → L_{φθ}
    pub phi: Vec<El>,
    /// v[θ]: the σ⁻¹-semilinear scalar L_{φθ} → L_θ
    pub v: Vec<El>,
}

pub fn dieudonne_of(d: &RaynaudDatum) -> Result<ScalarCrystal> {
    d.require_valid()?;
    let mut dims = vec![0u8; d.f];
    for &theta in &d.support {
        dims[d.next_slot(theta)] = 1;
    }
    Ok(ScalarCrystal {
        f: d.f,
        dims,
        phi: d.s.clone(),
        v: d.t.clone(),
    })
}

/// What the stratum relations force on the kernel datum at one slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelVanishing {
    /// the whole slot column is ramified; the lemma gives nothing
    NoConstraint,
    Flags { s_vanishes: bool, t_vanishes: bool },
}

/// Vanishing of the universal-kernel scalars s, t at the slot *before*
/// `theta`, read off from the first unramified lift of `theta`.
pub fn kernel_vanishing(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
    theta: (usize, usize),
) -> Result<KernelVanishing> {
    let (k, j) = theta;
    if k >= shape.primes().len() || j >= shape.prime(k).f {
        return Err(Error::InvalidIndex(format!("slot p{k}.t{j}")));
    }
    let first = (1..=shape.prime(k).e)
        .map(|i| Embedding { prime: k, frob: j, ram: i })
        .find(|b| !sigma.contains(*b));
    match first {
        None => Ok(KernelVanishing::NoConstraint),
        Some(b) => Ok(KernelVanishing::Flags {
            s_vanishes: i_set.contains(&b),
            t_vanishes: j_set.contains(&b),
        }),
    }
}

/// Verifies that the sub-datum conditions for the closed subgroup with
/// support φ⁻¹(T¹) are implied by the stratum's vanishing lemma, and
/// returns that support (as slot pairs).
pub fn admissible_ct_support(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
    t: &BTreeSet<Embedding>,
) -> Result<crate::jl::SlotSet> {
    let (_, t1) = crate::jl::compute_t_prime_t1(shape, sigma, t)?;
    let mut support = BTreeSet::new();
    for k in 0..shape.primes().len() {
        let f = shape.prime(k).f;
        let in_t1 = |j: usize| t1.contains(&(k, j % f));
        for j in 0..f {
            // sub-datum boundary conditions at slot j, relative to the full
            // kernel support: s_j = 0 when j+1 leaves and j+2 enters T¹
            // (via the lemma applied at slot j+1), and t_j = 0 when j+1
            // enters and j+2 leaves
            let here = in_t1(j + 1);
            let next = in_t1(j + 2);
            if here == next {
                continue;
            }
            let flags = kernel_vanishing(shape, sigma, i_set, j_set, (k, (j + 1) % f))?;
            let KernelVanishing::Flags {
                s_vanishes,
                t_vanishes,
            } = flags
            else {
                return Err(Error::SubDatumCondition {
                    slot: j,
                    which: if next { "s" } else { "t" },
                });
            };
            if !here && next && !s_vanishes {
                return Err(Error::SubDatumCondition { slot: j, which: "s" });
            }
            if here && !next && !t_vanishes {
                return Err(Error::SubDatumCondition { slot: j, which: "t" });
            }
        }
        for j in 0..f {
            if in_t1(j + 1) {
                support.insert((k, j));
            }
        }
    }
    Ok(support)
}
