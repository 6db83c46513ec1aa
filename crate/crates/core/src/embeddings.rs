//! Embedding bookkeeping for a totally real field with arbitrary
//! ramification above p.
//!
//! Each prime carries `f` Frobenius slots with `e` ramified lifts apiece;
//! the shift φ walks the lifts in order and then steps the slot. The
//! canonical label of an embedding is `p{k}.t{j}.i{i}` with the prime index
//! `k` and slot `j` zero-based and the lift index `i` in `1..=e`. The
//! ordering of ramified lifts is a free choice; fixing this one globally
//! keeps every downstream output reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeShape {
    pub e: usize,
    pub f: usize,
}

impl PrimeShape {
    pub fn new(e: usize, f: usize) -> Result<PrimeShape> {
        if e == 0 || f == 0 {
            return Err(Error::Invalid("prime shape needs e >= 1 and f >= 1".into()));
        }
        Ok(PrimeShape { e, f })
    }

    pub fn size(&self) -> usize {
        self.e * self.f
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldShape {
    primes: Vec<PrimeShape>,
    degree: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Embedding {
    pub prime: usize,
    pub frob: usize,
    /// ramified lift index, 1-based
    pub ram: usize,
}

impl fmt::Display for Embedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}.t{}.i{}", self.prime, self.frob, self.ram)
    }
}

impl FromStr for Embedding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Embedding> {
        let bad = || Error::InvalidIndex(s.to_string());
        let mut parts = s.split('.');
        let p = parts.next().ok_or_else(bad)?;
        let t = parts.next().ok_or_else(bad)?;
        let i = parts.next().ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let prime = p.strip_prefix('p').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let frob = t.strip_prefix('t').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let ram = i.strip_prefix('i').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        Ok(Embedding { prime, frob, ram })
    }
}

impl FieldShape {
    pub fn new(primes: Vec<PrimeShape>) -> Result<FieldShape> {
        if primes.is_empty() {
            return Err(Error::Invalid("field shape needs at least one prime".into()));
        }
        let degree = primes.iter().map(|p| p.size()).sum();
        Ok(FieldShape { primes, degree })
    }

    pub fn single(e: usize, f: usize) -> Result<FieldShape> {
        FieldShape::new(vec![PrimeShape::new(e, f)?])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn primes(&self) -> &[PrimeShape] {
        &self.primes
    }

    pub fn prime(&self, k: usize) -> PrimeShape {
        self.primes[k]
    }

    pub fn check(&self, b: Embedding) -> Result<()> {
        let ok = b.prime < self.primes.len() && {
            let p = self.primes[b.prime];
            b.frob < p.f && b.ram >= 1 && b.ram <= p.e
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidIndex(b.to_string()))
        }
    }

    pub fn embeddings(&self) -> Vec<Embedding> {
        let mut out = Vec::with_capacity(self.degree);
        for (k, p) in self.primes.iter().enumerate() {
            for j in 0..p.f {
                for i in 1..=p.e {
                    out.push(Embedding { prime: k, frob: j, ram: i });
                }
            }
        }
        out
    }

    pub fn embeddings_of_prime(&self, k: usize) -> Vec<Embedding> {
        let p = self.primes[k];
        let mut out = Vec::with_capacity(p.size());
        for j in 0..p.f {
            for i in 1..=p.e {
                out.push(Embedding { prime: k, frob: j, ram: i });
            }
        }
        out
    }

    /// The shift φ: next lift, or the first lift of the next slot.
    pub fn phi(&self, b: Embedding) -> Result<Embedding> {
        self.check(b)?;
        let p = self.primes[b.prime];
        Ok(if b.ram < p.e {
            Embedding { ram: b.ram + 1, ..b }
        } else {
            Embedding {
                prime: b.prime,
                frob: (b.frob + 1) % p.f,
                ram: 1,
            }
        })
    }

    pub fn phi_inv(&self, b: Embedding) -> Result<Embedding> {
        self.check(b)?;
        let p = self.primes[b.prime];
        Ok(if b.ram > 1 {
            Embedding { ram: b.ram - 1, ..b }
        } else {
            Embedding {
                prime: b.prime,
                frob: (b.frob + p.f - 1) % p.f,
                ram: p.e,
            }
        })
    }

    pub fn phi_pow(&self, b: Embedding, n: i64) -> Result<Embedding> {
        let mut b = b;
        if n >= 0 {
            for _ in 0..n {
                b = self.phi(b)?;
            }
        } else {
            for _ in 0..(-n) {
                b = self.phi_inv(b)?;
            }
        }
        Ok(b)
    }

    /// Position of `b` in the φ-orbit of its prime, counted from
    /// (frob 0, ram 1).
    pub fn cycle_index(&self, b: Embedding) -> Result<usize> {
        self.check(b)?;
        let p = self.primes[b.prime];
        Ok(b.frob * p.e + (b.ram - 1))
    }

    pub fn from_cycle_index(&self, k: usize, n: usize) -> Embedding {
        let p = self.primes[k];
        let n = n % p.size();
        Embedding {
            prime: k,
            frob: n / p.e,
            ram: n % p.e + 1,
        }
    }

    /// φ′: the first φ-iterate outside `avoid` (taking at least one step).
    pub fn phi_cycle(
        &self,
        b: Embedding,
        avoid: &BTreeSet<Embedding>,
    ) -> Result<Embedding> {
        self.check(b)?;
        let size = self.primes[b.prime].size();
        let mut cur = b;
        for _ in 0..size {
            cur = self.phi(cur)?;
            if !avoid.contains(&cur) {
                return Ok(cur);
            }
        }
        Err(Error::DegenerateCycle { prime: b.prime })
    }

    /// Inverse of φ′.
    pub fn phi_cycle_inv(
        &self,
        b: Embedding,
        avoid: &BTreeSet<Embedding>,
    ) -> Result<Embedding> {
        self.check(b)?;
        let size = self.primes[b.prime].size();
        let mut cur = b;
        for _ in 0..size {
            cur = self.phi_inv(cur)?;
            if !avoid.contains(&cur) {
                return Ok(cur);
            }
        }
        Err(Error::DegenerateCycle { prime: b.prime })
    }
}

/// Which lift of an embedding lies in the CM ramification set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Lift {
    Plain,
    Conjugate,
}

impl Lift {
    pub fn other(self) -> Lift {
        match self {
            Lift::Plain => Lift::Conjugate,
            Lift::Conjugate => Lift::Plain,
        }
    }
}

impl fmt::Display for Lift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lift::Plain => write!(f, "plain"),
            Lift::Conjugate => write!(f, "conjugate"),
        }
    }
}

/// A ramification set: archimedean members inside the embedding set with
/// their chosen CM lifts, plus a count of finite members (only the count
/// matters for parity and the bottom strata).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfinityType {
    members: BTreeMap<Embedding, Lift>,
    finite_count: usize,
}

impl InfinityType {
    pub fn empty() -> InfinityType {
        InfinityType {
            members: BTreeMap::new(),
            finite_count: 0,
        }
    }

    /// Builds a ramification set, enforcing even total cardinality.
    pub fn new(
        shape: &FieldShape,
        members: BTreeMap<Embedding, Lift>,
        finite_count: usize,
    ) -> Result<InfinityType> {
        for b in members.keys() {
            shape.check(*b)?;
        }
        if !(members.len() + finite_count).is_multiple_of(2) {
            return Err(Error::Invalid(
                "ramification set must have even cardinality".into(),
            ));
        }
        Ok(InfinityType {
            members,
            finite_count,
        })
    }

    pub fn members(&self) -> impl Iterator<Item = (&Embedding, &Lift)> {
        self.members.iter()
    }

    pub fn infinity_set(&self) -> BTreeSet<Embedding> {
        self.members.keys().copied().collect()
    }

    pub fn contains(&self, b: Embedding) -> bool {
        self.members.contains_key(&b)
    }

    pub fn lift(&self, b: Embedding) -> Option<Lift> {
        self.members.get(&b).copied()
    }

    pub fn infinite_count(&self) -> usize {
        self.members.len()
    }

    pub fn finite_count(&self) -> usize {
        self.finite_count
    }

    /// New set with extra archimedean members and finite places appended.
    pub fn extend(
        &self,
        shape: &FieldShape,
        extra: &BTreeMap<Embedding, Lift>,
        extra_finite: usize,
    ) -> Result<InfinityType> {
        let mut members = self.members.clone();
        for (b, l) in extra {
            shape.check(*b)?;
            if members.insert(*b, *l).is_some() {
                return Err(Error::Invalid(format!(
                    "embedding {b} already in the ramification set"
                )));
            }
        }
        InfinityType::new(shape, members, self.finite_count + extra_finite)
    }
}

/// Signature of the lift of `b` on the given side: 0 on the chosen CM
/// member, 2 on its conjugate, 1 away from the ramification set.
pub fn signature(sigma: &InfinityType, b: Embedding, side: Lift) -> u8 {
    match sigma.lift(b) {
        None => 1,
        Some(l) if l == side => 0,
        Some(_) => 2,
    }
}

/// A maximal φ′-consecutive run inside a subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    /// last element of the run (its φ′-successor leaves the set)
    pub last: Embedding,
    pub len: usize,
    /// the run wraps the entire φ′-cycle of its prime; `last` is then the
    /// canonically smallest element rather than a boundary
    pub whole_cycle: bool,
}

impl Chain {
    /// Members in cycle order, ending at `last`.
    pub fn members(&self, shape: &FieldShape, avoid: &BTreeSet<Embedding>) -> Result<Vec<Embedding>> {
        let mut out = vec![self.last];
        let mut cur = self.last;
        for _ in 1..self.len {
            cur = shape.phi_cycle_inv(cur, avoid)?;
            out.push(cur);
        }
        out.reverse();
        Ok(out)
    }
}

/// Decomposes `set` into maximal chains for the cycle φ′ skipping `avoid`.
/// Chains are reported per prime in canonical order of their last element.
pub fn chains(
    shape: &FieldShape,
    set: &BTreeSet<Embedding>,
    avoid: &BTreeSet<Embedding>,
) -> Result<Vec<Chain>> {
    for b in set {
        shape.check(*b)?;
        if avoid.contains(b) {
            return Err(Error::Invalid(format!(
                "chain member {b} lies in the avoid set"
            )));
        }
    }
    let mut out = Vec::new();
    for k in 0..shape.primes().len() {
        let cycle: Vec<Embedding> = shape
            .embeddings_of_prime(k)
            .into_iter()
            .filter(|b| !avoid.contains(b))
            .collect();
        if cycle.is_empty() {
            continue;
        }
        // walk the φ′-cycle in shift order starting from the first position
        let mut ordered = vec![cycle[0]];
        let mut cur = cycle[0];
        loop {
            cur = shape.phi_cycle(cur, avoid)?;
            if cur == ordered[0] {
                break;
            }
            ordered.push(cur);
        }
        let n = ordered.len();
        let in_set: Vec<bool> = ordered.iter().map(|b| set.contains(b)).collect();
        if in_set.iter().all(|&x| x) {
            let last = *ordered.iter().min().unwrap();
            out.push(Chain {
                last,
                len: n,
                whole_cycle: true,
            });
            continue;
        }
        let mut prime_chains = Vec::new();
        for s in 0..n {
            if !in_set[s] || in_set[(s + n - 1) % n] {
                continue;
            }
            // s starts a run
            let mut len = 1;
            while in_set[(s + len) % n] {
                len += 1;
            }
            prime_chains.push(Chain {
                last: ordered[(s + len - 1) % n],
                len,
                whole_cycle: false,
            });
        }
        prime_chains.sort_by_key(|c| c.last);
        out.extend(prime_chains);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[Embedding]) -> BTreeSet<Embedding> {
        v.iter().copied().collect()
    }

    #[test]
    fn phi_fixed_point_on_single_embedding() {
        let shape = FieldShape::single(1, 1).unwrap();
        let b = Embedding { prime: 0, frob: 0, ram: 1 };
        assert_eq!(shape.phi(b).unwrap(), b);
    }

    #[test]
    fn phi_wraps_ramified_lifts_into_next_slot() {
        // at the last lift, φ steps the slot Frobenius and resets the lift
        let shape = FieldShape::single(4, 3).unwrap();
        let b = Embedding { prime: 0, frob: 2, ram: 4 };
        assert_eq!(
            shape.phi(b).unwrap(),
            Embedding { prime: 0, frob: 0, ram: 1 }
        );
    }

    #[test]
    fn phi_orbit_size() {
        let shape = FieldShape::single(2, 2).unwrap();
        let start = Embedding { prime: 0, frob: 0, ram: 1 };
        let mut b = start;
        for _ in 0..4 {
            b = shape.phi(b).unwrap();
        }
        assert_eq!(b, start);
        let mut seen = BTreeSet::new();
        let mut b = start;
        for _ in 0..4 {
            seen.insert(b);
            b = shape.phi(b).unwrap();
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn phi_is_bijective_across_primes() {
        let shape = FieldShape::new(vec![
            PrimeShape::new(2, 3).unwrap(),
            PrimeShape::new(1, 2).unwrap(),
        ])
        .unwrap();
        let all = shape.embeddings();
        let image: BTreeSet<Embedding> =
            all.iter().map(|&b| shape.phi(b).unwrap()).collect();
        assert_eq!(image.len(), all.len());
        for &b in &all {
            assert_eq!(shape.phi_inv(shape.phi(b).unwrap()).unwrap(), b);
            assert_eq!(b.prime, shape.phi(b).unwrap().prime);
        }
    }

    #[test]
    fn phi_cycle_skips_avoid() {
        let shape = FieldShape::single(1, 4).unwrap();
        let e = |j| Embedding { prime: 0, frob: j, ram: 1 };
        let avoid = set(&[e(1)]);
        assert_eq!(shape.phi_cycle(e(0), &avoid).unwrap(), e(2));
        assert_eq!(shape.phi_cycle_inv(e(2), &avoid).unwrap(), e(0));
        // empty avoid reduces to φ
        assert_eq!(shape.phi_cycle(e(0), &BTreeSet::new()).unwrap(), e(1));
    }

    #[test]
    fn phi_cycle_degenerate() {
        let shape = FieldShape::single(1, 2).unwrap();
        let avoid: BTreeSet<Embedding> = shape.embeddings().into_iter().collect();
        let b = Embedding { prime: 0, frob: 0, ram: 1 };
        assert!(matches!(
            shape.phi_cycle(b, &avoid),
            Err(Error::DegenerateCycle { prime: 0 })
        ));
    }

    #[test]
    fn phi_cycle_inverse_worked_indices() {
        // twelve slots, no avoid: the inverse shift steps one position back
        let shape = FieldShape::single(1, 12).unwrap();
        let e = |j| Embedding { prime: 0, frob: j, ram: 1 };
        assert_eq!(shape.phi_cycle_inv(e(4), &BTreeSet::new()).unwrap(), e(3));
    }

    #[test]
    fn chains_worked_example() {
        let shape = FieldShape::single(1, 12).unwrap();
        let e = |j: usize| Embedding { prime: 0, frob: (j - 1) % 12, ram: 1 };
        let s = set(&[e(5), e(6), e(9), e(10), e(12), e(1), e(2)]);
        let cs = chains(&shape, &s, &BTreeSet::new()).unwrap();
        let mut got: Vec<(Embedding, usize)> = cs.iter().map(|c| (c.last, c.len)).collect();
        got.sort();
        let mut want = vec![(e(6), 2), (e(10), 2), (e(2), 3)];
        want.sort();
        assert_eq!(got, want);
        assert!(cs.iter().all(|c| !c.whole_cycle));
    }

    #[test]
    fn chains_empty_and_full() {
        let shape = FieldShape::single(2, 2).unwrap();
        let none = chains(&shape, &BTreeSet::new(), &BTreeSet::new()).unwrap();
        assert!(none.is_empty());
        let all: BTreeSet<Embedding> = shape.embeddings().into_iter().collect();
        let full = chains(&shape, &all, &BTreeSet::new()).unwrap();
        assert_eq!(full.len(), 1);
        assert!(full[0].whole_cycle);
        assert_eq!(full[0].len, 4);
    }

    #[test]
    fn chains_partition_property() {
        // chains partition the set and each run is maximal
        let shape = FieldShape::single(1, 7).unwrap();
        let e = |j| Embedding { prime: 0, frob: j, ram: 1 };
        let avoid = set(&[e(3)]);
        for mask in 0u32..64 {
            let mut s = BTreeSet::new();
            let positions: Vec<Embedding> =
                (0..7).filter(|&j| j != 3).map(e).collect();
            for (bit, &b) in positions.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    s.insert(b);
                }
            }
            let cs = chains(&shape, &s, &avoid).unwrap();
            let mut union = BTreeSet::new();
            for c in &cs {
                for m in c.members(&shape, &avoid).unwrap() {
                    assert!(union.insert(m), "chains overlap");
                }
                if !c.whole_cycle {
                    let after = shape.phi_cycle(c.last, &avoid).unwrap();
                    assert!(!s.contains(&after), "chain not maximal at its end");
                }
            }
            assert_eq!(union, s, "chains do not cover the set");
        }
    }

    #[test]
    fn signature_cases() {
        let shape = FieldShape::single(1, 2).unwrap();
        let b0 = Embedding { prime: 0, frob: 0, ram: 1 };
        let b1 = Embedding { prime: 0, frob: 1, ram: 1 };
        let mut members = BTreeMap::new();
        members.insert(b0, Lift::Plain);
        let sigma = InfinityType::new(&shape, members, 1).unwrap();
        assert_eq!(signature(&sigma, b1, Lift::Plain), 1);
        assert_eq!(signature(&sigma, b0, Lift::Plain), 0);
        assert_eq!(signature(&sigma, b0, Lift::Conjugate), 2);
        for b in [b0, b1] {
            for side in [Lift::Plain, Lift::Conjugate] {
                let s = signature(&sigma, b, side) + signature(&sigma, b, side.other());
                assert_eq!(s, 2);
            }
        }
    }

    #[test]
    fn label_round_trip() {
        let b = Embedding { prime: 2, frob: 11, ram: 3 };
        let s = b.to_string();
        assert_eq!(s, "p2.t11.i3");
        assert_eq!(s.parse::<Embedding>().unwrap(), b);
        assert!("p1.t2".parse::<Embedding>().is_err());
        assert!("q1.t2.i1".parse::<Embedding>().is_err());
    }

    #[test]
    fn parity_enforced() {
        let shape = FieldShape::single(1, 2).unwrap();
        let b0 = Embedding { prime: 0, frob: 0, ram: 1 };
        let mut members = BTreeMap::new();
        members.insert(b0, Lift::Plain);
        assert!(InfinityType::new(&shape, members.clone(), 0).is_err());
        assert!(InfinityType::new(&shape, members, 1).is_ok());
    }
}
