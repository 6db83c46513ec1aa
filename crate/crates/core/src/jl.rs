//! The Jacquet-Langlands transfer data of an Iwahori or Goren-Oort stratum:
//! the splice support T, its extension T′ and slot set T¹, the new
//! ramification Σ⁺ with CM lifts, the projective-bundle index set R, and the
//! per-prime bottom-stratum classification.
//!
//! Everything is computed prime by prime. For a normal prime the support T
//! starts at I^c and appends an alternating tail of every maximal chain of
//! I ∩ J; the transitions of T under the induced shift then give Σ⁺, and
//! R = Σ⁺ ∖ (I ∩ J). A bottom prime (I = J = everything) instead converts
//! its whole cycle into ramification, picking up Iwahori level when the
//! cycle is even and an extra finite place when it is odd.

use std::collections::{BTreeMap, BTreeSet};

use crate::embeddings::{chains, Chain, Embedding, FieldShape, InfinityType, Lift};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimeClass {
    Normal,
    BottomEvenIwahori,
    BottomOddExtraPlace,
}

impl std::fmt::Display for PrimeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrimeClass::Normal => write!(f, "normal"),
            PrimeClass::BottomEvenIwahori => write!(f, "bottom_even_iwahori"),
            PrimeClass::BottomOddExtraPlace => write!(f, "bottom_odd_extra_place"),
        }
    }
}

/// Frobenius slots named by (prime, slot index).
pub type SlotSet = BTreeSet<(usize, usize)>;

/// Full transfer data for one stratum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JlTarget {
    pub t: BTreeSet<Embedding>,
    pub t_prime: BTreeSet<Embedding>,
    /// slots (prime, frob) whose first lift lies in T′
    pub t1: SlotSet,
    /// new archimedean ramification with its CM lifts
    pub sigma_plus: BTreeMap<Embedding, Lift>,
    /// Σ_IJ = Σ ⊔ Σ⁺ (bottom primes contribute their whole cycle, an odd
    /// bottom prime also a finite place)
    pub sigma_ij: InfinityType,
    pub r: BTreeSet<Embedding>,
    pub stratum_dim: usize,
    pub target_base_dim: usize,
    pub per_prime: Vec<PrimeClass>,
    /// false when a user-supplied T fails I ∩ J ⊆ Σ⁺
    pub admissible: bool,
}

fn prime_sets(
    _shape: &FieldShape,
    set: &BTreeSet<Embedding>,
    k: usize,
) -> BTreeSet<Embedding> {
    set.iter().copied().filter(|b| b.prime == k).collect()
}

/// Classifies each prime of a candidate stratum pair as normal or bottom.
/// A prime whose cycle is entirely archimedean ramification is degenerate.
pub fn validate_pair(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
) -> Result<Vec<PrimeClass>> {
    let sig_inf = sigma.infinity_set();
    for b in i_set.iter().chain(j_set) {
        shape.check(*b)?;
        if sig_inf.contains(b) {
            return Err(Error::Invalid(format!(
                "stratum set member {b} lies in the ramification set"
            )));
        }
    }
    let mut out = Vec::with_capacity(shape.primes().len());
    for k in 0..shape.primes().len() {
        let cycle: BTreeSet<Embedding> = shape
            .embeddings_of_prime(k)
            .into_iter()
            .filter(|b| !sig_inf.contains(b))
            .collect();
        if cycle.is_empty() {
            return Err(Error::DegenerateCycle { prime: k });
        }
        let ik = prime_sets(shape, i_set, k);
        let jk = prime_sets(shape, j_set, k);
        for b in &cycle {
            if !ik.contains(b) && !jk.contains(b) {
                return Err(Error::NotAStratumPair {
                    prime: k,
                    missing: *b,
                });
            }
        }
        if ik == cycle && jk == cycle {
            out.push(PrimeClass::BottomEvenIwahori); // refined by classify_bottom
        } else {
            out.push(PrimeClass::Normal);
        }
    }
    Ok(out)
}

/// The bottom-stratum classification at one prime: an even cycle becomes
/// ramification with Iwahori level, an odd one additionally swallows the
/// finite place. A prime with no free embeddings contributes nothing and
/// reports as normal.
pub fn classify_bottom(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
    prime: usize,
) -> Result<PrimeClass> {
    if prime >= shape.primes().len() {
        return Err(Error::Invalid(format!("no prime {prime}")));
    }
    let sig_inf = sigma.infinity_set();
    let cycle: BTreeSet<Embedding> = shape
        .embeddings_of_prime(prime)
        .into_iter()
        .filter(|b| !sig_inf.contains(b))
        .collect();
    if cycle.is_empty() {
        return Ok(PrimeClass::Normal);
    }
    let ik = prime_sets(shape, i_set, prime);
    let jk = prime_sets(shape, j_set, prime);
    if ik != cycle || jk != cycle {
        return Err(Error::NotBottom { prime });
    }
    Ok(if cycle.len().is_multiple_of(2) {
        PrimeClass::BottomEvenIwahori
    } else {
        PrimeClass::BottomOddExtraPlace
    })
}

fn append_for_chain(
    shape: &FieldShape,
    avoid: &BTreeSet<Embedding>,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
    chain: &Chain,
    t: &mut BTreeSet<Embedding>,
) -> Result<()> {
    let beta = chain.last;
    let n = chain.len - 1;
    let succ = shape.phi_cycle(beta, avoid)?;
    let not_in_j = !j_set.contains(&succ);
    let not_in_i = !i_set.contains(&succ);
    debug_assert!(
        not_in_j != not_in_i,
        "exactly one append case fires when I \u{222a} J covers"
    );
    if not_in_j {
        // even offsets from the chain end
        let mut cur = beta;
        let mut k = 0;
        while 2 * k <= n {
            t.insert(cur);
            if 2 * (k + 1) <= n {
                cur = shape.phi_cycle_inv(cur, avoid)?;
                cur = shape.phi_cycle_inv(cur, avoid)?;
            }
            k += 1;
        }
    } else {
        // odd offsets; empty when the chain is a single element
        if n >= 1 {
            let mut cur = shape.phi_cycle_inv(beta, avoid)?;
            let mut k = 0;
            while 2 * k < n {
                t.insert(cur);
                if 2 * (k + 1) < n {
                    cur = shape.phi_cycle_inv(cur, avoid)?;
                    cur = shape.phi_cycle_inv(cur, avoid)?;
                }
                k += 1;
            }
        }
    }
    Ok(())
}

/// The canonical splice support T for a pair with all primes normal.
pub fn compute_t(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
) -> Result<BTreeSet<Embedding>> {
    let classes = validate_pair(shape, sigma, i_set, j_set)?;
    if let Some(k) = classes.iter().position(|c| *c != PrimeClass::Normal) {
        return Err(Error::BottomStratum { prime: k });
    }
    let avoid = sigma.infinity_set();
    let mut t: BTreeSet<Embedding> = shape
        .embeddings()
        .into_iter()
        .filter(|b| !avoid.contains(b) && !i_set.contains(b))
        .collect();
    let inter: BTreeSet<Embedding> = i_set.intersection(j_set).copied().collect();
    for chain in chains(shape, &inter, &avoid)? {
        if chain.whole_cycle {
            return Err(Error::BottomStratum {
                prime: chain.last.prime,
            });
        }
        append_for_chain(shape, &avoid, i_set, j_set, &chain, &mut t)?;
    }
    Ok(t)
}

/// Extends T across the ramification set and collects the slots whose first
/// lift is reached: a maximal φ-chain of Σ_∞ is absorbed exactly when its
/// successor lies in T.
pub fn compute_t_prime_t1(
    shape: &FieldShape,
    sigma: &InfinityType,
    t: &BTreeSet<Embedding>,
) -> Result<(BTreeSet<Embedding>, SlotSet)> {
    let sig_inf = sigma.infinity_set();
    let mut t_prime = t.clone();
    // maximal φ-chains inside Σ_∞ are chains for the cycle avoiding nothing
    for chain in chains(shape, &sig_inf, &BTreeSet::new())? {
        if chain.whole_cycle {
            continue; // a fully ramified prime contributes nothing to T′
        }
        let succ = shape.phi(chain.last)?;
        if t.contains(&succ) {
            for m in chain.members(shape, &BTreeSet::new())? {
                t_prime.insert(m);
            }
        }
    }
    let t1 = t_prime
        .iter()
        .filter(|b| b.ram == 1)
        .map(|b| (b.prime, b.frob))
        .collect();
    Ok((t_prime, t1))
}

/// Output of the Σ⁺ computation for a given support.
#[derive(Clone, Debug)]
pub struct SigmaResult {
    pub sigma_plus: BTreeMap<Embedding, Lift>,
    pub sigma_ij: InfinityType,
    pub r: BTreeSet<Embedding>,
    pub admissible: bool,
}

/// Σ⁺ is the transition set of T under φ′, with the conjugate lift over T;
/// R drops I ∩ J. A user-supplied T that fails I ∩ J ⊆ Σ⁺ is reported
/// inadmissible rather than rejected.
pub fn compute_sigma(
    shape: &FieldShape,
    sigma: &InfinityType,
    t: &BTreeSet<Embedding>,
    inter: &BTreeSet<Embedding>,
) -> Result<SigmaResult> {
    let avoid = sigma.infinity_set();
    let mut sigma_plus = BTreeMap::new();
    for b in shape.embeddings() {
        if avoid.contains(&b) {
            continue;
        }
        let succ = shape.phi_cycle(b, &avoid)?;
        let in_t = t.contains(&b);
        if in_t != t.contains(&succ) {
            let lift = if in_t { Lift::Conjugate } else { Lift::Plain };
            sigma_plus.insert(b, lift);
        }
    }
    let admissible = inter.iter().all(|b| sigma_plus.contains_key(b));
    let r = sigma_plus
        .keys()
        .copied()
        .filter(|b| !inter.contains(b))
        .collect();
    let sigma_ij = sigma.extend(shape, &sigma_plus, 0)?;
    Ok(SigmaResult {
        sigma_plus,
        sigma_ij,
        r,
        admissible,
    })
}

/// Alternating lifts along the cycle of a bottom prime, conjugate on the
/// maximally spaced support through the smallest element.
fn bottom_prime_lifts(
    shape: &FieldShape,
    avoid: &BTreeSet<Embedding>,
    prime: usize,
) -> Result<BTreeMap<Embedding, Lift>> {
    let cycle: Vec<Embedding> = shape
        .embeddings_of_prime(prime)
        .into_iter()
        .filter(|b| !avoid.contains(b))
        .collect();
    let mut out = BTreeMap::new();
    if cycle.is_empty() {
        return Ok(out);
    }
    let mut cur = cycle[0];
    for pos in 0..cycle.len() {
        let lift = if pos % 2 == 1 { Lift::Conjugate } else { Lift::Plain };
        out.insert(cur, lift);
        cur = shape.phi_cycle(cur, avoid)?;
    }
    Ok(out)
}

/// The full transfer target of the stratum attached to (I, J).
pub fn jl_target(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
) -> Result<JlTarget> {
    let mut classes = validate_pair(shape, sigma, i_set, j_set)?;
    let avoid = sigma.infinity_set();
    let inter: BTreeSet<Embedding> = i_set.intersection(j_set).copied().collect();

    // run the recipe on the normal primes only
    let mut t = BTreeSet::new();
    let mut sigma_plus: BTreeMap<Embedding, Lift> = BTreeMap::new();
    let mut r = BTreeSet::new();
    let mut extra_finite = 0usize;
    for k in 0..shape.primes().len() {
        let ik = prime_sets(shape, i_set, k);
        let jk = prime_sets(shape, j_set, k);
        match classes[k] {
            PrimeClass::Normal => {
                let sub_i: BTreeSet<Embedding> = ik;
                let sub_j: BTreeSet<Embedding> = jk;
                let mut tk: BTreeSet<Embedding> = shape
                    .embeddings_of_prime(k)
                    .into_iter()
                    .filter(|b| !avoid.contains(b) && !sub_i.contains(b))
                    .collect();
                let inter_k = prime_sets(shape, &inter, k);
                for chain in chains(shape, &inter_k, &avoid)? {
                    append_for_chain(shape, &avoid, &sub_i, &sub_j, &chain, &mut tk)?;
                }
                // transitions of T on this prime
                for b in shape.embeddings_of_prime(k) {
                    if avoid.contains(&b) {
                        continue;
                    }
                    let succ = shape.phi_cycle(b, &avoid)?;
                    let in_t = tk.contains(&b);
                    if in_t != tk.contains(&succ) {
                        let lift = if in_t { Lift::Conjugate } else { Lift::Plain };
                        sigma_plus.insert(b, lift);
                        if !inter_k.contains(&b) {
                            r.insert(b);
                        }
                    }
                }
                t.extend(tk);
            }
            _ => {
                let class = classify_bottom(shape, sigma, i_set, j_set, k)?;
                classes[k] = class;
                sigma_plus.extend(bottom_prime_lifts(shape, &avoid, k)?);
                if class == PrimeClass::BottomOddExtraPlace {
                    extra_finite += 1;
                }
            }
        }
    }

    let (t_prime, t1) = compute_t_prime_t1(shape, sigma, &t)?;
    let sigma_ij = sigma.extend(shape, &sigma_plus, extra_finite)?;
    let n_free = shape.degree() - sigma.infinite_count();
    let stratum_dim = n_free - inter.len();
    let target_base_dim = shape.degree() - sigma_ij.infinite_count();
    Ok(JlTarget {
        t,
        t_prime,
        t1,
        sigma_plus,
        sigma_ij,
        r,
        stratum_dim,
        target_base_dim,
        per_prime: classes,
        admissible: true,
    })
}

/// Transfer data for the closed Goren-Oort stratum cut out by `t_go`,
/// realized as the Iwahori stratum with I everything and J = T.
pub fn goren_oort_target(
    shape: &FieldShape,
    sigma: &InfinityType,
    t_go: &BTreeSet<Embedding>,
) -> Result<JlTarget> {
    let sig_inf = sigma.infinity_set();
    let i_set: BTreeSet<Embedding> = shape
        .embeddings()
        .into_iter()
        .filter(|b| !sig_inf.contains(b))
        .collect();
    jl_target(shape, sigma, &i_set, t_go)
}

/// Enumerates all stratum pairs (I, J) with I ∪ J covering: three choices
/// (I only, J only, both) per free embedding.
pub fn enumerate_strata(
    shape: &FieldShape,
    sigma: &InfinityType,
) -> Vec<(BTreeSet<Embedding>, BTreeSet<Embedding>)> {
    let sig_inf = sigma.infinity_set();
    let free: Vec<Embedding> = shape
        .embeddings()
        .into_iter()
        .filter(|b| !sig_inf.contains(b))
        .collect();
    let n = free.len();
    let mut out = Vec::with_capacity(3usize.pow(n as u32));
    let mut assign = vec![0u8; n];
    loop {
        let mut i_set = BTreeSet::new();
        let mut j_set = BTreeSet::new();
        for (idx, &b) in free.iter().enumerate() {
            match assign[idx] {
                0 => {
                    i_set.insert(b);
                }
                1 => {
                    j_set.insert(b);
                }
                _ => {
                    i_set.insert(b);
                    j_set.insert(b);
                }
            }
        }
        out.push((i_set, j_set));
        // odometer
        let mut pos = 0;
        loop {
            if pos == n {
                return out;
            }
            assign[pos] += 1;
            if assign[pos] < 3 {
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BundleKind {
    /// the Hodge line at the anchor
    Omega,
    /// determinant twist by the inverse Hodge line
    DeltaOmegaInv,
    /// determinant twist by the dual tautological line
    DeltaMinusOne,
    /// the tautological line of the anchor's projective factor
    TautOne,
}

impl std::fmt::Display for BundleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BundleKind::Omega => write!(f, "omega"),
            BundleKind::DeltaOmegaInv => write!(f, "delta_omega_inv"),
            BundleKind::DeltaMinusOne => write!(f, "delta_minus_one"),
            BundleKind::TautOne => write!(f, "taut_one"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleClass {
    pub kind: BundleKind,
    pub anchor: Embedding,
    /// p-power picked up by the slot crossings back to the anchor
    pub exponent: usize,
}

/// Identifies the line bundle matching the Raynaud line of slot `theta`
/// under the stratum isomorphism: anchor by walking back from the slot
/// boundary through Σ_∞ and I ∩ J, kind by membership of the anchor in R
/// and of the next slot in T¹.
pub fn raynaud_bundle_class(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
    theta: (usize, usize),
) -> Result<BundleClass> {
    let target = jl_target(shape, sigma, i_set, j_set)?;
    if target.per_prime.iter().any(|c| *c != PrimeClass::Normal) {
        return Err(Error::Invalid(
            "bundle dictionary requires all primes normal".into(),
        ));
    }
    let (k, j) = theta;
    if k >= shape.primes().len() || j >= shape.prime(k).f {
        return Err(Error::InvalidIndex(format!("slot p{k}.t{j}")));
    }
    let p = shape.prime(k);
    let next_slot = (k, (j + 1) % p.f);
    let first_of_next = Embedding {
        prime: k,
        frob: next_slot.1,
        ram: 1,
    };
    let mut avoid2 = sigma.infinity_set();
    for b in i_set.intersection(j_set) {
        avoid2.insert(*b);
    }
    let beta = shape.phi_cycle_inv(first_of_next, &avoid2)?;
    let exponent = (j + p.f - beta.frob) % p.f;
    let kind = match (target.r.contains(&beta), target.t1.contains(&next_slot)) {
        (false, false) => BundleKind::Omega,
        (false, true) => BundleKind::DeltaOmegaInv,
        (true, true) => BundleKind::DeltaMinusOne,
        (true, false) => BundleKind::TautOne,
    };
    debug_assert!(exponent < p.size());
    Ok(BundleClass {
        kind,
        anchor: beta,
        exponent,
    })
}

/// The tame-level dictionary: pushforward of the Hodge line at `beta`
/// along the Goren-Oort stratum isomorphism attached to J.
pub fn tame_bundle_class(
    shape: &FieldShape,
    sigma: &InfinityType,
    j_set: &BTreeSet<Embedding>,
    beta: Embedding,
) -> Result<BundleClass> {
    shape.check(beta)?;
    let sig_inf = sigma.infinity_set();
    if sig_inf.contains(&beta) {
        return Err(Error::Invalid(format!(
            "{beta} lies in the ramification set"
        )));
    }
    let target = goren_oort_target(shape, sigma, j_set)?;
    if target.per_prime.iter().any(|c| *c != PrimeClass::Normal) {
        return Err(Error::Invalid(
            "tame dictionary requires J proper at every prime".into(),
        ));
    }
    let succ = shape.phi_cycle(beta, &sig_inf)?;
    let mut avoid2 = sig_inf.clone();
    avoid2.extend(j_set.iter().copied());
    let beta_prime = shape.phi_cycle_inv(succ, &avoid2)?;
    let p = shape.prime(beta.prime);
    let exponent = (beta.frob + p.f - beta_prime.frob) % p.f;
    let kind = match (target.r.contains(&beta_prime), target.t.contains(&succ)) {
        (false, false) => BundleKind::Omega,
        (false, true) => BundleKind::DeltaOmegaInv,
        (true, true) => BundleKind::DeltaMinusOne,
        (true, false) => BundleKind::TautOne,
    };
    Ok(BundleClass {
        kind,
        anchor: beta_prime,
        exponent,
    })
}
