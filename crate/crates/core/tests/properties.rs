//! Randomized invariants over the embedding layer and the small algebra.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use jlstrata::embeddings::{
    chains, signature, Embedding, FieldShape, InfinityType, Lift, PrimeShape,
};
use jlstrata::raynaud::{padic_expansion, CharacterGroup, Expansion};

fn arb_shape() -> impl Strategy<Value = FieldShape> {
    proptest::collection::vec((1usize..=3, 1usize..=4), 1..=3).prop_map(|parts| {
        FieldShape::new(
            parts
                .into_iter()
                .map(|(e, f)| PrimeShape::new(e, f).unwrap())
                .collect(),
        )
        .unwrap()
    })
}

fn arb_subset(shape: &FieldShape) -> impl Strategy<Value = BTreeSet<Embedding>> {
    let all = shape.embeddings();
    proptest::collection::vec(proptest::bool::ANY, all.len()).prop_map(move |mask| {
        all.iter()
            .zip(mask)
            .filter(|(_, keep)| *keep)
            .map(|(b, _)| *b)
            .collect()
    })
}

proptest! {
    /// φ permutes the embeddings of each prime; φ⁻¹ inverts it.
    #[test]
    fn phi_is_a_bijection(shape in arb_shape()) {
        let all = shape.embeddings();
        let image: BTreeSet<Embedding> =
            all.iter().map(|&b| shape.phi(b).unwrap()).collect();
        prop_assert_eq!(image.len(), all.len());
        for &b in &all {
            prop_assert_eq!(shape.phi_inv(shape.phi(b).unwrap()).unwrap(), b);
            prop_assert_eq!(shape.phi(b).unwrap().prime, b.prime);
        }
    }

    /// φ′ restricted to the complement of the avoid set is a bijection
    /// with the inverse variant as inverse.
    #[test]
    fn phi_cycle_inverts((shape, seed) in arb_shape().prop_flat_map(|s| {
        let sub = arb_subset(&s);
        (Just(s), sub)
    })) {
        let avoid = seed;
        for b in shape.embeddings() {
            if avoid.contains(&b) {
                continue;
            }
            // skip primes whose whole cycle is avoided
            let prime_avoided = shape
                .embeddings_of_prime(b.prime)
                .into_iter()
                .filter(|x| *x != b)
                .all(|x| avoid.contains(&x));
            if prime_avoided && avoid.contains(&b) {
                continue;
            }
            match shape.phi_cycle(b, &avoid) {
                Ok(next) => {
                    prop_assert!(!avoid.contains(&next));
                    prop_assert_eq!(shape.phi_cycle_inv(next, &avoid).unwrap(), b);
                }
                Err(_) => {
                    // only possible when everything else is avoided
                    let free = shape
                        .embeddings_of_prime(b.prime)
                        .into_iter()
                        .filter(|x| !avoid.contains(x))
                        .count();
                    prop_assert_eq!(free, 1);
                }
            }
        }
    }

    /// Chains partition their set into maximal runs.
    #[test]
    fn chains_partition((shape, sets) in arb_shape().prop_flat_map(|s| {
        let pair = (arb_subset(&s), arb_subset(&s));
        (Just(s), pair)
    })) {
        let (avoid, raw) = sets;
        let set: BTreeSet<Embedding> = raw.difference(&avoid).copied().collect();
        // drop primes that are fully avoided
        let set: BTreeSet<Embedding> = set
            .into_iter()
            .filter(|b| {
                shape
                    .embeddings_of_prime(b.prime)
                    .into_iter()
                    .any(|x| !avoid.contains(&x))
            })
            .collect();
        let cs = chains(&shape, &set, &avoid).unwrap();
        let mut union = BTreeSet::new();
        for c in &cs {
            for m in c.members(&shape, &avoid).unwrap() {
                prop_assert!(union.insert(m));
            }
            if !c.whole_cycle {
                let next = shape.phi_cycle(c.last, &avoid).unwrap();
                prop_assert!(!set.contains(&next));
                let members = c.members(&shape, &avoid).unwrap();
                let head = members[0];
                let before = shape.phi_cycle_inv(head, &avoid).unwrap();
                prop_assert!(!set.contains(&before) || members.contains(&before));
            }
        }
        prop_assert_eq!(union, set);
    }

    /// Signatures of the two CM lifts always sum to 2.
    #[test]
    fn signatures_sum_to_two((shape, picks) in arb_shape().prop_flat_map(|s| {
        let sub = arb_subset(&s);
        (Just(s), (sub, proptest::bool::ANY))
    })) {
        let (members, plain) = picks;
        let lift = if plain { Lift::Plain } else { Lift::Conjugate };
        let map: BTreeMap<Embedding, Lift> =
            members.iter().map(|&b| (b, lift)).collect();
        let finite = map.len() % 2;
        let sigma = InfinityType::new(&shape, map, finite).unwrap();
        for b in shape.embeddings() {
            let total = signature(&sigma, b, Lift::Plain) + signature(&sigma, b, Lift::Conjugate);
            prop_assert_eq!(total, 2);
        }
    }

    /// Nontrivial character expansions reconstruct their residue.
    #[test]
    fn expansion_reconstructs(p in prop::sample::select(vec![2u64, 3, 5]), f in 1usize..=4, r in 0u64..10000) {
        let group = CharacterGroup::new(p, f).unwrap();
        let chi = group.character(r);
        match padic_expansion(&group, chi) {
            Expansion::Trivial => prop_assert_eq!(chi.residue % group.modulus(), 0),
            Expansion::Digits(d) => {
                prop_assert_eq!(d.len(), f);
                prop_assert!(d.iter().all(|&x| (x as u64) < p));
                prop_assert!(!d.iter().all(|&x| x == 0));
                prop_assert!(!d.iter().all(|&x| x as u64 == p - 1));
                let back: u64 = d
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| x as u64 * p.pow(i as u32))
                    .sum();
                prop_assert_eq!(back % group.modulus(), chi.residue % group.modulus());
            }
        }
    }
}
