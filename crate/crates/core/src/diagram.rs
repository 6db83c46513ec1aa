//! The two-row completion table for a stratum: formal lattice expressions
//! certifying that both members of the universal isogeny can be recovered
//! from their splice.
//!
//! Row 1 entries stand for the first Dieudonné module, row 2 for the
//! second, both indexed by the free embeddings. A splice built on a support
//! T knows row 2 over T and row 1 off T outright; the stratum relations
//! push knowledge forward (Frobenius fills the next row-2 entry over I,
//! p⁻¹·Frobenius the next row-1 entry over J), and the projective-bundle
//! data re-inserts one Hodge line per element of R. The stratum is fully
//! described by the splice exactly when the table completes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::embeddings::{Embedding, FieldShape, InfinityType};
use crate::error::{Error, Result};
use crate::jl::{self, SigmaResult};

/// A formal expression for one recovered lattice entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LatticeExpr {
    /// entry known directly from the splice
    SpliceBase { row: u8, pos: Embedding },
    /// Frobenius image of a row-1 entry (fills row 2 one step forward)
    FrobOf(Box<LatticeExpr>),
    /// p⁻¹ · Frobenius image of a row-2 entry (fills row 1 one step forward)
    FrobInvTimesP(Box<LatticeExpr>),
    /// Hodge line added back from the bundle at `from`
    BundleLine { from: Embedding, row: u8 },
}

impl LatticeExpr {
    /// The table position this expression computes, under the cycle
    /// structure that skips the ramification set.
    pub fn position(&self, shape: &FieldShape, sigma: &InfinityType) -> Result<(u8, Embedding)> {
        let avoid = sigma.infinity_set();
        Ok(match self {
            LatticeExpr::SpliceBase { row, pos } => (*row, *pos),
            LatticeExpr::FrobOf(inner) => {
                let (row, pos) = inner.position(shape, sigma)?;
                if row != 1 {
                    return Err(Error::Invalid(
                        "Frobenius rule consumes a row-1 entry".into(),
                    ));
                }
                (2, shape.phi_cycle(pos, &avoid)?)
            }
            LatticeExpr::FrobInvTimesP(inner) => {
                let (row, pos) = inner.position(shape, sigma)?;
                if row != 2 {
                    return Err(Error::Invalid(
                        "inverse rule consumes a row-2 entry".into(),
                    ));
                }
                (1, shape.phi_cycle(pos, &avoid)?)
            }
            LatticeExpr::BundleLine { from, row } => {
                (*row, shape.phi_cycle(*from, &avoid)?)
            }
        })
    }

    pub fn depth(&self) -> usize {
        match self {
            LatticeExpr::SpliceBase { .. } | LatticeExpr::BundleLine { .. } => 1,
            LatticeExpr::FrobOf(inner) | LatticeExpr::FrobInvTimesP(inner) => 1 + inner.depth(),
        }
    }
}

impl fmt::Display for LatticeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeExpr::SpliceBase { row, pos } => write!(f, "S({row}, {pos})"),
            LatticeExpr::FrobOf(inner) => write!(f, "Phi · {inner}"),
            LatticeExpr::FrobInvTimesP(inner) => write!(f, "p⁻¹Phi · {inner}"),
            LatticeExpr::BundleLine { from, .. } => write!(f, "L({from})"),
        }
    }
}

/// The completion table with its cycle context.
#[derive(Clone, Debug)]
pub struct DiagramState {
    pub shape: FieldShape,
    pub sigma: InfinityType,
    /// free embeddings in canonical order
    pub positions: Vec<Embedding>,
    pub t: BTreeSet<Embedding>,
    entries: BTreeMap<(u8, Embedding), LatticeExpr>,
}

impl DiagramState {
    pub fn entry(&self, row: u8, pos: Embedding) -> Option<&LatticeExpr> {
        self.entries.get(&(row, pos))
    }

    pub fn filled(&self) -> BTreeSet<(u8, Embedding)> {
        self.entries.keys().copied().collect()
    }

    pub fn filled_row(&self, row: u8) -> BTreeSet<Embedding> {
        self.entries
            .keys()
            .filter(|(r, _)| *r == row)
            .map(|(_, b)| *b)
            .collect()
    }

    fn fill(&mut self, row: u8, pos: Embedding, expr: LatticeExpr) -> bool {
        if self.entries.contains_key(&(row, pos)) {
            return false;
        }
        self.entries.insert((row, pos), expr);
        true
    }
}

/// Initial fills from the splice description: row 2 over T, row 1 off T.
pub fn init_diagram(
    shape: &FieldShape,
    sigma: &InfinityType,
    t: &BTreeSet<Embedding>,
) -> Result<DiagramState> {
    let avoid = sigma.infinity_set();
    let positions: Vec<Embedding> = shape
        .embeddings()
        .into_iter()
        .filter(|b| !avoid.contains(b))
        .collect();
    for b in t {
        shape.check(*b)?;
        if avoid.contains(b) {
            return Err(Error::Invalid(format!(
                "support member {b} lies in the ramification set"
            )));
        }
    }
    let mut state = DiagramState {
        shape: shape.clone(),
        sigma: sigma.clone(),
        positions: positions.clone(),
        t: t.clone(),
        entries: BTreeMap::new(),
    };
    for &b in &positions {
        if t.contains(&b) {
            state.fill(2, b, LatticeExpr::SpliceBase { row: 2, pos: b });
        } else {
            state.fill(1, b, LatticeExpr::SpliceBase { row: 1, pos: b });
        }
    }
    Ok(state)
}

/// Saturates the table under the two stratum relations. Entries are never
/// overwritten; each fillable entry has a unique derivation, so the
/// fixpoint and its expressions do not depend on the scan order.
pub fn propagate(
    state: &DiagramState,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
) -> Result<DiagramState> {
    propagate_in_order(state, i_set, j_set, false)
}

/// Same fixpoint computed with a reversed scan, for confluence checks.
pub fn propagate_reversed(
    state: &DiagramState,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
) -> Result<DiagramState> {
    propagate_in_order(state, i_set, j_set, true)
}

fn propagate_in_order(
    state: &DiagramState,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
    reversed: bool,
) -> Result<DiagramState> {
    let mut state = state.clone();
    let avoid = state.sigma.infinity_set();
    let mut order = state.positions.clone();
    if reversed {
        order.reverse();
    }
    loop {
        let mut changed = false;
        for &b in &order {
            if i_set.contains(&b) {
                if let Some(expr) = state.entry(1, b).cloned() {
                    let next = state.shape.phi_cycle(b, &avoid)?;
                    changed |= state.fill(2, next, LatticeExpr::FrobOf(Box::new(expr)));
                }
            }
            if j_set.contains(&b) {
                if let Some(expr) = state.entry(2, b).cloned() {
                    let next = state.shape.phi_cycle(b, &avoid)?;
                    changed |= state.fill(1, next, LatticeExpr::FrobInvTimesP(Box::new(expr)));
                }
            }
        }
        if !changed {
            return Ok(state);
        }
    }
}

/// Adds back one Hodge line per element of R: the bundle at β recovers the
/// next entry of the row the splice took at β (row 2 over T, row 1 off T).
pub fn apply_bundles(state: &DiagramState, r: &BTreeSet<Embedding>) -> Result<DiagramState> {
    let mut state = state.clone();
    let avoid = state.sigma.infinity_set();
    for &b in r {
        state.shape.check(b)?;
        let row = if state.t.contains(&b) { 2 } else { 1 };
        let next = state.shape.phi_cycle(b, &avoid)?;
        state.fill(row, next, LatticeExpr::BundleLine { from: b, row });
    }
    Ok(state)
}

#[derive(Clone, Debug)]
pub struct CompletionReport {
    pub complete: bool,
    pub unfilled: Vec<(u8, Embedding)>,
    pub recipe: BTreeMap<(u8, Embedding), LatticeExpr>,
}

/// Runs the whole pipeline for a chosen (T, R): initial fills, bundle
/// fills, then saturation.
pub fn complete(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
    t: &BTreeSet<Embedding>,
    r: &BTreeSet<Embedding>,
) -> Result<CompletionReport> {
    let state = init_diagram(shape, sigma, t)?;
    let state = apply_bundles(&state, r)?;
    let state = propagate(&state, i_set, j_set)?;
    Ok(report_of(&state))
}

pub fn report_of(state: &DiagramState) -> CompletionReport {
    let mut unfilled = Vec::new();
    for row in [1u8, 2u8] {
        for &b in &state.positions {
            if state.entry(row, b).is_none() {
                unfilled.push((row, b));
            }
        }
    }
    CompletionReport {
        complete: unfilled.is_empty(),
        unfilled,
        recipe: state.entries.clone(),
    }
}

/// One line per entry, each referencing the entry it was derived from:
/// `D(2, p0.t3.i1) = Phi · D(1, p0.t2.i1)`.
pub fn render_recipe(shape: &FieldShape, sigma: &InfinityType, report: &CompletionReport) -> String {
    let mut out = String::new();
    for ((row, pos), expr) in &report.recipe {
        let rhs = match expr {
            LatticeExpr::SpliceBase { row, pos } => format!("splice({row}, {pos})"),
            LatticeExpr::BundleLine { from, .. } => format!("bundle({from})"),
            LatticeExpr::FrobOf(inner) => {
                let (r, b) = inner
                    .position(shape, sigma)
                    .expect("recipe entries carry valid positions");
                format!("Phi · D({r}, {b})")
            }
            LatticeExpr::FrobInvTimesP(inner) => {
                let (r, b) = inner
                    .position(shape, sigma)
                    .expect("recipe entries carry valid positions");
                format!("p⁻¹Phi · D({r}, {b})")
            }
        };
        out.push_str(&format!("D({row}, {pos}) = {rhs}\n"));
    }
    for (row, pos) in &report.unfilled {
        out.push_str(&format!("D({row}, {pos}) = <unfilled>\n"));
    }
    out
}

/// Result row of the brute-force support search.
#[derive(Clone, Debug)]
pub struct SearchRow {
    pub t: BTreeSet<Embedding>,
    pub sigma_plus: BTreeSet<Embedding>,
    pub r: BTreeSet<Embedding>,
    pub admissible: bool,
    pub completes: bool,
}

const SEARCH_GUARD: usize = 20;

/// Enumerates every support I^c ⊆ T ⊆ J, reporting admissibility and
/// completion for each; the canonical choice must appear and complete.
pub fn search_admissible(
    shape: &FieldShape,
    sigma: &InfinityType,
    i_set: &BTreeSet<Embedding>,
    j_set: &BTreeSet<Embedding>,
) -> Result<Vec<SearchRow>> {
    let n_free = shape.degree() - sigma.infinite_count();
    if n_free > SEARCH_GUARD {
        return Err(Error::SizeGuard {
            size: n_free,
            limit: SEARCH_GUARD,
        });
    }
    let canonical = jl::compute_t(shape, sigma, i_set, j_set)?;
    let inter: BTreeSet<Embedding> = i_set.intersection(j_set).copied().collect();
    let base: BTreeSet<Embedding> = j_set.difference(&inter).copied().collect();
    let free: Vec<Embedding> = inter.iter().copied().collect();
    let mut rows = Vec::new();
    let mut saw_canonical = false;
    for mask in 0u64..(1u64 << free.len()) {
        let mut t = base.clone();
        for (bit, &b) in free.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                t.insert(b);
            }
        }
        let SigmaResult {
            sigma_plus,
            r,
            admissible,
            ..
        } = jl::compute_sigma(shape, sigma, &t, &inter)?;
        let report = complete(shape, sigma, i_set, j_set, &t, &r)?;
        if t == canonical {
            saw_canonical = true;
            debug_assert!(admissible && report.complete);
        }
        rows.push(SearchRow {
            t,
            sigma_plus: sigma_plus.keys().copied().collect(),
            r,
            admissible,
            completes: report.complete,
        });
    }
    debug_assert!(saw_canonical, "canonical support missing from the search");
    Ok(rows)
}

/// Hodge dimension of the splice at one slot, with its conjugate
/// complement. The three cases compare the slot and its successor against
/// the support slots; a case whose value would leave [0, 4e] cannot arise
/// from a well-formed support and is rejected.
pub fn splice_hodge_dims(
    shape: &FieldShape,
    sigma: &InfinityType,
    t1: &crate::jl::SlotSet,
    theta: (usize, usize),
) -> Result<(i64, i64)> {
    let (k, j) = theta;
    if k >= shape.primes().len() || j >= shape.prime(k).f {
        return Err(Error::InvalidIndex(format!("slot p{k}.t{j}")));
    }
    let p = shape.prime(k);
    let mut s_sum: i64 = 0;
    for i in 1..=p.e {
        let b = Embedding { prime: k, frob: j, ram: i };
        s_sum += crate::embeddings::signature(sigma, b, crate::embeddings::Lift::Plain) as i64;
    }
    let in_t1 = t1.contains(&(k, j));
    let next_in_t1 = t1.contains(&(k, (j + 1) % p.f));
    let dim = match (in_t1, next_in_t1) {
        (true, false) => 2 * s_sum + 2,
        (false, true) => 2 * s_sum - 2,
        _ => 2 * s_sum,
    };
    let total = 4 * p.e as i64;
    if dim < 0 || dim > total {
        return Err(Error::InconsistentCase);
    }
    Ok((dim, total - dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::Lift;
    use std::collections::BTreeMap;

    fn pos(shape: &FieldShape, j: usize) -> Embedding {
        shape.from_cycle_index(0, j)
    }

    fn pos_set(shape: &FieldShape, v: &[usize]) -> BTreeSet<Embedding> {
        v.iter().map(|&j| pos(shape, j)).collect()
    }

    fn worked_example() -> (
        FieldShape,
        InfinityType,
        BTreeSet<Embedding>,
        BTreeSet<Embedding>,
        BTreeSet<Embedding>,
        BTreeSet<Embedding>,
    ) {
        let shape = FieldShape::single(1, 12).unwrap();
        let sigma = InfinityType::empty();
        let j_set = pos_set(&shape, &[0, 1, 3, 4, 5, 6, 8, 9, 10, 11]);
        let i_set = pos_set(&shape, &[0, 1, 2, 4, 5, 7, 8, 9, 11]);
        let t = pos_set(&shape, &[1, 3, 4, 6, 8, 10, 11]);
        let r = pos_set(&shape, &[2, 6, 7]);
        (shape, sigma, i_set, j_set, t, r)
    }

    #[test]
    fn initial_fills_match_support() {
        let (shape, sigma, _, _, t, _) = worked_example();
        let state = init_diagram(&shape, &sigma, &t).unwrap();
        assert_eq!(state.filled_row(2), t);
        assert_eq!(
            state.filled_row(1),
            pos_set(&shape, &[0, 2, 5, 7, 9])
        );
    }

    #[test]
    fn propagation_reaches_second_table() {
        let (shape, sigma, i_set, j_set, t, _) = worked_example();
        let state = init_diagram(&shape, &sigma, &t).unwrap();
        let state = propagate(&state, &i_set, &j_set).unwrap();
        assert_eq!(
            state.filled_row(1),
            pos_set(&shape, &[0, 1, 2, 4, 5, 6, 7, 9, 11])
        );
        assert_eq!(
            state.filled_row(2),
            pos_set(&shape, &[0, 1, 2, 3, 4, 5, 6, 8, 10, 11])
        );
    }

    #[test]
    fn bundles_complete_third_table() {
        let (shape, sigma, i_set, j_set, t, r) = worked_example();
        let state = init_diagram(&shape, &sigma, &t).unwrap();
        let with_bundles = apply_bundles(&state, &r).unwrap();
        // the three new fills sit one step after each element of R
        for &b in &r {
            let row = if t.contains(&b) { 2 } else { 1 };
            let next = shape.phi_cycle(b, &sigma.infinity_set()).unwrap();
            assert!(matches!(
                with_bundles.entry(row, next),
                Some(LatticeExpr::BundleLine { .. })
            ));
        }
        let done = propagate(&with_bundles, &i_set, &j_set).unwrap();
        let report = report_of(&done);
        assert!(report.complete);
    }

    #[test]
    fn non_example_stays_incomplete() {
        // the wrong support {θ1, θ2} cannot recover the first row-1 entry
        let shape = FieldShape::single(1, 4).unwrap();
        let sigma = InfinityType::empty();
        let i_set = pos_set(&shape, &[1, 2, 3]);
        let j_set = pos_set(&shape, &[0, 1, 2]);
        let t = pos_set(&shape, &[0, 1]);
        let report =
            complete(&shape, &sigma, &i_set, &j_set, &t, &BTreeSet::new()).unwrap();
        assert!(!report.complete);
        assert_eq!(report.unfilled, vec![(1, pos(&shape, 0))]);
    }

    #[test]
    fn essential_frobenius_special_case() {
        // (I, J) = (everything, ∅): row 2 is recovered by Frobenius alone
        let shape = FieldShape::single(2, 2).unwrap();
        let sigma = InfinityType::empty();
        let i_set: BTreeSet<Embedding> = shape.embeddings().into_iter().collect();
        let j_set = BTreeSet::new();
        let report = complete(
            &shape,
            &sigma,
            &i_set,
            &j_set,
            &BTreeSet::new(),
            &BTreeSet::new(),
        )
        .unwrap();
        assert!(report.complete);
        for (key, expr) in &report.recipe {
            if key.0 == 2 {
                assert!(matches!(expr, LatticeExpr::FrobOf(_)));
            }
        }
    }

    #[test]
    fn propagation_is_confluent() {
        let (shape, sigma, i_set, j_set, t, r) = worked_example();
        let state = apply_bundles(&init_diagram(&shape, &sigma, &t).unwrap(), &r).unwrap();
        let fwd = propagate(&state, &i_set, &j_set).unwrap();
        let rev = propagate_reversed(&state, &i_set, &j_set).unwrap();
        assert_eq!(report_of(&fwd).recipe, report_of(&rev).recipe);
    }

    #[test]
    fn search_confirms_non_example_support() {
        let shape = FieldShape::single(1, 4).unwrap();
        let sigma = InfinityType::empty();
        let i_set = pos_set(&shape, &[1, 2, 3]);
        let j_set = pos_set(&shape, &[0, 1, 2]);
        let rows = search_admissible(&shape, &sigma, &i_set, &j_set).unwrap();
        assert_eq!(rows.len(), 4); // I ∩ J = {1, 2}
        let canonical = pos_set(&shape, &[0, 2]);
        let bad = pos_set(&shape, &[0, 1]);
        for row in &rows {
            if row.t == canonical {
                assert!(row.admissible && row.completes);
            }
            if row.t == bad {
                assert!(!row.admissible);
            }
        }
    }

    #[test]
    fn search_enumerates_all_candidates_d12() {
        let shape = FieldShape::single(1, 12).unwrap();
        let sigma = InfinityType::empty();
        let j_set = pos_set(&shape, &[0, 1, 3, 4, 5, 6, 8, 9, 10, 11]);
        let i_set = pos_set(&shape, &[0, 1, 2, 4, 5, 7, 8, 9, 11]);
        let rows = search_admissible(&shape, &sigma, &i_set, &j_set).unwrap();
        assert_eq!(rows.len(), 128); // |I ∩ J| = 7
        let canonical = crate::jl::compute_t(&shape, &sigma, &i_set, &j_set).unwrap();
        let hit = rows.iter().find(|r| r.t == canonical).unwrap();
        assert!(hit.admissible && hit.completes);
    }

    /// Unfilled entries are exactly the ones unreachable from the initial
    /// and bundle fills in the two-rule derivation graph.
    fn reachable_entries(
        shape: &FieldShape,
        sigma: &InfinityType,
        i_set: &BTreeSet<Embedding>,
        j_set: &BTreeSet<Embedding>,
        seeds: &BTreeSet<(u8, Embedding)>,
    ) -> BTreeSet<(u8, Embedding)> {
        let avoid = sigma.infinity_set();
        let mut seen = seeds.clone();
        let mut stack: Vec<(u8, Embedding)> = seeds.iter().copied().collect();
        while let Some((row, b)) = stack.pop() {
            let next = match row {
                1 if i_set.contains(&b) => Some((2, shape.phi_cycle(b, &avoid).unwrap())),
                2 if j_set.contains(&b) => Some((1, shape.phi_cycle(b, &avoid).unwrap())),
                _ => None,
            };
            if let Some(entry) = next {
                if seen.insert(entry) {
                    stack.push(entry);
                }
            }
        }
        seen
    }

    #[test]
    fn unfilled_matches_graph_reachability() {
        let sigma = InfinityType::empty();
        for d in 2..=4usize {
            let shape = FieldShape::single(1, d).unwrap();
            for (i_set, j_set) in crate::jl::enumerate_strata(&shape, &sigma) {
                let inter: BTreeSet<Embedding> =
                    i_set.intersection(&j_set).copied().collect();
                // every support candidate, including inadmissible ones
                let base: BTreeSet<Embedding> =
                    j_set.difference(&inter).copied().collect();
                let free: Vec<Embedding> = inter.iter().copied().collect();
                for mask in 0u32..(1 << free.len()) {
                    let mut t = base.clone();
                    for (bit, &b) in free.iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            t.insert(b);
                        }
                    }
                    let r = crate::jl::compute_sigma(&shape, &sigma, &t, &inter)
                        .unwrap()
                        .r;
                    let state = apply_bundles(
                        &init_diagram(&shape, &sigma, &t).unwrap(),
                        &r,
                    )
                    .unwrap();
                    let seeds = state.filled();
                    let done = propagate(&state, &i_set, &j_set).unwrap();
                    let filled = done.filled();
                    let reach = reachable_entries(&shape, &sigma, &i_set, &j_set, &seeds);
                    assert_eq!(filled, reach, "reachability oracle disagrees");
                }
            }
        }
    }

    #[test]
    fn search_guard_enforced() {
        let shape = FieldShape::single(1, 21).unwrap();
        let sigma = InfinityType::empty();
        let all: BTreeSet<Embedding> = shape.embeddings().into_iter().collect();
        let err = search_admissible(&shape, &sigma, &all.clone(), &all);
        assert!(matches!(err, Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn hodge_dims_three_cases() {
        // e = 2, one conjugate ramification member at slot 0 lift 1
        let shape = FieldShape::single(2, 3).unwrap();
        let b01 = Embedding { prime: 0, frob: 0, ram: 1 };
        let mut members = BTreeMap::new();
        members.insert(b01, Lift::Conjugate);
        let sigma = InfinityType::new(&shape, members, 1).unwrap();
        // slot 0 has signatures (2, 1) on the plain side: sum 3
        let t1: BTreeSet<(usize, usize)> = [(0usize, 0usize)].into_iter().collect();
        let (dim, conj) = splice_hodge_dims(&shape, &sigma, &t1, (0, 0)).unwrap();
        assert_eq!(dim, 2 * 3 + 2);
        assert_eq!(conj, 8 - dim);
        // unchanged case
        let both: BTreeSet<(usize, usize)> = [(0, 0), (0, 1)].into_iter().collect();
        let (dim, conj) = splice_hodge_dims(&shape, &sigma, &both, (0, 0)).unwrap();
        assert_eq!(dim, 2 * 3);
        assert_eq!(conj, 2);
        // a slot of signature sum 0 cannot drop by 2
        let shape1 = FieldShape::single(1, 2).unwrap();
        let a = Embedding { prime: 0, frob: 0, ram: 1 };
        let b = Embedding { prime: 0, frob: 1, ram: 1 };
        let mut members = BTreeMap::new();
        members.insert(a, Lift::Plain);
        members.insert(b, Lift::Plain);
        let sigma1 = InfinityType::new(&shape1, members, 0).unwrap();
        let t1_next: BTreeSet<(usize, usize)> = [(0usize, 1usize)].into_iter().collect();
        assert!(matches!(
            splice_hodge_dims(&shape1, &sigma1, &t1_next, (0, 0)),
            Err(Error::InconsistentCase)
        ));
    }
}
