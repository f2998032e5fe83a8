//! Number-conserving bosonic Fock bases.
//!
//! A [`SectorBasis`] enumerates every way of placing `N` bosons on `L` sites,
//! ordered lexicographically descending with site 0 most significant, so the
//! first state is `(N, 0, …, 0)` and the last is `(0, …, 0, N)`. Sites are
//! indexed from zero in this API.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default guard on sector dimensions.
pub const DEFAULT_DIMENSION_CAP: usize = 10_000_000;

/// Per-site boson counts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationVector(Vec<u32>);

impl OccupationVector {
    pub fn new(occupations: Vec<u32>) -> Result<Self> {
        if occupations.len() < 2 {
            return Err(Error::invalid("an occupation vector needs at least two sites"));
        }
        Ok(Self(occupations))
    }

    pub fn sites(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// `½ Σ n (n − 1)`, the on-site pair count.
    pub fn pair_count(&self) -> f64 {
        self.0.iter().map(|&n| 0.5 * n as f64 * (n as f64 - 1.0)).sum()
    }
}

impl std::ops::Index<usize> for OccupationVector {
    type Output = u32;
    fn index(&self, site: usize) -> &u32 {
        &self.0[site]
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

/// Moves one boson between adjacent sites, `a†_to a_from |state⟩`.
///
/// Returns `Ok(None)` when `from` is empty (the amplitude vanishes), otherwise
/// the new state together with `√(n_from) · √(n_to + 1)`.
pub fn apply_hop(
    state: &OccupationVector,
    from: usize,
    to: usize,
) -> Result<Option<(OccupationVector, f64)>> {
    let l = state.sites();
    if from >= l || to >= l || from.abs_diff(to) != 1 {
        return Err(Error::invalid(format!(
            "hop {from} -> {to} is not between adjacent sites of a {l}-site chain"
        )));
    }
    let n_from = state.0[from];
    if n_from == 0 {
        return Ok(None);
    }
    let n_to = state.0[to];
    let mut moved = state.0.clone();
    moved[from] -= 1;
    moved[to] += 1;
    let amplitude = (n_from as f64).sqrt() * ((n_to + 1) as f64).sqrt();
    Ok(Some((OccupationVector(moved), amplitude)))
}

/// `binomial(n + k − 1, n)`, or `None` on overflow.
pub fn sector_dimension(sites: usize, bosons: usize) -> Option<u128> {
    if sites == 0 {
        return None;
    }
    let n = (bosons + sites - 1) as u128;
    let k = bosons.min(sites - 1) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// All `L`-site, `N`-boson Fock states with an exact rank lookup.
#[derive(Debug)]
pub struct SectorBasis {
    sites: usize,
    bosons: usize,
    states: Vec<OccupationVector>,
    index: HashMap<OccupationVector, usize>,
}

impl SectorBasis {
    pub fn new(sites: usize, bosons: usize) -> Result<Self> {
        Self::with_cap(sites, bosons, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(sites: usize, bosons: usize, cap: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::invalid(format!("need at least 2 sites, got {sites}")));
        }
        Self::build(sites, bosons, cap)
    }

    // Half-chains of a 2-site system have a single site, so internal callers
    // may go below the public two-site minimum.
    fn build(sites: usize, bosons: usize, cap: usize) -> Result<Self> {
        let dim = sector_dimension(sites, bosons).unwrap_or(u128::MAX);
        if dim > cap as u128 {
            return Err(Error::Capacity { dim, cap });
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut current = vec![0u32; sites];
        fill(&mut current, 0, bosons as u32, &mut states);
        debug_assert_eq!(states.len() as u128, dim);
        let index = states
            .iter()
            .enumerate()
            .map(|(rank, s)| (s.clone(), rank))
            .collect();
        Ok(Self {
            sites,
            bosons,
            states,
            index,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn bosons(&self) -> usize {
        self.bosons
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[OccupationVector] {
        &self.states
    }

    pub fn state(&self, rank: usize) -> &OccupationVector {
        &self.states[rank]
    }

    pub fn rank(&self, state: &OccupationVector) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Rank of the unit-filling state `|1,1,…,1⟩`, if this sector has one.
    pub fn unit_filling_rank(&self) -> Option<usize> {
        if self.sites != self.bosons {
            return None;
        }
        self.rank(&OccupationVector(vec![1; self.sites]))
    }
}

fn fill(current: &mut [u32], site: usize, remaining: u32, out: &mut Vec<OccupationVector>) {
    if site + 1 == current.len() {
        current[site] = remaining;
        out.push(OccupationVector(current.to_vec()));
        return;
    }
    for n in (0..=remaining).rev() {
        current[site] = n;
        fill(current, site + 1, remaining - n, out);
    }
    current[site] = 0;
}

pub fn enumerate_basis(sites: usize, bosons: usize) -> Result<SectorBasis> {
    SectorBasis::new(sites, bosons)
}

/// Reindexing of the states with exactly `n_left` bosons on the left half
/// chain as pairs (left rank, right rank).
#[derive(Debug)]
pub struct BipartiteIndexer {
    parent: Arc<SectorBasis>,
    n_left: usize,
    n_right: usize,
    left: SectorBasis,
    right: SectorBasis,
    // (parent rank, left rank, right rank), ascending in parent rank.
    map: Vec<(usize, usize, usize)>,
}

impl BipartiteIndexer {
    pub fn parent(&self) -> &Arc<SectorBasis> {
        &self.parent
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn left_basis(&self) -> &SectorBasis {
        &self.left
    }

    pub fn right_basis(&self) -> &SectorBasis {
        &self.right
    }

    pub fn dim_left(&self) -> usize {
        self.left.dim()
    }

    pub fn dim_right(&self) -> usize {
        self.right.dim()
    }

    pub fn entries(&self) -> &[(usize, usize, usize)] {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Whether two indexers describe the same sector of the same basis.
    pub fn same_sector(&self, other: &BipartiteIndexer) -> bool {
        (Arc::ptr_eq(&self.parent, &other.parent)
            || (self.parent.sites == other.parent.sites
                && self.parent.bosons == other.parent.bosons))
            && self.n_left == other.n_left
    }
}

/// Builds the indexer for the sector with `n_left` bosons on sites `0..L/2`.
pub fn split_sector(basis: &Arc<SectorBasis>, n_left: usize) -> Result<BipartiteIndexer> {
    let l = basis.sites();
    if !l.is_multiple_of(2) {
        return Err(Error::invalid(format!("cannot split an odd chain of {l} sites")));
    }
    if n_left > basis.bosons() {
        return Err(Error::invalid(format!(
            "n_left = {n_left} exceeds the {} bosons in the sector",
            basis.bosons()
        )));
    }
    let half = l / 2;
    let n_right = basis.bosons() - n_left;
    let left = SectorBasis::build(half, n_left, usize::MAX)?;
    let right = SectorBasis::build(half, n_right, usize::MAX)?;
    let mut map = Vec::with_capacity(left.dim() * right.dim());
    for (rank, state) in basis.states().iter().enumerate() {
        let occ = state.as_slice();
        let on_left: u32 = occ[..half].iter().sum();
        if on_left as usize != n_left {
            continue;
        }
        let li = left.rank(&OccupationVector(occ[..half].to_vec()));
        let ri = right.rank(&OccupationVector(occ[half..].to_vec()));
        match (li, ri) {
            (Some(li), Some(ri)) => map.push((rank, li, ri)),
            _ => unreachable!("half-chain states are always enumerated"),
        }
    }
    Ok(BipartiteIndexer {
        parent: Arc::clone(basis),
        n_left,
        n_right,
        left,
        right,
        map,
    })
}

/// The particle split used for entanglement: `(⌊N/2⌋, ⌈N/2⌉)`.
pub fn balanced_split(bosons: usize) -> usize {
    bosons / 2
}
