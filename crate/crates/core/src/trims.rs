//! Point-removal and block-union constructions that carry a seed design
//! to composite dimensions.
//!
//! * [`trim_minus`]: `d = (q-e)(q-f)`, `q` classes, block sizes in
//!   `q-e-f ..= q-e`, intersection number 1.
//! * [`trim_plus`]: `d = (q-e)(q+f)`, `q+1` classes, block sizes in
//!   `q-e ..= q-e+f` plus the donor class, intersection number 1.
//! * [`shrink_const`]: `d = (s-e)s` from a MOLS net, constant block size
//!   `s-e`, intersection number 1.
//! * [`extend_union`]: `d = s(s+f)`, constant block size `s+f`,
//!   intersection number 2.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::designs::{
    affine_resolvable_design, net_design, Block, Construction, Design, DesignError, LatinSquares,
    ParallelClass, Provenance,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrimError {
    #[error("invalid offsets: {0}")]
    OffsetsInvalid(String),
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("need at least {needed} Latin squares of side {side}, have {available}")]
    TooFewSquares {
        side: usize,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    Design(DesignError),
}

impl From<DesignError> for TrimError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::NotPrimePower(q) => TrimError::NotPrimePower(q),
            other => TrimError::Design(other),
        }
    }
}

/// How donor classes, removed blocks and removed points are picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Choice {
    /// Lowest indices everywhere.
    #[default]
    Lowest,
    /// Pseudo-random choices from a ChaCha stream.
    Seeded(u64),
}

impl Choice {
    fn seed(self) -> Option<u64> {
        match self {
            Choice::Lowest => None,
            Choice::Seeded(s) => Some(s),
        }
    }
}

/// Which parts of a seed design are removed.
#[derive(Debug, Clone)]
pub struct TrimSpec {
    pub base: Design,
    pub donor_class: usize,
    /// Donor blocks removed entirely.
    pub removed_blocks: Vec<usize>,
    /// Donor block -> points removed from it.
    pub partial_removals: BTreeMap<usize, Vec<usize>>,
    pub keep_donor: bool,
}

impl TrimSpec {
    pub fn removed_points(&self) -> BTreeSet<usize> {
        let donor = &self.base.classes()[self.donor_class];
        let mut out: BTreeSet<usize> = self
            .removed_blocks
            .iter()
            .flat_map(|&b| donor.blocks()[b].points().iter().copied())
            .collect();
        out.extend(self.partial_removals.values().flatten().copied());
        out
    }

    /// Applies the removal and renumbers the surviving points.
    pub fn apply(&self, construction: Construction) -> Result<Design, TrimError> {
        let removed = self.removed_points();
        let expected: usize = self.removed_blocks.len() * self.block_len()
            + self.partial_removals.values().map(Vec::len).sum::<usize>();
        if removed.len() != expected {
            return Err(TrimError::OffsetsInvalid(format!(
                "removal sets overlap: {} distinct of {expected}",
                removed.len()
            )));
        }
        let donor = self.donor_class;
        let keep_donor = self.keep_donor;
        Ok(self
            .base
            .restrict(&removed, |c| keep_donor || c != donor, construction)?)
    }

    fn block_len(&self) -> usize {
        self.base.classes()[self.donor_class].blocks()[0].len()
    }
}

/// Picks the donor class, `full` donor blocks to remove entirely, and
/// `partial.len()` further donor blocks with `partial[i]` points removed.
fn pick_removal(
    base: Design,
    full: usize,
    partial: usize,
    per_partial: usize,
    keep_donor: bool,
    choice: Choice,
) -> TrimSpec {
    let (donor_class, block_order, mut rng) = match choice {
        Choice::Lowest => (0, (0..base.classes()[0].len()).collect::<Vec<_>>(), None),
        Choice::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let donor = rng.gen_range(0..base.num_classes());
            let mut order: Vec<usize> = (0..base.classes()[donor].len()).collect();
            order.shuffle(&mut rng);
            (donor, order, Some(rng))
        }
    };
    let donor = &base.classes()[donor_class];
    let removed_blocks = block_order[..full].to_vec();
    let partial_removals = block_order[full..full + partial]
        .iter()
        .map(|&b| {
            let mut pts = donor.blocks()[b].points().to_vec();
            if let Some(rng) = rng.as_mut() {
                pts.shuffle(rng);
            }
            pts.truncate(per_partial);
            pts.sort_unstable();
            (b, pts)
        })
        .collect();
    TrimSpec {
        base,
        donor_class,
        removed_blocks,
        partial_removals,
        keep_donor,
    }
}

/// `d = (q-e)(q-f)`: remove `e` donor blocks and `q-e` points from each of
/// `f` further donor blocks, then drop the donor class.
///
/// With `e = f = 0` the affine plane is returned intact with all `q+1`
/// classes.
pub fn trim_minus(q: u64, e: u64, f: u64) -> Result<Design, TrimError> {
    trim_minus_with(q, e, f, Choice::Lowest)
}

pub fn trim_minus_with(q: u64, e: u64, f: u64, choice: Choice) -> Result<Design, TrimError> {
    if !(f <= e && e < q && e + f <= q) || (q - e) * (q - f) < 2 {
        return Err(TrimError::OffsetsInvalid(format!(
            "trim_minus needs 0 <= f <= e < q, e+f <= q and (q-e)(q-f) >= 2, got q={q} e={e} f={f}"
        )));
    }
    let base = affine_resolvable_design(q)?;
    if e == 0 {
        return Ok(base);
    }
    let spec = pick_removal(
        base,
        e as usize,
        f as usize,
        (q - e) as usize,
        false,
        choice,
    );
    let removed_points = spec.removed_points().into_iter().collect();
    spec.apply(Construction::TrimMinus {
        q,
        e,
        f,
        donor_class: spec.donor_class,
        removed_points,
        seed: choice.seed(),
    })
}

/// `d = (q-e)(q+f)`: remove `e-f` donor blocks and `e` points from each of
/// `f` further donor blocks, keeping the donor class.
///
/// The point count follows from `(e-f)q + ef = q^2 - (q-e)(q+f)`. Every
/// non-donor block meets each donor block once, so it loses `e-f` points to
/// the full removals and at most `f` to the partial ones.
pub fn trim_plus(q: u64, e: u64, f: u64) -> Result<Design, TrimError> {
    trim_plus_with(q, e, f, Choice::Lowest)
}

pub fn trim_plus_with(q: u64, e: u64, f: u64, choice: Choice) -> Result<Design, TrimError> {
    if !(0 < f && f <= e && e < q) || (q - e) * (q + f) < 2 {
        return Err(TrimError::OffsetsInvalid(format!(
            "trim_plus needs 0 < f <= e < q, got q={q} e={e} f={f}"
        )));
    }
    let base = affine_resolvable_design(q)?;
    let spec = pick_removal(
        base,
        (e - f) as usize,
        f as usize,
        e as usize,
        true,
        choice,
    );
    let removed_points = spec.removed_points().into_iter().collect();
    spec.apply(Construction::TrimPlus {
        q,
        e,
        f,
        donor_class: spec.donor_class,
        removed_points,
        seed: choice.seed(),
    })
}

/// `d = (s-e)s` from the net of all supplied squares: remove `e` donor
/// blocks and drop the donor class. Every remaining block lost exactly one
/// point to each removed block, so all blocks have size `s-e`.
pub fn shrink_const(s: usize, e: usize, mols: &LatinSquares) -> Result<Design, TrimError> {
    shrink_const_with(s, e, mols, Choice::Lowest)
}

pub fn shrink_const_with(
    s: usize,
    e: usize,
    mols: &LatinSquares,
    choice: Choice,
) -> Result<Design, TrimError> {
    if !(0 < e && e < s) {
        return Err(TrimError::OffsetsInvalid(format!(
            "shrink_const needs 0 < e < s, got s={s} e={e}"
        )));
    }
    shrink_unchecked(s, e, mols, choice)
}

fn shrink_unchecked(
    s: usize,
    e: usize,
    mols: &LatinSquares,
    choice: Choice,
) -> Result<Design, TrimError> {
    check_mols(s, mols, 1)?;
    let base = net_design(mols, mols.count())?;
    let spec = pick_removal(base, e, 0, 0, false, choice);
    let removed_points = spec.removed_points().into_iter().collect();
    spec.apply(Construction::ShrinkConst {
        s,
        e,
        squares: mols.count(),
        donor_class: spec.donor_class,
        removed_points,
    })
}

fn check_mols(s: usize, mols: &LatinSquares, needed: usize) -> Result<(), TrimError> {
    if mols.side() != s {
        return Err(TrimError::OffsetsInvalid(format!(
            "squares have side {} but s = {s}",
            mols.side()
        )));
    }
    if mols.count() < needed {
        return Err(TrimError::TooFewSquares {
            side: s,
            needed,
            available: mols.count(),
        });
    }
    Ok(())
}

/// `d = s(s+f)`: block-wise union of the net on `s^2` points (first class
/// dropped) with `shrink_const(s, s-f)` relabelled to `s^2..d`. Class `i`
/// pairs with class `i` and block `j` with block `j`; the net halves meet in
/// exactly one point and the shrunk halves in at most one.
pub fn extend_union(s: usize, f: usize, mols: &LatinSquares) -> Result<Design, TrimError> {
    extend_union_with(s, f, mols, Choice::Lowest)
}

pub fn extend_union_with(
    s: usize,
    f: usize,
    mols: &LatinSquares,
    choice: Choice,
) -> Result<Design, TrimError> {
    if !(0 < f && f <= s) {
        return Err(TrimError::OffsetsInvalid(format!(
            "extend_union needs 0 < f <= s, got s={s} f={f}"
        )));
    }
    check_mols(s, mols, 1)?;
    let net = net_design(mols, mols.count())?;
    let shrunk = shrink_unchecked(s, s - f, mols, choice)?;
    let offset = s * s;
    let dropped = match choice {
        Choice::Lowest => 0,
        Choice::Seeded(_) => match shrunk.provenance().construction {
            Construction::ShrinkConst { donor_class, .. } => donor_class,
            _ => 0,
        },
    };
    let net_classes = net
        .classes()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != dropped)
        .map(|(_, c)| c);
    let classes = net_classes
        .zip(shrunk.classes())
        .map(|(a, b)| {
            let blocks = a
                .blocks()
                .iter()
                .zip(b.blocks())
                .map(|(x, y)| {
                    let mut pts = x.points().to_vec();
                    pts.extend(y.points().iter().map(|p| p + offset));
                    Block::new(pts)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ParallelClass::new(blocks))
        })
        .collect::<Result<Vec<_>, DesignError>>()?;
    Ok(Design::new(
        offset + shrunk.d(),
        classes,
        Provenance::new(Construction::ExtendUnion {
            s,
            f,
            squares: mols.count(),
        }),
    )?)
}
