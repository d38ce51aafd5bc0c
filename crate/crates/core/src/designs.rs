//! Resolvable block designs.
//!
//! A [`Design`] is a point set `{0..d}` together with an ordered list of
//! parallel classes, each of which partitions the point set into blocks.
//! Two seed families are provided: the affine plane on GF(q)^2 and nets
//! built from mutually orthogonal Latin squares.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gfield::{Field, FieldError, PrimePower};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DesignError {
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("requested {requested} squares but only {available} are available")]
    TooFewSquares { requested: usize, available: usize },
    #[error("intersection number needs at least two parallel classes")]
    SingleClass,
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("invalid Latin squares: {0}")]
    InvalidLatinSquares(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A block: a nonempty, strictly increasing list of point indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Block(Vec<usize>);

impl Block {
    /// Sorts the points; rejects empty input and repeated points.
    pub fn new(mut points: Vec<usize>) -> Result<Self, DesignError> {
        points.sort_unstable();
        Self::from_sorted(points)
    }

    fn from_sorted(points: Vec<usize>) -> Result<Self, DesignError> {
        if points.is_empty() {
            return Err(DesignError::InvalidBlock("empty block".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[0] >= w[1]) {
            return Err(DesignError::InvalidBlock(format!(
                "points not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Block(points))
    }

    pub fn points(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, point: usize) -> bool {
        self.0.binary_search(&point).is_ok()
    }

    /// Size of the intersection of two blocks, by sorted merge.
    pub fn overlap(&self, other: &Block) -> usize {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

impl TryFrom<Vec<usize>> for Block {
    type Error = DesignError;

    fn try_from(points: Vec<usize>) -> Result<Self, Self::Error> {
        Block::from_sorted(points)
    }
}

impl From<Block> for Vec<usize> {
    fn from(b: Block) -> Self {
        b.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParallelClass {
    blocks: Vec<Block>,
}

impl ParallelClass {
    pub fn new(blocks: Vec<Block>) -> Self {
        ParallelClass { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block sizes in block order.
    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Block::len).collect()
    }

    /// For every point, the index of the block holding it. Points not
    /// covered map to `usize::MAX`.
    pub fn block_of_points(&self, d: usize) -> Vec<usize> {
        let mut owner = vec![usize::MAX; d];
        for (i, b) in self.blocks.iter().enumerate() {
            for &p in b.points() {
                if p < d {
                    owner[p] = i;
                }
            }
        }
        owner
    }
}

/// How a design was produced. Points are numbered from `point_base`
/// (always 0 here; printed layouts elsewhere commonly start at 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(flatten)]
    pub construction: Construction,
    #[serde(default)]
    pub point_base: usize,
}

impl Provenance {
    pub fn new(construction: Construction) -> Self {
        Provenance {
            construction,
            point_base: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "snake_case")]
pub enum Construction {
    Affine {
        q: u64,
    },
    Net {
        s: usize,
        squares: usize,
    },
    TrimMinus {
        q: u64,
        e: u64,
        f: u64,
        donor_class: usize,
        removed_points: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    TrimPlus {
        q: u64,
        e: u64,
        f: u64,
        donor_class: usize,
        removed_points: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    ShrinkConst {
        s: usize,
        e: usize,
        squares: usize,
        donor_class: usize,
        removed_points: Vec<usize>,
    },
    ExtendUnion {
        s: usize,
        f: usize,
        squares: usize,
    },
    Custom {
        #[serde(default)]
        note: String,
    },
}

impl Construction {
    pub fn name(&self) -> &'static str {
        match self {
            Construction::Affine { .. } => "affine",
            Construction::Net { .. } => "net",
            Construction::TrimMinus { .. } => "trim_minus",
            Construction::TrimPlus { .. } => "trim_plus",
            Construction::ShrinkConst { .. } => "shrink_const",
            Construction::ExtendUnion { .. } => "extend_union",
            Construction::Custom { .. } => "custom",
        }
    }
}

/// A resolvable design on the points `0..d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Design {
    d: usize,
    provenance: Provenance,
    classes: Vec<ParallelClass>,
}

impl Design {
    /// Builds a design and checks that every class partitions `0..d`.
    pub fn new(
        d: usize,
        classes: Vec<ParallelClass>,
        provenance: Provenance,
    ) -> Result<Self, DesignError> {
        let dsg = Design::new_unchecked(d, classes, provenance);
        let report = validate_design(&dsg);
        if !report.valid {
            return Err(DesignError::InvalidDesign(report.issues().join("; ")));
        }
        Ok(dsg)
    }

    /// Builds a design without validation. Use [`validate_design`] to
    /// inspect the result.
    pub fn new_unchecked(d: usize, classes: Vec<ParallelClass>, provenance: Provenance) -> Self {
        Design {
            d,
            provenance,
            classes,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn classes(&self) -> &[ParallelClass] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// All block sizes occurring in the design.
    pub fn block_sizes(&self) -> BTreeSet<usize> {
        self.classes
            .iter()
            .flat_map(|c| c.blocks.iter().map(Block::len))
            .collect()
    }

    /// Removes `removed` points from every block, drops emptied blocks,
    /// keeps only the classes selected by `keep`, and renumbers the
    /// surviving points consecutively in their original order.
    pub(crate) fn restrict(
        &self,
        removed: &BTreeSet<usize>,
        keep: impl Fn(usize) -> bool,
        construction: Construction,
    ) -> Result<Design, DesignError> {
        let mut relabel = vec![usize::MAX; self.d];
        let mut next = 0usize;
        for (p, slot) in relabel.iter_mut().enumerate() {
            if !removed.contains(&p) {
                *slot = next;
                next += 1;
            }
        }
        let classes = self
            .classes
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, class)| {
                let blocks = class
                    .blocks
                    .iter()
                    .filter_map(|b| {
                        let pts: Vec<usize> = b
                            .points()
                            .iter()
                            .filter(|p| !removed.contains(p))
                            .map(|&p| relabel[p])
                            .collect();
                        (!pts.is_empty()).then(|| Block::from_sorted(pts))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ParallelClass::new(blocks))
            })
            .collect::<Result<Vec<_>, DesignError>>()?;
        Design::new(next, classes, Provenance::new(construction))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DesignError> {
        serde_json::from_str(text).map_err(|e| DesignError::InvalidDesign(e.to_string()))
    }
}

/// A list of mutually orthogonal Latin squares of side `s`, entries `0..s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLatinSquares")]
pub struct LatinSquares {
    s: usize,
    squares: Vec<Vec<Vec<usize>>>,
}

#[derive(Deserialize)]
struct RawLatinSquares {
    s: usize,
    squares: Vec<Vec<Vec<usize>>>,
}

impl TryFrom<RawLatinSquares> for LatinSquares {
    type Error = DesignError;

    fn try_from(raw: RawLatinSquares) -> Result<Self, Self::Error> {
        LatinSquares::new(raw.s, raw.squares)
    }
}

impl LatinSquares {
    /// Validates that every square is Latin and every pair is orthogonal.
    pub fn new(s: usize, squares: Vec<Vec<Vec<usize>>>) -> Result<Self, DesignError> {
        let bad = |msg: String| Err(DesignError::InvalidLatinSquares(msg));
        if s < 2 {
            return bad(format!("side {s} is too small"));
        }
        for (idx, sq) in squares.iter().enumerate() {
            if sq.len() != s || sq.iter().any(|row| row.len() != s) {
                return bad(format!("square {idx} is not {s}x{s}"));
            }
            for i in 0..s {
                let mut row_seen = vec![false; s];
                let mut col_seen = vec![false; s];
                for j in 0..s {
                    for (seen, v) in [(&mut row_seen, sq[i][j]), (&mut col_seen, sq[j][i])] {
                        if v >= s || seen[v] {
                            return bad(format!("square {idx} is not Latin at line {i}"));
                        }
                        seen[v] = true;
                    }
                }
            }
        }
        for a in 0..squares.len() {
            for b in a + 1..squares.len() {
                let mut seen = vec![false; s * s];
                for i in 0..s {
                    for j in 0..s {
                        let key = squares[a][i][j] * s + squares[b][i][j];
                        if seen[key] {
                            return bad(format!("squares {a} and {b} are not orthogonal"));
                        }
                        seen[key] = true;
                    }
                }
            }
        }
        Ok(LatinSquares { s, squares })
    }

    pub fn side(&self) -> usize {
        self.s
    }

    pub fn count(&self) -> usize {
        self.squares.len()
    }

    pub fn squares(&self) -> &[Vec<Vec<usize>>] {
        &self.squares
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({"s": self.s, "squares": self.squares}))
            .expect("squares serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, DesignError> {
        serde_json::from_str(text).map_err(|e| DesignError::InvalidLatinSquares(e.to_string()))
    }
}

/// The affine plane of order `q`: points GF(q)^2 with `(x, y) -> x*q + y`,
/// classes are the vertical pencil `{x = c}` followed by the pencils
/// `{y = m*x + c}` for `m = 0..q`. Block `c` of each class holds the line
/// with intercept `c`.
pub fn affine_resolvable_design(q: u64) -> Result<Design, DesignError> {
    let pp = PrimePower::detect(q).ok_or(DesignError::NotPrimePower(q))?;
    let field = Field::from_prime_power(pp);
    let qs = q as usize;
    let mut classes = Vec::with_capacity(qs + 1);
    classes.push(ParallelClass::new(
        (0..qs)
            .map(|x| Block::new((0..qs).map(|y| x * qs + y).collect()))
            .collect::<Result<_, _>>()?,
    ));
    for m in field.elements() {
        let blocks = field
            .elements()
            .map(|c| {
                Block::new(
                    field
                        .elements()
                        .map(|x| {
                            let y = field.add_raw(field.mul_raw(m, x), c);
                            x as usize * qs + y as usize
                        })
                        .collect(),
                )
            })
            .collect::<Result<_, _>>()?;
        classes.push(ParallelClass::new(blocks));
    }
    Design::new(
        qs * qs,
        classes,
        Provenance::new(Construction::Affine { q }),
    )
}

/// The `q - 1` squares `L_a(x, y) = a*x + y` over GF(q), `a = 1..q`.
pub fn mols_prime_power(q: u64) -> Result<LatinSquares, DesignError> {
    let pp = PrimePower::detect(q).ok_or(DesignError::NotPrimePower(q))?;
    let field = Field::from_prime_power(pp);
    let squares = (1..field.q())
        .map(|a| {
            field
                .elements()
                .map(|x| {
                    field
                        .elements()
                        .map(|y| field.add_raw(field.mul_raw(a, x), y) as usize)
                        .collect()
                })
                .collect()
        })
        .collect();
    LatinSquares::new(q as usize, squares)
}

/// The net on `s^2` points from the first `w` squares: cell `(x, y)` is
/// point `x*s + y`; classes are rows, columns, then one class per square
/// whose block `v` holds the cells carrying symbol `v`.
pub fn net_design(mols: &LatinSquares, w: usize) -> Result<Design, DesignError> {
    if w > mols.count() {
        return Err(DesignError::TooFewSquares {
            requested: w,
            available: mols.count(),
        });
    }
    let s = mols.side();
    let mut classes = Vec::with_capacity(w + 2);
    let rows = (0..s)
        .map(|x| Block::new((0..s).map(|y| x * s + y).collect()))
        .collect::<Result<_, _>>()?;
    let cols = (0..s)
        .map(|y| Block::new((0..s).map(|x| x * s + y).collect()))
        .collect::<Result<_, _>>()?;
    classes.push(ParallelClass::new(rows));
    classes.push(ParallelClass::new(cols));
    for sq in &mols.squares[..w] {
        let mut cells: Vec<Vec<usize>> = vec![Vec::with_capacity(s); s];
        for (x, row) in sq.iter().enumerate() {
            for (y, &v) in row.iter().enumerate() {
                cells[v].push(x * s + y);
            }
        }
        classes.push(ParallelClass::new(
            cells.into_iter().map(Block::new).collect::<Result<_, _>>()?,
        ));
    }
    Design::new(
        s * s,
        classes,
        Provenance::new(Construction::Net { s, squares: w }),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassReport {
    pub partition_ok: bool,
    /// Block size -> number of blocks of that size.
    pub size_counts: BTreeMap<usize, usize>,
    pub issues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub classes: Vec<ClassReport>,
    /// The global block-size set K.
    pub block_sizes: BTreeSet<usize>,
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn issues(&self) -> Vec<String> {
        let mut all = self.issues.clone();
        for (i, c) in self.classes.iter().enumerate() {
            all.extend(c.issues.iter().map(|m| format!("class {i}: {m}")));
        }
        all
    }
}

pub fn validate_design(dsg: &Design) -> ValidationReport {
    let d = dsg.d;
    let mut issues = Vec::new();
    if d < 2 {
        issues.push(format!("d = {d} is below 2"));
    }
    if dsg.classes.is_empty() {
        issues.push("design has no parallel classes".to_string());
    }
    let classes: Vec<ClassReport> = dsg
        .classes
        .iter()
        .map(|class| {
            let mut hits = vec![0u32; d];
            let mut class_issues = Vec::new();
            let mut size_counts = BTreeMap::new();
            for (bi, b) in class.blocks.iter().enumerate() {
                *size_counts.entry(b.len()).or_insert(0) += 1;
                if b.is_empty() {
                    class_issues.push(format!("block {bi} is empty"));
                }
                for w in b.points().windows(2) {
                    if w[0] >= w[1] {
                        class_issues.push(format!("block {bi} is not strictly increasing"));
                        break;
                    }
                }
                for &p in b.points() {
                    match hits.get_mut(p) {
                        Some(h) => *h += 1,
                        None => class_issues.push(format!("block {bi} has point {p} >= d")),
                    }
                }
            }
            let repeated = hits.iter().filter(|&&h| h > 1).count();
            let missing = hits.iter().filter(|&&h| h == 0).count();
            if repeated > 0 {
                class_issues.push(format!("{repeated} points covered more than once"));
            }
            if missing > 0 {
                class_issues.push(format!("{missing} points not covered"));
            }
            ClassReport {
                partition_ok: class_issues.is_empty(),
                size_counts,
                issues: class_issues,
            }
        })
        .collect();
    let valid = issues.is_empty() && classes.iter().all(|c| c.partition_ok);
    ValidationReport {
        valid,
        classes,
        block_sizes: dsg.block_sizes(),
        issues,
    }
}

/// Smallest and largest intersection over all block pairs from distinct
/// classes.
///
/// Each class pair is scanned once through the point-to-block maps, so the
/// cost is `O(r^2 (d + b^2))` rather than a merge per block pair.
pub fn intersection_range(dsg: &Design) -> Result<(usize, usize), DesignError> {
    if dsg.classes.len() < 2 {
        return Err(DesignError::SingleClass);
    }
    let d = dsg.d;
    let owners: Vec<Vec<usize>> = dsg.classes.iter().map(|c| c.block_of_points(d)).collect();
    let mut lo = usize::MAX;
    let mut hi = 0usize;
    let mut counts = Vec::new();
    for l in 0..owners.len() {
        for m in l + 1..owners.len() {
            let nm = dsg.classes[m].len();
            counts.clear();
            counts.resize(dsg.classes[l].len() * nm, 0usize);
            for p in 0..d {
                let (a, b) = (owners[l][p], owners[m][p]);
                if a != usize::MAX && b != usize::MAX {
                    counts[a * nm + b] += 1;
                }
            }
            for &c in &counts {
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
    }
    Ok((lo, hi))
}

/// The intersection number: the largest overlap between blocks of
/// different classes.
pub fn intersection_number(dsg: &Design) -> Result<usize, DesignError> {
    intersection_range(dsg).map(|(_, hi)| hi)
}
