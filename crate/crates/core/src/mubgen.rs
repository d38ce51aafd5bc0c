//! One orthonormal basis per parallel class: every block of size `k`
//! contributes `k` vectors supported on its points, filled from a seed
//! unitary of order `k`. The spectrum of cross-basis magnitudes is computed
//! per class pair through the block overlaps.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::designs::{intersection_number, Construction, Design};
use crate::planner::{FactorizationPlan, PredictedQuality, Route, Target};
use crate::unitaries::{fourier_unitary, gram_deviation, HadamardSource, SeedUnitary, UnitaryError};

pub type Flavor = Target;

/// Magnitudes closer than this are reported as one value.
pub const CLUSTER_TOL: f64 = 1e-9;
/// Slack allowed between realized and predicted beta.
pub const BETA_TOL: f64 = 1e-9;
/// Bound on `max |U* U - I|` for an assembled basis.
pub const UNITARY_TOL: f64 = 1e-10;
/// Distance from `1/sqrt(d)` tolerated by the MUB check.
pub const MUB_TOL: f64 = 1e-10;

/// Tolerances used by [`check_claims_with`]; the clustering tolerance is
/// fixed because it defines the reported magnitude set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub beta: f64,
    pub unitary: f64,
    pub mub: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            beta: BETA_TOL,
            unitary: UNITARY_TOL,
            mub: MUB_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MubError {
    #[error("need at least two bases, got {0}")]
    TooFewBases(usize),
    #[error("no real Hadamard matrix of order {0}")]
    MissingRealHadamard(usize),
    #[error("design has no parallel classes")]
    EmptyDesign,
    #[error("bases do not match the design or plan: {0}")]
    MismatchedProvenance(String),
    #[error("route {0} is not supported here: {1}")]
    RouteUnsupported(Route, String),
    #[error("malformed basis data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Unitary(#[from] UnitaryError),
}

/// The vectors of one block: row `j` of `seed` placed on `points`.
#[derive(Debug, Clone)]
pub struct BlockBasis {
    pub points: Vec<usize>,
    pub seed: Arc<SeedUnitary>,
}

impl BlockBasis {
    pub fn order(&self) -> usize {
        self.points.len()
    }
}

/// A block-diagonal basis of `C^d`. Columns run over blocks in order and,
/// within a block, over the seed rows.
#[derive(Debug, Clone)]
pub struct Basis {
    blocks: Vec<BlockBasis>,
    /// point -> (block, position within block)
    owner: Vec<(u32, u32)>,
}

impl Basis {
    pub fn new(d: usize, blocks: Vec<BlockBasis>) -> Result<Self, MubError> {
        let mut owner = vec![(u32::MAX, u32::MAX); d];
        for (b, blk) in blocks.iter().enumerate() {
            if blk.seed.order() != blk.points.len() {
                return Err(MubError::Malformed(format!(
                    "block {b} has {} points but a seed of order {}",
                    blk.points.len(),
                    blk.seed.order()
                )));
            }
            for (t, &p) in blk.points.iter().enumerate() {
                if p >= d || owner[p].0 != u32::MAX {
                    return Err(MubError::Malformed(format!(
                        "point {p} is out of range or covered twice"
                    )));
                }
                owner[p] = (b as u32, t as u32);
            }
        }
        if owner.iter().any(|o| o.0 == u32::MAX) {
            return Err(MubError::Malformed("blocks do not cover every point".into()));
        }
        Ok(Basis { blocks, owner })
    }

    pub fn d(&self) -> usize {
        self.owner.len()
    }

    pub fn blocks(&self) -> &[BlockBasis] {
        &self.blocks
    }

    /// Dense `d x d` matrix, row-major, columns are the basis vectors.
    pub fn dense(&self) -> Vec<Complex64> {
        let d = self.d();
        let mut m = vec![Complex64::new(0.0, 0.0); d * d];
        let mut col = 0;
        for blk in &self.blocks {
            for j in 0..blk.order() {
                for (t, &p) in blk.points.iter().enumerate() {
                    m[p * d + col] = blk.seed.entry(j, t);
                }
                col += 1;
            }
        }
        m
    }

    /// Order of the block each column belongs to.
    pub fn column_orders(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.order(), b.order()))
            .collect()
    }

    /// Nonzero entries, counted on the seeds; entries outside the blocks are
    /// structural zeros.
    pub fn nonzero_count(&self) -> u64 {
        self.blocks
            .iter()
            .map(|b| {
                b.seed
                    .entries()
                    .iter()
                    .filter(|z| **z != Complex64::new(0.0, 0.0))
                    .count() as u64
            })
            .sum()
    }

    fn is_real(&self) -> bool {
        self.blocks.iter().all(|b| b.seed.is_real())
    }
}

#[derive(Debug, Clone)]
pub struct BasisSet {
    d: usize,
    flavor: Flavor,
    bases: Vec<Basis>,
    identity_appended: bool,
}

impl BasisSet {
    pub fn new(d: usize, flavor: Flavor, bases: Vec<Basis>) -> Result<Self, MubError> {
        if bases.iter().any(|b| b.d() != d) {
            return Err(MubError::Malformed("basis dimension differs from d".into()));
        }
        if flavor == Target::Real && !bases.iter().all(Basis::is_real) {
            return Err(MubError::Malformed("real flavor needs real Hadamard seeds".into()));
        }
        Ok(BasisSet {
            d,
            flavor,
            bases,
            identity_appended: false,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn identity_appended(&self) -> bool {
        self.identity_appended
    }

    /// The bases that come from design classes.
    pub fn design_bases(&self) -> &[Basis] {
        let n = self.bases.len() - usize::from(self.identity_appended);
        &self.bases[..n]
    }

    /// Appends the computational basis. It is excluded from claim checks.
    pub fn append_identity(&mut self) {
        if self.identity_appended {
            return;
        }
        let seed = Arc::new(match self.flavor {
            Target::Complex => fourier_unitary(1),
            Target::Real => SeedUnitary::from_core(1, vec![1], crate::unitaries::SeedKind::RealSylvester)
                .expect("order one is Hadamard"),
        });
        let blocks = (0..self.d)
            .map(|p| BlockBasis {
                points: vec![p],
                seed: Arc::clone(&seed),
            })
            .collect();
        self.bases
            .push(Basis::new(self.d, blocks).expect("singletons partition the points"));
        self.identity_appended = true;
    }

    /// Largest `|U* U - I|` over all distinct seeds, which bounds every
    /// block-diagonal basis.
    pub fn unitarity_deviation(&self) -> f64 {
        let mut seen = HashSet::new();
        let mut worst = 0.0f64;
        for blk in self.bases.iter().flat_map(|b| &b.blocks) {
            if seen.insert(Arc::as_ptr(&blk.seed)) {
                worst = worst.max(gram_deviation(blk.seed.order(), blk.seed.entries()));
            }
        }
        worst
    }

    /// Exact Gram check on every real seed; true for complex sets without
    /// integer cores only if there are none to check.
    pub fn real_cores_exact(&self) -> bool {
        let mut seen = HashSet::new();
        self.bases
            .iter()
            .flat_map(|b| &b.blocks)
            .filter(|blk| seen.insert(Arc::as_ptr(&blk.seed)))
            .all(|blk| blk.seed.verify_exact() != Some(false))
    }

    pub fn to_json(&self) -> String {
        let bases = self
            .bases
            .iter()
            .map(|b| {
                let dense = b.dense();
                dense
                    .chunks(self.d)
                    .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                    .collect()
            })
            .collect();
        let exact = (self.flavor == Target::Real).then(|| ExactJson {
            numerators: self.bases.iter().map(|b| numerators(b, self.d)).collect(),
            block_orders: self.bases.iter().map(Basis::column_orders).collect(),
        });
        serde_json::to_string(&BasisSetJson {
            d: self.d,
            flavor: self.flavor,
            identity_appended: self.identity_appended,
            bases,
            exact,
        })
        .expect("basis set serializes")
    }

    /// Recovers the block structure from the supports of the columns.
    pub fn from_json(text: &str) -> Result<Self, MubError> {
        let raw: BasisSetJson =
            serde_json::from_str(text).map_err(|e| MubError::Malformed(e.to_string()))?;
        let d = raw.d;
        if raw.flavor == Target::Real && raw.exact.is_none() {
            return Err(MubError::Malformed("real flavor needs the exact form".into()));
        }
        let mut bases = Vec::with_capacity(raw.bases.len());
        for (l, m) in raw.bases.iter().enumerate() {
            if m.len() != d || m.iter().any(|r| r.len() != d) {
                return Err(MubError::Malformed(format!("basis {l} is not {d} x {d}")));
            }
            let exact = raw
                .exact
                .as_ref()
                .map(|x| (&x.numerators[l], &x.block_orders[l]));
            bases.push(basis_from_dense(d, m, exact)?);
        }
        let mut set = BasisSet::new(d, raw.flavor, bases)?;
        set.identity_appended = raw.identity_appended;
        Ok(set)
    }
}

fn numerators(b: &Basis, d: usize) -> Vec<Vec<i8>> {
    let mut m = vec![vec![0i8; d]; d];
    let mut col = 0;
    for blk in &b.blocks {
        let core = blk.seed.core().expect("real seeds carry a core");
        let k = blk.order();
        for j in 0..k {
            for (t, &p) in blk.points.iter().enumerate() {
                m[p][col] = core[j * k + t];
            }
            col += 1;
        }
    }
    m
}

fn basis_from_dense(
    d: usize,
    m: &[Vec<[f64; 2]>],
    exact: Option<(&Vec<Vec<i8>>, &Vec<usize>)>,
) -> Result<Basis, MubError> {
    let nonzero = |row: usize, col: usize| match exact {
        Some((num, _)) => num[row][col] != 0,
        None => m[row][col] != [0.0, 0.0],
    };
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    for col in 0..d {
        let support: Vec<usize> = (0..d).filter(|&r| nonzero(r, col)).collect();
        match index.get(&support) {
            Some(&g) => groups[g].1.push(col),
            None => {
                index.insert(support.clone(), groups.len());
                groups.push((support, vec![col]));
            }
        }
    }
    let mut blocks = Vec::with_capacity(groups.len());
    for (points, cols) in groups {
        let k = points.len();
        if k == 0 || cols.len() != k {
            return Err(MubError::Malformed(
                "columns do not split into square blocks".into(),
            ));
        }
        let seed = match exact {
            Some((num, orders)) => {
                if cols.iter().any(|&c| orders[c] != k) {
                    return Err(MubError::Malformed("block orders disagree with supports".into()));
                }
                let core = cols
                    .iter()
                    .flat_map(|&c| points.iter().map(move |&p| num[p][c]))
                    .collect();
                SeedUnitary::from_core(k, core, crate::unitaries::SeedKind::Loaded)?
            }
            None => {
                let entries = cols
                    .iter()
                    .flat_map(|&c| points.iter().map(move |&p| Complex64::new(m[p][c][0], m[p][c][1])))
                    .collect();
                SeedUnitary::from_entries(k, entries)
            }
        };
        blocks.push(BlockBasis {
            points,
            seed: Arc::new(seed),
        });
    }
    Basis::new(d, blocks)
}

#[derive(Serialize, Deserialize)]
struct BasisSetJson {
    d: usize,
    flavor: Flavor,
    #[serde(default)]
    identity_appended: bool,
    bases: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact: Option<ExactJson>,
}

#[derive(Serialize, Deserialize)]
struct ExactJson {
    numerators: Vec<Vec<Vec<i8>>>,
    block_orders: Vec<Vec<usize>>,
}

/// One basis per class: Fourier seeds for the complex flavor, real Hadamard
/// seeds for the real one.
pub fn assemble_bases(
    dsg: &Design,
    flavor: Flavor,
    hadamard: &HadamardSource,
) -> Result<BasisSet, MubError> {
    if dsg.classes().is_empty() {
        return Err(MubError::EmptyDesign);
    }
    let mut seeds: HashMap<usize, Arc<SeedUnitary>> = HashMap::new();
    let mut seed_for = |k: usize| -> Result<Arc<SeedUnitary>, MubError> {
        if let Some(s) = seeds.get(&k) {
            return Ok(Arc::clone(s));
        }
        let s = match flavor {
            Target::Complex => Arc::new(fourier_unitary(k)),
            Target::Real => hadamard.get(k).ok_or(MubError::MissingRealHadamard(k))?,
        };
        seeds.insert(k, Arc::clone(&s));
        Ok(s)
    };
    let mut bases = Vec::with_capacity(dsg.num_classes());
    for class in dsg.classes() {
        let blocks = class
            .blocks()
            .iter()
            .map(|b| {
                Ok(BlockBasis {
                    points: b.points().to_vec(),
                    seed: seed_for(b.len())?,
                })
            })
            .collect::<Result<Vec<_>, MubError>>()?;
        bases.push(Basis::new(dsg.d(), blocks)?);
    }
    BasisSet::new(dsg.d(), flavor, bases)
}

#[derive(Default)]
struct PairSpectrum {
    exact: BTreeSet<Ratio<u64>>,
    approx: Vec<f64>,
}

impl PairSpectrum {
    fn merge(mut self, other: PairSpectrum) -> PairSpectrum {
        self.exact.extend(other.exact);
        self.approx.extend(other.approx);
        self.approx = cluster(std::mem::take(&mut self.approx));
        self
    }
}

fn cluster(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        match out.last() {
            Some(&last) if x - last <= CLUSTER_TOL => {}
            _ => out.push(x),
        }
    }
    out
}

fn pair_spectrum(a: &Basis, b: &Basis) -> PairSpectrum {
    let (na, nb) = (a.blocks.len(), b.blocks.len());
    let mut count = vec![0u32; na * nb];
    let mut first = vec![0u32; na * nb];
    for (p, (&(ba, _), &(bb, _))) in a.owner.iter().zip(&b.owner).enumerate() {
        let cell = ba as usize * nb + bb as usize;
        if count[cell] == 0 {
            first[cell] = p as u32;
        }
        count[cell] += 1;
    }
    let mut out = PairSpectrum::default();
    for ia in 0..na {
        let x = &a.blocks[ia];
        for ib in 0..nb {
            let y = &b.blocks[ib];
            let (ka, kb) = (x.order() as u64, y.order() as u64);
            let cell = ia * nb + ib;
            match count[cell] {
                0 => {
                    out.exact.insert(Ratio::from_integer(0));
                }
                1 => {
                    let p = first[cell] as usize;
                    if x.seed.is_flat() && y.seed.is_flat() {
                        out.exact.insert(Ratio::new(1, ka * kb));
                    } else {
                        let (pa, pb) = (a.owner[p].1 as usize, b.owner[p].1 as usize);
                        for j in 0..x.order() {
                            for i in 0..y.order() {
                                out.approx
                                    .push(x.seed.entry(j, pa).norm() * y.seed.entry(i, pb).norm());
                            }
                        }
                    }
                }
                _ => {
                    let shared: Vec<(usize, usize)> = x
                        .points
                        .iter()
                        .filter(|&&p| b.owner[p].0 as usize == ib)
                        .map(|&p| (a.owner[p].1 as usize, b.owner[p].1 as usize))
                        .collect();
                    match (x.seed.core(), y.seed.core()) {
                        (Some(ca), Some(cb)) => {
                            for j in 0..x.order() {
                                for i in 0..y.order() {
                                    let n: i64 = shared
                                        .iter()
                                        .map(|&(pa, pb)| {
                                            i64::from(ca[j * x.order() + pa])
                                                * i64::from(cb[i * y.order() + pb])
                                        })
                                        .sum();
                                    out.exact.insert(Ratio::new((n * n) as u64, ka * kb));
                                }
                            }
                        }
                        _ => {
                            for j in 0..x.order() {
                                for i in 0..y.order() {
                                    let z: Complex64 = shared
                                        .iter()
                                        .map(|&(pa, pb)| {
                                            x.seed.entry(j, pa).conj() * y.seed.entry(i, pb)
                                        })
                                        .sum();
                                    out.approx.push(z.norm());
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.approx = cluster(std::mem::take(&mut out.approx));
    out
}

fn ratio_sqrt(r: Ratio<u64>) -> f64 {
    (*r.numer() as f64 / *r.denom() as f64).sqrt()
}

/// Checks of the realized spectrum against the plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimFlags {
    /// realized beta <= predicted beta + 1e-9
    pub beta_within_prediction: bool,
    /// realized beta equals the prediction (informational)
    pub beta_attains_prediction: bool,
    pub delta_within_prediction: bool,
    pub sparsity_formula_exact: bool,
    pub sparsity_within_bounds: bool,
    pub mu_matches_route: bool,
    pub is_mub: bool,
    pub unitary: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub d: usize,
    pub bases: usize,
    /// Distinct cross-basis magnitudes, ascending.
    pub delta: Vec<f64>,
    /// Exact squared magnitudes aligned with `delta`, when all are exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_exact_sq: Option<Vec<Ratio<u64>>>,
    pub beta_realized: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_realized_sq: Option<Ratio<u64>>,
    pub eps_per_basis: Vec<f64>,
    pub eps_exact: Vec<Ratio<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<PredictedQuality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_expected: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_expected_sq: Option<Vec<Ratio<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<ClaimFlags>,
    /// Realized beta with the computational basis included, when appended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_with_identity: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SpectrumReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn passed(&self) -> bool {
        self.flags.as_ref().is_some_and(|f| f.passed)
    }
}

fn spectrum_of(d: usize, bases: &[Basis]) -> Result<SpectrumReport, MubError> {
    if bases.len() < 2 {
        return Err(MubError::TooFewBases(bases.len()));
    }
    let pairs: Vec<(usize, usize)> = (0..bases.len())
        .flat_map(|l| (l + 1..bases.len()).map(move |m| (l, m)))
        .collect();
    let total = pairs
        .par_iter()
        .map(|&(l, m)| pair_spectrum(&bases[l], &bases[m]))
        .reduce(PairSpectrum::default, PairSpectrum::merge);

    let mut values: Vec<(f64, Option<Ratio<u64>>)> = total
        .exact
        .iter()
        .map(|&r| (ratio_sqrt(r), Some(r)))
        .chain(total.approx.iter().map(|&x| (x, None)))
        .collect();
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut delta: Vec<(f64, Option<Ratio<u64>>)> = Vec::new();
    for (x, r) in values {
        match delta.last_mut() {
            Some(last) if x - last.0 <= CLUSTER_TOL => {
                if last.1.is_none() && r.is_some() {
                    *last = (x, r);
                }
            }
            _ => delta.push((x, r)),
        }
    }
    let all_exact = total.approx.is_empty();
    let max = delta.last().expect("at least one pair").0;
    let max_sq = total.exact.iter().next_back().copied();
    let (beta_realized, beta_realized_sq) = match (all_exact, max_sq) {
        (true, Some(r)) => {
            let b = r * Ratio::from_integer(d as u64);
            (ratio_sqrt(b), Some(b))
        }
        _ => ((d as f64).sqrt() * max, None),
    };
    let d2 = (d * d) as u64;
    let eps_exact: Vec<Ratio<u64>> = bases
        .iter()
        .map(|b| Ratio::new(d2 - b.nonzero_count(), d2))
        .collect();
    Ok(SpectrumReport {
        d,
        bases: bases.len(),
        delta_exact_sq: all_exact.then(|| delta.iter().map(|v| v.1.expect("exact")).collect()),
        delta: delta.iter().map(|v| v.0).collect(),
        beta_realized,
        beta_realized_sq,
        eps_per_basis: eps_exact.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect(),
        eps_exact,
        mu: None,
        route: None,
        predicted: None,
        delta_expected: None,
        delta_expected_sq: None,
        flags: None,
        beta_with_identity: None,
        notes: Vec::new(),
    })
}

/// Cross-basis magnitudes of every basis in the set, clustered at 1e-9.
pub fn spectrum(bs: &BasisSet) -> Result<SpectrumReport, MubError> {
    spectrum_of(bs.d, &bs.bases)
}

/// Predicted squared magnitudes for the plan's route.
pub fn predicted_delta(plan: &FactorizationPlan) -> Result<BTreeSet<Ratio<u64>>, MubError> {
    let q = plan.q.q();
    let (e, f) = (plan.e as u64, plan.f as u64);
    let zero = Ratio::from_integer(0u64);
    let products = |sizes: BTreeSet<u64>| -> BTreeSet<Ratio<u64>> {
        let mut out = BTreeSet::from([zero]);
        for &a in &sizes {
            for &b in &sizes {
                out.insert(Ratio::new(1, a * b));
            }
        }
        out
    };
    Ok(match plan.route {
        Route::TrimPlus => {
            let mut sizes: BTreeSet<u64> = (q - e..=q - e + f).collect();
            sizes.insert(q);
            products(sizes)
        }
        Route::TrimMinus => products((q - e - f..=q - e).collect()),
        Route::ShrinkConst => {
            let k = plan.predicted.k_min as u64;
            BTreeSet::from([zero, Ratio::new(1, k * k)])
        }
        Route::ExtendConst => {
            if plan.target != Target::Real {
                return Err(MubError::RouteUnsupported(
                    plan.route,
                    "magnitudes are predicted for real seeds only".into(),
                ));
            }
            let k = plan.predicted.k_min as u64;
            BTreeSet::from([zero, Ratio::new(1, k * k), Ratio::new(4, k * k)])
        }
        Route::SquareMub => BTreeSet::from([Ratio::new(1, q * q)]),
    })
}

fn route_matches(route: Route, construction: &Construction) -> bool {
    matches!(
        (route, construction),
        (Route::TrimPlus, Construction::TrimPlus { .. })
            | (Route::TrimMinus, Construction::TrimMinus { .. })
            | (Route::ShrinkConst, Construction::ShrinkConst { .. })
            | (Route::ExtendConst, Construction::ExtendUnion { .. })
            | (Route::SquareMub, Construction::Affine { .. })
    )
}

fn check_provenance(dsg: &Design, bs: &BasisSet, plan: &FactorizationPlan) -> Result<(), MubError> {
    let bad = |m: String| Err(MubError::MismatchedProvenance(m));
    if bs.d != dsg.d() || plan.d != dsg.d() {
        return bad(format!(
            "dimensions differ: design {}, bases {}, plan {}",
            dsg.d(),
            bs.d,
            plan.d
        ));
    }
    if !route_matches(plan.route, &dsg.provenance().construction) {
        return bad(format!(
            "route {} does not match a {} design",
            plan.route,
            dsg.provenance().construction.name()
        ));
    }
    let own = bs.design_bases();
    if own.len() != dsg.num_classes() {
        return bad(format!(
            "{} bases for {} classes",
            own.len(),
            dsg.num_classes()
        ));
    }
    for (l, (basis, class)) in own.iter().zip(dsg.classes()).enumerate() {
        let mut have: Vec<&[usize]> = basis.blocks.iter().map(|b| b.points.as_slice()).collect();
        let mut want: Vec<&[usize]> = class.blocks().iter().map(|b| b.points()).collect();
        have.sort_unstable();
        want.sort_unstable();
        if have != want {
            return bad(format!("basis {l} does not follow the blocks of class {l}"));
        }
    }
    Ok(())
}

/// Spectrum of the design bases plus every claim check against the plan.
pub fn check_claims(
    dsg: &Design,
    bs: &BasisSet,
    plan: &FactorizationPlan,
) -> Result<SpectrumReport, MubError> {
    check_claims_with(dsg, bs, plan, &Tolerances::default())
}

pub fn check_claims_with(
    dsg: &Design,
    bs: &BasisSet,
    plan: &FactorizationPlan,
    tol: &Tolerances,
) -> Result<SpectrumReport, MubError> {
    check_provenance(dsg, bs, plan)?;
    let own = bs.design_bases();
    let mut rep = spectrum_of(bs.d, own)?;
    let pred = &plan.predicted;
    let d = dsg.d() as u64;
    let one = Ratio::from_integer(1u64);
    let mut notes = plan.notes.clone();

    let beta_within = rep.beta_realized <= pred.beta + tol.beta;
    let beta_attains = match rep.beta_realized_sq {
        Some(b) => b == pred.beta_exact.squared(),
        None => (rep.beta_realized - pred.beta).abs() <= tol.beta,
    };

    let expected = match predicted_delta(plan) {
        Ok(set) => Some(set),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let delta_within = match (&expected, &rep.delta_exact_sq) {
        (Some(exp), Some(got)) => got.iter().all(|r| exp.contains(r)),
        (Some(exp), None) => rep.delta.iter().all(|&x| {
            exp.iter()
                .any(|&r| (ratio_sqrt(r) - x).abs() <= CLUSTER_TOL)
        }),
        (None, _) => false,
    };
    if let (Some(exp), Some(got)) = (&expected, &rep.delta_exact_sq) {
        let absent: Vec<String> = exp
            .iter()
            .filter(|r| !got.contains(r))
            .map(|r| format!("{:.6}", ratio_sqrt(*r) * (d as f64).sqrt()))
            .collect();
        if !absent.is_empty() {
            notes.push(format!(
                "predicted magnitudes not realized (scaled by sqrt(d)): {}",
                absent.join(", ")
            ));
        }
    }

    let formula_exact = own.iter().zip(&rep.eps_exact).all(|(b, eps)| {
        let sq: u64 = b.blocks.iter().map(|x| (x.order() * x.order()) as u64).sum();
        *eps == one - Ratio::new(sq, d * d)
    });

    let donor = match &dsg.provenance().construction {
        Construction::TrimPlus { donor_class, .. } => Some(*donor_class),
        _ => None,
    };
    let mut bounds_ok = true;
    for (l, (b, eps)) in own.iter().zip(&rep.eps_exact).enumerate() {
        let kmin = b.blocks.iter().map(BlockBasis::order).min().unwrap_or(0) as u64;
        let kmax = b.blocks.iter().map(BlockBasis::order).max().unwrap_or(0) as u64;
        let general = one - Ratio::new(kmax, d) <= *eps && *eps <= one - Ratio::new(kmin, d);
        let in_route = pred.eps_lo <= *eps && *eps <= pred.eps_hi;
        if Some(l) == donor {
            if !in_route {
                notes.push(format!(
                    "donor class {l} keeps blocks of size {}; its sparsity {} lies outside the \
                     route range [{}, {}] and is checked against its own block sizes only",
                    plan.q.q(),
                    eps,
                    pred.eps_lo,
                    pred.eps_hi
                ));
            }
            bounds_ok &= general;
        } else {
            bounds_ok &= general && in_route;
        }
    }
    if matches!(plan.route, Route::ShrinkConst | Route::ExtendConst) {
        let (k, s) = (plan.k as u64, plan.s as u64);
        let all = |v: Ratio<u64>| rep.eps_exact.iter().all(|e| *e == v);
        let which = match (all(one - Ratio::new(1, k)), all(one - Ratio::new(1, s))) {
            (true, _) => format!("1 - 1/k (k = {k})"),
            (_, true) => format!("1 - 1/s (s = {s})"),
            _ => "neither 1 - 1/k nor 1 - 1/s".to_string(),
        };
        notes.push(format!("constant-block sparsity equals {which}"));
    }

    let mu = if dsg.num_classes() >= 2 {
        intersection_number(dsg).ok()
    } else {
        None
    };
    let mu_ok = mu == Some(pred.mu);

    let target_sq = Ratio::new(1, d);
    let is_mub = match &rep.delta_exact_sq {
        Some(got) => got.len() == 1 && got[0] == target_sq,
        None => {
            let t = 1.0 / (d as f64).sqrt();
            rep.delta.iter().all(|x| (x - t).abs() <= tol.mub)
        }
    };
    let unitary = bs.unitarity_deviation() <= tol.unitary && bs.real_cores_exact();
    let passed = beta_within
        && delta_within
        && formula_exact
        && bounds_ok
        && mu_ok
        && unitary
        && (plan.route != Route::SquareMub || is_mub);

    if bs.identity_appended() {
        let all = spectrum_of(bs.d, &bs.bases)?;
        rep.beta_with_identity = Some(all.beta_realized);
    }
    rep.mu = mu;
    rep.route = Some(plan.route);
    rep.predicted = Some(pred.clone());
    if let Some(exp) = &expected {
        rep.delta_expected = Some(exp.iter().map(|&r| ratio_sqrt(r)).collect());
        rep.delta_expected_sq = Some(exp.iter().copied().collect());
    }
    rep.flags = Some(ClaimFlags {
        beta_within_prediction: beta_within,
        beta_attains_prediction: beta_attains,
        delta_within_prediction: delta_within,
        sparsity_formula_exact: formula_exact,
        sparsity_within_bounds: bounds_ok,
        mu_matches_route: mu_ok,
        is_mub,
        unitary,
        passed,
    });
    rep.notes = notes;
    Ok(rep)
}

/// CSV header matching [`csv_row`].
pub const CSV_HEADER: &str =
    "d,k,s,route,target,q,e,f,classes,mub_lower_bound,beta_predicted,beta_realized,eps_min,eps_max,mu,is_mub,passed,millis";

pub fn csv_row(plan: &FactorizationPlan, rep: &SpectrumReport, mub_bound: usize, millis: u128) -> String {
    let eps_min = rep.eps_per_basis.iter().copied().fold(f64::INFINITY, f64::min);
    let eps_max = rep.eps_per_basis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!(
        "{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
        plan.d,
        plan.k,
        plan.s,
        plan.route,
        plan.target,
        plan.q.q(),
        plan.e,
        plan.f,
        rep.bases,
        mub_bound,
        plan.predicted.beta,
        rep.beta_realized,
        eps_min,
        eps_max,
        rep.mu.map_or(String::new(), |m| m.to_string()),
        rep.flags.as_ref().is_some_and(|f| f.is_mub),
        rep.passed(),
        millis
    )
}
