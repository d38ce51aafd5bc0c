//! Number-theoretic planning: pick a factor pair `d = k * s`, find a prime
//! power `q` with `d = (q - e)(q +- f)`, choose a construction route and
//! predict the resulting basis quality before anything is built.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::designs::{mols_prime_power, LatinSquares};
use crate::gfield::{is_prime, PrimePower};
use crate::unitaries::HadamardSource;

/// Prime-gap exponent for intervals `[s - s^theta, s]`. Documentation only;
/// the search below is exhaustive.
pub const PRIME_GAP_EXPONENT: f64 = 0.525;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("{0} is not composite")]
    NotComposite(usize),
    #[error("factors k={k}, s={s} do not give a valid factor pair of d={d}")]
    BadFactors { d: usize, k: usize, s: usize },
    #[error("gap |s-k| = {} is not below sqrt(d) for d={d} (k={k}, s={s})", s - k)]
    GapTooLarge { d: usize, k: usize, s: usize },
    #[error("no real construction for d={d}: {reason}")]
    NoRealHadamard { d: usize, reason: String },
    #[error("no mutually orthogonal Latin squares of side {0}; supply them with a MOLS file")]
    MissingMols(usize),
    #[error("MOLS file: {0}")]
    MolsFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Complex,
    Real,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Complex => "complex",
            Target::Real => "real",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Route {
    TrimPlus,
    TrimMinus,
    ShrinkConst,
    ExtendConst,
    SquareMub,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::TrimPlus => "TRIM_PLUS",
            Route::TrimMinus => "TRIM_MINUS",
            Route::ShrinkConst => "SHRINK_CONST",
            Route::ExtendConst => "EXTEND_CONST",
            Route::SquareMub => "SQUARE_MUB",
        })
    }
}

/// Net parameters for the constant-block routes: the MOLS side, the offset
/// (`e` removed donor blocks for shrink, `f` for extend) and the number of
/// squares used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstLayout {
    pub side: usize,
    pub offset: usize,
    pub squares: usize,
}

/// `beta = mu * sqrt(d) / k_min`, kept as integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactBeta {
    pub mu_sq: u64,
    pub d: u64,
    pub k_min_sq: u64,
}

impl ExactBeta {
    pub fn squared(&self) -> Ratio<u64> {
        Ratio::new(self.mu_sq * self.d, self.k_min_sq)
    }

    pub fn value(&self) -> f64 {
        (self.mu_sq as f64 * self.d as f64).sqrt() / (self.k_min_sq as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedQuality {
    pub beta_exact: ExactBeta,
    pub beta: f64,
    pub classes: usize,
    pub eps_lo: Ratio<u64>,
    pub eps_hi: Ratio<u64>,
    pub delta_set_bound: usize,
    pub mu: usize,
    pub k_min: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationPlan {
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub delta: Ratio<u64>,
    pub q: PrimePower,
    pub e: usize,
    pub f: usize,
    pub sign: Sign,
    pub route: Route,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<ConstLayout>,
    pub predicted: PredictedQuality,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl FactorizationPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// `(q - e)(q +- f)`.
    pub fn product(&self) -> usize {
        let q = self.q.q() as usize;
        match self.sign {
            Sign::Plus => (q - self.e) * (q + self.f),
            Sign::Minus => (q - self.e) * (q - self.f),
        }
    }
}

/// Mutually orthogonal Latin squares by side. Prime-power sides are
/// synthesized; other sides come from files.
#[derive(Debug, Clone, Default)]
pub struct MolsLibrary {
    supplied: BTreeMap<usize, LatinSquares>,
}

impl MolsLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, mols: LatinSquares) {
        self.supplied.insert(mols.side(), mols);
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), PlanError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlanError::MolsFile(format!("{}: {e}", path.display())))?;
        let mols = LatinSquares::from_json(&text).map_err(|e| PlanError::MolsFile(e.to_string()))?;
        self.insert(mols);
        Ok(())
    }

    /// N(side): `side - 1` for prime powers, else the supplied count.
    pub fn count(&self, side: usize) -> usize {
        if PrimePower::detect(side as u64).is_some() {
            side - 1
        } else {
            self.supplied.get(&side).map_or(0, LatinSquares::count)
        }
    }

    pub fn get(&self, side: usize) -> Result<LatinSquares, PlanError> {
        if PrimePower::detect(side as u64).is_some() {
            return Ok(mols_prime_power(side as u64).expect("prime power side"));
        }
        match self.supplied.get(&side) {
            Some(m) if m.count() > 0 => Ok(m.clone()),
            _ => Err(PlanError::MissingMols(side)),
        }
    }
}

/// External inputs the planner and builder may consult.
#[derive(Default)]
pub struct Resources {
    pub hadamard: HadamardSource,
    pub mols: MolsLibrary,
}

/// Least prime power in `[lo, hi]`.
pub fn prime_power_in(lo: u64, hi: u64) -> Option<PrimePower> {
    (lo.max(2)..=hi).find_map(PrimePower::detect)
}

fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Nontrivial factor pairs `k <= s`, closest pair first.
pub fn factor_pairs(d: usize) -> Vec<(usize, usize)> {
    (2..=isqrt(d))
        .rev()
        .filter(|k| d.is_multiple_of(*k))
        .map(|k| (k, d / k))
        .collect()
}

/// Plans a construction for `d`. With `k` and `s` omitted the closest
/// factor pair is used; for a real target the closest pair that admits a
/// real route.
pub fn choose_plan(
    d: usize,
    k: Option<usize>,
    s: Option<usize>,
    target: Target,
    res: &Resources,
) -> Result<FactorizationPlan, PlanError> {
    if d < 4 || is_prime(d as u64) {
        return Err(PlanError::NotComposite(d));
    }
    let pairs = match (k, s) {
        (Some(k), Some(s)) => vec![(k, s)],
        (Some(x), None) | (None, Some(x)) => {
            if x == 0 || !d.is_multiple_of(x) {
                return Err(PlanError::BadFactors { d, k: x, s: 0 });
            }
            vec![(x.min(d / x), x.max(d / x))]
        }
        (None, None) => factor_pairs(d),
    };
    let mut first_err = None;
    for (k, s) in pairs {
        if k < 2 || k > s || k * s != d {
            return Err(PlanError::BadFactors { d, k, s });
        }
        match plan_for_pair(d, k, s, target, res) {
            Ok(plan) => return Ok(plan),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or(PlanError::NotComposite(d)))
}

fn plan_for_pair(
    d: usize,
    k: usize,
    s: usize,
    target: Target,
    res: &Resources,
) -> Result<FactorizationPlan, PlanError> {
    if (s - k) * (s - k) >= d {
        return Err(PlanError::GapTooLarge { d, k, s });
    }
    let lo = (k + s).div_ceil(2) as u64;
    // every q in the interval gives the same beta; prefer more classes
    let plus = (lo..=s as u64)
        .filter_map(PrimePower::detect)
        .max_by_key(|pp| {
            let q = pp.q() as usize;
            let classes = if q == s { q } else { q + 1 };
            (classes, std::cmp::Reverse(q))
        });
    let (q, e, f, sign) = match plus {
        Some(pp) => {
            let q = pp.q() as usize;
            let sign = if q == s && q != k { Sign::Minus } else { Sign::Plus };
            (pp, q - k, s - q, sign)
        }
        None => {
            let pp = (s as u64..)
                .find_map(PrimePower::detect)
                .expect("prime powers are unbounded");
            let q = pp.q() as usize;
            (pp, q - k, q - s, Sign::Minus)
        }
    };
    let mut route = match (e, f, sign) {
        (0, 0, _) => Route::SquareMub,
        (_, _, Sign::Plus) => Route::TrimPlus,
        (_, _, Sign::Minus) => Route::TrimMinus,
    };
    let mut constant = None;
    if target == Target::Real {
        let (r, c) = real_route(d, k, s, route, res)?;
        route = r;
        constant = c;
    }
    let mut plan = FactorizationPlan {
        d,
        k,
        s,
        delta: Ratio::new((s - k) as u64, 2),
        q,
        e,
        f,
        sign,
        route,
        target,
        constant,
        predicted: placeholder_quality(),
        notes: Vec::new(),
    };
    plan.predicted = predicted_parameters(&plan);
    if route == Route::TrimMinus && f == 0 {
        plan.notes.push(format!(
            "d = {k} x {s} with q = {s}: the construction yields {s} classes; \
             a count of {} needs the computational basis appended, which is \
             excluded from claim checks",
            s + 1
        ));
    }
    Ok(plan)
}

fn real_route(
    d: usize,
    k: usize,
    s: usize,
    complex_route: Route,
    res: &Resources,
) -> Result<(Route, Option<ConstLayout>), PlanError> {
    let h = &res.hadamard;
    if complex_route == Route::SquareMub {
        return if h.has(k) {
            Ok((Route::SquareMub, None))
        } else {
            Err(PlanError::NoRealHadamard {
                d,
                reason: format!("no real Hadamard matrix of order {k}"),
            })
        };
    }
    if k == s {
        return Err(PlanError::NoRealHadamard {
            d,
            reason: format!("{k} is not a prime power and no constant-block route applies to k = s"),
        });
    }
    let mut missing = None;
    if h.has(k) {
        let n = res.mols.count(s);
        if n > 0 {
            return Ok((
                Route::ShrinkConst,
                Some(ConstLayout {
                    side: s,
                    offset: s - k,
                    squares: n,
                }),
            ));
        }
        missing = Some(s);
    }
    if h.has(s) && s - k <= k {
        let n = res.mols.count(k);
        if n > 0 {
            return Ok((
                Route::ExtendConst,
                Some(ConstLayout {
                    side: k,
                    offset: s - k,
                    squares: n,
                }),
            ));
        }
        missing.get_or_insert(k);
    }
    match missing {
        Some(side) => Err(PlanError::MissingMols(side)),
        None => Err(PlanError::NoRealHadamard {
            d,
            reason: format!("no real Hadamard matrix of order {k} or {s}"),
        }),
    }
}

fn placeholder_quality() -> PredictedQuality {
    PredictedQuality {
        beta_exact: ExactBeta {
            mu_sq: 1,
            d: 1,
            k_min_sq: 1,
        },
        beta: 1.0,
        classes: 0,
        eps_lo: Ratio::from_integer(0),
        eps_hi: Ratio::from_integer(0),
        delta_set_bound: 0,
        mu: 1,
        k_min: 1,
    }
}

/// Route-dependent predictions for beta, class count, sparsity bounds and
/// the size of the magnitude set.
pub fn predicted_parameters(plan: &FactorizationPlan) -> PredictedQuality {
    let d = plan.d as u64;
    let q = plan.q.q();
    let (e, f) = (plan.e as u64, plan.f as u64);
    let one = Ratio::from_integer(1u64);
    let (mu, k_min, classes, eps_lo, eps_hi, bound) = match plan.route {
        Route::TrimPlus => (
            1,
            q - e,
            q as usize + 1,
            one - Ratio::new(q - e + f, d),
            one - Ratio::new(1, q),
            ((f + 3) * (f + 2) / 2 + 1) as usize,
        ),
        Route::TrimMinus => (
            1,
            q - e - f,
            q as usize,
            one - Ratio::new(q - e, d),
            one - Ratio::new(1, q),
            ((f + 1) * (f + 2) / 2 + 1) as usize,
        ),
        Route::ShrinkConst | Route::ExtendConst => {
            let c = plan.constant.expect("constant-block routes carry a layout");
            let side = c.side as u64;
            let eps = one - Ratio::new(1, side);
            if plan.route == Route::ShrinkConst {
                (1, side - c.offset as u64, c.squares + 1, eps, eps, 2)
            } else {
                (2, side + c.offset as u64, c.squares + 1, eps, eps, 3)
            }
        }
        Route::SquareMub => {
            let eps = one - Ratio::new(1, q);
            (1, q, q as usize + 1, eps, eps, 1)
        }
    };
    let beta_exact = ExactBeta {
        mu_sq: mu * mu,
        d,
        k_min_sq: k_min * k_min,
    };
    PredictedQuality {
        beta: beta_exact.value(),
        beta_exact,
        classes,
        eps_lo,
        eps_hi,
        delta_set_bound: bound,
        mu: mu as usize,
        k_min: k_min as usize,
    }
}

/// Number of mutually unbiased bases guaranteed by the prime-power
/// construction: least prime-power factor of `d` plus one.
pub fn mub_lower_bound(d: usize) -> usize {
    let mut n = d as u64;
    let mut least = u64::MAX;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut pk = 1;
            while n.is_multiple_of(p) {
                n /= p;
                pk *= p;
            }
            least = least.min(pk);
        }
        p += 1;
    }
    if n > 1 {
        least = least.min(n);
    }
    least as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(d: usize, k: usize, s: usize) -> FactorizationPlan {
        choose_plan(d, Some(k), Some(s), Target::Complex, &Resources::default()).unwrap()
    }

    fn shape(p: &FactorizationPlan) -> (u64, usize, usize, Sign, Route) {
        (p.q.q(), p.e, p.f, p.sign, p.route)
    }

    #[test]
    fn worked_examples() {
        assert_eq!(shape(&plan(32, 4, 8)), (7, 3, 1, Sign::Plus, Route::TrimPlus));
        assert_eq!(shape(&plan(30, 5, 6)), (7, 2, 1, Sign::Minus, Route::TrimMinus));
        assert_eq!(shape(&plan(60, 6, 10)), (9, 3, 1, Sign::Plus, Route::TrimPlus));
        assert_eq!(plan(49, 7, 7).route, Route::SquareMub);
        assert_eq!(shape(&plan(36, 6, 6)), (7, 1, 1, Sign::Minus, Route::TrimMinus));
        let p42 = plan(42, 6, 7);
        assert_eq!(shape(&p42), (7, 1, 0, Sign::Minus, Route::TrimMinus));
        assert_eq!(p42.notes.len(), 1);
        assert_eq!(shape(&plan(35, 5, 7)), (7, 2, 0, Sign::Minus, Route::TrimMinus));
    }

    #[test]
    fn predictions() {
        let p = plan(32, 4, 8).predicted;
        assert_eq!(p.beta_exact.squared(), Ratio::from_integer(2));
        assert_eq!(p.classes, 8);
        assert_eq!(p.delta_set_bound, 7);
        assert_eq!(p.eps_lo, Ratio::new(27, 32));
        assert_eq!(p.eps_hi, Ratio::new(6, 7));

        let p = plan(30, 5, 6).predicted;
        assert_eq!(p.beta_exact.squared(), Ratio::new(30, 16));
        assert_eq!(p.classes, 7);
        assert_eq!(p.delta_set_bound, 4);

        assert!((plan(60, 6, 10).predicted.beta - (10f64 / 6.0).sqrt()).abs() < 1e-12);
        assert_eq!(plan(60, 6, 10).predicted.classes, 10);
        assert!((plan(42, 6, 7).predicted.beta - 42f64.sqrt() / 6.0).abs() < 1e-12);
        assert!((plan(35, 5, 7).predicted.beta - 35f64.sqrt() / 5.0).abs() < 1e-12);
        let sq = plan(49, 7, 7).predicted;
        assert_eq!((sq.beta, sq.classes), (1.0, 8));
    }

    #[test]
    fn real_routes() {
        let res = Resources::default();
        let p = choose_plan(40, Some(5), Some(8), Target::Real, &res).unwrap();
        assert_eq!(p.route, Route::ExtendConst);
        assert_eq!(p.constant, Some(ConstLayout { side: 5, offset: 3, squares: 4 }));
        assert!((p.predicted.beta - 2.0 * (5f64 / 8.0).sqrt()).abs() < 1e-12);
        assert_eq!(p.predicted.eps_lo, Ratio::new(4, 5));
        assert_eq!(p.predicted.classes, 5);

        let p = choose_plan(28, Some(4), Some(7), Target::Real, &res).unwrap();
        assert_eq!(p.route, Route::ShrinkConst);
        assert_eq!(p.predicted.classes, 7);
        assert_eq!(p.predicted.beta_exact.squared(), Ratio::new(7, 4));

        let p = choose_plan(84, Some(7), Some(12), Target::Real, &res).unwrap();
        assert_eq!(p.route, Route::ExtendConst);
        assert_eq!(p.predicted.beta_exact.squared(), Ratio::new(4 * 7, 12));

        let p = choose_plan(16, None, None, Target::Real, &res).unwrap();
        assert_eq!(p.route, Route::SquareMub);

        let err = choose_plan(9, None, None, Target::Real, &res).unwrap_err();
        assert!(matches!(err, PlanError::NoRealHadamard { .. }));
        // 4 x 6: H4 exists but 6 has no MOLS, and H6 does not exist
        let err = choose_plan(24, Some(4), Some(6), Target::Real, &res).unwrap_err();
        assert_eq!(err, PlanError::MissingMols(6));
    }

    #[test]
    fn errors() {
        let res = Resources::default();
        assert_eq!(
            choose_plan(13, None, None, Target::Complex, &res).unwrap_err(),
            PlanError::NotComposite(13)
        );
        assert!(matches!(
            choose_plan(20, Some(2), Some(10), Target::Complex, &res),
            Err(PlanError::GapTooLarge { .. })
        ));
        assert!(matches!(
            choose_plan(20, Some(3), Some(7), Target::Complex, &res),
            Err(PlanError::BadFactors { .. })
        ));
        assert_eq!(plan(12, 3, 4).k, 3);
        let only_k = choose_plan(30, Some(6), None, Target::Complex, &res).unwrap();
        assert_eq!((only_k.k, only_k.s), (5, 6));
    }

    #[test]
    fn prime_power_search() {
        assert_eq!(prime_power_in(8, 10).map(|p| p.q()), Some(8));
        assert_eq!(prime_power_in(24, 26).map(|p| p.q()), Some(25));
        assert_eq!(prime_power_in(33, 35), None);
    }

    #[test]
    fn mub_counts() {
        assert_eq!(mub_lower_bound(60), 4);
        assert_eq!(mub_lower_bound(42), 3);
        assert_eq!(mub_lower_bound(49), 50);
        assert_eq!(mub_lower_bound(12), 4);
    }

    #[test]
    fn plan_json_round_trip() {
        let p = plan(32, 4, 8);
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["q"]["p"], 7);
        assert_eq!(v["route"], "TRIM_PLUS");
        assert_eq!(v["sign"], "plus");
        assert_eq!(FactorizationPlan::from_json(&p.to_json()).unwrap(), p);
    }
}
