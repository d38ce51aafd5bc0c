//! Seed unitaries that fill the vectors of one block: Fourier matrices for
//! every order and real Hadamard matrices where one of the implemented
//! families reaches the order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gfield::{Field, PrimePower};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitaryError {
    #[error("Hadamard matrix of order {order} is malformed: {reason}")]
    Malformed { order: usize, reason: String },
    #[error("Hadamard library: {0}")]
    Library(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    Fourier,
    RealSylvester,
    RealPaley1,
    RealPaley2,
    RealKronecker,
    RealStored,
    /// Recovered from a serialized basis.
    Loaded,
}

/// A `k x k` unitary used for the vectors of one block. Row `j` holds the
/// entries of the block's `j`-th vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedUnitary {
    order: usize,
    kind: SeedKind,
    entries: Vec<Complex64>,
    /// The +-1 matrix for real kinds; entries are `core / sqrt(order)`.
    core: Option<Vec<i8>>,
    /// Every entry has squared modulus exactly `1 / order`.
    flat: bool,
}

impl SeedUnitary {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> SeedKind {
        self.kind
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.order + col]
    }

    pub fn core(&self) -> Option<&[i8]> {
        self.core.as_deref()
    }

    pub fn is_real(&self) -> bool {
        self.core.is_some()
    }

    /// True when every entry is known to have modulus `1/sqrt(order)`.
    pub fn is_flat(&self) -> bool {
        self.flat
    }

    /// Wraps an arbitrary complex matrix (row-major). Flatness is detected
    /// numerically at 1e-12.
    pub fn from_entries(order: usize, entries: Vec<Complex64>) -> Self {
        assert_eq!(entries.len(), order * order, "entries must be order^2 long");
        let target = 1.0 / order as f64;
        let flat = entries
            .iter()
            .all(|z| (z.norm_sqr() - target).abs() <= 1e-12);
        SeedUnitary {
            order,
            kind: SeedKind::Loaded,
            entries,
            core: None,
            flat,
        }
    }

    /// Wraps a +-1 matrix after checking `H H^T = k I` exactly.
    pub fn from_core(order: usize, core: Vec<i8>, kind: SeedKind) -> Result<Self, UnitaryError> {
        check_hadamard(order, &core)?;
        let scale = 1.0 / (order as f64).sqrt();
        let entries = core
            .iter()
            .map(|&v| Complex64::new(f64::from(v) * scale, 0.0))
            .collect();
        Ok(SeedUnitary {
            order,
            kind,
            entries,
            core: Some(core),
            flat: true,
        })
    }

    /// Exact Gram check of the integer core; `None` for complex seeds.
    pub fn verify_exact(&self) -> Option<bool> {
        self.core
            .as_ref()
            .map(|c| check_hadamard(self.order, c).is_ok())
    }
}

/// Largest entry of `|U U* - I|`. Rows and columns of a square matrix are
/// orthonormal together, so this also bounds `U* U - I`.
pub fn gram_deviation(order: usize, entries: &[Complex64]) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..order {
        for b in a..order {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..order {
                acc += entries[a * order + t] * entries[b * order + t].conj();
            }
            if a == b {
                acc -= 1.0;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

/// True iff `max |U* U - I| <= tol`.
pub fn verify_unitary(u: &SeedUnitary, tol: f64) -> bool {
    gram_deviation(u.order, &u.entries) <= tol
}

/// The Fourier matrix `exp(2 pi i j t / k) / sqrt(k)`.
pub fn fourier_unitary(k: usize) -> SeedUnitary {
    assert!(k >= 1, "order must be positive");
    let scale = 1.0 / (k as f64).sqrt();
    let mut entries = Vec::with_capacity(k * k);
    for j in 0..k {
        for t in 0..k {
            // reduce the exponent first so large orders keep full precision
            let angle = 2.0 * PI * ((j * t) % k) as f64 / k as f64;
            entries.push(Complex64::from_polar(scale, angle));
        }
    }
    SeedUnitary {
        order: k,
        kind: SeedKind::Fourier,
        entries,
        core: None,
        flat: true,
    }
}

fn check_hadamard(order: usize, core: &[i8]) -> Result<(), UnitaryError> {
    let bad = |reason: String| Err(UnitaryError::Malformed { order, reason });
    if core.len() != order * order {
        return bad(format!("expected {} entries, got {}", order * order, core.len()));
    }
    if core.iter().any(|&v| v != 1 && v != -1) {
        return bad("entries must be +1 or -1".into());
    }
    for a in 0..order {
        for b in a..order {
            let dot: i64 = (0..order)
                .map(|t| i64::from(core[a * order + t]) * i64::from(core[b * order + t]))
                .sum();
            let want = if a == b { order as i64 } else { 0 };
            if dot != want {
                return bad(format!("rows {a} and {b} have inner product {dot}"));
            }
        }
    }
    Ok(())
}

fn sylvester(order: usize) -> Vec<i8> {
    let mut h = vec![1i8];
    let mut n = 1;
    while n < order {
        let mut next = vec![0i8; 4 * n * n];
        for i in 0..n {
            for j in 0..n {
                let v = h[i * n + j];
                next[i * 2 * n + j] = v;
                next[i * 2 * n + j + n] = v;
                next[(i + n) * 2 * n + j] = v;
                next[(i + n) * 2 * n + j + n] = -v;
            }
        }
        h = next;
        n *= 2;
    }
    h
}

/// Jacobsthal matrix `Q[a][b] = chi(a - b)` over GF(q).
fn jacobsthal(pp: PrimePower) -> Vec<i8> {
    let field = Field::from_prime_power(pp);
    let chi = field.quadratic_character();
    let q = field.q() as usize;
    let mut m = vec![0i8; q * q];
    for a in field.elements() {
        for b in field.elements() {
            let diff = field.sub(a, b).expect("elements in range");
            m[a as usize * q + b as usize] = chi[diff as usize];
        }
    }
    m
}

/// Paley I, `q = 3 mod 4`: `H = I + [[0, 1^T], [-1, Q]]`, order `q + 1`.
fn paley1(pp: PrimePower) -> Vec<i8> {
    let q = pp.q() as usize;
    let jac = jacobsthal(pp);
    let n = q + 1;
    let mut h = vec![0i8; n * n];
    for i in 0..n {
        for j in 0..n {
            let s = match (i, j) {
                (0, 0) => 0,
                (0, _) => 1,
                (_, 0) => -1,
                _ => jac[(i - 1) * q + (j - 1)],
            };
            h[i * n + j] = s + i8::from(i == j);
        }
    }
    h
}

/// Paley II, `q = 1 mod 4`: with the symmetric conference matrix
/// `C = [[0, 1^T], [1, Q]]`, zeros become `[[1, -1], [-1, -1]]` and `+-1`
/// become `+-[[1, 1], [1, -1]]`. Order `2(q + 1)`.
fn paley2(pp: PrimePower) -> Vec<i8> {
    let q = pp.q() as usize;
    let jac = jacobsthal(pp);
    let m = q + 1;
    let n = 2 * m;
    let mut h = vec![0i8; n * n];
    for i in 0..m {
        for j in 0..m {
            let c = match (i, j) {
                (0, 0) => 0,
                (0, _) | (_, 0) => 1,
                _ => jac[(i - 1) * q + (j - 1)],
            };
            let tile: [[i8; 2]; 2] = if c == 0 {
                [[1, -1], [-1, -1]]
            } else {
                [[c, c], [c, -c]]
            };
            for (di, row) in tile.iter().enumerate() {
                for (dj, &v) in row.iter().enumerate() {
                    h[(2 * i + di) * n + 2 * j + dj] = v;
                }
            }
        }
    }
    h
}

fn kronecker(a: &[i8], na: usize, b: &[i8], nb: usize) -> Vec<i8> {
    let n = na * nb;
    let mut out = vec![0i8; n * n];
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[(i * nb + k) * n + j * nb + l] = a[i * na + j] * b[k * nb + l];
                }
            }
        }
    }
    out
}

/// Memoized real Hadamard construction plus optional externally supplied
/// matrices.
#[derive(Default)]
pub struct HadamardSource {
    cache: Mutex<HashMap<usize, Option<Arc<SeedUnitary>>>>,
    library: HashMap<usize, Arc<SeedUnitary>>,
}

#[derive(Deserialize)]
struct StoredHadamard {
    order: usize,
    rows: Vec<Vec<i8>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StoredLibrary {
    One(StoredHadamard),
    Many(Vec<StoredHadamard>),
}

impl HadamardSource {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds every matrix in a library document: either one
    /// `{"order": k, "rows": [[+-1, ...], ...]}` object or a list of them.
    pub fn add_library_json(&mut self, text: &str) -> Result<(), UnitaryError> {
        let parsed: StoredLibrary =
            serde_json::from_str(text).map_err(|e| UnitaryError::Library(e.to_string()))?;
        let items = match parsed {
            StoredLibrary::One(h) => vec![h],
            StoredLibrary::Many(v) => v,
        };
        for item in items {
            if item.rows.len() != item.order || item.rows.iter().any(|r| r.len() != item.order) {
                return Err(UnitaryError::Malformed {
                    order: item.order,
                    reason: "rows do not form a square matrix of the stated order".into(),
                });
            }
            let core = item.rows.into_iter().flatten().collect();
            let seed = SeedUnitary::from_core(item.order, core, SeedKind::RealStored)?;
            self.library.insert(item.order, Arc::new(seed));
        }
        self.cache.lock().expect("cache lock").clear();
        Ok(())
    }

    pub fn add_library_file(&mut self, path: &Path) -> Result<(), UnitaryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UnitaryError::Library(format!("{}: {e}", path.display())))?;
        self.add_library_json(&text)
    }

    pub fn library_orders(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.library.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// A real Hadamard seed of order `k`, if one is constructible or stored.
    pub fn get(&self, k: usize) -> Option<Arc<SeedUnitary>> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&k) {
            return hit.clone();
        }
        let built = self.build(k);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(k, built.clone());
        built
    }

    pub fn has(&self, k: usize) -> bool {
        self.get(k).is_some()
    }

    fn build(&self, k: usize) -> Option<Arc<SeedUnitary>> {
        if k == 0 {
            return None;
        }
        if let Some((core, kind)) = self.native(k) {
            let seed = SeedUnitary::from_core(k, core, kind)
                .expect("native Hadamard constructions pass the Gram check");
            return Some(Arc::new(seed));
        }
        self.library.get(&k).cloned()
    }

    fn native(&self, k: usize) -> Option<(Vec<i8>, SeedKind)> {
        if k.is_power_of_two() {
            return Some((sylvester(k), SeedKind::RealSylvester));
        }
        if !k.is_multiple_of(4) {
            return None;
        }
        if let Some(pp) = PrimePower::detect(k as u64 - 1) {
            if pp.q() % 4 == 3 {
                return Some((paley1(pp), SeedKind::RealPaley1));
            }
        }
        if let Some(pp) = PrimePower::detect((k / 2) as u64 - 1) {
            if pp.q() % 4 == 1 {
                return Some((paley2(pp), SeedKind::RealPaley2));
            }
        }
        let mut a = 2;
        while a * a <= k {
            if k.is_multiple_of(a) {
                if let (Some(x), Some(y)) = (self.get(a), self.get(k / a)) {
                    let (xa, yb) = (x.core()?, y.core()?);
                    return Some((kronecker(xa, a, yb, k / a), SeedKind::RealKronecker));
                }
            }
            a += 1;
        }
        None
    }
}

fn global_source() -> &'static HadamardSource {
    static SOURCE: OnceLock<HadamardSource> = OnceLock::new();
    SOURCE.get_or_init(HadamardSource::new)
}

/// A real Hadamard seed from the built-in families (Sylvester, Paley I,
/// Paley II, Kronecker products of these), memoized per order.
pub fn real_hadamard(k: usize) -> Option<Arc<SeedUnitary>> {
    global_source().get(k)
}

/// Loads a Hadamard library into a fresh source.
pub fn load_library(path: &Path) -> Result<HadamardSource, UnitaryError> {
    let mut src = HadamardSource::new();
    src.add_library_file(path)?;
    Ok(src)
}
