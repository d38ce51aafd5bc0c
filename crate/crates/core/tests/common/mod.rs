//! Dense brute-force oracles and design generators shared by the
//! integration tests. Nothing here uses the library's block shortcuts.

#![allow(dead_code)]

use amub::designs::{affine_resolvable_design, mols_prime_power, Design};
use amub::gfield::PrimePower;
use amub::trims::{extend_union_with, shrink_const_with, trim_minus_with, trim_plus_with, Choice};
use num_complex::Complex64;

pub fn cluster(mut v: Vec<f64>, tol: f64) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().is_none_or(|&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

/// All `|<a_i|b_j>|` over every pair of distinct matrices, computed from the
/// dense columns. Rows with a zero in column `i` are skipped, which does not
/// change any sum.
pub fn dense_spectrum(mats: &[Vec<Complex64>], d: usize) -> Vec<f64> {
    let supports: Vec<Vec<Vec<usize>>> = mats
        .iter()
        .map(|m| {
            (0..d)
                .map(|c| (0..d).filter(|&r| m[r * d + c] != Complex64::new(0.0, 0.0)).collect())
                .collect()
        })
        .collect();
    let mut all = Vec::new();
    for l in 0..mats.len() {
        for m in l + 1..mats.len() {
            let (a, b) = (&mats[l], &mats[m]);
            for i in 0..d {
                for j in 0..d {
                    let z: Complex64 = supports[l][i]
                        .iter()
                        .map(|&r| a[r * d + i].conj() * b[r * d + j])
                        .sum();
                    all.push(z.norm());
                }
            }
            all = cluster(all, 1e-9);
        }
    }
    cluster(all, 1e-9)
}

/// `max |M* M - I|` over the dense matrix; column pairs with disjoint
/// supports contribute exact zeros off the diagonal.
pub fn dense_unitarity(m: &[Complex64], d: usize) -> f64 {
    let supports: Vec<Vec<usize>> = (0..d)
        .map(|c| (0..d).filter(|&r| m[r * d + c] != Complex64::new(0.0, 0.0)).collect())
        .collect();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            let mut z: Complex64 = supports[i].iter().map(|&r| m[r * d + i].conj() * m[r * d + j]).sum();
            if i == j {
                z -= 1.0;
            }
            worst = worst.max(z.norm());
        }
    }
    worst
}

pub fn dense_zeros(m: &[Complex64]) -> usize {
    m.iter().filter(|z| **z == Complex64::new(0.0, 0.0)).count()
}

/// (min, max) block intersection across distinct classes by direct
/// membership tests.
pub fn brute_mu(dsg: &Design) -> (usize, usize) {
    let mut lo = usize::MAX;
    let mut hi = 0;
    for (l, a) in dsg.classes().iter().enumerate() {
        for b in &dsg.classes()[l + 1..] {
            for x in a.blocks() {
                for y in b.blocks() {
                    let n = x.points().iter().filter(|p| y.points().contains(p)).count();
                    lo = lo.min(n);
                    hi = hi.max(n);
                }
            }
        }
    }
    (lo, hi)
}

/// Every point appears in exactly one block of every class.
pub fn is_partition(dsg: &Design) -> bool {
    dsg.classes().iter().all(|c| {
        let mut seen = vec![0u32; dsg.d()];
        for b in c.blocks() {
            for &p in b.points() {
                if p >= dsg.d() {
                    return false;
                }
                seen[p] += 1;
            }
        }
        seen.iter().all(|&n| n == 1)
    })
}

pub struct Generated {
    pub label: String,
    pub design: Design,
    /// claimed intersection number
    pub mu: usize,
}

fn prime_powers(max: u64) -> Vec<u64> {
    (2..=max).filter(|&q| PrimePower::detect(q).is_some()).collect()
}

/// Designs from every construction with `d <= max_d`, plus seeded variants
/// for the listed seeds.
pub fn generated_designs(max_d: usize, seeds: &[u64]) -> Vec<Generated> {
    let max = max_d as u64;
    let mut out = Vec::new();
    let mut choices = vec![Choice::Lowest];
    choices.extend(seeds.iter().map(|&s| Choice::Seeded(s)));
    let mut push = |label: String, design: Design, mu: usize| {
        out.push(Generated { label, design, mu });
    };
    // larger q only add degenerate trims with blocks of one or two points
    let q_max = (1..).find(|q: &u64| q * q > 2 * max).unwrap() - 1;
    for q in prime_powers(q_max) {
        if q * q <= max {
            push(format!("affine q={q}"), affine_resolvable_design(q).unwrap(), 1);
        }
        for e in 1..q {
            for f in 0..=e {
                let d = (q - e) * (q - f);
                if d <= max && d >= 2 && q > e + f {
                    for &c in &choices {
                        let dsg = trim_minus_with(q, e, f, c).unwrap();
                        push(format!("trim_minus q={q} e={e} f={f} {c:?}"), dsg, 1);
                    }
                }
                let d = (q - e) * (q + f);
                if f > 0 && d <= max {
                    for &c in &choices {
                        let dsg = trim_plus_with(q, e, f, c).unwrap();
                        push(format!("trim_plus q={q} e={e} f={f} {c:?}"), dsg, 1);
                    }
                }
            }
        }
        let s = q as usize;
        if s * 2 > max_d {
            continue;
        }
        let mols = mols_prime_power(q).unwrap();
        for e in 1..s {
            if (s - e) * s <= max_d && s - e >= 1 {
                for &c in &choices {
                    let dsg = shrink_const_with(s, e, &mols, c).unwrap();
                    push(format!("shrink_const s={s} e={e} {c:?}"), dsg, 1);
                }
            }
        }
        for f in 1..=s {
            if s * (s + f) <= max_d {
                for &c in &choices {
                    let dsg = extend_union_with(s, f, &mols, c).unwrap();
                    push(format!("extend_union s={s} f={f} {c:?}"), dsg, 2);
                }
            }
        }
    }
    out
}
