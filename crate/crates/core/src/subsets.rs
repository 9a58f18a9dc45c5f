//! Exhaustive scans of μ(X) = Σ_{x,y∈X} Re D(x;y) over every nonempty subset
//! of a small atom set, visiting subsets in reflected Gray-code order so each
//! step adds or removes a single atom in O(n).
//!
//! A scan may be split into contiguous Gray-index ranges across threads; the
//! reductions below (minimum, first violator, top-k) are order independent, so
//! the result does not depend on the partitioning.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Largest atom count accepted by the subset scans.
pub const MAX_SCAN_ATOMS: usize = 24;

#[inline]
pub fn gray(i: u64) -> u64 {
    i ^ (i >> 1)
}

/// μ(mask) by the direct double sum.
pub fn subset_measure(re: &[f64], n: usize, mask: u64) -> f64 {
    let mut total = 0.0;
    for x in (0..n).filter(|&x| mask >> x & 1 == 1) {
        for y in (0..n).filter(|&y| mask >> y & 1 == 1) {
            total += re[x * n + y];
        }
    }
    total
}

/// Incremental μ tracker: `row_sums[y] = Σ_{x∈S} re[x][y]`.
struct Walker<'a> {
    re: &'a [f64],
    n: usize,
    mask: u64,
    mu: f64,
    row_sums: Vec<f64>,
}

impl<'a> Walker<'a> {
    fn start(re: &'a [f64], n: usize, mask: u64) -> Self {
        let mut row_sums = vec![0.0; n];
        for x in (0..n).filter(|&x| mask >> x & 1 == 1) {
            for (y, s) in row_sums.iter_mut().enumerate() {
                *s += re[x * n + y];
            }
        }
        let mu = subset_measure(re, n, mask);
        Self {
            re,
            n,
            mask,
            mu,
            row_sums,
        }
    }

    #[inline]
    fn flip(&mut self, b: usize) {
        let n = self.n;
        let row = &self.re[b * n..(b + 1) * n];
        if self.mask >> b & 1 == 0 {
            // Hermitian symmetry: Re D(b;y) + Re D(y;b) = 2 Re D(b;y).
            self.mu += 2.0 * self.row_sums[b] + row[b];
            for (s, r) in self.row_sums.iter_mut().zip(row) {
                *s += r;
            }
        } else {
            for (s, r) in self.row_sums.iter_mut().zip(row) {
                *s -= r;
            }
            self.mu -= 2.0 * self.row_sums[b] + row[b];
        }
        self.mask ^= 1 << b;
    }
}

/// Summary of a full scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanSummary {
    pub subsets: u64,
    pub min_mu: f64,
    /// Mask attaining the minimum (ties: smallest mask).
    pub min_mask: u64,
    /// Smallest mask whose μ is below `-violation_tol`.
    pub first_violator: Option<(u64, f64)>,
    pub violations: u64,
    /// Count of subsets with |μ| ≤ zero_tol.
    pub zero_subsets: u64,
    /// Smallest |μ| seen and the smallest mask attaining it.
    pub min_abs: (u64, f64),
}

impl ScanSummary {
    fn empty() -> Self {
        Self {
            subsets: 0,
            min_mu: f64::INFINITY,
            min_mask: 0,
            first_violator: None,
            violations: 0,
            zero_subsets: 0,
            min_abs: (0, f64::INFINITY),
        }
    }

    fn observe(&mut self, mask: u64, mu: f64, violation_tol: f64, zero_tol: f64) {
        self.subsets += 1;
        if mu < self.min_mu || (mu == self.min_mu && mask < self.min_mask) {
            self.min_mu = mu;
            self.min_mask = mask;
        }
        if mu < -violation_tol {
            self.violations += 1;
            if self.first_violator.map_or(true, |(m, _)| mask < m) {
                self.first_violator = Some((mask, mu));
            }
        }
        if mu.abs() <= zero_tol {
            self.zero_subsets += 1;
        }
        let a = mu.abs();
        if a < self.min_abs.1 || (a == self.min_abs.1 && mask < self.min_abs.0) {
            self.min_abs = (mask, a);
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.subsets += other.subsets;
        if other.min_mu < self.min_mu
            || (other.min_mu == self.min_mu && other.min_mask < self.min_mask)
        {
            self.min_mu = other.min_mu;
            self.min_mask = other.min_mask;
        }
        self.first_violator = match (self.first_violator, other.first_violator) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
            (a, b) => a.or(b),
        };
        self.violations += other.violations;
        self.zero_subsets += other.zero_subsets;
        if other.min_abs.1 < self.min_abs.1
            || (other.min_abs.1 == self.min_abs.1 && other.min_abs.0 < self.min_abs.0)
        {
            self.min_abs = other.min_abs;
        }
        self
    }
}

/// Thread count for scans: `QMT_THREADS` if set, else the available parallelism.
pub fn default_threads() -> usize {
    std::env::var("QMT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn ranges(total: u64, threads: usize) -> Vec<(u64, u64)> {
    // Small scans are not worth a thread.
    let threads = if total < (1 << 18) {
        1
    } else {
        threads.max(1) as u64
    };
    let chunk = total.div_ceil(threads);
    (0..threads)
        .map(|t| (1 + t * chunk, (1 + (t + 1) * chunk).min(total + 1)))
        .filter(|(s, e)| s < e)
        .collect()
}

fn walk_range(re: &[f64], n: usize, start: u64, end: u64, mut visit: impl FnMut(u64, f64)) {
    let mut w = Walker::start(re, n, gray(start));
    visit(w.mask, w.mu);
    for idx in start + 1..end {
        w.flip(idx.trailing_zeros() as usize);
        visit(w.mask, w.mu);
    }
}

/// Visit every nonempty subset of an `n`-atom space and summarise μ.
///
/// `re` is the row-major real part of a Hermitian `n×n` matrix.
pub fn scan(
    re: &[f64],
    n: usize,
    violation_tol: f64,
    zero_tol: f64,
    threads: usize,
) -> ScanSummary {
    assert!(
        n <= MAX_SCAN_ATOMS,
        "subset scan limited to {MAX_SCAN_ATOMS} atoms"
    );
    assert_eq!(re.len(), n * n);
    let total = (1u64 << n) - 1;
    if total == 0 {
        return ScanSummary::empty();
    }
    let parts = ranges(total, threads);
    if parts.len() == 1 {
        let mut s = ScanSummary::empty();
        walk_range(re, n, 1, total + 1, |m, mu| {
            s.observe(m, mu, violation_tol, zero_tol)
        });
        return s;
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = parts
            .iter()
            .map(|&(start, end)| {
                scope.spawn(move || {
                    let mut s = ScanSummary::empty();
                    walk_range(re, n, start, end, |m, mu| {
                        s.observe(m, mu, violation_tol, zero_tol)
                    });
                    s
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scan worker panicked"))
            .fold(ScanSummary::empty(), ScanSummary::merge)
    })
}

#[derive(PartialEq)]
struct Ranked(f64, u64);

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    // Max-heap on "worse" = larger μ, then larger mask, so the heap top is the
    // entry to evict.
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// The `k` subsets with the most negative μ below `-threshold`, most violated
/// first (ties: smaller mask first).
pub fn most_violated(
    re: &[f64],
    n: usize,
    threshold: f64,
    k: usize,
    threads: usize,
) -> Vec<(u64, f64)> {
    assert!(
        n <= MAX_SCAN_ATOMS,
        "subset scan limited to {MAX_SCAN_ATOMS} atoms"
    );
    let total = (1u64 << n) - 1;
    if total == 0 || k == 0 {
        return Vec::new();
    }
    let collect = |start: u64, end: u64| {
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
        walk_range(re, n, start, end, |m, mu| {
            if mu < -threshold {
                let cand = Ranked(mu, m);
                if heap.len() < k {
                    heap.push(cand);
                } else if heap.peek().is_some_and(|top| cand < *top) {
                    heap.pop();
                    heap.push(cand);
                }
            }
        });
        heap.into_vec()
    };
    let parts = ranges(total, threads);
    let mut all: Vec<Ranked> = if parts.len() == 1 {
        collect(1, total + 1)
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = parts
                .iter()
                .map(|&(s, e)| scope.spawn(move || collect(s, e)))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("scan worker panicked"))
                .collect()
        })
    };
    all.sort();
    all.truncate(k);
    all.into_iter().map(|Ranked(mu, m)| (m, mu)).collect()
}

/// μ for all 2^n masks (index = mask), μ(∅) = 0.
pub fn measure_table(re: &[f64], n: usize) -> Vec<f64> {
    assert!(n <= MAX_SCAN_ATOMS);
    let size = 1usize << n;
    let mut mu = vec![0.0; size];
    // cross[m] for the current top bit: Σ_{y∈m} re[b][y].
    for b in 0..n {
        let lo = 1usize << b;
        let row = &re[b * n..(b + 1) * n];
        for m in 0..lo {
            let cross: f64 = (0..b).filter(|&y| m >> y & 1 == 1).map(|y| row[y]).sum();
            mu[lo + m] = mu[m] + 2.0 * cross + row[b];
        }
    }
    mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut re = vec![0.0; n * n];
        for x in 0..n {
            for y in x..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                re[x * n + y] = v;
                re[y * n + x] = v;
            }
        }
        re
    }

    #[test]
    fn gray_code_visits_every_subset_once() {
        let n = 10;
        let mut seen = vec![false; 1 << n];
        walk_range(&vec![0.0; n * n], n, 1, 1 << n, |m, _| {
            assert!(!seen[m as usize]);
            seen[m as usize] = true;
        });
        assert!(seen[1..].iter().all(|&s| s));
    }

    #[test]
    fn gray_walk_matches_naive_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=8 {
            let re = random_symmetric(n, &mut rng);
            walk_range(&re, n, 1, 1 << n, |m, mu| {
                assert!(
                    (mu - subset_measure(&re, n, m)).abs() < 1e-12,
                    "n={n} mask={m:b}"
                );
            });
            let table = measure_table(&re, n);
            for m in 1..(1u64 << n) {
                assert!((table[m as usize] - subset_measure(&re, n, m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partitioned_scan_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 19;
        let re = random_symmetric(n, &mut rng);
        let one = scan(&re, n, 1e-10, 1e-10, 1);
        let many = scan(&re, n, 1e-10, 1e-10, 7);
        assert_eq!(
            one.first_violator.map(|v| v.0),
            many.first_violator.map(|v| v.0)
        );
        assert_eq!(one.min_mask, many.min_mask);
        assert_eq!(one.violations, many.violations);
        assert_eq!(one.subsets, (1 << n) - 1);
        let a = most_violated(&re, n, 1e-9, 5, 1);
        let b = most_violated(&re, n, 1e-9, 5, 4);
        assert_eq!(
            a.iter().map(|p| p.0).collect::<Vec<_>>(),
            b.iter().map(|p| p.0).collect::<Vec<_>>()
        );
    }

    #[test]
    fn most_violated_is_sorted_and_correct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let re = random_symmetric(n, &mut rng);
        let top = most_violated(&re, n, 0.0, 10, 1);
        let mut naive: Vec<(u64, f64)> = (1..(1u64 << n))
            .map(|m| (m, subset_measure(&re, n, m)))
            .filter(|p| p.1 < 0.0)
            .collect();
        naive.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        naive.truncate(10);
        assert_eq!(top.len(), naive.len());
        for (a, b) in top.iter().zip(&naive) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
    }
}
