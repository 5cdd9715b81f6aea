//! 0-1 matrices, all-ones pattern containment/avoidance, exact
//! Zarankiewicz-type extremal values `ex(m, n, R_{s,t})`, and the
//! Kővári–Sós–Turán closed-form upper bound.
//!
//! Two exact backends with overlapping domains validate each other: a plain
//! exhaustive scan over all `2^(m*n)` matrices (guarded at 36 cells) and a
//! branch-and-bound over row bitmasks for patterns with `s = 2` or `t = 2`
//! (guarded at 12x12).

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Cell guard for [`exact_zarankiewicz_exhaustive`].
pub const EXHAUSTIVE_CELL_GUARD: usize = 36;

/// Side guard for [`exact_zarankiewicz_branch_bound`].
pub const BRANCH_BOUND_SIDE_GUARD: usize = 12;

/// Slack applied when comparing exact integer values against the
/// floating-point KST bound, so exact-integer bound values never produce
/// false failures.
pub const KST_SLACK: f64 = 1e-9;

/// A 0-1 matrix stored as row-major bitsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> BinaryMatrix {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        let words_per_row = cols.div_ceil(64);
        BinaryMatrix { rows, cols, words_per_row, bits: vec![0; rows * words_per_row] }
    }

    /// Builds from one `u64` bitmask per row; bit `c` of a mask is column `c`.
    /// Only usable for `cols <= 64`.
    pub fn from_row_masks(masks: &[u64], cols: usize) -> BinaryMatrix {
        assert!(cols >= 1 && cols <= 64);
        let mut m = BinaryMatrix::zeros(masks.len(), cols);
        for (r, &mask) in masks.iter().enumerate() {
            debug_assert_eq!(mask >> cols, 0, "mask wider than cols");
            m.bits[r] = mask;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.words_per_row + c / 64] >> (c % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        let word = &mut self.bits[r * self.words_per_row + c / 64];
        if value {
            *word |= 1 << (c % 64);
        } else {
            *word &= !(1 << (c % 64));
        }
    }

    pub fn ones(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    fn row_words(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    pub fn transpose(&self) -> BinaryMatrix {
        let mut out = BinaryMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    out.set(c, r, true);
                }
            }
        }
        out
    }

    /// Column `c` as a bitset over rows.
    fn col_bitset(&self, c: usize) -> Vec<u64> {
        let mut out = vec![0u64; self.rows.div_ceil(64)];
        for r in 0..self.rows {
            if self.get(r, c) {
                out[r / 64] |= 1 << (r % 64);
            }
        }
        out
    }

    /// True iff some `s` rows and `t` columns meet in all ones. For all-ones
    /// patterns this is exactly containment of `R_{s,t}` under the
    /// ones-to-zeroes clause.
    pub fn contains_all_ones_pattern(&self, s: usize, t: usize) -> bool {
        assert!(s >= 1 && t >= 1, "pattern dimensions must be >= 1");
        if s > self.rows || t > self.cols {
            return false;
        }
        // recurse over the cheaper side
        if binom_approx(self.rows, s) <= binom_approx(self.cols, t) {
            let acc = vec![u64::MAX; self.words_per_row];
            self.search_rows(0, s, t, &acc)
        } else {
            self.transpose().contains_all_ones_pattern(t, s)
        }
    }

    fn search_rows(&self, start: usize, remaining: usize, t: usize, acc: &[u64]) -> bool {
        if remaining == 0 {
            return true;
        }
        for r in start..=(self.rows - remaining) {
            let next: Vec<u64> =
                acc.iter().zip(self.row_words(r)).map(|(a, b)| a & b).collect();
            let ones: usize = next.iter().map(|w| w.count_ones() as usize).sum();
            if ones >= t && self.search_rows(r + 1, remaining - 1, t, &next) {
                return true;
            }
        }
        false
    }

    /// Largest `q` such that `R_{q,2}` is contained, i.e. the maximum over
    /// column pairs of the number of shared one-rows; 0 when no two columns
    /// share a row (or there are fewer than two columns).
    pub fn max_common_rows(&self) -> usize {
        if self.cols < 2 {
            return 0;
        }
        let cols: Vec<Vec<u64>> = (0..self.cols).map(|c| self.col_bitset(c)).collect();
        let mut best = 0;
        for i in 0..self.cols {
            for j in (i + 1)..self.cols {
                let common: usize = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .map(|(a, b)| (a & b).count_ones() as usize)
                    .sum();
                best = best.max(common);
            }
        }
        best
    }

    /// Stable presentation: rows sorted descending as bit-strings, then
    /// columns sorted descending (reading each column over the row-sorted
    /// matrix).
    pub fn canonical_form(&self) -> BinaryMatrix {
        let mut rows: Vec<Vec<bool>> =
            (0..self.rows).map(|r| (0..self.cols).map(|c| self.get(r, c)).collect()).collect();
        rows.sort_by(|a, b| b.cmp(a));
        let mut col_order: Vec<usize> = (0..self.cols).collect();
        col_order.sort_by(|&a, &b| {
            let ca: Vec<bool> = rows.iter().map(|row| row[a]).collect();
            let cb: Vec<bool> = rows.iter().map(|row| row[b]).collect();
            cb.cmp(&ca)
        });
        let mut out = BinaryMatrix::zeros(self.rows, self.cols);
        for (r, row) in rows.iter().enumerate() {
            for (c_new, &c_old) in col_order.iter().enumerate() {
                if row[c_old] {
                    out.set(r, c_new, true);
                }
            }
        }
        out
    }

    /// Parses the text format: first line `m n`, then `m` lines of `n`
    /// characters from `{0,1}`.
    pub fn parse_text(text: &str) -> Result<BinaryMatrix> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Invalid("empty matrix text".into()))?;
        let mut it = header.split_whitespace();
        let rows: usize = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| Error::Invalid("matrix header must be \"m n\"".into()))?;
        let cols: usize = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| Error::Invalid("matrix header must be \"m n\"".into()))?;
        if rows < 1 || cols < 1 {
            return Err(Error::Invalid("matrix dimensions must be >= 1".into()));
        }
        let mut m = BinaryMatrix::zeros(rows, cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Invalid(format!("missing matrix row {}", r + 1)))?;
            let line = line.trim();
            if line.chars().count() != cols {
                return Err(Error::Invalid(format!(
                    "row {} has {} characters, expected {cols}",
                    r + 1,
                    line.chars().count()
                )));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(r, c, true),
                    _ => {
                        return Err(Error::Invalid(format!(
                            "row {} contains '{ch}', expected 0 or 1",
                            r + 1
                        )))
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(if self.get(r, c) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    fn row_strings(&self) -> Vec<String> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| if self.get(r, c) { '1' } else { '0' }).collect())
            .collect()
    }
}

impl Serialize for BinaryMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("BinaryMatrix", 3)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("cols", &self.cols)?;
        st.serialize_field("lines", &self.row_strings())?;
        st.end()
    }
}

fn binom_approx(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut out = 1.0f64;
    for i in 0..k {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Containment check on raw row masks (`cols <= 64`), used by the hot
/// exhaustive loop.
fn masks_contain_pattern(rows: &[u64], s: usize, t: usize) -> bool {
    fn rec(rows: &[u64], start: usize, remaining: usize, t: usize, acc: u64) -> bool {
        if remaining == 0 {
            return true;
        }
        for r in start..=(rows.len() - remaining) {
            let next = acc & rows[r];
            if next.count_ones() as usize >= t && rec(rows, r + 1, remaining - 1, t, next) {
                return true;
            }
        }
        false
    }
    if s > rows.len() {
        return false;
    }
    rec(rows, 0, s, t, u64::MAX)
}

/// Exact extremal value together with the bound and an extremal witness.
#[derive(Clone, Debug, Serialize)]
pub struct ExtremalResult {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub t: usize,
    pub exact_value: u64,
    /// KST upper bound; absent when `s < 2` or `t < 2` (the bound is only
    /// stated for `s, t >= 2`).
    pub kst_upper: Option<f64>,
    pub witness: BinaryMatrix,
}

/// `(s-1)^{1/t} * (n-t+1) * m^{1-1/t} + (t-1) * m` in double precision.
/// An upper bound on `ex(m, n, R_{s,t})` for `m, n, s, t >= 2`.
pub fn kst_bound(m: usize, n: usize, s: usize, t: usize) -> Result<f64> {
    if m < 2 || n < 2 || s < 2 || t < 2 {
        return Err(Error::Invalid(format!(
            "kst_bound requires m, n, s, t >= 2, got ({m}, {n}, {s}, {t})"
        )));
    }
    let (mf, nf, sf, tf) = (m as f64, n as f64, s as f64, t as f64);
    Ok((sf - 1.0).powf(1.0 / tf) * (nf - tf + 1.0) * mf.powf(1.0 - 1.0 / tf) + (tf - 1.0) * mf)
}

fn kst_if_defined(m: usize, n: usize, s: usize, t: usize) -> Option<f64> {
    kst_bound(m, n, s, t).ok()
}

fn check_dims(m: usize, n: usize, s: usize, t: usize) -> Result<()> {
    if m < 1 || n < 1 || s < 1 || t < 1 {
        return Err(Error::Invalid(format!(
            "all of m, n, s, t must be >= 1, got ({m}, {n}, {s}, {t})"
        )));
    }
    Ok(())
}

/// Exact `ex(m, n, R_{s,t})`, dispatching to the closed forms for
/// degenerate patterns, the branch-and-bound backend for `s = 2` or `t = 2`,
/// or the exhaustive backend for up to 36 cells.
pub fn exact_zarankiewicz(m: usize, n: usize, s: usize, t: usize) -> Result<ExtremalResult> {
    check_dims(m, n, s, t)?;
    if m > 64 || n > 64 {
        return Err(Error::Guard(format!(
            "matrix sides are limited to 64, got {m}x{n}"
        )));
    }
    if s > m || t > n {
        return Ok(pattern_cannot_fit(m, n, s, t));
    }
    if s == 1 || t == 1 {
        return Ok(thin_pattern_closed_form(m, n, s, t));
    }
    if (s == 2 || t == 2) && m <= BRANCH_BOUND_SIDE_GUARD && n <= BRANCH_BOUND_SIDE_GUARD {
        return exact_zarankiewicz_branch_bound(m, n, s, t);
    }
    if m * n <= EXHAUSTIVE_CELL_GUARD {
        return exact_zarankiewicz_exhaustive(m, n, s, t);
    }
    Err(Error::Guard(format!(
        "exact computation for ({m}, {n}, {s}, {t}) is outside both backend domains \
         (exhaustive: m*n <= {EXHAUSTIVE_CELL_GUARD}; branch-and-bound: s = 2 or t = 2 \
         with sides <= {BRANCH_BOUND_SIDE_GUARD})"
    )))
}

fn pattern_cannot_fit(m: usize, n: usize, s: usize, t: usize) -> ExtremalResult {
    let masks = vec![(1u64 << n) - 1; m];
    ExtremalResult {
        m,
        n,
        s,
        t,
        exact_value: (m * n) as u64,
        kst_upper: kst_if_defined(m, n, s, t),
        witness: BinaryMatrix::from_row_masks(&masks, n),
    }
}

/// For `R_{1,t}` every row carries at most `t-1` ones; for `R_{s,1}` every
/// column carries at most `s-1`.
fn thin_pattern_closed_form(m: usize, n: usize, s: usize, t: usize) -> ExtremalResult {
    let witness = if s == 1 {
        let mask = (1u64 << (t - 1)) - 1;
        BinaryMatrix::from_row_masks(&vec![mask; m], n)
    } else {
        let full = (1u64 << n) - 1;
        let mut masks = vec![full; s - 1];
        masks.extend(std::iter::repeat(0).take(m - (s - 1)));
        BinaryMatrix::from_row_masks(&masks, n)
    };
    let exact_value = if s == 1 { (m * (t - 1)) as u64 } else { (n * (s - 1)) as u64 };
    ExtremalResult {
        m,
        n,
        s,
        t,
        exact_value,
        kst_upper: None,
        witness: witness.canonical_form(),
    }
}

/// Exhaustive backend: scans all `2^(m*n)` matrices. The witness reported is
/// the canonical form of the smallest-bitmask maximizer, so results are
/// deterministic regardless of chunking.
pub fn exact_zarankiewicz_exhaustive(m: usize, n: usize, s: usize, t: usize) -> Result<ExtremalResult> {
    check_dims(m, n, s, t)?;
    let cells = m * n;
    if cells > EXHAUSTIVE_CELL_GUARD {
        return Err(Error::Guard(format!(
            "m*n = {cells} exceeds exhaustive guard {EXHAUSTIVE_CELL_GUARD}"
        )));
    }
    if s > m || t > n {
        return Ok(pattern_cannot_fit(m, n, s, t));
    }

    let total: u64 = 1u64 << cells;
    #[cfg(feature = "parallel")]
    let best = {
        use rayon::prelude::*;
        let chunks = 1024u64.min(total);
        let chunk_len = total.div_ceil(chunks);
        (0..chunks)
            .into_par_iter()
            .map(|i| {
                let lo = i * chunk_len;
                let hi = total.min(lo + chunk_len);
                scan_masks(lo, hi, m, n, s, t)
            })
            .reduce(|| (0, u64::MAX), merge_scan)
    };
    #[cfg(not(feature = "parallel"))]
    let best = scan_masks(0, total, m, n, s, t);

    let (ones, mask) = best;
    let masks: Vec<u64> = (0..m).map(|r| (mask >> (r * n)) & ((1 << n) - 1)).collect();
    Ok(ExtremalResult {
        m,
        n,
        s,
        t,
        exact_value: ones,
        kst_upper: kst_if_defined(m, n, s, t),
        witness: BinaryMatrix::from_row_masks(&masks, n).canonical_form(),
    })
}

/// Maximum over `[lo, hi)` of ones among avoiding matrices; ties keep the
/// smallest mask. `(0, u64::MAX)` only before any mask is seen (mask 0
/// always avoids, so every full scan yields a real entry).
fn scan_masks(lo: u64, hi: u64, m: usize, n: usize, s: usize, t: usize) -> (u64, u64) {
    let mut best_ones = 0u64;
    let mut best_mask = u64::MAX;
    let col_mask = (1u64 << n) - 1;
    let mut rows = vec![0u64; m];
    for mask in lo..hi {
        let ones = u64::from(mask.count_ones());
        if ones < best_ones || (ones == best_ones && mask >= best_mask) {
            continue;
        }
        for (r, slot) in rows.iter_mut().enumerate() {
            *slot = (mask >> (r * n)) & col_mask;
        }
        if !masks_contain_pattern(&rows, s, t) {
            best_ones = ones;
            best_mask = mask;
        }
    }
    (best_ones, best_mask)
}

#[cfg(feature = "parallel")]
fn merge_scan(a: (u64, u64), b: (u64, u64)) -> (u64, u64) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Branch-and-bound backend for `s = 2` or `t = 2` (the column-pair
/// intersection law makes the state small). Rows are enumerated in
/// nonincreasing bitmask order; the bound combines per-pair capacities with
/// an exact knapsack-style relaxation of the remaining rows.
pub fn exact_zarankiewicz_branch_bound(
    m: usize,
    n: usize,
    s: usize,
    t: usize,
) -> Result<ExtremalResult> {
    check_dims(m, n, s, t)?;
    if s != 2 && t != 2 {
        return Err(Error::Invalid(format!(
            "branch-and-bound backend requires s = 2 or t = 2, got s = {s}, t = {t}"
        )));
    }
    if m > BRANCH_BOUND_SIDE_GUARD || n > BRANCH_BOUND_SIDE_GUARD {
        return Err(Error::Guard(format!(
            "branch-and-bound guard is {BRANCH_BOUND_SIDE_GUARD} per side, got {m}x{n}"
        )));
    }
    if s > m || t > n {
        return Ok(pattern_cannot_fit(m, n, s, t));
    }
    // normalize to t = 2: columns pairwise share at most s-1 one-rows
    if t != 2 {
        let transposed = exact_zarankiewicz_branch_bound(n, m, t, s)?;
        return Ok(ExtremalResult {
            m,
            n,
            s,
            t,
            exact_value: transposed.exact_value,
            kst_upper: kst_if_defined(m, n, s, t),
            witness: transposed.witness.transpose().canonical_form(),
        });
    }

    let cap = s - 1;
    let searcher = PairBoundSearch::new(m, n, cap);
    #[cfg(feature = "parallel")]
    let best = {
        use rayon::prelude::*;
        let first_rows: Vec<u64> = (0..(1u64 << n)).rev().collect();
        first_rows
            .into_par_iter()
            .map(|r0| searcher.explore_from(r0))
            .reduce(Candidate::empty, Candidate::better)
    };
    #[cfg(not(feature = "parallel"))]
    let best = {
        let mut acc = Candidate::empty();
        for r0 in (0..(1u64 << n)).rev() {
            acc = acc.better(searcher.explore_from(r0));
        }
        acc
    };

    Ok(ExtremalResult {
        m,
        n,
        s,
        t,
        exact_value: best.ones,
        kst_upper: kst_if_defined(m, n, s, t),
        witness: BinaryMatrix::from_row_masks(&best.rows, n).canonical_form(),
    })
}

/// Candidate solution ordered by ones, then lexicographically greatest row
/// sequence (which is the first one found by the descending DFS, so the
/// parallel reduction matches the sequential result exactly).
#[derive(Clone, Debug)]
struct Candidate {
    ones: u64,
    rows: Vec<u64>,
}

impl Candidate {
    fn empty() -> Candidate {
        Candidate { ones: 0, rows: Vec::new() }
    }

    fn better(self, other: Candidate) -> Candidate {
        if other.ones > self.ones || (other.ones == self.ones && other.rows > self.rows) {
            other
        } else {
            self
        }
    }
}

struct PairBoundSearch {
    m: usize,
    n: usize,
    cap: usize,
    /// `fill_bound[l][b]`: max total ones over `l` rows whose pair costs
    /// `C(w,2)` sum to at most `b`.
    fill_bound: Vec<Vec<u64>>,
}

impl PairBoundSearch {
    fn new(m: usize, n: usize, cap: usize) -> PairBoundSearch {
        let budget = cap * n * (n - 1) / 2;
        let mut fill_bound = vec![vec![0u64; budget + 1]; m + 1];
        for l in 1..=m {
            for b in 0..=budget {
                let mut best = 0;
                for w in 0..=n {
                    let cost = w * w.saturating_sub(1) / 2;
                    if cost > b {
                        break;
                    }
                    best = best.max(w as u64 + fill_bound[l - 1][b - cost]);
                }
                fill_bound[l][b] = best;
            }
        }
        PairBoundSearch { m, n, cap, fill_bound }
    }

    fn explore_from(&self, first_row: u64) -> Candidate {
        let mut pair_counts = vec![0u8; self.n * self.n];
        let mut rows = Vec::with_capacity(self.m);
        let mut best = Candidate::empty();
        if self.try_add(first_row, &mut pair_counts) {
            rows.push(first_row);
            self.dfs(&mut rows, &mut pair_counts, first_row.count_ones() as u64, &mut best);
            self.remove(first_row, &mut pair_counts);
        }
        best
    }

    fn dfs(&self, rows: &mut Vec<u64>, pair_counts: &mut [u8], ones: u64, best: &mut Candidate) {
        if ones > best.ones {
            *best = Candidate { ones, rows: rows.clone() };
        }
        if rows.len() == self.m {
            return;
        }
        let remaining_rows = self.m - rows.len();
        let budget = self.remaining_budget(pair_counts);
        if ones + self.fill_bound[remaining_rows][budget] <= best.ones {
            return;
        }
        let prev = *rows.last().expect("dfs starts with one row");
        let mut r = prev;
        loop {
            if self.try_add(r, pair_counts) {
                rows.push(r);
                self.dfs(rows, pair_counts, ones + u64::from(r.count_ones()), best);
                rows.pop();
                self.remove(r, pair_counts);
            }
            if r == 0 {
                break;
            }
            r -= 1;
        }
    }

    fn remaining_budget(&self, pair_counts: &[u8]) -> usize {
        let mut budget = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                budget += self.cap - pair_counts[i * self.n + j] as usize;
            }
        }
        budget
    }

    /// Adds a row's column pairs if no pair exceeds the cap; on failure the
    /// state is left untouched.
    fn try_add(&self, row: u64, pair_counts: &mut [u8]) -> bool {
        let cols = bit_positions(row);
        for (a, &i) in cols.iter().enumerate() {
            for &j in &cols[a + 1..] {
                if pair_counts[i * self.n + j] as usize >= self.cap {
                    return false;
                }
            }
        }
        for (a, &i) in cols.iter().enumerate() {
            for &j in &cols[a + 1..] {
                pair_counts[i * self.n + j] += 1;
            }
        }
        true
    }

    fn remove(&self, row: u64, pair_counts: &mut [u8]) {
        let cols = bit_positions(row);
        for (a, &i) in cols.iter().enumerate() {
            for &j in &cols[a + 1..] {
                pair_counts[i * self.n + j] -= 1;
            }
        }
    }
}

fn bit_positions(mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}
