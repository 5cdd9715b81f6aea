//! Per-instance reconstruction of the divisibility-matrix argument on a
//! concrete coloring: color-class profiles with gap/wide-gap/block structure,
//! the per-block divisibility matrices `A^s` (entry `(x, y) = 1` iff `x`
//! divides `a_{(s-1)k+y} - a_j`), and the inequality chain they support.
//!
//! Every audited inequality is an instance of a proved statement, so a
//! failing check signals an implementation bug, never a property of the
//! coloring. All pass/fail decisions use exact integer arithmetic.

use serde::Serialize;

use crate::coloring::Coloring;
use crate::error::{Error, Result};
use crate::matrix::{kst_bound, BinaryMatrix, KST_SLACK};
use crate::numtheory::{divisors_up_to, tau};
use crate::progression::{aps_through_pair, binom2, count_aps_formula, count_aps_through_pair};

/// Largest `t*n` accepted by [`audit_theorem4`].
pub const AUDIT_GUARD: u64 = 10_000;

/// Up to this `t*n` the audit checks every same-color pair and reports
/// per-cell matrix statistics; above it, pairs are sampled by a fixed stride
/// and the per-cell statistics are omitted from the report.
pub const FULL_DETAIL_GUARD: u64 = 300;

/// Pair-sample target per color when striding.
const PAIR_SAMPLE_TARGET: u64 = 2048;

/// Gap, wide-gap, and block structure of one color class.
#[derive(Clone, Debug, Serialize)]
pub struct ColorClassProfile {
    pub color: u32,
    /// Positions `a_1 < ... < a_n` of the color, 1-indexed in `[t*n]`.
    pub positions: Vec<u64>,
    /// `gaps[j-1] = a_{j+1} - a_j`.
    pub gaps: Vec<u64>,
    pub wide_threshold: u64,
    /// 1-based `j` with `a_{j+1} - a_j > wide_threshold`.
    pub wide_gap_indices: Vec<usize>,
    /// 1-based inclusive ranges of position indices; block `s` covers
    /// `(s-1)k+1 ..= min(sk, n)`.
    pub blocks: Vec<(usize, usize)>,
    /// Per block: whether both endpoints of some wide gap fall inside it.
    pub wide_block_flags: Vec<bool>,
}

/// Statistics of one divisibility matrix `A^s` (for anchor index `j`).
#[derive(Clone, Debug, Serialize)]
pub struct MatrixCellStats {
    pub color: u32,
    pub j: usize,
    pub s: usize,
    pub ones: u64,
    pub max_common_rows: usize,
    /// KST bound evaluated with the measured `q` (informational).
    pub kst_upper_q: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditParams {
    pub k: u32,
    pub t: u32,
    pub n: u32,
    pub wide_threshold: u64,
}

/// One audited inequality; informational records carry `pass = true`
/// unconditionally and an `info_` name prefix.
#[derive(Clone, Debug, Serialize)]
pub struct AuditCheck {
    pub name: String,
    pub lhs: i128,
    pub rhs: i128,
    pub pass: bool,
}

/// Full audit report; `pass` holds iff every check passes.
#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub params: AuditParams,
    pub checks: Vec<AuditCheck>,
    pub pass: bool,
    pub profiles: Vec<ColorClassProfile>,
    pub matrix_stats: Vec<MatrixCellStats>,
}

/// Builds the [`ColorClassProfile`] of one color.
pub fn profile_color_class(
    c: &Coloring,
    color: u32,
    k: u32,
    wide_threshold: u64,
) -> Result<ColorClassProfile> {
    if color >= c.t() {
        return Err(Error::Invalid(format!("color {color} out of range 0..{}", c.t())));
    }
    if k < 3 {
        return Err(Error::Invalid(format!("k must be >= 3, got {k}")));
    }
    if wide_threshold < 1 {
        return Err(Error::Invalid("wide threshold must be >= 1".into()));
    }
    let positions: Vec<u64> =
        (1..=c.len()).filter(|&p| c.color_at(p) == color).collect();
    let gaps: Vec<u64> = positions.windows(2).map(|w| w[1] - w[0]).collect();
    let wide_gap_indices: Vec<usize> = gaps
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > wide_threshold)
        .map(|(i, _)| i + 1)
        .collect();
    let n = positions.len();
    let k = k as usize;
    let mut blocks = Vec::new();
    let mut start = 1;
    while start <= n {
        let end = (start + k - 1).min(n);
        blocks.push((start, end));
        start = end + 1;
    }
    let wide_block_flags = blocks
        .iter()
        .map(|&(lo, hi)| wide_gap_indices.iter().any(|&j| j >= lo && j + 1 <= hi))
        .collect();
    Ok(ColorClassProfile {
        color,
        positions,
        gaps,
        wide_threshold,
        wide_gap_indices,
        blocks,
        wide_block_flags,
    })
}

/// Builds `A^s` for anchor index `j`: a `(k-1) x |block s|` matrix whose
/// `(x, y)` entry is 1 iff the position index `r = (s-1)k + y` satisfies
/// `r > j` and `x` divides `a_r - a_j`. Entries with `r <= j` are 0, keeping
/// the matrix total.
pub fn build_divisibility_matrix(
    profile: &ColorClassProfile,
    j: usize,
    s: usize,
    k: u32,
) -> Result<BinaryMatrix> {
    let n = profile.positions.len();
    if j < 1 || j > n {
        return Err(Error::Invalid(format!("anchor index j = {j} out of range 1..={n}")));
    }
    if s < 1 || s > profile.blocks.len() {
        return Err(Error::Invalid(format!(
            "block index s = {s} out of range 1..={}",
            profile.blocks.len()
        )));
    }
    let (lo, hi) = profile.blocks[s - 1];
    let width = hi - lo + 1;
    let mut m = BinaryMatrix::zeros(k as usize - 1, width);
    let anchor = profile.positions[j - 1];
    for (y, r) in (lo..=hi).enumerate() {
        if r <= j {
            continue;
        }
        let diff = profile.positions[r - 1] - anchor;
        for x in 1..u64::from(k) {
            if diff % x == 0 {
                m.set(x as usize - 1, y, true);
            }
        }
    }
    Ok(m)
}

/// Worst-case tracker: keeps the first cell attaining the maximum margin.
struct Worst {
    margin: i128,
    lhs: i128,
    rhs: i128,
    any: bool,
    all_pass: bool,
}

impl Worst {
    fn new() -> Worst {
        Worst { margin: i128::MIN, lhs: 0, rhs: 0, any: false, all_pass: true }
    }

    fn observe(&mut self, lhs: i128, rhs: i128) {
        let margin = lhs - rhs;
        if !self.any || margin > self.margin {
            self.any = true;
            self.margin = margin;
            self.lhs = lhs;
            self.rhs = rhs;
        }
        if lhs > rhs {
            self.all_pass = false;
        }
    }

    fn merge(&mut self, other: &Worst) {
        if other.any && (!self.any || other.margin > self.margin) {
            self.any = other.any;
            self.margin = other.margin;
            self.lhs = other.lhs;
            self.rhs = other.rhs;
        }
        self.all_pass &= other.all_pass;
    }

    fn into_check(self, name: String) -> AuditCheck {
        AuditCheck { name, lhs: self.lhs, rhs: self.rhs, pass: self.all_pass }
    }
}

/// Per-`(color, j)` partial results of the matrix checks.
struct CellScan {
    ones_bound: Worst,
    column_intersection: Worst,
    kst_ones: i128,
    kst_floor: i128,
    kst_margin: f64,
    kst_any: bool,
    stats: Vec<MatrixCellStats>,
}

/// Audits the full inequality chain on one coloring. `wide_threshold` is the
/// paper's `k^8` by default at the CLI layer; any threshold `>= 1` is legal
/// and the pigeonhole stays valid.
pub fn audit_theorem4(c: &Coloring, k: u32, wide_threshold: u64) -> Result<AuditReport> {
    let t = c.t();
    let n = c.n();
    let tn = c.len();
    if tn > AUDIT_GUARD {
        return Err(Error::Guard(format!("t*n = {tn} exceeds audit guard {AUDIT_GUARD}")));
    }
    if k < 3 {
        return Err(Error::Invalid(format!("k must be >= 3, got {k}")));
    }
    if wide_threshold < 1 {
        return Err(Error::Invalid("wide threshold must be >= 1".into()));
    }
    let full_detail = tn <= FULL_DETAIL_GUARD;

    let profiles: Vec<ColorClassProfile> =
        (0..t).map(|color| profile_color_class(c, color, k, wide_threshold)).collect::<Result<_>>()?;

    let mut checks = Vec::new();

    // (1) wide-gap pigeonhole, exact form |wide| * W <= t*n
    for p in &profiles {
        checks.push(AuditCheck {
            name: format!("wide_gap_pigeonhole[color={}]", p.color),
            lhs: p.wide_gap_indices.len() as i128 * i128::from(wide_threshold),
            rhs: i128::from(tn),
            pass: p.wide_gap_indices.len() as i128 * i128::from(wide_threshold)
                <= i128::from(tn),
        });
    }

    // (2) per-pair AP bound against min(C(k,2), k * tau(diff))
    let pair_cap = i128::from(binom2(u64::from(k)));
    for p in &profiles {
        let mut worst = Worst::new();
        let total_pairs = binom2(p.positions.len() as u64);
        let stride = if full_detail {
            1
        } else {
            (total_pairs / PAIR_SAMPLE_TARGET).max(1)
        };
        let mut index = 0u64;
        for j in 0..p.positions.len() {
            for r in (j + 1)..p.positions.len() {
                let take = index % stride == 0;
                index += 1;
                if !take {
                    continue;
                }
                let (a, b) = (p.positions[j], p.positions[r]);
                let cnt = count_aps_through_pair(a, b, k, tn)?;
                let bound = pair_cap.min(i128::from(k) * i128::from(tau(b - a)?));
                worst.observe(i128::from(cnt), bound);
            }
        }
        if !worst.any {
            worst.observe(0, 0);
        }
        checks.push(worst.into_check(format!("pair_ap_bound[color={}]", p.color)));
    }

    // (3)+(4) per-(color, j, s) matrix checks
    let tasks: Vec<(usize, usize)> = profiles
        .iter()
        .enumerate()
        .flat_map(|(ci, p)| (1..=p.positions.len()).map(move |j| (ci, j)))
        .collect();
    let scan_one = |&(ci, j): &(usize, usize)| -> Result<CellScan> {
        scan_color_anchor(&profiles[ci], j, k, tn, full_detail)
    };
    #[cfg(feature = "parallel")]
    let scans: Vec<CellScan> = {
        use rayon::prelude::*;
        tasks.par_iter().map(scan_one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let scans: Vec<CellScan> = tasks.iter().map(scan_one).collect::<Result<_>>()?;

    let mut per_color_ones: Vec<Worst> = (0..t).map(|_| Worst::new()).collect();
    let mut per_color_cols: Vec<Worst> = (0..t).map(|_| Worst::new()).collect();
    let mut per_color_kst: Vec<(bool, f64, i128, i128)> =
        (0..t).map(|_| (false, f64::MIN, 0, 0)).collect();
    let mut matrix_stats = Vec::new();
    for (&(ci, _), scan) in tasks.iter().zip(&scans) {
        per_color_ones[ci].merge(&scan.ones_bound);
        per_color_cols[ci].merge(&scan.column_intersection);
        let slot = &mut per_color_kst[ci];
        if scan.kst_any && (!slot.0 || scan.kst_margin > slot.1) {
            *slot = (true, scan.kst_margin, scan.kst_ones, scan.kst_floor);
        }
        matrix_stats.extend(scan.stats.iter().cloned());
    }
    for (ci, mut worst) in per_color_ones.into_iter().enumerate() {
        if !worst.any {
            worst.observe(0, 0);
        }
        checks.push(worst.into_check(format!("block_ones_bound[color={ci}]")));
    }
    for (ci, mut worst) in per_color_cols.into_iter().enumerate() {
        if !worst.any {
            worst.observe(0, 0);
        }
        checks.push(worst.into_check(format!("column_intersection_bound[color={ci}]")));
    }
    for (ci, (any, _, ones, floor)) in per_color_kst.into_iter().enumerate() {
        if any {
            checks.push(AuditCheck {
                name: format!("info_kst_ones_bound[color={ci}]"),
                lhs: ones,
                rhs: floor,
                pass: true,
            });
        }
    }

    // (5) global non-rainbow bound and (6) rainbow accounting
    let census = c.rainbow_census(k)?;
    let formula = count_aps_formula(tn, k)?;
    let global_cap = i128::from(t) * pair_cap * i128::from(binom2(u64::from(n)));
    checks.push(AuditCheck {
        name: "global_non_rainbow_bound".into(),
        lhs: i128::from(census.non_rainbow),
        rhs: global_cap,
        pass: i128::from(census.non_rainbow) <= global_cap,
    });
    let rainbow_rhs = i128::from(formula) - i128::from(census.non_rainbow);
    checks.push(AuditCheck {
        name: "rainbow_count_accounting".into(),
        lhs: i128::from(census.rainbow),
        rhs: rainbow_rhs,
        pass: i128::from(census.rainbow) == rainbow_rhs,
    });
    let rainbow_floor = i128::from(formula) - global_cap;
    checks.push(AuditCheck {
        name: "rainbow_count_lower_bound".into(),
        lhs: rainbow_floor,
        rhs: i128::from(census.rainbow),
        pass: rainbow_floor <= i128::from(census.rainbow),
    });

    // (7) informational anchors of the proof's assumptions
    let k_cubed = i128::from(k).pow(3);
    checks.push(AuditCheck {
        name: "info_t_below_k_cubed".into(),
        lhs: i128::from(t),
        rhs: k_cubed,
        pass: true,
    });
    checks.push(AuditCheck {
        name: "info_n_le_k".into(),
        lhs: i128::from(n),
        rhs: i128::from(k),
        pass: true,
    });

    let pass = checks.iter().all(|c| c.pass);
    Ok(AuditReport {
        params: AuditParams { k, t, n, wide_threshold },
        checks,
        pass,
        profiles,
        matrix_stats,
    })
}

/// Matrix checks for one `(color, j)`: every block `s` is scanned.
fn scan_color_anchor(
    profile: &ColorClassProfile,
    j: usize,
    k: u32,
    tn: u64,
    full_detail: bool,
) -> Result<CellScan> {
    let mut scan = CellScan {
        ones_bound: Worst::new(),
        column_intersection: Worst::new(),
        kst_ones: 0,
        kst_floor: 0,
        kst_margin: f64::MIN,
        kst_any: false,
        stats: Vec::new(),
    };
    let anchor = profile.positions[j - 1];
    for s in 1..=profile.blocks.len() {
        let (lo, hi) = profile.blocks[s - 1];
        let matrix = build_divisibility_matrix(profile, j, s, k)?;
        let ones = matrix.ones();
        let q = matrix.max_common_rows();

        // (3): distinct APs through the anchor and any block member past j
        // are at most k times the ones of A^s
        let mut aps = Vec::new();
        for r in lo..=hi {
            if r <= j {
                continue;
            }
            for ap in aps_through_pair(anchor, profile.positions[r - 1], k, tn)? {
                aps.push((ap.first, ap.diff));
            }
        }
        aps.sort_unstable();
        aps.dedup();
        scan.ones_bound.observe(aps.len() as i128, i128::from(k) * i128::from(ones));

        // (4): two active columns share at most as many one-rows as the
        // difference of their positions has divisors below k
        let active: Vec<usize> = (lo..=hi).filter(|&r| r > j).collect();
        for (yi, &r) in active.iter().enumerate() {
            for &r2 in &active[yi + 1..] {
                let (pr, pr2) = (profile.positions[r - 1], profile.positions[r2 - 1]);
                let mut common = 0i128;
                for x in 1..u64::from(k) {
                    if (pr - anchor) % x == 0 && (pr2 - anchor) % x == 0 {
                        common += 1;
                    }
                }
                let cap = divisors_up_to(pr2 - pr, u64::from(k) - 1)?.len() as i128;
                scan.column_intersection.observe(common, cap);
            }
        }

        // informational KST evaluation with the measured q
        let cols = hi - lo + 1;
        let kst = if k >= 3 && cols >= 2 && q >= 1 {
            kst_bound(k as usize - 1, cols, q + 1, 2).ok()
        } else {
            None
        };
        if let Some(bound) = kst {
            let margin = ones as f64 - bound;
            if !scan.kst_any || margin > scan.kst_margin {
                scan.kst_any = true;
                scan.kst_margin = margin;
                scan.kst_ones = i128::from(ones);
                scan.kst_floor = (bound + KST_SLACK).floor() as i128;
            }
        }
        if full_detail {
            scan.stats.push(MatrixCellStats {
                color: profile.color,
                j,
                s,
                ones,
                max_common_rows: q,
                kst_upper_q: kst,
            });
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn coloring(raw: &[u32], t: u32, n: u32) -> Coloring {
        Coloring::validate_equinumerous(raw.to_vec(), t, n).unwrap()
    }

    #[test]
    fn profile_examples() {
        let c = coloring(&[0, 1, 0, 1, 0, 1], 2, 3);
        let p = profile_color_class(&c, 0, 3, 3).unwrap();
        assert_eq!(p.positions, vec![1, 3, 5]);
        assert_eq!(p.gaps, vec![2, 2]);
        assert!(p.wide_gap_indices.is_empty());
        assert_eq!(p.blocks, vec![(1, 3)]);
        assert_eq!(p.wide_block_flags, vec![false]);

        let p = profile_color_class(&c, 0, 3, 1).unwrap();
        assert_eq!(p.wide_gap_indices, vec![1, 2]);
        assert!((p.wide_gap_indices.len() as u64) <= c.len());
        assert_eq!(p.wide_block_flags, vec![true]);

        let c = coloring(&[0, 0, 0, 1, 1, 1], 2, 3);
        let p = profile_color_class(&c, 1, 3, 10).unwrap();
        assert_eq!(p.positions, vec![4, 5, 6]);
        assert_eq!(p.gaps, vec![1, 1]);
        assert!(p.wide_gap_indices.is_empty());
    }

    #[test]
    fn profile_blocks_split_in_runs_of_k() {
        let c = coloring(&(0..10).map(|_| 0).collect::<Vec<_>>(), 1, 10);
        let p = profile_color_class(&c, 0, 3, 100).unwrap();
        assert_eq!(p.blocks, vec![(1, 3), (4, 6), (7, 9), (10, 10)]);
    }

    #[test]
    fn profile_rejects_bad_color() {
        let c = coloring(&[0, 1], 2, 1);
        assert!(profile_color_class(&c, 2, 3, 1).is_err());
    }

    #[test]
    fn divisibility_matrix_example() {
        // positions 1..10 in one color; k=3, j=1, s=2 covers a_4,a_5,a_6 =
        // 4,5,6 with differences 3,4,5 from the anchor
        let c = coloring(&vec![0; 10], 1, 10);
        let p = profile_color_class(&c, 0, 3, 1000).unwrap();
        let m = build_divisibility_matrix(&p, 1, 2, 3).unwrap();
        assert_eq!(m.to_text(), "2 3\n111\n010\n");
    }

    #[test]
    fn divisibility_matrix_zero_for_r_le_j() {
        let c = coloring(&vec![0; 9], 1, 9);
        let p = profile_color_class(&c, 0, 3, 1000).unwrap();
        // j = 3 is the last index of block 1: querying block 1 gives zeros
        let m = build_divisibility_matrix(&p, 3, 1, 3).unwrap();
        assert_eq!(m.ones(), 0);
        // row x=1 is all ones wherever r > j
        let m = build_divisibility_matrix(&p, 1, 1, 3).unwrap();
        assert!(!m.get(0, 0));
        assert!(m.get(0, 1) && m.get(0, 2));
    }

    #[test]
    fn matrix_column_sums_match_divisor_counts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let c = Coloring::random(3, 8, &mut rng);
            for color in 0..3 {
                let p = profile_color_class(&c, color, 4, 5).unwrap();
                for j in 1..=p.positions.len() {
                    for s in 1..=p.blocks.len() {
                        let m = build_divisibility_matrix(&p, j, s, 4).unwrap();
                        let (lo, hi) = p.blocks[s - 1];
                        for (y, r) in (lo..=hi).enumerate() {
                            let col_sum =
                                (0..m.rows()).filter(|&x| m.get(x, y)).count() as u64;
                            if r <= j {
                                assert_eq!(col_sum, 0);
                            } else {
                                let d = p.positions[r - 1] - p.positions[j - 1];
                                let expect =
                                    divisors_up_to(d, 3).unwrap().len() as u64;
                                assert_eq!(col_sum, expect);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn audit_trivial_examples() {
        let report = audit_theorem4(&coloring(&[0, 0, 1, 1, 2, 2], 3, 2), 3, 2).unwrap();
        assert!(report.pass);
        let c5 = report
            .checks
            .iter()
            .find(|c| c.name == "global_non_rainbow_bound")
            .unwrap();
        assert_eq!((c5.lhs, c5.rhs), (4, 9));

        let report = audit_theorem4(&coloring(&[0, 1, 2], 3, 1), 3, 7).unwrap();
        assert!(report.pass);
        let c5 = report
            .checks
            .iter()
            .find(|c| c.name == "global_non_rainbow_bound")
            .unwrap();
        assert_eq!(c5.lhs, 0);
    }

    #[test]
    fn audit_random_colorings_always_pass() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..100 {
            let c = Coloring::random(5, 6, &mut rng);
            let report = audit_theorem4(&c, 4, 7).unwrap();
            assert!(report.pass, "trial {trial}: {:?}", report.checks);
        }
    }

    #[test]
    fn audit_exhaustive_tiny() {
        crate::coloring::for_each_equinumerous_coloring(3, 2, |raw| {
            let c = Coloring::validate_equinumerous(raw.to_vec(), 3, 2).unwrap();
            for w in [1, 3, 6561] {
                let report = audit_theorem4(&c, 3, w).unwrap();
                assert!(report.pass, "{raw:?} W={w}");
            }
        });
    }

    #[test]
    fn audit_guard_fires() {
        let c = Coloring::validate_equinumerous(vec![0; 10_001], 1, 10_001).unwrap();
        assert!(matches!(audit_theorem4(&c, 3, 1), Err(Error::Guard(_))));
    }

    #[test]
    fn profile_commutes_with_relabeling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let c = Coloring::random(4, 5, &mut rng);
            // swap labels 0 and 3
            let swapped: Vec<u32> = c
                .colors()
                .iter()
                .map(|&x| match x {
                    0 => 3,
                    3 => 0,
                    other => other,
                })
                .collect();
            let cs = Coloring::validate_equinumerous(swapped, 4, 5).unwrap();
            let p0 = profile_color_class(&c, 0, 3, 4).unwrap();
            let p3 = profile_color_class(&cs, 3, 3, 4).unwrap();
            assert_eq!(p0.positions, p3.positions);
            assert_eq!(p0.gaps, p3.gaps);
            assert_eq!(p0.wide_gap_indices, p3.wide_gap_indices);
            assert_eq!(p0.blocks, p3.blocks);
        }
    }

    #[test]
    fn report_serializes_with_required_keys() {
        let report = audit_theorem4(&coloring(&[0, 1, 2], 3, 1), 3, 7).unwrap();
        let value = serde_json::to_value(&report).unwrap();
        assert!(value.get("params").is_some());
        assert!(value.get("checks").is_some());
        assert!(value.get("pass").is_some());
        let first = &value["checks"][0];
        for key in ["name", "lhs", "rhs", "pass"] {
            assert!(first.get(key).is_some());
        }
    }
}
