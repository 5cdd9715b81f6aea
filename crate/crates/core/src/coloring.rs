//! Equinumerous colorings of `[t*n]`: validation, the JSON document format,
//! rainbow-AP detection, non-rainbow censuses, and canonicalization under
//! color relabeling.
//!
//! Positions are 1-indexed (the ground set is `[t*n] = {1, ..., t*n}`);
//! color indices are 0-indexed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::progression::ArithmeticProgression;

/// Largest `t*n` accepted by the full-enumeration census operations.
pub const CENSUS_GUARD: u64 = 1_000_000;

/// A validated equinumerous `t`-coloring of `[t*n]`.
///
/// Serializes to the coloring document
/// `{"t": .., "n": .., "k": .. | null, "colors": [..]}` with colors listed
/// for positions `1..=t*n` in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Coloring {
    t: u32,
    n: u32,
    #[serde(rename = "k")]
    k_context: Option<u32>,
    colors: Vec<u32>,
}

#[derive(Deserialize)]
struct RawColoringDoc {
    t: u32,
    n: u32,
    #[serde(default)]
    k: Option<u32>,
    colors: Vec<u32>,
}

impl<'de> Deserialize<'de> for Coloring {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Coloring, D::Error> {
        let raw = RawColoringDoc::deserialize(d)?;
        Coloring::validate_equinumerous(raw.colors, raw.t, raw.n)
            .map(|c| c.with_k_context(raw.k))
            .map_err(serde::de::Error::custom)
    }
}

impl Coloring {
    /// Validates `raw` as an equinumerous `t`-coloring with `n` occurrences
    /// per color. The error names the first violated constraint.
    pub fn validate_equinumerous(raw: Vec<u32>, t: u32, n: u32) -> Result<Coloring> {
        if t < 1 || n < 1 {
            return Err(Error::Invalid(format!("t and n must be >= 1, got t = {t}, n = {n}")));
        }
        let mut counts = vec![0u64; t as usize];
        for (pos, &c) in raw.iter().enumerate() {
            if c >= t {
                return Err(Error::Invalid(format!(
                    "color index {c} at position {} is out of range 0..{t}",
                    pos + 1
                )));
            }
            counts[c as usize] += 1;
            if counts[c as usize] > u64::from(n) {
                return Err(Error::Invalid(format!(
                    "color {c} used {} times, expected {n}",
                    counts[c as usize]
                )));
            }
        }
        let expected = u64::from(t) * u64::from(n);
        if raw.len() as u64 != expected {
            return Err(Error::Invalid(format!(
                "color sequence has length {}, expected t*n = {expected}",
                raw.len()
            )));
        }
        for (c, &cnt) in counts.iter().enumerate() {
            if cnt != u64::from(n) {
                return Err(Error::Invalid(format!(
                    "color {c} used {cnt} times, expected {n}"
                )));
            }
        }
        Ok(Coloring { t, n, k_context: None, colors: raw })
    }

    pub fn with_k_context(mut self, k: Option<u32>) -> Coloring {
        self.k_context = k;
        self
    }

    /// Parses and validates a coloring document.
    pub fn from_json(text: &str) -> Result<Coloring> {
        let raw: RawColoringDoc = serde_json::from_str(text)?;
        Ok(Coloring::validate_equinumerous(raw.colors, raw.t, raw.n)?.with_k_context(raw.k))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("coloring serialization cannot fail")
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k_context(&self) -> Option<u32> {
        self.k_context
    }

    /// `t*n`, the size of the ground set.
    pub fn len(&self) -> u64 {
        self.colors.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[u32] {
        &self.colors
    }

    /// Color at 1-indexed position `pos`.
    pub fn color_at(&self, pos: u64) -> u32 {
        self.colors[(pos - 1) as usize]
    }

    /// Rainbow verdict for a single AP. When not rainbow, the witness is the
    /// smallest color index appearing at least twice on the AP.
    pub fn is_rainbow(&self, ap: &ArithmeticProgression) -> Result<RainbowVerdict> {
        if ap.last() > self.len() {
            return Err(Error::Invalid(format!(
                "AP last term {} outside [t*n] = [{}]",
                ap.last(),
                self.len()
            )));
        }
        let mut cs: Vec<u32> = ap.terms().map(|x| self.color_at(x)).collect();
        cs.sort_unstable();
        let repeated = cs.windows(2).find(|w| w[0] == w[1]).map(|w| w[0]);
        Ok(RainbowVerdict { ap: *ap, is_rainbow: repeated.is_none(), repeated_color: repeated })
    }

    /// The `(diff, first)`-lexicographically smallest rainbow AP of length
    /// `k`, or `None` if every AP contains a repeated color.
    pub fn find_rainbow_ap(&self, k: u32) -> Option<ArithmeticProgression> {
        assert!(k >= 3, "k must be >= 3");
        if k > self.t {
            return None;
        }
        let m = self.len();
        let span = u64::from(k) - 1;
        let mut seen = ColorSet::new(self.t);
        let mut d = 1;
        while span * d < m {
            for x in 1..=(m - span * d) {
                if self.ap_is_rainbow(x, d, k, &mut seen) {
                    return Some(ArithmeticProgression { first: x, diff: d, length: k });
                }
            }
            d += 1;
        }
        None
    }

    fn ap_is_rainbow(&self, first: u64, d: u64, k: u32, seen: &mut ColorSet) -> bool {
        seen.clear();
        for i in 0..u64::from(k) {
            if !seen.insert(self.color_at(first + i * d)) {
                return false;
            }
        }
        true
    }

    /// Exact rainbow / non-rainbow counts over all APs of length `k` in
    /// `[t*n]`, by full enumeration.
    pub fn rainbow_census(&self, k: u32) -> Result<RainbowCensus> {
        self.census_guard(k)?;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let m = self.len();
            let span = u64::from(k) - 1;
            let d_max = if m > span { (m - 1) / span } else { 0 };
            let census = (1..=d_max)
                .into_par_iter()
                .map(|d| self.census_for_diff(d, k))
                .reduce(RainbowCensus::default, RainbowCensus::merge);
            Ok(census)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.rainbow_census_seq(k)
        }
    }

    /// Sequential implementation of [`Coloring::rainbow_census`].
    pub fn rainbow_census_seq(&self, k: u32) -> Result<RainbowCensus> {
        self.census_guard(k)?;
        let m = self.len();
        let span = u64::from(k) - 1;
        let d_max = if m > span { (m - 1) / span } else { 0 };
        let mut census = RainbowCensus::default();
        for d in 1..=d_max {
            census = census.merge(self.census_for_diff(d, k));
        }
        Ok(census)
    }

    fn census_guard(&self, k: u32) -> Result<()> {
        if k < 3 {
            return Err(Error::Invalid(format!("k must be >= 3, got {k}")));
        }
        if self.len() > CENSUS_GUARD {
            return Err(Error::Guard(format!(
                "t*n = {} exceeds census guard {CENSUS_GUARD}",
                self.len()
            )));
        }
        Ok(())
    }

    fn census_for_diff(&self, d: u64, k: u32) -> RainbowCensus {
        let m = self.len();
        let span = u64::from(k) - 1;
        let mut seen = ColorSet::new(self.t);
        let mut census = RainbowCensus::default();
        for x in 1..=(m - span * d) {
            if k <= self.t && self.ap_is_rainbow(x, d, k, &mut seen) {
                census.rainbow += 1;
            } else {
                census.non_rainbow += 1;
            }
        }
        census
    }

    /// Number of non-rainbow APs of length `k` in `[t*n]`.
    pub fn count_non_rainbow(&self, k: u32) -> Result<u64> {
        Ok(self.rainbow_census(k)?.non_rainbow)
    }

    /// Relabels colors by first occurrence so that new colors appear in
    /// increasing order `0, 1, 2, ...`. Idempotent, and invariant under any
    /// prior permutation of the color labels.
    pub fn canonicalize(&self) -> Coloring {
        let colors = relabel_by_first_occurrence(&self.colors, self.t);
        Coloring { t: self.t, n: self.n, k_context: self.k_context, colors }
    }

    /// Uniformly random equinumerous coloring (multiset shuffle).
    pub fn random<R: rand::Rng + ?Sized>(t: u32, n: u32, rng: &mut R) -> Coloring {
        use rand::seq::SliceRandom;
        let mut colors = Vec::with_capacity((t * n) as usize);
        for c in 0..t {
            colors.extend(std::iter::repeat(c).take(n as usize));
        }
        colors.shuffle(rng);
        Coloring { t, n, k_context: None, colors }
    }
}

/// First-occurrence relabeling of an arbitrary color sequence.
pub(crate) fn relabel_by_first_occurrence(colors: &[u32], t: u32) -> Vec<u32> {
    let mut map = vec![u32::MAX; t as usize];
    let mut next = 0u32;
    let mut out = Vec::with_capacity(colors.len());
    for &c in colors {
        if map[c as usize] == u32::MAX {
            map[c as usize] = next;
            next += 1;
        }
        out.push(map[c as usize]);
    }
    out
}

/// Calls `f` on every raw equinumerous `t`-coloring of `[t*n]`, in
/// lexicographic order. Intended for small `t*n` (oracle-scale exhaustive
/// checks); the number of colorings is `(t*n)! / (n!)^t`.
pub fn for_each_equinumerous_coloring<F: FnMut(&[u32])>(t: u32, n: u32, mut f: F) {
    let total = (t * n) as usize;
    let mut remaining = vec![n; t as usize];
    let mut current = Vec::with_capacity(total);
    fn rec<F: FnMut(&[u32])>(
        current: &mut Vec<u32>,
        remaining: &mut [u32],
        total: usize,
        f: &mut F,
    ) {
        if current.len() == total {
            f(current);
            return;
        }
        for c in 0..remaining.len() {
            if remaining[c] > 0 {
                remaining[c] -= 1;
                current.push(c as u32);
                rec(current, remaining, total, f);
                current.pop();
                remaining[c] += 1;
            }
        }
    }
    rec(&mut current, &mut remaining, total, &mut f);
}

/// Verdict of a rainbow check on one AP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RainbowVerdict {
    pub ap: ArithmeticProgression,
    pub is_rainbow: bool,
    pub repeated_color: Option<u32>,
}

/// Rainbow / non-rainbow totals over all APs of a fixed length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RainbowCensus {
    pub rainbow: u64,
    pub non_rainbow: u64,
}

impl RainbowCensus {
    pub fn total(&self) -> u64 {
        self.rainbow + self.non_rainbow
    }

    fn merge(self, other: RainbowCensus) -> RainbowCensus {
        RainbowCensus {
            rainbow: self.rainbow + other.rainbow,
            non_rainbow: self.non_rainbow + other.non_rainbow,
        }
    }
}

/// Small reusable set of color indices with O(1) clear.
pub(crate) struct ColorSet {
    stamp: Vec<u32>,
    generation: u32,
}

impl ColorSet {
    pub(crate) fn new(t: u32) -> ColorSet {
        ColorSet { stamp: vec![0; t as usize], generation: 0 }
    }

    pub(crate) fn clear(&mut self) {
        self.generation += 1;
        if self.generation == u32::MAX {
            self.stamp.fill(0);
            self.generation = 1;
        }
    }

    /// Returns false if the color was already present.
    pub(crate) fn insert(&mut self, c: u32) -> bool {
        let slot = &mut self.stamp[c as usize];
        if *slot == self.generation {
            false
        } else {
            *slot = self.generation;
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::progression::{count_aps_formula, enumerate_aps};
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn coloring(raw: &[u32], t: u32, n: u32) -> Coloring {
        Coloring::validate_equinumerous(raw.to_vec(), t, n).unwrap()
    }

    fn ap(first: u64, diff: u64, length: u32) -> ArithmeticProgression {
        ArithmeticProgression { first, diff, length }
    }

    #[test]
    fn validation_examples() {
        assert!(Coloring::validate_equinumerous(vec![0, 1, 2], 3, 1).is_ok());
        let err = Coloring::validate_equinumerous(vec![0, 0, 1, 2], 3, 1).unwrap_err();
        assert!(err.to_string().contains("color 0 used 2 times"), "{err}");
        assert!(Coloring::validate_equinumerous(vec![0, 0, 1, 1, 2, 2], 3, 2).is_ok());
        let err = Coloring::validate_equinumerous(vec![0, 3, 1], 3, 1).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
        let err = Coloring::validate_equinumerous(vec![0, 1], 3, 1).unwrap_err();
        assert!(err.to_string().contains("length"), "{err}");
    }

    #[test]
    fn json_roundtrip_and_rejects() {
        let c = coloring(&[0, 0, 1, 1, 2, 2], 3, 2).with_k_context(Some(3));
        let text = c.to_json();
        assert_eq!(
            text,
            r#"{"t":3,"n":2,"k":3,"colors":[0,0,1,1,2,2]}"#
        );
        assert_eq!(Coloring::from_json(&text).unwrap(), c);
        assert!(Coloring::from_json(r#"{"t":3,"n":1,"colors":[0,0,1]}"#).is_err());
        let no_k = Coloring::from_json(r#"{"t":2,"n":1,"k":null,"colors":[0,1]}"#).unwrap();
        assert_eq!(no_k.k_context(), None);
    }

    #[test]
    fn rainbow_verdict_examples() {
        let c = coloring(&[0, 1, 2], 3, 1);
        let v = c.is_rainbow(&ap(1, 1, 3)).unwrap();
        assert!(v.is_rainbow);
        assert_eq!(v.repeated_color, None);

        let c = coloring(&[0, 0, 1, 1, 2, 2], 3, 2);
        let v = c.is_rainbow(&ap(1, 1, 3)).unwrap();
        assert!(!v.is_rainbow);
        assert_eq!(v.repeated_color, Some(0));

        assert!(c.is_rainbow(&ap(3, 2, 3)).is_err()); // last term 7 > 6
    }

    #[test]
    fn ap_longer_than_palette_is_never_rainbow() {
        let c = coloring(&[0, 1, 0, 1, 0, 1], 2, 3);
        for p in enumerate_aps(6, 3).unwrap() {
            assert!(!c.is_rainbow(&p).unwrap().is_rainbow);
        }
    }

    #[test]
    fn find_rainbow_examples() {
        let c = coloring(&[0, 1, 2], 3, 1);
        assert_eq!(c.find_rainbow_ap(3), Some(ap(1, 1, 3)));

        // scan oracle: all d=1 APs of [0,0,1,1,2,2] repeat a color; the first
        // rainbow AP in (d, first) order is d=2, first=1, terms (1,3,5)
        let c = coloring(&[0, 0, 1, 1, 2, 2], 3, 2);
        let mut ordered = enumerate_aps(6, 3).unwrap();
        ordered.sort_by_key(|p| (p.diff, p.first));
        let first_rainbow = ordered.into_iter().find(|p| c.is_rainbow(p).unwrap().is_rainbow);
        assert_eq!(first_rainbow, Some(ap(1, 2, 3)));
        assert_eq!(c.find_rainbow_ap(3), Some(ap(1, 2, 3)));

        let c = coloring(&[0, 1, 0, 1], 2, 2);
        assert_eq!(c.find_rainbow_ap(3), None);
    }

    #[test]
    fn census_examples() {
        let c = coloring(&[0, 0, 1, 1, 2, 2], 3, 2);
        assert_eq!(c.count_non_rainbow(3).unwrap(), 4);
        let census = c.rainbow_census(3).unwrap();
        assert_eq!(census.rainbow, 2);
        assert_eq!(census.total(), count_aps_formula(6, 3).unwrap());

        let c = coloring(&[0, 1, 2], 3, 1);
        assert_eq!(c.count_non_rainbow(3).unwrap(), 0);

        // t < k: nothing can be rainbow
        let c = coloring(&[0, 1, 1, 0, 0, 1], 2, 3);
        assert_eq!(c.count_non_rainbow(3).unwrap(), count_aps_formula(6, 3).unwrap());
    }

    #[test]
    fn census_parallel_matches_sequential() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let c = Coloring::random(4, 10, &mut rng);
            assert_eq!(c.rainbow_census(4).unwrap(), c.rainbow_census_seq(4).unwrap());
        }
    }

    #[test]
    fn canonicalize_examples() {
        // first-occurrence relabeling on a raw sequence
        assert_eq!(relabel_by_first_occurrence(&[2, 2, 0, 1], 3), vec![0, 0, 1, 2]);
        let c = coloring(&[0, 1, 2], 3, 1);
        assert_eq!(c.canonicalize(), c);
        let c = coloring(&[1, 0, 1, 0], 2, 2).canonicalize();
        assert_eq!(c.colors(), &[0, 1, 0, 1]);
        let c = coloring(&[2, 2, 0, 0, 1, 1], 3, 2).canonicalize();
        assert_eq!(c.colors(), &[0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn enumerator_counts_multinomials() {
        let mut count = 0u64;
        for_each_equinumerous_coloring(3, 2, |_| count += 1);
        assert_eq!(count, 90);
        let mut count = 0u64;
        for_each_equinumerous_coloring(2, 3, |_| count += 1);
        assert_eq!(count, 20);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn canonicalize_is_idempotent_and_label_invariant(
            seed in 0u64..10_000,
            t in 2u32..5,
            n in 1u32..5,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = Coloring::random(t, n, &mut rng);
            let canon = c.canonicalize();
            prop_assert_eq!(canon.canonicalize(), canon.clone());
            // apply a random color permutation
            use rand::seq::SliceRandom;
            let mut perm: Vec<u32> = (0..t).collect();
            perm.shuffle(&mut rng);
            let permuted: Vec<u32> = c.colors().iter().map(|&x| perm[x as usize]).collect();
            let pc = Coloring::validate_equinumerous(permuted, t, n).unwrap();
            prop_assert_eq!(pc.canonicalize(), canon.clone());
            // rainbow status preserved position-wise
            for p in enumerate_aps(u64::from(t) * u64::from(n), 3).unwrap_or_default() {
                prop_assert_eq!(
                    c.is_rainbow(&p).unwrap().is_rainbow,
                    canon.is_rainbow(&p).unwrap().is_rainbow
                );
            }
        }

        #[test]
        fn census_bounds_hold(seed in 0u64..10_000, t in 1u32..6, n in 1u32..6, k in 3u32..7) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = Coloring::random(t, n, &mut rng);
            let m = c.len();
            let census = c.rainbow_census(k).unwrap();
            let formula = count_aps_formula(m, k).unwrap();
            prop_assert_eq!(census.total(), formula);
            let cap = u64::from(t)
                * crate::progression::binom2(u64::from(k))
                * crate::progression::binom2(u64::from(n));
            prop_assert!(census.non_rainbow <= cap);
            prop_assert_eq!(
                c.find_rainbow_ap(k).is_none(),
                census.non_rainbow == formula
            );
        }
    }
}

