//! Permutations in item→position convention, rank distances and the Lehmer codec.
//!
//! A [`Permutation`] stores, for every item, the position it is ranked at.
//! Items and positions are 0-based in memory; every file format, `Display`
//! and serde representation is 1-based (`σ(i) = j` means item `i` sits at
//! rank `j`, rank 1 best).

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FraError, Result};
use crate::scalar::Real;
use crate::seeds;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    pos: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { pos: (0..n).collect() }
    }

    pub fn reversal(n: usize) -> Self {
        Self { pos: (0..n).rev().collect() }
    }

    /// Builds from 1-based ranks, `ranks[i]` being the rank of item `i + 1`.
    pub fn from_ranks(ranks: &[usize]) -> Result<Self> {
        if ranks.contains(&0) {
            return Err(FraError::InvalidPermutation {
                n: ranks.len(),
                detail: "rank 0 (ranks are 1-based)".into(),
            });
        }
        Self::from_zero_based(ranks.iter().map(|&r| r - 1).collect())
    }

    pub fn from_zero_based(pos: Vec<usize>) -> Result<Self> {
        let n = pos.len();
        if n == 0 {
            return Err(FraError::InvalidPermutation { n, detail: "empty".into() });
        }
        let mut seen = vec![false; n];
        for &p in &pos {
            if p >= n {
                return Err(FraError::InvalidPermutation {
                    n,
                    detail: format!("rank {} out of range", p + 1),
                });
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(FraError::InvalidPermutation {
                    n,
                    detail: format!("rank {} repeated", p + 1),
                });
            }
        }
        Ok(Self { pos })
    }

    /// Builds from an ordering: `order[j]` is the (0-based) item at position `j`.
    pub fn from_order(order: &[usize]) -> Result<Self> {
        Ok(Self::from_zero_based(order.to_vec())?.inverse())
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    /// 0-based positions, indexed by 0-based item.
    pub fn positions(&self) -> &[usize] {
        &self.pos
    }

    /// 1-based ranks, indexed by 0-based item.
    pub fn ranks(&self) -> Vec<usize> {
        self.pos.iter().map(|p| p + 1).collect()
    }

    pub fn position_of(&self, item: usize) -> usize {
        self.pos[item]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.pos.len()];
        for (item, &p) in self.pos.iter().enumerate() {
            inv[p] = item;
        }
        Self { pos: inv }
    }

    /// `(self ∘ inner)(x) = self(inner(x))`.
    pub fn compose(&self, inner: &Permutation) -> Result<Self> {
        check_len(self.len(), inner.len())?;
        Ok(Self { pos: inner.pos.iter().map(|&x| self.pos[x]).collect() })
    }

    pub fn is_identity(&self) -> bool {
        self.pos.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn lehmer(&self) -> LehmerCode {
        lehmer_encode(self)
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{self}")
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, p) in self.pos.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", p + 1)?;
        }
        f.write_str(")")
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.pos.iter().map(|p| p + 1))
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ranks = Vec::<usize>::deserialize(d)?;
        Permutation::from_ranks(&ranks).map_err(serde::de::Error::custom)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(FraError::LengthMismatch { expected, got });
    }
    Ok(())
}

/// Binary indexed tree over `0..n` holding counts.
struct Fenwick {
    tree: Vec<usize>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    fn filled(n: usize) -> Self {
        let mut tree = vec![0; n + 1];
        for i in 1..=n {
            tree[i] += 1;
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        Self { tree }
    }

    fn add(&mut self, idx: usize, delta: isize) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `0..idx`.
    fn prefix(&self, idx: usize) -> usize {
        let mut i = idx;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index whose prefix sum (inclusive) exceeds `k`.
    fn select(&self, mut k: usize) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Number of item pairs the two rankings order oppositely.
pub fn kendall_tau(a: &Permutation, b: &Permutation) -> Result<u64> {
    check_len(a.len(), b.len())?;
    // b's positions listed in a's order; inversions of that sequence.
    let order = a.inverse();
    let mut fw = Fenwick::new(b.len());
    let mut inv = 0u64;
    for (seen, &item) in order.pos.iter().enumerate() {
        let p = b.pos[item];
        inv += (seen - fw.prefix(p)) as u64;
        fw.add(p, 1);
    }
    Ok(inv)
}

/// Sum of absolute rank displacements.
pub fn spearman_footrule(a: &Permutation, b: &Permutation) -> Result<u64> {
    check_len(a.len(), b.len())?;
    Ok(a.pos.iter().zip(&b.pos).map(|(&x, &y)| x.abs_diff(y) as u64).sum())
}

/// Lehmer code: `coords[i]` counts items `t < i` ranked worse than item `i`,
/// so `coords[i] ∈ 0..=i` (0-based `i`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct LehmerCode {
    coords: Vec<usize>,
}

impl LehmerCode {
    pub fn new(coords: Vec<usize>) -> Result<Self> {
        if coords.is_empty() {
            return Err(FraError::EmptyInput("Lehmer code"));
        }
        for (i, &c) in coords.iter().enumerate() {
            if c > i {
                return Err(FraError::InvalidLehmerCode { coord: i + 1, value: c, max: i });
            }
        }
        Ok(Self { coords })
    }

    pub fn zeros(n: usize) -> Self {
        Self { coords: vec![0; n] }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.coords.iter().map(|&c| c as u64).sum()
    }

    pub fn decode(&self) -> Permutation {
        lehmer_decode(self)
    }
}

pub fn lehmer_encode(sigma: &Permutation) -> LehmerCode {
    let n = sigma.len();
    let mut fw = Fenwick::new(n);
    let coords = sigma
        .pos
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let better_or_equal = fw.prefix(p + 1);
            fw.add(p, 1);
            i - better_or_equal
        })
        .collect();
    LehmerCode { coords }
}

pub fn lehmer_decode(code: &LehmerCode) -> Permutation {
    // Walking items from last to first, item i takes the (i - c_i)-th best
    // of the still-free positions.
    let n = code.len();
    let mut free = Fenwick::filled(n);
    let mut pos = vec![0; n];
    for i in (0..n).rev() {
        let p = free.select(i - code.coords[i]);
        pos[i] = p;
        free.add(p, -1);
    }
    Permutation { pos }
}

/// Lehmer-style displacement of `sigma` measured in the item order of `centroid`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DisplacementVector {
    values: Vec<usize>,
}

impl DisplacementVector {
    pub fn values(&self) -> &[usize] {
        &self.values
    }
}

/// `f(i) = |{t < i : σ(σ₀⁻¹(t)) > σ(σ₀⁻¹(i))}|`, i.e. the Lehmer code of `σ ∘ σ₀⁻¹`.
pub fn relabel_displacement(sigma: &Permutation, centroid: &Permutation) -> Result<DisplacementVector> {
    let relabeled = sigma.compose(&centroid.inverse())?;
    Ok(DisplacementVector { values: lehmer_encode(&relabeled).coords })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    ByIndex,
    SeededRandom(u64),
}

/// Higher score ranks better.
pub fn scores_to_ranking<T: Real>(scores: &[T], tie_rule: TieRule) -> Result<Permutation> {
    if scores.is_empty() {
        return Err(FraError::EmptyInput("scores"));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(FraError::InvalidParameter(format!("non-finite score for item {}", i + 1)));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    if let TieRule::SeededRandom(seed) = tie_rule {
        order.shuffle(&mut seeds::stream(seed, &[seeds::tag::TIES]));
    }
    // Stable sort keeps the pre-sort order inside tied groups.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite"));
    Permutation::from_order(&order)
}

/// Completes a ranked prefix (1-based item ids, best first) with the
/// remaining items in uniformly random order.
pub fn partial_to_full<R: Rng + ?Sized>(prefix: &[usize], n: usize, rng: &mut R) -> Result<Permutation> {
    if n == 0 {
        return Err(FraError::InvalidParameter("N must be at least 1".into()));
    }
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for &item in prefix {
        if item == 0 || item > n {
            return Err(FraError::InvalidParameter(format!("item {item} outside 1..={n}")));
        }
        if std::mem::replace(&mut used[item - 1], true) {
            return Err(FraError::InvalidParameter(format!("item {item} repeated in prefix")));
        }
        order.push(item - 1);
    }
    let mut tail: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
    tail.shuffle(rng);
    order.extend(tail);
    Permutation::from_order(&order)
}

/// All of `S_n` in lexicographic order of the rank vector.
pub fn all_permutations(n: usize) -> AllPermutations {
    AllPermutations { next: (n > 0).then(|| (0..n).collect()) }
}

pub struct AllPermutations {
    next: Option<Vec<usize>>,
}

impl Iterator for AllPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_lexicographic(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation { pos: current })
    }
}

fn next_lexicographic(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(r: &[usize]) -> Permutation {
        Permutation::from_ranks(r).unwrap()
    }

    fn kendall_bruteforce(a: &Permutation, b: &Permutation) -> u64 {
        let (a, b) = (a.positions(), b.positions());
        let mut c = 0;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                if (a[i] as i64 - a[j] as i64) * (b[i] as i64 - b[j] as i64) < 0 {
                    c += 1;
                }
            }
        }
        c
    }

    fn lehmer_bruteforce(s: &Permutation) -> Vec<usize> {
        let r = s.positions();
        (0..r.len()).map(|i| (0..i).filter(|&t| r[t] > r[i]).count()).collect()
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::from_ranks(&[1, 1, 3]).is_err());
        assert!(Permutation::from_ranks(&[1, 4, 2]).is_err());
        assert!(Permutation::from_ranks(&[0, 1]).is_err());
        assert!(Permutation::from_ranks(&[]).is_err());
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau(&p(&[1, 2, 3]), &p(&[1, 2, 3])).unwrap(), 0);
        assert_eq!(kendall_tau(&p(&[2, 1]), &p(&[1, 2])).unwrap(), 1);
        assert_eq!(kendall_tau(&p(&[1, 2, 3, 4]), &p(&[4, 3, 2, 1])).unwrap(), 6);
        assert!(kendall_tau(&p(&[1, 2]), &p(&[1, 2, 3])).is_err());
    }

    #[test]
    fn footrule_examples() {
        let e = Permutation::identity(5);
        assert_eq!(spearman_footrule(&e, &e).unwrap(), 0);
        assert_eq!(spearman_footrule(&p(&[1, 2]), &p(&[2, 1])).unwrap(), 2);
        assert_eq!(spearman_footrule(&p(&[1, 2, 3]), &p(&[3, 1, 2])).unwrap(), 4);
    }

    #[test]
    fn lehmer_examples() {
        assert_eq!(p(&[1, 2, 3, 4]).lehmer().coords(), &[0, 0, 0, 0]);
        assert_eq!(p(&[4, 3, 2, 1]).lehmer().coords(), &[0, 1, 2, 3]);
        assert_eq!(p(&[3, 1, 2]).lehmer().coords(), lehmer_bruteforce(&p(&[3, 1, 2])).as_slice());
        assert_eq!(p(&[3, 1, 2]).lehmer().coords(), &[0, 1, 1]);

        let dec = |c: Vec<usize>| LehmerCode::new(c).unwrap().decode();
        assert_eq!(dec(vec![0, 0, 0]), p(&[1, 2, 3]));
        assert_eq!(dec(vec![0, 1, 2]), p(&[3, 2, 1]));
        assert_eq!(dec(vec![0, 1, 1]), p(&[3, 1, 2]));
        assert!(LehmerCode::new(vec![0, 2, 0]).is_err());
        assert!(LehmerCode::new(vec![1]).is_err());
    }

    #[test]
    fn exhaustive_codec_and_inversion_identity() {
        for n in 1..=7 {
            for s in all_permutations(n) {
                let code = s.lehmer();
                assert_eq!(code.coords(), lehmer_bruteforce(&s).as_slice());
                assert_eq!(code.decode(), s);
                let e = Permutation::identity(n);
                assert_eq!(kendall_tau(&s, &e).unwrap(), code.total());
                assert_eq!(relabel_displacement(&s, &e).unwrap().values(), code.coords());
            }
        }
    }

    #[test]
    fn all_permutations_counts_and_order() {
        assert_eq!(all_permutations(4).count(), 24);
        let v: Vec<_> = all_permutations(3).map(|s| s.ranks()).collect();
        assert_eq!(v[0], vec![1, 2, 3]);
        assert_eq!(v[5], vec![3, 2, 1]);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn inverse_examples() {
        let e = Permutation::identity(4);
        assert_eq!(e.inverse(), e);
        assert_eq!(p(&[2, 3, 1]).inverse(), p(&[3, 1, 2]));
    }

    #[test]
    fn displacement_examples() {
        let s = p(&[3, 1, 2]);
        assert!(relabel_displacement(&s, &s).unwrap().values().iter().all(|&v| v == 0));

        // Direct evaluation of the definition.
        let s0 = p(&[2, 1, 3]);
        let inv = s0.inverse();
        let sv = s.positions();
        let iv = inv.positions();
        let expected: Vec<usize> = (0..3)
            .map(|i| (0..i).filter(|&t| sv[iv[t]] > sv[iv[i]]).count())
            .collect();
        assert_eq!(relabel_displacement(&s, &s0).unwrap().values(), expected.as_slice());
        assert_eq!(expected, vec![0, 0, 1]);
    }

    #[test]
    fn kendall_is_a_metric_on_s4() {
        let all: Vec<_> = all_permutations(4).collect();
        for a in &all {
            for b in &all {
                let ab = kendall_tau(a, b).unwrap();
                assert_eq!(ab, kendall_tau(b, a).unwrap());
                assert_eq!(ab == 0, a == b);
                assert_eq!(ab, kendall_bruteforce(a, b));
                for c in &all {
                    assert!(ab <= kendall_tau(a, c).unwrap() + kendall_tau(c, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn scores_examples() {
        assert_eq!(scores_to_ranking(&[9.0, 1.0, 5.0], TieRule::ByIndex).unwrap(), p(&[1, 3, 2]));
        assert_eq!(scores_to_ranking(&[2.0, 2.0, 1.0], TieRule::ByIndex).unwrap(), p(&[1, 2, 3]));
        assert_eq!(scores_to_ranking(&[4.0f32; 5], TieRule::ByIndex).unwrap(), Permutation::identity(5));
        assert_eq!(scores_to_ranking(&[-10.0, 10.0], TieRule::ByIndex).unwrap(), p(&[2, 1]));
        assert!(scores_to_ranking(&[1.0, f64::NAN], TieRule::ByIndex).is_err());
        assert!(scores_to_ranking::<f64>(&[], TieRule::ByIndex).is_err());
    }

    #[test]
    fn seeded_random_ties_only_permute_tied_groups() {
        let mut saw_swap = false;
        for seed in 0..50 {
            let r = scores_to_ranking(&[2.0, 2.0, 1.0], TieRule::SeededRandom(seed)).unwrap();
            assert_eq!(r.position_of(2), 2);
            saw_swap |= r == p(&[2, 1, 3]);
            assert_eq!(r, scores_to_ranking(&[2.0, 2.0, 1.0], TieRule::SeededRandom(seed)).unwrap());
        }
        assert!(saw_swap);
    }

    #[test]
    fn partial_to_full_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(partial_to_full(&[2, 3, 1], 3, &mut rng).unwrap(), p(&[3, 1, 2]));
        assert!(partial_to_full(&[2, 2], 3, &mut rng).is_err());
        assert!(partial_to_full(&[4], 3, &mut rng).is_err());

        // Prefix (3), N = 3: two equally likely completions.
        let draws = 10_000;
        let mut item1_second = 0;
        for _ in 0..draws {
            let s = partial_to_full(&[3], 3, &mut rng).unwrap();
            assert_eq!(s.position_of(2), 0);
            if s.position_of(0) == 1 {
                item1_second += 1;
            }
        }
        let freq = item1_second as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn empty_prefix_is_uniform_over_s3() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let all: Vec<_> = all_permutations(3).collect();
        let mut counts = [0usize; 6];
        let draws = 60_000;
        for _ in 0..draws {
            let s = partial_to_full(&[], 3, &mut rng).unwrap();
            counts[all.iter().position(|a| *a == s).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn serde_is_one_based() {
        let s = p(&[2, 3, 1]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[2,3,1]");
        let back: Permutation = serde_json::from_str("[2,3,1]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<Permutation>("[1,1]").is_err());
        assert_eq!(s.to_string(), "(2,3,1)");
    }
}
