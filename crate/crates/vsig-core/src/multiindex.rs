//! Multi-index bookkeeping for shuffle-recursive evaluations.
//!
//! The symmetric-weight algorithms index coefficients by letter frequencies
//! `ℓ ∈ N^q` instead of words. This module enumerates all `ℓ` with
//! `|ℓ| <= D` in lexicographic order per degree and precomputes, for every
//! `ℓ` and letter `r`, the rank of `ℓ + 1_r`, so the descending-degree
//! recursions never search.

/// Enumeration of multi-indices over `q` letters up to a total degree.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    q: usize,
    max_degree: usize,
    /// indices[d] lists all ℓ with |ℓ| = d, lexicographically.
    indices: Vec<Vec<Vec<u32>>>,
    /// plus_one[d][rank][r] = rank of ℓ + 1_r within degree d+1 (if d < max).
    plus_one: Vec<Vec<Vec<usize>>>,
}

fn enumerate_degree(q: usize, d: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; q];
    fn rec(q: usize, pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == q - 1 {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[pos] = v;
            rec(q, pos + 1, left - v, cur, out);
        }
        cur[pos] = 0;
    }
    rec(q, 0, d as u32, &mut cur, &mut out);
    // reverse-lexicographic recursion above yields descending first letter;
    // sort for plain lexicographic order.
    out.sort();
    out
}

impl MultiIndexSet {
    pub fn new(q: usize, max_degree: usize) -> Self {
        assert!(q >= 1);
        let indices: Vec<Vec<Vec<u32>>> =
            (0..=max_degree).map(|d| enumerate_degree(q, d)).collect();
        let mut plus_one = Vec::with_capacity(max_degree + 1);
        for d in 0..=max_degree {
            let mut table = Vec::with_capacity(indices[d].len());
            for ell in &indices[d] {
                let mut row = vec![usize::MAX; q];
                if d < max_degree {
                    for r in 0..q {
                        let mut up = ell.clone();
                        up[r] += 1;
                        row[r] = indices[d + 1]
                            .binary_search(&up)
                            .expect("ℓ+1_r enumerated at degree d+1");
                    }
                }
                table.push(row);
            }
            plus_one.push(table);
        }
        MultiIndexSet {
            q,
            max_degree,
            indices,
            plus_one,
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// All multi-indices of total degree `d`.
    pub fn at_degree(&self, d: usize) -> &[Vec<u32>] {
        &self.indices[d]
    }

    /// Rank of `ℓ + 1_r` within degree `|ℓ|+1`.
    pub fn rank_plus_one(&self, d: usize, rank: usize, r: usize) -> usize {
        self.plus_one[d][rank][r]
    }

    /// Rank of a multi-index within its degree class.
    pub fn rank(&self, ell: &[u32]) -> Option<usize> {
        let d: u32 = ell.iter().sum();
        self.indices
            .get(d as usize)?
            .binary_search(&ell.to_vec())
            .ok()
    }

    /// `ℓ! = ℓ_1! ⋯ ℓ_q!`.
    pub fn factorial(ell: &[u32]) -> f64 {
        ell.iter()
            .map(|&k| (1..=k as u64).product::<u64>() as f64)
            .product()
    }

    /// The representative word `1^{ℓ_1} 2^{ℓ_2} ⋯ q^{ℓ_q}` (letters 1-based).
    pub fn representative_word(ell: &[u32]) -> Vec<usize> {
        let mut w = Vec::new();
        for (p, &k) in ell.iter().enumerate() {
            for _ in 0..k {
                w.push(p + 1);
            }
        }
        w
    }

    /// Letter frequencies of a word (letters 1-based).
    pub fn frequencies(word: &[usize], q: usize) -> Vec<u32> {
        let mut ell = vec![0u32; q];
        for &p in word {
            ell[p - 1] += 1;
        }
        ell
    }
}
