//! Sparse TF-IDF vectors, the PPMI co-occurrence matrix and the two cosine kernels.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::featurize::Vocabulary;

/// Index/value pairs with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds a vector from pairs in any order; duplicate indices are summed and
    /// explicit zeros dropped. Panics on non-finite values.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices: Vec<u32> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            assert!(v.is_finite(), "non-finite value {v} at index {i}");
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let (indices, values) = indices
            .into_iter()
            .zip(values)
            .filter(|&(_, v)| v != 0.0)
            .unzip();
        SparseVector { indices, values }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        Self::from_pairs(
            dense
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        )
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> f64 {
        self.indices
            .binary_search(&index)
            .map_or(0.0, |pos| self.values[pos])
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut sum = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        sum
    }

    /// Dot product with a dense vector indexed by the same vocabulary.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i as usize]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }
}

/// Raw in-vocabulary token counts.
pub fn count_vector<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> SparseVector {
    SparseVector::from_pairs(
        vocab
            .counts(tokens)
            .into_iter()
            .map(|(i, c)| (i, c as f64))
            .collect(),
    )
}

/// Term frequency (relative to the in-vocabulary total) times `ln(N_E / df)`.
pub fn tfidf_vector<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    n_endpoints: usize,
) -> SparseVector {
    let counts = vocab.counts(tokens);
    let total: u32 = counts.values().sum();
    if total == 0 {
        return SparseVector::default();
    }
    SparseVector::from_pairs(
        counts
            .into_iter()
            .map(|(i, c)| {
                let idf = (n_endpoints as f64 / vocab.doc_freq(i) as f64).ln();
                (i, c as f64 / total as f64 * idf)
            })
            .collect(),
    )
}

/// `x.y / (|x||y|)`, or 0 when either side is the zero vector.
pub fn cosine(x: &SparseVector, y: &SparseVector) -> f64 {
    let (nx, ny) = (x.norm(), y.norm());
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    x.dot(y) / (nx * ny)
}

pub fn cosine_dense(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx * ny)
    }
}

/// Symmetric, non-negative sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct PpmiMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl PpmiMatrix {
    /// Assembles a matrix from `(row, col, value)` triples. Returns `None` if an
    /// index is out of range, a value is negative or non-finite, or the triples
    /// are not symmetric.
    pub fn from_triples(dim: usize, mut triples: Vec<(u32, u32, f64)>) -> Option<Self> {
        triples.sort_by_key(|&(r, c, _)| (r, c));
        triples.dedup_by_key(|&mut (r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, c, v) in &triples {
            if r as usize >= dim || c as usize >= dim || !v.is_finite() || v < 0.0 {
                return None;
            }
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let (cols, vals) = triples.iter().map(|&(_, c, v)| (c, v)).unzip();
        let m = PpmiMatrix {
            dim,
            row_ptr,
            cols,
            vals,
        };
        let symmetric = m.triples().all(|(r, c, v)| m.get(c, r) == v);
        symmetric.then_some(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triples(dim, (0..dim as u32).map(|i| (i, i, 1.0)).collect())
            .expect("identity is symmetric")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let span = self.row_ptr[r as usize]..self.row_ptr[r as usize + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: u32, c: u32) -> f64 {
        let span = self.row_ptr[r as usize]..self.row_ptr[r as usize + 1];
        self.cols[span.clone()]
            .binary_search(&c)
            .map_or(0.0, |pos| self.vals[span.start + pos])
    }

    /// Row-major `(row, col, value)` triples of the stored cells.
    pub fn triples(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.dim as u32).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Dense `Q x`.
    pub fn mul_vec(&self, x: &SparseVector) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        // Q is symmetric, so Q x = sum over x's support of x_i * row_i.
        for (i, xi) in x.iter() {
            for (j, q) in self.row(i) {
                out[j as usize] += xi * q;
            }
        }
        out
    }

    /// Bilinear form `x Q y`.
    pub fn bilinear(&self, x: &SparseVector, y: &SparseVector) -> f64 {
        x.iter()
            .map(|(i, xi)| {
                let row: f64 = self.row(i).map(|(j, q)| q * y.get(j)).sum();
                xi * row
            })
            .sum()
    }
}

/// PPMI over all ordered token pairs that co-occur inside one endpoint's bag.
/// Pairs count with multiplicity: tokens with counts `a` and `b` contribute
/// `a*b` pairs, and a token with count `a` pairs with itself `a*(a-1)` times.
pub fn build_ppmi<'a, S, I>(bags: I, vocab: &Vocabulary) -> PpmiMatrix
where
    S: AsRef<str> + 'a,
    I: IntoIterator<Item = &'a [S]>,
{
    // Counts are integers, so accumulation order cannot change the result.
    let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
    for bag in bags {
        let counts: Vec<(u32, u64)> = vocab
            .counts(bag)
            .into_iter()
            .map(|(i, c)| (i, c as u64))
            .collect();
        for (a, &(i, ci)) in counts.iter().enumerate() {
            if ci > 1 {
                *pairs.entry((i, i)).or_insert(0) += ci * (ci - 1);
            }
            for &(j, cj) in &counts[a + 1..] {
                *pairs.entry((i, j)).or_insert(0) += ci * cj;
            }
        }
    }

    let dim = vocab.len();
    let mut marginal = vec![0u64; dim];
    let mut total = 0u64;
    for (&(i, j), &n) in &pairs {
        marginal[i as usize] += n;
        total += n;
        if i != j {
            marginal[j as usize] += n;
            total += n;
        }
    }

    let mut triples = Vec::new();
    for (&(i, j), &n) in &pairs {
        let pmi = ((n as f64 * total as f64)
            / (marginal[i as usize] as f64 * marginal[j as usize] as f64))
            .ln();
        if pmi > 0.0 {
            triples.push((i, j, pmi));
            if i != j {
                triples.push((j, i, pmi));
            }
        }
    }
    PpmiMatrix::from_triples(dim, triples).expect("constructed symmetric")
}

/// `xQy / (sqrt(xQx) sqrt(yQy))`, or 0 when either quadratic form is not positive.
pub fn ppmi_cosine(x: &SparseVector, y: &SparseVector, q: &PpmiMatrix) -> f64 {
    let xx = q.bilinear(x, x);
    let yy = q.bilinear(y, y);
    if xx <= 0.0 || yy <= 0.0 {
        return 0.0;
    }
    q.bilinear(x, y) / (xx.sqrt() * yy.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::{vocabulary_from_bags, TokenSource};

    fn vocab(bags: &[Vec<&str>]) -> Vocabulary {
        vocabulary_from_bags(bags.iter().map(Vec::as_slice), TokenSource::Tree, 1).unwrap()
    }

    #[test]
    fn sparse_vector_normalizes_input() {
        let v = SparseVector::from_pairs(vec![(3, 1.0), (1, 2.0), (3, 1.0), (5, 0.0)]);
        assert_eq!(v.indices(), &[1, 3]);
        assert_eq!(v.values(), &[2.0, 2.0]);
        assert_eq!(v.get(3), 2.0);
        assert_eq!(v.get(4), 0.0);
    }

    #[test]
    fn ubiquitous_token_has_zero_weight() {
        let bags = vec![vec!["a", "b"], vec!["a"], vec!["a", "c"]];
        let v = vocab(&bags);
        let x = tfidf_vector(&["a"], &v, 3);
        assert!(x.is_zero());
    }

    #[test]
    fn single_token_at_half_document_frequency() {
        let bags = vec![vec!["t"], vec!["t"], vec!["u"], vec!["u"]];
        let v = vocab(&bags);
        let x = tfidf_vector(&["t", "oov"], &v, 4);
        assert_eq!(x.nnz(), 1);
        assert!((x.values()[0] - 2f64.ln()).abs() < 1e-15);
        assert!(tfidf_vector::<&str>(&[], &v, 4).is_zero());
    }

    #[test]
    fn cosine_examples() {
        let x = SparseVector::from_dense(&[1.0, 1.0, 0.0]);
        let y = SparseVector::from_dense(&[1.0, 0.0, 1.0]);
        assert!((cosine(&x, &y) - 0.5).abs() < 1e-15);
        assert!((cosine(&x, &x) - 1.0).abs() < 1e-15);
        let z = SparseVector::from_dense(&[0.0, 0.0, 3.0]);
        assert_eq!(cosine(&x, &z), 0.0);
        assert_eq!(cosine(&x, &SparseVector::default()), 0.0);
    }

    #[test]
    fn never_co_occurring_tokens_have_zero_ppmi() {
        let bags = vec![vec!["a", "b"], vec!["c", "d"]];
        let v = vocab(&bags);
        let q = build_ppmi(bags.iter().map(Vec::as_slice), &v);
        let (a, c) = (v.index_of("a").unwrap(), v.index_of("c").unwrap());
        assert_eq!(q.get(a, c), 0.0);
    }

    #[test]
    fn independent_tokens_have_zero_ppmi() {
        // Joint pair counts are the product of the marginals: every cell has PMI = 0.
        let bags = vec![vec!["a", "a"], vec!["b", "b"], vec!["a", "b"], vec!["a", "b"]];
        let v = vocab(&bags);
        let q = build_ppmi(bags.iter().map(Vec::as_slice), &v);
        assert_eq!(q.nnz(), 0);
    }

    #[test]
    fn ppmi_identity_reduces_to_cosine() {
        let x = SparseVector::from_dense(&[2.0, 1.0, 0.0]);
        let y = SparseVector::from_dense(&[1.0, 0.0, 4.0]);
        let id = PpmiMatrix::identity(3);
        assert!((ppmi_cosine(&x, &y, &id) - cosine(&x, &y)).abs() < 1e-15);
        assert!((ppmi_cosine(&x, &x, &id) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_quadratic_form_scores_zero() {
        let q = PpmiMatrix::from_triples(2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let x = SparseVector::from_dense(&[1.0, 0.0]);
        assert_eq!(ppmi_cosine(&x, &x, &q), 0.0);
    }

    #[test]
    fn asymmetric_triples_are_rejected() {
        assert!(PpmiMatrix::from_triples(2, vec![(0, 1, 1.0)]).is_none());
        assert!(PpmiMatrix::from_triples(2, vec![(0, 0, -1.0)]).is_none());
        assert!(PpmiMatrix::from_triples(1, vec![(0, 3, 1.0), (3, 0, 1.0)]).is_none());
    }

    #[test]
    fn mul_vec_matches_bilinear() {
        let q = PpmiMatrix::from_triples(
            3,
            vec![(0, 0, 1.0), (0, 2, 0.5), (2, 0, 0.5), (1, 1, 2.0)],
        )
        .unwrap();
        let x = SparseVector::from_dense(&[1.0, 2.0, 3.0]);
        let y = SparseVector::from_dense(&[0.0, 1.0, 1.0]);
        let qx = q.mul_vec(&x);
        assert!((y.dot_dense(&qx) - q.bilinear(&x, &y)).abs() < 1e-15);
    }
}
