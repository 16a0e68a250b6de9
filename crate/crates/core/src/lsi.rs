//! Metadata spaces: tf-idf weighted term–document matrices reduced by a
//! truncated singular value decomposition.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{IdTable, MetadataCorpus};
use crate::error::{Error, Result};
use crate::space::{parse_embedding_file, push_row, ItemEmbedding, FORMAT_VERSION};

pub const METADATA_TAG: &str = "MSPACE";
const KIND: &str = "LSI";
const OVERSAMPLE: usize = 10;
const TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 3000;

#[derive(Clone, Debug, PartialEq)]
pub struct MetadataSpace {
    pub items: IdTable,
    pub vocabulary: IdTable,
    pub k: usize,
    /// Document factors scaled by singular values, row-major `n_items × k`.
    pub coords: Vec<f64>,
    /// Term factors, row-major `|vocabulary| × k`.
    pub term_factors: Vec<f64>,
    /// Inverse document frequency per term.
    pub idf: Vec<f64>,
    pub singular_values: Vec<f64>,
}

impl ItemEmbedding for MetadataSpace {
    fn dim(&self) -> usize {
        self.k
    }

    fn item_ids(&self) -> &IdTable {
        &self.items
    }

    fn coords(&self, item: usize) -> &[f64] {
        &self.coords[item * self.k..(item + 1) * self.k]
    }
}

/// Lowercased alphanumeric runs of at least two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Sparse documents × terms matrix, rows in item order.
struct Sparse {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Sparse {
    /// `out = X · q` for a row-major `n_cols × p` block `q`.
    fn mul(&self, q: &[f64], p: usize, out: &mut [f64]) {
        out.fill(0.0);
        for (r, row) in self.rows.iter().enumerate() {
            let dst = &mut out[r * p..(r + 1) * p];
            for &(c, w) in row {
                for (d, s) in dst.iter_mut().zip(&q[c * p..(c + 1) * p]) {
                    *d += w * s;
                }
            }
        }
    }

    /// `out = Xᵀ · b` for a row-major `n_rows × p` block `b`.
    fn mul_t(&self, b: &[f64], p: usize, out: &mut [f64]) {
        out.fill(0.0);
        for (r, row) in self.rows.iter().enumerate() {
            let src = &b[r * p..(r + 1) * p];
            for &(c, w) in row {
                for (d, s) in out[c * p..(c + 1) * p].iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
}

/// Builds the tf-idf matrix; terms are indexed in sorted order.
fn weighted_matrix(corpus: &MetadataCorpus) -> (IdTable, IdTable, Vec<f64>, Sparse) {
    let docs: Vec<(&String, BTreeMap<String, usize>)> = corpus
        .documents
        .iter()
        .map(|(id, text)| {
            let mut tf = BTreeMap::new();
            for t in tokenize(text) {
                *tf.entry(t).or_insert(0) += 1;
            }
            (id, tf)
        })
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, tf) in &docs {
        for t in tf.keys() {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let vocabulary: IdTable = df.keys().collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = df.values().map(|&d| (n / d as f64).ln()).collect();
    let rows = docs
        .iter()
        .map(|(_, tf)| {
            tf.iter()
                .map(|(t, &count)| {
                    let c = vocabulary.get(t).expect("term interned above") as usize;
                    (c, count as f64 * idf[c])
                })
                .filter(|&(_, w)| w != 0.0)
                .collect()
        })
        .collect();
    let items: IdTable = docs.iter().map(|(id, _)| id.as_str()).collect();
    (items, vocabulary, idf, Sparse { rows })
}

/// Orthonormalises the columns of a row-major `m × p` block in place by
/// modified Gram–Schmidt, replacing numerically dependent columns with
/// random directions.
fn orthonormalize(q: &mut [f64], m: usize, p: usize, rng: &mut ChaCha8Rng) {
    for j in 0..p {
        for attempt in 0..8 {
            let original = (0..m).map(|r| q[r * p + j] * q[r * p + j]).sum::<f64>().sqrt();
            for _pass in 0..2 {
                for i in 0..j {
                    let dot: f64 = (0..m).map(|r| q[r * p + i] * q[r * p + j]).sum();
                    for r in 0..m {
                        q[r * p + j] -= dot * q[r * p + i];
                    }
                }
            }
            let norm = (0..m).map(|r| q[r * p + j] * q[r * p + j]).sum::<f64>().sqrt();
            if norm > 1e-10 * original.max(1e-300) && norm > 1e-300 {
                for r in 0..m {
                    q[r * p + j] /= norm;
                }
                break;
            }
            assert!(attempt < 7, "cannot extend an orthonormal basis beyond dimension {m}");
            for r in 0..m {
                q[r * p + j] = rng.random_range(-1.0..1.0);
            }
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns of a row-major matrix.
pub(crate) fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + new] = v[r * n + old];
        }
    }
    (values, vectors)
}

/// Rank-`k` metadata space of `corpus`.
pub fn build_metadata_space(corpus: &MetadataCorpus, k: usize, seed: u64) -> Result<MetadataSpace> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("metadata corpus is empty".into()));
    }
    if let Some((id, _)) = corpus.documents.iter().find(|(_, t)| tokenize(t).is_empty()) {
        return Err(Error::InvalidArgument(format!("document `{id}` has no tokens")));
    }
    let (items, vocabulary, idf, x) = weighted_matrix(corpus);
    let (n, m) = (items.len(), vocabulary.len());
    if k == 0 || k > n.min(m) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={} (documents {n}, terms {m})",
            n.min(m)
        )));
    }

    // subspace iteration on XᵀX with an oversampled block
    let p = (k + OVERSAMPLE).min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..m * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    orthonormalize(&mut q, m, p, &mut rng);
    let mut b = vec![0.0; n * p];
    let mut previous: Option<Vec<f64>> = None;
    let mut iteration = 0;
    let (values, w) = loop {
        x.mul(&q, p, &mut b);
        let check = iteration % 5 == 0 || iteration + 1 >= MAX_ITERATIONS;
        let ritz = check.then(|| {
            let gram = gram(&b, n, p);
            jacobi_eigen(&gram, p)
        });
        if let Some((values, w)) = ritz {
            let top = values[0].max(1e-300);
            let converged = previous
                .as_ref()
                .is_some_and(|prev| (0..k).all(|i| (values[i] - prev[i]).abs() <= TOLERANCE * top));
            if converged || iteration + 1 >= MAX_ITERATIONS {
                break (values, w);
            }
            previous = Some(values);
        }
        x.mul_t(&b, p, &mut q);
        orthonormalize(&mut q, m, p, &mut rng);
        iteration += 1;
    };

    // Ritz vectors: V = Q W, coordinates = X V
    let mut v = vec![0.0; m * k];
    for r in 0..m {
        for j in 0..k {
            v[r * k + j] = (0..p).map(|l| q[r * p + l] * w[l * p + j]).sum();
        }
    }
    let mut coords = vec![0.0; n * k];
    x.mul(&v, k, &mut coords);
    for j in 0..k {
        let (mut best, mut at) = (0.0f64, 0);
        for r in 0..n {
            if coords[r * k + j].abs() > best {
                best = coords[r * k + j].abs();
                at = r;
            }
        }
        if coords[at * k + j] < 0.0 {
            for r in 0..n {
                coords[r * k + j] = -coords[r * k + j];
            }
            for r in 0..m {
                v[r * k + j] = -v[r * k + j];
            }
        }
    }
    let singular_values = values[..k].iter().map(|&e| e.max(0.0).sqrt()).collect();
    Ok(MetadataSpace {
        items,
        vocabulary,
        k,
        coords,
        term_factors: v,
        idf,
        singular_values,
    })
}

/// `bᵀb` for a row-major `n × p` block.
fn gram(b: &[f64], n: usize, p: usize) -> Vec<f64> {
    let mut g = vec![0.0; p * p];
    for r in 0..n {
        let row = &b[r * p..(r + 1) * p];
        for i in 0..p {
            for j in i..p {
                g[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            g[i * p + j] = g[j * p + i];
        }
    }
    g
}

/// Space-file layout under the `MSPACE` tag: item rows carry document
/// coordinates, the second row block carries term factors with their idf.
pub fn format_metadata_space(space: &MetadataSpace) -> String {
    let mut out = String::new();
    writeln!(out, "{METADATA_TAG}\t{FORMAT_VERSION}").unwrap();
    writeln!(out, "meta\t{KIND}\t{}\t0\t{}\t{}", space.k, space.items.len(), space.vocabulary.len()).unwrap();
    for (i, id) in space.items.iter().enumerate() {
        push_row(&mut out, "item", id, 0.0, space.coords(i));
    }
    for (t, term) in space.vocabulary.iter().enumerate() {
        push_row(&mut out, "user", term, space.idf[t], &space.term_factors[t * space.k..(t + 1) * space.k]);
    }
    out
}

pub fn save_metadata_space(space: &MetadataSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_metadata_space(space)).map_err(|e| Error::io(path, e))
}

pub fn load_metadata_space(path: impl AsRef<Path>) -> Result<MetadataSpace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = parse_embedding_file(&text, path, METADATA_TAG)?;
    if file.kind != KIND {
        return Err(Error::parse(path, 2, format!("unknown metadata kind `{}`", file.kind)));
    }
    let k = file.dim;
    let singular_values = (0..k)
        .map(|j| (0..file.items.ids.len()).map(|r| file.items.coords[r * k + j].powi(2)).sum::<f64>().sqrt())
        .collect();
    Ok(MetadataSpace {
        items: file.items.ids,
        vocabulary: file.users.ids,
        k,
        coords: file.items.coords,
        term_factors: file.users.coords,
        idf: file.users.deltas,
        singular_values,
    })
}
