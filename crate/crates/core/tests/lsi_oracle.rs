use perceptual_space::dataset::MetadataCorpus;
use perceptual_space::lsi::{build_metadata_space, tokenize, MetadataSpace};
use perceptual_space::space::ItemEmbedding;
use perceptual_space::synthetic::random_metadata;

/// Dense tf-idf matrix recomputed independently: documents in id order, terms sorted.
fn dense_tfidf(corpus: &MetadataCorpus) -> (Vec<Vec<f64>>, Vec<String>) {
    let docs: Vec<Vec<String>> = corpus.documents.values().map(|t| tokenize(t)).collect();
    let mut terms: Vec<String> = docs.iter().flatten().cloned().collect();
    terms.sort();
    terms.dedup();
    let n = docs.len() as f64;
    let matrix = docs
        .iter()
        .map(|d| {
            terms
                .iter()
                .map(|t| {
                    let tf = d.iter().filter(|w| *w == t).count() as f64;
                    let df = docs.iter().filter(|o| o.contains(t)).count() as f64;
                    tf * (n / df).ln()
                })
                .collect()
        })
        .collect();
    (matrix, terms)
}

/// One-sided Jacobi SVD: returns `U Σ` columns sorted by singular value.
fn jacobi_svd_scores(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = a.len();
    let m = a[0].len();
    // columns of W = A V converge to U Σ
    let mut w: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| a[i][j]).collect()).collect();
    for _ in 0..200 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let (x, y) = (w[p][i], w[q][i]);
                    w[p][i] = c * x - s * y;
                    w[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut cols: Vec<(f64, Vec<f64>)> = w.into_iter().map(|c| (c.iter().map(|x| x * x).sum::<f64>().sqrt(), c)).collect();
    cols.sort_by(|a, b| b.0.total_cmp(&a.0));
    let sv = cols.iter().map(|c| c.0).collect();
    (cols.into_iter().map(|c| c.1).collect(), sv)
}

/// Projection onto the span of the given n-vectors.
fn projector(basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = basis[0].len();
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for b in basis {
        let mut v = b.clone();
        for o in &ortho {
            let d: f64 = v.iter().zip(o).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(o) {
                *x -= d * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        ortho.push(v);
    }
    (0..n)
        .map(|i| (0..n).map(|j| ortho.iter().map(|o| o[i] * o[j]).sum()).collect())
        .collect()
}

fn space_columns(s: &MetadataSpace) -> Vec<Vec<f64>> {
    (0..s.k).map(|j| (0..s.n_items()).map(|i| s.coords(i)[j]).collect()).collect()
}

fn small_corpus() -> MetadataCorpus {
    [
        ("d1", "comedy laugh comedy romance"),
        ("d2", "action explosion chase"),
        ("d3", "comedy romance wedding"),
        ("d4", "action chase heist comedy"),
        ("d5", "drama tears romance"),
    ]
    .iter()
    .map(|&(a, b)| (a.to_owned(), b.to_owned()))
    .collect()
}

#[test]
fn top_subspace_matches_dense_svd() {
    let corpus = small_corpus();
    let (x, terms) = dense_tfidf(&corpus);
    let s = build_metadata_space(&corpus, 2, 7).unwrap();
    assert_eq!(s.vocabulary.len(), terms.len());
    let (scores, sv) = jacobi_svd_scores(&x);
    for j in 0..2 {
        assert!((s.singular_values[j] - sv[j]).abs() < 1e-8 * sv[0]);
    }
    let want = projector(&scores[..2]);
    let got = projector(&space_columns(&s));
    for i in 0..want.len() {
        for j in 0..want.len() {
            assert!((want[i][j] - got[i][j]).abs() < 1e-6);
        }
    }
    // coordinates are U Σ: column norms are the singular values
    for (j, col) in space_columns(&s).iter().enumerate() {
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - s.singular_values[j]).abs() < 1e-9 * s.singular_values[0]);
    }
}

fn reconstruction_error(x: &[Vec<f64>], s: &MetadataSpace) -> f64 {
    // ‖X − U Σ Vᵀ‖² with U Σ = coords and V = term factors
    let mut err = 0.0;
    for (i, row) in x.iter().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            let approx: f64 = (0..s.k).map(|j| s.coords(i)[j] * s.term_factors[t * s.k + j]).sum();
            err += (v - approx).powi(2);
        }
    }
    err
}

#[test]
fn reconstruction_error_non_increasing_in_k() {
    let ids: Vec<String> = (0..30).map(|i| format!("m{i:03}")).collect();
    let corpus = random_metadata(ids.iter().map(String::as_str), 40, 12, 5);
    let (x, _) = dense_tfidf(&corpus);
    let mut previous = f64::INFINITY;
    for k in 1..=12 {
        let s = build_metadata_space(&corpus, k, 1).unwrap();
        let e = reconstruction_error(&x, &s);
        assert!(e <= previous + 1e-9 * previous.min(1e6), "k={k}: {e} > {previous}");
        previous = e;
    }
}

#[test]
fn document_order_does_not_change_the_subspace() {
    let corpus = small_corpus();
    let renamed: MetadataCorpus = corpus
        .documents
        .iter()
        .map(|(id, t)| (format!("z{}", 9 - id[1..].parse::<u32>().unwrap()), t.clone()))
        .collect();
    let a = build_metadata_space(&corpus, 2, 1).unwrap();
    let b = build_metadata_space(&renamed, 2, 2).unwrap();
    // map b's rows back to a's order: dN -> z(9-N)
    let cols_b: Vec<Vec<f64>> = (0..2)
        .map(|j| {
            a.items
                .iter()
                .map(|id| {
                    let other = format!("z{}", 9 - id[1..].parse::<u32>().unwrap());
                    b.coords(b.items.get(&other).unwrap() as usize)[j]
                })
                .collect()
        })
        .collect();
    let pa = projector(&space_columns(&a));
    let pb = projector(&cols_b);
    for i in 0..pa.len() {
        for j in 0..pa.len() {
            assert!((pa[i][j] - pb[i][j]).abs() < 1e-6);
        }
    }
}
