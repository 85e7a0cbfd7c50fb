mod common;

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use oasrank::draft::QueryDraft;
use oasrank::enrich::{enrich_vector, fit_cca, truncated_svd, CCA_RIDGE};
use oasrank::rank::{rank_endpoints, FusionConfig, RankError, TextFeaturization};
use oasrank::vectorize::cosine_dense;
use oasrank::{build_index, BuildConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::{fixture, rng};

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-12), rng.random());
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}

#[test]
fn truncated_svd_matches_gram_eigendecomposition() {
    let mut rng = rng(11);
    for target in [0.5, 0.8, 0.95, 0.999] {
        let m = gaussian(&mut rng, 20, 8);
        let svd = truncated_svd(&m, target).unwrap();

        let gram = m.transpose() * &m;
        let mut eig: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = eig.iter().sum();
        let mut k = 0;
        let mut acc = 0.0;
        while acc / total < target {
            acc += eig[k];
            k += 1;
        }
        assert_eq!(svd.k(), k, "target {target}");
        for (s, l) in svd.singular_values.iter().zip(&eig) {
            assert!((s * s - l).abs() < 1e-6, "{s} vs sqrt({l})");
        }

        // ||M - M V V^T||_F^2 equals the discarded eigenvalue mass.
        let v = &svd.components;
        let residual = &m - &m * v * v.transpose();
        let discarded: f64 = eig[k..].iter().sum();
        assert!((residual.norm_squared() - discarded).abs() < 1e-6);
        assert!(svd.explained_variance_ratio >= target);
        assert!((acc - eig[k - 1]) / total < target);
    }
}

#[test]
fn independent_noise_has_small_canonical_correlations() {
    let mut rng = rng(200);
    let x = gaussian(&mut rng, 200, 4);
    let mut y = x.clone();
    for mut col in y.column_iter_mut() {
        let mut vals: Vec<f64> = col.iter().copied().collect();
        vals.shuffle(&mut rng);
        col.copy_from_slice(&vals);
    }
    let cca = fit_cca(&x, &y, None, CCA_RIDGE).unwrap();
    assert_eq!(cca.out_dim(), 4);
    // Observed with this seed: 0.192, 0.156, 0.119, 0.045.
    assert!(cca.correlations[0] < 0.2, "{:?}", cca.correlations);
    for w in cca.correlations.windows(2) {
        assert!(w[0] >= w[1] - 1e-9);
    }
}

fn cov2(a: &DMatrix<f64>, b: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let n = a.nrows();
    let (ma, mb) = (a.column(i).mean(), b.column(j).mean());
    (0..n).map(|r| (a[(r, i)] - ma) * (b[(r, j)] - mb)).sum::<f64>() / (n as f64 - 1.0)
}

/// Canonical correlations at d = 2 from the characteristic polynomial of
/// `Cxx^-1 Cxy Cyy^-1 Cyx`, with every 2x2 product written out by hand.
fn closed_form_2d(x: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> (f64, f64) {
    let c = |a: &DMatrix<f64>, b: &DMatrix<f64>, i, j| cov2(a, b, i, j);
    let (xa, xb, xd) = (c(x, x, 0, 0) + ridge, c(x, x, 0, 1), c(x, x, 1, 1) + ridge);
    let (ya, yb, yd) = (c(y, y, 0, 0) + ridge, c(y, y, 0, 1), c(y, y, 1, 1) + ridge);
    let (p, q, r, s) = (c(x, y, 0, 0), c(x, y, 0, 1), c(x, y, 1, 0), c(x, y, 1, 1));
    let dx = xa * xd - xb * xb;
    let dy = ya * yd - yb * yb;
    // Cxx^-1 = [xd, -xb; -xb, xa] / dx and Cyy^-1 = [yd, -yb; -yb, ya] / dy.
    let (i11, i12, i21, i22) = (xd / dx, -xb / dx, -xb / dx, xa / dx);
    let (j11, j12, j21, j22) = (yd / dy, -yb / dy, -yb / dy, ya / dy);
    // A = Cxx^-1 Cxy
    let (a11, a12) = (i11 * p + i12 * r, i11 * q + i12 * s);
    let (a21, a22) = (i21 * p + i22 * r, i21 * q + i22 * s);
    // B = Cyy^-1 Cyx, with Cyx = [p, r; q, s]
    let (b11, b12) = (j11 * p + j12 * q, j11 * r + j12 * s);
    let (b21, b22) = (j21 * p + j22 * q, j21 * r + j22 * s);
    // M = A B
    let (m11, m12) = (a11 * b11 + a12 * b21, a11 * b12 + a12 * b22);
    let (m21, m22) = (a21 * b11 + a22 * b21, a21 * b12 + a22 * b22);
    let tr = m11 + m22;
    let det = m11 * m22 - m12 * m21;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    ((tr / 2.0 + disc).sqrt(), (tr / 2.0 - disc).max(0.0).sqrt())
}

#[test]
fn two_dimensional_cca_matches_closed_form() {
    let mut rng = rng(2);
    for _ in 0..20 {
        let x = gaussian(&mut rng, 60, 2);
        let noise = gaussian(&mut rng, 60, 2);
        let mix = DMatrix::from_row_slice(2, 2, &[0.9, 0.3, -0.2, 0.5]);
        let y = &x * mix + noise * rng.random_range(0.2..2.0);
        let cca = fit_cca(&x, &y, None, CCA_RIDGE).unwrap();
        let (r1, r2) = closed_form_2d(&x, &y, CCA_RIDGE);
        assert!((cca.correlations[0] - r1).abs() < 1e-9, "{} vs {r1}", cca.correlations[0]);
        assert!((cca.correlations[1] - r2).abs() < 1e-9, "{} vs {r2}", cca.correlations[1]);
    }
}

fn write_sidecar(names: &[&str], dim: usize, seed: u64) -> tempfile::NamedTempFile {
    let mut rng = rng(seed);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    for name in names {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let line = serde_json::json!({ "endpoint_name": name, "vector": v });
        writeln!(file, "{line}").unwrap();
    }
    file
}

#[test]
fn enriched_pipeline_is_structurally_sound() {
    let names = [
        "/albums/{albumId}",
        "/albums/{albumId}/songs",
        "/artists/{artistId}",
        "/artists/{artistId}/albums",
        "/orders",
        "/shows",
        "/songs",
        "/songs/{songId}",
    ];
    let sidecar = write_sidecar(&names, 6, 5);
    let config = BuildConfig {
        embeddings: Some(sidecar.path().to_path_buf()),
        ..BuildConfig::with_min_df(1)
    };
    let index = build_index(&fixture("music"), &config).unwrap();
    let enrichment = index.enrichment.as_ref().expect("sidecar attached");
    assert_eq!(enrichment.dense.len(), names.len());
    assert_eq!(enrichment.dense_dim(), 6);

    let cca = &enrichment.cca;
    assert!(cca.out_dim() <= 6.min(enrichment.svd.k()));
    for w in cca.correlations.windows(2) {
        assert!(w[0] >= w[1] - 1e-9);
    }
    assert!(cca.correlations.iter().all(|c| (0.0..=1.0).contains(c)));
    assert!(enrichment.svd.explained_variance_ratio >= 0.95);

    for (&id, v) in &enrichment.enriched {
        assert_eq!(v.len(), 2 * cca.out_dim());
        if v.iter().any(|&x| x != 0.0) {
            assert!((cosine_dense(v, v) - 1.0).abs() < 1e-12);
        }
        // Independent matrix multiply of the projection.
        let x = &enrichment.dense[&id];
        let y = enrichment.svd.transform_sparse(&index.keyword_tfidf[id as usize]);
        let mut expected = Vec::new();
        for c in 0..cca.out_dim() {
            expected.push((0..x.len()).map(|r| cca.u_proj[(r, c)] * x[r]).sum::<f64>());
        }
        for c in 0..cca.out_dim() {
            expected.push((0..y.len()).map(|r| cca.v_proj[(r, c)] * y[r]).sum::<f64>());
        }
        for (a, b) in v.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9);
        }
    }
    let out = enrich_vector(&[0.0; 6], &vec![0.0; enrichment.svd.k()], cca);
    assert!(out.iter().all(|&v| v == 0.0));

    // Queries carrying their own vector use it; the others fall back to keywords.
    let fusion = FusionConfig {
        text_featurization: TextFeaturization::Enriched,
        ..FusionConfig::default()
    };
    let id = index.id_of("/songs/{songId}").unwrap();
    let mut draft = QueryDraft::from_record(index.record(id).unwrap());
    draft.dense = Some(enrichment.dense[&id].clone());
    let ranked = rank_endpoints(&draft, &index, &fusion, 3).unwrap();
    assert_eq!(ranked[0].endpoint_id, id);
    let without = QueryDraft::from_record(index.record(index.id_of("/shows/{showId}/episodes").unwrap()).unwrap());
    let ranked = rank_endpoints(&without, &index, &fusion, 3).unwrap();
    assert_eq!(ranked[0].name, "/shows/{showId}/episodes");

    let plain = build_index(&fixture("music"), &BuildConfig::with_min_df(1)).unwrap();
    assert!(matches!(
        rank_endpoints(&draft, &plain, &fusion, 3),
        Err(RankError::IncompatibleConfig(_))
    ));
}
