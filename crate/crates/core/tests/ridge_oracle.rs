use ppipe_core::baseline::{model_inputs, TrainParams};
use ppipe_core::linalg::DenseMatrix;
use ppipe_core::ridge::{fit_ridge, ridge_gradient, SparseDesign};
use ppipe_core::rng::rng_from_seed;
use ppipe_core::{featurize, train_baseline, AuthorProfile, EssayRecord, PromptTemplate, ScoreVector};
use rand::Rng;

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, density: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random_bool(density) {
                        rng.random_range(-2.0..2.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

/// Independent loss: explicit loops over dense arrays.
fn oracle_loss(x: &[Vec<f64>], y: &[Vec<f64>], w: &[Vec<f64>], lambda: f64) -> f64 {
    let pred = dense_mul(x, w);
    let mut loss = 0.0;
    for (pr, yr) in pred.iter().zip(y) {
        for (p, t) in pr.iter().zip(yr) {
            loss += (p - t) * (p - t);
        }
    }
    for row in w {
        for v in row {
            loss += lambda * v * v;
        }
    }
    loss
}

fn to_nested(m: &DenseMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

#[test]
fn planted_weights_are_recovered() {
    for seed in 0..20 {
        let mut rng = rng_from_seed(seed);
        let n = rng.random_range(21..=30);
        let p = rng.random_range(5..=20);
        let x = random_matrix(&mut rng, n, p, 0.7);
        let w_star = random_matrix(&mut rng, p, 9, 1.0);
        let y = dense_mul(&x, &w_star);
        let design = SparseDesign::from_dense(&DenseMatrix::from_rows(&x));
        let (w, _) = fit_ridge(&design, &DenseMatrix::from_rows(&y), 1e-8).unwrap();
        let pred = to_nested(&design.mul(&w));
        for (pr, yr) in pred.iter().zip(&y) {
            for (a, b) in pr.iter().zip(yr) {
                assert!((a - b).abs() <= 1e-6, "seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn duplicated_data_with_doubled_lambda_matches() {
    let mut rng = rng_from_seed(77);
    let x = random_matrix(&mut rng, 12, 8, 0.6);
    let y = random_matrix(&mut rng, 12, 9, 1.0);
    let lambda = 0.7;
    let design = SparseDesign::from_dense(&DenseMatrix::from_rows(&x));
    let (w1, _) = fit_ridge(&design, &DenseMatrix::from_rows(&y), lambda).unwrap();
    let x2: Vec<Vec<f64>> = x.iter().chain(x.iter()).cloned().collect();
    let y2: Vec<Vec<f64>> = y.iter().chain(y.iter()).cloned().collect();
    let design2 = SparseDesign::from_dense(&DenseMatrix::from_rows(&x2));
    let (w2, _) = fit_ridge(&design2, &DenseMatrix::from_rows(&y2), 2.0 * lambda).unwrap();
    let (p1, p2) = (design.mul(&w1), design.mul(&w2));
    for (a, b) in p1.as_slice().iter().zip(p2.as_slice()) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let h = 1e-5;
    for seed in 0..10 {
        let mut rng = rng_from_seed(1000 + seed);
        let n = rng.random_range(2..=30);
        let p = rng.random_range(1..=20);
        let lambda = rng.random_range(0.0..2.0);
        let x = random_matrix(&mut rng, n, p, 0.5);
        let y = random_matrix(&mut rng, n, 9, 1.0);
        let w = random_matrix(&mut rng, p, 9, 1.0);
        let design = SparseDesign::from_dense(&DenseMatrix::from_rows(&x));
        let g = ridge_gradient(
            &design,
            &DenseMatrix::from_rows(&y),
            &DenseMatrix::from_rows(&w),
            lambda,
        );
        for i in 0..p {
            for j in 0..9 {
                let mut plus = w.clone();
                let mut minus = w.clone();
                plus[i][j] += h;
                minus[i][j] -= h;
                let fd = (oracle_loss(&x, &y, &plus, lambda) - oracle_loss(&x, &y, &minus, lambda)) / (2.0 * h);
                let an = g[(i, j)];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                assert!(rel <= 1e-4, "seed {seed} ({i},{j}): analytic {an} vs fd {fd}");
            }
        }
    }
}

#[test]
fn fitted_weights_are_first_order_optimal() {
    let eps = 1e-4;
    for seed in 0..5 {
        let mut rng = rng_from_seed(500 + seed);
        let x = random_matrix(&mut rng, 25, 15, 0.5);
        let y = random_matrix(&mut rng, 25, 9, 1.0);
        let lambda = 0.3;
        let design = SparseDesign::from_dense(&DenseMatrix::from_rows(&x));
        let (w, _) = fit_ridge(&design, &DenseMatrix::from_rows(&y), lambda).unwrap();
        let w = to_nested(&w);
        let base = oracle_loss(&x, &y, &w, lambda);
        for i in 0..w.len() {
            for j in 0..9 {
                for sign in [-1.0, 1.0] {
                    let mut pert = w.clone();
                    pert[i][j] += sign * eps;
                    let l = oracle_loss(&x, &y, &pert, lambda);
                    assert!(l >= base - 1e-12 * base.abs(), "loss decreased at ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn f32_solver_agrees_with_f64() {
    let mut rng = rng_from_seed(3);
    let x = random_matrix(&mut rng, 20, 6, 0.8);
    let y = random_matrix(&mut rng, 20, 9, 1.0);
    let (w64, _) = fit_ridge(
        &SparseDesign::from_dense(&DenseMatrix::from_rows(&x)),
        &DenseMatrix::from_rows(&y),
        0.5,
    )
    .unwrap();
    let x32: Vec<Vec<f32>> = x.iter().map(|r| r.iter().map(|v| *v as f32).collect()).collect();
    let y32: Vec<Vec<f32>> = y.iter().map(|r| r.iter().map(|v| *v as f32).collect()).collect();
    let (w32, _) = fit_ridge(
        &SparseDesign::from_dense(&DenseMatrix::from_rows(&x32)),
        &DenseMatrix::from_rows(&y32),
        0.5f32,
    )
    .unwrap();
    for (a, b) in w64.as_slice().iter().zip(w32.as_slice()) {
        assert!((a - *b as f64).abs() < 1e-3);
    }
}

const VOCAB: [&str; 12] = [
    "flood", "sad", "hope", "family", "rescue", "angry", "news", "children", "storm", "help", "lost", "home",
];

/// Labeled corpus whose gold scores are an exact linear function of the
/// featurized, prompt-prefixed inputs.
fn planted_corpus(seed: u64, n: usize) -> (Vec<EssayRecord>, Vec<ScoreVector>) {
    let mut rng = rng_from_seed(seed);
    let mut records: Vec<EssayRecord> = (0..n)
        .map(|i| {
            let words: Vec<&str> = (0..rng.random_range(3..10))
                .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
                .collect();
            EssayRecord {
                id: format!("s{i}"),
                essay: words.join(" "),
                profile: AuthorProfile::new("female", 4, 3, 22, 100000).unwrap(),
                gold: None,
                origin: None,
            }
        })
        .collect();
    let dim = 1 << 18;
    let planted: Vec<ScoreVector> = (0..=VOCAB.len())
        .map(|_| ScoreVector::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    // Weight per vocabulary slot plus bias; prompt tokens get zero weight.
    let slot_weight = |slot: usize| -> Option<ScoreVector> {
        VOCAB
            .iter()
            .position(|w| featurize::<f64>(w, dim).unwrap().entries[0].0 == slot)
            .map(|k| planted[k])
            .or(if slot == dim { Some(planted[VOCAB.len()]) } else { None })
    };
    let inputs = model_inputs(&records, &PromptTemplate::prose()).unwrap();
    let mut gold = Vec::new();
    for (r, text) in records.iter_mut().zip(&inputs) {
        let f = featurize::<f64>(text, dim).unwrap();
        let mut y = ScoreVector::zeros();
        for (slot, v) in f.entries {
            if let Some(w) = slot_weight(slot) {
                for j in 0..9 {
                    y[j] += v * w[j];
                }
            }
        }
        r.gold = Some(y);
        gold.push(y);
    }
    (records, gold)
}

#[test]
fn text_level_training_recovers_planted_targets() {
    let (records, gold) = planted_corpus(11, 30);
    let params = TrainParams {
        lambda: 1e-8,
        ..Default::default()
    };
    let (model, report) = train_baseline(&records, &PromptTemplate::prose(), &params).unwrap();
    assert!(report.max_abs_residual <= 1e-6, "{report:?}");
    let inputs = model_inputs(&records, &PromptTemplate::prose()).unwrap();
    for (text, y) in inputs.iter().zip(&gold) {
        assert!(model.predict_text(text).max_abs_diff(y) <= 1e-6);
    }
}

#[test]
fn training_is_deterministic() {
    let (records, _) = planted_corpus(12, 25);
    let params = TrainParams {
        lambda: 0.5,
        ..Default::default()
    };
    let (a, _) = train_baseline::<f64>(&records, &PromptTemplate::prose(), &params).unwrap();
    let (b, _) = train_baseline::<f64>(&records, &PromptTemplate::prose(), &params).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
}
