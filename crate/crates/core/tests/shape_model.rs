use hoaseg::shape::{
    chi3_q95, derive_sigma, fit_shape_model, iterate_fit, sample_patch_centers, ComponentSelector, NoisyOraclePredictor,
    OraclePredictor, OutputSpace, ShapeModel, ZeroPredictor, CONFIG_LEN,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix; eigenvalues
/// descending with matching eigenvector columns.
fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

fn sample_covariance(configs: &[Vec<f64>]) -> DMatrix<f64> {
    let n = configs.len() as f64;
    let mean: Vec<f64> = (0..CONFIG_LEN).map(|d| configs.iter().map(|x| x[d]).sum::<f64>() / n).collect();
    DMatrix::from_fn(CONFIG_LEN, CONFIG_LEN, |r, c| {
        configs.iter().map(|x| (x[r] - mean[r]) * (x[c] - mean[c])).sum::<f64>() / (n - 1.0)
    })
}

fn configs(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut s = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
    let mut next = move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    // A few strong modes over a weak isotropic floor.
    let modes: Vec<Vec<f64>> = (0..5).map(|_| (0..CONFIG_LEN).map(|_| next()).collect()).collect();
    (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..5).map(|m| next() * (20.0 / (m + 1) as f64)).collect();
            (0..CONFIG_LEN)
                .map(|d| 40.0 * (d as f64 * 0.3).sin() + (0..5).map(|m| w[m] * modes[m][d]).sum::<f64>() + 0.2 * next())
                .collect()
        })
        .collect()
}

#[test]
fn spectrum_matches_jacobi_oracle() {
    let data = configs(7, 80);
    let model = fit_shape_model(&data, ComponentSelector::Full).unwrap();
    let (values, vectors) = jacobi_eigen(sample_covariance(&data));
    let nb = model.n_components();
    assert_eq!(nb, 48);
    for k in 0..nb {
        assert!((model.mode_variances()[k] - values[k]).abs() < 1e-9 * values[0], "mode {k}");
    }
    // Leading modes are well separated: eigenvectors agree up to sign.
    for k in 0..5 {
        let dot: f64 = (0..CONFIG_LEN).map(|r| model.components()[(r, k)] * vectors[(r, k)]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-9, "mode {k}: {dot}");
        let col = model.components().column(k);
        let largest = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
        assert!(largest > 0.0);
    }
}

fn sylvester(n: usize) -> Vec<Vec<f64>> {
    let mut h = vec![vec![1.0]];
    while h.len() < n {
        let m = h.len();
        let mut next = vec![vec![0.0; 2 * m]; 2 * m];
        for i in 0..m {
            for j in 0..m {
                next[i][j] = h[i][j];
                next[i][j + m] = h[i][j];
                next[i + m][j] = h[i][j];
                next[i + m][j + m] = -h[i][j];
            }
        }
        h = next;
    }
    h
}

#[test]
fn hadamard_design_has_known_spectrum() {
    // Pairs mean ± a_k u_k along orthonormal Hadamard rows give covariance
    // eigenvalues 2 a_k^2 / (N - 1).
    let h = sylvester(16);
    let amplitudes = [9.0, 7.0, 5.0, 3.0, 2.0, 1.0];
    let mean: Vec<f64> = (0..CONFIG_LEN).map(|d| d as f64).collect();
    let mut data = Vec::new();
    for (k, &a) in amplitudes.iter().enumerate() {
        for sign in [1.0, -1.0] {
            let mut x = mean.clone();
            for j in 0..16 {
                x[16 + j] += sign * a * h[k + 1][j] / 4.0;
            }
            data.push(x);
        }
    }
    let n = data.len() as f64;
    let model = fit_shape_model(&data, ComponentSelector::Full).unwrap();
    assert_eq!(model.n_components(), amplitudes.len());
    for (k, &a) in amplitudes.iter().enumerate() {
        let expect = 2.0 * a * a / (n - 1.0);
        assert!((model.mode_variances()[k] - expect).abs() < 1e-9, "mode {k}");
        let dot: f64 = (0..16).map(|j| model.components()[(16 + j, k)] * h[k + 1][j] / 4.0).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-9);
    }
    let total: f64 = amplitudes.iter().map(|a| a * a).sum();
    let two = fit_shape_model(&data, ComponentSelector::Fixed(2)).unwrap();
    assert!((two.variance_fraction_retained() - (81.0 + 49.0) / total).abs() < 1e-12);
    let by_fraction = fit_shape_model(&data, ComponentSelector::VarianceFraction(0.9)).unwrap();
    assert_eq!(by_fraction.n_components(), 3);
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn model_algebra(seed in any::<u64>(), n in 10usize..90) {
        let data = configs(seed, n);
        let model = fit_shape_model(&data, ComponentSelector::Full).unwrap();
        let w = model.components();
        let gram = w.transpose() * w;
        prop_assert!(max_abs(&(gram - DMatrix::identity(w.ncols(), w.ncols()))) < 1e-9);
        for x in &data {
            let b = model.project(x).unwrap();
            let back = model.reconstruct(&b).unwrap();
            let err = back.iter().zip(x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(err < 1e-9, "reconstruction error {}", err);
        }

        let reduced = fit_shape_model(&data, ComponentSelector::Fixed(3)).unwrap();
        let x = &data[0];
        let back = reduced.reconstruct(&reduced.project(x).unwrap()).unwrap();
        let residual: Vec<f64> = x.iter().zip(&back).map(|(a, b)| a - b).collect();
        for k in 0..3 {
            let dot: f64 = (0..CONFIG_LEN).map(|r| reduced.components()[(r, k)] * residual[r]).sum();
            prop_assert!(dot.abs() < 1e-9);
        }
        let json = serde_json::to_string(&reduced).unwrap();
        let parsed: ShapeModel = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(parsed, reduced);
    }

    #[test]
    fn oracle_fits(seed in any::<u64>()) {
        let data = configs(seed, 40);
        let model = fit_shape_model(&data, ComponentSelector::VarianceFraction(0.995)).unwrap();
        let target = model.reconstruct(&model.project(&data[3]).unwrap()).unwrap();
        let b0 = vec![0.0; model.n_components()];
        for space in [OutputSpace::Shape, OutputSpace::Landmarks] {
            let mut oracle = OraclePredictor { target: target.clone(), confidence: 1.0, space };
            let t = iterate_fit(&model, &mut oracle, &b0, 3).unwrap();
            for step in &t[1..] {
                let err = step.x.iter().zip(&target).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                prop_assert!(err < 1e-9);
            }
            let mut frozen = OraclePredictor { target: target.clone(), confidence: 0.0, space };
            let t = iterate_fit(&model, &mut frozen, &b0, 4).unwrap();
            prop_assert!(t.iter().all(|s| s.b == b0));
        }
        let t = iterate_fit(&model, &mut ZeroPredictor, &b0, 2).unwrap();
        prop_assert!(t.iter().all(|s| s.b == b0));
    }
}

#[test]
fn noisy_oracle_improves_early() {
    let data = configs(11, 80);
    let model = fit_shape_model(&data, ComponentSelector::VarianceFraction(0.995)).unwrap();
    let target = data[5].clone();
    let b0 = vec![0.0; model.n_components()];
    let mut improving = 0;
    for seed in 0..100 {
        let mut p = NoisyOraclePredictor::new(target.clone(), 0.5, 0.5, seed);
        let t = iterate_fit(&model, &mut p, &b0, 10).unwrap();
        let err = |x: &[f64]| hoaseg::shape::landmark_error(x, &target).unwrap().mean;
        if err(&t[10].x) < err(&t[0].x) {
            improving += 1;
        }
    }
    assert!(improving >= 95, "{improving}/100");
}

/// Chi(3) distribution function from its closed form.
fn chi3_cdf(r: f64) -> f64 {
    statrs::function::erf::erf(r / 2f64.sqrt()) - (2.0 / std::f64::consts::PI).sqrt() * r * (-r * r / 2.0).exp()
}

#[test]
fn chi3_quantile_matches_bisection() {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi3_cdf(mid) < 0.95 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((chi3_q95() - lo).abs() < 1e-9);
    assert!((chi3_q95() - 2.795483482).abs() < 1e-8);
    assert!((derive_sigma(6.0).unwrap() * 2.0 - derive_sigma(12.0).unwrap()).abs() < 1e-12);
}

#[test]
fn sampled_offsets_fall_inside_radius_95_percent() {
    let r = 5.0;
    let centre = [10.0, -4.0, 2.0];
    let patches = sample_patch_centers(3, centre, r, 1_000_000, 17).unwrap();
    let inside = patches
        .iter()
        .filter(|p| {
            let d = (0..3).map(|a| (p.center[a] - centre[a]).powi(2)).sum::<f64>().sqrt();
            d <= r
        })
        .count();
    let frac = inside as f64 / patches.len() as f64;
    assert!((frac - 0.95).abs() < 0.002, "{frac}");
}
