//! Monte Carlo checks of the closed-form statistics against simulation.

use bilimo::adc::{quantize_complex_vector, QuantizerSpec};
use bilimo::combiner::{design_multitone, DesignParams};
use bilimo::dictionary::SteeringDictionary;
use bilimo::harness::{run_point, ExperimentSpec, Method};
use bilimo::linalg::{complex_normal_matrix, complex_normal_vector, norm_sq, CMatrix, CVector};
use bilimo::statistics::{apply_blocks, lmmse_error, lmmse_transform, CompressionMatrix, SignalStatistics};
use bilimo::{ArrayParams, CoeffModel, CompressionKind, RadarConfig, TargetScene};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ula(m: usize, n: usize, l: usize, noise: f64) -> RadarConfig {
    let p = ArrayParams { tx_count: m, rx_count: n, pri_s: l as f64 * 1e-6, noise_variance: noise, ..Default::default() };
    RadarConfig::ula(&p).unwrap()
}

struct Draw {
    coeffs: CVector<f64>,
    observed: CVector<f64>,
}

fn draw(rng: &mut ChaCha8Rng, cfg: &RadarConfig, dict: &SteeringDictionary<f64>, k: usize) -> Draw {
    let scene = TargetScene::sample(rng, k, cfg, CoeffModel::Gaussian).unwrap();
    let coeffs = dict.apply_tone_major(&scene.to_sparse_vector(cfg)).unwrap();
    let noise: CVector<f64> = complex_normal_vector(rng, coeffs.len(), cfg.noise_variance);
    let observed = &coeffs + noise;
    Draw { coeffs, observed }
}

#[test]
fn coefficient_power_matches_snr_model() {
    let cfg = ula(2, 3, 3, 0.1);
    let dict = SteeringDictionary::<f64>::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let k = 4;
    let draws = 40_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        acc += norm_sq(draw(&mut rng, &cfg, &dict, k).coeffs.as_slice());
    }
    let per_coeff = acc / (draws * k * cfg.coeff_len()) as f64;
    assert!((per_coeff - cfg.coeff_variance).abs() < 0.01 * cfg.coeff_variance, "{per_coeff}");
}

#[test]
fn coefficient_covariance_is_scaled_identity() {
    let cfg = ula(2, 3, 3, 0.1);
    let dict = SteeringDictionary::<f64>::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (k, draws, dim) = (4, 100_000, cfg.coeff_len());
    let mut sum = CMatrix::<f64>::zeros(dim, dim);
    let mut sum_sq = vec![0.0; dim * dim];
    for _ in 0..draws {
        let c = draw(&mut rng, &cfg, &dict, k).coeffs;
        for j in 0..dim {
            for i in 0..dim {
                let v = c[i] * c[j].conj();
                sum[(i, j)] += v;
                sum_sq[i + j * dim] += v.norm_sqr();
            }
        }
    }
    let n = draws as f64;
    for j in 0..dim {
        for i in 0..dim {
            let mean = sum[(i, j)] / n;
            let se = ((sum_sq[i + j * dim] / n - mean.norm_sqr()) / n).sqrt();
            let target = if i == j { Complex::new(k as f64, 0.0) } else { Complex::new(0.0, 0.0) };
            assert!((mean - target).norm() <= 3.0 * se, "entry ({i}, {j}): {mean} vs {target} (se {se})");
        }
    }
}

#[test]
fn lmmse_error_matches_simulation_and_beats_other_maps() {
    let cfg = ula(2, 3, 3, 0.5);
    let dict = SteeringDictionary::<f64>::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let k = 3;
    let stats = SignalStatistics::<f64>::isotropic(&cfg, k);
    let comp = CompressionMatrix::<f64>::random(&mut rng, &cfg, 2.0, CompressionKind::Gaussian).unwrap();
    let gammas = lmmse_transform(&stats, &comp).unwrap();
    let closed = lmmse_error(&stats, &comp).unwrap();

    let rivals: Vec<Vec<CMatrix<f64>>> = (0..5)
        .map(|_| gammas.iter().map(|g| g + complex_normal_matrix::<f64, _>(&mut rng, g.nrows(), g.ncols(), 0.01)).collect())
        .collect();
    let mut rival_err = vec![0.0; rivals.len()];
    let (mut acc, mut head) = (0.0, 0.0);
    let draws = 100_000;
    for t in 0..draws {
        let d = draw(&mut rng, &cfg, &dict, k);
        let s = comp.apply(&d.coeffs).unwrap();
        let err = norm_sq((&s - apply_blocks(&gammas, &d.observed).unwrap()).as_slice());
        acc += err;
        if t < 10_000 {
            head += err;
            for (r, e) in rivals.iter().zip(rival_err.iter_mut()) {
                *e += norm_sq((&s - apply_blocks(r, &d.observed).unwrap()).as_slice());
            }
        }
    }
    let empirical = acc / draws as f64;
    assert!((empirical - closed).abs() <= 0.03 * closed, "{empirical} vs {closed}");
    for e in rival_err {
        assert!(head < e, "{head} vs rival {e}");
    }
}

#[test]
fn excess_error_matches_additive_noise_model() {
    // MN = 4, J = 2, P = 2, b = 4. Inputs are Gaussian with the modeled
    // covariance; sparse scenes are heavier tailed and overload more often.
    let cfg = ula(2, 2, 1, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let k = 2;
    let stats = SignalStatistics::<f64>::isotropic(&cfg, k);
    let comp = CompressionMatrix::<f64>::random(&mut rng, &cfg, 2.0, CompressionKind::Gaussian).unwrap();
    assert_eq!(comp.channels(), 2);
    let design = design_multitone(&stats, &comp, &DesignParams { channels: 2, levels: 4, eta: 2.0 }).unwrap();
    let gammas = lmmse_transform(&stats, &comp).unwrap();
    let quantizer = design.quantizer(true).unwrap();
    let variance = k as f64 * cfg.coeff_variance + cfg.noise_variance;
    let trials = 20_000;
    let mut acc = 0.0;
    for _ in 0..trials {
        let observed: CVector<f64> = complex_normal_vector(&mut rng, cfg.coeff_len(), variance);
        let q = quantize_complex_vector(&design.acquire(&observed).unwrap(), &quantizer, &mut rng);
        let estimate = design.estimate(&q.values).unwrap();
        acc += norm_sq((apply_blocks(&gammas, &observed).unwrap() - estimate).as_slice());
    }
    let empirical = acc / trials as f64;
    assert!((empirical - design.emse).abs() <= 0.10 * design.emse, "{empirical} vs {}", design.emse);
}

#[test]
fn dither_decorrelates_error_from_input() {
    let q = QuantizerSpec::new(4, 1.0, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let x: CVector<f64> = complex_normal_vector(&mut rng, 500_000, 0.1);
    let out = quantize_complex_vector(&x, &q, &mut rng);
    let (mut sxy, mut sxx, mut syy, mut kept) = (0.0, 0.0, 0.0, 0usize);
    for (a, b) in x.iter().zip(out.values.iter()) {
        for (xi, yi) in [(a.re, b.re), (a.im, b.im)] {
            if xi.abs() + q.step() / 2.0 > q.support() {
                continue;
            }
            let e = yi - xi;
            sxy += e * xi;
            sxx += xi * xi;
            syy += e * e;
            kept += 1;
        }
    }
    assert!(kept > 990_000);
    let corr = sxy / (sxx * syy).sqrt();
    assert!(corr.abs() <= 0.01, "{corr}");
}

#[test]
fn designed_support_rarely_overloads() {
    let cfg = ula(2, 3, 3, 0.1);
    let dict = SteeringDictionary::<f64>::new(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let k = 4;
    let stats = SignalStatistics::<f64>::isotropic(&cfg, k);
    let comp = CompressionMatrix::<f64>::random(&mut rng, &cfg, 2.0, CompressionKind::Gaussian).unwrap();
    let design = design_multitone(&stats, &comp, &DesignParams { channels: comp.channels(), levels: 4, eta: 2.0 }).unwrap();
    let quantizer = design.quantizer(false).unwrap();
    let (mut over, mut total) = (0, 0);
    for _ in 0..5_000 {
        let samples = design.acquire(&draw(&mut rng, &cfg, &dict, k).observed).unwrap();
        over += quantize_complex_vector(&samples, &quantizer, &mut rng).overloaded;
        total += 2 * samples.len();
    }
    let rate = over as f64 / total as f64;
    assert!(rate <= 0.06, "{rate}");
}

fn small_spec(methods: Vec<Method>, snr_db: f64, k: usize, recover: bool, trials: usize) -> ExperimentSpec {
    ExperimentSpec {
        config: Some(ula(2, 3, 3, 0.1)),
        budget_bits: vec![72],
        snr_db: vec![snr_db],
        k: vec![k],
        methods,
        trials,
        seed: 17,
        recover,
        ..Default::default()
    }
}

#[test]
fn lmmse_path_error_matches_closed_form() {
    let spec = small_spec(vec![Method::NoquanLmmse], 5.0, 4, false, 4_000);
    let cfg = spec.resolve_config().unwrap();
    let dict = SteeringDictionary::<f64>::new(&cfg).unwrap();
    let row = run_point(&spec, &cfg, &dict, spec.points()[0]).unwrap().remove(0);
    let (mean, _) = row.sq_err_s;
    assert!((mean - row.eps_lmmse).abs() <= 0.03 * row.eps_lmmse, "{mean} vs {}", row.eps_lmmse);
    assert!(row.mse_a.is_none() && row.hit_rate.is_none());
}

#[test]
fn noiseless_single_target_is_found() {
    let spec = small_spec(vec![Method::NoquanDr, Method::NoquanLmmse], 200.0, 1, true, 20);
    let cfg = spec.resolve_config().unwrap();
    let dict = SteeringDictionary::<f64>::new(&cfg).unwrap();
    for row in run_point(&spec, &cfg, &dict, spec.points()[0]).unwrap() {
        assert_eq!(row.failures, 0);
        assert_eq!(row.hit_rate.unwrap().0, 1.0, "{}", row.method);
    }
}

#[test]
fn task_estimates_improve_with_budget() {
    let mut spec = small_spec(vec![Method::Bilimo, Method::TaskIgnorant], 10.0, 2, false, 300);
    spec.budget_bits = vec![36, 144];
    let cfg = spec.resolve_config().unwrap();
    let dict = SteeringDictionary::<f64>::new(&cfg).unwrap();
    let points = spec.points();
    let low = run_point(&spec, &cfg, &dict, points[0]).unwrap();
    let high = run_point(&spec, &cfg, &dict, points[1]).unwrap();
    for (l, h) in low.iter().zip(&high) {
        assert!(h.sq_err_s.0 < l.sq_err_s.0, "{}: {} vs {}", l.method, h.sq_err_s.0, l.sq_err_s.0);
    }
    assert!(high[0].eps_emse.unwrap() < low[0].eps_emse.unwrap());
}
