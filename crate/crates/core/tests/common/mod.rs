//! Sampling-free property checks shared by the integration tests and the
//! acceptance binary. Each returns a short summary on success.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fockrbm::bits::{decode_bits, encode_fock, max_occupation};
use fockrbm::exact::{rhs, DensityMatrix};
use fockrbm::model::{in_steady_support, liouvillian_row, support_pairs, ConfigPair, ModelParams};
use fockrbm::observables::{estimate_diagonal, moments_of, statistics_from_moments};
use fockrbm::rbm::{log_derivatives, log_rho, RbmParams, RbmShape};
use fockrbm::sampler::{SampleBatch, SampleKind, Sampler};
use fockrbm::trainer::{estimate_cost, estimate_gradient};

pub type Check = Result<String, String>;

pub fn laser() -> ModelParams {
    ModelParams::new(0.2, 0.4, 0.04, 0.0).unwrap()
}

/// Parameters drawn uniformly from `[-scale, scale]`.
pub fn random_params(shape: RbmShape, scale: f64, rng: &mut impl Rng) -> RbmParams {
    let v: Vec<f64> = (0..shape.param_count())
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    RbmParams::from_real(shape, &v).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn bit_roundtrip() -> Check {
    let mut total = 0u64;
    for nb in 1..=16 {
        for n in 0..=max_occupation(nb) {
            let b = encode_fock(n, nb).map_err(|e| e.to_string())?;
            ensure(decode_bits(&b) == n, || {
                format!("n={n} N_beta={nb} decoded to {}", decode_bits(&b))
            })?;
            total += 1;
        }
    }
    Ok(format!("{total} values"))
}

/// `Tr(Lρ) = 0` for random Hermitian `ρ`, and sector rows never leave the sector.
pub fn lindblad_trace_and_closure() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = ModelParams::new(0.3, 0.5, 0.07, 0.2).unwrap();
    let mut worst = 0.0f64;
    for nb in 1..=3 {
        let n_fock = 1usize << nb;
        let d = 2 * n_fock;
        let a = DMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = &a + a.adjoint();
        let rho = DensityMatrix::from_matrix(n_fock, h).map_err(|e| e.to_string())?;
        let t = rhs(&p, &rho).map_err(|e| e.to_string())?.trace().norm();
        worst = worst.max(t);
    }
    ensure(worst < 1e-12, || format!("|Tr(L rho)| = {worst:e}"))?;

    let mut rows = 0;
    for nb in 1..=3 {
        for src in support_pairs(1, nb) {
            for (m, _) in liouvillian_row(&p, &src).entries {
                ensure(in_steady_support(&m), || {
                    format!("{src:?} -> {m:?} leaves the sector")
                })?;
            }
            rows += 1;
        }
    }
    Ok(format!("max |Tr| {worst:.1e}, {rows} rows closed"))
}

fn every_pair(n_bits: usize) -> Vec<ConfigPair> {
    use fockrbm::bits::{Spin, SpinBosonConfig};
    let sides: Vec<SpinBosonConfig> = [Spin::Down, Spin::Up]
        .into_iter()
        .flat_map(|s| {
            (0..=max_occupation(n_bits))
                .map(move |n| SpinBosonConfig::with_occupation(vec![s], n, n_bits).unwrap())
        })
        .collect();
    let mut out = Vec::new();
    for l in &sides {
        for r in &sides {
            out.push(ConfigPair::new(l.clone(), r.clone()));
        }
    }
    out
}

/// Swapping sides conjugates `ln ρ`; diagonal entries are real and positive.
pub fn hermitian_symmetry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let shape = RbmShape::new(1, 3, 4, 4).unwrap();
    let pairs = every_pair(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let params = random_params(shape, 1.0, &mut rng);
        let cp = &pairs[rng.random_range(0..pairs.len())];
        let (a, b) = (log_rho(&params, cp), log_rho(&params, &cp.swapped()));
        worst = worst.max((a - b.conj()).norm());
        let side = if rng.random_bool(0.5) {
            cp.left.clone()
        } else {
            cp.right.clone()
        };
        let diag = log_rho(&params, &ConfigPair::diagonal(side));
        let rho = diag.exp();
        ensure(rho.re > 0.0 && rho.im.abs() <= 1e-12 * rho.re, || {
            format!("diagonal element {rho}")
        })?;
    }
    ensure(worst < 1e-12, || {
        format!("max |ln rho - conj ln rho'| = {worst:e}")
    })?;
    Ok(format!("100 draws, max asymmetry {worst:.1e}"))
}

fn perturbed(params: &RbmParams, k: usize, h: f64) -> RbmParams {
    let mut v = params.to_real();
    v[k] += h;
    RbmParams::from_real(*params.shape(), &v).unwrap()
}

/// Analytic `∂ ln ρ / ∂θ` against central differences.
pub fn log_derivative_fd() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let shape = RbmShape::new(1, 3, 4, 4).unwrap();
    let pairs = support_pairs(1, 3);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let params = random_params(shape, 0.5, &mut rng);
        let cp = &pairs[rng.random_range(0..pairs.len())];
        let d = log_derivatives(&params, cp);
        for (k, dk) in d.iter().enumerate() {
            let fd = (log_rho(&perturbed(&params, k, h), cp)
                - log_rho(&perturbed(&params, k, -h), cp))
                / (2.0 * h);
            worst = worst.max((fd - dk).norm() / dk.norm().max(1.0));
        }
    }
    ensure(worst <= 1e-5, || format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.1e}"))
}

/// Gradient of the enumerated cost against central differences at `N_β = 2`.
pub fn gradient_fd() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let shape = RbmShape::new(1, 2, 3, 3).unwrap();
    let batch = SampleBatch::enumerate(&shape, SampleKind::Unrestricted);
    let model = laser();
    let params = random_params(shape, 0.5, &mut rng);
    let g = estimate_gradient(&params, &model, &batch);
    let h = 1e-5;
    let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for (k, gk) in g.iter().enumerate() {
        let fd = (estimate_cost(&perturbed(&params, k, h), &model, &batch)
            - estimate_cost(&perturbed(&params, k, -h), &model, &batch))
            / (2.0 * h);
        worst = worst.max((fd - gk).abs() / scale);
    }
    ensure(worst <= 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!(
        "{} components, max relative error {worst:.1e}",
        g.len()
    ))
}

/// Diagonal estimator over an enumerated batch against `Tr(ρN)/Tr(ρ)` of the dense operator.
pub fn diagonal_estimator_trace() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst = 0.0f64;
    for nb in 1..=3 {
        let shape = RbmShape::new(1, nb, 3, 3).unwrap();
        let params = random_params(shape, 1.0, &mut rng);
        let pairs = every_pair(nb);
        let dim = 2 * (1usize << nb);
        let dense = DMatrix::from_fn(dim, dim, |i, j| log_rho(&params, &pairs[i * dim + j]).exp());
        let sides: Vec<_> = (0..dim).map(|i| pairs[i * dim].left.clone()).collect();
        let trace: Complex64 = (0..dim).map(|i| dense[(i, i)]).sum();
        let tn: Complex64 = (0..dim)
            .map(|i| dense[(i, i)] * sides[i].occupation() as f64)
            .sum();
        let tup: Complex64 = (0..dim)
            .map(|i| dense[(i, i)] * sides[i].spin_up_count() as f64)
            .sum();

        let batch = SampleBatch::enumerate(&shape, SampleKind::Diagonal);
        let n = estimate_diagonal(&params, &batch, |c| c.occupation() as f64);
        let up = estimate_diagonal(&params, &batch, |c| c.spin_up_count() as f64);
        worst = worst
            .max((n - (tn / trace).re).abs())
            .max((up - (tup / trace).re).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

/// Distribution to factorial moments and back.
pub fn statistics_roundtrip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let len = rng.random_range(1..=13);
        let mut p: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= z);
        let n_max = len - 1;
        let back = statistics_from_moments(&moments_of(&p, n_max.max(1)), n_max);
        for (a, b) in p.iter().zip(&back.probabilities) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

/// Chain histogram at `N_β = 2` against `|ρ|²/Σ|ρ|²`, per-cell 3σ plus χ².
pub fn detailed_balance(n_samples: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let shape = RbmShape::new(1, 2, 2, 2).unwrap();
    let params = random_params(shape, 0.4, &mut rng);
    let pairs = support_pairs(1, 2);
    let w: Vec<f64> = pairs
        .iter()
        .map(|cp| (2.0 * log_rho(&params, cp).re).exp())
        .collect();
    let z: f64 = w.iter().sum();

    let mut sampler = Sampler::new(&params, SampleKind::Unrestricted, 16, 5);
    let batch = sampler.sample_batch(&params, n_samples);
    let mut counts = vec![0usize; pairs.len()];
    for cp in &batch.pairs {
        let i = pairs
            .iter()
            .position(|p| p == cp)
            .ok_or_else(|| format!("{cp:?} outside the sector"))?;
        counts[i] += 1;
    }
    let n = batch.len() as f64;
    let mut chi2 = 0.0;
    let mut worst_z = 0.0f64;
    for (c, wi) in counts.iter().zip(&w) {
        let p = wi / z;
        let e = n * p;
        chi2 += (*c as f64 - e).powi(2) / e;
        worst_z = worst_z.max((*c as f64 - e).abs() / (n * p * (1.0 - p)).sqrt());
    }
    ensure(worst_z <= 3.0, || {
        format!("cell deviation {worst_z:.2} sigma, chi2 {chi2:.1}")
    })?;
    Ok(format!(
        "{} cells, max {worst_z:.2} sigma, chi2 {chi2:.1} on {} dof",
        pairs.len(),
        pairs.len() - 1
    ))
}

/// Every sampling-free property, by name.
pub fn property_suite() -> Vec<(&'static str, Check)> {
    vec![
        ("bit roundtrip", bit_roundtrip()),
        ("trace and closure", lindblad_trace_and_closure()),
        ("hermitian symmetry", hermitian_symmetry()),
        ("log-derivatives", log_derivative_fd()),
        ("cost gradient", gradient_fd()),
        ("diagonal estimator", diagonal_estimator_trace()),
        ("statistics roundtrip", statistics_roundtrip()),
        ("detailed balance", detailed_balance(1_000_000)),
    ]
}
