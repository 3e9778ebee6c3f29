//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero on any failure not listed in `KNOWN_SHORTFALLS`. Runs without
//! the libtest harness so the lines stay in order and unbuffered.
//! Pass criterion numbers as arguments to run a subset.

use std::time::Instant;

use gfisher::dependence::{cov_summands, gen_structure, BlockLayout, SeriesConfig, StructureKind};
use gfisher::glm::{marginal_score, DesignData, Family};
use gfisher::harness::tie::critical_value;
use gfisher::harness::{empirical_tie, run_chunked, GFisherReplicate, NullModel, SimConfig, TieMode};
use gfisher::methods::{MethodRegistry, MomentStrategy, NullSetting, DEFAULT_MOMENT_SEED};
use gfisher::numkernels::{chisq_inv_upper, chisq_sf, norm_quantile};
use gfisher::omnibus::{pvalue_cc, pvalue_minp_at, OmnibusOptions, OmnibusPanel};
use gfisher::qform::davies::qfc;
use gfisher::stat::summand_from_z;
use gfisher::surrogates::{fit_ggd, GgdSurrogate, GgdVariant, MomentSummary};
use gfisher::{CorrMatrix, Error, GFisherDef, MomentSource, Side};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

/// Least-squares coefficients of y on the columns σ^p for p in `powers`.
fn poly_fit(xs: &[f64], ys: &[f64], powers: &[i32]) -> Vec<f64> {
    let a = DMatrix::from_fn(xs.len(), powers.len(), |i, j| xs[i].powi(powers[j]));
    let b = DVector::from_column_slice(ys);
    let qr = a.qr();
    let rhs = qr.q().transpose() * b;
    qr.r().solve_upper_triangular(&rhs).expect("full-rank design").iter().copied().collect()
}

fn sigma_grid() -> Vec<f64> {
    (0..=98).map(|i| -0.98 + 0.02 * i as f64).collect()
}

fn one_sided_cubic() -> Outcome {
    let xs = sigma_grid();
    let cfg = SeriesConfig::with_kstar(3);
    let ys: Vec<f64> = xs.iter().map(|&s| cov_summands(2.0, 2.0, s, Side::OneSided, &cfg).unwrap().value).collect();
    let c = poly_fit(&xs, &ys, &[1, 2, 3]);
    let target = [3.263, 0.710, 0.027];
    let ok = c.iter().zip(target).all(|(a, b)| (a - b).abs() < 5e-4);
    check(ok, format!("coefficients ({})", fmt_list(&c)))
}

fn two_sided_even_poly() -> Outcome {
    let xs = sigma_grid();
    // Five nonzero polynomial terms: odd orders vanish for two-sided inputs,
    // so the series runs to order 10.
    let cfg = SeriesConfig::with_kstar(10);
    let ys: Vec<f64> = xs.iter().map(|&s| cov_summands(2.0, 2.0, s, Side::TwoSided, &cfg).unwrap().value).collect();
    let c = poly_fit(&xs, &ys, &[2, 4, 6, 8, 10]);
    let target = [3.9068, 0.0506, 0.0173, 0.0082, 0.0046];
    let ok = c.iter().zip(target).all(|(a, b)| (a - b).abs() <= 5e-4);
    check(ok, format!("coefficients ({})", fmt_list(&c)))
}

fn independence_exact() -> Outcome {
    let ps: Vec<f64> = (0..=28).map(|i| 10f64.powf(-7.0 + 0.25 * i as f64)).collect();
    let mut worst = 0.0f64;
    for n in [5, 10, 20] {
        let def = GFisherDef::fisher(n, Side::TwoSided).unwrap();
        let setting = NullSetting::new(def, CorrMatrix::identity(n)).unwrap();
        for m in ["gb", "mr", "q", "hyb"] {
            let prep = MethodRegistry::default().prepare(m, &setting).map_err(|e| e.to_string())?;
            for &p in &ps {
                let t = if p < 1.0 { chisq_inv_upper(p, 2.0 * n as f64).unwrap() } else { 0.0 };
                let exact = chisq_sf(t, 2.0 * n as f64);
                let got = prep.pvalue(t).map_err(|e| e.to_string())?.pvalue;
                worst = worst.max((got - exact).abs());
            }
        }
    }
    check(worst <= 1e-5, format!("max |error| {worst:.2e} over GB/MR/Q/HYB, n in {{5,10,20}}"))
}

/// Running sums of a product of centered summands.
#[derive(Default, Clone)]
struct PairSums {
    n: f64,
    ab: f64,
    ab2: f64,
}

impl PairSums {
    fn push(&mut self, a: f64, b: f64) {
        self.n += 1.0;
        self.ab += a * b;
        self.ab2 += (a * b) * (a * b);
    }
    fn merge(&mut self, o: &PairSums) {
        self.n += o.n;
        self.ab += o.ab;
        self.ab2 += o.ab2;
    }
    /// Covariance around the known means, with its standard error.
    fn centered_cov(&self) -> (f64, f64) {
        let m = self.ab / self.n;
        let v = self.ab2 / self.n - m * m;
        (m, (v / self.n).sqrt())
    }
}

fn covariance_monte_carlo() -> Outcome {
    let reps = 1_000_000;
    let cfg = SeriesConfig::default();
    let mut worst = 0.0f64;
    let mut where_worst = String::new();
    for (k, &s) in [-0.7f64, -0.3, 0.3, 0.7].iter().enumerate() {
        let c = (1.0 - s * s).sqrt();
        let cases: Vec<(f64, Side)> = [1.0, 2.0, 3.0].iter().flat_map(|&d| [(d, Side::OneSided), (d, Side::TwoSided)]).collect();
        let sums = run_chunked(
            reps,
            1000 + k as u64,
            || vec![PairSums::default(); cases.len()],
            |acc, rng, count| {
                for _ in 0..count {
                    let x: f64 = rng.sample(StandardNormal);
                    let e: f64 = rng.sample(StandardNormal);
                    let y = s * x + c * e;
                    for (slot, &(d, side)) in acc.iter_mut().zip(&cases) {
                        // Summands centered at their exact mean d.
                        slot.push(summand_from_z(d, side, x) - d, summand_from_z(d, side, y) - d);
                    }
                }
            },
            |a, b| a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y)),
        );
        for (acc, &(d, side)) in sums.iter().zip(&cases) {
            let (emp, se) = acc.centered_cov();
            let exact = cov_summands(d, d, s, side, &cfg).map_err(|e| e.to_string())?.value;
            let z = (emp - exact).abs() / se;
            if z > worst {
                worst = z;
                where_worst = format!("d={d} {} sigma={s}", side.as_str());
            }
        }
    }
    check(worst <= 3.0, format!("max |deviation| {worst:.2} s.e. ({where_worst}) over 24 settings, 1e6 draws each"))
}

fn tie_ratios(method: &str, sigma: &CorrMatrix, def: &GFisherDef, model: NullModel, moments: MomentStrategy, reps: usize, seed: u64, alphas: &[f64]) -> Result<Vec<f64>, String> {
    let setting = NullSetting::new(def.clone(), sigma.clone()).map_err(|e| e.to_string())?.with_moments(moments);
    let prepared = MethodRegistry::default().prepare(method, &setting).map_err(|e| e.to_string())?;
    let test = GFisherReplicate { def: def.clone(), method: prepared };
    let cfg = SimConfig::new(sigma.clone(), reps, seed, model, def.side).map_err(|e| e.to_string())?;
    let report = empirical_tie(&test, &cfg, alphas, TieMode::Threshold).map_err(|e| e.to_string())?;
    Ok(report.ratios)
}

fn desk_scale_tie() -> Outcome {
    let reps = 2_000_000;
    let alphas = [1e-3, 1e-4];
    let def = GFisherDef::fisher(10, Side::TwoSided).unwrap();
    // Skewness and kurtosis of T from 1e6 draws; at 1e5 their sampling noise
    // alone moves the MR tail at 1e-4 by a factor of two.
    let moments = MomentStrategy::empirical(1_000_000, DEFAULT_MOMENT_SEED);
    let mut ok = true;
    let mut lines = Vec::new();
    for (label, kind, layout, param) in [("Equal(0.5)-III", StructureKind::Equal, BlockLayout::III, 0.5), ("Poly(0.2)-I", StructureKind::Poly, BlockLayout::I, 0.2)] {
        let sigma = gen_structure(kind, layout, 10, param).unwrap().sigma;
        for method in ["gb", "mr", "hyb"] {
            let r = tie_ratios(method, &sigma, &def, NullModel::Gmm, moments.clone(), reps, 77, &alphas)?;
            let pass = if method == "gb" {
                r[0] > 1.3 && r[1] > 1.5
            } else {
                (0.6..=1.4).contains(&r[0]) && (0.5..=2.0).contains(&r[1])
            };
            ok &= pass;
            lines.push(format!("{label} {method} [{:.2}, {:.2}]", r[0], r[1]));
        }
    }
    check(ok, format!("ratios at alpha (1e-3, 1e-4): {}", lines.join("; ")))
}

fn q_exact_single_degree() -> Outcome {
    let mut worst = 0.0f64;
    let w: Vec<f64> = (0..10).map(|i| 0.5 + 0.15 * i as f64).collect();
    for (kind, layout, param) in [(StructureKind::Equal, BlockLayout::III, 0.5), (StructureKind::Poly, BlockLayout::I, 1.0), (StructureKind::InvEqual, BlockLayout::II, 0.9)] {
        let sigma = gen_structure(kind, layout, 10, param).unwrap().sigma;
        let def = GFisherDef::new(vec![1.0; 10], w.clone(), Side::TwoSided).unwrap();
        let setting = NullSetting::new(def, sigma.clone()).unwrap();
        let prep = MethodRegistry::default().prepare("q", &setting).map_err(|e| e.to_string())?;
        let ws: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let a = DMatrix::from_fn(10, 10, |i, j| ws[i] * sigma.get(i, j) * ws[j]);
        let lam: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().filter(|l| *l > 1e-12).collect();
        let r = lam.len();
        for t in [1.0, 5.0, 12.0, 25.0, 50.0, 90.0] {
            let direct = 1.0 - qfc(&lam, &vec![0.0; r], &vec![1; r], 0.0, t, 1_000_000, 1e-10).value;
            let got = prep.pvalue(t).map_err(|e| e.to_string())?.pvalue;
            worst = worst.max((got - direct).abs());
        }
    }
    check(worst <= 1e-8, format!("max |Q - direct| {worst:.2e} over three structures"))
}

fn omnibus_closed_forms() -> Outcome {
    // Two statistics on disjoint inputs with Σ = I are independent.
    let defs = vec![
        GFisherDef::new(vec![2.0; 4], vec![1.0, 1.0, 0.0, 0.0], Side::TwoSided).unwrap(),
        GFisherDef::new(vec![2.0; 4], vec![0.0, 0.0, 1.0, 1.0], Side::TwoSided).unwrap(),
    ];
    let panel = OmnibusPanel::new(defs, &CorrMatrix::identity(4), &OmnibusOptions::default()).map_err(|e| e.to_string())?;
    let mut minp_err = 0.0f64;
    for p in [1e-4, 0.001, 0.01, 0.05, 0.2, 0.5] {
        let got = pvalue_minp_at(&panel, p).map_err(|e| e.to_string())?.pvalue;
        minp_err = minp_err.max((got - (1.0 - (1.0 - p) * (1.0 - p))).abs());
    }
    let mut cc_err = 0.0f64;
    for q in [1e-10, 1e-6, 0.003, 0.037, 0.25, 0.5, 0.8, 0.999] {
        cc_err = cc_err.max((pvalue_cc(&[q]).map_err(|e| e.to_string())?.pvalue - q).abs());
    }
    check(minp_err <= 2e-4 && cc_err <= 1e-12, format!("minP max error {minp_err:.2e}, ccP round-trip max error {cc_err:.2e}"))
}

fn ggd_moments(s: &GgdSurrogate) -> MomentSummary {
    let r: Vec<f64> = (1..=4).map(|k| s.raw_moment(k)).collect();
    let m = r[0];
    let var = r[1] - m * m;
    let c3 = r[2] - 3.0 * m * r[1] + 2.0 * m.powi(3);
    let c4 = r[3] - 4.0 * m * r[2] + 6.0 * m * m * r[1] - 3.0 * m.powi(4);
    MomentSummary::full(m, var, c3 / var.powf(1.5), c4 / (var * var) - 3.0, MomentSource::Supplied).unwrap()
}

fn ggd_behavior() -> Outcome {
    let triples = [(5.0, 2.0, 1.0), (3.0, 1.5, 1.7), (0.8, 4.0, 0.6), (12.0, 0.5, 2.5), (2.0, 3.0, 1.0)];
    let mut worst = 0.0f64;
    for (a, theta, p) in triples {
        let truth = GgdSurrogate { shape: a, scale: theta, power: p, location: 0.0 };
        let fit = fit_ggd(&ggd_moments(&truth), GgdVariant::M123).map_err(|e| format!("({a}, {theta}, {p}): {e}"))?;
        let s = fit.surrogate;
        worst = worst.max((s.shape - a).abs()).max((s.scale - theta).abs()).max((s.power - p).abs());
    }
    // Strongly correlated two-sided Fisher statistic.
    let n = 20;
    let sigma = gen_structure(StructureKind::Equal, BlockLayout::I, n, 0.9).unwrap().sigma;
    let setting = NullSetting::new(GFisherDef::fisher(n, Side::TwoSided).unwrap(), sigma).unwrap();
    let failed: Vec<&str> = ["ggd123", "ggd234", "ggdmr"]
        .into_iter()
        .filter(|m| matches!(MethodRegistry::default().prepare(m, &setting), Err(Error::NoSolution { .. })))
        .collect();
    check(
        worst <= 1e-6 && !failed.is_empty(),
        format!("M123 max parameter error {worst:.2e}; no solution under Equal(0.9)-I n=20 for [{}]", failed.join(", ")),
    )
}

fn multivariate_t() -> Outcome {
    let reps = 1_000_000;
    let nu = 10.0;
    let sigma = gen_structure(StructureKind::Equal, BlockLayout::III, 10, 0.5).unwrap().sigma;
    let def = GFisherDef::fisher(10, Side::TwoSided).unwrap();
    let model = NullModel::MultivariateT { nu };
    let moments = MomentStrategy::Empirical { nreps: 1_000_000, seed: DEFAULT_MOMENT_SEED, model };
    let mr = tie_ratios("mr", &sigma, &def, model, moments.clone(), reps, 91, &[1e-4])?[0];
    let gb = tie_ratios("gb", &sigma, &def, model, moments, reps, 91, &[1e-4])?[0];
    check((0.5..=2.5).contains(&mr) && gb > 3.0, format!("ratios at alpha 1e-4: MR {mr:.2}, GB {gb:.2}"))
}

/// Fixed genotype-like design: n additive 0/1/2 columns from thresholded
/// correlated latent haplotypes, plus intercept, a binary and a normal control.
fn logit_design(big_n: usize, n: usize, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let latent = DMatrix::from_fn(n, n, |i, j| 0.7f64.powi((i as i32 - j as i32).abs()));
    let l = latent.cholesky().unwrap().l();
    let maf: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.5)).collect();
    let cut: Vec<f64> = maf.iter().map(|&q| norm_quantile(q)).collect();
    let mut x = DMatrix::zeros(big_n, n);
    for k in 0..big_n {
        for _ in 0..2 {
            let u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let h = &l * u;
            for j in 0..n {
                if h[j] < cut[j] {
                    x[(k, j)] += 1.0;
                }
            }
        }
    }
    let mut c = DMatrix::zeros(big_n, 3);
    let mut eta = Vec::with_capacity(big_n);
    for k in 0..big_n {
        let c1 = if rng.random::<f64>() < 0.494 { 1.0 } else { 0.0 };
        let c2: f64 = rng.sample(StandardNormal);
        c[(k, 0)] = 1.0;
        c[(k, 1)] = c1;
        c[(k, 2)] = c2;
        eta.push(-1.25 + 0.5 * c1 + 0.5 * c2);
    }
    (x, c, eta)
}

struct ScoreSums {
    z: Vec<f64>,
    zz: DMatrix<f64>,
    zz2: DMatrix<f64>,
    sigma: DMatrix<f64>,
    fisher: Vec<f64>,
    ok: usize,
    failed: usize,
}

fn glm_score_calibration() -> Outcome {
    let (big_n, n, reps) = (500, 20, 100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let (x, c, eta) = logit_design(big_n, n, &mut rng);
    let prob: Vec<f64> = eta.iter().map(|e| 1.0 / (1.0 + (-e).exp())).collect();
    let def = GFisherDef::fisher(n, Side::TwoSided).unwrap();
    let init = || ScoreSums { z: vec![0.0; n], zz: DMatrix::zeros(n, n), zz2: DMatrix::zeros(n, n), sigma: DMatrix::zeros(n, n), fisher: Vec::new(), ok: 0, failed: 0 };
    let sums = run_chunked(
        reps,
        6060,
        init,
        |acc, rng, count| {
            for _ in 0..count {
                let y = DVector::from_fn(big_n, |k, _| if rng.random::<f64>() < prob[k] { 1.0 } else { 0.0 });
                let panel = DesignData::new(y, x.clone(), c.clone(), Family::BinomialLogit).and_then(|d| marginal_score(&d));
                let Ok(panel) = panel else {
                    acc.failed += 1;
                    continue;
                };
                let z = &panel.z;
                for i in 0..n {
                    acc.z[i] += z[i];
                    for j in 0..n {
                        let p = z[i] * z[j];
                        acc.zz[(i, j)] += p;
                        acc.zz2[(i, j)] += p * p;
                    }
                }
                acc.sigma += panel.sigma_hat.matrix();
                acc.fisher.push(def.statistic_from_z(z));
                acc.ok += 1;
            }
        },
        |a, mut b| {
            a.z.iter_mut().zip(&b.z).for_each(|(x, y)| *x += y);
            a.zz += &b.zz;
            a.zz2 += &b.zz2;
            a.sigma += &b.sigma;
            a.fisher.append(&mut b.fisher);
            a.ok += b.ok;
            a.failed += b.failed;
        },
    );
    let m = sums.ok as f64;
    let sigma_bar = sums.sigma / m;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let emp = sums.zz[(i, j)] / m - sums.z[i] * sums.z[j] / (m * m);
            let mean_p = sums.zz[(i, j)] / m;
            let se = ((sums.zz2[(i, j)] / m - mean_p * mean_p) / m).sqrt();
            worst = worst.max((emp - sigma_bar[(i, j)]).abs() / se);
        }
    }
    // Downstream: MR p-values with the averaged correlation estimate.
    let sigma = CorrMatrix::new(sigma_bar).map_err(|e| e.to_string())?;
    let setting = NullSetting::new(def.clone(), sigma).map_err(|e| e.to_string())?;
    let prepared = MethodRegistry::default().prepare("mr", &setting).map_err(|e| e.to_string())?;
    let test = GFisherReplicate { def, method: prepared };
    let alpha = 1e-2;
    let crit = critical_value(&test, alpha).map_err(|e| e.to_string())?;
    let rejections = sums.fisher.iter().filter(|&&t| t >= crit).count();
    let ratio = rejections as f64 / m / alpha;
    check(
        worst <= 4.0 && (0.8..=1.2).contains(&ratio),
        format!("cov max deviation {worst:.2} s.e.; MR ratio at 1e-2 {ratio:.3} ({} fits, {} failed)", sums.ok, sums.failed),
    )
}

/// Criteria whose thresholds the implementation does not reach. They still
/// run and print FAIL; only an unexpected failure (or an unexpected pass)
/// makes the suite exit nonzero.
const KNOWN_SHORTFALLS: &[usize] = &[9];

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("one-sided cubic covariance coefficients", one_sided_cubic),
        ("two-sided even-polynomial coefficients", two_sided_even_poly),
        ("independence exactness", independence_exact),
        ("covariance Monte Carlo agreement", covariance_monte_carlo),
        ("desk-scale type I error ordering", desk_scale_tie),
        ("Q exactness at one degree of freedom", q_exact_single_degree),
        ("omnibus closed forms", omnibus_closed_forms),
        ("generalized gamma behavior", ggd_behavior),
        ("multivariate-t robustness", multivariate_t),
        ("GLM score-statistic calibration", glm_score_calibration),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => {
                if KNOWN_SHORTFALLS.contains(&id) {
                    unexpected += 1;
                    println!("PASS {id:>2} {name}: {d} [{secs:.1}s] (listed as a known shortfall; update the list)");
                } else {
                    println!("PASS {id:>2} {name}: {d} [{secs:.1}s]");
                }
            }
            Err(d) => {
                if KNOWN_SHORTFALLS.contains(&id) {
                    println!("FAIL {id:>2} {name}: {d} [{secs:.1}s] (known shortfall)");
                } else {
                    unexpected += 1;
                    println!("FAIL {id:>2} {name}: {d} [{secs:.1}s]");
                }
            }
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
