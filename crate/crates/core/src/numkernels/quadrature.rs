//! Adaptive Gauss–Kronrod integration against the standard normal weight.

use super::normal::norm_pdf;
use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_029_894,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

/// A fixed rule on a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub domain: (f64, f64),
}

impl QuadratureRule {
    /// The 21-point Kronrod rule mapped to [a, b].
    pub fn kronrod21(a: f64, b: f64) -> Self {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut nodes = Vec::with_capacity(21);
        let mut weights = Vec::with_capacity(21);
        for j in 0..10 {
            nodes.push(c - h * XGK[j]);
            weights.push(h * WGK[j]);
        }
        nodes.push(c);
        weights.push(h * WGK[10]);
        for j in (0..10).rev() {
            nodes.push(c + h * XGK[j]);
            weights.push(h * WGK[j]);
        }
        QuadratureRule { nodes, weights, domain: (a, b) }
    }

    pub fn apply(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Settings for the φ-weighted integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Integrate over [−half_width, half_width].
    pub half_width: f64,
    /// Absolute tolerance; vector mode scales it by max(1, |I_k|).
    pub tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { half_width: 12.0, tol: 1e-10, max_subdivisions: 4000 }
    }
}

impl QuadConfig {
    pub fn with_tol(tol: f64) -> Self {
        QuadConfig { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub abs_err: f64,
}

struct Segment {
    a: f64,
    b: f64,
    val: Vec<f64>,
    err: Vec<f64>,
    // ∫|f|w over the segment, for the roundoff floor.
    absval: Vec<f64>,
}

/// One Kronrod/Gauss pass on [a, b] for an m-vector integrand times `weight`.
fn kronrod_vec<F>(f: &mut F, weight: fn(f64) -> f64, a: f64, b: f64, m: usize, buf: &mut [f64]) -> Segment
where
    F: FnMut(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut ab = vec![0.0; m];
    let mut eval = |x: f64, wk: f64, wg: f64, k: &mut [f64], g: &mut [f64], ab: &mut [f64], buf: &mut [f64]| {
        f(x, buf);
        let w = weight(x);
        for i in 0..m {
            let v = buf[i] * w;
            k[i] += wk * v;
            g[i] += wg * v;
            ab[i] += wk * v.abs();
        }
    };
    eval(c, WGK[10], 0.0, &mut k, &mut g, &mut ab, buf);
    for j in 0..10 {
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        let dx = h * XGK[j];
        eval(c - dx, WGK[j], wg, &mut k, &mut g, &mut ab, buf);
        eval(c + dx, WGK[j], wg, &mut k, &mut g, &mut ab, buf);
    }
    let val: Vec<f64> = k.iter().map(|v| v * h).collect();
    let err: Vec<f64> = k.iter().zip(&g).map(|(kv, gv)| ((kv - gv) * h).abs()).collect();
    let absval: Vec<f64> = ab.iter().map(|v| v * h.abs()).collect();
    Segment { a, b, val, err, absval }
}

/// Integrate each component of a vector integrand against φ in one adaptive pass.
///
/// Component k is accepted once its error estimate is at most
/// `tol · max(1, |I_k|)`, or once it reaches the floating-point floor
/// `50 ε ∫|f_k|φ` set by cancellation. On failure the error carries the worst component.
pub fn integrate_gauss_weight_vec<F>(f: F, m: usize, cfg: &QuadConfig) -> Result<Vec<QuadEstimate>>
where
    F: FnMut(f64, &mut [f64]),
{
    let l = cfg.half_width;
    adaptive(f, norm_pdf, &[-l, 0.0, l], m, cfg.tol, cfg.max_subdivisions, true)
}

/// Plain ∫_a^b f(x) dx with absolute tolerance `tol` (or the roundoff floor).
pub fn integrate_interval<F>(mut f: F, a: f64, b: f64, tol: f64, max_subdivisions: usize) -> Result<QuadEstimate>
where
    F: FnMut(f64) -> f64,
{
    adaptive(|x, o| o[0] = f(x), |_| 1.0, &[a, b], 1, tol, max_subdivisions, false).map(|r| r[0])
}

#[derive(PartialEq)]
struct Keyed(f64, usize);
impl Eq for Keyed {}
impl PartialOrd for Keyed {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Keyed {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0).then(o.1.cmp(&self.1))
    }
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F>(
    mut f: F,
    weight: fn(f64) -> f64,
    breaks: &[f64],
    m: usize,
    tol: f64,
    max_subdivisions: usize,
    relative: bool,
) -> Result<Vec<QuadEstimate>>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut buf = vec![0.0; m];
    let mut segs: Vec<Option<Segment>> = breaks
        .windows(2)
        .map(|w| Some(kronrod_vec(&mut f, weight, w[0], w[1], m, &mut buf)))
        .collect();
    let mut live = segs.len();
    let totals = |segs: &[Option<Segment>]| {
        let mut total = vec![0.0; m];
        let mut errs = vec![0.0; m];
        let mut absv = vec![0.0; m];
        for s in segs.iter().flatten() {
            for i in 0..m {
                total[i] += s.val[i];
                errs[i] += s.err[i];
                absv[i] += s.absval[i];
            }
        }
        (total, errs, absv)
    };
    let scale_of = |total: &[f64], absv: &[f64]| -> Vec<f64> {
        // Cancellation in ∫fw makes errors below ~eps·∫|f|w meaningless.
        (0..m)
            .map(|i| {
                let t = if relative { tol * total[i].abs().max(1.0) } else { tol };
                t.max(ROUNDOFF * absv[i])
            })
            .collect()
    };
    let (mut total, mut errs, mut absv) = totals(&segs);
    let mut scale = scale_of(&total, &absv);
    let key = |s: &Segment, scale: &[f64]| (0..m).map(|i| s.err[i] / scale[i]).fold(0.0, f64::max);
    let mut heap: std::collections::BinaryHeap<Keyed> =
        segs.iter().enumerate().map(|(j, s)| Keyed(key(s.as_ref().unwrap(), &scale), j)).collect();
    let mut since_resum = 0;
    loop {
        let done = (0..m).all(|i| errs[i] <= scale[i]);
        if done || live >= max_subdivisions {
            // Resum exactly to shed running-total drift.
            let (t, e, a) = totals(&segs);
            let sc = scale_of(&t, &a);
            let done = (0..m).all(|i| e[i] <= sc[i]);
            if done || live >= max_subdivisions {
                let out: Vec<QuadEstimate> = (0..m).map(|i| QuadEstimate { value: t[i], abs_err: e[i] }).collect();
                if done {
                    return Ok(out);
                }
                let worst = (0..m).max_by(|&i, &j| (e[i] / sc[i]).total_cmp(&(e[j] / sc[j]))).unwrap_or(0);
                return Err(Error::Quadrature { value: t[worst], achieved: e[worst] });
            }
            total = t;
            errs = e;
            absv = a;
        }
        let Some(Keyed(_, idx)) = heap.pop() else {
            return Err(Error::Quadrature { value: total[0], achieved: errs[0] });
        };
        let s = segs[idx].take().expect("heap holds live segments");
        let mid = 0.5 * (s.a + s.b);
        let left = kronrod_vec(&mut f, weight, s.a, mid, m, &mut buf);
        let right = kronrod_vec(&mut f, weight, mid, s.b, m, &mut buf);
        for i in 0..m {
            total[i] += left.val[i] + right.val[i] - s.val[i];
            errs[i] += left.err[i] + right.err[i] - s.err[i];
            absv[i] += left.absval[i] + right.absval[i] - s.absval[i];
        }
        since_resum += 1;
        if since_resum >= 64 {
            since_resum = 0;
            let (t, e, a) = totals(&segs);
            total = t;
            errs = e;
            absv = a;
            for i in 0..m {
                total[i] += left.val[i] + right.val[i];
                errs[i] += left.err[i] + right.err[i];
                absv[i] += left.absval[i] + right.absval[i];
            }
        }
        scale = scale_of(&total, &absv);
        heap.push(Keyed(key(&left, &scale), segs.len()));
        segs.push(Some(left));
        heap.push(Keyed(key(&right, &scale), segs.len()));
        segs.push(Some(right));
        live += 1;
    }
}

/// ∫ f(z) φ(z) dz with absolute error estimate at most `cfg.tol`
/// (or at the roundoff floor when cancellation prevents that).
pub fn integrate_gauss_weight_with<F>(mut f: F, cfg: &QuadConfig) -> Result<QuadEstimate>
where
    F: FnMut(f64) -> f64,
{
    let l = cfg.half_width;
    adaptive(|z, o| o[0] = f(z), norm_pdf, &[-l, 0.0, l], 1, cfg.tol, cfg.max_subdivisions, false).map(|r| r[0])
}

/// ∫ f(z) φ(z) dz over the default domain.
pub fn integrate_gauss_weight<F>(f: F, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_gauss_weight_with(f, &QuadConfig::with_tol(tol)).map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernels::hermite::hermite;

    #[test]
    fn kronrod_rule_is_exact_for_degree_31() {
        let r = QuadratureRule::kronrod21(-1.0, 1.0);
        assert!((r.apply(|x| x.powi(30)) - 2.0 / 31.0).abs() < 1e-14);
        assert!((r.apply(|x| x.powi(31))).abs() < 1e-14);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rule_invariants() {
        let r = QuadratureRule::kronrod21(-3.0, 5.0);
        assert_eq!(r.nodes.len(), r.weights.len());
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn normal_moments() {
        assert!((integrate_gauss_weight(|_| 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        assert!((integrate_gauss_weight(|z| z * z, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        assert!((integrate_gauss_weight(|z| z.powi(4), 1e-10).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn hermite_orthogonality() {
        let v = integrate_gauss_weight(|z| hermite(3, z).unwrap().powi(2), 1e-12).unwrap();
        assert!((v - 6.0).abs() < 1e-10);
        let mut fact = 1.0;
        for k in 0..=12usize {
            if k > 0 {
                fact *= k as f64;
            }
            for j in 0..=12usize {
                let v = integrate_gauss_weight(
                    |z| hermite(j, z).unwrap() * hermite(k, z).unwrap(),
                    1e-10,
                )
                .unwrap();
                let want = if j == k { fact } else { 0.0 };
                assert!((v - want).abs() < 1e-8 * want.max(1.0), "j={j} k={k} v={v}");
            }
        }
    }

    #[test]
    fn plain_interval() {
        let e = integrate_interval(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 100).unwrap();
        assert!((e.value - 2.0).abs() < 1e-13);
        let e = integrate_interval(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 2000).unwrap();
        assert!((e.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reports_nonconvergence() {
        let cfg = QuadConfig { half_width: 12.0, tol: 1e-14, max_subdivisions: 2 };
        let r = integrate_gauss_weight_with(|z| (50.0 * z).sin().abs(), &cfg);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
