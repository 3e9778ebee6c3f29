//! Davies' algorithm for the distribution of Σ λ_j χ²_{n_j}(δ_j) + σ X,
//! a direct port of the published qfc routine (Applied Statistics AS 155).

use std::f64::consts::PI;

const LOG28: f64 = 0.0866; // log(2.0) / 8.0

/// Result of one inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaviesResult {
    /// P(Q < c).
    pub value: f64,
    /// 0 ok; 1 accuracy not reachable within the term limit; 2 round-off may
    /// matter; 3 invalid parameters; 4 iteration budget exhausted.
    pub ifault: i32,
    /// Estimated bound on the integration error from the trace.
    pub error_sum: f64,
    pub terms: usize,
}

struct Exhausted;

struct State<'a> {
    lb: &'a [f64],
    nc: &'a [f64],
    n: &'a [i32],
    th: Vec<usize>,
    ndtsrt: bool,
    fail: bool,
    sigsq: f64,
    lmax: f64,
    lmin: f64,
    mean: f64,
    c: f64,
    intl: f64,
    ersm: f64,
    count: usize,
    lim: usize,
}

#[inline]
fn exp1(x: f64) -> f64 {
    if x < -50.0 {
        0.0
    } else {
        x.exp()
    }
}

/// log(1 + x) if `first`, else log(1 + x) − x.
fn log1(x: f64, first: bool) -> f64 {
    if x.abs() > 0.1 {
        if first {
            (1.0 + x).ln()
        } else {
            (1.0 + x).ln() - x
        }
    } else {
        let mut y = x / (2.0 + x);
        let mut term = 2.0 * y * y * y;
        let mut k = 3.0;
        let mut s = if first { 2.0 } else { -x } * y;
        y *= y;
        let mut s1 = s + term / k;
        while s1 != s {
            k += 2.0;
            term *= y;
            s = s1;
            s1 = s + term / k;
        }
        s
    }
}

impl<'a> State<'a> {
    fn counter(&mut self) -> Result<(), Exhausted> {
        self.count += 1;
        if self.count > self.lim {
            Err(Exhausted)
        } else {
            Ok(())
        }
    }

    fn order(&mut self) {
        let r = self.lb.len();
        for j in 0..r {
            let lj = self.lb[j].abs();
            let mut k = j as isize - 1;
            while k >= 0 {
                if lj > self.lb[self.th[k as usize]].abs() {
                    self.th[(k + 1) as usize] = self.th[k as usize];
                    k -= 1;
                } else {
                    break;
                }
            }
            self.th[(k + 1) as usize] = j;
        }
        self.ndtsrt = false;
    }

    /// Bound on the tail probability via the mgf; cutoff returned in the tuple.
    fn errbd(&mut self, u: f64) -> Result<(f64, f64), Exhausted> {
        self.counter()?;
        let mut xconst = u * self.sigsq;
        let mut sum1 = u * xconst;
        let u = 2.0 * u;
        for j in (0..self.lb.len()).rev() {
            let nj = self.n[j] as f64;
            let lj = self.lb[j];
            let ncj = self.nc[j];
            let x = u * lj;
            let y = 1.0 - x;
            xconst += lj * (ncj / y + nj) / y;
            sum1 += ncj * (x / y) * (x / y) + nj * (x * x / y + log1(-x, false));
        }
        Ok((exp1(-0.5 * sum1), xconst))
    }

    fn ctff(&mut self, accx: f64, upn: &mut f64) -> Result<f64, Exhausted> {
        let mut u2 = *upn;
        let mut u1 = 0.0;
        let mut c1 = self.mean;
        let rb = 2.0 * if u2 > 0.0 { self.lmax } else { self.lmin };
        let mut c2;
        loop {
            let u = u2 / (1.0 + u2 * rb);
            let (e, cx) = self.errbd(u)?;
            c2 = cx;
            if e <= accx {
                break;
            }
            u1 = u2;
            c1 = c2;
            u2 *= 2.0;
        }
        let mut u = (c1 - self.mean) / (c2 - self.mean);
        while u < 0.9 {
            u = (u1 + u2) / 2.0;
            let (e, xconst) = self.errbd(u / (1.0 + u * rb))?;
            if e > accx {
                u1 = u;
                c1 = xconst;
            } else {
                u2 = u;
                c2 = xconst;
            }
            u = (c1 - self.mean) / (c2 - self.mean);
        }
        *upn = u2;
        Ok(c2)
    }

    /// Bound on integration error from truncating at u.
    fn truncation(&mut self, u: f64, tausq: f64) -> Result<f64, Exhausted> {
        self.counter()?;
        let mut sum1 = 0.0;
        let mut prod2 = 0.0;
        let mut prod3 = 0.0;
        let mut s = 0i64;
        let sum2 = (self.sigsq + tausq) * u * u;
        let mut prod1 = 2.0 * sum2;
        let u = 2.0 * u;
        for j in 0..self.lb.len() {
            let lj = self.lb[j];
            let ncj = self.nc[j];
            let nj = self.n[j];
            let x = (u * lj) * (u * lj);
            sum1 += ncj * x / (1.0 + x);
            if x > 1.0 {
                prod2 += nj as f64 * x.ln();
                prod3 += nj as f64 * log1(x, true);
                s += nj as i64;
            } else {
                prod1 += nj as f64 * log1(x, true);
            }
        }
        sum1 *= 0.5;
        prod2 += prod1;
        prod3 += prod1;
        let x = exp1(-sum1 - 0.25 * prod2) / PI;
        let y = exp1(-sum1 - 0.25 * prod3) / PI;
        let mut err1 = if s == 0 { 1.0 } else { x * 2.0 / s as f64 };
        let err2 = if prod3 > 1.0 { 2.5 * y } else { 1.0 };
        if err2 < err1 {
            err1 = err2;
        }
        let x = 0.5 * sum2;
        let err2 = if x <= y { 1.0 } else { y / x };
        Ok(if err1 < err2 { err1 } else { err2 })
    }

    /// u with truncation(u) ≤ accx and truncation(u/1.2) > accx.
    fn findu(&mut self, utx: &mut f64, accx: f64) -> Result<(), Exhausted> {
        const DIVIS: [f64; 4] = [2.0, 1.4, 1.2, 1.1];
        let mut ut = *utx;
        let mut u = ut / 4.0;
        if self.truncation(u, 0.0)? > accx {
            u = ut;
            while self.truncation(u, 0.0)? > accx {
                ut *= 4.0;
                u = ut;
            }
        } else {
            ut = u;
            u /= 4.0;
            while self.truncation(u, 0.0)? <= accx {
                ut = u;
                u /= 4.0;
            }
        }
        for d in DIVIS {
            let u = ut / d;
            if self.truncation(u, 0.0)? <= accx {
                ut = u;
            }
        }
        *utx = ut;
        Ok(())
    }

    fn integrate(&mut self, nterm: usize, interv: f64, tausq: f64, mainx: bool) {
        let inpi = interv / PI;
        for k in (0..=nterm).rev() {
            let u = (k as f64 + 0.5) * interv;
            let mut sum1 = -2.0 * u * self.c;
            let mut sum2 = sum1.abs();
            let mut sum3 = -0.5 * self.sigsq * u * u;
            for j in (0..self.lb.len()).rev() {
                let nj = self.n[j] as f64;
                let x = 2.0 * self.lb[j] * u;
                let y = x * x;
                sum3 -= 0.25 * nj * log1(y, true);
                let y = self.nc[j] * x / (1.0 + y);
                let z = nj * x.atan() + y;
                sum1 += z;
                sum2 += z.abs();
                sum3 -= 0.5 * x * y;
            }
            let mut x = inpi * exp1(sum3) / u;
            if !mainx {
                x *= 1.0 - exp1(-0.5 * tausq * u * u);
            }
            self.intl += (0.5 * sum1).sin() * x;
            self.ersm += 0.5 * sum2 * x;
        }
    }

    /// Coefficient of tausq in the error when the convergence factor is used at x.
    fn cfe(&mut self, x: f64) -> Result<f64, Exhausted> {
        self.counter()?;
        if self.ndtsrt {
            self.order();
        }
        let mut axl = x.abs();
        let sxl = if x > 0.0 { 1.0 } else { -1.0 };
        let mut sum1 = 0.0;
        for j in (0..self.lb.len()).rev() {
            let t = self.th[j];
            if self.lb[t] * sxl > 0.0 {
                let lj = self.lb[t].abs();
                let axl1 = axl - lj * (self.n[t] as f64 + self.nc[t]);
                let axl2 = lj / LOG28;
                if axl1 > axl2 {
                    axl = axl1;
                } else {
                    if axl > axl2 {
                        axl = axl2;
                    }
                    sum1 = (axl - axl1) / lj;
                    for k in (0..j).rev() {
                        sum1 += self.n[self.th[k]] as f64 + self.nc[self.th[k]];
                    }
                    break;
                }
            }
        }
        if sum1 > 100.0 {
            self.fail = true;
            Ok(1.0)
        } else {
            Ok(2f64.powf(sum1 / 4.0) / (PI * axl * axl))
        }
    }
}

/// P(Σ λ_j χ²_{n_j}(δ_j) + σ N(0,1) < c) to absolute accuracy `acc`, using
/// at most `lim` integration terms.
pub fn qfc(lb: &[f64], nc: &[f64], n: &[i32], sigma: f64, c: f64, lim: usize, acc: f64) -> DaviesResult {
    let r = lb.len();
    let mut st = State {
        lb,
        nc,
        n,
        th: vec![0; r],
        ndtsrt: true,
        fail: false,
        sigsq: sigma * sigma,
        lmax: 0.0,
        lmin: 0.0,
        mean: 0.0,
        c,
        intl: 0.0,
        ersm: 0.0,
        count: 0,
        lim,
    };
    match run(&mut st, sigma, acc) {
        Ok(mut res) => {
            res.error_sum = st.ersm;
            res
        }
        Err(Exhausted) => DaviesResult { value: -1.0, ifault: 4, error_sum: st.ersm, terms: st.count },
    }
}

fn run(st: &mut State, sigma: f64, acc: f64) -> Result<DaviesResult, Exhausted> {
    let done = |value: f64, ifault: i32, terms: usize| DaviesResult { value, ifault, error_sum: 0.0, terms };
    let r = st.lb.len();
    let mut acc1 = acc;
    let mut xlim = st.lim as f64;
    let mut sd = st.sigsq;
    for j in 0..r {
        let nj = st.n[j];
        let lj = st.lb[j];
        let ncj = st.nc[j];
        if nj < 0 || ncj < 0.0 {
            return Ok(done(-1.0, 3, 0));
        }
        sd += lj * lj * (2.0 * nj as f64 + 4.0 * ncj);
        st.mean += lj * (nj as f64 + ncj);
        if st.lmax < lj {
            st.lmax = lj;
        } else if st.lmin > lj {
            st.lmin = lj;
        }
    }
    if sd == 0.0 {
        return Ok(done(if st.c > 0.0 { 1.0 } else { 0.0 }, 0, 0));
    }
    if st.lmin == 0.0 && st.lmax == 0.0 && sigma == 0.0 {
        return Ok(done(-1.0, 3, 0));
    }
    let sd = sd.sqrt();
    let almx = if st.lmax < -st.lmin { -st.lmin } else { st.lmax };

    let mut utx = 16.0 / sd;
    let mut up = 4.5 / sd;
    let mut un = -up;
    let mut terms = 0usize;
    st.findu(&mut utx, 0.5 * acc1)?;
    if st.c != 0.0 && almx > 0.07 * sd {
        let tausq = 0.25 * acc1 / st.cfe(st.c)?;
        if st.fail {
            st.fail = false;
        } else if st.truncation(utx, tausq)? < 0.2 * acc1 {
            st.sigsq += tausq;
            st.findu(&mut utx, 0.25 * acc1)?;
        }
    }
    acc1 *= 0.5;

    loop {
        let d1 = st.ctff(acc1, &mut up)? - st.c;
        if d1 < 0.0 {
            return Ok(done(1.0, 0, terms));
        }
        let d2 = st.c - st.ctff(acc1, &mut un)?;
        if d2 < 0.0 {
            return Ok(done(0.0, 0, terms));
        }
        let intv = 2.0 * PI / d1.max(d2);
        let xnt = utx / intv;
        let xntm = 3.0 / acc1.sqrt();
        let mut go_main = true;
        if xnt > xntm * 1.5 {
            if xntm > xlim {
                return Ok(done(-1.0, 1, terms));
            }
            let ntm = (xntm + 0.5).floor() as usize;
            let intv1 = utx / ntm as f64;
            let x = 2.0 * PI / intv1;
            if x > st.c.abs() {
                let tausq = 0.33 * acc1 / (1.1 * (st.cfe(st.c - x)? + st.cfe(st.c + x)?));
                if !st.fail {
                    acc1 *= 0.67;
                    st.integrate(ntm, intv1, tausq, false);
                    xlim -= xntm;
                    st.sigsq += tausq;
                    terms += ntm + 1;
                    st.findu(&mut utx, 0.25 * acc1)?;
                    acc1 *= 0.75;
                    go_main = false;
                }
            }
        }
        if !go_main {
            continue;
        }
        if xnt > xlim {
            return Ok(done(-1.0, 1, terms));
        }
        let nt = (xnt + 0.5).floor() as usize;
        st.integrate(nt, intv, 0.0, true);
        terms += nt + 1;
        let value = 0.5 - st.intl;
        let up = st.ersm;
        let x = up + acc / 10.0;
        let mut ifault = 0;
        for rat in [1.0, 2.0, 4.0, 8.0] {
            if rat * x == rat * up {
                ifault = 2;
            }
        }
        return Ok(done(value, ifault, terms));
    }
}
