//! Binomial log-pmf via the saddle-point expansion (Loader), plus exact tails.

use crate::scalar::{KahanSum, Real};

const STIRLERR_SMALL: usize = 16;

/// `ln n! − [ (n + ½) ln n − n + ½ ln 2π ]`.
pub fn stirlerr<T: Real>(n: u64) -> T {
    if (n as usize) < STIRLERR_SMALL {
        if n == 0 {
            // lim: ln Γ(1) − ½ ln 2π with the n·ln n terms vanishing.
            return -T::lit(0.5) * (T::lit(2.0) * T::PI()).ln();
        }
        let nf = T::from_count(n);
        let lnfact: KahanSum<T> = (2..=n).map(|k| T::from_count(k).ln()).collect();
        return lnfact.total() - ((nf + T::lit(0.5)) * nf.ln() - nf + T::lit(0.5) * (T::lit(2.0) * T::PI()).ln());
    }
    let nf = T::from_count(n);
    let n2 = nf * nf;
    let s0 = T::lit(1.0 / 12.0);
    let s1 = T::lit(1.0 / 360.0);
    let s2 = T::lit(1.0 / 1260.0);
    let s3 = T::lit(1.0 / 1680.0);
    let s4 = T::lit(1.0 / 1188.0);
    (s0 - (s1 - (s2 - (s3 - s4 / n2) / n2) / n2) / n2) / nf
}

/// Deviance term `x ln(x/np) + np − x`, computed stably near `x ≈ np`.
pub fn bd0<T: Real>(x: T, np: T) -> T {
    if (x - np).abs() < T::lit(0.1) * (x + np) {
        let mut v = (x - np) / (x + np);
        let s0 = (x - np) * v;
        let mut s = s0;
        let mut ej = T::lit(2.0) * x * v;
        v = v * v;
        let mut j = 1u64;
        loop {
            ej = ej * v;
            let s1 = s + ej / T::from_count(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1;
            if j > 1000 {
                return s;
            }
        }
    }
    x * (x / np).ln() + np - x
}

/// `ln P[Bin(n, p) = k]`.
pub fn ln_pmf<T: Real>(k: u64, n: u64, p: T) -> T {
    let q = T::one() - p;
    if k > n {
        return T::neg_infinity();
    }
    if p == T::zero() {
        return if k == 0 { T::zero() } else { T::neg_infinity() };
    }
    if q == T::zero() {
        return if k == n { T::zero() } else { T::neg_infinity() };
    }
    let nf = T::from_count(n);
    if k == 0 {
        return nf * q.ln();
    }
    if k == n {
        return nf * p.ln();
    }
    let kf = T::from_count(k);
    let rest = T::from_count(n - k);
    let lc = stirlerr::<T>(n) - stirlerr::<T>(k) - stirlerr::<T>(n - k) - bd0(kf, nf * p) - bd0(rest, nf * q);
    let lf = (T::lit(2.0) * T::PI()).ln() + kf.ln() + (T::one() - kf / nf).ln();
    lc - T::lit(0.5) * lf
}

/// `P[Bin(n,p) ≤ a]`, summed downward from `a` until terms vanish.
pub fn lower_tail<T: Real>(a: u64, n: u64, p: T) -> T {
    let mut acc = KahanSum::new();
    let mut k = a.min(n) as i64;
    while k >= 0 {
        let t = ln_pmf::<T>(k as u64, n, p).exp();
        acc.add(t);
        if t <= acc.total() * T::epsilon() * T::lit(1e-3) && (k as u64) < n {
            break;
        }
        k -= 1;
    }
    acc.total()
}

/// `P[Bin(n,p) ≥ b]`, summed upward from `b` until terms vanish.
pub fn upper_tail<T: Real>(b: u64, n: u64, p: T) -> T {
    let mut acc = KahanSum::new();
    let mut k = b;
    while k <= n {
        let t = ln_pmf::<T>(k, n, p).exp();
        acc.add(t);
        if t <= acc.total() * T::epsilon() * T::lit(1e-3) && k > b {
            break;
        }
        k += 1;
    }
    acc.total()
}
