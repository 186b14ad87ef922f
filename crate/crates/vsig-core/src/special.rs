//! Special functions backing the kernel weight formulas: log-Gamma,
//! regularized incomplete Beta, lower incomplete Gamma, and the φ_n family
//! of the exponential kernel.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpecialError {
    #[error("argument {name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("continued fraction did not converge")]
    NoConvergence,
}

/// Lanczos g=7, n=9 coefficients.
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 8] = [
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// log Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = 0.99999999999980993;
    for (i, &c) in LANCZOS.iter().enumerate() {
        a += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Γ(x) for x > 0.
pub fn gamma_fn(x: f64) -> f64 {
    ln_gamma(x).exp()
}

const CF_MAX_ITER: usize = 500;
const CF_TINY: f64 = 1e-300;

/// Continued fraction for the incomplete Beta (Lentz's algorithm).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64, SpecialError> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok(h);
        }
    }
    Err(SpecialError::NoConvergence)
}

/// Regularized incomplete Beta `I_x(a, b)` for `x ∈ [0,1]`, `a, b > 0`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64, SpecialError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(SpecialError::OutOfRange {
            name: "x",
            value: x,
            range: "[0, 1]",
        });
    }
    if a <= 0.0 {
        return Err(SpecialError::OutOfRange {
            name: "a",
            value: a,
            range: "(0, ∞)",
        });
    }
    if b <= 0.0 {
        return Err(SpecialError::OutOfRange {
            name: "b",
            value: b,
            range: "(0, ∞)",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(a, b, x)? / a)
    } else {
        Ok(1.0 - front * beta_cf(b, a, 1.0 - x)? / b)
    }
}

/// Lower incomplete Gamma `γ(a, x) = ∫_0^x e^{-v} v^{a-1} dv` for `a > 0`, `x >= 0`.
pub fn lower_inc_gamma(a: f64, x: f64) -> Result<f64, SpecialError> {
    Ok(reg_lower_inc_gamma(a, x)? * gamma_fn(a))
}

/// Regularized form `P(a, x) = γ(a, x)/Γ(a)`.
pub fn reg_lower_inc_gamma(a: f64, x: f64) -> Result<f64, SpecialError> {
    if a <= 0.0 {
        return Err(SpecialError::OutOfRange {
            name: "a",
            value: a,
            range: "(0, ∞)",
        });
    }
    if x < 0.0 {
        return Err(SpecialError::OutOfRange {
            name: "x",
            value: x,
            range: "[0, ∞)",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        // series
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..CF_MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-17 {
                let ln_pre = -x + a * x.ln() - ln_gamma(a);
                return Ok(sum * ln_pre.exp());
            }
        }
        Err(SpecialError::NoConvergence)
    } else {
        // continued fraction for Q(a, x)
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / CF_TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=CF_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < CF_TINY {
                d = CF_TINY;
            }
            c = b + an / c;
            if c.abs() < CF_TINY {
                c = CF_TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                let ln_pre = -x + a * x.ln() - ln_gamma(a);
                return Ok(1.0 - ln_pre.exp() * h);
            }
        }
        Err(SpecialError::NoConvergence)
    }
}

/// `φ_n(δ) = (1/(n-1)!) ∫_0^1 e^{δ(1-u)} u^{n-1} du = Σ_{k>=0} δ^k/(n+k)!`.
///
/// The series terms decrease monotonically while `δ <= n + k + 1`, so for
/// `δ <= n + 1` the series is summed directly. For larger `δ` the upward
/// recurrence `φ_{n+1} = (φ_n − 1/n!)/δ` cancels at most one bit per step
/// and is used instead.
pub fn varphi_n(delta: f64, n: usize) -> f64 {
    assert!(n >= 1, "φ_n defined for n >= 1");
    assert!(delta >= 0.0, "φ_n used with δ >= 0");
    if delta <= n as f64 + 1.0 {
        let mut term = 1.0;
        for k in 1..=n {
            term /= k as f64;
        }
        let mut sum = term;
        let mut k = 0usize;
        loop {
            k += 1;
            term *= delta / (n + k) as f64;
            sum += term;
            if term < sum * 1e-17 || k > 200 {
                return sum;
            }
        }
    }
    let mut phi = (delta.exp() - 1.0) / delta;
    let mut fact = 1.0;
    for k in 1..n {
        phi = (phi - 1.0 / fact) / delta;
        fact *= (k + 1) as f64;
        // fact = (k+1)! after the update; the subtraction uses 1/k!
    }
    phi
}
