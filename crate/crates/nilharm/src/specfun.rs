//! Special functions: reduced Bessel, Laguerre, normalized Laguerre,
//! Hermite-Weber, plus the discrete shift operators acting on integer-indexed
//! sequences of Laguerre values.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Log-gamma for `x > 0` (Lanczos, g = 7, 9 coefficients).
pub fn gamma_ln(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "gamma_ln requires x > 0, got {x}");
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - gamma_ln(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Generalized binomial `C(n + alpha, n) = Gamma(n+alpha+1) / (Gamma(n+1) Gamma(alpha+1))`.
pub fn binom_gen(n: u32, alpha: f64) -> f64 {
    (gamma_ln(n as f64 + alpha + 1.0) - gamma_ln(n as f64 + 1.0) - gamma_ln(alpha + 1.0)).exp()
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} is not finite: {x}")))
    }
}

/// Reduced Bessel function `Gamma(alpha+1) (z/2)^(-alpha) J_alpha(z)`,
/// normalized to 1 at the origin and bounded by 1 on the half-line.
///
/// Power series for small argument, an integral representation in the middle
/// range and the large-argument cosine expansion beyond it.
pub fn bessel_reduced(alpha: f64, z: f64) -> Result<f64> {
    check_finite("alpha", alpha)?;
    check_finite("z", z)?;
    if alpha < -0.5 {
        return Err(Error::domain(format!("order {alpha} < -1/2")));
    }
    if z < 0.0 {
        return Err(Error::domain(format!("argument {z} < 0")));
    }
    const SERIES_CUT: f64 = 12.0;
    if z <= SERIES_CUT {
        return Ok(bessel_reduced_series(alpha, z));
    }
    // reduced value from J_alpha: Gamma(a+1) (z/2)^{-a} J_a(z), via logs
    let j = bessel_j(alpha, z);
    let scale = gamma_ln(alpha + 1.0) - alpha * (z / 2.0).ln();
    Ok(j * scale.exp())
}

fn bessel_reduced_series(alpha: f64, z: f64) -> f64 {
    // sum_v (-z^2/4)^v / (v! (alpha+1)_v)
    let q = -z * z / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for v in 0..400 {
        let vf = v as f64;
        term *= q / ((vf + 1.0) * (alpha + vf + 1.0));
        sum += term;
        if term.abs() < 1e-18 * (1.0 + sum.abs()) {
            break;
        }
    }
    sum
}

/// `J_alpha(z)` for `z > 12`, `alpha >= -1/2`.
fn bessel_j(alpha: f64, z: f64) -> f64 {
    let asym_cut = (8.0 * alpha * alpha).max(50.0);
    if z >= asym_cut {
        bessel_j_asymptotic(alpha, z)
    } else {
        bessel_j_integral(alpha, z)
    }
}

/// Hankel's large-argument expansion,
/// `J_a(z) ~ sqrt(2/(pi z)) (P cos w - Q sin w)`, `w = z - a pi/2 - pi/4`,
/// with `a_m = prod_{j<=m} (mu - (2j-1)^2) / (m! 8^m)`, `mu = 4 a^2`;
/// even-index terms alternate into P, odd into Q. Used only for
/// `z >= max(50, 8 a^2)` where the truncated tail is below 1e-12.
fn bessel_j_asymptotic(alpha: f64, z: f64) -> f64 {
    let mu = 4.0 * alpha * alpha;
    let omega = z - alpha * std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_4;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0; // a_m / z^m
    for m in 0..=16u32 {
        if m % 2 == 0 {
            let sign = if m % 4 == 0 { 1.0 } else { -1.0 };
            p += sign * term;
        } else {
            let sign = if m % 4 == 1 { 1.0 } else { -1.0 };
            q += sign * term;
        }
        let mf = m as f64;
        term *= (mu - (2.0 * mf + 1.0).powi(2)) / ((mf + 1.0) * 8.0 * z);
        if term.abs() < 1e-17 {
            break;
        }
    }
    (2.0 / (std::f64::consts::PI * z)).sqrt() * (p * omega.cos() - q * omega.sin())
}

/// Real-order Bessel via the Schläfli integral representation,
/// `J_a(z) = (1/pi) int_0^pi cos(z sin t - a t) dt
///           - sin(a pi)/pi int_0^inf exp(-z sinh s - a s) ds`.
fn bessel_j_integral(alpha: f64, z: f64) -> f64 {
    // bucket the order so the memoized node sets stay few
    let n = (((1.4 * (z + alpha)) as usize).max(96) + 63) / 64 * 64;
    let rule = crate::quad::gauss_legendre_on(n, 0.0, std::f64::consts::PI);
    let osc = rule.integrate(|t| (z * t.sin() - alpha * t).cos()) / std::f64::consts::PI;
    let s = (alpha * std::f64::consts::PI).sin();
    if s.abs() < 1e-300 {
        return osc;
    }
    // exp(-z sinh t) dies fast for z > 12; [0, 3] is far past underflow
    let rule2 = crate::quad::gauss_legendre_on(160, 0.0, 3.0);
    let tail = rule2.integrate(|t| (-z * t.sinh() - alpha * t).exp());
    osc - s / std::f64::consts::PI * tail
}

/// Derivative of the reduced Bessel function of order 1..=3, from the
/// series identity `d/dz B_a(z) = -z/(2(a+1)) B_{a+1}(z)` applied repeatedly.
pub fn bessel_reduced_deriv(alpha: f64, z: f64, order: u32) -> Result<f64> {
    check_finite("alpha", alpha)?;
    check_finite("z", z)?;
    if !(1..=3).contains(&order) {
        return Err(Error::range(format!("derivative order {order} not in 1..=3")));
    }
    // Represent d^k as a polynomial-in-z combination of B_{alpha+j}.
    // terms[j] is the coefficient polynomial of B_{alpha+j} as powers of z.
    // Start with d^0 = B_alpha.
    let mut terms: Vec<Vec<f64>> = vec![vec![1.0]];
    for _ in 0..order {
        let mut next: Vec<Vec<f64>> = vec![vec![0.0; 0]; terms.len() + 1];
        for (j, poly) in terms.iter().enumerate() {
            // differentiate the polynomial coefficient
            for (p, &c) in poly.iter().enumerate() {
                if p >= 1 {
                    grow(&mut next[j], p - 1);
                    next[j][p - 1] += c * p as f64;
                }
            }
            // chain rule on B_{alpha+j}: -z/(2(alpha+j+1)) B_{alpha+j+1}
            let factor = -0.5 / (alpha + j as f64 + 1.0);
            for (p, &c) in poly.iter().enumerate() {
                grow(&mut next[j + 1], p + 1);
                next[j + 1][p + 1] += c * factor;
            }
        }
        terms = next;
    }
    let mut total = 0.0;
    for (j, poly) in terms.iter().enumerate() {
        if poly.is_empty() {
            continue;
        }
        let b = bessel_reduced(alpha + j as f64, z)?;
        let mut zp = 1.0;
        let mut val = 0.0;
        for &c in poly {
            val += c * zp;
            zp *= z;
        }
        total += val * b;
    }
    Ok(total)
}

fn grow(v: &mut Vec<f64>, idx: usize) {
    if v.len() <= idx {
        v.resize(idx + 1, 0.0);
    }
}

/// Laguerre polynomial `L_n^{(alpha)}(x)` by the three-term recurrence.
pub fn laguerre_poly(n: u32, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0;
    let mut l = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let lp1 = ((2.0 * kf + 1.0 + alpha - x) * l - (kf + alpha) * lm1) / (kf + 1.0);
        lm1 = l;
        l = lp1;
    }
    l
}

/// Un-normalized Laguerre function `psi_n^{(alpha)}(x) = L_n^{(alpha)}(x) e^{-x/2}`.
pub fn laguerre_psi(n: u32, alpha: f64, x: f64) -> f64 {
    laguerre_poly(n, alpha, x) * (-x / 2.0).exp()
}

/// Normalized Laguerre function, bounded by its value 1 at the origin:
/// `L_n^{(alpha)}(x) e^{-x/2} / C(n+alpha, n)`.
pub fn laguerre_norm(n: u32, alpha: f64, x: f64) -> Result<f64> {
    if alpha <= -1.0 {
        return Err(Error::domain(format!("laguerre parameter {alpha} <= -1")));
    }
    check_finite("x", x)?;
    Ok(laguerre_psi(n, alpha, x) / binom_gen(n, alpha))
}

/// Derivative (order 1 or 2) of the normalized Laguerre function, via
/// `psi' = -psi/2 - psi_{n-1}^{(alpha+1)}` and one more application for
/// the second order, then divided by the same binomial.
pub fn laguerre_norm_deriv(n: u32, alpha: f64, x: f64, order: u32) -> Result<f64> {
    if alpha <= -1.0 {
        return Err(Error::domain(format!("laguerre parameter {alpha} <= -1")));
    }
    check_finite("x", x)?;
    let psi_d = match order {
        1 => laguerre_psi_deriv1(n, alpha, x),
        2 => {
            // psi'' = psi/4 + psi_{n-1}^{(a+1)}/2 + [n>=1] (psi_{n-1}^{(a+1)}/2 + psi_{n-2}^{(a+2)})
            let mut v = 0.25 * laguerre_psi(n, alpha, x);
            if n >= 1 {
                v += laguerre_psi(n - 1, alpha + 1.0, x);
                if n >= 2 {
                    v += laguerre_psi(n - 2, alpha + 2.0, x);
                }
            }
            v
        }
        _ => return Err(Error::range(format!("derivative order {order} not in 1..=2"))),
    };
    Ok(psi_d / binom_gen(n, alpha))
}

fn laguerre_psi_deriv1(n: u32, alpha: f64, x: f64) -> f64 {
    let mut v = -0.5 * laguerre_psi(n, alpha, x);
    if n >= 1 {
        v -= laguerre_psi(n - 1, alpha + 1.0, x);
    }
    v
}

/// Default cap on the Hermite index; the recurrence itself stays finite far
/// beyond, this guards against misuse in eigenfunction sums.
pub const HERMITE_MAX_INDEX: u32 = 60;

/// Hermite-Weber function `h_k(x) = (2^k k! sqrt(pi))^{-1/2} e^{-x^2/2} H_k(x)`,
/// evaluated by the normalized two-term recurrence.
pub fn hermite_weber(k: u32, x: f64) -> Result<f64> {
    if k > HERMITE_MAX_INDEX {
        return Err(Error::range(format!(
            "hermite index {k} exceeds maximum {HERMITE_MAX_INDEX}"
        )));
    }
    check_finite("x", x)?;
    let h0 = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    if k == 0 {
        return Ok(h0);
    }
    let mut hm1 = h0;
    let mut h = std::f64::consts::SQRT_2 * x * h0;
    for j in 1..k {
        let jf = j as f64;
        let hp1 = x * (2.0 / (jf + 1.0)).sqrt() * h - (jf / (jf + 1.0)).sqrt() * hm1;
        hm1 = h;
        h = hp1;
    }
    Ok(h)
}

/// The discrete operators acting on sequences `N -> C`. `tau_minus` applied
/// at index 0 yields 0 by convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqOperator {
    TauPlus,
    TauMinus,
    Delta,
    Alpha,
    Beta,
    Gamma,
}

impl SeqOperator {
    /// Apply the operator to `r` at index `l`.
    pub fn apply(&self, r: &dyn Fn(u32) -> Complex64, l: u32) -> Complex64 {
        let lm = |r: &dyn Fn(u32) -> Complex64| {
            if l == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                r(l - 1)
            }
        };
        let lf = l as f64;
        match self {
            SeqOperator::TauPlus => r(l + 1),
            SeqOperator::TauMinus => lm(r),
            SeqOperator::Delta => r(l + 1) - r(l),
            SeqOperator::Beta => -(lf + 1.0) * r(l + 1) + (2.0 * lf + 1.0) * r(l) - lf * lm(r),
            SeqOperator::Alpha => {
                -0.5 * r(l) - lf / 2.0 * lm(r) + (lf + 1.0) / 2.0 * r(l + 1)
            }
            SeqOperator::Gamma => {
                -(2.0 * lf + 1.0) / 4.0 * r(l) - lf / 4.0 * lm(r) - (lf + 1.0) / 4.0 * r(l + 1)
            }
        }
    }

    /// Apply a composition `ops[0] . ops[1] . ... . ops.last()` (rightmost
    /// acts first) at index `l`.
    pub fn apply_composed(ops: &[SeqOperator], r: &dyn Fn(u32) -> Complex64, l: u32) -> Complex64 {
        match ops.split_first() {
            None => r(l),
            Some((&first, rest)) => {
                let inner = |k: u32| SeqOperator::apply_composed(rest, r, k);
                first.apply(&inner, l)
            }
        }
    }
}
