//! One-dimensional Gaussian quadrature, sphere rules and low-discrepancy
//! sampling used by the integration routines of the other modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::specfun::gamma_ln;

/// Nodes and weights of a 1-D quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine image of the rule on `[a, b]` (only meaningful for rules on `[-1, 1]`).
    pub fn scaled_to(&self, a: f64, b: f64) -> Rule1d {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        Rule1d {
            nodes: self.nodes.iter().map(|&x| c + h * x).collect(),
            weights: self.weights.iter().map(|&w| w * h).collect(),
        }
    }
}

/// Golub-Welsch nodes (eigenvalues of the Jacobi matrix) polished by Newton
/// iteration on the orthonormal recurrence, weights by the Christoffel
/// function. The polish lifts the eigensolver's ~1e-11 node accuracy to
/// machine precision, which the orthonormality checks downstream need.
fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> Rule1d {
    let n = diag.len();
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            j[(i, i + 1)] = off[i];
            j[(i + 1, i)] = off[i];
        }
    }
    let eig = j.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // orthonormal values p_0..p_n and derivatives at x
    let evaluate = |x: f64| -> (Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; n + 1];
        let mut dp = vec![0.0; n + 1];
        p[0] = 1.0 / mu0.sqrt();
        if n >= 1 {
            p[1] = (x - diag[0]) * p[0] / off_at(off, 0);
            dp[1] = p[0] / off_at(off, 0);
        }
        for k in 1..n {
            let b_next = off_at(off, k);
            p[k + 1] = ((x - diag[k]) * p[k] - off_at(off, k - 1) * p[k - 1]) / b_next;
            dp[k + 1] =
                ((x - diag[k]) * dp[k] + p[k] - off_at(off, k - 1) * dp[k - 1]) / b_next;
        }
        (p, dp)
    };

    let mut weights = vec![0.0; n];
    for (i, x) in nodes.iter_mut().enumerate() {
        for _ in 0..3 {
            let (p, dp) = evaluate(*x);
            if dp[n] != 0.0 {
                *x -= p[n] / dp[n];
            }
        }
        let (p, _) = evaluate(*x);
        let denom: f64 = p[..n].iter().map(|t| t * t).sum();
        weights[i] = 1.0 / denom;
    }
    Rule1d { nodes, weights }
}

fn off_at(off: &[f64], k: usize) -> f64 {
    // the recurrence needs b_{n} beyond the matrix; any positive value works
    // for the Newton polish since only the root location matters
    off.get(k).copied().unwrap_or(1.0)
}

/// Gauss-Legendre on `[-1, 1]`. Rules are memoized: the node solve is an
/// eigendecomposition, far too slow to repeat inside quadrature loops.
pub fn gauss_legendre(n: usize) -> Rule1d {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex};
    static CACHE: Mutex<Option<HashMap<usize, Arc<Rule1d>>>> = Mutex::new(None);
    assert!(n >= 1);
    let mut guard = CACHE.lock().unwrap();
    let map = guard.get_or_insert_with(HashMap::new);
    if let Some(rule) = map.get(&n) {
        return (**rule).clone();
    }
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let rule = golub_welsch(&diag, &off, 2.0);
    map.insert(n, Arc::new(rule.clone()));
    rule
}

/// Gauss-Legendre transplanted to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Rule1d {
    gauss_legendre(n).scaled_to(a, b)
}

/// Gauss-Hermite with weight `exp(-x^2)` on the line.
pub fn gauss_hermite(n: usize) -> Rule1d {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    golub_welsch(&diag, &off, std::f64::consts::PI.sqrt())
}

/// Generalized Gauss-Laguerre with weight `x^alpha exp(-x)` on `(0, inf)`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> Rule1d {
    assert!(n >= 1 && alpha > -1.0);
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            (k * (k + alpha)).sqrt()
        })
        .collect();
    golub_welsch(&diag, &off, gamma_ln(alpha + 1.0).exp())
}

/// Trapezoid weights for an arbitrary strictly increasing grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    assert!(n >= 2);
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = grid[i + 1] - grid[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Log-spaced grid on `[a, b]`, `a > 0`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Surface area of the Euclidean unit sphere `S^{n-1}` in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    assert!(n >= 1);
    let n = n as f64;
    2.0 * std::f64::consts::PI.powf(n / 2.0) / gamma_ln(n / 2.0).exp()
}

/// Rule on `(0, 1)` absorbing the radial density of the unit-sphere
/// measure, `2 r^{v-1} (1 - r^4)^{(z-2)/2} dr`. For odd `z` the substitution
/// `r = 1 - t^2` removes the endpoint singularity (`z = 1`) or kink of the
/// fractional power.
pub fn radial_mu_rule(v: usize, z: usize, n: usize) -> Rule1d {
    let w_exp = (z as f64 - 2.0) / 2.0;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    if z % 2 == 1 {
        // 1 - r^4 = t^2 (2 - t^2)(1 + r^2) with r = 1 - t^2
        let gl = gauss_legendre_on(n, 0.0, 1.0);
        for (&t, &wt) in gl.nodes.iter().zip(&gl.weights) {
            let r = 1.0 - t * t;
            let smooth = (2.0 - t * t) * (1.0 + r * r);
            let density =
                2.0 * r.powi(v as i32 - 1) * t.powf(2.0 * w_exp) * smooth.powf(w_exp);
            nodes.push(r);
            weights.push(wt * 2.0 * t * density);
        }
    } else {
        let gl = gauss_legendre_on(n, 0.0, 1.0);
        for (&r, &wt) in gl.nodes.iter().zip(&gl.weights) {
            let density = 2.0 * r.powi(v as i32 - 1) * (1.0 - r.powi(4)).powf(w_exp);
            nodes.push(r);
            weights.push(wt * density);
        }
    }
    Rule1d { nodes, weights }
}

/// Quadrature on the Euclidean unit sphere `S^{n-1}`; weights sum to the
/// surface area (unnormalized surface measure).
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, &w)| w * f(x))
            .sum()
    }

    /// Deterministic product rules for `n <= 4`, seeded Monte Carlo above.
    /// `order` scales the tensor orders; `seed` only matters for `n >= 5`.
    pub fn new(n: usize, order: usize, seed: u64) -> SphereRule {
        match n {
            1 => SphereRule {
                dim: 1,
                nodes: vec![vec![1.0], vec![-1.0]],
                weights: vec![1.0, 1.0],
            },
            2 => {
                let m = (4 * order).max(8);
                let mut nodes = Vec::with_capacity(m);
                let w = 2.0 * std::f64::consts::PI / m as f64;
                for k in 0..m {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                    nodes.push(vec![t.cos(), t.sin()]);
                }
                SphereRule {
                    dim: 2,
                    nodes,
                    weights: vec![w; m],
                }
            }
            3 => {
                // Gauss-Legendre in cos(theta) times uniform azimuth.
                let n_t = (2 * order).max(6);
                let n_p = (4 * order).max(8);
                let glt = gauss_legendre(n_t);
                let dphi = 2.0 * std::f64::consts::PI / n_p as f64;
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for (ct, wt) in glt.nodes.iter().zip(&glt.weights) {
                    let st = (1.0 - ct * ct).max(0.0).sqrt();
                    for k in 0..n_p {
                        let p = 2.0 * std::f64::consts::PI * k as f64 / n_p as f64;
                        nodes.push(vec![st * p.cos(), st * p.sin(), *ct]);
                        weights.push(wt * dphi);
                    }
                }
                SphereRule {
                    dim: 3,
                    nodes,
                    weights,
                }
            }
            4 => {
                // Double polar: x = (cos(psi) w1, sin(psi) w2), w1, w2 in S^1,
                // with density cos(psi) sin(psi) on psi in [0, pi/2].
                let n_psi = (4 * order).max(8);
                let n_c = (2 * order).max(4);
                let glp = gauss_legendre_on(n_psi, 0.0, std::f64::consts::FRAC_PI_2);
                let dw = 2.0 * std::f64::consts::PI / n_c as f64;
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for (psi, wp) in glp.nodes.iter().zip(&glp.weights) {
                    let (c, s) = (psi.cos(), psi.sin());
                    for k1 in 0..n_c {
                        let t1 = 2.0 * std::f64::consts::PI * k1 as f64 / n_c as f64;
                        for k2 in 0..n_c {
                            let t2 = 2.0 * std::f64::consts::PI * k2 as f64 / n_c as f64;
                            nodes.push(vec![
                                c * t1.cos(),
                                c * t1.sin(),
                                s * t2.cos(),
                                s * t2.sin(),
                            ]);
                            weights.push(wp * c * s * dw * dw);
                        }
                    }
                }
                SphereRule {
                    dim: 4,
                    nodes,
                    weights,
                }
            }
            _ => {
                let m = (200 * order).max(1000);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let area = sphere_area(n);
                let mut nodes = Vec::with_capacity(m);
                for _ in 0..m {
                    let mut x: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    for v in &mut x {
                        *v /= r;
                    }
                    nodes.push(x);
                }
                SphereRule {
                    dim: n,
                    nodes,
                    weights: vec![area / m as f64; m],
                }
            }
        }
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; two uniforms per normal keeps the stream reproducible.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Digit-scrambled Halton sequence on `[0,1)^dim`: one deterministic digit
/// permutation per base removes the correlation stripes the plain sequence
/// shows from the larger prime bases onward.
pub struct Halton {
    bases: Vec<u64>,
    perms: Vec<Vec<u64>>,
    index: u64,
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

impl Halton {
    pub fn new(dim: usize, skip: u64) -> Halton {
        assert!(dim <= PRIMES.len());
        let perms = PRIMES[..dim]
            .iter()
            .map(|&b| digit_permutation(b, 0x9e37_79b9))
            .collect();
        Halton {
            bases: PRIMES[..dim].to_vec(),
            perms,
            index: skip + 1,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.bases
            .iter()
            .zip(&self.perms)
            .map(|(&b, p)| radical_inverse_scrambled(i, b, p))
            .collect()
    }
}

/// Fisher-Yates over `1..base` driven by an LCG; 0 stays fixed so the
/// scrambled inverse keeps its leading digits.
fn digit_permutation(base: u64, seed: u64) -> Vec<u64> {
    let mut p: Vec<u64> = (0..base).collect();
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(base);
    for i in (2..base as usize).rev() {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let j = 1 + (state >> 33) as usize % i;
        p.swap(i, j);
    }
    p
}

fn radical_inverse_scrambled(mut i: u64, base: u64, perm: &[u64]) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * perm[(i % base) as usize] as f64;
        i /= base;
    }
    r
}

/// Tensor-product Gauss-Legendre integration of `f` over the box
/// `prod_i [-half_width, half_width]`, `n` nodes per axis.
pub fn integrate_box(dim: usize, half_width: f64, n: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let rule = gauss_legendre_on(n, -half_width, half_width);
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for d in 0..dim {
            x[d] = rule.nodes[idx[d]];
            w *= rule.weights[idx[d]];
        }
        total += w * f(&x);
        // odometer
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dim {
                return total;
            }
        }
    }
}

/// Vector helper: Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Vector helper: dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[allow(dead_code)]
pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
