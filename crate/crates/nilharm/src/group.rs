//! Exact arithmetic and homogeneous geometry on the free two-step nilpotent
//! group `N_{v,2}` and on Heisenberg-type groups: products in exponential
//! coordinates, Korányi norm, dilations, the orthogonal action, Haar
//! integration and the unit-sphere measure.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Halton, SphereRule};

/// Dimensions attached to `N_{v,2}`: `v` generators, center of dimension
/// `z = v(v-1)/2`, homogeneous dimension `Q = v + 2z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDims {
    pub v: usize,
    pub v_prime: usize,
    pub z: usize,
    pub q: usize,
}

impl GroupDims {
    pub fn new(v: usize) -> Result<GroupDims> {
        if v < 2 {
            return Err(Error::invalid(format!("v = {v} < 2")));
        }
        let z = v * (v - 1) / 2;
        Ok(GroupDims {
            v,
            v_prime: v / 2,
            z,
            q: v + 2 * z,
        })
    }

    pub fn v_is_even(&self) -> bool {
        self.v % 2 == 0
    }

    /// Lexicographic index of the ordered pair `(i, j)`, `0 <= i < j < v`,
    /// into the center coordinate vector.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.v);
        i * self.v - i * (i + 1) / 2 + (j - i - 1)
    }
}

/// A point of `N_{v,2}` in exponential coordinates: `x` on the generators,
/// `a` on the brackets `[X_i, X_j]`, `i < j`, in lexicographic pair order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub v: usize,
    pub x: Vec<f64>,
    pub a: Vec<f64>,
}

impl GroupPoint {
    pub fn new(dims: &GroupDims, x: Vec<f64>, a: Vec<f64>) -> Result<GroupPoint> {
        if x.len() != dims.v {
            return Err(Error::DimensionMismatch {
                expected: dims.v,
                got: x.len(),
            });
        }
        if a.len() != dims.z {
            return Err(Error::DimensionMismatch {
                expected: dims.z,
                got: a.len(),
            });
        }
        Ok(GroupPoint { v: dims.v, x, a })
    }

    pub fn identity(dims: &GroupDims) -> GroupPoint {
        GroupPoint {
            v: dims.v,
            x: vec![0.0; dims.v],
            a: vec![0.0; dims.z],
        }
    }

    /// The antisymmetric matrix with entry `(i, j) = a[(i,j)]` for `i < j`.
    pub fn a_matrix(&self, dims: &GroupDims) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.v, self.v);
        for i in 0..self.v {
            for j in (i + 1)..self.v {
                let val = self.a[dims.pair_index(i, j)];
                m[(i, j)] = val;
                m[(j, i)] = -val;
            }
        }
        m
    }

    pub fn from_a_matrix(dims: &GroupDims, x: Vec<f64>, m: &DMatrix<f64>) -> GroupPoint {
        let mut a = vec![0.0; dims.z];
        for i in 0..dims.v {
            for j in (i + 1)..dims.v {
                a[dims.pair_index(i, j)] = m[(i, j)];
            }
        }
        GroupPoint { v: dims.v, x, a }
    }
}

/// Bracket coefficients: `[x, y]_{(i,j)} = x_i y_j - x_j y_i`, `i < j`.
fn bracket(dims: &GroupDims, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dims.z];
    for i in 0..dims.v {
        for j in (i + 1)..dims.v {
            out[dims.pair_index(i, j)] = x[i] * y[j] - x[j] * y[i];
        }
    }
    out
}

/// Step-two product in exponential coordinates:
/// `x = p.x + q.x`, `a = p.a + q.a + [p.x, q.x]/2`.
pub fn product(dims: &GroupDims, p: &GroupPoint, q: &GroupPoint) -> Result<GroupPoint> {
    if p.v != dims.v || q.v != dims.v {
        return Err(Error::DimensionMismatch {
            expected: dims.v,
            got: p.v.max(q.v),
        });
    }
    let x: Vec<f64> = p.x.iter().zip(&q.x).map(|(a, b)| a + b).collect();
    let br = bracket(dims, &p.x, &q.x);
    let a: Vec<f64> = p
        .a
        .iter()
        .zip(&q.a)
        .zip(&br)
        .map(|((pa, qa), b)| pa + qa + 0.5 * b)
        .collect();
    Ok(GroupPoint { v: dims.v, x, a })
}

pub fn inverse(p: &GroupPoint) -> GroupPoint {
    GroupPoint {
        v: p.v,
        x: p.x.iter().map(|t| -t).collect(),
        a: p.a.iter().map(|t| -t).collect(),
    }
}

/// Dilation `delta_r`: `x -> r x`, `a -> r^2 a`.
pub fn dilate(r: f64, p: &GroupPoint) -> Result<GroupPoint> {
    if r <= 0.0 {
        return Err(Error::domain(format!("dilation factor {r} <= 0")));
    }
    Ok(GroupPoint {
        v: p.v,
        x: p.x.iter().map(|t| r * t).collect(),
        a: p.a.iter().map(|t| r * r * t).collect(),
    })
}

/// Korányi norm `(|x|^4 + |a|^2)^{1/4}`.
pub fn koranyi_norm(p: &GroupPoint) -> f64 {
    let x2: f64 = p.x.iter().map(|t| t * t).sum();
    let a2: f64 = p.a.iter().map(|t| t * t).sum();
    (x2 * x2 + a2).powf(0.25)
}

/// Orthogonality defect `max |k^T k - I|`.
pub fn orthogonality_residual(k: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    let g = k.transpose() * k;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - expect).abs());
        }
    }
    worst
}

/// Action of `k` in `O(v)`: `x -> k x`, `A -> k A k^{-1}` re-packed.
pub fn k_action(dims: &GroupDims, k: &DMatrix<f64>, p: &GroupPoint) -> Result<GroupPoint> {
    let res = orthogonality_residual(k);
    if res > 1e-10 {
        return Err(Error::NotOrthogonal(res));
    }
    Ok(k_action_unchecked(dims, k, p))
}

/// Same as [`k_action`] with the orthogonality check skipped (hot loops).
pub fn k_action_unchecked(dims: &GroupDims, k: &DMatrix<f64>, p: &GroupPoint) -> GroupPoint {
    let v = dims.v;
    let mut x = vec![0.0; v];
    for i in 0..v {
        let mut s = 0.0;
        for j in 0..v {
            s += k[(i, j)] * p.x[j];
        }
        x[i] = s;
    }
    let am = p.a_matrix(dims);
    let rotated = k * am * k.transpose();
    GroupPoint::from_a_matrix(dims, x, &rotated)
}

/// Quadrature bundle for the unit-sphere measure on `N_{v,2}`.
#[derive(Debug, Clone)]
pub struct SphereQuads {
    pub x_sphere: SphereRule,
    pub z_sphere: SphereRule,
    /// nodes/weights on (0,1) absorbing the radial density
    /// `2 r^{v-1} (1 - r^4)^{(z-2)/2} dr`.
    pub radial_nodes: Vec<f64>,
    pub radial_weights: Vec<f64>,
}

impl SphereQuads {
    /// Build with deterministic product rules where available; `order`
    /// scales everything.
    pub fn new(dims: &GroupDims, order: usize, seed: u64) -> SphereQuads {
        let x_sphere = SphereRule::new(dims.v, order, seed);
        let z_sphere = SphereRule::new(dims.z, order, seed.wrapping_add(1));
        let radial = quad::radial_mu_rule(dims.v, dims.z, (32 * order).max(64));
        SphereQuads {
            x_sphere,
            z_sphere,
            radial_nodes: radial.nodes,
            radial_weights: radial.weights,
        }
    }

    /// Total mass of the unit-sphere measure for these dimensions.
    pub fn mu_mass(&self) -> f64 {
        let radial: f64 = self.radial_weights.iter().sum();
        radial * self.x_sphere.total_mass() * self.z_sphere.total_mass()
    }
}

/// Pair a function against the dilated unit-sphere measure:
/// the integral of `f(s.n)` over the Korányi unit sphere, with the sphere
/// factors carrying unnormalized surface measures so that the polar
/// identity holds with no extra constant.
pub fn sphere_pairing(
    dims: &GroupDims,
    quads: &SphereQuads,
    s: f64,
    mut f: impl FnMut(&GroupPoint) -> num_complex::Complex64,
) -> num_complex::Complex64 {
    let mut total = num_complex::Complex64::new(0.0, 0.0);
    for (&r, &wr) in quads.radial_nodes.iter().zip(&quads.radial_weights) {
        let zfac = (1.0 - r.powi(4)).max(0.0).sqrt();
        for (xn, &wx) in quads.x_sphere.nodes.iter().zip(&quads.x_sphere.weights) {
            for (zn, &wz) in quads.z_sphere.nodes.iter().zip(&quads.z_sphere.weights) {
                // s . exp(r X + sqrt(1-r^4) Z) = exp(s r X + s^2 sqrt(1-r^4) Z)
                let x: Vec<f64> = xn.iter().map(|&c| s * r * c).collect();
                let a: Vec<f64> = zn.iter().map(|&c| s * s * zfac * c).collect();
                let p = GroupPoint {
                    v: dims.v,
                    x,
                    a,
                };
                total += f(&p) * (wr * wx * wz);
            }
        }
    }
    total
}

/// Specification of the truncation box for Haar integration.
#[derive(Debug, Clone, Copy)]
pub struct HaarSpec {
    /// half-width of the x-axes box
    pub x_half: f64,
    /// half-width of the a-axes box
    pub a_half: f64,
    /// per-axis tensor nodes (v = 2) or total quasi-MC points (v >= 3)
    pub order: usize,
    pub seed: u64,
}

impl Default for HaarSpec {
    fn default() -> Self {
        HaarSpec {
            x_half: 6.0,
            a_half: 6.0,
            order: 48,
            seed: 42,
        }
    }
}

/// Result of a Haar integral with a crude tail diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct HaarIntegral {
    pub value: num_complex::Complex64,
    /// max |f| sampled on the truncation boundary times the boundary measure
    pub tail_estimate: f64,
    pub tail_flagged: bool,
}

/// Haar integral of `f` over the group in exponential coordinates:
/// tensor Gauss-Legendre for `v = 2`, seeded Halton quasi-MC for `v >= 3`.
pub fn haar_integrate_group(
    dims: &GroupDims,
    spec: &HaarSpec,
    mut f: impl FnMut(&GroupPoint) -> num_complex::Complex64,
) -> HaarIntegral {
    let dim_total = dims.v + dims.z;
    let mut boundary_max: f64 = 0.0;
    let value = if dims.v == 2 {
        let gx = quad::gauss_legendre_on(spec.order, -spec.x_half, spec.x_half);
        let ga = quad::gauss_legendre_on(spec.order, -spec.a_half, spec.a_half);
        let mut total = num_complex::Complex64::new(0.0, 0.0);
        for (&x1, &w1) in gx.nodes.iter().zip(&gx.weights) {
            for (&x2, &w2) in gx.nodes.iter().zip(&gx.weights) {
                for (&a, &wa) in ga.nodes.iter().zip(&ga.weights) {
                    let p = GroupPoint {
                        v: 2,
                        x: vec![x1, x2],
                        a: vec![a],
                    };
                    let fv = f(&p);
                    total += fv * (w1 * w2 * wa);
                    if x1.abs().max(x2.abs()) > 0.95 * spec.x_half
                        || a.abs() > 0.95 * spec.a_half
                    {
                        boundary_max = boundary_max.max(fv.norm());
                    }
                }
            }
        }
        total
    } else {
        let n_pts = spec.order * 16384;
        let mut h = Halton::new(dim_total, 101);
        let mut total = num_complex::Complex64::new(0.0, 0.0);
        let mut vol = 1.0;
        for d in 0..dim_total {
            vol *= 2.0 * if d < dims.v { spec.x_half } else { spec.a_half };
        }
        for _ in 0..n_pts {
            let u = h.next_point();
            let x: Vec<f64> = (0..dims.v)
                .map(|d| (2.0 * u[d] - 1.0) * spec.x_half)
                .collect();
            let a: Vec<f64> = (0..dims.z)
                .map(|d| (2.0 * u[dims.v + d] - 1.0) * spec.a_half)
                .collect();
            let on_boundary = x.iter().any(|t| t.abs() > 0.95 * spec.x_half)
                || a.iter().any(|t| t.abs() > 0.95 * spec.a_half);
            let p = GroupPoint { v: dims.v, x, a };
            let fv = f(&p);
            if on_boundary {
                boundary_max = boundary_max.max(fv.norm());
            }
            total += fv;
        }
        total * (vol / n_pts as f64)
    };
    // boundary shell area ~ perimeter of the box; crude but monotone in the tail
    let shell = 2.0 * dim_total as f64 * (2.0 * spec.x_half).powi(dim_total as i32 - 1);
    let tail = boundary_max * shell * 0.05;
    HaarIntegral {
        value,
        tail_estimate: tail,
        tail_flagged: tail > 1e-6 * (1.0 + value.norm()),
    }
}

/// Residual of the polar decomposition of Haar measure:
/// `| int f  -  int_0^R sphere_pairing(f, rho) rho^{Q-1} drho |`.
pub fn polar_identity_residual(
    dims: &GroupDims,
    quads: &SphereQuads,
    spec: &HaarSpec,
    rho_max: f64,
    rho_order: usize,
    f: &mut dyn FnMut(&GroupPoint) -> num_complex::Complex64,
) -> f64 {
    let direct = haar_integrate_group(dims, spec, &mut *f).value;
    let gl = quad::gauss_legendre_on(rho_order, 0.0, rho_max);
    let mut polar = num_complex::Complex64::new(0.0, 0.0);
    for (&rho, &w) in gl.nodes.iter().zip(&gl.weights) {
        polar += sphere_pairing(dims, quads, rho, &mut *f) * (w * rho.powi(dims.q as i32 - 1));
    }
    (direct - polar).norm()
}

/// A Heisenberg-type structure: `J(Z) = sum z_k J_k` with
/// `J(Z)^2 = -|Z|^2 Id` for every center vector `Z`.
#[derive(Debug, Clone)]
pub struct TypeHModel {
    pub v_dim: usize,
    pub z_dim: usize,
    pub j_basis: Vec<DMatrix<f64>>,
}

impl TypeHModel {
    pub fn j_of(&self, zeta: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.v_dim, self.v_dim);
        for (j, c) in self.j_basis.iter().zip(zeta) {
            m += j * *c;
        }
        m
    }

    /// Largest deviation of `J(Z)^2 + |Z|^2 Id` over a deterministic grid of
    /// unit center vectors.
    pub fn typeh_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut probes: Vec<Vec<f64>> = Vec::new();
        for k in 0..self.z_dim {
            let mut e = vec![0.0; self.z_dim];
            e[k] = 1.0;
            probes.push(e);
        }
        if self.z_dim >= 2 {
            for i in 0..self.z_dim {
                for j in (i + 1)..self.z_dim {
                    let mut e = vec![0.0; self.z_dim];
                    e[i] = std::f64::consts::FRAC_1_SQRT_2;
                    e[j] = std::f64::consts::FRAC_1_SQRT_2;
                    probes.push(e);
                }
            }
        }
        for zeta in probes {
            let j = self.j_of(&zeta);
            let sq = &j * &j;
            let n2: f64 = zeta.iter().map(|t| t * t).sum();
            for r in 0..self.v_dim {
                for c in 0..self.v_dim {
                    let expect = if r == c { -n2 } else { 0.0 };
                    worst = worst.max((sq[(r, c)] - expect).abs());
                }
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let res = self.typeh_residual();
        if res > 1e-10 {
            return Err(Error::invalid(format!(
                "J(Z)^2 != -|Z|^2 Id (residual {res:.3e})"
            )));
        }
        Ok(())
    }
}

/// The Heisenberg group `H^n` as a type-H model: `v = 2n`, one-dimensional
/// center, `J_1` block-diagonal with `n` copies of the plane rotation
/// generator.
pub fn typeh_heisenberg(n: usize) -> Result<TypeHModel> {
    if n == 0 {
        return Err(Error::invalid("heisenberg model needs n >= 1"));
    }
    let v = 2 * n;
    let mut j1 = DMatrix::zeros(v, v);
    for b in 0..n {
        j1[(2 * b, 2 * b + 1)] = -1.0;
        j1[(2 * b + 1, 2 * b)] = 1.0;
    }
    let model = TypeHModel {
        v_dim: v,
        z_dim: 1,
        j_basis: vec![j1],
    };
    model.validate()?;
    Ok(model)
}

/// Combine two Heisenberg-type models over a shared one-dimensional center
/// (the construction that keeps the defining identity); both inputs must
/// have a one-dimensional center.
pub fn typeh_product(a: &TypeHModel, b: &TypeHModel) -> Result<TypeHModel> {
    if a.z_dim != 1 || b.z_dim != 1 {
        return Err(Error::invalid(
            "shared-center product requires one-dimensional centers",
        ));
    }
    let v = a.v_dim + b.v_dim;
    let mut j1 = DMatrix::zeros(v, v);
    j1.view_mut((0, 0), (a.v_dim, a.v_dim)).copy_from(&a.j_basis[0]);
    j1.view_mut((a.v_dim, a.v_dim), (b.v_dim, b.v_dim))
        .copy_from(&b.j_basis[0]);
    let model = TypeHModel {
        v_dim: v,
        z_dim: 1,
        j_basis: vec![j1],
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn random_point(dims: &GroupDims, rng: &mut ChaCha8Rng) -> GroupPoint {
        GroupPoint {
            v: dims.v,
            x: (0..dims.v).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            a: (0..dims.z).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        }
    }

    #[test]
    fn pair_index_lexicographic() {
        let d = GroupDims::new(4).unwrap();
        assert_eq!(d.pair_index(0, 1), 0);
        assert_eq!(d.pair_index(0, 3), 2);
        assert_eq!(d.pair_index(1, 2), 3);
        assert_eq!(d.pair_index(2, 3), 5);
    }

    #[test]
    fn product_identity_and_inverse() {
        let dims = GroupDims::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = GroupPoint::identity(&dims);
        for _ in 0..20 {
            let p = random_point(&dims, &mut rng);
            let pe = product(&dims, &p, &e).unwrap();
            assert_eq!(pe, p);
            let pinv = product(&dims, &p, &inverse(&p)).unwrap();
            for t in pinv.x.iter().chain(&pinv.a) {
                assert_abs_diff_eq!(*t, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn bch_coefficient() {
        // exp(X1) exp(X2) has bracket coefficient 1/2 on [X1, X2]
        let dims = GroupDims::new(2).unwrap();
        let p = GroupPoint::new(&dims, vec![1.0, 0.0], vec![0.0]).unwrap();
        let q = GroupPoint::new(&dims, vec![0.0, 1.0], vec![0.0]).unwrap();
        let pq = product(&dims, &p, &q).unwrap();
        assert_abs_diff_eq!(pq.a[0], 0.5);
    }

    #[test]
    fn associativity_near_machine() {
        for v in 2..=5 {
            let dims = GroupDims::new(v).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(v as u64);
            for _ in 0..50 {
                let p = random_point(&dims, &mut rng);
                let q = random_point(&dims, &mut rng);
                let r = random_point(&dims, &mut rng);
                let left = product(&dims, &product(&dims, &p, &q).unwrap(), &r).unwrap();
                let right = product(&dims, &p, &product(&dims, &q, &r).unwrap()).unwrap();
                for (a, b) in left.x.iter().zip(&right.x).chain(left.a.iter().zip(&right.a)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn koranyi_values_and_homogeneity() {
        let dims = GroupDims::new(2).unwrap();
        let p = GroupPoint::new(&dims, vec![2.0, 0.0], vec![0.0]).unwrap();
        assert_abs_diff_eq!(koranyi_norm(&p), 2.0);
        let q = GroupPoint::new(&dims, vec![0.0, 0.0], vec![16.0]).unwrap();
        assert_abs_diff_eq!(koranyi_norm(&q), 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let p = random_point(&dims, &mut rng);
            assert_abs_diff_eq!(koranyi_norm(&inverse(&p)), koranyi_norm(&p));
            let r = rng.gen_range(0.1..4.0);
            assert!(
                (koranyi_norm(&dilate(r, &p).unwrap()) - r * koranyi_norm(&p)).abs() < 1e-12
            );
        }
        assert!(dilate(0.0, &p).is_err());
    }

    #[test]
    fn dilation_semigroup() {
        let dims = GroupDims::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_point(&dims, &mut rng);
        let a = dilate(1.5, &dilate(2.0, &p).unwrap()).unwrap();
        let b = dilate(3.0, &p).unwrap();
        for (u, w) in a.x.iter().zip(&b.x).chain(a.a.iter().zip(&b.a)) {
            assert_abs_diff_eq!(*u, *w, epsilon = 1e-13);
        }
        let one = dilate(1.0, &p).unwrap();
        assert_eq!(one, p);
    }

    fn random_orthogonal(v: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(v, v, |_, _| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let qr = m.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..v {
            if r[(j, j)] < 0.0 {
                for i in 0..v {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        q
    }

    #[test]
    fn k_action_properties() {
        for v in 2..=4 {
            let dims = GroupDims::new(v).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(v as u64 + 10);
            for _ in 0..10 {
                let k = random_orthogonal(v, &mut rng);
                let p = random_point(&dims, &mut rng);
                let q = random_point(&dims, &mut rng);
                // Koranyi invariance
                let kp = k_action(&dims, &k, &p).unwrap();
                assert!((koranyi_norm(&kp) - koranyi_norm(&p)).abs() < 1e-10);
                // automorphism property
                let lhs = k_action(&dims, &k, &product(&dims, &p, &q).unwrap()).unwrap();
                let rhs = product(
                    &dims,
                    &k_action(&dims, &k, &p).unwrap(),
                    &k_action(&dims, &k, &q).unwrap(),
                )
                .unwrap();
                for (a, b) in lhs.x.iter().zip(&rhs.x).chain(lhs.a.iter().zip(&rhs.a)) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
            // identity acts trivially
            let id = DMatrix::identity(v, v);
            let p = random_point(&dims, &mut rng);
            let ip = k_action(&dims, &id, &p).unwrap();
            assert_eq!(ip, p);
            // non-orthogonal rejected
            let bad = DMatrix::from_element(v, v, 0.7);
            assert!(k_action(&dims, &bad, &p).is_err());
        }
    }

    #[test]
    fn sphere_pairing_constant_mass_independent_of_s() {
        let dims = GroupDims::new(2).unwrap();
        let quads = SphereQuads::new(&dims, 4, 3);
        let mass = quads.mu_mass();
        for &s in &[0.3, 1.0, 2.5] {
            let v = sphere_pairing(&dims, &quads, s, |_| c(1.0));
            assert_abs_diff_eq!(v.re, mass, epsilon = 1e-9 * mass);
        }
        // closed form for v=2, z=1: 2 |S^1| |S^0| int_0^1 r (1-r^4)^{-1/2} dr = 2 pi^2
        assert_abs_diff_eq!(
            mass,
            2.0 * std::f64::consts::PI * std::f64::consts::PI,
            epsilon = 1e-8
        );
    }

    #[test]
    fn sphere_pairing_decreasing_for_decaying_profile() {
        let dims = GroupDims::new(2).unwrap();
        let quads = SphereQuads::new(&dims, 4, 3);
        let f = |p: &GroupPoint| c((-koranyi_norm(p).powi(8)).exp());
        let mut prev = f64::INFINITY;
        for &s in &[0.5, 0.8, 1.1, 1.5, 2.0] {
            let v = sphere_pairing(&dims, &quads, s, f).re;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn sphere_pairing_radial_in_k() {
        let dims = GroupDims::new(3).unwrap();
        let quads = SphereQuads::new(&dims, 3, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let k = random_orthogonal(3, &mut rng);
        let f = |p: &GroupPoint| {
            c((-p.x.iter().map(|t| t * t).sum::<f64>()
                - p.a.iter().map(|t| t * t).sum::<f64>())
            .exp()
                * (1.0 + p.x[0] * p.x[0]))
        };
        let fk = |p: &GroupPoint| f(&k_action_unchecked(&dims, &k, p));
        let a = sphere_pairing(&dims, &quads, 1.3, f);
        let b = sphere_pairing(&dims, &quads, 1.3, fk);
        assert!((a - b).norm() < 2e-3 * a.norm().max(1.0));
    }

    #[test]
    fn haar_gaussian_v2() {
        let dims = GroupDims::new(2).unwrap();
        let spec = HaarSpec::default();
        let got = haar_integrate_group(&dims, &spec, |p| {
            c((-p.x[0] * p.x[0] - p.x[1] * p.x[1] - p.a[0] * p.a[0]).exp())
        });
        let expect = std::f64::consts::PI * std::f64::consts::PI.sqrt();
        assert_abs_diff_eq!(got.value.re, expect, epsilon = 1e-8);
        assert!(!got.tail_flagged);
    }

    #[test]
    fn haar_odd_integrand_vanishes() {
        let dims = GroupDims::new(2).unwrap();
        let spec = HaarSpec::default();
        let got = haar_integrate_group(&dims, &spec, |p| {
            c(p.x[0] * (-p.x[0] * p.x[0] - p.x[1] * p.x[1] - p.a[0] * p.a[0]).exp())
        });
        assert_abs_diff_eq!(got.value.re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn haar_translation_invariance() {
        let dims = GroupDims::new(2).unwrap();
        let spec = HaarSpec {
            x_half: 9.0,
            a_half: 14.0,
            order: 72,
            seed: 0,
        };
        let f = |p: &GroupPoint| {
            c((-p.x[0] * p.x[0] - p.x[1] * p.x[1] - p.a[0] * p.a[0]).exp())
        };
        let base = haar_integrate_group(&dims, &spec, f).value;
        let shift = GroupPoint::new(&dims, vec![0.7, -0.4], vec![0.9]).unwrap();
        let translated = haar_integrate_group(&dims, &spec, |n| {
            f(&product(&dims, &shift, n).unwrap())
        })
        .value;
        assert!((base - translated).norm() < 1e-6 * base.norm());
    }

    #[test]
    fn haar_gaussian_v3_quasi_mc() {
        let dims = GroupDims::new(3).unwrap();
        let spec = HaarSpec {
            x_half: 4.0,
            a_half: 4.0,
            order: 40,
            seed: 7,
        };
        let got = haar_integrate_group(&dims, &spec, |p| {
            let s: f64 = p.x.iter().chain(&p.a).map(|t| t * t).sum();
            c((-s).exp())
        });
        let expect = std::f64::consts::PI.powf(3.0); // pi^{(v+z)/2} = pi^3
        assert!(
            (got.value.re - expect).abs() < 0.01 * expect,
            "{} vs {expect}",
            got.value.re
        );
    }

    #[test]
    fn polar_identity_v2() {
        let dims = GroupDims::new(2).unwrap();
        let quads = SphereQuads::new(&dims, 5, 3);
        let spec = HaarSpec::default();
        let mut f = |p: &GroupPoint| {
            c((-p.x.iter().map(|t| t * t).sum::<f64>()
                - p.a.iter().map(|t| t * t).sum::<f64>())
            .exp())
        };
        let res = polar_identity_residual(&dims, &quads, &spec, 6.0, 160, &mut f);
        let scale = std::f64::consts::PI * std::f64::consts::PI.sqrt();
        assert!(res / scale < 1e-4, "relative residual {}", res / scale);
    }

    #[test]
    fn zero_function_polar_residual() {
        let dims = GroupDims::new(2).unwrap();
        let quads = SphereQuads::new(&dims, 2, 3);
        let spec = HaarSpec::default();
        let mut f = |_: &GroupPoint| c(0.0);
        let res = polar_identity_residual(&dims, &quads, &spec, 6.0, 40, &mut f);
        assert_abs_diff_eq!(res, 0.0);
    }

    #[test]
    fn heisenberg_models() {
        let h1 = typeh_heisenberg(1).unwrap();
        let j = &h1.j_basis[0];
        let sq = j * j;
        assert_abs_diff_eq!(sq[(0, 0)], -1.0);
        assert_abs_diff_eq!(sq[(1, 1)], -1.0);
        let h2 = typeh_heisenberg(2).unwrap();
        assert!(h2.typeh_residual() < 1e-14);
        let prod = typeh_product(&h1, &h2).unwrap();
        assert_eq!(prod.v_dim, 6);
        assert!(prod.typeh_residual() < 1e-14);
    }

    #[test]
    fn group_point_json_schema() {
        let dims = GroupDims::new(2).unwrap();
        let p = GroupPoint::new(&dims, vec![1.0, 2.0], vec![3.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"v":2,"x":[1.0,2.0],"a":[3.0]}"#);
        let back: GroupPoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn quasinorm_triangle_like(items in proptest::collection::vec(-3.0f64..3.0, 6)) {
            let dims = GroupDims::new(2).unwrap();
            let p = GroupPoint::new(&dims, vec![items[0], items[1]], vec![items[2]]).unwrap();
            let q = GroupPoint::new(&dims, vec![items[3], items[4]], vec![items[5]]).unwrap();
            let pq = product(&dims, &p, &q).unwrap();
            // quasi-norm constant for the Koranyi gauge on a step-two group
            prop_assert!(koranyi_norm(&pq) <= 2.0 * (koranyi_norm(&p) + koranyi_norm(&q)) + 1e-12);
        }

        #[test]
        fn serialization_roundtrip(items in proptest::collection::vec(-5.0f64..5.0, 9)) {
            let dims = GroupDims::new(3).unwrap();
            let p = GroupPoint::new(&dims, items[0..3].to_vec(), items[3..6].to_vec()).unwrap();
            let s = serde_json::to_string(&p).unwrap();
            let back: GroupPoint = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
