//! Bounded spherical functions for `(N_{v,2}, O(v))` and `(N_{v,2}, SO(v))`,
//! for Heisenberg pairs and Heisenberg-type groups, together with their
//! eigenvalues under the invariant differential operators and the
//! functional-equation / eigen-residual verifiers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, GroupDims, GroupPoint, TypeHModel};
use crate::matpolar::{GroupKind, OrthQuadrature};
use crate::specfun::{bessel_reduced, laguerre_norm};

/// Parameters of one bounded spherical function: the radius `r*`, the
/// weakly decreasing eigenvalue vector, the Laguerre indices (one per
/// distinct nonzero eigenvalue) and, for the special orthogonal pair, the
/// orientation sign on the last block.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalParam {
    pub v: usize,
    pub r_star: f64,
    pub lambda_star: Vec<f64>,
    pub l: Vec<u32>,
    pub epsilon: Option<i8>,
    /// number of nonzero entries of `lambda_star`
    pub v0: usize,
    /// distinct nonzero values, strictly decreasing
    pub distinct: Vec<f64>,
    /// multiplicities of the distinct values (sums to `v0`)
    pub multiplicities: Vec<usize>,
}

/// Wire format: `{"r":..., "lambda":[...], "l":[...], "eps":1|-1|null}`.
#[derive(Serialize, Deserialize)]
struct SphericalParamWire {
    r: f64,
    lambda: Vec<f64>,
    l: Vec<u32>,
    eps: Option<i8>,
}

impl SphericalParam {
    pub fn new(
        dims: &GroupDims,
        r_star: f64,
        lambda_star: Vec<f64>,
        l: Vec<u32>,
        epsilon: Option<i8>,
    ) -> Result<SphericalParam> {
        if lambda_star.len() != dims.v_prime {
            return Err(Error::DimensionMismatch {
                expected: dims.v_prime,
                got: lambda_star.len(),
            });
        }
        if r_star < 0.0 {
            return Err(Error::invalid("r_star must be nonnegative"));
        }
        for w in lambda_star.windows(2) {
            if w[0] < w[1] {
                return Err(Error::invalid("lambda_star must be weakly decreasing"));
            }
        }
        if lambda_star.last().map(|&t| t < 0.0).unwrap_or(false) {
            return Err(Error::invalid("lambda_star must be nonnegative"));
        }
        if let Some(e) = epsilon {
            if e != 1 && e != -1 {
                return Err(Error::invalid("epsilon must be +1 or -1"));
            }
        }
        // multiplicities by exact equality of the provided entries
        let mut distinct: Vec<f64> = Vec::new();
        let mut multiplicities: Vec<usize> = Vec::new();
        for &t in lambda_star.iter().filter(|&&t| t > 0.0) {
            match distinct.last() {
                Some(&d) if d == t => *multiplicities.last_mut().unwrap() += 1,
                _ => {
                    distinct.push(t);
                    multiplicities.push(1);
                }
            }
        }
        let v0: usize = multiplicities.iter().sum();
        if 2 * v0 == dims.v && r_star != 0.0 {
            return Err(Error::invalid(
                "r_star must vanish when the eigenvalues fill the whole space",
            ));
        }
        if l.len() != distinct.len() {
            return Err(Error::DimensionMismatch {
                expected: distinct.len(),
                got: l.len(),
            });
        }
        Ok(SphericalParam {
            v: dims.v,
            r_star,
            lambda_star,
            l,
            epsilon,
            v0,
            distinct,
            multiplicities,
        })
    }

    /// The pure Bessel parameter (`lambda_star = 0`).
    pub fn bessel(dims: &GroupDims, r_star: f64) -> Result<SphericalParam> {
        SphericalParam::new(dims, r_star, vec![0.0; dims.v_prime], vec![], None)
    }

    pub fn is_bessel(&self) -> bool {
        self.distinct.is_empty()
    }

    /// Running sums `m'_j` of the multiplicities, with `m'_0 = 0`.
    fn m_prime(&self) -> Vec<usize> {
        let mut out = vec![0];
        for &m in &self.multiplicities {
            out.push(out.last().unwrap() + m);
        }
        out
    }

    /// 0-based coordinate range of the `j`-th projection (half-open).
    pub fn projection_range(&self, j: usize) -> (usize, usize) {
        let mp = self.m_prime();
        (2 * mp[j], 2 * mp[j + 1])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SphericalParamWire {
            r: self.r_star,
            lambda: self.lambda_star.clone(),
            l: self.l.clone(),
            eps: self.epsilon,
        })?)
    }

    pub fn from_json(dims: &GroupDims, s: &str) -> Result<SphericalParam> {
        let w: SphericalParamWire = serde_json::from_str(s)?;
        SphericalParam::new(dims, w.r, w.lambda, w.l, w.eps)
    }

    /// Same parameter with the `j`-th Laguerre index replaced (used by the
    /// discrete shift operators acting on the spectrum).
    pub fn with_l(&self, new_l: Vec<u32>) -> SphericalParam {
        let mut p = self.clone();
        p.l = new_l;
        p
    }

    /// Same parameter with the `j`-th distinct eigenvalue moved; keeps the
    /// multiplicity structure (all entries equal to the old value move).
    pub fn with_distinct_lambda(&self, j: usize, value: f64) -> SphericalParam {
        let old = self.distinct[j];
        let mut p = self.clone();
        for t in &mut p.lambda_star {
            if *t == old {
                *t = value;
            }
        }
        for t in &mut p.distinct {
            if *t == old {
                *t = value;
            }
        }
        p
    }

    pub fn with_r_star(&self, r: f64) -> SphericalParam {
        let mut p = self.clone();
        p.r_star = r;
        p
    }
}

/// `D2^eps(Lambda*)` paired with the center coordinates in the bracket
/// basis: `sum_i s_i lambda*_i a_{(2i-1, 2i)}`.
fn center_phase(param: &SphericalParam, dims: &GroupDims, a: &[f64]) -> f64 {
    let mut phase = 0.0;
    let vp = dims.v_prime;
    for i in 0..vp {
        let sign = if i + 1 == vp {
            param.epsilon.unwrap_or(1) as f64
        } else {
            1.0
        };
        phase += sign * param.lambda_star[i] * a[dims.pair_index(2 * i, 2 * i + 1)];
    }
    phase
}

/// The integrand of the spherical average:
/// `Theta(n) = exp(i r* x_v) exp(i <D2^eps(L*), A>) prod_j Lnorm_{l_j}^{(m_j - 1)}`.
pub fn theta_eval(param: &SphericalParam, dims: &GroupDims, p: &GroupPoint) -> Result<Complex64> {
    if p.v != dims.v {
        return Err(Error::DimensionMismatch {
            expected: dims.v,
            got: p.v,
        });
    }
    if param.is_bessel() {
        return Err(Error::invalid("theta_eval requires a nonzero eigenvalue vector"));
    }
    let phase = param.r_star * p.x[dims.v - 1] + center_phase(param, dims, &p.a);
    let mut prod = 1.0;
    for (j, (&lam, &lj)) in param.distinct.iter().zip(&param.l).enumerate() {
        let (lo, hi) = param.projection_range(j);
        let norm2: f64 = p.x[lo..hi].iter().map(|t| t * t).sum();
        prod *= laguerre_norm(lj, param.multiplicities[j] as f64 - 1.0, lam * norm2 / 2.0)?;
    }
    Ok(Complex64::from_polar(1.0, phase) * prod)
}

/// Precomputed linear action of the quadrature nodes on the two coordinate
/// blocks; `a_mats` is the induced rotation in the lexicographic pair basis.
#[derive(Debug, Clone)]
pub struct KTable {
    pub group: GroupKind,
    pub weights: Vec<f64>,
    pub x_mats: Vec<DMatrix<f64>>,
    pub a_mats: Vec<DMatrix<f64>>,
}

impl KTable {
    pub fn new(dims: &GroupDims, rule: &OrthQuadrature) -> KTable {
        let v = dims.v;
        let z = dims.z;
        let mut x_mats = Vec::with_capacity(rule.nodes.len());
        let mut a_mats = Vec::with_capacity(rule.nodes.len());
        for k in &rule.nodes {
            x_mats.push(k.clone());
            let mut r = DMatrix::zeros(z, z);
            for i in 0..v {
                for j in (i + 1)..v {
                    let row = dims.pair_index(i, j);
                    for p in 0..v {
                        for q in (p + 1)..v {
                            let col = dims.pair_index(p, q);
                            r[(row, col)] = k[(i, p)] * k[(j, q)] - k[(i, q)] * k[(j, p)];
                        }
                    }
                }
            }
            a_mats.push(r);
        }
        KTable {
            group: rule.group,
            weights: rule.weights.clone(),
            x_mats,
            a_mats,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Apply node `i` to a point.
    pub fn apply(&self, i: usize, dims: &GroupDims, p: &GroupPoint) -> GroupPoint {
        let x = &self.x_mats[i] * DMatrix::from_column_slice(dims.v, 1, &p.x);
        let a = &self.a_mats[i] * DMatrix::from_column_slice(dims.z, 1, &p.a);
        GroupPoint {
            v: dims.v,
            x: x.as_slice().to_vec(),
            a: a.as_slice().to_vec(),
        }
    }
}

/// Spherical function as the group average of [`theta_eval`]; falls back to
/// the Bessel closed form when the eigenvalue vector vanishes.
pub fn phi_eval(
    param: &SphericalParam,
    dims: &GroupDims,
    p: &GroupPoint,
    table: &KTable,
) -> Result<Complex64> {
    let want_so = param.epsilon.is_some();
    let have_so = table.group == GroupKind::SO;
    if want_so != have_so {
        return Err(Error::invalid(format!(
            "group tag mismatch: parameter is {}, rule is {:?}",
            if want_so { "SO" } else { "O" },
            table.group
        )));
    }
    if param.is_bessel() {
        return Ok(Complex64::new(phi_bessel(param.r_star, dims, p)?, 0.0));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..table.len() {
        let kp = table.apply(i, dims, p);
        total += theta_eval(param, dims, &kp)? * table.weights[i];
    }
    Ok(total)
}

/// The pure Bessel spherical function `B_{(v-2)/2}(r* |x|)`.
pub fn phi_bessel(r_star: f64, dims: &GroupDims, p: &GroupPoint) -> Result<f64> {
    let nx: f64 = p.x.iter().map(|t| t * t).sum::<f64>().sqrt();
    bessel_reduced((dims.v as f64 - 2.0) / 2.0, r_star * nx)
}

/// Closed form for `v = 2`: rotations fix both coordinates of the center
/// pairing and reflections negate it, so the `O(2)` average is a cosine and
/// the `SO(2)` average is the phase itself.
pub fn phi_v2_closed(param: &SphericalParam, p: &GroupPoint) -> Result<Complex64> {
    if param.v != 2 {
        return Err(Error::invalid("closed form only for v = 2"));
    }
    if param.is_bessel() {
        let nx = (p.x[0] * p.x[0] + p.x[1] * p.x[1]).sqrt();
        return Ok(Complex64::new(bessel_reduced(0.0, param.r_star * nx)?, 0.0));
    }
    let lam = param.distinct[0];
    let x2 = p.x[0] * p.x[0] + p.x[1] * p.x[1];
    let lag = laguerre_norm(param.l[0], 0.0, lam * x2 / 2.0)?;
    match param.epsilon {
        None => Ok(Complex64::new((lam * p.a[0]).cos() * lag, 0.0)),
        Some(e) => Ok(Complex64::from_polar(1.0, e as f64 * lam * p.a[0]) * lag),
    }
}

/// Parameters of a bounded spherical function of the Heisenberg pair
/// `(H^{v0}, U_{m_1} x ... x U_{m_{v1}})`.
#[derive(Debug, Clone)]
pub struct HeisenbergParam {
    /// partition of the complex dimension, all parts positive
    pub partition: Vec<usize>,
    pub family: HeisenbergFamily,
}

#[derive(Debug, Clone)]
pub enum HeisenbergFamily {
    /// indexed by a nonzero real and one Laguerre index per part
    Laguerre { lambda: f64, l: Vec<u32> },
    /// indexed by one nonnegative radius per part
    Bessel { mu: Vec<f64> },
}

impl HeisenbergParam {
    pub fn validate(&self) -> Result<()> {
        if self.partition.iter().any(|&m| m == 0) {
            return Err(Error::invalid("partition parts must be positive"));
        }
        match &self.family {
            HeisenbergFamily::Laguerre { lambda, l } => {
                if *lambda == 0.0 {
                    return Err(Error::invalid("lambda must be nonzero"));
                }
                if l.len() != self.partition.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.partition.len(),
                        got: l.len(),
                    });
                }
            }
            HeisenbergFamily::Bessel { mu } => {
                if mu.len() != self.partition.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.partition.len(),
                        got: mu.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Bounded spherical function of the Heisenberg pair at `(z, t)`.
pub fn heisenberg_spherical(hp: &HeisenbergParam, z: &[Complex64], t: f64) -> Result<Complex64> {
    hp.validate()?;
    let v0: usize = hp.partition.iter().sum();
    if z.len() != v0 {
        return Err(Error::DimensionMismatch {
            expected: v0,
            got: z.len(),
        });
    }
    let mut offset = 0usize;
    match &hp.family {
        HeisenbergFamily::Laguerre { lambda, l } => {
            let mut prod = 1.0;
            for (j, &mj) in hp.partition.iter().enumerate() {
                let n2: f64 = z[offset..offset + mj].iter().map(|c| c.norm_sqr()).sum();
                prod *= laguerre_norm(l[j], mj as f64 - 1.0, lambda.abs() * n2 / 2.0)?;
                offset += mj;
            }
            Ok(Complex64::from_polar(1.0, -lambda * t) * prod)
        }
        HeisenbergFamily::Bessel { mu } => {
            let mut prod = 1.0;
            for (j, &mj) in hp.partition.iter().enumerate() {
                let n: f64 = z[offset..offset + mj]
                    .iter()
                    .map(|c| c.norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                prod *= bessel_reduced(mj as f64 - 1.0, mu[j] * n)?;
                offset += mj;
            }
            Ok(Complex64::new(prod, 0.0))
        }
    }
}

/// Family selector for the Heisenberg-type spherical functions.
#[derive(Debug, Clone)]
pub enum TypeHFamily {
    /// `Phi_{zeta, l}` with `zeta` a nonzero center vector
    Laguerre { zeta: Vec<f64>, l: u32 },
    /// `Phi_r`
    Bessel { r: f64 },
}

/// Bounded spherical function of a Heisenberg-type group at `(x, zvec)`.
pub fn typeh_spherical(
    model: &TypeHModel,
    family: &TypeHFamily,
    x: &[f64],
    zvec: &[f64],
) -> Result<Complex64> {
    if x.len() != model.v_dim {
        return Err(Error::DimensionMismatch {
            expected: model.v_dim,
            got: x.len(),
        });
    }
    if zvec.len() != model.z_dim {
        return Err(Error::DimensionMismatch {
            expected: model.z_dim,
            got: zvec.len(),
        });
    }
    let vp = model.v_dim / 2;
    let x2: f64 = x.iter().map(|t| t * t).sum();
    match family {
        TypeHFamily::Laguerre { zeta, l } => {
            if zeta.len() != model.z_dim {
                return Err(Error::DimensionMismatch {
                    expected: model.z_dim,
                    got: zeta.len(),
                });
            }
            let zn: f64 = zeta.iter().map(|t| t * t).sum::<f64>().sqrt();
            if zn == 0.0 {
                return Err(Error::invalid("zeta must be nonzero in the Laguerre family"));
            }
            let phase: f64 = zeta.iter().zip(zvec).map(|(a, b)| a * b).sum();
            let lag = laguerre_norm(*l, vp as f64 - 1.0, 0.5 * zn * x2)?;
            Ok(Complex64::from_polar(1.0, phase) * lag)
        }
        TypeHFamily::Bessel { r } => Ok(Complex64::new(
            bessel_reduced(vp as f64 - 1.0, r * x2.sqrt())?,
            0.0,
        )),
    }
}

/// Sub-Laplacian eigenvalue `sum_j lambda_j (2 l_j + m_j) + r*^2`.
pub fn sublaplacian_eigenvalue(param: &SphericalParam) -> f64 {
    let mut e = param.r_star * param.r_star;
    for ((&lam, &lj), &mj) in param
        .distinct
        .iter()
        .zip(&param.l)
        .zip(&param.multiplicities)
    {
        e += lam * (2.0 * lj as f64 + mj as f64);
    }
    e
}

/// Center-Laplacian eigenvalue `sum_i (lambda*_i)^2`.
pub fn center_laplacian_eigenvalue(param: &SphericalParam) -> f64 {
    param.lambda_star.iter().map(|t| t * t).sum()
}

/// Eigenvalue of the determinant operator on the center: the squared
/// product of the eigenvalues for even `v`, zero for odd `v`.
pub fn dc0_eigenvalue(param: &SphericalParam, v: usize) -> f64 {
    if v % 2 == 1 {
        return 0.0;
    }
    param.lambda_star.iter().map(|t| t * t).product()
}

fn left_translate(dims: &GroupDims, p: &GroupPoint, dx: &[f64], da: &[f64]) -> GroupPoint {
    let step = GroupPoint {
        v: dims.v,
        x: dx.to_vec(),
        a: da.to_vec(),
    };
    group::product(dims, p, &step).expect("dims checked")
}

/// `| -sum_i X_i^2 phi(p) - E_L phi(p) |` with the left-invariant fields
/// realized as derivatives along `p . exp(t X_i)` by central differences,
/// all spherical values computed with the same node set.
pub fn sublaplacian_fd_residual(
    param: &SphericalParam,
    dims: &GroupDims,
    p: &GroupPoint,
    table: &KTable,
    step: f64,
) -> Result<f64> {
    let e_l = sublaplacian_eigenvalue(param);
    let phi0 = phi_eval(param, dims, p, table)?;
    let mut lap = Complex64::new(0.0, 0.0);
    let zero_a = vec![0.0; dims.z];
    for i in 0..dims.v {
        let mut dx = vec![0.0; dims.v];
        dx[i] = step;
        let pp = left_translate(dims, p, &dx, &zero_a);
        dx[i] = -step;
        let pm = left_translate(dims, p, &dx, &zero_a);
        let second =
            (phi_eval(param, dims, &pp, table)? - phi0 * 2.0 + phi_eval(param, dims, &pm, table)?)
                / (step * step);
        lap -= second;
    }
    Ok((lap - phi0 * e_l).norm())
}

/// Same for the center Laplacian `-sum_{i<j} X_{i,j}^2`.
pub fn center_laplacian_fd_residual(
    param: &SphericalParam,
    dims: &GroupDims,
    p: &GroupPoint,
    table: &KTable,
    step: f64,
) -> Result<f64> {
    let e_z = center_laplacian_eigenvalue(param);
    let phi0 = phi_eval(param, dims, p, table)?;
    let mut lap = Complex64::new(0.0, 0.0);
    let zero_x = vec![0.0; dims.v];
    for idx in 0..dims.z {
        let mut da = vec![0.0; dims.z];
        da[idx] = step;
        let pp = left_translate(dims, p, &zero_x, &da);
        da[idx] = -step;
        let pm = left_translate(dims, p, &zero_x, &da);
        let second =
            (phi_eval(param, dims, &pp, table)? - phi0 * 2.0 + phi_eval(param, dims, &pm, table)?)
                / (step * step);
        lap -= second;
    }
    Ok((lap - phi0 * e_z).norm())
}

/// `| int_K phi(p1 . (k . p2)) dk - phi(p1) phi(p2) |` with both the outer
/// average and the inner spherical values on the same node set.
pub fn functional_equation_residual(
    param: &SphericalParam,
    dims: &GroupDims,
    p1: &GroupPoint,
    p2: &GroupPoint,
    table: &KTable,
) -> Result<f64> {
    let phi1 = phi_eval(param, dims, p1, table)?;
    let phi2 = phi_eval(param, dims, p2, table)?;
    let mut avg = Complex64::new(0.0, 0.0);
    for i in 0..table.len() {
        let kp2 = table.apply(i, dims, p2);
        let prod = group::product(dims, p1, &kp2)?;
        avg += phi_eval(param, dims, &prod, table)? * table.weights[i];
    }
    Ok((avg - phi1 * phi2).norm())
}
