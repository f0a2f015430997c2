//! Spectral-side area functions: the pairing of a spherical function with
//! the dilated unit-sphere measure, its `s`-derivatives, the weighted `L^2`
//! norm in the dilation parameter, and uniform-boundedness scans over
//! parameter grids.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::group::{GroupDims, TypeHModel};
use crate::quad::{self, Rule1d, SphereRule};
use crate::specfun::{bessel_reduced, laguerre_norm};
use crate::spherical::{SphericalParam, TypeHFamily};

/// Quadratures for the sphere-measure pairing: the radial rule carries the
/// density `2 r^{v-1} (1-r^4)^{(z-2)/2}` and the generator-sphere rule the
/// unnormalized surface measure; the center sphere is already integrated
/// into the reduced Bessel factor (carrying the center sphere area).
#[derive(Debug, Clone)]
pub struct MuQuads {
    pub v: usize,
    pub z: usize,
    pub radial: Rule1d,
    pub x_sphere: SphereRule,
    pub z_area: f64,
}

impl MuQuads {
    pub fn new(v: usize, z: usize, order: usize, seed: u64) -> MuQuads {
        MuQuads {
            v,
            z,
            radial: quad::radial_mu_rule(v, z, (32 * order).max(48)),
            x_sphere: SphereRule::new(v, order, seed),
            z_area: quad::sphere_area(z),
        }
    }

    /// For the free group `N_{v,2}`.
    pub fn for_dims(dims: &GroupDims, order: usize, seed: u64) -> MuQuads {
        MuQuads::new(dims.v, dims.z, order, seed)
    }

    /// Total mass of the unit-sphere measure.
    pub fn mu_mass(&self) -> f64 {
        let radial: f64 = self.radial.weights.iter().sum();
        radial * self.x_sphere.total_mass() * self.z_area
    }
}

/// `<mu_s, phi>` for a spherical parameter of `N_{v,2}`: the center sphere
/// integrates to a reduced Bessel factor, leaving the generator sphere and
/// the radial mixing variable:
///
/// `2 int_0^1 [ int_{S^{v-1}} e^{i s r r* x_v}
///     prod_j Lnorm_{l_j}^{(m_j-1)}(lambda_j s^2 r^2 |pr_j X|^2 / 2) dsigma_v ]
///   * |S^{z-1}| B_{(z-2)/2}(s^2 sqrt(1-r^4) |Lambda*|)
///   * r^{v-1} (1-r^4)^{(z-2)/2} dr`.
pub fn mu_phi_pairing(
    param: &SphericalParam,
    quads: &MuQuads,
    s: f64,
) -> Result<Complex64> {
    let v = quads.v;
    let lam_norm: f64 = param
        .lambda_star
        .iter()
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt();
    let alpha_z = (quads.z as f64 - 2.0) / 2.0;
    let mut total = Complex64::new(0.0, 0.0);
    for (&r, &wr) in quads.radial.nodes.iter().zip(&quads.radial.weights) {
        let root = (1.0 - r.powi(4)).max(0.0).sqrt();
        let bessel = bessel_reduced(alpha_z, s * s * root * lam_norm)?;
        let mut sphere = Complex64::new(0.0, 0.0);
        for (xn, &wx) in quads.x_sphere.nodes.iter().zip(&quads.x_sphere.weights) {
            let mut prod = 1.0;
            for (j, (&lam, &lj)) in param.distinct.iter().zip(&param.l).enumerate() {
                let (lo, hi) = param.projection_range(j);
                let n2: f64 = xn[lo..hi].iter().map(|t| t * t).sum();
                prod *= laguerre_norm(
                    lj,
                    param.multiplicities[j] as f64 - 1.0,
                    lam * s * s * r * r * n2 / 2.0,
                )?;
            }
            let phase = s * r * param.r_star * xn[v - 1];
            sphere += Complex64::from_polar(wx * prod, phase);
        }
        total += sphere * (wr * quads.z_area * bessel);
    }
    Ok(total)
}

/// `j`-th derivative of `s -> <mu_s, phi>` by central differences with one
/// Richardson step; returns the value and an error estimate. The step is
/// proportional to `s` and must satisfy `s > j * step`.
pub fn mu_phi_deriv(
    param: &SphericalParam,
    quads: &MuQuads,
    s: f64,
    j: u32,
    rel_step: f64,
) -> Result<(Complex64, f64)> {
    if !(1..=3).contains(&j) {
        return Err(Error::range(format!("derivative order {j} not in 1..=3")));
    }
    let h = rel_step * s.max(1e-3);
    if s <= j as f64 * h {
        return Err(Error::range(format!(
            "s = {s} too small for an order-{j} stencil with step {h}"
        )));
    }
    let mut eval = |x: f64| mu_phi_pairing(param, quads, x);
    let stencil = |e: &mut dyn FnMut(f64) -> Result<Complex64>,
                   h: f64|
     -> Result<Complex64> {
        Ok(match j {
            1 => (e(s + h)? - e(s - h)?) / (2.0 * h),
            2 => (e(s + h)? - e(s)? * 2.0 + e(s - h)?) / (h * h),
            _ => {
                (e(s + 2.0 * h)? - e(s + h)? * 2.0 + e(s - h)? * 2.0 - e(s - 2.0 * h)?)
                    / (2.0 * h * h * h)
            }
        })
    };
    let d_h = stencil(&mut eval, h)?;
    let d_h2 = stencil(&mut eval, h / 2.0)?;
    let richardson = (d_h2 * 4.0 - d_h) / 3.0;
    let err = (d_h2 - d_h).norm() / 3.0;
    Ok((richardson, err))
}

/// Result of an `S-hat` quadrature with a geometric tail estimate.
#[derive(Debug, Clone, Copy)]
pub struct AreaHatValue {
    pub value: f64,
    pub tail_estimate: f64,
    pub tail_flagged: bool,
}

fn area_hat_from_slope(
    s_grid: &[f64],
    integrand: &mut dyn FnMut(f64) -> Result<f64>,
    j: u32,
) -> Result<AreaHatValue> {
    let w = quad::trapezoid_weights(s_grid);
    let mut total = 0.0;
    let mut samples = Vec::with_capacity(s_grid.len());
    for (&s, &ws) in s_grid.iter().zip(&w) {
        let val = integrand(s)? * s.powi(2 * j as i32 - 1);
        samples.push(val);
        total += ws * val;
    }
    // geometric extrapolation of the last decade
    let n = s_grid.len();
    let cut = s_grid[n - 1] / 10.0;
    let split = s_grid.partition_point(|&s| s < cut);
    let mid = (split + n) / 2;
    let mass = |lo: usize, hi: usize| -> f64 {
        (lo..hi)
            .map(|i| w[i] * samples[i])
            .sum::<f64>()
            .max(0.0)
    };
    let m1 = mass(split, mid);
    let m2 = mass(mid, n - 1);
    let ratio = if m1 > 0.0 { (m2 / m1).min(0.95) } else { 0.0 };
    let tail = if ratio > 0.0 {
        m2 * ratio / (1.0 - ratio)
    } else {
        0.0
    };
    let tail_flagged = tail > 0.01 * total.max(1e-300);
    Ok(AreaHatValue {
        value: (total + tail).max(0.0).sqrt(),
        tail_estimate: tail,
        tail_flagged,
    })
}

/// `S-hat^j(phi) = sqrt( int |d_s^j <mu_s, phi>|^2 s^{2j-1} ds )` on the
/// given grid, trapezoid rule plus the geometric tail correction.
pub fn area_hat(
    param: &SphericalParam,
    quads: &MuQuads,
    j: u32,
    s_grid: &[f64],
    rel_step: f64,
) -> Result<AreaHatValue> {
    let mut integrand = |s: f64| -> Result<f64> {
        let (d, _) = mu_phi_deriv(param, quads, s, j, rel_step)?;
        Ok(d.norm_sqr())
    };
    area_hat_from_slope(s_grid, &mut integrand, j)
}

/// `<mu_s, Phi>` for a Heisenberg-type spherical function; the generator
/// sphere integrates trivially since the function depends only on `|X|`.
pub fn typeh_mu_phi(
    model: &TypeHModel,
    family: &TypeHFamily,
    quads: &MuQuads,
    s: f64,
) -> Result<Complex64> {
    if quads.v != model.v_dim || quads.z != model.z_dim {
        return Err(Error::invalid("quadrature dims do not match the model"));
    }
    let vp = model.v_dim / 2;
    let alpha_z = (quads.z as f64 - 2.0) / 2.0;
    let x_area = quads.x_sphere.total_mass();
    let mut total = 0.0;
    for (&r, &wr) in quads.radial.nodes.iter().zip(&quads.radial.weights) {
        let root = (1.0 - r.powi(4)).max(0.0).sqrt();
        let value = match family {
            TypeHFamily::Laguerre { zeta, l } => {
                let zn: f64 = zeta.iter().map(|t| t * t).sum::<f64>().sqrt();
                laguerre_norm(*l, vp as f64 - 1.0, 0.5 * zn * s * s * r * r)?
                    * bessel_reduced(alpha_z, s * s * root * zn)?
            }
            TypeHFamily::Bessel { r: rr } => {
                bessel_reduced(vp as f64 - 1.0, rr * s * r)?
            }
        };
        total += wr * value;
    }
    Ok(Complex64::new(total * x_area * quads.z_area, 0.0))
}

/// `S-hat^j` for a Heisenberg-type spherical function. Values outside the
/// uniform-bound range `1 <= j <= v' - 1` are still computed; the flag
/// reports that the requested order falls outside that range.
pub fn typeh_area_hat(
    model: &TypeHModel,
    family: &TypeHFamily,
    quads: &MuQuads,
    j: u32,
    s_grid: &[f64],
    rel_step: f64,
) -> Result<(AreaHatValue, bool)> {
    let vp = model.v_dim / 2;
    let out_of_range = !(1..vp as u32).contains(&j);
    let mut integrand = |s: f64| -> Result<f64> {
        let h = rel_step * s.max(1e-3);
        let e = |x: f64| typeh_mu_phi(model, family, quads, x);
        let d = match j {
            1 => (e(s + h)? - e(s - h)?) / (2.0 * h),
            2 => (e(s + h)? - e(s)? * 2.0 + e(s - h)?) / (h * h),
            _ => {
                (e(s + 2.0 * h)? - e(s + h)? * 2.0 + e(s - h)? * 2.0 - e(s - 2.0 * h)?)
                    / (2.0 * h * h * h)
            }
        };
        Ok(d.norm_sqr())
    };
    let v = area_hat_from_slope(s_grid, &mut integrand, j)?;
    Ok((v, out_of_range))
}

/// One scanned parameter with its `S-hat` value.
#[derive(Debug, Clone)]
pub struct AreaScanEntry {
    pub label: String,
    pub value: f64,
    pub tail_estimate: f64,
}

/// Scan report: per-parameter values and the grid maximum.
#[derive(Debug, Clone, Default)]
pub struct AreaScanReport {
    pub entries: Vec<AreaScanEntry>,
    pub max: f64,
}

impl AreaScanReport {
    pub fn from_entries(entries: Vec<AreaScanEntry>) -> AreaScanReport {
        let max = entries.iter().map(|e| e.value).fold(0.0f64, f64::max);
        AreaScanReport { entries, max }
    }
}

/// Scan `S-hat^j` over spherical parameters of `N_{v,2}`.
pub fn scan_uniform_bound(
    params: &[SphericalParam],
    quads: &MuQuads,
    j: u32,
    s_grid: &[f64],
    rel_step: f64,
) -> Result<AreaScanReport> {
    let mut entries = Vec::with_capacity(params.len());
    for p in params {
        let v = area_hat(p, quads, j, s_grid, rel_step)?;
        entries.push(AreaScanEntry {
            label: format!("r={} lambda={:?} l={:?}", p.r_star, p.lambda_star, p.l),
            value: v.value,
            tail_estimate: v.tail_estimate,
        });
    }
    Ok(AreaScanReport::from_entries(entries))
}

/// Scan `S-hat^j` over Heisenberg-type spherical functions.
pub fn scan_typeh_uniform_bound(
    model: &TypeHModel,
    families: &[TypeHFamily],
    quads: &MuQuads,
    j: u32,
    s_grid: &[f64],
    rel_step: f64,
) -> Result<AreaScanReport> {
    let mut entries = Vec::with_capacity(families.len());
    for f in families {
        let (v, _) = typeh_area_hat(model, f, quads, j, s_grid, rel_step)?;
        let label = match f {
            TypeHFamily::Laguerre { zeta, l } => {
                let zn: f64 = zeta.iter().map(|t| t * t).sum::<f64>().sqrt();
                format!("laguerre |zeta|={zn} l={l}")
            }
            TypeHFamily::Bessel { r } => format!("bessel r={r}"),
        };
        entries.push(AreaScanEntry {
            label,
            value: v.value,
            tail_estimate: v.tail_estimate,
        });
    }
    Ok(AreaScanReport::from_entries(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{self, typeh_heisenberg};
    use crate::spherical::phi_v2_closed;
    use approx::assert_abs_diff_eq;

    fn dims2() -> GroupDims {
        GroupDims::new(2).unwrap()
    }

    #[test]
    fn constant_parameter_gives_mass_for_all_s() {
        let dims = dims2();
        let quads = MuQuads::for_dims(&dims, 4, 1);
        let one = SphericalParam::bessel(&dims, 0.0).unwrap();
        let mass = quads.mu_mass();
        for &s in &[1e-3, 0.5, 2.0, 11.0] {
            let v = mu_phi_pairing(&one, &quads, s).unwrap();
            assert_abs_diff_eq!(v.re, mass, epsilon = 1e-10 * mass);
        }
    }

    #[test]
    fn small_s_limit_is_mass_and_bounded_by_mass() {
        let dims = dims2();
        let quads = MuQuads::for_dims(&dims, 4, 1);
        let param = SphericalParam::new(&dims, 0.0, vec![1.4], vec![2], None).unwrap();
        let mass = quads.mu_mass();
        let near = mu_phi_pairing(&param, &quads, 1e-5).unwrap();
        assert!((near.re - mass).abs() < 1e-6 * mass);
        for i in 1..=60 {
            let s = 0.15 * i as f64;
            let v = mu_phi_pairing(&param, &quads, s).unwrap();
            assert!(v.norm() <= mass * (1.0 + 1e-9), "s={s}");
        }
    }

    #[test]
    fn v2_pairing_matches_sphere_quadrature_of_phi() {
        // cross-method oracle: pair phi directly against the sphere measure
        let dims = dims2();
        let quads = MuQuads::for_dims(&dims, 4, 1);
        let gquads = group::SphereQuads::new(&dims, 5, 3);
        let param = SphericalParam::new(&dims, 0.0, vec![1.1], vec![1], None).unwrap();
        for &s in &[0.4, 1.0, 1.9] {
            let fast = mu_phi_pairing(&param, &quads, s).unwrap();
            let direct = group::sphere_pairing(&dims, &gquads, s, |p| {
                phi_v2_closed(&param, p).unwrap()
            });
            assert!(
                (fast - direct).norm() < 1e-4 * direct.norm().max(1.0),
                "s={s}: {fast} vs {direct}"
            );
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let dims = dims2();
        let quads = MuQuads::for_dims(&dims, 3, 1);
        let one = SphericalParam::bessel(&dims, 0.0).unwrap();
        for j in 1..=3 {
            let (d, _) = mu_phi_deriv(&one, &quads, 1.0, j, 1e-3).unwrap();
            assert!(d.norm() < 1e-7, "order {j}: {d}");
        }
        // stencil underflow guard
        assert!(mu_phi_deriv(&one, &quads, 1e-9, 3, 1e-3).is_err());
    }

    #[test]
    fn first_derivative_matches_analytic_chain_rule() {
        // v = 2, l = 0, r* = 0: both factors differentiate in closed form.
        let dims = dims2();
        let quads = MuQuads::for_dims(&dims, 5, 1);
        let lam = 1.3;
        let param = SphericalParam::new(&dims, 0.0, vec![lam], vec![0], None).unwrap();
        let s = 1.1;
        let mut analytic = 0.0;
        let x_area = quads.x_sphere.total_mass();
        for (&r, &wr) in quads.radial.nodes.iter().zip(&quads.radial.weights) {
            let root = (1.0 - r.powi(4)).max(0.0).sqrt();
            // d/ds [ e^{-lam s^2 r^2/4} cos(s^2 root lam) ], z factor |S^0| = 2
            let lag = (-lam * s * s * r * r / 4.0).exp();
            let dlag = -lam * s * r * r / 2.0 * lag;
            let c = (s * s * root * lam).cos();
            let dc = -2.0 * s * root * lam * (s * s * root * lam).sin();
            analytic += wr * quads.z_area * x_area * (dlag * c + lag * dc);
        }
        let (fd, err) = mu_phi_deriv(&param, &quads, s, 1, 1e-3).unwrap();
        assert!(
            (fd.re - analytic).abs() < 1e-5 * (1.0 + analytic.abs()),
            "{} vs {analytic} (est. err {err})",
            fd.re
        );
    }

    #[test]
    fn derivative_changes_sign_across_oscillation() {
        // pure Bessel family oscillates in s; its derivative must change sign
        let dims = GroupDims::new(3).unwrap();
        let quads = MuQuads::for_dims(&dims, 3, 1);
        let param = SphericalParam::bessel(&dims, 2.0).unwrap();
        let mut signs = Vec::new();
        for i in 1..40 {
            let s = 0.3 * i as f64;
            let (d, _) = mu_phi_deriv(&param, &quads, s, 1, 1e-3).unwrap();
            if d.re.abs() > 1e-4 {
                signs.push(d.re.signum());
            }
        }
        assert!(signs.windows(2).any(|w| w[0] != w[1]), "{signs:?}");
    }

    #[test]
    fn area_hat_constant_is_zero() {
        let dims = dims2();
        let quads = MuQuads::for_dims(&dims, 3, 1);
        let one = SphericalParam::bessel(&dims, 0.0).unwrap();
        let grid = quad::log_grid(1e-3, 30.0, 120);
        let v = area_hat(&one, &quads, 1, &grid, 1e-3).unwrap();
        assert!(v.value < 1e-5, "{}", v.value);
    }

    #[test]
    fn area_hat_finite_on_n42() {
        let dims = GroupDims::new(4).unwrap();
        let quads = MuQuads::for_dims(&dims, 2, 1);
        let param =
            SphericalParam::new(&dims, 0.0, vec![2.0, 1.0], vec![1, 0], None).unwrap();
        let grid = quad::log_grid(1e-3, 40.0, 200);
        let v = area_hat(&param, &quads, 1, &grid, 1e-3).unwrap();
        assert!(v.value.is_finite() && v.value > 0.0);
    }

    #[test]
    fn typeh_bessel_family_scale_invariant() {
        // S-hat^h(Phi_r) is independent of r: substituting s' = r s |X|
        // makes the weighted integral r-free.
        let model = typeh_heisenberg(2).unwrap(); // H^2: v = 4, z = 1
        let quads = MuQuads::new(4, 1, 3, 1);
        let grid = quad::log_grid(1e-3, 240.0, 700);
        let mut base = None;
        for &r in &[0.5, 1.0, 2.0, 4.0] {
            let fam = TypeHFamily::Bessel { r };
            let (v, out_of_range) =
                typeh_area_hat(&model, &fam, &quads, 1, &grid, 1e-3).unwrap();
            assert!(!out_of_range);
            match base {
                None => base = Some(v.value),
                Some(b) => assert!(
                    (v.value - b).abs() < 1e-3 * b,
                    "r={r}: {} vs {b}",
                    v.value
                ),
            }
        }
    }

    #[test]
    fn typeh_out_of_range_flag_and_growth() {
        // j = v' on H^1 is outside the uniform range; the truncation-limited
        // value grows as the s-window extends.
        let model = typeh_heisenberg(1).unwrap();
        let quads = MuQuads::new(2, 1, 3, 1);
        let fam = TypeHFamily::Bessel { r: 1.0 };
        let short = quad::log_grid(1e-3, 30.0, 300);
        let long = quad::log_grid(1e-3, 300.0, 600);
        let (v1, oor1) = typeh_area_hat(&model, &fam, &quads, 1, &short, 1e-3).unwrap();
        assert!(oor1); // v' = 1 leaves no valid order
        let (v2, _) = typeh_area_hat(&model, &fam, &quads, 1, &long, 1e-3).unwrap();
        assert!(
            v2.value > 1.2 * v1.value,
            "no truncation growth: {} vs {}",
            v2.value,
            v1.value
        );
    }

    #[test]
    fn typeh_laguerre_scan_finite() {
        let model = typeh_heisenberg(2).unwrap();
        let quads = MuQuads::new(4, 1, 3, 1);
        let grid = quad::log_grid(1e-3, 50.0, 300);
        let mut fams = Vec::new();
        for &zn in &[0.5, 1.0, 2.0] {
            for &l in &[0u32, 1, 3] {
                fams.push(TypeHFamily::Laguerre {
                    zeta: vec![zn],
                    l,
                });
            }
        }
        let report =
            scan_typeh_uniform_bound(&model, &fams, &quads, 1, &grid, 1e-3).unwrap();
        assert_eq!(report.entries.len(), 9);
        assert!(report.max.is_finite() && report.max > 0.0);
        for e in &report.entries {
            assert!(e.value.is_finite() && e.value >= 0.0, "{}", e.label);
        }
    }

    #[test]
    fn empty_scan_is_empty() {
        let report = AreaScanReport::from_entries(vec![]);
        assert_eq!(report.entries.len(), 0);
        assert_eq!(report.max, 0.0);
    }
}
