//! The radial Plancherel calculus on `N_{v,2}`: spectral grids over the
//! support of the Plancherel measure, the forward transform (direct and
//! reduced), inversion, Parseval verification and spectral-multiplier
//! kernels.
//!
//! Conventions: the transform pairs `f` against `phi` with no conjugation,
//! and inversion conjugates `phi`; asymmetric, but that is the formula pair
//! the calculus validates by round-trips.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, GroupDims, GroupPoint, HaarSpec};
use crate::matpolar::eta_density;
use crate::quad;
use crate::specfun::laguerre_norm;
use crate::spherical::{self, KTable, SphericalParam};

/// Normalization constant of the radial Plancherel measure.
pub fn plancherel_constant(v: usize) -> f64 {
    let z = v * (v - 1) / 2;
    let vp = v / 2;
    let two_pi = 2.0 * std::f64::consts::PI;
    if v % 2 == 0 {
        two_pi.powi(-(z as i32 + vp as i32))
    } else {
        2.0 * two_pi.powi(-(z as i32 + 1 + vp as i32))
    }
}

/// Plancherel density at a spectral parameter, per unit `dLambda`
/// (times `dr*` for odd `v`; counting measure in the Laguerre indices):
/// `c(v) * prod(lambda_j) * eta_density(Lambda)`.
pub fn plancherel_weight(param: &SphericalParam, v: usize) -> f64 {
    let prod: f64 = param.lambda_star.iter().product();
    plancherel_constant(v) * prod * eta_density(&param.lambda_star, v)
}

/// One grid atom: a spectral parameter with its Plancherel cell weight.
#[derive(Debug, Clone)]
pub struct SpectralAtom {
    pub param: SphericalParam,
    pub weight: f64,
}

/// Truncation of the spectral grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    pub l_max: u32,
    /// ignored for even `v`
    pub r_max: f64,
    pub n_r: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda_min: 0.05,
            lambda_max: 20.0,
            n_lambda: 200,
            l_max: 30,
            r_max: 12.0,
            n_r: 48,
        }
    }
}

/// Truncated quadrature over the Plancherel support.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub v: usize,
    pub spec: GridSpec,
    pub atoms: Vec<SpectralAtom>,
}

impl SpectralGrid {
    /// Log-spaced cells per eigenvalue axis, restricted to the strictly
    /// decreasing simplex (cells with unordered centers are dropped, keeping
    /// multiplicity one); uniform cells on the `r*` axis for odd `v`.
    pub fn build(dims: &GroupDims, spec: &GridSpec) -> Result<SpectralGrid> {
        let vp = dims.v_prime;
        let edges = quad::log_grid(spec.lambda_min, spec.lambda_max, spec.n_lambda + 1);
        let cells: Vec<(f64, f64)> = edges
            .windows(2)
            .map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0]))
            .collect();
        let r_cells: Vec<(f64, f64)> = if dims.v_is_even() {
            vec![(0.0, 1.0)]
        } else {
            let dr = spec.r_max / spec.n_r as f64;
            (0..spec.n_r)
                .map(|i| ((i as f64 + 0.5) * dr, dr))
                .collect()
        };
        let mut atoms = Vec::new();
        let mut idx = vec![0usize; vp];
        'cells: loop {
            let lambda: Vec<f64> = idx.iter().map(|&i| cells[i].0).collect();
            if lambda.windows(2).all(|w| w[0] > w[1]) {
                let vol: f64 = idx.iter().map(|&i| cells[i].1).product();
                for &(r, dr) in &r_cells {
                    for l in MultiIndexIter::new(vp, spec.l_max) {
                        let param =
                            SphericalParam::new(dims, r, lambda.clone(), l.clone(), None)?;
                        let w = plancherel_weight(&param, dims.v) * vol * dr;
                        if w > 0.0 {
                            atoms.push(SpectralAtom { param, weight: w });
                        }
                    }
                }
            }
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < cells.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == vp {
                    break 'cells;
                }
            }
        }
        Ok(SpectralGrid {
            v: dims.v,
            spec: *spec,
            atoms,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }
}

/// Iterate multi-indices in `{0..=cap}^dim`.
struct MultiIndexIter {
    current: Option<Vec<u32>>,
    cap: u32,
}

impl MultiIndexIter {
    fn new(dim: usize, cap: u32) -> MultiIndexIter {
        MultiIndexIter {
            current: Some(vec![0; dim]),
            cap,
        }
    }
}

impl Iterator for MultiIndexIter {
    type Item = Vec<u32>;
    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let mut d = 0;
        loop {
            if d == cur.len() {
                self.current = None;
                break;
            }
            cur[d] += 1;
            if cur[d] <= self.cap {
                break;
            }
            cur[d] = 0;
            d += 1;
        }
        Some(out)
    }
}

/// One serialized atom, optionally carrying a transform value.
#[derive(Serialize, Deserialize)]
struct AtomLine {
    r: f64,
    lambda: Vec<f64>,
    l: Vec<u32>,
    w: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<[f64; 2]>,
}

/// Serialize grid plus optional transform values as JSON lines.
pub fn write_grid_jsonl(
    grid: &SpectralGrid,
    ghat: Option<&[Complex64]>,
    out: &mut impl std::io::Write,
) -> Result<()> {
    for (i, atom) in grid.atoms.iter().enumerate() {
        let line = AtomLine {
            r: atom.param.r_star,
            lambda: atom.param.lambda_star.clone(),
            l: atom.param.l.clone(),
            w: atom.weight,
            g: ghat.map(|g| [g[i].re, g[i].im]),
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read back a grid written by [`write_grid_jsonl`].
pub fn read_grid_jsonl(
    dims: &GroupDims,
    spec: &GridSpec,
    input: &str,
) -> Result<(SpectralGrid, Vec<Complex64>)> {
    let mut atoms = Vec::new();
    let mut ghat = Vec::new();
    for line in input.lines().filter(|l| !l.trim().is_empty()) {
        let a: AtomLine = serde_json::from_str(line)?;
        let param = SphericalParam::new(dims, a.r, a.lambda, a.l, None)?;
        atoms.push(SpectralAtom {
            param,
            weight: a.w,
        });
        ghat.push(match a.g {
            Some([re, im]) => Complex64::new(re, im),
            None => Complex64::new(0.0, 0.0),
        });
    }
    Ok((
        SpectralGrid {
            v: dims.v,
            spec: *spec,
            atoms,
        },
        ghat,
    ))
}

/// Largest deviation `|f(k.p) - f(p)|` over a few seeded samples; a radial
/// function gives zero up to rounding.
pub fn radiality_defect(
    dims: &GroupDims,
    f: &mut dyn FnMut(&GroupPoint) -> Complex64,
    seed: u64,
    samples: usize,
) -> f64 {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = GroupPoint {
            v: dims.v,
            x: (0..dims.v).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            a: (0..dims.z).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        };
        let k = crate::matpolar::haar_orthogonal_sample(dims.v, &mut rng);
        let kp = group::k_action_unchecked(dims, &k, &p);
        worst = worst.max((f(&kp) - f(&p)).norm());
    }
    worst
}

/// Result of a direct transform, with a radiality spot-check.
pub struct TransformValue {
    pub value: Complex64,
    pub radiality_defect: f64,
    pub radiality_warning: bool,
    pub tail_flagged: bool,
}

/// Direct spherical transform `<f, phi> = int f(n) phi(n) dn`
/// (no conjugation) by Haar integration.
pub fn transform_direct(
    dims: &GroupDims,
    param: &SphericalParam,
    table: &KTable,
    haar_spec: &HaarSpec,
    f: &mut dyn FnMut(&GroupPoint) -> Complex64,
) -> Result<TransformValue> {
    let defect = radiality_defect(dims, f, haar_spec.seed, 5);
    let haar = group::haar_integrate_group(dims, haar_spec, |p| {
        let phi = spherical::phi_eval(param, dims, p, table).expect("dims verified");
        f(p) * phi
    });
    Ok(TransformValue {
        value: haar.value,
        radiality_defect: defect,
        radiality_warning: defect > 1e-8,
        tail_flagged: haar.tail_flagged,
    })
}

/// Quadrature orders for the reduced transform.
#[derive(Debug, Clone, Copy)]
pub struct ReducedSpec {
    /// half-width of each center axis (and the `x_v` axis for odd `v`)
    pub a_half: f64,
    /// nodes per center / `x_v` axis
    pub n_a: usize,
    /// slice radius cap per radial axis
    pub r1_max: f64,
    /// radial nodes per axis
    pub n_r1: usize,
}

impl Default for ReducedSpec {
    fn default() -> Self {
        ReducedSpec {
            a_half: 10.0,
            n_a: 96,
            r1_max: 8.0,
            n_r1: 72,
        }
    }
}

impl ReducedSpec {
    /// Smaller tensor orders for the higher-dimensional center.
    pub fn coarse() -> ReducedSpec {
        ReducedSpec {
            a_half: 5.0,
            n_a: 22,
            r1_max: 5.0,
            n_r1: 40,
        }
    }
}

/// Reduced spherical transform at the parameter: see
/// [`transform_reduced_batch`] for the formula and sharing.
pub fn transform_reduced(
    dims: &GroupDims,
    param: &SphericalParam,
    spec: &ReducedSpec,
    f: &mut dyn FnMut(&GroupPoint) -> Complex64,
) -> Result<Complex64> {
    if param.distinct.len() != dims.v_prime {
        return Err(Error::invalid(
            "reduced transform needs strictly decreasing positive eigenvalues",
        ));
    }
    let vals = transform_reduced_batch(
        dims,
        &param.lambda_star,
        param.r_star,
        std::slice::from_ref(&param.l),
        spec,
        f,
    )?;
    Ok(vals[0])
}

/// Reduced spherical transform for several Laguerre indices sharing one
/// `(Lambda, r*)`:
///
/// `<f, phi> = (2 pi)^{v'} int F(r_1..r_{v'}) prod_j L0_{l_j}(lambda_j r_j^2 / 2) r_j dr_j`,
///
/// where `F` is the partial Fourier transform of the slice
/// `f(exp(sum_i r_i X_{2i-1} + x_v X_v + A))` in the center coordinates at
/// `D2(Lambda)` and in `x_v` at `r*` (odd `v` only). `F` does not depend on
/// the Laguerre indices, so it is computed once on the radial grid and
/// reused for the whole batch.
pub fn transform_reduced_batch(
    dims: &GroupDims,
    lambda: &[f64],
    r_star: f64,
    l_list: &[Vec<u32>],
    spec: &ReducedSpec,
    f: &mut dyn FnMut(&GroupPoint) -> Complex64,
) -> Result<Vec<Complex64>> {
    let vp = dims.v_prime;
    if lambda.len() != vp || lambda.iter().any(|&t| t <= 0.0) {
        return Err(Error::invalid(
            "reduced transform needs positive eigenvalues on every axis",
        ));
    }
    let odd = !dims.v_is_even();
    let gl_r = quad::gauss_legendre_on(spec.n_r1, 0.0, spec.r1_max);
    let gl_a = quad::gauss_legendre_on(spec.n_a, -spec.a_half, spec.a_half);
    let n_axes = dims.z + usize::from(odd);

    // F on the tensor radial grid
    let r_count = gl_r.nodes.len().pow(vp as u32);
    let mut f_slice = vec![Complex64::new(0.0, 0.0); r_count];
    let mut ridx = vec![0usize; vp];
    for slot in f_slice.iter_mut() {
        // slice base point: sum_i r_i X_{2i-1}
        let mut x = vec![0.0; dims.v];
        for (i, &ri) in ridx.iter().enumerate() {
            x[2 * i] = gl_r.nodes[ri];
        }
        // tensor integral over the center (and x_v for odd v)
        let mut acc = Complex64::new(0.0, 0.0);
        let mut aidx = vec![0usize; n_axes];
        loop {
            let mut wt = 1.0;
            let mut a = vec![0.0; dims.z];
            for (ax, &ia) in aidx.iter().enumerate().take(dims.z) {
                a[ax] = gl_a.nodes[ia];
                wt *= gl_a.weights[ia];
            }
            let mut xv = 0.0;
            if odd {
                xv = gl_a.nodes[aidx[dims.z]];
                wt *= gl_a.weights[aidx[dims.z]];
            }
            let mut phase = r_star * xv;
            for j in 0..vp {
                phase += lambda[j] * a[dims.pair_index(2 * j, 2 * j + 1)];
            }
            let mut xx = x.clone();
            if odd {
                xx[dims.v - 1] = xv;
            }
            let p = GroupPoint {
                v: dims.v,
                x: xx,
                a,
            };
            acc += f(&p) * Complex64::from_polar(wt, phase);
            let mut d = 0;
            loop {
                if d == n_axes {
                    break;
                }
                aidx[d] += 1;
                if aidx[d] < gl_a.nodes.len() {
                    break;
                }
                aidx[d] = 0;
                d += 1;
            }
            if d == n_axes {
                break;
            }
        }
        *slot = acc;
        let mut d = 0;
        loop {
            if d == vp {
                break;
            }
            ridx[d] += 1;
            if ridx[d] < gl_r.nodes.len() {
                break;
            }
            ridx[d] = 0;
            d += 1;
        }
    }

    // integrate against the Laguerre factors for each requested index
    let prefactor = (2.0 * std::f64::consts::PI).powi(vp as i32);
    let mut out = Vec::with_capacity(l_list.len());
    for l in l_list {
        if l.len() != vp {
            return Err(Error::DimensionMismatch {
                expected: vp,
                got: l.len(),
            });
        }
        let mut total = Complex64::new(0.0, 0.0);
        let mut ridx = vec![0usize; vp];
        for fval in &f_slice {
            let mut w = 1.0;
            for (j, &ri) in ridx.iter().enumerate() {
                let r = gl_r.nodes[ri];
                w *= gl_r.weights[ri]
                    * r
                    * laguerre_norm(l[j], 0.0, lambda[j] * r * r / 2.0)?;
            }
            total += fval * w;
            let mut d = 0;
            loop {
                if d == vp {
                    break;
                }
                ridx[d] += 1;
                if ridx[d] < gl_r.nodes.len() {
                    break;
                }
                ridx[d] = 0;
                d += 1;
            }
        }
        out.push(total * prefactor);
    }
    Ok(out)
}

/// Inversion: `f(p) = sum_atoms conj(phi_atom(p)) ghat(atom) weight`.
/// The spherical evaluator is supplied by the caller (closed form for
/// `v = 2`, quadrature otherwise).
pub fn inversion(
    grid: &SpectralGrid,
    ghat: &[Complex64],
    p: &GroupPoint,
    phi: &mut dyn FnMut(&SphericalParam, &GroupPoint) -> Result<Complex64>,
) -> Result<Complex64> {
    if ghat.len() != grid.atoms.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.atoms.len(),
            got: ghat.len(),
        });
    }
    let mut total = Complex64::new(0.0, 0.0);
    for (atom, &g) in grid.atoms.iter().zip(ghat) {
        total += phi(&atom.param, p)?.conj() * g * atom.weight;
    }
    Ok(total)
}

/// `| ||f||^2 - sum |ghat|^2 w |`, both sides supplied by the caller's
/// quadratures.
pub fn parseval_residual(f_norm_sq: f64, grid: &SpectralGrid, ghat: &[Complex64]) -> f64 {
    let spectral: f64 = grid
        .atoms
        .iter()
        .zip(ghat)
        .map(|(a, g)| a.weight * g.norm_sqr())
        .sum();
    (f_norm_sq - spectral).abs()
}

/// Spectral-side mass `sum |ghat|^2 w`.
pub fn spectral_norm_sq(grid: &SpectralGrid, ghat: &[Complex64]) -> f64 {
    grid.atoms
        .iter()
        .zip(ghat)
        .map(|(a, g)| a.weight * g.norm_sqr())
        .sum()
}

/// `L^2` norm squared of a `v = 2` radial function via the cylindrical
/// reduction `2 pi int |f(rho, a)|^2 rho drho da`.
pub fn l2_norm_sq_radial_v2(
    f: &mut dyn FnMut(&GroupPoint) -> Complex64,
    rho_max: f64,
    a_half: f64,
    n_rho: usize,
    n_a: usize,
) -> f64 {
    let gr = quad::gauss_legendre_on(n_rho, 0.0, rho_max);
    let ga = quad::gauss_legendre_on(n_a, -a_half, a_half);
    let mut total = 0.0;
    for (&rho, &wr) in gr.nodes.iter().zip(&gr.weights) {
        for (&a, &wa) in ga.nodes.iter().zip(&ga.weights) {
            let p = GroupPoint {
                v: 2,
                x: vec![rho, 0.0],
                a: vec![a],
            };
            total += wr * wa * rho * f(&p).norm_sqr();
        }
    }
    2.0 * std::f64::consts::PI * total
}

/// A spectral-multiplier kernel: the radial function whose transform is
/// `m(E_L(phi))`, realized through grid inversion.
pub struct MultiplierKernel {
    pub grid: SpectralGrid,
    pub ghat: Vec<Complex64>,
    /// relative weight of the outermost truncation decade, a decay check
    pub tail_fraction: f64,
    pub tail_flagged: bool,
}

pub fn multiplier_kernel(
    grid: &SpectralGrid,
    m_fn: &mut dyn FnMut(f64) -> Complex64,
) -> MultiplierKernel {
    let ghat: Vec<Complex64> = grid
        .atoms
        .iter()
        .map(|a| m_fn(spherical::sublaplacian_eigenvalue(&a.param)))
        .collect();
    // decay diagnostic: spectral mass carried by the outer tenth of the
    // eigenvalue range relative to the total
    let e_max = grid
        .atoms
        .iter()
        .map(|a| spherical::sublaplacian_eigenvalue(&a.param))
        .fold(0.0f64, f64::max);
    let cut = 0.9 * e_max;
    let (mut outer, mut total) = (0.0, 0.0);
    for (a, g) in grid.atoms.iter().zip(&ghat) {
        let mass = a.weight * g.norm_sqr();
        total += mass;
        if spherical::sublaplacian_eigenvalue(&a.param) > cut {
            outer += mass;
        }
    }
    let tail_fraction = if total > 0.0 { outer / total } else { 0.0 };
    MultiplierKernel {
        grid: grid.clone(),
        ghat,
        tail_fraction,
        tail_flagged: tail_fraction > 1e-6,
    }
}

impl MultiplierKernel {
    pub fn eval(
        &self,
        p: &GroupPoint,
        phi: &mut dyn FnMut(&SphericalParam, &GroupPoint) -> Result<Complex64>,
    ) -> Result<Complex64> {
        inversion(&self.grid, &self.ghat, p, phi)
    }
}
