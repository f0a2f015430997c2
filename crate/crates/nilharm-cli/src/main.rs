//! Command-line entry point: every computation and verification suite of
//! the library, with machine-readable reports.
//!
//! Exit status: 0 when all checks pass, 1 on a numerical check failure,
//! 2 on a configuration error.

mod report;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use report::{Check, Report};
use serde_json::json;

use nilharm::group::{self, GroupDims, GroupPoint, HaarSpec};
use nilharm::matpolar::{self, GroupKind, OrthQuadrature};
use nilharm::multiplier::{self, MultIndex, SpecPoint, SupportBox};
use nilharm::plancherel::{self, GridSpec, ReducedSpec, SpectralGrid};
use nilharm::quad;
use nilharm::specfun::{self, SeqOperator};
use nilharm::spherical::{self, KTable, SphericalParam, TypeHFamily};
use nilharm::{areafn, C64};

#[derive(Parser)]
#[command(name = "nilharm", version, about = "radial Fourier calculus checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// number of group generators
    #[arg(long, default_value_t = 2)]
    v: usize,
    /// orthogonal group variant
    #[arg(long, value_parser = ["O", "SO"], default_value = "O")]
    group: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// quadrature order scale
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// spectral truncation: largest Laguerre index
    #[arg(long, default_value_t = 30)]
    lmax: u32,
    /// spectral truncation: eigenvalue range "a,b"
    #[arg(long, default_value = "0.05,20", value_parser = parse_range)]
    lambda_range: (f64, f64),
    /// spectral truncation: largest radius (odd v)
    #[arg(long, default_value_t = 12.0)]
    rmax: f64,
    /// tolerance override applied to every check of the command
    #[arg(long)]
    tol: Option<f64>,
    /// report path (stdout when absent)
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    #[arg(long, value_parser = ["json", "csv"], default_value = "json")]
    format: String,
    /// include wall-clock timing in the report (breaks bit-identity)
    #[arg(long, default_value_t = false)]
    timings: bool,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected two comma-separated numbers".into());
    }
    let a: f64 = parts[0].parse().map_err(|e| format!("{e}"))?;
    let b: f64 = parts[1].parse().map_err(|e| format!("{e}"))?;
    if !(a > 0.0 && b > a) {
        return Err("need 0 < a < b".into());
    }
    Ok((a, b))
}

#[derive(Subcommand)]
enum Command {
    /// Special-function identities: orthonormality, ODE residuals, shifts
    SpecfunCheck,
    /// Group arithmetic and polar decomposition of Haar measure
    GroupCheck,
    /// Antisymmetric-matrix polar coordinates and Haar quadrature
    PolarCheck,
    /// Spherical functions
    Spherical {
        #[command(subcommand)]
        action: SphericalCmd,
    },
    /// Radial Plancherel calculus
    Plancherel {
        #[command(subcommand)]
        action: PlancherelCmd,
    },
    /// Spectral-side area functions
    Areafn {
        #[command(subcommand)]
        action: AreafnCmd,
    },
    /// Dyadic multiplier machinery
    Multiplier {
        #[command(subcommand)]
        action: MultiplierCmd,
    },
}

#[derive(Subcommand)]
enum SphericalCmd {
    /// Evaluate a spherical function at sample points
    Eval {
        /// parameter as JSON {"r":..,"lambda":[..],"l":[..],"eps":..}
        #[arg(long)]
        param: Option<String>,
    },
    /// Finite-difference eigenvalue residuals
    Eigencheck,
    /// Functional-equation residual on random pairs
    FunceqCheck,
}

#[derive(Subcommand)]
enum PlancherelCmd {
    /// Bump round-trip through inversion and the forward transform
    Roundtrip,
    /// Norm identity between the group and spectral sides
    Parseval,
    /// Heat-multiplier kernel round-trip
    Kernel {
        /// diffusion time of the heat multiplier
        #[arg(long, default_value_t = 0.35)]
        time: f64,
    },
}

#[derive(Subcommand)]
enum AreafnCmd {
    /// Pair a spherical function against the dilated sphere measure
    Pair {
        #[arg(long)]
        param: Option<String>,
        /// dilation values, comma separated
        #[arg(long, default_value = "0.5,1,2")]
        s: String,
    },
    /// Derivatives of the pairing in the dilation parameter
    Deriv {
        #[arg(long)]
        param: Option<String>,
        #[arg(long, default_value_t = 1)]
        j: u32,
        #[arg(long, default_value = "0.5,1,2")]
        s: String,
    },
    /// Uniform-bound scan with grid-extent doubling
    Scan {
        /// scan the Heisenberg-type model H^2 instead of the free group
        #[arg(long, default_value_t = false)]
        typeh: bool,
        #[arg(long, default_value_t = 1)]
        j: u32,
    },
}

#[derive(Subcommand)]
enum MultiplierCmd {
    /// Partition of unity and support bookkeeping on random spectrum points
    PartitionCheck {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Parameter-side realization of |X|^2
    XiCheck,
    /// Parameter-side realization of |A|^2
    AlephCheck,
    /// Weighted summability criterion on a one-cell bump
    Criterion {
        /// regularity exponent, must exceed Q/2
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

fn group_kind(s: &str) -> GroupKind {
    if s == "SO" {
        GroupKind::SO
    } else {
        GroupKind::O
    }
}

/// Haar quadrature with optional on-disk caching under `NILHARM_CACHE`.
fn cached_haar(v: usize, group: GroupKind, order: usize, seed: u64) -> OrthQuadrature {
    let tag = match group {
        GroupKind::O => "O",
        GroupKind::SO => "SO",
    };
    if let Ok(dir) = std::env::var("NILHARM_CACHE") {
        let path = std::path::Path::new(&dir)
            .join(format!("haar_v{v}_{tag}_o{order}_s{seed}.json"));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(rule) = OrthQuadrature::from_json(&text) {
                return rule;
            }
        }
        let rule = matpolar::haar_quadrature(v, group, order, seed);
        let _ = std::fs::create_dir_all(&dir);
        if let Ok(text) = rule.to_json() {
            let _ = std::fs::write(&path, text);
        }
        return rule;
    }
    matpolar::haar_quadrature(v, group, order, seed)
}

fn sample_param(dims: &GroupDims, group: GroupKind) -> SphericalParam {
    let vp = dims.v_prime;
    let lambda: Vec<f64> = (0..vp).map(|i| 1.5 - 0.5 * i as f64 / vp as f64).collect();
    let l: Vec<u32> = (0..vp).map(|i| (i as u32 + 1) % 3).collect();
    let eps = match group {
        GroupKind::O => None,
        GroupKind::SO => Some(1),
    };
    let r = if 2 * vp == dims.v { 0.0 } else { 0.7 };
    SphericalParam::new(dims, r, lambda, l, eps).expect("sample parameter")
}

fn parse_param(
    dims: &GroupDims,
    group: GroupKind,
    text: &Option<String>,
) -> Result<SphericalParam, String> {
    match text {
        None => Ok(sample_param(dims, group)),
        Some(t) => SphericalParam::from_json(dims, t).map_err(|e| e.to_string()),
    }
}

fn random_point(dims: &GroupDims, rng: &mut ChaCha8Rng, scale: f64) -> GroupPoint {
    GroupPoint {
        v: dims.v,
        x: (0..dims.v).map(|_| rng.gen_range(-scale..scale)).collect(),
        a: (0..dims.z).map(|_| rng.gen_range(-scale..scale)).collect(),
    }
}

fn main() {
    let cli = Cli::parse();
    let start = std::time::Instant::now();
    let mut report = match run(&cli) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("configuration error: {msg}");
            std::process::exit(2);
        }
    };
    if cli.common.timings {
        report.timing_ms = Some(start.elapsed().as_millis());
    }
    if let Err(e) = report.write(cli.common.out.as_deref(), &cli.common.format) {
        eprintln!("cannot write report: {e}");
        std::process::exit(2);
    }
    std::process::exit(if report.pass { 0 } else { 1 });
}

fn run(cli: &Cli) -> Result<Report, String> {
    let c = &cli.common;
    let dims = GroupDims::new(c.v).map_err(|e| e.to_string())?;
    let kind = group_kind(&c.group);
    let tol = |default: f64| c.tol.unwrap_or(default);
    match &cli.command {
        Command::SpecfunCheck => specfun_check(c, tol(0.0)),
        Command::GroupCheck => group_check(c, &dims),
        Command::PolarCheck => polar_check(c, &dims, kind),
        Command::Spherical { action } => spherical_cmd(c, &dims, kind, action),
        Command::Plancherel { action } => plancherel_cmd(c, &dims, action),
        Command::Areafn { action } => areafn_cmd(c, &dims, kind, action),
        Command::Multiplier { action } => multiplier_cmd(c, &dims, action),
    }
}

fn inputs_json(c: &Common) -> serde_json::Value {
    json!({
        "v": c.v,
        "group": c.group,
        "order": c.order,
        "lmax": c.lmax,
        "lambda_range": [c.lambda_range.0, c.lambda_range.1],
        "rmax": c.rmax,
    })
}

fn specfun_check(c: &Common, tol_override: f64) -> Result<Report, String> {
    let mut rep = Report::new("specfun-check", inputs_json(c), c.seed);
    let t = |d: f64| if tol_override > 0.0 { tol_override } else { d };

    // Laguerre orthonormality, n, m <= 20
    let rule = quad::gauss_laguerre(64, 0.0);
    let mut worst: f64 = 0.0;
    for n in 0..=20u32 {
        for m in n..=20u32 {
            let v = rule.integrate(|x| {
                specfun::laguerre_poly(n, 0.0, x) * specfun::laguerre_poly(m, 0.0, x)
            });
            let expect = if n == m { 1.0 } else { 0.0 };
            worst = worst.max((v - expect).abs());
        }
    }
    rep.push(Check::residual("laguerre-orthonormality", worst, t(1e-8)));

    // Bessel ODE residual on 50 points
    let mut worst = 0.0f64;
    for &(n, mu) in &[(1.0, 1.0), (2.0, 3.0)] {
        for i in 1..=50 {
            let x = 0.3 * i as f64;
            let h = 1e-4 * x.max(0.3);
            let f = |x: f64| specfun::bessel_reduced(n - 1.0, mu * x.sqrt()).unwrap();
            let y = f(x);
            let y1 = (f(x + h) - f(x - h)) / (2.0 * h);
            let y2 = (f(x + h) - 2.0 * y + f(x - h)) / (h * h);
            let res = (4.0 * x * y2 + 4.0 * n * y1 + mu * mu * y).abs()
                / (1.0 + (mu * mu * y).abs());
            worst = worst.max(res);
        }
    }
    rep.push(Check::residual("bessel-ode-residual", worst, t(1e-6)));

    // shift identities on the Laguerre family
    let mut worst = 0.0f64;
    for l in 0..=30u32 {
        for i in 0..=20 {
            let x = 2.0 * i as f64;
            let seq = move |k: u32| {
                Complex64::new(specfun::laguerre_norm(k, 0.0, x).unwrap(), 0.0)
            };
            let lx = specfun::laguerre_norm(l, 0.0, x).unwrap();
            let lpx = specfun::laguerre_norm_deriv(l, 0.0, x, 1).unwrap();
            worst = worst.max((SeqOperator::Beta.apply(&seq, l).re - x * lx).abs());
            worst = worst.max((SeqOperator::Alpha.apply(&seq, l).re - x * lpx).abs());
            let dseq = move |k: u32| {
                Complex64::new(specfun::laguerre_norm_deriv(k, 0.0, x, 1).unwrap(), 0.0)
            };
            let gamma = SeqOperator::Gamma.apply(&seq, l);
            let alpha_d = SeqOperator::Alpha.apply(&dseq, l);
            worst = worst.max((gamma - alpha_d).norm());
        }
    }
    rep.push(Check::residual("laguerre-shift-identities", worst, t(1e-9)));

    // Hermite-Weber normalization
    let grid = quad::gauss_legendre_on(400, -20.0, 20.0);
    let mut worst = 0.0f64;
    for &k in &[0u32, 1, 5, 20] {
        let nrm = grid.integrate(|x| specfun::hermite_weber(k, x).unwrap().powi(2));
        worst = worst.max((nrm - 1.0).abs());
    }
    rep.push(Check::residual("hermite-weber-l2-norm", worst, t(1e-6)));
    Ok(rep)
}

fn group_check(c: &Common, dims: &GroupDims) -> Result<Report, String> {
    let mut rep = Report::new("group-check", inputs_json(c), c.seed);
    let t = |d: f64| c.tol.unwrap_or(d);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = random_point(dims, &mut rng, 2.0);
        let q = random_point(dims, &mut rng, 2.0);
        let r = random_point(dims, &mut rng, 2.0);
        let left = group::product(dims, &group::product(dims, &p, &q).unwrap(), &r).unwrap();
        let right = group::product(dims, &p, &group::product(dims, &q, &r).unwrap()).unwrap();
        for (a, b) in left.x.iter().zip(&right.x).chain(left.a.iter().zip(&right.a)) {
            worst = worst.max((a - b).abs());
        }
    }
    rep.push(Check::residual("product-associativity", worst, t(1e-12)));

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = random_point(dims, &mut rng, 2.0);
        let r: f64 = rng.gen_range(0.1..4.0);
        let lhs = group::koranyi_norm(&group::dilate(r, &p).unwrap());
        worst = worst.max((lhs - r * group::koranyi_norm(&p)).abs());
    }
    rep.push(Check::residual("koranyi-homogeneity", worst, t(1e-12)));

    let quads = group::SphereQuads::new(dims, c.order.max(3), c.seed);
    let spec = if dims.v == 2 {
        HaarSpec::default()
    } else {
        HaarSpec {
            x_half: 4.0,
            a_half: 4.0,
            order: 40,
            seed: c.seed,
        }
    };
    let mut f = |p: &GroupPoint| {
        C64::new(
            (-p.x.iter().map(|t| t * t).sum::<f64>()
                - p.a.iter().map(|t| t * t).sum::<f64>())
            .exp(),
            0.0,
        )
    };
    let res = group::polar_identity_residual(dims, &quads, &spec, 6.0, 160, &mut f);
    let scale = std::f64::consts::PI.powf((dims.v + dims.z) as f64 / 2.0);
    let tol_polar = if dims.v == 2 { t(1e-4) } else { t(1e-2) };
    rep.push(Check::residual(
        "polar-identity-relative-residual",
        res / scale,
        tol_polar,
    ));
    Ok(rep)
}

fn polar_check(c: &Common, dims: &GroupDims, kind: GroupKind) -> Result<Report, String> {
    let mut rep = Report::new("polar-check", inputs_json(c), c.seed);
    let t = |d: f64| c.tol.unwrap_or(d);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let v = dims.v;

    let mut worst = 0.0f64;
    let mut det_ok = true;
    for _ in 0..1000 {
        let mut a = nalgebra::DMatrix::zeros(v, v);
        for i in 0..v {
            for j in (i + 1)..v {
                let t: f64 = rng.gen_range(-2.0..2.0);
                a[(i, j)] = t;
                a[(j, i)] = -t;
            }
        }
        let p = matpolar::antisym_polar(&a, kind).map_err(|e| e.to_string())?;
        worst = worst.max(p.reconstruction_residual(&a));
        if kind == GroupKind::SO && p.k.determinant() < 0.0 {
            det_ok = false;
        }
    }
    rep.push(Check::residual("polar-reconstruction", worst, t(1e-9)));
    if kind == GroupKind::SO {
        rep.push(Check::residual(
            "polar-so-determinant",
            if det_ok { 0.0 } else { 1.0 },
            0.5,
        ));
    }

    // Gaussian integral through polar coordinates
    let rule = cached_haar(v, GroupKind::O, c.order.max(3), c.seed);
    let got = matpolar::polar_integrate_antisym(v, &rule, 70, 7.0, |m| {
        let mut s = 0.0;
        for i in 0..v {
            for j in (i + 1)..v {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        (-s).exp()
    });
    let expect = std::f64::consts::PI.powf(dims.z as f64 / 2.0);
    let tol_g = if v == 2 { t(1e-4) } else { t(0.01) };
    rep.push(Check::residual(
        "polar-gaussian-integral",
        (got - expect).abs() / expect,
        tol_g,
    ));

    // the calibration constant for v = 2 is exactly 2
    if v == 2 {
        rep.push(Check::residual(
            "eta-constant-v2",
            (matpolar::eta_constant(2) - 2.0).abs(),
            t(1e-9),
        ));
    }
    Ok(rep)
}

fn spherical_cmd(
    c: &Common,
    dims: &GroupDims,
    kind: GroupKind,
    action: &SphericalCmd,
) -> Result<Report, String> {
    let table = KTable::new(dims, &cached_haar(dims.v, kind, c.order, c.seed));
    let t = |d: f64| c.tol.unwrap_or(d);
    match action {
        SphericalCmd::Eval { param } => {
            let p = parse_param(dims, kind, param)?;
            let mut rep = Report::new("spherical-eval", inputs_json(c), c.seed);
            let e = GroupPoint::identity(dims);
            let at_e = spherical::phi_eval(&p, dims, &e, &table).map_err(|e| e.to_string())?;
            rep.push(Check::residual(
                "identity-value-one",
                (at_e - C64::new(1.0, 0.0)).norm(),
                t(1e-12),
            ));
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let mut worst = 0.0f64;
            let mut samples = Vec::new();
            for _ in 0..500 {
                let n = random_point(dims, &mut rng, 2.5);
                let val = spherical::phi_eval(&p, dims, &n, &table).map_err(|e| e.to_string())?;
                worst = worst.max(val.norm() - 1.0);
                if samples.len() < 5 {
                    samples.push(json!({"x": n.x, "a": n.a, "phi": [val.re, val.im]}));
                }
            }
            rep.push(Check::residual("bounded-by-one", worst.max(0.0), t(1e-6)));
            rep.values = json!({ "param": serde_json::from_str::<serde_json::Value>(&p.to_json().unwrap()).unwrap(), "samples": samples });
            Ok(rep)
        }
        SphericalCmd::Eigencheck => {
            let p = sample_param(dims, kind);
            let mut rep = Report::new("spherical-eigencheck", inputs_json(c), c.seed);
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let e_l = spherical::sublaplacian_eigenvalue(&p);
            let e_z = spherical::center_laplacian_eigenvalue(&p);
            let mut worst_l = 0.0f64;
            let mut worst_z = 0.0f64;
            for _ in 0..5 {
                let n = random_point(dims, &mut rng, 0.8);
                worst_l = worst_l.max(
                    spherical::sublaplacian_fd_residual(&p, dims, &n, &table, 1e-3)
                        .map_err(|e| e.to_string())?,
                );
                worst_z = worst_z.max(
                    spherical::center_laplacian_fd_residual(&p, dims, &n, &table, 1e-3)
                        .map_err(|e| e.to_string())?,
                );
            }
            rep.push(Check::residual(
                "sublaplacian-eigen-residual",
                worst_l / (1.0 + e_l),
                t(1e-4),
            ));
            rep.push(Check::residual(
                "center-laplacian-eigen-residual",
                worst_z / (1.0 + e_z),
                t(1e-4),
            ));
            rep.values = json!({"sublaplacian_eigenvalue": e_l, "center_eigenvalue": e_z});
            Ok(rep)
        }
        SphericalCmd::FunceqCheck => {
            let p = sample_param(dims, kind);
            let mut rep = Report::new("spherical-funceq-check", inputs_json(c), c.seed);
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let mut worst = 0.0f64;
            let reps = if dims.v >= 3 { 2 } else { 6 };
            for _ in 0..reps {
                let p1 = random_point(dims, &mut rng, 1.2);
                let p2 = random_point(dims, &mut rng, 1.2);
                worst = worst.max(
                    spherical::functional_equation_residual(&p, dims, &p1, &p2, &table)
                        .map_err(|e| e.to_string())?,
                );
            }
            let tol_fe = if dims.v == 2 { t(1e-6) } else { t(1e-3) };
            rep.push(Check::residual("functional-equation", worst, tol_fe));
            Ok(rep)
        }
    }
}

fn gaussian(p: &GroupPoint) -> C64 {
    let s: f64 = p.x.iter().chain(&p.a).map(|t| t * t).sum();
    C64::new((-s / 2.0).exp(), 0.0)
}

fn plancherel_cmd(
    c: &Common,
    dims: &GroupDims,
    action: &PlancherelCmd,
) -> Result<Report, String> {
    if dims.v != 2 {
        return Err("the plancherel verification suite runs on --v 2".into());
    }
    let t = |d: f64| c.tol.unwrap_or(d);
    let spec = GridSpec {
        lambda_min: c.lambda_range.0,
        lambda_max: c.lambda_range.1.min(8.0),
        n_lambda: 64,
        l_max: c.lmax.min(6),
        r_max: c.rmax,
        n_r: 16,
    };
    let grid = SpectralGrid::build(dims, &spec).map_err(|e| e.to_string())?;
    let bump = |p: &SphericalParam| -> C64 {
        let lam = p.lambda_star[0];
        C64::new(
            (-(lam - 2.0) * (lam - 2.0) / 0.18).exp() * (-(p.l[0] as f64)).exp(),
            0.0,
        )
    };
    match action {
        PlancherelCmd::Roundtrip => {
            let mut rep = Report::new("plancherel-roundtrip", inputs_json(c), c.seed);
            let ghat: Vec<C64> = grid.atoms.iter().map(|a| bump(&a.param)).collect();
            let f_eval = |p: &GroupPoint| -> C64 {
                let mut phi =
                    |q: &SphericalParam, n: &GroupPoint| spherical::phi_v2_closed(q, n);
                plancherel::inversion(&grid, &ghat, p, &mut phi).unwrap()
            };
            let rspec = ReducedSpec {
                a_half: 14.0,
                n_a: 128,
                r1_max: 9.0,
                n_r1: 80,
            };
            let mut worst = 0.0f64;
            let mut n_checked = 0;
            for atom in &grid.atoms {
                let g = bump(&atom.param);
                if g.re < 0.05 {
                    continue;
                }
                let mut f = f_eval;
                let back = plancherel::transform_reduced(dims, &atom.param, &rspec, &mut f)
                    .map_err(|e| e.to_string())?;
                worst = worst.max((back - g).norm() / g.norm());
                n_checked += 1;
            }
            rep.push(
                Check::residual("roundtrip-relative-error", worst, t(0.02))
                    .with_detail(format!("{n_checked} atoms on the bump support")),
            );
            Ok(rep)
        }
        PlancherelCmd::Parseval => {
            let mut rep = Report::new("plancherel-parseval", inputs_json(c), c.seed);
            let ghat: Vec<C64> = grid.atoms.iter().map(|a| bump(&a.param)).collect();
            let mut f = |p: &GroupPoint| -> C64 {
                let mut phi =
                    |q: &SphericalParam, n: &GroupPoint| spherical::phi_v2_closed(q, n);
                plancherel::inversion(&grid, &ghat, p, &mut phi).unwrap()
            };
            let group_side = plancherel::l2_norm_sq_radial_v2(&mut f, 9.0, 16.0, 160, 320);
            let res = plancherel::parseval_residual(group_side, &grid, &ghat);
            rep.push(Check::residual(
                "parseval-relative-residual",
                res / group_side,
                t(0.02),
            ));
            rep.values = json!({"group_norm_sq": group_side,
                "spectral_norm_sq": plancherel::spectral_norm_sq(&grid, &ghat)});
            Ok(rep)
        }
        PlancherelCmd::Kernel { time } => {
            let mut rep = Report::new("plancherel-kernel", inputs_json(c), c.seed);
            // deep lower cutoff and fine cells: the heat multiplier does not
            // vanish toward lambda -> 0 and the forward transform must
            // resolve the smeared delta of the discrete spectral sum
            let kspec = GridSpec {
                lambda_min: 0.002,
                lambda_max: 14.0,
                n_lambda: 352,
                l_max: c.lmax,
                r_max: 0.0,
                n_r: 0,
            };
            let grid = SpectralGrid::build(dims, &kspec).map_err(|e| e.to_string())?;
            let mut m = |e: f64| C64::new((-time * e).exp(), 0.0);
            let kernel = plancherel::multiplier_kernel(&grid, &mut m);
            let kf = |p: &GroupPoint| -> C64 {
                let mut phi =
                    |q: &SphericalParam, n: &GroupPoint| spherical::phi_v2_closed(q, n);
                kernel.eval(p, &mut phi).unwrap()
            };
            let rspec = ReducedSpec {
                a_half: 8.0,
                n_a: 96,
                r1_max: 8.0,
                n_r1: 72,
            };
            let candidates: Vec<usize> = grid
                .atoms
                .iter()
                .enumerate()
                .filter(|(_, a)| {
                    let e_l = spherical::sublaplacian_eigenvalue(&a.param);
                    (-time * e_l).exp() >= 0.2
                        && a.param.lambda_star[0] <= 5.0
                        && a.param.lambda_star[0] >= 0.3
                })
                .map(|(i, _)| i)
                .collect();
            if candidates.len() < 4 {
                return Err("spectral grid leaves too few interior checkpoints".into());
            }
            let mut worst = 0.0f64;
            let mut n_checked = 0;
            for pick in 0..4 {
                let atom = &grid.atoms[candidates[pick * (candidates.len() - 1) / 3]];
                let e_l = spherical::sublaplacian_eigenvalue(&atom.param);
                let expect = (-time * e_l).exp();
                let mut f = kf;
                let back = plancherel::transform_reduced(dims, &atom.param, &rspec, &mut f)
                    .map_err(|e| e.to_string())?;
                worst = worst.max((back.re - expect).abs() / expect);
                n_checked += 1;
            }
            rep.push(
                Check::residual("heat-kernel-roundtrip", worst, t(0.02))
                    .with_detail(format!("{n_checked} spectral checkpoints")),
            );
            Ok(rep)
        }
    }
}

fn parse_s_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}

fn areafn_cmd(
    c: &Common,
    dims: &GroupDims,
    kind: GroupKind,
    action: &AreafnCmd,
) -> Result<Report, String> {
    let t = |d: f64| c.tol.unwrap_or(d);
    match action {
        AreafnCmd::Pair { param, s } => {
            let p = parse_param(dims, GroupKind::O, param)?;
            let svals = parse_s_list(s)?;
            let quads = areafn::MuQuads::for_dims(dims, c.order.max(3), c.seed);
            let mut rep = Report::new("areafn-pair", inputs_json(c), c.seed);
            let mass = quads.mu_mass();
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for &sv in &svals {
                let v = areafn::mu_phi_pairing(&p, &quads, sv).map_err(|e| e.to_string())?;
                worst = worst.max((v.norm() - mass).max(0.0));
                rows.push(json!({"s": sv, "value": [v.re, v.im]}));
            }
            let near0 = areafn::mu_phi_pairing(&p, &quads, 1e-6).map_err(|e| e.to_string())?;
            rep.push(Check::residual(
                "zero-dilation-mass",
                (near0.re - mass).abs() / mass,
                t(1e-6),
            ));
            rep.push(Check::residual("bounded-by-mass", worst, t(1e-9)));
            rep.values = json!({"mu_mass": mass, "pairings": rows});
            let _ = kind;
            Ok(rep)
        }
        AreafnCmd::Deriv { param, j, s } => {
            let p = parse_param(dims, GroupKind::O, param)?;
            let svals = parse_s_list(s)?;
            let quads = areafn::MuQuads::for_dims(dims, c.order.max(3), c.seed);
            let mut rep = Report::new("areafn-deriv", inputs_json(c), c.seed);
            let mut rows = Vec::new();
            let mut worst_est = 0.0f64;
            for &sv in &svals {
                let (d, err) =
                    areafn::mu_phi_deriv(&p, &quads, sv, *j, 1e-3).map_err(|e| e.to_string())?;
                worst_est = worst_est.max(err);
                rows.push(json!({"s": sv, "derivative": [d.re, d.im], "fd_error": err}));
            }
            rep.push(Check::residual("fd-error-estimate", worst_est, t(1e-4)));
            rep.values = json!({"order": j, "derivatives": rows});
            Ok(rep)
        }
        AreafnCmd::Scan { typeh, j } => {
            let mut rep = Report::new("areafn-scan", inputs_json(c), c.seed);
            let s_grid = quad::log_grid(1e-3, 50.0, 320);
            if *typeh {
                let model = group::typeh_heisenberg(2).map_err(|e| e.to_string())?;
                let quads = areafn::MuQuads::new(4, 1, c.order.max(2), c.seed);
                let grids = [
                    (vec![0.5, 1.0, 2.0], vec![0u32, 1, 2]),
                    (vec![0.5, 1.0, 2.0, 4.0], vec![0u32, 1, 2, 4]),
                ];
                let mut maxima = Vec::new();
                for (zetas, ls) in &grids {
                    let mut fams = Vec::new();
                    for &zn in zetas {
                        for &l in ls {
                            fams.push(TypeHFamily::Laguerre {
                                zeta: vec![zn],
                                l,
                            });
                        }
                        fams.push(TypeHFamily::Bessel { r: zn });
                    }
                    let scan = areafn::scan_typeh_uniform_bound(
                        &model, &fams, &quads, *j, &s_grid, 1e-3,
                    )
                    .map_err(|e| e.to_string())?;
                    maxima.push(scan.max);
                }
                let drift = (maxima[1] - maxima[0]).abs() / maxima[0];
                rep.push(Check::residual("scan-max-stability", drift, t(0.10)));
                rep.values = json!({"maxima": maxima});
            } else {
                let d4 = GroupDims::new(4).map_err(|e| e.to_string())?;
                let quads = areafn::MuQuads::for_dims(&d4, c.order.max(2), c.seed);
                let grids = [
                    (vec![1.0, 2.0], vec![0u32, 1]),
                    (vec![0.5, 1.0, 2.0, 4.0], vec![0u32, 1, 2]),
                ];
                let mut maxima = Vec::new();
                for (lams, ls) in &grids {
                    let mut params = Vec::new();
                    for &l1 in lams {
                        for &frac in &[0.35, 0.7] {
                            for &la in ls {
                                for &lb in ls {
                                    params.push(
                                        SphericalParam::new(
                                            &d4,
                                            0.0,
                                            vec![l1, l1 * frac],
                                            vec![la, lb],
                                            None,
                                        )
                                        .map_err(|e| e.to_string())?,
                                    );
                                }
                            }
                        }
                    }
                    let scan =
                        areafn::scan_uniform_bound(&params, &quads, *j, &s_grid, 1e-3)
                            .map_err(|e| e.to_string())?;
                    maxima.push(scan.max);
                }
                let drift = (maxima[1] - maxima[0]).abs() / maxima[0];
                rep.push(Check::residual("scan-max-stability", drift, t(0.10)));
                rep.values = json!({"maxima": maxima});
            }
            Ok(rep)
        }
    }
}

fn multiplier_cmd(
    c: &Common,
    dims: &GroupDims,
    action: &MultiplierCmd,
) -> Result<Report, String> {
    let t = |d: f64| c.tol.unwrap_or(d);
    match action {
        MultiplierCmd::PartitionCheck { samples } => {
            let mut rep = Report::new("multiplier-partition-check", inputs_json(c), c.seed);
            let vp = dims.v_prime;
            let v_odd = dims.v % 2 == 1;
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let mut worst = 0.0f64;
            let mut max_active = 0usize;
            let mut support_ok = true;
            for _ in 0..*samples {
                let mut lambda: Vec<f64> =
                    (0..vp).map(|_| rng.gen_range(0.05..30.0f64)).collect();
                lambda.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if lambda.windows(2).any(|w| w[1] - w[0] < 1e-6) {
                    continue;
                }
                let l: Vec<u32> = (0..vp).map(|_| rng.gen_range(0..200)).collect();
                let r = if v_odd { rng.gen_range(0.01..20.0) } else { 0.0 };
                let pt = SpecPoint { r, lambda, l };
                let active = multiplier::enumerate_active(&pt, v_odd);
                max_active = max_active.max(active.len());
                let sum: f64 = active
                    .iter()
                    .map(|i| multiplier::chi_iota(i, &pt, v_odd))
                    .sum();
                worst = worst.max((sum - 1.0).abs());
                let e = pt.energy();
                for idx in &active {
                    let s = idx.s_iota();
                    if !(0.25 * s <= e && e <= 16.0 * s) {
                        support_ok = false;
                    }
                }
            }
            rep.push(Check::residual("partition-of-unity", worst, t(1e-12)));
            rep.push(Check::residual(
                "overlap-bound",
                max_active as f64,
                multiplier::overlap_bound(vp, v_odd) as f64,
            ));
            rep.push(Check::residual(
                "support-energy-inequalities",
                if support_ok { 0.0 } else { 1.0 },
                0.5,
            ));
            Ok(rep)
        }
        MultiplierCmd::XiCheck => {
            let mut rep = Report::new("multiplier-xi-check", inputs_json(c), c.seed);
            let d2 = GroupDims::new(2).map_err(|e| e.to_string())?;
            let param = SphericalParam::new(&d2, 0.0, vec![1.3], vec![2], None)
                .map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let n = random_point(&d2, &mut rng, 1.5);
                let mut eval = |q: &SphericalParam| spherical::phi_v2_closed(q, &n);
                let xi = multiplier::xi_apply(&mut eval, &param, 2, 1e-3)
                    .map_err(|e| e.to_string())?;
                let x2: f64 = n.x.iter().map(|v| v * v).sum();
                let expect = spherical::phi_v2_closed(&param, &n).unwrap() * x2;
                worst = worst.max((xi - expect).norm());
            }
            rep.push(Check::residual("xi-identity-v2", worst, t(1e-8)));
            Ok(rep)
        }
        MultiplierCmd::AlephCheck => {
            let mut rep = Report::new("multiplier-aleph-check", inputs_json(c), c.seed);
            let d2 = GroupDims::new(2).map_err(|e| e.to_string())?;
            let param = SphericalParam::new(&d2, 0.0, vec![1.4], vec![1], None)
                .map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let n = random_point(&d2, &mut rng, 1.2);
                let mut eval = |q: &SphericalParam| spherical::phi_v2_closed(q, &n);
                let al = multiplier::aleph_apply(&mut eval, &param, 2, 1e-4)
                    .map_err(|e| e.to_string())?;
                let expect = spherical::phi_v2_closed(&param, &n).unwrap() * (n.a[0] * n.a[0]);
                worst = worst.max((al - expect).norm());
            }
            rep.push(Check::residual("aleph-identity-v2", worst, t(1e-3)));
            Ok(rep)
        }
        MultiplierCmd::Criterion { epsilon } => {
            let mut rep = Report::new("multiplier-criterion", inputs_json(c), c.seed);
            // one-cell bump at v = 4 (two eigenvalue axes)
            let q_hom = 4.0 + 2.0 * 6.0;
            let eps = epsilon.unwrap_or(q_hom / 2.0 + 3.0);
            if eps <= q_hom / 2.0 {
                return Err(format!("epsilon must exceed Q/2 = {}", q_hom / 2.0));
            }
            let mut f = |pt: &SpecPoint| {
                let g = |t: f64, c: f64| (-(t - c) * (t - c) / (0.02 * c * c)).exp();
                let amp = g(pt.lambda[0], 0.8) * g(pt.lambda[1], 1.9);
                let lw = if pt.l == vec![0, 0] { 1.0 } else { 0.0 };
                C64::new(amp * lw, 0.0)
            };
            let support = SupportBox {
                lambda_lo: vec![0.6, 1.5],
                lambda_hi: vec![1.0, 2.4],
                l_max: vec![1, 1],
                r_hi: 0.0,
            };
            let coarse = multiplier::multiplier_criterion(4, &mut f, &support, eps, 12)
                .map_err(|e| e.to_string())?;
            let fine = multiplier::multiplier_criterion(4, &mut f, &support, eps, 18)
                .map_err(|e| e.to_string())?;
            let drift = (fine.value - coarse.value).abs() / fine.value;
            rep.push(Check::residual("criterion-refinement-stability", drift, t(0.05)));
            let active: Vec<MultIndex> =
                fine.terms.iter().map(|t| t.index.clone()).collect();
            rep.values = json!({
                "value": fine.value,
                "epsilon": eps,
                "active_cells": active.len(),
            });
            Ok(rep)
        }
    }
}
