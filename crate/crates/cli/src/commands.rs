use clap::{Args, ValueEnum};
use congruence_lab::arith::{is_prime, primes_up_to, Rational};
use congruence_lab::averaged::{
    averaged_report, suggest_h, AffineForm, AveragedFamily, CoefficientScheme, FamilyBoundary,
};
use congruence_lab::congruence::{
    bilinear_jacobi, count_exact, report_thm1, scan_thm1, sign_coefficients, CoefRule, CongruenceInstance, SizeRule,
    Thm1Scan, YInterval,
};
use congruence_lab::dp6::{enumerate_lower_bound_points, m_t_growth, sieve_condition_report, window_primes};
use congruence_lab::gausssum::{gauss_brute, gauss_closed, CLOSED_FORM_TOL};
use congruence_lab::sawtooth::{fejer_majorant, psi, vaaler_coeffs, vaaler_scan};
use congruence_lab::Error;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Command, Context};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::Invalid(msg.into()).into()
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    s.trim().parse::<Rational>().map_err(|e| format!("{s:?} is not a rational number: {e}"))
}

#[derive(Debug, Args)]
pub struct GaussArgs {
    #[arg(long)]
    s: i64,
    #[arg(long, default_value_t = 0)]
    t: i64,
    #[arg(long)]
    u: u64,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: i64,
    #[arg(long, allow_hyphen_values = true)]
    b: i64,
    #[arg(long)]
    q: u64,
    #[arg(long = "X")]
    x: f64,
    #[arg(long = "Y")]
    y: f64,
    #[arg(long, default_value_t = 1)]
    e: u32,
    #[arg(long, default_value_t = 2)]
    f: u32,
}

#[derive(Debug, Args)]
pub struct Thm1ScanArgs {
    /// Largest modulus when --q-list is absent.
    #[arg(long, default_value_t = 500)]
    q_max: u64,
    /// Comma-separated moduli.
    #[arg(long)]
    q_list: Option<String>,
    /// Use every modulus up to --q-max, not only primes.
    #[arg(long)]
    all_moduli: bool,
    /// q | fixed:V | scaled:c | power:p
    #[arg(long, default_value = "q")]
    x_rule: String,
    #[arg(long, default_value = "q")]
    y_rule: String,
    /// An integer, or "seeded".
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    a: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    b: String,
}

#[derive(Debug, Args)]
pub struct VaalerArgs {
    #[arg(long = "H")]
    h: u32,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Check a single point instead of a seeded scan.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Ones,
    Zeros,
    Factorized,
    Joint,
}

#[derive(Debug, Args)]
pub struct AvgScanArgs {
    #[arg(long, default_value_t = 1)]
    l: u32,
    #[arg(long, default_value_t = 1)]
    m: u32,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    r: i64,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    s: i64,
    #[arg(long, default_value_t = 1)]
    t: u64,
    #[arg(long = "U")]
    u: f64,
    #[arg(long = "V")]
    v: f64,
    #[arg(long = "W")]
    w: f64,
    /// Length of the y interval.
    #[arg(long = "Y")]
    y: u64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    y_start: i64,
    /// Constant part of the upper boundary.
    #[arg(long = "X", value_parser = parse_rational, default_value = "10")]
    x: Rational,
    /// Upper boundary slope in u.
    #[arg(long, value_parser = parse_rational, default_value = "0", allow_hyphen_values = true)]
    upper_u: Rational,
    #[arg(long, value_parser = parse_rational, default_value = "0", allow_hyphen_values = true)]
    upper_v: Rational,
    #[arg(long, value_parser = parse_rational, default_value = "0", allow_hyphen_values = true)]
    upper_y: Rational,
    /// Lower boundary slope in y.
    #[arg(long, value_parser = parse_rational, default_value = "0", allow_hyphen_values = true)]
    lower_y: Rational,
    #[arg(long, value_enum, default_value_t = SchemeArg::Ones)]
    scheme: SchemeArg,
    /// Defaults to max((tW)^{1+eps}/X, tW/F).
    #[arg(long = "H")]
    h: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

#[derive(Debug, Args)]
pub struct Dp6EnumerateArgs {
    #[arg(long = "B")]
    b: u64,
    #[arg(long, default_value_t = 12)]
    t: u32,
}

#[derive(Debug, Args)]
pub struct Dp6SieveArgs {
    #[arg(long = "B")]
    b: u64,
    /// Defaults to the smallest prime in (B^{1/3}/2, B^{1/3}].
    #[arg(long)]
    q: Option<u64>,
    #[arg(long, default_value_t = 0.4)]
    tau: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 1.0)]
    c3: f64,
}

#[derive(Debug, Args)]
pub struct Dp6GrowthArgs {
    /// Comma-separated ascending budgets.
    #[arg(long = "B")]
    b: String,
    #[arg(long, default_value_t = 12)]
    t: u32,
}

#[derive(Debug, Args)]
pub struct BilinearArgs {
    #[arg(long = "M")]
    m: usize,
    #[arg(long = "N")]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussRow {
    pub s: i64,
    pub t: i64,
    pub u: u64,
    pub case: String,
    pub closed_re: f64,
    pub closed_im: f64,
    pub brute_re: f64,
    pub brute_im: f64,
    pub abs_error: f64,
    #[serde(rename = "match")]
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralCountRow {
    pub a: i64,
    pub b: i64,
    pub q: u64,
    pub e: u32,
    pub f: u32,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    pub exact: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaalerScanRow {
    #[serde(rename = "H")]
    pub h: u32,
    pub samples: usize,
    pub seed: u64,
    pub violations: usize,
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaalerPointRow {
    #[serde(rename = "H")]
    pub h: u32,
    pub x: f64,
    pub psi: f64,
    pub approximation: f64,
    pub error: f64,
    pub majorant: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearRow {
    pub seed: u64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub epsilon: f64,
    pub sum_re: f64,
    pub sum_im: f64,
    pub abs_sum: f64,
    pub bound: f64,
    pub ratio: f64,
}

pub fn dispatch(cmd: &Command, ctx: &Context) -> anyhow::Result<()> {
    match cmd {
        Command::Gauss(a) => gauss(a, ctx),
        Command::Count(a) => count(a, ctx),
        Command::Thm1Scan(a) => thm1_scan(a, ctx),
        Command::Vaaler(a) => vaaler(a, ctx),
        Command::AvgScan(a) => avg_scan(a, ctx),
        Command::Dp6Enumerate(a) => dp6_enumerate(a, ctx),
        Command::Dp6Sieve(a) => dp6_sieve(a, ctx),
        Command::Dp6Growth(a) => dp6_growth(a, ctx),
        Command::Bilinear(a) => bilinear(a, ctx),
    }
}

fn gauss(a: &GaussArgs, ctx: &Context) -> anyhow::Result<()> {
    let closed = gauss_closed(a.s, a.t, a.u)?;
    let brute = gauss_brute(a.s, a.t, a.u)?;
    let err = (closed.numeric - brute).norm();
    let row = GaussRow {
        s: a.s,
        t: a.t,
        u: a.u,
        case: closed.structure.map(|c| format!("{:?}", c.case)).unwrap_or_default(),
        closed_re: closed.numeric.re,
        closed_im: closed.numeric.im,
        brute_re: brute.re,
        brute_im: brute.im,
        abs_error: err,
        matches: err <= CLOSED_FORM_TOL * (a.u as f64).sqrt(),
    };
    let header = vec![
        "quadratic Gauss sum G(s, t; u) = sum_{n=1}^{u} e((s n^2 + t n) / u)".to_string(),
        "closed = explicit evaluation for gcd(s, u) = 1; brute = direct sum; match within 1e-6 sqrt(u)".to_string(),
    ];
    ctx.sink.table(&header, &[row])
}

fn count_header() -> Vec<String> {
    vec![
        "exact = #{0 < x <= X, 0 < y <= Y : gcd(x, q) = 1, a x + b y^2 = 0 mod q}".to_string(),
        "main_term = phi(q) X Y / q^2".to_string(),
        "envelope = X tau(q)/q + L(q) sigma_{-1/2}(q) (Y tau(q)/sqrt(q) + sqrt(q) L(q)), L(n) = log(n+1), constant 1"
            .to_string(),
        "ratio = |exact - main_term| / envelope".to_string(),
    ]
}

fn count(a: &CountArgs, ctx: &Context) -> anyhow::Result<()> {
    let inst = CongruenceInstance::new(a.a, a.b, a.q, a.e, a.f, a.x, a.y)?;
    if (a.e, a.f) == (1, 2) {
        let mut report = report_thm1(&inst)?;
        if !ctx.timing {
            report.seconds = 0.0;
        }
        ctx.sink.table(&count_header(), &[report])
    } else {
        let row = GeneralCountRow {
            a: a.a,
            b: a.b,
            q: a.q,
            e: a.e,
            f: a.f,
            x: a.x,
            y: a.y,
            exact: count_exact(&inst)?,
        };
        let header = vec!["exact = #{0 < x <= X, 0 < y <= Y : gcd(x, q) = 1, a x^e + b y^f = 0 mod q}".to_string()];
        ctx.sink.table(&header, &[row])
    }
}

fn parse_size_rule(s: &str) -> anyhow::Result<SizeRule> {
    let num = |v: &str| v.parse::<f64>().map_err(|_| invalid(format!("bad number in size rule {s:?}")));
    match s.split_once(':') {
        None if s == "q" => Ok(SizeRule::EqualQ),
        Some(("fixed", v)) => Ok(SizeRule::Fixed(num(v)?)),
        Some(("scaled", v)) => Ok(SizeRule::Scaled(num(v)?)),
        Some(("power", v)) => Ok(SizeRule::Power(num(v)?)),
        _ => Err(invalid(format!("size rule must be q, fixed:V, scaled:c or power:p, got {s:?}"))),
    }
}

fn parse_coef_rule(s: &str, seed: u64) -> anyhow::Result<CoefRule> {
    if s == "seeded" {
        return Ok(CoefRule::Seeded(seed));
    }
    s.parse::<i64>()
        .map(CoefRule::Fixed)
        .map_err(|_| invalid(format!("coefficient must be an integer or \"seeded\", got {s:?}")))
}

fn parse_list(s: &str) -> anyhow::Result<Vec<u64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| invalid(format!("{v:?} is not a positive integer")))
        })
        .collect()
}

fn thm1_scan(a: &Thm1ScanArgs, ctx: &Context) -> anyhow::Result<()> {
    let q_list = match &a.q_list {
        Some(list) => parse_list(list)?,
        None if a.all_moduli => (1..=a.q_max).collect(),
        None => primes_up_to(a.q_max),
    };
    let scan = Thm1Scan {
        q_list,
        x_rule: parse_size_rule(&a.x_rule)?,
        y_rule: parse_size_rule(&a.y_rule)?,
        a_rule: parse_coef_rule(&a.a, ctx.seed)?,
        b_rule: parse_coef_rule(&a.b, ctx.seed.wrapping_add(1))?,
    };
    let mut rows = scan_thm1(&scan, ctx.mode)?;
    if !ctx.timing {
        rows.iter_mut().for_each(|r| r.seconds = 0.0);
    }
    ctx.sink.table(&count_header(), &rows)
}

fn vaaler(a: &VaalerArgs, ctx: &Context) -> anyhow::Result<()> {
    let header = vec![
        "psi(x) = {x} - 1/2 against the degree-H Vaaler polynomial".to_string(),
        "majorant = (1/(H+1)) sum_{|h| <= H} (1 - |h|/(H+1)) e(hx); holds if error <= majorant + 1e-9".to_string(),
    ];
    match a.x {
        Some(x) => {
            let poly = vaaler_coeffs(a.h)?;
            let row = VaalerPointRow {
                h: a.h,
                x,
                psi: psi(x),
                approximation: poly.evaluate(x),
                error: poly.error(x),
                majorant: fejer_majorant(x, a.h),
                holds: poly.check(x),
            };
            ctx.sink.table(&header, &[row])
        }
        None => {
            let s = vaaler_scan(a.h, a.samples, ctx.seed, ctx.mode)?;
            let row = VaalerScanRow {
                h: s.h_max,
                samples: s.samples,
                seed: s.seed,
                violations: s.violations,
                max_excess: s.max_excess,
            };
            ctx.sink.table(&header, &[row])
        }
    }
}

fn avg_scan(a: &AvgScanArgs, ctx: &Context) -> anyhow::Result<()> {
    if a.seeds == 0 {
        return Err(invalid("--seeds must be at least 1"));
    }
    let boundary = FamilyBoundary {
        lower: AffineForm {
            cy: a.lower_y,
            ..Default::default()
        },
        upper: AffineForm {
            c0: a.x,
            cu: a.upper_u,
            cv: a.upper_v,
            cy: a.upper_y,
            ..Default::default()
        },
    };
    let mut rows = Vec::new();
    for i in 0..a.seeds {
        let seed = ctx.seed.wrapping_add(i);
        let scheme = match a.scheme {
            SchemeArg::Ones => CoefficientScheme::AllOnes,
            SchemeArg::Zeros => CoefficientScheme::Zeros,
            SchemeArg::Factorized => CoefficientScheme::Factorized { seed },
            SchemeArg::Joint => CoefficientScheme::Joint { seed },
        };
        let family = AveragedFamily::new(
            (a.l, a.m),
            (a.r, a.s, a.t),
            (a.u, a.v, a.w),
            YInterval::new(a.y_start, a.y),
            scheme,
            boundary,
        )?;
        let h = match a.h {
            Some(h) => h,
            None => {
                let floor = family.q0() / family.derivatives.big_f;
                suggest_h(&family, a.epsilon).map_or(floor, |h| h.max(floor))
            }
        };
        rows.push(averaged_report(&family, h, a.epsilon, ctx.mode)?);
    }
    let header = vec![
        "S = sum over u, v, w with gcd(r s u v, t w) = 1 of d_{u,v} e_w * count(r u^l, s v^m, t w)".to_string(),
        "M = sum d_{u,v} e_w (1/(tw)) sum_{y coprime to tw} (upper - lower); first_O = UVWY/H; T_envelope with constant 1"
            .to_string(),
        "ratio = |S - M| / (first_O + T_envelope)".to_string(),
    ];
    ctx.sink.table(&header, &rows)
}

fn dp6_enumerate(a: &Dp6EnumerateArgs, ctx: &Context) -> anyhow::Result<()> {
    let e = enumerate_lower_bound_points(a.b, a.t, ctx.mode)?;
    let header = vec![
        format!("special points a1^2 - a2 + q a3 = 0 with B^(1/3)/2 < q <= B^(1/3), B = {}", a.b),
        format!("0 < a1 <= B^(1/3)/2, 0 < a2 <= B^(2/3)/2, a3 != 0, Omega(|a1 a2 a3|) <= {}", a.t),
        "x0..x6 = image of the torsor point eta = (1,1,1,q), alpha = (a1, -a2, a3)".to_string(),
        format!("count = {}", e.count),
    ];
    ctx.sink.table(&header, &e.points)
}

fn dp6_sieve(a: &Dp6SieveArgs, ctx: &Context) -> anyhow::Result<()> {
    let q = match a.q {
        Some(q) => q,
        None => *window_primes(a.b)
            .first()
            .ok_or_else(|| invalid(format!("no prime in (B^(1/3)/2, B^(1/3)] for B = {}", a.b)))?,
    };
    if !is_prime(q) {
        return Err(Error::NotPrime(q).into());
    }
    let report = sieve_condition_report(a.b, q, a.tau, a.c2, a.c3)?;
    ctx.sink.document(&report)
}

fn dp6_growth(a: &Dp6GrowthArgs, ctx: &Context) -> anyhow::Result<()> {
    let budgets = parse_list(&a.b)?;
    let rows = m_t_growth(&budgets, a.t, ctx.mode)?;
    let header = vec![
        format!("count = number of special points with Omega(|a1 a2 a3|) <= {}", a.t),
        "normalized = count log^5 B / B".to_string(),
    ];
    ctx.sink.table(&header, &rows)
}

fn bilinear(a: &BilinearArgs, ctx: &Context) -> anyhow::Result<()> {
    if a.seeds == 0 {
        return Err(invalid("--seeds must be at least 1"));
    }
    let mut rows = Vec::new();
    for i in 0..a.seeds {
        let seed = ctx.seed.wrapping_add(i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let am = sign_coefficients(a.m, &mut rng);
        let bn = sign_coefficients(a.n, &mut rng);
        let r = bilinear_jacobi(&am, &bn, a.epsilon, ctx.mode)?;
        rows.push(BilinearRow {
            seed,
            m: a.m,
            n: a.n,
            epsilon: a.epsilon,
            sum_re: r.sum.re,
            sum_im: r.sum.im,
            abs_sum: r.sum.norm(),
            bound: r.bound,
            ratio: r.sum.norm() / r.bound,
        });
    }
    let header = vec![
        "sum = sum_{m <= M odd} sum_{n <= N} a_m b_n (n/m) with seeded signs a_m, b_n".to_string(),
        "bound = (MN)^eps (M N^(1/2) + M^(1/2) N); ratio = |sum| / bound".to_string(),
    ];
    ctx.sink.table(&header, &rows)
}
