use gpi_core::gamma::{certify_strong_gpi, gamma_gpi_gap, gamma_moment, gamma_sum_moment, GammaParams};
use gpi_core::gaussian::{gaussian_gpi_gap, gaussian_weak_gpi_gap, wick_moment, wick_moment_by_matchings};
use gpi_core::io::{parse_matrix_json, MatrixJson};
use gpi_core::matrix::check_psd_with_tol;
use gpi_core::scalar::DEFAULT_FLOAT_TOL;
use gpi_core::mc::{
    correlation_inequality_screen, dependence_screen, negative_exponent_gap, orthant_upper, survival_integral_moment,
    DependenceProperty, GridSpec, McConfig, Method, Sampler,
};
use gpi_core::scan::{
    run_scan, Backend, Distribution, Exponents, Family, ParamRange, Partitions, ScanSpec,
};
use gpi_core::structure::MTP2_IMPLICATION;
use gpi_core::{
    mtp2_check, sign_balance, structure_ell_check, CovarianceMatrix, Execution, MultiIndex, Partition, Rational,
    Scalar, SymMatrix,
};
use serde_json::{json, Value};

use crate::args::*;
use crate::config::Settings;
use crate::error::{CliError, Locate};

/// What a command produced.
pub enum Output {
    Json(Value),
    /// JSON whose requested certification failed (exit status 3).
    Failed(Value),
    Text(String),
}

pub struct Context {
    pub settings: Settings,
    pub execution: Execution,
}

/// `--sigma` accepts a path or inline JSON.
struct MatrixInput {
    json: MatrixJson,
    origin: String,
}

fn read_matrix(arg: &str, flag: &str) -> Result<MatrixInput, CliError> {
    let trimmed = arg.trim_start();
    let (text, origin) = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        (arg.to_owned(), flag.to_owned())
    } else {
        let text = std::fs::read_to_string(arg).map_err(|e| CliError::usage(format!("cannot read {arg}: {e}")).at(arg))?;
        (text, arg.to_owned())
    };
    let json = parse_matrix_json(&text).at(&origin)?;
    Ok(MatrixInput { json, origin })
}

impl MatrixInput {
    fn sym<T: Scalar>(&self) -> Result<SymMatrix<T>, CliError> {
        self.json.parse_sym().at(&self.origin)
    }

    fn cov<T: Scalar>(&self) -> Result<CovarianceMatrix<T>, CliError> {
        CovarianceMatrix::new(self.sym()?).at(&self.origin)
    }

    fn provenance(&self, exact: bool) -> Option<String> {
        let k = self.json.decimal_entries();
        (k > 0).then(|| {
            if exact {
                format!("{k} decimal entries converted exactly from their literal text")
            } else {
                format!("{k} decimal entries read as binary floating point")
            }
        })
    }
}

fn with_provenance(mut v: Value, input: &MatrixInput, exact: bool) -> Value {
    if let Some(note) = input.provenance(exact) {
        v["input_note"] = Value::String(note);
    }
    v
}

fn backend_name(b: BackendArg) -> &'static str {
    match b {
        BackendArg::Exact => "exact",
        BackendArg::Float => "float",
    }
}

fn exponents(text: &str) -> Result<MultiIndex, CliError> {
    MultiIndex::parse(text).at("--n")
}

fn real_exponents(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad exponent {s:?}")).at("--n")))
        .collect()
}

fn parse_scalar<T: Scalar>(text: &str, flag: &str) -> Result<T, CliError> {
    T::parse(text).at(flag)
}

fn num<T: Scalar>(x: &T) -> Value {
    json!(x.to_f64())
}

macro_rules! dispatch {
    ($backend:expr, $f:ident ( $($arg:expr),* )) => {
        match $backend {
            BackendArg::Exact => $f::<Rational>($($arg),*),
            BackendArg::Float => $f::<f64>($($arg),*),
        }
    };
}

pub fn run(cmd: Command, ctx: &Context) -> Result<Output, CliError> {
    match cmd {
        Command::Moment(m) => moment(m),
        Command::Gap(g) => gap(g),
        Command::Check(c) => check(c, ctx),
        Command::Mc(m) => mc(m, ctx),
        Command::Scan(s) => scan(s, ctx),
    }
}

fn moment(cmd: MomentCmd) -> Result<Output, CliError> {
    match cmd {
        MomentCmd::Gaussian { sigma, n, backend, matchings } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let n = exponents(&n)?;
            let v = dispatch!(backend, gaussian_moment(&input, &n, matchings))?;
            Ok(Output::Json(with_provenance(
                json!({ "distribution": "gaussian", "backend": backend_name(backend), "n": n.as_slice() })
                    .merge(v),
                &input,
                backend == BackendArg::Exact,
            )))
        }
        MomentCmd::Gamma { alpha, sigma, n, backend } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let n = exponents(&n)?;
            let v = dispatch!(backend, gamma_single(&alpha, &input, &n))?;
            Ok(Output::Json(with_provenance(
                json!({ "distribution": "gamma", "alpha": alpha, "backend": backend_name(backend), "n": n.as_slice() })
                    .merge(v),
                &input,
                backend == BackendArg::Exact,
            )))
        }
        MomentCmd::GammaSum { alpha, sigma, n, backend } => {
            if alpha.len() != sigma.len() {
                return Err(CliError::usage(format!(
                    "{} --alpha values but {} --sigma values",
                    alpha.len(),
                    sigma.len()
                ))
                .at("--alpha"));
            }
            let inputs = sigma.iter().map(|s| read_matrix(s, "--sigma")).collect::<Result<Vec<_>, _>>()?;
            let n = exponents(&n)?;
            let v = dispatch!(backend, gamma_sum(&alpha, &inputs, &n))?;
            Ok(Output::Json(
                json!({ "distribution": "gamma_sum", "alpha": alpha, "backend": backend_name(backend), "n": n.as_slice() })
                    .merge(v),
            ))
        }
    }
}

trait Merge {
    fn merge(self, other: Value) -> Value;
}

impl Merge for Value {
    fn merge(mut self, other: Value) -> Value {
        if let (Some(a), Value::Object(b)) = (self.as_object_mut(), other) {
            a.extend(b);
        }
        self
    }
}

fn gaussian_moment<T: Scalar>(input: &MatrixInput, n: &MultiIndex, matchings: bool) -> Result<Value, CliError> {
    let cov = input.cov::<T>()?;
    let w = wick_moment(&cov, n).at("--n")?;
    let mut v = json!({
        "moment": w.moment.render(),
        "moment_f64": num(&w.moment),
        "pairing_count": w.pairing_count.to_string(),
    });
    if matchings {
        let m = wick_moment_by_matchings(&cov, n).at("--n")?;
        v["matchings_moment"] = Value::String(m.moment.render());
        v["matchings_agree"] = Value::Bool(m.moment == w.moment);
    }
    Ok(v)
}

fn gamma_single<T: Scalar>(alpha: &str, input: &MatrixInput, n: &MultiIndex) -> Result<Value, CliError> {
    let params = GammaParams::new(parse_scalar::<T>(alpha, "--alpha")?, input.cov()?).at("--alpha")?;
    let m = gamma_moment(&params, n).at("--n")?;
    Ok(json!({ "moment": m.moment.render(), "moment_f64": num(&m.moment), "warnings": m.warnings }))
}

fn gamma_sum<T: Scalar>(alphas: &[String], inputs: &[MatrixInput], n: &MultiIndex) -> Result<Value, CliError> {
    let comps = alphas
        .iter()
        .zip(inputs)
        .map(|(a, s)| GammaParams::new(parse_scalar::<T>(a, "--alpha")?, s.cov()?).at("--alpha"))
        .collect::<Result<Vec<_>, _>>()?;
    let m = gamma_sum_moment(&comps, n).at("--n")?;
    Ok(json!({ "moment": m.moment.render(), "moment_f64": num(&m.moment), "warnings": m.warnings }))
}

fn gap(args: GapArgs) -> Result<Output, CliError> {
    let input = read_matrix(&args.sigma, "--sigma")?;
    if args.dist == Dist::Gamma && args.alpha.is_none() {
        return Err(CliError::usage("--dist gamma needs --alpha").at("--alpha"));
    }
    let exact = args.backend == BackendArg::Exact;
    let out = if args.certify {
        dispatch!(args.backend, certify(&args, &input))?
    } else {
        Output::Json(dispatch!(args.backend, single_gap(&args, &input))?)
    };
    Ok(match out {
        Output::Json(v) => Output::Json(with_provenance(v, &input, exact)),
        Output::Failed(v) => Output::Failed(with_provenance(v, &input, exact)),
        t => t,
    })
}

fn single_gap<T: Scalar>(args: &GapArgs, input: &MatrixInput) -> Result<Value, CliError> {
    let cov = input.cov::<T>()?;
    let d = cov.dim();
    let n = exponents(args.n.as_deref().ok_or_else(|| CliError::usage("--n is required").at("--n"))?)?;
    if n.dim() != d {
        return Err(CliError::from(gpi_core::Error::Structural(format!("--n has {} entries, Σ is {d}×{d}", n.dim()))).at("--n"));
    }
    let partition = match (&args.partition, args.weak) {
        (_, true) => None,
        (Some(p), false) => Some(Partition::parse_one_based(d, p).at("--partition")?),
        (None, false) => return Err(CliError::usage("--partition or --weak is required").at("--partition")),
    };
    let report = match (args.dist, partition) {
        (Dist::Gaussian, Some(p)) => gaussian_gpi_gap(&cov, &n, &p).at("--n")?,
        (Dist::Gaussian, None) => gaussian_weak_gpi_gap(&cov, &n).at("--n")?,
        (Dist::Gamma, p) => {
            let alpha = parse_scalar::<T>(args.alpha.as_deref().unwrap_or_default(), "--alpha")?;
            let params = GammaParams::new(alpha, cov.clone()).at("--alpha")?;
            match p {
                Some(p) => gamma_gpi_gap(&params, &n, &p).at("--n")?,
                None => {
                    // Weak form: product of univariate marginals.
                    let full = gamma_moment(&params, &n).at("--n")?;
                    let mut rhs = T::one();
                    for j in 0..d {
                        rhs = rhs * gamma_moment(&params.marginal(&[j]), &n.restrict(&[j])).at("--n")?.moment;
                    }
                    let gap = full.moment.clone() - rhs.clone();
                    gpi_core::GapReport {
                        certified_nonnegative: T::EXACT.then(|| gap >= T::zero()),
                        lhs: full.moment,
                        rhs,
                        gap,
                        partition: None,
                        warnings: full.warnings,
                    }
                }
            }
        }
    };
    Ok(json!({
        "distribution": match args.dist { Dist::Gaussian => "gaussian", Dist::Gamma => "gamma" },
        "alpha": args.alpha,
        "backend": backend_name(args.backend),
        "form": if partition.is_some() { "strong" } else { "weak" },
        "n": n.as_slice(),
        "partition": partition.map(|p| p.one_based()),
        "lhs": report.lhs.render(),
        "rhs": report.rhs.render(),
        "gap": report.gap.render(),
        "gap_f64": num(&report.gap),
        "certified_nonnegative": report.certified_nonnegative,
        "warnings": report.warnings,
    }))
}

/// Sign-balance hypothesis plus every strong-form gap up to `--max-total`.
fn certify<T: Scalar>(args: &GapArgs, input: &MatrixInput) -> Result<Output, CliError> {
    let cov = input.cov::<T>()?;
    let d = cov.dim();
    let tol = cov.default_tol();
    let signing = sign_balance(cov.as_sym(), &tol);
    let mut negative = Vec::new();
    let (checked, min_gap) = match args.dist {
        Dist::Gamma => {
            let alpha = parse_scalar::<T>(args.alpha.as_deref().unwrap_or_default(), "--alpha")?;
            let params = GammaParams::new(alpha, cov.clone()).at("--alpha")?;
            let s = certify_strong_gpi(&params, args.max_total).at("--max-total")?;
            for (n, p, g) in &s.negative {
                negative.push(json!({ "n": n, "partition": p, "gap": g.render() }));
            }
            (s.checked, s.min_gap)
        }
        Dist::Gaussian => {
            let mut checked = 0;
            let mut min_gap: Option<T> = None;
            for m in MultiIndex::all_with_total_at_most(d, args.max_total / 2) {
                let n = m.doubled();
                for p in Partition::all_nontrivial(d) {
                    let g = gaussian_gpi_gap(&cov, &n, &p).at("--max-total")?.gap;
                    checked += 1;
                    if g < T::zero() {
                        negative.push(json!({ "n": n.as_slice(), "partition": p.one_based(), "gap": g.render() }));
                    }
                    if min_gap.as_ref().is_none_or(|x| g < *x) {
                        min_gap = Some(g);
                    }
                }
            }
            (checked, min_gap)
        }
    };
    let certified = signing.feasible && negative.is_empty();
    let v = json!({
        "distribution": match args.dist { Dist::Gaussian => "gaussian", Dist::Gamma => "gamma" },
        "alpha": args.alpha,
        "backend": backend_name(args.backend),
        "max_total": args.max_total,
        "hypothesis": {
            "sign_balanced": signing.feasible,
            "sign_matrix": signing.sign_matrix.as_ref().map(|s| s.as_slice().to_vec()),
            "violating_cycle": signing.cycle_one_based(),
        },
        "checked": checked,
        "negative": negative,
        "min_gap": min_gap.as_ref().map(Scalar::render),
        "certified": certified,
    });
    Ok(if certified { Output::Json(v) } else { Output::Failed(v) })
}

fn check(cmd: CheckCmd, ctx: &Context) -> Result<Output, CliError> {
    match cmd {
        CheckCmd::Structure { sigma, mode, tol, require, backend } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let tol = tol.or_else(|| ctx.settings.tol.clone());
            let (v, ok) = dispatch!(backend, structure(&input, mode, tol.as_deref()))?;
            let v = with_provenance(
                json!({ "backend": backend_name(backend) }).merge(v),
                &input,
                backend == BackendArg::Exact,
            );
            Ok(if require && !ok { Output::Failed(v) } else { Output::Json(v) })
        }
        CheckCmd::Psd { sigma, tol, backend } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let tol = tol.unwrap_or(DEFAULT_FLOAT_TOL);
            if !(tol >= 0.0) {
                return Err(CliError::usage(format!("tolerance must be nonnegative, got {tol}")).at("--tol"));
            }
            let v = dispatch!(backend, psd(&input, tol))?;
            Ok(Output::Json(json!({ "backend": backend_name(backend) }).merge(v)))
        }
    }
}

fn structure<T: Scalar>(input: &MatrixInput, mode: StructureMode, tol: Option<&str>) -> Result<(Value, bool), CliError> {
    let sym = input.sym::<T>()?;
    let tol = match tol {
        Some(t) => Some(parse_scalar::<T>(t, "--tol")?),
        None => None,
    };
    let signing_json = |o: &gpi_core::SigningOutcome| {
        json!({
            "feasible": o.feasible,
            "sign_matrix": o.sign_matrix.as_ref().map(|s| s.as_slice().to_vec()),
            "violating_cycle": o.cycle_one_based(),
            "tolerance": o.tolerance,
        })
    };
    match mode {
        StructureMode::Sign => {
            let tol = tol.unwrap_or_else(|| sym.default_tol());
            let o = sign_balance(&sym, &tol);
            Ok((json!({ "mode": "sign" }).merge(signing_json(&o)), o.feasible))
        }
        StructureMode::Mtp2 => {
            let cov = CovarianceMatrix::new(sym).at(&input.origin)?;
            let o = mtp2_check(&cov, tol.as_ref()).at(&input.origin)?;
            let mut v = json!({ "mode": "mtp2" }).merge(signing_json(&o));
            v["implication"] = if o.feasible { Value::String(MTP2_IMPLICATION.into()) } else { Value::Null };
            Ok((v, o.feasible))
        }
        StructureMode::Ell => {
            let tol = tol.unwrap_or_else(|| sym.default_tol());
            let found = structure_ell_check(&sym, &tol).at(&input.origin)?;
            let v = match &found {
                Some(e) => json!({
                    "mode": "ell",
                    "feasible": true,
                    "a": e.a(),
                    "a_squared": e.a_squared.iter().map(Scalar::render).collect::<Vec<_>>(),
                    "a_exact": e.exact_a().map(|a| a.iter().map(Scalar::render).collect::<Vec<_>>()),
                    "signs": e.signs,
                }),
                None => json!({ "mode": "ell", "feasible": false }),
            };
            Ok((v, found.is_some()))
        }
    }
}

fn psd<T: Scalar>(input: &MatrixInput, tol: f64) -> Result<Value, CliError> {
    let sym = input.sym::<T>()?;
    let c = check_psd_with_tol(&sym, tol);
    Ok(json!({
        "psd": c.psd,
        "witness": c.witness.as_ref().map(|w| w.iter().map(Scalar::render).collect::<Vec<_>>()),
        "min_eigenvalue": c.min_eigenvalue,
    }))
}

fn mc_config(common: &McCommon, ctx: &Context) -> McConfig {
    McConfig::new(common.samples.unwrap_or(ctx.settings.samples), common.seed.unwrap_or(ctx.settings.seed))
        .with_ci_level(common.ci.unwrap_or(ctx.settings.ci_level))
        .with_method(if common.antithetic { Method::Antithetic } else { Method::Plain })
        .with_execution(ctx.execution)
}

fn float_cov(input: &MatrixInput) -> Result<CovarianceMatrix<f64>, CliError> {
    input.cov::<f64>()
}

fn sampler(input: &MatrixInput, kind: SamplerArg, alpha: Option<&str>) -> Result<Sampler, CliError> {
    match kind {
        SamplerArg::Gaussian => Sampler::gaussian(&float_cov(input)?).at(&input.origin),
        SamplerArg::Abs => Sampler::abs_gaussian(&float_cov(input)?).at(&input.origin),
        SamplerArg::Gamma => {
            let a = alpha.ok_or_else(|| CliError::usage("--sampler gamma needs --alpha").at("--alpha"))?;
            // 2α must be an integer: read α exactly, then sample in floating point.
            let exact: Rational = parse_scalar(a, "--alpha")?;
            Sampler::gamma(&exact, &input.cov::<Rational>()?).at("--alpha")
        }
    }
}

fn grid(text: &str) -> Result<GridSpec, CliError> {
    GridSpec::parse(text).at("--grid")
}

fn mc(cmd: McCmd, ctx: &Context) -> Result<Output, CliError> {
    let to_json = |v: Result<Value, serde_json::Error>| v.map_err(|e| CliError::from(gpi_core::Error::from(e)));
    let v = match cmd {
        McCmd::Orthant { sigma, t, sampler: kind, alpha, common } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let s = sampler(&input, kind, alpha.as_deref())?;
            let t = real_exponents(&t).map_err(|e| CliError { location: Some("--t".into()), ..e })?;
            let est = orthant_upper(&s, &t, &mc_config(&common, ctx)).at("--t")?;
            let ci = est.ci();
            json!({ "command": "orthant", "t": t, "estimate": to_json(serde_json::to_value(&est))?, "ci": [ci.0, ci.1] })
        }
        McCmd::Puod { sigma, grid: g, n, common } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let n = n.as_deref().map(exponents).transpose()?;
            let v = dependence_screen(&float_cov(&input)?, DependenceProperty::Puod, &grid(&g)?, n.as_ref(), &mc_config(&common, ctx))
                .at(&input.origin)?;
            json!({ "command": "puod" }).merge(to_json(serde_json::to_value(&v))?)
        }
        McCmd::Spuod { sigma, grid: g, common } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let v = dependence_screen(&float_cov(&input)?, DependenceProperty::Spuod, &grid(&g)?, None, &mc_config(&common, ctx))
                .at(&input.origin)?;
            json!({ "command": "spuod" }).merge(to_json(serde_json::to_value(&v))?)
        }
        McCmd::Survival { sigma, n, sampler: kind, alpha, common } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let s = sampler(&input, kind, alpha.as_deref())?;
            let n = real_exponents(&n)?;
            let est = survival_integral_moment(&s, &n, &mc_config(&common, ctx)).at("--n")?;
            json!({ "command": "survival", "n": n, "tolerance": est.tolerance() })
                .merge(to_json(serde_json::to_value(&est))?)
        }
        McCmd::NegGpi { sigma, n, partition, common } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let cov = float_cov(&input)?;
            let n = real_exponents(&n)?;
            let p = Partition::parse_one_based(cov.dim(), &partition).at("--partition")?;
            let est = negative_exponent_gap(&cov, &n, &p, &mc_config(&common, ctx)).at("--n")?;
            json!({ "command": "neg-gpi", "n": n, "partition": p.one_based() })
                .merge(to_json(serde_json::to_value(&est))?)
        }
        McCmd::CorrIneq { sigma, grid: g, partition, common } => {
            let input = read_matrix(&sigma, "--sigma")?;
            let cov = float_cov(&input)?;
            let parts = if partition.is_empty() {
                Partition::all_nontrivial(cov.dim())
            } else {
                partition
                    .iter()
                    .map(|p| Partition::parse_one_based(cov.dim(), p).at("--partition"))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let v = correlation_inequality_screen(&cov, &grid(&g)?, &parts, &mc_config(&common, ctx)).at(&input.origin)?;
            json!({ "command": "corr-ineq" }).merge(to_json(serde_json::to_value(&v))?)
        }
    };
    Ok(Output::Json(v))
}

fn scan(args: ScanArgs, ctx: &Context) -> Result<Output, CliError> {
    let family = match args.family {
        FamilyArg::Counterexample => Family::Counterexample {
            rho: ParamRange::parse(&args.rho).at("--rho")?,
            sigma12: ParamRange::parse(&args.sigma12).at("--sigma12")?,
        },
        FamilyArg::RandomPsd => Family::RandomPsd { count: args.count, min_dim: args.min_dim, max_dim: args.max_dim },
        FamilyArg::RandomSignedNonneg => {
            Family::RandomSignedNonneg { count: args.count, min_dim: args.min_dim, max_dim: args.max_dim }
        }
    };
    let distribution = match args.dist {
        Dist::Gaussian => Distribution::Gaussian,
        Dist::Gamma => Distribution::Gamma {
            alpha: parse_scalar(
                args.alpha.as_deref().ok_or_else(|| CliError::usage("--dist gamma needs --alpha").at("--alpha"))?,
                "--alpha",
            )?,
        },
    };
    let exponents = match &args.n {
        Some(n) => Exponents::Fixed(exponents(n)?),
        None => Exponents::AllUpTo(args.max_total),
    };
    let partitions = if args.partition.is_empty() {
        Partitions::All
    } else {
        let d = match (&family, &exponents) {
            (Family::Counterexample { .. }, _) => 3,
            (_, Exponents::Fixed(n)) => n.dim(),
            _ => {
                return Err(CliError::usage("explicit partitions on a random family need a fixed --n").at("--partition"))
            }
        };
        Partitions::Explicit(
            args.partition
                .iter()
                .map(|p| Partition::parse_one_based(d, p).at("--partition"))
                .collect::<Result<_, _>>()?,
        )
    };
    let spec = ScanSpec {
        family,
        distribution,
        exponents,
        partitions,
        backend: match args.backend {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Float => Backend::Float,
        },
        seed: args.seed.unwrap_or(ctx.settings.seed),
        execution: ctx.execution,
    };
    let report = run_scan(&spec)?;
    Ok(match args.format {
        Format::Csv => Output::Text(report.to_csv()),
        Format::Json => {
            let v = serde_json::to_value(&report).map_err(|e| CliError::from(gpi_core::Error::from(e)))?;
            Output::Json(v)
        }
    })
}
