use std::fs;
use std::path::Path;

use cosparse::bounds::{BoundModel, BoundQuery};
use cosparse::config::Config;
use cosparse::experiments::{export_csv, render_heatmap, GridModel, PhaseConfig};
use cosparse::mc::{run_check, BoundCheck, McParams};
use cosparse::operator::{build_dif2d, build_gaussian_operator, AnalysisOperator};
use cosparse::packing::{
    construct_random_packing, verify_packing, Dif2dPatternSampler, GaussianK1Sampler, Packing, PointSampler,
};
use cosparse::seed;
use cosparse::sensing::{Normalization, SensingInstance};
use cosparse::signal::{gen_gaussian_k1, gen_packing_pattern, gen_randomwalk_image, random_signs, SignalRecord};
use cosparse::solvers::{solve_analysis_l0, solve_analysis_l1};
use cosparse::textfmt;
use cosparse::Error;

use crate::manifest::Manifest;
use crate::{
    BoundsAction, BoundsEvalArgs, Cli, Command, GenOperatorArgs, GenSignalArgs, McVerifyArgs, MeasureArgs, Model,
    NormArg, PackArgs, PhaseArgs, SolveArgs, SolverArg, Source, VerifyPackArgs,
};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unknown config keys: exit 2.
    Usage(String),
    /// Anything the library rejects: exit 1.
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(Error::Io(e))
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Domain(Error::InvalidArgument(format!("cannot read {}: {e}", path.display()))))
}

fn write_output(cli: &Cli, manifest: &mut Manifest, name: &str, contents: &str) -> Outcome {
    fs::write(cli.out_dir.join(name), contents)?;
    manifest.output(name);
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Outcome {
    fs::create_dir_all(&cli.out_dir)?;
    let mut manifest = match &cli.command {
        Command::GenOperator(a) => gen_operator(cli, a)?,
        Command::GenSignal(a) => gen_signal(cli, a)?,
        Command::Measure(a) => measure(cli, a)?,
        Command::Solve(a) => solve(cli, a)?,
        Command::Pack(a) => pack(cli, a)?,
        Command::VerifyPack(a) => verify_pack(a)?,
        Command::Bounds {
            action: BoundsAction::Eval(a),
        } => bounds_eval(a)?,
        Command::Phase(a) => phase(cli, a)?,
        Command::McVerify(a) => mc_verify(cli, a)?,
    };
    if let Some(jobs) = cli.jobs {
        manifest.set("jobs", jobs);
    }
    manifest.write(&cli.out_dir)?;
    // A failed check still leaves its manifest behind before reporting.
    match manifest_verdict(&manifest) {
        Some(msg) => Err(Failure::Domain(Error::InvalidArgument(msg))),
        None => Ok(()),
    }
}

fn manifest_verdict(m: &Manifest) -> Option<String> {
    m.render()
        .lines()
        .find_map(|l| l.strip_prefix("verdict = FAIL: ").map(str::to_string))
}

fn master_seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or(0)
}

fn gen_operator(cli: &Cli, a: &GenOperatorArgs) -> Result<Manifest, Failure> {
    let seed = master_seed(cli);
    let mut m = Manifest::new("gen-operator");
    let op = match a.kind {
        Model::Dif2d => {
            let n = a.n.expect("clap enforces --n");
            m.set("kind", "dif2d");
            m.set("n", n);
            build_dif2d(n)?
        }
        Model::Gaussian => {
            let (p, d) = (a.p.expect("clap enforces --p"), a.d.expect("clap enforces --d"));
            m.set("kind", "gaussian");
            m.set("p", p);
            m.set("d", d);
            m.set("seed", seed);
            build_gaussian_operator(p, d, seed)?
        }
    };
    m.set("header_only", a.header_only);
    write_output(cli, &mut m, "operator.txt", &op.to_text(a.header_only))?;
    println!("{} operator {}x{}", op.kind(), op.rows(), op.cols());
    Ok(m)
}

fn gen_signal(cli: &Cli, a: &GenSignalArgs) -> Result<Manifest, Failure> {
    let seed = master_seed(cli);
    let mut m = Manifest::new("gen-signal");
    m.set("seed", seed);
    let need_n = || {
        a.n.ok_or_else(|| Failure::Usage("--n is required for image sources".into()))
    };
    let sig = match a.source {
        Source::GaussianK1 => {
            let path = a.operator.as_ref().expect("clap enforces --operator");
            m.set("operator", path.display());
            let op = AnalysisOperator::parse(&read(path)?)?;
            gen_gaussian_k1(&op, seed)?
        }
        Source::RandomWalk => {
            let n = need_n()?;
            m.set("n", n);
            m.set("max_retries", a.max_retries);
            gen_randomwalk_image(n, seed, a.max_retries)?
        }
        Source::PackingPattern => {
            let n = need_n()?;
            m.set("n", n);
            let mut rng = seed::rng(seed);
            gen_packing_pattern(n, &random_signs(cosparse::signal::packing_free_cells(n), &mut rng))?
        }
    };
    m.set("source", sig.source);
    write_output(cli, &mut m, "signal.txt", &sig.to_text())?;
    println!(
        "{} signal d={} b={} cosparsity={}",
        sig.source,
        sig.x.len(),
        sig.b,
        sig.cosupport.cosparsity()
    );
    Ok(m)
}

fn measure(cli: &Cli, a: &MeasureArgs) -> Result<Manifest, Failure> {
    let seed = master_seed(cli);
    let rec = SignalRecord::parse(&read(&a.signal)?)?;
    let norm = match a.normalization {
        NormArg::UnitColumns => Normalization::UnitColumns,
        NormArg::OpNorm => Normalization::OpNormLeqOne,
    };
    let inst = SensingInstance::generate(
        a.m,
        rec.x,
        a.sigma,
        norm,
        seed::derive(seed, &[1]),
        seed::derive(seed, &[2]),
    )?;
    let mut m = Manifest::new("measure");
    m.set("signal", a.signal.display());
    m.set("m", a.m);
    m.set("sigma", a.sigma);
    m.set("normalization", norm);
    m.set("seed", seed);
    write_output(cli, &mut m, "instance.txt", &inst.to_text())?;
    println!("instance m={} d={} sigma={}", inst.m(), inst.d(), inst.sigma);
    Ok(m)
}

/// Config file first, then any flags on top of it.
fn layered_config(path: Option<&Path>, flags: &[(&str, Option<String>)]) -> Result<Config, Failure> {
    let mut cfg = match path {
        Some(p) => Config::parse(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => Config::default(),
    };
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v.clone()).map_err(|e| Failure::Usage(e.to_string()))?;
        }
    }
    Ok(cfg)
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

fn solve(cli: &Cli, a: &SolveArgs) -> Result<Manifest, Failure> {
    let cfg = layered_config(
        a.config.as_deref(),
        &[
            ("l1.tol", opt(&a.l1_tol)),
            ("l1.max_iter", opt(&a.l1_max_iter)),
            ("l1.rho", opt(&a.l1_rho)),
            ("l0.b_max", opt(&a.l0_b_max)),
            ("l0.eq_tol", opt(&a.l0_eq_tol)),
        ],
    )?;
    let inst = SensingInstance::parse(&read(&a.instance)?)?;
    let op = AnalysisOperator::parse(&read(&a.operator)?)?;
    let mut m = Manifest::new("solve");
    m.set("instance", a.instance.display());
    m.set("operator", a.operator.display());
    let rep = match a.solver {
        SolverArg::L1 => {
            let opts = cfg.l1_options()?;
            m.set("solver", "l1");
            m.set("l1.tol", opts.tol);
            m.set("l1.max_iter", opts.max_iter);
            m.set("l1.rho", opts.rho);
            solve_analysis_l1(&inst.a, &op, &inst.y, inst.sigma, &opts)?
        }
        SolverArg::L0 => {
            let b_max = cfg.l0_b_max(inst.d())?;
            let opts = cfg.l0_options()?;
            m.set("solver", "l0");
            m.set("l0.b_max", b_max);
            m.set(
                "l0.eq_tol",
                opts.eq_tol.map_or("default".to_string(), |v| v.to_string()),
            );
            solve_analysis_l0(&inst.a, &op, &inst.y, b_max, &opts)?
        }
    };
    let rel = (&rep.x_hat - &inst.x_true).norm() / inst.x_true.norm().max(f64::MIN_POSITIVE);
    let text = format!(
        "objective = {}\nresidual = {}\niterations = {}\nconverged = {}\nrelative_error = {}\nx_hat = {}\n",
        textfmt::fmt17(rep.objective),
        textfmt::fmt17(rep.residual),
        rep.iterations,
        rep.converged,
        textfmt::fmt17(rel),
        textfmt::join17(rep.x_hat.iter().copied())
    );
    write_output(cli, &mut m, "solution.txt", &text)?;
    println!(
        "objective={:.6e} residual={:.3e} iterations={} converged={} relative_error={:.3e}",
        rep.objective, rep.residual, rep.iterations, rep.converged, rel
    );
    Ok(m)
}

fn pack(cli: &Cli, a: &PackArgs) -> Result<Manifest, Failure> {
    let seed = master_seed(cli);
    let mut m = Manifest::new("pack");
    let sampler: Box<dyn PointSampler> = match a.model {
        Model::Dif2d => {
            let n = a.n.expect("clap enforces --n");
            m.set("model", "dif2d");
            m.set("n", n);
            Box::new(Dif2dPatternSampler { n })
        }
        Model::Gaussian => {
            let (d, p) = (a.d.expect("clap enforces --d"), a.p.expect("clap enforces --p"));
            let op_seed = seed::derive(seed, &[0]);
            m.set("model", "gaussian");
            m.set("d", d);
            m.set("p", p);
            m.set("operator_seed", op_seed);
            Box::new(GaussianK1Sampler {
                op: build_gaussian_operator(p, d, op_seed)?,
            })
        }
    };
    m.set("count", a.count);
    m.set("delta", a.delta);
    m.set("max_restarts", a.max_restarts);
    m.set("seed", seed);
    let packing = construct_random_packing(sampler.as_ref(), a.delta, a.count, a.max_restarts, seed)?;
    let (_, min) = verify_packing(&packing.points, packing.delta)?;
    m.set("min_distance", min);
    write_output(cli, &mut m, "packing.txt", &packing.to_text())?;
    println!("certified packing of {} points, min distance {min:.6}", packing.len());
    Ok(m)
}

fn verify_pack(a: &VerifyPackArgs) -> Result<Manifest, Failure> {
    let packing = Packing::parse(&read(&a.packing)?)?;
    let delta = a.delta.unwrap_or(packing.delta);
    let (ok, min) = verify_packing(&packing.points, delta)?;
    let mut m = Manifest::new("verify-pack");
    m.set("packing", a.packing.display());
    m.set("delta", delta);
    m.set("min_distance", min);
    m.set("certified", ok);
    println!("certified={ok} min_distance={min:.17e} delta={delta}");
    if !ok {
        m.set(
            "verdict",
            format!("FAIL: minimum distance {min} is below delta {delta}"),
        );
    }
    Ok(m)
}

fn bounds_eval(a: &BoundsEvalArgs) -> Result<Manifest, Failure> {
    let model = match a.model {
        Model::Dif2d => BoundModel::Dif2dK2,
        Model::Gaussian => BoundModel::GaussianK1,
    };
    let q = BoundQuery {
        d: a.d,
        m: a.m,
        p: a.p.unwrap_or(2 * a.d),
        sigma: a.sigma,
        model,
    };
    let value = q.evaluate()?;
    let formula = match model {
        BoundModel::Dif2dK2 => "sigma*exp(d/(64m))/64",
        BoundModel::GaussianK1 => "(sigma/64)*3^(-1/(2m))*exp((d-1)(1-(d-2)/p)/(8m))",
    };
    println!("{value:.5e}  # {model}: {formula} (explicit constants, one valid choice)");
    let mut m = Manifest::new("bounds");
    m.set("model", model);
    m.set("d", a.d);
    m.set("m", a.m);
    m.set("p", q.p);
    m.set("sigma", a.sigma);
    m.set("bound", format!("{value:.5e}"));
    Ok(m)
}

fn phase(cli: &Cli, a: &PhaseArgs) -> Result<Manifest, Failure> {
    let model = a.model.map(|m| match m {
        Model::Dif2d => "dif2d".to_string(),
        Model::Gaussian => "gaussian".to_string(),
    });
    let cfg = layered_config(
        a.config.as_deref(),
        &[
            ("model", model),
            ("seed", opt(&cli.seed)),
            ("d", opt(&a.d)),
            ("n", opt(&a.n)),
            ("trials", opt(&a.trials)),
            ("sigma", opt(&a.sigma)),
            ("delta", a.delta.clone()),
            ("rho", a.rho.clone()),
            ("bins", opt(&a.bins)),
            ("pilot_images", opt(&a.pilot_images)),
            ("gen_budget", opt(&a.gen_budget)),
            ("l1.tol", opt(&a.l1_tol)),
            ("l1.max_iter", opt(&a.l1_max_iter)),
            ("l1.rho", opt(&a.l1_rho)),
        ],
    )?;
    let pc = PhaseConfig::from_config(&cfg, a.paper_scale)?;
    let result = pc.run()?;

    let mut m = Manifest::new("phase");
    if let Some(path) = &a.config {
        m.set("config", path.display());
    }
    m.set("paper_scale", a.paper_scale);
    match pc.model {
        GridModel::Gaussian { .. } => m.set("rho", join(&pc.rhos)),
        GridModel::Dif2d { .. } => m.set("bins", pc.bins),
    }
    m.set("delta", join(&pc.deltas));
    for (k, v) in &result.meta {
        m.set(k, v);
    }
    export_csv(&result, &cli.out_dir.join("phase.csv"))?;
    m.output("phase.csv");
    render_heatmap(&result, &cli.out_dir.join("phase.svg"))?;
    m.output("phase.svg");
    let cells = result.cells.iter().map(Vec::len).sum::<usize>();
    println!("{cells} cells written to {}", cli.out_dir.join("phase.csv").display());
    Ok(m)
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn mc_verify(cli: &Cli, a: &McVerifyArgs) -> Result<Manifest, Failure> {
    let check: BoundCheck = a.lemma.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let seed = master_seed(cli);
    let params = McParams {
        n: a.n,
        d: a.d,
        p: a.p,
        m: a.m,
        count: a.count,
        ratio: a.ratio,
    };
    let report = run_check(check, &params, a.trials, seed)?;
    println!("{report}");
    let mut m = Manifest::new("mc-verify");
    m.set("lemma", check);
    m.set("trials", a.trials);
    m.set("seed", seed);
    match check {
        BoundCheck::L3Collision => m.set("n", a.n),
        BoundCheck::L5Overlap | BoundCheck::L4Collision => {
            m.set("d", a.d);
            m.set("p", a.p);
        }
        BoundCheck::L6Distance => {
            m.set("n", a.n);
            m.set("m", a.m);
            m.set("count", a.count);
        }
        BoundCheck::L7Bayes => m.set("ratio", a.ratio),
    }
    m.set("empirical", report.empirical);
    m.set("bound", report.bound);
    m.set("stderr", report.stderr);
    if !report.pass {
        m.set("verdict", format!("FAIL: {report}"));
    } else {
        m.set("verdict", "PASS");
    }
    Ok(m)
}
