use std::fmt::Write as _;
use std::path::Path;

use dynrecon::chain::{compute_chain, reduction_report, stall_witness, Optimality};
use dynrecon::experiments::{condition_study, genericity_experiment, GenericityParams};
use dynrecon::io::{format_pgm, format_sequence, format_vectors, read_matrix, read_sequence, write_atomic};
use dynrecon::models::{gaussian_blob, Demo};
use dynrecon::observability::{reconstruct as reconstruct_state, simulate as simulate_state};
use dynrecon::{DenseMatrix, Error, GridSpec, RankTolerance, Result, SystemModel};
use nalgebra::DVector;

use crate::{Output, SystemArgs};

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub fn load_system(args: &SystemArgs) -> Result<SystemModel> {
    let system = if let Some(demo) = args.demo {
        demo.build(args.seed)?
    } else {
        let p_path = args
            .projection
            .as_deref()
            .ok_or_else(|| invalid("give --demo NAME, or --dynamics FILE... with --projection FILE"))?;
        if args.dynamics.is_empty() {
            return Err(invalid("--projection needs at least one --dynamics file"));
        }
        if args.dynamics.len() > 1 && !args.time_varying {
            return Err(invalid("several --dynamics files need --time-varying"));
        }
        let p = read_matrix(p_path)?;
        let ls = args.dynamics.iter().map(|f| read_matrix(f)).collect::<Result<Vec<_>>>()?;
        let system = if args.time_varying {
            SystemModel::time_varying(ls, p)?
        } else {
            SystemModel::stationary(ls.into_iter().next().expect("checked nonempty"), p)?
        };
        system.with_label(args.dynamics[0].display().to_string())
    };
    match args.grid {
        Some(side) => system.with_grid(GridSpec::new(side)?),
        None => Ok(system),
    }
}

fn emit(out: &Output, path: &Path, contents: &str) -> Result<()> {
    let path = out.path(path);
    out.ensure_parent(&path)?;
    write_atomic(&path, contents.as_bytes())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn emit_or_print(out: &Output, path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => emit(out, p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

pub fn chain(out: &Output, args: &SystemArgs, max_steps: Option<usize>, tol: RankTolerance, csv: Option<&Path>) -> Result<()> {
    let system = load_system(args)?;
    let n = system.state_dim();
    let max_steps = max_steps.unwrap_or(match system.operator_count() {
        Some(k) => (k + 1).min(n + 1),
        None => n + 1,
    });
    let chain = compute_chain(&system, max_steps, tol)?;
    let report = reduction_report(&chain)?;
    let witness = stall_witness(&chain, tol)?;

    println!("system: {}", system.label());
    println!("n: {n}");
    println!("m: {}", system.measurement_dim());
    println!("dims: {}", join(&chain.dims()));
    match chain.k_star() {
        Some(k) => println!("k_star: {k}"),
        None => println!("k_star: not reached"),
    }
    println!("lower_bound: {}", report.lower_bound);
    let optimal = match report.optimality {
        Optimality::Optimal => "yes",
        Optimality::NotOptimal => "no",
        Optimality::Undecided => "undecided",
    };
    println!("optimal: {optimal}");
    let profile: Vec<&str> = report.transverse_profile.iter().map(|&t| yes_no(t)).collect();
    println!("transverse: {}", profile.join(" "));
    match chain.stalled_at() {
        Some(i) => println!("stalled_at: {i}"),
        None => println!("stalled_at: none"),
    }
    match &witness {
        Some(w) => println!(
            "stall_witness: dim {} at N_{}, invariance residual {:e}",
            w.subspace.dim(),
            w.index,
            w.invariance_residual
        ),
        None => println!("stall_witness: none"),
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }

    if let Some(path) = csv {
        let mut text = String::from("k,dim,transverse\n");
        for (i, d) in chain.dims().iter().enumerate() {
            let t = if i == 0 { "na" } else { yes_no(report.transverse_profile[i - 1]) };
            writeln!(text, "{},{d},{t}", i + 1).expect("String write");
        }
        emit(out, path, &text)?;
    }
    Ok(())
}

fn parse_blob(spec: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| invalid(format!("--blob expects ci,cj,sigma, got {spec:?}")))?;
    match parts[..] {
        [ci, cj, sigma] => Ok((ci, cj, sigma)),
        _ => Err(invalid(format!("--blob expects three numbers, got {spec:?}"))),
    }
}

fn read_state(path: &Path, n: usize) -> Result<DVector<f64>> {
    let m: DenseMatrix = read_matrix(path)?;
    if m.rows().min(m.cols()) != 1 || m.rows() * m.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}: initial state is {}x{}, expected a vector of length {n}",
            path.display(),
            m.rows(),
            m.cols()
        )));
    }
    Ok(DVector::from_vec(m.to_row_major()))
}

fn state_file(x: &DVector<f64>) -> Result<DenseMatrix> {
    DenseMatrix::new(x.len(), 1, x.iter().copied().collect())
}

pub fn simulate(out: &Output, args: &SystemArgs, x0: Option<&Path>, blob: Option<&str>, steps: usize, prefix: &str) -> Result<()> {
    let system = load_system(args)?;
    let x0 = match (x0, blob) {
        (Some(path), _) => read_state(path, system.state_dim())?,
        (None, Some(spec)) => {
            let grid = system
                .grid()
                .ok_or_else(|| invalid("--blob needs a system on a pixel grid (use --grid SIDE)"))?;
            let (ci, cj, sigma) = parse_blob(spec)?;
            gaussian_blob(grid, ci, cj, sigma)?
        }
        (None, None) => return Err(invalid("give --x0 FILE or --blob ci,cj,sigma")),
    };
    let (trajectory, data) = simulate_state(&system, &x0, steps)?;
    emit(out, Path::new(&format!("{prefix}_data.csv")), &format_sequence(&data))?;
    emit(out, Path::new(&format!("{prefix}_states.csv")), &format_vectors(&trajectory.states))?;
    if let Some(grid) = system.grid() {
        for (t, x) in trajectory.states.iter().enumerate() {
            emit(out, Path::new(&format!("{prefix}_frame_{:02}.pgm", t + 1)), &format_pgm(grid, x)?)?;
        }
    }
    println!("steps: {steps}");
    Ok(())
}

pub fn reconstruct(out: &Output, args: &SystemArgs, data_path: &Path, prefix: &str, tol: RankTolerance) -> Result<()> {
    let system = load_system(args)?;
    let data = read_sequence(data_path)?;
    let r = reconstruct_state(&system, &data, tol)?;
    let status = if r.unique() { "unique" } else { "non-unique" };
    let oracle = r.oracle_unique.map_or("na", yes_no);

    let mut summary = String::from("field,value\n");
    let fields = [
        ("steps", data.steps().to_string()),
        ("n", system.state_dim().to_string()),
        ("rank", r.rank.to_string()),
        ("condition", format!("{:e}", r.condition)),
        ("residual", format!("{:e}", r.residual)),
        ("rank_unique", yes_no(r.rank_unique).to_string()),
        ("oracle_unique", oracle.to_string()),
        ("status", status.to_string()),
    ];
    for (k, v) in &fields {
        writeln!(summary, "{k},{v}").expect("String write");
        println!("{k}: {v}");
    }
    emit(out, Path::new(&format!("{prefix}_x0.txt")), &dynrecon::io::format_matrix(&state_file(&r.x0)?))?;
    emit(out, Path::new(&format!("{prefix}_trajectory.csv")), &format_vectors(&r.trajectory.states))?;
    emit(out, Path::new(&format!("{prefix}_summary.csv")), &summary)?;
    if let Some(grid) = system.grid() {
        emit(out, Path::new(&format!("{prefix}_x0.pgm")), &format_pgm(grid, &r.x0)?)?;
    }
    Ok(())
}

pub fn genericity(
    out: &Output,
    values: &[u64],
    time_varying: bool,
    random_projection: bool,
    tol: RankTolerance,
    detail: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let [n, m, trials, seed] = values[..] else {
        return Err(invalid("--genericity expects n m trials seed"));
    };
    let mut params = GenericityParams::new(n as usize, m as usize, trials as usize, seed);
    params.time_varying = time_varying;
    params.random_projection = random_projection;
    let report = genericity_experiment(params, tol)?;

    let mut text = String::from("field,value\n");
    let rows = [
        ("n", n.to_string()),
        ("m", m.to_string()),
        ("trials", trials.to_string()),
        ("seed", seed.to_string()),
        ("time_varying", time_varying.to_string()),
        ("random_projection", random_projection.to_string()),
        ("count_optimal", report.count_optimal.to_string()),
        ("count_all_transverse", report.count_all_transverse.to_string()),
        ("fraction_optimal", format!("{:?}", report.fraction_optimal())),
        ("fraction_all_transverse", format!("{:?}", report.fraction_all_transverse())),
        ("failing_seeds", join(&report.failing_seeds)),
        ("lower_bound_violations", report.lower_bound_violations.len().to_string()),
        ("consistency_violations", report.consistency_violations.len().to_string()),
    ];
    for (k, v) in &rows {
        writeln!(text, "{k},{v}").expect("String write");
    }
    emit_or_print(out, report_path, &text)?;

    if let Some(path) = detail {
        let mut text = String::from("trial,seed,dims,k_star,lower_bound,optimal,all_transverse\n");
        for o in &report.outcomes {
            let k_star = o.k_star.map_or("na".to_string(), |k| k.to_string());
            writeln!(
                text,
                "{},{},{},{k_star},{},{},{}",
                o.index,
                o.seed,
                join(&o.dims),
                o.lower_bound,
                o.optimal,
                o.all_transverse
            )
            .expect("String write");
        }
        emit(out, path, &text)?;
    }
    Ok(())
}

pub fn condstudy(out: &Output, values: &[String], seed: u64, tol: RankTolerance, report_path: Option<&Path>) -> Result<()> {
    let [demo, t_min, t_max] = values else {
        return Err(invalid("--condstudy expects demo t_min t_max"));
    };
    let demo: Demo = demo.parse()?;
    let parse = |s: &str| s.parse::<usize>().map_err(|_| invalid(format!("not a step count: {s:?}")));
    let (t_min, t_max) = (parse(t_min)?, parse(t_max)?);
    let study = condition_study(&demo.build(seed)?, t_min, t_max, tol)?;
    let mut text = String::from("T,rank,condition\n");
    for row in &study.rows {
        writeln!(text, "{},{},{:e}", row.steps, row.rank, row.condition).expect("String write");
    }
    emit_or_print(out, report_path, &text)
}
