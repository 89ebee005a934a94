use std::fmt::Write as _;
use std::path::Path;

use dynrecon::chain::{compute_chain, reduction_report};
use dynrecon::experiments::condition_study;
use dynrecon::io::{format_pgm, write_atomic};
use dynrecon::models::{gaussian_blob, Demo};
use dynrecon::observability::{reconstruct, simulate};
use dynrecon::{RankTolerance, Result, SystemModel};
use nalgebra::DVector;

use crate::Output;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Artifacts<'a> {
    out: &'a Output,
    dir: &'a Path,
}

impl Artifacts<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.out.path(self.dir.join(name));
        self.out.ensure_parent(&path)?;
        write_atomic(&path, contents.as_bytes())
    }
}

fn cyclic_chain(art: &Artifacts) -> Result<Check> {
    let system = Demo::Cyclic.build(0)?;
    let chain = compute_chain(&system, 6, RankTolerance::default())?;
    let report = reduction_report(&chain)?;
    let mut csv = String::from("k,dim\n");
    for (k, d) in chain.dims().iter().enumerate() {
        writeln!(csv, "{},{d}", k + 1).expect("String write");
    }
    art.write("cyclic_chain.csv", &csv)?;
    Ok(Check {
        name: "cyclic chain",
        pass: chain.dims() == [4, 3, 2, 1, 0] && chain.k_star() == Some(5) && report.lower_bound == 3 && !report.is_optimal(),
        detail: format!(
            "dims {:?}, k_star {}, lower bound {}",
            chain.dims(),
            chain.k_star().map_or("not reached".to_string(), |k| k.to_string()),
            report.lower_bound
        ),
    })
}

fn rank_profile(art: &Artifacts, demo: Demo, name: &'static str) -> Result<Check> {
    let system = demo.build(0)?;
    let study = condition_study(&system, 1, 10, RankTolerance::MachinePrecision)?;
    let mut csv = String::from("T,rank,condition\n");
    for row in &study.rows {
        writeln!(csv, "{},{},{:e}", row.steps, row.rank, row.condition).expect("String write");
    }
    art.write(&format!("rank_profile_{}.csv", demo.name()), &csv)?;
    let ranks: Vec<usize> = study.rows.iter().map(|r| r.rank).collect();
    Ok(Check {
        name,
        pass: study.rows.iter().all(|r| r.rank == 10 * r.steps),
        detail: format!("ranks {ranks:?}"),
    })
}

fn conditioning(art: &Artifacts) -> Result<Check> {
    let study = condition_study(&Demo::L2Grid.build(0)?, 10, 15, RankTolerance::MachinePrecision)?;
    let mut csv = String::from("T,rank,condition\n");
    for row in &study.rows {
        writeln!(csv, "{},{},{:e}", row.steps, row.rank, row.condition).expect("String write");
    }
    art.write("condstudy_l2grid.csv", &csv)?;
    let first = study.rows[0].condition;
    let last = study.rows[study.rows.len() - 1].condition;
    Ok(Check {
        name: "l2grid conditioning",
        pass: study.rows.iter().all(|r| r.rank == 100) && last <= first / 10.0,
        detail: format!("condition {first:.3e} at T=10, {last:.3e} at T=15"),
    })
}

fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn round_trip(system: &SystemModel, x0: &DVector<f64>, steps: usize) -> Result<(f64, DVector<f64>)> {
    let (_, data) = simulate(system, x0, steps)?;
    let r = reconstruct(system, &data, RankTolerance::MachinePrecision)?;
    Ok((relative_error(&r.x0, x0), r.x0))
}

fn grid_reconstruction(art: &Artifacts) -> Result<Check> {
    let system = Demo::L2Grid.build(0)?;
    let grid = system.grid().expect("grid demo");
    let x0 = gaussian_blob(grid, 3.0, 3.0, 1.5)?;
    let (trajectory, _) = simulate(&system, &x0, 10)?;
    for t in [1usize, 2, 5, 9] {
        art.write(&format!("l2grid_state_t{t}.pgm"), &format_pgm(grid, &trajectory.states[t - 1])?)?;
    }
    let (err, x_hat) = round_trip(&system, &x0, 14)?;
    art.write("l2grid_reconstruction_t14.pgm", &format_pgm(grid, &x_hat)?)?;
    Ok(Check {
        name: "l2grid reconstruction",
        pass: err <= 1e-3,
        detail: format!("relative error {err:.3e} at T=14"),
    })
}

fn cyclic_reconstruction() -> Result<Check> {
    let x0 = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let (err, _) = round_trip(&Demo::Cyclic.build(0)?, &x0, 6)?;
    Ok(Check {
        name: "cyclic reconstruction",
        pass: err <= 1e-10,
        detail: format!("relative error {err:.3e} at T=6"),
    })
}

/// Runs every check, writes the artifacts and a summary, and reports
/// whether all checks passed.
pub fn run(out: &Output, dir: &Path) -> Result<bool> {
    let art = Artifacts { out, dir };
    let checks = [
        cyclic_chain(&art)?,
        rank_profile(&art, Demo::L1Grid, "l1grid rank growth")?,
        rank_profile(&art, Demo::L2Grid, "l2grid rank growth")?,
        conditioning(&art)?,
        grid_reconstruction(&art)?,
        cyclic_reconstruction()?,
    ];
    let mut summary = String::from("check,status,detail\n");
    for c in &checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", c.name, c.detail);
        writeln!(summary, "{},{status},{}", c.name, c.detail.replace(',', ";")).expect("String write");
    }
    art.write("summary.csv", &summary)?;
    let passed = checks.iter().filter(|c| c.pass).count();
    println!("{passed}/{} checks passed; artifacts in {}", checks.len(), out.path(dir).display());
    Ok(passed == checks.len())
}
