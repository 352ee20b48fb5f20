use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use bvrelax::boundary::{jqcb_falsify, qslb_infimum, JqcbOptions, QslbOptions};
use bvrelax::bv::BVField;
use bvrelax::gym::{
    check_characterization, dictionary_pairings, from_diperna_majda, generate, generate_from_fields, to_diperna_majda, CharacterizationOptions,
    DiPernaMajdaMeasure, GenYoungMeasure, GenerationOptions,
};
use bvrelax::integrands::{convex_envelope_1d, lookup, lookup_spatial, HomogeneousIntegrand, Integrand};
use bvrelax::linalg::Matrix;
use bvrelax::measure::DiscreteMeasure;
use bvrelax::mesh::Mesh;
use bvrelax::relax::{
    higher_dim_j, lookup_boundary, relax_minimize, toy_report, toy_sequence_member, BoundaryArc, BoundaryIntegrand, DirectOptions, DiskProblem,
    ProblemSpec, RelaxOptions, RelaxationResult,
};
use bvrelax::soucek::{default_test_family, outer_trace, SoucekPair};

/// Largest pairing gap accepted by `dm-convert --roundtrip`.
const ROUNDTRIP_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "bvrelax", version, about = "Young measures, boundary tests and relaxation of linear-growth functionals")]
struct Cli {
    /// Seed for every randomized search.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the JSON record here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the CSV table of the command here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Directory for (x,y) series files.
    #[arg(long, global = true)]
    emit_plot_data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the toy problem and report the sequence values and gaps.
    Toy {
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 6)]
        levels: usize,
        #[arg(long = "bound", default_value_t = 10.0)]
        c_bound: f64,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        ns: Vec<usize>,
    },
    /// Minimize F, F̄ and F̂ for a problem file.
    Relax {
        #[arg(long)]
        config: PathBuf,
        /// Mesh levels (the config file wins).
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Estimate the QSLB infimum of the recession of an integrand at a normal.
    QslbCheck {
        #[arg(long)]
        integrand: String,
        #[arg(long)]
        normal: String,
        #[arg(long, default_value_t = 3)]
        level: usize,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 12)]
        restarts: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Write the minimizing test field here.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Search for a violation of the boundary Jensen inequality.
    JqcbCheck {
        #[arg(long)]
        integrand: String,
        #[arg(long)]
        normal: String,
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Convex envelope of a scalar integrand on a grid.
    Envelope {
        #[arg(long)]
        integrand: String,
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
    },
    /// Generalized Young measure of a sequence.
    Generate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        window: Option<f64>,
        #[arg(long)]
        tail: Option<usize>,
    },
    /// Inner and outer traces of a Souček pair.
    Trace {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Convert a Young measure to a DiPerna–Majda measure (or back).
    DmConvert {
        #[arg(long = "in")]
        input: PathBuf,
        /// Convert back and report the largest dictionary pairing gap.
        #[arg(long)]
        roundtrip: bool,
        /// Input is a DiPerna–Majda record.
        #[arg(long)]
        reverse: bool,
    },
    /// Check the finiteness, Jensen, singular and boundary conditions of a gradient Young measure.
    Characterize {
        #[arg(long = "in")]
        input: PathBuf,
        /// Test integrands (default: norm, sqrt(1+|A|²) and ±A_ij).
        #[arg(long, value_delimiter = ',')]
        family: Vec<String>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1)]
        exceptional_cells: usize,
    },
}

struct Output<'a> {
    out: Option<&'a Path>,
    csv: Option<&'a Path>,
    plots: Option<&'a Path>,
}

impl Output<'_> {
    fn record<T: Serialize>(&self, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        match self.out {
            Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
            None => {
                let mut s = std::io::stdout().lock();
                writeln!(s, "{text}")?;
                Ok(())
            }
        }
    }

    fn table(&self, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if let Some(p) = self.csv {
            write_csv(p, header, rows)?;
        }
        Ok(())
    }

    fn series(&self, name: &str, points: &[(f64, f64)]) -> Result<()> {
        let Some(dir) = self.plots else { return Ok(()) };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let rows: Vec<Vec<String>> = points.iter().map(|(x, y)| vec![x.to_string(), y.to_string()]).collect();
        write_csv(&dir.join(format!("{name}.csv")), &["x", "y"], &rows)
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed record in {}", path.display()))
}

fn parse_normal(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| anyhow!("malformed normal `{s}`: expected comma-separated numbers")))
        .collect()
}

/// Recession of a catalog integrand; a name without an explicit shape is
/// widened to `1×N` for an `N`-dimensional normal.
fn recession_for(name: &str, dim: usize) -> Result<HomogeneousIntegrand> {
    let mut v = lookup(name)?;
    if v.cols != dim && !name.contains(':') {
        v = lookup(&format!("{name}:1x{dim}"))?;
    }
    Ok(v.recession_or_err()?.clone())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<bvrelax::Error>() {
                Some(bvrelax::Error::HypothesisRefused { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let io = Output { out: cli.out.as_deref(), csv: cli.csv.as_deref(), plots: cli.emit_plot_data.as_deref() };
    match &cli.command {
        Command::Toy { eps, levels, c_bound, ns } => toy(&io, cli.seed, *eps, *levels, *c_bound, ns),
        Command::Relax { config, levels } => relax(&io, cli.seed, config, *levels),
        Command::QslbCheck { integrand, normal, level, budget, restarts, tol, witness } => {
            let rho = parse_normal(normal)?;
            let v = recession_for(integrand, rho.len())?;
            let opts = QslbOptions { levels: *level, budget: *budget, restarts: *restarts, tol: *tol, seed: cli.seed };
            let r = qslb_infimum(&v, &rho, &opts)?;
            let witness_file = match (witness, &r.witness) {
                (Some(p), Some(w)) => {
                    fs::write(p, serde_json::to_string(w)?).with_context(|| format!("writing {}", p.display()))?;
                    Some(p.display().to_string())
                }
                _ => None,
            };
            let series: Vec<(f64, f64)> = r.per_level.iter().enumerate().map(|(k, v)| ((k + 1) as f64, *v)).collect();
            io.series("qslb_per_level", &series)?;
            io.table(&["level", "best_ratio"], &series.iter().map(|(l, v)| vec![l.to_string(), v.to_string()]).collect::<Vec<_>>())?;
            io.record(&serde_json::json!({
                "integrand": integrand,
                "normal": rho,
                "inf_est": r.inf_est,
                "verdict": r.verdict,
                "per_level": r.per_level,
                "witness_file": witness_file,
            }))
        }
        Command::JqcbCheck { integrand, normal, level, budget, tol } => {
            let rho = parse_normal(normal)?;
            let v = recession_for(integrand, rho.len())?;
            let opts = JqcbOptions { level: *level, budget: *budget, tol: *tol, seed: cli.seed };
            let c = jqcb_falsify(&v, &rho, &opts)?;
            io.record(&serde_json::json!({
                "integrand": integrand,
                "normal": rho,
                "verdict": if c.is_some() { "disproved" } else { "not_disproved" },
                "counterexample": c.map(|c| serde_json::json!({ "lhs": c.lhs, "rhs": c.rhs, "gradients": c.gradients })),
            }))
        }
        Command::Envelope { integrand, lo, hi, points } => {
            if !(hi > lo) || *points < 2 {
                bail!("envelope needs lo < hi and at least two points");
            }
            let v: Integrand = lookup(integrand)?;
            if (v.rows, v.cols) != (1, 1) {
                bail!("envelope needs a scalar integrand, {integrand} is {}x{}", v.rows, v.cols);
            }
            let grid: Vec<f64> = (0..*points).map(|k| lo + (hi - lo) * k as f64 / (*points - 1) as f64).collect();
            let (env, _) = convex_envelope_1d(&v, &grid)?;
            let f: Vec<f64> = grid.iter().map(|&t| v.eval(&Matrix::scalar(t))).collect();
            let e: Vec<f64> = grid.iter().map(|&t| env.eval(&Matrix::scalar(t))).collect();
            io.series("integrand", &grid.iter().copied().zip(f.iter().copied()).collect::<Vec<_>>())?;
            io.series("envelope", &grid.iter().copied().zip(e.iter().copied()).collect::<Vec<_>>())?;
            let rows: Vec<Vec<String>> = (0..grid.len()).map(|k| vec![grid[k].to_string(), f[k].to_string(), e[k].to_string()]).collect();
            io.table(&["t", "f", "envelope"], &rows)?;
            io.record(&serde_json::json!({ "integrand": integrand, "t": grid, "f": f, "envelope": e }))
        }
        Command::Generate { input, window, tail } => {
            let mut opts = GenerationOptions { seed: cli.seed, ..GenerationOptions::default() };
            if let Some(w) = window {
                opts.window = *w;
            }
            if let Some(t) = tail {
                opts.tail = *t;
            }
            let (gym, report) = match read_json::<SequenceInput>(input)? {
                SequenceInput::Measures(m) => generate(&m, &opts)?,
                SequenceInput::Fields { fields } => generate_from_fields(&fields, &opts)?,
                SequenceInput::Toy { toy } => {
                    let fields = toy.ns.iter().map(|&n| toy_sequence_member(toy.eps, n)).collect::<bvrelax::Result<Vec<_>>>()?;
                    generate_from_fields(&fields, &opts)?
                }
            };
            let moment = gym.first_moment();
            let series: Vec<(f64, f64)> = moment.plot_rows().iter().filter(|r| r.x.len() == 1).map(|r| (r.x[0], r.values[0])).collect();
            io.series("first_moment", &series)?;
            let rows: Vec<Vec<String>> =
                report.dictionary.iter().zip(&report.gym_values).map(|(n, v)| vec![n.clone(), v.to_string()]).collect();
            io.table(&["pair", "value"], &rows)?;
            io.record(&serde_json::json!({ "gym": gym, "report": report }))
        }
        Command::Trace { input } => {
            let p: SoucekPair = read_json(input)?;
            let t = outer_trace(&p)?;
            let mut rows = Vec::new();
            for (x, b0) in &t.inner {
                let b = t.outer.density.iter().find(|(y, _)| y == x).map(|(_, v)| v.clone()).unwrap_or_default();
                rows.push(vec![fmt_vec(x), fmt_vec(b0), fmt_vec(&b)]);
            }
            let mut stderr = std::io::stderr().lock();
            writeln!(stderr, "{:<24} {:<24} {:<24}", "x", "inner β⁰", "outer β")?;
            for r in &rows {
                writeln!(stderr, "{:<24} {:<24} {:<24}", r[0], r[1], r[2])?;
            }
            for (x, a) in &t.outer.atoms {
                writeln!(stderr, "atom of β at {}: {}", fmt_vec(x), fmt_vec(a))?;
            }
            io.table(&["x", "inner", "outer"], &rows)?;
            if p.mesh().dim() == 1 {
                io.series("outer_trace", &t.outer.density.iter().map(|(x, v)| (x[0], v[0])).collect::<Vec<_>>())?;
            }
            io.record(&t)
        }
        Command::DmConvert { input, roundtrip, reverse } => {
            let (gym, dm) = if *reverse {
                let dm: DiPernaMajdaMeasure = read_json(input)?;
                (from_diperna_majda(&dm)?, dm)
            } else {
                let gym: GenYoungMeasure = read_json(input)?;
                let dm = to_diperna_majda(&gym)?;
                (gym, dm)
            };
            let gap = if *roundtrip {
                let back = from_diperna_majda(&to_diperna_majda(&gym)?)?;
                let g = dictionary_pairings(&gym).iter().zip(dictionary_pairings(&back)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                Some(g)
            } else {
                None
            };
            let series: Vec<(f64, f64)> = (0..dm.mesh.n_cells())
                .filter(|_| dm.mesh.dim() == 1)
                .map(|i| (dm.mesh.cell_centroid(i)[0], dm.sigma_density[i]))
                .collect();
            io.series("sigma_density", &series)?;
            if *reverse {
                io.record(&serde_json::json!({ "gym": gym, "max_pairing_gap": gap }))?;
            } else {
                io.record(&serde_json::json!({ "diperna_majda": dm, "max_pairing_gap": gap }))?;
            }
            match gap {
                Some(g) if !(g <= ROUNDTRIP_TOL) => bail!("round trip changed a dictionary pairing by {g:e} (tolerance {ROUNDTRIP_TOL:e})"),
                _ => Ok(()),
            }
        }
        Command::Characterize { input, family, tol, exceptional_cells } => {
            let gym: GenYoungMeasure = read_json(input)?;
            let u = gym.field.clone().ok_or_else(|| anyhow!("the measure record has no underlying field"))?;
            let family: Vec<Integrand> = if family.is_empty() {
                default_test_family(gym.rows, gym.cols)
            } else {
                family.iter().map(|s| lookup(s)).collect::<bvrelax::Result<_>>()?
            };
            let opts = CharacterizationOptions { tol: *tol, exceptional_cells: *exceptional_cells, qslb: QslbOptions { seed: cli.seed, ..CharacterizationOptions::default().qslb } };
            let r = check_characterization(&gym, &u, &family, &opts)?;
            let conds = [("finiteness", &r.finiteness), ("jensen", &r.jensen), ("singular", &r.singular), ("boundary", &r.boundary)];
            let rows: Vec<Vec<String>> = conds
                .iter()
                .map(|(n, c)| vec![n.to_string(), c.pass.to_string(), c.worst_margin.to_string(), c.violations.to_string(), c.tested.to_string()])
                .collect();
            io.table(&["condition", "pass", "worst_margin", "violations", "tested"], &rows)?;
            io.record(&r)?;
            if !r.pass {
                let failed: Vec<&str> = conds.iter().filter(|(_, c)| !c.pass).map(|(n, _)| *n).collect();
                bail!("characterization failed: {}", failed.join(", "));
            }
            Ok(())
        }
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(",")
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SequenceInput {
    Measures(Vec<DiscreteMeasure>),
    Fields { fields: Vec<BVField> },
    Toy { toy: ToySequence },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToySequence {
    eps: f64,
    ns: Vec<usize>,
}

fn convergence_rows(r: &RelaxationResult) -> Vec<Vec<String>> {
    r.table
        .iter()
        .map(|row| vec![row.level.to_string(), row.cells.to_string(), row.direct.to_string(), row.extended.to_string(), row.gym.to_string()])
        .collect()
}

const CONVERGENCE_HEADER: [&str; 5] = ["level", "cells", "direct", "extended", "gym"];

fn relaxation_plots(io: &Output<'_>, r: &RelaxationResult) -> Result<()> {
    io.series("convergence_direct", &r.table.iter().map(|row| (row.level as f64, row.direct)).collect::<Vec<_>>())?;
    if let Some(u) = &r.minimizer.field {
        if let (Some(m), Some(v)) = (u.mesh.as_interval(), u.nodal_values()) {
            io.series("minimizer", &m.nodes().iter().zip(&v).map(|(x, y)| (*x, y[0])).collect::<Vec<_>>())?;
        }
    }
    Ok(())
}

fn toy(io: &Output<'_>, seed: u64, eps: f64, levels: usize, c_bound: f64, ns: &[usize]) -> Result<()> {
    let report = toy_report(eps, ns)?;
    let spec = ProblemSpec::toy(eps, c_bound)?;
    let mut opts = RelaxOptions { direct: DirectOptions { levels, ..DirectOptions::default() }, ..RelaxOptions::default() };
    opts.generation.seed = seed;
    opts.qslb.seed = seed;
    opts.jqcb.seed = seed;
    let r = relax_minimize(&spec, &opts)?;
    relaxation_plots(io, &r)?;
    io.table(&CONVERGENCE_HEADER, &convergence_rows(&r))?;
    io.record(&serde_json::json!({
        "eps": eps,
        "infimum_closed_form": report.infimum,
        "inf_direct": r.inf_direct,
        "min_extended": r.min_extended,
        "min_gym": r.min_gym,
        "generated_fhat": r.generated_fhat,
        "generated_outer_trace": r.generated_beta,
        "report": report,
        "table": r.table,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    domain: DomainSection,
    f: Option<FSection>,
    g: Option<GSection>,
    bounds: Option<BoundsSection>,
    solver: Option<SolverSection>,
    disk: Option<DiskSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    kind: String,
    a: Option<f64>,
    b: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FSection {
    integrand: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GSection {
    left: String,
    right: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsSection {
    #[serde(rename = "C")]
    c: f64,
    growth: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    levels: Option<usize>,
    base_cells: Option<usize>,
    value_range: Option<f64>,
    value_tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiskSection {
    eps: f64,
    gamma0: [f64; 2],
    gamma1: [f64; 2],
    ubar: Vec<f64>,
    base_divisions: Option<usize>,
    levels: Option<usize>,
}

fn relax(io: &Output<'_>, seed: u64, config: &Path, levels: Option<usize>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let file: ProblemFile = toml::from_str(&text).with_context(|| format!("malformed config {}", config.display()))?;
    match file.domain.kind.as_str() {
        "interval" => {
            let (a, b) = (file.domain.a.unwrap_or(0.0), file.domain.b.unwrap_or(1.0));
            let f = lookup_spatial(&file.f.ok_or_else(|| anyhow!("config needs an [f] section"))?.integrand)?;
            let g = file.g.ok_or_else(|| anyhow!("config needs a [g] section"))?;
            let g = BoundaryIntegrand::endpoints(a, lookup_boundary(&g.left)?, b, lookup_boundary(&g.right)?);
            let bounds = file.bounds.ok_or_else(|| anyhow!("config needs a [bounds] section with C"))?;
            let spec = ProblemSpec::new(Mesh::interval(a, b, 1)?, f, g, bounds.c, bounds.growth)?;
            let mut direct = DirectOptions::default();
            if let Some(l) = levels {
                direct.levels = l;
            }
            if let Some(s) = file.solver {
                direct.levels = s.levels.unwrap_or(direct.levels);
                direct.base_cells = s.base_cells.unwrap_or(direct.base_cells);
                direct.value_range = s.value_range.or(direct.value_range);
                direct.value_tol = s.value_tol.unwrap_or(direct.value_tol);
            }
            let mut opts = RelaxOptions { direct, ..RelaxOptions::default() };
            opts.generation.seed = seed;
            opts.qslb.seed = seed;
            opts.jqcb.seed = seed;
            let r = relax_minimize(&spec, &opts)?;
            relaxation_plots(io, &r)?;
            io.table(&CONVERGENCE_HEADER, &convergence_rows(&r))?;
            io.record(&r)
        }
        "disk" => {
            let d = file.disk.ok_or_else(|| anyhow!("a disk domain needs a [disk] section"))?;
            let arc = |p: [f64; 2]| BoundaryArc { start: p[0], end: p[1] };
            let mut p = DiskProblem::new(d.eps, arc(d.gamma0), arc(d.gamma1), d.ubar)?;
            if let Some(b) = d.base_divisions {
                p.base_divisions = b;
            }
            p.levels = d.levels.or(levels).unwrap_or(p.levels);
            let r = higher_dim_j(&p)?;
            io.series("convergence", &r.levels.iter().map(|l| (l.level as f64, l.value)).collect::<Vec<_>>())?;
            let rows: Vec<Vec<String>> =
                r.levels.iter().map(|l| vec![l.level.to_string(), l.triangles.to_string(), l.raw.to_string(), l.value.to_string()]).collect();
            io.table(&["level", "triangles", "raw", "value"], &rows)?;
            io.record(&r)
        }
        other => bail!("unknown domain kind `{other}` (expected interval or disk)"),
    }
}
