use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ecdf_bands::adjust::DEFAULT_TOL;
use ecdf_bands::cache::{build_grid, BuildOptions, GammaGrid, KPolicy};
use ecdf_bands::multi::{test_multi, MultiSample};
use ecdf_bands::power::{power_sweep, Family, PowerConfig, TestKind};
use ecdf_bands::report::{plot_data, rank_hist, render_svg, PlotSpec};
use ecdf_bands::single::{test_single, SingleSample};
use ecdf_bands::thinning::{
    ess_report, thin as thin_chains, thinning_factor, EssReport, Strategy, ThinningPlan,
};
use ecdf_bands::transform::{default_grid, empirical_pit};
use ecdf_bands::{
    ChainSet, ConfidenceBands, EcdfTrajectory, Error, EvaluationGrid, Exceedance, GammaResult,
    Method, PitValues, Resolution, TiePolicy,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::input::{read_table, write_columns};
use crate::{BandOpts, GammaAction, MethodArg, PlotKindArg, TieArg};

pub const REPORT_SCHEMA: &str = "report/1";
pub const THIN_SCHEMA: &str = "thin/1";

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn to_json(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

enum Sample {
    Single(PitValues),
    Multi(ChainSet),
}

impl Sample {
    fn load(path: &Path) -> Result<Self> {
        let table = read_table(path)?;
        if table.width() == 1 {
            let values = table.columns().remove(0);
            let pit = match table.resolution {
                Some(s) => PitValues::discrete(values, s)?,
                None => PitValues::continuous(values)?,
            };
            Ok(Sample::Single(pit))
        } else {
            Ok(Sample::Multi(ChainSet::new(table.columns())?))
        }
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            Sample::Single(u) => (u.len(), 1),
            Sample::Multi(c) => (c.len(), c.num_chains()),
        }
    }

    fn grid(&self, k_max: usize) -> Result<EvaluationGrid> {
        let (n, l) = self.dims();
        let resolution = match self {
            Sample::Single(u) => u.to_rank_scale().resolution(),
            Sample::Multi(_) => Resolution::Discrete((n * l) as u64),
        };
        Ok(default_grid(n, resolution, k_max)?)
    }

    fn continuous(&self) -> bool {
        match self {
            Sample::Single(u) => u.resolution() == Resolution::Continuous,
            Sample::Multi(_) => true,
        }
    }
}

fn tie_policy(arg: TieArg, seed: u64) -> TiePolicy {
    match arg {
        TieArg::Deterministic => TiePolicy::Deterministic,
        TieArg::Random => TiePolicy::Random(seed),
    }
}

/// A cached `gamma` when the cache covers the query with the same grid policy.
fn cached_gamma(opts: &BandOpts, n: usize, l: usize) -> Result<Option<GammaResult>> {
    let Some(path) = &opts.cache else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let grid = GammaGrid::from_json(&text)?;
    let policy = KPolicy::Default { k_max: opts.grid_k };
    for e in grid
        .entries
        .iter()
        .filter(|e| e.l == l && e.alpha == opts.alpha)
    {
        if policy.grid(e.n, e.l)?.len() != e.k {
            return Ok(None);
        }
    }
    match grid.interpolate(n, l, opts.alpha) {
        Ok(r) => Ok(Some(r)),
        Err(Error::OutOfRange { .. } | Error::MissingSlice { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn method_for(opts: &BandOpts, n: usize, l: usize, cacheable: bool) -> Result<Method> {
    let cached = || {
        if cacheable {
            cached_gamma(opts, n, l)
        } else {
            Ok(None)
        }
    };
    Ok(match opts.method {
        MethodArg::Optimize => Method::Optimize { tol: DEFAULT_TOL },
        MethodArg::Simulate => Method::Simulate {
            replicates: opts.m_reps,
            seed: opts.seed,
        },
        MethodArg::Cache => Method::Fixed(cached()?.ok_or_else(|| {
            CliError::Usage(format!(
                "no cached gamma for N={n}, L={l}, alpha={} (set --cache or ECDF_BANDS_CACHE)",
                opts.alpha
            ))
        })?),
        MethodArg::Auto => match cached()? {
            Some(r) => Method::Fixed(r),
            None if l <= 3 => Method::Optimize { tol: DEFAULT_TOL },
            None => Method::Simulate {
                replicates: opts.m_reps,
                seed: opts.seed,
            },
        },
    })
}

#[derive(Serialize)]
struct BandsOut<'a> {
    lower: Vec<f64>,
    upper: Vec<f64>,
    lower_counts: &'a [u64],
    upper_counts: &'a [u64],
}

#[derive(Serialize)]
struct ChainOut<'a> {
    chain: usize,
    inside: bool,
    exceedances: &'a [Exceedance],
    ecdf: Vec<f64>,
}

#[derive(Serialize)]
struct Report<'a> {
    schema: &'static str,
    kind: &'static str,
    inside: bool,
    alpha: f64,
    n: usize,
    chains: usize,
    gamma: &'a GammaResult,
    grid: &'a [f64],
    bands: BandsOut<'a>,
    results: Vec<ChainOut<'a>>,
}

struct Outcome {
    inside: bool,
    bands: ConfidenceBands,
    gamma: GammaResult,
    trajectories: Vec<EcdfTrajectory>,
    exceedances: Vec<Vec<Exceedance>>,
}

fn run_test(sample: &Sample, opts: &BandOpts) -> Result<Outcome> {
    let (n, l) = sample.dims();
    let grid = sample.grid(opts.grid_k)?;
    let method = method_for(opts, n, l, sample.continuous())?;
    Ok(match sample {
        Sample::Single(u) => {
            let r = test_single(u, opts.alpha, &method, Some(grid))?;
            Outcome {
                inside: r.inside,
                bands: r.bands,
                gamma: r.gamma,
                trajectories: vec![r.trajectory],
                exceedances: vec![r.exceedances],
            }
        }
        Sample::Multi(c) => {
            let r = test_multi(
                c,
                opts.alpha,
                &method,
                Some(grid),
                tie_policy(opts.tie_policy, opts.seed),
            )?;
            let (trajectories, exceedances) = r
                .chains
                .into_iter()
                .map(|c| (c.trajectory, c.exceedances))
                .unzip();
            Outcome {
                inside: r.inside,
                bands: r.bands,
                gamma: r.gamma,
                trajectories,
                exceedances,
            }
        }
    })
}

fn exit_for(inside: bool) -> ExitCode {
    if inside {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn ecdf_spec(o: &Outcome, difference: bool, title: Option<&str>) -> Result<PlotSpec> {
    let spec = PlotSpec::ecdf(o.bands.clone(), o.trajectories.clone(), difference)?;
    Ok(match title {
        Some(t) => spec.with_title(t),
        None => spec,
    })
}

pub fn test(
    input: &Path,
    opts: &BandOpts,
    out: Option<&Path>,
    svg: Option<&Path>,
    diff: bool,
) -> Result<ExitCode> {
    let sample = Sample::load(input)?;
    let (n, l) = sample.dims();
    let o = run_test(&sample, opts)?;
    let report = Report {
        schema: REPORT_SCHEMA,
        kind: if l == 1 { "single" } else { "multi" },
        inside: o.inside,
        alpha: opts.alpha,
        n,
        chains: l,
        gamma: &o.gamma,
        grid: o.bands.grid.points(),
        bands: BandsOut {
            lower: o.bands.lower(),
            upper: o.bands.upper(),
            lower_counts: &o.bands.lower_counts,
            upper_counts: &o.bands.upper_counts,
        },
        results: o
            .trajectories
            .iter()
            .zip(&o.exceedances)
            .enumerate()
            .map(|(chain, (t, ex))| ChainOut {
                chain,
                inside: ex.is_empty(),
                exceedances: ex,
                ecdf: t.values(),
            })
            .collect(),
    };
    emit(out, &to_json(&report)?)?;
    if let Some(path) = svg {
        emit(Some(path), &render_svg(&ecdf_spec(&o, diff, None)?)?)?;
    }
    Ok(exit_for(o.inside))
}

pub fn pit(draws: &Path, comparison: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let y = read_table(draws)?;
    if y.width() != 1 {
        return Err(CliError::Usage(format!(
            "{}: expected one draw per row",
            draws.display()
        )));
    }
    let y = y.columns().remove(0);
    let rows = read_table(comparison)?.rows;
    let u = empirical_pit(&y, &rows)?;
    let Resolution::Discrete(s) = u.resolution() else {
        unreachable!("empirical PIT values are discrete")
    };
    let mut text = format!("# resolution: {s}\nu\n");
    for v in u.values() {
        text.push_str(&format!("{v}\n"));
    }
    emit(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

pub struct PowerArgs {
    pub family: String,
    pub ks: Vec<f64>,
    pub n: usize,
    pub chains: usize,
    pub tests: Vec<String>,
    pub alpha: f64,
    pub m_reps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn power(a: &PowerArgs) -> Result<ExitCode> {
    let family: Family = a.family.parse()?;
    let tests = a
        .tests
        .iter()
        .map(|t| t.parse::<TestKind>())
        .collect::<ecdf_bands::Result<Vec<_>>>()?;
    let mut cfg = PowerConfig::new(a.n, a.chains);
    cfg.alpha = a.alpha;
    cfg.replicates = a.m_reps;
    cfg.critical_replicates = a.m_reps.max(1000);
    cfg.seed = a.seed;
    let curve = power_sweep(&tests, family, &a.ks, &cfg)?;
    let mut text = String::from("family,n,chains,k,test,rate,std_error\n");
    for t in &curve.tests {
        for (i, k) in curve.ks.iter().enumerate() {
            text.push_str(&format!(
                "{:?},{},{},{k},{},{},{}\n",
                curve.family, curve.n, curve.chains, t.test, t.rates[i], t.std_errors[i]
            ));
        }
    }
    emit(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ThinReport<'a> {
    schema: &'static str,
    plan: &'a ThinningPlan,
    ess: &'a EssReport,
}

pub fn thin(
    input: &Path,
    strategy: &str,
    out: Option<&Path>,
    report: Option<&Path>,
) -> Result<ExitCode> {
    let strategy: Strategy = strategy.parse()?;
    let chains = ChainSet::new(read_table(input)?.columns())?;
    let ess = ess_report(&chains)?;
    let plan = thinning_factor(&ess, chains.len() * chains.num_chains(), strategy);
    let thinned = thin_chains(&chains, plan.factor)?;
    let mut csv = Vec::new();
    write_columns(&mut csv, thinned.chains())?;
    let json = to_json(&ThinReport {
        schema: THIN_SCHEMA,
        plan: &plan,
        ess: &ess,
    })?;
    emit(out, &String::from_utf8_lossy(&csv))?;
    match (report, out) {
        (Some(p), _) => emit(Some(p), &json)?,
        (None, Some(_)) => emit(None, &json)?,
        (None, None) => {}
    }
    Ok(ExitCode::SUCCESS)
}

pub fn gamma(action: GammaAction) -> Result<ExitCode> {
    match action {
        GammaAction::Build {
            n,
            chains,
            alpha,
            grid_k,
            m_reps,
            seed,
            out,
        } => {
            if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && **a <= 0.5)) {
                return Err(CliError::Usage(format!(
                    "alpha must lie in (0, 0.5], got {a}"
                )));
            }
            let opts = BuildOptions {
                k_policy: KPolicy::Default { k_max: grid_k },
                tol: DEFAULT_TOL,
                replicates: m_reps,
                seed,
            };
            let grid = build_grid(&n, &chains, &alpha, &opts)?;
            emit(out.as_deref(), &(grid.to_json()? + "\n"))?;
        }
        GammaAction::Get { n, chains, opts } => {
            let policy = KPolicy::Default { k_max: opts.grid_k };
            let grid = policy.grid(n, chains)?;
            let method = method_for(&opts, n, chains, true)?;
            let r = if chains == 1 {
                SingleSample::new(n, grid)?.resolve(opts.alpha, &method)?
            } else {
                MultiSample::new(n, chains, grid)?.resolve(opts.alpha, &method)?
            };
            emit(None, &to_json(&r)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub struct PlotArgs {
    pub input: PathBuf,
    pub kind: PlotKindArg,
    pub opts: BandOpts,
    pub bins: Option<usize>,
    pub title: Option<String>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
}

pub fn plot(a: &PlotArgs) -> Result<ExitCode> {
    let sample = Sample::load(&a.input)?;
    let spec = match a.kind {
        PlotKindArg::Hist => {
            let Sample::Single(u) = &sample else {
                return Err(CliError::Usage(
                    "rank histograms take a single column of PIT values".into(),
                ));
            };
            let u = u.to_rank_scale();
            let bins = a.bins.unwrap_or(u.len().min(20));
            let spec = PlotSpec::rank_hist(rank_hist(u.values(), bins, a.opts.alpha)?);
            match &a.title {
                Some(t) => spec.with_title(t),
                None => spec,
            }
        }
        kind => {
            let o = run_test(&sample, &a.opts)?;
            ecdf_spec(&o, kind == PlotKindArg::Diff, a.title.as_deref())?
        }
    };
    emit(a.out.as_deref(), &render_svg(&spec)?)?;
    if let Some(path) = &a.data {
        emit(Some(path), &to_json(&plot_data(&spec)?)?)?;
    }
    Ok(ExitCode::SUCCESS)
}
