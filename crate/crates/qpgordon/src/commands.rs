//! The eight experiment subcommands.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use qpgordon_core::cocycle::{factorize, lyapunov, phase_grid, schrodinger, uniform_upper_margin, UniformBoundConfig, UniformBoundReport};
use qpgordon_core::contfrac::{expand, ContinuedFraction, FrequencySpec};
use qpgordon_core::discrepancy::{certified_star_discrepancy, gordon_grid, rotation_orbit, PointSet, Shift};
use qpgordon_core::gordon::{verdict, GordonConfig, GordonReport, Verdict};
use qpgordon_core::mp::Mp;
use qpgordon_core::periodic::{log_variation_bounds, semi_variation, total_variation, PeriodicFunction};
use qpgordon_core::spectrum::{all_eigenvalues, build_box, cluster_eigenpairs, clusters, regime_scan, RegimeScanConfig};
use qpgordon_core::Error as CoreError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Energies, ExperimentConfig};
use crate::error::{exit, CliError, CliResult};
use crate::grammar::{parse_frequency, parse_potential, parse_rational};
use crate::report::{Manifest, OutputDir, SCHEMA_VERSION};

/// Orbit enumeration stops at this many points per `q_k`.
const MAX_ENUMERATED_Q: usize = 1_000_000;
/// Gordon grids cost `O(q² log q)`, so they stop earlier.
const MAX_GRID_Q: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Contfrac,
    Discrepancy,
    Variation,
    Lyapunov,
    UniformBound,
    GordonCheck,
    Spectrum,
    RegimeScan,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Contfrac => "contfrac",
            Command::Discrepancy => "discrepancy",
            Command::Variation => "variation",
            Command::Lyapunov => "lyapunov",
            Command::UniformBound => "uniform-bound",
            Command::GordonCheck => "gordon-check",
            Command::Spectrum => "spectrum",
            Command::RegimeScan => "regime-scan",
        }
    }
}

/// The result of a run: its exit code and where the artifacts went.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub output_dir: PathBuf,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

struct Session {
    cfg: ExperimentConfig,
    base_dir: PathBuf,
    pool: rayon::ThreadPool,
    bits: usize,
    ops: Vec<String>,
    warnings: Vec<String>,
}

fn tolerance(digits: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(10u32).pow(digits))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    (x >> shift).to_f64().map_or(f64::NAN, f64::ln) + shift as f64 * std::f64::consts::LN_2
}

fn q_usize(cf: &ContinuedFraction, k: usize) -> Option<usize> {
    cf.q(k).to_usize()
}

impl Session {
    fn log(&mut self, op: impl Into<String>) {
        self.ops.push(op.into());
    }

    fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    fn frequency(&mut self) -> CliResult<ContinuedFraction> {
        let mut spec = parse_frequency(&self.cfg.frequency)?;
        if let FrequencySpec::Liouville { budget, .. } = &mut spec {
            *budget = (*budget).min(self.cfg.q_budget_digits);
        }
        let depth = self.cfg.depth;
        self.log(format!("contfrac::expand({}, depth={depth})", self.cfg.frequency));
        match expand(&spec, depth) {
            Ok(cf) => {
                if cf.depth() < depth && !matches!(spec, FrequencySpec::Quotients(_)) {
                    self.warn(format!("frequency expanded to depth {} of {depth}", cf.depth()));
                }
                Ok(cf)
            }
            Err(CoreError::PrecisionExhausted { certified }) if !certified.is_empty() => {
                self.warn(format!("input precision certifies only {} quotients", certified.len()));
                Ok(ContinuedFraction::from_quotients(certified, BigUint::one(), false, "certified decimal prefix")?)
            }
            Err(CoreError::RationalInput { prefix }) => Err(CliError::Config(format!(
                "frequency {} is rational (expansion stops after {} quotients)",
                self.cfg.frequency,
                prefix.len()
            ))),
            Err(e) => Err(e.into()),
        }
    }

    /// Orbit certification failures usually mean the expansion is too short.
    fn orbit_hint(&self, e: CoreError) -> CliError {
        match e {
            CoreError::DepthInsufficient { step } => CliError::Config(format!(
                "depth {} cannot certify orbit step {step}; raise depth or lower tolerance_digits",
                self.cfg.depth
            )),
            e => e.into(),
        }
    }

    fn potential(&mut self) -> CliResult<PeriodicFunction> {
        self.log(format!("periodic_fn::parse({})", self.cfg.potential));
        Ok(parse_potential(&self.cfg.potential, &self.base_dir)?)
    }

    fn phases(&self) -> CliResult<Vec<(String, BigRational)>> {
        self.cfg
            .phases
            .iter()
            .map(|p| Ok((p.clone(), parse_rational(p)?)))
            .collect()
    }

    fn first_phase(&self) -> CliResult<BigRational> {
        Ok(self.phases()?.remove(0).1)
    }

    fn energies(&mut self, f: &PeriodicFunction, x: &BigRational, cf: &ContinuedFraction) -> CliResult<Vec<f64>> {
        match self.cfg.energies.clone() {
            Energies::List(v) => Ok(v),
            Energies::Grid { min, max, count } => Ok(if count == 1 {
                vec![min]
            } else {
                (0..count).map(|i| min + (max - min) * i as f64 / (count - 1) as f64).collect()
            }),
            Energies::BoxMid { box_mid_k: k } => {
                let n = q_usize(cf, k).ok_or_else(|| CliError::Config(format!("q_{k} is too large for a box")))?;
                let tol = tolerance(self.cfg.spectrum.tolerance_digits);
                let op = build_box(f, x, cf, n, &tol)?;
                let ev = all_eigenvalues(&op, self.cfg.spectrum.eigen_tol);
                let e = ev[ev.len() / 2];
                self.log(format!("spectrum::eigenvalues(box N=q_{k}={n}) -> middle E={e}"));
                Ok(vec![e])
            }
        }
    }

    fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> CliResult<R> + Sync + Send) -> CliResult<Vec<R>> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

/// Runs `cmd`; `base_dir` resolves relative table paths in the config.
pub fn execute(cmd: Command, cfg: ExperimentConfig, base_dir: &Path, jobs: Option<usize>) -> CliResult<Outcome> {
    let start = Instant::now();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut s = Session {
        bits: cfg.precision()?,
        cfg,
        base_dir: base_dir.to_path_buf(),
        pool,
        ops: Vec::new(),
        warnings: Vec::new(),
    };
    let mut out = OutputDir::create(&s.cfg.output_dir)?;
    let exit_code = match cmd {
        Command::Contfrac => contfrac(&mut s, &mut out)?,
        Command::Discrepancy => discrepancy(&mut s, &mut out)?,
        Command::Variation => variation(&mut s, &mut out)?,
        Command::Lyapunov => lyapunov_cmd(&mut s, &mut out)?,
        Command::UniformBound => uniform_bound(&mut s, &mut out)?,
        Command::GordonCheck => gordon_check(&mut s, &mut out)?,
        Command::Spectrum => spectrum(&mut s, &mut out)?,
        Command::RegimeScan => regime(&mut s, &mut out)?,
    };
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        precision_bits: s.bits,
        seed: s.cfg.seed,
        config: s.cfg.clone(),
        jobs,
        exit_code,
        started_unix_seconds: started,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs: out.written().to_vec(),
        operations: s.ops.clone(),
        warnings: s.warnings.clone(),
    };
    manifest.write(&out)?;
    Ok(Outcome {
        exit_code,
        output_dir: out.root().to_path_buf(),
        outputs: out.written().to_vec(),
        warnings: s.warnings,
    })
}

#[derive(Serialize)]
struct ContfracRow {
    k: usize,
    a_k: String,
    p_k: String,
    q_k: String,
    log_q_next_over_q: Option<f64>,
}

#[derive(Serialize)]
struct ContfracSummary {
    source: String,
    depth: usize,
    next_quotient_min: String,
    next_quotient_exact: bool,
    determinants_hold: bool,
    beta_hat: Option<f64>,
}

fn contfrac(s: &mut Session, out: &mut OutputDir) -> CliResult<i32> {
    let cf = s.frequency()?;
    let rows: Vec<ContfracRow> = (0..=cf.depth())
        .map(|k| ContfracRow {
            k,
            a_k: if k == 0 { "0".into() } else { cf.quotients()[k - 1].to_string() },
            p_k: cf.p(k).to_string(),
            q_k: cf.q(k).to_string(),
            log_q_next_over_q: (k >= 1 && k < cf.depth()).then(|| ln_big(cf.q(k + 1)) / cf.q(k).to_f64().unwrap_or(f64::INFINITY)),
        })
        .collect();
    s.log("contfrac::convergents");
    let beta_hat = cf.beta_estimate(1).ok().map(|b| b.beta_hat);
    s.log("contfrac::beta_estimate(k_min=1)");
    out.csv("contfrac.csv", &rows)?;
    out.json(
        "contfrac.json",
        "contfrac",
        &ContfracSummary {
            source: cf.source().into(),
            depth: cf.depth(),
            next_quotient_min: cf.next_quotient_min().to_string(),
            next_quotient_exact: cf.next_quotient_is_exact(),
            determinants_hold: cf.determinants_hold(),
            beta_hat,
        },
    )?;
    Ok(exit::SUCCESS)
}

#[derive(Serialize)]
struct DiscrepancyRow {
    k: usize,
    q_k: usize,
    #[serde(rename = "D*")]
    d_star: f64,
    bound: f64,
    margin: f64,
    phases: usize,
    holds: bool,
}

#[derive(Serialize)]
struct GridRow {
    k: usize,
    q_k: usize,
    s: usize,
    sign: i8,
    #[serde(rename = "D*")]
    d_star: f64,
    bound: f64,
    margin: f64,
    holds: bool,
}

fn discrepancy(s: &mut Session, out: &mut OutputDir) -> CliResult<i32> {
    let cf = s.frequency()?;
    let sec = s.cfg.discrepancy.clone();
    let tol = tolerance(sec.tolerance_digits);
    let mut phases: Vec<BigRational> = s.phases()?.into_iter().map(|p| p.1).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(s.cfg.seed);
    phases.extend((0..sec.random_phases).map(|_| BigRational::new(BigInt::from(rng.gen::<u32>()), BigInt::from(1u64 << 32))));
    let mut rows = Vec::new();
    let mut grid_rows = Vec::new();
    for k in sec.k_min..=sec.k_max.min(cf.depth()) {
        let Some(q) = q_usize(&cf, k).filter(|&q| q <= MAX_ENUMERATED_Q) else {
            s.warn(format!("q_{k} exceeds {MAX_ENUMERATED_Q}; stopped"));
            break;
        };
        let bound = BigRational::new(BigInt::from(2), BigInt::from(q));
        let uppers = s.par_map(&phases, |x| {
            let ps = rotation_orbit(x, &cf, q, 1, &tol)?;
            Ok(certified_star_discrepancy(&ps)?)
        });
        let uppers = uppers.map_err(|e| match e {
            CliError::Numeric(e) => s.orbit_hint(e),
            e => e,
        })?;
        let worst = uppers.iter().map(|e| e.upper.clone()).max().expect("at least one phase");
        let value = uppers.iter().map(|e| e.value.clone()).max().expect("at least one phase");
        rows.push(DiscrepancyRow {
            k,
            q_k: q,
            d_star: to_f64(&value),
            bound: to_f64(&bound),
            margin: to_f64(&(&bound - &worst)),
            phases: phases.len(),
            holds: worst <= bound,
        });
        s.log(format!("discrepancy::star_discrepancy(orbit q_{k}={q}, {} phases)", phases.len()));
        if sec.gordon_grids && q >= 2 {
            if q > MAX_GRID_Q {
                s.warn(format!("gordon grids skipped for q_{k}={q}"));
                continue;
            }
            let x = phases[0].clone();
            let cases: Vec<(usize, i8)> = (0..q).flat_map(|j| [(j, 1), (j, -1)]).collect();
            let grids = s.par_map(&cases, |&(j, sign)| Ok(gordon_grid(&x, &cf, k, j, &Shift::OrbitReturn { sign }, &tol)?))?;
            for ((j, sign), g) in cases.into_iter().zip(grids) {
                grid_rows.push(GridRow {
                    k,
                    q_k: q,
                    s: j,
                    sign,
                    d_star: to_f64(&g.discrepancy.value),
                    bound: to_f64(&g.bound),
                    margin: to_f64(&(&g.bound - &g.discrepancy.upper)),
                    holds: g.holds(),
                });
            }
            s.log(format!("discrepancy::gordon_grid(q_{k}={q}, all s, δ=±‖qα‖)"));
        }
    }
    out.csv("discrepancy.csv", &rows)?;
    if sec.gordon_grids {
        out.csv("gordon_grids.csv", &grid_rows)?;
    }
    Ok(exit::SUCCESS)
}

#[derive(Serialize)]
struct LevelRow {
    #[serde(rename = "B")]
    b: f64,
    var_b: f64,
    var_over_b: f64,
}

#[derive(Serialize)]
struct LogRow {
    #[serde(rename = "B")]
    b: f64,
    var_log: f64,
    band_sum: f64,
    semi_variation: f64,
    stated_bound: f64,
    summed_bound: f64,
    band_holds: bool,
    stated_holds: bool,
    summed_holds: bool,
}

#[derive(Serialize)]
struct VariationSummary {
    potential: String,
    total_variation: f64,
    total_exact: bool,
    semi_variation: f64,
    semi_maximizer: f64,
    semi_sup_upper: f64,
    semi_exact: bool,
}

fn variation(s: &mut Session, out: &mut OutputDir) -> CliResult<i32> {
    let f = s.potential()?;
    let sec = s.cfg.variation.clone();
    let tv = total_variation(&f, sec.max_refinement);
    let semi = semi_variation(&f, sec.b_max, sec.max_refinement)?;
    s.log(format!("periodic_fn::semi_variation(B_max={})", sec.b_max));
    let levels: Vec<LevelRow> = semi
        .per_level
        .iter()
        .map(|&(b, v)| LevelRow {
            b,
            var_b: v,
            var_over_b: v / b,
        })
        .collect();
    let logs = s.par_map(&sec.log_b, |&b| {
        let r = log_variation_bounds(&f, b, sec.max_refinement)?;
        Ok(LogRow {
            b,
            band_holds: r.band_inequality_holds(1e-12),
            stated_holds: r.stated_bound_holds(1e-12),
            summed_holds: r.summed_bound_holds(1e-12),
            var_log: r.var_log,
            band_sum: r.band_sum,
            semi_variation: r.semi_variation,
            stated_bound: r.stated_bound,
            summed_bound: r.summed_bound,
        })
    })?;
    s.log(format!("periodic_fn::log_variation_bounds(B in {:?})", sec.log_b));
    out.csv("variation.csv", &levels)?;
    out.csv("log_variation.csv", &logs)?;
    out.json(
        "variation.json",
        "variation",
        &VariationSummary {
            potential: s.cfg.potential.clone(),
            total_variation: tv.lower,
            total_exact: tv.exact,
            semi_variation: semi.value,
            semi_maximizer: semi.maximizer,
            semi_sup_upper: semi.sup_upper,
            semi_exact: semi.exact,
        },
    )?;
    Ok(exit::SUCCESS)
}

#[derive(Serialize)]
struct LyapunovRow {
    #[serde(rename = "E")]
    e: f64,
    n: usize,
    phases: usize,
    #[serde(rename = "L_hat")]
    l_hat: f64,
    margin_chain: String,
}

fn lyapunov_cmd(s: &mut Session, out: &mut OutputDir) -> CliResult<i32> {
    let cf = s.frequency()?;
    let f = s.potential()?;
    let x = s.first_phase()?;
    let energies = s.energies(&f, &x, &cf)?;
    let sec = s.cfg.lyapunov.clone();
    let tol = tolerance(sec.tolerance_digits);
    let phases = PointSet::centered_grid(sec.phase_count);
    let rows = s.par_map(&energies, |&e| {
        let est = lyapunov(&schrodinger(&f, e), sec.n, &phases, &cf, &tol)?;
        Ok(LyapunovRow {
            e,
            n: est.n_used,
            phases: est.phase_count,
            l_hat: est.value,
            margin_chain: est.monotone_chain.iter().map(|(n, v)| format!("{n}:{v}")).collect::<Vec<_>>().join(";"),
        })
    })?;
    s.log(format!("cocycle::lyapunov(n={}, {} phases, {} energies)", sec.n, sec.phase_count, energies.len()));
    out.csv("lyapunov.csv", &rows)?;
    Ok(exit::SUCCESS)
}

#[derive(Serialize)]
struct ChainRow {
    #[serde(rename = "E")]
    e: f64,
    n: usize,
    max_value: f64,
    mean_value: f64,
    margin: f64,
}

#[derive(Serialize)]
struct ProfileRow {
    #[serde(rename = "E")]
    e: f64,
    x: f64,
    value: f64,
}

#[derive(Serialize)]
struct UniformRun {
    energy: f64,
    report: UniformBoundReport,
}

fn uniform_bound(s: &mut Session, out: &mut OutputDir) -> CliResult<i32> {
    let cf = s.frequency()?;
    let f = s.potential()?;
    let x = s.first_phase()?;
    let energies = s.energies(&f, &x, &cf)?;
    let sec = s.cfg.uniform_bound.clone();
    let mut ucfg = UniformBoundConfig::new(s.cfg.epsilon, sec.n_max);
    ucfg.tol = tolerance(sec.tolerance_digits);
    let grid = phase_grid(sec.phase_count, &BigRational::zero());
    let fact = factorize(&f);
    let runs = s.par_map(&energies, |&e| {
        let m = if sec.factorize { fact.g(e) } else { schrodinger(&f, e) };
        Ok(UniformRun {
            energy: e,
            report: uniform_upper_margin(&m, &cf, &ucfg, &grid)?,
        })
    })?;
    s.log(format!(
        "cocycle::uniform_upper_margin({}, ε={}, n_max={}, {} phases)",
        if sec.factorize { "factorized G" } else { "S^(f,E)" },
        s.cfg.epsilon,
        sec.n_max,
        sec.phase_count
    ));
    let chain: Vec<ChainRow> = runs
        .iter()
        .flat_map(|r| {
            r.report.chain.iter().map(|p| ChainRow {
                e: r.energy,
                n: p.n,
                max_value: p.max_value,
                mean_value: p.mean_value,
                margin: p.margin,
            })
        })
        .collect();
    let profile: Vec<ProfileRow> = runs
        .iter()
        .flat_map(|r| r.report.profile.iter().map(|&(x, value)| ProfileRow { e: r.energy, x, value }))
        .collect();
    out.csv("uniform_bound_chain.csv", &chain)?;
    out.csv("uniform_bound_profile.csv", &profile)?;
    out.json("uniform_bound.json", "uniform_bound", &runs)?;
    Ok(exit::SUCCESS)
}

#[derive(Serialize)]
struct GordonRun {
    phase: String,
    report: GordonReport,
}

#[derive(Serialize)]
struct GordonDocument {
    frequency: String,
    potential: String,
    epsilon: f64,
    precision_bits: usize,
    runs: Vec<GordonRun>,
}

#[derive(Serialize)]
struct GordonRow {
    phase: String,
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "L_hat")]
    l_hat: f64,
    k: usize,
    q: usize,
    beta_hat: f64,
    log_defect: f64,
    log_defect_threshold: f64,
    lambda_hat: f64,
    lambda_threshold: f64,
    log_gap1: f64,
    log_gap2_ratio: f64,
    log_gap_threshold: f64,
    witness_min: f64,
    repetition_ok: bool,
    telescopic_ok: bool,
    hypothesis_ok: bool,
    gap_ok: bool,
    witness_ok: bool,
    at_scale: bool,
    chain_consistent: bool,
    verdict: String,
}

/// 2 if any run failed a hypothesis, else 3 if any was inconclusive.
pub fn verdict_exit_code<'a>(verdicts: impl IntoIterator<Item = &'a Verdict>) -> i32 {
    let mut code = exit::SUCCESS;
    for v in verdicts {
        match v {
            Verdict::HypothesisFailed(_) => return exit::HYPOTHESIS_FAILED,
            Verdict::Inconclusive(_) => code = exit::INCONCLUSIVE,
            Verdict::CriterionSatisfied { .. } => {}
        }
    }
    code
}

fn gordon_check(s: &mut Session, out: &mut OutputDir) -> CliResult<i32> {
    let cf = s.frequency()?;
    let f = s.potential()?;
    let phases = s.phases()?;
    let energies = s.energies(&f, &phases[0].1, &cf)?;
    let sec = s.cfg.gordon.clone();
    let gcfg = GordonConfig {
        k_list: sec.k_list.clone(),
        epsilon: s.cfg.epsilon,
        beta_hat: sec.beta_hat,
        l_hat: sec.l_hat,
        directions: sec.directions,
        bits: s.bits,
        tol: tolerance(sec.tolerance_digits),
        lyapunov_n: sec.lyapunov_n,
        lyapunov_phases: sec.lyapunov_phases,
    };
    let cases: Vec<(String, BigRational, f64)> = phases
        .iter()
        .flat_map(|(label, x)| energies.iter().map(move |&e| (label.clone(), x.clone(), e)))
        .collect();
    let reports = s.par_map(&cases, |(_, x, e)| Ok(verdict::<Mp>(&f, x, &cf, *e, &gcfg)?))?;
    s.log(format!(
        "gordon::verdict(k_list={:?}, ε={}, {} bits, {} directions) at {} (phase, E) pairs",
        sec.k_list,
        s.cfg.epsilon,
        s.bits,
        sec.directions,
        cases.len()
    ));
    let runs: Vec<GordonRun> = cases.iter().zip(reports).map(|((p, _, _), report)| GordonRun { phase: p.clone(), report }).collect();
    let rows: Vec<GordonRow> = runs
        .iter()
        .flat_map(|run| {
            let r = &run.report;
            r.records.iter().map(move |q| GordonRow {
                phase: run.phase.clone(),
                e: r.energy,
                l_hat: r.l_hat,
                k: q.k,
                q: q.q,
                beta_hat: q.beta_hat,
                log_defect: q.defect.log_max(),
                log_defect_threshold: q.log_defect_threshold,
                lambda_hat: q.lambda_hat,
                lambda_threshold: q.lambda_threshold,
                log_gap1: q.gap.log_gap1,
                log_gap2_ratio: q.gap.log_gap2_ratio,
                log_gap_threshold: q.gap.log_threshold,
                witness_min: q.witness.minimum,
                repetition_ok: q.repetition_ok,
                telescopic_ok: q.telescopic_ok,
                hypothesis_ok: q.hypothesis_ok,
                gap_ok: q.gap_ok,
                witness_ok: q.witness_ok,
                at_scale: q.at_scale,
                chain_consistent: q.chain_consistent,
                verdict: r.verdict.to_string(),
            })
        })
        .collect();
    let code = verdict_exit_code(runs.iter().map(|r| &r.report.verdict));
    out.json(
        "gordon_report.json",
        "gordon_report",
        &GordonDocument {
            frequency: s.cfg.frequency.clone(),
            potential: s.cfg.potential.clone(),
            epsilon: s.cfg.epsilon,
            precision_bits: s.bits,
            runs,
        },
    )?;
    out.csv("gordon_summary.csv", &rows)?;
    Ok(code)
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    #[serde(rename = "E")]
    e: f64,
    residual: f64,
    decay_rate: Option<f64>,
}

fn spectrum(s: &mut Session, out: &mut OutputDir) -> CliResult<i32> {
    let cf = s.frequency()?;
    let f = s.potential()?;
    let x = s.first_phase()?;
    let sec = s.cfg.spectrum.clone();
    let op = build_box(&f, &x, &cf, sec.half_width, &tolerance(sec.tolerance_digits))?;
    let ev = all_eigenvalues(&op, sec.eigen_tol);
    s.log(format!("spectrum::build_box(N={}) and eigenvalues: {} found", sec.half_width, ev.len()));
    let groups = clusters(&op, &ev);
    let pairs = s.par_map(&groups, |r| Ok(cluster_eigenpairs(&op, &ev[r.clone()], sec.eigen_tol)?))?;
    s.log(format!("spectrum::eigenvector by inverse iteration over {} clusters", groups.len()));
    let mut rows = Vec::with_capacity(ev.len());
    for (index, p) in pairs.into_iter().flatten().enumerate() {
        if let Some(w) = p.warning {
            s.warn(format!("eigenvalue {index}: {w}"));
        }
        rows.push(EigenRow {
            index,
            e: ev[index],
            residual: p.residual,
            decay_rate: p.decay.map(|d| d.rate),
        });
    }
    out.csv("eigenvalues.csv", &rows)?;
    Ok(exit::SUCCESS)
}

#[derive(Serialize)]
struct RegimeRowOut {
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "L_hat")]
    l_hat: f64,
    beta_hat: f64,
    label: &'static str,
    eigenvalue_distance: f64,
}

fn regime(s: &mut Session, out: &mut OutputDir) -> CliResult<i32> {
    let cf = s.frequency()?;
    let f = s.potential()?;
    let x = s.first_phase()?;
    let energies = s.energies(&f, &x, &cf)?;
    let sec = s.cfg.spectrum.clone();
    let beta_hat = match s.cfg.gordon.beta_hat {
        Some(b) => b,
        None => cf.beta_estimate(sec.beta_k_min)?.beta_hat,
    };
    s.log(format!("contfrac::beta_estimate(k_min={}) = {beta_hat}", sec.beta_k_min));
    let rcfg = RegimeScanConfig {
        half_width: sec.half_width,
        n_lyap: sec.lyapunov_n,
        beta_hat,
        l_zero: sec.l_zero,
        tol: tolerance(sec.tolerance_digits),
    };
    let phases = PointSet::centered_grid(sec.phase_count);
    let rows = s.par_map(&energies, |&e| {
        let r = regime_scan(&f, &x, &cf, &[e], &phases, &rcfg)?.remove(0);
        Ok(RegimeRowOut {
            e,
            l_hat: r.l_hat,
            beta_hat: r.beta_hat,
            label: r.regime.label(),
            eigenvalue_distance: r.eigenvalue_distance,
        })
    })?;
    s.log(format!("spectrum::regime_scan(N={}, n_lyap={}, {} energies)", sec.half_width, sec.lyapunov_n, energies.len()));
    let gordon = rows.iter().filter(|r| r.label == "GORDON").count();
    if gordon > 0 {
        s.log(format!("{gordon} energies in the GORDON regime; run gordon-check at those energies"));
    }
    out.csv("regime_scan.csv", &rows)?;
    Ok(exit::SUCCESS)
}
