//! Command-line front end for the return-map laboratory: orbits, Jacobians,
//! horseshoe certification, periodic orbits, Lyapunov spectra, attractor
//! sweeps, tangency scans, and the Denjoy wandering-domain pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use bifocus_core::denjoy::{
    build_gb, denjoy_surgery, verify_wandering, DenjoyCircleMap, DenjoyConfig, LengthLaw,
    WanderingDomainSpec, GOLDEN_OMEGA,
};
use bifocus_core::error::LabError;
use bifocus_core::horseshoe::{
    contraction_rates, find_periodic_orbit, hyperbolicity_check, intersection_components,
    lyapunov_spectrum, lyapunov_spectrum_periodic, min_index_tec2, slab_radii,
    HorseshoeCertificate, Itinerary, OrbitCertificate, SlabConfig,
};
use bifocus_core::return_map::{
    orbit, return_map_jacobian, write_orbit_csv, GlobalMapModel, JacobianMode,
};
use bifocus_core::tangency::{
    classify_attractor, henon_limit_map, tangency_scan, write_sweep_csv, HenonParams,
    NormalFormParams, SweepRow,
};
use bifocus_core::{BifocusParams, RectPoint};

#[derive(Parser)]
#[command(
    name = "bifocus-lab",
    about = "Numerical laboratory for return-map dynamics near a bifocus homoclinic cycle",
    version
)]
struct Cli {
    /// JSON config file; flags override individual fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Deterministic seed for sweep-cell jitter
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker-pool size (defaults to the core count)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Output format where applicable
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate the explicit return map and export the trace
    Orbit {
        /// number of CSV rows to emit (initial point included)
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// initial point as "X,Y,Z"
        #[arg(long, default_value = "1e-3,0,0")]
        x0: String,
    },
    /// Evaluate the return-map Jacobian, determinant, and eigenvalues
    Jacobian {
        #[arg(long, default_value = "1e-3,0,0")]
        x0: String,
        /// use finite differences instead of the closed form
        #[arg(long)]
        fd: bool,
    },
    /// Produce the horseshoe certificate (slabs, intersections, rates, orbits)
    HorseshoeVerify {
        #[arg(long, default_value_t = 3)]
        i: i64,
        #[arg(long, default_value_t = 3)]
        j: i64,
        /// grid resolution per axis (doubled internally for stability)
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Locate a periodic orbit by itinerary, e.g. --word 3:1,4:2
    Periodic {
        #[arg(long)]
        word: String,
    },
    /// Lyapunov spectrum along an orbit or a periodic itinerary
    Lyapunov {
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        word: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 1_000)]
        discard: usize,
    },
    /// Classify attractors over the configured Henon parameter grid
    Sweep {},
    /// Scan the saddle value for manifold crossing-count changes
    TangencyScan {
        #[arg(long, default_value_t = 1.5)]
        delta_lo: f64,
        #[arg(long, default_value_t = 2.5)]
        delta_hi: f64,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long, default_value = "3:1")]
        word_n: String,
        #[arg(long, default_value = "3:1")]
        word_m: String,
    },
    /// Run the Denjoy surgery and export the circle-map summary
    DenjoyBuild {},
    /// Verify the wandering-domain certificate
    DenjoyVerify {
        /// override the normal contraction rate (gamma)
        #[arg(long)]
        gamma: Option<f64>,
        /// override the rotation number
        #[arg(long)]
        omega: Option<f64>,
        /// skip the surgery and use the rigid rotation (negative control)
        #[arg(long)]
        rigid: bool,
    },
    /// List (or regenerate) the shipped presets
    Presets {
        #[arg(long, default_value = "presets")]
        dir: PathBuf,
        /// write the canonical preset files into the directory
        #[arg(long)]
        write_defaults: bool,
    },
}

// ---------------------------------------------------------------------------
// config file

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
struct LabConfig {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    params: Option<BifocusParams>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    model: Option<GlobalMapModel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    slabs: Option<SlabConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    denjoy: Option<DenjoySection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    normal_form: Option<NormalFormParams>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    wandering: Option<WanderingDomainSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    verify: Option<VerifySection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DenjoySection {
    #[serde(flatten)]
    cfg: DenjoyConfig,
    #[serde(default)]
    rigid: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct VerifySection {
    #[serde(default = "default_n_iter")]
    n_iter: usize,
    #[serde(default = "default_period_bound")]
    period_bound: usize,
    #[serde(default = "default_margin")]
    margin: f64,
}

fn default_n_iter() -> usize {
    10_000
}
fn default_period_bound() -> usize {
    50
}
fn default_margin() -> f64 {
    1e-6
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            n_iter: default_n_iter(),
            period_bound: default_period_bound(),
            margin: default_margin(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepSection {
    a_min: f64,
    a_max: f64,
    b_min: f64,
    b_max: f64,
    na: usize,
    nb: usize,
    x0: [f64; 3],
    n_steps: usize,
    #[serde(default = "default_jitter")]
    jitter: f64,
}

fn default_jitter() -> f64 {
    1e-6
}

// ---------------------------------------------------------------------------
// error plumbing

enum CliError {
    /// usage or config problem -> exit 2
    Config(String),
    /// module/verification failure -> exit 1 with a JSON error record
    Module(LabError),
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(msg) => CliError::Config(msg),
            other => CliError::Module(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_config(path: &Option<PathBuf>) -> CliResult<LabConfig> {
    match path {
        None => Ok(LabConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", p.display())))
        }
    }
}

fn default_params() -> BifocusParams {
    BifocusParams::new(2.0, 1.0, 1.0, 1.0, 0.0).expect("default parameters are valid")
}

fn parse_point(text: &str) -> CliResult<RectPoint> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("cannot parse point '{text}': {e}")))?;
    if parts.len() != 3 {
        return Err(CliError::Config(format!("point '{text}' must have 3 components")));
    }
    Ok(RectPoint::new(parts[0], parts[1], parts[2]))
}

fn parse_word(text: &str) -> CliResult<Itinerary> {
    let mut word = Vec::new();
    for item in text.split(',') {
        let (n, k) = item
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("word item '{item}' must be N:branch")))?;
        let n: i64 = n
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("bad slab index '{n}': {e}")))?;
        let k: u8 = k
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("bad branch '{k}': {e}")))?;
        word.push((n, k));
    }
    Ok(Itinerary::periodic(word)?)
}

fn write_output(dir: &Path, name: &str, content: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, content)?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

/// splitmix64: deterministic per-cell jitter independent of scheduling
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn unit_jitter(seed: u64, index: u64, lane: u64) -> f64 {
    let mut state = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15) ^ lane.wrapping_mul(0xff51afd7ed558ccd);
    let bits = splitmix64(&mut state);
    (bits >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

// ---------------------------------------------------------------------------
// commands

fn cmd_orbit(cli: &Cli, steps: usize, x0: &str) -> CliResult<()> {
    if steps == 0 {
        return Err(CliError::Config("--steps must be positive".into()));
    }
    let cfg = load_config(&cli.config)?;
    let params = cfg.params.unwrap_or_else(default_params);
    let model = cfg.model.unwrap_or_default();
    let p0 = parse_point(x0)?;
    let rows = orbit(&p0, &params, &model, steps - 1)?;
    match cli.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_orbit_csv(&rows, &mut buf)?;
            let path = write_output(&cli.out, "orbit.csv", &String::from_utf8_lossy(&buf))?;
            println!("{}", path.display());
        }
        Format::Json => {
            let path = write_output(&cli.out, "orbit.json", &to_json(&rows))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn cmd_jacobian(cli: &Cli, x0: &str, fd: bool) -> CliResult<()> {
    let cfg = load_config(&cli.config)?;
    let params = cfg.params.unwrap_or_else(default_params);
    let model = cfg.model.unwrap_or_default();
    let p = parse_point(x0)?;
    let mode = if fd { JacobianMode::FiniteDifference } else { JacobianMode::Analytic };
    let eval = return_map_jacobian(&p, &params, &model, mode, None)?;
    let text = to_json(&eval);
    let path = write_output(&cli.out, "jacobian.json", &text)?;
    print!("{text}");
    log::info!("jacobian written to {}", path.display());
    Ok(())
}

fn cmd_horseshoe_verify(
    cli: &Cli,
    i: i64,
    j: i64,
    resolution: usize,
    depth: usize,
) -> CliResult<()> {
    let cfg = load_config(&cli.config)?;
    let params = cfg.params.unwrap_or_else(default_params);
    let model = cfg.model.unwrap_or_default();
    let slabs_cfg = cfg.slabs.unwrap_or_default();
    let n0 = min_index_tec2(&params, &slabs_cfg)?;
    log::info!("minimal index N0 = {n0}");
    let slabs: Vec<_> = ((n0 + 1)..=(n0 + 4))
        .map(|n| slab_radii(n, &params, &slabs_cfg))
        .collect::<Result<_, _>>()?;
    let intersections =
        vec![intersection_components(i, j, &params, &model, &slabs_cfg, resolution)?];
    let (nu_h, nu_v) = contraction_rates(i, j, &params, &model, &slabs_cfg, depth)?;
    let mut words = vec![vec![(i, 1)], vec![(i, 2)]];
    if i != j {
        words.push(vec![(i, 1), (j, 1)]);
    }
    let mut orbits = Vec::new();
    let mut all_points = Vec::new();
    for w in words {
        let itin = Itinerary::periodic(w)?;
        let po = find_periodic_orbit(&itin, &params, &model, &slabs_cfg)?;
        let lyap = lyapunov_spectrum_periodic(&po, &params, &model, 10_000, 1_000)?;
        all_points.extend(po.points.iter().copied());
        orbits.push(OrbitCertificate {
            word: po.word.clone(),
            points: po.points.clone(),
            residual: po.residual,
            lyapunov: lyap,
            spectrum_moduli: [
                po.spectrum[0].norm(),
                po.spectrum[1].norm(),
                po.spectrum[2].norm(),
            ],
        });
    }
    let report = hyperbolicity_check(&all_points, &params, &model)?;
    if !report.cones_ok {
        return Err(CliError::Module(LabError::ContractionFailed(
            "hyperbolic eigenvalue pattern violated on the periodic skeleton".into(),
        )));
    }
    let cert = HorseshoeCertificate {
        params,
        cfg: slabs_cfg,
        n0,
        slabs,
        intersections,
        nu_h,
        nu_v,
        orbits,
    };
    let text = to_json(&cert);
    let path = write_output(&cli.out, "certificate.json", &text)?;
    print!("{text}");
    log::info!("certificate written to {}", path.display());
    Ok(())
}

fn cmd_periodic(cli: &Cli, word: &str) -> CliResult<()> {
    let cfg = load_config(&cli.config)?;
    let params = cfg.params.unwrap_or_else(default_params);
    let model = cfg.model.unwrap_or_default();
    let slabs_cfg = cfg.slabs.unwrap_or_default();
    let itin = parse_word(word)?;
    let po = find_periodic_orbit(&itin, &params, &model, &slabs_cfg)?;
    let text = to_json(&po);
    let path = write_output(&cli.out, "periodic.json", &text)?;
    print!("{text}");
    log::info!("periodic orbit written to {}", path.display());
    Ok(())
}

fn cmd_lyapunov(
    cli: &Cli,
    x0: &Option<String>,
    word: &Option<String>,
    steps: usize,
    discard: usize,
) -> CliResult<()> {
    let cfg = load_config(&cli.config)?;
    let params = cfg.params.unwrap_or_else(default_params);
    let model = cfg.model.unwrap_or_default();
    let exponents = match (x0, word) {
        (Some(x0), None) => {
            let p = parse_point(x0)?;
            lyapunov_spectrum(&p, &params, &model, steps, discard)?
        }
        (None, Some(w)) => {
            let slabs_cfg = cfg.slabs.unwrap_or_default();
            let itin = parse_word(w)?;
            let po = find_periodic_orbit(&itin, &params, &model, &slabs_cfg)?;
            lyapunov_spectrum_periodic(&po, &params, &model, steps, discard)?
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of --x0 or --word is required".into(),
            ))
        }
    };
    #[derive(Serialize)]
    struct LyapOut {
        exponents: [f64; 3],
        steps: usize,
        discard: usize,
    }
    let text = to_json(&LyapOut { exponents, steps, discard });
    let path = write_output(&cli.out, "lyapunov.json", &text)?;
    print!("{text}");
    log::info!("lyapunov spectrum written to {}", path.display());
    Ok(())
}

fn cmd_sweep(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(&cli.config)?;
    let sweep = cfg.sweep.ok_or_else(|| {
        CliError::Config("sweep requires a config with a 'sweep' section".into())
    })?;
    if sweep.na == 0 || sweep.nb == 0 {
        return Err(CliError::Config("sweep grid must be nonempty".into()));
    }
    if sweep.n_steps < 10_000 {
        return Err(CliError::Config("sweep n_steps must be >= 10000".into()));
    }
    let cells: Vec<(usize, usize)> = (0..sweep.na)
        .flat_map(|ia| (0..sweep.nb).map(move |ib| (ia, ib)))
        .collect();
    let seed = cli.seed;
    use rayon::prelude::*;
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(ia, ib)| {
            let fa = if sweep.na > 1 { ia as f64 / (sweep.na - 1) as f64 } else { 0.0 };
            let fb = if sweep.nb > 1 { ib as f64 / (sweep.nb - 1) as f64 } else { 0.0 };
            let a = sweep.a_min + (sweep.a_max - sweep.a_min) * fa;
            let b = sweep.b_min + (sweep.b_max - sweep.b_min) * fb;
            let idx = (ia * sweep.nb + ib) as u64;
            let x0 = [
                sweep.x0[0] + sweep.jitter * unit_jitter(seed, idx, 0),
                sweep.x0[1] + sweep.jitter * unit_jitter(seed, idx, 1),
                sweep.x0[2] + sweep.jitter * unit_jitter(seed, idx, 2),
            ];
            let hp = HenonParams { a_tilde: a, b_tilde: b };
            let f = move |p: [f64; 3]| henon_limit_map(p, &hp);
            let class = classify_attractor(&f, x0, sweep.n_steps)
                .expect("n_steps validated by config");
            SweepRow {
                params: vec![a, b],
                class: class.kind,
                lyapunov: class.lyapunov,
                evidence_residual: class.evidence.circle_residual,
            }
        })
        .collect();
    match cli.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &["a", "b"], &rows)?;
            let path = write_output(&cli.out, "sweep.csv", &String::from_utf8_lossy(&buf))?;
            println!("{}", path.display());
        }
        Format::Json => {
            let path = write_output(&cli.out, "sweep.json", &to_json(&rows))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn cmd_tangency_scan(
    cli: &Cli,
    delta_lo: f64,
    delta_hi: f64,
    resolution: usize,
    word_n: &str,
    word_m: &str,
) -> CliResult<()> {
    let cfg = load_config(&cli.config)?;
    let params = cfg.params.unwrap_or_else(default_params);
    let model = cfg.model.unwrap_or_default();
    let slabs_cfg = cfg.slabs.unwrap_or_default();
    let wn = parse_word(word_n)?;
    let wm = parse_word(word_m)?;
    let events = tangency_scan(
        (delta_lo, delta_hi),
        &params,
        &model,
        &slabs_cfg,
        &wn,
        &wm,
        resolution,
    )?;
    let text = to_json(&events);
    let path = write_output(&cli.out, "tangency.json", &text)?;
    print!("{text}");
    log::info!("tangency events written to {}", path.display());
    Ok(())
}

fn denjoy_pieces(
    cfg: &LabConfig,
    gamma: Option<f64>,
    omega: Option<f64>,
    rigid: bool,
) -> CliResult<(DenjoyCircleMap, NormalFormParams, WanderingDomainSpec)> {
    let section = cfg.denjoy.clone().unwrap_or(DenjoySection {
        cfg: DenjoyConfig {
            omega: GOLDEN_OMEGA,
            theta0: 0.3,
            length_budget: 0.5,
            length_law: LengthLaw::Basel,
            n_intervals: 12_000,
        },
        rigid: false,
    });
    let mut dj = section.cfg;
    if let Some(w) = omega {
        dj.omega = w;
    }
    let circle = if rigid || section.rigid {
        DenjoyCircleMap::rigid(dj.omega)
    } else {
        denjoy_surgery(&dj)?
    };
    let nf_raw = cfg
        .normal_form
        .unwrap_or(NormalFormParams { mu: 0.04, a_mu: 1.0, beta_mu: 0.0, gamma: 0.5, hot_enabled: false });
    let nf = NormalFormParams::new(nf_raw.mu, nf_raw.a_mu, nf_raw.beta_mu, nf_raw.gamma, nf_raw.hot_enabled)?;
    let mut wspec = cfg
        .wandering
        .map(|w| WanderingDomainSpec::new(w.tube_radius, w.normal_rate))
        .transpose()?
        .unwrap_or(WanderingDomainSpec::new(0.05, 0.5)?);
    if let Some(g) = gamma {
        wspec = WanderingDomainSpec::new(wspec.tube_radius, g)?;
    }
    Ok((circle, nf, wspec))
}

fn cmd_denjoy_build(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(&cli.config)?;
    let (circle, _, _) = denjoy_pieces(&cfg, None, None, false)?;
    #[derive(Serialize)]
    struct BuildOut {
        omega: f64,
        total_len: f64,
        n_intervals: usize,
        rotation_number_estimate: f64,
        base_interval: (f64, f64),
    }
    let out = BuildOut {
        omega: circle.omega,
        total_len: circle.total_len,
        n_intervals: circle.n_intervals(),
        rotation_number_estimate: circle.rotation_number(100_000),
        base_interval: circle.interval_span(0),
    };
    let text = to_json(&out);
    let path = write_output(&cli.out, "denjoy.json", &text)?;
    print!("{text}");
    log::info!("denjoy summary written to {}", path.display());
    Ok(())
}

fn cmd_denjoy_verify(
    cli: &Cli,
    gamma: Option<f64>,
    omega: Option<f64>,
    rigid: bool,
) -> CliResult<()> {
    let cfg = load_config(&cli.config)?;
    let verify = cfg.verify.unwrap_or_default();
    let (circle, nf, wspec) = denjoy_pieces(&cfg, gamma, omega, rigid)?;
    let gb = build_gb(circle, nf, wspec)?;
    let report = verify_wandering(&gb, verify.n_iter, verify.period_bound, verify.margin)?;
    let ok = report.checks.disjoint
        && report.checks.contraction
        && report.checks.periodicity_free
        && report.checks.cantor;
    let text = to_json(&report);
    let path = write_output(&cli.out, "wandering.json", &text)?;
    print!("{text}");
    log::info!("wandering report written to {}", path.display());
    if !ok {
        return Err(CliError::Module(LabError::ContractionFailed(
            "wandering certificate checks failed".into(),
        )));
    }
    Ok(())
}

fn preset_delta2() -> LabConfig {
    LabConfig {
        params: Some(default_params()),
        slabs: Some(SlabConfig::default()),
        ..LabConfig::default()
    }
}

fn preset_near_resonant() -> LabConfig {
    LabConfig {
        params: Some(BifocusParams::new(1.01, 1.0, 1.0, 1.0, 0.0).expect("valid")),
        slabs: Some(SlabConfig::default()),
        ..LabConfig::default()
    }
}

fn preset_golden() -> LabConfig {
    LabConfig {
        denjoy: Some(DenjoySection {
            cfg: DenjoyConfig {
                omega: GOLDEN_OMEGA,
                theta0: 0.3,
                length_budget: 0.5,
                length_law: LengthLaw::Basel,
                n_intervals: 12_000,
            },
            rigid: false,
        }),
        normal_form: Some(NormalFormParams {
            mu: 0.04,
            a_mu: 1.0,
            beta_mu: 0.0,
            gamma: 0.5,
            hot_enabled: false,
        }),
        wandering: Some(WanderingDomainSpec {
            base_interval: 0,
            tube_radius: 0.05,
            normal_rate: 0.5,
        }),
        verify: Some(VerifySection::default()),
        ..LabConfig::default()
    }
}

fn preset_henon_sweep() -> LabConfig {
    LabConfig {
        sweep: Some(SweepSection {
            a_min: -1.5,
            a_max: -0.6,
            b_min: -0.3,
            b_max: 0.6,
            na: 10,
            nb: 10,
            x0: [0.0, 0.0, 0.0],
            n_steps: 20_000,
            jitter: default_jitter(),
        }),
        ..LabConfig::default()
    }
}

const PRESETS: &[(&str, fn() -> LabConfig)] = &[
    ("delta2.json", preset_delta2),
    ("near-resonant.json", preset_near_resonant),
    ("golden.json", preset_golden),
    ("henon-sweep.json", preset_henon_sweep),
];

fn cmd_presets(dir: &Path, write_defaults: bool) -> CliResult<()> {
    if write_defaults {
        fs::create_dir_all(dir)?;
        for (name, make) in PRESETS {
            let path = dir.join(name);
            fs::write(&path, to_json(&make()))?;
            println!("wrote {}", path.display());
        }
        return Ok(());
    }
    let mut count = 0;
    for (name, make) in PRESETS {
        let path = dir.join(name);
        let status = if path.exists() {
            let text = fs::read_to_string(&path)?;
            match serde_json::from_str::<LabConfig>(&text) {
                Ok(parsed) => {
                    if to_json(&parsed) == to_json(&make()) {
                        "ok"
                    } else {
                        "modified"
                    }
                }
                Err(_) => "invalid",
            }
        } else {
            "missing"
        };
        println!("{name}: {status}");
        count += 1;
    }
    println!("{count} presets");
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Orbit { steps, x0 } => cmd_orbit(cli, *steps, x0),
        Command::Jacobian { x0, fd } => cmd_jacobian(cli, x0, *fd),
        Command::HorseshoeVerify { i, j, resolution, depth } => {
            cmd_horseshoe_verify(cli, *i, *j, *resolution, *depth)
        }
        Command::Periodic { word } => cmd_periodic(cli, word),
        Command::Lyapunov { x0, word, steps, discard } => {
            cmd_lyapunov(cli, x0, word, *steps, *discard)
        }
        Command::Sweep {} => cmd_sweep(cli),
        Command::TangencyScan { delta_lo, delta_hi, resolution, word_n, word_m } => {
            cmd_tangency_scan(cli, *delta_lo, *delta_hi, *resolution, word_n, word_m)
        }
        Command::DenjoyBuild {} => cmd_denjoy_build(cli),
        Command::DenjoyVerify { gamma, omega, rigid } => {
            cmd_denjoy_verify(cli, *gamma, *omega, *rigid)
        }
        Command::Presets { dir, write_defaults } => cmd_presets(dir, *write_defaults),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LAB_LOG", "error")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Module(err)) => {
            #[derive(Serialize)]
            struct ErrorRecord {
                error: String,
            }
            println!("{}", to_json(&ErrorRecord { error: err.to_string() }).trim_end());
            ExitCode::from(1)
        }
    }
}
