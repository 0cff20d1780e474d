use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use bcs_edge_core::bs_operator::{assemble, spectral_gap, top_eigenpair, BoundaryCondition};
use bcs_edge_core::critical_temperature::{
    ratio_curve, tc_boundary_from_bulk, tc_bulk, TcConfig,
};
use bcs_edge_core::kernels::ModelParams;
use bcs_edge_core::lemma_suite::{CheckReport, LemmaSuite};
use bcs_edge_core::quadrature::{build_grid_with, GridPolicy};
use bcs_edge_core::variational::{
    find_t0, int_f_residual, low_temperature_int_f, scaled_sup, trial_terms, TrialConfig,
};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ConfigFile};
use crate::manifest::{manifest_path, parse_manifest, RowProvenance, RunManifest};
use crate::output::{Cell, Table};
use crate::{Bc, Command, Common, Format, EXIT_NUMERIC, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, THREADS_ENV};

/// Operator-norm ceiling for `B_{T,1}`, which saturates near 5.65 as `T → 0`.
/// Scaled by `μ^{-1/2}` for other chemical potentials.
pub const B_NORM_CEILING: f64 = 6.0;

const DEFAULT_SEED: u64 = 1;
const DEFAULT_SAMPLES: usize = 100_000;

const KNOWN_KEYS: &[&str] = &[
    "mu", "tol", "grid-tol", "grid-points", "cutoff-factor", "threads", "out", "seed", "format",
    "v", "bc", "v-min", "v-max", "v-count", "t", "b", "find-t0", "samples",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<bcs_edge_core::Error> for CliError {
    fn from(e: bcs_edge_core::Error) -> Self {
        match e {
            bcs_edge_core::Error::InvalidParams(m) => CliError::Usage(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Resolved settings: flags, then config file, then defaults. Every
/// resolved value is also recorded as a canonical flag so that the run
/// can be replayed without the config file.
struct Settings {
    file: ConfigFile,
    args: Vec<String>,
    snapshot: BTreeMap<String, String>,
    mu: Option<f64>,
    tol: f64,
    grid_tol: f64,
    grid_points: usize,
    cutoff_factor: f64,
    threads: Option<usize>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    format: Format,
}

fn float_arg(x: f64) -> String {
    crate::output::format_float(x)
}

impl Settings {
    fn resolve(command: &str, common: &Common) -> Result<Self> {
        let file = match &common.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        if let Some(bad) = file.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(CliError::Usage(format!("unknown config key `{bad}`")));
        }
        let defaults = GridPolicy::default();
        let mut s = Settings {
            args: vec![command.to_string()],
            snapshot: BTreeMap::new(),
            mu: common.mu.or(file.parsed("mu")?),
            tol: common.tol.or(file.parsed("tol")?).unwrap_or(1e-6),
            grid_tol: common.grid_tol.or(file.parsed("grid-tol")?).unwrap_or(defaults.tol),
            grid_points: common
                .grid_points
                .or(file.parsed("grid-points")?)
                .unwrap_or(defaults.points_per_panel),
            cutoff_factor: common
                .cutoff_factor
                .or(file.parsed("cutoff-factor")?)
                .unwrap_or(defaults.cutoff_factor),
            threads: common.threads.or(file.parsed("threads")?),
            out: common.out.clone().or(file.parsed("out")?),
            seed: common.seed.or(file.parsed("seed")?),
            format: match common.format {
                Some(f) => f,
                None => file
                    .get("format")
                    .map(|v| Format::from_str(v).map_err(CliError::Usage))
                    .transpose()?
                    .unwrap_or(Format::Csv),
            },
            file,
        };
        for (name, x) in [("tol", s.tol), ("grid-tol", s.grid_tol), ("cutoff-factor", s.cutoff_factor)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(CliError::Usage(format!("--{name} must be positive")));
            }
        }
        if s.grid_points == 0 {
            return Err(CliError::Usage("--grid-points must be positive".into()));
        }
        if let Some(mu) = s.mu {
            if !mu.is_finite() {
                return Err(CliError::Usage("--mu must be finite".into()));
            }
            s.record("mu", float_arg(mu));
        }
        s.record("tol", float_arg(s.tol));
        s.record("grid-tol", float_arg(s.grid_tol));
        s.record("grid-points", s.grid_points.to_string());
        s.record("cutoff-factor", float_arg(s.cutoff_factor));
        s.record("format", s.format.as_str().to_string());
        if let Some(t) = s.threads {
            s.record("threads", t.to_string());
        }
        if let Some(out) = s.out.clone() {
            s.record("out", out.display().to_string());
        }
        Ok(s)
    }

    fn record(&mut self, key: &str, value: String) {
        self.args.push(format!("--{key}"));
        self.args.push(value.clone());
        self.snapshot
            .entry(key.to_string())
            .and_modify(|v| {
                v.push(',');
                v.push_str(&value);
            })
            .or_insert(value);
    }

    fn record_flag(&mut self, key: &str) {
        self.args.push(format!("--{key}"));
        self.snapshot.insert(key.to_string(), "true".into());
    }

    fn require_mu(&self) -> Result<f64> {
        self.mu
            .ok_or_else(|| CliError::Usage("missing required --mu".into()))
    }

    fn require_positive_mu(&self) -> Result<f64> {
        let mu = self.require_mu()?;
        if mu > 0.0 && mu.is_finite() {
            Ok(mu)
        } else {
            Err(CliError::Usage(format!("--mu must be positive, got {mu}")))
        }
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => Ok(self.file.parsed(key)?),
        }
    }

    fn pick_list(&self, flag: &[f64], key: &str) -> Result<Vec<f64>> {
        if flag.is_empty() {
            Ok(self.file.list(key)?)
        } else {
            Ok(flag.to_vec())
        }
    }

    fn pick_bc(&mut self, flag: Option<Bc>) -> Result<BoundaryCondition> {
        let bc = match flag {
            Some(b) => b,
            None => match self.file.get("bc") {
                Some(v) => Bc::from_str(v).map_err(CliError::Usage)?,
                None => Bc::Dirichlet,
            },
        };
        let bc: BoundaryCondition = bc.into();
        self.record("bc", bc.as_str().to_string());
        Ok(bc)
    }

    fn seed(&mut self) -> u64 {
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        self.record("seed", seed.to_string());
        seed
    }

    fn grid_policy(&self) -> GridPolicy {
        GridPolicy {
            tol: self.grid_tol,
            points_per_panel: self.grid_points,
            cutoff_factor: self.cutoff_factor,
            ..GridPolicy::default()
        }
    }

    fn tc_config(&self) -> TcConfig {
        TcConfig {
            tol: self.tol,
            grid: self.grid_policy(),
            ..TcConfig::default()
        }
    }
}

fn positive_values(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(CliError::Usage(format!("at least one --{name} is required")));
    }
    if let Some(bad) = values.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(CliError::Usage(format!("--{name} must be positive, got {bad}")));
    }
    Ok(())
}

/// What a command produced, before it is written anywhere.
struct Outcome {
    table: Table,
    rows: Vec<RowProvenance>,
    failed: usize,
    extra: Option<Value>,
    seeds: Vec<u64>,
    /// Exit code when no row failed.
    code: i32,
}

impl Outcome {
    fn new(table: Table) -> Self {
        Self {
            table,
            rows: Vec::new(),
            failed: 0,
            extra: None,
            seeds: Vec::new(),
            code: EXIT_OK,
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer"))),
        _ => match flag {
            Some(0) => Err(CliError::Usage("--threads must be positive".into())),
            other => Ok(other),
        },
    }
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn execute(command: Command) -> Result<i32> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let (name, mut settings, outcome) = match command {
        Command::Replay { manifest, out } => return replay(&manifest, out.as_deref()),
        Command::TcBulk { common, v } => {
            let mut s = Settings::resolve("tc-bulk", &common)?;
            let o = cmd_tc_bulk(&mut s, &v)?;
            ("tc-bulk", s, o)
        }
        Command::TcBoundary { common, v, bc } => {
            let mut s = Settings::resolve("tc-boundary", &common)?;
            let o = cmd_tc_boundary(&mut s, &v, bc)?;
            ("tc-boundary", s, o)
        }
        Command::RatioCurve {
            common,
            bc,
            v_min,
            v_max,
            v_count,
        } => {
            let mut s = Settings::resolve("ratio-curve", &common)?;
            let o = cmd_ratio_curve(&mut s, bc, v_min, v_max, v_count)?;
            ("ratio-curve", s, o)
        }
        Command::Spectrum { common, t, bc } => {
            let mut s = Settings::resolve("spectrum", &common)?;
            let o = cmd_spectrum(&mut s, t, bc)?;
            ("spectrum", s, o)
        }
        Command::TrialGap {
            common,
            t,
            b,
            find_t0,
        } => {
            let mut s = Settings::resolve("trial-gap", &common)?;
            let o = cmd_trial_gap(&mut s, &t, b, find_t0)?;
            ("trial-gap", s, o)
        }
        Command::Asymptotics { common, t } => {
            let mut s = Settings::resolve("asymptotics", &common)?;
            let o = cmd_asymptotics(&mut s, &t)?;
            ("asymptotics", s, o)
        }
        Command::Verify {
            common,
            samples,
            perturb_kernel,
        } => {
            let mut s = Settings::resolve("verify", &common)?;
            let o = cmd_verify(&mut s, samples, perturb_kernel)?;
            ("verify", s, o)
        }
    };
    emit(name, &mut settings, outcome, started, started_unix)
}

fn emit(
    name: &str,
    settings: &mut Settings,
    outcome: Outcome,
    started: Instant,
    started_unix: u64,
) -> Result<i32> {
    let mut body = Vec::new();
    match settings.format {
        Format::Csv => outcome
            .table
            .write_csv(&mut body)
            .map_err(|e| CliError::Io(e.to_string()))?,
        Format::Json => {
            let mut obj = json!({ "command": name, "rows": outcome.table.to_json() });
            if let Some(extra) = &outcome.extra {
                obj["details"] = extra.clone();
            }
            body = serde_json::to_vec_pretty(&obj).map_err(|e| CliError::Io(e.to_string()))?;
            body.push(b'\n');
        }
    }
    match &settings.out {
        Some(path) => {
            std::fs::write(path, &body)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            let manifest = RunManifest {
                command: name.to_string(),
                args: settings.args.clone(),
                config: settings.snapshot.clone(),
                seeds: outcome.seeds.clone(),
                grid_policy: settings.grid_policy(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                started_unix,
                wall_clock_seconds: started.elapsed().as_secs_f64(),
                output: path.display().to_string(),
                format: settings.format.as_str().to_string(),
                rows: outcome.rows.clone(),
            };
            let text = serde_json::to_string_pretty(&manifest)
                .map_err(|e| CliError::Io(e.to_string()))?;
            let mpath = manifest_path(path);
            std::fs::write(&mpath, text + "\n")
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", mpath.display())))?;
            log::info!("wrote {} and {}", path.display(), mpath.display());
        }
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(&body).and_then(|_| stdout.flush()) {
                // a closed pipe (`| head`) is not an error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r.map_err(|e| CliError::Io(e.to_string()))?,
            }
        }
    }
    let total = outcome.table.rows.len();
    Ok(if outcome.failed == 0 {
        outcome.code
    } else if outcome.failed >= total {
        EXIT_NUMERIC
    } else {
        EXIT_PARTIAL
    })
}

fn replay(path: &Path, out: Option<&Path>) -> Result<i32> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let manifest = parse_manifest(&text)
        .map_err(|e| CliError::Usage(format!("invalid manifest {}: {e}", path.display())))?;
    let mut argv = vec!["bcs-edge".to_string()];
    argv.extend(manifest.replay_args(out));
    log::info!("replaying: {}", argv.join(" "));
    let cli = crate::parse_args(&argv).map_err(|e| CliError::Usage(e.to_string()))?;
    if matches!(cli.command, Command::Replay { .. }) {
        return Err(CliError::Usage("a manifest cannot replay a replay".into()));
    }
    execute(cli.command)
}

fn nan_row(n: usize) -> Vec<Cell> {
    vec![Cell::Float(f64::NAN); n]
}

fn cmd_tc_bulk(s: &mut Settings, v: &[f64]) -> Result<Outcome> {
    let mu = s.require_positive_mu()?;
    let vs = s.pick_list(v, "v")?;
    positive_values("v", &vs)?;
    for &x in &vs {
        s.record("v", float_arg(x));
    }
    let cfg = s.tc_config();
    let results = in_pool(s.threads, || {
        vs.par_iter().map(|&v| tc_bulk(v, mu, &cfg)).collect::<Vec<_>>()
    })?;
    let mut out = Outcome::new(Table::new(&[
        "v", "mu", "tc", "residual", "bracket_lo", "bracket_hi", "evaluations", "grid_nodes",
    ]));
    for (i, (&v, r)) in vs.iter().zip(results).enumerate() {
        let mut prov = RowProvenance::new(i, format!("v={}", float_arg(v)));
        match r {
            Ok(r) => {
                prov.evaluations = Some(r.evaluations);
                prov.grid_nodes = Some(r.numerics.grid_nodes);
                out.table.push(vec![
                    v.into(),
                    mu.into(),
                    r.tc.into(),
                    r.residual.into(),
                    r.bracket.0.into(),
                    r.bracket.1.into(),
                    r.evaluations.into(),
                    r.numerics.grid_nodes.into(),
                ]);
            }
            Err(e) => {
                log::error!("tc-bulk v={v}: {e}");
                prov.error = Some(e.to_string());
                out.failed += 1;
                let mut row = nan_row(8);
                row[0] = v.into();
                row[1] = mu.into();
                row[6] = Cell::Int(0);
                row[7] = Cell::Int(0);
                out.table.push(row);
            }
        }
        out.rows.push(prov);
    }
    Ok(out)
}

fn cmd_tc_boundary(s: &mut Settings, v: &[f64], bc: Option<Bc>) -> Result<Outcome> {
    let mu = s.require_positive_mu()?;
    let bc = s.pick_bc(bc)?;
    let vs = s.pick_list(v, "v")?;
    positive_values("v", &vs)?;
    for &x in &vs {
        s.record("v", float_arg(x));
    }
    let cfg = s.tc_config();
    let results = in_pool(s.threads, || {
        vs.par_iter()
            .map(|&v| {
                let bulk = tc_bulk(v, mu, &cfg)?;
                let b = tc_boundary_from_bulk(v, mu, bc, &cfg, &bulk)?;
                Ok::<_, bcs_edge_core::Error>((bulk, b))
            })
            .collect::<Vec<_>>()
    })?;
    let header = [
        "v", "mu", "bc", "tc_bulk", "tc_boundary", "relative_shift", "collapsed", "residual",
        "gap_at_tc_bulk", "evaluations", "grid_nodes",
    ];
    let mut out = Outcome::new(Table::new(&header));
    for (i, (&v, r)) in vs.iter().zip(results).enumerate() {
        let mut prov = RowProvenance::new(i, format!("v={}", float_arg(v)));
        match r {
            Ok((bulk, b)) => {
                prov.evaluations = Some(b.evaluations);
                prov.grid_nodes = Some(b.numerics.grid_nodes);
                prov.collapsed = Some(b.collapsed);
                out.table.push(vec![
                    v.into(),
                    mu.into(),
                    bc.as_str().into(),
                    bulk.tc.into(),
                    b.tc.into(),
                    ((b.tc - bulk.tc) / bulk.tc).into(),
                    b.collapsed.into(),
                    b.residual.into(),
                    b.gap_at_tc_bulk.unwrap_or(f64::NAN).into(),
                    b.evaluations.into(),
                    b.numerics.grid_nodes.into(),
                ]);
            }
            Err(e) => {
                log::error!("tc-boundary v={v}: {e}");
                prov.error = Some(e.to_string());
                out.failed += 1;
                let mut row = nan_row(header.len());
                row[0] = v.into();
                row[1] = mu.into();
                row[2] = bc.as_str().into();
                row[6] = false.into();
                row[9] = Cell::Int(0);
                row[10] = Cell::Int(0);
                out.table.push(row);
            }
        }
        out.rows.push(prov);
    }
    Ok(out)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| {
            if k == count - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

fn cmd_ratio_curve(
    s: &mut Settings,
    bc: Option<Bc>,
    v_min: Option<f64>,
    v_max: Option<f64>,
    v_count: Option<usize>,
) -> Result<Outcome> {
    let mu = s.require_positive_mu()?;
    let bc = s.pick_bc(bc)?;
    let v_min = s
        .pick(v_min, "v-min")?
        .ok_or_else(|| CliError::Usage("missing required --v-min".into()))?;
    let v_max = s
        .pick(v_max, "v-max")?
        .ok_or_else(|| CliError::Usage("missing required --v-max".into()))?;
    let v_count = s
        .pick(v_count, "v-count")?
        .ok_or_else(|| CliError::Usage("missing required --v-count".into()))?;
    if v_count == 0 {
        return Err(CliError::Usage("--v-count must be at least 1".into()));
    }
    if !(v_min > 0.0 && v_max >= v_min && v_max.is_finite()) {
        return Err(CliError::Usage("need 0 < --v-min <= --v-max".into()));
    }
    s.record("v-min", float_arg(v_min));
    s.record("v-max", float_arg(v_max));
    s.record("v-count", v_count.to_string());
    let vs = log_space(v_min, v_max, v_count);
    let cfg = s.tc_config();
    let curve = in_pool(s.threads, || ratio_curve(&vs, mu, bc, &cfg))??;
    let mut out = Outcome::new(Table::new(&[
        "v", "mu", "bc", "tc_bulk", "tc_boundary", "relative_shift", "gap_at_tc_bulk", "grid_nodes",
    ]));
    for (i, row) in curve.rows.iter().enumerate() {
        let mut prov = RowProvenance::new(i, format!("v={}", float_arg(row.v)));
        prov.grid_nodes = Some(row.grid_nodes);
        if let Some(e) = &row.error {
            log::error!("ratio-curve v={}: {e}", row.v);
            prov.error = Some(e.clone());
            out.failed += 1;
        }
        out.table.push(vec![
            row.v.into(),
            row.mu.into(),
            row.bc.as_str().into(),
            row.tc_bulk.into(),
            row.tc_boundary.into(),
            row.relative_shift.into(),
            row.gap_at_tc_bulk.into(),
            row.grid_nodes.into(),
        ]);
        out.rows.push(prov);
    }
    Ok(out)
}

fn cmd_spectrum(s: &mut Settings, t: Option<f64>, bc: Option<Bc>) -> Result<Outcome> {
    let mu = s.require_mu()?;
    let bc = s.pick_bc(bc)?;
    let t = s
        .pick(t, "t")?
        .ok_or_else(|| CliError::Usage("missing required --t".into()))?;
    s.record("t", float_arg(t));
    let params = ModelParams::new(t, mu)?;
    let policy = s.grid_policy();
    let threads = s.threads;
    let (grid, pair, a_edge) = in_pool(threads, || -> bcs_edge_core::Result<_> {
        let grid = build_grid_with(&params, &policy)?;
        let op = assemble(&params, &grid, bc)?;
        let pair = top_eigenpair(&op, 1e-10)?;
        Ok((grid, pair, op.a_edge))
    })??;
    let gap = pair.value - a_edge;
    let sm = mu.max(0.0).sqrt();
    let low_mass: f64 = grid
        .nodes()
        .iter()
        .zip(pair.vector.iter())
        .filter(|(&p, _)| p < sm)
        .map(|(_, x)| x * x)
        .sum();
    let mut out = Outcome::new(Table::new(&[
        "t", "mu", "bc", "top_eigenvalue", "a_edge", "gap", "low_momentum_mass", "p", "psi_sq",
    ]));
    for ((&p, &w), x) in grid.nodes().iter().zip(grid.weights()).zip(pair.vector.iter()) {
        out.table.push(vec![
            t.into(),
            mu.into(),
            bc.as_str().into(),
            pair.value.into(),
            a_edge.into(),
            gap.into(),
            low_mass.into(),
            p.into(),
            (x * x / w).into(),
        ]);
    }
    let mut prov = RowProvenance::new(0, format!("T={}", float_arg(t)));
    prov.grid_nodes = Some(grid.len());
    out.rows.push(prov);
    out.extra = Some(json!({
        "top_eigenvalue": pair.value,
        "a_edge": a_edge,
        "gap": gap,
        "residual": pair.residual,
        "low_momentum_mass": low_mass,
        "grid_nodes": grid.len(),
    }));
    Ok(out)
}

fn cmd_trial_gap(s: &mut Settings, t: &[f64], b: Option<f64>, find: bool) -> Result<Outcome> {
    let mu = s.require_positive_mu()?;
    let b = s.pick(b, "b")?;
    let find = find || s.file.parsed::<bool>("find-t0")?.unwrap_or(false);
    if let Some(b) = b {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliError::Usage("--b must be positive".into()));
        }
        s.record("b", float_arg(b));
    }
    let cfg = TrialConfig {
        b,
        grid: s.grid_policy(),
    };
    let width = cfg.width(mu);
    if find {
        s.record_flag("find-t0");
        let tol = s.tol;
        let r = in_pool(s.threads, || find_t0(mu, &cfg, tol))??;
        let mut out = Outcome::new(Table::new(&["mu", "b", "t0", "bracket_lo", "bracket_hi", "evaluations"]));
        out.table.push(vec![
            mu.into(),
            width.into(),
            r.t0.into(),
            r.bracket.0.into(),
            r.bracket.1.into(),
            r.evaluations.into(),
        ]);
        let mut prov = RowProvenance::new(0, "find-t0");
        prov.evaluations = Some(r.evaluations);
        out.rows.push(prov);
        return Ok(out);
    }
    let ts = s.pick_list(t, "t")?;
    positive_values("t", &ts)?;
    for &x in &ts {
        s.record("t", float_arg(x));
    }
    let results = in_pool(s.threads, || {
        ts.par_iter()
            .map(|&t| -> bcs_edge_core::Result<_> {
                let params = ModelParams::new(t, mu)?;
                let terms = trial_terms(&params, &cfg)?;
                let grid = build_grid_with(&params, &cfg.grid)?;
                let op = assemble(&params, &grid, BoundaryCondition::Dirichlet)?;
                Ok((terms, spectral_gap(&op, 1e-10)?, grid.len()))
            })
            .collect::<Vec<_>>()
    })?;
    let header = ["t", "mu", "b", "trial_gap", "overlap", "denominator", "spectral_gap"];
    let mut out = Outcome::new(Table::new(&header));
    for (i, (&t, r)) in ts.iter().zip(results).enumerate() {
        let mut prov = RowProvenance::new(i, format!("T={}", float_arg(t)));
        match r {
            Ok((terms, gap, nodes)) => {
                prov.grid_nodes = Some(nodes);
                out.table.push(vec![
                    t.into(),
                    mu.into(),
                    width.into(),
                    terms.value.into(),
                    terms.overlap.into(),
                    terms.denominator.into(),
                    gap.into(),
                ]);
            }
            Err(e) => {
                prov.error = Some(e.to_string());
                out.failed += 1;
                let mut row = nan_row(header.len());
                row[0] = t.into();
                row[1] = mu.into();
                row[2] = width.into();
                out.table.push(row);
            }
        }
        out.rows.push(prov);
    }
    Ok(out)
}

fn cmd_asymptotics(s: &mut Settings, t: &[f64]) -> Result<Outcome> {
    let mu = s.require_positive_mu()?;
    if mu <= 0.0 {
        return Err(CliError::Usage("asymptotics needs --mu > 0".into()));
    }
    let ts = s.pick_list(t, "t")?;
    positive_values("t", &ts)?;
    for &x in &ts {
        s.record("t", float_arg(x));
    }
    let cfg = s.tc_config();
    let results = in_pool(s.threads, || {
        ts.par_iter()
            .map(|&t| -> bcs_edge_core::Result<_> {
                let params = ModelParams::new(t, mu)?;
                let residual = int_f_residual(&params, &cfg.grid)?;
                let d = scaled_sup(t, mu, BoundaryCondition::Dirichlet, &cfg)?;
                let n = scaled_sup(t, mu, BoundaryCondition::Neumann, &cfg)?;
                Ok((residual, d, n))
            })
            .collect::<Vec<_>>()
    })?;
    let header = [
        "t", "mu", "int_f", "int_f_asymptotic", "int_f_residual", "scaled_sup_dirichlet",
        "scaled_sup_neumann",
    ];
    let mut out = Outcome::new(Table::new(&header));
    for (i, (&t, r)) in ts.iter().zip(results).enumerate() {
        let mut prov = RowProvenance::new(i, format!("T={}", float_arg(t)));
        let asy = low_temperature_int_f(t, mu);
        match r {
            Ok((res, d, n)) => out.table.push(vec![
                t.into(),
                mu.into(),
                (asy + res).into(),
                asy.into(),
                res.into(),
                d.into(),
                n.into(),
            ]),
            Err(e) => {
                prov.error = Some(e.to_string());
                out.failed += 1;
                let mut row = nan_row(header.len());
                row[0] = t.into();
                row[1] = mu.into();
                row[3] = asy.into();
                out.table.push(row);
            }
        }
        out.rows.push(prov);
    }
    Ok(out)
}

type Check<'a> = Box<dyn Fn() -> bcs_edge_core::Result<CheckReport> + Send + Sync + 'a>;

fn cmd_verify(s: &mut Settings, samples: Option<usize>, perturb: Option<f64>) -> Result<Outcome> {
    let mu = s.mu.unwrap_or(1.0);
    if !(mu > 0.0) {
        return Err(CliError::Usage("verify needs --mu > 0".into()));
    }
    if s.mu.is_none() {
        s.record("mu", float_arg(mu));
    }
    let n = s
        .pick(samples, "samples")?
        .unwrap_or(DEFAULT_SAMPLES);
    if n == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    s.record("samples", n.to_string());
    let seed = s.seed();
    let perturb = perturb.unwrap_or(0.0);
    if perturb != 0.0 {
        s.record("perturb-kernel", float_arg(perturb));
    }
    let suite = LemmaSuite::new(perturb);
    let policy = s.grid_policy();
    let grids = n.div_ceil(2500).max(1);
    let sm = mu.sqrt();
    let checks: Vec<Check> = vec![
        Box::new(move || suite.check_tanh_sum(n, seed)),
        Box::new(move || suite.check_tanh_diff(n, seed + 1)),
        Box::new(move || suite.check_mean_bound(n, seed + 2)),
        Box::new(move || suite.check_concavity_bound(n, seed + 3)),
        Box::new(move || suite.check_k_majorant(50, grids, seed + 4)),
        Box::new(move || suite.check_l_sandwich(mu, 0.1 * mu, 0.1 * mu, n, seed + 5)),
        Box::new(move || suite.check_l_sandwich(mu, mu, mu, n, seed + 6)),
        Box::new(move || suite.check_l_sandwich(mu, 10.0 * mu, 10.0 * mu, n, seed + 7)),
        Box::new(move || {
            suite.check_e_log_growth(mu, 0.5 * sm, &[1e-2 * mu, 1e-3 * mu, 1e-4 * mu], &policy)
        }),
        Box::new(move || {
            let ts: Vec<f64> = (-3..=3).map(|k| mu * 10f64.powi(k)).collect();
            suite.check_b_uniform_norm(mu, &ts, &policy, B_NORM_CEILING / sm)
        }),
        Box::new(move || {
            let cfg = TrialConfig {
                b: None,
                grid: policy,
            };
            let ts: Vec<f64> = [1e-6, 1e-4, 1e-3, 1e-2, 1e-1].iter().map(|k| k * mu).collect();
            suite.check_trial_certificate(mu, &ts, &cfg, 1e-10)
        }),
    ];
    let reports = in_pool(s.threads, || {
        checks.par_iter().map(|c| c()).collect::<Vec<_>>()
    })?;
    let mut reports = reports.into_iter().collect::<bcs_edge_core::Result<Vec<_>>>()?;
    for (r, suffix) in reports[5..8].iter_mut().zip(["[T=0.1mu]", "[T=mu]", "[T=10mu]"]) {
        r.name.push_str(suffix);
    }
    let mut out = Outcome::new(Table::new(&[
        "name", "samples", "violations", "float_noise", "worst_margin", "seed", "passed",
    ]));
    out.seeds = (0..8).map(|k| seed + k).collect();
    for (i, r) in reports.iter().enumerate() {
        out.table.push(vec![
            r.name.as_str().into(),
            r.samples.into(),
            r.violations.into(),
            r.float_noise.into(),
            r.worst_margin.into(),
            r.seed.into(),
            r.passed().into(),
        ]);
        let mut prov = RowProvenance::new(i, r.name.clone());
        prov.error = r.worst_sample.clone();
        out.rows.push(prov);
        if r.passed() {
            log::info!("{}: ok ({} samples)", r.name, r.samples);
        } else {
            log::error!("{}: {} violations", r.name, r.violations);
        }
    }
    if reports.iter().any(|r| !r.passed()) {
        out.code = EXIT_NUMERIC;
    }
    out.extra = Some(serde_json::to_value(&reports).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(out)
}
