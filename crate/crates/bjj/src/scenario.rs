//! Configuration parsing, named figure scenarios and table output.
//!
//! Configs are flat `key = value` text (comments with `#`); every key can be
//! overridden by an environment variable `BJJ_<KEY>` (uppercased, dots
//! replaced by underscores).  Rates are given in units of `1/T` and times in
//! units of `T = 2 pi / chi`, matching the way the reference parameter sets
//! are quoted; `chi` itself defaults to 1 and only sets the time scale.
//!
//! Every emitted table starts with a `#`-prefixed header block recording the
//! fully resolved parameter set, the code version and the seed, so a table
//! can be reproduced from its own header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{Error, Result};
use crate::exact::{evolve_master_path, BlockDensity, IntegratorConfig};
use crate::fock::coherent_state;
use crate::metrics::{husimi, qfi_optimal, qfi_total, shot_noise_report, QfiMode};
use crate::params::ModelParams;
use crate::trajectory::ensemble_with_logs;
use crate::conditional::single_loss_conditional;

/// Environment prefix for config overrides.
pub const ENV_PREFIX: &str = "BJJ_";

/// Output format for tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Parsed flat key-value configuration with typed accessors.
#[derive(Debug, Clone, Default)]
pub struct ScenarioConfig {
    entries: BTreeMap<String, String>,
}

impl ScenarioConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Parse `key = value` lines; `#` starts a comment, blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Apply `BJJ_*` environment overrides.  `BJJ_GAMMA1` overrides
    /// `gamma1`; a double underscore maps to a dot, so `BJJ_SWEEP__GAMMA1`
    /// overrides `sweep.gamma1`.
    pub fn apply_env(&mut self) {
        for (key, value) in std::env::vars() {
            if let Some(rest) = key.strip_prefix(ENV_PREFIX) {
                let k = rest.to_ascii_lowercase().replace("__", ".");
                self.entries.insert(k, value);
            }
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_ascii_lowercase(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("{key} = '{s}' is not a number"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("{key} = '{s}' is not an integer"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("{key} = '{s}' is not an integer"))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => match s.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                other => Err(Error::Config(format!("{key} = '{other}' is not a boolean"))),
            },
        }
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("{key}: '{tok}' is not a number")))
                })
                .collect(),
        }
    }

    pub fn str_list_or(&self, key: &str, default: &[&str]) -> Vec<String> {
        match self.get(key) {
            None => default.iter().map(|s| s.to_string()).collect(),
            Some(s) => s.split(',').map(|t| t.trim().to_ascii_lowercase()).collect(),
        }
    }

    /// Keys of the form `sweep.<param>`.
    pub fn sweep_keys(&self) -> Vec<String> {
        self.entries
            .keys()
            .filter_map(|k| k.strip_prefix("sweep.").map(str::to_string))
            .collect()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

/// Fully resolved run parameters in raw (inverse-time / time) units.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: ModelParams,
    pub n0: usize,
    /// Nonlinear period `T = 2 pi / chi`, the caption time unit.
    pub t_unit: f64,
    pub theta0: f64,
    pub phi0: f64,
    pub seed: u64,
    pub integrator: IntegratorConfig,
}

impl Resolved {
    /// Resolve caption-unit keys into raw model parameters.
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let chi = cfg.f64_or("chi", 1.0)?;
        if chi == 0.0 {
            return Err(Error::Config("chi must be nonzero".into()));
        }
        let t_unit = 2.0 * std::f64::consts::PI / chi.abs();
        let n0 = cfg.usize_or("n0", 100)?;

        let has_chis = cfg.get("chi1").is_some() || cfg.get("chi2").is_some();
        let has_us = cfg.get("u1").is_some() || cfg.get("u2").is_some() || cfg.get("u12").is_some();
        if has_chis && has_us {
            return Err(Error::Config(
                "give either (chi1, chi2) or (u1, u2, u12), not both".into(),
            ));
        }
        let gamma1 = cfg.f64_or("gamma1", 0.0)? / t_unit;
        let gamma2 = cfg.f64_or("gamma2", 0.0)? / t_unit;
        let gamma12 = cfg.f64_or("gamma12", 0.0)? / t_unit;
        let e1 = cfg.f64_or("e1", 0.0)?;
        let e2 = cfg.f64_or("e2", 0.0)?;

        let model = if has_us {
            let u1 = cfg.f64_or("u1", 0.0)?;
            let u2 = cfg.f64_or("u2", 0.0)?;
            let u12 = cfg.f64_or("u12", 0.0)?;
            let m = ModelParams::new(e1, e2, u1, u2, u12, gamma1, gamma2, gamma12)?;
            if (m.chi() - chi).abs() > 1e-12 * chi.abs().max(1.0) {
                return Err(Error::Config(format!(
                    "(u1 + u2 - 2 u12)/2 = {} does not match chi = {chi}",
                    m.chi()
                )));
            }
            m
        } else {
            let chi1 = cfg.f64_or("chi1", chi)?;
            let chi2 = cfg.f64_or("chi2", -chi)?;
            if ((chi1 - chi2) / 2.0 - chi).abs() > 1e-12 * chi.abs().max(1.0) {
                return Err(Error::Config(format!(
                    "(chi1 - chi2)/2 = {} does not match chi = {chi}",
                    (chi1 - chi2) / 2.0
                )));
            }
            let mut m = ModelParams::from_chis(chi1, chi2, gamma1, gamma2, gamma12)?;
            if e1 != 0.0 || e2 != 0.0 {
                m = ModelParams::new(e1, e2, chi1, -chi2, 0.0, gamma1, gamma2, gamma12)?;
            }
            m
        };

        let truncate = match cfg.get("truncate") {
            None => Some(1e-14),
            Some(s) if s.eq_ignore_ascii_case("off") => None,
            Some(s) => Some(
                s.parse()
                    .map_err(|_| Error::Config(format!("truncate = '{s}' is not a number or 'off'")))?,
            ),
        };
        let integrator = IntegratorConfig {
            rtol: cfg.f64_or("rtol", 1e-9)?,
            atol: cfg.f64_or("atol", 1e-12)?,
            max_step: cfg.f64_or("max_step", 0.0)? * t_unit,
            truncate_threshold: truncate,
            max_steps: cfg.usize_or("max_steps", 5_000_000)?,
        };

        Ok(Self {
            model,
            n0,
            t_unit,
            theta0: cfg.f64_or("theta0", std::f64::consts::FRAC_PI_2)?,
            phi0: cfg.f64_or("phi0", 0.0)?,
            seed: cfg.u64_or("seed", 0)?,
            integrator,
        })
    }

    /// Evolve the initial coherent state and return snapshots at the given
    /// times (in units of T).
    pub fn evolve_at(&self, times_t: &[f64]) -> Result<Vec<BlockDensity>> {
        let s0 = coherent_state(self.n0, self.theta0, self.phi0)?;
        let rho0 = BlockDensity::from_pure(&s0);
        let raw: Vec<f64> = times_t.iter().map(|t| t * self.t_unit).collect();
        evolve_master_path(&rho0, &raw, &self.model, &self.integrator)
    }
}

/// A table with a reproducibility header, writable as CSV or JSON.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.header.push((key.to_string(), value.to_string()));
    }

    /// Standard header block: code version, resolved config, units note.
    pub fn standard_meta(&mut self, cfg: &ScenarioConfig, extra: &[(&str, String)]) {
        self.meta("generator", format!("bjj {}", env!("CARGO_PKG_VERSION")));
        self.meta("units", "rates in 1/T, times in T, T = 2*pi/chi");
        for (k, v) in cfg.entries() {
            self.meta(&format!("config.{k}"), v);
        }
        for (k, v) in extra {
            self.meta(k, v);
        }
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let header: serde_json::Map<String, serde_json::Value> = self
            .header
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect();
        let value = json!({
            "name": self.name,
            "header": header,
            "columns": self.columns,
            "rows": self.rows,
        });
        serde_json::to_string_pretty(&value).expect("table serializes") + "\n"
    }

    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let (ext, body) = match format {
            OutputFormat::Csv => ("csv", self.to_csv()),
            OutputFormat::Json => ("json", self.to_json()),
        };
        let path = dir.join(format!("{}.{ext}", self.name));
        std::fs::write(&path, body)?;
        Ok(path)
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// The four canonical rate/energy combinations of the reference figures,
/// in caption units (gamma * T).
///
/// The protected energy choice follows the text convention chi1 = 0,
/// chi2 = -2 chi; setting `caption_energies = true` switches to the literal
/// caption values chi1 = 2 chi, chi2 = 0.
#[derive(Debug, Clone, Copy)]
pub struct FigureLine {
    pub key: &'static str,
    pub gamma1_t: f64,
    pub gamma2_t: f64,
    pub protected_energies: bool,
}

pub const FIG2_PANELS: [FigureLine; 4] = [
    FigureLine { key: "upper_left_symrates_symenergies", gamma1_t: 0.01, gamma2_t: 0.01, protected_energies: false },
    FigureLine { key: "upper_right_symrates_protected", gamma1_t: 0.01, gamma2_t: 0.01, protected_energies: true },
    FigureLine { key: "lower_left_asymrates_symenergies", gamma1_t: 8.0 / 300.0, gamma2_t: 0.0, protected_energies: false },
    FigureLine { key: "lower_right_asymrates_protected", gamma1_t: 8.0 / 300.0, gamma2_t: 0.0, protected_energies: true },
];

/// Fig. 4 caption order, top curve first.
pub const FIG4_LINES: [FigureLine; 4] = [
    FigureLine { key: "blue_dashed_asymrates_protected", gamma1_t: 8.0 / 300.0, gamma2_t: 0.0, protected_energies: true },
    FigureLine { key: "red_dotted_asymrates_symenergies", gamma1_t: 8.0 / 300.0, gamma2_t: 0.0, protected_energies: false },
    FigureLine { key: "brown_dotdashed_symrates_protected", gamma1_t: 0.01, gamma2_t: 0.01, protected_energies: true },
    FigureLine { key: "black_solid_symrates_symenergies", gamma1_t: 0.01, gamma2_t: 0.01, protected_energies: false },
];

fn line_config(base: &ScenarioConfig, line: &FigureLine, caption_energies: bool) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    let chi = cfg.f64_or("chi", 1.0)?;
    cfg.set("gamma1", line.gamma1_t);
    cfg.set("gamma2", line.gamma2_t);
    cfg.set("gamma12", 0.0);
    if line.protected_energies {
        if caption_energies {
            cfg.set("chi1", 2.0 * chi);
            cfg.set("chi2", 0.0);
        } else {
            cfg.set("chi1", 0.0);
            cfg.set("chi2", -2.0 * chi);
        }
    } else {
        cfg.set("chi1", chi);
        cfg.set("chi2", -chi);
    }
    Ok(cfg)
}

/// Modulus tables of the (N0-2)-sector density matrix at t2 for the four
/// reference panels, with the closed-form single-loss state alongside.
pub fn run_fig2(cfg: &ScenarioConfig, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let caption = cfg.bool_or("caption_energies", false)?;
    let mut written = Vec::new();
    for panel in FIG2_PANELS {
        let panel_cfg = line_config(cfg, &panel, caption)?;
        let resolved = Resolved::from_config(&panel_cfg)?;
        let t2_t = 0.25;
        let snap = resolved.evolve_at(&[t2_t])?.pop().expect("one snapshot");
        let n = resolved.n0 - 2;
        let master = snap
            .block(n)
            .ok_or_else(|| Error::Config("n0 must be at least 2".into()))?
            .normalized()?;
        let analytic = single_loss_conditional(t2_t * resolved.t_unit, &resolved.model, resolved.n0)?;

        let mut table = Table::new(&format!("fig2_{}", panel.key), &["n1", "n1_prime", "abs_master", "abs_analytic"]);
        table.standard_meta(&panel_cfg, &[
            ("panel", panel.key.to_string()),
            ("time", "t2 = T/4".to_string()),
            ("seed", resolved.seed.to_string()),
        ]);
        for j in 0..=n {
            for i in 0..=n {
                table.push_row(vec![
                    i.to_string(),
                    j.to_string(),
                    fmt_f64(master.mat()[(i, j)].norm()),
                    fmt_f64(analytic.state.mat()[(i, j)].norm()),
                ]);
            }
        }
        written.push(table.write(out, format)?);
    }
    Ok(written)
}

/// Fisher information of the (N0-2)-sector state at t2 against the loss
/// rate, for the four rate/energy combinations, plus optional Husimi grids
/// at marker rates.
pub fn run_fig3(cfg: &ScenarioConfig, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let caption = cfg.bool_or("caption_energies", false)?;
    let lines = [
        ("black_solid_symrates_symenergies", true, false),
        ("brown_dotdashed_symrates_protected", true, true),
        ("red_dotted_asymrates_symenergies", false, false),
        ("blue_dashed_asymrates_protected", false, true),
    ];
    let grid = log_grid(
        cfg.f64_or("gamma1_min", 1e-3)?,
        cfg.f64_or("gamma1_max", 10.0)?,
        cfg.usize_or("gamma1_points", 9)?,
    );
    let markers = cfg.f64_list_or("husimi_markers", &[])?;
    let husimi_theta = cfg.usize_or("husimi_theta", 181)?;
    let husimi_phi = cfg.usize_or("husimi_phi", 361)?;

    let mut written = Vec::new();
    for (key, symmetric_rates, protected) in lines {
        let mut table = Table::new(&format!("fig3_{key}"), &["gamma1_T", "fisher_n0_minus_2"]);
        table.standard_meta(cfg, &[
            ("line", key.to_string()),
            ("optimization", "per-sector".to_string()),
            ("time", "t2 = T/4".to_string()),
        ]);
        for (idx, &g1t) in grid.iter().enumerate() {
            let line = FigureLine {
                key,
                gamma1_t: g1t,
                gamma2_t: if symmetric_rates { g1t } else { 0.0 },
                protected_energies: protected,
            };
            let line_cfg = line_config(cfg, &line, caption)?;
            let resolved = Resolved::from_config(&line_cfg)?;
            let snap = resolved.evolve_at(&[0.25])?.pop().expect("one snapshot");
            let block = snap.block(resolved.n0 - 2).expect("sector exists").normalized()?;
            let fisher = qfi_optimal(&block)?;
            table.push_row(vec![fmt_f64(g1t), fmt_f64(fisher.value)]);

            if markers.iter().any(|&m| (m - g1t).abs() <= 1e-12 * m.abs().max(1.0)) {
                let grid_q = husimi(&block, husimi_theta, husimi_phi)?;
                let mut h = Table::new(
                    &format!("fig3_husimi_{key}_{idx}"),
                    &["theta", "phi", "q"],
                );
                h.standard_meta(&line_cfg, &[("gamma1_T", fmt_f64(g1t))]);
                for (i, &th) in grid_q.theta.iter().enumerate() {
                    for (j, &ph) in grid_q.phi.iter().enumerate() {
                        h.push_row(vec![fmt_f64(th), fmt_f64(ph), fmt_f64(grid_q.values[(i, j)])]);
                    }
                }
                written.push(h.write(out, format)?);
            }
        }
        written.push(table.write(out, format)?);
    }
    Ok(written)
}

/// Total Fisher information and mean atom number against time for the four
/// reference rate/energy combinations.
pub fn run_fig4(cfg: &ScenarioConfig, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let caption = cfg.bool_or("caption_energies", false)?;
    let default_times: Vec<f64> = (1..=24).map(|k| k as f64 * 0.0125).collect();
    let times = cfg.f64_list_or("times", &default_times)?;
    let mode = fisher_mode(cfg)?;
    let mut written = Vec::new();
    for line in FIG4_LINES {
        let line_cfg = line_config(cfg, &line, caption)?;
        let resolved = Resolved::from_config(&line_cfg)?;
        let snapshots = resolved.evolve_at(&times)?;
        let mut table = Table::new(&format!("fig4_{}", line.key), &["t_over_T", "f_tot", "mean_n"]);
        table.standard_meta(&line_cfg, &[
            ("line", line.key.to_string()),
            ("optimization", if mode == QfiMode::SharedDirection { "shared-direction" } else { "per-sector" }.to_string()),
        ]);
        for (t, snap) in times.iter().zip(&snapshots) {
            let fisher = qfi_total(snap, mode)?;
            table.push_row(vec![fmt_f64(*t), fmt_f64(fisher.value), fmt_f64(snap.mean_atom_number())]);
        }
        written.push(table.write(out, format)?);
    }
    Ok(written)
}

fn fisher_mode(cfg: &ScenarioConfig) -> Result<QfiMode> {
    match cfg.get("fisher_mode").unwrap_or("shared") {
        "shared" | "shared_direction" => Ok(QfiMode::SharedDirection),
        "per_sector" | "sector" => Ok(QfiMode::PerSector),
        other => Err(Error::Config(format!("fisher_mode = '{other}' (use 'shared' or 'per_sector')"))),
    }
}

fn log_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![min];
    }
    let (lmin, lmax) = (min.ln(), max.ln());
    (0..points)
        .map(|i| (lmin + (lmax - lmin) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Generic evolution run with the outputs requested in the config.
pub fn run_evolve(cfg: &ScenarioConfig, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let resolved = Resolved::from_config(cfg)?;
    let times = cfg.f64_list_or("times", &[0.25])?;
    let outputs = cfg.str_list_or("outputs", &["weights", "mean_n", "fisher_total"]);
    let snapshots = resolved.evolve_at(&times)?;
    let mode = fisher_mode(cfg)?;
    let block_n = cfg.usize_or("block", resolved.n0.saturating_sub(2))?;
    let mut written = Vec::new();

    for output in &outputs {
        match output.as_str() {
            "weights" => {
                let mut t = Table::new("evolve_weights", &["t_over_T", "sector_n", "weight"]);
                t.standard_meta(cfg, &[]);
                for (time, snap) in times.iter().zip(&snapshots) {
                    for blk in snap.blocks() {
                        t.push_row(vec![
                            fmt_f64(*time),
                            blk.n_total().to_string(),
                            fmt_f64(blk.weight()),
                        ]);
                    }
                }
                written.push(t.write(out, format)?);
            }
            "mean_n" => {
                let mut t = Table::new("evolve_mean_n", &["t_over_T", "mean_n"]);
                t.standard_meta(cfg, &[]);
                for (time, snap) in times.iter().zip(&snapshots) {
                    t.push_row(vec![fmt_f64(*time), fmt_f64(snap.mean_atom_number())]);
                }
                written.push(t.write(out, format)?);
            }
            "fisher_total" => {
                let mut t = Table::new(
                    "evolve_fisher_total",
                    &["t_over_T", "f_tot", "dir_x", "dir_y", "dir_z", "mean_n", "phase_precision", "sub_shot_noise"],
                );
                t.standard_meta(cfg, &[]);
                for (time, snap) in times.iter().zip(&snapshots) {
                    let fisher = qfi_total(snap, mode)?;
                    let report = shot_noise_report(snap, &fisher);
                    let dir = fisher.direction.unwrap_or([f64::NAN; 3]);
                    t.push_row(vec![
                        fmt_f64(*time),
                        fmt_f64(fisher.value),
                        fmt_f64(dir[0]),
                        fmt_f64(dir[1]),
                        fmt_f64(dir[2]),
                        fmt_f64(report.mean_n),
                        fmt_f64(report.phase_precision),
                        report.sub_shot_noise.to_string(),
                    ]);
                }
                written.push(t.write(out, format)?);
            }
            "fisher_sector" => {
                let mut t = Table::new("evolve_fisher_sector", &["t_over_T", "sector_n", "fisher", "weight"]);
                t.standard_meta(cfg, &[]);
                for (time, snap) in times.iter().zip(&snapshots) {
                    let fisher = qfi_total(snap, QfiMode::PerSector)?;
                    for s in fisher.per_sector.as_deref().unwrap_or(&[]) {
                        t.push_row(vec![
                            fmt_f64(*time),
                            s.n_total.to_string(),
                            fmt_f64(s.fisher),
                            fmt_f64(s.weight),
                        ]);
                    }
                }
                written.push(t.write(out, format)?);
            }
            "density_block" => {
                for (idx, (time, snap)) in times.iter().zip(&snapshots).enumerate() {
                    let block = snap
                        .block(block_n)
                        .ok_or_else(|| Error::Config(format!("sector {block_n} not in the cascade")))?;
                    let normalized = block.normalized()?;
                    let mut t = Table::new(
                        &format!("evolve_density_n{block_n}_t{idx}"),
                        &["n1", "n1_prime", "re", "im", "abs"],
                    );
                    t.standard_meta(cfg, &[("t_over_T", fmt_f64(*time)), ("sector", block_n.to_string())]);
                    for j in 0..=block_n {
                        for i in 0..=block_n {
                            let z = normalized.mat()[(i, j)];
                            t.push_row(vec![
                                i.to_string(),
                                j.to_string(),
                                fmt_f64(z.re),
                                fmt_f64(z.im),
                                fmt_f64(z.norm()),
                            ]);
                        }
                    }
                    written.push(t.write(out, format)?);
                }
            }
            "husimi" => {
                let theta_pts = cfg.usize_or("husimi_theta", 181)?;
                let phi_pts = cfg.usize_or("husimi_phi", 361)?;
                for (idx, (time, snap)) in times.iter().zip(&snapshots).enumerate() {
                    let block = snap
                        .block(block_n)
                        .ok_or_else(|| Error::Config(format!("sector {block_n} not in the cascade")))?;
                    let normalized = block.normalized()?;
                    let grid = husimi(&normalized, theta_pts, phi_pts)?;
                    let mut t = Table::new(
                        &format!("evolve_husimi_n{block_n}_t{idx}"),
                        &["theta", "phi", "q"],
                    );
                    t.standard_meta(cfg, &[("t_over_T", fmt_f64(*time)), ("sector", block_n.to_string())]);
                    for (i, &th) in grid.theta.iter().enumerate() {
                        for (j, &ph) in grid.phi.iter().enumerate() {
                            t.push_row(vec![fmt_f64(th), fmt_f64(ph), fmt_f64(grid.values[(i, j)])]);
                        }
                    }
                    written.push(t.write(out, format)?);
                }
            }
            other => return Err(Error::Config(format!("unknown output '{other}'"))),
        }
    }
    Ok(written)
}

/// Trajectory ensemble run: JSONL log of every realization plus an
/// ensemble-vs-exact comparison table.
pub fn run_trajectory(cfg: &ScenarioConfig, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let resolved = Resolved::from_config(cfg)?;
    let t_final_t = cfg.f64_list_or("times", &[0.25])?;
    let t_final = *t_final_t.last().expect("nonempty default") * resolved.t_unit;
    let n_traj = cfg.u64_or("n_traj", 10_000)?;

    let (estimate, logs) = ensemble_with_logs(
        resolved.n0,
        resolved.theta0,
        resolved.phi0,
        t_final,
        &resolved.model,
        n_traj,
        resolved.seed,
    )?;
    let exact = resolved.evolve_at(&[t_final / resolved.t_unit])?.pop().expect("one snapshot");

    std::fs::create_dir_all(out)?;
    let log_path = out.join("trajectories.jsonl");
    let mut body = String::new();
    for record in &logs {
        let _ = writeln!(body, "{}", serde_json::to_string(record).expect("record serializes"));
    }
    std::fs::write(&log_path, body)?;

    let (frac_within, worst_weight_sigma) = estimate.agreement(&exact, 3.0, 1e-12);
    let mut t = Table::new(
        "trajectory_compare",
        &["sector_n", "weight_mc", "weight_stderr", "weight_exact"],
    );
    t.standard_meta(cfg, &[
        ("n_traj", n_traj.to_string()),
        ("frac_elements_within_3_sigma", fmt_f64(frac_within)),
        ("worst_weight_sigma", fmt_f64(worst_weight_sigma)),
    ]);
    for (b, blk) in estimate.mean.blocks().iter().enumerate() {
        t.push_row(vec![
            blk.n_total().to_string(),
            fmt_f64(blk.weight()),
            fmt_f64(estimate.weight_stderr[b]),
            fmt_f64(exact.blocks()[b].weight()),
        ]);
    }
    let table_path = t.write(out, format)?;
    Ok(vec![log_path, table_path])
}

/// Cartesian sweep over `sweep.<param>` lists; one output row per point.
pub fn run_sweep(cfg: &ScenarioConfig, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let keys = cfg.sweep_keys();
    if keys.is_empty() {
        return Err(Error::Config("sweep needs at least one 'sweep.<param> = v1,v2,...' entry".into()));
    }
    let mut values = Vec::new();
    for key in &keys {
        let list = cfg.f64_list_or(&format!("sweep.{key}"), &[])?;
        if list.is_empty() {
            return Err(Error::Config(format!("sweep.{key} has no values")));
        }
        values.push(list);
    }

    let time_t = *cfg.f64_list_or("times", &[0.25])?.last().expect("nonempty default");
    let block_key = cfg.get("block").map(str::to_string);
    let mode = fisher_mode(cfg)?;

    let mut columns: Vec<String> = keys.clone();
    columns.extend(["f_tot", "fisher_sector", "mean_n", "weight_sector"].map(str::to_string));
    let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new("sweep", &col_refs);
    table.standard_meta(cfg, &[("time", fmt_f64(time_t))]);

    let mut index = vec![0usize; keys.len()];
    loop {
        let mut point_cfg = cfg.clone();
        for (k, key) in keys.iter().enumerate() {
            point_cfg.set(key, values[k][index[k]]);
        }
        let resolved = Resolved::from_config(&point_cfg)?;
        let block_n = match &block_key {
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("block = '{s}' is not an integer")))?,
            None => resolved.n0.saturating_sub(2),
        };
        let snap = resolved.evolve_at(&[time_t])?.pop().expect("one snapshot");
        let f_tot = qfi_total(&snap, mode)?;
        let sector_fisher = snap
            .block(block_n)
            .map(|b| b.normalized().and_then(|nb| qfi_optimal(&nb)).map(|f| f.value))
            .transpose()?
            .unwrap_or(f64::NAN);
        let mut row: Vec<String> = (0..keys.len()).map(|k| fmt_f64(values[k][index[k]])).collect();
        row.push(fmt_f64(f_tot.value));
        row.push(fmt_f64(sector_fisher));
        row.push(fmt_f64(snap.mean_atom_number()));
        row.push(fmt_f64(snap.sector_weight(block_n)));
        table.push_row(row);

        // advance the mixed-radix counter
        let mut k = keys.len();
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            index[k] += 1;
            if index[k] < values[k].len() {
                break;
            }
            index[k] = 0;
            if k == 0 {
                let path = table.write(out, format)?;
                return Ok(vec![path]);
            }
        }
    }
}
