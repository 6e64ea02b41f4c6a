//! Executes a [`RunConfig`]: one CSV family per experiment plus a JSON
//! manifest, all inside the output directory.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::blockperc::{bernoulli_field, class_cd_diagnostic, macroscopic_field, op_lifetime, OpLifetime, MIN_ENSEMBLE};
use crate::config::{site_of, Experiment, RunConfig};
use crate::contact::{dual_hit_probability, evolve, Configuration};
use crate::environment::{sample_environment, Environment};
use crate::error::{Error, Result};
use crate::harris::HarrisSystem;
use crate::lattice::{Site, Window};
use crate::mc::legendre::{legendre_check_tables, LegendreReport};
use crate::mc::pilot::{pilot_mu, pilot_theta_frac};
use crate::mc::rates::{rate_table_k, rate_table_psi, RateFunctionTable, LIMIT_METHOD};
use crate::mc::sampling::{mu_from_blocks, sigma_blocks, Conditioned, MuProfile, SigmaSample};
use crate::mc::section5::{section5_bound, speed_probability};
use crate::mc::shape::{shape_report, CONTAINMENTS};
use crate::mc::tails::{deviation_tail, progeny_measure_tail, Direction, TailCell, TailReport};
use crate::rng::replica_seed;
use crate::stats::binomial;

const SALT_SIMULATE: u32 = 0x5100;
const SALT_BLOCKS: u32 = 0xB100;
const SALT_DERIVED: u32 = 0xB200;

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidSpec(_) | Error::InvalidArgument(_) | Error::Json(_) => 2,
        Error::InsufficientData(_) => 3,
        _ => 4,
    }
}

pub fn error_kind(e: &Error) -> &'static str {
    match exit_code(e) {
        2 => "usage",
        3 => "insufficient-data",
        _ => "internal",
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn site_str(z: Site, d: usize) -> String {
    z.coords(d).iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRecord {
    pub name: &'static str,
    pub status: &'static str,
    pub duration_s: f64,
    pub files: Vec<String>,
    pub notes: BTreeMap<String, Value>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub threads: usize,
    pub experiments: Vec<ExperimentRecord>,
    pub status: &'static str,
    pub exit_code: i32,
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    env: Environment,
    out: PathBuf,
    sigma_cache: BTreeMap<Site, Vec<(u32, Conditioned<SigmaSample>)>>,
    mu_cache: BTreeMap<(Site, u32), f64>,
    files: Vec<String>,
    notes: BTreeMap<String, Value>,
}

impl<'a> Runner<'a> {
    fn dim(&self) -> usize {
        self.env.dim()
    }

    fn site(&self, c: &[i32]) -> Result<Site> {
        site_of(c, self.dim())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        write_csv(&self.out.join(name), header, rows)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, key: &str, v: Value) {
        self.notes.insert(key.to_string(), v);
    }

    fn blocks_for(&mut self, x: Site) -> Result<&[(u32, Conditioned<SigmaSample>)]> {
        if !self.sigma_cache.contains_key(&x) {
            let b = sigma_blocks(&self.env, x, &self.cfg.mc.n_list, &self.cfg.mc)?;
            self.sigma_cache.insert(x, b);
        }
        Ok(&self.sigma_cache[&x])
    }

    fn pilot(&mut self, x: Site, n: u32) -> Result<f64> {
        if let Some(&m) = self.mu_cache.get(&(x, n)) {
            return Ok(m);
        }
        let m = pilot_mu(&self.env, x, n, &self.cfg.mc)?.value;
        self.mu_cache.insert((x, n), m);
        Ok(m)
    }

    fn simulate(&mut self) -> Result<()> {
        let p = &self.cfg.simulate;
        let a = Configuration::new(p.initial.iter().map(|c| self.site(c)).collect::<Result<Vec<_>>>()?);
        let sys = HarrisSystem::new(&self.env, self.cfg.mc.window(), replica_seed(self.cfg.mc.base_seed, SALT_SIMULATE, p.replica));
        let tr = evolve(&sys, &a, p.t_end)?;
        let d = self.dim();
        let rows: Vec<Vec<String>> = tr
            .events
            .iter()
            .map(|e| {
                vec![
                    num(e.time),
                    site_str(e.site, d),
                    e.delta.to_string(),
                    format!("{:?}", e.kind).to_lowercase(),
                    e.parent.map(|q| site_str(q, d)).unwrap_or_default(),
                ]
            })
            .collect();
        self.csv("simulate_events.csv", &["time", "site", "delta", "kind", "parent"], &rows)?;
        let summary = vec![vec![
            num(tr.final_time),
            tr.final_state.len().to_string(),
            tr.extinct_at.map(num).unwrap_or_default(),
            tr.boundary_contaminated.to_string(),
            tr.events.len().to_string(),
        ]];
        self.csv("simulate_summary.csv", &["final_time", "final_count", "extinct_at", "contaminated", "events"], &summary)
    }

    fn profile(&mut self, n: u32) -> Result<MuProfile> {
        let axis = self.pilot(Site::unit(0), n)?;
        let p = if self.dim() >= 2 {
            let diag = self.pilot(Site::unit(0) + Site::unit(1), n)?;
            MuProfile::from_axis_diagonal(axis, diag)
        } else {
            MuProfile::from_axis(axis)
        };
        self.note("mu_profile", json!({"axis": p.axis, "diagonal_excess": p.diagonal_excess, "method": MuProfile::METHOD, "pilot_n": n}));
        Ok(p)
    }

    fn shape(&mut self) -> Result<()> {
        let sp = self.cfg.shape.clone();
        let profile = self.profile(sp.pilot_n)?;
        let rows = shape_report(&self.env, &sp.times, sp.eps, &profile, &self.cfg.mc)?;
        let mut out = Vec::new();
        for r in &rows {
            for (c, e) in CONTAINMENTS.iter().zip(&r.frequencies) {
                out.push(vec![
                    num(r.t),
                    c.to_string(),
                    num(e.value),
                    num(e.se),
                    e.n.to_string(),
                    e.censored.to_string(),
                    e.excluded.to_string(),
                ]);
            }
        }
        self.csv("shape.csv", &["t", "containment", "estimate", "se", "n", "censored", "excluded"], &out)
    }

    fn rate_rows(t: &RateFunctionTable) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for row in &t.cells {
            for c in row {
                rows.push(vec![
                    c.n.to_string(),
                    num(c.arg),
                    num(c.value),
                    num(c.se),
                    c.hits.to_string(),
                    c.used.to_string(),
                    c.one_sided.to_string(),
                    c.censored.to_string(),
                    c.excluded.to_string(),
                ]);
            }
        }
        for (a, e) in t.grid.iter().zip(&t.limit) {
            rows.push(vec!["limit".into(), num(*a), num(e.value), num(e.se), String::new(), e.n.to_string(), "false".into(), String::new(), String::new()]);
        }
        rows
    }

    fn legendre_rows(tag: &str, r: &LegendreReport) -> Vec<Vec<String>> {
        r.rows
            .iter()
            .map(|l| {
                vec![
                    tag.to_string(),
                    num(l.u),
                    num(l.psi),
                    num(l.psi_se),
                    num(l.transform),
                    num(l.transform_se),
                    num(l.theta_star),
                    num(l.discrepancy),
                    num(l.tolerance),
                    l.ok.to_string(),
                ]
            })
            .collect()
    }

    fn rates(&mut self) -> Result<()> {
        let rp = self.cfg.rates.clone();
        let mc = self.cfg.mc.clone();
        let x = self.site(&rp.x)?;
        let mu_pilot = self.pilot(x, rp.pilot_n)?;
        let u_grid: Vec<f64> = if mc.u_relative { mc.u_grid.iter().map(|g| g * mu_pilot).collect() } else { mc.u_grid.clone() };
        self.note("mu_pilot", json!({"x": rp.x, "n": rp.pilot_n, "value": mu_pilot}));
        self.note("limit_method", json!(LIMIT_METHOD));
        let blocks = self.blocks_for(x)?.to_vec();
        let mu = mu_from_blocks(x, &blocks, mc.ci_level)?;
        let mu_rows: Vec<Vec<String>> = mu
            .rows
            .iter()
            .map(|(n, e)| vec![n.to_string(), num(e.value), num(e.se), e.n.to_string(), e.censored.to_string(), e.excluded.to_string()])
            .collect();
        self.csv("mu.csv", &["n", "estimate", "se", "used", "censored", "excluded"], &mu_rows)?;
        let psi = rate_table_psi(x, &blocks, &u_grid, mc.ci_level)?;
        let k = rate_table_k(x, &blocks, &mc.theta_grid, mc.ci_level)?;
        let header = ["n", "", "estimate", "se", "hits", "used", "one_sided", "censored", "excluded"];
        let mut h = header;
        h[1] = "u";
        self.csv("rates_psi.csv", &h, &Self::rate_rows(&psi))?;
        h[1] = "theta";
        self.csv("rates_k.csv", &h, &Self::rate_rows(&k))?;
        let mut rows = Self::legendre_rows("limit", &legendre_check_tables(&psi, &k, None, 2.0, 0.05)?);
        let n_row = rp.legendre_n.or(mc.n_list.last().copied());
        if let Some(n) = n_row {
            let r = legendre_check_tables(&psi, &k, Some(n), 2.0, 0.05)?;
            rows.extend(Self::legendre_rows(&n.to_string(), &r));
        }
        self.csv(
            "legendre.csv",
            &["row", "u", "psi", "psi_se", "transform", "transform_se", "theta_star", "discrepancy", "tolerance", "ok"],
            &rows,
        )
    }

    fn tail_cell_row(prefix: &[String], c: &TailCell) -> Vec<String> {
        let mut r = prefix.to_vec();
        r.extend([
            num(c.scale),
            num(c.p),
            num(c.p_se),
            num(c.log_p),
            num(c.log_se),
            c.hits.to_string(),
            c.used.to_string(),
            c.one_sided.to_string(),
            c.censored.to_string(),
            c.excluded.to_string(),
        ]);
        r
    }

    fn fit_row(prefix: &[String], r: &TailReport) -> Vec<String> {
        let mut row = prefix.to_vec();
        match &r.fit {
            Some(f) => row.extend([
                num(f.slope),
                num(f.slope_se),
                num(f.slope_ci.0),
                num(f.slope_ci.1),
                num(f.intercept),
                num(f.r2),
                f.points.to_string(),
                String::new(),
            ]),
            None => {
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(r.skipped.clone().unwrap_or_default());
            }
        }
        row
    }

    fn tails(&mut self) -> Result<()> {
        let tp = self.cfg.tails.clone();
        let mc = self.cfg.mc.clone();
        let x = self.site(&tp.x)?;
        let mu = self.pilot(x, tp.pilot_n)?;
        self.note("mu_pilot", json!({"x": tp.x, "n": tp.pilot_n, "value": mu}));
        let blocks = self.blocks_for(x)?.to_vec();
        let mut cells = Vec::new();
        let mut fits = Vec::new();
        let mut skipped = Vec::new();
        for dir in [Direction::Up, Direction::Down] {
            for &eps in &mc.eps_list {
                let r = deviation_tail(&blocks, dir, eps, mu, mc.ci_level)?;
                let prefix = vec![format!("{dir:?}").to_lowercase(), num(eps)];
                cells.extend(r.cells.iter().map(|c| Self::tail_cell_row(&prefix, c)));
                let mut fp = vec!["deviation".to_string()];
                fp.extend(prefix);
                fits.push(Self::fit_row(&fp, &r));
                if let Some(s) = &r.skipped {
                    skipped.push(format!("{dir:?} eps={eps}: {s}"));
                }
            }
        }
        let cell_header = ["direction", "eps", "n", "p", "se", "log_p", "log_se", "hits", "used", "one_sided", "censored", "excluded"];
        self.csv("tails_deviation.csv", &cell_header, &cells)?;
        let px = self.site(&tp.progeny_x)?;
        let theta_frac = match tp.theta_frac {
            Some(v) => v,
            None => {
                let t_top = tp.progeny_times.iter().copied().fold(0.0, f64::max);
                let v = pilot_theta_frac(&self.env, px, t_top, tp.theta_pilot_fraction, &mc)?;
                self.note("theta_frac_pilot", json!({"t": t_top, "fraction": tp.theta_pilot_fraction, "value": v}));
                v
            }
        };
        let r = progeny_measure_tail(&self.env, px, &tp.progeny_times, theta_frac, &mc)?;
        let prefix = vec![num(theta_frac)];
        let prows: Vec<Vec<String>> = r.cells.iter().map(|c| Self::tail_cell_row(&prefix, c)).collect();
        self.csv(
            "tails_progeny.csv",
            &["theta_frac", "t", "p", "se", "log_p", "log_se", "hits", "used", "one_sided", "censored", "excluded"],
            &prows,
        )?;
        fits.push(Self::fit_row(&["progeny".into(), String::new(), num(theta_frac)], &r));
        if let Some(s) = &r.skipped {
            skipped.push(format!("progeny: {s}"));
        }
        self.csv(
            "tails_fit.csv",
            &["tail", "direction", "param", "slope", "slope_se", "ci_low", "ci_high", "intercept", "r2", "points", "skipped"],
            &fits,
        )?;
        if !skipped.is_empty() {
            return Err(Error::InsufficientData(format!("tail fits skipped: {}", skipped.join("; "))));
        }
        Ok(())
    }

    fn blocks(&mut self) -> Result<()> {
        let bp = self.cfg.blocks.clone();
        let d = self.dim();
        let base = self.cfg.mc.base_seed;
        let mut life_rows = Vec::new();
        let mut cd_rows = Vec::new();
        for (pi, &p) in bp.p_list.iter().enumerate() {
            let salt = SALT_BLOCKS + pi as u32;
            let fields: Vec<_> = (0..bp.fields as u64)
                .into_par_iter()
                .map(|i| bernoulli_field(p, bp.depth, bp.width, d, replica_seed(base, salt, i)))
                .collect::<Result<Vec<_>>>()?;
            let lifetimes: Vec<usize> = fields
                .iter()
                .map(|f| match op_lifetime(f, Site::ORIGIN) {
                    OpLifetime::Finite(n) => n,
                    OpLifetime::AliveAtDepth => bp.depth,
                })
                .collect();
            for k in 1..=bp.depth {
                let (q, se) = binomial(lifetimes.iter().filter(|&&n| n >= k).count(), lifetimes.len());
                life_rows.push(vec![num(p), k.to_string(), num(q), num(se), lifetimes.len().to_string()]);
            }
            if fields.len() >= MIN_ENSEMBLE {
                let r = class_cd_diagnostic(&fields, 2, p, 100, self.cfg.mc.ci_level)?;
                for s in &r.strata {
                    cd_rows.push(vec![
                        num(p),
                        s.tracked.to_string(),
                        s.open_in.to_string(),
                        s.far_open.to_string(),
                        s.count.to_string(),
                        num(s.frequency),
                        num(s.se),
                    ]);
                }
            }
        }
        self.csv("blocks_lifetime.csv", &["p", "level", "survival", "se", "fields"], &life_rows)?;
        if cd_rows.is_empty() {
            self.note("class_diagnostic", json!(format!("skipped: needs at least {MIN_ENSEMBLE} fields")));
        } else {
            self.csv("blocks_cd.csv", &["p", "tracked", "open_in", "far_open", "count", "frequency", "se"], &cd_rows)?;
        }
        if let Some(params) = self.cfg.block_params {
            let depth = bp.derived_depth;
            let l = params.l as i64;
            let radius = (2 * l * depth as i64 + i64::from(params.containment_radius()) + l + 2) as u32;
            let window = Window::new(radius, depth as f64 * params.block_time() + 1.0)?;
            let env = &self.env;
            let rows: Vec<Vec<Vec<String>>> = (0..bp.derived_replicas as u64)
                .into_par_iter()
                .map(|i| {
                    let sys = HarrisSystem::new(env, window, replica_seed(base, SALT_DERIVED, i));
                    let m = macroscopic_field(&sys, &params, Site::unit(0).scaled(2 * params.l as i32), depth)?;
                    Ok(m.field
                        .rows()
                        .filter(|r| m.field.is_tracked(r.0, r.1))
                        .map(|(n, z, step, open)| vec![i.to_string(), n.to_string(), site_str(z, d), site_str(step, d), open.to_string()])
                        .collect())
                })
                .collect::<Result<Vec<_>>>()?;
            let flat: Vec<Vec<String>> = rows.into_iter().flatten().collect();
            self.csv("blocks_derived.csv", &["replica", "level", "box", "step", "open"], &flat)?;
        }
        Ok(())
    }

    fn duality(&mut self) -> Result<()> {
        let dp = self.cfg.duality.clone();
        let a = Configuration::new(dp.initial.iter().map(|c| self.site(c)).collect::<Result<Vec<_>>>()?);
        let window = Window::new(dp.radius, dp.t.max(f64::MIN_POSITIVE))?;
        let d = self.dim();
        let mut rows = Vec::new();
        for (j, c) in dp.targets.iter().enumerate() {
            let x = self.site(c)?;
            let seed = replica_seed(self.cfg.mc.base_seed, 0xD0, j as u64);
            let r = dual_hit_probability(&self.env, window, &a, x, dp.t, dp.replicas, seed)?;
            rows.push(vec![
                site_str(x, d),
                num(dp.t),
                num(r.forward.value),
                num(r.forward.se),
                num(r.dual.value),
                num(r.dual.se),
                r.pathwise_mismatches.to_string(),
                dp.replicas.to_string(),
            ]);
        }
        self.csv("duality.csv", &["x", "t", "forward", "forward_se", "dual", "dual_se", "pathwise_mismatches", "replicas"], &rows)
    }

    fn section5(&mut self) -> Result<()> {
        let sp = self.cfg.section5.clone();
        let spec = self.env.spec().clone();
        let mut rows = Vec::new();
        for &k in &sp.norms {
            let x = Site::unit(0).scaled(k as i32);
            let bound = section5_bound(spec.dim, spec.lambda_min, spec.lambda_max, sp.s, sp.t, x)?;
            let e = speed_probability(&self.env, x, sp.s, sp.t, sp.replicas, self.cfg.mc.base_seed, self.cfg.mc.growth, self.cfg.mc.margin)?;
            rows.push(vec![
                k.to_string(),
                num(sp.s),
                num(sp.t),
                num(bound),
                num(e.value),
                num(e.se),
                (e.value + 3.0 * e.se >= bound).to_string(),
                e.excluded.to_string(),
            ]);
        }
        self.csv("section5.csv", &["norm1", "s", "t", "bound", "estimate", "se", "consistent", "excluded"], &rows)
    }

    fn run_one(&mut self, e: Experiment) -> Result<()> {
        match e {
            Experiment::Simulate => self.simulate(),
            Experiment::Shape => self.shape(),
            Experiment::Rates => self.rates(),
            Experiment::Tails => self.tails(),
            Experiment::Blocks => self.blocks(),
            Experiment::Duality => self.duality(),
            Experiment::Section5 => self.section5(),
            Experiment::ReportAll => Ok(()),
        }
    }
}

/// Runs every planned experiment and writes `manifest.json`. Stops at the
/// first failing experiment; the manifest then carries the error record.
pub fn run(cfg: &RunConfig, threads: usize) -> (Manifest, Result<()>) {
    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        threads,
        experiments: Vec::new(),
        status: "ok",
        exit_code: 0,
    };
    let result = run_inner(cfg, &mut manifest);
    if let Err(e) = &result {
        manifest.status = error_kind(e);
        manifest.exit_code = exit_code(e);
    }
    let written = std::fs::create_dir_all(&cfg.output_dir)
        .map_err(Error::from)
        .and_then(|_| Ok(serde_json::to_string_pretty(&manifest)?))
        .and_then(|s| Ok(std::fs::write(cfg.output_dir.join("manifest.json"), s + "\n")?));
    let result = result.and(written);
    (manifest, result)
}

fn run_inner(cfg: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let env = sample_environment(&cfg.environment, &cfg.mc.window(), cfg.environment_seed)?;
    let mut r = Runner {
        cfg,
        env,
        out: cfg.output_dir.clone(),
        sigma_cache: BTreeMap::new(),
        mu_cache: BTreeMap::new(),
        files: Vec::new(),
        notes: BTreeMap::new(),
    };
    for e in cfg.planned() {
        let start = Instant::now();
        let res = r.run_one(e);
        manifest.experiments.push(ExperimentRecord {
            name: e.name(),
            status: match &res {
                Ok(()) => "ok",
                Err(err) => error_kind(err),
            },
            duration_s: start.elapsed().as_secs_f64(),
            files: std::mem::take(&mut r.files),
            notes: std::mem::take(&mut r.notes),
            error: res.as_ref().err().map(|err| err.to_string()),
        });
        res?;
    }
    Ok(())
}
