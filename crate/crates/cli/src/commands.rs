use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};

use pathattr::data::{pseudo_observation, write_dataset};
use pathattr::fingerprint::{loo_assessment, write_fingerprint_rows, FingerprintOptions};
use pathattr::likelihood::{likelihood_curve, JointModel};
use pathattr::lrtest::{attribution_table, write_attribution_rows, AttributionRow, PathwayKind, TestContext};
use pathattr::regress::{fit_joint, fit_joint_normalized, format_report, StepModel, INTERCEPT};
use pathattr::{Error, ForcingLevel, Result};

use crate::config::Run;
use crate::source::{metric_rows, Context};

/// Destination for one command's artifacts.
pub struct Output {
    pub dir: PathBuf,
    pub command: String,
    pub hash: String,
    pub seed: u64,
    pub n_samples: u64,
    pub quiet: bool,
    written: Vec<String>,
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

impl Output {
    pub fn new(dir: PathBuf, command: &str, hash: String, seed: u64, n_samples: u64, quiet: bool) -> Result<Output> {
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Output { dir, command: command.into(), hash, seed, n_samples, quiet, written: Vec::new() })
    }

    fn preamble(&self) -> String {
        format!(
            "# pathattr {}\n# config_sha256={}\n# seed={}\n# n_samples={}\n",
            self.command, self.hash, self.seed, self.n_samples
        )
    }

    /// Write `body` to `name` behind the metadata header lines.
    pub fn table(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let mut bytes = self.preamble().into_bytes();
        bytes.extend_from_slice(body);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.written.push(name.into());
        self.say(&format!("wrote {}", path.display()));
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        self.table(name, body.as_bytes())
    }

    pub fn say(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Machine-readable summary of the command, written last.
    pub fn summary(&mut self, results: Value) -> Result<()> {
        let name = format!("{}_summary.json", self.command);
        let path = self.dir.join(&name);
        let doc = json!({
            "command": self.command,
            "config_sha256": self.hash,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "files": self.written,
            "results": results,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("summary serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        self.say(&format!("wrote {}", path.display()));
        Ok(())
    }
}

fn csv_body(header: &str, rows: &[String]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

pub fn simulate(run: &Run, out: &mut Output) -> Result<()> {
    if run.config.data.synthetic.is_none() {
        return Err(Error::Config("field `data.synthetic`: simulate needs a synthetic data source".into()));
    }
    let mut results = json!({});
    if let Some(ds) = run.synthetic_series()? {
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).map_err(io_err(&out.dir.join("series.csv")))?;
        out.table("series.csv", &buf)?;
        results["series"] = json!(ds.len());
    }
    let contexts = run.contexts()?;
    let rows = metric_rows(&contexts);
    out.text("metrics.csv", &csv_body("region,window,variable,forcing_Tg,member,value", &rows))?;
    results["metric_rows"] = json!(rows.len());
    out.summary(results)
}

pub fn metrics(run: &Run, out: &mut Output) -> Result<()> {
    let contexts = run.contexts()?;
    let rows = metric_rows(&contexts);
    out.text("metrics.csv", &csv_body("region,window,variable,forcing_Tg,member,value", &rows))?;
    let counts: Vec<Value> = contexts
        .iter()
        .map(|c| {
            json!({
                "region": c.region.name,
                "window": c.window.name,
                "members_per_level": c.table.members_per_level(),
                "forcings": c.table.forcings().iter().map(|f| f.magnitude()).collect::<Vec<_>>(),
            })
        })
        .collect();
    out.summary(json!({ "contexts": counts }))
}

/// Fitted models for one context, keyed by kind.
struct Fits {
    single: Option<JointModel>,
    multi: JointModel,
    normalized: JointModel,
}

fn fits(run: &Run, c: &Context) -> Result<Fits> {
    let with_intercept = run.config.intercepts.steps;
    let single = run
        .single_graph
        .as_ref()
        .map(|g| fit_joint(&c.table, g, &run.excluded, with_intercept))
        .transpose()?;
    let multi = fit_joint(&c.table, &run.graph, &run.excluded, with_intercept)?;
    let normalized = fit_joint_normalized(&c.table, &run.graph, &run.excluded, with_intercept)?;
    Ok(Fits { single, multi, normalized })
}

fn step_rows(c: &Context, model: &str, step: &StepModel, rows: &mut Vec<String>) {
    let prefix = format!("{},{},{},{}", c.region.name, c.window.name, model, step.target);
    let tail = format!("{:.9e},{:.6},{}", step.sigma2, step.r2, step.n_obs);
    if step.with_intercept {
        rows.push(format!(
            "{prefix},{INTERCEPT},{:.9e},{:.9e},{tail}",
            step.intercept,
            step.intercept_std_error.unwrap_or(f64::NAN)
        ));
    }
    for ((name, theta), se) in step.parents.parents.iter().zip(&step.theta).zip(&step.theta_std_errors) {
        rows.push(format!("{prefix},{name},{theta:.9e},{se:.9e},{tail}"));
    }
}

fn step_json(step: &StepModel) -> Value {
    json!({
        "target": step.target,
        "intercept": step.intercept,
        "coefficients": step.parents.parents.iter().cloned().zip(step.theta.iter().copied()).collect::<BTreeMap<_, _>>(),
        "sigma2": step.sigma2,
        "r2": step.r2,
        "n_obs": step.n_obs,
    })
}

pub fn fit(run: &Run, out: &mut Output) -> Result<()> {
    let contexts = run.contexts()?;
    let all = contexts.par_iter().map(|c| fits(run, c)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut report = String::new();
    let mut results = Vec::new();
    for (c, f) in contexts.iter().zip(&all) {
        let mut entry = json!({ "region": c.region.name, "window": c.window.name });
        let mut kinds: Vec<(&str, &JointModel)> = Vec::new();
        if let Some(s) = &f.single {
            kinds.push(("single", s));
        }
        kinds.push(("multi", &f.multi));
        kinds.push(("multi_normalized", &f.normalized));
        for (kind, model) in kinds {
            for step in &model.steps {
                step_rows(c, kind, step, &mut rows);
            }
            report.push_str(&format!("== {} / {} / {kind}\n", c.region.name, c.window.name));
            report.push_str(&format_report(model, &run.config.units));
            report.push('\n');
            entry[kind] = Value::Array(model.steps.iter().map(step_json).collect());
        }
        results.push(entry);
    }
    out.text(
        "fits.csv",
        &csv_body("region,window,model,target,term,estimate,std_error,sigma2,r2,n_obs", &rows),
    )?;
    out.text("fit_report.txt", &report)?;
    out.summary(json!({ "contexts": results }))
}

pub fn attribute(run: &Run, out: &mut Output) -> Result<()> {
    let contexts = run.contexts()?;
    let all = contexts.par_iter().map(|c| fits(run, c)).collect::<Result<Vec<_>>>()?;
    let main_kind = if run.single_graph.is_some() { PathwayKind::Multi } else { PathwayKind::Single };
    let mut jobs: Vec<(TestContext, &JointModel, &Context)> = Vec::new();
    for (c, f) in contexts.iter().zip(&all) {
        let ctx = |kind| TestContext { region: c.region.name.clone(), window: c.window.name.clone(), pathway_kind: kind };
        if let Some(s) = &f.single {
            jobs.push((ctx(PathwayKind::Single), s, c));
        }
        jobs.push((ctx(main_kind), &f.multi, c));
    }
    // pathway kind outermost, matching the layout of a region x window x null grid per pathway
    jobs.sort_by_key(|(ctx, _, _)| ctx.pathway_kind == PathwayKind::Multi);
    let tables = jobs
        .par_iter()
        .map(|(ctx, model, c)| {
            let obs = pseudo_observation(&c.table, run.observation)?;
            attribution_table(ctx, model, &run.nulls, run.alternative, &obs, run.config.n_samples, run.config.seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<AttributionRow> = tables.into_iter().flatten().collect();
    let mut buf = Vec::new();
    write_attribution_rows(&rows, &mut buf).map_err(io_err(&out.dir))?;
    out.table("attribution.csv", &buf)?;
    if !out.quiet {
        for r in &rows {
            out.say(&format!(
                "{:>6} {:>9} {:>6} f0={:>5} p={}",
                r.region,
                r.window,
                r.pathway_kind,
                r.f0,
                r.display_p()
            ));
        }
    }
    let grid: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "region": r.region,
                "window": r.window,
                "pathway_kind": r.pathway_kind,
                "f0": r.f0,
                "f1": r.f1,
                "p_value": r.display_p(),
                "exceed_count": r.exceed_count,
            })
        })
        .collect();
    out.summary(json!({
        "observation_forcing": run.observation.magnitude(),
        "alternative_forcing": run.alternative.magnitude(),
        "cells": grid,
    }))
}

pub fn fingerprint(run: &Run, out: &mut Output) -> Result<()> {
    let section = run.config.fingerprint.clone().unwrap_or_else(|| {
        toml::from_str("").expect("fingerprint defaults")
    });
    let region = run.region(&section.region)?;
    let window = run.window(&section.window)?;
    let forcings = section.forcings.iter().map(|&f| ForcingLevel::new(f)).collect::<Result<Vec<_>>>()?;
    let dataset = run.dataset(region)?;
    let options = FingerprintOptions {
        holdout_scope: section.holdout_scope,
        with_intercept: run.config.intercepts.fingerprint,
    };
    let assessment = loo_assessment(
        &dataset,
        &section.variables,
        &forcings,
        run.observation,
        window,
        section.confidence,
        options,
    )?;
    let mut buf = Vec::new();
    write_fingerprint_rows(&assessment, &mut buf).map_err(io_err(&out.dir))?;
    out.table("fingerprint.csv", &buf)?;
    let counts: BTreeMap<String, usize> = forcings
        .iter()
        .map(|f| (f.magnitude().to_string(), assessment.attribution_count(*f)))
        .collect();
    let members = assessment.fits.len();
    out.say(&format!("attributed in {members} held-out members: {counts:?}"));
    out.summary(json!({
        "region": region.name,
        "window": window.name,
        "holdout_members": members,
        "attribution_counts": counts,
        "detection_rate": assessment.detection_rate.iter().map(|(f, r)| (f.magnitude().to_string(), *r)).collect::<BTreeMap<_, _>>(),
        "attribution_rate": assessment.attribution_rate.iter().map(|(f, r)| (f.magnitude().to_string(), *r)).collect::<BTreeMap<_, _>>(),
    }))
}

pub fn curves(run: &Run, out: &mut Output) -> Result<()> {
    let forcings = match &run.config.curves {
        Some(c) => c.forcings.iter().map(|&f| ForcingLevel::new(f)).collect::<Result<Vec<_>>>()?,
        None => {
            let mut fs = run.nulls.clone();
            fs.push(run.alternative);
            fs.sort();
            fs.dedup();
            fs
        }
    };
    let contexts = run.contexts()?;
    let all = contexts.par_iter().map(|c| fits(run, c)).collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    writeln!(buf, "region,window,pathway_kind,forcing,component,log_density,extrapolated").expect("in-memory write");
    let mut maxima = Vec::new();
    for (c, f) in contexts.iter().zip(&all) {
        let obs = pseudo_observation(&c.table, run.observation)?;
        let mut kinds: Vec<(&str, &JointModel)> = Vec::new();
        if let Some(s) = &f.single {
            kinds.push(("single", s));
        }
        kinds.push((if f.single.is_some() { "multi" } else { "single" }, &f.multi));
        for (kind, model) in kinds {
            let curve = likelihood_curve(model, &obs, &forcings)?;
            curve
                .write_delimited(&mut buf, &format!("{},{},{kind}", c.region.name, c.window.name))
                .expect("in-memory write");
            maxima.push(json!({
                "region": c.region.name,
                "window": c.window.name,
                "pathway_kind": kind,
                "argmax_forcing": curve.argmax().map(|f| f.magnitude()),
            }));
        }
    }
    out.table("curves.csv", &buf)?;
    out.summary(json!({ "forcings": forcings.iter().map(|f| f.magnitude()).collect::<Vec<_>>(), "maxima": maxima }))
}
