//! INI-style run configuration.
//!
//! ```text
//! [run]
//! operator = k-hessian:k=2,n=2     # required
//! domain = unit-disk               # required
//! h = 0.015625
//! seed = 0
//! output = out
//!
//! [solver]
//! tol = 1e-9
//! max_iterations = 60
//! shrink = 0.5
//! cone_margin = 1e-8
//! delta_reg = 1e-10
//!
//! [eigen]
//! tol_eig = 1e-9
//! inner_tol = 1e-11
//! max_refine = 200
//! blowup_cap = 10000.0
//! max_continuation = 200
//! ```
//!
//! Every key except `operator` and `domain` is optional. Unknown sections or
//! keys and out-of-range values are all reported together.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use ini::Ini;
use serde::Serialize;

use crate::eigen::EigenOptions;
use crate::error::{Error, Result};
use crate::grid::DomainSpec;
use crate::newton::NewtonOptions;
use crate::operators::HessianOperator;

pub const DEFAULT_H: f64 = 1.0 / 64.0;
pub const DEFAULT_OUTPUT: &str = "out";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub operator: HessianOperator,
    pub domain: DomainSpec,
    pub h: f64,
    pub seed: u64,
    pub output: PathBuf,
    pub solver: NewtonOptions,
    pub eigen: EigenOptions,
}

impl RunConfig {
    pub fn new(operator: HessianOperator, domain: DomainSpec) -> Self {
        Self {
            operator,
            domain,
            h: DEFAULT_H,
            seed: 0,
            output: PathBuf::from(DEFAULT_OUTPUT),
            solver: NewtonOptions::default(),
            eigen: EigenOptions::default(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.operator.dim() != 2 {
            errs.push(format!("run.operator must have n = 2 for grid runs, got {}", self.operator));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            errs.push(format!("run.h must be > 0, got {}", self.h));
        }
        if let Err(e) = self.domain.validate() {
            errs.push(format!("run.domain: {e}"));
        }
        errs.extend(self.solver.validate());
        errs.extend(self.eigen.validate());
        errs
    }

    /// Canonical text form; `parse_config(cfg.to_text()) == cfg`.
    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let e = &self.eigen;
        let mut out = String::new();
        let _ = writeln!(out, "[run]");
        let _ = writeln!(out, "operator = {}", self.operator);
        let _ = writeln!(out, "domain = {}", self.domain);
        let _ = writeln!(out, "h = {:?}", self.h);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "output = {}", self.output.display());
        let _ = writeln!(out, "\n[solver]");
        let _ = writeln!(out, "tol = {:?}", s.tol);
        let _ = writeln!(out, "max_iterations = {}", s.max_iterations);
        let _ = writeln!(out, "shrink = {:?}", s.shrink);
        let _ = writeln!(out, "cone_margin = {:?}", s.cone_margin);
        let _ = writeln!(out, "delta_reg = {:?}", s.delta_reg);
        let _ = writeln!(out, "\n[eigen]");
        let _ = writeln!(out, "tol_eig = {:?}", e.tol_eig);
        let _ = writeln!(out, "inner_tol = {:?}", e.inner_tol);
        let _ = writeln!(out, "max_refine = {}", e.max_refine);
        let _ = writeln!(out, "blowup_cap = {:?}", e.blowup_cap);
        let _ = writeln!(out, "max_continuation = {}", e.max_continuation);
        out
    }
}

fn set<T: FromStr>(errs: &mut Vec<String>, key: &str, raw: &str, slot: &mut T) {
    match raw.trim().parse() {
        Ok(v) => *slot = v,
        Err(_) => errs.push(format!("{key}: cannot parse '{raw}'")),
    }
}

/// Drops `# …` and `; …` tails that follow whitespace.
fn strip_inline_comments(text: &str) -> String {
    text.lines()
        .map(|line| {
            let cut = line
                .char_indices()
                .find(|&(i, c)| (c == '#' || c == ';') && i > 0 && line[..i].ends_with(char::is_whitespace))
                .map_or(line.len(), |(i, _)| i);
            line[..cut].trim_end()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let text = strip_inline_comments(text);
    let ini = Ini::load_from_str_noescape(&text).map_err(|e| Error::Config(e.to_string()))?;
    let mut errs = Vec::new();
    // Outer None: key absent; inner None: present but invalid.
    let mut operator: Option<Option<HessianOperator>> = None;
    let mut domain: Option<Option<DomainSpec>> = None;
    let mut cfg = RunConfig::new(HessianOperator::k_hessian(1, 2)?, DomainSpec::unit_square());

    for (section, props) in ini.iter() {
        for (key, raw) in props.iter() {
            let full = format!("{}.{key}", section.unwrap_or(""));
            match (section, key) {
                (Some("run"), "operator") => {
                    operator =
                        Some(raw.parse::<HessianOperator>().map_err(|e| errs.push(format!("run.operator: {e}"))).ok())
                }
                (Some("run"), "domain") => {
                    domain = Some(raw.parse::<DomainSpec>().map_err(|e| errs.push(format!("run.domain: {e}"))).ok())
                }
                (Some("run"), "h") => set(&mut errs, &full, raw, &mut cfg.h),
                (Some("run"), "seed") => set(&mut errs, &full, raw, &mut cfg.seed),
                (Some("run"), "output") => cfg.output = PathBuf::from(raw.trim()),
                (Some("solver"), "tol") => set(&mut errs, &full, raw, &mut cfg.solver.tol),
                (Some("solver"), "max_iterations") => set(&mut errs, &full, raw, &mut cfg.solver.max_iterations),
                (Some("solver"), "shrink") => set(&mut errs, &full, raw, &mut cfg.solver.shrink),
                (Some("solver"), "cone_margin") => set(&mut errs, &full, raw, &mut cfg.solver.cone_margin),
                (Some("solver"), "delta_reg") => set(&mut errs, &full, raw, &mut cfg.solver.delta_reg),
                (Some("eigen"), "tol_eig") => set(&mut errs, &full, raw, &mut cfg.eigen.tol_eig),
                (Some("eigen"), "inner_tol") => set(&mut errs, &full, raw, &mut cfg.eigen.inner_tol),
                (Some("eigen"), "max_refine") => set(&mut errs, &full, raw, &mut cfg.eigen.max_refine),
                (Some("eigen"), "blowup_cap") => set(&mut errs, &full, raw, &mut cfg.eigen.blowup_cap),
                (Some("eigen"), "max_continuation") => set(&mut errs, &full, raw, &mut cfg.eigen.max_continuation),
                (None, _) => errs.push(format!("key '{key}' outside any section")),
                _ => errs.push(format!("unknown key {full}")),
            }
        }
    }
    match operator {
        Some(Some(op)) => cfg.operator = op,
        Some(None) => {}
        None => errs.push("run.operator is required".into()),
    }
    match domain {
        Some(Some(d)) => cfg.domain = d,
        Some(None) => {}
        None => errs.push("run.domain is required".into()),
    }
    if errs.is_empty() {
        errs = cfg.validate();
    } else {
        errs.extend(
            cfg.validate().into_iter().filter(|e| !e.starts_with("run.operator") && !e.starts_with("run.domain")),
        );
    }
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Validation(errs))
    }
}
