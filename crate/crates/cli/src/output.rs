//! Artifact writers. CSV files start with a `#` comment line carrying the
//! config hash; JSON files carry it as their first field.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dei_core::analytics::{stars, RatioReport, RegressionMethod};
use dei_core::econometrics::{InnovationKind, Selection};
use dei_core::factor::order_by_uniqueness;
use dei_core::index::GLOBAL;
use dei_core::portfolio::FrontierPoint;
use dei_core::FactorModel;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{RunConfig, Stage};
use crate::stages::{
    criterion_label, FitStage, FrontierStage, IndexStage, OptionsStage, RegressionRow, SimulateStage,
    TransformStage,
};

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NA".into()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

pub struct Writer<'a> {
    pub dir: &'a Path,
    pub cfg: &'a RunConfig,
    pub written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    pub fn new(dir: &'a Path, cfg: &'a RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, cfg, written: Vec::new() })
    }

    fn put(&mut self, name: &str, body: String) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(&mut self, stage: Stage, name: &str, comments: &[String], header: &[String], rows: Vec<Vec<String>>) -> Result<()> {
        let mut body = format!("# config-sha256 {} ({})\n", self.cfg.stage_hash(stage), stage.name());
        for c in comments {
            body.push_str(&format!("# {c}\n"));
        }
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        body.push_str(&String::from_utf8(w.into_inner()?)?);
        self.put(name, body)
    }

    pub fn json<T: Serialize>(&mut self, stage: Stage, name: &str, value: &T) -> Result<()> {
        let mut doc = Map::new();
        doc.insert("config_sha256".into(), Value::String(self.cfg.stage_hash(stage)));
        doc.insert("stage".into(), Value::String(stage.name().into()));
        match serde_json::to_value(value)? {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.put(name, text)
    }

    /// The resolved config and its full hash.
    pub fn config(&mut self) -> Result<()> {
        let mut doc = Map::new();
        doc.insert("config_sha256".into(), Value::String(self.cfg.hash(None)));
        doc.insert("config".into(), Value::Object(self.cfg.to_document()));
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.put("config.json", text)
    }
}

fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn index(w: &mut Writer, st: &IndexStage) -> Result<()> {
    let panel = &st.panel;
    let gdp = panel.gdp_index()?;
    let mut rows = Vec::new();
    for s in &st.build.deis {
        let c = panel.country_index(&s.country).expect("DEI country is in the panel");
        for (i, year) in s.years().enumerate() {
            rows.push(vec![
                s.country.clone(),
                year.to_string(),
                opt(st.build.ei.get(c, year)),
                opt(panel.get(c, gdp, year)),
                num(s.values[i]),
            ]);
        }
    }
    let g = &st.build.global;
    for (i, year) in g.years().enumerate() {
        rows.push(vec![GLOBAL.into(), year.to_string(), "NA".into(), "NA".into(), num(g.values[i])]);
    }
    let mut comments = Vec::new();
    if !st.build.dropped.is_empty() {
        comments.push(format!("dropped: {}", st.build.dropped.join(" ")));
    }
    if !st.floors.is_empty() {
        comments.push(format!("floored cells: {}", st.floors.len()));
    }
    w.csv(Stage::Index, "index.csv", &comments, &strs(&["country", "year", "ei", "gdp", "dei"]), rows)
}

pub fn transform(w: &mut Writer, cfg: &RunConfig, t: &TransformStage) -> Result<()> {
    let mut rows = Vec::new();
    for ((s, p), r) in t.series.iter().zip(&t.params).zip(&t.returns) {
        for (i, year) in s.years().enumerate() {
            let ret = if i == 0 { "NA".into() } else { num(r.values[i - 1]) };
            rows.push(vec![s.country.clone(), year.to_string(), num(p.apply(s.values[i])), ret]);
        }
    }
    w.csv(
        Stage::Transform,
        "transform.csv",
        &[],
        &strs(&["country", "year", "f_dei", "log_return"]),
        rows,
    )?;
    let maps: Vec<Value> = t
        .series
        .iter()
        .zip(&t.params)
        .map(|(s, p)| json!({"country": s.country, "a": p.a, "ln_a": p.ln_a, "b": p.b, "eps_min": p.eps_min}))
        .collect();
    w.json(Stage::Transform, "transform.json", &json!({"scope": cfg.transform_scope, "maps": maps}))
}

fn law(kind: InnovationKind) -> &'static str {
    match kind {
        InnovationKind::Normal => "normal",
        InnovationKind::Nig => "nig",
    }
}

pub fn fit(w: &mut Writer, cfg: &RunConfig, f: &FitStage) -> Result<()> {
    let mut rows = Vec::new();
    for (kind, sels) in [(InnovationKind::Normal, &f.normal), (InnovationKind::Nig, &f.nig)] {
        for (country, sel) in f.countries.iter().zip(sels.iter()) {
            for (family, m) in &sel.fits {
                rows.push(vec![
                    country.clone(),
                    law(kind).into(),
                    family.label().into(),
                    m.as_ref().map_or("NA".into(), |m| m.k.to_string()),
                    opt(m.as_ref().map(|m| m.log_likelihood)),
                    opt(m.as_ref().map(|m| m.aic)),
                    opt(m.as_ref().map(|m| m.bic)),
                    (sel.family == *family).to_string(),
                ]);
            }
        }
    }
    let comment = format!("selected = lowest {}", criterion_label(cfg.criterion));
    w.csv(
        Stage::Fit,
        "criteria.csv",
        &[comment],
        &strs(&["country", "innovation", "family", "k", "log_likelihood", "aic", "bic", "selected"]),
        rows,
    )?;
    #[derive(Serialize)]
    struct Entry<'a> {
        country: &'a str,
        normal: &'a Selection,
        nig: &'a Selection,
    }
    let entries: Vec<Entry> = f
        .countries
        .iter()
        .zip(f.normal.iter().zip(&f.nig))
        .map(|(c, (n, g))| Entry { country: c, normal: n, nig: g })
        .collect();
    w.json(
        Stage::Fit,
        "models.json",
        &json!({"downstream_innovation": law(f.innovation), "seed": cfg.seed, "series": entries}),
    )
}

pub fn simulate(w: &mut Writer, s: &SimulateStage) -> Result<()> {
    let sc = &s.scenarios;
    let mut rows = Vec::with_capacity(sc.returns.len());
    for i in 0..sc.n_scenarios() {
        for (j, c) in sc.countries.iter().enumerate() {
            rows.push(vec![(i + 1).to_string(), c.clone(), num(sc.returns[(i, j)])]);
        }
    }
    w.csv(Stage::Simulate, "scenarios.csv", &[], &strs(&["scenario", "country", "return"]), rows)?;
    w.json(Stage::Simulate, "scenarios.json", &json!({"summary": sc.summary(), "law": s.spec}))
}

pub fn regress(w: &mut Writer, rows: &[RegressionRow]) -> Result<()> {
    let out = rows
        .iter()
        .map(|r| {
            let x = &r.result;
            vec![
                r.country.clone(),
                match x.method {
                    RegressionMethod::Ols => "ols".into(),
                    RegressionMethod::RobustIrls => "robust-irls".into(),
                },
                num(x.alpha),
                num(x.alpha_p),
                stars(x.alpha_p).into(),
                num(x.beta),
                num(x.beta_p),
                stars(x.beta_p).into(),
                num(x.adj_r2),
                x.n.to_string(),
            ]
        })
        .collect();
    w.csv(
        Stage::Regress,
        "regression.csv",
        &["response: country log return; regressor: GLOBAL log return".into(),
          "stars: * p<0.05, ** p<0.01, *** p<0.001; IRLS p-values are approximate".into()],
        &strs(&[
            "country", "method", "alpha", "alpha_p", "alpha_sig", "beta", "beta_p", "beta_sig", "adj_r2", "n",
        ]),
        out,
    )
}

pub fn metrics(w: &mut Writer, reports: &[RatioReport]) -> Result<()> {
    let rows = reports
        .iter()
        .map(|r| {
            vec![
                r.country.clone(),
                opt(r.sharpe),
                opt(r.sortino),
                opt(r.rachev),
                opt(r.jensen_alpha),
                opt(r.jensen_alpha_p),
                r.jensen_alpha_p.map_or("".into(), |p| stars(p).to_string()),
                opt(r.jensen_beta),
                num(r.var),
                num(r.cvar),
            ]
        })
        .collect();
    let (rf, level) = reports.first().map_or((0.0, 0.0), |r| (r.rf, r.tail_level));
    w.csv(
        Stage::Metrics,
        "metrics.csv",
        &[format!("rf = {}, tail level = {}", num(rf), num(level))],
        &strs(&[
            "country", "sharpe", "sortino", "rachev", "jensen_alpha", "jensen_alpha_p", "jensen_alpha_sig",
            "jensen_beta", "var", "cvar",
        ]),
        rows,
    )
}

fn frontier_rows(points: &[FrontierPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            let mut r = vec![num(p.gamma), num(p.expected_return), num(p.risk)];
            r.extend(p.weights.iter().map(|w| num(*w)));
            r
        })
        .collect()
}

pub fn frontier(w: &mut Writer, f: &FrontierStage) -> Result<()> {
    let mut header = strs(&["gamma", "expected_return", "risk"]);
    header.extend((1..=f.countries.len()).map(|i| format!("w_{i}")));
    let assets = format!("assets: {}", f.countries.join(" "));
    for (name, points) in [("frontier_variance.csv", &f.variance), ("frontier_cvar.csv", &f.cvar)] {
        let mut comments = vec![assets.clone()];
        if let Some(p) = points.first() {
            comments.push(format!("risk: {}", p.risk_measure.label()));
        }
        if points.iter().any(|p| p.ridge) {
            comments.push("ridge added to a singular covariance".into());
        }
        w.csv(Stage::Frontier, name, &comments, &header, frontier_rows(points))?;
    }
    Ok(())
}

pub fn options(w: &mut Writer, o: &OptionsStage) -> Result<()> {
    let rows = o
        .surface
        .cells
        .iter()
        .map(|c| {
            vec![
                c.maturity.to_string(),
                num(c.strike),
                num(c.moneyness),
                num(c.call),
                num(c.put),
                num(c.call_se),
                num(c.put_se),
                c.implied_vol.label(),
            ]
        })
        .collect();
    w.csv(
        Stage::Options,
        "options.csv",
        &[format!("underlying: {GLOBAL}, S0 = {}, paths = {}", num(o.job.s0), o.job.n_paths)],
        &strs(&["T", "K", "moneyness", "call", "put", "call_se", "put_se", "implied_vol"]),
        rows,
    )?;
    w.json(Stage::Options, "pricing_model.json", &o.job)
}

pub fn factors(w: &mut Writer, f: &FactorModel) -> Result<()> {
    let mut header = vec!["country".to_string()];
    header.extend((1..=f.m).map(|j| format!("beta{j}")));
    header.push("sigma2".into());
    let rows: Vec<Vec<String>> = f
        .countries
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut r = vec![c.clone()];
            r.extend(f.loadings[i].iter().map(|v| num(*v)));
            r.push(num(f.uniquenesses[i]));
            r
        })
        .collect();
    let comment = format!(
        "lr_statistic = {}, df = {}, p-value = {}",
        num(f.lr_statistic),
        f.lr_df,
        opt(f.lr_pvalue)
    );
    w.csv(Stage::Factors, "factors.csv", &[comment], &header, rows)?;

    let order = order_by_uniqueness(f);
    let mut header = vec!["country".to_string(), "rank".to_string()];
    header.extend((1..=f.m).map(|j| format!("factor{j}")));
    header.push("uniqueness".into());
    let rows = order
        .iter()
        .enumerate()
        .map(|(rank, c)| {
            let i = f.countries.iter().position(|x| x == c).expect("ordered country exists");
            let mut r = vec![c.clone(), (rank + 1).to_string()];
            r.extend(f.loadings[i].iter().map(|v| num(*v)));
            r.push(num(f.uniquenesses[i]));
            r
        })
        .collect();
    w.csv(
        Stage::Factors,
        "loadings.csv",
        &["ordered by uniqueness, largest first".into()],
        &header,
        rows,
    )?;
    w.json(Stage::Factors, "factors.json", f)
}
