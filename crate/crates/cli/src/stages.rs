//! In-memory pipeline stages. Each takes the results it depends on and
//! returns plain data; writing files is `output`'s job.

use std::fs::File;

use anyhow::{anyhow, bail, Context, Result};
use dei_core::analytics::{self, IrlsOptions, RatioOptions, RatioReport, RegressionResult};
use dei_core::econometrics::{select_model, Criterion, FitOptions, Innovation, InnovationKind, Selection};
use dei_core::factor::{ml_factor_fit, FactorOptions};
use dei_core::index::{build_index, IndexBuild};
use dei_core::ingest::{
    default_dictionary, load_dictionary, load_panel, select_window, validate_positivity, FloorEvent,
    PositivityPolicy,
};
use dei_core::options::{price_options, simulate_risk_neutral};
use dei_core::portfolio::{default_gamma_grid, mean_cvar_frontier, mean_variance_frontier};
use dei_core::simulate::{fit_mvnig_with_fallback, sample_scenarios};
use dei_core::transform::{fit_transforms, log_returns};
use dei_core::{
    FactorModel, FittedModel, FrontierPoint, IndexSeries, IndicatorPanel, MvNigSpec, OptionSurface, PricingJob,
    PricingModel, ReturnSeries, ScenarioMatrix, TransformParams, VolFamily,
};
use nalgebra::DMatrix;

use crate::config::{PositivityMode, RunConfig};
use crate::MissingInput;

pub struct IndexStage {
    pub panel: IndicatorPanel,
    pub build: IndexBuild,
    pub floors: Vec<FloorEvent>,
}

pub fn load(cfg: &RunConfig) -> Result<(IndicatorPanel, Vec<FloorEvent>)> {
    if !cfg.panel.exists() {
        return Err(MissingInput(cfg.panel.clone()).into());
    }
    let dictionary = match &cfg.dictionary {
        Some(path) => {
            let f = File::open(path).map_err(|_| MissingInput(path.clone()))?;
            load_dictionary(f).with_context(|| format!("dictionary {}", path.display()))?
        }
        None => default_dictionary(),
    };
    let f = File::open(&cfg.panel).map_err(|_| MissingInput(cfg.panel.clone()))?;
    let mut panel =
        load_panel(f, cfg.panel_format, &dictionary).with_context(|| format!("panel {}", cfg.panel.display()))?;
    for note in &panel.diagnostics {
        log::info!("{note}");
    }
    if let Some(codes) = &cfg.countries {
        panel = panel.select_countries(codes)?;
    }
    if cfg.start_year.is_some() || cfg.end_year.is_some() {
        let start = cfg.start_year.unwrap_or(panel.first_year());
        let end = cfg.end_year.unwrap_or(panel.last_year());
        panel = select_window(&panel, start, end)?;
    }
    let policy = match cfg.positivity {
        PositivityMode::Reject => PositivityPolicy::Reject,
        PositivityMode::Floor => PositivityPolicy::Floor(cfg.floor_epsilon),
    };
    Ok(validate_positivity(&panel, policy)?)
}

pub fn index(cfg: &RunConfig) -> Result<IndexStage> {
    let (panel, floors) = load(cfg)?;
    let build = build_index(&panel, cfg.gdp_policy)?;
    for (country, year) in &build.excluded {
        log::warn!("{country} {year}: excluded from normalization (missing indicator)");
    }
    for country in &build.dropped {
        log::warn!("{country}: dropped from the DEI set");
    }
    Ok(IndexStage { panel, build, floors })
}

/// Country DEIs followed by the global index, with their maps and returns.
pub struct TransformStage {
    pub series: Vec<IndexSeries>,
    pub params: Vec<TransformParams>,
    pub returns: Vec<ReturnSeries>,
}

impl TransformStage {
    /// Country columns only (the global series is last).
    pub fn countries(&self) -> &[ReturnSeries] {
        &self.returns[..self.returns.len() - 1]
    }

    pub fn global(&self) -> &ReturnSeries {
        self.returns.last().expect("global series present")
    }

    pub fn country_matrix(&self) -> DMatrix<f64> {
        let cols = self.countries();
        let n = cols[0].values.len();
        DMatrix::from_fn(n, cols.len(), |i, j| cols[j].values[i])
    }
}

pub fn transform(cfg: &RunConfig, index: &IndexStage) -> Result<TransformStage> {
    let mut series = index.build.deis.clone();
    series.push(index.build.global.clone());
    let params = fit_transforms(&series, cfg.transform_scope, cfg.eps_min)?;
    let returns = series
        .iter()
        .zip(&params)
        .map(|(s, p)| log_returns(s, p))
        .collect::<dei_core::Result<Vec<_>>>()?;
    Ok(TransformStage { series, params, returns })
}

/// Per series (countries then global), both innovation laws.
pub struct FitStage {
    pub countries: Vec<String>,
    pub normal: Vec<Selection>,
    pub nig: Vec<Selection>,
    pub innovation: InnovationKind,
}

impl FitStage {
    /// The selections passed downstream.
    pub fn chosen(&self) -> &[Selection] {
        match self.innovation {
            InnovationKind::Normal => &self.normal,
            InnovationKind::Nig => &self.nig,
        }
    }

    pub fn country_models(&self) -> Vec<FittedModel> {
        let c = self.chosen();
        c[..c.len() - 1].iter().map(|s| s.model.clone()).collect()
    }
}

fn fit_options(cfg: &RunConfig, innovation: InnovationKind) -> FitOptions {
    FitOptions {
        mean_form: cfg.mean_form,
        innovation,
        restarts: cfg.fit_restarts,
        seed: cfg.seed,
    }
}

pub fn fit(cfg: &RunConfig, t: &TransformStage) -> Result<FitStage> {
    let mut normal = Vec::new();
    let mut nig = Vec::new();
    for r in &t.returns {
        for (kind, out) in [(InnovationKind::Normal, &mut normal), (InnovationKind::Nig, &mut nig)] {
            let sel = select_model(&r.values, cfg.criterion, &fit_options(cfg, kind))
                .with_context(|| format!("series {}", r.country))?;
            out.push(sel);
        }
    }
    Ok(FitStage {
        countries: t.returns.iter().map(|r| r.country.clone()).collect(),
        normal,
        nig,
        innovation: cfg.innovation,
    })
}

pub struct SimulateStage {
    pub spec: MvNigSpec,
    pub scenarios: ScenarioMatrix,
}

pub fn simulate(cfg: &RunConfig, fit: &FitStage) -> Result<SimulateStage> {
    let models = fit.country_models();
    let names = fit.countries[..models.len()].to_vec();
    let n = models[0].residuals.len();
    let residuals = DMatrix::from_fn(n, models.len(), |i, j| models[j].residuals[i]);
    let fallback: Vec<_> = models
        .iter()
        .map(|m| match m.innovation {
            Innovation::Nig(p) => Some(p),
            Innovation::Normal => None,
        })
        .collect();
    let spec = fit_mvnig_with_fallback(&residuals, names, &fallback)?;
    if spec.repaired {
        log::warn!("residual correlation projected onto the PSD cone");
    }
    for c in &spec.fallback {
        log::warn!("{c}: residual NIG fit failed, using the fitted model's innovation law");
    }
    let scenarios = sample_scenarios(&spec, &models, cfg.scenarios, cfg.seed)?;
    Ok(SimulateStage { spec, scenarios })
}

pub struct RegressionRow {
    pub country: String,
    pub result: RegressionResult,
}

/// Each country's returns on the global returns, by OLS and by IRLS.
pub fn regress(t: &TransformStage) -> Result<Vec<RegressionRow>> {
    let x = &t.global().values;
    let mut rows = Vec::new();
    for r in t.countries() {
        let ctx = || format!("country {}", r.country);
        let ols = analytics::ols(&r.values, x).with_context(ctx)?;
        let rob = analytics::robust_regress(&r.values, x, &IrlsOptions::default()).with_context(ctx)?;
        if !rob.converged {
            log::warn!("{}: IRLS hit its iteration cap", r.country);
        }
        rows.push(RegressionRow { country: r.country.clone(), result: ols });
        rows.push(RegressionRow { country: r.country.clone(), result: rob });
    }
    Ok(rows)
}

pub fn metrics(cfg: &RunConfig, t: &TransformStage) -> Result<Vec<RatioReport>> {
    let opts = RatioOptions {
        rf: cfg.rf,
        rachev_alpha: cfg.rachev_alpha,
        rachev_beta: cfg.rachev_beta,
        tail_level: cfg.tail_level,
    };
    let market = &t.global().values;
    t.returns
        .iter()
        .map(|r| {
            let m = (r.country != dei_core::index::GLOBAL).then_some(market.as_slice());
            analytics::ratio_report(&r.country, &r.values, m, &opts).with_context(|| format!("country {}", r.country))
        })
        .collect()
}

pub struct FrontierStage {
    pub countries: Vec<String>,
    pub variance: Vec<FrontierPoint>,
    pub cvar: Vec<FrontierPoint>,
}

pub fn frontier(cfg: &RunConfig, sim: &SimulateStage) -> Result<FrontierStage> {
    let gammas = cfg.gamma_grid.clone().unwrap_or_else(default_gamma_grid);
    let data = &sim.scenarios.returns;
    let variance = mean_variance_frontier(data, &gammas, cfg.long_only).context("mean-variance frontier")?;
    let cvar = mean_cvar_frontier(data, cfg.cvar_level, &gammas, cfg.long_only).context("mean-CVaR frontier")?;
    Ok(FrontierStage {
        countries: sim.scenarios.countries.clone(),
        variance,
        cvar,
    })
}

pub struct OptionsStage {
    pub job: PricingJob,
    pub surface: OptionSurface,
}

/// Prices options on the global index with its GARCH11-NIG fit.
pub fn options(cfg: &RunConfig, t: &TransformStage, fit: &FitStage) -> Result<OptionsStage> {
    let global = fit.nig.last().expect("global fit present");
    let model = global
        .fits
        .iter()
        .find(|(f, _)| *f == VolFamily::Garch11)
        .and_then(|(_, m)| m.as_ref())
        .ok_or_else(|| anyhow!("GARCH11-NIG fit of {} failed", dei_core::index::GLOBAL))?;
    let pricing = PricingModel::from_fitted(model, cfg.lambda0)?;
    let s0 = t.series.last().expect("global series").last();
    let strikes = cfg.moneyness.iter().map(|m| s0 / m).collect();
    let job = PricingJob {
        model: pricing,
        s0,
        rf: cfg.rf_curve.clone().unwrap_or_else(|| vec![cfg.rf]),
        maturities: cfg.maturities.clone(),
        strikes,
        n_paths: cfg.paths,
        seed: cfg.seed,
        antithetic: cfg.antithetic,
    };
    let levels = simulate_risk_neutral(&job)?;
    let surface = price_options(&levels, &job)?;
    Ok(OptionsStage { job, surface })
}

/// Largest `m <= 3` with nonnegative degrees of freedom for `l` variables.
pub fn default_factor_count(l: usize) -> Option<usize> {
    (1..=3.min(l.saturating_sub(1)))
        .rev()
        .find(|&m| (l - m) * (l - m) >= l + m)
}

pub fn factors(cfg: &RunConfig, t: &TransformStage) -> Result<FactorModel> {
    let x = t.country_matrix();
    let l = x.ncols();
    let m = match cfg.factor_count {
        Some(m) => m,
        None => default_factor_count(l).ok_or_else(|| anyhow!("{l} countries admit no factor model"))?,
    };
    if m >= l {
        bail!("{m} factors for {l} countries");
    }
    let names = t.countries().iter().map(|r| r.country.clone()).collect();
    let opts = FactorOptions {
        restarts: cfg.factor_restarts,
        seed: cfg.seed,
        covariance: cfg.factor_covariance,
        varimax: cfg.varimax,
        ..FactorOptions::default()
    };
    let model = ml_factor_fit(&x, names, m, &opts)?;
    for (c, h) in model.countries.iter().zip(&model.heywood) {
        if *h {
            log::warn!("{c}: uniqueness at the floor (Heywood case)");
        }
    }
    Ok(model)
}

/// Criterion used to flag the selected family in the fit table.
pub fn criterion_label(c: Criterion) -> &'static str {
    match c {
        Criterion::Aic => "aic",
        Criterion::Bic => "bic",
    }
}
