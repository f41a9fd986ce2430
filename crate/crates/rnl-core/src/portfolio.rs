//! Global-minimum-variance portfolio construction and a monthly rolling
//! backtest on daily return panels.
//!
//! Conventions: returns are simple daily returns in decimal form
//! (`0.01` = 1%). A "month" is a block of 21 consecutive trading days.
//! Share counts are held fixed inside a month, so intra-month weights drift
//! with returns; turnover compares next month's target weights against the
//! drifted hold-over weights. SD and AV are annualized with 252 trading
//! days; MD is the maximum drawdown fraction of the cumulative wealth curve.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkit::{DataMatrix, SpdMatrix};

/// Annualization convention for daily statistics.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// A panel of daily simple returns with optional market capitalizations.
///
/// Missing returns are stored as NaN; present values must be finite. Dates
/// are ISO-8601 strings and strictly increasing.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    dates: Vec<String>,
    assets: Vec<String>,
    returns: DMatrix<f64>,
    caps: Option<DMatrix<f64>>,
}

impl ReturnPanel {
    pub fn new(dates: Vec<String>, assets: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        if returns.nrows() != dates.len() || returns.ncols() != assets.len() {
            return Err(Error::InvalidInput(format!(
                "panel shape {}x{} does not match {} dates x {} assets",
                returns.nrows(),
                returns.ncols(),
                dates.len(),
                assets.len()
            )));
        }
        if dates.is_empty() || assets.is_empty() {
            return Err(Error::InvalidInput("empty panel".into()));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidInput(format!(
                    "dates must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if returns.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidInput(
                "returns must be finite where present".into(),
            ));
        }
        Ok(Self {
            dates,
            assets,
            returns,
            caps: None,
        })
    }

    /// Attaches a capitalization matrix of identical shape (NaN = missing).
    pub fn with_caps(mut self, caps: DMatrix<f64>) -> Result<Self> {
        if caps.shape() != self.returns.shape() {
            return Err(Error::InvalidInput(
                "capitalization matrix shape differs from the return panel".into(),
            ));
        }
        if caps.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidInput(
                "capitalizations must be finite where present".into(),
            ));
        }
        self.caps = Some(caps);
        Ok(self)
    }

    pub fn days(&self) -> usize {
        self.dates.len()
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn caps(&self) -> Option<&DMatrix<f64>> {
        self.caps.as_ref()
    }
}

/// Backtest protocol parameters.
#[derive(Debug, Clone, Copy)]
pub struct BacktestConfig {
    /// Length of the estimation window in trading days.
    pub estimation_window: usize,
    /// Out-of-sample holding period in trading days.
    pub holding_period: usize,
    /// Number of assets selected each month.
    pub universe_size: usize,
    /// Maximum missing days tolerated inside the estimation window.
    pub max_missing: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            estimation_window: 252,
            holding_period: 21,
            universe_size: 100,
            max_missing: 32,
        }
    }
}

impl BacktestConfig {
    fn validate(&self) -> Result<()> {
        if self.holding_period == 0 || self.estimation_window <= self.holding_period {
            return Err(Error::InvalidInput(format!(
                "need estimation_window > holding_period >= 1, got {} and {}",
                self.estimation_window, self.holding_period
            )));
        }
        if self.universe_size < 2 {
            return Err(Error::InvalidInput("universe_size must be >= 2".into()));
        }
        Ok(())
    }
}

/// Global-minimum-variance weights `S^{-1} 1 / (1^T S^{-1} 1)`, computed via
/// a Cholesky solve. Weights sum to one; short positions are allowed.
pub fn gmv_weights(sigma: &SpdMatrix) -> Result<DVector<f64>> {
    let p = sigma.p();
    let chol = nalgebra::Cholesky::new(sigma.values().clone())
        .ok_or_else(|| Error::Estimation("covariance factorization failed".into()))?;
    let x = chol.solve(&DVector::from_element(p, 1.0));
    let total = x.sum();
    if !(total.is_finite() && total != 0.0) {
        return Err(Error::Estimation(
            "minimum-variance weights are undefined (1^T S^{-1} 1 = 0)".into(),
        ));
    }
    Ok(x / total)
}

/// Hold-over weights after a month of returns with fixed share counts:
/// `w_j * alpha_j / sum_k w_k * alpha_k` with `alpha_j` the compounded gross
/// return of asset `j` over the month's rows.
pub fn drift_weights(weights: &[f64], month_returns: &DMatrix<f64>) -> Result<Vec<f64>> {
    if month_returns.ncols() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} assets",
            weights.len(),
            month_returns.ncols()
        )));
    }
    let alphas: Vec<f64> = (0..weights.len())
        .map(|j| {
            month_returns
                .column(j)
                .iter()
                .fold(1.0, |acc, &r| acc * (1.0 + r))
        })
        .collect();
    let denom: f64 = weights.iter().zip(&alphas).map(|(w, a)| w * a).sum();
    if !(denom.is_finite() && denom.abs() > 1e-300) {
        return Err(Error::DegenerateInput(
            "the month's portfolio value collapsed to zero".into(),
        ));
    }
    Ok(weights
        .iter()
        .zip(&alphas)
        .map(|(w, a)| w * a / denom)
        .collect())
}

/// L1 distance between target and hold-over weights.
pub fn turnover(w_next: &[f64], w_hold: &[f64]) -> Result<f64> {
    if w_next.len() != w_hold.len() {
        return Err(Error::InvalidInput(format!(
            "weight vectors of lengths {} and {}",
            w_next.len(),
            w_hold.len()
        )));
    }
    Ok(w_next
        .iter()
        .zip(w_hold)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Aggregate portfolio statistics over a daily return series.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PortfolioMetrics {
    /// Annualized standard deviation: `sqrt(252) * std(daily)`.
    pub sd: f64,
    /// Annualized average simple return: `252 * mean(daily)`.
    pub av: f64,
    /// Final cumulative simple return.
    pub tr: f64,
    /// Maximum drawdown fraction of the cumulative wealth curve.
    pub md: f64,
    /// Information ratio `av / sd`; undefined (`None`) when `sd = 0`.
    pub ir: Option<f64>,
}

/// Computes [`PortfolioMetrics`] over a non-empty daily return series.
pub fn portfolio_metrics(daily: &[f64]) -> Result<PortfolioMetrics> {
    if daily.is_empty() {
        return Err(Error::InvalidInput("empty daily return series".into()));
    }
    let n = daily.len() as f64;
    let mean = daily.iter().sum::<f64>() / n;
    let sd_daily = if daily.len() >= 2 {
        (daily.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let sd = TRADING_DAYS_PER_YEAR.sqrt() * sd_daily;
    let av = TRADING_DAYS_PER_YEAR * mean;

    let mut wealth = 1.0;
    let mut peak = 1.0_f64;
    let mut md: f64 = 0.0;
    for &r in daily {
        wealth *= 1.0 + r;
        peak = peak.max(wealth);
        md = md.max((peak - wealth) / peak);
    }
    let tr = wealth - 1.0;
    let ir = if sd > 0.0 { Some(av / sd) } else { None };
    Ok(PortfolioMetrics { sd, av, tr, md, ir })
}

/// One rebalancing month of a backtest.
#[derive(Debug, Clone, Serialize)]
pub struct MonthRecord {
    /// Month index, 0-based.
    pub index: usize,
    /// First out-of-sample date of the month.
    pub start_date: String,
    /// Selected universe, in panel column order of selection.
    pub assets: Vec<String>,
    /// Minimum-variance weights over `assets` (empty when flagged).
    pub weights: Vec<f64>,
    /// Whether covariance estimation failed for this month.
    pub flagged: bool,
}

/// Result of a rolling backtest.
#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    pub months: Vec<MonthRecord>,
    /// Out-of-sample daily returns of the non-flagged months, in order.
    pub daily_returns: Vec<f64>,
    pub metrics: PortfolioMetrics,
    /// Average monthly turnover over consecutive non-flagged month pairs;
    /// `None` when fewer than two such pairs exist.
    pub average_turnover: Option<f64>,
    pub flagged_months: usize,
}

impl BacktestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// One-line CSV summary with the header
    /// `sd,to,av,tr,md,ir,months,flagged`.
    pub fn summary_csv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "sd,to,av,tr,md,ir,months,flagged\n{},{},{},{},{},{},{},{}\n",
            self.metrics.sd,
            fmt_opt(self.average_turnover),
            self.metrics.av,
            self.metrics.tr,
            self.metrics.md,
            fmt_opt(self.metrics.ir),
            self.months.len(),
            self.flagged_months
        )
    }
}

struct MonthPlan {
    universe: Vec<usize>, // panel column indices
    weights: Vec<f64>,
}

/// Rolling monthly backtest.
///
/// Each month: assets are eligible when they have at most
/// `cfg.max_missing` missing days in the estimation window and a complete
/// out-of-sample month; the universe is the top `universe_size` eligible
/// assets by capitalization on the last estimation day (first eligible in
/// column order when no capitalizations are attached). Remaining missing
/// values in the window are set to zero. Estimation failures flag the month
/// and the run continues.
pub fn rolling_backtest(
    panel: &ReturnPanel,
    cfg: &BacktestConfig,
    estimator: &dyn Fn(&DataMatrix) -> Result<SpdMatrix>,
) -> Result<BacktestReport> {
    cfg.validate()?;
    let total = panel.days();
    let needed = cfg.estimation_window + cfg.holding_period;
    if total < needed {
        return Err(Error::InvalidInput(format!(
            "panel has {total} days, need at least {needed} (estimation window + one holding period)"
        )));
    }
    let months = (total - cfg.estimation_window) / cfg.holding_period;
    let r = panel.returns();

    let mut records = Vec::with_capacity(months);
    let mut plans: Vec<Option<MonthPlan>> = Vec::with_capacity(months);
    let mut daily_returns = Vec::new();
    let mut flagged_months = 0;

    for h in 0..months {
        let est_start = h * cfg.holding_period;
        let est_end = est_start + cfg.estimation_window;
        let oos_end = est_end + cfg.holding_period;

        let eligible: Vec<usize> = (0..panel.assets().len())
            .filter(|&j| {
                let missing_est = (est_start..est_end).filter(|&t| r[(t, j)].is_nan()).count();
                let complete_oos = (est_end..oos_end).all(|t| !r[(t, j)].is_nan());
                missing_est <= cfg.max_missing && complete_oos
            })
            .collect();

        let universe = select_universe(panel, &eligible, est_end - 1, cfg.universe_size);

        let flag_month = |records: &mut Vec<MonthRecord>| {
            records.push(MonthRecord {
                index: h,
                start_date: panel.dates()[est_end].clone(),
                assets: Vec::new(),
                weights: Vec::new(),
                flagged: true,
            });
        };

        if universe.len() < 2 {
            flag_month(&mut records);
            plans.push(None);
            flagged_months += 1;
            continue;
        }

        let window = DMatrix::from_fn(cfg.estimation_window, universe.len(), |t, k| {
            let v = r[(est_start + t, universe[k])];
            if v.is_nan() {
                0.0
            } else {
                v
            }
        });
        let estimate = DataMatrix::new(window).and_then(|d| estimator(&d));
        let weights = match estimate.and_then(|sigma| gmv_weights(&sigma)) {
            Ok(w) => w,
            Err(_) => {
                flag_month(&mut records);
                plans.push(None);
                flagged_months += 1;
                continue;
            }
        };

        // Out-of-sample daily returns with fixed share counts: track each
        // position's value and renormalize day by day.
        let mut values: Vec<f64> = weights.iter().copied().collect();
        for t in est_end..oos_end {
            let total_value: f64 = values.iter().sum();
            if !(total_value.is_finite() && total_value.abs() > 1e-300) {
                return Err(Error::DegenerateInput(format!(
                    "portfolio value collapsed to zero in month {h}"
                )));
            }
            let mut day_pnl = 0.0;
            for (k, &j) in universe.iter().enumerate() {
                let ret = r[(t, j)];
                day_pnl += values[k] * ret;
                values[k] *= 1.0 + ret;
            }
            daily_returns.push(day_pnl / total_value);
        }

        records.push(MonthRecord {
            index: h,
            start_date: panel.dates()[est_end].clone(),
            assets: universe.iter().map(|&j| panel.assets()[j].clone()).collect(),
            weights: weights.iter().copied().collect(),
            flagged: false,
        });
        plans.push(Some(MonthPlan {
            universe,
            weights: weights.iter().copied().collect(),
        }));
    }

    let average_turnover = monthly_turnover(panel, cfg, &plans)?;
    let metrics = portfolio_metrics(&daily_returns)?;
    Ok(BacktestReport {
        months: records,
        daily_returns,
        metrics,
        average_turnover,
        flagged_months,
    })
}

fn select_universe(
    panel: &ReturnPanel,
    eligible: &[usize],
    snapshot_day: usize,
    size: usize,
) -> Vec<usize> {
    match panel.caps() {
        None => eligible.iter().copied().take(size).collect(),
        Some(caps) => {
            // Rank by capitalization on the snapshot day, descending; assets
            // without a capitalization sort last; ties break by column order.
            let mut ranked: Vec<usize> = eligible.to_vec();
            ranked.sort_by(|&a, &b| {
                let ca = caps[(snapshot_day, a)];
                let cb = caps[(snapshot_day, b)];
                let ka = if ca.is_nan() { f64::NEG_INFINITY } else { ca };
                let kb = if cb.is_nan() { f64::NEG_INFINITY } else { cb };
                kb.partial_cmp(&ka).unwrap().then(a.cmp(&b))
            });
            ranked.truncate(size);
            ranked
        }
    }
}

/// Mean turnover over consecutive non-flagged month pairs, on the combined
/// universe of each pair (absent assets carry weight zero and return zero).
fn monthly_turnover(
    panel: &ReturnPanel,
    cfg: &BacktestConfig,
    plans: &[Option<MonthPlan>],
) -> Result<Option<f64>> {
    let r = panel.returns();
    let mut turnovers = Vec::new();
    for h in 0..plans.len().saturating_sub(1) {
        let (Some(cur), Some(next)) = (&plans[h], &plans[h + 1]) else {
            continue;
        };
        let mut combined: Vec<usize> = cur.universe.clone();
        for &j in &next.universe {
            if !combined.contains(&j) {
                combined.push(j);
            }
        }
        let expand = |plan: &MonthPlan| -> Vec<f64> {
            combined
                .iter()
                .map(|&j| {
                    plan.universe
                        .iter()
                        .position(|&u| u == j)
                        .map_or(0.0, |k| plan.weights[k])
                })
                .collect()
        };
        let w_cur = expand(cur);
        let w_next = expand(next);

        let est_end = h * cfg.holding_period + cfg.estimation_window;
        let month = DMatrix::from_fn(cfg.holding_period, combined.len(), |t, k| {
            let v = r[(est_end + t, combined[k])];
            if v.is_nan() {
                0.0
            } else {
                v
            }
        });
        let w_hold = drift_weights(&w_cur, &month)?;
        turnovers.push(turnover(&w_next, &w_hold)?);
    }
    if turnovers.is_empty() {
        Ok(None)
    } else {
        Ok(Some(turnovers.iter().sum::<f64>() / turnovers.len() as f64))
    }
}

// ---------------------------------------------------------------------------
// Panel CSV: header `date,ASSET...`, one row per day, empty cell = missing.
// ---------------------------------------------------------------------------

/// Parses a return panel from CSV text.
pub fn panel_from_csv(text: &str) -> Result<ReturnPanel> {
    let (dates, assets, values) = parse_panel_table(text)?;
    ReturnPanel::new(dates, assets, values)
}

/// Parses a capitalization table and attaches it to a panel, validating that
/// dates and assets agree.
pub fn attach_caps_csv(panel: ReturnPanel, text: &str) -> Result<ReturnPanel> {
    let (dates, assets, values) = parse_panel_table(text)?;
    if dates != panel.dates() || assets != panel.assets() {
        return Err(Error::InvalidInput(
            "capitalization file must cover the same dates and assets as the returns".into(),
        ));
    }
    panel.with_caps(values)
}

fn parse_panel_table(text: &str) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty panel file".into()))?;
    let mut cols = header.split(',').map(str::trim);
    let first = cols.next().unwrap_or("");
    if !first.eq_ignore_ascii_case("date") {
        return Err(Error::Parse(format!(
            "panel header must start with `date`, got {first:?}"
        )));
    }
    let assets: Vec<String> = cols.map(str::to_string).collect();
    if assets.is_empty() {
        return Err(Error::Parse("panel has no asset columns".into()));
    }

    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let mut cells = line.split(',').map(str::trim);
        let date = cells
            .next()
            .filter(|d| !d.is_empty())
            .ok_or_else(|| Error::Parse(format!("row {}: missing date", lineno + 2)))?;
        let mut row = Vec::with_capacity(assets.len());
        for cell in cells {
            if cell.is_empty() {
                row.push(f64::NAN);
            } else {
                row.push(cell.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {}: bad number {cell:?}", lineno + 2))
                })?);
            }
        }
        if row.len() != assets.len() {
            return Err(Error::Parse(format!(
                "row {}: expected {} cells, got {}",
                lineno + 2,
                assets.len(),
                row.len()
            )));
        }
        dates.push(date.to_string());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("panel has no data rows".into()));
    }
    let values = DMatrix::from_row_iterator(
        rows.len(),
        assets.len(),
        rows.iter().flatten().copied(),
    );
    Ok((dates, assets, values))
}

pub fn read_panel_csv(path: &std::path::Path) -> Result<ReturnPanel> {
    panel_from_csv(&std::fs::read_to_string(path)?)
}
