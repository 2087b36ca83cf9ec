//! Market weight paths, the Fernholz decomposition of relative portfolio
//! value and comparison of rebalancing schedules.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::divergence::l_divergence;
use crate::error::{check_dim, Error, Result};
use crate::generator::{ensure_dim, Generator};
use crate::geodesic::pythagorean_sign;
use crate::simplex::SimplexPoint;

/// A time stamp: an integer step or an ISO calendar date.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimeStamp {
    Step(i64),
    Date(NaiveDate),
}

impl TimeStamp {
    pub fn parse(s: &str) -> Option<TimeStamp> {
        let s = s.trim();
        if let Ok(k) = s.parse::<i64>() {
            return Some(TimeStamp::Step(k));
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(TimeStamp::Date)
    }

    fn partial_cmp_same_kind(&self, other: &TimeStamp) -> Option<Ordering> {
        match (self, other) {
            (TimeStamp::Step(a), TimeStamp::Step(b)) => Some(a.cmp(b)),
            (TimeStamp::Date(a), TimeStamp::Date(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeStamp::Step(k) => write!(f, "{k}"),
            TimeStamp::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

/// Market weights μ(t) observed at strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketPath {
    times: Vec<TimeStamp>,
    weights: Vec<SimplexPoint>,
}

impl MarketPath {
    pub fn new(times: Vec<TimeStamp>, weights: Vec<SimplexPoint>) -> Result<Self> {
        if times.len() != weights.len() {
            return Err(Error::InvalidParameter("one weight vector per time stamp required".into()));
        }
        if times.len() < 2 {
            return Err(Error::InvalidParameter("a market path needs at least two times".into()));
        }
        let n = weights[0].dim();
        for w in &weights {
            check_dim(n, w.dim())?;
        }
        for (k, pair) in times.windows(2).enumerate() {
            match pair[0].partial_cmp_same_kind(&pair[1]) {
                Some(Ordering::Less) => {}
                Some(_) => {
                    return Err(Error::InvalidParameter(format!(
                        "time {} does not increase (row {})",
                        pair[1],
                        k + 2
                    )))
                }
                None => {
                    return Err(Error::InvalidParameter("time stamps mix steps and dates".into()))
                }
            }
        }
        Ok(MarketPath { times, weights })
    }

    /// Path with steps 0, 1, 2, …
    pub fn from_weights(weights: Vec<SimplexPoint>) -> Result<Self> {
        let times = (0..weights.len() as i64).map(TimeStamp::Step).collect();
        Self::new(times, weights)
    }

    pub fn times(&self) -> &[TimeStamp] {
        &self.times
    }

    pub fn weights(&self) -> &[SimplexPoint] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].dim()
    }

    /// Reads CSV with header `t,mu_1,..,mu_n` (weights) or `t,x_1,..,x_n`
    /// (capitalizations, normalized to weights).
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = rdr.headers()?.clone();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        if header.len() < 3 || header.get(0) != Some("t") {
            return Err(parse_err(1, "header must be t,mu_1,..,mu_n or t,x_1,..,x_n".into()));
        }
        let prefix = header
            .get(1)
            .and_then(|h| h.rsplit_once('_'))
            .map(|(p, _)| p.to_string())
            .unwrap_or_default();
        let caps = match prefix.as_str() {
            "mu" => false,
            "x" => true,
            _ => return Err(parse_err(1, format!("unknown column {:?}", header.get(1).unwrap_or("")))),
        };
        for (i, h) in header.iter().enumerate().skip(1) {
            if h != format!("{prefix}_{i}") {
                return Err(parse_err(1, format!("expected column {prefix}_{i}, found {h:?}")));
            }
        }
        let n = header.len() - 1;
        let (mut times, mut weights) = (Vec::new(), Vec::new());
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            if rec.len() != n + 1 {
                return Err(parse_err(line, format!("expected {} fields, found {}", n + 1, rec.len())));
            }
            let t = TimeStamp::parse(&rec[0])
                .ok_or_else(|| parse_err(line, format!("bad time stamp {:?}", &rec[0])))?;
            let vals = rec
                .iter()
                .skip(1)
                .map(|s| s.parse::<f64>().map_err(|_| parse_err(line, format!("not a number: {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(v) = vals.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(parse_err(line, format!("weight {v} is not strictly positive")));
            }
            let w = if caps {
                SimplexPoint::from_positive(&vals)
            } else {
                SimplexPoint::new(vals)
            }
            .map_err(|e| parse_err(line, e.to_string()))?;
            times.push(t);
            weights.push(w);
        }
        Self::new(times, weights)
    }

    pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes `t,mu_1,..,mu_n` with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("mu_{i}")));
        w.write_record(&header)?;
        for (t, mu) in self.times.iter().zip(&self.weights) {
            let mut rec = vec![t.to_string()];
            rec.extend(mu.as_slice().iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One row of a backtest.
#[derive(Clone, Debug, PartialEq)]
pub struct BacktestRow {
    pub time: TimeStamp,
    /// T(μ(t)|μ(t−1)); zero at the first time.
    pub step_divergence: f64,
    pub cumulative_divergence: f64,
    /// φ(μ(t)) − φ(μ(0)).
    pub drift: f64,
    /// log V(t) from the product recursion.
    pub log_value: f64,
    /// |log V(t) − drift − cumulative divergence|.
    pub identity_residual: f64,
}

/// Relative value of a portfolio rebalanced every period, decomposed into
/// generator drift and accumulated L-divergence.
#[derive(Clone, Debug, PartialEq)]
pub struct BacktestReport {
    pub generator: String,
    pub rows: Vec<BacktestRow>,
}

impl BacktestReport {
    pub fn max_identity_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.identity_residual).fold(0.0, f64::max)
    }

    pub fn final_log_value(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.log_value)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "step_divergence",
            "cumulative_divergence",
            "drift",
            "log_value",
            "identity_residual",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.time.to_string(),
                r.step_divergence.to_string(),
                r.cumulative_divergence.to_string(),
                r.drift.to_string(),
                r.log_value.to_string(),
                r.identity_residual.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// log V(t) by the recursion V(t+1)/V(t) = Σ_i π_i(μ(t)) μ_i(t+1)/μ_i(t)
/// together with its decomposition log V(t) = φ(μ(t)) − φ(μ(0)) + Σ T.
pub fn fernholz_decompose<G: Generator + ?Sized>(gen: &G, path: &MarketPath) -> Result<BacktestReport> {
    ensure_dim(gen, path.dim())?;
    let mu = path.weights();
    let phi0 = gen.log_gen(&mu[0]);
    let mut rows = Vec::with_capacity(mu.len());
    let (mut log_value, mut cum) = (0.0, 0.0);
    for k in 0..mu.len() {
        let step = if k == 0 {
            0.0
        } else {
            let pi = gen.portfolio(&mu[k - 1]);
            let growth: f64 = (0..path.dim()).map(|i| pi[i] * mu[k][i] / mu[k - 1][i]).sum();
            if !(growth > 0.0) {
                return Err(Error::NotRegular(format!("portfolio value vanished at row {}", k + 1)));
            }
            log_value += growth.ln();
            l_divergence(gen, &mu[k], &mu[k - 1])?.value
        };
        cum += step;
        let drift = gen.log_gen(&mu[k]) - phi0;
        rows.push(BacktestRow {
            time: path.times()[k],
            step_divergence: step,
            cumulative_divergence: cum,
            drift,
            log_value,
            identity_residual: (log_value - drift - cum).abs(),
        });
    }
    Ok(BacktestReport { generator: gen.label(), rows })
}

/// Relative log value at the last time of a portfolio rebalanced only at the
/// given time indices and held between them.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleValue {
    pub schedule: Vec<usize>,
    /// Σ_k log Σ_i π_i(μ(t_k)) μ_i(t_{k+1})/μ_i(t_k).
    pub log_value: f64,
    /// Σ_k T(μ(t_{k+1})|μ(t_k)) over consecutive rebalancing times.
    pub divergence_sum: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RebalanceComparison {
    pub a: ScheduleValue,
    pub b: ScheduleValue,
    /// log V_a − log V_b at the final time.
    pub difference: f64,
    /// T(q|p) + T(r|q) − T(r|p) when the comparison is rebalancing at
    /// (p, q) against rebalancing at p only, for a three-point path.
    pub pythagorean_gap: Option<f64>,
}

fn validate_schedule(s: &[usize], len: usize) -> Result<()> {
    if s.first() != Some(&0) {
        return Err(Error::InvalidSchedule("schedule must start at the first time".into()));
    }
    if s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSchedule("schedule indices must increase".into()));
    }
    if let Some(&last) = s.last() {
        if last >= len {
            return Err(Error::InvalidSchedule(format!("index {last} is outside the path")));
        }
    }
    Ok(())
}

fn schedule_value<G: Generator + ?Sized>(gen: &G, path: &MarketPath, s: &[usize]) -> Result<ScheduleValue> {
    validate_schedule(s, path.len())?;
    let mu = path.weights();
    let end = path.len() - 1;
    let mut stops: Vec<usize> = s.to_vec();
    if *stops.last().unwrap() != end {
        stops.push(end);
    }
    let (mut log_value, mut divergence_sum) = (0.0, 0.0);
    for w in stops.windows(2) {
        let (p, q) = (&mu[w[0]], &mu[w[1]]);
        let pi = gen.portfolio(p);
        let growth: f64 = (0..p.dim()).map(|i| pi[i] * q[i] / p[i]).sum();
        log_value += growth.ln();
        divergence_sum += l_divergence(gen, q, p)?.value;
    }
    Ok(ScheduleValue { schedule: s.to_vec(), log_value, divergence_sum })
}

/// Compares two rebalancing schedules given as increasing time indices
/// starting at 0. Both portfolios are held to the last time of the path.
pub fn rebalance_compare<G: Generator + ?Sized>(
    gen: &G,
    path: &MarketPath,
    schedule_a: &[usize],
    schedule_b: &[usize],
) -> Result<RebalanceComparison> {
    ensure_dim(gen, path.dim())?;
    let a = schedule_value(gen, path, schedule_a)?;
    let b = schedule_value(gen, path, schedule_b)?;
    let difference = a.log_value - b.log_value;
    let pythagorean_gap = if path.len() == 3 {
        let mu = path.weights();
        let gap = || pythagorean_sign(gen, &mu[0], &mu[1], &mu[2]).map(|r| r.gap);
        match (schedule_a, schedule_b) {
            ([0, 1], [0]) => Some(gap()?),
            ([0], [0, 1]) => Some(-gap()?),
            _ => None,
        }
    } else {
        None
    };
    Ok(RebalanceComparison { a, b, difference, pythagorean_gap })
}
