use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::linalg::SchattenOrder;

use super::ExperimentError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    Plateau,
    Instability,
    Rates,
    Support,
    Concentration,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Spectrum,
        ExperimentKind::Plateau,
        ExperimentKind::Instability,
        ExperimentKind::Rates,
        ExperimentKind::Support,
        ExperimentKind::Concentration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Plateau => "plateau",
            ExperimentKind::Instability => "instability",
            ExperimentKind::Rates => "rates",
            ExperimentKind::Support => "support",
            ExperimentKind::Concentration => "concentration",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Truncation level used by the support experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportRank {
    /// `k = n`.
    Full,
    Fixed(usize),
}

impl SupportRank {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            SupportRank::Full => n,
            SupportRank::Fixed(k) => k,
        }
    }
}

/// Every knob of the Monte Carlo harness.
///
/// Loaded from `key = value` lines; `#` starts a comment. List values are
/// comma separated.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub trials: usize,
    pub kernel: String,
    pub gamma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub p: SchattenOrder,
    pub k_grid: Vec<usize>,
    pub m_quadrature: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    /// Index window `[lo, hi]` of the log-log decay fit.
    pub fit_window: (usize, usize),
    /// Evaluation points of the instability experiment.
    pub eval_points: usize,
    pub support_n_grid: Vec<usize>,
    pub support_interval: (f64, f64),
    pub grid_step: f64,
    pub tau_grid: Vec<f64>,
    pub support_k: Vec<SupportRank>,
    /// Factor applied to `t` for the second concentration measurement.
    pub t_scale: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_step: f64,
}

/// `{1, 2, 5, 10, 20, 50, 100}` below `n`, then `n`.
pub fn default_k_grid(n: usize) -> Vec<usize> {
    let mut g: Vec<usize> = [1, 2, 5, 10, 20, 50, 100]
        .into_iter()
        .filter(|&k| k < n)
        .collect();
    g.push(n);
    g
}

/// 25 log-spaced thresholds from `1e-3` to `1`, eight per decade.
pub fn default_tau_grid() -> Vec<f64> {
    (0..25).map(|i| 10f64.powf(-3.0 + 0.125 * i as f64)).collect()
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let n = 1000;
        Self {
            experiment,
            n,
            trials: 100,
            kernel: "abel_l1".to_owned(),
            gamma: 1.0,
            delta: 0.1,
            alpha: 0.5,
            p: SchattenOrder::Finite(2.0),
            k_grid: default_k_grid(n),
            m_quadrature: 2000,
            seed: 0,
            output_dir: PathBuf::from("out"),
            workers: 1,
            fit_window: (5, 50),
            eval_points: 201,
            support_n_grid: vec![50, 200, 800],
            support_interval: (0.2, 0.8),
            grid_step: 0.001,
            tau_grid: default_tau_grid(),
            support_k: vec![SupportRank::Full],
            t_scale: 100.0,
            r_min: 1.05,
            r_max: 10.0,
            r_step: 0.05,
        }
    }

    /// Parses `key = value` text on top of the defaults for `experiment`.
    ///
    /// An `experiment` key in the text must agree with `experiment`.
    pub fn parse(text: &str, experiment: ExperimentKind) -> Result<Self, ExperimentError> {
        let mut c = Self::defaults(experiment);
        let mut grid_set = false;
        let mut n_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ExperimentError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                ExperimentError::Config(format!("line {}: invalid {key} `{value}`: {what}", lineno + 1))
            };
            match key {
                "experiment" => {
                    let k: ExperimentKind = value.parse()?;
                    if k != experiment {
                        return Err(ExperimentError::Config(format!(
                            "config is for `{k}` but `{experiment}` was requested"
                        )));
                    }
                }
                "n" => {
                    c.n = parse_num(value).map_err(|e| bad(&e))?;
                    n_set = true;
                }
                "trials" => c.trials = parse_num(value).map_err(|e| bad(&e))?,
                "kernel" => c.kernel = value.to_owned(),
                "gamma" => c.gamma = parse_num(value).map_err(|e| bad(&e))?,
                "delta" => c.delta = parse_num(value).map_err(|e| bad(&e))?,
                "alpha" => c.alpha = parse_num(value).map_err(|e| bad(&e))?,
                "p" => c.p = value.parse().map_err(|e| bad(&format!("{e}")))?,
                "k_grid" => {
                    c.k_grid = parse_list(value).map_err(|e| bad(&e))?;
                    grid_set = true;
                }
                "m_quadrature" => c.m_quadrature = parse_num(value).map_err(|e| bad(&e))?,
                "seed" => c.seed = parse_num(value).map_err(|e| bad(&e))?,
                "output_dir" => c.output_dir = PathBuf::from(value),
                "workers" => c.workers = parse_num(value).map_err(|e| bad(&e))?,
                "fit_window" => {
                    let w: Vec<usize> = parse_list(value).map_err(|e| bad(&e))?;
                    match w.as_slice() {
                        [lo, hi] => c.fit_window = (*lo, *hi),
                        _ => return Err(bad("expected two indices")),
                    }
                }
                "eval_points" => c.eval_points = parse_num(value).map_err(|e| bad(&e))?,
                "support_n_grid" => c.support_n_grid = parse_list(value).map_err(|e| bad(&e))?,
                "support_interval" => {
                    let w: Vec<f64> = parse_list(value).map_err(|e| bad(&e))?;
                    match w.as_slice() {
                        [lo, hi] => c.support_interval = (*lo, *hi),
                        _ => return Err(bad("expected two endpoints")),
                    }
                }
                "grid_step" => c.grid_step = parse_num(value).map_err(|e| bad(&e))?,
                "tau_grid" => c.tau_grid = parse_list(value).map_err(|e| bad(&e))?,
                "support_k" => {
                    c.support_k = value
                        .split(',')
                        .map(|s| match s.trim() {
                            "full" => Ok(SupportRank::Full),
                            other => parse_num(other).map(SupportRank::Fixed),
                        })
                        .collect::<Result<_, _>>()
                        .map_err(|e| bad(&e))?
                }
                "t_scale" => c.t_scale = parse_num(value).map_err(|e| bad(&e))?,
                "r_min" => c.r_min = parse_num(value).map_err(|e| bad(&e))?,
                "r_max" => c.r_max = parse_num(value).map_err(|e| bad(&e))?,
                "r_step" => c.r_step = parse_num(value).map_err(|e| bad(&e))?,
                other => {
                    return Err(ExperimentError::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        if n_set && !grid_set {
            c.k_grid = default_k_grid(c.n);
        }
        Ok(c)
    }

    pub fn from_path(path: impl AsRef<Path>, experiment: ExperimentKind) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, experiment)
    }

    /// Checks every invariant; experiments call this before sampling.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |msg: String| Err(ExperimentError::Config(msg));
        if self.trials < 1 {
            return fail("trials must be at least 1".into());
        }
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if self.workers < 1 {
            return fail("workers must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(0.0..=0.5).contains(&self.alpha) {
            return fail(format!("alpha must lie in [0, 1/2], got {}", self.alpha));
        }
        if self.m_quadrature < 2 {
            return fail(format!("m_quadrature must be at least 2, got {}", self.m_quadrature));
        }
        if self.k_grid.is_empty() {
            return fail("k_grid is empty".into());
        }
        if let Some(k) = self.k_grid.iter().find(|&&k| k < 1 || k > self.n) {
            return fail(format!("k_grid entry {k} outside [1, {}]", self.n));
        }
        let (lo, hi) = self.fit_window;
        if lo < 1 || hi <= lo {
            return fail(format!("fit_window [{lo}, {hi}] is not a valid index range"));
        }
        match self.experiment {
            ExperimentKind::Spectrum | ExperimentKind::Plateau | ExperimentKind::Concentration
                if self.n <= 3 => {
                return fail(format!("bounds need n > 3, got {}", self.n));
            }
            ExperimentKind::Instability if self.eval_points < 1 => {
                return fail("eval_points must be at least 1".into());
            }
            ExperimentKind::Support => self.validate_support()?,
            ExperimentKind::Concentration if !(self.t_scale > 0.0 && self.t_scale.is_finite()) => {
                return fail(format!("t_scale must be positive, got {}", self.t_scale));
            }
            ExperimentKind::Rates => {
                if !(self.r_min > 1.0 && self.r_max >= self.r_min && self.r_step > 0.0) {
                    return fail(format!(
                        "rate grid needs 1 < r_min <= r_max and r_step > 0, got {}..{} step {}",
                        self.r_min, self.r_max, self.r_step
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_support(&self) -> Result<(), ExperimentError> {
        let fail = |msg: String| Err(ExperimentError::Config(msg));
        if self.support_n_grid.is_empty() || self.support_n_grid.iter().any(|&n| n < 1) {
            return fail("support_n_grid needs positive sample counts".into());
        }
        let (lo, hi) = self.support_interval;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return fail(format!("support_interval [{lo}, {hi}] must sit inside [0, 1]"));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.5) {
            return fail(format!("grid_step must lie in (0, 0.5], got {}", self.grid_step));
        }
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return fail("tau_grid needs finite non-negative thresholds".into());
        }
        let n_min = *self.support_n_grid.iter().min().unwrap_or(&0);
        for k in &self.support_k {
            if let SupportRank::Fixed(k) = k {
                if *k < 1 || *k > n_min {
                    return fail(format!("support_k entry {k} outside [1, {n_min}]"));
                }
            }
        }
        if self.support_k.is_empty() {
            return fail("support_k is empty".into());
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.trim().parse().map_err(|e: T::Err| e.to_string())
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    let s = s.trim().trim_start_matches('{').trim_end_matches('}');
    s.split(',').map(parse_num).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_setup() {
        let c = ExperimentConfig::defaults(ExperimentKind::Plateau);
        assert_eq!(c.n, 1000);
        assert_eq!(c.k_grid, vec![1, 2, 5, 10, 20, 50, 100, 1000]);
        assert_eq!(c.m_quadrature, 2000);
        assert!(c.validate().is_ok());
        assert_eq!(*default_tau_grid().last().unwrap(), 1.0);
    }

    #[test]
    fn parses_keys_and_comments() {
        let text = "# test\nn = 500\ntrials=3 # inline\np = inf\nk_grid = {1, 5, 500}\nsupport_k = full, 3\n";
        let c = ExperimentConfig::parse(text, ExperimentKind::Support).unwrap();
        assert_eq!(c.n, 500);
        assert_eq!(c.trials, 3);
        assert_eq!(c.p, SchattenOrder::Infinity);
        assert_eq!(c.k_grid, vec![1, 5, 500]);
        assert_eq!(c.support_k, vec![SupportRank::Full, SupportRank::Fixed(3)]);
        let c = ExperimentConfig::parse("n = 30", ExperimentKind::Plateau).unwrap();
        assert_eq!(c.k_grid, vec![1, 2, 5, 10, 20, 30]);
    }

    #[test]
    fn rejects_bad_input() {
        let kind = ExperimentKind::Plateau;
        for text in [
            "trials = 0",
            "n = 1",
            "k_grid = 0, 5",
            "n = 10\nk_grid = 11",
            "delta = 1",
            "alpha = 0.7",
            "bogus = 1",
            "n = ten",
            "just a line",
            "experiment = rates",
            "workers = 0",
        ] {
            let r = ExperimentConfig::parse(text, kind).and_then(|c| c.validate());
            assert!(matches!(r, Err(ExperimentError::Config(_))), "{text}");
        }
    }
}
