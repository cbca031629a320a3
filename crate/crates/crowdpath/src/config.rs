//! Model parameters and the `key=value` config file format.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Window;

/// Which reference the minimum-distance penalty is measured against when
/// marking cells a pedestrian prefers to keep clear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NFactorReference {
    /// Distance from the cell to each neighbor's last observed position.
    Surrounding,
    /// Distance from the cell to the central agent itself.
    SelfCentered,
}

impl fmt::Display for NFactorReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NFactorReference::Surrounding => write!(f, "surrounding"),
            NFactorReference::SelfCentered => write!(f, "self"),
        }
    }
}

/// All model parameters. Defaults reproduce the reference parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Window size along the heading axis, meters.
    pub window_length: f64,
    /// Window size across the heading axis, meters.
    pub window_width: f64,
    /// Observed history length, steps.
    pub f_obs: usize,
    /// Prediction horizon, steps.
    pub p_pred: usize,
    /// Seconds per step.
    pub dt: f64,
    /// Grid cell edge, meters.
    pub cell_size: f64,
    /// Initial weight of every cell.
    pub w_initial: f64,
    /// Number of retrieved candidate structures.
    pub k: usize,
    /// Per-step cell bonus for the rank-1/2/3 candidate futures.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Destination blend weights for the rank-1..3 candidate endpoints and
    /// the reflected history start.
    pub ws1: f64,
    pub ws2: f64,
    pub ws3: f64,
    pub wcs: f64,
    /// Cell bonus inside the linearity band.
    pub mu: f64,
    /// Cell bonus inside the reachable disk.
    pub nu: f64,
    /// Cell penalty inside the preferred-clearance band (negative).
    pub eta_near: f64,
    /// Number of representative structures anchoring the index.
    pub m_rep: usize,
    /// Index search half-range around each representative key, on the
    /// score-like key scale.
    pub delta: f64,
    /// Meters-to-key factor: index keys are `key_scale` times the
    /// central-history distance, putting them on the same 0-10 scale the
    /// search range is calibrated for.
    pub key_scale: f64,
    /// Gaussian kernel bandwidth for trajectory similarity, meters.
    pub sigma: f64,
    /// Similarity component weights: central history, neighbors, obstacles.
    pub sim_wc: f64,
    pub sim_wn: f64,
    pub sim_wo: f64,
    /// Cost steepness of the path planner.
    pub kappa: f64,
    /// Lower clamp on speeds fed to the influence function, m/s.
    pub v_min: f64,
    /// Window extraction stride, steps.
    pub stride: usize,
    /// Seed for representative selection and evaluation sampling.
    pub seed: u64,
    /// Destination bonus stand-in for an unbounded weight.
    pub epsilon: f64,
    /// Reference for the minimum-distance penalty band.
    pub n_factor_reference: NFactorReference,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            window_length: 7.0,
            window_width: 3.5,
            f_obs: 8,
            p_pred: 8,
            dt: 0.4,
            cell_size: 0.2,
            w_initial: 5.0,
            k: 3,
            alpha: 30.0,
            beta: 15.0,
            gamma: 10.0,
            ws1: 0.3,
            ws2: 0.15,
            ws3: 0.10,
            wcs: 0.80,
            mu: 20.0,
            nu: 10.0,
            eta_near: -10.0,
            m_rep: 28,
            delta: 2.0,
            key_scale: 4.0,
            sigma: 0.5,
            sim_wc: 0.5,
            sim_wn: 0.35,
            sim_wo: 0.15,
            kappa: 10.0,
            v_min: 0.05,
            stride: 1,
            seed: 7,
            epsilon: 1e6,
            n_factor_reference: NFactorReference::Surrounding,
        }
    }
}

impl Config {
    pub fn window(&self) -> Window {
        Window::new(self.window_length, self.window_width)
            .expect("validated window dimensions")
    }

    /// Basic sanity checks; called after parsing.
    pub fn validate(&self) -> Result<()> {
        if !(self.window_length > 0.0 && self.window_width > 0.0) {
            return Err(Error::Config("window dimensions must be positive".into()));
        }
        if !(self.cell_size > 0.0) {
            return Err(Error::Config("cell_size must be positive".into()));
        }
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.f_obs < 2 {
            return Err(Error::Config("f_obs must be at least 2".into()));
        }
        if self.p_pred < 1 {
            return Err(Error::Config("p_pred must be at least 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.m_rep < 1 {
            return Err(Error::Config("m_rep must be at least 1".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config("delta must be positive".into()));
        }
        if !(self.key_scale > 0.0) {
            return Err(Error::Config("key_scale must be positive".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if self.stride < 1 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if !(self.v_min > 0.0) {
            return Err(Error::Config("v_min must be positive".into()));
        }
        let bonuses = [
            self.w_initial, self.alpha, self.beta, self.gamma, self.mu, self.nu,
            self.eta_near, self.ws1, self.ws2, self.ws3, self.wcs, self.kappa,
            self.epsilon,
        ];
        if bonuses.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("all weight parameters must be finite".into()));
        }
        Ok(())
    }

    /// Parse `key=value` lines; `#` starts a comment. Unknown keys are
    /// rejected. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected key=value, got '{line}'"),
                });
            };
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn f(v: &str) -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("expected a number, got '{v}'")))
        }
        fn u(v: &str) -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("expected a non-negative integer, got '{v}'")))
        }
        match key {
            "window_length" => self.window_length = f(value)?,
            "window_width" => self.window_width = f(value)?,
            "f_obs" => self.f_obs = u(value)?,
            "p_pred" => self.p_pred = u(value)?,
            "dt" => self.dt = f(value)?,
            "cell_size" => self.cell_size = f(value)?,
            "w_initial" => self.w_initial = f(value)?,
            "k" => self.k = u(value)?,
            "alpha" => self.alpha = f(value)?,
            "beta" => self.beta = f(value)?,
            "gamma" => self.gamma = f(value)?,
            "ws1" => self.ws1 = f(value)?,
            "ws2" => self.ws2 = f(value)?,
            "ws3" => self.ws3 = f(value)?,
            "wcs" => self.wcs = f(value)?,
            "mu" => self.mu = f(value)?,
            "nu" => self.nu = f(value)?,
            "eta_near" => self.eta_near = f(value)?,
            "m_rep" => self.m_rep = u(value)?,
            "delta" => self.delta = f(value)?,
            "key_scale" => self.key_scale = f(value)?,
            "sigma" => self.sigma = f(value)?,
            "sim_wc" => self.sim_wc = f(value)?,
            "sim_wn" => self.sim_wn = f(value)?,
            "sim_wo" => self.sim_wo = f(value)?,
            "kappa" => self.kappa = f(value)?,
            "v_min" => self.v_min = f(value)?,
            "stride" => self.stride = u(value)?,
            "seed" => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("expected an integer seed, got '{value}'")))?
            }
            "epsilon" => self.epsilon = f(value)?,
            "n_factor_reference" => {
                self.n_factor_reference = match value {
                    "surrounding" => NFactorReference::Surrounding,
                    "self" => NFactorReference::SelfCentered,
                    other => {
                        return Err(Error::Config(format!(
                            "n_factor_reference must be 'surrounding' or 'self', got '{other}'"
                        )))
                    }
                }
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Observation duration in seconds.
    pub fn obs_seconds(&self) -> f64 {
        self.f_obs as f64 * self.dt
    }

    /// Prediction duration in seconds.
    pub fn pred_seconds(&self) -> f64 {
        self.p_pred as f64 * self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_parameters() {
        let c = Config::default();
        assert_eq!(c.window_length, 7.0);
        assert_eq!(c.window_width, 3.5);
        assert_eq!(c.cell_size, 0.2);
        assert_eq!(c.w_initial, 5.0);
        assert_eq!(c.k, 3);
        assert_eq!((c.alpha, c.beta, c.gamma), (30.0, 15.0, 10.0));
        assert_eq!((c.ws1, c.ws2, c.ws3, c.wcs), (0.3, 0.15, 0.10, 0.80));
        assert_eq!((c.mu, c.nu, c.eta_near), (20.0, 10.0, -10.0));
        assert_eq!(c.m_rep, 28);
        assert_eq!(c.delta, 2.0);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = Config::parse("k=5\n# comment\nsigma = 0.7 # inline\n\nseed=42\n").unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.sigma, 0.7);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.m_rep, 28); // untouched default
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = Config::parse("bogus=1\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::parse("k=zero\n").is_err());
        assert!(Config::parse("k=0\n").is_err());
        assert!(Config::parse("cell_size=-0.2\n").is_err());
        assert!(Config::parse("n_factor_reference=everybody\n").is_err());
    }
}
