//! Flat key=value experiment configuration: a dependency-free format that
//! can be specified bit-exactly. Unknown keys, parse failures, and
//! hypothesis violations are all reported with line numbers; validation
//! messages state the inequality that failed so the CLI doubles as a
//! reference for the admissible parameter ranges.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::evolution::EvolutionConfig;
use crate::exponents::{
    mu_star, parse_rational, rational_to_f64, ExtRational, Finite, NonlinearityContext, Rational,
};
use crate::grid::{BoxGrid, ProductGrid, TorusSpectrum};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Experiment {
    Exponents,
    Evolve,
    Picard,
    Scatter,
    Fracineq,
    Decay,
    Sweep,
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exponents" => Ok(Self::Exponents),
            "evolve" => Ok(Self::Evolve),
            "picard" => Ok(Self::Picard),
            "scatter" => Ok(Self::Scatter),
            "fracineq" => Ok(Self::Fracineq),
            "decay" => Ok(Self::Decay),
            "sweep" => Ok(Self::Sweep),
            other => Err(format!("unknown experiment `{other}`")),
        }
    }
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Exponents => "exponents",
            Self::Evolve => "evolve",
            Self::Picard => "picard",
            Self::Scatter => "scatter",
            Self::Fracineq => "fracineq",
            Self::Decay => "decay",
            Self::Sweep => "sweep",
        }
    }

    /// Experiments that integrate the full equation and therefore claim
    /// the well-posedness hypotheses.
    fn requires_wellposedness_hypotheses(&self) -> bool {
        matches!(self, Self::Evolve | Self::Picard | Self::Scatter | Self::Sweep)
    }
}

/// Fully parsed experiment configuration.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub n: u32,
    pub k: u32,
    pub mu: Rational,
    pub lambda: f64,
    pub sigma: f64,
    pub half_length: f64,
    pub points_per_axis: usize,
    pub modes_per_axis: usize,
    pub radii: Vec<f64>,
    pub dt: f64,
    pub t_final: f64,
    /// Steps between stored samples.
    pub samples: usize,
    pub epsilons: Vec<f64>,
    pub seed: u64,
    pub experiment: Experiment,
    pub outdir: PathBuf,
    /// Declared spectral band of the data (0 = no recurrence guard).
    pub band: f64,
    pub dealias: f64,
    pub allow_recurrence: bool,
    /// Random-sweep size for the inequality experiments.
    pub sweep_size: usize,
    /// Checkpoint interval in samples (0 = final state only).
    pub checkpoint_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 1,
            k: 1,
            mu: Rational::new(4, 1),
            lambda: -1.0,
            sigma: 0.75,
            half_length: 32.0,
            points_per_axis: 256,
            modes_per_axis: 16,
            radii: Vec::new(),
            dt: 1e-2,
            t_final: 1.0,
            samples: 10,
            epsilons: vec![0.05],
            seed: 0,
            experiment: Experiment::Evolve,
            outdir: PathBuf::from("out"),
            band: 0.0,
            dealias: 2.0,
            allow_recurrence: false,
            sweep_size: 200,
            checkpoint_every: 0,
        }
    }
}

impl SimConfig {
    pub fn context(&self) -> Result<NonlinearityContext> {
        NonlinearityContext::new(self.n, self.k, self.mu, self.lambda, self.sigma)
    }

    pub fn build_grid(&self) -> Result<Arc<ProductGrid>> {
        let radii = if self.radii.is_empty() {
            vec![1.0; self.k as usize]
        } else {
            self.radii.clone()
        };
        ProductGrid::new(
            BoxGrid {
                n: self.n as usize,
                half_length: self.half_length,
                points_per_axis: self.points_per_axis,
                band: self.band,
            },
            TorusSpectrum::new(self.k as usize, radii, self.modes_per_axis)?,
        )
    }

    pub fn evolution(&self) -> Result<EvolutionConfig> {
        Ok(EvolutionConfig {
            ctx: self.context()?,
            dt: self.dt,
            t_final: self.t_final,
            sample_stride: self.samples,
            dealias_factor: self.dealias,
            allow_recurrence: self.allow_recurrence,
        })
    }

    /// Hypothesis checks for the selected experiment. Messages carry the
    /// failed inequality.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if self.n == 0 {
            violations.push("n must be at least 1".to_string());
        }
        if self.k == 0 {
            violations.push("k must be at least 1".to_string());
        }
        if !self.radii.is_empty() && self.radii.len() != self.k as usize {
            violations.push(format!(
                "radii lists {} values but k = {}",
                self.radii.len(),
                self.k
            ));
        }
        if self.n == 0 || self.k == 0 {
            return violations;
        }
        let sigma_f = self.sigma;
        let khalf = self.k as f64 / 2.0;
        match self.experiment {
            e if e.requires_wellposedness_hypotheses() || e == Experiment::Exponents => {
                let lower = Rational::new(4, self.n as i64);
                let upper = mu_star(self.n);
                if self.mu < lower || Finite(self.mu) >= upper {
                    violations.push(format!(
                        "mu = {} violates 4/n <= mu < mu*(n) = {} for n = {} (line key `mu`)",
                        self.mu, upper, self.n
                    ));
                }
                if e == Experiment::Exponents {
                    return violations;
                }
                let mass_critical = self.mu == lower;
                if mass_critical {
                    let upper_sigma = 4.0 / self.n as f64 + 1.0;
                    if !(sigma_f > khalf && sigma_f < upper_sigma) {
                        violations.push(format!(
                            "sigma = {sigma_f} violates k/2 < sigma < 4/n + 1 \
                             (= {upper_sigma}) for the mass-critical pipeline"
                        ));
                    }
                } else {
                    let mu_f = rational_to_f64(self.mu);
                    let s = (mu_f * self.n as f64 - 4.0) / (2.0 * mu_f);
                    let cap = ((self.k as f64 + 1.0) / 2.0 - s).min(1.0 + mu_f);
                    if !(sigma_f > khalf && sigma_f < cap) {
                        violations.push(format!(
                            "sigma = {sigma_f} violates k/2 < sigma < min((k+1)/2 - s, 1 + mu) \
                             (= {cap}) for the supercritical pipeline"
                        ));
                    }
                }
            }
            Experiment::Fracineq => {
                if !(sigma_f > 0.0) {
                    violations.push(format!("sigma = {sigma_f} violates sigma > 0"));
                }
                if self.mu <= Rational::new(0, 1) {
                    violations.push(format!("mu = {} violates mu > 0", self.mu));
                }
            }
            Experiment::Decay => {}
            _ => {}
        }
        if self.experiment.requires_wellposedness_hypotheses() || self.experiment == Experiment::Decay {
            if !self.points_per_axis.is_power_of_two() {
                violations.push(format!(
                    "Nx = {} is not a power of two",
                    self.points_per_axis
                ));
            }
            if self.modes_per_axis == 0 || !self.modes_per_axis.is_multiple_of(2) {
                violations.push(format!("Ny = {} is not even and positive", self.modes_per_axis));
            }
            for &v in [self.half_length, self.dt, self.t_final].iter() {
                if !(v > 0.0) {
                    violations.push(format!("grid/time parameter {v} must be positive"));
                }
            }
            if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0)) {
                violations.push("epsilons must be a nonempty list of positive sizes".to_string());
            }
        }
        violations
    }
}

/// Parse the flat key=value format: one pair per line, `#` comments.
/// Returns the validated configuration or the full list of violations,
/// each tagged with its line number where one applies.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    parse_config_for(text, None)
}

/// `parse_config` with the experiment pinned before validation; the CLI
/// uses this so hypothesis checks match the subcommand actually run.
pub fn parse_config_for(text: &str, experiment: Option<Experiment>) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    let mut errors: Vec<String> = Vec::new();
    let mut explicit_radii = false;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {lineno}: expected key=value, got `{line}`"));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let mut bad = |msg: String| errors.push(format!("line {lineno}: {msg}"));
        macro_rules! parse_as {
            ($ty:ty) => {
                match value.parse::<$ty>() {
                    Ok(v) => Some(v),
                    Err(_) => {
                        bad(format!("cannot parse `{value}` for key `{key}`"));
                        None
                    }
                }
            };
        }
        match key {
            "n" => {
                if let Some(v) = parse_as!(u32) {
                    cfg.n = v;
                }
            }
            "k" => {
                if let Some(v) = parse_as!(u32) {
                    cfg.k = v;
                }
            }
            "mu" => match parse_rational(value) {
                Ok(v) => cfg.mu = v,
                Err(e) => bad(format!("key `mu`: {e}")),
            },
            "lambda" => {
                if let Some(v) = parse_as!(f64) {
                    cfg.lambda = v;
                }
            }
            "sigma" => {
                if let Some(v) = parse_as!(f64) {
                    cfg.sigma = v;
                }
            }
            "L" => {
                if let Some(v) = parse_as!(f64) {
                    cfg.half_length = v;
                }
            }
            "Nx" => {
                if let Some(v) = parse_as!(usize) {
                    cfg.points_per_axis = v;
                }
            }
            "Ny" => {
                if let Some(v) = parse_as!(usize) {
                    cfg.modes_per_axis = v;
                }
            }
            "radii" => {
                let parsed: std::result::Result<Vec<f64>, _> =
                    value.split(',').map(|s| s.trim().parse::<f64>()).collect();
                match parsed {
                    Ok(v) => {
                        cfg.radii = v;
                        explicit_radii = true;
                    }
                    Err(_) => bad(format!("cannot parse `{value}` as a comma list of radii")),
                }
            }
            "dt" => {
                if let Some(v) = parse_as!(f64) {
                    cfg.dt = v;
                }
            }
            "T" => {
                if let Some(v) = parse_as!(f64) {
                    cfg.t_final = v;
                }
            }
            "samples" => {
                if let Some(v) = parse_as!(usize) {
                    cfg.samples = v;
                }
            }
            "epsilons" => {
                let parsed: std::result::Result<Vec<f64>, _> =
                    value.split(',').map(|s| s.trim().parse::<f64>()).collect();
                match parsed {
                    Ok(v) => cfg.epsilons = v,
                    Err(_) => bad(format!("cannot parse `{value}` as a comma list of sizes")),
                }
            }
            "seed" => {
                if let Some(v) = parse_as!(u64) {
                    cfg.seed = v;
                }
            }
            "experiment" => match value.parse::<Experiment>() {
                Ok(v) => cfg.experiment = v,
                Err(e) => bad(e),
            },
            "outdir" => cfg.outdir = PathBuf::from(value),
            "band" => {
                if let Some(v) = parse_as!(f64) {
                    cfg.band = v;
                }
            }
            "dealias" => {
                if let Some(v) = parse_as!(f64) {
                    cfg.dealias = v;
                }
            }
            "allow_recurrence" => {
                if let Some(v) = parse_as!(bool) {
                    cfg.allow_recurrence = v;
                }
            }
            "sweep_size" => {
                if let Some(v) = parse_as!(usize) {
                    cfg.sweep_size = v;
                }
            }
            "checkpoint_every" => {
                if let Some(v) = parse_as!(usize) {
                    cfg.checkpoint_every = v;
                }
            }
            other => bad(format!("unknown key `{other}`")),
        }
    }
    if explicit_radii && cfg.radii.len() != cfg.k as usize {
        errors.push(format!(
            "radii lists {} values but k = {}",
            cfg.radii.len(),
            cfg.k
        ));
    }
    if let Some(e) = experiment {
        cfg.experiment = e;
    }
    errors.extend(cfg.validate());
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

/// Echo a configuration in the same flat format (used by manifests).
pub fn render_config(cfg: &SimConfig) -> String {
    let radii = if cfg.radii.is_empty() {
        vec![1.0; cfg.k as usize]
    } else {
        cfg.radii.clone()
    };
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let mu = ExtRational::Finite(cfg.mu).to_string();
    format!(
        "n={}\nk={}\nmu={}\nlambda={}\nsigma={}\nL={}\nNx={}\nNy={}\nradii={}\ndt={}\nT={}\n\
         samples={}\nepsilons={}\nseed={}\nexperiment={}\nband={}\ndealias={}\n\
         allow_recurrence={}\nsweep_size={}\ncheckpoint_every={}\n",
        cfg.n,
        cfg.k,
        mu,
        cfg.lambda,
        cfg.sigma,
        cfg.half_length,
        cfg.points_per_axis,
        cfg.modes_per_axis,
        join(&radii),
        cfg.dt,
        cfg.t_final,
        cfg.samples,
        join(&cfg.epsilons),
        cfg.seed,
        cfg.experiment.name(),
        cfg.band,
        cfg.dealias,
        cfg.allow_recurrence,
        cfg.sweep_size,
        cfg.checkpoint_every,
    )
}
