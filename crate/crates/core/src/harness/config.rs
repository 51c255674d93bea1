//! Run description and its flat `key=value` file format.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{supercritical_radius, BoundaryMode};
use crate::mobility::{corollary_kappa, MobilityKind, MobilityModel};
use crate::protocol::Mode;
use crate::rng::derive;
use crate::topology::{subcritical_radius, LogBase};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusMode {
    /// `sqrt((1 + eps) ln n)`.
    Supercritical { eps: f64 },
    /// `(log n)^((1 - theta) / 2)`.
    Subcritical { theta: f64, base: LogBase },
    Fixed(f64),
}

impl RadiusMode {
    pub fn radius(&self, n: usize) -> Result<f64> {
        match *self {
            RadiusMode::Supercritical { eps } => {
                if !(eps > 0.0) {
                    return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {eps}")));
                }
                Ok(supercritical_radius(n, eps))
            }
            RadiusMode::Subcritical { theta, base } => subcritical_radius(n, theta, base),
            RadiusMode::Fixed(r) if r > 0.0 => Ok(r),
            RadiusMode::Fixed(r) => Err(Error::InvalidParameter(format!("radius must be > 0, got {r}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Plain,
    /// Horizontal wall through the middle with one centered gap.
    Wall { gap_width: Option<f64> },
    /// Squarelets `(i, j)` emptied at placement.
    Holes(Vec<(usize, usize)>),
    /// The comb unit-disk graph; replaces `n`, the radius and placement.
    Comb(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub placement: u64,
    pub mobility: u64,
    pub permutation: u64,
    pub sampling: u64,
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        Self {
            placement: derive(seed, 1),
            mobility: derive(seed, 2),
            permutation: derive(seed, 3),
            sampling: derive(seed, 4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaChoice {
    Value(f64),
    /// The corollary constant at `nu = 1` and the configured speed.
    Corollary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub radius: RadiusMode,
    pub mobility: MobilityKind,
    pub speed: f64,
    pub boundary: BoundaryMode,
    pub topology: TopologyKind,
    pub mode: Mode,
    pub kappa: KappaChoice,
    pub nu: f64,
    pub levels: Option<u32>,
    /// Total steps, warmup included.
    pub steps: usize,
    pub pair_samples: usize,
    pub warmup: Option<usize>,
    /// Doubling estimate used for the logged probe factor.
    pub alpha_hat: f64,
    pub seed: u64,
    pub seeds: Seeds,
    /// Where a protocol snapshot is written when an invariant breaks.
    pub dump_dir: Option<PathBuf>,
    /// Sizes and trial count for the sweeps.
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub theta: f64,
    pub eps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 200,
            radius: RadiusMode::Supercritical { eps: 1.0 },
            mobility: MobilityKind::RandomWalk,
            speed: 1.0,
            boundary: BoundaryMode::Reflect,
            topology: TopologyKind::Plain,
            mode: Mode::Plain,
            kappa: KappaChoice::Corollary,
            nu: 1.0,
            levels: None,
            steps: 20,
            pair_samples: 50,
            warmup: None,
            alpha_hat: 16.0,
            seed: 1,
            seeds: Seeds::from_master(1),
            dump_dir: None,
            n_list: vec![50, 100, 500, 1000, 2000],
            trials: 1,
            theta: 0.8,
            eps: 1.0,
        }
    }
}

impl SimConfig {
    pub fn mobility_model(&self) -> Result<MobilityModel> {
        MobilityModel::new(self.mobility, self.speed)
    }

    pub fn kappa_value(&self) -> f64 {
        match self.kappa {
            KappaChoice::Value(k) => k,
            KappaChoice::Corollary => corollary_kappa(1.0, self.speed),
        }
    }

    /// Replace the master seed and every derived seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.seeds = Seeds::from_master(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.n == 0 && !matches!(self.topology, TopologyKind::Comb(_)) {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if !(self.alpha_hat >= 1.0) {
            return Err(Error::Config(format!("alpha_hat must be >= 1, got {}", self.alpha_hat)));
        }
        let model = self.mobility_model()?;
        if !model.is_static() && matches!(self.topology, TopologyKind::Holes(_) | TopologyKind::Comb(_)) {
            return Err(Error::Config("hole and comb topologies are static; set speed = 0".into()));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad value `{value}` for `{key}`: {what}"));
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| "not a number".to_string())
        }
        match key {
            "n" => self.n = num(value).map_err(|e| bad(&e))?,
            "radius" => {
                self.radius = match value {
                    "supercritical" => RadiusMode::Supercritical { eps: self.eps },
                    "subcritical" => RadiusMode::Subcritical {
                        theta: self.theta,
                        base: LogBase::Natural,
                    },
                    v => RadiusMode::Fixed(num(v).map_err(|e| bad(&e))?),
                }
            }
            "epsilon" | "eps" => {
                self.eps = num(value).map_err(|e| bad(&e))?;
                if let RadiusMode::Supercritical { eps } = &mut self.radius {
                    *eps = self.eps;
                }
            }
            "theta" => {
                self.theta = num(value).map_err(|e| bad(&e))?;
                if let RadiusMode::Subcritical { theta, .. } = &mut self.radius {
                    *theta = self.theta;
                }
            }
            "log_base" => {
                let b: LogBase = value.parse()?;
                if let RadiusMode::Subcritical { base, .. } = &mut self.radius {
                    *base = b;
                }
            }
            "mobility" => self.mobility = value.parse()?,
            "speed" | "s" => self.speed = num(value).map_err(|e| bad(&e))?,
            "boundary" => self.boundary = value.parse()?,
            "topology" => {
                self.topology = match value {
                    "plain" => TopologyKind::Plain,
                    "wall" => TopologyKind::Wall { gap_width: None },
                    "holes" => TopologyKind::Holes(Vec::new()),
                    "comb" => TopologyKind::Comb(8),
                    _ => return Err(bad("expected plain, wall, holes or comb")),
                }
            }
            "gap_width" => {
                let w = num(value).map_err(|e| bad(&e))?;
                self.topology = TopologyKind::Wall { gap_width: Some(w) };
            }
            "holes" => {
                let mut cells = Vec::new();
                for cell in value.split(';').map(str::trim).filter(|c| !c.is_empty()) {
                    let (i, j) = cell.split_once(':').ok_or_else(|| bad("cells are i:j separated by ;"))?;
                    cells.push((
                        num(i.trim()).map_err(|e| bad(&e))?,
                        num(j.trim()).map_err(|e| bad(&e))?,
                    ));
                }
                self.topology = TopologyKind::Holes(cells);
            }
            "comb_r" => self.topology = TopologyKind::Comb(num(value).map_err(|e| bad(&e))?),
            "mode" => self.mode = value.parse()?,
            "kappa" => {
                self.kappa = match value {
                    "corollary" => KappaChoice::Corollary,
                    v => KappaChoice::Value(num(v).map_err(|e| bad(&e))?),
                }
            }
            "nu" => self.nu = num(value).map_err(|e| bad(&e))?,
            "levels" => self.levels = Some(num(value).map_err(|e| bad(&e))?),
            "steps" | "t" => self.steps = num(value).map_err(|e| bad(&e))?,
            "pairs" | "pair_samples" => self.pair_samples = num(value).map_err(|e| bad(&e))?,
            "warmup" => self.warmup = Some(num(value).map_err(|e| bad(&e))?),
            "alpha_hat" => self.alpha_hat = num(value).map_err(|e| bad(&e))?,
            "seed" => {
                let s = num(value).map_err(|e| bad(&e))?;
                self.seed = s;
                self.seeds = Seeds::from_master(s);
            }
            "placement_seed" => self.seeds.placement = num(value).map_err(|e| bad(&e))?,
            "mobility_seed" => self.seeds.mobility = num(value).map_err(|e| bad(&e))?,
            "permutation_seed" => self.seeds.permutation = num(value).map_err(|e| bad(&e))?,
            "sampling_seed" => self.seeds.sampling = num(value).map_err(|e| bad(&e))?,
            "dump_dir" => self.dump_dir = Some(PathBuf::from(value)),
            "n_list" => {
                self.n_list = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(|v| num(v).map_err(|e| bad(&e)))
                    .collect::<Result<_>>()?
            }
            "trials" => self.trials = num(value).map_err(|e| bad(&e))?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

impl FromStr for SimConfig {
    type Err = Error;

    /// Settings apply in file order, so `seed` before `placement_seed` keeps
    /// the explicit sub-seed.
    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let k = k.trim().to_ascii_lowercase();
            if seen.insert(k.clone(), lineno).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
            cfg.set(&k, v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
