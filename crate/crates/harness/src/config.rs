//! Experiment configuration: a flat `key = value` file with command-line
//! overrides on top.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use cutdg::solver::{DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use cutdg::{refine_counts, BackgroundMesh, LevelSet, Mesh, Penalties, SolverMethod, SolverOptions, Surface, Vec3};

use crate::HarnessError;

pub const DEFAULT_DELTA_SAMPLES: usize = 50;

/// Torus radii and the enlargement of its bounding box.
pub const TORUS_MAJOR: f64 = 1.0;
pub const TORUS_MINOR: f64 = 1.0 / 3.0;
pub const TORUS_BOX_FACTOR: f64 = 1.03;
pub const SPHERE_BOX_HALF_WIDTH: f64 = 1.21;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryKind {
    Sphere,
    Torus,
}

impl GeometryKind {
    pub fn levelset(self) -> Surface {
        match self {
            Self::Sphere => LevelSet::sphere(1.0),
            Self::Torus => LevelSet::torus(TORUS_MAJOR, TORUS_MINOR),
        }
    }

    pub fn base_counts(self) -> [usize; 3] {
        match self {
            Self::Sphere => [12, 12, 12],
            Self::Torus => [12, 12, 3],
        }
    }

    pub fn counts(self, level: u32) -> [usize; 3] {
        refine_counts(level, self.base_counts())
    }

    /// Background mesh of refinement `level`.
    pub fn mesh(self, level: u32) -> cutdg::Result<Mesh> {
        let counts = self.counts(level);
        match self {
            Self::Sphere => BackgroundMesh::build(
                Vec3::splat(-SPHERE_BOX_HALF_WIDTH),
                Vec3::splat(SPHERE_BOX_HALF_WIDTH),
                counts,
            ),
            Self::Torus => {
                let w = TORUS_BOX_FACTOR * (TORUS_MAJOR + TORUS_MINOR);
                let h = TORUS_BOX_FACTOR * TORUS_MINOR;
                BackgroundMesh::build_anisotropic(Vec3::new(-w, -w, -h), Vec3::new(w, w, h), counts)
            }
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sphere => "sphere",
            Self::Torus => "torus",
        })
    }
}

impl FromStr for GeometryKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "torus" => Ok(Self::Torus),
            _ => Err(HarnessError::Config(format!("unknown geometry '{s}' (sphere | torus)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: GeometryKind,
    pub degree: usize,
    pub epsilon: f64,
    /// Refinement levels, ascending. Sweeps use the first one.
    pub levels: Vec<u32>,
    /// Penalty overrides; unset entries take the degree dependent defaults.
    pub gamma0: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamman: Option<f64>,
    pub delta_samples: usize,
    /// Unset means direct for level studies and BiCGStab for sweeps.
    pub solver: Option<SolverMethod>,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Estimate the condition number of every sweep sample.
    pub cond: bool,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryKind::Sphere,
            degree: 1,
            epsilon: 1.0,
            levels: (0..=4).collect(),
            gamma0: None,
            gamma1: None,
            gamman: None,
            delta_samples: DEFAULT_DELTA_SAMPLES,
            solver: None,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            cond: true,
            output: PathBuf::from("."),
            seed: 0,
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, HarnessError> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("invalid value '{value}' for {key}")))
}

/// `0,1,2`, `0-4` (inclusive) or a mix like `0-2,4`.
pub fn parse_levels(value: &str) -> Result<Vec<u32>, HarnessError> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u32, u32) = (parse("levels", a.trim())?, parse("levels", b.trim())?);
                if a > b {
                    return Err(HarnessError::Config(format!("empty level range '{part}'")));
                }
                out.extend(a..=b);
            }
            None => out.push(parse("levels", part)?),
        }
    }
    Ok(out)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HarnessError::Config(format!("invalid value '{value}' for {key}"))),
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "geometry" => self.geometry = value.parse()?,
            "degree" => self.degree = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "levels" => self.levels = parse_levels(value)?,
            "gamma0" => self.gamma0 = Some(parse(key, value)?),
            "gamma1" => self.gamma1 = Some(parse(key, value)?),
            "gamman" => self.gamman = Some(parse(key, value)?),
            "delta_samples" => self.delta_samples = parse(key, value)?,
            "solver" => self.solver = Some(value.parse().map_err(|e: cutdg::Error| HarnessError::Config(e.to_string()))?),
            "tolerance" | "tol" => self.tolerance = parse(key, value)?,
            "max_iterations" | "maxit" => self.max_iterations = parse(key, value)?,
            "cond" => self.cond = parse_bool(key, value)?,
            "output" | "out" => self.output = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            other => return Err(HarnessError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected 'key = value', got '{raw}'", number + 1))
            })?;
            self.set(key, value)
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", number + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if !(1..=3).contains(&self.degree) {
            return bad(format!("degree must be 1, 2 or 3, got {}", self.degree));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.levels.is_empty() {
            return bad("levels must not be empty".into());
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("levels must be strictly ascending, got {:?}", self.levels));
        }
        if self.levels.iter().any(|&l| l > 12) {
            return bad("levels above 12 are not supported".into());
        }
        if self.delta_samples == 0 {
            return bad("delta_samples must be at least 1".into());
        }
        for (name, g) in [("gamma0", self.gamma0), ("gamma1", self.gamma1), ("gamman", self.gamman)] {
            if let Some(g) = g {
                if !(g >= 0.0 && g.is_finite()) {
                    return bad(format!("{name} must be a nonnegative number, got {g}"));
                }
            }
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return bad(format!("tolerance must lie in (0, 1), got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        Ok(())
    }

    pub fn penalties(&self) -> Penalties {
        let d = Penalties::defaults(self.degree);
        Penalties {
            gamma0: self.gamma0.unwrap_or(d.gamma0),
            gamma1: self.gamma1.unwrap_or(d.gamma1),
            gamman: self.gamman.unwrap_or(d.gamman),
        }
    }

    pub fn solver_options(&self, fallback: SolverMethod) -> SolverOptions {
        SolverOptions {
            method: self.solver.unwrap_or(fallback),
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }

    /// Mesh offsets `i / delta_samples`, `i = 0..delta_samples`.
    pub fn deltas(&self) -> Vec<f64> {
        (0..self.delta_samples)
            .map(|i| i as f64 / self.delta_samples as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let cfg = ExperimentConfig::from_text(
            "# torus run\ngeometry = torus\ndegree=2\nlevels = 0-2, 4\ngamman = 0\nsolver = bicgstab\ndelta_samples = 5 # few\n",
        )
        .unwrap();
        assert_eq!(cfg.geometry, GeometryKind::Torus);
        assert_eq!(cfg.levels, vec![0, 1, 2, 4]);
        assert_eq!(cfg.penalties().gamma0, 20.0);
        assert_eq!(cfg.penalties().gamman, 0.0);
        assert_eq!(cfg.solver, Some(SolverMethod::Bicgstab));
        assert_eq!(cfg.delta_samples, 5);
    }

    #[test]
    fn rejects_invalid() {
        for text in [
            "degree = 4",
            "levels = 2,1",
            "levels =",
            "delta_samples = 0",
            "geometry = cube",
            "colour = red",
            "epsilon = -1",
            "no equals sign",
            "gamma0 = -1",
        ] {
            assert!(matches!(ExperimentConfig::from_text(text), Err(HarnessError::Config(_))), "{text}");
        }
    }

    #[test]
    fn deltas_are_uniform_in_unit_interval() {
        let cfg = ExperimentConfig {
            delta_samples: 4,
            ..Default::default()
        };
        assert_eq!(cfg.deltas(), vec![0.0, 0.25, 0.5, 0.75]);
        let one = ExperimentConfig {
            delta_samples: 1,
            ..Default::default()
        };
        assert_eq!(one.deltas(), vec![0.0]);
    }

    #[test]
    fn torus_box() {
        let m = GeometryKind::Torus.mesh(0).unwrap();
        assert_eq!(m.counts(), [12, 12, 3]);
    }
}
