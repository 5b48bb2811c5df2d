//! Run configuration: a TOML file, overridden by command-line flags.
//!
//! ```toml
//! n = 3
//! width = 6          # faces per row of the unreduced window
//! height = 6
//! output = "out"
//!
//! [boundary]
//! kind = "random"    # identity | random | file
//! seed = 42
//! scale = 0.1
//! # path = "boundary.txt"   (kind = "file": an unreduced-field file)
//!
//! [solver]
//! max_iterations = 50000
//! g_tol = 1e-12          # tighter than the library default; the suites differentiate the solution
//! ep_tol = 1e-8
//! armijo = 1e-4
//! backtrack = 0.5
//! max_step = 0.2
//! initializer = "blend"   # blend | identity
//!
//! [tolerances]
//! admissibility = 1e-10
//! consistency = 1e-9
//! roundtrip = 1e-12
//! split = 1e-12
//! cartan = 1e-6
//! noether = 1e-8          # scaled by 1 + |action|
//! jacobi = 1e-4
//! jacobi_step = 1e-5
//! multiplier = 1e-10
//! cancellation = 1e-12
//! elimination = 1e-9
//! regularity = 1e-8
//!
//! [verify]
//! instances = 100
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use lielag::harmonic::{Initializer, SolverConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Identity,
    Random,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitializerKind {
    Blend,
    Identity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub kind: BoundaryKind,
    pub seed: u64,
    pub scale: f64,
    pub path: Option<PathBuf>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self { kind: BoundaryKind::Random, seed: 42, scale: 0.1, path: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iterations: usize,
    pub g_tol: f64,
    pub ep_tol: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_step: f64,
    pub initializer: InitializerKind,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            max_iterations: d.max_iterations,
            g_tol: 1e-12,
            ep_tol: d.ep_tol,
            armijo: d.armijo,
            backtrack: d.backtrack,
            max_step: d.max_step,
            initializer: InitializerKind::Blend,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub admissibility: f64,
    pub consistency: f64,
    pub roundtrip: f64,
    pub split: f64,
    pub cartan: f64,
    pub noether: f64,
    pub jacobi: f64,
    pub jacobi_step: f64,
    pub multiplier: f64,
    pub cancellation: f64,
    pub elimination: f64,
    pub regularity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            admissibility: 1e-10,
            consistency: 1e-9,
            roundtrip: 1e-12,
            split: 1e-12,
            cartan: 1e-6,
            noether: 1e-8,
            jacobi: 1e-4,
            jacobi_step: 1e-5,
            multiplier: 1e-10,
            cancellation: 1e-12,
            elimination: 1e-9,
            regularity: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub instances: usize,
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { instances: 100, seed: 7 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n: usize,
    pub width: usize,
    pub height: usize,
    pub output: PathBuf,
    pub boundary: BoundaryConfig,
    pub solver: SolverSection,
    pub tolerances: Tolerances,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 3,
            width: 6,
            height: 6,
            output: PathBuf::from("out"),
            boundary: BoundaryConfig::default(),
            solver: SolverSection::default(),
            tolerances: Tolerances::default(),
            verify: VerifySection::default(),
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Matrix size of SO(n).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Faces per row of the unreduced window.
    #[arg(long, global = true)]
    pub width: Option<usize>,
    /// Faces per column of the unreduced window.
    #[arg(long, global = true)]
    pub height: Option<usize>,
    /// Directory for report and field files.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub boundary: Option<BoundaryKind>,
    /// Seed of the random boundary.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Geodesic size of the random boundary.
    #[arg(long, global = true)]
    pub scale: Option<f64>,
    /// Unreduced-field file for `--boundary file`.
    #[arg(long, global = true)]
    pub boundary_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub g_tol: Option<f64>,
    #[arg(long, global = true)]
    pub ep_tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub initializer: Option<InitializerKind>,
    /// Number of random instances for the identity suites.
    #[arg(long, global = true)]
    pub instances: Option<usize>,
    /// Seed for suite data.
    #[arg(long, global = true)]
    pub verify_seed: Option<u64>,
}

impl RunConfig {
    pub fn load(overrides: &Overrides) -> Result<Self, CliError> {
        let mut config = match &overrides.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        let o = overrides;
        macro_rules! take {
            ($($field:ident => $($target:ident).+),* $(,)?) => {
                $(if let Some(v) = o.$field.clone() { config.$($target).+ = v; })*
            };
        }
        take!(
            n => n,
            width => width,
            height => height,
            output => output,
            boundary => boundary.kind,
            seed => boundary.seed,
            scale => boundary.scale,
            max_iterations => solver.max_iterations,
            g_tol => solver.g_tol,
            ep_tol => solver.ep_tol,
            initializer => solver.initializer,
            instances => verify.instances,
            verify_seed => verify.seed,
        );
        if let Some(p) = &o.boundary_path {
            config.boundary.path = Some(p.clone());
        }
        config.validate()?;
        Ok(config)
    }

    fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fail-fast checks against every module's preconditions.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Usage(m));
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if self.width < 2 || self.height < 2 {
            return fail(format!("the window needs at least 2x2 faces, got {}x{}", self.width, self.height));
        }
        if !(self.boundary.scale.is_finite() && self.boundary.scale >= 0.0) {
            return fail(format!("boundary scale must be finite and non-negative, got {}", self.boundary.scale));
        }
        if self.boundary.kind == BoundaryKind::File && self.boundary.path.is_none() {
            return fail("boundary kind `file` needs a path".into());
        }
        let t = &self.tolerances;
        let positive = [
            ("solver.g_tol", self.solver.g_tol),
            ("solver.ep_tol", self.solver.ep_tol),
            ("solver.max_step", self.solver.max_step),
            ("tolerances.admissibility", t.admissibility),
            ("tolerances.consistency", t.consistency),
            ("tolerances.roundtrip", t.roundtrip),
            ("tolerances.split", t.split),
            ("tolerances.cartan", t.cartan),
            ("tolerances.noether", t.noether),
            ("tolerances.jacobi", t.jacobi),
            ("tolerances.jacobi_step", t.jacobi_step),
            ("tolerances.multiplier", t.multiplier),
            ("tolerances.cancellation", t.cancellation),
            ("tolerances.elimination", t.elimination),
            ("tolerances.regularity", t.regularity),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return fail(format!("{name} must be positive, got {value}"));
            }
        }
        for (name, value) in [("solver.armijo", self.solver.armijo), ("solver.backtrack", self.solver.backtrack)] {
            if !(value > 0.0 && value < 1.0) {
                return fail(format!("{name} must lie in (0, 1), got {value}"));
            }
        }
        if self.verify.instances == 0 {
            return fail("verify.instances must be at least 1".into());
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            max_iterations: s.max_iterations,
            g_tol: s.g_tol,
            ep_tol: s.ep_tol,
            armijo: s.armijo,
            backtrack: s.backtrack,
            max_step: s.max_step,
            initializer: match s.initializer {
                InitializerKind::Blend => Initializer::BoundaryBlend,
                InitializerKind::Identity => Initializer::Identity,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c: RunConfig = toml::from_str("n = 4\n[solver]\ng_tol = 1e-11\n").unwrap();
        assert_eq!(c.n, 4);
        assert_eq!(c.solver.g_tol, 1e-11);
        assert_eq!(c.width, 6);
        assert_eq!(c.boundary.kind, BoundaryKind::Random);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("wdth = 3\n").is_err());
        assert!(toml::from_str::<RunConfig>("[boundary]\nkind = \"sphere\"\n").is_err());
    }

    #[test]
    fn flags_win_over_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "width = 4\nheight = 5\n[boundary]\nseed = 1\n").unwrap();
        let o = Overrides { config: Some(path), width: Some(3), seed: Some(9), ..Overrides::default() };
        let c = RunConfig::load(&o).unwrap();
        assert_eq!((c.width, c.height, c.boundary.seed), (3, 5, 9));
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for o in [
            Overrides { n: Some(1), ..Overrides::default() },
            Overrides { g_tol: Some(0.0), ..Overrides::default() },
            Overrides { scale: Some(f64::NAN), ..Overrides::default() },
            Overrides { boundary: Some(BoundaryKind::File), ..Overrides::default() },
        ] {
            assert!(matches!(RunConfig::load(&o), Err(CliError::Usage(_))));
        }
    }
}
