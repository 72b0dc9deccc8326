//! Run configuration and its validation.

use std::fmt;
use std::str::FromStr;

use romkit::{ExplicitScheme, GaussNewtonSettings, MultistepCoefficients};
use romkit_burgers::{BurgersParams, JacobianMode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("method `{method}` cannot run with stepper `{stepper}` ({hint})")]
    MethodStepperMismatch {
        method: Method,
        stepper: Stepper,
        hint: &'static str,
    },
    #[error("method `{0}` needs a stepper")]
    MissingStepper(Method),
    #[error("method `{0}` needs a reduced dimension (--rom-size or --identity-basis)")]
    MissingRomSize(Method),
    #[error("sample-mesh hyper-reduction needs a collocation weighting, got `{0}`")]
    SampleMeshWithoutCollocation(WeightingSpec),
    #[error("weighting `{0}` cannot be used with the full-order model")]
    WeightingOnFom(WeightingSpec),
    #[error("invalid value for {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ConfigError;

            fn from_str(s: &str) -> Result<Self, ConfigError> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(invalid(stringify!($name), format!(
                        "`{other}` (expected one of: {})",
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum!(Method {
    Fom => "fom",
    Galerkin => "galerkin",
    Lspg => "lspg",
    LspgSteady => "lspg-steady",
});

named_enum!(Stepper {
    ForwardEuler => "forward-euler",
    Rk4 => "rk4",
    Bdf1 => "bdf1",
    Bdf2 => "bdf2",
});

named_enum!(
    /// How collocation is realized: by selecting rows of full-mesh quantities,
    /// or by evaluating the model only on the sample mesh.
    HyperMode {
        Algebraic => "algebraic",
        SampleMesh => "sample-mesh",
    }
);

impl Stepper {
    pub fn explicit_scheme(self) -> Option<ExplicitScheme> {
        match self {
            Stepper::ForwardEuler => Some(ExplicitScheme::ForwardEuler),
            Stepper::Rk4 => Some(ExplicitScheme::Rk4),
            _ => None,
        }
    }

    pub fn multistep(self) -> Option<MultistepCoefficients<f64>> {
        match self {
            Stepper::Bdf1 => Some(MultistepCoefficients::backward_euler()),
            Stepper::Bdf2 => Some(MultistepCoefficients::bdf2()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSpec {
    Fraction(f64),
    Count(usize),
}

impl fmt::Display for SampleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSpec::Fraction(x) => write!(f, "{x}"),
            SampleSpec::Count(n) => write!(f, "#{n}"),
        }
    }
}

/// The weighting operator `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightingSpec {
    Identity,
    /// Control-volume size over Δt on every row.
    Diagonal,
    Collocation(SampleSpec),
    /// Collocation with rows scaled as in `Diagonal`.
    ScaledCollocation(SampleSpec),
}

impl WeightingSpec {
    pub fn sample_spec(&self) -> Option<SampleSpec> {
        match *self {
            WeightingSpec::Collocation(s) | WeightingSpec::ScaledCollocation(s) => Some(s),
            _ => None,
        }
    }

    /// The same kind of weighting with a different sample spec.
    pub fn with_samples(self, s: SampleSpec) -> Self {
        match self {
            WeightingSpec::Collocation(_) => WeightingSpec::Collocation(s),
            WeightingSpec::ScaledCollocation(_) => WeightingSpec::ScaledCollocation(s),
            other => other,
        }
    }
}

impl fmt::Display for WeightingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightingSpec::Identity => f.write_str("identity"),
            WeightingSpec::Diagonal => f.write_str("diagonal"),
            WeightingSpec::Collocation(s) => write!(f, "collocation:{s}"),
            WeightingSpec::ScaledCollocation(s) => write!(f, "scaled-collocation:{s}"),
        }
    }
}

fn parse_samples(s: &str) -> Result<SampleSpec, ConfigError> {
    if let Some(count) = s.strip_prefix('#') {
        let n: usize = count
            .parse()
            .map_err(|_| invalid("sample count", format!("`{count}`")))?;
        if n == 0 {
            return Err(invalid("sample count", "must be positive"));
        }
        return Ok(SampleSpec::Count(n));
    }
    let x: f64 = s.parse().map_err(|_| invalid("sample fraction", format!("`{s}`")))?;
    if !(x > 0.0 && x <= 1.0) {
        return Err(invalid("sample fraction", format!("{x} is not in (0, 1]")));
    }
    Ok(SampleSpec::Fraction(x))
}

impl FromStr for WeightingSpec {
    type Err = ConfigError;

    /// `identity`, `diagonal`, `collocation:<fraction>`, `scaled-collocation:<fraction>`;
    /// a fraction written `#<n>` is an absolute sample count.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.split_once(':') {
            None if s == "identity" => Ok(WeightingSpec::Identity),
            None if s == "diagonal" => Ok(WeightingSpec::Diagonal),
            None if s == "collocation" || s == "scaled-collocation" => Err(invalid(
                "weighting",
                format!("`{s}` needs a sample fraction, e.g. `{s}:0.1`"),
            )),
            Some(("collocation", rest)) => Ok(WeightingSpec::Collocation(parse_samples(rest)?)),
            Some(("scaled-collocation", rest)) => Ok(WeightingSpec::ScaledCollocation(parse_samples(rest)?)),
            _ => Err(invalid(
                "weighting",
                format!("`{s}` (expected identity, diagonal, collocation:<f> or scaled-collocation:<f>)"),
            )),
        }
    }
}

/// Where the trial basis comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSource {
    /// `Φ = I`, p = N.
    Identity,
    /// The leading `p` columns of a supplied basis.
    Given(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: BurgersParams<f64>,
    pub method: Method,
    pub stepper: Option<Stepper>,
    pub dt: f64,
    pub num_steps: usize,
    pub basis: Option<BasisSource>,
    pub weighting: WeightingSpec,
    pub hyper_mode: HyperMode,
    pub seed: u64,
    pub solver: GaussNewtonSettings<f64>,
    pub jacobian: JacobianMode,
}

impl RunConfig {
    /// Defaults for the Burgers problem on `num_cells` cells, Δt = 5e-4.
    pub fn new(num_cells: usize, method: Method, stepper: Option<Stepper>) -> Self {
        Self {
            params: BurgersParams::new(num_cells),
            method,
            stepper,
            dt: 5e-4,
            num_steps: 1,
            basis: None,
            weighting: WeightingSpec::Identity,
            hyper_mode: HyperMode::SampleMesh,
            seed: 0,
            solver: GaussNewtonSettings::default(),
            jacobian: JacobianMode::Sparse,
        }
    }

    pub fn rom_size(&self) -> Option<usize> {
        match self.basis {
            Some(BasisSource::Identity) => Some(self.params.num_cells),
            Some(BasisSource::Given(p)) => Some(p),
            None => None,
        }
    }

    /// The stepper family each method accepts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params
            .validate()
            .map_err(|e| invalid("problem parameters", e.to_string()))?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("{} is not positive", self.dt)));
        }
        self.solver
            .validate()
            .map_err(|e| invalid("solver settings", e.to_string()))?;
        let n = self.params.num_cells;
        match (self.method, self.stepper) {
            (Method::LspgSteady, Some(s)) => {
                return Err(ConfigError::MethodStepperMismatch {
                    method: self.method,
                    stepper: s,
                    hint: "steady problems take no time stepper",
                })
            }
            (Method::LspgSteady, None) => {}
            (m, None) => return Err(ConfigError::MissingStepper(m)),
            (Method::Galerkin, Some(s)) if s.explicit_scheme().is_none() => {
                return Err(ConfigError::MethodStepperMismatch {
                    method: Method::Galerkin,
                    stepper: s,
                    hint: "Galerkin uses explicit schemes: forward-euler or rk4",
                })
            }
            (Method::Lspg, Some(s)) if s.multistep().is_none() => {
                return Err(ConfigError::MethodStepperMismatch {
                    method: Method::Lspg,
                    stepper: s,
                    hint: "LSPG uses implicit schemes: bdf1 or bdf2",
                })
            }
            _ => {}
        }
        if self.method != Method::LspgSteady && self.num_steps == 0 {
            return Err(invalid("num-steps", "must be at least 1"));
        }
        if self.method == Method::Fom {
            if self.weighting != WeightingSpec::Identity {
                return Err(ConfigError::WeightingOnFom(self.weighting));
            }
            return Ok(());
        }
        match self.rom_size() {
            None => return Err(ConfigError::MissingRomSize(self.method)),
            Some(p) if p == 0 || p > n => {
                return Err(invalid("rom-size", format!("{p} is not in 1..={n}")));
            }
            _ => {}
        }
        if self.hyper_mode == HyperMode::SampleMesh
            && self.weighting.sample_spec().is_none()
            && self.weighting != WeightingSpec::Identity
        {
            return Err(ConfigError::SampleMeshWithoutCollocation(self.weighting));
        }
        if self.hyper_mode == HyperMode::SampleMesh
            && self.method == Method::LspgSteady
            && self.weighting.sample_spec().is_some()
        {
            return Err(invalid(
                "hyper-reduction",
                "steady LSPG supports algebraic weighting only",
            ));
        }
        Ok(())
    }
}
