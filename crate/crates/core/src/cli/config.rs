//! TOML scenario files: parsing, dotted-key overrides and validation.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use toml::{Table, Value};

use crate::controller::GainInputs;
use crate::error::{Error, Result};
use crate::numerics::{Mat, Vector};
use crate::plant::{PlantConfig, ReferenceConfig, ReferenceSignal, Regressor, TrueParameter};
use crate::secondary::IePolicy;
use crate::simulator::{
    default_eps, random_estimate, AlphaRule, InitialConditions, IntegratorConfig, ScenarioConfig,
    ScenarioParts,
};

/// A matrix written as a scalar (multiple of the identity, or a filled
/// matrix when not square), a flat list (column), or nested rows.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Column(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    /// Builds the matrix, checking it against `shape` when given.
    pub fn to_mat(&self, key: &str, shape: Option<(usize, usize)>) -> Result<Mat> {
        let m = match self {
            MatrixSpec::Scalar(v) => {
                let (r, c) =
                    shape.ok_or_else(|| Error::invalid(key, "a scalar needs a known shape"))?;
                if r == c {
                    Mat::identity(r, c) * *v
                } else {
                    Mat::from_element(r, c, *v)
                }
            }
            MatrixSpec::Column(v) => Mat::from_column_slice(v.len(), 1, v),
            MatrixSpec::Rows(rows) => {
                let cols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::invalid(key, "rows have different lengths"));
                }
                let data: Vec<f64> = rows.iter().flatten().copied().collect();
                Mat::from_row_slice(rows.len(), cols, &data)
            }
        };
        if let Some(expected) = shape {
            if m.shape() != expected {
                return Err(Error::invalid(
                    key,
                    format!(
                        "must be {}x{}, got {}x{}",
                        expected.0,
                        expected.1,
                        m.nrows(),
                        m.ncols()
                    ),
                ));
            }
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(key, "entries must be finite"));
        }
        Ok(m)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantSection {
    #[serde(rename = "A")]
    a: MatrixSpec,
    #[serde(rename = "B")]
    b: MatrixSpec,
    regressor: Regressor,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceSection {
    #[serde(rename = "A_m")]
    a_m: MatrixSpec,
    #[serde(rename = "B_m")]
    b_m: MatrixSpec,
    channels: Vec<ReferenceSignal>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthSection {
    #[serde(rename = "W_star")]
    w_star: MatrixSpec,
    delta_amplitudes: Option<MatrixSpec>,
    delta_frequencies: Option<MatrixSpec>,
    #[serde(rename = "W_bar")]
    w_bar: f64,
    delta_bar: Option<f64>,
    delta_dot_bar: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsSection {
    #[serde(rename = "Gamma_W")]
    gamma_w: MatrixSpec,
    #[serde(rename = "Gamma_W_star")]
    gamma_w_star: MatrixSpec,
    sigma: f64,
    gamma1: f64,
    gamma2: f64,
    gamma3: f64,
    p_f: f64,
    p_ff: f64,
    epsilon: Option<f64>,
    epsilon_star: Option<f64>,
    #[serde(rename = "Q_m")]
    q_m: Option<MatrixSpec>,
    #[serde(default)]
    alpha_rule: AlphaRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IePolicyKind {
    Window,
    Threshold,
}

impl std::str::FromStr for IePolicyKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "window" => Ok(Self::Window),
            "threshold" => Ok(Self::Threshold),
            other => Err(format!(
                "unknown IE policy {other:?} (expected window or threshold)"
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IePolicySection {
    #[serde(default = "default_ie_kind")]
    kind: IePolicyKind,
    t_ie: Option<f64>,
    gamma_ie: Option<f64>,
}

fn default_ie_kind() -> IePolicyKind {
    IePolicyKind::Threshold
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoggingSection {
    #[serde(default = "default_log_every")]
    log_every: usize,
}

fn default_log_every() -> usize {
    10
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    x0: Option<Vec<f64>>,
    x_m0: Option<Vec<f64>>,
    #[serde(rename = "W_hat0")]
    w_hat0: Option<MatrixSpec>,
    #[serde(rename = "W_hat_star0")]
    w_hat_star0: Option<MatrixSpec>,
    #[serde(default)]
    random_estimates: bool,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DebugSection {
    #[serde(default)]
    disable_projection: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    #[serde(default)]
    parameters: BTreeMap<String, Vec<Value>>,
}

const SECTIONS: [&str; 10] = [
    "plant",
    "reference",
    "true_parameter",
    "gains",
    "integrator",
    "ie_policy",
    "logging",
    "initial",
    "debug",
    "sweep",
];

/// Parsed but not yet validated scenario file, with overrides applied in place.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDocument {
    root: Table,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::invalid("config", e.to_string()))?;
        for key in root.keys() {
            if key != "name" && !SECTIONS.contains(&key.as_str()) {
                return Err(Error::invalid(key.clone(), "unknown section"));
            }
        }
        Ok(Self { root })
    }

    pub fn table(&self) -> &Table {
        &self.root
    }

    /// Applies `key=value`; the value is read as a TOML literal, or as a
    /// plain string if it does not parse.
    pub fn set_str(&mut self, key: &str, value: &str) -> Result<()> {
        self.set(key, parse_value(value))
    }

    /// Sets a dotted key, creating intermediate tables.
    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::invalid(key, "malformed override key"));
        }
        if !SECTIONS.contains(&parts[0]) && !(parts.len() == 1 && parts[0] == "name") {
            return Err(Error::invalid(key, "unknown section"));
        }
        let mut table = &mut self.root;
        for part in &parts[..parts.len() - 1] {
            let entry = table
                .entry(part.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| Error::invalid(key, format!("{part} is not a table")))?;
        }
        table.insert(parts[parts.len() - 1].to_string(), value);
        Ok(())
    }

    /// Parameter grid from `[sweep] parameters`, in sorted key order with the
    /// last key varying fastest.
    pub fn sweep_grid(&self) -> Result<Vec<Vec<(String, Value)>>> {
        let sweep: SweepSection = section(&self.root, "sweep")?.unwrap_or_default();
        if sweep.parameters.is_empty() {
            return Err(Error::invalid(
                "sweep.parameters",
                "no sweep parameters declared",
            ));
        }
        let mut grid: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for (key, values) in &sweep.parameters {
            if values.is_empty() {
                return Err(Error::invalid(
                    format!("sweep.parameters.{key}"),
                    "empty value list",
                ));
            }
            grid = grid
                .into_iter()
                .flat_map(|point| {
                    values.iter().map(move |v| {
                        let mut p = point.clone();
                        p.push((key.clone(), v.clone()));
                        p
                    })
                })
                .collect();
        }
        Ok(grid)
    }

    /// Validates and assembles the scenario.
    pub fn build(&self) -> Result<ScenarioConfig> {
        let root = &self.root;
        let name = match root.get("name") {
            None => "scenario".to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(Error::invalid("name", "must be a string")),
        };

        let plant_s: PlantSection = required(root, "plant")?;
        let a = plant_s.a.to_mat("plant.A", None)?;
        let n = a.nrows();
        let b = plant_s.b.to_mat("plant.B", None)?;
        let plant = PlantConfig::new(a, b, plant_s.regressor)?;
        let (n_u, n_w) = (plant.n_u, plant.n_w);

        let ref_s: ReferenceSection = required(root, "reference")?;
        let a_m = ref_s.a_m.to_mat("reference.A_m", Some((n, n)))?;
        let b_m = ref_s.b_m.to_mat("reference.B_m", None)?;
        let reference = ReferenceConfig::new(a_m, b_m, ref_s.channels)?;

        let truth_s: TruthSection = required(root, "true_parameter")?;
        let w_shape = Some((n_w, n_u));
        let w_star = truth_s.w_star.to_mat("true_parameter.W_star", w_shape)?;
        let zeros = || Mat::zeros(n_w, n_u);
        let amps = match &truth_s.delta_amplitudes {
            Some(m) => m.to_mat("true_parameter.delta_amplitudes", w_shape)?,
            None => zeros(),
        };
        let freqs = match &truth_s.delta_frequencies {
            Some(m) => m.to_mat("true_parameter.delta_frequencies", w_shape)?,
            None => zeros(),
        };
        let truth = TrueParameter::new(
            w_star,
            amps,
            freqs,
            truth_s.w_bar,
            truth_s.delta_bar,
            truth_s.delta_dot_bar,
        )?;

        let gains_s: GainsSection = required(root, "gains")?;
        let alpha = gains_s.alpha_rule.alpha(&truth.bounds);
        let alpha_star = truth.bounds.w_bar;
        let gains = GainInputs {
            gamma_w: gains_s.gamma_w.to_mat("gains.Gamma_W", Some((n_w, n_w)))?,
            gamma_w_star: gains_s
                .gamma_w_star
                .to_mat("gains.Gamma_W_star", Some((n_w, n_w)))?,
            sigma: gains_s.sigma,
            gamma1: gains_s.gamma1,
            gamma2: gains_s.gamma2,
            gamma3: gains_s.gamma3,
            p_f: gains_s.p_f,
            p_ff: gains_s.p_ff,
            eps: gains_s.epsilon.unwrap_or_else(|| default_eps(alpha)),
            eps_star: gains_s
                .epsilon_star
                .unwrap_or_else(|| default_eps(alpha_star)),
            q_m: match &gains_s.q_m {
                Some(m) => m.to_mat("gains.Q_m", Some((n, n)))?,
                None => Mat::identity(n, n),
            },
        };

        let integrator: IntegratorConfig = section(root, "integrator")?.unwrap_or_default();
        let ie_s: IePolicySection = required(root, "ie_policy")?;
        let ie_policy = match ie_s.kind {
            IePolicyKind::Window => IePolicy::FixedWindow {
                t_ie: ie_s.t_ie.ok_or_else(|| {
                    Error::invalid("ie_policy.t_ie", "required by the window policy")
                })?,
            },
            IePolicyKind::Threshold => IePolicy::OnlineThreshold {
                gamma_ie: ie_s.gamma_ie.ok_or_else(|| {
                    Error::invalid("ie_policy.gamma_ie", "required by the threshold policy")
                })?,
            },
        };
        let log_every = section::<LoggingSection>(root, "logging")?
            .map_or(default_log_every(), |l| l.log_every);

        let init_s: InitialSection = section(root, "initial")?.unwrap_or_default();
        let x0 = Vector::from_vec(init_s.x0.clone().unwrap_or_else(|| vec![0.0; n]));
        let x_m0 = init_s
            .x_m0
            .clone()
            .map_or_else(|| x0.clone(), Vector::from_vec);
        let (w_hat0, w_hat_star0) = if init_s.random_estimates {
            if init_s.w_hat0.is_some() || init_s.w_hat_star0.is_some() {
                return Err(Error::invalid(
                    "initial.random_estimates",
                    "cannot be combined with explicit W_hat0 / W_hat_star0",
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(init_s.seed);
            let w = random_estimate(&mut rng, n_w, n_u, alpha);
            let ws = random_estimate(&mut rng, n_w, n_u, alpha_star);
            (w, ws)
        } else {
            let w = match &init_s.w_hat0 {
                Some(m) => m.to_mat("initial.W_hat0", w_shape)?,
                None => zeros(),
            };
            let ws = match &init_s.w_hat_star0 {
                Some(m) => m.to_mat("initial.W_hat_star0", w_shape)?,
                None => zeros(),
            };
            (w, ws)
        };
        let debug: DebugSection = section(root, "debug")?.unwrap_or_default();

        ScenarioConfig::new(ScenarioParts {
            name,
            plant,
            reference,
            truth,
            gains,
            alpha_rule: gains_s.alpha_rule,
            integrator,
            initial: InitialConditions {
                x0,
                x_m0,
                w_hat0,
                w_hat_star0,
            },
            ie_policy,
            log_every,
            seed: init_s.seed,
            projection: !debug.disable_projection,
        })
    }
}

/// Reads a `--set` value as a TOML literal, falling back to a string.
pub fn parse_value(text: &str) -> Value {
    format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    ConfigDocument::parse(text)?.build()
}

fn section<T: DeserializeOwned>(root: &Table, name: &str) -> Result<Option<T>> {
    match root.get(name) {
        None => Ok(None),
        Some(v) => T::deserialize(v.clone())
            .map(Some)
            .map_err(|e| section_error(name, &e)),
    }
}

fn required<T: DeserializeOwned>(root: &Table, name: &str) -> Result<T> {
    section(root, name)?.ok_or_else(|| Error::invalid(name, "missing section"))
}

/// Names the offending field when serde reports one.
fn section_error(name: &str, e: &toml::de::Error) -> Error {
    let msg = e.message().to_string();
    for marker in ["missing field `", "unknown field `"] {
        if let Some(rest) = msg.strip_prefix(marker) {
            if let Some(field) = rest.split('`').next() {
                return Error::invalid(format!("{name}.{field}"), msg.clone());
            }
        }
    }
    Error::invalid(name, msg)
}
