//! TOML scenario files: parsing, defaults, validation and the normalized echo.
//!
//! ```toml
//! name = "example"
//! [grid]        x_min, x_max, n_cells
//! [initial]     kind = "constant" (value) | "gaussian" (base, amplitude, center, width)
//! [kernel]      eta, delta
//! [ramps]       rate_basis, on_interval, q_on, off_interval, q_off     (optional)
//! [law]         name                                                   (optional)
//! [solver]      cfl, t_final, left_boundary, right_boundary, snapshot_stride
//! [functional]  a, b                                                   (optional)
//! [sweep]       deltas                                                 (sweep)
//! [stability]   channel, epsilons, c_surrogate                         (stability)
//! [convergence] n_cells                                                (convergence)
//! ```
//!
//! Rates are a number or `{ times = [...], values = [...] }`. Boundaries are a
//! Dirichlet density, `"extrapolate"` or `"wall"`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{default_deltas, Channel, InitialDatum, PerturbationSpec, Scenario};
use crate::mesh::build_grid;
use crate::model::{Interval, RampConfig, RateBasis, RateFunction, VelocityLaw};
use crate::output::read_text;
use crate::solver::{BoundaryMode, SolverConfig, DEFAULT_CFL};

/// Scenarios shipped with the binary, selectable by name.
pub const BUNDLED: &[(&str, &str)] = &[("reference", include_str!("../scenarios/reference.toml"))];

const DEFAULT_STRIDE: usize = 100;
const DEFAULT_SWEEP_POINTS: usize = 11;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramps: Option<RampsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub n_cells: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub eta: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    Constant(f64),
    Table(RateTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTable {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_basis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub on_interval: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_on: Option<RateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub off_interval: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_off: Option<RateSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundarySpec {
    Value(f64),
    Mode(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub cfl: Option<f64>,
    pub t_final: Option<f64>,
    pub left_boundary: Option<BoundarySpec>,
    pub right_boundary: Option<BoundarySpec>,
    pub snapshot_stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSection {
    pub a: Option<f64>,
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub channel: Option<String>,
    pub epsilons: Option<Vec<f64>>,
    /// Growth rate of the envelope check; defaults to `H`.
    pub c_surrogate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub n_cells: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySettings {
    pub spec: PerturbationSpec,
    pub c_surrogate: f64,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub scenario: Scenario,
    pub sweep: Option<Vec<f64>>,
    pub stability: Option<StabilitySettings>,
    pub convergence: Option<Vec<usize>>,
    /// Every default filled in; parses back to the same configuration.
    pub normalized: RawConfig,
}

impl ScenarioConfig {
    /// The normalized configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(&self.normalized).expect("configuration serializes")
    }
}

fn required<T: Clone>(v: &Option<T>, field: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::config(field, "is required"))
}

/// Re-labels errors raised by shared constructors with the config key.
fn at(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { field: inner, message } => {
            let suffix = inner.split_once('.').map(|(_, s)| s);
            let field = match suffix {
                Some(s) if inner.starts_with("rate") => format!("{field}.{s}"),
                _ if inner.starts_with(field) => inner,
                _ => field.to_string(),
            };
            Error::Config { field, message }
        }
        other => other,
    }
}

fn interval(v: [f64; 2], field: &str) -> Result<Interval> {
    Interval::new(v[0], v[1]).map_err(at(field))
}

fn rate(spec: &RateSpec, field: &str) -> Result<RateFunction> {
    match spec {
        RateSpec::Constant(q) => RateFunction::constant(*q).map_err(at(field)),
        RateSpec::Table(t) => RateFunction::piecewise(t.times.clone(), t.values.clone()).map_err(at(field)),
    }
}

fn boundary(spec: &BoundarySpec, field: &str) -> Result<BoundaryMode> {
    match spec {
        BoundarySpec::Value(v) => Ok(BoundaryMode::Dirichlet(*v)),
        BoundarySpec::Mode(m) => match m.as_str() {
            "extrapolate" => Ok(BoundaryMode::Extrapolate),
            "wall" => Ok(BoundaryMode::Wall),
            other => Err(Error::config(
                field,
                format!("unknown boundary {other:?} (expected a density, \"extrapolate\" or \"wall\")"),
            )),
        },
    }
}

fn boundary_spec(mode: BoundaryMode) -> BoundarySpec {
    match mode {
        BoundaryMode::Dirichlet(v) => BoundarySpec::Value(v),
        BoundaryMode::Extrapolate => BoundarySpec::Mode("extrapolate".into()),
        BoundaryMode::Wall => BoundarySpec::Mode("wall".into()),
    }
}

fn initial(sec: &InitialSection) -> Result<InitialDatum> {
    let kind = sec.kind.as_deref().unwrap_or("constant");
    let datum = match kind {
        "constant" => {
            for (name, v) in [
                ("base", sec.base),
                ("amplitude", sec.amplitude),
                ("center", sec.center),
                ("width", sec.width),
            ] {
                if v.is_some() {
                    return Err(Error::config(format!("initial.{name}"), "is not used by kind \"constant\""));
                }
            }
            InitialDatum::Constant(required(&sec.value, "initial.value")?)
        }
        "gaussian" => {
            if sec.value.is_some() {
                return Err(Error::config("initial.value", "is not used by kind \"gaussian\""));
            }
            InitialDatum::Gaussian {
                base: required(&sec.base, "initial.base")?,
                amplitude: required(&sec.amplitude, "initial.amplitude")?,
                center: required(&sec.center, "initial.center")?,
                width: required(&sec.width, "initial.width")?,
            }
        }
        other => {
            return Err(Error::config(
                "initial.kind",
                format!("unknown kind {other:?} (expected \"constant\" or \"gaussian\")"),
            ))
        }
    };
    datum.validate()?;
    Ok(datum)
}

fn ramps(sec: &RampsSection) -> Result<RampConfig> {
    let basis = RateBasis::from_name(sec.rate_basis.as_deref().unwrap_or("ramp"))?;
    let mut cfg = RampConfig::none().with_basis(basis);
    match (sec.on_interval, &sec.q_on) {
        (Some(iv), Some(q)) => {
            cfg.on_interval = Some(interval(iv, "ramps.on_interval")?);
            cfg.q_on = rate(q, "ramps.q_on")?;
        }
        (None, None) => {}
        (Some(_), None) => return Err(Error::config("ramps.q_on", "is required with ramps.on_interval")),
        (None, Some(_)) => return Err(Error::config("ramps.on_interval", "is required with ramps.q_on")),
    }
    match (sec.off_interval, &sec.q_off) {
        (Some(iv), Some(q)) => {
            cfg.off_interval = Some(interval(iv, "ramps.off_interval")?);
            cfg.q_off = rate(q, "ramps.q_off")?;
        }
        (None, None) => {}
        (Some(_), None) => return Err(Error::config("ramps.q_off", "is required with ramps.off_interval")),
        (None, Some(_)) => return Err(Error::config("ramps.off_interval", "is required with ramps.q_off")),
    }
    Ok(cfg)
}

fn rate_spec(q: &RateFunction) -> RateSpec {
    if q.is_constant() {
        RateSpec::Constant(q.values()[0])
    } else {
        RateSpec::Table(RateTable {
            times: q.times().to_vec(),
            values: q.values().to_vec(),
        })
    }
}

/// Validates a parsed file and fills in defaults. `fallback_name` is used
/// when the file has no `name` key.
pub fn normalize(raw: &RawConfig, fallback_name: &str) -> Result<ScenarioConfig> {
    let name = raw.name.clone().unwrap_or_else(|| fallback_name.to_string());
    if name.is_empty() || name.contains(|c: char| c == ',' || c == '"' || c.is_control()) {
        return Err(Error::config("name", "must be non-empty without commas, quotes or control characters"));
    }

    let g = required(&raw.grid, "grid")?;
    let grid = build_grid(
        required(&g.x_min, "grid.x_min")?,
        required(&g.x_max, "grid.x_max")?,
        required(&g.n_cells, "grid.n_cells")?,
    )?;
    let datum = initial(&required(&raw.initial, "initial")?)?;
    let k = required(&raw.kernel, "kernel")?;
    let eta = required(&k.eta, "kernel.eta")?;
    let delta = required(&k.delta, "kernel.delta")?;
    let ramps = ramps(&raw.ramps.clone().unwrap_or_default())?;
    let law = VelocityLaw::from_name(raw.law.as_ref().and_then(|l| l.name.as_deref()).unwrap_or("linear"))?;

    let s = required(&raw.solver, "solver")?;
    let left = match &s.left_boundary {
        Some(b) => boundary(b, "solver.left_boundary")?,
        None => BoundaryMode::Dirichlet(datum.eval(grid.x_min())),
    };
    let right = match &s.right_boundary {
        Some(b) => boundary(b, "solver.right_boundary")?,
        None => BoundaryMode::Extrapolate,
    };
    let solver = SolverConfig {
        cfl: s.cfl.unwrap_or(DEFAULT_CFL),
        t_final: required(&s.t_final, "solver.t_final")?,
        left_boundary: left,
        right_boundary: right,
        snapshot_stride: s.snapshot_stride.unwrap_or(DEFAULT_STRIDE),
    };

    let f = raw.functional.clone().unwrap_or_default();
    let window = (f.a.unwrap_or(grid.x_min()), f.b.unwrap_or(grid.x_max()));

    let scenario = Scenario {
        grid,
        law,
        ramps,
        eta,
        delta,
        initial: datum,
        initial_bump: 0.0,
        solver,
        window,
    };
    scenario.validate()?;

    let sweep = raw
        .sweep
        .as_ref()
        .map(|sw| sw.deltas.clone().unwrap_or_else(|| default_deltas(eta, DEFAULT_SWEEP_POINTS)));
    if let Some(deltas) = &sweep {
        crate::experiments::SweepSpec {
            base: scenario.clone(),
            deltas: deltas.clone(),
        }
        .validate()?;
    }

    let stability = match &raw.stability {
        None => None,
        Some(st) => {
            let spec = PerturbationSpec {
                channel: Channel::from_name(&required(&st.channel, "stability.channel")?)?,
                epsilons: required(&st.epsilons, "stability.epsilons")?,
            };
            spec.validate()?;
            for &e in &spec.epsilons {
                crate::experiments::perturb(&scenario, spec.channel, e)?;
            }
            let c_surrogate = match st.c_surrogate {
                Some(c) => c,
                None => scenario.constants()?.h,
            };
            if !(c_surrogate > 0.0 && c_surrogate.is_finite()) {
                return Err(Error::config("stability.c_surrogate", format!("must be > 0, got {c_surrogate}")));
            }
            Some(StabilitySettings { spec, c_surrogate })
        }
    };

    let convergence = match &raw.convergence {
        None => None,
        Some(c) => {
            let n = required(&c.n_cells, "convergence.n_cells")?;
            if n.is_empty() || n.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config("convergence.n_cells", "must be a non-empty, strictly increasing list"));
            }
            for &m in &n {
                build_grid(scenario.grid.x_min(), scenario.grid.x_max(), m).map_err(at("convergence.n_cells"))?;
            }
            Some(n)
        }
    };

    let sc = &scenario;
    let normalized = RawConfig {
        name: Some(name.clone()),
        grid: Some(GridSection {
            x_min: Some(sc.grid.x_min()),
            x_max: Some(sc.grid.x_max()),
            n_cells: Some(sc.grid.n_cells()),
        }),
        initial: Some(match datum {
            InitialDatum::Constant(v) => InitialSection {
                kind: Some("constant".into()),
                value: Some(v),
                ..Default::default()
            },
            InitialDatum::Gaussian {
                base,
                amplitude,
                center,
                width,
            } => InitialSection {
                kind: Some("gaussian".into()),
                value: None,
                base: Some(base),
                amplitude: Some(amplitude),
                center: Some(center),
                width: Some(width),
            },
        }),
        kernel: Some(KernelSection {
            eta: Some(eta),
            delta: Some(delta),
        }),
        ramps: Some(RampsSection {
            rate_basis: Some(sc.ramps.basis.name().into()),
            on_interval: sc.ramps.on_interval.map(|iv| [iv.a, iv.b]),
            q_on: sc.ramps.on_interval.map(|_| rate_spec(&sc.ramps.q_on)),
            off_interval: sc.ramps.off_interval.map(|iv| [iv.a, iv.b]),
            q_off: sc.ramps.off_interval.map(|_| rate_spec(&sc.ramps.q_off)),
        }),
        law: Some(LawSection {
            name: Some(law.name().into()),
        }),
        solver: Some(SolverSection {
            cfl: Some(sc.solver.cfl),
            t_final: Some(sc.solver.t_final),
            left_boundary: Some(boundary_spec(sc.solver.left_boundary)),
            right_boundary: Some(boundary_spec(sc.solver.right_boundary)),
            snapshot_stride: Some(sc.solver.snapshot_stride),
        }),
        functional: Some(FunctionalSection {
            a: Some(window.0),
            b: Some(window.1),
        }),
        sweep: sweep.as_ref().map(|d| SweepSection { deltas: Some(d.clone()) }),
        stability: stability.as_ref().map(|s| StabilitySection {
            channel: Some(s.spec.channel.name().into()),
            epsilons: Some(s.spec.epsilons.clone()),
            c_surrogate: Some(s.c_surrogate),
        }),
        convergence: convergence.as_ref().map(|n| ConvergenceSection { n_cells: Some(n.clone()) }),
    };

    Ok(ScenarioConfig {
        name,
        scenario,
        sweep,
        stability,
        convergence,
        normalized,
    })
}

/// Parses TOML text. `origin` labels errors; `fallback_name` names the run
/// when the file does not.
pub fn parse_config_str(text: &str, origin: &str, fallback_name: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| format!("line {}: ", text[..s.start.min(text.len())].matches('\n').count() + 1))
            .unwrap_or_default();
        Error::Parse {
            path: origin.to_string(),
            message: format!("{line}{}", e.message().split_whitespace().collect::<Vec<_>>().join(" ")),
        }
    })?;
    normalize(&raw, fallback_name)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = read_text(path)?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run")
        .to_string();
    parse_config_str(&text, &path.display().to_string(), &stem)
}

pub fn bundled(name: &str) -> Option<Result<ScenarioConfig>> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_config_str(text, &format!("bundled scenario {n}"), n))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
x_min = 0.0
x_max = 1.0
n_cells = 50

[initial]
value = 0.4

[kernel]
eta = 0.2
delta = 0.0

[solver]
t_final = 0.5
"#;

    fn err(text: &str) -> String {
        parse_config_str(text, "test", "t").unwrap_err().to_string()
    }

    #[test]
    fn bundled_reference_matches_setup() {
        let c = bundled("reference").unwrap().unwrap();
        assert_eq!(c.scenario, Scenario::reference());
        assert_eq!(c.sweep.as_ref().unwrap().len(), 11);
        assert_eq!(c.name, "reference");
        assert!(bundled("nope").is_none());
    }

    #[test]
    fn defaults_are_applied_and_echoed() {
        let c = parse_config_str(MINIMAL, "test", "minimal").unwrap();
        assert_eq!(c.scenario.solver.cfl, 0.9);
        assert_eq!(c.scenario.solver.left_boundary, BoundaryMode::Dirichlet(0.4));
        assert_eq!(c.scenario.solver.right_boundary, BoundaryMode::Extrapolate);
        assert_eq!(c.scenario.window, (0.0, 1.0));
        assert_eq!(c.scenario.ramps, RampConfig::none());
        let echo = c.echo();
        assert!(echo.contains("cfl = 0.9"), "{echo}");
        assert!(echo.contains("name = \"minimal\""), "{echo}");
    }

    #[test]
    fn echo_round_trips() {
        for text in [MINIMAL, BUNDLED[0].1] {
            let c = parse_config_str(text, "test", "x").unwrap();
            let again = parse_config_str(&c.echo(), "echo", "other").unwrap();
            assert_eq!(again, c);
        }
        let table = format!(
            "{MINIMAL}\n[ramps]\nrate_basis = \"length\"\non_interval = [0.4, 0.5]\nq_on = {{ times = [0.0, 0.2], values = [1.0, 0.5] }}\noff_interval = [0.7, 0.8]\nq_off = 0.3\n"
        );
        let c = parse_config_str(&table, "test", "x").unwrap();
        assert_eq!(c.scenario.ramps.q_on.values(), &[1.0, 0.5]);
        assert_eq!(parse_config_str(&c.echo(), "echo", "x").unwrap(), c);
    }

    #[test]
    fn delta_outside_support_is_rejected() {
        let e = err(&MINIMAL.replace("eta = 0.2\ndelta = 0.0", "eta = 0.5\ndelta = 0.7"));
        assert!(e.contains("kernel.delta") && e.contains("must lie in [-eta, eta]"), "{e}");
    }

    #[test]
    fn errors_name_the_key() {
        assert!(err(&MINIMAL.replace("t_final = 0.5", "")).contains("solver.t_final: is required"));
        assert!(err(&MINIMAL.replace("n_cells = 50", "n_cells = 2")).contains("grid.n_cells"));
        assert!(err(&MINIMAL.replace("value = 0.4", "value = 1.4")).contains("initial.value"));
        assert!(err(&format!("{MINIMAL}\n[law]\nname = \"cubic\"\n")).contains("law.name"));
        assert!(err(&format!("{MINIMAL}\n[ramps]\non_interval = [0.5, 0.4]\nq_on = 1.0\n"))
            .contains("ramps.on_interval"));
        assert!(err(&format!("{MINIMAL}\n[ramps]\non_interval = [0.4, 0.5]\nq_on = -1.0\n"))
            .contains("ramps.q_on"));
        assert!(err(&format!(
            "{MINIMAL}\n[ramps]\non_interval = [0.4, 0.5]\nq_on = {{ times = [0.1], values = [1.0] }}\n"
        ))
        .contains("ramps.q_on.times"));
        assert!(err(&MINIMAL.replace("t_final = 0.5", "t_final = 0.5\nleft_boundary = \"open\""))
            .contains("solver.left_boundary"));
        assert!(err(&format!("{MINIMAL}\n[stability]\nchannel = \"q_off\"\nepsilons = [0.1]\n"))
            .contains("stability.channel"));
        assert!(err(&format!("{MINIMAL}\n[convergence]\nn_cells = [100, 50]\n")).contains("convergence.n_cells"));
        assert!(err(&format!("{MINIMAL}\n[sweep]\ndeltas = [0.1]\n")).contains("sweep.deltas"));
    }

    #[test]
    fn unknown_keys_and_bad_types_are_rejected() {
        let e = err(&MINIMAL.replace("[kernel]", "[kernel]\nwidth = 3"));
        assert!(e.contains("unknown field") && e.contains("line"), "{e}");
        let e = err(&MINIMAL.replace("t_final = 0.5", "t_final = \"long\""));
        assert!(e.contains("invalid type"), "{e}");
        assert!(!err("[grid\n").contains('\n'));
    }

    #[test]
    fn stability_surrogate_defaults_to_h() {
        let c = parse_config_str(
            &format!("{MINIMAL}\n[stability]\nchannel = \"initial_datum\"\nepsilons = [0.01, 0.02]\n"),
            "test",
            "x",
        )
        .unwrap();
        let st = c.stability.unwrap();
        assert_eq!(st.c_surrogate, c.scenario.constants().unwrap().h);
    }
}
