//! `run --config` files: flat `key = value` lines or a JSON object whose
//! nested objects are flattened into dotted keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ljko_core::experiments::InitialDensity;
use ljko_core::{
    build_mesh, compute_geometry, load_mesh, AdmissibleMesh, Energy, FokkerPlanck, IpmParams, MeshPattern,
    PorousMedium, Potential, Rect, TimeSchedule, WeightScheme,
};

use crate::CliError;

const KEYS: &[&str] = &[
    "mesh",
    "mesh.n",
    "mesh.pattern",
    "mesh.domain",
    "energy.kind",
    "energy.gamma",
    "energy.potential",
    "energy.g",
    "weights",
    "schedule",
    "schedule.T",
    "schedule.steps",
    "initial",
    "initial.value",
    "initial.mass",
    "initial.g",
    "initial.gamma",
    "ipm.mu0",
    "ipm.theta",
    "ipm.eps0",
    "ipm.eps_mu",
    "ipm.max_newton",
    "ipm.max_outer",
    "ipm.ftb",
    "out",
];

pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut out = BTreeMap::new();
        flatten("", &value, &mut out)?;
        return Ok(out);
    }
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        if out.insert(key.trim().to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{}`", i + 1, key.trim())));
        }
    }
    Ok(out)
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut BTreeMap<String, String>) -> Result<(), CliError> {
    use serde_json::Value;
    let text = match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
            return Ok(());
        }
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        Value::Null => return Err(CliError::Config(format!("`{prefix}` is null"))),
    };
    // `"mesh": {"n": 8}` and `"mesh": "file.txt"` may both appear
    out.insert(prefix.to_string(), text);
    Ok(())
}

pub struct RunConfig {
    pub mesh: AdmissibleMesh,
    pub energy: Box<dyn Energy>,
    pub energy_label: String,
    pub weights: WeightScheme,
    pub schedule: TimeSchedule,
    pub initial: InitialDensity,
    pub ipm: IpmParams,
    pub out: Option<PathBuf>,
}

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("`{key}` = `{v}`: {e}"))))
            .transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_entries(parse_entries(&text)?, base)
    }

    pub fn from_entries(map: BTreeMap<String, String>, base: &Path) -> Result<Self, CliError> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
        let e = Entries { map };

        let mesh = match e.get("mesh") {
            None | Some("structured") => {
                let n: usize = e.parse("mesh.n")?.unwrap_or(16);
                let pattern: MeshPattern = e.parse("mesh.pattern")?.unwrap_or_default();
                let domain = match e.get("mesh.domain") {
                    None => Rect::unit_square(),
                    Some(v) => {
                        let c = numbers(v, "mesh.domain")?;
                        if c.len() != 4 {
                            return Err(CliError::Config("`mesh.domain` needs `x0 x1 y0 y1`".into()));
                        }
                        Rect::new(c[0], c[1], c[2], c[3])
                    }
                };
                compute_geometry(&build_mesh(pattern, domain, n)?)?
            }
            Some(file) => compute_geometry(&load_mesh(base.join(file))?)?,
        };

        let potential = match e.get("energy.potential").unwrap_or("zero") {
            "zero" => Potential::Zero,
            "linear" => Potential::LinearDrift {
                g: e.f64_or("energy.g", 1.0)?,
            },
            "quadratic" => Potential::QuadraticHalf,
            other => return Err(CliError::Config(format!("unknown potential `{other}`"))),
        };
        let (energy, energy_label): (Box<dyn Energy>, String) = match e.get("energy.kind").unwrap_or("fokker_planck") {
            "fokker_planck" | "entropy" => (Box::new(FokkerPlanck::new(potential)), "fokker_planck".into()),
            "porous_medium" => {
                let gamma = e.f64_or("energy.gamma", 2.0)?;
                (Box::new(PorousMedium::new(gamma, potential)?), format!("porous_medium(gamma={gamma})"))
            }
            other => return Err(CliError::Config(format!("unknown energy kind `{other}`"))),
        };

        let weights: WeightScheme = e.parse("weights")?.unwrap_or_default();

        let schedule = match (e.get("schedule"), e.get("schedule.T"), e.get("schedule.steps")) {
            (Some(list), None, None) => TimeSchedule::new(numbers(list, "schedule")?)?,
            (None, Some(_), Some(_)) => {
                TimeSchedule::uniform(e.f64_or("schedule.T", 0.0)?, e.parse("schedule.steps")?.unwrap_or(0))?
            }
            _ => {
                return Err(CliError::Config(
                    "give either `schedule` (list of steps) or both `schedule.T` and `schedule.steps`".into(),
                ))
            }
        };

        let initial = match e.get("initial").unwrap_or("uniform") {
            "uniform" => InitialDensity::Uniform {
                value: e.f64_or("initial.value", 1.0)?,
            },
            "cross" => InitialDensity::Cross {
                mass: e.f64_or("initial.mass", 1.0)?,
            },
            "fp_exact" => InitialDensity::FpExact {
                g: e.f64_or("initial.g", 1.0)?,
            },
            "barenblatt" => InitialDensity::Barenblatt {
                mass: e.f64_or("initial.mass", 1.0)?,
                gamma: e.f64_or("initial.gamma", 2.0)?,
            },
            other => return Err(CliError::Config(format!("unknown initial density `{other}`"))),
        };

        let d = IpmParams::default();
        let ipm = IpmParams {
            mu0: e.parse("ipm.mu0")?,
            theta: e.f64_or("ipm.theta", d.theta)?,
            eps0: e.f64_or("ipm.eps0", d.eps0)?,
            eps_mu: e.f64_or("ipm.eps_mu", d.eps_mu)?,
            max_newton: e.parse("ipm.max_newton")?.unwrap_or(d.max_newton),
            max_outer: e.parse("ipm.max_outer")?.unwrap_or(d.max_outer),
            fraction_to_boundary: e.f64_or("ipm.ftb", d.fraction_to_boundary)?,
        };
        ipm.validate()?;

        Ok(RunConfig {
            mesh,
            energy,
            energy_label,
            weights,
            schedule,
            initial,
            ipm,
            out: e.get("out").map(|p| base.join(p)),
        })
    }
}

fn numbers(text: &str, key: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| CliError::Config(format!("`{key}`: `{s}`: {e}"))))
        .collect()
}
