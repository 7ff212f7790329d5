//! Scenario files: flat `section.key = value` lines, `#` starts a comment.
//!
//! Vectors are comma separated, matrices separate rows with `;`. Missing keys
//! take the defaults of the selected plant.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::baseline::BaselineParams;
use crate::constraints::ControlBounds;
use crate::controller::{NoiseModel, UtcConfig};
use crate::error::{Result, UtcError};
use crate::noise::{CouplingKind, NoiseCouplingPolicy};
use crate::plants::{
    ControlDynamicsKind, ControlDynamicsPolicy, LinearPlant, Plant, PlantModel, SurrogateYawPlant,
};
use crate::reference::{ConstantReference, Reference, SineReference, StepReference};
use crate::ut_math::ControlBelief;

const KNOWN_KEYS: &[&str] = &[
    "scenario.name",
    "plant.kind",
    "plant.a",
    "plant.b",
    "plant.inertia",
    "plant.pattern_gain",
    "plant.damping_gain",
    "plant.roll_time_constant",
    "plant.roll_gain",
    "plant.yaw_lever",
    "plant.lx_hand",
    "plant.k_n",
    "plant.alpha_limit",
    "plant.alpha_slew",
    "controller.kind",
    "utc.w0",
    "utc.t_pred_steps",
    "utc.dt",
    "utc.p_err",
    "utc.policy",
    "utc.kp",
    "utc.kff",
    "utc.tau",
    "utc.initial_mean",
    "utc.initial_cov",
    "utc.qu",
    "utc.pattern_channel",
    "bounds.min",
    "bounds.max",
    "bounds.slew",
    "noise.kind",
    "noise.q12",
    "noise.q13",
    "noise.k_hyst",
    "reference.kind",
    "reference.amplitude",
    "reference.frequency",
    "reference.offset",
    "reference.step_time",
    "sim.duration",
    "output.dir",
    "baseline.kp",
    "baseline.kff",
    "baseline.damping",
    "estimator.t_pred_steps",
    "assert.max_rms_fraction",
    "assert.max_convergence_time",
];

const SURROGATE_KEYS: &[&str] = &[
    "plant.inertia",
    "plant.pattern_gain",
    "plant.damping_gain",
    "plant.roll_time_constant",
    "plant.roll_gain",
    "plant.yaw_lever",
    "plant.lx_hand",
    "plant.k_n",
    "plant.alpha_limit",
    "plant.alpha_slew",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Utc,
    BaselinePose,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Utc => "utc",
            Self::BaselinePose => "baseline_pose",
        }
    }
}

/// Reference signal selected by a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec {
    Sine(SineReference),
    Step(StepReference),
    Constant(ConstantReference),
}

impl ReferenceSpec {
    fn inner(&self) -> &dyn Reference {
        match self {
            Self::Sine(r) => r,
            Self::Step(r) => r,
            Self::Constant(r) => r,
        }
    }
}

impl Reference for ReferenceSpec {
    fn value(&self, t: f64) -> f64 {
        self.inner().value(t)
    }

    fn derivative(&self, t: f64) -> Option<f64> {
        self.inner().derivative(t)
    }

    fn amplitude(&self) -> f64 {
        self.inner().amplitude()
    }
}

/// Optional pass thresholds checked in `--assert-metrics` mode.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Thresholds {
    pub max_rms_fraction: Option<f64>,
    pub max_convergence_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: Plant,
    pub controller: ControllerKind,
    pub utc: UtcConfig,
    pub baseline: BaselineParams,
    pub reference: ReferenceSpec,
    pub duration: f64,
    pub output_dir: PathBuf,
    /// Estimation horizon; `None` uses the 0.25 s default.
    pub estimator_horizon: Option<usize>,
    pub thresholds: Thresholds,
}

/// Raw key/value pairs with the line each came from.
#[derive(Debug, Default)]
struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = Entries::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(UtcError::Parse {
                    line: line_no,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(UtcError::config(key, "unknown key"));
            }
            let value = value.trim().to_string();
            if let Some((first, _)) = entries.map.insert(key.clone(), (line_no, value)) {
                return Err(UtcError::config(
                    key,
                    format!("duplicate key, first set on line {first}"),
                ));
            }
        }
        Ok(entries)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| UtcError::config(key, format!("cannot parse `{v}`")))
            })
            .transpose()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.parsed::<f64>(key)? {
            Some(v) if !v.is_finite() => Err(UtcError::config(key, "must be finite")),
            other => Ok(other),
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.f64(key)? {
            Some(v) if v <= 0.0 => Err(UtcError::config(key, format!("must be positive, got {v}"))),
            other => Ok(other),
        }
    }

    fn vector(&self, key: &str) -> Result<Option<DVector<f64>>> {
        self.raw(key)
            .map(|v| parse_row(key, v).map(DVector::from_vec))
            .transpose()
    }

    fn matrix(&self, key: &str) -> Result<Option<DMatrix<f64>>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let rows = v
            .split(';')
            .map(|r| parse_row(key, r))
            .collect::<Result<Vec<_>>>()?;
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(UtcError::config(key, "rows have different lengths"));
        }
        Ok(Some(DMatrix::from_row_iterator(
            rows.len(),
            n,
            rows.into_iter().flatten(),
        )))
    }
}

fn parse_row(key: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(UtcError::config(key, format!("bad number `{s}`"))),
            }
        })
        .collect()
}

fn parse_slew(key: &str, text: &str) -> Result<Vec<Option<f64>>> {
    text.split(',')
        .map(|s| match s.trim() {
            "none" | "-" => Ok(None),
            s => match s.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
                _ => Err(UtcError::config(key, format!("bad slew rate `{s}`"))),
            },
        })
        .collect()
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| UtcError::io(path, e))?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario");
        Self::parse(&text, stem)
    }

    /// Parse scenario text; `default_name` is used when `scenario.name` is absent.
    pub fn parse(text: &str, default_name: &str) -> Result<Self> {
        let e = Entries::parse(text)?;

        let name = e.raw("scenario.name").unwrap_or(default_name).to_string();
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(UtcError::config(
                "scenario.name",
                "must be a non-empty file-safe name",
            ));
        }

        let plant = build_plant(&e)?;
        let controller = match e.raw("controller.kind").unwrap_or("utc") {
            "utc" => ControllerKind::Utc,
            "baseline_pose" => ControllerKind::BaselinePose,
            other => {
                return Err(UtcError::config(
                    "controller.kind",
                    format!("unknown controller `{other}`"),
                ))
            }
        };
        let utc = build_utc(&e, &plant)?;
        let baseline = build_baseline(&e, &plant)?;
        let reference = build_reference(&e, &plant)?;

        let duration = e.positive("sim.duration")?.unwrap_or(30.0);
        let output_dir = PathBuf::from(e.raw("output.dir").unwrap_or("out"));
        let estimator_horizon = match e.parsed::<usize>("estimator.t_pred_steps")? {
            Some(0) => return Err(UtcError::config("estimator.t_pred_steps", "must be >= 1")),
            other => other,
        };
        let thresholds = Thresholds {
            max_rms_fraction: e.positive("assert.max_rms_fraction")?,
            max_convergence_time: e.positive("assert.max_convergence_time")?,
        };

        Ok(Self {
            name,
            plant,
            controller,
            utc,
            baseline,
            reference,
            duration,
            output_dir,
            estimator_horizon,
            thresholds,
        })
    }

    /// Directory holding this scenario's output files.
    pub fn scenario_dir(&self) -> PathBuf {
        self.output_dir.join(&self.name)
    }
}

fn build_plant(e: &Entries) -> Result<Plant> {
    match e.raw("plant.kind").unwrap_or("surrogate_yaw") {
        "surrogate_yaw" => {
            for key in ["plant.a", "plant.b"] {
                if e.has(key) {
                    return Err(UtcError::config(key, "only applies to plant.kind = linear"));
                }
            }
            let mut p = SurrogateYawPlant::default();
            let fields: [(&str, &mut f64); 10] = [
                ("plant.inertia", &mut p.inertia),
                ("plant.pattern_gain", &mut p.pattern_gain),
                ("plant.damping_gain", &mut p.damping_gain),
                ("plant.roll_time_constant", &mut p.roll_time_constant),
                ("plant.roll_gain", &mut p.roll_gain),
                ("plant.yaw_lever", &mut p.yaw_lever),
                ("plant.lx_hand", &mut p.lx_hand),
                ("plant.k_n", &mut p.k_n),
                ("plant.alpha_limit", &mut p.alpha_limit),
                ("plant.alpha_slew", &mut p.alpha_slew),
            ];
            for (key, slot) in fields {
                if let Some(v) = e.f64(key)? {
                    *slot = v;
                }
            }
            p.validate()?;
            Ok(Plant::SurrogateYaw(p))
        }
        "linear" => {
            if let Some(key) = SURROGATE_KEYS.iter().find(|k| e.has(k)) {
                return Err(UtcError::config(
                    *key,
                    "only applies to plant.kind = surrogate_yaw",
                ));
            }
            let mut p = LinearPlant::default();
            if let Some(a) = e.f64("plant.a")? {
                p.a = a;
            }
            if let Some(b) = e.f64("plant.b")? {
                p.b = b;
            }
            Ok(Plant::Linear(p))
        }
        other => Err(UtcError::config(
            "plant.kind",
            format!("unknown plant `{other}`"),
        )),
    }
}

fn build_utc(e: &Entries, plant: &Plant) -> Result<UtcConfig> {
    let policy_kind: Option<ControlDynamicsKind> = e.parsed("utc.policy")?;
    let coupling: Option<CouplingKind> = e.raw("noise.kind").map(str::parse).transpose()?;
    let yaw = matches!(plant, Plant::SurrogateYaw(_));

    let mut cfg = if yaw {
        UtcConfig::yaw(
            policy_kind.unwrap_or(ControlDynamicsKind::PiFeedforward),
            coupling.unwrap_or(CouplingKind::ReferenceDerivativeSign),
        )
    } else {
        let mut cfg = UtcConfig::linear();
        if let Some(kind) = policy_kind {
            cfg.policy.kind = kind;
        }
        cfg
    };

    if let Some(w0) = e.f64("utc.w0")? {
        cfg.w0 = w0;
    }
    if let Some(n) = e.parsed::<usize>("utc.t_pred_steps")? {
        cfg.horizon_steps = n;
    }
    if let Some(dt) = e.positive("utc.dt")? {
        cfg.dt = dt;
    }
    if let Some(p) = e.matrix("utc.p_err")? {
        cfg.p_err = p;
    }

    let mut policy = match cfg.policy.kind {
        ControlDynamicsKind::HoldConstant => ControlDynamicsPolicy::hold_constant(),
        ControlDynamicsKind::PiFeedforward => ControlDynamicsPolicy::pi_feedforward(cfg.horizon()),
    };
    if let Some(v) = e.f64("utc.kp")? {
        policy.kp = v;
    }
    if let Some(v) = e.f64("utc.kff")? {
        policy.kff = v;
    }
    if let Some(v) = e.f64("utc.tau")? {
        policy.tau = v;
    }
    cfg.policy = policy;

    if let Some(v) = e.raw("utc.pattern_channel") {
        cfg.pattern_channel = match v {
            "none" => None,
            s => Some(s.parse().map_err(|_| {
                UtcError::config(
                    "utc.pattern_channel",
                    format!("expected an index or `none`, got `{s}`"),
                )
            })?),
        };
    }

    let mean = e.vector("utc.initial_mean")?;
    let cov = e.matrix("utc.initial_cov")?;
    if mean.is_some() || cov.is_some() {
        let mean = mean.unwrap_or_else(|| cfg.initial.mean.clone());
        let cov = cov.unwrap_or_else(|| cfg.initial.covariance.clone());
        cfg.initial = ControlBelief::new(mean, cov)
            .map_err(|err| UtcError::config("utc.initial_cov", err.to_string()))?;
    }
    let m = cfg.initial.dim();
    if m != plant.control_dim() {
        return Err(UtcError::config(
            "utc.initial_mean",
            format!(
                "plant takes {} controls, belief has {m}",
                plant.control_dim()
            ),
        ));
    }

    let mut bounds_min = cfg.bounds.min.clone();
    let mut bounds_max = cfg.bounds.max.clone();
    let mut slew = cfg.bounds.slew_rate.clone();
    if let Some(v) = e.vector("bounds.min")? {
        bounds_min = v;
    }
    if let Some(v) = e.vector("bounds.max")? {
        bounds_max = v;
    }
    if let Some(v) = e.raw("bounds.slew") {
        slew = parse_slew("bounds.slew", v)?;
    }
    cfg.bounds = ControlBounds::new(bounds_min, bounds_max, slew)
        .map_err(|err| UtcError::config("bounds.min", err.to_string()))?;

    let explicit_qu = e.matrix("utc.qu")?;
    let q12 = e.f64("noise.q12")?;
    let q13 = e.f64("noise.q13")?;
    let k_hyst = e.parsed::<usize>("noise.k_hyst")?;
    if let Some(q) = explicit_qu {
        if let Some(key) = ["noise.kind", "noise.q12", "noise.q13", "noise.k_hyst"]
            .into_iter()
            .find(|k| e.has(k))
        {
            return Err(UtcError::config(
                key,
                "cannot be combined with a constant utc.qu",
            ));
        }
        cfg.noise = NoiseModel::Constant(q);
    } else if m == 4 {
        let kind = coupling.unwrap_or(CouplingKind::ReferenceDerivativeSign);
        let defaults = NoiseCouplingPolicy::with_default_gains(kind);
        let policy = NoiseCouplingPolicy::new(
            kind,
            q12.unwrap_or(defaults.q12),
            q13.unwrap_or(defaults.q13),
        )?;
        cfg.noise = NoiseModel::Scheduled { policy, k_hyst };
    } else if let Some(key) = ["noise.q12", "noise.q13", "noise.k_hyst"]
        .into_iter()
        .find(|k| e.has(k))
        .or(coupling
            .filter(|c| *c != CouplingKind::None)
            .map(|_| "noise.kind"))
    {
        return Err(UtcError::config(
            key,
            "noise coupling needs the 4-channel yaw control vector",
        ));
    }

    cfg.validate()?;
    Ok(cfg)
}

fn build_baseline(e: &Entries, plant: &Plant) -> Result<BaselineParams> {
    let mut b = BaselineParams::default();
    if let Plant::SurrogateYaw(p) = plant {
        b.alpha_limit = p.alpha_limit;
        b.alpha_slew = p.alpha_slew;
    }
    if let Some(v) = e.f64("baseline.kp")? {
        b.kp = v;
    }
    if let Some(v) = e.f64("baseline.kff")? {
        b.kff = v;
    }
    if let Some(v) = e.f64("baseline.damping")? {
        if v < 0.0 {
            return Err(UtcError::config("baseline.damping", "must be >= 0"));
        }
        b.damping = v;
    }
    Ok(b)
}

fn build_reference(e: &Entries, plant: &Plant) -> Result<ReferenceSpec> {
    let amplitude = e.f64("reference.amplitude")?;
    let offset = e.f64("reference.offset")?.unwrap_or(0.0);
    let frequency = e.positive("reference.frequency")?;
    let step_time = e.f64("reference.step_time")?;
    let default_kind = match plant {
        Plant::SurrogateYaw(_) => "sine",
        Plant::Linear(_) => "constant",
    };
    let reject = |key: &str, kind: &str| -> Result<()> {
        if e.has(key) {
            Err(UtcError::config(
                key,
                format!("not used by reference.kind = {kind}"),
            ))
        } else {
            Ok(())
        }
    };
    match e.raw("reference.kind").unwrap_or(default_kind) {
        "sine" => {
            reject("reference.step_time", "sine")?;
            let d = SineReference::fast_turn();
            Ok(ReferenceSpec::Sine(SineReference {
                amplitude: amplitude.unwrap_or(d.amplitude),
                frequency: frequency.unwrap_or(d.frequency),
                offset,
            }))
        }
        "step" => {
            reject("reference.frequency", "step")?;
            Ok(ReferenceSpec::Step(StepReference {
                amplitude: amplitude.unwrap_or(1.0),
                offset,
                step_time: step_time.unwrap_or(0.0),
            }))
        }
        "constant" => {
            for key in [
                "reference.frequency",
                "reference.step_time",
                "reference.offset",
            ] {
                reject(key, "constant")?;
            }
            Ok(ReferenceSpec::Constant(ConstantReference(
                amplitude.unwrap_or(1.0),
            )))
        }
        other => Err(UtcError::config(
            "reference.kind",
            format!("unknown reference `{other}`"),
        )),
    }
}
