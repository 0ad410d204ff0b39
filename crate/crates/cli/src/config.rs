//! Unified run configuration for every subcommand.

use std::path::PathBuf;

use patchfill::grouping::{GroupingConfig, ReferenceConfig};
use patchfill::theory_lab::{PhaseConfig, SyntheticSpec};
use patchfill::{AdmmConfig, Boundary, Error, Result, RngSeed};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchSettings {
    pub patch_n: usize,
    pub boundary: Boundary,
}

impl Default for PatchSettings {
    fn default() -> Self {
        Self {
            patch_n: 8,
            boundary: Boundary::Valid,
        }
    }
}

/// Instance and thresholds for `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub synthetic: SyntheticSpec,
    pub patch_n: usize,
    /// Golfing sample count as a fraction of `N^2`.
    pub sample_fraction: f64,
    /// Number of golfing runs (seeds derived from the run seed).
    pub runs: usize,
    pub cond2_threshold: f64,
    /// Fraction of runs that must meet `cond2_threshold`.
    pub pass_fraction: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            synthetic: SyntheticSpec {
                n_side: 16,
                components: 1,
                ..SyntheticSpec::default()
            },
            patch_n: 4,
            sample_fraction: 0.6,
            runs: 20,
            cond2_threshold: 0.5,
            pass_fraction: 0.8,
        }
    }
}

/// Instance and sweep for `phase-transition`; one group covering every patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseSettings {
    pub synthetic: SyntheticSpec,
    pub patch_n: usize,
    pub sweep: PhaseConfig,
}

impl Default for PhaseSettings {
    fn default() -> Self {
        Self {
            synthetic: SyntheticSpec::default(),
            patch_n: 8,
            sweep: PhaseConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Input PGM for `inpaint` and `reference`.
    pub input: Option<PathBuf>,
    /// Coordinate mask; when absent one is drawn from `fraction` and `seed`.
    pub mask: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Uniform draws as a fraction of the pixel count.
    pub fraction: f64,
    pub seed: RngSeed,
    pub patch: PatchSettings,
    pub grouping: GroupingConfig,
    pub reference: ReferenceConfig,
    pub admm: AdmmConfig,
    pub verify: VerifySettings,
    pub phase: PhaseSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            mask: None,
            output_dir: PathBuf::from("out"),
            fraction: 0.2,
            seed: RngSeed(0),
            patch: PatchSettings::default(),
            grouping: GroupingConfig::default(),
            reference: ReferenceConfig::default(),
            admm: AdmmConfig::default(),
            verify: VerifySettings::default(),
            phase: PhaseSettings::default(),
        }
    }
}

fn unknown_keys(given: &Value, known: &Value, path: &str, out: &mut Vec<String>) {
    let (Value::Object(g), Value::Object(k)) = (given, known) else {
        return;
    };
    for (key, val) in g {
        let here = if path.is_empty() {
            key.clone()
        } else {
            format!("{path}.{key}")
        };
        match k.get(key) {
            None => out.push(format!("unknown key `{here}`")),
            Some(sub) => unknown_keys(val, sub, &here, out),
        }
    }
}

impl RunConfig {
    /// Parses a JSON configuration. Unknown keys are all reported together.
    pub fn from_json(text: &str) -> Result<Self> {
        let given: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(vec![format!("malformed JSON: {e}")]))?;
        let known = serde_json::to_value(RunConfig::default()).expect("serializable");
        let mut bad = Vec::new();
        unknown_keys(&given, &known, "", &mut bad);
        if !bad.is_empty() {
            return Err(Error::Config(bad));
        }
        serde_json::from_value(given).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Checks every section and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut section = |name: &str, r: Result<()>| {
            if let Err(e) = r {
                bad.push(format!("{name}: {e}"));
            }
        };
        section("grouping", self.grouping.validate());
        section("reference", self.reference.validate());
        section("admm", self.admm.validate());
        section("verify.synthetic", self.verify.synthetic.validate());
        section("phase.synthetic", self.phase.synthetic.validate());
        section("phase.sweep", self.phase.sweep.validate());
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            bad.push(format!("fraction must lie in (0, 1] (got {})", self.fraction));
        }
        if self.patch.patch_n == 0 {
            bad.push("patch.patch_n must be >= 1".into());
        }
        let v = &self.verify;
        if !(v.sample_fraction > 0.0) {
            bad.push(format!("verify.sample_fraction must be positive (got {})", v.sample_fraction));
        }
        if v.runs == 0 {
            bad.push("verify.runs must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&v.pass_fraction) {
            bad.push(format!("verify.pass_fraction must lie in [0, 1] (got {})", v.pass_fraction));
        }
        if v.patch_n == 0 || v.patch_n > v.synthetic.n_side {
            bad.push(format!("verify.patch_n must lie in [1, {}]", v.synthetic.n_side));
        }
        let p = &self.phase;
        if p.patch_n == 0 || p.patch_n > p.synthetic.n_side {
            bad.push(format!("phase.patch_n must lie in [1, {}]", p.synthetic.n_side));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }
}
