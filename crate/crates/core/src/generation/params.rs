use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{InitMode, DEFAULT_FEATHER};

pub const DEFAULT_STEPS: u32 = 30;
pub const DEFAULT_GUIDANCE_SCALE: f64 = 5.0;
pub const DEFAULT_WORKING_SIZE: u32 = 1024;

/// Knobs for one generation call.
///
/// Serializes to a flat record; the seed travels as a decimal string so no
/// consumer truncates it to a 53-bit float.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    #[serde(with = "seed_string")]
    pub seed: u64,
    pub steps: u32,
    pub guidance_scale: f64,
    /// Strength of the material embedding's conditioning.
    pub material_scale: f64,
    /// Strength of the depth conditioning.
    pub geometry_scale: f64,
    pub init_mode: InitMode,
    /// Side of the square working canvas.
    pub working_size: u32,
    /// Paste-back feather width in pixels.
    pub feather: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            seed: 0,
            steps: DEFAULT_STEPS,
            guidance_scale: DEFAULT_GUIDANCE_SCALE,
            material_scale: 1.0,
            geometry_scale: 1.0,
            init_mode: InitMode::default(),
            working_size: DEFAULT_WORKING_SIZE,
            feather: DEFAULT_FEATHER,
        }
    }
}

impl GenerationParams {
    pub fn with_seed(seed: u64) -> Self {
        GenerationParams {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps must be positive"));
        }
        if !self.guidance_scale.is_finite() || self.guidance_scale < 0.0 {
            return Err(Error::invalid(format!(
                "guidance_scale {} must be finite and >= 0",
                self.guidance_scale
            )));
        }
        for (name, v) in [
            ("material_scale", self.material_scale),
            ("geometry_scale", self.geometry_scale),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} {v} outside [0, 1]")));
            }
        }
        if self.working_size == 0 || !self.working_size.is_multiple_of(8) {
            return Err(Error::invalid(format!(
                "working_size {} must be a positive multiple of 8",
                self.working_size
            )));
        }
        Ok(())
    }

    /// Flat key → string record.
    pub fn to_flat(&self) -> BTreeMap<String, String> {
        let value = serde_json::to_value(self).expect("params serialize");
        value
            .as_object()
            .expect("params are a JSON object")
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect()
    }

    pub fn from_flat(record: &BTreeMap<String, String>) -> Result<Self> {
        let mut obj = serde_json::Map::new();
        for (k, v) in record {
            let value = match k.as_str() {
                "seed" | "init_mode" => serde_json::Value::String(v.clone()),
                _ => serde_json::from_str(v).map_err(|e| Error::invalid(format!("param `{k}`: {e}")))?,
            };
            obj.insert(k.clone(), value);
        }
        let params: GenerationParams =
            serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| Error::invalid(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }
}

/// Decimal-string seed codec; also accepts a bare JSON integer on input.
pub mod seed_string {
    use serde::{de, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&seed.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        struct Visitor;
        impl de::Visitor<'_> for Visitor {
            type Value = u64;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a decimal seed string")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<u64, E> {
                v.trim().parse().map_err(|_| E::custom(format!("invalid seed `{v}`")))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<u64, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<u64, E> {
                u64::try_from(v).map_err(|_| E::custom("negative seed"))
            }
        }
        d.deserialize_any(Visitor)
    }

    /// Optional variant for request payloads where the server may assign one.
    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(seed: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
            match seed {
                Some(v) => s.serialize_str(&v.to_string()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] u64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}
