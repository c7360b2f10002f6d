//! Scenario files: line-based `key = value` configuration for a whole run.
//!
//! `#` starts a comment, blank lines are skipped, and key prefixes group the
//! knobs (`user.*`, `medium.*`, `iot.<name>.*`, `coap.<i>.*`, `download.*`).
//! Parsing is strict by default: an unknown key is a load error naming the
//! line, because a typo in a calibration knob would silently change what a
//! run reproduces. Lenient mode downgrades unknown keys to warnings.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::device_filter::TypeRegistry;
use crate::iot_device::{CommandProcessor, IotConfig};
use crate::ir_link::{IrEnvironment, IrGeometry};
use crate::time::SimDuration;
use crate::traffic::{CoapSession, DownloadFlow};
use crate::user_device::UserConfig;
use crate::wifi_medium::{Channel, MediumConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue { line: usize, key: String, reason: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("{0}")]
    Invalid(String),
}

/// Unknown-key handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Unknown keys are load errors.
    Strict,
    /// Unknown keys become warnings.
    Lenient,
}

/// The user controller plus its radio attachment point.
#[derive(Debug, Clone)]
pub struct UserSetup {
    pub config: UserConfig,
    pub channel: Channel,
    pub filter_name: String,
}

/// One IoT endpoint: protocol config plus IR geometry relative to the
/// user's pointing position.
#[derive(Debug, Clone)]
pub struct IotSetup {
    pub name: String,
    pub type_name: String,
    pub config: IotConfig,
    pub geometry: IrGeometry,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Transactions to execute (0 means background traffic only).
    pub runs: u32,
    pub seed: u64,
    /// Hard horizon; required when the download flow is enabled.
    pub duration: Option<SimDuration>,
    /// Spacing between transaction starts.
    pub quicktalk_interval: SimDuration,
    pub ir_environment: IrEnvironment,
    pub decode_tolerance: f64,
    pub user: UserSetup,
    /// Sorted by name.
    pub iot: Vec<IotSetup>,
    pub medium: MediumConfig,
    /// Channel carrying CoAP and download traffic.
    pub ap_channel: Channel,
    pub coap: Vec<CoapSession>,
    pub download: Option<DownloadFlow>,
}

impl Scenario {
    /// Loads and parses a scenario file; the scenario name is the file stem.
    pub fn load(
        path: impl AsRef<Path>,
        strictness: Strictness,
    ) -> Result<(Scenario, Vec<String>), ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".to_owned());
        Scenario::parse(&name, &text, strictness)
    }

    /// Parses scenario text. Returns the scenario and any lenient-mode
    /// warnings.
    pub fn parse(
        name: &str,
        text: &str,
        strictness: Strictness,
    ) -> Result<(Scenario, Vec<String>), ScenarioError> {
        let mut bag = KeyBag::scan(text)?;
        let registry = TypeRegistry::builtin();

        let runs: u32 = bag.parse_or("runs", 1)?;
        let seed: u64 = bag.parse_or("seed", 1)?;
        let duration = bag
            .parse_opt::<f64>("duration_s")?
            .map(|(line, v)| {
                if v > 0.0 && v.is_finite() {
                    Ok(SimDuration::from_secs_f64(v))
                } else {
                    Err(bad(line, "duration_s", "must be positive"))
                }
            })
            .transpose()?;
        let quicktalk_interval = bag.duration_secs("quicktalk.interval_s", 3.0)?;

        let ir_environment = match bag.take("ir.environment") {
            None => IrEnvironment::indoor(),
            Some((line, v)) => match v.as_str() {
                "indoor" => IrEnvironment::indoor(),
                "outdoor_shaded" => IrEnvironment::outdoor_shaded(),
                other => {
                    return Err(bad(
                        line,
                        "ir.environment",
                        &format!("`{other}` is not `indoor` or `outdoor_shaded`"),
                    ))
                }
            },
        };
        let decode_tolerance: f64 = bag.parse_or("ir.tolerance", 0.25)?;
        if !(0.0..0.5).contains(&decode_tolerance) {
            return Err(ScenarioError::Invalid(format!(
                "ir.tolerance must lie in [0, 0.5), got {decode_tolerance}"
            )));
        }

        // User block.
        let (id_line, user_id) = bag.parse_req::<u32>("user.id")?;
        if user_id > 0xFF_FFFF {
            return Err(bad(id_line, "user.id", "wider than 24 bits"));
        }
        let (filter_line, filter_name) =
            bag.take("user.filter").ok_or(ScenarioError::MissingKey("user.filter".into()))?;
        let filter = registry
            .filter(&filter_name)
            .map_err(|e| bad(filter_line, "user.filter", &e.to_string()))?;
        let mut user_config = UserConfig::new(user_id, filter);
        user_config.command_body = bag.string_or("user.command", "toggle")?.into_bytes();
        user_config.k_top = bag.parse_or("user.k_top", 4)?;
        user_config.sweep_rounds = bag.parse_or("user.rounds", 3)?;
        if user_config.sweep_rounds == 0 {
            return Err(ScenarioError::Invalid("user.rounds must be at least 1".into()));
        }
        user_config.dwell = bag.duration_ms("user.dwell_ms", 50.0)?;
        user_config.retx_interval = bag.duration_ms("user.retx_ms", 250.0)?;
        user_config.command_timeout = bag.duration_ms("user.command_timeout_ms", 5000.0)?;
        user_config.context_switch = bag.duration_ms("user.context_switch_ms", 3.0)?;
        user_config.proc_delay = bag.duration_ms("user.proc_ms", 3.0)?;
        if user_config.dwell == SimDuration::ZERO || user_config.retx_interval == SimDuration::ZERO {
            return Err(ScenarioError::Invalid("dwell and retx intervals must be positive".into()));
        }
        let user_channel = bag.channel_or("user.channel", 1)?;

        // Medium block.
        let mut medium = MediumConfig {
            base_loss: bag.parse_or("medium.p0", 0.064)?,
            loss_slope: bag.parse_or("medium.k", 0.3)?,
            switch_delay: bag.duration_ms("medium.switch_ms", 40.0)?,
            control_rate_mbps: bag.parse_or("medium.control_rate_mbps", 1.0)?,
            data_rate_mbps: bag.parse_or("medium.data_rate_mbps", 54.0)?,
            load_window: bag.duration_ms("medium.load_window_ms", 1000.0)?,
            rssi_dbm: BTreeMap::new(),
        };
        if !(0.0..=1.0).contains(&medium.base_loss) {
            return Err(ScenarioError::Invalid(format!(
                "medium.p0 must lie in [0, 1], got {}",
                medium.base_loss
            )));
        }
        for (key, (line, value)) in bag.take_prefix("medium.rssi.") {
            let suffix = key.trim_start_matches("medium.rssi.");
            let ch: u8 = suffix
                .parse()
                .map_err(|_| bad(line, &key, "channel suffix must be a number"))?;
            let channel = Channel::new(ch).map_err(|e| bad(line, &key, &e.to_string()))?;
            let dbm: f64 = value.parse().map_err(|_| bad(line, &key, "not a number"))?;
            medium.rssi_dbm.insert(channel, dbm);
        }

        // IoT devices, grouped by name segment.
        let mut iot = Vec::new();
        for (iot_name, mut fields) in bag.take_family("iot")? {
            let (type_line, type_name) = fields
                .take("type")
                .ok_or_else(|| ScenarioError::MissingKey(format!("iot.{iot_name}.type")))?;
            let device_type = registry.concrete(&type_name).map_err(|e| {
                bad(type_line, &format!("iot.{iot_name}.type"), &e.to_string())
            })?;
            let channel = fields
                .channel_req(&format!("iot.{iot_name}"), "channel")?;
            let mut config = IotConfig::new(iot.len() as u32 + 1, device_type, channel);
            config.beacon_interval = fields.duration_ms("beacon_ms", 40.0)?;
            config.sweep_timeout = fields.duration_ms("sweep_timeout_ms", 5000.0)?;
            config.session_timeout = fields.duration_ms("session_timeout_ms", 10_000.0)?;
            config.proc_delay = fields.duration_ms("proc_ms", 3.0)?;
            if config.beacon_interval == SimDuration::ZERO {
                return Err(ScenarioError::Invalid(format!(
                    "iot.{iot_name}.beacon_ms must be positive"
                )));
            }
            config.processor = match fields.take("processor") {
                None => CommandProcessor::Echo,
                Some((line, v)) => match v.as_str() {
                    "echo" => CommandProcessor::Echo,
                    "bulb" => CommandProcessor::BulbToggle,
                    "sensor" => CommandProcessor::SensorRead,
                    other => {
                        return Err(bad(
                            line,
                            &format!("iot.{iot_name}.processor"),
                            &format!("`{other}` is not `echo`, `bulb`, or `sensor`"),
                        ))
                    }
                },
            };
            let distance: f64 = fields.parse_or("distance_m", 1.0)?;
            let tx_angle: f64 = fields.parse_or("angle_tx_deg", 0.0)?;
            let rx_angle: f64 = fields.parse_or("angle_rx_deg", 0.0)?;
            let geometry = IrGeometry::new(distance, tx_angle, rx_angle)
                .map_err(|e| ScenarioError::Invalid(format!("iot.{iot_name}: {e}")))?;
            fields.finish(&format!("iot.{iot_name}"))?;
            iot.push(IotSetup { name: iot_name, type_name, config, geometry });
        }
        if iot.is_empty() {
            return Err(ScenarioError::MissingKey("iot.<name>.type".into()));
        }
        let iot_names: Vec<String> = iot.iter().map(|d| d.name.clone()).collect();
        let first_iot = iot_names[0].clone();
        let default_ap = iot[0].config.home_channel;
        let ap_channel = bag.channel_or("ap.channel", default_ap.number())?;

        // CoAP sessions, grouped by index segment.
        let mut coap = Vec::new();
        for (idx, mut fields) in bag.take_family("coap")? {
            if idx.parse::<u32>().is_err() {
                return Err(ScenarioError::Invalid(format!(
                    "coap section name `{idx}` must be a number"
                )));
            }
            let (line, interval) = fields.parse_req::<f64>("interval_s").map_err(|e| match e {
                ScenarioError::MissingKey(_) => {
                    ScenarioError::MissingKey(format!("coap.{idx}.interval_s"))
                }
                other => other,
            })?;
            let target = match fields.take("iot") {
                None => first_iot.clone(),
                Some((iot_line, v)) => {
                    if !iot_names.contains(&v) {
                        return Err(bad(
                            iot_line,
                            &format!("coap.{idx}.iot"),
                            &format!("`{v}` names no iot device"),
                        ));
                    }
                    v
                }
            };
            let mut session = CoapSession::new(&target, interval)
                .map_err(|e| bad(line, &format!("coap.{idx}.interval_s"), &e.to_string()))?;
            session.request_bytes = fields.parse_or("request_bytes", 64)?;
            session.response_bytes = fields.parse_or("response_bytes", 64)?;
            fields.finish(&format!("coap.{idx}"))?;
            coap.push(session);
        }

        // Download flow.
        let download_enabled: bool = bag.parse_or("download.enabled", false)?;
        let download = if download_enabled {
            let rate: f64 = bag.parse_or("download.rate_mbps", 18.54)?;
            let target = match bag.take("download.iot") {
                None => first_iot,
                Some((line, v)) => {
                    if !iot_names.contains(&v) {
                        return Err(bad(line, "download.iot", &format!("`{v}` names no iot device")));
                    }
                    v
                }
            };
            let mut flow = DownloadFlow::new(&target, rate)
                .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            flow.segment_bytes = bag.parse_or("download.segment_bytes", 1500)?;
            if flow.segment_bytes == 0 || flow.segment_bytes > 1500 {
                return Err(ScenarioError::Invalid(
                    "download.segment_bytes must lie in 1..=1500".into(),
                ));
            }
            if duration.is_none() {
                return Err(ScenarioError::MissingKey(
                    "duration_s (required when download.enabled)".into(),
                ));
            }
            Some(flow)
        } else {
            for key in ["download.rate_mbps", "download.iot", "download.segment_bytes"] {
                bag.take(key);
            }
            None
        };

        let warnings = bag.finish(strictness)?;

        Ok((
            Scenario {
                name: name.to_owned(),
                runs,
                seed,
                duration,
                quicktalk_interval,
                ir_environment,
                decode_tolerance,
                user: UserSetup { config: user_config, channel: user_channel, filter_name },
                iot,
                medium,
                ap_channel,
                coap,
                download,
            },
            warnings,
        ))
    }

    /// Device setup by name.
    #[must_use]
    pub fn iot_by_name(&self, name: &str) -> Option<&IotSetup> {
        self.iot.iter().find(|d| d.name == name)
    }
}

fn bad(line: usize, key: &str, reason: &str) -> ScenarioError {
    ScenarioError::BadValue { line, key: key.to_owned(), reason: reason.to_owned() }
}

/// Raw `key = value` entries with consumption tracking.
struct KeyBag {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyBag {
    fn scan(text: &str) -> Result<KeyBag, ScenarioError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| ScenarioError::Syntax { line, text: stripped.to_owned() })?;
            let key = key.trim().to_owned();
            let value = value.trim().to_owned();
            if key.is_empty() {
                return Err(ScenarioError::Syntax { line, text: stripped.to_owned() });
            }
            if entries.insert(key.clone(), (line, value)).is_some() {
                return Err(ScenarioError::DuplicateKey { line, key });
            }
        }
        Ok(KeyBag { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn parse_opt<T: FromStr>(&mut self, key: &str) -> Result<Option<(usize, T)>, ScenarioError>
    where
        T::Err: Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(|t| Some((line, t)))
                .map_err(|e| bad(line, key, &e.to_string())),
        }
    }

    fn parse_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ScenarioError>
    where
        T::Err: Display,
    {
        Ok(self.parse_opt(key)?.map_or(default, |(_, v)| v))
    }

    fn parse_req<T: FromStr>(&mut self, key: &str) -> Result<(usize, T), ScenarioError>
    where
        T::Err: Display,
    {
        self.parse_opt(key)?.ok_or_else(|| ScenarioError::MissingKey(key.to_owned()))
    }

    fn string_or(&mut self, key: &str, default: &str) -> Result<String, ScenarioError> {
        Ok(self.take(key).map_or_else(|| default.to_owned(), |(_, v)| v))
    }

    fn duration_ms(&mut self, key: &str, default_ms: f64) -> Result<SimDuration, ScenarioError> {
        let (line, ms) = match self.parse_opt::<f64>(key)? {
            Some(v) => v,
            None => return Ok(SimDuration::from_secs_f64(default_ms / 1000.0)),
        };
        if ms < 0.0 || !ms.is_finite() {
            return Err(bad(line, key, "must be a finite non-negative millisecond count"));
        }
        Ok(SimDuration::from_secs_f64(ms / 1000.0))
    }

    fn duration_secs(&mut self, key: &str, default_s: f64) -> Result<SimDuration, ScenarioError> {
        let (line, s) = match self.parse_opt::<f64>(key)? {
            Some(v) => v,
            None => return Ok(SimDuration::from_secs_f64(default_s)),
        };
        if s <= 0.0 || !s.is_finite() {
            return Err(bad(line, key, "must be a positive second count"));
        }
        Ok(SimDuration::from_secs_f64(s))
    }

    fn channel_or(&mut self, key: &str, default: u8) -> Result<Channel, ScenarioError> {
        let (line, n) = match self.parse_opt::<u8>(key)? {
            Some(v) => v,
            None => return Channel::new(default).map_err(|e| ScenarioError::Invalid(e.to_string())),
        };
        Channel::new(n).map_err(|e| bad(line, key, &e.to_string()))
    }

    /// Removes every `<family>.<segment>.<field>` key, grouped by segment in
    /// name order.
    fn take_family(&mut self, family: &str) -> Result<Vec<(String, FieldBag)>, ScenarioError> {
        let prefix = format!("{family}.");
        let keys: Vec<String> =
            self.entries.keys().filter(|k| k.starts_with(&prefix)).cloned().collect();
        let mut groups: BTreeMap<String, FieldBag> = BTreeMap::new();
        for key in keys {
            let rest = &key[prefix.len()..];
            let (segment, field) = rest.split_once('.').ok_or_else(|| {
                let (line, _) = self.entries[&key];
                ScenarioError::UnknownKey { line, key: key.clone() }
            })?;
            if segment.is_empty() || field.is_empty() {
                let (line, _) = self.entries[&key];
                return Err(ScenarioError::UnknownKey { line, key: key.clone() });
            }
            let entry = self.entries.remove(&key).expect("key listed above");
            groups
                .entry(segment.to_owned())
                .or_default()
                .entries
                .insert(field.to_owned(), entry);
        }
        Ok(groups.into_iter().collect())
    }

    fn take_prefix(&mut self, prefix: &str) -> Vec<(String, (usize, String))> {
        let keys: Vec<String> =
            self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        keys.into_iter()
            .map(|k| {
                let entry = self.entries.remove(&k).expect("key listed above");
                (k, entry)
            })
            .collect()
    }

    /// Strict mode errors on the first leftover key; lenient mode turns each
    /// into a warning.
    fn finish(self, strictness: Strictness) -> Result<Vec<String>, ScenarioError> {
        let mut warnings = Vec::new();
        for (key, (line, _)) in self.entries {
            match strictness {
                Strictness::Strict => return Err(ScenarioError::UnknownKey { line, key }),
                Strictness::Lenient => {
                    warnings.push(format!("line {line}: ignoring unknown key `{key}`"));
                }
            }
        }
        Ok(warnings)
    }
}

/// Fields of one `iot.<name>` or `coap.<i>` section.
#[derive(Default)]
struct FieldBag {
    entries: BTreeMap<String, (usize, String)>,
}

impl FieldBag {
    fn take(&mut self, field: &str) -> Option<(usize, String)> {
        self.entries.remove(field)
    }

    fn parse_opt<T: FromStr>(&mut self, field: &str) -> Result<Option<(usize, T)>, ScenarioError>
    where
        T::Err: Display,
    {
        match self.take(field) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(|t| Some((line, t)))
                .map_err(|e| bad(line, field, &e.to_string())),
        }
    }

    fn parse_or<T: FromStr>(&mut self, field: &str, default: T) -> Result<T, ScenarioError>
    where
        T::Err: Display,
    {
        Ok(self.parse_opt(field)?.map_or(default, |(_, v)| v))
    }

    fn parse_req<T: FromStr>(&mut self, field: &str) -> Result<(usize, T), ScenarioError>
    where
        T::Err: Display,
    {
        self.parse_opt(field)?.ok_or_else(|| ScenarioError::MissingKey(field.to_owned()))
    }

    fn duration_ms(&mut self, field: &str, default_ms: f64) -> Result<SimDuration, ScenarioError> {
        let (line, ms) = match self.parse_opt::<f64>(field)? {
            Some(v) => v,
            None => return Ok(SimDuration::from_secs_f64(default_ms / 1000.0)),
        };
        if ms < 0.0 || !ms.is_finite() {
            return Err(bad(line, field, "must be a finite non-negative millisecond count"));
        }
        Ok(SimDuration::from_secs_f64(ms / 1000.0))
    }

    fn channel_req(&mut self, section: &str, field: &str) -> Result<Channel, ScenarioError> {
        let (line, n) = self.parse_req::<u8>(field).map_err(|e| match e {
            ScenarioError::MissingKey(_) => ScenarioError::MissingKey(format!("{section}.{field}")),
            other => other,
        })?;
        Channel::new(n).map_err(|e| bad(line, &format!("{section}.{field}"), &e.to_string()))
    }

    /// Any unread field is unknown; report it against the full key path.
    fn finish(self, section: &str) -> Result<(), ScenarioError> {
        if let Some((field, (line, _))) = self.entries.into_iter().next() {
            return Err(ScenarioError::UnknownKey { line, key: format!("{section}.{field}") });
        }
        Ok(())
    }
}
