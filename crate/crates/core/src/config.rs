//! Flat `key=value` configuration for [`DetectorConfig`], used by config
//! files and CLI overrides. Keys are the config field names; the nested
//! mel parameters use their own field names directly.

use thiserror::Error;

use crate::detect::DetectorConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?} ({msg})")]
    BadValue {
        key: String,
        value: String,
        msg: String,
    },
    #[error("line {line}: expected key=value, got {got:?}")]
    BadLine { line: usize, got: String },
}

/// Every accepted key, in dump order.
pub const CONFIG_KEYS: [&str; 16] = [
    "f_hi_limit",
    "f_lo_limit",
    "db_min",
    "min_distinct_tones",
    "min_gap",
    "tone_tol",
    "max_gap_frames",
    "min_cycles",
    "min_duration",
    "max_loop_iters",
    "sample_rate",
    "n_fft",
    "hop",
    "n_mels",
    "f_min",
    "f_max",
];

impl DetectorConfig {
    /// Set one field from its textual form.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.trim().parse().map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
                msg: e.to_string(),
            })
        }

        match key {
            "f_hi_limit" => self.f_hi_limit = parse(key, value)?,
            "f_lo_limit" => self.f_lo_limit = parse(key, value)?,
            "db_min" => self.db_min = parse(key, value)?,
            "min_distinct_tones" => self.min_distinct_tones = parse(key, value)?,
            "min_gap" => self.min_gap = parse(key, value)?,
            "tone_tol" => self.tone_tol = parse(key, value)?,
            "max_gap_frames" => self.max_gap_frames = parse(key, value)?,
            "min_cycles" => self.min_cycles = parse(key, value)?,
            "min_duration" => self.min_duration = parse(key, value)?,
            "max_loop_iters" => self.max_loop_iters = parse(key, value)?,
            "sample_rate" => self.mel.sample_rate = parse(key, value)?,
            "n_fft" => self.mel.n_fft = parse(key, value)?,
            "hop" => self.mel.hop = parse(key, value)?,
            "n_mels" => self.mel.n_mels = parse(key, value)?,
            "f_min" => self.mel.f_min = parse(key, value)?,
            "f_max" => self.mel.f_max = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Apply a config-file body: one `key=value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: i + 1,
                got: line.to_string(),
            })?;
            self.apply_kv(key.trim(), value)?;
        }
        Ok(())
    }

    /// Fully resolved values, one `key=value` per line, in key order.
    pub fn to_kv(&self) -> String {
        let value = |key: &str| -> String {
            match key {
                "f_hi_limit" => self.f_hi_limit.to_string(),
                "f_lo_limit" => self.f_lo_limit.to_string(),
                "db_min" => self.db_min.to_string(),
                "min_distinct_tones" => self.min_distinct_tones.to_string(),
                "min_gap" => self.min_gap.to_string(),
                "tone_tol" => self.tone_tol.to_string(),
                "max_gap_frames" => self.max_gap_frames.to_string(),
                "min_cycles" => self.min_cycles.to_string(),
                "min_duration" => self.min_duration.to_string(),
                "max_loop_iters" => self.max_loop_iters.to_string(),
                "sample_rate" => self.mel.sample_rate.to_string(),
                "n_fft" => self.mel.n_fft.to_string(),
                "hop" => self.mel.hop.to_string(),
                "n_mels" => self.mel.n_mels.to_string(),
                "f_min" => self.mel.f_min.to_string(),
                "f_max" => self.mel.f_max.to_string(),
                _ => unreachable!(),
            }
        };
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k}={}\n", value(k)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_and_dump_round_trip() {
        let mut cfg = DetectorConfig::default();
        cfg.apply_text("# tuning\nmin_gap=100\n\ntone_tol = 25\nn_mels=32\n")
            .unwrap();
        assert_eq!(cfg.min_gap, 100.0);
        assert_eq!(cfg.tone_tol, 25.0);
        assert_eq!(cfg.mel.n_mels, 32);

        let dump = cfg.to_kv();
        let mut reparsed = DetectorConfig::default();
        reparsed.apply_text(&dump).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let mut cfg = DetectorConfig::default();
        assert!(matches!(
            cfg.apply_kv("bogus", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.apply_text("min_gap: 100"),
            Err(ConfigError::BadLine { line: 1, .. })
        ));
    }

    #[test]
    fn bad_value_is_an_error() {
        let mut cfg = DetectorConfig::default();
        assert!(matches!(
            cfg.apply_kv("min_gap", "fast"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn dump_lists_every_key() {
        let dump = DetectorConfig::default().to_kv();
        for key in CONFIG_KEYS {
            assert!(
                dump.lines().any(|l| l.starts_with(&format!("{key}="))),
                "missing {key}"
            );
        }
    }
}
