use std::env;
use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

/// Service settings, normally read from the environment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    /// `BIND_ADDR`
    pub bind_addr: String,
    /// `VOTER_CAP`: most voters one demo session accepts.
    pub voter_cap: usize,
    /// `SESSION_TTL_SECONDS`
    pub session_ttl: Duration,
    /// `MAX_BODY_BYTES`
    pub max_body_bytes: usize,
    /// `STATIC_DIR`: when set, files under it are served for non-API paths.
    pub static_dir: Option<PathBuf>,
    /// `SNAPSHOT_PATH`: sessions are restored from and saved to this file.
    pub snapshot_path: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind_addr: "127.0.0.1:8080".into(),
            voter_cap: 200,
            session_ttl: Duration::from_secs(24 * 60 * 60),
            max_body_bytes: 16 * 1024 * 1024,
            static_dir: None,
            snapshot_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub variable: &'static str,
    pub value: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid value {:?} for {}", self.value, self.variable)
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    pub fn from_env() -> Result<Config, ConfigError> {
        Config::from_lookup(|key| env::var(key).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        let mut config = Config::default();
        if let Some(addr) = lookup("BIND_ADDR") {
            config.bind_addr = addr;
        }
        let number = |variable: &'static str| -> Result<Option<u64>, ConfigError> {
            lookup(variable)
                .map(|value| {
                    value
                        .trim()
                        .parse::<u64>()
                        .map_err(|_| ConfigError { variable, value })
                })
                .transpose()
        };
        if let Some(cap) = number("VOTER_CAP")? {
            config.voter_cap = cap as usize;
        }
        if let Some(ttl) = number("SESSION_TTL_SECONDS")? {
            config.session_ttl = Duration::from_secs(ttl);
        }
        if let Some(max) = number("MAX_BODY_BYTES")? {
            config.max_body_bytes = max as usize;
        }
        config.static_dir = lookup("STATIC_DIR").filter(|s| !s.is_empty()).map(PathBuf::from);
        config.snapshot_path = lookup("SNAPSHOT_PATH")
            .filter(|s| !s.is_empty())
            .map(PathBuf::from);
        Ok(config)
    }
}
