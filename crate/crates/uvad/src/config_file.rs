//! Flat `key = value` configuration files.
//!
//! Sources are layered: defaults, then the file, then `UVAD_<KEY>`
//! environment variables, then `--override key=value` flags. Unknown keys
//! are errors at every layer.

use std::path::Path;

use anyhow::{bail, Context, Result};
use uvad_core::config::CONFIG_KEYS;
use uvad_core::RunConfig;

pub const ENV_PREFIX: &str = "UVAD_";

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got `{}`", i + 1, raw.trim());
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').with_context(|| format!("override `{s}` is not key=value"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Config keys set through the environment, e.g. `UVAD_R_PERCENT=20`.
pub fn env_pairs(vars: impl IntoIterator<Item = (String, String)>) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (name, value) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let key = rest.to_ascii_lowercase();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            bail!("environment variable {name} does not name a config key");
        }
        out.push((key, value));
    }
    out.sort();
    Ok(out)
}

pub fn apply(cfg: &mut RunConfig, pairs: &[(String, String)], source: &str) -> Result<()> {
    for (k, v) in pairs {
        cfg.set(k, v).map_err(|e| anyhow::anyhow!("{source}: {e}"))?;
    }
    Ok(())
}

/// Builds the effective config from all layers. Validation is left to the
/// caller so that generator-only commands can report their own errors.
pub fn resolve(
    file: Option<&Path>,
    env: impl IntoIterator<Item = (String, String)>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let pairs = parse_pairs(&text).with_context(|| format!("config {}", path.display()))?;
        apply(&mut cfg, &pairs, &path.display().to_string())?;
    }
    apply(&mut cfg, &env_pairs(env)?, "environment")?;
    let pairs = overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    apply(&mut cfg, &pairs, "--override")?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

/// Renders a config in the file format, one key per line.
pub fn render(cfg: &RunConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    let mut out = String::new();
    for key in CONFIG_KEYS {
        let v = &value[*key];
        let text = match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        out.push_str(&format!("{key} = {text}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks() {
        let p = parse_pairs("# hi\n\nr_percent = 20 # inline\n top_k=2\n").unwrap();
        assert_eq!(p, vec![("r_percent".into(), "20".into()), ("top_k".into(), "2".into())]);
    }

    #[test]
    fn missing_equals_names_the_line() {
        let err = parse_pairs("a = 1\nbogus\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn layers_override_in_order() {
        let dir = std::env::temp_dir().join(format!("uvad-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.cfg");
        std::fs::write(&path, "r_percent = 20\nq_percent = 5\ntop_k = 2\n").unwrap();
        let env = vec![("UVAD_Q_PERCENT".to_string(), "7".to_string()), ("HOME".to_string(), "/".to_string())];
        let cfg = resolve(Some(&path), env, &["top_k=4".to_string()], Some(9)).unwrap();
        assert_eq!(cfg.r_percent, 20.0);
        assert_eq!(cfg.q_percent, 7.0);
        assert_eq!(cfg.top_k, 4);
        assert_eq!(cfg.master_seed, 9);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_keys_rejected_everywhere() {
        assert!(resolve(None, vec![], &["nope=1".to_string()], None).is_err());
        assert!(resolve(None, vec![("UVAD_NOPE".to_string(), "1".to_string())], &[], None).is_err());
    }

    #[test]
    fn render_round_trips() {
        let cfg = RunConfig { r_percent: 12.5, label_mode: uvad_core::LabelMode::Hard, ..RunConfig::default() };
        let mut back = RunConfig::default();
        apply(&mut back, &parse_pairs(&render(&cfg)).unwrap(), "t").unwrap();
        assert_eq!(back, cfg);
    }
}
