//! JSON config files holding flag defaults per subcommand.
//!
//! A config looks like `{"cluster": {"support-min": 0.7, "method": "maxp"}}`.
//! Entries of the running subcommand's section are spliced into argv right
//! after the subcommand name unless the same flag is already present, so
//! flags on the command line always win.

use std::ffi::OsString;
use std::fs;

use serde_json::Value;

/// Global flags that take a value and may precede the subcommand.
const GLOBAL_VALUE_FLAGS: [&str; 2] = ["--threads", "--config"];

pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut config = None;
    let mut sub_pos = None;
    let mut i = 1;
    while i < args.len() {
        let Some(a) = args[i].to_str() else {
            i += 1;
            continue;
        };
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        } else if GLOBAL_VALUE_FLAGS.contains(&a) {
            if a == "--config" {
                config = args.get(i + 1).and_then(|v| v.to_str()).map(str::to_string);
            }
            i += 2;
            continue;
        } else if sub_pos.is_none() && !a.starts_with('-') {
            sub_pos = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(pos)) = (config, sub_pos) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let root: Value = serde_json::from_str(&text).map_err(|e| format!("invalid config {path}: {e}"))?;
    let Value::Object(root) = root else {
        return Err(format!("config {path} must be a JSON object"));
    };
    let sub = args[pos].to_string_lossy().into_owned();
    let Some(section) = root.get(&sub) else {
        return Ok(args);
    };
    let Value::Object(section) = section else {
        return Err(format!("config section {sub} must be an object"));
    };

    let given: Vec<String> = args[pos + 1..]
        .iter()
        .filter_map(|a| a.to_str())
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in section {
        let flag = format!("--{}", key.replace('_', "-"));
        if given.contains(&flag) {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => injected.push(flag.into()),
            Value::Number(n) => injected.extend([flag.into(), n.to_string().into()]),
            Value::String(s) => injected.extend([flag.into(), s.into()]),
            Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                injected.extend([flag.into(), parts.join(",").into()]);
            }
            Value::Object(_) => return Err(format!("config key {sub}.{key} cannot be an object")),
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &[&str]) -> Vec<OsString> {
        s.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"cluster": {"support-min": 0.7, "distance_max": 0.05, "outgroup": ["a", "b"], "skip": false}}"#).unwrap();
        let p = path.to_str().unwrap();
        let out = expand(argv(&["x", "--config", p, "cluster", "--distance-max=0.01"])).unwrap();
        let out: Vec<String> = out.into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(
            out,
            ["x", "--config", p, "cluster", "--outgroup", "a,b", "--support-min", "0.7", "--distance-max=0.01"]
        );
    }

    #[test]
    fn untouched_without_config() {
        let a = argv(&["x", "--threads", "2", "dist", "--out", "m"]);
        assert_eq!(expand(a.clone()).unwrap(), a);
    }
}
