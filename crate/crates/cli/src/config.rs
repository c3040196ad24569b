//! `--config FILE`: option values from JSON, spliced into the argument list
//! so clap validates them like typed flags. Flags already on the command line
//! take precedence.

use serde_json::Value;

fn config_path(argv: &[String]) -> Result<Option<String>, String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it
                .next()
                .cloned()
                .map(Some)
                .ok_or_else(|| "--config needs a file".to_string());
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
    }
    Ok(None)
}

fn given(argv: &[String], flag: &str) -> bool {
    argv.iter()
        .any(|a| a == flag || a.starts_with(&format!("{flag}=")))
}

pub fn expand(mut argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let text =
        std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let root: Value = serde_json::from_str(&text).map_err(|e| format!("config {path}: {e}"))?;
    // a run manifest nests the options under `config`
    let options = match (root.get("subcommand"), root.get("config")) {
        (Some(Value::String(sub)), Some(cfg)) => {
            for word in sub.split_whitespace() {
                if !argv.iter().skip(1).any(|a| a == word) {
                    return Err(format!("manifest {path} is for `{sub}`"));
                }
            }
            cfg.clone()
        }
        _ => root,
    };
    let Value::Object(map) = options else {
        return Err(format!("config {path} must be a JSON object"));
    };
    let mut extra = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if given(&argv, &flag) {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => extra.push(flag),
            Value::String(s) => extra.push(format!("{flag}={s}")),
            Value::Number(n) => extra.push(format!("{flag}={n}")),
            Value::Array(items) => {
                for item in items {
                    match item {
                        Value::String(s) => extra.push(format!("{flag}={s}")),
                        other => extra.push(format!("{flag}={other}")),
                    }
                }
            }
            Value::Object(_) => return Err(format!("config key `{key}` must not be an object")),
        }
    }
    argv.extend(extra);
    Ok(argv)
}
