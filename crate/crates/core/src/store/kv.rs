//! Space-separated `key=value` records.

use std::collections::HashMap;

pub fn parse_line(line: &str) -> Result<HashMap<String, String>, String> {
    let mut map = HashMap::new();
    for tok in line.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| format!("`{tok}` is not a key=value pair"))?;
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(format!("key `{k}` repeated"));
        }
    }
    Ok(map)
}

pub fn number<N: std::str::FromStr>(v: &str, key: &str) -> Result<N, String> {
    v.parse().map_err(|_| format!("`{key}` has non-numeric value `{v}`"))
}

pub fn flag(v: &str, key: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{key}` must be true or false, got `{v}`")),
    }
}
