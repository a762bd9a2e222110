//! Environment builders and the CSV matrix format (row = sender,
//! column = receiver).

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{ConfigError, Error};
use crate::model::Environment;
use crate::rng::{Purpose, RngContract};

pub fn flat_env(n: usize, l: f64) -> Result<Environment, ConfigError> {
    if !(0.0..=1.0).contains(&l) {
        return Err(ConfigError::param("env_l", format!("{l} is outside [0, 1]")));
    }
    Ok(Environment::filled(n, l))
}

/// Symmetric 0/1 links, each unordered pair present with probability `p`.
pub fn er_env(n: usize, p: f64, seed: u64) -> Result<Environment, ConfigError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ConfigError::param("env_p", format!("{p} is outside [0, 1]")));
    }
    let mut rng = RngContract::new(seed).stream(0, 0, Purpose::Environment);
    let mut env = Environment::filled(n, 0.0);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                env.set(a, b, 1.0);
                env.set(b, a, 1.0);
            }
        }
    }
    Ok(env)
}

pub fn parse_env(text: &str) -> Result<Environment, ConfigError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ConfigError::Parse {
            row: r,
            col: 0,
            msg: e.to_string(),
        })?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|e| ConfigError::Parse {
                    row: r,
                    col: c,
                    msg: format!("`{field}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ConfigError::Parse {
            row: 0,
            col: 0,
            msg: "empty matrix".into(),
        });
    }
    Environment::from_rows(&rows)
}

pub fn load_env(path: &Path) -> Result<Environment, Error> {
    let text = fs::read_to_string(path)?;
    Ok(parse_env(&text)?)
}

pub fn write_env<W: Write>(env: &Environment, mut out: W) -> std::io::Result<()> {
    for row in env.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_env(env: &Environment, path: &Path) -> Result<(), Error> {
    let mut buf = Vec::new();
    write_env(env, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_examples() {
        let e = flat_env(3, 0.0).unwrap();
        assert!((0..3).all(|a| (0..3).all(|b| e.get(a, b) == if a == b { 1.0 } else { 0.0 })));
        assert_eq!(flat_env(20, 0.95).unwrap().count_above(0.9), 380);
        assert!(flat_env(2, 1.2).is_err());
    }

    #[test]
    fn er_extremes_and_symmetry() {
        assert_eq!(er_env(10, 0.0, 1).unwrap().count_above(0.5), 0);
        assert_eq!(er_env(10, 1.0, 1).unwrap().count_above(0.5), 90);
        let e = er_env(20, 0.284, 7).unwrap();
        assert!(e.is_symmetric());
        assert_eq!(e, er_env(20, 0.284, 7).unwrap());
        assert_ne!(e, er_env(20, 0.284, 8).unwrap());
    }

    #[test]
    fn er_mean_edge_count() {
        let seeds = 1000;
        let total: usize = (0..seeds)
            .map(|s| er_env(20, 0.284, s).unwrap().count_above(0.5) / 2)
            .sum();
        let mean = total as f64 / seeds as f64;
        assert!((mean - 53.96).abs() < 2.0, "mean edges {mean}");
    }

    #[test]
    fn csv_round_trip() {
        let e = er_env(12, 0.3, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("env.csv");
        save_env(&e, &path).unwrap();
        assert_eq!(load_env(&path).unwrap(), e);
        let mut e = flat_env(3, 0.1).unwrap();
        e.set(0, 2, 0.123456789);
        let mut buf = Vec::new();
        write_env(&e, &mut buf).unwrap();
        assert_eq!(parse_env(std::str::from_utf8(&buf).unwrap()).unwrap(), e);
    }

    #[test]
    fn parse_errors_name_the_cell() {
        assert_eq!(
            parse_env("1,0.5\n1.2,1\n"),
            Err(ConfigError::OutOfRange { row: 1, col: 0, value: 1.2 })
        );
        assert!(matches!(
            parse_env("1,0,0,0\n0,1,0,0\n0,0,1,0\n"),
            Err(ConfigError::NonSquare { row: 0, expected: 3, found: 4 })
        ));
        assert!(matches!(
            parse_env("1,x\n0,1\n"),
            Err(ConfigError::Parse { row: 0, col: 1, .. })
        ));
    }
}
