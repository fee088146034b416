//! Angle expressions and angle files.
//!
//! An angle file has one `observer setting theta phi` line per observable,
//! with 1-based observer and setting indices. Angles are radians and may use
//! `pi`, as in `3pi/4` or `-pi/2`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quantum::{AngleConfiguration, Observable, Scenario};

/// Evaluates a radian expression: products and quotients of numbers and
/// `pi`, with an optional leading sign. `3pi/4` means `3*pi/4`.
pub fn parse_angle(expr: &str) -> std::result::Result<f64, String> {
    let s = expr.trim();
    if s.is_empty() {
        return Err("empty angle".into());
    }
    let (sign, body) = match s.as_bytes()[0] {
        b'-' => (-1.0, &s[1..]),
        b'+' => (1.0, &s[1..]),
        _ => (1.0, s),
    };
    let mut value = 1.0;
    let mut op = '*';
    let mut rest = body.trim_start();
    let mut expect_operand = true;
    while !rest.is_empty() {
        if expect_operand {
            let (factor, tail) = operand(rest).ok_or_else(|| format!("bad angle {expr:?}"))?;
            value = if op == '*' { value * factor } else { value / factor };
            rest = tail.trim_start();
            expect_operand = false;
        } else if let Some(tail) = rest.strip_prefix('*') {
            op = '*';
            rest = tail.trim_start();
            expect_operand = true;
        } else if let Some(tail) = rest.strip_prefix('/') {
            op = '/';
            rest = tail.trim_start();
            expect_operand = true;
        } else if rest.starts_with("pi") {
            // Implicit product, as in `3pi`.
            op = '*';
            expect_operand = true;
        } else {
            return Err(format!("bad angle {expr:?}"));
        }
    }
    if expect_operand {
        return Err(format!("incomplete angle {expr:?}"));
    }
    let v = sign * value;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("angle {expr:?} is not finite"))
    }
}

fn operand(s: &str) -> Option<(f64, &str)> {
    if let Some(tail) = s.strip_prefix("pi") {
        return Some((std::f64::consts::PI, tail));
    }
    let end = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || ((c == 'e' || c == 'E') && i > 0)
                || ((c == '-' || c == '+') && i > 0 && matches!(s.as_bytes()[i - 1], b'e' | b'E')))
        })
        .map_or(s.len(), |(i, _)| i);
    if end == 0 {
        return None;
    }
    let x: f64 = s[..end].parse().ok()?;
    Some((x, &s[end..]))
}

/// Parses an angle file. The scenario is inferred from the largest setting
/// index of each observer; every observable must appear exactly once.
pub fn parse_angles(text: &str, source_name: &str) -> Result<AngleConfiguration> {
    let mut entries: Vec<Vec<Option<Observable>>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [obs, set, theta, phi] = fields[..] else {
            return Err(Error::parse(source_name, line_no, "expected `observer setting theta phi`"));
        };
        let index = |s: &str, what: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(i) if (1..=64).contains(&i) => Ok(i - 1),
                _ => Err(Error::parse(source_name, line_no, format!("bad {what} index {s:?}"))),
            }
        };
        let (o, k) = (index(obs, "observer")?, index(set, "setting")?);
        let angle = |s: &str| parse_angle(s).map_err(|m| Error::parse(source_name, line_no, m));
        let observable = Observable::new(angle(theta)?, angle(phi)?);
        if entries.len() <= o {
            entries.resize(o + 1, Vec::new());
        }
        if entries[o].len() <= k {
            entries[o].resize(k + 1, None);
        }
        if entries[o][k].replace(observable).is_some() {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("observer {} setting {} given twice", o + 1, k + 1),
            ));
        }
    }
    let mut observers = Vec::with_capacity(entries.len());
    for (o, settings) in entries.into_iter().enumerate() {
        let full: Option<Vec<Observable>> = settings.iter().copied().collect();
        match full {
            Some(v) if !v.is_empty() => observers.push(v),
            _ => {
                return Err(Error::parse(
                    source_name,
                    0,
                    format!("observer {} is missing one or more settings", o + 1),
                ))
            }
        }
    }
    if observers.len() < 2 {
        return Err(Error::parse(source_name, 0, "angle file must cover at least two observers"));
    }
    Ok(AngleConfiguration::new(observers))
}

/// Reads an angle file and checks it against `scenario` when one is given.
pub fn read_angles(path: &Path, scenario: Option<&Scenario>) -> Result<AngleConfiguration> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let angles = parse_angles(&text, &path.display().to_string())?;
    if let Some(sc) = scenario {
        angles.check(sc)?;
    }
    Ok(angles)
}

pub fn format_angles(angles: &AngleConfiguration) -> String {
    let mut out = String::from("# observer setting theta phi\n");
    for (o, settings) in angles.observers().iter().enumerate() {
        for (k, obs) in settings.iter().enumerate() {
            let _ = writeln!(out, "{} {} {:.17e} {:.17e}", o + 1, k + 1, obs.theta(), obs.phi());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn expressions() {
        let cases = [
            ("0", 0.0),
            ("1.25", 1.25),
            ("pi", PI),
            ("pi/4", PI / 4.0),
            ("3*pi/4", 3.0 * PI / 4.0),
            ("3pi/4", 3.0 * PI / 4.0),
            ("-pi/2", -PI / 2.0),
            ("pi/180", PI / 180.0),
            ("2 * pi / 3", 2.0 * PI / 3.0),
            ("1e-3", 1e-3),
            ("+0.5", 0.5),
        ];
        for (s, want) in cases {
            assert_eq!(parse_angle(s).unwrap(), want, "{s}");
        }
        for bad in ["", "-", "pi/", "p", "3//4", "1/0", "4pi pi x", "--1"] {
            assert!(parse_angle(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn file_round_trip() {
        let text = "1 1 0 0\n1 2 0 pi/2\n# Bob\n2 1 0 pi/4\n2 2 0 3pi/4\n";
        let a = parse_angles(text, "a").unwrap();
        let sc = Scenario::uniform(2, 2).unwrap();
        assert!(a.matches(&sc));
        assert_eq!(a.get(1, 1).unwrap().phi(), 3.0 * PI / 4.0);
        let back = parse_angles(&format_angles(&a), "b").unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn file_errors() {
        assert!(parse_angles("1 1 0 0\n1 1 0 0\n2 1 0 0\n", "x").is_err());
        assert!(parse_angles("1 1 0 0\n2 2 0 0\n", "x").is_err());
        assert!(parse_angles("1 1 0 0\n", "x").is_err());
        assert!(parse_angles("0 1 0 0\n2 1 0 0\n", "x").is_err());
        let err = parse_angles("1 1 0 0\n2 1 0 zz\n", "x").unwrap_err();
        assert!(err.to_string().starts_with("x:2:"), "{err}");
    }
}
