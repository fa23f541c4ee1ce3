//! Field expressions: sums of `c*sin(k*x)` terms.

use crate::error::{Error, Result};

/// `(c, k)` pairs of `Σ c sin(k x)`, in input order.
pub fn parse_sine_sum(text: &str) -> Result<Vec<(f64, usize)>> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(bad(text, "empty expression"));
    }
    if s == "0" {
        return Ok(Vec::new());
    }
    let mut terms = Vec::new();
    for (sign, body) in split_terms(&s) {
        terms.push(parse_term(text, sign, body)?);
    }
    Ok(terms)
}

fn bad(text: &str, why: &str) -> Error {
    Error::Config(format!("field expression {text:?}: {why}"))
}

/// Splits at top-level `+`/`-`, leaving signs of exponents (`1e-3`) alone.
fn split_terms(s: &str) -> Vec<(f64, &str)> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut start = 0;
    let mut depth = 0i32;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'+' | b'-' if depth == 0 => {
                let exponent = i > 0 && matches!(bytes[i - 1], b'e' | b'E') && i > 1 && bytes[i - 2].is_ascii_digit();
                if exponent {
                    continue;
                }
                if i > start {
                    out.push((sign, &s[start..i]));
                }
                sign = if b == b'-' { -1.0 } else { 1.0 };
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push((sign, &s[start..]));
    out
}

fn parse_term(text: &str, sign: f64, body: &str) -> Result<(f64, usize)> {
    let (coef, sine) = match body.find("sin(") {
        Some(0) => (1.0, body),
        Some(i) => {
            let c = body[..i]
                .strip_suffix('*')
                .ok_or_else(|| bad(text, "expected `*` between coefficient and sin"))?;
            (c.parse::<f64>().map_err(|_| bad(text, &format!("bad coefficient {c:?}")))?, &body[i..])
        }
        None => return Err(bad(text, &format!("term {body:?} is not of the form c*sin(k*x)"))),
    };
    let arg = sine
        .strip_prefix("sin(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| bad(text, &format!("unbalanced term {body:?}")))?;
    let k = if arg == "x" {
        1
    } else {
        let k = arg.strip_suffix("*x").ok_or_else(|| bad(text, &format!("argument {arg:?} is not k*x")))?;
        k.parse::<usize>().map_err(|_| bad(text, &format!("wave number {k:?} is not a positive integer")))?
    };
    if k == 0 {
        return Err(bad(text, "wave number must be positive"));
    }
    if !coef.is_finite() {
        return Err(bad(text, "coefficient is not finite"));
    }
    Ok((sign * coef, k))
}
