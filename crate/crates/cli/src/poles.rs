//! `--poles` lists such as `0,0.5+0.1i,0.5-0.1i`.

use cgdare::spectral::C64;
use nalgebra::Complex;

fn parse_real(s: &str, token: &str) -> Result<f64, String> {
    match s {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => s
            .parse::<f64>()
            .map_err(|_| format!("cannot parse `{token}` as a complex number")),
    }
}

/// One entry: `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(token: &str) -> Result<C64, String> {
    let t: String = token.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty pole entry".into());
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return Ok(Complex::new(parse_real(&t, token)?, 0.0));
    };
    if body.is_empty() {
        return Ok(Complex::new(0.0, 1.0));
    }
    // split at the last sign that is neither leading nor part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        None => {
            if body == "+" || body == "-" || body.parse::<f64>().is_ok() {
                Ok(Complex::new(0.0, parse_real(body, token)?))
            } else {
                Err(format!("cannot parse `{token}` as a complex number"))
            }
        }
        Some(k) => {
            let re = body[..k]
                .parse::<f64>()
                .map_err(|_| format!("cannot parse `{token}` as a complex number"))?;
            Ok(Complex::new(re, parse_real(&body[k..], token)?))
        }
    }
}

pub fn parse_poles(list: &str) -> Result<Vec<C64>, String> {
    if list.trim().is_empty() {
        return Ok(Vec::new());
    }
    list.split(',').map(parse_complex).collect()
}
