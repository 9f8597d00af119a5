use std::path::Path;

use super::{BoundingBox, Domain, DomainSpec, GeomError};
use crate::symbolic::parse_expr;

pub const DEFAULT_EPS0: f64 = 0.25;
pub const DEFAULT_CHART_RADIUS: f64 = 0.5;
pub const DEFAULT_BOX_HALF: f64 = 1.5;

const REGISTRY: &[(&str, &str, usize)] = &[
    ("ball", "z1*conj(z1) + z2*conj(z2) - 1", 2),
    ("egg2", "z1*conj(z1) + (z2*conj(z2))^2 - 1", 4),
    ("egg3", "z1*conj(z1) + (z2*conj(z2))^3 - 1", 6),
    // |z2|^4 + 0.1 Re(z2^2)|z2|^2 keeps type 4 at (1, 0) but is not circular
    ("egg2_perturbed", "z1*conj(z1) + (z2*conj(z2))^2 + 0.05*(z2^2 + conj(z2)^2)*z2*conj(z2) - 1", 4),
];

pub fn registry_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _, _)| *n).collect()
}

pub fn registry_spec(name: &str) -> Option<DomainSpec> {
    let (n, text, m) = REGISTRY.iter().find(|(n, _, _)| *n == name)?;
    Some(DomainSpec {
        name: n.to_string(),
        r_text: text.to_string(),
        r: parse_expr(text).expect("registry expressions parse"),
        m: *m,
        chart_radius: DEFAULT_CHART_RADIUS,
        eps0: DEFAULT_EPS0,
        bbox: BoundingBox::cube(DEFAULT_BOX_HALF),
    })
}

/// Parses a `key = value` domain definition (`r`, `m`, `R`, `eps0`, `box`).
/// `box` is either one half-width or eight bounds `x1lo,x1hi,y1lo,...`.
pub fn parse_domain_file(text: &str, name: &str) -> Result<DomainSpec, crate::Error> {
    let mut r = None;
    let mut m = None;
    let mut chart_radius = DEFAULT_CHART_RADIUS;
    let mut eps0 = DEFAULT_EPS0;
    let mut bbox = BoundingBox::cube(DEFAULT_BOX_HALF);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| GeomError::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let num = |v: &str| -> Result<f64, GeomError> {
            v.parse::<f64>().map_err(|e| GeomError::Parse(format!("line {}: {key}: {e}", lineno + 1)))
        };
        match key {
            "r" => r = Some((value.to_string(), parse_expr(value)?)),
            "m" => {
                m = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| GeomError::Parse(format!("line {}: m: {e}", lineno + 1)))?,
                )
            }
            "R" => chart_radius = num(value)?,
            "eps0" => eps0 = num(value)?,
            "box" => {
                let vals: Vec<f64> = value.split(',').map(|s| num(s.trim())).collect::<Result<_, _>>()?;
                bbox = match vals.len() {
                    1 => BoundingBox::cube(vals[0]),
                    8 => {
                        let mut b = BoundingBox { lo: [0.0; 4], hi: [0.0; 4] };
                        for k in 0..4 {
                            b.lo[k] = vals[2 * k];
                            b.hi[k] = vals[2 * k + 1];
                        }
                        b
                    }
                    n => return Err(GeomError::Parse(format!("box needs 1 or 8 numbers, got {n}")).into()),
                };
            }
            other => return Err(GeomError::Parse(format!("line {}: unknown key `{other}`", lineno + 1)).into()),
        }
    }
    let (r_text, r) = r.ok_or_else(|| GeomError::Parse("missing `r`".into()))?;
    let m = m.ok_or_else(|| GeomError::Parse("missing `m`".into()))?;
    Ok(DomainSpec { name: name.to_string(), r_text, r, m, chart_radius, eps0, bbox })
}

/// Loads a registry domain by name, or a definition file by path, and
/// validates it.
pub fn load_domain(name_or_path: &str) -> Result<Domain, crate::Error> {
    let spec = match registry_spec(name_or_path) {
        Some(s) => s,
        None => {
            let path = Path::new(name_or_path);
            if !path.exists() {
                return Err(GeomError::UnknownDomain(name_or_path.to_string()).into());
            }
            let text = std::fs::read_to_string(path)?;
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            parse_domain_file(&text, &name)?
        }
    };
    load_spec(spec)
}

pub fn load_spec(spec: DomainSpec) -> Result<Domain, crate::Error> {
    let mut d = Domain::from_spec(spec)?;
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_domains_load() {
        for name in registry_names() {
            let d = load_domain(name).unwrap();
            assert_eq!(d.name(), name);
        }
        assert_eq!(load_domain("ball").unwrap().m(), 2);
        assert_eq!(load_domain("egg2").unwrap().m(), 4);
        assert!(matches!(load_domain("nope"), Err(crate::Error::Geom(GeomError::UnknownDomain(_)))));
    }

    #[test]
    fn definition_files() {
        let s = parse_domain_file("r = z1*conj(z1) + z2*conj(z2) - 0.81\nm = 2\nR = 0.4 # comment\neps0=0.2\nbox = 1.2", "small").unwrap();
        assert_eq!(s.m, 2);
        assert_eq!(s.chart_radius, 0.4);
        assert_eq!(s.bbox, BoundingBox::cube(1.2));
        let d = load_spec(s).unwrap();
        assert!((d.signed_distance(&crate::C2::ZERO).unwrap() + 0.9).abs() < 1e-12);

        let bad = parse_domain_file("r = z1\nm = 2", "bad").unwrap();
        assert!(matches!(load_spec(bad), Err(crate::Error::Geom(GeomError::Validation(_)))));
        let outside = parse_domain_file("r = z1*conj(z1) + 1\nm = 2", "empty").unwrap();
        assert!(matches!(load_spec(outside), Err(crate::Error::Geom(GeomError::Validation(_)))));
        assert!(parse_domain_file("m = 2", "x").is_err());
        assert!(parse_domain_file("r = z1/(\nm = 2", "x").is_err());
    }
}
