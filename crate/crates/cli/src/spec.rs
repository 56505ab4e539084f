//! Line-oriented group spec files: algebra (structure constants), optional
//! stratification, metric data, or a structured-frame profile. Every parse
//! failure is a located diagnostic.

use carnot::algebra::{LieAlgebra, Stratification};
use carnot::frame::{profile_by_name, su2su2r_frame, CurveProfile, StructuredFrame, SubRiemannianStructure};
use carnot::linalg::Mat;
use carnot::scalar::{Rational, Scalar};
use std::fmt;

#[derive(Debug)]
pub struct SpecError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for SpecError {}

fn err(line: usize, col: usize, msg: impl Into<String>) -> SpecError {
    SpecError { line, col, msg: msg.into() }
}

/// Gram matrix declaration.
#[derive(Debug, Clone, PartialEq)]
pub enum GramSpec {
    Orthonormal,
    Diagonal(Vec<Rational>),
    Rows(Vec<Vec<Rational>>),
}

impl GramSpec {
    fn to_matrix(&self, n: usize, line: usize) -> Result<Mat<Rational>, SpecError> {
        match self {
            GramSpec::Orthonormal => Ok(Mat::identity(n)),
            GramSpec::Diagonal(d) => {
                if d.len() != n {
                    return Err(err(line, 1, format!("expected {n} diagonal entries, got {}", d.len())));
                }
                Ok(Mat::from_diag(d))
            }
            GramSpec::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(err(line, 1, format!("expected {n}x{n} matrix")));
                }
                Ok(Mat::from_rows(rows.clone()))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlgebraSection {
    pub dim: usize,
    pub basis: Vec<String>,
    /// 1-indexed `(i, j, k, value)` as written in the file.
    pub brackets: Vec<(usize, usize, usize, Rational)>,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct MetricSection {
    /// 1-indexed horizontal basis positions.
    pub horizontal: Vec<usize>,
    pub gram_h: GramSpec,
    pub gram_full: GramSpec,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct FrameSection {
    pub profile: String,
    pub f: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct GroupSpec {
    pub algebra: Option<AlgebraSection>,
    pub stratification: Option<Vec<Vec<usize>>>,
    pub metric: Option<MetricSection>,
    pub frame: Option<FrameSection>,
}

fn parse_rational(tok: &str, line: usize, col: usize) -> Result<Rational, SpecError> {
    if let Some((num, den)) = tok.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| err(line, col, format!("bad numerator '{num}'")))?;
        let d: i64 = den.trim().parse().map_err(|_| err(line, col, format!("bad denominator '{den}'")))?;
        if d == 0 {
            return Err(err(line, col, "zero denominator"));
        }
        return Ok(Rational::from_ratio(n, d));
    }
    if let Some(dot) = tok.find('.') {
        let places = tok.len() - dot - 1;
        if places > 9 {
            return Err(err(line, col, "too many decimal places; use a fraction"));
        }
        let joined: String = tok.chars().filter(|&c| c != '.').collect();
        let n: i64 = joined.parse().map_err(|_| err(line, col, format!("bad number '{tok}'")))?;
        return Ok(Rational::from_ratio(n, 10i64.pow(places as u32)));
    }
    let n: i64 = tok.parse().map_err(|_| err(line, col, format!("bad number '{tok}'")))?;
    Ok(Rational::from_int(n))
}

fn parse_index(tok: &str, line: usize, col: usize) -> Result<usize, SpecError> {
    let i: usize = tok.parse().map_err(|_| err(line, col, format!("bad index '{tok}'")))?;
    if i == 0 {
        return Err(err(line, col, "indices are 1-based"));
    }
    Ok(i)
}

fn parse_gram(value: &str, line: usize) -> Result<GramSpec, SpecError> {
    let v = value.trim();
    if v == "orthonormal" {
        return Ok(GramSpec::Orthonormal);
    }
    if let Some(rest) = v.strip_prefix("diag:") {
        let entries = rest
            .split_whitespace()
            .map(|t| parse_rational(t, line, 1))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(GramSpec::Diagonal(entries));
    }
    if let Some(rest) = v.strip_prefix("rows:") {
        let rows = rest
            .split(';')
            .map(|row| {
                row.split_whitespace()
                    .map(|t| parse_rational(t, line, 1))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(GramSpec::Rows(rows));
    }
    Err(err(line, 1, format!("expected 'orthonormal', 'diag: ...' or 'rows: ...', got '{v}'")))
}

pub fn parse_spec(text: &str) -> Result<GroupSpec, SpecError> {
    let mut spec = GroupSpec::default();
    let mut section = String::new();
    let mut dim: Option<usize> = None;
    let mut basis: Vec<String> = Vec::new();
    let mut brackets: Vec<(usize, usize, usize, Rational)> = Vec::new();
    let mut algebra_line = 0;
    let mut layers: Vec<Vec<usize>> = Vec::new();
    let mut horizontal: Vec<usize> = Vec::new();
    let mut gram_h = GramSpec::Orthonormal;
    let mut gram_full = GramSpec::Orthonormal;
    let mut metric_line = 0;
    let mut saw_metric = false;
    let mut profile = String::new();
    let mut f_name = String::from("arctan");
    let mut frame_line = 0;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        if stripped.starts_with('[') {
            if !stripped.ends_with(']') {
                return Err(err(line, raw.len(), "unterminated section header"));
            }
            section = stripped[1..stripped.len() - 1].to_string();
            match section.as_str() {
                "algebra" => algebra_line = line,
                "metric" => {
                    metric_line = line;
                    saw_metric = true;
                }
                "frame" => frame_line = line,
                "stratification" => {}
                other => return Err(err(line, 1, format!("unknown section '[{other}]'"))),
            }
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| err(line, 1, "expected 'key = value'"))?;
        let key = key.trim();
        let value = value.trim();
        match (section.as_str(), key) {
            ("algebra", "dim") => {
                dim = Some(value.parse().map_err(|_| err(line, 1, format!("bad dim '{value}'")))?);
            }
            ("algebra", "basis") => {
                basis = value.split_whitespace().map(String::from).collect();
            }
            ("algebra", "bracket") => {
                let toks: Vec<&str> = value.split_whitespace().collect();
                if toks.len() != 4 {
                    return Err(err(line, 1, "bracket needs 'i j k value'"));
                }
                let i = parse_index(toks[0], line, 1)?;
                let j = parse_index(toks[1], line, 2)?;
                let k = parse_index(toks[2], line, 3)?;
                let v = parse_rational(toks[3], line, 4)?;
                brackets.push((i, j, k, v));
            }
            ("stratification", "layer") => {
                let layer = value
                    .split_whitespace()
                    .map(|t| parse_index(t, line, 1))
                    .collect::<Result<Vec<_>, _>>()?;
                layers.push(layer);
            }
            ("metric", "horizontal") => {
                horizontal = value
                    .split_whitespace()
                    .map(|t| parse_index(t, line, 1))
                    .collect::<Result<Vec<_>, _>>()?;
            }
            ("metric", "gram_h") => gram_h = parse_gram(value, line)?,
            ("metric", "gram_full") => gram_full = parse_gram(value, line)?,
            ("frame", "profile") => profile = value.to_string(),
            ("frame", "f") => f_name = value.to_string(),
            (sec, key) => {
                return Err(err(line, 1, format!("unknown key '{key}' in section '[{sec}]'")));
            }
        }
    }

    if let Some(d) = dim {
        for &(i, j, k, _) in &brackets {
            for (idx, name) in [(i, "i"), (j, "j"), (k, "k")] {
                if idx > d {
                    return Err(err(
                        algebra_line,
                        1,
                        format!("bracket index {name} = {idx} out of range for dim {d}"),
                    ));
                }
            }
        }
        spec.algebra = Some(AlgebraSection { dim: d, basis, brackets, line: algebra_line });
    } else if !brackets.is_empty() {
        return Err(err(algebra_line.max(1), 1, "brackets given without dim"));
    }
    if !layers.is_empty() {
        spec.stratification = Some(layers);
    }
    if saw_metric {
        spec.metric = Some(MetricSection { horizontal, gram_h, gram_full, line: metric_line });
    }
    if !profile.is_empty() {
        spec.frame = Some(FrameSection { profile, f: f_name, line: frame_line });
    }
    if spec.algebra.is_none() && spec.frame.is_none() {
        return Err(err(1, 1, "spec needs an [algebra] or a [frame] section"));
    }
    Ok(spec)
}

impl fmt::Display for GroupSpec {
    /// Canonical serialized form; `parse(display(spec))` is the identity on
    /// the parsed content.
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(a) = &self.algebra {
            writeln!(out, "[algebra]")?;
            writeln!(out, "dim = {}", a.dim)?;
            if !a.basis.is_empty() {
                writeln!(out, "basis = {}", a.basis.join(" "))?;
            }
            for (i, j, k, v) in &a.brackets {
                writeln!(out, "bracket = {i} {j} {k} {v}")?;
            }
        }
        if let Some(layers) = &self.stratification {
            writeln!(out, "[stratification]")?;
            for layer in layers {
                let toks: Vec<String> = layer.iter().map(|i| i.to_string()).collect();
                writeln!(out, "layer = {}", toks.join(" "))?;
            }
        }
        if let Some(m) = &self.metric {
            writeln!(out, "[metric]")?;
            let toks: Vec<String> = m.horizontal.iter().map(|i| i.to_string()).collect();
            writeln!(out, "horizontal = {}", toks.join(" "))?;
            for (name, g) in [("gram_h", &m.gram_h), ("gram_full", &m.gram_full)] {
                match g {
                    GramSpec::Orthonormal => writeln!(out, "{name} = orthonormal")?,
                    GramSpec::Diagonal(d) => {
                        let toks: Vec<String> = d.iter().map(|v| v.to_string()).collect();
                        writeln!(out, "{name} = diag: {}", toks.join(" "))?;
                    }
                    GramSpec::Rows(rows) => {
                        let rtoks: Vec<String> = rows
                            .iter()
                            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                            .collect();
                        writeln!(out, "{name} = rows: {}", rtoks.join("; "))?;
                    }
                }
            }
        }
        if let Some(fr) = &self.frame {
            writeln!(out, "[frame]")?;
            writeln!(out, "profile = {}", fr.profile)?;
            writeln!(out, "f = {}", fr.f)?;
        }
        Ok(())
    }
}

pub enum BuiltSpec {
    Invariant {
        structure: SubRiemannianStructure<Rational>,
        stratification: Option<Stratification>,
    },
    Structured {
        frame: StructuredFrame,
        #[allow(dead_code)]
        profile: CurveProfile,
    },
}

impl GroupSpec {
    pub fn build(&self) -> Result<BuiltSpec, Box<dyn std::error::Error>> {
        if let Some(fr) = &self.frame {
            if fr.profile != "su2su2r" {
                return Err(Box::new(err(
                    fr.line,
                    1,
                    format!("unknown frame profile '{}'", fr.profile),
                )));
            }
            let profile = profile_by_name(&fr.f)?;
            return Ok(BuiltSpec::Structured { frame: su2su2r_frame(profile.clone()), profile });
        }
        let a = self.algebra.as_ref().expect("validated in parse");
        let brackets0: Vec<(usize, usize, usize, Rational)> = a
            .brackets
            .iter()
            .map(|(i, j, k, v)| (i - 1, j - 1, k - 1, v.clone()))
            .collect();
        let algebra = LieAlgebra::from_brackets(a.dim, a.basis.clone(), brackets0)?;
        let metric = self.metric.as_ref().ok_or_else(|| {
            Box::new(err(a.line, 1, "algebra specs need a [metric] section")) as Box<dyn std::error::Error>
        })?;
        let horizontal: Vec<usize> = metric.horizontal.iter().map(|i| i - 1).collect();
        for &h in &horizontal {
            if h >= a.dim {
                return Err(Box::new(err(
                    metric.line,
                    1,
                    format!("horizontal index {} out of range for dim {}", h + 1, a.dim),
                )));
            }
        }
        let gram_h = metric.gram_h.to_matrix(horizontal.len(), metric.line)?;
        let gram_full = metric.gram_full.to_matrix(a.dim, metric.line)?;
        let structure = SubRiemannianStructure::new(algebra, horizontal, gram_h, gram_full)?;
        let stratification = self
            .stratification
            .as_ref()
            .map(|layers| Stratification::new(layers.iter().map(|l| l.iter().map(|i| i - 1).collect()).collect()));
        Ok(BuiltSpec::Invariant { structure, stratification })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEIS: &str = "\
[algebra]
dim = 3
basis = a1 a2 a3
bracket = 1 2 3 1
[stratification]
layer = 1 2
layer = 3
[metric]
horizontal = 1 2
gram_h = orthonormal
gram_full = orthonormal
";

    #[test]
    fn parse_and_roundtrip() {
        let spec = parse_spec(HEIS).unwrap();
        let text = spec.to_string();
        let again = parse_spec(&text).unwrap();
        assert_eq!(text, again.to_string());
        match spec.build().unwrap() {
            BuiltSpec::Invariant { structure, stratification } => {
                assert_eq!(structure.algebra.dim, 3);
                assert!(stratification.unwrap().verify(&structure.algebra).is_empty());
            }
            _ => panic!("expected invariant spec"),
        }
    }

    #[test]
    fn located_errors() {
        let bad = "[algebra]\ndim = 3\nbracket = 1 2 9 1\n";
        let e = parse_spec(bad).unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.msg.contains("out of range"));

        let bad = "[algebra]\ndim = x\n";
        let e = parse_spec(bad).unwrap_err();
        assert_eq!(e.line, 2);

        let bad = "[metric]\nhorizontal = 0\n";
        let e = parse_spec(bad).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.msg.contains("1-based"));

        let bad = "[algebra]\ndim = 2\nwhatever = 3\n";
        let e = parse_spec(bad).unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn rationals_and_grams() {
        let text = "\
[algebra]
dim = 2
bracket = 1 2 2 -1/2
[metric]
horizontal = 1
gram_h = diag: 4
gram_full = rows: 4 0; 0 1
";
        let spec = parse_spec(text).unwrap();
        match spec.build().unwrap() {
            BuiltSpec::Invariant { structure, .. } => {
                assert_eq!(
                    structure.algebra.structure_constant(0, 1, 1),
                    &Rational::from_ratio(-1, 2)
                );
                assert_eq!(structure.gram_h[(0, 0)], Rational::from_int(4));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn structured_spec() {
        let text = "[frame]\nprofile = su2su2r\nf = arctan\n";
        let spec = parse_spec(text).unwrap();
        assert!(matches!(spec.build().unwrap(), BuiltSpec::Structured { .. }));
        let text = "[frame]\nprofile = unknown\n";
        assert!(parse_spec(text).unwrap().build().is_err());
    }
}
