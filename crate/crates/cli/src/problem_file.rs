//! The `facered-problem-1` text format.
//!
//! ```text
//! format = facered-problem-1
//! name = sturm-3
//! seed = 0
//! cone = psd:3
//! rows = 2
//! cols = 6
//! A = sparse 3
//! 0 0 1
//! 1 3 1
//! 1 2 -0.70710678118654746
//! b = 0 0
//! ```
//!
//! `A` is either `dense`, followed by one line per row, or `sparse <nnz>`,
//! followed by `row col value` triplets (0-based). Coordinates are canonical:
//! symmetric blocks in `svec` order with off-diagonals scaled by `√2`, spin
//! blocks scaled by `√2` overall. Floats are written with 17 significant
//! digits so that writing a parsed file reproduces it byte for byte.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use facered::affine::AffineSet;
use facered::conegeom::ConeHandle;
use facered::linalg::svec_index;
use facered::{AlgebraSpec, BlockKind, Element};
use nalgebra::{DMatrix, DVector};

use crate::CliError;

pub const FORMAT_TAG: &str = "facered-problem-1";

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub name: String,
    pub seed: u64,
    pub blocks: Vec<BlockKind>,
    /// Row-major, `rows × cols`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// `printf("%.17g")`.
pub fn format_g17(x: f64) -> String {
    const P: i32 = 17;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_f64(tok: &str, line: usize, field: &str) -> Result<f64, CliError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, field, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, field, format!("`{tok}` is not finite")));
    }
    Ok(v)
}

fn parse_usize(tok: &str, line: usize, field: &str) -> Result<usize, CliError> {
    tok.parse()
        .map_err(|_| parse_err(line, field, format!("`{tok}` is not a nonnegative integer")))
}

/// Multiply natural coordinates into canonical ones, block by block.
pub fn natural_to_canonical(blocks: &[BlockKind], v: &mut [f64]) {
    let mut offset = 0;
    for &k in blocks {
        match k {
            BlockKind::SymMatrix(n) => {
                for j in 0..n {
                    for i in j + 1..n {
                        v[offset + svec_index(n, i, j)] *= SQRT_2;
                    }
                }
            }
            BlockKind::SpinFactor(n) => {
                for x in &mut v[offset..offset + n] {
                    *x *= SQRT_2;
                }
            }
            BlockKind::Orthant(_) => {}
        }
        offset += k.dim();
    }
}

fn parse_blocks(value: &str, line: usize) -> Result<Vec<BlockKind>, CliError> {
    let blocks = value
        .split_whitespace()
        .map(|t| t.parse::<BlockKind>().map_err(|e| parse_err(line, "cone", e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if blocks.is_empty() {
        return Err(parse_err(line, "cone", "no blocks"));
    }
    Ok(blocks)
}

impl ProblemFile {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|k| k.dim()).sum()
    }

    /// Parse a problem file. With `raw`, matrix rows are read in natural
    /// coordinates and converted.
    pub fn parse(text: &str, raw: bool) -> Result<Self, CliError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let mut format = None;
        let mut name = String::new();
        let mut seed = 0u64;
        let mut blocks: Option<Vec<BlockKind>> = None;
        let mut rows: Option<usize> = None;
        let mut cols: Option<usize> = None;
        let mut a: Option<Vec<Vec<f64>>> = None;
        let mut b: Option<Vec<f64>> = None;
        let mut last_line = 0;

        while let Some((ln, line)) = lines.next() {
            last_line = ln;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(ln, "?", "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "format" => {
                    if value != FORMAT_TAG {
                        return Err(parse_err(ln, key, format!("unsupported format `{value}`")));
                    }
                    format = Some(());
                }
                "name" => name = value.to_string(),
                "seed" => {
                    seed = value
                        .parse()
                        .map_err(|_| parse_err(ln, key, format!("`{value}` is not a seed")))?
                }
                "cone" => blocks = Some(parse_blocks(value, ln)?),
                "rows" => rows = Some(parse_usize(value, ln, key)?),
                "cols" => cols = Some(parse_usize(value, ln, key)?),
                "A" => {
                    let (m, n) = match (rows, cols) {
                        (Some(m), Some(n)) => (m, n),
                        _ => return Err(parse_err(ln, key, "`rows` and `cols` must come before `A`")),
                    };
                    let mut dense = vec![vec![0.0; n]; m];
                    let mut words = value.split_whitespace();
                    match words.next() {
                        Some("dense") => {
                            for row in dense.iter_mut() {
                                let (rl, text) = lines
                                    .next()
                                    .ok_or_else(|| parse_err(ln, key, "missing matrix rows"))?;
                                let vals = text
                                    .split_whitespace()
                                    .map(|t| parse_f64(t, rl, key))
                                    .collect::<Result<Vec<_>, _>>()?;
                                if vals.len() != n {
                                    return Err(parse_err(
                                        rl,
                                        key,
                                        format!("row has {} entries, expected {n}", vals.len()),
                                    ));
                                }
                                *row = vals;
                            }
                        }
                        Some("sparse") => {
                            let nnz = parse_usize(words.next().unwrap_or(""), ln, key)?;
                            for _ in 0..nnz {
                                let (tl, text) = lines
                                    .next()
                                    .ok_or_else(|| parse_err(ln, key, "missing triplets"))?;
                                let t: Vec<&str> = text.split_whitespace().collect();
                                if t.len() != 3 {
                                    return Err(parse_err(tl, key, "expected `row col value`"));
                                }
                                let (i, j) = (parse_usize(t[0], tl, key)?, parse_usize(t[1], tl, key)?);
                                if i >= m || j >= n {
                                    return Err(parse_err(
                                        tl,
                                        key,
                                        format!("entry ({i}, {j}) outside {m} × {n}"),
                                    ));
                                }
                                dense[i][j] = parse_f64(t[2], tl, key)?;
                            }
                        }
                        _ => return Err(parse_err(ln, key, "expected `dense` or `sparse <nnz>`")),
                    }
                    a = Some(dense);
                }
                "b" => {
                    b = Some(
                        value
                            .split_whitespace()
                            .map(|t| parse_f64(t, ln, key))
                            .collect::<Result<Vec<_>, _>>()?,
                    )
                }
                other => return Err(parse_err(ln, other, "unknown field")),
            }
        }

        let end = last_line;
        format.ok_or_else(|| parse_err(end, "format", "missing"))?;
        let blocks = blocks.ok_or_else(|| parse_err(end, "cone", "missing"))?;
        let rows = rows.ok_or_else(|| parse_err(end, "rows", "missing"))?;
        let cols = cols.ok_or_else(|| parse_err(end, "cols", "missing"))?;
        let mut a = a.ok_or_else(|| parse_err(end, "A", "missing"))?;
        let b = b.ok_or_else(|| parse_err(end, "b", "missing"))?;
        let dim: usize = blocks.iter().map(|k| k.dim()).sum();
        if cols != dim {
            return Err(parse_err(
                end,
                "cols",
                format!("{cols} columns but the cone has dimension {dim}"),
            ));
        }
        if b.len() != rows {
            return Err(parse_err(end, "b", format!("{} entries, expected {rows}", b.len())));
        }
        if raw {
            for row in &mut a {
                natural_to_canonical(&blocks, row);
            }
        }
        Ok(ProblemFile {
            name,
            seed,
            blocks,
            a,
            b,
        })
    }

    /// Canonical text: fixed field order, `%.17g` floats, sparse storage
    /// when at most a third of the entries are nonzero.
    pub fn to_text(&self) -> String {
        let rows = self.a.len();
        let cols = self.dim();
        let mut out = String::new();
        let cone: Vec<String> = self.blocks.iter().map(|k| k.to_string()).collect();
        writeln!(out, "format = {FORMAT_TAG}").unwrap();
        writeln!(out, "name = {}", self.name).unwrap();
        writeln!(out, "seed = {}", self.seed).unwrap();
        writeln!(out, "cone = {}", cone.join(" ")).unwrap();
        writeln!(out, "rows = {rows}").unwrap();
        writeln!(out, "cols = {cols}").unwrap();
        let nnz = self.a.iter().flatten().filter(|v| **v != 0.0).count();
        if 3 * nnz <= rows * cols {
            writeln!(out, "A = sparse {nnz}").unwrap();
            for (i, row) in self.a.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        writeln!(out, "{i} {j} {}", format_g17(v)).unwrap();
                    }
                }
            }
        } else {
            writeln!(out, "A = dense").unwrap();
            for row in &self.a {
                let vals: Vec<String> = row.iter().map(|&v| format_g17(v)).collect();
                writeln!(out, "{}", vals.join(" ")).unwrap();
            }
        }
        let b: Vec<String> = self.b.iter().map(|&v| format_g17(v)).collect();
        writeln!(out, "b = {}", b.join(" ")).unwrap();
        out
    }

    pub fn from_parts(name: &str, seed: u64, cone: &ConeHandle, affine: &AffineSet) -> Self {
        let a = affine.matrix();
        ProblemFile {
            name: name.to_string(),
            seed,
            blocks: cone.spec().blocks().to_vec(),
            a: (0..a.nrows())
                .map(|i| a.row(i).iter().copied().collect())
                .collect(),
            b: affine.rhs().iter().copied().collect(),
        }
    }

    pub fn cone(&self) -> Result<ConeHandle, CliError> {
        Ok(ConeHandle::new(AlgebraSpec::new(self.blocks.clone())?))
    }

    pub fn affine(&self) -> Result<AffineSet, CliError> {
        let (m, n) = (self.a.len(), self.dim());
        let a = DMatrix::from_fn(m, n, |i, j| self.a[i][j]);
        Ok(AffineSet::new(a, DVector::from_vec(self.b.clone()))?)
    }
}

/// A point file: whitespace-separated coordinates, `#` comments allowed.
pub fn parse_point(text: &str, blocks: &[BlockKind], raw: bool) -> Result<Element, CliError> {
    let mut v = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            v.push(parse_f64(tok, i + 1, "point")?);
        }
    }
    let dim: usize = blocks.iter().map(|k| k.dim()).sum();
    if v.len() != dim {
        return Err(CliError::Core(facered::Error::Dimension {
            expected: dim,
            got: v.len(),
        }));
    }
    if raw {
        natural_to_canonical(blocks, &mut v);
    }
    Ok(Element::new(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(123456.0), "123456");
        assert_eq!(format_g17(-1.0 / SQRT_2), "-0.70710678118654746");
        assert_eq!(format_g17(1e16), "10000000000000000");
        assert_eq!(format_g17(1e17), "1e+17");
    }

    #[test]
    fn g17_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, 6.02e23, -7.5e-7] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    const SAMPLE: &str = "format = facered-problem-1
name = demo
seed = 4
cone = psd:2 orthant:1
rows = 1
cols = 4
A = dense
1 0 2 3
b = 1
";

    #[test]
    fn dense_file_round_trips() {
        let p = ProblemFile::parse(SAMPLE, false).unwrap();
        assert_eq!(p.blocks, vec![BlockKind::SymMatrix(2), BlockKind::Orthant(1)]);
        assert_eq!(p.to_text(), SAMPLE);
    }

    #[test]
    fn raw_rows_are_scaled() {
        let p = ProblemFile::parse(SAMPLE, true).unwrap();
        assert_eq!(p.a[0], vec![1.0, 0.0, 2.0, 3.0]);
        let text = SAMPLE.replace("1 0 2 3", "1 1 2 3");
        let p = ProblemFile::parse(&text, true).unwrap();
        assert!((p.a[0][1] - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn errors_name_line_and_field() {
        let bad = SAMPLE.replace("1 0 2 3", "1 0 x 3");
        match ProblemFile::parse(&bad, false) {
            Err(CliError::Parse { line, field, .. }) => {
                assert_eq!(line, 8);
                assert_eq!(field, "A");
            }
            other => panic!("{other:?}"),
        }
        let bad = SAMPLE.replace("cols = 4", "cols = 5").replace("1 0 2 3", "1 0 2 3 4");
        assert!(matches!(
            ProblemFile::parse(&bad, false),
            Err(CliError::Parse { ref field, .. }) if field == "cols"
        ));
        let bad = SAMPLE.replace("psd:2", "cube:2");
        assert!(matches!(
            ProblemFile::parse(&bad, false),
            Err(CliError::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn points_must_match_the_dimension() {
        let blocks = [BlockKind::Orthant(2)];
        assert!(parse_point("1 2", &blocks, false).is_ok());
        assert!(matches!(
            parse_point("1 2 3", &blocks, false),
            Err(CliError::Core(facered::Error::Dimension { expected: 2, got: 3 }))
        ));
    }
}
