//! Number formatting for CSV output and the plain-text problem format.
//!
//! A problem file is a sequence of whitespace-separated lines; blank lines
//! and `#` comments are ignored:
//!
//! ```text
//! saddle-problem 1
//! objective quadratic        # or: logistic
//! constraints inequality     # equality | inequality | two-sided
//! n 2
//! m 1
//! W                          # quadratic: n rows of n numbers
//! 2 0
//! 0 1
//! q                          # quadratic: linear term, one row of n
//! 0 0
//! A                          # m rows of n numbers
//! 1 1
//! b                          # equality/inequality: one row of m
//! 1
//! ```
//!
//! Two-sided constraints replace `b` with `lo` and `hi` rows. Logistic
//! objectives replace `W`/`q` with `data <rows>` followed by that many
//! feature rows, a `labels` row and `reg <value>`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{ConstrainedProblem, ConstraintSet, LogisticRidge, Objective, Quadratic};

/// C's `%.17g`: 17 significant digits, trailing zeros removed, exponent
/// form outside `1e-4 ≤ |x| < 1e17`.
pub fn fmt_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let decimals = (P - 1 - exp) as usize;
        strip_zeros(format!("{:.*}", decimals, x))
    } else {
        let mantissa = strip_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Joins values into one CSV row with [`fmt_g17`].
pub fn csv_row(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_g17(*v));
    }
    out
}

fn push_row<'a>(out: &mut String, values: impl IntoIterator<Item = &'a f64>) {
    let row: Vec<String> = values.into_iter().map(|v| fmt_g17(*v)).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

fn push_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    out.push_str(name);
    out.push('\n');
    for i in 0..m.nrows() {
        push_row(out, m.row(i).iter());
    }
}

fn push_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    out.push_str(name);
    out.push('\n');
    push_row(out, v.iter());
}

/// Renders a problem in the text format. Custom objectives cannot be
/// serialized.
pub fn problem_to_string(p: &ConstrainedProblem) -> Result<String> {
    let mut out = String::from("saddle-problem 1\n");
    let obj_name = match p.objective() {
        Objective::Quadratic(_) => "quadratic",
        Objective::Logistic(_) => "logistic",
        Objective::Custom(_) => {
            return Err(Error::Unsupported(
                "custom objectives cannot be written".into(),
            ))
        }
    };
    let _ = writeln!(out, "objective {obj_name}");
    let _ = writeln!(out, "constraints {}", p.kind());
    let _ = writeln!(out, "n {}\nm {}", p.n(), p.m());
    match p.objective() {
        Objective::Quadratic(q) => {
            push_matrix(&mut out, "W", q.matrix());
            push_vector(&mut out, "q", q.linear());
        }
        Objective::Logistic(l) => {
            push_matrix(
                &mut out,
                &format!("data {}", l.features().nrows()),
                l.features(),
            );
            push_vector(&mut out, "labels", l.labels());
            let _ = writeln!(out, "reg {}", fmt_g17(l.reg()));
        }
        Objective::Custom(_) => unreachable!(),
    }
    push_matrix(&mut out, "A", p.a());
    match p.constraints() {
        ConstraintSet::Equality { b, .. } | ConstraintSet::Inequality { b, .. } => {
            push_vector(&mut out, "b", b)
        }
        ConstraintSet::TwoSided { lo, hi, .. } => {
            push_vector(&mut out, "lo", lo);
            push_vector(&mut out, "hi", hi);
        }
    }
    Ok(out)
}

pub fn write_problem(p: &ConstrainedProblem, path: &Path) -> Result<()> {
    std::fs::write(path, problem_to_string(p)?)?;
    Ok(())
}

pub fn read_problem(path: &Path) -> Result<ConstrainedProblem> {
    parse_problem(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let inner = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                let toks: Vec<&str> = l.split_whitespace().collect();
                (!toks.is_empty()).then_some((i + 1, toks))
            })
            .collect();
        Lines { inner, pos: 0 }
    }

    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        let line = self.inner.get(self.pos).cloned().ok_or(Error::Parse {
            line: self.inner.last().map_or(0, |l| l.0),
            msg: "unexpected end of file".into(),
        })?;
        self.pos += 1;
        Ok(line)
    }

    fn keyword(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, toks) = self.next()?;
        if toks[0] != key {
            return Err(Error::Parse {
                line,
                msg: format!("expected `{key}`, found `{}`", toks[0]),
            });
        }
        Ok((line, toks))
    }

    fn value(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, toks) = self.keyword(key)?;
        if toks.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("`{key}` takes exactly one value"),
            });
        }
        Ok((line, toks[1]))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (line, v) = self.value(key)?;
        v.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("`{key}` must be a nonnegative integer"),
        })
    }

    fn row(&mut self, len: usize) -> Result<Vec<f64>> {
        let (line, toks) = self.next()?;
        if toks.len() != len {
            return Err(Error::Parse {
                line,
                msg: format!("expected {len} numbers, found {}", toks.len()),
            });
        }
        toks.iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid number `{t}`"),
                })
            })
            .collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.row(cols)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn vector(&mut self, key: &str, len: usize) -> Result<DVector<f64>> {
        self.keyword(key)?;
        Ok(DVector::from_vec(self.row(len)?))
    }
}

pub fn parse_problem(text: &str) -> Result<ConstrainedProblem> {
    let mut lines = Lines::new(text);
    let (line, version) = lines.value("saddle-problem")?;
    if version != "1" {
        return Err(Error::Parse {
            line,
            msg: format!("unsupported format version {version}"),
        });
    }
    let (obj_line, obj_kind) = lines.value("objective")?;
    let (cons_line, cons_kind) = lines.value("constraints")?;
    let n = lines.count("n")?;
    let m = lines.count("m")?;
    let objective: Objective = match obj_kind {
        "quadratic" => {
            lines.keyword("W")?;
            let w = lines.matrix(n, n)?;
            let q = lines.vector("q", n)?;
            Quadratic::new(w, q)?.into()
        }
        "logistic" => {
            let rows = lines.count("data")?;
            let d = lines.matrix(rows, n)?;
            let y = lines.vector("labels", rows)?;
            let (line, reg) = lines.value("reg")?;
            let reg = reg.parse().map_err(|_| Error::Parse {
                line,
                msg: "invalid regularization".into(),
            })?;
            LogisticRidge::new(d, y, reg)?.into()
        }
        other => {
            return Err(Error::Parse {
                line: obj_line,
                msg: format!("unknown objective `{other}`"),
            })
        }
    };
    lines.keyword("A")?;
    let a = lines.matrix(m, n)?;
    let constraints = match cons_kind {
        "equality" => ConstraintSet::Equality {
            a,
            b: lines.vector("b", m)?,
        },
        "inequality" => ConstraintSet::Inequality {
            a,
            b: lines.vector("b", m)?,
        },
        "two-sided" => {
            let lo = lines.vector("lo", m)?;
            let hi = lines.vector("hi", m)?;
            ConstraintSet::TwoSided { a, lo, hi }
        }
        other => {
            return Err(Error::Parse {
                line: cons_line,
                msg: format!("unknown constraint kind `{other}`"),
            })
        }
    };
    ConstrainedProblem::new(objective, constraints)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_c_printf() {
        // Reference strings produced by Python's `'%.17g' % x`.
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (1.0 / 3.0, "0.33333333333333331"),
            (1e-5, "1.0000000000000001e-05"),
            (123456789012345678.0, "1.2345678901234568e+17"),
            (1e16, "10000000000000000"),
            (0.0001, "0.0001"),
            (6.02e23, "6.02e+23"),
            (5e-324, "4.9406564584124654e-324"),
            (f64::MAX, "1.7976931348623157e+308"),
            (0.0, "0"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g17(x), want, "formatting {x:e}");
        }
        assert_eq!(fmt_g17(f64::NAN), "nan");
        assert_eq!(fmt_g17(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn g17_round_trips() {
        for x in [
            0.1,
            1.0 / 7.0,
            -3.25e-12,
            9.87654321e200,
            std::f64::consts::PI,
        ] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn parse_reports_line() {
        let text =
            "saddle-problem 1\nobjective quadratic\nconstraints equality\nn 1\nm 1\nW\n1 2\n";
        match parse_problem(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }
}
