//! File formats: `x,y` input tables, persisted draws and summary tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written value parses back to the identical `f64`.

use std::fmt::Write as _;
use std::io::Read;

use sha2::{Digest, Sha256};

use crate::chain::ChainDraws;
use crate::data::{Dataset, Rescaling};
use crate::diagnostics::{trace, PosteriorSummary};
use crate::error::{Error, Result};

const DRAWS_MAGIC: &str = "# nlfs-draws v1";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Read a two-column table with header `x,y`. Blank lines are skipped.
pub fn read_xy_csv<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_err(1, "empty input; expected a header line `x,y`")),
        Some(r) => r.map_err(|e| csv_err(&e))?,
    };
    let cols: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if cols != ["x", "y"] {
        return Err(parse_err(
            1,
            format!("expected header `x,y`, found `{}`", cols.join(",")),
        ));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for rec in records {
        let rec = rec.map_err(|e| csv_err(&e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| parse_err(line, format!("{name} value `{}` is not a number", &rec[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("{name} value `{}` is not finite", &rec[i])))
            }
        };
        x.push(field(0, "x")?);
        y.push(field(1, "y")?);
    }
    if x.is_empty() {
        return Err(parse_err(2, "no data rows after the header"));
    }
    Ok((x, y))
}

fn csv_err(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(line, e.to_string())
}

/// Read a dataset and map its covariates onto `[0, 1]`.
pub fn read_dataset<R: Read>(reader: R) -> Result<(Dataset, Rescaling)> {
    let (x, y) = read_xy_csv(reader)?;
    let rescaling = Rescaling::fit(&x)?;
    let x = x.iter().map(|&v| rescaling.forward(v)).collect();
    Ok((Dataset::new(x, y)?, rescaling))
}

/// A persisted chain together with the covariate rescaling it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawsFile {
    pub draws: ChainDraws,
    pub rescaling: Rescaling,
}

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v}").expect("writing to a String");
    }
    s
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        write!(s, "{b:02x}").expect("writing to a String");
        s
    })
}

/// Serialize draws as a delimited table preceded by `#` metadata lines. The
/// `sha256` line covers every byte after it.
pub fn write_draws(file: &DrawsFile) -> String {
    let d = &file.draws;
    let mut body = String::new();
    let acc: Vec<String> = d.acceptance.iter().map(|(n, r)| format!("{n}={r}")).collect();
    let _ = writeln!(body, "# method: {}", d.method);
    let _ = writeln!(body, "# burn_in: {}", d.burn_in);
    let _ = writeln!(body, "# rescale_offset: {}", file.rescaling.offset);
    let _ = writeln!(body, "# rescale_scale: {}", file.rescaling.scale);
    let _ = writeln!(body, "# acceptance: {}", acc.join(";"));
    let _ = writeln!(body, "# numerical_rejections: {}", d.numerical_rejections);
    let _ = writeln!(body, "# grid: {}", join(&d.grid));
    let _ = writeln!(body, "# fitted_mean: {}", join(&d.fitted_mean));
    let mut header = vec!["iteration".to_string()];
    header.extend(d.names.iter().cloned());
    header.extend((0..d.grid.len()).map(|j| format!("f_{j}")));
    let _ = writeln!(body, "{}", header.join(","));
    for (i, (row, curve)) in d.params.iter().zip(&d.curves).enumerate() {
        let _ = write!(body, "{}", d.burn_in + i + 1);
        for v in row.iter().chain(curve) {
            let _ = write!(body, ",{v}");
        }
        body.push('\n');
    }
    let digest = hex(&Sha256::digest(body.as_bytes()));
    format!("{DRAWS_MAGIC}\n# sha256: {digest}\n{body}")
}

fn meta<'a>(lines: &[(usize, &'a str)], key: &str) -> Result<(usize, &'a str)> {
    let prefix = format!("# {key}:");
    lines
        .iter()
        .find_map(|&(no, l)| l.strip_prefix(&prefix).map(|v| (no, v.trim())))
        .ok_or_else(|| parse_err(0, format!("missing metadata line `{prefix}`")))
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{s}`")))
}

fn parse_list(line: usize, s: &str, what: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|v| parse_num(line, v, what)).collect()
}

/// Parse a draws file written by [`write_draws`], verifying its checksum.
pub fn read_draws(text: &str) -> Result<DrawsFile> {
    let mut it = text.splitn(3, '\n');
    if it.next().map(str::trim_end) != Some(DRAWS_MAGIC) {
        return Err(parse_err(1, "not a draws file (missing format line)"));
    }
    let sum_line = it.next().unwrap_or("");
    let expected = sum_line
        .strip_prefix("# sha256: ")
        .ok_or_else(|| parse_err(2, "missing checksum line"))?
        .trim();
    let body = it.next().unwrap_or("");
    let actual = hex(&Sha256::digest(body.as_bytes()));
    if actual != expected {
        return Err(parse_err(2, "checksum mismatch: the draws file is corrupted"));
    }

    let lines: Vec<(usize, &str)> = body.lines().enumerate().map(|(i, l)| (i + 3, l)).collect();
    let comments: Vec<(usize, &str)> = lines.iter().copied().filter(|(_, l)| l.starts_with('#')).collect();
    let mut data = lines
        .iter()
        .copied()
        .filter(|(_, l)| !l.starts_with('#') && !l.is_empty());

    let method = meta(&comments, "method")?.1.to_string();
    let (l, v) = meta(&comments, "burn_in")?;
    let burn_in: usize = parse_num(l, v, "burn-in")?;
    let (l, v) = meta(&comments, "rescale_offset")?;
    let offset: f64 = parse_num(l, v, "rescaling offset")?;
    let (l, v) = meta(&comments, "rescale_scale")?;
    let scale: f64 = parse_num(l, v, "rescaling scale")?;
    let (l, v) = meta(&comments, "acceptance")?;
    let acceptance = v
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, r) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(l, format!("invalid acceptance entry `{kv}`")))?;
            Ok((k.to_string(), parse_num(l, r, "acceptance rate")?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (l, v) = meta(&comments, "numerical_rejections")?;
    let numerical_rejections: usize = parse_num(l, v, "rejection count")?;
    let (l, v) = meta(&comments, "grid")?;
    let grid = parse_list(l, v, "grid value")?;
    let (l, v) = meta(&comments, "fitted_mean")?;
    let fitted_mean = parse_list(l, v, "fitted value")?;

    let (hl, header) = data.next().ok_or_else(|| parse_err(0, "missing column header"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let g = grid.len();
    if cols.first() != Some(&"iteration") || cols.len() < 1 + g {
        return Err(parse_err(
            hl,
            "column header must start with `iteration` and end with the curve columns",
        ));
    }
    let p = cols.len() - 1 - g;
    let names: Vec<String> = cols[1..=p].iter().map(|s| s.to_string()).collect();
    let (mut params, mut curves) = (Vec::new(), Vec::new());
    for (expect_it, (no, line)) in (burn_in + 1..).zip(data) {
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != cols.len() {
            return Err(parse_err(
                no,
                format!("expected {} fields, found {}", cols.len(), vals.len()),
            ));
        }
        let iteration: usize = parse_num(no, vals[0], "iteration")?;
        if iteration != expect_it {
            return Err(parse_err(
                no,
                format!("expected iteration {expect_it}, found {iteration}"),
            ));
        }
        let nums = vals[1..]
            .iter()
            .map(|s| parse_num(no, s, "value"))
            .collect::<Result<Vec<f64>>>()?;
        params.push(nums[..p].to_vec());
        curves.push(nums[p..].to_vec());
    }
    Ok(DrawsFile {
        draws: ChainDraws {
            method,
            names,
            params,
            grid,
            curves,
            burn_in,
            fitted_mean,
            acceptance,
            numerical_rejections,
        },
        rescaling: Rescaling { offset, scale },
    })
}

/// `x,mean,lower,upper` with `x` mapped back to the original covariate scale.
pub fn curve_table(summary: &PosteriorSummary, rescaling: &Rescaling) -> String {
    let mut s = String::from("x,mean,lower,upper\n");
    for j in 0..summary.grid.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            rescaling.inverse(summary.grid[j]),
            summary.mean[j],
            summary.lower[j],
            summary.upper[j]
        );
    }
    s
}

/// One row per parameter. The acceptance column is filled for parameters
/// updated by Metropolis steps.
pub fn params_table(summary: &PosteriorSummary) -> String {
    let mut s = String::from("name,mean,sd,lower,median,upper,ess,degenerate,acceptance\n");
    for p in &summary.params {
        let acc = summary
            .acceptance
            .iter()
            .find(|(n, _)| *n == p.name)
            .map_or(String::new(), |(_, r)| r.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            p.name, p.mean, p.sd, p.lower, p.median, p.upper, p.ess, p.degenerate, acc
        );
    }
    for (name, rate) in &summary.acceptance {
        if summary.param(name).is_none() {
            let _ = writeln!(s, "{name},,,,,,,,{rate}");
        }
    }
    s
}

/// `iteration,value` rows of one monitored quantity.
pub fn trace_table(draws: &ChainDraws, name: &str) -> Result<String> {
    let mut s = String::from("iteration,value\n");
    for (it, v) in trace(draws, name)? {
        let _ = writeln!(s, "{it},{v}");
    }
    Ok(s)
}

/// Names worth a trace file: everything except the spline coefficients.
pub fn monitored(draws: &ChainDraws) -> Vec<&str> {
    draws
        .names
        .iter()
        .map(String::as_str)
        .filter(|n| !n.starts_with("beta_"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::summarize;

    fn toy() -> DrawsFile {
        DrawsFile {
            draws: ChainDraws {
                method: "nlfs(hill),os".into(),
                names: vec!["theta1".into(), "omega".into()],
                params: vec![vec![0.1, 0.9], vec![0.1 + 0.2, 1.0 / 3.0], vec![-1e-300, 0.5]],
                grid: vec![0.0, 0.5, 1.0],
                curves: vec![vec![1.0, 2.0, 3.0], vec![0.7, 0.1 + 0.2, 2.0], vec![1.5, 2.5, 3.5]],
                burn_in: 10,
                fitted_mean: vec![0.25, std::f64::consts::PI],
                acceptance: vec![("theta3_hill".into(), 0.31)],
                numerical_rejections: 2,
            },
            rescaling: Rescaling {
                offset: 1.5,
                scale: 3.0,
            },
        }
    }

    #[test]
    fn draws_round_trip_bit_for_bit() {
        let f = toy();
        let text = write_draws(&f);
        let back = read_draws(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(write_draws(&back), text);
    }

    #[test]
    fn corrupted_draws_are_rejected() {
        let text = write_draws(&toy());
        let bad = text.replacen("0.9", "0.8", 1);
        assert!(matches!(read_draws(&bad), Err(Error::Parse { .. })));
        assert!(read_draws("x,y\n1,2\n").is_err());
    }

    #[test]
    fn xy_parsing_reports_line_numbers() {
        let (x, y) = read_xy_csv("x,y\n0.1,1\n\n0.2, 2.5\n".as_bytes()).unwrap();
        assert_eq!(x, vec![0.1, 0.2]);
        assert_eq!(y, vec![1.0, 2.5]);
        match read_xy_csv("x,y\n0.1,1\n0.2,abc\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match read_xy_csv("x,y\n0.1,1,7\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_xy_csv("".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            read_xy_csv("a,b\n1,2\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(read_xy_csv("x,y\n".as_bytes()).is_err());
    }

    #[test]
    fn dataset_is_rescaled_to_unit_interval() {
        let (d, r) = read_dataset("x,y\n2,0\n4,1\n6,2\n".as_bytes()).unwrap();
        assert_eq!(d.x, vec![0.0, 0.5, 1.0]);
        assert_eq!(r.inverse(0.5), 4.0);
    }

    #[test]
    fn tables_have_expected_shape() {
        let f = toy();
        let s = summarize(&f.draws, 0.9).unwrap();
        let curve = curve_table(&s, &f.rescaling);
        assert_eq!(curve.lines().count(), 4);
        assert!(curve.lines().nth(1).unwrap().starts_with("1.5,"));
        let params = params_table(&s);
        assert!(params.contains("\ntheta3_hill,,,,,,,,0.31\n"));
        let tr = trace_table(&f.draws, "omega").unwrap();
        assert_eq!(tr, "iteration,value\n11,0.9\n12,0.3333333333333333\n13,0.5\n");
        assert_eq!(monitored(&f.draws), vec!["theta1", "omega"]);
    }
}
