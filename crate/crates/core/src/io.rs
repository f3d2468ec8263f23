//! Branch files, profile samples and bifurcation-diagram output.
//!
//! A branch file is plain text: `#`-prefixed `key=value` header lines, one
//! column-name line, then one comma-separated row per point. Floats are
//! written with Rust's shortest round-trip formatting, so reading a file back
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::bifurcation::BifurcationPoint;
use crate::continuation::{Branch, BranchPoint, Termination};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::SpectralField;

pub const BRANCH_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "# nlks-branch";
const FIXED_COLUMNS: [&str; 6] = ["eps", "arclength", "l2", "jac_min_sv", "det_sign", "zero_count"];

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

fn schema(line: usize, message: impl Into<String>) -> Error {
    Error::Schema { line, message: message.into() }
}

pub fn format_branch<T: Real>(branch: &Branch<T>) -> String {
    let modes = branch.points.first().map_or(0, |p| p.u.modes());
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "# version={BRANCH_FORMAT_VERSION}");
    let _ = writeln!(out, "# r={}", branch.r);
    let _ = writeln!(out, "# s={}", branch.s);
    match &branch.seed {
        Some(bp) => {
            let _ = writeln!(out, "# k={}", bp.k);
        }
        None => out.push_str("# k=none\n"),
    }
    let _ = writeln!(out, "# modes={modes}");
    let _ = writeln!(out, "# termination={}", branch.termination.as_str());
    let _ = writeln!(out, "# points={}", branch.points.len());
    out.push_str(&FIXED_COLUMNS.join(","));
    for k in 1..=modes {
        let _ = write!(out, ",a{k}");
    }
    out.push('\n');
    for p in &branch.points {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            p.eps, p.arclength, p.l2, p.jac_min_sv, p.det_sign, p.zero_count
        );
        for a in p.u.coeffs() {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
    }
    out
}

fn parse_num<V: std::str::FromStr>(line: usize, field: &str, text: &str) -> Result<V> {
    text.trim()
        .parse()
        .map_err(|_| schema(line, format!("cannot parse {field} from {text:?}")))
}

pub fn parse_branch<T: Real>(text: &str) -> Result<Branch<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim_end() == MAGIC => {}
        _ => return Err(schema(1, "missing branch file marker")),
    }
    let mut header = std::collections::HashMap::new();
    let mut columns = None;
    for (n, line) in lines.by_ref() {
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest
                .trim()
                .split_once('=')
                .ok_or_else(|| schema(n, "header line is not key=value"))?;
            header.insert(key.trim().to_string(), (n, value.trim().to_string()));
        } else {
            columns = Some((n, line));
            break;
        }
    }
    let get = |key: &str| header.get(key).ok_or_else(|| schema(0, format!("missing header field {key}")));

    let (_, version) = get("version")?;
    if version.parse::<u32>().ok() != Some(BRANCH_FORMAT_VERSION) {
        return Err(Error::Version { found: version.clone(), expected: BRANCH_FORMAT_VERSION });
    }
    let (ln, r) = get("r")?;
    let r: T = parse_num(*ln, "r", r)?;
    let (ln, s) = get("s")?;
    let s: T = parse_num(*ln, "s", s)?;
    let (ln, k) = get("k")?;
    let seed = if k == "none" {
        None
    } else {
        let k: usize = parse_num(*ln, "k", k)?;
        Some(BifurcationPoint::new(k, r, s).map_err(|e| schema(*ln, e.to_string()))?)
    };
    let (ln, modes) = get("modes")?;
    let modes: usize = parse_num(*ln, "modes", modes)?;
    let (ln, term) = get("termination")?;
    let termination = Termination::parse(term).ok_or_else(|| schema(*ln, format!("unknown termination {term:?}")))?;
    let (ln, count) = get("points")?;
    let count: usize = parse_num(*ln, "points", count)?;

    let (cn, columns) = columns.ok_or_else(|| schema(text.lines().count() + 1, "missing column line"))?;
    let expected_cols = FIXED_COLUMNS.len() + modes;
    let names: Vec<&str> = columns.split(',').collect();
    if names.len() != expected_cols || names[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(schema(cn, "unexpected column layout"));
    }

    let mut points = Vec::with_capacity(count);
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != expected_cols {
            return Err(schema(n, format!("expected {expected_cols} columns, found {}", cells.len())));
        }
        let coeffs = cells[FIXED_COLUMNS.len()..]
            .iter()
            .map(|c| parse_num::<T>(n, "coefficient", c))
            .collect::<Result<Vec<T>>>()?;
        let u = SpectralField::new(coeffs).map_err(|e| schema(n, e.to_string()))?;
        points.push(BranchPoint {
            eps: parse_num(n, "eps", cells[0])?,
            arclength: parse_num(n, "arclength", cells[1])?,
            l2: parse_num(n, "l2", cells[2])?,
            jac_min_sv: parse_num(n, "jac_min_sv", cells[3])?,
            det_sign: parse_num(n, "det_sign", cells[4])?,
            zero_count: parse_num(n, "zero_count", cells[5])?,
            u,
        });
    }
    if points.len() != count {
        return Err(schema(
            text.lines().count(),
            format!("header promises {count} points, found {}", points.len()),
        ));
    }
    Ok(Branch { r, s, seed, points, termination })
}

pub fn write_branch<T: Real>(branch: &Branch<T>, path: &Path) -> Result<()> {
    fs::write(path, format_branch(branch)).map_err(|e| io_err(path, e))
}

pub fn read_branch<T: Real>(path: &Path) -> Result<Branch<T>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_branch(&text)
}

/// `u` sampled at `n + 1` equispaced points covering `[−π, π]`, as `x,u`
/// lines.
pub fn format_profile<T: Real>(u: &SpectralField<T>, n: usize) -> String {
    let mut out = String::from("x,u\n");
    let two_pi = T::PI() + T::PI();
    for j in 0..=n {
        let x = -T::PI() + two_pi * T::from_index(j) / T::from_index(n);
        let _ = writeln!(out, "{x},{}", u.eval(x));
    }
    out
}

pub fn write_profile<T: Real>(u: &SpectralField<T>, n: usize, path: &Path) -> Result<()> {
    fs::write(path, format_profile(u, n)).map_err(|e| io_err(path, e))
}

fn branch_label<T: Real>(b: &Branch<T>) -> String {
    b.seed.as_ref().map_or_else(|| "trivial".to_string(), |bp| format!("C{}", bp.k))
}

/// `(ε, ‖u‖_{L²})` rows for every point of every branch.
pub fn format_diagram_csv<T: Real>(branches: &[Branch<T>]) -> String {
    let mut out = String::from("branch,index,eps,l2\n");
    for (i, b) in branches.iter().enumerate() {
        let label = format!("{}#{i}", branch_label(b));
        for (j, p) in b.points.iter().enumerate() {
            let _ = writeln!(out, "{label},{j},{},{}", p.eps, p.l2);
        }
    }
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Static SVG of `‖u‖_{L²}` against `ε`: one polyline per branch and a marker
/// at each `σ_k` on the ε-axis for the seeded branches.
pub fn format_diagram_svg<T: Real>(branches: &[Branch<T>]) -> String {
    let (w, h, margin) = (800.0, 500.0, 60.0);
    let pts: Vec<(f64, f64)> = branches
        .iter()
        .flat_map(|b| b.points.iter().map(|p| (p.eps.to_f64_lossy(), p.l2.to_f64_lossy())))
        .filter(|(e, l)| e.is_finite() && l.is_finite())
        .collect();
    let sigmas: Vec<(usize, f64)> = branches
        .iter()
        .filter_map(|b| b.seed.as_ref().map(|bp| (bp.k, bp.sigma.to_f64_lossy())))
        .collect();
    let x_max = pts.iter().map(|p| p.0).chain(sigmas.iter().map(|s| s.1)).fold(0.0, f64::max) * 1.05;
    let x_max = if x_max > 0.0 { x_max } else { 1.0 };
    let y_max = pts.iter().map(|p| p.1).fold(0.0, f64::max) * 1.05;
    let y_max = if y_max > 0.0 { y_max } else { 1.0 };
    let sx = |e: f64| margin + e / x_max * (w - 2.0 * margin);
    let sy = |l: f64| h - margin - l / y_max * (h - 2.0 * margin);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#,
        x0 = margin,
        y0 = h - margin,
        x1 = w - margin,
        y1 = margin
    );
    for i in 0..=5 {
        let e = x_max * i as f64 / 5.0;
        let l = y_max * i as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{e:.2}</text>"#,
            sx(e),
            h - margin + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{l:.2}</text>"#,
            margin - 6.0,
            sy(l) + 4.0
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">ε</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {:.1})">L² norm</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, b) in branches.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = b
            .points
            .iter()
            .map(|p| (p.eps.to_f64_lossy(), p.l2.to_f64_lossy()))
            .filter(|(e, l)| e.is_finite() && l.is_finite())
            .map(|(e, l)| format!("{:.2},{:.2}", sx(e), sy(l)))
            .collect();
        let label = branch_label(b);
        if coords.len() == 1 {
            let (x, y) = coords[0].split_once(',').expect("formatted pair");
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{colour}"><title>{label}</title></circle>"#);
        } else if !coords.is_empty() {
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"><title>{label}</title></polyline>"#,
                coords.join(" ")
            );
        }
    }
    let mut seen = Vec::new();
    for (k, sigma) in sigmas {
        if seen.contains(&k) {
            continue;
        }
        seen.push(k);
        let _ = writeln!(
            out,
            r#"<path d="M {x:.2} {y:.2} l -5 9 l 10 0 z" fill="black"><title>σ_{k}</title></path>"#,
            x = sx(sigma),
            y = h - margin
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `<out>.csv` and `<out>.svg` (any extension on `out` is replaced).
pub fn emit_diagram<T: Real>(branches: &[Branch<T>], out: &Path) -> Result<(PathBuf, PathBuf)> {
    if branches.is_empty() {
        return Err(Error::InvalidArgument("diagram needs at least one branch".into()));
    }
    let csv = out.with_extension("csv");
    let svg = out.with_extension("svg");
    fs::write(&csv, format_diagram_csv(branches)).map_err(|e| io_err(&csv, e))?;
    fs::write(&svg, format_diagram_svg(branches)).map_err(|e| io_err(&svg, e))?;
    Ok((csv, svg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_branch(coeffs: Vec<Vec<f64>>, k: Option<usize>) -> Branch<f64> {
        let points = coeffs
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let u = SpectralField::new(c).unwrap();
                BranchPoint {
                    eps: 1.0 - 0.01 * i as f64 - 1e-17,
                    arclength: 0.1 * i as f64 / 3.0,
                    l2: u.l2_norm(),
                    jac_min_sv: 1e-7 / 3.0,
                    det_sign: if i % 2 == 0 { 1 } else { -1 },
                    zero_count: 2,
                    u,
                }
            })
            .collect();
        Branch {
            r: 0.5,
            s: 1.5,
            seed: k.map(|k| BifurcationPoint::new(k, 0.5, 1.5).unwrap()),
            points,
            termination: Termination::InstabilityDetected,
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            coeffs in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 5), 0..6),
            k in prop::option::of(1usize..6),
        ) {
            let b = sample_branch(coeffs, k);
            let back: Branch<f64> = parse_branch(&format_branch(&b)).unwrap();
            prop_assert_eq!(&back, &b);
            for (p, q) in b.points.iter().zip(&back.points) {
                for (x, y) in p.u.coeffs().iter().zip(q.u.coeffs()) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }

    #[test]
    fn f32_round_trip() {
        let b64 = sample_branch(vec![vec![0.1, -0.3], vec![1.0 / 3.0, 2.5e-7]], Some(2));
        let text = format_branch(&b64);
        let b32: Branch<f32> = parse_branch(&text).unwrap();
        let again: Branch<f32> = parse_branch(&format_branch(&b32)).unwrap();
        assert_eq!(b32, again);
    }

    #[test]
    fn truncated_file_is_schema_error() {
        let text = format_branch(&sample_branch(vec![vec![0.1, 0.2]; 4], Some(1)));
        for cut in [5, text.len() / 3, text.len() / 2, text.len() - 20] {
            let err = parse_branch::<f64>(&text[..cut]).unwrap_err();
            assert!(matches!(err, Error::Schema { .. }), "cut {cut}: {err:?}");
        }
    }

    #[test]
    fn version_mismatch_is_reported() {
        let text = format_branch(&sample_branch(vec![vec![0.1]], None)).replace("version=1", "version=7");
        assert!(matches!(parse_branch::<f64>(&text), Err(Error::Version { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_branch::<f64>(Path::new("/nonexistent/branch.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn profile_is_odd() {
        let u = SpectralField::new(vec![0.3, -0.2, 0.05]).unwrap();
        let text = format_profile(&u, 64);
        let vals: Vec<(f64, f64)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let (x, v) = l.split_once(',').unwrap();
                (x.parse().unwrap(), v.parse().unwrap())
            })
            .collect();
        assert_eq!(vals.len(), 65);
        assert_eq!(vals[0].0, -std::f64::consts::PI);
        assert!((vals[64].0 - std::f64::consts::PI).abs() < 1e-15);
        for j in 0..=64 {
            assert!((vals[j].1 + vals[64 - j].1).abs() < 1e-10);
        }
    }

    #[test]
    fn diagram_outputs() {
        let dir = std::env::temp_dir().join(format!("nlks-diagram-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        assert!(emit_diagram::<f64>(&[], &dir.join("d")).is_err());

        let single = sample_branch(vec![vec![0.1, 0.0]], Some(1));
        let svg = format_diagram_svg(std::slice::from_ref(&single));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 0);

        let branches = vec![sample_branch(vec![vec![0.1, 0.0]; 3], Some(1)), sample_branch(vec![vec![0.0, 0.1]; 4], Some(2))];
        let (csv, svg) = emit_diagram(&branches, &dir.join("d.svg")).unwrap();
        let csv = fs::read_to_string(csv).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 + 4);
        let svg = fs::read_to_string(svg).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("σ_1") && svg.contains("σ_2"));
        fs::remove_dir_all(dir).unwrap();
    }
}
