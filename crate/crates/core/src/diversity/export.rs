use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::pca::PcaResult;
use super::DiversityError;
use crate::svg::{Frame, Svg, PALETTE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub subject: String,
    pub family: String,
    pub x: f64,
    pub y: f64,
}

fn family_label(r: &PcaResult, j: usize) -> String {
    r.families[j].clone().unwrap_or_else(|| r.subjects[j].clone())
}

/// Scores of every subject on 1-based components `a` and `b`.
pub fn scatter_points(r: &PcaResult, a: usize, b: usize) -> Result<Vec<ScatterPoint>, DiversityError> {
    let k = r.loadings.len();
    for c in [a, b] {
        if c == 0 || c > k {
            return Err(DiversityError::UnknownComponent { component: c, available: k });
        }
    }
    Ok((0..r.subjects.len())
        .map(|j| ScatterPoint {
            subject: r.subjects[j].clone(),
            family: family_label(r, j),
            x: r.scores[j][a - 1],
            y: r.scores[j][b - 1],
        })
        .collect())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DiversityError + '_ {
    move |source| DiversityError::Csv { path: path.to_owned(), source }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), DiversityError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| DiversityError::Io { path: path.to_owned(), source })
}

/// Writes `scores.csv`, `variance.csv` and `loadings.csv` under `out`.
pub fn write_tables(r: &PcaResult, out: &Path) -> Result<Vec<PathBuf>, DiversityError> {
    fs::create_dir_all(out).map_err(|source| DiversityError::Io { path: out.to_owned(), source })?;
    let k = r.loadings.len();
    let pcs: Vec<String> = (1..=k).map(|c| format!("PC{c}")).collect();

    let scores = out.join("scores.csv");
    let mut header = vec!["subject".to_owned(), "family".to_owned()];
    header.extend(pcs.iter().cloned());
    let rows: Vec<Vec<String>> = (0..r.subjects.len())
        .map(|j| {
            let mut row = vec![r.subjects[j].clone(), family_label(r, j)];
            row.extend(r.scores[j].iter().map(f64::to_string));
            row
        })
        .collect();
    write_rows(&scores, &header, &rows)?;

    let variance = out.join("variance.csv");
    let mut cumulative = 0.0;
    let rows: Vec<Vec<String>> = (0..k)
        .map(|c| {
            cumulative += r.explained_variance_ratio[c];
            vec![
                pcs[c].clone(),
                r.eigenvalues[c].to_string(),
                r.explained_variance_ratio[c].to_string(),
                cumulative.to_string(),
            ]
        })
        .collect();
    let header = ["component", "eigenvalue", "explained_variance_ratio", "cumulative"].map(String::from);
    write_rows(&variance, &header, &rows)?;

    let loadings = out.join("loadings.csv");
    let mut header = vec!["category".to_owned()];
    header.extend(pcs.iter().cloned());
    let rows: Vec<Vec<String>> = r
        .categories
        .iter()
        .enumerate()
        .map(|(i, cat)| {
            let mut row = vec![cat.clone()];
            row.extend(r.loadings.iter().map(|l| l[i].to_string()));
            row
        })
        .collect();
    write_rows(&loadings, &header, &rows)?;
    Ok(vec![scores, variance, loadings])
}

/// Writes `scatter_PCa_PCb.csv` and `scatter_PCa_PCb.svg` for each
/// 1-based component pair. All pairs are validated before any file is
/// written.
pub fn scatter_export(r: &PcaResult, pairs: &[(usize, usize)], out: &Path) -> Result<Vec<PathBuf>, DiversityError> {
    let data =
        pairs.iter().map(|&(a, b)| scatter_points(r, a, b).map(|pts| (a, b, pts))).collect::<Result<Vec<_>, _>>()?;
    if data.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(out).map_err(|source| DiversityError::Io { path: out.to_owned(), source })?;
    let mut files = Vec::new();
    for (a, b, pts) in data {
        let stem = format!("scatter_PC{a}_PC{b}");
        let csv_path = out.join(format!("{stem}.csv"));
        let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err(&csv_path))?;
        for p in &pts {
            w.serialize(p).map_err(csv_err(&csv_path))?;
        }
        w.flush().map_err(|source| DiversityError::Io { path: csv_path.clone(), source })?;
        files.push(csv_path);

        let svg_path = out.join(format!("{stem}.svg"));
        let label = |c: usize| format!("PC{c} ({:.1}%)", 100.0 * r.explained_variance_ratio[c - 1]);
        fs::write(&svg_path, scatter_svg(&pts, &label(a), &label(b)))
            .map_err(|source| DiversityError::Io { path: svg_path.clone(), source })?;
        files.push(svg_path);
    }
    Ok(files)
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let pad = ((hi - lo) * 0.08).max(0.5);
    (lo - pad, hi + pad)
}

fn scatter_svg(pts: &[ScatterPoint], x_label: &str, y_label: &str) -> String {
    let frame = Frame {
        left: 60.0,
        top: 20.0,
        width: 420.0,
        height: 320.0,
        x_range: padded_range(pts.iter().map(|p| p.x)),
        y_range: padded_range(pts.iter().map(|p| p.y)),
    };
    let mut families: Vec<&str> = pts.iter().map(|p| p.family.as_str()).collect();
    families.sort_unstable();
    families.dedup();
    let mut svg = Svg::new(640, 390);
    svg.axes(&frame, 4, x_label, y_label);
    for p in pts {
        let idx = families.binary_search(&p.family.as_str()).unwrap_or(0);
        let color = PALETTE[idx % PALETTE.len()];
        svg.circle((frame.x(p.x), frame.y(p.y)), 4.0, color, &p.subject);
    }
    for (i, fam) in families.iter().enumerate() {
        let y = frame.top + 10.0 + 16.0 * i as f64;
        let x = frame.left + frame.width + 16.0;
        svg.circle((x, y - 4.0), 4.0, PALETTE[i % PALETTE.len()], fam);
        svg.text((x + 10.0, y), 11, "start", fam);
    }
    svg.finish()
}
