//! Plain-text persistence: field CSVs with JSON sidecars, trajectory
//! directories, profiles with their fit report, and norm tables.

use crate::error::{Error, Result};
use crate::evolve::{Frame, StepRecord, Trajectory};
use crate::grid::{Field, Grid1D, TailModel};
use crate::selfsim::SelfSimilarProfile;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// 17 significant digits.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Tail as stored in a sidecar. `gamma` holds the slope for logarithmic tails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRecord {
    #[serde(default = "power_kind")]
    pub kind: String,
    #[serde(rename = "A_minus")]
    pub a_minus: f64,
    #[serde(rename = "A_plus")]
    pub a_plus: f64,
    pub gamma: f64,
    #[serde(rename = "R_t")]
    pub r_t: f64,
}

fn power_kind() -> String {
    "power".into()
}

impl From<TailModel> for TailRecord {
    fn from(t: TailModel) -> Self {
        match t {
            TailModel::Power { left, right, gamma, radius } => {
                TailRecord { kind: "power".into(), a_minus: left, a_plus: right, gamma, r_t: radius }
            }
            TailModel::Log { left, right, slope, radius } => {
                TailRecord { kind: "log".into(), a_minus: left, a_plus: right, gamma: slope, r_t: radius }
            }
        }
    }
}

impl TryFrom<TailRecord> for TailModel {
    type Error = Error;
    fn try_from(r: TailRecord) -> Result<Self> {
        match r.kind.as_str() {
            "power" => Ok(TailModel::Power { left: r.a_minus, right: r.a_plus, gamma: r.gamma, radius: r.r_t }),
            "log" => Ok(TailModel::Log { left: r.a_minus, right: r.a_plus, slope: r.gamma, radius: r.r_t }),
            other => Err(Error::Parse(format!("unknown tail kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    #[serde(rename = "L")]
    pub l: f64,
    pub n_points: usize,
    pub tail: Option<TailRecord>,
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn write_columns(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(headers).map_err(|e| Error::Io(e.to_string()))?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| fmt(c[i]))).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn read_columns(path: &Path, headers: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let found: Vec<String> = r.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(str::to_string).collect();
    if found != headers {
        return Err(Error::Parse(format!("{}: header {found:?}, expected {headers:?}", path.display())));
    }
    let mut cols = vec![vec![]; headers.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        for (c, v) in cols.iter_mut().zip(rec.iter()) {
            c.push(v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{v:?}: {e}")))?);
        }
    }
    Ok(cols)
}

/// Writes `x,value` to `path` and the sidecar next to it (`.json`).
pub fn write_field(f: &Field, path: &Path) -> Result<()> {
    write_columns(path, &["x", "value"], &[&f.grid.nodes(), &f.values])?;
    let side = FieldSidecar { l: f.grid.half_width(), n_points: f.grid.len(), tail: f.tail.map(TailRecord::from) };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

/// Reads a field written by [`write_field`]. Values may be signed.
pub fn read_field(path: &Path) -> Result<Field> {
    let side: FieldSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let cols = read_columns(path, &["x", "value"])?;
    let grid = Grid1D::new(side.l, side.n_points)?;
    if cols[1].len() != grid.len() {
        return Err(Error::Parse(format!("{} rows for {} points", cols[1].len(), grid.len())));
    }
    let tail = side.tail.map(TailModel::try_from).transpose()?;
    Field::signed(grid, cols[1].clone(), tail)
}

/// Reads a two-column `x,value` table with no sidecar onto `grid`, by linear
/// interpolation; points outside the table's range get zero.
pub fn read_custom_csv(path: &Path, grid: Grid1D) -> Result<Field> {
    let cols = read_columns(path, &["x", "value"])?;
    let (xs, vs) = (&cols[0], &cols[1]);
    if xs.len() < 2 || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parse("custom data needs at least two rows with increasing x".into()));
    }
    let values = grid
        .nodes()
        .iter()
        .map(|x| {
            if *x < xs[0] || *x > xs[xs.len() - 1] {
                return 0.0;
            }
            let j = xs.partition_point(|p| p <= x).clamp(1, xs.len() - 1);
            let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
            (1.0 - w) * vs[j - 1] + w * vs[j]
        })
        .collect();
    Field::new(grid, values, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub eps: f64,
    pub s: f64,
    pub n: f64,
    pub frame: Frame,
    pub times: Vec<f64>,
    pub files: Vec<String>,
    pub records: Vec<StepRecord>,
}

/// `dir/t_<index>.csv` (with sidecars) and `dir/trajectory.json`.
pub fn write_trajectory(traj: &Trajectory, s: f64, n: f64, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files = vec![];
    for (k, f) in traj.states.iter().enumerate() {
        let name = format!("t_{k}.csv");
        write_field(f, &dir.join(&name))?;
        files.push(name);
    }
    let manifest = TrajectoryManifest {
        eps: traj.eps,
        s,
        n,
        frame: traj.frame,
        times: traj.times.clone(),
        files,
        records: traj.records.clone(),
    };
    fs::write(dir.join("trajectory.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_trajectory(dir: &Path) -> Result<(Trajectory, TrajectoryManifest)> {
    let m: TrajectoryManifest = serde_json::from_str(&fs::read_to_string(dir.join("trajectory.json"))?)?;
    if m.files.len() != m.times.len() {
        return Err(Error::Parse("manifest lists a different number of files and times".into()));
    }
    let states = m.files.iter().map(|f| read_field(&dir.join(f))).collect::<Result<Vec<_>>>()?;
    let traj = Trajectory { times: m.times.clone(), states, eps: m.eps, frame: m.frame, records: m.records.clone() };
    Ok((traj, m))
}

/// Contents of `fit.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub alpha: f64,
    pub gamma_tail: f64,
    pub gamma_fit: f64,
    pub c_inf_fit: f64,
    /// `C(n,s)` of the very singular solution.
    #[serde(rename = "C_vss")]
    pub c_vss: f64,
    /// `gamma_fit/gamma_tail` and `c_inf_fit/C_vss`.
    pub ratios: FitRatios,
    pub mass: f64,
    pub profile_residual: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRatios {
    pub gamma: f64,
    pub c_inf: f64,
}

impl FitReport {
    pub fn new(profile: &SelfSimilarProfile, alpha: f64, gamma_tail: f64, c_vss: f64, residual: Option<f64>) -> Self {
        let fit = profile.fit;
        FitReport {
            alpha,
            gamma_tail,
            gamma_fit: fit.gamma_fit,
            c_inf_fit: fit.c_inf,
            c_vss,
            ratios: FitRatios { gamma: fit.gamma_fit / gamma_tail, c_inf: fit.c_inf / c_vss },
            mass: profile.mass,
            profile_residual: residual,
        }
    }
}

/// `profile.csv` (`xi,F`) plus its sidecar, and `fit.json`, in `dir`.
pub fn write_profile(profile: &SelfSimilarProfile, report: &FitReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join("profile.csv");
    write_columns(&path, &["xi", "F"], &[&profile.xi(), profile.values()])?;
    let f = &profile.field;
    let side = FieldSidecar { l: f.grid.half_width(), n_points: f.grid.len(), tail: f.tail.map(TailRecord::from) };
    fs::write(sidecar_path(&path), serde_json::to_string_pretty(&side)?)?;
    fs::write(dir.join("fit.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn read_profile(dir: &Path, gamma_tail: f64) -> Result<(SelfSimilarProfile, FitReport)> {
    let path = dir.join("profile.csv");
    let side: FieldSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(&path))?)?;
    let cols = read_columns(&path, &["xi", "F"])?;
    let grid = Grid1D::new(side.l, side.n_points)?;
    let tail = side.tail.map(TailModel::try_from).transpose()?;
    let profile = SelfSimilarProfile::from_field(Field::new(grid, cols[1].clone(), tail)?, gamma_tail)?;
    let report = serde_json::from_str(&fs::read_to_string(dir.join("fit.json"))?)?;
    Ok((profile, report))
}

/// A table with a leading `t` column, for norm-versus-time series.
pub fn write_series(path: &Path, times: &[f64], columns: &[(&str, &[f64])]) -> Result<()> {
    let mut headers = vec!["t"];
    headers.extend(columns.iter().map(|c| c.0));
    let mut cols: Vec<&[f64]> = vec![times];
    cols.extend(columns.iter().map(|c| c.1));
    if cols.iter().any(|c| c.len() != times.len()) {
        return Err(Error::OutOfRange("series columns differ in length".into()));
    }
    write_columns(path, &headers, &cols)
}

pub fn read_series(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut headers = vec!["t"];
    headers.extend_from_slice(names);
    read_columns(path, &headers)
}
