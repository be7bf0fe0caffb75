use std::path::{Path, PathBuf};

use interval_predictor::highway::{HighwayPrediction, TruthSample, COORDS};
use interval_predictor::io::svg::{render_svg, Band, Panel, MAX_TRUTH_CURVES};
use interval_predictor::io::traces::{
    traces_to_csv, traces_to_json, trajectory_records, TraceFormat, TraceRecord,
};
use interval_predictor::io::IoError;
use interval_predictor::{IntervalTrajectory, Method};

use crate::manifest::{blob_hash, OutputFile, RunManifest};
use crate::FormatArg;

/// Tubes of one predictor run, one entry per vehicle.
pub struct TraceSet {
    pub method: Method,
    pub vehicles: Vec<(String, Vec<&'static str>, IntervalTrajectory)>,
}

impl TraceSet {
    pub fn single(
        method: Method,
        id: &str,
        coords: &[&'static str],
        traj: IntervalTrajectory,
    ) -> Self {
        Self {
            method,
            vehicles: vec![(id.to_string(), coords.to_vec(), traj)],
        }
    }

    pub fn highway(p: &HighwayPrediction) -> Self {
        Self {
            method: p.method,
            vehicles: p
                .vehicles
                .iter()
                .map(|v| (v.id.clone(), COORDS.to_vec(), v.tube.clone()))
                .collect(),
        }
    }

    /// Records in vehicle, time, coordinate order. Truth values of the
    /// first `MAX_TRUTH_CURVES` samples are attached when given.
    fn records(&self, truth: &[TruthSample]) -> Vec<TraceRecord> {
        let shown = &truth[..truth.len().min(MAX_TRUTH_CURVES)];
        let mut out = Vec::new();
        for (i, (id, coords, traj)) in self.vehicles.iter().enumerate() {
            let mut recs = trajectory_records(traj, id, coords);
            if !shown.is_empty() {
                for (j, r) in recs.iter_mut().enumerate() {
                    let (k, c) = (j / coords.len(), j % coords.len());
                    r.truth = Some(
                        shown
                            .iter()
                            .filter_map(|s| s.states.get(k).map(|st| st[i].to_array()[c]))
                            .collect(),
                    );
                }
            }
            out.extend(recs);
        }
        out
    }
}

pub struct Outputs {
    dir: PathBuf,
    format: FormatArg,
}

fn write_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Write {
        path: path.to_path_buf(),
        source,
    }
}

impl Outputs {
    pub fn new(dir: &Path, format: FormatArg) -> Result<Self, IoError> {
        std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
        })
    }

    fn write(&self, name: &str, bytes: &[u8], manifest: &mut RunManifest) -> Result<(), IoError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| write_err(&path, e))?;
        manifest.outputs.push(OutputFile {
            path: name.to_string(),
            sha256: blob_hash(bytes),
        });
        Ok(())
    }

    fn trace_formats(&self) -> Vec<TraceFormat> {
        match self.format {
            FormatArg::Csv => vec![TraceFormat::Csv],
            FormatArg::Json => vec![TraceFormat::Json],
            FormatArg::Svg => vec![],
            FormatArg::All => vec![TraceFormat::Csv, TraceFormat::Json],
        }
    }

    /// Writes `traces_<method>.<ext>` per run and one `plot.svg` overlaying
    /// all runs.
    pub fn write_all(
        &self,
        sets: &[TraceSet],
        truth: &[TruthSample],
        manifest: &mut RunManifest,
    ) -> Result<(), IoError> {
        for set in sets {
            for format in self.trace_formats() {
                let text = match format {
                    TraceFormat::Csv => traces_to_csv(&set.records(&[])),
                    TraceFormat::Json => traces_to_json(&set.records(truth)),
                };
                let name = format!("traces_{}.{}", set.method.as_str(), format.extension());
                self.write(&name, text.as_bytes(), manifest)?;
            }
        }
        if matches!(self.format, FormatArg::Svg | FormatArg::All) {
            self.write(
                "plot.svg",
                render_svg(&panels(sets, truth)).as_bytes(),
                manifest,
            )?;
        }
        Ok(())
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), IoError> {
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, manifest.to_json()).map_err(|e| write_err(&path, e))
    }
}

fn panels(sets: &[TraceSet], truth: &[TruthSample]) -> Vec<Panel> {
    let Some(first) = sets.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, (id, coords, _)) in first.vehicles.iter().enumerate() {
        for (c, coord) in coords.iter().enumerate() {
            let bands = sets
                .iter()
                .map(|s| {
                    let traj = &s.vehicles[i].2;
                    Band {
                        label: s.method.as_str().to_string(),
                        times: traj.times.clone(),
                        lower: traj.states.iter().map(|x| x.lower()[c]).collect(),
                        upper: traj.states.iter().map(|x| x.upper()[c]).collect(),
                    }
                })
                .collect();
            let curves = truth
                .iter()
                .take(MAX_TRUTH_CURVES)
                .map(|s| {
                    let dt = first.vehicles[i].2.dt;
                    s.states
                        .iter()
                        .enumerate()
                        .map(|(k, st)| (k as f64 * dt, st[i].to_array()[c]))
                        .collect()
                })
                .collect();
            out.push(Panel {
                title: if coords.len() == 1 && first.vehicles.len() == 1 {
                    coord.to_string()
                } else {
                    format!("{id}: {coord}")
                },
                bands,
                truth: curves,
            });
        }
    }
    out
}
