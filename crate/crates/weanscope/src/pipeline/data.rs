//! Signal stages: synthetic cohort, cleaning, resampling sweep, CWT and
//! image rendering.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use weanscope_core::cwt::{
    cwt_transform, psd_map, ridge_frequency, select_wavelet, MotherWavelet, PsdMap, VariablePsds,
};
use weanscope_core::imaging::{render_plane, resize_bilinear, stack_tensor, Plane, RenderOptions};
use weanscope_core::resample::{aggregate_sweeps, resample_uniform, sweep_select, Method, SweepResult};
use weanscope_core::series::{clean as clean_series, ClassLabel, IrregularSeries, VariableId};
use weanscope_core::synth::{generate_patient, patient_labels};

use super::{Ctx, Stage, StageDir};
use crate::error::{PipelineError, Result};
use crate::io::series::{read_series_dir, series_file_name, write_series, write_uniform, Manifest, PatientEntry, MANIFEST};
use crate::io::tables::{write_csv, write_psd_csv, write_sweep_dispersion, write_sweep_table, write_wavelet_selection};
use crate::io::tensor::{read_psd, write_psd, write_tensor, PsdHeader};
use crate::io::{self, image};

fn with_context(what: String) -> impl Fn(weanscope_core::Error) -> PipelineError {
    move |e| PipelineError::format(what.clone(), e)
}

pub(super) fn synth(ctx: &Ctx) -> Result<PathBuf> {
    let dir = StageDir::begin(ctx, Stage::Synth)?;
    let mut spec = ctx.cfg.synth.clone();
    spec.seed = ctx.cfg.seed;
    let labels = patient_labels(&spec);
    let patients = labels
        .par_iter()
        .enumerate()
        .map(|(i, &l)| generate_patient(&spec, i, l))
        .collect::<weanscope_core::Result<Vec<_>>>()?;
    let mut injections = BTreeMap::new();
    for p in &patients {
        for (s, inj) in p.series.iter().zip(&p.injections) {
            write_series(&dir.path(series_file_name(&p.id, s.variable)), s)?;
            injections.insert(format!("{}__{}", p.id, s.variable), inj.clone());
        }
    }
    let manifest = Manifest {
        patients: patients
            .iter()
            .map(|p| PatientEntry {
                id: p.id.clone(),
                label: p.label,
            })
            .collect(),
        spec: Some(spec),
    };
    io::write_json(&dir.path(MANIFEST), &manifest)?;
    io::write_json(&dir.path("injections.json"), &injections)?;
    dir.commit(ctx)
}

fn read_cohort(dir: &std::path::Path) -> Result<(Manifest, BTreeMap<String, Vec<IrregularSeries>>)> {
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(PipelineError::MissingUpstreamArtifact(manifest_path));
    }
    let manifest: Manifest = io::read_json(&manifest_path)?;
    let series = read_series_dir(dir, &manifest)?;
    Ok((manifest, series))
}

pub(super) fn clean(ctx: &Ctx) -> Result<PathBuf> {
    let input = ctx.input()?;
    let (manifest, cohort) = read_cohort(&input)?;
    let dir = StageDir::begin(ctx, Stage::Clean)?;
    let jobs: Vec<&IrregularSeries> = cohort.values().flatten().collect();
    let cleaned = jobs
        .par_iter()
        .map(|s| {
            clean_series(s, &ctx.cfg.cleaning)
                .map_err(with_context(format!("{}/{}", s.patient_id, series_file_name(&s.patient_id, s.variable))))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = Vec::new();
    for (s, (c, report)) in jobs.iter().zip(&cleaned) {
        let name = series_file_name(&s.patient_id, s.variable);
        write_series(&dir.path(PathBuf::from("series").join(&name)), c)?;
        io::write_json(&dir.path(PathBuf::from("reports").join(name.replace(".csv", ".json"))), report)?;
        summary.push(vec![
            s.patient_id.clone(),
            s.variable.to_string(),
            s.len().to_string(),
            report.n_outliers_replaced.to_string(),
            report.segments_found.len().to_string(),
            c.t_first().to_string(),
            c.t_last().to_string(),
            c.len().to_string(),
        ]);
    }
    write_csv(
        &dir.path("summary.csv"),
        &[
            "patient_id",
            "variable",
            "n_raw",
            "n_outliers_replaced",
            "segments_found",
            "segment_start_s",
            "segment_end_s",
            "n_clean",
        ],
        summary,
    )?;
    io::write_json(&dir.path(PathBuf::from("series").join(MANIFEST)), &manifest)?;
    dir.commit(ctx)
}

/// Chosen resampling per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleChoice {
    pub variable: VariableId,
    pub method: Method,
    pub fs_hz: f64,
    pub mean_correlation: f64,
}

pub(super) fn sweep(ctx: &Ctx) -> Result<PathBuf> {
    let clean_dir = ctx.upstream(Stage::Clean)?;
    let (_, cohort) = read_cohort(&clean_dir.join("series"))?;
    let dir = StageDir::begin(ctx, Stage::Sweep)?;
    let jobs: Vec<&IrregularSeries> = cohort.values().flatten().collect();
    let tables = jobs
        .par_iter()
        .map(|s| {
            sweep_select(s, &ctx.cfg.sweep)
                .map(|r| r.table)
                .map_err(with_context(format!("sweep {}/{}", s.patient_id, s.variable)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut choices = Vec::new();
    for v in VariableId::ALL {
        let per_patient: Vec<_> = jobs
            .iter()
            .zip(&tables)
            .filter(|(s, _)| s.variable == v)
            .map(|(_, t)| t.clone())
            .collect();
        let agg: SweepResult = aggregate_sweeps(&per_patient)?;
        write_sweep_table(&dir.path(format!("{v}.csv")), &agg)?;
        write_sweep_dispersion(&dir.path(format!("{v}_dispersion.csv")), &agg)?;
        choices.push(ResampleChoice {
            variable: v,
            method: agg.best_method,
            fs_hz: agg.best_fs,
            mean_correlation: agg.best_correlation,
        });
    }
    write_csv(
        &dir.path("selection.csv"),
        &["variable", "method", "fs_hz", "mean_correlation"],
        choices.iter().map(|c| {
            vec![
                c.variable.to_string(),
                c.method.as_str().to_string(),
                c.fs_hz.to_string(),
                c.mean_correlation.to_string(),
            ]
        }),
    )?;
    io::write_json(&dir.path("selection.json"), &choices)?;
    dir.commit(ctx)
}

struct SeriesPsd {
    patient: String,
    label: Option<ClassLabel>,
    variable: VariableId,
    fs: f64,
    /// One per candidate wavelet: full map, row frequencies, ridge.
    per_wavelet: Vec<(PsdMap, Vec<f64>, f64)>,
}

fn shrink(map: &PsdMap, side: usize) -> PsdMap {
    let plane = Plane {
        h: map.rows,
        w: map.cols,
        data: map.power.clone(),
    };
    let r = resize_bilinear(&plane, side, side);
    PsdMap {
        rows: side,
        cols: side,
        power: r.data.into_iter().map(|v| v.max(0.0)).collect(),
    }
}

pub(super) fn cwt(ctx: &Ctx) -> Result<PathBuf> {
    let clean_dir = ctx.upstream(Stage::Clean)?;
    let sweep_dir = ctx.upstream(Stage::Sweep)?;
    let (_, cohort) = read_cohort(&clean_dir.join("series"))?;
    let choices: Vec<ResampleChoice> = io::read_json(&sweep_dir.join("selection.json"))?;
    let candidates = ctx.cfg.cwt.wavelet.candidates()?;
    let dir = StageDir::begin(ctx, Stage::Cwt)?;

    let jobs: Vec<&IrregularSeries> = cohort.values().flatten().collect();
    let results = jobs
        .par_iter()
        .map(|s| -> Result<(weanscope_core::resample::UniformSeries, SeriesPsd)> {
            let choice = choices
                .iter()
                .find(|c| c.variable == s.variable)
                .ok_or_else(|| PipelineError::format(sweep_dir.join("selection.json"), format!("no entry for {}", s.variable)))?;
            let ctxe = with_context(format!("cwt {}/{}", s.patient_id, s.variable));
            let u = resample_uniform(s, choice.method, choice.fs_hz).map_err(&ctxe)?;
            let mut per_wavelet = Vec::new();
            for w in &candidates {
                let sc = cwt_transform(&u, w, &ctx.cfg.cwt.transform).map_err(&ctxe)?;
                let ridge = ridge_frequency(&sc);
                per_wavelet.push((psd_map(&sc), sc.pseudo_frequencies.clone(), ridge));
            }
            Ok((
                u,
                SeriesPsd {
                    patient: s.patient_id.clone(),
                    label: s.class_label,
                    variable: s.variable,
                    fs: choice.fs_hz,
                    per_wavelet,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let chosen_index = if candidates.len() == 1 {
        0
    } else {
        let side = ctx.cfg.cwt.selection_size;
        let cohorts: Vec<Vec<VariablePsds>> = (0..candidates.len())
            .map(|k| {
                VariableId::ALL
                    .iter()
                    .map(|&v| {
                        let pick = |want: fn(ClassLabel) -> bool| -> Vec<PsdMap> {
                            results
                                .iter()
                                .filter(|(_, p)| p.variable == v && p.label.is_some_and(want))
                                .map(|(_, p)| shrink(&p.per_wavelet[k].0, side))
                                .collect()
                        };
                        VariablePsds {
                            variable: v,
                            success: pick(|l| l == ClassLabel::C0),
                            failure: pick(|l| l == ClassLabel::C1),
                        }
                    })
                    .collect()
            })
            .collect();
        match select_wavelet(&candidates, &cohorts) {
            Ok(sel) => {
                write_wavelet_selection(&dir.path("wavelet_selection.csv"), &sel)?;
                candidates.iter().position(|w| *w == sel.chosen).unwrap_or(0)
            }
            Err(weanscope_core::Error::EmptyCohort(what)) => {
                log::warn!("wavelet selection skipped, no C0/C1 pair for {what}; using {}", candidates[0].name());
                0
            }
            Err(e) => return Err(e.into()),
        }
    };
    let wavelet: MotherWavelet = candidates[chosen_index];
    io::write_json(&dir.path("wavelet.json"), &wavelet)?;

    let mut ridges = Vec::new();
    for (u, p) in &results {
        let name = series_file_name(&p.patient, p.variable);
        write_uniform(&dir.path(PathBuf::from("resampled").join(&name)), u)?;
        let (map, freqs, ridge) = &p.per_wavelet[chosen_index];
        let small = map.decimate_time(ctx.cfg.cwt.max_time_bins);
        let header = PsdHeader {
            rows: small.rows,
            cols: small.cols,
            patient_id: p.patient.clone(),
            variable: p.variable,
            class_label: p.label,
            wavelet,
            fs_hz: p.fs,
            frequencies_hz: freqs.clone(),
            ridge_hz: *ridge,
        };
        write_psd(&dir.path(PathBuf::from("psd").join(name.replace(".csv", ".psd"))), &header, &small)?;
        ridges.push(vec![
            p.patient.clone(),
            p.variable.to_string(),
            p.label.map(|l| l.to_string()).unwrap_or_default(),
            ridge.to_string(),
        ]);
    }
    write_csv(&dir.path("ridges.csv"), &["patient_id", "variable", "class_label", "ridge_hz"], ridges)?;
    dir.commit(ctx)
}

pub(super) fn render(ctx: &Ctx) -> Result<PathBuf> {
    let cwt_dir = ctx.upstream(Stage::Cwt)?;
    let clean_dir = ctx.upstream(Stage::Clean)?;
    let manifest: Manifest = io::read_json(&clean_dir.join("series").join(MANIFEST))?;
    let dir = StageDir::begin(ctx, Stage::Render)?;
    let opts = RenderOptions {
        out_h: ctx.cfg.image.size,
        out_w: ctx.cfg.image.size,
        log_compress: ctx.cfg.image.log_compress,
    };
    let tensors = manifest
        .patients
        .par_iter()
        .map(|p| -> Result<_> {
            let mut planes = Vec::with_capacity(8);
            for v in VariableId::ALL {
                let path = cwt_dir
                    .join("psd")
                    .join(series_file_name(&p.id, v).replace(".csv", ".psd"));
                if !path.is_file() {
                    return Err(PipelineError::MissingUpstreamArtifact(path));
                }
                let (_, map) = read_psd(&path)?;
                planes.push(render_plane(&map, &opts)?);
            }
            Ok((planes.clone(), stack_tensor(&planes, &p.id, Some(p.label))?))
        })
        .collect::<Result<Vec<_>>>()?;
    for (planes, t) in &tensors {
        write_tensor(&dir.path(PathBuf::from("tensors").join(format!("{}.tensor", t.patient_id))), t)?;
        for (plane, v) in planes.iter().zip(VariableId::ALL) {
            let stem = PathBuf::from("images").join(format!("{}__{v}", t.patient_id));
            if ctx.cfg.image.write_png {
                image::write_png(&dir.path(stem.with_extension("png")), plane)?;
            }
            if ctx.cfg.image.write_pgm {
                image::write_pgm(&dir.path(stem.with_extension("pgm")), plane)?;
            }
        }
    }
    io::write_json(&dir.path(MANIFEST), &manifest)?;
    dir.commit(ctx)
}

/// PSD of one series as a CSV matrix, for inspection.
pub fn export_psd_csv(psd_path: &std::path::Path, out: &std::path::Path) -> Result<()> {
    let (_, map) = read_psd(psd_path)?;
    write_psd_csv(out, &map)
}
