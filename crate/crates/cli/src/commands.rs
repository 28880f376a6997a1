use std::fs;
use std::path::{Path, PathBuf};

use calvalid::io::{load_correspondences, load_model, save_correspondences, save_model, to_precise_json, write_file};
use calvalid::report::{histogram, to_csv, to_svg};
use calvalid::{
    fit_model, flag_inliers, gen_sets, validate_set, Correspondence, CorrespondenceRecord, Error, Result,
    ValidateConfig, ValidationRecord,
};

use crate::args::{BatchArgs, FitArgs, ReportArgs, SimulateArgs, ValidateArgs};
use crate::manifest::{json_error, Manifest, SetEntry, MANIFEST_SCHEMA_VERSION};

const HIST_RANGE: (f64, f64) = (-5.0, 5.0);

pub fn set_name(i: usize) -> String {
    format!("set_{i:03}")
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let cfg = a.config(seed);
    let sets = gen_sets(&cfg)?;
    let mut entries = Vec::with_capacity(sets.len());
    for (i, set) in sets.iter().enumerate() {
        let id = set_name(i);
        let recs: Vec<CorrespondenceRecord> = set
            .corrs
            .iter()
            .zip(&set.scales)
            .map(|(c, s)| CorrespondenceRecord {
                corr: *c,
                scales: Some(*s),
            })
            .collect();
        let corrs = format!("corrs/{id}.jsonl");
        let truth = format!("truth/{id}.json");
        save_correspondences(&recs, &a.out.join(&corrs))?;
        save_model(&set.truth, &a.out.join(&truth))?;
        entries.push(SetEntry {
            id,
            corrs,
            truth,
            n_points: recs.len(),
            coverage: set.coverage,
            distance: set.distance,
        });
    }
    Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        seed,
        rng: calvalid::sim::RNG_ALGORITHM.into(),
        config: cfg,
        sets: entries,
    }
    .save(&a.out)
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let recs = load_correspondences(&a.corrs)?;
    let corrs: Vec<Correspondence> = recs.iter().map(|r| r.corr).collect();
    let init = a.init.as_deref().map(load_model).transpose()?;
    let cfg = a.fit.config(a.inlier_threshold);
    let model = fit_model(&corrs, &cfg, init.as_ref())?;
    save_model(&model, &a.out)?;
    if let Some(path) = &a.flag_inliers {
        let flagged = flag_inliers(&model, &corrs, cfg.inlier_threshold);
        let out: Vec<CorrespondenceRecord> = recs
            .iter()
            .zip(flagged)
            .map(|(r, corr)| CorrespondenceRecord { corr, scales: r.scales })
            .collect();
        save_correspondences(&out, path)?;
    }
    Ok(())
}

/// Returns whether H0 survived the primary test.
pub fn validate(a: &ValidateArgs) -> Result<bool> {
    let model = load_model(&a.model)?;
    let recs = load_correspondences(&a.corrs)?;
    let id = a.set_id.clone().unwrap_or_else(|| file_stem(&a.corrs));
    let detail = validate_set(&id, &model, &recs, &a.validate.config())?;
    let json = to_precise_json(&detail.record) + "\n";
    match &a.out {
        Some(p) => write_file(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    if let Some(p) = &a.residuals_out {
        write_file(p, (to_precise_json(&detail.standardized) + "\n").as_bytes())?;
    }
    Ok(detail.record.accepted())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for p in &a.records {
        records.extend(read_records(p)?);
    }
    write_report(&records, &a.out, &a.title)?;
    if !a.residuals.is_empty() {
        let mut values = Vec::new();
        for p in &a.residuals {
            let text = fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            let v: Vec<f64> = serde_json::from_str(&text).map_err(|e| json_error(p, &e))?;
            values.extend(v);
        }
        let h = histogram(&values, a.bins, HIST_RANGE.0, HIST_RANGE.1)?;
        write_file(&a.out.join("histogram.json"), (to_precise_json(&h) + "\n").as_bytes())?;
    }
    Ok(())
}

pub fn write_report(records: &[ValidationRecord], out: &Path, title: &str) -> Result<()> {
    write_file(&out.join("report.csv"), to_csv(records)?.as_bytes())?;
    write_file(&out.join("report.svg"), to_svg(records, title)?.as_bytes())
}

/// A single JSON record, or JSON lines of records.
fn read_records(path: &Path) -> Result<Vec<ValidationRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if let Ok(r) = serde_json::from_str::<ValidationRecord>(&text) {
        return Ok(vec![r]);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(line).map_err(|e| {
            let mut err = json_error(path, &e);
            if let Error::Parse { line: l, .. } = &mut err {
                *l = i + 1;
            }
            err
        })?;
        out.push(r);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

struct BatchItem {
    model_json: String,
    record: ValidationRecord,
}

fn batch_one(dir: &Path, entry: &SetEntry, a: &BatchArgs, vcfg: &ValidateConfig) -> Result<BatchItem> {
    let recs = load_correspondences(&dir.join(&entry.corrs))?;
    let corrs: Vec<Correspondence> = recs.iter().map(|r| r.corr).collect();
    let model = fit_model(&corrs, &a.fit.config(3.0), None)?;
    let detail = validate_set(&entry.id, &model, &recs, vcfg)?;
    Ok(BatchItem {
        model_json: calvalid::io::model_to_json(&model),
        record: detail.record,
    })
}

/// Fits and validates every set of a simulation run. Sets are split across
/// `jobs` threads; results are gathered in manifest order, so the output does
/// not depend on the thread count.
pub fn batch(a: &BatchArgs) -> Result<()> {
    let manifest = Manifest::load(&a.sim_dir)?;
    let vcfg = a.validate.config();
    let jobs = a.jobs.max(1);
    let mut slots: Vec<Option<Result<BatchItem>>> = (0..manifest.sets.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunk = manifest.sets.len().div_ceil(jobs).max(1);
        for (entries, out) in manifest.sets.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            let vcfg = &vcfg;
            s.spawn(move || {
                for (e, o) in entries.iter().zip(out) {
                    *o = Some(batch_one(&a.sim_dir, e, a, vcfg));
                }
            });
        }
    });
    let mut records = Vec::with_capacity(slots.len());
    let mut lines = String::new();
    for (entry, slot) in manifest.sets.iter().zip(slots) {
        let item = slot.expect("every slot is filled")?;
        let model_path: PathBuf = a.out.join("models").join(format!("{}.json", entry.id));
        write_file(&model_path, item.model_json.as_bytes())?;
        lines.push_str(&serde_json::to_string(&item.record).expect("record serializes"));
        lines.push('\n');
        records.push(item.record);
    }
    write_file(&a.out.join("records.jsonl"), lines.as_bytes())?;
    let title = format!("D({},0) fit, {} sets", a.fit.order, records.len());
    write_report(&records, &a.out, &title)
}
