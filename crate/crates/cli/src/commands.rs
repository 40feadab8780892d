use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use randcrowns::experiments::{
    cross_validate_all, sweep as run_sweep, synth_ensemble, AnnotatorEnsemble,
};
use randcrowns::io::{
    export_regions, export_scores, group_by_crown, load_annotations, write_annotations, write_json,
    write_sweep_csv, Annotation, AnnotationFile, RegionLabel, RunConfig, ScoreFormat, ScoreReport,
    ScoreRow, DEFAULT_PLOT_ID, FLAG_CLIPPED, FLAG_UNMATCHED,
};
use randcrowns::matching::{
    aggregate, match_max_iou, match_nearest_center, Labeled, MatchPair, MatchResult, Strategy,
    UnmatchedDelineation,
};
use randcrowns::{Error, PlotFrame, RcParams, Region, ScoreRecord, TargetRegions};
use rayon::prelude::*;

/// Like `println!`, but a closed stdout is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

struct Item<'a> {
    label: Labeled,
    annotation: &'a Annotation,
}

/// Features of one file split by plot. Ids are `crown_id` (else `f<index>`),
/// suffixed with `@<annotator_id>` when a plot repeats a crown id.
fn by_plot(file: &AnnotationFile) -> BTreeMap<String, Vec<Item<'_>>> {
    let mut out: BTreeMap<String, Vec<Item<'_>>> = BTreeMap::new();
    for (k, a) in file.features.iter().enumerate() {
        let id = a.crown_id.clone().unwrap_or_else(|| format!("f{k}"));
        out.entry(
            a.plot_id
                .clone()
                .unwrap_or_else(|| DEFAULT_PLOT_ID.to_string()),
        )
        .or_default()
        .push(Item {
            label: Labeled::new(id, a.shape.clone()),
            annotation: a,
        });
    }
    for items in out.values_mut() {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for it in items.iter() {
            *seen.entry(it.label.id.clone()).or_default() += 1;
        }
        for it in items.iter_mut() {
            if seen[&it.label.id] > 1 {
                it.label.id = format!("{}@{}", it.label.id, it.annotation.annotator_id);
            }
        }
    }
    out
}

/// Matching state of one plot.
struct PlotMatch<'a> {
    plot_id: String,
    result: MatchResult,
    targets: BTreeMap<String, (&'a Annotation, Result<TargetRegions, Error>)>,
    delineations: BTreeMap<String, (&'a Annotation, Region)>,
}

fn match_plots<'a>(
    config: &RunConfig,
    frame: &PlotFrame,
    params: &RcParams,
    targets: &'a AnnotationFile,
    delineations: &'a AnnotationFile,
) -> Result<Vec<PlotMatch<'a>>, Error> {
    let mut t_plots = by_plot(targets);
    let mut d_plots = by_plot(delineations);
    for plot in d_plots.keys().filter(|p| !t_plots.contains_key(*p)) {
        log::warn!("plot {plot} has delineations but no targets; they are ignored");
    }
    let mut out = Vec::new();
    for (plot_id, ts) in std::mem::take(&mut t_plots) {
        let ds = d_plots.remove(&plot_id).unwrap_or_default();
        let regions: BTreeMap<String, (&Annotation, Result<TargetRegions, Error>)> = ts
            .par_iter()
            .map(|t| {
                let built = TargetRegions::build(&t.annotation.shape, params, frame);
                match &built {
                    Err(e) => log::warn!("plot {plot_id}, target {}: {e}", t.label.id),
                    Ok(r) if r.clipped() => {
                        log::debug!("plot {plot_id}, target {}: edge ring clipped", t.label.id)
                    }
                    Ok(_) => {}
                }
                (t.label.id.clone(), (t.annotation, built))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        let rasters: BTreeMap<String, (&Annotation, Region)> = ds
            .par_iter()
            .map(|d| {
                (
                    d.label.id.clone(),
                    (d.annotation, d.annotation.shape.rasterize(frame)),
                )
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        let tl: Vec<Labeled> = ts.iter().map(|t| t.label.clone()).collect();
        let dl: Vec<Labeled> = ds.iter().map(|d| d.label.clone()).collect();
        let result = match config.matching.strategy {
            Strategy::MaxIou => match_max_iou(&dl, &tl, frame)?,
            Strategy::NearestCenter => match_nearest_center(&dl, &tl, |t, d| {
                match (&regions[&t.id].1, &rasters[&d.id].1) {
                    (Ok(r), raster) => r.score(raster).map_or(0.0, |s| s.rand_crowns),
                    (Err(_), _) => 0.0,
                }
            })?,
        };
        out.push(PlotMatch {
            plot_id,
            result,
            targets: regions,
            delineations: rasters,
        });
    }
    Ok(out)
}

fn zero_record(degenerate: bool) -> ScoreRecord {
    ScoreRecord {
        a: 0,
        b: 0,
        c: 0,
        d: 0,
        rand_crowns: 0.0,
        iou: 0.0,
        iou_crowns: 0.0,
        degenerate,
    }
}

fn prefixed(plot: &str, id: &str) -> String {
    format!("{plot}/{id}")
}

pub fn score(
    config: &RunConfig,
    targets: &Path,
    delineations: &Path,
    out: &Path,
) -> Result<(), Error> {
    let frame = config.require_frame()?;
    let params = config.rc_params()?;
    let tf = load_annotations(targets)?;
    let df = load_annotations(delineations)?;
    let plots = match_plots(config, &frame, &params, &tf, &df)?;

    let mut rows = Vec::new();
    let mut merged = MatchResult {
        strategy: config.matching.strategy,
        pairs: Vec::new(),
        unmatched_targets: Vec::new(),
        unmatched_delineations: Vec::new(),
    };
    let mut pair_scores = BTreeMap::new();
    for pm in &plots {
        let scored: Vec<(&MatchPair, ScoreRecord, bool)> = pm
            .result
            .pairs
            .par_iter()
            .map(|p| {
                let (_, built) = &pm.targets[&p.target_id];
                let (_, raster) = &pm.delineations[&p.delineation_id];
                Ok(match built {
                    Ok(r) => (p, r.score(raster)?, r.clipped()),
                    Err(_) => (p, zero_record(true), false),
                })
            })
            .collect::<Result<_, Error>>()?;
        for (p, record, clipped) in scored {
            let (ta, _) = pm.targets[&p.target_id];
            let (da, _) = pm.delineations[&p.delineation_id];
            let flags: &[&str] = if clipped { &[FLAG_CLIPPED] } else { &[] };
            rows.push(ScoreRow::new(
                &pm.plot_id,
                &p.target_id,
                &ta.annotator_id,
                &da.annotator_id,
                &record,
                flags,
            ));
            let key = (
                prefixed(&pm.plot_id, &p.target_id),
                prefixed(&pm.plot_id, &p.delineation_id),
            );
            pair_scores.insert(key.clone(), record.rand_crowns);
            merged.pairs.push(MatchPair {
                target_id: key.0,
                delineation_id: key.1,
                pairing_score: p.pairing_score,
            });
        }
        for t in &pm.result.unmatched_targets {
            let (ta, built) = &pm.targets[t];
            let record = zero_record(built.is_err());
            rows.push(ScoreRow::new(
                &pm.plot_id,
                t,
                &ta.annotator_id,
                "",
                &record,
                &[FLAG_UNMATCHED],
            ));
            merged.unmatched_targets.push(prefixed(&pm.plot_id, t));
        }
        for u in &pm.result.unmatched_delineations {
            merged.unmatched_delineations.push(UnmatchedDelineation {
                id: prefixed(&pm.plot_id, &u.id),
                nearest_target: u.nearest_target.as_ref().map(|t| prefixed(&pm.plot_id, t)),
            });
        }
    }
    rows.sort_by(|a, b| {
        (&a.plot_id, &a.crown_id, &a.annotator_delin).cmp(&(
            &b.plot_id,
            &b.crown_id,
            &b.annotator_delin,
        ))
    });
    let global = if merged.pairs.is_empty() && merged.unmatched_targets.is_empty() {
        None
    } else {
        Some(aggregate(&merged, &pair_scores, config.matching.penalty)?)
    };
    let report = ScoreReport {
        records: rows,
        global,
    };
    export_scores(&report, out, ScoreFormat::from_path(out))?;
    if let Some(g) = &report.global {
        say!(
            "{}",
            serde_json::to_string_pretty(g).expect("global score serializes")
        );
    }
    Ok(())
}

pub fn regions(
    config: &RunConfig,
    targets: &Path,
    delineations: Option<&Path>,
    out: &Path,
) -> Result<(), Error> {
    let frame = config.require_frame()?;
    let params = config.rc_params()?;
    let tf = load_annotations(targets)?;
    let df = match delineations {
        Some(p) => load_annotations(p)?,
        None => AnnotationFile::default(),
    };
    let plots = match_plots(config, &frame, &params, &tf, &df)?;
    let mut sets = Vec::new();
    for pm in &plots {
        let matched: BTreeMap<&str, &str> = pm
            .result
            .pairs
            .iter()
            .map(|p| (p.target_id.as_str(), p.delineation_id.as_str()))
            .collect();
        for (id, (ann, built)) in &pm.targets {
            let Ok(t) = built else { continue };
            let set = match (delineations, matched.get(id.as_str())) {
                (Some(_), Some(d)) => t.finalize(&pm.delineations[*d].1)?,
                _ => t.unextended(),
            };
            let label = RegionLabel {
                plot_id: pm.plot_id.clone(),
                crown_id: id.clone(),
                annotator_id: ann.annotator_id.clone(),
            };
            sets.push((label, set));
        }
    }
    export_regions(&sets, out)?;
    say!("wrote {} region sets to {}", sets.len(), out.display());
    Ok(())
}

fn load_ensemble(config: &RunConfig, files: &[PathBuf]) -> Result<AnnotatorEnsemble, Error> {
    let frame = config.require_frame()?;
    let loaded = files
        .iter()
        .map(load_annotations)
        .collect::<Result<Vec<_>, _>>()?;
    let g = group_by_crown(&loaded, &frame, config.grouping.tolerance)?;
    if g.dropped_groups > 0 {
        eprintln!(
            "dropped {} crowns not labeled by every annotator ({} features)",
            g.dropped_groups, g.dropped_features
        );
    }
    Ok(g.ensemble)
}

pub fn crossval(config: &RunConfig, files: &[PathBuf], out: &Path) -> Result<(), Error> {
    let params = config.rc_params()?;
    let ensemble = load_ensemble(config, files)?;
    let cv = cross_validate_all(&ensemble, &params)?;
    match config.metric {
        Some(m) => write_json(cv.report(m), out)?,
        None => write_json(&cv, out)?,
    }
    let shown: Vec<_> = match config.metric {
        Some(m) => vec![cv.report(m)],
        None => vec![&cv.rand_crowns, &cv.iou, &cv.iou_crowns],
    };
    for r in shown {
        let name = serde_json::to_value(r.metric).expect("metric serializes");
        say!(
            "{} avg_variance={} crowns={} skipped={} clipped={}",
            name.as_str().unwrap_or_default(),
            r.avg_variance,
            r.k,
            r.n_skipped,
            r.n_clipped
        );
    }
    Ok(())
}

pub fn sweep(config: &RunConfig, files: &[PathBuf], out: &Path) -> Result<(), Error> {
    let params = config.rc_params()?;
    let ensemble = load_ensemble(config, files)?;
    let records = run_sweep(&ensemble, &config.sweep, &params)?;
    write_sweep_csv(&records, out)?;
    say!("wrote {} grid points to {}", records.len(), out.display());
    Ok(())
}

pub fn synth(config: &RunConfig, out: &Path) -> Result<(), Error> {
    let e = synth_ensemble(&config.synth_spec())?;
    let mut features = Vec::new();
    for c in &e.crowns {
        for (a, shape) in e.annotators.iter().zip(&c.shapes) {
            let mut ann = Annotation::new(shape.clone(), a.clone());
            ann.plot_id = Some(e.plots[c.plot].id.clone());
            ann.crown_id = Some(c.id.clone());
            features.push(ann);
        }
    }
    write_annotations(
        &AnnotationFile {
            crs: None,
            features,
        },
        out,
    )?;
    say!(
        "wrote {} crowns x {} annotators to {}",
        e.crowns.len(),
        e.annotators.len(),
        out.display()
    );
    Ok(())
}

pub fn matching(
    config: &RunConfig,
    targets: &Path,
    delineations: &Path,
    out: Option<&Path>,
) -> Result<(), Error> {
    let frame = config.require_frame()?;
    let params = config.rc_params()?;
    let tf = load_annotations(targets)?;
    let df = load_annotations(delineations)?;
    let plots = match_plots(config, &frame, &params, &tf, &df)?;
    let results: BTreeMap<&str, &MatchResult> = plots
        .iter()
        .map(|p| (p.plot_id.as_str(), &p.result))
        .collect();
    match out {
        Some(p) => write_json(&results, p),
        None => {
            say!(
                "{}",
                serde_json::to_string_pretty(&results).expect("match results serialize")
            );
            Ok(())
        }
    }
}
