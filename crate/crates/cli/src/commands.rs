//! Subcommand implementations. Every failure is classified as a config or
//! usage problem (exit 2) or a data or model problem (exit 3).

use crate::config::RunConfig;
use anyhow::{anyhow, Context};
use clids_core::data::{
    feature_significance, load_csv, load_csv_unlabeled, resolve_selection, stratified_split_indices, FeatureMatrix,
    Preprocessor, RawDataset, Schema,
};
use clids_core::eval::{benchmark, confusion, Classifier, EvalReport};
use clids_core::explain::svg::{render_artifact, Lattice, SvgStyle};
use clids_core::explain::{
    feature_heatmap, global_explanation, label_map, local_explanation, local_explanation_tree, treemap_layout,
    u_matrix_artifact, Artifact,
};
use clids_core::ghsom::{train_ghsom, GhsomParams};
use clids_core::gsom::{train_gsom, GsomParams};
use clids_core::model::{Model, ModelFile, ModelKind, MODEL_FORMAT_VERSION};
use clids_core::prune::{prune_tree, PruneParams, DEFAULT_DELTA};
use clids_core::search::{random_search, write_trial_log, Params};
use clids_core::som::{train_som, SomParams};
use clids_core::train::TrainError;
use clids_core::LabelVector;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub enum Failure {
    Config(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Data(e) => e,
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

trait Classify<T> {
    fn config(self) -> CmdResult<T>;
    fn data(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn data(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Data(e.into()))
    }
}

fn train_failure(e: TrainError) -> Failure {
    match e {
        TrainError::InvalidParam(_) => Failure::Config(e.into()),
        _ => Failure::Data(e.into()),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).data()?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())).data()
}

fn out_dir(flag: Option<PathBuf>, cfg: Option<&RunConfig>) -> CmdResult<PathBuf> {
    let dir = flag.or_else(|| cfg.and_then(|c| c.output_dir.clone())).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())).data()?;
    Ok(dir)
}

/// Encoded training (and optional held-out) data for a config.
struct Prepared {
    schema: Schema,
    pre: Preprocessor,
    train: (FeatureMatrix, LabelVector),
    test: Option<(FeatureMatrix, LabelVector)>,
}

fn load_labeled(path: &Path, schema: &Schema) -> CmdResult<RawDataset> {
    load_csv(path, schema).with_context(|| format!("loading {}", path.display())).data()
}

/// Train and held-out row indices of the training file under `cfg`.
fn split_rows(cfg: &RunConfig, raw: &RawDataset) -> CmdResult<(Vec<usize>, Option<Vec<usize>>)> {
    match (cfg.data.test.is_some(), cfg.data.test_fraction) {
        (false, Some(f)) => {
            let (tr, te) = stratified_split_indices(&raw.labels().data()?, f, cfg.seed).config()?;
            Ok((tr, Some(te)))
        }
        _ => Ok(((0..raw.len()).collect(), None)),
    }
}

fn prepare(cfg: &RunConfig) -> CmdResult<Prepared> {
    let schema = cfg.data.schema.resolve().config()?;
    let raw = load_labeled(&cfg.data.train, &schema)?;
    let (train_rows, held_out) = split_rows(cfg, &raw)?;
    let pre = Preprocessor::fit(&raw, &train_rows).data()?;
    let (m, l) = pre.transform(&raw).data()?;
    let train = (m.subset(&train_rows), l.select(&train_rows));
    let test = match (&cfg.data.test, held_out) {
        (Some(path), _) => Some(pre.transform(&load_labeled(path, &schema)?).data()?),
        (None, Some(rows)) => Some((m.subset(&rows), l.select(&rows))),
        (None, None) => None,
    };
    Ok(Prepared { schema, pre, train, test })
}

/// Trainer parameters with the effective seed filled in.
fn effective_params(params: &Value, seed: u64) -> Value {
    let mut p = params.clone();
    if let Value::Object(map) = &mut p {
        map.entry("seed").or_insert(json!(seed));
    }
    p
}

fn fit(kind: ModelKind, params: &Value, data: &FeatureMatrix, labels: &LabelVector) -> CmdResult<Model> {
    let parse_err = |e: serde_json::Error| Failure::Config(anyhow!("model.params: {e}"));
    Ok(match kind {
        ModelKind::Som => {
            let p: SomParams = serde_json::from_value(params.clone()).map_err(parse_err)?;
            let mut m = train_som(data, &p).map_err(train_failure)?;
            m.assign_labels(data, labels).data()?;
            Model::Som(m)
        }
        ModelKind::Gsom => {
            let p: GsomParams = serde_json::from_value(params.clone()).map_err(parse_err)?;
            let mut m = train_gsom(data, &p).map_err(train_failure)?.map;
            m.assign_labels(data, labels).data()?;
            Model::Gsom(m)
        }
        ModelKind::Ghsom => {
            let p: GhsomParams = serde_json::from_value(params.clone()).map_err(parse_err)?;
            Model::Ghsom(train_ghsom(data, labels, &p).map_err(train_failure)?.tree)
        }
    })
}

pub fn preprocess(cfg: &RunConfig, out: Option<PathBuf>) -> CmdResult {
    let dir = out_dir(out, Some(cfg))?;
    let p = prepare(cfg)?;
    write_json(&dir.join("preprocessor.json"), &json!({ "schema": p.schema, "preprocessor": p.pre }))?;
    write_features(&dir.join("train_features.csv"), &p.train)?;
    if let Some(test) = &p.test {
        write_features(&dir.join("test_features.csv"), test)?;
    }
    let sig = feature_significance(&p.train.0).data()?;
    let global = global_explanation(&sig, p.train.0.feature_names()).data()?;
    let selected = resolve_selection(&p.train.0, &cfg.features).config()?;
    let names: Vec<&String> = selected.iter().map(|&c| &p.train.0.feature_names()[c]).collect();
    write_json(&dir.join("significance.json"), &Artifact::GlobalSignificance(global).to_doc())?;
    write_json(&dir.join("selected_features.json"), &names)?;
    println!(
        "preprocessed {} training rows into {} features ({} selected){}",
        p.train.0.n_samples(),
        p.train.0.dim(),
        names.len(),
        p.test.as_ref().map(|t| format!(", {} test rows", t.0.n_samples())).unwrap_or_default()
    );
    Ok(())
}

fn write_features(path: &Path, (m, l): &(FeatureMatrix, LabelVector)) -> CmdResult {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display())).data()?;
    let mut header: Vec<&str> = m.feature_names().iter().map(String::as_str).collect();
    header.push("label");
    w.write_record(&header).data()?;
    for (row, label) in m.rows().zip(l.iter()) {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        rec.push(label.as_u8().to_string());
        w.write_record(&rec).data()?;
    }
    w.flush().data()
}

pub fn train(cfg: &RunConfig, out: Option<PathBuf>) -> CmdResult {
    let dir = out_dir(out, Some(cfg))?;
    let p = prepare(cfg)?;
    let full = &p.train.0;
    let significance = feature_significance(full).data()?;
    let cols = resolve_selection(full, &cfg.features).config()?;
    let data = full.select_columns(&cols);
    let params = effective_params(&cfg.model.params, cfg.seed);

    let start = Instant::now();
    let model = fit(cfg.model.kind, &params, &data, &p.train.1)?;
    let train_time_s = start.elapsed().as_secs_f64();

    let quality_map = model.maps()[0];
    let quality = quality_map.quality(&data).ok();
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        features: data.feature_names().to_vec(),
        significance,
        train_time_s,
        seed: params["seed"].as_u64().unwrap_or(cfg.seed),
        params,
        preprocessor: Some(p.pre),
        schema: Some(p.schema),
        model,
        pruned_with_delta: None,
    };
    file.save(dir.join("model.json")).data()?;
    write_json(
        &dir.join("quality.json"),
        &json!({
            "kind": file.model.kind(),
            "quality": quality,
            "network_size": file.model.network_size(),
            "neurons": file.model.maps().iter().map(|m| m.len()).sum::<usize>(),
            "train_time_s": train_time_s,
        }),
    )?;
    println!(
        "trained {} on {} samples x {} features in {train_time_s:.2}s: {} map(s), {} neurons",
        file.model.kind(),
        data.n_samples(),
        data.dim(),
        file.model.network_size(),
        file.model.maps().iter().map(|m| m.len()).sum::<usize>()
    );
    Ok(())
}

fn load_model(path: &Path) -> CmdResult<ModelFile> {
    ModelFile::load(path).with_context(|| format!("loading model {}", path.display())).data()
}

/// Labelled rows from `path`, or the training (or held-out) part of the
/// config's data, encoded for `model`.
fn model_rows(model: &ModelFile, path: Option<&Path>, cfg: Option<&RunConfig>, held_out: bool) -> CmdResult<(FeatureMatrix, LabelVector)> {
    let schema = match (&model.schema, cfg) {
        (_, Some(c)) => c.data.schema.resolve().config()?,
        (Some(s), None) => s.clone(),
        (None, None) => return Err(Failure::Config(anyhow!("model has no schema; pass --config"))),
    };
    let (raw, rows) = match (path, cfg) {
        (Some(p), _) => {
            let raw = load_labeled(p, &schema)?;
            let all = (0..raw.len()).collect();
            (raw, all)
        }
        (None, Some(c)) => match (held_out, &c.data.test) {
            (true, Some(t)) => {
                let raw = load_labeled(t, &schema)?;
                let all = (0..raw.len()).collect();
                (raw, all)
            }
            _ => {
                let raw = load_labeled(&c.data.train, &schema)?;
                let (tr, te) = split_rows(c, &raw)?;
                let rows = if held_out {
                    te.ok_or_else(|| Failure::Config(anyhow!("config has neither data.test nor data.test_fraction")))?
                } else {
                    tr
                };
                (raw, rows)
            }
        },
        (None, None) => return Err(Failure::Config(anyhow!("no data given; pass a data file or --config"))),
    };
    let labels = raw.labels().data()?.select(&rows);
    let m = model.prepare(&raw).data()?.subset(&rows);
    Ok((m, labels))
}

pub fn prune(model_path: &Path, train: Option<&Path>, cfg: Option<&RunConfig>, delta: Option<f64>, out: Option<PathBuf>) -> CmdResult {
    let dir = out_dir(out, cfg)?;
    let mut file = load_model(model_path)?;
    let Model::Ghsom(tree) = &file.model else {
        return Err(Failure::Config(anyhow!("pruning needs a ghsom model, got {}", file.model.kind())));
    };
    let delta = delta.or_else(|| cfg.and_then(|c| c.prune.as_ref().map(|p| p.delta))).unwrap_or(DEFAULT_DELTA);
    let (data, labels) = model_rows(&file, train, cfg, false)?;
    let (pruned, report) = prune_tree(tree, &data, &labels, &PruneParams { delta }).map_err(|e| match e {
        clids_core::prune::PruneError::InvalidDelta(_) => Failure::Config(e.into()),
        _ => Failure::Data(e.into()),
    })?;
    file.model = Model::Ghsom(pruned);
    file.pruned_with_delta = Some(delta);
    file.save(dir.join("model_pruned.json")).data()?;
    write_json(&dir.join("prune_report.json"), &report)?;
    println!(
        "pruned with delta {delta}: {} -> {} maps ({:.1}% reduction)",
        report.maps_before,
        report.maps_after,
        report.reduction_percent()
    );
    Ok(())
}

pub fn evaluate(model_path: &Path, test: Option<&Path>, cfg: Option<&RunConfig>, out: Option<PathBuf>) -> CmdResult {
    let dir = out_dir(out, cfg)?;
    let file = load_model(model_path)?;
    let (data, truth) = model_rows(&file, test, cfg, true)?;
    if data.n_samples() == 0 {
        return Err(Failure::Data(anyhow!("no test rows")));
    }
    let pred = file.model.classify_all(&data).data()?;
    let c = confusion(&truth, &pred).data()?;
    let timing = benchmark(&file.model, &data, 1).data()?;
    let report = EvalReport::new(c, file.model.network_size(), file.train_time_s, timing.mean_ms);
    write_json(&dir.join("eval.json"), &json!({ "report": report, "median_predict_time_ms": timing.median_ms }))?;
    fs::write(dir.join("eval.csv"), report.to_csv()).data()?;
    println!(
        "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  fpr {:.4}  fnr {:.4}  maps {}  predict {:.4} ms/sample",
        report.accuracy, report.precision, report.recall, report.f1, report.fpr, report.fnr, report.network_size, report.predict_time_ms
    );
    Ok(())
}

fn model_token(file: &ModelFile) -> String {
    match (file.model.kind(), file.pruned_with_delta) {
        (ModelKind::Ghsom, Some(_)) => "pghsom".to_string(),
        (k, _) => k.to_string(),
    }
}

fn emit(dir: &Path, stem: &str, artifact: &Artifact, style: &SvgStyle) -> CmdResult {
    write_json(&dir.join(format!("{stem}.json")), &artifact.to_doc())?;
    fs::write(dir.join(format!("{stem}.svg")), render_artifact(artifact, style)).data()
}

pub fn explain(model_path: &Path, samples: Option<&Path>, top_features: Option<usize>, out: Option<PathBuf>) -> CmdResult {
    let dir = out_dir(out, None)?;
    let file = load_model(model_path)?;
    let token = model_token(&file);
    let grid = SvgStyle {
        lattice: if file.model.kind() == ModelKind::Som { Lattice::Square } else { Lattice::Hex },
        ..SvgStyle::default()
    };
    let mut count = 0usize;

    let global = global_explanation(&file.significance, file.all_feature_names()).data()?;
    emit(&dir, &format!("{token}_global_significance_all"), &Artifact::GlobalSignificance(global.clone()), &SvgStyle::default())?;
    count += 1;

    // Heatmaps for the model inputs, most significant first when limited.
    let mut inputs: Vec<usize> = (0..file.features.len()).collect();
    if let Some(k) = top_features {
        let rank = |i: &usize| global.ranking.iter().position(|f| f.name == file.features[*i]).unwrap_or(usize::MAX);
        inputs.sort_by_key(rank);
        inputs.truncate(k);
        inputs.sort_unstable();
    }
    for map in file.model.maps() {
        let id = map.map_id();
        emit(&dir, &format!("{token}_u_matrix_{id}"), &Artifact::UMatrix(u_matrix_artifact(map)), &grid)?;
        emit(&dir, &format!("{token}_label_map_{id}"), &Artifact::LabelMap(label_map(map)), &grid)?;
        count += 2;
        for &f in &inputs {
            let h = feature_heatmap(map, f, &file.features[f]).data()?;
            emit(&dir, &format!("{token}_feature_heatmap_{id}_{f}"), &Artifact::FeatureHeatmap(h), &grid)?;
            count += 1;
        }
    }
    if let Model::Ghsom(tree) = &file.model {
        let layout = treemap_layout(tree, 1200.0, 800.0);
        emit(&dir, &format!("{token}_treemap_{}", tree.root_id()), &Artifact::Treemap(layout), &SvgStyle::default())?;
        count += 1;
    }

    if let Some(path) = samples {
        let schema = file.schema.clone().ok_or_else(|| Failure::Data(anyhow!("model has no schema for raw samples")))?;
        let raw = load_csv_unlabeled(path, &schema).with_context(|| format!("loading {}", path.display())).data()?;
        let data = file.prepare(&raw).data()?;
        for (i, row) in data.rows().enumerate() {
            let mut e = match &file.model {
                Model::Som(m) | Model::Gsom(m) => local_explanation(m, row),
                Model::Ghsom(t) => local_explanation_tree(t, row),
            }
            .data()?;
            e.feature_names = file.features.clone();
            emit(&dir, &format!("{token}_local_explanation_sample{i}"), &Artifact::LocalExplanation(e), &SvgStyle::default())?;
            count += 1;
        }
    }
    println!("wrote {count} artifacts (json + svg) to {}", dir.display());
    Ok(())
}

/// Sampled values merged over the base params; integral values become
/// JSON integers so integer fields accept them.
fn merge_params(base: &Value, sampled: &Params) -> Value {
    let mut p = base.clone();
    if let Value::Object(map) = &mut p {
        for (k, v) in sampled {
            let value = if v.fract() == 0.0 && v.abs() < 9.0e15 { json!(*v as i64) } else { json!(v) };
            map.insert(k.clone(), value);
        }
    }
    p
}

pub fn search(cfg: &RunConfig, out: Option<PathBuf>) -> CmdResult {
    let dir = out_dir(out, Some(cfg))?;
    let sc = cfg.search.as_ref().ok_or_else(|| Failure::Config(anyhow!("config has no search section")))?;
    sc.space.validate().config()?;
    let p = prepare(cfg)?;
    let cols = resolve_selection(&p.train.0, &cfg.features).config()?;
    let data = p.train.0.select_columns(&cols);
    let labels = &p.train.1;
    let (fit_rows, val_rows) = stratified_split_indices(labels, sc.validation_fraction, cfg.seed).config()?;
    let (fx, fl) = (data.subset(&fit_rows), labels.select(&fit_rows));
    let (vx, vl) = (data.subset(&val_rows), labels.select(&val_rows));
    let kind = cfg.model.kind;
    let base = cfg.model.params.clone();

    let outcome = random_search(&sc.space, sc.budget, cfg.seed, |sampled, seed| {
        let params = effective_params(&merge_params(&base, sampled), seed);
        let model = fit(kind, &params, &fx, &fl).map_err(|f| f.error().to_string())?;
        let pred = model.classify_all(&vx).map_err(|e| e.to_string())?;
        let c = confusion(&vl, &pred).map_err(|e| e.to_string())?;
        Ok(clids_core::eval::metrics(&c).accuracy)
    })
    .config()?;

    let log = dir.join("trials.jsonl");
    let f = fs::File::create(&log).with_context(|| format!("writing {}", log.display())).data()?;
    write_trial_log(&outcome.trials, std::io::BufWriter::new(f)).data()?;
    let best = outcome.best.ok_or_else(|| Failure::Data(anyhow!("every trial failed; see {}", log.display())))?;
    let params = effective_params(&merge_params(&base, &best.params), best.seed);
    write_json(
        &dir.join("best_params.json"),
        &json!({ "kind": kind, "params": params, "objective": best.objective, "trial": best.index }),
    )?;
    println!(
        "best of {} trials: #{} with validation accuracy {:.4}",
        outcome.trials.len(),
        best.index,
        best.objective.unwrap_or(0.0)
    );
    Ok(())
}
