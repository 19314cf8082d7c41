use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gcn3d::analyze::{
    contribution_map, fine_sweep, random_row, rotation_sweep, write_fine_csv, write_maps_json, write_sweep_csv,
    RotationMode, RotationSpec, SweepModel,
};
use gcn3d::chemper::{build_graph_tensors, FeatureConfig, GraphTensors, FEATURE_BLOCKS};
use gcn3d::model::{forward, read_checkpoint, write_checkpoint, Checkpoint};
use gcn3d::molio::{
    load_dataset, read_sdf, write_prediction_rows, write_predictions, DatasetRecord, Element, LoadOptions, Task,
};
use gcn3d::numcore::Tensor;
use gcn3d::train::{
    derive_seed, metrics, predict_samples, prepare_samples, run_fold_observed, stratified_folds, summarize,
    write_log_csv, SeedStream,
};
use gcn3d::Error;
use serde_json::{json, Value};

use crate::config::{default_batch_size, RunConfig};
use crate::manifest::RunManifest;
use crate::{Command, DataArgs, Mode};

pub fn run(command: Command, threads: usize) -> Result<()> {
    match command {
        Command::Featurize {
            sdf,
            out,
            explicit_h,
            elements,
        } => {
            let mut m = RunManifest::new("featurize", threads);
            let r = featurize(&mut m, &sdf, &out, explicit_h, elements);
            finish(m, r, &sibling_manifest(&out))
        }
        Command::Train {
            data,
            task,
            agg,
            config,
            out,
            folds,
            fold,
            seed,
            max_epochs,
            batch_size,
        } => {
            let mut m = RunManifest::new("train", threads);
            let opts = TrainOptions {
                task,
                agg,
                config,
                folds,
                fold,
                seed,
                max_epochs,
                batch_size,
                threads,
            };
            create_dir(&out)?;
            let r = train(&mut m, &data, &opts, &out);
            finish(m, r, &out.join("manifest.json"))
        }
        Command::Evaluate { model, data, out } => {
            let mut m = RunManifest::new("evaluate", threads);
            create_dir(&out)?;
            let r = evaluate(&mut m, &model, &data, &out);
            finish(m, r, &out.join("manifest.json"))
        }
        Command::RotateEval {
            model,
            data,
            mode,
            axis,
            step,
            seed,
            id,
            out,
        } => {
            let mut m = RunManifest::new("rotate-eval", threads);
            create_dir(&out)?;
            let spec = match mode {
                Mode::Sweep | Mode::Random => RotationSpec {
                    step_degrees: step.unwrap_or(45.0),
                    axis,
                    ..RotationSpec::stepwise(seed)
                },
                Mode::Fine => RotationSpec {
                    step_degrees: step.unwrap_or(5.0),
                    seed,
                    ..RotationSpec::fine(axis)
                },
            };
            let r = rotate_eval(&mut m, &model, &data, mode, &spec, id.as_deref(), &out);
            finish(m, r, &out.join("manifest.json"))
        }
        Command::Contrib { model, sdf, agg, out } => {
            let mut m = RunManifest::new("contrib", threads);
            let r = contrib(&mut m, &model, &sdf, agg, &out);
            finish(m, r, &sibling_manifest(&out))
        }
    }
}

fn finish(mut manifest: RunManifest, result: Result<()>, path: &Path) -> Result<()> {
    manifest.finish(&result);
    if let Err(e) = manifest.write(path) {
        log::error!("could not write run manifest: {e:#}");
        result?;
        return Err(e);
    }
    result
}

/// `out.json` → `out.manifest.json`.
fn sibling_manifest(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(())
}

fn nested(t: &Tensor) -> Value {
    fn go(shape: &[usize], data: &[f64]) -> Value {
        match shape {
            [] => json!(data[0]),
            [n] => json!(data[..*n]),
            [n, rest @ ..] => {
                let stride: usize = rest.iter().product();
                Value::Array((0..*n).map(|k| go(rest, &data[k * stride..(k + 1) * stride])).collect())
            }
        }
    }
    go(t.shape(), t.data())
}

fn feature_blocks() -> Value {
    let mut off = 0;
    let blocks: Vec<Value> = FEATURE_BLOCKS
        .iter()
        .map(|&(name, width)| {
            let b = json!({ "name": name, "offset": off, "width": width });
            off += width;
            b
        })
        .collect();
    Value::Array(blocks)
}

fn graph_dump(id: &str, g: &GraphTensors) -> Value {
    json!({
        "id": id,
        "atom_index": g.atom_index,
        "x": nested(&g.x),
        "a_norm": nested(&g.a_norm),
        "r": nested(&g.r),
    })
}

fn featurize(
    m: &mut RunManifest,
    sdf: &Path,
    out: &Path,
    explicit_h: bool,
    elements: Option<Vec<String>>,
) -> Result<()> {
    let mut features = FeatureConfig {
        explicit_hydrogens: explicit_h,
        ..FeatureConfig::default()
    };
    if let Some(list) = elements {
        features.elements = list
            .iter()
            .map(|s| Element::from_symbol(s.trim()).ok_or_else(|| Error::Config(format!("unknown element `{s}`"))))
            .collect::<Result<_, _>>()?;
    }
    features.validate()?;
    m.config = serde_json::to_value(&features)?;
    m.input(sdf)?;
    let records = read_sdf(sdf)?;
    let mut dumps = Vec::new();
    let mut failed = 0;
    for (k, r) in records.iter().enumerate() {
        match build_graph_tensors(&r.molecule, &features) {
            Ok(g) => dumps.push(graph_dump(&r.molecule.id, &g)),
            Err(e) => {
                failed += 1;
                eprintln!("record {} (`{}`): {e}", k + 1, r.molecule.id);
            }
        }
    }
    let doc = json!({ "feature_blocks": feature_blocks(), "features": features, "molecules": dumps });
    write_json(out, &doc)?;
    m.output(out);
    if failed > 0 {
        return Err(Error::Dataset(format!("{failed} of {} records could not be featurized", records.len())).into());
    }
    Ok(())
}

fn load(m: &mut RunManifest, data: &DataArgs, task: Task) -> Result<Vec<DatasetRecord>> {
    m.input(&data.sdf)?;
    m.input(&data.targets)?;
    let opts = LoadOptions {
        id_column: data.id_column.clone(),
        target_column: data.target_column.clone(),
        id_field: data.id_field.clone(),
        ..LoadOptions::new(task)
    };
    let records = load_dataset(&data.sdf, &data.targets, &opts)?;
    if records.is_empty() {
        return Err(Error::Dataset("the dataset is empty".into()).into());
    }
    Ok(records)
}

pub struct TrainOptions {
    pub task: Option<Task>,
    pub agg: Option<gcn3d::model::Aggregation>,
    pub config: Option<PathBuf>,
    pub folds: Option<usize>,
    pub fold: Option<usize>,
    pub seed: Option<u64>,
    pub max_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub threads: usize,
}

fn train(m: &mut RunManifest, data: &DataArgs, o: &TrainOptions, out: &Path) -> Result<()> {
    if let Some(c) = &o.config {
        m.input(c)?;
    }
    let mut rc = RunConfig::load(o.config.as_deref())?;
    if let Some(t) = o.task {
        rc.model.task = t;
    }
    if let Some(a) = o.agg {
        rc.model.aggregation = a;
    }
    if let Some(k) = o.folds {
        rc.train.folds = k;
    }
    if let Some(s) = o.seed {
        rc.train.seed = s;
    }
    if let Some(e) = o.max_epochs {
        rc.train.max_epochs = e;
    }
    if let Some(b) = o.batch_size {
        rc.train.batch_size = b;
        rc.batch_size_set = true;
    }
    if o.threads != 0 {
        // the command already runs on a pool of this size
        rc.train.threads = 0;
    }
    let task = rc.model.task;
    let records = load(m, data, task)?;
    if !rc.batch_size_set {
        rc.train.batch_size = default_batch_size(records.len());
    }
    rc.validate()?;
    let k = rc.train.folds;
    if let Some(f) = o.fold.filter(|&f| f >= k) {
        return Err(Error::Config(format!("--fold {f} is out of range for {k} folds")).into());
    }
    m.config = rc.flat();

    let samples = prepare_samples(&records, &rc.features)?;
    let targets: Vec<f64> = records.iter().map(|r| r.target).collect();
    let split_seed = derive_seed(rc.train.seed, SeedStream::Split, 0);
    let assignment = stratified_folds(&targets, task, k, split_seed)?;
    let run: Vec<usize> = match o.fold {
        Some(f) => vec![f],
        None => (0..k).collect(),
    };
    m.seeds = json!({
        "seed": rc.train.seed,
        "split": split_seed,
        "folds": run.iter().map(|&f| json!({ "fold": f, "seed": derive_seed(rc.train.seed, SeedStream::Fold, f as u64) })).collect::<Vec<_>>(),
    });

    let ids = |idx: &[usize]| idx.iter().map(|&i| records[i].id().to_string()).collect::<Vec<_>>();
    let folds_doc: Vec<Value> = assignment
        .splits()
        .iter()
        .enumerate()
        .map(|(f, s)| json!({ "fold": f, "train": ids(&s.train), "val": ids(&s.val), "test": ids(&s.test) }))
        .collect();
    let folds_path = out.join("folds.json");
    write_json(
        &folds_path,
        &json!({ "seed": split_seed, "k": k, "stratified": assignment.stratified, "folds": folds_doc }),
    )?;
    m.output(&folds_path);

    let mut outcomes = Vec::new();
    for &f in &run {
        let dir = out.join(format!("fold_{f}"));
        create_dir(&dir)?;
        let log_path = dir.join("log.csv");
        m.output(&log_path);
        let mut log = Vec::new();
        log::info!("fold {f}: training");
        let outcome = run_fold_observed(&samples, &assignment, f, &rc.model, &rc.train, |e| {
            log.push(*e);
            write_log_csv(&log, &log_path)
        })
        .with_context(|| format!("fold {f}"))?;
        let ck = Checkpoint {
            params: outcome.fit.params.clone(),
            features: rc.features.clone(),
            scaler: outcome.fit.scaler,
        };
        let model_path = dir.join("model.json");
        write_checkpoint(&ck, &model_path)?;
        m.output(&model_path);
        let rows: Vec<(&str, f64, f64)> = outcome
            .split
            .test
            .iter()
            .zip(&outcome.test_predictions)
            .map(|(&i, &p)| (records[i].id(), records[i].target, p))
            .collect();
        let pred_path = dir.join("predictions.csv");
        write_prediction_rows(&rows, &pred_path)?;
        m.output(&pred_path);
        let (name, value) = outcome.metrics.primary();
        log::info!(
            "fold {f}: test {name} {value:.4} (best epoch {})",
            outcome.fit.best_epoch
        );
        outcomes.push(outcome);
    }

    let per_fold: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            let mut v = json!({
                "fold": o.fold,
                "best_epoch": o.fit.best_epoch,
                "epochs": o.fit.log.len(),
                "stopped_early": o.fit.stopped_early,
            });
            for (name, value) in o.metrics.entries() {
                v[name] = json!(value);
            }
            v
        })
        .collect();
    let all: Vec<_> = outcomes.iter().map(|o| o.metrics).collect();
    let metrics_path = out.join("metrics.json");
    write_json(
        &metrics_path,
        &json!({ "task": task, "aggregation": rc.model.aggregation, "folds": per_fold, "summary": summarize(&all) }),
    )?;
    m.output(&metrics_path);
    Ok(())
}

fn evaluate(m: &mut RunManifest, model: &Path, data: &DataArgs, out: &Path) -> Result<()> {
    m.input(model)?;
    let ck = read_checkpoint(model)?;
    let task = ck.params.config().task;
    m.config = json!({ "model": ck.params.config(), "features": ck.features, "scaler": ck.scaler });
    let records = load(m, data, task)?;
    let samples = prepare_samples(&records, &ck.features)?;
    let preds = predict_samples(&ck.params, &ck.scaler, &samples)?;
    let targets: Vec<f64> = records.iter().map(|r| r.target).collect();
    let metrics = metrics(&preds, &targets, task)?;
    let metrics_path = out.join("metrics.json");
    write_json(
        &metrics_path,
        &json!({ "task": task, "count": records.len(), "metrics": metrics }),
    )?;
    m.output(&metrics_path);
    let pred_path = out.join("predictions.csv");
    write_predictions(&records, &preds, &pred_path)?;
    m.output(&pred_path);
    Ok(())
}

fn rotate_eval(
    m: &mut RunManifest,
    models: &[PathBuf],
    data: &DataArgs,
    mode: Mode,
    spec: &RotationSpec,
    ids: Option<&[String]>,
    out: &Path,
) -> Result<()> {
    spec.validate()?;
    let mut cks = Vec::new();
    for p in models {
        m.input(p)?;
        cks.push(read_checkpoint(p).with_context(|| format!("loading {}", p.display()))?);
    }
    let task = cks[0].params.config().task;
    if cks.iter().any(|c| c.params.config().task != task) {
        return Err(Error::Config("all models must share one task".into()).into());
    }
    m.config = json!({ "mode": format!("{mode:?}").to_lowercase(), "spec": spec, "model": cks[0].params.config() });
    m.seeds = json!({ "rotation": spec.seed });
    let records = load(m, data, task)?;
    let sweep_models: Vec<SweepModel<'_>> = cks
        .iter()
        .map(|c| SweepModel {
            params: &c.params,
            scaler: &c.scaler,
            features: &c.features,
            records: &records,
        })
        .collect();
    match mode {
        Mode::Sweep | Mode::Random => {
            let rows = if mode == Mode::Sweep {
                rotation_sweep(&sweep_models, spec)?
            } else {
                vec![random_row(&sweep_models, spec.seed)?]
            };
            let path = out.join("sweep.csv");
            write_sweep_csv(&rows, &path)?;
            m.output(&path);
        }
        Mode::Fine => {
            debug_assert_eq!(spec.mode, RotationMode::Fine);
            if cks.len() != 1 {
                return Err(Error::Config("fine mode takes exactly one model".into()).into());
            }
            let ck = &cks[0];
            let mut series = Vec::new();
            for r in &records {
                if ids.is_some_and(|want| !want.iter().any(|w| w == r.id())) {
                    continue;
                }
                series.push((
                    r.id().to_string(),
                    fine_sweep(&ck.params, &ck.scaler, &ck.features, &r.molecule, spec)?,
                ));
            }
            if series.is_empty() {
                return Err(Error::Dataset("no molecule matched --id".into()).into());
            }
            let path = out.join("fine.csv");
            write_fine_csv(&series, &path)?;
            m.output(&path);
        }
    }
    Ok(())
}

fn contrib(m: &mut RunManifest, model: &Path, sdf: &Path, agg: gcn3d::model::Aggregation, out: &Path) -> Result<()> {
    m.input(model)?;
    let ck = read_checkpoint(model)?;
    let trained = ck.params.config().aggregation;
    if trained != agg {
        return Err(Error::Config(format!(
            "--agg {agg} does not match the checkpoint, which uses {trained}"
        ))
        .into());
    }
    m.config = json!({ "aggregation": agg, "model": ck.params.config() });
    m.input(sdf)?;
    let mut maps = Vec::new();
    for r in read_sdf(sdf)? {
        let g = build_graph_tensors(&r.molecule, &ck.features)?;
        let (_, cache) = forward(&g, &ck.params)?;
        maps.push(contribution_map(&r.molecule.id, &g.atom_index, &cache, agg)?);
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_maps_json(&maps, out)?;
    m.output(out);
    Ok(())
}
