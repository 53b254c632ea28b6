use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    autocorrelation, emit_report, error_summary, pearson, time_of_day_profile, default_bands, ErrorSummary, Metric,
    ReportBundle, Scatter,
};
use crate::data::features::harmonic_series;
use crate::data::{
    clean, generate_synthetic, ingest_csv, write_raw_csv, AnalyzerRecord, FeatureRow, FeatureTable, HarmonicOrder,
    Line, SplitFractions,
};
use crate::ensemble::{fit_gradient_booster, fit_random_forest, EnsembleModel};
use crate::error::{Error, Result};
use crate::filtersim::{load_cases, run_suite};
use crate::neural::{build_model, param_count, Model, Tensor};
use crate::train::{
    evaluate, prepare, prepare_with_scalers, train, Checkpoint, CheckpointMeta, Dataset, TrainConfig, TrainStatus,
};

use super::artifact::{BundleMember, EnsembleBundle, BUNDLE_MAGIC};
use super::config::PipelineConfig;
use super::{thousands, Command, ConfigArgs, ModelChoice};

const CONFIG_DUMP: &str = "effective_config.txt";
const FEATURES_FILE: &str = "features.csv";

pub(super) fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { days, seed, out, cfg } => {
            let mut flags = Vec::new();
            push(&mut flags, "data.days", days);
            push(&mut flags, "seed", seed);
            push_path(&mut flags, "paths.out", out);
            synth(&resolve(&cfg, flags)?)
        }
        Command::Analyze { input, out, cfg } => {
            let mut flags = Vec::new();
            push_path(&mut flags, "paths.raw", input);
            push_path(&mut flags, "paths.out", out);
            analyze(&resolve(&cfg, flags)?)
        }
        Command::Train {
            model,
            line,
            order,
            input,
            out,
            seed,
            cfg,
        } => {
            let mut flags = Vec::new();
            push(&mut flags, "model", model);
            push(&mut flags, "line", line);
            push(&mut flags, "order", order);
            push_path(&mut flags, "paths.raw", input);
            push_path(&mut flags, "paths.out", out);
            push(&mut flags, "seed", seed);
            train_cmd(&resolve(&cfg, flags)?)
        }
        Command::Evaluate {
            checkpoint,
            input,
            out,
            cfg,
        } => {
            let mut flags = Vec::new();
            if !checkpoint.is_empty() {
                let list: Vec<String> = checkpoint.iter().map(|p| p.display().to_string()).collect();
                flags.push(("paths.checkpoints", list.join(", ")));
            }
            push_path(&mut flags, "paths.raw", input);
            push_path(&mut flags, "paths.out", out);
            evaluate_cmd(&resolve(&cfg, flags)?)
        }
        Command::Simulate {
            features,
            line,
            out,
            cfg,
        } => {
            let mut flags = Vec::new();
            push_path(&mut flags, "paths.features", features);
            push(&mut flags, "sim.line", line);
            push_path(&mut flags, "paths.out", out);
            simulate(&resolve(&cfg, flags)?)
        }
    }
}

fn push<T: ToString>(flags: &mut Vec<(&'static str, String)>, key: &'static str, v: Option<T>) {
    if let Some(v) = v {
        flags.push((key, v.to_string()));
    }
}

fn push_path(flags: &mut Vec<(&'static str, String)>, key: &'static str, v: Option<PathBuf>) {
    if let Some(p) = v {
        flags.push((key, p.display().to_string()));
    }
}

fn resolve(args: &ConfigArgs, flags: Vec<(&'static str, String)>) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    for file in &args.config {
        cfg.apply_file(file).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            other => other,
        })?;
    }
    for kv in &args.set {
        cfg.apply_override(kv)?;
    }
    for (k, v) in flags {
        cfg.set(k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("no {what} given")))
}

fn out_dir(cfg: &PipelineConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn load_records(cfg: &PipelineConfig) -> Result<Vec<AnalyzerRecord>> {
    let path = required(&cfg.raw_path, "input CSV (--in or paths.raw)")?;
    let ingested = ingest_csv(path)?;
    let rejected = ingested.rejects.len();
    let outcome = clean(ingested.records, &cfg.clean);
    println!(
        "read {}: {} records kept, {} removed by cleaning, {} rows rejected",
        path.display(),
        outcome.kept.len(),
        outcome.removed.len(),
        rejected
    );
    if outcome.kept.is_empty() {
        return Err(Error::invalid(format!("{} holds no usable records", path.display())));
    }
    Ok(outcome.kept)
}

fn synth(cfg: &PipelineConfig) -> Result<()> {
    let out = required(&cfg.out, "output file (--out or paths.out)")?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let records = generate_synthetic(cfg.days, cfg.seed, &cfg.profile)?;
    write_raw_csv(out, &records)?;
    write(&out.with_extension("config.txt"), &cfg.dump())?;
    let unit = if cfg.days == 1 { "day" } else { "days" };
    println!("wrote {} records ({} {unit}, seed {}) to {}", records.len(), cfg.days, cfg.seed, out.display());
    Ok(())
}

fn analyze(cfg: &PipelineConfig) -> Result<()> {
    let records = load_records(cfg)?;
    let dir = out_dir(cfg)?;
    let series = harmonic_series(&records, cfg.line, cfg.order);
    let acf = autocorrelation(&series, cfg.max_lag)?;
    let bands = default_bands();
    let profiles = Line::ALL
        .iter()
        .map(|&l| time_of_day_profile(&records, Metric::ThdI(l), &bands))
        .collect::<Result<Vec<_>>>()?;
    let mut scatters = Vec::new();
    for l in Line::ALL {
        let current: Vec<f64> = records.iter().map(|r| r.line(l).current).collect();
        let h = harmonic_series(&records, l, cfg.order);
        scatters.push(Scatter {
            name: format!("current_vs_{}_{l}", cfg.order),
            x_label: format!("current {l} (A)"),
            y_label: format!("{} {l} (A)", cfg.order),
            pearson: pearson(&current, &h).ok(),
            points: current.into_iter().zip(h).collect(),
        });
    }
    let bundle = ReportBundle {
        summaries: &[],
        acf: Some(&acf),
        profiles: &profiles,
        scatters: &scatters,
    };
    let written = emit_report(&bundle, &dir)?;
    write(&dir.join(CONFIG_DUMP), &cfg.dump())?;
    println!("{} lag 1 autocorrelation {:.4}", cfg.order, acf.at(1));
    for p in &profiles {
        let mut line = format!("{}:", p.metric);
        for b in &p.bands {
            let _ = write!(line, " {} {:.3}", b.band.name, b.mean);
        }
        println!("{line}");
    }
    println!("wrote {} files to {}", written.len() + 1, dir.display());
    Ok(())
}

fn split_tag(s: &SplitFractions) -> String {
    format!("{} {} {}", s.train, s.val, s.test)
}

fn artifact_stem(cfg: &PipelineConfig, per_order: bool) -> String {
    let mut stem = format!("{}_L{}", cfg.model, cfg.line.number());
    if per_order {
        let _ = write!(stem, "_h{}", cfg.order.order());
    }
    stem
}

fn train_cmd(cfg: &PipelineConfig) -> Result<()> {
    match cfg.model.neural_kind() {
        Some(kind) => {
            let mut spec = build_model(kind);
            if kind.is_sequence() {
                spec = spec.with_window(cfg.window)?;
            }
            println!("model {}: trainable parameters: {}", cfg.model, thousands(param_count(&spec)?));
            let records = load_records(cfg)?;
            let dir = out_dir(cfg)?;
            let stem = artifact_stem(cfg, true);
            let data = prepare(&records, cfg.line, cfg.order, kind.is_sequence(), cfg.window, cfg.split)?;
            let train_set = data.train.strided(cfg.stride);
            let val_set = data.val.strided(cfg.stride);
            let mut tags = BTreeMap::new();
            tags.insert("model".to_string(), cfg.model.to_string());
            tags.insert("line".to_string(), cfg.line.number().to_string());
            tags.insert("order".to_string(), cfg.order.order().to_string());
            tags.insert("window".to_string(), cfg.window.to_string());
            tags.insert("split".to_string(), split_tag(&cfg.split));
            let ckpt_path = dir.join(format!("{stem}.ckpt"));
            let tc = TrainConfig {
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                adam: cfg.adam,
                seed: cfg.seed,
                checkpoint_path: Some(ckpt_path.clone()),
                checkpoint_meta: CheckpointMeta {
                    input_scaler: Some(data.input_scaler.clone()),
                    target_scaler: Some(data.target_scaler.clone()),
                    tags,
                },
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let model = Model::init(spec, &mut rng)?;
            println!("training on {} rows, validating on {} rows", train_set.len(), val_set.len());
            let outcome = train(model, &train_set, &val_set, &tc)?;
            outcome.checkpoint.save(&ckpt_path)?;
            write(&dir.join(format!("{stem}_log.csv")), &outcome.log.to_csv())?;
            write(&dir.join(format!("{stem}.config.txt")), &cfg.dump())?;
            if let TrainStatus::Diverged { epoch } = outcome.status {
                eprintln!("warning: training diverged in epoch {epoch}; kept the best earlier checkpoint");
            }
            println!(
                "best epoch {} (validation MSE {:e}); checkpoint {}",
                outcome.checkpoint.epoch,
                outcome.checkpoint.monitor,
                ckpt_path.display()
            );
            Ok(())
        }
        None => train_ensemble(cfg),
    }
}

fn flat(x: &Tensor) -> Result<&ndarray::Array2<f64>> {
    match x {
        Tensor::Flat(a) => Ok(a),
        Tensor::Seq(_) => Err(Error::invalid("tree models take tabular inputs")),
    }
}

fn scaled_mse(model: &EnsembleModel, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Ok(f64::NAN);
    }
    let pred = model.predict(flat(&d.x)?.view())?;
    Ok(pred.iter().zip(d.y.column(0)).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / d.len() as f64)
}

fn train_ensemble(cfg: &PipelineConfig) -> Result<()> {
    let forest = match cfg.model {
        ModelChoice::RandomForest => true,
        ModelChoice::GradientBooster => false,
        _ => cfg.line != Line::L3,
    };
    let orders: Vec<HarmonicOrder> = if forest { HarmonicOrder::ALL.to_vec() } else { vec![cfg.order] };
    let records = load_records(cfg)?;
    let dir = out_dir(cfg)?;
    let stem = artifact_stem(cfg, !forest);
    let mut members = Vec::new();
    let mut log = String::new();
    for order in orders {
        let data = prepare(&records, cfg.line, order, false, cfg.window, cfg.split)?;
        let tr = data.train.strided(cfg.stride);
        let x = flat(&tr.x)?;
        let y = tr.y.column(0).to_vec();
        let model = if forest {
            let fc = cfg.ensemble.forest(cfg.line, cfg.seed);
            println!("{order}: random forest with {} trees on {} rows", fc.n_estimators, tr.len());
            EnsembleModel::Forest(fit_random_forest(x.view(), &y, &fc)?)
        } else {
            let bc = cfg.ensemble.booster(cfg.seed);
            println!("{order}: gradient booster with {} stages on {} rows", bc.n_estimators, tr.len());
            let fit = fit_gradient_booster(x.view(), &y, &bc)?;
            log.push_str("stage,train_mse\n");
            for (i, m) in fit.train_mse.iter().enumerate() {
                let _ = writeln!(log, "{i},{m:e}");
            }
            EnsembleModel::Booster(fit.model)
        };
        println!("{order}: scaled validation MSE {:e}", scaled_mse(&model, &data.val)?);
        members.push(BundleMember {
            order,
            input_scaler: data.input_scaler,
            target_scaler: data.target_scaler,
            model,
        });
    }
    let bundle = EnsembleBundle {
        model: cfg.model,
        line: cfg.line,
        window: cfg.window,
        split: cfg.split,
        members,
    };
    let path = dir.join(format!("{stem}.ens"));
    bundle.save(&path)?;
    if !log.is_empty() {
        write(&dir.join(format!("{stem}_log.csv")), &log)?;
    }
    write(&dir.join(format!("{stem}.config.txt")), &cfg.dump())?;
    println!("artifact {}", path.display());
    Ok(())
}

/// Test-split predictions of one model for one line and order.
struct Scored {
    line: Line,
    order: HarmonicOrder,
    test_rows: Vec<usize>,
    predictions: Vec<f64>,
    summary: ErrorSummary,
}

fn tag<'a>(ckpt: &'a Checkpoint, key: &str, path: &Path) -> Result<&'a str> {
    ckpt.tag(key)
        .ok_or_else(|| Error::corrupt(path, format!("checkpoint lacks the {key} tag")))
}

fn parse_split(s: &str, path: &Path) -> Result<SplitFractions> {
    let v: Vec<f64> = s
        .split(' ')
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| Error::corrupt(path, "bad split tag"))?;
    match v[..] {
        [train, val, test] => Ok(SplitFractions { train, val, test }),
        _ => Err(Error::corrupt(path, "bad split tag")),
    }
}

fn score_checkpoint(path: &Path, records: &[AnalyzerRecord], cfg: &PipelineConfig) -> Result<Vec<Scored>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BUNDLE_MAGIC.as_bytes()) {
        let text = String::from_utf8(bytes).map_err(|_| Error::corrupt(path, "not UTF-8"))?;
        let bundle = EnsembleBundle::from_text(&text, path)?;
        let mut out = Vec::new();
        for m in &bundle.members {
            let data = prepare_with_scalers(
                records,
                bundle.line,
                m.order,
                false,
                bundle.window,
                bundle.split,
                &m.input_scaler,
                &m.target_scaler,
            )?;
            let scaled = m.model.predict(flat(&data.test.x)?.view())?;
            let predictions: Vec<f64> = scaled.iter().map(|&z| m.target_scaler.invert_value(0, z)).collect();
            let name = format!("{}_{}_{}", bundle.model, bundle.line, m.order);
            let summary = error_summary(&name, &data.test.actual, &predictions, cfg.bins)?;
            out.push(Scored {
                line: bundle.line,
                order: m.order,
                test_rows: data.test_rows,
                predictions,
                summary,
            });
        }
        return Ok(out);
    }
    let ckpt = Checkpoint::from_bytes(&bytes, path)?;
    let bad = |what: &str| Error::corrupt(path, format!("bad {what} tag"));
    let line = tag(&ckpt, "line", path)?
        .parse()
        .ok()
        .and_then(|n| Line::from_number(n).ok())
        .ok_or_else(|| bad("line"))?;
    let order = tag(&ckpt, "order", path)?
        .parse()
        .ok()
        .and_then(|n| HarmonicOrder::from_order(n).ok())
        .ok_or_else(|| bad("order"))?;
    let window: usize = tag(&ckpt, "window", path)?.parse().map_err(|_| bad("window"))?;
    let split = parse_split(tag(&ckpt, "split", path)?, path)?;
    let name = ckpt.tag("model").map_or_else(|| ckpt.spec.kind.to_string(), str::to_string);
    let (Some(input), Some(target)) = (&ckpt.meta.input_scaler, &ckpt.meta.target_scaler) else {
        return Err(Error::corrupt(path, "checkpoint lacks its scalers"));
    };
    let model = ckpt.model()?;
    let sequence = ckpt.spec.kind.is_sequence();
    let data = prepare_with_scalers(records, line, order, sequence, window, split, input, target)?;
    let ev = evaluate(&model, &data.test, target, &format!("{name}_{line}_{order}"), cfg.bins)?;
    Ok(vec![Scored {
        line,
        order,
        test_rows: data.test_rows,
        predictions: ev.predictions,
        summary: ev.summary,
    }])
}

fn evaluate_cmd(cfg: &PipelineConfig) -> Result<()> {
    if cfg.checkpoints.is_empty() {
        return Err(Error::Config("no checkpoint given (--checkpoint or paths.checkpoints)".into()));
    }
    let records = load_records(cfg)?;
    let dir = out_dir(cfg)?;
    let mut scored: Vec<Scored> = Vec::new();
    for path in &cfg.checkpoints {
        for s in score_checkpoint(path, &records, cfg)? {
            if scored.iter().any(|o| (o.line, o.order) == (s.line, s.order)) {
                return Err(Error::Config(format!("two models predict {} {}", s.line, s.order)));
            }
            if let Some(first) = scored.first() {
                if first.test_rows != s.test_rows {
                    return Err(Error::Config(format!(
                        "{} uses a different window or split than the first checkpoint",
                        path.display()
                    )));
                }
            }
            scored.push(s);
        }
    }
    let rows = &scored[0].test_rows;
    let mut table = FeatureTable {
        rows: rows.iter().map(|&r| FeatureRow::from_record(&records[r])).collect(),
    };
    for s in &scored {
        for (row, &p) in table.rows.iter_mut().zip(&s.predictions) {
            row.lines[s.line.index()].predicted[s.order.index()] = p;
        }
    }
    let summaries: Vec<ErrorSummary> = scored.iter().map(|s| s.summary.clone()).collect();
    let bundle = ReportBundle {
        summaries: &summaries,
        ..ReportBundle::default()
    };
    let written = emit_report(&bundle, &dir)?;
    table.write_csv(dir.join(FEATURES_FILE))?;
    write(&dir.join(CONFIG_DUMP), &cfg.dump())?;
    for s in &summaries {
        println!(
            "{}: mean {:.3}% p95 {:.3}% over {} rows ({} with zero actual left out)",
            s.name,
            s.mean,
            s.p95,
            s.count(),
            s.excluded
        );
    }
    println!("wrote {} files to {}", written.len() + 2, dir.display());
    Ok(())
}

fn simulate(cfg: &PipelineConfig) -> Result<()> {
    let path = required(&cfg.features_path, "feature CSV (--features or paths.features)")?;
    let mut cases = load_cases(path)?;
    if let Some(l) = cfg.sim_line {
        cases.retain(|c| c.line == l);
    }
    let dir = out_dir(cfg)?;
    let report = run_suite(&cases, &cfg.sim)?;
    let written = report.write(&dir)?;
    write(&dir.join(CONFIG_DUMP), &cfg.dump())?;
    let mut improved = 0;
    let mut runnable = 0;
    for row in &report.rows {
        let c = &row.case;
        match row.thd {
            Some(t) => {
                runnable += 1;
                improved += (t.post < t.pre) as usize;
                println!(
                    "case {} {}: THD {:.2}% -> {:.2}% (ideal {:.2}%){}",
                    c.case,
                    c.line,
                    t.pre,
                    t.post,
                    t.ideal,
                    flags_note(&row.flags)
                );
            }
            None => println!("case {} {}: skipped (no fundamental)", c.case, c.line),
        }
    }
    println!("{improved}/{runnable} cases improved; wrote {} files to {}", written.len() + 1, dir.display());
    Ok(())
}

fn flags_note(flags: &[crate::filtersim::Flag]) -> String {
    if flags.is_empty() {
        String::new()
    } else {
        let names: Vec<&str> = flags.iter().map(|f| f.as_str()).collect();
        format!(" [{}]", names.join(", "))
    }
}
