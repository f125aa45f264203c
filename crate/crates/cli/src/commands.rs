use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use qsmc_core::dnn::{
    accuracy_contour, accuracy_sweep, logistic_fit, train_mlp_with, EtaPolicy, SweepGrid,
    TrainConfig,
};
use qsmc_core::persist::{
    load_metadata, load_model, save_metadata, save_model, sidecar_path, ModelMetadata,
};
use qsmc_core::security::{
    data_leakage, holevo_weight_leakage, leakage_report, loss_sweep, width_sweep, write_sweep_csv,
    HolevoInputs, SweepRow,
};
use qsmc_core::{load_mnist_with, Dataset, Formulation, Gain, MlpModel, ProtocolParams, Split};
use serde::Serialize;
use serde_json::json;

use crate::config::{envelope, CommonArgs, EtaPolicyKind, RunConfig};
use crate::exit::usage;
use crate::{FSweepArgs, LeakageArgs, LossArgs, TradeoffArgs, TrainArgs, WidthArgs};

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
        }
    }
    Ok(())
}

/// CSV to `--out`, summary JSON next to it and on stdout.
fn write_sweep<T: Serialize>(
    config: &RunConfig,
    rows: &[SweepRow],
    summary: T,
) -> anyhow::Result<()> {
    let out = config
        .paths
        .out
        .as_deref()
        .ok_or_else(|| usage("sweeps need --out for the CSV file"))?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_sweep_csv(BufWriter::new(file), rows)?;
    let doc = envelope(
        config,
        json!({ "csv": out, "rows": rows.len(), "summary": summary }),
    );
    write_json(Some(&out.with_extension("json")), &doc)?;
    write_json(None, &doc)
}

fn load_test(common: &CommonArgs, subset: usize) -> anyhow::Result<Dataset> {
    let data = load_mnist_with(&common.data, Split::Test, common.pixel_map)
        .with_context(|| format!("loading MNIST test split from {}", common.data.display()))?;
    Ok(if subset == 0 { data } else { data.head(subset) })
}

fn load_trained(common: &CommonArgs) -> anyhow::Result<MlpModel> {
    let path = common
        .model
        .as_deref()
        .ok_or_else(|| usage("this command needs --model"))?;
    let model = load_model(path).with_context(|| format!("loading {}", path.display()))?;
    let side = sidecar_path(path);
    if side.exists() {
        let meta = load_metadata(&side)?;
        if meta.pixel_map != common.pixel_map {
            return Err(usage(format!(
                "model was trained with --pixel-map {} but {} was requested",
                meta.pixel_map, common.pixel_map
            )));
        }
    }
    Ok(model)
}

fn eta_policy(common: &CommonArgs) -> anyhow::Result<EtaPolicy> {
    Ok(match common.eta_policy {
        EtaPolicyKind::Uniform => EtaPolicy::Uniform {
            modes: common.modes,
        },
        EtaPolicyKind::Empirical => EtaPolicy::empirical(&load_test(common, 0)?)?,
    })
}

/// 25 log-spaced points between 0.05 and 20.
pub fn default_f_grid() -> Vec<f64> {
    let (lo, hi, n) = (0.05f64, 20.0f64, 25);
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn train(a: TrainArgs) -> anyhow::Result<()> {
    let common = &a.common;
    let mut cfg = TrainConfig {
        seed: common.seed,
        ..TrainConfig::default()
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(h) = a.hidden {
        cfg.hidden = h;
    }
    let config = RunConfig::new(
        "train",
        common,
        json!({ "train_config": cfg, "train_limit": a.train_limit, "model_out": a.model_out }),
    );
    let mut train =
        load_mnist_with(&common.data, Split::Train, common.pixel_map).with_context(|| {
            format!(
                "loading MNIST training split from {}",
                common.data.display()
            )
        })?;
    if let Some(n) = a.train_limit {
        train = train.head(n);
    }
    let test = load_test(common, 0)?;

    let start = Instant::now();
    let (model, history) = train_mlp_with(&train, &cfg, |s| {
        eprintln!(
            "epoch {:>2}: loss {:.4} lr {:.4}",
            s.epoch, s.mean_loss, s.learning_rate
        )
    })?;
    let train_seconds = start.elapsed().as_secs_f64();
    let accuracy = model.accuracy(&test);

    save_model(&a.model_out, &model)
        .with_context(|| format!("writing {}", a.model_out.display()))?;
    let mut meta = ModelMetadata::for_model(&model, common.pixel_map);
    meta.train_config = Some(cfg);
    meta.test_accuracy = Some(accuracy);
    let side: PathBuf = sidecar_path(&a.model_out);
    save_metadata(&side, &meta)?;

    let body = json!({
        "model": a.model_out,
        "metadata": side,
        "test_accuracy": accuracy,
        "train_seconds": train_seconds,
        "epochs": history,
    });
    write_json(common.out.as_deref(), &envelope(&config, body))
}

pub fn leakage(a: LeakageArgs) -> anyhow::Result<()> {
    let common = &a.common;
    let config = RunConfig::new("leakage", common, json!({}));
    let params = common.params();
    let policy = eta_policy(common)?;
    let power = policy.symbol_power()?;
    let report = leakage_report(&params, power, common.measurements, common.formulation)?;

    let mut by_formulation = serde_json::Map::new();
    for f in [Formulation::Methods, Formulation::MainText] {
        let inputs = HolevoInputs::new(params.mu, report.eta)
            .with_transmittance(params.roundtrip_transmittance)
            .with_formulation(f);
        let v = match holevo_weight_leakage(&inputs) {
            Ok(bits) => json!({ "weight_bits_per_symbol": bits }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        by_formulation.insert(f.to_string(), v);
    }
    let selected = data_leakage(
        power.sqrt(),
        params.gain,
        common.measurements,
        common.adversary.k(),
    )?;
    let body = json!({
        "physical_scaling": params.physical_scaling(),
        "eta_policy": policy.name(),
        "report": report,
        "data_bits_per_symbol": selected,
        "weight_bits_by_formulation": by_formulation,
    });
    write_json(common.out.as_deref(), &envelope(&config, body))
}

pub fn sweep_tradeoff(a: TradeoffArgs) -> anyhow::Result<()> {
    let common = &a.common;
    let fs = a.fs.clone().unwrap_or_else(default_f_grid);
    let config = RunConfig::new(
        "sweep tradeoff",
        common,
        json!({ "mus": a.mus, "gains": a.gains, "fs": fs, "subset": a.subset, "target": a.target }),
    );
    let model = load_trained(common)?;
    let data = load_test(common, a.subset)?;
    let policy = eta_policy(common)?;
    let power = policy.symbol_power()?;
    let pts = accuracy_sweep(&model, &SweepGrid::Scaling(fs.clone()), &data, common.seed)?;
    let accs: Vec<f64> = pts.iter().map(|p| p.accuracy).collect();
    let fit = logistic_fit(&fs, &accs)?;

    let base = common.params();
    let mut rows = Vec::new();
    for &g in &a.gains {
        for &mu in &a.mus {
            let params = ProtocolParams {
                mu,
                gain: g,
                modes: policy.modes(),
                ..base
            };
            let report = leakage_report(&params, power, common.measurements, common.formulation)?;
            let acc = fit.eval(params.physical_scaling());
            rows.push(SweepRow::from_report(common.loss_db, &report, Some(acc)));
        }
    }
    let gains: Vec<Gain> = a.gains.iter().copied().filter(|g| !g.is_unity()).collect();
    let contour = match accuracy_contour(
        &fit,
        a.target,
        &gains,
        &policy,
        common.measurements,
        common.formulation,
    ) {
        Ok(c) => json!(c),
        Err(e) => json!({ "error": e.to_string() }),
    };
    write_sweep(
        &config,
        &rows,
        json!({ "fit": fit, "eta_policy": policy.name(), "f_sweep": pts, "contour": contour }),
    )
}

pub fn sweep_loss(a: LossArgs) -> anyhow::Result<()> {
    let common = &a.common;
    let config = RunConfig::new(
        "sweep loss",
        common,
        json!({ "losses": a.losses, "mu_max": a.mu_max }),
    );
    let policy = eta_policy(common)?;
    let base = ProtocolParams::new(common.mu, common.gain);
    let base = ProtocolParams {
        modes: policy.modes(),
        ..base
    };
    let target = base.physical_scaling();
    let pts = loss_sweep(
        &a.losses,
        &base,
        target,
        policy.symbol_power()?,
        common.measurements,
        common.formulation,
        a.mu_max,
    )?;
    let rows: Vec<SweepRow> = pts
        .iter()
        .map(|p| SweepRow::from_report(p.loss_db, &p.report, None))
        .collect();
    let saturated: Vec<f64> = pts
        .iter()
        .filter(|p| p.saturated)
        .map(|p| p.loss_db)
        .collect();
    write_sweep(
        &config,
        &rows,
        json!({ "target_f": target, "saturated_losses_db": saturated }),
    )
}

pub fn sweep_width(a: WidthArgs) -> anyhow::Result<()> {
    let common = &a.common;
    let config = RunConfig::new("sweep width", common, json!({ "widths": a.widths }));
    let reports = width_sweep(&a.widths, &common.params(), common.formulation)?;
    let rows: Vec<SweepRow> = reports
        .iter()
        .map(|r| SweepRow::from_report(common.loss_db, r, None))
        .collect();
    write_sweep(
        &config,
        &rows,
        json!({ "policy": "uniform 1/N, one measurement per row" }),
    )
}

pub fn sweep_f(a: FSweepArgs) -> anyhow::Result<()> {
    let common = &a.common;
    let fs = a.fs.clone().unwrap_or_else(default_f_grid);
    let config = RunConfig::new("sweep f", common, json!({ "fs": fs, "subset": a.subset }));
    let model = load_trained(common)?;
    let data = load_test(common, a.subset)?;
    let policy = eta_policy(common)?;
    let power = policy.symbol_power()?;
    let pts = accuracy_sweep(&model, &SweepGrid::Scaling(fs.clone()), &data, common.seed)?;
    let base = common.params();
    let rows = pts
        .iter()
        .map(|p| {
            let params = ProtocolParams {
                mu: p.mu,
                gain: p.gain,
                modes: policy.modes(),
                ..base
            };
            let r = leakage_report(&params, power, common.measurements, common.formulation)?;
            Ok(SweepRow::from_report(common.loss_db, &r, Some(p.accuracy)))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let accs: Vec<f64> = pts.iter().map(|p| p.accuracy).collect();
    let fit = match logistic_fit(&fs, &accs) {
        Ok(f) => json!({ "fit": f, "rmse": f.rmse, "rmse_within_2_percent": f.rmse <= 0.02 }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    write_sweep(
        &config,
        &rows,
        json!({ "n_test": data.len(), "logistic": fit }),
    )
}
