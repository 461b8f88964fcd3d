use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{RunConfig, TaskKind};
use super::task::{load_dataset, load_pod, load_sensors, load_standardizer, to_f64};
use crate::ensemble::{decompose_population, decompose_sample, project_uncertainty_physical, Ensemble};
use crate::error::Result;
use crate::nn::GaussianPrediction;
use crate::report::{pearson, write_csv, write_heatmap, write_table};
use crate::sst::metrics::{histogram_diff, shared_histograms, Histogram, DEFAULT_BINS};
use crate::sst::synth::heteroscedastic_sd;
use crate::sst::{build_forecast_windows, LandMask, EASTERN_PACIFIC};

const CHUNK: usize = 16;

pub(super) fn evaluate_run(cfg: &RunConfig, run_dir: &Path, ens: &Ensemble<f64>, out: &Path) -> Result<Value> {
    match cfg.task {
        TaskKind::Synthetic => synthetic(cfg, ens, out),
        TaskKind::Forecast => forecast(cfg, run_dir, ens, out),
        TaskKind::Reconstruct => reconstruct(cfg, run_dir, ens, out),
    }
}

/// Member predictions for rows `inputs` (each `input_len` long), split per sample.
/// Returns `[sample][member]`.
fn member_predictions(ens: &Ensemble<f64>, inputs: &[f64], input_len: usize) -> Result<Vec<Vec<GaussianPrediction<f64>>>> {
    let n = inputs.len() / input_len;
    let mut per_member = Vec::with_capacity(ens.len());
    for net in &ens.networks {
        per_member.push(net.forward_gaussian(inputs)?);
    }
    let out_dim = per_member[0].len() / n.max(1);
    Ok((0..n)
        .map(|i| {
            per_member
                .iter()
                .map(|p| GaussianPrediction {
                    mean: p.mean[i * out_dim..(i + 1) * out_dim].to_vec(),
                    variance: p.variance[i * out_dim..(i + 1) * out_dim].to_vec(),
                })
                .collect()
        })
        .collect())
}

fn decompose(preds: &[GaussianPrediction<f64>]) -> Result<crate::ensemble::UncertaintyDecomposition<f64>> {
    if preds.len() >= 2 {
        decompose_sample(preds)
    } else {
        decompose_population(preds)
    }
}

fn member_ids(ens: &Ensemble<f64>) -> Vec<String> {
    ens.records.iter().map(|r| r.id.to_string()).collect()
}

#[derive(Serialize)]
struct SyntheticRow {
    x: f64,
    in_support: bool,
    mean: f64,
    aleatoric: f64,
    epistemic: f64,
    total: f64,
    true_mean: f64,
    true_sd: f64,
}

fn synthetic(cfg: &RunConfig, ens: &Ensemble<f64>, out: &Path) -> Result<Value> {
    let [lo, hi] = cfg.data.x_range.unwrap_or([-1.0, 1.0]);
    let pad = 0.25 * (hi - lo);
    let n = 400;
    let xs: Vec<f64> = (0..n).map(|i| lo - pad + (hi - lo + 2.0 * pad) * i as f64 / (n - 1) as f64).collect();
    let preds = member_predictions(ens, &xs, 1)?;
    let mut rows = Vec::with_capacity(n);
    for (x, p) in xs.iter().zip(&preds) {
        let d = decompose(p)?;
        rows.push(SyntheticRow {
            x: *x,
            in_support: (lo..=hi).contains(x),
            mean: d.mean[0],
            aleatoric: d.aleatoric[0],
            epistemic: d.epistemic[0],
            total: d.total[0],
            true_mean: x.powi(3),
            true_sd: heteroscedastic_sd(*x),
        });
    }
    write_csv(&out.join("synthetic_predictions.csv"), &rows)?;
    let inside: Vec<&SyntheticRow> = rows.iter().filter(|r| r.in_support).collect();
    let outside: Vec<&SyntheticRow> = rows.iter().filter(|r| !r.in_support).collect();
    let corr = pearson(
        &inside.iter().map(|r| r.aleatoric.sqrt()).collect::<Vec<_>>(),
        &inside.iter().map(|r| r.true_sd).collect::<Vec<_>>(),
    );
    let mean = |v: &[&SyntheticRow], f: fn(&SyntheticRow) -> f64| v.iter().map(|r| f(r)).sum::<f64>() / v.len() as f64;
    let epi_in = mean(&inside, |r| r.epistemic);
    let epi_out = mean(&outside, |r| r.epistemic);
    let rmse_in = mean(&inside, |r| (r.mean - r.true_mean).powi(2)).sqrt();
    Ok(json!({
        "task": "synthetic",
        "members": member_ids(ens),
        "aleatoric_sd_correlation_inside": corr,
        "epistemic_mean_inside": epi_in,
        "epistemic_mean_outside": epi_out,
        "epistemic_ratio_outside_inside": epi_out / epi_in,
        "mean_rmse_inside": rmse_in,
    }))
}

/// Writes the histogram table and the ensemble-minus-member differences.
/// Returns, per member, the net difference over the lowest quarter of bins.
fn histogram_outputs(out: &Path, ensemble_rmse: &[f64], member_rmse: &[Vec<f64>], ids: &[String]) -> Result<Vec<i64>> {
    let mut sets: Vec<&[f64]> = vec![ensemble_rmse];
    sets.extend(member_rmse.iter().map(|v| v.as_slice()));
    let hists = shared_histograms(&sets, DEFAULT_BINS)?;
    let edges = hists[0].edges();
    let mut header = vec!["bin_lo".to_string(), "bin_hi".to_string(), "ensemble".to_string()];
    header.extend(ids.iter().map(|i| format!("member_{i}")));
    let rows: Vec<Vec<String>> = (0..DEFAULT_BINS)
        .map(|b| {
            let mut r = vec![edges[b].to_string(), edges[b + 1].to_string()];
            r.extend(hists.iter().map(|h| h.counts[b].to_string()));
            r
        })
        .collect();
    write_table(&out.join("rmse_histogram.csv"), &header, &rows)?;
    let diffs: Vec<Vec<i64>> = hists[1..]
        .iter()
        .map(|h: &Histogram| histogram_diff(&hists[0], h))
        .collect::<Result<_>>()?;
    let mut header = vec!["bin_lo".to_string(), "bin_hi".to_string()];
    header.extend(ids.iter().map(|i| format!("ensemble_minus_{i}")));
    let rows: Vec<Vec<String>> = (0..DEFAULT_BINS)
        .map(|b| {
            let mut r = vec![edges[b].to_string(), edges[b + 1].to_string()];
            r.extend(diffs.iter().map(|d| d[b].to_string()));
            r
        })
        .collect();
    write_table(&out.join("rmse_histogram_diff.csv"), &header, &rows)?;
    Ok(diffs.iter().map(|d| d[..DEFAULT_BINS / 4].iter().sum()).collect())
}

fn heatmaps(out: &Path, mask: &LandMask, fields: &[(&str, &[f64])]) -> Result<()> {
    for (name, f) in fields {
        write_heatmap(&out.join(format!("{name}.pgm")), mask.geometry(), &mask.unflatten(f)?, "degC")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct WeekRow {
    week: usize,
    model: String,
    region: &'static str,
    rmse: f64,
    rmse_window_mean: f64,
}

fn forecast(cfg: &RunConfig, run_dir: &Path, ens: &Ensemble<f64>, out: &Path) -> Result<Value> {
    let data = load_dataset(cfg)?;
    let basis = load_pod(run_dir)?;
    let scaler = load_standardizer(run_dir)?;
    let (_, test_weeks) = data.split(cfg.split.train_weeks.unwrap_or(0))?;
    let test = to_f64(test_weeks);
    let m = basis.mode_count();
    let n = basis.state_dim();
    let tau = cfg.split.tau;
    let region = EASTERN_PACIFIC.ocean_positions(&data.mask);

    // Truth in coefficient space plus the out-of-basis energy of each week.
    let coeffs = test.iter().map(|w| basis.project(w)).collect::<Result<Vec<_>>>()?;
    let resid: Vec<f64> = test
        .iter()
        .zip(&coeffs)
        .map(|(w, a)| {
            let y2: f64 = w.iter().zip(basis.mean()).map(|(v, d)| (v - d).powi(2)).sum();
            (y2 - a.iter().map(|c| c * c).sum::<f64>()).max(0.0)
        })
        .collect();
    let scaled: Vec<Vec<f64>> = coeffs.iter().map(|c| scaler.apply(c)).collect();
    let windows = build_forecast_windows(&scaled, tau)?;
    let count = windows.samples.len();
    let models = ens.len() + 1;
    // [model][lead] -> (pooled SE, sum of window RMSE) for global and region
    let mut global = vec![vec![(0.0, 0.0); tau]; models];
    let mut local = vec![vec![(0.0, 0.0); tau]; models];
    let mut point_se = vec![vec![0.0; n]; models];
    let mut mae = vec![0.0; n];
    let mut ale_sd = vec![0.0; n];
    let mut epi_sd = vec![0.0; n];
    let region_recon = |a: &[f64]| -> Vec<f64> {
        region
            .iter()
            .map(|&p| basis.mean()[p] + (0..m).map(|j| a[j] * basis.mode(j)[p]).sum::<f64>())
            .collect()
    };

    for start in (0..count).step_by(CHUNK) {
        let end = (start + CHUNK).min(count);
        let rows = &windows.samples.inputs[start * windows.samples.input_len..end * windows.samples.input_len];
        let preds = member_predictions(ens, rows, windows.samples.input_len)?;
        for (off, members) in preds.iter().enumerate() {
            let s = start + off;
            let physical: Vec<GaussianPrediction<f64>> = members
                .iter()
                .map(|p| GaussianPrediction {
                    mean: scaler.invert_mean(&p.mean),
                    variance: scaler.invert_variance(&p.variance),
                })
                .collect();
            let d = decompose(&physical)?;
            for lead in 0..tau {
                let week = s + tau + 1 + lead;
                let truth = &coeffs[week];
                let slice = |v: &[f64]| v[lead * m..(lead + 1) * m].to_vec();
                let mut model_means: Vec<Vec<f64>> = vec![slice(&d.mean)];
                model_means.extend(physical.iter().map(|p| slice(&p.mean)));
                let truth_region: Vec<f64> = region.iter().map(|&p| test[week][p]).collect();
                for (k, a) in model_means.iter().enumerate() {
                    let se = a.iter().zip(truth).map(|(x, y)| (x - y).powi(2)).sum::<f64>() + resid[week];
                    global[k][lead].0 += se;
                    global[k][lead].1 += (se / n as f64).sqrt();
                    let rse: f64 = region_recon(a).iter().zip(&truth_region).map(|(x, y)| (x - y).powi(2)).sum();
                    local[k][lead].0 += rse;
                    local[k][lead].1 += (rse / region.len().max(1) as f64).sqrt();
                }
                if lead == 0 {
                    let fields: Vec<Vec<f64>> = model_means.iter().map(|a| basis.reconstruct(a)).collect::<Result<_>>()?;
                    for (k, f) in fields.iter().enumerate() {
                        for ((acc, x), y) in point_se[k].iter_mut().zip(f).zip(&test[week]) {
                            *acc += (x - y).powi(2);
                        }
                    }
                    for ((acc, x), y) in mae.iter_mut().zip(&fields[0]).zip(&test[week]) {
                        *acc += (x - y).abs();
                    }
                    let ale = project_uncertainty_physical(&slice(&d.aleatoric), &basis, cfg.ensemble.projection)?;
                    ale_sd.iter_mut().zip(&ale).for_each(|(a, v)| *a += v);
                    if fields.len() > 2 {
                        let var = crate::ensemble::pointwise_sample_variance(&fields[1..])?;
                        epi_sd.iter_mut().zip(&var).for_each(|(a, v)| *a += v.sqrt());
                    }
                }
            }
        }
    }
    let c = count as f64;
    let names: Vec<String> = std::iter::once("ensemble".to_string()).chain(member_ids(ens)).collect();
    let mut rows = Vec::new();
    for (label, acc, pts) in [("global", &global, n), ("eastern_pacific", &local, region.len())] {
        for lead in 0..tau {
            for (k, name) in names.iter().enumerate() {
                rows.push(WeekRow {
                    week: lead + 1,
                    model: name.clone(),
                    region: label,
                    rmse: (acc[k][lead].0 / (c * pts.max(1) as f64)).sqrt(),
                    rmse_window_mean: acc[k][lead].1 / c,
                });
            }
        }
    }
    write_csv(&out.join("weekly_rmse.csv"), &rows)?;
    let rmse_fields: Vec<Vec<f64>> = point_se.iter().map(|v| v.iter().map(|s| (s / c).sqrt()).collect()).collect();
    let quartile = histogram_outputs(out, &rmse_fields[0], &rmse_fields[1..], &member_ids(ens))?;
    for v in [&mut mae, &mut ale_sd, &mut epi_sd] {
        v.iter_mut().for_each(|x| *x /= c);
    }
    heatmaps(out, &data.mask, &[("mae_week1", &mae), ("aleatoric_sd_week1", &ale_sd), ("epistemic_sd_week1", &epi_sd)])?;
    let ens_rows = |label: &str, pooled: bool| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.model == "ensemble" && r.region == label)
            .map(|r| if pooled { r.rmse } else { r.rmse_window_mean })
            .collect()
    };
    let member_mean_rmse = rmse_fields[1..]
        .iter()
        .map(|f| f.iter().copied().sum::<f64>() / n as f64)
        .collect::<Vec<_>>();
    Ok(json!({
        "task": "forecast",
        "members": member_ids(ens),
        "modes": m,
        "retained_energy": basis.retained_energy(),
        "test_windows": count,
        "eastern_pacific_rmse": ens_rows("eastern_pacific", true),
        "eastern_pacific_rmse_window_mean": ens_rows("eastern_pacific", false),
        "global_rmse": ens_rows("global", true),
        "mean_pointwise_rmse_members": member_mean_rmse,
        "mean_pointwise_rmse_ensemble": rmse_fields[0].iter().sum::<f64>() / n as f64,
        "lowest_quartile_histogram_diff": quartile,
        "mae_aleatoric_correlation": pearson(&mae, &ale_sd),
    }))
}

fn reconstruct(cfg: &RunConfig, run_dir: &Path, ens: &Ensemble<f64>, out: &Path) -> Result<Value> {
    let data = load_dataset(cfg)?;
    let sensors = load_sensors(run_dir)?;
    let (_, test_weeks) = data.split(cfg.split.train_weeks.unwrap_or(0))?;
    let n = data.mask.n_ocean();
    let models = ens.len() + 1;
    let mut point_se = vec![vec![0.0; n]; models];
    let mut rel = vec![0.0; models];
    let mut mae = vec![0.0; n];
    let mut ale_sd = vec![0.0; n];
    let mut epi_sd = vec![0.0; n];
    for chunk in test_weeks.chunks(CHUNK) {
        let fields = to_f64(chunk);
        let mut inputs = Vec::with_capacity(fields.len() * sensors.len());
        for f in &fields {
            inputs.extend(sensors.observe(f)?);
        }
        let preds = member_predictions(ens, &inputs, sensors.len())?;
        for (truth, members) in fields.iter().zip(&preds) {
            let d = decompose(members)?;
            let norm: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
            let means = std::iter::once(&d.mean).chain(members.iter().map(|p| &p.mean));
            for (k, mean) in means.enumerate() {
                let mut se = 0.0;
                for ((acc, x), y) in point_se[k].iter_mut().zip(mean).zip(truth) {
                    let e = (x - y).powi(2);
                    *acc += e;
                    se += e;
                }
                rel[k] += se.sqrt() / norm;
            }
            for i in 0..n {
                mae[i] += (d.mean[i] - truth[i]).abs();
                ale_sd[i] += d.aleatoric[i].sqrt();
                epi_sd[i] += d.epistemic[i].sqrt();
            }
        }
    }
    let c = test_weeks.len() as f64;
    rel.iter_mut().for_each(|r| *r /= c);
    for v in [&mut mae, &mut ale_sd, &mut epi_sd] {
        v.iter_mut().for_each(|x| *x /= c);
    }
    let rmse_fields: Vec<Vec<f64>> = point_se.iter().map(|v| v.iter().map(|s| (s / c).sqrt()).collect()).collect();
    let ids = member_ids(ens);
    let quartile = histogram_outputs(out, &rmse_fields[0], &rmse_fields[1..], &ids)?;
    let mut rows = vec![vec!["ensemble".to_string(), rel[0].to_string()]];
    rows.extend(ids.iter().zip(&rel[1..]).map(|(i, r)| vec![i.clone(), r.to_string()]));
    write_table(&out.join("relative_l2.csv"), &["model".into(), "relative_l2".into()], &rows)?;
    heatmaps(out, &data.mask, &[("mae", &mae), ("aleatoric_sd", &ale_sd), ("epistemic_sd", &epi_sd)])?;
    Ok(json!({
        "task": "reconstruct",
        "members": ids,
        "sensors": sensors.len(),
        "test_snapshots": test_weeks.len(),
        "relative_l2_ensemble": rel[0],
        "relative_l2_members": rel[1..].to_vec(),
        "lowest_quartile_histogram_diff": quartile,
        "mae_aleatoric_correlation": pearson(&mae, &ale_sd),
    }))
}
