//! The subcommands, as functions from a network and a dataset to a report.
//!
//! Every per-point computation runs on a rayon pool and rows come back in
//! input order. A point whose computation errors gets its message in the
//! `error` column; the rest of the report is still produced.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use relu_regions::attacks::{
    deepfool, rlr_qp, warm_start, AttackConfig, DeepFoolConfig, Targets, WarmSource,
};
use relu_regions::oracle::{exact_min_adversarial, MAX_HIDDEN_UNITS};
use relu_regions::{Error, Network};

use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};
use crate::report::{improvement_rate, num, summarize, Report};

/// Where the rLR-QP search gets its starting perturbation.
#[derive(Debug, Clone, PartialEq)]
pub enum WarmMode {
    /// DeepFool, refined by bisection onto the boundary.
    DeepFool,
    None,
    /// One perturbation per point, in dataset order.
    Given(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct Options {
    /// Search configuration; `seed` is the base seed, point `i` uses `seed + i`.
    pub attack: AttackConfig,
    pub warm: WarmMode,
    pub deepfool: DeepFoolConfig,
    pub refine_iters: usize,
    /// Worker threads; `None` lets rayon decide.
    pub workers: Option<usize>,
}

impl Options {
    pub fn new(attack: AttackConfig) -> Self {
        let deepfool = DeepFoolConfig {
            bounds: attack.bounds.clone(),
            ..DeepFoolConfig::default()
        };
        Self {
            attack,
            warm: WarmMode::DeepFool,
            deepfool,
            refine_iters: 40,
            workers: None,
        }
    }

    fn point_seed(&self, id: usize) -> u64 {
        self.attack.seed.wrapping_add(id as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Oracle,
    RlrQp,
    DeepFool,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::RlrQp => "rlrqp",
            Method::DeepFool => "deepfool",
        }
    }

    /// Comma-separated method list, e.g. `oracle,rlrqp`.
    pub fn parse_list(text: &str) -> CliResult<Vec<Method>> {
        let mut out = Vec::new();
        for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let m = match name {
                "oracle" => Method::Oracle,
                "rlrqp" => Method::RlrQp,
                "deepfool" => Method::DeepFool,
                other => return Err(CliError::Usage(format!("unknown method {other:?}"))),
            };
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(CliError::Usage("no methods given".into()));
        }
        Ok(out)
    }
}

fn check_inputs(net: &Network, data: &Dataset, path: &Path, opts: &Options) -> CliResult<()> {
    opts.attack.validate()?;
    if !data.is_empty() && data.dim != net.input_dim() {
        return Err(CliError::data(
            path,
            format!(
                "points have {} features, network expects {}",
                data.dim,
                net.input_dim()
            ),
        ));
    }
    if let Some((row, p)) = data
        .points
        .iter()
        .enumerate()
        .find(|(_, p)| p.label >= net.num_classes())
    {
        return Err(CliError::data(
            path,
            format!(
                "row {}: label {} but the network has {} classes",
                row + 1,
                p.label,
                net.num_classes()
            ),
        ));
    }
    if let WarmMode::Given(list) = &opts.warm {
        if list.len() != data.len() {
            return Err(CliError::Usage(format!(
                "warm-start file has {} rows for {} points",
                list.len(),
                data.len()
            )));
        }
        if let Some(bad) = list.iter().position(|w| w.len() != net.input_dim()) {
            return Err(CliError::Usage(format!(
                "warm-start row {} has {} values, expected {}",
                bad + 1,
                list[bad].len(),
                net.input_dim()
            )));
        }
    }
    Ok(())
}

fn in_pool<R: Send>(workers: Option<usize>, job: impl FnOnce() -> R + Send) -> CliResult<R> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

fn ms(start: Instant) -> String {
    format!("{:.3}", start.elapsed().as_secs_f64() * 1e3)
}

/// DeepFool baseline plus the perturbation the search starts from.
struct Start {
    deepfool_norm: Option<f64>,
    warm: Option<Vec<f64>>,
    source: &'static str,
}

fn start_for(net: &Network, x: &[f64], id: usize, opts: &Options) -> relu_regions::Result<Start> {
    match &opts.warm {
        WarmMode::DeepFool => {
            let ws = warm_start(net, x, &opts.deepfool, opts.refine_iters)?;
            Ok(Start {
                deepfool_norm: ws.deepfool.as_deref().map(norm),
                warm: ws.delta,
                source: ws.source.as_str(),
            })
        }
        WarmMode::None => Ok(Start {
            deepfool_norm: deepfool(net, x, &opts.deepfool)?.as_deref().map(norm),
            warm: None,
            source: WarmSource::None.as_str(),
        }),
        WarmMode::Given(list) => Ok(Start {
            deepfool_norm: deepfool(net, x, &opts.deepfool)?.as_deref().map(norm),
            warm: Some(list[id].clone()),
            source: "file",
        }),
    }
}

pub const ATTACK_COLUMNS: &[&str] = &[
    "id",
    "label",
    "predicted",
    "warm_source",
    "warm_norm",
    "deepfool_norm",
    "rlrqp_norm",
    "success",
    "adversarial_class",
    "regions_checked",
    "qp_calls",
    "error",
    "wall_ms",
];

struct AttackRow {
    deepfool_norm: Option<f64>,
    rlrqp_norm: Option<f64>,
    cells: Vec<String>,
}

fn attack_point(net: &Network, data: &Dataset, id: usize, opts: &Options) -> AttackRow {
    let started = Instant::now();
    let p = &data.points[id];
    let run = || -> relu_regions::Result<(usize, Start, relu_regions::attacks::AttackResult)> {
        let predicted = net.classify(&p.x)?;
        let start = start_for(net, &p.x, id, opts)?;
        let cfg = AttackConfig {
            seed: opts.point_seed(id),
            ..opts.attack.clone()
        };
        let result = rlr_qp(net, &p.x, start.warm.as_deref(), &cfg)?;
        Ok((predicted, start, result))
    };
    let head = [id.to_string(), p.label.to_string()];
    match run() {
        Ok((predicted, start, r)) => {
            let rlrqp_norm = r.success.then_some(r.norm);
            let mut cells = head.to_vec();
            cells.extend([
                predicted.to_string(),
                start.source.to_string(),
                num(r.warm_start_norm),
                num(start.deepfool_norm),
                num(rlrqp_norm),
                r.success.to_string(),
                r.adversarial_class
                    .map(|c| c.to_string())
                    .unwrap_or_default(),
                r.regions_checked.to_string(),
                r.qp_calls.to_string(),
                String::new(),
                ms(started),
            ]);
            AttackRow {
                deepfool_norm: start.deepfool_norm,
                rlrqp_norm,
                cells,
            }
        }
        Err(e) => {
            let mut cells = head.to_vec();
            cells.extend(std::iter::repeat_n(String::new(), 5));
            cells.push("false".into());
            cells.extend(std::iter::repeat_n(String::new(), 3));
            cells.push(e.to_string());
            cells.push(ms(started));
            AttackRow {
                deepfool_norm: None,
                rlrqp_norm: None,
                cells,
            }
        }
    }
}

fn error_count(report: &Report) -> usize {
    report
        .values("error")
        .map_or(0, |v| v.iter().filter(|e| !e.is_empty()).count())
}

/// DeepFool, boundary refinement and rLR-QP on every point.
///
/// Summary: `deepfool_ratio` is the DeepFool norm over the rLR-QP norm on
/// points where both succeeded, `ir` the percentage of those points on which
/// rLR-QP is strictly smaller.
pub fn attack(net: &Network, data: &Dataset, path: &Path, opts: &Options) -> CliResult<Report> {
    check_inputs(net, data, path, opts)?;
    let rows: Vec<AttackRow> = in_pool(opts.workers, || {
        (0..data.len())
            .into_par_iter()
            .map(|id| attack_point(net, data, id, opts))
            .collect()
    })?;
    let mut report = Report::new("attack", ATTACK_COLUMNS);
    let ratios: Vec<Option<f64>> = rows
        .iter()
        .map(|r| Some(r.deepfool_norm? / r.rlrqp_norm?))
        .collect();
    let pairs: Vec<(Option<f64>, Option<f64>)> = rows
        .iter()
        .map(|r| (r.rlrqp_norm, r.deepfool_norm))
        .collect();
    report.rows = rows.into_iter().map(|r| r.cells).collect();
    report.push_summary("deepfool_ratio", summarize(&ratios).to_values("deepfool"));
    report.push_summary(
        "ir",
        vec!["rlrqp_vs_deepfool".into(), num(improvement_rate(&pairs))],
    );
    finish(report)
}

fn finish(mut report: Report) -> CliResult<Report> {
    let failures: Vec<(usize, usize)> = ["rlrqp_norm", "deepfool_norm", "oracle_norm"]
        .iter()
        .filter_map(|c| report.values(c))
        .map(|v| (v.iter().filter(|s| s.is_empty()).count(), v.len()))
        .collect();
    let names: Vec<&str> = ["rlrqp", "deepfool", "oracle"]
        .into_iter()
        .zip(["rlrqp_norm", "deepfool_norm", "oracle_norm"])
        .filter(|(_, c)| report.column(c).is_some())
        .map(|(m, _)| m)
        .collect();
    for (name, (failed, _)) in names.iter().zip(failures) {
        report.push_summary("failures", vec![name.to_string(), failed.to_string()]);
    }
    let errors = error_count(&report);
    report.push_summary("errors", vec![errors.to_string()]);
    Ok(report)
}

/// Norms from the exact oracle and the chosen attacks, with
/// `<method>_ratio = ‖δ_method‖ / ‖δ_oracle‖` when the oracle is included.
pub fn compare_oracle(
    net: &Network,
    data: &Dataset,
    path: &Path,
    opts: &Options,
    methods: &[Method],
    oracle_budget: u64,
) -> CliResult<Report> {
    check_inputs(net, data, path, opts)?;
    let with_oracle = methods.contains(&Method::Oracle);
    if with_oracle {
        let units = net.hidden_units();
        let cap = (oracle_budget as u128).min(1u128 << MAX_HIDDEN_UNITS);
        let patterns = 1u128 << units.min(127);
        if units > MAX_HIDDEN_UNITS || patterns > cap {
            return Err(Error::BudgetExceeded {
                hidden_units: units,
                patterns,
                cap,
            }
            .into());
        }
    }
    let attacks: Vec<Method> = methods
        .iter()
        .copied()
        .filter(|&m| m != Method::Oracle)
        .collect();
    let mut columns: Vec<String> = vec!["id".into(), "label".into(), "predicted".into()];
    for m in methods {
        columns.push(format!("{}_norm", m.as_str()));
    }
    if with_oracle {
        for m in &attacks {
            columns.push(format!("{}_ratio", m.as_str()));
        }
        columns.push("oracle_patterns".into());
    }
    if attacks.contains(&Method::RlrQp) {
        columns.push("regions_checked".into());
    }
    columns.push("error".into());
    columns.push("wall_ms".into());

    type Norms = Vec<Option<f64>>;
    let rows: Vec<(Norms, Vec<String>)> = in_pool(opts.workers, || {
        (0..data.len())
            .into_par_iter()
            .map(|id| {
                let started = Instant::now();
                let p = &data.points[id];
                let run = || -> relu_regions::Result<(usize, Norms, Option<u64>, Option<usize>)> {
                    let predicted = net.classify(&p.x)?;
                    let mut norms = Vec::new();
                    let mut patterns = None;
                    let mut regions = None;
                    for m in methods {
                        norms.push(match m {
                            Method::Oracle => {
                                let r = exact_min_adversarial(
                                    net,
                                    &p.x,
                                    opts.attack.bounds.as_ref(),
                                    oracle_budget,
                                )?;
                                patterns =
                                    Some(r.as_ref().map_or(1u64 << net.hidden_units(), |r| {
                                        r.patterns_enumerated
                                    }));
                                r.map(|r| r.norm)
                            }
                            Method::DeepFool => {
                                deepfool(net, &p.x, &opts.deepfool)?.as_deref().map(norm)
                            }
                            Method::RlrQp => {
                                let start = start_for(net, &p.x, id, opts)?;
                                let cfg = AttackConfig {
                                    seed: opts.point_seed(id),
                                    ..opts.attack.clone()
                                };
                                let r = rlr_qp(net, &p.x, start.warm.as_deref(), &cfg)?;
                                regions = Some(r.regions_checked);
                                r.success.then_some(r.norm)
                            }
                        });
                    }
                    Ok((predicted, norms, patterns, regions))
                };
                let mut cells = vec![id.to_string(), p.label.to_string()];
                match run() {
                    Ok((predicted, norms, patterns, regions)) => {
                        cells.push(predicted.to_string());
                        cells.extend(norms.iter().map(|&n| num(n)));
                        let mut ratios = Vec::new();
                        if with_oracle {
                            let oracle =
                                norms[methods.iter().position(|&m| m == Method::Oracle).unwrap()];
                            for (k, m) in methods.iter().enumerate() {
                                if *m != Method::Oracle {
                                    ratios.push(oracle.and_then(|o| Some(norms[k]? / o)));
                                }
                            }
                            cells.extend(ratios.iter().map(|&r| num(r)));
                            cells.push(patterns.map(|p| p.to_string()).unwrap_or_default());
                        }
                        if attacks.contains(&Method::RlrQp) {
                            cells.push(regions.map(|r| r.to_string()).unwrap_or_default());
                        }
                        cells.push(String::new());
                        cells.push(ms(started));
                        (ratios, cells)
                    }
                    Err(e) => {
                        let blanks = columns.len() - 4;
                        cells.extend(std::iter::repeat_n(String::new(), blanks));
                        cells.push(e.to_string());
                        cells.push(ms(started));
                        (
                            vec![None; if with_oracle { attacks.len() } else { 0 }],
                            cells,
                        )
                    }
                }
            })
            .collect()
    })?;

    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut report = Report::new("compare-oracle", &names);
    if with_oracle {
        for (k, m) in attacks.iter().enumerate() {
            let ratios: Vec<Option<f64>> = rows.iter().map(|(r, _)| r[k]).collect();
            report.push_summary("ratio", summarize(&ratios).to_values(m.as_str()));
        }
    }
    report.rows = rows.into_iter().map(|(_, c)| c).collect();
    if let (Some(a), Some(b)) = (report.values("rlrqp_norm"), report.values("deepfool_norm")) {
        let pairs: Vec<(Option<f64>, Option<f64>)> = a
            .iter()
            .zip(&b)
            .map(|(a, b)| (crate::report::parse_num(a), crate::report::parse_num(b)))
            .collect();
        let ir = improvement_rate(&pairs);
        report.push_summary("ir", vec!["rlrqp_vs_deepfool".into(), num(ir)]);
    }
    finish(report)
}

/// Seed of round `round` (1-based) for a point whose first round uses `seed`.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    seed.wrapping_add(((round - 1) as u64) << 32)
}

/// `rounds` applications of rLR-QP per point. Round 1 is exactly the
/// `attack` run; each later round starts from the previous perturbation and
/// only targets its class.
///
/// Summary per round: the mean norm over points that succeeded in round 1
/// and the improvement over the previous round's mean in percent.
/// `violations` counts points whose norm increased between rounds.
pub fn iterate(
    net: &Network,
    data: &Dataset,
    path: &Path,
    opts: &Options,
    rounds: usize,
) -> CliResult<Report> {
    if rounds == 0 {
        return Err(CliError::Usage("--rounds must be at least 1".into()));
    }
    check_inputs(net, data, path, opts)?;
    let mut columns: Vec<String> = ["id", "label", "predicted", "warm_source"]
        .into_iter()
        .map(String::from)
        .collect();
    columns.extend((1..=rounds).map(|r| format!("round_{r}_norm")));
    columns.extend(["regions_checked", "error", "wall_ms"].map(String::from));

    let rows: Vec<(Vec<Option<f64>>, Vec<String>)> = in_pool(opts.workers, || {
        (0..data.len())
            .into_par_iter()
            .map(|id| {
                let started = Instant::now();
                let p = &data.points[id];
                let run =
                    || -> relu_regions::Result<(usize, &'static str, Vec<Option<f64>>, usize)> {
                        let predicted = net.classify(&p.x)?;
                        let start = start_for(net, &p.x, id, opts)?;
                        let mut warm = start.warm;
                        let mut norms = Vec::with_capacity(rounds);
                        let mut regions = 0;
                        for round in 1..=rounds {
                            let mut cfg = AttackConfig {
                                seed: round_seed(opts.point_seed(id), round),
                                ..opts.attack.clone()
                            };
                            if round > 1 {
                                cfg.targets = Targets::WarmStartClass;
                            }
                            let r = rlr_qp(net, &p.x, warm.as_deref(), &cfg)?;
                            regions += r.regions_checked;
                            norms.push(r.success.then_some(r.norm));
                            if r.success {
                                warm = Some(r.delta);
                            }
                        }
                        Ok((predicted, start.source, norms, regions))
                    };
                let mut cells = vec![id.to_string(), p.label.to_string()];
                match run() {
                    Ok((predicted, source, norms, regions)) => {
                        cells.push(predicted.to_string());
                        cells.push(source.to_string());
                        cells.extend(norms.iter().map(|&n| num(n)));
                        cells.push(regions.to_string());
                        cells.push(String::new());
                        cells.push(ms(started));
                        (norms, cells)
                    }
                    Err(e) => {
                        cells.extend(std::iter::repeat_n(String::new(), rounds + 3));
                        cells.push(e.to_string());
                        cells.push(ms(started));
                        (vec![None; rounds], cells)
                    }
                }
            })
            .collect()
    })?;

    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut report = Report::new("iterate", &names);
    let complete: Vec<&Vec<Option<f64>>> = rows
        .iter()
        .map(|(n, _)| n)
        .filter(|n| n[0].is_some())
        .collect();
    let mut previous: Option<f64> = None;
    for round in 0..rounds {
        let values: Vec<Option<f64>> = complete.iter().map(|n| n[round]).collect();
        let mean = summarize(&values).mean;
        let improvement = match (previous, mean) {
            (Some(p), Some(m)) if p > 0.0 => Some(100.0 * (p - m) / p),
            _ => None,
        };
        report.push_summary(
            "round",
            vec![
                (round + 1).to_string(),
                "mean".into(),
                num(mean),
                "improvement_pct".into(),
                num(improvement),
            ],
        );
        previous = mean;
    }
    let violations = complete
        .iter()
        .filter(|n| {
            n.windows(2).any(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) => b > a,
                (Some(_), None) => true,
                _ => false,
            })
        })
        .count();
    report.push_summary("violations", vec![violations.to_string()]);
    report.push_summary(
        "failures",
        vec!["rlrqp".into(), (rows.len() - complete.len()).to_string()],
    );
    report.rows = rows.into_iter().map(|(_, c)| c).collect();
    report.push_summary("errors", vec![error_count(&report).to_string()]);
    Ok(report)
}

/// Human-readable network summary.
pub fn inspect_net(net: &Network) -> String {
    let units = net.hidden_units();
    let mut out = String::new();
    out.push_str(&format!("input dimension: {}\n", net.input_dim()));
    out.push_str(&format!("classes: {}\n", net.num_classes()));
    out.push_str(&format!("hidden layers: {}\n", net.depth()));
    out.push_str(&format!("hidden widths: {:?}\n", net.hidden_widths()));
    out.push_str(&format!("hidden units: {units}\n"));
    for (k, layer) in net.layers().iter().enumerate() {
        out.push_str(&format!(
            "layer {}: {} -> {}\n",
            k + 1,
            layer.input_dim(),
            layer.output_dim()
        ));
    }
    if units <= 127 {
        out.push_str(&format!("activation patterns: {}\n", 1u128 << units));
    } else {
        out.push_str(&format!("activation patterns: 2^{units}\n"));
    }
    out.push_str(&format!(
        "oracle: {} (cap {MAX_HIDDEN_UNITS} hidden units)\n",
        if units <= MAX_HIDDEN_UNITS {
            "available"
        } else {
            "unavailable"
        }
    ));
    out
}

/// Perturbations for `--warm-start file`: one CSV row of `d` floats per point.
pub fn load_warm_file(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => CliError::data(path, format!("{other:?}")),
        })?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::data(path, format!("row {}: bad value {f:?}", k + 1)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
