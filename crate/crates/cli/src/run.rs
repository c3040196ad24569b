use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use econodiag::comove::{self, Linkage};
use econodiag::dfa::{self, Coverage, DfaConfig};
use econodiag::lppl::{
    self, ExponentSign, FitConfig, LpplParams, OscWeighting, Oscillation, ScanConfig, Uncertainty,
    Variant,
};
use econodiag::series::{
    self, ColumnRef, CsvConfig, ReturnMode, RowPolicy, SeriesKind, TimeFormat, TimeSeries,
};
use econodiag::synth;
use econodiag::zipf::{self, Alphabet, WordWindows};

use crate::args::*;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Analysis(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Analysis(m) => f.write_str(m),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn analysis(e: econodiag::Error) -> Failure {
    Failure::Analysis(e.to_string())
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Collects result files under `--out` and finishes with the manifest.
struct Run {
    dir: PathBuf,
    subcommand: &'static str,
    inputs: Vec<Value>,
    outputs: Vec<String>,
}

impl Run {
    fn new(dir: &Path, subcommand: &'static str) -> Outcome<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            subcommand,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn read_input(&mut self, path: &Path) -> Outcome<String> {
        let bytes = fs::read(path)
            .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(json!({
            "path": path.display().to_string(),
            "sha256": format!("{:x}", Sha256::digest(&bytes)),
        }));
        String::from_utf8(bytes)
            .map_err(|_| Failure::Input(format!("{} is not UTF-8", path.display())))
    }

    fn write(&mut self, name: &str, contents: &str) -> Outcome<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish<A: Serialize>(mut self, args: &A) -> Outcome<()> {
        let manifest = json!({
            "tool": "econodiag",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "inputs": self.inputs,
            "config": args,
            "outputs": self.outputs,
        });
        let text = pretty(&manifest);
        self.write("manifest.json", &text)
    }
}

fn column(s: &str) -> ColumnRef {
    s.parse().expect("infallible")
}

fn header_has(text: &str, delimiter: char, name: &str) -> bool {
    text.lines()
        .find(|l| !l.starts_with('#') && !l.trim().is_empty())
        .is_some_and(|h| h.split(delimiter).any(|c| c.trim() == name))
}

#[allow(clippy::too_many_arguments)]
fn csv_config(
    text: &str,
    label: String,
    time_column: &str,
    value_column: &Option<String>,
    date_column: &Option<String>,
    delimiter: char,
    no_header: bool,
    time_format: TimeFormatArg,
    strict: bool,
) -> Outcome<CsvConfig> {
    if !delimiter.is_ascii() {
        return Err(Failure::Usage(
            "delimiter must be a single ASCII character".into(),
        ));
    }
    let value_column = match value_column {
        Some(v) => column(v),
        None if !no_header && header_has(text, delimiter, "value") => {
            ColumnRef::Name("value".into())
        }
        None => ColumnRef::Index(1),
    };
    let date_column = match date_column {
        Some(d) => Some(column(d)),
        None if !no_header
            && time_format == TimeFormatArg::Index
            && header_has(text, delimiter, "date") =>
        {
            Some(ColumnRef::Name("date".into()))
        }
        None => None,
    };
    Ok(CsvConfig {
        delimiter: delimiter as u8,
        has_header: !no_header,
        time_column: column(time_column),
        value_column,
        date_column,
        time_format: match time_format {
            TimeFormatArg::Iso => TimeFormat::Iso,
            TimeFormatArg::Index => TimeFormat::Index,
        },
        policy: if strict {
            RowPolicy::Fail
        } else {
            RowPolicy::Skip
        },
        label,
    })
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into())
}

fn load(run: &mut Run, a: &InputArgs) -> Outcome<TimeSeries> {
    let text = run.read_input(&a.input)?;
    let cfg = csv_config(
        &text,
        file_label(&a.input),
        &a.time_column,
        &a.value_column,
        &a.date_column,
        a.delimiter,
        a.no_header,
        a.time_format,
        a.strict,
    )?;
    let (s, report) = series::parse_price_csv(&text, &cfg)
        .map_err(|e| Failure::Input(format!("{}: {e}", a.input.display())))?;
    if report.skipped_invalid + report.skipped_duplicates > 0 {
        eprintln!(
            "note: {}: skipped {} invalid and {} duplicate rows",
            a.input.display(),
            report.skipped_invalid,
            report.skipped_duplicates
        );
    }
    Ok(s)
}

fn transform(s: &TimeSeries, t: Transform) -> Outcome<TimeSeries> {
    let input = |e: econodiag::Error| Failure::Input(format!("transform: {e}"));
    match t {
        Transform::None => Ok(s.clone()),
        Transform::Auto if s.kind() == SeriesKind::Return => Ok(s.clone()),
        Transform::Auto | Transform::LogReturns => {
            series::diff_returns(s, ReturnMode::Log).map_err(input)
        }
        Transform::Returns => series::diff_returns(s, ReturnMode::Simple).map_err(input),
        Transform::Log => series::to_log(s).map_err(input),
    }
}

pub fn dispatch(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Dfa(a) => cmd_dfa(&a),
        Command::Lppl(LpplCommand::Fit(a)) => cmd_lppl_fit(&a),
        Command::Lppl(LpplCommand::Scan(a)) => cmd_lppl_scan(&a),
        Command::Zipf(a) => cmd_zipf(&a),
        Command::Comove(a) => cmd_comove(&a),
        Command::Synth(SynthCommand::White(a)) => cmd_synth_noise(&a, false),
        Command::Synth(SynthCommand::Brownian(a)) => cmd_synth_noise(&a, true),
        Command::Synth(SynthCommand::Lppl(a)) => cmd_synth_lppl(&a),
    }
}

fn cmd_dfa(a: &DfaArgs) -> Outcome<()> {
    let mut run = Run::new(&a.out.out, "dfa")?;
    let s = transform(&load(&mut run, &a.input)?, a.transform)?;
    let cfg = DfaConfig {
        min_box: a.min_box,
        max_box_fraction: a.max_box_fraction,
        n_boxes: a.n_boxes,
        detrend_order: a.detrend_order,
        coverage: if a.forward_only {
            Coverage::Forward
        } else {
            Coverage::BothEnds
        },
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let fit_range = match (a.fit_min, a.fit_max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(0), hi.unwrap_or(usize::MAX))),
    };
    let profile = dfa::build_profile(s.values()).map_err(analysis)?;
    let whole = dfa::fluctuation_function(&profile, &cfg)
        .and_then(|r| dfa::fit_exponent(&r, fit_range))
        .map_err(analysis)?;
    if let Some(window) = a.window {
        let track = dfa::moving_dfa(&s, window, a.step, &cfg).map_err(analysis)?;
        run.write("alpha.csv", &track.to_csv())?;
    }
    let summary = json!({
        "label": s.label(),
        "kind": s.kind(),
        "n_obs": s.len(),
        "coherence": whole.coherence(),
        "result": whole,
    });
    run.write("dfa.json", &pretty(&summary))?;
    eprintln!("alpha = {:?} +/- {:?}", whole.alpha, whole.alpha_stderr);
    run.finish(a)
}

fn fit_config(a: &FitArgs) -> Outcome<FitConfig> {
    let cfg = FitConfig {
        tc_min_offset: a.tc_min_offset,
        tc_max_offset: a.tc_max_offset,
        tc_count: a.tc_count,
        w_band: (a.w_min, a.w_max),
        w_count: a.w_count,
        m_band: (a.m_min, a.m_max),
        m_count: a.m_count,
        refine: !a.no_refine,
        uncertainty: match a.uncertainty {
            UncertaintyArg::Profile => Uncertainty::Profile,
            UncertaintyArg::Jacobian => Uncertainty::Jacobian,
        },
        min_obs: a.min_obs,
        exponent: exponent(a.exponent),
        oscillation: if a.linear_lpo {
            Oscillation::Linear
        } else {
            Oscillation::Cosine
        },
        significance: a.significance,
        min_cycles: a.min_cycles,
        b_floor: a.b_floor,
        weighting: match a.weighting {
            WeightingArg::Envelope => OscWeighting::Envelope,
            WeightingArg::Uniform => OscWeighting::Uniform,
        },
        serial_correction: !a.no_serial_correction,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn exponent(e: ExponentArg) -> ExponentSign {
    match e {
        ExponentArg::Divergent => ExponentSign::Divergent,
        ExponentArg::Bounded => ExponentSign::Bounded,
    }
}

fn variant(v: VariantArg) -> Variant {
    match v {
        VariantArg::Log => Variant::Log,
        VariantArg::Power => Variant::Power,
    }
}

/// A bound given as an ISO date (needs dates in the input) or a time coordinate.
fn bound(s: &TimeSeries, text: &str, upper: bool) -> Outcome<f64> {
    if let Ok(t) = text.parse::<f64>() {
        return Ok(t);
    }
    let date = text.parse::<chrono::NaiveDate>().map_err(|_| {
        Failure::Usage(format!(
            "`{text}` is neither a number nor a YYYY-MM-DD date"
        ))
    })?;
    let dates = s
        .dates()
        .ok_or_else(|| Failure::Input("date bounds need a date column in the input".into()))?;
    let times = s.times();
    let k = dates.partition_point(|d| *d < date);
    Ok(if upper {
        // last observation on or before the date
        let k = dates.partition_point(|d| *d <= date);
        if k == 0 {
            times[0] - 1.0
        } else {
            times[k - 1]
        }
    } else if k < times.len() {
        times[k]
    } else {
        s.last_time() + 1.0
    })
}

fn fit_input(run: &mut Run, input: &InputArgs, a: &FitArgs) -> Outcome<TimeSeries> {
    let raw = load(run, input)?;
    let s = match a.transform {
        FitTransform::Log => {
            series::to_log(&raw).map_err(|e| Failure::Input(format!("log transform: {e}")))?
        }
        FitTransform::Level => raw,
    };
    if a.from.is_none() && a.to.is_none() {
        return Ok(s);
    }
    let lo = a
        .from
        .as_deref()
        .map(|t| bound(&s, t, false))
        .transpose()?
        .unwrap_or(s.first_time());
    let hi =
        a.to.as_deref()
            .map(|t| bound(&s, t, true))
            .transpose()?
            .unwrap_or(s.last_time());
    series::window(&s, lo, hi).map_err(analysis)
}

fn cmd_lppl_fit(a: &LpplFitArgs) -> Outcome<()> {
    let mut run = Run::new(&a.out.out, "lppl fit")?;
    let cfg = fit_config(&a.fit)?;
    let s = fit_input(&mut run, &a.input, &a.fit)?;
    let v = variant(a.fit.variant);
    let full = lppl::fit_full(&s, v, &cfg).map_err(analysis)?;
    let env = lppl::fit_envelope(&s, v, &cfg).map_err(analysis)?;
    let osc = lppl::fit_oscillation(&s, &env, &cfg);
    let rupture = osc
        .as_ref()
        .ok()
        .map(|o| lppl::estimate_rupture(&env, o, a.fit.k));
    let result = json!({
        "window": [s.first_time(), s.last_time()],
        "window_dates": s.dates().map(|d| [d[0].to_string(), d[d.len() - 1].to_string()]),
        "full": full,
        "envelope": env,
        "oscillation": osc.as_ref().ok(),
        "oscillation_error": osc.as_ref().err().map(|e| e.to_string()),
        "rupture": rupture.as_ref().and_then(|r| r.as_ref().ok()),
        "rupture_error": rupture.as_ref().and_then(|r| r.as_ref().err()).map(|e| e.to_string()),
    });
    run.write("fit.json", &pretty(&result))?;
    let p = &full.params;
    eprintln!(
        "full fit: t_c = {:.3} +/- {:.3}, w = {:.4}, C = {:.4}, converged = {}",
        p.t_c, full.tc_stderr, p.w, p.c, full.converged
    );
    if let Some(Ok(r)) = &rupture {
        eprintln!(
            "two-stage: envelope {:.3} +/- {:.3}, oscillation {:.3} +/- {:.3}, agrees = {}",
            r.tc_envelope.value,
            r.tc_envelope.stderr,
            r.tc_oscillation.value,
            r.tc_oscillation.stderr,
            r.agrees
        );
    }
    run.finish(a)
}

fn cmd_lppl_scan(a: &LpplScanArgs) -> Outcome<()> {
    let mut run = Run::new(&a.out.out, "lppl scan")?;
    let cfg = ScanConfig {
        fit: fit_config(&a.fit)?,
        variant: variant(a.fit.variant),
        first_window: a.first_window,
        step: a.step,
        k: a.fit.k,
        precision: a.precision,
        horizon: a.horizon,
    };
    let s = fit_input(&mut run, &a.input, &a.fit)?;
    let entries = lppl::scan_expanding(&s, &cfg).map_err(analysis)?;
    for e in entries.iter().filter(|e| e.warning) {
        let c = e
            .estimate
            .as_ref()
            .and_then(|r| r.tc_combined)
            .expect("warnings carry an estimate");
        println!(
            "WARNING window_end={} t_c={:.2} stderr={:.2}",
            e.window_end, c.value, c.stderr
        );
    }
    run.write("scan.csv", &lppl::scan_to_csv(&entries))?;
    run.write("scan.json", &pretty(&entries))?;
    run.finish(a)
}

fn cmd_zipf(a: &ZipfArgs) -> Outcome<()> {
    let mut run = Run::new(&a.out.out, "zipf")?;
    let s = transform(&load(&mut run, &a.input)?, a.transform)?;
    let alphabet = match a.alphabet {
        AlphabetArg::Binary => Alphabet::Binary,
        AlphabetArg::Ternary => Alphabet::Ternary,
    };
    let seq =
        zipf::encode_signs(&s, alphabet, a.threshold).map_err(|e| Failure::Input(e.to_string()))?;
    let windows = if a.disjoint {
        WordWindows::Disjoint
    } else {
        WordWindows::Sliding
    };
    let ranked = zipf::rank_words_with(&seq, a.m, windows).map_err(analysis)?;
    let fitted = zipf::zipf_exponent(&ranked).map_err(analysis)?;
    run.write("ranking.csv", &fitted.to_csv())?;
    run.write("zipf.json", &pretty(&fitted.summary()))?;
    eprintln!("slope = {:?}, r2 = {:?}", fitted.slope, fitted.r2);
    run.finish(a)
}

fn cmd_comove(a: &ComoveArgs) -> Outcome<()> {
    let mut run = Run::new(&a.out.out, "comove")?;
    let mut members = Vec::with_capacity(a.input.len());
    for path in &a.input {
        let input = InputArgs {
            input: path.clone(),
            time_column: a.time_column.clone(),
            value_column: a.value_column.clone(),
            date_column: a.date_column.clone(),
            delimiter: a.delimiter,
            no_header: a.no_header,
            time_format: a.time_format,
            strict: a.strict,
        };
        members.push(load(&mut run, &input)?.relabel(file_label(path)));
    }
    let panel = comove::align(&members).map_err(analysis)?;
    let panel = if a.levels {
        panel
    } else {
        panel
            .growth_rates()
            .map_err(|e| Failure::Input(format!("growth rates: {e}")))?
    };
    let trajectory = comove::rolling_mean_distance(&panel, a.window, a.step).map_err(analysis)?;
    run.write("trajectory.csv", &comove::trajectory_to_csv(&trajectory))?;
    let whole = comove::corr_matrix(
        &panel,
        (panel.times()[0], *panel.times().last().expect("non-empty")),
    )
    .map_err(analysis)?;
    let dist = comove::to_distance(&whole);
    run.write("distance.csv", &dist.to_csv())?;
    let linkage = match a.linkage {
        LinkageArg::Single => Linkage::Single,
        LinkageArg::Average => Linkage::Average,
    };
    match comove::hierarchical_cluster(&dist, linkage) {
        Ok(tree) => run.write("linkage.json", &pretty(&tree))?,
        Err(e) => eprintln!("note: no clustering: {e}"),
    }
    let report = json!({
        "labels": panel.labels,
        "dropped": panel.dropped,
        "n_common": panel.len(),
        "degenerate": whole.degenerate,
    });
    run.write("panel.json", &pretty(&report))?;
    run.finish(a)
}

fn write_series(run: &mut Run, s: &TimeSeries) -> Outcome<()> {
    run.write("series.csv", &series::to_csv_string(s))
}

fn cmd_synth_noise(a: &NoiseArgs, brownian: bool) -> Outcome<()> {
    let mut run = Run::new(
        &a.out.out,
        if brownian {
            "synth brownian"
        } else {
            "synth white"
        },
    )?;
    let s = if brownian {
        synth::gen_brownian(a.n, a.seed, a.sigma)
    } else {
        synth::gen_white(a.n, a.seed, a.sigma)
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    write_series(&mut run, &s)?;
    run.finish(a)
}

fn cmd_synth_lppl(a: &SynthLpplArgs) -> Outcome<()> {
    let mut run = Run::new(&a.out.out, "synth lppl")?;
    let mut p = match (a.variant, a.m) {
        (VariantArg::Log, None) => LpplParams::log(a.a, a.b, a.c, a.w, a.phi, a.tc),
        (VariantArg::Power, Some(m)) => LpplParams::power(a.a, a.b, a.c, m, a.w, a.phi, a.tc),
        (VariantArg::Log, Some(_)) => {
            return Err(Failure::Usage(
                "--m applies to the power variant only".into(),
            ))
        }
        (VariantArg::Power, None) => {
            return Err(Failure::Usage("the power variant needs --m".into()))
        }
    };
    p.exponent = exponent(a.exponent);
    if a.linear_lpo {
        p.oscillation = Oscillation::Linear;
    }
    let s = synth::gen_lppl(&p, a.n, a.noise, a.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    write_series(&mut run, &s)?;
    run.finish(a)
}
