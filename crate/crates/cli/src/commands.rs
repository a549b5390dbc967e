//! Subcommand pipelines and their JSON / CSV / text renderings.

use crate::cache::{CacheError, ThetaCache};
use crate::{Cli, Command, EigenSource, Format, GlobalArgs};
use heegner_core::arith::{self, kronecker};
use heegner_core::binary_qf::{self, BinaryQfError, OrderParams};
use heegner_core::genus::{self, GenusError, GenusRecord};
use heegner_core::measures::{self, MeasureError};
use heegner_core::rational::{self, Rational};
use heegner_core::surjectivity::{
    self, EigenvalueEntry, EigenvalueTable, SearchOptions, SearchReport, SurjectivityError,
};
use heegner_core::ternary_qf::{TernaryError, TernaryForm};
use heegner_core::Execution;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

macro_rules! classify {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                if e.is_validation() { CliError::Validation(e.to_string()) } else { CliError::Invariant(e.to_string()) }
            }
        }
    )*};
}
classify!(GenusError, MeasureError, SurjectivityError);

impl From<BinaryQfError> for CliError {
    fn from(e: BinaryQfError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<TernaryError> for CliError {
    fn from(e: TernaryError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<CacheError> for CliError {
    fn from(e: CacheError) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// One result in every output format.
struct Rendered {
    json: String,
    csv: String,
    text: String,
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("serializable");
    s.push('\n');
    s
}

fn emit(global: &GlobalArgs, r: &Rendered) -> Result<(), CliError> {
    let body = match global.format {
        Format::Json => &r.json,
        Format::Csv => &r.csv,
        Format::Text => &r.text,
    };
    match &global.output {
        Some(path) => fs::write(path, body)
            .map_err(|e| CliError::Validation(format!("output path {} is not writable: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let exec = if cli.global.sequential { Execution::Sequential } else { Execution::default() };
    let (rendered, after) = match &cli.command {
        Command::Genus { ell, n } => (genus_cmd(*ell, *n, exec)?, None),
        Command::Classnum { d, c } => classnum_cmd(*d, *c)?,
        Command::Theta { class, ell, gram, bound } => {
            (theta_cmd(*class, *ell, gram.as_deref(), *bound, &cli.global, exec)?, None)
        }
        Command::Measure { ell, n, d, c } => (measure_cmd(*ell, *n, *d, *c, exec)?, None),
        Command::Converge { ell, d, c_max, prime, k_max } => {
            (converge_cmd(*ell, *d, *c_max, *prime, *k_max, exec)?, None)
        }
        Command::Eigen { ell, p_max, source } => eigen_cmd(*ell, *p_max, *source, exec)?,
        Command::Surject { ell, n, threshold } => surject_cmd(*ell, *n, threshold.as_deref(), exec)?,
    };
    emit(&cli.global, &rendered)?;
    after.map_or(Ok(()), Err)
}

fn gram_row(q: &TernaryForm) -> String {
    let g = q.gram();
    format!("{},{},{},{},{},{}", g[0][0], g[1][1], g[2][2], g[1][2], g[0][2], g[0][1])
}

const GRAM_HEADER: &str = "a11,a22,a33,a23,a13,a12";

fn gross(ell: u64, n: u64, exec: Execution) -> Result<GenusRecord, CliError> {
    Ok(genus::gross_genus_with(ell, n, exec)?)
}

fn genus_cmd(ell: u64, n: u64, exec: Execution) -> Result<Rendered, CliError> {
    let g = gross(ell, n, exec)?;
    let mut csv = format!("class,{GRAM_HEADER},automorphs,w\n");
    let mut text = format!(
        "Gross genus for ell = {ell}, N = {n}: det {}, level {}, {} classes, mass {}\nsymbol {}\n",
        g.disc,
        g.level,
        g.len(),
        rational::to_ratio_string(&g.mass),
        g.symbol
    );
    for (i, c) in g.classes.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{},{}", gram_row(&c.gram), c.automorphs, c.w);
        let _ = writeln!(text, "  [{i}] ({}) automorphs {} w {}", gram_row(&c.gram), c.automorphs, c.w);
    }
    Ok(Rendered { json: json(&g), csv, text })
}

#[derive(Serialize)]
struct ClassNumber {
    h: u64,
}

fn classnum_cmd(d: i64, c: u64) -> Result<(Rendered, Option<CliError>), CliError> {
    let params = OrderParams::new(d, c)?;
    let h = binary_qf::class_number_order(&params);
    let enumerated = binary_qf::class_number(params.discriminant())?;
    let r = Rendered {
        json: json(&ClassNumber { h }),
        csv: format!("D,c,h\n{d},{c},{h}\n"),
        text: format!("h(O) = {h} for D = {d}, c = {c} (u = {})\n", binary_qf::unit_count(&params)),
    };
    let after = (h != enumerated).then(|| {
        CliError::Invariant(format!("conductor formula gives {h} but reduced forms give {enumerated}"))
    });
    Ok((r, after))
}

#[derive(Serialize)]
struct ThetaOut<'a> {
    gram: TernaryForm,
    bound: u64,
    coeffs: &'a [u64],
}

fn theta_cmd(
    class: Option<usize>,
    ell: Option<u64>,
    gram: Option<&[i64]>,
    bound: u64,
    global: &GlobalArgs,
    exec: Execution,
) -> Result<Rendered, CliError> {
    let form = match (gram, class, ell) {
        (Some(e), _, _) if e.len() == 6 => TernaryForm::from_entries(e[0], e[1], e[2], e[3], e[4], e[5])?,
        (Some(e), _, _) => {
            return Err(CliError::Validation(format!("--gram needs 6 entries a11,a22,a33,a23,a13,a12, got {}", e.len())))
        }
        (None, Some(i), Some(ell)) => {
            let g = gross(ell, 1, exec)?;
            g.classes
                .get(i)
                .map(|c| c.gram)
                .ok_or_else(|| CliError::Validation(format!("class {i} out of range: genus has {} classes", g.len())))?
        }
        _ => return Err(CliError::Validation("theta needs --gram, or --ell with --class".into())),
    };
    if bound > heegner_core::ternary_qf::MAX_NORM {
        return Err(TernaryError::BoundTooLarge(bound).into());
    }
    let coeffs = match &global.cache_dir {
        Some(dir) => ThetaCache::new(dir).theta(&form, bound, exec)?.0,
        None => form.theta_coeffs_with(bound, exec)?,
    };
    let mut csv = String::from("n,r\n");
    let mut text = format!("theta series of ({}) up to {bound}\n", gram_row(&form));
    for (n, r) in coeffs.iter().enumerate() {
        let _ = writeln!(csv, "{n},{r}");
        if *r != 0 {
            let _ = writeln!(text, "  r({n}) = {r}");
        }
    }
    Ok(Rendered { json: json(&ThetaOut { gram: form, bound, coeffs: &coeffs }), csv, text })
}

fn measure_cmd(ell: u64, n: u64, d: i64, c: u64, exec: Execution) -> Result<Rendered, CliError> {
    if n != 1 {
        return Err(GenusError::UnsupportedLevel(n).into());
    }
    let params = OrderParams::new(d, c)?;
    measures::check_heegner_params(ell, n, &params)?;
    let g = gross(ell, n, exec)?;
    let report = measures::measure_report(&g, ell, &params, n)?;
    let mut csv = format!("class,{GRAM_HEADER},w,mu\n");
    let mut text = format!(
        "mu_(D={d},c={c}) for ell = {ell}; tv to mu_can = {}\n",
        rational::to_ratio_string(&report.tv_to_canonical)
    );
    for (i, cv) in report.classes.iter().enumerate() {
        let mu = rational::to_ratio_string(&cv.mu);
        let _ = writeln!(csv, "{i},{},{},{mu}", gram_row(&cv.gram), cv.w);
        let _ = writeln!(text, "  [{i}] w {} mu {mu}", cv.w);
    }
    Ok(Rendered { json: json(&report), csv, text })
}

#[derive(Serialize)]
struct ConvergePoint {
    c: u64,
    #[serde(serialize_with = "rational::serialize_ratio")]
    tv: Rational,
    /// For an inert prime `c`: `tv <= 2√c/(c+1)·tv(c = 1)`.
    ramanujan: Option<bool>,
}

#[derive(Serialize)]
struct ConvergeOut {
    ell: u64,
    #[serde(rename = "D")]
    d: i64,
    #[serde(serialize_with = "rational::serialize_ratio")]
    tv_base: Rational,
    series: Vec<ConvergePoint>,
    /// Along `p^k`: whether `tv` never increases.
    non_increasing: Option<bool>,
}

fn converge_cmd(
    ell: u64,
    d: i64,
    c_max: Option<u64>,
    prime: Option<u64>,
    k_max: Option<u32>,
    exec: Execution,
) -> Result<Rendered, CliError> {
    let conductors: Vec<u64> = match (c_max, prime, k_max) {
        (Some(m), None, None) => (1..=m).filter(|c| c % ell != 0).collect(),
        (None, Some(p), Some(k)) => {
            if !arith::is_prime(p) {
                return Err(CliError::Validation(format!("--prime {p} is not prime")));
            }
            (0..=k).map(|i| p.pow(i)).collect()
        }
        _ => return Err(CliError::Validation("converge needs --c-max, or --prime with --k-max".into())),
    };
    let base_params = OrderParams::new(d, 1)?;
    measures::check_heegner_params(ell, 1, &base_params)?;
    let g = gross(ell, 1, exec)?;
    let series = measures::tv_series(&g, ell, d, &conductors, exec)?;
    let base = measures::tv_series(&g, ell, d, &[1], Execution::Sequential)?.remove(0).1;
    let points: Vec<ConvergePoint> = series
        .into_iter()
        .map(|(c, tv)| {
            let inert_prime = arith::is_prime(c) && kronecker(d, c as i64) == -1;
            let ramanujan = inert_prime.then(|| measures::within_ramanujan_decay(&tv, &base, c));
            ConvergePoint { c, tv, ramanujan }
        })
        .collect();
    let non_increasing = prime.map(|_| points.windows(2).all(|w| w[1].tv <= w[0].tv));
    let out = ConvergeOut { ell, d, tv_base: base, series: points, non_increasing };
    let mut csv = String::from("c,tv,ramanujan\n");
    let mut text = format!("tv(mu_(D={d},c), mu_can) for ell = {ell}\n");
    for p in &out.series {
        let tv = rational::to_ratio_string(&p.tv);
        let flag = p.ramanujan.map_or(String::new(), |b| b.to_string());
        let _ = writeln!(csv, "{},{tv},{flag}", p.c);
        let _ = writeln!(text, "  c = {:>6}  tv = {tv} (~{:.6}) {flag}", p.c, rational::to_f64(&p.tv));
    }
    Ok(Rendered { json: json(&out), csv, text })
}

#[derive(Serialize)]
struct EigenRow {
    #[serde(flatten)]
    entry: EigenvalueEntry,
    #[serde(skip_serializing_if = "Option::is_none")]
    point_count: Option<i64>,
}

#[derive(Serialize)]
struct EigenOut {
    ell: u64,
    entries: Vec<EigenRow>,
}

fn eigen_cmd(
    ell: u64,
    p_max: u64,
    source: EigenSource,
    exec: Execution,
) -> Result<(Rendered, Option<CliError>), CliError> {
    let primes: Vec<u64> = arith::primes_up_to(p_max).into_iter().filter(|&p| p != ell).collect();
    let curve = || {
        surjectivity::reference_curve(ell)
            .map(|e| EigenvalueTable::from_curve(ell, e))
            .ok_or_else(|| CliError::Validation(format!("no reference curve for ell = {ell} (have 11, 17, 19)")))
    };
    let mut table = match source {
        EigenSource::Curve => curve()?,
        EigenSource::Theta | EigenSource::Both => EigenvalueTable::from_theta(&gross(ell, 1, exec)?, ell)?,
    };
    table.ensure_all(&primes, exec)?;
    let mut oracle = match source {
        EigenSource::Both => Some(curve()?),
        _ => None,
    };
    if let Some(o) = oracle.as_mut() {
        o.ensure_all(&primes, exec)?;
    }
    let entries: Vec<EigenRow> = table
        .entries()
        .into_iter()
        .map(|entry| EigenRow { point_count: oracle.as_ref().and_then(|o| o.get(entry.p)), entry })
        .collect();
    let mismatches: Vec<u64> =
        entries.iter().filter(|r| r.point_count.is_some_and(|a| a != r.entry.a)).map(|r| r.entry.p).collect();
    let mut csv = String::from("p,a,point_count\n");
    let mut text = format!("Hecke eigenvalues for ell = {ell}\n");
    for r in &entries {
        let pc = r.point_count.map_or(String::new(), |a| a.to_string());
        let _ = writeln!(csv, "{},{},{pc}", r.entry.p, r.entry.a);
        let _ = writeln!(text, "  a({}) = {} {:?} {pc}", r.entry.p, r.entry.a, r.entry.provenance);
    }
    let after = (!mismatches.is_empty())
        .then(|| CliError::Invariant(format!("theta and point-count eigenvalues differ at p = {mismatches:?}")));
    Ok((Rendered { json: json(&EigenOut { ell, entries }), csv, text }, after))
}

fn surject_cmd(
    ell: u64,
    n: u64,
    threshold: Option<&str>,
    exec: Execution,
) -> Result<(Rendered, Option<CliError>), CliError> {
    let threshold = threshold
        .map(|t| {
            rational::parse_ratio(t)
                .filter(|r| *r > Rational::from_integer(0.into()))
                .ok_or_else(|| CliError::Validation(format!("--threshold {t:?} is not a positive rational")))
        })
        .transpose()?;
    if n != 1 {
        return Err(GenusError::UnsupportedLevel(n).into());
    }
    let g = gross(ell, n, exec)?;
    let mut table = EigenvalueTable::from_theta(&g, ell)?;
    let report = surjectivity::dfs_search(&g, ell, n, &mut table, &SearchOptions { threshold, exec })?;
    let rendered = render_search(&report);
    let after = match (report.matches_published, report.published) {
        (Some(false), Some(p)) => Some(CliError::Invariant(format!(
            "ell = {ell}: found {} conductors with maximum {}, published {} / {}\nassumptions: {}",
            report.count,
            report.max.map_or("-".into(), |m| m.to_string()),
            p.count,
            p.max,
            serde_json::to_string_pretty(&report.assumptions).expect("serializable")
        ))),
        _ => None,
    };
    Ok((rendered, after))
}

fn render_search(r: &SearchReport) -> Rendered {
    let mut csv = String::from("c\n");
    for c in &r.conductors {
        let _ = writeln!(csv, "{c}");
    }
    let mut text = format!(
        "ell = {}: {} conductors, max {}\nthreshold {}  r_min {}  a {}\n",
        r.ell,
        r.count,
        r.max.map_or("-".into(), |m| m.to_string()),
        rational::to_ratio_string(&r.threshold),
        rational::to_ratio_string(&r.r_min),
        rational::to_ratio_string(&r.a),
    );
    for (v, level) in r.levels.iter().enumerate() {
        let _ = writeln!(text, "  S_{}: {} conductors", v + 1, level.len());
    }
    if let Some(p) = r.published {
        let _ = writeln!(text, "published {} / {}: {}", p.count, p.max, if r.matches_published == Some(true) { "match" } else { "MISMATCH" });
    }
    Rendered { json: json(r), csv, text }
}
