//! CSV and JSON encodings of histograms, events and feasibility maps.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

use crate::analysis::{FeasibilityMap, Histogram};
use crate::error::{Error, Result};
use crate::models::{ScatterAngles, TWO_PI};
use crate::sampling::{OrthSign, PairEvent, PolarizationFrame};

pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count,density,analytic";
pub const EVENT_HEADER: &str = "big_phi,orth_sign,chi1,phi1,chi2,phi2,fixed_phi1,fixed_phi2";
pub const FEASIBILITY_HEADER: &str = "b_ff,b_gg,min_density,feasible";
const SUMMARY_PREFIX: &str = "# summary:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format `{other}`"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SummaryValue {
    Real(f64),
    Int(u64),
    Text(String),
}

impl SummaryValue {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            SummaryValue::Real(v) => Some(*v),
            SummaryValue::Int(v) => Some(*v as f64),
            SummaryValue::Text(_) => None,
        }
    }

    fn csv(&self) -> String {
        match self {
            SummaryValue::Real(v) => format!("{v:e}"),
            SummaryValue::Int(v) => v.to_string(),
            SummaryValue::Text(s) => s.clone(),
        }
    }

    fn parse_csv(s: &str) -> Self {
        if let Ok(v) = s.parse::<u64>() {
            return SummaryValue::Int(v);
        }
        match s.parse::<f64>() {
            Ok(v) => SummaryValue::Real(v),
            Err(_) => SummaryValue::Text(s.to_string()),
        }
    }

    fn json(&self) -> Value {
        match self {
            SummaryValue::Real(v) => real_json(*v),
            SummaryValue::Int(v) => Value::from(*v),
            SummaryValue::Text(s) => Value::from(s.as_str()),
        }
    }
}

/// Ordered key/value metadata attached to an output file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary(pub Vec<(String, SummaryValue)>);

impl Summary {
    pub fn new() -> Self {
        Summary::default()
    }

    pub fn real(mut self, key: &str, v: f64) -> Self {
        self.0.push((key.to_string(), SummaryValue::Real(v)));
        self
    }

    pub fn int(mut self, key: &str, v: u64) -> Self {
        self.0.push((key.to_string(), SummaryValue::Int(v)));
        self
    }

    pub fn text(mut self, key: &str, v: &str) -> Self {
        self.0.push((key.to_string(), SummaryValue::Text(v.to_string())));
        self
    }

    pub fn get(&self, key: &str) -> Option<&SummaryValue> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_real(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(SummaryValue::as_real)
    }
}

/// 17 significant digits, kept verbatim in the JSON text.
fn real_json(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    let n = Number::from_str(&format!("{v:.16e}")).expect("formatted float is a JSON number");
    Value::Number(n)
}

/// Per-radian densities scaled by `2π`: `count / (n·width) · 2π` and
/// `mass / width · 2π`.
fn scaled_columns(h: &Histogram, i: usize) -> (f64, Option<f64>) {
    let (lo, hi) = h.bin(i);
    let width = hi - lo;
    let n = h.total();
    let density = if n == 0 {
        0.0
    } else {
        h.counts()[i] as f64 / (n as f64 * width) * TWO_PI
    };
    let analytic = h.analytic().map(|a| a[i] / width * TWO_PI);
    (density, analytic)
}

fn summary_block(summary: &Summary) -> String {
    summary
        .0
        .iter()
        .map(|(k, v)| format!("{SUMMARY_PREFIX} {k}={}\n", v.csv()))
        .collect()
}

fn parse_summary(text: &str) -> Result<Summary> {
    let mut summary = Summary::new();
    for (idx, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix(SUMMARY_PREFIX) {
            let (k, v) = rest
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: summary entry without `=`", idx + 1)))?;
            summary.0.push((k.to_string(), SummaryValue::parse_csv(v)));
        }
    }
    Ok(summary)
}

fn csv_table<I>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.split(',')).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

/// Data rows of a table with the given header; `#` lines are skipped.
fn csv_rows(text: &str, header: &str) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = r.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if found.iter().collect::<Vec<_>>().join(",") != header {
        return Err(Error::Parse(format!("expected header `{header}`")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            Ok((line, rec))
        })
        .collect()
}

fn parse_f64(field: &str, line: u64) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: `{field}` is not a number")))
}

pub fn histogram_to_csv(h: &Histogram, summary: &Summary) -> String {
    let rows = (0..h.bins()).map(|i| {
        let (lo, hi) = h.bin(i);
        let (density, analytic) = scaled_columns(h, i);
        vec![
            format!("{lo:e}"),
            format!("{hi:e}"),
            h.counts()[i].to_string(),
            format!("{density:e}"),
            analytic.map_or(String::new(), |a| format!("{a:e}")),
        ]
    });
    summary_block(summary) + &csv_table(HISTOGRAM_HEADER, rows)
}

/// Inverse of [`histogram_to_csv`]; the analytic column is converted back
/// to per-bin mass.
pub fn histogram_from_csv(text: &str) -> Result<(Histogram, Summary)> {
    let summary = parse_summary(text)?;
    let mut edges = Vec::new();
    let mut counts = Vec::new();
    let mut analytic: Vec<Option<f64>> = Vec::new();
    for (line, rec) in csv_rows(text, HISTOGRAM_HEADER)? {
        let lo = parse_f64(&rec[0], line)?;
        let hi = parse_f64(&rec[1], line)?;
        match edges.last() {
            None => edges.push(lo),
            Some(&prev) if prev == lo => {}
            Some(_) => return Err(Error::Parse(format!("line {line}: bins are not contiguous"))),
        }
        edges.push(hi);
        counts.push(
            rec[2]
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("line {line}: `{}` is not a count", &rec[2])))?,
        );
        analytic.push(match &rec[4] {
            "" => None,
            a => Some(parse_f64(a, line)? * (hi - lo) / TWO_PI),
        });
    }
    let analytic = match analytic.iter().all(Option::is_some) && !analytic.is_empty() {
        true => Some(analytic.into_iter().map(Option::unwrap).collect()),
        false if analytic.iter().all(Option::is_none) => None,
        false => return Err(Error::Parse("analytic column is partially filled".into())),
    };
    let h = Histogram::new(edges, counts, analytic).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((h, summary))
}

pub fn histogram_to_json(h: &Histogram, summary: &Summary) -> String {
    let bins: Vec<Value> = (0..h.bins())
        .map(|i| {
            let (lo, hi) = h.bin(i);
            let (density, analytic) = scaled_columns(h, i);
            let mut m = Map::new();
            m.insert("bin_lo".into(), real_json(lo));
            m.insert("bin_hi".into(), real_json(hi));
            m.insert("count".into(), Value::from(h.counts()[i]));
            m.insert("density".into(), real_json(density));
            m.insert("analytic".into(), analytic.map_or(Value::Null, real_json));
            Value::Object(m)
        })
        .collect();
    let mut root = Map::new();
    root.insert("bins".into(), Value::Array(bins));
    root.insert("summary".into(), summary_json(summary));
    let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values serialize");
    s.push('\n');
    s
}

fn summary_json(summary: &Summary) -> Value {
    Value::Object(summary.0.iter().map(|(k, v)| (k.clone(), v.json())).collect())
}

pub fn histogram_from_json(text: &str) -> Result<(Histogram, Summary)> {
    let root: Value = serde_json::from_str(text)?;
    let bad = |what: &str| Error::Parse(format!("histogram JSON: {what}"));
    let bins = root
        .get("bins")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `bins`"))?;
    let mut edges = Vec::new();
    let mut counts = Vec::new();
    let mut analytic = Vec::new();
    for b in bins {
        let num = |k: &str| b.get(k).and_then(Value::as_f64).ok_or_else(|| bad(k));
        let (lo, hi) = (num("bin_lo")?, num("bin_hi")?);
        if edges.is_empty() {
            edges.push(lo);
        }
        edges.push(hi);
        counts.push(b.get("count").and_then(Value::as_u64).ok_or_else(|| bad("count"))?);
        analytic.push(
            b.get("analytic")
                .and_then(Value::as_f64)
                .map(|a| a * (hi - lo) / TWO_PI),
        );
    }
    let analytic = if !analytic.is_empty() && analytic.iter().all(Option::is_some) {
        Some(analytic.into_iter().map(Option::unwrap).collect())
    } else {
        None
    };
    let mut summary = Summary::new();
    if let Some(obj) = root.get("summary").and_then(Value::as_object) {
        for (k, v) in obj {
            let value = match v {
                Value::Number(n) if n.is_u64() => SummaryValue::Int(n.as_u64().unwrap()),
                Value::Number(n) => SummaryValue::Real(n.as_f64().ok_or_else(|| bad(k))?),
                Value::String(s) => SummaryValue::Text(s.clone()),
                _ => return Err(bad(k)),
            };
            summary.0.push((k.clone(), value));
        }
    }
    let h = Histogram::new(edges, counts, analytic).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((h, summary))
}

pub fn histogram_to_string(h: &Histogram, summary: &Summary, format: Format) -> String {
    match format {
        Format::Csv => histogram_to_csv(h, summary),
        Format::Json => histogram_to_json(h, summary),
    }
}

pub fn events_to_csv(events: &[PairEvent], summary: &Summary) -> String {
    let rows = events.iter().map(|e| {
        vec![
            format!("{:e}", e.frame.big_phi),
            e.frame.orth_sign.as_i8().to_string(),
            format!("{:e}", e.photon1.chi.value()),
            format!("{:e}", e.photon1.phi),
            format!("{:e}", e.photon2.chi.value()),
            format!("{:e}", e.photon2.phi),
            format!("{:e}", e.fixed1_phi),
            format!("{:e}", e.fixed2_phi),
        ]
    });
    summary_block(summary) + &csv_table(EVENT_HEADER, rows)
}

/// Reads events written by [`events_to_csv`]; fixed-frame azimuths are
/// recomputed from the frame and checked against the stored columns.
pub fn events_from_csv(text: &str) -> Result<(Vec<PairEvent>, Summary)> {
    let summary = parse_summary(text)?;
    let mut events = Vec::new();
    for (line, rec) in csv_rows(text, EVENT_HEADER)? {
        let sign = rec[1]
            .parse::<i8>()
            .ok()
            .and_then(OrthSign::from_i8)
            .ok_or_else(|| Error::Parse(format!("line {line}: orth_sign must be 1 or -1")))?;
        let v: Vec<f64> = [0, 2, 3, 4, 5, 6, 7]
            .iter()
            .map(|&i| parse_f64(&rec[i], line))
            .collect::<Result<_>>()?;
        let frame = PolarizationFrame::new(v[0], sign);
        let e = PairEvent::from_polarization(frame, ScatterAngles::new(v[1], v[2])?, ScatterAngles::new(v[3], v[4])?);
        let close = |a: f64, b: f64| {
            let d = (a - b).abs();
            d.min(TWO_PI - d) < 1e-9
        };
        if !close(e.fixed1_phi, v[5]) || !close(e.fixed2_phi, v[6]) {
            return Err(Error::Parse(format!(
                "line {line}: fixed-frame azimuths disagree with the frame"
            )));
        }
        events.push(e);
    }
    Ok((events, summary))
}

const EVENT_FIELDS: [&str; 8] = [
    "big_phi",
    "orth_sign",
    "chi1",
    "phi1",
    "chi2",
    "phi2",
    "fixed_phi1",
    "fixed_phi2",
];

pub fn events_to_json(events: &[PairEvent], summary: &Summary) -> String {
    let rows: Vec<Value> = events
        .iter()
        .map(|e| {
            let mut o = Map::new();
            o.insert("big_phi".into(), real_json(e.frame.big_phi));
            o.insert("orth_sign".into(), Value::from(e.frame.orth_sign.as_i8()));
            o.insert("chi1".into(), real_json(e.photon1.chi.value()));
            o.insert("phi1".into(), real_json(e.photon1.phi));
            o.insert("chi2".into(), real_json(e.photon2.chi.value()));
            o.insert("phi2".into(), real_json(e.photon2.phi));
            o.insert("fixed_phi1".into(), real_json(e.fixed1_phi));
            o.insert("fixed_phi2".into(), real_json(e.fixed2_phi));
            Value::Object(o)
        })
        .collect();
    let mut root = Map::new();
    root.insert("events".into(), Value::Array(rows));
    root.insert("summary".into(), summary_json(summary));
    let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Reads events written by [`events_to_json`].
pub fn events_from_json(text: &str) -> Result<(Vec<PairEvent>, Summary)> {
    let root: Value = serde_json::from_str(text)?;
    let bad = |what: &str| Error::Parse(format!("event JSON: {what}"));
    let rows = root
        .get("events")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `events`"))?;
    let mut events = Vec::with_capacity(rows.len());
    for r in rows {
        let num = |k: &str| r.get(k).and_then(Value::as_f64).ok_or_else(|| bad(k));
        let v: Vec<f64> = EVENT_FIELDS.iter().map(|k| num(k)).collect::<Result<_>>()?;
        let sign = OrthSign::from_i8(v[1] as i8).ok_or_else(|| bad("orth_sign"))?;
        let frame = PolarizationFrame::new(v[0], sign);
        events.push(PairEvent::from_polarization(
            frame,
            ScatterAngles::new(v[2], v[3])?,
            ScatterAngles::new(v[4], v[5])?,
        ));
    }
    let mut summary = Summary::new();
    if let Some(obj) = root.get("summary").and_then(Value::as_object) {
        for (k, v) in obj {
            let value = match v {
                Value::Number(n) if n.is_u64() => SummaryValue::Int(n.as_u64().unwrap()),
                Value::Number(n) => SummaryValue::Real(n.as_f64().ok_or_else(|| bad(k))?),
                Value::String(s) => SummaryValue::Text(s.clone()),
                _ => return Err(bad(k)),
            };
            summary.0.push((k.clone(), value));
        }
    }
    Ok((events, summary))
}

pub fn feasibility_to_csv(map: &FeasibilityMap) -> String {
    let rows = map
        .rows()
        .map(|(bf, bg, m, ok)| vec![format!("{bf:e}"), format!("{bg:e}"), format!("{m:e}"), ok.to_string()]);
    csv_table(FEASIBILITY_HEADER, rows)
}

pub fn feasibility_to_json(map: &FeasibilityMap) -> String {
    let rows: Vec<Value> = map
        .rows()
        .map(|(bf, bg, m, ok)| {
            let mut o = Map::new();
            o.insert("b_ff".into(), real_json(bf));
            o.insert("b_gg".into(), real_json(bg));
            o.insert("min_density".into(), real_json(m));
            o.insert("feasible".into(), Value::Bool(ok));
            Value::Object(o)
        })
        .collect();
    let mut root = Map::new();
    root.insert("rows".into(), Value::Array(rows));
    let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
