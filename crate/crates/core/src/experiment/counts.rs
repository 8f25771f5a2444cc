use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use super::noise::{apply_noise, NoiseModel};
use crate::chained::chain_terms;
use crate::error::{Error, Result};
use crate::qudit::JointTable;

/// Integration time stamped on simulated records.
pub const DEFAULT_INTEGRATION_S: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountFormat {
    Csv,
    Json,
}

impl CountFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(CountFormat::Csv),
            "json" => Some(CountFormat::Json),
            _ => None,
        }
    }
}

/// Coincidence counts per setting pair, each a `d x d` table row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    dim: usize,
    n_settings: usize,
    integration_s: f64,
    counts: BTreeMap<(usize, usize), Vec<u64>>,
    meta: Option<String>,
}

impl CountRecord {
    /// Requires every slice that enters `I_N`; other in-range slices are kept.
    pub fn new(
        dim: usize,
        n_settings: usize,
        integration_s: f64,
        counts: BTreeMap<(usize, usize), Vec<u64>>,
        meta: Option<String>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if n_settings == 0 {
            return Err(Error::Validation("N must be at least 1".into()));
        }
        if !(integration_s.is_finite() && integration_s >= 0.0) {
            return Err(Error::Validation(format!("integration time {integration_s} is not a nonnegative number")));
        }
        for (&(a, b), t) in &counts {
            for (what, v) in [("A", a), ("B", b)] {
                if v == 0 || v > n_settings {
                    return Err(Error::OutOfRange {
                        what,
                        value: v,
                        lo: 1,
                        hi: n_settings,
                    });
                }
            }
            if t.len() != dim * dim {
                return Err(Error::DimensionMismatch {
                    expected: dim * dim,
                    got: t.len(),
                });
            }
        }
        for t in chain_terms(n_settings) {
            if !counts.contains_key(&(t.a, t.b)) {
                return Err(Error::MissingSlice { a: t.a, b: t.b });
            }
        }
        Ok(CountRecord {
            dim,
            n_settings,
            integration_s,
            counts,
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn integration_s(&self) -> f64 {
        self.integration_s
    }

    pub fn meta(&self) -> Option<&str> {
        self.meta.as_deref()
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = Some(meta.into());
        self
    }

    pub fn with_integration_s(mut self, seconds: f64) -> Self {
        self.integration_s = seconds;
        self
    }

    pub fn slice(&self, a: usize, b: usize) -> Option<&[u64]> {
        self.counts.get(&(a, b)).map(Vec::as_slice)
    }

    pub fn slices(&self) -> impl Iterator<Item = ((usize, usize), &[u64])> {
        self.counts.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flatten().sum()
    }

    /// Per-slice relative frequencies; errors on any empty slice.
    pub fn frequencies(&self) -> Result<JointTable> {
        let mut slices = BTreeMap::new();
        for (&(a, b), t) in &self.counts {
            let total: u64 = t.iter().sum();
            if total == 0 {
                return Err(Error::EmptySlice { a, b });
            }
            slices.insert((a, b), t.iter().map(|&c| c as f64 / total as f64).collect());
        }
        JointTable::new(self.dim, self.n_settings, slices)
    }

    pub fn to_csv_string(&self) -> String {
        let d = self.dim;
        let mut s = String::new();
        let _ = writeln!(s, "# d={} N={} integration_s={}", d, self.n_settings, self.integration_s);
        if let Some(m) = &self.meta {
            let _ = writeln!(s, "# meta={}", Value::String(m.clone()));
        }
        s.push_str("A,B,x,y,count\n");
        for (&(a, b), t) in &self.counts {
            for x in 0..d {
                for y in 0..d {
                    let _ = writeln!(s, "{a},{b},{x},{y},{}", t[x * d + y]);
                }
            }
        }
        s
    }

    pub fn to_json_value(&self) -> Value {
        let d = self.dim;
        let counts: Vec<Value> = self
            .counts
            .iter()
            .map(|(&(a, b), t)| {
                let rows: Vec<Vec<u64>> = t.chunks(d).map(<[u64]>::to_vec).collect();
                serde_json::json!({ "a": a, "b": b, "table": rows })
            })
            .collect();
        serde_json::json!({
            "dim": d,
            "n_settings": self.n_settings,
            "integration_s": self.integration_s,
            "counts": counts,
            "meta": self.meta,
        })
    }

    pub fn write<W: Write>(&self, mut w: W, format: CountFormat) -> Result<()> {
        match format {
            CountFormat::Csv => w.write_all(self.to_csv_string().as_bytes())?,
            CountFormat::Json => {
                serde_json::to_writer_pretty(&mut w, &self.to_json_value())
                    .map_err(|e| Error::Io(e.into()))?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, format: CountFormat) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w, format)?;
        w.flush()?;
        Ok(())
    }
}

pub fn load_counts(path: &Path, format: CountFormat) -> Result<CountRecord> {
    let file = std::fs::File::open(path)?;
    read_counts(file, format)
}

pub fn read_counts<R: Read>(reader: R, format: CountFormat) -> Result<CountRecord> {
    match format {
        CountFormat::Csv => read_csv(reader),
        CountFormat::Json => {
            let v: Value = serde_json::from_reader(reader).map_err(|e| {
                Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
            })?;
            from_json_value(&v)
        }
    }
}

fn missing_slice_as_parse(e: Error) -> Error {
    match e {
        Error::MissingSlice { a, b } => Error::parse(format!("slice (A={a}, B={b})"), "setting pair missing from file"),
        other => other,
    }
}

fn read_csv<R: Read>(reader: R) -> Result<CountRecord> {
    let mut buf = BufReader::new(reader);
    let mut line = String::new();
    let mut header: Option<(usize, usize, f64)> = None;
    let mut meta = None;
    let mut line_no = 0;
    let mut body = String::new();

    loop {
        line.clear();
        if buf.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let Some(comment) = line.trim_end().strip_prefix('#') else {
            body.push_str(&line);
            break;
        };
        let comment = comment.trim();
        if let Some(m) = comment.strip_prefix("meta=") {
            let text: String = serde_json::from_str(m)
                .map_err(|e| Error::parse(format!("line {line_no}"), format!("meta is not a quoted string: {e}")))?;
            meta = Some(text);
        } else if comment.starts_with("d=") {
            header = Some(parse_header(comment, line_no)?);
        }
    }
    let (d, n, integration_s) =
        header.ok_or_else(|| Error::parse("line 1", "missing header `# d=<d> N=<N> integration_s=<t>`"))?;
    let first_body_line = line_no;
    buf.read_to_string(&mut body)?;

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(format!("line {first_body_line}"), e.to_string()))?
        .clone();
    let expected = ["A", "B", "x", "y", "count"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(
            format!("line {first_body_line}"),
            format!("expected columns {}, found {}", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut counts: BTreeMap<(usize, usize), Vec<Option<u64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let l = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(format!("line {}", first_body_line + l - 1), e.to_string())
        })?;
        let l = first_body_line - 1 + rec.position().map_or(0, |p| p.line() as usize);
        let loc = |field: &str| format!("line {l}, field {field}");
        let index = |i: usize, name: &str| -> Result<usize> {
            rec[i]
                .parse::<usize>()
                .map_err(|_| Error::parse(loc(name), format!("`{}` is not a nonnegative integer", &rec[i])))
        };
        let (a, b, x, y) = (index(0, "A")?, index(1, "B")?, index(2, "x")?, index(3, "y")?);
        for (name, v, lo, hi) in [("A", a, 1, n), ("B", b, 1, n), ("x", x, 0, d - 1), ("y", y, 0, d - 1)] {
            if v < lo || v > hi {
                return Err(Error::parse(loc(name), format!("{v} outside {lo}..={hi}")));
            }
        }
        let count = parse_count(&rec[4]).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", loc("count"))),
            Error::Parse { message, .. } => Error::parse(loc("count"), message),
            other => other,
        })?;
        let cells = counts.entry((a, b)).or_insert_with(|| vec![None; d * d]);
        if cells[x * d + y].replace(count).is_some() {
            return Err(Error::parse(loc("x,y"), format!("duplicate cell ({x}, {y}) for (A={a}, B={b})")));
        }
    }

    let mut full = BTreeMap::new();
    for ((a, b), cells) in counts {
        let filled: Option<Vec<u64>> = cells.iter().copied().collect();
        let t = filled.ok_or_else(|| {
            let have = cells.iter().filter(|c| c.is_some()).count();
            Error::parse(format!("slice (A={a}, B={b})"), format!("{have} of {} cells present", d * d))
        })?;
        full.insert((a, b), t);
    }
    CountRecord::new(d, n, integration_s, full, meta).map_err(missing_slice_as_parse)
}

fn parse_header(comment: &str, line_no: usize) -> Result<(usize, usize, f64)> {
    let loc = format!("line {line_no}");
    let mut d = None;
    let mut n = None;
    let mut t = None;
    for field in comment.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(loc.clone(), format!("malformed header field `{field}`")))?;
        let bad = || Error::parse(loc.clone(), format!("bad value for `{k}`: `{v}`"));
        match k {
            "d" => d = Some(v.parse::<usize>().map_err(|_| bad())?),
            "N" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
            "integration_s" => t = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(Error::parse(loc.clone(), format!("unknown header field `{k}`"))),
        }
    }
    match (d, n, t) {
        (Some(d), Some(n), Some(t)) => Ok((d, n, t)),
        _ => Err(Error::parse(loc, "header needs d, N and integration_s")),
    }
}

/// Integers parse; negative or fractional numbers are validation errors;
/// anything else is a parse error.
fn parse_count(s: &str) -> Result<u64> {
    if let Ok(c) = s.parse::<u64>() {
        return Ok(c);
    }
    match s.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(Error::Validation(format!("negative count {s}"))),
        Ok(_) => Err(Error::Validation(format!("non-integer count {s}"))),
        Err(_) => Err(Error::parse("count", format!("`{s}` is not a number"))),
    }
}

fn number_to_count(n: &Number, loc: &str) -> Result<u64> {
    if let Some(c) = n.as_u64() {
        return Ok(c);
    }
    match n.as_f64() {
        Some(v) if v < 0.0 => Err(Error::Validation(format!("{loc}: negative count {n}"))),
        _ => Err(Error::Validation(format!("{loc}: non-integer count {n}"))),
    }
}

pub fn from_json_value(v: &Value) -> Result<CountRecord> {
    let field = |k: &str| v.get(k).ok_or_else(|| Error::parse(k, "missing field"));
    let uint = |k: &str| -> Result<usize> {
        field(k)?
            .as_u64()
            .map(|u| u as usize)
            .ok_or_else(|| Error::parse(k, "expected a nonnegative integer"))
    };
    let d = uint("dim")?;
    let n = uint("n_settings")?;
    let integration_s = field("integration_s")?
        .as_f64()
        .ok_or_else(|| Error::parse("integration_s", "expected a number"))?;
    let meta = match v.get("meta") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(Error::parse("meta", "expected a string or null")),
    };
    let entries = field("counts")?
        .as_array()
        .ok_or_else(|| Error::parse("counts", "expected an array"))?;
    let mut counts = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        let loc = format!("counts[{i}]");
        let idx = |k: &str| -> Result<usize> {
            e.get(k)
                .and_then(Value::as_u64)
                .map(|u| u as usize)
                .ok_or_else(|| Error::parse(format!("{loc}.{k}"), "expected a positive integer"))
        };
        let (a, b) = (idx("a")?, idx("b")?);
        let rows = e
            .get("table")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse(format!("{loc}.table"), "expected an array of rows"))?;
        if rows.len() != d {
            return Err(Error::parse(format!("{loc}.table"), format!("expected {d} rows, found {}", rows.len())));
        }
        let mut t = Vec::with_capacity(d * d);
        for (x, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .filter(|r| r.len() == d)
                .ok_or_else(|| Error::parse(format!("{loc}.table[{x}]"), format!("expected {d} entries")))?;
            for (y, c) in row.iter().enumerate() {
                let cloc = format!("{loc}.table[{x}][{y}]");
                let num = c
                    .as_number()
                    .ok_or_else(|| Error::parse(cloc.clone(), "expected a number"))?;
                t.push(number_to_count(num, &cloc)?);
            }
        }
        if counts.insert((a, b), t).is_some() {
            return Err(Error::parse(loc, format!("duplicate slice (A={a}, B={b})")));
        }
    }
    CountRecord::new(d, n, integration_s, counts, meta).map_err(missing_slice_as_parse)
}

/// Poisson counts with mean `rate_scale P'(x,y|A,B) + dark_rate / d^2`,
/// where `P'` is the noisy table. Each slice draws from its own stream of
/// the seeded generator, so results do not depend on evaluation order.
pub fn simulate_counts(joint: &JointTable, noise: &NoiseModel, seed: u64) -> Result<CountRecord> {
    let noisy = apply_noise(joint, noise)?;
    let d = joint.dim();
    let n = joint.n_settings();
    let dark = noise.dark_rate / (d * d) as f64;
    let mut counts = BTreeMap::new();
    for ((a, b), t) in noisy.slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((a - 1) * n + (b - 1)) as u64);
        let cells = t
            .iter()
            .map(|p| poisson(&mut rng, noise.rate_scale * p + dark))
            .collect::<Result<Vec<_>>>()?;
        counts.insert((a, b), cells);
    }
    CountRecord::new(d, n, DEFAULT_INTEGRATION_S, counts, None)
}

pub(crate) fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::param(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{born_joint_table, make_maximally_entangled, SettingsFamily};

    fn ideal(d: usize, n: usize) -> JointTable {
        born_joint_table(&make_maximally_entangled(d).unwrap(), &SettingsFamily::new(d, n).unwrap()).unwrap()
    }

    fn sample_record() -> CountRecord {
        simulate_counts(&ideal(3, 2), &NoiseModel::ideal(3, 5000.0), 11)
            .unwrap()
            .with_meta("run 7, \"bench\" B\nsecond line")
    }

    #[test]
    fn zero_rates_give_zero_counts() {
        let r = simulate_counts(&ideal(2, 3), &NoiseModel::ideal(2, 0.0), 1).unwrap();
        assert_eq!(r.total(), 0);
        assert!(matches!(r.frequencies(), Err(Error::EmptySlice { .. })));
    }

    #[test]
    fn simulation_is_deterministic() {
        let t = ideal(2, 4);
        let noise = NoiseModel::ideal(2, 1e4);
        assert_eq!(simulate_counts(&t, &noise, 5).unwrap(), simulate_counts(&t, &noise, 5).unwrap());
        assert_ne!(simulate_counts(&t, &noise, 5).unwrap(), simulate_counts(&t, &noise, 6).unwrap());
    }

    #[test]
    fn high_rate_frequencies_sit_in_poisson_bands() {
        let t = ideal(2, 6);
        let rate = 1e6;
        for seed in 0..10 {
            let r = simulate_counts(&t, &NoiseModel::ideal(2, rate), seed).unwrap();
            for ((a, b), p) in t.slices() {
                for (c, &pi) in r.slice(a, b).unwrap().iter().zip(p) {
                    let mean = rate * pi;
                    assert!((*c as f64 - mean).abs() <= 5.0 * mean.sqrt().max(1.0), "cell mean {mean}, count {c}");
                }
            }
        }
    }

    #[test]
    fn dark_counts_fill_every_cell() {
        let mut noise = NoiseModel::ideal(2, 0.0);
        noise.dark_rate = 4e4;
        let r = simulate_counts(&ideal(2, 2), &noise, 3).unwrap();
        for (_, s) in r.slices() {
            for &c in s {
                assert!((c as f64 - 1e4).abs() < 600.0);
            }
        }
    }

    #[test]
    fn csv_and_json_round_trip_exactly() {
        let r = sample_record();
        for format in [CountFormat::Csv, CountFormat::Json] {
            let mut buf = Vec::new();
            r.write(&mut buf, format).unwrap();
            let back = read_counts(buf.as_slice(), format).unwrap();
            assert_eq!(back, r, "{format:?}");
        }
        let big = CountRecord::new(
            2,
            1,
            12.5,
            BTreeMap::from([((1, 1), vec![u64::MAX, 0, 1, 9_007_199_254_740_993])]),
            None,
        )
        .unwrap();
        for format in [CountFormat::Csv, CountFormat::Json] {
            let mut buf = Vec::new();
            big.write(&mut buf, format).unwrap();
            assert_eq!(read_counts(buf.as_slice(), format).unwrap(), big);
        }
    }

    #[test]
    fn csv_missing_slice_names_it() {
        let csv = "# d=2 N=2 integration_s=30\nA,B,x,y,count\n\
                   1,1,0,0,5\n1,1,0,1,0\n1,1,1,0,0\n1,1,1,1,5\n\
                   2,1,0,0,5\n2,1,0,1,0\n2,1,1,0,0\n2,1,1,1,5\n\
                   2,2,0,0,5\n2,2,0,1,0\n2,2,1,0,0\n2,2,1,1,5\n";
        let err = read_counts(csv.as_bytes(), CountFormat::Csv).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "slice (A=1, B=2)"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_diagnostics() {
        let bad = [
            ("A,B,x,y,count\n1,1,0,0,1\n", "header"),
            ("# d=2 N=1 integration_s=1\nA,B,x,count\n", "columns"),
            ("# d=2 N=1 integration_s=1\nA,B,x,y,count\n1,1,0,0,1\n1,1,0,0,2\n", "duplicate"),
            ("# d=2 N=1 integration_s=1\nA,B,x,y,count\n1,1,0,0,1\n1,1,0,1,1\n", "cells"),
            ("# d=2 N=1 integration_s=1\nA,B,x,y,count\n1,1,2,0,1\n", "outside"),
            ("# d=2 N=1 integration_s=1\nA,B,x,y,count\n1,1,0,0,abc\n", "not a number"),
        ];
        for (text, needle) in bad {
            let err = read_counts(text.as_bytes(), CountFormat::Csv).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{needle}: {err:?}");
            assert!(err.to_string().contains(needle), "{needle}: {err}");
        }
        let neg = "# d=2 N=1 integration_s=1\nA,B,x,y,count\n1,1,0,0,-3\n";
        assert!(matches!(read_counts(neg.as_bytes(), CountFormat::Csv), Err(Error::Validation(_))));
        let frac = "# d=2 N=1 integration_s=1\nA,B,x,y,count\n1,1,0,0,1.5\n";
        let err = read_counts(frac.as_bytes(), CountFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn json_rejects_fractional_and_negative_counts() {
        let mut v = sample_record().to_json_value();
        v["counts"][0]["table"][1][2] = serde_json::json!(1.5);
        assert!(matches!(from_json_value(&v), Err(Error::Validation(_))));
        v["counts"][0]["table"][1][2] = serde_json::json!(-2);
        assert!(matches!(from_json_value(&v), Err(Error::Validation(_))));
        let text = "{\"dim\": 2, \"n_settings\": 1";
        assert!(matches!(read_counts(text.as_bytes(), CountFormat::Json), Err(Error::Parse { .. })));
    }

    #[test]
    fn extra_slices_are_kept_and_out_of_range_rejected() {
        let r = simulate_counts(&ideal(2, 3), &NoiseModel::ideal(2, 100.0), 0).unwrap();
        assert_eq!(r.slices().count(), 9);
        let bad = CountRecord::new(2, 1, 1.0, BTreeMap::from([((1, 1), vec![1; 4]), ((1, 2), vec![1; 4])]), None);
        assert!(matches!(bad, Err(Error::OutOfRange { .. })));
    }
}
