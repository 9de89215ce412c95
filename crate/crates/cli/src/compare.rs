//! Error-versus-oracle tables and the per-band method comparison.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use frfid_core::{Complex64, FrequencyGrid};
use serde::{Deserialize, Serialize};

use crate::bundle::{median, GridSummary, Manifest, MANIFEST};
use crate::config::Method;
use crate::{at, HarnessError};

/// Bins whose true gain is below this fraction of the peak gain are not
/// "significant": relative error is not a meaningful figure there.
pub const SIGNIFICANCE: f64 = 0.01;

pub const ERROR_HEADER: [&str; 7] = [
    "bin",
    "freq_hz",
    "band",
    "above_slow_nyquist",
    "significant",
    "rel_err",
    "valid_flag",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRow {
    pub bin: usize,
    pub freq_hz: f64,
    /// Aliased band of the folded frequency, 0 below the slow Nyquist.
    pub band: usize,
    pub above_slow_nyquist: bool,
    pub significant: bool,
    pub rel_err: f64,
    pub valid: bool,
}

/// One method's errors against the true FRF.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodErrors {
    pub method: Method,
    pub grid: GridSummary,
    pub rows: Vec<ErrorRow>,
}

impl MethodErrors {
    /// `estimates` are `(bin, value, valid)`; `truth` covers every fast bin.
    pub fn new(
        method: Method,
        grid: &FrequencyGrid,
        truth: &[Complex64],
        estimates: impl IntoIterator<Item = (usize, Complex64, bool)>,
    ) -> Self {
        let peak = truth.iter().map(|g| g.norm()).fold(0.0, f64::max);
        let rows = estimates
            .into_iter()
            .map(|(k, value, valid)| {
                let g = truth[k];
                ErrorRow {
                    bin: k,
                    freq_hz: grid.hz(k),
                    band: grid.nyquist_band(k),
                    above_slow_nyquist: grid.above_slow_nyquist(k),
                    significant: g.norm() >= SIGNIFICANCE * peak,
                    rel_err: if valid { (value - g).norm() / g.norm() } else { f64::NAN },
                    valid,
                }
            })
            .collect();
        Self {
            method,
            grid: grid.into(),
            rows,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(ERROR_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.bin.to_string(),
                r.freq_hz.to_string(),
                r.band.to_string(),
                u8::from(r.above_slow_nyquist).to_string(),
                u8::from(r.significant).to_string(),
                r.rel_err.to_string(),
                u8::from(r.valid).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(method: Method, grid: GridSummary, reader: R) -> Result<Self, String> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let get = |c: usize| rec.get(c).ok_or_else(|| format!("row {i}: missing column {c}"));
            let num = |c: usize| -> Result<f64, String> {
                get(c)?.parse::<f64>().map_err(|e| format!("row {i}, column {c}: {e}"))
            };
            let flag = |c: usize| -> Result<bool, String> { Ok(get(c)? == "1") };
            rows.push(ErrorRow {
                bin: get(0)?.parse().map_err(|e| format!("row {i}: {e}"))?,
                freq_hz: num(1)?,
                band: get(2)?.parse().map_err(|e| format!("row {i}: {e}"))?,
                above_slow_nyquist: flag(3)?,
                significant: flag(4)?,
                rel_err: num(5)?,
                valid: flag(6)?,
            });
        }
        Ok(Self { method, grid, rows })
    }

    pub fn summary(&self) -> ErrorSummary {
        let valid: Vec<&ErrorRow> = self.rows.iter().filter(|r| r.valid).collect();
        let errs = |pred: &dyn Fn(&ErrorRow) -> bool| -> Vec<f64> {
            valid.iter().filter(|r| pred(r)).map(|r| r.rel_err).collect()
        };
        let max = |v: &[f64]| v.iter().copied().fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        let all = errs(&|_| true);
        let sig = errs(&|r| r.significant);
        let above = errs(&|r| r.above_slow_nyquist);
        let above_sig = errs(&|r| r.above_slow_nyquist && r.significant);
        ErrorSummary {
            bins: self.rows.len(),
            valid_bins: valid.len(),
            median_rel_err: median(&all),
            max_rel_err: max(&all),
            significant_bins: sig.len(),
            invalid_significant_bins: self.rows.iter().filter(|r| r.significant && !r.valid).count(),
            max_rel_err_significant: max(&sig),
            above_slow_nyquist_bins: above.len(),
            median_rel_err_above_slow_nyquist: median(&above),
            max_rel_err_above_slow_nyquist_significant: max(&above_sig),
        }
    }
}

/// Error figures over the valid bins of one method, as stored in the
/// manifest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub bins: usize,
    pub valid_bins: usize,
    pub median_rel_err: Option<f64>,
    pub max_rel_err: Option<f64>,
    pub significant_bins: usize,
    pub invalid_significant_bins: usize,
    pub max_rel_err_significant: Option<f64>,
    pub above_slow_nyquist_bins: usize,
    pub median_rel_err_above_slow_nyquist: Option<f64>,
    pub max_rel_err_above_slow_nyquist_significant: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandStats {
    /// Valid estimates in the band; the frequency resolution of the method.
    pub bins: usize,
    pub median_rel_err: Option<f64>,
    pub max_rel_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub bands: Vec<BandStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub grid: GridSummary,
    pub rows: Vec<ComparisonRow>,
}

/// Per-band error statistics for each method. All inputs must share a grid.
pub fn compare_methods(inputs: &[MethodErrors]) -> Result<Comparison, HarnessError> {
    let Some(first) = inputs.first() else {
        return Err(HarnessError::Stage {
            stage: "compare",
            message: "nothing to compare".to_string(),
        });
    };
    if let Some(other) = inputs.iter().find(|e| e.grid != first.grid) {
        return Err(HarnessError::Stage {
            stage: "compare",
            message: format!(
                "grid mismatch: {} uses {:?}, {} uses {:?}",
                first.method, first.grid, other.method, other.grid
            ),
        });
    }
    let f = first.grid.factor;
    let rows = inputs
        .iter()
        .map(|e| ComparisonRow {
            method: e.method,
            bands: (0..f)
                .map(|b| {
                    let errs: Vec<f64> = e
                        .rows
                        .iter()
                        .filter(|r| r.valid && r.band == b)
                        .map(|r| r.rel_err)
                        .collect();
                    BandStats {
                        bins: errs.len(),
                        median_rel_err: median(&errs),
                        max_rel_err: errs.iter().copied().reduce(f64::max),
                    }
                })
                .collect(),
        })
        .collect();
    Ok(Comparison { grid: first.grid, rows })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), |v| v.to_string())
}

impl Comparison {
    pub fn row(&self, method: Method) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Wide table, one row per method.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["method".to_string()];
        for b in 0..self.grid.factor {
            header.extend([
                format!("band{b}_bins"),
                format!("band{b}_median_rel_err"),
                format!("band{b}_max_rel_err"),
            ]);
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.method.to_string()];
            for b in &row.bands {
                rec.extend([b.bins.to_string(), opt(b.median_rel_err), opt(b.max_rel_err)]);
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable summary: per-band medians, ranking and resolution.
    pub fn text(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "grid: N = {}, M = {}, F = {}, fs_fast = {} Hz, slow Nyquist = {} Hz",
            g.n,
            g.m,
            g.factor,
            g.fs_fast,
            g.fs_slow / 2.0
        );
        for b in 0..g.factor {
            let lo = b as f64 * g.fs_slow / 2.0;
            let hi = lo + g.fs_slow / 2.0;
            let _ = writeln!(s, "band {b} ({lo} to {hi} Hz):");
            let mut ranked: Vec<(&ComparisonRow, &BandStats)> = self.rows.iter().map(|r| (r, &r.bands[b])).collect();
            ranked.sort_by(|a, b| {
                let key = |x: &BandStats| x.median_rel_err.unwrap_or(f64::INFINITY);
                key(a.1).total_cmp(&key(b.1))
            });
            for (row, st) in ranked {
                let _ = writeln!(
                    s,
                    "  {:<7} bins {:>6}  median rel err {:>12}  max {:>12}",
                    row.method.name(),
                    st.bins,
                    st.median_rel_err.map_or("-".to_string(), |v| format!("{v:.3e}")),
                    st.max_rel_err.map_or("-".to_string(), |v| format!("{v:.3e}")),
                );
            }
        }
        if let (Some(lpm), Some(sparse)) = (self.row(Method::Lpm), self.row(Method::Sparse)) {
            let a: usize = lpm.bands.iter().map(|b| b.bins).sum();
            let c: usize = sparse.bands.iter().map(|b| b.bins).sum();
            if c > 0 {
                let _ = writeln!(s, "resolution: lpm {a} bins, sparse {c} bins, ratio {:.3}", a as f64 / c as f64);
            }
        }
        s
    }
}

/// Error tables of a bundle directory written by `identify`.
pub fn load_bundle(dir: &Path) -> Result<Vec<MethodErrors>, HarnessError> {
    let text = fs::read_to_string(dir.join(MANIFEST)).map_err(at("compare"))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(at("compare"))?;
    let mut out = Vec::new();
    for method in Method::ALL {
        let name = format!("error_{method}.csv");
        if !manifest.files.contains_key(&name) {
            continue;
        }
        let file = fs::File::open(dir.join(&name)).map_err(at("compare"))?;
        out.push(MethodErrors::read_csv(method, manifest.grid, file).map_err(at("compare"))?);
    }
    if out.is_empty() {
        return Err(HarnessError::Stage {
            stage: "compare",
            message: format!("{} has no error tables", dir.display()),
        });
    }
    Ok(out)
}
