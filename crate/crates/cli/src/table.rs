//! CSV output: fixed headers, 9 significant digits, atomic writes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Deserialize;

pub const SWEEP_HEADER: [&str; 16] = [
    "sweep_var",
    "sweep_value",
    "n_sources",
    "service_dist",
    "variant",
    "delta_analytic",
    "delta_baseline",
    "delta_sim_mean",
    "delta_sim_ci95",
    "p0",
    "p_a",
    "p_l_analytic",
    "p_l_sim",
    "mean_sojourn_analytic",
    "mean_sojourn_sim",
    "stable_flag",
];

/// One row of a sweep file. Analytic fields are empty at unstable points and
/// simulation fields are empty when no simulation was run.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SweepRow {
    pub sweep_var: String,
    pub sweep_value: Option<f64>,
    pub n_sources: usize,
    pub service_dist: String,
    pub variant: String,
    pub delta_analytic: Option<f64>,
    pub delta_baseline: Option<f64>,
    pub delta_sim_mean: Option<f64>,
    pub delta_sim_ci95: Option<f64>,
    pub p0: Option<f64>,
    pub p_a: Option<f64>,
    pub p_l_analytic: Option<f64>,
    pub p_l_sim: Option<f64>,
    pub mean_sojourn_analytic: Option<f64>,
    pub mean_sojourn_sim: Option<f64>,
    pub stable_flag: bool,
}

impl SweepRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.sweep_var.clone(),
            opt(self.sweep_value),
            self.n_sources.to_string(),
            self.service_dist.clone(),
            self.variant.clone(),
            opt(self.delta_analytic),
            opt(self.delta_baseline),
            opt(self.delta_sim_mean),
            opt(self.delta_sim_ci95),
            opt(self.p0),
            opt(self.p_a),
            opt(self.p_l_analytic),
            opt(self.p_l_sim),
            opt(self.mean_sojourn_analytic),
            opt(self.mean_sojourn_sim),
            self.stable_flag.to_string(),
        ]
    }
}

/// Formats with 9 significant digits: fixed notation for moderate
/// magnitudes, scientific otherwise.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-4..9).contains(&exp) {
        format!("{x:.*}", (8 - exp) as usize)
    } else {
        sci
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Renders a table as CSV text. Trailing `# ...` lines carry free-form notes
/// and are skipped by [`read_table`].
pub fn render(header: &[&str], rows: &[Vec<String>], footer: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    let mut text = String::from_utf8(w.into_inner().expect("writing to memory")).expect("CSV is UTF-8");
    for line in footer {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    text
}

/// Writes to a temporary sibling and renames it into place, so readers see
/// either the old file or the complete new one.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn read_sweep(text: &str) -> Result<Vec<SweepRow>, csv::Error> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(csv::Error::from(io::Error::new(io::ErrorKind::InvalidData, format!("unexpected header: {header:?}"))));
    }
    r.deserialize().collect()
}

/// Reads any table produced by [`render`] as header plus string records.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), csv::Error> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|rec| rec.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(3.5), "3.50000000");
        assert_eq!(num(0.7425), "0.742500000");
        assert_eq!(num(123.456789012), "123.456789");
        assert_eq!(num(-0.0012345678912), "-0.00123456789");
        assert_eq!(num(1.5e-7), "1.50000000e-7");
        assert_eq!(num(2.0e12), "2.00000000e12");
        for x in [3.5, 0.7425, 1.0 / 3.0, 1.5e-7, 2.5e11] {
            let back: f64 = num(x).parse().unwrap();
            assert!((back / x - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sweep_round_trip() {
        let row = SweepRow {
            sweep_var: "lambda1".into(),
            sweep_value: Some(0.3),
            n_sources: 2,
            service_dist: "erlang(k=2,rate=4)".into(),
            variant: "substitution".into(),
            delta_analytic: Some(3.87),
            delta_baseline: Some(3.8),
            delta_sim_mean: None,
            delta_sim_ci95: None,
            p0: Some(0.7),
            p_a: Some(0.99),
            p_l_analytic: Some(0.84),
            p_l_sim: None,
            mean_sojourn_analytic: Some(0.6),
            mean_sojourn_sim: None,
            stable_flag: true,
        };
        let text = render(&SWEEP_HEADER, &[row.record()], &["note".into()]);
        assert!(text.starts_with(&SWEEP_HEADER.join(",")));
        assert_eq!(read_sweep(&text).unwrap(), vec![row]);
        assert!(read_sweep("a,b\n1,2\n").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("aoi-table-{}", std::process::id()));
        let path = dir.join("x.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(dir).unwrap();
    }
}
