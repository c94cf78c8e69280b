//! CSV ingestion: aligned exchange-rate and portfolio-value series turned
//! into model-ready relative changes and day-to-day losses.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::CliError;

/// Ingested data, ready for fitting. Row `t` of `factors` holds the relative
/// changes observed on `dates[t]`, and `losses[t]` the portfolio loss over
/// the same day. All three have equal length; the first CSV row is consumed
/// by the differencing and does not appear here.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dates: Vec<String>,
    pub names: Vec<String>,
    pub factors: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
}

impl Dataset {
    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    /// Factor columns with the loss appended as the last coordinate, the row
    /// layout the joint model expects.
    pub fn rows_with_loss(&self) -> Vec<Vec<f64>> {
        self.factors
            .iter()
            .zip(&self.losses)
            .map(|(row, &loss)| {
                let mut full = row.clone();
                full.push(loss);
                full
            })
            .collect()
    }

    /// One factor column.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.factors.iter().map(|row| row[j]).collect()
    }
}

/// Raw parse of one CSV: date column followed by value columns.
struct RawTable {
    names: Vec<String>,
    dates: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(reader: impl Read, label: &str) -> Result<RawTable, CliError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| CliError::User(format!("{label}: cannot read header: {e}")))?
        .clone();
    if headers.len() < 2 {
        return Err(CliError::User(format!(
            "{label}: need a date column plus at least one value column, got {} columns",
            headers.len()
        )));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::User(format!("{label}: line {line}: {e}")))?;
        if record.len() != headers.len() {
            return Err(CliError::User(format!(
                "{label}: line {line}: expected {} fields, got {}",
                headers.len(),
                record.len()
            )));
        }
        dates.push(record[0].to_owned());
        let mut row = Vec::with_capacity(names.len());
        for (name, field) in names.iter().zip(record.iter().skip(1)) {
            let value: f64 = field.trim().parse().map_err(|_| {
                CliError::User(format!(
                    "{label}: line {line}: column {name}: cannot parse {field:?} as a number"
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::User(format!(
                    "{label}: line {line}: column {name}: value must be finite"
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }
    Ok(RawTable { names, dates, rows })
}

fn check_dates_increasing(dates: &[String], label: &str) -> Result<(), CliError> {
    // ISO dates order lexicographically, so a string comparison suffices.
    for pair in dates.windows(2) {
        if pair[1] <= pair[0] {
            return Err(CliError::User(format!(
                "{label}: dates must be strictly increasing, but {} follows {}",
                pair[1], pair[0]
            )));
        }
    }
    Ok(())
}

/// Read exchange-rate levels and portfolio values from open readers and
/// difference them into relative changes and losses.
pub fn ingest_readers(
    rates: impl Read,
    values: impl Read,
    rates_label: &str,
    values_label: &str,
) -> Result<Dataset, CliError> {
    let rates = read_table(rates, rates_label)?;
    let values = read_table(values, values_label)?;
    if values.names.len() != 1 {
        return Err(CliError::User(format!(
            "{values_label}: expected exactly one value column, got {}",
            values.names.len()
        )));
    }
    if rates.dates != values.dates {
        let mut mismatches = Vec::new();
        let longest = rates.dates.len().max(values.dates.len());
        for i in 0..longest {
            let a = rates.dates.get(i).map(String::as_str).unwrap_or("<missing>");
            let b = values.dates.get(i).map(String::as_str).unwrap_or("<missing>");
            if a != b {
                mismatches.push(format!("row {}: {a} vs {b}", i + 2));
                if mismatches.len() == 5 {
                    break;
                }
            }
        }
        return Err(CliError::User(format!(
            "date columns disagree between {rates_label} and {values_label}: {}",
            mismatches.join("; ")
        )));
    }
    check_dates_increasing(&rates.dates, rates_label)?;
    if rates.dates.len() < 2 {
        return Err(CliError::User(format!(
            "{rates_label}: need at least two rows to form day-to-day changes"
        )));
    }

    let n = rates.dates.len() - 1;
    let mut factors = Vec::with_capacity(n);
    for t in 1..=n {
        let mut row = Vec::with_capacity(rates.names.len());
        for (j, name) in rates.names.iter().enumerate() {
            let prev = rates.rows[t - 1][j];
            if prev == 0.0 {
                return Err(CliError::User(format!(
                    "{rates_label}: column {name}: level is zero on {}, relative change undefined",
                    rates.dates[t - 1]
                )));
            }
            row.push((rates.rows[t][j] - prev) / prev);
        }
        factors.push(row);
    }
    let losses: Vec<f64> = (1..=n).map(|t| -(values.rows[t][0] - values.rows[t - 1][0])).collect();
    Ok(Dataset { dates: rates.dates[1..].to_vec(), names: rates.names, factors, losses })
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::User(format!("cannot open {}: {e}", path.display())))
}

/// Ingest from files on disk.
pub fn ingest(rates_path: &Path, values_path: &Path) -> Result<Dataset, CliError> {
    ingest_readers(
        open(rates_path)?,
        open(values_path)?,
        &rates_path.display().to_string(),
        &values_path.display().to_string(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn ingest_str(rates: &str, values: &str) -> Result<Dataset, CliError> {
        ingest_readers(Cursor::new(rates), Cursor::new(values), "rates.csv", "values.csv")
    }

    #[test]
    fn levels_become_relative_changes_and_losses() {
        let data = ingest_str(
            "date,eur\n2024-01-02,100\n2024-01-03,110\n",
            "date,value\n2024-01-02,5\n2024-01-03,3\n",
        )
        .unwrap();
        assert_eq!(data.dates, vec!["2024-01-03"]);
        assert_eq!(data.names, vec!["eur"]);
        assert!((data.factors[0][0] - 0.10).abs() < 1e-15);
        assert!((data.losses[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn date_mismatch_names_the_offending_rows() {
        let err = ingest_str(
            "date,eur\n2024-01-02,100\n2024-01-03,110\n",
            "date,value\n2024-01-02,5\n2024-01-04,3\n",
        )
        .unwrap_err();
        let CliError::User(msg) = err else { panic!("expected a user error") };
        assert!(msg.contains("2024-01-03"), "missing date in: {msg}");
        assert!(msg.contains("2024-01-04"), "missing date in: {msg}");
        assert!(msg.contains("row 3"), "missing row number in: {msg}");
    }

    #[test]
    fn zero_level_is_rejected_with_date_and_column() {
        let err = ingest_str(
            "date,eur,jpy\n2024-01-02,100,0\n2024-01-03,110,1\n",
            "date,value\n2024-01-02,5\n2024-01-03,3\n",
        )
        .unwrap_err();
        let CliError::User(msg) = err else { panic!("expected a user error") };
        assert!(msg.contains("jpy"), "missing column in: {msg}");
        assert!(msg.contains("2024-01-02"), "missing date in: {msg}");
    }

    #[test]
    fn dates_must_increase() {
        let err = ingest_str(
            "date,eur\n2024-01-03,100\n2024-01-02,110\n",
            "date,value\n2024-01-03,5\n2024-01-02,3\n",
        )
        .unwrap_err();
        let CliError::User(msg) = err else { panic!("expected a user error") };
        assert!(msg.contains("strictly increasing"), "wrong message: {msg}");
    }

    #[test]
    fn values_file_must_have_one_column() {
        let err = ingest_str(
            "date,eur\n2024-01-02,100\n2024-01-03,110\n",
            "date,a,b\n2024-01-02,5,1\n2024-01-03,3,1\n",
        )
        .unwrap_err();
        let CliError::User(msg) = err else { panic!("expected a user error") };
        assert!(msg.contains("exactly one value column"), "wrong message: {msg}");
    }

    #[test]
    fn rows_with_loss_appends_the_loss_column() {
        let data = ingest_str(
            "date,eur,jpy\n2024-01-02,100,200\n2024-01-03,110,190\n",
            "date,value\n2024-01-02,5\n2024-01-03,3\n",
        )
        .unwrap();
        let rows = data.rows_with_loss();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].len(), 3);
        assert!((rows[0][2] - 2.0).abs() < 1e-15);
    }
}
