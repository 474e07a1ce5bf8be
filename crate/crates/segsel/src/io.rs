//! CSV input and the dense dump of a selection event.

use std::io::{Read, Write};

use segsel_core::{Polyhedron, Series};

use crate::error::{CliError, Result};

/// Read a series from CSV with a header naming `value` and optionally
/// `chrom` and `pos`, in any order. Errors carry the 1-based line number.
pub fn read_series<R: Read>(reader: R) -> Result<Series> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Input(format!("line 1: {e}")))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let value_col = col("value").ok_or_else(|| CliError::Input("line 1: header has no `value` column".into()))?;
    let chrom_col = col("chrom");
    let pos_col = col("pos");
    let mut values = Vec::new();
    let mut chrom = chrom_col.map(|_| Vec::new());
    let mut pos = pos_col.map(|_| Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Input(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let raw = field(value_col);
        let v: f64 = raw.parse().map_err(|_| CliError::Input(format!("line {line}: cannot parse value `{raw}`")))?;
        if !v.is_finite() {
            return Err(CliError::Input(format!("line {line}: value `{raw}` is not finite")));
        }
        values.push(v);
        if let (Some(c), Some(out)) = (chrom_col, chrom.as_mut()) {
            let label = field(c);
            if label.is_empty() {
                return Err(CliError::Input(format!("line {line}: empty chrom label")));
            }
            out.push(label.to_string());
        }
        if let (Some(c), Some(out)) = (pos_col, pos.as_mut()) {
            let raw = field(c);
            let p: i64 = raw.parse().map_err(|_| CliError::Input(format!("line {line}: cannot parse pos `{raw}`")))?;
            out.push(p);
        }
    }
    if values.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }
    Series::with_labels(values, chrom, pos).map_err(|e| CliError::Input(e.to_string()))
}

/// Dense CSV of `Gamma` and `c`: one line per row with its step, kind and
/// competitor tags followed by the `n` coefficients.
pub fn write_gamma<W: Write>(p: &Polyhedron, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["row".to_string(), "step".into(), "kind".into(), "interval".into(), "a".into(), "b".into(), "offset".into()];
    header.extend((1..=p.n()).map(|i| format!("g{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (j, meta) in p.meta().iter().enumerate() {
        let mut rec = vec![
            (j + 1).to_string(),
            meta.step.to_string(),
            format!("{:?}", meta.kind).to_lowercase(),
            meta.interval.to_string(),
            meta.a.to_string(),
            meta.b.to_string(),
            p.offsets()[j].to_string(),
        ];
        rec.extend(p.row_dense(j).iter().map(|g| g.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_optional_columns() {
        let s = read_series("value\n0\n0\n2\n2\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[0.0, 0.0, 2.0, 2.0]);
        assert!(s.chrom().is_none());
        let s = read_series("chrom,pos,value\n1,10,0.5\n1,20,0.1\n2,5,1.0\n".as_bytes()).unwrap();
        assert_eq!(s.chrom_boundaries(), vec![2]);
        assert_eq!(s.pos().unwrap(), &[10, 20, 5]);
    }

    #[test]
    fn errors_name_the_line() {
        let e = read_series("value\n0\nabc\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = read_series("chrom,value\n1,0\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(read_series("x,y\n1,2\n".as_bytes()).is_err());
        assert!(read_series("value\n".as_bytes()).is_err());
    }
}
