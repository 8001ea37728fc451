//! CSV emission shared by every data export.

use std::io;

fn into_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Writes a header row followed by one row per record.
pub fn write_rows<W, R, const N: usize>(out: W, header: [&str; N], rows: R) -> io::Result<()>
where
    W: io::Write,
    R: IntoIterator<Item = [String; N]>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(into_io)?;
    for row in rows {
        w.write_record(&row).map_err(into_io)?;
    }
    w.flush()
}

pub fn write_pairs<W: io::Write>(out: W, header: [&str; 2], points: &[(f64, f64)]) -> io::Result<()> {
    write_rows(
        out,
        header,
        points.iter().map(|(a, b)| [fmt_f64(*a), fmt_f64(*b)]),
    )
}

/// Shortest round-trip decimal; non-finite values as `inf`, `-inf`, `NaN`.
pub fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// Renders CSV into a string.
pub fn to_string<F>(write: F) -> String
where
    F: FnOnce(&mut Vec<u8>) -> io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}
