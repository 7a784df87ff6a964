//! JSON and CSV report writers.
//!
//! Floats are printed with 17 significant digits so that written reports
//! round-trip to the exact `f64` values and compare byte for byte.

use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::runner::{BenchmarkReport, Comparison, SweepTable};
use crate::error::Result;
use crate::taskio::container::write_atomic;

struct Sig17<'a>(PrettyFormatter<'a>);

impl Sig17<'_> {
    fn write_float<W: ?Sized + io::Write>(w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{}", fmt_f64(v))
        } else {
            w.write_all(b"null")
        }
    }
}

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        Self::write_float(w, v)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        Self::write_float(w, v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// `v` in scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_atomic(path.as_ref(), to_json(value)?.as_bytes())?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One row per task: `run,task,class_id,intersection,union,delta_initial,delta_at_t_pi`.
pub fn tasks_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("run,task,class_id,intersection,union,delta_initial,delta_at_t_pi\n");
    for t in &report.tasks {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.run,
            t.index,
            t.class_id,
            t.intersection,
            t.union,
            opt(t.delta_initial),
            opt(t.delta_at_t_pi)
        ));
    }
    out
}

/// `label,miou` rows.
pub fn comparison_csv(cmp: &Comparison) -> String {
    let mut out = String::from("label,miou\n");
    for r in &cmp.results {
        out.push_str(&format!("{},{}\n", r.label, fmt_f64(r.miou)));
    }
    out
}

/// `<parameter>,miou` rows followed by reference rows labelled by name.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = format!("{},miou\n", table.parameter);
    for r in &table.rows {
        out.push_str(&format!("{},{}\n", fmt_f64(r.value), fmt_f64(r.miou)));
    }
    for r in &table.references {
        out.push_str(&format!("{},{}\n", r.label, fmt_f64(r.miou)));
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_atomic(path.as_ref(), text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn json_uses_fixed_precision() {
        #[derive(Serialize)]
        struct S {
            x: f64,
            n: u32,
            missing: f64,
        }
        let s = to_json(&S {
            x: 0.1,
            n: 3,
            missing: f64::NAN,
        })
        .unwrap();
        assert!(s.contains("\"x\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("\"missing\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64().unwrap(), 0.1);
    }
}
