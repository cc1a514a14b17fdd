//! Result files: JSON with fixed 17-significant-digit floats, CSV tables and
//! atomic writes.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// `%.16e` floats; everything else as the pretty formatter does it.
struct FixedFormatter(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for FixedFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_float(value).as_bytes())
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );
}

/// Scientific notation with 17 significant digits; non-finite values are
/// written as JSON `null`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFormatter(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// A CSV table whose first line is `# config_hash=<hash>`.
pub struct Table {
    hash: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(hash: &str, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { hash: hash.to_owned(), writer }
    }

    pub fn row(&mut self, values: &[f64]) {
        self.writer.write_record(values.iter().map(|v| format_float(*v))).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        let mut out = format!("# config_hash={}\n", self.hash).into_bytes();
        out.extend(self.writer.into_inner().expect("in-memory flush"));
        out
    }
}

/// Output directory plus the list of files written so far.
pub struct Sink {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl Sink {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), written: Vec::new() }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.written.push(name.to_owned());
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: Table) -> io::Result<()> {
        self.write(name, &table.into_bytes())
    }
}
