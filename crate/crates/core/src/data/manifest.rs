//! The `ground_truth.csv` manifest: header `filename,x,y`, one row per
//! annotated image, coordinates in original pixels. A row with both
//! coordinates empty records that the image has no singular point.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use super::{DataError, Point};

const HEADER: [&str; 3] = ["filename", "x", "y"];

/// What the manifest says about one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifestEntry {
    Point(Point),
    NoSingularPoint,
}

impl ManifestEntry {
    pub fn point(self) -> Option<Point> {
        match self {
            Self::Point(p) => Some(p),
            Self::NoSingularPoint => None,
        }
    }
}

/// Manifest rows keyed by filename, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: IndexMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(DataError::MissingManifest(path.to_owned()));
        }
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, DataError> {
        let malformed = |row: usize, reason: String| DataError::MalformedRow { row, reason };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        match records.next() {
            Some(Ok(h)) if h.iter().eq(HEADER) => {}
            Some(Ok(h)) => return Err(malformed(1, format!("expected header filename,x,y, found {:?}", h.iter().collect::<Vec<_>>()))),
            Some(Err(e)) => return Err(malformed(1, e.to_string())),
            None => return Err(malformed(1, "empty manifest".into())),
        }
        let mut entries = IndexMap::new();
        for record in records {
            let record = record.map_err(|e| malformed(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let row = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != 3 {
                return Err(malformed(row, format!("expected 3 fields, found {}", record.len())));
            }
            let name = &record[0];
            if name.is_empty() {
                return Err(malformed(row, "empty filename".into()));
            }
            let entry = match (&record[1], &record[2]) {
                ("", "") => ManifestEntry::NoSingularPoint,
                (x, y) => {
                    let parse = |s: &str| {
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite() && *v >= 0.0)
                            .ok_or_else(|| malformed(row, format!("bad coordinate {s:?}")))
                    };
                    ManifestEntry::Point(Point::new(parse(x)?, parse(y)?))
                }
            };
            if entries.insert(name.to_owned(), entry).is_some() {
                return Err(malformed(row, format!("duplicate filename {name}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, filename: &str) -> Option<ManifestEntry> {
        self.entries.get(filename).copied()
    }

    /// Replaces or appends the row for `filename`.
    pub fn set(&mut self, filename: impl Into<String>, entry: ManifestEntry) {
        self.entries.insert(filename.into(), entry);
    }

    pub fn remove(&mut self, filename: &str) -> Option<ManifestEntry> {
        self.entries.shift_remove(filename)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ManifestEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(HEADER).expect("in-memory write");
        for (name, entry) in &self.entries {
            let (x, y) = match entry {
                ManifestEntry::Point(p) => (p.x.to_string(), p.y.to_string()),
                ManifestEntry::NoSingularPoint => (String::new(), String::new()),
            };
            w.write_record([name.as_str(), &x, &y]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
    }

    /// Writes to a sibling temporary file and renames it over `path`.
    pub fn write_atomic(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        fs::write(&tmp, self.to_csv_string())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_points_and_explicit_absence() {
        let m = Manifest::parse("filename,x,y\na.png,101,87\nb.png,,\nc.pgm, 3.5 ,0\n").unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.get("a.png"), Some(ManifestEntry::Point(Point::new(101.0, 87.0))));
        assert_eq!(m.get("b.png"), Some(ManifestEntry::NoSingularPoint));
        assert_eq!(m.get("c.pgm").unwrap().point(), Some(Point::new(3.5, 0.0)));
        assert_eq!(m.get("d.png"), None);
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let cases = [
            ("filename,x,y\na.png,1,2\nb.png,1\n", 3),
            ("filename,x,y\na.png,one,2\n", 2),
            ("filename,x,y\na.png,1,\n", 2),
            ("filename,x,y\na.png,-1,2\n", 2),
            ("filename,x,y\na.png,1,2\na.png,3,4\n", 3),
            ("name,x,y\n", 1),
            ("", 1),
        ];
        for (text, line) in cases {
            match Manifest::parse(text) {
                Err(DataError::MalformedRow { row, .. }) => assert_eq!(row, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut m = Manifest::new();
        m.set("img3.png", ManifestEntry::Point(Point::new(101.0, 87.0)));
        m.set("odd, name.png", ManifestEntry::Point(Point::new(0.1 + 0.2, 1e-7)));
        m.set("blank.png", ManifestEntry::NoSingularPoint);
        let text = m.to_csv_string();
        assert!(text.starts_with("filename,x,y\nimg3.png,101,87\n"));
        assert_eq!(Manifest::parse(&text).unwrap(), m);
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Manifest::read(dir.path().join("ground_truth.csv")),
            Err(DataError::MissingManifest(_))
        ));
    }
}
