//! Persisted index table of all feasible allocations.
//!
//! The file is a headerless CSV. Row `j` holds the 1-based target indices of
//! the `j`-th allocation in enumeration order, `k` per camera, concatenated.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::assembly::Allocation;
use crate::enumeration::{count_feasible, enumerate_allocations, SearchSpaceSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTable {
    spec: SearchSpaceSpec,
    rows: Vec<Vec<usize>>,
}

impl IndexTable {
    pub fn spec(&self) -> &SearchSpaceSpec {
        &self.spec
    }

    /// 1-based index rows.
    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn allocation(&self, row: usize) -> Option<Allocation> {
        let r = self.rows.get(row)?;
        let subsets: Vec<Vec<usize>> = r.chunks(self.spec.k).map(<[usize]>::to_vec).collect();
        Allocation::from_one_based(&subsets)
            .ok()
            .map(|a| a.canonical())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    /// Loads and validates a table: every row must be a feasible canonical
    /// allocation, rows strictly increasing, and the row count complete.
    pub fn load(path: impl AsRef<Path>, spec: &SearchSpaceSpec) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let corrupt = |row: usize, message: String| Error::CorruptTable {
            path: path.to_path_buf(),
            row,
            message,
        };
        let width = spec.n_cam * spec.k;
        let mut rows: Vec<Vec<usize>> = Vec::new();
        let mut seen = HashSet::new();
        for (j, line) in BufReader::new(file).lines().enumerate() {
            let row_no = j + 1;
            let line = line.map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| corrupt(row_no, format!("bad index: {e}")))?;
            if row.len() != width {
                return Err(corrupt(
                    row_no,
                    format!("expected {width} indices, found {}", row.len()),
                ));
            }
            let subsets: Vec<Vec<usize>> = row.chunks(spec.k).map(<[usize]>::to_vec).collect();
            let alloc =
                Allocation::from_one_based(&subsets).map_err(|e| corrupt(row_no, e.to_string()))?;
            if alloc.canonical().subsets() != alloc.subsets() {
                return Err(corrupt(row_no, "row is not in canonical order".into()));
            }
            if !alloc.subsets_distinct() || !alloc.covers(spec.p) {
                return Err(corrupt(row_no, "row is not a feasible allocation".into()));
            }
            if !seen.insert(row.clone()) {
                return Err(corrupt(row_no, "duplicate row".into()));
            }
            if rows.last().is_some_and(|prev| *prev >= row) {
                return Err(corrupt(row_no, "rows out of enumeration order".into()));
            }
            rows.push(row);
        }
        let expected = count_feasible(spec);
        if num_bigint::BigUint::from(rows.len()) != expected {
            return Err(corrupt(
                rows.len(),
                format!("table has {} rows, expected {expected}", rows.len()),
            ));
        }
        Ok(Self { spec: *spec, rows })
    }
}

pub fn build_index_table(spec: &SearchSpaceSpec) -> Result<IndexTable> {
    let rows = enumerate_allocations(spec)?
        .map(|a| a.to_one_based())
        .collect();
    Ok(IndexTable { spec: *spec, rows })
}

pub fn save_index_table(table: &IndexTable, path: impl AsRef<Path>) -> Result<()> {
    table.save(path)
}

pub fn load_index_table(path: impl AsRef<Path>, spec: &SearchSpaceSpec) -> Result<IndexTable> {
    IndexTable::load(path, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let spec = SearchSpaceSpec::new(6, 3, 2).unwrap();
        let t = build_index_table(&spec).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.rows()[0], vec![1, 2, 3, 4, 5, 6]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("1,2,3,4,5,6\n"));
        assert_eq!(load_index_table(&path, &spec).unwrap(), t);
        assert_eq!(
            t.allocation(0).unwrap().subsets(),
            &[vec![0, 1, 2], vec![3, 4, 5]]
        );
    }

    #[test]
    fn io_failures() {
        let spec = SearchSpaceSpec::new(6, 3, 2).unwrap();
        let t = build_index_table(&spec).unwrap();
        assert!(matches!(t.save(""), Err(Error::Io { .. })));
        assert!(matches!(
            t.save("/nonexistent/dir/t.csv"),
            Err(Error::Io { .. })
        ));
        assert!(matches!(
            IndexTable::load("/nonexistent/t.csv", &spec),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn corrupt_tables_are_rejected() {
        let spec = SearchSpaceSpec::new(6, 3, 2).unwrap();
        let t = build_index_table(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.save(&path).unwrap();
        let good = std::fs::read_to_string(&path).unwrap();

        let check = |text: &str| {
            std::fs::write(&path, text).unwrap();
            match IndexTable::load(&path, &spec) {
                Err(Error::CorruptTable { row, .. }) => row,
                other => panic!("expected CorruptTable, got {other:?}"),
            }
        };
        // truncated mid-row
        assert_eq!(check(&good[..good.len() - 4]), 10);
        // truncated at a row boundary
        let lines: Vec<&str> = good.lines().collect();
        assert_eq!(check(&(lines[..9].join("\n") + "\n")), 9);
        // coverage violated
        let mut bad = lines.clone();
        bad[2] = "1,2,3,1,2,4";
        assert_eq!(check(&(bad.join("\n") + "\n")), 3);
        // duplicate
        let mut dup = lines.clone();
        dup[1] = lines[0];
        assert_eq!(check(&(dup.join("\n") + "\n")), 2);
        // non-numeric
        let mut junk = lines.clone();
        junk[0] = "a,b,c,d,e,f";
        assert_eq!(check(&(junk.join("\n") + "\n")), 1);
    }
}
