//! Matrix Market and edge-list input, Matrix Market output.
//!
//! Matrix Market files use 1-based coordinates; everything in memory is
//! 0-based. Both `coordinate` and dense `array` layouts are read. Values are
//! written with 17 significant digits, so a write/read round trip is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use diter::{DenseVector, SparseMatrix};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// A parsed Matrix Market body: shape and 0-based `(row, col, value)` entries.
#[derive(Debug, Clone, PartialEq)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

struct LineParser<'a> {
    name: &'a str,
    line: usize,
}

impl LineParser<'_> {
    fn err(&self, message: impl Into<String>) -> CliError {
        CliError::Parse {
            source_name: self.name.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn index(&self, token: Option<&str>, what: &str, bound: usize) -> Result<usize> {
        let token = token.ok_or_else(|| self.err(format!("missing {what}")))?;
        let v: usize = token
            .parse()
            .map_err(|_| self.err(format!("invalid {what} `{token}`")))?;
        if v == 0 || v > bound {
            return Err(self.err(format!("{what} {v} outside 1..={bound}")));
        }
        Ok(v - 1)
    }

    fn value(&self, token: Option<&str>) -> Result<f64> {
        let token = token.ok_or_else(|| self.err("real values required"))?;
        let v: f64 = token
            .parse()
            .map_err(|_| self.err(format!("invalid value `{token}`")))?;
        if !v.is_finite() {
            return Err(self.err(format!("non-finite value `{token}`")));
        }
        Ok(v)
    }
}

fn parse_header(p: &LineParser, line: &str) -> Result<(Layout, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(p.err("expected header `%%MatrixMarket matrix <layout> <field> <symmetry>`"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(p.err(format!("unsupported layout `{other}`"))),
    };
    match tokens[3].as_str() {
        "real" | "double" | "integer" => {}
        "pattern" => return Err(p.err("real values required (pattern files carry no values)")),
        other => return Err(p.err(format!("real values required, found field `{other}`"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(p.err(format!("unsupported symmetry `{other}`"))),
    };
    Ok((layout, symmetry))
}

fn parse_matrix_market(reader: impl BufRead, name: &str) -> Result<RawMatrix> {
    let mut p = LineParser { name, line: 0 };
    let mut lines = reader.lines();
    let mut next_line = |p: &mut LineParser| -> Result<Option<String>> {
        for line in lines.by_ref() {
            p.line += 1;
            let line = line.map_err(|e| p.err(format!("read failed: {e}")))?;
            if p.line == 1 {
                return Ok(Some(line));
            }
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('%') {
                return Ok(Some(trimmed.to_string()));
            }
        }
        Ok(None)
    };

    let header = next_line(&mut p)?.ok_or_else(|| p.err("empty file"))?;
    let (layout, symmetry) = parse_header(&p, &header)?;
    let size = next_line(&mut p)?.ok_or_else(|| p.err("missing size line"))?;
    let mut size_tokens = size.split_whitespace();
    let rows = p.index(size_tokens.next(), "row count", usize::MAX)? + 1;
    let cols = p.index(size_tokens.next(), "column count", usize::MAX)? + 1;
    let expected = match layout {
        Layout::Coordinate => {
            let t = size_tokens.next().ok_or_else(|| p.err("missing entry count"))?;
            t.parse::<usize>()
                .map_err(|_| p.err(format!("invalid entry count `{t}`")))?
        }
        Layout::Array => match symmetry {
            Symmetry::General => rows * cols,
            Symmetry::Symmetric => rows * (rows + 1) / 2,
            Symmetry::SkewSymmetric => rows * (rows.saturating_sub(1)) / 2,
        },
    };
    if size_tokens.next().is_some() {
        return Err(p.err("unexpected token on size line"));
    }
    if symmetry != Symmetry::General && rows != cols {
        return Err(p.err("symmetric storage requires a square matrix"));
    }

    let mut entries = Vec::with_capacity(expected);
    let mut stored = 0usize;
    while let Some(line) = next_line(&mut p)? {
        if stored == expected {
            return Err(p.err(format!("more than the {expected} declared entries")));
        }
        let mut tokens = line.split_whitespace();
        let (row, col) = match layout {
            Layout::Coordinate => {
                let r = p.index(tokens.next(), "row index", rows)?;
                let c = p.index(tokens.next(), "column index", cols)?;
                (r, c)
            }
            Layout::Array => array_position(stored, rows, symmetry),
        };
        stored += 1;
        let v = p.value(tokens.next())?;
        if tokens.next().is_some() {
            return Err(p.err("unexpected trailing token"));
        }
        if symmetry == Symmetry::SkewSymmetric && row == col {
            return Err(p.err("skew-symmetric storage cannot hold diagonal entries"));
        }
        entries.push((row, col, v));
        if row != col {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => entries.push((col, row, v)),
                Symmetry::SkewSymmetric => entries.push((col, row, -v)),
            }
        }
    }
    if stored != expected {
        return Err(p.err(format!("expected {expected} entries, found {stored}")));
    }
    Ok(RawMatrix { rows, cols, entries })
}

/// Position of the `k`-th stored value of a column-major dense layout. For
/// symmetric layouts only the lower triangle is stored.
fn array_position(k: usize, n: usize, symmetry: Symmetry) -> (usize, usize) {
    let skip = match symmetry {
        Symmetry::General => return (k % n, k / n),
        Symmetry::Symmetric => 0,
        Symmetry::SkewSymmetric => 1,
    };
    let mut remaining = k;
    for col in 0..n {
        let len = n - col - skip;
        if remaining < len {
            return (col + skip + remaining, col);
        }
        remaining -= len;
    }
    unreachable!("entry count checked against the size line")
}

fn into_square(raw: RawMatrix, name: &str) -> Result<SparseMatrix> {
    if raw.rows != raw.cols {
        return Err(CliError::Format(format!(
            "{name}: matrix must be square, found {}x{}",
            raw.rows, raw.cols
        )));
    }
    Ok(SparseMatrix::from_triplets(raw.rows, &raw.entries)?)
}

fn into_vector(raw: RawMatrix, name: &str) -> Result<DenseVector> {
    if raw.cols != 1 {
        return Err(CliError::Format(format!(
            "{name}: expected a single column, found {}x{}",
            raw.rows, raw.cols
        )));
    }
    let mut v = vec![0.0; raw.rows];
    for (r, _, x) in raw.entries {
        v[r] += x;
    }
    Ok(DenseVector::new(v)?)
}

/// Reads a square sparse matrix. Duplicate coordinates are summed.
pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix> {
    let name = path.display().to_string();
    into_square(parse_matrix_market(open(path)?, &name)?, &name)
}

/// Parses a square matrix from an in-memory Matrix Market document.
pub fn parse_matrix_market_str(text: &str) -> Result<SparseMatrix> {
    into_square(parse_matrix_market(text.as_bytes(), "<input>")?, "<input>")
}

/// Reads an `n x 1` vector in array (dense) or coordinate layout.
pub fn read_vector(path: &Path) -> Result<DenseVector> {
    let name = path.display().to_string();
    into_vector(parse_matrix_market(open(path)?, &name)?, &name)
}

pub fn parse_vector_str(text: &str) -> Result<DenseVector> {
    into_vector(parse_matrix_market(text.as_bytes(), "<input>")?, "<input>")
}

pub fn write_matrix_market_to(out: &mut impl Write, m: &SparseMatrix) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.n(), m.n(), m.nnz())?;
    for (row, col, v) in m.triplets() {
        writeln!(out, "{} {} {v:.16e}", row + 1, col + 1)?;
    }
    Ok(())
}

pub fn write_matrix_market(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut out = create(path)?;
    write_matrix_market_to(&mut out, m)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn write_vector_to(out: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} 1", v.len())?;
    for x in v {
        writeln!(out, "{x:.16e}")?;
    }
    Ok(())
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = create(path)?;
    write_vector_to(&mut out, v)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

/// How edge-list lines become link weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Each out-link of `i` gets `1 / outdeg(i)`; a third column, if
    /// present, must be nonnegative and is otherwise ignored.
    #[default]
    Uniform,
    /// The third column is the weight `p_ji` of the link `i → j`.
    Given,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub matrix: SparseMatrix,
    /// Nodes without out-links. Their columns are zero, so a stochastic
    /// reading of the matrix only bounds the true limit.
    pub dangling: Vec<usize>,
}

fn parse_edge_list(reader: impl BufRead, name: &str, mode: WeightMode, min_nodes: usize) -> Result<EdgeList> {
    let mut p = LineParser { name, line: 0 };
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut n = min_nodes;
    for line in reader.lines() {
        p.line += 1;
        let line = line.map_err(|e| p.err(format!("read failed: {e}")))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(p.err(format!("expected `src dst [weight]`, found {} fields", fields.len())));
        }
        let node = |t: &str, what: &str| -> Result<usize> {
            t.parse::<usize>()
                .map_err(|_| p.err(format!("invalid {what} `{t}`")))
        };
        let src = node(fields[0], "source")?;
        let dst = node(fields[1], "destination")?;
        let weight = fields.get(2).map(|t| p.value(Some(t))).transpose()?;
        let w = match (mode, weight) {
            (WeightMode::Uniform, Some(w)) if w < 0.0 => {
                return Err(p.err(format!("negative weight {w} in uniform mode")))
            }
            (WeightMode::Uniform, _) => 1.0,
            (WeightMode::Given, Some(w)) => w,
            (WeightMode::Given, None) => return Err(p.err("weight column required in given mode")),
        };
        n = n.max(src + 1).max(dst + 1);
        edges.push((dst, src, w));
    }
    if n == 0 {
        return Err(CliError::Format(format!("{name}: no edges")));
    }
    let mut out_degree = vec![0usize; n];
    for &(_, src, _) in &edges {
        out_degree[src] += 1;
    }
    if mode == WeightMode::Uniform {
        for e in &mut edges {
            e.2 = 1.0 / out_degree[e.1] as f64;
        }
    }
    let matrix = SparseMatrix::from_triplets(n, &edges)?;
    let dangling = (0..n).filter(|&i| matrix.out_degree(i) == 0).collect();
    Ok(EdgeList { matrix, dangling })
}

/// Reads `src<TAB>dst[<TAB>weight]` lines with 0-based node ids. The node
/// count is the largest id plus one, or `min_nodes` if larger. Lines starting
/// with `#` or `%` are comments.
pub fn read_edge_list(path: &Path, mode: WeightMode, min_nodes: usize) -> Result<EdgeList> {
    parse_edge_list(open(path)?, &path.display().to_string(), mode, min_nodes)
}

pub fn parse_edge_list_str(text: &str, mode: WeightMode) -> Result<EdgeList> {
    parse_edge_list(text.as_bytes(), "<input>", mode, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_err(text: &str) -> String {
        parse_matrix_market_str(text).unwrap_err().to_string()
    }

    #[test]
    fn reads_one_by_one() {
        let m = parse_matrix_market_str("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.0\n").unwrap();
        assert_eq!(m, SparseMatrix::diagonal(&[2.0]).unwrap());
    }

    #[test]
    fn sums_duplicates_and_skips_comments() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n\n2 2 3\n1 2 1.5\n1 2 0.5\n2 1 -1\n";
        let m = parse_matrix_market_str(text).unwrap();
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn expands_symmetric_storage() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4\n2 1 -1\n";
        let m = parse_matrix_market_str(text).unwrap();
        assert_eq!(m.to_dense_rows(), vec![vec![4.0, -1.0], vec![-1.0, 0.0]]);
        let skew = "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 3\n";
        let m = parse_matrix_market_str(skew).unwrap();
        assert_eq!(m.to_dense_rows(), vec![vec![0.0, -3.0], vec![3.0, 0.0]]);
    }

    #[test]
    fn reads_array_layouts() {
        let m = parse_matrix_market_str("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n").unwrap();
        assert_eq!(m.to_dense_rows(), vec![vec![1.0, 3.0], vec![2.0, 4.0]]);
        let s = parse_matrix_market_str("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n4\n").unwrap();
        assert_eq!(s.to_dense_rows(), vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        let v = parse_vector_str("%%MatrixMarket matrix array real general\n3 1\n1\n-2\n0.5\n").unwrap();
        assert_eq!(v.as_slice(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn rejects_bad_input_with_line_numbers() {
        assert!(parse_err("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n")
            .contains("real values required"));
        assert!(parse_err("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1\n")
            .contains("real values required"));
        assert!(parse_err("%%MatrixMarket matrix coordinate real general\n2 3 0\n").contains("square"));
        assert_eq!(
            parse_err("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n3 1 1\n"),
            "<input>:4: row index 3 outside 1..=2"
        );
        assert!(parse_err("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n")
            .contains("expected 2 entries, found 1"));
        assert!(parse_err("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n1 1 1\n")
            .contains(":4: more than"));
        assert!(parse_err("MatrixMarket\n").starts_with("<input>:1:"));
        assert!(parse_err("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 nan\n").contains(":3:"));
        assert!(parse_err("").contains("empty file"));
    }

    #[test]
    fn write_read_round_trip_is_exact() {
        let m = SparseMatrix::from_triplets(3, &[(0, 0, 0.1), (2, 0, -1.0 / 3.0), (1, 2, 1e-300), (2, 2, 7.0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market_to(&mut buf, &m).unwrap();
        assert_eq!(parse_matrix_market_str(std::str::from_utf8(&buf).unwrap()).unwrap(), m);

        let v = [0.1, -2.0 / 3.0, f64::MIN_POSITIVE];
        let mut buf = Vec::new();
        write_vector_to(&mut buf, &v).unwrap();
        assert_eq!(parse_vector_str(std::str::from_utf8(&buf).unwrap()).unwrap().as_slice(), &v);
    }

    #[test]
    fn edge_lists() {
        let cycle = parse_edge_list_str("0\t1\n1\t0\n", WeightMode::Uniform).unwrap();
        assert_eq!(cycle.matrix.get(1, 0), 1.0);
        assert_eq!(cycle.matrix.get(0, 1), 1.0);
        assert!(cycle.dangling.is_empty());

        let split = parse_edge_list_str("# two out-links\n0\t1\n0\t2\n", WeightMode::Uniform).unwrap();
        assert_eq!(split.matrix.get(1, 0), 0.5);
        assert_eq!(split.matrix.get(2, 0), 0.5);
        assert_eq!(split.dangling, vec![1, 2]);

        let given = parse_edge_list_str("0 1 0.25\n1 0 -0.5\n", WeightMode::Given).unwrap();
        assert_eq!(given.matrix.get(1, 0), 0.25);
        assert_eq!(given.matrix.get(0, 1), -0.5);

        let err = parse_edge_list_str("0\t1\t-1\n", WeightMode::Uniform).unwrap_err().to_string();
        assert!(err.contains(":1:") && err.contains("negative weight"));
        let err = parse_edge_list_str("0\t1\n0\n", WeightMode::Uniform).unwrap_err().to_string();
        assert!(err.starts_with("<input>:2:"));
        assert!(parse_edge_list_str("0 1\n", WeightMode::Given).is_err());
        assert!(parse_edge_list_str("a 1\n", WeightMode::Uniform).is_err());
    }
}
