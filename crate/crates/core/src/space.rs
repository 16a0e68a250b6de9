//! Querying and persisting item embeddings.
//!
//! Space file layout (tab-separated, floats in shortest round-trip form):
//!
//! ```text
//! PSPACE  1
//! meta    <kind>  <d>  <mu>  <n_M>  <n_U>
//! item    <id>    <delta>  c1 .. cd      (n_M rows)
//! user    <id>    <delta>  c1 .. cd      (n_U rows)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::IdTable;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::factor::{squared_distance, ModelKind, PerceptualSpace};

pub const SPACE_TAG: &str = "PSPACE";
pub const FORMAT_VERSION: &str = "1";

/// Anything that places items at coordinates in ℝ^d.
pub trait ItemEmbedding: Sync {
    fn dim(&self) -> usize;
    fn item_ids(&self) -> &IdTable;
    fn coords(&self, item: usize) -> &[f64];

    fn n_items(&self) -> usize {
        self.item_ids().len()
    }
}

impl ItemEmbedding for PerceptualSpace {
    fn dim(&self) -> usize {
        self.dim
    }

    fn item_ids(&self) -> &IdTable {
        &self.items
    }

    fn coords(&self, item: usize) -> &[f64] {
        self.item_row(item)
    }
}

fn check_item<E: ItemEmbedding + ?Sized>(space: &E, item: usize) -> Result<()> {
    if item < space.n_items() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            what: "items",
            index: item,
            len: space.n_items(),
        })
    }
}

/// Euclidean distance between two items.
pub fn distance<E: ItemEmbedding + ?Sized>(space: &E, a: usize, b: usize) -> Result<f64> {
    check_item(space, a)?;
    check_item(space, b)?;
    Ok(squared_distance(space.coords(a), space.coords(b)).sqrt())
}

/// The `k` items closest to `item` (excluding itself), nearest first; equal
/// distances are ordered by ascending index.
pub fn nearest_neighbors<E: ItemEmbedding + ?Sized>(space: &E, item: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    nearest_neighbors_with(space, item, k, Exec::default())
}

pub fn nearest_neighbors_with<E: ItemEmbedding + ?Sized>(
    space: &E,
    item: usize,
    k: usize,
    exec: Exec,
) -> Result<Vec<(usize, f64)>> {
    check_item(space, item)?;
    if k >= space.n_items() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be smaller than the number of items ({})",
            space.n_items()
        )));
    }
    let query = space.coords(item);
    let mut all: Vec<(usize, f64)> = exec
        .map_range(space.n_items(), |j| (j, squared_distance(query, space.coords(j)).sqrt()))
        .into_iter()
        .filter(|&(j, _)| j != item)
        .collect();
    let by_distance = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < all.len() {
        all.select_nth_unstable_by(k, by_distance);
        all.truncate(k);
    }
    all.sort_unstable_by(by_distance);
    Ok(all)
}

pub(crate) fn push_row(out: &mut String, tag: &str, id: &str, delta: f64, coords: &[f64]) {
    write!(out, "{tag}\t{id}\t{delta}").unwrap();
    for c in coords {
        write!(out, "\t{c}").unwrap();
    }
    out.push('\n');
}

/// Serialises a space in the space-file format.
pub fn format_space(space: &PerceptualSpace) -> String {
    let mut out = String::new();
    writeln!(out, "{SPACE_TAG}\t{FORMAT_VERSION}").unwrap();
    writeln!(
        out,
        "meta\t{}\t{}\t{}\t{}\t{}",
        space.kind,
        space.dim,
        space.mu,
        space.n_items(),
        space.n_users()
    )
    .unwrap();
    for (i, id) in space.items.iter().enumerate() {
        push_row(&mut out, "item", id, space.item_bias[i], space.item_row(i));
    }
    for (u, id) in space.users.iter().enumerate() {
        push_row(&mut out, "user", id, space.user_bias[u], space.user_row(u));
    }
    out
}

pub fn save(space: &PerceptualSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_space(space)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<PerceptualSpace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = parse_embedding_file(&text, path, SPACE_TAG)?;
    let kind: ModelKind = file
        .kind
        .parse()
        .map_err(|_| Error::parse(path, 2, format!("unknown model kind `{}`", file.kind)))?;
    Ok(PerceptualSpace {
        kind,
        dim: file.dim,
        mu: file.mu,
        items: file.items.ids,
        users: file.users.ids,
        item_coords: file.items.coords,
        user_coords: file.users.coords,
        item_bias: file.items.deltas,
        user_bias: file.users.deltas,
    })
}

#[derive(Default)]
pub(crate) struct Rows {
    pub ids: IdTable,
    pub deltas: Vec<f64>,
    pub coords: Vec<f64>,
}

pub(crate) struct EmbeddingFile {
    pub kind: String,
    pub dim: usize,
    pub mu: f64,
    pub items: Rows,
    pub users: Rows,
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} `{field}`")))
}

fn parse_float(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = parse_num(path, line, field, what)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(path, line, format!("non-finite {what}")))
    }
}

/// Shared reader for `PSPACE` and `MSPACE` files.
pub(crate) fn parse_embedding_file(text: &str, path: &Path, tag: &str) -> Result<EmbeddingFile> {
    let eof_line = text.lines().count() + 1;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut next_line = |expected: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(path, eof_line, format!("unexpected end of file, expected {expected}")))
    };

    let (n, header) = next_line("header")?;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 2 || fields[0] != tag {
        return Err(Error::parse(path, n, format!("expected `{tag}<TAB>{FORMAT_VERSION}` header")));
    }
    if fields[1] != FORMAT_VERSION {
        return Err(Error::Version(format!("{tag} version `{}` (supported: {FORMAT_VERSION})", fields[1])));
    }

    let (n, meta) = next_line("meta line")?;
    let fields: Vec<&str> = meta.split('\t').collect();
    if fields.len() != 6 || fields[0] != "meta" {
        return Err(Error::parse(path, n, "expected `meta<TAB>kind<TAB>d<TAB>mu<TAB>n_M<TAB>n_U`"));
    }
    let kind = fields[1].to_owned();
    let dim: usize = parse_num(path, n, fields[2], "dimension")?;
    let mu = parse_float(path, n, fields[3], "mu")?;
    let n_items: usize = parse_num(path, n, fields[4], "item count")?;
    let n_users: usize = parse_num(path, n, fields[5], "user count")?;
    if dim == 0 {
        return Err(Error::Shape("dimension 0".into()));
    }

    let mut read_rows = |row_tag: &str, count: usize| -> Result<Rows> {
        let mut rows = Rows::default();
        rows.coords.reserve(count * dim);
        for k in 0..count {
            let (n, line) = lines.next().ok_or_else(|| {
                Error::parse(
                    path,
                    eof_line,
                    format!("file truncated: expected {count} {row_tag} rows, found {k}"),
                )
            })?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields[0] != row_tag {
                return Err(Error::Shape(format!(
                    "line {n}: expected {count} {row_tag} rows, found {k} before `{}`",
                    fields[0]
                )));
            }
            if fields.len() != dim + 3 {
                return Err(Error::parse(
                    path,
                    n,
                    format!("expected {} fields, found {}", dim + 3, fields.len()),
                ));
            }
            let id = fields[1];
            if id.is_empty() || rows.ids.get(id).is_some() {
                return Err(Error::parse(path, n, format!("empty or duplicate id `{id}`")));
            }
            rows.ids.intern(id);
            rows.deltas.push(parse_float(path, n, fields[2], "bias")?);
            for f in &fields[3..] {
                rows.coords.push(parse_float(path, n, f, "coordinate")?);
            }
        }
        Ok(rows)
    };
    let items = read_rows("item", n_items)?;
    let users = read_rows("user", n_users)?;

    if let Some((n, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Shape(format!("line {n}: rows beyond the declared {n_items} items and {n_users} users")));
    }
    Ok(EmbeddingFile {
        kind,
        dim,
        mu,
        items,
        users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space_2d(points: &[(f64, f64)]) -> PerceptualSpace {
        let items: IdTable = (0..points.len()).map(|i| format!("m{i}")).collect();
        let users: IdTable = ["u0"].into_iter().collect();
        let mut s = PerceptualSpace::zeros(ModelKind::Euclidean, 2, 3.0, items, users);
        for (i, &(x, y)) in points.iter().enumerate() {
            s.item_row_mut(i).copy_from_slice(&[x, y]);
        }
        s
    }

    #[test]
    fn distance_basics() {
        let s = space_2d(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(distance(&s, 0, 1).unwrap(), 5.0);
        assert_eq!(distance(&s, 1, 1).unwrap(), 0.0);
        assert!(distance(&s, 0, 2).is_err());
    }

    #[test]
    fn knn_small() {
        let s = space_2d(&[(0.0, 0.0), (1.0, 0.0), (5.0, 5.0)]);
        let nn = nearest_neighbors(&s, 0, 1).unwrap();
        assert_eq!(nn, vec![(1, 1.0)]);
        let nn = nearest_neighbors(&s, 0, 2).unwrap();
        assert_eq!(nn.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2]);
        assert!(nearest_neighbors(&s, 0, 3).is_err());
    }

    #[test]
    fn knn_ties_by_index() {
        let s = space_2d(&[(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)]);
        let nn = nearest_neighbors(&s, 0, 3).unwrap();
        assert_eq!(nn.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    fn sample_space() -> PerceptualSpace {
        let mut s = space_2d(&[(0.1, -0.2), (1.0 / 3.0, 2.5e-17), (-7.0, 1e300)]);
        s.mu = 3.601_234_567_890_123;
        s.item_bias = vec![0.1, -0.0, 2.0 / 3.0];
        s.user_bias = vec![-1.0 / 7.0];
        s.user_coords = vec![std::f64::consts::PI, -std::f64::consts::E];
        s
    }

    #[test]
    fn round_trip_is_bitwise() {
        let s = sample_space();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        save(&s, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, s);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.item_coords), bits(&s.item_coords));
        assert_eq!(bits(&back.item_bias), bits(&s.item_bias));
        assert_eq!(back.mu.to_bits(), s.mu.to_bits());
    }

    fn load_text(text: &str) -> Result<PerceptualSpace> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        fs::write(&path, text).unwrap();
        load(&path)
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let text = format_space(&sample_space());
        let cut = &text[..text.len() - 25];
        match load_text(cut) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        let lines: Vec<&str> = text.lines().take(4).collect();
        assert!(matches!(load_text(&lines.join("\n")), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn unknown_version_rejected() {
        let text = format_space(&sample_space()).replacen("PSPACE\t1", "PSPACE\t7", 1);
        assert!(matches!(load_text(&text), Err(Error::Version(_))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let text = format_space(&sample_space()).replacen("\t3\t1\n", "\t2\t1\n", 1);
        assert!(matches!(load_text(&text), Err(Error::Shape(_))));
        let text = format_space(&sample_space()).replacen("\t3\t1\n", "\t3\t0\n", 1);
        assert!(matches!(load_text(&text), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn metric_axioms(pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3)) {
            let s = space_2d(&pts);
            let d = |a, b| distance(&s, a, b).unwrap();
            prop_assert!(d(0, 1) >= 0.0);
            prop_assert_eq!(d(0, 1), d(1, 0));
            prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
        }

        #[test]
        fn round_trip_any_values(vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 8)) {
            let mut s = space_2d(&[(vals[0], vals[1]), (vals[2], vals[3])]);
            s.item_bias = vec![vals[4], vals[5]];
            s.user_coords = vec![vals[6], vals[7]];
            let text = format_space(&s);
            let file = parse_embedding_file(&text, Path::new("mem"), SPACE_TAG).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&file.items.coords), bits(&s.item_coords));
            prop_assert_eq!(bits(&file.items.deltas), bits(&s.item_bias));
            prop_assert_eq!(bits(&file.users.coords), bits(&s.user_coords));
        }
    }
}
