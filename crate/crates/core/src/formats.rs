//! Versioned plain-text formats for genomes and voxel bodies.
//!
//! Genome:
//! ```text
//! voxevo-genome 1
//! id 17
//! parent 4
//! net morphology
//! node 0 input identity
//! conn 0 5 -4.1000000000000001e-01 1
//! net control
//! ...
//! end
//! ```
//! Weights carry 17 significant digits, which round-trips every `f64`.
//!
//! Body: `dims X Y Z`, then for each z a `layer z` line followed by Y rows
//! of X characters (`.` empty, `p` passive, `a` active), then optional
//! `phase x y z radians` lines.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cppn::{ActivationKind, Connection, Cppn, Genome, Node, NodeKind};
use crate::phenotype::{Material, VoxelBody};

pub const GENOME_FORMAT_VERSION: u32 = 1;
pub const BODY_FORMAT_VERSION: u32 = 1;
const GENOME_MAGIC: &str = "voxevo-genome";
const BODY_MAGIC: &str = "voxevo-body";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

fn perr<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError::Parse {
        line,
        message: message.into(),
    })
}

pub fn serialize_genome(g: &Genome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{GENOME_MAGIC} {GENOME_FORMAT_VERSION}");
    let _ = writeln!(s, "id {}", g.id);
    match g.parent_id {
        Some(p) => {
            let _ = writeln!(s, "parent {p}");
        }
        None => s.push_str("parent none\n"),
    }
    for (name, net) in [("morphology", &g.morphology), ("control", &g.control)] {
        let _ = writeln!(s, "net {name}");
        for n in &net.nodes {
            let _ = writeln!(s, "node {} {} {}", n.id, n.kind.name(), n.activation.name());
        }
        for c in &net.connections {
            let _ = writeln!(s, "conn {} {} {:.16e} {}", c.source, c.target, c.weight, c.enabled as u8);
        }
    }
    s.push_str("end\n");
    s
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
            last: 0,
        }
    }

    /// Next non-blank line as (1-based number, tokens).
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if !toks.is_empty() {
                return Some((i + 1, toks));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), FormatError> {
        match self.next() {
            Some(x) => Ok(x),
            None => perr(self.last + 1, format!("unexpected end of file, expected {what}")),
        }
    }
}

fn field<T: std::str::FromStr>(tok: Option<&&str>, line: usize, what: &str) -> Result<T, FormatError> {
    match tok.and_then(|t| t.parse().ok()) {
        Some(v) => Ok(v),
        None => perr(line, format!("expected {what}")),
    }
}

fn check_header(lines: &mut Lines<'_>, magic: &str, expected: u32) -> Result<(), FormatError> {
    let (ln, toks) = lines.expect("header")?;
    if toks.first() != Some(&magic) || toks.len() != 2 {
        return perr(ln, format!("expected `{magic} <version>` header"));
    }
    let found: u32 = field(toks.get(1), ln, "format version")?;
    if found != expected {
        return Err(FormatError::VersionMismatch { found, expected });
    }
    Ok(())
}

pub fn parse_genome(text: &str) -> Result<Genome, FormatError> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, GENOME_MAGIC, GENOME_FORMAT_VERSION)?;
    let (ln, toks) = lines.expect("id")?;
    if toks.first() != Some(&"id") || toks.len() != 2 {
        return perr(ln, "expected `id <n>`");
    }
    let id: u64 = field(toks.get(1), ln, "integer id")?;
    let (ln, toks) = lines.expect("parent")?;
    if toks.first() != Some(&"parent") || toks.len() != 2 {
        return perr(ln, "expected `parent <n|none>`");
    }
    let parent_id = if toks[1] == "none" {
        None
    } else {
        Some(field(toks.get(1), ln, "integer parent id or none")?)
    };

    let mut nets: Vec<(String, Cppn, usize)> = Vec::new();
    loop {
        let (ln, toks) = lines.expect("`net`, `node`, `conn` or `end`")?;
        match toks[0] {
            "net" if toks.len() == 2 => nets.push((
                toks[1].to_string(),
                Cppn {
                    nodes: Vec::new(),
                    connections: Vec::new(),
                },
                ln,
            )),
            "node" if toks.len() == 4 => {
                let Some(net) = nets.last_mut() else {
                    return perr(ln, "node before any `net` line");
                };
                let kind = NodeKind::parse(toks[2]).ok_or_else(|| FormatError::Parse {
                    line: ln,
                    message: format!("unknown node kind `{}`", toks[2]),
                })?;
                let activation = ActivationKind::parse(toks[3]).ok_or_else(|| FormatError::Parse {
                    line: ln,
                    message: format!("unknown activation `{}`", toks[3]),
                })?;
                net.1.nodes.push(Node {
                    id: field(toks.get(1), ln, "node id")?,
                    kind,
                    activation,
                });
            }
            "conn" if toks.len() == 5 => {
                let Some(net) = nets.last_mut() else {
                    return perr(ln, "conn before any `net` line");
                };
                let enabled = match toks[4] {
                    "1" => true,
                    "0" => false,
                    _ => return perr(ln, "enabled flag must be 0 or 1"),
                };
                let weight: f64 = field(toks.get(3), ln, "weight")?;
                if !weight.is_finite() {
                    return perr(ln, "weight must be finite");
                }
                net.1.connections.push(Connection {
                    source: field(toks.get(1), ln, "source id")?,
                    target: field(toks.get(2), ln, "target id")?,
                    weight,
                    enabled,
                });
            }
            "end" if toks.len() == 1 => break,
            _ => return perr(ln, format!("unexpected `{}`", toks.join(" "))),
        }
    }
    if let Some((ln, _)) = lines.next() {
        return perr(ln, "content after `end`");
    }

    let mut morphology = None;
    let mut control = None;
    for (name, net, ln) in nets {
        if let Err(e) = net.validate() {
            return perr(ln, format!("invalid {name} network: {e}"));
        }
        let slot = match name.as_str() {
            "morphology" => &mut morphology,
            "control" => &mut control,
            _ => return perr(ln, format!("unknown network `{name}`")),
        };
        if slot.replace(net).is_some() {
            return perr(ln, format!("duplicate network `{name}`"));
        }
    }
    let last = lines.last;
    Ok(Genome {
        id,
        parent_id,
        morphology: morphology.ok_or(FormatError::Parse {
            line: last,
            message: "missing morphology network".into(),
        })?,
        control: control.ok_or(FormatError::Parse {
            line: last,
            message: "missing control network".into(),
        })?,
    })
}

pub fn serialize_body(body: &VoxelBody) -> String {
    let (nx, ny, nz) = body.dims;
    let mut s = String::new();
    let _ = writeln!(s, "{BODY_MAGIC} {BODY_FORMAT_VERSION}");
    let _ = writeln!(s, "dims {nx} {ny} {nz}");
    for z in 0..nz {
        let _ = writeln!(s, "layer {z}");
        for y in 0..ny {
            for x in 0..nx {
                s.push(match body.material[body.index(x, y, z)] {
                    Material::Empty => '.',
                    Material::Passive => 'p',
                    Material::Active => 'a',
                });
            }
            s.push('\n');
        }
    }
    for i in 0..body.len() {
        if body.material[i] == Material::Active && body.phase[i] != 0.0 {
            let (x, y, z) = body.coords(i);
            let _ = writeln!(s, "phase {x} {y} {z} {:.16e}", body.phase[i]);
        }
    }
    s
}

pub fn parse_body(text: &str) -> Result<VoxelBody, FormatError> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, BODY_MAGIC, BODY_FORMAT_VERSION)?;
    let (ln, toks) = lines.expect("dims")?;
    if toks.first() != Some(&"dims") || toks.len() != 4 {
        return perr(ln, "expected `dims X Y Z`");
    }
    let dims: (usize, usize, usize) = (
        field(toks.get(1), ln, "X")?,
        field(toks.get(2), ln, "Y")?,
        field(toks.get(3), ln, "Z")?,
    );
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return perr(ln, "dims must be positive");
    }
    let mut body = VoxelBody::filled(dims, Material::Empty);
    for z in 0..dims.2 {
        let (ln, toks) = lines.expect("layer")?;
        if toks != ["layer", z.to_string().as_str()] {
            return perr(ln, format!("expected `layer {z}`"));
        }
        for y in 0..dims.1 {
            let (ln, toks) = lines.expect("layer row")?;
            let row = toks.concat();
            if row.chars().count() != dims.0 {
                return perr(ln, format!("row must have {} cells", dims.0));
            }
            for (x, ch) in row.chars().enumerate() {
                let i = body.index(x, y, z);
                body.material[i] = match ch {
                    '.' => Material::Empty,
                    'p' => Material::Passive,
                    'a' => Material::Active,
                    _ => return perr(ln, format!("unknown cell `{ch}`")),
                };
            }
        }
    }
    while let Some((ln, toks)) = lines.next() {
        if toks.first() != Some(&"phase") || toks.len() != 5 {
            return perr(ln, "expected `phase x y z radians`");
        }
        let (x, y, z): (usize, usize, usize) = (
            field(toks.get(1), ln, "x")?,
            field(toks.get(2), ln, "y")?,
            field(toks.get(3), ln, "z")?,
        );
        if x >= dims.0 || y >= dims.1 || z >= dims.2 {
            return perr(ln, "phase cell outside dims");
        }
        let v: f64 = field(toks.get(4), ln, "phase value")?;
        let i = body.index(x, y, z);
        if body.material[i] != Material::Active {
            return perr(ln, "phase given for a non-active cell");
        }
        body.phase[i] = v;
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cppn::random_genome;
    use rand::SeedableRng;

    #[test]
    fn genome_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut g = random_genome(&mut rng, 42);
        g.parent_id = Some(7);
        g.morphology.connections[0].weight = 0.1;
        let text = serialize_genome(&g);
        let back = parse_genome(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.morphology.connections[0].weight.to_bits(), 0.1f64.to_bits());
    }

    #[test]
    fn genome_errors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let text = serialize_genome(&random_genome(&mut rng, 1));
        let truncated: String = text.lines().take(9).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_genome(&truncated), Err(FormatError::Parse { line: 10, .. })));
        let bumped = text.replacen("voxevo-genome 1", "voxevo-genome 2", 1);
        assert_eq!(
            parse_genome(&bumped),
            Err(FormatError::VersionMismatch { found: 2, expected: 1 })
        );
        let broken = text.replacen("conn 0 5", "conn 0 x", 1);
        assert!(matches!(parse_genome(&broken), Err(FormatError::Parse { .. })));
    }

    #[test]
    fn body_roundtrip() {
        let mut body = VoxelBody::filled((3, 2, 2), Material::Empty);
        body.material[0] = Material::Active;
        body.phase[0] = -1.25;
        body.material[1] = Material::Passive;
        body.material[7] = Material::Active;
        let text = serialize_body(&body);
        assert!(text.contains("layer 1"));
        assert_eq!(parse_body(&text).unwrap(), body);
    }
}
