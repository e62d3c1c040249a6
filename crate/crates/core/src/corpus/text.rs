//! Plain-text form of a corpus entry, one statement per line:
//!
//! ```text
//! example KEY
//! summary free text
//! param NAME VALUE
//! atlas NAME
//! chart NAME c1 c2 ...
//! box lo hi ; lo hi ; ...
//! margin M
//! exclude COORD lo hi
//! glue FROM TO
//! piece sign ±1
//! domain lo hi ; ...
//! forward e1 ; e2 ; ...
//! inverse e1 ; ...
//! field NAME atlas A valence P Q symmetry S parity K
//! CHART [i j] = expr
//! derived NAME atlas A valence P Q symmetry S parity K
//! map NAME from A to B
//! SRC -> TGT = e1 ; e2 ; ...
//! map NAME from A to B builtin
//! check NAME expect pass|fail tol T
//! ```
//!
//! `chart`, `glue` and `piece` lines attach to the latest atlas, chart or
//! gluing; component lines attach to the latest field or map. Blank lines
//! and `#` comments are ignored. Fields built from expressions are written
//! out in full; computed ones only by their header.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use super::Example;
use crate::error::{GeomError, Result};
use crate::exprlang::Expr;
use crate::manifold::{Atlas, Chart, PieceSpec};
use crate::report::Verdict;
use crate::tensor::{SmoothMap, Symmetry, TensorField, Valence};

fn boxes(iv: impl Iterator<Item = (f64, f64)>) -> String {
    iv.map(|(a, b)| format!("{a} {b}")).collect::<Vec<_>>().join(" ; ")
}

fn exprs(e: &[Expr]) -> String {
    e.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ; ")
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}

fn emit_atlas(out: &mut String, a: &Atlas) {
    let _ = writeln!(out, "\natlas {}", a.name);
    for c in a.charts() {
        let _ = writeln!(out, "chart {} {}", c.name, c.coords.join(" "));
        let _ = writeln!(out, "box {}", boxes(c.domain.iter().map(|i| (i.lo, i.hi))));
        let _ = writeln!(out, "margin {}", c.margin);
        for b in &c.exclusions {
            let _ = writeln!(out, "exclude {} {} {}", c.coords[b.coord], b.lo, b.hi);
        }
    }
    for t in a.transitions() {
        let _ = writeln!(out, "glue {} {}", t.source, t.target);
        for p in &t.pieces {
            let _ = writeln!(out, "piece sign {}", p.sign);
            let _ = writeln!(out, "domain {}", boxes(p.domain.iter().map(|i| (i.lo, i.hi))));
            let _ = writeln!(out, "forward {}", exprs(&p.forward));
            let _ = writeln!(out, "inverse {}", exprs(&p.inverse));
        }
    }
}

fn emit_field(out: &mut String, atlas: &Atlas, f: &TensorField) {
    let head = format!(
        "atlas {} valence {} {} symmetry {} parity {}",
        atlas.name,
        f.valence.contra,
        f.valence.co,
        f.symmetry.name(),
        f.parity
    );
    if !f.is_dsl() {
        let _ = writeln!(out, "derived {} {head}", f.name);
        return;
    }
    let _ = writeln!(out, "field {} {head}", f.name);
    let mirrored = f.valence.co == 2 && f.symmetry != Symmetry::None;
    let rank = f.valence.rank();
    for chart in f.chart_names() {
        let (Some(ex), Ok(c)) = (f.exprs(&chart), atlas.chart(&chart)) else { continue };
        for (idx, e) in f.indices().iter().zip(ex) {
            if is_zero(e) || (mirrored && idx[rank - 2] > idx[rank - 1]) {
                continue;
            }
            let key: Vec<&str> = idx.iter().map(|&i| c.coords[i].as_str()).collect();
            let _ = writeln!(out, "{chart} [{}] = {e}", key.join(" "));
        }
    }
}

pub(super) fn emit(ex: &Example) -> String {
    let mut out = format!("example {}\nsummary {}\n", ex.key, ex.summary);
    for (k, v) in &ex.params {
        let _ = writeln!(out, "param {k} {v}");
    }
    for a in &ex.atlases {
        emit_atlas(&mut out, a);
    }
    out.push('\n');
    for d in &ex.fields {
        if let Some(a) = ex.atlases.iter().find(|a| a.name == d.atlas) {
            emit_field(&mut out, a, &d.field);
        }
    }
    for m in &ex.maps {
        let src = m.map.source_charts();
        let dsl = src.iter().all(|c| m.map.exprs(c).is_some());
        let tail = if dsl { "" } else { " builtin" };
        let _ = writeln!(out, "map {} from {} to {}{tail}", m.map.name, m.source, m.target);
        if dsl {
            for c in &src {
                let tgt = m.map.target_chart(c).unwrap_or_default();
                let _ = writeln!(out, "{c} -> {tgt} = {}", exprs(m.map.exprs(c).unwrap_or_default()));
            }
        }
    }
    out.push('\n');
    for c in &ex.checks {
        let _ = writeln!(out, "check {} expect {} tol {:e}", c.name, c.expect.as_str(), c.tolerance);
    }
    out
}

/// Header of a field given by its construction rather than components.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldHeader {
    pub name: String,
    pub atlas: String,
    pub valence: Valence,
    pub symmetry: Symmetry,
    pub parity: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub expect: Verdict,
    pub tolerance: f64,
}

#[derive(Clone)]
pub struct DocMap {
    pub name: String,
    pub source: String,
    pub target: String,
    /// `None` for built-in maps.
    pub map: Option<SmoothMap>,
}

/// A parsed entry: atlases and expression fields are rebuilt, the rest is
/// kept as headers.
#[derive(Clone, Default)]
pub struct Document {
    pub key: String,
    pub summary: String,
    pub params: BTreeMap<String, String>,
    pub atlases: Vec<Atlas>,
    pub fields: Vec<(String, TensorField)>,
    pub derived: Vec<FieldHeader>,
    pub maps: Vec<DocMap>,
    pub checks: Vec<CheckLine>,
}

impl Document {
    pub fn atlas(&self, name: &str) -> Option<&Atlas> {
        self.atlases.iter().find(|a| a.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&TensorField> {
        self.fields.iter().find(|(_, f)| f.name == name).map(|(_, f)| f)
    }
}

/// Staging for the statement being assembled.
enum Open {
    None,
    Field { header: FieldHeader, entries: BTreeMap<String, Vec<(String, String)>> },
    Map { name: String, source: String, target: String, rows: Vec<(String, String, Vec<String>)> },
}

#[derive(Default)]
struct AtlasDraft {
    name: String,
    charts: Vec<Chart>,
    glues: Vec<(String, String, Vec<PieceSpec>)>,
}

struct Parser {
    doc: Document,
    atlas: Option<AtlasDraft>,
    open: Open,
    line: usize,
}

fn err(line: usize, msg: impl std::fmt::Display) -> GeomError {
    GeomError::Invalid(format!("line {line}: {msg}"))
}

impl Parser {
    fn num(&self, s: &str) -> Result<f64> {
        s.parse().map_err(|_| err(self.line, format!("`{s}` is not a number")))
    }

    fn intervals(&self, rest: &str) -> Result<Vec<(f64, f64)>> {
        rest.split(';')
            .map(|part| {
                let v: Vec<&str> = part.split_whitespace().collect();
                match v.as_slice() {
                    [a, b] => Ok((self.num(a)?, self.num(b)?)),
                    _ => Err(err(self.line, format!("bad interval `{}`", part.trim()))),
                }
            })
            .collect()
    }

    fn draft(&mut self) -> Result<&mut AtlasDraft> {
        let line = self.line;
        self.atlas.as_mut().ok_or_else(|| err(line, "statement outside an atlas"))
    }

    fn chart(&mut self) -> Result<&mut Chart> {
        let line = self.line;
        self.draft()?.charts.last_mut().ok_or_else(|| err(line, "statement outside a chart"))
    }

    fn piece(&mut self) -> Result<&mut PieceSpec> {
        let line = self.line;
        self.draft()?
            .glues
            .last_mut()
            .and_then(|g| g.2.last_mut())
            .ok_or_else(|| err(line, "statement outside a piece"))
    }

    fn close_atlas(&mut self) -> Result<()> {
        if let Some(d) = self.atlas.take() {
            let mut a = Atlas::new(&d.name);
            for c in d.charts {
                a.add_chart(c)?;
            }
            for (from, to, pieces) in d.glues {
                a.glue(&from, &to, &pieces)?;
            }
            self.doc.atlases.push(a);
        }
        Ok(())
    }

    fn find_atlas(&self, name: &str) -> Result<&Atlas> {
        self.doc.atlas(name).ok_or_else(|| err(self.line, format!("unknown atlas `{name}`")))
    }

    fn close_open(&mut self) -> Result<()> {
        match std::mem::replace(&mut self.open, Open::None) {
            Open::None => {}
            Open::Field { header, entries } => {
                let atlas = self.find_atlas(&header.atlas)?;
                let listing: Vec<(String, Vec<(&str, &str)>)> = atlas
                    .chart_names()
                    .into_iter()
                    .filter_map(|c| {
                        entries.get(&c).map(|e| (c.clone(), e.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect()))
                    })
                    .collect();
                let borrowed: Vec<(&str, &[(&str, &str)])> =
                    listing.iter().map(|(c, e)| (c.as_str(), e.as_slice())).collect();
                // charts with every component zero have no lines but still carry the field
                let empty: Vec<(&str, &[(&str, &str)])> = atlas
                    .charts()
                    .iter()
                    .filter(|c| !entries.contains_key(&c.name))
                    .map(|c| (c.name.as_str(), &[][..]))
                    .collect();
                let all: Vec<_> = borrowed.into_iter().chain(empty).collect();
                let f = TensorField::from_dsl(&header.name, header.valence, header.symmetry, atlas, &all)?
                    .with_parity(header.parity);
                self.doc.fields.push((header.atlas, f));
            }
            Open::Map { name, source, target, rows } => {
                let (s, t) = (self.find_atlas(&source)?, self.find_atlas(&target)?);
                let comps: Vec<Vec<&str>> = rows.iter().map(|r| r.2.iter().map(String::as_str).collect()).collect();
                let listing: Vec<(&str, &str, &[&str])> =
                    rows.iter().zip(&comps).map(|(r, c)| (r.0.as_str(), r.1.as_str(), c.as_slice())).collect();
                let m = SmoothMap::from_dsl(&name, s, t, &listing, &HashMap::new())?;
                self.doc.maps.push(DocMap { name, source, target, map: Some(m) });
            }
        }
        Ok(())
    }

    fn header(&self, words: &[&str]) -> Result<FieldHeader> {
        match words {
            [name, "atlas", atlas, "valence", p, q, "symmetry", s, "parity", k] => Ok(FieldHeader {
                name: name.to_string(),
                atlas: atlas.to_string(),
                valence: Valence::new(
                    p.parse().map_err(|_| err(self.line, "bad valence"))?,
                    q.parse().map_err(|_| err(self.line, "bad valence"))?,
                ),
                symmetry: Symmetry::from_name(s).ok_or_else(|| err(self.line, format!("unknown symmetry `{s}`")))?,
                parity: k.parse().map_err(|_| err(self.line, "bad parity"))?,
            }),
            _ => Err(err(self.line, "malformed field header")),
        }
    }

    fn statement(&mut self, text: &str) -> Result<()> {
        let (word, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
        let rest = rest.trim();
        let words: Vec<&str> = rest.split_whitespace().collect();
        let top = matches!(word, "example" | "summary" | "param" | "atlas" | "field" | "derived" | "map" | "check");
        if top {
            self.close_open()?;
        }
        if matches!(word, "atlas" | "field" | "derived" | "map" | "check") {
            self.close_atlas()?;
        }
        match word {
            "example" => self.doc.key = rest.to_string(),
            "summary" => self.doc.summary = rest.to_string(),
            "param" => {
                let (k, v) = rest.split_once(char::is_whitespace).ok_or_else(|| err(self.line, "param needs a value"))?;
                self.doc.params.insert(k.to_string(), v.trim().to_string());
            }
            "atlas" => self.atlas = Some(AtlasDraft { name: rest.to_string(), ..Default::default() }),
            "chart" => {
                let (name, coords) = words.split_first().ok_or_else(|| err(self.line, "chart needs a name"))?;
                let c = Chart::new(name, coords, &vec![(0.0, 1.0); coords.len()])?;
                self.draft()?.charts.push(c);
            }
            "box" => {
                let iv = self.intervals(rest)?;
                let line = self.line;
                let c = self.chart()?;
                if iv.len() != c.dim() {
                    return Err(err(line, "box arity"));
                }
                *c = Chart::new(&c.name, &c.coords.iter().map(String::as_str).collect::<Vec<_>>(), &iv)?
                    .with_margin(c.margin);
            }
            "margin" => {
                let m = self.num(rest)?;
                self.chart()?.margin = m;
            }
            "exclude" => {
                let [coord, lo, hi] = words[..] else { return Err(err(self.line, "exclude COORD lo hi")) };
                let (lo, hi) = (self.num(lo)?, self.num(hi)?);
                let c = self.chart()?;
                *c = c.clone().exclude(coord, lo, hi)?;
            }
            "glue" => {
                let [from, to] = words[..] else { return Err(err(self.line, "glue FROM TO")) };
                self.draft()?.glues.push((from.to_string(), to.to_string(), Vec::new()));
            }
            "piece" => {
                let ["sign", s] = words[..] else { return Err(err(self.line, "piece sign ±1")) };
                let sign: i8 = s.parse().map_err(|_| err(self.line, "bad sign"))?;
                let line = self.line;
                let g = self.draft()?.glues.last_mut().ok_or_else(|| err(line, "piece outside a gluing"))?;
                g.2.push(PieceSpec::new(&[], &[], &[], sign));
            }
            "domain" => {
                let iv = self.intervals(rest)?;
                self.piece()?.domain = iv;
            }
            "forward" | "inverse" => {
                let e: Vec<String> = rest.split(';').map(|s| s.trim().to_string()).collect();
                let p = self.piece()?;
                if word == "forward" {
                    p.forward = e;
                } else {
                    p.inverse = e;
                }
            }
            "field" => {
                let header = self.header(&words)?;
                self.find_atlas(&header.atlas)?;
                self.open = Open::Field { header, entries: BTreeMap::new() };
            }
            "derived" => {
                let h = self.header(&words)?;
                self.doc.derived.push(h);
            }
            "map" => match words[..] {
                [name, "from", s, "to", t] => {
                    self.open =
                        Open::Map { name: name.into(), source: s.into(), target: t.into(), rows: Vec::new() };
                }
                [name, "from", s, "to", t, "builtin"] => {
                    self.doc.maps.push(DocMap { name: name.into(), source: s.into(), target: t.into(), map: None });
                }
                _ => return Err(err(self.line, "map NAME from A to B [builtin]")),
            },
            "check" => match words[..] {
                [name, "expect", v, "tol", t] => {
                    let expect = match v {
                        "pass" => Verdict::Pass,
                        "fail" => Verdict::Fail,
                        "inconclusive" => Verdict::Inconclusive,
                        _ => return Err(err(self.line, format!("unknown verdict `{v}`"))),
                    };
                    let tolerance = self.num(t)?;
                    self.doc.checks.push(CheckLine { name: name.into(), expect, tolerance });
                }
                _ => return Err(err(self.line, "check NAME expect V tol T")),
            },
            _ => return self.component(text),
        }
        Ok(())
    }

    fn component(&mut self, text: &str) -> Result<()> {
        let line = self.line;
        let (lhs, rhs) = text.split_once('=').ok_or_else(|| err(line, format!("unrecognised line `{text}`")))?;
        let rhs = rhs.trim();
        match &mut self.open {
            Open::Field { entries, .. } => {
                let (chart, key) = lhs.trim().split_once('[').ok_or_else(|| err(line, "component needs CHART [i j]"))?;
                let key = key.trim().strip_suffix(']').ok_or_else(|| err(line, "unclosed index list"))?;
                entries.entry(chart.trim().to_string()).or_default().push((key.trim().to_string(), rhs.to_string()));
            }
            Open::Map { rows, .. } => {
                let (s, t) = lhs.split_once("->").ok_or_else(|| err(line, "map row needs SRC -> TGT"))?;
                let comps = rhs.split(';').map(|e| e.trim().to_string()).collect();
                rows.push((s.trim().to_string(), t.trim().to_string(), comps));
            }
            Open::None => return Err(err(line, format!("unrecognised line `{text}`"))),
        }
        Ok(())
    }
}

/// Parses the text form back. Expressions, boxes and gluings are rebuilt
/// and validated; check lines are kept as declared.
pub fn parse_document(text: &str) -> Result<Document> {
    let mut p = Parser { doc: Document::default(), atlas: None, open: Open::None, line: 0 };
    for (i, raw) in text.lines().enumerate() {
        p.line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        p.statement(t)?;
    }
    p.close_open()?;
    p.close_atlas()?;
    if p.doc.key.is_empty() {
        return Err(GeomError::Invalid("missing `example` line".into()));
    }
    Ok(p.doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_lines_name_their_position() {
        let e = parse_document("example k\ncheck a expect maybe tol 1").err().unwrap();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(parse_document("summary only").is_err());
        assert!(parse_document("example k\nO [x] = 1").is_err());
    }

    #[test]
    fn small_document_parses() {
        let text = "example toy\natlas line\nchart R x\nbox -1 1\nfield f atlas line valence 0 1 symmetry none parity 0\nR [x] = x^2\ncheck c expect fail tol 1e-8\n";
        let d = parse_document(text).unwrap();
        assert_eq!(d.atlases[0].charts()[0].domain[0].lo, -1.0);
        assert_eq!(d.field("f").unwrap().eval_f64("R", &[0.5]).unwrap(), vec![0.25]);
        assert_eq!(d.checks[0], CheckLine { name: "c".into(), expect: Verdict::Fail, tolerance: 1e-8 });
    }
}
