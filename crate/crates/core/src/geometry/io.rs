//! NodeSet CSV dump/load.
//!
//! Layout: a `dim,h,seed` header line, one line with those values, then one
//! row `x0,...,x{d-1},kind` per node with `kind` either `i` or `b`. Floats are
//! written in shortest round-trip form so a load reproduces the set exactly.

use std::io::{Read, Write};

use super::{Kind, NodeSet};
use crate::{Error, Result};

impl NodeSet {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["dim", "h", "seed"])?;
        w.write_record([self.dim.to_string(), format!("{:?}", self.h), self.seed.to_string()])?;
        let mut row = Vec::with_capacity(self.dim + 1);
        for (p, kind) in self.points().zip(&self.kinds) {
            row.clear();
            row.extend(p.iter().map(|x| format!("{x:?}")));
            row.push(kind.tag().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(true)
            .from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["dim", "h", "seed"] {
            return Err(Error::Format("expected header `dim,h,seed`".into()));
        }
        let mut records = r.records();
        let meta = records
            .next()
            .ok_or_else(|| Error::Format("missing dim,h,seed values".into()))??;
        let field = |i: usize| meta.get(i).ok_or_else(|| Error::Format("short metadata row".into()));
        let dim: usize = parse(field(0)?)?;
        let h: f64 = parse(field(1)?)?;
        let seed: u64 = parse(field(2)?)?;

        let mut coords = Vec::new();
        let mut kinds = Vec::new();
        for rec in records {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::Format(format!(
                    "node row with {} fields, expected {}",
                    rec.len(),
                    dim + 1
                )));
            }
            for x in rec.iter().take(dim) {
                coords.push(parse(x)?);
            }
            kinds.push(match &rec[dim] {
                "i" => Kind::Interior,
                "b" => Kind::Boundary,
                other => return Err(Error::Format(format!("unknown node kind `{other}`"))),
            });
        }
        NodeSet::new(dim, coords, kinds, h, seed)
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse `{s}`")))
}
