//! Text formats: network files and experiment specs.
//!
//! Network file: line 1 is `n I eps alpha beta noise`, then one `id x y`
//! line per station. Floats are written with 17 significant digits and
//! round-trip exactly.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sinr::{Network, SinrParams, Station};

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a network in the interchange format.
pub fn format_network(net: &Network) -> String {
    let p = &net.params;
    let mut out = format!(
        "{} {} {} {} {} {}\n",
        net.n_bound,
        net.id_domain,
        fmt_f64(p.eps),
        fmt_f64(p.alpha),
        fmt_f64(p.beta),
        fmt_f64(p.noise)
    );
    for s in net.stations() {
        out.push_str(&format!("{} {} {}\n", s.id, fmt_f64(s.pos.x), fmt_f64(s.pos.y)));
    }
    out
}

/// Parses the interchange format back into a network.
pub fn parse_network(text: &str) -> Result<Network> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty network file".into()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 6 {
        return Err(Error::Parse("header must be `n I eps alpha beta noise`".into()));
    }
    let n: u32 = toks[0].parse().map_err(|_| Error::Parse("bad n".into()))?;
    let id_domain: u64 = toks[1].parse().map_err(|_| Error::Parse("bad I".into()))?;
    let eps: f64 = toks[2].parse().map_err(|_| Error::Parse("bad eps".into()))?;
    let alpha: f64 = toks[3].parse().map_err(|_| Error::Parse("bad alpha".into()))?;
    let beta: f64 = toks[4].parse().map_err(|_| Error::Parse("bad beta".into()))?;
    let noise: f64 = toks[5].parse().map_err(|_| Error::Parse("bad noise".into()))?;
    let params = SinrParams::new(alpha, beta, noise, eps)?;
    let mut stations = Vec::new();
    for (no, line) in lines.enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected `id x y`", no + 2)));
        }
        let id = toks[0].parse().map_err(|_| Error::Parse(format!("line {}: bad id", no + 2)))?;
        let x: f64 =
            toks[1].parse().map_err(|_| Error::Parse(format!("line {}: bad x", no + 2)))?;
        let y: f64 =
            toks[2].parse().map_err(|_| Error::Parse(format!("line {}: bad y", no + 2)))?;
        stations.push(Station { id, pos: Point::new(x, y) });
    }
    Network::new(stations, n, id_domain, params)
}
