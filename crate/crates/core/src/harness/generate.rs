//! Seeded network generators with admissibility rejection.

use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sinr::{default_id_domain, Network, SinrParams, Station, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// `n` stations on a line spaced just under `(1 - eps)`; the source
    /// endpoint gives eccentricity `n - 1`.
    Line,
    /// A near-square lattice at the given spacing.
    Grid,
    /// Uniform positions in a disc, rejection-sampled for connectivity.
    UniformDisc,
    /// Dense micro-lattice clusters chained along a line; the lattice
    /// pitch controls the granularity.
    Cluster,
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeneratorKind::Line => write!(f, "line"),
            GeneratorKind::Grid => write!(f, "grid"),
            GeneratorKind::UniformDisc => write!(f, "uniform-disc"),
            GeneratorKind::Cluster => write!(f, "cluster"),
        }
    }
}

/// Everything a generator needs to produce one network.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub kind: GeneratorKind,
    pub n: u32,
    pub params: SinrParams,
    /// Disc radius (uniform-disc) or unused.
    pub area_scale: f64,
    /// Lattice spacing override for line/grid.
    pub spacing: Option<f64>,
    /// Number of clusters (cluster generator).
    pub clusters: Option<u32>,
    /// Cluster micro-lattice pitch; the granularity is about its
    /// inverse.
    pub min_dist: Option<f64>,
    /// Radius at which the communication graph must be connected.
    pub connectivity_radius: f64,
    pub max_retries: u32,
}

impl NetworkSpec {
    pub fn new(kind: GeneratorKind, n: u32, params: SinrParams) -> Self {
        NetworkSpec {
            kind,
            n,
            params,
            area_scale: 1.0,
            spacing: None,
            clusters: None,
            min_dist: None,
            connectivity_radius: 1.0 - params.eps,
            max_retries: 200,
        }
    }
}

/// A generated network plus the designated source (always the smallest
/// id, which the generator pins to the intended source position).
#[derive(Debug)]
pub struct Generated {
    pub net: Network,
    pub source: StationId,
    /// Draws discarded by the connectivity gate before this one.
    pub rejections: u32,
}

/// Positions for one draw; the first position is the intended source.
fn positions_for(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Point>> {
    let n = spec.n as usize;
    if n == 0 {
        return Err(Error::invalid_arg("cannot generate an empty network"));
    }
    let step_default = 0.999 * (1.0 - spec.params.eps);
    match spec.kind {
        GeneratorKind::Line => {
            let s = spec.spacing.unwrap_or(step_default);
            Ok((0..n).map(|i| Point::new(i as f64 * s, 0.0)).collect())
        }
        GeneratorKind::Grid => {
            let s = spec.spacing.unwrap_or(step_default);
            let side = (n as f64).sqrt().ceil() as usize;
            Ok((0..n)
                .map(|i| Point::new((i % side) as f64 * s, (i / side) as f64 * s))
                .collect())
        }
        GeneratorKind::UniformDisc => {
            let r = spec.area_scale;
            if !(r > 0.0) {
                return Err(Error::invalid_arg("disc radius must be positive"));
            }
            let mut pts = Vec::with_capacity(n);
            while pts.len() < n {
                let x = rng.gen_range(-r..=r);
                let y = rng.gen_range(-r..=r);
                if x * x + y * y <= r * r {
                    pts.push(Point::new(x, y));
                }
            }
            // Source at the periphery: westernmost station.
            let west = pts
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.x.total_cmp(&b.1.x))
                .map(|(i, _)| i)
                .unwrap();
            pts.swap(0, west);
            Ok(pts)
        }
        GeneratorKind::Cluster => {
            let clusters = spec.clusters.unwrap_or((spec.n / 16).max(2)).max(1) as usize;
            let reach = spec.connectivity_radius;
            // Chain step under the reach so that consecutive clusters are
            // fully mutually adjacent; then the hop structure (and so the
            // eccentricity) does not depend on the pitch.
            let chain = 0.75 * reach;
            let pitch = spec.min_dist.unwrap_or(0.02 * reach);
            if !(pitch > 0.0) {
                return Err(Error::invalid_arg("cluster pitch must be positive"));
            }
            let per = n.div_ceil(clusters);
            let side = (per as f64).sqrt().ceil() as usize;
            let extent = (side as f64 - 1.0) * pitch;
            if extent * SQRT_2 > reach - chain {
                return Err(Error::GenerationFailure(format!(
                    "cluster of {per} stations at pitch {pitch} spans {extent}, too wide for \
                     reach {reach} at chain step {chain}"
                )));
            }
            let mut pts = Vec::with_capacity(n);
            'outer: for c in 0..clusters {
                let cx = c as f64 * chain;
                for i in 0..per {
                    if pts.len() == n {
                        break 'outer;
                    }
                    let gx = (i % side) as f64 * pitch - extent / 2.0;
                    let gy = (i / side) as f64 * pitch - extent / 2.0;
                    pts.push(Point::new(cx + gx, gy));
                }
            }
            Ok(pts)
        }
    }
}

/// Distinct random ids from `[1, I]`, with the smallest id assigned to
/// the source position (index 0).
fn assign_ids(pts: &[Point], id_domain: u64, rng: &mut ChaCha8Rng) -> Vec<Station> {
    let mut ids = std::collections::BTreeSet::new();
    while ids.len() < pts.len() {
        ids.insert(rng.gen_range(1..=id_domain));
    }
    let sorted: Vec<u64> = ids.into_iter().collect();
    // Smallest id at the source position, the rest in draw order.
    pts.iter()
        .enumerate()
        .map(|(i, &pos)| Station { id: sorted[i], pos })
        .collect()
}

/// Generates a network for the spec, deterministically from the seed.
/// Draws failing the connectivity gate are rejected and redrawn (only
/// the uniform generator is stochastic in its positions; for the others
/// a connectivity failure is permanent and reported immediately).
pub fn generate(spec: &NetworkSpec, seed: u64) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id_domain = default_id_domain(spec.n);
    let mut rejections = 0u32;
    loop {
        let pts = positions_for(spec, &mut rng)?;
        let stations = assign_ids(&pts, id_domain, &mut rng);
        let source = stations[0].id;
        let net = Network::new(stations, spec.n, id_domain, spec.params)?;
        let eng = crate::sinr::SinrEngine::new(net);
        let graph = eng.comm_graph(Some(1.0 - spec.connectivity_radius));
        if graph.is_connected() {
            return Ok(Generated { net: eng.network().clone(), source, rejections });
        }
        rejections += 1;
        let retryable = matches!(spec.kind, GeneratorKind::UniformDisc);
        if !retryable || rejections >= spec.max_retries {
            return Err(Error::GenerationFailure(format!(
                "{} draw(s) of `{}` (n = {}, radius {}) failed the connectivity gate at radius {}",
                rejections, spec.kind, spec.n, spec.area_scale, spec.connectivity_radius
            )));
        }
    }
}
