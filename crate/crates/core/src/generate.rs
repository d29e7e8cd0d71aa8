//! Seeded random flow sets on a uniform mesh.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::netcalc::{int, Rational};
use crate::platform::{validate, xy_route, Config, Flow, FlowId, NocModel, NodeId, NodeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Paradigm {
    /// Sources and destinations drawn independently over the whole grid.
    Uniform,
    /// Flows drawn from three quadrant-to-quadrant families that crowd the
    /// eastern half of the mesh.
    Quadrant,
}

impl FromStr for Paradigm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Paradigm::Uniform),
            "quadrant" => Ok(Paradigm::Quadrant),
            _ => Err(format!("unknown paradigm {s:?}")),
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Paradigm::Uniform => "uniform",
            Paradigm::Quadrant => "quadrant",
        })
    }
}

/// Quadrants numbered counter-clockwise from the north-east one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrant {
    NorthEast = 1,
    NorthWest = 2,
    SouthWest = 3,
    SouthEast = 4,
}

/// `(source, destination)` quadrants of the three families.
pub const FAMILIES: [(Quadrant, Quadrant); 3] = [
    (Quadrant::SouthWest, Quadrant::SouthEast),
    (Quadrant::SouthEast, Quadrant::NorthEast),
    (Quadrant::NorthWest, Quadrant::NorthEast),
];

pub fn quadrant_of(width: u32, height: u32, (x, y): (u32, u32)) -> Quadrant {
    let east = x >= width / 2;
    let north = y >= height / 2;
    match (east, north) {
        (true, true) => Quadrant::NorthEast,
        (false, true) => Quadrant::NorthWest,
        (false, false) => Quadrant::SouthWest,
        (true, false) => Quadrant::SouthEast,
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub paradigm: Paradigm,
    pub flows: usize,
    pub width: u32,
    pub height: u32,
    pub node: NodeParams,
    pub vc_count: u32,
    /// Inclusive ranges.
    pub len: (u64, u64),
    pub period: (u64, u64),
    pub burst: (u64, u64),
    pub jitter: (u64, u64),
    pub seed: u64,
    /// Draws allowed per flow before giving up.
    pub retries: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            paradigm: Paradigm::Uniform,
            flows: 8,
            width: 8,
            height: 8,
            node: NodeParams::new(int(1), int(1), 2),
            vc_count: 1,
            len: (2, 8),
            period: (100, 400),
            burst: (1, 1),
            jitter: (0, 0),
            seed: 0,
            retries: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("no stable placement for flow {flow} after {attempts} draws")]
    GenerationExhausted { flow: FlowId, attempts: usize },
    #[error("invalid generator settings: {0}")]
    BadSpec(String),
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (u64, u64)) -> u64 {
    rng.random_range(lo..=hi)
}

fn point_in(rng: &mut ChaCha8Rng, width: u32, height: u32, q: Quadrant) -> (u32, u32) {
    let (hw, hh) = (width / 2, height / 2);
    let (xs, ys) = match q {
        Quadrant::NorthEast => (hw..width, hh..height),
        Quadrant::NorthWest => (0..hw, hh..height),
        Quadrant::SouthWest => (0..hw, 0..hh),
        Quadrant::SouthEast => (hw..width, 0..hh),
    };
    (rng.random_range(xs), rng.random_range(ys))
}

pub fn generate(spec: &GeneratorSpec) -> Result<Config, GenerateError> {
    if spec.flows == 0 || spec.width == 0 || spec.height == 0 {
        return Err(GenerateError::BadSpec("need at least one flow and a non-empty grid".into()));
    }
    if spec.width * spec.height < 2 {
        return Err(GenerateError::BadSpec("grid needs two cores".into()));
    }
    if spec.paradigm == Paradigm::Quadrant && (spec.width < 2 || spec.height < 2) {
        return Err(GenerateError::BadSpec("quadrants need a grid of at least 2x2".into()));
    }
    for (name, (lo, hi)) in [("len", spec.len), ("period", spec.period), ("burst", spec.burst), ("jitter", spec.jitter)] {
        if lo > hi {
            return Err(GenerateError::BadSpec(format!("empty {name} range")));
        }
    }
    if spec.len.0 == 0 || spec.period.0 == 0 || spec.burst.0 == 0 || spec.vc_count == 0 {
        return Err(GenerateError::BadSpec("len, period, burst and vc_count must be positive".into()));
    }

    let mut noc = NocModel::uniform(spec.width, spec.height, spec.node.clone());
    noc.vc_count = spec.vc_count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut load: HashMap<NodeId, Rational> = HashMap::new();
    let mut flows = Vec::with_capacity(spec.flows);

    for i in 0..spec.flows {
        let id = i as FlowId + 1;
        let mut placed = None;
        for _ in 0..spec.retries {
            let (src, dst) = match spec.paradigm {
                Paradigm::Uniform => {
                    let src = (rng.random_range(0..spec.width), rng.random_range(0..spec.height));
                    let dst = (rng.random_range(0..spec.width), rng.random_range(0..spec.height));
                    (src, dst)
                }
                Paradigm::Quadrant => {
                    let (qs, qd) = FAMILIES[rng.random_range(0..FAMILIES.len())];
                    (point_in(&mut rng, spec.width, spec.height, qs), point_in(&mut rng, spec.width, spec.height, qd))
                }
            };
            let len = draw(&mut rng, spec.len);
            let period = draw(&mut rng, spec.period);
            let burst = draw(&mut rng, spec.burst);
            let jitter = draw(&mut rng, spec.jitter);
            let vc = rng.random_range(0..spec.vc_count);
            if src == dst {
                continue;
            }
            let path = xy_route(&noc, src, dst).expect("in-grid draw");
            let flow = Flow {
                id,
                src,
                dst,
                len,
                period,
                burst,
                jitter: int(jitter as i64),
                vc,
                path,
            };
            let rho = flow.rho();
            let fits = flow.path.iter().all(|n| {
                let current = load.get(n).cloned().unwrap_or_else(Rational::zero);
                current + &rho < noc.params(n).rate
            });
            if fits {
                placed = Some(flow);
                break;
            }
        }
        let flow = placed.ok_or(GenerateError::GenerationExhausted {
            flow: id,
            attempts: spec.retries,
        })?;
        for n in &flow.path {
            *load.entry(*n).or_insert_with(Rational::zero) += flow.rho();
        }
        flows.push(flow);
    }

    let priorities = (0..spec.vc_count).collect();
    let config = Config::new(noc, flows, priorities).expect("fresh ids");
    let violations = validate(&config);
    if !violations.is_empty() {
        return Err(GenerateError::BadSpec(format!("generated config is invalid: {}", violations[0])));
    }
    Ok(config)
}
