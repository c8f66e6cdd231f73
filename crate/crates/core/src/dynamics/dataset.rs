use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::equation::{Boundary, Equation, EquationName, Kind};
use super::ode::integrate_ode;
use super::pde::solve_pde;
use crate::error::{Error, Result};
use crate::seeding::{self, Rng};

/// Uniformly sampled states `s_0 … s_n` of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub equation: EquationName,
    pub dt: f64,
    pub state_dim: usize,
    /// `(n_steps + 1) × state_dim`, row-major; row 0 is the initial condition.
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len() / self.state_dim - 1
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::Domain(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub equation: EquationName,
    pub boundary: Boundary,
    pub dt: f64,
    pub n_steps: usize,
    pub state_dim: usize,
    pub seed: u64,
    pub split: Split,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Random initial condition: uniform for ODEs, a random truncated sine
/// series (Dirichlet) or Fourier series (periodic) for PDEs, with the k-th
/// coefficient drawn from N(0, 1/k²).
pub fn sample_initial(eq: &Equation, rng: &mut Rng) -> Vec<f64> {
    let (lo, hi) = eq.initial_range;
    let uniform = |rng: &mut Rng| if lo == hi { lo } else { rng.random_range(lo..hi) };
    match eq.name {
        EquationName::Pendulum => vec![uniform(rng), 0.0],
        _ if eq.kind() == Kind::Ode => (0..eq.state_dim()).map(|_| uniform(rng)).collect(),
        _ => sample_series(eq, rng),
    }
}

fn sample_series(eq: &Equation, rng: &mut Rng) -> Vec<f64> {
    use std::f64::consts::PI;
    let n = eq.grid_points;
    let l = eq.domain_length;
    let dx = eq.dx();
    let coeff = |k: usize, rng: &mut Rng| {
        Normal::new(0.0, 1.0 / k.max(1) as f64)
            .expect("positive std")
            .sample(rng)
    };
    let mut u = vec![0.0; n];
    match eq.boundary() {
        Boundary::DirichletZero => {
            for k in 1..=eq.modes {
                let c = coeff(k, rng);
                for (j, v) in u.iter_mut().enumerate() {
                    *v += c * (k as f64 * PI * j as f64 * dx / l).sin();
                }
            }
            u[0] = 0.0;
            u[n - 1] = 0.0;
        }
        Boundary::Periodic => {
            let c0 = coeff(0, rng);
            u.iter_mut().for_each(|v| *v = c0);
            for k in 1..=eq.modes {
                let (a, b) = (coeff(k, rng), coeff(k, rng));
                for (j, v) in u.iter_mut().enumerate() {
                    let phase = 2.0 * PI * k as f64 * j as f64 * dx / l;
                    *v += a * phase.cos() + b * phase.sin();
                }
            }
            u[n - 1] = u[0];
        }
        Boundary::None => unreachable!("series sampling is PDE-only"),
    }
    u
}

/// Solves one trajectory from `s0`.
pub fn solve(eq: &Equation, s0: &[f64], dt: f64, n_steps: usize) -> Result<Trajectory> {
    let states = match eq.kind() {
        Kind::Ode => integrate_ode(eq, s0, dt, n_steps)?,
        Kind::Pde => solve_pde(eq, s0, dt, n_steps)?,
    };
    Ok(Trajectory {
        equation: eq.name,
        dt,
        state_dim: eq.state_dim(),
        states,
    })
}

/// Generates `n_traj` trajectories. Trajectory `i` draws its initial condition
/// from an rng seeded with `seed ^ i`, so the result does not depend on how the
/// work is split across threads.
pub fn generate_dataset(
    eq: &Equation,
    n_traj: usize,
    n_steps: usize,
    dt: f64,
    seed: u64,
    split: Split,
) -> Result<Dataset> {
    eq.validate()?;
    if n_traj == 0 || n_steps == 0 {
        return Err(Error::Config(format!(
            "trajectory count and n_steps must be positive, got {n_traj} and {n_steps}"
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let trajectories = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::rng(seed ^ i as u64);
            let s0 = sample_initial(eq, &mut rng);
            solve(eq, &s0, dt, n_steps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        equation: eq.name,
        boundary: eq.boundary(),
        dt,
        n_steps,
        state_dim: eq.state_dim(),
        seed,
        split,
        trajectories,
    })
}

/// Train and test sets from one base seed, with decorrelated split seeds.
pub fn generate_train_test(
    eq: &Equation,
    n_train: usize,
    n_test: usize,
    n_steps: usize,
    dt: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let train = generate_dataset(eq, n_train, n_steps, dt, split_seed(seed, Split::Train), Split::Train)?;
    let test = generate_dataset(eq, n_test, n_steps, dt, split_seed(seed, Split::Test), Split::Test)?;
    Ok((train, test))
}

pub fn split_seed(seed: u64, split: Split) -> u64 {
    match split {
        Split::Train => seeding::derive(seed, 0x74_7261_696e),
        Split::Test => seeding::derive(seed, 0x7465_7374),
    }
}

pub const DATASET_MAGIC: &[u8; 8] = b"KOOPDS\x00\x01";

/// Writes the dataset container:
///
/// ```text
/// 8 bytes   magic "KOOPDS\0\x01"
/// u32 LE    header length H
/// H bytes   UTF-8 header, one `key=value` per line:
///           equation, boundary, split, dt, n_steps, state_dim, seed, count
/// payload   count × (n_steps + 1) × state_dim f64 little-endian, row-major
/// ```
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let header = format!(
        "equation={}\nboundary={}\nsplit={}\ndt={:?}\nn_steps={}\nstate_dim={}\nseed={}\ncount={}\n",
        ds.equation,
        ds.boundary.as_str(),
        ds.split.as_str(),
        ds.dt,
        ds.n_steps,
        ds.state_dim,
        ds.seed,
        ds.trajectories.len()
    );
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(DATASET_MAGIC)?;
    write(&(header.len() as u32).to_le_bytes())?;
    write(header.as_bytes())?;
    for t in &ds.trajectories {
        for v in &t.states {
            write(&v.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_header(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::format(path, format!("bad header line `{l}`")))
        })
        .collect()
}

pub(crate) fn header_value<'a>(
    fields: &'a [(String, String)],
    key: &str,
    path: &Path,
) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::format(path, format!("missing header key `{key}`")))
}

pub(crate) fn parse_field<T: FromStr>(fields: &[(String, String)], key: &str, path: &Path) -> Result<T> {
    header_value(fields, key, path)?
        .parse()
        .map_err(|_| Error::format(path, format!("bad value for `{key}`")))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != DATASET_MAGIC {
        return Err(Error::format(path, "not a dataset file"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < hlen {
        return Err(Error::format(path, "truncated header"));
    }
    let text = std::str::from_utf8(&body[..hlen]).map_err(|_| Error::format(path, "header is not UTF-8"))?;
    let fields = parse_header(text, path)?;
    let equation: EquationName = header_value(&fields, "equation", path)?
        .parse()
        .map_err(|_| Error::format(path, "unknown equation"))?;
    let boundary: Boundary = header_value(&fields, "boundary", path)?
        .parse()
        .map_err(|_| Error::format(path, "unknown boundary"))?;
    let split: Split = header_value(&fields, "split", path)?
        .parse()
        .map_err(|_| Error::format(path, "unknown split"))?;
    let dt: f64 = parse_field(&fields, "dt", path)?;
    let n_steps: usize = parse_field(&fields, "n_steps", path)?;
    let state_dim: usize = parse_field(&fields, "state_dim", path)?;
    let seed: u64 = parse_field(&fields, "seed", path)?;
    let count: usize = parse_field(&fields, "count", path)?;

    let payload = &body[hlen..];
    let per = (n_steps + 1) * state_dim;
    if payload.len() != count * per * 8 {
        return Err(Error::format(
            path,
            format!("payload has {} bytes, header implies {}", payload.len(), count * per * 8),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let trajectories = values
        .chunks_exact(per.max(1))
        .map(|states| Trajectory {
            equation,
            dt,
            state_dim,
            states: states.to_vec(),
        })
        .collect();
    Ok(Dataset {
        equation,
        boundary,
        dt,
        n_steps,
        state_dim,
        seed,
        split,
        trajectories,
    })
}
