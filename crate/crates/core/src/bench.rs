//! Benchmark methodology: size sweeps, GFLOPS accounting, CSV output.
//!
//! Performance is the operation count divided by wall-clock seconds:
//! `2n^3` operations for a single multiply. Host algorithms are timed
//! with a monotonic clock around the full call; scheduled runs on
//! simulated engines report the simulated makespan. Running the same
//! problem independently on both accelerators counts `2*(2n^3)`
//! operations and is reported at the effective size `2^(1/3) * n`.

use std::io::Write;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::engine::{EngineRegistry, Platform};
use crate::fastmm::{winograd_mm, FastMMConfig};
use crate::kernel::{blocked_mm, naive_mm};
use crate::matrix::Matrix;
use crate::scheduler::{rmul_with_stats, DispatchPolicy, DispatchTrace};
use crate::Error;

/// Benchmarked algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Naive,
    Blocked,
    Winograd,
    Rmul,
    DualIndependent,
}

pub const ALL_ALGOS: [Algo; 5] = [
    Algo::Naive,
    Algo::Blocked,
    Algo::Winograd,
    Algo::Rmul,
    Algo::DualIndependent,
];

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Naive => "naive",
            Algo::Blocked => "blocked",
            Algo::Winograd => "winograd",
            Algo::Rmul => "rmul",
            Algo::DualIndependent => "dual_independent",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "naive" => Ok(Algo::Naive),
            "blocked" => Ok(Algo::Blocked),
            "winograd" => Ok(Algo::Winograd),
            "rmul" => Ok(Algo::Rmul),
            "dual_independent" => Ok(Algo::DualIndependent),
            other => Err(Error::Parse(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    /// Configuration name (preset label).
    pub label: String,
    pub algo: Algo,
    /// Problem side length actually multiplied.
    pub n: usize,
    /// Size under which the point is reported: `n`, except
    /// `2^(1/3) * n` for two independent concurrent multiplies.
    pub reported_n: f64,
    pub wall_sec: f64,
    /// `ops(algo, n) / wall_sec / 1e9`, recomputable exactly.
    pub gflops: f64,
}

impl BenchRecord {
    pub fn new(label: impl Into<String>, algo: Algo, n: usize, wall_sec: f64) -> Self {
        let reported_n = match algo {
            Algo::DualIndependent => 2f64.powf(1.0 / 3.0) * n as f64,
            _ => n as f64,
        };
        BenchRecord {
            label: label.into(),
            algo,
            n,
            reported_n,
            wall_sec,
            gflops: op_count(algo, n) / wall_sec / 1e9,
        }
    }

    /// Re-evaluates the GFLOPS formula from the stored fields; equals
    /// `gflops` bit for bit.
    pub fn recompute_gflops(&self) -> f64 {
        op_count(self.algo, self.n) / self.wall_sec / 1e9
    }
}

/// Operation count of one measurement: `2n^3`, doubled again when both
/// engines run the problem independently.
pub fn op_count(algo: Algo, n: usize) -> f64 {
    let n3 = (n as f64).powi(3);
    match algo {
        Algo::DualIndependent => 2.0 * (2.0 * n3),
        _ => 2.0 * n3,
    }
}

/// What to sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Strictly increasing problem sizes.
    pub sizes: Vec<usize>,
    pub algos: Vec<Algo>,
    /// Configuration label stamped on every record.
    pub label: String,
    pub repetitions: usize,
    /// Seed for the operand fill.
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.sizes.is_empty() {
            return Err(Error::PolicyConfig("no sizes to sweep".into()));
        }
        if !self.sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::PolicyConfig(
                "sizes must be strictly increasing".into(),
            ));
        }
        if self.algos.is_empty() {
            return Err(Error::PolicyConfig("no algorithms to sweep".into()));
        }
        if self.repetitions < 1 {
            return Err(Error::PolicyConfig("repetitions must be at least 1".into()));
        }
        Ok(())
    }
}

fn filled(n: usize, seed: u64) -> Matrix<f32> {
    let mut rng = StdRng::seed_from_u64(seed);
    Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0f32..1.0))
}

/// Runs the sweep: one record per (size, algo, repetition), emitted in
/// that order, after one untimed warm-up repetition per point.
pub fn run_sweep(
    spec: &SweepSpec,
    registry: &EngineRegistry,
    policy: &DispatchPolicy,
) -> Result<Vec<BenchRecord>, Error> {
    spec.validate()?;
    policy.validate()?;
    let platform = Platform::<f32>::new(registry.clone());
    let mut records = Vec::new();
    for &n in &spec.sizes {
        let a = filled(n, spec.seed.wrapping_add(n as u64).wrapping_mul(2654435761));
        let b = filled(n, spec.seed.wrapping_add(n as u64).wrapping_mul(40503).wrapping_add(1));
        let mut c = Matrix::<f32>::zeros(n, n);
        for &algo in &spec.algos {
            for rep in 0..=spec.repetitions {
                let wall = match algo {
                    Algo::Naive => {
                        let t = Instant::now();
                        naive_mm(c.view_mut(), a.view(), b.view(), false)?;
                        t.elapsed().as_secs_f64()
                    }
                    Algo::Blocked => {
                        let t = Instant::now();
                        blocked_mm(c.view_mut(), a.view(), b.view(), false)?;
                        t.elapsed().as_secs_f64()
                    }
                    Algo::Winograd => {
                        let cfg = FastMMConfig::default();
                        let t = Instant::now();
                        winograd_mm(c.view_mut(), a.view(), b.view(), &cfg)?;
                        t.elapsed().as_secs_f64()
                    }
                    Algo::Rmul => {
                        let mut trace = DispatchTrace::new();
                        rmul_with_stats(
                            c.view_mut(),
                            a.view(),
                            b.view(),
                            policy,
                            &platform,
                            &mut trace,
                        )?
                        .wall_sec
                    }
                    Algo::DualIndependent => {
                        dual_wall(n, &a, &b, &platform)?
                    }
                };
                if rep > 0 {
                    // rep 0 is the warm-up.
                    records.push(BenchRecord::new(spec.label.clone(), algo, n, wall));
                }
            }
        }
    }
    Ok(records)
}

/// Runs one `n x n` multiply independently on each of the two highest
/// priority accelerators, concurrently; the wall time is the makespan.
pub fn dual_independent_bench(
    n: usize,
    label: impl Into<String>,
    registry: &EngineRegistry,
    seed: u64,
) -> Result<BenchRecord, Error> {
    let platform = Platform::<f32>::new(registry.clone());
    let a = filled(n, seed);
    let b = filled(n, seed.wrapping_add(1));
    let wall = dual_wall(n, &a, &b, &platform)?;
    Ok(BenchRecord::new(label, Algo::DualIndependent, n, wall))
}

fn dual_wall(
    n: usize,
    a: &Matrix<f32>,
    b: &Matrix<f32>,
    platform: &Platform<f32>,
) -> Result<f64, Error> {
    let queues = platform.accelerator_queues();
    if queues.len() < 2 {
        return Err(Error::PolicyConfig(format!(
            "independent dual run needs two accelerators, found {}",
            queues.len()
        )));
    }
    let (q0, q1) = (queues[0], queues[1]);
    for q in [q0, q1] {
        if n > q.capacity() {
            return Err(Error::PolicyConfig(format!(
                "size {n} exceeds engine {} capacity {}",
                q.engine().id,
                q.capacity()
            )));
        }
    }
    let mut c0 = Matrix::<f32>::zeros(n, n);
    let mut c1 = Matrix::<f32>::zeros(n, n);
    let (r0, r1) = std::thread::scope(|s| {
        let h0 = s.spawn(|| q0.enqueue_mm(c0.view_mut(), a.view(), b.view(), false).wait());
        let h1 = s.spawn(|| q1.enqueue_mm(c1.view_mut(), a.view(), b.view(), false).wait());
        (h0.join().expect("engine 0"), h1.join().expect("engine 1"))
    });
    Ok(r0?.total().max(r1?.total()))
}

pub const CSV_HEADER: &str = "label,algo,n,reported_n,wall_sec,gflops";

/// Writes records as CSV: the exact header above, one row per record in
/// input order, floats in shortest round-trip form (decimal point, no
/// locale).
pub fn emit_csv<W: Write>(records: &[BenchRecord], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.label, r.algo, r.n, r.reported_n, r.wall_sec, r.gflops
        )?;
    }
    Ok(())
}

/// Renders the CSV in memory (for writing whole files at once).
pub fn csv_string(records: &[BenchRecord]) -> String {
    let mut buf = Vec::new();
    emit_csv(records, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Parses the CSV format back; inverse of [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>, Error> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "bad CSV header {other:?}, expected {CSV_HEADER:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!(
                "row {}: expected 6 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64, Error> {
            s.parse()
                .map_err(|_| Error::Parse(format!("row {}: bad float {s:?}", idx + 2)))
        };
        records.push(BenchRecord {
            label: fields[0].to_string(),
            algo: fields[1].parse()?,
            n: fields[2]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad size {:?}", idx + 2, fields[2])))?,
            reported_n: parse_f(fields[3])?,
            wall_sec: parse_f(fields[4])?,
            gflops: parse_f(fields[5])?,
        });
    }
    Ok(records)
}
