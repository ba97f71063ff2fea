//! Compute-engine abstraction: descriptors, capacity estimation, and
//! per-engine MM queues.
//!
//! Every engine is identified by a unique integer and carries the
//! memory available for its three staging buffers plus a linear
//! performance model. A queue executes one command at a time in FIFO
//! order through the three-phase protocol:
//!
//! 1. move A and B into the input buffers,
//! 2. run the basic `C = A*B` kernel on the staged data,
//! 3. move the output back and add it into C on the host side.
//!
//! Accelerator engines are simulated: phase numerics are computed in
//! process (by the oracle kernel by default, so correctness tests
//! exercise the full protocol path) while the phase times come from
//! [`sim_execute_time`]. Host-CPU engines run the blocked kernel and
//! report measured wall times.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::kernel::{blocked_mm, naive_mm};
use crate::matrix::{raw_view, raw_view_mut, MatrixView, MatrixViewMut};
use crate::scalar::Scalar;
use crate::Error;

/// What a device is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineKind {
    #[serde(rename = "host-cpu")]
    HostCpu,
    #[serde(rename = "accelerator")]
    Accelerator,
}

/// Linear performance model of a simulated engine.
///
/// Rates are per second; latencies are fixed per-phase costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfModel {
    pub compute_flops_per_sec: f64,
    pub transfer_bytes_per_sec: f64,
    pub transfer_latency_sec: f64,
    pub kernel_launch_sec: f64,
}

impl PerfModel {
    pub fn validate(&self) -> Result<(), Error> {
        if self.compute_flops_per_sec <= 0.0 || self.transfer_bytes_per_sec <= 0.0 {
            return Err(Error::EngineConfig("rates must be positive".into()));
        }
        if self.transfer_latency_sec < 0.0 || self.kernel_launch_sec < 0.0 {
            return Err(Error::EngineConfig("latencies must be non-negative".into()));
        }
        Ok(())
    }

    /// Uniform speedup: rates multiplied by `s`, fixed costs divided by
    /// `s`, so every simulated duration scales by exactly `1/s`.
    pub fn scaled(&self, s: f64) -> PerfModel {
        PerfModel {
            compute_flops_per_sec: self.compute_flops_per_sec * s,
            transfer_bytes_per_sec: self.transfer_bytes_per_sec * s,
            transfer_latency_sec: self.transfer_latency_sec / s,
            kernel_launch_sec: self.kernel_launch_sec / s,
        }
    }
}

/// A configuration preset named after a base-clock multiplier column.
///
/// Presets scale an engine's compute side with the processor clock and
/// its transfer side with the memory clock, relative to the `Default`
/// column (2900 MHz processor, 1333 MHz memory). They are throughput
/// labels for the simulated engines, nothing more.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub label: &'static str,
    pub apu_mhz: f64,
    pub memory_mhz: f64,
}

pub const PRESETS: [Preset; 6] = [
    Preset {
        label: "Default",
        apu_mhz: 2900.0,
        memory_mhz: 1333.0,
    },
    Preset {
        label: "90",
        apu_mhz: 2610.0,
        memory_mhz: 1440.0,
    },
    Preset {
        label: "100",
        apu_mhz: 2900.0,
        memory_mhz: 1600.0,
    },
    Preset {
        label: "112",
        apu_mhz: 3248.0,
        memory_mhz: 1792.0,
    },
    Preset {
        label: "114",
        apu_mhz: 3306.0,
        memory_mhz: 1824.0,
    },
    Preset {
        label: "115",
        apu_mhz: 3335.0,
        memory_mhz: 1840.0,
    },
];

impl Preset {
    pub fn lookup(label: &str) -> Option<&'static Preset> {
        PRESETS.iter().find(|p| p.label == label)
    }

    /// Applies the clock ratios to a base (`Default`-column) model.
    pub fn apply(&self, base: &PerfModel) -> PerfModel {
        let compute_ratio = self.apu_mhz / PRESETS[0].apu_mhz;
        let memory_ratio = self.memory_mhz / PRESETS[0].memory_mhz;
        PerfModel {
            compute_flops_per_sec: base.compute_flops_per_sec * compute_ratio,
            transfer_bytes_per_sec: base.transfer_bytes_per_sec * memory_ratio,
            transfer_latency_sec: base.transfer_latency_sec / memory_ratio,
            kernel_launch_sec: base.kernel_launch_sec / compute_ratio,
        }
    }
}

/// Identity, staging memory and performance model of one engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineDescriptor {
    pub id: u32,
    pub kind: EngineKind,
    /// Memory available for the three staging buffers, in bytes.
    pub buffer_bytes: u64,
    /// Scalar width in bytes (4 for single precision).
    pub elem_bytes: u32,
    pub perf: PerfModel,
    /// Service order; 0 is served first and with the larger problem.
    pub priority_rank: u32,
}

impl EngineDescriptor {
    pub fn validate(&self) -> Result<(), Error> {
        if self.buffer_bytes == 0 {
            return Err(Error::EngineConfig(format!(
                "engine {}: buffer_bytes must be positive",
                self.id
            )));
        }
        if self.elem_bytes == 0 {
            return Err(Error::EngineConfig(format!(
                "engine {}: elem_bytes must be positive",
                self.id
            )));
        }
        self.perf.validate()
    }
}

/// Largest N such that three N x N matrices fit the engine's staging
/// memory: `N = floor(sqrt(buffer_bytes / (3 * elem_bytes)))`.
pub fn capacity_of(e: &EngineDescriptor) -> usize {
    (e.buffer_bytes / (3 * e.elem_bytes as u64)).isqrt() as usize
}

/// Ordered collection of engines, sorted by priority rank.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngineRegistry {
    engines: Vec<EngineDescriptor>,
}

impl EngineRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an engine; ids and priority ranks must be unique.
    pub fn register_engine(&mut self, e: EngineDescriptor) -> Result<(), Error> {
        e.validate()?;
        if self.engines.iter().any(|x| x.id == e.id) {
            return Err(Error::EngineConfig(format!("duplicate engine id {}", e.id)));
        }
        if self.engines.iter().any(|x| x.priority_rank == e.priority_rank) {
            return Err(Error::EngineConfig(format!(
                "duplicate priority rank {}",
                e.priority_rank
            )));
        }
        self.engines.push(e);
        self.engines.sort_by_key(|x| x.priority_rank);
        Ok(())
    }

    /// All engines, rank order.
    pub fn engines(&self) -> &[EngineDescriptor] {
        &self.engines
    }

    /// Accelerator engines only, rank order.
    pub fn accelerators(&self) -> impl Iterator<Item = &EngineDescriptor> {
        self.engines
            .iter()
            .filter(|e| e.kind == EngineKind::Accelerator)
    }

    pub fn accelerator_count(&self) -> usize {
        self.accelerators().count()
    }

    /// Smallest accelerator capacity, if any accelerator is registered.
    pub fn min_accelerator_capacity(&self) -> Option<usize> {
        self.accelerators().map(capacity_of).min()
    }

    /// Parses the engine configuration format: a JSON list of engine
    /// descriptors.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let engines: Vec<EngineDescriptor> =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut reg = EngineRegistry::new();
        for e in engines {
            reg.register_engine(e)?;
        }
        Ok(reg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, Error> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.engines).expect("descriptors serialize")
    }

    /// Replaces every accelerator's performance model with the preset
    /// scaling of it; host engines are untouched.
    pub fn with_preset(&self, preset: &Preset) -> EngineRegistry {
        let engines = self
            .engines
            .iter()
            .map(|e| {
                let mut e = e.clone();
                if e.kind == EngineKind::Accelerator {
                    e.perf = preset.apply(&e.perf);
                }
                e
            })
            .collect();
        EngineRegistry { engines }
    }

    /// The default two-accelerator system: an external device able to
    /// stage 4305 x 4305 triples (served first) and an internal one able
    /// to stage 3008 x 3008. Buffer sizes are inverted from those
    /// capacities; the performance numbers are plausible defaults, not
    /// measurements.
    pub fn default_pair() -> EngineRegistry {
        let mut reg = EngineRegistry::new();
        reg.register_engine(EngineDescriptor {
            id: 0,
            kind: EngineKind::Accelerator,
            buffer_bytes: 3 * 4305 * 4305 * 4,
            elem_bytes: 4,
            perf: PerfModel {
                compute_flops_per_sec: 120e9,
                transfer_bytes_per_sec: 6e9,
                transfer_latency_sec: 30e-6,
                kernel_launch_sec: 15e-6,
            },
            priority_rank: 0,
        })
        .expect("valid default");
        reg.register_engine(EngineDescriptor {
            id: 1,
            kind: EngineKind::Accelerator,
            buffer_bytes: 3 * 3008 * 3008 * 4,
            elem_bytes: 4,
            perf: PerfModel {
                compute_flops_per_sec: 100e9,
                transfer_bytes_per_sec: 10e9,
                transfer_latency_sec: 10e-6,
                kernel_launch_sec: 15e-6,
            },
            priority_rank: 1,
        })
        .expect("valid default");
        reg
    }
}

/// Per-phase durations of one command, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTiming {
    pub transfer_in: f64,
    pub compute: f64,
    pub transfer_out: f64,
}

impl PhaseTiming {
    pub fn total(&self) -> f64 {
        self.transfer_in + self.compute + self.transfer_out
    }
}

/// Simulated phase durations of an `m x k * k x n` command on `e`:
/// operands in, `2mnk` flops, result out.
pub fn sim_execute_time(e: &EngineDescriptor, m: usize, n: usize, k: usize) -> PhaseTiming {
    let eb = e.elem_bytes as f64;
    let p = &e.perf;
    PhaseTiming {
        transfer_in: p.transfer_latency_sec
            + ((m * k + k * n) as f64) * eb / p.transfer_bytes_per_sec,
        compute: p.kernel_launch_sec + 2.0 * (m as f64) * (n as f64) * (k as f64) / p.compute_flops_per_sec,
        transfer_out: p.transfer_latency_sec + ((m * n) as f64) * eb / p.transfer_bytes_per_sec,
    }
}

/// Which in-process kernel a simulated accelerator runs in phase 2.
///
/// `Oracle` (the triple loop) is the default so protocol tests compare
/// exactly against the oracle; `Blocked` is for structural runs at
/// sizes where the triple loop would be too slow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimKernel {
    #[default]
    Oracle,
    Blocked,
}

/// One executed (or rejected) command as seen by its queue.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandRecord {
    pub seq: u64,
    pub accumulate: bool,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// Where the output view sits in its root matrix.
    pub c_row_off: usize,
    pub c_col_off: usize,
    pub timing: PhaseTiming,
}

impl CommandRecord {
    /// Multiply-add count of the command.
    pub fn flops(&self) -> u64 {
        2 * self.m as u64 * self.n as u64 * self.k as u64
    }
}

#[derive(Debug, Clone)]
struct CommandOutcome {
    engine_id: u32,
    status: Result<PhaseTiming, Error>,
}

/// Token for one enqueued command.
///
/// Commands complete in FIFO order within their queue; waiting is
/// idempotent and returns the same status every time.
#[derive(Debug, Clone)]
pub struct CompletionHandle {
    inner: Arc<CommandOutcome>,
}

impl CompletionHandle {
    /// Blocks until the command and all prior commands in the same
    /// queue have finished, then reports the outcome.
    pub fn wait(&self) -> Result<PhaseTiming, Error> {
        self.inner.status.clone()
    }

    pub fn engine_id(&self) -> u32 {
        self.inner.engine_id
    }
}

struct QueueState<T> {
    buf_a: Vec<T>,
    buf_b: Vec<T>,
    buf_c: Vec<T>,
    clock: f64,
    log: Vec<CommandRecord>,
    next_seq: u64,
}

/// Matrix-multiplication queue of one engine.
///
/// Owns the three staging buffers for its whole lifetime and executes
/// commands strictly in FIFO order (the state lock is the queue).
/// Safe to share across threads; distinct queues never share staging
/// state.
pub struct MMQueue<T: Scalar> {
    engine: EngineDescriptor,
    kernel: SimKernel,
    state: Mutex<QueueState<T>>,
}

impl<T: Scalar> MMQueue<T> {
    pub fn new(engine: EngineDescriptor) -> Self {
        Self::with_kernel(engine, SimKernel::default())
    }

    pub fn with_kernel(engine: EngineDescriptor, kernel: SimKernel) -> Self {
        MMQueue {
            engine,
            kernel,
            state: Mutex::new(QueueState {
                buf_a: Vec::new(),
                buf_b: Vec::new(),
                buf_c: Vec::new(),
                clock: 0.0,
                log: Vec::new(),
                next_seq: 0,
            }),
        }
    }

    pub fn engine(&self) -> &EngineDescriptor {
        &self.engine
    }

    pub fn capacity(&self) -> usize {
        capacity_of(&self.engine)
    }

    /// Accumulated simulated busy time (stays 0 for host-CPU engines).
    pub fn clock(&self) -> f64 {
        self.state.lock().unwrap().clock
    }

    /// Snapshot of every executed command, FIFO order.
    pub fn log(&self) -> Vec<CommandRecord> {
        self.state.lock().unwrap().log.clone()
    }

    pub fn reset_clock(&self) {
        self.state.lock().unwrap().clock = 0.0;
    }

    /// Submits `C = A*B` (or `C += A*B`) through the three-phase
    /// protocol. Shape or capacity violations are rejected before any
    /// transfer; the returned handle then carries the error.
    pub fn enqueue_mm<'a>(
        &self,
        mut c: MatrixViewMut<'a, T>,
        a: MatrixView<'a, T>,
        b: MatrixView<'a, T>,
        accumulate: bool,
    ) -> CompletionHandle {
        let (m, n) = (c.rows(), c.cols());
        let k = a.cols();
        if a.rows() != m || b.rows() != k || b.cols() != n {
            return self.rejected(Error::ShapeMismatch(format!(
                "C is {m}x{n}, A is {}x{}, B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        let size = m.max(n).max(k);
        let capacity = self.capacity();
        if size > capacity {
            return self.rejected(Error::CapacityExceeded {
                engine_id: self.engine.id,
                size,
                capacity,
            });
        }

        let mut guard = self.state.lock().unwrap();
        let st = &mut *guard;
        let simulated = self.engine.kind == EngineKind::Accelerator;
        let started = Instant::now();

        // Phase 1: operands into the input buffers.
        stage_in(&mut st.buf_a, a);
        stage_in(&mut st.buf_b, b);
        let t_in = started.elapsed().as_secs_f64();

        // Phase 2: the basic kernel, always C = A*B on the staged data.
        let kernel_started = Instant::now();
        st.buf_c.clear();
        st.buf_c.resize(m * n, T::zero());
        {
            let (bc, ba, bb) = (&mut st.buf_c, &st.buf_a, &st.buf_b);
            let cv = unsafe { raw_view_mut(bc.as_mut_ptr(), m, n, n) };
            let av = unsafe { raw_view(ba.as_ptr(), m, k, k) };
            let bv = unsafe { raw_view(bb.as_ptr(), k, n, n) };
            let run = match (simulated, self.kernel) {
                (true, SimKernel::Oracle) => naive_mm(cv, av, bv, false),
                _ => blocked_mm(cv, av, bv, false),
            };
            run.expect("staged shapes are consistent");
        }
        let t_kernel = kernel_started.elapsed().as_secs_f64();

        // Phase 3: move the output back and add into C host-side.
        let out_started = Instant::now();
        for i in 0..m {
            let src = &st.buf_c[i * n..(i + 1) * n];
            let dst = c.row_mut(i);
            if accumulate {
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            } else {
                dst.copy_from_slice(src);
            }
        }
        let t_out = out_started.elapsed().as_secs_f64();

        let timing = if simulated {
            sim_execute_time(&self.engine, m, n, k)
        } else {
            PhaseTiming {
                transfer_in: t_in,
                compute: t_kernel,
                transfer_out: t_out,
            }
        };
        if simulated {
            st.clock += timing.total();
        }
        let seq = st.next_seq;
        st.next_seq += 1;
        st.log.push(CommandRecord {
            seq,
            accumulate,
            m,
            n,
            k,
            c_row_off: c.row_off(),
            c_col_off: c.col_off(),
            timing,
        });
        CompletionHandle {
            inner: Arc::new(CommandOutcome {
                engine_id: self.engine.id,
                status: Ok(timing),
            }),
        }
    }

    fn rejected(&self, err: Error) -> CompletionHandle {
        CompletionHandle {
            inner: Arc::new(CommandOutcome {
                engine_id: self.engine.id,
                status: Err(err),
            }),
        }
    }
}

fn stage_in<T: Scalar>(buf: &mut Vec<T>, src: MatrixView<'_, T>) {
    let (rows, cols) = (src.rows(), src.cols());
    buf.clear();
    buf.reserve(rows * cols);
    for i in 0..rows {
        buf.extend_from_slice(src.row(i));
    }
}

/// A registry plus one MM queue per engine: the runtime system the
/// scheduler dispatches onto.
pub struct Platform<T: Scalar> {
    registry: EngineRegistry,
    queues: Vec<MMQueue<T>>,
}

impl<T: Scalar> Platform<T> {
    pub fn new(registry: EngineRegistry) -> Self {
        Self::with_sim_kernel(registry, SimKernel::default())
    }

    /// Builds queues whose simulated engines run `kernel` in phase 2.
    pub fn with_sim_kernel(registry: EngineRegistry, kernel: SimKernel) -> Self {
        let queues = registry
            .engines()
            .iter()
            .map(|e| MMQueue::with_kernel(e.clone(), kernel))
            .collect();
        Platform { registry, queues }
    }

    pub fn registry(&self) -> &EngineRegistry {
        &self.registry
    }

    /// Queues of accelerator engines, rank order.
    pub fn accelerator_queues(&self) -> Vec<&MMQueue<T>> {
        self.queues
            .iter()
            .filter(|q| q.engine().kind == EngineKind::Accelerator)
            .collect()
    }

    pub fn queues(&self) -> &[MMQueue<T>] {
        &self.queues
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rel_error;
    use crate::matrix::Matrix;
    use crate::testutil::random_matrix;
    use proptest::prelude::*;

    fn accel(id: u32, rank: u32, buffer_bytes: u64) -> EngineDescriptor {
        EngineDescriptor {
            id,
            kind: EngineKind::Accelerator,
            buffer_bytes,
            elem_bytes: 4,
            perf: PerfModel {
                compute_flops_per_sec: 100e9,
                transfer_bytes_per_sec: 8e9,
                transfer_latency_sec: 0.0,
                kernel_launch_sec: 0.0,
            },
            priority_rank: rank,
        }
    }

    #[test]
    fn capacity_reproduces_reference_sizes() {
        assert_eq!(capacity_of(&accel(0, 0, 3 * 3008 * 3008 * 4)), 3008);
        assert_eq!(capacity_of(&accel(0, 0, 3 * 4305 * 4305 * 4)), 4305);
        assert_eq!(capacity_of(&accel(0, 0, 12)), 1);
    }

    #[test]
    fn default_pair_capacities() {
        let reg = EngineRegistry::default_pair();
        let caps: Vec<usize> = reg.accelerators().map(capacity_of).collect();
        assert_eq!(caps, vec![4305, 3008]);
        assert_eq!(reg.min_accelerator_capacity(), Some(3008));
    }

    #[test]
    fn registry_rejects_duplicates() {
        let mut reg = EngineRegistry::new();
        reg.register_engine(accel(0, 0, 1 << 20)).unwrap();
        assert!(reg.register_engine(accel(0, 1, 1 << 20)).is_err()); // id
        assert!(reg.register_engine(accel(1, 0, 1 << 20)).is_err()); // rank
        reg.register_engine(accel(1, 1, 1 << 20)).unwrap();
        assert_eq!(reg.engines().len(), 2);
    }

    #[test]
    fn registry_orders_by_rank() {
        let mut reg = EngineRegistry::new();
        reg.register_engine(accel(7, 1, 1 << 20)).unwrap();
        reg.register_engine(accel(3, 0, 1 << 20)).unwrap();
        let ids: Vec<u32> = reg.engines().iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![3, 7]);
    }

    #[test]
    fn engine_config_json_field_names() {
        let text = r#"[
            {
                "id": 0,
                "kind": "accelerator",
                "buffer_bytes": 108576768,
                "elem_bytes": 4,
                "perf": {
                    "compute_flops_per_sec": 1.0e11,
                    "transfer_bytes_per_sec": 8.0e9,
                    "transfer_latency_sec": 0.0,
                    "kernel_launch_sec": 0.0
                },
                "priority_rank": 0
            }
        ]"#;
        let reg = EngineRegistry::from_json(text).unwrap();
        assert_eq!(capacity_of(&reg.engines()[0]), 3008);

        // Round trip preserves the exact field names.
        let out = reg.to_json();
        for name in [
            "\"id\"",
            "\"kind\"",
            "\"buffer_bytes\"",
            "\"elem_bytes\"",
            "\"perf\"",
            "\"compute_flops_per_sec\"",
            "\"transfer_bytes_per_sec\"",
            "\"transfer_latency_sec\"",
            "\"kernel_launch_sec\"",
            "\"priority_rank\"",
            "\"accelerator\"",
        ] {
            assert!(out.contains(name), "missing {name} in {out}");
        }
    }

    #[test]
    fn sim_time_reference_numbers() {
        // N = 1000, 8 GB/s transfer, 100 GFLOPS, zero latencies.
        let e = accel(0, 0, u64::MAX / 4);
        let t = sim_execute_time(&e, 1000, 1000, 1000);
        assert_eq!(t.transfer_in, 2.0 * 4.0 * 1.0e6 / 8.0e9);
        assert_eq!(t.compute, 2.0e9 / 1.0e11);
        assert_eq!(t.transfer_out, 4.0 * 1.0e6 / 8.0e9);
    }

    #[test]
    fn sim_time_zero_size_is_latency_only() {
        let mut e = accel(0, 0, 1 << 20);
        e.perf.transfer_latency_sec = 3e-5;
        e.perf.kernel_launch_sec = 7e-5;
        let t = sim_execute_time(&e, 0, 0, 0);
        assert_eq!(t.transfer_in, 3e-5);
        assert_eq!(t.compute, 7e-5);
        assert_eq!(t.transfer_out, 3e-5);
    }

    #[test]
    fn doubling_compute_rate_halves_compute() {
        let e = accel(0, 0, 1 << 30);
        let mut fast = e.clone();
        fast.perf.compute_flops_per_sec *= 2.0;
        let t1 = sim_execute_time(&e, 100, 100, 100);
        let t2 = sim_execute_time(&fast, 100, 100, 100);
        assert_eq!(t2.compute, t1.compute / 2.0);
    }

    #[test]
    fn uniform_scaling_is_exact_for_powers_of_two() {
        let e = accel(0, 0, 1 << 30);
        let mut scaled = e.clone();
        scaled.perf = e.perf.scaled(2.0);
        let t1 = sim_execute_time(&e, 123, 77, 250);
        let t2 = sim_execute_time(&scaled, 123, 77, 250);
        assert_eq!(t2.total(), t1.total() / 2.0);
    }

    #[test]
    fn enqueue_matches_oracle_exactly() {
        let q = MMQueue::<f32>::new(accel(0, 0, 1 << 20));
        let a = random_matrix::<f32>(2, 2, 1);
        let b = random_matrix::<f32>(2, 2, 2);
        let mut c = Matrix::<f32>::zeros(2, 2);
        q.enqueue_mm(c.view_mut(), a.view(), b.view(), false)
            .wait()
            .unwrap();
        let mut want = Matrix::<f32>::zeros(2, 2);
        naive_mm(want.view_mut(), a.view(), b.view(), false).unwrap();
        assert_eq!(c, want);
    }

    #[test]
    fn capacity_boundary_is_enforced() {
        // capacity 4: 3 * 4^2 * 4 bytes = 192
        let q = MMQueue::<f32>::new(accel(0, 0, 192));
        assert_eq!(q.capacity(), 4);
        let a = random_matrix::<f32>(4, 4, 1);
        let b = random_matrix::<f32>(4, 4, 2);
        let mut c = Matrix::<f32>::zeros(4, 4);
        assert!(q
            .enqueue_mm(c.view_mut(), a.view(), b.view(), false)
            .wait()
            .is_ok());

        let a5 = random_matrix::<f32>(5, 5, 3);
        let b5 = random_matrix::<f32>(5, 5, 4);
        let mut c5 = Matrix::<f32>::zeros(5, 5);
        let h = q.enqueue_mm(c5.view_mut(), a5.view(), b5.view(), false);
        assert!(matches!(h.wait(), Err(Error::CapacityExceeded { .. })));
        // Rejected before any transfer: no log entry, no clock advance.
        assert!(q.log().len() == 1);
    }

    #[test]
    fn wait_is_idempotent() {
        let q = MMQueue::<f32>::new(accel(0, 0, 1 << 20));
        let a = random_matrix::<f32>(3, 3, 9);
        let b = random_matrix::<f32>(3, 3, 10);
        let mut c = Matrix::<f32>::zeros(3, 3);
        let h = q.enqueue_mm(c.view_mut(), a.view(), b.view(), false);
        let first = h.wait().unwrap();
        let second = h.wait().unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn fifo_order_under_concurrent_enqueue() {
        let q = MMQueue::<f32>::new(accel(0, 0, 1 << 20));
        let a = random_matrix::<f32>(8, 8, 20);
        let b = random_matrix::<f32>(8, 8, 21);
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    let mut c = Matrix::<f32>::zeros(8, 8);
                    for _ in 0..8 {
                        q.enqueue_mm(c.view_mut(), a.view(), b.view(), false)
                            .wait()
                            .unwrap();
                    }
                });
            }
        });
        let log = q.log();
        assert_eq!(log.len(), 32);
        for (i, rec) in log.iter().enumerate() {
            assert_eq!(rec.seq, i as u64);
        }
    }

    #[test]
    fn clock_adds_up_exactly() {
        let q = MMQueue::<f32>::new(accel(0, 0, 1 << 20));
        let mut expect = 0.0;
        for (m, k, n, seed) in [(3usize, 4usize, 5usize, 1u64), (7, 2, 9, 2), (1, 1, 1, 3)] {
            let a = random_matrix::<f32>(m, k, seed);
            let b = random_matrix::<f32>(k, n, seed + 50);
            let mut c = Matrix::<f32>::zeros(m, n);
            let t = q
                .enqueue_mm(c.view_mut(), a.view(), b.view(), false)
                .wait()
                .unwrap();
            expect += t.total();
        }
        assert_eq!(q.clock(), expect);
    }

    #[test]
    fn host_backend_matches_oracle() {
        let host = EngineDescriptor {
            id: 9,
            kind: EngineKind::HostCpu,
            buffer_bytes: 1 << 24,
            elem_bytes: 4,
            perf: PerfModel {
                compute_flops_per_sec: 1e9,
                transfer_bytes_per_sec: 1e9,
                transfer_latency_sec: 0.0,
                kernel_launch_sec: 0.0,
            },
            priority_rank: 0,
        };
        let q = MMQueue::<f32>::new(host);
        let a = random_matrix::<f32>(40, 30, 30);
        let b = random_matrix::<f32>(30, 50, 31);
        let mut c = Matrix::<f32>::zeros(40, 50);
        q.enqueue_mm(c.view_mut(), a.view(), b.view(), false)
            .wait()
            .unwrap();
        let mut want = Matrix::<f32>::zeros(40, 50);
        naive_mm(want.view_mut(), a.view(), b.view(), false).unwrap();
        assert!(rel_error(c.view(), want.view()).unwrap() <= crate::kernel::REL_TOL_F32);
        // Host queues keep a zero simulated clock but measured timings.
        assert_eq!(q.clock(), 0.0);
        assert!(q.log()[0].timing.compute > 0.0);
    }

    #[test]
    fn accumulate_goes_through_host_side_add() {
        let q = MMQueue::<f32>::new(accel(0, 0, 1 << 20));
        let a = random_matrix::<f32>(5, 5, 40);
        let b = random_matrix::<f32>(5, 5, 41);
        let mut c = random_matrix::<f32>(5, 5, 42);
        let before = c.clone();
        q.enqueue_mm(c.view_mut(), a.view(), b.view(), true)
            .wait()
            .unwrap();
        let mut prod = Matrix::<f32>::zeros(5, 5);
        naive_mm(prod.view_mut(), a.view(), b.view(), false).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(c.get(i, j), before.get(i, j) + prod.get(i, j));
            }
        }
    }

    #[test]
    fn queues_do_not_share_staging_state() {
        let q0 = MMQueue::<f32>::new(accel(0, 0, 1 << 20));
        let q1 = MMQueue::<f32>::new(accel(1, 1, 1 << 20));
        let a = random_matrix::<f32>(16, 16, 50);
        let b = random_matrix::<f32>(16, 16, 51);
        let mut want = Matrix::<f32>::zeros(16, 16);
        naive_mm(want.view_mut(), a.view(), b.view(), false).unwrap();
        std::thread::scope(|s| {
            for q in [&q0, &q1] {
                s.spawn(|| {
                    for _ in 0..16 {
                        let mut c = Matrix::<f32>::zeros(16, 16);
                        q.enqueue_mm(c.view_mut(), a.view(), b.view(), false)
                            .wait()
                            .unwrap();
                        assert_eq!(c, want);
                    }
                });
            }
        });
    }

    #[test]
    fn preset_ratios() {
        let base = PerfModel {
            compute_flops_per_sec: 100e9,
            transfer_bytes_per_sec: 8e9,
            transfer_latency_sec: 1e-5,
            kernel_launch_sec: 2e-5,
        };
        let id = Preset::lookup("Default").unwrap().apply(&base);
        assert_eq!(id, base);
        let p115 = Preset::lookup("115").unwrap().apply(&base);
        assert_eq!(p115.compute_flops_per_sec, 100e9 * (3335.0 / 2900.0));
        assert_eq!(p115.transfer_bytes_per_sec, 8e9 * (1840.0 / 1333.0));
        assert!(p115.transfer_latency_sec < base.transfer_latency_sec);
        assert!(Preset::lookup("97").is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn capacity_is_the_unique_boundary(buffer in 12u64..1_000_000_000, elem in 1u32..9) {
            let e = accel(0, 0, buffer);
            let e = EngineDescriptor { elem_bytes: elem, ..e };
            let n = capacity_of(&e) as u64;
            let eb = elem as u64;
            prop_assert!(3 * n * n * eb <= buffer);
            prop_assert!(3 * (n + 1) * (n + 1) * eb > buffer);
        }
    }
}
