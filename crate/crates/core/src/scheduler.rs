//! The control plane: recursive decomposition, threshold-based leaf
//! dispatch, and the balanced two-engine quadrant split.
//!
//! [`rmul`] splits all three matrices into quadrants and issues the
//! eight sub-products in a fixed order (four assignments, then four
//! accumulations) until the problem is smaller than the recursion
//! point. [`leaf_dispatch`] then picks the leaf backend by size:
//! two accelerators above `k1`, the rank-0 accelerator between `k0`
//! and `k1`, the blocked host kernel below `k0`.
//!
//! Every decision is appended to a [`DispatchTrace`], and the [`plan`]
//! module re-derives traces and simulated wall times from shapes alone,
//! so dispatch behavior at full scale is assertable without computing.

use std::time::Instant;

use serde::Deserialize;

use crate::engine::{capacity_of, EngineRegistry, MMQueue, Platform};
use crate::kernel::blocked_mm;
use crate::matrix::{MatrixView, MatrixViewMut};
use crate::scalar::Scalar;
use crate::Error;

/// Size thresholds steering the scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DispatchPolicy {
    /// Below this the host CPU runs the leaf.
    pub k0: usize,
    /// At or above this two accelerators share the leaf.
    pub k1: usize,
    /// At or above this the recursion splits instead of dispatching.
    pub recursion_point: usize,
    /// Whether `recursion_point` was derived from the registry.
    pub auto_recursion_point: bool,
}

impl DispatchPolicy {
    pub fn new(k0: usize, k1: usize, recursion_point: usize) -> Result<Self, Error> {
        let p = DispatchPolicy {
            k0,
            k1,
            recursion_point,
            auto_recursion_point: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// `recursion_point = 2 * min accelerator capacity`, so every dual
    /// leaf's quadrants fit both accelerators.
    pub fn with_auto_recursion_point(
        k0: usize,
        k1: usize,
        registry: &EngineRegistry,
    ) -> Result<Self, Error> {
        let rp = auto_recursion_point(registry)?;
        let p = DispatchPolicy {
            k0,
            k1,
            recursion_point: rp,
            auto_recursion_point: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// The default thresholds: k0 = 400, k1 = 3000, automatic
    /// recursion point.
    pub fn default_for(registry: &EngineRegistry) -> Result<Self, Error> {
        Self::with_auto_recursion_point(400, 3000, registry)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.k0 == 0 {
            return Err(Error::PolicyConfig("k0 must be positive".into()));
        }
        if !(self.k0 <= self.k1 && self.k1 <= self.recursion_point) {
            return Err(Error::PolicyConfig(format!(
                "need k0 <= k1 <= recursion_point, got {} / {} / {}",
                self.k0, self.k1, self.recursion_point
            )));
        }
        Ok(())
    }

    /// Parses the policy format `{"k0": .., "k1": .., "recursion_point":
    /// <count> | "auto"}`; `"auto"` is resolved against the registry.
    pub fn from_json(text: &str, registry: &EngineRegistry) -> Result<Self, Error> {
        #[derive(Deserialize)]
        struct PolicyFile {
            k0: usize,
            k1: usize,
            recursion_point: RecursionPointSpec,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum RecursionPointSpec {
            Fixed(usize),
            Named(String),
        }
        let f: PolicyFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        match f.recursion_point {
            RecursionPointSpec::Fixed(rp) => Self::new(f.k0, f.k1, rp),
            RecursionPointSpec::Named(s) if s == "auto" => {
                Self::with_auto_recursion_point(f.k0, f.k1, registry)
            }
            RecursionPointSpec::Named(s) => Err(Error::Parse(format!(
                "recursion_point must be a count or \"auto\", got {s:?}"
            ))),
        }
    }

    pub fn from_path(path: &std::path::Path, registry: &EngineRegistry) -> Result<Self, Error> {
        Self::from_json(&std::fs::read_to_string(path)?, registry)
    }
}

/// Twice the smallest accelerator capacity.
pub fn auto_recursion_point(registry: &EngineRegistry) -> Result<usize, Error> {
    registry
        .min_accelerator_capacity()
        .map(|c| 2 * c)
        .ok_or_else(|| {
            Error::PolicyConfig(
                "automatic recursion point needs at least one accelerator".into(),
            )
        })
}

/// One scheduling decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchEvent {
    Recurse {
        m: usize,
        n: usize,
        k: usize,
    },
    LeafCpu {
        m: usize,
        n: usize,
        k: usize,
    },
    LeafSingle {
        m: usize,
        n: usize,
        k: usize,
        engine_id: u32,
    },
    LeafDual {
        m: usize,
        n: usize,
        k: usize,
        engine_ids: [u32; 2],
    },
}

impl DispatchEvent {
    pub fn is_leaf(&self) -> bool {
        !matches!(self, DispatchEvent::Recurse { .. })
    }

    /// Multiply-add count of a leaf event (zero for recurse events).
    pub fn leaf_flops(&self) -> u128 {
        match *self {
            DispatchEvent::Recurse { .. } => 0,
            DispatchEvent::LeafCpu { m, n, k }
            | DispatchEvent::LeafSingle { m, n, k, .. }
            | DispatchEvent::LeafDual { m, n, k, .. } => 2 * m as u128 * n as u128 * k as u128,
        }
    }
}

/// Execution-ordered record of every scheduling decision; every
/// multiply appears exactly once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DispatchTrace {
    events: Vec<DispatchEvent>,
}

impl DispatchTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[DispatchEvent] {
        &self.events
    }

    pub fn recurse_count(&self) -> usize {
        self.events.iter().filter(|e| !e.is_leaf()).count()
    }

    pub fn leaf_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_leaf()).count()
    }

    /// Total multiply-add count over all leaf events; equals `2*M*N*K`
    /// of the top-level problem for a non-accumulating run.
    pub fn leaf_flops(&self) -> u128 {
        self.events.iter().map(|e| e.leaf_flops()).sum()
    }

    fn push(&mut self, e: DispatchEvent) {
        self.events.push(e);
    }
}

/// Wall-time accounting of one scheduled run: simulated seconds for
/// accelerator leaves, measured seconds for host leaves.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    pub wall_sec: f64,
}

/// Which backend a leaf goes to. The single decision function shared by
/// the executor and the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LeafChoice {
    Cpu,
    Single { engine_id: u32 },
    Dual { engine_ids: [u32; 2] },
}

fn choose_leaf(
    m: usize,
    n: usize,
    k: usize,
    policy: &DispatchPolicy,
    registry: &EngineRegistry,
) -> Result<LeafChoice, Error> {
    let size = m.max(n).max(k);
    let accels: Vec<_> = registry.accelerators().collect();
    if accels.is_empty() {
        // No accelerators at all: the host serves every size.
        return Ok(LeafChoice::Cpu);
    }
    if size >= policy.k1 {
        if accels.len() >= 2 {
            let half = m.div_ceil(2).max(n.div_ceil(2)).max(k.div_ceil(2));
            for e in &accels[..2] {
                let cap = capacity_of(e);
                if half > cap {
                    return Err(Error::PolicyConfig(format!(
                        "dual leaf of size {size} needs {half} per engine, \
                         engine {} holds only {cap}",
                        e.id
                    )));
                }
            }
            return Ok(LeafChoice::Dual {
                engine_ids: [accels[0].id, accels[1].id],
            });
        }
        // One accelerator: serve the whole leaf on it if it fits.
        let cap = capacity_of(accels[0]);
        if size <= cap {
            return Ok(LeafChoice::Single {
                engine_id: accels[0].id,
            });
        }
        return Err(Error::PolicyConfig(format!(
            "leaf of size {size} exceeds the only accelerator's capacity {cap}"
        )));
    }
    if size >= policy.k0 {
        let cap = capacity_of(accels[0]);
        if size > cap {
            return Err(Error::PolicyConfig(format!(
                "single-engine leaf of size {size} exceeds rank-0 capacity {cap}"
            )));
        }
        return Ok(LeafChoice::Single {
            engine_id: accels[0].id,
        });
    }
    Ok(LeafChoice::Cpu)
}

/// Recursive multiply `C = A*B`.
pub fn rmul<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    policy: &DispatchPolicy,
    platform: &Platform<T>,
    trace: &mut DispatchTrace,
) -> Result<(), Error> {
    rmul_with_stats(c, a, b, policy, platform, trace).map(|_| ())
}

/// Recursive multiply-accumulate `C += A*B`.
pub fn rmul_add<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    policy: &DispatchPolicy,
    platform: &Platform<T>,
    trace: &mut DispatchTrace,
) -> Result<(), Error> {
    check_shapes(&c, &a, &b)?;
    policy.validate()?;
    mm_recursive(c, a, b, true, policy, platform, trace).map(|_| ())
}

/// [`rmul`] plus wall-time accounting.
pub fn rmul_with_stats<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    policy: &DispatchPolicy,
    platform: &Platform<T>,
    trace: &mut DispatchTrace,
) -> Result<RunStats, Error> {
    check_shapes(&c, &a, &b)?;
    policy.validate()?;
    let wall_sec = mm_recursive(c, a, b, false, policy, platform, trace)?;
    Ok(RunStats { wall_sec })
}

fn check_shapes<T: Scalar>(
    c: &MatrixViewMut<'_, T>,
    a: &MatrixView<'_, T>,
    b: &MatrixView<'_, T>,
) -> Result<(), Error> {
    if a.rows() != c.rows() || b.cols() != c.cols() || a.cols() != b.rows() {
        return Err(Error::ShapeMismatch(format!(
            "C is {}x{}, A is {}x{}, B is {}x{}",
            c.rows(),
            c.cols(),
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

fn mm_recursive<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
    policy: &DispatchPolicy,
    platform: &Platform<T>,
    trace: &mut DispatchTrace,
) -> Result<f64, Error> {
    let (m, n) = (c.rows(), c.cols());
    let k = a.cols();
    let size = m.max(n).max(k);
    if size < policy.recursion_point {
        return leaf_dispatch_timed(c, a, b, accumulate, policy, platform, trace);
    }

    trace.push(DispatchEvent::Recurse { m, n, k });
    let mut cq = c.split_quadrants();
    let aq = a.split_quadrants();
    let bq = b.split_quadrants();

    // Four assignments, then four accumulations, in this exact order.
    let mut wall = 0.0;
    wall += mm_recursive(cq.q0.reborrow(), aq.q0, bq.q0, accumulate, policy, platform, trace)?;
    wall += mm_recursive(cq.q1.reborrow(), aq.q0, bq.q1, accumulate, policy, platform, trace)?;
    wall += mm_recursive(cq.q2.reborrow(), aq.q2, bq.q0, accumulate, policy, platform, trace)?;
    wall += mm_recursive(cq.q3.reborrow(), aq.q2, bq.q1, accumulate, policy, platform, trace)?;
    wall += mm_recursive(cq.q0.reborrow(), aq.q1, bq.q2, true, policy, platform, trace)?;
    wall += mm_recursive(cq.q1.reborrow(), aq.q1, bq.q3, true, policy, platform, trace)?;
    wall += mm_recursive(cq.q2.reborrow(), aq.q3, bq.q2, true, policy, platform, trace)?;
    wall += mm_recursive(cq.q3.reborrow(), aq.q3, bq.q3, true, policy, platform, trace)?;
    Ok(wall)
}

/// Leaf backend selection per the size thresholds.
pub fn leaf_dispatch<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
    policy: &DispatchPolicy,
    platform: &Platform<T>,
    trace: &mut DispatchTrace,
) -> Result<(), Error> {
    check_shapes(&c, &a, &b)?;
    leaf_dispatch_timed(c, a, b, accumulate, policy, platform, trace).map(|_| ())
}

fn leaf_dispatch_timed<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
    policy: &DispatchPolicy,
    platform: &Platform<T>,
    trace: &mut DispatchTrace,
) -> Result<f64, Error> {
    let (m, n) = (c.rows(), c.cols());
    let k = a.cols();
    match choose_leaf(m, n, k, policy, platform.registry())? {
        LeafChoice::Cpu => {
            trace.push(DispatchEvent::LeafCpu { m, n, k });
            let started = Instant::now();
            blocked_mm(c, a, b, accumulate)?;
            Ok(started.elapsed().as_secs_f64())
        }
        LeafChoice::Single { engine_id } => {
            trace.push(DispatchEvent::LeafSingle { m, n, k, engine_id });
            let q = queue_by_id(platform, engine_id);
            let timing = q.enqueue_mm(c, a, b, accumulate).wait()?;
            Ok(timing.total())
        }
        LeafChoice::Dual { engine_ids } => {
            trace.push(DispatchEvent::LeafDual { m, n, k, engine_ids });
            let q0 = queue_by_id(platform, engine_ids[0]);
            let q1 = queue_by_id(platform, engine_ids[1]);
            run_dual(c, a, b, accumulate, q0, q1)
        }
    }
}

/// Balanced two-engine leaf: quadrant split with the left output column
/// (C0, C2) on the rank-0 engine and the right column (C1, C3) on the
/// rank-1 engine, both queues running concurrently.
///
/// With fewer than two accelerators this falls back to a single-engine
/// leaf on rank 0 when the problem fits it.
pub fn dual_engine_leaf<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
    platform: &Platform<T>,
    trace: &mut DispatchTrace,
) -> Result<(), Error> {
    check_shapes(&c, &a, &b)?;
    let (m, n) = (c.rows(), c.cols());
    let k = a.cols();
    let size = m.max(n).max(k);
    let queues = platform.accelerator_queues();
    match queues.len() {
        0 => Err(Error::PolicyConfig(
            "dual-engine leaf needs at least one accelerator".into(),
        )),
        1 => {
            let q = queues[0];
            if size > q.capacity() {
                return Err(Error::PolicyConfig(format!(
                    "dual-engine fallback: size {size} exceeds the only \
                     accelerator's capacity {}",
                    q.capacity()
                )));
            }
            trace.push(DispatchEvent::LeafSingle {
                m,
                n,
                k,
                engine_id: q.engine().id,
            });
            q.enqueue_mm(c, a, b, accumulate).wait()?;
            Ok(())
        }
        _ => {
            let (q0, q1) = (queues[0], queues[1]);
            let half = m.div_ceil(2).max(n.div_ceil(2)).max(k.div_ceil(2));
            for q in [q0, q1] {
                if half > q.capacity() {
                    return Err(Error::PolicyConfig(format!(
                        "dual leaf quadrants of size {half} exceed engine {} \
                         capacity {}",
                        q.engine().id,
                        q.capacity()
                    )));
                }
            }
            trace.push(DispatchEvent::LeafDual {
                m,
                n,
                k,
                engine_ids: [q0.engine().id, q1.engine().id],
            });
            run_dual(c, a, b, accumulate, q0, q1).map(|_| ())
        }
    }
}

/// Below this many multiply-adds a dual leaf issues its two command
/// batches from the calling thread; the host-thread pair only pays off
/// once the per-engine work dwarfs the spawn cost.
const DUAL_SPAWN_FLOPS: u128 = 1 << 22;

/// The four-plus-four command split; returns the simulated makespan
/// (max of the two engines' busy times).
fn run_dual<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
    q0: &MMQueue<T>,
    q1: &MMQueue<T>,
) -> Result<f64, Error> {
    let work = 2 * c.rows() as u128 * c.cols() as u128 * a.cols() as u128;
    let cq = c.split_quadrants();
    let aq = a.split_quadrants();
    let bq = b.split_quadrants();
    let (mut c0, mut c1, mut c2, mut c3) = (cq.q0, cq.q1, cq.q2, cq.q3);

    let mut batch0 = move || -> Result<f64, Error> {
        let mut busy = 0.0;
        busy += q0.enqueue_mm(c0.reborrow(), aq.q0, bq.q0, accumulate).wait()?.total();
        busy += q0.enqueue_mm(c0.reborrow(), aq.q1, bq.q2, true).wait()?.total();
        busy += q0.enqueue_mm(c2.reborrow(), aq.q2, bq.q0, accumulate).wait()?.total();
        busy += q0.enqueue_mm(c2.reborrow(), aq.q3, bq.q2, true).wait()?.total();
        Ok(busy)
    };
    let mut batch1 = move || -> Result<f64, Error> {
        let mut busy = 0.0;
        busy += q1.enqueue_mm(c1.reborrow(), aq.q0, bq.q1, accumulate).wait()?.total();
        busy += q1.enqueue_mm(c1.reborrow(), aq.q1, bq.q3, true).wait()?.total();
        busy += q1.enqueue_mm(c3.reborrow(), aq.q2, bq.q1, accumulate).wait()?.total();
        busy += q1.enqueue_mm(c3.reborrow(), aq.q3, bq.q3, true).wait()?.total();
        Ok(busy)
    };

    let (r0, r1) = if work < DUAL_SPAWN_FLOPS {
        (batch0(), batch1())
    } else {
        std::thread::scope(|s| {
            let h0 = s.spawn(batch0);
            let h1 = s.spawn(batch1);
            (h0.join().expect("engine 0 worker"), h1.join().expect("engine 1 worker"))
        })
    };
    Ok(r0?.max(r1?))
}

fn queue_by_id<T: Scalar>(platform: &Platform<T>, id: u32) -> &MMQueue<T> {
    platform
        .queues()
        .iter()
        .find(|q| q.engine().id == id)
        .expect("engine id came from this platform's registry")
}

/// Shape-level re-derivations of scheduler behavior: traces, command
/// lists and simulated wall times from dimensions alone. These use the
/// same decision function as the executor and are property-tested
/// against it.
pub mod plan {
    use super::*;
    use crate::engine::{sim_execute_time, EngineDescriptor};

    /// The trace [`super::rmul`] would produce for an `m x k * k x n`
    /// problem, without touching data.
    pub fn rmul_trace(
        m: usize,
        n: usize,
        k: usize,
        policy: &DispatchPolicy,
        registry: &EngineRegistry,
    ) -> Result<DispatchTrace, Error> {
        policy.validate()?;
        let mut trace = DispatchTrace::new();
        go(m, n, k, policy, registry, &mut trace, &mut NoWall)?;
        Ok(trace)
    }

    /// The simulated wall seconds of [`super::rmul_with_stats`].
    /// Fails if any leaf lands on the host CPU, whose duration is
    /// measured rather than modeled.
    pub fn rmul_sim_wall(
        m: usize,
        n: usize,
        k: usize,
        policy: &DispatchPolicy,
        registry: &EngineRegistry,
    ) -> Result<f64, Error> {
        policy.validate()?;
        let mut trace = DispatchTrace::new();
        let mut wall = SimWall { registry };
        go(m, n, k, policy, registry, &mut trace, &mut wall)
    }

    /// One predicted queue command.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct PlannedCommand {
        pub accumulate: bool,
        pub m: usize,
        pub n: usize,
        pub k: usize,
        /// Output quadrant position relative to the leaf's C view.
        pub c_row_off: usize,
        pub c_col_off: usize,
    }

    /// The two four-command lists of a dual leaf on an `m x k * k x n`
    /// problem: rank-0 engine first (left output column), rank-1 second.
    pub fn dual_commands(
        m: usize,
        n: usize,
        k: usize,
        accumulate: bool,
    ) -> ([PlannedCommand; 4], [PlannedCommand; 4]) {
        let (mt, mb) = crate::matrix::split_point(m);
        let (nl, nr) = crate::matrix::split_point(n);
        let (kt, kb) = crate::matrix::split_point(k);
        let cmd = |acc, m, n, k, ro, co| PlannedCommand {
            accumulate: acc,
            m,
            n,
            k,
            c_row_off: ro,
            c_col_off: co,
        };
        (
            [
                cmd(accumulate, mt, nl, kt, 0, 0),
                cmd(true, mt, nl, kb, 0, 0),
                cmd(accumulate, mb, nl, kt, mt, 0),
                cmd(true, mb, nl, kb, mt, 0),
            ],
            [
                cmd(accumulate, mt, nr, kt, 0, nl),
                cmd(true, mt, nr, kb, 0, nl),
                cmd(accumulate, mb, nr, kt, mt, nl),
                cmd(true, mb, nr, kb, mt, nl),
            ],
        )
    }

    trait WallModel {
        /// Duration of a leaf, or an error when it cannot be modeled.
        fn leaf(&mut self, choice: LeafChoice, m: usize, n: usize, k: usize)
            -> Result<f64, Error>;
    }

    struct NoWall;
    impl WallModel for NoWall {
        fn leaf(&mut self, _: LeafChoice, _: usize, _: usize, _: usize) -> Result<f64, Error> {
            Ok(0.0)
        }
    }

    struct SimWall<'r> {
        registry: &'r EngineRegistry,
    }

    impl SimWall<'_> {
        fn engine(&self, id: u32) -> &EngineDescriptor {
            self.registry
                .engines()
                .iter()
                .find(|e| e.id == id)
                .expect("engine id from this registry")
        }
    }

    impl WallModel for SimWall<'_> {
        fn leaf(&mut self, choice: LeafChoice, m: usize, n: usize, k: usize)
            -> Result<f64, Error> {
            match choice {
                LeafChoice::Cpu => Err(Error::PolicyConfig(
                    "host leaf durations are measured, not modeled".into(),
                )),
                LeafChoice::Single { engine_id } => {
                    Ok(sim_execute_time(self.engine(engine_id), m, n, k).total())
                }
                LeafChoice::Dual { engine_ids } => {
                    let (list0, list1) = dual_commands(m, n, k, false);
                    let busy = |id: u32, list: &[PlannedCommand; 4]| {
                        let e = self.engine(id);
                        let mut t = 0.0;
                        for c in list {
                            t += sim_execute_time(e, c.m, c.n, c.k).total();
                        }
                        t
                    };
                    let t0 = busy(engine_ids[0], &list0);
                    let t1 = busy(engine_ids[1], &list1);
                    Ok(t0.max(t1))
                }
            }
        }
    }

    /// Same accumulation grouping as the executor (each subtree sums
    /// its own children), so planned and executed simulated walls match
    /// bit for bit.
    fn go(
        m: usize,
        n: usize,
        k: usize,
        policy: &DispatchPolicy,
        registry: &EngineRegistry,
        trace: &mut DispatchTrace,
        wall: &mut impl WallModel,
    ) -> Result<f64, Error> {
        let size = m.max(n).max(k);
        if size < policy.recursion_point {
            let choice = choose_leaf(m, n, k, policy, registry)?;
            trace.push(match choice {
                LeafChoice::Cpu => DispatchEvent::LeafCpu { m, n, k },
                LeafChoice::Single { engine_id } => {
                    DispatchEvent::LeafSingle { m, n, k, engine_id }
                }
                LeafChoice::Dual { engine_ids } => {
                    DispatchEvent::LeafDual { m, n, k, engine_ids }
                }
            });
            return wall.leaf(choice, m, n, k);
        }
        trace.push(DispatchEvent::Recurse { m, n, k });
        let (mt, mb) = crate::matrix::split_point(m);
        let (nl, nr) = crate::matrix::split_point(n);
        let (kt, kb) = crate::matrix::split_point(k);
        // Same order as the executor: four assignments, four accumulations.
        let mut subtotal = 0.0;
        for (sm, sn, sk) in [
            (mt, nl, kt),
            (mt, nr, kt),
            (mb, nl, kt),
            (mb, nr, kt),
            (mt, nl, kb),
            (mt, nr, kb),
            (mb, nl, kb),
            (mb, nr, kb),
        ] {
            subtotal += go(sm, sn, sk, policy, registry, trace, wall)?;
        }
        Ok(subtotal)
    }
}
