//! Event-driven simulation of a multiclass single-server queue fed by
//! batch renewal arrivals.
//!
//! Class `j` packets carry a length `v` with mean `1/mu_j`. The server
//! completes class-`j` work at rate `Lambda_j` per unit of busy time, so a
//! packet of length `v` needs `v * mu_j / Lambda_j` units of class-`j` busy
//! time. Capacity is split by generalized processor sharing with weights
//! `Lambda_j / mu_j` over the nonempty classes; within a class packets are
//! served first-in first-out. Total effort is 1 whenever work is present.

use crate::dist::{BatchLaw, DistError, Family, Law};
use crate::fields::SpherePoint;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    ConfigError(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialQueue {
    Empty,
    /// `round(max(0, N(mean, sd^2)))` packets at time 0.
    TruncatedGaussian {
        mean: f64,
        sd: f64,
    },
}

/// Rate-free description of a class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub inter_family: Family,
    pub batch: BatchLaw,
    pub packet: Law,
    pub initial: InitialQueue,
}

impl ClassSpec {
    pub fn new(inter_family: Family, batch: BatchLaw, packet: Law) -> Self {
        Self {
            inter_family,
            batch,
            packet,
            initial: InitialQueue::Empty,
        }
    }

    pub fn m(&self) -> f64 {
        self.batch.mean()
    }

    pub fn zeta2(&self) -> f64 {
        self.batch.scv()
    }

    pub fn mu(&self) -> f64 {
        1.0 / self.packet.mean()
    }

    pub fn beta2(&self) -> f64 {
        self.packet.scv()
    }
}

/// A class with its rates fixed for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    pub spec: ClassSpec,
    pub lambda: f64,
    pub alpha2: f64,
    pub service_rate: f64,
}

impl ClassParams {
    pub fn new(
        spec: ClassSpec,
        lambda: f64,
        alpha2: f64,
        service_rate: f64,
    ) -> Result<Self, EngineError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(EngineError::ConfigError(format!("arrival rate {lambda}")));
        }
        if !(service_rate.is_finite() && service_rate > 0.0) {
            return Err(EngineError::ConfigError(format!(
                "service rate {service_rate}"
            )));
        }
        if lambda > 0.0 {
            Law::new(spec.inter_family, 1.0 / lambda, alpha2)?;
        }
        Ok(Self {
            spec,
            lambda,
            alpha2,
            service_rate,
        })
    }

    /// `None` when the arrival rate is zero.
    pub fn inter_arrival(&self) -> Option<Law> {
        (self.lambda > 0.0).then(|| {
            Law::new(self.spec.inter_family, 1.0 / self.lambda, self.alpha2).expect("validated")
        })
    }

    /// Busy time needed by a packet of length `v`.
    fn requirement(&self, v: f64) -> f64 {
        v * self.spec.mu() / self.service_rate
    }

    /// Nominal GPS weight `Lambda_j / mu_j`.
    pub fn weight(&self) -> f64 {
        self.service_rate / self.spec.mu()
    }
}

/// Isotropic geodesic walk used to decorate batches with sphere marks.
#[derive(Debug, Clone)]
pub struct MarkWalker {
    pub point: SpherePoint,
    pub step: f64,
}

impl MarkWalker {
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> SpherePoint {
        self.point = crate::fields::geodesic_walk_step(&self.point, self.step, rng);
        self.point.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalEvent {
    pub t: f64,
    pub class: usize,
    pub batch: u64,
    pub mark: Option<SpherePoint>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrivalPath {
    pub events: Vec<ArrivalEvent>,
}

impl ArrivalPath {
    /// Total batch size of class `j` over `(0, t]`.
    pub fn count(&self, class: usize, t: f64) -> u64 {
        let end = self.events.partition_point(|e| e.t <= t);
        self.events[..end]
            .iter()
            .filter(|e| e.class == class)
            .map(|e| e.batch)
            .sum()
    }

    /// Number of batches of class `j` over `(0, t]`.
    pub fn renewals(&self, class: usize, t: f64) -> usize {
        let end = self.events.partition_point(|e| e.t <= t);
        self.events[..end]
            .iter()
            .filter(|e| e.class == class)
            .count()
    }

    fn merge(paths: Vec<ArrivalPath>) -> ArrivalPath {
        let mut events: Vec<ArrivalEvent> = paths.into_iter().flat_map(|p| p.events).collect();
        events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.class.cmp(&b.class)));
        ArrivalPath { events }
    }
}

/// Batch renewal arrivals of one class on `(0, horizon]`.
pub fn sample_dsrrrf<R: Rng + ?Sized>(
    params: &ClassParams,
    class: usize,
    horizon: f64,
    rng: &mut R,
    mut marks: Option<&mut MarkWalker>,
) -> Result<ArrivalPath, EngineError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(EngineError::ConfigError(format!("horizon {horizon}")));
    }
    let mut events = Vec::new();
    let Some(law) = params.inter_arrival() else {
        return Ok(ArrivalPath { events });
    };
    let mut t = 0.0;
    loop {
        t += law.sample(rng);
        if t > horizon {
            break;
        }
        let batch = params.spec.batch.sample(rng);
        let mark = marks.as_deref_mut().map(|w| w.next(rng));
        events.push(ArrivalEvent {
            t,
            class,
            batch,
            mark,
        });
    }
    Ok(ArrivalPath { events })
}

/// `S(h) = sup{m : u_1 + ... + u_m <= h}` over busy-time requirements.
pub fn sample_service_counts<R: Rng + ?Sized>(
    params: &ClassParams,
    h: f64,
    rng: &mut R,
) -> Result<u64, EngineError> {
    if !(h.is_finite() && h >= 0.0) {
        return Err(EngineError::ConfigError(format!("busy time {h}")));
    }
    let mut used = 0.0;
    let mut count = 0;
    loop {
        used += params.requirement(params.spec.packet.sample(rng));
        if used > h {
            return Ok(count);
        }
        count += 1;
    }
}

/// Grid samples of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuePath {
    pub times: Vec<f64>,
    pub mu: Vec<f64>,
    pub q0: Vec<u64>,
    pub q: Vec<Vec<u64>>,
    pub a: Vec<Vec<u64>>,
    pub d: Vec<Vec<u64>>,
    pub b: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    /// `t - sum_j B_j(t)`.
    pub idle: Vec<f64>,
    /// Busy-time requirements drawn per class, in service order.
    pub requirements: Vec<Vec<f64>>,
    pub arrivals: ArrivalPath,
}

impl QueuePath {
    pub fn classes(&self) -> usize {
        self.mu.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is nonempty")
    }

    pub fn grid_step(&self) -> f64 {
        self.times.get(1).map_or(0.0, |t| t - self.times[0])
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub marks: Option<MarkWalker>,
    pub keep_arrivals: bool,
}

struct ClassState<'a> {
    params: &'a ClassParams,
    queue: u64,
    /// Remaining requirement of the packet in service.
    rem: f64,
    head: f64,
    serving: bool,
    done: f64,
    reqs: Vec<f64>,
    departed: u64,
}

impl ClassState<'_> {
    fn start_next<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.queue > 0 && !self.serving {
            let u = self.params.requirement(self.params.spec.packet.sample(rng));
            self.reqs.push(u);
            self.head = u;
            self.rem = u;
            self.serving = true;
        }
    }

    fn busy(&self) -> f64 {
        if self.queue > 0 {
            self.done + (self.head - self.rem)
        } else {
            self.done
        }
    }
}

pub fn simulate_queues<R: Rng + ?Sized>(
    classes: &[ClassParams],
    horizon: f64,
    grid: f64,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<QueuePath, EngineError> {
    let mut walker = opts.marks.clone();
    let mut per_class = Vec::with_capacity(classes.len());
    for (j, p) in classes.iter().enumerate() {
        per_class.push(sample_dsrrrf(p, j, horizon, rng, walker.as_mut())?);
    }
    simulate_with_arrivals(
        classes,
        ArrivalPath::merge(per_class),
        horizon,
        grid,
        rng,
        opts,
    )
}

/// Runs the queue on a given time-ordered arrival stream.
pub fn simulate_with_arrivals<R: Rng + ?Sized>(
    classes: &[ClassParams],
    arrivals: ArrivalPath,
    horizon: f64,
    grid: f64,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<QueuePath, EngineError> {
    if classes.is_empty() {
        return Err(EngineError::ConfigError("no classes".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(EngineError::ConfigError(format!("horizon {horizon}")));
    }
    if !(grid.is_finite() && grid > 0.0 && grid <= horizon) {
        return Err(EngineError::ConfigError(format!("grid {grid}")));
    }
    let j_count = classes.len();
    if let Some(e) = arrivals.events.iter().find(|e| e.class >= j_count) {
        return Err(EngineError::ConfigError(format!(
            "arrival for unknown class {}",
            e.class
        )));
    }
    if arrivals.events.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(EngineError::ConfigError(
            "arrivals are not time ordered".into(),
        ));
    }
    let steps = (horizon / grid).round() as usize;

    let mut st: Vec<ClassState> = Vec::with_capacity(j_count);
    let mut q0 = Vec::with_capacity(j_count);
    for p in classes {
        let n0 = match p.spec.initial {
            InitialQueue::Empty => 0,
            InitialQueue::TruncatedGaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                (mean + sd * z).max(0.0).round() as u64
            }
        };
        q0.push(n0);
        st.push(ClassState {
            params: p,
            queue: n0,
            rem: 0.0,
            head: 0.0,
            serving: false,
            done: 0.0,
            reqs: Vec::new(),
            departed: 0,
        });
    }

    let mut out = QueuePath {
        times: Vec::with_capacity(steps + 1),
        mu: classes.iter().map(|c| c.spec.mu()).collect(),
        q0: q0.clone(),
        q: vec![Vec::with_capacity(steps + 1); j_count],
        a: vec![Vec::with_capacity(steps + 1); j_count],
        d: vec![Vec::with_capacity(steps + 1); j_count],
        b: vec![Vec::with_capacity(steps + 1); j_count],
        v: Vec::with_capacity(steps + 1),
        idle: Vec::with_capacity(steps + 1),
        requirements: Vec::new(),
        arrivals: ArrivalPath::default(),
    };
    let mut a_count = vec![0u64; j_count];
    for s in st.iter_mut() {
        s.start_next(rng);
    }

    let mut t = 0.0;
    let mut next_arrival = 0usize;
    let mut effort = vec![0.0; j_count];
    for i in 0..=steps {
        let t_grid = if i == steps { horizon } else { i as f64 * grid };
        loop {
            let total: f64 = st
                .iter()
                .filter(|s| s.queue > 0)
                .map(|s| s.params.weight())
                .sum();
            let mut t_done = f64::INFINITY;
            let mut who = usize::MAX;
            for (j, s) in st.iter().enumerate() {
                effort[j] = if s.queue > 0 {
                    s.params.weight() / total
                } else {
                    0.0
                };
                if s.queue > 0 {
                    let tj = t + s.rem / effort[j];
                    if tj < t_done {
                        t_done = tj;
                        who = j;
                    }
                }
            }
            let t_arr = arrivals
                .events
                .get(next_arrival)
                .map_or(f64::INFINITY, |e| e.t);
            let t_next = t_done.min(t_arr);
            if t_next > t_grid {
                advance(&mut st, &effort, t_grid - t);
                t = t_grid;
                break;
            }
            advance(&mut st, &effort, t_next - t);
            t = t_next;
            if t_done <= t_arr {
                let s = &mut st[who];
                s.done += s.head;
                s.rem = 0.0;
                s.serving = false;
                s.queue -= 1;
                s.departed += 1;
                s.start_next(rng);
            } else {
                let e = &arrivals.events[next_arrival];
                next_arrival += 1;
                a_count[e.class] += e.batch;
                st[e.class].queue += e.batch;
                st[e.class].start_next(rng);
            }
        }
        out.times.push(t_grid);
        let mut v = 0.0;
        let mut busy = 0.0;
        for (j, s) in st.iter().enumerate() {
            out.q[j].push(s.queue);
            out.a[j].push(a_count[j]);
            out.d[j].push(s.departed);
            let bj = s.busy();
            out.b[j].push(bj);
            busy += bj;
            v += s.queue as f64 / out.mu[j];
        }
        out.v.push(v);
        out.idle.push(t_grid - busy);
    }
    out.requirements = st.into_iter().map(|s| s.reqs).collect();
    if opts.keep_arrivals {
        out.arrivals = arrivals;
    }
    Ok(out)
}

fn advance(st: &mut [ClassState], effort: &[f64], dt: f64) {
    if dt <= 0.0 {
        return;
    }
    for (s, &f) in st.iter_mut().zip(effort) {
        if s.queue > 0 {
            s.rem = (s.rem - f * dt).max(0.0);
        }
    }
}

/// Aggregate and per-class workload on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub v: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

/// `W_j = Q_j / mu_j`, `V = sum_j W_j`.
pub fn workload(path: &QueuePath, classes: &[ClassParams]) -> Workload {
    let w: Vec<Vec<f64>> = path
        .q
        .iter()
        .zip(classes)
        .map(|(q, c)| q.iter().map(|&x| x as f64 / c.spec.mu()).collect())
        .collect();
    let v = (0..path.times.len())
        .map(|i| w.iter().map(|wj| wj[i]).sum())
        .collect();
    Workload { v, w }
}

/// `Xi = (sum_j mu_j / Lambda_j)^{-1}`.
pub fn xi(service_rates: &[f64], mu: &[f64]) -> f64 {
    1.0 / service_rates
        .iter()
        .zip(mu)
        .map(|(l, m)| m / l)
        .sum::<f64>()
}

/// Scaled idleness `Xi * (t - sum_j B_j(t)) / sqrt(r)` on the path grid.
pub fn idle_process(path: &QueuePath, service_rates: &[f64], mu: &[f64], r: f64) -> Vec<f64> {
    let c = xi(service_rates, mu) / r.sqrt();
    path.idle.iter().map(|&x| c * x.max(0.0)).collect()
}
