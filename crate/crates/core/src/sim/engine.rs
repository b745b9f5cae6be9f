use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::dynamics::VehicleDynamics;
use super::flow::{FlowSpec, RouteSpec};
use super::grid::{GridSpec, Network, Side, Turn, LANES_PER_LINK};
use super::metrics::{Accumulator, MetricsReport, OBS_LEN, WAITING_SPEED};
use super::phase::SignalPhase;
use crate::error::{dim, Error, Result};
use crate::rng::SeedTree;

/// Speeds below this are snapped to a full stop.
const STOP_SNAP: f64 = 0.01;
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimParams {
    /// Step length (s).
    pub dt: f64,
    /// All-red clearance inserted on every phase change (s).
    pub yellow: f64,
    pub vehicle_length: f64,
    /// Standstill spacing between consecutive vehicles (m).
    pub min_gap: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1.0,
            yellow: 3.0,
            vehicle_length: 5.0,
            min_gap: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    /// Index into the simulation's resolved routes.
    pub route: usize,
    /// Position in the route's link sequence.
    pub leg: usize,
    /// Distance from the start of the current link (m), front bumper.
    pub position: f64,
    pub speed: f64,
    pub stopped_since: Option<f64>,
    pub entry_time: f64,
    pub exit_time: Option<f64>,
}

/// Read-only snapshot of a vehicle and where it sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleView {
    pub id: u64,
    pub link: usize,
    pub lane: Turn,
    pub position: f64,
    pub speed: f64,
}

/// One row of the optional per-step trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub intersection: usize,
    pub phase: usize,
    pub queue: u32,
    pub pressure: f64,
}

#[derive(Debug, Clone)]
struct Route {
    links: Vec<usize>,
    turns: Vec<Turn>,
}

impl Route {
    /// Lane turn used on leg `leg`: the movement at that link's downstream
    /// intersection; exit links use the through lane.
    fn lane_turn(&self, leg: usize) -> Turn {
        self.turns.get(leg).copied().unwrap_or(Turn::Through)
    }
}

#[derive(Debug, Clone, Default)]
struct Lane {
    /// Front (closest to the stop line) first.
    vehicles: VecDeque<Vehicle>,
    permitted_since: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Signal {
    active: SignalPhase,
    target: SignalPhase,
    yellow_left: f64,
}

#[derive(Debug, Clone, Copy)]
struct Arrival {
    time: f64,
    route: usize,
}

/// Simulation state plus the immutable scenario it runs.
#[derive(Debug, Clone)]
pub struct Simulation {
    net: Network,
    params: SimParams,
    dynamics: VehicleDynamics,
    routes: Vec<Route>,
    arrivals: Vec<Arrival>,
    next_arrival: usize,
    pending: Vec<VecDeque<usize>>,
    lanes: Vec<Lane>,
    signals: Vec<Signal>,
    steps: u64,
    next_id: u64,
    entered: u64,
    exited: u64,
    travel_done: f64,
    acc: Accumulator,
    trace: Option<Vec<TraceRow>>,
}

impl Simulation {
    pub fn new(
        grid: GridSpec,
        flow: &FlowSpec,
        dynamics: VehicleDynamics,
        params: SimParams,
    ) -> Result<Self> {
        dynamics.validate()?;
        if !(params.dt > 0.0 && params.dt.is_finite()) || params.yellow < 0.0 {
            return Err(Error::Config(format!(
                "invalid simulation parameters {params:?}"
            )));
        }
        let net = Network::build(grid)?;
        flow.validate(&net)?;
        let lanes = vec![Lane::default(); net.lane_count()];
        let signals = vec![
            Signal {
                active: SignalPhase::default(),
                target: SignalPhase::default(),
                yellow_left: 0.0,
            };
            net.intersections.len()
        ];
        let mut sim = Self {
            pending: vec![VecDeque::new(); net.lane_count()],
            net,
            params,
            dynamics,
            routes: Vec::new(),
            arrivals: Vec::new(),
            next_arrival: 0,
            lanes,
            signals,
            steps: 0,
            next_id: 0,
            entered: 0,
            exited: 0,
            travel_done: 0.0,
            acc: Accumulator::default(),
            trace: None,
        };
        let seeds = SeedTree::new(flow.seed).branch("arrivals");
        for (e, entry) in flow.entries.iter().enumerate() {
            let route = sim.add_route(&entry.route)?;
            let mut rng = seeds.index(e as u64).rng();
            for k in 0..entry.count {
                let mut time = entry.start + k as f64 * entry.headway;
                if flow.jitter > 0.0 {
                    time += rng.gen_range(-flow.jitter..flow.jitter) * entry.headway;
                }
                sim.arrivals.push(Arrival {
                    time: time.max(0.0),
                    route,
                });
            }
        }
        // stable sort keeps entry order for simultaneous arrivals
        sim.arrivals.sort_by(|a, b| {
            a.time
                .partial_cmp(&b.time)
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        Ok(sim)
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn dynamics(&self) -> &VehicleDynamics {
        &self.dynamics
    }

    pub fn clock(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }

    pub fn entered(&self) -> u64 {
        self.entered
    }

    pub fn exited(&self) -> u64 {
        self.exited
    }

    pub fn in_network(&self) -> u64 {
        self.lanes.iter().map(|l| l.vehicles.len() as u64).sum()
    }

    /// Vehicles scheduled but still waiting for entry space.
    pub fn waiting_to_enter(&self) -> usize {
        self.pending.iter().map(VecDeque::len).sum()
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<TraceRow> {
        self.trace.as_mut().map(core::mem::take).unwrap_or_default()
    }

    /// Registers an extra route (for scripted scenarios) and returns its index.
    pub fn add_route(&mut self, spec: &RouteSpec) -> Result<usize> {
        let links = spec.resolve(&self.net)?;
        self.routes.push(Route {
            links,
            turns: spec.turns.clone(),
        });
        Ok(self.routes.len() - 1)
    }

    /// Places a vehicle directly on leg `leg` of `route`. Counts as entered
    /// at the current clock.
    pub fn place_vehicle(
        &mut self,
        route: usize,
        leg: usize,
        position: f64,
        speed: f64,
    ) -> Result<u64> {
        let r = self
            .routes
            .get(route)
            .ok_or_else(|| Error::Config(format!("unknown route {route}")))?;
        if leg >= r.links.len() {
            return Err(Error::Config(format!("route {route} has no leg {leg}")));
        }
        let ll = self.net.spec.link_length;
        if !(0.0..=ll).contains(&position) || !(0.0..=self.net.spec.speed_limit).contains(&speed) {
            return Err(Error::Config(
                "vehicle position or speed out of range".into(),
            ));
        }
        let lane = Network::lane(r.links[leg], r.lane_turn(leg));
        let vehicle = Vehicle {
            id: self.next_id,
            route,
            leg,
            position,
            speed,
            stopped_since: (speed < WAITING_SPEED).then(|| self.clock()),
            entry_time: self.clock(),
            exit_time: None,
        };
        self.next_id += 1;
        self.entered += 1;
        let vehicles = &mut self.lanes[lane].vehicles;
        let at = vehicles
            .iter()
            .position(|v| v.position < position)
            .unwrap_or(vehicles.len());
        vehicles.insert(at, vehicle);
        Ok(self.next_id - 1)
    }

    pub fn vehicles(&self) -> impl Iterator<Item = VehicleView> + '_ {
        self.lanes.iter().enumerate().flat_map(|(lane, l)| {
            l.vehicles.iter().map(move |v| VehicleView {
                id: v.id,
                link: lane / LANES_PER_LINK,
                lane: Turn::ALL[lane % LANES_PER_LINK],
                position: v.position,
                speed: v.speed,
            })
        })
    }

    /// Phase currently in force (the outgoing phase during a yellow).
    pub fn phase(&self, intersection: usize) -> SignalPhase {
        self.signals[intersection].active
    }

    pub fn in_yellow(&self, intersection: usize) -> bool {
        self.signals[intersection].yellow_left > 0.0
    }

    /// Requests a phase; a change starts the yellow interval.
    pub fn request_phase(&mut self, intersection: usize, phase: SignalPhase) {
        let yellow = self.params.yellow;
        let s = &mut self.signals[intersection];
        if phase == s.target {
            return;
        }
        s.target = phase;
        if s.yellow_left <= 0.0 {
            if yellow > 0.0 {
                s.yellow_left = yellow;
            } else {
                s.active = phase;
            }
        }
    }

    /// Requests one phase per intersection then advances one step.
    pub fn step_with(&mut self, phases: &[SignalPhase]) -> Result<()> {
        dim("phases per intersection", self.signals.len(), phases.len())?;
        for (i, &p) in phases.iter().enumerate() {
            self.request_phase(i, p);
        }
        self.step();
        Ok(())
    }

    /// Inserts due arrivals at the boundary where there is room.
    pub fn spawn(&mut self) {
        let now = self.clock();
        while self.next_arrival < self.arrivals.len()
            && self.arrivals[self.next_arrival].time <= now + EPS
        {
            let a = self.arrivals[self.next_arrival];
            let r = &self.routes[a.route];
            self.pending[Network::lane(r.links[0], r.lane_turn(0))].push_back(a.route);
            self.next_arrival += 1;
        }
        let spacing = self.params.vehicle_length + self.params.min_gap;
        for lane in 0..self.pending.len() {
            let Some(&route) = self.pending[lane].front() else {
                continue;
            };
            let speed = match self.lanes[lane].vehicles.back() {
                None => self.net.spec.speed_limit,
                Some(tail) => {
                    let gap = tail.position - spacing;
                    if gap < 0.0 {
                        continue;
                    }
                    let gap_eff =
                        gap + tail.speed * tail.speed / (2.0 * self.dynamics.emergency_decel);
                    safe_speed(gap_eff, self.dynamics.decel, self.params.dt)
                        .min(self.net.spec.speed_limit)
                }
            };
            self.pending[lane].pop_front();
            self.lanes[lane].vehicles.push_back(Vehicle {
                id: self.next_id,
                route,
                leg: 0,
                position: 0.0,
                speed,
                stopped_since: (speed < WAITING_SPEED).then_some(now),
                entry_time: now,
                exit_time: None,
            });
            self.next_id += 1;
            self.entered += 1;
        }
    }

    /// Spawns, moves every vehicle by one `dt`, then records metrics.
    pub fn step(&mut self) {
        self.spawn();
        let now = self.clock();
        let dt = self.params.dt;
        let n_nodes = self.net.intersections.len();

        // Permission per incoming lane for this step.
        let mut permitted = vec![false; self.lanes.len()];
        for i in 0..n_nodes {
            let s = self.signals[i];
            for side in Side::ALL {
                let link = self.net.intersections[i].incoming[side as usize];
                for turn in Turn::ALL {
                    let lane = Network::lane(link, turn);
                    permitted[lane] = s.yellow_left <= 0.0 && s.active.permits(side, turn);
                }
            }
        }
        for (lane, l) in self.lanes.iter_mut().enumerate() {
            if permitted[lane] {
                l.permitted_since.get_or_insert(now);
            } else {
                l.permitted_since = None;
            }
        }

        let tails: Vec<Option<(f64, f64)>> = self
            .lanes
            .iter()
            .map(|l| l.vehicles.back().map(|v| (v.position, v.speed)))
            .collect();

        let ll = self.net.spec.link_length;
        let limit = self.net.spec.speed_limit;
        let spacing = self.params.vehicle_length + self.params.min_gap;
        let dynamics = self.dynamics;
        let mut crossing = vec![false; self.lanes.len()];

        for lane in 0..self.lanes.len() {
            let link = lane / LANES_PER_LINK;
            let is_exit = self.net.links[link].to.is_none();
            let mut leader: Option<(f64, f64)> = None;
            let count = self.lanes[lane].vehicles.len();
            for k in 0..count {
                let v = &self.lanes[lane].vehicles[k];
                let (pos, speed) = (v.position, v.speed);

                // Obstacle ahead: (distance to where the front must stop, obstacle speed, hard stop line?)
                let mut stop_line = false;
                let obstacle: Option<(f64, f64)> = match leader {
                    Some((lp, ls)) => Some((lp - spacing - pos, ls)),
                    None if is_exit => None,
                    None => {
                        if permitted[lane] {
                            crossing[lane] = true;
                            let r = &self.routes[v.route];
                            let next_lane =
                                Network::lane(r.links[v.leg + 1], r.lane_turn(v.leg + 1));
                            tails[next_lane].map(|(tp, ts)| (ll - pos + tp - spacing, ts))
                        } else {
                            stop_line = true;
                            Some((ll - pos, 0.0))
                        }
                    }
                };

                let held = k == 0
                    && !is_exit
                    && speed == 0.0
                    && permitted[lane]
                    && self.lanes[lane]
                        .permitted_since
                        .is_some_and(|since| now < since + dynamics.startup_delay - EPS);

                let mut new_speed = if held {
                    0.0
                } else {
                    let mut v_new = (speed + dynamics.accel * dt).min(limit);
                    if let Some((gap, obs_speed)) = obstacle {
                        let gap_eff =
                            gap + obs_speed * obs_speed / (2.0 * dynamics.emergency_decel);
                        v_new = v_new.min(safe_speed(gap_eff, dynamics.decel, dt));
                    }
                    v_new.max(speed - dynamics.emergency_decel * dt).max(0.0)
                };
                if new_speed < STOP_SNAP {
                    new_speed = 0.0;
                }
                let mut new_pos = pos + new_speed * dt;
                // Hard constraints: never overlap the leader or pass a red stop line.
                let bound = match leader {
                    Some((lp, _)) => Some(lp - spacing),
                    None if stop_line => Some(ll),
                    None => None,
                };
                if let Some(b) = bound {
                    if new_pos > b {
                        new_pos = b.max(pos);
                        new_speed = match leader {
                            Some((_, ls)) => new_speed.min(ls),
                            None => 0.0,
                        };
                    }
                }

                let v = &mut self.lanes[lane].vehicles[k];
                v.position = new_pos;
                v.speed = new_speed;
                if new_speed < WAITING_SPEED {
                    v.stopped_since.get_or_insert(now);
                } else {
                    v.stopped_since = None;
                }
                leader = Some((new_pos, new_speed));
            }
        }

        // Transfers across link ends.
        let exit_time = now + dt;
        for lane in 0..self.lanes.len() {
            let link = lane / LANES_PER_LINK;
            let is_exit = self.net.links[link].to.is_none();
            while let Some(front) = self.lanes[lane].vehicles.front() {
                if front.position < ll || !(is_exit || crossing[lane]) {
                    break;
                }
                let mut v = self.lanes[lane]
                    .vehicles
                    .pop_front()
                    .unwrap_or_else(|| unreachable!());
                if is_exit {
                    v.exit_time = Some(exit_time);
                    self.exited += 1;
                    self.travel_done += exit_time - v.entry_time;
                    continue;
                }
                let r = &self.routes[v.route];
                let next_leg = v.leg + 1;
                let next_lane = Network::lane(r.links[next_leg], r.lane_turn(next_leg));
                let room = match self.lanes[next_lane].vehicles.back() {
                    Some(t) => t.position - spacing,
                    None => f64::INFINITY,
                };
                let overflow = v.position - ll;
                if room < 0.0 {
                    v.position = ll;
                    v.speed = 0.0;
                    v.stopped_since.get_or_insert(now);
                    self.lanes[lane].vehicles.push_front(v);
                    break;
                }
                v.position = overflow.min(room);
                if let Some(t) = self.lanes[next_lane].vehicles.back() {
                    if v.position == room {
                        v.speed = v.speed.min(t.speed);
                    }
                }
                v.leg = next_leg;
                self.lanes[next_lane].vehicles.push_back(v);
            }
        }

        self.steps += 1;
        self.record_step();
    }

    fn record_step(&mut self) {
        let n = self.net.intersections.len();
        let limit = self.net.spec.speed_limit;
        let mut queue_total = 0.0;
        let mut reward = 0.0;
        for i in 0..n {
            let mut waiting = 0u32;
            for &link in &self.net.intersections[i].incoming {
                for turn in Turn::ALL {
                    let lane = &self.lanes[Network::lane(link, turn)];
                    if lane.vehicles.is_empty() {
                        continue;
                    }
                    let mut speed_sum = 0.0;
                    for v in &lane.vehicles {
                        speed_sum += v.speed;
                        if v.speed < WAITING_SPEED {
                            waiting += 1;
                        }
                    }
                    let mean = speed_sum / lane.vehicles.len() as f64;
                    self.acc.delay_sum += 1.0 - mean / limit;
                    self.acc.delay_samples += 1;
                }
            }
            let p = self.pressure(i);
            queue_total += waiting as f64;
            reward -= p;
            if let Some(trace) = self.trace.as_mut() {
                trace.push(TraceRow {
                    t: self.steps as f64 * self.params.dt,
                    intersection: i,
                    phase: self.signals[i].active.index(),
                    queue: waiting,
                    pressure: p,
                });
            }
        }
        self.acc.queue_sum += queue_total / n as f64;
        self.acc.reward_sum += reward;
        self.acc.steps += 1;

        for s in &mut self.signals {
            if s.yellow_left > 0.0 {
                s.yellow_left -= self.params.dt;
                if s.yellow_left <= EPS {
                    s.yellow_left = 0.0;
                    s.active = s.target;
                }
            }
        }
    }

    /// 12 incoming then 12 outgoing lane counts, each block ordered
    /// (N, E, S, W) × (left, through, right).
    pub fn lane_counts(&self, intersection: usize) -> [u32; OBS_LEN] {
        let node = &self.net.intersections[intersection];
        let mut out = [0u32; OBS_LEN];
        for side in Side::ALL {
            for turn in Turn::ALL {
                let k = side as usize * 3 + turn as usize;
                out[k] = self.lanes[Network::lane(node.incoming[side as usize], turn)]
                    .vehicles
                    .len() as u32;
                out[12 + k] = self.lanes[Network::lane(node.outgoing[side as usize], turn)]
                    .vehicles
                    .len() as u32;
            }
        }
        out
    }

    pub fn observe(&self, intersection: usize) -> Vec<f64> {
        self.lane_counts(intersection)
            .iter()
            .map(|&c| c as f64)
            .collect()
    }

    /// |incoming total - outgoing total|.
    pub fn pressure(&self, intersection: usize) -> f64 {
        let counts = self.lane_counts(intersection);
        let incoming: i64 = counts[..12].iter().map(|&c| c as i64).sum();
        let outgoing: i64 = counts[12..].iter().map(|&c| c as i64).sum();
        (incoming - outgoing).unsigned_abs() as f64
    }

    pub fn reward(&self, intersection: usize) -> f64 {
        -self.pressure(intersection)
    }

    /// Episode metrics at the current clock. Vehicles still in the network
    /// contribute `clock - entry_time` to the travel time.
    pub fn metrics(&self) -> MetricsReport {
        let now = self.clock();
        let mut travel = self.travel_done;
        for lane in &self.lanes {
            for v in &lane.vehicles {
                travel += now - v.entry_time;
            }
        }
        let steps = self.acc.steps.max(1) as f64;
        MetricsReport {
            att: if self.entered == 0 {
                0.0
            } else {
                travel / self.entered as f64
            },
            queue: self.acc.queue_sum / steps,
            delay: if self.acc.delay_samples == 0 {
                0.0
            } else {
                self.acc.delay_sum / self.acc.delay_samples as f64
            },
            throughput: self.exited,
            reward: self.acc.reward_sum / steps,
        }
    }
}

/// Largest speed `v` with `v * dt + v² / (2 * decel) <= gap`: moving at `v`
/// for one step still leaves room to stop with comfortable braking.
fn safe_speed(gap: f64, decel: f64, dt: f64) -> f64 {
    if gap <= 0.0 {
        return 0.0;
    }
    let bd = decel * dt;
    -bd + libm::sqrt(bd * bd + 2.0 * decel * gap)
}
