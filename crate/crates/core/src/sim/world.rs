//! World state and the per-tick update loop.
//!
//! A run is strictly sequential and fully determined by the scenario
//! config (seed included). Each tick executes fixed phases in order:
//!
//! 1. incident generation (per patient, in actor-id order: one draw for a
//!    true condition, one for a false alarm; a new true condition draws its
//!    glucose excursion),
//! 2. detection (one draw per new true condition),
//! 3. patrol, community mode only (per idle verifier in actor-id order:
//!    two displacement draws, then one discovery draw if an undetected
//!    true condition lies within the discovery radius),
//! 4. dispatch (queue scan, no draws),
//! 5. movement and arrivals (no draws),
//! 6. expiry (no draws),
//! 7. metrics accumulation.
//!
//! Every random number comes from one splitmix64 generator in exactly this
//! order, which is what makes runs reproducible bit-for-bit.

use super::config::{ConfigError, Mode, ScenarioConfig};
use super::metrics::MetricsReport;
use super::rng::SimRng;
use crate::cep::risk::{decide_action, risk_score, CareAction, RiskThresholds};
use crate::events::VitalKind;
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Patient,
    Professional,
    Verifier,
    Hospital,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activity {
    Idle,
    Travelling {
        incident: usize,
        target_x: f64,
        target_y: f64,
        /// Movement starts the tick after assignment.
        assigned_tick: u64,
    },
}

#[derive(Debug, Clone)]
pub struct Actor {
    pub id: usize,
    pub role: Role,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub activity: Activity,
}

impl Actor {
    pub fn is_idle(&self) -> bool {
        matches!(self.activity, Activity::Idle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IncidentTruth {
    /// A real condition; carries the glucose excursion the sensors and
    /// verifiers observe.
    TrueCondition { glucose: f64 },
    FalseAlarm,
}

impl IncidentTruth {
    pub fn is_true_condition(&self) -> bool {
        matches!(self, IncidentTruth::TrueCondition { .. })
    }
}

/// Lifecycle: `Undetected -> Alarmed -> (Verified ->) Treated | Dismissed`,
/// with `Expired` reachable from any non-terminal state of a true
/// condition. Ticks are non-decreasing along the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncidentState {
    Undetected,
    Alarmed(u64),
    Verified(u64),
    Treated(u64),
    Dismissed(u64),
    Expired(u64),
}

impl IncidentState {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            IncidentState::Treated(_) | IncidentState::Dismissed(_) | IncidentState::Expired(_)
        )
    }
}

#[derive(Debug, Clone)]
pub struct Incident {
    pub id: usize,
    /// Actor id of the affected patient.
    pub patient: usize,
    pub start_tick: u64,
    pub truth: IncidentTruth,
    pub state: IncidentState,
    pub alarm_tick: Option<u64>,
    /// Set after a verifier escalates; routes the incident to the
    /// professional queue stage.
    pub needs_professional: bool,
    pub responder: Option<usize>,
    /// Accrued intervention cost.
    pub cost: f64,
    /// Tick the patient reaches the hospital, when hospitalized.
    pub hospital_eta: Option<u64>,
}

/// Observable events emitted by [`World::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimEvent {
    TrueConditionStarted { incident: usize, patient: usize },
    FalseAlarmRaised { incident: usize, patient: usize },
    SensorAlarm { incident: usize },
    PatrolDiscovery { incident: usize, verifier: usize },
    Assigned { incident: usize, responder: usize },
    VerifiedTrue { incident: usize, verifier: usize, action: CareAction },
    Dismissed { incident: usize, responder: usize },
    Treated { incident: usize, responder: Option<usize> },
    HospitalTransferStarted { incident: usize, eta: u64 },
    Expired { incident: usize },
}

fn distance(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

#[derive(Debug, Clone)]
pub struct World {
    cfg: ScenarioConfig,
    thresholds: RiskThresholds,
    rng: SimRng,
    tick: u64,
    actors: Vec<Actor>,
    incidents: Vec<Incident>,
    /// Incident ids not yet terminal.
    active: Vec<usize>,
    /// Alarmed or escalated incidents awaiting a responder, FIFO.
    queue: VecDeque<usize>,
    busy_professional_ticks: u64,
    busy_verifier_ticks: u64,
}

impl World {
    /// Places patients, professionals, and verifiers uniformly at random
    /// (in that order, x before y for each actor) and the hospital at the
    /// plane center.
    pub fn new(cfg: ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let thresholds = cfg.risk_thresholds()?;
        let mut rng = SimRng::new(cfg.seed);
        let mut actors = Vec::with_capacity(cfg.n_patients + cfg.n_professionals + cfg.n_verifiers + 1);
        let place = |actors: &mut Vec<Actor>, rng: &mut SimRng, role: Role, speed: f64| {
            let id = actors.len();
            let x = rng.next_range(0.0, cfg.width);
            let y = rng.next_range(0.0, cfg.height);
            actors.push(Actor {
                id,
                role,
                x,
                y,
                speed,
                activity: Activity::Idle,
            });
        };
        for _ in 0..cfg.n_patients {
            place(&mut actors, &mut rng, Role::Patient, cfg.patient_speed);
        }
        for _ in 0..cfg.n_professionals {
            place(&mut actors, &mut rng, Role::Professional, cfg.professional_speed);
        }
        for _ in 0..cfg.n_verifiers {
            place(&mut actors, &mut rng, Role::Verifier, cfg.verifier_speed);
        }
        actors.push(Actor {
            id: actors.len(),
            role: Role::Hospital,
            x: cfg.width / 2.0,
            y: cfg.height / 2.0,
            speed: 0.0,
            activity: Activity::Idle,
        });

        Ok(World {
            cfg,
            thresholds,
            rng,
            tick: 0,
            actors,
            incidents: Vec::new(),
            active: Vec::new(),
            queue: VecDeque::new(),
            busy_professional_ticks: 0,
            busy_verifier_ticks: 0,
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn actors(&self) -> &[Actor] {
        &self.actors
    }

    pub fn incidents(&self) -> &[Incident] {
        &self.incidents
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Repositions an actor. Scenario-construction hook: deterministic
    /// layouts beat seed hunting when exercising dispatch behavior.
    pub fn place_actor(&mut self, id: usize, x: f64, y: f64) {
        self.actors[id].x = x;
        self.actors[id].y = y;
    }

    fn patient_ids(&self) -> std::ops::Range<usize> {
        0..self.cfg.n_patients
    }

    fn verifier_ids(&self) -> std::ops::Range<usize> {
        let start = self.cfg.n_patients + self.cfg.n_professionals;
        start..start + self.cfg.n_verifiers
    }

    fn hospital_id(&self) -> usize {
        self.actors.len() - 1
    }

    /// Advances the world by one tick; returns what happened.
    pub fn step(&mut self) -> Vec<SimEvent> {
        let now = self.tick;
        let mut events = Vec::new();

        let new_true = self.generate_incidents(now, &mut events);
        self.detect(&new_true, now, &mut events);
        if self.cfg.mode == Mode::Soc {
            self.patrol(now, &mut events);
        }
        self.dispatch(now, &mut events);
        self.move_actors(now, &mut events);
        self.expire_overdue(now, &mut events);

        for actor in &self.actors {
            if !actor.is_idle() {
                match actor.role {
                    Role::Professional => self.busy_professional_ticks += 1,
                    Role::Verifier => self.busy_verifier_ticks += 1,
                    _ => {}
                }
            }
        }
        self.active.retain(|&iid| !self.incidents[iid].state.is_terminal());

        self.tick += 1;
        events
    }

    /// Phase 1. Two draws per patient, always, so the draw schedule does
    /// not depend on world state. A true condition wins over a false alarm
    /// in the same tick. Patients can carry concurrent incidents.
    fn generate_incidents(&mut self, now: u64, events: &mut Vec<SimEvent>) -> Vec<usize> {
        let mut new_true = Vec::new();
        for patient in self.patient_ids() {
            let u_true = self.rng.next_f64();
            let u_false = self.rng.next_f64();
            if u_true < self.cfg.p_incident {
                let glucose = self.rng.next_range(40.0, 65.0);
                let id = self.push_incident(
                    patient,
                    now,
                    IncidentTruth::TrueCondition { glucose },
                    IncidentState::Undetected,
                );
                new_true.push(id);
                events.push(SimEvent::TrueConditionStarted { incident: id, patient });
            } else if u_false < self.cfg.p_false_alarm {
                let id = self.push_incident(
                    patient,
                    now,
                    IncidentTruth::FalseAlarm,
                    IncidentState::Alarmed(now),
                );
                self.incidents[id].alarm_tick = Some(now);
                self.queue.push_back(id);
                events.push(SimEvent::FalseAlarmRaised { incident: id, patient });
            }
        }
        new_true
    }

    fn push_incident(
        &mut self,
        patient: usize,
        now: u64,
        truth: IncidentTruth,
        state: IncidentState,
    ) -> usize {
        let id = self.incidents.len();
        self.incidents.push(Incident {
            id,
            patient,
            start_tick: now,
            truth,
            state,
            alarm_tick: None,
            needs_professional: false,
            responder: None,
            cost: 0.0,
            hospital_eta: None,
        });
        self.active.push(id);
        id
    }

    /// Phase 2. One draw per new true condition.
    fn detect(&mut self, new_true: &[usize], now: u64, events: &mut Vec<SimEvent>) {
        for &iid in new_true {
            if self.rng.next_f64() < self.cfg.sensor_sensitivity {
                self.raise_alarm(iid, now);
                events.push(SimEvent::SensorAlarm { incident: iid });
            }
        }
    }

    fn raise_alarm(&mut self, iid: usize, now: u64) {
        self.incidents[iid].state = IncidentState::Alarmed(now);
        self.incidents[iid].alarm_tick = Some(now);
        self.queue.push_back(iid);
    }

    /// Phase 3 (community mode). Idle verifiers take a random-walk step
    /// (two draws) and may discover the nearest undetected true condition
    /// within the discovery radius (one draw when a candidate exists).
    fn patrol(&mut self, now: u64, events: &mut Vec<SimEvent>) {
        for vid in self.verifier_ids() {
            if !self.actors[vid].is_idle() {
                continue;
            }
            let speed = self.actors[vid].speed;
            let dx = self.rng.next_range(-speed, speed);
            let dy = self.rng.next_range(-speed, speed);
            self.actors[vid].x = (self.actors[vid].x + dx).clamp(0.0, self.cfg.width);
            self.actors[vid].y = (self.actors[vid].y + dy).clamp(0.0, self.cfg.height);

            let (vx, vy) = (self.actors[vid].x, self.actors[vid].y);
            let candidate = self
                .active
                .iter()
                .copied()
                .filter(|&iid| {
                    let inc = &self.incidents[iid];
                    inc.truth.is_true_condition() && inc.state == IncidentState::Undetected
                })
                .filter_map(|iid| {
                    let p = &self.actors[self.incidents[iid].patient];
                    let d = distance(vx, vy, p.x, p.y);
                    (d <= self.cfg.r_discover).then_some((d, iid))
                })
                .min_by(|(d1, i1), (d2, i2)| {
                    d1.partial_cmp(d2).expect("distances are finite").then(i1.cmp(i2))
                });
            if let Some((_, iid)) = candidate {
                if self.rng.next_f64() < self.cfg.p_discover {
                    self.raise_alarm(iid, now);
                    events.push(SimEvent::PatrolDiscovery { incident: iid, verifier: vid });
                }
            }
        }
    }

    /// Phase 4. FIFO scan of waiting alarms. Traditional mode and
    /// escalated incidents want the nearest idle professional; community
    /// mode tries the nearest idle verifier first and falls back to a
    /// professional when no verifier is free. Unassignable alarms keep
    /// their queue position.
    fn dispatch(&mut self, now: u64, events: &mut Vec<SimEvent>) {
        let mut waiting = std::mem::take(&mut self.queue);
        let mut still_waiting = VecDeque::new();
        while let Some(iid) = waiting.pop_front() {
            let inc = &self.incidents[iid];
            if inc.state.is_terminal() || inc.responder.is_some() {
                continue;
            }
            let professional_stage =
                self.cfg.mode == Mode::Traditional || self.incidents[iid].needs_professional;
            let assigned = if professional_stage {
                self.assign_nearest_idle(Role::Professional, iid, now)
            } else {
                self.assign_nearest_idle(Role::Verifier, iid, now)
                    .or_else(|| self.assign_nearest_idle(Role::Professional, iid, now))
            };
            match assigned {
                Some(responder) => events.push(SimEvent::Assigned { incident: iid, responder }),
                None => still_waiting.push_back(iid),
            }
        }
        self.queue = still_waiting;
    }

    /// Nearest idle actor of `role` by Euclidean distance to the patient,
    /// ties broken by actor id.
    fn assign_nearest_idle(&mut self, role: Role, iid: usize, now: u64) -> Option<usize> {
        let patient = &self.actors[self.incidents[iid].patient];
        let (px, py) = (patient.x, patient.y);
        let (_, chosen) = self
            .actors
            .iter()
            .filter(|a| a.role == role && a.is_idle())
            .map(|a| (distance(a.x, a.y, px, py), a.id))
            .min_by(|(d1, i1), (d2, i2)| {
                d1.partial_cmp(d2).expect("distances are finite").then(i1.cmp(i2))
            })?;
        self.actors[chosen].activity = Activity::Travelling {
            incident: iid,
            target_x: px,
            target_y: py,
            assigned_tick: now,
        };
        self.incidents[iid].responder = Some(chosen);
        Some(chosen)
    }

    /// Phase 5. Hospital transfers complete, then travelling actors
    /// advance straight toward their targets and handle arrival.
    fn move_actors(&mut self, now: u64, events: &mut Vec<SimEvent>) {
        for idx in 0..self.active.len() {
            let iid = self.active[idx];
            if let Some(eta) = self.incidents[iid].hospital_eta {
                if eta <= now && !self.incidents[iid].state.is_terminal() {
                    self.incidents[iid].hospital_eta = None;
                    self.treat(iid, now, None, events);
                }
            }
        }

        for aid in 0..self.actors.len() {
            let Activity::Travelling {
                incident,
                target_x,
                target_y,
                assigned_tick,
            } = self.actors[aid].activity
            else {
                continue;
            };
            if assigned_tick >= now {
                continue;
            }
            let (x, y) = (self.actors[aid].x, self.actors[aid].y);
            let remaining = distance(x, y, target_x, target_y);
            let speed = self.actors[aid].speed;
            if remaining <= speed {
                self.actors[aid].x = target_x;
                self.actors[aid].y = target_y;
                self.actors[aid].activity = Activity::Idle;
                self.arrive(aid, incident, now, events);
            } else {
                let f = speed / remaining;
                self.actors[aid].x = x + (target_x - x) * f;
                self.actors[aid].y = y + (target_y - y) * f;
            }
        }
    }

    /// A responder reached the incident location. Costs accrue here and
    /// only here, so queued-never-serviced alarms stay free.
    fn arrive(&mut self, actor_id: usize, iid: usize, now: u64, events: &mut Vec<SimEvent>) {
        self.incidents[iid].responder = None;
        match self.actors[actor_id].role {
            Role::Professional => {
                self.incidents[iid].cost += self.cfg.c_professional;
                match self.incidents[iid].truth {
                    IncidentTruth::FalseAlarm => self.dismiss(iid, actor_id, now, events),
                    IncidentTruth::TrueCondition { .. } => {
                        self.treat(iid, now, Some(actor_id), events)
                    }
                }
            }
            Role::Verifier => {
                self.incidents[iid].cost += self.cfg.c_verifier;
                match self.incidents[iid].truth {
                    IncidentTruth::FalseAlarm => self.dismiss(iid, actor_id, now, events),
                    IncidentTruth::TrueCondition { glucose } => {
                        self.verify_true_condition(iid, actor_id, glucose, now, events)
                    }
                }
            }
            Role::Patient | Role::Hospital => unreachable!("only responders travel to incidents"),
        }
    }

    /// On-site verification of a real condition: score the observed vitals
    /// and escalate accordingly. Low scores are handled on the spot by the
    /// verifier; high scores bring in a professional or send the patient
    /// to the hospital.
    fn verify_true_condition(
        &mut self,
        iid: usize,
        verifier: usize,
        glucose: f64,
        now: u64,
        events: &mut Vec<SimEvent>,
    ) {
        self.incidents[iid].state = IncidentState::Verified(now);
        let vitals = BTreeMap::from([(VitalKind::Glucose, glucose)]);
        let score = risk_score(&vitals).expect("glucose reading present");
        let action = decide_action(score, &self.thresholds);
        events.push(SimEvent::VerifiedTrue { incident: iid, verifier, action });
        match action {
            CareAction::StayHome | CareAction::RequestVerification => {
                self.treat(iid, now, Some(verifier), events);
            }
            CareAction::DispatchProfessional => {
                self.incidents[iid].needs_professional = true;
                self.queue.push_back(iid);
            }
            CareAction::Hospitalize => {
                self.incidents[iid].cost += self.cfg.c_hospital;
                let patient = &self.actors[self.incidents[iid].patient];
                let hospital = &self.actors[self.hospital_id()];
                let travel =
                    (distance(patient.x, patient.y, hospital.x, hospital.y) / patient.speed).ceil()
                        as u64;
                let eta = now + travel;
                self.incidents[iid].hospital_eta = Some(eta);
                events.push(SimEvent::HospitalTransferStarted { incident: iid, eta });
            }
        }
    }

    fn treat(&mut self, iid: usize, now: u64, responder: Option<usize>, events: &mut Vec<SimEvent>) {
        self.incidents[iid].state = IncidentState::Treated(now);
        events.push(SimEvent::Treated { incident: iid, responder });
    }

    fn dismiss(&mut self, iid: usize, responder: usize, now: u64, events: &mut Vec<SimEvent>) {
        self.incidents[iid].state = IncidentState::Dismissed(now);
        events.push(SimEvent::Dismissed { incident: iid, responder });
    }

    /// Phase 6. True conditions strictly older than `t_expire` expire
    /// unless already terminal or committed to a hospital transfer. An
    /// en-route responder is recalled and freed without accruing cost.
    fn expire_overdue(&mut self, now: u64, events: &mut Vec<SimEvent>) {
        for idx in 0..self.active.len() {
            let iid = self.active[idx];
            let inc = &self.incidents[iid];
            if !inc.truth.is_true_condition()
                || inc.state.is_terminal()
                || inc.hospital_eta.is_some()
            {
                continue;
            }
            if now - inc.start_tick > self.cfg.t_expire {
                self.incidents[iid].state = IncidentState::Expired(now);
                if let Some(responder) = self.incidents[iid].responder.take() {
                    self.actors[responder].activity = Activity::Idle;
                }
                events.push(SimEvent::Expired { incident: iid });
            }
        }
    }

    /// Final metrics for the completed run.
    pub fn report(&self) -> MetricsReport {
        let mut per_intervention_costs = Vec::new();
        let mut treated = 0u64;
        let mut expired = 0u64;
        let mut dismissed_false = 0u64;
        let mut pending = 0u64;
        let mut total_servicing = 0u64;

        for inc in &self.incidents {
            if inc.cost > 0.0 {
                per_intervention_costs.push(inc.cost);
            }
            match (inc.truth.is_true_condition(), inc.state) {
                (true, IncidentState::Treated(t)) => {
                    treated += 1;
                    let alarm = inc.alarm_tick.expect("treated implies alarmed");
                    total_servicing += t - alarm;
                }
                (true, IncidentState::Expired(_)) => expired += 1,
                (false, IncidentState::Dismissed(_)) => dismissed_false += 1,
                (_, s) if !s.is_terminal() => pending += 1,
                _ => unreachable!("false alarms never treat or expire; true conditions never dismiss"),
            }
        }

        let total_social_cost = per_intervention_costs.iter().sum();
        let terminated_true = treated + expired;
        let effective_sensitivity = if terminated_true > 0 {
            treated as f64 / terminated_true as f64
        } else {
            0.0
        };
        let mean_servicing_time = if treated > 0 {
            total_servicing as f64 / treated as f64
        } else {
            0.0
        };
        let utilization = |busy: u64, count: usize| {
            if count == 0 || self.tick == 0 {
                0.0
            } else {
                busy as f64 / (count as f64 * self.tick as f64)
            }
        };

        MetricsReport {
            mode: self.cfg.mode,
            seed: self.cfg.seed,
            per_intervention_costs,
            total_social_cost,
            treated_cases: treated,
            expired_cases: expired,
            false_dispatches: dismissed_false,
            mean_servicing_time,
            total_servicing_time: total_servicing,
            true_positives: treated,
            false_positives: dismissed_false,
            false_negatives: expired,
            effective_sensitivity,
            professional_utilization: utilization(self.busy_professional_ticks, self.cfg.n_professionals),
            verifier_utilization: utilization(self.busy_verifier_ticks, self.cfg.n_verifiers),
            pending_cases: pending,
        }
    }
}
