//! Experiment timelines and the causal-channel audit.
//!
//! Each site carries four events: the moment its measurement choice was
//! physically determined, the choice itself, the start of the measurement and
//! the moment the result is available. The audit asks, for every ordered pair
//! of sites, whether information from one of the first site's events can
//! reach the second site before its result is in.
//!
//! Light-cone tests are exact: times, positions and the signal speed are
//! converted to rationals so that cosmological distances and lightlike
//! boundaries do not suffer from rounding.

use std::collections::{BTreeMap, HashSet};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub position: [f64; 3],
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    ChoiceDetermined,
    ChoiceMade,
    MeasurementStart,
    ResultAvailable,
}

impl EventKind {
    pub const ORDER: [EventKind; 4] =
        [EventKind::ChoiceDetermined, EventKind::ChoiceMade, EventKind::MeasurementStart, EventKind::ResultAvailable];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub site: String,
    pub kind: EventKind,
    pub time: f64,
    /// Where the event physically happens when that is not at its site, e.g. a
    /// distant photon emission that fixes the site's choice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Event {
    pub fn new(site: &str, kind: EventKind, time: f64) -> Self {
        Event { site: site.into(), kind, time, origin: None, note: String::new() }
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = note.into();
        self
    }

    pub fn with_origin(mut self, origin: [f64; 3]) -> Self {
        self.origin = Some(origin);
        self
    }
}

fn default_speed() -> f64 {
    SPEED_OF_LIGHT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTimeline {
    #[serde(default = "default_speed")]
    pub signal_speed: f64,
    pub heralded: bool,
    /// Choosers are taken to be free: nothing fixes a choice before it is made.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub assume_free_choice: bool,
    pub sites: Vec<Site>,
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl ExperimentTimeline {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn site(&self, id: &str) -> Result<&Site> {
        self.sites.iter().find(|s| s.id == id).ok_or_else(|| Error::InvalidTimeline(format!("unknown site id {id:?}")))
    }

    pub fn event(&self, site: &str, kind: EventKind) -> Option<&Event> {
        self.events.iter().find(|e| e.site == site && e.kind == kind)
    }

    fn location(&self, e: &Event) -> Result<[f64; 3]> {
        Ok(match e.origin {
            Some(p) => p,
            None => self.site(&e.site)?.position,
        })
    }

    /// Checks structure and per-site causal ordering; lists every offending event.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.signal_speed.is_finite() && self.signal_speed > 0.0) {
            problems.push(format!("signal_speed must be positive and finite, got {}", self.signal_speed));
        }
        if self.sites.is_empty() {
            problems.push("timeline has no sites".to_string());
        }
        let mut ids = HashSet::new();
        for s in &self.sites {
            if !ids.insert(s.id.as_str()) {
                problems.push(format!("duplicate site id {:?}", s.id));
            }
            if s.position.iter().any(|x| !x.is_finite()) {
                problems.push(format!("site {:?} has a non-finite position", s.id));
            }
        }
        let mut per_site: BTreeMap<&str, BTreeMap<EventKind, &Event>> = BTreeMap::new();
        for e in &self.events {
            if !ids.contains(e.site.as_str()) {
                problems.push(format!("event {:?} references unknown site {:?}", e.kind, e.site));
                continue;
            }
            if !e.time.is_finite() || e.origin.is_some_and(|p| p.iter().any(|x| !x.is_finite())) {
                problems.push(format!("{:?}@{} has non-finite coordinates", e.kind, e.site));
            }
            if per_site.entry(&e.site).or_default().insert(e.kind, e).is_some() {
                problems.push(format!("duplicate {:?} event at site {:?}", e.kind, e.site));
            }
        }
        for s in &self.sites {
            let events = per_site.get(s.id.as_str());
            let missing: Vec<_> =
                EventKind::ORDER.iter().filter(|k| events.is_none_or(|m| !m.contains_key(k))).collect();
            if !missing.is_empty() {
                problems.push(format!("site {:?} is missing events {missing:?}", s.id));
                continue;
            }
            let events = events.expect("checked above");
            for pair in EventKind::ORDER.windows(2) {
                let (a, b) = (events[&pair[0]], events[&pair[1]]);
                if a.time > b.time {
                    problems.push(format!(
                        "site {:?}: {:?} at {} s is after {:?} at {} s",
                        s.id, a.kind, a.time, b.kind, b.time
                    ));
                }
            }
            let (det, choice) = (events[&EventKind::ChoiceDetermined], events[&EventKind::ChoiceMade]);
            if problems.is_empty() && !self.can_signal(det, choice).unwrap_or(false) {
                problems.push(format!("site {:?}: ChoiceDetermined cannot causally influence ChoiceMade", s.id));
            }
            if self.assume_free_choice && (det.time != choice.time || det.origin.is_some()) {
                problems.push(format!(
                    "site {:?}: free choice requires ChoiceDetermined to coincide with ChoiceMade",
                    s.id
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidTimeline(problems.join("; ")))
        }
    }

    /// True iff a signal at `signal_speed` leaving `from` reaches `to`'s
    /// location no later than `to` (lightlike separation counts).
    pub fn can_signal(&self, from: &Event, to: &Event) -> Result<bool> {
        let (p1, p2) = (self.location(from)?, self.location(to)?);
        let exact =
            |x: f64| rational::from_f64(x).ok_or_else(|| Error::InvalidTimeline(format!("non-finite coordinate {x}")));
        let dt = exact(to.time)? - exact(from.time)?;
        if dt.is_negative() {
            return Ok(false);
        }
        let mut dist2 = Rational::zero();
        for k in 0..3 {
            let d = exact(p2[k])? - exact(p1[k])?;
            dist2 += &d * &d;
        }
        let reach = exact(self.signal_speed)? * dt;
        Ok(&reach * &reach >= dist2)
    }
}

/// Free-function form of [`ExperimentTimeline::can_signal`].
pub fn can_signal(e1: &Event, e2: &Event, timeline: &ExperimentTimeline) -> Result<bool> {
    timeline.can_signal(e1, e2)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairReport {
    pub from: String,
    pub to: String,
    pub choice_channel_open: bool,
    pub result_channel_open: bool,
    pub determination_channel_open: bool,
}

impl PairReport {
    pub fn any_open(&self) -> bool {
        self.choice_channel_open || self.result_channel_open || self.determination_channel_open
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopholeReport {
    pub pairs: Vec<PairReport>,
    pub heralding_gap: bool,
    pub all_channels_closed: bool,
    pub caveats: Vec<String>,
}

impl LoopholeReport {
    pub fn any_channel_open(&self) -> bool {
        self.pairs.iter().any(PairReport::any_open)
    }

    pub fn pair(&self, from: &str, to: &str) -> Option<&PairReport> {
        self.pairs.iter().find(|p| p.from == from && p.to == to)
    }
}

pub fn audit(timeline: &ExperimentTimeline) -> Result<LoopholeReport> {
    timeline.validate()?;
    let ev = |site: &str, kind| timeline.event(site, kind).expect("validated timeline");
    let mut pairs = Vec::new();
    for a in &timeline.sites {
        for b in &timeline.sites {
            if a.id == b.id {
                continue;
            }
            let remote_result = ev(&b.id, EventKind::ResultAvailable);
            let local_result = ev(&a.id, EventKind::ResultAvailable);
            pairs.push(PairReport {
                from: a.id.clone(),
                to: b.id.clone(),
                choice_channel_open: timeline.can_signal(ev(&a.id, EventKind::ChoiceMade), remote_result)?,
                result_channel_open: local_result.time < remote_result.time
                    && timeline.can_signal(local_result, remote_result)?,
                determination_channel_open: timeline
                    .can_signal(ev(&a.id, EventKind::ChoiceDetermined), remote_result)?,
            });
        }
    }
    let heralding_gap = !timeline.heralded;
    let all_channels_closed = !pairs.iter().any(PairReport::any_open);
    let mut caveats = Vec::new();
    if heralding_gap {
        caveats.push(
            "source is not heralded: a detection at one site does not guarantee corresponding results elsewhere"
                .to_string(),
        );
    }
    if timeline.assume_free_choice {
        caveats.push(
            "choices are assumed free; hidden variables behind the choosers' decisions are not excluded".to_string(),
        );
    }
    if all_channels_closed {
        caveats.push(
            "closed channels exclude only influences within this timeline; a conspiracy fixed in the common past of all determination events is not modeled"
                .to_string(),
        );
    }
    Ok(LoopholeReport { pairs, heralding_gap, all_channels_closed, caveats })
}

pub const PRESETS: [&str; 4] = ["rowe", "weihs", "galaxy", "ideal"];

fn quadruple(site: &str, times: [f64; 4], notes: [&str; 4]) -> Vec<Event> {
    EventKind::ORDER.iter().zip(times).zip(notes).map(|((k, t), n)| Event::new(site, *k, t).with_note(n)).collect()
}

pub fn make_preset(name: &str) -> Result<ExperimentTimeline> {
    match name {
        "rowe" => Ok(rowe()),
        "weihs" => Ok(weihs()),
        "galaxy" => Ok(galaxy()),
        "ideal" => Ok(ideal()),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Two trapped ions 3 µm apart (light crossing ~10 fs) read out by
/// fluorescence over ~1 ms. Detection is near perfect, so treated as heralded.
fn rowe() -> ExperimentTimeline {
    let mut events = quadruple(
        "ion1",
        [0.0, 0.0, 1.0e-6, 1.0e-3],
        [
            "fixed with the laser settings",
            "analysis phase chosen",
            "fluorescence readout begins",
            "photon count complete after ~1 ms",
        ],
    );
    events.extend(quadruple(
        "ion2",
        [0.0, 0.0, 1.0e-6, 1.001e-3],
        [
            "fixed with the laser settings",
            "analysis phase chosen",
            "fluorescence readout begins",
            "readout ends 1 µs after ion1's",
        ],
    ));
    ExperimentTimeline {
        signal_speed: SPEED_OF_LIGHT,
        heralded: true,
        assume_free_choice: false,
        sites: vec![
            Site { id: "ion1".into(), position: [0.0, 0.0, 0.0] },
            Site { id: "ion2".into(), position: [3.0e-6, 0.0, 0.0] },
        ],
        events,
        note: "representative values: ions a few micrometers apart, readout orders of magnitude longer than light crossing".into(),
    }
}

/// Two stations 400 m apart (1.33 µs light time) with fast local random
/// switches. The switch's own outcome is fixed by local hidden variables
/// long before the switch fires.
fn weihs() -> ExperimentTimeline {
    let notes = [
        "local RNG's hidden variables fixed 10 µs earlier",
        "fast switch fires from local quantum RNG",
        "modulator set",
        "photon detected",
    ];
    let mut events = quadruple("alice", [-10.0e-6, 0.0, 20.0e-9, 100.0e-9], notes);
    events.extend(quadruple("bob", [-10.0e-6, 0.0, 20.0e-9, 100.0e-9], notes));
    ExperimentTimeline {
        signal_speed: SPEED_OF_LIGHT,
        heralded: false,
        assume_free_choice: false,
        sites: vec![
            Site { id: "alice".into(), position: [-200.0, 0.0, 0.0] },
            Site { id: "bob".into(), position: [200.0, 0.0, 0.0] },
        ],
        events,
        note: "representative values: 400 m baseline, switching 100 ns before detection".into(),
    }
}

/// Choices fixed by photons emitted ~1.1e9 years ago by galaxies on opposite
/// sides of a 1 km baseline. Each photon reaches its own station 1.67 µs
/// before the other station's result, but would need 3.3 µs more to reach it.
fn galaxy() -> ExperimentTimeline {
    // 2^55 s keeps every coordinate exactly representable.
    let lookback = (1u64 << 55) as f64;
    let far = SPEED_OF_LIGHT * lookback;
    let site = |id: &str, x: f64, galaxy_x: f64| {
        let mut evs = vec![Event::new(id, EventKind::ChoiceDetermined, -lookback)
            .with_origin([galaxy_x, 0.0, 0.0])
            .with_note("photon leaves a galaxy ~1.1e9 light-years away")];
        evs.extend(
            quadruple(
                id,
                [0.0, 0.0, 20.0e-9, 100.0e-9],
                ["", "setting read from the arriving photon", "modulator set", "detection"],
            )
            .into_iter()
            .skip(1),
        );
        (Site { id: id.into(), position: [x, 0.0, 0.0] }, evs)
    };
    let (west, west_events) = site("west", -500.0, -far);
    let (east, east_events) = site("east", 500.0, far);
    ExperimentTimeline {
        signal_speed: SPEED_OF_LIGHT,
        heralded: true,
        assume_free_choice: false,
        sites: vec![west, east],
        events: west_events.into_iter().chain(east_events).collect(),
        note: "choice photons arrive from opposite directions; 1 km baseline".into(),
    }
}

/// Three players 10 km apart on an equilateral triangle, local choices, 1 µs measurements.
fn ideal() -> ExperimentTimeline {
    let side = 10_000.0;
    let h = side * 3f64.sqrt() / 2.0;
    let positions = [[0.0, 0.0, 0.0], [side, 0.0, 0.0], [side / 2.0, h, 0.0]];
    let mut sites = Vec::new();
    let mut events = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        let id = format!("player{}", i + 1);
        events.extend(quadruple(
            &id,
            [0.0, 0.0, 100.0e-9, 1.0e-6],
            ["fixed by the local choice itself", "question posed", "measurement begins", "answer recorded"],
        ));
        sites.push(Site { id, position: *p });
    }
    ExperimentTimeline {
        signal_speed: SPEED_OF_LIGHT,
        heralded: true,
        assume_free_choice: false,
        sites,
        events,
        note: "target configuration for playing the game: heralded triplets, 33 µs light time vs 1 µs play".into(),
    }
}
