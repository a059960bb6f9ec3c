//! Physical plant models. Each reads raw actuator frames, so a payload the
//! monitor cannot decode still has whatever effect the hardware gives it.

use serde::{Deserialize, Serialize};

use crate::model::{ActuatorId, SystemState};
use crate::time::Micros;

pub trait Plant {
    /// Names of the sensor signals the monitor and controllers can read.
    fn signal_names(&self) -> Vec<&'static str>;
    fn signals(&self, time: Micros) -> SystemState;
    /// Advances the dynamics by `dt` with the current actuator settings.
    fn step(&mut self, dt: Micros);
    /// Writes a payload to an actuator's registers.
    fn apply(&mut self, actuator: ActuatorId, payload: &[u8]);
    fn readout_names(&self) -> Vec<&'static str>;
    fn readouts(&self) -> Vec<f64>;
    /// Index into [`Plant::readouts`] of the value used for plots.
    fn plot_readout(&self) -> usize {
        0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heading {
    Forward,
    Left,
    Right,
    /// One motor stopped: the rover spins in place.
    Pivot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoverParams {
    /// Initial line-following error.
    pub s0: f64,
    /// Error growth per ms from the track curving away.
    pub drift: f64,
    /// Self-correction rate per ms while going forward.
    pub gain: f64,
    /// Error change per ms while turning.
    pub turn_rate: f64,
    /// Error change per ms while spinning with one motor off.
    pub pivot_rate: f64,
    pub initial_speed: u8,
    /// Encoder distance per ms per unit of speed.
    pub distance_scale: f64,
    /// Sensor saturation.
    pub limit: f64,
}

impl Default for RoverParams {
    fn default() -> Self {
        RoverParams {
            s0: -3000.0,
            drift: 2.0,
            gain: 0.002,
            turn_rate: 8.0,
            pivot_rate: 5.0,
            initial_speed: 120,
            distance_scale: 0.001,
            limit: 10_000.0,
        }
    }
}

/// One-dimensional line follower. `s_LF` is the offset from the line and
/// `distance` the wheel-encoder count, which only grows with both motors on.
#[derive(Clone, Debug, PartialEq)]
pub struct RoverPlant {
    pub params: RoverParams,
    actuator: ActuatorId,
    pub s_lf: f64,
    pub distance: f64,
    pub speed: u8,
    pub heading: Heading,
}

impl RoverPlant {
    pub fn new(params: RoverParams, actuator: ActuatorId) -> Self {
        RoverPlant {
            s_lf: params.s0,
            distance: 0.0,
            speed: params.initial_speed,
            heading: Heading::Forward,
            actuator,
            params,
        }
    }
}

impl Plant for RoverPlant {
    fn signal_names(&self) -> Vec<&'static str> {
        vec!["s_LF"]
    }

    fn signals(&self, time: Micros) -> SystemState {
        SystemState::new(time).with("s_LF", self.s_lf)
    }

    fn step(&mut self, dt: Micros) {
        let ms = dt.as_ms_f64();
        let p = &self.params;
        self.s_lf = match self.heading {
            Heading::Forward if p.gain > 0.0 => {
                let target = p.drift / p.gain;
                target + (self.s_lf - target) * (-p.gain * ms).exp()
            }
            Heading::Forward => self.s_lf + p.drift * ms,
            Heading::Right => self.s_lf + p.turn_rate * ms,
            Heading::Left => self.s_lf - p.turn_rate * ms,
            Heading::Pivot => self.s_lf + p.pivot_rate * ms,
        }
        .clamp(-p.limit, p.limit);
        if self.heading != Heading::Pivot {
            self.distance += f64::from(self.speed) * p.distance_scale * ms;
        }
    }

    fn apply(&mut self, actuator: ActuatorId, payload: &[u8]) {
        if actuator != self.actuator {
            return;
        }
        for frame in payload.chunks_exact(5) {
            match frame[0] {
                1 => self.heading = Heading::Forward,
                2 => self.heading = Heading::Left,
                3 => self.heading = Heading::Right,
                4 => self.speed = frame[1],
                5 => self.heading = Heading::Pivot,
                _ => {}
            }
        }
    }

    fn readout_names(&self) -> Vec<&'static str> {
        vec!["distance", "speed"]
    }

    fn readouts(&self) -> Vec<f64> {
        vec![self.distance, f64::from(self.speed)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmParams {
    pub initial_pulse: u16,
}

impl Default for ArmParams {
    fn default() -> Self {
        ArmParams { initial_pulse: 420 }
    }
}

/// Gripper servo; `s_pulse` is the pulse width held in its registers.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmPlant {
    actuator: ActuatorId,
    pub pulse: u16,
}

impl ArmPlant {
    pub fn new(params: ArmParams, actuator: ActuatorId) -> Self {
        ArmPlant { actuator, pulse: params.initial_pulse }
    }
}

impl Plant for ArmPlant {
    fn signal_names(&self) -> Vec<&'static str> {
        vec!["s_pulse"]
    }

    fn signals(&self, time: Micros) -> SystemState {
        SystemState::new(time).with("s_pulse", f64::from(self.pulse))
    }

    fn step(&mut self, _dt: Micros) {}

    fn apply(&mut self, actuator: ActuatorId, payload: &[u8]) {
        if actuator != self.actuator {
            return;
        }
        for frame in payload.chunks_exact(4) {
            self.pulse = u16::from_le_bytes([frame[2], frame[3]]);
        }
    }

    fn readout_names(&self) -> Vec<&'static str> {
        vec!["pulse"]
    }

    fn readouts(&self) -> Vec<f64> {
        vec![f64::from(self.pulse)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaterParams {
    pub level_min: f64,
    pub level_max: f64,
    /// Fill-and-drain cycle length.
    pub level_period_ms: f64,
    pub temp_mean: f64,
    pub temp_swing: f64,
    pub temp_period_ms: f64,
}

impl Default for WaterParams {
    fn default() -> Self {
        WaterParams {
            level_min: 40.0,
            level_max: 100.0,
            level_period_ms: 4000.0,
            temp_mean: 25.0,
            temp_swing: 20.0,
            temp_period_ms: 8000.0,
        }
    }
}

/// Tank whose level follows a triangle wave and temperature a sine, with a
/// buzzer as the only actuator.
#[derive(Clone, Debug, PartialEq)]
pub struct WaterTankPlant {
    params: WaterParams,
    actuator: ActuatorId,
    elapsed_ms: f64,
    pub buzzer: bool,
}

impl WaterTankPlant {
    pub fn new(params: WaterParams, actuator: ActuatorId) -> Self {
        WaterTankPlant { params, actuator, elapsed_ms: 0.0, buzzer: false }
    }

    fn level(&self) -> f64 {
        let p = &self.params;
        let phase = (self.elapsed_ms / p.level_period_ms).fract();
        let tri = if phase < 0.5 { 2.0 * phase } else { 2.0 - 2.0 * phase };
        p.level_min + (p.level_max - p.level_min) * tri
    }

    fn temperature(&self) -> f64 {
        let p = &self.params;
        p.temp_mean + p.temp_swing * (std::f64::consts::TAU * self.elapsed_ms / p.temp_period_ms).sin()
    }
}

impl Plant for WaterTankPlant {
    fn signal_names(&self) -> Vec<&'static str> {
        vec!["s_WL", "s_WT"]
    }

    fn signals(&self, time: Micros) -> SystemState {
        SystemState::new(time).with("s_WL", self.level()).with("s_WT", self.temperature())
    }

    fn step(&mut self, dt: Micros) {
        self.elapsed_ms += dt.as_ms_f64();
    }

    fn apply(&mut self, actuator: ActuatorId, payload: &[u8]) {
        if actuator == self.actuator {
            if let Some(&b) = payload.last() {
                self.buzzer = b != 0;
            }
        }
    }

    fn readout_names(&self) -> Vec<&'static str> {
        vec!["buzzer", "level", "temperature"]
    }

    fn readouts(&self) -> Vec<f64> {
        vec![f64::from(u8::from(self.buzzer)), self.level(), self.temperature()]
    }
}

/// No dynamics and no signals; for pure scheduling runs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NullPlant;

impl Plant for NullPlant {
    fn signal_names(&self) -> Vec<&'static str> {
        Vec::new()
    }

    fn signals(&self, time: Micros) -> SystemState {
        SystemState::new(time)
    }

    fn step(&mut self, _dt: Micros) {}

    fn apply(&mut self, _actuator: ActuatorId, _payload: &[u8]) {}

    fn readout_names(&self) -> Vec<&'static str> {
        Vec::new()
    }

    fn readouts(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Plant selection as written in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PlantSpec {
    Rover {
        #[serde(default = "default_motor")]
        actuator: String,
        #[serde(default)]
        params: RoverParams,
    },
    Arm {
        #[serde(default = "default_arm")]
        actuator: String,
        #[serde(default)]
        params: ArmParams,
    },
    Water {
        #[serde(default = "default_buzzer")]
        actuator: String,
        #[serde(default)]
        params: WaterParams,
    },
    None,
}

fn default_motor() -> String {
    "motor".into()
}
fn default_arm() -> String {
    "arm".into()
}
fn default_buzzer() -> String {
    "buzzer".into()
}

impl PlantSpec {
    pub fn actuator(&self) -> Option<&str> {
        match self {
            PlantSpec::Rover { actuator, .. } | PlantSpec::Arm { actuator, .. } | PlantSpec::Water { actuator, .. } => {
                Some(actuator)
            }
            PlantSpec::None => None,
        }
    }

    /// Builds the plant bound to actuator `id`.
    pub fn build(&self, id: ActuatorId) -> Box<dyn Plant> {
        match self {
            PlantSpec::Rover { params, .. } => Box::new(RoverPlant::new(params.clone(), id)),
            PlantSpec::Arm { params, .. } => Box::new(ArmPlant::new(params.clone(), id)),
            PlantSpec::Water { params, .. } => Box::new(WaterTankPlant::new(params.clone(), id)),
            PlantSpec::None => Box::new(NullPlant),
        }
    }

    pub fn signal_names(&self) -> Vec<&'static str> {
        self.build(ActuatorId(0)).signal_names()
    }
}
