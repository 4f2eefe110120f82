//! Direct multi-link integration of the rectilinear gait.
//!
//! The planar shape is the constant-curvature average body; the vertical
//! wave only decides which arclength patches touch the ground. The body's
//! weight is shared over the contact set in proportion to link density.
//! Each contact patch feels viscous friction: joints that are both active
//! and in contact roll, so their tangential slip is measured against the
//! wave-driven rolling speed and backward slip engages `mu_b`; link
//! interiors only drag (`mu_f` forward, `mu_b` backward); every contact
//! point resists lateral slip with `mu_t`. The resulting wrench drives the
//! rigid-body momentum (locked inertia about the body frame), and the pose
//! follows the integrated body velocity.

use super::{
    activation, body_curve, body_tangent, contact_profile, lift_height, ActivationProfile,
    BodyVelocity, FrictionCoefficients, GaitError, GaitParams,
};
use crate::kinematics::{exp_twist, log_twist, Pose};

/// Minimum integration steps per gait cycle accepted by [`step_dynamics`].
pub const MIN_STEPS_PER_CYCLE: f64 = 50.0;

const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];

/// Contact and actuation knobs of the friction model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactModel {
    /// Contact threshold as a fraction of the wave amplitude.
    pub threshold_ratio: f64,
    /// Activation pulse width as a fraction of the mean link length.
    pub pulse_width_ratio: f64,
    /// Amplitude scale over which joint rolling engages (m).
    pub engagement_amplitude: f64,
    pub gravity: f64,
}

impl Default for ContactModel {
    fn default() -> Self {
        Self {
            threshold_ratio: 0.1,
            pulse_width_ratio: 0.25,
            engagement_amplitude: 1e-3,
            gravity: 9.81,
        }
    }
}

impl ContactModel {
    pub fn threshold(&self, params: &GaitParams) -> f64 {
        self.threshold_ratio * params.amplitude
    }

    /// Tangential surface speed of a rolling joint: the wave speed, faded
    /// out as the amplitude vanishes.
    pub fn rolling_speed(&self, params: &GaitParams) -> f64 {
        if params.amplitude == 0.0 {
            return 0.0;
        }
        let engagement = 1.0 - (-params.amplitude / self.engagement_amplitude).exp();
        params.wavelength * params.frequency * engagement
    }
}

/// Step resolution and friction-model knobs for averaged runs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub steps_per_cycle: usize,
    pub contact: ContactModel,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            steps_per_cycle: 200,
            contact: ContactModel::default(),
        }
    }
}

/// The discrete body: link masses and lengths plus the joint shape that
/// tracks the commanded wave.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChain {
    pub link_masses: Vec<f64>,
    pub link_lengths: Vec<f64>,
    /// Planar relative angle at each joint (rad).
    pub joint_angles: Vec<f64>,
    /// Lift of each joint in the vertical plane (m).
    pub joint_heights: Vec<f64>,
}

impl LinkChain {
    /// Equal links of `link_mass` each, shaped for `params` at time 0.
    pub fn uniform(params: &GaitParams, link_mass: f64) -> Self {
        let n = params.link_count;
        let mut chain = Self {
            link_masses: vec![link_mass; n],
            link_lengths: vec![params.body_length / n as f64; n],
            joint_angles: vec![0.0; n - 1],
            joint_heights: vec![0.0; n - 1],
        };
        chain.set_shape(params, 0.0);
        chain
    }

    pub fn total_mass(&self) -> f64 {
        self.link_masses.iter().sum()
    }

    pub fn body_length(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn validate(&self, params: &GaitParams) -> Result<(), GaitError> {
        let n = self.link_masses.len();
        if n != params.link_count
            || self.link_lengths.len() != n
            || self.joint_angles.len() + 1 != n
            || self.joint_heights.len() + 1 != n
        {
            return Err(GaitError::InvalidParams(format!(
                "link chain sizes do not match {} links",
                params.link_count
            )));
        }
        if self
            .link_masses
            .iter()
            .any(|m| !(*m > 0.0 && m.is_finite()))
        {
            return Err(GaitError::InvalidParams(
                "link masses must be positive".into(),
            ));
        }
        if self.link_lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(GaitError::InvalidParams(
                "link lengths must be positive".into(),
            ));
        }
        let total = self.body_length();
        if (total - params.body_length).abs() > 1e-9 * params.body_length {
            return Err(GaitError::InvalidParams(format!(
                "link lengths sum to {total}, body length is {}",
                params.body_length
            )));
        }
        Ok(())
    }

    /// Arclength of each joint, measured from the body midpoint.
    pub fn joint_positions(&self) -> Vec<f64> {
        let mut s = -0.5 * self.body_length();
        self.link_lengths[..self.link_lengths.len() - 1]
            .iter()
            .map(|len| {
                s += len;
                s
            })
            .collect()
    }

    /// Kinematically imposes the commanded shape at time `t`.
    pub fn set_shape(&mut self, params: &GaitParams, t: f64) {
        let joints = self.joint_positions();
        for (j, s) in joints.iter().enumerate() {
            let span = 0.5 * (self.link_lengths[j] + self.link_lengths[j + 1]);
            self.joint_angles[j] = params.curvature * span;
            self.joint_heights[j] = lift_height(*s, t, params);
        }
    }

    pub fn activation_profile(&self, model: &ContactModel) -> ActivationProfile {
        let mean_len = self.body_length() / self.link_lengths.len() as f64;
        ActivationProfile::at_joints(&self.link_lengths, model.pulse_width_ratio * mean_len)
    }

    /// Link index containing arclength `s`.
    fn link_at(&self, s: f64) -> usize {
        let mut edge = -0.5 * self.body_length();
        for (j, len) in self.link_lengths.iter().enumerate() {
            edge += len;
            if s < edge {
                return j;
            }
        }
        self.link_lengths.len() - 1
    }

    fn density(&self, link: usize) -> f64 {
        self.link_masses[link] / self.link_lengths[link]
    }
}

/// Full integrator state: shape, pose, body velocity and clock.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitState {
    pub chain: LinkChain,
    pub pose: Pose,
    pub velocity: BodyVelocity,
    pub time: f64,
}

impl GaitState {
    /// At rest at `pose`, default link masses of 0.1 kg.
    pub fn at_rest(params: &GaitParams, pose: Pose) -> Self {
        Self {
            chain: LinkChain::uniform(params, 0.1),
            pose,
            velocity: BodyVelocity::default(),
            time: 0.0,
        }
    }
}

/// Locked inertia of the planar body about the body frame origin.
struct Inertia {
    mass: f64,
    com: [f64; 2],
    moment: f64,
}

impl Inertia {
    fn of(chain: &LinkChain, kappa: f64) -> Self {
        let mut mass = 0.0;
        let mut first = [0.0; 2];
        let mut moment = 0.0;
        let mut a = -0.5 * chain.body_length();
        for (j, len) in chain.link_lengths.iter().enumerate() {
            let rho = chain.density(j);
            let b = a + len;
            for (node, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                let s = 0.5 * (a + b) + 0.5 * (b - a) * node;
                let dm = rho * 0.5 * (b - a) * w;
                let r = body_curve(s, kappa);
                mass += dm;
                first[0] += dm * r[0];
                first[1] += dm * r[1];
                moment += dm * (r[0] * r[0] + r[1] * r[1]);
            }
            a = b;
        }
        Self {
            mass,
            com: [first[0] / mass, first[1] / mass],
            moment,
        }
    }

    fn momentum(&self, v: &BodyVelocity) -> [f64; 3] {
        let m = self.mass;
        let [cx, cy] = self.com;
        [
            m * (v.xi_x - v.omega * cy),
            m * (v.xi_y + v.omega * cx),
            self.moment * v.omega + m * (cx * v.xi_y - cy * v.xi_x),
        ]
    }

    /// Solves the symmetric 3x3 mass matrix for the body velocity.
    fn velocity(&self, p: [f64; 3]) -> BodyVelocity {
        let m = self.mass;
        let [cx, cy] = self.com;
        // [[m, 0, -m cy], [0, m, m cx], [-m cy, m cx, I]]
        let mat = [
            [m, 0.0, -m * cy],
            [0.0, m, m * cx],
            [-m * cy, m * cx, self.moment],
        ];
        let det = |a: [[f64; 3]; 3]| {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        };
        let d = det(mat);
        let mut out = [0.0; 3];
        for (col, slot) in out.iter_mut().enumerate() {
            let mut replaced = mat;
            for row in 0..3 {
                replaced[row][col] = p[row];
            }
            *slot = det(replaced) / d;
        }
        BodyVelocity::new(out[0], out[1], out[2])
    }
}

/// Net body-frame friction wrench `[fx, fy, torque]` at time `t`.
pub fn body_forces(
    params: &GaitParams,
    friction: &FrictionCoefficients,
    model: &ContactModel,
    chain: &LinkChain,
    velocity: &BodyVelocity,
    t: f64,
) -> [f64; 3] {
    let kappa = params.curvature;
    let contact = contact_profile(t, params, model.threshold(params));
    let pulses = chain.activation_profile(model);

    let mut breaks: Vec<f64> = chain.joint_positions();
    for (a, b) in pulses.intervals() {
        breaks.push(a);
        breaks.push(b);
    }
    breaks.sort_by(f64::total_cmp);

    // (start, end, density, active) pieces of the contact set
    let mut pieces = Vec::new();
    for &(a, b) in &contact.intervals {
        if b <= a {
            continue;
        }
        let mut lo = a;
        for &cut in breaks.iter().filter(|&&c| c > a && c < b) {
            pieces.push(lo..cut);
            lo = cut;
        }
        pieces.push(lo..b);
    }
    let contact_mass: f64 = pieces
        .iter()
        .map(|p| chain.density(chain.link_at(0.5 * (p.start + p.end))) * (p.end - p.start))
        .sum();
    if contact_mass <= 0.0 {
        return [0.0; 3];
    }
    let load_per_mass = model.gravity * chain.total_mass() / contact_mass;
    let roll = model.rolling_speed(params);

    let mut wrench = [0.0; 3];
    for piece in pieces {
        let mid = 0.5 * (piece.start + piece.end);
        let half = 0.5 * (piece.end - piece.start);
        let load_density = chain.density(chain.link_at(mid)) * load_per_mass;
        let active = activation(mid, &pulses);
        for (node, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            let s = mid + half * node;
            let load = load_density * half * w;
            let r = body_curve(s, kappa);
            let tan = body_tangent(s, kappa);
            let nrm = [-tan[1], tan[0]];
            let v = [
                velocity.xi_x - velocity.omega * r[1],
                velocity.xi_y + velocity.omega * r[0],
            ];
            let v_tan = v[0] * tan[0] + v[1] * tan[1];
            let v_nrm = v[0] * nrm[0] + v[1] * nrm[1];
            let slip = if active { v_tan - roll } else { v_tan };
            let mu = if slip < 0.0 {
                friction.mu_b
            } else {
                friction.mu_f
            };
            let f_tan = -mu * load * slip;
            let f_nrm = -friction.mu_t * load * v_nrm;
            let f = [
                f_tan * tan[0] + f_nrm * nrm[0],
                f_tan * tan[1] + f_nrm * nrm[1],
            ];
            wrench[0] += f[0];
            wrench[1] += f[1];
            wrench[2] += r[0] * f[1] - r[1] * f[0];
        }
    }
    wrench
}

/// One explicit step with the default contact model.
pub fn step_dynamics(
    state: &GaitState,
    params: &GaitParams,
    friction: &FrictionCoefficients,
    dt: f64,
) -> Result<GaitState, GaitError> {
    step_dynamics_with(state, params, friction, &ContactModel::default(), dt)
}

/// Advances momentum by the friction wrench plus the coadjoint (gyroscopic)
/// term, then the pose by the updated body velocity.
pub fn step_dynamics_with(
    state: &GaitState,
    params: &GaitParams,
    friction: &FrictionCoefficients,
    model: &ContactModel,
    dt: f64,
) -> Result<GaitState, GaitError> {
    let max = params.period() / MIN_STEPS_PER_CYCLE;
    if !(dt > 0.0 && dt <= max * (1.0 + 1e-12)) {
        return Err(GaitError::StepOutOfRange { dt, max });
    }
    let inertia = Inertia::of(&state.chain, params.curvature);
    let v = state.velocity;
    let p = inertia.momentum(&v);
    let f = body_forces(params, friction, model, &state.chain, &v, state.time);
    let p_next = [
        p[0] + dt * (f[0] + v.omega * p[1]),
        p[1] + dt * (f[1] - v.omega * p[0]),
        p[2] + dt * (f[2] - (v.xi_x * p[1] - v.xi_y * p[0])),
    ];
    let velocity = inertia.velocity(p_next);
    let pose = state
        .pose
        .compose(&exp_twist(velocity.xi_x, velocity.xi_y, velocity.omega, dt));
    let time = state.time + dt;
    let mut chain = state.chain.clone();
    chain.set_shape(params, time);
    Ok(GaitState {
        chain,
        pose,
        velocity,
        time,
    })
}

/// Averaged steady-behavior body velocity with default settings.
pub fn average_body_velocity(
    params: &GaitParams,
    friction: &FrictionCoefficients,
    settle_cycles: usize,
    average_cycles: usize,
) -> Result<BodyVelocity, GaitError> {
    average_body_velocity_with(
        params,
        friction,
        settle_cycles,
        average_cycles,
        &SimSettings::default(),
    )
}

/// Integrates from rest, discards `settle_cycles`, and averages the
/// constant twist that reproduces each later cycle's net displacement.
pub fn average_body_velocity_with(
    params: &GaitParams,
    friction: &FrictionCoefficients,
    settle_cycles: usize,
    average_cycles: usize,
    settings: &SimSettings,
) -> Result<BodyVelocity, GaitError> {
    params.validate()?;
    friction.validate()?;
    if settle_cycles == 0 || average_cycles == 0 {
        return Err(GaitError::InvalidCycles {
            settle: settle_cycles,
            average: average_cycles,
        });
    }
    let period = params.period();
    let steps = settings.steps_per_cycle;
    let dt = period / steps as f64;
    let mut state = GaitState::at_rest(params, Pose::identity());
    state.chain.validate(params)?;

    let run_cycle = |state: &mut GaitState, cycle: usize| -> Result<(), GaitError> {
        for k in 0..steps {
            let next = step_dynamics_with(state, params, friction, &settings.contact, dt)?;
            *state = next;
            // keep the clock on the exact step lattice
            state.time = (cycle * steps + k + 1) as f64 * dt;
        }
        Ok(())
    };

    for cycle in 0..settle_cycles {
        run_cycle(&mut state, cycle)?;
    }
    let mut sum = [0.0; 3];
    for cycle in settle_cycles..settle_cycles + average_cycles {
        let start = state.pose;
        run_cycle(&mut state, cycle)?;
        let twist = log_twist(&start.between(&state.pose), period);
        for (acc, x) in sum.iter_mut().zip(twist) {
            *acc += x;
        }
    }
    let n = average_cycles as f64;
    Ok(BodyVelocity::new(sum[0] / n, sum[1] / n, sum[2] / n))
}
