//! Procedural motion-language corpus on an 8-joint stick skeleton
//! (root, head, two 2-joint arms, two 1-joint legs). Each entry composes
//! 1-3 motion primitives in sequence and carries 1-4 template
//! descriptions built from lemmatized tokens.

use rand::Rng as _;

use super::corpus::{Corpus, CorpusEntry, PoseSequence, Split};
use super::layout::{MirrorSpec, PoseFeatureLayout};
use crate::diff::{NdArray, Real};
use crate::error::{Error, Result};
use crate::util::{rng_from_seed, Rng};

pub const JOINTS: usize = 8;
const ROOT: usize = 0;
const HEAD: usize = 1;
const L_ARM: usize = 2;
const L_HAND: usize = 3;
const R_ARM: usize = 4;
const R_HAND: usize = 5;
const L_FOOT: usize = 6;
const R_FOOT: usize = 7;

const REST: [[Real; 3]; JOINTS] = [
    [0.0, 0.0, 0.0],     // root (offsets are root-relative)
    [0.0, 0.60, 0.0],    // head
    [0.25, 0.35, 0.0],   // left arm
    [0.45, 0.10, 0.0],   // left hand
    [-0.25, 0.35, 0.0],  // right arm
    [-0.45, 0.10, 0.0],  // right hand
    [0.15, -1.00, 0.0],  // left foot
    [-0.15, -1.00, 0.0], // right foot
];

const BASE_HEIGHT: Real = 1.0;
const FPS: Real = 20.0;

pub fn mirror_spec() -> MirrorSpec {
    MirrorSpec::new(vec![ROOT, HEAD, R_ARM, R_HAND, L_ARM, L_HAND, R_FOOT, L_FOOT])
}

#[derive(Debug, Clone, Copy)]
pub enum Axis {
    X,
    Z,
}

/// Per-joint rotation lifted to the first two rotation-matrix columns.
fn rot6d(axis: Axis, angle: Real) -> [Real; 6] {
    let (c, s) = (angle.cos(), angle.sin());
    match axis {
        Axis::X => [1.0, 0.0, 0.0, 0.0, c, s],
        Axis::Z => [c, s, 0.0, -s, c, 0.0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveKind {
    WalkForward,
    RunForward,
    TurnLeft,
    TurnRight,
    RaiseLeftHand,
    RaiseRightHand,
    WaveBothHands,
    KickLeftLeg,
    KickRightLeg,
    Crouch,
    Jump,
    StandStill,
}

pub const ALL_PRIMITIVES: [PrimitiveKind; 12] = [
    PrimitiveKind::WalkForward,
    PrimitiveKind::RunForward,
    PrimitiveKind::TurnLeft,
    PrimitiveKind::TurnRight,
    PrimitiveKind::RaiseLeftHand,
    PrimitiveKind::RaiseRightHand,
    PrimitiveKind::WaveBothHands,
    PrimitiveKind::KickLeftLeg,
    PrimitiveKind::KickRightLeg,
    PrimitiveKind::Crouch,
    PrimitiveKind::Jump,
    PrimitiveKind::StandStill,
];

impl PrimitiveKind {
    pub fn phrases(self) -> &'static [&'static str] {
        match self {
            PrimitiveKind::WalkForward => &["walk forward", "move forward", "walk straight ahead"],
            PrimitiveKind::RunForward => &["run forward", "jog forward", "run straight ahead"],
            PrimitiveKind::TurnLeft => &["turn left", "turn to the left", "rotate left"],
            PrimitiveKind::TurnRight => &["turn right", "turn to the right", "rotate right"],
            PrimitiveKind::RaiseLeftHand => {
                &["raise left hand", "lift left hand", "put left hand up", "raise left arm"]
            }
            PrimitiveKind::RaiseRightHand => {
                &["raise right hand", "lift right hand", "put right hand up", "raise right arm"]
            }
            PrimitiveKind::WaveBothHands => {
                &["wave both hands", "wave with both hands", "wave hands over head"]
            }
            PrimitiveKind::KickLeftLeg => {
                &["kick left leg", "kick with left leg", "kick left foot forward"]
            }
            PrimitiveKind::KickRightLeg => {
                &["kick right leg", "kick with right leg", "kick right foot forward"]
            }
            PrimitiveKind::Crouch => &["crouch down", "squat down", "bend down low"],
            PrimitiveKind::Jump => &["jump up", "jump in place", "hop upward"],
            PrimitiveKind::StandStill => &["stand still", "stand in place", "stay still"],
        }
    }
}

const SUBJECTS: [&str; 4] = ["a person", "someone", "the person", "a figure"];

/// Skeleton state for one frame produced by a primitive.
struct FramePose {
    heading_delta: Real,
    advance_fwd: Real,
    advance_lat: Real,
    height: Real,
    local_delta: [[Real; 3]; JOINTS],
    angles: [(Axis, Real); JOINTS],
}

impl FramePose {
    fn rest() -> Self {
        FramePose {
            heading_delta: 0.0,
            advance_fwd: 0.0,
            advance_lat: 0.0,
            height: 0.0,
            local_delta: [[0.0; 3]; JOINTS],
            angles: [(Axis::X, 0.0); JOINTS],
        }
    }
}

const TAU: Real = std::f64::consts::TAU as Real;
const PI: Real = std::f64::consts::PI as Real;

fn smoothstep(u: Real) -> Real {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Both legs/arms swinging gait shared by walk and run.
fn gait(pose: &mut FramePose, phase: Real, stride: Real, lift: Real, arm: Real) {
    let s = phase.sin();
    let l_up = (phase.sin()).max(0.0);
    let r_up = (-phase.sin()).max(0.0);
    pose.local_delta[L_FOOT] = [0.0, lift * l_up, stride * s];
    pose.local_delta[R_FOOT] = [0.0, lift * r_up, -stride * s];
    pose.local_delta[L_HAND][2] = -arm * s;
    pose.local_delta[R_HAND][2] = arm * s;
    pose.angles[L_FOOT] = (Axis::X, 0.6 * stride * s);
    pose.angles[R_FOOT] = (Axis::X, -0.6 * stride * s);
    pose.angles[L_ARM] = (Axis::X, -0.8 * arm * s);
    pose.angles[R_ARM] = (Axis::X, 0.8 * arm * s);
}

impl PrimitiveKind {
    /// Pose for local frame `i` of `n`, scaled by `intensity`.
    fn frame(self, i: usize, n: usize, intensity: Real) -> FramePose {
        let u = i as Real / (n - 1).max(1) as Real;
        let mut p = FramePose::rest();
        match self {
            PrimitiveKind::WalkForward => {
                p.advance_fwd = 0.05 * intensity;
                gait(&mut p, TAU * 1.5 * u * intensity.max(0.9), 0.18 * intensity, 0.06, 0.10);
            }
            PrimitiveKind::RunForward => {
                p.advance_fwd = 0.11 * intensity;
                p.height = 0.03 * (TAU * 3.0 * u).sin().abs();
                gait(&mut p, TAU * 3.0 * u, 0.28 * intensity, 0.12, 0.18);
            }
            PrimitiveKind::TurnLeft | PrimitiveKind::TurnRight => {
                let total = 0.5 * PI * intensity;
                let sign = if matches!(self, PrimitiveKind::TurnLeft) { 1.0 } else { -1.0 };
                p.heading_delta = sign * total / n as Real;
                p.advance_fwd = 0.015 * intensity;
                gait(&mut p, TAU * 1.2 * u, 0.08 * intensity, 0.04, 0.05);
            }
            PrimitiveKind::RaiseLeftHand | PrimitiveKind::RaiseRightHand => {
                let (hand, arm, sign) = if matches!(self, PrimitiveKind::RaiseLeftHand) {
                    (L_HAND, L_ARM, 1.0)
                } else {
                    (R_HAND, R_ARM, -1.0)
                };
                let a = smoothstep(2.0 * u.min(0.5)) * intensity;
                p.local_delta[hand] = [-sign * 0.15 * a, 0.75 * a, 0.0];
                p.local_delta[arm] = [-sign * 0.05 * a, 0.18 * a, 0.0];
                p.angles[arm] = (Axis::Z, sign * 1.2 * a);
                p.angles[hand] = (Axis::Z, sign * 1.6 * a);
            }
            PrimitiveKind::WaveBothHands => {
                let up = smoothstep(3.0 * u.min(1.0 / 3.0)) * intensity;
                let osc = 0.12 * (TAU * 2.0 * u).sin() * intensity;
                p.local_delta[L_HAND] = [-0.10 * up + osc, 0.80 * up, 0.0];
                p.local_delta[R_HAND] = [0.10 * up + osc, 0.80 * up, 0.0];
                p.local_delta[L_ARM] = [0.0, 0.15 * up, 0.0];
                p.local_delta[R_ARM] = [0.0, 0.15 * up, 0.0];
                p.angles[L_HAND] = (Axis::Z, 1.5 * up + 0.8 * osc);
                p.angles[R_HAND] = (Axis::Z, -1.5 * up + 0.8 * osc);
            }
            PrimitiveKind::KickLeftLeg | PrimitiveKind::KickRightLeg => {
                let foot = if matches!(self, PrimitiveKind::KickLeftLeg) { L_FOOT } else { R_FOOT };
                let a = (PI * u).sin() * intensity;
                p.local_delta[foot] = [0.0, 0.25 * a, 0.55 * a];
                p.angles[foot] = (Axis::X, 1.1 * a);
                p.height = -0.02 * a;
            }
            PrimitiveKind::Crouch => {
                let a = (PI * u).sin() * intensity;
                p.height = -0.38 * a;
                p.local_delta[HEAD][2] = 0.10 * a;
                p.angles[HEAD] = (Axis::X, 0.4 * a);
            }
            PrimitiveKind::Jump => {
                let a = (PI * u).sin().max(0.0) * intensity;
                p.height = 0.30 * a;
                // feet tuck upward relative to root while airborne
                p.local_delta[L_FOOT][1] = 0.10 * a;
                p.local_delta[R_FOOT][1] = 0.10 * a;
                p.local_delta[L_HAND][1] = 0.12 * a;
                p.local_delta[R_HAND][1] = 0.12 * a;
            }
            PrimitiveKind::StandStill => {
                let sway = 0.01 * (TAU * u).sin() * intensity;
                p.local_delta[HEAD][0] = sway;
                p.angles[HEAD] = (Axis::Z, 0.5 * sway);
            }
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub entries: usize,
    pub min_primitives: usize,
    pub max_primitives: usize,
    pub min_duration: usize,
    pub max_duration: usize,
    pub primitives: Vec<PrimitiveKind>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            entries: 1000,
            min_primitives: 1,
            max_primitives: 3,
            min_duration: 16,
            max_duration: 28,
            primitives: ALL_PRIMITIVES.to_vec(),
        }
    }
}

/// Every word the generator can emit (subjects, connectives, phrases).
pub fn primitive_vocabulary(primitives: &[PrimitiveKind]) -> Vec<String> {
    let mut words = std::collections::BTreeSet::new();
    for s in SUBJECTS {
        for w in s.split_whitespace() {
            words.insert(w.to_string());
        }
    }
    words.insert("then".to_string());
    for p in primitives {
        for phrase in p.phrases() {
            for w in phrase.split_whitespace() {
                words.insert(w.to_string());
            }
        }
    }
    words.into_iter().collect()
}

pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    if spec.primitives.is_empty() {
        return Err(Error::Data("synthesis needs a non-empty primitive set".into()));
    }
    if spec.entries == 0 {
        return Err(Error::Data("synthesis needs at least one entry".into()));
    }
    let layout = PoseFeatureLayout::new(JOINTS);
    let mut rng = rng_from_seed(seed);
    let n = spec.entries;
    let n_train = n * 80 / 100;
    let n_test = n * 15 / 100;
    let mut entries = Vec::with_capacity(n);
    for idx in 0..n {
        let split = if idx < n_train {
            Split::Train
        } else if idx < n_train + n_test {
            Split::Test
        } else {
            Split::Val
        };
        let n_prims = rng.random_range(spec.min_primitives..=spec.max_primitives);
        let prims: Vec<(PrimitiveKind, usize, Real)> = (0..n_prims)
            .map(|_| {
                let kind = spec.primitives[rng.random_range(0..spec.primitives.len())];
                let dur = rng.random_range(spec.min_duration..=spec.max_duration);
                let intensity = 0.8 + 0.4 * rng.random::<Real>();
                (kind, dur, intensity)
            })
            .collect();
        let motion = render(&prims);
        let texts = describe(&prims, &mut rng);
        entries.push(CorpusEntry { id: format!("synth-{idx:04}"), motion, texts, split });
    }
    Ok(Corpus::from_entries(layout, entries))
}

fn describe(prims: &[(PrimitiveKind, usize, Real)], rng: &mut Rng) -> Vec<String> {
    let n_desc = rng.random_range(1..=4usize);
    let mut texts = Vec::with_capacity(n_desc);
    for _ in 0..n_desc {
        let subject = SUBJECTS[rng.random_range(0..SUBJECTS.len())];
        let phrases: Vec<&str> = prims
            .iter()
            .map(|(kind, _, _)| {
                let ps = kind.phrases();
                ps[rng.random_range(0..ps.len())]
            })
            .collect();
        texts.push(format!("{subject} {}", phrases.join(" then ")));
    }
    texts.dedup();
    texts
}

fn render(prims: &[(PrimitiveKind, usize, Real)]) -> PoseSequence {
    let layout = PoseFeatureLayout::new(JOINTS);
    let total: usize = prims.iter().map(|(_, d, _)| *d).sum();
    // world trajectory
    let mut heading = vec![0.0; total];
    let mut root = vec![[0.0; 3]; total];
    let mut locals = vec![[[0.0; 3]; JOINTS]; total];
    let mut angles = vec![[(Axis::X, 0.0); JOINTS]; total];

    let mut theta: Real = 0.0;
    let mut pos = [0.0, BASE_HEIGHT, 0.0];
    let mut t = 0;
    for &(kind, dur, intensity) in prims {
        for i in 0..dur {
            let fp = kind.frame(i, dur, intensity);
            theta += fp.heading_delta;
            pos[0] += theta.cos() * fp.advance_lat + theta.sin() * fp.advance_fwd;
            pos[2] += -theta.sin() * fp.advance_lat + theta.cos() * fp.advance_fwd;
            pos[1] = BASE_HEIGHT + fp.height;
            heading[t] = theta;
            root[t] = pos;
            for j in 0..JOINTS {
                for a in 0..3 {
                    locals[t][j][a] = REST[j][a] + fp.local_delta[j][a];
                }
            }
            angles[t] = fp.angles;
            t += 1;
        }
    }

    // world joint positions for velocity/contact channels
    let world_at = |t: usize, j: usize| -> [Real; 3] {
        let (c, s) = (heading[t].cos(), heading[t].sin());
        let l = locals[t][j];
        [
            root[t][0] + c * l[0] + s * l[2],
            root[t][1] + l[1],
            root[t][2] - s * l[0] + c * l[2],
        ]
    };

    let d = layout.channels();
    let mut data = vec![0.0; total * d];
    for t in 0..total {
        let tn = (t + 1).min(total - 1);
        let tc = if tn == t { t.saturating_sub(1) } else { t };
        let row = &mut data[t * d..(t + 1) * d];
        // root angular velocity
        row[PoseFeatureLayout::ROOT_ANG] = heading[tn] - heading[tc];
        // root linear velocity in body frame
        let (c, s) = (heading[t].cos(), heading[t].sin());
        let dx = root[tn][0] - root[tc][0];
        let dz = root[tn][2] - root[tc][2];
        row[PoseFeatureLayout::ROOT_LIN] = c * dx - s * dz;
        row[PoseFeatureLayout::ROOT_LIN + 1] = s * dx + c * dz;
        row[PoseFeatureLayout::ROOT_HEIGHT] = root[t][1];
        // local positions of non-root joints
        let p0 = layout.positions_start();
        for j in 1..JOINTS {
            let l = locals[t][j];
            row[p0 + 3 * (j - 1)] = l[0];
            row[p0 + 3 * (j - 1) + 1] = l[1];
            row[p0 + 3 * (j - 1) + 2] = l[2];
        }
        // per-joint world velocities in body frame
        let v0 = layout.velocities_start();
        for j in 0..JOINTS {
            let a = world_at(tn, j);
            let b = world_at(tc, j);
            let (wx, wy, wz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
            row[v0 + 3 * j] = c * wx - s * wz;
            row[v0 + 3 * j + 1] = wy;
            row[v0 + 3 * j + 2] = s * wx + c * wz;
        }
        // 6D rotations of non-root joints
        let r0 = layout.rotations_start();
        for j in 1..JOINTS {
            let (axis, angle) = angles[t][j];
            let r = rot6d(axis, angle);
            row[r0 + 6 * (j - 1)..r0 + 6 * j].copy_from_slice(&r);
        }
        // foot contacts from vertical velocity / overall speed thresholds
        let c0 = layout.contacts_start();
        for (fi, foot) in [L_FOOT, R_FOOT].into_iter().enumerate() {
            let a = world_at(tn, foot);
            let b = world_at(tc, foot);
            let vy = (a[1] - b[1]).abs();
            let speed = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            row[c0 + 2 * fi] = if vy < 1e-2 { 1.0 } else { 0.0 };
            row[c0 + 2 * fi + 1] = if speed < 2e-2 { 1.0 } else { 0.0 };
        }
    }
    PoseSequence::new(NdArray::matrix(total, d, data), FPS)
}
