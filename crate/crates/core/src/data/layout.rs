//! Per-frame pose feature channel map.
//!
//! Channel order: root angular velocity (1), root linear velocities (2),
//! root height (1), local joint positions (3 per non-root joint), joint
//! velocities (3 per joint including root), 6D joint rotations (6 per
//! non-root joint), foot contacts (4). For a J-joint skeleton the total is
//! `12J - 1`; J=22 gives 263.
//!
//! Inside every 3-vector, component 0 is the lateral axis, 1 vertical,
//! 2 forward. The 6D rotation channels hold the first two columns of the
//! joint rotation matrix, flattened column-major.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoseFeatureLayout {
    pub joints: usize,
}

impl PoseFeatureLayout {
    pub fn new(joints: usize) -> Self {
        assert!(joints >= 2, "layout needs at least root + one joint");
        PoseFeatureLayout { joints }
    }

    /// Recover the joint count from a channel total, if consistent.
    pub fn from_channels(channels: usize) -> Option<Self> {
        if (channels + 1) % 12 != 0 {
            return None;
        }
        let joints = (channels + 1) / 12;
        (joints >= 2).then_some(PoseFeatureLayout { joints })
    }

    pub fn channels(&self) -> usize {
        let j = self.joints;
        1 + 2 + 1 + 3 * (j - 1) + 3 * j + 6 * (j - 1) + 4
    }

    /// Channels fed to the quantizer encoder: everything except the foot
    /// contacts, which the decoder predicts but never sees as input.
    pub fn encoder_channels(&self) -> usize {
        self.channels() - 4
    }

    pub const ROOT_ANG: usize = 0;
    pub const ROOT_LIN: usize = 1; // 2 channels
    pub const ROOT_HEIGHT: usize = 3;

    pub fn positions_start(&self) -> usize {
        4
    }

    pub fn velocities_start(&self) -> usize {
        4 + 3 * (self.joints - 1)
    }

    pub fn rotations_start(&self) -> usize {
        self.velocities_start() + 3 * self.joints
    }

    pub fn contacts_start(&self) -> usize {
        self.rotations_start() + 6 * (self.joints - 1)
    }

    /// Channels amplified by 5 after Z-scoring: root kinematics and foot
    /// contacts.
    pub fn scale_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.channels()];
        for m in mask.iter_mut().take(4) {
            *m = true;
        }
        let c0 = self.contacts_start();
        for m in mask.iter_mut().skip(c0) {
            *m = true;
        }
        mask
    }
}

/// Left/right joint exchange for mirroring. `joint_swap[j]` is the joint
/// whose channels joint `j` receives; the permutation must be an
/// involution.
#[derive(Debug, Clone)]
pub struct MirrorSpec {
    pub joint_swap: Vec<usize>,
}

impl MirrorSpec {
    pub fn new(joint_swap: Vec<usize>) -> Self {
        for (j, &s) in joint_swap.iter().enumerate() {
            assert_eq!(joint_swap[s], j, "joint swap must be an involution");
        }
        MirrorSpec { joint_swap }
    }

    pub fn identity(joints: usize) -> Self {
        MirrorSpec { joint_swap: (0..joints).collect() }
    }
}
