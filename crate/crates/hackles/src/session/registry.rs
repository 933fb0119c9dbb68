//! Fixed per-modality point registries.
//!
//! Every visual modality tracks a fixed set of named points, listed here in
//! registry order. Names are unique across modalities. Points are organized
//! into anatomical groups (chains); consecutive points within a group form
//! the point pairs whose angles enter the location feature vector, so a
//! group of k points contributes k-1 pairs.

use super::Modality;

/// (start, len) ranges into the modality's point name array.
type Group = (usize, usize);

pub const HAND_POINTS: [&str; 6] = [
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
];
pub const HAND_GROUPS: [Group; 2] = [(0, 3), (3, 3)];

pub const HEAD_POINTS: [&str; 12] = [
    "head_top_center",
    "forehead_center",
    "nose_bridge",
    "head_center",
    "chin_bottom",
    "neck_base",
    "left_temple",
    "left_ear",
    "left_jaw",
    "right_temple",
    "right_ear",
    "right_jaw",
];
pub const HEAD_GROUPS: [Group; 3] = [(0, 6), (6, 3), (9, 3)];

pub const FACE_POINTS: [&str; 60] = [
    // eyebrows
    "left_eyebrow_inner",
    "left_eyebrow_top",
    "left_eyebrow_outer",
    "right_eyebrow_inner",
    "right_eyebrow_top",
    "right_eyebrow_outer",
    // eyes (inner corner, upper lid, outer corner, lower lid)
    "left_eye_inner_corner",
    "left_upper_eyelid",
    "left_eye_outer_corner",
    "left_lower_eyelid",
    "right_eye_inner_corner",
    "right_upper_eyelid",
    "right_eye_outer_corner",
    "right_lower_eyelid",
    // nose midline
    "nose_root",
    "nose_ridge_upper",
    "nose_ridge_lower",
    "nose_tip",
    "nose_base",
    // lips (inner contour)
    "upper_lip_left",
    "upper_lip_center",
    "upper_lip_right",
    "lower_lip_left",
    "lower_lip_center",
    "lower_lip_right",
    "mouth_corner_left",
    "mouth_corner_right",
    // cheeks
    "left_cheek_upper",
    "left_cheek_center",
    "left_cheek_lower",
    "right_cheek_upper",
    "right_cheek_center",
    "right_cheek_lower",
    // chin and jawline
    "chin_left",
    "chin_center",
    "chin_right",
    "jaw_left_upper",
    "jaw_left_center",
    "jaw_left_lower",
    "jaw_right_upper",
    "jaw_right_center",
    "jaw_right_lower",
    // forehead
    "forehead_left",
    "forehead_mid",
    "forehead_right",
    // remaining landmarks
    "under_eye_left",
    "under_eye_right",
    "upper_lip_outer_left",
    "upper_lip_outer_right",
    "lower_lip_outer_left",
    "lower_lip_outer_right",
    "temple_left",
    "temple_right",
    "nose_wing_left",
    "nose_wing_right",
    "philtrum",
    "brow_ridge_left",
    "brow_ridge_right",
    "eye_center_left",
    "eye_center_right",
];
pub const FACE_GROUPS: [Group; 22] = [
    (0, 3),  // left eyebrow
    (3, 3),  // right eyebrow
    (6, 4),  // left eye
    (10, 4), // right eye
    (14, 5), // nose midline
    (19, 3), // upper lip
    (22, 3), // lower lip
    (25, 2), // mouth corners
    (27, 3), // left cheek
    (30, 3), // right cheek
    (33, 3), // chin
    (36, 3), // left jawline
    (39, 3), // right jawline
    (42, 3), // forehead
    (45, 2), // under-eye
    (47, 2), // upper lip outer
    (49, 2), // lower lip outer
    (51, 2), // temples
    (53, 2), // nose wings
    (55, 1), // philtrum
    (56, 2), // brow ridge
    (58, 2), // eye centers
];

pub const BODY_POINTS: [&str; 12] = [
    "head",
    "shoulder_center",
    "spine",
    "hip_center",
    "hip_left",
    "knee_left",
    "ankle_left",
    "foot_left",
    "hip_right",
    "knee_right",
    "ankle_right",
    "foot_right",
];
pub const BODY_GROUPS: [Group; 3] = [(0, 4), (4, 4), (8, 4)];

/// Point names for a modality, in registry order. Speech has none.
pub fn point_names(modality: Modality) -> &'static [&'static str] {
    match modality {
        Modality::Hand => &HAND_POINTS,
        Modality::Head => &HEAD_POINTS,
        Modality::Face => &FACE_POINTS,
        Modality::Body => &BODY_POINTS,
        Modality::Speech => &[],
    }
}

/// Anatomical groups as (start, len) ranges over [`point_names`].
pub fn point_groups(modality: Modality) -> &'static [(usize, usize)] {
    match modality {
        Modality::Hand => &HAND_GROUPS,
        Modality::Head => &HEAD_GROUPS,
        Modality::Face => &FACE_GROUPS,
        Modality::Body => &BODY_GROUPS,
        Modality::Speech => &[],
    }
}

pub fn point_count(modality: Modality) -> usize {
    point_names(modality).len()
}

/// Registry index of a named point.
pub fn point_index(modality: Modality, name: &str) -> Option<usize> {
    point_names(modality).iter().position(|n| *n == name)
}

/// Index pairs of consecutive points within each group, in group order.
pub fn adjacent_pairs(modality: Modality) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for &(start, len) in point_groups(modality) {
        for i in start..start + len - 1 {
            pairs.push((i, i + 1));
        }
    }
    pairs
}

/// Number of point pairs, i.e. the angle count in the location vector.
pub fn pair_count(modality: Modality) -> usize {
    point_groups(modality)
        .iter()
        .map(|(_, len)| len - 1)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_tile_each_registry_exactly() {
        for m in Modality::VISUAL {
            let mut covered = 0;
            for &(start, len) in point_groups(m) {
                assert_eq!(start, covered, "{m}: groups out of order");
                assert!(len >= 1);
                covered += len;
            }
            assert_eq!(covered, point_count(m), "{m}: groups must cover registry");
        }
    }

    #[test]
    fn pair_counts() {
        assert_eq!(pair_count(Modality::Hand), 4);
        assert_eq!(pair_count(Modality::Head), 9);
        assert_eq!(pair_count(Modality::Face), 38);
        assert_eq!(pair_count(Modality::Body), 9);
    }

    #[test]
    fn pairs_stay_within_groups() {
        for m in Modality::VISUAL {
            let pairs = adjacent_pairs(m);
            assert_eq!(pairs.len(), pair_count(m));
            for (a, b) in pairs {
                assert_eq!(b, a + 1);
                let same_group = point_groups(m)
                    .iter()
                    .any(|&(s, l)| a >= s && b < s + l);
                assert!(same_group, "{m}: pair ({a},{b}) crosses a group");
            }
        }
    }

    #[test]
    fn rule_anchor_points_exist() {
        for (m, name) in [
            (Modality::Hand, "left_wrist"),
            (Modality::Hand, "right_elbow"),
            (Modality::Head, "head_center"),
            (Modality::Head, "head_top_center"),
            (Modality::Head, "chin_bottom"),
            (Modality::Face, "left_eyebrow_top"),
            (Modality::Face, "right_eyebrow_top"),
            (Modality::Face, "upper_lip_left"),
            (Modality::Face, "lower_lip_right"),
            (Modality::Face, "left_upper_eyelid"),
            (Modality::Face, "right_eye_outer_corner"),
        ] {
            assert!(point_index(m, name).is_some(), "{m} missing {name}");
        }
    }
}
