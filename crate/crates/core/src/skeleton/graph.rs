//! Skeleton graph definitions and the normalized adjacency operator.
//!
//! Three capture formats are built in: Kinect v2 (25 joints, 3D), OpenPose
//! BODY_25 (25 joints, 2D) and BlazePose (33 joints, 3D). Custom graphs can
//! be supplied through a dataset manifest.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatId {
    KinectV2,
    Openpose,
    Blazepose,
    Custom,
}

impl FormatId {
    pub fn as_str(&self) -> &'static str {
        match self {
            FormatId::KinectV2 => "kinect_v2",
            FormatId::Openpose => "openpose",
            FormatId::Blazepose => "blazepose",
            FormatId::Custom => "custom",
        }
    }
}

impl std::str::FromStr for FormatId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kinect_v2" => Ok(FormatId::KinectV2),
            "openpose" => Ok(FormatId::Openpose),
            "blazepose" => Ok(FormatId::Blazepose),
            "custom" => Ok(FormatId::Custom),
            other => Err(Error::Parse(format!(
                "unknown skeleton format {other:?} (expected kinect_v2, openpose, blazepose or custom)"
            ))),
        }
    }
}

impl std::fmt::Display for FormatId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The body segment whose mean length defines the scale unit during
/// preprocessing. Formats without a single hip-to-shoulder bone (BlazePose)
/// measure between midpoints of joint pairs instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorsoSpan {
    Joints(usize, usize),
    Midpoints((usize, usize), (usize, usize)),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonGraph {
    pub format_id: FormatId,
    pub joint_count: usize,
    /// Coordinates per joint (2 or 3).
    pub dimensionality: usize,
    pub edges: Vec<(usize, usize)>,
    pub joint_names: Vec<String>,
    pub root_joint: usize,
    pub torso: TorsoSpan,
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl SkeletonGraph {
    /// Kinect v2 joint hierarchy: 25 joints, 3D positions.
    pub fn kinect_v2() -> SkeletonGraph {
        let graph = SkeletonGraph {
            format_id: FormatId::KinectV2,
            joint_count: 25,
            dimensionality: 3,
            edges: vec![
                (0, 1),
                (1, 20),
                (20, 2),
                (2, 3),
                (20, 4),
                (4, 5),
                (5, 6),
                (6, 7),
                (7, 21),
                (6, 22),
                (20, 8),
                (8, 9),
                (9, 10),
                (10, 11),
                (11, 23),
                (10, 24),
                (0, 12),
                (12, 13),
                (13, 14),
                (14, 15),
                (0, 16),
                (16, 17),
                (17, 18),
                (18, 19),
            ],
            joint_names: names(&[
                "spine_base",
                "spine_mid",
                "neck",
                "head",
                "shoulder_left",
                "elbow_left",
                "wrist_left",
                "hand_left",
                "shoulder_right",
                "elbow_right",
                "wrist_right",
                "hand_right",
                "hip_left",
                "knee_left",
                "ankle_left",
                "foot_left",
                "hip_right",
                "knee_right",
                "ankle_right",
                "foot_right",
                "spine_shoulder",
                "hand_tip_left",
                "thumb_left",
                "hand_tip_right",
                "thumb_right",
            ]),
            root_joint: 0,
            torso: TorsoSpan::Joints(0, 20),
        };
        debug_assert!(graph.validate().is_ok());
        graph
    }

    /// OpenPose BODY_25 keypoints: 25 joints, 2D positions.
    pub fn openpose() -> SkeletonGraph {
        let graph = SkeletonGraph {
            format_id: FormatId::Openpose,
            joint_count: 25,
            dimensionality: 2,
            edges: vec![
                (1, 0),
                (1, 2),
                (2, 3),
                (3, 4),
                (1, 5),
                (5, 6),
                (6, 7),
                (1, 8),
                (8, 9),
                (9, 10),
                (10, 11),
                (8, 12),
                (12, 13),
                (13, 14),
                (0, 15),
                (15, 17),
                (0, 16),
                (16, 18),
                (14, 19),
                (19, 20),
                (14, 21),
                (11, 22),
                (22, 23),
                (11, 24),
            ],
            joint_names: names(&[
                "nose",
                "neck",
                "shoulder_right",
                "elbow_right",
                "wrist_right",
                "shoulder_left",
                "elbow_left",
                "wrist_left",
                "hip_mid",
                "hip_right",
                "knee_right",
                "ankle_right",
                "hip_left",
                "knee_left",
                "ankle_left",
                "eye_right",
                "eye_left",
                "ear_right",
                "ear_left",
                "big_toe_left",
                "small_toe_left",
                "heel_left",
                "big_toe_right",
                "small_toe_right",
                "heel_right",
            ]),
            root_joint: 8,
            torso: TorsoSpan::Joints(8, 1),
        };
        debug_assert!(graph.validate().is_ok());
        graph
    }

    /// BlazePose landmarks: 33 joints, 3D positions.
    ///
    /// The published landmark connections contain cycles and leave the face
    /// points disconnected from the body, so this uses a spanning tree over
    /// the same joints: face chains meet at the nose, the nose attaches to
    /// the left shoulder, and each foot is chained ankle/heel/toe.
    pub fn blazepose() -> SkeletonGraph {
        let graph = SkeletonGraph {
            format_id: FormatId::Blazepose,
            joint_count: 33,
            dimensionality: 3,
            edges: vec![
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 7),
                (0, 4),
                (4, 5),
                (5, 6),
                (6, 8),
                (0, 9),
                (9, 10),
                (0, 11),
                (11, 12),
                (11, 13),
                (13, 15),
                (15, 17),
                (15, 19),
                (15, 21),
                (12, 14),
                (14, 16),
                (16, 18),
                (16, 20),
                (16, 22),
                (11, 23),
                (12, 24),
                (23, 25),
                (25, 27),
                (27, 29),
                (29, 31),
                (24, 26),
                (26, 28),
                (28, 30),
                (30, 32),
            ],
            joint_names: names(&[
                "nose",
                "eye_inner_left",
                "eye_left",
                "eye_outer_left",
                "eye_inner_right",
                "eye_right",
                "eye_outer_right",
                "ear_left",
                "ear_right",
                "mouth_left",
                "mouth_right",
                "shoulder_left",
                "shoulder_right",
                "elbow_left",
                "elbow_right",
                "wrist_left",
                "wrist_right",
                "pinky_left",
                "pinky_right",
                "index_left",
                "index_right",
                "thumb_left",
                "thumb_right",
                "hip_left",
                "hip_right",
                "knee_left",
                "knee_right",
                "ankle_left",
                "ankle_right",
                "heel_left",
                "heel_right",
                "foot_index_left",
                "foot_index_right",
            ]),
            root_joint: 23,
            torso: TorsoSpan::Midpoints((23, 24), (11, 12)),
        };
        debug_assert!(graph.validate().is_ok());
        graph
    }

    pub fn builtin(format: FormatId) -> Option<SkeletonGraph> {
        match format {
            FormatId::KinectV2 => Some(SkeletonGraph::kinect_v2()),
            FormatId::Openpose => Some(SkeletonGraph::openpose()),
            FormatId::Blazepose => Some(SkeletonGraph::blazepose()),
            FormatId::Custom => None,
        }
    }

    /// Custom graph with generated joint names. The torso span defaults to
    /// the root and its lowest-indexed neighbor.
    pub fn custom(
        joint_count: usize,
        dimensionality: usize,
        edges: Vec<(usize, usize)>,
        root_joint: usize,
    ) -> Result<SkeletonGraph> {
        let neighbor = edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == root_joint {
                    Some(b)
                } else if b == root_joint {
                    Some(a)
                } else {
                    None
                }
            })
            .min()
            .ok_or_else(|| Error::Schema(format!("root joint {root_joint} has no incident edge")))?;
        let graph = SkeletonGraph {
            format_id: FormatId::Custom,
            joint_count,
            dimensionality,
            edges,
            joint_names: (0..joint_count).map(|j| format!("joint_{j}")).collect(),
            root_joint,
            torso: TorsoSpan::Joints(root_joint, neighbor),
        };
        graph.validate()?;
        Ok(graph)
    }

    /// Path graph 0-1-2-...-n-1, rooted at joint 0. Used by the synthetic
    /// generator defaults and small tests.
    pub fn chain(joint_count: usize, dimensionality: usize) -> Result<SkeletonGraph> {
        let edges = (0..joint_count.saturating_sub(1)).map(|j| (j, j + 1)).collect();
        SkeletonGraph::custom(joint_count, dimensionality, edges, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.joint_count < 2 {
            return Err(Error::Schema(format!(
                "skeleton needs at least 2 joints, got {}",
                self.joint_count
            )));
        }
        if !(self.dimensionality == 2 || self.dimensionality == 3) {
            return Err(Error::Schema(format!(
                "joint dimensionality must be 2 or 3, got {}",
                self.dimensionality
            )));
        }
        if self.joint_names.len() != self.joint_count {
            return Err(Error::Schema(format!(
                "{} joint names for {} joints",
                self.joint_names.len(),
                self.joint_count
            )));
        }
        if self.root_joint >= self.joint_count {
            return Err(Error::Schema(format!(
                "root joint {} out of range for {} joints",
                self.root_joint, self.joint_count
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &self.edges {
            if a >= self.joint_count || b >= self.joint_count {
                return Err(Error::Schema(format!(
                    "edge ({a}, {b}) references a joint outside 0..{}",
                    self.joint_count
                )));
            }
            if a == b {
                return Err(Error::Schema(format!("self-loop on joint {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Schema(format!("duplicate edge ({a}, {b})")));
            }
        }
        // Connectivity over the undirected edge set.
        let mut adjacency = vec![Vec::new(); self.joint_count];
        for &(a, b) in &self.edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut visited = vec![false; self.joint_count];
        let mut stack = vec![0usize];
        visited[0] = true;
        while let Some(j) = stack.pop() {
            for &n in &adjacency[j] {
                if !visited[n] {
                    visited[n] = true;
                    stack.push(n);
                }
            }
        }
        if let Some(unreached) = visited.iter().position(|v| !v) {
            return Err(Error::Schema(format!(
                "skeleton graph is disconnected: joint {unreached} unreachable from joint 0"
            )));
        }
        match self.torso {
            TorsoSpan::Joints(a, b) => {
                if a >= self.joint_count || b >= self.joint_count || a == b {
                    return Err(Error::Schema(format!("invalid torso span ({a}, {b})")));
                }
            }
            TorsoSpan::Midpoints((a, b), (c, d)) => {
                for j in [a, b, c, d] {
                    if j >= self.joint_count {
                        return Err(Error::Schema(format!(
                            "torso midpoint joint {j} out of range"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Length of the torso span in one frame (`joint_count` x `dimensionality`).
    pub fn torso_length(&self, frame: ArrayView2<'_, f64>) -> f64 {
        let point = |j: usize| frame.row(j);
        let dist = |p: Vec<f64>, q: Vec<f64>| {
            p.iter()
                .zip(&q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        match self.torso {
            TorsoSpan::Joints(a, b) => dist(point(a).to_vec(), point(b).to_vec()),
            TorsoSpan::Midpoints((a, b), (c, d)) => {
                let mid = |x: usize, y: usize| {
                    point(x)
                        .iter()
                        .zip(point(y).iter())
                        .map(|(p, q)| 0.5 * (p + q))
                        .collect::<Vec<f64>>()
                };
                dist(mid(a, b), mid(c, d))
            }
        }
    }
}

/// Symmetrically normalized adjacency with self-loops:
/// `D^{-1/2} (A + I) D^{-1/2}` where `D` is the degree matrix of `A + I`.
pub fn build_normalized_adjacency(graph: &SkeletonGraph) -> Result<Array2<f64>> {
    graph.validate()?;
    let n = graph.joint_count;
    let mut a = Array2::<f64>::eye(n);
    for &(i, j) in &graph.edges {
        a[[i, j]] = 1.0;
        a[[j, i]] = 1.0;
    }
    let degree: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Ok(a)
}

/// Resolves format identifiers to graphs, carrying an optional custom graph
/// supplied by a dataset manifest.
#[derive(Debug, Clone, Default)]
pub struct FormatRegistry {
    custom: Option<SkeletonGraph>,
}

impl FormatRegistry {
    pub fn new() -> Self {
        FormatRegistry::default()
    }

    pub fn with_custom(graph: SkeletonGraph) -> Result<Self> {
        graph.validate()?;
        Ok(FormatRegistry { custom: Some(graph) })
    }

    pub fn resolve(&self, format: FormatId) -> Result<SkeletonGraph> {
        match format {
            FormatId::Custom => self.custom.clone().ok_or_else(|| {
                Error::Schema(
                    "sequence uses the custom format but no custom skeleton graph was provided"
                        .into(),
                )
            }),
            builtin => Ok(SkeletonGraph::builtin(builtin).expect("builtin graph")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spectral_radius(m: &Array2<f64>) -> f64 {
        // Power iteration; fine for symmetric nonnegative matrices this size.
        let n = m.nrows();
        let mut v = ndarray::Array1::<f64>::from_elem(n, 1.0 / (n as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = m.dot(&v);
            lambda = w.dot(&v);
            let norm = w.dot(&w).sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v = w / norm;
        }
        lambda.abs()
    }

    #[test]
    fn builtin_graphs_are_trees() {
        for graph in [
            SkeletonGraph::kinect_v2(),
            SkeletonGraph::openpose(),
            SkeletonGraph::blazepose(),
        ] {
            graph.validate().unwrap();
            assert_eq!(graph.edges.len(), graph.joint_count - 1);
        }
    }

    #[test]
    fn builtin_dimensions() {
        assert_eq!(SkeletonGraph::kinect_v2().joint_count, 25);
        assert_eq!(SkeletonGraph::kinect_v2().dimensionality, 3);
        assert_eq!(SkeletonGraph::openpose().joint_count, 25);
        assert_eq!(SkeletonGraph::openpose().dimensionality, 2);
        assert_eq!(SkeletonGraph::blazepose().joint_count, 33);
        assert_eq!(SkeletonGraph::blazepose().dimensionality, 3);
    }

    #[test]
    fn two_node_path_normalized_adjacency() {
        let graph = SkeletonGraph::chain(2, 3).unwrap();
        let adj = build_normalized_adjacency(&graph).unwrap();
        let expected = array![[0.5, 0.5], [0.5, 0.5]];
        for (a, b) in adj.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn normalized_adjacency_properties() {
        for graph in [
            SkeletonGraph::kinect_v2(),
            SkeletonGraph::openpose(),
            SkeletonGraph::blazepose(),
            SkeletonGraph::chain(7, 3).unwrap(),
        ] {
            let adj = build_normalized_adjacency(&graph).unwrap();
            let n = graph.joint_count;
            assert_eq!(adj.shape(), &[n, n]);
            for i in 0..n {
                for j in 0..n {
                    assert!((adj[[i, j]] - adj[[j, i]]).abs() < 1e-12);
                    assert!(adj[[i, j]] >= 0.0 && adj[[i, j]] <= 1.0);
                }
            }
            let radius = spectral_radius(&adj);
            assert!(radius <= 1.0 + 1e-9, "spectral radius {radius}");
            // D^{-1/2}(A+I)D^{-1/2} of a connected graph has eigenvalue exactly 1.
            assert!(radius >= 1.0 - 1e-6, "spectral radius {radius}");
        }
    }

    #[test]
    fn disconnected_graph_rejected() {
        let graph = SkeletonGraph {
            format_id: FormatId::Custom,
            joint_count: 4,
            dimensionality: 3,
            edges: vec![(0, 1), (2, 3)],
            joint_names: (0..4).map(|j| format!("joint_{j}")).collect(),
            root_joint: 0,
            torso: TorsoSpan::Joints(0, 1),
        };
        let err = graph.validate().unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn duplicate_and_self_edges_rejected() {
        assert!(SkeletonGraph::custom(3, 3, vec![(0, 1), (1, 0), (1, 2)], 0).is_err());
        assert!(SkeletonGraph::custom(3, 3, vec![(0, 0), (1, 2)], 0).is_err());
    }

    #[test]
    fn torso_length_midpoints() {
        let graph = SkeletonGraph::blazepose();
        let mut frame = Array2::<f64>::zeros((33, 3));
        // Hips at y=0, shoulders at y=2: midpoint distance 2.
        frame[[11, 1]] = 2.0;
        frame[[12, 1]] = 2.0;
        frame[[11, 0]] = -1.0;
        frame[[12, 0]] = 1.0;
        frame[[23, 0]] = -1.0;
        frame[[24, 0]] = 1.0;
        let len = graph.torso_length(frame.view());
        assert!((len - 2.0).abs() < 1e-12);
    }

    #[test]
    fn format_round_trip() {
        for id in [FormatId::KinectV2, FormatId::Openpose, FormatId::Blazepose, FormatId::Custom] {
            let s = id.as_str();
            assert_eq!(s.parse::<FormatId>().unwrap(), id);
        }
        assert!("kinect".parse::<FormatId>().is_err());
    }
}
