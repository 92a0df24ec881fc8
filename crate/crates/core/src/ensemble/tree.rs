use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::feature_ranges;
use crate::scalar::Scalar;

/// One node of an isolation tree, stored in a flat arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub enum Node<S> {
    Internal {
        feature: usize,
        split: S,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Index of the leaf within its tree; the model adds the tree's offset.
        local_id: usize,
        depth: usize,
        sample_count: usize,
    },
}

/// Random axis-parallel partition of the feature space.
///
/// Points with `x[feature] < split` go left, everything else goes right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct IsolationTree<S> {
    nodes: Vec<Node<S>>,
    parents: Vec<Option<usize>>,
    leaf_nodes: Vec<usize>,
    sample_range: Vec<(S, S)>,
}

impl<S: Scalar> IsolationTree<S> {
    /// Grows a tree over `sample` until every node holds a single point or only
    /// duplicates, or `max_depth` is reached.
    pub fn grow<R: Rng + ?Sized>(sample: &[&[S]], max_depth: Option<usize>, rng: &mut R) -> Self {
        assert!(!sample.is_empty(), "isolation tree needs at least one point");
        let dims = sample[0].len();
        let mut tree = IsolationTree {
            nodes: Vec::new(),
            parents: Vec::new(),
            leaf_nodes: Vec::new(),
            sample_range: feature_ranges(sample.iter().copied(), dims),
        };

        // (slot, parent, members, depth); left children are pushed last so they
        // are expanded first and receive the lower leaf ids.
        let mut work: Vec<(usize, Option<usize>, Vec<usize>, usize)> = Vec::new();
        tree.reserve_slot(None);
        work.push((0, None, (0..sample.len()).collect(), 0));

        while let Some((slot, parent, members, depth)) = work.pop() {
            tree.parents[slot] = parent;
            let capped = max_depth.is_some_and(|d| depth >= d);
            let split = if members.len() <= 1 || capped {
                None
            } else {
                choose_split(sample, &members, dims, rng)
            };
            match split {
                None => {
                    let local_id = tree.leaf_nodes.len();
                    tree.leaf_nodes.push(slot);
                    tree.nodes[slot] = Node::Leaf {
                        local_id,
                        depth,
                        sample_count: members.len(),
                    };
                }
                Some((feature, value)) => {
                    let (left, right): (Vec<usize>, Vec<usize>) =
                        members.into_iter().partition(|&i| sample[i][feature] < value);
                    let l = tree.reserve_slot(Some(slot));
                    let r = tree.reserve_slot(Some(slot));
                    tree.nodes[slot] = Node::Internal {
                        feature,
                        split: value,
                        left: l,
                        right: r,
                    };
                    work.push((r, Some(slot), right, depth + 1));
                    work.push((l, Some(slot), left, depth + 1));
                }
            }
        }
        tree
    }

    /// Builds a tree from explicit parts. Used by tests and hand-made models.
    pub fn from_nodes(nodes: Vec<Node<S>>, sample_range: Vec<(S, S)>) -> Self {
        let mut parents = vec![None; nodes.len()];
        let mut leaves: Vec<(usize, usize)> = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            match node {
                Node::Internal { left, right, .. } => {
                    parents[*left] = Some(i);
                    parents[*right] = Some(i);
                }
                Node::Leaf { local_id, .. } => leaves.push((*local_id, i)),
            }
        }
        leaves.sort();
        IsolationTree {
            nodes,
            parents,
            leaf_nodes: leaves.into_iter().map(|(_, n)| n).collect(),
            sample_range,
        }
    }

    fn reserve_slot(&mut self, parent: Option<usize>) -> usize {
        self.nodes.push(Node::Leaf {
            local_id: usize::MAX,
            depth: 0,
            sample_count: 0,
        });
        self.parents.push(parent);
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[Node<S>] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn sample_range(&self) -> &[(S, S)] {
        &self.sample_range
    }

    pub fn dims(&self) -> usize {
        self.sample_range.len()
    }

    /// Local id of the leaf containing `x`.
    pub fn leaf_for(&self, x: &[S]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Internal {
                    feature,
                    split,
                    left,
                    right,
                } => at = if x[*feature] < *split { *left } else { *right },
                Node::Leaf { local_id, .. } => return *local_id,
            }
        }
    }

    pub fn leaf_depth(&self, local_id: usize) -> usize {
        match &self.nodes[self.leaf_nodes[local_id]] {
            Node::Leaf { depth, .. } => *depth,
            Node::Internal { .. } => unreachable!("leaf table points at an internal node"),
        }
    }

    pub fn leaf_sample_count(&self, local_id: usize) -> usize {
        match &self.nodes[self.leaf_nodes[local_id]] {
            Node::Leaf { sample_count, .. } => *sample_count,
            Node::Internal { .. } => unreachable!("leaf table points at an internal node"),
        }
    }

    /// Half-open region `lo <= x < hi` of a leaf; sides never split stay infinite.
    pub fn leaf_region(&self, local_id: usize) -> Vec<(S, S)> {
        let mut region = vec![(S::neg_infinity(), S::infinity()); self.dims()];
        let mut child = self.leaf_nodes[local_id];
        while let Some(parent) = self.parents[child] {
            if let Node::Internal {
                feature, split, left, ..
            } = &self.nodes[parent]
            {
                let side = &mut region[*feature];
                if *left == child {
                    side.1 = side.1.min(*split);
                } else {
                    side.0 = side.0.max(*split);
                }
            }
            child = parent;
        }
        region
    }

    /// Checks structural invariants; returns a description of the first violation.
    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        if self.parents.len() != self.nodes.len() {
            return Err("parent table size mismatch".into());
        }
        for (local, &node) in self.leaf_nodes.iter().enumerate() {
            match self.nodes.get(node) {
                Some(Node::Leaf { local_id, .. }) if *local_id == local => {}
                _ => return Err(format!("leaf table entry {local} is inconsistent")),
            }
        }
        for node in &self.nodes {
            if let Node::Internal {
                feature, left, right, ..
            } = node
            {
                if *feature >= self.dims() || *left >= self.nodes.len() || *right >= self.nodes.len() {
                    return Err("internal node references out of range".into());
                }
            }
        }
        Ok(())
    }
}

/// Picks a feature uniformly among those that vary at this node, then a split
/// uniformly inside that feature's range. `None` when all members coincide.
fn choose_split<S: Scalar, R: Rng + ?Sized>(
    sample: &[&[S]],
    members: &[usize],
    dims: usize,
    rng: &mut R,
) -> Option<(usize, S)> {
    let ranges = feature_ranges(members.iter().map(|&i| sample[i]), dims);
    let varying: Vec<usize> = (0..dims).filter(|&f| ranges[f].0 < ranges[f].1).collect();
    if varying.is_empty() {
        return None;
    }
    let feature = varying[rng.random_range(0..varying.len())];
    let (lo, hi) = ranges[feature];
    loop {
        let u = S::of(rng.random::<f64>());
        let split = (lo + u * (hi - lo)).min(hi);
        // Both children must be non-empty: lo goes left, hi goes right.
        if split > lo {
            return Some((feature, split));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grow(points: &[Vec<f64>], seed: u64) -> IsolationTree<f64> {
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        IsolationTree::grow(&refs, None, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn single_point_is_single_leaf() {
        let t = grow(&[vec![1.0, 2.0]], 1);
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.leaf_depth(0), 0);
    }

    #[test]
    fn duplicates_stop_early() {
        let t = grow(&vec![vec![0.5, 0.5]; 10], 3);
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.leaf_sample_count(0), 10);
    }

    #[test]
    fn distinct_points_get_own_leaves() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let t = grow(&pts, 11);
        assert_eq!(t.leaf_count(), 20);
        let mut seen: Vec<usize> = pts.iter().map(|p| t.leaf_for(p)).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 20);
    }

    #[test]
    fn splits_lie_in_node_range_and_depth_counts_edges() {
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()])
            .collect();
        let t = grow(&pts, 5);
        t.validate().unwrap();
        for local in 0..t.leaf_count() {
            // Depth equals the number of parent hops to the root.
            let mut hops = 0;
            let mut at = t.leaf_nodes[local];
            while let Some(p) = t.parents[at] {
                hops += 1;
                at = p;
            }
            assert_eq!(hops, t.leaf_depth(local));
        }
        for p in &pts {
            let leaf = t.leaf_for(p);
            let region = t.leaf_region(leaf);
            for (f, &(lo, hi)) in region.iter().enumerate() {
                assert!(lo <= p[f] && p[f] < hi);
            }
        }
    }

    #[test]
    fn depth_cap_is_respected() {
        let pts: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let t = IsolationTree::grow(&refs, Some(3), &mut ChaCha8Rng::seed_from_u64(0));
        assert!((0..t.leaf_count()).all(|l| t.leaf_depth(l) <= 3));
    }
}
