//! U-matrix heights and the starburst basin overlay.

use crate::map::{euclidean, Coord, MapId, MapModel};
use serde::{Deserialize, Serialize};

/// One value per neuron, aligned with the neuron's lattice coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell<T> {
    pub id: usize,
    pub coord: Coord,
    pub value: T,
}

pub(crate) fn cells<T>(map: &MapModel, mut f: impl FnMut(usize) -> T) -> Vec<Cell<T>> {
    map.neurons().iter().map(|n| Cell { id: n.id, coord: n.coord, value: f(n.id) }).collect()
}

/// Mean weight-space distance from each neuron to its occupied orthogonal
/// neighbours; 0 for a neuron without neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UMatrix {
    pub map_id: MapId,
    pub cells: Vec<Cell<f64>>,
}

impl UMatrix {
    pub fn heights(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.value).collect()
    }
}

pub fn u_matrix(map: &MapModel) -> UMatrix {
    let cells = cells(map, |id| {
        let w = &map.neuron(id).weights;
        let (sum, k) = map
            .neighbors_of(id)
            .fold((0.0, 0usize), |(s, k), j| (s + euclidean(w, &map.neuron(j).weights), k + 1));
        if k == 0 {
            0.0
        } else {
            sum / k as f64
        }
    });
    UMatrix { map_id: map.map_id(), cells }
}

/// Steepest-descent pointers over U-matrix heights.
///
/// `next[i]` is the strictly lowest neighbour of `i` when it is lower than
/// `i` itself (ties to the lowest id), else `i`. Heights strictly decrease
/// along pointers, so the graph is a forest rooted at local minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Starburst {
    pub next: Vec<usize>,
    /// Id of the local minimum each neuron drains into.
    pub cluster: Vec<usize>,
}

impl Starburst {
    pub fn cluster_count(&self) -> usize {
        self.next.iter().enumerate().filter(|(i, n)| *i == **n).count()
    }
}

pub fn starburst(map: &MapModel, u: &UMatrix) -> Starburst {
    let h = u.heights();
    let next: Vec<usize> = (0..h.len())
        .map(|i| {
            let mut best = i;
            let mut neigh: Vec<usize> = map.neighbors_of(i).collect();
            neigh.sort_unstable();
            for j in neigh {
                if h[j] < h[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    let cluster = (0..h.len())
        .map(|mut i| {
            while next[i] != i {
                i = next[i];
            }
            i
        })
        .collect();
    Starburst { next, cluster }
}
