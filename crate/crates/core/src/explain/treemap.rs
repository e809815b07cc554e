//! Nested squarified treemap of a map hierarchy.
//!
//! Every map is a box split among its neurons with area proportional to the
//! neuron's hit count (floored at a small share of the map box). A branch
//! neuron's box holds its child map, inset by a margin.

use crate::ghsom::GhsomTree;
use crate::map::MapId;
use serde::{Deserialize, Serialize};

/// Smallest share of a map box given to any neuron.
pub const AREA_FLOOR: f64 = 0.002;
/// Inset of a child map inside its branch box, as a share of the box's
/// shorter side.
pub const CHILD_INSET: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains(&self, o: &Rect, eps: f64) -> bool {
        o.x >= self.x - eps && o.y >= self.y - eps && o.x + o.w <= self.x + self.w + eps && o.y + o.h <= self.y + self.h + eps
    }

    /// Area of the intersection with `o`.
    pub fn overlap(&self, o: &Rect) -> f64 {
        let w = (self.x + self.w).min(o.x + o.w) - self.x.max(o.x);
        let h = (self.y + self.h).min(o.y + o.h) - self.y.max(o.y);
        w.max(0.0) * h.max(0.0)
    }

    fn inset(&self, frac: f64) -> Rect {
        let pad = frac * self.w.min(self.h);
        Rect::new(self.x + pad, self.y + pad, self.w - 2.0 * pad, self.h - 2.0 * pad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Benign,
    Malicious,
    Branch,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapBox {
    pub map_id: MapId,
    pub depth: usize,
    pub parent: Option<(MapId, usize)>,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronBox {
    pub map_id: MapId,
    pub neuron: usize,
    pub depth: usize,
    pub hit_count: usize,
    pub class: CellClass,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreemapLayout {
    pub width: f64,
    pub height: f64,
    /// Maps in depth-first pre-order.
    pub maps: Vec<MapBox>,
    pub neurons: Vec<NeuronBox>,
}

impl TreemapLayout {
    pub fn map_box(&self, id: MapId) -> Option<&MapBox> {
        self.maps.iter().find(|m| m.map_id == id)
    }
}

pub fn treemap_layout(tree: &GhsomTree, width: f64, height: f64) -> TreemapLayout {
    let mut out = TreemapLayout { width, height, maps: Vec::new(), neurons: Vec::new() };
    place(tree, tree.root_id(), None, 0, Rect::new(0.0, 0.0, width, height), &mut out);
    out
}

fn place(tree: &GhsomTree, id: MapId, parent: Option<(MapId, usize)>, depth: usize, rect: Rect, out: &mut TreemapLayout) {
    let map = tree.map(id).expect("tree maps are linked");
    out.maps.push(MapBox { map_id: id, depth, parent, rect });
    let hits: Vec<usize> = map.neurons().iter().map(|n| n.hit_count).collect();
    let shares = floored_shares(&hits, AREA_FLOOR);
    let areas: Vec<f64> = shares.iter().map(|s| s * rect.area()).collect();
    let rects = squarify(&areas, rect);
    for (n, r) in map.neurons().iter().zip(rects) {
        let class = match (n.child_map_id, n.label) {
            (Some(_), _) => CellClass::Branch,
            (None, Some(crate::Label::Benign)) => CellClass::Benign,
            (None, Some(crate::Label::Malicious)) => CellClass::Malicious,
            (None, None) => CellClass::Unlabeled,
        };
        out.neurons.push(NeuronBox { map_id: id, neuron: n.id, depth, hit_count: n.hit_count, class, rect: r });
        if let Some(c) = n.child_map_id {
            place(tree, c, Some((id, n.id)), depth + 1, r.inset(CHILD_INSET), out);
        }
    }
}

/// Shares proportional to `hits` summing to 1, none below `floor`.
///
/// Floored entries get exactly `floor`; the rest split the remainder in
/// proportion to their hits. With more entries than `1/floor` the floor is
/// lowered to an equal split.
pub fn floored_shares(hits: &[usize], floor: f64) -> Vec<f64> {
    let n = hits.len();
    if n == 0 {
        return Vec::new();
    }
    let floor = floor.min(1.0 / n as f64);
    let mut floored = vec![false; n];
    loop {
        let k = floored.iter().filter(|f| **f).count();
        let rest = 1.0 - k as f64 * floor;
        let free_hits: usize = (0..n).filter(|&i| !floored[i]).map(|i| hits[i]).sum();
        let free = n - k;
        let shares: Vec<f64> = (0..n)
            .map(|i| {
                if floored[i] {
                    floor
                } else if free_hits == 0 {
                    rest / free as f64
                } else {
                    rest * hits[i] as f64 / free_hits as f64
                }
            })
            .collect();
        let mut changed = false;
        for i in 0..n {
            if !floored[i] && shares[i] < floor {
                floored[i] = true;
                changed = true;
            }
        }
        if !changed {
            return shares;
        }
    }
}

/// Squarified treemap: lays `areas` (summing to `rect.area()`) into `rect`,
/// returning one rectangle per input in input order.
pub fn squarify(areas: &[f64], rect: Rect) -> Vec<Rect> {
    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&a, &b| areas[b].total_cmp(&areas[a]));
    let mut out = vec![Rect::default(); areas.len()];
    let mut rest = rect;
    let mut row: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let side = rest.w.min(rest.h);
        let idx = order[i];
        let mut candidate = row.clone();
        candidate.push(idx);
        if row.is_empty() || worst(&candidate, areas, side) <= worst(&row, areas, side) {
            row = candidate;
            i += 1;
        } else {
            rest = lay_row(&row, areas, rest, false, &mut out);
            row.clear();
        }
    }
    if !row.is_empty() {
        lay_row(&row, areas, rest, true, &mut out);
    }
    out
}

fn worst(row: &[usize], areas: &[f64], side: f64) -> f64 {
    let s: f64 = row.iter().map(|&i| areas[i]).sum();
    let (lo, hi) = row.iter().fold((f64::INFINITY, 0f64), |(lo, hi), &i| (lo.min(areas[i]), hi.max(areas[i])));
    let s2 = s * s;
    let side2 = side * side;
    (side2 * hi / s2).max(s2 / (side2 * lo))
}

/// Places `row` along the shorter side of `rest` and returns what is left.
/// The last row absorbs rounding so the boxes tile `rest` exactly.
fn lay_row(row: &[usize], areas: &[f64], rest: Rect, last: bool, out: &mut [Rect]) -> Rect {
    let s: f64 = row.iter().map(|&i| areas[i]).sum();
    if rest.w >= rest.h {
        let w = if last { rest.w } else { (s / rest.h).min(rest.w) };
        let mut y = rest.y;
        for (k, &i) in row.iter().enumerate() {
            let h = if k + 1 == row.len() { rest.y + rest.h - y } else { areas[i] / s * rest.h };
            out[i] = Rect::new(rest.x, y, w, h);
            y += h;
        }
        Rect::new(rest.x + w, rest.y, rest.w - w, rest.h)
    } else {
        let h = if last { rest.h } else { (s / rest.w).min(rest.h) };
        let mut x = rest.x;
        for (k, &i) in row.iter().enumerate() {
            let w = if k + 1 == row.len() { rest.x + rest.w - x } else { areas[i] / s * rest.w };
            out[i] = Rect::new(x, rest.y, w, h);
            x += w;
        }
        Rect::new(rest.x, rest.y + h, rest.w, rest.h - h)
    }
}
