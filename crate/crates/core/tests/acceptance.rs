//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! Criterion 8 needs the NSL-KDD files and only runs when both
//! `CLIDS_NSL_KDD_TRAIN` and `CLIDS_NSL_KDD_TEST` point at them
//! (`KDDTrain+.txt`, `KDDTest+.txt`); otherwise it is reported as SKIP.

use clids_core::data::{load_csv, Preprocessor, Schema};
use clids_core::eval::{benchmark, evaluate, metrics, ConfusionMatrix};
use clids_core::explain::treemap::AREA_FLOOR;
use clids_core::explain::{local_explanation, starburst, treemap_layout, u_matrix, TreemapLayout};
use clids_core::ghsom::{predict_ghsom, train_ghsom, GhsomParams, GhsomTree};
use clids_core::gsom::{growth_threshold, train_gsom, GsomParams};
use clids_core::map::{MapId, MapModel};
use clids_core::prune::{complexity_penalty, prune_tree, PruneParams};
use clids_core::som::{train_som, SomParams};
use clids_core::synth::{two_blobs, Hierarchy};
use clids_core::{FeatureMatrix, Label, LabelVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e <= limit, format!("{:.2}s of {}s", e.as_secs_f64(), limit.as_secs()))
}

// Closed-form reference values, evaluated independently in double precision:
// -7 ln 0.9 and sqrt((7 ln 100 + ln(1000/0.3)) / 50).
const GT_7_09: f64 = 0.7375236096047839;
const ALPHA_REF: f64 = 0.8983086260882137;

fn formula_fidelity() -> Outcome {
    let gt = growth_threshold(7, 0.9).unwrap();
    let alpha = complexity_penalty(2, 5, 100, 1000, 0.3, 50).unwrap();
    verdict(
        (gt - GT_7_09).abs() <= 1e-9 && (alpha - ALPHA_REF).abs() <= 1e-9,
        format!("GT(7,0.9)={gt:.12} (ref {GT_7_09:.12}), alpha={alpha:.12} (ref {ALPHA_REF:.12})"),
    )
}

// Brute-force references, written without the library's search loops.
fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

fn ranked(map: &MapModel, x: &[f64]) -> Vec<usize> {
    let mut ids: Vec<(f64, usize)> = map.neurons().iter().map(|n| (sq(&n.weights, x), n.id)).collect();
    ids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ids.into_iter().map(|p| p.1).collect()
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize, coarse: bool) -> Vec<f64> {
    (0..d)
        .map(|_| if coarse { rng.random_range(0..3) as f64 / 2.0 } else { rng.random::<f64>() })
        .collect()
}

fn random_map(rng: &mut ChaCha8Rng, id: MapId, d: usize, max_neurons: usize, coarse: bool) -> MapModel {
    let rows = rng.random_range(1..=20usize.min(max_neurons / 2));
    let cols = rng.random_range(2..=(max_neurons / rows).clamp(2, 20));
    let mut m = MapModel::grid(id, rows, cols, d, 0, |_| random_vec(rng, d, coarse)).unwrap();
    let weights: Vec<Vec<f64>> = m.neurons().iter().map(|n| n.weights.clone()).collect();
    let labels: Vec<Label> = (0..m.len()).map(|_| if rng.random::<bool>() { Label::Malicious } else { Label::Benign }).collect();
    // Label through the public API: one labelled sample per neuron at its own weights.
    let data = FeatureMatrix::from_rows(&weights).unwrap();
    m.assign_labels(&data, &LabelVector(labels)).unwrap();
    m
}

fn random_tree(rng: &mut ChaCha8Rng, d: usize, coarse: bool) -> GhsomTree {
    let mut maps = BTreeMap::new();
    let mut parent = BTreeMap::new();
    let mut next = 1u32;
    let mut frontier = vec![(MapId(0), 0usize)];
    maps.insert(MapId(0), random_map(rng, MapId(0), d, 60, coarse));
    while let Some((id, depth)) = frontier.pop() {
        if depth == 3 {
            continue;
        }
        let n = maps[&id].len();
        for neuron in 0..n {
            if rng.random::<f64>() < 0.15 {
                let child = MapId(next);
                next += 1;
                maps.insert(child, random_map(rng, child, d, 30, coarse));
                parent.insert(child, (id, neuron));
                frontier.push((child, depth + 1));
            }
        }
    }
    // Child links are public fields; rebuild each map with them set.
    let mut linked = BTreeMap::new();
    for (id, m) in &maps {
        let mut neurons = m.neurons().to_vec();
        for (c, (p, n)) in &parent {
            if p == id {
                neurons[*n].child_map_id = Some(*c);
            }
        }
        linked.insert(*id, MapModel::from_neurons(*id, d, 0, neurons).unwrap());
    }
    GhsomTree::from_parts(MapId(0), linked, parent).unwrap()
}

fn brute_descent(t: &GhsomTree, x: &[f64]) -> (Label, Vec<(MapId, usize)>) {
    let mut path = Vec::new();
    let mut cur = t.root_id();
    loop {
        let m = t.map(cur).unwrap();
        let b = ranked(m, x)[0];
        path.push((cur, b));
        match m.neuron(b).child_map_id {
            Some(c) => cur = c,
            None => return (m.neuron(b).label.unwrap(), path),
        }
    }
}

fn bmu_equivalence() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    let mut ties = 0;
    for case in 0..1000 {
        let d = rng.random_range(1..=20);
        let coarse = case % 3 == 0;
        let map = random_map(&mut rng, MapId(0), d, 400, coarse);
        let x = random_vec(&mut rng, d, coarse);
        let r = ranked(&map, &x);
        if sq(&map.neuron(r[0]).weights, &x) == sq(&map.neuron(r[1]).weights, &x) {
            ties += 1;
        }
        let (b, dist) = map.bmu(&x).unwrap();
        let ok_bmu = b == r[0] && dist == sq(&map.neuron(r[0]).weights, &x).sqrt();
        let ok_pair = map.bmu_pair(&x).unwrap() == (r[0], r[1]);
        let ok_flat = map.predict_flat(&x).unwrap() == map.neuron(r[0]).label.unwrap();
        let tree = random_tree(&mut rng, d, coarse);
        let (label, path) = brute_descent(&tree, &x);
        let p = predict_ghsom(&tree, &x).unwrap();
        let ok_tree = p.label == label && p.path == path;
        if !(ok_bmu && ok_pair && ok_flat && ok_tree) {
            mismatches += 1;
        }
    }
    let (fast, time) = within(t, Duration::from_secs(10));
    verdict(mismatches == 0 && fast, format!("1000 cases ({ties} with tied BMUs), {mismatches} mismatches, {time}"))
}

fn desk_classification() -> Outcome {
    let t = Instant::now();
    let (tr, trl) = two_blobs(1000, 0.08, 4.0, 31);
    let (te, tel) = two_blobs(400, 0.08, 4.0, 32);
    let mut som = train_som(&tr, &SomParams { seed: 1, ..Default::default() }).unwrap();
    som.assign_labels(&tr, &trl).unwrap();
    let mut gsom = train_gsom(&tr, &GsomParams { seed: 1, ..Default::default() }).unwrap().map;
    gsom.assign_labels(&tr, &trl).unwrap();
    let gp = GhsomParams { gsom: GsomParams { seed: 1, spread_factor: 0.3, ..Default::default() }, ..Default::default() };
    let ghsom = train_ghsom(&tr, &trl, &gp).unwrap().tree;
    let a_som = evaluate(&som, &te, &tel, 0.0).unwrap().accuracy;
    let a_gsom = evaluate(&gsom, &te, &tel, 0.0).unwrap().accuracy;
    let a_ghsom = evaluate(&ghsom, &te, &tel, 0.0).unwrap().accuracy;
    let (fast, time) = within(t, Duration::from_secs(60));
    verdict(
        a_som >= 0.90 && a_gsom >= 0.95 && a_ghsom >= 0.95 && fast,
        format!("SOM {a_som:.4} (>=0.90), GSOM {a_gsom:.4} (>=0.95), GHSOM {a_ghsom:.4} (>=0.95), {time}"),
    )
}

struct Pruned {
    tree: GhsomTree,
    pruned: GhsomTree,
    test: FeatureMatrix,
}

fn pruning_tradeoff() -> (Outcome, Pruned) {
    let t = Instant::now();
    let ((tr, trl), (te, tel)) = Hierarchy::default().train_test(4000, 10_000, 17);
    let gp = GhsomParams { gsom: GsomParams { seed: 17, spread_factor: 0.3, ..Default::default() }, ..Default::default() };
    let tree = train_ghsom(&tr, &trl, &gp).unwrap().tree;
    let (pruned, report) = prune_tree(&tree, &tr, &trl, &PruneParams { delta: 0.3 }).unwrap();
    let before = evaluate(&tree, &te, &tel, 0.0).unwrap().accuracy;
    let after = evaluate(&pruned, &te, &tel, 0.0).unwrap().accuracy;
    let drop_pts = 100.0 * (before - after);
    let (fast, time) = within(t, Duration::from_secs(300));
    let ok = report.maps_before >= 40 && report.reduction_percent() >= 50.0 && drop_pts <= 2.0 && fast;
    let detail = format!(
        "maps {} -> {} ({:.1}% reduction, >=50%), accuracy {before:.4} -> {after:.4} (drop {drop_pts:.2} pts, <=2), {time}",
        report.maps_before,
        report.maps_after,
        report.reduction_percent()
    );
    (verdict(ok, detail), Pruned { tree, pruned, test: te })
}

fn latency_ordering(p: &Pruned) -> Outcome {
    let full = benchmark(&p.tree, &p.test, 3).unwrap();
    let small = benchmark(&p.pruned, &p.test, 3).unwrap();
    verdict(
        small.median_ms <= full.median_ms,
        format!(
            "median per-sample {:.6} ms pruned vs {:.6} ms unpruned over {} samples",
            small.median_ms, full.median_ms, full.samples
        ),
    )
}

fn treemap_checks(layout: &TreemapLayout, tree: &GhsomTree) -> Result<(), String> {
    for mb in &layout.maps {
        let cells: Vec<_> = layout.neurons.iter().filter(|n| n.map_id == mb.map_id).collect();
        let total: usize = cells.iter().map(|c| c.hit_count).sum();
        let floor = AREA_FLOOR.min(1.0 / cells.len() as f64) * mb.rect.area();
        for c in &cells {
            if !mb.rect.contains(&c.rect, 1e-6) {
                return Err(format!("cell {}/{} escapes its map", mb.map_id, c.neuron));
            }
            if c.rect.area() < floor * (1.0 - 1e-9) {
                return Err(format!("cell {}/{} below floor", mb.map_id, c.neuron));
            }
        }
        for (i, a) in cells.iter().enumerate() {
            for b in &cells[i + 1..] {
                if a.rect.overlap(&b.rect) > 1e-6 * mb.rect.area() {
                    return Err(format!("cells overlap in map {}", mb.map_id));
                }
                // Proportionality among cells the floor did not touch.
                let unfloored = |h: usize| total > 0 && h as f64 / total as f64 > 2.0 * AREA_FLOOR;
                if unfloored(a.hit_count) && unfloored(b.hit_count) {
                    let want = a.hit_count as f64 / b.hit_count as f64;
                    let got = a.rect.area() / b.rect.area();
                    if (got / want - 1.0).abs() > 0.01 {
                        return Err(format!("area ratio {got} vs hit ratio {want} in map {}", mb.map_id));
                    }
                }
            }
        }
        if let Some((pm, pn)) = mb.parent {
            let cell = layout.neurons.iter().find(|n| n.map_id == pm && n.neuron == pn).unwrap();
            if !cell.rect.contains(&mb.rect, 1e-6) {
                return Err(format!("map {} escapes its branch cell", mb.map_id));
            }
        }
    }
    if layout.maps.len() != tree.network_size() {
        return Err("treemap is missing maps".into());
    }
    Ok(())
}

fn explanation_suite(p: &Pruned) -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures: Vec<String> = Vec::new();
    for case in 0..1000 {
        let d = rng.random_range(1..=20);
        let map = random_map(&mut rng, MapId(0), d, 100, case % 4 == 0);
        let x = random_vec(&mut rng, d, false);
        let e = local_explanation(&map, &x).unwrap();
        let b = ranked(&map, &x)[0];
        let xs: Vec<f64> = x.iter().zip(&map.neuron(b).weights).map(|(a, w)| (a - w).abs()).collect();
        let s_max = e.significance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let argmax: Vec<usize> = (0..d).filter(|&f| e.significance[f] == s_max).collect();
        let argmin: Vec<usize> = (0..d).filter(|&f| xs[f] == x_min).collect();
        let degenerate = xs.iter().all(|v| *v == xs[0]);
        if e.bmu != b || e.distances != xs || e.significance.iter().any(|s| !(0.0..=1.0).contains(s)) || (!degenerate && argmax != argmin) {
            failures.push(format!("local case {case}"));
        }

        let u = u_matrix(&map);
        for (i, cell) in u.cells.iter().enumerate() {
            let me = map.neuron(i);
            let near: Vec<f64> = map
                .neurons()
                .iter()
                .filter(|o| (o.coord.row - me.coord.row).abs() + (o.coord.col - me.coord.col).abs() == 1)
                .map(|o| sq(&o.weights, &me.weights).sqrt())
                .collect();
            let naive = if near.is_empty() { 0.0 } else { near.iter().sum::<f64>() / near.len() as f64 };
            if cell.value < 0.0 || (cell.value - naive).abs() > 1e-12 {
                failures.push(format!("u-matrix case {case} neuron {i}"));
            }
        }
        let s = starburst(&map, &u);
        for start in 0..map.len() {
            let mut seen = vec![false; map.len()];
            let mut i = start;
            while s.next[i] != i {
                if seen[i] {
                    failures.push(format!("starburst cycle in case {case}"));
                    break;
                }
                seen[i] = true;
                i = s.next[i];
            }
        }
    }
    for tree in [&p.tree, &p.pruned] {
        if let Err(e) = treemap_checks(&treemap_layout(tree, 1600.0, 1000.0), tree) {
            failures.push(e);
        }
    }
    for seed in 0..20 {
        let tree = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), 3, false);
        let mut maps = BTreeMap::new();
        for (id, m) in tree.maps() {
            let mut neurons = m.neurons().to_vec();
            for n in &mut neurons {
                n.hit_count = rng.random_range(0..400);
            }
            maps.insert(*id, MapModel::from_neurons(*id, 3, 0, neurons).unwrap());
        }
        let tree = GhsomTree::from_parts(tree.root_id(), maps, tree.parents().clone()).unwrap();
        if let Err(e) = treemap_checks(&treemap_layout(&tree, 1200.0, 800.0), &tree) {
            failures.push(format!("random tree {seed}: {e}"));
        }
    }
    let (fast, time) = within(t, Duration::from_secs(30));
    let first = failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default();
    verdict(
        failures.is_empty() && fast,
        format!("1000 local/U-matrix/starburst cases + 22 treemaps, {} failures{first}, {time}", failures.len()),
    )
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    let draw = |rng: &mut ChaCha8Rng| if rng.random::<f64>() < 0.2 { 0 } else { rng.random_range(0..5000u64) };
    for _ in 0..10_000 {
        let c = ConfusionMatrix { tp: draw(&mut rng), fp: draw(&mut rng), tn: draw(&mut rng), fn_: draw(&mut rng) };
        let m = metrics(&c);
        let n = c.tp + c.fp + c.tn + c.fn_;
        let u = m.undefined;
        // Each identity holds as an exact rational; both sides are the
        // correctly rounded quotient of the same integers.
        let q = |a: u64, b: u64| a as f64 / b as f64;
        let flags_ok = u.accuracy == (n == 0)
            && u.precision == (c.tp + c.fp == 0)
            && u.recall == (c.tp + c.fn_ == 0)
            && u.fpr == (c.fp + c.tn == 0)
            && u.fnr == (c.fn_ + c.tp == 0)
            && u.f1 == (2 * c.tp + c.fp + c.fn_ == 0);
        let acc_ok = n == 0 || m.accuracy == q(n - c.fp - c.fn_, n);
        let f1_ok = if c.tp == 0 {
            m.f1 == 0.0
        } else {
            m.f1 == q(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
                && (m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() <= 4.0 * f64::EPSILON
        };
        let fpr_ok = c.fp + c.tn == 0 || m.fpr == q(c.fp, c.fp + c.tn);
        let fnr_ok = c.fn_ + c.tp == 0 || (m.fnr == q(c.fn_, c.fn_ + c.tp) && (m.fnr + m.recall - 1.0).abs() <= f64::EPSILON);
        if !(flags_ok && acc_ok && f1_ok && fpr_ok && fnr_ok) {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("10000 random confusion matrices, {bad} violations"))
}

fn nsl_kdd_reproduction() -> Outcome {
    let (Some(train), Some(test)) = (std::env::var_os("CLIDS_NSL_KDD_TRAIN"), std::env::var_os("CLIDS_NSL_KDD_TEST")) else {
        return Outcome::Skip("set CLIDS_NSL_KDD_TRAIN and CLIDS_NSL_KDD_TEST to run".into());
    };
    let t = Instant::now();
    let schema = Schema::nsl_kdd();
    let raw_tr = load_csv(&train, &schema).unwrap();
    let raw_te = load_csv(&test, &schema).unwrap();
    let all: Vec<usize> = (0..raw_tr.len()).collect();
    let pre = Preprocessor::fit(&raw_tr, &all).unwrap();
    let (tr, trl) = pre.transform(&raw_tr).unwrap();
    let (te, tel) = pre.transform(&raw_te).unwrap();
    let mut gsom = train_gsom(&tr, &GsomParams::default()).unwrap().map;
    gsom.assign_labels(&tr, &trl).unwrap();
    let a_gsom = evaluate(&gsom, &te, &tel, 0.0).unwrap().accuracy;
    let ghsom = train_ghsom(&tr, &trl, &GhsomParams::default()).unwrap().tree;
    let a_ghsom = evaluate(&ghsom, &te, &tel, 0.0).unwrap().accuracy;
    let sig = clids_core::data::feature_significance(&tr).unwrap();
    let g = clids_core::explain::global_explanation(&sig, tr.feature_names()).unwrap();
    let mut top: Vec<&str> = g.top(3).collect();
    top.sort_unstable();
    let top_ok = top == ["dst_bytes", "dst_host_count", "src_bytes"];
    verdict(
        (a_ghsom - 0.982).abs() <= 0.03 && (a_gsom - 0.967).abs() <= 0.03 && top_ok,
        format!(
            "GHSOM {a_ghsom:.4} (0.982±0.03, {} maps), GSOM {a_gsom:.4} (0.967±0.03), top-3 {top:?}, {:.0}s",
            ghsom.network_size(),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        let (tag, detail) = match o {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n} [{tag}] {name}: {detail}");
    };
    report(1, "formula fidelity", formula_fidelity());
    report(2, "BMU oracle equivalence", bmu_equivalence());
    report(3, "desk-scale classification", desk_classification());
    let (o4, pruned) = pruning_tradeoff();
    report(4, "pruning trade-off", o4);
    report(5, "latency ordering", latency_ordering(&pruned));
    report(6, "explanation invariants", explanation_suite(&pruned));
    report(7, "metric identities", metric_identities());
    report(8, "NSL-KDD reproduction (optional)", nsl_kdd_reproduction());
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
