use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::{DetectionPoint, RangeDopplerMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanParams {
    /// Neighbourhood radius in bins.
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams { eps: 3.0, min_pts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<DetectionPoint>,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub peak_db: f64,
}

const UNVISITED: usize = usize::MAX;
const NOISE: usize = usize::MAX - 1;

/// Density clustering over (range bin, doppler bin) with a Euclidean metric.
/// Points are visited in (range, doppler) order so the result does not
/// depend on the order of `points`.
pub fn dbscan_cluster(points: &[DetectionPoint], params: &DbscanParams, map: &RangeDopplerMap) -> Vec<Cluster> {
    assert!(params.eps > 0.0 && params.min_pts >= 1);
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| {
        (a.range_bin, a.doppler_bin)
            .cmp(&(b.range_bin, b.doppler_bin))
            .then(a.power.total_cmp(&b.power))
    });

    let mut grid: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        grid.entry((p.range_bin, p.doppler_bin)).or_default().push(i);
    }
    let reach = params.eps.floor() as isize;
    let eps2 = params.eps * params.eps;
    let offsets: Vec<(isize, isize)> = (-reach..=reach)
        .flat_map(|a| (-reach..=reach).map(move |b| (a, b)))
        .filter(|&(a, b)| ((a * a + b * b) as f64) <= eps2)
        .collect();
    let neighbours = |i: usize| -> Vec<usize> {
        let (r, d) = (pts[i].range_bin as isize, pts[i].doppler_bin as isize);
        let mut out = Vec::new();
        for &(a, b) in &offsets {
            let (rr, dd) = (r + a, d + b);
            if rr < 0 || dd < 0 {
                continue;
            }
            if let Some(v) = grid.get(&(rr as usize, dd as usize)) {
                out.extend_from_slice(v);
            }
        }
        out
    };

    let mut label = vec![UNVISITED; pts.len()];
    let mut n_clusters = 0;
    for i in 0..pts.len() {
        if label[i] != UNVISITED {
            continue;
        }
        let seeds = neighbours(i);
        if seeds.len() < params.min_pts {
            label[i] = NOISE;
            continue;
        }
        let id = n_clusters;
        n_clusters += 1;
        label[i] = id;
        let mut queue = seeds;
        let mut k = 0;
        while k < queue.len() {
            let j = queue[k];
            k += 1;
            if label[j] == NOISE {
                label[j] = id;
            }
            if label[j] != UNVISITED {
                continue;
            }
            label[j] = id;
            let nb = neighbours(j);
            if nb.len() >= params.min_pts {
                queue.extend(nb);
            }
        }
    }

    let mut groups: Vec<Vec<DetectionPoint>> = vec![Vec::new(); n_clusters];
    for (i, &l) in label.iter().enumerate() {
        if l < n_clusters {
            groups[l].push(pts[i]);
        }
    }
    // A core point whose border neighbours were all claimed earlier can
    // leave a group below min_pts; such groups are dropped.
    groups
        .into_iter()
        .filter(|g| g.len() >= params.min_pts)
        .map(|members| {
            let (mut w, mut wr, mut wd, mut peak) = (0.0, 0.0, 0.0, f64::NEG_INFINITY);
            for m in &members {
                let a = m.power.sqrt();
                w += a;
                wr += a * m.range_bin as f64;
                wd += a * m.doppler_bin as f64;
                peak = peak.max(m.power);
            }
            let (cr, cd) = if w > 0.0 {
                (wr / w, wd / w)
            } else {
                let n = members.len() as f64;
                (
                    members.iter().map(|m| m.range_bin as f64).sum::<f64>() / n,
                    members.iter().map(|m| m.doppler_bin as f64).sum::<f64>() / n,
                )
            };
            Cluster {
                range_m: map.range_of(cr),
                velocity_mps: map.velocity_of(cd),
                peak_db: 10.0 * peak.log10(),
                members,
            }
        })
        .collect()
}
