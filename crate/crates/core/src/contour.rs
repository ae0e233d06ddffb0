//! Contour approximation: univariate k-means over voiced f0 points, maximal
//! same-cluster runs as line segments, and signed rank differences as the
//! discrete symbol alphabet.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pitch::PitchTrack;
use crate::scalar::Scalar;

/// Unvoiced gaps longer than this split a track into separate contours.
pub const GAP_MAX_S: f64 = 0.150;
/// Default cluster count per utterance.
pub const DEFAULT_K: usize = 8;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering1D<S> {
    /// Strictly increasing centroids.
    pub centroids: Vec<S>,
    /// Point index -> cluster rank (index into `centroids`).
    pub assignment: Vec<usize>,
    /// Effective cluster count (may be below the request when the input has
    /// fewer distinct values).
    pub k: usize,
    pub requested_k: usize,
    /// Largest |point - centroid| over all points.
    pub max_within_radius: S,
}

impl<S: Scalar> Clustering1D<S> {
    pub fn within_cluster_variance(&self, values: &[S]) -> S {
        let mut acc = S::zero();
        for (i, &v) in values.iter().enumerate() {
            let d = v - self.centroids[self.assignment[i]];
            acc = acc + d * d;
        }
        acc
    }
}

fn nearest_centroid<S: Scalar>(centroids: &[S], v: S) -> usize {
    let mut best = 0;
    let mut best_d = (v - centroids[0]).abs();
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d = (v - c).abs();
        // Strict < keeps ties on the lower centroid.
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// One Lloyd run to convergence. Returns (centroids, objective).
/// Empty clusters are re-seeded with the point farthest from its centroid.
fn lloyd<S: Scalar>(values: &[S], mut centroids: Vec<S>, max_iter: usize) -> (Vec<S>, S) {
    let n = values.len();
    let mut assignment = vec![0usize; n];
    let mut prev_objective = S::infinity();
    let mut objective = S::infinity();
    for _ in 0..max_iter {
        let mut changed = false;
        objective = S::zero();
        for (i, &v) in values.iter().enumerate() {
            let j = nearest_centroid(&centroids, v);
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
            let d = v - centroids[j];
            objective = objective + d * d;
        }
        // Within-cluster variance never increases across iterations.
        assert!(
            objective <= prev_objective + S::from_f64(1e-9),
            "k-means objective increased: {prev_objective} -> {objective}"
        );
        prev_objective = objective;

        let mut sums = vec![S::zero(); centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (i, &v) in values.iter().enumerate() {
            sums[assignment[i]] = sums[assignment[i]] + v;
            counts[assignment[i]] += 1;
        }
        for j in 0..centroids.len() {
            if counts[j] > 0 {
                centroids[j] = sums[j] / S::from_usize(counts[j]);
            } else {
                let far = values
                    .iter()
                    .enumerate()
                    .max_by(|(ia, a), (ib, b)| {
                        let da = (**a - centroids[assignment[*ia]]).abs();
                        let db = (**b - centroids[assignment[*ib]]).abs();
                        da.partial_cmp(&db).unwrap()
                    })
                    .map(|(_, &v)| v)
                    .unwrap();
                centroids[j] = far;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (centroids, objective)
}

/// Hill-climb on cluster boundaries over the sorted values: optimal 1D
/// clusters are contiguous, so shifting one boundary at a time by one point
/// escapes most Lloyd local minima. Returns the cluster means.
fn polish_boundaries<S: Scalar>(sorted: &[S], k: usize, centroids: &[S]) -> Vec<S> {
    let n = sorted.len();
    let mut pre = vec![S::zero(); n + 1];
    let mut pre2 = vec![S::zero(); n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        pre[i + 1] = pre[i] + v;
        pre2[i + 1] = pre2[i] + v * v;
    }
    let sse = |i: usize, j: usize| -> S {
        if j <= i {
            return S::zero();
        }
        let m = S::from_usize(j - i);
        let s = pre[j] - pre[i];
        (pre2[j] - pre2[i]) - s * s / m
    };
    // Boundaries from the current nearest-centroid assignment.
    let mut bounds = vec![0usize; k + 1];
    bounds[k] = n;
    let mut idx = 0usize;
    for b in 1..k {
        while idx < n && nearest_centroid(centroids, sorted[idx]) < b {
            idx += 1;
        }
        bounds[b] = idx;
    }
    let mut improved = true;
    while improved {
        improved = false;
        for b in 1..k {
            let lo = bounds[b - 1] + 1;
            let hi = bounds[b + 1].saturating_sub(1);
            if lo > hi {
                continue;
            }
            let current = sse(bounds[b - 1], bounds[b]) + sse(bounds[b], bounds[b + 1]);
            for cand in [bounds[b].saturating_sub(1), bounds[b] + 1] {
                if cand < lo || cand > hi || cand == bounds[b] {
                    continue;
                }
                let alt = sse(bounds[b - 1], cand) + sse(cand, bounds[b + 1]);
                if alt < current - S::from_f64(1e-12) {
                    bounds[b] = cand;
                    improved = true;
                    break;
                }
            }
        }
    }
    (0..k)
        .map(|c| {
            let (i, j) = (bounds[c], bounds[c + 1]);
            (pre[j] - pre[i]) / S::from_usize(j - i)
        })
        .collect()
}

/// Deterministic univariate k-means.
///
/// Lloyd's algorithm seeded at quantiles (i+0.5)/k of the sorted input, with
/// additional deterministic quantile-offset restarts and a boundary-shift
/// polish; the lowest-variance result wins.
pub fn kmeans_1d<S: Scalar>(values: &[S], k: usize, max_iter: usize) -> Result<Clustering1D<S>> {
    if k == 0 {
        return Err(Error::Clustering("k must be > 0".into()));
    }
    if values.len() < k {
        return Err(Error::Clustering(format!(
            "need at least k={k} values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Clustering("non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = sorted.clone();
    distinct.dedup();
    let requested_k = k;
    let k = k.min(distinct.len());
    let n = sorted.len();

    let quantile_seeds = |offset: f64| -> Vec<S> {
        let mut seeds: Vec<S> = (0..k)
            .map(|i| {
                let q = (i as f64 + offset) / k as f64;
                sorted[((q * n as f64) as usize).min(n - 1)]
            })
            .collect();
        seeds.dedup();
        for &d in &distinct {
            if seeds.len() == k {
                break;
            }
            if !seeds.contains(&d) {
                seeds.push(d);
            }
        }
        seeds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seeds
    };
    // Farthest-first traversal over distinct values.
    let farthest_seeds = || -> Vec<S> {
        let mut seeds = vec![distinct[0]];
        while seeds.len() < k {
            let far = distinct
                .iter()
                .max_by(|a, b| {
                    let da = seeds.iter().map(|&s| (**a - s).abs()).fold(S::infinity(), S::min);
                    let db = seeds.iter().map(|&s| (**b - s).abs()).fold(S::infinity(), S::min);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            seeds.push(*far);
        }
        seeds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seeds
    };

    // Exact seeding: the optimal clustering is a contiguous partition of the
    // sorted values, found by dynamic programming in O(k n^2). Used whenever
    // n is moderate; Lloyd from this seed is a fixed point (or better), so
    // the result is optimal in that regime.
    let dp_seeds = || -> Option<Vec<S>> {
        if n > 4096 {
            return None;
        }
        let mut pre = vec![0.0f64; n + 1];
        let mut pre2 = vec![0.0f64; n + 1];
        for i in 0..n {
            let v = Scalar::to_f64(sorted[i]);
            pre[i + 1] = pre[i] + v;
            pre2[i + 1] = pre2[i] + v * v;
        }
        let cost = |i: usize, j: usize| -> f64 {
            let m = (j - i) as f64;
            let s = pre[j] - pre[i];
            ((pre2[j] - pre2[i]) - s * s / m).max(0.0)
        };
        let mut dp = vec![vec![f64::INFINITY; n + 1]; k + 1];
        let mut cut = vec![vec![0usize; n + 1]; k + 1];
        dp[0][0] = 0.0;
        for c in 1..=k {
            for j in c..=n {
                for i in (c - 1)..j {
                    let cand = dp[c - 1][i] + cost(i, j);
                    if cand < dp[c][j] {
                        dp[c][j] = cand;
                        cut[c][j] = i;
                    }
                }
            }
        }
        let mut seeds = Vec::with_capacity(k);
        let mut j = n;
        for c in (1..=k).rev() {
            let i = cut[c][j];
            let mean = (pre[j] - pre[i]) / (j - i) as f64;
            seeds.push(S::from_f64(mean));
            j = i;
        }
        seeds.reverse();
        seeds.dedup();
        Some(seeds)
    };

    let mut best: Option<(Vec<S>, S)> = None;
    let mut inits = vec![
        quantile_seeds(0.5),
        quantile_seeds(0.25),
        quantile_seeds(0.75),
        farthest_seeds(),
    ];
    if let Some(seeds) = dp_seeds() {
        inits.push(seeds);
    }
    for init in inits {
        let (mut centroids, mut obj) = lloyd(values, init, max_iter);
        loop {
            let polished = polish_boundaries(&sorted, centroids.len(), &centroids);
            let (c2, o2) = lloyd(values, polished, max_iter);
            if o2 < obj - S::from_f64(1e-12) {
                centroids = c2;
                obj = o2;
            } else {
                break;
            }
        }
        if best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((centroids, obj));
        }
    }
    let centroids = best.unwrap().0;

    // Canonical order: sort centroids, drop exact duplicates, remap ranks.
    let mut sorted_centroids = centroids;
    sorted_centroids.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut final_centroids: Vec<S> = Vec::with_capacity(k);
    for &c in &sorted_centroids {
        if final_centroids.last() != Some(&c) {
            final_centroids.push(c);
        }
    }
    let mut assignment = vec![0usize; n];
    for (i, &v) in values.iter().enumerate() {
        assignment[i] = nearest_centroid(&final_centroids, v);
    }
    let mut max_within_radius = S::zero();
    for (i, &v) in values.iter().enumerate() {
        let d = (v - final_centroids[assignment[i]]).abs();
        if d > max_within_radius {
            max_within_radius = d;
        }
    }
    let k = final_centroids.len();
    Ok(Clustering1D {
        centroids: final_centroids,
        assignment,
        k,
        requested_k,
        max_within_radius,
    })
}

/// A maximal run of consecutive voiced frames in one cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub cluster_rank: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub n_points: usize,
}

/// Discrete contour: segments plus the signed rank differences between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub symbols: Vec<i32>,
    pub segments: Vec<Segment>,
    pub source_id: String,
}

impl Contour {
    /// Audio span covered by segments [i, i+m], inclusive.
    pub fn window_span(&self, i: usize, m: usize) -> (f64, f64) {
        (self.segments[i].start_s, self.segments[i + m].end_s)
    }
}

/// All contours of a track: voiced runs split at gaps > `gap_max_s`, with a
/// single per-utterance clustering shared by every run.
pub fn contours_from_track(
    track: &PitchTrack,
    k: usize,
    gap_max_s: f64,
) -> Result<Vec<Contour>> {
    let points = track.voiced_points();
    if points.is_empty() {
        return Err(Error::NoVoicedFrames {
            source_id: track.source_id.clone(),
        });
    }
    let values: Vec<f64> = points.iter().map(|&(_, f0)| f0).collect();
    let k_eff = k.min(values.len());
    let clustering = kmeans_1d(&values, k_eff, DEFAULT_MAX_ITER)?;

    let mut contours = Vec::new();
    let mut run_start = 0usize;
    for i in 0..=points.len() {
        let run_ends = i == points.len() || (i > 0 && points[i].0 - points[i - 1].0 > gap_max_s);
        if !run_ends {
            continue;
        }
        if i > run_start {
            contours.push(run_to_contour(
                &points[run_start..i],
                &clustering.assignment[run_start..i],
                &track.source_id,
            ));
        }
        run_start = i;
    }
    Ok(contours)
}

fn run_to_contour(points: &[(f64, f64)], ranks: &[usize], source_id: &str) -> Contour {
    let mut segments: Vec<Segment> = Vec::new();
    for (idx, (&(t, _), &rank)) in points.iter().zip(ranks).enumerate() {
        match segments.last_mut() {
            Some(seg) if seg.cluster_rank == rank => {
                seg.end_s = t;
                seg.n_points += 1;
            }
            _ => {
                let _ = idx;
                segments.push(Segment {
                    cluster_rank: rank,
                    start_s: t,
                    end_s: t,
                    n_points: 1,
                });
            }
        }
    }
    let symbols = segments
        .windows(2)
        .map(|w| w[1].cluster_rank as i32 - w[0].cluster_rank as i32)
        .collect();
    Contour {
        symbols,
        segments,
        source_id: source_id.to_string(),
    }
}

/// The longest contour of the track (ties: earliest).
pub fn approximate_contour(track: &PitchTrack, k: usize) -> Result<Contour> {
    let contours = contours_from_track(track, k, GAP_MAX_S)?;
    contours
        .into_iter()
        .max_by_key(|c| c.symbols.len())
        .ok_or_else(|| Error::NoVoicedFrames {
            source_id: track.source_id.clone(),
        })
}

/// Dump: one line per contour, `source_id<TAB>sym1,sym2,...<TAB>start:end;...`.
pub fn write_contours_tsv(contours: &[Contour], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for c in contours {
        let syms: Vec<String> = c.symbols.iter().map(|s| s.to_string()).collect();
        let spans: Vec<String> = c
            .segments
            .iter()
            .map(|s| format!("{:.3}:{:.3}", s.start_s, s.end_s))
            .collect();
        writeln!(w, "{}\t{}\t{}", c.source_id, syms.join(","), spans.join(";"))
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
