//! Slow, direct reference implementations used to cross-check the library.
#![allow(dead_code)]

pub mod radiomics {
    use std::collections::BTreeMap;

    use plgg_core::radiomics::{DiscretizedRoi, DIRECTIONS};

    /// `(position, level)` of every ROI voxel.
    fn voxels(roi: &DiscretizedRoi) -> Vec<([isize; 3], u16)> {
        let [nx, ny, nz] = roi.dims;
        let mut out = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let l = roi.levels[x + nx * (y + ny * z)];
                    if l != 0 {
                        out.push(([x as isize, y as isize, z as isize], l));
                    }
                }
            }
        }
        out
    }

    fn delta(a: [isize; 3], b: [isize; 3]) -> [isize; 3] {
        [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
    }

    /// Co-occurrence counts from all ordered voxel pairs whose displacement
    /// is ±direction.
    pub fn glcm(roi: &DiscretizedRoi) -> Vec<Vec<f64>> {
        let ng = roi.ng as usize;
        let vs = voxels(roi);
        let mut out = vec![vec![0.0; ng * ng]; 13];
        for &(p, a) in &vs {
            for &(q, b) in &vs {
                let d = delta(p, q);
                for (k, dir) in DIRECTIONS.iter().enumerate() {
                    let neg = [-dir[0], -dir[1], -dir[2]];
                    if d == *dir || d == neg {
                        out[k][(a as usize - 1) * ng + b as usize - 1] += 1.0;
                    }
                }
            }
        }
        out
    }

    /// Runs found by walking every full grid line and splitting its level
    /// sequence into maximal equal segments.
    pub fn glrlm(roi: &DiscretizedRoi) -> Vec<BTreeMap<(u16, usize), f64>> {
        let dims = roi.dims.map(|d| d as isize);
        let inside = |p: [isize; 3]| (0..3).all(|a| p[a] >= 0 && p[a] < dims[a]);
        let level = |p: [isize; 3]| roi.levels[(p[0] + dims[0] * (p[1] + dims[1] * p[2])) as usize];
        let mut out = Vec::new();
        for dir in DIRECTIONS {
            let mut runs = BTreeMap::new();
            for z in 0..dims[2] {
                for y in 0..dims[1] {
                    for x in 0..dims[0] {
                        let start = [x, y, z];
                        if inside(delta(dir, start)) {
                            continue;
                        }
                        let mut line = Vec::new();
                        let mut p = start;
                        while inside(p) {
                            line.push(level(p));
                            p = [p[0] + dir[0], p[1] + dir[1], p[2] + dir[2]];
                        }
                        for chunk in line.chunk_by(|a, b| a == b) {
                            if chunk[0] != 0 {
                                *runs.entry((chunk[0], chunk.len())).or_insert(0.0) += 1.0;
                            }
                        }
                    }
                }
            }
            out.push(runs);
        }
        out
    }

    fn neighbours(a: [isize; 3], b: [isize; 3], connectivity: usize) -> bool {
        let d = delta(a, b).map(|v| v.abs());
        if d.iter().any(|&v| v > 1) || d == [0, 0, 0] {
            return false;
        }
        let manhattan: isize = d.iter().sum();
        match connectivity {
            6 => manhattan == 1,
            18 => manhattan <= 2,
            _ => true,
        }
    }

    /// Zones by union-find over all same-level neighbouring pairs.
    pub fn glszm(roi: &DiscretizedRoi, connectivity: usize) -> BTreeMap<(u16, usize), f64> {
        let vs = voxels(roi);
        let mut parent: Vec<usize> = (0..vs.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                if vs[i].1 == vs[j].1 && neighbours(vs[i].0, vs[j].0, connectivity) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut sizes: BTreeMap<usize, (u16, usize)> = BTreeMap::new();
        for i in 0..vs.len() {
            let r = find(&mut parent, i);
            sizes.entry(r).or_insert((vs[i].1, 0)).1 += 1;
        }
        let mut out = BTreeMap::new();
        for (_, key) in sizes {
            *out.entry(key).or_insert(0.0) += 1.0;
        }
        out
    }

    /// Dependence counts by comparing every voxel against all others.
    pub fn gldm(roi: &DiscretizedRoi, alpha: u16, connectivity: usize) -> BTreeMap<(u16, usize), f64> {
        let vs = voxels(roi);
        let mut out = BTreeMap::new();
        for &(p, a) in &vs {
            let d = vs.iter().filter(|&&(q, b)| neighbours(p, q, connectivity) && a.abs_diff(b) <= alpha).count();
            *out.entry((a, d)).or_insert(0.0) += 1.0;
        }
        out
    }

    /// Nonzero cells of a dense `(level − 1, col)` matrix keyed by
    /// `(level, col + offset)`.
    pub fn sparse(m: &plgg_core::radiomics::Matrix, offset: usize) -> BTreeMap<(u16, usize), f64> {
        let mut out = BTreeMap::new();
        for i in 0..m.rows {
            for j in 0..m.cols {
                if m.get(i, j) != 0.0 {
                    out.insert(((i + 1) as u16, j + offset), m.get(i, j));
                }
            }
        }
        out
    }

    /// Face-counting surface area of a binary mask with unit spacing.
    pub fn exposed_faces(inside: &[bool], dims: [usize; 3]) -> usize {
        let at = |x: isize, y: isize, z: isize| {
            x >= 0
                && y >= 0
                && z >= 0
                && (x as usize) < dims[0]
                && (y as usize) < dims[1]
                && (z as usize) < dims[2]
                && inside[x as usize + dims[0] * (y as usize + dims[1] * z as usize)]
        };
        let mut faces = 0;
        for z in 0..dims[2] as isize {
            for y in 0..dims[1] as isize {
                for x in 0..dims[0] as isize {
                    if !at(x, y, z) {
                        continue;
                    }
                    for d in [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]] {
                        faces += !at(x + d[0], y + d[1], z + d[2]) as usize;
                    }
                }
            }
        }
        faces
    }

    /// Random `n³` phantom with levels in `1..=ng_max` and roughly 70% fill.
    pub fn random_phantom<R: rand::Rng>(rng: &mut R, n: usize, ng_max: u16) -> DiscretizedRoi {
        loop {
            let levels: Vec<u16> = (0..n * n * n)
                .map(|_| if rng.random::<f64>() < 0.7 { rng.random_range(1..=ng_max) } else { 0 })
                .collect();
            if let Ok(roi) = DiscretizedRoi::from_levels([n; 3], [1.0; 3], levels) {
                return roi;
            }
        }
    }
}

pub mod shapley {
    use plgg_core::trees::{GbtModel, Node, Tree};

    /// Expected tree output when only features in `known` (bitmask) are
    /// observed; unknown splits average children by training cover.
    fn conditional(tree: &Tree, i: usize, x: &[f64], known: u32) -> f64 {
        match tree.nodes[i] {
            Node::Leaf { value, .. } => value,
            Node::Split { feature, threshold, left, right, cover, .. } => {
                if known & (1 << feature) != 0 {
                    conditional(tree, if x[feature] < threshold { left } else { right }, x, known)
                } else {
                    let (cl, cr) = (tree.nodes[left].cover(), tree.nodes[right].cover());
                    let (wl, wr) = if cover > 0.0 { (cl / cover, cr / cover) } else { (0.5, 0.5) };
                    wl * conditional(tree, left, x, known) + wr * conditional(tree, right, x, known)
                }
            }
        }
    }

    pub fn value(model: &GbtModel, x: &[f64], known: u32) -> f64 {
        let lr = model.params.learning_rate;
        model.base_margin + model.trees.iter().map(|t| lr * conditional(t, 0, x, known)).sum::<f64>()
    }

    /// Exact Shapley values by enumerating every coalition.
    pub fn exhaustive(model: &GbtModel, x: &[f64]) -> (Vec<f64>, f64) {
        let m = x.len();
        assert!(m <= 16);
        let values: Vec<f64> = (0..1u32 << m).map(|s| value(model, x, s)).collect();
        let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
        let mut phi = vec![0.0; m];
        for (j, p) in phi.iter_mut().enumerate() {
            for s in 0..1u32 << m {
                if s & (1 << j) != 0 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let w = fact(size) * fact(m - size - 1) / fact(m);
                *p += w * (values[(s | 1 << j) as usize] - values[s as usize]);
            }
        }
        (phi, values[0])
    }
}

pub mod tables {
    use plgg_core::fusion::{FeatureRow, Table};
    use plgg_core::labeling::Outcome;
    use plgg_core::trees::TrainingData;
    use rand::Rng;

    /// Random table whose label depends noisily on the first column.
    pub fn random_table<R: Rng>(rng: &mut R, n: usize, m: usize) -> Table {
        loop {
            let rows: Vec<FeatureRow> = (0..n)
                .map(|i| {
                    let values: Vec<f64> = (0..m).map(|_| (rng.random_range(0..20) as f64) / 4.0).collect();
                    let positive = values[0] + rng.random_range(-2.0..2.0) > 2.5;
                    FeatureRow {
                        case_id: format!("r{i}"),
                        values,
                        label: if positive { Outcome::Effective } else { Outcome::NotEffective },
                    }
                })
                .collect();
            let pos = rows.iter().filter(|r| r.label == Outcome::Effective).count();
            if pos > 0 && pos < n {
                let names = (0..m).map(|j| format!("x{j}")).collect();
                return Table::new(names, rows).unwrap();
            }
        }
    }

    pub fn training(table: &Table) -> TrainingData {
        TrainingData::from_table(table).unwrap()
    }
}

pub mod auc {
    /// Probability that a random positive outscores a random negative,
    /// counting ties as one half, by comparing every pair.
    pub fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    wins += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        wins / pairs
    }
}

pub mod selection {
    /// Top `k` indices by repeated linear scans: highest score, then smaller
    /// depth, then lower index.
    pub fn top_k(val: &[f64], depths: &[usize], k: usize) -> Vec<usize> {
        let mut taken = vec![false; val.len()];
        let mut out = Vec::new();
        for _ in 0..k.min(val.len()) {
            let mut best: Option<usize> = None;
            for i in 0..val.len() {
                if taken[i] {
                    continue;
                }
                best = match best {
                    None => Some(i),
                    Some(b) if val[i] > val[b] || (val[i] == val[b] && depths[i] < depths[b]) => Some(i),
                    keep => keep,
                };
            }
            let b = best.unwrap();
            taken[b] = true;
            out.push(b);
        }
        out
    }
}

pub mod cohorts {
    use plgg_core::eval::{CohortCase, CvConfig, ImageBranchConfig};
    use plgg_core::exec::Sequential;
    use plgg_core::image::TrainConfig;
    use plgg_core::radiomics::RadiomicsConfig;
    use plgg_core::synth::{generate_cohort, SynthConfig};

    /// Small synthetic cohort prepared for cross-validation.
    pub fn small(n: usize, effect: f64, seed: u64) -> Vec<CohortCase> {
        let cfg = SynthConfig { n_cases: n, grid: [24; 3], effect, seed, ..Default::default() };
        generate_cohort(&cfg, &Sequential)
            .unwrap()
            .iter()
            .map(|c| CohortCase::from_bundle(&c.bundle, c.record.clone(), &RadiomicsConfig::default(), true).unwrap())
            .collect()
    }

    /// Few candidates and epochs, so a whole run takes about a second.
    pub fn quick_config() -> CvConfig {
        CvConfig {
            n_candidates: 12,
            image: ImageBranchConfig::Baseline(TrainConfig { epochs: 20, learning_rate: 1e-3, ..Default::default() }),
            subsets: vec![],
            top_k: 3,
            ..Default::default()
        }
    }
}
