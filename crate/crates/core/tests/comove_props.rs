use econodiag::comove::*;
use econodiag::series::{SeriesKind, TimeSeries};
use econodiag::synth::{gen_white, Gaussian};
use proptest::prelude::*;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i:02}")).collect()
}

fn white_panel(k: usize, n: usize, seed: u64) -> Panel {
    let raw: Vec<TimeSeries> = (0..k)
        .map(|i| {
            gen_white(n, seed * 100 + i as u64, 1.0)
                .unwrap()
                .relabel(format!("s{i:02}"))
        })
        .collect();
    align(&raw).unwrap()
}

/// Random symmetric matrix with zero diagonal and distinct positive entries.
fn random_distances(n: usize, seed: u64) -> DistanceMatrix {
    let mut g = Gaussian::new(seed);
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            v[i][j] = 0.1 + g.uniform();
            v[j][i] = v[i][j];
        }
    }
    DistanceMatrix::from_values(labels(n), v).unwrap()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    sab / (saa * sbb).sqrt()
}

#[test]
fn hand_computed_correlation() {
    let t: Vec<f64> = (1..=8).map(f64::from).collect();
    let a = TimeSeries::new(
        "a",
        t.clone(),
        vec![1.0, 2.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0],
        SeriesKind::Return,
    )
    .unwrap();
    let b = TimeSeries::new(
        "b",
        t,
        vec![2.0, 1.0, 3.0, 5.0, 4.0, 7.0, 6.0, 8.0],
        SeriesKind::Return,
    )
    .unwrap();
    let p = align(&[a, b]).unwrap();
    let c = corr_matrix(&p, (1.0, 8.0)).unwrap();
    // sums: Sab = 32, Saa = Sbb = 42
    assert!((c.entries[0][1].unwrap() - 32.0 / 42.0).abs() < 1e-12);
    let d = to_distance(&c);
    assert!((d.entries[1][0].unwrap() - (2.0f64 * (1.0 - 32.0 / 42.0)).sqrt()).abs() < 1e-12);
}

#[test]
fn correlation_matches_naive_pearson() {
    let p = white_panel(5, 300, 7);
    let c = corr_matrix(&p, (50.0, 250.0)).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let want = pearson(
                &p.series[i].values()[49..250],
                &p.series[j].values()[49..250],
            );
            assert!((c.entries[i][j].unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn triangle_inequality() {
    let p = white_panel(12, 400, 3);
    let d = to_distance(&corr_matrix(&p, (1.0, 400.0)).unwrap());
    let e = |i: usize, j: usize| d.entries[i][j].unwrap();
    let mut g = Gaussian::new(99);
    for _ in 0..1000 {
        let mut pick = || (g.uniform() * 12.0) as usize;
        let (i, j, k) = (pick(), pick(), pick());
        assert!(e(i, k) <= e(i, j) + e(j, k) + 1e-12);
    }
}

#[test]
fn identical_members_are_at_zero_distance() {
    let base = gen_white(200, 1, 1.0).unwrap();
    let raw: Vec<TimeSeries> = (0..4)
        .map(|i| base.clone().relabel(format!("c{i}")))
        .collect();
    let p = align(&raw).unwrap();
    let traj = rolling_mean_distance(&p, 50, 25).unwrap();
    assert!(traj
        .iter()
        .all(|t| t.mean_distance == Some(0.0) && t.n_pairs == 6));
}

#[test]
fn uncorrelated_panel_sits_near_sqrt_two() {
    let mut means = Vec::new();
    for seed in 0..50 {
        let p = white_panel(6, 256, seed);
        let traj = rolling_mean_distance(&p, 256, 1).unwrap();
        assert_eq!(traj.len(), 1);
        means.push(traj[0].mean_distance.unwrap());
    }
    let m = means.iter().sum::<f64>() / means.len() as f64;
    assert!((m - 2f64.sqrt()).abs() < 0.1, "{m}");
    assert!(means.iter().all(|v| (v - 2f64.sqrt()).abs() < 0.1));
}

#[test]
fn common_factor_lowers_distance() {
    // first half independent, second half driven by a shared factor
    let n = 600;
    let common = gen_white(n, 500, 1.0).unwrap();
    let raw: Vec<TimeSeries> = (0..5)
        .map(|i| {
            let own = gen_white(n, 600 + i, 1.0).unwrap();
            let v = (0..n)
                .map(|k| {
                    if k < n / 2 {
                        own.values()[k]
                    } else {
                        common.values()[k] + 0.3 * own.values()[k]
                    }
                })
                .collect();
            own.map_values(v, SeriesKind::Return)
                .unwrap()
                .relabel(format!("m{i}"))
        })
        .collect();
    let p = align(&raw).unwrap();
    let traj = rolling_mean_distance(&p, 100, 50).unwrap();
    let first = traj.first().unwrap().mean_distance.unwrap();
    let last = traj.last().unwrap().mean_distance.unwrap();
    assert!(first > 1.2 && last < 0.5, "{first} -> {last}");
}

/// Single-linkage merge heights equal the sorted minimum-spanning-tree edges.
fn kruskal(d: &DistanceMatrix) -> Vec<f64> {
    let n = d.labels.len();
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((d.entries[i][j].unwrap(), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut out = Vec::new();
    for (w, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            out.push(w);
        }
    }
    out
}

#[test]
fn single_linkage_matches_spanning_tree() {
    for seed in 0..20 {
        let d = random_distances(9, seed);
        let tree = hierarchical_cluster(&d, Linkage::Single).unwrap();
        let heights: Vec<f64> = tree.merges.iter().map(|m| m.height).collect();
        assert_eq!(heights, kruskal(&d));
        assert_eq!(tree.merges.last().unwrap().size, 9);
    }
}

/// Exhaustive single linkage on five leaves: at each step try every pair of
/// current clusters.
#[test]
fn five_leaf_brute_force() {
    let d = random_distances(5, 42);
    let e = |i: usize, j: usize| d.entries[i][j].unwrap();
    let mut clusters: Vec<Vec<usize>> = (0..5).map(|i| vec![i]).collect();
    let mut heights = Vec::new();
    let mut sets = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let h = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| e(i, j))
                    .fold(f64::INFINITY, f64::min);
                if h < best.0 {
                    best = (h, a, b);
                }
            }
        }
        let cb = clusters.remove(best.2);
        let mut ca = clusters.remove(best.1);
        ca.extend(cb);
        ca.sort_unstable();
        heights.push(best.0);
        sets.push(ca.clone());
        clusters.push(ca);
    }
    let tree = hierarchical_cluster(&d, Linkage::Single).unwrap();
    // rebuild member sets from the merge ids
    let mut members: Vec<Vec<usize>> = (0..5).map(|i| vec![i]).collect();
    for (k, m) in tree.merges.iter().enumerate() {
        let mut s = members[m.a].clone();
        s.extend(&members[m.b]);
        s.sort_unstable();
        assert_eq!(s, sets[k]);
        assert_eq!(m.height, heights[k]);
        members.push(s);
    }
}

#[test]
fn masked_matrix_is_refused() {
    let t: Vec<f64> = (1..=10).map(f64::from).collect();
    let flat = TimeSeries::new("flat", t.clone(), vec![1.0; 10], SeriesKind::Return).unwrap();
    let other = gen_white(10, 1, 1.0).unwrap().relabel("w");
    let p = align(&[flat, other]).unwrap();
    let c = corr_matrix(&p, (1.0, 10.0)).unwrap();
    assert_eq!(c.degenerate, vec!["flat".to_string()]);
    let d = to_distance(&c);
    assert!(d.is_masked());
    assert_eq!(d.mean_off_diagonal(), (None, 0));
    assert!(hierarchical_cluster(&d, Linkage::Single).is_err());
    assert!(d.to_csv().lines().nth(1).unwrap().starts_with("flat,,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permutation_equivariance(seed in 0u64..1000, rot in 1usize..6) {
        let p = white_panel(6, 120, seed);
        let perm: Vec<usize> = (0..6).map(|i| (i + rot) % 6).collect();
        let q = Panel {
            labels: perm.iter().map(|&i| p.labels[i].clone()).collect(),
            series: perm.iter().map(|&i| p.series[i].clone()).collect(),
            dropped: perm.iter().map(|&i| p.dropped[i]).collect(),
        };
        let dp = to_distance(&corr_matrix(&p, (1.0, 120.0)).unwrap());
        let dq = to_distance(&corr_matrix(&q, (1.0, 120.0)).unwrap());
        for a in 0..6 {
            for b in 0..6 {
                prop_assert_eq!(dq.entries[a][b], dp.entries[perm[a]][perm[b]]);
            }
        }
        let tp = hierarchical_cluster(&dp, Linkage::Single).unwrap();
        let tq = hierarchical_cluster(&dq, Linkage::Single).unwrap();
        let heights = |t: &LinkageTree| t.merges.iter().map(|m| m.height).collect::<Vec<_>>();
        prop_assert_eq!(heights(&tp), heights(&tq));
        let (mp, mq) = (dp.mean_off_diagonal().0.unwrap(), dq.mean_off_diagonal().0.unwrap());
        prop_assert!((mp - mq).abs() < 1e-12);
    }
}
