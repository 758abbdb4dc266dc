mod common;

use common::{naive_mean, naive_var, rng, track, uniform_vec, walk};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use trackdiff_core::analysis::{
    detect_anomalies, residual_runs, score_candidate, stat_diff, synth_pair, topk_similar, RankedMatch, SynthPairSpec,
};
use trackdiff_core::metrics::{compare_tracks, ss_upper_bound, MetricConfig};
use trackdiff_core::stats::{t_two_sided_p, welch_t_test};
use trackdiff_core::{ChannelSeries, Error, MonitorItemSet, Track};

fn candidates(seed: u64, n: usize) -> (Track, Vec<Track>) {
    let mut r = rng(seed);
    let target = track("target", vec![walk(&mut r, "p", 300), walk(&mut r, "q", 300)]);
    let cands = (0..n)
        .map(|i| {
            let mut t = track(&format!("c{i:03}"), vec![walk(&mut r, "p", 200 + i * 3), walk(&mut r, "q", 250)]);
            t.dr_refs = vec![format!("DR-{i}")];
            t
        })
        .collect();
    (target, cands)
}

#[test]
fn topk_matches_compare_all_then_sort() {
    let items = MonitorItemSet::new(&["p", "q"]).unwrap();
    let cfg = MetricConfig::default();
    let (target, cands) = candidates(30, 50);
    let got = topk_similar(&target, &cands, 10, &items, &cfg).unwrap();
    let mut oracle: Vec<(f64, String)> = cands
        .iter()
        .map(|c| (compare_tracks(&target, c, &items, &cfg).unwrap().aggregate_ss, c.track_id.clone()))
        .collect();
    oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let ids: Vec<&str> = got.iter().map(|m| m.track_id.as_str()).collect();
    let want: Vec<&str> = oracle[..10].iter().map(|(_, id)| id.as_str()).collect();
    assert_eq!(ids, want);
    for m in &got {
        assert_eq!(m.dr_refs, vec![format!("DR-{}", m.track_id[1..].parse::<usize>().unwrap())]);
    }
}

#[test]
fn topk_truncation_copy_and_shuffle_stability() {
    let items = MonitorItemSet::new(&["p", "q"]).unwrap();
    let cfg = MetricConfig::default();
    let (target, mut cands) = candidates(31, 3);
    assert_eq!(topk_similar(&target, &cands, 10, &items, &cfg).unwrap().len(), 3);
    let mut copy = target.clone();
    copy.track_id = "zz-copy".into();
    cands.push(copy);
    cands.push(target.clone());
    let ranked = topk_similar(&target, &cands, 10, &items, &cfg).unwrap();
    assert_eq!(ranked.len(), 4, "the target itself is excluded");
    assert_eq!(ranked[0].track_id, "zz-copy");
    assert_eq!(ranked[0].aggregate_ss, 1.0);
    let mut r = rng(32);
    for _ in 0..5 {
        cands.shuffle(&mut r);
        assert_eq!(topk_similar(&target, &cands, 10, &items, &cfg).unwrap(), ranked);
    }
    assert!(topk_similar(&target, &[], 10, &items, &cfg).unwrap().is_empty());
    assert!(topk_similar(&target, &cands, 0, &items, &cfg).is_err());
}

#[test]
fn topk_ties_break_by_id() {
    let items = MonitorItemSet::new(&["p"]).unwrap();
    let cfg = MetricConfig::default();
    let mut r = rng(33);
    let target = track("t", vec![walk(&mut r, "p", 100)]);
    let mut cands: Vec<Track> = ["b", "c", "a"]
        .iter()
        .map(|id| {
            let mut c = target.clone();
            c.track_id = id.to_string();
            c
        })
        .collect();
    cands.push(track("x", vec![walk(&mut r, "p", 100)]));
    let ids: Vec<String> = topk_similar(&target, &cands, 3, &items, &cfg).unwrap().into_iter().map(|m| m.track_id).collect();
    assert_eq!(ids, ["a", "b", "c"]);
}

#[test]
fn dtw_free_bound_is_never_below_the_score() {
    let items = MonitorItemSet::new(&["p", "q"]).unwrap();
    let mut cfg = MetricConfig::default().with_k(2.5);
    cfg.channel_weights.insert("q".into(), 3.0);
    let (target, cands) = candidates(34, 200);
    for c in &cands {
        let ub = ss_upper_bound(&target, c, &items, &cfg).unwrap();
        let b = compare_tracks(&target, c, &items, &cfg).unwrap();
        assert!(ub >= b.aggregate_ss, "{}: {ub} < {}", c.track_id, b.aggregate_ss);
        assert!((ub - (b.aggregate_pc - b.aggregate_ed / cfg.k)).abs() < 1e-12, "{}", c.track_id);
    }
}

#[test]
fn pruned_ranking_equals_full_ranking_for_every_k() {
    let items = MonitorItemSet::new(&["p", "q", "r"]).unwrap();
    let cfg = MetricConfig::default();
    let mut r = rng(35);
    let target = track("t", vec![walk(&mut r, "p", 150), walk(&mut r, "q", 150), walk(&mut r, "r", 150)]);
    let mut cands = Vec::new();
    for i in 0..40 {
        let mut c = track(&format!("c{i:02}"), vec![walk(&mut r, "p", 120), walk(&mut r, "q", 160)]);
        if i % 3 == 0 {
            // Near-copies of the target compete at the top.
            c = target.clone();
            c.track_id = format!("c{i:02}");
            for ch in &mut c.channels {
                for v in &mut ch.values {
                    *v += 0.3 * r.random::<f64>();
                }
            }
        }
        if i % 7 == 0 {
            c.channels.truncate(1);
        }
        cands.push(c);
    }
    cands.push(track("disjoint", vec![walk(&mut r, "zz", 50)]));
    let mut full: Vec<RankedMatch> =
        cands.iter().filter_map(|c| score_candidate(&target, c, &items, &cfg).unwrap()).collect();
    full.sort_by(|a, b| b.aggregate_ss.partial_cmp(&a.aggregate_ss).unwrap().then(a.track_id.cmp(&b.track_id)));
    assert_eq!(full.len(), 40);
    for k in 1..=45 {
        let got = topk_similar(&target, &cands, k, &items, &cfg).unwrap();
        assert_eq!(got, full[..k.min(40)].to_vec(), "k = {k}");
    }
}

#[test]
fn anomalies_identical_tracks() {
    let mut r = rng(34);
    let t = track("t", vec![walk(&mut r, "p", 500)]);
    let items = MonitorItemSet::new(&["p"]).unwrap();
    assert!(detect_anomalies(&t, &t, 3.0, 5, &items, &MetricConfig::default()).unwrap().is_empty());
}

#[test]
fn anomalies_injected_spike() {
    let items = MonitorItemSet::new(&["p"]).unwrap();
    let cfg = MetricConfig::default();
    for seed in 0..5 {
        let mut r = rng(40 + seed);
        let n = 1000;
        let reference = track("r", vec![ChannelSeries::uniform("p", 1.0, vec![2.0; n])]);
        let start = r.random_range(100..800);
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let z: f64 = r.sample(StandardNormal);
                2.0 + 0.01 * z + if (start..start + 20).contains(&i) { 0.1 } else { 0.0 }
            })
            .collect();
        let target = track("t", vec![ChannelSeries::uniform("p", 1.0, values)]);
        let found = detect_anomalies(&target, &reference, 3.0, 5, &items, &cfg).unwrap();
        assert_eq!(found.len(), 1, "{found:?}");
        let a = &found[0];
        assert!(a.start_index <= start + 2 && a.end_index >= start + 18, "{a:?} vs {start}");
        assert!(a.severity >= 3.0 && a.mean_residual <= a.severity);
        assert!(a.start_t < a.end_t);
        assert_eq!(a.start_t, a.start_index as f64);
    }
}

#[test]
fn anomalies_small_noise_is_quiet() {
    let items = MonitorItemSet::new(&["p"]).unwrap();
    let cfg = MetricConfig::default();
    for seed in 0..5 {
        let mut r = rng(50 + seed);
        let base: Vec<f64> = (0..800).map(|i| (i as f64 / 60.0).sin()).collect();
        let sd = naive_var(&base).sqrt();
        let noisy: Vec<f64> = base.iter().map(|v| v + 0.1 * sd * r.random_range(-1.0..1.0)).collect();
        let reference = track("r", vec![ChannelSeries::uniform("p", 1.0, base)]);
        let target = track("t", vec![ChannelSeries::uniform("p", 1.0, noisy)]);
        assert!(detect_anomalies(&target, &reference, 3.0, 5, &items, &cfg).unwrap().is_empty());
    }
}

#[test]
fn anomaly_arguments_and_shared_channels() {
    let mut r = rng(35);
    let a = track("a", vec![walk(&mut r, "p", 50)]);
    let b = track("b", vec![walk(&mut r, "q", 50)]);
    let items = MonitorItemSet::new(&["p", "q"]).unwrap();
    let cfg = MetricConfig::default();
    assert!(matches!(detect_anomalies(&a, &b, 3.0, 5, &items, &cfg), Err(Error::NoSharedChannels)));
    assert!(detect_anomalies(&a, &a, 0.0, 5, &items, &cfg).is_err());
    assert!(detect_anomalies(&a, &a, 3.0, 0, &items, &cfg).is_err());
}

#[test]
fn residual_runs_are_disjoint_and_long_enough() {
    let mut r = rng(36);
    for _ in 0..300 {
        let n = r.random_range(1..200);
        let res = uniform_vec(&mut r, n, 0.0, 5.0);
        let min_run = r.random_range(1..8);
        let runs = residual_runs(&res, 3.0, min_run);
        for w in runs.windows(2) {
            assert!(w[0].1 < w[1].0);
        }
        for &(s, e) in &runs {
            assert!(e - s >= min_run && e <= n);
            assert!(res[s] > 3.0 && res[e - 1] > 3.0);
        }
        // Every qualifying raw run lies inside some output interval.
        let mut i = 0;
        while i < n {
            if res[i] > 3.0 {
                let s = i;
                while i < n && res[i] > 3.0 {
                    i += 1;
                }
                if i - s >= min_run {
                    assert!(runs.iter().any(|&(a, b)| a <= s && i <= b));
                }
            } else {
                i += 1;
            }
        }
    }
}

/// Two-sided p by Simpson integration of the Student t density over `[0, |t|]`.
fn p_by_quadrature(t: f64, dof: f64) -> f64 {
    let c = (libm::lgamma((dof + 1.0) / 2.0) - libm::lgamma(dof / 2.0)).exp() / (dof * std::f64::consts::PI).sqrt();
    let f = |x: f64| c * (1.0 + x * x / dof).powf(-(dof + 1.0) / 2.0);
    let steps = 20_000;
    let h = t.abs() / steps as f64;
    let mut s = f(0.0) + f(t.abs());
    for i in 1..steps {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    1.0 - 2.0 * s * h / 3.0
}

#[test]
fn stat_diff_matches_quadrature_oracle() {
    let mut r = rng(37);
    let items = MonitorItemSet::new(&["p", "q"]).unwrap();
    for _ in 0..40 {
        let (na, nb) = (r.random_range(3..60), r.random_range(3..60));
        let shift = r.random_range(-1.5..1.5);
        let a = track(
            "a",
            vec![
                ChannelSeries::uniform("p", 1.0, uniform_vec(&mut r, na, -1.0, 1.0)),
                ChannelSeries::uniform("q", 1.0, uniform_vec(&mut r, na, 0.0, 3.0)),
            ],
        );
        let b = track(
            "b",
            vec![
                ChannelSeries::uniform("p", 1.0, uniform_vec(&mut r, nb, -1.0 + shift, 1.0 + shift)),
                ChannelSeries::uniform("q", 1.0, uniform_vec(&mut r, nb, 0.0, 1.0)),
            ],
        );
        let rep = stat_diff(&a, &b, &items).unwrap();
        for name in ["p", "q"] {
            let (x, y) = (&a.channel(name).unwrap().values, &b.channel(name).unwrap().values);
            let (va, vb) = (naive_var(x) / x.len() as f64, naive_var(y) / y.len() as f64);
            let t = (naive_mean(x) - naive_mean(y)) / (va + vb).sqrt();
            let dof = (va + vb).powi(2) / (va * va / (x.len() - 1) as f64 + vb * vb / (y.len() - 1) as f64);
            let d = rep.per_channel[name];
            assert!((d.t_stat - t).abs() < 1e-9 * (1.0 + t.abs()));
            assert!((d.dof - dof).abs() < 1e-9 * dof);
            assert!((d.p_value - p_by_quadrature(t, dof)).abs() < 1e-6, "{} vs {}", d.p_value, p_by_quadrature(t, dof));
            assert!((0.0..=1.0).contains(&d.p_value));
        }
        let swapped = stat_diff(&b, &a, &items).unwrap();
        for name in ["p", "q"] {
            assert!((swapped.per_channel[name].t_stat + rep.per_channel[name].t_stat).abs() < 1e-12);
            assert!((swapped.per_channel[name].p_value - rep.per_channel[name].p_value).abs() < 1e-12);
        }
    }
}

#[test]
fn stat_diff_examples() {
    let mut r = rng(38);
    let a = track("a", vec![walk(&mut r, "p", 100)]);
    let items = MonitorItemSet::new(&["p"]).unwrap();
    let same = stat_diff(&a, &a, &items).unwrap().per_channel["p"];
    assert_eq!((same.t_stat, same.p_value), (0.0, 1.0));
    // Equal variances, 10 vs 10: Welch dof collapses to 18.
    let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let y: Vec<f64> = (0..10).map(|i| 3.0 + i as f64).collect();
    assert!((welch_t_test(&x, &y).dof - 18.0).abs() < 1e-12);
    let c = track("c", vec![walk(&mut r, "z", 10)]);
    assert!(matches!(stat_diff(&a, &c, &items), Err(Error::NoSharedChannels)));
}

#[test]
fn p_value_decreases_with_abs_t() {
    for dof in [1.0, 2.5, 18.0, 200.0] {
        let mut prev = 1.0;
        for i in 1..200 {
            let p = t_two_sided_p(i as f64 * 0.1, dof);
            assert!(p <= prev);
            assert_eq!(p, t_two_sided_p(-(i as f64) * 0.1, dof));
            prev = p;
        }
    }
}

#[test]
fn synth_pair_correlation_regimes() {
    let items = MonitorItemSet::default();
    let cfg = MetricConfig::default();
    for seed in 0..20 {
        let (a, b) = synth_pair(&SynthPairSpec { length: 1000, snr: 100.0, correlated: true, seed });
        assert!(compare_tracks(&a, &b, &items, &cfg).unwrap().aggregate_pc > 0.95);
        let (a, b) = synth_pair(&SynthPairSpec { length: 1000, snr: 3.0, correlated: false, seed });
        assert!(compare_tracks(&a, &b, &items, &cfg).unwrap().aggregate_pc.abs() < 0.3);
        assert_eq!(a.channels.len(), 7);
    }
}
