//! Acceptance gate. Each criterion prints one `PASS` or `FAIL` line; the
//! process exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use tatami_core::features::{dct1d, dctnd, default_block, lag_features, FeatureMatrix};
use tatami_core::interchange::{DetectionBox, EmbeddingTensor, Entity, IntervalAnnotation};
use tatami_core::model::logistic::{fit_standardization, standardize, Objective};
use tatami_core::model::stats::expand_state_counts;
use tatami_core::model::{conditional_distribution, evaluate_binary, predict, quantize_labels, train_logistic, Hyper};
use tatami_core::phase::{PhaseState, PhaseTriple};
use tatami_core::preannotate::{heuristic_phases, phase_heuristic, PreannotateConfig, SecondObservation};
use tatami_core::rng::Lcg;
use tatami_core::segment::{
    build_phase_timeline, compute_statistics, detect_matches, smooth_classes, MatchSegment, SceneSequence,
    SegmentConfig,
};
use tatami_core::synth::{generate, generate_scripted, Effort, MatchScript, SynthBundle, SynthConfig};
use tatami_core::timer::{derivative, interpolate_series, run_pause_segments, TimerConfig, TimerSeries};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.3} s, limit {limit_s} s", elapsed.as_secs_f64()),
    )
}

// Table 5 counts in no-match, paused, standing, ground order.
const LABEL_COUNTS: [usize; 4] = [132, 155, 106, 177];

fn label_accounting() -> Outcome {
    let t = Instant::now();
    // Spread the reference label counts over 19 clips of 30 s, write each
    // clip as runs of interval annotations, and quantize them back.
    let seconds = expand_state_counts(LABEL_COUNTS);
    let mut order: Vec<usize> = (0..seconds.len()).collect();
    Lcg::new(5).shuffle(&mut order);
    let mut total = Vec::new();
    for clip in 0..19 {
        let chunk: Vec<PhaseTriple> = order[clip * 30..(clip + 1) * 30].iter().map(|&i| seconds[i]).collect();
        let mut anns: Vec<IntervalAnnotation> = Vec::new();
        for (s, t) in chunk.iter().enumerate() {
            match anns.last_mut() {
                Some(a) if a.phase().unwrap() == *t && a.end_s == s as f64 => a.end_s += 1.0,
                _ => anns.push(IntervalAnnotation::new(
                    format!("clip{clip}"),
                    s as f64,
                    s as f64 + 1.0,
                    *t,
                )),
            }
        }
        let q = quantize_labels(&anns, 30).map_err(|e| e.to_string())?;
        check(q == chunk, format!("clip {clip} did not round trip"))?;
        total.extend(q);
    }
    let elapsed = t.elapsed();
    let mut counts = [0usize; 4];
    for t in &total {
        counts[t.state().index()] += 1;
    }
    check(total.len() == 570, format!("{} samples, expected 570", total.len()))?;
    check(counts == LABEL_COUNTS, format!("state counts {counts:?}"))?;
    within(elapsed, 1.0)?;
    Ok(format!(
        "19 clips x 30 s -> {} samples in {:.1} ms",
        total.len(),
        elapsed.as_secs_f64() * 1e3
    ))
}

fn conditional() -> Outcome {
    let d = conditional_distribution(&expand_state_counts(LABEL_COUNTS)).map_err(|e| e.to_string())?;
    let pa = d.p_active_given_match.ok_or("P(active|match) absent")?;
    let ps = d.p_standing_given_active.ok_or("P(standing|active) absent")?;
    let psm = d.p_standing_given_match.ok_or("P(standing|match) absent")?;
    check((d.p_match - 0.768).abs() <= 1e-3, format!("P(match) = {}", d.p_match))?;
    check((pa - 0.646).abs() <= 1e-3, format!("P(active|match) = {pa}"))?;
    check((ps - 0.375).abs() <= 1e-3, format!("P(standing|active) = {ps}"))?;
    // The reference 0.242 is not P(standing|active); it matches conditioning
    // on match instead.
    check((ps - 0.242).abs() > 0.1, "P(standing|active) unexpectedly near 0.242")?;
    check((psm - 0.242).abs() <= 1e-3, format!("P(standing|match) = {psm}"))?;
    Ok(format!(
        "P(match)={:.4} P(active|match)={pa:.4} P(standing|active)={ps:.4} (reference 0.242 = P(standing|match)={psm:.4})",
        d.p_match
    ))
}

fn naive_dct(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * n)).cos())
                .sum();
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale * sum
        })
        .collect()
}

fn dct_correctness() -> Outcome {
    let t = Instant::now();
    let mut rng = Lcg::new(17);
    let mut worst = 0.0f64;
    let mut worst_parseval = 0.0f64;
    for n in [1usize, 2, 3, 8, 720, 1024] {
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
            let fast = dct1d(&x).map_err(|e| e.to_string())?;
            let slow = naive_dct(&x);
            for (a, b) in fast.iter().zip(&slow) {
                worst = worst.max((a - b).abs());
            }
            let ex: f64 = x.iter().map(|v| v * v).sum();
            let ec: f64 = fast.iter().map(|v| v * v).sum();
            worst_parseval = worst_parseval.max((ex - ec).abs());
        }
    }
    check(worst <= 1e-9, format!("max deviation from direct sum {worst:e}"))?;
    check(worst_parseval <= 1e-9, format!("Parseval deviation {worst_parseval:e}"))?;

    let data: Vec<f64> = (0..720).map(|_| rng.next_f64()).collect();
    let tensor = EmbeddingTensor::new(vec![3, 12, 20], data).map_err(|e| e.to_string())?;
    let coeffs = dctnd(&tensor, &[2, 2, 2]).map_err(|e| e.to_string())?;
    check(
        coeffs.len() == 8,
        format!("[3,12,20] reduced to {} values", coeffs.len()),
    )?;
    let block = default_block(&[3, 12, 20], 8).map_err(|e| e.to_string())?;
    check(block == vec![2, 2, 2], format!("default block for k=8 is {block:?}"))?;
    let elapsed = t.elapsed();
    within(elapsed, 10.0)?;
    Ok(format!(
        "max |fast - direct| = {worst:.1e}, Parseval {worst_parseval:.1e}, 720 -> 8, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn random_problem(rng: &mut Lcg, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let truth: Vec<f64> = (0..d).map(|_| 4.0 * rng.next_f64() - 2.0).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|j| (3.0 * rng.next_f64() - 1.0) * (j + 1) as f64).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|r| {
            let z: f64 = r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + rng.next_f64() - 0.5;
            rng.next_f64() < 1.0 / (1.0 + (-z).exp())
        })
        .collect();
    (rows, labels)
}

fn optimizer() -> Outcome {
    let t = Instant::now();
    let mut rng = Lcg::new(23);
    let h = 1e-5;
    let mut worst_rel = 0.0f64;
    let mut monotone = true;
    for instance in 0..20 {
        let (n, d) = (30 + rng.below(50), 1 + rng.below(8));
        let (rows, labels) = random_problem(&mut rng, n, d);
        let scales = fit_standardization(&rows);
        let z: Vec<Vec<f64>> = rows.iter().map(|r| standardize(r, &scales)).collect();
        let y: Vec<f64> = labels.iter().map(|&b| b as u8 as f64).collect();
        let obj = Objective::new(&z, &y, 1e-2);
        let w: Vec<f64> = (0..d).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let b = rng.next_f64() - 0.5;
        let (_, gw, gb) = obj.loss_and_gradient(&w, b);
        let mut analytic = gw.clone();
        analytic.push(gb);
        let mut numeric = Vec::with_capacity(d + 1);
        for j in 0..=d {
            let eval = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < d {
                    w2[j] += delta;
                } else {
                    b2 += delta;
                }
                obj.loss(&w2, b2)
            };
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        worst_rel = worst_rel.max(diff / norm);

        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            if let Ok((_, report)) = train_logistic(&rows, &labels, "t", &Hyper::default()) {
                monotone &= report.losses.windows(2).all(|p| p[1] <= p[0]);
            }
        } else {
            return Err(format!("instance {instance} is single-class"));
        }
    }
    check(worst_rel < 1e-6, format!("gradient relative error {worst_rel:e}"))?;
    check(monotone, "loss increased during training")?;

    let xs: Vec<f64> = (1..=20).map(|i| i as f64 * 0.25).collect();
    let rows: Vec<Vec<f64>> = xs.iter().flat_map(|&x| [vec![-x - 0.75], vec![x + 0.75]]).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r[0] > 0.0).collect();
    let (model, _) = train_logistic(&rows, &labels, "toy", &Hyper::default()).map_err(|e| e.to_string())?;
    let preds: Vec<bool> = predict(&model, &rows)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|p| p.label)
        .collect();
    let f1 = evaluate_binary(&preds, &labels)
        .map_err(|e| e.to_string())?
        .positive()
        .f1;
    check(f1 == 1.0, format!("separable toy train F1 {f1}"))?;
    let elapsed = t.elapsed();
    within(elapsed, 5.0)?;
    Ok(format!(
        "gradient rel. error {worst_rel:.1e}, losses non-increasing, toy F1 {f1}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn nine_stop_script() -> MatchScript {
    let efforts = [(25, 0), (18, 7), (30, 0), (12, 10), (27, 0), (20, 0), (15, 12), (24, 0)];
    MatchScript {
        intro_s: 6,
        efforts: efforts
            .iter()
            .map(|&(standing_s, ground_s)| Effort { standing_s, ground_s })
            .collect(),
        pauses: vec![9, 11, 8, 12, 10, 9, 10],
        outro_s: 7,
    }
}

fn match_pause_count(bundle: &SynthBundle, m: usize) -> Result<usize, String> {
    let truth = &bundle.truth.matches[m];
    let frames = &bundle.frames[truth.start_s as usize..truth.end_s as usize];
    let series =
        interpolate_series(&TimerSeries::from_records(frames, &TimerConfig::default())).map_err(|e| e.to_string())?;
    let d = derivative(&series).map_err(|e| e.to_string())?;
    Ok(run_pause_segments(&d).pause_count)
}

fn timer() -> Outcome {
    let script = nine_stop_script();
    let bundle = generate_scripted(&SynthConfig::default(), &[script]).map_err(|e| e.to_string())?;
    let pauses = match_pause_count(&bundle, 0)?;
    check(pauses == 9, format!("scripted match paused {pauses} times, expected 9"))?;

    let generated = generate(&SynthConfig {
        n_matches: 20,
        seed: 4,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    for (i, m) in generated.truth.matches.iter().enumerate() {
        let got = match_pause_count(&generated, i)?;
        check(
            got == m.pause_periods + 1,
            format!("match {i}: {got} stops, {} pause periods", m.pause_periods),
        )?;
    }

    let mut rng = Lcg::new(99);
    for case in 0..1000 {
        let n = 2 + rng.below(200);
        let readings: Vec<Option<u32>> = (0..n)
            .map(|_| (!rng.bernoulli(0.3)).then(|| rng.range_inclusive(0, 600)))
            .collect();
        let mut readings = readings;
        if readings.iter().all(Option::is_none) {
            readings[rng.below(n)] = Some(rng.range_inclusive(0, 600));
        }
        let raw = TimerSeries::from_readings(0.0, readings, &TimerConfig::default());
        let once = interpolate_series(&raw).map_err(|e| e.to_string())?;
        let twice = interpolate_series(&once).map_err(|e| e.to_string())?;
        check(once == twice, format!("case {case}: interpolation not idempotent"))?;
        let d = derivative(&once).map_err(|e| e.to_string())?;
        let sum: i64 = d.values.iter().map(|v| v.expect("complete series")).sum();
        let first = once.values[0].unwrap() as i64;
        let last = once.values[n - 1].unwrap() as i64;
        check(
            sum == last - first,
            format!("case {case}: derivative sum {sum} != {}", last - first),
        )?;
    }
    Ok(
        "scripted match stops 9 times; 20 generated matches stop pause_periods+1 times; 1000 fuzzed series ok"
            .to_string(),
    )
}

/// Fraction of ground-truth boundaries recovered within `tol` seconds, each
/// truth segment matched to the detected segment it overlaps most.
fn boundary_recall(truth: &[MatchSegment], found: &[MatchSegment], tol: f64) -> (usize, usize) {
    let mut hits = 0;
    for t in truth {
        let best = found
            .iter()
            .map(|f| (f, (t.end_s.min(f.end_s) - t.start_s.max(f.start_s)).max(0.0)))
            .filter(|(_, overlap)| *overlap > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((f, _)) = best {
            hits += ((f.start_s - t.start_s).abs() <= tol) as usize;
            hits += ((f.end_s - t.end_s).abs() <= tol) as usize;
        }
    }
    (hits, 2 * truth.len())
}

fn scene_sequence(bundle: &SynthBundle) -> Result<SceneSequence, String> {
    let (mut seqs, _) = SceneSequence::from_records(&bundle.frames).map_err(|e| e.to_string())?;
    check(seqs.len() == 1, "expected one video")?;
    Ok(seqs.remove(0))
}

fn segmentation() -> Outcome {
    let base = SynthConfig {
        n_matches: 50,
        seed: 2024,
        ..SynthConfig::default()
    };
    let cfg = SegmentConfig::default();

    let clean = generate(&base).map_err(|e| e.to_string())?;
    let seq = scene_sequence(&clean)?;
    let raw = detect_matches(&seq, &cfg).segments;
    check(raw == clean.truth.segments, "noiseless segments differ from truth")?;
    let smoothed = detect_matches(&smooth_classes(&seq, 5).map_err(|e| e.to_string())?, &cfg).segments;
    check(
        smoothed == clean.truth.segments,
        "noiseless smoothed segments differ from truth",
    )?;

    let plain = generate(&SynthConfig {
        overlay: false,
        ..base.clone()
    })
    .map_err(|e| e.to_string())?;
    let plain_found = detect_matches(&scene_sequence(&plain)?, &cfg).segments;
    check(
        plain_found == plain.truth.segments,
        "overlay-free segments differ from truth",
    )?;

    let noisy = generate(&SynthConfig {
        scene_flip_noise: 0.05,
        ..base.clone()
    })
    .map_err(|e| e.to_string())?;
    let t = Instant::now();
    let seq = scene_sequence(&noisy)?;
    let found = detect_matches(&smooth_classes(&seq, 5).map_err(|e| e.to_string())?, &cfg).segments;
    let elapsed = t.elapsed();
    let (hits, total) = boundary_recall(&noisy.truth.segments, &found, 3.0);
    let rate = hits as f64 / total as f64;
    check(rate >= 0.95, format!("{hits}/{total} boundaries within 3 s"))?;
    let hours = seq.len() as f64 / 3600.0;
    check(hours >= 1.0, format!("sequence only {hours:.2} h"))?;
    within(elapsed, 10.0)?;
    Ok(format!(
        "noiseless exact (overlay and plain), noisy {hits}/{total} = {:.1}% within 3 s over {hours:.1} h in {:.1} ms",
        rate * 100.0,
        elapsed.as_secs_f64() * 1e3
    ))
}

fn statistics() -> Outcome {
    let bundle = generate(&SynthConfig {
        n_matches: 50,
        seed: 77,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let found = detect_matches(&scene_sequence(&bundle)?, &SegmentConfig::default()).segments;
    let stats = compute_statistics(&bundle.truth.timeline, &found).map_err(|e| e.to_string())?;
    let mean = stats.mean_effort_pause_ratio.ok_or("no effort-pause ratio")?;
    check((2.0..=3.0).contains(&mean), format!("mean effort-pause ratio {mean}"))?;
    check(stats.matches.len() == bundle.truth.matches.len(), "match count differs")?;
    for (s, m) in stats.matches.iter().zip(&bundle.truth.matches) {
        check(
            s.standing_s as u32 == m.standing_s
                && s.ground_s as u32 == m.ground_s
                && s.paused_s as u32 == m.paused_s
                && s.standing_to_ground_transitions == m.standing_to_ground
                && (s.ground_endings == 1) == m.ends_on_ground
                && s.effort_pause_ratio == Some(m.active_s as f64 / m.paused_s as f64),
            format!("statistics differ from bookkeeping for match at {}", m.start_s),
        )?;
    }

    let mut rng = Lcg::new(8);
    for case in 0..1000 {
        let n = 1 + rng.below(500);
        let triples: Vec<PhaseTriple> = (0..n)
            .map(|_| PhaseTriple::from_state(PhaseState::ALL[rng.below(4)]))
            .collect();
        let tl = build_phase_timeline(&triples, 0).map_err(|e| e.to_string())?;
        check(
            tl.state_seconds().iter().sum::<usize>() == n,
            format!("case {case}: partition broken"),
        )?;
        let a = rng.below(n);
        let b = a + 1 + rng.below(n - a);
        let seg = MatchSegment {
            start_s: a as f64,
            end_s: b as f64,
            anchor: tatami_core::segment::Anchor::Transition,
        };
        let m = &compute_statistics(&tl, &[seg]).map_err(|e| e.to_string())?.matches[0];
        check(
            m.no_match_s + m.paused_s + m.standing_s + m.ground_s == b - a,
            format!("case {case}: segment partition broken"),
        )?;
    }
    Ok(format!(
        "mean effort-pause ratio {mean:.3} over 50 matches; bookkeeping exact; 1000 fuzzed partitions ok"
    ))
}

fn chain_holds(t: &PhaseTriple) -> bool {
    (!t.is_standing() || t.is_active()) && (!t.is_active() || t.is_match())
}

fn random_box(rng: &mut Lcg, entity: Entity) -> DetectionBox {
    let w = 0.01 + 0.5 * rng.next_f64();
    let h = 0.01 + 0.5 * rng.next_f64();
    DetectionBox {
        entity,
        x: rng.next_f64() * (1.0 - w),
        y: rng.next_f64() * (1.0 - h),
        w,
        h,
        confidence: rng.next_f64(),
    }
}

fn chain_invariant() -> Outcome {
    const N: usize = 100_000;
    let mut rng = Lcg::new(31);
    let mut checked = [0usize; 3];
    let configs = [
        PreannotateConfig::default(),
        PreannotateConfig {
            require_entities: true,
            standing_ratio: 1.5,
            ..PreannotateConfig::default()
        },
    ];
    for i in 0..N {
        let obs = SecondObservation {
            timer_readable: rng.bernoulli(0.7),
            derivative: (!rng.bernoulli(0.1)).then(|| rng.range_inclusive(0, 4) as i64 - 2),
            white: rng.bernoulli(0.8).then(|| random_box(&mut rng, Entity::PlayerWhite)),
            blue: rng.bernoulli(0.8).then(|| random_box(&mut rng, Entity::PlayerBlue)),
            referee: rng.bernoulli(0.8),
        };
        let t = phase_heuristic(&obs, &configs[i % 2]);
        check(chain_holds(&t), format!("heuristic produced {t:?}"))?;
        checked[0] += 1;
    }
    // whole-stream heuristic over noisy synthetic frames
    let noisy = generate(&SynthConfig {
        n_matches: 5,
        ocr_dropout: 0.3,
        scene_flip_noise: 0.2,
        seed: 3,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    for t in heuristic_phases(&noisy.frames, &PreannotateConfig::default(), &TimerConfig::default()) {
        check(chain_holds(&t), format!("stream heuristic produced {t:?}"))?;
    }

    for _ in 0..N {
        let p: Vec<f64> = (0..3).map(|_| rng.next_f64()).collect();
        let t = PhaseTriple::project(p[0] >= 0.5, p[1] >= 0.5, p[2] >= 0.5);
        check(chain_holds(&t), format!("projection produced {t:?}"))?;
        let raw = PhaseTriple::new(p[0] >= 0.5, p[1] >= 0.5, p[2] >= 0.5);
        if let Ok(t) = raw {
            check(chain_holds(&t), "constructor accepted an illegal triple")?;
        }
        checked[1] += 1;
    }

    let mut seed = 0;
    while checked[2] < N {
        let b = generate(&SynthConfig {
            n_matches: 3,
            seed,
            ..SynthConfig::default()
        })
        .map_err(|e| e.to_string())?;
        for t in &b.truth.timeline.triples {
            check(chain_holds(t), format!("synth seed {seed} produced {t:?}"))?;
        }
        checked[2] += b.truth.timeline.len();
        seed += 1;
    }
    Ok(format!(
        "heuristic {}, threshold+projection {}, synth {} triples (from {seed} seeds)",
        checked[0], checked[1], checked[2]
    ))
}

fn metrics() -> Outcome {
    let truth = [true, true, true, false, false, false, false, false, false, false];
    let pred = [true, true, false, true, false, false, false, false, false, false];
    let r = evaluate_binary(&pred, &truth).map_err(|e| e.to_string())?;
    let p = r.positive();
    check((p.tp, p.fp, p.fn_, p.tn) == (2, 1, 1, 6), "confusion counts")?;
    check(p.precision == 2.0 / 3.0, format!("precision {}", p.precision))?;
    check(p.recall == 2.0 / 3.0, format!("recall {}", p.recall))?;
    check(p.f1 == 2.0 / 3.0, format!("F1 {}", p.f1))?;
    check(p.accuracy == 0.8, format!("accuracy {}", p.accuracy))?;
    Ok(format!(
        "P={} R={} F1={} accuracy={}",
        p.precision, p.recall, p.f1, p.accuracy
    ))
}

fn lag_accounting() -> Outcome {
    let mut m = FeatureMatrix::new();
    for s in 0..30 {
        m.push("clip", s, vec![s as f64, 1.0]).map_err(|e| e.to_string())?;
    }
    let lagged = lag_features(&m, 5);
    check(lagged.len() == 25, format!("{} rows, expected 25", lagged.len()))?;
    check(lagged.dim() == Some(12), format!("row width {:?}", lagged.dim()))?;
    Ok(format!("30 rows, lag 5 -> {} rows of width 12", lagged.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("label accounting", label_accounting),
        ("conditional distribution", conditional),
        ("DCT correctness", dct_correctness),
        ("optimizer correctness", optimizer),
        ("timer", timer),
        ("segmentation round trip", segmentation),
        ("statistics", statistics),
        ("chain invariant", chain_invariant),
        ("metrics", metrics),
        ("lag accounting", lag_accounting),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
