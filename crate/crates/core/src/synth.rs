//! Deterministic synthetic tournaments: per-second ground truth plus the
//! frame records an extractor would have produced for it.
//!
//! A match is an intro overlay (clock stopped at full time), alternating
//! effort and pause periods until the match clock has run out, and an outro
//! overlay (clock stopped at zero). Intermissions with no match surround
//! every match. The intro counts as the first pause period, so the clock of
//! a match with `p` pause periods stops `p + 1` times.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{
    write_annotations_file, write_frames_file, DetectionBox, EmbeddingTensor, Entity, FrameRecord, IntervalAnnotation,
    SceneClass,
};
use crate::phase::{PhaseState, PhaseTriple};
use crate::rng::Lcg;
use crate::segment::{build_phase_timeline, Anchor, MatchSegment, PhaseTimeline};
use crate::timer::format_timer;

/// Offsets that give observation noise and embeddings their own generator
/// streams, so switching them on does not change the ground truth.
const CORRUPT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const EMBED_STREAM: u64 = 0xd1b5_4a32_d192_ed03;

/// Strings no timer parser should accept.
pub const GARBAGE_OCR: [&str; 8] = ["4:0O", "--:--", "l:3S", "", "8888", ":", "1:2", "I:OO"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_matches: usize,
    /// Inclusive bounds in seconds.
    pub effort_s: [u32; 2],
    pub pause_s: [u32; 2],
    /// Probability that an effort period goes to the ground.
    pub ground_prob: f64,
    pub intermission_s: [u32; 2],
    /// Length of each intro and outro overlay.
    pub overlay_s: [u32; 2],
    /// Without overlays (raw camera footage) intro and outro seconds are
    /// plain match frames and no timer is shown.
    pub overlay: bool,
    pub match_time_s: u32,
    pub ocr_dropout: f64,
    pub scene_flip_noise: f64,
    pub seed: u64,
    pub video_id: String,
    pub mat_id: u8,
    /// Emit an embedding of this shape on every frame.
    pub embedding_shape: Option<Vec<usize>>,
    pub embedding_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_matches: 10,
            effort_s: [20, 30],
            pause_s: [8, 12],
            ground_prob: 0.4,
            intermission_s: [30, 90],
            overlay_s: [5, 10],
            overlay: true,
            match_time_s: 240,
            ocr_dropout: 0.0,
            scene_flip_noise: 0.0,
            seed: 0,
            video_id: "sim".into(),
            mat_id: 1,
            embedding_shape: None,
            embedding_noise: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn check(&self) -> Result<()> {
        let range = |name: &str, r: [u32; 2], min: u32| {
            if r[0] > r[1] || r[0] < min {
                Err(Error::Config(format!(
                    "{name} range {r:?} must satisfy {min} <= lo <= hi"
                )))
            } else {
                Ok(())
            }
        };
        range("effort_s", self.effort_s, 1)?;
        range("pause_s", self.pause_s, 1)?;
        range("intermission_s", self.intermission_s, 1)?;
        range("overlay_s", self.overlay_s, 2)?;
        if self.match_time_s == 0 {
            return Err(Error::Config("match_time_s must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.ground_prob) {
            return Err(Error::Config(format!(
                "ground_prob {} outside [0, 1]",
                self.ground_prob
            )));
        }
        for (name, p) in [
            ("ocr_dropout", self.ocr_dropout),
            ("scene_flip_noise", self.scene_flip_noise),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} {p} outside [0, 1)")));
            }
        }
        if let Some(shape) = &self.embedding_shape {
            if shape.is_empty() || shape.contains(&0) {
                return Err(Error::Config(format!("bad embedding shape {shape:?}")));
            }
        }
        Ok(())
    }
}

/// One effort period: `standing_s` seconds standing, then `ground_s` on the
/// ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effort {
    pub standing_s: u32,
    pub ground_s: u32,
}

impl Effort {
    pub fn len(&self) -> u32 {
        self.standing_s + self.ground_s
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The period structure of one match. `pauses[i]` follows `efforts[i]`, so
/// there is one pause fewer than efforts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchScript {
    pub intro_s: u32,
    pub efforts: Vec<Effort>,
    pub pauses: Vec<u32>,
    pub outro_s: u32,
}

impl MatchScript {
    pub fn check(&self) -> Result<()> {
        if self.efforts.is_empty() || self.pauses.len() + 1 != self.efforts.len() {
            return Err(Error::Config(format!(
                "a match needs n >= 1 efforts and n - 1 pauses, got {} and {}",
                self.efforts.len(),
                self.pauses.len()
            )));
        }
        if self.intro_s == 0 || self.outro_s == 0 || self.pauses.contains(&0) {
            return Err(Error::Config("intro, outro and pauses must be non-empty".into()));
        }
        if self.efforts.iter().any(|e| e.standing_s == 0) {
            return Err(Error::Config("every effort starts standing".into()));
        }
        Ok(())
    }

    pub fn active_s(&self) -> u32 {
        self.efforts.iter().map(Effort::len).sum()
    }

    pub fn length_s(&self) -> u32 {
        self.intro_s + self.active_s() + self.pauses.iter().sum::<u32>() + self.outro_s
    }

    /// Intro plus the pauses between efforts.
    pub fn pause_periods(&self) -> usize {
        1 + self.pauses.len()
    }

    /// Per-second phases.
    pub fn states(&self) -> Vec<PhaseState> {
        let mut out = vec![PhaseState::Paused; self.intro_s as usize];
        for (i, e) in self.efforts.iter().enumerate() {
            out.extend(std::iter::repeat_n(PhaseState::Standing, e.standing_s as usize));
            out.extend(std::iter::repeat_n(PhaseState::Ground, e.ground_s as usize));
            if let Some(&p) = self.pauses.get(i) {
                out.extend(std::iter::repeat_n(PhaseState::Paused, p as usize));
            }
        }
        out.extend(std::iter::repeat_n(PhaseState::Paused, self.outro_s as usize));
        out
    }
}

/// Draws the script of one match.
pub fn plan_match(rng: &mut Lcg, config: &SynthConfig) -> MatchScript {
    let draw = |rng: &mut Lcg, r: [u32; 2]| rng.range_inclusive(r[0], r[1]);
    let intro_s = draw(rng, config.overlay_s);
    let mut efforts = Vec::new();
    let mut pauses = Vec::new();
    let mut remaining = config.match_time_s;
    while remaining > 0 {
        let e = draw(rng, config.effort_s).min(remaining);
        remaining -= e;
        let ground = rng.bernoulli(config.ground_prob);
        let effort = if ground && e >= 2 {
            let standing_s = rng.range_inclusive(1, e - 1);
            Effort {
                standing_s,
                ground_s: e - standing_s,
            }
        } else {
            Effort {
                standing_s: e,
                ground_s: 0,
            }
        };
        efforts.push(effort);
        if remaining > 0 {
            pauses.push(draw(rng, config.pause_s));
        }
    }
    let outro_s = draw(rng, config.overlay_s);
    MatchScript {
        intro_s,
        efforts,
        pauses,
        outro_s,
    }
}

/// Bookkeeping for one generated match, recorded at construction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTruth {
    pub start_s: u64,
    pub end_s: u64,
    pub script: MatchScript,
    pub active_s: u32,
    pub paused_s: u32,
    pub standing_s: u32,
    pub ground_s: u32,
    pub standing_to_ground: usize,
    pub ends_on_ground: bool,
    pub pause_periods: usize,
}

impl MatchTruth {
    fn new(start_s: u64, script: MatchScript) -> Self {
        let standing_s = script.efforts.iter().map(|e| e.standing_s).sum();
        let ground_s = script.efforts.iter().map(|e| e.ground_s).sum();
        MatchTruth {
            start_s,
            end_s: start_s + script.length_s() as u64,
            active_s: script.active_s(),
            paused_s: script.intro_s + script.pauses.iter().sum::<u32>() + script.outro_s,
            standing_s,
            ground_s,
            standing_to_ground: script.efforts.iter().filter(|e| e.ground_s > 0).count(),
            ends_on_ground: script.efforts.last().is_some_and(|e| e.ground_s > 0),
            pause_periods: script.pause_periods(),
            script,
        }
    }

    pub fn segment(&self, overlay: bool) -> MatchSegment {
        MatchSegment {
            start_s: self.start_s as f64,
            end_s: self.end_s as f64,
            anchor: if overlay { Anchor::Overlay } else { Anchor::Transition },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub segments: Vec<MatchSegment>,
    pub matches: Vec<MatchTruth>,
    pub timeline: PhaseTimeline,
    /// Scene class of every second before corruption.
    pub scenes: Vec<SceneClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthBundle {
    pub config: SynthConfig,
    pub truth: SynthTruth,
    pub frames: Vec<FrameRecord>,
    pub log: Vec<String>,
}

impl SynthBundle {
    /// Ground truth as interval annotations over the whole video, one per
    /// run of identical in-match phases.
    pub fn annotations(&self) -> Vec<IntervalAnnotation> {
        let mut out: Vec<IntervalAnnotation> = Vec::new();
        let mut prev: Option<PhaseTriple> = None;
        for (i, t) in self.truth.timeline.triples.iter().enumerate() {
            let s = i as f64;
            match out.last_mut() {
                Some(last) if prev == Some(*t) && t.is_match() => last.end_s = s + 1.0,
                _ if t.is_match() => out.push(IntervalAnnotation::new(&self.config.video_id, s, s + 1.0, *t)),
                _ => {}
            }
            prev = Some(*t);
        }
        out
    }

    /// Writes `<stem>.frames.jsonl`, `<stem>.intervals.json` and
    /// `<stem>.truth.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<[PathBuf; 3]> {
        fs::create_dir_all(dir)?;
        let frames = dir.join(format!("{stem}.frames.jsonl"));
        let intervals = dir.join(format!("{stem}.intervals.json"));
        let truth = dir.join(format!("{stem}.truth.json"));
        write_frames_file(&frames, &self.frames)?;
        write_annotations_file(&intervals, &self.annotations())?;
        let mut text = serde_json::to_string(&self.truth)?;
        text.push('\n');
        fs::write(&truth, text)?;
        Ok([frames, intervals, truth])
    }
}

fn player_boxes(state: PhaseState) -> Vec<DetectionBox> {
    let (w, h) = if state == PhaseState::Ground {
        (0.2, 0.1)
    } else {
        (0.1, 0.2)
    };
    [(Entity::PlayerWhite, 0.3), (Entity::PlayerBlue, 0.55)]
        .into_iter()
        .map(|(entity, x)| DetectionBox {
            entity,
            x,
            y: 0.5,
            w,
            h,
            confidence: 0.9,
        })
        .collect()
}

fn referee_box() -> DetectionBox {
    DetectionBox {
        entity: Entity::Referee,
        x: 0.45,
        y: 0.2,
        w: 0.08,
        h: 0.2,
        confidence: 0.9,
    }
}

fn embedding(rng: &mut Lcg, shape: &[usize], state: PhaseState, noise: f64) -> EmbeddingTensor {
    let n: usize = shape.iter().product();
    let level = [-1.0, 0.0, 1.0, 2.0][state.index()];
    let data = (0..n)
        .map(|j| level * (1.0 + 0.1 * (j % 7) as f64) + noise * (2.0 * rng.next_f64() - 1.0))
        .collect();
    EmbeddingTensor::new(shape.to_vec(), data).expect("shape product matches data")
}

struct Builder {
    states: Vec<PhaseState>,
    scenes: Vec<SceneClass>,
    timer: Vec<Option<u32>>,
}

impl Builder {
    fn push(&mut self, state: PhaseState, scene: SceneClass, timer: Option<u32>, n: u32) {
        for _ in 0..n {
            self.states.push(state);
            self.scenes.push(scene);
            self.timer.push(timer);
        }
    }

    fn len(&self) -> u64 {
        self.states.len() as u64
    }

    fn render(&mut self, script: &MatchScript, config: &SynthConfig) {
        let shown = |v: u32| config.overlay.then_some(v);
        let (intro, outro) = if config.overlay {
            (SceneClass::MatchIntro, SceneClass::MatchOutro)
        } else {
            (SceneClass::Match, SceneClass::Match)
        };
        let mut clock = config.match_time_s;
        self.push(PhaseState::Paused, intro, shown(clock), script.intro_s);
        for (i, e) in script.efforts.iter().enumerate() {
            for state in std::iter::repeat_n(PhaseState::Standing, e.standing_s as usize)
                .chain(std::iter::repeat_n(PhaseState::Ground, e.ground_s as usize))
            {
                self.push(state, SceneClass::Match, shown(clock), 1);
                clock = clock.saturating_sub(1);
            }
            if let Some(&p) = script.pauses.get(i) {
                self.push(PhaseState::Paused, SceneClass::Match, shown(clock), p);
            }
        }
        self.push(PhaseState::Paused, outro, shown(clock), script.outro_s);
    }
}

/// Builds a bundle around explicit match scripts. Intermission lengths and
/// embeddings are still drawn from the seeded generator.
pub fn generate_scripted(config: &SynthConfig, scripts: &[MatchScript]) -> Result<SynthBundle> {
    config.check()?;
    for s in scripts {
        s.check()?;
        if s.active_s() > config.match_time_s {
            return Err(Error::Config(format!(
                "script has {} active seconds, the clock only {}",
                s.active_s(),
                config.match_time_s
            )));
        }
    }
    let mut rng = Lcg::new(config.seed.wrapping_add(1));
    Ok(assemble(config, scripts.to_vec(), &mut rng))
}

/// Draws and renders a whole tournament. Identical configurations give
/// identical bundles.
pub fn generate(config: &SynthConfig) -> Result<SynthBundle> {
    config.check()?;
    let mut rng = Lcg::new(config.seed);
    let scripts: Vec<MatchScript> = (0..config.n_matches).map(|_| plan_match(&mut rng, config)).collect();
    let bundle = assemble(config, scripts, &mut rng);
    Ok(if config.ocr_dropout > 0.0 || config.scene_flip_noise > 0.0 {
        corrupt(&bundle, config)
    } else {
        bundle
    })
}

fn assemble(config: &SynthConfig, scripts: Vec<MatchScript>, rng: &mut Lcg) -> SynthBundle {
    let mut b = Builder {
        states: Vec::new(),
        scenes: Vec::new(),
        timer: Vec::new(),
    };
    let mut log = Vec::new();
    let mut matches = Vec::new();
    let gap = |rng: &mut Lcg| rng.range_inclusive(config.intermission_s[0], config.intermission_s[1]);
    let lead = gap(rng);
    b.push(PhaseState::NoMatch, SceneClass::NoMatch, None, lead);
    for (i, script) in scripts.into_iter().enumerate() {
        let start = b.len();
        b.render(&script, config);
        let truth = MatchTruth::new(start, script);
        debug_assert_eq!(truth.end_s, b.len());
        log.push(format!(
            "match {}: [{}, {}) efforts={} pauses={} active={} ground={}",
            i + 1,
            truth.start_s,
            truth.end_s,
            truth.script.efforts.len(),
            truth.script.pauses.len(),
            truth.active_s,
            truth.ground_s
        ));
        matches.push(truth);
        let rest = gap(rng);
        b.push(PhaseState::NoMatch, SceneClass::NoMatch, None, rest);
    }

    let mut embed_rng = Lcg::new(config.seed ^ EMBED_STREAM);
    let frames = (0..b.states.len())
        .map(|i| {
            let state = b.states[i];
            let mut detections = if state == PhaseState::NoMatch {
                Vec::new()
            } else {
                player_boxes(state)
            };
            detections.push(referee_box());
            FrameRecord {
                video_id: config.video_id.clone(),
                mat_id: config.mat_id,
                frame_index: i as u64,
                timestamp_s: i as f64,
                scene_class: Some(b.scenes[i]),
                detections,
                embedding: config
                    .embedding_shape
                    .as_deref()
                    .map(|shape| embedding(&mut embed_rng, shape, state, config.embedding_noise)),
                timer_raw: b.timer[i].map(format_timer),
            }
        })
        .collect();

    let triples: Vec<PhaseTriple> = b.states.iter().map(|&s| PhaseTriple::from_state(s)).collect();
    let timeline = build_phase_timeline(&triples, 0).expect("intermissions make the timeline non-empty");
    SynthBundle {
        config: config.clone(),
        truth: SynthTruth {
            segments: matches.iter().map(|m| m.segment(config.overlay)).collect(),
            matches,
            timeline,
            scenes: b.scenes,
        },
        frames,
        log,
    }
}

/// Observation noise: replaces present timer text with unparseable garbage
/// at rate `ocr_dropout`, and moves scene classes to one of the other three
/// classes at rate `scene_flip_noise`. Ground truth is left untouched.
pub fn corrupt(bundle: &SynthBundle, config: &SynthConfig) -> SynthBundle {
    let mut rng = Lcg::new(config.seed.wrapping_add(CORRUPT_STREAM));
    let mut out = bundle.clone();
    let mut garbled = 0;
    let mut flipped = 0;
    for f in &mut out.frames {
        if f.timer_raw.is_some() && rng.bernoulli(config.ocr_dropout) {
            f.timer_raw = Some(GARBAGE_OCR[rng.below(GARBAGE_OCR.len())].to_string());
            garbled += 1;
        }
        if let Some(c) = f.scene_class {
            if rng.bernoulli(config.scene_flip_noise) {
                let others: Vec<SceneClass> = SceneClass::ALL.into_iter().filter(|&o| o != c).collect();
                f.scene_class = Some(others[rng.below(3)]);
                flipped += 1;
            }
        }
    }
    out.log.push(format!(
        "corrupt: garbled {garbled} timer readings, flipped {flipped} scene classes"
    ));
    out
}
