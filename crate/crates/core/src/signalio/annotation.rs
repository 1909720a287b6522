use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EpisodeLabel {
    Fog,
    OtherStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub onset_s: f64,
    pub offset_s: f64,
    pub label: EpisodeLabel,
}

impl Episode {
    pub fn fog(onset_s: f64, offset_s: f64) -> Self {
        Episode {
            onset_s,
            offset_s,
            label: EpisodeLabel::Fog,
        }
    }

    pub fn other_stop(onset_s: f64, offset_s: f64) -> Self {
        Episode {
            onset_s,
            offset_s,
            label: EpisodeLabel::OtherStop,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }

    /// True when `[start, end)` shares a point with `[onset_s - before, offset_s]`.
    pub fn intersects(&self, start: f64, end: f64, before: f64) -> bool {
        start <= self.offset_s && end > self.onset_s - before
    }
}

/// Labeled episodes from one rater, sorted and non-overlapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTrack {
    pub rater_id: String,
    pub episodes: Vec<Episode>,
}

impl AnnotationTrack {
    pub fn new(rater_id: impl Into<String>, episodes: Vec<Episode>) -> Result<Self> {
        let track = AnnotationTrack {
            rater_id: rater_id.into(),
            episodes,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, ep) in self.episodes.iter().enumerate() {
            if !(ep.onset_s.is_finite() && ep.offset_s.is_finite() && ep.onset_s < ep.offset_s) {
                return Err(Error::Validation(format!(
                    "rater `{}` episode {i}: onset {} must precede offset {}",
                    self.rater_id, ep.onset_s, ep.offset_s
                )));
            }
            if i > 0 && self.episodes[i - 1].offset_s > ep.onset_s {
                return Err(Error::Validation(format!(
                    "rater `{}` episode {i} overlaps or is out of order with its predecessor",
                    self.rater_id
                )));
            }
        }
        Ok(())
    }

    pub fn fog_episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().filter(|e| e.label == EpisodeLabel::Fog)
    }

    pub fn other_stops(&self) -> impl Iterator<Item = &Episode> {
        self.episodes
            .iter()
            .filter(|e| e.label == EpisodeLabel::OtherStop)
    }
}

/// A fixed frame grid `[0, n_frames * frame_s)` used to compare tracks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGrid {
    pub frame_s: f64,
    pub n_frames: usize,
}

impl FrameGrid {
    pub fn new(span_s: f64, frame_s: f64) -> Result<Self> {
        if !(frame_s.is_finite() && frame_s > 0.0) {
            return Err(Error::param("frame_s", format!("must be > 0, got {frame_s}")));
        }
        if !(span_s.is_finite() && span_s > 0.0) {
            return Err(Error::param("span_s", format!("must be > 0, got {span_s}")));
        }
        let n_frames = (span_s / frame_s).round() as usize;
        if n_frames == 0 {
            return Err(Error::param("span_s", "shorter than one frame"));
        }
        Ok(FrameGrid { frame_s, n_frames })
    }

    /// Frame label per frame; a frame takes the label of the episode
    /// containing its center.
    pub fn rasterize(&self, track: &AnnotationTrack) -> Vec<Option<EpisodeLabel>> {
        let mut out = vec![None; self.n_frames];
        for ep in &track.episodes {
            let first = ((ep.onset_s / self.frame_s) - 0.5).ceil().max(0.0) as usize;
            for (i, slot) in out.iter_mut().enumerate().skip(first) {
                let center = (i as f64 + 0.5) * self.frame_s;
                if center >= ep.offset_s {
                    break;
                }
                if center >= ep.onset_s {
                    *slot = Some(ep.label);
                }
            }
        }
        out
    }

    /// Merges runs of identical labels back into episodes on frame boundaries.
    pub fn to_track(&self, rater_id: impl Into<String>, frames: &[Option<EpisodeLabel>]) -> AnnotationTrack {
        let mut episodes = Vec::new();
        let mut i = 0;
        while i < frames.len() {
            if let Some(label) = frames[i] {
                let start = i;
                while i < frames.len() && frames[i] == Some(label) {
                    i += 1;
                }
                episodes.push(Episode {
                    onset_s: start as f64 * self.frame_s,
                    offset_s: i as f64 * self.frame_s,
                    label,
                });
            } else {
                i += 1;
            }
        }
        AnnotationTrack {
            rater_id: rater_id.into(),
            episodes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementStats {
    pub percent_agreement: f64,
    pub kappa: f64,
}

/// Percent agreement and Cohen's kappa on binary FOG / non-FOG frames.
pub fn interrater_stats(
    a: &AnnotationTrack,
    b: &AnnotationTrack,
    grid: &FrameGrid,
) -> Result<AgreementStats> {
    let fa: Vec<bool> = grid
        .rasterize(a)
        .into_iter()
        .map(|l| l == Some(EpisodeLabel::Fog))
        .collect();
    let fb: Vec<bool> = grid
        .rasterize(b)
        .into_iter()
        .map(|l| l == Some(EpisodeLabel::Fog))
        .collect();
    binary_agreement(&fa, &fb)
}

pub(crate) fn binary_agreement(fa: &[bool], fb: &[bool]) -> Result<AgreementStats> {
    let n = fa.len() as f64;
    let (mut both, mut only_a, mut only_b, mut neither) = (0usize, 0usize, 0usize, 0usize);
    for (&x, &y) in fa.iter().zip(fb) {
        match (x, y) {
            (true, true) => both += 1,
            (true, false) => only_a += 1,
            (false, true) => only_b += 1,
            (false, false) => neither += 1,
        }
    }
    let p_o = (both + neither) as f64 / n;
    let pa = (both + only_a) as f64 / n;
    let pb = (both + only_b) as f64 / n;
    let p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
    let kappa = if (1.0 - p_e).abs() < 1e-15 {
        if p_o == 1.0 {
            1.0
        } else {
            return Err(Error::DegenerateMarginals { observed: p_o });
        }
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(AgreementStats {
        percent_agreement: p_o,
        kappa,
    })
}

/// Frame-wise adjudication: agreed frames keep their label, disagreements
/// take the tiebreaker's label.
pub fn adjudicate(
    a: &AnnotationTrack,
    b: &AnnotationTrack,
    tiebreak: &AnnotationTrack,
    grid: &FrameGrid,
) -> AnnotationTrack {
    let fa = grid.rasterize(a);
    let fb = grid.rasterize(b);
    let ft = grid.rasterize(tiebreak);
    let merged: Vec<_> = fa
        .iter()
        .zip(&fb)
        .zip(&ft)
        .map(|((x, y), t)| if x == y { *x } else { *t })
        .collect();
    grid.to_track("adjudicated", &merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn track(id: &str, eps: &[(f64, f64)]) -> AnnotationTrack {
        AnnotationTrack::new(id, eps.iter().map(|&(a, b)| Episode::fog(a, b)).collect()).unwrap()
    }

    #[test]
    fn identical_tracks_agree_fully() {
        let a = track("a", &[(1.0, 3.0), (5.0, 6.5)]);
        let grid = FrameGrid::new(10.0, 0.1).unwrap();
        let s = interrater_stats(&a, &a.clone(), &grid).unwrap();
        assert_eq!(s.percent_agreement, 1.0);
        assert_eq!(s.kappa, 1.0);
    }

    #[test]
    fn complete_opposition_gives_minus_one() {
        let grid = FrameGrid::new(10.0, 0.1).unwrap();
        let a = track("a", &[(0.0, 5.0)]);
        let b = track("b", &[(5.0, 10.0)]);
        let s = interrater_stats(&a, &b, &grid).unwrap();
        assert_eq!(s.percent_agreement, 0.0);
        assert!((s.kappa + 1.0).abs() < 1e-12);
    }

    #[test]
    fn contingency_table_example() {
        // 100 one-second frames: A marks 30, B marks 20, 15 shared.
        let grid = FrameGrid::new(100.0, 1.0).unwrap();
        let a = track("a", &[(0.0, 30.0)]);
        let b = track("b", &[(15.0, 35.0)]);
        let s = interrater_stats(&a, &b, &grid).unwrap();
        // both=15, only_a=15, only_b=5, neither=65
        let p_o = 80.0 / 100.0;
        let p_e = 0.30 * 0.20 + 0.70 * 0.80;
        assert!((s.percent_agreement - p_o).abs() < 1e-12);
        assert!((s.kappa - (p_o - p_e) / (1.0 - p_e)).abs() < 1e-12);
    }

    #[test]
    fn constant_identical_raters_have_kappa_one() {
        let grid = FrameGrid::new(10.0, 0.1).unwrap();
        let a = track("a", &[]);
        let s = interrater_stats(&a, &a.clone(), &grid).unwrap();
        assert_eq!(s.kappa, 1.0);
    }

    #[test]
    fn kappa_one_iff_perfect_agreement() {
        let grid = FrameGrid::new(10.0, 0.1).unwrap();
        let a = track("a", &[(1.0, 3.0)]);
        let b = track("b", &[(1.0, 3.1)]);
        let s = interrater_stats(&a, &b, &grid).unwrap();
        assert!(s.kappa < 1.0);
    }

    #[test]
    fn adjudicate_agreement_dominates() {
        let grid = FrameGrid::new(10.0, 0.1).unwrap();
        let a = track("a", &[(1.0, 3.0), (6.0, 7.0)]);
        let t = track("t", &[(0.0, 10.0)]);
        let out = adjudicate(&a, &a.clone(), &t, &grid);
        assert_eq!(out.episodes.len(), 2);
        for (x, y) in out.episodes.iter().zip(&a.episodes) {
            assert!((x.onset_s - y.onset_s).abs() < 1e-9);
            assert!((x.offset_s - y.offset_s).abs() < 1e-9);
        }
    }

    #[test]
    fn adjudicate_tiebreak_resolves_disagreement() {
        let grid = FrameGrid::new(10.0, 0.1).unwrap();
        let a = track("a", &[(2.0, 4.0)]);
        let b = track("b", &[]);
        let t = track("t", &[(2.0, 4.0)]);
        let out = adjudicate(&a, &b, &t, &grid);
        assert_eq!(out.episodes.len(), 1);
        assert!((out.episodes[0].onset_s - 2.0).abs() < 1e-9);
        assert!((out.episodes[0].offset_s - 4.0).abs() < 1e-9);
    }

    fn random_track(rng: &mut ChaCha8Rng, id: &str) -> AnnotationTrack {
        let mut eps = Vec::new();
        let mut t = 0.0;
        loop {
            t += rng.random_range(0.0..3.0);
            let d = rng.random_range(0.2..2.0);
            if t + d > 30.0 {
                break;
            }
            let ep = if rng.random_bool(0.8) {
                Episode::fog(t, t + d)
            } else {
                Episode::other_stop(t, t + d)
            };
            eps.push(ep);
            t += d;
        }
        AnnotationTrack::new(id, eps).unwrap()
    }

    #[test]
    fn adjudicate_matches_framewise_majority_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = FrameGrid::new(30.0, 0.1).unwrap();
        for _ in 0..50 {
            let a = random_track(&mut rng, "a");
            let b = random_track(&mut rng, "b");
            let t = random_track(&mut rng, "t");
            let out = adjudicate(&a, &b, &t, &grid);
            // Oracle: label each frame center by direct episode lookup.
            let lookup = |tr: &AnnotationTrack, c: f64| {
                tr.episodes
                    .iter()
                    .find(|e| e.onset_s <= c && c < e.offset_s)
                    .map(|e| e.label)
            };
            for i in 0..grid.n_frames {
                let c = (i as f64 + 0.5) * grid.frame_s;
                let (la, lb, lt) = (lookup(&a, c), lookup(&b, c), lookup(&t, c));
                let expected = if la == lb { la } else { lt };
                assert_eq!(lookup(&out, c), expected, "frame {i}");
            }
        }
    }
}
