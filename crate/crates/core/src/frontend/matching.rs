use super::{
    build_pyramid, fast_detect, klt_track, FeatureMatch, FrontendConfig, FrontendError,
    PyramidLevels, Track,
};
use crate::{GrayImage, Point2};

/// Minimum number of matches a frame pair must keep.
const MIN_MATCHES: usize = 8;

/// Tracks `existing` from `prev` into `curr`. When fewer than
/// `min_features` tracks are given, fresh corners from `prev` (away from the
/// existing tracks) are added first and receive ids from `next_id`.
pub fn match_frames(
    prev: &GrayImage,
    curr: &GrayImage,
    existing: &[Track],
    cfg: &FrontendConfig,
    next_id: &mut u64,
) -> Result<Vec<FeatureMatch>, FrontendError> {
    if (prev.width(), prev.height()) != (curr.width(), curr.height()) {
        return Err(FrontendError::SizeMismatch(
            (prev.width(), prev.height()),
            (curr.width(), curr.height()),
        ));
    }
    let pp = build_pyramid(prev, cfg.levels)?;
    let cp = build_pyramid(curr, cfg.levels)?;
    match_pyramids(&pp, &cp, existing, cfg, next_id)
}

fn replenish(img: &GrayImage, tracks: &mut Vec<Track>, cfg: &FrontendConfig, next_id: &mut u64) {
    let (w, h) = (img.width(), img.height());
    let r = cfg.nms_radius;
    let cell = r.max(1.0);
    let (gw, gh) = (
        (w as f64 / cell).ceil() as usize + 1,
        (h as f64 / cell).ceil() as usize + 1,
    );
    let mut occupied: Vec<Vec<Point2>> = vec![Vec::new(); gw * gh];
    let cell_of = |p: &Point2| {
        let cx = (p.u / cell).floor().clamp(0.0, (gw - 1) as f64) as usize;
        let cy = (p.v / cell).floor().clamp(0.0, (gh - 1) as f64) as usize;
        (cx, cy)
    };
    for t in tracks.iter() {
        let (cx, cy) = cell_of(&t.position);
        occupied[cy * gw + cx].push(t.position);
    }
    for corner in fast_detect(img, cfg.fast_threshold, cfg.nms_radius) {
        if tracks.len() >= cfg.max_features {
            break;
        }
        let (cx, cy) = cell_of(&corner.position);
        let near = (cy.saturating_sub(1)..=(cy + 1).min(gh - 1)).any(|y| {
            (cx.saturating_sub(1)..=(cx + 1).min(gw - 1)).any(|x| {
                occupied[y * gw + x]
                    .iter()
                    .any(|q| q.distance(&corner.position) <= r)
            })
        });
        if near {
            continue;
        }
        occupied[cy * gw + cx].push(corner.position);
        tracks.push(Track {
            id: *next_id,
            position: corner.position,
        });
        *next_id += 1;
    }
}

/// [`match_frames`] on prebuilt pyramids.
pub fn match_pyramids(
    prev: &PyramidLevels,
    curr: &PyramidLevels,
    existing: &[Track],
    cfg: &FrontendConfig,
    next_id: &mut u64,
) -> Result<Vec<FeatureMatch>, FrontendError> {
    let base = prev.level(0);
    let mut tracks: Vec<Track> = existing
        .iter()
        .filter(|t| base.contains(&t.position))
        .copied()
        .collect();
    if tracks.len() < cfg.min_features {
        replenish(base, &mut tracks, cfg, next_id);
    }
    let starts: Vec<Point2> = tracks.iter().map(|t| t.position).collect();
    let forward = klt_track(prev, curr, &starts, cfg);
    let ends: Vec<Point2> = forward.iter().map(|(p, _)| *p).collect();
    let backward = klt_track(curr, prev, &ends, cfg);
    let matches: Vec<FeatureMatch> = tracks
        .iter()
        .zip(forward.iter().zip(&backward))
        .filter(|(t, ((_, ok_f), (back, ok_b)))| {
            *ok_f && *ok_b && back.distance(&t.position) <= cfg.fb_threshold
        })
        .map(|(t, ((end, _), _))| FeatureMatch {
            prev: t.position,
            curr: *end,
            id: t.id,
        })
        .collect();
    if matches.len() < MIN_MATCHES {
        return Err(FrontendError::InsufficientFeatures {
            found: matches.len(),
        });
    }
    Ok(matches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::klt::tests::shifted_pair;
    use crate::synth::{exact_matches, generate_scene, render_texture_frame, SceneMode};

    fn blobs(seed: u64) -> GrayImage {
        let s = generate_scene(SceneMode::GeneralDepth, 150, 2, seed);
        render_texture_frame(&s, 0)
    }

    #[test]
    fn identical_frames_match_every_corner() {
        let img = blobs(1);
        let mut id = 0;
        let m = match_frames(&img, &img, &[], &FrontendConfig::default(), &mut id).unwrap();
        let corners = fast_detect(&img, 20, 3.0);
        assert_eq!(m.len(), corners.len());
        assert_eq!(id, corners.len() as u64);
        for (fm, c) in m.iter().zip(&corners) {
            assert_eq!(fm.prev, c.position);
            assert!(fm.prev.distance(&fm.curr) < 0.05);
        }
    }

    #[test]
    fn shifted_frames_displace_matches() {
        let (a, b) = shifted_pair(5, 3.0, 0.0);
        let cfg = FrontendConfig {
            fast_threshold: 5,
            ..FrontendConfig::default()
        };
        let mut id = 0;
        let m = match_frames(&a, &b, &[], &cfg, &mut id).unwrap();
        let interior: Vec<_> = m
            .iter()
            .filter(|f| f.prev.u > 15.0 && f.prev.u < 140.0 && f.prev.v > 15.0 && f.prev.v < 110.0)
            .collect();
        assert!(interior.len() >= 8);
        for f in interior {
            assert!((f.curr.u - f.prev.u - 3.0).abs() < 0.25 && (f.curr.v - f.prev.v).abs() < 0.25);
        }
    }

    #[test]
    fn blank_frames_are_insufficient() {
        let img = GrayImage::filled(128, 128, 0);
        let mut id = 0;
        assert_eq!(
            match_frames(&img, &img, &[], &FrontendConfig::default(), &mut id),
            Err(FrontendError::InsufficientFeatures { found: 0 })
        );
    }

    #[test]
    fn existing_tracks_keep_ids_and_block_replenishment() {
        let img = blobs(2);
        let corners = fast_detect(&img, 20, 3.0);
        let existing: Vec<Track> = corners
            .iter()
            .take(10)
            .enumerate()
            .map(|(i, c)| Track {
                id: 1000 + i as u64,
                position: Point2::new(c.position.u + 1.0, c.position.v),
            })
            .collect();
        let mut id = 5000;
        let m = match_frames(&img, &img, &existing, &FrontendConfig::default(), &mut id).unwrap();
        for (fm, t) in m.iter().zip(&existing) {
            assert_eq!(fm.id, t.id);
        }
        for fm in m.iter().filter(|f| f.id >= 5000) {
            assert!(existing.iter().all(|t| t.position.distance(&fm.prev) > 3.0));
        }
    }

    #[test]
    fn rendered_scene_tracks_follow_the_projections() {
        let s = generate_scene(SceneMode::GeneralDepth, 300, 2, 11);
        let (a, b) = (render_texture_frame(&s, 0), render_texture_frame(&s, 1));
        let truth = exact_matches(&s, 0, 1);
        let mut id = 0;
        let m = match_frames(&a, &b, &[], &FrontendConfig::default(), &mut id).unwrap();
        let mut close = 0;
        for fm in &m {
            if let Some(t) = truth.iter().find(|t| t.prev.distance(&fm.prev) < 0.75) {
                if t.curr.distance(&fm.curr) < 1.0 {
                    close += 1;
                }
            }
        }
        assert!(close * 10 >= m.len() * 7, "{close} of {}", m.len());
    }

    #[test]
    fn matching_is_deterministic() {
        let (a, b) = shifted_pair(8, 2.0, 1.0);
        let cfg = FrontendConfig {
            fast_threshold: 5,
            ..Default::default()
        };
        let (mut i1, mut i2) = (0, 0);
        assert_eq!(
            match_frames(&a, &b, &[], &cfg, &mut i1),
            match_frames(&a, &b, &[], &cfg, &mut i2)
        );
    }
}
