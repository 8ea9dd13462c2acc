//! Peak extraction and resolution metrics on image maps.

use super::ImageMap;
use crate::scene::Pos;
use crate::{Error, Result};

/// A local maximum of an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position: Pos,
    pub value: f64,
    pub ix: usize,
    pub iz: usize,
}

/// Local maxima above `threshold_frac * max`, greedily separated by at
/// least `min_separation` cells (Chebyshev distance). Peaks are ordered by
/// value, ties broken by flat grid index.
pub fn extract_peaks(
    img: &ImageMap,
    threshold_frac: f64,
    min_separation: usize,
) -> Result<Vec<Peak>> {
    if threshold_frac <= 0.0 || threshold_frac > 1.0 {
        return Err(Error::Validation(format!(
            "threshold fraction {threshold_frac} not in (0, 1]"
        )));
    }
    let iw = img.window();
    let (nx, nz) = (iw.nx(), iw.nz());
    let max = img.max_value();
    if max <= 0.0 || max.is_nan() {
        return Ok(Vec::new());
    }
    let threshold = threshold_frac * max;

    let mut candidates: Vec<Peak> = Vec::new();
    for ix in 0..nx {
        for iz in 0..nz {
            let v = img.value(ix, iz);
            if v < threshold {
                continue;
            }
            let mut is_max = true;
            'nbhd: for dx in -1i64..=1 {
                for dz in -1i64..=1 {
                    if dx == 0 && dz == 0 {
                        continue;
                    }
                    let jx = ix as i64 + dx;
                    let jz = iz as i64 + dz;
                    if jx < 0 || jz < 0 || jx >= nx as i64 || jz >= nz as i64 {
                        continue;
                    }
                    if img.value(jx as usize, jz as usize) > v {
                        is_max = false;
                        break 'nbhd;
                    }
                }
            }
            if is_max {
                candidates.push(Peak { position: iw.point(iw.index(ix, iz)), value: v, ix, iz });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then((a.ix * nz + a.iz).cmp(&(b.ix * nz + b.iz)))
    });

    let mut peaks: Vec<Peak> = Vec::new();
    for c in candidates {
        let far = peaks.iter().all(|p| {
            let dx = p.ix.abs_diff(c.ix);
            let dz = p.iz.abs_diff(c.iz);
            dx.max(dz) >= min_separation.max(1)
        });
        if far {
            peaks.push(c);
        }
    }
    Ok(peaks)
}

/// Full widths at half maximum through a peak, along each grid axis, via
/// linear interpolation between samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionMetrics {
    pub cross_range_fwhm: f64,
    pub range_fwhm: f64,
    /// Set when a half-maximum crossing ran into the window boundary; the
    /// affected width is then a lower bound.
    pub boundary_clipped: bool,
}

/// Measures the FWHM of `img` around the peak at cell `(ix, iz)`.
pub fn resolution_metrics(img: &ImageMap, peak: &Peak) -> Result<ResolutionMetrics> {
    let iw = img.window();
    let (nx, nz) = (iw.nx(), iw.nz());
    if peak.ix >= nx || peak.iz >= nz {
        return Err(Error::Index("peak cell outside the image".into()));
    }
    let v0 = img.value(peak.ix, peak.iz);
    let local_max = |ix: usize, iz: usize| -> bool {
        let mut ok = true;
        for (jx, jz) in [
            (ix.wrapping_sub(1), iz),
            (ix + 1, iz),
            (ix, iz.wrapping_sub(1)),
            (ix, iz + 1),
        ] {
            if jx < nx && jz < nz && img.value(jx, jz) > v0 {
                ok = false;
            }
        }
        ok
    };
    if v0 <= 0.0 || v0.is_nan() || !local_max(peak.ix, peak.iz) {
        return Err(Error::Validation("metrics need a positive local maximum".into()));
    }
    let half = v0 / 2.0;

    let mut clipped = false;
    let mut half_width = |along_x: bool, positive: bool| -> f64 {
        let pitch = if along_x { iw.pixel().0 } else { iw.pixel().1 };
        let at = |step: i64| -> Option<f64> {
            let (ix, iz) = if along_x {
                (peak.ix as i64 + step, peak.iz as i64)
            } else {
                (peak.ix as i64, peak.iz as i64 + step)
            };
            if ix < 0 || iz < 0 || ix >= nx as i64 || iz >= nz as i64 {
                None
            } else {
                Some(img.value(ix as usize, iz as usize))
            }
        };
        let dir: i64 = if positive { 1 } else { -1 };
        let mut prev = v0;
        let mut step = 1i64;
        loop {
            match at(dir * step) {
                Some(v) if v <= half => {
                    // linear interpolation between the bracketing samples
                    let t = (prev - half) / (prev - v);
                    return ((step - 1) as f64 + t) * pitch;
                }
                Some(v) => {
                    prev = v;
                    step += 1;
                }
                None => {
                    clipped = true;
                    return (step - 1) as f64 * pitch;
                }
            }
        }
    };

    let cross = half_width(true, true) + half_width(true, false);
    let range = half_width(false, true) + half_width(false, false);
    Ok(ResolutionMetrics {
        cross_range_fwhm: cross,
        range_fwhm: range,
        boundary_clipped: clipped,
    })
}
