//! Motion-compensated temporal denoiser producing the base layer.
//!
//! Each of the up to `2K` neighbors of a frame is block-matched against it
//! (full search, luma only), motion-compensated into a prediction, and then
//! averaged with the current frame using per-block weights
//! `w = exp(-SAD / (lambda * pixels_in_block))`. The current frame has weight 1.

use rayon::prelude::*;

use crate::types::{DenoiseConfig, Frame, Plane, VideoSequence};
use crate::{Error, Result};

/// Per-block motion vectors and matching costs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionField {
    block: usize,
    blocks_x: usize,
    blocks_y: usize,
    vectors: Vec<(i32, i32)>,
    sads: Vec<u64>,
}

impl MotionField {
    /// A field of zero vectors; SADs are zero.
    pub fn zero(width: usize, height: usize, block: usize) -> Self {
        let (bx, by) = (width.div_ceil(block), height.div_ceil(block));
        Self { block, blocks_x: bx, blocks_y: by, vectors: vec![(0, 0); bx * by], sads: vec![0; bx * by] }
    }

    /// A field with the same vector in every block. SADs are zero until
    /// recomputed with [`MotionField::with_sads`].
    pub fn uniform(width: usize, height: usize, block: usize, v: (i32, i32)) -> Self {
        let mut f = Self::zero(width, height, block);
        f.vectors.fill(v);
        f
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.blocks_x, self.blocks_y)
    }

    pub fn vector(&self, bx: usize, by: usize) -> (i32, i32) {
        self.vectors[by * self.blocks_x + bx]
    }

    pub fn sad(&self, bx: usize, by: usize) -> u64 {
        self.sads[by * self.blocks_x + bx]
    }

    pub fn vectors(&self) -> &[(i32, i32)] {
        &self.vectors
    }

    pub fn sads(&self) -> &[u64] {
        &self.sads
    }

    fn covers(&self, plane: &Plane<u8>) -> bool {
        plane.width().div_ceil(self.block) == self.blocks_x && plane.height().div_ceil(self.block) == self.blocks_y
    }

    /// Recomputes every block's SAD between `target` and `reference`
    /// displaced by the block's vector.
    pub fn with_sads(mut self, target: &Plane<u8>, reference: &Plane<u8>) -> Self {
        for by in 0..self.blocks_y {
            for bx in 0..self.blocks_x {
                let i = by * self.blocks_x + bx;
                let rect = block_rect(target, self.block, bx, by);
                self.sads[i] = block_sad(target, reference, rect, self.vectors[i], u64::MAX);
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

fn block_rect(plane: &Plane<u8>, block: usize, bx: usize, by: usize) -> Rect {
    let x0 = bx * block;
    let y0 = by * block;
    Rect { x0, y0, x1: (x0 + block).min(plane.width()), y1: (y0 + block).min(plane.height()) }
}

/// SAD of `rect` in `target` against `reference` displaced by `v`, with
/// edge-clamped reference reads. Stops early once the sum exceeds `limit`.
fn block_sad(target: &Plane<u8>, reference: &Plane<u8>, rect: Rect, v: (i32, i32), limit: u64) -> u64 {
    let (dx, dy) = (v.0 as isize, v.1 as isize);
    let inside = rect.x0 as isize + dx >= 0
        && rect.y0 as isize + dy >= 0
        && rect.x1 as isize + dx <= reference.width() as isize
        && rect.y1 as isize + dy <= reference.height() as isize;
    let mut sad = 0u64;
    for y in rect.y0..rect.y1 {
        let t = &target.row(y)[rect.x0..rect.x1];
        if inside {
            let ry = (y as isize + dy) as usize;
            let rx0 = (rect.x0 as isize + dx) as usize;
            let r = &reference.row(ry)[rx0..rx0 + t.len()];
            sad += t.iter().zip(r).map(|(&a, &b)| u64::from(a.abs_diff(b))).sum::<u64>();
        } else {
            for (i, &a) in t.iter().enumerate() {
                let b = reference.get_clamped((rect.x0 + i) as isize + dx, y as isize + dy);
                sad += u64::from(a.abs_diff(b));
            }
        }
        if sad > limit {
            return sad;
        }
    }
    sad
}

fn check_dims(a: &Plane<u8>, b: &Plane<u8>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::GeometryMismatch(format!("planes {:?} and {:?} differ in size", a.dims(), b.dims())));
    }
    Ok(())
}

/// Full-search block matching of `target` against `reference`.
///
/// Each block picks the vector in `[-r, r]^2` with the least SAD; ties go to
/// the smallest `|dx| + |dy|`, then the smallest `dy`, then the smallest `dx`.
pub fn motion_search(target: &Plane<u8>, reference: &Plane<u8>, cfg: &DenoiseConfig) -> Result<MotionField> {
    check_dims(target, reference)?;
    let r = cfg.search_radius as i32;
    // Candidates in tie-break order, so a strictly smaller SAD is needed to
    // displace an earlier one.
    let mut candidates: Vec<(i32, i32)> = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect();
    candidates.sort_by_key(|&(dx, dy)| (dx.abs() + dy.abs(), dy, dx));

    let mut field = MotionField::zero(target.width(), target.height(), cfg.block);
    for by in 0..field.blocks_y {
        for bx in 0..field.blocks_x {
            let rect = block_rect(target, cfg.block, bx, by);
            let mut best = (candidates[0], u64::MAX);
            for &v in &candidates {
                let sad = block_sad(target, reference, rect, v, best.1);
                if sad < best.1 {
                    best = (v, sad);
                    if sad == 0 {
                        break;
                    }
                }
            }
            let i = by * field.blocks_x + bx;
            field.vectors[i] = best.0;
            field.sads[i] = best.1;
        }
    }
    Ok(field)
}

/// Builds the motion-compensated prediction of the target from `reference`.
pub fn compensate(reference: &Plane<u8>, field: &MotionField) -> Plane<u8> {
    assert!(field.covers(reference), "motion field geometry does not match the plane");
    let mut out = reference.clone();
    for by in 0..field.blocks_y {
        for bx in 0..field.blocks_x {
            let rect = block_rect(reference, field.block, bx, by);
            let (dx, dy) = field.vector(bx, by);
            for y in rect.y0..rect.y1 {
                for x in rect.x0..rect.x1 {
                    let v = reference.get_clamped(x as isize + dx as isize, y as isize + dy as isize);
                    out.set(x, y, v);
                }
            }
        }
    }
    out
}

/// Similarity-weighted average of the current plane and its predictions.
pub fn temporal_filter(
    current: &Plane<u8>,
    predictions: &[(Plane<u8>, MotionField)],
    cfg: &DenoiseConfig,
) -> Result<Plane<u8>> {
    for (p, f) in predictions {
        check_dims(current, p)?;
        if !f.covers(current) {
            return Err(Error::GeometryMismatch("motion field does not cover the plane".into()));
        }
    }
    let Some((_, first)) = predictions.first() else {
        return Ok(current.clone());
    };
    let block = first.block;
    let (bxs, bys) = first.grid();
    if predictions.iter().any(|(_, f)| f.block != block) {
        return Err(Error::GeometryMismatch("motion fields use different block sizes".into()));
    }

    let mut out = current.clone();
    let mut weights = vec![0.0; predictions.len()];
    for by in 0..bys {
        for bx in 0..bxs {
            let rect = block_rect(current, block, bx, by);
            let pixels = rect.area() as f64;
            for (w, (_, f)) in weights.iter_mut().zip(predictions) {
                *w = (-(f.sad(bx, by) as f64) / (cfg.lambda * pixels)).exp();
            }
            let total = 1.0 + weights.iter().sum::<f64>();
            for y in rect.y0..rect.y1 {
                for x in rect.x0..rect.x1 {
                    let mut acc = f64::from(current.get(x, y));
                    for (w, (p, _)) in weights.iter().zip(predictions) {
                        acc += w * f64::from(p.get(x, y));
                    }
                    out.set(x, y, (acc / total).round().clamp(0.0, 255.0) as u8);
                }
            }
        }
    }
    Ok(out)
}

/// Carries a luma motion field over to a chroma plane: block size and
/// vectors scale by the plane-size ratio (vectors rounded toward zero) and
/// SADs are recomputed on the chroma samples.
pub fn derive_chroma_field(
    luma_field: &MotionField,
    luma_dims: (usize, usize),
    target: &Plane<u8>,
    reference: &Plane<u8>,
) -> MotionField {
    let (lw, lh) = luma_dims;
    let (cw, ch) = target.dims();
    let block = (luma_field.block * cw / lw).max(1);
    let mut field = MotionField::zero(cw, ch, block);
    let (lbx, lby) = luma_field.grid();
    for by in 0..field.blocks_y {
        for bx in 0..field.blocks_x {
            let (dx, dy) = luma_field.vector(bx.min(lbx - 1), by.min(lby - 1));
            let v = ((i64::from(dx) * cw as i64 / lw as i64) as i32, (i64::from(dy) * ch as i64 / lh as i64) as i32);
            field.vectors[by * field.blocks_x + bx] = v;
        }
    }
    field.with_sads(target, reference)
}

/// Denoises one frame from its temporal neighbors.
pub fn denoise_frame(current: &Frame, neighbors: &[&Frame], cfg: &DenoiseConfig) -> Result<Frame> {
    let luma = &current.planes()[0];
    let luma_fields = neighbors.iter().map(|n| motion_search(luma, &n.planes()[0], cfg)).collect::<Result<Vec<_>>>()?;

    let mut planes = Vec::with_capacity(current.planes().len());
    for (c, plane) in current.planes().iter().enumerate() {
        let predictions: Vec<_> = neighbors
            .iter()
            .zip(&luma_fields)
            .map(|(n, lf)| {
                let reference = &n.planes()[c];
                let field = if c == 0 { lf.clone() } else { derive_chroma_field(lf, luma.dims(), plane, reference) };
                (compensate(reference, &field), field)
            })
            .collect();
        planes.push(temporal_filter(plane, &predictions, cfg)?);
    }
    Frame::new(planes, current.layout())
}

/// Denoises every frame using neighbors `f-K..f+K` clipped to the sequence.
///
/// Frames are processed in parallel on the current rayon pool; output does
/// not depend on scheduling.
pub fn denoise_sequence(seq: &VideoSequence, cfg: &DenoiseConfig) -> Result<VideoSequence> {
    cfg.validate()?;
    let frames = seq.frames();
    let k = cfg.k_frames;
    let out = (0..frames.len())
        .into_par_iter()
        .map(|f| {
            let lo = f.saturating_sub(k);
            let hi = (f + k).min(frames.len() - 1);
            let neighbors: Vec<&Frame> = (lo..=hi).filter(|&n| n != f).map(|n| &frames[n]).collect();
            denoise_frame(&frames[f], &neighbors, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    seq.with_frames(out)
}
