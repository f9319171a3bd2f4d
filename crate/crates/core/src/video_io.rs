//! Y4M (YUV4MPEG2) and headerless raw planar video I/O.
//!
//! Only 8-bit `mono`, `420*` and `444` colorspaces are accepted. Interlacing
//! (`I`), aspect (`A`) and extension (`X`) tokens are parsed and dropped.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::types::{ChromaLayout, Frame, Plane, VideoSequence};

const SIGNATURE: &[u8] = b"YUV4MPEG2";
const FRAME_MARKER: &[u8] = b"FRAME";

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum VideoIoError {
    #[error("missing YUV4MPEG2 signature at byte {offset}")]
    MissingSignature { offset: usize },

    #[error("unknown colorspace token {token:?} at byte {offset}")]
    UnknownColorspace { token: String, offset: usize },

    #[error("malformed Y4M header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },

    #[error("expected FRAME marker for frame {frame} at byte {offset}")]
    MissingFrameMarker { frame: usize, offset: usize },

    #[error("truncated payload for frame {frame} at byte {offset}: need {expected} bytes, {available} available")]
    TruncatedFrame { frame: usize, offset: usize, expected: usize, available: usize },

    #[error("raw stream of {actual} bytes is not a whole number of {frame_bytes}-byte frames")]
    RawSizeMismatch { frame_bytes: usize, actual: usize },

    #[error("invalid video geometry: {0}")]
    InvalidGeometry(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Parsed Y4M stream header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    pub fps_num: u32,
    pub fps_den: u32,
    pub colorspace_tag: String,
}

impl Y4mHeader {
    pub fn layout(&self) -> Option<ChromaLayout> {
        layout_from_tag(&self.colorspace_tag)
    }
}

fn layout_from_tag(tag: &str) -> Option<ChromaLayout> {
    match tag {
        "420jpeg" | "420" | "420mpeg2" | "420paldv" => Some(ChromaLayout::Yuv420),
        "444" => Some(ChromaLayout::Yuv444),
        "mono" => Some(ChromaLayout::Mono),
        _ => None,
    }
}

fn tag_for_layout(layout: ChromaLayout) -> &'static str {
    match layout {
        ChromaLayout::Mono => "mono",
        ChromaLayout::Yuv420 => "420jpeg",
        ChromaLayout::Yuv444 => "444",
    }
}

fn find_newline(bytes: &[u8], from: usize) -> Option<usize> {
    bytes[from..].iter().position(|&b| b == b'\n').map(|p| from + p)
}

fn malformed(offset: usize, reason: impl Into<String>) -> VideoIoError {
    VideoIoError::MalformedHeader { offset, reason: reason.into() }
}

fn parse_dim(value: &str, offset: usize, name: char) -> Result<usize, VideoIoError> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(malformed(offset, format!("bad {name} value {value:?}"))),
    }
}

/// Parses the header line. Returns the header and the offset just past its
/// terminating newline.
pub fn parse_y4m_header(bytes: &[u8]) -> Result<(Y4mHeader, usize), VideoIoError> {
    if !bytes.starts_with(SIGNATURE) {
        return Err(VideoIoError::MissingSignature { offset: 0 });
    }
    let end = find_newline(bytes, 0).ok_or_else(|| malformed(bytes.len(), "header line is not newline-terminated"))?;
    let line = &bytes[..end];
    if line.len() > SIGNATURE.len() && line[SIGNATURE.len()] != b' ' {
        return Err(VideoIoError::MissingSignature { offset: 0 });
    }

    let (mut width, mut height, mut fps) = (None, None, None);
    let mut tag = String::from("420jpeg");
    let mut offset = SIGNATURE.len();
    for raw in line[SIGNATURE.len()..].split(|&b| b == b' ') {
        let tok_offset = offset;
        offset += raw.len() + 1;
        if raw.is_empty() {
            continue;
        }
        let tok = std::str::from_utf8(raw).map_err(|_| malformed(tok_offset, "header token is not ASCII"))?;
        let (key, value) = tok.split_at(1);
        match key {
            "W" => width = Some(parse_dim(value, tok_offset, 'W')?),
            "H" => height = Some(parse_dim(value, tok_offset, 'H')?),
            "F" => {
                let (n, d) =
                    value.split_once(':').ok_or_else(|| malformed(tok_offset, format!("bad frame rate {value:?}")))?;
                match (n.parse::<u32>(), d.parse::<u32>()) {
                    (Ok(n), Ok(d)) if n > 0 && d > 0 => fps = Some((n, d)),
                    _ => return Err(malformed(tok_offset, format!("bad frame rate {value:?}"))),
                }
            }
            "C" => {
                if layout_from_tag(value).is_none() {
                    return Err(VideoIoError::UnknownColorspace { token: value.to_string(), offset: tok_offset });
                }
                tag = value.to_string();
            }
            "I" | "A" | "X" => {}
            _ => return Err(malformed(tok_offset, format!("unknown header token {tok:?}"))),
        }
    }

    let width = width.ok_or_else(|| malformed(end, "missing W token"))?;
    let height = height.ok_or_else(|| malformed(end, "missing H token"))?;
    let (fps_num, fps_den) = fps.ok_or_else(|| malformed(end, "missing F token"))?;
    Ok((Y4mHeader { width, height, fps_num, fps_den, colorspace_tag: tag }, end + 1))
}

fn split_planes(payload: &[u8], dims: &[(usize, usize)]) -> Vec<Plane<u8>> {
    let mut planes = Vec::with_capacity(dims.len());
    let mut pos = 0;
    for &(w, h) in dims {
        let n = w * h;
        planes.push(Plane::new(w, h, payload[pos..pos + n].to_vec()).expect("sized by layout"));
        pos += n;
    }
    planes
}

/// Parses a complete in-memory Y4M stream.
pub fn parse_y4m(bytes: &[u8]) -> Result<VideoSequence, VideoIoError> {
    let (header, mut pos) = parse_y4m_header(bytes)?;
    let layout = header.layout().expect("validated during header parse");
    let dims = layout.plane_dims(header.width, header.height);
    let frame_bytes = header
        .width
        .checked_mul(header.height)
        .map(|_| layout.frame_bytes(header.width, header.height))
        .ok_or_else(|| malformed(0, "frame size overflows"))?;
    let mut seq = VideoSequence::new(header.width, header.height, layout, header.fps_num, header.fps_den)
        .map_err(|e| VideoIoError::InvalidGeometry(e.to_string()))?;

    let mut index = 0;
    while pos < bytes.len() {
        if !bytes[pos..].starts_with(FRAME_MARKER) {
            return Err(VideoIoError::MissingFrameMarker { frame: index, offset: pos });
        }
        let line_end = find_newline(bytes, pos).ok_or(VideoIoError::TruncatedFrame {
            frame: index,
            offset: pos,
            expected: frame_bytes,
            available: 0,
        })?;
        let after = line_end + 1;
        let marker_tail = &bytes[pos + FRAME_MARKER.len()..line_end];
        if !marker_tail.is_empty() && marker_tail[0] != b' ' {
            return Err(VideoIoError::MissingFrameMarker { frame: index, offset: pos });
        }
        let available = bytes.len() - after;
        if available < frame_bytes {
            return Err(VideoIoError::TruncatedFrame { frame: index, offset: after, expected: frame_bytes, available });
        }
        let planes = split_planes(&bytes[after..after + frame_bytes], &dims);
        seq.push(Frame::new(planes, layout).expect("sized by layout")).expect("same geometry");
        pos = after + frame_bytes;
        index += 1;
    }
    Ok(seq)
}

/// Reads a whole Y4M stream.
pub fn read_y4m<R: Read>(mut reader: R) -> Result<VideoSequence, VideoIoError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    parse_y4m(&bytes)
}

/// Serializes a sequence to Y4M bytes.
pub fn encode_y4m(seq: &VideoSequence) -> Vec<u8> {
    let (n, d) = seq.fps();
    let mut out =
        format!("YUV4MPEG2 W{} H{} F{n}:{d} Ip A0:0 C{}\n", seq.width(), seq.height(), tag_for_layout(seq.layout()))
            .into_bytes();
    let frame_bytes = seq.layout().frame_bytes(seq.width(), seq.height());
    out.reserve(seq.len() * (frame_bytes + 6));
    for frame in seq.frames() {
        out.extend_from_slice(b"FRAME\n");
        for plane in frame.planes() {
            out.extend_from_slice(plane.samples());
        }
    }
    out
}

pub fn write_y4m<W: Write>(mut writer: W, seq: &VideoSequence) -> Result<(), VideoIoError> {
    writer.write_all(&encode_y4m(seq))?;
    writer.flush()?;
    Ok(())
}

/// Splits a headerless planar stream into frames.
pub fn read_raw_planar(
    bytes: &[u8],
    width: usize,
    height: usize,
    layout: ChromaLayout,
    fps: (u32, u32),
) -> Result<VideoSequence, VideoIoError> {
    let mut seq = VideoSequence::new(width, height, layout, fps.0, fps.1)
        .map_err(|e| VideoIoError::InvalidGeometry(e.to_string()))?;
    let frame_bytes = layout.frame_bytes(width, height);
    if !bytes.len().is_multiple_of(frame_bytes) {
        return Err(VideoIoError::RawSizeMismatch { frame_bytes, actual: bytes.len() });
    }
    let dims = layout.plane_dims(width, height);
    for chunk in bytes.chunks_exact(frame_bytes) {
        let frame = Frame::new(split_planes(chunk, &dims), layout).expect("sized by layout");
        seq.push(frame).expect("same geometry");
    }
    Ok(seq)
}
