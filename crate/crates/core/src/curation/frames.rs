use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// One 8-bit RGB image, row-major, 3 bytes per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, rgb: Vec<u8>) -> Result<Self> {
        if rgb.len() != width as usize * height as usize * 3 {
            return Err(Error::param(format!(
                "{width}x{height} frame needs {} bytes, got {}",
                width as usize * height as usize * 3,
                rgb.len()
            )));
        }
        Ok(Self { width, height, rgb })
    }

    pub fn solid(width: u32, height: u32, color: [u8; 3]) -> Self {
        let rgb = color.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self { width, height, rgb }
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.rgb.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
    pub fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(Error::param(format!("fps must be > 0, got {fps}")));
        }
        if let Some(first) = frames.first() {
            if let Some(i) = frames
                .iter()
                .position(|f| (f.width, f.height) != (first.width, first.height))
            {
                return Err(Error::Validation(format!(
                    "frame {i} is {}x{}, expected {}x{}",
                    frames[i].width, frames[i].height, first.width, first.height
                )));
            }
        }
        Ok(Self { frames, fps })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }
}

/// Writes a binary PPM (P6).
pub fn write_ppm(path: &Path, frame: &Frame) -> Result<()> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.rgb);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_ppm(path: &Path) -> Result<Frame> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    Frame::new(w, h, img.into_raw())
}

fn parse_meta(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() == "fps" {
                return v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("{}: bad fps '{}'", path.display(), v.trim())));
            }
        }
    }
    Err(Error::Format(format!("{}: missing fps=<float>", path.display())))
}

/// Loads `<dir>/frame_%06d.ppm` in index order plus the `meta` fps sidecar.
pub fn load_source(dir: &Path) -> Result<FrameSequence> {
    let fps = parse_meta(&dir.join("meta"))?;
    let mut indexed = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(idx) = name
            .strip_prefix("frame_")
            .and_then(|s| s.strip_suffix(".ppm"))
            .filter(|s| s.len() == 6)
            .and_then(|s| s.parse::<u32>().ok())
        else {
            continue;
        };
        indexed.push((idx, entry.path()));
    }
    indexed.sort();
    let frames = indexed
        .iter()
        .map(|(_, p)| read_ppm(p))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, fps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_roundtrip_through_loader() {
        let dir = tempfile::tempdir().unwrap();
        let a = Frame::new(2, 1, vec![1, 2, 3, 250, 251, 252]).unwrap();
        let b = Frame::solid(2, 1, [9, 8, 7]);
        write_ppm(&dir.path().join("frame_000001.ppm"), &b).unwrap();
        write_ppm(&dir.path().join("frame_000000.ppm"), &a).unwrap();
        fs::write(dir.path().join("meta"), "fps=12.5\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let seq = load_source(dir.path()).unwrap();
        assert_eq!(seq.fps, 12.5);
        assert_eq!(seq.frames, vec![a, b]);
    }

    #[test]
    fn missing_meta_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_source(dir.path()).is_err());
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let frames = vec![Frame::solid(2, 2, [0; 3]), Frame::solid(3, 2, [0; 3])];
        assert!(FrameSequence::new(frames, 10.0).is_err());
        assert!(FrameSequence::new(vec![], 0.0).is_err());
    }
}
