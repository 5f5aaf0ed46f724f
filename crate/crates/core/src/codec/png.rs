//! Chunk-level PNG reading and writing for 8-bit, non-interlaced images.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::frame::{PixelFrame, RgbaFrame};

pub const SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

const MAX_CHUNK_LEN: u32 = 0x7fff_ffff;

pub type ChunkType = [u8; 4];

pub const IHDR: ChunkType = *b"IHDR";
pub const IDAT: ChunkType = *b"IDAT";
pub const IEND: ChunkType = *b"IEND";
pub const ACTL: ChunkType = *b"acTL";
pub const FCTL: ChunkType = *b"fcTL";
pub const FDAT: ChunkType = *b"fdAT";

pub(crate) fn chunk_name(ty: &ChunkType) -> String {
    String::from_utf8_lossy(ty).into_owned()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk<'a> {
    pub ty: ChunkType,
    pub data: &'a [u8],
}

pub(crate) fn crc(ty: &ChunkType, data: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(ty);
    h.update(data);
    h.finalize()
}

pub(crate) fn write_chunk(out: &mut Vec<u8>, ty: ChunkType, data: &[u8]) {
    let len = u32::try_from(data.len()).expect("chunk payload fits in u32");
    assert!(len <= MAX_CHUNK_LEN, "chunk payload too large");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&ty);
    out.extend_from_slice(data);
    out.extend_from_slice(&crc(&ty, data).to_be_bytes());
}

/// Splits a PNG byte stream into CRC-checked chunks, up to and including
/// IEND.
pub fn parse_chunks(bytes: &[u8]) -> Result<Vec<Chunk<'_>>> {
    if bytes.len() < SIGNATURE.len() || bytes[..8] != SIGNATURE {
        return Err(Error::format("missing PNG signature"));
    }
    let mut pos = 8;
    let mut chunks = Vec::new();
    loop {
        if bytes.len() < pos + 8 {
            return Err(Error::format(format!(
                "truncated chunk header at offset {pos} (no IEND)"
            )));
        }
        let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().unwrap());
        let ty: ChunkType = bytes[pos + 4..pos + 8].try_into().unwrap();
        if len > MAX_CHUNK_LEN {
            return Err(Error::format(format!("chunk {} length {len} too large", chunk_name(&ty))));
        }
        let start = pos + 8;
        let end = start + len as usize;
        if bytes.len() < end + 4 {
            return Err(Error::format(format!("chunk {} truncated", chunk_name(&ty))));
        }
        let data = &bytes[start..end];
        let stored = u32::from_be_bytes(bytes[end..end + 4].try_into().unwrap());
        if stored != crc(&ty, data) {
            return Err(Error::format(format!("chunk {} has bad CRC", chunk_name(&ty))));
        }
        chunks.push(Chunk { ty, data });
        pos = end + 4;
        if ty == IEND {
            return Ok(chunks);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorType {
    Gray,
    Rgb,
    GrayAlpha,
    Rgba,
}

impl ColorType {
    pub fn code(self) -> u8 {
        match self {
            Self::Gray => 0,
            Self::Rgb => 2,
            Self::GrayAlpha => 4,
            Self::Rgba => 6,
        }
    }

    pub fn channels(self) -> usize {
        match self {
            Self::Gray => 1,
            Self::GrayAlpha => 2,
            Self::Rgb => 3,
            Self::Rgba => 4,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Self::Gray),
            2 => Ok(Self::Rgb),
            4 => Ok(Self::GrayAlpha),
            6 => Ok(Self::Rgba),
            3 => Err(Error::Unsupported("palette PNG images".into())),
            _ => Err(Error::format(format!("IHDR: invalid color type {code}"))),
        }
    }

    pub(crate) fn for_channels(channels: usize) -> Self {
        match channels {
            1 => Self::Gray,
            2 => Self::GrayAlpha,
            3 => Self::Rgb,
            4 => Self::Rgba,
            _ => unreachable!("no PNG color type with {channels} channels"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub width: u32,
    pub height: u32,
    pub color: ColorType,
}

impl Header {
    pub(crate) fn encode(&self) -> [u8; 13] {
        let mut d = [0u8; 13];
        d[..4].copy_from_slice(&self.width.to_be_bytes());
        d[4..8].copy_from_slice(&self.height.to_be_bytes());
        d[8] = 8;
        d[9] = self.color.code();
        // compression, filter method, interlace all 0
        d
    }

    pub(crate) fn decode(data: &[u8]) -> Result<Self> {
        if data.len() != 13 {
            return Err(Error::format(format!("IHDR length {} (expected 13)", data.len())));
        }
        let width = u32::from_be_bytes(data[..4].try_into().unwrap());
        let height = u32::from_be_bytes(data[4..8].try_into().unwrap());
        if width == 0 || height == 0 || width > MAX_CHUNK_LEN || height > MAX_CHUNK_LEN {
            return Err(Error::format(format!("IHDR: invalid size {width}x{height}")));
        }
        let color = ColorType::from_code(data[9])?;
        if data[8] != 8 {
            return Err(Error::Unsupported(format!("bit depth {}", data[8])));
        }
        if data[10] != 0 || data[11] != 0 {
            return Err(Error::format("IHDR: unknown compression or filter method"));
        }
        match data[12] {
            0 => {}
            1 => return Err(Error::Unsupported("interlaced PNG images".into())),
            m => return Err(Error::format(format!("IHDR: invalid interlace method {m}"))),
        }
        Ok(Self {
            width,
            height,
            color,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterType {
    None = 0,
    Sub = 1,
    Up = 2,
    Average = 3,
    Paeth = 4,
}

const ALL_FILTERS: [FilterType; 5] = [
    FilterType::None,
    FilterType::Sub,
    FilterType::Up,
    FilterType::Average,
    FilterType::Paeth,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterStrategy {
    /// Per scanline, the filter whose output has the smallest sum of
    /// absolute values (bytes read as signed).
    #[default]
    MinSumAbs,
    Fixed(FilterType),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    /// zlib level 0..=9.
    pub compression: u32,
    pub filter: FilterStrategy,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            compression: 6,
            filter: FilterStrategy::MinSumAbs,
        }
    }
}

fn paeth(a: u8, b: u8, c: u8) -> u8 {
    let p = i16::from(a) + i16::from(b) - i16::from(c);
    let pa = (p - i16::from(a)).abs();
    let pb = (p - i16::from(b)).abs();
    let pc = (p - i16::from(c)).abs();
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}

fn filter_row(ty: FilterType, row: &[u8], prev: &[u8], bpp: usize, out: &mut Vec<u8>) {
    out.push(ty as u8);
    for i in 0..row.len() {
        let a = if i >= bpp { row[i - bpp] } else { 0 };
        let b = prev[i];
        let c = if i >= bpp { prev[i - bpp] } else { 0 };
        let pred = match ty {
            FilterType::None => 0,
            FilterType::Sub => a,
            FilterType::Up => b,
            FilterType::Average => ((u16::from(a) + u16::from(b)) / 2) as u8,
            FilterType::Paeth => paeth(a, b, c),
        };
        out.push(row[i].wrapping_sub(pred));
    }
}

fn filter_image(pixels: &[u8], stride: usize, bpp: usize, strategy: FilterStrategy) -> Vec<u8> {
    let zero = vec![0u8; stride];
    let mut out = Vec::with_capacity(pixels.len() + pixels.len() / stride.max(1));
    let mut trial = Vec::with_capacity(stride + 1);
    for (y, row) in pixels.chunks_exact(stride).enumerate() {
        let prev = if y == 0 { &zero[..] } else { &pixels[(y - 1) * stride..y * stride] };
        match strategy {
            FilterStrategy::Fixed(ty) => filter_row(ty, row, prev, bpp, &mut out),
            FilterStrategy::MinSumAbs => {
                let mut best: Option<(u64, FilterType)> = None;
                for ty in ALL_FILTERS {
                    trial.clear();
                    filter_row(ty, row, prev, bpp, &mut trial);
                    let score: u64 = trial[1..].iter().map(|&v| u64::from((v as i8).unsigned_abs())).sum();
                    if best.is_none_or(|(s, _)| score < s) {
                        best = Some((score, ty));
                    }
                }
                filter_row(best.unwrap().1, row, prev, bpp, &mut out);
            }
        }
    }
    out
}

/// Filters and deflates raw interleaved pixels into zlib image data.
pub(crate) fn compress_image(pixels: &[u8], width: u32, channels: usize, opts: &EncodeOptions) -> Vec<u8> {
    let stride = width as usize * channels;
    let filtered = filter_image(pixels, stride, channels, opts.filter);
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::new(opts.compression.min(9)));
    enc.write_all(&filtered).expect("in-memory write");
    enc.finish().expect("in-memory write")
}

fn unfilter(data: &[u8], width: u32, height: u32, bpp: usize) -> Result<Vec<u8>> {
    let stride = width as usize * bpp;
    let expected = (stride + 1) * height as usize;
    if data.len() < expected {
        return Err(Error::format(format!(
            "image data is {} bytes, expected {expected}",
            data.len()
        )));
    }
    let mut out = vec![0u8; stride * height as usize];
    for y in 0..height as usize {
        let line = &data[y * (stride + 1)..(y + 1) * (stride + 1)];
        let (ty, src) = (line[0], &line[1..]);
        let (done, rest) = out.split_at_mut(y * stride);
        let prev = if y == 0 { None } else { Some(&done[(y - 1) * stride..]) };
        let row = &mut rest[..stride];
        for i in 0..stride {
            let a = if i >= bpp { row[i - bpp] } else { 0 };
            let b = prev.map_or(0, |p| p[i]);
            let c = if i >= bpp { prev.map_or(0, |p| p[i - bpp]) } else { 0 };
            let pred = match ty {
                0 => 0,
                1 => a,
                2 => b,
                3 => ((u16::from(a) + u16::from(b)) / 2) as u8,
                4 => paeth(a, b, c),
                _ => return Err(Error::format(format!("unknown scanline filter type {ty} on row {y}"))),
            };
            row[i] = src[i].wrapping_add(pred);
        }
    }
    Ok(out)
}

/// Inflates and unfilters image data into raw interleaved pixels in the
/// stored color type.
pub(crate) fn decompress_image(zdata: &[u8], width: u32, height: u32, color: ColorType) -> Result<Vec<u8>> {
    let bpp = color.channels();
    let expected = (width as usize * bpp + 1) * height as usize;
    let mut raw = Vec::with_capacity(expected);
    ZlibDecoder::new(zdata)
        .take(expected as u64 + 1)
        .read_to_end(&mut raw)
        .map_err(|e| Error::format(format!("IDAT: corrupt deflate stream: {e}")))?;
    unfilter(&raw, width, height, bpp)
}

/// Expands decoded pixels of any supported color type to RGBA.
pub(crate) fn to_rgba(pixels: &[u8], color: ColorType) -> Vec<u8> {
    match color {
        ColorType::Rgba => pixels.to_vec(),
        ColorType::Rgb => pixels.chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect(),
        ColorType::GrayAlpha => pixels.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0], p[1]]).collect(),
        ColorType::Gray => pixels.iter().flat_map(|&g| [g, g, g, 255]).collect(),
    }
}

pub fn encode_png<F: PixelFrame>(frame: &F, opts: &EncodeOptions) -> Vec<u8> {
    let header = Header {
        width: frame.width(),
        height: frame.height(),
        color: ColorType::for_channels(F::CHANNELS),
    };
    let mut out = SIGNATURE.to_vec();
    write_chunk(&mut out, IHDR, &header.encode());
    let z = compress_image(frame.as_bytes(), frame.width(), F::CHANNELS, opts);
    write_chunk(&mut out, IDAT, &z);
    write_chunk(&mut out, IEND, &[]);
    out
}

/// Decodes the default image of a PNG (the IDAT stream) to RGBA.
pub fn decode_png(bytes: &[u8]) -> Result<RgbaFrame> {
    let chunks = parse_chunks(bytes)?;
    let first = chunks.first().ok_or_else(|| Error::format("no chunks"))?;
    if first.ty != IHDR {
        return Err(Error::format(format!("first chunk is {}, expected IHDR", chunk_name(&first.ty))));
    }
    let header = Header::decode(first.data)?;
    let z: Vec<u8> = chunks.iter().filter(|c| c.ty == IDAT).flat_map(|c| c.data.iter().copied()).collect();
    if z.is_empty() {
        return Err(Error::format("no IDAT chunk"));
    }
    let pixels = decompress_image(&z, header.width, header.height, header.color)?;
    RgbaFrame::new(header.width, header.height, to_rgba(&pixels, header.color))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_png<F: PixelFrame>(frame: &F, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_png(frame, &EncodeOptions::default()))
}

pub fn write_png_rgba(frame: &RgbaFrame, path: impl AsRef<Path>) -> Result<()> {
    write_png(frame, path)
}

pub fn read_png_rgba(path: impl AsRef<Path>) -> Result<RgbaFrame> {
    let path = path.as_ref();
    decode_png(&read_file(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}
