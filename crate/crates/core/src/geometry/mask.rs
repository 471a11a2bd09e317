//! Dense class masks, polygon rasterization and mask arithmetic.
//!
//! Rasterization samples pixel centers `(x + 0.5, y + 0.5)` with the
//! even-odd fill rule. For axis-aligned rectangles with integer corners
//! the resulting pixel counts are exact.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::annot::{AnnotatedRegion, SemanticClass};
use crate::error::{Error, Result};

/// Paint order for overlapping regions, low to high priority. Later
/// (rarer, diagnostic) classes win where regions overlap.
pub const CLASS_PRIORITY: [SemanticClass; 6] = [
    SemanticClass::Beet,
    SemanticClass::Soil,
    SemanticClass::Leaf,
    SemanticClass::Cut,
    SemanticClass::Dmg,
    SemanticClass::Rot,
];

fn priority_rank(class: SemanticClass) -> usize {
    CLASS_PRIORITY
        .iter()
        .position(|c| *c == class)
        .unwrap_or(usize::MAX)
}

/// Palette used when writing semantic masks as indexed PNGs, three bytes
/// per class in index order.
pub const SEMANTIC_PALETTE: [u8; 21] = [
    0, 0, 0, // Bg
    188, 143, 89, // Beet
    255, 228, 120, // Cut
    76, 175, 80, // Leaf
    121, 85, 61, // Soil
    229, 57, 53, // Dmg
    123, 31, 162, // Rot
];

const BINARY_PALETTE: [u8; 6] = [0, 0, 0, 255, 255, 255];

/// Dense per-pixel class-index raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl SemanticMask {
    pub fn filled(width: u32, height: u32, class: SemanticClass) -> SemanticMask {
        SemanticMask {
            width,
            height,
            data: vec![class.index() as u8; width as usize * height as usize],
        }
    }

    /// Wrap a raw buffer; every value must be a valid class index.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<SemanticMask> {
        if data.len() != width as usize * height as usize {
            return Err(Error::Validation(format!(
                "mask buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(bad) = data.iter().find(|v| **v >= SemanticClass::COUNT as u8) {
            return Err(Error::Validation(format!("invalid class index {bad} in mask")));
        }
        Ok(SemanticMask { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, class: SemanticClass) {
        self.data[y as usize * self.width as usize + x as usize] = class.index() as u8;
    }

    pub fn class_counts(&self) -> [u64; SemanticClass::COUNT] {
        let mut counts = [0u64; SemanticClass::COUNT];
        for value in &self.data {
            counts[*value as usize] += 1;
        }
        counts
    }

    /// Write as an indexed-color PNG, palette index = class index.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        write_indexed_png(path, self.width, self.height, &self.data, &SEMANTIC_PALETTE)
    }

    pub fn read_png(path: &Path) -> Result<SemanticMask> {
        let (width, height, data) = read_indexed_png(path)?;
        SemanticMask::from_raw(width, height, data)
    }
}

/// Dense 0/1 raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> BinaryMask {
        BinaryMask {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<BinaryMask> {
        if data.len() != width as usize * height as usize {
            return Err(Error::Validation(format!(
                "mask buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| *v > 1) {
            return Err(Error::Validation("binary mask values must be 0 or 1".into()));
        }
        Ok(BinaryMask { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[y as usize * self.width as usize + x as usize] = value as u8;
    }

    pub fn count_ones(&self) -> u64 {
        self.data.iter().map(|v| *v as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|v| *v == 0)
    }

    /// OR another mask of identical dimensions into this one.
    pub fn or_assign(&mut self, other: &BinaryMask) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
    }

    /// True when any pixel is set in both masks.
    pub fn intersects(&self, other: &BinaryMask) -> bool {
        self.data.iter().zip(&other.data).any(|(a, b)| a & b != 0)
    }

    /// Tight integer bounding box of the set pixels as a pixel-edge box,
    /// `None` when the mask is empty.
    pub fn bbox(&self) -> Option<super::AxisAlignedBox> {
        let mut x0 = u32::MAX;
        let mut y0 = u32::MAX;
        let mut x1 = 0u32;
        let mut y1 = 0u32;
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        if !any {
            return None;
        }
        Some(
            super::AxisAlignedBox::new(
                f64::from(x0),
                f64::from(y0),
                f64::from(x1 + 1),
                f64::from(y1 + 1),
            )
            .expect("non-empty extent"),
        )
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        write_indexed_png(path, self.width, self.height, &self.data, &BINARY_PALETTE)
    }

    pub fn read_png(path: &Path) -> Result<BinaryMask> {
        let (width, height, data) = read_indexed_png(path)?;
        BinaryMask::from_raw(width, height, data)
    }
}

/// Rasterize labeled regions into a semantic mask.
///
/// Each pixel receives the class of the highest-priority region covering
/// its center (even-odd rule); uncovered pixels stay `Bg`.
pub fn rasterize(regions: &[AnnotatedRegion], width: u32, height: u32) -> SemanticMask {
    let mut mask = SemanticMask::filled(width, height, SemanticClass::Bg);
    let mut ordered: Vec<&AnnotatedRegion> = regions.iter().collect();
    ordered.sort_by_key(|r| priority_rank(r.class()));
    for region in ordered {
        let class = region.class().index() as u8;
        scanline_fill(region.polygon().vertices(), width, height, |y, x0, x1| {
            let row = y as usize * width as usize;
            mask.data[row + x0 as usize..row + x1 as usize].fill(class);
        });
    }
    mask
}

/// Rasterize a single closed vertex loop into a binary mask.
pub fn rasterize_polygon(vertices: &[[f64; 2]], width: u32, height: u32) -> BinaryMask {
    let mut mask = BinaryMask::new(width, height);
    scanline_fill(vertices, width, height, |y, x0, x1| {
        let row = y as usize * width as usize;
        mask.data[row + x0 as usize..row + x1 as usize].fill(1);
    });
    mask
}

/// Even-odd scanline fill over pixel centers. Calls `fill_span(y, x0, x1)`
/// for half-open pixel ranges `[x0, x1)`.
fn scanline_fill(vertices: &[[f64; 2]], width: u32, height: u32, mut fill_span: impl FnMut(u32, u32, u32)) {
    let n = vertices.len();
    if n < 3 || width == 0 || height == 0 {
        return;
    }
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        y_lo = y_lo.min(v[1]);
        y_hi = y_hi.max(v[1]);
    }
    let row_start = (y_lo - 0.5).ceil().max(0.0) as i64;
    let row_end = ((y_hi - 0.5).ceil() as i64).min(height as i64);
    let mut crossings: Vec<f64> = Vec::new();
    for y in row_start.max(0)..row_end.max(0) {
        let sy = y as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let [x0, y0] = vertices[i];
            let [x1, y1] = vertices[(i + 1) % n];
            if y0 == y1 {
                continue;
            }
            let crosses = (y0 <= sy && sy < y1) || (y1 <= sy && sy < y0);
            if crosses {
                crossings.push(x0 + (sy - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
        for pair in crossings.chunks_exact(2) {
            let x_start = (pair[0] - 0.5).ceil().max(0.0) as i64;
            let x_end = ((pair[1] - 0.5).ceil() as i64).min(width as i64);
            if x_start < x_end {
                fill_span(y as u32, x_start as u32, x_end as u32);
            }
        }
    }
}

/// Intersection-over-union of two equally sized binary masks.
///
/// Two empty masks compare as 1.0: a class absent from both prediction and
/// ground truth is perfectly predicted.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::Geometry(format!(
            "mask dimension mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&pa, &pb) in a.data.iter().zip(&b.data) {
        inter += (pa & pb) as u64;
        union += (pa | pb) as u64;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Fill enclosed background holes: background pixels not 4-connected to
/// the mask border become foreground.
pub fn fill_holes(mask: &mut BinaryMask) {
    let (w, h) = (mask.width as usize, mask.height as usize);
    if w == 0 || h == 0 {
        return;
    }
    let mut outside = vec![false; w * h];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let push = |x: usize, y: usize, outside: &mut Vec<bool>, stack: &mut Vec<(usize, usize)>, data: &[u8]| {
        let idx = y * w + x;
        if !outside[idx] && data[idx] == 0 {
            outside[idx] = true;
            stack.push((x, y));
        }
    };
    for x in 0..w {
        push(x, 0, &mut outside, &mut stack, &mask.data);
        push(x, h - 1, &mut outside, &mut stack, &mask.data);
    }
    for y in 0..h {
        push(0, y, &mut outside, &mut stack, &mask.data);
        push(w - 1, y, &mut outside, &mut stack, &mask.data);
    }
    while let Some((x, y)) = stack.pop() {
        if x > 0 {
            push(x - 1, y, &mut outside, &mut stack, &mask.data);
        }
        if x + 1 < w {
            push(x + 1, y, &mut outside, &mut stack, &mask.data);
        }
        if y > 0 {
            push(x, y - 1, &mut outside, &mut stack, &mask.data);
        }
        if y + 1 < h {
            push(x, y + 1, &mut outside, &mut stack, &mask.data);
        }
    }
    for (idx, value) in mask.data.iter_mut().enumerate() {
        if *value == 0 && !outside[idx] {
            *value = 1;
        }
    }
}

/// Trace the boundary of the set pixels along pixel edges.
///
/// Returns closed vertex loops on the lattice; diagonally touching pixels
/// are traversed as one loop (the junction continues onto the diagonal
/// neighbor). Rasterizing the returned loops with the even-odd rule
/// reproduces the input mask exactly, provided holes were filled first.
pub fn trace_boundary(mask: &BinaryMask) -> Vec<Vec<[f64; 2]>> {
    let w = mask.width;
    let h = mask.height;
    // directed boundary edges, interior kept on the left
    let mut edges: Vec<((u32, u32), (u32, u32))> = Vec::new();
    let filled = |x: i64, y: i64| {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && mask.get(x as u32, y as u32)
    };
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            if !filled(xi, yi - 1) {
                edges.push(((x + 1, y), (x, y))); // top, walking -x
            }
            if !filled(xi, yi + 1) {
                edges.push(((x, y + 1), (x + 1, y + 1))); // bottom, walking +x
            }
            if !filled(xi - 1, yi) {
                edges.push(((x, y), (x, y + 1))); // left, walking +y
            }
            if !filled(xi + 1, yi) {
                edges.push(((x + 1, y + 1), (x + 1, y))); // right, walking -y
            }
        }
    }

    let mut outgoing: std::collections::BTreeMap<(u32, u32), Vec<usize>> =
        std::collections::BTreeMap::new();
    for (index, (start, _)) in edges.iter().enumerate() {
        outgoing.entry(*start).or_default().push(index);
    }
    let mut used = vec![false; edges.len()];
    let direction = |e: &((u32, u32), (u32, u32))| {
        (
            e.1 .0 as i64 - e.0 .0 as i64,
            e.1 .1 as i64 - e.0 .1 as i64,
        )
    };

    let mut loops = Vec::new();
    let starts: Vec<(u32, u32)> = outgoing.keys().copied().collect();
    for start in starts {
        while let Some(first) = outgoing
            .get(&start)
            .and_then(|c| c.iter().copied().find(|i| !used[*i]))
        {
            let mut path: Vec<(u32, u32)> = vec![edges[first].0];
            let mut current = first;
            used[current] = true;
            loop {
                let vertex = edges[current].1;
                let candidates: Vec<usize> = outgoing
                    .get(&vertex)
                    .map(|c| c.iter().copied().filter(|i| !used[*i]).collect())
                    .unwrap_or_default();
                let next = match candidates.len() {
                    0 => break,
                    1 => candidates[0],
                    _ => {
                        // pinch vertex: continue onto the diagonal neighbor
                        let din = direction(&edges[current]);
                        *candidates
                            .iter()
                            .find(|i| {
                                let dout = direction(&edges[**i]);
                                din.0 * dout.1 - din.1 * dout.0 > 0
                            })
                            .unwrap_or(&candidates[0])
                    }
                };
                path.push(vertex);
                used[next] = true;
                current = next;
            }
            loops.push(collapse_collinear(path));
        }
    }
    loops
}

fn collapse_collinear(path: Vec<(u32, u32)>) -> Vec<[f64; 2]> {
    let n = path.len();
    let mut kept: Vec<[f64; 2]> = Vec::with_capacity(n);
    for i in 0..n {
        let prev = path[(i + n - 1) % n];
        let here = path[i];
        let next = path[(i + 1) % n];
        let d0 = (here.0 as i64 - prev.0 as i64, here.1 as i64 - prev.1 as i64);
        let d1 = (next.0 as i64 - here.0 as i64, next.1 as i64 - here.1 as i64);
        if d0.0 * d1.1 - d0.1 * d1.0 != 0 {
            kept.push([f64::from(here.0), f64::from(here.1)]);
        }
    }
    kept
}

fn write_indexed_png(path: &Path, width: u32, height: u32, data: &[u8], palette: &[u8]) -> Result<()> {
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width, height);
    encoder.set_color(png::ColorType::Indexed);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_palette(palette.to_vec());
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(data).map_err(png_err)?;
    Ok(())
}

fn read_indexed_png(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let file = File::open(path)?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![
        0u8;
        reader
            .output_buffer_size()
            .ok_or_else(|| Error::Png("image too large".into()))?
    ];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    match (info.color_type, info.bit_depth) {
        (png::ColorType::Indexed, png::BitDepth::Eight)
        | (png::ColorType::Grayscale, png::BitDepth::Eight) => {}
        (color, depth) => {
            return Err(Error::Png(format!(
                "expected 8-bit indexed mask PNG, got {color:?}/{depth:?}"
            )))
        }
    }
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, buf))
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Png(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annot::Polygon;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]).unwrap()
    }

    fn region(class: SemanticClass, polygon: Polygon, instance: u32) -> AnnotatedRegion {
        AnnotatedRegion::new(class, polygon, instance).unwrap()
    }

    /// Even-odd point-in-polygon, the slow reference used by the oracle
    /// tests.
    fn point_in_polygon(p: [f64; 2], vertices: &[[f64; 2]]) -> bool {
        let mut inside = false;
        let n = vertices.len();
        for i in 0..n {
            let [x0, y0] = vertices[i];
            let [x1, y1] = vertices[(i + 1) % n];
            if (y0 <= p[1] && p[1] < y1) || (y1 <= p[1] && p[1] < y0) {
                let cross_x = x0 + (p[1] - y0) * (x1 - x0) / (y1 - y0);
                if p[0] < cross_x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    #[test]
    fn single_square_fills_exactly() {
        let regions = vec![region(SemanticClass::Beet, rect(5.0, 5.0, 15.0, 15.0), 0)];
        let mask = rasterize(&regions, 100, 100);
        let counts = mask.class_counts();
        assert_eq!(counts[SemanticClass::Beet.index()], 100);
        assert_eq!(counts[SemanticClass::Bg.index()], 100 * 100 - 100);
        assert!(mask.get(5, 5) == SemanticClass::Beet.index() as u8);
        assert!(mask.get(15, 15) == SemanticClass::Bg.index() as u8);
    }

    #[test]
    fn rot_wins_over_beet_on_overlap() {
        let regions = vec![
            region(SemanticClass::Rot, rect(8.0, 8.0, 12.0, 12.0), 0),
            region(SemanticClass::Beet, rect(5.0, 5.0, 15.0, 15.0), 0),
        ];
        let mask = rasterize(&regions, 20, 20);
        assert_eq!(mask.get(9, 9), SemanticClass::Rot.index() as u8);
        assert_eq!(mask.get(6, 6), SemanticClass::Beet.index() as u8);
        let counts = mask.class_counts();
        assert_eq!(counts[SemanticClass::Rot.index()], 16);
        assert_eq!(counts[SemanticClass::Beet.index()], 100 - 16);
    }

    #[test]
    fn rasterize_matches_per_pixel_oracle_on_overlapping_fixture() {
        let regions = vec![
            region(SemanticClass::Beet, rect(2.0, 2.0, 30.0, 28.0), 0),
            region(
                SemanticClass::Soil,
                Polygon::new(vec![[4.0, 3.5], [22.3, 6.0], [17.0, 24.0]]).unwrap(),
                0,
            ),
            region(SemanticClass::Cut, rect(10.5, 1.0, 19.5, 9.25), 0),
            region(
                SemanticClass::Dmg,
                Polygon::new(vec![[25.0, 20.0], [34.0, 22.0], [28.0, 31.0], [22.0, 27.0]]).unwrap(),
                0,
            ),
            region(SemanticClass::Rot, rect(15.0, 15.0, 26.0, 23.0), 1),
        ];
        let mask = rasterize(&regions, 36, 32);

        // O(pixels x polygons) reference: the highest-priority region
        // covering each pixel center wins
        for y in 0..32u32 {
            for x in 0..36u32 {
                let p = [f64::from(x) + 0.5, f64::from(y) + 0.5];
                let mut expected = SemanticClass::Bg;
                let mut best_rank: Option<usize> = None;
                for r in &regions {
                    if point_in_polygon(p, r.polygon().vertices()) {
                        let rank = priority_rank(r.class());
                        if best_rank.is_none_or(|best| rank > best) {
                            best_rank = Some(rank);
                            expected = r.class();
                        }
                    }
                }
                assert_eq!(
                    mask.get(x, y),
                    expected.index() as u8,
                    "pixel ({x}, {y})"
                );
            }
        }
    }

    #[test]
    fn mask_iou_cases() {
        let mut a = rasterize_polygon(rect(0.0, 0.0, 2.0, 2.0).vertices(), 8, 8);
        let b = a.clone();
        assert_eq!(mask_iou(&a, &b).unwrap(), 1.0);

        let disjoint = rasterize_polygon(rect(4.0, 4.0, 6.0, 6.0).vertices(), 8, 8);
        assert_eq!(mask_iou(&a, &disjoint).unwrap(), 0.0);

        // two 2x2 squares overlapping in a 1x2 strip -> 2/6
        let shifted = rasterize_polygon(rect(1.0, 0.0, 3.0, 2.0).vertices(), 8, 8);
        let iou = mask_iou(&a, &shifted).unwrap();
        assert!((iou - 2.0 / 6.0).abs() < 1e-12);

        let empty_a = BinaryMask::new(8, 8);
        let empty_b = BinaryMask::new(8, 8);
        assert_eq!(mask_iou(&empty_a, &empty_b).unwrap(), 1.0);

        a.set(0, 0, true);
        let other = BinaryMask::new(4, 4);
        assert!(mask_iou(&a, &other).is_err());
    }

    #[test]
    fn integer_rectangles_rasterize_exactly() {
        for (x0, y0, x1, y1) in [(0u32, 0u32, 10u32, 10u32), (3, 7, 19, 12), (0, 0, 1, 1)] {
            let poly = rect(f64::from(x0), f64::from(y0), f64::from(x1), f64::from(y1));
            let mask = rasterize_polygon(poly.vertices(), 24, 24);
            assert_eq!(
                mask.count_ones(),
                u64::from((x1 - x0).min(24) * (y1 - y0).min(24))
            );
        }
    }

    #[test]
    fn hole_filling_closes_enclosed_background() {
        // ring: outer 10x10 square with 4x4 hole
        let mut mask = rasterize_polygon(rect(2.0, 2.0, 12.0, 12.0).vertices(), 16, 16);
        for y in 5..9 {
            for x in 5..9 {
                mask.set(x, y, false);
            }
        }
        assert_eq!(mask.count_ones(), 100 - 16);
        fill_holes(&mut mask);
        assert_eq!(mask.count_ones(), 100);
        // background that touches the border is untouched
        assert!(!mask.get(0, 0));
    }

    #[test]
    fn traced_boundary_rasterizes_back_to_the_mask() {
        let mut mask = BinaryMask::new(12, 10);
        for (x, y) in [(2, 2), (3, 2), (2, 3), (3, 3), (4, 3), (4, 4), (5, 5), (6, 6)] {
            mask.set(x, y, true);
        }
        let loops = trace_boundary(&mask);
        assert_eq!(loops.len(), 1, "diagonal pinches traced as one loop");
        let mut back = BinaryMask::new(12, 10);
        for l in &loops {
            back.or_assign(&rasterize_polygon(l, 12, 10));
        }
        assert_eq!(back, mask);
    }

    #[test]
    fn traced_boundary_of_random_blobs_round_trips() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let mut mask = BinaryMask::new(20, 16);
            for _ in 0..rng.random_range(1..5) {
                let x0 = rng.random_range(0..16u32);
                let y0 = rng.random_range(0..12u32);
                let w = rng.random_range(1..5u32);
                let h = rng.random_range(1..5u32);
                for y in y0..(y0 + h).min(16) {
                    for x in x0..(x0 + w).min(20) {
                        mask.set(x, y, true);
                    }
                }
            }
            fill_holes(&mut mask);
            let loops = trace_boundary(&mask);
            let mut back = BinaryMask::new(20, 16);
            for l in &loops {
                back.or_assign(&rasterize_polygon(l, 20, 16));
            }
            assert_eq!(back, mask);
        }
    }

    #[test]
    fn semantic_mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.png");
        let regions = vec![
            region(SemanticClass::Beet, rect(1.0, 1.0, 9.0, 7.0), 0),
            region(SemanticClass::Rot, rect(3.0, 3.0, 5.0, 5.0), 0),
        ];
        let mask = rasterize(&regions, 12, 9);
        mask.write_png(&path).unwrap();
        let back = SemanticMask::read_png(&path).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn binary_mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.png");
        let mask = rasterize_polygon(rect(0.0, 0.0, 3.0, 2.0).vertices(), 5, 4);
        mask.write_png(&path).unwrap();
        let back = BinaryMask::read_png(&path).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn bbox_of_mask() {
        let mask = rasterize_polygon(rect(2.0, 3.0, 7.0, 6.0).vertices(), 10, 10);
        let bbox = mask.bbox().unwrap();
        assert_eq!(bbox.as_array(), [2.0, 3.0, 7.0, 6.0]);
        assert!(BinaryMask::new(4, 4).bbox().is_none());
    }
}
