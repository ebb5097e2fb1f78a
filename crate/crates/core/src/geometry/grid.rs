//! Bitmap sets on a uniform grid. Cells are indexed by global integer
//! coordinates (origin is stored in cell units), so sets built separately
//! over different windows stay aligned and can be combined exactly.

use std::io::Write as _;
use std::path::Path;

use serde_json::json;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// A finite set of grid cells: a window `origin .. origin + dims` (in cell
/// units) with an occupancy bitmap. `d` is 2 or 3; the third axis is
/// degenerate for d = 2. A cell holds the point at its center.
#[derive(Debug, Clone)]
pub struct GridSet {
    pub d: usize,
    pub h: f64,
    pub origin: [i64; MAX_DIM],
    pub dims: [usize; MAX_DIM],
    bits: Vec<u64>,
}

fn word_count(dims: &[usize; MAX_DIM]) -> usize {
    (dims[0] * dims[1] * dims[2] + 63) / 64
}

impl GridSet {
    pub fn new(d: usize, h: f64, origin: [i64; MAX_DIM], mut dims: [usize; MAX_DIM]) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::InvalidInput(format!("grid dimension {d} not in {{2,3}}")));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("cell size {h} must be positive")));
        }
        if d == 2 {
            dims[2] = 1;
        }
        if dims.iter().any(|&n| n == 0) {
            dims = [0, 0, 0];
        }
        Ok(GridSet { d, h, origin, dims, bits: vec![0; word_count(&dims)] })
    }

    pub fn empty(d: usize, h: f64) -> Result<Self> {
        Self::new(d, h, [0; MAX_DIM], [0; MAX_DIM])
    }

    fn index(&self, cell: [i64; MAX_DIM]) -> Option<usize> {
        let mut idx = 0usize;
        for a in (0..MAX_DIM).rev() {
            let rel = cell[a] - self.origin[a];
            if rel < 0 || rel >= self.dims[a] as i64 {
                return None;
            }
            idx = idx * self.dims[a] + rel as usize;
        }
        Some(idx)
    }

    pub fn contains_cell(&self, cell: [i64; MAX_DIM]) -> bool {
        match self.index(cell) {
            Some(i) => self.bits[i / 64] >> (i % 64) & 1 == 1,
            None => false,
        }
    }

    pub fn set_cell(&mut self, cell: [i64; MAX_DIM], value: bool) {
        if let Some(i) = self.index(cell) {
            if value {
                self.bits[i / 64] |= 1 << (i % 64);
            } else {
                self.bits[i / 64] &= !(1 << (i % 64));
            }
        }
    }

    /// Center coordinates of a cell.
    pub fn cell_center(&self, cell: [i64; MAX_DIM]) -> [f64; MAX_DIM] {
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.d {
            p[a] = (cell[a] as f64 + 0.5) * self.h;
        }
        p
    }

    /// Global cell containing a point.
    pub fn cell_of(h: f64, point: &[f64]) -> [i64; MAX_DIM] {
        let mut c = [0i64; MAX_DIM];
        for (a, &x) in point.iter().enumerate().take(MAX_DIM) {
            c[a] = (x / h).floor() as i64;
        }
        c
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// |S| = h^d * cell count.
    pub fn measure(&self) -> f64 {
        self.h.powi(self.d as i32) * self.count() as f64
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = [i64; MAX_DIM]> + '_ {
        let dims = self.dims;
        let origin = self.origin;
        (0..dims[0] * dims[1] * dims[2].max(1))
            .filter(move |&i| self.bits[i / 64] >> (i % 64) & 1 == 1)
            .map(move |i| {
                let x = i % dims[0];
                let y = (i / dims[0]) % dims[1];
                let z = i / (dims[0] * dims[1]);
                [
                    origin[0] + x as i64,
                    origin[1] + y as i64,
                    origin[2] + z as i64,
                ]
            })
    }

    /// Builds a set over an explicit window from a predicate on cell centers.
    pub fn from_predicate<F: Fn(&[f64]) -> bool>(
        d: usize,
        h: f64,
        origin: [i64; MAX_DIM],
        dims: [usize; MAX_DIM],
        pred: F,
    ) -> Result<Self> {
        let mut s = Self::new(d, h, origin, dims)?;
        let dims = s.dims;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let cell = [
                        origin[0] + x as i64,
                        origin[1] + y as i64,
                        origin[2] + z as i64,
                    ];
                    let p = s.cell_center(cell);
                    if pred(&p[..s.d]) {
                        s.set_cell(cell, true);
                    }
                }
            }
        }
        Ok(s)
    }

    /// Axis-aligned boxes, realized as the cells whose centers they contain.
    /// The window is fitted to the boxes.
    pub fn from_boxes(d: usize, h: f64, boxes: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        if boxes.is_empty() {
            return Self::empty(d, h);
        }
        let mut lo = [f64::INFINITY; MAX_DIM];
        let mut hi = [f64::NEG_INFINITY; MAX_DIM];
        for (blo, bhi) in boxes {
            for a in 0..d {
                lo[a] = lo[a].min(blo[a]);
                hi[a] = hi[a].max(bhi[a]);
            }
        }
        let mut origin = [0i64; MAX_DIM];
        let mut dims = [1usize; MAX_DIM];
        for a in 0..d {
            origin[a] = (lo[a] / h).floor() as i64 - 1;
            dims[a] = ((hi[a] / h).ceil() as i64 - origin[a] + 1) as usize;
        }
        Self::from_predicate(d, h, origin, dims, |p| {
            boxes
                .iter()
                .any(|(blo, bhi)| (0..d).all(|a| blo[a] <= p[a] && p[a] <= bhi[a]))
        })
    }

    fn union_window(&self, other: &GridSet) -> ([i64; MAX_DIM], [usize; MAX_DIM]) {
        let mut origin = [0i64; MAX_DIM];
        let mut dims = [1usize; MAX_DIM];
        for a in 0..MAX_DIM {
            let lo = self.origin[a].min(other.origin[a]);
            let hi = (self.origin[a] + self.dims[a] as i64)
                .max(other.origin[a] + other.dims[a] as i64);
            origin[a] = lo;
            dims[a] = (hi - lo).max(0) as usize;
        }
        (origin, dims)
    }

    fn check_compatible(&self, other: &GridSet) -> Result<()> {
        if self.d != other.d || self.h != other.h {
            return Err(Error::InvalidInput(format!(
                "grid mismatch: d {} vs {}, h {} vs {}",
                self.d, other.d, self.h, other.h
            )));
        }
        Ok(())
    }

    pub fn union(&self, other: &GridSet) -> Result<GridSet> {
        self.check_compatible(other)?;
        let (origin, dims) = self.union_window(other);
        let mut out = GridSet::new(self.d, self.h, origin, dims)?;
        for cell in self.iter_cells().chain(other.iter_cells()) {
            out.set_cell(cell, true);
        }
        Ok(out)
    }

    pub fn intersection(&self, other: &GridSet) -> Result<GridSet> {
        self.check_compatible(other)?;
        let mut out = GridSet::new(self.d, self.h, self.origin, self.dims)?;
        for cell in self.iter_cells() {
            if other.contains_cell(cell) {
                out.set_cell(cell, true);
            }
        }
        Ok(out)
    }

    pub fn difference(&self, other: &GridSet) -> Result<GridSet> {
        self.check_compatible(other)?;
        let mut out = GridSet::new(self.d, self.h, self.origin, self.dims)?;
        for cell in self.iter_cells() {
            if !other.contains_cell(cell) {
                out.set_cell(cell, true);
            }
        }
        Ok(out)
    }

    pub fn intersects(&self, other: &GridSet) -> Result<bool> {
        self.check_compatible(other)?;
        Ok(self.iter_cells().any(|c| other.contains_cell(c)))
    }

    pub fn is_subset_of(&self, other: &GridSet) -> Result<bool> {
        self.check_compatible(other)?;
        Ok(self.iter_cells().all(|c| other.contains_cell(c)))
    }

    /// Minkowski dilation by an exact Euclidean distance transform: the
    /// result holds every cell whose center lies within `r` of an occupied
    /// cell center.
    pub fn dilate(&self, r: f64) -> Result<GridSet> {
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("dilation radius {r}")));
        }
        if self.is_empty() {
            return Self::empty(self.d, self.h);
        }
        let pad = (r / self.h).ceil() as i64 + 1;
        let mut origin = self.origin;
        let mut dims = self.dims;
        for a in 0..self.d {
            origin[a] -= pad;
            dims[a] += 2 * pad as usize;
        }
        let nx = dims[0];
        let ny = dims[1];
        let nz = dims[2].max(1);
        let total = nx * ny * nz;
        const INF: f64 = 1e30;
        let mut field = vec![INF; total];
        for cell in self.iter_cells() {
            let x = (cell[0] - origin[0]) as usize;
            let y = (cell[1] - origin[1]) as usize;
            let z = (cell[2] - origin[2]) as usize;
            field[(z * ny + y) * nx + x] = 0.0;
        }
        // squared EDT, one axis pass at a time
        let mut scratch_f = vec![0.0f64; nx.max(ny).max(nz)];
        let mut scratch_v = vec![0usize; nx.max(ny).max(nz)];
        let mut scratch_z = vec![0.0f64; nx.max(ny).max(nz) + 1];
        for z in 0..nz {
            for y in 0..ny {
                let base = (z * ny + y) * nx;
                edt_1d(&mut field[base..base + nx], 1, &mut scratch_f, &mut scratch_v, &mut scratch_z);
            }
        }
        for z in 0..nz {
            for x in 0..nx {
                let base = z * ny * nx + x;
                let end = base + (ny - 1) * nx + 1;
                edt_1d(&mut field[base..end], nx, &mut scratch_f, &mut scratch_v, &mut scratch_z);
            }
        }
        if self.d == 3 {
            for y in 0..ny {
                for x in 0..nx {
                    let base = y * nx + x;
                    let end = base + (nz - 1) * ny * nx + 1;
                    edt_1d(&mut field[base..end], ny * nx, &mut scratch_f, &mut scratch_v, &mut scratch_z);
                }
            }
        }
        let thresh = (r / self.h) * (r / self.h) * (1.0 + 1e-12);
        let mut out = GridSet::new(self.d, self.h, origin, dims)?;
        for (i, &f) in field.iter().enumerate() {
            if f <= thresh {
                out.bits[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(out)
    }

    /// Writes the bitmap as PGM (binary, 2D; 3D sets stack slices along the
    /// image height) plus a JSON sidecar recording d, h, origin, dims.
    pub fn save(&self, pgm_path: &Path) -> Result<()> {
        let nx = self.dims[0].max(1);
        let rows = (self.dims[1] * self.dims[2].max(1)).max(1);
        let mut data = Vec::with_capacity(nx * rows);
        for z in 0..self.dims[2].max(1) {
            for y in (0..self.dims[1]).rev() {
                for x in 0..self.dims[0] {
                    let cell = [
                        self.origin[0] + x as i64,
                        self.origin[1] + y as i64,
                        self.origin[2] + z as i64,
                    ];
                    data.push(if self.contains_cell(cell) { 255u8 } else { 0 });
                }
            }
        }
        let mut f = std::fs::File::create(pgm_path)?;
        write!(f, "P5\n{} {}\n255\n", nx, rows)?;
        f.write_all(&data)?;
        let sidecar = json!({
            "d": self.d,
            "h": self.h,
            "origin": self.origin,
            "dims": self.dims,
        });
        let json_path = pgm_path.with_extension("json");
        std::fs::write(json_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(pgm_path: &Path) -> Result<GridSet> {
        let sidecar: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(pgm_path.with_extension("json"))?)?;
        let d = sidecar["d"]
            .as_u64()
            .ok_or_else(|| Error::InvalidInput("sidecar missing d".into()))? as usize;
        let h = sidecar["h"]
            .as_f64()
            .ok_or_else(|| Error::InvalidInput("sidecar missing h".into()))?;
        let mut origin = [0i64; MAX_DIM];
        let mut dims = [1usize; MAX_DIM];
        for a in 0..MAX_DIM {
            origin[a] = sidecar["origin"][a].as_i64().unwrap_or(0);
            dims[a] = sidecar["dims"][a].as_u64().unwrap_or(1) as usize;
        }
        let raw = std::fs::read(pgm_path)?;
        // P5 header: magic, width, height, maxval, then binary payload
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 && pos < raw.len() {
            while pos < raw.len() && raw[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
                pos += 1;
            }
            fields.push(std::str::from_utf8(&raw[start..pos]).unwrap_or("").to_string());
        }
        pos += 1;
        if fields.first().map(String::as_str) != Some("P5") {
            return Err(Error::InvalidInput("not a binary PGM".into()));
        }
        let mut s = GridSet::new(d, h, origin, dims)?;
        let nx = s.dims[0];
        let mut i = pos;
        for z in 0..s.dims[2].max(1) {
            for y in (0..s.dims[1]).rev() {
                for x in 0..nx {
                    if i < raw.len() && raw[i] > 0 {
                        s.set_cell(
                            [
                                origin[0] + x as i64,
                                origin[1] + y as i64,
                                origin[2] + z as i64,
                            ],
                            true,
                        );
                    }
                    i += 1;
                }
            }
        }
        Ok(s)
    }
}

/// One pass of the Felzenszwalb-Huttenlocher lower-envelope distance
/// transform along a strided axis, in squared cell units.
fn edt_1d(
    data: &mut [f64],
    stride: usize,
    f: &mut [f64],
    v: &mut [usize],
    z: &mut [f64],
) {
    let n = (data.len() + stride - 1) / stride;
    if n <= 1 {
        return;
    }
    for i in 0..n {
        f[i] = data[i * stride];
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        data[q * stride] = dq * dq + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(h: f64) -> GridSet {
        GridSet::from_boxes(2, h, &[(vec![0.0, 0.0], vec![1.0, 1.0])]).unwrap()
    }

    #[test]
    fn measure_unit_square() {
        let s = unit_square(0.01);
        assert!((s.measure() - 1.0).abs() < 0.03);
    }

    #[test]
    fn empty_dilate_empty() {
        let s = GridSet::empty(2, 0.01).unwrap();
        assert!(s.dilate(0.5).unwrap().is_empty());
        assert_eq!(s.measure(), 0.0);
    }

    #[test]
    fn dilate_single_cell_disc() {
        let h = 0.01;
        let mut s = GridSet::new(2, h, [-2, -2, 0], [5, 5, 1]).unwrap();
        s.set_cell([0, 0, 0], true);
        let d = s.dilate(3.0 * h).unwrap();
        // disc of radius 3 cells: 29 cells (integer lattice points in r<=3)
        let expect = std::f64::consts::PI * 9.0;
        let got = d.count() as f64;
        assert!((got - expect).abs() / expect < 0.15, "{got}");
        assert!(s.is_subset_of(&d).unwrap());
    }

    #[test]
    fn dilate_unit_square_minkowski_area() {
        let h = 0.005;
        let s = unit_square(h);
        let d = s.dilate(0.1).unwrap();
        let expect = 1.0 + 4.0 * 0.1 + std::f64::consts::PI * 0.01;
        assert!(
            (d.measure() - expect).abs() / expect < 0.01,
            "{} vs {expect}",
            d.measure()
        );
    }

    #[test]
    fn dilate_composes_within_slack() {
        let h = 0.01;
        let s = unit_square(h);
        let slack = h * 2f64.sqrt();
        let twice = s.dilate(0.05).unwrap().dilate(0.07).unwrap();
        // dilate(dilate(S,a),b) covers dilate(S,a+b) up to one-cell slack
        let inner = s.dilate(0.12 - slack).unwrap();
        let missing = inner
            .iter_cells()
            .filter(|&c| !twice.contains_cell(c))
            .count();
        assert_eq!(missing, 0);
        // and overshoots by at most one cell of slack
        let outer = s.dilate(0.12 + slack).unwrap();
        assert!(twice.is_subset_of(&outer).unwrap());
    }

    #[test]
    fn set_algebra_alignment() {
        let h = 0.1;
        let a = GridSet::from_boxes(2, h, &[(vec![0.0, 0.0], vec![1.0, 1.0])]).unwrap();
        let b = GridSet::from_boxes(2, h, &[(vec![0.5, 0.5], vec![1.5, 1.5])]).unwrap();
        let u = a.union(&b).unwrap();
        let i = a.intersection(&b).unwrap();
        let da = a.difference(&b).unwrap();
        assert_eq!(u.count() + i.count(), a.count() + b.count());
        assert_eq!(da.count(), a.count() - i.count());
        assert!(a.intersects(&b).unwrap());
        assert!(i.is_subset_of(&a).unwrap() && i.is_subset_of(&b).unwrap());
    }

    #[test]
    fn measure_additive_disjoint() {
        let h = 0.05;
        let a = GridSet::from_boxes(2, h, &[(vec![0.0, 0.0], vec![1.0, 1.0])]).unwrap();
        let b = GridSet::from_boxes(2, h, &[(vec![3.0, 0.0], vec![4.0, 1.0])]).unwrap();
        assert!(!a.intersects(&b).unwrap());
        let u = a.union(&b).unwrap();
        assert!((u.measure() - a.measure() - b.measure()).abs() < 1e-12);
    }

    #[test]
    fn dilate_3d_ball() {
        let h = 0.05;
        let mut s = GridSet::new(3, h, [0, 0, 0], [1, 1, 1]).unwrap();
        s.set_cell([0, 0, 0], true);
        let d = s.dilate(4.0 * h).unwrap();
        let expect = 4.0 / 3.0 * std::f64::consts::PI * 64.0;
        let got = d.count() as f64;
        assert!((got - expect).abs() / expect < 0.2, "{got} vs {expect}");
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.pgm");
        let s = GridSet::from_boxes(2, 0.05, &[(vec![0.1, 0.2], vec![0.8, 0.9])]).unwrap();
        s.save(&path).unwrap();
        let back = GridSet::load(&path).unwrap();
        assert_eq!(back.count(), s.count());
        assert_eq!(back.origin, s.origin);
        for c in s.iter_cells() {
            assert!(back.contains_cell(c));
        }
    }
}
