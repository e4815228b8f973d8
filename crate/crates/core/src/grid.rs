//! Periodic box discretization, discrete Fourier transforms and the NLSF field
//! file format.
//!
//! Transform convention: the forward transform is unnormalized,
//! `û[m] = Σ_j u[j] e^{-2πi m·j/n}`, and the inverse carries the `1/∏n`
//! factor. With `x_j = j·box/n` and `ξ = m/box` this is the sign convention
//! `e^{-2πi x·ξ}`. The zero mode therefore equals `mean(u)·∏n`, and the
//! continuous transform is approximated by `cell_volume · û`.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldFileError, Result};

pub const MAX_DIM: usize = 3;

/// Padded spatial vector; entries past the grid dimension are zero.
pub type Vec3 = [f64; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: Vec<usize>,
    box_len: Vec<f64>,
}

impl GridSpec {
    pub fn new(n: &[usize], box_len: &[f64]) -> Result<Self> {
        let d = n.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if box_len.len() != d {
            return Err(Error::InvalidGrid(format!(
                "{} box lengths for {d} axes",
                box_len.len()
            )));
        }
        for (axis, &nk) in n.iter().enumerate() {
            if nk < 4 || nk % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: n = {nk} must be even and at least 4"
                )));
            }
        }
        for (axis, &l) in box_len.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: box length {l} must be positive"
                )));
            }
        }
        let total = n
            .iter()
            .try_fold(d, |acc: usize, &nk| acc.checked_mul(nk))
            .and_then(|t| t.checked_mul(std::mem::size_of::<Complex64>()))
            .filter(|&bytes| bytes <= isize::MAX as usize);
        if total.is_none() {
            return Err(Error::InvalidGrid("sample count overflows addressable memory".into()));
        }
        Ok(GridSpec {
            n: n.to_vec(),
            box_len: box_len.to_vec(),
        })
    }

    /// `d`-dimensional cube with `n` samples per axis and side `len`.
    pub fn cube(d: usize, n: usize, len: f64) -> Result<Self> {
        GridSpec::new(&vec![n; d], &vec![len; d])
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn box_len(&self) -> &[f64] {
        &self.box_len
    }

    /// Number of lattice points `∏n`.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.n
            .iter()
            .zip(&self.box_len)
            .map(|(&n, &l)| l / n as f64)
            .product()
    }

    pub fn volume(&self) -> f64 {
        self.box_len.iter().product()
    }

    fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [0usize; MAX_DIM];
        let d = self.dim();
        let mut acc = 1;
        for k in (0..d).rev() {
            s[k] = acc;
            acc *= self.n[k];
        }
        s
    }

    pub fn unravel(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        let mut rem = flat;
        for k in (0..self.dim()).rev() {
            idx[k] = rem % self.n[k];
            rem /= self.n[k];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        let s = self.strides();
        idx.iter()
            .take(self.dim())
            .enumerate()
            .map(|(k, &i)| (i % self.n[k]) * s[k])
            .sum()
    }

    /// Signed integer frequency on `axis` for lattice position `i`, in `(-n/2, n/2]`.
    pub fn signed_mode(&self, axis: usize, i: usize) -> i64 {
        let n = self.n[axis];
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn modes(&self, flat: usize) -> [i64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut m = [0i64; MAX_DIM];
        for k in 0..self.dim() {
            m[k] = self.signed_mode(k, idx[k]);
        }
        m
    }

    /// Frequency vector ξ (cycles per unit length) of a lattice index.
    pub fn frequency(&self, flat: usize) -> Result<Vec<f64>> {
        if flat >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: flat,
                len: self.len(),
            });
        }
        Ok(self.freq3(flat)[..self.dim()].to_vec())
    }

    /// Unchecked padded frequency.
    pub fn freq3(&self, flat: usize) -> Vec3 {
        let m = self.modes(flat);
        let mut xi = [0.0; MAX_DIM];
        for k in 0..self.dim() {
            xi[k] = m[k] as f64 / self.box_len[k];
        }
        xi
    }

    /// Physical coordinates of a lattice point.
    pub fn point(&self, flat: usize) -> Vec3 {
        let idx = self.unravel(flat);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim() {
            x[k] = idx[k] as f64 * self.box_len[k] / self.n[k] as f64;
        }
        x
    }

    /// Flat index of the mode `-m`.
    pub fn conjugate_index(&self, flat: usize) -> usize {
        let idx = self.unravel(flat);
        let mut c = [0usize; MAX_DIM];
        for k in 0..self.dim() {
            c[k] = (self.n[k] - idx[k]) % self.n[k];
        }
        self.ravel(&c[..self.dim()])
    }

    /// True when every axis mode satisfies `|m| <= n/3`.
    pub fn in_lower_band(&self, flat: usize) -> bool {
        let m = self.modes(flat);
        (0..self.dim()).all(|k| 3 * m[k].unsigned_abs() as usize <= self.n[k])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    components: usize,
    data: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: GridSpec, components: usize, data: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidParameter("field needs at least one component".into()));
        }
        let expected = components * grid.len();
        if data.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "field data has {} entries, expected {expected}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(VectorField {
            grid,
            components,
            data,
        })
    }

    pub fn zeros(grid: &GridSpec, components: usize) -> Self {
        VectorField {
            data: vec![0.0; components * grid.len()],
            grid: grid.clone(),
            components,
        }
    }

    /// Samples `f(x)` at every lattice point; `f` writes `components` values.
    pub fn from_fn(grid: &GridSpec, components: usize, mut f: impl FnMut(&Vec3, &mut [f64])) -> Self {
        let len = grid.len();
        let mut data = vec![0.0; components * len];
        let mut buf = vec![0.0; components];
        for j in 0..len {
            f(&grid.point(j), &mut buf);
            for c in 0..components {
                data[c * len + j] = buf[c];
            }
        }
        VectorField {
            grid: grid.clone(),
            components,
            data,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    /// Value of the field at lattice point `j` as a padded vector.
    pub fn at(&self, j: usize) -> Vec3 {
        let len = self.grid.len();
        let mut v = [0.0; MAX_DIM];
        for c in 0..self.components.min(MAX_DIM) {
            v[c] = self.data[c * len + j];
        }
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(VectorField {
            grid: self.grid.clone(),
            components: self.components,
            data,
        })
    }

    pub(crate) fn check_same_shape(&self, other: &VectorField) -> Result<()> {
        if self.grid != other.grid || self.components != other.components {
            return Err(Error::GridMismatch(
                "fields live on different grids or have different component counts".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != components * grid.len() {
            return Err(Error::InvalidParameter(format!(
                "spectral data has {} entries, expected {}",
                coeffs.len(),
                components * grid.len()
            )));
        }
        if let Some(index) = coeffs.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(SpectralField {
            grid,
            components,
            coeffs,
        })
    }

    pub fn zeros(grid: &GridSpec, components: usize) -> Self {
        SpectralField {
            grid: grid.clone(),
            components,
            coeffs: vec![Complex64::new(0.0, 0.0); components * grid.len()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient vector at one lattice mode, padded to three components.
    pub fn mode(&self, j: usize) -> [Complex64; MAX_DIM] {
        let len = self.grid.len();
        let mut v = [Complex64::new(0.0, 0.0); MAX_DIM];
        for c in 0..self.components.min(MAX_DIM) {
            v[c] = self.coeffs[c * len + j];
        }
        v
    }

    pub fn set_mode(&mut self, j: usize, v: &[Complex64]) {
        let len = self.grid.len();
        for c in 0..self.components {
            self.coeffs[c * len + j] = v[c];
        }
    }

    /// Largest deviation from `û(-m) = conj(û(m))`, relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let len = self.grid.len();
        let scale = self.coeffs.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for c in 0..self.components {
            for j in 0..len {
                let k = self.grid.conjugate_index(j);
                let a = self.coeffs[c * len + j];
                let b = self.coeffs[c * len + k].conj();
                worst = worst.max((a - b).norm());
            }
        }
        worst / scale
    }

    /// Sum of `|û|²` over all modes and components.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }
}

struct AxisPlans {
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl AxisPlans {
    fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        AxisPlans {
            forward: grid.n().iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: grid.n().iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }
}

/// In-place multidimensional FFT of one scalar block of length `∏n`.
fn fft_block(grid: &GridSpec, plans: &AxisPlans, block: &mut [Complex64], inverse: bool) {
    let d = grid.dim();
    let strides = grid.strides();
    let len = grid.len();
    for axis in 0..d {
        let n = grid.n()[axis];
        let stride = strides[axis];
        let plan = if inverse {
            &plans.inverse[axis]
        } else {
            &plans.forward[axis]
        };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // line starts: every flat index whose coordinate on `axis` is zero
        let outer = len / (n * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let start = o * n * stride + inner;
                for (i, z) in line.iter_mut().enumerate() {
                    *z = block[start + i * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (i, z) in line.iter().enumerate() {
                    block[start + i * stride] = *z;
                }
            }
        }
    }
}

/// Unnormalized forward DFT of every component.
pub fn forward_transform(field: &VectorField) -> Result<SpectralField> {
    if let Some(index) = field.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let grid = field.grid();
    let plans = AxisPlans::new(grid);
    let mut coeffs: Vec<Complex64> = field.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for block in coeffs.chunks_mut(grid.len()) {
        fft_block(grid, &plans, block, false);
    }
    Ok(SpectralField {
        grid: grid.clone(),
        components: field.components,
        coeffs,
    })
}

/// Inverse DFT with the `1/∏n` normalization; returns the real field and the
/// relative imaginary residual `max|Im| / max|Re|`.
pub fn inverse_transform_with_residual(spec: &SpectralField) -> Result<(VectorField, f64)> {
    let grid = spec.grid();
    let plans = AxisPlans::new(grid);
    let mut buf = spec.coeffs.clone();
    for block in buf.chunks_mut(grid.len()) {
        fft_block(grid, &plans, block, true);
    }
    let scale = 1.0 / grid.len() as f64;
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    let data: Vec<f64> = buf
        .iter()
        .map(|z| {
            let re = z.re * scale;
            max_re = max_re.max(re.abs());
            max_im = max_im.max((z.im * scale).abs());
            re
        })
        .collect();
    let residual = if max_im == 0.0 {
        0.0
    } else if max_re == 0.0 {
        f64::INFINITY
    } else {
        max_im / max_re
    };
    let field = VectorField::new(grid.clone(), spec.components, data)?;
    Ok((field, residual))
}

/// Relative imaginary residual above which synthesis is rejected.
pub const NON_REAL_TOL: f64 = 1e-8;

pub fn inverse_transform(spec: &SpectralField) -> Result<VectorField> {
    let (field, residual) = inverse_transform_with_residual(spec)?;
    if residual > NON_REAL_TOL {
        return Err(Error::NonRealSynthesis { residual });
    }
    Ok(field)
}

const MAGIC: [u8; 4] = *b"NLSF";
const VERSION: u32 = 1;

pub fn write_field_to(field: &VectorField, mut w: impl Write) -> std::result::Result<(), FieldFileError> {
    let g = field.grid();
    let mut buf = Vec::with_capacity(16 + 12 * g.dim() + 8 * field.data.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(field.components as u32).to_le_bytes());
    for &n in g.n() {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for &l in g.box_len() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    for &v in &field.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_field(field: &VectorField, path: impl AsRef<Path>) -> std::result::Result<(), FieldFileError> {
    let file = std::fs::File::create(path)?;
    write_field_to(field, std::io::BufWriter::new(file))
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> std::result::Result<&'a [u8], FieldFileError> {
    if bytes.len() < *pos + n {
        return Err(FieldFileError::Truncated {
            expected: *pos + n,
            found: bytes.len(),
        });
    }
    let s = &bytes[*pos..*pos + n];
    *pos += n;
    Ok(s)
}

fn u32_at(bytes: &[u8], pos: &mut usize) -> std::result::Result<u32, FieldFileError> {
    Ok(u32::from_le_bytes(take(bytes, pos, 4)?.try_into().unwrap()))
}

pub fn decode_field(bytes: &[u8]) -> std::result::Result<VectorField, FieldFileError> {
    let mut pos = 0;
    let magic: [u8; 4] = take(bytes, &mut pos, 4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(FieldFileError::BadMagic(magic));
    }
    let version = u32_at(bytes, &mut pos)?;
    if version != VERSION {
        return Err(FieldFileError::Version(version));
    }
    let d = u32_at(bytes, &mut pos)?;
    if d == 0 || d as usize > MAX_DIM {
        return Err(FieldFileError::Dimension(d));
    }
    let components = u32_at(bytes, &mut pos)? as usize;
    let mut n = Vec::with_capacity(d as usize);
    for _ in 0..d {
        n.push(u32_at(bytes, &mut pos)? as usize);
    }
    let mut box_len = Vec::with_capacity(d as usize);
    for _ in 0..d {
        box_len.push(f64::from_le_bytes(take(bytes, &mut pos, 8)?.try_into().unwrap()));
    }
    let grid = GridSpec::new(&n, &box_len).map_err(|e| FieldFileError::Header(e.to_string()))?;
    let count = components
        .checked_mul(grid.len())
        .ok_or_else(|| FieldFileError::Header("payload size overflows".into()))?;
    let payload = take(bytes, &mut pos, 8 * count)?;
    if pos != bytes.len() {
        return Err(FieldFileError::Trailing(bytes.len() - pos));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    VectorField::new(grid, components, data).map_err(|e| FieldFileError::Header(e.to_string()))
}

pub fn read_field(path: impl AsRef<Path>) -> std::result::Result<VectorField, FieldFileError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_field(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &GridSpec, comps: usize, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..comps * grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        VectorField::new(grid.clone(), comps, data).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(&[6, 5], &[1.0, 1.0]).is_err());
        assert!(GridSpec::new(&[2], &[1.0]).is_err());
        assert!(GridSpec::new(&[8], &[0.0]).is_err());
        assert!(GridSpec::new(&[8, 8, 8, 8], &[1.0; 4]).is_err());
        assert!(GridSpec::new(&[8, 8], &[1.0]).is_err());
    }

    #[test]
    fn frequency_convention() {
        let g = GridSpec::cube(2, 8, 1.0).unwrap();
        assert_eq!(g.frequency(0).unwrap(), vec![0.0, 0.0]);
        // axis 0 is the slow axis: index 1 on axis 0 is flat index 8
        assert_eq!(g.frequency(g.ravel(&[1, 0])).unwrap(), vec![1.0, 0.0]);
        assert_eq!(g.frequency(g.ravel(&[7, 0])).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(g.frequency(g.ravel(&[4, 0])).unwrap(), vec![4.0, 0.0]);
        assert!(g.frequency(64).is_err());
        let g2 = GridSpec::new(&[8], &[2.0]).unwrap();
        assert_eq!(g2.frequency(1).unwrap(), vec![0.5]);
    }

    #[test]
    fn constant_field_has_only_zero_mode() {
        let g = GridSpec::cube(2, 8, 3.0).unwrap();
        let u = VectorField::from_fn(&g, 2, |_, v| {
            v[0] = 2.5;
            v[1] = -1.0;
        });
        let s = forward_transform(&u).unwrap();
        for c in 0..2 {
            for j in 0..g.len() {
                let z = s.coeffs()[c * g.len() + j];
                if j == 0 {
                    let mean = if c == 0 { 2.5 } else { -1.0 };
                    assert!((z.re - mean * g.len() as f64).abs() < 1e-12);
                } else {
                    assert!(z.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = GridSpec::new(&[8, 6, 4], &[1.0, 2.0, 0.5]).unwrap();
        let u = random_field(&g, 3, 7);
        let s = forward_transform(&u).unwrap();
        let back = inverse_transform(&s).unwrap();
        let err = u.data().iter().zip(back.data()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12 * u.max_abs());
        let space: f64 = u.data().iter().map(|v| v * v).sum::<f64>() * g.cell_volume();
        let freq = s.energy() * g.cell_volume() / g.len() as f64;
        assert!((space - freq).abs() <= 1e-10 * space);
    }

    #[test]
    fn single_conjugate_pair_is_cosine() {
        let g = GridSpec::cube(1, 16, 1.0).unwrap();
        let mut s = SpectralField::zeros(&g, 1);
        let half = Complex64::new(g.len() as f64 / 2.0, 0.0);
        s.coeffs_mut()[3] = half;
        s.coeffs_mut()[13] = half;
        let u = inverse_transform(&s).unwrap();
        for j in 0..16 {
            let x = g.point(j)[0];
            assert!((u.data()[j] - (2.0 * std::f64::consts::PI * 3.0 * x).cos()).abs() < 1e-14);
        }
        let zero = inverse_transform(&SpectralField::zeros(&g, 2)).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_real_synthesis_rejected() {
        let g = GridSpec::cube(1, 8, 1.0).unwrap();
        let mut s = SpectralField::zeros(&g, 1);
        s.coeffs_mut()[1] = Complex64::new(1.0, 0.0);
        assert!(matches!(inverse_transform(&s), Err(Error::NonRealSynthesis { .. })));
        let (_, residual) = inverse_transform_with_residual(&s).unwrap();
        assert!(residual > 0.5);
    }

    #[test]
    fn non_finite_input_names_index() {
        let g = GridSpec::cube(1, 8, 1.0).unwrap();
        let mut u = VectorField::zeros(&g, 1);
        u.data_mut()[5] = f64::NAN;
        match forward_transform(&u) {
            Err(Error::NonFinite { index }) => assert_eq!(index, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn translation_by_one_cell() {
        let g = GridSpec::new(&[8, 6], &[1.0, 3.0]).unwrap();
        let u = random_field(&g, 1, 3);
        // shift by one cell along axis 1: v(x) = u(x - h)
        let shifted = VectorField::from_fn(&g, 1, |_, _| {});
        let mut data = shifted.into_data();
        for j in 0..g.len() {
            let idx = g.unravel(j);
            let src = g.ravel(&[idx[0], (idx[1] + 6 - 1) % 6]);
            data[j] = u.data()[src];
        }
        let v = VectorField::new(g.clone(), 1, data).unwrap();
        let (su, sv) = (forward_transform(&u).unwrap(), forward_transform(&v).unwrap());
        for j in 0..g.len() {
            let m = g.modes(j);
            let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * m[1] as f64 / 6.0);
            let expect = su.coeffs()[j] * phase;
            assert!((sv.coeffs()[j] - expect).norm() <= 1e-10 * su.coeffs()[0].norm().max(1.0));
        }
    }

    #[test]
    fn field_file_round_trip_and_errors() {
        let g = GridSpec::new(&[8, 4], &[1.0, 0.25]).unwrap();
        let u = random_field(&g, 2, 11);
        let mut bytes = Vec::new();
        write_field_to(&u, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], &[0x4E, 0x4C, 0x53, 0x46]);
        assert_eq!(bytes.len(), 4 + 4 + 4 + 4 + 2 * 4 + 2 * 8 + 8 * 64);
        let back = decode_field(&bytes).unwrap();
        assert!(u.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_field(&bad), Err(FieldFileError::BadMagic(_))));
        let mut badv = bytes.clone();
        badv[4] = 2;
        assert!(matches!(decode_field(&badv), Err(FieldFileError::Version(2))));
        let mut badd = bytes.clone();
        badd[8] = 4;
        assert!(matches!(decode_field(&badd), Err(FieldFileError::Dimension(4))));
        assert!(matches!(
            decode_field(&bytes[..bytes.len() - 3]),
            Err(FieldFileError::Truncated { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_field(&long), Err(FieldFileError::Trailing(1))));
    }

    proptest::proptest! {
        #[test]
        fn transform_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = GridSpec::new(&[8, 4], &[1.0, 1.0]).unwrap();
            let u = random_field(&g, 2, seed);
            let v = random_field(&g, 2, seed + 1);
            let w = u.combine(a, &v, b).unwrap();
            let (fu, fv, fw) = (forward_transform(&u).unwrap(), forward_transform(&v).unwrap(), forward_transform(&w).unwrap());
            let scale = fu.coeffs().iter().chain(fv.coeffs()).fold(1.0f64, |m, z| m.max(z.norm()));
            for j in 0..fw.coeffs().len() {
                let expect = fu.coeffs()[j] * a + fv.coeffs()[j] * b;
                proptest::prop_assert!((fw.coeffs()[j] - expect).norm() <= 1e-12 * scale * (a.abs() + b.abs() + 1.0));
            }
        }

        #[test]
        fn round_trip_any_field(seed in 0u64..1000) {
            let g = GridSpec::new(&[4, 6, 8], &[1.0, 2.0, 3.0]).unwrap();
            let u = random_field(&g, 3, seed);
            let back = inverse_transform(&forward_transform(&u).unwrap()).unwrap();
            let err = u.data().iter().zip(back.data()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            proptest::prop_assert!(err <= 1e-12 * u.max_abs());
        }
    }
}
