//! Minimal named-array container (`.mrfq`).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "MRFQ"  version:u16  count:u32
//! count x { name_len:u32 name:utf8  dtype:u8  ndim:u8  dims:u32[ndim]  byte_len:u64  data }
//! ```
//!
//! dtype codes: 1 = f32, 2 = c64 (interleaved f32 re/im), 3 = u8. Data is
//! row-major. Domain objects are stored under fixed entry names; see the
//! `put_*` / `get_*` helpers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use num_complex::Complex;

use crate::acquisition::{CoilMaps, FrameMasks, KSpace};
use crate::dictionary::{Basis, Dictionary, Lut};
use crate::epg::SequenceParams;
use crate::error::{Error, Result};
use crate::phantom::QMaps;
use crate::scalar::{cplx, Cplx, Real};
use crate::tsmi::Tsmi;

pub const MAGIC: &[u8; 4] = b"MRFQ";
pub const VERSION: u16 = 1;

macro_rules! format_err {
    ($($arg:tt)*) => { Error::Format(format!($($arg)*)) };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    C64 = 2,
    U8 = 3,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::C64 => 8,
            DType::U8 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(DType::F32),
            2 => Ok(DType::C64),
            3 => Ok(DType::U8),
            other => Err(format_err!("unknown dtype code {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    C64(Vec<Complex<f32>>),
    U8(Vec<u8>),
}

impl ArrayData {
    pub fn dtype(&self) -> DType {
        match self {
            ArrayData::F32(_) => DType::F32,
            ArrayData::C64(_) => DType::C64,
            ArrayData::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::C64(v) => v.len(),
            ArrayData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: ArrayData,
}

impl ArrayEntry {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: ArrayData) -> Result<Self> {
        let name = name.into();
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(format_err!("entry {name}: dims {dims:?} hold {expected} values, got {}", data.len()));
        }
        if dims.len() > u8::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(format_err!("entry {name}: dims {dims:?} not representable"));
        }
        Ok(Self { name, dims, data })
    }

    fn byte_len(&self) -> usize {
        self.data.len() * self.data.dtype().size()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArrayContainer {
    entries: Vec<ArrayEntry>,
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => format_err!("truncated container"),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

impl ArrayContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ArrayEntry] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn insert(&mut self, entry: ArrayEntry) -> Result<()> {
        if self.get(&entry.name).is_some() {
            return Err(format_err!("duplicate entry name {}", entry.name));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ArrayEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    fn require(&self, name: &str) -> Result<&ArrayEntry> {
        self.get(name).ok_or_else(|| format_err!("missing entry {name}"))
    }

    /// Copies every entry of `other` into `self`.
    pub fn merge(&mut self, other: ArrayContainer) -> Result<()> {
        for e in other.entries {
            self.insert(e)?;
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for e in &self.entries {
            let name = e.name.as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&[e.data.dtype() as u8, e.dims.len() as u8])?;
            for &d in &e.dims {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            w.write_all(&(e.byte_len() as u64).to_le_bytes())?;
            match &e.data {
                ArrayData::F32(v) => {
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                ArrayData::C64(v) => {
                    for z in v {
                        w.write_all(&z.re.to_le_bytes())?;
                        w.write_all(&z.im.to_le_bytes())?;
                    }
                }
                ArrayData::U8(v) => w.write_all(v)?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        if &read_exact::<_, 4>(&mut r)? != MAGIC {
            return Err(format_err!("bad magic, not an MRFQ container"));
        }
        let version = u16::from_le_bytes(read_exact(&mut r)?);
        if version != VERSION {
            return Err(format_err!("unsupported container version {version}"));
        }
        let count = u32::from_le_bytes(read_exact(&mut r)?) as usize;
        let mut out = Self::new();
        for _ in 0..count {
            let name_len = u32::from_le_bytes(read_exact(&mut r)?) as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name).map_err(|_| format_err!("truncated entry name"))?;
            let name = String::from_utf8(name).map_err(|_| format_err!("entry name is not UTF-8"))?;
            let [code, ndim] = read_exact::<_, 2>(&mut r)?;
            let dtype = DType::from_code(code)?;
            let dims: Vec<usize> = (0..ndim)
                .map(|_| read_exact::<_, 4>(&mut r).map(|b| u32::from_le_bytes(b) as usize))
                .collect::<Result<_>>()?;
            let byte_len = u64::from_le_bytes(read_exact(&mut r)?) as usize;
            let count: usize = dims.iter().product();
            if count.checked_mul(dtype.size()) != Some(byte_len) {
                return Err(format_err!("entry {name}: byte length {byte_len} does not match dims {dims:?}"));
            }
            let mut raw = vec![0u8; byte_len];
            r.read_exact(&mut raw).map_err(|_| format_err!("entry {name}: truncated payload"))?;
            let f32_at = |i: usize| f32::from_le_bytes(raw[i..i + 4].try_into().expect("4 bytes"));
            let data = match dtype {
                DType::F32 => ArrayData::F32((0..count).map(|i| f32_at(4 * i)).collect()),
                DType::C64 => ArrayData::C64((0..count).map(|i| Complex::new(f32_at(8 * i), f32_at(8 * i + 4))).collect()),
                DType::U8 => ArrayData::U8(raw),
            };
            out.insert(ArrayEntry { name, dims, data })?;
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn put_real<T: Real>(&mut self, name: &str, dims: Vec<usize>, values: &[T]) -> Result<()> {
        let data = ArrayData::F32(values.iter().map(|v| v.as_f64() as f32).collect());
        self.insert(ArrayEntry::new(name, dims, data)?)
    }

    pub fn put_complex<T: Real>(&mut self, name: &str, dims: Vec<usize>, values: &[Cplx<T>]) -> Result<()> {
        let data = ArrayData::C64(values.iter().map(|z| Complex::new(z.re.as_f64() as f32, z.im.as_f64() as f32)).collect());
        self.insert(ArrayEntry::new(name, dims, data)?)
    }

    pub fn put_u8(&mut self, name: &str, dims: Vec<usize>, values: Vec<u8>) -> Result<()> {
        self.insert(ArrayEntry::new(name, dims, ArrayData::U8(values))?)
    }

    pub fn get_real<T: Real>(&self, name: &str) -> Result<(Vec<usize>, Vec<T>)> {
        let e = self.require(name)?;
        match &e.data {
            ArrayData::F32(v) => Ok((e.dims.clone(), v.iter().map(|&x| T::lit(x as f64)).collect())),
            _ => Err(format_err!("entry {name} is not f32")),
        }
    }

    pub fn get_complex<T: Real>(&self, name: &str) -> Result<(Vec<usize>, Vec<Cplx<T>>)> {
        let e = self.require(name)?;
        match &e.data {
            ArrayData::C64(v) => Ok((e.dims.clone(), v.iter().map(|z| cplx(T::lit(z.re as f64), T::lit(z.im as f64))).collect())),
            _ => Err(format_err!("entry {name} is not c64")),
        }
    }

    pub fn get_u8(&self, name: &str) -> Result<(Vec<usize>, Vec<u8>)> {
        let e = self.require(name)?;
        match &e.data {
            ArrayData::U8(v) => Ok((e.dims.clone(), v.clone())),
            _ => Err(format_err!("entry {name} is not u8")),
        }
    }
}

fn dims_n<const N: usize>(name: &str, dims: &[usize]) -> Result<[usize; N]> {
    dims.try_into().map_err(|_| format_err!("entry {name}: expected {N} dims, got {dims:?}"))
}

pub fn put_tsmi<T: Real>(c: &mut ArrayContainer, name: &str, x: &Tsmi<T>) -> Result<()> {
    let (ch, h, w) = x.dim();
    c.put_complex(name, vec![ch, h, w], x.as_slice())
}

pub fn get_tsmi<T: Real>(c: &ArrayContainer, name: &str) -> Result<Tsmi<T>> {
    let (dims, v) = c.get_complex(name)?;
    let [ch, h, w] = dims_n(name, &dims)?;
    Tsmi::from_vec(ch, h, w, v)
}

pub fn put_kspace<T: Real>(c: &mut ArrayContainer, y: &KSpace<T>) -> Result<()> {
    let (a, b, n) = y.dim();
    c.put_complex("kspace", vec![a, b, n], y.as_slice())
}

pub fn get_kspace<T: Real>(c: &ArrayContainer) -> Result<KSpace<T>> {
    let (dims, v) = c.get_complex("kspace")?;
    let d: [usize; 3] = dims_n("kspace", &dims)?;
    Ok(KSpace::from_array(Array3::from_shape_vec((d[0], d[1], d[2]), v).expect("dims checked")))
}

pub fn put_coils<T: Real>(c: &mut ArrayContainer, coils: &CoilMaps<T>) -> Result<()> {
    let (n, h, w) = coils.sens().dim();
    c.put_complex("coils", vec![n, h, w], coils.sens().as_slice().expect("standard layout"))
}

pub fn get_coils<T: Real>(c: &ArrayContainer) -> Result<CoilMaps<T>> {
    let (dims, v) = c.get_complex("coils")?;
    let d: [usize; 3] = dims_n("coils", &dims)?;
    Ok(CoilMaps::new(Array3::from_shape_vec((d[0], d[1], d[2]), v).expect("dims checked")))
}

pub fn put_masks(c: &mut ArrayContainer, masks: &FrameMasks) -> Result<()> {
    let (l, h, w) = masks.masks().dim();
    c.put_u8("masks", vec![l, h, w], masks.masks().iter().map(|&b| b as u8).collect())?;
    c.put_u8("masks.seed", vec![8], masks.seed.to_le_bytes().to_vec())
}

pub fn get_masks(c: &ArrayContainer) -> Result<FrameMasks> {
    let (dims, v) = c.get_u8("masks")?;
    let d: [usize; 3] = dims_n("masks", &dims)?;
    let (_, seed) = c.get_u8("masks.seed")?;
    let seed = u64::from_le_bytes(seed.as_slice().try_into().map_err(|_| format_err!("masks.seed must be 8 bytes"))?);
    let m = Array3::from_shape_vec((d[0], d[1], d[2]), v.into_iter().map(|b| b != 0).collect()).expect("dims checked");
    FrameMasks::new(m, seed)
}

pub fn put_basis<T: Real>(c: &mut ArrayContainer, basis: &Basis<T>) -> Result<()> {
    let (l, s) = basis.matrix().dim();
    c.put_complex("basis", vec![l, s], basis.matrix().as_slice().expect("standard layout"))
}

pub fn get_basis<T: Real>(c: &ArrayContainer) -> Result<Basis<T>> {
    let (dims, v) = c.get_complex("basis")?;
    let [l, s] = dims_n("basis", &dims)?;
    Basis::new(Array2::from_shape_vec((l, s), v).expect("dims checked"), T::lit(1e-5))
}

pub fn put_sequence<T: Real>(c: &mut ArrayContainer, seq: &SequenceParams<T>) -> Result<()> {
    c.put_real("seq.flip_deg", vec![seq.len()], &seq.flip_angles_deg)?;
    let inv = if seq.inversion { T::one() } else { T::zero() };
    let timing = [seq.tr_ms, seq.te_ms, seq.ti_ms, inv, T::from_usize_lossy(seq.n_epg_states)];
    c.put_real("seq.timing", vec![5], &timing)
}

pub fn get_sequence<T: Real>(c: &ArrayContainer) -> Result<SequenceParams<T>> {
    let (_, flips) = c.get_real::<T>("seq.flip_deg")?;
    let (_, t) = c.get_real::<T>("seq.timing")?;
    let [tr, te, ti, inv, n]: [T; 5] = t.as_slice().try_into().map_err(|_| format_err!("seq.timing must hold 5 values"))?;
    let n = n.to_usize().ok_or_else(|| format_err!("seq.timing: bad state count"))?;
    SequenceParams::new(flips, tr, te, ti, inv != T::zero())?.with_states(n)
}

pub fn put_qmaps<T: Real>(c: &mut ArrayContainer, q: &QMaps<T>) -> Result<()> {
    let (h, w) = q.dims();
    let std2 = |a: &Array2<T>| a.as_standard_layout().iter().copied().collect::<Vec<T>>();
    c.put_real("t1", vec![h, w], &std2(&q.t1_map))?;
    c.put_real("t2", vec![h, w], &std2(&q.t2_map))?;
    c.put_complex("rho", vec![h, w], &q.rho_map.iter().copied().collect::<Vec<_>>())?;
    c.put_u8("mask", vec![h, w], q.mask.iter().map(|&b| b as u8).collect())
}

pub fn get_qmaps<T: Real>(c: &ArrayContainer) -> Result<QMaps<T>> {
    let real = |name: &str| -> Result<Array2<T>> {
        let (dims, v) = c.get_real::<T>(name)?;
        let [h, w] = dims_n(name, &dims)?;
        Ok(Array2::from_shape_vec((h, w), v).expect("dims checked"))
    };
    let (dims, rho) = c.get_complex::<T>("rho")?;
    let [h, w] = dims_n("rho", &dims)?;
    let (mdims, mask) = c.get_u8("mask")?;
    let [mh, mw] = dims_n("mask", &mdims)?;
    let q = QMaps {
        t1_map: real("t1")?,
        t2_map: real("t2")?,
        rho_map: Array2::from_shape_vec((h, w), rho).expect("dims checked"),
        mask: Array2::from_shape_vec((mh, mw), mask.into_iter().map(|b| b != 0).collect()).expect("dims checked"),
    };
    q.validate()?;
    Ok(q)
}

/// Stores the LUT, full atoms, basis, and singular values.
pub fn put_dictionary<T: Real>(c: &mut ArrayContainer, dict: &Dictionary<T>) -> Result<()> {
    let lut: Vec<T> = dict.lut().entries().iter().flat_map(|&(a, b)| [a, b]).collect();
    c.put_real("lut", vec![dict.len(), 2], &lut)?;
    let (d, l) = dict.atoms_full().dim();
    c.put_complex("atoms", vec![d, l], dict.atoms_full().as_slice().expect("standard layout"))?;
    put_basis(c, dict.basis())?;
    c.put_real("singular_values", vec![dict.singular_values().len()], dict.singular_values())
}

pub fn get_dictionary<T: Real>(c: &ArrayContainer) -> Result<Dictionary<T>> {
    let (dims, v) = c.get_real::<T>("lut")?;
    let [d, two] = dims_n("lut", &dims)?;
    if two != 2 {
        return Err(format_err!("lut must be d x 2"));
    }
    let lut = Lut::new((0..d).map(|j| (v[2 * j], v[2 * j + 1])).collect())?;
    let (adims, atoms) = c.get_complex::<T>("atoms")?;
    let [ad, l] = dims_n("atoms", &adims)?;
    let atoms = Array2::from_shape_vec((ad, l), atoms).expect("dims checked");
    let basis = get_basis(c)?;
    let mut dict = Dictionary::from_atoms(lut, atoms, basis)?;
    if let Ok((_, sv)) = c.get_real::<T>("singular_values") {
        dict.set_singular_values(sv);
    }
    Ok(dict)
}
