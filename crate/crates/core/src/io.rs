//! Dense tensor container.
//!
//! Little-endian throughout:
//!
//! ```text
//! rank                     (u64)
//! dims[rank]               (u64, outermost first)
//! data[Π dims]             (f64, IEEE 754, row-major)
//! ```
//!
//! Feature maps are stored as rank 3 `(C, H, W)`, filter banks as rank 4
//! `(K, C, r, r)`.

use std::io::{Read, Write};

use crate::bcoo::read_u64;
use crate::error::{Error, Result};
use crate::layout::{FeatureMap, FilterBank};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} hold {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.dims.len() as u64).to_le_bytes())?;
        for d in &self.dims {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let rank = read_u64(r)?;
        if rank > 8 {
            return Err(Error::Container(format!("rank {rank} is not supported")));
        }
        let dims = (0..rank).map(|_| read_u64(r)).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .filter(|n| *n <= 1 << 36)
            .ok_or_else(|| Error::Container(format!("implausible dims {dims:?}")))?;
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        Ok(Self { dims, data })
    }

    pub fn into_feature_map(self) -> Result<FeatureMap> {
        match self.dims[..] {
            [c, h, w] => FeatureMap::new(c, h, w, self.data),
            _ => Err(Error::Container(format!(
                "feature maps are rank 3, got dims {:?}",
                self.dims
            ))),
        }
    }

    pub fn into_filter_bank(self) -> Result<FilterBank> {
        match self.dims[..] {
            [k, c, r, s] if r == s => FilterBank::new(k, c, r, self.data),
            _ => Err(Error::Container(format!(
                "filter banks are rank 4 with square kernels, got dims {:?}",
                self.dims
            ))),
        }
    }
}

impl From<&FeatureMap> for DenseTensor {
    fn from(fm: &FeatureMap) -> Self {
        Self {
            dims: vec![fm.channels(), fm.height(), fm.width()],
            data: fm.as_slice().to_vec(),
        }
    }
}

impl From<&FilterBank> for DenseTensor {
    fn from(g: &FilterBank) -> Self {
        Self {
            dims: vec![g.filters(), g.channels(), g.size(), g.size()],
            data: g.as_slice().to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let fm = FeatureMap::from_fn(2, 1, 3, |c, _, j| (c * 3 + j) as f64);
        let mut buf = Vec::new();
        DenseTensor::from(&fm).write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 * (1 + 3 + 6));
        assert_eq!(&buf[..8], &3u64.to_le_bytes());
        assert_eq!(&buf[32..40], &0.0f64.to_le_bytes());
        let back = DenseTensor::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.into_feature_map().unwrap(), fm);
        assert!(DenseTensor::read_from(&mut &buf[..20]).is_err());
    }

    #[test]
    fn wrong_rank_is_rejected() {
        let t = DenseTensor::new(vec![2, 2], vec![0.0; 4]).unwrap();
        assert!(t.into_feature_map().is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }
}
