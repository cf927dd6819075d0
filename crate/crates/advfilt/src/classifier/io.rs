//! Weight-file serialization (AFNN).
//!
//! Little-endian layout: magic "AFNN", version u32, architecture
//! descriptor (layer count, then kind/out/in/width u32 quads per layer,
//! then the class-id list), then the raw f64 weight and bias arrays in
//! declaration order. The load path rejects anything that does not match
//! the fixed conv-conv-dense-dense family.

use super::{Classifier, ConvLayer, DenseLayer};
use crate::error::{Error, Result};
use crate::modgen::ModClass;

pub const AFNN_MAGIC: &[u8; 4] = b"AFNN";
pub const AFNN_VERSION: u32 = 1;

const KIND_CONV: u32 = 1;
const KIND_DENSE: u32 = 2;

pub fn write_afnn(net: &Classifier, path: &std::path::Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(AFNN_MAGIC);
    buf.extend_from_slice(&AFNN_VERSION.to_le_bytes());
    buf.extend_from_slice(&4u32.to_le_bytes());
    for (kind, a, b, c) in [
        (KIND_CONV, net.conv1.out_ch, net.conv1.in_ch, net.conv1.width),
        (KIND_CONV, net.conv2.out_ch, net.conv2.in_ch, net.conv2.width),
        (KIND_DENSE, net.dense1.out_dim, net.dense1.in_dim, 0),
        (KIND_DENSE, net.dense2.out_dim, net.dense2.in_dim, 0),
    ] {
        buf.extend_from_slice(&kind.to_le_bytes());
        buf.extend_from_slice(&(a as u32).to_le_bytes());
        buf.extend_from_slice(&(b as u32).to_le_bytes());
        buf.extend_from_slice(&(c as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(net.classes().len() as u32).to_le_bytes());
    for k in net.classes() {
        buf.extend_from_slice(&k.id().to_le_bytes());
    }
    for arr in [
        &net.conv1.w,
        &net.conv1.b,
        &net.conv2.w,
        &net.conv2.b,
        &net.dense1.w,
        &net.dense1.b,
        &net.dense2.w,
        &net.dense2.b,
    ] {
        for &v in arr.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("truncated weight file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn read_afnn(path: &std::path::Path) -> Result<Classifier> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != AFNN_MAGIC {
        return Err(Error::Format(format!(
            "bad weight-file magic {:?} in {}, expected {:?}",
            magic,
            path.display(),
            AFNN_MAGIC
        )));
    }
    let version = cur.u32()?;
    if version != AFNN_VERSION {
        return Err(Error::Format(format!(
            "unsupported weight-file version {version}, expected {AFNN_VERSION}"
        )));
    }
    let layer_count = cur.u32()?;
    if layer_count != 4 {
        return Err(Error::Format(format!(
            "expected 4 layers, file declares {layer_count}"
        )));
    }
    let mut shapes = Vec::with_capacity(4);
    for _ in 0..4 {
        shapes.push((cur.u32()?, cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize));
    }
    if shapes[0].0 != KIND_CONV
        || shapes[1].0 != KIND_CONV
        || shapes[2].0 != KIND_DENSE
        || shapes[3].0 != KIND_DENSE
    {
        return Err(Error::Format("unexpected layer kinds".into()));
    }
    let class_count = cur.u32()? as usize;
    let mut classes = Vec::with_capacity(class_count);
    for _ in 0..class_count {
        classes.push(ModClass::from_id(cur.u32()?)?);
    }
    if classes.len() != shapes[3].1 {
        return Err(Error::Format(
            "class list does not match the output layer width".into(),
        ));
    }
    let (_, c1o, c1i, c1w) = shapes[0];
    let (_, c2o, c2i, c2w) = shapes[1];
    let (_, d1o, d1i, _) = shapes[2];
    let (_, d2o, d2i, _) = shapes[3];
    if c2o == 0 || d1i % c2o != 0 {
        return Err(Error::Format("inconsistent flatten width".into()));
    }
    let l2 = d1i / c2o;
    let input_len = l2 + (c2w - 1) + (c1w - 1);
    let conv1 = ConvLayer {
        out_ch: c1o,
        in_ch: c1i,
        width: c1w,
        w: cur.f64s(c1o * c1i * c1w)?,
        b: cur.f64s(c1o)?,
    };
    let conv2 = ConvLayer {
        out_ch: c2o,
        in_ch: c2i,
        width: c2w,
        w: cur.f64s(c2o * c2i * c2w)?,
        b: cur.f64s(c2o)?,
    };
    let dense1 = DenseLayer {
        out_dim: d1o,
        in_dim: d1i,
        w: cur.f64s(d1o * d1i)?,
        b: cur.f64s(d1o)?,
    };
    let dense2 = DenseLayer {
        out_dim: d2o,
        in_dim: d2i,
        w: cur.f64s(d2o * d2i)?,
        b: cur.f64s(d2o)?,
    };
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes in weight file".into()));
    }
    Ok(Classifier {
        conv1,
        conv2,
        dense1,
        dense2,
        classes,
        input_len,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::ComplexSignal;
    use crate::modgen::{generate_signal, normalize_input};

    #[test]
    fn afnn_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.afnn");
        let net = Classifier::init_random(&ModClass::ALL, 64, 77).unwrap();
        write_afnn(&net, &path).unwrap();
        let loaded = read_afnn(&path).unwrap();
        assert_eq!(loaded.input_len(), 64);
        assert_eq!(loaded.classes(), net.classes());
        assert_eq!(loaded.conv1.w, net.conv1.w);
        assert_eq!(loaded.dense2.w, net.dense2.w);
        let s: ComplexSignal =
            normalize_input(&generate_signal(ModClass::Qpsk, 64, 5).unwrap()).unwrap();
        let p1 = net.predict(&s).unwrap();
        let p2 = loaded.predict(&s).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn afnn_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.afnn");
        std::fs::write(&path, b"XXXX\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_afnn(&path), Err(Error::Format(_))));
    }
}
