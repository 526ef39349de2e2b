//! Flat binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  b"DWAEMLP\x01"
//! n_widths   u32
//! widths     n_widths x u32
//! per hidden layer: activation code u8, activation parameter u32
//!     codes: 0 relu, 1 groupsort(parameter = group size), 2 sigmoid, 3 tanh, 4 linear
//! output     code u8 (0 identity, 1 affine-rescale, 2 softplus), lo f64, hi f64
//! per layer: M_i row-major (N_{i+1} x N_i f64), then b_i (N_{i+1} f64)
//! ```

use std::io::{Read, Write};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::mlp::{Activation, Mlp, MlpSpec, OutputTransform};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DWAEMLP\x01";

pub fn save_mlp<W: Write>(mlp: &Mlp, mut w: W) -> Result<()> {
    let spec = mlp.spec();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(spec.widths.len() as u32).to_le_bytes())?;
    for &width in &spec.widths {
        w.write_all(&(width as u32).to_le_bytes())?;
    }
    for act in &spec.activations {
        let (code, param) = act.code();
        w.write_all(&[code])?;
        w.write_all(&param.to_le_bytes())?;
    }
    let (code, lo, hi) = match spec.output {
        OutputTransform::Identity => (0u8, 0.0, 0.0),
        OutputTransform::AffineRescale { lo, hi } => (1, lo, hi),
        OutputTransform::Softplus => (2, 0.0, 0.0),
    };
    w.write_all(&[code])?;
    w.write_all(&lo.to_le_bytes())?;
    w.write_all(&hi.to_le_bytes())?;
    for (m, b) in mlp.weights().iter().zip(mlp.biases()) {
        for v in m.data().iter().chain(b.data()) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint(format!("unexpected end of file reading {}", what)))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }
}

pub fn load_mlp<R: Read>(r: R) -> Result<Mlp> {
    let mut c = Cursor { inner: r };
    let magic: [u8; 8] = c.bytes("magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {:?}", magic)));
    }
    let n_widths = c.u32("width count")? as usize;
    if !(2..=1024).contains(&n_widths) {
        return Err(Error::Checkpoint(format!("implausible width count {}", n_widths)));
    }
    let widths = (0..n_widths)
        .map(|_| c.u32("widths").map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut activations = Vec::with_capacity(n_widths - 2);
    for _ in 0..n_widths - 2 {
        let [code] = c.bytes::<1>("activation")?;
        let param = c.u32("activation parameter")?;
        activations.push(
            Activation::from_code(code, param)
                .ok_or_else(|| Error::Checkpoint(format!("unknown activation code {}", code)))?,
        );
    }
    let [code] = c.bytes::<1>("output transform")?;
    let lo = c.f64("output lo")?;
    let hi = c.f64("output hi")?;
    let output = match code {
        0 => OutputTransform::Identity,
        1 => OutputTransform::AffineRescale { lo, hi },
        2 => OutputTransform::Softplus,
        _ => return Err(Error::Checkpoint(format!("unknown output code {}", code))),
    };
    let spec = MlpSpec {
        widths: widths.clone(),
        activations,
        output,
    };
    spec.validate()?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for i in 0..widths.len() - 1 {
        let (fi, fo) = (widths[i], widths[i + 1]);
        let m = (0..fi * fo).map(|_| c.f64("weights")).collect::<Result<Vec<_>>>()?;
        let b = (0..fo).map(|_| c.f64("biases")).collect::<Result<Vec<_>>>()?;
        weights.push(Tensor::matrix(fo, fi, m));
        biases.push(Tensor::new(vec![fo], b)?);
    }
    Mlp::from_parts(spec, weights, biases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let spec = MlpSpec::new(
            vec![3, 8, 4, 2],
            Activation::GroupSort(2),
            OutputTransform::AffineRescale { lo: 0.0, hi: 1.0 },
        );
        let net = Mlp::build(spec, 7).unwrap();
        let mut buf = Vec::new();
        save_mlp(&net, &mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let back = load_mlp(&buf[..]).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn truncated_and_corrupt_files_rejected() {
        let net = Mlp::build(MlpSpec::discriminator(2), 1).unwrap();
        let mut buf = Vec::new();
        save_mlp(&net, &mut buf).unwrap();
        assert!(matches!(load_mlp(&buf[..buf.len() - 1]), Err(Error::Checkpoint(_))));
        buf[0] = b'X';
        assert!(matches!(load_mlp(&buf[..]), Err(Error::Checkpoint(_))));
    }
}
