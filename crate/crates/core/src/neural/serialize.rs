//! Named-tensor wire format used by checkpoints: name length (u32 LE),
//! name bytes, rank (u32 LE), dims (u32 LE each), then the values as
//! little-endian 64-bit floats. Round trips are bit-exact.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

fn io_err(e: std::io::Error) -> Error {
    Error::io("tensor payload", e)
}

pub fn write_named_tensor<T: Real>(
    w: &mut impl Write,
    name: &str,
    tensor: &Tensor<T>,
) -> Result<()> {
    let bytes = name.as_bytes();
    w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(bytes).map_err(io_err)?;
    let shape = tensor.shape();
    w.write_all(&(shape.len() as u32).to_le_bytes()).map_err(io_err)?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
    }
    for &v in tensor.data() {
        w.write_all(&v.as_f64().to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_named_tensor<T: Real>(r: &mut impl Read) -> Result<(String, Tensor<T>)> {
    let name_len = read_u32(r)? as usize;
    let mut name_bytes = vec![0u8; name_len];
    r.read_exact(&mut name_bytes).map_err(io_err)?;
    let name = String::from_utf8(name_bytes)
        .map_err(|_| Error::InvalidInput("tensor name is not utf-8".into()))?;
    let rank = read_u32(r)? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    let count: usize = shape.iter().product();
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(io_err)?;
        data.push(T::of(f64::from_le_bytes(buf)));
    }
    Ok((name, Tensor::from_vec(&shape, data)?))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = Tensor::from_vec(
            &[2, 3],
            vec![1.0, -0.3333333333333333, 1e-308, f64::MAX, 0.1 + 0.2, -0.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_named_tensor(&mut buf, "enc.w_z", &t).unwrap();
        write_named_tensor(&mut buf, "b", &Tensor::vector(vec![2.5f64])).unwrap();

        let mut cursor = std::io::Cursor::new(&buf);
        let (name, back) = read_named_tensor::<f64>(&mut cursor).unwrap();
        assert_eq!(name, "enc.w_z");
        assert_eq!(back, t);
        let (name2, b2) = read_named_tensor::<f64>(&mut cursor).unwrap();
        assert_eq!(name2, "b");
        assert_eq!(b2.data(), &[2.5]);

        // writing the reread tensor reproduces the same bytes
        let mut buf2 = Vec::new();
        write_named_tensor(&mut buf2, "enc.w_z", &back).unwrap();
        write_named_tensor(&mut buf2, "b", &b2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn f32_round_trip_through_f64_payload() {
        let t = Tensor::from_vec(&[3], vec![0.1f32, -2.5, 3.25]).unwrap();
        let mut buf = Vec::new();
        write_named_tensor(&mut buf, "x", &t).unwrap();
        let (_, back) = read_named_tensor::<f32>(&mut std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, t);
    }
}
